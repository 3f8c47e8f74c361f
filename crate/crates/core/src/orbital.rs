//! Constellation geometry on a spherical, rotating Earth.
//!
//! Frame: Earth-centered inertial, z along the rotation axis, x through the
//! Greenwich meridian at clock time zero. Satellites fly circular polar
//! orbits; ground stations rotate with the Earth.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Vec3 = [f64; 3];

pub const EARTH_RADIUS: f64 = 6_371_000.0;
pub const EARTH_MU: f64 = 3.986_004_418e14;
pub const EARTH_ROTATION_PERIOD: f64 = 86_400.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OrbitalError {
    #[error("invalid constellation: {0}")]
    Config(String),
    #[error("unknown satellite `{0}`")]
    UnknownSatellite(String),
    #[error("unknown ground station `{0}`")]
    UnknownStation(String),
}

fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundStation {
    pub id: String,
    /// Degrees, [-90, 90].
    pub latitude: f64,
    /// Degrees, [-180, 180).
    pub longitude: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub receiver_cap: Option<u32>,
}

impl GroundStation {
    pub fn new(id: impl Into<String>, latitude: f64, longitude: f64) -> Self {
        Self {
            id: id.into(),
            latitude,
            longitude,
            receiver_cap: None,
        }
    }

    pub fn validate(&self) -> Result<(), OrbitalError> {
        if !(-90.0..=90.0).contains(&self.latitude) || !(-180.0..180.0).contains(&self.longitude) {
            return Err(OrbitalError::Config(format!(
                "station `{}` has coordinates ({}, {}) out of range",
                self.id, self.latitude, self.longitude
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SatelliteSpec {
    pub id: String,
    pub ring_index: usize,
    pub slot_index: usize,
    pub altitude: f64,
    pub transmitter_cap: u32,
    pub reflector_cap: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConstellationConfig {
    pub rings: usize,
    pub sats_per_ring: usize,
    /// Meters above the mean Earth radius.
    pub altitude: f64,
    /// Clock time (seconds after 00:00 UTC) of slot zero.
    pub epoch: f64,
    pub earth_radius: f64,
    pub earth_rotation_period: f64,
    pub gravitational_parameter: f64,
}

impl Default for ConstellationConfig {
    fn default() -> Self {
        Self {
            rings: 20,
            sats_per_ring: 20,
            altitude: 1_000_000.0,
            epoch: 0.0,
            earth_radius: EARTH_RADIUS,
            earth_rotation_period: EARTH_ROTATION_PERIOD,
            gravitational_parameter: EARTH_MU,
        }
    }
}

impl ConstellationConfig {
    pub fn validate(&self) -> Result<(), OrbitalError> {
        if self.rings == 0 || self.sats_per_ring == 0 {
            return Err(OrbitalError::Config("constellation needs at least one ring and one satellite".into()));
        }
        let positive = [
            ("altitude", self.altitude),
            ("earth_radius", self.earth_radius),
            ("earth_rotation_period", self.earth_rotation_period),
            ("gravitational_parameter", self.gravitational_parameter),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(OrbitalError::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.epoch >= 0.0 && self.epoch.is_finite()) {
            return Err(OrbitalError::Config(format!("epoch must be non-negative, got {}", self.epoch)));
        }
        Ok(())
    }

    pub fn orbit_radius(&self) -> f64 {
        self.earth_radius + self.altitude
    }

    /// Circular-orbit period from Kepler's third law.
    pub fn orbital_period(&self) -> f64 {
        TAU * (self.orbit_radius().powi(3) / self.gravitational_parameter).sqrt()
    }

    pub fn satellite_count(&self) -> usize {
        self.rings * self.sats_per_ring
    }

    /// Satellites in ring-major order, ids `S<ring>-<slot>`.
    pub fn satellites(&self, transmitter_cap: u32, reflector_cap: u32) -> Vec<SatelliteSpec> {
        (0..self.rings)
            .flat_map(|r| {
                (0..self.sats_per_ring).map(move |s| SatelliteSpec {
                    id: format!("S{r:02}-{s:02}"),
                    ring_index: r,
                    slot_index: s,
                    altitude: self.altitude,
                    transmitter_cap,
                    reflector_cap,
                })
            })
            .collect()
    }

    /// Clock time in seconds of slot `t`.
    pub fn clock(&self, t: usize, slot_duration: f64) -> f64 {
        self.epoch + t as f64 * slot_duration
    }
}

/// Inertial position of a point at (`lat`, `lon`) degrees on a sphere of
/// `radius`, after the sphere has turned by `rotation` radians.
pub fn surface_position(lat: f64, lon: f64, radius: f64, rotation: f64) -> Vec3 {
    let (phi, lam) = (lat.to_radians(), lon.to_radians() + rotation);
    [
        radius * phi.cos() * lam.cos(),
        radius * phi.cos() * lam.sin(),
        radius * phi.sin(),
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstellationSnapshot {
    pub time: usize,
    pub sat_ids: Vec<String>,
    pub sat_positions: Vec<Vec3>,
    pub gs_ids: Vec<String>,
    pub gs_positions: Vec<Vec3>,
    pub earth_radius: f64,
    sat_index: BTreeMap<String, usize>,
    gs_index: BTreeMap<String, usize>,
}

impl ConstellationSnapshot {
    pub fn new(
        time: usize,
        sats: Vec<(String, Vec3)>,
        stations: Vec<(String, Vec3)>,
        earth_radius: f64,
    ) -> Self {
        let (sat_ids, sat_positions): (Vec<_>, Vec<_>) = sats.into_iter().unzip();
        let (gs_ids, gs_positions): (Vec<_>, Vec<_>) = stations.into_iter().unzip();
        let sat_index = sat_ids.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
        let gs_index = gs_ids.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
        Self {
            time,
            sat_ids,
            sat_positions,
            gs_ids,
            gs_positions,
            earth_radius,
            sat_index,
            gs_index,
        }
    }

    pub fn sat(&self, id: &str) -> Result<usize, OrbitalError> {
        self.sat_index
            .get(id)
            .copied()
            .ok_or_else(|| OrbitalError::UnknownSatellite(id.to_string()))
    }

    pub fn station(&self, id: &str) -> Result<usize, OrbitalError> {
        self.gs_index
            .get(id)
            .copied()
            .ok_or_else(|| OrbitalError::UnknownStation(id.to_string()))
    }

    pub fn sat_position(&self, id: &str) -> Result<Vec3, OrbitalError> {
        Ok(self.sat_positions[self.sat(id)?])
    }

    pub fn gs_position(&self, id: &str) -> Result<Vec3, OrbitalError> {
        Ok(self.gs_positions[self.station(id)?])
    }
}

/// Place every satellite and station at slot `t`.
///
/// Ring `r` has its ascending node at `r * pi / rings`; satellite `s` in that
/// ring starts at argument of latitude `2 pi s / n + 2 pi r / (rings n)`.
pub fn propagate(
    config: &ConstellationConfig,
    stations: &[GroundStation],
    t: usize,
    slot_duration: f64,
) -> Result<ConstellationSnapshot, OrbitalError> {
    config.validate()?;
    let elapsed = t as f64 * slot_duration;
    let clock = config.clock(t, slot_duration);
    let mean_motion = TAU / config.orbital_period();
    let radius = config.orbit_radius();
    let n = config.sats_per_ring as f64;
    let total = config.satellite_count() as f64;

    let sats = config
        .satellites(0, 0)
        .into_iter()
        .map(|s| {
            let raan = s.ring_index as f64 * PI / config.rings as f64;
            let u = TAU * s.slot_index as f64 / n + TAU * s.ring_index as f64 / total + mean_motion * elapsed;
            // inclination 90 degrees
            let pos = [
                radius * raan.cos() * u.cos(),
                radius * raan.sin() * u.cos(),
                radius * u.sin(),
            ];
            (s.id, pos)
        })
        .collect();

    let rotation = TAU * clock / config.earth_rotation_period;
    let gs = stations
        .iter()
        .map(|g| {
            (
                g.id.clone(),
                surface_position(g.latitude, g.longitude, config.earth_radius, rotation),
            )
        })
        .collect();
    Ok(ConstellationSnapshot::new(t, sats, gs, config.earth_radius))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinkGeometry {
    /// Degrees above the local horizon.
    pub elevation: f64,
    /// Meters.
    pub slant_range: f64,
    /// Meters of the slant path below the atmosphere ceiling.
    pub atmospheric_path: f64,
}

/// Geometry of the line from a ground point to a satellite.
pub fn geometry_between(gs: Vec3, sat: Vec3, atmosphere_height: f64) -> LinkGeometry {
    let d = sub(sat, gs);
    let slant_range = norm(d);
    let r_gs = norm(gs);
    let elevation = if slant_range == 0.0 {
        90.0
    } else {
        (dot(d, gs) / (slant_range * r_gs)).clamp(-1.0, 1.0).asin().to_degrees()
    };
    let sin_e = elevation.to_radians().sin();
    let top = r_gs + atmosphere_height;
    let along = (top * top - r_gs * r_gs * (1.0 - sin_e * sin_e)).max(0.0).sqrt() - r_gs * sin_e;
    LinkGeometry {
        elevation,
        slant_range,
        atmospheric_path: along.clamp(0.0, slant_range),
    }
}

pub fn link_geometry(
    snapshot: &ConstellationSnapshot,
    sat: &str,
    gs: &str,
    atmosphere_height: f64,
) -> Result<LinkGeometry, OrbitalError> {
    Ok(geometry_between(
        snapshot.gs_position(gs)?,
        snapshot.sat_position(sat)?,
        atmosphere_height,
    ))
}

/// Whether the straight segment `a`-`b` stays at least `min_radius` from the
/// origin.
pub fn segment_clears(a: Vec3, b: Vec3, min_radius: f64) -> bool {
    let d = sub(b, a);
    let len2 = dot(d, d);
    let s = if len2 == 0.0 {
        0.0
    } else {
        (-dot(a, d) / len2).clamp(0.0, 1.0)
    };
    let closest = [a[0] + s * d[0], a[1] + s * d[1], a[2] + s * d[2]];
    norm(closest) >= min_radius
}

pub fn inter_satellite_visible(
    snapshot: &ConstellationSnapshot,
    sat_a: &str,
    sat_b: &str,
    clearance: f64,
) -> Result<bool, OrbitalError> {
    Ok(segment_clears(
        snapshot.sat_position(sat_a)?,
        snapshot.sat_position(sat_b)?,
        snapshot.earth_radius + clearance,
    ))
}

/// Great-circle distance (haversine).
pub fn geodesic_distance(a: &GroundStation, b: &GroundStation, earth_radius: f64) -> f64 {
    let (p1, p2) = (a.latitude.to_radians(), b.latitude.to_radians());
    let dp = p2 - p1;
    let dl = (b.longitude - a.longitude).to_radians();
    let h = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
    2.0 * earth_radius * h.sqrt().clamp(0.0, 1.0).asin()
}

/// Closed interval of orbit angles (radians).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Arc {
    pub start: f64,
    pub end: f64,
}

impl Arc {
    fn nonempty(start: f64, end: f64) -> Option<Arc> {
        (end > start).then_some(Arc { start, end })
    }

    pub fn contains(&self, angle: f64) -> bool {
        angle >= self.start && angle <= self.end
    }

    pub fn width(&self) -> f64 {
        self.end - self.start
    }
}

/// Visibility arcs for two stations under a coplanar (overhead) orbit.
///
/// Orbit angles are measured counterclockwise from the baseline midpoint:
/// station 1 sits at `-baseline / (2 R)`, station 2 at `+baseline / (2 R)`.
/// `*_left` is the counterclockwise endpoint of a station's arc, `*_right`
/// the clockwise one.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OverheadArcs {
    pub g1_left: f64,
    pub g1_right: f64,
    pub g2_left: f64,
    pub g2_right: f64,
    pub station1_angle: f64,
    pub station2_angle: f64,
    /// Angles where both stations see the satellite.
    pub primary_arc: Option<Arc>,
    /// (seen only by station 1, seen only by station 2).
    pub reflection_arc_pairs: Option<(Arc, Arc)>,
}

/// Elevation (degrees) of a satellite at orbit angle `sat_angle`, seen from a
/// station at `station_angle` in the same plane.
pub fn coplanar_elevation(sat_angle: f64, station_angle: f64, earth_radius: f64, orbit_radius: f64) -> f64 {
    let g = sat_angle - station_angle;
    (g.cos() - earth_radius / orbit_radius).atan2(g.sin().abs()).to_degrees()
}

/// Slant range for the same coplanar configuration.
pub fn coplanar_range(sat_angle: f64, station_angle: f64, earth_radius: f64, orbit_radius: f64) -> f64 {
    let g = sat_angle - station_angle;
    (earth_radius * earth_radius + orbit_radius * orbit_radius - 2.0 * earth_radius * orbit_radius * g.cos())
        .max(0.0)
        .sqrt()
}

pub fn overhead_visibility_arcs(
    baseline: f64,
    altitude: f64,
    min_elevation: f64,
    earth_radius: f64,
) -> OverheadArcs {
    let orbit_radius = earth_radius + altitude;
    let theta = min_elevation.to_radians();
    let half = (earth_radius * theta.cos() / orbit_radius).acos() - theta;
    let phi1 = -baseline / (2.0 * earth_radius);
    let phi2 = baseline / (2.0 * earth_radius);
    let (g1_left, g1_right) = (phi1 + half, phi1 - half);
    let (g2_left, g2_right) = (phi2 + half, phi2 - half);

    // Stations more than half a circumference apart have no usable geometry.
    let degenerate = !(baseline >= 0.0 && baseline < PI * earth_radius) || half <= 0.0;
    let (primary_arc, reflection_arc_pairs) = if degenerate {
        (None, None)
    } else {
        let primary = Arc::nonempty(g2_right, g1_left);
        let only1 = Arc::nonempty(g1_right, g1_left.min(g2_right));
        let only2 = Arc::nonempty(g2_right.max(g1_left), g2_left);
        (primary, only1.zip(only2))
    };
    OverheadArcs {
        g1_left,
        g1_right,
        g2_left,
        g2_right,
        station1_angle: phi1,
        station2_angle: phi2,
        primary_arc,
        reflection_arc_pairs,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_sat() -> ConstellationConfig {
        ConstellationConfig {
            rings: 1,
            sats_per_ring: 1,
            ..Default::default()
        }
    }

    #[test]
    fn kepler_period_at_1000_km() {
        // Independent: T = 2 pi sqrt(a^3 / mu) with a = 7371 km.
        let a: f64 = 7_371_000.0;
        let expected = 2.0 * std::f64::consts::PI * (a * a * a / 3.986e14).sqrt();
        let cfg = ConstellationConfig {
            gravitational_parameter: 3.986e14,
            ..Default::default()
        };
        assert!((cfg.orbital_period() - expected).abs() < 1e-9);
        assert!((cfg.orbital_period() - 6298.0).abs() < 0.1);
    }

    #[test]
    fn zero_rings_rejected() {
        let cfg = ConstellationConfig {
            rings: 0,
            ..Default::default()
        };
        assert!(matches!(propagate(&cfg, &[], 0, 10.0), Err(OrbitalError::Config(_))));
    }

    #[test]
    fn stations_periodic_over_one_rotation() {
        let cfg = one_sat();
        let gs = [GroundStation::new("A", 37.0, -122.0), GroundStation::new("B", -33.9, 151.2)];
        let a = propagate(&cfg, &gs, 0, 10.0).unwrap();
        let b = propagate(&cfg, &gs, 8640, 10.0).unwrap();
        for (p, q) in a.gs_positions.iter().zip(&b.gs_positions) {
            assert!(norm(sub(*p, *q)) < 1e-6);
        }
    }

    #[test]
    fn first_satellite_over_null_island() {
        let cfg = one_sat();
        let snap = propagate(&cfg, &[GroundStation::new("O", 0.0, 0.0)], 0, 10.0).unwrap();
        let p = snap.sat_positions[0];
        let lat = (p[2] / norm(p)).asin().to_degrees();
        let lon = p[1].atan2(p[0]).to_degrees();
        assert!(lat.abs() < 1e-9 && lon.abs() < 1e-9);
        let g = link_geometry(&snap, "S00-00", "O", 20_000.0).unwrap();
        assert!((g.elevation - 90.0).abs() < 1e-9);
        assert!((g.slant_range - 1_000_000.0).abs() < 1e-6);
        assert!((g.atmospheric_path - 20_000.0).abs() < 1e-6);
    }

    #[test]
    fn below_horizon_is_negative() {
        let gs = [0.0, 0.0, EARTH_RADIUS];
        let sat = [0.0, 0.0, -(EARTH_RADIUS + 1e6)];
        assert!(geometry_between(gs, sat, 20e3).elevation < 0.0);
    }

    #[test]
    fn unknown_ids() {
        let snap = propagate(&one_sat(), &[GroundStation::new("O", 0.0, 0.0)], 0, 10.0).unwrap();
        assert!(matches!(
            link_geometry(&snap, "nope", "O", 0.0),
            Err(OrbitalError::UnknownSatellite(_))
        ));
        assert!(matches!(
            inter_satellite_visible(&snap, "S00-00", "X", 0.0),
            Err(OrbitalError::UnknownSatellite(_))
        ));
        assert!(matches!(
            link_geometry(&snap, "S00-00", "Z", 0.0),
            Err(OrbitalError::UnknownStation(_))
        ));
    }

    #[test]
    fn inter_satellite_cases() {
        let r = EARTH_RADIUS + 500e3;
        assert!(segment_clears([r, 0.0, 0.0], [r, 0.0, 0.0], EARTH_RADIUS));
        assert!(!segment_clears([r, 0.0, 0.0], [-r, 0.0, 0.0], EARTH_RADIUS));
        // neighbours 18 degrees apart in a ring of 20 at 1000 km
        let cfg = ConstellationConfig {
            rings: 1,
            ..Default::default()
        };
        let snap = propagate(&cfg, &[], 0, 10.0).unwrap();
        assert!(inter_satellite_visible(&snap, "S00-00", "S00-01", 0.0).unwrap());
        assert!(!inter_satellite_visible(&snap, "S00-00", "S00-10", 0.0).unwrap());
    }

    #[test]
    fn geodesic_examples() {
        let o = GroundStation::new("o", 0.0, 0.0);
        assert_eq!(geodesic_distance(&o, &o, EARTH_RADIUS), 0.0);
        let anti = GroundStation::new("a", 0.0, -180.0);
        assert!((geodesic_distance(&o, &anti, EARTH_RADIUS) - 20_015_087.0).abs() < 1000.0);
        let q = GroundStation::new("q", 0.0, 90.0);
        assert!((geodesic_distance(&o, &q, EARTH_RADIUS) - 10_007_543.0).abs() < 1000.0);
    }

    #[test]
    fn arcs_at_zero_baseline_coincide() {
        let arcs = overhead_visibility_arcs(0.0, 1e6, 20.0, EARTH_RADIUS);
        assert_eq!(arcs.g1_left, arcs.g2_left);
        let p = arcs.primary_arc.unwrap();
        assert_eq!(p.start, arcs.g1_right);
        assert_eq!(p.end, arcs.g1_left);
        assert!(arcs.reflection_arc_pairs.is_none());
    }

    #[test]
    fn arcs_symmetric_about_midpoint() {
        let arcs = overhead_visibility_arcs(1_500e3, 1e6, 20.0, EARTH_RADIUS);
        assert!((arcs.g1_left + arcs.g2_right).abs() < 1e-12);
        assert!((arcs.g1_right + arcs.g2_left).abs() < 1e-12);
        let (a, b) = arcs.reflection_arc_pairs.unwrap();
        assert!((a.start + b.end).abs() < 1e-12 && (a.end + b.start).abs() < 1e-12);
    }

    #[test]
    fn wide_baseline_has_only_reflection_arcs() {
        let arcs = overhead_visibility_arcs(4_000e3, 1e6, 20.0, EARTH_RADIUS);
        assert!(arcs.primary_arc.is_none());
        let (a, b) = arcs.reflection_arc_pairs.unwrap();
        assert!(a.width() > 0.0 && b.width() > 0.0);
        // arc half-width matches dense angular sampling of the elevation
        let ro = EARTH_RADIUS + 1e6;
        let mut last_visible = 0.0;
        let mut g = 0.0;
        while g < 1.0 {
            if coplanar_elevation(g, 0.0, EARTH_RADIUS, ro) >= 20.0 {
                last_visible = g;
            }
            g += 1e-6;
        }
        let half = arcs.g1_left - arcs.station1_angle;
        assert!((half - last_visible).abs() < 2e-6);
    }

    #[test]
    fn antipodal_baseline_is_empty() {
        let arcs = overhead_visibility_arcs(PI * EARTH_RADIUS, 1e6, 20.0, EARTH_RADIUS);
        assert!(arcs.primary_arc.is_none() && arcs.reflection_arc_pairs.is_none());
    }
}
