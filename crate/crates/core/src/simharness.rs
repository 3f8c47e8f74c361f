//! Day-scale simulation loop, reported metrics and the two-satellite
//! overhead-orbit study.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::TAU;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::environment::{atmospheric_transmissivity, load_weather, synth_weather, EnvironmentError, EnvironmentTable};
use crate::linkphys::{
    aperture_transmissivity, arm_transmissivity, end_to_end_outcome, free_space_transmissivity, reflection_arms,
    ArmChannel,
};
use crate::orbital::{
    coplanar_elevation, coplanar_range, overhead_visibility_arcs, propagate, ConstellationConfig, GroundStation,
    OrbitalError, EARTH_MU, EARTH_RADIUS,
};
use crate::scheduler::{
    all_pairs, build_reflection_weights, build_weights, Allocation, BuildContext, Capacities, PairSpec,
    PhysicsParams, Policy, SchedulerError, SlotInstance,
};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("scenario: {0}")]
    Config(String),
    #[error("slot {t}: {source}")]
    Slot { t: usize, source: SchedulerError },
    #[error(transparent)]
    Environment(#[from] EnvironmentError),
    #[error(transparent)]
    Orbital(#[from] OrbitalError),
    #[error("allocation shapes differ: {0}")]
    Shape(String),
    #[error("writing results: {0}")]
    Io(#[from] std::io::Error),
    #[error("serializing results: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum WeatherSource {
    /// CSV file in the weather schema.
    File(PathBuf),
    /// Generated table over the scenario's stations and month.
    Synth { seed: u64 },
}

impl Default for WeatherSource {
    fn default() -> Self {
        WeatherSource::Synth { seed: 1 }
    }
}

/// Seventeen major cities: thirteen northern, four southern.
pub fn default_stations() -> Vec<GroundStation> {
    [
        ("NewYork", 40.71, -74.01),
        ("LosAngeles", 34.05, -118.24),
        ("Chicago", 41.88, -87.63),
        ("Toronto", 43.65, -79.38),
        ("London", 51.51, -0.13),
        ("Paris", 48.86, 2.35),
        ("Berlin", 52.52, 13.40),
        ("Moscow", 55.76, 37.62),
        ("Cairo", 30.04, 31.24),
        ("Mumbai", 19.08, 72.88),
        ("Beijing", 39.90, 116.40),
        ("Tokyo", 35.68, 139.69),
        ("Singapore", 1.35, 103.82),
        ("Sydney", -33.87, 151.21),
        ("SaoPaulo", -23.55, -46.63),
        ("Johannesburg", -26.20, 28.05),
        ("BuenosAires", -34.60, -58.38),
    ]
    .into_iter()
    .map(|(id, lat, lon)| GroundStation::new(id, lat, lon))
    .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub constellation: ConstellationConfig,
    pub stations: Vec<GroundStation>,
    /// `None` means every station pair.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pairs: Option<Vec<PairSpec>>,
    /// Seconds.
    pub slot_duration: f64,
    /// Number of slots.
    pub horizon: usize,
    pub month: u8,
    pub policy: Policy,
    pub physics: PhysicsParams,
    pub caps: Capacities,
    pub mirror_efficiency: f64,
    pub weather: WeatherSource,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            constellation: ConstellationConfig::default(),
            stations: default_stations(),
            pairs: None,
            slot_duration: 10.0,
            horizon: 8640,
            month: 9,
            policy: Policy::PrimaryRatesum,
            physics: PhysicsParams::default(),
            caps: Capacities::default(),
            mirror_efficiency: 0.99,
            weather: WeatherSource::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn pair_list(&self) -> Vec<PairSpec> {
        self.pairs.clone().unwrap_or_else(|| all_pairs(&self.stations))
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::Config(m));
        self.constellation.validate()?;
        self.physics.validate().map_err(|e| SimError::Config(e.to_string()))?;
        if !(self.slot_duration > 0.0 && self.slot_duration.is_finite()) {
            return bad(format!("slot_duration must be positive, got {}", self.slot_duration));
        }
        if self.horizon == 0 {
            return bad("horizon must be at least one slot".into());
        }
        if !(1..=12).contains(&self.month) {
            return bad(format!("month must lie in 1..=12, got {}", self.month));
        }
        if !(0.0..=1.0).contains(&self.mirror_efficiency) {
            return bad(format!("mirror_efficiency must lie in [0, 1], got {}", self.mirror_efficiency));
        }
        let mut ids = BTreeSet::new();
        for g in &self.stations {
            g.validate()?;
            if !ids.insert(g.id.as_str()) {
                return bad(format!("duplicate station id `{}`", g.id));
            }
        }
        let receivers: BTreeMap<&str, u32> = self
            .stations
            .iter()
            .map(|g| (g.id.as_str(), g.receiver_cap.unwrap_or(self.caps.receivers)))
            .collect();
        let mut pair_ids = BTreeSet::new();
        for p in self.pair_list() {
            if !pair_ids.insert(p.id.clone()) {
                return bad(format!("duplicate pair id `{}`", p.id));
            }
            if p.station_a == p.station_b {
                return bad(format!("pair `{}` joins a station to itself", p.id));
            }
            let cap = p.pair_cap.unwrap_or(self.caps.pair_connections);
            for s in [&p.station_a, &p.station_b] {
                match receivers.get(s.as_str()) {
                    None => return bad(format!("pair `{}` names unknown station `{s}`", p.id)),
                    Some(&r) if r < cap => {
                        return bad(format!(
                            "station `{s}` has {r} receivers, fewer than pair `{}` cap {cap}",
                            p.id
                        ))
                    }
                    _ => {}
                }
            }
        }
        Ok(())
    }

    /// Weather table for the run, checked to cover every station.
    pub fn weather_table(&self, base_dir: Option<&Path>) -> Result<EnvironmentTable, SimError> {
        let table = match &self.weather {
            WeatherSource::File(p) => {
                let path = match base_dir {
                    Some(d) if p.is_relative() => d.join(p),
                    _ => p.clone(),
                };
                load_weather(&path)?
            }
            WeatherSource::Synth { seed } => synth_weather(*seed, &self.stations, &[self.month]),
        };
        for g in &self.stations {
            if !table.covers(&g.id, self.month) {
                return Err(EnvironmentError::Missing {
                    station: g.id.clone(),
                    month: self.month,
                }
                .into());
            }
        }
        Ok(table)
    }

    /// UTC hour of day at slot `t`.
    pub fn hour_utc(&self, t: usize) -> f64 {
        (self.constellation.clock(t, self.slot_duration) / 3600.0).rem_euclid(24.0)
    }
}

/// Six stations in the eastern and midwestern United States on a 4 x 10
/// constellation with one-minute slots over a day.
pub fn reduced_scenario() -> ScenarioConfig {
    let stations = [
        ("NYC", 40.71, -74.01),
        ("WDC", 38.91, -77.04),
        ("CHI", 41.88, -87.63),
        ("TOR", 43.65, -79.38),
        ("ATL", 33.75, -84.39),
        ("BOS", 42.36, -71.06),
    ]
    .into_iter()
    .map(|(id, lat, lon)| GroundStation::new(id, lat, lon))
    .collect();
    ScenarioConfig {
        constellation: ConstellationConfig {
            rings: 4,
            sats_per_ring: 10,
            ..Default::default()
        },
        stations,
        slot_duration: 60.0,
        horizon: 1440,
        ..Default::default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlotMetrics {
    pub t: usize,
    pub aggregate_edr: f64,
    /// In the order of `RunReport::pair_ids`.
    pub per_pair_edr: Vec<f64>,
    pub connectivity: usize,
    pub handovers_since_prev: usize,
    pub gap_limited: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub policy: Policy,
    pub slot_duration: f64,
    pub pair_ids: Vec<String>,
    pub series: Vec<SlotMetrics>,
    /// Ebits over the horizon, per pair.
    pub per_pair_daily: BTreeMap<String, f64>,
    pub served_pair_count: usize,
    pub total_handovers: usize,
}

impl RunReport {
    pub fn mean_aggregate_edr(&self) -> f64 {
        self.series.iter().map(|s| s.aggregate_edr).sum::<f64>() / self.series.len().max(1) as f64
    }

    pub fn mean_connectivity(&self) -> f64 {
        self.series.iter().map(|s| s.connectivity as f64).sum::<f64>() / self.series.len().max(1) as f64
    }

    pub fn write_metrics_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,aggregate_edr,connectivity,handovers")?;
        for s in &self.series {
            writeln!(w, "{},{},{},{}", s.t, s.aggregate_edr, s.connectivity, s.handovers_since_prev)?;
        }
        Ok(())
    }

    pub fn write_per_pair_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "pair_id,daily_ebits")?;
        for id in &self.pair_ids {
            writeln!(w, "{},{}", id, self.per_pair_daily[id])?;
        }
        Ok(())
    }
}

/// Pairs with at least one direct option above the gates.
pub fn connectivity(inst: &SlotInstance) -> usize {
    (0..inst.num_pairs())
        .filter(|&j| inst.omega.iter().any(|row| row[j] > 0.0))
        .count()
}

/// Per-pair connection sets; relayed options are keyed by (source, relay).
pub type ConnectionSets = Vec<BTreeSet<(usize, Option<usize>)>>;

pub fn connection_sets(alloc: &Allocation, pairs: usize) -> ConnectionSets {
    (0..pairs).map(|j| alloc.connections(j).into_iter().collect()).collect()
}

fn handovers_between(prev: &ConnectionSets, next: &ConnectionSets) -> usize {
    prev.iter()
        .zip(next)
        .filter(|(p, n)| !p.is_empty() && !n.is_empty())
        .map(|(p, n)| p.difference(n).count())
        .sum()
}

/// Connections that a continuously served pair dropped between two slots.
/// A pair that loses service entirely does not count.
pub fn count_handovers(prev: &Allocation, next: &Allocation) -> Result<usize, SimError> {
    let shape = |a: &Allocation| (a.x.len(), a.x.first().map_or(0, Vec::len));
    if shape(prev) != shape(next) {
        return Err(SimError::Shape(format!("{:?} vs {:?}", shape(prev), shape(next))));
    }
    let m = shape(prev).1;
    Ok(handovers_between(&connection_sets(prev, m), &connection_sets(next, m)))
}

struct SlotOutcome {
    per_pair: Vec<f64>,
    connectivity: usize,
    connections: ConnectionSets,
    gap_limited: bool,
    allocation: Option<serde_json::Value>,
}

pub fn run(config: &ScenarioConfig) -> Result<RunReport, SimError> {
    run_with(config, None, false).map(|(r, _)| r)
}

/// Run a scenario. `base_dir` resolves a relative weather path; with
/// `keep_allocations` every slot's allocation is returned as JSON.
pub fn run_with(
    config: &ScenarioConfig,
    base_dir: Option<&Path>,
    keep_allocations: bool,
) -> Result<(RunReport, Vec<serde_json::Value>), SimError> {
    config.validate()?;
    let weather = config.weather_table(base_dir)?;
    let pairs = config.pair_list();
    let policy = config.policy;

    let outcomes = (0..config.horizon)
        .into_par_iter()
        .map(|t| {
            let at = |source: SchedulerError| SimError::Slot { t, source };
            let snapshot = propagate(&config.constellation, &config.stations, t, config.slot_duration)?;
            let ctx = BuildContext {
                stations: &config.stations,
                pairs: &pairs,
                physics: &config.physics,
                weather: &weather,
                caps: &config.caps,
                month: config.month,
                hour_utc: config.hour_utc(t),
            };
            let inst = if policy.uses_reflection() {
                build_reflection_weights(&snapshot, &ctx, config.mirror_efficiency)
            } else {
                build_weights(&snapshot, &ctx)
            }
            .map_err(at)?;
            let alloc = policy.solve(&inst).map_err(at)?;
            Ok(SlotOutcome {
                per_pair: alloc.per_pair_edr(&inst),
                connectivity: connectivity(&inst),
                connections: connection_sets(&alloc, inst.num_pairs()),
                gap_limited: alloc.gap_limited,
                allocation: keep_allocations.then(|| alloc.to_json(&inst, policy)),
            })
        })
        .collect::<Result<Vec<SlotOutcome>, SimError>>()?;

    let pair_ids: Vec<String> = pairs.iter().map(|p| p.id.clone()).collect();
    let mut daily = vec![0.0; pairs.len()];
    let mut series = Vec::with_capacity(outcomes.len());
    let mut allocations = Vec::new();
    let mut total_handovers = 0;
    let mut prev: Option<&ConnectionSets> = None;
    for (t, o) in outcomes.iter().enumerate() {
        let handovers = prev.map_or(0, |p| handovers_between(p, &o.connections));
        total_handovers += handovers;
        prev = Some(&o.connections);
        for (d, &e) in daily.iter_mut().zip(&o.per_pair) {
            *d += e * config.slot_duration;
        }
        series.push(SlotMetrics {
            t,
            aggregate_edr: o.per_pair.iter().sum(),
            per_pair_edr: o.per_pair.clone(),
            connectivity: o.connectivity,
            handovers_since_prev: handovers,
            gap_limited: o.gap_limited,
        });
    }
    for o in outcomes {
        allocations.extend(o.allocation);
    }
    let per_pair_daily: BTreeMap<String, f64> = pair_ids.iter().cloned().zip(daily).collect();
    let served_pair_count = per_pair_daily.values().filter(|&&v| v > 0.0).count();
    Ok((
        RunReport {
            policy,
            slot_duration: config.slot_duration,
            pair_ids,
            series,
            per_pair_daily,
            served_pair_count,
            total_handovers,
        },
        allocations,
    ))
}

/// Parameters of the two-satellite overhead-orbit study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CaseStudyParams {
    /// Meters.
    pub altitude: f64,
    pub physics: PhysicsParams,
    /// Clear-sky zenith transmissivity at both stations.
    pub zenith_transmissivity: f64,
    pub mirror_efficiency: f64,
    /// Relative phase offsets tried, evenly over one revolution inclusive.
    pub phase_points: usize,
    /// Integration step, seconds.
    pub time_step: f64,
    pub earth_radius: f64,
    pub gravitational_parameter: f64,
}

impl Default for CaseStudyParams {
    fn default() -> Self {
        Self {
            altitude: 1_000_000.0,
            physics: PhysicsParams::default(),
            zenith_transmissivity: 0.8,
            mirror_efficiency: 0.99,
            phase_points: 721,
            time_step: 1.0,
            earth_radius: EARTH_RADIUS,
            gravitational_parameter: EARTH_MU,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CaseStudyResult {
    /// Meters.
    pub baseline: f64,
    /// Ebits per pass.
    pub primary_edr: f64,
    pub reflection_edr: f64,
}

impl CaseStudyResult {
    /// Reflection over primary; `None` when the primary pass delivers nothing.
    pub fn ratio(&self) -> Option<f64> {
        (self.primary_edr > 0.0).then(|| self.reflection_edr / self.primary_edr)
    }
}

/// Ebits over one pass of a satellite (and, for the relayed scheme, a
/// second satellite on the same orbit) above two stations `baseline` apart.
///
/// The lead satellite sweeps the stations' arcs at the orbit's angular rate.
/// The primary scheme serves from the lead satellite while it sits on the
/// overlap arc. The relayed scheme adds a trailing satellite at a fixed
/// phase offset: whenever one satellite is seen only by one station and the
/// other only by the other station, the pair is served by relay instead.
/// The offset is swept over a grid and the best pass total reported.
pub fn case_study(baseline: f64, params: &CaseStudyParams) -> CaseStudyResult {
    let p = &params.physics;
    let re = params.earth_radius;
    let ro = re + params.altitude;
    let rate = (params.gravitational_parameter / ro.powi(3)).sqrt();
    let arcs = overhead_visibility_arcs(baseline, params.altitude, p.min_elevation, re);
    let stations = [arcs.station1_angle, arcs.station2_angle];

    let arm = |angle: f64, station: f64| -> ArmChannel {
        let e = coplanar_elevation(angle, station, re, ro);
        let t = if e > 0.0 {
            arm_transmissivity(
                free_space_transmissivity(&p.optics, coplanar_range(angle, station, re, ro)),
                atmospheric_transmissivity(params.zenith_transmissivity, e),
                p.optics.tx_efficiency,
                p.optics.rx_efficiency,
            )
        } else {
            0.0
        };
        ArmChannel::new(t, 0.0)
    };
    let gated = |a1: &ArmChannel, a2: &ArmChannel| {
        let o = end_to_end_outcome(&p.source, a1, a2);
        if o.fidelity >= p.fidelity_threshold {
            o.edr
        } else {
            0.0
        }
    };

    let half = arcs.g1_left - arcs.station1_angle;
    let start = arcs.g1_right.min(arcs.g2_right) - 0.01;
    let end = arcs.g1_left.max(arcs.g2_left) + 0.01;
    let steps = if half > 0.0 {
        ((end - start) / (rate * params.time_step)) as usize + 1
    } else {
        0
    };
    let angles: Vec<f64> = (0..steps).map(|s| start + rate * params.time_step * s as f64).collect();
    let primary: Vec<f64> = angles
        .iter()
        .map(|&a| match arcs.primary_arc {
            Some(arc) if arc.contains(a) => gated(&arm(a, stations[0]), &arm(a, stations[1])),
            _ => 0.0,
        })
        .collect();
    let primary_edr: f64 = primary.iter().map(|r| r * params.time_step).sum();

    let Some((only1, only2)) = arcs.reflection_arc_pairs else {
        return CaseStudyResult {
            baseline,
            primary_edr,
            reflection_edr: primary_edr,
        };
    };
    let only = [only1, only2];
    let min_radius = re + p.isl_clearance;
    let wrap = |a: f64| a - TAU * (a / TAU).round();
    let relayed = |src: f64, rel: f64| -> f64 {
        let mut best: f64 = 0.0;
        for (s, r) in [(0usize, 1usize), (1, 0)] {
            if !(only[s].contains(src) && only[r].contains(rel)) {
                continue;
            }
            let sep = wrap(src - rel).abs();
            if ro * (sep / 2.0).cos() < min_radius {
                continue;
            }
            let isl = aperture_transmissivity(
                p.optics.tx_radius,
                p.relay_aperture_radius,
                p.optics.wavelength,
                2.0 * ro * (sep / 2.0).sin(),
            );
            let (a1, a2) = reflection_arms(arm(src, stations[s]), isl, params.mirror_efficiency, arm(rel, stations[r]));
            best = best.max(gated(&a1, &a2));
        }
        best
    };

    let denom = (params.phase_points.max(2) - 1) as f64;
    let reflection_edr = (0..params.phase_points)
        .into_par_iter()
        .map(|m| {
            let offset = TAU * m as f64 / denom;
            angles
                .iter()
                .zip(&primary)
                .map(|(&a, &direct)| {
                    let b = wrap(a + offset);
                    direct.max(relayed(a, b)).max(relayed(b, a)) * params.time_step
                })
                .sum::<f64>()
        })
        .collect::<Vec<f64>>()
        .into_iter()
        .fold(primary_edr, f64::max);
    CaseStudyResult {
        baseline,
        primary_edr,
        reflection_edr,
    }
}

pub fn write_case_study_csv<W: Write>(rows: &[CaseStudyResult], mut w: W) -> std::io::Result<()> {
    writeln!(w, "baseline_km,primary_edr,reflection_edr,ratio")?;
    for r in rows {
        let ratio = r.ratio().map_or(String::new(), |v| v.to_string());
        writeln!(w, "{},{},{},{}", r.baseline / 1000.0, r.primary_edr, r.reflection_edr, ratio)?;
    }
    Ok(())
}
