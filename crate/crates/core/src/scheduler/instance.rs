use serde::{Deserialize, Serialize};

use crate::environment::{effective_transmissivity, EnvironmentTable};
use crate::linkphys::{
    aperture_transmissivity, arm_transmissivity, dark_click_prob, end_to_end_outcome, free_space_transmissivity,
    reflection_arms, ArmChannel, OpticsParams, SourceParams,
};
use crate::orbital::{geometry_between, norm, segment_clears, ConstellationSnapshot, GroundStation};

use super::SchedulerError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairSpec {
    pub id: String,
    pub station_a: String,
    pub station_b: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pair_cap: Option<u32>,
}

impl PairSpec {
    pub fn new(station_a: &str, station_b: &str) -> Self {
        Self {
            id: format!("{station_a}-{station_b}"),
            station_a: station_a.to_string(),
            station_b: station_b.to_string(),
            pair_cap: None,
        }
    }
}

/// Every unordered pair of `stations`, in list order.
pub fn all_pairs(stations: &[GroundStation]) -> Vec<PairSpec> {
    let mut out = Vec::new();
    for (a, ga) in stations.iter().enumerate() {
        for gb in &stations[a + 1..] {
            out.push(PairSpec::new(&ga.id, &gb.id));
        }
    }
    out
}

/// Default resource counts, used wherever a station or pair gives none.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Capacities {
    pub transmitters: u32,
    pub receivers: u32,
    pub pair_connections: u32,
    pub reflectors: u32,
}

impl Default for Capacities {
    fn default() -> Self {
        Self {
            transmitters: 10,
            receivers: 10,
            pair_connections: 10,
            reflectors: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorParams {
    /// Seconds.
    pub gate: f64,
    /// Nanometers.
    pub bandwidth: f64,
    /// Steradians.
    pub field_of_view: f64,
}

impl Default for DetectorParams {
    fn default() -> Self {
        Self {
            gate: 1e-9,
            bandwidth: 1.0,
            field_of_view: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhysicsParams {
    pub optics: OpticsParams,
    pub source: SourceParams,
    pub detector: DetectorParams,
    /// Degrees.
    pub min_elevation: f64,
    pub fidelity_threshold: f64,
    /// Meters; only affects reported geometry.
    pub atmosphere_height: f64,
    /// Meters above the surface that an inter-satellite line must clear.
    pub isl_clearance: f64,
    /// Receiving aperture radius of a reflecting satellite, meters.
    pub relay_aperture_radius: f64,
}

impl Default for PhysicsParams {
    fn default() -> Self {
        Self {
            optics: OpticsParams::default(),
            source: SourceParams::default(),
            detector: DetectorParams::default(),
            min_elevation: 20.0,
            fidelity_threshold: 0.85,
            atmosphere_height: 20e3,
            isl_clearance: 100e3,
            relay_aperture_radius: 1.0,
        }
    }
}

impl PhysicsParams {
    pub fn validate(&self) -> Result<(), SchedulerError> {
        let o = &self.optics;
        let s = &self.source;
        let d = &self.detector;
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(SchedulerError::Config(format!("{name} must lie in [0, 1], got {v}")))
            }
        };
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(SchedulerError::Config(format!("{name} must be positive, got {v}")))
            }
        };
        let nonneg = |name: &str, v: f64| {
            if v >= 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(SchedulerError::Config(format!("{name} must be non-negative, got {v}")))
            }
        };
        positive("optics.tx_radius", o.tx_radius)?;
        positive("optics.rx_radius", o.rx_radius)?;
        positive("optics.wavelength", o.wavelength)?;
        unit("optics.tx_efficiency", o.tx_efficiency)?;
        unit("optics.rx_efficiency", o.rx_efficiency)?;
        nonneg("source.mean_photon_number", s.mean_photon_number)?;
        positive("source.repetition_rate", s.repetition_rate)?;
        if s.sign != 1 && s.sign != -1 {
            return Err(SchedulerError::Config(format!("source.sign must be +1 or -1, got {}", s.sign)));
        }
        nonneg("detector.gate", d.gate)?;
        nonneg("detector.bandwidth", d.bandwidth)?;
        nonneg("detector.field_of_view", d.field_of_view)?;
        if !(0.0..90.0).contains(&self.min_elevation) {
            return Err(SchedulerError::Config(format!(
                "min_elevation must lie in [0, 90), got {}",
                self.min_elevation
            )));
        }
        unit("F_th", self.fidelity_threshold)?;
        nonneg("atmosphere_height", self.atmosphere_height)?;
        nonneg("isl_clearance", self.isl_clearance)?;
        positive("relay_aperture_radius", self.relay_aperture_radius)?;
        Ok(())
    }
}

/// Downlink budget from one satellite to one station.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinkBudget {
    pub elevation: f64,
    pub slant_range: f64,
    pub atmospheric_path: f64,
    pub transmissivity: f64,
    pub dark_click_prob: f64,
}

impl LinkBudget {
    pub fn arm(&self) -> ArmChannel {
        ArmChannel::new(self.transmissivity, self.dark_click_prob)
    }
}

/// One reflection-assisted option: `source` serves the pair's first
/// station directly and `relay` mirrors the second photon to the other.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RelayWeight {
    pub source: usize,
    pub relay: usize,
    pub pair: usize,
    pub rate: f64,
    pub fidelity: f64,
}

/// Everything one slot's optimization needs. Indices: satellites `i`,
/// stations `g`, pairs `j`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlotInstance {
    pub time: usize,
    pub sat_ids: Vec<String>,
    pub station_ids: Vec<String>,
    pub pair_ids: Vec<String>,
    pub pair_stations: Vec<[usize; 2]>,
    /// `omega[i][j]`, ebits/s after gating.
    pub omega: Vec<Vec<f64>>,
    /// `fidelity[i][j]` before gating.
    pub fidelity: Vec<Vec<f64>>,
    /// Positive relay rates, sorted by (source, relay, pair). `None` in
    /// primary mode.
    pub relays: Option<Vec<RelayWeight>>,
    pub sat_caps: Vec<u32>,
    pub gs_caps: Vec<u32>,
    pub pair_caps: Vec<u32>,
    pub reflector_caps: Vec<u32>,
}

impl SlotInstance {
    pub fn num_sats(&self) -> usize {
        self.sat_ids.len()
    }

    pub fn num_pairs(&self) -> usize {
        self.pair_ids.len()
    }

    pub fn num_stations(&self) -> usize {
        self.station_ids.len()
    }

    pub fn is_reflection(&self) -> bool {
        self.relays.is_some()
    }

    pub fn relays(&self) -> &[RelayWeight] {
        self.relays.as_deref().unwrap_or(&[])
    }

    /// ν for (source, relay, pair); zero when absent.
    pub fn nu(&self, i: usize, k: usize, j: usize) -> f64 {
        self.relays()
            .binary_search_by(|r| (r.source, r.relay, r.pair).cmp(&(i, k, j)))
            .map_or(0.0, |p| self.relays()[p].rate)
    }

    /// Hand-built instance with uniform caps and no relays.
    pub fn from_omega(omega: Vec<Vec<f64>>, pair_stations: Vec<[usize; 2]>, caps: Capacities) -> Self {
        let sats = omega.len();
        let pairs = pair_stations.len();
        let stations = pair_stations.iter().flatten().map(|&g| g + 1).max().unwrap_or(0);
        Self {
            time: 0,
            sat_ids: (0..sats).map(|i| format!("S{i}")).collect(),
            station_ids: (0..stations).map(|g| format!("G{g}")).collect(),
            pair_ids: (0..pairs).map(|j| format!("P{j}")).collect(),
            pair_stations,
            fidelity: omega.iter().map(|r| vec![1.0; r.len()]).collect(),
            omega,
            relays: None,
            sat_caps: vec![caps.transmitters; sats],
            gs_caps: vec![caps.receivers; stations],
            pair_caps: vec![caps.pair_connections; pairs],
            reflector_caps: vec![caps.reflectors; sats],
        }
    }

    /// Copy restricted to the listed pairs (in that order).
    pub fn restrict_to_pairs(&self, keep: &[usize]) -> Self {
        let index: std::collections::BTreeMap<usize, usize> = keep.iter().enumerate().map(|(n, &j)| (j, n)).collect();
        let relays = self.relays.as_ref().map(|rs| {
            let mut v: Vec<RelayWeight> = rs
                .iter()
                .filter_map(|r| index.get(&r.pair).map(|&p| RelayWeight { pair: p, ..*r }))
                .collect();
            v.sort_by_key(|r| (r.source, r.relay, r.pair));
            v
        });
        Self {
            time: self.time,
            sat_ids: self.sat_ids.clone(),
            station_ids: self.station_ids.clone(),
            pair_ids: keep.iter().map(|&j| self.pair_ids[j].clone()).collect(),
            pair_stations: keep.iter().map(|&j| self.pair_stations[j]).collect(),
            omega: self.omega.iter().map(|r| keep.iter().map(|&j| r[j]).collect()).collect(),
            fidelity: self.fidelity.iter().map(|r| keep.iter().map(|&j| r[j]).collect()).collect(),
            relays,
            sat_caps: self.sat_caps.clone(),
            gs_caps: self.gs_caps.clone(),
            pair_caps: keep.iter().map(|&j| self.pair_caps[j]).collect(),
            reflector_caps: self.reflector_caps.clone(),
        }
    }

    /// Structural checks: shapes, ranges, station-pair distinctness and the
    /// receivers-at-least-pair-cap assumption.
    pub fn validate(&self) -> Result<(), SchedulerError> {
        let (n, m, s) = (self.num_sats(), self.num_pairs(), self.num_stations());
        let shape = |what: &str| SchedulerError::Shape(what.to_string());
        if self.omega.len() != n || self.omega.iter().any(|r| r.len() != m) {
            return Err(shape("omega must be satellites x pairs"));
        }
        if self.fidelity.len() != n || self.fidelity.iter().any(|r| r.len() != m) {
            return Err(shape("fidelity must be satellites x pairs"));
        }
        if self.sat_caps.len() != n || self.reflector_caps.len() != n {
            return Err(shape("satellite capacity vectors"));
        }
        if self.gs_caps.len() != s || self.pair_caps.len() != m || self.pair_stations.len() != m {
            return Err(shape("station or pair vectors"));
        }
        if self.omega.iter().flatten().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(shape("omega entries must be finite and non-negative"));
        }
        for (j, &[a, b]) in self.pair_stations.iter().enumerate() {
            if a >= s || b >= s || a == b {
                return Err(SchedulerError::Config(format!(
                    "pair `{}` must join two distinct known stations",
                    self.pair_ids[j]
                )));
            }
            for g in [a, b] {
                if self.gs_caps[g] < self.pair_caps[j] {
                    return Err(SchedulerError::Config(format!(
                        "station `{}` has {} receivers, fewer than pair `{}` cap {}",
                        self.station_ids[g], self.gs_caps[g], self.pair_ids[j], self.pair_caps[j]
                    )));
                }
            }
        }
        let mut last = None;
        for r in self.relays() {
            if r.source >= n || r.relay >= n || r.pair >= m || r.source == r.relay {
                return Err(shape("relay entry out of range or self-relay"));
            }
            if !(r.rate >= 0.0 && r.rate.is_finite()) {
                return Err(shape("relay rates must be finite and non-negative"));
            }
            let key = (r.source, r.relay, r.pair);
            if last.is_some_and(|l| l >= key) {
                return Err(shape("relay entries must be sorted and unique"));
            }
            last = Some(key);
        }
        Ok(())
    }
}

/// Inputs shared by every slot of a run.
#[derive(Debug, Clone, Copy)]
pub struct BuildContext<'a> {
    pub stations: &'a [GroundStation],
    pub pairs: &'a [PairSpec],
    pub physics: &'a PhysicsParams,
    pub weather: &'a EnvironmentTable,
    pub caps: &'a Capacities,
    pub month: u8,
    /// Clock hour (UTC) of the slot, used for weather lookup.
    pub hour_utc: f64,
}

/// Budgets for every (satellite, station), `budgets[i][g]`.
pub fn link_budgets(snapshot: &ConstellationSnapshot, ctx: &BuildContext) -> Result<Vec<Vec<LinkBudget>>, SchedulerError> {
    let p = ctx.physics;
    let records = ctx
        .stations
        .iter()
        .map(|g| ctx.weather.lookup(&g.id, ctx.month, ctx.hour_utc))
        .collect::<Result<Vec<_>, _>>()?;
    let gs_pos = ctx
        .stations
        .iter()
        .map(|g| snapshot.gs_position(&g.id))
        .collect::<Result<Vec<_>, _>>()?;
    let dark: Vec<f64> = records
        .iter()
        .map(|r| {
            dark_click_prob(
                r.solar_irradiance,
                p.detector.gate,
                p.detector.bandwidth,
                p.detector.field_of_view,
                p.optics.rx_radius,
                p.optics.wavelength,
            )
        })
        .collect();
    Ok(snapshot
        .sat_positions
        .iter()
        .map(|&sat| {
            gs_pos
                .iter()
                .zip(&records)
                .zip(&dark)
                .map(|((&gs, rec), &pd)| {
                    let geom = geometry_between(gs, sat, p.atmosphere_height);
                    let transmissivity = if geom.elevation > 0.0 {
                        arm_transmissivity(
                            free_space_transmissivity(&p.optics, geom.slant_range),
                            effective_transmissivity(rec, geom.elevation),
                            p.optics.tx_efficiency,
                            p.optics.rx_efficiency,
                        )
                    } else {
                        0.0
                    };
                    LinkBudget {
                        elevation: geom.elevation,
                        slant_range: geom.slant_range,
                        atmospheric_path: geom.atmospheric_path,
                        transmissivity,
                        dark_click_prob: pd,
                    }
                })
                .collect()
        })
        .collect())
}

fn resolve_pairs(ctx: &BuildContext) -> Result<Vec<[usize; 2]>, SchedulerError> {
    let find = |id: &str, pair: &str| {
        ctx.stations
            .iter()
            .position(|g| g.id == id)
            .ok_or_else(|| SchedulerError::Config(format!("pair `{pair}` names unknown station `{id}`")))
    };
    ctx.pairs
        .iter()
        .map(|p| Ok([find(&p.station_a, &p.id)?, find(&p.station_b, &p.id)?]))
        .collect()
}

/// Primary-mode instance: gated dual-downlink rates for every (i, j).
pub fn build_weights(snapshot: &ConstellationSnapshot, ctx: &BuildContext) -> Result<SlotInstance, SchedulerError> {
    let budgets = link_budgets(snapshot, ctx)?;
    build_from_budgets(snapshot, ctx, &budgets)
}

fn build_from_budgets(
    snapshot: &ConstellationSnapshot,
    ctx: &BuildContext,
    budgets: &[Vec<LinkBudget>],
) -> Result<SlotInstance, SchedulerError> {
    let p = ctx.physics;
    let pair_stations = resolve_pairs(ctx)?;
    let n = snapshot.sat_ids.len();
    let m = pair_stations.len();
    let mut omega = vec![vec![0.0; m]; n];
    let mut fidelity = vec![vec![0.0; m]; n];
    for i in 0..n {
        for (j, &[a, b]) in pair_stations.iter().enumerate() {
            let (la, lb) = (&budgets[i][a], &budgets[i][b]);
            let o = end_to_end_outcome(&p.source, &la.arm(), &lb.arm());
            fidelity[i][j] = o.fidelity;
            let visible = la.elevation >= p.min_elevation && lb.elevation >= p.min_elevation;
            if visible && o.fidelity >= p.fidelity_threshold {
                omega[i][j] = o.edr;
            }
        }
    }
    let caps = ctx.caps;
    let inst = SlotInstance {
        time: snapshot.time,
        sat_ids: snapshot.sat_ids.clone(),
        station_ids: ctx.stations.iter().map(|g| g.id.clone()).collect(),
        pair_ids: ctx.pairs.iter().map(|p| p.id.clone()).collect(),
        pair_stations,
        omega,
        fidelity,
        relays: None,
        sat_caps: vec![caps.transmitters; n],
        gs_caps: ctx
            .stations
            .iter()
            .map(|g| g.receiver_cap.unwrap_or(caps.receivers))
            .collect(),
        pair_caps: ctx
            .pairs
            .iter()
            .map(|p| p.pair_cap.unwrap_or(caps.pair_connections))
            .collect(),
        reflector_caps: vec![caps.reflectors; n],
    };
    inst.validate()?;
    Ok(inst)
}

/// Reflection-mode instance: the primary weights plus a relay rate for
/// every (source, relay, pair) passing the visibility and fidelity gates.
pub fn build_reflection_weights(
    snapshot: &ConstellationSnapshot,
    ctx: &BuildContext,
    mirror_efficiency: f64,
) -> Result<SlotInstance, SchedulerError> {
    if !(0.0..=1.0).contains(&mirror_efficiency) {
        return Err(SchedulerError::Config(format!(
            "mirror_efficiency must lie in [0, 1], got {mirror_efficiency}"
        )));
    }
    let p = ctx.physics;
    let budgets = link_budgets(snapshot, ctx)?;
    let mut inst = build_from_budgets(snapshot, ctx, &budgets)?;
    let n = inst.num_sats();
    let min_radius = snapshot.earth_radius + p.isl_clearance;
    let visible: Vec<Vec<usize>> = (0..inst.num_stations())
        .map(|g| (0..n).filter(|&i| budgets[i][g].elevation >= p.min_elevation).collect())
        .collect();

    let mut relays = Vec::new();
    for (j, &[a, b]) in inst.pair_stations.iter().enumerate() {
        for &i in &visible[a] {
            for &k in &visible[b] {
                if i == k {
                    continue;
                }
                let (si, sk) = (snapshot.sat_positions[i], snapshot.sat_positions[k]);
                if !segment_clears(si, sk, min_radius) {
                    continue;
                }
                let d = [sk[0] - si[0], sk[1] - si[1], sk[2] - si[2]];
                let isl = aperture_transmissivity(p.optics.tx_radius, p.relay_aperture_radius, p.optics.wavelength, norm(d));
                let (arm1, arm2) = reflection_arms(budgets[i][a].arm(), isl, mirror_efficiency, budgets[k][b].arm());
                let o = end_to_end_outcome(&p.source, &arm1, &arm2);
                if o.fidelity >= p.fidelity_threshold && o.edr > 0.0 {
                    relays.push(RelayWeight {
                        source: i,
                        relay: k,
                        pair: j,
                        rate: o.edr,
                        fidelity: o.fidelity,
                    });
                }
            }
        }
    }
    relays.sort_by_key(|r| (r.source, r.relay, r.pair));
    inst.relays = Some(relays);
    Ok(inst)
}
