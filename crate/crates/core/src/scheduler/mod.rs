//! Per-slot instance construction and the scheduling policies.

mod instance;
mod solve;
mod special;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

pub use instance::{
    all_pairs, build_reflection_weights, build_weights, link_budgets, BuildContext, Capacities, DetectorParams,
    LinkBudget, PairSpec, PhysicsParams, RelayWeight, SlotInstance,
};
pub use solve::{
    fractional_weights, min_fractional_edr, solve_one_shot_maxmin, solve_primary_ratefair, solve_primary_ratesum,
    solve_primary_ratesum_with, solve_reflection_ratefair, solve_reflection_ratesum, solve_reflection_ratesum_with,
    uncontended_all, uncontended_max_edr, DEFAULT_NODE_LIMIT, SATURATION_TOL,
};
pub use special::{solve_stmr, solve_stsr, STSR_VERTEX_LIMIT};

use crate::environment::EnvironmentError;
use crate::orbital::OrbitalError;

#[derive(Debug, Error)]
pub enum SchedulerError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("instance shape: {0}")]
    Shape(String),
    #[error("solver mode: {0}")]
    Mode(String),
    #[error("solver: {0}")]
    Solver(#[from] qsat_ilp::IlpError),
    #[error(transparent)]
    Environment(#[from] EnvironmentError),
    #[error(transparent)]
    Orbital(#[from] OrbitalError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    PrimaryRatesum,
    PrimaryRatefair,
    ReflectionRatesum,
    ReflectionRatefair,
}

impl Policy {
    pub const ALL: [Policy; 4] = [
        Policy::PrimaryRatesum,
        Policy::PrimaryRatefair,
        Policy::ReflectionRatesum,
        Policy::ReflectionRatefair,
    ];

    pub fn uses_reflection(self) -> bool {
        matches!(self, Policy::ReflectionRatesum | Policy::ReflectionRatefair)
    }

    pub fn name(self) -> &'static str {
        match self {
            Policy::PrimaryRatesum => "primary_ratesum",
            Policy::PrimaryRatefair => "primary_ratefair",
            Policy::ReflectionRatesum => "reflection_ratesum",
            Policy::ReflectionRatefair => "reflection_ratefair",
        }
    }

    pub fn solve(self, inst: &SlotInstance) -> Result<Allocation, SchedulerError> {
        match self {
            Policy::PrimaryRatesum => solve_primary_ratesum(inst),
            Policy::PrimaryRatefair => solve_primary_ratefair(inst),
            Policy::ReflectionRatesum => solve_reflection_ratesum(inst),
            Policy::ReflectionRatefair => solve_reflection_ratefair(inst),
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Policy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Policy::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| format!("unknown policy `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct RelayAssignment {
    pub source: usize,
    pub relay: usize,
    pub pair: usize,
    pub count: u32,
}

/// Connection counts for one slot.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Allocation {
    /// `x[i][j]`.
    pub x: Vec<Vec<u32>>,
    /// Nonzero `y_ikj`, sorted by (source, relay, pair).
    pub y: Vec<RelayAssignment>,
    /// Aggregate rate `sum omega x + sum nu y`, ebits/s.
    pub objective: f64,
    /// Set when a solve stopped at its node limit with an incumbent.
    pub gap_limited: bool,
}

impl Allocation {
    pub fn zero(inst: &SlotInstance) -> Self {
        Self {
            x: vec![vec![0; inst.num_pairs()]; inst.num_sats()],
            y: Vec::new(),
            objective: 0.0,
            gap_limited: false,
        }
    }

    pub fn from_counts(inst: &SlotInstance, x: Vec<Vec<u32>>, mut y: Vec<RelayAssignment>) -> Self {
        y.retain(|r| r.count > 0);
        y.sort();
        let mut a = Self {
            x,
            y,
            objective: 0.0,
            gap_limited: false,
        };
        a.objective = a.per_pair_edr(inst).iter().sum();
        a
    }

    /// Rate delivered to each pair.
    pub fn per_pair_edr(&self, inst: &SlotInstance) -> Vec<f64> {
        let mut out = vec![0.0; inst.num_pairs()];
        for (i, row) in self.x.iter().enumerate() {
            for (j, &c) in row.iter().enumerate() {
                if c > 0 {
                    out[j] += inst.omega[i][j] * c as f64;
                }
            }
        }
        for y in &self.y {
            out[y.pair] += inst.nu(y.source, y.relay, y.pair) * y.count as f64;
        }
        out
    }

    /// Connections serving pair `j`: satellite `i` as `(i, None)`, relayed
    /// options as `(i, Some(k))`.
    pub fn connections(&self, pair: usize) -> Vec<(usize, Option<usize>)> {
        let mut out: Vec<_> = self
            .x
            .iter()
            .enumerate()
            .filter(|(_, row)| row.get(pair).is_some_and(|&c| c > 0))
            .map(|(i, _)| (i, None))
            .collect();
        out.extend(self.y.iter().filter(|y| y.pair == pair).map(|y| (y.source, Some(y.relay))));
        out.sort();
        out
    }

    /// Serialized form with dense `x` and `y`.
    pub fn to_json(&self, inst: &SlotInstance, policy: Policy) -> serde_json::Value {
        let n = inst.num_sats();
        let m = inst.num_pairs();
        let mut y = vec![vec![vec![0u32; m]; n]; n];
        for r in &self.y {
            y[r.source][r.relay][r.pair] = r.count;
        }
        let per_pair: BTreeMap<&str, f64> = inst
            .pair_ids
            .iter()
            .map(String::as_str)
            .zip(self.per_pair_edr(inst))
            .collect();
        json!({
            "t": inst.time,
            "policy": policy.name(),
            "x": self.x,
            "y": y,
            "objective": self.objective,
            "per_pair_edr": per_pair,
        })
    }
}

/// Exact feasibility check of `alloc` against the instance's constraints.
pub fn check_allocation(inst: &SlotInstance, alloc: &Allocation) -> Result<(), String> {
    let (n, m) = (inst.num_sats(), inst.num_pairs());
    if alloc.x.len() != n || alloc.x.iter().any(|r| r.len() != m) {
        return Err("x has the wrong shape".into());
    }
    let mut sat = vec![0u64; n];
    let mut refl = vec![0u64; n];
    let mut gs = vec![0u64; inst.num_stations()];
    let mut pair = vec![0u64; m];
    let mut add = |i: usize, j: usize, c: u64| {
        sat[i] += c;
        pair[j] += c;
        for g in inst.pair_stations[j] {
            gs[g] += c;
        }
    };
    for (i, row) in alloc.x.iter().enumerate() {
        for (j, &c) in row.iter().enumerate() {
            if c > 0 && inst.omega[i][j] <= 0.0 {
                return Err(format!("x[{i}][{j}] = {c} on a gated-out link"));
            }
            add(i, j, c as u64);
        }
    }
    for y in &alloc.y {
        if !inst.is_reflection() {
            return Err("relay connections in a primary-mode instance".into());
        }
        if y.source >= n || y.relay >= n || y.pair >= m {
            return Err(format!("relay entry {y:?} out of range"));
        }
        if inst.nu(y.source, y.relay, y.pair) <= 0.0 {
            return Err(format!("relay ({}, {}, {}) is gated out", y.source, y.relay, y.pair));
        }
        add(y.source, y.pair, y.count as u64);
        refl[y.relay] += y.count as u64;
    }
    let over = |what: &str, used: &[u64], cap: &[u32]| {
        used.iter()
            .zip(cap)
            .position(|(&u, &c)| u > c as u64)
            .map(|p| format!("{what} {p} uses {} of {}", used[p], cap[p]))
    };
    if let Some(e) = over("station", &gs, &inst.gs_caps)
        .or_else(|| over("satellite", &sat, &inst.sat_caps))
        .or_else(|| over("reflector", &refl, &inst.reflector_caps))
        .or_else(|| over("pair", &pair, &inst.pair_caps))
    {
        return Err(e);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_caps() -> Capacities {
        Capacities {
            transmitters: 1,
            receivers: 1,
            pair_connections: 1,
            reflectors: 1,
        }
    }

    #[test]
    fn one_satellite_two_pairs() {
        let inst = SlotInstance::from_omega(vec![vec![5.0, 3.0]], vec![[0, 1], [2, 3]], unit_caps());
        let a = solve_primary_ratesum(&inst).unwrap();
        assert_eq!(a.x, vec![vec![1, 0]]);
        assert_eq!(a.objective, 5.0);
    }

    #[test]
    fn zero_weights() {
        let inst = SlotInstance::from_omega(vec![vec![0.0; 3]; 2], vec![[0, 1], [1, 2], [0, 2]], Capacities::default());
        let a = solve_primary_ratesum(&inst).unwrap();
        assert_eq!(a.objective, 0.0);
        assert!(a.x.iter().flatten().all(|&c| c == 0));
        assert_eq!(solve_primary_ratefair(&inst).unwrap().objective, 0.0);
    }

    #[test]
    fn shared_station_bottleneck() {
        let mut inst = SlotInstance::from_omega(vec![vec![1.0, 1.0]; 2], vec![[0, 1], [0, 2]], unit_caps());
        inst.gs_caps = vec![1, 1, 1];
        let a = solve_primary_ratesum(&inst).unwrap();
        assert_eq!(a.objective, 1.0);
        check_allocation(&inst, &a).unwrap();
    }

    #[test]
    fn maxmin_two_pairs() {
        let inst = SlotInstance::from_omega(vec![vec![5.0, 0.0], vec![0.0, 3.0]], vec![[0, 1], [2, 3]], unit_caps());
        let (a, min) = solve_one_shot_maxmin(&inst, &inst.omega.clone()).unwrap();
        assert_eq!(min, 3.0);
        assert_eq!(a.x, vec![vec![1, 0], vec![0, 1]]);
    }

    #[test]
    fn maxmin_without_weights() {
        let inst = SlotInstance::from_omega(vec![vec![1.0]], vec![[0, 1]], unit_caps());
        let (a, min) = solve_one_shot_maxmin(&inst, &[vec![0.0]]).unwrap();
        assert_eq!(min, 0.0);
        assert_eq!(a.objective, 0.0);
    }

    #[test]
    fn uncontended_single_satellite() {
        let caps = Capacities {
            transmitters: 2,
            receivers: 2,
            pair_connections: 2,
            reflectors: 0,
        };
        let inst = SlotInstance::from_omega(vec![vec![4.0, 0.0]], vec![[0, 1], [0, 1]], caps);
        assert_eq!(uncontended_max_edr(&inst, 0).unwrap(), 8.0);
        assert_eq!(uncontended_max_edr(&inst, 1).unwrap(), 0.0);
    }

    #[test]
    fn fractional_rows() {
        let f = fractional_weights(&[vec![2.0, 3.0], vec![4.0, 1.0]], &[4.0, 0.0]);
        assert_eq!(f, vec![vec![0.5, 0.0], vec![1.0, 0.0]]);
    }

    #[test]
    fn ratefair_equalizes_fractions() {
        // A = (10, 4); ratesum takes 10 + 1, the fair split 6/10 and 4/4
        let inst = SlotInstance::from_omega(
            vec![vec![10.0, 4.0], vec![6.0, 1.0]],
            vec![[0, 1], [2, 3]],
            unit_caps(),
        );
        let a = solve_primary_ratefair(&inst).unwrap();
        check_allocation(&inst, &a).unwrap();
        let s = solve_primary_ratesum(&inst).unwrap();
        let av = uncontended_all(&inst).unwrap();
        assert!(min_fractional_edr(&inst, &a, &av).unwrap() >= min_fractional_edr(&inst, &s, &av).unwrap());
        assert_eq!(s.x, vec![vec![1, 0], vec![0, 1]]);
        assert_eq!(a.x, vec![vec![0, 1], vec![1, 0]]);
    }

    #[test]
    fn reflection_only_option() {
        let mut inst = SlotInstance::from_omega(vec![vec![0.0]; 2], vec![[0, 1]], unit_caps());
        inst.relays = Some(vec![RelayWeight {
            source: 0,
            relay: 1,
            pair: 0,
            rate: 7.0,
            fidelity: 0.95,
        }]);
        let a = solve_reflection_ratesum(&inst).unwrap();
        assert_eq!(a.objective, 7.0);
        assert_eq!(a.y.len(), 1);
        check_allocation(&inst, &a).unwrap();
        assert_eq!(a.connections(0), vec![(0, Some(1))]);
        let f = solve_reflection_ratefair(&inst).unwrap();
        assert_eq!(f.objective, 7.0);
        assert!(solve_reflection_ratesum(&SlotInstance::from_omega(vec![vec![1.0]], vec![[0, 1]], unit_caps())).is_err());
    }

    #[test]
    fn stmr_example() {
        let caps = Capacities {
            transmitters: 1,
            receivers: 10,
            pair_connections: 1,
            reflectors: 0,
        };
        let inst = SlotInstance::from_omega(vec![vec![3.0, 1.0], vec![2.0, 4.0]], vec![[0, 1], [0, 2]], caps);
        let a = solve_stmr(&inst).unwrap();
        assert_eq!(a.objective, 7.0);
    }

    #[test]
    fn stsr_no_conflicts_takes_everything() {
        let inst = SlotInstance::from_omega(vec![vec![2.0, 0.0], vec![0.0, 3.0]], vec![[0, 1], [2, 3]], unit_caps());
        let a = solve_stsr(&inst).unwrap();
        assert_eq!(a.objective, 5.0);
        assert!(solve_stsr(&SlotInstance::from_omega(vec![vec![1.0]], vec![[0, 1]], Capacities::default())).is_err());
    }

    #[test]
    fn checker_flags_overuse() {
        let inst = SlotInstance::from_omega(vec![vec![1.0, 1.0]], vec![[0, 1], [2, 3]], unit_caps());
        let bad = Allocation::from_counts(&inst, vec![vec![1, 1]], Vec::new());
        assert!(check_allocation(&inst, &bad).unwrap_err().contains("satellite"));
    }

    #[test]
    fn json_shape() {
        let inst = SlotInstance::from_omega(vec![vec![1.0]], vec![[0, 1]], unit_caps());
        let a = solve_primary_ratesum(&inst).unwrap();
        let v = a.to_json(&inst, Policy::PrimaryRatesum);
        assert_eq!(v["policy"], "primary_ratesum");
        assert_eq!(v["x"], json!([[1]]));
        assert_eq!(v["y"], json!([[[0]]]));
        assert_eq!(v["per_pair_edr"]["P0"], 1.0);
    }

    #[test]
    fn receivers_below_pair_cap_rejected() {
        let mut inst = SlotInstance::from_omega(vec![vec![1.0]], vec![[0, 1]], Capacities::default());
        inst.gs_caps[0] = 1;
        assert!(matches!(solve_primary_ratesum(&inst), Err(SchedulerError::Config(_))));
    }

    #[test]
    fn policy_names_round_trip() {
        for p in Policy::ALL {
            assert_eq!(p.name().parse::<Policy>().unwrap(), p);
        }
    }
}
