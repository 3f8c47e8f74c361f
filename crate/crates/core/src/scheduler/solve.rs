use qsat_ilp::{solve_mip, Constraint, LinearProgram, MipProblem, SolveResult, Status};

use super::{Allocation, RelayAssignment, SchedulerError, SlotInstance};

pub const DEFAULT_NODE_LIMIT: usize = 200_000;

/// Relative tolerance when deciding which pairs sit at the iteration minimum.
pub const SATURATION_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Var {
    Direct { sat: usize, pair: usize },
    /// Index into `SlotInstance::relays`.
    Relay(usize),
}

/// Remaining resources during iterative solves.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Residual {
    pub sat: Vec<u32>,
    pub gs: Vec<u32>,
    pub reflector: Vec<u32>,
    pub pair_active: Vec<bool>,
}

impl Residual {
    pub(crate) fn full(inst: &SlotInstance) -> Self {
        Self {
            sat: inst.sat_caps.clone(),
            gs: inst.gs_caps.clone(),
            reflector: inst.reflector_caps.clone(),
            pair_active: vec![true; inst.num_pairs()],
        }
    }

    fn consume(&mut self, inst: &SlotInstance, alloc: &Allocation, pair: usize) {
        let [a, b] = inst.pair_stations[pair];
        for (i, row) in alloc.x.iter().enumerate() {
            let c = row[pair];
            self.sat[i] -= c;
            self.gs[a] -= c;
            self.gs[b] -= c;
        }
        for y in alloc.y.iter().filter(|y| y.pair == pair) {
            self.sat[y.source] -= y.count;
            self.reflector[y.relay] -= y.count;
            self.gs[a] -= y.count;
            self.gs[b] -= y.count;
        }
        self.pair_active[pair] = false;
    }
}

/// Per-variable weights: `direct[i][j]` and one entry per relay.
#[derive(Debug, Clone)]
pub(crate) struct Weights {
    pub direct: Vec<Vec<f64>>,
    pub relay: Vec<f64>,
}

impl Weights {
    pub(crate) fn rates(inst: &SlotInstance) -> Self {
        Self {
            direct: inst.omega.clone(),
            relay: inst.relays().iter().map(|r| r.rate).collect(),
        }
    }

    /// Rates scaled by `1 / A_j`; pairs with `A_j = 0` get zero weight.
    pub(crate) fn fractional(inst: &SlotInstance, a: &[f64]) -> Self {
        let scale = |j: usize, w: f64| if a[j] > 0.0 { w / a[j] } else { 0.0 };
        Self {
            direct: fractional_weights(&inst.omega, a),
            relay: inst.relays().iter().map(|r| scale(r.pair, r.rate)).collect(),
        }
    }

    fn of(&self, v: Var) -> f64 {
        match v {
            Var::Direct { sat, pair } => self.direct[sat][pair],
            Var::Relay(r) => self.relay[r],
        }
    }

    /// Weighted service `sum f x` per pair under `alloc`.
    pub(crate) fn per_pair(&self, inst: &SlotInstance, alloc: &Allocation) -> Vec<f64> {
        let mut out = vec![0.0; inst.num_pairs()];
        for (i, row) in alloc.x.iter().enumerate() {
            for (j, &c) in row.iter().enumerate() {
                if c > 0 {
                    out[j] += self.direct[i][j] * c as f64;
                }
            }
        }
        for y in &alloc.y {
            let r = inst
                .relays()
                .binary_search_by(|r| (r.source, r.relay, r.pair).cmp(&(y.source, y.relay, y.pair)))
                .expect("allocated relay exists");
            out[y.pair] += self.relay[r] * y.count as f64;
        }
        out
    }
}

/// `f_ij = omega_ij / A_j`, zero where `A_j = 0`.
pub fn fractional_weights(omega: &[Vec<f64>], a: &[f64]) -> Vec<Vec<f64>> {
    omega
        .iter()
        .map(|row| {
            row.iter()
                .zip(a)
                .map(|(&w, &aj)| if aj > 0.0 { w / aj } else { 0.0 })
                .collect()
        })
        .collect()
}

struct Formulation {
    vars: Vec<Var>,
    lp: LinearProgram,
}

/// Variables with positive weight and positive residual headroom, plus the
/// station, satellite, reflector and pair rows over them.
fn formulate(inst: &SlotInstance, res: &Residual, w: &Weights, use_relays: bool) -> Formulation {
    let mut vars = Vec::new();
    let mut upper = Vec::new();
    for i in 0..inst.num_sats() {
        for j in 0..inst.num_pairs() {
            if !res.pair_active[j] || w.direct[i][j] <= 0.0 {
                continue;
            }
            let [a, b] = inst.pair_stations[j];
            let ub = res.sat[i].min(res.gs[a]).min(res.gs[b]).min(inst.pair_caps[j]);
            if ub > 0 {
                vars.push(Var::Direct { sat: i, pair: j });
                upper.push(ub);
            }
        }
    }
    if use_relays {
        for (r, rw) in inst.relays().iter().enumerate() {
            if !res.pair_active[rw.pair] || w.relay[r] <= 0.0 {
                continue;
            }
            let [a, b] = inst.pair_stations[rw.pair];
            let ub = res.sat[rw.source]
                .min(res.reflector[rw.relay])
                .min(res.gs[a])
                .min(res.gs[b])
                .min(inst.pair_caps[rw.pair]);
            if ub > 0 {
                vars.push(Var::Relay(r));
                upper.push(ub);
            }
        }
    }

    let mut lp = LinearProgram::new(vars.iter().map(|&v| w.of(v)).collect());
    lp.bounds = upper.iter().map(|&u| (0.0, u as f64)).collect();
    let mut station_rows = vec![Vec::new(); inst.num_stations()];
    let mut sat_rows = vec![Vec::new(); inst.num_sats()];
    let mut refl_rows = vec![Vec::new(); inst.num_sats()];
    let mut pair_rows = vec![Vec::new(); inst.num_pairs()];
    for (col, &v) in vars.iter().enumerate() {
        let (source, pair) = match v {
            Var::Direct { sat, pair } => (sat, pair),
            Var::Relay(r) => {
                let rw = &inst.relays()[r];
                refl_rows[rw.relay].push((col, 1.0));
                (rw.source, rw.pair)
            }
        };
        sat_rows[source].push((col, 1.0));
        pair_rows[pair].push((col, 1.0));
        for g in inst.pair_stations[pair] {
            station_rows[g].push((col, 1.0));
        }
    }
    let rows = station_rows
        .into_iter()
        .zip(&res.gs)
        .chain(sat_rows.into_iter().zip(&res.sat))
        .chain(refl_rows.into_iter().zip(&res.reflector))
        .chain(pair_rows.into_iter().zip(&inst.pair_caps));
    for (terms, &cap) in rows {
        // a row whose variables all fit under their own bounds is redundant
        let slack: u32 = terms.iter().map(|&(c, _)| upper[c]).sum();
        if slack > cap {
            lp.add(Constraint::le(terms, cap as f64));
        }
    }
    Formulation { vars, lp }
}

fn decode(inst: &SlotInstance, vars: &[Var], values: &[f64]) -> (Vec<Vec<u32>>, Vec<RelayAssignment>) {
    let mut x = vec![vec![0u32; inst.num_pairs()]; inst.num_sats()];
    let mut y = Vec::new();
    for (&v, &val) in vars.iter().zip(values) {
        let c = val.round().max(0.0) as u32;
        if c == 0 {
            continue;
        }
        match v {
            Var::Direct { sat, pair } => x[sat][pair] = c,
            Var::Relay(r) => {
                let rw = &inst.relays()[r];
                y.push(RelayAssignment {
                    source: rw.source,
                    relay: rw.relay,
                    pair: rw.pair,
                    count: c,
                });
            }
        }
    }
    y.sort_by_key(|a| (a.source, a.relay, a.pair));
    (x, y)
}

fn finish(inst: &SlotInstance, x: Vec<Vec<u32>>, y: Vec<RelayAssignment>, gap_limited: bool) -> Allocation {
    let mut alloc = Allocation {
        x,
        y,
        objective: 0.0,
        gap_limited,
    };
    alloc.objective = alloc.per_pair_edr(inst).iter().sum();
    alloc
}

fn run_mip(mip: &MipProblem, node_limit: usize) -> Result<SolveResult, SchedulerError> {
    let r = solve_mip(mip, node_limit)?;
    match r.status {
        Status::Optimal | Status::GapLimit => Ok(r),
        // x = 0 is always feasible and every variable is bounded
        s => Err(SchedulerError::Solver(qsat_ilp::IlpError::Structural(format!(
            "scheduling program reported {s:?}"
        )))),
    }
}

/// Maximize the weighted total under residual resources.
fn ratesum_with(
    inst: &SlotInstance,
    res: &Residual,
    w: &Weights,
    use_relays: bool,
    node_limit: usize,
) -> Result<Allocation, SchedulerError> {
    let f = formulate(inst, res, w, use_relays);
    if f.vars.is_empty() {
        return Ok(Allocation::zero(inst));
    }
    let n = f.vars.len();
    let r = run_mip(&MipProblem::new(f.lp, (0..n).collect()), node_limit)?;
    let (x, y) = decode(inst, &f.vars, &r.assignment);
    Ok(finish(inst, x, y, r.status == Status::GapLimit))
}

pub fn solve_primary_ratesum(inst: &SlotInstance) -> Result<Allocation, SchedulerError> {
    solve_primary_ratesum_with(inst, DEFAULT_NODE_LIMIT)
}

pub fn solve_primary_ratesum_with(inst: &SlotInstance, node_limit: usize) -> Result<Allocation, SchedulerError> {
    inst.validate()?;
    ratesum_with(inst, &Residual::full(inst), &Weights::rates(inst), false, node_limit)
}

pub fn solve_reflection_ratesum(inst: &SlotInstance) -> Result<Allocation, SchedulerError> {
    solve_reflection_ratesum_with(inst, DEFAULT_NODE_LIMIT)
}

pub fn solve_reflection_ratesum_with(inst: &SlotInstance, node_limit: usize) -> Result<Allocation, SchedulerError> {
    require_reflection(inst)?;
    inst.validate()?;
    ratesum_with(inst, &Residual::full(inst), &Weights::rates(inst), true, node_limit)
}

fn require_reflection(inst: &SlotInstance) -> Result<(), SchedulerError> {
    if inst.is_reflection() {
        Ok(())
    } else {
        Err(SchedulerError::Mode("reflection policy needs a reflection-mode instance".into()))
    }
}

/// Best rate pair `j` could get with the whole network to itself.
pub fn uncontended_max_edr(inst: &SlotInstance, pair: usize) -> Result<f64, SchedulerError> {
    if pair >= inst.num_pairs() {
        return Err(SchedulerError::Shape(format!("pair index {pair} out of range")));
    }
    let mut res = Residual::full(inst);
    res.pair_active = (0..inst.num_pairs()).map(|j| j == pair).collect();
    let a = ratesum_with(inst, &res, &Weights::rates(inst), inst.is_reflection(), DEFAULT_NODE_LIMIT)?;
    Ok(a.objective)
}

pub fn uncontended_all(inst: &SlotInstance) -> Result<Vec<f64>, SchedulerError> {
    (0..inst.num_pairs()).map(|j| uncontended_max_edr(inst, j)).collect()
}

/// Pairs that enter the max-min: active with at least one positive weight.
fn contenders(inst: &SlotInstance, res: &Residual, w: &Weights, use_relays: bool) -> Vec<usize> {
    let mut has = vec![false; inst.num_pairs()];
    for row in &w.direct {
        for (j, &f) in row.iter().enumerate() {
            has[j] |= f > 0.0;
        }
    }
    if use_relays {
        for (r, rw) in inst.relays().iter().enumerate() {
            has[rw.pair] |= w.relay[r] > 0.0;
        }
    }
    (0..inst.num_pairs()).filter(|&j| has[j] && res.pair_active[j]).collect()
}

/// Max-min over `pairs`; among optimal allocations prefers the one with the
/// largest weighted total.
fn maxmin_with(
    inst: &SlotInstance,
    res: &Residual,
    w: &Weights,
    pairs: &[usize],
    use_relays: bool,
    node_limit: usize,
) -> Result<(Allocation, f64), SchedulerError> {
    if pairs.is_empty() {
        return Ok((Allocation::zero(inst), 0.0));
    }
    let f = formulate(inst, res, w, use_relays);
    let n = f.vars.len();
    let lambda = n;
    let pair_terms = |lp: &LinearProgram| -> Vec<Vec<(usize, f64)>> {
        pairs
            .iter()
            .map(|&j| {
                f.vars
                    .iter()
                    .enumerate()
                    .filter(|(_, v)| match **v {
                        Var::Direct { pair, .. } => pair == j,
                        Var::Relay(r) => inst.relays()[r].pair == j,
                    })
                    .map(|(c, _)| (c, lp.objective[c]))
                    .collect()
            })
            .collect()
    };
    let terms = pair_terms(&f.lp);

    // stage 1: maximize lambda
    let mut lp = f.lp.clone();
    lp.objective = vec![0.0; n];
    lp.objective.push(1.0);
    lp.bounds.push((0.0, f64::INFINITY));
    for t in &terms {
        let mut row = t.clone();
        row.push((lambda, -1.0));
        lp.add(Constraint::ge(row, 0.0));
    }
    let r1 = run_mip(&MipProblem::new(lp, (0..n).collect()), node_limit)?;
    let (x, y) = decode(inst, &f.vars, &r1.assignment);
    let first = finish(inst, x, y, r1.status == Status::GapLimit);
    let min_of = |a: &Allocation| {
        let s = w.per_pair(inst, a);
        pairs.iter().map(|&j| s[j]).fold(f64::INFINITY, f64::min)
    };
    let best_min = min_of(&first).max(0.0);
    if pairs.len() == 1 {
        return Ok((first, best_min));
    }

    // stage 2: keep every pair at the minimum, maximize the weighted total
    let mut lp = f.lp.clone();
    let floor = best_min * (1.0 - 1e-9);
    for t in &terms {
        lp.add(Constraint::ge(t.clone(), floor));
    }
    let r2 = run_mip(&MipProblem::new(lp, (0..n).collect()), node_limit)?;
    let (x, y) = decode(inst, &f.vars, &r2.assignment);
    let second = finish(inst, x, y, first.gap_limited || r2.status == Status::GapLimit);
    if min_of(&second) >= best_min {
        Ok((second, best_min))
    } else {
        Ok((first, best_min))
    }
}

/// One max-min solve: maximize the smallest `sum_i f_ij x_ij` over pairs
/// with any positive `f`, under the primary constraints.
pub fn solve_one_shot_maxmin(inst: &SlotInstance, f: &[Vec<f64>]) -> Result<(Allocation, f64), SchedulerError> {
    inst.validate()?;
    if f.len() != inst.num_sats() || f.iter().any(|r| r.len() != inst.num_pairs()) {
        return Err(SchedulerError::Shape("fairness weights must be satellites x pairs".into()));
    }
    if f.iter().flatten().any(|v| !(*v >= 0.0 && v.is_finite())) {
        return Err(SchedulerError::Shape("fairness weights must be finite and non-negative".into()));
    }
    let w = Weights {
        direct: f.to_vec(),
        relay: Vec::new(),
    };
    let res = Residual::full(inst);
    let pairs = contenders(inst, &res, &w, false);
    maxmin_with(inst, &res, &w, &pairs, false, DEFAULT_NODE_LIMIT)
}

/// Iterative weighted max-min: solve, freeze every pair at the minimum,
/// deduct what they hold, re-solve the rest.
fn ratefair(inst: &SlotInstance, use_relays: bool) -> Result<Allocation, SchedulerError> {
    let a = uncontended_all(inst)?;
    let w = Weights::fractional(inst, &a);
    let mut res = Residual::full(inst);
    for (j, &aj) in a.iter().enumerate() {
        if aj <= 0.0 {
            res.pair_active[j] = false;
        }
    }
    let mut x = vec![vec![0u32; inst.num_pairs()]; inst.num_sats()];
    let mut y = Vec::new();
    let mut gap_limited = false;
    loop {
        let pairs = contenders(inst, &res, &w, use_relays);
        if pairs.is_empty() {
            break;
        }
        let (alloc, _) = maxmin_with(inst, &res, &w, &pairs, use_relays, DEFAULT_NODE_LIMIT)?;
        gap_limited |= alloc.gap_limited;
        let served = w.per_pair(inst, &alloc);
        let low = pairs.iter().map(|&j| served[j]).fold(f64::INFINITY, f64::min);
        let frozen: Vec<usize> = pairs
            .iter()
            .copied()
            .filter(|&j| served[j] <= low + SATURATION_TOL * low.abs())
            .collect();
        for &j in &frozen {
            for (i, row) in alloc.x.iter().enumerate() {
                x[i][j] = row[j];
            }
            y.extend(alloc.y.iter().filter(|r| r.pair == j).copied());
            res.consume(inst, &alloc, j);
        }
    }
    y.sort_by_key(|r: &RelayAssignment| (r.source, r.relay, r.pair));
    Ok(finish(inst, x, y, gap_limited))
}

pub fn solve_primary_ratefair(inst: &SlotInstance) -> Result<Allocation, SchedulerError> {
    inst.validate()?;
    ratefair(inst, false)
}

pub fn solve_reflection_ratefair(inst: &SlotInstance) -> Result<Allocation, SchedulerError> {
    require_reflection(inst)?;
    inst.validate()?;
    ratefair(inst, true)
}

/// Worst fractional rate of `alloc` over pairs with `A_j > 0`; `None` when
/// no pair can be served.
pub fn min_fractional_edr(inst: &SlotInstance, alloc: &Allocation, a: &[f64]) -> Option<f64> {
    let served = alloc.per_pair_edr(inst);
    (0..inst.num_pairs())
        .filter(|&j| a[j] > 0.0)
        .map(|j| served[j] / a[j])
        .min_by(f64::total_cmp)
}
