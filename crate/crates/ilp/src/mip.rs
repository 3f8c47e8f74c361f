use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::lp::{LinearProgram, MipProblem, SolveResult, Status};
use crate::simplex::solve_with_bounds;
use crate::{IlpError, FEASIBILITY_TOL, INTEGRALITY_TOL};

/// Largest integer search space [`brute_force_mip`] will enumerate.
pub const BRUTE_FORCE_LIMIT: f64 = 1e7;

struct Node {
    bound: f64,
    seq: usize,
    bounds: Vec<(f64, f64)>,
    solution: Vec<f64>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    // Max-heap: larger bound first, then earlier creation.
    fn cmp(&self, other: &Self) -> Ordering {
        self.bound
            .total_cmp(&other.bound)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

fn improves(candidate: f64, incumbent: Option<f64>) -> bool {
    match incumbent {
        None => true,
        Some(best) => candidate > best + 1e-9 * best.abs().max(1.0),
    }
}

/// Evaluate an integer point: fix integer variables at `values` and optimize
/// the continuous remainder. `None` if infeasible.
fn complete_fixed(
    mip: &MipProblem,
    bounds: &[(f64, f64)],
    values: &[f64],
) -> Result<Option<(f64, Vec<f64>)>, IlpError> {
    let lp = &mip.base;
    let mut fixed = bounds.to_vec();
    for (&j, &v) in mip.integer_vars.iter().zip(values) {
        fixed[j] = (v, v);
    }
    if fixed.iter().all(|&(lo, hi)| lo == hi) {
        let x: Vec<f64> = fixed.iter().map(|b| b.0).collect();
        if lp.constraints.iter().all(|c| c.violation(&x) <= FEASIBILITY_TOL) {
            return Ok(Some((lp.objective_value(&x), x)));
        }
        return Ok(None);
    }
    let r = solve_with_bounds(lp, &fixed)?;
    Ok(match r.status {
        Status::Optimal => Some((r.objective_value, r.assignment)),
        _ => None,
    })
}

fn most_fractional(mip: &MipProblem, x: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for &j in &mip.integer_vars {
        let frac = x[j] - x[j].floor();
        if frac > INTEGRALITY_TOL && frac < 1.0 - INTEGRALITY_TOL {
            let score = (frac - 0.5).abs();
            match best {
                Some((bj, bs)) if score > bs || (score == bs && j > bj) => {}
                _ => best = Some((j, score)),
            }
        }
    }
    best.map(|(j, _)| j)
}

/// Branch-and-bound for a maximization MIP.
///
/// Nodes are explored best-first on their LP bound; the branching variable is
/// the most fractional one, ties to the lowest index. Every fractional node
/// also tries the rounded-down point as an incumbent. All integer variables
/// need finite bounds.
pub fn solve_mip(mip: &MipProblem, node_limit: usize) -> Result<SolveResult, IlpError> {
    if node_limit == 0 {
        return Err(IlpError::Parameter("node_limit must be positive".into()));
    }
    mip.validate()?;
    let lp: &LinearProgram = &mip.base;
    for &j in &mip.integer_vars {
        if !lp.bounds[j].1.is_finite() {
            return Err(IlpError::Parameter(format!(
                "integer variable {j} has no finite upper bound"
            )));
        }
    }
    let mut root_bounds = lp.bounds.clone();
    for &j in &mip.integer_vars {
        let (lo, hi) = root_bounds[j];
        root_bounds[j] = (lo.ceil(), (hi + INTEGRALITY_TOL).floor());
    }

    let root = solve_with_bounds(lp, &root_bounds)?;
    match root.status {
        Status::Optimal => {}
        other => return Ok(SolveResult::without_solution(other)),
    }

    let mut heap = BinaryHeap::new();
    let mut seq = 0usize;
    heap.push(Node {
        bound: root.objective_value,
        seq,
        bounds: root_bounds,
        solution: root.assignment,
    });
    let mut incumbent: Option<(f64, Vec<f64>)> = None;
    let mut expanded = 0usize;
    let mut hit_limit = false;

    while let Some(node) = heap.pop() {
        let inc_val = incumbent.as_ref().map(|i| i.0);
        if !improves(node.bound, inc_val) {
            // Best-first: nothing left can beat the incumbent.
            heap.clear();
            break;
        }
        if expanded >= node_limit {
            heap.push(node);
            hit_limit = true;
            break;
        }
        expanded += 1;

        let Some(branch) = most_fractional(mip, &node.solution) else {
            let values: Vec<f64> = mip.integer_vars.iter().map(|&j| node.solution[j].round()).collect();
            if let Some((obj, x)) = complete_fixed(mip, &node.bounds, &values)? {
                if improves(obj, inc_val) {
                    incumbent = Some((obj, x));
                }
            }
            continue;
        };

        let floored: Vec<f64> = mip
            .integer_vars
            .iter()
            .map(|&j| {
                let (lo, hi) = node.bounds[j];
                (node.solution[j] + INTEGRALITY_TOL).floor().clamp(lo, hi)
            })
            .collect();
        if let Some((obj, x)) = complete_fixed(mip, &node.bounds, &floored)? {
            if improves(obj, incumbent.as_ref().map(|i| i.0)) {
                incumbent = Some((obj, x));
            }
        }

        let v = node.solution[branch];
        for child in 0..2 {
            let mut bounds = node.bounds.clone();
            if child == 0 {
                bounds[branch].1 = v.floor();
            } else {
                bounds[branch].0 = v.ceil();
            }
            let r = solve_with_bounds(lp, &bounds)?;
            if r.status == Status::Optimal
                && improves(r.objective_value, incumbent.as_ref().map(|i| i.0))
            {
                seq += 1;
                heap.push(Node {
                    bound: r.objective_value,
                    seq,
                    bounds,
                    solution: r.assignment,
                });
            }
        }
    }

    let open_bound = heap.iter().map(|n| n.bound).fold(f64::NEG_INFINITY, f64::max);
    match incumbent {
        Some((obj, x)) => {
            let (status, gap) = if hit_limit && open_bound > obj {
                (Status::GapLimit, (open_bound - obj) / obj.abs().max(1.0))
            } else {
                (Status::Optimal, 0.0)
            };
            Ok(SolveResult {
                status,
                objective_value: obj,
                assignment: x,
                gap,
            })
        }
        None if hit_limit => Ok(SolveResult::without_solution(Status::GapLimit)),
        None => Ok(SolveResult::without_solution(Status::Infeasible)),
    }
}

/// Exhaustive enumeration of every integer assignment inside the bounds.
///
/// Continuous variables, if any, are optimized by LP once the integers are
/// fixed. Ties keep the first assignment in lexicographic order.
pub fn brute_force_mip(mip: &MipProblem) -> Result<SolveResult, IlpError> {
    mip.validate()?;
    let lp = &mip.base;
    let mut domains = Vec::with_capacity(mip.integer_vars.len());
    let mut size = 1.0f64;
    for &j in &mip.integer_vars {
        let (lo, hi) = lp.bounds[j];
        if !hi.is_finite() {
            return Err(IlpError::Size(format!("integer variable {j} is unbounded")));
        }
        let lo = lo.ceil() as i64;
        let hi = (hi + INTEGRALITY_TOL).floor() as i64;
        if hi < lo {
            return Ok(SolveResult::without_solution(Status::Infeasible));
        }
        size *= (hi - lo + 1) as f64;
        domains.push((lo, hi));
    }
    if size > BRUTE_FORCE_LIMIT {
        return Err(IlpError::Size(format!("{size} integer assignments")));
    }

    let mut current: Vec<i64> = domains.iter().map(|d| d.0).collect();
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut unbounded = false;
    loop {
        let values: Vec<f64> = current.iter().map(|&v| v as f64).collect();
        let mut fixed = lp.bounds.clone();
        for (&j, &v) in mip.integer_vars.iter().zip(&values) {
            fixed[j] = (v, v);
        }
        if fixed.iter().all(|&(lo, hi)| lo == hi) {
            let x: Vec<f64> = fixed.iter().map(|b| b.0).collect();
            if lp.constraints.iter().all(|c| c.violation(&x) <= FEASIBILITY_TOL) {
                let obj = lp.objective_value(&x);
                if best.as_ref().is_none_or(|b| obj > b.0) {
                    best = Some((obj, x));
                }
            }
        } else {
            let r = solve_with_bounds(lp, &fixed)?;
            match r.status {
                Status::Optimal => {
                    if best.as_ref().is_none_or(|b| r.objective_value > b.0) {
                        best = Some((r.objective_value, r.assignment));
                    }
                }
                Status::Unbounded => unbounded = true,
                _ => {}
            }
        }

        // Odometer increment, last variable fastest.
        let mut k = current.len();
        let exhausted = loop {
            if k == 0 {
                break true;
            }
            k -= 1;
            if current[k] < domains[k].1 {
                current[k] += 1;
                break false;
            }
            current[k] = domains[k].0;
        };
        if exhausted {
            break;
        }
    }

    if unbounded {
        return Ok(SolveResult::without_solution(Status::Unbounded));
    }
    Ok(match best {
        Some((obj, x)) => SolveResult {
            status: Status::Optimal,
            objective_value: obj,
            assignment: x,
            gap: 0.0,
        },
        None => SolveResult::without_solution(Status::Infeasible),
    })
}
