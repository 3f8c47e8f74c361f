//! Dense two-phase primal simplex.
//!
//! Variables are shifted to their lower bounds; finite upper bounds become
//! explicit rows. Fixed variables (`lower == upper`) are substituted out
//! before the tableau is built, which keeps branch-and-bound nodes small.
//! Pricing is Dantzig's rule until [`BLAND_AFTER`] pivots, then Bland's rule.

use crate::lp::{LinearProgram, Relation, SolveResult, Status};
use crate::IlpError;

const PIVOT_TOL: f64 = 1e-9;
const PHASE_ONE_TOL: f64 = 1e-7;
const BLAND_AFTER: usize = 5000;
const MAX_PIVOTS: usize = 200_000;

/// Solve a maximization LP.
pub fn solve_lp(lp: &LinearProgram) -> Result<SolveResult, IlpError> {
    lp.validate()?;
    solve_with_bounds(lp, &lp.bounds)
}

/// Solve `lp` with `bounds` in place of the program's own bounds. The program
/// must already be validated.
pub(crate) fn solve_with_bounds(
    lp: &LinearProgram,
    bounds: &[(f64, f64)],
) -> Result<SolveResult, IlpError> {
    let n = lp.num_vars();
    let mut lower = vec![0.0; n];
    let mut col_of = vec![usize::MAX; n];
    let mut var_of_col = Vec::new();
    for (j, &(lo, hi)) in bounds.iter().enumerate() {
        if hi < lo - PIVOT_TOL {
            return Ok(SolveResult::without_solution(Status::Infeasible));
        }
        lower[j] = lo;
        if hi - lo > PIVOT_TOL {
            col_of[j] = var_of_col.len();
            var_of_col.push(j);
        }
    }
    let ns = var_of_col.len();

    // Rows in shifted, free-column space: (coeffs over structural cols, relation, rhs).
    let mut rows: Vec<(Vec<(usize, f64)>, Relation, f64)> = Vec::new();
    for c in &lp.constraints {
        let mut rhs = c.rhs;
        let mut terms = Vec::with_capacity(c.terms.len());
        for &(j, a) in &c.terms {
            rhs -= a * lower[j];
            if col_of[j] != usize::MAX && a != 0.0 {
                terms.push((col_of[j], a));
            }
        }
        rows.push((terms, c.relation, rhs));
    }
    for (col, &j) in var_of_col.iter().enumerate() {
        let hi = bounds[j].1;
        if hi.is_finite() {
            rows.push((vec![(col, 1.0)], Relation::Le, hi - lower[j]));
        }
    }
    for row in rows.iter_mut() {
        if row.2 < 0.0 {
            for t in row.0.iter_mut() {
                t.1 = -t.1;
            }
            row.2 = -row.2;
            row.1 = match row.1 {
                Relation::Le => Relation::Ge,
                Relation::Ge => Relation::Le,
                Relation::Eq => Relation::Eq,
            };
        }
    }

    let m = rows.len();
    let n_slack = rows.iter().filter(|r| r.1 != Relation::Eq).count();
    let n_art = rows.iter().filter(|r| r.1 != Relation::Le).count();
    let ncols = ns + n_slack + n_art;
    let art_start = ns + n_slack;

    let mut tab = Tableau::new(m, ncols);
    let mut next_slack = ns;
    let mut next_art = art_start;
    for (i, (terms, rel, rhs)) in rows.iter().enumerate() {
        for &(col, a) in terms {
            *tab.at(i, col) += a;
        }
        *tab.at(i, ncols) = *rhs;
        match rel {
            Relation::Le => {
                *tab.at(i, next_slack) = 1.0;
                tab.basis[i] = next_slack;
                next_slack += 1;
            }
            Relation::Ge => {
                *tab.at(i, next_slack) = -1.0;
                next_slack += 1;
                *tab.at(i, next_art) = 1.0;
                tab.basis[i] = next_art;
                next_art += 1;
            }
            Relation::Eq => {
                *tab.at(i, next_art) = 1.0;
                tab.basis[i] = next_art;
                next_art += 1;
            }
        }
    }

    let mut pivots = 0usize;
    if n_art > 0 {
        let mut cost = vec![0.0; ncols];
        cost[art_start..].iter_mut().for_each(|c| *c = -1.0);
        let allowed = vec![true; ncols];
        tab.set_cost(&cost);
        // Phase one is bounded below by zero, so it cannot be unbounded.
        tab.optimize(&allowed, &mut pivots)?;
        if tab.objective() < -PHASE_ONE_TOL {
            return Ok(SolveResult::without_solution(Status::Infeasible));
        }
        // Drive remaining zero-level artificials out of the basis where possible.
        for i in 0..m {
            if tab.basis[i] >= art_start {
                if let Some(col) = (0..art_start).find(|&c| tab.get(i, c).abs() > PIVOT_TOL) {
                    tab.pivot(i, col);
                }
            }
        }
    }

    let mut cost = vec![0.0; ncols];
    for (col, &j) in var_of_col.iter().enumerate() {
        cost[col] = lp.objective[j];
    }
    let allowed: Vec<bool> = (0..ncols).map(|c| c < art_start).collect();
    tab.set_cost(&cost);
    if !tab.optimize(&allowed, &mut pivots)? {
        return Ok(SolveResult::without_solution(Status::Unbounded));
    }

    let mut x = lower;
    for i in 0..m {
        let b = tab.basis[i];
        if b < ns {
            let j = var_of_col[b];
            x[j] += tab.get(i, ncols);
        }
    }
    for (j, v) in x.iter_mut().enumerate() {
        let (lo, hi) = bounds[j];
        *v = v.clamp(lo, hi);
    }
    Ok(SolveResult {
        status: Status::Optimal,
        objective_value: lp.objective_value(&x),
        assignment: x,
        gap: 0.0,
    })
}

struct Tableau {
    m: usize,
    width: usize,
    a: Vec<f64>,
    basis: Vec<usize>,
    /// Reduced costs `c_B B^-1 A_j - c_j`; last entry is the objective value.
    z: Vec<f64>,
}

impl Tableau {
    fn new(m: usize, ncols: usize) -> Self {
        let width = ncols + 1;
        Self {
            m,
            width,
            a: vec![0.0; m * width],
            basis: vec![0; m],
            z: vec![0.0; width],
        }
    }

    fn at(&mut self, i: usize, j: usize) -> &mut f64 {
        &mut self.a[i * self.width + j]
    }

    fn get(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.width + j]
    }

    fn objective(&self) -> f64 {
        self.z[self.width - 1]
    }

    fn set_cost(&mut self, cost: &[f64]) {
        let ncols = self.width - 1;
        for j in 0..ncols {
            self.z[j] = -cost[j];
        }
        self.z[ncols] = 0.0;
        for i in 0..self.m {
            let cb = cost[self.basis[i]];
            if cb != 0.0 {
                let row = &self.a[i * self.width..(i + 1) * self.width];
                for (zj, &aij) in self.z.iter_mut().zip(row) {
                    *zj += cb * aij;
                }
            }
        }
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let w = self.width;
        let p = self.a[r * w + c];
        for v in &mut self.a[r * w..(r + 1) * w] {
            *v /= p;
        }
        self.a[r * w + c] = 1.0;
        let (before, rest) = self.a.split_at_mut(r * w);
        let (prow, after) = rest.split_at_mut(w);
        for row in before.chunks_mut(w).chain(after.chunks_mut(w)) {
            let f = row[c];
            if f != 0.0 {
                for (v, &pv) in row.iter_mut().zip(prow.iter()) {
                    *v -= f * pv;
                }
                row[c] = 0.0;
            }
        }
        let f = self.z[c];
        if f != 0.0 {
            for (v, &pv) in self.z.iter_mut().zip(prow.iter()) {
                *v -= f * pv;
            }
            self.z[c] = 0.0;
        }
        self.basis[r] = c;
    }

    /// Run primal simplex to optimality. Returns `Ok(false)` when unbounded.
    fn optimize(&mut self, allowed: &[bool], pivots: &mut usize) -> Result<bool, IlpError> {
        let ncols = self.width - 1;
        loop {
            let bland = *pivots >= BLAND_AFTER;
            let mut entering = None;
            let mut best = -PIVOT_TOL;
            for j in 0..ncols {
                if !allowed[j] {
                    continue;
                }
                let d = self.z[j];
                if d < best {
                    entering = Some(j);
                    if bland {
                        break;
                    }
                    best = d;
                }
            }
            let Some(c) = entering else {
                return Ok(true);
            };

            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.m {
                let aic = self.get(i, c);
                if aic > PIVOT_TOL {
                    let ratio = self.get(i, ncols) / aic;
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((bi, br)) => {
                            if ratio < br - 1e-12
                                || (ratio <= br + 1e-12 && self.basis[i] < self.basis[bi])
                            {
                                Some((i, ratio))
                            } else {
                                Some((bi, br))
                            }
                        }
                    };
                }
            }
            let Some((r, _)) = leave else {
                return Ok(false);
            };
            self.pivot(r, c);
            *pivots += 1;
            if *pivots > MAX_PIVOTS {
                return Err(IlpError::IterationLimit(MAX_PIVOTS));
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::Constraint;

    #[test]
    fn single_bound() {
        let mut lp = LinearProgram::new(vec![1.0]);
        lp.add(Constraint::le(vec![(0, 1.0)], 5.0));
        let r = solve_lp(&lp).unwrap();
        assert_eq!(r.status, Status::Optimal);
        assert!((r.objective_value - 5.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_optimum() {
        let mut lp = LinearProgram::new(vec![1.0, 1.0]);
        lp.add(Constraint::le(vec![(0, 1.0), (1, 1.0)], 1.0));
        let r = solve_lp(&lp).unwrap();
        assert!((r.objective_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn infeasible_and_unbounded() {
        let mut lp = LinearProgram::new(vec![1.0]);
        lp.add(Constraint::ge(vec![(0, 1.0)], 3.0));
        lp.add(Constraint::le(vec![(0, 1.0)], 2.0));
        assert_eq!(solve_lp(&lp).unwrap().status, Status::Infeasible);

        let mut lp = LinearProgram::new(vec![1.0, 0.0]);
        lp.add(Constraint::ge(vec![(0, 1.0), (1, -1.0)], 0.0));
        assert_eq!(solve_lp(&lp).unwrap().status, Status::Unbounded);
    }

    #[test]
    fn equality_and_shifted_bounds() {
        // max 2x + y, x + y = 4, x in [1, 3], y in [0.5, inf)
        let mut lp = LinearProgram::new(vec![2.0, 1.0]);
        lp.bounds = vec![(1.0, 3.0), (0.5, f64::INFINITY)];
        lp.add(Constraint::eq(vec![(0, 1.0), (1, 1.0)], 4.0));
        let r = solve_lp(&lp).unwrap();
        assert!((r.objective_value - 7.0).abs() < 1e-9);
        assert!((r.assignment[0] - 3.0).abs() < 1e-9);
    }

    #[test]
    fn redundant_equalities() {
        let mut lp = LinearProgram::new(vec![1.0, 1.0]);
        lp.add(Constraint::eq(vec![(0, 1.0), (1, 1.0)], 2.0));
        lp.add(Constraint::eq(vec![(0, 2.0), (1, 2.0)], 4.0));
        lp.add(Constraint::le(vec![(0, 1.0)], 1.5));
        let r = solve_lp(&lp).unwrap();
        assert_eq!(r.status, Status::Optimal);
        assert!((r.objective_value - 2.0).abs() < 1e-9);
    }

    #[test]
    fn fixed_variables_are_substituted() {
        let mut lp = LinearProgram::new(vec![1.0, 3.0]);
        lp.bounds = vec![(0.0, 10.0), (2.0, 2.0)];
        lp.add(Constraint::le(vec![(0, 1.0), (1, 1.0)], 5.0));
        let r = solve_lp(&lp).unwrap();
        assert!((r.objective_value - 9.0).abs() < 1e-9);
        assert_eq!(r.assignment[1], 2.0);
    }

    #[test]
    fn bad_index_is_structural() {
        let mut lp = LinearProgram::new(vec![1.0]);
        lp.add(Constraint::le(vec![(3, 1.0)], 1.0));
        assert!(matches!(solve_lp(&lp), Err(IlpError::Structural(_))));
    }
}
