use crate::IlpError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

/// One linear row `sum(coeff * x[var]) <relation> rhs`, stored sparsely.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub terms: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

impl Constraint {
    pub fn new(terms: Vec<(usize, f64)>, relation: Relation, rhs: f64) -> Self {
        Self { terms, relation, rhs }
    }

    pub fn le(terms: Vec<(usize, f64)>, rhs: f64) -> Self {
        Self::new(terms, Relation::Le, rhs)
    }

    pub fn ge(terms: Vec<(usize, f64)>, rhs: f64) -> Self {
        Self::new(terms, Relation::Ge, rhs)
    }

    pub fn eq(terms: Vec<(usize, f64)>, rhs: f64) -> Self {
        Self::new(terms, Relation::Eq, rhs)
    }

    pub fn lhs(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(j, a)| a * x[j]).sum()
    }

    /// Amount by which `x` violates this row (0 when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let lhs = self.lhs(x);
        match self.relation {
            Relation::Le => (lhs - self.rhs).max(0.0),
            Relation::Ge => (self.rhs - lhs).max(0.0),
            Relation::Eq => (lhs - self.rhs).abs(),
        }
    }
}

/// Maximization LP with per-variable bounds. Lower bounds must be finite;
/// upper bounds may be `f64::INFINITY`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
    pub bounds: Vec<(f64, f64)>,
}

impl LinearProgram {
    /// New program over `n` variables, all bounded to `[0, inf)`.
    pub fn new(objective: Vec<f64>) -> Self {
        let n = objective.len();
        Self {
            objective,
            constraints: Vec::new(),
            bounds: vec![(0.0, f64::INFINITY); n],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add(&mut self, c: Constraint) -> &mut Self {
        self.constraints.push(c);
        self
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    pub fn validate(&self) -> Result<(), IlpError> {
        let n = self.num_vars();
        if self.bounds.len() != n {
            return Err(IlpError::Structural(format!(
                "{} bounds for {} variables",
                self.bounds.len(),
                n
            )));
        }
        for (row, c) in self.constraints.iter().enumerate() {
            if let Some(&(j, _)) = c.terms.iter().find(|&&(j, _)| j >= n) {
                return Err(IlpError::Structural(format!(
                    "constraint {row} references variable {j} of {n}"
                )));
            }
            if !c.rhs.is_finite() || c.terms.iter().any(|&(_, a)| !a.is_finite()) {
                return Err(IlpError::Structural(format!("constraint {row} is not finite")));
            }
        }
        for (j, &(lo, hi)) in self.bounds.iter().enumerate() {
            if !lo.is_finite() || hi.is_nan() {
                return Err(IlpError::Structural(format!(
                    "variable {j} needs a finite lower bound"
                )));
            }
        }
        if self.objective.iter().any(|c| !c.is_finite()) {
            return Err(IlpError::Structural("objective is not finite".into()));
        }
        Ok(())
    }
}

/// Largest constraint or bound violation of `x` against `lp`.
pub fn max_violation(lp: &LinearProgram, x: &[f64]) -> f64 {
    let rows = lp.constraints.iter().map(|c| c.violation(x));
    let bounds = lp
        .bounds
        .iter()
        .zip(x)
        .map(|(&(lo, hi), &v)| (lo - v).max(v - hi).max(0.0));
    rows.chain(bounds).fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MipProblem {
    pub base: LinearProgram,
    pub integer_vars: Vec<usize>,
}

impl MipProblem {
    pub fn new(base: LinearProgram, integer_vars: Vec<usize>) -> Self {
        Self { base, integer_vars }
    }

    pub fn validate(&self) -> Result<(), IlpError> {
        self.base.validate()?;
        let n = self.base.num_vars();
        for &j in &self.integer_vars {
            if j >= n {
                return Err(IlpError::Structural(format!(
                    "integer index {j} out of range for {n} variables"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
    GapLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub status: Status,
    pub objective_value: f64,
    pub assignment: Vec<f64>,
    /// Relative gap between best bound and incumbent; 0 when optimal.
    pub gap: f64,
}

impl SolveResult {
    pub(crate) fn without_solution(status: Status) -> Self {
        Self {
            status,
            objective_value: match status {
                Status::Unbounded => f64::INFINITY,
                _ => f64::NEG_INFINITY,
            },
            assignment: Vec::new(),
            gap: f64::INFINITY,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == Status::Optimal
    }
}
