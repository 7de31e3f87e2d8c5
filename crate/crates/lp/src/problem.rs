use crate::error::LpError;

/// Index of a variable inside a [`LinearProgram`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub usize);

/// A sparse linear row `Σ coeffs · x  (≤ | =)  rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub coeffs: Vec<(usize, f64)>,
    pub rhs: f64,
    pub name: Option<String>,
}

impl Constraint {
    pub fn new(coeffs: Vec<(usize, f64)>, rhs: f64) -> Self {
        Constraint { coeffs, rhs, name: None }
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    /// Row activity at `x`.
    pub fn activity(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(j, a)| a * x[j]).sum()
    }

    /// Merges duplicate column entries and drops exact zeros.
    pub(crate) fn normalized(&self) -> Vec<(usize, f64)> {
        let mut c = self.coeffs.clone();
        c.sort_by_key(|e| e.0);
        let mut out: Vec<(usize, f64)> = Vec::with_capacity(c.len());
        for (j, a) in c {
            match out.last_mut() {
                Some(last) if last.0 == j => last.1 += a,
                _ => out.push((j, a)),
            }
        }
        out.retain(|e| e.1 != 0.0);
        out
    }
}

/// Minimization problem
///
/// ```text
/// min  cᵀx
/// s.t. A x ≤ b
///      E x = f
///      l ≤ x ≤ u      (bounds may be infinite)
/// ```
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinearProgram {
    pub(crate) cost: Vec<f64>,
    pub(crate) lower: Vec<f64>,
    pub(crate) upper: Vec<f64>,
    pub(crate) names: Vec<String>,
    pub(crate) ineq: Vec<Constraint>,
    pub(crate) eq: Vec<Constraint>,
}

impl LinearProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self, name: impl Into<String>, cost: f64, lower: f64, upper: f64) -> VarId {
        self.cost.push(cost);
        self.lower.push(lower);
        self.upper.push(upper);
        self.names.push(name.into());
        VarId(self.cost.len() - 1)
    }

    /// Adds `count` variables sharing cost and bounds; returns the first index.
    pub fn add_vars(&mut self, prefix: &str, count: usize, cost: f64, lower: f64, upper: f64) -> usize {
        let first = self.cost.len();
        for k in 0..count {
            self.add_var(format!("{prefix}{k}"), cost, lower, upper);
        }
        first
    }

    pub fn set_cost(&mut self, var: usize, cost: f64) {
        self.cost[var] = cost;
    }

    pub fn set_bounds(&mut self, var: usize, lower: f64, upper: f64) {
        self.lower[var] = lower;
        self.upper[var] = upper;
    }

    pub fn add_le(&mut self, coeffs: Vec<(usize, f64)>, rhs: f64) -> usize {
        self.ineq.push(Constraint::new(coeffs, rhs));
        self.ineq.len() - 1
    }

    pub fn add_ge(&mut self, coeffs: Vec<(usize, f64)>, rhs: f64) -> usize {
        let neg = coeffs.into_iter().map(|(j, a)| (j, -a)).collect();
        self.add_le(neg, -rhs)
    }

    pub fn add_eq(&mut self, coeffs: Vec<(usize, f64)>, rhs: f64) -> usize {
        self.eq.push(Constraint::new(coeffs, rhs));
        self.eq.len() - 1
    }

    pub fn push_ineq(&mut self, c: Constraint) -> usize {
        self.ineq.push(c);
        self.ineq.len() - 1
    }

    pub fn push_eq(&mut self, c: Constraint) -> usize {
        self.eq.push(c);
        self.eq.len() - 1
    }

    pub fn num_vars(&self) -> usize {
        self.cost.len()
    }

    pub fn cost(&self) -> &[f64] {
        &self.cost
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn inequalities(&self) -> &[Constraint] {
        &self.ineq
    }

    pub fn equalities(&self) -> &[Constraint] {
        &self.eq
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.cost.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Largest violation of any row or bound at `x` (0 when feasible).
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (j, &v) in x.iter().enumerate() {
            worst = worst.max(self.lower[j] - v).max(v - self.upper[j]);
        }
        for c in &self.ineq {
            worst = worst.max(c.activity(x) - c.rhs);
        }
        for c in &self.eq {
            worst = worst.max((c.activity(x) - c.rhs).abs());
        }
        worst
    }

    pub fn validate(&self) -> Result<(), LpError> {
        let n = self.num_vars();
        if n == 0 {
            return Err(LpError::NoVariables);
        }
        for j in 0..n {
            if !self.cost[j].is_finite() {
                return Err(LpError::NonFinite("cost"));
            }
            if self.lower[j].is_nan() || self.upper[j].is_nan() || self.lower[j] == f64::INFINITY
                || self.upper[j] == f64::NEG_INFINITY
            {
                return Err(LpError::NonFinite("bounds"));
            }
            if self.lower[j] > self.upper[j] {
                return Err(LpError::InvertedBounds(j));
            }
        }
        for c in self.ineq.iter().chain(&self.eq) {
            if !c.rhs.is_finite() {
                return Err(LpError::NonFinite("right-hand side"));
            }
            for &(j, a) in &c.coeffs {
                if j >= n {
                    return Err(LpError::UnknownVariable { var: j, num_vars: n });
                }
                if !a.is_finite() {
                    return Err(LpError::NonFinite("constraint coefficient"));
                }
            }
        }
        Ok(())
    }
}
