use crate::problem::LinearProgram;

/// Where each dual variable came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DualSource {
    Ineq(usize),
    Eq(usize),
    Upper(usize),
    Lower(usize),
}

/// Explicit Lagrangian dual of a [`LinearProgram`].
#[derive(Debug, Clone)]
pub struct DualProblem {
    pub lp: LinearProgram,
    pub sources: Vec<DualSource>,
}

/// Builds the dual of `min cᵀx, Ax ≤ b, Ex = f, l ≤ x ≤ u`.
///
/// Finite bounds become rows first, leaving `x` free. The dual is stated as
/// the minimization `min bᵀλ − fᵀμ  s.t.  Aᵀλ − Eᵀμ = −c, λ ≥ 0`, whose
/// optimal value is the negated primal optimum.
pub fn dualize(primal: &LinearProgram) -> DualProblem {
    let n = primal.num_vars();
    let mut rows: Vec<(Vec<(usize, f64)>, f64, DualSource)> = Vec::new();
    for (k, c) in primal.ineq.iter().enumerate() {
        rows.push((c.normalized(), c.rhs, DualSource::Ineq(k)));
    }
    for j in 0..n {
        if primal.upper[j].is_finite() {
            rows.push((vec![(j, 1.0)], primal.upper[j], DualSource::Upper(j)));
        }
        if primal.lower[j].is_finite() {
            rows.push((vec![(j, -1.0)], -primal.lower[j], DualSource::Lower(j)));
        }
    }
    let mut lp = LinearProgram::new();
    let mut sources = Vec::new();
    // column coefficients per primal variable
    let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (coeffs, rhs, src) in rows {
        let v = lp.add_var(format!("lam_{}", sources.len()), rhs, 0.0, f64::INFINITY).0;
        for (j, a) in coeffs {
            cols[j].push((v, a));
        }
        sources.push(src);
    }
    for (k, c) in primal.eq.iter().enumerate() {
        let v = lp
            .add_var(format!("mu_{k}"), -c.rhs, f64::NEG_INFINITY, f64::INFINITY)
            .0;
        for (j, a) in c.normalized() {
            cols[j].push((v, -a));
        }
        sources.push(DualSource::Eq(k));
    }
    for (j, col) in cols.into_iter().enumerate() {
        lp.add_eq(col, -primal.cost[j]);
    }
    DualProblem { lp, sources }
}
