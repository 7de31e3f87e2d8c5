use crate::problem::LinearProgram;

const DUAL_ROUNDOFF: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
    NumericalFailure,
}

impl LpStatus {
    pub fn is_optimal(self) -> bool {
        self == LpStatus::Optimal
    }
}

/// Row weights whose combination of the constraints cannot be satisfied by
/// any point inside the variable bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct FarkasCertificate {
    pub ineq_weights: Vec<f64>,
    pub eq_weights: Vec<f64>,
}

impl FarkasCertificate {
    /// Distance by which the combined row misses the range reachable within
    /// the bounds. Positive means the certificate proves infeasibility.
    pub fn margin(&self, lp: &LinearProgram) -> f64 {
        let n = lp.num_vars();
        let wmax = self
            .ineq_weights
            .iter()
            .chain(&self.eq_weights)
            .fold(0.0f64, |a, w| a.max(w.abs()));
        // entries at round-off level carry no information
        let tiny = 1e-11 * wmax;
        let mut g = vec![0.0; n];
        let mut h = 0.0;
        let mut lo_sum = 0.0;
        let mut hi_sum = 0.0;
        for (c, &w) in lp.ineq.iter().zip(&self.ineq_weights) {
            if w.abs() <= tiny {
                continue;
            }
            for &(j, a) in &c.coeffs {
                g[j] += w * a;
            }
            h += w * c.rhs;
            // slack s ≥ 0 enters as w·s
            if w > 0.0 {
                hi_sum = f64::INFINITY;
            } else {
                lo_sum = f64::NEG_INFINITY;
            }
        }
        for (c, &w) in lp.eq.iter().zip(&self.eq_weights) {
            if w.abs() <= tiny {
                continue;
            }
            for &(j, a) in &c.coeffs {
                g[j] += w * a;
            }
            h += w * c.rhs;
        }
        for j in 0..n {
            if g[j].abs() <= tiny {
                continue;
            }
            let (a, b) = (g[j] * lp.lower[j], g[j] * lp.upper[j]);
            let (mn, mx) = if a < b { (a, b) } else { (b, a) };
            lo_sum += if mn.is_nan() { f64::NEG_INFINITY } else { mn };
            hi_sum += if mx.is_nan() { f64::INFINITY } else { mx };
        }
        (lo_sum - h).max(h - hi_sum)
    }
}

/// Outcome of a solve, including dual information.
///
/// Sign conventions for `min cᵀx, Ax ≤ b, Ex = f, l ≤ x ≤ u`: `ineq_duals`
/// are λ ≥ 0, `eq_duals` are μ (free) and the reduced costs satisfy
/// `z = c + Aᵀλ − Eᵀμ`.
#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    pub ineq_duals: Vec<f64>,
    pub eq_duals: Vec<f64>,
    pub reduced_costs: Vec<f64>,
    pub farkas: Option<FarkasCertificate>,
    pub ray: Option<Vec<f64>>,
    pub iterations: usize,
}

/// Residuals of the optimality conditions of a solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertificateReport {
    pub primal_infeasibility: f64,
    pub dual_infeasibility: f64,
    pub complementarity: f64,
    pub primal_objective: f64,
    pub dual_objective: f64,
}

impl CertificateReport {
    pub fn gap(&self) -> f64 {
        (self.primal_objective - self.dual_objective).abs()
    }

    /// Strong duality in the relative form `|p − d| ≤ tol·(1 + |p|)`.
    pub fn gap_ok(&self, tol: f64) -> bool {
        self.gap() <= tol * (1.0 + self.primal_objective.abs())
    }
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status.is_optimal()
    }

    /// Dual objective `−bᵀλ + fᵀμ + Σ z⁺ l + Σ z⁻ u`, `-inf` when a reduced
    /// cost above round-off pushes against an infinite bound.
    pub fn dual_objective(&self, lp: &LinearProgram) -> f64 {
        let z = self.recompute_reduced_costs(lp);
        let mut d = 0.0;
        for (c, &l) in lp.ineq.iter().zip(&self.ineq_duals) {
            d -= c.rhs * l;
        }
        for (c, &mu) in lp.eq.iter().zip(&self.eq_duals) {
            d += c.rhs * mu;
        }
        for (j, &zj) in z.iter().enumerate() {
            let bound = if zj > 0.0 { lp.lower[j] } else { lp.upper[j] };
            // round-off sized reduced costs on infinite bounds are zero
            if zj == 0.0 || (!bound.is_finite() && zj.abs() <= DUAL_ROUNDOFF) {
                continue;
            }
            d += zj * bound;
        }
        if d.is_nan() {
            f64::NEG_INFINITY
        } else {
            d
        }
    }

    fn recompute_reduced_costs(&self, lp: &LinearProgram) -> Vec<f64> {
        let mut z = lp.cost.clone();
        for (c, &l) in lp.ineq.iter().zip(&self.ineq_duals) {
            for &(j, a) in &c.coeffs {
                z[j] += a * l;
            }
        }
        for (c, &mu) in lp.eq.iter().zip(&self.eq_duals) {
            for &(j, a) in &c.coeffs {
                z[j] -= a * mu;
            }
        }
        z
    }

    /// Checks primal feasibility, dual feasibility, complementary slackness
    /// and the duality gap from scratch against `lp`.
    pub fn certificates(&self, lp: &LinearProgram) -> CertificateReport {
        let z = self.recompute_reduced_costs(lp);
        let mut dual_inf: f64 = 0.0;
        let mut comp: f64 = 0.0;
        for &l in &self.ineq_duals {
            dual_inf = dual_inf.max(-l);
        }
        for (c, &l) in lp.ineq.iter().zip(&self.ineq_duals) {
            let slack = c.rhs - c.activity(&self.x);
            comp = comp.max((l * slack).abs());
        }
        for (j, &zj) in z.iter().enumerate() {
            let (lo, up, v) = (lp.lower[j], lp.upper[j], self.x[j]);
            if zj > 0.0 {
                if lo == f64::NEG_INFINITY {
                    dual_inf = dual_inf.max(zj);
                } else {
                    comp = comp.max(zj * (v - lo)).max(0.0);
                }
            } else if zj < 0.0 {
                if up == f64::INFINITY {
                    dual_inf = dual_inf.max(-zj);
                } else {
                    comp = comp.max(-zj * (up - v));
                }
            }
        }
        CertificateReport {
            primal_infeasibility: lp.max_violation(&self.x),
            dual_infeasibility: dual_inf,
            complementarity: comp,
            primal_objective: lp.objective_value(&self.x),
            dual_objective: self.dual_objective(lp),
        }
    }
}
