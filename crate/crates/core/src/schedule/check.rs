use nalgebra::DVector;

use super::result::ReserveSchedule;
use crate::error::{CoreError, Result};
use crate::thermal::{RowTag, StackedSystem};
use crate::uncertainty::{
    enumerate_vertices, sample_admissible, worst_case_linear_lp, SetKind, UncertaintySet, MAX_ENUM_DIM,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckMode {
    /// Every vertex of the signal set (all of `{−1, 0, 1}^N` for one-sided
    /// capacities under a box signal).
    Oracle,
    /// Admissible signals drawn from the set.
    MonteCarlo { samples: usize },
    /// One LP over the halfspace form of the set per row; exact at any
    /// horizon, symmetric capacities only.
    RowLp,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RowViolation {
    pub tag: RowTag,
    pub amount: f64,
    pub signal: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityReport {
    pub signals_checked: usize,
    /// Smallest slack seen over all rows and signals.
    pub min_slack: f64,
    /// Worst violation per violated row.
    pub violations: Vec<RowViolation>,
}

impl FeasibilityReport {
    pub fn is_feasible(&self) -> bool {
        self.violations.is_empty()
    }
}

fn ternary(n: usize) -> Vec<Vec<f64>> {
    let mut out = vec![vec![]];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|p| {
                [-1.0, 0.0, 1.0].into_iter().map(move |v| {
                    let mut q = p.clone();
                    q.push(v);
                    q
                })
            })
            .collect();
    }
    out
}

/// Evaluates `G u + S Δu(w) ≤ Q` for signals from `set`.
pub fn robust_feasibility_check(
    system: &StackedSystem,
    u: &DVector<f64>,
    schedule: &ReserveSchedule,
    set: &UncertaintySet,
    mode: CheckMode,
    seed: u64,
    tol: f64,
) -> Result<FeasibilityReport> {
    let n = system.horizon;
    if set.n != n || schedule.horizon != n {
        return Err(CoreError::HorizonMismatch(n, set.n));
    }
    if u.len() != system.dim_u() {
        return Err(CoreError::Dimension(format!("u has {} entries, expected {}", u.len(), system.dim_u())));
    }
    if mode == CheckMode::RowLp {
        return row_lp_check(system, u, schedule, set, tol);
    }
    let signals = match mode {
        CheckMode::Oracle if schedule.symmetric => enumerate_vertices(set)?,
        CheckMode::Oracle => {
            if set.kind != SetKind::Pc {
                return Err(CoreError::InvalidParameter("one-sided oracle needs a box signal set".into()));
            }
            if n > MAX_ENUM_DIM {
                return Err(CoreError::DimensionGuard { got: n, max: MAX_ENUM_DIM });
            }
            ternary(n)
        }
        CheckMode::MonteCarlo { samples } => sample_admissible(set, seed, samples),
        CheckMode::RowLp => unreachable!(),
    };
    let tags = system.tags();
    let q = system.q();
    let mut worst: Vec<Option<RowViolation>> = vec![None; tags.len()];
    let mut min_slack = f64::INFINITY;
    for w in &signals {
        let du = schedule.deviation(system, w);
        let slack = system.slack(u, &du);
        for (i, &s) in slack.iter().enumerate() {
            min_slack = min_slack.min(s);
            if s < -tol * (1.0 + q[i].abs()) && worst[i].as_ref().map_or(true, |v| -s > v.amount) {
                worst[i] = Some(RowViolation { tag: tags[i], amount: -s, signal: w.clone() });
            }
        }
    }
    Ok(FeasibilityReport {
        signals_checked: signals.len(),
        min_slack,
        violations: worst.into_iter().flatten().collect(),
    })
}

fn row_lp_check(
    system: &StackedSystem,
    u: &DVector<f64>,
    schedule: &ReserveSchedule,
    set: &UncertaintySet,
    tol: f64,
) -> Result<FeasibilityReport> {
    if !schedule.symmetric {
        return Err(CoreError::InvalidParameter("row-wise LP check needs symmetric capacities".into()));
    }
    let n = system.horizon;
    let nominal = system.slack(u, &DVector::zeros(system.dim_du()));
    // column t: row response to a unit signal at step t
    let mut unit = vec![0.0; n];
    let mut cols = Vec::with_capacity(n);
    for t in 0..n {
        unit[t] = 1.0;
        cols.push(&nominal - system.slack(u, &schedule.deviation(system, &unit)));
        unit[t] = 0.0;
    }
    let tags = system.tags();
    let q = system.q();
    let mut min_slack = f64::INFINITY;
    let mut checked = 0;
    let mut violations = Vec::new();
    for i in 0..nominal.len() {
        let a: Vec<f64> = cols.iter().map(|c| c[i]).collect();
        let worst = if a.iter().all(|&v| v == 0.0) {
            0.0
        } else {
            checked += 1;
            worst_case_linear_lp(set, &a)?
        };
        let s = nominal[i] - worst;
        min_slack = min_slack.min(s);
        if s < -tol * (1.0 + q[i].abs()) {
            violations.push(RowViolation { tag: tags[i], amount: -s, signal: set.maximizer(&a) });
        }
    }
    Ok(FeasibilityReport { signals_checked: checked, min_slack, violations })
}
