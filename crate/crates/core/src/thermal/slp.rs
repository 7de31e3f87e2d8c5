use nalgebra::DVector;

use super::model::{BilinearBuildingModel, DisturbanceTrace, LtvBuildingModel};
use crate::error::{CoreError, Result};

/// Freezes the disturbances at `trace` and the states at `x_traj`, giving a
/// time-varying linear model over `horizon` steps. Without bilinear terms
/// the nominal model is returned unchanged.
pub fn slp_linearize(
    model: &BilinearBuildingModel,
    trace: &DisturbanceTrace,
    x_traj: &[DVector<f64>],
    u_traj: &[DVector<f64>],
    horizon: usize,
) -> Result<LtvBuildingModel> {
    if model.uv_terms.is_empty() && model.xu_terms.is_empty() {
        return Ok(model.nominal.clone());
    }
    if trace.len() < horizon {
        return Err(CoreError::TraceTooShort { have: trace.len(), need: horizon });
    }
    if !model.xu_terms.is_empty() && (x_traj.len() < horizon || u_traj.len() < horizon) {
        return Err(CoreError::Dimension(format!(
            "trajectories of length {}/{} shorter than horizon {horizon}",
            x_traj.len(),
            u_traj.len()
        )));
    }
    let n_x = model.nominal.n_x();
    if x_traj.iter().any(|x| x.len() != n_x) {
        return Err(CoreError::Dimension("state trajectory entries must have n_x rows".into()));
    }
    let mut out = model.nominal.clone();
    let mut bs = Vec::with_capacity(horizon);
    for t in 0..horizon {
        let mut b = model.nominal.b_at(t).clone();
        for term in &model.uv_terms {
            let v = match term.disturbance {
                0 => trace.ambient[t],
                1 => trace.solar[t],
                _ => trace.gains[t],
            };
            let col = b.column(term.input) + model.gamma.column(term.node) * (term.coeff * v);
            b.set_column(term.input, &col);
        }
        for term in &model.xu_terms {
            let xs = x_traj[t][term.state];
            let col = b.column(term.input) + model.gamma.column(term.node) * (term.coeff * xs);
            b.set_column(term.input, &col);
        }
        bs.push(b);
    }
    out.b = bs;
    Ok(out)
}

/// Result of sequential linear programming.
#[derive(Debug, Clone)]
pub struct SlpOutcome<S> {
    pub model: LtvBuildingModel,
    pub solution: S,
    pub iterations: usize,
    pub converged: bool,
    /// Largest relative change of the output trajectory in the last iteration.
    pub last_change: f64,
}

/// Alternates linearization and solving until the output trajectory settles.
///
/// `solve` receives the linearized model and returns the predicted state
/// trajectory `x_0 … x_N`, the input trajectory and its own solution value.
pub fn solve_slp<S, F>(
    model: &BilinearBuildingModel,
    trace: &DisturbanceTrace,
    x0: &DVector<f64>,
    horizon: usize,
    tol: f64,
    max_iter: usize,
    mut solve: F,
) -> Result<SlpOutcome<S>>
where
    F: FnMut(&LtvBuildingModel) -> Result<(Vec<DVector<f64>>, Vec<DVector<f64>>, S)>,
{
    if max_iter == 0 {
        return Err(CoreError::InvalidParameter("max_iter must be at least 1".into()));
    }
    let n_u = model.nominal.n_u();
    let mut x_traj = vec![x0.clone(); horizon + 1];
    let mut u_traj = vec![DVector::zeros(n_u); horizon];
    let output = |xs: &[DVector<f64>]| -> Vec<f64> {
        xs.iter().flat_map(|x| (&model.nominal.c * x).iter().copied().collect::<Vec<_>>()).collect()
    };
    let mut prev_y = output(&x_traj);
    let mut iterations = 0;
    loop {
        iterations += 1;
        let lin = slp_linearize(model, trace, &x_traj, &u_traj, horizon)?;
        let (xs, us, sol) = solve(&lin)?;
        if model.xu_terms.is_empty() {
            return Ok(SlpOutcome { model: lin, solution: sol, iterations, converged: true, last_change: 0.0 });
        }
        let y = output(&xs);
        let change = y
            .iter()
            .zip(&prev_y)
            .map(|(a, b)| (a - b).abs() / a.abs().max(1.0))
            .fold(0.0, f64::max);
        x_traj = xs;
        u_traj = us;
        prev_y = y;
        if change < tol || iterations >= max_iter {
            return Ok(SlpOutcome {
                model: lin,
                solution: sol,
                iterations,
                converged: change < tol,
                last_change: change,
            });
        }
    }
}
