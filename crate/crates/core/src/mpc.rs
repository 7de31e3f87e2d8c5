//! Per-building robust MPC with fixed reserve capacities.

use bldgres_lp::{Constraint, LinearProgram, LpStatus, Simplex};
use nalgebra::{DMatrix, DVector};

use crate::error::{CoreError, Result};
use crate::schedule::{polytope_dual, RowDual};
use crate::thermal::StackedBlock;
use crate::uncertainty::{pec_anchored, worst_case_linear, RealizedBiasState, SetKind, UncertaintySet};

/// What one building's controller knows at a decision step.
#[derive(Debug, Clone, PartialEq)]
pub struct MpcState {
    pub building: usize,
    pub x: DVector<f64>,
    pub step_of_day: usize,
    /// Up and down capacities over the horizon, `horizon × n_r`.
    pub r_up: DMatrix<f64>,
    pub r_down: DMatrix<f64>,
    pub symmetric: bool,
    pub bias: RealizedBiasState,
    pub horizon: usize,
    /// Leading steps whose rows are enforced; later rows are dropped.
    pub active: usize,
}

impl MpcState {
    /// No reserve over the horizon.
    pub fn unreserved(building: usize, x: DVector<f64>, horizon: usize, n_r: usize) -> Self {
        MpcState {
            building,
            x,
            step_of_day: 0,
            r_up: DMatrix::zeros(horizon, n_r),
            r_down: DMatrix::zeros(horizon, n_r),
            symmetric: true,
            bias: RealizedBiasState::new(0),
            horizon,
            active: horizon,
        }
    }

    /// Polytope set over the horizon, its first window shifted by the
    /// realized bias.
    pub fn pec_set(&self, eps: f64, t_steps: usize) -> Result<UncertaintySet> {
        pec_anchored(self.horizon, eps, t_steps, self.bias.elapsed(), self.bias.w_p)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MpcOutput {
    pub u_setpoint: DVector<f64>,
    pub plan: Vec<DVector<f64>>,
    pub objective: f64,
    /// Worst-case share of every stacked row reserved for the signal.
    pub margins: Vec<f64>,
    pub duals: Option<Vec<RowDual>>,
}

/// Worst-case tightening of every row of `block` for fixed capacities.
pub fn tightening(block: &StackedBlock, state: &MpcState, set: &UncertaintySet) -> Result<Vec<f64>> {
    let n = block.horizon;
    if state.r_up.nrows() != n || state.r_up.ncols() != block.n_r || state.r_down.shape() != state.r_up.shape() {
        return Err(CoreError::Dimension("reserve slice does not match the stacked block".into()));
    }
    if set.n != n {
        return Err(CoreError::HorizonMismatch(n, set.n));
    }
    if !state.symmetric && set.kind != SetKind::Pc {
        return Err(CoreError::InvalidParameter("one-sided capacities need a box signal set".into()));
    }
    let flat = |r: &DMatrix<f64>| DVector::from_iterator(r.len(), r.transpose().iter().copied());
    let (rd, ru) = (flat(&state.r_down), flat(&state.r_up));
    if rd.iter().chain(ru.iter()).all(|&v| v == 0.0) {
        return Ok(vec![0.0; block.rows()]);
    }
    // column j of `am`/`bm` holds the per-step coefficients of row j
    let mut am = DMatrix::zeros(n, block.rows());
    let mut bm = DMatrix::zeros(n, block.rows());
    for (col, s) in block.s.column_iter().enumerate() {
        let (d, u) = (rd[col], ru[col]);
        if d == 0.0 && u == 0.0 {
            continue;
        }
        let t = col / block.n_r;
        for (j, &v) in s.iter().enumerate() {
            if v != 0.0 {
                am[(t, j)] += v * d;
                bm[(t, j)] += v * u;
            }
        }
    }
    let mut out = Vec::with_capacity(block.rows());
    for j in 0..block.rows() {
        let (a, b) = (am.column(j), bm.column(j));
        let m = if a.iter().chain(b.iter()).all(|&v| v == 0.0) {
            0.0
        } else if state.symmetric {
            worst_case_linear(set, a.as_slice())?
        } else {
            a.iter().zip(b.iter()).map(|(&d, &u)| d.max(-u).max(0.0)).sum()
        };
        out.push(m);
    }
    Ok(out)
}

/// Added to the right-hand side of dropped rows (°C).
const INACTIVE_SLACK: f64 = 1e4;

/// Warm-startable nominal LP of one building over the MPC horizon; only
/// right-hand sides, bounds and prices change between decision steps.
#[derive(Debug, Clone)]
pub struct Lv2Engine {
    simplex: Simplex,
    g: DMatrix<f64>,
    rows: Vec<usize>,
    cost: Vec<f64>,
}

fn output_rows(block: &StackedBlock) -> Vec<usize> {
    let (ny, nu) = (block.output_rows(), block.input_rows());
    (0..ny).chain(ny + nu..2 * ny + nu).collect()
}

fn input_costs(block: &StackedBlock, c: &[f64]) -> Result<Vec<f64>> {
    if c.len() < block.horizon {
        return Err(CoreError::HorizonMismatch(block.horizon, c.len()));
    }
    Ok((0..block.horizon * block.n_u)
        .map(|col| c[col / block.n_u] * block.input_kw_per_unit(col % block.n_u) * block.step_hours)
        .collect())
}

impl Lv2Engine {
    pub fn new(block: &StackedBlock, c: &[f64]) -> Result<Self> {
        let cost = input_costs(block, c)?;
        let mut lp = LinearProgram::new();
        for (col, &cc) in cost.iter().enumerate() {
            let i = col % block.n_u;
            lp.add_var(format!("u_t{}_i{i}", col / block.n_u), cc, block.u_min[i], block.u_max[i]);
        }
        let rows = output_rows(block);
        for &j in &rows {
            let coeffs = block.g.row(j).iter().enumerate().filter(|(_, &g)| g != 0.0).map(|(k, &g)| (k, g)).collect();
            lp.push_ineq(Constraint::new(coeffs, block.q[j]));
        }
        Ok(Lv2Engine { simplex: Simplex::new(lp)?, g: block.g.clone(), rows, cost })
    }

    /// Whether `block` has the input-output map this engine was built for.
    pub fn fits(&self, block: &StackedBlock) -> bool {
        self.g == block.g
    }

    /// Solves with `margins` reserved on every stacked row; output rows of
    /// steps from `active` on are relaxed.
    pub fn solve(&mut self, block: &StackedBlock, c: &[f64], margins: &[f64], active: usize) -> Result<(Vec<f64>, f64)> {
        // shape only; comparing G on every step costs more than the solve
        if block.g.shape() != self.g.shape() || margins.len() != block.rows() {
            return Err(CoreError::Dimension("block or margins do not match the MPC engine".into()));
        }
        let cost = input_costs(block, c)?;
        for (k, (&new, old)) in cost.iter().zip(self.cost.iter_mut()).enumerate() {
            if new != *old {
                self.simplex.set_cost(k, new)?;
                *old = new;
            }
        }
        let ny = block.output_rows();
        let nu = block.input_rows();
        for k in 0..nu {
            let i = k % block.n_u;
            let hi = block.u_max[i] - margins[ny + k];
            let lo = block.u_min[i] + margins[2 * ny + nu + k];
            if lo > hi + 1e-9 {
                let tag = block.tags[ny + k];
                return Err(CoreError::Infeasible(format!(
                    "reserve exceeds the input range of building {} input {} at step {}",
                    tag.building, i, tag.step
                )));
            }
            let mid = 0.5 * (lo + hi);
            self.simplex.set_var_bounds(k, lo.min(mid), hi.max(mid))?;
        }
        let rhs: Vec<f64> = self
            .rows
            .iter()
            .map(|&j| block.q[j] - margins[j] + if block.tags[j].step < active { 0.0 } else { INACTIVE_SLACK })
            .collect();
        self.simplex.set_all_ineq_rhs(&rhs)?;
        match self.simplex.solve() {
            LpStatus::Optimal => {}
            LpStatus::Infeasible => {
                let sol = self.simplex.solution();
                let mut rows = Vec::new();
                if let Some(f) = sol.farkas {
                    for (r, w) in f.ineq_weights.iter().enumerate() {
                        if w.abs() > 1e-9 && rows.len() < 4 {
                            let tag = block.tags[self.rows[r]];
                            rows.push(format!("{} step {}", tag.kind.as_str(), tag.step));
                        }
                    }
                }
                return Err(CoreError::Infeasible(format!(
                    "building {} MPC: binding rows {}",
                    block.building,
                    rows.join(", ")
                )));
            }
            s => return Err(CoreError::Solver(s)),
        }
        let sol = self.simplex.solution();
        Ok((sol.x, sol.objective))
    }
}

fn check_state(state: &MpcState, block: &StackedBlock) -> Result<()> {
    if state.horizon != block.horizon {
        return Err(CoreError::HorizonMismatch(state.horizon, block.horizon));
    }
    if state.x != block.x0 {
        return Err(CoreError::InvalidParameter("stacked block was built from a different state".into()));
    }
    Ok(())
}

/// One decision step with a prepared engine.
pub fn mpc_step_with(
    engine: &mut Lv2Engine,
    state: &MpcState,
    block: &StackedBlock,
    c: &[f64],
    set: &UncertaintySet,
    with_duals: bool,
) -> Result<MpcOutput> {
    check_state(state, block)?;
    let margins = tightening(block, state, set)?;
    let (x, objective) = engine.solve(block, c, &margins, state.active.min(block.horizon))?;
    let n_u = block.n_u;
    let plan: Vec<DVector<f64>> = x.chunks(n_u).map(DVector::from_column_slice).collect();
    let duals = with_duals.then(|| {
        (0..block.rows())
            .map(|j| {
                let a: Vec<f64> = (0..block.horizon)
                    .map(|t| (0..block.n_r).map(|k| block.s[(j, t * block.n_r + k)] * state.r_down[(t, k)]).sum())
                    .collect();
                RowDual { tag: block.tags[j], lambda: polytope_dual(set, &a) }
            })
            .collect()
    });
    Ok(MpcOutput { u_setpoint: plan[0].clone(), plan, objective, margins, duals })
}

/// Box-signal robust MPC step.
pub fn mpc_step_pc(state: &MpcState, block: &StackedBlock, c: &[f64]) -> Result<MpcOutput> {
    let set = crate::uncertainty::build_pc(block.horizon)?;
    mpc_step_with(&mut Lv2Engine::new(block, c)?, state, block, c, &set, false)
}

/// Polytope-signal robust MPC step against `set` (already shifted by the
/// realized bias, see [`MpcState::pec_set`]); returns the row duals.
pub fn mpc_step_pec(state: &MpcState, block: &StackedBlock, c: &[f64], set: &UncertaintySet) -> Result<MpcOutput> {
    if !state.symmetric {
        return Err(CoreError::InvalidParameter("polytope MPC needs symmetric capacities".into()));
    }
    mpc_step_with(&mut Lv2Engine::new(block, c)?, state, block, c, set, true)
}

/// Committed capacities of one building over the whole run, `steps × n_r`;
/// steps past the commitment carry zero.
#[derive(Debug, Clone, PartialEq)]
pub struct CommittedReserve {
    pub up: DMatrix<f64>,
    pub down: DMatrix<f64>,
    pub symmetric: bool,
}

impl CommittedReserve {
    pub fn none(steps: usize, n_r: usize) -> Self {
        CommittedReserve { up: DMatrix::zeros(steps, n_r), down: DMatrix::zeros(steps, n_r), symmetric: true }
    }

    /// Writes the slots of `building` from `schedule` starting at `offset`.
    pub fn insert(&mut self, schedule: &crate::schedule::ReserveSchedule, building: usize, offset: usize) {
        for s in schedule.slots.iter().filter(|s| s.building == building) {
            for (t, (&up, &down)) in s.up.iter().zip(&s.down).enumerate() {
                if offset + t < self.up.nrows() {
                    self.up[(offset + t, s.slot)] = up;
                    self.down[(offset + t, s.slot)] = down;
                }
            }
        }
        self.symmetric &= schedule.symmetric;
    }

    /// Horizon slice from `start`, zero past the end.
    pub fn window(&self, start: usize, horizon: usize) -> (DMatrix<f64>, DMatrix<f64>) {
        let n_r = self.up.ncols();
        let pick = |m: &DMatrix<f64>| {
            DMatrix::from_fn(horizon, n_r, |t, k| if start + t < m.nrows() { m[(start + t, k)] } else { 0.0 })
        };
        (pick(&self.up), pick(&self.down))
    }
}

/// One building of a closed-loop run. The model must be time invariant;
/// `trace` and `c` cover the run plus one MPC horizon.
#[derive(Debug, Clone)]
pub struct RhBuilding {
    pub model: crate::thermal::LtvBuildingModel,
    pub trace: crate::thermal::DisturbanceTrace,
    pub c: Vec<f64>,
    pub x0: DVector<f64>,
    pub reserve: CommittedReserve,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SignalModel {
    Pc,
    Pec { eps: f64, t_steps: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RhConfig {
    /// Length of every MPC problem.
    pub horizon: usize,
    /// With `Some(end)`, rows from absolute step `end` on are dropped while
    /// at least `min_active` steps remain, so the plan shrinks towards the
    /// end of the upper-level schedule.
    pub plan_end: Option<usize>,
    pub min_active: usize,
    pub steps: usize,
    pub signal: SignalModel,
    /// Steps per day; averaging windows restart at midnight.
    pub steps_per_day: usize,
    pub tol: f64,
}

/// Per-step record of one building.
#[derive(Debug, Clone, PartialEq)]
pub struct StepLog {
    pub step: usize,
    pub building: usize,
    pub u_baseline: DVector<f64>,
    pub u_applied: DVector<f64>,
    pub w: f64,
    /// Room temperature after the step.
    pub y: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub occupied: bool,
    pub max_margin: f64,
    pub comfort_violation: f64,
    pub input_violation: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RhLog {
    pub steps: Vec<StepLog>,
    /// Electricity cost of the applied inputs.
    pub energy_cost: f64,
    /// Plant states after the last step.
    pub final_states: Vec<DVector<f64>>,
}

impl RhLog {
    pub fn violations(&self) -> usize {
        self.steps.iter().filter(|s| s.comfort_violation > 0.0 || s.input_violation > 0.0).count()
    }

    pub fn max_comfort_violation(&self) -> f64 {
        self.steps.iter().map(|s| s.comfort_violation).fold(0.0, f64::max)
    }

    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let n_u = self.steps.first().map_or(0, |s| s.u_baseline.len());
        let mut header = vec!["step".to_string(), "building".into()];
        header.extend((0..n_u).map(|i| format!("u{i}_baseline")));
        header.extend((0..n_u).map(|i| format!("u{i}_applied")));
        header.extend(["w", "y", "y_min", "y_max", "margin"].map(String::from));
        w.write_record(&header)?;
        for s in &self.steps {
            let mut rec = vec![s.step.to_string(), s.building.to_string()];
            rec.extend(s.u_baseline.iter().map(|v| format!("{v:.6}")));
            rec.extend(s.u_applied.iter().map(|v| format!("{v:.6}")));
            rec.extend([s.w, s.y, s.y_min, s.y_max, s.max_margin].map(|v| format!("{v:.6}")));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// What a signal feed sees before choosing the realized signal of a step.
pub struct FeedView<'a> {
    pub step: usize,
    pub states: &'a [MpcState],
    pub outputs: &'a [MpcOutput],
    pub blocks: &'a [&'a StackedBlock],
    /// Admissible range of the signal at this step.
    pub range: (f64, f64),
}

fn admissible_range(signal: SignalModel, bias: &RealizedBiasState) -> (f64, f64) {
    match signal {
        SignalModel::Pc => (-1.0, 1.0),
        SignalModel::Pec { eps, t_steps } => {
            let et = eps * t_steps as f64;
            let left = (t_steps - bias.elapsed() - 1) as f64;
            ((-et - bias.w_p - left).max(-1.0), (et - bias.w_p + left).min(1.0))
        }
    }
}

/// Closed loop: every step each building re-solves its MPC against the
/// committed capacities, `feed` picks the realized signal, and the plant
/// advances with the dispatched inputs.
pub fn receding_horizon_run(
    buildings: &[RhBuilding],
    cfg: &RhConfig,
    feed: &mut dyn FnMut(&FeedView) -> f64,
) -> Result<RhLog> {
    let n2 = cfg.horizon;
    let spd = cfg.steps_per_day.max(1);
    if let SignalModel::Pec { t_steps, .. } = cfg.signal {
        if t_steps == 0 || spd % t_steps != 0 {
            return Err(CoreError::InvalidParameter("averaging windows must tile the day".into()));
        }
    }
    let mut stackers = Vec::with_capacity(buildings.len());
    let mut engines = Vec::with_capacity(buildings.len());
    let mut states = Vec::with_capacity(buildings.len());
    for (b, bld) in buildings.iter().enumerate() {
        if !bld.model.is_time_invariant() {
            return Err(CoreError::InvalidParameter(format!("building {b}: closed loop needs a time-invariant model")));
        }
        let need = cfg.steps + n2;
        if bld.trace.len() < need {
            return Err(CoreError::TraceTooShort { have: bld.trace.len(), need });
        }
        if bld.c.len() < need {
            return Err(CoreError::Dimension(format!("building {b}: prices cover {} of {need} steps", bld.c.len())));
        }
        if bld.reserve.up.ncols() != bld.model.n_r() {
            return Err(CoreError::Dimension(format!("building {b}: reserve has wrong actuator count")));
        }
        let stacker = crate::thermal::LtiStacker::new(&bld.model, &bld.trace, n2, b)?;
        engines.push(Lv2Engine::new(stacker.block(), &bld.c[..n2])?);
        stackers.push(stacker);
        let mut st = MpcState::unreserved(b, bld.x0.clone(), n2, bld.model.n_r());
        st.symmetric = bld.reserve.symmetric;
        states.push(st);
    }
    let mut log = RhLog::default();
    for step in 0..cfg.steps {
        let mut outputs = Vec::with_capacity(buildings.len());
        for (b, bld) in buildings.iter().enumerate() {
            let st = &mut states[b];
            st.step_of_day = step % spd;
            st.active = match cfg.plan_end {
                Some(end) => end.saturating_sub(step).max(cfg.min_active).clamp(1, n2),
                None => n2,
            };
            (st.r_up, st.r_down) = bld.reserve.window(step, n2);
            let block = stackers[b].block_at(&st.x, &bld.trace, step)?;
            let set = match cfg.signal {
                SignalModel::Pc => crate::uncertainty::build_pc(n2)?,
                SignalModel::Pec { eps, t_steps } => st.pec_set(eps, t_steps)?,
            };
            let out = mpc_step_with(&mut engines[b], st, block, &bld.c[step..step + n2], &set, false).map_err(|e| {
                match e {
                    CoreError::Infeasible(msg) => CoreError::Infeasible(format!("step {step}: {msg}")),
                    e => e,
                }
            })?;
            outputs.push(out);
        }
        let blocks: Vec<&StackedBlock> = stackers.iter().map(|s| s.block()).collect();
        let bias = states.first().map(|s| s.bias).unwrap_or(RealizedBiasState::new(0));
        let range = admissible_range(cfg.signal, &bias);
        let w = feed(&FeedView { step, states: &states, outputs: &outputs, blocks: &blocks, range });
        if !(w >= range.0 - 1e-9 && w <= range.1 + 1e-9) {
            return Err(CoreError::InvalidParameter(format!(
                "step {step}: signal {w} outside admissible range [{}, {}]",
                range.0, range.1
            )));
        }
        for (b, bld) in buildings.iter().enumerate() {
            let st = &mut states[b];
            let m = &bld.model;
            let d = crate::dispatch::dispatch(
                &outputs[b].u_setpoint,
                &m.reserve_actuators,
                &st.r_up.row(0).iter().copied().collect::<Vec<_>>(),
                &st.r_down.row(0).iter().copied().collect::<Vec<_>>(),
                &m.cop,
                w,
                &m.u_min,
                &m.u_max,
            )?;
            let (u, input_violation) = (d.u, d.bound_violation);
            let v = bld.trace.v_at(step);
            let x_next = m.step(0, &st.x, &u, &v);
            let y = (&m.c * &x_next + m.d_at(0) * &u + &m.f * &v)[0];
            let (y_min, y_max) = (bld.trace.y_min[step], bld.trace.y_max[step]);
            let comfort_violation = (y_min - y - cfg.tol).max(y - y_max - cfg.tol).max(0.0);
            log.energy_cost += (0..u.len()).map(|i| bld.c[step] * m.input_kw_per_unit(i) * u[i]).sum::<f64>()
                * m.step_hours();
            log.steps.push(StepLog {
                step,
                building: b,
                u_baseline: outputs[b].u_setpoint.clone(),
                u_applied: u,
                w,
                y,
                y_min,
                y_max,
                occupied: bld.trace.occupied[step],
                max_margin: outputs[b].margins.iter().copied().fold(0.0, f64::max),
                comfort_violation,
                input_violation: if input_violation > cfg.tol { input_violation } else { 0.0 },
            });
            st.x = x_next;
            if let SignalModel::Pec { t_steps, .. } = cfg.signal {
                st.bias.record(w, t_steps);
            }
        }
    }
    log.final_states = states.into_iter().map(|s| s.x).collect();
    Ok(log)
}
