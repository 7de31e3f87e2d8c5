use nalgebra::{DMatrix, DVector};

use super::model::{DisturbanceTrace, LtvBuildingModel};
use crate::error::{CoreError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RowKind {
    OutputUpper,
    InputUpper,
    OutputLower,
    InputLower,
}

impl RowKind {
    pub fn is_output(self) -> bool {
        matches!(self, RowKind::OutputUpper | RowKind::OutputLower)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RowKind::OutputUpper => "output-upper",
            RowKind::InputUpper => "input-upper",
            RowKind::OutputLower => "output-lower",
            RowKind::InputLower => "input-lower",
        }
    }
}

/// Origin of a stacked row: which bound, building, step and output/input index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RowTag {
    pub kind: RowKind,
    pub building: usize,
    pub step: usize,
    pub index: usize,
}

/// Horizon constraints `G u + S Δu ≤ Q` of one building.
///
/// Inputs are ordered step-major (`u[k·n_u + i]`), reserve deviations the
/// same way (`Δu[k·n_r + j]`). Rows come in four groups of the form
/// `[G_p; I; −G_p; −I]`. Output row `k` bounds `y_{k+1}`, the temperature
/// reached after applying `u_k`, against the comfort band of step `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct StackedBlock {
    pub building: usize,
    pub horizon: usize,
    pub n_u: usize,
    pub n_r: usize,
    pub n_y: usize,
    pub g: DMatrix<f64>,
    pub s: DMatrix<f64>,
    pub q: DVector<f64>,
    pub tags: Vec<RowTag>,
    /// Free response of the outputs to the initial state, `y = Φ x0 + …`.
    pub phi: DMatrix<f64>,
    pub x0: DVector<f64>,
    pub u_min: DVector<f64>,
    pub u_max: DVector<f64>,
    pub reserve_inputs: Vec<usize>,
    pub actuator_sign: Vec<f64>,
    pub cop: Vec<f64>,
    pub input_cop: Vec<f64>,
    pub floor_area: f64,
    pub step_hours: f64,
}

impl StackedBlock {
    pub fn rows(&self) -> usize {
        self.q.len()
    }

    pub fn output_rows(&self) -> usize {
        self.horizon * self.n_y
    }

    pub fn input_rows(&self) -> usize {
        self.horizon * self.n_u
    }

    /// Row index of the upper output bound on output `i` at step `k`.
    pub fn output_upper_row(&self, k: usize, i: usize) -> usize {
        k * self.n_y + i
    }

    pub fn output_lower_row(&self, k: usize, i: usize) -> usize {
        self.output_rows() + self.input_rows() + k * self.n_y + i
    }

    /// Reserve slot of input `i`, if any.
    pub fn reserve_slot(&self, input: usize) -> Option<usize> {
        self.reserve_inputs.iter().position(|&r| r == input)
    }

    /// Same block with a different initial state; only `Q` changes.
    pub fn with_initial_state(&self, x0: &DVector<f64>) -> StackedBlock {
        let mut out = self.clone();
        let dy = &self.phi * (x0 - &self.x0);
        let (ny, nu) = (self.output_rows(), self.input_rows());
        for r in 0..ny {
            out.q[r] -= dy[r];
            out.q[ny + nu + r] += dy[r];
        }
        out.x0 = x0.clone();
        out
    }

    /// `Q − G u − S Δu`; nonnegative entries mean satisfied rows.
    pub fn slack(&self, u: &DVector<f64>, du: &DVector<f64>) -> DVector<f64> {
        &self.q - &self.g * u - &self.s * du
    }

    /// Electric kW per unit thermal W/m² of reserve slot `j`.
    pub fn electric_kw_per_unit(&self, j: usize) -> f64 {
        self.floor_area / (self.cop[j] * 1000.0)
    }

    /// Electric kW per unit of input `i` (0 for non-electric inputs).
    pub fn input_kw_per_unit(&self, i: usize) -> f64 {
        if self.input_cop[i] > 0.0 {
            self.floor_area / (self.input_cop[i] * 1000.0)
        } else {
            0.0
        }
    }
}

/// Horizon constraints of an aggregation: block diagonal in buildings.
#[derive(Debug, Clone, PartialEq)]
pub struct StackedSystem {
    pub horizon: usize,
    pub blocks: Vec<StackedBlock>,
}

impl StackedSystem {
    pub fn building_count(&self) -> usize {
        self.blocks.len()
    }

    pub fn rows(&self) -> usize {
        self.blocks.iter().map(StackedBlock::rows).sum()
    }

    pub fn dim_u(&self) -> usize {
        self.blocks.iter().map(|b| b.horizon * b.n_u).sum()
    }

    pub fn dim_du(&self) -> usize {
        self.blocks.iter().map(|b| b.horizon * b.n_r).sum()
    }

    /// Offsets of each block in the row, `u` and `Δu` index spaces.
    pub fn offsets(&self) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::with_capacity(self.blocks.len());
        let (mut r, mut u, mut d) = (0, 0, 0);
        for b in &self.blocks {
            out.push((r, u, d));
            r += b.rows();
            u += b.horizon * b.n_u;
            d += b.horizon * b.n_r;
        }
        out
    }

    pub fn tags(&self) -> Vec<RowTag> {
        self.blocks.iter().flat_map(|b| b.tags.iter().copied()).collect()
    }

    pub fn dense_g(&self) -> DMatrix<f64> {
        let mut g = DMatrix::zeros(self.rows(), self.dim_u());
        for (b, (r, u, _)) in self.blocks.iter().zip(self.offsets()) {
            g.view_mut((r, u), b.g.shape()).copy_from(&b.g);
        }
        g
    }

    pub fn dense_s(&self) -> DMatrix<f64> {
        let mut s = DMatrix::zeros(self.rows(), self.dim_du());
        for (b, (r, _, d)) in self.blocks.iter().zip(self.offsets()) {
            s.view_mut((r, d), b.s.shape()).copy_from(&b.s);
        }
        s
    }

    pub fn q(&self) -> DVector<f64> {
        DVector::from_iterator(self.rows(), self.blocks.iter().flat_map(|b| b.q.iter().copied()))
    }

    /// `Q − G u − S Δu` over all buildings.
    pub fn slack(&self, u: &DVector<f64>, du: &DVector<f64>) -> DVector<f64> {
        let mut out = Vec::with_capacity(self.rows());
        for (b, (_, uo, d)) in self.blocks.iter().zip(self.offsets()) {
            let ub = u.rows(uo, b.horizon * b.n_u).into_owned();
            let db = du.rows(d, b.horizon * b.n_r).into_owned();
            out.extend(b.slack(&ub, &db).iter().copied());
        }
        DVector::from_vec(out)
    }
}

/// Stacks the dynamics of one building over `horizon` steps.
pub fn stack_building(
    model: &LtvBuildingModel,
    x0: &DVector<f64>,
    trace: &DisturbanceTrace,
    horizon: usize,
) -> Result<StackedBlock> {
    stack_building_id(model, x0, trace, horizon, 0)
}

/// [`stack_building`] with an explicit building id in the row tags.
pub fn stack_building_id(
    model: &LtvBuildingModel,
    x0: &DVector<f64>,
    trace: &DisturbanceTrace,
    horizon: usize,
    building: usize,
) -> Result<StackedBlock> {
    model.validate()?;
    let (n_x, n_u, n_y, n_r) = (model.n_x(), model.n_u(), model.n_y(), model.n_r());
    if horizon == 0 {
        return Err(CoreError::InvalidParameter("horizon must be positive".into()));
    }
    if x0.len() != n_x {
        return Err(CoreError::Dimension(format!("x0 has {} entries, model has {n_x} states", x0.len())));
    }
    if trace.len() < horizon {
        return Err(CoreError::TraceTooShort { have: trace.len(), need: horizon });
    }
    if model.valid_steps() < horizon {
        return Err(CoreError::Dimension(format!(
            "model covers {} steps, horizon is {horizon}",
            model.valid_steps()
        )));
    }
    if model.n_v() != 3 {
        return Err(CoreError::Dimension("disturbance vector must be (ambient, solar, gains)".into()));
    }
    let n = horizon;
    let (ny_rows, nu_rows) = (n * n_y, n * n_u);
    let m = 2 * (ny_rows + nu_rows);

    // powers C A^p for p = 0..=N
    let mut cap = Vec::with_capacity(n + 1);
    cap.push(model.c.clone());
    for p in 1..=n {
        let next = &cap[p - 1] * &model.a;
        cap.push(next);
    }

    let mut gp = DMatrix::zeros(ny_rows, n * n_u);
    let mut sp = DMatrix::zeros(ny_rows, n * n_r);
    let mut qp = DVector::zeros(ny_rows);
    let mut phi = DMatrix::zeros(ny_rows, n_x);
    let vs: Vec<DVector<f64>> = (0..n).map(|t| trace.v_at(t)).collect();
    for k in 0..n {
        let rows = k * n_y..(k + 1) * n_y;
        let free = &cap[k + 1];
        phi.view_mut((rows.start, 0), (n_y, n_x)).copy_from(free);
        let mut qk = free * x0 + &model.f * &vs[k];
        for i in 0..=k {
            let ca = &cap[k - i];
            let mut gb = ca * model.b_at(i);
            if i == k {
                gb += model.d_at(k);
            }
            gp.view_mut((rows.start, i * n_u), (n_y, n_u)).copy_from(&gb);
            let rb = ca * model.r_at(i);
            sp.view_mut((rows.start, i * n_r), (n_y, n_r)).copy_from(&rb);
            qk += ca * &model.e * &vs[i];
        }
        qp.rows_mut(rows.start, n_y).copy_from(&qk);
    }

    let mut g = DMatrix::zeros(m, n * n_u);
    let mut s = DMatrix::zeros(m, n * n_r);
    let mut q = DVector::zeros(m);
    let mut tags = Vec::with_capacity(m);
    let lo = ny_rows + nu_rows;
    g.view_mut((0, 0), (ny_rows, n * n_u)).copy_from(&gp);
    g.view_mut((lo, 0), (ny_rows, n * n_u)).copy_from(&(-&gp));
    s.view_mut((0, 0), (ny_rows, n * n_r)).copy_from(&sp);
    s.view_mut((lo, 0), (ny_rows, n * n_r)).copy_from(&(-&sp));
    for k in 0..n {
        for i in 0..n_y {
            let r = k * n_y + i;
            q[r] = trace.y_max[k] - qp[r];
            q[lo + r] = qp[r] - trace.y_min[k];
        }
        for i in 0..n_u {
            let r = ny_rows + k * n_u + i;
            g[(r, k * n_u + i)] = 1.0;
            g[(lo + r, k * n_u + i)] = -1.0;
            q[r] = model.u_max[i];
            q[lo + r] = -model.u_min[i];
            if let Some(j) = model.reserve_actuators.iter().position(|&a| a == i) {
                s[(r, k * n_r + j)] = 1.0;
                s[(lo + r, k * n_r + j)] = -1.0;
            }
        }
    }
    for kind in [RowKind::OutputUpper, RowKind::InputUpper, RowKind::OutputLower, RowKind::InputLower] {
        let per = if kind.is_output() { n_y } else { n_u };
        for k in 0..n {
            for index in 0..per {
                tags.push(RowTag { kind, building, step: k, index });
            }
        }
    }

    Ok(StackedBlock {
        building,
        horizon: n,
        n_u,
        n_r,
        n_y,
        g,
        s,
        q,
        tags,
        phi,
        x0: x0.clone(),
        u_min: model.u_min.clone(),
        u_max: model.u_max.clone(),
        reserve_inputs: model.reserve_actuators.clone(),
        actuator_sign: model.actuator_sign.clone(),
        cop: model.cop.clone(),
        input_cop: model.input_cop.clone(),
        floor_area: model.floor_area,
        step_hours: model.step_hours(),
    })
}

/// Block-diagonal aggregation. Building ids are kept as they are unless
/// two blocks collide, in which case blocks are renumbered by position.
pub fn stack_aggregation(systems: &[StackedSystem]) -> Result<StackedSystem> {
    let Some(first) = systems.first() else {
        return Err(CoreError::InvalidParameter("no systems to aggregate".into()));
    };
    let horizon = first.horizon;
    let mut blocks = Vec::new();
    for s in systems {
        if s.horizon != horizon {
            return Err(CoreError::HorizonMismatch(horizon, s.horizon));
        }
        blocks.extend(s.blocks.iter().cloned());
    }
    let mut ids: Vec<usize> = blocks.iter().map(|b| b.building).collect();
    ids.sort_unstable();
    ids.dedup();
    if ids.len() != blocks.len() {
        for (i, b) in blocks.iter_mut().enumerate() {
            b.building = i;
            for t in &mut b.tags {
                t.building = i;
            }
        }
    }
    Ok(StackedSystem { horizon, blocks })
}

impl From<StackedBlock> for StackedSystem {
    fn from(b: StackedBlock) -> Self {
        StackedSystem { horizon: b.horizon, blocks: vec![b] }
    }
}

/// Stacked block of a time-invariant model, built once; moving the horizon
/// only refreshes `q` and `x0`.
#[derive(Debug, Clone)]
pub struct LtiStacker {
    block: StackedBlock,
    /// Output response to the step-major disturbance stack.
    psi: DMatrix<f64>,
}

impl LtiStacker {
    pub fn new(model: &LtvBuildingModel, trace: &DisturbanceTrace, horizon: usize, building: usize) -> Result<Self> {
        if !model.is_time_invariant() {
            return Err(CoreError::InvalidParameter("cached stacking needs a time-invariant model".into()));
        }
        let x0 = DVector::zeros(model.n_x());
        let block = stack_building_id(model, &x0, trace, horizon, building)?;
        let (n_y, n_v) = (model.n_y(), model.n_v());
        let mut psi = DMatrix::zeros(horizon * n_y, horizon * n_v);
        let mut ca = model.c.clone();
        for lag in 0..horizon {
            let blk = &ca * &model.e;
            for i in 0..horizon - lag {
                let k = i + lag;
                let mut v = blk.clone();
                if lag == 0 {
                    v += &model.f;
                }
                psi.view_mut((k * n_y, i * n_v), (n_y, n_v)).copy_from(&v);
            }
            ca = &ca * &model.a;
        }
        Ok(LtiStacker { block, psi })
    }

    pub fn block(&self) -> &StackedBlock {
        &self.block
    }

    /// Block for state `x0` over `trace[start..start + horizon]`.
    pub fn block_at(&mut self, x0: &DVector<f64>, trace: &DisturbanceTrace, start: usize) -> Result<&StackedBlock> {
        let b = &mut self.block;
        let n = b.horizon;
        if trace.len() < start + n {
            return Err(CoreError::TraceTooShort { have: trace.len(), need: start + n });
        }
        if x0.len() != b.phi.ncols() {
            return Err(CoreError::Dimension(format!("x0 has {} entries, model has {} states", x0.len(), b.phi.ncols())));
        }
        let mut v = DVector::zeros(self.psi.ncols());
        let n_v = v.len() / n;
        for t in 0..n {
            v.rows_mut(t * n_v, n_v).copy_from(&trace.v_at(start + t));
        }
        let qp = &b.phi * x0 + &self.psi * v;
        let (ny_rows, lo) = (b.output_rows(), b.output_rows() + b.input_rows());
        for r in 0..ny_rows {
            let k = start + r / b.n_y;
            b.q[r] = trace.y_max[k] - qp[r];
            b.q[lo + r] = qp[r] - trace.y_min[k];
        }
        b.x0.copy_from(x0);
        Ok(&self.block)
    }
}
