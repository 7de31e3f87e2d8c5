use nalgebra::{DMatrix, DVector};

use crate::error::{CoreError, Result};

/// Discrete-time building model
///
/// ```text
/// x_{t+1} = A x_t + B_t u_t + E v_t + R_t Δu_t
/// y_t     = C x_t + D_t u_t + F v_t
/// ```
///
/// `R_t` is not stored; it is the set of `B_t` columns listed in
/// `reserve_actuators`. Heat fluxes are W/m² of floor area.
#[derive(Debug, Clone, PartialEq)]
pub struct LtvBuildingModel {
    pub a: DMatrix<f64>,
    /// One matrix for a time-invariant model, otherwise one per step.
    pub b: Vec<DMatrix<f64>>,
    pub e: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: Vec<DMatrix<f64>>,
    pub f: DMatrix<f64>,
    pub u_min: DVector<f64>,
    pub u_max: DVector<f64>,
    pub reserve_actuators: Vec<usize>,
    /// +1 for heating, −1 for cooling, per reserve slot.
    pub actuator_sign: Vec<f64>,
    /// Coefficient of performance per reserve slot.
    pub cop: Vec<f64>,
    /// Coefficient of performance per input; 0 for inputs without
    /// electricity use (blinds).
    pub input_cop: Vec<f64>,
    pub floor_area: f64,
    pub step_minutes: u32,
    pub input_names: Vec<String>,
}

impl LtvBuildingModel {
    pub fn n_x(&self) -> usize {
        self.a.nrows()
    }

    pub fn n_u(&self) -> usize {
        self.b[0].ncols()
    }

    pub fn n_v(&self) -> usize {
        self.e.ncols()
    }

    pub fn n_y(&self) -> usize {
        self.c.nrows()
    }

    pub fn n_r(&self) -> usize {
        self.reserve_actuators.len()
    }

    pub fn step_hours(&self) -> f64 {
        self.step_minutes as f64 / 60.0
    }

    pub fn is_time_invariant(&self) -> bool {
        self.b.len() == 1 && self.d.len() == 1
    }

    /// Number of steps covered by the time-varying matrices (`usize::MAX`
    /// when time invariant).
    pub fn valid_steps(&self) -> usize {
        let nb = if self.b.len() == 1 { usize::MAX } else { self.b.len() };
        let nd = if self.d.len() == 1 { usize::MAX } else { self.d.len() };
        nb.min(nd)
    }

    pub fn b_at(&self, t: usize) -> &DMatrix<f64> {
        if self.b.len() == 1 {
            &self.b[0]
        } else {
            &self.b[t]
        }
    }

    pub fn d_at(&self, t: usize) -> &DMatrix<f64> {
        if self.d.len() == 1 {
            &self.d[0]
        } else {
            &self.d[t]
        }
    }

    /// Reserve matrix at step `t`: the reserve actuator columns of `B_t`.
    pub fn r_at(&self, t: usize) -> DMatrix<f64> {
        let b = self.b_at(t);
        DMatrix::from_fn(self.n_x(), self.n_r(), |i, j| b[(i, self.reserve_actuators[j])])
    }

    /// Electric kW per unit of thermal W/m² for reserve slot `j`.
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

    /// Keeps only the given inputs as reserve actuators.
    pub fn with_reserve_actuators(&self, inputs: &[usize]) -> Result<Self> {
        let mut out = self.clone();
        let mut sign = Vec::new();
        let mut cop = Vec::new();
        for &i in inputs {
            let Some(slot) = self.reserve_actuators.iter().position(|&r| r == i) else {
                return Err(CoreError::InvalidParameter(format!("input {i} is not a reserve actuator")));
            };
            sign.push(self.actuator_sign[slot]);
            cop.push(self.cop[slot]);
        }
        out.reserve_actuators = inputs.to_vec();
        out.actuator_sign = sign;
        out.cop = cop;
        out.validate()?;
        Ok(out)
    }

    pub fn validate(&self) -> Result<()> {
        let (n_x, n_u, n_v, n_y) = (self.n_x(), self.n_u(), self.n_v(), self.n_y());
        let dim = |what: &str| Err(CoreError::Dimension(what.to_string()));
        if n_x == 0 || n_u == 0 || n_v == 0 || n_y == 0 {
            return dim("all dimension counts must be positive");
        }
        if self.a.ncols() != n_x {
            return dim("A must be square");
        }
        if self.b.iter().any(|b| b.nrows() != n_x || b.ncols() != n_u) {
            return dim("B_t shape");
        }
        if self.e.nrows() != n_x {
            return dim("E rows");
        }
        if self.c.ncols() != n_x {
            return dim("C columns");
        }
        if self.d.iter().any(|d| d.nrows() != n_y || d.ncols() != n_u) {
            return dim("D_t shape");
        }
        if self.f.nrows() != n_y || self.f.ncols() != n_v {
            return dim("F shape");
        }
        if self.u_min.len() != n_u || self.u_max.len() != n_u {
            return dim("input bounds");
        }
        if self.u_min.iter().zip(self.u_max.iter()).any(|(l, u)| l > u) {
            return Err(CoreError::InvalidParameter("u_min > u_max".into()));
        }
        let n_r = self.n_r();
        if n_r > n_u || self.actuator_sign.len() != n_r || self.cop.len() != n_r {
            return dim("reserve actuator lists");
        }
        let mut seen = vec![false; n_u];
        for &i in &self.reserve_actuators {
            if i >= n_u || seen[i] {
                return Err(CoreError::InvalidParameter("reserve actuator indices must be distinct inputs".into()));
            }
            seen[i] = true;
        }
        if self.cop.iter().any(|&c| !(c > 0.0)) {
            return Err(CoreError::InvalidParameter("COP must be positive".into()));
        }
        if self.input_cop.len() != n_u {
            return dim("input COP list");
        }
        if self.input_cop.iter().any(|&c| !(c >= 0.0 && c.is_finite())) {
            return Err(CoreError::InvalidParameter("input COP must be nonnegative".into()));
        }
        if self.input_names.len() != n_u {
            return dim("input names");
        }
        Ok(())
    }

    /// Equilibrium `x = A x + B_0 u + E v` under constant inputs.
    pub fn steady_state(&self, u: &DVector<f64>, v: &DVector<f64>) -> Result<DVector<f64>> {
        if u.len() != self.n_u() || v.len() != self.n_v() {
            return Err(CoreError::Dimension("steady-state input sizes".into()));
        }
        let n = self.n_x();
        let rhs = &self.b[0] * u + &self.e * v;
        (DMatrix::identity(n, n) - &self.a)
            .lu()
            .solve(&rhs)
            .ok_or_else(|| CoreError::InvalidParameter("model has a unit eigenvalue".into()))
    }

    /// Spectral radius of `A`.
    pub fn spectral_radius(&self) -> f64 {
        self.a
            .clone()
            .complex_eigenvalues()
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    /// Slowest time constant in hours, `−h / ln ρ(A)`.
    pub fn dominant_time_constant_hours(&self) -> f64 {
        -self.step_hours() / self.spectral_radius().ln()
    }

    pub fn step(&self, t: usize, x: &DVector<f64>, u: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        &self.a * x + self.b_at(t) * u + &self.e * v
    }

    pub fn output(&self, t: usize, x: &DVector<f64>, u: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        &self.c * x + self.d_at(t) * u + &self.f * v
    }

    /// Simulates from `x0` and returns the states `x_0 … x_N`.
    pub fn simulate(&self, x0: &DVector<f64>, u: &[DVector<f64>], trace: &DisturbanceTrace) -> Vec<DVector<f64>> {
        let mut xs = Vec::with_capacity(u.len() + 1);
        xs.push(x0.clone());
        for (t, ut) in u.iter().enumerate() {
            let v = trace.v_at(t);
            let next = self.step(t, &xs[t], ut, &v);
            xs.push(next);
        }
        xs
    }
}

/// Heat flux `coeff · v[disturbance] · u[input]` into `node`.
#[derive(Debug, Clone, PartialEq)]
pub struct UvTerm {
    pub input: usize,
    pub disturbance: usize,
    pub node: usize,
    pub coeff: f64,
}

/// Heat flux `coeff · x[state] · u[input]` into `node`.
#[derive(Debug, Clone, PartialEq)]
pub struct XuTerm {
    pub state: usize,
    pub input: usize,
    pub node: usize,
    pub coeff: f64,
}

/// Model with input-disturbance and input-state products. `nominal` holds
/// the linear part; `gamma` maps a constant heat flux per node over one step
/// to the state increment, which is how the products enter the discrete
/// dynamics.
#[derive(Debug, Clone, PartialEq)]
pub struct BilinearBuildingModel {
    pub nominal: LtvBuildingModel,
    pub gamma: DMatrix<f64>,
    pub uv_terms: Vec<UvTerm>,
    pub xu_terms: Vec<XuTerm>,
}

impl BilinearBuildingModel {
    pub fn validate(&self) -> Result<()> {
        let m = &self.nominal;
        m.validate()?;
        let (n_x, n_u, n_v) = (m.n_x(), m.n_u(), m.n_v());
        if self.gamma.nrows() != n_x || self.gamma.ncols() != n_x {
            return Err(CoreError::Dimension("gamma must be n_x × n_x".into()));
        }
        for t in &self.uv_terms {
            if t.input >= n_u || t.disturbance >= n_v || t.node >= n_x {
                return Err(CoreError::Dimension("uv term index out of range".into()));
            }
        }
        for t in &self.xu_terms {
            if t.state >= n_x || t.input >= n_u || t.node >= n_x {
                return Err(CoreError::Dimension("xu term index out of range".into()));
            }
        }
        Ok(())
    }

    /// Linear time-invariant model with `input` held at `value`: its products
    /// with disturbances move into `E`, products with states into `A`, and
    /// the input is pinned to `value`.
    pub fn with_fixed_input(&self, input: usize, value: f64) -> Result<LtvBuildingModel> {
        self.validate()?;
        let mut m = self.nominal.clone();
        if input >= m.n_u() {
            return Err(CoreError::Dimension(format!("input {input} out of range")));
        }
        if m.reserve_actuators.contains(&input) {
            return Err(CoreError::InvalidParameter("cannot fix a reserve actuator".into()));
        }
        for t in self.uv_terms.iter().filter(|t| t.input == input) {
            let col = m.e.column(t.disturbance) + self.gamma.column(t.node) * (t.coeff * value);
            m.e.set_column(t.disturbance, &col);
        }
        for t in self.xu_terms.iter().filter(|t| t.input == input) {
            let col = m.a.column(t.state) + self.gamma.column(t.node) * (t.coeff * value);
            m.a.set_column(t.state, &col);
        }
        for b in &mut m.b {
            b.column_mut(input).fill(0.0);
        }
        m.u_min[input] = value;
        m.u_max[input] = value;
        m.validate()?;
        Ok(m)
    }

    /// True plant step including the bilinear products.
    pub fn step(&self, t: usize, x: &DVector<f64>, u: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        let mut next = self.nominal.step(t, x, u, v);
        for term in &self.uv_terms {
            let flux = term.coeff * v[term.disturbance] * u[term.input];
            next += self.gamma.column(term.node) * flux;
        }
        for term in &self.xu_terms {
            let flux = term.coeff * x[term.state] * u[term.input];
            next += self.gamma.column(term.node) * flux;
        }
        next
    }
}

/// Predicted disturbances and comfort bounds per step.
#[derive(Debug, Clone, PartialEq)]
pub struct DisturbanceTrace {
    /// Minutes since the trace origin, per step.
    pub timestamp_min: Vec<f64>,
    pub ambient: Vec<f64>,
    pub solar: Vec<f64>,
    pub gains: Vec<f64>,
    pub occupied: Vec<bool>,
    pub y_min: Vec<f64>,
    pub y_max: Vec<f64>,
}

impl DisturbanceTrace {
    pub fn len(&self) -> usize {
        self.ambient.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ambient.is_empty()
    }

    pub fn v_at(&self, t: usize) -> DVector<f64> {
        DVector::from_vec(vec![self.ambient[t], self.solar[t], self.gains[t]])
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.len();
        let lens = [
            self.timestamp_min.len(),
            self.solar.len(),
            self.gains.len(),
            self.occupied.len(),
            self.y_min.len(),
            self.y_max.len(),
        ];
        if lens.iter().any(|&l| l != n) {
            return Err(CoreError::Dimension("trace columns differ in length".into()));
        }
        if self.y_min.iter().zip(&self.y_max).any(|(l, u)| l >= u) {
            return Err(CoreError::InvalidParameter("y_min must be below y_max".into()));
        }
        Ok(())
    }

    /// Steps `start..start+len`.
    pub fn slice(&self, start: usize, len: usize) -> Result<DisturbanceTrace> {
        if start + len > self.len() {
            return Err(CoreError::TraceTooShort { have: self.len(), need: start + len });
        }
        let r = start..start + len;
        Ok(DisturbanceTrace {
            timestamp_min: self.timestamp_min[r.clone()].to_vec(),
            ambient: self.ambient[r.clone()].to_vec(),
            solar: self.solar[r.clone()].to_vec(),
            gains: self.gains[r.clone()].to_vec(),
            occupied: self.occupied[r.clone()].to_vec(),
            y_min: self.y_min[r.clone()].to_vec(),
            y_max: self.y_max[r].to_vec(),
        })
    }

    pub fn read_csv<R: std::io::Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let mut tr = DisturbanceTrace {
            timestamp_min: vec![],
            ambient: vec![],
            solar: vec![],
            gains: vec![],
            occupied: vec![],
            y_min: vec![],
            y_max: vec![],
        };
        for rec in rdr.deserialize() {
            let (ts, amb, sol, g, occ, lo, hi): (f64, f64, f64, f64, u8, f64, f64) = rec?;
            tr.timestamp_min.push(ts);
            tr.ambient.push(amb);
            tr.solar.push(sol);
            tr.gains.push(g);
            tr.occupied.push(occ != 0);
            tr.y_min.push(lo);
            tr.y_max.push(hi);
        }
        tr.validate()?;
        Ok(tr)
    }

    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["timestamp", "ambient", "solar", "gains", "occupied", "y_min", "y_max"])?;
        for t in 0..self.len() {
            w.write_record(&[
                self.timestamp_min[t].to_string(),
                self.ambient[t].to_string(),
                self.solar[t].to_string(),
                self.gains[t].to_string(),
                u8::from(self.occupied[t]).to_string(),
                self.y_min[t].to_string(),
                self.y_max[t].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}
