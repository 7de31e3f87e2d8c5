//! Bounded revised simplex with an explicit basis inverse.
//!
//! Rows are `a_i x + s_i = b_i` with slack `s_i ∈ [0, ∞)` for inequalities
//! and `s_i = 0` for equalities. A cold start uses the all-slack basis, puts
//! every structural at the bound its cost prefers (temporary bounds stand in
//! for missing ones) and runs the dual simplex. Primal cleanup handles the
//! remaining dual infeasibilities once the temporary bounds are released.

use crate::error::LpError;
use crate::problem::{Constraint, LinearProgram};
use crate::solution::{FarkasCertificate, LpSolution, LpStatus};

const NONE: usize = usize::MAX;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub primal_tol: f64,
    pub dual_tol: f64,
    pub pivot_tol: f64,
    /// 0 picks a limit from the problem size.
    pub max_iterations: usize,
    /// 0 picks an interval from the row count.
    pub refactor_interval: usize,
    /// Consecutive degenerate pivots before switching to Bland's rule.
    pub degeneracy_limit: usize,
    pub artificial_bound: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            primal_tol: 1e-9,
            dual_tol: 1e-9,
            pivot_tol: 1e-9,
            max_iterations: 0,
            refactor_interval: 0,
            degeneracy_limit: 50,
            artificial_bound: 1e6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum VarState {
    Basic,
    Lower,
    Upper,
    /// Nonbasic away from any bound (free or superbasic).
    Free,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum RowRef {
    Ineq(usize),
    Eq(usize),
}

/// Counters for the last call to [`Simplex::solve`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SolveStats {
    pub iterations: usize,
    pub dual_iterations: usize,
    pub primal_iterations: usize,
    pub refactorizations: usize,
}

/// Simplex engine that keeps its basis between solves, so rows can be added
/// and right-hand sides changed with a dual-simplex warm start.
#[derive(Debug, Clone)]
pub struct Simplex {
    lp: LinearProgram,
    opts: SolveOptions,
    n: usize,
    m: usize,
    rows: Vec<Vec<(usize, f64)>>,
    cols: Vec<Vec<(usize, f64)>>,
    row_ref: Vec<RowRef>,
    rhs: Vec<f64>,
    cost: Vec<f64>,
    lo: Vec<f64>,
    up: Vec<f64>,
    artificial: Vec<bool>,
    state: Vec<VarState>,
    x: Vec<f64>,
    d: Vec<f64>,
    basis: Vec<usize>,
    pos: Vec<usize>,
    /// Column-major: column `i` holds `B⁻¹ e_i`.
    binv: Vec<f64>,
    updates: usize,
    warm: bool,
    status: Option<LpStatus>,
    farkas: Option<Vec<f64>>,
    farkas_sign: f64,
    ray: Option<Vec<f64>>,
    bland: bool,
    degenerate_run: usize,
    stats: SolveStats,
    total_iterations: usize,
}

impl Simplex {
    pub fn new(lp: LinearProgram) -> Result<Self, LpError> {
        Self::with_options(lp, SolveOptions::default())
    }

    pub fn with_options(lp: LinearProgram, opts: SolveOptions) -> Result<Self, LpError> {
        lp.validate()?;
        let n = lp.num_vars();
        let mut s = Simplex {
            opts,
            n,
            m: 0,
            rows: Vec::new(),
            cols: vec![Vec::new(); n],
            row_ref: Vec::new(),
            rhs: Vec::new(),
            cost: lp.cost.clone(),
            lo: lp.lower.clone(),
            up: lp.upper.clone(),
            artificial: vec![false; n],
            state: vec![VarState::Lower; n],
            x: vec![0.0; n],
            d: vec![0.0; n],
            basis: Vec::new(),
            pos: vec![NONE; n],
            binv: Vec::new(),
            updates: 0,
            warm: false,
            status: None,
            farkas: None,
            farkas_sign: 1.0,
            ray: None,
            bland: false,
            degenerate_run: 0,
            stats: SolveStats::default(),
            total_iterations: 0,
            lp,
        };
        for i in 0..s.lp.ineq.len() {
            let c = s.lp.ineq[i].normalized();
            let b = s.lp.ineq[i].rhs;
            s.append_row(c, b, RowRef::Ineq(i));
        }
        for i in 0..s.lp.eq.len() {
            let c = s.lp.eq[i].normalized();
            let b = s.lp.eq[i].rhs;
            s.append_row(c, b, RowRef::Eq(i));
        }
        Ok(s)
    }

    fn append_row(&mut self, coeffs: Vec<(usize, f64)>, rhs: f64, r: RowRef) {
        let i = self.m;
        for &(j, a) in &coeffs {
            self.cols[j].push((i, a));
        }
        self.rows.push(coeffs);
        self.rhs.push(rhs);
        self.row_ref.push(r);
        let (l, u) = match r {
            RowRef::Ineq(_) => (0.0, f64::INFINITY),
            RowRef::Eq(_) => (0.0, 0.0),
        };
        self.lo.push(l);
        self.up.push(u);
        self.artificial.push(false);
        self.cost.push(0.0);
        self.state.push(VarState::Basic);
        self.x.push(0.0);
        self.d.push(0.0);
        self.pos.push(NONE);
        self.m += 1;
    }

    pub fn problem(&self) -> &LinearProgram {
        &self.lp
    }

    pub fn stats(&self) -> SolveStats {
        self.stats
    }

    /// Iterations over the lifetime of this engine, across warm starts.
    pub fn total_iterations(&self) -> usize {
        self.total_iterations
    }

    pub fn num_rows(&self) -> usize {
        self.m
    }

    fn max_iterations(&self) -> usize {
        if self.opts.max_iterations > 0 {
            self.opts.max_iterations
        } else {
            50 * (self.n + self.m) + 10_000
        }
    }

    fn refactor_interval(&self) -> usize {
        if self.opts.refactor_interval > 0 {
            self.opts.refactor_interval
        } else {
            (self.m / 3).clamp(60, 400)
        }
    }

    // ---- linear algebra -------------------------------------------------

    #[inline]
    fn binv_col(&self, i: usize) -> &[f64] {
        &self.binv[i * self.m..(i + 1) * self.m]
    }

    /// `B⁻¹ a_j`.
    fn ftran(&self, j: usize) -> Vec<f64> {
        let m = self.m;
        let mut out = vec![0.0; m];
        if j >= self.n {
            out.copy_from_slice(self.binv_col(j - self.n));
            return out;
        }
        for &(i, a) in &self.cols[j] {
            let col = self.binv_col(i);
            for k in 0..m {
                out[k] += a * col[k];
            }
        }
        out
    }

    /// Row `p` of `B⁻¹`.
    fn binv_row(&self, p: usize) -> Vec<f64> {
        (0..self.m).map(|i| self.binv[i * self.m + p]).collect()
    }

    /// `ρᵀ a_j` for every variable, given a row vector `ρ`.
    fn row_times_a(&self, rho: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n + self.m];
        for (i, &r) in rho.iter().enumerate() {
            if r == 0.0 {
                continue;
            }
            for &(j, a) in &self.rows[i] {
                out[j] += r * a;
            }
            out[self.n + i] = r;
        }
        out
    }

    /// `y = c_Bᵀ B⁻¹`.
    fn duals(&self) -> Vec<f64> {
        let cb: Vec<f64> = self.basis.iter().map(|&v| self.cost[v]).collect();
        (0..self.m)
            .map(|i| self.binv_col(i).iter().zip(&cb).map(|(a, b)| a * b).sum())
            .collect()
    }

    fn compute_reduced_costs(&mut self) {
        let y = self.duals();
        let ya = self.row_times_a(&y);
        for j in 0..self.n + self.m {
            self.d[j] = if self.state[j] == VarState::Basic { 0.0 } else { self.cost[j] - ya[j] };
        }
    }

    fn compute_xb(&mut self) {
        let m = self.m;
        let mut r = self.rhs.clone();
        for j in 0..self.n {
            if self.state[j] != VarState::Basic && self.x[j] != 0.0 {
                for &(i, a) in &self.cols[j] {
                    r[i] -= a * self.x[j];
                }
            }
        }
        for i in 0..m {
            let j = self.n + i;
            if self.state[j] != VarState::Basic {
                r[i] -= self.x[j];
            }
        }
        let mut xb = vec![0.0; m];
        for (i, &ri) in r.iter().enumerate() {
            if ri == 0.0 {
                continue;
            }
            let col = self.binv_col(i);
            for k in 0..m {
                xb[k] += ri * col[k];
            }
        }
        for (k, &v) in self.basis.iter().enumerate() {
            self.x[v] = xb[k];
        }
    }

    /// Replaces basis position `p` by the variable whose `B⁻¹`-column is `alpha`.
    fn eta_update(&mut self, p: usize, alpha: &[f64]) {
        let m = self.m;
        let piv = alpha[p];
        for i in 0..m {
            let col = &mut self.binv[i * m..(i + 1) * m];
            let f = col[p];
            if f == 0.0 {
                continue;
            }
            let fp = f / piv;
            for k in 0..m {
                col[k] -= alpha[k] * fp;
            }
            col[p] = fp;
        }
        self.updates += 1;
    }

    /// Rebuilds `B⁻¹` from scratch. Structurally singular bases are repaired
    /// by swapping in slacks.
    fn refactor(&mut self) {
        self.stats.refactorizations += 1;
        loop {
            match self.try_invert() {
                Ok(binv) => {
                    self.binv = binv;
                    self.updates = 0;
                    return;
                }
                Err((bad_positions, free_rows)) => {
                    for (&p, &r) in bad_positions.iter().zip(&free_rows) {
                        let v = self.basis[p];
                        self.make_nonbasic_near(v);
                        let s = self.n + r;
                        self.basis[p] = s;
                        self.pos[s] = p;
                        self.state[s] = VarState::Basic;
                    }
                    self.warm = false;
                }
            }
        }
    }

    fn make_nonbasic_near(&mut self, v: usize) {
        self.pos[v] = NONE;
        let (l, u, xv) = (self.lo[v], self.up[v], self.x[v]);
        self.state[v] = if l.is_finite() && (!u.is_finite() || (xv - l).abs() <= (u - xv).abs()) {
            self.x[v] = l;
            VarState::Lower
        } else if u.is_finite() {
            self.x[v] = u;
            VarState::Upper
        } else {
            self.x[v] = 0.0;
            VarState::Free
        };
    }

    /// Inverts the basis by Gauss-Jordan elimination after peeling off the
    /// slack columns, which are unit vectors.
    #[allow(clippy::type_complexity)]
    fn try_invert(&self) -> Result<Vec<f64>, (Vec<usize>, Vec<usize>)> {
        let m = self.m;
        let n = self.n;
        let mut slack_row_used = vec![false; m];
        let mut struct_pos = Vec::new();
        for (p, &v) in self.basis.iter().enumerate() {
            if v >= n {
                slack_row_used[v - n] = true;
            } else {
                struct_pos.push(p);
            }
        }
        // rows not covered by a basic slack
        let krows: Vec<usize> = (0..m).filter(|&i| !slack_row_used[i]).collect();
        let k = krows.len();
        debug_assert_eq!(k, struct_pos.len());
        let mut kidx = vec![NONE; m];
        for (a, &i) in krows.iter().enumerate() {
            kidx[i] = a;
        }
        // dense K×K block, row-major, and its inverse
        let mut w = vec![0.0; k * k];
        for (c, &p) in struct_pos.iter().enumerate() {
            for &(i, a) in &self.cols[self.basis[p]] {
                if kidx[i] != NONE {
                    w[kidx[i] * k + c] = a;
                }
            }
        }
        let mut inv = vec![0.0; k * k];
        for a in 0..k {
            inv[a * k + a] = 1.0;
        }
        let mut pivot_row = vec![NONE; k];
        let mut row_used = vec![false; k];
        let mut bad = Vec::new();
        for c in 0..k {
            let mut best = 0.0;
            let mut r = NONE;
            for a in 0..k {
                if !row_used[a] {
                    let v = w[a * k + c].abs();
                    if v > best {
                        best = v;
                        r = a;
                    }
                }
            }
            if r == NONE || best < 1e-11 {
                bad.push(c);
                continue;
            }
            row_used[r] = true;
            pivot_row[c] = r;
            let piv = 1.0 / w[r * k + c];
            for t in 0..k {
                w[r * k + t] *= piv;
                inv[r * k + t] *= piv;
            }
            let (wr, ir) = (w[r * k..(r + 1) * k].to_vec(), inv[r * k..(r + 1) * k].to_vec());
            for a in 0..k {
                if a == r {
                    continue;
                }
                let f = w[a * k + c];
                if f == 0.0 {
                    continue;
                }
                let wa = &mut w[a * k..(a + 1) * k];
                for t in c..k {
                    wa[t] -= f * wr[t];
                }
                let ia = &mut inv[a * k..(a + 1) * k];
                for t in 0..k {
                    ia[t] -= f * ir[t];
                }
            }
        }
        if !bad.is_empty() {
            let free_rows: Vec<usize> =
                (0..k).filter(|&a| !row_used[a]).map(|a| krows[a]).collect();
            let positions = bad.iter().map(|&c| struct_pos[c]).collect();
            return Err((positions, free_rows));
        }
        // X = (B_xK)⁻¹ as rows per structural position: X[c] = inv[pivot_row[c]]
        let mut binv = vec![0.0; m * m];
        // z_x = X b_K ; z_s = b_S − B_xS z_x
        // Column i of B⁻¹ is the solution for b = e_i.
        let mut slack_pos_of_row = vec![NONE; m];
        for (p, &v) in self.basis.iter().enumerate() {
            if v >= n {
                slack_pos_of_row[v - n] = p;
            }
        }
        // columns for i in K rows
        let mut zx = vec![0.0; k];
        for (a, &i) in krows.iter().enumerate() {
            for c in 0..k {
                zx[c] = inv[pivot_row[c] * k + a];
            }
            self.fill_binv_col(&mut binv, i, &zx, &struct_pos, &slack_pos_of_row, &kidx);
        }
        // columns for slack rows: z_x = 0, z_s = e_i
        for i in 0..m {
            if slack_row_used[i] {
                binv[i * m + slack_pos_of_row[i]] = 1.0;
            }
        }
        Ok(binv)
    }

    fn fill_binv_col(
        &self,
        binv: &mut [f64],
        i: usize,
        zx: &[f64],
        struct_pos: &[usize],
        slack_pos_of_row: &[usize],
        kidx: &[usize],
    ) {
        let m = self.m;
        let col = &mut binv[i * m..(i + 1) * m];
        for (c, &p) in struct_pos.iter().enumerate() {
            let z = zx[c];
            col[p] = z;
            if z == 0.0 {
                continue;
            }
            for &(r, a) in &self.cols[self.basis[p]] {
                if kidx[r] == NONE {
                    col[slack_pos_of_row[r]] -= a * z;
                }
            }
        }
    }

    // ---- setup ----------------------------------------------------------

    fn cold_start(&mut self) {
        let n = self.n;
        let m = self.m;
        let big = self.opts.artificial_bound;
        for j in 0..n {
            self.lo[j] = self.lp.lower[j];
            self.up[j] = self.lp.upper[j];
            self.artificial[j] = false;
            self.pos[j] = NONE;
            let c = self.cost[j];
            let (l, u) = (self.lo[j], self.up[j]);
            let (st, v) = match (l.is_finite(), u.is_finite()) {
                (true, true) => {
                    if c >= 0.0 {
                        (VarState::Lower, l)
                    } else {
                        (VarState::Upper, u)
                    }
                }
                (true, false) => {
                    if c >= 0.0 {
                        (VarState::Lower, l)
                    } else {
                        self.up[j] = l.max(0.0) + big;
                        self.artificial[j] = true;
                        (VarState::Upper, self.up[j])
                    }
                }
                (false, true) => {
                    if c <= 0.0 {
                        (VarState::Upper, u)
                    } else {
                        self.lo[j] = u.min(0.0) - big;
                        self.artificial[j] = true;
                        (VarState::Lower, self.lo[j])
                    }
                }
                (false, false) => {
                    if c == 0.0 {
                        (VarState::Free, 0.0)
                    } else if c > 0.0 {
                        self.lo[j] = -big;
                        self.artificial[j] = true;
                        (VarState::Lower, -big)
                    } else {
                        self.up[j] = big;
                        self.artificial[j] = true;
                        (VarState::Upper, big)
                    }
                }
            };
            self.state[j] = st;
            self.x[j] = v;
        }
        self.basis = (0..m).map(|i| n + i).collect();
        for i in 0..m {
            self.state[n + i] = VarState::Basic;
            self.pos[n + i] = i;
            self.artificial[n + i] = false;
        }
        self.binv = vec![0.0; m * m];
        for i in 0..m {
            self.binv[i * m + i] = 1.0;
        }
        self.updates = 0;
        self.compute_xb();
        self.compute_reduced_costs();
        self.warm = true;
    }

    fn release_artificial(&mut self) -> bool {
        let mut any = false;
        for j in 0..self.n {
            if self.artificial[j] {
                any = true;
                self.artificial[j] = false;
                self.lo[j] = self.lp.lower[j];
                self.up[j] = self.lp.upper[j];
                if self.state[j] == VarState::Upper && !self.up[j].is_finite()
                    || self.state[j] == VarState::Lower && !self.lo[j].is_finite()
                {
                    self.state[j] = VarState::Free;
                }
            }
        }
        any
    }

    // ---- public warm-start interface ----------------------------------

    /// Appends `≤` rows. The current basis stays valid with the new slacks
    /// basic, so the next solve continues from it.
    pub fn add_rows(&mut self, rows: Vec<Constraint>) -> Result<Vec<usize>, LpError> {
        let n = self.n;
        for c in &rows {
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
        let old_m = self.m;
        let mut ids = Vec::with_capacity(rows.len());
        for c in rows {
            let idx = self.lp.ineq.len();
            let coeffs = c.normalized();
            let rhs = c.rhs;
            self.lp.ineq.push(c);
            self.append_row(coeffs, rhs, RowRef::Ineq(idx));
            ids.push(idx);
        }
        let m = self.m;
        if !self.warm || self.binv.len() != old_m * old_m {
            self.warm = false;
            return Ok(ids);
        }
        // Border B⁻¹: new basis [[B, 0], [a_B, I]], inverse [[B⁻¹, 0], [−a_B B⁻¹, I]].
        let mut nb = vec![0.0; m * m];
        for i in 0..old_m {
            nb[i * m..i * m + old_m].copy_from_slice(&self.binv[i * old_m..(i + 1) * old_m]);
        }
        for r in old_m..m {
            // row r of the new rows restricted to basic columns
            let mut a_b = vec![0.0; old_m];
            let mut any = false;
            for &(j, a) in &self.rows[r] {
                if self.state[j] == VarState::Basic {
                    a_b[self.pos[j]] = a;
                    any = true;
                }
            }
            // the new slack occupies basis position r
            nb[r * m + r] = 1.0;
            if any {
                for i in 0..old_m {
                    let col = &self.binv[i * old_m..(i + 1) * old_m];
                    let v: f64 = a_b.iter().zip(col).map(|(a, b)| a * b).sum();
                    nb[i * m + r] = -v;
                }
            }
        }
        self.binv = nb;
        for r in old_m..m {
            self.basis.push(n + r);
            self.pos[n + r] = r;
            self.state[n + r] = VarState::Basic;
        }
        self.compute_xb();
        self.status = None;
        Ok(ids)
    }

    pub fn set_ineq_rhs(&mut self, row: usize, rhs: f64) -> Result<(), LpError> {
        let i = self
            .row_ref
            .iter()
            .position(|r| *r == RowRef::Ineq(row))
            .ok_or(LpError::UnknownRow(row))?;
        if !rhs.is_finite() {
            return Err(LpError::NonFinite("right-hand side"));
        }
        self.lp.ineq[row].rhs = rhs;
        self.rhs[i] = rhs;
        self.status = None;
        Ok(())
    }

    pub fn set_eq_rhs(&mut self, row: usize, rhs: f64) -> Result<(), LpError> {
        let i = self
            .row_ref
            .iter()
            .position(|r| *r == RowRef::Eq(row))
            .ok_or(LpError::UnknownRow(row))?;
        if !rhs.is_finite() {
            return Err(LpError::NonFinite("right-hand side"));
        }
        self.lp.eq[row].rhs = rhs;
        self.rhs[i] = rhs;
        self.status = None;
        Ok(())
    }

    /// Changes all inequality right-hand sides at once (warm start kept).
    pub fn set_all_ineq_rhs(&mut self, rhs: &[f64]) -> Result<(), LpError> {
        if rhs.len() != self.lp.ineq.len() {
            return Err(LpError::UnknownRow(rhs.len()));
        }
        for (i, r) in self.row_ref.iter().enumerate() {
            if let RowRef::Ineq(k) = *r {
                if !rhs[k].is_finite() {
                    return Err(LpError::NonFinite("right-hand side"));
                }
                self.rhs[i] = rhs[k];
                self.lp.ineq[k].rhs = rhs[k];
            }
        }
        self.status = None;
        Ok(())
    }

    /// Changes the bounds of a structural variable (warm start kept).
    pub fn set_var_bounds(&mut self, var: usize, lower: f64, upper: f64) -> Result<(), LpError> {
        if var >= self.n {
            return Err(LpError::UnknownVariable { var, num_vars: self.n });
        }
        if lower.is_nan() || upper.is_nan() || lower == f64::INFINITY || upper == f64::NEG_INFINITY {
            return Err(LpError::NonFinite("bounds"));
        }
        if lower > upper {
            return Err(LpError::InvertedBounds(var));
        }
        self.lp.lower[var] = lower;
        self.lp.upper[var] = upper;
        self.lo[var] = lower;
        self.up[var] = upper;
        self.artificial[var] = false;
        let prefer_upper = self.state[var] == VarState::Upper;
        if self.state[var] != VarState::Basic {
            let (state, value) = if prefer_upper && upper.is_finite() || !lower.is_finite() && upper.is_finite() {
                (VarState::Upper, upper)
            } else if lower.is_finite() {
                (VarState::Lower, lower)
            } else {
                (VarState::Free, 0.0)
            };
            self.state[var] = state;
            self.x[var] = value;
        }
        self.status = None;
        Ok(())
    }

    /// Changes the objective coefficient of a structural variable. The next
    /// solve continues from the current basis with primal iterations when it
    /// is still primal feasible.
    pub fn set_cost(&mut self, var: usize, cost: f64) -> Result<(), LpError> {
        if var >= self.n {
            return Err(LpError::UnknownVariable { var, num_vars: self.n });
        }
        if !cost.is_finite() {
            return Err(LpError::NonFinite("cost"));
        }
        self.lp.cost[var] = cost;
        self.cost[var] = cost;
        self.status = None;
        Ok(())
    }

    // ---- driver -------------------------------------------------------

    pub fn solve(&mut self) -> LpStatus {
        self.stats = SolveStats::default();
        self.farkas = None;
        self.ray = None;
        self.bland = false;
        self.degenerate_run = 0;
        if self.m == 0 {
            return self.solve_bounds_only();
        }
        if !self.warm {
            self.cold_start();
        } else {
            self.compute_xb();
            self.compute_reduced_costs();
            if self.max_dual_infeasibility() > self.opts.dual_tol * 10.0 {
                if self.max_primal_infeasibility() <= self.opts.primal_tol && !self.artificial.iter().any(|&a| a) {
                    // cost change on a primal feasible basis
                    if let Err(s) = self.primal_phase() {
                        if s != LpStatus::NumericalFailure {
                            self.status = Some(s);
                            self.warm = false;
                            return s;
                        }
                        self.cold_start();
                    }
                } else {
                    // e.g. after a previous primal phase stopped early
                    self.cold_start();
                }
            }
        }
        let mut status = self.run();
        if status == LpStatus::NumericalFailure {
            self.cold_start();
            status = self.run();
        }
        self.status = Some(status);
        if status != LpStatus::Optimal {
            self.warm = status == LpStatus::Infeasible;
        }
        status
    }

    fn run(&mut self) -> LpStatus {
        let mut enlargements = 0;
        loop {
            match self.dual_phase() {
                Ok(()) => break,
                Err(LpStatus::Infeasible) => {
                    if self.farkas_uses_artificial() {
                        enlargements += 1;
                        if enlargements > 4 {
                            return LpStatus::NumericalFailure;
                        }
                        self.enlarge_artificial();
                        continue;
                    }
                    return LpStatus::Infeasible;
                }
                Err(s) => return s,
            }
        }
        self.release_artificial();
        for round in 0..4 {
            match self.primal_phase() {
                Ok(()) => {}
                Err(s) => return s,
            }
            // verification on a fresh factorization
            self.refactor();
            self.compute_xb();
            self.compute_reduced_costs();
            let pinf = self.max_primal_infeasibility();
            let dinf = self.max_dual_infeasibility();
            if pinf <= self.opts.primal_tol * 100.0 && dinf <= self.opts.dual_tol * 100.0 {
                return LpStatus::Optimal;
            }
            if round == 3 {
                break;
            }
            if pinf > self.opts.primal_tol * 100.0 && dinf <= self.opts.dual_tol * 100.0 {
                self.clamp_reduced_costs();
                match self.dual_phase() {
                    Ok(()) => {}
                    Err(s) => return s,
                }
            }
        }
        LpStatus::NumericalFailure
    }

    fn solve_bounds_only(&mut self) -> LpStatus {
        for j in 0..self.n {
            let c = self.cost[j];
            let (l, u) = (self.lp.lower[j], self.lp.upper[j]);
            let v = if c > 0.0 {
                l
            } else if c < 0.0 {
                u
            } else if l.is_finite() {
                l
            } else if u.is_finite() {
                u
            } else {
                0.0
            };
            if !v.is_finite() {
                let mut ray = vec![0.0; self.n];
                ray[j] = if c > 0.0 { -1.0 } else { 1.0 };
                self.ray = Some(ray);
                self.status = Some(LpStatus::Unbounded);
                return LpStatus::Unbounded;
            }
            self.x[j] = v;
            self.d[j] = c;
            self.state[j] = if v == l { VarState::Lower } else { VarState::Upper };
        }
        self.status = Some(LpStatus::Optimal);
        LpStatus::Optimal
    }

    fn infeasibility_of(&self, v: usize) -> f64 {
        let xv = self.x[v];
        let lo = self.lo[v];
        let up = self.up[v];
        if xv < lo {
            let t = self.opts.primal_tol * lo.abs().max(1.0);
            if lo - xv > t {
                return lo - xv;
            }
        } else if xv > up {
            let t = self.opts.primal_tol * up.abs().max(1.0);
            if xv - up > t {
                return xv - up;
            }
        }
        0.0
    }

    fn max_primal_infeasibility(&self) -> f64 {
        self.basis
            .iter()
            .map(|&v| {
                let finite = |b: f64| if b.is_finite() { b.abs() } else { 0.0 };
                let s = finite(self.lo[v]).max(finite(self.up[v])).max(1.0);
                (self.lo[v] - self.x[v]).max(self.x[v] - self.up[v]).max(0.0) / s
            })
            .fold(0.0, f64::max)
    }

    fn dual_infeasibility_of(&self, j: usize) -> f64 {
        let dj = self.d[j];
        match self.state[j] {
            VarState::Basic => 0.0,
            VarState::Lower => {
                if self.lo[j] == self.up[j] {
                    0.0
                } else {
                    (-dj).max(0.0)
                }
            }
            VarState::Upper => {
                if self.lo[j] == self.up[j] {
                    0.0
                } else {
                    dj.max(0.0)
                }
            }
            VarState::Free => dj.abs(),
        }
    }

    fn max_dual_infeasibility(&self) -> f64 {
        let scale = self.cost.iter().fold(1.0f64, |a, c| a.max(c.abs()));
        (0..self.n + self.m).map(|j| self.dual_infeasibility_of(j)).fold(0.0, f64::max) / scale
    }

    fn clamp_reduced_costs(&mut self) {
        for j in 0..self.n + self.m {
            match self.state[j] {
                VarState::Lower if self.d[j] < 0.0 => self.d[j] = 0.0,
                VarState::Upper if self.d[j] > 0.0 => self.d[j] = 0.0,
                _ => {}
            }
        }
    }

    fn enlarge_artificial(&mut self) {
        for j in 0..self.n {
            if self.artificial[j] {
                let lo_art = self.lo[j] != self.lp.lower[j];
                let up_art = self.up[j] != self.lp.upper[j];
                if lo_art {
                    self.lo[j] *= 1000.0;
                    if self.state[j] == VarState::Lower {
                        self.x[j] = self.lo[j];
                    }
                }
                if up_art {
                    self.up[j] *= 1000.0;
                    if self.state[j] == VarState::Upper {
                        self.x[j] = self.up[j];
                    }
                }
            }
        }
        self.compute_xb();
    }

    /// Whether the last dual ratio test was blocked only by a temporary bound.
    fn farkas_uses_artificial(&self) -> bool {
        let Some(rho) = &self.farkas else { return false };
        let alpha = self.row_times_a(rho);
        let s = self.farkas_sign;
        (0..self.n).any(|j| {
            if !self.artificial[j] || alpha[j].abs() <= self.opts.pivot_tol {
                return false;
            }
            let ah = s * alpha[j];
            match self.state[j] {
                VarState::Lower => ah > 0.0 && self.lo[j] != self.lp.lower[j],
                VarState::Upper => ah < 0.0 && self.up[j] != self.lp.upper[j],
                _ => false,
            }
        })
    }

    // ---- dual simplex ---------------------------------------------------

    fn dual_phase(&mut self) -> Result<(), LpStatus> {
        let max_it = self.max_iterations();
        let mut retried_pivot = false;
        loop {
            if self.stats.iterations >= max_it {
                return Err(LpStatus::IterationLimit);
            }
            if self.updates >= self.refactor_interval() {
                self.refactor();
                self.compute_xb();
                self.compute_reduced_costs();
            }
            // leaving row
            let mut p = NONE;
            let mut best = 0.0;
            for (k, &v) in self.basis.iter().enumerate() {
                let inf = self.infeasibility_of(v);
                if inf > 0.0 {
                    if self.bland {
                        if p == NONE || v < self.basis[p] {
                            p = k;
                        }
                    } else if inf > best {
                        best = inf;
                        p = k;
                    }
                }
            }
            if p == NONE {
                return Ok(());
            }
            let vp = self.basis[p];
            let to_lower = self.x[vp] < self.lo[vp];
            let s = if to_lower { 1.0 } else { -1.0 };
            let rho = self.binv_row(p);
            let alpha = self.row_times_a(&rho);

            let q = self.dual_ratio_test(&alpha, s);
            let Some(q) = q else {
                self.farkas = Some(rho);
                self.farkas_sign = s;
                return Err(LpStatus::Infeasible);
            };
            let col = self.ftran(q);
            let err = (col[p] - alpha[q]).abs();
            if err > 1e-7 * (1.0 + alpha[q].abs()) && !retried_pivot && self.updates > 0 {
                self.refactor();
                self.compute_xb();
                self.compute_reduced_costs();
                retried_pivot = true;
                continue;
            }
            retried_pivot = false;

            let theta_d = self.d[q] / alpha[q];
            for j in 0..self.n + self.m {
                if self.state[j] != VarState::Basic && alpha[j] != 0.0 {
                    self.d[j] -= theta_d * alpha[j];
                }
            }
            self.d[q] = 0.0;
            self.d[vp] = -theta_d;

            let target = if to_lower { self.lo[vp] } else { self.up[vp] };
            let delta = (self.x[vp] - target) / col[p];
            self.x[q] += delta;
            for (k, &v) in self.basis.iter().enumerate() {
                if k != p {
                    self.x[v] -= col[k] * delta;
                }
            }
            self.x[vp] = target;

            self.basis[p] = q;
            self.pos[q] = p;
            self.state[q] = VarState::Basic;
            self.pos[vp] = NONE;
            self.state[vp] = if to_lower { VarState::Lower } else { VarState::Upper };
            self.eta_update(p, &col);

            self.stats.iterations += 1;
            self.stats.dual_iterations += 1;
            self.total_iterations += 1;
            if theta_d.abs() < 1e-12 {
                self.degenerate_run += 1;
                if self.degenerate_run > self.opts.degeneracy_limit {
                    self.bland = true;
                }
            } else {
                self.degenerate_run = 0;
                self.bland = false;
            }
        }
    }

    fn dual_ratio_test(&self, alpha: &[f64], s: f64) -> Option<usize> {
        let tol_d = self.opts.dual_tol;
        let piv = self.opts.pivot_tol;
        let mut cand: Vec<(usize, f64, f64)> = Vec::new();
        for j in 0..self.n + self.m {
            let st = self.state[j];
            if st == VarState::Basic {
                continue;
            }
            let a = alpha[j];
            if a.abs() <= piv {
                continue;
            }
            if st != VarState::Free && self.lo[j] == self.up[j] {
                continue;
            }
            let ah = s * a;
            let num = match st {
                VarState::Lower if ah < 0.0 => self.d[j].max(0.0),
                VarState::Upper if ah > 0.0 => (-self.d[j]).max(0.0),
                VarState::Free => self.d[j].abs(),
                _ => continue,
            };
            cand.push((j, num, a.abs()));
        }
        if cand.is_empty() {
            return None;
        }
        if self.bland {
            let mut best: Option<(usize, f64)> = None;
            for &(j, num, a) in &cand {
                let r = num / a;
                match best {
                    Some((_, br)) if r >= br - 1e-12 => {}
                    _ => best = Some((j, r)),
                }
            }
            return best.map(|b| b.0);
        }
        let tmax = cand.iter().map(|&(_, num, a)| (num + tol_d) / a).fold(f64::INFINITY, f64::min);
        let mut best = NONE;
        let mut best_a = 0.0;
        for &(j, num, a) in &cand {
            if num / a <= tmax && a > best_a {
                best_a = a;
                best = j;
            }
        }
        Some(best)
    }

    // ---- primal simplex -------------------------------------------------

    fn primal_phase(&mut self) -> Result<(), LpStatus> {
        let max_it = self.max_iterations();
        let tol_d = self.opts.dual_tol;
        let tol_p = self.opts.primal_tol;
        let piv = self.opts.pivot_tol;
        self.bland = false;
        self.degenerate_run = 0;
        loop {
            if self.stats.iterations >= max_it {
                return Err(LpStatus::IterationLimit);
            }
            if self.updates >= self.refactor_interval() {
                self.refactor();
                self.compute_xb();
            }
            self.compute_reduced_costs();
            // entering
            let mut q = NONE;
            let mut best = 0.0;
            let mut dir = 0.0;
            for j in 0..self.n + self.m {
                let dj = self.d[j];
                let (ok, dj_dir) = match self.state[j] {
                    VarState::Basic => (false, 0.0),
                    VarState::Lower => (dj < -tol_d && self.lo[j] < self.up[j], 1.0),
                    VarState::Upper => (dj > tol_d && self.lo[j] < self.up[j], -1.0),
                    VarState::Free => (dj.abs() > tol_d, if dj > 0.0 { -1.0 } else { 1.0 }),
                };
                if !ok {
                    continue;
                }
                if self.bland {
                    q = j;
                    dir = dj_dir;
                    break;
                }
                if dj.abs() > best {
                    best = dj.abs();
                    q = j;
                    dir = dj_dir;
                }
            }
            if q == NONE {
                return Ok(());
            }
            let col = self.ftran(q);
            let flip_dist = if dir > 0.0 { self.up[q] - self.x[q] } else { self.x[q] - self.lo[q] };

            // Harris pass 1
            let mut tmax = f64::INFINITY;
            for (k, &v) in self.basis.iter().enumerate() {
                let delta = -dir * col[k];
                if delta < -piv && self.lo[v].is_finite() {
                    tmax = tmax.min((self.x[v] - self.lo[v] + tol_p) / -delta);
                } else if delta > piv && self.up[v].is_finite() {
                    tmax = tmax.min((self.up[v] - self.x[v] + tol_p) / delta);
                }
            }
            // pass 2
            let mut r = NONE;
            let mut r_delta = 0.0;
            let mut step = f64::INFINITY;
            for (k, &v) in self.basis.iter().enumerate() {
                let delta = -dir * col[k];
                let t = if delta < -piv && self.lo[v].is_finite() {
                    ((self.x[v] - self.lo[v]) / -delta).max(0.0)
                } else if delta > piv && self.up[v].is_finite() {
                    ((self.up[v] - self.x[v]) / delta).max(0.0)
                } else {
                    continue;
                };
                if t <= tmax {
                    let better = if self.bland {
                        r == NONE || t < step - 1e-12 || (t <= step + 1e-12 && v < self.basis[r])
                    } else {
                        delta.abs() > r_delta
                    };
                    if better {
                        r = k;
                        r_delta = delta.abs();
                        step = t;
                    }
                }
            }
            if flip_dist <= step && flip_dist.is_finite() {
                let t = flip_dist;
                self.x[q] = if dir > 0.0 { self.up[q] } else { self.lo[q] };
                for (k, &v) in self.basis.iter().enumerate() {
                    self.x[v] -= dir * col[k] * t;
                }
                self.state[q] = if dir > 0.0 { VarState::Upper } else { VarState::Lower };
                self.stats.iterations += 1;
                self.stats.primal_iterations += 1;
                self.total_iterations += 1;
                continue;
            }
            if r == NONE {
                let mut ray = vec![0.0; self.n];
                if q < self.n {
                    ray[q] = dir;
                }
                for (k, &v) in self.basis.iter().enumerate() {
                    if v < self.n {
                        ray[v] = -dir * col[k];
                    }
                }
                self.ray = Some(ray);
                self.warm = false;
                return Err(LpStatus::Unbounded);
            }
            let t = step;
            self.x[q] += dir * t;
            for (k, &v) in self.basis.iter().enumerate() {
                self.x[v] -= dir * col[k] * t;
            }
            let vr = self.basis[r];
            let delta = -dir * col[r];
            if delta < 0.0 {
                self.x[vr] = self.lo[vr];
                self.state[vr] = VarState::Lower;
            } else {
                self.x[vr] = self.up[vr];
                self.state[vr] = VarState::Upper;
            }
            self.pos[vr] = NONE;
            self.basis[r] = q;
            self.pos[q] = r;
            self.state[q] = VarState::Basic;
            self.eta_update(r, &col);
            self.stats.iterations += 1;
            self.stats.primal_iterations += 1;
            self.total_iterations += 1;
            if t < 1e-12 {
                self.degenerate_run += 1;
                if self.degenerate_run > self.opts.degeneracy_limit {
                    self.bland = true;
                }
            } else {
                self.degenerate_run = 0;
                self.bland = false;
            }
        }
    }

    // ---- results --------------------------------------------------------

    pub fn status(&self) -> Option<LpStatus> {
        self.status
    }

    /// Solution of the current problem, valid after [`Simplex::solve`].
    pub fn solution(&self) -> LpSolution {
        let status = self.status.unwrap_or(LpStatus::NumericalFailure);
        let x: Vec<f64> = self.x[..self.n].to_vec();
        let mut ineq_duals = vec![0.0; self.lp.ineq.len()];
        let mut eq_duals = vec![0.0; self.lp.eq.len()];
        let mut reduced_costs = vec![0.0; self.n];
        let mut farkas = None;
        if status == LpStatus::Optimal && self.m > 0 {
            let y = self.duals();
            for (i, r) in self.row_ref.iter().enumerate() {
                match *r {
                    RowRef::Ineq(k) => ineq_duals[k] = (-y[i]).max(0.0),
                    RowRef::Eq(k) => eq_duals[k] = y[i],
                }
            }
            let ya = self.row_times_a(&y);
            for j in 0..self.n {
                reduced_costs[j] = self.cost[j] - ya[j];
            }
        } else if status == LpStatus::Optimal {
            reduced_costs.copy_from_slice(&self.cost[..self.n]);
        }
        if status == LpStatus::Infeasible {
            if let Some(rho) = &self.farkas {
                let mut fi = vec![0.0; self.lp.ineq.len()];
                let mut fe = vec![0.0; self.lp.eq.len()];
                for (i, r) in self.row_ref.iter().enumerate() {
                    match *r {
                        RowRef::Ineq(k) => fi[k] = rho[i],
                        RowRef::Eq(k) => fe[k] = rho[i],
                    }
                }
                farkas = Some(FarkasCertificate { ineq_weights: fi, eq_weights: fe });
            }
        }
        let objective = if status == LpStatus::Optimal {
            self.lp.objective_value(&x)
        } else {
            f64::NAN
        };
        LpSolution {
            status,
            x,
            objective,
            ineq_duals,
            eq_duals,
            reduced_costs,
            farkas,
            ray: if status == LpStatus::Unbounded { self.ray.clone() } else { None },
            iterations: self.stats.iterations,
        }
    }
}
