use bldgres_lp::{Constraint, LinearProgram, LpStatus, Simplex};
use nalgebra::DVector;

use super::prices::PriceVectors;
use super::result::{ReserveSchedule, RowDual, ScheduleResult, ScheduleStats};
use super::structure::StructureMatrix;
use crate::error::{CoreError, Result};
use crate::thermal::{StackedBlock, StackedSystem};
use crate::uncertainty::{SetKind, UncertaintySet};

/// How the robust rows enter the LP.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// `Literal` for small instances, `Lazy` otherwise.
    Auto,
    /// Every robust row up front: auxiliary 1-norm variables for the general
    /// box case and one dual block per row for the polytope case.
    Literal,
    /// Rows and worst-case cuts are added only once violated, re-solving
    /// with a dual-simplex warm start.
    Lazy,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleOptions {
    pub method: Method,
    /// Relative row violation accepted as satisfied, `tol · (1 + |Q_j|)`.
    pub tol: f64,
    pub max_rounds: usize,
    /// `Auto` picks `Literal` while (robust rows × horizon) stays below this.
    pub literal_limit: usize,
    pub with_duals: bool,
}

impl Default for ScheduleOptions {
    fn default() -> Self {
        ScheduleOptions { method: Method::Auto, tol: 1e-9, max_rounds: 400, literal_limit: 4000, with_duals: true }
    }
}

/// Which robust counterpart to build.
#[derive(Debug, Clone, PartialEq)]
pub enum Formulation {
    /// Box signal, rows of `S` single-signed: `G_j u + |S_j| r ≤ Q_j`.
    Signed,
    /// Box signal, any sign pattern: `G_j u + ‖F_j r̃‖₁ ≤ Q_j`.
    General,
    /// Box signal with separate up and down capacities.
    Asymmetric,
    /// Polytope signal set.
    Pec(UncertaintySet),
}

#[derive(Debug, Clone, Copy)]
enum Cell {
    Plain(usize),
    Sym { lo: usize, hi: usize },
    Asym { lo: usize, u: usize, hi: usize },
}

impl Cell {
    fn push_u(self, c: f64, out: &mut Vec<(usize, f64)>) {
        match self {
            Cell::Plain(v) => out.push((v, c)),
            Cell::Sym { lo, hi } => {
                out.push((lo, 0.5 * c));
                out.push((hi, 0.5 * c));
            }
            Cell::Asym { u, .. } => out.push((u, c)),
        }
    }

    fn push_r(self, c: f64, out: &mut Vec<(usize, f64)>) {
        if let Cell::Sym { lo, hi } = self {
            out.push((hi, 0.5 * c));
            out.push((lo, -0.5 * c));
        }
    }

    fn push_up(self, c: f64, out: &mut Vec<(usize, f64)>) {
        if let Cell::Asym { lo, u, .. } = self {
            out.push((u, c));
            out.push((lo, -c));
        }
    }

    fn push_down(self, c: f64, out: &mut Vec<(usize, f64)>) {
        if let Cell::Asym { u, hi, .. } = self {
            out.push((hi, c));
            out.push((u, -c));
        }
    }

    fn u(self, x: &[f64]) -> f64 {
        match self {
            Cell::Plain(v) => x[v],
            Cell::Sym { lo, hi } => 0.5 * (x[lo] + x[hi]),
            Cell::Asym { u, .. } => x[u],
        }
    }

    /// `(up, down)` capacity.
    fn r(self, x: &[f64]) -> (f64, f64) {
        match self {
            Cell::Plain(_) => (0.0, 0.0),
            Cell::Sym { lo, hi } => {
                let r = 0.5 * (x[hi] - x[lo]);
                (r, r)
            }
            Cell::Asym { lo, u, hi } => (x[u] - x[lo], x[hi] - x[u]),
        }
    }
}

/// Plain cutting-plane rounds before separating between the LP point and a
/// robust-feasible anchor.
const IN_OUT_AFTER: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
enum RowSrc {
    Robust { b: usize, j: usize },
    Zero,
}

/// Daily robust scheduling problem kept alive between solves, so that new
/// initial states can be scheduled from the previous basis.
#[derive(Debug, Clone)]
pub struct Lv1Engine {
    system: StackedSystem,
    prices: PriceVectors,
    formulation: Formulation,
    opts: ScheduleOptions,
    literal: bool,
    cells: Vec<Vec<Cell>>,
    cost: Vec<f64>,
    pay: Vec<Vec<f64>>,
    simplex: Simplex,
    row_src: Vec<RowSrc>,
    added: Vec<Vec<bool>>,
    last_cut: Vec<Vec<Option<Vec<f64>>>>,
    struct_added: Vec<Vec<bool>>,
    rounds: usize,
    cuts: usize,
    structure: StructureMatrix,
    /// Box-signal engine on the same variables; its optimum is robust for
    /// any smaller signal set and anchors the in-out separation.
    anchor: Option<Box<Lv1Engine>>,
    x_in: Option<Vec<f64>>,
}

fn output_rows(b: &StackedBlock) -> impl Iterator<Item = usize> {
    let (ny, nu) = (b.output_rows(), b.input_rows());
    (0..ny).chain(ny + nu..2 * ny + nu)
}

impl Lv1Engine {
    pub fn new(
        system: &StackedSystem,
        prices: &PriceVectors,
        structure: &StructureMatrix,
        formulation: Formulation,
        opts: ScheduleOptions,
    ) -> Result<Self> {
        let n = system.horizon;
        prices.validate(n)?;
        if structure.horizon != n {
            return Err(CoreError::HorizonMismatch(n, structure.horizon));
        }
        if system.blocks.is_empty() {
            return Err(CoreError::InvalidParameter("no buildings to schedule".into()));
        }
        match &formulation {
            Formulation::Signed | Formulation::Asymmetric => check_signs(system)?,
            Formulation::Pec(set) => {
                if set.kind != SetKind::Pec || set.n != n {
                    return Err(CoreError::InvalidParameter("PEC scheduling needs a PEC set over the horizon".into()));
                }
                // u ± r inside the input bounds needs every w_t = ±1 reachable
                for t in 0..n {
                    let mut e = vec![0.0; n];
                    e[t] = 1.0;
                    let up = set.maximizer(&e)[t];
                    e[t] = -1.0;
                    let dn = set.maximizer(&e)[t];
                    if up < 1.0 - 1e-12 || dn > -1.0 + 1e-12 {
                        return Err(CoreError::InvalidParameter(
                            "signal must be able to reach ±1 at every step (windows of at least two steps)".into(),
                        ));
                    }
                }
            }
            Formulation::General => {}
        }
        let robust_rows: usize = system.blocks.iter().map(|b| 2 * b.output_rows()).sum();
        let literal = match opts.method {
            Method::Literal => true,
            Method::Lazy => false,
            Method::Auto => robust_rows * n <= opts.literal_limit,
        };
        let literal = literal && matches!(formulation, Formulation::General | Formulation::Pec(_));
        let asym = formulation == Formulation::Asymmetric;

        let mut lp = LinearProgram::new();
        let mut cells = Vec::new();
        let mut cost = Vec::new();
        let mut pay = Vec::new();
        for b in &system.blocks {
            let mut bc = Vec::with_capacity(n * b.n_u);
            let mut bpay = vec![0.0; n * b.n_r];
            for t in 0..n {
                for i in 0..b.n_u {
                    let (lo, hi) = (b.u_min[i], b.u_max[i]);
                    let cu = prices.c[t] * b.input_kw_per_unit(i) * b.step_hours;
                    let slot = b.reserve_slot(i).filter(|_| prices.k[t] > 0.0);
                    let name = |p: &str| format!("{p}_b{}_t{t}_i{i}", b.building);
                    let cell = match slot {
                        None => Cell::Plain(lp.add_var(name("u"), cu, lo, hi).0),
                        Some(s) => {
                            let pk = prices.k[t] * b.electric_kw_per_unit(s) * b.step_hours;
                            bpay[t * b.n_r + s] = pk;
                            if asym {
                                let l = lp.add_var(name("lo"), pk, lo, hi).0;
                                let u = lp.add_var(name("u"), cu, lo, hi).0;
                                let h = lp.add_var(name("hi"), -pk, lo, hi).0;
                                Cell::Asym { lo: l, u, hi: h }
                            } else {
                                let l = lp.add_var(name("lo"), 0.5 * (cu + pk), lo, hi).0;
                                let h = lp.add_var(name("hi"), 0.5 * (cu - pk), lo, hi).0;
                                Cell::Sym { lo: l, hi: h }
                            }
                        }
                    };
                    bc.push(cell);
                    cost.push(cu);
                }
            }
            cells.push(bc);
            pay.push(bpay);
        }

        let mut eng = Lv1Engine {
            system: system.clone(),
            prices: prices.clone(),
            formulation,
            opts,
            literal,
            added: system.blocks.iter().map(|b| vec![false; b.rows()]).collect(),
            last_cut: system.blocks.iter().map(|b| vec![None; b.rows()]).collect(),
            struct_added: cells.iter().map(|c| vec![false; c.len()]).collect(),
            cells,
            cost,
            pay,
            simplex: Simplex::new({
                let mut tmp = LinearProgram::new();
                tmp.add_var("x", 0.0, 0.0, 0.0);
                tmp
            })?,
            row_src: Vec::new(),
            rounds: 0,
            cuts: 0,
            structure: structure.clone(),
            anchor: None,
            x_in: None,
        };

        // product structure
        for row in eng.structure_rows(structure) {
            lp.push_eq(row);
        }
        if eng.literal {
            eng.build_literal(&mut lp);
        }
        eng.simplex = Simplex::new(lp)?;
        Ok(eng)
    }

    fn reserve_cell(&self, b: usize, t: usize, s: usize) -> Cell {
        let blk = &self.system.blocks[b];
        self.cells[b][t * blk.n_u + blk.reserve_inputs[s]]
    }

    fn structure_rows(&self, m: &StructureMatrix) -> Vec<Constraint> {
        let asym = self.formulation == Formulation::Asymmetric;
        let pairs = m.pairs();
        let mut rows = Vec::new();
        let kinds: &[u8] = if asym { &[0, 1] } else { &[2] };
        let push = |kind: u8, cell: Cell, c: f64, out: &mut Vec<(usize, f64)>| match kind {
            0 => cell.push_up(c, out),
            1 => cell.push_down(c, out),
            _ => cell.push_r(c, out),
        };
        for &kind in kinds {
            if m.per_actuator {
                for (bi, b) in self.system.blocks.iter().enumerate() {
                    for s in 0..b.n_r {
                        for &(t, t1) in &pairs {
                            let mut c = Vec::new();
                            push(kind, self.reserve_cell(bi, t, s), 1.0, &mut c);
                            push(kind, self.reserve_cell(bi, t1, s), -1.0, &mut c);
                            if !c.is_empty() {
                                rows.push(Constraint::new(c, 0.0));
                            }
                        }
                    }
                }
            } else {
                for &(t, t1) in &pairs {
                    let mut c = Vec::new();
                    for (bi, b) in self.system.blocks.iter().enumerate() {
                        for s in 0..b.n_r {
                            let w = b.electric_kw_per_unit(s);
                            push(kind, self.reserve_cell(bi, t, s), w, &mut c);
                            push(kind, self.reserve_cell(bi, t1, s), -w, &mut c);
                        }
                    }
                    if !c.is_empty() {
                        rows.push(Constraint::new(c, 0.0));
                    }
                }
            }
        }
        rows
    }

    /// `G_j u` part of a row.
    fn base_coeffs(&self, b: usize, j: usize) -> Vec<(usize, f64)> {
        let blk = &self.system.blocks[b];
        let mut c = Vec::new();
        for (col, &g) in blk.g.row(j).iter().enumerate() {
            if g != 0.0 {
                self.cells[b][col].push_u(g, &mut c);
            }
        }
        c
    }

    /// `a_t(r) = Σ_s S_j(t,s) r(t,s)` as coefficient lists per step.
    fn uncertain_terms(&self, b: usize, j: usize) -> Vec<Vec<(usize, f64)>> {
        let blk = &self.system.blocks[b];
        let mut out = vec![Vec::new(); self.system.horizon];
        for (col, &s) in blk.s.row(j).iter().enumerate() {
            if s != 0.0 {
                let (t, slot) = (col / blk.n_r, col % blk.n_r);
                self.reserve_cell(b, t, slot).push_r(s, &mut out[t]);
            }
        }
        out
    }

    fn build_literal(&mut self, lp: &mut LinearProgram) {
        let n = self.system.horizon;
        let halfspaces = match &self.formulation {
            Formulation::Pec(set) => Some(set.halfspaces()),
            _ => None,
        };
        for b in 0..self.system.blocks.len() {
            let rows: Vec<usize> = output_rows(&self.system.blocks[b]).collect();
            for j in rows {
                let q = self.system.blocks[b].q[j];
                let mut main = self.base_coeffs(b, j);
                let terms = self.uncertain_terms(b, j);
                match &halfspaces {
                    None => {
                        for (t, a) in terms.into_iter().enumerate() {
                            if a.is_empty() {
                                continue;
                            }
                            let z = lp.add_var(format!("z_b{b}_j{j}_t{t}"), 0.0, 0.0, f64::INFINITY).0;
                            main.push((z, 1.0));
                            let mut pos = a.clone();
                            pos.push((z, -1.0));
                            lp.push_ineq(Constraint::new(pos, 0.0));
                            let mut neg: Vec<(usize, f64)> = a.iter().map(|&(v, c)| (v, -c)).collect();
                            neg.push((z, -1.0));
                            lp.push_ineq(Constraint::new(neg, 0.0));
                            self.row_src.push(RowSrc::Zero);
                            self.row_src.push(RowSrc::Zero);
                        }
                    }
                    Some((abar, bbar)) => {
                        let first = lp.num_vars();
                        for i in 0..abar.nrows() {
                            lp.add_var(format!("lam_b{b}_j{j}_{i}"), 0.0, 0.0, f64::INFINITY);
                            if bbar[i] != 0.0 {
                                main.push((first + i, bbar[i]));
                            }
                        }
                        for (t, a) in terms.into_iter().enumerate().take(n) {
                            let mut eq: Vec<(usize, f64)> = (0..abar.nrows())
                                .filter(|&i| abar[(i, t)] != 0.0)
                                .map(|i| (first + i, abar[(i, t)]))
                                .collect();
                            eq.extend(a.iter().map(|&(v, c)| (v, -c)));
                            lp.push_eq(Constraint::new(eq, 0.0));
                        }
                    }
                }
                lp.push_ineq(Constraint::new(main, q));
                self.row_src.push(RowSrc::Robust { b, j });
                self.added[b][j] = true;
            }
            // structural rows
            for (k, &cell) in self.cells[b].iter().enumerate() {
                if let Cell::Sym { lo, hi } = cell {
                    lp.push_ineq(Constraint::new(vec![(lo, 1.0), (hi, -1.0)], 0.0));
                    self.row_src.push(RowSrc::Zero);
                    self.struct_added[b][k] = true;
                }
            }
        }
    }

    /// Exact row for the single-signed formulations.
    fn exact_row(&self, b: usize, j: usize) -> Constraint {
        let blk = &self.system.blocks[b];
        let mut c = self.base_coeffs(b, j);
        let asym = self.formulation == Formulation::Asymmetric;
        for (col, &s) in blk.s.row(j).iter().enumerate() {
            if s == 0.0 {
                continue;
            }
            let cell = self.reserve_cell(b, col / blk.n_r, col % blk.n_r);
            if asym {
                if s > 0.0 {
                    cell.push_down(s, &mut c);
                } else {
                    cell.push_up(-s, &mut c);
                }
            } else {
                cell.push_r(s.abs(), &mut c);
            }
        }
        Constraint::new(c, blk.q[j])
    }

    fn cut_row(&self, b: usize, j: usize, w: &[f64]) -> Constraint {
        let mut c = self.base_coeffs(b, j);
        for (t, terms) in self.uncertain_terms(b, j).into_iter().enumerate() {
            if w[t] != 0.0 {
                c.extend(terms.into_iter().map(|(v, a)| (v, a * w[t])));
            }
        }
        Constraint::new(c, self.system.blocks[b].q[j])
    }

    /// Per block: baseline inputs and `(up, down)` reserves at `x`.
    fn extract(&self, x: &[f64]) -> (Vec<DVector<f64>>, Vec<(Vec<f64>, Vec<f64>)>) {
        let n = self.system.horizon;
        let mut us = Vec::new();
        let mut rs = Vec::new();
        for (b, blk) in self.system.blocks.iter().enumerate() {
            us.push(DVector::from_iterator(n * blk.n_u, self.cells[b].iter().map(|c| c.u(x))));
            let mut up = vec![0.0; n * blk.n_r];
            let mut down = vec![0.0; n * blk.n_r];
            for t in 0..n {
                for s in 0..blk.n_r {
                    let (a, d) = self.reserve_cell(b, t, s).r(x);
                    up[t * blk.n_r + s] = a;
                    down[t * blk.n_r + s] = d;
                }
            }
            rs.push((up, down));
        }
        (us, rs)
    }

    /// Worst case of `S_j Δu` for symmetric reserves `r` (per step, slot).
    fn worst_case(&self, blk: &StackedBlock, j: usize, up: &[f64], down: &[f64]) -> (f64, Vec<f64>) {
        let n = self.system.horizon;
        let srow = blk.s.row(j);
        match &self.formulation {
            Formulation::Asymmetric => {
                let mut v = 0.0;
                for (col, &s) in srow.iter().enumerate() {
                    v += if s > 0.0 { s * down[col] } else { -s * up[col] };
                }
                (v, vec![])
            }
            f => {
                let mut a = vec![0.0; n];
                for (col, &s) in srow.iter().enumerate() {
                    if s != 0.0 {
                        a[col / blk.n_r] += s * down[col];
                    }
                }
                let w = match f {
                    Formulation::Pec(set) => set.maximizer(&a),
                    _ => a.iter().map(|&v| if v > 0.0 { 1.0 } else if v < 0.0 { -1.0 } else { 0.0 }).collect(),
                };
                let v = a.iter().zip(&w).map(|(x, y)| x * y).sum();
                (v, w)
            }
        }
    }

    /// Adds violated rows; returns how many were added.
    fn separate(&mut self, x: &[f64]) -> Result<usize> {
        let (us, rs) = self.extract(x);
        let tol = self.opts.tol;
        let mut new_rows = Vec::new();
        let mut new_src = Vec::new();
        for b in 0..self.system.blocks.len() {
            let blk = &self.system.blocks[b];
            let gu = &blk.g * &us[b];
            let (up, down) = &rs[b];
            let rows: Vec<usize> = output_rows(blk).collect();
            for j in rows {
                let (wc, w) = self.worst_case(blk, j, up, down);
                let q = blk.q[j];
                let viol = gu[j] + wc - q;
                if viol <= tol * (1.0 + q.abs()) {
                    continue;
                }
                let exact = matches!(self.formulation, Formulation::Signed | Formulation::Asymmetric);
                if exact {
                    if self.added[b][j] {
                        continue;
                    }
                    new_rows.push(self.exact_row(b, j));
                    self.added[b][j] = true;
                } else {
                    if self.last_cut[b][j].as_deref() == Some(&w[..]) {
                        continue;
                    }
                    new_rows.push(self.cut_row(b, j, &w));
                    self.last_cut[b][j] = Some(w);
                    self.cuts += 1;
                }
                new_src.push(RowSrc::Robust { b, j });
            }
            for k in 0..self.cells[b].len() {
                if self.struct_added[b][k] {
                    continue;
                }
                let cell = self.cells[b][k];
                let rows: Vec<Vec<(usize, f64)>> = match cell {
                    Cell::Plain(_) => continue,
                    Cell::Sym { lo, hi } if x[lo] > x[hi] + tol => vec![vec![(lo, 1.0), (hi, -1.0)]],
                    Cell::Asym { lo, u, hi } if x[lo] > x[u] + tol || x[u] > x[hi] + tol => {
                        vec![vec![(lo, 1.0), (u, -1.0)], vec![(u, 1.0), (hi, -1.0)]]
                    }
                    _ => continue,
                };
                self.struct_added[b][k] = true;
                for r in rows {
                    new_rows.push(Constraint::new(r, 0.0));
                    new_src.push(RowSrc::Zero);
                }
            }
        }
        let count = new_rows.len();
        if count > 0 {
            self.simplex.add_rows(new_rows)?;
            self.row_src.extend(new_src);
        }
        Ok(count)
    }

    fn infeasible_message(&self) -> String {
        let sol = self.simplex.solution();
        let mut parts = Vec::new();
        if let Some(f) = &sol.farkas {
            let mut idx: Vec<usize> = (0..f.ineq_weights.len()).filter(|&i| f.ineq_weights[i].abs() > 1e-9).collect();
            idx.sort_by(|&a, &b| f.ineq_weights[b].abs().partial_cmp(&f.ineq_weights[a].abs()).unwrap());
            for i in idx.into_iter().take(6) {
                if let Some(RowSrc::Robust { b, j }) = self.row_src.get(i) {
                    let tag = self.system.blocks[*b].tags[*j];
                    parts.push(format!("{} building {} step {}", tag.kind.as_str(), tag.building, tag.step));
                }
            }
        }
        if parts.is_empty() {
            "comfort or input bounds cannot be met".into()
        } else {
            format!("binding rows: {}", parts.join(", "))
        }
    }

    /// Solves, adding rows until every robust row holds.
    pub fn solve(&mut self) -> Result<ScheduleResult> {
        let start_round = self.rounds;
        loop {
            let status = self.simplex.solve();
            match status {
                LpStatus::Optimal => {}
                LpStatus::Infeasible => return Err(CoreError::Infeasible(self.infeasible_message())),
                s => return Err(CoreError::Solver(s)),
            }
            self.rounds += 1;
            if self.literal {
                break;
            }
            let x = self.simplex.solution().x;
            let mut added = 0;
            if self.rounds - start_round > IN_OUT_AFTER {
                if let Some(x_in) = self.interior_point()? {
                    let x_sep: Vec<f64> = x.iter().zip(&x_in).map(|(a, b)| 0.5 * (a + b)).collect();
                    added = self.separate(&x_sep)?;
                    if added == 0 {
                        self.x_in = Some(x_sep);
                    }
                }
            }
            if added == 0 {
                added = self.separate(&x)?;
            }
            if added == 0 {
                break;
            }
            if self.rounds - start_round > self.opts.max_rounds {
                return Err(CoreError::Solver(LpStatus::IterationLimit));
            }
        }
        Ok(self.result())
    }

    /// Robust-feasible point for the polytope formulation, from the
    /// box-signal schedule on the same variables.
    fn interior_point(&mut self) -> Result<Option<Vec<f64>>> {
        if !matches!(self.formulation, Formulation::Pec(_)) {
            return Ok(None);
        }
        if self.x_in.is_none() {
            if self.anchor.is_none() {
                if check_signs(&self.system).is_err() {
                    return Ok(None);
                }
                let opts = ScheduleOptions { method: Method::Lazy, with_duals: false, ..self.opts };
                let eng = Lv1Engine::new(&self.system, &self.prices, &self.structure, Formulation::Signed, opts)?;
                self.anchor = Some(Box::new(eng));
            }
            let anchor = self.anchor.as_mut().expect("anchor engine");
            anchor.solve()?;
            self.x_in = Some(anchor.simplex.solution().x);
        }
        Ok(self.x_in.clone())
    }

    fn result(&self) -> ScheduleResult {
        let sol = self.simplex.solution();
        let x = &sol.x;
        let (us, rs) = self.extract(x);
        let n = self.system.horizon;
        let mut schedule = ReserveSchedule::zeros(&self.system, self.formulation != Formulation::Asymmetric);
        let mut energy = 0.0;
        let mut payment = 0.0;
        let mut k = 0;
        for (b, blk) in self.system.blocks.iter().enumerate() {
            for v in us[b].iter() {
                energy += self.cost[k] * v;
                k += 1;
            }
            let (up, down) = &rs[b];
            for slot in schedule.slots.iter_mut().filter(|s| s.building == blk.building) {
                for t in 0..n {
                    let idx = t * blk.n_r + slot.slot;
                    slot.up[t] = up[idx].max(0.0);
                    slot.down[t] = down[idx].max(0.0);
                    let band = if schedule.symmetric { up[idx] } else { up[idx] + down[idx] };
                    payment += self.pay[b][idx] * band;
                }
            }
        }
        let duals = if self.opts.with_duals && self.formulation != Formulation::Asymmetric {
            Some(self.row_duals(&rs))
        } else {
            None
        };
        ScheduleResult {
            u: us,
            schedule,
            objective: energy - payment,
            energy_cost: energy,
            payment,
            duals,
            stats: ScheduleStats {
                lp_rows: self.simplex.num_rows(),
                lp_vars: self.simplex.problem().num_vars(),
                rounds: self.rounds,
                cuts: self.cuts,
                iterations: self.simplex.total_iterations(),
            },
        }
    }

    /// Dual block of every stacked row at the scheduled reserves.
    fn row_duals(&self, rs: &[(Vec<f64>, Vec<f64>)]) -> Vec<RowDual> {
        let n = self.system.horizon;
        let set = match &self.formulation {
            Formulation::Pec(s) => s.clone(),
            _ => crate::uncertainty::build_pc(n).expect("positive horizon"),
        };
        let mut out = Vec::new();
        for (b, blk) in self.system.blocks.iter().enumerate() {
            let r = &rs[b].0;
            for j in 0..blk.rows() {
                let mut a = vec![0.0; n];
                for (col, &s) in blk.s.row(j).iter().enumerate() {
                    a[col / blk.n_r] += s * r[col];
                }
                out.push(RowDual { tag: blk.tags[j], lambda: polytope_dual(&set, &a) });
            }
        }
        out
    }

    /// Reschedules from new initial states, keeping rows, cuts and basis.
    pub fn set_initial_states(&mut self, x0: &[DVector<f64>]) -> Result<()> {
        if x0.len() != self.system.blocks.len() {
            return Err(CoreError::Dimension(format!("{} states for {} buildings", x0.len(), self.system.blocks.len())));
        }
        for (blk, x) in self.system.blocks.iter_mut().zip(x0) {
            if x.len() != blk.x0.len() {
                return Err(CoreError::Dimension("initial state size".into()));
            }
            *blk = blk.with_initial_state(x);
        }
        let rhs: Vec<f64> = self
            .row_src
            .iter()
            .map(|s| match *s {
                RowSrc::Robust { b, j } => self.system.blocks[b].q[j],
                RowSrc::Zero => 0.0,
            })
            .collect();
        self.simplex.set_all_ineq_rhs(&rhs)?;
        self.x_in = None;
        if let Some(anchor) = self.anchor.as_mut() {
            anchor.set_initial_states(x0)?;
        }
        Ok(())
    }

    pub fn system(&self) -> &StackedSystem {
        &self.system
    }

    pub fn prices(&self) -> &PriceVectors {
        &self.prices
    }

    pub fn is_literal(&self) -> bool {
        self.literal
    }

    /// The LP as currently built (for inspection and export).
    pub fn linear_program(&self) -> &LinearProgram {
        self.simplex.problem()
    }
}

/// Optimal dual of `max a·w` over `set` in the halfspace order of
/// [`UncertaintySet::halfspaces`].
pub fn polytope_dual(set: &UncertaintySet, a: &[f64]) -> Vec<f64> {
    let n = set.n;
    let nw = set.windows.len();
    let mut lam = vec![0.0; 2 * nw + 2 * n];
    let taus = set.window_multipliers(a);
    let mut tau_of = vec![0.0; n];
    for (i, (win, &tau)) in set.windows.iter().zip(&taus).enumerate() {
        lam[2 * i] = tau.max(0.0);
        lam[2 * i + 1] = (-tau).max(0.0);
        for k in win.range() {
            tau_of[k] = tau;
        }
    }
    for k in 0..n {
        let d = a[k] - tau_of[k];
        lam[2 * nw + k] = d.max(0.0);
        lam[2 * nw + n + k] = (-d).max(0.0);
    }
    lam
}

/// Errors with the first output row of `S` that mixes signs.
pub fn check_signs(system: &StackedSystem) -> Result<()> {
    let mut offset = 0;
    for b in &system.blocks {
        for j in 0..b.rows() {
            let row = b.s.row(j);
            if row.iter().any(|&v| v > 0.0) && row.iter().any(|&v| v < 0.0) {
                return Err(CoreError::MixedSignRow { row: offset + j });
            }
        }
        offset += b.rows();
    }
    Ok(())
}

fn run(
    system: &StackedSystem,
    prices: &PriceVectors,
    m: &StructureMatrix,
    f: Formulation,
    opts: ScheduleOptions,
) -> Result<ScheduleResult> {
    Lv1Engine::new(system, prices, m, f, opts)?.solve()
}

/// Box signal, any sign pattern of `S`.
pub fn schedule_pc_general(
    system: &StackedSystem,
    prices: &PriceVectors,
    m: &StructureMatrix,
    opts: ScheduleOptions,
) -> Result<ScheduleResult> {
    run(system, prices, m, Formulation::General, opts)
}

/// Box signal with single-signed rows of `S` (heating-only or cooling-only
/// reserves per building).
pub fn schedule_pc_signed(
    system: &StackedSystem,
    prices: &PriceVectors,
    m: &StructureMatrix,
    opts: ScheduleOptions,
) -> Result<ScheduleResult> {
    run(system, prices, m, Formulation::Signed, opts)
}

/// Box signal with separately priced up and down capacities.
pub fn schedule_pc_asymmetric(
    system: &StackedSystem,
    prices: &PriceVectors,
    m: &StructureMatrix,
    opts: ScheduleOptions,
) -> Result<ScheduleResult> {
    run(system, prices, m, Formulation::Asymmetric, opts)
}

/// Polytope signal set (symmetric reserves only).
pub fn schedule_pec(
    system: &StackedSystem,
    prices: &PriceVectors,
    m: &StructureMatrix,
    set: &UncertaintySet,
    opts: ScheduleOptions,
) -> Result<ScheduleResult> {
    run(system, prices, m, Formulation::Pec(set.clone()), opts)
}
