//! Admissible signal sets: the power-constrained box and the
//! power-and-energy-constrained polytope with fixed averaging windows.

use bldgres_lp::{LinearProgram, Simplex};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{CoreError, Result};

/// Membership tolerance.
pub const MEMBER_TOL: f64 = 1e-9;
/// Largest dimension accepted by [`enumerate_vertices`].
pub const MAX_ENUM_DIM: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SetKind {
    Pc,
    Pec,
}

/// Window constraint `lo ≤ Σ_{k=start}^{start+len−1} w_k ≤ hi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub start: usize,
    pub len: usize,
    pub lo: f64,
    pub hi: f64,
}

impl Window {
    pub fn range(&self) -> std::ops::Range<usize> {
        self.start..self.start + self.len
    }

    /// True when the box alone already implies the window bounds.
    pub fn is_redundant(&self) -> bool {
        self.hi >= self.len as f64 && self.lo <= -(self.len as f64)
    }
}

/// Box `‖w‖_∞ ≤ 1`, optionally intersected with disjoint window-sum bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct UncertaintySet {
    pub kind: SetKind,
    pub n: usize,
    pub eps: f64,
    pub t_steps: usize,
    pub windows: Vec<Window>,
}

pub fn build_pc(n: usize) -> Result<UncertaintySet> {
    if n == 0 {
        return Err(CoreError::InvalidParameter("horizon must be positive".into()));
    }
    Ok(UncertaintySet { kind: SetKind::Pc, n, eps: 1.0, t_steps: 1, windows: vec![] })
}

/// Windows back to back from step 0.
pub fn build_pec(n: usize, eps: f64, t_steps: usize) -> Result<UncertaintySet> {
    if t_steps > n {
        return Err(CoreError::InvalidParameter(format!("window of {t_steps} steps exceeds horizon {n}")));
    }
    pec_anchored(n, eps, t_steps, 0, 0.0)
}

/// PEC set whose first window started `elapsed` steps before step 0 and
/// has already accumulated the realized sum `w_p`. Windows reaching past
/// the horizon keep the projection of their bound onto the covered steps.
pub fn pec_anchored(n: usize, eps: f64, t_steps: usize, elapsed: usize, w_p: f64) -> Result<UncertaintySet> {
    if n == 0 {
        return Err(CoreError::InvalidParameter("horizon must be positive".into()));
    }
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(CoreError::InvalidParameter(format!("bias coefficient {eps} outside (0, 1]")));
    }
    if t_steps == 0 {
        return Err(CoreError::InvalidParameter("window must span at least one step".into()));
    }
    if elapsed >= t_steps {
        return Err(CoreError::InvalidParameter(format!("{elapsed} elapsed steps in a window of {t_steps}")));
    }
    if w_p.abs() > elapsed as f64 + MEMBER_TOL {
        return Err(CoreError::InvalidParameter(format!("realized sum {w_p} exceeds {elapsed} elapsed steps")));
    }
    let et = eps * t_steps as f64;
    let mut windows = Vec::new();
    let mut start = 0;
    let mut first = true;
    while start < n {
        let full = if first { t_steps - elapsed } else { t_steps };
        let len = full.min(n - start);
        let outside = (full - len) as f64;
        let shift = if first { w_p } else { 0.0 };
        windows.push(Window { start, len, lo: -et - shift - outside, hi: et - shift + outside });
        start += len;
        first = false;
    }
    Ok(UncertaintySet { kind: SetKind::Pec, n, eps, t_steps, windows })
}

/// Accumulated signal inside the current averaging window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RealizedBiasState {
    pub window_start: usize,
    pub step: usize,
    pub w_p: f64,
}

impl RealizedBiasState {
    pub fn new(window_start: usize) -> Self {
        RealizedBiasState { window_start, step: window_start, w_p: 0.0 }
    }

    /// Records the realized signal of the current step and advances,
    /// resetting at window boundaries of length `t_steps`.
    pub fn record(&mut self, w: f64, t_steps: usize) {
        self.w_p += w;
        self.step += 1;
        if self.step - self.window_start >= t_steps {
            self.window_start = self.step;
            self.w_p = 0.0;
        }
    }

    pub fn elapsed(&self) -> usize {
        self.step - self.window_start
    }
}

/// Set over the `remaining` steps from `state.step`, with the active window
/// shifted by the realized sum.
pub fn shrink_realized(set: &UncertaintySet, state: &RealizedBiasState, remaining: usize) -> Result<UncertaintySet> {
    if set.kind != SetKind::Pec {
        return Err(CoreError::InvalidParameter("only PEC sets carry a realized bias".into()));
    }
    if state.step < state.window_start {
        return Err(CoreError::InvalidParameter("current step precedes the window start".into()));
    }
    pec_anchored(remaining, set.eps, set.t_steps, state.elapsed(), state.w_p)
}

impl UncertaintySet {
    pub fn contains(&self, w: &[f64]) -> bool {
        self.violation(w) <= MEMBER_TOL
    }

    /// Largest constraint violation of `w` (0 for members).
    pub fn violation(&self, w: &[f64]) -> f64 {
        if w.len() != self.n {
            return f64::INFINITY;
        }
        let mut worst: f64 = 0.0;
        for &v in w {
            worst = worst.max(v.abs() - 1.0);
        }
        for win in &self.windows {
            let s: f64 = w[win.range()].iter().sum();
            worst = worst.max(s - win.hi).max(win.lo - s);
        }
        worst
    }

    /// Window containing step `k`.
    pub fn window_of(&self, k: usize) -> Option<&Window> {
        self.windows.iter().find(|w| w.range().contains(&k))
    }

    /// Halfspace form `Ā w ≤ b̄`: window rows (upper then lower per window),
    /// then `I` and `−I` box rows.
    pub fn halfspaces(&self) -> (DMatrix<f64>, DVector<f64>) {
        let nw = self.windows.len();
        let m = 2 * nw + 2 * self.n;
        let mut a = DMatrix::zeros(m, self.n);
        let mut b = DVector::zeros(m);
        for (i, win) in self.windows.iter().enumerate() {
            for k in win.range() {
                a[(2 * i, k)] = 1.0;
                a[(2 * i + 1, k)] = -1.0;
            }
            b[2 * i] = win.hi;
            b[2 * i + 1] = -win.lo;
        }
        for k in 0..self.n {
            a[(2 * nw + k, k)] = 1.0;
            a[(2 * nw + self.n + k, k)] = -1.0;
            b[2 * nw + k] = 1.0;
            b[2 * nw + self.n + k] = 1.0;
        }
        (a, b)
    }

    /// Maximizer of `a·w` over the set: the sign vector of `a`, then per
    /// window the cheapest entries are moved until the window sum fits.
    pub fn maximizer(&self, a: &[f64]) -> Vec<f64> {
        let mut w: Vec<f64> = a.iter().map(|&v| if v > 0.0 { 1.0 } else if v < 0.0 { -1.0 } else { 0.0 }).collect();
        for win in &self.windows {
            fit_window(&mut w[win.range()], &a[win.range()], win.lo, win.hi);
        }
        w
    }

    /// Dual certificate of the window maximization: for each window the
    /// multiplier `τ` on its sum, so that the worst case equals
    /// `Σ_windows (Σ_i |a_i − τ| + max(τ·hi, τ·lo)) + Σ_free |a_i|`.
    pub fn window_multipliers(&self, a: &[f64]) -> Vec<f64> {
        self.windows.iter().map(|win| window_dual(&a[win.range()], win.lo, win.hi)).collect()
    }
}

fn fit_window(w: &mut [f64], a: &[f64], lo: f64, hi: f64) {
    let s: f64 = w.iter().sum();
    let (excess, dir) = if s > hi {
        (s - hi, -1.0)
    } else if s < lo {
        (lo - s, 1.0)
    } else {
        return;
    };
    // moving w_i by dir costs |a_i| per unit when it opposes sign(a_i)
    let mut order: Vec<usize> = (0..w.len()).collect();
    order.sort_by(|&i, &j| a[i].abs().partial_cmp(&a[j].abs()).unwrap().then(i.cmp(&j)));
    let mut left = excess;
    for i in order {
        if left <= 0.0 {
            break;
        }
        let room = if dir > 0.0 { 1.0 - w[i] } else { w[i] + 1.0 };
        let mv = room.min(left);
        w[i] += dir * mv;
        left -= mv;
    }
}

/// Minimizes `Σ|a_i − τ| + max(τ·hi, τ·lo)` over τ; the optimum lies at
/// 0 or at one of the `a_i` (piecewise linear, convex).
fn window_dual(a: &[f64], lo: f64, hi: f64) -> f64 {
    let f = |t: f64| a.iter().map(|v| (v - t).abs()).sum::<f64>() + (t * hi).max(t * lo);
    let mut best = (f(0.0), 0.0);
    for &t in a {
        let v = f(t);
        if v < best.0 - 1e-15 * (1.0 + v.abs()) {
            best = (v, t);
        }
    }
    best.1
}

/// `max a·w` over the set. The box case is `‖a‖₁`; with windows the
/// problem separates per window and is solved exactly by
/// [`UncertaintySet::maximizer`].
pub fn worst_case_linear(set: &UncertaintySet, a: &[f64]) -> Result<f64> {
    if a.len() != set.n {
        return Err(CoreError::Dimension(format!("direction has {} entries, set has {}", a.len(), set.n)));
    }
    if set.kind == SetKind::Pc {
        return Ok(a.iter().map(|v| v.abs()).sum());
    }
    let w = set.maximizer(a);
    Ok(a.iter().zip(&w).map(|(x, y)| x * y).sum())
}

/// Same value as [`worst_case_linear`] obtained from an LP solve over the
/// halfspace form.
pub fn worst_case_linear_lp(set: &UncertaintySet, a: &[f64]) -> Result<f64> {
    if a.len() != set.n {
        return Err(CoreError::Dimension(format!("direction has {} entries, set has {}", a.len(), set.n)));
    }
    let mut lp = LinearProgram::new();
    for (k, &ak) in a.iter().enumerate() {
        lp.add_var(format!("w{k}"), -ak, -1.0, 1.0);
    }
    for win in &set.windows {
        let row: Vec<(usize, f64)> = win.range().map(|k| (k, 1.0)).collect();
        lp.add_le(row.clone(), win.hi);
        lp.add_ge(row, win.lo);
    }
    let mut s = Simplex::new(lp)?;
    let status = s.solve();
    if !status.is_optimal() {
        return Err(CoreError::Solver(status));
    }
    Ok(-s.solution().objective)
}

/// Vertices of the set. Windows are disjoint, so the polytope is a product
/// of per-window polytopes whose vertices have at most one fractional entry.
pub fn enumerate_vertices(set: &UncertaintySet) -> Result<Vec<Vec<f64>>> {
    if set.n > MAX_ENUM_DIM {
        return Err(CoreError::DimensionGuard { got: set.n, max: MAX_ENUM_DIM });
    }
    let mut parts: Vec<(std::ops::Range<usize>, Vec<Vec<f64>>)> = Vec::new();
    let mut covered = vec![false; set.n];
    for win in &set.windows {
        for k in win.range() {
            covered[k] = true;
        }
        parts.push((win.range(), window_vertices(win.len, win.lo, win.hi)));
    }
    for k in 0..set.n {
        if !covered[k] {
            parts.push((k..k + 1, vec![vec![-1.0], vec![1.0]]));
        }
    }
    let mut out = vec![vec![0.0; set.n]];
    for (range, verts) in parts {
        let mut next = Vec::with_capacity(out.len() * verts.len());
        for base in &out {
            for v in &verts {
                let mut p = base.clone();
                p[range.clone()].copy_from_slice(v);
                next.push(p);
            }
        }
        out = next;
    }
    out.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(out)
}

fn window_vertices(len: usize, lo: f64, hi: f64) -> Vec<Vec<f64>> {
    let sign = |mask: usize, i: usize| if mask >> i & 1 == 1 { 1.0 } else { -1.0 };
    let mut out: Vec<Vec<f64>> = Vec::new();
    for mask in 0..1usize << len {
        let v: Vec<f64> = (0..len).map(|i| sign(mask, i)).collect();
        let s: f64 = v.iter().sum();
        if s >= lo - MEMBER_TOL && s <= hi + MEMBER_TOL {
            out.push(v);
        }
    }
    // one fractional coordinate, the sum on a window bound
    for free in 0..len {
        for mask in 0..1usize << len {
            if mask >> free & 1 == 1 {
                continue;
            }
            let others: f64 = (0..len).filter(|&i| i != free).map(|i| sign(mask, i)).sum();
            for bound in [lo, hi] {
                let x = bound - others;
                if x.abs() < 1.0 - 1e-12 {
                    let v: Vec<f64> = (0..len).map(|i| if i == free { x } else { sign(mask, i) }).collect();
                    if !out.iter().any(|u| u == &v) {
                        out.push(v);
                    }
                }
            }
        }
    }
    out
}

/// Splits a master seed into independent stream seeds (splitmix64 of
/// `master + stream · golden ratio`).
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    let mut z = master.wrapping_add(stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic admissible samples: maximizers of random directions
/// (vertices), mixes of two of them (edges), mixes of several (interior)
/// and vertices pulled towards a central member.
pub fn sample_admissible(set: &UncertaintySet, seed: u64, count: usize) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vertex = |rng: &mut ChaCha8Rng| {
        let dir: Vec<f64> = (0..set.n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        set.maximizer(&dir)
    };
    // zero, moved into any window whose bounds exclude it
    let center = set.maximizer(&vec![0.0; set.n]);
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let w = match i % 4 {
            0 => vertex(&mut rng),
            1 => {
                let (a, b) = (vertex(&mut rng), vertex(&mut rng));
                let t: f64 = rng.gen();
                a.iter().zip(&b).map(|(x, y)| t * x + (1.0 - t) * y).collect()
            }
            2 => {
                let k = 2 + rng.gen_range(0..4);
                let weights: Vec<f64> = (0..k).map(|_| -rng.gen::<f64>().max(1e-12).ln()).collect();
                let total: f64 = weights.iter().sum();
                let mut w = vec![0.0; set.n];
                for wt in weights {
                    let v = vertex(&mut rng);
                    for (acc, x) in w.iter_mut().zip(&v) {
                        *acc += wt / total * x;
                    }
                }
                w
            }
            _ => {
                let s: f64 = rng.gen();
                vertex(&mut rng).iter().zip(&center).map(|(x, c)| c + s * (x - c)).collect()
            }
        };
        out.push(w);
    }
    out
}
