//! Real-time layer: signal filtering, bias estimation and dispatch.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{CoreError, Result};
use crate::uncertainty::derive_seed;

/// Lv3 sample period in seconds.
pub const SAMPLE_PERIOD_S: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignalOrigin {
    Historical,
    Synthetic,
    FilteredLf,
    FilteredHf,
}

/// Normalized regulation signal, samples in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SfcSignal {
    pub samples: Vec<f64>,
    pub period_s: f64,
    pub origin: SignalOrigin,
}

impl SfcSignal {
    pub fn new(samples: Vec<f64>, period_s: f64, origin: SignalOrigin) -> Result<Self> {
        if samples.is_empty() {
            return Err(CoreError::InvalidParameter("signal is empty".into()));
        }
        if !(period_s > 0.0) {
            return Err(CoreError::InvalidParameter("sample period must be positive".into()));
        }
        if let Some(w) = samples.iter().find(|w| !(w.abs() <= 1.0)) {
            return Err(CoreError::InvalidParameter(format!("sample {w} outside [-1, 1]")));
        }
        Ok(SfcSignal { samples, period_s, origin })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples_per(&self, hours: f64) -> usize {
        (hours * 3600.0 / self.period_s).round() as usize
    }

    /// Mean of every consecutive block of `per` samples; a trailing partial
    /// block is dropped.
    pub fn block_means(&self, per: usize) -> Vec<f64> {
        self.samples.chunks_exact(per.max(1)).map(|c| c.iter().sum::<f64>() / c.len() as f64).collect()
    }

    /// Reads `timestamp_s,w` rows; the period is taken from the first two
    /// timestamps.
    pub fn read_csv<R: std::io::Read>(reader: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(reader);
        let mut ts = Vec::new();
        let mut w = Vec::new();
        for rec in rd.records() {
            let rec = rec?;
            let num = |i: usize| -> Result<f64> {
                rec.get(i)
                    .and_then(|s| s.trim().parse().ok())
                    .ok_or_else(|| CoreError::Config(format!("bad signal row {:?}", rec)))
            };
            ts.push(num(0)?);
            w.push(num(1)?);
        }
        let period = if ts.len() > 1 { ts[1] - ts[0] } else { SAMPLE_PERIOD_S };
        SfcSignal::new(w, period, SignalOrigin::Historical)
    }

    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(writer);
        wr.write_record(["timestamp_s", "w"])?;
        for (k, w) in self.samples.iter().enumerate() {
            wr.write_record([format!("{}", k as f64 * self.period_s), format!("{w:.9}")])?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Causal low-pass `H(z) = Σ b_i z^{-i} / (1 + Σ a_i z^{-i})`.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterSpec {
    pub order: usize,
    pub edge_hz: f64,
    pub sample_period_s: f64,
    pub ripple_db: f64,
    pub b: Vec<f64>,
    /// Denominator including the leading 1.
    pub a: Vec<f64>,
    pub poles: Vec<Complex64>,
    gain: f64,
}

fn poly(roots: &[Complex64]) -> Vec<f64> {
    let mut c = vec![Complex64::new(1.0, 0.0)];
    for r in roots {
        let mut next = vec![Complex64::new(0.0, 0.0); c.len() + 1];
        for (i, ci) in c.iter().enumerate() {
            next[i] += ci;
            next[i + 1] -= ci * r;
        }
        c = next;
    }
    c.iter().map(|z| z.re).collect()
}

/// Chebyshev type I low-pass with edge `1/T`, designed on the analog
/// prototype and mapped by the prewarped bilinear transform.
pub fn design_filter(t_hours: f64, order: usize, ripple_db: f64, sample_period_s: f64) -> Result<FilterSpec> {
    if !(t_hours > 0.0) || order == 0 {
        return Err(CoreError::InvalidParameter("filter needs T > 0 and order ≥ 1".into()));
    }
    if !(ripple_db > 0.0) || !(sample_period_s > 0.0) {
        return Err(CoreError::InvalidParameter("ripple and sample period must be positive".into()));
    }
    let edge_hz = 1.0 / (t_hours * 3600.0);
    let nyquist = 0.5 / sample_period_s;
    if edge_hz >= nyquist {
        return Err(CoreError::InvalidParameter(format!("edge {edge_hz} Hz beyond Nyquist {nyquist} Hz")));
    }
    // analog prototype with unit sample time: s = 2 (z − 1)/(z + 1)
    let warped = 2.0 * (std::f64::consts::PI * edge_hz * sample_period_s).tan();
    let eps = (10f64.powf(ripple_db / 10.0) - 1.0).sqrt();
    let mu = (1.0 / eps).asinh() / order as f64;
    let analog: Vec<Complex64> = (1..=order)
        .map(|k| {
            let th = std::f64::consts::PI * (2 * k - 1) as f64 / (2 * order) as f64;
            Complex64::new(-mu.sinh() * th.sin(), mu.cosh() * th.cos()) * warped
        })
        .collect();
    let mut k = analog.iter().fold(Complex64::new(1.0, 0.0), |acc, p| acc * -p).re;
    if order % 2 == 0 {
        k /= (1.0 + eps * eps).sqrt();
    }
    let two = Complex64::new(2.0, 0.0);
    let poles: Vec<Complex64> = analog.iter().map(|p| (two + p) / (two - p)).collect();
    let gain = k / analog.iter().fold(Complex64::new(1.0, 0.0), |acc, p| acc * (two - p)).re;
    let b = poly(&vec![Complex64::new(-1.0, 0.0); order]).into_iter().map(|c| c * gain).collect();
    let a = poly(&poles);
    Ok(FilterSpec { order, edge_hz, sample_period_s, ripple_db, b, a, poles, gain })
}

impl FilterSpec {
    pub fn max_pole_magnitude(&self) -> f64 {
        self.poles.iter().map(|p| p.norm()).fold(0.0, f64::max)
    }

    pub fn dc_gain(&self) -> f64 {
        let one = Complex64::new(1.0, 0.0);
        let den = self.poles.iter().fold(one, |acc, p| acc * (one - p));
        self.gain * 2f64.powi(self.order as i32) / den.re
    }

    /// Slowest pole time constant, in samples.
    pub fn time_constant_samples(&self) -> f64 {
        -1.0 / self.max_pole_magnitude().ln()
    }

    /// Samples discarded as start-up transient: five time constants.
    pub fn transient_samples(&self) -> usize {
        (5.0 * self.time_constant_samples()).ceil() as usize
    }

    /// Real first- and second-order sections `(b, a)`, each with unit
    /// leading denominator; their cascade equals `b / a`.
    fn sections(&self) -> Vec<([f64; 3], [f64; 3])> {
        let mut out = Vec::new();
        let mut used = vec![false; self.poles.len()];
        for i in 0..self.poles.len() {
            if used[i] {
                continue;
            }
            used[i] = true;
            let p = self.poles[i];
            if p.im.abs() < 1e-12 {
                out.push(([1.0, 1.0, 0.0], [1.0, -p.re, 0.0]));
                continue;
            }
            if let Some(j) = (i + 1..self.poles.len()).find(|&j| !used[j] && (self.poles[j] - p.conj()).norm() < 1e-9) {
                used[j] = true;
            }
            out.push(([1.0, 2.0, 1.0], [1.0, -2.0 * p.re, p.norm_sqr()]));
        }
        if let Some(first) = out.first_mut() {
            for c in first.0.iter_mut() {
                *c *= self.gain;
            }
        }
        out
    }

    /// Zero-state causal filtering (transposed direct form II per section).
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = x.to_vec();
        for (b, a) in self.sections() {
            let (mut z1, mut z2) = (0.0, 0.0);
            for v in y.iter_mut() {
                let input = *v;
                let out = b[0] * input + z1;
                z1 = b[1] * input - a[1] * out + z2;
                z2 = b[2] * input - a[2] * out;
                *v = out;
            }
        }
        y
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub lf: SfcSignal,
    pub hf: SfcSignal,
    /// Leading samples of the input dropped as filter transient.
    pub offset: usize,
    /// HF samples clipped back into `[-1, 1]`.
    pub clipped: usize,
}

/// Splits `signal` into the filtered part and its exact complement.
pub fn decompose(signal: &SfcSignal, spec: &FilterSpec) -> Result<Decomposition> {
    let (lf, hf, offset) = decompose_raw(signal, spec)?;
    let mut clipped = 0;
    let hf: Vec<f64> = hf
        .into_iter()
        .map(|v| {
            if v.abs() > 1.0 {
                clipped += 1;
            }
            v.clamp(-1.0, 1.0)
        })
        .collect();
    Ok(Decomposition {
        lf: SfcSignal { samples: lf, period_s: signal.period_s, origin: SignalOrigin::FilteredLf },
        hf: SfcSignal { samples: hf, period_s: signal.period_s, origin: SignalOrigin::FilteredHf },
        offset,
        clipped,
    })
}

/// Low- and high-frequency parts before any clipping, after the transient.
pub fn decompose_raw(signal: &SfcSignal, spec: &FilterSpec) -> Result<(Vec<f64>, Vec<f64>, usize)> {
    if (signal.period_s - spec.sample_period_s).abs() > 1e-9 {
        return Err(CoreError::InvalidParameter("filter and signal sample periods differ".into()));
    }
    let offset = spec.transient_samples();
    if signal.len() <= offset {
        return Err(CoreError::InvalidParameter(format!(
            "signal of {} samples is shorter than the {offset}-sample filter transient",
            signal.len()
        )));
    }
    let lf_all = spec.apply(&signal.samples);
    let lf = lf_all[offset..].to_vec();
    let hf = signal.samples[offset..].iter().zip(&lf).map(|(w, l)| w - l).collect();
    Ok((lf, hf, offset))
}

/// Largest absolute mean over all sliding windows of `window` samples.
pub fn estimate_bias_samples(samples: &[f64], window: usize) -> Result<f64> {
    if window == 0 || window > samples.len() {
        return Err(CoreError::InvalidParameter(format!(
            "window of {window} samples for a signal of {}",
            samples.len()
        )));
    }
    let mut sum: f64 = samples[..window].iter().sum();
    let mut best = sum.abs();
    for k in window..samples.len() {
        sum += samples[k] - samples[k - window];
        best = best.max(sum.abs());
    }
    Ok((best / window as f64).min(1.0))
}

/// Bias coefficient over averaging periods of `t_hours`.
pub fn estimate_bias(signal: &SfcSignal, t_hours: f64) -> Result<f64> {
    estimate_bias_samples(&signal.samples, signal.samples_per(t_hours))
}

/// Clips the running sum of every aligned window of `window` samples at
/// `±eps·window`; returns the projected signal and the number of changed
/// samples.
pub fn project_onto_pec(signal: &SfcSignal, eps: f64, window: usize) -> Result<(SfcSignal, usize)> {
    if !(eps > 0.0 && eps <= 1.0) || window == 0 {
        return Err(CoreError::InvalidParameter("projection needs eps in (0, 1] and a positive window".into()));
    }
    let cap = eps * window as f64;
    let mut events = 0;
    let mut out = Vec::with_capacity(signal.len());
    let mut sum = 0.0;
    for (k, &w) in signal.samples.iter().enumerate() {
        if k % window == 0 {
            sum = 0.0;
        }
        let v = w.clamp(-cap - sum, cap - sum);
        if v != w {
            events += 1;
        }
        sum += v;
        out.push(v);
    }
    Ok((SfcSignal { samples: out, period_s: signal.period_s, origin: signal.origin }, events))
}

/// Target of the synthetic generator.
#[derive(Debug, Clone, PartialEq)]
pub struct BiasProfile {
    /// `(T in hours, bias)`; the first entry is matched, the rest checked.
    pub targets: Vec<(f64, f64)>,
    pub tolerance: f64,
}

impl BiasProfile {
    pub fn single(t_hours: f64, eps: f64) -> Self {
        BiasProfile { targets: vec![(t_hours, eps)], tolerance: 0.05 }
    }
}

/// Shape of the synthetic process.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticShape {
    /// Correlation time of the fast component, seconds.
    pub ar_tau_s: f64,
    pub ar_std: f64,
    /// Correlation time of the drift, hours.
    pub drift_tau_h: f64,
}

impl Default for SyntheticShape {
    fn default() -> Self {
        SyntheticShape { ar_tau_s: 300.0, ar_std: 0.35, drift_tau_h: 3.0 }
    }
}

fn ar1(rng: &mut ChaCha8Rng, n: usize, tau_samples: f64, std: f64) -> Vec<f64> {
    let phi = (-1.0 / tau_samples).exp();
    let noise = Normal::new(0.0, std * (1.0 - phi * phi).sqrt()).expect("finite std");
    let mut x = Normal::new(0.0, std).expect("finite std").sample(rng);
    (0..n)
        .map(|_| {
            x = phi * x + noise.sample(rng);
            x
        })
        .collect()
}

/// Fast AR(1) component plus a slow unit-variance drift scaled by `drift`,
/// clipped into `[-1, 1]`.
pub fn synthesize(seed: u64, length: usize, shape: &SyntheticShape, drift: f64, period_s: f64) -> Result<SfcSignal> {
    let (fast, slow) = components(seed, length, shape, period_s)?;
    let samples = fast.iter().zip(&slow).map(|(f, s)| (f + drift * s).clamp(-1.0, 1.0)).collect();
    Ok(SfcSignal { samples, period_s, origin: SignalOrigin::Synthetic })
}

fn components(seed: u64, length: usize, shape: &SyntheticShape, period_s: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if length == 0 {
        return Err(CoreError::InvalidParameter("signal length must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 1));
    let fast = ar1(&mut rng, length, shape.ar_tau_s / period_s, shape.ar_std);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 2));
    let slow = ar1(&mut rng, length, shape.drift_tau_h * 3600.0 / period_s, 1.0);
    Ok((fast, slow))
}

/// Synthetic signal whose bias over the first profile period matches the
/// target; the drift scale is found by bisection. Other entries of the
/// profile are checked against the tolerance and a miss is an error.
pub fn generate_synthetic_signal(seed: u64, length: usize, profile: &BiasProfile) -> Result<SfcSignal> {
    generate_with_shape(seed, length, profile, &SyntheticShape::default(), SAMPLE_PERIOD_S)
}

pub fn generate_with_shape(
    seed: u64,
    length: usize,
    profile: &BiasProfile,
    shape: &SyntheticShape,
    period_s: f64,
) -> Result<SfcSignal> {
    let &(t0, target) = profile
        .targets
        .first()
        .ok_or_else(|| CoreError::InvalidParameter("empty bias profile".into()))?;
    if !(0.0..=1.0).contains(&target) {
        return Err(CoreError::InvalidParameter(format!("bias target {target} outside [0, 1]")));
    }
    let (fast, slow) = components(seed, length, shape, period_s)?;
    let window = (t0 * 3600.0 / period_s).round() as usize;
    let build = |d: f64| -> Vec<f64> { fast.iter().zip(&slow).map(|(f, s)| (f + d * s).clamp(-1.0, 1.0)).collect() };
    let bias = |d: f64| estimate_bias_samples(&build(d), window);
    let (mut lo, mut hi) = (0.0, 1.0);
    while bias(hi)? < target {
        hi *= 2.0;
        if hi > 1e3 {
            return Err(CoreError::InvalidParameter(format!("bias {target} over {t0} h is unattainable")));
        }
    }
    if bias(lo)? > target + profile.tolerance {
        return Err(CoreError::InvalidParameter(format!(
            "fast component alone exceeds bias {target} over {t0} h"
        )));
    }
    for _ in 0..50 {
        let mid = 0.5 * (lo + hi);
        if bias(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let samples = build(hi);
    for &(t, eps) in &profile.targets {
        let got = estimate_bias_samples(&samples, (t * 3600.0 / period_s).round() as usize)?;
        if (got - eps).abs() > profile.tolerance {
            return Err(CoreError::InvalidParameter(format!(
                "bias over {t} h is {got:.3}, target {eps} ± {}",
                profile.tolerance
            )));
        }
    }
    SfcSignal::new(samples, period_s, SignalOrigin::Synthetic)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DispatchOutput {
    /// Inputs after the reserve request, model units (thermal W/m²).
    pub u: DVector<f64>,
    /// Electric change per reserve actuator, W/m².
    pub electric_delta: Vec<f64>,
    /// Largest excursion beyond the input bounds; nonzero means a bug in
    /// the robust layers.
    pub bound_violation: f64,
}

/// `u = u_lv2 + w·r` on every reserve actuator. With one-sided capacities
/// `r` is the down capacity for `w ≥ 0` and the up capacity otherwise.
#[allow(clippy::too_many_arguments)]
pub fn dispatch(
    u_lv2: &DVector<f64>,
    reserve_inputs: &[usize],
    r_up: &[f64],
    r_down: &[f64],
    cop: &[f64],
    w: f64,
    u_min: &DVector<f64>,
    u_max: &DVector<f64>,
) -> Result<DispatchOutput> {
    if !(w.abs() <= 1.0 + 1e-12) {
        return Err(CoreError::InvalidParameter(format!("signal {w} outside [-1, 1]")));
    }
    let n_r = reserve_inputs.len();
    if r_up.len() != n_r || r_down.len() != n_r || cop.len() != n_r {
        return Err(CoreError::Dimension("capacity vectors do not match the reserve actuators".into()));
    }
    let mut u = u_lv2.clone();
    let mut electric_delta = Vec::with_capacity(n_r);
    for (k, &i) in reserve_inputs.iter().enumerate() {
        let r = if w >= 0.0 { r_down[k] } else { r_up[k] };
        u[i] += w * r;
        electric_delta.push(w * r / cop[k]);
    }
    let bound_violation =
        (0..u.len()).map(|i| (u_min[i] - u[i]).max(u[i] - u_max[i]).max(0.0)).fold(0.0, f64::max);
    Ok(DispatchOutput { u, electric_delta, bound_violation })
}
