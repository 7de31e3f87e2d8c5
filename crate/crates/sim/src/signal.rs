//! Signal sources, filtering and the per-step feed of a run.

use bldgres_core::dispatch::{
    decompose, design_filter, estimate_bias, generate_synthetic_signal, project_onto_pec, BiasProfile, SfcSignal,
    SAMPLE_PERIOD_S,
};
use bldgres_core::uncertainty::derive_seed;

use crate::config::ScenarioConfig;
use crate::error::Result;
use crate::scenario::Kind;

/// Original regulation signal of a scenario: the configured file or a
/// synthetic trace of `samples` samples.
pub fn source_signal(cfg: &ScenarioConfig, samples: usize) -> Result<SfcSignal> {
    if let Some(path) = &cfg.signal.file {
        return Ok(SfcSignal::read_csv(std::fs::File::open(path)?)?);
    }
    let seed = cfg.signal.seed.unwrap_or_else(|| derive_seed(cfg.master_seed, 7));
    Ok(generate_synthetic_signal(seed, samples, &BiasProfile::single(2.0, cfg.signal.bias_2h))?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeedStats {
    pub projection_events: usize,
    pub clipped: usize,
    pub bias_original: f64,
    pub bias_sent: f64,
}

/// Per-step signal means sent to the aggregation: the original signal for
/// box products, the projected high band for polytope products.
pub fn step_feed(cfg: &ScenarioConfig, kind: Kind) -> Result<(Vec<f64>, FeedStats)> {
    let step_s = cfg.horizon.step_minutes as f64 * 60.0;
    let per_step = (step_s / SAMPLE_PERIOD_S).round() as usize;
    let run = cfg.days * cfg.steps_per_day() * per_step;
    let t_h = cfg.uncertainty.t_hours;
    let spec = design_filter(t_h, cfg.signal.filter_order, cfg.signal.ripple_db, SAMPLE_PERIOD_S)?;
    let original = source_signal(cfg, run + spec.transient_samples() + 1)?;
    let bias_original = estimate_bias(&original, t_h)?;
    let (sent, events, clipped) = match kind {
        Kind::Pec { eps, .. } => {
            let d = decompose(&original, &spec)?;
            let (p, events) = project_onto_pec(&d.hf, eps, d.hf.samples_per(t_h))?;
            (p, events, d.clipped)
        }
        _ => {
            let s = original.samples[original.len().saturating_sub(run)..].to_vec();
            (SfcSignal { samples: s, ..original.clone() }, 0, 0)
        }
    };
    if sent.len() < run {
        return Err(crate::error::SimError::Config(format!("signal has {} of {run} samples", sent.len())));
    }
    let sent = SfcSignal { samples: sent.samples[..run].to_vec(), ..sent };
    let bias_sent = estimate_bias(&sent, t_h)?;
    let feed = sent.block_means(per_step);
    Ok((feed, FeedStats { projection_events: events, clipped, bias_original, bias_sent }))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiasRow {
    pub t_hours: f64,
    pub original: f64,
    pub high_band: f64,
}

/// Bias of a signal and of its high band for each averaging period.
pub fn bias_table(signal: &SfcSignal, periods: &[f64], order: usize, ripple_db: f64) -> Result<Vec<BiasRow>> {
    periods
        .iter()
        .map(|&t| {
            let spec = design_filter(t, order, ripple_db, signal.period_s)?;
            let d = decompose(signal, &spec)?;
            Ok(BiasRow { t_hours: t, original: estimate_bias(signal, t)?, high_band: estimate_bias(&d.hf, t)? })
        })
        .collect()
}
