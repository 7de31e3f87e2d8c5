use crate::error::{CoreError, Result};

/// Electricity price `c` (per kWh) and capacity payment `k` (per kW and
/// hour), one entry per step. Both apply to electric quantities: thermal
/// inputs are converted with the actuator COP and floor area.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceVectors {
    pub c: Vec<f64>,
    pub k: Vec<f64>,
}

impl PriceVectors {
    pub fn flat(n: usize, c: f64, ratio: f64) -> Self {
        PriceVectors { c: vec![c; n], k: vec![c * ratio; n] }
    }

    /// Day/night tariff: `night_c` for steps whose hour of day lies outside
    /// `[day_start_h, day_end_h)`.
    pub fn two_tier(n: usize, step_hours: f64, day_c: f64, night_c: f64, day_start_h: f64, day_end_h: f64, k: f64) -> Self {
        let c = (0..n)
            .map(|t| {
                let h = (t as f64 * step_hours) % 24.0;
                if h >= day_start_h && h < day_end_h {
                    day_c
                } else {
                    night_c
                }
            })
            .collect();
        PriceVectors { c, k: vec![k; n] }
    }

    pub fn len(&self) -> usize {
        self.c.len()
    }

    pub fn is_empty(&self) -> bool {
        self.c.is_empty()
    }

    pub fn validate(&self, horizon: usize) -> Result<()> {
        if self.c.len() < horizon || self.k.len() < horizon {
            return Err(CoreError::Dimension(format!("price vectors shorter than horizon {horizon}")));
        }
        if self.c.iter().any(|&c| !(c > 0.0 && c.is_finite())) {
            return Err(CoreError::InvalidParameter("electricity prices must be positive".into()));
        }
        if self.k.iter().any(|&k| !(k >= 0.0 && k.is_finite())) {
            return Err(CoreError::InvalidParameter("capacity payments must be nonnegative".into()));
        }
        Ok(())
    }

    pub fn slice(&self, start: usize, len: usize) -> PriceVectors {
        let take = |v: &Vec<f64>| (start..start + len).map(|t| v[t.min(v.len() - 1)]).collect();
        PriceVectors { c: take(&self.c), k: take(&self.k) }
    }
}
