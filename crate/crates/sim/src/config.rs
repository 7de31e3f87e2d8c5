use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Season {
    Winter,
    Summer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SetChoice {
    Pc,
    Pec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProductLength {
    Daily,
    Hourly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriceProfile {
    Flat,
    TwoTier,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuildingSpec {
    pub archetype: String,
    #[serde(default = "one")]
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HorizonSpec {
    pub n1: usize,
    pub n2: usize,
    pub step_minutes: u32,
    pub model_order: usize,
}

impl Default for HorizonSpec {
    fn default() -> Self {
        HorizonSpec { n1: 96, n2: 48, step_minutes: 30, model_order: 4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UncertaintySpec {
    pub kind: SetChoice,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default = "default_t")]
    pub t_hours: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProductSpec {
    pub length: ProductLength,
    pub symmetric: bool,
}

impl Default for ProductSpec {
    fn default() -> Self {
        ProductSpec { length: ProductLength::Daily, symmetric: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriceSpec {
    /// Electricity price per kWh.
    pub c: f64,
    /// Capacity payment over electricity price, `k/c`.
    pub ratio: f64,
    #[serde(default = "flat")]
    pub profile: PriceProfile,
    #[serde(default)]
    pub night_c: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalSpec {
    /// CSV with `timestamp_s,w`; a synthetic signal is generated otherwise.
    #[serde(default)]
    pub file: Option<String>,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Bias of the synthetic original signal over two hours.
    #[serde(default = "default_signal_bias")]
    pub bias_2h: f64,
    #[serde(default = "default_order")]
    pub filter_order: usize,
    #[serde(default = "default_ripple")]
    pub ripple_db: f64,
}

impl Default for SignalSpec {
    fn default() -> Self {
        SignalSpec {
            file: None,
            seed: None,
            bias_2h: default_signal_bias(),
            filter_order: default_order(),
            ripple_db: default_ripple(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClosedLoopSpec {
    /// Extra admissible signals sampled for the violation check.
    #[serde(default)]
    pub mc_signals: usize,
    #[serde(default)]
    pub adversary: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub season: Season,
    #[serde(default = "default_days")]
    pub days: usize,
    /// 0 is Monday.
    #[serde(default)]
    pub start_weekday: usize,
    #[serde(default)]
    pub master_seed: u64,
    pub buildings: Vec<BuildingSpec>,
    #[serde(default)]
    pub horizon: HorizonSpec,
    pub uncertainty: UncertaintySpec,
    #[serde(default)]
    pub product: ProductSpec,
    pub prices: PriceSpec,
    #[serde(default)]
    pub signal: SignalSpec,
    #[serde(default)]
    pub closed_loop: ClosedLoopSpec,
}

fn one() -> usize {
    1
}
fn default_eps() -> f64 {
    0.3
}
fn default_t() -> f64 {
    2.0
}
fn default_days() -> usize {
    7
}
fn flat() -> PriceProfile {
    PriceProfile::Flat
}
fn default_signal_bias() -> f64 {
    0.78
}
fn default_order() -> usize {
    3
}
fn default_ripple() -> f64 {
    0.5
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| SimError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| SimError::Config(format!("{}: {e}", path.as_ref().display())))?;
        Self::from_toml(&text)
    }

    pub fn steps_per_day(&self) -> usize {
        (24 * 60 / self.horizon.step_minutes) as usize
    }

    /// Averaging window in steps.
    pub fn t_steps(&self) -> usize {
        (self.uncertainty.t_hours * 60.0 / self.horizon.step_minutes as f64).round() as usize
    }

    pub fn building_ids(&self) -> Vec<String> {
        self.buildings.iter().flat_map(|b| std::iter::repeat(b.archetype.clone()).take(b.count)).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(SimError::Config(m));
        let h = &self.horizon;
        if h.step_minutes == 0 || (24 * 60) % h.step_minutes != 0 {
            return bad(format!("step of {} min does not divide a day", h.step_minutes));
        }
        let spd = self.steps_per_day();
        if h.n2 == 0 || h.n1 < h.n2 {
            return bad(format!("need n1 ≥ n2 > 0, got n1 = {} and n2 = {}", h.n1, h.n2));
        }
        if h.n1 < spd {
            return bad("Lv1 horizon must cover the committed day".into());
        }
        let block = match self.product.length {
            ProductLength::Daily => spd,
            ProductLength::Hourly => (60 / h.step_minutes).max(1) as usize,
        };
        if h.n1 % block != 0 {
            return bad(format!("product blocks of {block} steps do not divide n1 = {}", h.n1));
        }
        if !self.product.symmetric && self.uncertainty.kind == SetChoice::Pec {
            return bad("asymmetric products need the box signal set".into());
        }
        if self.uncertainty.kind == SetChoice::Pec {
            let u = &self.uncertainty;
            if !(u.eps > 0.0 && u.eps <= 1.0) {
                return bad(format!("eps {} outside (0, 1]", u.eps));
            }
            let exact = u.t_hours * 60.0 / h.step_minutes as f64;
            if (exact - exact.round()).abs() > 1e-9 || self.t_steps() < 2 || spd % self.t_steps() != 0 {
                return bad(format!("T = {} h must be whole steps (at least two) that tile a day", u.t_hours));
            }
        }
        if self.buildings.is_empty() || self.buildings.iter().any(|b| b.count == 0) {
            return bad("need at least one building".into());
        }
        if self.days == 0 {
            return bad("run must last at least one day".into());
        }
        if !(self.prices.c > 0.0) || !(self.prices.ratio >= 0.0) {
            return bad("prices must be positive and k/c nonnegative".into());
        }
        if self.prices.profile == PriceProfile::TwoTier && self.prices.night_c.is_none() {
            return bad("two-tier prices need night_c".into());
        }
        if self.start_weekday > 6 {
            return bad("start_weekday is 0 (Monday) to 6".into());
        }
        Ok(())
    }
}
