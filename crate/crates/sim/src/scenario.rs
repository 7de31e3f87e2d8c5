//! Building models, traces and Lv1 solves for one configured scenario.

use bldgres_core::schedule::{
    build_structure_matrix, Formulation, Granularity, Lv1Engine, PriceVectors, ScheduleOptions, ScheduleResult,
    StructureMatrix,
};
use bldgres_core::thermal::{
    archetype_params, make_bilinear_archetype, stack_aggregation, stack_building_id, DisturbanceTrace, LtvBuildingModel,
    StackedSystem, BLINDS, COOLING, HEATING,
};
use bldgres_core::uncertainty::build_pec;
use nalgebra::DVector;

use crate::config::{PriceProfile, ProductLength, ScenarioConfig, Season, SetChoice};
use crate::error::{Result, SimError};
use crate::weather::{blinds, comfort_band, season_trace, OFFICE_HOURS};

/// Which robust counterpart a Lv1 solve uses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kind {
    Pc,
    Pec { eps: f64, t_steps: usize },
    Asymmetric,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub ids: Vec<String>,
    pub models: Vec<LtvBuildingModel>,
    /// One trace per building covering the run plus one Lv1 horizon.
    pub traces: Vec<DisturbanceTrace>,
    pub x0: Vec<DVector<f64>>,
    pub prices: PriceVectors,
}

/// Steady state whose room temperature sits at `target`, driven by the
/// reserve actuator alone.
fn initial_state(model: &LtvBuildingModel, v: &DVector<f64>, input: usize, target: f64) -> Result<DVector<f64>> {
    let mut u = DVector::zeros(model.n_u());
    for i in 0..model.n_u() {
        u[i] = model.u_min[i];
    }
    let base = model.steady_state(&u, v)?;
    let mut probe = u.clone();
    probe[input] += 1.0;
    let slope = model.steady_state(&probe, v)?[0] - base[0];
    if slope.abs() > 1e-12 {
        u[input] = (u[input] + (target - base[0]) / slope).clamp(model.u_min[input], model.u_max[input]);
    }
    Ok(model.steady_state(&u, v)?)
}

impl Scenario {
    pub fn build(config: &ScenarioConfig) -> Result<Self> {
        config.validate()?;
        let h = &config.horizon;
        let spd = config.steps_per_day();
        let len = (config.days + 1) * spd + h.n1.saturating_sub(spd);
        let band = comfort_band(config.season);
        let target = 0.5 * (band.0 + band.1);
        let reserve_input = match config.season {
            Season::Winter => HEATING,
            Season::Summer => COOLING,
        };
        let ids = config.building_ids();
        let mut models = Vec::new();
        let mut traces = Vec::new();
        let mut x0 = Vec::new();
        for id in &ids {
            let params = archetype_params(id)?;
            let model = make_bilinear_archetype(id, h.model_order, h.step_minutes)?
                .with_fixed_input(BLINDS, blinds(config.season))?
                .with_reserve_actuators(&[reserve_input])?;
            let trace = season_trace(config.season, config.start_weekday, len, h.step_minutes, &params);
            let mean = |v: &[f64]| v[..spd].iter().sum::<f64>() / spd as f64;
            let v = DVector::from_vec(vec![mean(&trace.ambient), mean(&trace.solar), mean(&trace.gains)]);
            x0.push(initial_state(&model, &v, reserve_input, target)?);
            models.push(model);
            traces.push(trace);
        }
        let p = &config.prices;
        let step_h = h.step_minutes as f64 / 60.0;
        let mut prices = match p.profile {
            PriceProfile::Flat => PriceVectors::flat(len, p.c, p.ratio),
            PriceProfile::TwoTier => PriceVectors::two_tier(
                len,
                step_h,
                p.c,
                p.night_c.unwrap_or(p.c),
                OFFICE_HOURS.0,
                OFFICE_HOURS.1,
                0.0,
            ),
        };
        if p.profile == PriceProfile::TwoTier {
            // same k/c in the mean
            let mean_c = prices.c.iter().sum::<f64>() / len as f64;
            prices.k = vec![p.ratio * mean_c; len];
        }
        Ok(Scenario { config: config.clone(), ids, models, traces, x0, prices })
    }

    pub fn steps_per_day(&self) -> usize {
        self.config.steps_per_day()
    }

    /// Robust counterpart selected by the configuration.
    pub fn kind(&self) -> Kind {
        let u = &self.config.uncertainty;
        match (u.kind, self.config.product.symmetric) {
            (SetChoice::Pec, _) => Kind::Pec { eps: u.eps, t_steps: self.config.t_steps() },
            (SetChoice::Pc, true) => Kind::Pc,
            (SetChoice::Pc, false) => Kind::Asymmetric,
        }
    }

    pub fn structure(&self, length: ProductLength) -> Result<StructureMatrix> {
        let g = match length {
            ProductLength::Daily => Granularity::Daily,
            ProductLength::Hourly => Granularity::Hourly,
        };
        Ok(build_structure_matrix(self.config.horizon.n1, g, self.steps_per_day(), true)?)
    }

    /// Stacked Lv1 system from midnight of `day`.
    pub fn stacked(&self, day: usize, states: &[DVector<f64>]) -> Result<StackedSystem> {
        let n1 = self.config.horizon.n1;
        let start = day * self.steps_per_day();
        let mut blocks = Vec::with_capacity(self.models.len());
        for (b, (m, tr)) in self.models.iter().zip(&self.traces).enumerate() {
            let slice = tr.slice(start, n1)?;
            blocks.push(stack_building_id(m, &states[b], &slice, n1, b)?.into());
        }
        Ok(stack_aggregation(&blocks)?)
    }

    pub fn formulation(&self, kind: Kind) -> Result<Formulation> {
        let n1 = self.config.horizon.n1;
        Ok(match kind {
            Kind::Pc => Formulation::Signed,
            Kind::Asymmetric => Formulation::Asymmetric,
            Kind::Pec { eps, t_steps } => Formulation::Pec(build_pec(n1, eps, t_steps)?),
        })
    }

    /// Lv1 engine for `day` from `states`, optionally with a different k/c.
    pub fn lv1_engine(
        &self,
        day: usize,
        states: &[DVector<f64>],
        kind: Kind,
        length: ProductLength,
        ratio: Option<f64>,
    ) -> Result<Lv1Engine> {
        let sys = self.stacked(day, states)?;
        let start = day * self.steps_per_day();
        let mut prices = self.prices.slice(start, self.config.horizon.n1);
        if let Some(r) = ratio {
            let mean_c = self.prices.c.iter().sum::<f64>() / self.prices.c.len() as f64;
            prices.k = vec![r * mean_c; prices.k.len()];
        }
        let opts = ScheduleOptions { with_duals: false, ..Default::default() };
        Ok(Lv1Engine::new(&sys, &prices, &self.structure(length)?, self.formulation(kind)?, opts)?)
    }

    pub fn solve_day(
        &self,
        day: usize,
        states: &[DVector<f64>],
        kind: Kind,
        length: ProductLength,
        ratio: Option<f64>,
    ) -> Result<ScheduleResult> {
        self.lv1_engine(day, states, kind, length, ratio)?
            .solve()
            .map_err(|source| SimError::Day { day, source })
    }

    /// State after applying the first `steps` inputs of a plan with no
    /// reserve request.
    pub fn advance(&self, day: usize, states: &[DVector<f64>], plan: &ScheduleResult, steps: usize) -> Vec<DVector<f64>> {
        let start = day * self.steps_per_day();
        let n_u = |b: usize| self.models[b].n_u();
        (0..self.models.len())
            .map(|b| {
                let m = &self.models[b];
                let mut x = states[b].clone();
                for t in 0..steps {
                    let u = DVector::from_iterator(n_u(b), plan.u[b].iter().skip(t * n_u(b)).take(n_u(b)).copied());
                    x = m.step(0, &x, &u, &self.traces[b].v_at(start + t));
                }
                x
            })
            .collect()
    }

    /// Lv1-only run: each day is scheduled from the state reached by the
    /// previous day's plan. Returns the committed mean capacity per day (kW).
    pub fn lv1_only(&self, kind: Kind, length: ProductLength, ratio: Option<f64>, days: usize) -> Result<Vec<f64>> {
        let spd = self.steps_per_day();
        let mut states = self.x0.clone();
        let mut out = Vec::with_capacity(days);
        for day in 0..days {
            let res = self.solve_day(day, &states, kind, length, ratio)?;
            out.push(res.schedule.mean_capacity_kw(0..spd));
            states = self.advance(day, &states, &res, spd);
        }
        Ok(out)
    }

    /// States at each midnight along the energy-efficient plan (no capacity
    /// payment), one entry per day plus the final one.
    pub fn nominal_states(&self, days: usize) -> Result<Vec<Vec<DVector<f64>>>> {
        let spd = self.steps_per_day();
        let mut out = vec![self.x0.clone()];
        for day in 0..days {
            let res = self.solve_day(day, &out[day], Kind::Pc, ProductLength::Daily, Some(0.0))?;
            out.push(self.advance(day, &out[day], &res, spd));
        }
        Ok(out)
    }

    /// Mean capacity (kW) over whole Lv1 horizons, each solved from the
    /// given midnight states; every setting sees the same starting points.
    pub fn horizon_capacity(
        &self,
        states: &[Vec<DVector<f64>>],
        kind: Kind,
        length: ProductLength,
        ratio: Option<f64>,
    ) -> Result<f64> {
        if states.len() < 2 {
            return Err(SimError::Config("need the states of at least one day".into()));
        }
        let days = states.len() - 1;
        let n1 = self.config.horizon.n1;
        let mut total = 0.0;
        for (day, st) in states.iter().take(days).enumerate() {
            total += self.solve_day(day, st, kind, length, ratio)?.schedule.mean_capacity_kw(0..n1);
        }
        Ok(total / days as f64)
    }
}
