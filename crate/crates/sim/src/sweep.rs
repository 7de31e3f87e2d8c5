//! Lv1-only sweeps and fleet extrapolation.

use crate::config::ProductLength;
use crate::error::{Result, SimError};
use crate::scenario::{Kind, Scenario};

#[derive(Debug, Clone, PartialEq)]
pub struct BidRow {
    pub ratio: f64,
    pub pc_kw: f64,
    pub pec_kw: f64,
}

fn pec_kind(sc: &Scenario) -> Kind {
    Kind::Pec { eps: sc.config.uncertainty.eps, t_steps: sc.config.t_steps() }
}

/// Capacity per k/c ratio for box and polytope signal sets, Lv1 only.
/// Each cell is the horizon mean over `days` daily solves that all start
/// from the energy-efficient trajectory.
pub fn sweep_bid_curve(sc: &Scenario, ratios: &[f64], days: usize) -> Result<Vec<BidRow>> {
    if ratios.windows(2).any(|w| w[1] < w[0]) {
        return Err(SimError::Config("ratios must be sorted".into()));
    }
    let len = sc.config.product.length;
    let states = sc.nominal_states(days)?;
    ratios
        .iter()
        .map(|&r| {
            Ok(BidRow {
                ratio: r,
                pc_kw: sc.horizon_capacity(&states, Kind::Pc, len, Some(r))?,
                pec_kw: sc.horizon_capacity(&states, pec_kind(sc), len, Some(r))?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridCell {
    pub t_hours: f64,
    pub eps: f64,
    pub kw: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TeGrid {
    pub pc_kw: f64,
    pub cells: Vec<GridCell>,
}

impl TeGrid {
    /// Cells whose capacity grows with eps at fixed T.
    pub fn eps_increases(&self, tol: f64) -> Vec<(&GridCell, &GridCell)> {
        self.cells
            .windows(2)
            .filter(|w| w[0].t_hours == w[1].t_hours && w[1].eps > w[0].eps && w[1].kw > w[0].kw + tol)
            .map(|w| (&w[0], &w[1]))
            .collect()
    }
}

/// Daily symmetric capacities over a (T, eps) grid, Lv1 only, measured
/// like [`sweep_bid_curve`].
pub fn sweep_te_grid(sc: &Scenario, t_hours: &[f64], eps: &[f64], days: usize) -> Result<TeGrid> {
    let step_h = sc.config.horizon.step_minutes as f64 / 60.0;
    let spd = sc.steps_per_day();
    let states = sc.nominal_states(days)?;
    let pc_kw = sc.horizon_capacity(&states, Kind::Pc, ProductLength::Daily, None)?;
    let mut cells = Vec::new();
    for &t in t_hours {
        let steps = t / step_h;
        if (steps - steps.round()).abs() > 1e-9 || steps.round() < 2.0 || spd % steps.round() as usize != 0 {
            return Err(SimError::Config(format!("T = {t} h is not a whole number of steps tiling a day")));
        }
        let mut sorted = eps.to_vec();
        sorted.sort_by(f64::total_cmp);
        for &e in &sorted {
            let kind = Kind::Pec { eps: e, t_steps: steps.round() as usize };
            let kw = sc.horizon_capacity(&states, kind, ProductLength::Daily, None)?;
            cells.push(GridCell { t_hours: t, eps: e, kw });
        }
    }
    Ok(TeGrid { pc_kw, cells })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FleetEstimate {
    pub buildings: u64,
    /// Linear scaling of one aggregation; a rough estimate only.
    pub rough: bool,
}

/// Buildings needed for `target_mw` when an aggregation of `size`
/// buildings offers `avg_kw` on average.
pub fn extrapolate_fleet(avg_kw: f64, size: usize, target_mw: f64) -> Result<FleetEstimate> {
    if target_mw <= 0.0 {
        return Ok(FleetEstimate { buildings: 0, rough: true });
    }
    if !(avg_kw > 0.0) || size == 0 {
        return Err(SimError::Config("extrapolation needs a positive average capacity".into()));
    }
    let n = (target_mw * 1000.0 / avg_kw * size as f64).ceil();
    Ok(FleetEstimate { buildings: n as u64, rough: true })
}
