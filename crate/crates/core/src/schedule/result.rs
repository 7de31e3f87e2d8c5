use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::thermal::{RowTag, StackedSystem};

/// Capacities of one reserve actuator in thermal W/m², per step.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotSchedule {
    pub building: usize,
    pub input: usize,
    pub slot: usize,
    /// Electric kW per unit of thermal capacity.
    pub kw_per_unit: f64,
    /// Up-reserve (consumption decrease), used when `w < 0`.
    pub up: Vec<f64>,
    /// Down-reserve (consumption increase), used when `w ≥ 0`.
    pub down: Vec<f64>,
}

/// Reserve capacities of an aggregation. In symmetric mode `up == down`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReserveSchedule {
    pub horizon: usize,
    pub symmetric: bool,
    pub slots: Vec<SlotSchedule>,
}

impl ReserveSchedule {
    pub fn zeros(system: &StackedSystem, symmetric: bool) -> Self {
        let mut slots = Vec::new();
        for b in &system.blocks {
            for (s, &input) in b.reserve_inputs.iter().enumerate() {
                slots.push(SlotSchedule {
                    building: b.building,
                    input,
                    slot: s,
                    kw_per_unit: b.electric_kw_per_unit(s),
                    up: vec![0.0; system.horizon],
                    down: vec![0.0; system.horizon],
                });
            }
        }
        ReserveSchedule { horizon: system.horizon, symmetric, slots }
    }

    pub fn slot(&self, building: usize, slot: usize) -> Option<&SlotSchedule> {
        self.slots.iter().find(|s| s.building == building && s.slot == slot)
    }

    /// Electric up and down capacity in kW at step `t`.
    pub fn capacity_kw(&self, t: usize) -> (f64, f64) {
        let up = self.slots.iter().map(|s| s.kw_per_unit * s.up[t]).sum();
        let down = self.slots.iter().map(|s| s.kw_per_unit * s.down[t]).sum();
        (up, down)
    }

    /// Mean symmetric band in kW over `range` (the mean of up and down).
    pub fn mean_capacity_kw(&self, range: std::ops::Range<usize>) -> f64 {
        let n = range.len().max(1) as f64;
        range.map(|t| {
            let (u, d) = self.capacity_kw(t);
            0.5 * (u + d)
        })
        .sum::<f64>()
            / n
    }

    pub fn mean_up_kw(&self, range: std::ops::Range<usize>) -> f64 {
        let n = range.len().max(1) as f64;
        range.map(|t| self.capacity_kw(t).0).sum::<f64>() / n
    }

    pub fn mean_down_kw(&self, range: std::ops::Range<usize>) -> f64 {
        let n = range.len().max(1) as f64;
        range.map(|t| self.capacity_kw(t).1).sum::<f64>() / n
    }

    /// Mean capacity over the whole horizon.
    pub fn total_mean_kw(&self) -> f64 {
        self.mean_capacity_kw(0..self.horizon)
    }

    /// Per building `(up, down)` matrices of shape `horizon × n_r`.
    pub fn building_matrices(&self, building: usize, n_r: usize) -> (DMatrix<f64>, DMatrix<f64>) {
        let mut up = DMatrix::zeros(self.horizon, n_r);
        let mut down = DMatrix::zeros(self.horizon, n_r);
        for s in self.slots.iter().filter(|s| s.building == building) {
            for t in 0..self.horizon {
                up[(t, s.slot)] = s.up[t];
                down[(t, s.slot)] = s.down[t];
            }
        }
        (up, down)
    }

    /// Reserve deviations `Δu` of `system` for the signal `w` (down
    /// capacity for `w ≥ 0`, up capacity otherwise).
    pub fn deviation(&self, system: &StackedSystem, w: &[f64]) -> DVector<f64> {
        let mut du = DVector::zeros(system.dim_du());
        let offsets = system.offsets();
        for s in &self.slots {
            let (bi, b) = system.blocks.iter().enumerate().find(|(_, b)| b.building == s.building).unwrap();
            let d = offsets[bi].2;
            for t in 0..self.horizon {
                let r = if w[t] >= 0.0 { s.down[t] } else { s.up[t] };
                du[d + t * b.n_r + s.slot] = r * w[t];
            }
        }
        du
    }

    /// Steps `start..start+len`; steps past the horizon carry no reserve.
    pub fn window(&self, start: usize, len: usize) -> ReserveSchedule {
        let take = |v: &Vec<f64>| (start..start + len).map(|t| v.get(t).copied().unwrap_or(0.0)).collect();
        ReserveSchedule {
            horizon: len,
            symmetric: self.symmetric,
            slots: self
                .slots
                .iter()
                .map(|s| SlotSchedule { up: take(&s.up), down: take(&s.down), ..s.clone() })
                .collect(),
        }
    }

    /// Snaps capacities below `tol` to zero.
    pub fn clean(&mut self, tol: f64) {
        for s in &mut self.slots {
            for v in s.up.iter_mut().chain(s.down.iter_mut()) {
                if *v < tol {
                    *v = 0.0;
                }
            }
        }
    }
}

/// Dual block of one stacked row: multipliers of the window rows (upper and
/// lower per window) followed by the box rows (`w ≤ 1`, then `−w ≤ 1`).
#[derive(Debug, Clone, PartialEq)]
pub struct RowDual {
    pub tag: RowTag,
    pub lambda: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ScheduleStats {
    pub lp_rows: usize,
    pub lp_vars: usize,
    pub rounds: usize,
    pub cuts: usize,
    pub iterations: usize,
}

/// Outcome of a scheduling solve.
#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleResult {
    /// Baseline inputs per building, step-major.
    pub u: Vec<DVector<f64>>,
    pub schedule: ReserveSchedule,
    /// `cᵀu − kᵀr` in currency.
    pub objective: f64,
    pub energy_cost: f64,
    pub payment: f64,
    pub duals: Option<Vec<RowDual>>,
    pub stats: ScheduleStats,
}

impl ScheduleResult {
    /// Baseline inputs of all buildings stacked like [`StackedSystem::dense_g`].
    pub fn u_stacked(&self) -> DVector<f64> {
        DVector::from_iterator(self.u.iter().map(|u| u.len()).sum(), self.u.iter().flat_map(|u| u.iter().copied()))
    }
}

/// Writes `building, actuator, step, r_up, r_down, u_baseline` rows followed
/// by a summary block.
pub fn write_schedule_csv<W: std::io::Write>(
    result: &ScheduleResult,
    system: &StackedSystem,
    steps_per_day: usize,
    writer: W,
) -> Result<()> {
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(writer);
    w.write_record(["building", "actuator", "step", "r_up", "r_down", "u_baseline"])?;
    for s in &result.schedule.slots {
        let (bi, b) = system.blocks.iter().enumerate().find(|(_, b)| b.building == s.building).unwrap();
        for t in 0..result.schedule.horizon {
            w.write_record(&[
                s.building.to_string(),
                s.input.to_string(),
                t.to_string(),
                format!("{:.6}", s.up[t]),
                format!("{:.6}", s.down[t]),
                format!("{:.6}", result.u[bi][t * b.n_u + s.input]),
            ])?;
        }
    }
    w.write_record(["summary", "objective", &format!("{:.6}", result.objective)])?;
    w.write_record(["summary", "energy_cost", &format!("{:.6}", result.energy_cost)])?;
    w.write_record(["summary", "payment", &format!("{:.6}", result.payment)])?;
    let days = result.schedule.horizon.div_ceil(steps_per_day.max(1));
    for d in 0..days {
        let r = d * steps_per_day..((d + 1) * steps_per_day).min(result.schedule.horizon);
        w.write_record([
            "summary".to_string(),
            format!("day{d}_capacity_kw"),
            format!("{:.6}", result.schedule.mean_capacity_kw(r)),
        ])?;
    }
    w.flush()?;
    Ok(())
}
