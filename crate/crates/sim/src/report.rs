//! Closed-loop report and CSV output.

use std::io::Write;
use std::path::Path;

use bldgres_core::uncertainty::{build_pc, build_pec, derive_seed, sample_admissible};

use crate::closed_loop::{run_loop, Feed, Lv1Cache, LoopOutcome};
use crate::error::Result;
use crate::scenario::{Kind, Scenario};
use crate::signal::{step_feed, FeedStats};

const WEEKDAYS: [&str; 7] = ["Mon", "Tue", "Wed", "Thu", "Fri", "Sat", "Sun"];

#[derive(Debug, Clone, PartialEq)]
pub struct DayRow {
    pub day: usize,
    pub weekday: &'static str,
    pub capacity_kw: f64,
    pub up_kw: f64,
    pub down_kw: f64,
    /// Mean electric capacity per building.
    pub per_building_kw: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub name: String,
    pub building_ids: Vec<String>,
    pub days: Vec<DayRow>,
    pub weekly_avg_kw: f64,
    pub energy_scheduled_kwh: f64,
    pub energy_applied_kwh: f64,
    pub baseline_energy_kwh: f64,
    /// Scheduled consumption over the no-reserve MPC run, percent.
    pub consumption_delta_pct: f64,
    pub feed: FeedStats,
    pub signals_checked: usize,
    pub comfort_violations_occupied: usize,
    pub comfort_violations: usize,
    pub input_violations: usize,
    pub max_comfort_violation: f64,
    pub main: LoopOutcome,
}

impl RunReport {
    pub fn violations(&self) -> usize {
        self.comfort_violations + self.input_violations
    }

    pub fn write_summary<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["key", "value"])?;
        let rows: Vec<(&str, String)> = vec![
            ("name", self.name.clone()),
            ("buildings", self.building_ids.join(" ")),
            ("weekly_avg_kw", format!("{:.6}", self.weekly_avg_kw)),
            ("energy_scheduled_kwh", format!("{:.6}", self.energy_scheduled_kwh)),
            ("energy_applied_kwh", format!("{:.6}", self.energy_applied_kwh)),
            ("baseline_energy_kwh", format!("{:.6}", self.baseline_energy_kwh)),
            ("consumption_delta_pct", format!("{:.6}", self.consumption_delta_pct)),
            ("bias_original", format!("{:.6}", self.feed.bias_original)),
            ("bias_sent", format!("{:.6}", self.feed.bias_sent)),
            ("projection_events", self.feed.projection_events.to_string()),
            ("clipped_samples", self.feed.clipped.to_string()),
            ("signals_checked", self.signals_checked.to_string()),
            ("comfort_violations_occupied", self.comfort_violations_occupied.to_string()),
            ("comfort_violations", self.comfort_violations.to_string()),
            ("input_violations", self.input_violations.to_string()),
            ("max_comfort_violation", format!("{:.9}", self.max_comfort_violation)),
        ];
        for (k, v) in rows {
            w.write_record([k, v.as_str()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_capacities<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["day".to_string(), "weekday".into(), "capacity_kw".into(), "up_kw".into(), "down_kw".into()];
        header.extend(self.building_ids.iter().enumerate().map(|(b, id)| format!("b{b}_{id}_kw")));
        w.write_record(&header)?;
        for d in &self.days {
            let mut rec = vec![d.day.to_string(), d.weekday.to_string()];
            rec.extend([d.capacity_kw, d.up_kw, d.down_kw].map(|v| format!("{v:.6}")));
            rec.extend(d.per_building_kw.iter().map(|v| format!("{v:.6}")));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// `summary.csv`, `capacities.csv` and `steps.csv` in `dir`.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        self.write_summary(std::fs::File::create(dir.join("summary.csv"))?)?;
        self.write_capacities(std::fs::File::create(dir.join("capacities.csv"))?)?;
        self.main.log.write_csv(std::fs::File::create(dir.join("steps.csv"))?)?;
        Ok(())
    }
}

fn day_rows(sc: &Scenario, out: &LoopOutcome) -> Vec<DayRow> {
    let spd = sc.steps_per_day();
    out.schedules
        .iter()
        .enumerate()
        .map(|(day, s)| {
            let per_building_kw = (0..sc.models.len())
                .map(|b| {
                    s.slots
                        .iter()
                        .filter(|sl| sl.building == b)
                        .map(|sl| sl.kw_per_unit * (sl.up.iter().sum::<f64>() + sl.down.iter().sum::<f64>()) / (2 * spd) as f64)
                        .sum()
                })
                .collect();
            DayRow {
                day,
                weekday: WEEKDAYS[(sc.config.start_weekday + day) % 7],
                capacity_kw: s.mean_capacity_kw(0..spd),
                up_kw: s.mean_up_kw(0..spd),
                down_kw: s.mean_down_kw(0..spd),
                per_building_kw,
            }
        })
        .collect()
}

/// Admissible per-step signals over the whole run for the violation check.
pub fn monte_carlo_signals(sc: &Scenario, count: usize) -> Result<Vec<Vec<f64>>> {
    let n = sc.config.days * sc.steps_per_day();
    let set = match sc.kind() {
        Kind::Pec { eps, t_steps } => build_pec(n, eps, t_steps)?,
        _ => build_pc(n)?,
    };
    Ok(sample_admissible(&set, derive_seed(sc.config.master_seed, 11), count))
}

/// Closed loop on the configured signal feed, the no-reserve baseline, and
/// the configured Monte Carlo and adversarial signals.
pub fn run_closed_loop(sc: &Scenario) -> Result<RunReport> {
    let kind = sc.kind();
    let (feed, stats) = step_feed(&sc.config, kind)?;
    let mut cache = Lv1Cache::default();
    let main = run_loop(sc, &Feed::Steps(feed), true, Some(&mut cache))?;
    let baseline = run_loop(sc, &Feed::Zero, false, None)?;
    let mut counts = (main.comfort_violations_occupied, main.comfort_violations, main.input_violations);
    let mut max_cv = main.max_comfort_violation;
    let mut checked = 1;
    let mut extra: Vec<Feed> =
        monte_carlo_signals(sc, sc.config.closed_loop.mc_signals)?.into_iter().map(Feed::Steps).collect();
    if sc.config.closed_loop.adversary {
        extra.push(Feed::Adversary);
    }
    for f in &extra {
        let o = run_loop(sc, f, true, Some(&mut cache))?;
        counts.0 += o.comfort_violations_occupied;
        counts.1 += o.comfort_violations;
        counts.2 += o.input_violations;
        max_cv = max_cv.max(o.max_comfort_violation);
        checked += 1;
    }
    let days = day_rows(sc, &main);
    let weekly_avg_kw = days.iter().map(|d| d.capacity_kw).sum::<f64>() / days.len().max(1) as f64;
    let delta = if baseline.energy_scheduled_kwh > 0.0 {
        100.0 * (main.energy_scheduled_kwh / baseline.energy_scheduled_kwh - 1.0)
    } else {
        0.0
    };
    Ok(RunReport {
        name: sc.config.name.clone(),
        building_ids: sc.ids.clone(),
        days,
        weekly_avg_kw,
        energy_scheduled_kwh: main.energy_scheduled_kwh,
        energy_applied_kwh: main.energy_applied_kwh,
        baseline_energy_kwh: baseline.energy_scheduled_kwh,
        consumption_delta_pct: delta,
        feed: stats,
        signals_checked: checked,
        comfort_violations_occupied: counts.0,
        comfort_violations: counts.1,
        input_violations: counts.2,
        max_comfort_violation: max_cv,
        main,
    })
}
