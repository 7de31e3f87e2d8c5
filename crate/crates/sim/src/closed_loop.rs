//! Daily Lv1 scheduling, half-hourly Lv2 MPC and per-step dispatch.

use bldgres_core::mpc::{receding_horizon_run, CommittedReserve, FeedView, RhBuilding, RhConfig, RhLog, SignalModel};
use bldgres_core::schedule::{Lv1Engine, ReserveSchedule};
use nalgebra::DVector;

use crate::error::{Result, SimError};
use crate::scenario::{Kind, Scenario};

/// Realized signal per optimization step.
#[derive(Debug, Clone, PartialEq)]
pub enum Feed {
    Zero,
    /// One value per step of the run.
    Steps(Vec<f64>),
    /// Per step, the admissible extreme leaving the smaller constraint
    /// slack over all buildings after the step.
    Adversary,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LoopOutcome {
    /// Committed capacities per day (one day long each).
    pub schedules: Vec<ReserveSchedule>,
    pub log: RhLog,
    pub comfort_violations_occupied: usize,
    pub comfort_violations: usize,
    pub input_violations: usize,
    pub max_comfort_violation: f64,
    pub energy_scheduled_kwh: f64,
    pub energy_applied_kwh: f64,
}

impl LoopOutcome {
    pub fn violations(&self) -> usize {
        self.comfort_violations + self.input_violations
    }
}

/// Lv1 engines solved once per day from the nominal states; other runs
/// re-solve a copy from their own states.
#[derive(Debug, Default)]
pub struct Lv1Cache {
    days: Vec<Option<Lv1Engine>>,
}

fn adversary(view: &FeedView) -> f64 {
    let worst = |w: f64| {
        view.blocks
            .iter()
            .zip(view.outputs)
            .zip(view.states)
            .map(|((blk, out), st)| {
                let u = DVector::from_iterator(blk.horizon * blk.n_u, out.plan.iter().flat_map(|p| p.iter().copied()));
                let mut du = DVector::zeros(blk.horizon * blk.n_r);
                for k in 0..blk.n_r {
                    du[k] = w * if w >= 0.0 { st.r_down[(0, k)] } else { st.r_up[(0, k)] };
                }
                let slack = blk.slack(&u, &du) - DVector::from_column_slice(&out.margins);
                slack.min()
            })
            .fold(f64::INFINITY, f64::min)
    };
    let (lo, hi) = view.range;
    if worst(lo) < worst(hi) {
        lo
    } else {
        hi
    }
}

pub fn lv2_signal(kind: Kind) -> SignalModel {
    match kind {
        Kind::Pc | Kind::Asymmetric => SignalModel::Pc,
        Kind::Pec { eps, t_steps } => SignalModel::Pec { eps, t_steps },
    }
}

/// Runs the closed loop over the configured days. Without `reserve` no
/// capacity is scheduled and Lv2 is the plain energy-optimal MPC.
pub fn run_loop(sc: &Scenario, feed: &Feed, reserve: bool, mut cache: Option<&mut Lv1Cache>) -> Result<LoopOutcome> {
    let cfg = &sc.config;
    let spd = sc.steps_per_day();
    let n2 = cfg.horizon.n2;
    // the MPC never plans past less than the rest of the Lv1 window
    let lv2_len = n2.max(cfg.horizon.n1);
    let kind = sc.kind();
    let step_h = cfg.horizon.step_minutes as f64 / 60.0;
    if let Feed::Steps(w) = feed {
        if w.len() < cfg.days * spd {
            return Err(SimError::Config(format!("signal covers {} of {} steps", w.len(), cfg.days * spd)));
        }
    }
    let mut states = sc.x0.clone();
    let mut out = LoopOutcome::default();
    for day in 0..cfg.days {
        let start = day * spd;
        let schedule = if reserve {
            let solved = match cache.as_deref_mut() {
                Some(c) => {
                    if c.days.len() <= day {
                        c.days.resize_with(day + 1, || None);
                    }
                    let engine = match &mut c.days[day] {
                        Some(e) => e,
                        slot => slot.insert(sc.lv1_engine(day, &states, kind, cfg.product.length, None)?),
                    };
                    let mut e = engine.clone();
                    e.set_initial_states(&states)?;
                    e.solve()
                }
                None => sc.lv1_engine(day, &states, kind, cfg.product.length, None)?.solve(),
            }
            .map_err(|source| SimError::Day { day, source })?;
            Some(solved.schedule.window(0, spd))
        } else {
            None
        };
        let buildings: Vec<RhBuilding> = (0..sc.models.len())
            .map(|b| {
                let m = &sc.models[b];
                let mut reserve = CommittedReserve::none(spd, m.n_r());
                if let Some(s) = &schedule {
                    reserve.insert(s, b, 0);
                }
                Ok(RhBuilding {
                    model: m.clone(),
                    trace: sc.traces[b].slice(start, spd + lv2_len)?,
                    c: sc.prices.c[start..start + spd + lv2_len].to_vec(),
                    x0: states[b].clone(),
                    reserve,
                })
            })
            .collect::<Result<_>>()?;
        let rh = RhConfig {
            horizon: lv2_len,
            plan_end: Some(cfg.horizon.n1),
            min_active: n2,
            steps: spd,
            signal: lv2_signal(kind),
            steps_per_day: spd,
            tol: 1e-6,
        };
        let mut pick = |v: &FeedView| match feed {
            Feed::Zero => 0.0,
            Feed::Steps(w) => w[start + v.step],
            Feed::Adversary => adversary(v),
        };
        let log = receding_horizon_run(&buildings, &rh, &mut pick).map_err(|source| SimError::Day { day, source })?;
        states = log.final_states.clone();
        for mut s in log.steps {
            let m = &sc.models[s.building];
            let kw = |u: &DVector<f64>| (0..u.len()).map(|i| m.input_kw_per_unit(i) * u[i]).sum::<f64>() * step_h;
            out.energy_scheduled_kwh += kw(&s.u_baseline);
            out.energy_applied_kwh += kw(&s.u_applied);
            if s.comfort_violation > 0.0 {
                out.comfort_violations += 1;
                if s.occupied {
                    out.comfort_violations_occupied += 1;
                }
            }
            if s.input_violation > 0.0 {
                out.input_violations += 1;
            }
            out.max_comfort_violation = out.max_comfort_violation.max(s.comfort_violation);
            s.step += start;
            out.log.steps.push(s);
        }
        out.log.energy_cost += log.energy_cost;
        out.schedules.push(schedule.unwrap_or_else(|| empty_schedule(spd)));
    }
    Ok(out)
}

fn empty_schedule(spd: usize) -> ReserveSchedule {
    ReserveSchedule { horizon: spd, symmetric: true, slots: vec![] }
}
