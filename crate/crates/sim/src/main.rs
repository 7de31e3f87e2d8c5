use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bldgres_core::dispatch::{decompose, design_filter, project_onto_pec, SfcSignal, SAMPLE_PERIOD_S};
use bldgres_core::schedule::{robust_feasibility_check, write_schedule_csv, CheckMode};
use bldgres_core::uncertainty::{build_pc, build_pec, MAX_ENUM_DIM};
use clap::{Args, Parser, Subcommand};

use bldgres_sim::signal::{bias_table, source_signal};
use bldgres_sim::sweep::{extrapolate_fleet, sweep_bid_curve, sweep_te_grid};
use bldgres_sim::{run_closed_loop, Kind, Result, Scenario, ScenarioConfig, SimError};

#[derive(Parser)]
#[command(name = "bldgres", version, about = "Frequency reserves from office building aggregations")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the master seed of the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; tables go to stdout without it.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// One Lv1 solve from the configured initial state.
    Schedule {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        day: usize,
        /// Verify the schedule against the signal set (vertex enumeration on
        /// small horizons, one LP per row otherwise).
        #[arg(long)]
        oracle: bool,
    },
    /// Closed loop with the configured feed, sampled signals and adversary.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        mc: Option<usize>,
        #[arg(long)]
        adversary: bool,
    },
    /// Capacity against k/c.
    SweepBid {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_value = "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,0.99,1.01,1.1,1.2")]
        ratios: Vec<f64>,
        #[arg(long)]
        days: Option<usize>,
    },
    /// Capacity over averaging periods and bias bounds.
    SweepTe {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_value = "1,2,4,6,8,12")]
        t_hours: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "0.05,0.1,0.15,0.2,0.25,0.3,0.35,0.4,0.45,0.5")]
        eps: Vec<f64>,
        #[arg(long)]
        days: Option<usize>,
    },
    /// Bias of a signal and of its high band per averaging period.
    AnalyzeSignal {
        #[command(flatten)]
        source: SignalSource,
        #[arg(long, value_delimiter = ',', default_value = "1,2,4,6,8,12")]
        t_hours: Vec<f64>,
    },
    /// Splits a signal into low and high band and projects the high band.
    FilterSignal {
        #[command(flatten)]
        source: SignalSource,
        #[arg(long, default_value_t = 2.0)]
        t_hours: f64,
        /// Bias bound for the projected high band.
        #[arg(long)]
        eps: Option<f64>,
    },
    /// Buildings needed for a target capacity.
    Extrapolate {
        #[arg(long)]
        avg_kw: f64,
        #[arg(long, default_value_t = 6)]
        size: usize,
        #[arg(long)]
        target_mw: f64,
    },
}

#[derive(Args)]
struct SignalSource {
    /// CSV with `timestamp_s,w`.
    #[arg(long, conflicts_with = "config")]
    signal: Option<PathBuf>,
    /// Scenario whose synthetic signal is used.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Length of a synthetic signal.
    #[arg(long, default_value_t = 14)]
    days: usize,
    #[arg(long, default_value_t = 3)]
    order: usize,
    #[arg(long, default_value_t = 0.5)]
    ripple_db: f64,
}

fn load(common: &Common) -> Result<Scenario> {
    let mut cfg = ScenarioConfig::load(&common.config)?;
    if let Some(s) = common.seed {
        cfg.master_seed = s;
    }
    Scenario::build(&cfg)
}

fn sink(out: &Option<PathBuf>, file: &str) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            Box::new(std::fs::File::create(dir.join(file))?)
        }
        None => Box::new(std::io::stdout()),
    })
}

fn load_signal(src: &SignalSource) -> Result<SfcSignal> {
    if let Some(path) = &src.signal {
        return Ok(SfcSignal::read_csv(std::fs::File::open(path)?)?);
    }
    let Some(path) = &src.config else {
        return Err(SimError::Config("give --signal or --config".into()));
    };
    let mut cfg = ScenarioConfig::load(path)?;
    if let Some(s) = src.seed {
        cfg.signal.seed = Some(s);
    }
    let samples = (src.days as f64 * 86400.0 / SAMPLE_PERIOD_S) as usize;
    source_signal(&cfg, samples)
}

/// Ok(true) when every check passed.
fn run(cli: Cli) -> Result<bool> {
    match cli.cmd {
        Cmd::Schedule { common, day, oracle } => {
            let sc = load(&common)?;
            let kind = sc.kind();
            let length = sc.config.product.length;
            let states = if day == 0 { sc.x0.clone() } else { sc.nominal_states(day)?.pop().unwrap() };
            let sys = sc.stacked(day, &states)?;
            let res = sc.solve_day(day, &states, kind, length, None)?;
            write_schedule_csv(&res, &sys, sc.steps_per_day(), sink(&common.out, "schedule.csv")?)?;
            if !oracle {
                return Ok(true);
            }
            let n = sys.horizon;
            let set = match kind {
                Kind::Pec { eps, t_steps } => build_pec(n, eps, t_steps)?,
                _ => build_pc(n)?,
            };
            let mode = match kind {
                _ if n <= MAX_ENUM_DIM => CheckMode::Oracle,
                Kind::Asymmetric => CheckMode::MonteCarlo { samples: 2000 },
                _ => CheckMode::RowLp,
            };
            let rep = robust_feasibility_check(&sys, &res.u_stacked(), &res.schedule, &set, mode, 0, 1e-7)?;
            eprintln!(
                "check {:?}: {} signals or rows, min slack {:.3e}, {} violated rows",
                mode,
                rep.signals_checked,
                rep.min_slack,
                rep.violations.len()
            );
            Ok(rep.is_feasible())
        }
        Cmd::Simulate { common, mc, adversary } => {
            let mut cfg = ScenarioConfig::load(&common.config)?;
            if let Some(s) = common.seed {
                cfg.master_seed = s;
            }
            if let Some(m) = mc {
                cfg.closed_loop.mc_signals = m;
            }
            cfg.closed_loop.adversary |= adversary;
            let report = run_closed_loop(&Scenario::build(&cfg)?)?;
            match &common.out {
                Some(dir) => report.write_dir(dir)?,
                None => {
                    report.write_summary(std::io::stdout())?;
                    report.write_capacities(std::io::stdout())?;
                }
            }
            Ok(report.violations() == 0)
        }
        Cmd::SweepBid { common, ratios, days } => {
            let sc = load(&common)?;
            let rows = sweep_bid_curve(&sc, &ratios, days.unwrap_or(sc.config.days))?;
            let mut w = csv::Writer::from_writer(sink(&common.out, "bid_curve.csv")?);
            w.write_record(["ratio", "pc_kw", "pec_kw"])?;
            for r in rows {
                w.write_record([r.ratio, r.pc_kw, r.pec_kw].map(|v| format!("{v:.6}")))?;
            }
            w.flush()?;
            Ok(true)
        }
        Cmd::SweepTe { common, t_hours, eps, days } => {
            let sc = load(&common)?;
            let grid = sweep_te_grid(&sc, &t_hours, &eps, days.unwrap_or(sc.config.days))?;
            let mut w = csv::Writer::from_writer(sink(&common.out, "te_grid.csv")?);
            w.write_record(["t_hours", "eps", "kw"])?;
            for c in &grid.cells {
                w.write_record([c.t_hours, c.eps, c.kw].map(|v| format!("{v:.6}")))?;
            }
            w.write_record(["pc".to_string(), String::new(), format!("{:.6}", grid.pc_kw)])?;
            w.flush()?;
            for (a, b) in grid.eps_increases(1e-6) {
                eprintln!("capacity grows from eps {} to {} at T = {} h", a.eps, b.eps, a.t_hours);
            }
            Ok(true)
        }
        Cmd::AnalyzeSignal { source, t_hours } => {
            let signal = load_signal(&source)?;
            let rows = bias_table(&signal, &t_hours, source.order, source.ripple_db)?;
            let mut w = csv::Writer::from_writer(sink(&source.out, "bias.csv")?);
            w.write_record(["t_hours", "original", "high_band"])?;
            for r in rows {
                w.write_record([r.t_hours, r.original, r.high_band].map(|v| format!("{v:.6}")))?;
            }
            w.flush()?;
            Ok(true)
        }
        Cmd::FilterSignal { source, t_hours, eps } => {
            let signal = load_signal(&source)?;
            let spec = design_filter(t_hours, source.order, source.ripple_db, signal.period_s)?;
            let d = decompose(&signal, &spec)?;
            let dir = source.out.clone().unwrap_or_else(|| Path::new(".").to_path_buf());
            std::fs::create_dir_all(&dir)?;
            d.lf.write_csv(std::fs::File::create(dir.join("low_band.csv"))?)?;
            d.hf.write_csv(std::fs::File::create(dir.join("high_band.csv"))?)?;
            eprintln!("{} samples, {} clipped", d.hf.len(), d.clipped);
            if let Some(e) = eps {
                let (p, events) = project_onto_pec(&d.hf, e, d.hf.samples_per(t_hours))?;
                p.write_csv(std::fs::File::create(dir.join("projected.csv"))?)?;
                eprintln!("{events} projection events");
            }
            Ok(true)
        }
        Cmd::Extrapolate { avg_kw, size, target_mw } => {
            let est = extrapolate_fleet(avg_kw, size, target_mw)?;
            println!("{} buildings (rough linear estimate)", est.buildings);
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("violations found");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
