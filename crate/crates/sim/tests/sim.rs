use std::path::{Path, PathBuf};
use std::process::Command;

use bldgres_sim::config::ProductLength;
use bldgres_sim::sweep::{extrapolate_fleet, sweep_bid_curve};
use bldgres_sim::{run_closed_loop, Kind, Scenario, ScenarioConfig};

fn scenario_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(format!("{name}.toml"))
}

fn config(name: &str) -> ScenarioConfig {
    ScenarioConfig::load(scenario_path(name)).unwrap()
}

const BASE: &str = r#"
name = "t"
season = "winter"
days = 2
buildings = [{ archetype = "A2" }]
[uncertainty]
kind = "pec"
eps = 0.3
t_hours = 2.0
[prices]
c = 0.2
ratio = 1.1
"#;

#[test]
fn config_accepts_minimal_file() {
    let cfg = ScenarioConfig::from_toml(BASE).unwrap();
    assert_eq!(cfg.steps_per_day(), 48);
    assert_eq!(cfg.t_steps(), 4);
    assert_eq!(cfg.horizon.n1, 96);
}

#[test]
fn config_rejects_bad_settings() {
    let cases = [
        BASE.replace("eps = 0.3", "eps = 1.5"),
        BASE.replace("t_hours = 2.0", "t_hours = 1.25"),
        BASE.replace("t_hours = 2.0", "t_hours = 0.5"),
        BASE.replace("days = 2", "days = 0"),
        BASE.replace("ratio = 1.1", "ratio = -1.0"),
        BASE.replace("[{ archetype = \"A2\" }]", "[]"),
        BASE.replace("[prices]", "[product]\nsymmetric = false\n[prices]"),
        BASE.replace("days = 2", "days = 2\ncolour = 1"),
        BASE.replace("\"A2\"", "\"C9\""),
    ];
    for text in cases {
        let bad = ScenarioConfig::from_toml(&text).and_then(|c| Scenario::build(&c).map(|_| ()));
        assert!(bad.is_err(), "accepted:\n{text}");
    }
}

#[test]
fn extrapolation_edges() {
    assert_eq!(extrapolate_fleet(313.0, 6, 0.0).unwrap().buildings, 0);
    assert!(extrapolate_fleet(0.0, 6, 5.0).is_err());
    assert!(extrapolate_fleet(100.0, 0, 5.0).is_err());
    // 1 MW from 250 kW per 2 buildings
    assert_eq!(extrapolate_fleet(250.0, 2, 1.0).unwrap().buildings, 8);
    assert_eq!(extrapolate_fleet(250.1, 2, 1.0).unwrap().buildings, 8);
    assert_eq!(extrapolate_fleet(249.9, 2, 1.0).unwrap().buildings, 9);
}

#[test]
fn zero_ratio_offers_nothing() {
    let sc = Scenario::build(&ScenarioConfig::from_toml(BASE).unwrap()).unwrap();
    let states = sc.nominal_states(1).unwrap();
    for kind in [Kind::Pc, sc.kind()] {
        let kw = sc.horizon_capacity(&states, kind, ProductLength::Daily, Some(0.0)).unwrap();
        assert!(kw.abs() < 1e-9, "{kind:?}: {kw}");
    }
}

#[test]
fn zero_ratio_closed_loop_matches_baseline() {
    let mut cfg = ScenarioConfig::from_toml(&BASE.replace("ratio = 1.1", "ratio = 0.0")).unwrap();
    cfg.closed_loop.mc_signals = 0;
    cfg.closed_loop.adversary = false;
    let rep = run_closed_loop(&Scenario::build(&cfg).unwrap()).unwrap();
    assert!(rep.weekly_avg_kw.abs() < 1e-9);
    assert!(rep.consumption_delta_pct.abs() < 1e-3, "{}", rep.consumption_delta_pct);
    assert_eq!(rep.violations(), 0);
}

#[test]
fn unit_bias_bound_equals_box() {
    let sc = Scenario::build(&ScenarioConfig::from_toml(BASE).unwrap()).unwrap();
    let states = sc.nominal_states(1).unwrap();
    let pc = sc.horizon_capacity(&states, Kind::Pc, ProductLength::Daily, None).unwrap();
    let pec = sc.horizon_capacity(&states, Kind::Pec { eps: 1.0, t_steps: 4 }, ProductLength::Daily, None).unwrap();
    assert!(pc > 1.0);
    assert!((pc - pec).abs() <= 1e-6 * pc, "{pc} vs {pec}");
}

#[test]
fn bid_curve_grows_with_ratio() {
    let sc = Scenario::build(&ScenarioConfig::from_toml(BASE).unwrap()).unwrap();
    let rows = sweep_bid_curve(&sc, &[0.2, 0.5, 0.99, 1.01, 1.3, 2.0], 1).unwrap();
    for w in rows.windows(2) {
        assert!(w[1].pc_kw >= w[0].pc_kw - 1e-6);
        assert!(w[1].pec_kw >= w[0].pec_kw - 1e-6);
    }
    assert!(rows[2].pc_kw.abs() < 1e-9 && rows[3].pc_kw > 0.0);
    assert!(sweep_bid_curve(&sc, &[1.0, 0.5], 1).is_err());
}

#[test]
fn hourly_products_vary_over_the_day() {
    let sc = Scenario::build(&config("winter_2b")).unwrap();
    let res = sc.solve_day(0, &sc.x0, Kind::Pc, ProductLength::Hourly, None).unwrap();
    let hours: Vec<f64> = (0..24)
        .map(|h| {
            let (up, down) = res.schedule.capacity_kw(2 * h);
            // both steps of an hour carry the same bid
            let (up2, down2) = res.schedule.capacity_kw(2 * h + 1);
            assert!((up2 - up).abs() < 1e-9 && (down2 - down).abs() < 1e-9);
            up + down
        })
        .collect();
    let hi = hours.iter().cloned().fold(f64::MIN, f64::max);
    let lo = hours.iter().cloned().fold(f64::MAX, f64::min);
    assert!(hi - lo > 1.0, "flat hourly profile {hours:?}");
}

#[test]
fn nominal_states_and_capacity_shapes() {
    let sc = Scenario::build(&ScenarioConfig::from_toml(BASE).unwrap()).unwrap();
    let states = sc.nominal_states(2).unwrap();
    assert_eq!(states.len(), 3);
    assert_eq!(states[0], sc.x0);
    assert!(sc.horizon_capacity(&states[..1], Kind::Pc, ProductLength::Daily, None).is_err());
}

#[test]
fn cli_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_bldgres");
    let out = Command::new(bin).args(["extrapolate", "--avg-kw", "313", "--target-mw", "5"]).output().unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("96 buildings"));

    let missing = Command::new(bin).args(["schedule", "--config", "/nonexistent.toml"]).output().unwrap();
    assert_eq!(missing.status.code(), Some(2));

    let bad = Command::new(bin).args(["extrapolate", "--avg-kw", "0", "--target-mw", "5"]).output().unwrap();
    assert_eq!(bad.status.code(), Some(2));

    let ok = Command::new(bin).arg("schedule").arg("--config").arg(scenario_path("winter_2b")).output().unwrap();
    assert!(ok.status.success());
    let csv = String::from_utf8_lossy(&ok.stdout);
    assert!(csv.lines().count() > 96);
}

/// Byte comparison against stored closed-loop outputs.
fn golden(name: &str) {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    let out = std::env::temp_dir().join(format!("bldgres-golden-{name}-{}", std::process::id()));
    let status = Command::new(env!("CARGO_BIN_EXE_bldgres"))
        .arg("simulate")
        .arg("--config")
        .arg(scenario_path(name))
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let update = std::env::var_os("BLDGRES_UPDATE_GOLDEN").is_some();
    for f in ["summary.csv", "capacities.csv", "steps.csv"] {
        let got = std::fs::read_to_string(out.join(f)).unwrap();
        if update {
            std::fs::create_dir_all(&dir).unwrap();
            std::fs::write(dir.join(f), &got).unwrap();
            continue;
        }
        let want = std::fs::read_to_string(dir.join(f)).unwrap();
        assert!(got == want, "{name}/{f} differs from the stored output");
    }
    std::fs::remove_dir_all(&out).unwrap();
}

#[test]
fn golden_winter_2b() {
    golden("winter_2b");
}

#[test]
fn golden_summer_2b() {
    golden("summer_2b");
}
