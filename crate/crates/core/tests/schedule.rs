use bldgres_core::schedule::*;
use bldgres_core::thermal::*;
use bldgres_core::uncertainty::*;
use bldgres_core::CoreError;
use nalgebra::{DMatrix, DVector};

fn trace(n: usize, ambient: f64, lo: f64, hi: f64) -> DisturbanceTrace {
    DisturbanceTrace {
        timestamp_min: (0..n).map(|k| 30.0 * k as f64).collect(),
        ambient: vec![ambient; n],
        solar: vec![0.0; n],
        gains: vec![0.0; n],
        occupied: vec![true; n],
        y_min: vec![lo; n],
        y_max: vec![hi; n],
    }
}

/// `x⁺ = a x + b u + e·ambient`, `y = x`, one heating input in `[0, 10]`.
fn scalar(a: f64, b: f64, e: f64) -> LtvBuildingModel {
    LtvBuildingModel {
        a: DMatrix::from_element(1, 1, a),
        b: vec![DMatrix::from_element(1, 1, b)],
        e: DMatrix::from_row_slice(1, 3, &[e, 0.0, 0.0]),
        c: DMatrix::from_element(1, 1, 1.0),
        d: vec![DMatrix::zeros(1, 1)],
        f: DMatrix::zeros(1, 3),
        u_min: DVector::from_element(1, 0.0),
        u_max: DVector::from_element(1, 10.0),
        reserve_actuators: vec![0],
        actuator_sign: vec![1.0],
        cop: vec![2.0],
        input_cop: vec![2.0],
        floor_area: 1000.0,
        step_minutes: 30,
        input_names: vec!["heat".into()],
    }
}

fn system(model: &LtvBuildingModel, x0: f64, tr: &DisturbanceTrace, n: usize) -> StackedSystem {
    stack_building(model, &DVector::from_element(1, x0), tr, n).unwrap().into()
}

/// Scalar toy where only the input bounds bind.
fn loose_toy(n: usize) -> StackedSystem {
    system(&scalar(0.5, 0.1, 0.0), 0.0, &trace(n, 0.0, -100.0, 100.0), n)
}

/// Heated room: without heating it drifts to 10 °C, comfort starts at 20 °C.
fn heated_toy(n: usize, hi: f64) -> StackedSystem {
    system(&scalar(0.8, 1.0, 0.2), 21.0, &trace(n, 10.0, 20.0, hi), n)
}

fn per_step(n: usize) -> StructureMatrix {
    build_structure_matrix(n, Granularity::PerStep, n, false).unwrap()
}

fn lit() -> ScheduleOptions {
    ScheduleOptions { method: Method::Literal, ..Default::default() }
}

fn lazy() -> ScheduleOptions {
    ScheduleOptions { method: Method::Lazy, ..Default::default() }
}

fn capacity(r: &ScheduleResult) -> f64 {
    r.schedule.total_mean_kw()
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

#[test]
fn structure_matrix_examples() {
    let m = build_structure_matrix(4, Granularity::Daily, 4, false).unwrap();
    assert_eq!(m.pairs(), vec![(0, 1), (1, 2), (2, 3)]);
    let m = build_structure_matrix(96, Granularity::Hourly, 48, false).unwrap();
    assert_eq!(m.pairs().len(), 48);
    assert!(m.pairs().iter().all(|&(a, b)| a % 2 == 0 && b == a + 1));
    assert!(build_structure_matrix(96, Granularity::PerStep, 48, false).unwrap().is_empty());
    assert!(build_structure_matrix(10, Granularity::Daily, 4, false).is_err());
    assert!(build_structure_matrix(48, Granularity::Hourly, 30, false).is_err());

    let sys = loose_toy(4);
    let dense = build_structure_matrix(4, Granularity::Daily, 4, true).unwrap().matrix(&sys);
    assert_eq!(dense.nrows(), 3);
    assert_eq!(dense.ncols(), 4);
    assert_eq!(dense * DVector::from_element(4, 2.5), DVector::zeros(3));
}

#[test]
fn scalar_toy_splits_the_input_range() {
    let sys = loose_toy(4);
    let prices = PriceVectors::flat(4, 1.0, 2.0);
    for opts in [lit(), lazy()] {
        for res in [
            schedule_pc_general(&sys, &prices, &per_step(4), opts).unwrap(),
            schedule_pc_signed(&sys, &prices, &per_step(4), opts).unwrap(),
        ] {
            for t in 0..4 {
                assert!((res.u[0][t] - 5.0).abs() < 1e-7, "u = {}", res.u[0][t]);
                assert!((res.schedule.slots[0].up[t] - 5.0).abs() < 1e-7);
            }
        }
    }
}

#[test]
fn low_payment_gives_no_reserve_and_energy_optimal_inputs() {
    let n = 8;
    let sys = heated_toy(n, 24.0);
    let prices = PriceVectors::flat(n, 0.3, 0.5);
    let res = schedule_pc_general(&sys, &prices, &per_step(n), ScheduleOptions::default()).unwrap();
    assert!(capacity(&res) < 1e-9);
    // scalar monotone system with decay: hold the lower comfort bound
    let mut x: f64 = 21.0;
    for t in 0..n {
        let need = (20.0 - 0.8 * x - 2.0).clamp(0.0, 10.0);
        assert!((res.u[0][t] - need).abs() < 1e-6, "step {t}: {} vs {need}", res.u[0][t]);
        x = 0.8 * x + need + 2.0;
    }
}

#[test]
fn high_payment_moves_inputs_off_the_lower_bound() {
    let n = 8;
    let sys = system(&scalar(0.8, 0.1, 0.2), 18.0, &trace(n, 10.0, 12.0, 30.0), n);
    let prices = PriceVectors::flat(n, 0.3, 1.5);
    let res = schedule_pc_general(&sys, &prices, &per_step(n), ScheduleOptions::default()).unwrap();
    assert!(capacity(&res) > 0.0);
    assert!(res.u[0].iter().any(|&u| u > 1e-6));
    assert!(res.objective < 0.0);
}

#[test]
fn signed_and_general_agree_on_heating_only_buildings() {
    let n = 8;
    let tr = trace(n, 12.0, 21.0, 24.0);
    let blocks: Vec<StackedSystem> = ["A2", "B3"]
        .iter()
        .enumerate()
        .map(|(i, id)| {
            let m = make_archetype(id, 4, 30).unwrap().with_reserve_actuators(&[HEATING]).unwrap();
            let x0 = DVector::from_element(4, 22.0);
            stack_building_id(&m, &x0, &tr, n, i).unwrap().into()
        })
        .collect();
    let sys = stack_aggregation(&blocks).unwrap();
    let prices = PriceVectors::flat(n, 0.2, 1.1);
    let m = build_structure_matrix(n, Granularity::Custom(4), 48, false).unwrap();
    let signed = schedule_pc_signed(&sys, &prices, &m, lazy()).unwrap();
    let general = schedule_pc_general(&sys, &prices, &m, lit()).unwrap();
    let cuts = schedule_pc_general(&sys, &prices, &m, lazy()).unwrap();
    assert!(close(signed.objective, general.objective, 1e-6), "{} vs {}", signed.objective, general.objective);
    assert!(close(signed.objective, cuts.objective, 1e-6));
    assert!(capacity(&signed) > 0.0);
}

#[test]
fn mixed_sign_rows_are_rejected() {
    let n = 4;
    let m = make_archetype("A1", 4, 30).unwrap();
    let sys: StackedSystem =
        stack_building(&m, &DVector::from_element(4, 22.0), &trace(n, 10.0, 21.0, 24.0), n).unwrap().into();
    let prices = PriceVectors::flat(n, 0.2, 1.1);
    assert!(matches!(
        schedule_pc_signed(&sys, &prices, &per_step(n), lazy()),
        Err(CoreError::MixedSignRow { .. })
    ));
    assert!(matches!(
        schedule_pc_asymmetric(&sys, &prices, &per_step(n), lazy()),
        Err(CoreError::MixedSignRow { .. })
    ));
    assert!(schedule_pc_general(&sys, &prices, &per_step(n), lazy()).is_ok());
}

#[test]
fn zero_payment_is_the_deterministic_problem() {
    let n = 6;
    let sys = heated_toy(n, 24.0);
    let prices = PriceVectors::flat(n, 0.3, 0.0);
    let res = schedule_pc_signed(&sys, &prices, &per_step(n), lazy()).unwrap();
    let asym = schedule_pc_asymmetric(&sys, &prices, &per_step(n), lazy()).unwrap();
    assert_eq!(capacity(&res), 0.0);
    assert_eq!(capacity(&asym), 0.0);
    assert!(close(res.objective, asym.objective, 1e-9));
    assert!(close(res.objective, res.energy_cost, 1e-12));
}

#[test]
fn asymmetric_is_never_worse_and_skips_up_reserve_in_a_tight_band() {
    let n = 6;
    for hi in [20.3, 21.0, 24.0] {
        let sys = heated_toy(n, hi);
        let prices = PriceVectors::flat(n, 0.3, 1.1);
        let sym = schedule_pc_signed(&sys, &prices, &per_step(n), lazy()).unwrap();
        let asym = schedule_pc_asymmetric(&sys, &prices, &per_step(n), lazy()).unwrap();
        assert!(asym.objective <= sym.objective + 1e-9);
        let rep = robust_feasibility_check(
            &sys,
            &asym.u_stacked(),
            &asym.schedule,
            &build_pc(n).unwrap(),
            CheckMode::Oracle,
            0,
            1e-7,
        )
        .unwrap();
        assert!(rep.is_feasible(), "{:?}", rep.violations);
    }
    let sys = heated_toy(n, 20.3);
    let asym = schedule_pc_asymmetric(&sys, &PriceVectors::flat(n, 0.3, 1.1), &per_step(n), lazy()).unwrap();
    let s = &asym.schedule.slots[0];
    assert!(s.up.iter().all(|&v| v < 1e-9), "{:?}", s.up);
    assert!(s.down.iter().sum::<f64>() > 0.0);
}

#[test]
fn pec_with_unit_bias_bound_equals_pc() {
    let n = 6;
    let sys = heated_toy(n, 23.0);
    let prices = PriceVectors::flat(n, 0.3, 1.1);
    let pc = schedule_pc_general(&sys, &prices, &per_step(n), lit()).unwrap();
    for t_steps in [2, 3, 6] {
        let set = build_pec(n, 1.0, t_steps).unwrap();
        for opts in [lit(), lazy()] {
            let pec = schedule_pec(&sys, &prices, &per_step(n), &set, opts).unwrap();
            assert!(close(pc.objective, pec.objective, 1e-6), "{} vs {}", pc.objective, pec.objective);
        }
    }
}

#[test]
fn pec_beats_pc_when_energy_binds_and_passes_the_vertex_oracle() {
    let n = 4;
    // slow room with a narrow band: accumulated deviations bind
    let sys = system(&scalar(0.95, 0.05, 0.05), 21.0, &trace(n, 10.0, 20.5, 21.5), n);
    let prices = PriceVectors::flat(n, 0.3, 1.1);
    let pc = schedule_pc_general(&sys, &prices, &per_step(n), lit()).unwrap();
    let set = build_pec(n, 0.3, 4).unwrap();
    let pec = schedule_pec(&sys, &prices, &per_step(n), &set, lit()).unwrap();
    let pec_lazy = schedule_pec(&sys, &prices, &per_step(n), &set, lazy()).unwrap();
    assert!(capacity(&pec) > capacity(&pc) + 1e-6, "{} vs {}", capacity(&pec), capacity(&pc));
    assert!(pec.objective <= pc.objective + 1e-9);
    assert!(close(pec.objective, pec_lazy.objective, 1e-6));
    for res in [&pec, &pec_lazy] {
        let rep = robust_feasibility_check(&sys, &res.u_stacked(), &res.schedule, &set, CheckMode::Oracle, 0, 1e-7)
            .unwrap();
        assert!(rep.is_feasible(), "{:?}", rep.violations);
        let mc = robust_feasibility_check(
            &sys,
            &res.u_stacked(),
            &res.schedule,
            &set,
            CheckMode::MonteCarlo { samples: 500 },
            7,
            1e-7,
        )
        .unwrap();
        assert!(mc.is_feasible());
    }
    // the box-signal schedule is robust for the smaller set too
    let rep =
        robust_feasibility_check(&sys, &pc.u_stacked(), &pc.schedule, &set, CheckMode::Oracle, 0, 1e-7).unwrap();
    assert!(rep.is_feasible());
}

#[test]
fn pec_duals_certify_every_row() {
    let n = 4;
    let sys = system(&scalar(0.95, 0.05, 0.05), 21.0, &trace(n, 10.0, 20.5, 21.5), n);
    let prices = PriceVectors::flat(n, 0.3, 1.1);
    let set = build_pec(n, 0.3, 2).unwrap();
    let res = schedule_pec(&sys, &prices, &per_step(n), &set, lazy()).unwrap();
    let (abar, bbar) = set.halfspaces();
    let blk = &sys.blocks[0];
    let gu = &blk.g * &res.u[0];
    let duals = res.duals.as_ref().unwrap();
    assert_eq!(duals.len(), blk.rows());
    let r = &res.schedule.slots[0].up;
    for (j, d) in duals.iter().enumerate() {
        assert_eq!(d.tag, blk.tags[j]);
        let lam = DVector::from_vec(d.lambda.clone());
        assert!(lam.iter().all(|&v| v >= 0.0));
        let a = DVector::from_iterator(n, (0..n).map(|t| blk.s[(j, t)] * r[t]));
        assert!((abar.transpose() * &lam - &a).amax() < 1e-9);
        let lhs = bbar.dot(&lam) + gu[j];
        assert!(lhs <= blk.q[j] + 1e-7 * (1.0 + blk.q[j].abs()), "row {j}: {lhs} > {}", blk.q[j]);
    }
}

#[test]
fn pec_rejects_single_step_windows() {
    let n = 4;
    let sys = loose_toy(n);
    let set = build_pec(n, 0.5, 1).unwrap();
    assert!(schedule_pec(&sys, &PriceVectors::flat(n, 1.0, 2.0), &per_step(n), &set, lazy()).is_err());
}

#[test]
fn inflated_reserves_violate_input_rows() {
    let n = 3;
    let sys = loose_toy(n);
    let res = schedule_pc_signed(&sys, &PriceVectors::flat(n, 1.0, 2.0), &per_step(n), lazy()).unwrap();
    let set = build_pc(n).unwrap();
    let u = res.u_stacked();
    let rep = robust_feasibility_check(&sys, &u, &res.schedule, &set, CheckMode::Oracle, 0, 1e-9).unwrap();
    assert!(rep.is_feasible());
    assert_eq!(rep.signals_checked, 8);
    let mut big = res.schedule.clone();
    for s in &mut big.slots {
        for v in s.up.iter_mut().chain(s.down.iter_mut()) {
            *v *= 1.5;
        }
    }
    let rep = robust_feasibility_check(&sys, &u, &big, &set, CheckMode::Oracle, 0, 1e-9).unwrap();
    assert!(!rep.is_feasible());
    assert!(rep.violations.iter().all(|v| !v.tag.kind.is_output()));
    assert_eq!(rep.violations.len(), 2 * n);
    assert!(rep.violations.iter().all(|v| (v.amount - 2.5).abs() < 1e-9));

    // no reserve: deterministic feasibility of u
    let zero = ReserveSchedule::zeros(&sys, true);
    let rep = robust_feasibility_check(&sys, &u, &zero, &set, CheckMode::Oracle, 0, 1e-9).unwrap();
    assert!(rep.is_feasible());
    assert!((rep.min_slack - 5.0).abs() < 1e-9);
}

#[test]
fn comfort_unreachable_is_reported_as_infeasible() {
    let n = 4;
    let sys = system(&scalar(0.8, 0.1, 0.2), 21.0, &trace(n, 10.0, 25.0, 26.0), n);
    let err = schedule_pc_general(&sys, &PriceVectors::flat(n, 0.3, 1.1), &per_step(n), lazy()).unwrap_err();
    assert!(matches!(err, CoreError::Infeasible(_)), "{err:?}");
}

#[test]
fn daily_products_keep_capacity_constant() {
    let n = 8;
    let sys = heated_toy(n, 23.0);
    let prices = PriceVectors::flat(n, 0.3, 1.1);
    for per_actuator in [false, true] {
        let m = build_structure_matrix(n, Granularity::Daily, n, per_actuator).unwrap();
        let res = schedule_pc_general(&sys, &prices, &m, lazy()).unwrap();
        let up = &res.schedule.slots[0].up;
        assert!(up.iter().all(|&v| (v - up[0]).abs() < 1e-7), "{up:?}");
        let free = schedule_pc_general(&sys, &prices, &per_step(n), lazy()).unwrap();
        assert!(free.objective <= res.objective + 1e-9);
    }
}

#[test]
fn pec_objective_is_monotone_in_eps() {
    let n = 6;
    let sys = system(&scalar(0.95, 0.05, 0.05), 21.0, &trace(n, 10.0, 20.5, 21.5), n);
    let prices = PriceVectors::flat(n, 0.3, 1.1);
    let mut last = f64::NEG_INFINITY;
    for eps in [0.1, 0.3, 0.5, 0.8, 1.0] {
        let set = build_pec(n, eps, 3).unwrap();
        let res = schedule_pec(&sys, &prices, &per_step(n), &set, lazy()).unwrap();
        assert!(res.objective >= last - 1e-9);
        last = res.objective;
    }
}

#[test]
fn engine_resolves_from_new_initial_state() {
    let n = 8;
    let sys = heated_toy(n, 23.0);
    let prices = PriceVectors::flat(n, 0.3, 1.1);
    let m = per_step(n);
    let set = build_pec(n, 0.4, 4).unwrap();
    for f in [Formulation::General, Formulation::Signed, Formulation::Pec(set)] {
        let mut eng = Lv1Engine::new(&sys, &prices, &m, f.clone(), lazy()).unwrap();
        eng.solve().unwrap();
        let x0 = DVector::from_element(1, 22.4);
        eng.set_initial_states(&[x0.clone()]).unwrap();
        let warm = eng.solve().unwrap();
        let sys2: StackedSystem =
            stack_building(&scalar(0.8, 1.0, 0.2), &x0, &trace(n, 10.0, 20.0, 23.0), n).unwrap().into();
        let cold = Lv1Engine::new(&sys2, &prices, &m, f, lazy()).unwrap().solve().unwrap();
        assert!(close(warm.objective, cold.objective, 1e-7), "{} vs {}", warm.objective, cold.objective);
    }
}

#[test]
fn schedule_csv_has_rows_and_summary() {
    let n = 4;
    let sys = loose_toy(n);
    let res = schedule_pc_signed(&sys, &PriceVectors::flat(n, 1.0, 2.0), &per_step(n), lazy()).unwrap();
    let mut buf = Vec::new();
    write_schedule_csv(&res, &sys, 4, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("building,actuator,step,r_up,r_down,u_baseline"));
    assert!(text.contains("objective"));
    assert!(text.lines().count() >= 1 + n + 3);
}

#[test]
fn row_lp_check_matches_vertex_enumeration() {
    let n = 4;
    let sys = system(&scalar(0.95, 0.05, 0.05), 21.0, &trace(n, 10.0, 20.5, 21.5), n);
    let prices = PriceVectors::flat(n, 0.3, 1.1);
    for set in [build_pc(n).unwrap(), build_pec(n, 0.3, 2).unwrap(), build_pec(n, 0.6, 4).unwrap()] {
        let res = match set.kind {
            SetKind::Pc => schedule_pc_signed(&sys, &prices, &per_step(n), lazy()).unwrap(),
            _ => schedule_pec(&sys, &prices, &per_step(n), &set, lazy()).unwrap(),
        };
        let u = res.u_stacked();
        let mut scaled = res.schedule.clone();
        for s in &mut scaled.slots {
            for v in s.up.iter_mut().chain(s.down.iter_mut()) {
                *v *= 1.3;
            }
        }
        for sched in [&res.schedule, &scaled] {
            let ora = robust_feasibility_check(&sys, &u, sched, &set, CheckMode::Oracle, 0, 1e-7).unwrap();
            let row = robust_feasibility_check(&sys, &u, sched, &set, CheckMode::RowLp, 0, 1e-7).unwrap();
            assert!((ora.min_slack - row.min_slack).abs() < 1e-8, "{} vs {}", ora.min_slack, row.min_slack);
            assert_eq!(ora.is_feasible(), row.is_feasible());
            assert_eq!(ora.violations.len(), row.violations.len());
        }
    }
}
