use bldgres_core::thermal::*;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn flat_trace(n: usize, ambient: f64, solar: f64, lo: f64, hi: f64) -> DisturbanceTrace {
    DisturbanceTrace {
        timestamp_min: (0..n).map(|k| 30.0 * k as f64).collect(),
        ambient: vec![ambient; n],
        solar: vec![solar; n],
        gains: vec![5.0; n],
        occupied: vec![true; n],
        y_min: vec![lo; n],
        y_max: vec![hi; n],
    }
}

fn toy(n_x: usize, rng: &mut ChaCha8Rng) -> LtvBuildingModel {
    let a = DMatrix::from_fn(n_x, n_x, |i, j| if i == j { 0.7 } else { rng.gen_range(0.0..0.1) });
    let b = DMatrix::from_fn(n_x, 2, |_, _| rng.gen_range(0.0..0.2));
    let e = DMatrix::from_fn(n_x, 3, |_, _| rng.gen_range(0.0..0.1));
    let mut c = DMatrix::zeros(1, n_x);
    c[(0, 0)] = 1.0;
    LtvBuildingModel {
        a,
        b: vec![b],
        e,
        c,
        d: vec![DMatrix::zeros(1, 2)],
        f: DMatrix::zeros(1, 3),
        u_min: DVector::from_vec(vec![0.0, 0.0]),
        u_max: DVector::from_vec(vec![10.0, 5.0]),
        reserve_actuators: vec![0],
        actuator_sign: vec![1.0],
        cop: vec![3.0],
        input_cop: vec![3.0, 0.0],
        floor_area: 100.0,
        step_minutes: 30,
        input_names: vec!["heat".into(), "other".into()],
    }
}

#[test]
fn archetypes_are_stable() {
    for id in ARCHETYPE_IDS {
        for order in 2..=6 {
            let m = make_archetype(id, order, 30).unwrap();
            assert!(m.spectral_radius() < 1.0, "{id} order {order}");
            assert_eq!(m.n_x(), order);
        }
    }
}

#[test]
fn tabs_is_slower_than_radiators() {
    let a1 = make_archetype("A1", 4, 30).unwrap();
    let b1 = make_archetype("B1", 4, 30).unwrap();
    assert!(b1.dominant_time_constant_hours() > a1.dominant_time_constant_hours());
}

#[test]
fn rated_powers_and_signs() {
    let m = make_archetype("A2", 4, 30).unwrap();
    assert_eq!(m.u_max[HEATING], 27.0);
    assert_eq!(m.u_max[COOLING], 32.0);
    assert_eq!(m.actuator_sign, vec![1.0, -1.0]);
    assert_eq!(m.floor_area, 15000.0);
    assert!(m.b[0].column(HEATING).iter().all(|&v| v >= 0.0));
    assert!(m.b[0].column(COOLING).iter().all(|&v| v <= 0.0));
}

#[test]
fn archetype_errors() {
    assert!(matches!(make_archetype("C9", 4, 30), Err(bldgres_core::CoreError::UnknownArchetype(_))));
    assert!(make_archetype("A1", 1, 30).is_err());
    assert!(make_archetype("A1", 4, 7).is_err());
}

#[test]
fn archetype_toml_roundtrip() {
    let mut lib = std::collections::BTreeMap::new();
    lib.insert("custom".to_string(), archetype_params("B2").unwrap());
    let text = toml::to_string(&lib).unwrap();
    let back = load_archetypes(&text).unwrap();
    assert_eq!(back["custom"], lib["custom"]);
}

#[test]
fn trace_csv_roundtrip() {
    let tr = flat_trace(5, 2.5, 100.0, 21.0, 24.0);
    let mut buf = Vec::new();
    tr.write_csv(&mut buf).unwrap();
    let back = DisturbanceTrace::read_csv(buf.as_slice()).unwrap();
    assert_eq!(back, tr);
}

#[test]
fn scalar_toy_has_four_rows() {
    let m = LtvBuildingModel {
        a: DMatrix::from_element(1, 1, 0.9),
        b: vec![DMatrix::from_element(1, 1, 0.5)],
        e: DMatrix::from_row_slice(1, 3, &[0.1, 0.0, 0.0]),
        c: DMatrix::from_element(1, 1, 1.0),
        d: vec![DMatrix::zeros(1, 1)],
        f: DMatrix::zeros(1, 3),
        u_min: DVector::from_element(1, 0.0),
        u_max: DVector::from_element(1, 10.0),
        reserve_actuators: vec![0],
        actuator_sign: vec![1.0],
        cop: vec![3.0],
        input_cop: vec![3.0],
        floor_area: 1.0,
        step_minutes: 30,
        input_names: vec!["u".into()],
    };
    let tr = flat_trace(1, 4.0, 0.0, 18.0, 25.0);
    let x0 = DVector::from_element(1, 20.0);
    let st = stack_building(&m, &x0, &tr, 1).unwrap();
    assert_eq!(st.rows(), 4);
    let qp = 0.9 * 20.0 + 0.1 * 4.0;
    assert!((st.q[0] - (25.0 - qp)).abs() < 1e-12);
    assert_eq!(st.q[1], 10.0);
    assert!((st.q[2] - (qp - 18.0)).abs() < 1e-12);
    assert_eq!(st.q[3], 0.0);
    assert_eq!(st.g[(0, 0)], 0.5);
    assert_eq!(st.g[(1, 0)], 1.0);
    assert_eq!(st.g[(2, 0)], -0.5);
    assert_eq!(st.g[(3, 0)], -1.0);
    assert_eq!(st.s[(0, 0)], 0.5);
    assert_eq!(st.s[(1, 0)], 1.0);
}

#[test]
fn stacking_matches_simulation() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for trial in 0..40 {
        let m = toy(2 + trial % 3, &mut rng);
        let n = 6;
        let mut tr = flat_trace(n, 5.0, 50.0, 0.0, 0.0);
        for k in 0..n {
            tr.ambient[k] = rng.gen_range(-5.0..10.0);
            tr.y_min[k] = rng.gen_range(0.0..3.0);
            tr.y_max[k] = tr.y_min[k] + rng.gen_range(1.0..4.0);
        }
        let x0 = DVector::from_fn(m.n_x(), |_, _| rng.gen_range(0.0..3.0));
        let st = stack_building(&m, &x0, &tr, n).unwrap();
        let u: Vec<DVector<f64>> =
            (0..n).map(|_| DVector::from_fn(2, |_, _| rng.gen_range(-1.0..11.0))).collect();
        let du: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        // simulate with Δu applied through the reserve column
        let mut x = x0.clone();
        let mut sim_ok = true;
        for k in 0..n {
            let mut ut = u[k].clone();
            ut[0] += du[k];
            x = m.step(k, &x, &ut, &tr.v_at(k));
            let y = m.output(k, &x, &DVector::zeros(2), &tr.v_at(k))[0];
            if y > tr.y_max[k] + 1e-9 || y < tr.y_min[k] - 1e-9 {
                sim_ok = false;
            }
            if ut.iter().zip(m.u_min.iter().zip(m.u_max.iter())).any(|(v, (l, h))| v < l || v > h) {
                sim_ok = false;
            }
        }
        let uu = DVector::from_iterator(2 * n, u.iter().flat_map(|v| v.iter().copied()));
        let slack = st.slack(&uu, &DVector::from_vec(du.clone()));
        let stack_ok = slack.iter().all(|&s| s >= -1e-9);
        assert_eq!(sim_ok, stack_ok, "trial {trial}");
    }
}

#[test]
fn stacked_outputs_equal_simulated_outputs() {
    let m = make_archetype("B2", 4, 30).unwrap();
    let n = 12;
    let tr = flat_trace(n, 3.0, 80.0, 21.0, 24.0);
    let x0 = DVector::from_element(4, 21.5);
    let st = stack_building(&m, &x0, &tr, n).unwrap();
    let u: Vec<DVector<f64>> = (0..n).map(|k| DVector::from_vec(vec![(k % 5) as f64 * 4.0, 0.0, 0.5])).collect();
    let xs = m.simulate(&x0, &u, &tr);
    let uu = DVector::from_iterator(3 * n, u.iter().flat_map(|v| v.iter().copied()));
    let slack = st.slack(&uu, &DVector::zeros(2 * n));
    for k in 0..n {
        let y = xs[k + 1][0];
        assert!((slack[k] - (24.0 - y)).abs() < 1e-9);
        assert!((slack[st.output_lower_row(k, 0)] - (y - 21.0)).abs() < 1e-9);
    }
}

#[test]
fn zero_deviation_is_deterministic_feasibility() {
    let m = make_archetype("A1", 4, 30).unwrap();
    let tr = flat_trace(4, 0.0, 0.0, 21.0, 24.0);
    let st = stack_building(&m, &DVector::from_element(4, 22.0), &tr, 4).unwrap();
    let u = DVector::from_iterator(12, (0..12).map(|i| if i % 3 == 0 { 15.0 } else { 0.0 }));
    let a = st.slack(&u, &DVector::zeros(8));
    let det = &st.q - &st.g * &u;
    assert_eq!(a, det);
}

#[test]
fn heating_only_rows_are_single_signed() {
    for id in ARCHETYPE_IDS {
        for only in [HEATING, COOLING] {
            let m = make_archetype(id, 4, 30).unwrap().with_reserve_actuators(&[only]).unwrap();
            let st = stack_building(&m, &DVector::from_element(4, 22.0), &flat_trace(8, 0.0, 0.0, 21.0, 24.0), 8)
                .unwrap();
            for row in st.s.row_iter() {
                let pos = row.iter().any(|&v| v > 0.0);
                let neg = row.iter().any(|&v| v < 0.0);
                assert!(!(pos && neg), "{id}");
            }
        }
    }
}

#[test]
fn aggregation_is_block_diagonal() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let tr = flat_trace(3, 1.0, 0.0, 0.0, 2.0);
    let m1 = toy(2, &mut rng);
    let m2 = toy(3, &mut rng);
    let b1 = stack_building_id(&m1, &DVector::from_element(2, 1.0), &tr, 3, 0).unwrap();
    let b2 = stack_building_id(&m2, &DVector::from_element(3, 1.0), &tr, 3, 1).unwrap();
    let single = stack_aggregation(&[b1.clone().into()]).unwrap();
    assert_eq!(single.blocks[0], b1);
    let agg = stack_aggregation(&[b1.clone().into(), b2.clone().into()]).unwrap();
    assert_eq!(agg.rows(), b1.rows() + b2.rows());
    let g = agg.dense_g();
    assert!(g.view((0, 6), (b1.rows(), 6)).iter().all(|&v| v == 0.0));
    assert!(g.view((b1.rows(), 0), (b2.rows(), 6)).iter().all(|&v| v == 0.0));
    assert_eq!(agg.tags()[b1.rows()].building, 1);

    for _ in 0..20 {
        let u = DVector::from_fn(12, |_, _| rng.gen_range(0.0..6.0));
        let du = DVector::from_fn(6, |_, _| rng.gen_range(-1.0..1.0));
        let ok1 = b1.slack(&u.rows(0, 6).into_owned(), &du.rows(0, 3).into_owned()).min() >= 0.0;
        let ok2 = b2.slack(&u.rows(6, 6).into_owned(), &du.rows(3, 3).into_owned()).min() >= 0.0;
        let dense = &agg.q() - &g * &u - agg.dense_s() * &du;
        assert_eq!(dense.min() >= 0.0, ok1 && ok2);
    }

    let mut short = b2.clone();
    short.horizon = 2;
    assert!(stack_aggregation(&[b1.into(), short.into()]).is_err());
}

#[test]
fn initial_state_shift_matches_restack() {
    let m = make_archetype("A3", 4, 30).unwrap();
    let tr = flat_trace(10, 2.0, 60.0, 21.0, 24.0);
    let a = stack_building(&m, &DVector::from_element(4, 22.0), &tr, 10).unwrap();
    let x1 = DVector::from_vec(vec![21.0, 22.5, 23.0, 15.0]);
    let b = stack_building(&m, &x1, &tr, 10).unwrap();
    let shifted = a.with_initial_state(&x1);
    assert!((shifted.q - b.q).amax() < 1e-9);
}

#[test]
fn slp_without_terms_is_identity() {
    let bm = make_bilinear_archetype("A1", 4, 30).unwrap();
    let mut lin = bm.clone();
    lin.uv_terms.clear();
    let tr = flat_trace(4, 0.0, 300.0, 21.0, 24.0);
    let out = slp_linearize(&lin, &tr, &[], &[], 4).unwrap();
    assert_eq!(out, lin.nominal);
}

#[test]
fn slp_folds_blind_solar_product() {
    let bm = make_bilinear_archetype("A1", 4, 30).unwrap();
    let mut tr = flat_trace(3, 0.0, 0.0, 21.0, 24.0);
    tr.solar = vec![0.0, 200.0, 400.0];
    let out = slp_linearize(&bm, &tr, &[], &[], 3).unwrap();
    let term = &bm.uv_terms[0];
    for t in 0..3 {
        let expect = bm.gamma[(0, term.node)] * term.coeff * tr.solar[t];
        assert!((out.b[t][(0, BLINDS)] - expect).abs() < 1e-15);
        assert_eq!(out.b[t][(0, HEATING)], bm.nominal.b[0][(0, HEATING)]);
    }
}

fn xu_toy(coeff: f64) -> BilinearBuildingModel {
    let nominal = LtvBuildingModel {
        a: DMatrix::from_row_slice(2, 2, &[0.8, 0.1, 0.05, 0.9]),
        b: vec![DMatrix::from_row_slice(2, 1, &[0.3, 0.0])],
        e: DMatrix::from_row_slice(2, 3, &[0.1, 0.0, 0.0, 0.05, 0.0, 0.0]),
        c: DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
        d: vec![DMatrix::zeros(1, 1)],
        f: DMatrix::zeros(1, 3),
        u_min: DVector::from_element(1, 0.0),
        u_max: DVector::from_element(1, 10.0),
        reserve_actuators: vec![],
        actuator_sign: vec![],
        cop: vec![],
        input_cop: vec![1.0],
        floor_area: 1.0,
        step_minutes: 30,
        input_names: vec!["u".into()],
    };
    BilinearBuildingModel {
        nominal,
        gamma: DMatrix::identity(2, 2),
        uv_terms: vec![],
        xu_terms: vec![XuTerm { state: 0, input: 0, node: 0, coeff }],
    }
}

/// Tracks a target temperature with a fixed input sequence by solving the
/// linearized dynamics for the input that hits the target each step.
fn track(model: &LtvBuildingModel, x0: &DVector<f64>, tr: &DisturbanceTrace, n: usize)
    -> bldgres_core::Result<(Vec<DVector<f64>>, Vec<DVector<f64>>, f64)> {
    let mut xs = vec![x0.clone()];
    let mut us = vec![];
    for k in 0..n {
        let free = &model.a * &xs[k] + &model.e * tr.v_at(k);
        let b = model.b_at(k)[(0, 0)];
        let u = ((tr.y_min[k] - free[0]) / b).clamp(0.0, 10.0);
        let uv = DVector::from_element(1, u);
        xs.push(model.step(k, &xs[k], &uv, &tr.v_at(k)));
        us.push(uv);
    }
    let total = us.iter().map(|u| u[0]).sum();
    Ok((xs, us, total))
}

#[test]
fn slp_converges_on_small_bilinear_toy() {
    let bm = xu_toy(0.01);
    let tr = flat_trace(8, 5.0, 0.0, 12.0, 30.0);
    let x0 = DVector::from_vec(vec![10.0, 9.0]);
    let out = solve_slp(&bm, &tr, &x0, 8, 1e-6, 50, |m| track(m, &x0, &tr, 8)).unwrap();
    assert!(out.converged);
    assert!(out.last_change < 1e-6);
    assert!(out.iterations > 1);

    // fixed point: relinearizing at the converged trajectory reproduces the model
    let (xs, us, _) = track(&out.model, &x0, &tr, 8).unwrap();
    let again = slp_linearize(&bm, &tr, &xs, &us, 8).unwrap();
    for (a, b) in again.b.iter().zip(&out.model.b) {
        assert!((a - b).amax() < 1e-4);
    }

    let capped = solve_slp(&bm, &tr, &x0, 8, 1e-6, 1, |m| track(m, &x0, &tr, 8)).unwrap();
    assert!(!capped.converged);
    assert_eq!(capped.iterations, 1);
}

#[test]
fn slp_linear_model_converges_immediately() {
    let mut bm = xu_toy(0.0);
    bm.xu_terms.clear();
    let tr = flat_trace(4, 5.0, 0.0, 12.0, 30.0);
    let x0 = DVector::from_vec(vec![10.0, 9.0]);
    let out = solve_slp(&bm, &tr, &x0, 4, 1e-6, 20, |m| track(m, &x0, &tr, 4)).unwrap();
    assert!(out.converged);
    assert_eq!(out.iterations, 1);
}

#[test]
fn fixed_blinds_fold_into_a_linear_model() {
    let bil = make_bilinear_archetype("A1", 4, 30).unwrap();
    let lin = bil.with_fixed_input(BLINDS, 0.4).unwrap();
    assert_eq!(lin.u_min[BLINDS], 0.4);
    assert_eq!(lin.u_max[BLINDS], 0.4);
    let v = DVector::from_vec(vec![5.0, 400.0, 8.0]);
    let u = DVector::from_vec(vec![12.0, 0.0, 0.4]);
    let mut x = DVector::from_element(4, 21.0);
    let mut z = x.clone();
    for t in 0..10 {
        x = bil.step(t, &x, &u, &v);
        z = lin.step(t, &z, &u, &v);
    }
    assert!((x - z).amax() < 1e-10);
    assert!(bil.with_fixed_input(HEATING, 1.0).is_err());
    assert!(bil.with_fixed_input(7, 1.0).is_err());
}

#[test]
fn cached_stacking_matches_restack() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut m = toy(3, &mut rng);
    m.f = DMatrix::from_row_slice(1, 3, &[0.01, 0.0, 0.02]);
    let n_tr = 20;
    let tr = DisturbanceTrace {
        timestamp_min: (0..n_tr).map(|k| 30.0 * k as f64).collect(),
        ambient: (0..n_tr).map(|_| rng.gen_range(-5.0..10.0)).collect(),
        solar: (0..n_tr).map(|_| rng.gen_range(0.0..300.0)).collect(),
        gains: (0..n_tr).map(|_| rng.gen_range(0.0..10.0)).collect(),
        occupied: vec![true; n_tr],
        y_min: (0..n_tr).map(|k| 20.0 + (k % 3) as f64).collect(),
        y_max: vec![25.0; n_tr],
    };
    let mut cached = LtiStacker::new(&m, &tr, 6, 2).unwrap();
    for start in [0, 3, 14] {
        let x0 = DVector::from_fn(3, |_, _| rng.gen_range(15.0..25.0));
        let fresh = stack_building_id(&m, &x0, &tr.slice(start, 6).unwrap(), 6, 2).unwrap();
        let got = cached.block_at(&x0, &tr, start).unwrap();
        assert_eq!(got.g, fresh.g);
        assert_eq!(got.s, fresh.s);
        assert_eq!(got.tags, fresh.tags);
        assert!((&got.q - &fresh.q).amax() < 1e-9);
    }
    assert!(cached.block_at(&DVector::zeros(3), &tr, 15).is_err());
}
