use bldgres_core::dispatch::*;
use nalgebra::DVector;

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
}

// b, a from an independent reference implementation (cheby1, 0.5 dB)
const REF: [(usize, f64, &[f64], &[f64]); 3] = [
    (
        3,
        10.0 / 3600.0,
        &[5.912991039528151e-08, 1.7738973118584454e-07, 1.7738973118584454e-07, 5.912991039528151e-08],
        &[1.0, -2.989009361654941, 2.978135684386606, -0.9891258496923824],
    ),
    (
        3,
        0.2,
        &[0.015404643097177097, 0.04621392929153129, 0.04621392929153129, 0.015404643097177097],
        &[1.0, -1.989974916313894, 1.5715176988788273, -0.45830563778751643],
    ),
    (
        4,
        0.1,
        &[0.0001820402860029431, 0.0007281611440117724, 0.0010922417160176587, 0.0007281611440117724, 0.0001820402860029431],
        &[1.0, -3.532813347061916, 4.781856313968869, -2.9327531083865805, 0.6867953710969226],
    ),
];

#[test]
fn coefficients_match_the_reference_design() {
    for (order, wn, b, a) in REF {
        // wn is the edge relative to Nyquist; with 1 s sampling, T = 2/wn seconds
        let spec = design_filter(2.0 / wn / 3600.0, order, 0.5, 1.0).unwrap();
        for (x, y) in spec.b.iter().zip(b) {
            assert!(rel_close(*x, *y, 1e-7), "b {x} vs {y}");
        }
        for (x, y) in spec.a.iter().zip(a) {
            assert!(rel_close(*x, *y, 1e-9), "a {x} vs {y}");
        }
    }
}

#[test]
fn two_hour_edge_at_ten_seconds() {
    let spec = design_filter(2.0, 3, 0.5, SAMPLE_PERIOD_S).unwrap();
    assert!((spec.edge_hz * spec.sample_period_s - 10.0 / 7200.0).abs() < 1e-15);
}

#[test]
fn designs_are_stable_low_pass() {
    for t in [1.0, 2.0, 4.0, 6.0, 8.0, 12.0] {
        for order in 1..=6 {
            let spec = design_filter(t, order, 0.5, SAMPLE_PERIOD_S).unwrap();
            assert!(spec.max_pole_magnitude() < 1.0);
            let floor = 10f64.powf(-0.5 / 20.0);
            let g = spec.dc_gain();
            assert!(g <= 1.0 + 1e-6 && g >= floor - 1e-6, "T {t} order {order}: {g}");
            if order % 2 == 1 {
                assert!((g - 1.0).abs() < 1e-6);
            }
        }
    }
    assert!(design_filter(10.0 / 3600.0, 3, 0.5, SAMPLE_PERIOD_S).is_err());
    assert!(design_filter(2.0, 0, 0.5, SAMPLE_PERIOD_S).is_err());
}

#[test]
fn cascade_matches_the_direct_form() {
    let spec = design_filter(0.05, 3, 0.5, SAMPLE_PERIOD_S).unwrap();
    let x: Vec<f64> = (0..400).map(|k| ((k * 37 % 11) as f64 - 5.0) / 5.0).collect();
    let mut y = vec![0.0; x.len()];
    for k in 0..x.len() {
        let mut acc = 0.0;
        for (i, b) in spec.b.iter().enumerate() {
            if k >= i {
                acc += b * x[k - i];
            }
        }
        for (i, a) in spec.a.iter().enumerate().skip(1) {
            if k >= i {
                acc -= a * y[k - i];
            }
        }
        y[k] = acc;
    }
    for (p, q) in spec.apply(&x).iter().zip(&y) {
        assert!((p - q).abs() < 1e-10);
    }
}

#[test]
fn constant_signal_passes_to_the_low_band() {
    let spec = design_filter(0.5, 3, 0.5, SAMPLE_PERIOD_S).unwrap();
    let n = spec.transient_samples() + 500;
    let s = SfcSignal::new(vec![0.8; n], SAMPLE_PERIOD_S, SignalOrigin::Historical).unwrap();
    let d = decompose(&s, &spec).unwrap();
    // five time constants leave under 1 % of the step
    assert!(d.lf.samples.iter().all(|v| (v - 0.8).abs() < 0.008));
    assert!(d.hf.samples.iter().all(|v| v.abs() < 0.008));
    assert_eq!(d.clipped, 0);
}

#[test]
fn nyquist_tone_goes_to_the_high_band() {
    let spec = design_filter(0.5, 3, 0.5, SAMPLE_PERIOD_S).unwrap();
    let n = spec.transient_samples() + 500;
    let x: Vec<f64> = (0..n).map(|k| if k % 2 == 0 { 1.0 } else { -1.0 }).collect();
    let s = SfcSignal::new(x, SAMPLE_PERIOD_S, SignalOrigin::Historical).unwrap();
    let (lf, hf, offset) = decompose_raw(&s, &spec).unwrap();
    for (k, (l, h)) in lf.iter().zip(&hf).enumerate() {
        assert!(l.abs() < 1e-4);
        assert!((h - s.samples[offset + k]).abs() < 1e-4);
    }
}

#[test]
fn complement_is_exact_before_clipping() {
    let sig = generate_synthetic_signal(3, 20_000, &BiasProfile::single(1.0, 0.6)).unwrap();
    let spec = design_filter(1.0, 3, 0.5, SAMPLE_PERIOD_S).unwrap();
    let (lf, hf, offset) = decompose_raw(&sig, &spec).unwrap();
    for k in 0..lf.len() {
        assert!((lf[k] + hf[k] - sig.samples[offset + k]).abs() <= 1e-12);
    }
    let short = SfcSignal::new(vec![0.0; 10], SAMPLE_PERIOD_S, SignalOrigin::Historical).unwrap();
    assert!(decompose(&short, &spec).is_err());
}

#[test]
fn bias_estimates() {
    let ones = SfcSignal::new(vec![1.0; 2000], SAMPLE_PERIOD_S, SignalOrigin::Historical).unwrap();
    for t in [0.5, 1.0, 2.0] {
        assert_eq!(estimate_bias(&ones, t).unwrap(), 1.0);
    }
    let alt: Vec<f64> = (0..100).map(|k| if k % 2 == 0 { 1.0 } else { -1.0 }).collect();
    assert_eq!(estimate_bias_samples(&alt, 2).unwrap(), 0.0);
    assert!(estimate_bias_samples(&alt, 101).is_err());
    // brute force oracle
    let x: Vec<f64> = (0..60).map(|k| ((k * 13 % 7) as f64 - 3.0) / 4.0).collect();
    let brute = (0..=55).map(|s| (x[s..s + 5].iter().sum::<f64>() / 5.0).abs()).fold(0.0, f64::max);
    assert!((estimate_bias_samples(&x, 5).unwrap() - brute).abs() < 1e-12);
}

const TWO_WEEKS: usize = 14 * 24 * 360;

#[test]
fn synthetic_signal_hits_its_bias_target() {
    let p = BiasProfile::single(2.0, 0.8);
    let s = generate_synthetic_signal(11, TWO_WEEKS, &p).unwrap();
    let eps = estimate_bias(&s, 2.0).unwrap();
    assert!((0.75..=0.85).contains(&eps), "{eps}");
    assert!(s.samples.iter().all(|w| w.abs() <= 1.0));
    assert_eq!(s, generate_synthetic_signal(11, TWO_WEEKS, &p).unwrap());
    assert_ne!(s, generate_synthetic_signal(12, TWO_WEEKS, &p).unwrap());

    let plain = synthesize(11, TWO_WEEKS, &SyntheticShape::default(), 0.0, SAMPLE_PERIOD_S).unwrap();
    assert!(estimate_bias(&plain, 2.0).unwrap() < 0.4);
    assert!(generate_synthetic_signal(1, TWO_WEEKS, &BiasProfile { targets: vec![(2.0, 0.8), (12.0, 0.05)], tolerance: 0.05 }).is_err());
}

#[test]
fn high_band_is_less_biased_than_the_original() {
    let s = generate_synthetic_signal(2012, TWO_WEEKS, &BiasProfile::single(2.0, 0.78)).unwrap();
    for t in [1.0, 2.0, 4.0, 6.0, 8.0, 12.0] {
        let spec = design_filter(t, 3, 0.5, SAMPLE_PERIOD_S).unwrap();
        let d = decompose(&s, &spec).unwrap();
        let hf = estimate_bias(&d.hf, t).unwrap();
        let orig = estimate_bias(&s, t).unwrap();
        assert!(hf <= orig, "T {t}: {hf} > {orig}");
    }
}

#[test]
fn projection_bounds_every_window() {
    let s = generate_synthetic_signal(5, 40_000, &BiasProfile::single(2.0, 0.7)).unwrap();
    let window = s.samples_per(2.0);
    let (p, events) = project_onto_pec(&s, 0.3, window).unwrap();
    assert!(events > 0);
    for c in p.samples.chunks(window) {
        let mut sum = 0.0;
        for v in c {
            sum += v;
            assert!(sum.abs() <= 0.3 * window as f64 + 1e-9);
        }
    }
    let (same, none) = project_onto_pec(&s, 1.0, window).unwrap();
    assert_eq!(none, 0);
    assert_eq!(same.samples, s.samples);
}

#[test]
fn dispatch_rules() {
    let u = DVector::from_vec(vec![10.0, 0.0]);
    let (lo, hi) = (DVector::zeros(2), DVector::from_element(2, 30.0));
    let out = dispatch(&u, &[0], &[5.0], &[5.0], &[3.0], 0.0, &lo, &hi).unwrap();
    assert_eq!(out.u, u);
    let out = dispatch(&u, &[0], &[5.0], &[5.0], &[3.0], 1.0, &lo, &hi).unwrap();
    assert!((out.electric_delta[0] - 5.0 / 3.0).abs() < 1e-15);
    assert_eq!(out.u[0], 15.0);
    let out = dispatch(&u, &[0], &[4.0], &[9.0], &[3.0], -0.5, &lo, &hi).unwrap();
    assert_eq!(out.u[0] - u[0], -2.0);
    let out = dispatch(&u, &[0], &[4.0], &[25.0], &[3.0], 1.0, &lo, &hi).unwrap();
    assert_eq!(out.bound_violation, 5.0);
    assert!(dispatch(&u, &[0], &[4.0], &[9.0], &[3.0], 1.5, &lo, &hi).is_err());
}

#[test]
fn signal_csv_round_trip() {
    let s = SfcSignal::new(vec![0.5, -0.25, 1.0], SAMPLE_PERIOD_S, SignalOrigin::Historical).unwrap();
    let mut buf = Vec::new();
    s.write_csv(&mut buf).unwrap();
    assert!(String::from_utf8(buf.clone()).unwrap().starts_with("timestamp_s,w\n0,0.5"));
    assert_eq!(SfcSignal::read_csv(&buf[..]).unwrap(), s);
}
