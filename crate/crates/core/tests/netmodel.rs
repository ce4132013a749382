use mcse_core::netmodel::*;
use num_complex::Complex64;
use proptest::prelude::*;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[test]
fn four_bus_parses_with_three_load_buses() {
    let case = four_bus();
    assert_eq!(case.n(), 3);
    assert_eq!(case.buses[0].kind, BusKind::Slack);
}

#[test]
fn case141_has_140_load_buses() {
    let case = case141();
    assert_eq!(case.n(), 140);
    assert_eq!(case.branches.len(), 140);
}

#[test]
fn two_bus_partition_blocks() {
    let case = two_bus(c(0.0, 0.1), c(0.0, 0.0));
    let p = build_admittance(&case).unwrap();
    assert!((p.yll[(0, 0)] - c(0.0, -10.0)).norm() < 1e-12);
    assert!((p.y0l[0] - c(0.0, 10.0)).norm() < 1e-12);
}

/// Incidence-matrix assembly `Y = Bᵀ diag(y) B + shunts`, written
/// independently of the stamp-based assembler (no taps, no charging).
fn naive_ybus(case: &NetworkCase) -> Vec<Vec<Complex64>> {
    let nb = case.buses.len();
    let mut y = vec![vec![c(0.0, 0.0); nb]; nb];
    for i in 0..nb {
        for j in 0..nb {
            for br in &case.branches {
                let inc = |b: usize| {
                    if b == br.from {
                        1.0
                    } else if b == br.to {
                        -1.0
                    } else {
                        0.0
                    }
                };
                y[i][j] += inc(i) * inc(j) / c(br.r, br.x);
            }
        }
        y[i][i] += case.buses[i].shunt;
    }
    y
}

#[test]
fn four_bus_partition_matches_naive_assembly() {
    let case = four_bus();
    let full = build_admittance(&case).unwrap().full();
    let naive = naive_ybus(&case);
    for i in 0..4 {
        for j in 0..4 {
            assert!((full[(i, j)] - naive[i][j]).norm() < 1e-12);
        }
    }
}

#[test]
fn case141_admittance_symmetric_and_invertible() {
    let p = build_admittance(&case141()).unwrap();
    let y = p.full();
    for i in 0..y.nrows() {
        for j in 0..i {
            assert!((y[(i, j)] - y[(j, i)]).norm() <= 1e-12);
        }
    }
    assert!(p.condition.is_finite());
}

#[test]
fn linear_model_exact_at_zero_load() {
    let case = four_bus();
    let p = build_admittance(&case).unwrap();
    let lpf = build_linear_model(&p, case.v0).unwrap();
    let v = lpf.predict(&[c(0.0, 0.0); 3]);
    for (a, b) in v.iter().zip(&lpf.w) {
        assert!((a - b).norm() < 1e-15);
    }
    let zero = solve_ac_power_flow(&case.scaled_loads(0.0)).unwrap();
    for (a, b) in zero.v.iter().zip(&lpf.w) {
        assert!((a - b).norm() < 1e-12);
    }
}

/// `v·conj((v − 1)/(j0.1)) = −0.1` reduces to `V = cos θ`, `sin 2θ = −0.02`;
/// bisection on `cos θ sin θ + 0.01` gives the oracle phasor.
#[test]
fn two_bus_matches_bisection() {
    let case = two_bus(c(0.0, 0.1), c(0.1, 0.0));
    let sol = solve_ac_power_flow(&case).unwrap();
    let f = |t: f64| t.cos() * t.sin() + 0.01;
    let (mut lo, mut hi) = (-std::f64::consts::FRAC_PI_4, 0.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(lo) * f(mid) <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let theta = 0.5 * (lo + hi);
    let oracle = Complex64::from_polar(theta.cos(), theta);
    assert!((sol.v[0] - oracle).norm() < 1e-9, "{} vs {oracle}", sol.v[0]);
}

#[test]
fn ac_oracle_mismatch_small() {
    for case in [four_bus(), case141()] {
        let p = build_admittance(&case).unwrap();
        let sol = solve_ac_power_flow(&case).unwrap();
        let mm = power_mismatch(&p, case.v0, &sol.v, &sol.s, sol.s0);
        assert!(mm <= 1e-8, "{}: mismatch {mm}", case.name);
    }
}

fn max_linear_error(case: &NetworkCase, t: f64) -> (f64, f64) {
    let scaled = case.scaled_loads(t);
    let p = build_admittance(&scaled).unwrap();
    let lpf = build_linear_model(&p, scaled.v0).unwrap();
    let sol = solve_ac_power_flow(&scaled).unwrap();
    let v = lpf.predict(&sol.s);
    let m = lpf.predict_magnitude(&sol.s);
    let complex = v.iter().zip(&sol.v).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    let mag = m.iter().zip(&sol.v).map(|(a, b)| (a - b.norm()).abs()).fold(0.0, f64::max);
    (complex, mag)
}

#[test]
fn four_bus_linearization_within_one_percent_at_half_load() {
    let (err, _) = max_linear_error(&four_bus(), 0.5);
    assert!(err <= 1e-2, "{err}");
}

#[test]
fn case141_magnitude_model_within_two_percent() {
    let (_, mag) = max_linear_error(&case141(), 1.0);
    assert!(mag <= 2e-2, "{mag}");
}

#[test]
fn linearization_error_grows_with_loading() {
    for case in [four_bus(), case141()] {
        let mut last = 0.0;
        for k in 0..=10 {
            let (err, _) = max_linear_error(&case, k as f64 / 10.0);
            assert!(err + 1e-12 >= last, "{}: {err} < {last}", case.name);
            last = err;
        }
    }
}

#[test]
fn synthetic_feeder_is_deterministic_and_loaded() {
    let a = synthetic_feeder(60, 3).unwrap();
    let b = synthetic_feeder(60, 3).unwrap();
    assert_eq!(a, b);
    let sol = solve_ac_power_flow(&a).unwrap();
    assert!(sol.v.iter().all(|v| v.norm() >= SYNTHETIC_MIN_VOLTAGE));
    assert!(a.total_load().re > 0.0);
}

#[test]
fn synthetic533_size() {
    let case = synthetic533();
    assert_eq!(case.n(), 532);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn oracle_consistent_on_random_feeders(seed in 0u64..1000, size in 3usize..25) {
        let case = synthetic_feeder(size, seed).unwrap();
        let p = build_admittance(&case).unwrap();
        let sol = solve_ac_power_flow(&case).unwrap();
        prop_assert!(power_mismatch(&p, case.v0, &sol.v, &sol.s, sol.s0) <= 1e-8);
        let y = p.full();
        for i in 0..y.nrows() {
            for j in 0..y.ncols() {
                prop_assert!((y[(i, j)] - y[(j, i)]).norm() <= 1e-12);
            }
        }
    }
}
