use faer::Mat;
use mcse_core::measgen::*;
use mcse_core::netmodel::{case141, solve_ac_power_flow};
use num_complex::Complex64;
use proptest::prelude::*;

proptest! {
    #[test]
    fn fad_count_is_exact(n in 1usize..300, fad in 0.01f64..=1.0, seed in any::<u64>()) {
        let psi = apply_fad_mask(n, fad, seed).unwrap();
        let want = (fad * (5 * n) as f64).round() as usize;
        prop_assert_eq!(psi.len(), want.min(5 * n));
        // strictly increasing row-major order, no duplicates
        prop_assert!(psi.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(psi.iter().all(|&(i, j)| i < n && j < M));
    }

    #[test]
    fn magnitude_column_is_hypot(re in -2.0f64..2.0, im in -2.0f64..2.0, p in -1.0f64..1.0, q in -1.0f64..1.0) {
        let m = build_measurement_matrix(&[Complex64::new(re, im)], &[Complex64::new(p, q)]).unwrap();
        prop_assert_eq!(m[COL_RE_V], re);
        prop_assert_eq!(m[COL_IM_V], im);
        prop_assert!((m[COL_ABS_V] - re.hypot(im)).abs() <= 1e-15);
        prop_assert_eq!((m[COL_RE_S], m[COL_IM_S]), (p, q));
    }

    #[test]
    fn zero_noise_observes_truth(seed in any::<u64>()) {
        let truth: Vec<f64> = (0..50).map(|e| 1.0 + e as f64).collect();
        let psi = apply_fad_mask(10, 0.5, seed).unwrap();
        let obs = add_noise(&truth, &psi, &NoiseSpec::zero(), seed).unwrap();
        for (&(i, j), o) in psi.iter().zip(&obs) {
            prop_assert_eq!(*o, truth[i * M + j]);
        }
    }
}

#[test]
fn generation_is_deterministic_per_seed() {
    let v = vec![Complex64::new(1.0, -0.01); 40];
    let s = vec![Complex64::new(-0.02, -0.01); 40];
    let a = MeasurementMatrix::generate(&v, &s, 0.4, NoiseSpec::default(), 3).unwrap();
    let b = MeasurementMatrix::generate(&v, &s, 0.4, NoiseSpec::default(), 3).unwrap();
    let c = MeasurementMatrix::generate(&v, &s, 0.4, NoiseSpec::default(), 4).unwrap();
    assert_eq!(a.psi, b.psi);
    assert_eq!(a.observed, b.observed);
    assert_ne!(a.psi, c.psi);
}

#[test]
fn noise_is_unbiased_with_configured_spread() {
    // every entry equals 2, fully observed, 1% relative noise
    let n = 4000;
    let truth = vec![2.0; n * M];
    let psi = apply_fad_mask(n, 1.0, 9).unwrap();
    let noise = NoiseSpec::new(0.01, 0.01, 0.01);
    let obs = add_noise(&truth, &psi, &noise, 9).unwrap();
    let count = obs.len() as f64;
    let mean = obs.iter().sum::<f64>() / count;
    let var = obs.iter().map(|o| (o - mean).powi(2)).sum::<f64>() / (count - 1.0);
    let sd = 0.02;
    // mean within 4 standard errors, spread within 3%
    assert!((mean - 2.0).abs() < 4.0 * sd / count.sqrt(), "mean {mean}");
    assert!((var.sqrt() / sd - 1.0).abs() < 0.03, "std {}", var.sqrt());
}

#[test]
fn noise_scales_with_entry_magnitude() {
    let n = 2000;
    let truth: Vec<f64> = (0..n * M).map(|e| if e % 2 == 0 { 1.0 } else { -10.0 }).collect();
    let psi = apply_fad_mask(n, 1.0, 5).unwrap();
    let obs = add_noise(&truth, &psi, &NoiseSpec::new(0.02, 0.02, 0.02), 5).unwrap();
    let rel_sd = |parity: usize| {
        let r: Vec<f64> = psi
            .iter()
            .zip(&obs)
            .filter(|((i, j), _)| (i * M + j) % 2 == parity)
            .map(|(&(i, j), o)| (o - truth[i * M + j]) / truth[i * M + j].abs())
            .collect();
        (r.iter().map(|x| x * x).sum::<f64>() / r.len() as f64).sqrt()
    };
    assert!((rel_sd(0) / 0.02 - 1.0).abs() < 0.05);
    assert!((rel_sd(1) / 0.02 - 1.0).abs() < 0.05);
}

#[test]
fn case141_truth_is_numerically_low_rank() {
    let sol = solve_ac_power_flow(&case141()).unwrap();
    let x = build_measurement_matrix(&sol.v, &sol.s).unwrap();
    let n = sol.v.len();
    let a = Mat::<f64>::from_fn(n, M, |i, j| x[i * M + j]);
    let sv = a.singular_values().unwrap();
    let energy: f64 = sv.iter().map(|s| s * s).sum();
    // the leading direction carries almost all of the energy
    assert!(sv[0] * sv[0] / energy > 0.99, "{sv:?}");
    assert!(sv[2] / sv[0] < 0.05, "{sv:?}");
}

#[test]
fn scenario_record_round_trips() {
    let v = vec![Complex64::new(0.99, -0.02); 6];
    let s = vec![Complex64::new(-0.1, -0.05); 6];
    let m = MeasurementMatrix::generate(&v, &s, 0.5, NoiseSpec::default(), 1).unwrap();
    let rec = m.scenario_record();
    let back: ScenarioRecord = serde_json::from_str(&serde_json::to_string(&rec).unwrap()).unwrap();
    assert_eq!(back, rec);
}
