use faer::{Mat, Side};
use mcse_conic::{solve, ConicProgram, LinExpr, MatExpr, SolveSettings, SolveStatus, Var};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn settings() -> SolveSettings {
    SolveSettings::default()
}

#[test]
fn hypotenuse_soc() {
    let mut p = ConicProgram::new();
    let t = p.add_scalar("t");
    let x = p.add_scalar("x");
    let y = p.add_scalar("y");
    p.add_eq("x", x, 3.0).unwrap();
    p.add_eq("y", y, 4.0).unwrap();
    p.add_soc("norm", t, vec![x.into(), y.into()]).unwrap();
    p.set_objective(LinExpr::var(t)).unwrap();
    let r = solve(&p, &settings());
    assert_eq!(r.status, SolveStatus::Optimal);
    assert!((r.objective - 5.0).abs() < 1e-6, "{}", r.objective);
    assert!((r.value(t) - 5.0).abs() < 1e-6);
}

#[test]
fn small_lp_with_bounds() {
    let mut p = ConicProgram::new();
    let x = p.add_bounded_scalar("x", Some(1.0), None);
    let y = p.add_bounded_scalar("y", Some(2.0), Some(8.0));
    p.add_le("cap", x + y, 10.0).unwrap();
    p.set_objective(x + y * 2.0 + 0.5).unwrap();
    let r = solve(&p, &settings());
    assert_eq!(r.status, SolveStatus::Optimal);
    assert!((r.objective - 5.5).abs() < 1e-6, "{}", r.objective);
}

#[test]
fn two_by_two_psd_trace() {
    // min D s.t. [[D, 1], [1, D]] ⪰ 0 → D = 1
    let mut p = ConicProgram::new();
    let d = p.add_scalar("d");
    let m = MatExpr::from_fn(2, |i, j| if i == j { d.into() } else { LinExpr::constant(1.0) });
    p.add_psd_block("blk", &m).unwrap();
    p.set_objective(LinExpr::var(d)).unwrap();
    let r = solve(&p, &settings());
    assert_eq!(r.status, SolveStatus::Optimal);
    assert!((r.value(d) - 1.0).abs() < 1e-6, "{}", r.value(d));
}

#[test]
fn one_by_one_psd_is_nonnegativity() {
    let mut p = ConicProgram::new();
    let a = p.add_scalar("a");
    let m = MatExpr::from_fn(1, |_, _| a - 2.0);
    p.add_psd_block("blk", &m).unwrap();
    p.set_objective(LinExpr::var(a)).unwrap();
    let r = solve(&p, &settings());
    assert_eq!(r.status, SolveStatus::Optimal);
    assert!((r.value(a) - 2.0).abs() < 1e-6);
}

#[test]
fn detects_primal_infeasibility() {
    let mut p = ConicProgram::new();
    let x = p.add_scalar("x");
    p.add_ge("lo", x, 1.0).unwrap();
    p.add_le("hi", x, 0.0).unwrap();
    p.set_objective(LinExpr::var(x)).unwrap();
    let r = solve(&p, &settings());
    assert_eq!(r.status, SolveStatus::PrimalInfeasible);
}

#[test]
fn detects_unboundedness() {
    let mut p = ConicProgram::new();
    let x = p.add_scalar("x");
    p.add_le("hi", x, 0.0).unwrap();
    p.set_objective(LinExpr::var(x)).unwrap();
    let r = solve(&p, &settings());
    assert_eq!(r.status, SolveStatus::DualInfeasible);
}

fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Mat<f64> {
    Mat::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
}

/// min ½(tr D₁ + tr D₂) s.t. [[D₁, M], [Mᵀ, D₂]] ⪰ 0 equals the nuclear norm.
#[test]
fn nuclear_norm_matches_svd() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (r, c) = (5, 3);
    let m = random_matrix(&mut rng, r, c);
    let oracle: f64 = m.singular_values().unwrap().iter().sum();

    let mut p = ConicProgram::new();
    let d1 = p.add_symmetric("d1", r);
    let d2 = p.add_symmetric("d2", c);
    let blk = MatExpr::from_fn(r + c, |i, j| match (i < r, j < r) {
        (true, true) => d1.at(i, j).into(),
        (false, false) => d2.at(i - r, j - r).into(),
        (true, false) => LinExpr::constant(m[(i, j - r)]),
        (false, true) => LinExpr::constant(m[(j, i - r)]),
    });
    p.add_psd_block("w", &blk).unwrap();
    p.set_objective((d1.trace() + d2.trace()).scaled(0.5)).unwrap();
    let rep = solve(&p, &settings());
    assert_eq!(rep.status, SolveStatus::Optimal);
    assert!((rep.objective - oracle).abs() < 1e-5 * (1.0 + oracle), "{} vs {oracle}", rep.objective);
}

/// min t s.t. tI − A ⪰ 0 gives the largest eigenvalue of a symmetric `A`.
#[test]
fn largest_eigenvalue_above_jacobi_cutoff() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = 12;
    let g = random_matrix(&mut rng, n, n);
    let a = Mat::from_fn(n, n, |i, j| g[(i, j)] + g[(j, i)]);
    let oracle = *a.self_adjoint_eigenvalues(Side::Lower).unwrap().last().unwrap();

    let mut p = ConicProgram::new();
    let t = p.add_scalar("t");
    let blk = MatExpr::from_fn(n, |i, j| {
        let base = LinExpr::constant(-a[(i, j)]);
        if i == j {
            base + t
        } else {
            base
        }
    });
    p.add_psd_block("shift", &blk).unwrap();
    p.set_objective(LinExpr::var(t)).unwrap();
    let rep = solve(&p, &settings());
    assert_eq!(rep.status, SolveStatus::Optimal);
    assert!((rep.value(t) - oracle).abs() < 1e-5, "{} vs {oracle}", rep.value(t));
}

/// A row wider than the sparse-factor cutoff takes the low-rank path.
#[test]
fn wide_row_uses_low_rank_correction() {
    let n = mcse_conic::DENSE_ROW_NNZ + 300;
    let mut p = ConicProgram::new();
    let xs: Vec<Var> = (0..n).map(|i| p.add_bounded_scalar(&format!("x{i}"), Some(0.0), None)).collect();
    let sum = LinExpr::from_terms(xs.iter().map(|&v| (v, 1.0)), 0.0);
    p.add_ge("total", sum, 1.0).unwrap();
    // objective weights favour the last variable
    let obj = LinExpr::from_terms(xs.iter().enumerate().map(|(i, &v)| (v, if i + 1 == n { 0.5 } else { 1.0 })), 0.0);
    p.set_objective(obj).unwrap();
    let rep = solve(&p, &settings());
    assert_eq!(rep.status, SolveStatus::Optimal);
    assert!((rep.objective - 0.5).abs() < 1e-5, "{}", rep.objective);
    assert!((rep.value(xs[n - 1]) - 1.0).abs() < 1e-4);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Box-constrained LPs have the closed form Σ min(cᵢlᵢ, cᵢuᵢ).
    #[test]
    fn box_lp_matches_closed_form(data in prop::collection::vec((-3.0f64..3.0, -2.0f64..0.0, 0.1f64..2.0), 1..8)) {
        let mut p = ConicProgram::new();
        let mut obj = LinExpr::zero();
        let mut oracle = 0.0;
        for (i, &(c, lo, width)) in data.iter().enumerate() {
            let v = p.add_bounded_scalar(&format!("v{i}"), Some(lo), Some(lo + width));
            obj.add_term(v, c);
            oracle += (c * lo).min(c * (lo + width));
        }
        p.set_objective(obj).unwrap();
        let rep = solve(&p, &settings());
        prop_assert_eq!(rep.status, SolveStatus::Optimal);
        prop_assert!((rep.objective - oracle).abs() < 1e-6 * (1.0 + oracle.abs()));
    }

    /// JSON round trip preserves the program exactly.
    #[test]
    fn program_json_round_trip(coefs in prop::collection::vec(-5.0f64..5.0, 3), k in 1.0f64..4.0) {
        let mut p = ConicProgram::new();
        let s = p.add_symmetric("s", 2);
        let x = p.add_scalar("x");
        p.add_le("tr", s.trace(), k).unwrap();
        p.add_soc("c", x, vec![s.at(0, 1) * coefs[0], LinExpr::constant(coefs[1])]).unwrap();
        let m = MatExpr::from_fn(2, |i, j| LinExpr::var(s.at(i, j)) + if i == j { coefs[2] } else { 0.0 });
        p.add_psd_block("psd", &m).unwrap();
        p.set_objective(x * 2.0).unwrap();
        let back = ConicProgram::from_json(&p.to_json().unwrap()).unwrap();
        prop_assert_eq!(back.to_json().unwrap(), p.to_json().unwrap());
        prop_assert_eq!(back.num_vars(), p.num_vars());
    }
}
