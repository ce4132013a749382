mod common;

use common::{rank_one_instance, rel_frobenius};
use mcse_conic::SolveSettings;
use mcse_core::bench::default_settings;
use mcse_core::bnb::*;
use mcse_core::models::*;
use mcse_core::netmodel::four_bus;
use mcse_core::scenario::{Scenario, ScenarioConfig};

fn four_bus_s1(seed: u64) -> (Scenario, EstimationModel) {
    let sc = Scenario::generate(
        &four_bus(),
        &ScenarioConfig {
            seed,
            fad: 0.4,
            ..ScenarioConfig::default()
        },
    )
    .unwrap();
    let plan = select_submatrices(sc.n(), &sc.adjacency, 5, None, seed).unwrap();
    let full = build_model_pfpc(&sc.meas, &sc.lpf, &sc.slack, &ProjectionParams::default(), &ToleranceConfig::default())
        .unwrap();
    let base = apply_sparse_psd(&full, &plan).unwrap();
    (sc, base)
}

fn config(max_nodes: usize) -> BnbConfig {
    BnbConfig {
        settings: default_settings(3),
        limits: BnbLimits {
            max_nodes,
            ..BnbLimits::default()
        },
        ..BnbConfig::default()
    }
}

#[test]
fn rank_one_synthetic_terminates_at_the_root() {
    for seed in 1..=3 {
        let (truth, meas) = rank_one_instance(seed);
        let model = build_model_projection(&meas, &ProjectionParams::default()).unwrap();
        let cfg = BnbConfig {
            settings: SolveSettings::default().with_tolerance(1e-8),
            ..BnbConfig::default()
        };
        let out = Search::new(&model, &meas, &cfg).run().unwrap();
        assert_eq!(out.status, BnbStatus::Optimal);
        assert_eq!(out.stats.nodes, 1);
        let inc = out.incumbent.expect("incumbent");
        assert!(inc.residual <= cfg.limits.eps_proj);
        let gap = cfg.limits.gap_tol * out.stats.root_bound.abs().max(1.0);
        assert!(inc.objective <= out.stats.root_bound + gap);
        assert!(rel_frobenius(&out.result.x, &truth) <= 1e-3);
    }
}

#[test]
fn four_bus_search_is_consistent() {
    let (sc, base) = four_bus_s1(2);
    let cfg = config(8);
    let mut trace = Vec::new();
    let out = Search::new(&base, &sc.meas, &cfg).with_trace(&mut trace).run().unwrap();
    assert_eq!(out.status, BnbStatus::NodeLimit);
    assert_eq!(out.stats.nodes, 8);
    assert_eq!(out.stats.bound_violations, 0);
    let inc = out.incumbent.as_ref().expect("rounding yields an incumbent");
    assert!(inc.residual <= cfg.limits.eps_proj, "rounded point has residual {}", inc.residual);
    assert!(out.stats.best_bound <= inc.objective + 1e-9);
    assert!(out.stats.root_bound <= out.stats.best_bound + 1e-6);
    assert!(out.stats.gap.unwrap() >= 0.0);

    let lines: Vec<serde_json::Value> = std::str::from_utf8(&trace)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 8);
    let mut last_incumbent = f64::INFINITY;
    for rec in &lines {
        for key in ["node", "depth", "bound", "residual", "action"] {
            assert!(rec.get(key).is_some(), "trace record lacks {key}");
        }
        if let (Some(b), Some(p)) = (rec["bound"].as_f64(), rec["parent_bound"].as_f64()) {
            assert!(b >= p - 1e-5 * (1.0 + p.abs()), "child bound {b} below parent {p}");
        }
        // incumbents only improve
        let inc = rec["incumbent"].as_f64().unwrap();
        assert!(inc <= last_incumbent);
        last_incumbent = inc;
    }
    assert_eq!(lines[0]["action"], "branch");
}

#[test]
fn gap_termination_and_full_relaxation_run() {
    let (sc, base) = four_bus_s1(3);
    let cfg = BnbConfig {
        termination: Termination::Gap,
        limits: BnbLimits {
            gap_tol: 0.5,
            ..config(6).limits
        },
        ..config(6)
    };
    let out = Search::new(&base, &sc.meas, &cfg).run().unwrap();
    // a 50% gap closes as soon as the rounding incumbent exists
    assert_eq!(out.status, BnbStatus::Optimal);
    assert!(out.stats.gap.unwrap() <= 0.5);

    let plan = select_submatrices(sc.n(), &sc.adjacency, 5, None, 3).unwrap();
    let full_cfg = BnbConfig {
        relaxation: NodeRelaxation::Full,
        ..config(2)
    };
    let out = bnb_solve(&sc, &ProjectionParams::default(), &plan, &ToleranceConfig::default(), &full_cfg).unwrap();
    assert!(out.stats.nodes <= 2);
    assert!(out.result.mape.is_finite());
}

#[test]
fn invalid_limits_rejected() {
    let (sc, base) = four_bus_s1(1);
    let cfg = BnbConfig {
        limits: BnbLimits {
            eps_proj: 0.0,
            ..BnbLimits::default()
        },
        ..BnbConfig::default()
    };
    assert!(Search::new(&base, &sc.meas, &cfg).run().is_err());
}

#[test]
fn search_needs_projection_variables() {
    let (sc, _) = four_bus_s1(1);
    let mc = build_model_mc(&sc.meas).unwrap();
    assert!(Search::new(&mc, &sc.meas, &config(2)).run().is_err());
}
