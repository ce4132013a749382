use mcse_core::bench::*;
use mcse_core::measgen::NoiseSpec;

fn record(method: Method, seed: u64, mape: Option<f64>) -> BenchmarkRecord {
    BenchmarkRecord {
        case: "four-bus".into(),
        method,
        fad: 0.32,
        seed,
        k: 1,
        lambda: 10.0,
        d: None,
        n_d: None,
        delta: None,
        mape,
        phasor_mape: mape,
        wall_time: 0.5,
        status: if mape.is_some() { "optimal" } else { "time-limit" }.into(),
        nodes: None,
        objective: mape,
    }
}

fn tiny_grid() -> BenchConfig {
    BenchConfig {
        cases: vec!["four-bus".into()],
        methods: vec![Method::M2, Method::S1],
        seeds: vec![1, 2, 3],
        fads: vec![0.32],
        ..BenchConfig::default()
    }
}

#[test]
fn quantiles_and_median() {
    assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
    assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), Some(2.5));
    assert_eq!(median(&[]), None);
    assert_eq!(quantile(&[1.0, 2.0, 3.0, 4.0, 5.0], 0.25), Some(2.0));
    assert_eq!(quantile(&[1.0, 2.0], 0.75), Some(1.75));
}

#[test]
fn summary_skips_failed_cells() {
    let recs = vec![
        record(Method::S1, 1, Some(1.0)),
        record(Method::S1, 2, None),
        record(Method::S1, 3, Some(3.0)),
        record(Method::M1, 1, None),
    ];
    let rows = summarize(&recs);
    assert_eq!(rows.len(), 2);
    assert_eq!((rows[0].runs, rows[0].solved), (3, 2));
    assert_eq!(rows[0].median_mape, Some(2.0));
    assert_eq!(rows[0].best_mape, Some(1.0));
    assert_eq!(rows[0].iqr_mape, Some(1.0));
    assert_eq!(rows[1].median_mape, None);
    let md = summary_markdown(&rows);
    assert!(md.contains("| N/A |"));
    assert_eq!(md.lines().count(), 4);
}

#[test]
fn csv_round_trips_with_missing_values() {
    let mut recs = vec![record(Method::S2, 1, Some(0.25)), record(Method::M1, 2, None)];
    recs[0].nodes = Some(17);
    recs[0].d = Some(5);
    recs[0].n_d = Some(700);
    let mut buf = Vec::new();
    write_csv(&mut buf, &recs).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert_eq!(text.lines().next().unwrap(), CSV_HEADER.join(","));
    assert!(text.lines().nth(2).unwrap().contains(",NA,"));
    assert_eq!(read_csv(buf.as_slice()).unwrap(), recs);
}

#[test]
fn method_names_parse() {
    for m in [Method::M1, Method::M2, Method::Full, Method::S1, Method::S2] {
        assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
    }
    assert_eq!("S1".parse::<Method>().unwrap(), Method::S1);
    assert!("m3".parse::<Method>().is_err());
}

#[test]
fn config_parses_from_json() {
    let cfg = BenchConfig::from_json(
        r#"{"cases": ["case141"], "methods": ["s1", "s2"], "seeds": [1, 2],
            "options": {"k": 1, "lambda": 10.0, "d": 5, "n_d": 700, "time_limit": 60.0},
            "sweep": {"d": [3, 5], "n_d": [500]}}"#,
    )
    .unwrap();
    assert_eq!(cfg.methods, vec![Method::S1, Method::S2]);
    assert_eq!(cfg.options.n_d, Some(700));
    assert_eq!(cfg.sweep.unwrap().d, vec![3, 5]);
    assert_eq!(cfg.fads, vec![0.32]);
    assert!(BenchConfig::from_json(r#"{"methods": ["x"]}"#).is_err());
}

#[test]
fn empty_grid_rejected() {
    let cfg = BenchConfig {
        seeds: Vec::new(),
        ..tiny_grid()
    };
    assert!(run_benchmark(&cfg).is_err());
}

#[test]
fn benchmark_is_reproducible_across_worker_counts() {
    let strip = |mut rs: Vec<BenchmarkRecord>| {
        for r in &mut rs {
            r.wall_time = 0.0;
        }
        rs
    };
    let one = run_benchmark(&tiny_grid()).unwrap();
    assert_eq!(one.len(), 6);
    assert!(one.iter().all(|r| r.ok() && r.wall_time > 0.0));
    let two = run_benchmark(&BenchConfig {
        workers: 2,
        ..tiny_grid()
    })
    .unwrap();
    assert_eq!(strip(one.clone()), strip(two));
    // the power-flow model is the more accurate one on every seed here
    let rows = summarize(&one);
    assert!(rows[1].median_mape.unwrap() < rows[0].median_mape.unwrap());
}

#[test]
fn failing_cell_is_recorded_not_fatal() {
    let cfg = BenchConfig {
        methods: vec![Method::S1],
        seeds: vec![1],
        options: EstimateOptions {
            time_limit: Some(1e-9),
            ..EstimateOptions::default()
        },
        ..tiny_grid()
    };
    let recs = run_benchmark(&cfg).unwrap();
    assert_eq!(recs.len(), 1);
    assert!(!recs[0].ok());
    assert_eq!(recs[0].status, "time-limit");
}

#[test]
fn full_information_limit_is_accurate() {
    let cfg = BenchConfig {
        cases: vec!["case141".into()],
        methods: vec![Method::S1],
        seeds: vec![1],
        fads: vec![1.0],
        noise: NoiseSpec::zero(),
        ..tiny_grid()
    };
    for r in run_benchmark(&cfg).unwrap() {
        assert!(r.mape.unwrap() <= 0.1, "{r:?}");
    }
}

#[test]
fn sweep_runs_the_grid() {
    let cfg = BenchConfig {
        seeds: vec![1],
        sweep: Some(SweepGrid {
            d: vec![3, 4],
            n_d: vec![5, 10],
        }),
        ..tiny_grid()
    };
    let recs = sweep_hyperparameters(&cfg).unwrap();
    assert_eq!(recs.len(), 4);
    assert!(recs.iter().all(|r| r.method == Method::S1));
    assert_eq!(recs[1].d, Some(3));
    assert_eq!(recs[1].n_d, Some(10));
    let dir = tempfile::tempdir().unwrap();
    let rows = write_outputs(dir.path(), &recs).unwrap();
    assert_eq!(rows.len(), 4);
    for f in ["records.csv", "summary.csv", "summary.md"] {
        assert!(dir.path().join(f).exists());
    }
}
