//! Benchmark harness: accuracy metrics, single estimation runs, seeded
//! benchmark grids, hyperparameter sweeps and their summaries.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use mcse_conic::SolveSettings;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bnb::{BnbConfig, BnbLimits, BnbStats, Search};
use crate::error::{CoreError, Result};
use crate::measgen::{NoiseSpec, M};
use crate::models::{
    apply_sparse_psd, build_model_mcse, build_model_pfpc, build_model_projection, extract_state, EstimationModel,
    EstimationResult, ProjectionParams, RegScaling, SubmatrixPlan, ToleranceConfig,
};
use crate::netmodel::{load_case, NetworkCase};
use crate::scenario::{Scenario, ScenarioConfig};

/// Mean absolute percentage error `(100/n) Σ |est − true| / |true|`.
pub fn mape(estimate: &[f64], truth: &[f64]) -> Result<f64> {
    if estimate.len() != truth.len() || truth.is_empty() {
        return Err(CoreError::Dimension(format!("{} estimates for {} values", estimate.len(), truth.len())));
    }
    let mut acc = 0.0;
    for (i, (e, t)) in estimate.iter().zip(truth).enumerate() {
        if *t == 0.0 {
            return Err(CoreError::InvalidParameter(format!("true value {i} is zero")));
        }
        acc += (e - t).abs() / t.abs();
    }
    Ok(100.0 * acc / truth.len() as f64)
}

/// Mean relative phasor error `(100/n) Σ |v̂ − v| / |v|`.
pub fn phasor_mape(estimate: &[Complex64], truth: &[Complex64]) -> Result<f64> {
    if estimate.len() != truth.len() || truth.is_empty() {
        return Err(CoreError::Dimension(format!("{} estimates for {} values", estimate.len(), truth.len())));
    }
    let mut acc = 0.0;
    for (i, (e, t)) in estimate.iter().zip(truth).enumerate() {
        if t.norm() == 0.0 {
            return Err(CoreError::InvalidParameter(format!("true phasor {i} is zero")));
        }
        acc += (e - t).norm() / t.norm();
    }
    Ok(100.0 * acc / truth.len() as f64)
}

/// Solver tolerance used when none is configured: tight on small feeders,
/// looser where the first-order solver would otherwise dominate run time.
pub fn default_settings(n: usize) -> SolveSettings {
    let tol = if n <= 20 { 1e-7 } else { 1e-4 };
    SolveSettings::default().with_tolerance(tol)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Nuclear-norm completion with power-flow constraints.
    M1,
    /// Projection model without power-flow constraints.
    M2,
    /// Power-flow projection model with the full `W ⪰ 0` block.
    Full,
    /// Power-flow projection model with the submatrix rewrite.
    S1,
    /// Branch and bound on top of S1.
    S2,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::M1 => "m1",
            Method::M2 => "m2",
            Method::Full => "full",
            Method::S1 => "s1",
            Method::S2 => "s2",
        }
    }

    pub fn uses_plan(&self) -> bool {
        matches!(self, Method::S1 | Method::S2)
    }
}

impl std::str::FromStr for Method {
    type Err = CoreError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "m1" => Ok(Method::M1),
            "m2" => Ok(Method::M2),
            "full" => Ok(Method::Full),
            "s1" => Ok(Method::S1),
            "s2" => Ok(Method::S2),
            other => Err(CoreError::InvalidParameter(format!("unknown method {other:?}"))),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Everything besides the scenario that a single estimation run needs.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct EstimateOptions {
    pub k: usize,
    pub lambda: f64,
    pub scaling: RegScaling,
    /// Submatrix size.
    pub d: usize,
    /// Cap on the number of submatrices; `None` keeps one per entry of `X`.
    pub n_d: Option<usize>,
    /// Noise radius of M1; `None` derives it from the noise model.
    pub delta: Option<f64>,
    pub tolerance: ToleranceConfig,
    /// Relative solver tolerance; `None` picks [`default_settings`].
    pub solver_tol: Option<f64>,
    /// Wall-clock limit per solve (per search for S2).
    pub time_limit: Option<f64>,
    pub bnb: BnbLimits,
}

impl Default for EstimateOptions {
    fn default() -> Self {
        let params = ProjectionParams::default();
        Self {
            k: params.k,
            lambda: params.lambda,
            scaling: params.scaling,
            d: 5,
            n_d: None,
            delta: None,
            tolerance: ToleranceConfig::default(),
            solver_tol: None,
            time_limit: None,
            bnb: BnbLimits::default(),
        }
    }
}

impl EstimateOptions {
    pub fn params(&self) -> ProjectionParams {
        ProjectionParams {
            k: self.k,
            lambda: self.lambda,
            scaling: self.scaling,
        }
    }

    pub fn settings(&self, n: usize) -> SolveSettings {
        let mut s = match self.solver_tol {
            Some(t) => SolveSettings::default().with_tolerance(t),
            None => default_settings(n),
        };
        if let Some(t) = self.time_limit {
            s = s.with_time_limit(Duration::from_secs_f64(t));
        }
        s
    }

    /// Effective cap: one submatrix per entry of `X` unless configured.
    pub fn cap(&self, n: usize) -> usize {
        self.n_d.unwrap_or(n * M)
    }

    pub fn plan(&self, scenario: &Scenario) -> Result<SubmatrixPlan> {
        let n = scenario.n();
        crate::models::select_submatrices(n, &scenario.adjacency, self.d.min(n + M), Some(self.cap(n)), scenario.config.seed)
    }
}

/// The model a method solves, before any branch and bound.
pub fn build_method_model(
    method: Method,
    scenario: &Scenario,
    opts: &EstimateOptions,
    plan: Option<&SubmatrixPlan>,
) -> Result<EstimationModel> {
    let params = opts.params();
    let sc = scenario;
    match method {
        Method::M1 => build_model_mcse(&sc.meas, &sc.lpf, &sc.slack, &opts.tolerance, opts.delta),
        Method::M2 => build_model_projection(&sc.meas, &params),
        Method::Full => build_model_pfpc(&sc.meas, &sc.lpf, &sc.slack, &params, &opts.tolerance),
        Method::S1 | Method::S2 => {
            let full = build_model_pfpc(&sc.meas, &sc.lpf, &sc.slack, &params, &opts.tolerance)?;
            let owned;
            let plan = match plan {
                Some(p) => p,
                None => {
                    owned = opts.plan(sc)?;
                    &owned
                }
            };
            apply_sparse_psd(&full, plan)
        }
    }
}

/// Result of one estimation run.
#[derive(Clone, Debug)]
pub struct Estimate {
    pub result: EstimationResult,
    pub wall_time: f64,
    pub n_d: Option<usize>,
    pub bnb: Option<BnbStats>,
    /// Search status for S2.
    pub bnb_status: Option<crate::bnb::BnbStatus>,
}

/// Builds and solves `method` on `scenario`.
pub fn estimate(method: Method, scenario: &Scenario, opts: &EstimateOptions) -> Result<Estimate> {
    estimate_traced(method, scenario, opts, None)
}

/// [`estimate`] that streams the S2 search trace as JSON lines to `trace`.
pub fn estimate_traced(
    method: Method,
    scenario: &Scenario,
    opts: &EstimateOptions,
    trace: Option<&mut dyn Write>,
) -> Result<Estimate> {
    let start = Instant::now();
    let plan = if method.uses_plan() { Some(opts.plan(scenario)?) } else { None };
    let model = build_method_model(method, scenario, opts, plan.as_ref())?;
    let settings = opts.settings(scenario.n());
    let n_d = plan.as_ref().map(|p| p.n_d());
    if method == Method::S2 {
        let mut limits = opts.bnb.clone();
        if let Some(t) = opts.time_limit {
            limits.time_limit = Duration::from_secs_f64(t);
        }
        let mut settings = settings;
        settings.time_limit = None;
        let config = BnbConfig {
            limits,
            settings,
            ..BnbConfig::default()
        };
        let search = Search::new(&model, &scenario.meas, &config);
        let out = match trace {
            Some(w) => search.with_trace(w).run()?,
            None => search.run()?,
        };
        return Ok(Estimate {
            result: out.result,
            wall_time: start.elapsed().as_secs_f64(),
            n_d,
            bnb: Some(out.stats),
            bnb_status: Some(out.status),
        });
    }
    let report = model.solve(&settings);
    let result = extract_state(&model, &report, &scenario.meas)?;
    Ok(Estimate {
        result,
        wall_time: start.elapsed().as_secs_f64(),
        n_d,
        bnb: None,
        bnb_status: None,
    })
}

/// One `(case, method, seed)` cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRecord {
    pub case: String,
    pub method: Method,
    pub fad: f64,
    pub seed: u64,
    pub k: usize,
    pub lambda: f64,
    pub d: Option<usize>,
    /// Requested submatrix cap (the plan may hold fewer distinct sets).
    pub n_d: Option<usize>,
    pub delta: Option<f64>,
    /// MAPE of `|v|` in percent; `None` when the cell failed.
    pub mape: Option<f64>,
    /// Mean relative phasor error in percent.
    pub phasor_mape: Option<f64>,
    pub wall_time: f64,
    pub status: String,
    /// Nodes explored (S2 only).
    pub nodes: Option<usize>,
    pub objective: Option<f64>,
}

impl BenchmarkRecord {
    pub fn ok(&self) -> bool {
        self.mape.is_some()
    }
}

/// Fixed CSV column order.
pub const CSV_HEADER: [&str; 15] = [
    "case",
    "method",
    "fad",
    "seed",
    "k",
    "lambda",
    "d",
    "n_d",
    "delta",
    "mape",
    "phasor_mape",
    "wall_time",
    "status",
    "nodes",
    "objective",
];

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

/// Writes records as CSV with [`CSV_HEADER`]; missing values are `NA`.
pub fn write_csv<W: Write>(out: W, records: &[BenchmarkRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in records {
        w.write_record([
            r.case.clone(),
            r.method.to_string(),
            r.fad.to_string(),
            r.seed.to_string(),
            r.k.to_string(),
            r.lambda.to_string(),
            opt(r.d),
            opt(r.n_d),
            opt(r.delta),
            opt(r.mape),
            opt(r.phasor_mape),
            format!("{:.6}", r.wall_time),
            r.status.clone(),
            opt(r.nodes),
            opt(r.objective),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads records written by [`write_csv`].
pub fn read_csv<R: std::io::Read>(input: R) -> Result<Vec<BenchmarkRecord>> {
    let mut rd = csv::Reader::from_reader(input);
    let parse_opt = |s: &str| -> Option<String> { (s != "NA" && !s.is_empty()).then(|| s.to_string()) };
    let bad = |what: &str, v: &str| CoreError::InvalidParameter(format!("bad {what} {v:?} in CSV"));
    let mut out = Vec::new();
    for row in rd.records() {
        let row = row?;
        let f = |i: usize| row.get(i).unwrap_or("");
        let num = |i: usize, what: &str| f(i).parse::<f64>().map_err(|_| bad(what, f(i)));
        let onum = |i: usize, what: &str| -> Result<Option<f64>> {
            parse_opt(f(i)).map(|s| s.parse::<f64>().map_err(|_| bad(what, &s))).transpose()
        };
        let ouint = |i: usize, what: &str| -> Result<Option<usize>> {
            parse_opt(f(i)).map(|s| s.parse::<usize>().map_err(|_| bad(what, &s))).transpose()
        };
        out.push(BenchmarkRecord {
            case: f(0).to_string(),
            method: f(1).parse()?,
            fad: num(2, "fad")?,
            seed: f(3).parse().map_err(|_| bad("seed", f(3)))?,
            k: f(4).parse().map_err(|_| bad("k", f(4)))?,
            lambda: num(5, "lambda")?,
            d: ouint(6, "d")?,
            n_d: ouint(7, "n_d")?,
            delta: onum(8, "delta")?,
            mape: onum(9, "mape")?,
            phasor_mape: onum(10, "phasor_mape")?,
            wall_time: num(11, "wall_time")?,
            status: f(12).to_string(),
            nodes: ouint(13, "nodes")?,
            objective: onum(14, "objective")?,
        });
    }
    Ok(out)
}

/// A benchmark grid read from JSON.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchConfig {
    /// Built-in names (`four-bus`, `case141`, `synthetic533`) or case files.
    pub cases: Vec<String>,
    pub methods: Vec<Method>,
    pub seeds: Vec<u64>,
    pub fads: Vec<f64>,
    pub noise: NoiseSpec,
    pub options: EstimateOptions,
    /// `(d, n_d)` grid for sweeps; empty runs the plain grid.
    pub sweep: Option<SweepGrid>,
    /// `k` values to repeat every cell with; empty keeps `options.k`.
    pub ks: Vec<usize>,
    /// Worker threads; `0` uses the available parallelism.
    pub workers: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepGrid {
    pub d: Vec<usize>,
    pub n_d: Vec<usize>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            cases: vec!["four-bus".into()],
            methods: vec![Method::M1, Method::M2, Method::S1, Method::S2],
            seeds: (1..=10).collect(),
            fads: vec![0.32],
            noise: NoiseSpec::default(),
            options: EstimateOptions::default(),
            sweep: None,
            ks: Vec::new(),
            workers: 1,
        }
    }
}

impl BenchConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    fn validate(&self) -> Result<()> {
        if self.cases.is_empty() || self.methods.is_empty() || self.seeds.is_empty() || self.fads.is_empty() {
            return Err(CoreError::InvalidParameter("cases, methods, seeds and fads must be non-empty".into()));
        }
        self.noise.validate()
    }
}

/// One unit of work in a grid.
#[derive(Clone, Debug)]
struct Cell {
    case: usize,
    method: Method,
    fad: f64,
    seed: u64,
    opts: EstimateOptions,
}

fn run_cell(case: &NetworkCase, cell: &Cell, noise: NoiseSpec) -> BenchmarkRecord {
    let start = Instant::now();
    let opts = &cell.opts;
    let n = case.n();
    let plan_fields = cell.method.uses_plan();
    let mut rec = BenchmarkRecord {
        case: case.name.clone(),
        method: cell.method,
        fad: cell.fad,
        seed: cell.seed,
        k: opts.k,
        lambda: opts.lambda,
        d: plan_fields.then_some(opts.d),
        n_d: plan_fields.then(|| opts.cap(n)),
        delta: None,
        mape: None,
        phasor_mape: None,
        wall_time: 0.0,
        status: String::new(),
        nodes: None,
        objective: None,
    };
    let cfg = ScenarioConfig {
        fad: cell.fad,
        seed: cell.seed,
        noise,
        ..ScenarioConfig::default()
    };
    let outcome = Scenario::generate(case, &cfg).and_then(|sc| {
        if cell.method == Method::M1 {
            rec.delta = Some(opts.delta.unwrap_or_else(|| crate::models::default_delta(&sc.meas)));
        }
        estimate(cell.method, &sc, opts)
    });
    match outcome {
        Ok(est) => {
            rec.mape = Some(est.result.mape);
            rec.phasor_mape = Some(est.result.phasor_mape);
            rec.objective = Some(est.result.objective);
            if let (Some(got), Some(want)) = (est.n_d, rec.n_d) {
                if got < want {
                    log::info!("{} d = {}: only {got} distinct submatrices for n_d = {want}", case.name, opts.d);
                }
            }
            rec.status = match est.bnb_status {
                Some(s) => s.as_str().to_string(),
                None => est.result.status.as_str().to_string(),
            };
            rec.nodes = est.bnb.map(|s| s.nodes);
        }
        Err(CoreError::NotOptimal(status)) => rec.status = status.as_str().to_string(),
        Err(e) => {
            log::warn!("{} {} seed {}: {e}", case.name, cell.method, cell.seed);
            rec.status = "error".into();
        }
    }
    rec.wall_time = start.elapsed().as_secs_f64().max(f64::MIN_POSITIVE);
    rec
}

fn run_cells(cases: &[NetworkCase], cells: &[Cell], noise: NoiseSpec, workers: usize) -> Vec<BenchmarkRecord> {
    let workers = match workers {
        0 => std::thread::available_parallelism().map_or(1, |n| n.get()),
        w => w,
    }
    .min(cells.len().max(1));
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<BenchmarkRecord>>> = Mutex::new(vec![None; cells.len()]);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(cell) = cells.get(i) else { break };
                let rec = run_cell(&cases[cell.case], cell, noise);
                log::info!(
                    "{} {} fad {} seed {}: {} mape {} ({:.2}s)",
                    rec.case,
                    rec.method,
                    rec.fad,
                    rec.seed,
                    rec.status,
                    opt(rec.mape.map(|m| format!("{m:.4}"))),
                    rec.wall_time
                );
                slots.lock().expect("record store poisoned")[i] = Some(rec);
            });
        }
    });
    slots
        .into_inner()
        .expect("record store poisoned")
        .into_iter()
        .map(|r| r.expect("every cell produces a record"))
        .collect()
}

fn load_cases(names: &[String]) -> Result<Vec<NetworkCase>> {
    names.iter().map(|c| load_case(c)).collect()
}

/// Runs every `(case, fad, method, k, seed)` cell of the grid. Failed
/// cells are recorded with their status and no MAPE. Records come back in
/// grid order regardless of the number of workers.
pub fn run_benchmark(config: &BenchConfig) -> Result<Vec<BenchmarkRecord>> {
    config.validate()?;
    if config.sweep.is_some() {
        return sweep_hyperparameters(config);
    }
    let cases = load_cases(&config.cases)?;
    let ks = if config.ks.is_empty() { vec![config.options.k] } else { config.ks.clone() };
    let mut cells = Vec::new();
    for case in 0..cases.len() {
        for &fad in &config.fads {
            for &method in &config.methods {
                for &k in &ks {
                    for &seed in &config.seeds {
                        let mut opts = config.options.clone();
                        opts.k = k;
                        cells.push(Cell {
                            case,
                            method,
                            fad,
                            seed,
                            opts,
                        });
                    }
                }
            }
        }
    }
    Ok(run_cells(&cases, &cells, config.noise, config.workers))
}

/// S1 over the `(d, n_d)` grid of `config.sweep` (defaults to the grid
/// `d ∈ {3, 5, 7}`, `n_d ∈ {500, 700, 900}`).
pub fn sweep_hyperparameters(config: &BenchConfig) -> Result<Vec<BenchmarkRecord>> {
    config.validate()?;
    let grid = config.sweep.clone().unwrap_or(SweepGrid {
        d: vec![3, 5, 7],
        n_d: vec![500, 700, 900],
    });
    let cases = load_cases(&config.cases)?;
    let mut cells = Vec::new();
    for case in 0..cases.len() {
        for &fad in &config.fads {
            for &d in &grid.d {
                for &n_d in &grid.n_d {
                    for &seed in &config.seeds {
                        let mut opts = config.options.clone();
                        opts.d = d;
                        opts.n_d = Some(n_d);
                        cells.push(Cell {
                            case,
                            method: Method::S1,
                            fad,
                            seed,
                            opts,
                        });
                    }
                }
            }
        }
    }
    Ok(run_cells(&cases, &cells, config.noise, config.workers))
}

/// Median of a non-empty sample (mean of the middle pair for even sizes).
pub fn median(values: &[f64]) -> Option<f64> {
    quantile(values, 0.5)
}

/// Linear-interpolation quantile (type 7).
pub fn quantile(values: &[f64], q: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let h = (v.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    Some(v[lo] + (h - lo as f64) * (v[hi] - v[lo]))
}

/// Aggregate over the seeds of one configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub case: String,
    pub method: Method,
    pub fad: f64,
    pub k: usize,
    pub lambda: f64,
    pub d: Option<usize>,
    pub n_d: Option<usize>,
    pub runs: usize,
    pub solved: usize,
    pub median_mape: Option<f64>,
    pub iqr_mape: Option<f64>,
    pub best_mape: Option<f64>,
    pub median_time: f64,
}

type GroupKey = (String, Method, u64, usize, u64, Option<usize>, Option<usize>);

/// Groups records by configuration (everything but the seed). MAPE
/// statistics use solved cells only; `N/A` groups have no solved cell.
pub fn summarize(records: &[BenchmarkRecord]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<GroupKey, Vec<&BenchmarkRecord>> = BTreeMap::new();
    let mut order = Vec::new();
    for r in records {
        let key = (r.case.clone(), r.method, r.fad.to_bits(), r.k, r.lambda.to_bits(), r.d, r.n_d);
        if !groups.contains_key(&key) {
            order.push(key.clone());
        }
        groups.entry(key).or_default().push(r);
    }
    order
        .into_iter()
        .map(|key| {
            let rs = &groups[&key];
            let mapes: Vec<f64> = rs.iter().filter_map(|r| r.mape).collect();
            let times: Vec<f64> = rs.iter().map(|r| r.wall_time).collect();
            let iqr = match (quantile(&mapes, 0.75), quantile(&mapes, 0.25)) {
                (Some(a), Some(b)) => Some(a - b),
                _ => None,
            };
            SummaryRow {
                case: key.0.clone(),
                method: key.1,
                fad: f64::from_bits(key.2),
                k: key.3,
                lambda: f64::from_bits(key.4),
                d: key.5,
                n_d: key.6,
                runs: rs.len(),
                solved: mapes.len(),
                median_mape: median(&mapes),
                iqr_mape: iqr,
                best_mape: mapes.iter().copied().min_by(f64::total_cmp),
                median_time: median(&times).unwrap_or(0.0),
            }
        })
        .collect()
}

fn fmt_opt(v: Option<f64>, digits: usize) -> String {
    v.map_or_else(|| "N/A".to_string(), |x| format!("{x:.digits$}"))
}

/// Markdown table of [`summarize`] output.
pub fn summary_markdown(rows: &[SummaryRow]) -> String {
    let mut s = String::from(
        "| case | method | fad | k | lambda | d | n_d | solved | median MAPE (%) | IQR | best | median time (s) |\n\
         |---|---|---|---|---|---|---|---|---|---|---|---|\n",
    );
    for r in rows {
        s.push_str(&format!(
            "| {} | {} | {} | {} | {} | {} | {} | {}/{} | {} | {} | {} | {:.3} |\n",
            r.case,
            r.method,
            r.fad,
            r.k,
            r.lambda,
            opt(r.d),
            opt(r.n_d),
            r.solved,
            r.runs,
            fmt_opt(r.median_mape, 4),
            fmt_opt(r.iqr_mape, 4),
            fmt_opt(r.best_mape, 4),
            r.median_time
        ));
    }
    s
}

/// Summary rows as CSV.
pub fn write_summary_csv<W: Write>(out: W, rows: &[SummaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "case",
        "method",
        "fad",
        "k",
        "lambda",
        "d",
        "n_d",
        "runs",
        "solved",
        "median_mape",
        "iqr_mape",
        "best_mape",
        "median_time",
    ])?;
    for r in rows {
        w.write_record([
            r.case.clone(),
            r.method.to_string(),
            r.fad.to_string(),
            r.k.to_string(),
            r.lambda.to_string(),
            opt(r.d),
            opt(r.n_d),
            r.runs.to_string(),
            r.solved.to_string(),
            opt(r.median_mape),
            opt(r.iqr_mape),
            opt(r.best_mape),
            r.median_time.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `records.csv`, `summary.csv` and `summary.md` into `dir`.
pub fn write_outputs(dir: &Path, records: &[BenchmarkRecord]) -> Result<Vec<SummaryRow>> {
    std::fs::create_dir_all(dir)?;
    write_csv(std::fs::File::create(dir.join("records.csv"))?, records)?;
    let rows = summarize(records);
    write_summary_csv(std::fs::File::create(dir.join("summary.csv"))?, &rows)?;
    std::fs::write(dir.join("summary.md"), summary_markdown(&rows))?;
    Ok(rows)
}
