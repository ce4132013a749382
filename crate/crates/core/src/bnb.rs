//! Branch-and-bound over eigenvector disjunctions for the rank constraint
//! `Y = UUᵀ` of the projection model.
//!
//! Every node solves the convex relaxation (normally the submatrix-relaxed
//! model) plus secant cuts of the form
//! `zᵀYz ≤ Σ_l [(a_l + b_l)·U_lᵀz − a_l·b_l]`, `a_l ≤ U_lᵀz ≤ b_l`,
//! which hold at every `Y = UUᵀ` because `t² ≤ (a + b)t − ab` on `[a, b]`.
//! Nodes are explored best-first. Incumbents come from a rounding heuristic
//! that fixes `Y` to the projector onto the top-`k` eigenvectors of the node
//! solution and re-solves for the remaining variables.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::io::Write;
use std::time::{Duration, Instant};

use faer::{Mat, Side};
use mcse_conic::{solve_with, Admm, AdmmParams, ConicProgram, LinExpr, MatExpr, SolveReport, SolveSettings};
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::measgen::{MeasurementMatrix, M};
use crate::models::{
    apply_sparse_psd, build_model_pfpc, extract_state, EstimationModel, EstimationResult, ProjectionHandles,
    ProjectionParams, SubmatrixPlan, ToleranceConfig, SUB_LABEL, WBLOCK_LABEL,
};
use crate::scenario::Scenario;

/// Interval width below which a node cannot be split further.
pub const MIN_WIDTH: f64 = 1e-9;
/// Cuts whose directions agree to this cosine are treated as one cut.
const PARALLEL_COS: f64 = 1.0 - 1e-9;

/// Secant over-approximation of `t²` on `[lower, upper]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    pub const ROOT: Interval = Interval { lower: -1.0, upper: 1.0 };

    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if !(lower <= upper) {
            return Err(CoreError::InvalidParameter(format!("interval [{lower}, {upper}] is empty")));
        }
        if lower < -1.0 - 1e-12 || upper > 1.0 + 1e-12 {
            return Err(CoreError::InvalidParameter(format!("interval [{lower}, {upper}] leaves [-1, 1]")));
        }
        Ok(Self { lower, upper })
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    /// Right-hand side `(a + b)t − ab` of the secant at `t`.
    pub fn secant(&self, t: f64) -> f64 {
        (self.lower + self.upper) * t - self.lower * self.upper
    }

    /// `(t − a)(b − t)`: how far the secant lies above `t²` at `t`.
    pub fn secant_gap(&self, t: f64) -> f64 {
        (t - self.lower) * (self.upper - t)
    }

    /// Split point for `t̂`: `t̂` itself, or the midpoint when `t̂` sits on
    /// (or outside) an endpoint.
    pub fn split_point(&self, t_hat: f64) -> f64 {
        if t_hat - self.lower <= MIN_WIDTH || self.upper - t_hat <= MIN_WIDTH {
            0.5 * (self.lower + self.upper)
        } else {
            t_hat
        }
    }
}

/// One direction `z` with an interval on `U_lᵀz` for every column `l`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SecantCut {
    /// Unit vector of length `n`.
    pub z: Vec<f64>,
    pub intervals: Vec<Interval>,
}

impl SecantCut {
    /// Cut along `z` (normalized here) with `[−1, 1]` on each of `k` columns.
    pub fn new(z: &[f64], k: usize) -> Result<Self> {
        let norm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(CoreError::InvalidParameter("cut direction must be a nonzero finite vector".into()));
        }
        Ok(Self {
            z: z.iter().map(|v| v / norm).collect(),
            intervals: vec![Interval::ROOT; k],
        })
    }

    /// Value of `zᵀYz` for a row-major `n × n` matrix.
    pub fn quadratic(&self, y: &[f64]) -> f64 {
        let n = self.z.len();
        let mut acc = 0.0;
        for i in 0..n {
            let row: f64 = (0..n).map(|j| y[i * n + j] * self.z[j]).sum();
            acc += self.z[i] * row;
        }
        acc
    }

    /// `U_lᵀz` for a row-major `n × k` matrix.
    pub fn projections(&self, u: &[f64]) -> Vec<f64> {
        let k = self.intervals.len();
        (0..k)
            .map(|l| self.z.iter().enumerate().map(|(i, zi)| zi * u[i * k + l]).sum())
            .collect()
    }

    /// Largest violation of the cut and its boxes at `(Y, U)`; zero or
    /// negative means satisfied.
    pub fn violation(&self, y: &[f64], u: &[f64]) -> f64 {
        let t = self.projections(u);
        let rhs: f64 = self.intervals.iter().zip(&t).map(|(iv, &tl)| iv.secant(tl)).sum();
        let mut worst = self.quadratic(y) - rhs;
        for (iv, &tl) in self.intervals.iter().zip(&t) {
            worst = worst.max(iv.lower - tl).max(tl - iv.upper);
        }
        worst
    }

    /// Adds the secant row and the boxes to `prog`.
    pub fn add_to(&self, prog: &mut ConicProgram, handles: &ProjectionHandles) -> Result<()> {
        let n = self.z.len();
        if handles.y.dim() != n || handles.u.cols() != self.intervals.len() {
            return Err(CoreError::Dimension(format!(
                "cut for n = {n}, k = {} does not match the model",
                self.intervals.len()
            )));
        }
        let quad = LinExpr::from_terms(
            (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| (handles.y.at(i, j), self.z[i] * self.z[j])),
            0.0,
        );
        let mut rhs = LinExpr::zero();
        for (l, iv) in self.intervals.iter().enumerate() {
            let t = LinExpr::from_terms((0..n).map(|i| (handles.u.at(i, l), self.z[i])), 0.0);
            rhs.add_scaled(&t, iv.lower + iv.upper);
            rhs.add_constant(-iv.lower * iv.upper);
            prog.add_ge("cut_box", t.clone(), iv.lower)?;
            prog.add_le("cut_box", t, iv.upper)?;
        }
        prog.add_le("secant_cut", quad, rhs)?;
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BnbNode {
    pub id: usize,
    pub parent: Option<usize>,
    pub depth: usize,
    pub cuts: Vec<SecantCut>,
    /// Relaxation value of the parent; a lower bound for this node.
    pub parent_bound: f64,
}

/// Best feasible point found so far.
#[derive(Clone, Debug)]
pub struct BnbIncumbent {
    pub objective: f64,
    pub result: EstimationResult,
    /// `‖Ŷ − ÛÛᵀ‖_F` at the incumbent.
    pub residual: f64,
    /// Nodes solved when it was found.
    pub found_at: usize,
}

/// Outcome of [`branch`].
#[derive(Clone, Debug)]
pub enum Branching {
    Children(Box<[BnbNode; 2]>),
    /// The chosen interval is narrower than [`MIN_WIDTH`].
    Degenerate,
}

/// Which relaxation each node solves.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NodeRelaxation {
    /// The base model as given (submatrix-relaxed when built by
    /// [`bnb_solve`]).
    #[default]
    Base,
    /// The full `W ⪰ 0` block; only meaningful in [`bnb_solve`].
    Full,
}

/// When the search stops besides the node and time limits.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    /// Stop at the first node whose relaxation already satisfies
    /// `‖Ŷ − ÛÛᵀ‖_F ≤ ε_proj`, or when no open node can beat the incumbent.
    #[default]
    Residual,
    /// Additionally stop as soon as the global relative gap is below the
    /// tolerance.
    Gap,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BnbLimits {
    pub max_nodes: usize,
    pub time_limit: Duration,
    /// Relative gap tolerance.
    pub gap_tol: f64,
    /// Frobenius tolerance on `Ŷ − ÛÛᵀ`.
    pub eps_proj: f64,
}

impl Default for BnbLimits {
    fn default() -> Self {
        Self {
            max_nodes: 50,
            time_limit: Duration::from_secs(600),
            gap_tol: 1e-3,
            eps_proj: 1e-4,
        }
    }
}

impl BnbLimits {
    pub fn validate(&self) -> Result<()> {
        if self.max_nodes == 0 || self.time_limit.is_zero() {
            return Err(CoreError::InvalidParameter("node and time limits must be positive".into()));
        }
        if !(self.gap_tol >= 0.0) || !(self.eps_proj > 0.0) {
            return Err(CoreError::InvalidParameter("gap tolerance must be nonnegative and eps_proj positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct BnbConfig {
    pub limits: BnbLimits,
    pub termination: Termination,
    pub relaxation: NodeRelaxation,
    pub settings: SolveSettings,
    /// Solver parameters for node relaxations.
    pub admm: AdmmParams,
    /// Solver parameters for the rounding heuristic.
    pub rounding_admm: AdmmParams,
    /// Run the rounding heuristic at every node (otherwise root only).
    pub heuristic_every_node: bool,
    /// Iteration cap per node relaxation; a node that hits it is dropped
    /// and counted as a failed solve.
    pub node_iterations: usize,
}

impl BnbConfig {
    /// Solver parameters tuned for nodes carrying secant cuts, whose duality
    /// gap tends to stall under the default scale adaptation.
    pub fn node_admm() -> AdmmParams {
        AdmmParams {
            scale_update_factor: 1.5,
            gap_aware_scale: true,
            ..AdmmParams::default()
        }
    }
}

impl Default for BnbConfig {
    fn default() -> Self {
        Self {
            limits: BnbLimits::default(),
            termination: Termination::default(),
            relaxation: NodeRelaxation::default(),
            settings: SolveSettings::default(),
            admm: Self::node_admm(),
            rounding_admm: AdmmParams::default(),
            heuristic_every_node: true,
            node_iterations: 20_000,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BnbStatus {
    /// Gap closed or a rank-feasible relaxation reached.
    Optimal,
    NodeLimit,
    TimeLimit,
    /// No incumbent; the result is the best relaxation.
    BoundOnly,
}

impl BnbStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            BnbStatus::Optimal => "optimal",
            BnbStatus::NodeLimit => "node-limit",
            BnbStatus::TimeLimit => "time-limit",
            BnbStatus::BoundOnly => "bound-only",
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct BnbStats {
    pub nodes: usize,
    pub root_bound: f64,
    /// Smallest bound over open nodes at exit (the incumbent value when the
    /// tree was exhausted).
    pub best_bound: f64,
    pub incumbent: Option<f64>,
    /// `(incumbent − best bound) / max(1, |incumbent|)`.
    pub gap: Option<f64>,
    pub wall_time: f64,
    pub max_depth: usize,
    /// Children whose relaxation fell below the parent's by more than the
    /// combined accuracy of the two solves.
    pub bound_violations: usize,
    /// Largest `parent − child` bound decrease observed.
    pub worst_bound_drop: f64,
    pub failed_solves: usize,
}

/// One line of the search trace.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TraceRecord {
    pub node: usize,
    pub parent: Option<usize>,
    pub depth: usize,
    pub bound: Option<f64>,
    pub parent_bound: f64,
    pub residual: Option<f64>,
    pub incumbent: Option<f64>,
    pub action: &'static str,
}

#[derive(Clone, Debug)]
pub struct BnbOutcome {
    pub status: BnbStatus,
    /// Incumbent estimate, or the best relaxation when `status` is
    /// [`BnbStatus::BoundOnly`].
    pub result: EstimationResult,
    pub incumbent: Option<BnbIncumbent>,
    pub stats: BnbStats,
    /// Distinct cuts carried by the nodes the search created.
    pub cuts: Vec<SecantCut>,
}

/// Row-major `Ŷ − ÛÛᵀ`.
pub fn projection_gap(y: &[f64], u: &[f64], n: usize, k: usize) -> Vec<f64> {
    let mut r = y.to_vec();
    for i in 0..n {
        for j in 0..n {
            let uu: f64 = (0..k).map(|l| u[i * k + l] * u[j * k + l]).sum();
            r[i * n + j] -= uu;
        }
    }
    r
}

fn frobenius(a: &[f64]) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Eigen-decomposition of a symmetric row-major matrix, eigenvalues
/// ascending, eigenvectors as columns of a row-major `n × n` matrix.
fn sym_eigen(a: &[f64], n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let m = Mat::<f64>::from_fn(n, n, |i, j| 0.5 * (a[i * n + j] + a[j * n + i]));
    let evd = m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| CoreError::InvalidParameter(format!("eigendecomposition failed: {e:?}")))?;
    let s = evd.S();
    let u = evd.U();
    let vals = (0..n).map(|i| s[i]).collect();
    let vecs = (0..n * n).map(|e| u[(e / n, e % n)]).collect();
    Ok((vals, vecs))
}

/// Splits `node` along the eigenvector of `Ŷ − ÛÛᵀ` with the largest
/// `|λ|`. A cut with a parallel direction is refined; otherwise a new cut
/// starts from `[−1, 1]`. The column whose secant is loosest at `Û_lᵀz` is
/// split at `Û_lᵀz` (midpoint when that sits on an endpoint).
pub fn branch(node: &BnbNode, y: &[f64], u: &[f64], k: usize, next_id: usize) -> Result<Branching> {
    let n = (y.len() as f64).sqrt().round() as usize;
    if n * n != y.len() || u.len() != n * k {
        return Err(CoreError::Dimension(format!("Y has {} entries and U {} for k = {k}", y.len(), u.len())));
    }
    let gap = projection_gap(y, u, n, k);
    let (vals, vecs) = sym_eigen(&gap, n)?;
    let top = (0..n)
        .max_by(|&a, &b| vals[a].abs().total_cmp(&vals[b].abs()))
        .ok_or_else(|| CoreError::Dimension("empty Y".into()))?;
    let z: Vec<f64> = (0..n).map(|i| vecs[i * n + top]).collect();

    let mut cuts = node.cuts.clone();
    let existing = cuts.iter().position(|c| {
        let dot: f64 = c.z.iter().zip(&z).map(|(a, b)| a * b).sum();
        dot.abs() >= PARALLEL_COS
    });
    let idx = match existing {
        Some(i) => i,
        None => {
            cuts.push(SecantCut::new(&z, k)?);
            cuts.len() - 1
        }
    };
    let cut = &cuts[idx];
    let t = cut.projections(u);
    let mut col = 0;
    for l in 1..k {
        if cut.intervals[l].secant_gap(t[l]) > cut.intervals[col].secant_gap(t[col]) {
            col = l;
        }
    }
    let iv = cut.intervals[col];
    if iv.width() < MIN_WIDTH {
        return Ok(Branching::Degenerate);
    }
    let split = iv.split_point(t[col].clamp(iv.lower, iv.upper));
    let mut left = cuts.clone();
    left[idx].intervals[col] = Interval { lower: iv.lower, upper: split };
    let mut right = cuts;
    right[idx].intervals[col] = Interval { lower: split, upper: iv.upper };
    let child = |id, cuts| BnbNode {
        id,
        parent: Some(node.id),
        depth: node.depth + 1,
        cuts,
        parent_bound: f64::NAN,
    };
    Ok(Branching::Children(Box::new([child(next_id, left), child(next_id + 1, right)])))
}

struct Open {
    bound: f64,
    node: BnbNode,
}

impl PartialEq for Open {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Open {}
impl PartialOrd for Open {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Open {
    // min-heap on the bound, ties broken towards older nodes
    fn cmp(&self, other: &Self) -> Ordering {
        other.bound.total_cmp(&self.bound).then(other.node.id.cmp(&self.node.id))
    }
}

/// Branch-and-bound search on an explicit base model (projection or
/// power-flow projection model, with or without the submatrix rewrite).
pub struct Search<'a> {
    base: &'a EstimationModel,
    meas: &'a MeasurementMatrix,
    config: &'a BnbConfig,
    trace: Option<&'a mut dyn Write>,
}

impl<'a> Search<'a> {
    pub fn new(base: &'a EstimationModel, meas: &'a MeasurementMatrix, config: &'a BnbConfig) -> Self {
        Self {
            base,
            meas,
            config,
            trace: None,
        }
    }

    /// Streams one JSON line per processed node to `out`.
    pub fn with_trace(mut self, out: &'a mut dyn Write) -> Self {
        self.trace = Some(out);
        self
    }

    fn emit(&mut self, rec: TraceRecord) -> Result<()> {
        if let Some(out) = self.trace.as_mut() {
            serde_json::to_writer(&mut **out, &rec)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    fn solve_node(&self, node: &BnbNode, handles: &ProjectionHandles, deadline: Instant) -> Result<SolveReport> {
        let mut prog = self.base.program.clone();
        for cut in &node.cuts {
            cut.add_to(&mut prog, handles)?;
        }
        let mut settings = self.remaining(deadline);
        settings.max_iterations = settings.max_iterations.min(self.config.node_iterations);
        let report = solve_with(&Admm::new(self.config.admm.clone()), &prog, &settings);
        log::debug!(
            "node {}: {} after {} iterations, {:.3}s",
            node.id,
            report.status,
            report.iterations,
            report.solve_time
        );
        Ok(report)
    }

    fn remaining(&self, deadline: Instant) -> SolveSettings {
        let left = deadline.saturating_duration_since(Instant::now());
        let mut s = self.config.settings.clone();
        s.time_limit = Some(s.time_limit.map_or(left, |t| t.min(left)));
        s
    }

    /// Rounds the node solution to `Y = VVᵀ`, `U = V` with `V` the top-`k`
    /// eigenvectors of `Ŷ`, then re-solves for the rest. With `Y` fixed the
    /// `W` constraints say exactly `X = VB`, `Θ ⪰ BᵀB` for some `k × 5`
    /// matrix `B`, so the `W` blocks are replaced by that parametrization.
    /// The point is feasible for every relaxation of the `W` block.
    fn round(&self, y: &[f64], handles: &ProjectionHandles, deadline: Instant) -> Result<Option<EstimationResult>> {
        let n = handles.y.dim();
        let k = handles.u.cols();
        let (_, vecs) = sym_eigen(y, n)?;
        let v: Vec<f64> = (0..n)
            .flat_map(|i| (0..k).map(move |l| (i, l)))
            .map(|(i, l)| vecs[i * n + (n - 1 - l)])
            .collect();
        let mut fixed = Vec::with_capacity(n * (n + 1) / 2 + n * k);
        for i in 0..n {
            for j in 0..=i {
                let val: f64 = (0..k).map(|l| v[i * k + l] * v[j * k + l]).sum();
                fixed.push((handles.y.at(i, j), val));
            }
            for l in 0..k {
                fixed.push((handles.u.at(i, l), v[i * k + l]));
            }
        }
        let mut model = self.base.clone();
        let prog = &mut model.program;
        let w_ids: Vec<_> = [WBLOCK_LABEL, SUB_LABEL].iter().flat_map(|l| prog.find_constraints(l)).collect();
        for id in w_ids {
            prog.remove_constraint(id)?;
        }
        let dropped = prog.fix_variables(&fixed)?;
        if dropped > 1e-8 {
            log::debug!("rounding point violates a fixed constraint by {dropped:.3e}");
            return Ok(None);
        }
        let b = prog.add_dense("B", k, M);
        let x_of_b: Vec<_> = (0..n)
            .flat_map(|i| (0..M).map(move |j| (i, j)))
            .map(|(i, j)| (model.x.at(i, j), LinExpr::from_terms((0..k).map(|l| (b.at(l, j), v[i * k + l])), 0.0)))
            .collect();
        prog.substitute(&x_of_b)?;
        let theta = handles.theta;
        let block = MatExpr::from_fn(k + M, |i, j| match (i < k, j < k) {
            (true, true) => LinExpr::constant(if i == j { 1.0 } else { 0.0 }),
            (true, false) => b.at(i, j - k).into(),
            (false, true) => b.at(j, i - k).into(),
            (false, false) => theta.at(i - k, j - k).into(),
        });
        prog.add_psd_block("round_theta", &block)?;
        let mut report = solve_with(&Admm::new(self.config.rounding_admm.clone()), prog, &self.remaining(deadline));
        for &(var, val) in &fixed {
            report.x[var.0] = val;
        }
        for (var, e) in &x_of_b {
            report.x[var.0] = e.eval(&report.x);
        }
        log::debug!(
            "rounding: {} after {} iterations, {:.3}s",
            report.status,
            report.iterations,
            report.solve_time
        );
        if !report.is_optimal() {
            return Ok(None);
        }
        extract_state(&model, &report, self.meas).map(Some)
    }

    pub fn run(mut self) -> Result<BnbOutcome> {
        self.config.limits.validate()?;
        let handles = self.base.projection_handles()?.clone();
        let (n, k) = (handles.y.dim(), handles.u.cols());
        let limits = &self.config.limits;
        let start = Instant::now();
        let deadline = start + limits.time_limit;
        // Tolerance for judging a child bound below its parent.
        // each of the two compared solves is accurate to about 10 tol relative
        let slack = |b: f64| 20.0 * self.config.settings.gap_tol.max(self.config.settings.feas_tol) * (1.0 + b.abs());

        let mut stats = BnbStats {
            root_bound: f64::NAN,
            best_bound: f64::NAN,
            ..BnbStats::default()
        };
        let mut incumbent: Option<BnbIncumbent> = None;
        let mut root_result: Option<EstimationResult> = None;
        let mut heap = BinaryHeap::new();
        heap.push(Open {
            bound: f64::NEG_INFINITY,
            node: BnbNode {
                id: 0,
                parent: None,
                depth: 0,
                cuts: Vec::new(),
                parent_bound: f64::NEG_INFINITY,
            },
        });
        let mut next_id = 1;
        let mut status = None;
        let mut cuts: Vec<SecantCut> = Vec::new();

        while let Some(Open { bound, node }) = heap.pop() {
            let inc = incumbent.as_ref().map(|i| i.objective);
            if let Some(best) = inc {
                if bound >= best - limits.gap_tol * best.abs().max(1.0) {
                    self.emit(TraceRecord {
                        node: node.id,
                        parent: node.parent,
                        depth: node.depth,
                        bound: None,
                        parent_bound: node.parent_bound,
                        residual: None,
                        incumbent: inc,
                        action: "prune-bound",
                    })?;
                    continue;
                }
                if self.config.termination == Termination::Gap {
                    let gap = (best - bound) / best.abs().max(1.0);
                    if gap <= limits.gap_tol {
                        heap.push(Open { bound, node });
                        status = Some(BnbStatus::Optimal);
                        break;
                    }
                }
            }
            if stats.nodes >= limits.max_nodes {
                heap.push(Open { bound, node });
                status = Some(BnbStatus::NodeLimit);
                break;
            }
            if Instant::now() >= deadline {
                heap.push(Open { bound, node });
                status = Some(BnbStatus::TimeLimit);
                break;
            }

            stats.nodes += 1;
            stats.max_depth = stats.max_depth.max(node.depth);
            let report = self.solve_node(&node, &handles, deadline)?;
            let mut rec = TraceRecord {
                node: node.id,
                parent: node.parent,
                depth: node.depth,
                bound: None,
                parent_bound: node.parent_bound,
                residual: None,
                incumbent: inc,
                action: "",
            };
            match report.status {
                mcse_conic::SolveStatus::Optimal => {}
                mcse_conic::SolveStatus::PrimalInfeasible => {
                    rec.action = "fathom-infeasible";
                    self.emit(rec)?;
                    continue;
                }
                other => {
                    stats.failed_solves += 1;
                    log::info!("node {} relaxation ended with {other}", node.id);
                    if other == mcse_conic::SolveStatus::TimeLimit && Instant::now() >= deadline {
                        heap.push(Open { bound, node });
                        status = Some(BnbStatus::TimeLimit);
                        break;
                    }
                    rec.action = "solve-failed";
                    self.emit(rec)?;
                    continue;
                }
            }
            let value = report.objective;
            if node.parent.is_some() && value < node.parent_bound - slack(node.parent_bound) {
                stats.bound_violations += 1;
            }
            if node.parent.is_some() {
                stats.worst_bound_drop = stats.worst_bound_drop.max(node.parent_bound - value);
            }
            let node_bound = value.max(bound);
            if node.parent.is_none() {
                stats.root_bound = value;
            }
            let result = extract_state(self.base, &report, self.meas)?;
            let y = report.symmetric(&handles.y);
            let u = report.dense(&handles.u);
            let residual = frobenius(&projection_gap(&y, &u, n, k));
            rec.bound = Some(value);
            rec.residual = Some(residual);
            if node.parent.is_none() {
                root_result = Some(result.clone());
            }

            if residual <= limits.eps_proj {
                if incumbent.as_ref().is_none_or(|i| value < i.objective) {
                    incumbent = Some(BnbIncumbent {
                        objective: value,
                        result,
                        residual,
                        found_at: stats.nodes,
                    });
                }
                rec.action = "fathom-residual";
                rec.incumbent = incumbent.as_ref().map(|i| i.objective);
                self.emit(rec)?;
                if self.config.termination == Termination::Residual {
                    // best-first: nothing open can do better than this node
                    status = Some(BnbStatus::Optimal);
                    break;
                }
                continue;
            }

            if self.config.heuristic_every_node || node.parent.is_none() {
                if let Some(r) = self.round(&y, &handles, deadline)? {
                    if incumbent.as_ref().is_none_or(|i| r.objective < i.objective) {
                        let (ry, ru) = (r.y.clone().unwrap_or_default(), r.u.clone().unwrap_or_default());
                        incumbent = Some(BnbIncumbent {
                            objective: r.objective,
                            residual: frobenius(&projection_gap(&ry, &ru, n, k)),
                            result: r,
                            found_at: stats.nodes,
                        });
                    }
                }
            }
            rec.incumbent = incumbent.as_ref().map(|i| i.objective);
            if let Some(best) = rec.incumbent {
                if node_bound >= best - limits.gap_tol * best.abs().max(1.0) {
                    rec.action = "fathom-bound";
                    self.emit(rec)?;
                    continue;
                }
            }
            match branch(&node, &y, &u, k, next_id)? {
                Branching::Degenerate => {
                    rec.action = "fathom-degenerate";
                    self.emit(rec)?;
                }
                Branching::Children(children) => {
                    next_id += 2;
                    rec.action = "branch";
                    self.emit(rec)?;
                    for mut c in *children {
                        for cut in &c.cuts {
                            if !cuts.contains(cut) {
                                cuts.push(cut.clone());
                            }
                        }
                        c.parent_bound = value;
                        heap.push(Open { bound: node_bound, node: c });
                    }
                }
            }
        }

        let status = status.unwrap_or(BnbStatus::Optimal);
        let open_min = heap.iter().map(|o| o.bound).fold(f64::INFINITY, f64::min);
        stats.incumbent = incumbent.as_ref().map(|i| i.objective);
        stats.best_bound = match (stats.incumbent, open_min.is_finite()) {
            (Some(best), false) => best,
            (Some(best), true) => open_min.min(best),
            (None, true) => open_min,
            (None, false) => stats.root_bound,
        };
        stats.gap = stats.incumbent.map(|best| ((best - stats.best_bound) / best.abs().max(1.0)).max(0.0));
        stats.wall_time = start.elapsed().as_secs_f64();
        let (status, result) = match &incumbent {
            Some(inc) => (status, inc.result.clone()),
            None => match root_result {
                Some(r) => (BnbStatus::BoundOnly, r),
                None => {
                    return Err(CoreError::NotOptimal(mcse_conic::SolveStatus::TimeLimit));
                }
            },
        };
        Ok(BnbOutcome {
            status,
            result,
            incumbent,
            stats,
            cuts,
        })
    }
}

/// S2 on a scenario: the power-flow projection model with the submatrix
/// rewrite of `plan` (or the full block when `config.relaxation` is
/// [`NodeRelaxation::Full`]) searched by [`Search`].
pub fn bnb_solve(
    scenario: &Scenario,
    params: &ProjectionParams,
    plan: &SubmatrixPlan,
    tol: &ToleranceConfig,
    config: &BnbConfig,
) -> Result<BnbOutcome> {
    let full = build_model_pfpc(&scenario.meas, &scenario.lpf, &scenario.slack, params, tol)?;
    let base = match config.relaxation {
        NodeRelaxation::Base => apply_sparse_psd(&full, plan)?,
        NodeRelaxation::Full => full,
    };
    Search::new(&base, &scenario.meas, config).run()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn root_node() -> BnbNode {
        BnbNode {
            id: 0,
            parent: None,
            depth: 0,
            cuts: Vec::new(),
            parent_bound: f64::NEG_INFINITY,
        }
    }

    fn children(b: Branching) -> [BnbNode; 2] {
        match b {
            Branching::Children(c) => *c,
            Branching::Degenerate => panic!("expected children"),
        }
    }

    #[test]
    fn interval_rejects_bad_limits() {
        assert!(Interval::new(0.3, -0.2).is_err());
        assert!(Interval::new(-1.5, 0.0).is_err());
        assert!(Interval::new(0.0, f64::NAN).is_err());
        assert!(Interval::new(0.5, 0.5).is_ok());
    }

    #[test]
    fn split_at_interior_point() {
        let iv = Interval::ROOT;
        assert_eq!(iv.split_point(0.3), 0.3);
    }

    #[test]
    fn split_near_endpoint_uses_midpoint() {
        let iv = Interval::ROOT;
        assert_eq!(iv.split_point(-1.0 + 1e-12), 0.0);
        assert_eq!(iv.split_point(1.0), 0.0);
        let iv = Interval::new(-0.2, 0.6).unwrap();
        assert!((iv.split_point(0.6 - 1e-10) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn root_secant_is_trace_bound() {
        // (a + b)t − ab on [−1, 1] is the constant 1
        for t in [-1.0, -0.3, 0.0, 0.7, 1.0] {
            assert_eq!(Interval::ROOT.secant(t), 1.0);
        }
    }

    #[test]
    fn degenerate_interval_pins_projection() {
        let iv = Interval::new(0.5, 0.5).unwrap();
        assert!((iv.secant(0.5) - 0.25).abs() < 1e-15);
        let cut = SecantCut {
            z: vec![1.0, 0.0],
            intervals: vec![iv],
        };
        // U = [0.5, 0]: satisfied with zᵀYz = 0.25, violated above
        let u = [0.5, 0.0];
        assert!(cut.violation(&[0.25, 0.0, 0.0, 0.0], &u) <= 1e-15);
        assert!(cut.violation(&[0.3, 0.0, 0.0, 0.0], &u) > 0.04);
        assert!(cut.violation(&[0.25, 0.0, 0.0, 0.0], &[0.6, 0.0]) > 0.09);
    }

    proptest! {
        #[test]
        fn secant_dominates_square(a in -1.0f64..1.0, w in 0.0f64..2.0, s in 0.0f64..1.0) {
            let b = (a + w).min(1.0);
            let t = a + s * (b - a);
            let iv = Interval::new(a, b).unwrap();
            let gap = iv.secant(t) - t * t;
            prop_assert!((gap - iv.secant_gap(t)).abs() <= 1e-12);
            prop_assert!(gap >= -1e-15);
            // tight at both ends
            prop_assert!((iv.secant(a) - a * a).abs() <= 1e-15);
            prop_assert!((iv.secant(b) - b * b).abs() <= 1e-15);
        }

        #[test]
        fn children_partition_parent(t in -1.0f64..1.0) {
            let n = 3;
            // Ŷ − ÛÛᵀ = e₀e₀ᵀ, Û = t·e₀
            let u = vec![t, 0.0, 0.0];
            let mut y = vec![0.0; n * n];
            y[0] = t * t + 1.0;
            let [l, r] = children(branch(&root_node(), &y, &u, 1, 1).unwrap());
            let (li, ri) = (l.cuts[0].intervals[0], r.cuts[0].intervals[0]);
            prop_assert_eq!(li.lower, -1.0);
            prop_assert_eq!(ri.upper, 1.0);
            prop_assert_eq!(li.upper, ri.lower);
            let tz = t * l.cuts[0].z[0];
            let expected = Interval::ROOT.split_point(tz);
            prop_assert!((li.upper - expected).abs() <= 1e-12);
            prop_assert_eq!(l.depth, 1);
            prop_assert_eq!(l.parent, Some(0));
        }
    }

    #[test]
    fn branch_uses_top_eigenvector_and_refines_parallel_cut() {
        let n = 3;
        // gap = diag(0.1, −0.5, 0.2): largest magnitude along e₁
        let u = vec![0.0, 0.3, 0.0];
        let mut y = vec![0.0; n * n];
        y[0] = 0.1;
        y[4] = 0.09 - 0.5;
        y[8] = 0.2;
        let [l, r] = children(branch(&root_node(), &y, &u, 1, 1).unwrap());
        assert_eq!(l.cuts.len(), 1);
        assert!((l.cuts[0].z[1].abs() - 1.0).abs() < 1e-12);
        let t = 0.3 * l.cuts[0].z[1];
        assert!((l.cuts[0].intervals[0].upper - t).abs() < 1e-12);
        assert_eq!((l.id, r.id), (1, 2));

        // same violation direction again: the existing cut is refined
        let [l2, _] = children(branch(&l, &y, &u, 1, 3).unwrap());
        assert_eq!(l2.cuts.len(), 1);
        let iv = l2.cuts[0].intervals[0];
        assert!(iv.lower >= -1.0 && iv.upper <= l.cuts[0].intervals[0].upper);
        assert!(iv.width() < l.cuts[0].intervals[0].width());
    }

    #[test]
    fn branch_picks_loosest_column() {
        let n = 2;
        let k = 2;
        // direction e₀; column 0 sits at 0.9 (gap 0.19), column 1 at 0 (gap 1)
        let u = vec![0.9, 0.0, 0.0, 0.0];
        let mut y = vec![0.0; n * n];
        y[0] = 0.81 + 0.5;
        let [l, r] = children(branch(&root_node(), &y, &u, k, 1).unwrap());
        let (a, b) = (&l.cuts[0].intervals, &r.cuts[0].intervals);
        assert_eq!(a[0], Interval::ROOT);
        assert_eq!(b[0], Interval::ROOT);
        assert_eq!(a[1].upper, 0.0);
        assert_eq!(b[1].lower, 0.0);
    }

    #[test]
    fn exhausted_interval_is_degenerate() {
        let n = 2;
        let u = vec![0.5, 0.0];
        let mut y = vec![0.0; n * n];
        y[0] = 0.25 + 0.1;
        let mut cut = SecantCut::new(&[1.0, 0.0], 1).unwrap();
        cut.intervals[0] = Interval::new(0.5, 0.5).unwrap();
        let node = BnbNode {
            cuts: vec![cut],
            ..root_node()
        };
        assert!(matches!(branch(&node, &y, &u, 1, 1).unwrap(), Branching::Degenerate));
    }

    /// Sampled rank-`k` points `Y = UUᵀ` with orthonormal-ish `U` satisfy
    /// every cut whose boxes they satisfy.
    #[test]
    fn cuts_never_exclude_rank_k_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in 2..=6 {
            for k in 1..=2usize.min(n) {
                let mut cuts = Vec::new();
                for _ in 0..8 {
                    let z: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
                    let mut c = SecantCut::new(&z, k).unwrap();
                    for iv in &mut c.intervals {
                        let a = rng.random_range(-1.0..1.0);
                        let b = rng.random_range(a..=1.0);
                        *iv = Interval::new(a, b).unwrap();
                    }
                    cuts.push(c);
                }
                let mut checked = 0;
                for _ in 0..10_000 {
                    let u: Vec<f64> = (0..n * k).map(|_| rng.random_range(-1.0..1.0) / (n as f64).sqrt()).collect();
                    let y: Vec<f64> = (0..n * n)
                        .map(|e| (0..k).map(|l| u[(e / n) * k + l] * u[(e % n) * k + l]).sum())
                        .collect();
                    for c in &cuts {
                        let t = c.projections(&u);
                        if c.intervals.iter().zip(&t).all(|(iv, &tl)| iv.lower <= tl && tl <= iv.upper) {
                            checked += 1;
                            assert!(c.violation(&y, &u) <= 1e-12, "cut excludes a rank-{k} point");
                        }
                    }
                }
                assert!(checked > 0);
            }
        }
    }

    #[test]
    fn projection_gap_vanishes_on_rank_k() {
        let u = [0.6, -0.2, 0.8, 0.1];
        let (n, k) = (2, 2);
        let y: Vec<f64> = (0..4).map(|e| (0..k).map(|l| u[(e / n) * k + l] * u[(e % n) * k + l]).sum()).collect();
        assert!(frobenius(&projection_gap(&y, &u, n, k)) < 1e-15);
    }

    #[test]
    fn limits_validate() {
        assert!(BnbLimits::default().validate().is_ok());
        let bad = BnbLimits {
            max_nodes: 0,
            ..BnbLimits::default()
        };
        assert!(bad.validate().is_err());
    }
}
