//! Solve contract shared by all backends, plus an independent residual
//! checker that certifies reported solutions against the program itself.

use std::time::Duration;

use faer::{Mat, Side};
use serde::{Deserialize, Serialize};

use crate::expr::{LinExpr, Var};
use crate::program::{ConicProgram, Constraint, ConstraintId, DenseVar, SymVar};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Optimal,
    PrimalInfeasible,
    DualInfeasible,
    NumericalFailure,
    /// Time or iteration budget exhausted before convergence.
    TimeLimit,
}

impl SolveStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::PrimalInfeasible => "primal-infeasible",
            SolveStatus::DualInfeasible => "dual-infeasible",
            SolveStatus::NumericalFailure => "numerical-failure",
            SolveStatus::TimeLimit => "time-limit",
        }
    }
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveSettings {
    /// Relative primal/dual residual tolerance.
    pub feas_tol: f64,
    /// Relative duality gap tolerance.
    pub gap_tol: f64,
    /// Infeasibility certificate tolerance.
    pub infeas_tol: f64,
    pub time_limit: Option<Duration>,
    pub max_iterations: usize,
}

impl Default for SolveSettings {
    fn default() -> Self {
        Self {
            feas_tol: 1e-8,
            gap_tol: 1e-8,
            infeas_tol: 1e-7,
            time_limit: None,
            max_iterations: 200_000,
        }
    }
}

impl SolveSettings {
    /// Looser tolerances used for large benchmark runs.
    pub fn benchmark() -> Self {
        Self {
            feas_tol: 1e-6,
            gap_tol: 1e-6,
            ..Self::default()
        }
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.feas_tol = tol;
        self.gap_tol = tol;
        self
    }

    pub fn with_time_limit(mut self, limit: Duration) -> Self {
        self.time_limit = Some(limit);
        self
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolveReport {
    pub status: SolveStatus,
    /// Primal objective at the returned point (`NaN` when no point exists).
    pub objective: f64,
    pub dual_objective: f64,
    /// Values of all scalar variables.
    pub x: Vec<f64>,
    pub solve_time: f64,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub gap: f64,
    pub backend: String,
    /// Worst constraint violation found by [`check_solution`].
    pub max_violation: f64,
}

impl SolveReport {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }

    pub fn value(&self, v: Var) -> f64 {
        self.x[v.0]
    }

    pub fn eval(&self, e: &LinExpr) -> f64 {
        e.eval(&self.x)
    }

    pub fn dense(&self, m: &DenseVar) -> Vec<f64> {
        m.values(&self.x)
    }

    pub fn symmetric(&self, m: &SymVar) -> Vec<f64> {
        m.values(&self.x)
    }

    /// Report for a run that produced no usable point.
    pub fn failed(status: SolveStatus, backend: &str, n: usize, solve_time: f64, iterations: usize) -> Self {
        Self {
            status,
            objective: f64::NAN,
            dual_objective: f64::NAN,
            x: vec![f64::NAN; n],
            solve_time,
            iterations,
            primal_residual: f64::NAN,
            dual_residual: f64::NAN,
            gap: f64::NAN,
            backend: backend.to_string(),
            max_violation: f64::NAN,
        }
    }
}

/// A conic solver backend.
pub trait Backend: Send + Sync {
    fn name(&self) -> &str;
    fn solve(&self, prog: &ConicProgram, settings: &SolveSettings) -> SolveReport;
}

/// Factor applied to the feasibility tolerance when certifying a solution;
/// backends measure residuals in a scaled space, so the raw constraint check
/// gets a little slack.
pub const CHECK_SLACK: f64 = 10.0;

/// Solves with `backend`, then re-checks every constraint directly on the
/// program. An `Optimal` report that fails the check is downgraded to
/// `NumericalFailure`.
pub fn solve_with(backend: &dyn Backend, prog: &ConicProgram, settings: &SolveSettings) -> SolveReport {
    let mut report = backend.solve(prog, settings);
    if report.status == SolveStatus::Optimal {
        let check = check_solution(prog, &report.x);
        report.max_violation = check.max_violation;
        let allowed = CHECK_SLACK * settings.feas_tol * (1.0 + check.scale);
        if check.max_violation > allowed {
            log::warn!(
                "{}: residual check failed (violation {:.3e} > {:.3e} at {:?})",
                backend.name(),
                check.max_violation,
                allowed,
                check.worst
            );
            report.status = SolveStatus::NumericalFailure;
        }
    }
    report
}

#[derive(Clone, Debug)]
pub struct ResidualCheck {
    /// Largest violation over all constraints and bounds.
    pub max_violation: f64,
    /// Magnitude of the constraint data at `x` (constants and evaluated terms).
    pub scale: f64,
    pub worst: Option<(ConstraintId, String)>,
}

/// Evaluates every constraint of `prog` at `x` without going through any
/// backend data structure.
///
/// Violations: `|e|` for equalities, `max(−e, 0)` for inequalities,
/// `max(‖x‖ − t, 0)` for second-order cones and `max(−λ_min, 0)` for PSD
/// blocks.
pub fn check_solution(prog: &ConicProgram, x: &[f64]) -> ResidualCheck {
    let mut max_violation: f64 = 0.0;
    let mut scale: f64 = 0.0;
    let mut worst = None;
    let note = |viol: f64, id: Option<(ConstraintId, &str)>, max_v: &mut f64, w: &mut Option<(ConstraintId, String)>| {
        if viol > *max_v || viol.is_nan() {
            *max_v = if viol.is_nan() { f64::INFINITY } else { viol };
            *w = id.map(|(i, l)| (i, l.to_string()));
        }
    };
    let mag = |e: &LinExpr| e.constant_term().abs().max(e.abs_linear_magnitude(x));

    for (id, lc) in prog.constraints() {
        let label = lc.label.as_str();
        match &lc.constraint {
            Constraint::Zero { expr } => {
                scale = scale.max(mag(expr));
                note(expr.eval(x).abs(), Some((id, label)), &mut max_violation, &mut worst);
            }
            Constraint::NonNeg { expr } => {
                scale = scale.max(mag(expr));
                note((-expr.eval(x)).max(0.0), Some((id, label)), &mut max_violation, &mut worst);
            }
            Constraint::Soc { t, x: xs } => {
                scale = scale.max(mag(t));
                let tv = t.eval(x);
                let nrm = xs
                    .iter()
                    .map(|e| {
                        scale = scale.max(mag(e));
                        e.eval(x).powi(2)
                    })
                    .sum::<f64>()
                    .sqrt();
                note((nrm - tv).max(0.0), Some((id, label)), &mut max_violation, &mut worst);
            }
            Constraint::Psd { expr } => {
                let d = expr.dim();
                for e in expr.packed() {
                    scale = scale.max(mag(e));
                }
                let vals = expr.eval(x);
                let m = Mat::<f64>::from_fn(d, d, |i, j| vals[i * d + j]);
                let min_eig = match m.self_adjoint_eigenvalues(Side::Lower) {
                    Ok(ev) => ev.first().copied().unwrap_or(0.0),
                    Err(_) => f64::NAN,
                };
                note((-min_eig).max(0.0), Some((id, label)), &mut max_violation, &mut worst);
            }
        }
    }
    for b in prog.bounds() {
        let v = x[b.var.0];
        if let Some(lo) = b.lower {
            scale = scale.max(lo.abs());
            note((lo - v).max(0.0), None, &mut max_violation, &mut worst);
        }
        if let Some(hi) = b.upper {
            scale = scale.max(hi.abs());
            note((v - hi).max(0.0), None, &mut max_violation, &mut worst);
        }
    }
    ResidualCheck {
        max_violation,
        scale,
        worst,
    }
}
