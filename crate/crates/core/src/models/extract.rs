use mcse_conic::{SolveReport, SolveStatus};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::tolerance::ToleranceValues;
use super::{EstimationModel, ModelKind};
use crate::bench::{mape, phasor_mape};
use crate::error::{CoreError, Result};
use crate::measgen::{MeasurementMatrix, COL_ABS_V, COL_IM_V, COL_RE_V, M};

/// Objective split into its modelling terms.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveParts {
    /// `‖X_ψ − M_ψ‖_F` at the solution.
    pub fit: f64,
    /// Nuclear-norm surrogate or weighted `tr Θ`.
    pub regularizer: f64,
    /// Weighted tolerance losses.
    pub tolerance: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EstimationResult {
    pub kind: ModelKind,
    pub status: SolveStatus,
    pub objective: f64,
    pub parts: ObjectiveParts,
    /// Recovered `n × 5` matrix, row-major.
    pub x: Vec<f64>,
    pub voltages: Vec<Complex64>,
    /// Estimated magnitudes, read from the `|v|` column.
    pub magnitudes: Vec<f64>,
    /// MAPE of `|v|` against the ground truth, percent.
    pub mape: f64,
    /// Mean relative phasor error `|v̂ − v| / |v|`, percent.
    pub phasor_mape: f64,
    pub tolerances: Option<ToleranceValues>,
    /// Projection-model variables, row-major, when present.
    pub y: Option<Vec<f64>>,
    pub u: Option<Vec<f64>>,
    pub theta: Option<Vec<f64>>,
    pub solve_time: f64,
    pub iterations: usize,
}

impl EstimationResult {
    pub fn x_at(&self, i: usize, j: usize) -> f64 {
        self.x[i * M + j]
    }
}

pub fn extract_state(model: &EstimationModel, report: &SolveReport, meas: &MeasurementMatrix) -> Result<EstimationResult> {
    if !report.is_optimal() {
        return Err(CoreError::NotOptimal(report.status));
    }
    if meas.n != model.n {
        return Err(CoreError::Dimension(format!("model has {} buses, measurements {}", model.n, meas.n)));
    }
    let x = report.dense(&model.x);
    let n = model.n;
    let voltages: Vec<Complex64> = (0..n)
        .map(|i| Complex64::new(x[i * M + COL_RE_V], x[i * M + COL_IM_V]))
        .collect();
    let magnitudes: Vec<f64> = (0..n).map(|i| x[i * M + COL_ABS_V]).collect();
    let true_v: Vec<Complex64> = (0..n)
        .map(|i| Complex64::new(meas.truth(i, COL_RE_V), meas.truth(i, COL_IM_V)))
        .collect();
    let parts = ObjectiveParts {
        fit: model.fit_residual(report),
        regularizer: report.eval(&model.regularizer),
        tolerance: model.tolerances.as_ref().map_or(0.0, |t| report.eval(&t.loss)),
    };
    let proj = model.projection.as_ref();
    Ok(EstimationResult {
        kind: model.kind,
        status: report.status,
        objective: report.objective,
        parts,
        mape: mape(&magnitudes, &meas.truth_column(COL_ABS_V))?,
        phasor_mape: phasor_mape(&voltages, &true_v)?,
        x,
        voltages,
        magnitudes,
        tolerances: model.tolerances.as_ref().map(|t| t.values(report)),
        y: proj.map(|p| report.symmetric(&p.y)),
        u: proj.map(|p| report.dense(&p.u)),
        theta: proj.map(|p| report.symmetric(&p.theta)),
        solve_time: report.solve_time,
        iterations: report.iterations,
    })
}
