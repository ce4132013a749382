//! Estimation models as conic programs: nuclear-norm completion, its
//! power-flow constrained variant, the projection model, the power-flow
//! embedded projection model, and the sparse principal-submatrix rewrite.

mod builders;
mod extract;
mod sparse;
mod tolerance;

use mcse_conic::{ConicProgram, ConstraintId, DenseVar, LinExpr, SolveReport, SolveSettings, SymVar, Var};
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

pub use builders::{
    build_model_mc, build_model_mcse, build_model_pfpc, build_model_projection, default_delta, WBLOCK_LABEL,
};
pub use extract::{extract_state, EstimationResult, ObjectiveParts};
pub use sparse::{apply_sparse_psd, select_submatrices, SubmatrixPlan, SUB_LABEL};
pub use tolerance::{
    add_power_flow_constraints, LossKind, ToleranceConfig, ToleranceHandles, ToleranceValues, ToleranceWeights,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    /// Nuclear-norm completion with exact equality on observed entries.
    Mc,
    /// Nuclear-norm completion with a noise ball and power-flow constraints.
    Mcse,
    /// Projection conic model.
    Projection,
    /// Projection conic model with power-flow constraints.
    Pfpc,
}

impl ModelKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelKind::Mc => "mc",
            ModelKind::Mcse => "mcse",
            ModelKind::Projection => "projection",
            ModelKind::Pfpc => "pfpc",
        }
    }
}

/// How `λ` turns into the weight on `tr(Θ)` in the objective.
///
/// `tr Θ` grows with the square of the data while the fit term grows
/// linearly, so a fixed weight means different things on different feeders.
/// The default divides by `λ·‖M_ψ‖_F`, which makes the objective scale
/// linearly with the data and leaves `λ` dimensionless.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegScaling {
    /// `tr(Θ) / (λ·‖M_ψ‖_F)`.
    #[default]
    Normalized,
    /// `λ · tr(Θ)`.
    Multiply,
    /// `tr(Θ) / λ`.
    Divide,
}

impl RegScaling {
    /// Weight on `tr(Θ)` given `λ` and `‖M_ψ‖_F`.
    pub fn weight(self, lambda: f64, data_norm: f64) -> f64 {
        match self {
            RegScaling::Normalized if data_norm > 0.0 => 1.0 / (lambda * data_norm),
            RegScaling::Normalized => 1.0 / lambda,
            RegScaling::Multiply => lambda,
            RegScaling::Divide => 1.0 / lambda,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectionParams {
    /// Rank cap, in `1..=5`.
    pub k: usize,
    pub lambda: f64,
    pub scaling: RegScaling,
}

impl Default for ProjectionParams {
    fn default() -> Self {
        Self {
            k: 1,
            lambda: 10.0,
            scaling: RegScaling::default(),
        }
    }
}

impl ProjectionParams {
    pub fn new(k: usize, lambda: f64) -> Self {
        Self {
            k,
            lambda,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=crate::measgen::M).contains(&self.k) {
            return Err(CoreError::InvalidParameter(format!("k must lie in 1..=5, got {}", self.k)));
        }
        if !(self.lambda > 0.0) || !self.lambda.is_finite() {
            return Err(CoreError::InvalidParameter(format!("lambda must be positive, got {}", self.lambda)));
        }
        Ok(())
    }

    pub fn reg_weight(&self, data_norm: f64) -> f64 {
        self.scaling.weight(self.lambda, data_norm)
    }
}

/// Handles of the projection-model variables.
#[derive(Clone, Debug)]
pub struct ProjectionHandles {
    pub y: SymVar,
    pub u: DenseVar,
    pub theta: SymVar,
    /// The `[[Y, X], [Xᵀ, Θ]] ⪰ 0` constraint while it is still present.
    pub w_block: Option<ConstraintId>,
    pub params: ProjectionParams,
}

/// A built model: the conic program plus the handles needed to read the
/// estimate back out.
#[derive(Clone, Debug)]
pub struct EstimationModel {
    pub kind: ModelKind,
    pub program: ConicProgram,
    pub n: usize,
    pub x: DenseVar,
    /// `D1`, `D2` of the nuclear-norm models.
    pub nuclear: Option<(SymVar, SymVar)>,
    pub projection: Option<ProjectionHandles>,
    pub tolerances: Option<ToleranceHandles>,
    /// Observed entries and values used in the data-fit term.
    pub psi: Vec<(usize, usize)>,
    pub observed: Vec<f64>,
    /// Epigraph variable of the Frobenius fit, when the fit is in the
    /// objective.
    pub fit: Option<Var>,
    /// Regularization part of the objective (`tr D1 + tr D2` or the
    /// weighted `tr Θ`).
    pub regularizer: LinExpr,
    /// Number of principal-submatrix blocks that replaced the `W` block.
    pub submatrices: usize,
}

impl EstimationModel {
    pub fn solve(&self, settings: &SolveSettings) -> SolveReport {
        mcse_conic::solve(&self.program, settings)
    }

    /// `‖X_ψ − M_ψ‖_F` at a solution.
    pub fn fit_residual(&self, report: &SolveReport) -> f64 {
        self.psi
            .iter()
            .zip(&self.observed)
            .map(|(&(i, j), m)| (report.value(self.x.at(i, j)) - m).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    pub fn projection_handles(&self) -> Result<&ProjectionHandles> {
        self.projection
            .as_ref()
            .ok_or_else(|| CoreError::InvalidParameter(format!("{} model has no projection block", self.kind.as_str())))
    }
}
