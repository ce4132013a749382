use mcse_conic::{ConicProgram, DenseVar, LinExpr, MatExpr, SymVar, Var};

use super::tolerance::{add_power_flow_constraints, ToleranceConfig};
use super::{EstimationModel, ModelKind, ProjectionHandles, ProjectionParams};
use crate::error::{CoreError, Result};
use crate::measgen::{MeasurementMatrix, M};
use crate::netmodel::LinearPowerFlowModel;
use crate::scenario::SlackData;

/// Label of the `[[Y, X], [Xᵀ, Θ]] ⪰ 0` block.
pub const WBLOCK_LABEL: &str = "w_block";

fn check_psi(meas: &MeasurementMatrix) -> Result<()> {
    if meas.psi.is_empty() {
        return Err(CoreError::InvalidParameter("no observed entries".into()));
    }
    Ok(())
}

fn residuals(x: &DenseVar, meas: &MeasurementMatrix) -> Vec<LinExpr> {
    meas.observations()
        .map(|((i, j), m)| LinExpr::var(x.at(i, j)) - m)
        .collect()
}

/// Noise radius `σ̄·sqrt(|ψ|)` with `σ̄` the RMS configured noise level.
pub fn default_delta(meas: &MeasurementMatrix) -> f64 {
    meas.rms_noise_std() * (meas.psi.len() as f64).sqrt()
}

/// Congruence factor `(‖X‖_F² / k)^(1/4)` with `‖X‖_F²` extrapolated from
/// the observed entries; it equalizes the expected traces of the two
/// diagonal blocks of `W`.
fn balance_factor(meas: &MeasurementMatrix, k: usize) -> f64 {
    let sq: f64 = meas.observations().map(|(_, m)| m * m).sum();
    let total = sq * (meas.n * M) as f64 / meas.psi.len() as f64;
    let c = (total / k as f64).powf(0.25);
    if c.is_finite() && c > 0.0 {
        c.clamp(1e-3, 1e3)
    } else {
        1.0
    }
}

/// `[[D1, X], [Xᵀ, D2]] ⪰ 0` with objective `tr D1 + tr D2`.
fn nuclear_block(prog: &mut ConicProgram, x: &DenseVar) -> Result<(SymVar, SymVar, LinExpr)> {
    let n = x.rows();
    let d1 = prog.add_symmetric("D1", n);
    let d2 = prog.add_symmetric("D2", M);
    let block = MatExpr::from_fn(n + M, |i, j| match (i < n, j < n) {
        (true, true) => d1.at(i, j).into(),
        (true, false) => x.at(i, j - n).into(),
        (false, true) => x.at(j, i - n).into(),
        (false, false) => d2.at(i - n, j - n).into(),
    });
    prog.add_psd_block("nuclear", &block)?;
    Ok((d1, d2, d1.trace() + d2.trace()))
}

pub fn build_model_mc(meas: &MeasurementMatrix) -> Result<EstimationModel> {
    check_psi(meas)?;
    let n = meas.n;
    let mut prog = ConicProgram::new();
    let x = prog.add_dense("X", n, M);
    for ((i, j), m) in meas.observations() {
        prog.add_eq("observed", x.at(i, j), m)?;
    }
    let (d1, d2, reg) = nuclear_block(&mut prog, &x)?;
    prog.set_objective(reg.clone())?;
    Ok(EstimationModel {
        kind: ModelKind::Mc,
        program: prog,
        n,
        x,
        nuclear: Some((d1, d2)),
        projection: None,
        tolerances: None,
        psi: meas.psi.clone(),
        observed: meas.observed.clone(),
        fit: None,
        regularizer: reg,
        submatrices: 0,
    })
}

/// Nuclear-norm completion with `‖X_ψ − M_ψ‖_F ≤ δ` and the power-flow
/// constraints. `delta = None` selects [`default_delta`]; `δ = 0` turns the
/// ball into equalities.
pub fn build_model_mcse(
    meas: &MeasurementMatrix,
    lpf: &LinearPowerFlowModel,
    slack: &SlackData,
    tol: &ToleranceConfig,
    delta: Option<f64>,
) -> Result<EstimationModel> {
    check_psi(meas)?;
    let delta = delta.unwrap_or_else(|| default_delta(meas));
    if !(delta >= 0.0) || !delta.is_finite() {
        return Err(CoreError::InvalidParameter(format!("delta must be nonnegative, got {delta}")));
    }
    let n = meas.n;
    let mut prog = ConicProgram::new();
    let x = prog.add_dense("X", n, M);
    if delta == 0.0 {
        for ((i, j), m) in meas.observations() {
            prog.add_eq("observed", x.at(i, j), m)?;
        }
    } else {
        prog.add_soc("fit_ball", LinExpr::constant(delta), residuals(&x, meas))?;
    }
    let (d1, d2, reg) = nuclear_block(&mut prog, &x)?;
    let tolerances = add_power_flow_constraints(&mut prog, &x, lpf, slack, tol)?;
    prog.set_objective(reg.clone() + tolerances.loss.clone())?;
    Ok(EstimationModel {
        kind: ModelKind::Mcse,
        program: prog,
        n,
        x,
        nuclear: Some((d1, d2)),
        projection: None,
        tolerances: Some(tolerances),
        psi: meas.psi.clone(),
        observed: meas.observed.clone(),
        fit: None,
        regularizer: reg,
        submatrices: 0,
    })
}

/// Variables and constraints shared by the two projection models; returns
/// the model with objective `‖X_ψ − M_ψ‖_F + w·tr Θ`.
fn projection_core(meas: &MeasurementMatrix, params: &ProjectionParams, kind: ModelKind) -> Result<EstimationModel> {
    check_psi(meas)?;
    params.validate()?;
    let n = meas.n;
    let k = params.k;
    let mut prog = ConicProgram::new();
    let x = prog.add_dense("X", n, M);
    let y = prog.add_symmetric("Y", n);
    let u = prog.add_dense("U", n, k);
    let theta = prog.add_symmetric("Theta", M);
    let t: Var = prog.add_scalar("fit");
    prog.add_soc("fit", t, residuals(&x, meas))?;

    // The block enters as D W D with D = diag(c·I, I/c), which keeps the
    // feasible set; the solver converges far faster on the balanced form.
    let c = balance_factor(meas, k);
    let w = MatExpr::from_fn(n + M, |i, j| match (i < n, j < n) {
        (true, true) => y.at(i, j) * (c * c),
        (true, false) => x.at(i, j - n).into(),
        (false, true) => x.at(j, i - n).into(),
        (false, false) => theta.at(i - n, j - n) * (1.0 / (c * c)),
    });
    let w_block = prog.add_psd_block(WBLOCK_LABEL, &w)?;

    let schur = MatExpr::from_fn(n + k, |i, j| match (i < n, j < n) {
        (true, true) => y.at(i, j).into(),
        (true, false) => u.at(i, j - n).into(),
        (false, true) => u.at(j, i - n).into(),
        (false, false) => LinExpr::constant(if i == j { 1.0 } else { 0.0 }),
    });
    prog.add_psd_block("schur", &schur)?;

    prog.add_le("trace_y", y.trace(), k as f64)?;
    // Y ⪰ 0 follows from the Schur block; with k = 1 it also gives
    // λmax(Y) ≤ tr Y ≤ 1, so I − Y ⪰ 0 is only needed for k > 1.
    if k > 1 {
        let upper = MatExpr::from_fn(n, |i, j| {
            let mut e = -LinExpr::var(y.at(i, j));
            if i == j {
                e.add_constant(1.0);
            }
            e
        });
        prog.add_psd_block("y_upper", &upper)?;
    }

    let data_norm = meas.observations().map(|(_, m)| m * m).sum::<f64>().sqrt();
    let weight = params.reg_weight(data_norm);
    let reg = LinExpr::from_terms((0..M).map(|a| (theta.at(a, a), weight)), 0.0);
    prog.set_objective(LinExpr::var(t) + reg.clone())?;
    Ok(EstimationModel {
        kind,
        program: prog,
        n,
        x,
        nuclear: None,
        projection: Some(ProjectionHandles {
            y,
            u,
            theta,
            w_block: Some(w_block),
            params: *params,
        }),
        tolerances: None,
        psi: meas.psi.clone(),
        observed: meas.observed.clone(),
        fit: Some(t),
        regularizer: reg,
        submatrices: 0,
    })
}

pub fn build_model_projection(meas: &MeasurementMatrix, params: &ProjectionParams) -> Result<EstimationModel> {
    projection_core(meas, params, ModelKind::Projection)
}

pub fn build_model_pfpc(
    meas: &MeasurementMatrix,
    lpf: &LinearPowerFlowModel,
    slack: &SlackData,
    params: &ProjectionParams,
    tol: &ToleranceConfig,
) -> Result<EstimationModel> {
    let mut model = projection_core(meas, params, ModelKind::Pfpc)?;
    let tolerances = add_power_flow_constraints(&mut model.program, &model.x, lpf, slack, tol)?;
    let obj = model.program.objective().clone() + tolerances.loss.clone();
    model.program.set_objective(obj)?;
    model.tolerances = Some(tolerances);
    Ok(model)
}
