//! Linearized power-flow constraints with their error tolerances and the
//! weighted tolerance losses added to the objective.

use mcse_conic::{ConicProgram, DenseVar, LinExpr, SolveReport, Var};
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::measgen::{COL_ABS_V, COL_IM_S, COL_IM_V, COL_RE_S, COL_RE_V};
use crate::netmodel::LinearPowerFlowModel;
use crate::scenario::SlackData;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossKind {
    /// Sum of the (nonnegative) tolerances.
    #[default]
    L1,
    /// Sum of squared tolerances, one rotated-cone epigraph per group.
    SquaredL2,
}

/// Weight of each tolerance group in the objective.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToleranceWeights {
    pub tau_re: f64,
    pub tau_im: f64,
    pub gamma: f64,
    pub alpha_re: f64,
    pub alpha_im: f64,
}

impl ToleranceWeights {
    pub fn uniform(w: f64) -> Self {
        Self {
            tau_re: w,
            tau_im: w,
            gamma: w,
            alpha_re: w,
            alpha_im: w,
        }
    }

    fn all(&self) -> [f64; 5] {
        [self.tau_re, self.tau_im, self.gamma, self.alpha_re, self.alpha_im]
    }
}

impl Default for ToleranceWeights {
    fn default() -> Self {
        Self::uniform(1.0)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ToleranceConfig {
    pub weights: ToleranceWeights,
    pub loss: LossKind,
}

impl ToleranceConfig {
    pub fn validate(&self) -> Result<()> {
        if self.weights.all().iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(CoreError::InvalidParameter(format!(
                "tolerance weights must be finite and nonnegative, got {:?}",
                self.weights
            )));
        }
        Ok(())
    }
}

/// Variables of the tolerance set and the loss expression they contribute.
#[derive(Clone, Debug)]
pub struct ToleranceHandles {
    pub tau_re: Vec<Var>,
    pub tau_im: Vec<Var>,
    pub gamma: Vec<Var>,
    /// Present only when a slack injection measurement was supplied.
    pub alpha: Option<[Var; 2]>,
    /// `Σ ω L(ε)` as it enters the objective.
    pub loss: LinExpr,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToleranceValues {
    pub tau_re: Vec<f64>,
    pub tau_im: Vec<f64>,
    pub gamma: Vec<f64>,
    pub alpha: Option<[f64; 2]>,
}

impl ToleranceHandles {
    pub fn values(&self, report: &SolveReport) -> ToleranceValues {
        let get = |vs: &[Var]| vs.iter().map(|&v| report.value(v)).collect();
        ToleranceValues {
            tau_re: get(&self.tau_re),
            tau_im: get(&self.tau_im),
            gamma: get(&self.gamma),
            alpha: self.alpha.map(|[a, b]| [report.value(a), report.value(b)]),
        }
    }
}

fn add_two_sided(prog: &mut ConicProgram, label: &str, e: &LinExpr, tol: Var) -> Result<()> {
    prog.add_le(label, e.clone(), tol)?;
    prog.add_ge(label, e.clone(), -LinExpr::var(tol))?;
    Ok(())
}

/// Loss of one tolerance group; `None` when the group has zero weight.
fn group_loss(prog: &mut ConicProgram, name: &str, vars: &[Var], weight: f64, kind: LossKind) -> Result<LinExpr> {
    if weight == 0.0 || vars.is_empty() {
        return Ok(LinExpr::zero());
    }
    match kind {
        LossKind::L1 => Ok(LinExpr::from_terms(vars.iter().map(|&v| (v, weight)), 0.0)),
        LossKind::SquaredL2 => {
            // ‖(2ε, t − 1)‖ ≤ t + 1  ⇔  ‖ε‖² ≤ t
            let t = prog.add_scalar(&format!("{name}_sq"));
            let mut xs: Vec<LinExpr> = vars.iter().map(|&v| LinExpr::term(v, 2.0)).collect();
            xs.push(t - 1.0);
            prog.add_soc(&format!("{name}_loss"), t + 1.0, xs)?;
            Ok(LinExpr::term(t, weight))
        }
    }
}

/// Adds the three linearized power-flow blocks in terms of the columns of
/// `x`: voltage phasor, magnitude and (when `s0` is known) slack power.
pub fn add_power_flow_constraints(
    prog: &mut ConicProgram,
    x: &DenseVar,
    lpf: &LinearPowerFlowModel,
    slack: &SlackData,
    cfg: &ToleranceConfig,
) -> Result<ToleranceHandles> {
    cfg.validate()?;
    let n = x.rows();
    if lpf.n() != n || slack.y0l.len() != n {
        return Err(CoreError::Dimension(format!(
            "linear model has {} buses, slack block {}, measurements {n}",
            lpf.n(),
            slack.y0l.len()
        )));
    }
    let tau_re = prog.add_vector("tau_re", n);
    let tau_im = prog.add_vector("tau_im", n);
    let gamma = prog.add_vector("gamma", n);

    // stacked injection [Re s; Im s] as columns of X
    let s_var = |k: usize| if k < n { x.at(k, COL_RE_S) } else { x.at(k - n, COL_IM_S) };

    for i in 0..n {
        let mut e_re = LinExpr::var(x.at(i, COL_RE_V));
        let mut e_im = LinExpr::var(x.at(i, COL_IM_V));
        let mut e_mag = LinExpr::var(x.at(i, COL_ABS_V));
        for k in 0..2 * n {
            let a = lpf.a[(i, k)];
            e_re.add_term(s_var(k), -a.re);
            e_im.add_term(s_var(k), -a.im);
            e_mag.add_term(s_var(k), -lpf.c[(i, k)]);
        }
        e_re.add_constant(-lpf.w[i].re);
        e_im.add_constant(-lpf.w[i].im);
        e_mag.add_constant(-lpf.w[i].norm());
        add_two_sided(prog, "pf_re", &e_re, tau_re[i])?;
        add_two_sided(prog, "pf_im", &e_im, tau_im[i])?;
        add_two_sided(prog, "pf_mag", &e_mag, gamma[i])?;
    }

    let alpha = match slack.s0 {
        Some(s0) => {
            let a_re = prog.add_scalar("alpha_re");
            let a_im = prog.add_scalar("alpha_im");
            // s0 − v0·conj(Y00)·conj(v0) − Σ g_i·conj(v_i), g_i = v0·conj(Y0L_i)
            let c = s0 - slack.v0 * slack.y00.conj() * slack.v0.conj();
            let mut e_re = LinExpr::constant(c.re);
            let mut e_im = LinExpr::constant(c.im);
            for i in 0..n {
                let g = slack.v0 * slack.y0l[i].conj();
                let (vr, vi) = (x.at(i, COL_RE_V), x.at(i, COL_IM_V));
                e_re.add_term(vr, -g.re);
                e_re.add_term(vi, -g.im);
                e_im.add_term(vr, -g.im);
                e_im.add_term(vi, g.re);
            }
            add_two_sided(prog, "pf_slack", &e_re, a_re)?;
            add_two_sided(prog, "pf_slack", &e_im, a_im)?;
            Some([a_re, a_im])
        }
        None => None,
    };

    let w = &cfg.weights;
    let mut loss = group_loss(prog, "tau_re", &tau_re, w.tau_re, cfg.loss)?;
    loss += group_loss(prog, "tau_im", &tau_im, w.tau_im, cfg.loss)?;
    loss += group_loss(prog, "gamma", &gamma, w.gamma, cfg.loss)?;
    if let Some([a_re, a_im]) = alpha {
        loss += group_loss(prog, "alpha_re", &[a_re], w.alpha_re, cfg.loss)?;
        loss += group_loss(prog, "alpha_im", &[a_im], w.alpha_im, cfg.loss)?;
    }
    Ok(ToleranceHandles {
        tau_re,
        tau_im,
        gamma,
        alpha,
        loss,
    })
}
