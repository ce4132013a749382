use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::admittance::{build_admittance, AdmittancePartition};
use super::case::NetworkCase;
use crate::error::{CoreError, Result};

pub const AC_TOLERANCE: f64 = 1e-10;
pub const AC_MAX_ITERATIONS: usize = 200;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AcSolution {
    /// Non-slack voltages.
    pub v: Vec<Complex64>,
    /// Non-slack injections used.
    pub s: Vec<Complex64>,
    /// Slack injection `v0 · conj(Y00 v0 + Y0L v)`.
    pub s0: Complex64,
    pub iterations: usize,
    /// Last fixed-point step size (max-norm).
    pub residual: f64,
}

/// Z-bus fixed point `v ← w + YLL⁻¹ diag(conj v)⁻¹ conj(s)`.
pub fn solve_ac_power_flow(case: &NetworkCase) -> Result<AcSolution> {
    let part = build_admittance(case)?;
    solve_ac_with(&part, case.v0, &case.injections())
}

pub fn solve_ac_with(part: &AdmittancePartition, v0: Complex64, s: &[Complex64]) -> Result<AcSolution> {
    let n = part.n();
    if s.len() != n {
        return Err(CoreError::Dimension(format!("{} injections for {n} buses", s.len())));
    }
    let w = part.solve_ll(&part.yl0.iter().map(|y| -y * v0).collect::<Vec<_>>());
    let mut v = w.clone();
    let mut residual = f64::INFINITY;
    for it in 1..=AC_MAX_ITERATIONS {
        let r: Vec<Complex64> = s.iter().zip(&v).map(|(si, vi)| si.conj() / vi.conj()).collect();
        let corr = part.solve_ll(&r);
        let next: Vec<Complex64> = w.iter().zip(&corr).map(|(a, b)| a + b).collect();
        residual = next.iter().zip(&v).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        v = next;
        if !residual.is_finite() {
            break;
        }
        if residual <= AC_TOLERANCE {
            let s0 = slack_injection(part, v0, &v);
            return Ok(AcSolution {
                v,
                s: s.to_vec(),
                s0,
                iterations: it,
                residual,
            });
        }
    }
    Err(CoreError::Divergence {
        iterations: AC_MAX_ITERATIONS,
        residual,
    })
}

pub fn slack_injection(part: &AdmittancePartition, v0: Complex64, v: &[Complex64]) -> Complex64 {
    let i0 = part.y00 * v0 + part.y0l.iter().zip(v).map(|(y, vi)| y * vi).sum::<Complex64>();
    v0 * i0.conj()
}

/// Largest complex power mismatch `|vᵢ conj((Y v)ᵢ) − sᵢ|` over all buses,
/// the slack included (checked against `s0`).
pub fn power_mismatch(part: &AdmittancePartition, v0: Complex64, v: &[Complex64], s: &[Complex64], s0: Complex64) -> f64 {
    let n = part.n();
    let mut worst = (slack_injection(part, v0, v) - s0).norm();
    for i in 0..n {
        let cur = part.yl0[i] * v0 + (0..n).map(|j| part.yll[(i, j)] * v[j]).sum::<Complex64>();
        worst = worst.max((v[i] * cur.conj() - s[i]).norm());
    }
    worst
}
