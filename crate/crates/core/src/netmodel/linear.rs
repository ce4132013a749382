use faer::Mat;
use num_complex::Complex64;

use super::admittance::AdmittancePartition;
use crate::error::{CoreError, Result};

const MIN_ZERO_LOAD_VOLTAGE: f64 = 1e-6;

/// Fixed-point linearization around the zero-load profile:
/// `v ≈ w + A [Re s; Im s]` and `|v| ≈ |w| + C [Re s; Im s]`.
#[derive(Clone, Debug)]
pub struct LinearPowerFlowModel {
    pub w: Vec<Complex64>,
    /// `n × 2n` complex sensitivity.
    pub a: Mat<Complex64>,
    /// `n × 2n` real magnitude sensitivity.
    pub c: Mat<f64>,
}

impl LinearPowerFlowModel {
    pub fn n(&self) -> usize {
        self.w.len()
    }

    fn stacked(s: &[Complex64]) -> Vec<f64> {
        s.iter().map(|z| z.re).chain(s.iter().map(|z| z.im)).collect()
    }

    pub fn predict(&self, s: &[Complex64]) -> Vec<Complex64> {
        let x = Self::stacked(s);
        (0..self.n())
            .map(|i| self.w[i] + x.iter().enumerate().map(|(k, &xk)| self.a[(i, k)] * xk).sum::<Complex64>())
            .collect()
    }

    pub fn predict_magnitude(&self, s: &[Complex64]) -> Vec<f64> {
        let x = Self::stacked(s);
        (0..self.n())
            .map(|i| self.w[i].norm() + x.iter().enumerate().map(|(k, &xk)| self.c[(i, k)] * xk).sum::<f64>())
            .collect()
    }
}

pub fn build_linear_model(part: &AdmittancePartition, v0: Complex64) -> Result<LinearPowerFlowModel> {
    let n = part.n();
    let rhs: Vec<Complex64> = part.yl0.iter().map(|y| -y * v0).collect();
    let w = part.solve_ll(&rhs);
    if let Some((bus, z)) = w.iter().enumerate().find(|(_, z)| z.norm() < MIN_ZERO_LOAD_VOLTAGE) {
        return Err(CoreError::DegenerateFeeder {
            bus,
            magnitude: z.norm(),
        });
    }
    let j = Complex64::i();
    let a = Mat::from_fn(n, 2 * n, |i, k| {
        if k < n {
            part.yll_inv[(i, k)] / w[k].conj()
        } else {
            -j * part.yll_inv[(i, k - n)] / w[k - n].conj()
        }
    });
    let c = Mat::from_fn(n, 2 * n, |i, k| {
        let rot = w[i].conj() / w[i].norm();
        (rot * a[(i, k)]).re
    });
    Ok(LinearPowerFlowModel { w, a, c })
}
