use faer::linalg::solvers::DenseSolveCore;
use faer::Mat;
use num_complex::Complex64;

use super::case::NetworkCase;
use crate::error::{CoreError, Result};

/// Condition estimates above this are treated as singular.
const MAX_CONDITION: f64 = 1e14;

/// Slack/non-slack partition of the bus admittance matrix.
#[derive(Clone, Debug)]
pub struct AdmittancePartition {
    pub y00: Complex64,
    /// Slack row, length n.
    pub y0l: Vec<Complex64>,
    /// Slack column, length n.
    pub yl0: Vec<Complex64>,
    pub yll: Mat<Complex64>,
    /// Dense inverse of `yll`, shared by the linear model and the AC solver.
    pub yll_inv: Mat<Complex64>,
    /// `‖YLL‖₁ ‖YLL⁻¹‖₁`.
    pub condition: f64,
}

impl AdmittancePartition {
    pub fn n(&self) -> usize {
        self.y0l.len()
    }

    /// Reassembles the full `(n+1) × (n+1)` matrix.
    pub fn full(&self) -> Mat<Complex64> {
        let n = self.n();
        Mat::from_fn(n + 1, n + 1, |i, j| match (i, j) {
            (0, 0) => self.y00,
            (0, j) => self.y0l[j - 1],
            (i, 0) => self.yl0[i - 1],
            (i, j) => self.yll[(i - 1, j - 1)],
        })
    }

    /// `YLL⁻¹ r`.
    pub fn solve_ll(&self, r: &[Complex64]) -> Vec<Complex64> {
        let n = self.n();
        (0..n)
            .map(|i| (0..n).map(|j| self.yll_inv[(i, j)] * r[j]).sum())
            .collect()
    }
}

/// Full bus admittance matrix: π-model branches with the tap on the `from`
/// side plus bus shunts.
pub fn assemble_ybus(case: &NetworkCase) -> Mat<Complex64> {
    let nb = case.buses.len();
    let mut y = Mat::<Complex64>::zeros(nb, nb);
    for br in &case.branches {
        let ys = br.series_admittance();
        let half_b = Complex64::new(0.0, br.b / 2.0);
        let t = br.tap;
        let (f, k) = (br.from, br.to);
        y[(f, f)] += (ys + half_b) / (t * t);
        y[(k, k)] += ys + half_b;
        y[(f, k)] -= ys / t;
        y[(k, f)] -= ys / t;
    }
    for (i, b) in case.buses.iter().enumerate() {
        y[(i, i)] += b.shunt;
    }
    y
}

pub fn build_admittance(case: &NetworkCase) -> Result<AdmittancePartition> {
    let y = assemble_ybus(case);
    let n = case.n();
    let yll = Mat::from_fn(n, n, |i, j| y[(i + 1, j + 1)]);
    let yll_inv = yll.partial_piv_lu().inverse();
    let norm1 = |m: &Mat<Complex64>| {
        (0..m.ncols())
            .map(|j| (0..m.nrows()).map(|i| m[(i, j)].norm()).sum::<f64>())
            .fold(0.0f64, f64::max)
    };
    let condition = norm1(&yll) * norm1(&yll_inv);
    if !condition.is_finite() || condition > MAX_CONDITION {
        return Err(CoreError::SingularAdmittance { condition });
    }
    Ok(AdmittancePartition {
        y00: y[(0, 0)],
        y0l: (1..=n).map(|j| y[(0, j)]).collect(),
        yl0: (1..=n).map(|i| y[(i, 0)]).collect(),
        yll,
        yll_inv,
        condition,
    })
}
