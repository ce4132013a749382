//! Measurement matrix construction, FAD masking and noise injection.
//!
//! Row `i` of the `n × 5` matrix is `[Re vᵢ, Im vᵢ, |vᵢ|, Re sᵢ, Im sᵢ]` for
//! non-slack bus `i`. Matrices are stored row-major.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// Number of measurement columns.
pub const M: usize = 5;

pub const COL_RE_V: usize = 0;
pub const COL_IM_V: usize = 1;
pub const COL_ABS_V: usize = 2;
pub const COL_RE_S: usize = 3;
pub const COL_IM_S: usize = 4;

/// Per-column relative standard deviation of measurement noise.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub relative_std: [f64; M],
}

impl NoiseSpec {
    pub fn new(phasor: f64, magnitude: f64, power: f64) -> Self {
        Self {
            relative_std: [phasor, phasor, magnitude, power, power],
        }
    }

    pub fn zero() -> Self {
        Self { relative_std: [0.0; M] }
    }

    pub fn validate(&self) -> Result<()> {
        if self.relative_std.iter().any(|s| !(*s >= 0.0) || !s.is_finite()) {
            return Err(CoreError::InvalidParameter(format!(
                "noise standard deviations must be finite and nonnegative, got {:?}",
                self.relative_std
            )));
        }
        Ok(())
    }
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self::new(0.005, 0.001, 0.01)
    }
}

pub fn build_measurement_matrix(v: &[Complex64], s: &[Complex64]) -> Result<Vec<f64>> {
    if v.len() != s.len() {
        return Err(CoreError::Dimension(format!("{} voltages but {} injections", v.len(), s.len())));
    }
    Ok(v.iter()
        .zip(s)
        .flat_map(|(vi, si)| [vi.re, vi.im, vi.norm(), si.re, si.im])
        .collect())
}

/// Number of observed entries for a given FAD: `round(fad · 5n)`.
pub fn observed_count(n: usize, fad: f64) -> usize {
    ((fad * (M * n) as f64).round() as usize).min(M * n)
}

/// Chooses which entries of an `n × 5` matrix are observed.
pub trait MaskStrategy: Send + Sync {
    fn sample(&self, n: usize, fad: f64, seed: u64) -> Result<Vec<(usize, usize)>>;
}

/// Weighted sampling without replacement that first reserves one entry per
/// column. Magnitude and power columns carry twice the phasor weight by
/// default, since field devices measure those directly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StratifiedMask {
    pub column_weights: [f64; M],
}

impl Default for StratifiedMask {
    fn default() -> Self {
        Self {
            column_weights: [1.0, 1.0, 2.0, 2.0, 2.0],
        }
    }
}

impl MaskStrategy for StratifiedMask {
    fn sample(&self, n: usize, fad: f64, seed: u64) -> Result<Vec<(usize, usize)>> {
        check_fad(fad)?;
        let total = observed_count(n, fad);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut chosen = vec![false; n * M];
        let mut picked = 0;
        if total >= M {
            for j in 0..M {
                let i = rng.random_range(0..n);
                chosen[i * M + j] = true;
                picked += 1;
            }
        }
        // Efraimidis–Spirakis keys u^(1/w): the largest keys form a weighted
        // sample without replacement
        let mut keyed: Vec<(f64, usize)> = (0..n * M)
            .filter(|&e| !chosen[e])
            .map(|e| {
                let u: f64 = rng.random();
                (u.powf(1.0 / self.column_weights[e % M]), e)
            })
            .collect();
        keyed.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        for &(_, e) in keyed.iter().take(total - picked) {
            chosen[e] = true;
        }
        Ok((0..n * M).filter(|&e| chosen[e]).map(|e| (e / M, e % M)).collect())
    }
}

fn check_fad(fad: f64) -> Result<()> {
    if !(fad > 0.0 && fad <= 1.0) {
        return Err(CoreError::InvalidParameter(format!("FAD must lie in (0, 1], got {fad}")));
    }
    Ok(())
}

/// Observed index set with the default stratified strategy.
pub fn apply_fad_mask(n: usize, fad: f64, seed: u64) -> Result<Vec<(usize, usize)>> {
    StratifiedMask::default().sample(n, fad, seed)
}

/// Noisy observations aligned with `psi`: each entry gets zero-mean Gaussian
/// noise with standard deviation `relative_std[col] · |entry|`.
pub fn add_noise(truth: &[f64], psi: &[(usize, usize)], noise: &NoiseSpec, seed: u64) -> Result<Vec<f64>> {
    noise.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    psi.iter()
        .map(|&(i, j)| {
            let x = *truth
                .get(i * M + j)
                .ok_or_else(|| CoreError::Dimension(format!("entry ({i}, {j}) outside the matrix")))?;
            let z: f64 = std_normal.sample(&mut rng);
            Ok(x + noise.relative_std[j] * x.abs() * z)
        })
        .collect()
}

/// Partially observed measurement matrix together with its ground truth.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MeasurementMatrix {
    pub n: usize,
    pub fad: f64,
    pub seed: u64,
    pub noise: NoiseSpec,
    /// Observed entries, sorted row-major.
    pub psi: Vec<(usize, usize)>,
    /// Noisy values aligned with `psi`.
    pub observed: Vec<f64>,
    /// Noise-free `n × 5` matrix, kept for evaluation only.
    pub ground_truth: Vec<f64>,
}

impl MeasurementMatrix {
    pub fn generate(v: &[Complex64], s: &[Complex64], fad: f64, noise: NoiseSpec, seed: u64) -> Result<Self> {
        Self::generate_with(&StratifiedMask::default(), v, s, fad, noise, seed)
    }

    pub fn generate_with(
        mask: &dyn MaskStrategy,
        v: &[Complex64],
        s: &[Complex64],
        fad: f64,
        noise: NoiseSpec,
        seed: u64,
    ) -> Result<Self> {
        let truth = build_measurement_matrix(v, s)?;
        let n = v.len();
        let psi = mask.sample(n, fad, seed)?;
        let observed = add_noise(&truth, &psi, &noise, seed)?;
        Ok(Self {
            n,
            fad,
            seed,
            noise,
            psi,
            observed,
            ground_truth: truth,
        })
    }

    /// Fully specified matrix without noise, useful for tests.
    pub fn from_truth(n: usize, truth: Vec<f64>, psi: Vec<(usize, usize)>) -> Result<Self> {
        if truth.len() != n * M {
            return Err(CoreError::Dimension(format!("expected {} entries, got {}", n * M, truth.len())));
        }
        let observed = psi.iter().map(|&(i, j)| truth[i * M + j]).collect();
        Ok(Self {
            n,
            fad: psi.len() as f64 / (n * M) as f64,
            seed: 0,
            noise: NoiseSpec::zero(),
            psi,
            observed,
            ground_truth: truth,
        })
    }

    pub fn truth(&self, i: usize, j: usize) -> f64 {
        self.ground_truth[i * M + j]
    }

    pub fn truth_column(&self, j: usize) -> Vec<f64> {
        (0..self.n).map(|i| self.truth(i, j)).collect()
    }

    pub fn observations(&self) -> impl Iterator<Item = ((usize, usize), f64)> + '_ {
        self.psi.iter().copied().zip(self.observed.iter().copied())
    }

    /// Root-mean-square of the configured noise standard deviation over the
    /// observed entries.
    pub fn rms_noise_std(&self) -> f64 {
        if self.psi.is_empty() {
            return 0.0;
        }
        let ss: f64 = self
            .psi
            .iter()
            .map(|&(i, j)| (self.noise.relative_std[j] * self.truth(i, j).abs()).powi(2))
            .sum();
        (ss / self.psi.len() as f64).sqrt()
    }

    /// Serializable view without the ground truth.
    pub fn scenario_record(&self) -> ScenarioRecord {
        ScenarioRecord {
            fad: self.fad,
            seed: self.seed,
            noise_spec: self.noise,
            psi: self.psi.clone(),
            observed: self.observed.clone(),
        }
    }
}

/// JSON form of a measurement scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioRecord {
    pub fad: f64,
    pub seed: u64,
    pub noise_spec: NoiseSpec,
    pub psi: Vec<(usize, usize)>,
    pub observed: Vec<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_start_row() {
        let m = build_measurement_matrix(&[Complex64::new(1.0, 0.0)], &[Complex64::new(0.0, 0.0)]).unwrap();
        assert_eq!(m, vec![1.0, 0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn mask_counts_and_determinism() {
        let a = apply_fad_mask(140, 0.32, 7).unwrap();
        assert_eq!(a.len(), 224);
        assert_eq!(a, apply_fad_mask(140, 0.32, 7).unwrap());
        for j in 0..M {
            assert!(a.iter().any(|&(_, c)| c == j));
        }
        assert_eq!(apply_fad_mask(10, 1.0, 1).unwrap().len(), 50);
        assert!(apply_fad_mask(10, 0.0, 1).is_err());
        assert!(apply_fad_mask(10, 1.5, 1).is_err());
    }

    #[test]
    fn negative_noise_rejected() {
        let spec = NoiseSpec::new(-0.1, 0.0, 0.0);
        assert!(add_noise(&[1.0; 5], &[(0, 0)], &spec, 0).is_err());
    }
}
