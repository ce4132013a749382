//! A complete estimation scenario: feeder, linear model, ground truth and
//! the partially observed noisy measurement matrix.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::measgen::{MeasurementMatrix, NoiseSpec, COL_RE_S};
use crate::netmodel::{
    build_admittance, build_linear_model, solve_ac_with, AcSolution, LinearPowerFlowModel, NetworkCase,
};

/// Slack-bus data entering the third block of the power-flow constraints.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SlackData {
    pub v0: Complex64,
    pub y00: Complex64,
    pub y0l: Vec<Complex64>,
    /// Measured slack injection; the slack block is dropped when absent.
    pub s0: Option<Complex64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub fad: f64,
    pub seed: u64,
    pub noise: NoiseSpec,
    /// Multiplier applied to every load before solving the AC oracle.
    pub load_scale: f64,
    /// Supply a noisy slack-injection measurement.
    pub measure_slack: bool,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            fad: 0.32,
            seed: 0,
            noise: NoiseSpec::default(),
            load_scale: 1.0,
            measure_slack: true,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Scenario {
    pub case_name: String,
    pub config: ScenarioConfig,
    pub meas: MeasurementMatrix,
    pub lpf: LinearPowerFlowModel,
    pub slack: SlackData,
    pub truth: AcSolution,
    /// Adjacency between non-slack buses.
    pub adjacency: Vec<Vec<usize>>,
}

impl Scenario {
    pub fn generate(case: &NetworkCase, config: &ScenarioConfig) -> Result<Self> {
        let scaled = case.scaled_loads(config.load_scale);
        let part = build_admittance(&scaled)?;
        let lpf = build_linear_model(&part, scaled.v0)?;
        let truth = solve_ac_with(&part, scaled.v0, &scaled.injections())?;
        let meas = MeasurementMatrix::generate(&truth.v, &truth.s, config.fad, config.noise, config.seed)?;
        let s0 = config.measure_slack.then(|| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(2);
            let z = Normal::new(0.0, 1.0).expect("unit normal");
            let sd = config.noise.relative_std[COL_RE_S];
            let (a, b): (f64, f64) = (z.sample(&mut rng), z.sample(&mut rng));
            Complex64::new(
                truth.s0.re * (1.0 + sd * a),
                truth.s0.im * (1.0 + sd * b),
            )
        });
        Ok(Self {
            case_name: case.name.clone(),
            config: config.clone(),
            meas,
            lpf,
            slack: SlackData {
                v0: scaled.v0,
                y00: part.y00,
                y0l: part.y0l.clone(),
                s0,
            },
            truth,
            adjacency: case.load_adjacency(),
        })
    }

    pub fn n(&self) -> usize {
        self.meas.n
    }

    /// True voltage magnitudes of the non-slack buses.
    pub fn true_magnitudes(&self) -> Vec<f64> {
        self.truth.v.iter().map(|v| v.norm()).collect()
    }
}
