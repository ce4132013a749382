//! Built-in feeders: small hand-written cases, the 141-bus case shipped in
//! `data/`, and a seeded synthetic radial feeder generator.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::acpf::solve_ac_power_flow;
use super::case::{parse_case_named, Bus, BusKind, NetworkCase};
use crate::error::{CoreError, Result};

const CASE141: &str = include_str!("../../../../data/case141.m");

/// Seed used for the ~533-bus synthetic substitute.
pub const SYNTHETIC_SEED: u64 = 533;
/// Lowest voltage magnitude allowed in generated feeders.
pub const SYNTHETIC_MIN_VOLTAGE: f64 = 0.93;

/// Slack plus three load buses on a single lateral `1 — 2 — 3 — 4`.
pub const FOUR_BUS: &str = "
% four-bus radial feeder, one lateral
mpc.baseMVA = 10;
mpc.bus = [
  1 3 0    0    0 0 1 1 0 12.47 1 1   1;
  2 1 5.0  2.0  0 0 1 1 0 12.47 1 1.1 0.9;
  3 1 4.0  1.5  0 0 1 1 0 12.47 1 1.1 0.9;
  4 1 3.0  1.0  0 0 1 1 0 12.47 1 1.1 0.9;
];
mpc.gen = [1 0 0 10 -10 1 10 1 10 0];
mpc.branch = [
  1 2 0.010 0.020 0 0 0 0 0 0 1 -360 360;
  2 3 0.012 0.022 0 0 0 0 0 0 1 -360 360;
  3 4 0.015 0.025 0 0 0 0 0 0 1 -360 360;
];
";

pub fn four_bus() -> NetworkCase {
    parse_case_named(FOUR_BUS, "four-bus").expect("built-in four-bus case is valid")
}

pub fn case141() -> NetworkCase {
    parse_case_named(CASE141, "case141").expect("bundled case141 is valid")
}

/// Slack and one load bus joined by impedance `z`; `load` is consumed power.
pub fn two_bus(z: Complex64, load: Complex64) -> NetworkCase {
    let buses = vec![
        Bus {
            id: 1,
            kind: BusKind::Slack,
            load: Complex64::new(0.0, 0.0),
            shunt: Complex64::new(0.0, 0.0),
        },
        Bus {
            id: 2,
            kind: BusKind::Pq,
            load,
            shunt: Complex64::new(0.0, 0.0),
        },
    ];
    NetworkCase::new("two-bus", 1.0, buses, vec![(1, 2, z.re, z.im, 0.0, 1.0)], Complex64::new(1.0, 0.0))
        .expect("two-bus case is valid")
}

/// Random radial feeder with `buses` buses (slack included). Branches favour
/// recently added buses so laterals grow long; loads are rescaled until the
/// AC solution stays above [`SYNTHETIC_MIN_VOLTAGE`].
pub fn synthetic_feeder(buses: usize, seed: u64) -> Result<NetworkCase> {
    if buses < 2 {
        return Err(CoreError::InvalidParameter("a feeder needs at least two buses".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut list = vec![Bus {
        id: 1,
        kind: BusKind::Slack,
        load: Complex64::new(0.0, 0.0),
        shunt: Complex64::new(0.0, 0.0),
    }];
    let mut branches = Vec::with_capacity(buses - 1);
    for k in 2..=buses {
        let parent = if rng.random_bool(0.7) {
            let lo = k.saturating_sub(6).max(1);
            rng.random_range(lo..k)
        } else {
            rng.random_range(1..k)
        };
        let r = 0.004 * rng.random_range(0.5..1.5);
        let x = r * rng.random_range(0.6..1.0);
        branches.push((parent, k, r, x, 0.0, 1.0));
        let load = if rng.random_bool(0.7) {
            let p = rng.random_range(0.005..0.05);
            let pf: f64 = rng.random_range(0.85..0.95);
            Complex64::new(p, p * (1.0 / (pf * pf) - 1.0).sqrt())
        } else {
            Complex64::new(0.0, 0.0)
        };
        list.push(Bus {
            id: k,
            kind: BusKind::Pq,
            load,
            shunt: Complex64::new(0.0, 0.0),
        });
    }
    let mut case = NetworkCase::new(format!("synthetic{buses}"), 10.0, list, branches, Complex64::new(1.0, 0.0))?;
    for _ in 0..60 {
        match solve_ac_power_flow(&case) {
            Ok(sol) if sol.v.iter().all(|v| v.norm() >= SYNTHETIC_MIN_VOLTAGE) => return Ok(case),
            _ => case = case.scaled_loads(0.85),
        }
    }
    Err(CoreError::Validation("could not load the synthetic feeder within voltage limits".into()))
}

/// The ~533-bus synthetic feeder used in place of the unpublished case.
pub fn synthetic533() -> NetworkCase {
    synthetic_feeder(533, SYNTHETIC_SEED).expect("synthetic feeder generation is deterministic")
}

/// Resolves a built-in case name or reads a case file from disk.
pub fn load_case(spec: &str) -> Result<NetworkCase> {
    match spec {
        "four-bus" | "4bus" => Ok(four_bus()),
        "case141" | "141" => Ok(case141()),
        "synthetic533" | "533" => Ok(synthetic533()),
        path => {
            let text = std::fs::read_to_string(path)?;
            let name = std::path::Path::new(path)
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or("case")
                .to_string();
            parse_case_named(&text, &name)
        }
    }
}
