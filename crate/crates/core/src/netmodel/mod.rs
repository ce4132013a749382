//! Feeder cases, admittance partition, linearized power flow and the AC
//! power-flow oracle used for ground truth.

mod acpf;
mod admittance;
mod case;
mod feeders;
mod linear;

pub use acpf::{power_mismatch, slack_injection, solve_ac_power_flow, solve_ac_with, AcSolution, AC_MAX_ITERATIONS, AC_TOLERANCE};
pub use admittance::{assemble_ybus, build_admittance, AdmittancePartition};
pub use case::{parse_case, parse_case_named, Branch, Bus, BusKind, NetworkCase};
pub use feeders::{case141, four_bus, load_case, synthetic533, synthetic_feeder, two_bus, FOUR_BUS, SYNTHETIC_MIN_VOLTAGE, SYNTHETIC_SEED};
pub use linear::{build_linear_model, LinearPowerFlowModel};
