//! Conic program representation (linear, second-order and semidefinite
//! constraints over scalar variables) and a first-order conic solver.
//!
//! Models are built as a [`ConicProgram`], which is backend independent and
//! serializable. [`solve`] runs the shipped [`Admm`] backend and certifies the
//! result with [`check_solution`].

mod admm;
mod cones;
mod expr;
mod program;
mod solve;
mod standard;

pub use admm::{Admm, AdmmParams, DENSE_ROW_NNZ};
pub use cones::{jacobi_eigen, project_psd, project_soc, PsdWork};
pub use expr::{packed_index, LinExpr, MatExpr, SymExpr, Var};
pub use program::{
    ConicProgram, Constraint, ConstraintId, DenseVar, LabeledConstraint, Shape, SymVar, VarBlock, VarBound,
};
pub use solve::{check_solution, solve_with, Backend, ResidualCheck, SolveReport, SolveSettings, SolveStatus, CHECK_SLACK};
pub use standard::{Compressed, ConeLayout, StandardForm};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConicError {
    #[error("unknown variable index {0}")]
    UnknownVariable(usize),
    #[error("unknown or removed constraint {0}")]
    UnknownConstraint(usize),
    #[error("PSD block is not symmetric at ({row}, {col})")]
    Asymmetric { row: usize, col: usize },
    #[error("serialization: {0}")]
    Serialization(String),
}

/// Solves with the default backend and certifies the returned point.
pub fn solve(prog: &ConicProgram, settings: &SolveSettings) -> SolveReport {
    solve_with(&Admm::default(), prog, settings)
}
