//! Boundary stabilization and state observation for the unstable heat
//! equation `w_t = Δw + μw` on a rectangle with Dirichlet data on
//! `x = 0`, `y = 0` and Neumann control/measurement on `x = a`, `y = b`.
//!
//! The crate is `no_std` with `alloc`. File formats, configuration and the
//! command line live in the companion `heatctl` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod elliptic;
pub mod error;
pub mod expr;
pub mod generator;
pub mod grid;
pub mod laplacian;
pub mod simulate;
pub mod sparse;
pub mod spectral;
pub mod synthesis;

pub use elliptic::{make_solver, HelmholtzSolver};
pub use error::{Error, Result};
pub use grid::{boundary_trace, inner_product_gamma1, inner_product_omega, BoundaryField, Grid, NodeKind, ScalarField};
pub use laplacian::{assemble_laplacian, neumann_load, BoundaryScheme, LinearOperator};
pub use expr::Expr;
pub use simulate::{run, Dynamics, SimConfig, SimState, SimTrace, Stepper};
pub use spectral::{build_truncation, compute_eigenpairs, truncate_operator, EigenPair, TruncationBasis};
pub use synthesis::{ControllerSynthesis, GainChoice, ObserverSynthesis};

pub use nalgebra::{Complex, DMatrix};
