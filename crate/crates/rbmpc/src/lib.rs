//! Certified reduced-basis model predictive control (RB-MPC) for
//! parametrized linear parabolic PDEs.
//!
//! The crate implements the full pipeline:
//!
//! 1. [`mesh`]/[`fem`] — truth discretization: linear finite elements,
//!    backward Euler, affine operator assembly, Riesz machinery, C_D, α_LB;
//! 2. [`ocp`]/[`solver`] — the finite-horizon optimal control kernel (BFGS
//!    with exact line search, primal-dual active sets, dense KKT oracle)
//!    running identically on truth and reduced models;
//! 3. [`rb`] — POD/Greedy construction of an integrated reduced basis with
//!    offline residual Gram data and bundle serialization ([`bundle_io`]);
//! 4. [`bounds`] — rigorous a posteriori error bounds for control, state,
//!    adjoint and cost;
//! 5. [`garding`] — exponential change of variables for weakly coercive
//!    spatial operators;
//! 6. [`mpc`] — adaptive minimal-stabilizing-horizon MPC loops with online
//!    suboptimality certification;
//! 7. [`config`]/[`report`] — experiment presets, JSON configuration and CSV
//!    reporting used by the `rbmpc` command-line binary.

pub mod bounds;
pub mod bundle_io;
pub mod config;
pub mod error;
pub mod fem;
pub mod garding;
pub mod mesh;
pub mod mpc;
pub mod ocp;
pub mod problem;
pub mod rb;
pub mod report;
pub mod solver;
pub mod sparse;

pub use error::{RbMpcError, Result};
