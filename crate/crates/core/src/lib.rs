//! Robust orthogonal CP tensor approximation under the Cauchy loss.
//!
//! The main entry point is [`hq_admm::solve`], a half-quadratic ADMM for
//! `min Σ φ_δ(A − ⟦σ; U_j⟧)` where the last `t` factors have orthonormal
//! columns and the rest have unit-norm columns. [`als::als_solve`] is the
//! least-squares baseline. [`synth`] generates benchmark problems and
//! [`video`] applies the solver to foreground–background separation.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod als;
pub mod cp;
pub mod error;
pub mod hq_admm;
pub mod io;
pub mod linalg;
pub mod loss;
pub mod pgm;
pub mod solver;
pub mod synth;
pub mod tensor;
pub mod video;

pub use als::{als_solve, AlsConfig};
pub use cp::{CpModel, ModeKind};
pub use error::{Error, Result};
pub use hq_admm::{solve, SolverConfig, SolverState};
pub use solver::{IterationRecord, SolveResult};
pub use synth::{NoiseSpec, SolverKind};
pub use tensor::DenseTensor;
pub use video::{FbResult, VideoTensor};
