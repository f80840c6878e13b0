//! Adaptive sharpness-aware minimization.
//!
//! The crate is split into five layers:
//!
//! * [`adcore`]: dense `f64` tensors, a reverse-mode tape and a central-difference oracle.
//! * [`models`]: tiny MLPs, analytic landscapes with known smoothness, datasets and label noise.
//! * [`optim`]: ERM, SAM, SS-SAM, LookSAM, AE-SAM and AE-LookSAM behind one [`optim::Optimizer`].
//! * [`metrics`]: gradient-variance, Q-Q normality and full-batch convergence-bound checks.
//! * [`harness`]: experiment configuration, training loops, sweeps and report emission.

pub mod adcore;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod models;
pub mod optim;
pub mod rng;

pub use error::{Error, Result};
