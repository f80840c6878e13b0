//! ERM, SAM and the SAM-mixing variants.
//!
//! Every algorithm shares one [`Optimizer::step`]: compute the batch gradient, fold its
//! squared norm into the moving statistics, decide whether to take the SAM branch, and
//! move along the chosen direction.

mod direction;
mod optimizer;
mod stats;

pub use direction::{
    looksam_compose, looksam_decompose, looksam_trigger, sam_perturb, ss_sam_trigger,
    PerturbationMode, DEGENERATE_NORM,
};
pub use optimizer::{
    sam_fraction, Algorithm, LrSchedule, Optimizer, OptimizerConfig, SamFraction, StepTrace,
};
pub use stats::{
    sam_trigger, threshold_at, GradNormStats, ThresholdSchedule, DEFAULT_DELTA, INITIAL_SIGMA2,
};
