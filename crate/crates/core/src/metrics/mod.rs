//! Sharpness diagnostics and convergence checks.

mod bound;
mod qq;
mod variance;

pub use bound::{check_gd_bound, convergence_trend, gd_trajectory, BoundCheck, DEFAULT_TREND_FRACTION};
pub use qq::{qq_points, QqReport, MIN_QQ_SAMPLES};
pub use variance::{full_grad_norm, gradient_variance, sample_grad_norms, VarianceReport};
