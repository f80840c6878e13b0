use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Initial variance of the squared-gradient-norm estimate.
pub const INITIAL_SIGMA2: f64 = 4.539_992_976_248_485_4e-5; // e^{-10}

/// Default forgetting rate of the moving averages.
pub const DEFAULT_DELTA: f64 = 0.9;

/// Exponential moving estimate of the mean and variance of `||grad L(B; w)||^2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradNormStats {
    pub mu: f64,
    pub sigma2: f64,
    pub delta: f64,
}

impl GradNormStats {
    /// Starts from `mu = 0`, `sigma2 = e^{-10}`.
    pub fn new(delta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&delta) {
            return Err(Error::Config(format!("forgetting rate {delta} outside [0, 1]")));
        }
        Ok(Self {
            mu: 0.0,
            sigma2: INITIAL_SIGMA2,
            delta,
        })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma2.sqrt()
    }

    /// Folds in one observation. The variance term is centred on the *updated* mean.
    pub fn update(&mut self, g2: f64) {
        let d = self.delta;
        self.mu = d * self.mu + (1.0 - d) * g2;
        let dev = g2 - self.mu;
        self.sigma2 = d * self.sigma2 + (1.0 - d) * dev * dev;
    }

    pub fn updated(mut self, g2: f64) -> Self {
        self.update(g2);
        self
    }
}

/// Linear threshold schedule `c_t = (t/T) * lambda1 + (1 - t/T) * lambda2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSchedule {
    pub lambda1: f64,
    pub lambda2: f64,
    pub total_steps: u64,
}

impl ThresholdSchedule {
    pub fn new(lambda1: f64, lambda2: f64, total_steps: u64) -> Result<Self> {
        if total_steps == 0 {
            return Err(Error::Config("threshold schedule needs T > 0".into()));
        }
        Ok(Self {
            lambda1,
            lambda2,
            total_steps,
        })
    }

    pub fn at(&self, t: u64) -> f64 {
        let frac = t as f64 / self.total_steps as f64;
        frac * self.lambda1 + (1.0 - frac) * self.lambda2
    }
}

/// `c_t` for schedule parameters given loosely; fails when `T == 0`.
pub fn threshold_at(lambda1: f64, lambda2: f64, total_steps: u64, t: u64) -> Result<f64> {
    Ok(ThresholdSchedule::new(lambda1, lambda2, total_steps)?.at(t))
}

/// SAM fires when the squared gradient norm is at least `mu + c * sigma`.
pub fn sam_trigger(g2: f64, stats: &GradNormStats, c: f64) -> bool {
    g2 >= stats.mu + c * stats.sigma()
}
