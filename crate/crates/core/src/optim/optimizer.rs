use std::fmt;
use std::str::FromStr;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::direction::{
    looksam_compose, looksam_decompose, looksam_trigger, sam_perturb, ss_sam_trigger,
    PerturbationMode,
};
use super::stats::{sam_trigger, GradNormStats, ThresholdSchedule, DEFAULT_DELTA};
use crate::adcore::{Objective, ParamSet};
use crate::{rng, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Erm,
    Sam,
    SsSam,
    LookSam,
    AeSam,
    AeLookSam,
}

impl Algorithm {
    pub const ALL: [Algorithm; 6] = [
        Algorithm::Erm,
        Algorithm::Sam,
        Algorithm::SsSam,
        Algorithm::LookSam,
        Algorithm::AeSam,
        Algorithm::AeLookSam,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Algorithm::Erm => "erm",
            Algorithm::Sam => "sam",
            Algorithm::SsSam => "ss-sam",
            Algorithm::LookSam => "looksam",
            Algorithm::AeSam => "ae-sam",
            Algorithm::AeLookSam => "ae-looksam",
        }
    }

    fn reuses_direction(&self) -> bool {
        matches!(self, Algorithm::LookSam | Algorithm::AeLookSam)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown algorithm {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LrSchedule {
    #[default]
    Constant,
    /// `eta * 0.5 * (1 + cos(pi t / T))`
    Cosine,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub algorithm: Algorithm,
    pub eta: f64,
    pub rho: f64,
    /// LookSAM reuse coefficient.
    pub alpha: f64,
    /// LookSAM period.
    pub k: u64,
    /// SS-SAM success probability.
    pub p: f64,
    pub delta: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub total_steps: u64,
    pub perturbation: PerturbationMode,
    pub lr_schedule: LrSchedule,
    pub seed: u64,
}

impl OptimizerConfig {
    pub fn new(algorithm: Algorithm, total_steps: u64) -> Self {
        Self {
            algorithm,
            eta: 0.1,
            rho: 0.05,
            alpha: 0.7,
            k: 5,
            p: 0.5,
            delta: DEFAULT_DELTA,
            lambda1: -1.0,
            lambda2: 1.0,
            total_steps,
            perturbation: PerturbationMode::Normalized,
            lr_schedule: LrSchedule::Constant,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return bad(format!("eta must be positive, got {}", self.eta));
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return bad(format!("rho must be positive, got {}", self.rho));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return bad(format!("alpha must be non-negative, got {}", self.alpha));
        }
        if self.k == 0 {
            return bad("LookSAM period k must be >= 1".into());
        }
        if !(0.0..=1.0).contains(&self.p) {
            return bad(format!("p must lie in [0, 1], got {}", self.p));
        }
        if !(0.0..=1.0).contains(&self.delta) {
            return bad(format!("delta must lie in [0, 1], got {}", self.delta));
        }
        if !(self.lambda1.is_finite() && self.lambda2.is_finite()) {
            return bad("lambda1 and lambda2 must be finite".into());
        }
        if self.total_steps == 0 {
            return bad("total step count T must be > 0".into());
        }
        Ok(())
    }
}

/// What happened in one iteration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepTrace {
    pub t: u64,
    /// `true` iff the SAM branch (second gradient evaluation) ran.
    pub xi: bool,
    pub loss: f64,
    pub grad_norm_sq: f64,
    pub threshold: f64,
    pub mu: f64,
    pub sigma2: f64,
}

/// Owns all per-run optimizer state and advances it one step at a time.
#[derive(Clone, Debug)]
pub struct Optimizer {
    config: OptimizerConfig,
    stats: GradNormStats,
    schedule: ThresholdSchedule,
    reuse: Option<ParamSet>,
    t: u64,
    rng: ChaCha8Rng,
    grad_evals: u64,
}

impl Optimizer {
    pub fn new(config: OptimizerConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            stats: GradNormStats::new(config.delta)?,
            schedule: ThresholdSchedule::new(config.lambda1, config.lambda2, config.total_steps)?,
            reuse: None,
            t: 0,
            rng: rng::stream(config.seed, rng::STREAM_TRIGGER),
            grad_evals: 0,
            config,
        })
    }

    pub fn config(&self) -> &OptimizerConfig {
        &self.config
    }

    pub fn stats(&self) -> &GradNormStats {
        &self.stats
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    /// Number of gradient evaluations so far (1 per ERM step, 2 per SAM step).
    pub fn grad_evals(&self) -> u64 {
        self.grad_evals
    }

    /// Cached orthogonal direction of the last LookSAM-style SAM step.
    pub fn reused_direction(&self) -> Option<&ParamSet> {
        self.reuse.as_ref()
    }

    pub fn learning_rate(&self, t: u64) -> f64 {
        match self.config.lr_schedule {
            LrSchedule::Constant => self.config.eta,
            LrSchedule::Cosine => {
                let frac = t as f64 / self.config.total_steps as f64;
                self.config.eta * 0.5 * (1.0 + (std::f64::consts::PI * frac).cos())
            }
        }
    }

    fn gradient<O: Objective + ?Sized>(
        &mut self,
        objective: &O,
        w: &ParamSet,
        batch: &O::Batch,
    ) -> Result<(f64, ParamSet)> {
        self.grad_evals += 1;
        let (loss, g) = objective.loss_and_grad(w, batch)?;
        if !loss.is_finite() || !g.is_finite() {
            return Err(Error::Numeric(format!(
                "non-finite loss or gradient at step {}",
                self.t
            )));
        }
        Ok((loss, g))
    }

    /// Gradient at the perturbed point, or `None` when the perturbation is undefined.
    fn sam_gradient<O: Objective + ?Sized>(
        &mut self,
        objective: &O,
        w: &ParamSet,
        batch: &O::Batch,
        g: &ParamSet,
    ) -> Result<Option<ParamSet>> {
        let eps = match sam_perturb(g, self.config.rho, self.config.perturbation) {
            Ok(eps) => eps,
            Err(Error::DegenerateGradient { .. }) => return Ok(None),
            Err(e) => return Err(e),
        };
        let perturbed = w.plus_scaled(1.0, &eps);
        Ok(Some(self.gradient(objective, &perturbed, batch)?.1))
    }

    /// One iteration of the configured algorithm, updating `w` in place.
    pub fn step<O: Objective + ?Sized>(
        &mut self,
        w: &mut ParamSet,
        objective: &O,
        batch: &O::Batch,
    ) -> Result<StepTrace> {
        let t = self.t;
        if t >= self.config.total_steps {
            return Err(Error::Precondition(format!(
                "step budget of {} iterations exhausted",
                self.config.total_steps
            )));
        }

        let (loss, g) = self.gradient(objective, w, batch)?;
        let g2 = g.norm_sq();
        self.stats.update(g2);
        let c = self.schedule.at(t);

        let algorithm = self.config.algorithm;
        let needs_init = algorithm.reuses_direction() && self.reuse.is_none();
        let take_sam = match algorithm {
            Algorithm::Erm => false,
            Algorithm::Sam => true,
            Algorithm::SsSam => ss_sam_trigger(&mut self.rng, self.config.p),
            Algorithm::LookSam => looksam_trigger(t, self.config.k) || needs_init,
            Algorithm::AeSam => sam_trigger(g2, &self.stats, c),
            Algorithm::AeLookSam => sam_trigger(g2, &self.stats, c) || needs_init,
        };

        let mut xi = false;
        let direction = if take_sam {
            match self.sam_gradient(objective, w, batch, &g)? {
                Some(g_s) => {
                    xi = true;
                    if algorithm.reuses_direction() {
                        if let Ok(g_v) = looksam_decompose(&g, &g_s) {
                            self.reuse = Some(g_v);
                        }
                    }
                    g_s
                }
                None => g,
            }
        } else if algorithm.reuses_direction() {
            match &self.reuse {
                Some(g_v) => looksam_compose(&g, g_v, self.config.alpha),
                None => g,
            }
        } else {
            g
        };

        w.axpy(-self.learning_rate(t), &direction);
        if !w.is_finite() {
            return Err(Error::Numeric(format!("parameters diverged at step {t}")));
        }
        self.t += 1;
        Ok(StepTrace {
            t,
            xi,
            loss,
            grad_norm_sq: g2,
            threshold: c,
            mu: self.stats.mu,
            sigma2: self.stats.sigma2,
        })
    }
}

/// `%SAM` and its fraction `zeta` over a run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamFraction {
    pub sam_steps: u64,
    pub total_steps: u64,
    pub percent: f64,
    pub zeta: f64,
}

pub fn sam_fraction(traces: &[StepTrace]) -> Result<SamFraction> {
    if traces.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let sam_steps = traces.iter().filter(|s| s.xi).count() as u64;
    let total = traces.len() as u64;
    let zeta = sam_steps as f64 / total as f64;
    Ok(SamFraction {
        sam_steps,
        total_steps: total,
        percent: 100.0 * sam_steps as f64 / total as f64,
        zeta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::AnalyticLandscape;

    fn quad_opt(algorithm: Algorithm, total: u64) -> Optimizer {
        let mut cfg = OptimizerConfig::new(algorithm, total);
        cfg.eta = 0.1;
        cfg.rho = 0.1;
        cfg.perturbation = PerturbationMode::Raw;
        Optimizer::new(cfg).unwrap()
    }

    #[test]
    fn erm_step_on_identity_quadratic() {
        let q = AnalyticLandscape::quadratic(2);
        let mut opt = quad_opt(Algorithm::Erm, 10);
        let mut w = ParamSet::from(vec![1.0, 0.0]);
        let tr = opt.step(&mut w, &q, &()).unwrap();
        assert_eq!(w.flatten(), vec![0.9, 0.0]);
        assert!(!tr.xi);
        assert_eq!(opt.grad_evals(), 1);
    }

    #[test]
    fn raw_sam_step_on_identity_quadratic() {
        // perturbed point (1.1, 0), g_s = (1.1, 0), w' = 1 - 0.1 * 1.1 = 0.89
        let q = AnalyticLandscape::quadratic(2);
        let mut opt = quad_opt(Algorithm::Sam, 10);
        let mut w = ParamSet::from(vec![1.0, 0.0]);
        let tr = opt.step(&mut w, &q, &()).unwrap();
        assert!((w.flatten()[0] - 0.89).abs() < 1e-15);
        assert_eq!(w.flatten()[1], 0.0);
        assert!(tr.xi);
        assert_eq!(opt.grad_evals(), 2);
    }

    #[test]
    fn budget_is_enforced() {
        let q = AnalyticLandscape::quadratic(1);
        let mut opt = quad_opt(Algorithm::Erm, 1);
        let mut w = ParamSet::from(vec![1.0]);
        opt.step(&mut w, &q, &()).unwrap();
        assert!(matches!(opt.step(&mut w, &q, &()), Err(Error::Precondition(_))));
    }

    #[test]
    fn normalized_mode_at_critical_point_takes_erm_step() {
        let q = AnalyticLandscape::quadratic(2);
        let mut cfg = OptimizerConfig::new(Algorithm::Sam, 5);
        cfg.perturbation = PerturbationMode::Normalized;
        let mut opt = Optimizer::new(cfg).unwrap();
        let mut w = ParamSet::from(vec![0.0, 0.0]);
        let tr = opt.step(&mut w, &q, &()).unwrap();
        assert!(!tr.xi);
        assert_eq!(opt.grad_evals(), 1);
    }

    #[test]
    fn looksam_first_step_is_sam_and_caches_direction() {
        let l = AnalyticLandscape::scaled_quadratic(vec![1.0, 3.0]).unwrap();
        for algorithm in [Algorithm::LookSam, Algorithm::AeLookSam] {
            let mut cfg = OptimizerConfig::new(algorithm, 20);
            // AE trigger that never fires: the first step must still be forced.
            cfg.lambda1 = 1e6;
            cfg.lambda2 = 1e6;
            let mut opt = Optimizer::new(cfg).unwrap();
            let mut w = ParamSet::from(vec![1.0, 1.0]);
            let tr = opt.step(&mut w, &l, &()).unwrap();
            assert!(tr.xi, "{algorithm}");
            assert!(opt.reused_direction().is_some());
            let tr = opt.step(&mut w, &l, &()).unwrap();
            assert!(!tr.xi);
        }
    }

    #[test]
    fn non_finite_gradient_aborts() {
        let l = AnalyticLandscape::quadratic(1);
        let mut opt = quad_opt(Algorithm::Erm, 3);
        let mut w = ParamSet::from(vec![f64::NAN]);
        assert!(matches!(opt.step(&mut w, &l, &()), Err(Error::Numeric(_))));
    }

    #[test]
    fn config_validation() {
        let mut cfg = OptimizerConfig::new(Algorithm::SsSam, 10);
        cfg.p = 1.5;
        assert!(Optimizer::new(cfg.clone()).is_err());
        cfg.p = 0.5;
        cfg.k = 0;
        assert!(Optimizer::new(cfg.clone()).is_err());
        cfg.k = 2;
        cfg.total_steps = 0;
        assert!(Optimizer::new(cfg).is_err());
    }

    #[test]
    fn cosine_schedule() {
        let mut cfg = OptimizerConfig::new(Algorithm::Erm, 100);
        cfg.lr_schedule = LrSchedule::Cosine;
        let opt = Optimizer::new(cfg).unwrap();
        assert_eq!(opt.learning_rate(0), 0.1);
        assert!((opt.learning_rate(50) - 0.05).abs() < 1e-15);
        assert!(opt.learning_rate(100).abs() < 1e-15);
    }

    #[test]
    fn fraction_edges() {
        let tr = |xi| StepTrace {
            t: 0,
            xi,
            loss: 0.0,
            grad_norm_sq: 0.0,
            threshold: 0.0,
            mu: 0.0,
            sigma2: 0.0,
        };
        assert_eq!(sam_fraction(&[tr(true); 4]).unwrap().percent, 100.0);
        assert_eq!(sam_fraction(&[tr(false); 4]).unwrap().percent, 0.0);
        let mixed = sam_fraction(&[tr(true), tr(false)]).unwrap();
        assert_eq!(mixed.zeta, 0.5);
        assert!(sam_fraction(&[]).is_err());
    }

    #[test]
    fn algorithm_names_round_trip() {
        for a in Algorithm::ALL {
            assert_eq!(a.as_str().parse::<Algorithm>().unwrap(), a);
        }
        assert!("adam".parse::<Algorithm>().is_err());
    }
}
