use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::run::{run_experiment, RunRecord};
use crate::{Error, Result};

/// The threshold values of the ablation grid.
pub const LAMBDA_VALUES: [f64; 5] = [-2.0, -1.0, 0.0, 1.0, 2.0];

/// Mean and sample standard deviation; the deviation is 0 for a single value.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self {
                mean: f64::NAN,
                std: f64::NAN,
                count: 0,
            };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, std, count: n }
    }
}

/// One failed run inside a sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunFailure {
    pub seed: u64,
    pub message: String,
}

/// All seeds of one config.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub config: ExperimentConfig,
    pub records: Vec<RunRecord>,
    pub failures: Vec<RunFailure>,
    pub percent_sam: MeanStd,
    pub test_accuracy: MeanStd,
    pub train_accuracy: MeanStd,
    pub validation_accuracy: MeanStd,
}

impl SweepCell {
    fn new(config: ExperimentConfig, outcomes: Vec<(u64, Result<RunRecord>)>) -> Self {
        let mut records = Vec::new();
        let mut failures = Vec::new();
        for (seed, outcome) in outcomes {
            match outcome {
                Ok(r) if r.diverged => {
                    failures.push(RunFailure {
                        seed,
                        message: r.error.clone().unwrap_or_else(|| "diverged".into()),
                    });
                    records.push(r);
                }
                Ok(r) => records.push(r),
                Err(e) => failures.push(RunFailure {
                    seed,
                    message: e.to_string(),
                }),
            }
        }
        let ok: Vec<&RunRecord> = records.iter().filter(|r| !r.diverged).collect();
        let stat = |f: fn(&RunRecord) -> f64| MeanStd::of(&ok.iter().map(|r| f(r)).collect::<Vec<_>>());
        Self {
            percent_sam: stat(|r| r.percent_sam),
            test_accuracy: stat(RunRecord::final_test_accuracy),
            train_accuracy: stat(RunRecord::final_train_accuracy),
            validation_accuracy: stat(|r| r.final_epoch().map_or(f64::NAN, |e| e.validation_accuracy)),
            config,
            records,
            failures,
        }
    }

    pub fn failed(&self) -> bool {
        !self.failures.is_empty()
    }
}

/// Runs every `(config, seed)` pair in parallel; cells keep the order of `configs`.
///
/// `seeds` overrides each config's own seed list when given. Failed runs are recorded in
/// their cell and the sweep carries on.
pub fn sweep(configs: &[ExperimentConfig], seeds: Option<&[u64]>) -> Result<Vec<SweepCell>> {
    if configs.is_empty() {
        return Err(Error::Config("a sweep needs at least one config".into()));
    }
    let jobs: Vec<(usize, u64)> = configs
        .iter()
        .enumerate()
        .flat_map(|(i, c)| {
            let s = seeds.unwrap_or(&c.seeds);
            s.iter().map(move |&seed| (i, seed))
        })
        .collect();
    let outcomes: Vec<(usize, u64, Result<RunRecord>)> = jobs
        .par_iter()
        .map(|&(i, seed)| (i, seed, run_experiment(&configs[i], seed)))
        .collect();

    let mut grouped: Vec<Vec<(u64, Result<RunRecord>)>> = configs.iter().map(|_| Vec::new()).collect();
    for (i, seed, outcome) in outcomes {
        grouped[i].push((seed, outcome));
    }
    Ok(configs
        .iter()
        .cloned()
        .zip(grouped)
        .map(|(c, o)| SweepCell::new(c, o))
        .collect())
}

/// Index of the cell with the highest mean final validation accuracy; ties go to the
/// earlier cell. Cells without successful runs are skipped.
pub fn best_by_validation(cells: &[SweepCell]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, c) in cells.iter().enumerate() {
        let v = c.validation_accuracy.mean;
        if v.is_nan() {
            continue;
        }
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((i, v));
        }
    }
    best.map(|(i, _)| i)
}

/// Copies of `base` for every `lambda1 <= lambda2` pair drawn from `values`,
/// ordered by `lambda2` then `lambda1`.
pub fn lambda_grid(base: &ExperimentConfig, values: &[f64]) -> Vec<ExperimentConfig> {
    let mut out = Vec::new();
    for &l2 in values {
        for &l1 in values.iter().filter(|&&l1| l1 <= l2) {
            out.push(ExperimentConfig {
                lambda1: l1,
                lambda2: l2,
                ..base.clone()
            });
        }
    }
    out
}

/// Copies of `base` over the cartesian product of `rhos` and `alphas`.
pub fn rho_alpha_grid(base: &ExperimentConfig, rhos: &[f64], alphas: &[f64]) -> Vec<ExperimentConfig> {
    rhos.iter()
        .flat_map(|&rho| {
            alphas.iter().map(move |&alpha| ExperimentConfig {
                rho,
                alpha,
                ..base.clone()
            })
        })
        .collect()
}
