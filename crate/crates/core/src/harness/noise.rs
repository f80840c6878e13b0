use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::sweep::{sweep, MeanStd, SweepCell};
use crate::optim::Algorithm;
use crate::{Error, Result};

pub const NOISE_LEVELS: [f64; 4] = [0.2, 0.4, 0.6, 0.8];

/// LookSAM period used under label noise.
pub const NOISE_LOOKSAM_K: u64 = 2;

/// One algorithm at one noise level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseCell {
    pub algorithm: Algorithm,
    pub noise: f64,
    pub cell: SweepCell,
    pub median_test_accuracy: f64,
    pub median_train_accuracy: f64,
}

fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// The noise-run variant of `base` for one algorithm: LookSAM uses `k = 2`, the adaptive
/// variants `lambda1 = -1`, `lambda2 = 1`.
pub fn noise_config(base: &ExperimentConfig, algorithm: Algorithm, noise: f64) -> ExperimentConfig {
    let mut c = ExperimentConfig {
        algorithm,
        label_noise: noise,
        ..base.clone()
    };
    if matches!(algorithm, Algorithm::LookSam | Algorithm::AeLookSam) {
        c.k = NOISE_LOOKSAM_K;
    }
    if matches!(algorithm, Algorithm::AeSam | Algorithm::AeLookSam) {
        c.lambda1 = -1.0;
        c.lambda2 = 1.0;
    }
    c
}

/// Trains every algorithm at every noise level on noisy training labels and a clean
/// test split. Cells are ordered by algorithm, then noise level.
pub fn noise_robustness_suite(
    base: &ExperimentConfig,
    levels: &[f64],
    algorithms: &[Algorithm],
) -> Result<Vec<NoiseCell>> {
    if let Some(bad) = levels.iter().find(|l| !(0.0..=1.0).contains(*l)) {
        return Err(Error::Config(format!("noise level {bad} outside [0, 1]")));
    }
    let configs: Vec<ExperimentConfig> = algorithms
        .iter()
        .flat_map(|&a| levels.iter().map(move |&n| noise_config(base, a, n)))
        .collect();
    let cells = sweep(&configs, None)?;
    Ok(cells
        .into_iter()
        .map(|cell| {
            let ok: Vec<_> = cell.records.iter().filter(|r| !r.diverged).collect();
            let mut test: Vec<f64> = ok.iter().map(|r| r.final_test_accuracy()).collect();
            let mut train: Vec<f64> = ok.iter().map(|r| r.final_train_accuracy()).collect();
            NoiseCell {
                algorithm: cell.config.algorithm,
                noise: cell.config.label_noise,
                median_test_accuracy: median(&mut test),
                median_train_accuracy: median(&mut train),
                cell,
            }
        })
        .collect())
}

/// Mean test accuracy of each cell, for compact tables.
pub fn accuracy_table(cells: &[NoiseCell]) -> Vec<(Algorithm, f64, MeanStd)> {
    cells
        .iter()
        .map(|c| (c.algorithm, c.noise, c.cell.test_accuracy))
        .collect()
}
