use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::adcore::{Objective, ParamSet};
use crate::metrics::full_grad_norm;
use crate::models::{inject_label_noise, minibatch_iter, split, LabeledDataset, Mlp, NoiseSpec, Splits};
use crate::optim::{Optimizer, StepTrace};
use crate::{Error, Result};

/// Above this many steps only every [`THIN_STRIDE`]-th trace is kept.
pub const THIN_ABOVE: u64 = 100_000;
pub const THIN_STRIDE: u64 = 10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    /// Mean batch loss seen during the epoch.
    pub train_loss: f64,
    /// Accuracy on the (possibly noisy) training labels.
    pub train_accuracy: f64,
    pub validation_accuracy: f64,
    pub test_loss: f64,
    pub test_accuracy: f64,
    /// `||grad L(D_train; w)||^2` at the end of the epoch.
    pub full_grad_norm_sq: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config: ExperimentConfig,
    pub seed: u64,
    pub total_steps: u64,
    /// Step traces, every `trace_stride`-th one.
    pub traces: Vec<StepTrace>,
    pub trace_stride: u64,
    pub epochs: Vec<EpochRecord>,
    pub sam_steps: u64,
    pub percent_sam: f64,
    pub zeta: f64,
    pub grad_evals: u64,
    /// Steps actually completed; less than `total_steps` only for diverged runs.
    pub completed_steps: u64,
    pub diverged: bool,
    pub error: Option<String>,
    pub test_label_checksum: u64,
    pub flipped_labels: usize,
    pub wall_clock_secs: f64,
}

impl RunRecord {
    pub fn final_epoch(&self) -> Option<&EpochRecord> {
        self.epochs.last()
    }

    pub fn final_train_accuracy(&self) -> f64 {
        self.final_epoch().map_or(f64::NAN, |e| e.train_accuracy)
    }

    pub fn final_test_accuracy(&self) -> f64 {
        self.final_epoch().map_or(f64::NAN, |e| e.test_accuracy)
    }

    /// Per-epoch full-gradient norms, in epoch order.
    pub fn grad_norm_curve(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.full_grad_norm_sq).collect()
    }

    /// Same record with the wall-clock field cleared, for reproducibility comparisons.
    pub fn without_timing(&self) -> Self {
        Self {
            wall_clock_secs: 0.0,
            ..self.clone()
        }
    }
}

/// Dataset splits of a config; the training labels are noised with the run seed.
pub struct PreparedData {
    pub splits: Splits,
    pub clean_train: LabeledDataset,
    pub flipped_labels: usize,
}

pub fn prepare_data(config: &ExperimentConfig, seed: u64) -> Result<PreparedData> {
    let full = config.load_dataset()?;
    let mut splits = split(&full, config.test_fraction, config.validation_fraction, config.dataset_seed)?;
    let clean_train = splits.train.clone();
    if config.label_noise > 0.0 {
        splits.train = inject_label_noise(
            &splits.train,
            NoiseSpec {
                flip_probability: config.label_noise,
                seed,
            },
        )?;
    }
    let flipped_labels = clean_train
        .labels()
        .iter()
        .zip(splits.train.labels())
        .filter(|(a, b)| a != b)
        .count();
    Ok(PreparedData {
        splits,
        clean_train,
        flipped_labels,
    })
}

/// Trains one seed and also returns the final parameters.
pub fn run_experiment_with_params(
    config: &ExperimentConfig,
    seed: u64,
) -> Result<(RunRecord, ParamSet, Mlp)> {
    config.validate()?;
    let started = Instant::now();
    let data = prepare_data(config, seed)?;
    let train = &data.splits.train;
    let mlp = Mlp::new(config.mlp_spec(train.dim(), train.classes()))?;
    let total_steps = config.total_steps(train.len());
    if config.batch_size > train.len() {
        return Err(Error::Config(format!(
            "batch_size {} exceeds the {} training examples",
            config.batch_size,
            train.len()
        )));
    }

    let mut opt_config = config.optimizer_config(total_steps);
    opt_config.seed = seed;
    let mut opt = Optimizer::new(opt_config)?;
    let mut w = mlp.init(seed);

    let stride = if total_steps > THIN_ABOVE { THIN_STRIDE } else { 1 };
    let mut traces = Vec::new();
    let mut sam_steps = 0;
    let mut completed = 0;
    let mut epochs = Vec::with_capacity(config.epochs);
    let mut failure = None;

    let train_batch = train.full_batch();
    let val_batch = data.splits.validation.full_batch();
    let test_batch = data.splits.test.full_batch();

    'training: for epoch in 0..config.epochs {
        let mut loss_sum = 0.0;
        let batches = minibatch_iter(train.len(), config.batch_size, seed, epoch as u64)?;
        for idx in &batches {
            match opt.step(&mut w, &mlp, &train.batch(idx)) {
                Ok(trace) => {
                    loss_sum += trace.loss;
                    sam_steps += u64::from(trace.xi);
                    if trace.t % stride == 0 {
                        traces.push(trace);
                    }
                    completed += 1;
                }
                Err(e @ Error::Numeric(_)) => {
                    failure = Some(e.to_string());
                    break 'training;
                }
                Err(e) => return Err(e),
            }
        }
        let eval = (|| -> Result<EpochRecord> {
            Ok(EpochRecord {
                epoch: epoch + 1,
                train_loss: loss_sum / batches.len() as f64,
                train_accuracy: mlp.accuracy(&w, &train_batch)?,
                validation_accuracy: mlp.accuracy(&w, &val_batch)?,
                test_loss: if test_batch.is_empty() { 0.0 } else { mlp.loss(&w, &test_batch)? },
                test_accuracy: mlp.accuracy(&w, &test_batch)?,
                full_grad_norm_sq: full_grad_norm(&mlp, &w, train)?,
            })
        })();
        match eval {
            Ok(record) => epochs.push(record),
            Err(e @ Error::Numeric(_)) => {
                failure = Some(e.to_string());
                break;
            }
            Err(e) => return Err(e),
        }
    }

    let (percent_sam, zeta) = if completed > 0 {
        (
            100.0 * sam_steps as f64 / completed as f64,
            sam_steps as f64 / completed as f64,
        )
    } else {
        (0.0, 0.0)
    };

    let record = RunRecord {
        config: config.clone(),
        seed,
        total_steps,
        traces,
        trace_stride: stride,
        epochs,
        sam_steps,
        percent_sam,
        zeta,
        grad_evals: opt.grad_evals(),
        completed_steps: completed,
        diverged: failure.is_some(),
        error: failure,
        test_label_checksum: data.splits.test.label_checksum(),
        flipped_labels: data.flipped_labels,
        wall_clock_secs: started.elapsed().as_secs_f64(),
    };
    Ok((record, w, mlp))
}

/// Trains the config's MLP for `T = epochs * batches_per_epoch` steps with one seed.
///
/// Numeric blow-ups yield a record flagged `diverged` with the traces gathered so far;
/// invalid configurations are errors.
pub fn run_experiment(config: &ExperimentConfig, seed: u64) -> Result<RunRecord> {
    Ok(run_experiment_with_params(config, seed)?.0)
}
