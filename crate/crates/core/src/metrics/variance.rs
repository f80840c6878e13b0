use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::adcore::{Objective, ParamSet};
use crate::models::{LabeledDataset, Mlp};
use crate::{rng, Error, Result};

/// Squared norm of the full-dataset gradient `||grad L(D; w)||^2`.
pub fn full_grad_norm(model: &Mlp, params: &ParamSet, data: &LabeledDataset) -> Result<f64> {
    Ok(full_gradient(model, params, data)?.norm_sq())
}

fn full_gradient(model: &Mlp, params: &ParamSet, data: &LabeledDataset) -> Result<ParamSet> {
    Ok(model.loss_and_grad(params, &data.full_batch())?.1)
}

/// `n` batches of `b` distinct examples, drawn independently of each other.
///
/// Indices inside a batch are sorted so that a batch covering the whole dataset reproduces
/// the full-batch summation order exactly.
fn sample_batches(len: usize, b: usize, n: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if b == 0 || b > len {
        return Err(Error::Config(format!(
            "batch size {b} invalid for {len} examples"
        )));
    }
    let mut rng = rng::stream(seed, rng::STREAM_DIAG);
    Ok((0..n)
        .map(|_| {
            let mut idx = index::sample(&mut rng, len, b).into_vec();
            idx.sort_unstable();
            idx
        })
        .collect())
}

fn batch_gradients(
    model: &Mlp,
    params: &ParamSet,
    data: &LabeledDataset,
    b: usize,
    n: usize,
    seed: u64,
) -> Result<Vec<ParamSet>> {
    if n < 2 {
        return Err(Error::InsufficientData { needed: 2, got: n });
    }
    sample_batches(data.len(), b, n, seed)?
        .iter()
        .map(|idx| Ok(model.loss_and_grad(params, &data.batch(idx))?.1))
        .collect()
}

/// Squared stochastic gradient norms of `n` random batches at fixed parameters.
pub fn sample_grad_norms(
    model: &Mlp,
    params: &ParamSet,
    data: &LabeledDataset,
    b: usize,
    n: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    Ok(batch_gradients(model, params, data, b, n, seed)?
        .iter()
        .map(ParamSet::norm_sq)
        .collect())
}

/// Both routes to the stochastic-gradient variance at one parameter point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarianceReport {
    pub batches: usize,
    pub batch_size: usize,
    /// Mean of `||grad L(B; w)||^2` over the sampled batches.
    pub mean_batch_norm_sq: f64,
    /// `||grad L(D; w)||^2`.
    pub full_norm_sq: f64,
    /// `mean_batch_norm_sq - full_norm_sq`.
    pub variance: f64,
    /// Mean of `||grad L(B; w) - grad L(D; w)||^2`.
    pub direct_variance: f64,
    /// Monte-Carlo standard error of `direct_variance`.
    pub direct_std_error: f64,
    /// Monte-Carlo standard error of `mean_batch_norm_sq`, and so of `variance`.
    pub variance_std_error: f64,
}

impl VarianceReport {
    /// Standard error of the gap between the routes, treating each estimate's own
    /// Monte-Carlo error as independent.
    pub fn combined_std_error(&self) -> f64 {
        self.variance_std_error.hypot(self.direct_std_error)
    }

    /// Gap between the routes in combined standard errors.
    pub fn gap_in_std_errors(&self) -> f64 {
        (self.variance - self.direct_variance).abs() / self.combined_std_error()
    }

    /// Whether the two estimates differ by at most `k` combined standard errors.
    pub fn routes_agree(&self, k: f64) -> bool {
        (self.variance - self.direct_variance).abs() <= k * self.combined_std_error()
    }
}

fn mean_and_std_error(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

pub fn gradient_variance(
    model: &Mlp,
    params: &ParamSet,
    data: &LabeledDataset,
    b: usize,
    n: usize,
    seed: u64,
) -> Result<VarianceReport> {
    let full = full_gradient(model, params, data)?;
    let grads = batch_gradients(model, params, data, b, n, seed)?;
    let norms: Vec<f64> = grads.iter().map(ParamSet::norm_sq).collect();
    let (mean_batch_norm_sq, variance_std_error) = mean_and_std_error(&norms);
    let full_norm_sq = full.norm_sq();

    let deviations: Vec<f64> = grads.iter().map(|g| g.sub(&full).norm_sq()).collect();
    let (direct_variance, direct_std_error) = mean_and_std_error(&deviations);

    Ok(VarianceReport {
        batches: n,
        batch_size: b,
        mean_batch_norm_sq,
        full_norm_sq,
        variance: mean_batch_norm_sq - full_norm_sq,
        direct_variance,
        direct_std_error,
        variance_std_error,
    })
}
