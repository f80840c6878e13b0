//! Browser demo: optimizer paths on a 2-D landscape, the adaptive trigger on a synthetic
//! gradient-norm stream, and Q-Q points of MLP gradient norms.
//!
//! Every export takes plain numbers and returns a JSON string for `www/app.js`.

use rand::Rng;
use rand_distr::{Distribution, LogNormal, StandardNormal};
use serde::Serialize;
use wasm_bindgen::prelude::*;

use aesam_core::adcore::{Objective, ParamSet};
use aesam_core::metrics::{qq_points, sample_grad_norms};
use aesam_core::models::{make_dataset, AnalyticLandscape, DatasetKind, Mlp, MlpSpec};
use aesam_core::models::{Activation, LossKind};
use aesam_core::optim::{
    sam_trigger, threshold_at, Algorithm, GradNormStats, Optimizer, OptimizerConfig,
};
use aesam_core::rng;

/// A landscape seen through one mini-batch: `L(w) + n . w` for a batch-specific `n`.
struct Noisy<'a>(&'a AnalyticLandscape);

impl Objective for Noisy<'_> {
    type Batch = [f64];

    fn loss(&self, params: &ParamSet, noise: &[f64]) -> aesam_core::Result<f64> {
        let tilt: f64 = params.values().zip(noise).map(|(w, n)| w * n).sum();
        Ok(self.0.loss(params, &())? + tilt)
    }

    fn loss_and_grad(&self, params: &ParamSet, noise: &[f64]) -> aesam_core::Result<(f64, ParamSet)> {
        let (v, g) = self.0.value_and_grad(&params.flatten())?;
        let tilt: f64 = params.values().zip(noise).map(|(w, n)| w * n).sum();
        let g: Vec<f64> = g.iter().zip(noise).map(|(a, b)| a + b).collect();
        Ok((v + tilt, ParamSet::from(g)))
    }
}

#[derive(Serialize)]
struct Path {
    algorithm: &'static str,
    points: Vec<[f64; 2]>,
    sam_steps: Vec<bool>,
    final_loss: f64,
}

#[derive(Serialize)]
struct Paths {
    /// Row-major loss values on a `grid x grid` lattice over `[-extent, extent]^2`.
    grid: usize,
    extent: f64,
    values: Vec<f64>,
    beta: f64,
    paths: Vec<Path>,
}

/// ERM, SAM and AE-SAM from the same start on the 2-D wells landscape with noisy gradients.
#[allow(clippy::too_many_arguments)]
pub fn paths_json(
    amplitude: f64,
    frequency: f64,
    start_x: f64,
    start_y: f64,
    eta: f64,
    rho: f64,
    noise: f64,
    steps: u32,
    seed: u64,
) -> aesam_core::Result<String> {
    let landscape = AnalyticLandscape::nonconvex_wells(2, 0.2, amplitude, frequency)?;
    let steps = u64::from(steps.max(1));
    let mut r = rng::stream(seed, rng::STREAM_TRIGGER);
    let batches: Vec<[f64; 2]> = (0..steps)
        .map(|_| {
            let a: f64 = StandardNormal.sample(&mut r);
            let b: f64 = StandardNormal.sample(&mut r);
            [noise * a, noise * b]
        })
        .collect();

    let mut paths = Vec::new();
    for algorithm in [Algorithm::Erm, Algorithm::Sam, Algorithm::AeSam] {
        let mut opt = Optimizer::new(OptimizerConfig {
            eta,
            rho,
            seed,
            ..OptimizerConfig::new(algorithm, steps)
        })?;
        let mut w = ParamSet::from(vec![start_x, start_y]);
        let mut points = vec![[start_x, start_y]];
        let mut sam_steps = Vec::new();
        for batch in &batches {
            let trace = opt.step(&mut w, &Noisy(&landscape), batch)?;
            let p = w.flatten();
            points.push([p[0], p[1]]);
            sam_steps.push(trace.xi);
        }
        paths.push(Path {
            algorithm: algorithm.as_str(),
            points,
            sam_steps,
            final_loss: landscape.value(&w.flatten())?,
        });
    }

    let grid = 80;
    let extent = 4.0;
    let mut values = Vec::with_capacity(grid * grid);
    for i in 0..grid {
        for j in 0..grid {
            let y = extent - 2.0 * extent * i as f64 / (grid - 1) as f64;
            let x = -extent + 2.0 * extent * j as f64 / (grid - 1) as f64;
            values.push(landscape.value(&[x, y])?);
        }
    }
    Ok(serde_json::to_string(&Paths {
        grid,
        extent,
        values,
        beta: landscape.beta(),
        paths,
    })?)
}

#[derive(Serialize)]
struct TriggerTrace {
    g2: Vec<f64>,
    mu: Vec<f64>,
    threshold: Vec<f64>,
    sam: Vec<bool>,
    percent_sam: f64,
}

/// Feeds a decaying, log-normally jittered stream of squared norms through the moving
/// statistics and the scheduled threshold.
pub fn trigger_json(
    lambda1: f64,
    lambda2: f64,
    delta: f64,
    jitter: f64,
    steps: u32,
    seed: u64,
) -> aesam_core::Result<String> {
    let steps = u64::from(steps.max(1));
    let spread = LogNormal::new(0.0, jitter.max(0.0))
        .map_err(|e| aesam_core::Error::Config(e.to_string()))?;
    let mut r = rng::stream(seed, rng::STREAM_TRIGGER);
    let mut stats = GradNormStats::new(delta)?;
    let mut out = TriggerTrace {
        g2: Vec::new(),
        mu: Vec::new(),
        threshold: Vec::new(),
        sam: Vec::new(),
        percent_sam: 0.0,
    };
    for t in 0..steps {
        let level = 0.2 + 2.0 * (-(t as f64) / (0.3 * steps as f64)).exp();
        let burst = if r.random::<f64>() < 0.02 { 3.0 } else { 1.0 };
        let g2 = level * burst * spread.sample(&mut r);
        stats.update(g2);
        let c = threshold_at(lambda1, lambda2, steps, t)?;
        let fire = sam_trigger(g2, &stats, c);
        out.g2.push(g2);
        out.mu.push(stats.mu);
        out.threshold.push(stats.mu + c * stats.sigma());
        out.sam.push(fire);
    }
    out.percent_sam = 100.0 * out.sam.iter().filter(|&&s| s).count() as f64 / steps as f64;
    Ok(serde_json::to_string(&out)?)
}

#[derive(Serialize)]
struct QqJson {
    theoretical: Vec<f64>,
    sample: Vec<f64>,
    correlation: f64,
    norms: Vec<f64>,
}

/// Squared gradient norms of `batches` random batches for a freshly initialised MLP on
/// blobs, with their normal Q-Q points.
pub fn qq_json(batch_size: u32, batches: u32, relu: bool, seed: u64) -> aesam_core::Result<String> {
    let data = make_dataset(
        &DatasetKind::Blobs {
            classes: 4,
            features: 8,
            std: 1.5,
            center_box: 1.5,
        },
        1000,
        0,
    )?;
    let mlp = Mlp::new(MlpSpec {
        widths: vec![8, 32, 32, 4],
        activation: if relu { Activation::Relu } else { Activation::Tanh },
        loss: LossKind::CrossEntropy,
    })?;
    let w = mlp.init(seed);
    let norms = sample_grad_norms(&mlp, &w, &data, batch_size as usize, batches as usize, seed)?;
    let qq = qq_points(&norms)?;
    Ok(serde_json::to_string(&QqJson {
        theoretical: qq.theoretical_quantiles,
        sample: qq.sample_quantiles,
        correlation: qq.correlation,
        norms,
    })?)
}

fn js<T>(r: aesam_core::Result<T>) -> Result<T, JsValue> {
    r.map_err(|e| JsValue::from_str(&e.to_string()))
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn optimizer_paths(
    amplitude: f64,
    frequency: f64,
    start_x: f64,
    start_y: f64,
    eta: f64,
    rho: f64,
    noise: f64,
    steps: u32,
    seed: u32,
) -> Result<String, JsValue> {
    js(paths_json(amplitude, frequency, start_x, start_y, eta, rho, noise, steps, seed.into()))
}

#[wasm_bindgen]
pub fn trigger_trace(
    lambda1: f64,
    lambda2: f64,
    delta: f64,
    jitter: f64,
    steps: u32,
    seed: u32,
) -> Result<String, JsValue> {
    js(trigger_json(lambda1, lambda2, delta, jitter, steps, seed.into()))
}

#[wasm_bindgen]
pub fn grad_norm_qq(batch_size: u32, batches: u32, relu: bool, seed: u32) -> Result<String, JsValue> {
    js(qq_json(batch_size, batches, relu, seed.into()))
}
