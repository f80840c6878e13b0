use rand::Rng;
use serde::{Deserialize, Serialize};

use super::data::Batch;
use crate::adcore::{ComputationRecord, Objective, ParamSet, Tape, Tensor, Var};
use crate::{rng, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Activation {
    Tanh,
    Relu,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossKind {
    CrossEntropy,
    /// `0.5 * ||f(x) - onehot(y)||^2` per example.
    SquaredError,
}

/// Layer widths from input to output, e.g. `[2, 64, 64, 3]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub widths: Vec<usize>,
    pub activation: Activation,
    pub loss: LossKind,
}

impl MlpSpec {
    pub fn validate(&self) -> Result<()> {
        if self.widths.len() < 2 {
            return Err(Error::Config(format!(
                "an MLP needs at least 2 layer widths, got {:?}",
                self.widths
            )));
        }
        if self.widths.contains(&0) {
            return Err(Error::Config(format!("zero-width layer in {:?}", self.widths)));
        }
        Ok(())
    }

    pub fn input_width(&self) -> usize {
        self.widths[0]
    }

    pub fn output_width(&self) -> usize {
        *self.widths.last().expect("validated")
    }
}

/// Fully connected network; parameters are stored as `[W_0, b_0, W_1, b_1, ...]`
/// with `W_l` of shape `(fan_in, fan_out)` and `b_l` of shape `(fan_out)`.
#[derive(Clone, Debug)]
pub struct Mlp {
    spec: MlpSpec,
}

impl Mlp {
    pub fn new(spec: MlpSpec) -> Result<Self> {
        spec.validate()?;
        Ok(Self { spec })
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    /// Weights uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`, biases zero.
    pub fn init(&self, seed: u64) -> ParamSet {
        let mut rng = rng::stream(seed, rng::STREAM_INIT);
        let mut tensors = Vec::new();
        for pair in self.spec.widths.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            let w = (0..fan_in * fan_out)
                .map(|_| rng.random_range(-bound..bound))
                .collect();
            tensors.push(Tensor::matrix(fan_in, fan_out, w).expect("consistent shape"));
            tensors.push(Tensor::zeros(vec![fan_out]));
        }
        ParamSet::new(tensors)
    }

    fn check_params(&self, params: &ParamSet) -> Result<()> {
        let expected: Vec<Vec<usize>> = self
            .spec
            .widths
            .windows(2)
            .flat_map(|p| [vec![p[0], p[1]], vec![p[1]]])
            .collect();
        if params.shapes() != expected {
            return Err(Error::Shape(format!(
                "parameters {:?} do not match architecture {:?}",
                params.shapes(),
                self.spec.widths
            )));
        }
        Ok(())
    }

    fn build_logits(&self, tape: &mut Tape, params: &ParamSet, features: &Tensor) -> Result<Var> {
        self.check_params(params)?;
        let (_, d) = features.as_matrix_dims()?;
        if d != self.spec.input_width() {
            return Err(Error::Shape(format!(
                "features have width {d}, network expects {}",
                self.spec.input_width()
            )));
        }
        let layers = self.spec.widths.len() - 1;
        let mut h = tape.constant(features.clone());
        for l in 0..layers {
            let w = tape.param(2 * l, params.tensors()[2 * l].clone());
            let b = tape.param(2 * l + 1, params.tensors()[2 * l + 1].clone());
            let z = tape.matmul(h, w)?;
            h = tape.add(z, b)?;
            if l + 1 < layers {
                h = match self.spec.activation {
                    Activation::Tanh => tape.tanh(h),
                    Activation::Relu => tape.relu(h),
                };
            }
        }
        Ok(h)
    }

    /// Mean per-example loss over `batch` and the record for its reverse sweep.
    pub fn forward(&self, params: &ParamSet, batch: &Batch) -> Result<(f64, ComputationRecord)> {
        if batch.is_empty() {
            return Err(Error::Config("empty batch".into()));
        }
        let k = self.spec.output_width();
        if let Some(&bad) = batch.labels().iter().find(|&&y| y >= k) {
            return Err(Error::Config(format!(
                "label {bad} does not fit an output width of {k}"
            )));
        }
        let mut tape = Tape::new();
        let logits = self.build_logits(&mut tape, params, batch.features())?;
        let loss = match self.spec.loss {
            LossKind::CrossEntropy => tape.softmax_cross_entropy(logits, batch.labels())?,
            LossKind::SquaredError => {
                let n = batch.len();
                let mut onehot = vec![0.0; n * k];
                for (i, &y) in batch.labels().iter().enumerate() {
                    onehot[i * k + y] = 1.0;
                }
                tape.squared_error(logits, Tensor::matrix(n, k, onehot)?)?
            }
        };
        let record = tape.finish(loss)?;
        Ok((record.loss(), record))
    }

    pub fn logits(&self, params: &ParamSet, features: &Tensor) -> Result<Tensor> {
        let mut tape = Tape::new();
        let out = self.build_logits(&mut tape, params, features)?;
        Ok(tape.value(out).clone())
    }

    pub fn predict(&self, params: &ParamSet, features: &Tensor) -> Result<Vec<usize>> {
        let logits = self.logits(params, features)?;
        let k = self.spec.output_width();
        Ok(logits
            .data()
            .chunks(k)
            .map(|row| {
                row.iter()
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |best, (i, &v)| {
                        if v > best.1 {
                            (i, v)
                        } else {
                            best
                        }
                    })
                    .0
            })
            .collect())
    }

    /// Fraction of correctly classified examples in `batch`, in `[0, 1]`.
    pub fn accuracy(&self, params: &ParamSet, batch: &Batch) -> Result<f64> {
        if batch.is_empty() {
            return Ok(0.0);
        }
        let predicted = self.predict(params, batch.features())?;
        let correct = predicted
            .iter()
            .zip(batch.labels())
            .filter(|(p, y)| p == y)
            .count();
        Ok(correct as f64 / batch.len() as f64)
    }
}

impl Objective for Mlp {
    type Batch = Batch;

    fn loss(&self, params: &ParamSet, batch: &Batch) -> Result<f64> {
        Ok(self.forward(params, batch)?.0)
    }

    fn loss_and_grad(&self, params: &ParamSet, batch: &Batch) -> Result<(f64, ParamSet)> {
        let (loss, mut record) = self.forward(params, batch)?;
        Ok((loss, record.backward()?))
    }
}
