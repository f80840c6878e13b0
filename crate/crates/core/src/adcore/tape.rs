//! Forward tape and reverse sweep.
//!
//! Nodes are appended in evaluation order, so the node index is already a topological
//! order and the reverse sweep simply walks the vector backwards.

use super::tensor::{matmul_a_bt, matmul_at_b, matmul_raw};
use super::{ParamSet, Tensor};
use crate::{Error, Result};

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Constant,
    Param(usize),
    MatMul(Var, Var),
    /// Elementwise add; the right operand may be a single row broadcast over rows.
    Add(Var, Var),
    Tanh(Var),
    Relu(Var),
    /// Mean softmax cross-entropy over rows; caches the softmax probabilities.
    SoftmaxCrossEntropy {
        logits: Var,
        labels: Vec<usize>,
        probs: Vec<f64>,
    },
    /// Mean over rows of `0.5 * ||pred_row - target_row||^2`.
    SquaredError { pred: Var, target: Tensor },
    Mean(Var),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    param_shapes: Vec<Option<Vec<usize>>>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, var: Var) -> &Tensor {
        &self.nodes[var.0].value
    }

    /// Registers parameter tensor number `index`; its gradient is reported at that slot.
    pub fn param(&mut self, index: usize, value: Tensor) -> Var {
        if self.param_shapes.len() <= index {
            self.param_shapes.resize(index + 1, None);
        }
        self.param_shapes[index] = Some(value.shape().to_vec());
        self.push(value, Op::Param(index))
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Constant)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.value(a).as_matrix_dims()?;
        let (k2, n) = self.value(b).as_matrix_dims()?;
        if k != k2 {
            return Err(Error::Shape(format!(
                "matmul of {m}x{k} by {k2}x{n}"
            )));
        }
        let out = matmul_raw(self.value(a).data(), self.value(b).data(), m, k, n);
        let value = Tensor::matrix(m, n, out)?;
        Ok(self.push(value, Op::MatMul(a, b)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let av = self.value(a);
        let bv = self.value(b);
        let data = if av.len() == bv.len() {
            av.data().iter().zip(bv.data()).map(|(x, y)| x + y).collect()
        } else {
            let (rows, cols) = av.as_matrix_dims()?;
            if bv.len() != cols {
                return Err(Error::Shape(format!(
                    "cannot broadcast {:?} onto {:?}",
                    bv.shape(),
                    av.shape()
                )));
            }
            let mut data = av.data().to_vec();
            for r in 0..rows {
                for (o, &bias) in data[r * cols..(r + 1) * cols].iter_mut().zip(bv.data()) {
                    *o += bias;
                }
            }
            data
        };
        let value = Tensor::with_shape_of(av, data);
        Ok(self.push(value, Op::Add(a, b)))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let value = self.value(a).map(f64::tanh);
        self.push(value, Op::Tanh(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let value = self.value(a).map(|v| v.max(0.0));
        self.push(value, Op::Relu(a))
    }

    pub fn softmax_cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var> {
        let (rows, cols) = self.value(logits).as_matrix_dims()?;
        if rows != labels.len() {
            return Err(Error::Shape(format!(
                "{rows} logit rows but {} labels",
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= cols) {
            return Err(Error::Shape(format!(
                "label {bad} out of range for {cols} outputs"
            )));
        }
        let z = self.value(logits).data();
        let mut probs = vec![0.0; rows * cols];
        let mut total = 0.0;
        for r in 0..rows {
            let row = &z[r * cols..(r + 1) * cols];
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let sum: f64 = row.iter().map(|v| (v - max).exp()).sum();
            let log_sum = sum.ln() + max;
            for c in 0..cols {
                probs[r * cols + c] = (row[c] - log_sum).exp();
            }
            total += log_sum - row[labels[r]];
        }
        let value = Tensor::scalar(total / rows as f64);
        Ok(self.push(
            value,
            Op::SoftmaxCrossEntropy {
                logits,
                labels: labels.to_vec(),
                probs,
            },
        ))
    }

    pub fn squared_error(&mut self, pred: Var, target: Tensor) -> Result<Var> {
        let pv = self.value(pred);
        if pv.len() != target.len() {
            return Err(Error::Shape(format!(
                "prediction {:?} vs target {:?}",
                pv.shape(),
                target.shape()
            )));
        }
        let (rows, _) = pv.as_matrix_dims()?;
        let sum: f64 = pv
            .data()
            .iter()
            .zip(target.data())
            .map(|(p, t)| (p - t) * (p - t))
            .sum();
        let value = Tensor::scalar(0.5 * sum / rows as f64);
        Ok(self.push(value, Op::SquaredError { pred, target }))
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let av = self.value(a);
        let value = Tensor::scalar(av.data().iter().sum::<f64>() / av.len() as f64);
        self.push(value, Op::Mean(a))
    }

    /// Closes the forward pass; `loss` must be a scalar node and every value finite.
    pub fn finish(self, loss: Var) -> Result<ComputationRecord> {
        if self.value(loss).len() != 1 {
            return Err(Error::Shape(format!(
                "loss must be scalar, got shape {:?}",
                self.value(loss).shape()
            )));
        }
        if let Some(pos) = self.nodes.iter().position(|n| !n.value.is_finite()) {
            return Err(Error::Numeric(format!(
                "forward pass produced a non-finite value at node {pos}"
            )));
        }
        let param_shapes = self
            .param_shapes
            .into_iter()
            .enumerate()
            .map(|(i, s)| s.ok_or_else(|| Error::Config(format!("parameter slot {i} never registered"))))
            .collect::<Result<Vec<_>>>()?;
        Ok(ComputationRecord {
            nodes: self.nodes,
            param_shapes,
            loss,
            consumed: false,
        })
    }
}

/// A completed forward pass, ready for exactly one reverse sweep.
#[derive(Debug)]
pub struct ComputationRecord {
    nodes: Vec<Node>,
    param_shapes: Vec<Vec<usize>>,
    loss: Var,
    consumed: bool,
}

impl ComputationRecord {
    pub fn loss(&self) -> f64 {
        self.nodes[self.loss.0].value.data()[0]
    }

    pub fn is_consumed(&self) -> bool {
        self.consumed
    }

    /// Reverse sweep. Releases the cached forward values; a second call is an error.
    pub fn backward(&mut self) -> Result<ParamSet> {
        if self.consumed {
            return Err(Error::RecordConsumed);
        }
        self.consumed = true;
        let nodes = std::mem::take(&mut self.nodes);

        let mut adjoints: Vec<Option<Vec<f64>>> = vec![None; nodes.len()];
        adjoints[self.loss.0] = Some(vec![1.0]);
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.param_shapes.len()];

        for idx in (0..=self.loss.0).rev() {
            let Some(upstream) = adjoints[idx].take() else {
                continue;
            };
            let node = &nodes[idx];
            match &node.op {
                Op::Constant => {}
                Op::Param(slot) => accumulate(&mut grads[*slot], upstream),
                Op::MatMul(a, b) => {
                    let av = &nodes[a.0].value;
                    let bv = &nodes[b.0].value;
                    let (m, k) = av.as_matrix_dims()?;
                    let (_, n) = bv.as_matrix_dims()?;
                    let da = matmul_a_bt(&upstream, bv.data(), m, n, k);
                    let db = matmul_at_b(av.data(), &upstream, m, k, n);
                    accumulate(&mut adjoints[a.0], da);
                    accumulate(&mut adjoints[b.0], db);
                }
                Op::Add(a, b) => {
                    let blen = nodes[b.0].value.len();
                    let db = if blen == upstream.len() {
                        upstream.clone()
                    } else {
                        let mut col_sums = vec![0.0; blen];
                        for row in upstream.chunks(blen) {
                            for (s, v) in col_sums.iter_mut().zip(row) {
                                *s += v;
                            }
                        }
                        col_sums
                    };
                    accumulate(&mut adjoints[a.0], upstream);
                    accumulate(&mut adjoints[b.0], db);
                }
                Op::Tanh(a) => {
                    let da = upstream
                        .iter()
                        .zip(node.value.data())
                        .map(|(u, y)| u * (1.0 - y * y))
                        .collect();
                    accumulate(&mut adjoints[a.0], da);
                }
                Op::Relu(a) => {
                    let da = upstream
                        .iter()
                        .zip(nodes[a.0].value.data())
                        .map(|(u, x)| if *x > 0.0 { *u } else { 0.0 })
                        .collect();
                    accumulate(&mut adjoints[a.0], da);
                }
                Op::SoftmaxCrossEntropy {
                    logits,
                    labels,
                    probs,
                } => {
                    let rows = labels.len();
                    let cols = probs.len() / rows;
                    let scale = upstream[0] / rows as f64;
                    let mut dz: Vec<f64> = probs.iter().map(|p| p * scale).collect();
                    for (r, &y) in labels.iter().enumerate() {
                        dz[r * cols + y] -= scale;
                    }
                    accumulate(&mut adjoints[logits.0], dz);
                }
                Op::SquaredError { pred, target } => {
                    let pv = &nodes[pred.0].value;
                    let (rows, _) = pv.as_matrix_dims()?;
                    let scale = upstream[0] / rows as f64;
                    let dp = pv
                        .data()
                        .iter()
                        .zip(target.data())
                        .map(|(p, t)| (p - t) * scale)
                        .collect();
                    accumulate(&mut adjoints[pred.0], dp);
                }
                Op::Mean(a) => {
                    let n = nodes[a.0].value.len();
                    accumulate(&mut adjoints[a.0], vec![upstream[0] / n as f64; n]);
                }
            }
        }

        let tensors = self
            .param_shapes
            .iter()
            .zip(grads)
            .map(|(shape, g)| match g {
                Some(data) => Tensor::new(shape.clone(), data),
                None => Ok(Tensor::zeros(shape.clone())),
            })
            .collect::<Result<Vec<_>>>()?;
        let grad = ParamSet::new(tensors);
        if !grad.is_finite() {
            return Err(Error::Numeric("backward pass produced a non-finite gradient".into()));
        }
        Ok(grad)
    }
}

fn accumulate(slot: &mut Option<Vec<f64>>, contribution: Vec<f64>) {
    match slot {
        Some(existing) => {
            for (e, c) in existing.iter_mut().zip(contribution) {
                *e += c;
            }
        }
        None => *slot = Some(contribution),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_squared_norm_gradient_is_identity() {
        let mut tape = Tape::new();
        let w = tape.param(0, Tensor::vector(vec![3.0, 4.0]));
        let loss = tape.squared_error(w, Tensor::vector(vec![0.0, 0.0])).unwrap();
        let mut rec = tape.finish(loss).unwrap();
        assert_eq!(rec.loss(), 12.5);
        assert_eq!(rec.backward().unwrap().flatten(), vec![3.0, 4.0]);
    }

    #[test]
    fn one_parameter_linear_model() {
        // f(x) = w x with w = 2, x = 1, y = 0: loss 0.5 * 4 = 2, gradient 2.
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::matrix(1, 1, vec![1.0]).unwrap());
        let w = tape.param(0, Tensor::matrix(1, 1, vec![2.0]).unwrap());
        let f = tape.matmul(x, w).unwrap();
        let loss = tape
            .squared_error(f, Tensor::matrix(1, 1, vec![0.0]).unwrap())
            .unwrap();
        let mut rec = tape.finish(loss).unwrap();
        assert_eq!(rec.loss(), 2.0);
        assert_eq!(rec.backward().unwrap().flatten(), vec![2.0]);
    }

    #[test]
    fn zero_weights_zero_targets_give_zero_loss() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::matrix(3, 2, vec![1.0, -2.0, 0.5, 4.0, 3.0, 1.0]).unwrap());
        let w = tape.param(0, Tensor::zeros(vec![2, 1]));
        let f = tape.matmul(x, w).unwrap();
        let loss = tape.squared_error(f, Tensor::zeros(vec![3, 1])).unwrap();
        assert_eq!(tape.finish(loss).unwrap().loss(), 0.0);
    }

    #[test]
    fn second_backward_is_rejected() {
        let mut tape = Tape::new();
        let w = tape.param(0, Tensor::vector(vec![1.0]));
        let loss = tape.mean(w);
        let mut rec = tape.finish(loss).unwrap();
        rec.backward().unwrap();
        assert!(rec.is_consumed());
        assert!(matches!(rec.backward(), Err(Error::RecordConsumed)));
    }

    #[test]
    fn non_finite_forward_is_detected() {
        let mut tape = Tape::new();
        let w = tape.param(0, Tensor::vector(vec![f64::INFINITY]));
        let loss = tape.mean(w);
        assert!(matches!(tape.finish(loss), Err(Error::Numeric(_))));
    }

    #[test]
    fn shape_mismatch_is_a_shape_error() {
        let mut tape = Tape::new();
        let a = tape.constant(Tensor::zeros(vec![2, 3]));
        let b = tape.param(0, Tensor::zeros(vec![2, 3]));
        assert!(matches!(tape.matmul(a, b), Err(Error::Shape(_))));
        let bias = tape.constant(Tensor::zeros(vec![4]));
        assert!(matches!(tape.add(a, bias), Err(Error::Shape(_))));
        let logits = tape.constant(Tensor::zeros(vec![2, 3]));
        assert!(tape.softmax_cross_entropy(logits, &[0, 3]).is_err());
        assert!(tape.softmax_cross_entropy(logits, &[0]).is_err());
    }

    #[test]
    fn softmax_cross_entropy_uniform_logits() {
        let mut tape = Tape::new();
        let z = tape.param(0, Tensor::zeros(vec![2, 4]));
        let loss = tape.softmax_cross_entropy(z, &[1, 3]).unwrap();
        let mut rec = tape.finish(loss).unwrap();
        assert!((rec.loss() - 4f64.ln()).abs() < 1e-15);
        let g = rec.backward().unwrap().flatten();
        // (p - onehot) / rows with p = 1/4
        assert_eq!(g[1], (0.25 - 1.0) / 2.0);
        assert_eq!(g[0], 0.25 / 2.0);
    }

    #[test]
    fn unused_parameter_gets_zero_gradient() {
        let mut tape = Tape::new();
        let a = tape.param(0, Tensor::vector(vec![1.0, 2.0]));
        let _b = tape.param(1, Tensor::vector(vec![5.0]));
        let loss = tape.mean(a);
        let g = tape.finish(loss).unwrap().backward().unwrap();
        assert_eq!(g.tensors()[1].data(), &[0.0]);
        assert_eq!(g.tensors()[0].data(), &[0.5, 0.5]);
    }
}
