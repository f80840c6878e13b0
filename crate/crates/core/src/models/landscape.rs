use serde::{Deserialize, Serialize};

use crate::adcore::{Objective, ParamSet, Tensor};
use crate::{Error, Result};

/// Closed-form test functions whose gradient Lipschitz constant is known exactly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum AnalyticLandscape {
    /// `0.5 * ||w||^2`
    Quadratic { dim: usize },
    /// `0.5 * sum_i a_i w_i^2` with `a_i >= 0`.
    ScaledQuadratic { diag: Vec<f64> },
    /// `sum_i [0.5 * curvature * w_i^2 + amplitude * (1 - cos(frequency * w_i))]`.
    ///
    /// The Hessian is diagonal with entries in
    /// `[curvature - amplitude * frequency^2, curvature + amplitude * frequency^2]`,
    /// and `w = 0` is a stationary point.
    NonconvexWells {
        dim: usize,
        curvature: f64,
        amplitude: f64,
        frequency: f64,
    },
}

impl AnalyticLandscape {
    pub fn quadratic(dim: usize) -> Self {
        Self::Quadratic { dim }
    }

    pub fn scaled_quadratic(diag: Vec<f64>) -> Result<Self> {
        if diag.is_empty() || diag.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
            return Err(Error::Config(format!(
                "scaled quadratic needs non-negative finite curvatures, got {diag:?}"
            )));
        }
        Ok(Self::ScaledQuadratic { diag })
    }

    pub fn nonconvex_wells(dim: usize, curvature: f64, amplitude: f64, frequency: f64) -> Result<Self> {
        if dim == 0 || curvature < 0.0 || amplitude < 0.0 || !frequency.is_finite() {
            return Err(Error::Config(
                "nonconvex wells need dim > 0 and non-negative curvature/amplitude".into(),
            ));
        }
        Ok(Self::NonconvexWells {
            dim,
            curvature,
            amplitude,
            frequency,
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Quadratic { .. } => "quadratic",
            Self::ScaledQuadratic { .. } => "scaled-quadratic",
            Self::NonconvexWells { .. } => "nonconvex-wells",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Quadratic { dim } | Self::NonconvexWells { dim, .. } => *dim,
            Self::ScaledQuadratic { diag } => diag.len(),
        }
    }

    /// Smoothness constant: the largest absolute Hessian eigenvalue bound.
    pub fn beta(&self) -> f64 {
        match self {
            Self::Quadratic { .. } => 1.0,
            Self::ScaledQuadratic { diag } => diag.iter().copied().fold(0.0, f64::max),
            Self::NonconvexWells {
                curvature,
                amplitude,
                frequency,
                ..
            } => {
                let swing = amplitude * frequency * frequency;
                (curvature + swing).max((curvature - swing).abs())
            }
        }
    }

    pub fn value_and_grad(&self, w: &[f64]) -> Result<(f64, Vec<f64>)> {
        if w.len() != self.dim() {
            return Err(Error::Shape(format!(
                "landscape has dimension {}, point has {}",
                self.dim(),
                w.len()
            )));
        }
        Ok(match self {
            Self::Quadratic { .. } => (0.5 * w.iter().map(|v| v * v).sum::<f64>(), w.to_vec()),
            Self::ScaledQuadratic { diag } => (
                0.5 * w.iter().zip(diag).map(|(v, a)| a * v * v).sum::<f64>(),
                w.iter().zip(diag).map(|(v, a)| a * v).collect(),
            ),
            Self::NonconvexWells {
                curvature,
                amplitude,
                frequency,
                ..
            } => {
                let value = w
                    .iter()
                    .map(|v| 0.5 * curvature * v * v + amplitude * (1.0 - (frequency * v).cos()))
                    .sum();
                let grad = w
                    .iter()
                    .map(|v| curvature * v + amplitude * frequency * (frequency * v).sin())
                    .collect();
                (value, grad)
            }
        })
    }

    /// Value and gradient at a tensor point.
    pub fn eval(&self, w: &Tensor) -> Result<(f64, Tensor)> {
        let (v, g) = self.value_and_grad(w.data())?;
        Ok((v, Tensor::vector(g)))
    }

    pub fn value(&self, w: &[f64]) -> Result<f64> {
        Ok(self.value_and_grad(w)?.0)
    }
}

impl Objective for AnalyticLandscape {
    type Batch = ();

    fn loss(&self, params: &ParamSet, _: &()) -> Result<f64> {
        self.value(&params.flatten())
    }

    fn loss_and_grad(&self, params: &ParamSet, _: &()) -> Result<(f64, ParamSet)> {
        let (v, g) = self.value_and_grad(&params.flatten())?;
        Ok((v, ParamSet::from_flat(g)))
    }
}
