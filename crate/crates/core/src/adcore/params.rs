use serde::{Deserialize, Serialize};

use super::Tensor;
use crate::{Error, Result};

/// An ordered set of parameter tensors treated as one flat vector.
///
/// Model weights, gradients, SAM perturbations and the cached LookSAM direction all
/// live in this type; the vector-space helpers below never reorder entries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamSet(Vec<Tensor>);

impl ParamSet {
    pub fn new(tensors: Vec<Tensor>) -> Self {
        Self(tensors)
    }

    pub fn from_flat(values: Vec<f64>) -> Self {
        Self(vec![Tensor::vector(values)])
    }

    pub fn zeros_like(other: &ParamSet) -> Self {
        Self(
            other
                .0
                .iter()
                .map(|t| Tensor::zeros(t.shape().to_vec()))
                .collect(),
        )
    }

    /// Rebuilds a parameter set from `shapes` and a flat buffer (checkpoint loading).
    pub fn from_shapes(shapes: &[Vec<usize>], flat: &[f64]) -> Result<Self> {
        let total: usize = shapes.iter().map(|s| s.iter().product::<usize>()).sum();
        if total != flat.len() {
            return Err(Error::Shape(format!(
                "shapes describe {total} values, buffer has {}",
                flat.len()
            )));
        }
        let mut offset = 0;
        let mut tensors = Vec::with_capacity(shapes.len());
        for shape in shapes {
            let n: usize = shape.iter().product();
            tensors.push(Tensor::new(shape.clone(), flat[offset..offset + n].to_vec())?);
            offset += n;
        }
        Ok(Self(tensors))
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.0
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.0
    }

    pub fn shapes(&self) -> Vec<Vec<usize>> {
        self.0.iter().map(|t| t.shape().to_vec()).collect()
    }

    /// Total number of scalar entries.
    pub fn len(&self) -> usize {
        self.0.iter().map(Tensor::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.0.iter().flat_map(|t| t.data().iter().copied())
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> + '_ {
        self.0.iter_mut().flat_map(|t| t.data_mut().iter_mut())
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.values().collect()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(Tensor::is_finite)
    }

    fn check_layout(&self, other: &ParamSet) {
        debug_assert_eq!(self.shapes(), other.shapes(), "parameter layouts differ");
    }

    pub fn dot(&self, other: &ParamSet) -> f64 {
        self.check_layout(other);
        self.values().zip(other.values()).map(|(a, b)| a * b).sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.values().map(|v| v * v).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// `self += scale * other`
    pub fn axpy(&mut self, scale: f64, other: &ParamSet) {
        self.check_layout(other);
        for (a, b) in self.values_mut().zip(other.values()) {
            *a += scale * b;
        }
    }

    pub fn scaled(&self, scale: f64) -> ParamSet {
        let mut out = self.clone();
        out.values_mut().for_each(|v| *v *= scale);
        out
    }

    /// `self + scale * other` as a new set.
    pub fn plus_scaled(&self, scale: f64, other: &ParamSet) -> ParamSet {
        let mut out = self.clone();
        out.axpy(scale, other);
        out
    }

    pub fn sub(&self, other: &ParamSet) -> ParamSet {
        self.plus_scaled(-1.0, other)
    }
}

impl From<Vec<f64>> for ParamSet {
    fn from(values: Vec<f64>) -> Self {
        Self::from_flat(values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vector_space_helpers() {
        let a = ParamSet::from(vec![3.0, 4.0]);
        let b = ParamSet::from(vec![1.0, -1.0]);
        assert_eq!(a.norm(), 5.0);
        assert_eq!(a.dot(&b), -1.0);
        assert_eq!(a.plus_scaled(2.0, &b).flatten(), vec![5.0, 2.0]);
        assert_eq!(a.sub(&b).flatten(), vec![2.0, 5.0]);
    }

    #[test]
    fn from_shapes_round_trip() {
        let p = ParamSet::new(vec![
            Tensor::matrix(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap(),
            Tensor::vector(vec![5.0]),
        ]);
        let back = ParamSet::from_shapes(&p.shapes(), &p.flatten()).unwrap();
        assert_eq!(p, back);
        assert!(ParamSet::from_shapes(&p.shapes(), &[0.0; 4]).is_err());
    }
}
