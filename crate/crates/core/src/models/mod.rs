//! Differentiable models, analytic landscapes and datasets.

mod data;
mod landscape;
mod mlp;

pub use data::{
    inject_label_noise, make_dataset, minibatch_iter, split, Batch, DatasetKind, LabeledDataset,
    NoiseSpec, Provenance, Splits,
};
pub use landscape::AnalyticLandscape;
pub use mlp::{Activation, LossKind, Mlp, MlpSpec};
