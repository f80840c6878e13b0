use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::models::{
    make_dataset, Activation, DatasetKind, LabeledDataset, LossKind, MlpSpec,
};
use crate::optim::{Algorithm, LrSchedule, OptimizerConfig, PerturbationMode, DEFAULT_DELTA};
use crate::{Error, Result};

/// Where the examples come from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetSource {
    Blobs,
    TwoMoons,
    File,
}

/// Everything needed to reproduce one experiment, minus the run seed.
///
/// The file format is flat `key = value` text; blank lines and `#` comments are ignored.
/// [`ExperimentConfig::KEYS`] lists every accepted key.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub algorithm: Algorithm,

    pub dataset: DatasetSource,
    pub dataset_path: Option<PathBuf>,
    pub n_examples: usize,
    pub classes: usize,
    pub features: usize,
    pub blob_std: f64,
    pub center_box: f64,
    pub moon_noise: f64,
    /// Fixes the generated dataset and its split; independent of the run seeds.
    pub dataset_seed: u64,
    pub test_fraction: f64,
    pub validation_fraction: f64,

    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub loss: LossKind,

    pub eta: f64,
    pub rho: f64,
    pub alpha: f64,
    pub k: u64,
    pub p: f64,
    pub delta: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub perturbation: PerturbationMode,
    pub lr_schedule: LrSchedule,

    pub batch_size: usize,
    pub epochs: usize,
    /// Probability of flipping each training label.
    pub label_noise: f64,
    pub seeds: Vec<u64>,
    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::AeSam,
            dataset: DatasetSource::Blobs,
            dataset_path: None,
            n_examples: 2000,
            classes: 4,
            features: 8,
            blob_std: 1.5,
            center_box: 1.5,
            moon_noise: 0.2,
            dataset_seed: 0,
            test_fraction: 0.2,
            validation_fraction: 0.1,
            hidden: vec![64, 64],
            activation: Activation::Tanh,
            loss: LossKind::CrossEntropy,
            eta: 0.1,
            rho: 0.05,
            alpha: 0.7,
            k: 5,
            p: 0.5,
            delta: DEFAULT_DELTA,
            lambda1: -1.0,
            lambda2: 1.0,
            perturbation: PerturbationMode::Normalized,
            lr_schedule: LrSchedule::Constant,
            batch_size: 128,
            epochs: 50,
            label_noise: 0.0,
            seeds: vec![0, 1, 2, 3, 4],
            out_dir: PathBuf::from("out"),
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value {value:?} for {key}")))
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    if value.trim().is_empty() {
        return Ok(Vec::new());
    }
    value.split(',').map(|v| parse(key, v.trim())).collect()
}

fn parse_enum<T: DeserializeOwned>(key: &str, value: &str) -> Result<T> {
    serde_json::from_value(serde_json::Value::String(value.to_string()))
        .map_err(|_| Error::Config(format!("invalid value {value:?} for {key}")))
}

fn enum_name<T: Serialize>(v: &T) -> String {
    match serde_json::to_value(v) {
        Ok(serde_json::Value::String(s)) => s,
        _ => unreachable!("unit enum variants serialize to strings"),
    }
}

fn join<T: ToString>(items: &[T]) -> String {
    items.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

impl ExperimentConfig {
    pub const KEYS: [&'static str; 31] = [
        "algorithm",
        "dataset",
        "dataset_path",
        "n_examples",
        "classes",
        "features",
        "blob_std",
        "center_box",
        "moon_noise",
        "dataset_seed",
        "test_fraction",
        "validation_fraction",
        "hidden",
        "activation",
        "loss",
        "eta",
        "rho",
        "alpha",
        "k",
        "p",
        "delta",
        "lambda1",
        "lambda2",
        "perturbation",
        "lr_schedule",
        "batch_size",
        "epochs",
        "label_noise",
        "seeds",
        "out_dir",
        "seed",
    ];

    /// Sets one key from its textual value. `seed` is shorthand for a single-element `seeds`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key {
            "algorithm" => self.algorithm = value.parse()?,
            "dataset" => self.dataset = parse_enum(key, value)?,
            "dataset_path" => {
                self.dataset_path = (!value.is_empty()).then(|| PathBuf::from(value));
            }
            "n_examples" => self.n_examples = parse(key, value)?,
            "classes" => self.classes = parse(key, value)?,
            "features" => self.features = parse(key, value)?,
            "blob_std" => self.blob_std = parse(key, value)?,
            "center_box" => self.center_box = parse(key, value)?,
            "moon_noise" => self.moon_noise = parse(key, value)?,
            "dataset_seed" => self.dataset_seed = parse(key, value)?,
            "test_fraction" => self.test_fraction = parse(key, value)?,
            "validation_fraction" => self.validation_fraction = parse(key, value)?,
            "hidden" => self.hidden = parse_list(key, value)?,
            "activation" => self.activation = parse_enum(key, value)?,
            "loss" => self.loss = parse_enum(key, value)?,
            "eta" => self.eta = parse(key, value)?,
            "rho" => self.rho = parse(key, value)?,
            "alpha" => self.alpha = parse(key, value)?,
            "k" => self.k = parse(key, value)?,
            "p" => self.p = parse(key, value)?,
            "delta" => self.delta = parse(key, value)?,
            "lambda1" => self.lambda1 = parse(key, value)?,
            "lambda2" => self.lambda2 = parse(key, value)?,
            "perturbation" => self.perturbation = parse_enum(key, value)?,
            "lr_schedule" => self.lr_schedule = parse_enum(key, value)?,
            "batch_size" => self.batch_size = parse(key, value)?,
            "epochs" => self.epochs = parse(key, value)?,
            "label_noise" => self.label_noise = parse(key, value)?,
            "seeds" => self.seeds = parse_list(key, value)?,
            "seed" => self.seeds = vec![parse(key, value)?],
            "out_dir" => self.out_dir = PathBuf::from(value),
            _ => return Err(Error::Config(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    /// Applies a `key=value` override.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("expected key=value, got {assignment:?}")))?;
        self.set(key.trim(), value)
    }

    /// Parses the key-value format on top of the defaults.
    pub fn parse_str(text: &str) -> Result<Self> {
        let mut config = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected key = value", lineno + 1))
            })?;
            config
                .set(key.trim(), value)
                .map_err(|e| Error::Config(format!("line {}: {e}", lineno + 1)))?;
        }
        Ok(config)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_str(&text)
    }

    /// Serializes every key; `parse_str(to_kv_string())` reproduces `self` exactly.
    pub fn to_kv_string(&self) -> String {
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        put("algorithm", self.algorithm.to_string());
        put("dataset", enum_name(&self.dataset));
        put(
            "dataset_path",
            self.dataset_path
                .as_ref()
                .map(|p| p.display().to_string())
                .unwrap_or_default(),
        );
        put("n_examples", self.n_examples.to_string());
        put("classes", self.classes.to_string());
        put("features", self.features.to_string());
        put("blob_std", self.blob_std.to_string());
        put("center_box", self.center_box.to_string());
        put("moon_noise", self.moon_noise.to_string());
        put("dataset_seed", self.dataset_seed.to_string());
        put("test_fraction", self.test_fraction.to_string());
        put("validation_fraction", self.validation_fraction.to_string());
        put("hidden", join(&self.hidden));
        put("activation", enum_name(&self.activation));
        put("loss", enum_name(&self.loss));
        put("eta", self.eta.to_string());
        put("rho", self.rho.to_string());
        put("alpha", self.alpha.to_string());
        put("k", self.k.to_string());
        put("p", self.p.to_string());
        put("delta", self.delta.to_string());
        put("lambda1", self.lambda1.to_string());
        put("lambda2", self.lambda2.to_string());
        put("perturbation", enum_name(&self.perturbation));
        put("lr_schedule", enum_name(&self.lr_schedule));
        put("batch_size", self.batch_size.to_string());
        put("epochs", self.epochs.to_string());
        put("label_noise", self.label_noise.to_string());
        put("seeds", join(&self.seeds));
        put("out_dir", self.out_dir.display().to_string());
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.dataset == DatasetSource::File && self.dataset_path.is_none() {
            return bad("dataset = file needs dataset_path".into());
        }
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1".into());
        }
        if self.epochs == 0 {
            return bad("epochs must be >= 1".into());
        }
        if self.seeds.is_empty() {
            return bad("at least one seed is required".into());
        }
        if !(0.0..=1.0).contains(&self.label_noise) {
            return bad(format!("label_noise {} outside [0, 1]", self.label_noise));
        }
        if self.hidden.contains(&0) {
            return bad("hidden layers must have positive width".into());
        }
        self.optimizer_config(1).validate()
    }

    pub fn dataset_kind(&self) -> Option<DatasetKind> {
        match self.dataset {
            DatasetSource::Blobs => Some(DatasetKind::Blobs {
                classes: self.classes,
                features: self.features,
                std: self.blob_std,
                center_box: self.center_box,
            }),
            DatasetSource::TwoMoons => Some(DatasetKind::TwoMoons {
                noise: self.moon_noise,
            }),
            DatasetSource::File => None,
        }
    }

    /// The full (unsplit) dataset.
    pub fn load_dataset(&self) -> Result<LabeledDataset> {
        match (self.dataset_kind(), &self.dataset_path) {
            (Some(kind), _) => make_dataset(&kind, self.n_examples, self.dataset_seed),
            (None, Some(path)) => LabeledDataset::read_csv(path),
            (None, None) => Err(Error::Config("dataset = file needs dataset_path".into())),
        }
    }

    /// `[d, hidden..., k]` for a dataset with `d` features and `k` classes.
    pub fn mlp_spec(&self, features: usize, classes: usize) -> MlpSpec {
        let mut widths = vec![features];
        widths.extend(&self.hidden);
        widths.push(classes);
        MlpSpec {
            widths,
            activation: self.activation,
            loss: self.loss,
        }
    }

    pub fn optimizer_config(&self, total_steps: u64) -> OptimizerConfig {
        OptimizerConfig {
            algorithm: self.algorithm,
            eta: self.eta,
            rho: self.rho,
            alpha: self.alpha,
            k: self.k,
            p: self.p,
            delta: self.delta,
            lambda1: self.lambda1,
            lambda2: self.lambda2,
            total_steps,
            perturbation: self.perturbation,
            lr_schedule: self.lr_schedule,
            seed: 0,
        }
    }

    /// `ceil(train_len / batch_size)`.
    pub fn batches_per_epoch(&self, train_len: usize) -> usize {
        train_len.div_ceil(self.batch_size)
    }

    /// `T = epochs * batches_per_epoch`.
    pub fn total_steps(&self, train_len: usize) -> u64 {
        (self.epochs * self.batches_per_epoch(train_len)) as u64
    }
}
