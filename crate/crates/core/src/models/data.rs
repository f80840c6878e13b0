use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::adcore::Tensor;
use crate::{rng, Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    SyntheticBlobs,
    TwoMoons,
    File(PathBuf),
}

/// Generator for the synthetic datasets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DatasetKind {
    /// Isotropic Gaussian clusters; centres uniform in `[-center_box, center_box]^features`.
    Blobs {
        classes: usize,
        features: usize,
        std: f64,
        center_box: f64,
    },
    /// Two interleaved half circles in 2-D with Gaussian jitter.
    TwoMoons { noise: f64 },
}

/// Labelled examples stored row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    features: Vec<f64>,
    labels: Vec<usize>,
    dim: usize,
    classes: usize,
    provenance: Provenance,
}

impl LabeledDataset {
    pub fn new(
        features: Vec<f64>,
        labels: Vec<usize>,
        dim: usize,
        classes: usize,
        provenance: Provenance,
    ) -> Result<Self> {
        if dim == 0 || features.len() != labels.len() * dim {
            return Err(Error::Shape(format!(
                "{} feature values for {} examples of width {dim}",
                features.len(),
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= classes) {
            return Err(Error::Config(format!(
                "label {bad} outside [0, {classes})"
            )));
        }
        Ok(Self {
            features,
            labels,
            dim,
            classes,
            provenance,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn example(&self, i: usize) -> (&[f64], usize) {
        (&self.features[i * self.dim..(i + 1) * self.dim], self.labels[i])
    }

    pub fn subset(&self, indices: &[usize]) -> LabeledDataset {
        let mut features = Vec::with_capacity(indices.len() * self.dim);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            let (x, y) = self.example(i);
            features.extend_from_slice(x);
            labels.push(y);
        }
        LabeledDataset {
            features,
            labels,
            dim: self.dim,
            classes: self.classes,
            provenance: self.provenance.clone(),
        }
    }

    pub fn batch(&self, indices: &[usize]) -> Batch {
        let sub = self.subset(indices);
        Batch {
            features: Tensor::matrix(indices.len(), self.dim, sub.features)
                .expect("subset keeps row width"),
            labels: sub.labels,
        }
    }

    pub fn full_batch(&self) -> Batch {
        Batch {
            features: Tensor::matrix(self.len(), self.dim, self.features.clone())
                .expect("dataset keeps row width"),
            labels: self.labels.clone(),
        }
    }

    /// Order-sensitive FNV-1a digest of the labels, used to prove a split stayed clean.
    pub fn label_checksum(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for &y in &self.labels {
            for byte in (y as u64).to_le_bytes() {
                h ^= byte as u64;
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        }
        h
    }

    /// Writes the `# features=<d> classes=<k>` CSV format.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut file = File::create(path).map_err(|e| Error::io(path, e))?;
        writeln!(file, "# features={} classes={}", self.dim, self.classes)
            .map_err(|e| Error::io(path, e))?;
        let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(file);
        for i in 0..self.len() {
            let (x, y) = self.example(i);
            let mut row: Vec<String> = x.iter().map(|v| format!("{v:?}")).collect();
            row.push(y.to_string());
            writer.write_record(&row)?;
        }
        writer.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut reader = BufReader::new(file);
        let mut header = String::new();
        reader.read_line(&mut header).map_err(|e| Error::io(path, e))?;
        let (dim, classes) = parse_header(header.trim())?;

        let mut rows = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for (line, record) in rows.records().enumerate() {
            let record = record?;
            if record.len() != dim + 1 {
                return Err(Error::Shape(format!(
                    "row {} has {} fields, expected {}",
                    line + 2,
                    record.len(),
                    dim + 1
                )));
            }
            for field in record.iter().take(dim) {
                features.push(field.parse::<f64>().map_err(|e| {
                    Error::Config(format!("row {}: bad feature {field:?}: {e}", line + 2))
                })?);
            }
            let label = &record[dim];
            labels.push(label.parse::<usize>().map_err(|e| {
                Error::Config(format!("row {}: bad label {label:?}: {e}", line + 2))
            })?);
        }
        LabeledDataset::new(features, labels, dim, classes, Provenance::File(path.to_path_buf()))
    }
}

fn parse_header(header: &str) -> Result<(usize, usize)> {
    let bad = || Error::Config(format!("expected `# features=<d> classes=<k>`, got {header:?}"));
    let body = header.strip_prefix('#').ok_or_else(bad)?;
    let mut dim = None;
    let mut classes = None;
    for token in body.split_whitespace() {
        match token.split_once('=') {
            Some(("features", v)) => dim = v.parse().ok(),
            Some(("classes", v)) => classes = v.parse().ok(),
            _ => return Err(bad()),
        }
    }
    match (dim, classes) {
        (Some(d), Some(k)) if d > 0 && k > 0 => Ok((d, k)),
        _ => Err(bad()),
    }
}

/// A materialised mini-batch ready for a forward pass.
#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    features: Tensor,
    labels: Vec<usize>,
}

impl Batch {
    pub fn new(features: Tensor, labels: Vec<usize>) -> Result<Self> {
        let (rows, _) = features.as_matrix_dims()?;
        if features.shape().len() != 2 || rows != labels.len() {
            return Err(Error::Shape(format!(
                "features {:?} vs {} labels",
                features.shape(),
                labels.len()
            )));
        }
        Ok(Self { features, labels })
    }

    pub fn features(&self) -> &Tensor {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Deterministic synthetic dataset with classes balanced to within one example.
pub fn make_dataset(kind: &DatasetKind, n: usize, seed: u64) -> Result<LabeledDataset> {
    let mut rng = rng::stream(seed, rng::STREAM_DATA);
    match kind {
        DatasetKind::Blobs {
            classes,
            features,
            std,
            center_box,
        } => {
            if *classes < 2 || *features == 0 {
                return Err(Error::Config("blobs need >= 2 classes and >= 1 feature".into()));
            }
            if n < 2 * classes {
                return Err(Error::Config(format!(
                    "{n} examples cannot give 2 per class for {classes} classes"
                )));
            }
            let centers: Vec<f64> = (0..classes * features)
                .map(|_| rng.random_range(-center_box..=*center_box))
                .collect();
            let mut labels: Vec<usize> = (0..n).map(|i| i % classes).collect();
            labels.shuffle(&mut rng);
            let mut data = Vec::with_capacity(n * features);
            for &y in &labels {
                for j in 0..*features {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    data.push(centers[y * features + j] + std * z);
                }
            }
            LabeledDataset::new(data, labels, *features, *classes, Provenance::SyntheticBlobs)
        }
        DatasetKind::TwoMoons { noise } => {
            if n < 4 {
                return Err(Error::Config(format!("two-moons needs n >= 4, got {n}")));
            }
            let per_class = [n - n / 2, n / 2];
            let mut examples = Vec::with_capacity(n);
            for (class, &count) in per_class.iter().enumerate() {
                for i in 0..count {
                    let angle = std::f64::consts::PI * i as f64 / (count.max(2) - 1) as f64;
                    let (x, y) = if class == 0 {
                        (angle.cos(), angle.sin())
                    } else {
                        (1.0 - angle.cos(), 0.5 - angle.sin())
                    };
                    let jx: f64 = StandardNormal.sample(&mut rng);
                    let jy: f64 = StandardNormal.sample(&mut rng);
                    examples.push(([x + noise * jx, y + noise * jy], class));
                }
            }
            examples.shuffle(&mut rng);
            let labels = examples.iter().map(|e| e.1).collect();
            let data = examples.iter().flat_map(|e| e.0).collect();
            LabeledDataset::new(data, labels, 2, 2, Provenance::TwoMoons)
        }
    }
}

/// Symmetric label noise: each label is replaced with probability `flip_probability`
/// by a uniformly chosen different class.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub flip_probability: f64,
    pub seed: u64,
}

pub fn inject_label_noise(dataset: &LabeledDataset, spec: NoiseSpec) -> Result<LabeledDataset> {
    if !(0.0..=1.0).contains(&spec.flip_probability) {
        return Err(Error::Config(format!(
            "flip probability {} outside [0, 1]",
            spec.flip_probability
        )));
    }
    if dataset.classes < 2 {
        return Err(Error::Config("label noise needs at least 2 classes".into()));
    }
    let mut rng = rng::stream(spec.seed, rng::STREAM_NOISE);
    let mut out = dataset.clone();
    for y in out.labels.iter_mut() {
        if rng.random::<f64>() < spec.flip_probability {
            // Draw from the k-1 other classes.
            let other = rng.random_range(0..dataset.classes - 1);
            *y = if other >= *y { other + 1 } else { other };
        }
    }
    Ok(out)
}

/// Shuffle-and-partition indices of one epoch; the last batch may be short.
pub fn minibatch_iter(len: usize, batch_size: usize, seed: u64, epoch: u64) -> Result<Vec<Vec<usize>>> {
    if batch_size == 0 {
        return Err(Error::Config("batch size must be >= 1".into()));
    }
    if batch_size > len {
        return Err(Error::Config(format!(
            "batch size {batch_size} exceeds dataset size {len}"
        )));
    }
    let mut order: Vec<usize> = (0..len).collect();
    order.shuffle(&mut rng::stream(seed, rng::STREAM_EPOCH_BASE + epoch));
    Ok(order.chunks(batch_size).map(<[usize]>::to_vec).collect())
}

/// Train / validation / test partition of one dataset.
#[derive(Clone, Debug)]
pub struct Splits {
    pub train: LabeledDataset,
    pub validation: LabeledDataset,
    pub test: LabeledDataset,
}

/// Seeded split: `test_fraction` of all examples go to test, then `validation_fraction`
/// of the remainder to validation.
pub fn split(
    dataset: &LabeledDataset,
    test_fraction: f64,
    validation_fraction: f64,
    seed: u64,
) -> Result<Splits> {
    for f in [test_fraction, validation_fraction] {
        if !(0.0..1.0).contains(&f) {
            return Err(Error::Config(format!("split fraction {f} outside [0, 1)")));
        }
    }
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    order.shuffle(&mut rng::stream(seed, rng::STREAM_SPLIT));
    let n_test = (dataset.len() as f64 * test_fraction).round() as usize;
    let rest = dataset.len() - n_test;
    let n_val = (rest as f64 * validation_fraction).round() as usize;
    let (test_idx, rest_idx) = order.split_at(n_test);
    let (val_idx, train_idx) = rest_idx.split_at(n_val);
    if train_idx.is_empty() {
        return Err(Error::Config("split leaves no training examples".into()));
    }
    Ok(Splits {
        train: dataset.subset(train_idx),
        validation: dataset.subset(val_idx),
        test: dataset.subset(test_idx),
    })
}
