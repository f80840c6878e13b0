use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::run::RunRecord;
use crate::{Error, Result};

/// One row of `summary.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub run: String,
    pub algorithm: String,
    pub seed: u64,
    pub percent_sam: f64,
    pub final_train_accuracy: f64,
    pub final_test_accuracy: f64,
    pub zeta: f64,
    pub label_noise: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub grad_evals: u64,
    pub total_steps: u64,
    pub diverged: bool,
}

impl SummaryRow {
    pub fn from_record(run: String, r: &RunRecord) -> Self {
        Self {
            run,
            algorithm: r.config.algorithm.to_string(),
            seed: r.seed,
            percent_sam: r.percent_sam,
            final_train_accuracy: r.final_train_accuracy(),
            final_test_accuracy: r.final_test_accuracy(),
            zeta: r.zeta,
            label_noise: r.config.label_noise,
            lambda1: r.config.lambda1,
            lambda2: r.config.lambda2,
            grad_evals: r.grad_evals,
            total_steps: r.total_steps,
            diverged: r.diverged,
        }
    }
}

/// Files written and files that failed, with their error messages.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EmitOutcome {
    pub written: Vec<PathBuf>,
    pub failures: Vec<(PathBuf, String)>,
}

impl EmitOutcome {
    pub fn is_ok(&self) -> bool {
        self.failures.is_empty()
    }

    pub(crate) fn push(&mut self, path: PathBuf, result: Result<()>) {
        match result {
            Ok(()) => self.written.push(path),
            Err(e) => self.failures.push((path, e.to_string())),
        }
    }
}

/// Stable per-run file stem, e.g. `run003_ae-sam_seed4`.
pub fn run_stem(index: usize, r: &RunRecord) -> String {
    format!("run{index:03}_{}_seed{}", r.config.algorithm, r.seed)
}

pub fn write_csv_rows<T: Serialize>(path: &Path, rows: &[T], header: &[&str]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

const STEP_HEADER: [&str; 7] = ["t", "xi", "loss", "grad_norm_sq", "threshold", "mu", "sigma2"];
const EPOCH_HEADER: [&str; 7] = [
    "epoch",
    "train_loss",
    "train_accuracy",
    "validation_accuracy",
    "test_loss",
    "test_accuracy",
    "full_grad_norm_sq",
];
const SUMMARY_HEADER: [&str; 13] = [
    "run",
    "algorithm",
    "seed",
    "percent_sam",
    "final_train_accuracy",
    "final_test_accuracy",
    "zeta",
    "label_noise",
    "lambda1",
    "lambda2",
    "grad_evals",
    "total_steps",
    "diverged",
];

/// Writes, into `dir`:
///
/// * `summary.csv` and `summary.json` with one row per run;
/// * `<stem>_steps.csv`, `<stem>_epochs.csv` and `<stem>_config.json` per run.
///
/// A failing file does not stop the others.
pub fn emit_reports(records: &[RunRecord], dir: impl AsRef<Path>) -> EmitOutcome {
    let dir = dir.as_ref();
    let mut out = EmitOutcome::default();
    if let Err(e) = fs::create_dir_all(dir) {
        out.failures.push((dir.to_path_buf(), e.to_string()));
        return out;
    }

    let rows: Vec<SummaryRow> = records
        .iter()
        .enumerate()
        .map(|(i, r)| SummaryRow::from_record(run_stem(i, r), r))
        .collect();
    let summary_csv = dir.join("summary.csv");
    out.push(summary_csv.clone(), write_csv_rows(&summary_csv, &rows, &SUMMARY_HEADER));
    let summary_json = dir.join("summary.json");
    out.push(summary_json.clone(), write_json(&summary_json, &rows));

    for (i, r) in records.iter().enumerate() {
        let stem = run_stem(i, r);
        let steps = dir.join(format!("{stem}_steps.csv"));
        out.push(steps.clone(), write_csv_rows(&steps, &r.traces, &STEP_HEADER));
        let epochs = dir.join(format!("{stem}_epochs.csv"));
        out.push(epochs.clone(), write_csv_rows(&epochs, &r.epochs, &EPOCH_HEADER));
        let config = dir.join(format!("{stem}_config.json"));
        out.push(config.clone(), write_json(&config, &r.config));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{run_experiment, ExperimentConfig};
    use crate::optim::Algorithm;

    fn record() -> RunRecord {
        let c = ExperimentConfig {
            algorithm: Algorithm::AeSam,
            n_examples: 200,
            features: 2,
            classes: 2,
            hidden: vec![4],
            batch_size: 32,
            epochs: 2,
            ..Default::default()
        };
        run_experiment(&c, 0).unwrap()
    }

    fn lines(path: &Path) -> usize {
        fs::read_to_string(path).unwrap().lines().count()
    }

    #[test]
    fn empty_records_give_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let out = emit_reports(&[], dir.path());
        assert!(out.is_ok());
        let text = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
        assert_eq!(text.lines().count(), 1);
        assert!(text.starts_with("run,algorithm,seed,percent_sam,"));
    }

    #[test]
    fn one_run_cardinalities() {
        let dir = tempfile::tempdir().unwrap();
        let r = record();
        let out = emit_reports(std::slice::from_ref(&r), dir.path());
        assert!(out.is_ok(), "{:?}", out.failures);
        assert_eq!(out.written.len(), 5);
        assert_eq!(lines(&dir.path().join("summary.csv")), 2);
        let stem = run_stem(0, &r);
        assert_eq!(lines(&dir.path().join(format!("{stem}_steps.csv"))), 1 + r.total_steps as usize);
        assert_eq!(lines(&dir.path().join(format!("{stem}_epochs.csv"))), 3);
    }

    #[test]
    fn re_emission_is_byte_identical() {
        let r = record();
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        emit_reports(std::slice::from_ref(&r), a.path());
        emit_reports(std::slice::from_ref(&r), b.path());
        for entry in fs::read_dir(a.path()).unwrap() {
            let name = entry.unwrap().file_name();
            assert_eq!(
                fs::read(a.path().join(&name)).unwrap(),
                fs::read(b.path().join(&name)).unwrap(),
                "{name:?}"
            );
        }
    }

    #[test]
    fn failures_are_collected_per_file() {
        let dir = tempfile::tempdir().unwrap();
        let r = record();
        // A directory squatting on one output name makes only that file fail.
        let stem = run_stem(0, &r);
        fs::create_dir(dir.path().join(format!("{stem}_steps.csv"))).unwrap();
        let out = emit_reports(&[r], dir.path());
        assert_eq!(out.failures.len(), 1);
        assert_eq!(out.written.len(), 4);
    }
}
