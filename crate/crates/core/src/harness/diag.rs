use std::path::Path;

use serde::{Deserialize, Serialize};

use super::report::{write_csv_rows, write_json, EmitOutcome};
use crate::adcore::ParamSet;
use crate::metrics::{gradient_variance, qq_points, sample_grad_norms, QqReport, VarianceReport};
use crate::models::{LabeledDataset, Mlp};
use crate::Result;

/// Norm distribution, Q-Q points and variance identity at one parameter point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagReport {
    pub grad_norms_sq: Vec<f64>,
    pub qq: QqReport,
    pub variance: VarianceReport,
}

/// Samples `batches` batches of `batch_size` examples; the norms, Q-Q points and variance
/// estimate all use the same batches.
pub fn diagnose(
    mlp: &Mlp,
    params: &ParamSet,
    data: &LabeledDataset,
    batch_size: usize,
    batches: usize,
    seed: u64,
) -> Result<DiagReport> {
    let grad_norms_sq = sample_grad_norms(mlp, params, data, batch_size, batches, seed)?;
    let qq = qq_points(&grad_norms_sq)?;
    let variance = gradient_variance(mlp, params, data, batch_size, batches, seed)?;
    Ok(DiagReport {
        grad_norms_sq,
        qq,
        variance,
    })
}

#[derive(Serialize)]
struct NormRow {
    batch: usize,
    grad_norm_sq: f64,
}

#[derive(Serialize)]
struct QqRow {
    theoretical: f64,
    sample: f64,
}

#[derive(Serialize)]
struct DiagSummary<'a> {
    qq_correlation: f64,
    routes_agree_2se: bool,
    variance: &'a VarianceReport,
}

/// Writes `grad_norms.csv`, `qq.csv` and `variance.json` into `dir`.
pub fn emit_diag(report: &DiagReport, dir: impl AsRef<Path>) -> EmitOutcome {
    let dir = dir.as_ref();
    let mut out = EmitOutcome::default();
    if let Err(e) = std::fs::create_dir_all(dir) {
        out.failures.push((dir.to_path_buf(), e.to_string()));
        return out;
    }
    let norms: Vec<NormRow> = report
        .grad_norms_sq
        .iter()
        .enumerate()
        .map(|(batch, &grad_norm_sq)| NormRow { batch, grad_norm_sq })
        .collect();
    let path = dir.join("grad_norms.csv");
    let r = write_csv_rows(&path, &norms, &["batch", "grad_norm_sq"]);
    out.push(path, r);

    let qq: Vec<QqRow> = report
        .qq
        .theoretical_quantiles
        .iter()
        .zip(&report.qq.sample_quantiles)
        .map(|(&theoretical, &sample)| QqRow { theoretical, sample })
        .collect();
    let path = dir.join("qq.csv");
    let r = write_csv_rows(&path, &qq, &["theoretical", "sample"]);
    out.push(path, r);

    let path = dir.join("variance.json");
    let summary = DiagSummary {
        qq_correlation: report.qq.correlation,
        routes_agree_2se: report.variance.routes_agree(2.0),
        variance: &report.variance,
    };
    let r = write_json(&path, &summary);
    out.push(path, r);
    out
}
