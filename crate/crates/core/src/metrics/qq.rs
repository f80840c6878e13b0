use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::{Error, Result};

pub const MIN_QQ_SAMPLES: usize = 20;

/// Standardized order statistics against standard-normal quantiles.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QqReport {
    pub sample_quantiles: Vec<f64>,
    pub theoretical_quantiles: Vec<f64>,
    /// Pearson correlation of the paired quantiles.
    pub correlation: f64,
}

impl QqReport {
    pub fn len(&self) -> usize {
        self.sample_quantiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sample_quantiles.is_empty()
    }
}

/// Q-Q points with plotting positions `(i - 0.5) / n`.
pub fn qq_points(samples: &[f64]) -> Result<QqReport> {
    let n = samples.len();
    if n < MIN_QQ_SAMPLES {
        return Err(Error::InsufficientData {
            needed: MIN_QQ_SAMPLES,
            got: n,
        });
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite Q-Q sample".into()));
    }
    let nf = n as f64;
    let mean = samples.iter().sum::<f64>() / nf;
    let std = (samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (nf - 1.0)).sqrt();
    if std == 0.0 {
        return Err(Error::Numeric("Q-Q samples have zero spread".into()));
    }

    let mut sample_quantiles: Vec<f64> = samples.iter().map(|v| (v - mean) / std).collect();
    sample_quantiles.sort_by(f64::total_cmp);

    let normal = Normal::standard();
    let theoretical_quantiles: Vec<f64> = (1..=n)
        .map(|i| normal.inverse_cdf((i as f64 - 0.5) / nf))
        .collect();

    let correlation = pearson(&sample_quantiles, &theoretical_quantiles);
    Ok(QqReport {
        sample_quantiles,
        theoretical_quantiles,
        correlation,
    })
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    (sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0)
}
