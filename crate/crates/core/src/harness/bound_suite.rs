use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::metrics::{check_gd_bound, gd_trajectory, BoundCheck};
use crate::models::AnalyticLandscape;
use crate::{rng, Result};

/// One randomized full-batch run and its bound evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundCase {
    pub case: usize,
    pub landscape: AnalyticLandscape,
    pub sam_probability: f64,
    pub w0: Vec<f64>,
    pub xis: Vec<bool>,
    pub check: BoundCheck,
}

/// Flat row for CSV output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundRow {
    pub case: usize,
    pub landscape: String,
    pub dim: usize,
    pub beta: f64,
    pub eta: f64,
    pub rho: f64,
    pub zeta: f64,
    pub steps: usize,
    pub left: f64,
    pub right: f64,
    pub satisfied: bool,
}

impl From<&BoundCase> for BoundRow {
    fn from(c: &BoundCase) -> Self {
        Self {
            case: c.case,
            landscape: c.landscape.name().to_string(),
            dim: c.landscape.dim(),
            beta: c.check.beta,
            eta: c.check.eta,
            rho: c.check.rho,
            zeta: c.check.zeta,
            steps: c.check.steps,
            left: c.check.left,
            right: c.check.right,
            satisfied: c.check.satisfied,
        }
    }
}

fn random_landscape<R: Rng>(r: &mut R) -> Result<AnalyticLandscape> {
    let dim = r.random_range(1..=8);
    match r.random_range(0..3) {
        0 => Ok(AnalyticLandscape::quadratic(dim)),
        1 => AnalyticLandscape::scaled_quadratic((0..dim).map(|_| r.random_range(0.0..5.0)).collect()),
        _ => AnalyticLandscape::nonconvex_wells(
            dim,
            r.random_range(0.0..2.0),
            r.random_range(0.0..1.0),
            r.random_range(0.5..3.0),
        ),
    }
}

/// `count` runs with random landscapes, step sizes inside the hypotheses
/// `eta < 1/beta` and `rho < 1/(2 beta)`, lengths `T` in `[10, 200]` and Bernoulli `xi`
/// sequences of random rate.
pub fn random_bound_cases(count: usize, seed: u64) -> Result<Vec<BoundCase>> {
    let mut r = rng::stream(seed, rng::STREAM_DIAG);
    (0..count)
        .map(|case| {
            let landscape = random_landscape(&mut r)?;
            let beta = landscape.beta().max(1e-3);
            let eta = r.random_range(0.01..0.99) / beta;
            let rho = r.random_range(0.0..0.99) / (2.0 * beta);
            let steps = r.random_range(10..=200);
            let sam_probability = r.random::<f64>();
            let xis: Vec<bool> = (0..steps).map(|_| r.random::<f64>() < sam_probability).collect();
            let scale = r.random_range(0.1..3.0);
            let w0: Vec<f64> = (0..landscape.dim())
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut r);
                    scale * z
                })
                .collect();
            let trajectory = gd_trajectory(&landscape, &w0, eta, rho, &xis)?;
            let check = check_gd_bound(&trajectory, &landscape, eta, rho, &xis)?;
            Ok(BoundCase {
                case,
                landscape,
                sam_probability,
                w0,
                xis,
                check,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cases_respect_hypotheses_and_are_reproducible() {
        let a = random_bound_cases(30, 5).unwrap();
        assert_eq!(a, random_bound_cases(30, 5).unwrap());
        for c in &a {
            assert!(c.check.eta * c.check.beta < 1.0);
            assert!(c.check.rho * 2.0 * c.check.beta < 1.0);
            assert_eq!(c.check.satisfied, c.check.left <= c.check.right);
            let row = BoundRow::from(c);
            assert_eq!(row.steps, c.check.steps);
        }
    }
}
