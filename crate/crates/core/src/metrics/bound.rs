use serde::{Deserialize, Serialize};

use crate::models::AnalyticLandscape;
use crate::{Error, Result};

/// Fraction of the initial value the running minimum must reach in [`convergence_trend`].
pub const DEFAULT_TREND_FRACTION: f64 = 0.1;

/// Both sides of the full-batch descent bound
/// `min_t ||grad L(w_t)||^2 <= (L(w_0) - L(w_T)) / (T eta (1 - beta eta / 2 - beta rho zeta))`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub left: f64,
    pub right: f64,
    pub beta: f64,
    pub eta: f64,
    pub rho: f64,
    pub zeta: f64,
    pub steps: usize,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub satisfied: bool,
}

fn check_hypotheses(beta: f64, eta: f64, rho: f64) -> Result<()> {
    if !(eta > 0.0 && rho >= 0.0) {
        return Err(Error::Precondition(format!("need eta > 0 and rho >= 0, got {eta}, {rho}")));
    }
    if beta > 0.0 && (rho >= 1.0 / (2.0 * beta) || eta >= 1.0 / beta) {
        return Err(Error::Precondition(format!(
            "bound requires rho < 1/(2 beta) and eta < 1/beta (beta = {beta}, eta = {eta}, rho = {rho})"
        )));
    }
    Ok(())
}

/// Full-batch iterates `w_0..w_T`: a step along `grad L(w + rho grad L(w))` where `xi` is
/// set, along `grad L(w)` otherwise.
pub fn gd_trajectory(
    landscape: &AnalyticLandscape,
    w0: &[f64],
    eta: f64,
    rho: f64,
    xis: &[bool],
) -> Result<Vec<Vec<f64>>> {
    let mut w = w0.to_vec();
    let mut out = Vec::with_capacity(xis.len() + 1);
    out.push(w.clone());
    for &xi in xis {
        let (_, g) = landscape.value_and_grad(&w)?;
        let direction = if xi {
            let probe: Vec<f64> = w.iter().zip(&g).map(|(a, b)| a + rho * b).collect();
            landscape.value_and_grad(&probe)?.1
        } else {
            g
        };
        for (wi, di) in w.iter_mut().zip(&direction) {
            *wi -= eta * di;
        }
        if w.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("full-batch trajectory diverged".into()));
        }
        out.push(w.clone());
    }
    Ok(out)
}

pub fn check_gd_bound(
    trajectory: &[Vec<f64>],
    landscape: &AnalyticLandscape,
    eta: f64,
    rho: f64,
    xis: &[bool],
) -> Result<BoundCheck> {
    let beta = landscape.beta();
    check_hypotheses(beta, eta, rho)?;
    let steps = xis.len();
    if steps == 0 || trajectory.len() != steps + 1 {
        return Err(Error::Precondition(format!(
            "trajectory of {} points does not match {} steps",
            trajectory.len(),
            steps
        )));
    }
    let zeta = xis.iter().filter(|&&x| x).count() as f64 / steps as f64;

    let mut left = f64::INFINITY;
    for w in &trajectory[..steps] {
        let (_, g) = landscape.value_and_grad(w)?;
        left = left.min(g.iter().map(|v| v * v).sum());
    }
    let initial_loss = landscape.value(&trajectory[0])?;
    let final_loss = landscape.value(&trajectory[steps])?;
    let denom = steps as f64 * eta * (1.0 - beta * eta / 2.0 - beta * rho * zeta);
    let right = (initial_loss - final_loss) / denom;

    Ok(BoundCheck {
        left,
        right,
        beta,
        eta,
        rho,
        zeta,
        steps,
        initial_loss,
        final_loss,
        satisfied: left <= right,
    })
}

/// Whether the running minimum of per-epoch `||grad L(D; w)||^2` ends at or below
/// `fraction` times its first value.
pub fn convergence_trend(norms: &[f64], fraction: f64) -> Result<bool> {
    if norms.len() < 5 {
        return Err(Error::InsufficientData {
            needed: 5,
            got: norms.len(),
        });
    }
    let running_min = norms.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(running_min <= fraction * norms[0])
}
