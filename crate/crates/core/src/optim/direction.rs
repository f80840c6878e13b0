//! Perturbations, trigger rules of the non-adaptive baselines and the LookSAM split.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::adcore::ParamSet;
use crate::{Error, Result};

/// Norms below this are treated as zero directions.
pub const DEGENERATE_NORM: f64 = 1e-12;

/// How the ascent step of SAM is scaled.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PerturbationMode {
    /// `eps = rho * g / ||g||`
    #[default]
    Normalized,
    /// `eps = rho * g`
    Raw,
}

pub fn sam_perturb(g: &ParamSet, rho: f64, mode: PerturbationMode) -> Result<ParamSet> {
    match mode {
        PerturbationMode::Raw => Ok(g.scaled(rho)),
        PerturbationMode::Normalized => {
            let norm = g.norm();
            if norm < DEGENERATE_NORM {
                return Err(Error::DegenerateGradient { norm });
            }
            Ok(g.scaled(rho / norm))
        }
    }
}

/// Bernoulli(p) draw used by SS-SAM.
pub fn ss_sam_trigger<R: Rng + ?Sized>(rng: &mut R, p: f64) -> bool {
    rng.random::<f64>() < p
}

/// LookSAM takes a SAM step on every `k`-th iteration, starting at `t = 0`.
pub fn looksam_trigger(t: u64, k: u64) -> bool {
    assert!(k >= 1, "LookSAM period must be >= 1");
    t.is_multiple_of(k)
}

/// Component of `g_s` orthogonal to `g`: `g_s - (g.g_s / ||g||^2) g`.
pub fn looksam_decompose(g: &ParamSet, g_s: &ParamSet) -> Result<ParamSet> {
    let g2 = g.norm_sq();
    if g2.sqrt() < DEGENERATE_NORM {
        return Err(Error::DegenerateGradient { norm: g2.sqrt() });
    }
    Ok(g_s.plus_scaled(-g.dot(g_s) / g2, g))
}

/// Approximate SAM direction `g + alpha * (||g|| / ||g_v||) g_v`; falls back to `g`
/// when `g_v` vanishes.
pub fn looksam_compose(g: &ParamSet, g_v: &ParamSet, alpha: f64) -> ParamSet {
    let gv_norm = g_v.norm();
    if gv_norm < DEGENERATE_NORM {
        return g.clone();
    }
    g.plus_scaled(alpha * g.norm() / gv_norm, g_v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn v(x: &[f64]) -> ParamSet {
        ParamSet::from(x.to_vec())
    }

    #[test]
    fn perturbation_modes() {
        let g = v(&[3.0, 4.0]);
        let n = sam_perturb(&g, 1.0, PerturbationMode::Normalized).unwrap();
        assert!((n.flatten()[0] - 0.6).abs() < 1e-15 && (n.flatten()[1] - 0.8).abs() < 1e-15);
        assert_eq!(sam_perturb(&g, 1.0, PerturbationMode::Raw).unwrap(), g);
        let e = sam_perturb(&v(&[0.3, -1.2, 7.0]), 0.05, PerturbationMode::Normalized).unwrap();
        assert!((e.norm() - 0.05).abs() < 1e-16);
        assert!(matches!(
            sam_perturb(&v(&[0.0, 1e-13]), 0.05, PerturbationMode::Normalized),
            Err(Error::DegenerateGradient { .. })
        ));
    }

    #[test]
    fn bernoulli_extremes() {
        let mut r = rng::stream(0, 0);
        assert!((0..1000).all(|_| ss_sam_trigger(&mut r, 1.0)));
        assert!((0..1000).all(|_| !ss_sam_trigger(&mut r, 0.0)));
    }

    #[test]
    fn bernoulli_half_concentrates() {
        // Binomial(10000, 0.5): 3 sigma = 150.
        let mut r = rng::stream(42, 7);
        let hits = (0..10_000).filter(|_| ss_sam_trigger(&mut r, 0.5)).count();
        assert!((4850..=5150).contains(&hits), "{hits}");
    }

    #[test]
    fn looksam_period() {
        assert!((0..50).all(|t| looksam_trigger(t, 1)));
        for t in [0, 5, 10] {
            assert!(looksam_trigger(t, 5));
        }
        for t in 1..5 {
            assert!(!looksam_trigger(t, 5));
        }
        assert_eq!((0..100).filter(|&t| looksam_trigger(t, 5)).count(), 20);
    }

    #[test]
    fn decompose_examples() {
        let g = v(&[1.0, 0.0]);
        assert_eq!(looksam_decompose(&g, &v(&[1.0, 1.0])).unwrap().flatten(), vec![0.0, 1.0]);
        let h = v(&[0.3, -2.0, 1.5]);
        let gv = looksam_decompose(&h, &h.scaled(2.0)).unwrap();
        assert!(gv.norm() < 1e-15);
        assert!(looksam_decompose(&v(&[0.0, 0.0]), &g).is_err());
    }

    #[test]
    fn compose_examples() {
        let g = v(&[1.0, 0.0]);
        assert_eq!(looksam_compose(&g, &v(&[0.0, 2.0]), 1.0).flatten(), vec![1.0, 1.0]);
        assert_eq!(looksam_compose(&g, &v(&[0.0, 2.0]), 0.0), g);
        assert_eq!(looksam_compose(&g, &v(&[0.0, 0.0]), 0.7), g);
    }
}
