//! Exact covariance kernels for the model processes.
//!
//! A [`CovarianceKernel`] is a symmetric bivariate function on a finite-
//! dimensional index set together with self-similarity metadata. Built-in
//! constructors cover fractional Brownian motion and sub-fractional Brownian
//! motion; the field modules assemble their own kernels on top of these.

use std::sync::Arc;

use crate::error::{Error, Result};

type EvalFn = dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync;

/// A symmetric positive-semidefinite covariance function on `R^dimension`.
///
/// Kernels are immutable after construction and cheap to clone (the
/// evaluation closure is shared).
#[derive(Clone)]
pub struct CovarianceKernel {
    /// Dimension of the index set.
    pub dimension: usize,
    /// Self-similarity index of the process (the `alpha/2` of assumption B1),
    /// when the process is self-similar.
    pub self_similar_index: Option<f64>,
    /// Identifier used in reports and error messages.
    pub name: String,
    eval: Arc<EvalFn>,
}

impl std::fmt::Debug for CovarianceKernel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CovarianceKernel")
            .field("dimension", &self.dimension)
            .field("self_similar_index", &self.self_similar_index)
            .field("name", &self.name)
            .finish()
    }
}

impl CovarianceKernel {
    /// Wraps an arbitrary symmetric covariance function.
    pub fn new<F>(dimension: usize, name: impl Into<String>, self_similar_index: Option<f64>, eval: F) -> Self
    where
        F: Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static,
    {
        CovarianceKernel {
            dimension,
            self_similar_index,
            name: name.into(),
            eval: Arc::new(eval),
        }
    }

    /// Evaluates the kernel at a pair of index points.
    pub fn eval(&self, s: &[f64], t: &[f64]) -> f64 {
        debug_assert_eq!(s.len(), self.dimension);
        debug_assert_eq!(t.len(), self.dimension);
        (self.eval)(s, t)
    }

    /// Standard fractional Brownian motion on `[0, inf)` with Hurst-type
    /// exponent `alpha` (variance `t^alpha`).
    pub fn fbm(alpha: f64) -> Result<Self> {
        check_fbm_alpha(alpha)?;
        Ok(CovarianceKernel::new(
            1,
            format!("fbm(alpha={alpha})"),
            Some(alpha / 2.0),
            move |s, t| fbm_cov_unchecked(alpha, s[0], t[0]),
        ))
    }

    /// Sub-fractional Brownian motion, normalized to unit variance at `t=1`.
    pub fn sub_fbm(alpha: f64) -> Result<Self> {
        check_subfbm_alpha(alpha)?;
        Ok(CovarianceKernel::new(
            1,
            format!("sub_fbm(alpha={alpha})"),
            Some(alpha / 2.0),
            move |s, t| subfbm_cov_unchecked(alpha, s[0], t[0]),
        ))
    }
}

fn check_fbm_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha <= 2.0) {
        return Err(Error::Domain(format!(
            "fbm alpha must lie in (0, 2], got {alpha}"
        )));
    }
    Ok(())
}

fn check_subfbm_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 2.0) {
        return Err(Error::Domain(format!(
            "sub-fbm alpha must lie in (0, 2), got {alpha}"
        )));
    }
    Ok(())
}

fn check_nonneg(name: &str, v: f64) -> Result<()> {
    if !(v >= 0.0) {
        return Err(Error::Domain(format!("{name} must be >= 0, got {v}")));
    }
    Ok(())
}

fn fbm_cov_unchecked(alpha: f64, s: f64, t: f64) -> f64 {
    0.5 * (t.abs().powf(alpha) + s.abs().powf(alpha) - (t - s).abs().powf(alpha))
}

fn subfbm_cov_unchecked(alpha: f64, s: f64, t: f64) -> f64 {
    let norm = 2.0 - 2.0_f64.powf(alpha - 1.0);
    (s.powf(alpha) + t.powf(alpha) - 0.5 * ((s + t).powf(alpha) + (s - t).abs().powf(alpha))) / norm
}

/// Covariance of standard fBM: `(|t|^a + |s|^a - |t-s|^a) / 2`.
pub fn fbm_covariance(alpha: f64, s: f64, t: f64) -> Result<f64> {
    check_fbm_alpha(alpha)?;
    check_nonneg("s", s)?;
    check_nonneg("t", t)?;
    Ok(fbm_cov_unchecked(alpha, s, t))
}

/// Covariance of sub-fractional Brownian motion, normalized so that the
/// variance at `t=1` equals 1.
pub fn subfbm_covariance(alpha: f64, s: f64, t: f64) -> Result<f64> {
    check_subfbm_alpha(alpha)?;
    check_nonneg("s", s)?;
    check_nonneg("t", t)?;
    Ok(subfbm_cov_unchecked(alpha, s, t))
}

/// Covariance of an fBM increment pair:
/// `Cov(B(s1)-B(s0), B(t1)-B(t0))` by inclusion-exclusion of four kernel
/// evaluations. No approximation.
pub fn fbm_increment_cov(alpha: f64, s0: f64, s1: f64, t0: f64, t1: f64) -> Result<f64> {
    check_fbm_alpha(alpha)?;
    for (name, v) in [("s0", s0), ("s1", s1), ("t0", t0), ("t1", t1)] {
        check_nonneg(name, v)?;
    }
    Ok(fbm_cov_unchecked(alpha, s1, t1) - fbm_cov_unchecked(alpha, s1, t0)
        - fbm_cov_unchecked(alpha, s0, t1)
        + fbm_cov_unchecked(alpha, s0, t0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn fbm_alpha1_is_min() {
        assert_relative_eq!(fbm_covariance(1.0, 0.5, 1.0).unwrap(), 0.5);
        assert_relative_eq!(fbm_covariance(1.0, 2.0, 0.25).unwrap(), 0.25);
    }

    #[test]
    fn fbm_unit_variance_at_one() {
        for alpha in [0.3, 0.5, 1.0, 1.5, 2.0] {
            assert_relative_eq!(fbm_covariance(alpha, 1.0, 1.0).unwrap(), 1.0);
        }
    }

    #[test]
    fn fbm_hand_value() {
        // alpha=1.5, s=1, t=2: (1 + 2^1.5 - 1)/2 = sqrt(2).
        assert_relative_eq!(
            fbm_covariance(1.5, 1.0, 2.0).unwrap(),
            std::f64::consts::SQRT_2,
            max_relative = 1e-14
        );
    }

    #[test]
    fn fbm_alpha_domain() {
        assert!(fbm_covariance(0.0, 1.0, 1.0).is_err());
        assert!(fbm_covariance(2.5, 1.0, 1.0).is_err());
        assert!(fbm_covariance(-1.0, 1.0, 1.0).is_err());
        assert!(fbm_covariance(2.0, 1.0, 1.0).is_ok());
    }

    #[test]
    fn subfbm_normalization_and_start() {
        assert_relative_eq!(subfbm_covariance(1.0, 1.0, 1.0).unwrap(), 1.0);
        for alpha in [0.5, 1.0, 1.7] {
            assert_relative_eq!(subfbm_covariance(alpha, 0.0, 0.7).unwrap(), 0.0);
            assert_relative_eq!(subfbm_covariance(alpha, 1.0, 1.0).unwrap(), 1.0);
        }
    }

    #[test]
    fn subfbm_hand_value() {
        // alpha=1, s=1, t=2: [1 + 2 - (3 + 1)/2] / 1 = 1.
        assert_relative_eq!(subfbm_covariance(1.0, 1.0, 2.0).unwrap(), 1.0);
    }

    #[test]
    fn subfbm_alpha_domain() {
        assert!(subfbm_covariance(2.0, 1.0, 1.0).is_err());
        assert!(subfbm_covariance(0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn increment_cov_disjoint_brownian() {
        // Brownian increments over disjoint intervals are independent.
        assert_relative_eq!(fbm_increment_cov(1.0, 0.0, 0.3, 0.3, 0.9).unwrap(), 0.0);
        assert_relative_eq!(fbm_increment_cov(1.0, 0.1, 0.4, 0.2, 0.8).unwrap(), 0.2);
    }

    proptest! {
        #[test]
        fn fbm_self_similarity(
            alpha in 0.1_f64..2.0,
            s in 0.01_f64..5.0,
            t in 0.01_f64..5.0,
        ) {
            for r in [0.5, 2.0] {
                let base = fbm_covariance(alpha, s, t).unwrap();
                let scaled = fbm_covariance(alpha, r * s, r * t).unwrap();
                prop_assert!((scaled - r.powf(alpha) * base).abs() <= 1e-12 * scaled.abs().max(1.0));
            }
        }

        #[test]
        fn subfbm_self_similarity_diagonal(
            alpha in 0.1_f64..1.95,
            t in 0.01_f64..3.0,
        ) {
            for r in [0.5, 2.0] {
                let base = subfbm_covariance(alpha, t, t).unwrap();
                let scaled = subfbm_covariance(alpha, r * t, r * t).unwrap();
                prop_assert!((scaled - r.powf(alpha) * base).abs() <= 1e-12 * scaled.abs().max(1.0));
            }
        }

        #[test]
        fn kernels_symmetric(
            alpha in 0.1_f64..1.95,
            s in 0.0_f64..4.0,
            t in 0.0_f64..4.0,
        ) {
            prop_assert_eq!(
                fbm_covariance(alpha, s, t).unwrap(),
                fbm_covariance(alpha, t, s).unwrap()
            );
            prop_assert_eq!(
                subfbm_covariance(alpha, s, t).unwrap(),
                subfbm_covariance(alpha, t, s).unwrap()
            );
        }
    }
}
