//! Closed-form evaluators for the asymptotic tail formulas.
//!
//! Every formula is packaged as an [`AsymptoticFormula`] of the shape
//! `C * u^e * psi(u / sigma_star)` with the individual factors itemized for
//! audit. Monte Carlo constants are injected as [`ConstantEstimate`] values,
//! never simulated here, so evaluation stays deterministic and fast.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::chi::ChiSpec;
use crate::constants::{known_value, ConstantEstimate, ConstantKind};
use crate::error::{Error, Result};
use crate::perf_table::PerfTableSpec;

/// Standard normal survival function, via the complementary error function.
pub fn psi(u: f64) -> f64 {
    0.5 * erfc(u / std::f64::consts::SQRT_2)
}

/// Euler gamma function on the positive half-line.
pub fn gamma_fn(x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::Domain(format!("gamma_fn requires x > 0, got {x}")));
    }
    Ok(statrs::function::gamma::gamma(x))
}

/// Coordinate partition and local variance/correlation exponents of a field
/// near its optimizer set.
///
/// Indices are zero-based. `beta[i]` and `b[i]` are required exactly on
/// `lambda1`, `lambda2` and `lambda3`; `alpha[i]` and `a[i]` are global.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LambdaPartition {
    pub alpha: Vec<f64>,
    pub beta: Vec<Option<f64>>,
    pub lambda0: Vec<usize>,
    pub lambda1: Vec<usize>,
    pub lambda2: Vec<usize>,
    pub lambda3: Vec<usize>,
    /// Volume of the optimizer manifold in its intrinsic dimension.
    pub vol_m: f64,
    pub a: Vec<f64>,
    pub b: Vec<Option<f64>>,
}

impl LambdaPartition {
    pub fn n(&self) -> usize {
        self.alpha.len()
    }

    /// Checks disjointness, coverage, positivity, and the exponent ordering
    /// on each block.
    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        if self.beta.len() != n || self.a.len() != n || self.b.len() != n {
            return Err(Error::Model(format!(
                "field lengths must all equal n = {n}"
            )));
        }
        if !(self.vol_m > 0.0) {
            return Err(Error::Model(format!(
                "vol_m must be positive, got {}",
                self.vol_m
            )));
        }
        let mut seen = vec![false; n];
        for (block, set) in [
            ("lambda0", &self.lambda0),
            ("lambda1", &self.lambda1),
            ("lambda2", &self.lambda2),
            ("lambda3", &self.lambda3),
        ] {
            for &i in set {
                if i >= n {
                    return Err(Error::Model(format!("{block} index {i} out of range")));
                }
                if seen[i] {
                    return Err(Error::Model(format!("index {i} appears in two blocks")));
                }
                seen[i] = true;
            }
        }
        if seen.iter().any(|&s| !s) {
            return Err(Error::Model(
                "partition blocks must cover every coordinate".into(),
            ));
        }
        for i in 0..n {
            if !(self.alpha[i] > 0.0 && self.alpha[i] <= 2.0) {
                return Err(Error::Model(format!(
                    "alpha[{i}] must lie in (0, 2], got {}",
                    self.alpha[i]
                )));
            }
            if !(self.a[i] > 0.0) {
                return Err(Error::Model(format!("a[{i}] must be positive")));
            }
        }
        for (block, set, cmp) in [
            ("lambda1", &self.lambda1, std::cmp::Ordering::Less),
            ("lambda2", &self.lambda2, std::cmp::Ordering::Equal),
            ("lambda3", &self.lambda3, std::cmp::Ordering::Greater),
        ] {
            for &i in set {
                let beta = self.beta[i].ok_or_else(|| {
                    Error::Model(format!("beta[{i}] required on {block}"))
                })?;
                let b = self.b[i].ok_or_else(|| {
                    Error::Model(format!("b[{i}] required on {block}"))
                })?;
                if !(beta > 0.0 && b > 0.0) {
                    return Err(Error::Model(format!(
                        "beta[{i}] and b[{i}] must be positive"
                    )));
                }
                let ord = self.alpha[i].partial_cmp(&beta).unwrap();
                if ord != cmp {
                    return Err(Error::Model(format!(
                        "on {block} the exponents must satisfy alpha {cmp:?} beta, \
                         got alpha[{i}] = {} and beta[{i}] = {beta}",
                        self.alpha[i]
                    )));
                }
            }
        }
        Ok(())
    }
}

/// A tail formula `C * u^e * psi(u / sigma_star)` with its factors itemized.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AsymptoticFormula {
    pub constant_c: f64,
    pub u_exponent: f64,
    pub sigma_star: f64,
    pub description: String,
    /// Named multiplicative factors of `constant_c`, in the order applied.
    pub factors: Vec<(String, f64)>,
}

impl AsymptoticFormula {
    pub fn evaluate(&self, u: f64) -> f64 {
        self.constant_c * u.powf(self.u_exponent) * psi(u / self.sigma_star)
    }
}

fn factor_product(factors: &[(String, f64)]) -> f64 {
    factors.iter().map(|(_, v)| v).product()
}

/// Product-constant tail formula for a constant-coefficient partition:
/// `C = vol_m * prod_{L0 u L1} a_i H_i * prod_{L1} b_i^{-1/beta_i}
/// Gamma(1/beta_i + 1) * prod_{L2} P_i`, exponent
/// `sum_{L0 u L1} 2/alpha_i - sum_{L1} 2/beta_i`, `sigma_star = 1`.
///
/// `constants` supplies a generalized Piterbarg estimate per `lambda2` index
/// whose drift must equal `a_i^{-beta_i} b_i`; `pickands` supplies a Pickands
/// estimate per `lambda0` and `lambda1` index.
pub fn prop1_formula(
    partition: &LambdaPartition,
    constants: &BTreeMap<usize, ConstantEstimate>,
    pickands: &BTreeMap<usize, ConstantEstimate>,
) -> Result<AsymptoticFormula> {
    partition.validate()?;
    let mut factors = vec![("vol_m".to_string(), partition.vol_m)];
    let mut exponent = 0.0;
    for &i in partition.lambda0.iter().chain(partition.lambda1.iter()) {
        let h = pickands.get(&i).ok_or_else(|| {
            Error::Usage(format!("missing Pickands constant for index {i}"))
        })?;
        factors.push((format!("a[{i}]"), partition.a[i]));
        factors.push((format!("H[{i}]"), h.value));
        exponent += 2.0 / partition.alpha[i];
    }
    for &i in &partition.lambda1 {
        let beta = partition.beta[i].unwrap();
        let b = partition.b[i].unwrap();
        factors.push((format!("b[{i}]^(-1/beta)"), b.powf(-1.0 / beta)));
        factors.push((
            format!("Gamma(1/beta[{i}] + 1)"),
            gamma_fn(1.0 / beta + 1.0)?,
        ));
        exponent -= 2.0 / beta;
    }
    for &i in &partition.lambda2 {
        let p = constants.get(&i).ok_or_else(|| {
            Error::Usage(format!("missing Piterbarg constant for index {i}"))
        })?;
        let beta = partition.beta[i].unwrap();
        let want_drift = partition.a[i].powf(-beta) * partition.b[i].unwrap();
        if let Some(d) = p.drift {
            if (d - want_drift).abs() > 1e-9 * want_drift.max(1.0) {
                return Err(Error::Usage(format!(
                    "constant for index {i} has drift {d}, expected {want_drift}"
                )));
            }
        }
        factors.push((format!("P[{i}]"), p.value));
    }
    Ok(AsymptoticFormula {
        constant_c: factor_product(&factors),
        u_exponent: exponent,
        sigma_star: 1.0,
        description: "product-constant tail formula".to_string(),
        factors,
    })
}

/// Tail formula for the supremum of the simplex field, in its three
/// homogeneity regimes.
///
/// For `alpha < 1` the constant multiplies the Pickands power, the weight
/// products, the explicit powers of 2 and `pi / (alpha (1 - alpha))`, the
/// `sigma_star` power, and the weight-sum square root, exactly as displayed;
/// the Pickands value comes from `pickands` or the known-value table. For
/// `alpha = 1` the `m = n + 1` case uses the known unit constant, otherwise
/// `hw` is required. Values of `alpha` within 1e-9 of 1 but not exactly 1
/// are rejected: the regimes are discontinuous there and the caller must
/// choose one explicitly.
pub fn perf_table_formula(
    spec: &PerfTableSpec,
    hw: Option<&ConstantEstimate>,
    pickands: Option<&ConstantEstimate>,
) -> Result<AsymptoticFormula> {
    let alpha = spec.alpha;
    let n = spec.n;
    if alpha != 1.0 && (alpha - 1.0).abs() < 1e-9 {
        return Err(Error::Usage(format!(
            "alpha = {alpha} is within 1e-9 of the regime boundary 1; \
             pass alpha = 1 exactly or choose a regime away from it"
        )));
    }
    if alpha > 1.0 {
        let m = spec.m() as f64;
        return Ok(AsymptoticFormula {
            constant_c: m,
            u_exponent: 0.0,
            sigma_star: 1.0,
            description: format!("simplex field tail, alpha = {alpha} > 1"),
            factors: vec![("m".to_string(), m)],
        });
    }
    if alpha == 1.0 {
        let m = spec.m();
        let hw_value = if let Some(est) = hw {
            if est.kind != ConstantKind::HW {
                return Err(Error::Usage(format!(
                    "expected an H_W estimate, got {:?}",
                    est.kind
                )));
            }
            est.value
        } else if m == n + 1 {
            1.0
        } else {
            return Err(Error::Usage(
                "alpha = 1 with interior zero weights needs an H_W estimate".into(),
            ));
        };
        let mut fact = 1.0;
        for k in 1..m {
            fact *= k as f64;
        }
        let factors = vec![
            ("1/(m-1)!".to_string(), 1.0 / fact),
            ("H_W".to_string(), hw_value),
        ];
        return Ok(AsymptoticFormula {
            constant_c: factor_product(&factors),
            u_exponent: 2.0 * (m as f64 - 1.0),
            sigma_star: 1.0,
            description: "simplex field tail, alpha = 1".to_string(),
            factors,
        });
    }

    // alpha < 1: fully displayed constant around the unique interior
    // optimizer.
    let h = if let Some(est) = pickands {
        if est.kind != ConstantKind::Pickands {
            return Err(Error::Usage(format!(
                "expected a Pickands estimate, got {:?}",
                est.kind
            )));
        }
        est.value
    } else {
        known_value(ConstantKind::Pickands, alpha, None).ok_or_else(|| {
            Error::Usage(format!(
                "no known Pickands constant for alpha = {alpha}; supply an estimate"
            ))
        })?
    };
    let sigma_star = spec.sigma_star();
    let mut weight_prod = 1.0;
    for i in 0..n {
        weight_prod *= (spec.a[i] * spec.a[i] + spec.a[i + 1] * spec.a[i + 1])
            .powf(1.0 / alpha);
    }
    let weight_sum: f64 = (0..=n)
        .map(|j| {
            (0..=n)
                .filter(|&i| i != j)
                .map(|i| spec.a[i].powf(2.0 / (alpha - 1.0)))
                .product::<f64>()
        })
        .sum();
    let nf = n as f64;
    let factors = vec![
        ("H^n".to_string(), h.powi(n as i32)),
        ("prod (a_i^2 + a_{i+1}^2)^{1/alpha}".to_string(), weight_prod),
        ("2^{(1 - 1/alpha) n}".to_string(), 2.0_f64.powf((1.0 - 1.0 / alpha) * nf)),
        (
            "(pi / (alpha (1 - alpha)))^{n/2}".to_string(),
            (std::f64::consts::PI / (alpha * (1.0 - alpha))).powf(nf / 2.0),
        ),
        (
            "sigma_star^{-(alpha - 2)^2 n / ((1 - alpha) alpha)}".to_string(),
            sigma_star.powf(-(alpha - 2.0) * (alpha - 2.0) * nf / ((1.0 - alpha) * alpha)),
        ),
        ("(sum_j prod_{i != j} a_i^{2/(alpha - 1)})^{-1/2}".to_string(), weight_sum.powf(-0.5)),
    ];
    Ok(AsymptoticFormula {
        constant_c: factor_product(&factors),
        u_exponent: (2.0 / alpha - 1.0) * nf,
        sigma_star,
        description: format!("simplex field tail, alpha = {alpha} < 1"),
        factors,
    })
}

/// Tail formula for the supremum of the chi field over the sphere-time
/// domain: prefactor `2^{(3-n)/2} sqrt(pi) / Gamma(n/2)` times a generalized
/// Piterbarg constant with drift `b / a`, exponent `n - 1`.
pub fn chi_formula(spec: &ChiSpec, p_est: &ConstantEstimate) -> Result<AsymptoticFormula> {
    match p_est.kind {
        ConstantKind::Piterbarg | ConstantKind::GeneralizedPiterbarg => {}
        other => {
            return Err(Error::Usage(format!(
                "expected a (generalized) Piterbarg estimate, got {other:?}"
            )))
        }
    }
    let want_drift = spec.b / spec.a;
    match p_est.drift {
        Some(d) if (d - want_drift).abs() <= 1e-9 * want_drift.max(1.0) => {}
        Some(d) => {
            return Err(Error::Usage(format!(
                "constant has drift {d}, expected b/a = {want_drift}"
            )))
        }
        None => {
            return Err(Error::Usage(
                "constant estimate carries no drift parameter".into(),
            ))
        }
    }
    let nf = spec.n as f64;
    let prefactor = 2.0_f64.powf((3.0 - nf) / 2.0) * std::f64::consts::PI.sqrt()
        / gamma_fn(nf / 2.0)?;
    let factors = vec![
        ("2^{(3-n)/2} sqrt(pi) / Gamma(n/2)".to_string(), prefactor),
        ("P".to_string(), p_est.value),
    ];
    Ok(AsymptoticFormula {
        constant_c: factor_product(&factors),
        u_exponent: nf - 1.0,
        sigma_star: 1.0,
        description: format!("chi field tail, n = {}", spec.n),
        factors,
    })
}
