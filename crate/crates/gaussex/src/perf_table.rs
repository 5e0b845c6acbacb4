//! The performance-table field: weighted sums of independent fBM increments
//! over the ordered simplex.
//!
//! The field is `Z(t) = sum_i a_i (B_i(t_i) - B_i(t_{i-1}))` over
//! `0 <= t_1 <= ... <= t_n <= 1` with `t_0 = 0`, `t_{n+1} = 1`, independent
//! fBMs `B_i` and weights normalized so `max a_i = 1`. The module provides
//! the exact covariance, the variance-optimizer report in all three
//! `alpha`-regimes, the `alpha = 1` coordinate transform, the limiting field
//! `W` increment variance, and numerical validators for the local variance
//! and correlation expansions.

use rand::Rng;

use crate::error::{Error, Result};
use crate::kernels::{fbm_increment_cov, CovarianceKernel};
use crate::sampling::rep_rng;

/// Tolerance for deciding `a_i = 1` membership in the index set `N`.
const WEIGHT_TOL: f64 = 1e-12;
const SIMPLEX_TOL: f64 = 1e-12;

/// Specification of a performance-table field.
#[derive(Debug, Clone, PartialEq)]
pub struct PerfTableSpec {
    /// Simplex dimension (number of free coordinates).
    pub n: usize,
    /// Common fBM exponent of the increments, in (0, 2).
    pub alpha: f64,
    /// The `n + 1` positive weights, normalized to `max a_i = 1`.
    pub a: Vec<f64>,
}

impl PerfTableSpec {
    /// Validates and normalizes a spec; weights are rescaled so that the
    /// largest equals 1.
    pub fn new(n: usize, alpha: f64, a: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::Domain("performance table needs n >= 1".into()));
        }
        if !(alpha > 0.0 && alpha < 2.0) {
            return Err(Error::Domain(format!(
                "performance-table alpha must lie in (0, 2), got {alpha}"
            )));
        }
        if a.len() != n + 1 {
            return Err(Error::Domain(format!(
                "need n + 1 = {} weights, got {}",
                n + 1,
                a.len()
            )));
        }
        if a.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
            return Err(Error::Domain("all weights must be positive and finite".into()));
        }
        let max = a.iter().cloned().fold(0.0_f64, f64::max);
        let a = a.into_iter().map(|w| w / max).collect();
        Ok(PerfTableSpec { n, alpha, a })
    }

    /// 1-based indices `i` with `a_i = 1` (the set `N`).
    pub fn n_set(&self) -> Vec<usize> {
        (1..=self.n + 1)
            .filter(|&i| self.a[i - 1] > 1.0 - WEIGHT_TOL)
            .collect()
    }

    /// Number of maximal weights.
    pub fn m(&self) -> usize {
        self.n_set().len()
    }

    /// Largest index with maximal weight (`k*`).
    pub fn k_star(&self) -> usize {
        *self.n_set().last().expect("N is nonempty after normalization")
    }

    fn check_simplex(&self, t: &[f64]) -> Result<()> {
        if t.len() != self.n {
            return Err(Error::Domain(format!(
                "simplex point has dimension {}, expected {}",
                t.len(),
                self.n
            )));
        }
        let mut prev = 0.0;
        for &c in t {
            if c < prev - SIMPLEX_TOL || c > 1.0 + SIMPLEX_TOL {
                return Err(Error::Domain(format!(
                    "point {t:?} is not in the ordered simplex"
                )));
            }
            prev = c;
        }
        Ok(())
    }

    /// Augments a simplex point with the fixed endpoints `t_0 = 0` and
    /// `t_{n+1} = 1`.
    fn augment(&self, t: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n + 2);
        out.push(0.0);
        out.extend_from_slice(t);
        out.push(1.0);
        out
    }

    fn cov_unchecked(&self, s: &[f64], t: &[f64]) -> f64 {
        let sa = self.augment(s);
        let ta = self.augment(t);
        let mut acc = 0.0;
        for i in 1..=self.n + 1 {
            let w = self.a[i - 1];
            acc += w
                * w
                * fbm_increment_cov(self.alpha, sa[i - 1], sa[i], ta[i - 1], ta[i])
                    .expect("augmented simplex coordinates are admissible");
        }
        acc
    }

    /// Variance of the field at a simplex point.
    pub fn variance(&self, t: &[f64]) -> Result<f64> {
        self.check_simplex(t)?;
        let ta = self.augment(t);
        Ok((1..=self.n + 1)
            .map(|i| self.a[i - 1].powi(2) * (ta[i] - ta[i - 1]).powf(self.alpha))
            .sum())
    }

    /// Standard deviation of the field at a simplex point.
    pub fn sigma(&self, t: &[f64]) -> Result<f64> {
        Ok(self.variance(t)?.sqrt())
    }

    /// Covariance kernel over the simplex, for the dense sampler.
    pub fn kernel(&self) -> CovarianceKernel {
        let spec = self.clone();
        CovarianceKernel::new(
            self.n,
            format!("perf_table(n={}, alpha={}, a={:?})", self.n, self.alpha, self.a),
            None,
            move |s, t| spec.cov_unchecked(s, t),
        )
    }

    /// Maximal standard deviation `sigma*`.
    pub fn sigma_star(&self) -> f64 {
        if self.alpha < 1.0 {
            let p = 2.0 / (1.0 - self.alpha);
            let sum: f64 = self.a.iter().map(|&w| w.powf(p)).sum();
            sum.powf((1.0 - self.alpha) / 2.0)
        } else {
            1.0
        }
    }

    /// Optimizer report for the variance over the simplex.
    pub fn optimizer(&self) -> OptimizerReport {
        let m = self.m();
        if self.alpha < 1.0 {
            let p = 2.0 / (1.0 - self.alpha);
            let weights: Vec<f64> = self.a.iter().map(|&w| w.powf(p)).collect();
            let total: f64 = weights.iter().sum();
            let mut z = Vec::with_capacity(self.n);
            let mut acc = 0.0;
            for w in weights.iter().take(self.n) {
                acc += w;
                z.push(acc / total);
            }
            OptimizerReport {
                kind: OptimizerKind::UniquePoint,
                points: vec![z],
                sigma_star: self.sigma_star(),
                m,
                manifold_dim: 0,
            }
        } else if self.alpha == 1.0 {
            OptimizerReport {
                kind: OptimizerKind::PositiveMeasureSet,
                points: self.optimizer_manifold_mesh(10),
                sigma_star: 1.0,
                m,
                manifold_dim: m - 1,
            }
        } else {
            let n_set = self.n_set();
            let mut points = Vec::with_capacity(m);
            for &j in &n_set {
                if j < self.n + 1 {
                    // First 1 at coordinate j.
                    let mut z = vec![1.0; self.n];
                    for c in z.iter_mut().take(j - 1) {
                        *c = 0.0;
                    }
                    points.push(z);
                } else {
                    points.push(vec![0.0; self.n]);
                }
            }
            OptimizerReport {
                kind: OptimizerKind::FinitePointSet,
                points,
                sigma_star: 1.0,
                m,
                manifold_dim: 0,
            }
        }
    }

    /// Materializes a lattice mesh of the optimizer manifold
    /// `M = {t : sum_{j in N} |t_j - t_{j-1}| = 1}` at `alpha = 1`, by
    /// enumerating compositions of `steps` increments over the coordinates
    /// in `N`.
    fn optimizer_manifold_mesh(&self, steps: usize) -> Vec<Vec<f64>> {
        let n_set = self.n_set();
        let m = n_set.len();
        let mut points = Vec::new();
        let mut counts = vec![0usize; m];
        enumerate_compositions(steps, m, &mut counts, 0, &mut |counts| {
            let mut t = Vec::with_capacity(self.n);
            let mut cur = 0.0;
            for i in 1..=self.n {
                if let Some(pos) = n_set.iter().position(|&j| j == i) {
                    cur += counts[pos] as f64 / steps as f64;
                }
                t.push(cur.min(1.0));
            }
            points.push(t);
        });
        points.sort_by(|a, b| a.partial_cmp(b).unwrap());
        points.dedup();
        points
    }
}

fn enumerate_compositions(
    remaining: usize,
    parts: usize,
    counts: &mut [usize],
    idx: usize,
    f: &mut impl FnMut(&[usize]),
) {
    if idx + 1 == parts {
        counts[idx] = remaining;
        f(counts);
        return;
    }
    for c in 0..=remaining {
        counts[idx] = c;
        enumerate_compositions(remaining - c, parts, counts, idx + 1, f);
    }
}

/// Shape of the variance-optimizer set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerKind {
    UniquePoint,
    PositiveMeasureSet,
    FinitePointSet,
}

/// Where and how the variance attains its maximum.
#[derive(Debug, Clone)]
pub struct OptimizerReport {
    pub kind: OptimizerKind,
    /// The optimizer(s); for a positive-measure set, a materialized mesh.
    pub points: Vec<Vec<f64>>,
    pub sigma_star: f64,
    /// Number of maximal weights.
    pub m: usize,
    /// Dimension of the optimizer manifold (`m - 1` at `alpha = 1`).
    pub manifold_dim: usize,
}

/// Exact covariance of the performance-table field at two simplex points.
pub fn perf_cov(spec: &PerfTableSpec, s: &[f64], t: &[f64]) -> Result<f64> {
    spec.check_simplex(s)?;
    spec.check_simplex(t)?;
    Ok(spec.cov_unchecked(s, t))
}

fn require_alpha1(spec: &PerfTableSpec) -> Result<()> {
    if spec.alpha != 1.0 {
        return Err(Error::Usage(format!(
            "operation requires the alpha = 1 regime, spec has alpha = {}",
            spec.alpha
        )));
    }
    Ok(())
}

/// Ordered list of the 1-based coordinate indices carried by the transformed
/// vector `x` (all of `1..=n+1` except `k*`).
pub fn x_index_order(spec: &PerfTableSpec) -> Vec<usize> {
    let k = spec.k_star();
    (1..=spec.n + 1).filter(|&i| i != k).collect()
}

/// The coordinate transform of the `alpha = 1` analysis: maps the
/// transformed vector `x` (indexed by `x_index_order`) to a simplex point.
pub fn x_to_t(spec: &PerfTableSpec, x: &[f64]) -> Result<Vec<f64>> {
    require_alpha1(spec)?;
    if x.len() != spec.n {
        return Err(Error::Domain(format!(
            "x has dimension {}, expected {}",
            x.len(),
            spec.n
        )));
    }
    let order = x_index_order(spec);
    let xi = |i: usize| -> f64 {
        let pos = order.iter().position(|&j| j == i).expect("index in x");
        x[pos]
    };
    let n_set = spec.n_set();
    let k = spec.k_star();
    let mut t = vec![0.0; spec.n];
    for i in 1..=spec.n {
        t[i - 1] = if i >= k {
            1.0 - (i + 1..=spec.n + 1).map(xi).sum::<f64>()
        } else if n_set.contains(&i) {
            xi(i)
        } else {
            let lower = n_set.iter().rev().find(|&&j| j < i).copied().unwrap_or(0);
            (lower.max(1)..=i).map(xi).sum()
        };
    }
    spec.check_simplex(&t).map_err(|_| {
        Error::Domain(format!("x = {x:?} lies outside the transformed simplex domain"))
    })?;
    Ok(t)
}

/// Inverse transform: `x_i = t_i` for `i` in `N` below `k*`, and
/// `x_i = t_i - t_{i-1}` for `i` outside `N`.
pub fn t_to_x(spec: &PerfTableSpec, t: &[f64]) -> Result<Vec<f64>> {
    require_alpha1(spec)?;
    spec.check_simplex(t)?;
    let ta = spec.augment(t);
    let n_set = spec.n_set();
    Ok(x_index_order(spec)
        .into_iter()
        .map(|i| {
            if n_set.contains(&i) {
                ta[i]
            } else {
                ta[i] - ta[i - 1]
            }
        })
        .collect())
}

/// Evaluates the time-change map `s_i(x)` of the limiting field `W` for all
/// `i = 0..=n+1` (with `s_0 = 0`).
pub fn s_map(spec: &PerfTableSpec, x: &[f64]) -> Result<Vec<f64>> {
    require_alpha1(spec)?;
    if x.len() != spec.n {
        return Err(Error::Domain(format!(
            "x has dimension {}, expected {}",
            x.len(),
            spec.n
        )));
    }
    if x.iter().any(|&c| c < 0.0) {
        return Err(Error::Domain(format!("x = {x:?} must be componentwise >= 0")));
    }
    let order = x_index_order(spec);
    let xi = |i: usize| -> f64 {
        let pos = order.iter().position(|&j| j == i).expect("index in x");
        x[pos]
    };
    let n_set = spec.n_set();
    let k = spec.k_star();
    let mut s = vec![0.0; spec.n + 2];
    for i in 1..=spec.n + 1 {
        s[i] = if i >= k {
            (i + 1..=spec.n + 1).map(xi).sum()
        } else if n_set.contains(&i) {
            xi(i)
        } else {
            let lower = n_set.iter().rev().find(|&&j| j < i).copied().unwrap_or(0);
            (lower.max(1)..=i).map(xi).sum()
        };
    }
    Ok(s)
}

/// Exact increment variance `E[(W(x) - W(y))^2]` of the limiting field `W`,
/// computed from its Brownian representation through the `s_i` map.
pub fn w_increment_var(spec: &PerfTableSpec, x: &[f64], y: &[f64]) -> Result<f64> {
    let sx = s_map(spec, x)?;
    let sy = s_map(spec, y)?;
    let n_set = spec.n_set();
    let mut total = 0.0;
    for i in 1..=spec.n + 1 {
        if n_set.contains(&i) {
            // Independent Brownian motions at s_i and s_{i-1}.
            total += (sx[i] - sy[i]).abs() + (sx[i - 1] - sy[i - 1]).abs();
        } else {
            // Same Brownian motion over two intervals; expand the variance
            // of the increment difference with the min-kernel.
            let (a, b) = (sx[i], sx[i - 1]);
            let (c, d) = (sy[i], sy[i - 1]);
            let cross = a.min(c) - a.min(d) - b.min(c) + b.min(d);
            let w = spec.a[i - 1];
            total += w * w * ((a - b).abs() + (c - d).abs() - 2.0 * cross);
        }
    }
    Ok(0.5 * total)
}

/// The local expansions of the variance and correlation near the optimizer
/// set, one per regime.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Expansion {
    /// `alpha < 1` variance expansion at the unique optimizer.
    Var1,
    /// `alpha < 1` correlation expansion at the unique optimizer.
    R1,
    /// `alpha = 1` variance expansion near the optimizer manifold.
    Sigma21,
    /// `alpha = 1` correlation expansion near the optimizer manifold.
    R2,
    /// `alpha > 1` variance expansion at the optimizer corners.
    Var3,
}

impl Expansion {
    pub fn all() -> [Expansion; 5] {
        [
            Expansion::Var1,
            Expansion::R1,
            Expansion::Sigma21,
            Expansion::R2,
            Expansion::Var3,
        ]
    }

    /// Expansions applicable to a spec's regime.
    pub fn applicable(spec: &PerfTableSpec) -> Vec<Expansion> {
        if spec.alpha < 1.0 {
            vec![Expansion::Var1, Expansion::R1]
        } else if spec.alpha == 1.0 {
            vec![Expansion::Sigma21, Expansion::R2]
        } else {
            vec![Expansion::Var3]
        }
    }
}

impl std::fmt::Display for Expansion {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Expansion::Var1 => "var1",
            Expansion::R1 => "r1",
            Expansion::Sigma21 => "sigma21",
            Expansion::R2 => "r2",
            Expansion::Var3 => "var3",
        };
        f.write_str(s)
    }
}

/// Worst-case relative error of one expansion over the probe sample.
#[derive(Debug, Clone)]
pub struct ExpansionReport {
    pub expansion: Expansion,
    pub delta: f64,
    pub max_rel_err: f64,
    pub probes: usize,
}

/// Checks one expansion with `probe_count` random probes within distance
/// `delta` of the optimizer set.
pub fn check_expansion(
    spec: &PerfTableSpec,
    expansion: Expansion,
    delta: f64,
    probe_count: usize,
    seed: u64,
) -> Result<ExpansionReport> {
    if !(delta > 0.0 && delta < 0.5) {
        return Err(Error::Domain(format!("delta must lie in (0, 0.5), got {delta}")));
    }
    if probe_count == 0 {
        return Err(Error::Domain("probe_count must be >= 1".into()));
    }
    if !Expansion::applicable(spec).contains(&expansion) {
        return Err(Error::Usage(format!(
            "expansion {expansion} does not apply at alpha = {}",
            spec.alpha
        )));
    }
    let mut rng = rep_rng(seed, 0x45585041);
    let mut max_err = 0.0_f64;
    let mut probes = 0;
    while probes < probe_count {
        let (exact, approx) = match expansion {
            Expansion::Var1 => {
                let z0 = &spec.optimizer().points[0];
                let t = match probe_near(&mut rng, spec, z0, delta) {
                    Some(t) => t,
                    None => continue,
                };
                (1.0 - spec.sigma(&t)? / spec.sigma_star(), var1_approx(spec, &t))
            }
            Expansion::R1 => {
                let z0 = &spec.optimizer().points[0];
                let s = match probe_near(&mut rng, spec, z0, delta) {
                    Some(s) => s,
                    None => continue,
                };
                let t = match probe_near(&mut rng, spec, z0, delta) {
                    Some(t) => t,
                    None => continue,
                };
                let r = spec.cov_unchecked(&s, &t)
                    / (spec.sigma(&s)? * spec.sigma(&t)?);
                (1.0 - r, r1_approx(spec, &s, &t))
            }
            Expansion::Sigma21 => {
                let z = random_manifold_point(&mut rng, spec);
                let t = match probe_near(&mut rng, spec, &z, delta) {
                    Some(t) => t,
                    None => continue,
                };
                (1.0 - spec.sigma(&t)?, sigma21_approx(spec, &t))
            }
            Expansion::R2 => {
                let z = random_manifold_point(&mut rng, spec);
                let s = match probe_near(&mut rng, spec, &z, delta) {
                    Some(s) => s,
                    None => continue,
                };
                let t = match probe_near(&mut rng, spec, &z, delta) {
                    Some(t) => t,
                    None => continue,
                };
                let r = spec.cov_unchecked(&s, &t)
                    / (spec.sigma(&s)? * spec.sigma(&t)?);
                (1.0 - r, r2_approx(spec, &s, &t))
            }
            Expansion::Var3 => {
                let report = spec.optimizer();
                let corner = &report.points[probes % report.points.len()];
                let t = match probe_near(&mut rng, spec, corner, delta) {
                    Some(t) => t,
                    None => continue,
                };
                (1.0 - spec.sigma(&t)?, var3_approx(spec, &t, corner))
            }
        };
        probes += 1;
        if exact.abs() < 1e-13 && approx.abs() < 1e-13 {
            continue;
        }
        max_err = max_err.max((approx / exact - 1.0).abs());
    }
    Ok(ExpansionReport {
        expansion,
        delta,
        max_rel_err: max_err,
        probes,
    })
}

/// Checks every expansion applicable to the spec's regime.
pub fn check_expansions(
    spec: &PerfTableSpec,
    delta: f64,
    probe_count: usize,
    seed: u64,
) -> Result<Vec<ExpansionReport>> {
    Expansion::applicable(spec)
        .into_iter()
        .map(|e| check_expansion(spec, e, delta, probe_count, seed))
        .collect()
}

/// Rejection-samples a simplex point within Euclidean distance `delta` of
/// `center`.
fn probe_near(
    rng: &mut rand_chacha::ChaCha8Rng,
    spec: &PerfTableSpec,
    center: &[f64],
    delta: f64,
) -> Option<Vec<f64>> {
    let off: Vec<f64> = (0..spec.n).map(|_| rng.gen_range(-delta..delta)).collect();
    let norm: f64 = off.iter().map(|&c| c * c).sum::<f64>().sqrt();
    if norm > delta || norm == 0.0 {
        return None;
    }
    let t: Vec<f64> = center.iter().zip(off.iter()).map(|(&c, &o)| c + o).collect();
    if spec.check_simplex(&t).is_ok() {
        Some(t)
    } else {
        None
    }
}

/// Random interior point of the `alpha = 1` optimizer manifold: positive
/// increments over `N`, zero elsewhere.
fn random_manifold_point(rng: &mut rand_chacha::ChaCha8Rng, spec: &PerfTableSpec) -> Vec<f64> {
    let n_set = spec.n_set();
    let raw: Vec<f64> = n_set.iter().map(|_| 1.0 + rng.gen::<f64>()).collect();
    let total: f64 = raw.iter().sum();
    let mut t = Vec::with_capacity(spec.n);
    let mut cur = 0.0;
    for i in 1..=spec.n {
        if let Some(pos) = n_set.iter().position(|&j| j == i) {
            cur += raw[pos] / total;
        }
        t.push(cur.min(1.0));
    }
    t
}

fn var1_approx(spec: &PerfTableSpec, t: &[f64]) -> f64 {
    let p = 2.0 / (1.0 - spec.alpha);
    let sum_w: f64 = spec.a.iter().map(|&w| w.powf(p)).sum();
    let z = &spec.optimizer().points[0];
    let za = spec.augment(z);
    let ta = spec.augment(t);
    let quad: f64 = (1..=spec.n + 1)
        .map(|i| {
            let d = (ta[i] - za[i]) - (ta[i - 1] - za[i - 1]);
            spec.a[i - 1].powf(-p) * d * d
        })
        .sum();
    spec.alpha * (1.0 - spec.alpha) * sum_w / 4.0 * quad
}

fn r1_approx(spec: &PerfTableSpec, s: &[f64], t: &[f64]) -> f64 {
    let s2 = spec.sigma_star().powi(2);
    let sum: f64 = (1..=spec.n)
        .map(|i| {
            (spec.a[i - 1].powi(2) + spec.a[i].powi(2))
                * (s[i - 1] - t[i - 1]).abs().powf(spec.alpha)
        })
        .sum();
    sum / (2.0 * s2)
}

fn sigma21_approx(spec: &PerfTableSpec, t: &[f64]) -> f64 {
    let ta = spec.augment(t);
    let n_set = spec.n_set();
    0.5 * (1..=spec.n + 1)
        .filter(|i| !n_set.contains(i))
        .map(|j| (1.0 - spec.a[j - 1].powi(2)) * (ta[j] - ta[j - 1]).abs())
        .sum::<f64>()
}

fn r2_approx(spec: &PerfTableSpec, s: &[f64], t: &[f64]) -> f64 {
    let sa = spec.augment(s);
    let ta = spec.augment(t);
    0.5 * (1..=spec.n + 1)
        .map(|i| {
            let move_cost = (ta[i - 1] - sa[i - 1]).abs() + (ta[i] - sa[i]).abs();
            let len_cost = (ta[i] - ta[i - 1]).abs() + (sa[i] - sa[i - 1]).abs();
            spec.a[i - 1].powi(2) * move_cost.min(len_cost)
        })
        .sum::<f64>()
}

fn var3_approx(spec: &PerfTableSpec, t: &[f64], corner: &[f64]) -> f64 {
    // Identify the corner's index j in N from its shape.
    let n_set = spec.n_set();
    let j = *n_set
        .iter()
        .find(|&&j| {
            if j < spec.n + 1 {
                corner[j - 1] > 0.5 && (j == 1 || corner[j - 2] < 0.5)
            } else {
                corner.iter().all(|&c| c < 0.5)
            }
        })
        .expect("corner matches one optimizer index");
    let ta = spec.augment(t);
    let main = spec.alpha * (ta[j] - ta[j - 1] - 1.0).abs();
    let rest: f64 = (1..=spec.n + 1)
        .filter(|&i| i != j)
        .map(|i| spec.a[i - 1].powi(2) * (ta[i] - ta[i - 1]).abs().powf(spec.alpha))
        .sum();
    0.5 * (main - rest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn spec(n: usize, alpha: f64, a: &[f64]) -> PerfTableSpec {
        PerfTableSpec::new(n, alpha, a.to_vec()).unwrap()
    }

    #[test]
    fn weights_normalized() {
        let s = spec(1, 1.0, &[2.0, 1.0]);
        assert_eq!(s.a, vec![1.0, 0.5]);
        assert_eq!(s.n_set(), vec![1]);
        assert_eq!(s.k_star(), 1);
    }

    #[test]
    fn variance_hand_values() {
        let s = spec(1, 1.0, &[1.0, 1.0]);
        assert_relative_eq!(s.variance(&[0.5]).unwrap(), 1.0);
        let s = spec(1, 0.5, &[1.0, 1.0]);
        assert_relative_eq!(
            s.variance(&[0.25]).unwrap(),
            0.25_f64.sqrt() + 0.75_f64.sqrt(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn cov_diagonal_matches_variance() {
        let s = spec(2, 1.3, &[1.0, 0.7, 0.4]);
        let t = [0.2, 0.6];
        assert_relative_eq!(
            perf_cov(&s, &t, &t).unwrap(),
            s.variance(&t).unwrap(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn cov_rejects_non_simplex() {
        let s = spec(2, 1.0, &[1.0, 1.0, 1.0]);
        assert!(perf_cov(&s, &[0.5, 0.2], &[0.1, 0.3]).is_err());
    }

    #[test]
    fn optimizer_alpha_below_one() {
        let s = spec(1, 0.5, &[1.0, 1.0]);
        let rep = s.optimizer();
        assert_eq!(rep.kind, OptimizerKind::UniquePoint);
        assert_relative_eq!(rep.points[0][0], 0.5);
        assert_relative_eq!(rep.sigma_star, 2.0_f64.powf(0.25), max_relative = 1e-12);
    }

    #[test]
    fn optimizer_alpha_above_one() {
        let s = spec(2, 1.5, &[1.0, 0.5, 1.0]);
        let rep = s.optimizer();
        assert_eq!(rep.kind, OptimizerKind::FinitePointSet);
        assert_eq!(rep.m, 2);
        assert_eq!(rep.points, vec![vec![1.0, 1.0], vec![0.0, 0.0]]);
        assert_eq!(rep.sigma_star, 1.0);
    }

    #[test]
    fn optimizer_alpha_one_full_manifold() {
        let s = spec(2, 1.0, &[1.0, 1.0, 1.0]);
        let rep = s.optimizer();
        assert_eq!(rep.kind, OptimizerKind::PositiveMeasureSet);
        assert_eq!(rep.m, 3);
        assert_eq!(rep.manifold_dim, 2);
        // With m = n + 1 the variance is identically 1.
        for t in [[0.1, 0.7], [0.3, 0.3], [0.0, 1.0]] {
            assert_relative_eq!(s.variance(&t).unwrap(), 1.0, max_relative = 1e-12);
        }
        // Every mesh point of M has variance 1.
        for p in &rep.points {
            assert_relative_eq!(s.variance(p).unwrap(), 1.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn optimizer_brute_force_agreement() {
        // Grid argmax of the variance lies within one mesh cell of the
        // reported optimizer(s), and the grid max brackets sigma*^2.
        let mesh = 0.005;
        let mut rng = rep_rng(77, 0);
        for alpha in [0.5, 1.5] {
            for n in [1usize, 2] {
                let a: Vec<f64> = (0..=n).map(|_| 0.3 + 0.7 * rng.gen::<f64>()).collect();
                let s = PerfTableSpec::new(n, alpha, a).unwrap();
                let grid = crate::grid::GridSpec::simplex(n, mesh).unwrap();
                let (mut best, mut best_t) = (f64::NEG_INFINITY, vec![]);
                for p in &grid.points {
                    let v = s.variance(p).unwrap();
                    if v > best {
                        best = v;
                        best_t = p.clone();
                    }
                }
                let rep = s.optimizer();
                let dist = rep
                    .points
                    .iter()
                    .map(|z| {
                        z.iter()
                            .zip(best_t.iter())
                            .map(|(a, b)| (a - b).abs())
                            .fold(0.0_f64, f64::max)
                    })
                    .fold(f64::INFINITY, f64::min);
                assert!(dist <= mesh + 1e-12, "argmax {best_t:?} vs {:?}", rep.points);
                let star2 = rep.sigma_star * rep.sigma_star;
                assert!(best <= star2 + 1e-12);
                assert!(star2 <= best + 10.0 * mesh, "sigma*^2 {star2} grid max {best}");
            }
        }
    }

    #[test]
    fn transform_hand_example() {
        let s = spec(2, 1.0, &[1.0, 0.5, 1.0]);
        assert_eq!(s.k_star(), 3);
        let t = x_to_t(&s, &[0.3, 0.1]).unwrap();
        assert_relative_eq!(t[0], 0.3);
        assert_relative_eq!(t[1], 0.4);
        let x = t_to_x(&s, &t).unwrap();
        assert_relative_eq!(x[0], 0.3);
        assert_relative_eq!(x[1], 0.1);
    }

    #[test]
    fn transform_m_equals_n_plus_one() {
        // All weights maximal: t_i = x_i below k*, suffix sums at k* and up.
        let s = spec(2, 1.0, &[1.0, 1.0, 1.0]);
        assert_eq!(s.k_star(), 3);
        let t = x_to_t(&s, &[0.2, 0.5]).unwrap();
        assert_relative_eq!(t[0], 0.2);
        assert_relative_eq!(t[1], 0.5);
    }

    #[test]
    fn transform_round_trip_random() {
        let s = spec(2, 1.0, &[1.0, 0.5, 1.0]);
        let mut rng = rep_rng(3, 1);
        let mut done = 0;
        while done < 100 {
            let x = [rng.gen::<f64>(), rng.gen::<f64>()];
            let t = match x_to_t(&s, &x) {
                Ok(t) => t,
                Err(_) => continue,
            };
            let back = t_to_x(&s, &t).unwrap();
            for (a, b) in x.iter().zip(back.iter()) {
                assert!((a - b).abs() < 1e-14);
            }
            done += 1;
        }
    }

    #[test]
    fn transform_rejects_outside_domain() {
        let s = spec(2, 1.0, &[1.0, 0.5, 1.0]);
        // x2 so large that t leaves the simplex.
        assert!(x_to_t(&s, &[0.9, 0.9]).is_err());
    }

    #[test]
    fn w_variance_zero_iff_equal_s_image() {
        let s = spec(2, 1.0, &[1.0, 0.5, 1.0]);
        let x = [0.4, 0.2];
        assert_relative_eq!(w_increment_var(&s, &x, &x).unwrap(), 0.0);
        let y = [0.4, 0.3];
        assert!(w_increment_var(&s, &x, &y).unwrap() > 0.0);
    }

    #[test]
    fn w_variance_m_equals_n_plus_one_is_l1() {
        // n=1, a=(1,1): Var(W(x) - W(y)) = |x - y|.
        let s = spec(1, 1.0, &[1.0, 1.0]);
        assert_relative_eq!(
            w_increment_var(&s, &[0.7], &[0.2]).unwrap(),
            0.5,
            max_relative = 1e-12
        );
    }

    #[test]
    fn w_variance_scaling() {
        let s = spec(2, 1.0, &[1.0, 0.5, 1.0]);
        let x = [0.8, 0.1];
        let y = [0.2, 0.45];
        let base = w_increment_var(&s, &x, &y).unwrap();
        for c in [0.5, 2.0, 3.7] {
            let xc: Vec<f64> = x.iter().map(|&v| c * v).collect();
            let yc: Vec<f64> = y.iter().map(|&v| c * v).collect();
            assert_relative_eq!(
                w_increment_var(&s, &xc, &yc).unwrap(),
                c * base,
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn w_variance_matches_min_form() {
        // Independent oracle: the limiting correlation display written in
        // terms of the s-map differences and interval lengths.
        let specs = [
            spec(2, 1.0, &[1.0, 0.5, 1.0]),
            spec(2, 1.0, &[0.5, 1.0, 0.8]),
            spec(3, 1.0, &[1.0, 0.6, 1.0, 0.9]),
            spec(1, 1.0, &[1.0, 1.0]),
        ];
        let mut rng = rep_rng(9, 2);
        for s in &specs {
            for _ in 0..100 {
                let x: Vec<f64> = (0..s.n).map(|_| 2.0 * rng.gen::<f64>()).collect();
                let y: Vec<f64> = (0..s.n).map(|_| 2.0 * rng.gen::<f64>()).collect();
                let sx = s_map(s, &x).unwrap();
                let sy = s_map(s, &y).unwrap();
                let n_set = s.n_set();
                let mut min_form = 0.0;
                for i in 1..=s.n + 1 {
                    let move_cost = (sx[i] - sy[i]).abs() + (sx[i - 1] - sy[i - 1]).abs();
                    if n_set.contains(&i) {
                        min_form += move_cost;
                    } else {
                        let len_cost = (sx[i] - sx[i - 1]).abs() + (sy[i] - sy[i - 1]).abs();
                        min_form += s.a[i - 1].powi(2) * move_cost.min(len_cost);
                    }
                }
                min_form *= 0.5;
                let direct = w_increment_var(s, &x, &y).unwrap();
                assert!(
                    (direct - min_form).abs() <= 1e-12 * direct.max(1.0),
                    "direct {direct} vs min-form {min_form}"
                );
            }
        }
    }

    #[test]
    fn expansions_tighten() {
        // error(delta/10) < error(delta) for every applicable expansion.
        let cases = [
            spec(1, 0.5, &[1.0, 0.8]),
            spec(1, 1.0, &[1.0, 0.5]),
            spec(2, 1.5, &[1.0, 0.5, 1.0]),
        ];
        for s in &cases {
            for e in Expansion::applicable(s) {
                let coarse = check_expansion(s, e, 0.1, 200, 41).unwrap();
                let fine = check_expansion(s, e, 0.01, 200, 41).unwrap();
                assert!(
                    fine.max_rel_err < coarse.max_rel_err,
                    "{e}: fine {} coarse {}",
                    fine.max_rel_err,
                    coarse.max_rel_err
                );
            }
        }
    }

    #[test]
    fn expansion_regime_mismatch_is_usage_error() {
        let s = spec(1, 1.0, &[1.0, 0.5]);
        assert!(matches!(
            check_expansion(&s, Expansion::Var1, 0.05, 10, 1),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn sigma21_vanishes_on_manifold() {
        // On M both the exact deficit and the expansion are zero.
        let s = spec(1, 1.0, &[1.0, 0.5]);
        // N = {1}; M requires t_1 = 1.
        let t = [1.0];
        assert_relative_eq!(1.0 - s.sigma(&t).unwrap(), 0.0, epsilon = 1e-12);
        assert_relative_eq!(sigma21_approx(&s, &t), 0.0, epsilon = 1e-12);
    }
}
