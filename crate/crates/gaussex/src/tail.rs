//! Supremum-tail Monte Carlo estimation and empirical-vs-asymptotic
//! comparison tables.
//!
//! Tail probabilities are estimated as the fraction of sampled grid-suprema
//! exceeding the level, with 95% Wilson intervals. The estimate is unbiased
//! for the discretized supremum and therefore lower-bounds the continuous
//! tail.

use serde::{Deserialize, Serialize};

use crate::asymptotics::AsymptoticFormula;
use crate::chi::{chi_sup_sample, ChiSpec};
use crate::constants::{ConstantEstimate, ConstantKind};
use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::kernels::CovarianceKernel;
use crate::perf_table::PerfTableSpec;
use crate::sampling::path_functional_samples;

/// A Monte Carlo estimate of one tail probability.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TailEstimate {
    pub u: f64,
    pub p_hat: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub n_reps: u64,
    pub grid: String,
    pub seed: u64,
}

/// One comparison row of a [`ResultRecord`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RatioRow {
    pub u: f64,
    pub p_hat: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub asymptotic: f64,
    pub ratio: f64,
    /// Set when the ratio confidence interval excludes `[0.2, 5]` entirely,
    /// indicating a model mismatch rather than Monte Carlo noise.
    pub mismatch_warning: bool,
}

/// Persistent record of one comparison experiment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResultRecord {
    pub config_hash: String,
    pub timestamp: String,
    pub rows: Vec<RatioRow>,
    pub constants: Vec<ConstantEstimate>,
    pub version: String,
    pub grid: String,
}

/// A named Gaussian field that the harness can draw supremum samples from.
#[derive(Debug, Clone)]
pub enum FieldModel {
    PerfTable(PerfTableSpec),
    Chi(ChiSpec),
    /// A user kernel with an explicit (possibly empty) optimizer point list;
    /// an empty list disables the coverage precheck.
    Kernel {
        kernel: CovarianceKernel,
        optimizer: Vec<Vec<f64>>,
    },
}

impl FieldModel {
    pub fn description(&self) -> String {
        match self {
            FieldModel::PerfTable(spec) => {
                format!("perf_table(n={}, alpha={}, a={:?})", spec.n, spec.alpha, spec.a)
            }
            FieldModel::Chi(spec) => format!(
                "chi(n={}, alpha={}, a={}, b={}, y={})",
                spec.n, spec.alpha, spec.a, spec.b, spec.y_kernel.name
            ),
            FieldModel::Kernel { kernel, .. } => format!("kernel({})", kernel.name),
        }
    }

    /// Representative points of the variance-maximizer set, in the model's
    /// grid coordinates.
    pub fn optimizer_points(&self) -> Vec<Vec<f64>> {
        match self {
            FieldModel::PerfTable(spec) => spec.optimizer().points,
            // The chi standard deviation 1/(1 + b t^alpha) peaks at t = 0.
            FieldModel::Chi(_) => vec![vec![0.0]],
            FieldModel::Kernel { optimizer, .. } => optimizer.clone(),
        }
    }

    /// Draws `n_reps` supremum samples over the grid.
    pub fn sup_samples(&self, grid: &GridSpec, n_reps: u64, seed: u64) -> Result<Vec<f64>> {
        match self {
            FieldModel::PerfTable(spec) => {
                let kernel = spec.kernel();
                path_functional_samples(&kernel, grid, n_reps, seed, |path| {
                    path.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
                })
            }
            FieldModel::Chi(spec) => chi_sup_sample(spec, grid, n_reps, seed),
            FieldModel::Kernel { kernel, .. } => {
                path_functional_samples(kernel, grid, n_reps, seed, |path| {
                    path.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
                })
            }
        }
    }
}

/// 95% Wilson score interval for a binomial proportion.
pub fn wilson_interval(successes: u64, n: u64) -> (f64, f64) {
    let z = 1.959963984540054_f64;
    let nf = n as f64;
    let p = successes as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

fn check_optimizer_coverage(model: &FieldModel, grid: &GridSpec) -> Result<()> {
    let targets = model.optimizer_points();
    if targets.is_empty() {
        return Ok(());
    }
    let threshold = 2.0 * grid.mesh_hint() + 1e-12;
    let covered = targets.iter().any(|z| {
        grid.points.iter().any(|p| {
            let d2: f64 = p
                .iter()
                .zip(z.iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            d2.sqrt() <= threshold
        })
    });
    if covered {
        Ok(())
    } else {
        Err(Error::Usage(format!(
            "grid has no point within {threshold:.6} of the optimizer set; \
             refine the grid near the maximizer"
        )))
    }
}

fn tail_from_sups(sups: &[f64], u: f64, grid: &GridSpec, seed: u64) -> TailEstimate {
    let n = sups.len() as u64;
    let hits = sups.iter().filter(|&&s| s > u).count() as u64;
    let (lo, hi) = wilson_interval(hits, n);
    TailEstimate {
        u,
        p_hat: hits as f64 / n as f64,
        ci_lo: lo,
        ci_hi: hi,
        n_reps: n,
        grid: grid.summary(),
        seed,
    }
}

/// Estimates `P(sup over the grid > u)` by Monte Carlo.
///
/// Requires the grid to reach the model's optimizer neighborhood (at least
/// one point within twice the mesh of the optimizer set).
pub fn estimate_tail(
    model: &FieldModel,
    grid: &GridSpec,
    u: f64,
    n_reps: u64,
    seed: u64,
) -> Result<TailEstimate> {
    check_optimizer_coverage(model, grid)?;
    let sups = model.sup_samples(grid, n_reps, seed)?;
    Ok(tail_from_sups(&sups, u, grid, seed))
}

/// Largest level at which the formula still predicts at least `min_p`.
fn max_feasible_u(formula: &AsymptoticFormula, min_p: f64, u_max: f64) -> f64 {
    let (mut lo, mut hi) = (1e-6, u_max);
    if formula.evaluate(hi) >= min_p {
        return hi;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if formula.evaluate(mid) >= min_p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Runs one supremum-sampling pass and compares the empirical tail to the
/// asymptotic formula at every level.
///
/// Levels must satisfy the resolvability guard `formula(u) >= 10 / n_reps`
/// at the largest u; ratios use the midpoint estimate, and rows whose ratio
/// interval excludes `[0.2, 5]` carry a mismatch warning rather than
/// failing.
pub fn ratio_table(
    model: &FieldModel,
    formula: &AsymptoticFormula,
    u_levels: &[f64],
    grid: &GridSpec,
    n_reps: u64,
    seed: u64,
) -> Result<ResultRecord> {
    if u_levels.is_empty() {
        return Err(Error::Usage("at least one u level is required".into()));
    }
    for w in u_levels.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::Usage("u levels must be strictly increasing".into()));
        }
    }
    let u_max = *u_levels.last().unwrap();
    let min_p = 10.0 / n_reps as f64;
    if formula.evaluate(u_max) < min_p {
        return Err(Error::Usage(format!(
            "predicted tail at u = {u_max} is below 10/n_reps = {min_p:.3e}; \
             maximal feasible u is {:.4}",
            max_feasible_u(formula, min_p, u_max)
        )));
    }
    check_optimizer_coverage(model, grid)?;
    let sups = model.sup_samples(grid, n_reps, seed)?;
    let rows = u_levels
        .iter()
        .map(|&u| {
            let est = tail_from_sups(&sups, u, grid, seed);
            let asymptotic = formula.evaluate(u);
            let ratio = est.p_hat / asymptotic;
            let mismatch_warning =
                est.ci_hi / asymptotic < 0.2 || est.ci_lo / asymptotic > 5.0;
            RatioRow {
                u,
                p_hat: est.p_hat,
                ci_lo: est.ci_lo,
                ci_hi: est.ci_hi,
                asymptotic,
                ratio,
                mismatch_warning,
            }
        })
        .collect();
    Ok(ResultRecord {
        config_hash: record_hash(model, formula, u_levels, grid, n_reps, seed),
        timestamp: String::new(),
        rows,
        constants: Vec::new(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        grid: grid.summary(),
    })
}

fn record_hash(
    model: &FieldModel,
    formula: &AsymptoticFormula,
    u_levels: &[f64],
    grid: &GridSpec,
    n_reps: u64,
    seed: u64,
) -> String {
    use sha2::{Digest, Sha256};
    let mut h = Sha256::new();
    h.update(model.description().as_bytes());
    h.update(format!(
        "|C={};e={};s={}|u={u_levels:?}|reps={n_reps}|seed={seed}|{}",
        formula.constant_c,
        formula.u_exponent,
        formula.sigma_star,
        grid.summary()
    ));
    format!("{:x}", h.finalize())
}

/// Localization band width heuristic for grid placement around the
/// optimizer, `(ln u / u)^{2/beta}`.
pub fn default_band_width(u: f64, beta: f64) -> f64 {
    (u.ln() / u).powf(2.0 / beta)
}

/// Extrapolates a sequence of window estimates at increasing horizons to the
/// infinite-horizon constant.
///
/// For Pickands-type constants (normalization `lambda^k`, `k` from
/// `norm_power`) the last two window totals give the slope
/// `((T_2^{1/k} - T_1^{1/k}) / (lambda_2 - lambda_1))^k`, which for `k = 1`
/// is the usual two-point difference quotient. Piterbarg-type constants have
/// a finite-horizon limit already, so the larger-horizon estimate is
/// returned unchanged. Standard errors propagate by quadrature through the
/// delta method.
pub fn lambda_extrapolate(estimates: &[ConstantEstimate]) -> Result<ConstantEstimate> {
    if estimates.len() < 2 {
        return Err(Error::Usage("need at least two estimates".into()));
    }
    let kind = estimates[0].kind;
    let mesh = estimates[0].mesh;
    for e in estimates {
        if e.kind != kind {
            return Err(Error::Usage("estimates mix constant kinds".into()));
        }
        if (e.mesh - mesh).abs() > 1e-12 {
            return Err(Error::Usage("estimates mix meshes".into()));
        }
    }
    for w in estimates.windows(2) {
        if w[1].lambda <= w[0].lambda {
            return Err(Error::Usage("horizons must be strictly increasing".into()));
        }
    }
    match kind {
        ConstantKind::Piterbarg | ConstantKind::GeneralizedPiterbarg => {
            let mut out = estimates.last().unwrap().clone();
            out.extrapolated = true;
            Ok(out)
        }
        ConstantKind::Pickands | ConstantKind::HW => {
            let e1 = &estimates[estimates.len() - 2];
            let e2 = &estimates[estimates.len() - 1];
            let k = e2.norm_power.max(1) as f64;
            let (l1, l2) = (e1.lambda, e2.lambda);
            let t1 = l1.powf(k) * e1.value;
            let t2 = l2.powf(k) * e2.value;
            let dl = l2 - l1;
            let slope_root = ((t2.powf(1.0 / k) - t1.powf(1.0 / k)) / dl).max(0.0);
            let value = slope_root.powf(k);
            // Delta method through T_i -> T_i^{1/k} -> slope^k.
            let dkm1 = if k == 1.0 { 1.0 } else { slope_root.powf(k - 1.0) };
            let g2 = dkm1 * t2.powf(1.0 / k - 1.0) * l2.powf(k) / dl;
            let g1 = dkm1 * t1.powf(1.0 / k - 1.0) * l1.powf(k) / dl;
            let stderr = ((g2 * e2.stderr).powi(2) + (g1 * e1.stderr).powi(2)).sqrt();
            let mut out = e2.clone();
            out.value = value;
            out.stderr = stderr;
            out.extrapolated = true;
            Ok(out)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use crate::sampling::rep_rng;

    fn point_model() -> (FieldModel, GridSpec) {
        let kernel = CovarianceKernel::fbm(1.0).unwrap();
        let grid = GridSpec::interval_from_points(vec![1.0]).unwrap();
        let model = FieldModel::Kernel {
            kernel,
            optimizer: vec![vec![1.0]],
        };
        (model, grid)
    }

    #[test]
    fn wilson_basic_shape() {
        let (lo, hi) = wilson_interval(25, 1000);
        assert!(lo < 0.025 && 0.025 < hi);
        let (lo2, hi2) = wilson_interval(2500, 100_000);
        assert!(hi2 - lo2 < hi - lo, "interval must shrink with n");
        let (lo0, _) = wilson_interval(0, 100);
        assert!(lo0.abs() < 1e-12);
        let (_, hi1) = wilson_interval(100, 100);
        assert!((hi1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn wilson_coverage_meta_test() {
        for p in [0.001, 0.025] {
            let mut covered = 0;
            for meta in 0..1000u64 {
                let mut rng = rep_rng(77, meta);
                let n = 10_000u64;
                let mut hits = 0u64;
                for _ in 0..n {
                    if rng.gen::<f64>() < p {
                        hits += 1;
                    }
                }
                let (lo, hi) = wilson_interval(hits, n);
                if lo <= p && p <= hi {
                    covered += 1;
                }
            }
            assert!(covered >= 930, "coverage {covered}/1000 at p = {p}");
        }
    }

    #[test]
    fn single_point_normal_tail() {
        let (model, grid) = point_model();
        let est = estimate_tail(&model, &grid, 1.959964, 100_000, 17).unwrap();
        assert!(
            (est.p_hat - 0.025).abs() < 0.003,
            "p_hat {} vs psi oracle 0.025",
            est.p_hat
        );
        assert!(est.ci_lo <= est.p_hat && est.p_hat <= est.ci_hi);
    }

    #[test]
    fn huge_negative_level_is_certain() {
        let (model, grid) = point_model();
        let est = estimate_tail(&model, &grid, -1e6, 1000, 3).unwrap();
        assert_eq!(est.p_hat, 1.0);
    }

    #[test]
    fn nested_grids_monotone_shared_seed() {
        let kernel = CovarianceKernel::fbm(0.8).unwrap();
        let model = FieldModel::Kernel {
            kernel,
            optimizer: vec![vec![1.0]],
        };
        let coarse = GridSpec::interval(0.0, 1.0, 0.125).unwrap();
        let fine = coarse.refined().unwrap();
        let pc = estimate_tail(&model, &coarse, 1.5, 5000, 19).unwrap();
        let pf = estimate_tail(&model, &fine, 1.5, 5000, 19).unwrap();
        assert!(
            pf.p_hat >= pc.p_hat,
            "fine {} < coarse {}",
            pf.p_hat,
            pc.p_hat
        );
    }

    #[test]
    fn coverage_precheck_rejects_distant_grid() {
        let spec = PerfTableSpec::new(2, 1.5, vec![1.0, 0.5, 1.0]).unwrap();
        let model = FieldModel::PerfTable(spec);
        // Optimizer corners are (1, 1) and (0, 0); a grid stuck near the
        // center misses both.
        let grid = GridSpec::simplex_from_points(
            2,
            vec![vec![0.5, 0.5], vec![0.5, 0.51], vec![0.49, 0.5]],
        )
        .unwrap();
        assert!(matches!(
            estimate_tail(&model, &grid, 1.0, 10, 0),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn ratio_table_resolvability_guard() {
        let (model, grid) = point_model();
        let formula = AsymptoticFormula {
            constant_c: 1.0,
            u_exponent: 0.0,
            sigma_star: 1.0,
            description: "psi".into(),
            factors: vec![],
        };
        let err = ratio_table(&model, &formula, &[3.0, 20.0], &grid, 1000, 1).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("maximal feasible u"), "{msg}");
    }

    #[test]
    fn ratio_table_single_point_near_one() {
        let (model, grid) = point_model();
        let formula = AsymptoticFormula {
            constant_c: 1.0,
            u_exponent: 0.0,
            sigma_star: 1.0,
            description: "psi".into(),
            factors: vec![],
        };
        let record =
            ratio_table(&model, &formula, &[1.5, 2.0, 2.5], &grid, 200_000, 23).unwrap();
        for row in &record.rows {
            assert!(row.asymptotic > 0.0 && row.ratio.is_finite());
            assert!(
                (row.ratio - 1.0).abs() < 0.1,
                "u {}: ratio {}",
                row.u,
                row.ratio
            );
            assert!(!row.mismatch_warning);
        }
        // Determinism: rerun gives the identical record body.
        let again =
            ratio_table(&model, &formula, &[1.5, 2.0, 2.5], &grid, 200_000, 23).unwrap();
        assert_eq!(
            serde_json::to_string(&record.rows).unwrap(),
            serde_json::to_string(&again.rows).unwrap()
        );
        assert_eq!(record.config_hash, again.config_hash);
    }

    fn pickands_like(value: f64, stderr: f64, lambda: f64, norm_power: u32) -> ConstantEstimate {
        ConstantEstimate {
            kind: if norm_power == 1 {
                ConstantKind::Pickands
            } else {
                ConstantKind::HW
            },
            value,
            stderr,
            lambda,
            mesh: 0.02,
            n_reps: 100,
            extrapolated: false,
            drift: None,
            norm_power,
            trunc_sensitivity: 0.0,
        }
    }

    #[test]
    fn extrapolate_equal_inputs_fixed_point() {
        let e1 = pickands_like(0.9, 0.01, 10.0, 1);
        let e2 = pickands_like(0.9, 0.01, 20.0, 1);
        let out = lambda_extrapolate(&[e1, e2]).unwrap();
        assert!((out.value - 0.9).abs() < 1e-12);
        assert!(out.extrapolated);
    }

    #[test]
    fn extrapolate_slope_removes_offset_bias() {
        // Window totals T = lambda * v with v = 1 - c / lambda extrapolate
        // exactly to 1.
        let c = 0.8;
        let e1 = pickands_like(1.0 - c / 10.0, 0.0, 10.0, 1);
        let e2 = pickands_like(1.0 - c / 20.0, 0.0, 20.0, 1);
        let out = lambda_extrapolate(&[e1, e2]).unwrap();
        assert!((out.value - 1.0).abs() < 1e-12, "value {}", out.value);
    }

    #[test]
    fn extrapolate_root_slope_power_two() {
        // k = 2: totals lambda^2 v with sqrt-totals lambda - c extrapolate
        // to 1 as well.
        let c = 1.5;
        let v = |l: f64| ((l - c) / l).powi(2);
        let e1 = pickands_like(v(6.0), 0.0, 6.0, 2);
        let e2 = pickands_like(v(12.0), 0.0, 12.0, 2);
        let out = lambda_extrapolate(&[e1, e2]).unwrap();
        assert!((out.value - 1.0).abs() < 1e-12, "value {}", out.value);
    }

    #[test]
    fn extrapolate_piterbarg_returns_last() {
        let mut e1 = pickands_like(1.3, 0.01, 2.0, 1);
        let mut e2 = pickands_like(1.27, 0.01, 4.0, 1);
        e1.kind = ConstantKind::Piterbarg;
        e2.kind = ConstantKind::Piterbarg;
        let out = lambda_extrapolate(&[e1, e2.clone()]).unwrap();
        assert_eq!(out.value, e2.value);
        assert!(out.extrapolated);
    }

    #[test]
    fn extrapolate_guards() {
        let e1 = pickands_like(0.9, 0.01, 10.0, 1);
        assert!(lambda_extrapolate(&[e1.clone()]).is_err());
        let mut mixed = pickands_like(0.9, 0.01, 20.0, 1);
        mixed.kind = ConstantKind::Piterbarg;
        assert!(lambda_extrapolate(&[e1.clone(), mixed]).is_err());
        let mut other_mesh = pickands_like(0.9, 0.01, 20.0, 1);
        other_mesh.mesh = 0.05;
        assert!(lambda_extrapolate(&[e1.clone(), other_mesh]).is_err());
        let shrinking = pickands_like(0.9, 0.01, 5.0, 1);
        assert!(lambda_extrapolate(&[e1, shrinking]).is_err());
    }

    #[test]
    fn band_width_heuristic_shrinks() {
        assert!(default_band_width(10.0, 2.0) > default_band_width(100.0, 2.0));
    }
}
