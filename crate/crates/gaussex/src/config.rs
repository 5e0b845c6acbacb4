//! Experiment configuration (TOML) and result persistence (JSON + CSV).
//!
//! The schema is strict: unknown fields are rejected so that typos in
//! experiment definitions fail loudly instead of silently falling back to
//! defaults.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::chi::ChiSpec;
use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::kernels::CovarianceKernel;
use crate::perf_table::PerfTableSpec;
use crate::tail::{FieldModel, ResultRecord};

/// Full description of one experiment: model, grid, and run controls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    pub grid: GridConfig,
    pub run: RunConfig,
}

/// The `[model]` section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// One of `perf_table`, `chi`, `fbm`, `sub_fbm`.
    pub kind: String,
    pub alpha: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    /// Simplex weight vector (length `n + 1`) for `perf_table`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a: Option<Vec<f64>>,
    /// Correlation-decay coefficient for `chi`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chi_a: Option<f64>,
    /// Standard-deviation decay coefficient for `chi`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chi_b: Option<f64>,
    /// Optimizer points for plain kernel models; omit to skip the coverage
    /// precheck.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub optimizer: Option<Vec<Vec<f64>>>,
}

/// The `[grid]` section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// One of `interval`, `geometric`, `simplex`.
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lo: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hi: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mesh: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub focus: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ratio: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub levels: Option<usize>,
    /// Optional localization band width around the optimizer; defaults to
    /// the `(ln u / u)^{2/beta}` heuristic when grids are placed by level.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub band_width: Option<f64>,
}

/// The `[run]` section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub u_levels: Vec<f64>,
    pub n_reps: u64,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
}

fn missing(section: &str, field: &str) -> Error {
    Error::Usage(format!("[{section}] is missing required field `{field}`"))
}

impl ExperimentConfig {
    /// Checks cross-field invariants that the serde schema cannot express.
    pub fn validate(&self) -> Result<()> {
        if self.run.u_levels.is_empty() {
            return Err(Error::Usage("run.u_levels must be non-empty".into()));
        }
        for w in self.run.u_levels.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::Usage(
                    "run.u_levels must be strictly increasing".into(),
                ));
            }
        }
        if self.run.n_reps == 0 {
            return Err(Error::Usage("run.n_reps must be positive".into()));
        }
        self.build_model()?;
        self.build_grid()?;
        Ok(())
    }

    /// Instantiates the configured field model.
    pub fn build_model(&self) -> Result<FieldModel> {
        let m = &self.model;
        match m.kind.as_str() {
            "perf_table" => {
                let n = m.n.ok_or_else(|| missing("model", "n"))?;
                let a = m.a.clone().ok_or_else(|| missing("model", "a"))?;
                Ok(FieldModel::PerfTable(PerfTableSpec::new(n, m.alpha, a)?))
            }
            "chi" => {
                let n = m.n.ok_or_else(|| missing("model", "n"))?;
                let a = m.chi_a.ok_or_else(|| missing("model", "chi_a"))?;
                let b = m.chi_b.ok_or_else(|| missing("model", "chi_b"))?;
                Ok(FieldModel::Chi(ChiSpec::with_fbm(n, m.alpha, a, b)?))
            }
            "fbm" | "sub_fbm" => {
                let kernel = if m.kind == "fbm" {
                    CovarianceKernel::fbm(m.alpha)?
                } else {
                    CovarianceKernel::sub_fbm(m.alpha)?
                };
                Ok(FieldModel::Kernel {
                    kernel,
                    optimizer: m.optimizer.clone().unwrap_or_default(),
                })
            }
            other => Err(Error::Usage(format!(
                "unknown model kind `{other}`; expected perf_table, chi, fbm or sub_fbm"
            ))),
        }
    }

    /// Instantiates the configured grid.
    pub fn build_grid(&self) -> Result<GridSpec> {
        let g = &self.grid;
        match g.kind.as_str() {
            "interval" => GridSpec::interval(
                g.lo.ok_or_else(|| missing("grid", "lo"))?,
                g.hi.ok_or_else(|| missing("grid", "hi"))?,
                g.mesh.ok_or_else(|| missing("grid", "mesh"))?,
            ),
            "geometric" => GridSpec::geometric_interval(
                g.lo.ok_or_else(|| missing("grid", "lo"))?,
                g.hi.ok_or_else(|| missing("grid", "hi"))?,
                g.points.ok_or_else(|| missing("grid", "points"))?,
                g.focus.ok_or_else(|| missing("grid", "focus"))?,
                g.ratio.unwrap_or(2.0),
                g.levels.unwrap_or(4),
            ),
            "simplex" => GridSpec::simplex(
                self.model.n.ok_or_else(|| missing("model", "n"))?,
                g.mesh.ok_or_else(|| missing("grid", "mesh"))?,
            ),
            other => Err(Error::Usage(format!(
                "unknown grid kind `{other}`; expected interval, geometric or simplex"
            ))),
        }
    }

    /// Stable hash of the canonical TOML serialization.
    pub fn hash(&self) -> String {
        let text = toml::to_string(self).expect("config serializes");
        let mut h = Sha256::new();
        h.update(text.as_bytes());
        format!("{:x}", h.finalize())
    }
}

/// Parses and validates a TOML experiment configuration.
pub fn load_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path.as_ref())?;
    let config: ExperimentConfig = toml::from_str(&text)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.as_ref().display())))?;
    config.validate()?;
    Ok(config)
}

/// Writes a configuration back as TOML.
pub fn store_config(config: &ExperimentConfig, path: impl AsRef<Path>) -> Result<()> {
    let text = toml::to_string_pretty(config)
        .map_err(|e| Error::Parse(format!("config serialization failed: {e}")))?;
    std::fs::write(path, text)?;
    Ok(())
}

/// Persists a result record as `{base}.json` plus a flat `{base}.csv`.
///
/// The timestamp lives only in the JSON record, so the CSV is byte-identical
/// across reruns of the same configuration. Returns the two written paths.
pub fn store_record(record: &ResultRecord, base: impl AsRef<Path>) -> Result<Vec<std::path::PathBuf>> {
    let base = base.as_ref();
    let json_path = base.with_extension("json");
    let csv_path = base.with_extension("csv");
    let mut stamped = record.clone();
    if stamped.timestamp.is_empty() {
        stamped.timestamp = unix_timestamp();
    }
    let json = serde_json::to_string_pretty(&stamped)
        .map_err(|e| Error::Parse(format!("record serialization failed: {e}")))?;
    std::fs::write(&json_path, json)?;
    std::fs::write(&csv_path, record_csv(record))?;
    Ok(vec![json_path, csv_path])
}

/// Flat CSV body for a record: one row per level, no timestamp.
pub fn record_csv(record: &ResultRecord) -> String {
    let mut out = String::from("u,p_hat,ci_lo,ci_hi,asymptotic,ratio\n");
    for row in &record.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            row.u, row.p_hat, row.ci_lo, row.ci_hi, row.asymptotic, row.ratio
        ));
    }
    out
}

fn unix_timestamp() -> String {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs().to_string())
        .unwrap_or_default()
}
