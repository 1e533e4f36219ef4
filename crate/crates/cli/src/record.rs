//! On-disk JSON records.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use tqopen::algebra::C64;
use tqopen::lattice::{BoundaryParams, ChainSpec, Sign};
use tqopen::tq::{CompletenessReport, LevelReport, Tolerances};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Complex {
    pub re: f64,
    pub im: f64,
}

impl From<C64> for Complex {
    fn from(z: C64) -> Self {
        Self { re: z.re, im: z.im }
    }
}

impl From<Complex> for C64 {
    fn from(z: Complex) -> Self {
        C64::new(z.re, z.im)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub n_sites: usize,
    pub p: f64,
    pub q: f64,
    pub xi: f64,
    /// Set for presets whose `xi` is irrational, so `alpha` is rebuilt exactly.
    pub xi_squared: Option<f64>,
    pub sign: Sign,
    pub tol_tq: f64,
    pub tol_energy: f64,
    /// Seed of the parameter draw, when the parameters were drawn.
    pub seed: Option<u64>,
    pub preset: Option<String>,
}

impl RunConfig {
    pub fn params(&self) -> tqopen::Result<BoundaryParams> {
        match self.xi_squared {
            Some(x2) => BoundaryParams::from_xi_squared(self.p, self.q, x2, self.xi < 0.0),
            None => BoundaryParams::new(self.p, self.q, self.xi),
        }
    }

    pub fn spec(&self) -> tqopen::Result<ChainSpec> {
        Ok(ChainSpec::new(self.n_sites, self.params()?)?.with_sign(self.sign))
    }

    pub fn tolerances(&self) -> Tolerances {
        Tolerances {
            tq: self.tol_tq,
            energy: self.tol_energy,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelRecord {
    pub index: usize,
    pub energy_direct: f64,
    pub energy_bethe: Option<f64>,
    pub tq_residual: Option<f64>,
    pub lambda_fit_residual: Option<f64>,
    /// Ascending powers of `u`.
    pub lambda_coefficients: Vec<Complex>,
    pub bethe_roots: Vec<Complex>,
    pub degenerate: bool,
    pub failure: Option<String>,
    pub opposite_sign_residual: Option<f64>,
}

impl LevelRecord {
    fn from_report(level: &LevelReport) -> Self {
        Self {
            index: level.index,
            energy_direct: level.energy_direct,
            energy_bethe: level.energy_bethe,
            tq_residual: level.tq_residual.filter(|r| r.is_finite()),
            lambda_fit_residual: level.lambda_fit_residual,
            lambda_coefficients: level
                .lambda
                .as_ref()
                .map(|l| l.coeffs().iter().map(|&c| c.into()).collect())
                .unwrap_or_default(),
            bethe_roots: level.roots.iter().map(|&z| z.into()).collect(),
            degenerate: level.degenerate,
            failure: level.failure.clone(),
            opposite_sign_residual: level.opposite_sign_residual.filter(|r| r.is_finite()),
        }
    }

    pub fn roots(&self) -> Vec<C64> {
        self.bethe_roots.iter().map(|&z| z.into()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub level_count: usize,
    pub solved_count: usize,
    pub max_energy_mismatch: Option<f64>,
    pub max_residual: Option<f64>,
    pub all_solved: bool,
    pub distinct_q: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub index: usize,
    pub energy_direct: f64,
    pub reason: String,
    pub tq_residual: Option<f64>,
    pub opposite_sign_residual: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionRecord {
    pub schema_version: u32,
    pub config: RunConfig,
    pub levels: Vec<LevelRecord>,
    pub summary: Summary,
    pub failures: Vec<FailureRecord>,
}

impl SolutionRecord {
    pub fn new(config: RunConfig, report: &CompletenessReport) -> Self {
        let levels: Vec<LevelRecord> = report.levels.iter().map(LevelRecord::from_report).collect();
        let failures = report
            .levels
            .iter()
            .filter(|l| !l.solved(&report.tolerances))
            .map(|l| FailureRecord {
                index: l.index,
                energy_direct: l.energy_direct,
                reason: l.failure.clone().unwrap_or_else(|| "tolerance exceeded".into()),
                tq_residual: l.tq_residual.filter(|r| r.is_finite()),
                opposite_sign_residual: l.opposite_sign_residual.filter(|r| r.is_finite()),
            })
            .collect();
        let finite = |x: f64| Some(x).filter(|x| x.is_finite());
        Self {
            schema_version: SCHEMA_VERSION,
            config,
            summary: Summary {
                level_count: levels.len(),
                solved_count: report.solved_count(),
                max_energy_mismatch: finite(report.max_energy_mismatch),
                max_residual: finite(report.max_residual),
                all_solved: report.all_solved,
                distinct_q: report.distinct_q,
            },
            levels,
            failures,
        }
    }

    /// Reads a record, rejecting any schema version other than the current one.
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        let value: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| format!("{} is not valid JSON: {e}", path.display()))?;
        match value.get("schema_version").and_then(|v| v.as_u64()) {
            Some(v) if v == u64::from(SCHEMA_VERSION) => {}
            Some(v) => {
                return Err(format!(
                    "unsupported schema version {v} (expected {SCHEMA_VERSION})"
                ))
            }
            None => return Err("record has no schema_version".into()),
        }
        serde_json::from_value(value)
            .map_err(|e| format!("record does not match schema {SCHEMA_VERSION}: {e}"))
    }
}

/// Writes `bytes` to a temporary file beside `path` and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> std::io::Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(std::io::Error::other)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}
