//! Independent re-check of a stored record.

use serde::Serialize;
use tqopen::algebra::{FactoredXPolynomial, Polynomial, C64};
use tqopen::spectrum::diagonalize_h;
use tqopen::tq::{energy_from_roots, held_out_nodes, max_tq_residual};

use crate::record::SolutionRecord;

#[derive(Debug, Clone, Serialize)]
pub struct LevelCheck {
    pub index: usize,
    pub tq_residual: Option<f64>,
    pub energy_mismatch: Option<f64>,
    pub direct_mismatch: f64,
    pub problems: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub checked: usize,
    pub skipped_unsolved: usize,
    pub failed: Vec<LevelCheck>,
    pub record_problems: Vec<String>,
}

impl VerifyReport {
    pub fn ok(&self) -> bool {
        self.failed.is_empty() && self.record_problems.is_empty()
    }
}

/// Recomputes, for every level the record claims as solved, the T-Q residual
/// from the stored eigenvalue polynomial and roots, the energy from the roots,
/// and the direct energy from a fresh diagonalization.
pub fn verify(record: &SolutionRecord) -> Result<VerifyReport, String> {
    let spec = record.config.spec().map_err(|e| e.to_string())?;
    let tol = record.config.tolerances();
    let eig = diagonalize_h(&spec).map_err(|e| e.to_string())?;
    let mut report = VerifyReport {
        checked: 0,
        skipped_unsolved: 0,
        failed: Vec::new(),
        record_problems: Vec::new(),
    };
    if record.levels.len() != spec.dim() {
        report.record_problems.push(format!(
            "{} levels stored, chain has {}",
            record.levels.len(),
            spec.dim()
        ));
    }
    let claims_solved = record.levels.iter().all(|l| l.failure.is_none());
    if claims_solved != record.summary.all_solved {
        report
            .record_problems
            .push("summary disagrees with the level entries".into());
    }
    let nodes = held_out_nodes(spec.n_sites);
    for level in &record.levels {
        if level.failure.is_some() {
            report.skipped_unsolved += 1;
            continue;
        }
        report.checked += 1;
        let mut problems = Vec::new();
        let direct = eig.energies.get(level.index).copied().unwrap_or(f64::NAN);
        let direct_mismatch = (direct - level.energy_direct).abs();
        if !(direct_mismatch <= tol.energy) {
            problems.push(format!("stored direct energy off by {direct_mismatch:e}"));
        }
        let roots = level.roots();
        if roots.len() != spec.n_sites {
            problems.push(format!("{} roots stored, expected {}", roots.len(), spec.n_sites));
        }
        let lam = Polynomial::new(level.lambda_coefficients.iter().map(|&c| C64::from(c)).collect());
        if lam.degree() != 2 * spec.n_sites + 2 {
            problems.push(format!("eigenvalue polynomial has degree {}", lam.degree()));
        }
        let q = FactoredXPolynomial::from_bethe_roots(&roots);
        let tq_residual = match max_tq_residual(&lam, &q, &spec, &nodes) {
            Ok(r) => {
                if !(r <= tol.tq) {
                    problems.push(format!("T-Q residual {r:e} exceeds {:e}", tol.tq));
                }
                Some(r)
            }
            Err(e) => {
                problems.push(e.to_string());
                None
            }
        };
        let energy_mismatch = match energy_from_roots(&roots, &spec) {
            Ok(e) => {
                let d = (e - level.energy_direct).abs();
                if !(d <= tol.energy) {
                    problems.push(format!("energy from roots off by {d:e}"));
                }
                Some(d)
            }
            Err(e) => {
                problems.push(e.to_string());
                None
            }
        };
        if !problems.is_empty() {
            report.failed.push(LevelCheck {
                index: level.index,
                tq_residual,
                energy_mismatch,
                direct_mismatch,
                problems,
            });
        }
    }
    Ok(report)
}
