//! Symbolic and numeric checks of the fusion hierarchy.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use tqopen::fusion::{character_count, expand_w, hirota_sweep, reduction_check_diag, Hierarchy};
use tqopen::lattice::{BoundaryParams, ChainSpec};

use crate::record::{Complex, SCHEMA_VERSION};

pub const T_SYSTEM_TOL: f64 = 1e-10;
pub const FUSED_SYSTEM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Serialize)]
pub struct CountRow {
    pub s: usize,
    pub inhomogeneous: i64,
    pub inhomogeneous_expected: i64,
    pub diagonal: i64,
    pub diagonal_expected: i64,
}

#[derive(Debug, Clone, Serialize)]
pub struct HirotaFailure {
    pub s: usize,
    pub u: f64,
    pub include_c: bool,
    pub n_sites: usize,
    pub p: f64,
    pub q: f64,
    pub xi: f64,
    /// Coefficients of Q in ascending powers of `u`.
    pub q_coefficients: Vec<Complex>,
    pub t_system_relative: f64,
    pub fused_system_relative: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FusionReport {
    pub schema_version: u32,
    pub max_s: usize,
    pub seed: u64,
    pub draws: usize,
    pub points: usize,
    pub reduction_ok: bool,
    pub counts: Vec<CountRow>,
    pub counts_ok: bool,
    pub samples: usize,
    pub max_t_system_relative: f64,
    pub max_fused_system_relative: f64,
    pub failures: Vec<HirotaFailure>,
    pub passed: bool,
}

pub struct FusionOptions {
    pub max_s: usize,
    pub seed: u64,
    pub draws: usize,
    pub points: usize,
    /// Moves every factor of `T_{2,1}` by this many half-shifts.
    pub corrupt_t2: Option<i32>,
}

pub fn run(opts: &FusionOptions) -> FusionReport {
    let w = expand_w(opts.max_s, true);
    let d = expand_w(opts.max_s, false);
    let counts: Vec<CountRow> = (0..=opts.max_s)
        .map(|s| CountRow {
            s,
            inhomogeneous: w[s].term_count(),
            inhomogeneous_expected: character_count(s, true),
            diagonal: d[s].term_count(),
            diagonal_expected: character_count(s, false),
        })
        .collect();
    let counts_ok = counts
        .iter()
        .all(|c| c.inhomogeneous == c.inhomogeneous_expected && c.diagonal == c.diagonal_expected);
    let reduction_ok = reduction_check_diag(opts.max_s);

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut failures = Vec::new();
    let mut samples = 0;
    let mut max_t = 0.0f64;
    let mut max_fused = 0.0f64;
    if opts.max_s >= 1 {
        for include_c in [true, false] {
            let mut hierarchy = Hierarchy::new(opts.max_s, include_c);
            if let Some(by) = opts.corrupt_t2 {
                hierarchy.corrupt_t2(1, by);
            }
            for draw in 0..opts.draws {
                let n = 2 + draw % 3;
                let spec = ChainSpec::new(n, BoundaryParams::random_generic(&mut rng)).expect("small chain");
                let sweep = hirota_sweep(&mut rng, &hierarchy, &spec, 4, opts.points);
                for sample in &sweep.samples {
                    samples += 1;
                    let t = sample.residual.t_relative();
                    let f = sample.residual.t2_relative();
                    max_t = max_t.max(t);
                    max_fused = max_fused.max(f);
                    if !(t < T_SYSTEM_TOL && f < FUSED_SYSTEM_TOL) {
                        failures.push(HirotaFailure {
                            s: sample.s,
                            u: sample.u,
                            include_c,
                            n_sites: n,
                            p: spec.params.p,
                            q: spec.params.q,
                            xi: spec.params.xi,
                            q_coefficients: sweep.q.coeffs().iter().map(|&c| c.into()).collect(),
                            t_system_relative: t,
                            fused_system_relative: f,
                        });
                    }
                }
            }
        }
    }
    let passed = counts_ok && reduction_ok && failures.is_empty();
    FusionReport {
        schema_version: SCHEMA_VERSION,
        max_s: opts.max_s,
        seed: opts.seed,
        draws: opts.draws,
        points: opts.points,
        reduction_ok,
        counts,
        counts_ok,
        samples,
        max_t_system_relative: max_t,
        max_fused_system_relative: max_fused,
        failures,
        passed,
    }
}
