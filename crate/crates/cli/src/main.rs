//! `tqopen`: completeness scans, tables, record verification and fusion checks
//! for the open spin-1/2 XXX chain.
//!
//! Exit status: 0 success, 2 usage or input error, 3 completeness or
//! verification failure, 4 fusion-check failure.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod fusion_check;
mod record;
mod table;
mod verify;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tqopen::fusion::MAX_SPIN;
use tqopen::lattice::{BoundaryParams, Sign, DEFAULT_MAX_SITES};
use tqopen::tq::{completeness_scan, DEFAULT_ENERGY_TOL, DEFAULT_TQ_TOL};

use record::{write_json, RunConfig, SolutionRecord};

const EXIT_USAGE: u8 = 2;
const EXIT_INCOMPLETE: u8 = 3;
const EXIT_FUSION: u8 = 4;

/// Environment variable naming the default output directory.
const OUT_DIR_ENV: &str = "TQOPEN_OUT_DIR";

#[derive(Parser)]
#[command(
    name = "tqopen",
    version,
    about = "Inhomogeneous T-Q checks for the open XXX chain"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Diagonalize H, solve the T-Q equation for every level and write a JSON record.
    Solve(SolveArgs),
    /// Render a record as an energy / Bethe-root table.
    Table {
        path: PathBuf,
        #[arg(long, value_enum, default_value = "md")]
        format: table::Format,
    },
    /// Check term counts, the diagonal reduction and Hirota residuals.
    Fusion(FusionArgs),
    /// Recompute residuals and energies of a stored record.
    Verify { path: PathBuf },
}

#[derive(Args)]
struct SolveArgs {
    /// Chain length.
    #[arg(long = "n")]
    n: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    p: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    q: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    xi: Option<f64>,
    /// Branch sign, `+` or `-`.
    #[arg(long, default_value = "+", value_parser = parse_sign, allow_hyphen_values = true)]
    sign: Sign,
    #[arg(long, default_value_t = DEFAULT_TQ_TOL)]
    tol_tq: f64,
    #[arg(long, default_value_t = DEFAULT_ENERGY_TOL)]
    tol_energy: f64,
    /// Draw p, q, xi from this seed when they are not given.
    #[arg(long)]
    seed: Option<u64>,
    /// Output path (default: `$TQOPEN_OUT_DIR/<name>.json`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// N = 3, p = 1/4, q = 1/2, xi = -sqrt(3).
    #[arg(long, conflicts_with_all = ["n", "p", "q", "xi", "seed", "table2"])]
    table1: bool,
    /// N = 4, p = 1/4, q = 1/2, xi = -sqrt(3).
    #[arg(long, conflicts_with_all = ["n", "p", "q", "xi", "seed"])]
    table2: bool,
}

#[derive(Args)]
struct FusionArgs {
    #[arg(long, default_value_t = 4)]
    max_s: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Random (Q, parameters) draws per generating function.
    #[arg(long, default_value_t = 5)]
    draws: usize,
    /// Random evaluation points per draw.
    #[arg(long, default_value_t = 20)]
    points: usize,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, hide = true, allow_hyphen_values = true)]
    corrupt_t2: Option<i32>,
}

fn parse_sign(s: &str) -> Result<Sign, String> {
    match s {
        "+" | "plus" => Ok(Sign::Plus),
        "-" | "minus" => Ok(Sign::Minus),
        _ => Err(format!("expected + or -, got {s:?}")),
    }
}

fn out_path(explicit: Option<PathBuf>, name: &str) -> PathBuf {
    explicit.unwrap_or_else(|| {
        let dir = std::env::var_os(OUT_DIR_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("."));
        dir.join(name)
    })
}

fn usage(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(EXIT_USAGE)
}

fn build_config(args: &SolveArgs) -> Result<RunConfig, String> {
    let tolerances_ok = args.tol_tq > 0.0 && args.tol_energy > 0.0;
    if !tolerances_ok {
        return Err("tolerances must be positive".into());
    }
    let mut config = RunConfig {
        n_sites: 0,
        p: 0.0,
        q: 0.0,
        xi: 0.0,
        xi_squared: None,
        sign: args.sign,
        tol_tq: args.tol_tq,
        tol_energy: args.tol_energy,
        seed: None,
        preset: None,
    };
    if args.table1 || args.table2 {
        let preset = BoundaryParams::table_preset();
        config.n_sites = if args.table1 { 3 } else { 4 };
        config.p = preset.p;
        config.q = preset.q;
        config.xi = preset.xi;
        config.xi_squared = Some(3.0);
        config.preset = Some(if args.table1 { "table1" } else { "table2" }.into());
    } else {
        config.n_sites = args.n.ok_or("--n is required unless a preset is given")?;
        match (args.p, args.q, args.xi, args.seed) {
            (Some(p), Some(q), Some(xi), _) => {
                config.p = p;
                config.q = q;
                config.xi = xi;
                config.seed = args.seed;
            }
            (None, None, None, Some(seed)) => {
                let drawn = BoundaryParams::seeded_generic(seed);
                config.p = drawn.p;
                config.q = drawn.q;
                config.xi = drawn.xi;
                config.seed = Some(seed);
            }
            _ => return Err("give all of --p, --q, --xi, or none of them together with --seed".into()),
        }
    }
    if config.xi == 0.0 {
        return Err(
            "xi = 0 (diagonal boundaries) is not supported: the inhomogeneous T-Q equation needs a \
                    non-diagonal boundary term"
                .into(),
        );
    }
    if config.n_sites < 2 || config.n_sites > DEFAULT_MAX_SITES {
        return Err(format!("--n must lie in 2..={DEFAULT_MAX_SITES}"));
    }
    config.params().map_err(|e| e.to_string())?;
    Ok(config)
}

fn cmd_solve(args: SolveArgs) -> ExitCode {
    let config = match build_config(&args) {
        Ok(c) => c,
        Err(e) => return usage(e),
    };
    let name = match &config.preset {
        Some(p) => format!("{p}.json"),
        None => format!("solve_n{}.json", config.n_sites),
    };
    let path = out_path(args.out, &name);
    let spec = match config.spec() {
        Ok(s) => s,
        Err(e) => return usage(e),
    };
    let report = match completeness_scan(&spec, &config.tolerances()) {
        Ok(r) => r,
        Err(e) => return usage(e),
    };
    let record = SolutionRecord::new(config, &report);
    if let Err(e) = write_json(&path, &record) {
        eprintln!("error: cannot write {}: {e}", path.display());
        return ExitCode::FAILURE;
    }
    let s = &record.summary;
    println!(
        "N={}: {}/{} levels solved, max residual {}, max energy mismatch {}; wrote {}",
        record.config.n_sites,
        s.solved_count,
        s.level_count,
        fmt_opt(s.max_residual),
        fmt_opt(s.max_energy_mismatch),
        path.display()
    );
    for f in &record.failures {
        println!(
            "unsolved level {} (E = {}): {}; opposite-sign residual {}",
            f.index,
            f.energy_direct,
            f.reason,
            fmt_opt(f.opposite_sign_residual)
        );
    }
    if s.all_solved {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_INCOMPLETE)
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "n/a".into(), |v| format!("{v:.2e}"))
}

fn load(path: &Path) -> Result<SolutionRecord, ExitCode> {
    SolutionRecord::load(path).map_err(usage)
}

fn cmd_table(path: &Path, format: table::Format) -> ExitCode {
    match load(path) {
        Ok(record) => {
            print!("{}", table::render(&record, format));
            ExitCode::SUCCESS
        }
        Err(code) => code,
    }
}

fn cmd_verify(path: &Path) -> ExitCode {
    let record = match load(path) {
        Ok(r) => r,
        Err(code) => return code,
    };
    let report = match verify::verify(&record) {
        Ok(r) => r,
        Err(e) => return usage(e),
    };
    for p in &report.record_problems {
        println!("record: {p}");
    }
    for level in &report.failed {
        println!("level {}: {}", level.index, level.problems.join("; "));
    }
    println!(
        "{} levels checked, {} unsolved levels skipped, {} failed",
        report.checked,
        report.skipped_unsolved,
        report.failed.len()
    );
    if report.ok() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_INCOMPLETE)
    }
}

fn cmd_fusion(args: FusionArgs) -> ExitCode {
    if args.max_s > MAX_SPIN - 1 {
        return usage(format!("--max-s must be at most {}", MAX_SPIN - 1));
    }
    if args.draws == 0 || args.points == 0 {
        return usage("--draws and --points must be positive");
    }
    let report = fusion_check::run(&fusion_check::FusionOptions {
        max_s: args.max_s,
        seed: args.seed,
        draws: args.draws,
        points: args.points,
        corrupt_t2: args.corrupt_t2,
    });
    let path = out_path(
        args.out,
        &format!("fusion_s{}_seed{}.json", args.max_s, args.seed),
    );
    if let Err(e) = write_json(&path, &report) {
        eprintln!("error: cannot write {}: {e}", path.display());
        return ExitCode::FAILURE;
    }
    let counts: Vec<String> = report
        .counts
        .iter()
        .map(|c| c.inhomogeneous.to_string())
        .collect();
    println!("term counts: {}", counts.join(", "));
    println!(
        "diagonal reduction: {}",
        if report.reduction_ok { "ok" } else { "FAILED" }
    );
    println!(
        "Hirota: {} samples, max relative residual {:.2e} (T-system), {:.2e} (fused)",
        report.samples, report.max_t_system_relative, report.max_fused_system_relative
    );
    for f in &report.failures {
        println!(
            "failed: s={} u={} C={} N={} p={} q={} xi={} residuals {:.2e} {:.2e}",
            f.s, f.u, f.include_c, f.n_sites, f.p, f.q, f.xi, f.t_system_relative, f.fused_system_relative
        );
    }
    println!("wrote {}", path.display());
    if report.passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_FUSION)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Solve(args) => cmd_solve(args),
        Command::Table { path, format } => cmd_table(&path, format),
        Command::Fusion(args) => cmd_fusion(args),
        Command::Verify { path } => cmd_verify(&path),
    }
}
