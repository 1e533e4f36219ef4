//! Energy / Bethe-root tables.

use tqopen::algebra::C64;

use crate::record::SolutionRecord;

const SIG_DIGITS: i32 = 6;
const PAIR_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Md,
}

/// `x` to six significant digits without trailing zeros.
pub fn sig(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x.is_finite() { "0".into() } else { x.to_string() };
    }
    let exp = x.abs().log10().floor() as i32;
    let decimals = (SIG_DIGITS - 1 - exp).max(0) as usize;
    let mut s = format!("{x:.decimals$}");
    if s.contains('.') {
        s = s.trim_end_matches('0').trim_end_matches('.').to_string();
    }
    if s == "-0" {
        s = "0".into();
    }
    s
}

/// Roots sorted by real part, with conjugate pairs merged into `a ± bi`.
pub fn format_roots(roots: &[C64]) -> String {
    let mut rest: Vec<C64> = roots.to_vec();
    rest.sort_by(|a, b| a.re.total_cmp(&b.re).then(b.im.total_cmp(&a.im)));
    let mut parts = Vec::new();
    while let Some(z) = (!rest.is_empty()).then(|| rest.remove(0)) {
        if z.im.abs() <= PAIR_TOL * z.norm().max(1.0) {
            parts.push(sig(z.re));
            continue;
        }
        let partner = rest
            .iter()
            .position(|w| (w - z.conj()).norm() <= PAIR_TOL * z.norm().max(1.0));
        match partner {
            Some(j) => {
                rest.remove(j);
                parts.push(format!("{} ± {}i", sig(z.re), sig(z.im.abs())));
            }
            None => {
                let op = if z.im < 0.0 { '-' } else { '+' };
                parts.push(format!("{} {op} {}i", sig(z.re), sig(z.im.abs())));
            }
        }
    }
    parts.join(", ")
}

fn rows(record: &SolutionRecord) -> Vec<(String, String)> {
    let mut levels: Vec<_> = record.levels.iter().collect();
    levels.sort_by(|a, b| {
        a.energy_direct
            .total_cmp(&b.energy_direct)
            .then(a.index.cmp(&b.index))
    });
    levels
        .into_iter()
        .map(|l| {
            let roots = if l.failure.is_some() && l.bethe_roots.is_empty() {
                "unsolved".to_string()
            } else {
                format_roots(&l.roots())
            };
            (sig(l.energy_direct), roots)
        })
        .collect()
}

pub fn render(record: &SolutionRecord, format: Format) -> String {
    let rows = rows(record);
    match format {
        Format::Md => {
            let mut out = String::from("| E | Bethe roots |\n|---|---|\n");
            for (e, r) in rows {
                out.push_str(&format!("| {e} | {r} |\n"));
            }
            out
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["E", "Bethe roots"]).expect("in-memory write");
            for (e, r) in rows {
                w.write_record([e, r]).expect("in-memory write");
            }
            String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 table")
        }
    }
}
