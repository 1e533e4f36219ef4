//! Shift-operator algebra for the fusion hierarchy.
//!
//! Symbols `A`, `B`, `C` carry an integer half-shift: `f^[n](u) = f(u + n/2)`.
//! The shift operator `D` obeys `D f = f^[-1] D`, so every word in `D` and
//! symbols has a normal form `f_1 ... f_k D^m` with all `D`s on the right.
//! Generating functions are inverted as truncated geometric series, and the
//! spin-`s` coefficient `T_{1,s}` is read off the grade-`2s` part through
//! `D^s g D^s = g^[-s] D^{2s}`.

use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::algebra::{Eval, Polynomial, C64};
use crate::error::{Error, Result};
use crate::lattice::ChainSpec;
use crate::tq::{a_bar, d_bar, delta_term};

/// Largest spin index accepted by [`expand_w`]; one above the largest `s`
/// whose Hirota residual can be formed.
pub const MAX_SPIN: usize = 9;
/// Minimum distance from a zero of `Q` or a pole of the coefficients.
pub const FUSION_POLE_RADIUS: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SymbolKind {
    A,
    B,
    C,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ShiftedSymbol {
    pub kind: SymbolKind,
    pub shift: i32,
}

impl ShiftedSymbol {
    pub fn new(kind: SymbolKind, shift: i32) -> Self {
        Self { kind, shift }
    }

    pub fn shifted(self, by: i32) -> Self {
        Self::new(self.kind, self.shift + by)
    }
}

impl fmt::Display for ShiftedSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.kind)?;
        match self.shift {
            0 => Ok(()),
            1 => f.write_str("+"),
            -1 => f.write_str("-"),
            n => write!(f, "[{n:+}]"),
        }
    }
}

/// One letter of a raw operator word.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Letter {
    D(u32),
    Sym(ShiftedSymbol),
}

/// `coefficient * factors * D^d_power`, with factors kept sorted.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Monomial {
    pub factors: Vec<ShiftedSymbol>,
    pub d_power: u32,
    pub coefficient: i64,
}

impl Monomial {
    pub fn new(mut factors: Vec<ShiftedSymbol>, d_power: u32, coefficient: i64) -> Self {
        factors.sort();
        Self {
            factors,
            d_power,
            coefficient,
        }
    }

    pub fn one() -> Self {
        Self::new(Vec::new(), 0, 1)
    }

    /// `(f D^a)(g D^b) = f g^[-a] D^{a+b}`.
    pub fn mul(&self, other: &Self) -> Self {
        let shift = self.d_power as i32;
        let factors = self
            .factors
            .iter()
            .copied()
            .chain(other.factors.iter().map(|s| s.shifted(-shift)))
            .collect();
        Self::new(
            factors,
            self.d_power + other.d_power,
            self.coefficient * other.coefficient,
        )
    }

    pub fn shifted(&self, by: i32) -> Self {
        Self::new(
            self.factors.iter().map(|s| s.shifted(by)).collect(),
            self.d_power,
            self.coefficient,
        )
    }

    pub fn has_kind(&self, kind: SymbolKind) -> bool {
        self.factors.iter().any(|s| s.kind == kind)
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.coefficient {
            1 => {}
            -1 => f.write_str("-")?,
            c => write!(f, "{c} ")?,
        }
        if self.factors.is_empty() && self.d_power == 0 {
            return f.write_str("1");
        }
        let mut parts: Vec<String> = self.factors.iter().map(|s| s.to_string()).collect();
        if self.d_power > 0 {
            parts.push(format!("D^{}", self.d_power));
        }
        f.write_str(&parts.join(" "))
    }
}

/// Pushes every `D` to the right of the word.
pub fn normal_order(raw: &[Letter]) -> Monomial {
    let mut d = 0u32;
    let mut factors = Vec::new();
    for letter in raw {
        match *letter {
            Letter::D(k) => d += k,
            Letter::Sym(s) => factors.push(s.shifted(-(d as i32))),
        }
    }
    Monomial::new(factors, d, 1)
}

/// A sum of normal-ordered monomials, truncated above `max_grade` in `D`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OperatorSeries {
    pub max_grade: u32,
    pub terms: BTreeMap<u32, Vec<Monomial>>,
}

impl OperatorSeries {
    pub fn zero(max_grade: u32) -> Self {
        Self {
            max_grade,
            terms: BTreeMap::new(),
        }
    }

    pub fn one(max_grade: u32) -> Self {
        Self::from_monomials(max_grade, [Monomial::one()])
    }

    /// Merges equal factor lists and drops cancelled or out-of-range terms.
    pub fn from_monomials(max_grade: u32, monomials: impl IntoIterator<Item = Monomial>) -> Self {
        let mut acc: BTreeMap<u32, BTreeMap<Vec<ShiftedSymbol>, i64>> = BTreeMap::new();
        for m in monomials {
            if m.d_power > max_grade {
                continue;
            }
            *acc.entry(m.d_power).or_default().entry(m.factors).or_default() += m.coefficient;
        }
        let terms = acc
            .into_iter()
            .map(|(d, by_factors)| {
                let list: Vec<Monomial> = by_factors
                    .into_iter()
                    .filter(|&(_, c)| c != 0)
                    .map(|(f, c)| Monomial::new(f, d, c))
                    .collect();
                (d, list)
            })
            .filter(|(_, list)| !list.is_empty())
            .collect();
        Self { max_grade, terms }
    }

    pub fn monomials(&self) -> impl Iterator<Item = &Monomial> {
        self.terms.values().flatten()
    }

    pub fn grade(&self, d: u32) -> &[Monomial] {
        self.terms.get(&d).map_or(&[], Vec::as_slice)
    }

    pub fn add(&self, other: &Self) -> Self {
        let max_grade = self.max_grade.min(other.max_grade);
        Self::from_monomials(max_grade, self.monomials().chain(other.monomials()).cloned())
    }

    pub fn mul(&self, other: &Self) -> Self {
        let max_grade = self.max_grade.min(other.max_grade);
        let products = self.monomials().flat_map(|a| {
            other
                .monomials()
                .filter(move |b| a.d_power + b.d_power <= max_grade)
                .map(move |b| a.mul(b))
        });
        Self::from_monomials(max_grade, products)
    }

    /// `sum_{k >= 0} X^k`, which terminates because `X` has no grade-0 part.
    pub fn geometric(&self) -> Self {
        assert!(
            self.grade(0).is_empty(),
            "geometric series needs a positive-grade argument"
        );
        let mut total = Self::one(self.max_grade);
        let mut power = Self::one(self.max_grade);
        loop {
            power = power.mul(self);
            if power.terms.is_empty() {
                return total;
            }
            total = total.add(&power);
        }
    }
}

fn sym(kind: SymbolKind) -> Letter {
    Letter::Sym(ShiftedSymbol::new(kind, 0))
}

/// `D(A + B [+ C])D - D A D^2 B D` in normal form.
pub fn generating_argument(max_grade: u32, include_c: bool) -> OperatorSeries {
    let mut kinds = vec![SymbolKind::A, SymbolKind::B];
    if include_c {
        kinds.push(SymbolKind::C);
    }
    let mut terms: Vec<Monomial> = kinds
        .into_iter()
        .map(|k| normal_order(&[Letter::D(1), sym(k), Letter::D(1)]))
        .collect();
    let mut cross = normal_order(&[
        Letter::D(1),
        sym(SymbolKind::A),
        Letter::D(2),
        sym(SymbolKind::B),
        Letter::D(1),
    ]);
    cross.coefficient = -1;
    terms.push(cross);
    OperatorSeries::from_monomials(max_grade, terms)
}

/// A pure function expression (no trailing `D`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TExpression {
    pub s: usize,
    pub monomials: Vec<Monomial>,
}

impl TExpression {
    fn from_grade(s: usize, monomials: &[Monomial]) -> Self {
        let shift = s as i32;
        let mut monomials: Vec<Monomial> = monomials
            .iter()
            .map(|m| {
                let mut m = m.shifted(shift);
                m.d_power = 0;
                m
            })
            .collect();
        monomials.sort_by(|a, b| a.factors.cmp(&b.factors));
        Self { s, monomials }
    }

    /// Number of terms counted with multiplicity.
    pub fn term_count(&self) -> i64 {
        self.monomials.iter().map(|m| m.coefficient).sum()
    }

    /// Multiset of terms, for symbolic comparison.
    pub fn multiset(&self) -> BTreeMap<Vec<ShiftedSymbol>, i64> {
        let mut out = BTreeMap::new();
        for m in &self.monomials {
            *out.entry(m.factors.clone()).or_default() += m.coefficient;
        }
        out.retain(|_, c| *c != 0);
        out
    }

    pub fn shifted(&self, by: i32) -> Self {
        Self {
            s: self.s,
            monomials: self.monomials.iter().map(|m| m.shifted(by)).collect(),
        }
    }
}

impl fmt::Display for TExpression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.monomials.iter().map(|m| m.to_string()).collect();
        if parts.is_empty() {
            f.write_str("0")
        } else {
            f.write_str(&parts.join(" + "))
        }
    }
}

fn extract(series: &OperatorSeries, max_s: usize) -> Vec<TExpression> {
    (0..=max_s)
        .map(|s| TExpression::from_grade(s, series.grade(2 * s as u32)))
        .collect()
}

fn check_spin(max_s: usize) {
    assert!(max_s <= MAX_SPIN, "spin index {max_s} exceeds {MAX_SPIN}");
}

/// `T_{1,s}` for `s = 0..=max_s` from the inhomogeneous (`include_c`) or
/// diagonal generating function.
pub fn expand_w(max_s: usize, include_c: bool) -> Vec<TExpression> {
    check_spin(max_s);
    let grade = 2 * max_s as u32;
    extract(&generating_argument(grade, include_c).geometric(), max_s)
}

/// `(1 - D B D)^{-1} (1 - D A D)^{-1}` expanded directly.
pub fn diagonal_functional(max_s: usize) -> Vec<TExpression> {
    check_spin(max_s);
    let grade = 2 * max_s as u32;
    let single =
        |k| OperatorSeries::from_monomials(grade, [normal_order(&[Letter::D(1), sym(k), Letter::D(1)])]);
    let w = single(SymbolKind::B)
        .geometric()
        .mul(&single(SymbolKind::A).geometric());
    extract(&w, max_s)
}

/// `prod_k A^[2k+1] B^[-2k-1]` for `k = -(s-1)/2 ..= (s-1)/2`.
pub fn t2s_expression(s: usize) -> TExpression {
    let factors = (0..s as i32)
        .flat_map(|j| {
            // 2k + 1 with k = j - (s - 1)/2.
            let n = 2 * j - s as i32 + 2;
            [
                ShiftedSymbol::new(SymbolKind::A, n),
                ShiftedSymbol::new(SymbolKind::B, -n),
            ]
        })
        .collect();
    TExpression {
        s,
        monomials: vec![Monomial::new(factors, 0, 1)],
    }
}

/// Series coefficients of `1/(1 - 3x + x^2)` or, for the diagonal case,
/// `1/(1 - x)^2`.
pub fn character_count(s: usize, include_c: bool) -> i64 {
    let b = if include_c { 3 } else { 2 };
    let (mut prev, mut cur) = (0i64, 1i64);
    for _ in 0..s {
        (prev, cur) = (cur, b * cur - prev);
    }
    cur
}

pub fn term_count(s: usize, include_c: bool) -> i64 {
    expand_w(s, include_c)[s].term_count()
}

/// True iff the diagonal generating function and the directly expanded
/// diagonal functional agree term by term for every `s <= max_s`.
pub fn reduction_check_diag(max_s: usize) -> bool {
    let w = expand_w(max_s, false);
    let d = diagonal_functional(max_s);
    w.iter().zip(&d).all(|(a, b)| a.multiset() == b.multiset())
}

fn guard(z: C64, u: C64) -> Result<()> {
    if z.norm() < FUSION_POLE_RADIUS {
        return Err(Error::NearQZero { re: u.re, im: u.im });
    }
    Ok(())
}

/// Value of one shifted symbol built from `Q` and the chain coefficients.
pub fn eval_symbol(sym: ShiftedSymbol, q: &impl Eval, spec: &ChainSpec, u: C64) -> Result<C64> {
    let v = u + 0.5 * sym.shift as f64;
    let qv = q.eval(v);
    guard(qv, v)?;
    Ok(match sym.kind {
        SymbolKind::A => a_bar(v, spec)? * q.eval(v - 1.0) / qv,
        SymbolKind::B => d_bar(v, spec)? * q.eval(v + 1.0) / qv,
        SymbolKind::C => delta_term(v, spec) / qv,
    })
}

/// Sum of the monomial values and the sum of their magnitudes.
pub fn eval_with_scale(expr: &TExpression, q: &impl Eval, spec: &ChainSpec, u: C64) -> Result<(C64, f64)> {
    let mut cache: BTreeMap<ShiftedSymbol, C64> = BTreeMap::new();
    let mut total = C64::new(0.0, 0.0);
    let mut scale = 0.0;
    for m in &expr.monomials {
        let mut term = C64::new(m.coefficient as f64, 0.0);
        for &s in &m.factors {
            let v = match cache.get(&s) {
                Some(&v) => v,
                None => {
                    let v = eval_symbol(s, q, spec, u)?;
                    cache.insert(s, v);
                    v
                }
            };
            term *= v;
        }
        total += term;
        scale += term.norm();
    }
    Ok((total, scale))
}

pub fn eval_expression(expr: &TExpression, q: &impl Eval, spec: &ChainSpec, u: C64) -> Result<C64> {
    eval_with_scale(expr, q, spec, u).map(|(v, _)| v)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HirotaResidual {
    /// `T1^+ T1^- - T2 - T1_{s+1} T1_{s-1}`.
    pub t_system: C64,
    pub t_system_scale: f64,
    /// `T2^+ T2^- - T2_{s+1} T2_{s-1}`.
    pub t2_system: C64,
    pub t2_system_scale: f64,
}

impl HirotaResidual {
    pub fn t_relative(&self) -> f64 {
        self.t_system.norm() / self.t_system_scale
    }

    pub fn t2_relative(&self) -> f64 {
        self.t2_system.norm() / self.t2_system_scale
    }
}

/// Precomputed `T_{1,s}` and `T_{2,s}` expressions for residual sweeps.
#[derive(Debug, Clone)]
pub struct Hierarchy {
    pub include_c: bool,
    pub t1: Vec<TExpression>,
    pub t2: Vec<TExpression>,
}

impl Hierarchy {
    /// Covers the residuals for `s = 1..=max_s`.
    pub fn new(max_s: usize, include_c: bool) -> Self {
        Self {
            include_c,
            t1: expand_w(max_s + 1, include_c),
            t2: (0..=max_s + 1).map(t2s_expression).collect(),
        }
    }

    pub fn max_s(&self) -> usize {
        self.t1.len() - 2
    }

    /// Replaces `T_{2,s}` by a copy with every factor moved by `by` half-shifts.
    pub fn corrupt_t2(&mut self, s: usize, by: i32) {
        self.t2[s] = self.t2[s].shifted(by);
    }

    pub fn residual(&self, s: usize, q: &impl Eval, spec: &ChainSpec, u: C64) -> Result<HirotaResidual> {
        assert!(
            s >= 1 && s <= self.max_s(),
            "spin index {s} outside 1..={}",
            self.max_s()
        );
        let ev = |e: &TExpression, at: C64| eval_with_scale(e, q, spec, at);
        let (tp, tp_s) = ev(&self.t1[s], u + 0.5)?;
        let (tm, tm_s) = ev(&self.t1[s], u - 0.5)?;
        let (t2, t2_s) = ev(&self.t2[s], u)?;
        let (tu, tu_s) = ev(&self.t1[s + 1], u)?;
        let (td, td_s) = ev(&self.t1[s - 1], u)?;
        let (gp, gp_s) = ev(&self.t2[s], u + 0.5)?;
        let (gm, gm_s) = ev(&self.t2[s], u - 0.5)?;
        let (gu, gu_s) = ev(&self.t2[s + 1], u)?;
        let (gd, gd_s) = ev(&self.t2[s - 1], u)?;
        Ok(HirotaResidual {
            t_system: tp * tm - t2 - tu * td,
            t_system_scale: tp_s * tm_s + t2_s + tu_s * td_s,
            t2_system: gp * gm - gu * gd,
            t2_system_scale: gp_s * gm_s + gu_s * gd_s,
        })
    }
}

pub fn hirota_residual(
    s: usize,
    include_c: bool,
    q: &impl Eval,
    spec: &ChainSpec,
    u: C64,
) -> Result<HirotaResidual> {
    Hierarchy::new(s, include_c).residual(s, q, spec, u)
}

/// Monic real-coefficient `Q` with roots uniform in `[-2, 2] x [-1, 1]i`,
/// complex ones in conjugate pairs; odd degrees get one real root.
pub fn random_q<R: Rng + ?Sized>(rng: &mut R, degree: usize) -> Polynomial {
    let mut roots = Vec::with_capacity(degree);
    for _ in 0..degree / 2 {
        let z = C64::new(rng.gen_range(-2.0..2.0), rng.gen_range(-1.0..1.0));
        roots.push(z);
        roots.push(z.conj());
    }
    if degree % 2 == 1 {
        roots.push(C64::new(rng.gen_range(-2.0..2.0), 0.0));
    }
    let q = Polynomial::from_roots(&roots);
    // Conjugate pairs give real coefficients; drop the round-off imaginary parts.
    Polynomial::new(q.coeffs().iter().map(|c| C64::new(c.re, 0.0)).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HirotaSample {
    pub u: f64,
    pub s: usize,
    pub include_c: bool,
    pub residual: HirotaResidual,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HirotaSweep {
    pub q: Polynomial,
    pub samples: Vec<HirotaSample>,
}

/// Draws a random `Q` and `points` real nodes in `[0.1, 2]`, redrawing the
/// whole set until every residual up to `hierarchy.max_s()` is evaluable.
pub fn hirota_sweep<R: Rng + ?Sized>(
    rng: &mut R,
    hierarchy: &Hierarchy,
    spec: &ChainSpec,
    max_q_degree: usize,
    points: usize,
) -> HirotaSweep {
    loop {
        let degree = rng.gen_range(1..=max_q_degree);
        let q = random_q(rng, degree);
        let us: Vec<f64> = (0..points).map(|_| rng.gen_range(0.1..2.0)).collect();
        let mut samples = Vec::new();
        let ok = us.iter().all(|&u| {
            (1..=hierarchy.max_s()).all(|s| match hierarchy.residual(s, &q, spec, C64::new(u, 0.0)) {
                Ok(residual) => {
                    samples.push(HirotaSample {
                        u,
                        s,
                        include_c: hierarchy.include_c,
                        residual,
                    });
                    true
                }
                Err(_) => false,
            })
        });
        if ok {
            return HirotaSweep { q, samples };
        }
    }
}
