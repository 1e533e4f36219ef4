//! Univariate polynomials over `Complex64`.
//!
//! Two representations are used. [`Polynomial`] stores coefficients in the
//! spectral parameter `u`. [`XBasisPolynomial`] stores coefficients in
//! `x = u(u+1)`, which is the natural variable for anything invariant under
//! the crossing map `u -> -u-1`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Default absolute tolerance on the scaled root residual.
pub const ROOT_TOL: f64 = 1e-10;
/// Aberth iterations before falling back to companion-matrix eigenvalues.
pub const ABERTH_MAX_ITER: usize = 200;
/// Roots closer than this are reported as one repeated root.
pub const CLUSTER_RADIUS: f64 = 1e-6;

const SYMMETRY_NODES: [f64; 6] = [-1.45, -0.85, -0.2, 0.35, 0.8, 1.3];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polynomial {
    coeffs: Vec<C64>,
}

impl Polynomial {
    /// Builds a polynomial from ascending coefficients, trimming trailing zeros.
    pub fn new(mut coeffs: Vec<C64>) -> Self {
        while coeffs.last().is_some_and(|c| *c == C64::new(0.0, 0.0)) {
            coeffs.pop();
        }
        Self { coeffs }
    }

    pub fn from_real(coeffs: &[f64]) -> Self {
        Self::new(coeffs.iter().map(|&c| C64::new(c, 0.0)).collect())
    }

    pub fn zero() -> Self {
        Self { coeffs: Vec::new() }
    }

    pub fn constant(c: C64) -> Self {
        Self::new(vec![c])
    }

    pub fn one() -> Self {
        Self::constant(C64::new(1.0, 0.0))
    }

    /// Monic polynomial with the given roots.
    pub fn from_roots(roots: &[C64]) -> Self {
        let mut coeffs = vec![C64::new(1.0, 0.0)];
        for &r in roots {
            let mut next = vec![C64::new(0.0, 0.0); coeffs.len() + 1];
            for (k, &c) in coeffs.iter().enumerate() {
                next[k + 1] += c;
                next[k] -= r * c;
            }
            coeffs = next;
        }
        Self::new(coeffs)
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree, with the zero polynomial reported as degree 0.
    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn leading(&self) -> C64 {
        self.coeffs.last().copied().unwrap_or_default()
    }

    /// Largest coefficient magnitude.
    pub fn max_coeff(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn eval(&self, u: C64) -> C64 {
        poly_eval(self, u)
    }

    /// Sum of |c_k u^k|, the natural rounding-error scale of [`Polynomial::eval`].
    pub fn eval_abs(&self, u: C64) -> f64 {
        let r = u.norm();
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * r + c.norm())
    }

    pub fn derivative(&self) -> Self {
        Self::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &c)| c * k as f64)
                .collect(),
        )
    }

    pub fn mul(&self, other: &Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return Self::zero();
        }
        let mut out = vec![C64::new(0.0, 0.0); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            for (j, &b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Self::new(out)
    }

    pub fn scale(&self, s: C64) -> Self {
        Self::new(self.coeffs.iter().map(|&c| c * s).collect())
    }

    /// Rescales so the leading coefficient is one.
    pub fn monic(&self) -> Self {
        let lead = self.leading();
        if lead == C64::new(0.0, 0.0) {
            return self.clone();
        }
        self.scale(lead.inv())
    }
}

/// Horner evaluation.
pub fn poly_eval(p: &Polynomial, u: C64) -> C64 {
    p.coeffs
        .iter()
        .rev()
        .fold(C64::new(0.0, 0.0), |acc, &c| acc * u + c)
}

/// Coefficients of `p(u + delta)`.
pub fn poly_shift(p: &Polynomial, delta: f64) -> Polynomial {
    // Horner in the polynomial ring: r <- r * (u + delta) + c_k.
    let n = p.coeffs.len();
    let mut out = vec![C64::new(0.0, 0.0); n];
    for (filled, &c) in p.coeffs.iter().rev().enumerate() {
        for k in (1..=filled).rev() {
            out[k] = out[k - 1] + out[k] * delta;
        }
        out[0] = out[0] * delta + c;
    }
    Polynomial::new(out)
}

/// Row max-magnitude equilibration and column scaling, in place. Returns the
/// column scales, or `None` if a column is identically zero.
fn equilibrate(a: &mut DMatrix<C64>, b: &mut DVector<C64>) -> Option<Vec<f64>> {
    for i in 0..a.nrows() {
        let m = a.row(i).iter().map(|c| c.norm()).fold(b[i].norm(), f64::max);
        if m > 0.0 {
            a.row_mut(i).unscale_mut(m);
            b[i] /= m;
        }
    }
    let mut col_scale = vec![1.0; a.ncols()];
    for (j, s) in col_scale.iter_mut().enumerate() {
        let m = a.column(j).iter().map(|c| c.norm()).fold(0.0, f64::max);
        if m == 0.0 {
            return None;
        }
        *s = m;
        a.column_mut(j).unscale_mut(m);
    }
    Some(col_scale)
}

fn unscale(x: &DVector<C64>, col_scale: &[f64]) -> DVector<C64> {
    DVector::from_iterator(x.len(), x.iter().zip(col_scale).map(|(v, s)| v / *s))
}

/// Solves the least-squares problem `a * x ~ b` with per-row max-magnitude
/// equilibration and column scaling, via SVD.
///
/// Returns `Error::RankDeficient` when the equilibrated system has a
/// numerically vanishing singular value.
pub fn lstsq(mut a: DMatrix<C64>, mut b: DVector<C64>) -> Result<DVector<C64>> {
    let (rows, cols) = a.shape();
    let col_scale = equilibrate(&mut a, &mut b).ok_or(Error::RankDeficient)?;
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > smax * 1e-13 * (rows.max(cols) as f64)) {
        return Err(Error::RankDeficient);
    }
    let x = svd.solve(&b, 0.0).map_err(|_| Error::RankDeficient)?;
    Ok(unscale(&x, &col_scale))
}

/// As [`lstsq`], but singular values below `1e-15` of the largest are
/// dropped (minimum-norm solution) instead of reported.
///
/// Fails only on an identically zero column.
pub fn lstsq_truncated(mut a: DMatrix<C64>, mut b: DVector<C64>) -> Result<DVector<C64>> {
    let col_scale = equilibrate(&mut a, &mut b).ok_or(Error::RankDeficient)?;
    let svd = a.svd(true, true);
    let cutoff = svd.singular_values.max() * 1e-15;
    let x = svd.solve(&b, cutoff).map_err(|_| Error::RankDeficient)?;
    Ok(unscale(&x, &col_scale))
}

/// Least-squares polynomial fit of the given degree.
///
/// The returned residual is the largest per-sample mismatch
/// `|p(node) - value|`, relative to `max(|value|, max_k |c| |node|^k)` where
/// `|c|` is the largest fitted coefficient.
pub fn poly_fit(samples: &[(C64, C64)], degree: usize) -> Result<(Polynomial, f64)> {
    let cols = degree + 1;
    if samples.len() < cols {
        return Err(Error::TooFewSamples {
            degree,
            needed: cols,
            got: samples.len(),
        });
    }
    for (i, (a, _)) in samples.iter().enumerate() {
        for (b, _) in &samples[i + 1..] {
            if (a - b).norm() <= 1e-14 * a.norm().max(b.norm()).max(1.0) {
                return Err(Error::RankDeficient);
            }
        }
    }
    let a = DMatrix::from_fn(samples.len(), cols, |i, j| samples[i].0.powi(j as i32));
    let b = DVector::from_iterator(samples.len(), samples.iter().map(|s| s.1));
    let x = lstsq(a, b)?;
    let p = Polynomial::new(x.iter().copied().collect());
    let cmax = p.max_coeff();
    let residual = samples
        .iter()
        .map(|&(u, v)| {
            let scale = v.norm().max(cmax * u.norm().max(1.0).powi(degree as i32));
            if scale == 0.0 {
                0.0
            } else {
                (p.eval(u) - v).norm() / scale
            }
        })
        .fold(0.0, f64::max);
    Ok((p, residual))
}

/// All roots of `p` with multiplicity.
///
/// Aberth iteration first; if it fails to converge the eigenvalues of the
/// companion matrix are used instead. Roots within [`CLUSTER_RADIUS`] of each
/// other are merged to their mean and reported repeatedly.
pub fn poly_roots(p: &Polynomial) -> Result<Vec<C64>> {
    if p.is_zero() {
        return Err(Error::ZeroPolynomial);
    }
    let deg = p.degree();
    if deg == 0 {
        return Ok(Vec::new());
    }
    let monic = p.monic();
    let mut roots = match aberth(&monic, ROOT_TOL, ABERTH_MAX_ITER) {
        Some(r) => r,
        None => companion_roots(&monic),
    };
    cluster(&mut roots, CLUSTER_RADIUS);
    Ok(roots)
}

fn scaled_residual(p: &Polynomial, z: C64) -> f64 {
    let norm = p.max_coeff() * z.norm().max(1.0).powi(p.degree() as i32);
    p.eval(z).norm() / norm
}

fn aberth(p: &Polynomial, tol: f64, max_iter: usize) -> Option<Vec<C64>> {
    let deg = p.degree();
    let dp = p.derivative();
    let c = p.coeffs();
    // Initial guesses on a circle sized by the geometric mean of the roots.
    let radius = c[0].norm().powf(1.0 / deg as f64);
    let radius = if radius > 0.0 { radius } else { 1.0 };
    let centre = -c[deg - 1] / deg as f64;
    let mut z: Vec<C64> = (0..deg)
        .map(|k| {
            let theta = std::f64::consts::TAU * k as f64 / deg as f64 + 0.4;
            centre + C64::from_polar(radius, theta)
        })
        .collect();
    let mut done = vec![false; deg];
    for _ in 0..max_iter {
        for k in 0..deg {
            if done[k] {
                continue;
            }
            let pv = p.eval(z[k]);
            if pv == C64::new(0.0, 0.0) {
                done[k] = true;
                continue;
            }
            let ratio = pv / dp.eval(z[k]);
            let repulsion: C64 = (0..deg).filter(|&j| j != k).map(|j| (z[k] - z[j]).inv()).sum();
            let step = ratio / (C64::new(1.0, 0.0) - ratio * repulsion);
            if !step.is_finite() {
                return None;
            }
            z[k] -= step;
            if step.norm() <= 1e-15 * z[k].norm().max(1e-30) {
                done[k] = true;
            }
        }
        if done.iter().all(|&d| d) {
            break;
        }
    }
    z.iter().all(|&r| scaled_residual(p, r) <= tol).then_some(z)
}

fn companion_roots(p: &Polynomial) -> Vec<C64> {
    let deg = p.degree();
    let c = p.coeffs();
    let mut m = DMatrix::<C64>::zeros(deg, deg);
    for i in 1..deg {
        m[(i, i - 1)] = C64::new(1.0, 0.0);
    }
    for i in 0..deg {
        m[(i, deg - 1)] = -c[i];
    }
    let eig = m.schur().eigenvalues().expect("complex Schur form is triangular");
    let dp = p.derivative();
    eig.iter()
        .map(|&z0| {
            let mut z = z0;
            for _ in 0..3 {
                let d = dp.eval(z);
                if d.norm() == 0.0 {
                    break;
                }
                let next = z - p.eval(z) / d;
                if !next.is_finite() || scaled_residual(p, next) > scaled_residual(p, z) {
                    break;
                }
                z = next;
            }
            z
        })
        .collect()
}

fn cluster(roots: &mut [C64], radius: f64) {
    let n = roots.len();
    let mut group = vec![usize::MAX; n];
    for i in 0..n {
        if group[i] != usize::MAX {
            continue;
        }
        group[i] = i;
        // Transitive closure so chains of nearby roots land in one group.
        let mut frontier = vec![i];
        while let Some(a) = frontier.pop() {
            for b in 0..n {
                if group[b] == usize::MAX && (roots[a] - roots[b]).norm() < radius {
                    group[b] = i;
                    frontier.push(b);
                }
            }
        }
    }
    for g in 0..n {
        let members: Vec<usize> = (0..n).filter(|&k| group[k] == g).collect();
        if members.len() > 1 {
            let mean = members.iter().map(|&k| roots[k]).sum::<C64>() / members.len() as f64;
            for k in members {
                roots[k] = mean;
            }
        }
    }
}

/// Anything that can be evaluated at a complex point.
pub trait Eval {
    fn eval(&self, u: C64) -> C64;
}

impl Eval for Polynomial {
    fn eval(&self, u: C64) -> C64 {
        Polynomial::eval(self, u)
    }
}

impl Eval for XBasisPolynomial {
    fn eval(&self, u: C64) -> C64 {
        XBasisPolynomial::eval(self, u)
    }
}

/// Monic polynomial in `x = u(u+1)` held as its `x`-roots.
///
/// Evaluation is a product of linear factors, so it keeps full relative
/// accuracy where the expanded coefficients would cancel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactoredXPolynomial {
    x_roots: Vec<C64>,
}

impl FactoredXPolynomial {
    pub fn new(x_roots: Vec<C64>) -> Self {
        Self { x_roots }
    }

    /// From Bethe roots `lambda_j`, using `x_j = lambda_j (lambda_j + 1)`.
    pub fn from_bethe_roots(roots: &[C64]) -> Self {
        Self::new(roots.iter().map(|&l| l * (l + 1.0)).collect())
    }

    pub fn x_roots(&self) -> &[C64] {
        &self.x_roots
    }

    pub fn eval_x(&self, x: C64) -> C64 {
        self.x_roots.iter().map(|r| x - r).product()
    }

    pub fn expand(&self) -> XBasisPolynomial {
        XBasisPolynomial::from_x_roots(&self.x_roots)
    }
}

impl Eval for FactoredXPolynomial {
    fn eval(&self, u: C64) -> C64 {
        self.eval_x(u * (u + 1.0))
    }
}

/// Polynomial in `x = u(u+1)`, coefficients ascending in `x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XBasisPolynomial {
    xcoeffs: Vec<C64>,
}

impl XBasisPolynomial {
    pub fn new(mut xcoeffs: Vec<C64>) -> Self {
        while xcoeffs.last().is_some_and(|c| *c == C64::new(0.0, 0.0)) {
            xcoeffs.pop();
        }
        Self { xcoeffs }
    }

    pub fn from_real(xcoeffs: &[f64]) -> Self {
        Self::new(xcoeffs.iter().map(|&c| C64::new(c, 0.0)).collect())
    }

    /// Monic polynomial in `x` with the given `x`-roots.
    pub fn from_x_roots(xroots: &[C64]) -> Self {
        Self::new(Polynomial::from_roots(xroots).coeffs)
    }

    pub fn xcoeffs(&self) -> &[C64] {
        &self.xcoeffs
    }

    pub fn x_degree(&self) -> usize {
        self.xcoeffs.len().saturating_sub(1)
    }

    /// The same coefficients read as a polynomial in `x`.
    pub fn as_x_polynomial(&self) -> Polynomial {
        Polynomial::new(self.xcoeffs.clone())
    }

    pub fn eval_x(&self, x: C64) -> C64 {
        self.xcoeffs
            .iter()
            .rev()
            .fold(C64::new(0.0, 0.0), |acc, &c| acc * x + c)
    }

    pub fn eval(&self, u: C64) -> C64 {
        self.eval_x(u * (u + 1.0))
    }

    pub fn eval_abs(&self, u: C64) -> f64 {
        let r = (u * (u + 1.0)).norm();
        self.xcoeffs.iter().rev().fold(0.0, |acc, c| acc * r + c.norm())
    }

    /// Roots in the `x` variable.
    pub fn x_roots(&self) -> Result<Vec<C64>> {
        poly_roots(&self.as_x_polynomial())
    }
}

/// Expands an `x`-basis polynomial in powers of `u`.
pub fn x_to_u(p: &XBasisPolynomial) -> Polynomial {
    let x = Polynomial::from_real(&[0.0, 1.0, 1.0]);
    let mut out = Polynomial::zero();
    for &c in p.xcoeffs.iter().rev() {
        out = out.mul(&x);
        let mut coeffs = out.coeffs.clone();
        if coeffs.is_empty() {
            coeffs.push(C64::new(0.0, 0.0));
        }
        coeffs[0] += c;
        out = Polynomial::new(coeffs);
    }
    out
}

/// Re-expresses a `u`-basis polynomial in `x = u(u+1)`.
///
/// The odd part of `p` about `u = -1/2` is discarded, so a crossing-symmetric
/// input is reproduced and an asymmetric one is mapped to its symmetric part.
/// `defect` measures how far the input was from symmetric: the largest
/// `|p(u) - p(-u-1)|` over fixed test nodes, normalised by the maximal
/// coefficient times `max(1,|u|)^deg`.
pub fn u_to_x(p: &Polynomial) -> Result<(XBasisPolynomial, f64)> {
    let deg = p.degree();
    if p.is_zero() {
        return Ok((XBasisPolynomial::new(Vec::new()), 0.0));
    }
    if deg % 2 == 1 {
        return Err(Error::OddDegree(deg));
    }
    let norm = p.max_coeff();
    let defect = SYMMETRY_NODES
        .iter()
        .map(|&t| {
            let u = C64::new(t, 0.0);
            let mirrored = -u - 1.0;
            let w = norm * t.abs().max((t + 1.0).abs()).max(1.0).powi(deg as i32);
            (p.eval(u) - p.eval(mirrored)).norm() / w
        })
        .fold(0.0, f64::max);

    // With u = t - 1/2 we have x = t^2 - 1/4, so p(t - 1/2) is even in t and
    // its even coefficients are a polynomial in y = t^2 = x + 1/4.
    let centred = poly_shift(p, -0.5);
    let in_y = Polynomial::new(centred.coeffs.iter().step_by(2).copied().collect());
    let xcoeffs = poly_shift(&in_y, 0.25).coeffs;
    Ok((XBasisPolynomial::new(xcoeffs), defect))
}
