//! Operators of the open spin-1/2 XXX chain on the 2^N-dimensional chain space.
//!
//! Site 1 is the most significant tensor factor. Basis state `|0>` is spin up
//! (`sigma^z = +1`). The auxiliary space of the monodromy is never
//! materialised as a 2^(N+1) matrix; instead an auxiliary-space vector is a
//! pair of chain vectors and the R-matrices act on that pair directly.

use std::fmt;
use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::algebra::C64;
use crate::error::{Error, Result};

/// Default upper bound on the chain length.
pub const DEFAULT_MAX_SITES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryParams {
    pub p: f64,
    pub q: f64,
    pub xi: f64,
    /// `sqrt(1 + xi^2)`.
    pub alpha: f64,
}

impl BoundaryParams {
    pub fn new(p: f64, q: f64, xi: f64) -> Result<Self> {
        Self::with_alpha(p, q, xi, (1.0 + xi * xi).sqrt())
    }

    /// Builds the parameters from `xi^2` and the sign of `xi`, so that
    /// perfect squares such as `1 + 3 = 4` give an exact `alpha`.
    pub fn from_xi_squared(p: f64, q: f64, xi_squared: f64, negative: bool) -> Result<Self> {
        if !(xi_squared >= 0.0) {
            return Err(Error::InvalidParams(format!("xi^2 = {xi_squared} is negative")));
        }
        let xi = if negative {
            -xi_squared.sqrt()
        } else {
            xi_squared.sqrt()
        };
        Self::with_alpha(p, q, xi, (1.0 + xi_squared).sqrt())
    }

    fn with_alpha(p: f64, q: f64, xi: f64, alpha: f64) -> Result<Self> {
        if !(p.is_finite() && q.is_finite() && xi.is_finite()) {
            return Err(Error::InvalidParams("non-finite boundary parameter".into()));
        }
        if p == 0.0 || q == 0.0 {
            return Err(Error::InvalidParams("p and q must be nonzero".into()));
        }
        Ok(Self { p, q, xi, alpha })
    }

    /// `p = 1/4, q = 1/2, xi = -sqrt(3)`, with `alpha = 2` exactly.
    pub fn table_preset() -> Self {
        Self::from_xi_squared(0.25, 0.5, 3.0, true).expect("valid preset")
    }

    /// Draws `|p|, |q|` from `[0.2, 2)` and `|xi|` from `[0.5, 2)`, each with an
    /// independent random sign, in the order p, q, xi.
    pub fn random_generic<R: rand::Rng + ?Sized>(rng: &mut R) -> Self {
        let mut draw = |lo: f64, hi: f64| {
            let sign = if rng.gen_bool(0.5) { -1.0 } else { 1.0 };
            sign * rng.gen_range(lo..hi)
        };
        let p = draw(0.2, 2.0);
        let q = draw(0.2, 2.0);
        let xi = draw(0.5, 2.0);
        Self::new(p, q, xi).expect("draw ranges exclude zero")
    }

    /// The draw used by the randomized completeness checks for `seed`.
    pub fn seeded_generic(seed: u64) -> Self {
        use rand::SeedableRng;
        Self::random_generic(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed))
    }
}

/// Branch of the sign-dependent coefficient functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Sign {
    #[default]
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
}

impl Sign {
    pub fn factor(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sign::Plus => "+",
            Sign::Minus => "-",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainSpec {
    pub n_sites: usize,
    pub params: BoundaryParams,
    pub sign: Sign,
}

impl ChainSpec {
    pub fn new(n_sites: usize, params: BoundaryParams) -> Result<Self> {
        Self::with_cap(n_sites, params, DEFAULT_MAX_SITES)
    }

    pub fn with_cap(n_sites: usize, params: BoundaryParams, cap: usize) -> Result<Self> {
        if n_sites == 0 || n_sites > cap {
            return Err(Error::ChainLength { n: n_sites, cap });
        }
        Ok(Self {
            n_sites,
            params,
            sign: Sign::Plus,
        })
    }

    pub fn with_sign(mut self, sign: Sign) -> Self {
        self.sign = sign;
        self
    }

    pub fn dim(&self) -> usize {
        1 << self.n_sites
    }

    /// Bit position of (1-based) `site` in a basis index.
    fn bit(&self, site: usize) -> usize {
        self.n_sites - site
    }
}

/// Dense square matrix over `C64`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseOperator {
    dim: usize,
    entries: Vec<C64>,
}

impl DenseOperator {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            entries: vec![C64::new(0.0, 0.0); dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_rows(rows: &[Vec<C64>]) -> Self {
        let dim = rows.len();
        assert!(rows.iter().all(|r| r.len() == dim), "matrix must be square");
        Self {
            dim,
            entries: rows.concat(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[C64] {
        &self.entries
    }

    pub fn row(&self, i: usize) -> &[C64] {
        &self.entries[i * self.dim..(i + 1) * self.dim]
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.entries[i * n + k];
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                let brow = &other.entries[k * n..(k + 1) * n];
                let orow = &mut out.entries[i * n..(i + 1) * n];
                for (o, b) in orow.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        Self {
            dim: self.dim,
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(C64::new(-1.0, 0.0)))
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            dim: self.dim,
            entries: self.entries.iter().map(|a| a * s).collect(),
        }
    }

    pub fn commutator(&self, other: &Self) -> Self {
        self.matmul(other).sub(&other.matmul(self))
    }

    pub fn transpose(&self) -> Self {
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out.entries[j * n + i] = self.entries[i * n + j];
            }
        }
        out
    }

    pub fn kron(&self, other: &Self) -> Self {
        let (n, m) = (self.dim, other.dim);
        let mut out = Self::zeros(n * m);
        for i in 0..n {
            for j in 0..n {
                let a = self.entries[i * n + j];
                for k in 0..m {
                    for l in 0..m {
                        out[(i * m + k, j * m + l)] = a * other.entries[k * m + l];
                    }
                }
            }
        }
        out
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self[(i, i)]).sum()
    }

    /// Largest entry magnitude.
    pub fn max_abs(&self) -> f64 {
        self.entries.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        (0..self.dim)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Real part as an `nalgebra` matrix.
    pub fn to_real_matrix(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_fn(self.dim, self.dim, |i, j| self[(i, j)].re)
    }
}

impl Index<(usize, usize)> for DenseOperator {
    type Output = C64;

    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.entries[i * self.dim + j]
    }
}

impl IndexMut<(usize, usize)> for DenseOperator {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.entries[i * self.dim + j]
    }
}

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Two-site permutation matrix.
pub fn permutation() -> DenseOperator {
    let mut m = DenseOperator::zeros(4);
    m[(0, 0)] = c(1.0);
    m[(1, 2)] = c(1.0);
    m[(2, 1)] = c(1.0);
    m[(3, 3)] = c(1.0);
    m
}

/// `R(u) = u + P`.
pub fn r_matrix(u: C64) -> DenseOperator {
    DenseOperator::identity(4).scale(u).add(&permutation())
}

/// `diag(p + u, p - u)`.
pub fn k_minus(u: C64, params: &BoundaryParams) -> DenseOperator {
    DenseOperator::from_rows(&[vec![params.p + u, c(0.0)], vec![c(0.0), params.p - u]])
}

pub fn k_plus(u: C64, params: &BoundaryParams) -> DenseOperator {
    let off = params.xi * (u + 1.0);
    DenseOperator::from_rows(&[vec![params.q + u + 1.0, off], vec![off, params.q - u - 1.0]])
}

/// A vector in auxiliary (2-dim) tensor chain space, stored as the two
/// chain-space components.
type AuxVector = [Vec<C64>; 2];

/// Applies `R_{0n}(u) = u + P_{0n}` in place.
fn apply_r(spec: &ChainSpec, site: usize, u: C64, psi: &mut AuxVector) {
    let bit = 1usize << spec.bit(site);
    for i in 0..spec.dim() {
        if i & bit != 0 {
            continue;
        }
        let j = i | bit;
        // Amplitudes (aux, site-bit): (0,0)=psi0[i] (0,1)=psi0[j] (1,0)=psi1[i] (1,1)=psi1[j].
        let (a00, a01, a10, a11) = (psi[0][i], psi[0][j], psi[1][i], psi[1][j]);
        psi[0][i] = u * a00 + a00;
        psi[1][j] = u * a11 + a11;
        psi[0][j] = u * a01 + a10;
        psi[1][i] = u * a10 + a01;
    }
}

fn apply_aux(k: &DenseOperator, psi: &mut AuxVector) {
    for i in 0..psi[0].len() {
        let (a, b) = (psi[0][i], psi[1][i]);
        psi[0][i] = k[(0, 0)] * a + k[(0, 1)] * b;
        psi[1][i] = k[(1, 0)] * a + k[(1, 1)] * b;
    }
}

/// Computes `t(u) v` without forming `t(u)`.
pub fn transfer_apply(u: C64, spec: &ChainSpec, v: &[C64]) -> Vec<C64> {
    assert_eq!(v.len(), spec.dim());
    let km = k_minus(u, &spec.params);
    let kp = k_plus(u, &spec.params);
    let zero = vec![C64::new(0.0, 0.0); v.len()];
    let mut out = zero.clone();
    for a in 0..2 {
        let mut psi: AuxVector = [zero.clone(), zero.clone()];
        psi[a].copy_from_slice(v);
        // Rightmost factor acts first: T-hat = R_{0N} ... R_{01}.
        for site in 1..=spec.n_sites {
            apply_r(spec, site, u, &mut psi);
        }
        apply_aux(&km, &mut psi);
        // T = R_{01} ... R_{0N}.
        for site in (1..=spec.n_sites).rev() {
            apply_r(spec, site, u, &mut psi);
        }
        apply_aux(&kp, &mut psi);
        for (o, x) in out.iter_mut().zip(&psi[a]) {
            *o += x;
        }
    }
    out
}

/// Dense transfer matrix `t(u) = tr_0 K+ T K- T-hat`.
pub fn transfer_matrix(u: C64, spec: &ChainSpec) -> DenseOperator {
    let dim = spec.dim();
    let mut t = DenseOperator::zeros(dim);
    let mut e = vec![C64::new(0.0, 0.0); dim];
    for j in 0..dim {
        e[j] = c(1.0);
        let col = transfer_apply(u, spec, &e);
        e[j] = c(0.0);
        for (i, x) in col.into_iter().enumerate() {
            t[(i, j)] = x;
        }
    }
    t
}

/// Open-chain Hamiltonian with a `1/p` field on site N and a
/// `1/q (sigma^z + xi sigma^x)` field on site 1.
pub fn hamiltonian(spec: &ChainSpec) -> Result<DenseOperator> {
    let n = spec.n_sites;
    if n < 2 {
        return Err(Error::ChainLength {
            n,
            cap: DEFAULT_MAX_SITES,
        });
    }
    let dim = spec.dim();
    let BoundaryParams { p, q, xi, .. } = spec.params;
    let sz = |i: usize, site: usize| -> f64 {
        if i & (1 << spec.bit(site)) == 0 {
            1.0
        } else {
            -1.0
        }
    };
    let mut h = DenseOperator::zeros(dim);
    for i in 0..dim {
        let mut diag = 0.0;
        for site in 1..n {
            let (a, b) = (sz(i, site), sz(i, site + 1));
            diag += a * b;
            if a != b {
                // sigma^x sigma^x + sigma^y sigma^y flips an antiparallel pair with weight 2.
                let j = i ^ (1 << spec.bit(site)) ^ (1 << spec.bit(site + 1));
                h[(j, i)] += c(2.0);
            }
        }
        diag += sz(i, n) / p + sz(i, 1) / q;
        h[(i, i)] += c(diag);
        let j = i ^ (1 << spec.bit(1));
        h[(j, i)] += c(xi / q);
    }
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn generic_spec(n: usize) -> ChainSpec {
        ChainSpec::new(n, BoundaryParams::new(0.37, -0.81, 1.23).unwrap()).unwrap()
    }

    fn rel_commutator(a: &DenseOperator, b: &DenseOperator) -> f64 {
        a.commutator(b).max_abs() / (a.max_abs() * b.max_abs())
    }

    #[test]
    fn r_matrix_examples() {
        assert_eq!(r_matrix(c(0.0)), permutation());
        let r2 = r_matrix(c(2.0));
        let expected = DenseOperator::from_rows(&[
            vec![c(3.0), c(0.0), c(0.0), c(0.0)],
            vec![c(0.0), c(2.0), c(1.0), c(0.0)],
            vec![c(0.0), c(1.0), c(2.0), c(0.0)],
            vec![c(0.0), c(0.0), c(0.0), c(3.0)],
        ]);
        assert_eq!(r2, expected);
        let prod = r_matrix(c(0.7)).matmul(&r_matrix(c(-0.7)));
        let diff = prod.sub(&DenseOperator::identity(4).scale(c(0.51)));
        assert!(diff.max_abs() < 1e-15);
    }

    #[test]
    fn k_matrix_examples() {
        let params = BoundaryParams::table_preset();
        assert_eq!(
            k_minus(c(0.0), &params),
            DenseOperator::identity(2).scale(c(0.25))
        );
        let km = k_minus(c(1.0), &params);
        assert_eq!((km[(0, 0)], km[(1, 1)]), (c(1.25), c(-0.75)));
        assert_eq!(k_minus(c(-0.25), &params)[(0, 0)], c(0.0));

        assert_eq!(k_plus(c(-1.0), &params), DenseOperator::identity(2).scale(c(0.5)));
        let kp = k_plus(c(0.0), &params);
        let s3 = 3f64.sqrt();
        assert_eq!(kp[(0, 0)], c(1.5));
        assert_eq!(kp[(1, 1)], c(-0.5));
        assert!((kp[(0, 1)] - c(-s3)).norm() < 1e-15);
        let kp = k_plus(C64::new(0.3, -1.1), &params);
        assert_eq!(kp, kp.transpose());
    }

    #[test]
    fn yang_baxter_and_unitarity() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let id2 = DenseOperator::identity(2);
        let p = permutation();
        // P_13 = (1 x P)(P x 1)(1 x P).
        let p23 = id2.kron(&p);
        let p12 = p.kron(&id2);
        let p13 = p23.matmul(&p12).matmul(&p23);
        let id8 = DenseOperator::identity(8);
        let r = |u: C64, perm: &DenseOperator| id8.scale(u).add(perm);
        for _ in 0..5 {
            let u = C64::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let v = C64::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let lhs = r(u - v, &p12).matmul(&r(u, &p13)).matmul(&r(v, &p23));
            let rhs = r(v, &p23).matmul(&r(u, &p13)).matmul(&r(u - v, &p12));
            assert!(lhs.sub(&rhs).max_abs() < 1e-12);

            let unit = r_matrix(u).matmul(&r_matrix(-u));
            let target = DenseOperator::identity(4).scale(C64::new(1.0, 0.0) - u * u);
            assert!(unit.sub(&target).max_abs() < 1e-12);
        }
    }

    #[test]
    fn hamiltonian_is_traceless_real_symmetric() {
        for n in 2..=5 {
            let spec = generic_spec(n);
            let h = hamiltonian(&spec).unwrap();
            assert!(h.trace().norm() < 1e-12);
            assert_eq!(h, h.transpose());
            assert!(h.entries().iter().all(|z| z.im == 0.0));
        }
        let spec = ChainSpec::new(1, BoundaryParams::table_preset()).unwrap();
        assert!(hamiltonian(&spec).is_err());
    }

    #[test]
    fn transfer_matrices_commute() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in [2, 4] {
            let spec = generic_spec(n);
            let h = hamiltonian(&spec).unwrap();
            let t1 = transfer_matrix(c(0.7), &spec);
            let t2 = transfer_matrix(c(-0.3), &spec);
            assert!(rel_commutator(&t1, &t2) < 1e-10);
            let u = C64::new(rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5));
            let t = transfer_matrix(u, &spec);
            assert!(rel_commutator(&h, &t) < 1e-10);
        }
    }

    #[test]
    fn dense_and_matrix_free_transfer_agree() {
        let spec = generic_spec(3);
        let u = C64::new(0.4, 0.2);
        let t = transfer_matrix(u, &spec);
        let v: Vec<C64> = (0..8).map(|k| C64::new(k as f64 - 3.0, 0.5 * k as f64)).collect();
        let a = t.apply(&v);
        let b = transfer_apply(u, &spec, &v);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).norm() < 1e-12 * t.max_abs());
        }
    }

    #[test]
    fn preset_alpha_is_exact() {
        let p = BoundaryParams::table_preset();
        assert_eq!(p.alpha, 2.0);
        assert!((p.xi + 3f64.sqrt()).abs() < 1e-15);
        assert!(BoundaryParams::new(0.0, 1.0, 1.0).is_err());
        assert!(BoundaryParams::new(1.0, 0.0, 1.0).is_err());
        assert_eq!(BoundaryParams::new(1.0, 1.0, 0.0).unwrap().alpha, 1.0);
        assert!(ChainSpec::new(0, p).is_err());
        assert!(ChainSpec::new(11, p).is_err());
        assert!(ChainSpec::with_cap(11, p, 12).is_ok());
    }

    #[test]
    fn seeded_draws_are_reproducible_and_in_range() {
        assert_eq!(
            BoundaryParams::seeded_generic(7),
            BoundaryParams::seeded_generic(7)
        );
        assert_ne!(
            BoundaryParams::seeded_generic(7),
            BoundaryParams::seeded_generic(8)
        );
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut signs = [0usize; 2];
        for _ in 0..200 {
            let b = BoundaryParams::random_generic(&mut rng);
            assert!((0.2..2.0).contains(&b.p.abs()) && (0.2..2.0).contains(&b.q.abs()));
            assert!((0.5..2.0).contains(&b.xi.abs()));
            assert!((b.alpha * b.alpha - 1.0 - b.xi * b.xi).abs() < 1e-12);
            signs[(b.p < 0.0) as usize] += 1;
        }
        assert!(signs[0] > 50 && signs[1] > 50);
    }
}
