//! Exact diagonalisation of the Hamiltonian and reconstruction of each
//! state's transfer-matrix eigenvalue as an explicit polynomial.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::algebra::{lstsq_truncated, x_to_u, Eval, Polynomial, XBasisPolynomial, C64};
use crate::error::{Error, Result};
use crate::lattice::{hamiltonian, transfer_apply, ChainSpec};

/// Largest held-out mismatch accepted for a reconstructed eigenvalue.
pub const LAMBDA_FIT_TOL: f64 = 1e-8;
/// Relative (to the largest |E|) gap below which two levels count as degenerate.
pub const DEGENERACY_TOL: f64 = 1e-8;
/// Generic point used to split degenerate eigenspaces of H.
const SPLITTING_POINT: f64 = 0.618_033_988_749_895;
const HELD_OUT_NODES: [f64; 3] = [0.1, 1.05, 2.9];

#[derive(Debug, Clone)]
pub struct EigenSystem {
    /// Ascending.
    pub energies: Vec<f64>,
    /// Orthonormal eigenvectors, one per column, in the order of `energies`.
    pub vectors: DMatrix<f64>,
    /// Spectral norm of H (largest |E|).
    pub h_norm: f64,
}

impl EigenSystem {
    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }

    /// Indices of the levels degenerate with level `k` (always contains `k`).
    pub fn cluster(&self, k: usize) -> Vec<usize> {
        let tol = DEGENERACY_TOL * self.h_norm.max(1.0);
        let mut lo = k;
        while lo > 0 && self.energies[lo] - self.energies[lo - 1] < tol {
            lo -= 1;
        }
        let mut hi = k;
        while hi + 1 < self.len() && self.energies[hi + 1] - self.energies[hi] < tol {
            hi += 1;
        }
        (lo..=hi).collect()
    }
}

/// Transfer-matrix eigenvalue of one state.
#[derive(Debug, Clone)]
pub struct LambdaFunction {
    pub state_index: usize,
    /// Degree `2N + 2` in `u`, leading coefficient 2.
    pub lam: Polynomial,
    /// The same polynomial in `x = u(u+1)`.
    pub lam_x: XBasisPolynomial,
    /// Largest relative mismatch at the held-out nodes.
    pub fit_residual: f64,
    /// The state sat in a degenerate eigenspace of H and was refined with t(u).
    pub degenerate: bool,
}

impl LambdaFunction {
    pub fn eval(&self, u: C64) -> C64 {
        self.lam_x.eval(u)
    }
}

impl Eval for LambdaFunction {
    fn eval(&self, u: C64) -> C64 {
        self.lam_x.eval(u)
    }
}

pub fn diagonalize_h(spec: &ChainSpec) -> Result<EigenSystem> {
    let h = hamiltonian(spec)?.to_real_matrix();
    let eig = SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let energies: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = DMatrix::from_fn(eig.eigenvectors.nrows(), order.len(), |i, j| {
        eig.eigenvectors[(i, order[j])]
    });
    let h_norm = energies.iter().map(|e| e.abs()).fold(0.0, f64::max);
    Ok(EigenSystem {
        energies,
        vectors,
        h_norm,
    })
}

/// `<v| t(u) |v> / <v|v>`.
pub fn rayleigh_quotient(spec: &ChainSpec, v: &[f64], u: f64) -> C64 {
    let vc: Vec<C64> = v.iter().map(|&x| C64::new(x, 0.0)).collect();
    let tv = transfer_apply(C64::new(u, 0.0), spec, &vc);
    let num: C64 = vc.iter().zip(&tv).map(|(a, b)| a * b).sum();
    let den: f64 = v.iter().map(|x| x * x).sum();
    num / den
}

/// Eigenvector used for state `k`, refined within its degenerate cluster.
///
/// Returns the vector and whether refinement was needed.
pub fn state_vector(spec: &ChainSpec, eig: &EigenSystem, k: usize) -> Result<(Vec<f64>, bool)> {
    if k >= eig.len() {
        return Err(Error::StateIndex {
            index: k,
            len: eig.len(),
        });
    }
    let cluster = eig.cluster(k);
    if cluster.len() == 1 {
        return Ok((eig.vectors.column(k).iter().copied().collect(), false));
    }
    // Diagonalise t(u*) restricted to the eigenspace. t(u) is symmetric at
    // real u, so the restriction is too.
    let m = cluster.len();
    let basis: Vec<Vec<f64>> = cluster
        .iter()
        .map(|&j| eig.vectors.column(j).iter().copied().collect())
        .collect();
    let images: Vec<Vec<C64>> = basis
        .iter()
        .map(|b| {
            let bc: Vec<C64> = b.iter().map(|&x| C64::new(x, 0.0)).collect();
            transfer_apply(C64::new(SPLITTING_POINT, 0.0), spec, &bc)
        })
        .collect();
    let restricted = DMatrix::from_fn(m, m, |i, j| {
        let a: f64 = basis[i].iter().zip(&images[j]).map(|(x, y)| x * y.re).sum();
        let b: f64 = basis[j].iter().zip(&images[i]).map(|(x, y)| x * y.re).sum();
        0.5 * (a + b)
    });
    let sub = SymmetricEigen::new(restricted);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| sub.eigenvalues[a].total_cmp(&sub.eigenvalues[b]));
    let pos = cluster.iter().position(|&j| j == k).expect("k is in its cluster");
    let coeffs = sub.eigenvectors.column(order[pos]);
    let mut v = vec![0.0; eig.vectors.nrows()];
    for (c, b) in coeffs.iter().zip(&basis) {
        for (vi, bi) in v.iter_mut().zip(b) {
            *vi += c * bi;
        }
    }
    Ok((v, true))
}

/// Right end of the sampling interval: the last T-Q collocation node, so
/// the fitted eigenvalue is never extrapolated there.
pub fn lambda_sample_span(n_sites: usize) -> f64 {
    0.25 + 0.35 * (4 * n_sites + 5) as f64
}

/// `3N + 6` Chebyshev nodes on `[0, lambda_sample_span(N)]`.
pub fn lambda_sample_nodes(n_sites: usize) -> Vec<f64> {
    let m = 3 * n_sites + 6;
    let half = 0.5 * lambda_sample_span(n_sites);
    (0..m)
        .map(|j| {
            let t = (std::f64::consts::PI * (2 * j + 1) as f64 / (2 * m) as f64).cos();
            half + half * t
        })
        .collect()
}

/// Reconstructs `Lambda(u)` for state `k`.
///
/// The Rayleigh quotient of `t(u)` is sampled at [`lambda_sample_nodes`] and
/// fitted by `2 x^(N+1) + sum_{j<=N} r_j x^j`; three held-out nodes validate
/// the fit.
pub fn lambda_for_state(spec: &ChainSpec, eig: &EigenSystem, k: usize) -> Result<LambdaFunction> {
    let (v, degenerate) = state_vector(spec, eig, k)?;
    lambda_from_vector(spec, &v, k, degenerate, &lambda_sample_nodes(spec.n_sites))
}

/// As [`lambda_for_state`], with caller-chosen sample nodes (at least `N + 1`).
pub fn lambda_from_vector(
    spec: &ChainSpec,
    v: &[f64],
    state_index: usize,
    degenerate: bool,
    nodes: &[f64],
) -> Result<LambdaFunction> {
    let n = spec.n_sites;
    let x_of = |u: f64| u * (u + 1.0);
    let values: Vec<C64> = nodes.iter().map(|&u| rayleigh_quotient(spec, v, u)).collect();
    let a = DMatrix::from_fn(nodes.len(), n + 1, |i, j| {
        C64::new(x_of(nodes[i]).powi(j as i32), 0.0)
    });
    let b = DVector::from_iterator(
        nodes.len(),
        nodes
            .iter()
            .zip(&values)
            .map(|(&u, &lam)| lam - 2.0 * x_of(u).powi(n as i32 + 1)),
    );
    let sol = lstsq_truncated(a, b)?;
    let mut xcoeffs: Vec<C64> = sol.iter().copied().collect();
    xcoeffs.push(C64::new(2.0, 0.0));
    let lam_x = XBasisPolynomial::new(xcoeffs);

    let fit_residual = HELD_OUT_NODES
        .iter()
        .map(|&u| {
            let uc = C64::new(u, 0.0);
            let exact = rayleigh_quotient(spec, v, u);
            (lam_x.eval(uc) - exact).norm() / lam_x.eval_abs(uc).max(exact.norm())
        })
        .fold(0.0, f64::max);
    if !(fit_residual <= LAMBDA_FIT_TOL) {
        return Err(Error::LambdaFit {
            state: state_index,
            residual: fit_residual,
        });
    }
    Ok(LambdaFunction {
        state_index,
        lam: x_to_u(&lam_x),
        lam_x,
        fit_residual,
        degenerate,
    })
}
