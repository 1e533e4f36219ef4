//! The inhomogeneous T-Q equation
//!
//! ```text
//! Lambda(u) Q(u) = a(u) Q(u-1) + d(u) Q(u+1) + Delta(u)
//! ```
//!
//! with `Q` a monic polynomial of degree N in `x = u(u+1)`. Given a
//! transfer-matrix eigenvalue `Lambda`, the equation is linear in the
//! non-leading coefficients of `Q`, so a collocation least-squares solve
//! gives a starting point; the `x`-roots of `Q` are then refined directly,
//! since the expanded coefficients lose relative accuracy once roots sit
//! among the nodes. The roots give the Bethe roots and the energy.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::algebra::{lstsq_truncated, x_to_u, Eval, FactoredXPolynomial, Polynomial, XBasisPolynomial, C64};
use crate::error::{Error, Result};
use crate::lattice::ChainSpec;
use crate::spectrum::{diagonalize_h, lambda_for_state, LambdaFunction};

/// Radius around `u = -1/2` inside which `a`/`d` are not evaluated.
pub const POLE_RADIUS: f64 = 1e-3;
pub const DEFAULT_TQ_TOL: f64 = 1e-8;
pub const DEFAULT_ENERGY_TOL: f64 = 1e-6;
/// Largest acceptable imaginary part of an energy computed from roots.
pub const ENERGY_IMAG_TOL: f64 = 1e-8;
/// Two Q's closer than this (max-norm on x-coefficients, relative to the
/// larger coefficient) count as the same.
pub const DISTINCT_TOL: f64 = 1e-6;
const MAX_REFINE_ITER: usize = 150;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub tq: f64,
    pub energy: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            tq: DEFAULT_TQ_TOL,
            energy: DEFAULT_ENERGY_TOL,
        }
    }
}

fn check_pole(u: C64) -> Result<()> {
    if (u + 0.5).norm() < POLE_RADIUS {
        return Err(Error::NearPole {
            re: u.re,
            im: u.im,
            radius: POLE_RADIUS,
        });
    }
    Ok(())
}

/// `a(u) = (2u+2)/(2u+1) (u + s p)(alpha u + s q)(u+1)^(2N)` with `s` the
/// branch sign.
pub fn a_bar(u: C64, spec: &ChainSpec) -> Result<C64> {
    check_pole(u)?;
    let s = spec.sign.factor();
    let prm = &spec.params;
    Ok((2.0 * u + 2.0) / (2.0 * u + 1.0)
        * (u + s * prm.p)
        * (prm.alpha * u + s * prm.q)
        * (u + 1.0).powi(2 * spec.n_sites as i32))
}

/// `d(u) = a(-u-1)`.
pub fn d_bar(u: C64, spec: &ChainSpec) -> Result<C64> {
    a_bar(-u - 1.0, spec)
}

/// `Delta(u) = 2 (1 - alpha) (u(u+1))^(2N+1)`.
pub fn delta_term(u: C64, spec: &ChainSpec) -> C64 {
    2.0 * (1.0 - spec.params.alpha) * (u * (u + 1.0)).powi(2 * spec.n_sites as i32 + 1)
}

/// `c = N - 1 + s (1/p + alpha/q)` with `s` the branch sign.
pub fn energy_offset(spec: &ChainSpec) -> f64 {
    let prm = &spec.params;
    spec.n_sites as f64 - 1.0 + spec.sign.factor() * (1.0 / prm.p + prm.alpha / prm.q)
}

/// The four terms of the T-Q equation at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TqTerms {
    pub lhs: C64,
    pub a_term: C64,
    pub d_term: C64,
    pub inhomogeneous: C64,
}

impl TqTerms {
    pub fn residual(&self) -> C64 {
        self.lhs - self.a_term - self.d_term - self.inhomogeneous
    }

    /// Sum of term magnitudes.
    pub fn scale(&self) -> f64 {
        self.lhs.norm() + self.a_term.norm() + self.d_term.norm() + self.inhomogeneous.norm()
    }

    pub fn relative_residual(&self) -> f64 {
        let s = self.scale();
        if s == 0.0 {
            0.0
        } else {
            self.residual().norm() / s
        }
    }
}

/// Terms of the general equation
///
/// ```text
/// Lambda Q Q1 Q2 = a Q(u-1) Q1(u-1) Q1(u) + d Q(u+1) Q2(u+1) Q2(u) + Delta
/// ```
pub fn cysw_terms(
    lam: &impl Eval,
    q: &impl Eval,
    q1: &impl Eval,
    q2: &impl Eval,
    spec: &ChainSpec,
    u: C64,
) -> Result<TqTerms> {
    let a = a_bar(u, spec)?;
    let d = d_bar(u, spec)?;
    let up = u + 1.0;
    let dn = u - 1.0;
    Ok(TqTerms {
        lhs: lam.eval(u) * q.eval(u) * q1.eval(u) * q2.eval(u),
        a_term: a * q.eval(dn) * q1.eval(dn) * q1.eval(u),
        d_term: d * q.eval(up) * q2.eval(up) * q2.eval(u),
        inhomogeneous: delta_term(u, spec),
    })
}

/// LHS minus RHS of the general equation at `u`.
pub fn cysw_residual(
    lam: &impl Eval,
    q: &impl Eval,
    q1: &impl Eval,
    q2: &impl Eval,
    spec: &ChainSpec,
    u: C64,
) -> Result<C64> {
    Ok(cysw_terms(lam, q, q1, q2, spec, u)?.residual())
}

/// Terms of the single-Q equation; the general form with `Q1 = Q2 = 1`.
pub fn tq_terms(lam: &impl Eval, q: &impl Eval, spec: &ChainSpec, u: C64) -> Result<TqTerms> {
    let one = Polynomial::one();
    cysw_terms(lam, q, &one, &one, spec, u)
}

/// Collocation nodes `0.25 + 0.35 j`, `j = 0..=4N+5`.
pub fn collocation_nodes(n_sites: usize) -> Vec<f64> {
    (0..4 * n_sites + 6).map(|j| 0.25 + 0.35 * j as f64).collect()
}

/// Ten midpoints between collocation nodes, spread over the same range.
pub fn held_out_nodes(n_sites: usize) -> Vec<f64> {
    let last = 4 * n_sites + 4;
    (0..10)
        .map(|i| 0.25 + 0.35 * ((i * last / 9) as f64 + 0.5))
        .collect()
}

/// Largest relative mismatch of the single-Q equation over `nodes`.
pub fn max_tq_residual(lam: &impl Eval, q: &impl Eval, spec: &ChainSpec, nodes: &[f64]) -> Result<f64> {
    nodes.iter().try_fold(0.0f64, |acc, &u| {
        Ok(acc.max(tq_terms(lam, q, spec, C64::new(u, 0.0))?.relative_residual()))
    })
}

/// Canonical Bethe root for an `x`-root: the solution of `lambda(lambda+1) = x`
/// with `Re >= -1/2`, and `Im >= 0` on the line `Re = -1/2`.
pub fn root_from_x(x: C64) -> C64 {
    let mut s = (1.0 + 4.0 * x).sqrt();
    if s.re < 0.0 {
        s = -s;
    }
    if s.re.abs() <= 2e-9 && s.im < 0.0 {
        s = -s;
    }
    (s - 1.0) / 2.0
}

/// Maps either member of a pair `{lambda, -lambda-1}` to its canonical form.
pub fn canonical_root(lambda: C64) -> C64 {
    root_from_x(lambda * (lambda + 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetheSolution {
    pub state_index: usize,
    /// Monic, degree N in `x`, held by its `x`-roots.
    pub q: FactoredXPolynomial,
    /// `q` expanded in powers of `x`.
    pub q_poly: XBasisPolynomial,
    /// Canonical Bethe roots, one per `x`-root of `q`.
    pub roots: Vec<C64>,
    pub tq_residual: f64,
    pub energy: f64,
}

impl BetheSolution {
    pub fn q_u(&self) -> Polynomial {
        x_to_u(&self.q_poly)
    }
}

/// Coefficients of the equation at one collocation node.
struct NodeData {
    u: C64,
    lam: C64,
    a: C64,
    d: C64,
    delta: C64,
}

impl NodeData {
    fn new(lam: &impl Eval, spec: &ChainSpec, t: f64) -> Result<Self> {
        let u = C64::new(t, 0.0);
        Ok(Self {
            u,
            lam: lam.eval(u),
            a: a_bar(u, spec)?,
            d: d_bar(u, spec)?,
            delta: delta_term(u, spec),
        })
    }

    fn xs(&self) -> [C64; 3] {
        let u = self.u;
        [u * (u + 1.0), (u - 1.0) * u, (u + 1.0) * (u + 2.0)]
    }

    /// `Lambda x^k - a x_-^k - d x_+^k`, the coefficient of `x^k` in the
    /// homogeneous part.
    fn column(&self, k: i32) -> C64 {
        let [x, x_dn, x_up] = self.xs();
        self.lam * x.powi(k) - self.a * x_dn.powi(k) - self.d * x_up.powi(k)
    }
}

fn linear_system(nodes: &[NodeData], unknowns: usize) -> (DMatrix<C64>, DVector<C64>) {
    (DMatrix::zeros(nodes.len(), unknowns), DVector::zeros(nodes.len()))
}

/// Collocation solve for the non-leading coefficients of monic `Q`.
fn monic_start(nodes: &[NodeData], n: usize) -> Result<Vec<C64>> {
    let (mut a, mut b) = linear_system(nodes, n);
    for (row, node) in nodes.iter().enumerate() {
        for k in 0..n {
            a[(row, k)] = node.column(k as i32);
        }
        b[row] = node.delta - node.column(n as i32);
    }
    let sol = lstsq_truncated(a, b)?;
    let mut xcoeffs: Vec<C64> = sol.iter().copied().collect();
    xcoeffs.push(C64::new(1.0, 0.0));
    XBasisPolynomial::new(xcoeffs).x_roots()
}

/// Collocation solve with `Q(x = 0) = 1` and the scale of `Delta` as an
/// extra unknown; tolerates a nearly vanishing leading coefficient.
fn unit_constant_start(nodes: &[NodeData], n: usize) -> Result<Vec<C64>> {
    let (mut a, mut b) = linear_system(nodes, n + 1);
    for (row, node) in nodes.iter().enumerate() {
        for k in 1..=n {
            a[(row, k - 1)] = node.column(k as i32);
        }
        a[(row, n)] = -node.delta;
        b[row] = -node.column(0);
    }
    let sol = lstsq_truncated(a, b)?;
    let mut xcoeffs = vec![C64::new(1.0, 0.0)];
    xcoeffs.extend(sol.iter().take(n).copied());
    let p = XBasisPolynomial::new(xcoeffs);
    if p.x_degree() != n {
        return Err(Error::RankDeficient);
    }
    p.x_roots()
}

/// Residuals `r_i / s_i` at the nodes, with `s_i` the sum of term magnitudes,
/// and their Jacobian in the `x`-roots.
fn scaled_residuals(
    nodes: &[NodeData],
    x_roots: &[C64],
    jacobian: Option<&mut DMatrix<C64>>,
) -> DVector<C64> {
    let n = x_roots.len();
    let mut r = DVector::zeros(nodes.len());
    let mut jac = jacobian;
    for (i, node) in nodes.iter().enumerate() {
        let xs = node.xs();
        let q = xs.map(|x| x_roots.iter().map(|xr| x - xr).product::<C64>());
        let terms = [node.lam * q[0], node.a * q[1], node.d * q[2]];
        let scale = terms.iter().map(|t| t.norm()).sum::<f64>() + node.delta.norm();
        r[i] = (terms[0] - terms[1] - terms[2] - node.delta) / scale;
        if let Some(j) = jac.as_deref_mut() {
            for k in 0..n {
                // d/dx_k of prod_j (x - x_j) is -prod_{j != k} (x - x_j).
                let dq = xs.map(|x| {
                    -x_roots
                        .iter()
                        .enumerate()
                        .filter(|&(j, _)| j != k)
                        .map(|(_, xr)| x - xr)
                        .product::<C64>()
                });
                j[(i, k)] = (node.lam * dq[0] - node.a * dq[1] - node.d * dq[2]) / scale;
            }
        }
    }
    r
}

fn cost(r: &DVector<C64>) -> f64 {
    r.norm_squared()
}

/// Levenberg-Marquardt on the `x`-roots of `Q`.
fn refine_roots(nodes: &[NodeData], x_roots: &mut Vec<C64>) {
    let n = x_roots.len();
    let m = nodes.len();
    let mut best = cost(&scaled_residuals(nodes, x_roots, None));
    let mut mu = 0.0f64;
    for _ in 0..MAX_REFINE_ITER {
        let mut jac = DMatrix::<C64>::zeros(m + n, n);
        let r = scaled_residuals(nodes, x_roots, Some(&mut jac));
        let mut rhs = DVector::<C64>::zeros(m + n);
        rhs.rows_mut(0, m).copy_from(&(-r));
        let col_norm: Vec<f64> = (0..n)
            .map(|k| {
                let c = jac.column(k).norm();
                if c > 0.0 {
                    c
                } else {
                    1.0
                }
            })
            .collect();
        for (k, &c) in col_norm.iter().enumerate() {
            jac.column_mut(k).unscale_mut(c);
            jac[(m + k, k)] = C64::new(mu.sqrt(), 0.0);
        }
        let svd = jac.svd(true, true);
        let cutoff = svd.singular_values.max() * 1e-15;
        let Ok(y) = svd.solve(&rhs, cutoff) else {
            return;
        };
        let trial: Vec<C64> = x_roots
            .iter()
            .zip(y.iter().zip(&col_norm))
            .map(|(x, (dy, c))| x + dy / c)
            .collect();
        let trial_cost = cost(&scaled_residuals(nodes, &trial, None));
        if trial_cost < best {
            let gain = (best - trial_cost) / best;
            best = trial_cost;
            *x_roots = trial;
            mu = if mu <= 1e-9 { 0.0 } else { mu / 10.0 };
            if gain < 1e-3 && mu == 0.0 {
                return;
            }
        } else {
            mu = if mu == 0.0 { 1e-6 } else { mu * 10.0 };
            if mu > 1e8 {
                return;
            }
        }
    }
}

/// Solves the T-Q equation for `Q` given `Lambda`.
///
/// Two linear collocation solves seed a Levenberg-Marquardt refinement of
/// the `x`-roots; the candidate with the smaller held-out residual is kept.
/// Fails with [`Error::Unsolved`] when that residual exceeds `tol`.
pub fn solve_q(lam: &LambdaFunction, spec: &ChainSpec, tol: f64) -> Result<BetheSolution> {
    if spec.params.xi == 0.0 {
        return Err(Error::DiagonalBoundary);
    }
    let n = spec.n_sites;
    let nodes = collocation_nodes(n)
        .into_iter()
        .map(|t| NodeData::new(lam, spec, t))
        .collect::<Result<Vec<_>>>()?;
    let held_out = held_out_nodes(n);

    let mut best: Option<(f64, FactoredXPolynomial)> = None;
    for start in [monic_start(&nodes, n), unit_constant_start(&nodes, n)] {
        let Ok(mut x_roots) = start else { continue };
        refine_roots(&nodes, &mut x_roots);
        let q = FactoredXPolynomial::new(x_roots);
        let residual = max_tq_residual(lam, &q, spec, &held_out)?;
        if best.as_ref().is_none_or(|(r, _)| residual < *r) {
            best = Some((residual, q));
        }
    }
    let (residual, q) = best.ok_or(Error::RankDeficient)?;
    if !(residual <= tol) {
        return Err(Error::Unsolved {
            state: lam.state_index,
            residual,
            tol,
        });
    }
    let roots: Vec<C64> = q.x_roots().iter().map(|&x| root_from_x(x)).collect();
    let energy = energy_from_roots(&roots, spec)?;
    Ok(BetheSolution {
        state_index: lam.state_index,
        q_poly: q.expand(),
        q,
        roots,
        tq_residual: residual,
        energy,
    })
}

fn real_energy(sum: C64) -> Result<f64> {
    if sum.im.abs() >= ENERGY_IMAG_TOL * sum.re.abs().max(1.0) {
        return Err(Error::ComplexEnergy {
            re: sum.re,
            im: sum.im,
        });
    }
    Ok(sum.re)
}

fn check_root_pole(z: C64, pole: C64) -> Result<()> {
    if (z - pole).norm() < 1e-12 {
        return Err(Error::PoleRoot { re: z.re, im: z.im });
    }
    Ok(())
}

/// `E = 2 sum_j 1/(lambda_j (lambda_j + 1)) + c`.
pub fn energy_from_roots(roots: &[C64], spec: &ChainSpec) -> Result<f64> {
    let mut sum = C64::new(energy_offset(spec), 0.0);
    for &l in roots {
        check_root_pole(l, C64::new(0.0, 0.0))?;
        check_root_pole(l, C64::new(-1.0, 0.0))?;
        sum += 2.0 / (l * (l + 1.0));
    }
    real_energy(sum)
}

/// Energy of the general equation with `N - 2M` roots `lams` and `M` pairs
/// `(mus, nus)`:
/// `E = 2 sum 1/(l(l+1)) + 2 sum (1/nu - 1/(mu+1)) + c`.
pub fn cysw_energy(lams: &[C64], mus: &[C64], nus: &[C64], spec: &ChainSpec) -> Result<f64> {
    if mus.len() != nus.len() {
        return Err(Error::LengthMismatch(format!(
            "{} mu roots but {} nu roots",
            mus.len(),
            nus.len()
        )));
    }
    if lams.len() + 2 * mus.len() != spec.n_sites {
        return Err(Error::LengthMismatch(format!(
            "{} lambda roots and M = {} do not add up to N = {}",
            lams.len(),
            mus.len(),
            spec.n_sites
        )));
    }
    let mut sum = C64::new(energy_offset(spec), 0.0);
    for &l in lams {
        check_root_pole(l, C64::new(0.0, 0.0))?;
        check_root_pole(l, C64::new(-1.0, 0.0))?;
        sum += 2.0 / (l * (l + 1.0));
    }
    for (&mu, &nu) in mus.iter().zip(nus) {
        check_root_pole(nu, C64::new(0.0, 0.0))?;
        check_root_pole(mu, C64::new(-1.0, 0.0))?;
        sum += 2.0 * (1.0 / nu - 1.0 / (mu + 1.0));
    }
    real_energy(sum)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LevelReport {
    pub index: usize,
    pub energy_direct: f64,
    pub energy_bethe: Option<f64>,
    pub tq_residual: Option<f64>,
    pub lambda_fit_residual: Option<f64>,
    pub roots: Vec<C64>,
    pub lambda: Option<Polynomial>,
    pub q_poly: Option<XBasisPolynomial>,
    pub degenerate: bool,
    pub failure: Option<String>,
    /// For an unsolved level: held-out residual of the same solve on the
    /// opposite branch sign.
    pub opposite_sign_residual: Option<f64>,
}

impl LevelReport {
    pub fn energy_mismatch(&self) -> Option<f64> {
        self.energy_bethe.map(|e| (e - self.energy_direct).abs())
    }

    pub fn solved(&self, tol: &Tolerances) -> bool {
        self.failure.is_none()
            && self.tq_residual.is_some_and(|r| r <= tol.tq)
            && self.energy_mismatch().is_some_and(|d| d <= tol.energy)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompletenessReport {
    pub spec: ChainSpec,
    pub tolerances: Tolerances,
    pub levels: Vec<LevelReport>,
    pub max_energy_mismatch: f64,
    pub max_residual: f64,
    pub all_solved: bool,
    /// Every pair of solved levels has a distinct Q.
    pub distinct_q: bool,
}

impl CompletenessReport {
    pub fn solved_count(&self) -> usize {
        self.levels.iter().filter(|l| l.solved(&self.tolerances)).count()
    }
}

fn solve_level(
    spec: &ChainSpec,
    eig: &crate::spectrum::EigenSystem,
    k: usize,
    tol: &Tolerances,
) -> LevelReport {
    let mut level = LevelReport {
        index: k,
        energy_direct: eig.energies[k],
        energy_bethe: None,
        tq_residual: None,
        lambda_fit_residual: None,
        roots: Vec::new(),
        lambda: None,
        q_poly: None,
        degenerate: eig.cluster(k).len() > 1,
        failure: None,
        opposite_sign_residual: None,
    };
    let lam = match lambda_for_state(spec, eig, k) {
        Ok(l) => l,
        Err(e) => {
            level.failure = Some(e.to_string());
            return level;
        }
    };
    level.lambda_fit_residual = Some(lam.fit_residual);
    level.lambda = Some(lam.lam.clone());
    match solve_q(&lam, spec, tol.tq) {
        Ok(sol) => {
            level.energy_bethe = Some(sol.energy);
            level.tq_residual = Some(sol.tq_residual);
            level.roots = sol.roots;
            level.q_poly = Some(sol.q_poly);
            if let Some(d) = level.energy_mismatch().filter(|&d| !(d <= tol.energy)) {
                level.failure = Some(format!("energy mismatch {d:e} exceeds {:e}", tol.energy));
            }
        }
        Err(e) => {
            if let Error::Unsolved { residual, .. } = e {
                level.tq_residual = Some(residual);
                let other = spec.with_sign(spec.sign.flipped());
                level.opposite_sign_residual = match solve_q(&lam, &other, f64::INFINITY) {
                    Ok(sol) => Some(sol.tq_residual),
                    Err(Error::Unsolved { residual, .. }) => Some(residual),
                    Err(_) => None,
                };
            }
            level.failure = Some(e.to_string());
        }
    }
    level
}

/// Runs the full pipeline for every level of the chain.
///
/// Per-level failures are recorded in the report; only setup errors (such as
/// an unsupported chain length or diagonal boundaries) abort the scan.
pub fn completeness_scan(spec: &ChainSpec, tol: &Tolerances) -> Result<CompletenessReport> {
    if spec.params.xi == 0.0 {
        return Err(Error::DiagonalBoundary);
    }
    let eig = diagonalize_h(spec)?;
    let levels: Vec<LevelReport> = (0..eig.len()).map(|k| solve_level(spec, &eig, k, tol)).collect();

    let max_energy_mismatch = levels
        .iter()
        .map(|l| l.energy_mismatch().unwrap_or(f64::INFINITY))
        .fold(0.0, f64::max);
    let max_residual = levels
        .iter()
        .map(|l| l.tq_residual.unwrap_or(f64::INFINITY))
        .fold(0.0, f64::max);
    let all_solved = levels.iter().all(|l| l.solved(tol));
    let qs: Vec<&XBasisPolynomial> = levels.iter().filter_map(|l| l.q_poly.as_ref()).collect();
    let distinct_q = qs.iter().enumerate().all(|(i, a)| {
        qs[i + 1..].iter().all(|b| {
            let size = a
                .xcoeffs()
                .iter()
                .chain(b.xcoeffs())
                .map(|c| c.norm())
                .fold(1.0, f64::max);
            let diff = a
                .xcoeffs()
                .iter()
                .zip(b.xcoeffs())
                .map(|(x, y)| (x - y).norm())
                .fold(0.0, f64::max);
            diff > DISTINCT_TOL * size
        })
    });
    Ok(CompletenessReport {
        spec: *spec,
        tolerances: *tol,
        levels,
        max_energy_mismatch,
        max_residual,
        all_solved,
        distinct_q,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::BoundaryParams;
    use crate::spectrum::diagonalize_h;

    fn table_spec(n: usize) -> ChainSpec {
        ChainSpec::new(n, BoundaryParams::table_preset()).unwrap()
    }

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    #[test]
    fn coefficient_functions() {
        let spec = table_spec(3);
        assert!((a_bar(c(0.0), &spec).unwrap() - c(0.25)).norm() < 1e-15);
        assert_eq!(a_bar(c(-1.0), &spec).unwrap(), c(0.0));
        assert_eq!(a_bar(c(-0.25), &spec).unwrap().norm(), 0.0);
        assert_eq!(d_bar(c(0.0), &spec).unwrap(), c(0.0));
        let u = C64::new(0.37, -0.8);
        let (d, a) = (d_bar(-u - 1.0, &spec).unwrap(), a_bar(u, &spec).unwrap());
        assert!((d - a).norm() <= 1e-14 * a.norm());
        // (2/3)(-1.75)(-3.5) at u = 1.
        assert!((d_bar(c(1.0), &spec).unwrap() - c(2.0 / 3.0 * 1.75 * 3.5)).norm() < 1e-12);
        assert!((d_bar(c(1.0), &spec).unwrap().re - 4.0833).abs() < 1e-4);
        assert!(matches!(a_bar(c(-0.5005), &spec), Err(Error::NearPole { .. })));
        assert!(d_bar(c(-0.4995), &spec).is_err());
    }

    #[test]
    fn inhomogeneous_term() {
        let spec = table_spec(3);
        assert_eq!(delta_term(c(1.0), &spec), c(-256.0));
        assert_eq!(delta_term(c(0.0), &spec), c(0.0));
        assert_eq!(delta_term(c(-1.0), &spec), c(0.0));
        let diag = ChainSpec::new(3, BoundaryParams::new(0.25, 0.5, 0.0).unwrap()).unwrap();
        assert_eq!(delta_term(C64::new(1.7, 0.3), &diag), c(0.0));
    }

    #[test]
    fn energy_formula() {
        let spec = table_spec(3);
        assert_eq!(energy_offset(&spec), 10.0);
        assert_eq!(energy_offset(&spec.with_sign(crate::lattice::Sign::Minus)), -6.0);
        let roots = [c(-0.301706), c(-0.228269), c(1.90659)];
        let e = energy_from_roots(&roots, &spec).unwrap();
        assert!((e - (-10.4854)).abs() < 1e-3, "{e}");
        let half = energy_from_roots(&[c(-0.5)], &spec).unwrap();
        assert!((half - 10.0 - (-8.0)).abs() < 1e-12);
        assert!(matches!(
            energy_from_roots(&[c(0.0)], &spec),
            Err(Error::PoleRoot { .. })
        ));
        assert!(energy_from_roots(&[c(-1.0)], &spec).is_err());
        assert!(matches!(
            energy_from_roots(&[C64::new(0.3, 0.2)], &spec),
            Err(Error::ComplexEnergy { .. })
        ));
    }

    #[test]
    fn cysw_energy_cases() {
        let spec = table_spec(3);
        let roots = [c(-0.301706), c(-0.228269), c(1.90659)];
        assert_eq!(
            cysw_energy(&roots, &[], &[], &spec).unwrap(),
            energy_from_roots(&roots, &spec).unwrap()
        );
        let two = table_spec(2);
        let e = cysw_energy(&[], &[c(1.0)], &[c(2.0)], &two).unwrap();
        assert!((e - energy_offset(&two)).abs() < 1e-15);
        let e = cysw_energy(&[], &[c(0.0)], &[c(1.0)], &two).unwrap();
        assert!((e - energy_offset(&two)).abs() < 1e-15);
        assert!(cysw_energy(&[], &[c(-1.0)], &[c(1.0)], &two).is_err());
        assert!(cysw_energy(&[], &[c(1.0)], &[c(0.0)], &two).is_err());
        assert!(cysw_energy(&[c(1.0)], &[c(1.0)], &[c(2.0)], &two).is_err());
    }

    #[test]
    fn canonical_roots() {
        for z in [c(1.9), C64::new(-0.5, 1.36473), C64::new(0.3, -2.0), c(-0.2)] {
            let x = z * (z + 1.0);
            let r = root_from_x(x);
            assert!((r * (r + 1.0) - x).norm() < 1e-12);
            assert!(r.re >= -0.5 - 1e-12);
        }
        let r = canonical_root(C64::new(-0.5, -1.36473));
        assert!((r - C64::new(-0.5, 1.36473)).norm() < 1e-9);
        let r = canonical_root(c(-2.90659));
        assert!((r - c(1.90659)).norm() < 1e-12);
    }

    #[test]
    fn ground_state_matches_table_one() {
        let spec = table_spec(3);
        let eig = diagonalize_h(&spec).unwrap();
        let lam = lambda_for_state(&spec, &eig, 0).unwrap();
        let sol = solve_q(&lam, &spec, DEFAULT_TQ_TOL).unwrap();
        let mut roots: Vec<f64> = sol.roots.iter().map(|z| z.re).collect();
        roots.sort_by(f64::total_cmp);
        for (r, want) in roots.iter().zip([-0.301706, -0.228269, 1.90659]) {
            assert!((r - want).abs() < 1e-4, "{r} vs {want}");
        }
        assert!(sol.tq_residual < 1e-8);
        assert!((sol.energy - eig.energies[0]).abs() < 1e-6);

        // The table's rounded roots also satisfy the equation to their precision.
        let table_q = x_to_u(&XBasisPolynomial::from_x_roots(
            &[-0.301706, -0.228269, 1.90659].map(|l: f64| c(l * (l + 1.0))),
        ));
        let r = max_tq_residual(&lam.lam, &table_q, &spec, &held_out_nodes(3)).unwrap();
        assert!(r < 1e-4, "{r}");
    }

    #[test]
    fn minus_branch_reproduces_energies() {
        let spec = table_spec(3).with_sign(crate::lattice::Sign::Minus);
        let report = completeness_scan(&spec, &Tolerances::default()).unwrap();
        assert!(report.all_solved, "{report:#?}");
        assert!(report.distinct_q);
    }

    #[test]
    fn perturbed_lambda_is_rejected() {
        let spec = table_spec(3);
        let eig = diagonalize_h(&spec).unwrap();
        let mut lam = lambda_for_state(&spec, &eig, 2).unwrap();
        let mut xc = lam.lam_x.xcoeffs().to_vec();
        xc[1] += 0.01;
        lam.lam_x = XBasisPolynomial::new(xc);
        lam.lam = x_to_u(&lam.lam_x);
        match solve_q(&lam, &spec, DEFAULT_TQ_TOL) {
            Err(Error::Unsolved { residual, .. }) => assert!(residual > 1e-3, "{residual}"),
            other => panic!("expected rejection, got {other:?}"),
        }
    }

    #[test]
    fn diagonal_boundaries_rejected() {
        let spec = ChainSpec::new(3, BoundaryParams::new(0.25, 0.5, 0.0).unwrap()).unwrap();
        assert_eq!(
            completeness_scan(&spec, &Tolerances::default()).unwrap_err(),
            Error::DiagonalBoundary
        );
        let eig = diagonalize_h(&spec).unwrap();
        let lam = lambda_for_state(&spec, &eig, 0).unwrap();
        assert_eq!(solve_q(&lam, &spec, 1e-8), Err(Error::DiagonalBoundary));
    }

    #[test]
    fn scan_small_chain_and_pairing_closure() {
        let spec = ChainSpec::new(2, BoundaryParams::new(0.9, -1.4, 0.75).unwrap()).unwrap();
        let report = completeness_scan(&spec, &Tolerances::default()).unwrap();
        assert_eq!(report.levels.len(), 4);
        assert!(report.all_solved, "{report:#?}");
        assert!(report.distinct_q);
        for level in &report.levels {
            let q = level.q_poly.as_ref().unwrap();
            let qu = x_to_u(q);
            let mut all: Vec<C64> = crate::algebra::poly_roots(&qu).unwrap();
            for l in &level.roots {
                for z in [*l, -*l - 1.0] {
                    let k = all
                        .iter()
                        .enumerate()
                        .min_by(|a, b| (a.1 - z).norm().total_cmp(&(b.1 - z).norm()))
                        .unwrap()
                        .0;
                    assert!((all[k] - z).norm() < 1e-6);
                    all.remove(k);
                }
            }
            assert!(all.is_empty());
        }
    }

    #[test]
    fn general_form_reduces_to_single_q() {
        let spec = table_spec(3);
        let eig = diagonalize_h(&spec).unwrap();
        let lam = lambda_for_state(&spec, &eig, 5).unwrap();
        let sol = solve_q(&lam, &spec, DEFAULT_TQ_TOL).unwrap();
        let q = sol.q_u();
        let one = Polynomial::one();
        for u in held_out_nodes(3) {
            let uc = c(u);
            let general = cysw_terms(&lam.lam, &q, &one, &one, &spec, uc).unwrap();
            let single = tq_terms(&lam.lam, &q, &spec, uc).unwrap();
            assert_eq!(general, single);
            assert!(general.relative_residual() < 1e-8);
        }
        // The (+) coefficient at u = 0 is 2pq.
        let terms = cysw_terms(&lam.lam, &one, &one, &one, &spec, c(0.0)).unwrap();
        assert_eq!(terms.a_term, a_bar(c(0.0), &spec).unwrap());

        let junk = Polynomial::from_real(&[0.3, -1.0, 0.2, 1.0]);
        let junk1 = Polynomial::from_real(&[1.1, 0.4, 1.0]);
        let r = cysw_terms(&lam.lam, &junk, &junk1, &junk, &spec, c(1.3)).unwrap();
        assert!(r.relative_residual() > 1e-3);
    }

    #[test]
    fn pole_cancellation_near_half() {
        let spec = table_spec(3);
        let q = x_to_u(&XBasisPolynomial::from_real(&[0.4, -1.2, 0.3, 1.0]));
        let mut last = f64::INFINITY;
        for eps in [1e-2, 1e-4, 1e-6, 1e-10] {
            let u = c(-0.5 + eps);
            // (2u+1) [a Q(u-1) + d Q(u+1)] without the pole guard.
            let s = spec.params;
            let n2 = 2 * spec.n_sites as i32;
            let num_a = (2.0 * u + 2.0) * (u + s.p) * (s.alpha * u + s.q) * (u + 1.0).powi(n2);
            let w = -u - 1.0;
            let num_d = (2.0 * w + 2.0) * (w + s.p) * (s.alpha * w + s.q) * (w + 1.0).powi(n2);
            // (2w+1) = -(2u+1), so the d-term residue enters with a minus sign.
            let combined = num_a * q.eval(u - 1.0) - num_d * q.eval(u + 1.0);
            let scale = (num_a * q.eval(u - 1.0)).norm();
            let rel = combined.norm() / scale;
            assert!(rel < last);
            last = rel;
        }
        assert!(last < 1e-8);
    }
}
