//! Eigenpairs of the discrete Laplacian and the truncation order `N`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::{weighted_dot, Grid, ScalarField};
use crate::laplacian::LinearOperator;
use crate::sparse::BandedLu;

/// Relative gap below which two eigenvalues count as equal.
pub const TIE_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    pub lambda: f64,
    /// Unit `L²(Ω)` norm.
    pub phi: ScalarField,
    /// `(k, l)` for pairs produced by the separation-of-variables formula.
    pub mode: Option<(usize, usize)>,
    /// `‖Δ_h φ − λφ‖ / (|λ| ‖φ‖)`; `None` for analytic pairs.
    pub residual: Option<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct EigenOptions {
    /// Relative residual at which a Ritz pair is accepted.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Extra block columns beyond the requested count.
    pub guard: usize,
    pub seed: u64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions { tolerance: 1e-10, max_iterations: 2000, guard: 8, seed: 0x5eed_1a9c }
    }
}

/// The `m` algebraically largest eigenpairs of `op`, sorted decreasing.
pub fn compute_eigenpairs(op: &LinearOperator, m: usize) -> Result<Vec<EigenPair>> {
    compute_eigenpairs_with(op, m, &EigenOptions::default())
}

/// Shift-invert subspace iteration with Rayleigh–Ritz in the inner product
/// that makes `op` self-adjoint. The block carries `max(m, guard)` extra
/// columns so clustered or repeated eigenvalues converge together.
pub fn compute_eigenpairs_with(op: &LinearOperator, m: usize, opts: &EigenOptions) -> Result<Vec<EigenPair>> {
    let n = op.dim();
    if m == 0 || m > n {
        return Err(Error::InvalidParameter {
            name: "m",
            reason: format!("need 1 <= m <= {n}, got {m}"),
        });
    }
    let block = n.min(m + m.max(opts.guard));
    let d = op.symmetrizer();
    let lu = BandedLu::factor(op.matrix(), 0.0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);

    let mut basis: Vec<Vec<f64>> = (0..block)
        .map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    orthonormalize(&mut basis, d, &mut rng);

    let mut worst = f64::INFINITY;
    for iteration in 0..opts.max_iterations {
        for col in basis.iter_mut() {
            lu.solve_in_place(col);
        }
        orthonormalize(&mut basis, d, &mut rng);
        let images: Vec<Vec<f64>> = basis
            .iter()
            .map(|x| {
                let mut y = vec![0.0; n];
                op.matrix().mul_vec(x, &mut y);
                y
            })
            .collect();
        let mut h = DMatrix::zeros(block, block);
        for r in 0..block {
            for c in r..block {
                let v = 0.5 * (weighted_dot(&basis[r], &images[c], d) + weighted_dot(&basis[c], &images[r], d));
                h[(r, c)] = v;
                h[(c, r)] = v;
            }
        }
        let eig = SymmetricEigen::new(h);
        let mut order: Vec<usize> = (0..block).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

        let rotate = |src: &[Vec<f64>], k: usize| -> Vec<f64> {
            let mut out = vec![0.0; n];
            for (r, s) in src.iter().enumerate() {
                let c = eig.eigenvectors[(r, k)];
                if c != 0.0 {
                    for (o, v) in out.iter_mut().zip(s) {
                        *o += c * v;
                    }
                }
            }
            out
        };
        let ritz: Vec<Vec<f64>> = order.iter().map(|&k| rotate(&basis, k)).collect();
        let ritz_images: Vec<Vec<f64>> = order.iter().take(m).map(|&k| rotate(&images, k)).collect();

        worst = 0.0;
        for (idx, lx) in ritz_images.iter().enumerate() {
            let theta = eig.eigenvalues[order[idx]];
            let r: Vec<f64> = lx.iter().zip(&ritz[idx]).map(|(a, b)| a - theta * b).collect();
            let rel = libm::sqrt(weighted_dot(&r, &r, d)) / (theta.abs().max(f64::MIN_POSITIVE));
            worst = worst.max(rel);
        }
        basis = ritz;
        if worst < opts.tolerance || block == n && iteration > 0 {
            let values: Vec<f64> = order.iter().take(m).map(|&k| eig.eigenvalues[k]).collect();
            return Ok(finish_pairs(op, basis.into_iter().take(m).zip(values)));
        }
    }
    Err(Error::EigenNoConvergence { iterations: opts.max_iterations, residual: worst })
}

fn finish_pairs(op: &LinearOperator, pairs: impl Iterator<Item = (Vec<f64>, f64)>) -> Vec<EigenPair> {
    let grid = *op.grid();
    let weights = grid.free_weights();
    pairs
        .map(|(mut v, lambda)| {
            let norm = libm::sqrt(weighted_dot(&v, &v, &weights));
            let mut pivot = 0;
            for (k, x) in v.iter().enumerate() {
                if x.abs() > v[pivot].abs() {
                    pivot = k;
                }
            }
            let s = if v[pivot] < 0.0 { -1.0 / norm } else { 1.0 / norm };
            v.iter_mut().for_each(|x| *x *= s);
            let mut lv = vec![0.0; v.len()];
            op.matrix().mul_vec(&v, &mut lv);
            let r: Vec<f64> = lv.iter().zip(&v).map(|(a, b)| a - lambda * b).collect();
            let residual = libm::sqrt(weighted_dot(&r, &r, &weights)) / lambda.abs();
            EigenPair {
                lambda,
                phi: ScalarField::from_values(grid, v).expect("free-node length"),
                mode: None,
                residual: Some(residual),
            }
        })
        .collect()
}

/// Modified Gram–Schmidt, two passes, in the `d`-weighted inner product.
fn orthonormalize(cols: &mut [Vec<f64>], d: &[f64], rng: &mut ChaCha8Rng) {
    for k in 0..cols.len() {
        for _attempt in 0..3 {
            let original = libm::sqrt(weighted_dot(&cols[k], &cols[k], d));
            for _pass in 0..2 {
                for j in 0..k {
                    let (done, rest) = cols.split_at_mut(k);
                    let c = weighted_dot(&done[j], &rest[0], d);
                    for (x, y) in rest[0].iter_mut().zip(&done[j]) {
                        *x -= c * y;
                    }
                }
            }
            let norm = libm::sqrt(weighted_dot(&cols[k], &cols[k], d));
            if norm > 1e-10 * original && norm > 0.0 {
                cols[k].iter_mut().for_each(|x| *x /= norm);
                break;
            }
            // Column fell into the span of its predecessors; restart it.
            for x in cols[k].iter_mut() {
                *x = rng.random_range(-1.0..1.0);
            }
        }
    }
}

/// Adjacent index pairs `(i, i+1)` whose eigenvalues agree to `tol` relative.
pub fn find_ties(pairs: &[EigenPair], tol: f64) -> Vec<(usize, usize)> {
    pairs
        .windows(2)
        .enumerate()
        .filter(|(_, w)| is_tie(w[0].lambda, w[1].lambda, tol))
        .map(|(i, _)| (i, i + 1))
        .collect()
}

fn is_tie(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

/// `λ_{kl} = −π²((k−½)²/a² + (l−½)²/b²)` for the Dirichlet–Neumann rectangle.
pub fn analytic_eigenvalue(a: f64, b: f64, k: usize, l: usize) -> f64 {
    let kx = (k as f64 - 0.5) / a;
    let ly = (l as f64 - 0.5) / b;
    -PI * PI * (kx * kx + ly * ly)
}

/// The separable eigenfunction `(2/√(ab))·sin((k−½)πx/a)·sin((l−½)πy/b)`
/// sampled on `grid`.
pub fn analytic_eigenpair(grid: &Grid, k: usize, l: usize) -> Result<EigenPair> {
    if k == 0 || l == 0 {
        return Err(Error::InvalidParameter { name: "k,l", reason: format!("mode indices start at 1, got ({k}, {l})") });
    }
    let (a, b) = (grid.a(), grid.b());
    let amp = 2.0 / libm::sqrt(a * b);
    let kx = (k as f64 - 0.5) * PI / a;
    let ly = (l as f64 - 0.5) * PI / b;
    let phi = ScalarField::from_fn(*grid, |x, y| amp * libm::sin(kx * x) * libm::sin(ly * y));
    Ok(EigenPair { lambda: analytic_eigenvalue(a, b, k, l), phi, mode: Some((k, l)), residual: None })
}

/// The `count` largest analytic eigenvalues with their mode indices.
pub fn analytic_spectrum(a: f64, b: f64, count: usize) -> Vec<(f64, (usize, usize))> {
    let mut all = Vec::with_capacity((count + 1) * (count + 1));
    for k in 1..=count + 1 {
        for l in 1..=count + 1 {
            all.push((analytic_eigenvalue(a, b, k, l), (k, l)));
        }
    }
    all.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)));
    all.truncate(count);
    all
}

/// Eigenpairs with the truncation order `N = #{k : λ_k + μ ≥ 0}`.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncationBasis {
    pairs: Vec<EigenPair>,
    mu: f64,
    n_trunc: usize,
}

/// Splits the computed spectrum into the `N` unstable modes and the stable tail.
///
/// Fails when the last computed pair is not safely stable (more pairs are
/// needed to certify `N`) or when two of the first `N` eigenvalues coincide.
pub fn build_truncation(pairs: Vec<EigenPair>, mu: f64) -> Result<TruncationBasis> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::InvalidParameter { name: "mu", reason: format!("must be positive, got {mu}") });
    }
    if pairs.is_empty() {
        return Err(Error::InsufficientPairs { computed: 0, last: f64::NAN, neg_mu: -mu });
    }
    if let Some(w) = pairs.windows(2).position(|w| w[1].lambda > w[0].lambda) {
        return Err(Error::InvalidParameter {
            name: "pairs",
            reason: format!("eigenvalues must be sorted decreasing (index {})", w + 1),
        });
    }
    let n_trunc = pairs.iter().take_while(|p| p.lambda + mu >= 0.0).count();
    let last = pairs[pairs.len() - 1].lambda;
    let margin = TIE_TOLERANCE * last.abs().max(1.0);
    if n_trunc == pairs.len() || last + mu >= -margin {
        return Err(Error::InsufficientPairs { computed: pairs.len(), last, neg_mu: -mu });
    }
    for i in 1..n_trunc {
        if is_tie(pairs[i - 1].lambda, pairs[i].lambda, TIE_TOLERANCE) {
            return Err(Error::EigenTie { i: i - 1, j: i, value: pairs[i].lambda });
        }
    }
    Ok(TruncationBasis { pairs, mu, n_trunc })
}

/// Computes eigenpairs of `op`, doubling the count from `initial` until the
/// truncation order is certified.
pub fn truncate_operator(op: &LinearOperator, mu: f64, initial: usize) -> Result<TruncationBasis> {
    let mut m = initial.clamp(1, op.dim());
    loop {
        let pairs = compute_eigenpairs(op, m)?;
        match build_truncation(pairs, mu) {
            Err(Error::InsufficientPairs { .. }) if m < op.dim() => m = (2 * m).min(op.dim()),
            other => return other,
        }
    }
}

impl TruncationBasis {
    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// The truncation order `N`.
    pub fn n_trunc(&self) -> usize {
        self.n_trunc
    }

    /// All computed pairs, unstable ones first.
    pub fn pairs(&self) -> &[EigenPair] {
        &self.pairs
    }

    /// `φ_1 … φ_N`.
    pub fn unstable(&self) -> &[EigenPair] {
        &self.pairs[..self.n_trunc]
    }

    pub fn grid(&self) -> &Grid {
        self.pairs[0].phi.grid()
    }

    /// Every computed eigenvalue.
    pub fn spectrum(&self) -> Vec<f64> {
        self.pairs.iter().map(|p| p.lambda).collect()
    }

    /// Diagonal of `Λ_N = diag(λ_1+μ, …, λ_N+μ)`.
    pub fn shifted_unstable(&self) -> Vec<f64> {
        self.unstable().iter().map(|p| p.lambda + self.mu).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::laplacian::{assemble_laplacian, BoundaryScheme};

    fn pair(lambda: f64) -> EigenPair {
        let g = Grid::new(1.0, 1.0, 3, 3).unwrap();
        EigenPair { lambda, phi: ScalarField::zeros(g), mode: None, residual: None }
    }

    #[test]
    fn analytic_first_mode() {
        let g = Grid::new(1.0, 1.0, 21, 21).unwrap();
        let p = analytic_eigenpair(&g, 1, 1).unwrap();
        assert!((p.lambda + PI * PI / 2.0).abs() < 1e-14);
        assert!((p.phi.at(20, 20) - 2.0).abs() < 1e-14);
        let p12 = analytic_eigenvalue(1.0, 1.0, 1, 2);
        let p21 = analytic_eigenvalue(1.0, 1.0, 2, 1);
        assert!((p12 - p21).abs() < 1e-14);
        assert!((p12 + 2.5 * PI * PI).abs() < 1e-12);
        assert!(analytic_eigenpair(&g, 0, 1).is_err());
    }

    #[test]
    fn analytic_boundary_values() {
        // Sine vanishes on x = 0, y = 0; its derivative (a cosine) vanishes on x = a, y = b.
        let (a, b) = (1.3, 0.8);
        for (k, l) in [(1, 1), (2, 3), (4, 1)] {
            let kx = (k as f64 - 0.5) * PI / a;
            let ly = (l as f64 - 0.5) * PI / b;
            assert!(libm::sin(kx * 0.0).abs() < 1e-15);
            assert!(libm::cos(kx * a).abs() < 1e-14);
            assert!(libm::cos(ly * b).abs() < 1e-14);
        }
    }

    #[test]
    fn analytic_spectrum_is_sorted() {
        let s = analytic_spectrum(1.0, 1.0, 6);
        assert_eq!(s[0].1, (1, 1));
        assert!(s.windows(2).all(|w| w[0].0 >= w[1].0));
        assert!((s[1].0 - s[2].0).abs() < 1e-12);
    }

    #[test]
    fn truncation_order() {
        let basis = build_truncation(vec![pair(-4.93), pair(-24.6), pair(-44.0)], 6.0).unwrap();
        assert_eq!(basis.n_trunc(), 1);
        let basis = build_truncation(vec![pair(-4.93), pair(-24.6)], 1.0).unwrap();
        assert_eq!(basis.n_trunc(), 0);
    }

    #[test]
    fn truncation_errors() {
        assert!(matches!(
            build_truncation(vec![pair(-4.93), pair(-24.67), pair(-24.67), pair(-44.4)], 30.0),
            Err(Error::EigenTie { i: 1, j: 2, .. })
        ));
        assert!(matches!(build_truncation(vec![pair(-4.93)], 6.0), Err(Error::InsufficientPairs { .. })));
        assert!(matches!(build_truncation(vec![pair(-4.93), pair(-2.0)], 1.0), Err(Error::InvalidParameter { .. })));
        assert!(matches!(build_truncation(vec![pair(-4.93)], 0.0), Err(Error::InvalidParameter { .. })));
    }

    #[test]
    fn small_grid_eigenpairs_match_dense() {
        let g = Grid::new(1.0, 0.8, 6, 5).unwrap();
        let op = assemble_laplacian(&g, BoundaryScheme::GhostPoint);
        let pairs = compute_eigenpairs(&op, 4).unwrap();
        // Dense oracle on the symmetrized matrix W^{1/2} L W^{-1/2}.
        let w = g.free_weights();
        let dense = op.matrix().to_dense();
        let n = dense.nrows();
        let sym = DMatrix::from_fn(n, n, |r, c| libm::sqrt(w[r]) * dense[(r, c)] / libm::sqrt(w[c]));
        let mut ev: Vec<f64> = SymmetricEigen::new(sym).eigenvalues.iter().copied().collect();
        ev.sort_by(|a, b| b.total_cmp(a));
        for (p, e) in pairs.iter().zip(&ev) {
            assert!((p.lambda - e).abs() < 1e-9 * e.abs(), "{} vs {}", p.lambda, e);
            assert!(p.residual.unwrap() < 1e-8);
            assert!((p.phi.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_count() {
        let g = Grid::new(1.0, 1.0, 4, 4).unwrap();
        let op = assemble_laplacian(&g, BoundaryScheme::GhostPoint);
        assert!(compute_eigenpairs(&op, 0).is_err());
        assert!(compute_eigenpairs(&op, 10).is_err());
        assert_eq!(compute_eigenpairs(&op, 9).unwrap().len(), 9);
    }
}
