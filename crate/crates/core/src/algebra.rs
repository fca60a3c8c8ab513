//! Finite-dimensional traced algebras.
//!
//! A [`TracedAlgebra`] is a direct sum of full matrix blocks `M_{d_1} ⊕ … ⊕ M_{d_k}`
//! with the faithful trace `τ(x) = Σ_j w_j Tr(x_j)`. Weights are arbitrary positive
//! reals, so projections can have trace both much smaller and much larger than one.
//! Elements are stored block by block as dense complex matrices.

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Relative tolerance for grouping eigenvalues into one eigenprojection.
pub const CLUSTER_TOL: f64 = 1e-9;
/// Relative tolerance for positive-semidefinite comparisons `x ≤ y`.
pub const PSD_TOL: f64 = 1e-9;
/// Eigenvalue threshold used when extracting the kernel in [`projection_meet`].
pub const MEET_TOL: f64 = 1e-9;
/// Relative slack applied at interval endpoints in [`spectral_projection`].
const ENDPOINT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TracedAlgebra {
    dims: Vec<usize>,
    weights: Vec<f64>,
}

impl TracedAlgebra {
    /// Builds the algebra from `(dimension, weight)` pairs.
    pub fn new(blocks: &[(usize, f64)]) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::Domain("algebra needs at least one block".into()));
        }
        for (j, &(d, w)) in blocks.iter().enumerate() {
            if d == 0 {
                return Err(Error::Domain(format!("block {j} has dimension 0")));
            }
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::Domain(format!(
                    "block {j} has weight {w}; trace weights must be finite and > 0"
                )));
            }
        }
        Ok(TracedAlgebra {
            dims: blocks.iter().map(|b| b.0).collect(),
            weights: blocks.iter().map(|b| b.1).collect(),
        })
    }

    /// The commutative algebra `ℓ^∞_n` with point masses `weights`.
    pub fn diagonal(weights: &[f64]) -> Result<Self> {
        let blocks: Vec<_> = weights.iter().map(|&w| (1, w)).collect();
        Self::new(&blocks)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn num_blocks(&self) -> usize {
        self.dims.len()
    }

    pub fn total_dimension(&self) -> usize {
        self.dims.iter().sum()
    }

    /// Dimension of the algebra as a vector space, `Σ d_j²`.
    pub fn vector_dimension(&self) -> usize {
        self.dims.iter().map(|d| d * d).sum()
    }

    pub fn min_weight(&self) -> f64 {
        self.weights.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn is_commutative(&self) -> bool {
        self.dims.iter().all(|&d| d == 1)
    }

    /// `τ(𝟏)`.
    pub fn total_trace(&self) -> f64 {
        self.dims
            .iter()
            .zip(&self.weights)
            .map(|(&d, &w)| d as f64 * w)
            .sum()
    }

    pub fn zero(&self) -> AlgElement {
        AlgElement {
            blocks: self.dims.iter().map(|&d| DMatrix::zeros(d, d)).collect(),
        }
    }

    pub fn identity(&self) -> AlgElement {
        AlgElement {
            blocks: self.dims.iter().map(|&d| DMatrix::identity(d, d)).collect(),
        }
    }

    pub fn check(&self, x: &AlgElement) -> Result<()> {
        if x.blocks.len() != self.dims.len() {
            return Err(Error::Structural(format!(
                "element has {} blocks, algebra has {}",
                x.blocks.len(),
                self.dims.len()
            )));
        }
        for (j, (b, &d)) in x.blocks.iter().zip(&self.dims).enumerate() {
            if b.nrows() != d || b.ncols() != d {
                return Err(Error::Structural(format!(
                    "block {j} is {}x{}, expected {d}x{d}",
                    b.nrows(),
                    b.ncols()
                )));
            }
        }
        Ok(())
    }

    pub fn element(&self, blocks: Vec<DMatrix<C64>>) -> Result<AlgElement> {
        let x = AlgElement { blocks };
        self.check(&x)?;
        Ok(x)
    }

    /// Real block matrices given row by row.
    pub fn element_from_real(&self, blocks: &[Vec<Vec<f64>>]) -> Result<AlgElement> {
        let mut out = Vec::with_capacity(blocks.len());
        for rows in blocks {
            let n = rows.len();
            if rows.iter().any(|r| r.len() != n) {
                return Err(Error::Structural("block rows must form a square matrix".into()));
            }
            out.push(DMatrix::from_fn(n, n, |i, k| C64::new(rows[i][k], 0.0)));
        }
        self.element(out)
    }

    /// Diagonal element; `values` runs over the diagonal of block 0, then block 1, ….
    pub fn from_diagonal(&self, values: &[f64]) -> Result<AlgElement> {
        if values.len() != self.total_dimension() {
            return Err(Error::Structural(format!(
                "{} diagonal values for total dimension {}",
                values.len(),
                self.total_dimension()
            )));
        }
        let mut it = values.iter();
        let blocks = self
            .dims
            .iter()
            .map(|&d| {
                let diag: Vec<C64> = it.by_ref().take(d).map(|&v| C64::new(v, 0.0)).collect();
                DMatrix::from_diagonal(&DVector::from_vec(diag))
            })
            .collect();
        Ok(AlgElement { blocks })
    }

    /// `τ(x) = Σ_j w_j Tr(x_j)`.
    pub fn trace(&self, x: &AlgElement) -> Result<C64> {
        self.check(x)?;
        Ok(x
            .blocks
            .iter()
            .zip(&self.weights)
            .map(|(b, &w)| b.trace() * w)
            .sum())
    }

    /// Real part of the trace, for arguments known to be self-adjoint.
    pub fn trace_re(&self, x: &AlgElement) -> Result<f64> {
        self.trace(x).map(|t| t.re)
    }

    /// Noncommutative `L^p` norm `(τ(|x|^p))^{1/p}`; `p = ∞` gives the operator norm.
    pub fn lp_norm(&self, x: &AlgElement, p: f64) -> Result<f64> {
        self.check(x)?;
        if p.is_nan() || p < 1.0 {
            return Err(Error::Domain(format!("lp_norm needs p >= 1, got {p}")));
        }
        if p.is_infinite() {
            return Ok(x.uniform_norm());
        }
        let mut acc = 0.0;
        for (b, &w) in x.blocks.iter().zip(&self.weights) {
            for s in b.singular_values().iter() {
                acc += w * s.powf(p);
            }
        }
        Ok(acc.powf(1.0 / p))
    }

    pub fn spectral_decompose(&self, x: &AlgElement) -> Result<SpectralDecomposition> {
        self.check(x)?;
        require_self_adjoint(x)?;
        let scale = x.uniform_norm().max(f64::MIN_POSITIVE);
        let mut pairs = eigenpairs(x);
        pairs.sort_by(|a, b| a.value.total_cmp(&b.value));

        let mut eigenvalues = Vec::new();
        let mut projections = Vec::new();
        let mut traces = Vec::new();
        let mut start = 0;
        while start < pairs.len() {
            let mut end = start + 1;
            while end < pairs.len() && pairs[end].value - pairs[start].value <= CLUSTER_TOL * scale {
                end += 1;
            }
            let cluster = &pairs[start..end];
            let mean = cluster.iter().map(|p| p.value).sum::<f64>() / cluster.len() as f64;
            let e = projection_from_pairs(self, cluster.iter());
            traces.push(cluster.iter().map(|p| self.weights[p.block]).sum());
            eigenvalues.push(mean);
            projections.push(e);
            start = end;
        }
        Ok(SpectralDecomposition {
            eigenvalues,
            projections,
            traces,
        })
    }

    /// Deterministic random element of the requested kind.
    pub fn random_element(&self, kind: ElementKind, seed: u64) -> AlgElement {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.random_element_with(kind, &mut rng)
    }

    pub fn random_element_with<R: Rng + ?Sized>(&self, kind: ElementKind, rng: &mut R) -> AlgElement {
        let blocks = self
            .dims
            .iter()
            .map(|&d| match kind {
                ElementKind::General => gaussian(d, d, rng).scale(1.0 / (2.0 * d as f64).sqrt()),
                ElementKind::Hermitian => {
                    let g = gaussian(d, d, rng).scale(1.0 / (2.0 * d as f64).sqrt());
                    (&g + g.adjoint()).scale(0.5)
                }
                ElementKind::Positive => {
                    let g = gaussian(d, d, rng);
                    &g * g.adjoint() / C64::new(2.0 * d as f64, 0.0)
                }
                ElementKind::Projection => {
                    let rank = rng.random_range(0..=d);
                    if rank == 0 {
                        DMatrix::zeros(d, d)
                    } else {
                        let q = gaussian(d, rank, rng).qr().q();
                        &q * q.adjoint()
                    }
                }
            })
            .collect();
        AlgElement { blocks }
    }

    /// Haar-like random unitary (QR of a complex Gaussian matrix, phases fixed).
    pub fn random_unitary(&self, seed: u64) -> AlgElement {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.random_unitary_with(&mut rng)
    }

    pub fn random_unitary_with<R: Rng + ?Sized>(&self, rng: &mut R) -> AlgElement {
        let blocks = self
            .dims
            .iter()
            .map(|&d| {
                let (q, r) = gaussian(d, d, rng).qr().unpack();
                let phases = DVector::from_fn(d, |i, _| {
                    let rii = r[(i, i)];
                    if rii.norm() > 0.0 {
                        rii / rii.norm()
                    } else {
                        C64::new(1.0, 0.0)
                    }
                });
                q * DMatrix::from_diagonal(&phases)
            })
            .collect();
        AlgElement { blocks }
    }

    /// `x ≤ y` in the PSD order, with slack `PSD_TOL · max(‖x‖_∞, ‖y‖_∞)`.
    pub fn is_le(&self, x: &AlgElement, y: &AlgElement) -> Result<bool> {
        self.check(x)?;
        self.check(y)?;
        let scale = x.uniform_norm().max(y.uniform_norm());
        Ok((y - x).min_eigenvalue() >= -PSD_TOL * scale)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElementKind {
    General,
    Hermitian,
    Positive,
    Projection,
}

fn gaussian<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<C64> {
    DMatrix::from_fn(rows, cols, |_, _| {
        C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    })
}

/// A block-diagonal operator. Arithmetic operators panic on shape mismatch;
/// use [`TracedAlgebra::check`] first when shapes are not known to agree.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgElement {
    blocks: Vec<DMatrix<C64>>,
}

impl AlgElement {
    pub fn blocks(&self) -> &[DMatrix<C64>] {
        &self.blocks
    }

    pub fn block(&self, j: usize) -> &DMatrix<C64> {
        &self.blocks[j]
    }

    pub fn into_blocks(self) -> Vec<DMatrix<C64>> {
        self.blocks
    }

    pub fn map_blocks(&self, f: impl Fn(&DMatrix<C64>) -> DMatrix<C64>) -> AlgElement {
        AlgElement {
            blocks: self.blocks.iter().map(f).collect(),
        }
    }

    pub fn adjoint(&self) -> AlgElement {
        self.map_blocks(|b| b.adjoint())
    }

    pub fn scale(&self, s: f64) -> AlgElement {
        self.map_blocks(|b| b.scale(s))
    }

    /// `(x + x*)/2`.
    pub fn hermitian_part(&self) -> AlgElement {
        self.map_blocks(|b| (b + b.adjoint()).scale(0.5))
    }

    pub fn is_zero(&self) -> bool {
        self.blocks.iter().all(|b| b.iter().all(|z| *z == C64::new(0.0, 0.0)))
    }

    /// Largest entrywise deviation from self-adjointness.
    pub fn self_adjoint_defect(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| (b - b.adjoint()).camax())
            .fold(0.0, f64::max)
    }

    pub fn is_self_adjoint(&self, tol: f64) -> bool {
        self.self_adjoint_defect() <= tol * self.uniform_norm().max(1.0)
    }

    /// Operator norm `‖x‖_∞`, the largest singular value.
    pub fn uniform_norm(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| b.singular_values().max())
            .fold(0.0, f64::max)
    }

    /// Singular values of every block, tagged with the block index.
    pub fn singular_values(&self) -> Vec<(usize, f64)> {
        self.blocks
            .iter()
            .enumerate()
            .flat_map(|(j, b)| b.singular_values().iter().map(move |&s| (j, s)).collect::<Vec<_>>())
            .collect()
    }

    /// `|x| = (x*x)^{1/2}`, computed from the SVD `x = UΣV*` as `VΣV*`.
    pub fn abs(&self) -> AlgElement {
        self.map_blocks(|b| {
            let svd = SVD::new(b.clone(), false, true);
            let vt = svd.v_t.expect("requested V*");
            let sigma = DMatrix::from_diagonal(&svd.singular_values.map(|s| C64::new(s, 0.0)));
            let a = vt.adjoint() * sigma * vt;
            (&a + a.adjoint()).scale(0.5)
        })
    }

    /// Smallest eigenvalue of the Hermitian part.
    pub fn min_eigenvalue(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| SymmetricEigen::new((b + b.adjoint()).scale(0.5)).eigenvalues.min())
            .fold(f64::INFINITY, f64::min)
    }

    /// Largest eigenvalue of the Hermitian part.
    pub fn max_eigenvalue(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| SymmetricEigen::new((b + b.adjoint()).scale(0.5)).eigenvalues.max())
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Positive semidefinite within `PSD_TOL · ‖x‖_∞`.
    pub fn is_positive(&self) -> bool {
        self.is_self_adjoint(PSD_TOL) && self.min_eigenvalue() >= -PSD_TOL * self.uniform_norm()
    }
}

impl Add for &AlgElement {
    type Output = AlgElement;
    fn add(self, rhs: &AlgElement) -> AlgElement {
        assert_eq!(self.blocks.len(), rhs.blocks.len(), "block count mismatch");
        AlgElement {
            blocks: self.blocks.iter().zip(&rhs.blocks).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &AlgElement {
    type Output = AlgElement;
    fn sub(self, rhs: &AlgElement) -> AlgElement {
        assert_eq!(self.blocks.len(), rhs.blocks.len(), "block count mismatch");
        AlgElement {
            blocks: self.blocks.iter().zip(&rhs.blocks).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Mul for &AlgElement {
    type Output = AlgElement;
    fn mul(self, rhs: &AlgElement) -> AlgElement {
        assert_eq!(self.blocks.len(), rhs.blocks.len(), "block count mismatch");
        AlgElement {
            blocks: self.blocks.iter().zip(&rhs.blocks).map(|(a, b)| a * b).collect(),
        }
    }
}

impl Neg for &AlgElement {
    type Output = AlgElement;
    fn neg(self) -> AlgElement {
        self.scale(-1.0)
    }
}

/// A self-adjoint idempotent.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection(AlgElement);

impl Projection {
    /// Validates `e = e*` and `e² = e` to `tol`.
    pub fn new(e: AlgElement, tol: f64) -> Result<Self> {
        let defect = (&(&e * &e) - &e).uniform_norm();
        if !e.is_self_adjoint(tol) || defect > tol {
            return Err(Error::Domain(format!(
                "not a projection (idempotency defect {defect:.3e})"
            )));
        }
        Ok(Projection(e.hermitian_part()))
    }

    pub fn identity(a: &TracedAlgebra) -> Self {
        Projection(a.identity())
    }

    pub fn zero(a: &TracedAlgebra) -> Self {
        Projection(a.zero())
    }

    pub fn as_element(&self) -> &AlgElement {
        &self.0
    }

    pub fn into_element(self) -> AlgElement {
        self.0
    }

    /// `e⊥ = 𝟏 − e`.
    pub fn complement(&self) -> Projection {
        Projection(self.0.map_blocks(|b| DMatrix::identity(b.nrows(), b.ncols()) - b))
    }

    pub fn trace(&self, a: &TracedAlgebra) -> Result<f64> {
        a.trace_re(&self.0)
    }

    /// `τ(e⊥)`.
    pub fn trace_complement(&self, a: &TracedAlgebra) -> Result<f64> {
        let total = a.total_trace();
        let v = total - self.trace(a)?;
        Ok(if v.abs() <= 1e-12 * total { 0.0 } else { v })
    }

    /// `e x e`.
    pub fn sandwich(&self, x: &AlgElement) -> AlgElement {
        &(&self.0 * x) * &self.0
    }
}

#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    /// Distinct eigenvalues, ascending.
    pub eigenvalues: Vec<f64>,
    /// Pairwise orthogonal eigenprojections summing to `𝟏`.
    pub projections: Vec<Projection>,
    /// `τ(e_k)` for each eigenprojection.
    pub traces: Vec<f64>,
}

impl SpectralDecomposition {
    pub fn reconstruct(&self, a: &TracedAlgebra) -> AlgElement {
        self.eigenvalues
            .iter()
            .zip(&self.projections)
            .fold(a.zero(), |acc, (&l, e)| &acc + &e.as_element().scale(l))
    }
}

/// Closed, open or half-open real interval used to select spectral subspaces.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    pub lo_closed: bool,
    pub hi_closed: bool,
}

impl Interval {
    pub fn closed(lo: f64, hi: f64) -> Self {
        Interval { lo, hi, lo_closed: true, hi_closed: true }
    }

    pub fn open(lo: f64, hi: f64) -> Self {
        Interval { lo, hi, lo_closed: false, hi_closed: false }
    }

    /// `(-∞, b]`.
    pub fn at_most(b: f64) -> Self {
        Self::closed(f64::NEG_INFINITY, b)
    }

    /// `(a, ∞)`.
    pub fn above(a: f64) -> Self {
        Self::open(a, f64::INFINITY)
    }

    pub fn contains(&self, v: f64, slack: f64) -> bool {
        let lo_ok = if self.lo_closed { v >= self.lo - slack } else { v > self.lo + slack };
        let hi_ok = if self.hi_closed { v <= self.hi + slack } else { v < self.hi - slack };
        lo_ok && hi_ok
    }
}

#[derive(Debug, Clone)]
struct EigenPair {
    value: f64,
    block: usize,
    vector: DVector<C64>,
}

fn require_self_adjoint(x: &AlgElement) -> Result<()> {
    if !x.is_self_adjoint(PSD_TOL) {
        return Err(Error::Domain(format!(
            "element is not self-adjoint (defect {:.3e})",
            x.self_adjoint_defect()
        )));
    }
    Ok(())
}

fn eigenpairs(x: &AlgElement) -> Vec<EigenPair> {
    let mut out = Vec::new();
    for (j, b) in x.blocks.iter().enumerate() {
        let eig = SymmetricEigen::new((b + b.adjoint()).scale(0.5));
        for (i, &value) in eig.eigenvalues.iter().enumerate() {
            out.push(EigenPair {
                value,
                block: j,
                vector: eig.eigenvectors.column(i).into_owned(),
            });
        }
    }
    out
}

fn projection_from_pairs<'a>(a: &TracedAlgebra, pairs: impl Iterator<Item = &'a EigenPair>) -> Projection {
    let mut e = a.zero();
    for p in pairs {
        e.blocks[p.block] += &p.vector * p.vector.adjoint();
    }
    Projection(e.hermitian_part())
}

/// Projection onto the span of eigenvectors of self-adjoint `x` whose eigenvalue lies in `interval`.
pub fn spectral_projection(a: &TracedAlgebra, x: &AlgElement, interval: Interval) -> Result<Projection> {
    a.check(x)?;
    require_self_adjoint(x)?;
    let slack = ENDPOINT_TOL * x.uniform_norm().max(1.0);
    let pairs = eigenpairs(x);
    Ok(projection_from_pairs(
        a,
        pairs.iter().filter(|p| interval.contains(p.value, slack)),
    ))
}

/// Functional calculus `φ(x) = Σ φ(λ_k) e_k` for positive `x`.
pub fn apply_function(a: &TracedAlgebra, phi: impl Fn(f64) -> f64, x: &AlgElement) -> Result<AlgElement> {
    a.check(x)?;
    require_self_adjoint(x)?;
    let scale = x.uniform_norm();
    let mut out = a.zero();
    for p in eigenpairs(x) {
        if p.value < -PSD_TOL * scale {
            return Err(Error::Domain(format!(
                "apply_function needs a positive element; found eigenvalue {:.3e}",
                p.value
            )));
        }
        let v = phi(p.value.max(0.0));
        out.blocks[p.block] += (&p.vector * p.vector.adjoint()).scale(v);
    }
    Ok(out.hermitian_part())
}

/// Greatest lower bound of a family of projections: the projection onto the
/// kernel of `Σ p⊥`. The empty meet is `𝟏`.
pub fn projection_meet(a: &TracedAlgebra, ps: &[Projection]) -> Result<Projection> {
    let mut sum = a.zero();
    for p in ps {
        a.check(p.as_element())?;
        sum = &sum + p.complement().as_element();
    }
    Ok(kernel_projection(a, &sum))
}

/// Projection onto the eigenvectors of positive `s` with eigenvalue below [`MEET_TOL`].
pub(crate) fn kernel_projection(a: &TracedAlgebra, s: &AlgElement) -> Projection {
    let pairs = eigenpairs(s);
    projection_from_pairs(a, pairs.iter().filter(|p| p.value < MEET_TOL))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn shapes() -> Vec<TracedAlgebra> {
        vec![
            TracedAlgebra::new(&[(2, 1.0)]).unwrap(),
            TracedAlgebra::new(&[(2, 1.0), (2, 0.5), (1, 2.0)]).unwrap(),
            TracedAlgebra::new(&[(3, 0.25), (1, 4.0)]).unwrap(),
            TracedAlgebra::diagonal(&[1.0, 1.0, 1.0, 1.0]).unwrap(),
        ]
    }

    #[test]
    fn rejects_bad_blocks() {
        assert!(matches!(TracedAlgebra::new(&[]), Err(Error::Domain(_))));
        assert!(matches!(TracedAlgebra::new(&[(0, 1.0)]), Err(Error::Domain(_))));
        assert!(matches!(TracedAlgebra::new(&[(2, 0.0)]), Err(Error::Domain(_))));
        assert!(matches!(TracedAlgebra::new(&[(2, -1.0)]), Err(Error::Domain(_))));
    }

    #[test]
    fn trace_of_identity() {
        let a = TracedAlgebra::new(&[(2, 1.0)]).unwrap();
        assert_eq!(a.trace(&a.identity()).unwrap(), c(2.0));
        let b = TracedAlgebra::new(&[(1, 0.5), (1, 2.0)]).unwrap();
        let x = b.from_diagonal(&[1.0, 1.0]).unwrap();
        assert_eq!(b.trace(&x).unwrap(), c(2.5));
    }

    #[test]
    fn trace_shape_mismatch() {
        let a = TracedAlgebra::new(&[(2, 1.0)]).unwrap();
        let b = TracedAlgebra::new(&[(3, 1.0)]).unwrap();
        assert!(matches!(a.trace(&b.identity()), Err(Error::Structural(_))));
    }

    #[test]
    fn trace_is_tracial_and_faithful() {
        for a in shapes() {
            for seed in 0..20 {
                let x = a.random_element(ElementKind::General, seed);
                let y = a.random_element(ElementKind::General, seed + 1000);
                let lhs = a.trace(&(&x * &y)).unwrap();
                let rhs = a.trace(&(&y * &x)).unwrap();
                let bound = 1e-10 * x.uniform_norm() * y.uniform_norm() * a.total_trace();
                assert!((lhs - rhs).norm() <= bound);
                assert!(a.trace_re(&(&x.adjoint() * &x)).unwrap() > 0.0);
            }
        }
    }

    #[test]
    fn abs_of_nilpotent_shift() {
        let a = TracedAlgebra::new(&[(2, 1.0)]).unwrap();
        let x = a.element_from_real(&[vec![vec![0.0, 1.0], vec![0.0, 0.0]]]).unwrap();
        let expected = a.from_diagonal(&[0.0, 1.0]).unwrap();
        assert!((&x.abs() - &expected).uniform_norm() < 1e-14);
    }

    #[test]
    fn abs_of_positive_is_itself() {
        let a = TracedAlgebra::new(&[(3, 1.0), (2, 0.3)]).unwrap();
        let x = a.random_element(ElementKind::Positive, 4);
        assert!((&x.abs() - &x).uniform_norm() < 1e-12);
    }

    #[test]
    fn abs_squares_to_gram_and_matches_singular_values() {
        for a in shapes() {
            for seed in 0..10 {
                let x = a.random_element(ElementKind::General, seed);
                let m = x.abs();
                assert!(m.is_positive());
                let gram = &x.adjoint() * &x;
                assert!((&(&m * &m) - &gram).uniform_norm() < 1e-12);
                let mut eig: Vec<f64> = eigenpairs(&m).iter().map(|p| p.value).collect();
                let mut sv: Vec<f64> = x.singular_values().iter().map(|s| s.1).collect();
                eig.sort_by(f64::total_cmp);
                sv.sort_by(f64::total_cmp);
                for (e, s) in eig.iter().zip(&sv) {
                    assert_abs_diff_eq!(e, s, epsilon = 1e-10);
                }
            }
        }
    }

    #[test]
    fn spectral_decomposition_examples() {
        let a = TracedAlgebra::new(&[(2, 1.0)]).unwrap();
        let x = a.from_diagonal(&[3.0, 1.0]).unwrap();
        let sd = a.spectral_decompose(&x).unwrap();
        assert_eq!(sd.eigenvalues.len(), 2);
        assert_abs_diff_eq!(sd.eigenvalues[0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(sd.eigenvalues[1], 3.0, epsilon = 1e-14);
        let e1 = a.from_diagonal(&[0.0, 1.0]).unwrap();
        assert!((sd.projections[0].as_element() - &e1).uniform_norm() < 1e-14);

        let one = a.spectral_decompose(&a.identity()).unwrap();
        assert_eq!(one.eigenvalues.len(), 1);
        assert!((one.projections[0].as_element() - &a.identity()).uniform_norm() < 1e-14);
        assert_abs_diff_eq!(one.traces[0], 2.0);
    }

    #[test]
    fn spectral_decomposition_rejects_non_hermitian() {
        let a = TracedAlgebra::new(&[(2, 1.0)]).unwrap();
        let x = a.element_from_real(&[vec![vec![0.0, 1.0], vec![0.0, 0.0]]]).unwrap();
        assert!(matches!(a.spectral_decompose(&x), Err(Error::Domain(_))));
    }

    #[test]
    fn spectral_reconstruction_and_orthogonality() {
        for a in shapes() {
            for seed in 0..10 {
                let x = a.random_element(ElementKind::Hermitian, seed);
                let sd = a.spectral_decompose(&x).unwrap();
                assert!(sd.eigenvalues.windows(2).all(|w| w[0] < w[1]));
                let err = (&sd.reconstruct(&a) - &x).uniform_norm();
                assert!(err <= 1e-9 * x.uniform_norm());
                let sum = sd.projections.iter().fold(a.zero(), |s, e| &s + e.as_element());
                assert!((&sum - &a.identity()).uniform_norm() < 1e-10);
                for (i, e) in sd.projections.iter().enumerate() {
                    for f in &sd.projections[i + 1..] {
                        assert!((e.as_element() * f.as_element()).uniform_norm() < 1e-10);
                    }
                }
                let total: f64 = sd.traces.iter().sum();
                assert_abs_diff_eq!(total, a.total_trace(), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn functional_calculus_examples() {
        let a = TracedAlgebra::new(&[(2, 1.0)]).unwrap();
        let x = a.from_diagonal(&[1.0, 2.0]).unwrap();
        let sq = apply_function(&a, |u| u * u, &x).unwrap();
        assert!((&sq - &a.from_diagonal(&[1.0, 4.0]).unwrap()).uniform_norm() < 1e-14);
        let id = apply_function(&a, |u| u, &x).unwrap();
        assert!((&id - &x).uniform_norm() < 1e-14);
    }

    #[test]
    fn functional_calculus_sqrt_of_square() {
        for a in shapes() {
            let x = a.random_element(ElementKind::Positive, 9);
            let x2 = apply_function(&a, |u| u * u, &x).unwrap();
            let back = apply_function(&a, f64::sqrt, &x2).unwrap();
            assert!((&back - &x).uniform_norm() < 1e-9);
        }
    }

    #[test]
    fn functional_calculus_rejects_negative() {
        let a = TracedAlgebra::new(&[(2, 1.0)]).unwrap();
        let x = a.from_diagonal(&[1.0, -0.5]).unwrap();
        assert!(matches!(apply_function(&a, |u| u, &x), Err(Error::Domain(_))));
    }

    #[test]
    fn uniform_norm_examples() {
        let a = TracedAlgebra::new(&[(2, 1.0)]).unwrap();
        let x = a.element_from_real(&[vec![vec![0.0, 2.0], vec![0.0, 0.0]]]).unwrap();
        assert_abs_diff_eq!(x.uniform_norm(), 2.0, epsilon = 1e-14);
        let b = TracedAlgebra::new(&[(3, 1.0), (2, 2.0)]).unwrap();
        for seed in 0..5 {
            let e = b.random_element(ElementKind::Projection, seed);
            if !e.is_zero() && e.uniform_norm() > 0.5 {
                assert_abs_diff_eq!(e.uniform_norm(), 1.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn uniform_norm_is_submultiplicative_and_unitarily_invariant() {
        let a = TracedAlgebra::new(&[(3, 1.0), (2, 0.7)]).unwrap();
        for seed in 0..10 {
            let x = a.random_element(ElementKind::General, seed);
            let y = a.random_element(ElementKind::General, seed + 50);
            assert!((&x * &y).uniform_norm() <= x.uniform_norm() * y.uniform_norm() * (1.0 + 1e-12));
            let u = a.random_unitary(seed);
            let v = a.random_unitary(seed + 7);
            let rotated = &(&u * &x) * &v;
            assert_abs_diff_eq!(rotated.uniform_norm(), x.uniform_norm(), epsilon = 1e-12);
        }
    }

    #[test]
    fn lp_norm_examples() {
        let a = TracedAlgebra::new(&[(1, 1.0), (1, 1.0)]).unwrap();
        let x = a.from_diagonal(&[3.0, 4.0]).unwrap();
        assert_abs_diff_eq!(a.lp_norm(&x, 2.0).unwrap(), 5.0, epsilon = 1e-14);
        let b = TracedAlgebra::new(&[(2, 1.0), (1, 3.0)]).unwrap();
        assert_abs_diff_eq!(b.lp_norm(&b.identity(), 1.0).unwrap(), b.total_trace(), epsilon = 1e-14);
        assert!(matches!(a.lp_norm(&x, 0.5), Err(Error::Domain(_))));
    }

    #[test]
    fn lp_one_is_trace_of_abs() {
        for a in shapes() {
            let x = a.random_element(ElementKind::General, 3);
            let via_abs = a.trace_re(&x.abs()).unwrap();
            assert_abs_diff_eq!(a.lp_norm(&x, 1.0).unwrap(), via_abs, epsilon = 1e-12);
        }
    }

    #[test]
    fn spectral_projection_examples() {
        let a = TracedAlgebra::new(&[(3, 1.0)]).unwrap();
        let x = a.from_diagonal(&[0.2, 0.5, 0.9]).unwrap();
        let e = spectral_projection(&a, &x, Interval::closed(0.0, 0.5)).unwrap();
        let expected = a.from_diagonal(&[1.0, 1.0, 0.0]).unwrap();
        assert!((e.as_element() - &expected).uniform_norm() < 1e-14);
        let full = spectral_projection(&a, &x, Interval::closed(f64::NEG_INFINITY, f64::INFINITY)).unwrap();
        assert!((full.as_element() - &a.identity()).uniform_norm() < 1e-14);
    }

    #[test]
    fn spectral_family_complement_is_nonincreasing() {
        let a = TracedAlgebra::new(&[(3, 0.5), (2, 2.0)]).unwrap();
        let m = a.random_element(ElementKind::General, 12).abs();
        let mut prev = f64::INFINITY;
        for k in 0..=60 {
            let lambda = k as f64 * 0.05;
            let e = spectral_projection(&a, &m, Interval::closed(0.0, lambda)).unwrap();
            let t = e.trace_complement(&a).unwrap();
            assert!(t <= prev + 1e-12);
            let ex = e.as_element();
            assert!((&(ex * &m) - &(&m * ex)).uniform_norm() < 1e-10);
            prev = t;
        }
    }

    #[test]
    fn meet_examples() {
        let a = TracedAlgebra::new(&[(3, 1.0)]).unwrap();
        let p = Projection::new(a.from_diagonal(&[1.0, 1.0, 0.0]).unwrap(), 1e-12).unwrap();
        let q = Projection::new(a.from_diagonal(&[0.0, 1.0, 1.0]).unwrap(), 1e-12).unwrap();
        let m = projection_meet(&a, &[p.clone(), q]).unwrap();
        assert!((m.as_element() - &a.from_diagonal(&[0.0, 1.0, 0.0]).unwrap()).uniform_norm() < 1e-14);
        let with_one = projection_meet(&a, &[p.clone(), Projection::identity(&a)]).unwrap();
        assert!((with_one.as_element() - p.as_element()).uniform_norm() < 1e-14);
    }

    #[test]
    fn meet_of_diagonal_projections_is_entrywise_min() {
        use rand::Rng;
        let a = TracedAlgebra::diagonal(&[1.0; 6]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..30 {
            let k = rng.random_range(1..5);
            let masks: Vec<Vec<f64>> = (0..k)
                .map(|_| (0..6).map(|_| if rng.random_bool(0.6) { 1.0 } else { 0.0 }).collect())
                .collect();
            let ps: Vec<_> = masks
                .iter()
                .map(|m| Projection::new(a.from_diagonal(m).unwrap(), 1e-12).unwrap())
                .collect();
            let oracle: Vec<f64> = (0..6)
                .map(|i| masks.iter().map(|m| m[i]).fold(1.0, f64::min))
                .collect();
            let meet = projection_meet(&a, &ps).unwrap();
            assert!((meet.as_element() - &a.from_diagonal(&oracle).unwrap()).uniform_norm() < 1e-14);
        }
    }

    #[test]
    fn meet_lies_below_each_input() {
        let a = TracedAlgebra::new(&[(4, 1.0), (2, 0.5)]).unwrap();
        let ps: Vec<_> = (0..3)
            .map(|s| {
                let e = a.random_element(ElementKind::Projection, 100 + s);
                Projection::new(e, 1e-10).unwrap()
            })
            .collect();
        let m = projection_meet(&a, &ps).unwrap();
        for p in &ps {
            let pm = p.as_element() * m.as_element();
            assert!((&pm - m.as_element()).uniform_norm() < 1e-9);
        }
    }

    #[test]
    fn random_elements_have_requested_structure() {
        for a in shapes() {
            for seed in 0..10 {
                assert!(a.random_element(ElementKind::Positive, seed).min_eigenvalue() >= -1e-12);
                assert!(a.random_element(ElementKind::Hermitian, seed).self_adjoint_defect() < 1e-15);
                let e = a.random_element(ElementKind::Projection, seed);
                assert!(Projection::new(e, 1e-10).is_ok());
                assert_eq!(
                    a.random_element(ElementKind::General, seed),
                    a.random_element(ElementKind::General, seed)
                );
            }
        }
    }

    #[test]
    fn chebyshev_at_algebra_level() {
        for a in shapes() {
            for seed in 0..10 {
                let x = a.random_element(ElementKind::Positive, seed);
                for nu in [0.1, 0.3, 1.0] {
                    let e = spectral_projection(&a, &x, Interval::above(nu)).unwrap();
                    let lhs = e.trace(&a).unwrap();
                    assert!(lhs <= a.trace_re(&x).unwrap() / nu + 1e-12);
                }
            }
        }
    }

    #[test]
    fn psd_order() {
        let a = TracedAlgebra::new(&[(2, 1.0)]).unwrap();
        let x = a.from_diagonal(&[1.0, 2.0]).unwrap();
        let y = a.from_diagonal(&[1.5, 2.0]).unwrap();
        assert!(a.is_le(&x, &y).unwrap());
        assert!(!a.is_le(&y, &x).unwrap());
        assert!(a.is_le(&x, &x).unwrap());
    }
}
