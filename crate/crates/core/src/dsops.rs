//! Dunford–Schwartz operators on a traced algebra.
//!
//! Every operator is stored as a dense superoperator acting on the vectorized
//! algebra (blocks concatenated, each column-major), together with its trace
//! adjoint `T†`, defined by `τ(T(x)·y) = τ(x·T†(y))`.

use nalgebra::{DMatrix, DVector, Schur, SymmetricEigen, SVD};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::algebra::{AlgElement, ElementKind, TracedAlgebra, C64, PSD_TOL};
use crate::check::Check;
use crate::error::{Error, Result};
use crate::orlicz::{luxemburg_norm, OrliczFunction};

/// Singular-value threshold for the eigenvalue-1 eigenspace of the superoperator.
pub const FIXED_POINT_TOL: f64 = 1e-8;
/// Below this distance from 1 a non-unit eigenvalue makes the limit untrustworthy.
pub const MIN_SPECTRAL_GAP: f64 = 1e-6;
const CONTRACTION_TOL: f64 = 1e-9;
const DEFAULT_SAMPLES: usize = 50;
const DEFAULT_SAMPLE_SEED: u64 = 0x05EE_D0D5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Descriptor {
    Identity,
    UnitaryConjugation,
    SchurCorrelation { block: usize },
    Substochastic,
    Compose { outer: Box<Descriptor>, inner: Box<Descriptor> },
    Mix { lambda: f64, first: Box<Descriptor>, second: Box<Descriptor> },
    Raw,
}

#[derive(Debug, Clone)]
pub struct DsOperator {
    algebra: TracedAlgebra,
    descriptor: Descriptor,
    matrix: DMatrix<C64>,
    adjoint: DMatrix<C64>,
}

pub fn vectorize(a: &TracedAlgebra, x: &AlgElement) -> Result<DVector<C64>> {
    a.check(x)?;
    Ok(DVector::from_iterator(
        a.vector_dimension(),
        x.blocks().iter().flat_map(|b| b.as_slice().iter().cloned()),
    ))
}

pub fn devectorize(a: &TracedAlgebra, v: &DVector<C64>) -> Result<AlgElement> {
    if v.len() != a.vector_dimension() {
        return Err(Error::Structural(format!(
            "vector of length {} for algebra of dimension {}",
            v.len(),
            a.vector_dimension()
        )));
    }
    let mut offset = 0;
    let blocks = a
        .dims()
        .iter()
        .map(|&d| {
            let b = DMatrix::from_column_slice(d, d, &v.as_slice()[offset..offset + d * d]);
            offset += d * d;
            b
        })
        .collect();
    a.element(blocks)
}

/// `(block, row, col)` for every coordinate of the vectorized algebra.
fn coordinates(a: &TracedAlgebra) -> Vec<(usize, usize, usize)> {
    let mut out = Vec::with_capacity(a.vector_dimension());
    for (j, &d) in a.dims().iter().enumerate() {
        for c in 0..d {
            for r in 0..d {
                out.push((j, r, c));
            }
        }
    }
    out
}

fn unit(a: &TracedAlgebra, (j, r, c): (usize, usize, usize)) -> AlgElement {
    let mut blocks = a.zero().into_blocks();
    blocks[j][(r, c)] = C64::new(1.0, 0.0);
    a.element(blocks).expect("unit has algebra shape")
}

impl DsOperator {
    /// Wraps an arbitrary superoperator. No Dunford–Schwartz property is
    /// assumed; run [`verify_ds`] before using it in ergodic experiments.
    pub fn from_superoperator(a: &TracedAlgebra, descriptor: Descriptor, matrix: DMatrix<C64>) -> Result<Self> {
        let dim = a.vector_dimension();
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(Error::Structural(format!(
                "superoperator is {}x{}, algebra needs {dim}x{dim}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let coords = coordinates(a);
        let index_of = |(j, r, c): (usize, usize, usize)| {
            coords.iter().position(|&k| k == (j, r, c)).expect("coordinate exists")
        };
        let transposed: Vec<usize> = coords.iter().map(|&(j, r, c)| index_of((j, c, r))).collect();
        let w = a.weights();
        let adjoint = DMatrix::from_fn(dim, dim, |i, k| {
            let (bi, bk) = (coords[i].0, coords[k].0);
            matrix[(transposed[k], transposed[i])] * (w[bk] / w[bi])
        });
        Ok(DsOperator {
            algebra: a.clone(),
            descriptor,
            matrix,
            adjoint,
        })
    }

    /// Superoperator of a linear map given by its action on matrix units.
    pub fn from_map(a: &TracedAlgebra, descriptor: Descriptor, f: impl Fn(&AlgElement) -> AlgElement) -> Result<Self> {
        let dim = a.vector_dimension();
        let mut m = DMatrix::zeros(dim, dim);
        for (col, coord) in coordinates(a).into_iter().enumerate() {
            let image = vectorize(a, &f(&unit(a, coord)))?;
            m.set_column(col, &image);
        }
        Self::from_superoperator(a, descriptor, m)
    }

    pub fn identity(a: &TracedAlgebra) -> Self {
        let dim = a.vector_dimension();
        Self::from_superoperator(a, Descriptor::Identity, DMatrix::identity(dim, dim)).expect("square identity")
    }

    /// `T(x) = u x u*`.
    pub fn from_unitary_conjugation(a: &TracedAlgebra, u: &AlgElement) -> Result<Self> {
        a.check(u)?;
        let defect = (&(&u.adjoint() * u) - &a.identity()).uniform_norm();
        if defect > 1e-9 {
            return Err(Error::Domain(format!("u*u differs from 1 by {defect:.3e}")));
        }
        let ustar = u.adjoint();
        Self::from_map(a, Descriptor::UnitaryConjugation, |x| &(u * x) * &ustar)
    }

    /// Schur multiplier `x ↦ C ∘ x` on `block` without validating `C`.
    pub fn schur_multiplier_raw(a: &TracedAlgebra, c: &DMatrix<C64>, block: usize) -> Result<Self> {
        let d = *a
            .dims()
            .get(block)
            .ok_or_else(|| Error::Structural(format!("no block {block}")))?;
        if c.nrows() != d || c.ncols() != d {
            return Err(Error::Structural(format!(
                "correlation matrix is {}x{}, block {block} is {d}x{d}",
                c.nrows(),
                c.ncols()
            )));
        }
        Self::from_map(a, Descriptor::SchurCorrelation { block }, |x| {
            let mut blocks = x.clone().into_blocks();
            blocks[block] = blocks[block].component_mul(c);
            a.element(blocks).expect("same shape")
        })
    }

    /// Entrywise product with a correlation matrix on one block, identity elsewhere.
    pub fn from_schur_correlation(a: &TracedAlgebra, c: &DMatrix<C64>, block: usize) -> Result<Self> {
        let op = Self::schur_multiplier_raw(a, c, block)?;
        let herm_defect = (c - c.adjoint()).camax();
        if herm_defect > 1e-9 {
            return Err(Error::Domain(format!("correlation matrix not Hermitian ({herm_defect:.3e})")));
        }
        for i in 0..c.nrows() {
            if (c[(i, i)] - C64::new(1.0, 0.0)).norm() > 1e-9 {
                return Err(Error::Domain(format!("correlation diagonal entry {i} is {}", c[(i, i)])));
            }
        }
        let min_eig = SymmetricEigen::new((c + c.adjoint()).scale(0.5)).eigenvalues.min();
        if min_eig < -1e-9 {
            return Err(Error::Domain(format!("correlation matrix not PSD (min eigenvalue {min_eig:.3e})")));
        }
        Ok(op)
    }

    /// Matrix action on the diagonal of a blocks-of-size-1 algebra, unvalidated.
    pub fn substochastic_raw(a: &TracedAlgebra, s: &DMatrix<f64>) -> Result<Self> {
        if !a.is_commutative() {
            return Err(Error::Structural("substochastic operators need 1x1 blocks".into()));
        }
        let n = a.num_blocks();
        if s.nrows() != n || s.ncols() != n {
            return Err(Error::Structural(format!("matrix is {}x{}, algebra has {n} points", s.nrows(), s.ncols())));
        }
        Self::from_superoperator(a, Descriptor::Substochastic, s.map(|v| C64::new(v, 0.0)))
    }

    /// `(Tf)_i = Σ_j S_ij f_j` with `S ≥ 0`, row sums `≤ 1` and weighted column
    /// sums `Σ_i w_i S_ij ≤ w_j`.
    pub fn from_substochastic(a: &TracedAlgebra, s: &DMatrix<f64>) -> Result<Self> {
        let op = Self::substochastic_raw(a, s)?;
        const TOL: f64 = 1e-12;
        if let Some((i, j)) = (0..s.nrows())
            .flat_map(|i| (0..s.ncols()).map(move |j| (i, j)))
            .find(|&(i, j)| s[(i, j)] < 0.0)
        {
            return Err(Error::Domain(format!("entry ({i}, {j}) is negative")));
        }
        for i in 0..s.nrows() {
            let row: f64 = s.row(i).sum();
            if row > 1.0 + TOL {
                return Err(Error::Domain(format!("row {i} sums to {row} > 1")));
            }
        }
        let w = a.weights();
        for j in 0..s.ncols() {
            let col: f64 = (0..s.nrows()).map(|i| w[i] * s[(i, j)]).sum();
            if col > w[j] * (1.0 + TOL) {
                return Err(Error::Domain(format!("weighted column {j} sums to {col} > {}", w[j])));
            }
        }
        Ok(op)
    }

    pub fn algebra(&self) -> &TracedAlgebra {
        &self.algebra
    }

    pub fn descriptor(&self) -> &Descriptor {
        &self.descriptor
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn adjoint_matrix(&self) -> &DMatrix<C64> {
        &self.adjoint
    }

    pub fn apply(&self, x: &AlgElement) -> Result<AlgElement> {
        devectorize(&self.algebra, &(&self.matrix * vectorize(&self.algebra, x)?))
    }

    /// `T†(y)`.
    pub fn apply_adjoint(&self, y: &AlgElement) -> Result<AlgElement> {
        devectorize(&self.algebra, &(&self.adjoint * vectorize(&self.algebra, y)?))
    }

    /// Minimum eigenvalue over the Choi matrices of every block-to-block component.
    pub fn choi_min_eigenvalue(&self) -> f64 {
        let a = &self.algebra;
        let offsets: Vec<usize> = a
            .dims()
            .iter()
            .scan(0, |acc, &d| {
                let o = *acc;
                *acc += d * d;
                Some(o)
            })
            .collect();
        let col_of = |(j, r, c): (usize, usize, usize)| offsets[j] + c * a.dims()[j] + r;
        let mut worst = f64::INFINITY;
        for (bi, &di) in a.dims().iter().enumerate() {
            for (bj, &dj) in a.dims().iter().enumerate() {
                let n = di * dj;
                let choi = DMatrix::from_fn(n, n, |row, col| {
                    let (ra, p) = (row / dj, row % dj);
                    let (rb, q) = (col / dj, col % dj);
                    self.matrix[(col_of((bj, p, q)), col_of((bi, ra, rb)))]
                });
                let h = (&choi + choi.adjoint()).scale(0.5);
                worst = worst.min(SymmetricEigen::new(h).eigenvalues.min());
            }
        }
        worst
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DsCertificate {
    /// Which positivity notion the first check certifies.
    pub positivity_notion: String,
    pub complete_positivity: Check,
    /// Smallest eigenvalue of `𝟏 − T(𝟏)`.
    pub subunital: Check,
    /// Smallest eigenvalue of `𝟏 − T†(𝟏)`.
    pub trace_subunital: Check,
    /// Largest sampled `‖T(x)‖_∞ / ‖x‖_∞`.
    pub sampled_uniform: Check,
    /// Largest sampled `‖T(x)‖_1 / ‖x‖_1`.
    pub sampled_trace: Check,
}

impl DsCertificate {
    pub fn checks(&self) -> [&Check; 5] {
        [
            &self.complete_positivity,
            &self.subunital,
            &self.trace_subunital,
            &self.sampled_uniform,
            &self.sampled_trace,
        ]
    }

    pub fn passed(&self) -> bool {
        self.checks().iter().all(|c| c.passed)
    }
}

/// Certifies `T ∈ DS⁺`: complete positivity through the Choi matrices, then
/// `T(𝟏) ≤ 𝟏` and `T†(𝟏) ≤ 𝟏` (for positive maps these are equivalent to
/// contractivity in `‖·‖_∞` and `‖·‖_1`), plus 50 sampled norm ratios.
pub fn verify_ds(t: &DsOperator) -> DsCertificate {
    verify_ds_with(t, DEFAULT_SAMPLES, DEFAULT_SAMPLE_SEED)
}

pub fn verify_ds_with(t: &DsOperator, samples: usize, seed: u64) -> DsCertificate {
    let a = &t.algebra;
    let one = a.identity();
    let scale = t.matrix.camax().max(1.0);
    let positivity = t.choi_min_eigenvalue();
    let t1 = t.apply(&one).expect("algebra shape");
    let tdag1 = t.apply_adjoint(&one).expect("algebra shape");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut sup_ratio, mut l1_ratio) = (0.0f64, 0.0f64);
    for _ in 0..samples {
        let x = a.random_element_with(ElementKind::General, &mut rng);
        let tx = t.apply(&x).expect("algebra shape");
        sup_ratio = sup_ratio.max(tx.uniform_norm() / x.uniform_norm());
        l1_ratio = l1_ratio.max(a.lp_norm(&tx, 1.0).unwrap() / a.lp_norm(&x, 1.0).unwrap());
    }
    DsCertificate {
        positivity_notion: "complete positivity (Choi matrices PSD), stronger than positivity".into(),
        complete_positivity: Check::at_least("complete_positivity", positivity, -PSD_TOL * scale),
        subunital: Check::at_least("unit_subunital", (&one - &t1).min_eigenvalue(), -PSD_TOL),
        trace_subunital: Check::at_least("adjoint_subunital", (&one - &tdag1).min_eigenvalue(), -PSD_TOL),
        sampled_uniform: Check::at_most("sampled_uniform_contraction", sup_ratio, 1.0 + CONTRACTION_TOL),
        sampled_trace: Check::at_most("sampled_trace_contraction", l1_ratio, 1.0 + CONTRACTION_TOL),
    }
}

fn require_ds(t: &DsOperator, what: &str) -> Result<()> {
    let cert = verify_ds(t);
    if !cert.passed() {
        let failed: Vec<_> = cert.checks().iter().filter(|c| !c.passed).map(|c| c.name.clone()).collect();
        return Err(Error::Consistency(format!("{what} failed DS verification: {}", failed.join(", "))));
    }
    Ok(())
}

/// `x ↦ outer(inner(x))`.
pub fn compose(outer: &DsOperator, inner: &DsOperator) -> Result<DsOperator> {
    if outer.algebra != inner.algebra {
        return Err(Error::Structural("composed operators act on different algebras".into()));
    }
    let op = DsOperator {
        algebra: outer.algebra.clone(),
        descriptor: Descriptor::Compose {
            outer: Box::new(outer.descriptor.clone()),
            inner: Box::new(inner.descriptor.clone()),
        },
        matrix: &outer.matrix * &inner.matrix,
        adjoint: &inner.adjoint * &outer.adjoint,
    };
    require_ds(&op, "composition")?;
    Ok(op)
}

/// `λ·first + (1 − λ)·second`.
pub fn convex_combine(first: &DsOperator, second: &DsOperator, lambda: f64) -> Result<DsOperator> {
    if first.algebra != second.algebra {
        return Err(Error::Structural("mixed operators act on different algebras".into()));
    }
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::Domain(format!("mixing weight must lie in [0, 1], got {lambda}")));
    }
    let mu = 1.0 - lambda;
    let op = DsOperator {
        algebra: first.algebra.clone(),
        descriptor: Descriptor::Mix {
            lambda,
            first: Box::new(first.descriptor.clone()),
            second: Box::new(second.descriptor.clone()),
        },
        matrix: first.matrix.scale(lambda) + second.matrix.scale(mu),
        adjoint: first.adjoint.scale(lambda) + second.adjoint.scale(mu),
    };
    require_ds(&op, "convex combination")?;
    Ok(op)
}

/// Streams `(n, A_n(x))` for `n = 1, 2, …` using
/// `A_n = A_{n−1} + (T^{n−1}(x) − A_{n−1}) / n`.
pub struct Averages<'a> {
    op: &'a DsOperator,
    power: DVector<C64>,
    average: DVector<C64>,
    n: usize,
}

impl Iterator for Averages<'_> {
    type Item = (usize, AlgElement);

    fn next(&mut self) -> Option<Self::Item> {
        self.n += 1;
        let step = (&self.power - &self.average) / C64::new(self.n as f64, 0.0);
        self.average += step;
        self.power = &self.op.matrix * &self.power;
        let avg = devectorize(&self.op.algebra, &self.average).expect("algebra shape");
        Some((self.n, avg))
    }
}

pub fn averages<'a>(t: &'a DsOperator, x: &AlgElement) -> Result<Averages<'a>> {
    let v = vectorize(&t.algebra, x)?;
    Ok(Averages {
        op: t,
        average: DVector::zeros(v.len()),
        power: v,
        n: 0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErgodicRecord {
    pub n: usize,
    pub sup_norm: f64,
    pub orlicz_norm: Option<f64>,
    pub dist_to_limit: Option<f64>,
    pub sandwiched_dist: Option<f64>,
    pub one_sided_dist: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub exponent: f64,
    pub intercept: f64,
    pub n_lo: usize,
    pub n_hi: usize,
    pub points: usize,
}

#[derive(Debug, Clone)]
pub struct ErgodicTrace {
    pub records: Vec<ErgodicRecord>,
    pub limit: Option<AlgElement>,
    pub rate_fit: Option<RateFit>,
}

/// Records `‖A_n(x)‖_∞` (and `‖A_n(x)‖_Φ` when `phi` is given) for `n ≤ horizon`.
pub fn ergodic_averages(
    t: &DsOperator,
    x: &AlgElement,
    horizon: usize,
    phi: Option<&OrliczFunction>,
) -> Result<ErgodicTrace> {
    if horizon == 0 {
        return Err(Error::Domain("horizon must be at least 1".into()));
    }
    let mut records = Vec::with_capacity(horizon);
    for (n, avg) in averages(t, x)?.take(horizon) {
        let orlicz_norm = phi
            .map(|p| luxemburg_norm(&t.algebra, &avg, p).map(|r| r.value))
            .transpose()?;
        records.push(ErgodicRecord {
            n,
            sup_norm: avg.uniform_norm(),
            orlicz_norm,
            dist_to_limit: None,
            sandwiched_dist: None,
            one_sided_dist: None,
        });
    }
    Ok(ErgodicTrace {
        records,
        limit: None,
        rate_fit: None,
    })
}

/// Mean-ergodic projection onto `ker(I − T)` along `ran(I − T)`.
#[derive(Debug, Clone)]
pub struct FixedPointLimit {
    pub projector: DMatrix<C64>,
    /// `min |λ − 1|` over eigenvalues of the superoperator not equal to 1.
    pub spectral_gap: f64,
    /// Set when the gap is below [`MIN_SPECTRAL_GAP`]; callers should fall back
    /// to a long Cesàro average.
    pub flagged: bool,
    algebra: TracedAlgebra,
}

impl FixedPointLimit {
    pub fn apply(&self, x: &AlgElement) -> Result<AlgElement> {
        devectorize(&self.algebra, &(&self.projector * vectorize(&self.algebra, x)?))
    }
}

pub fn fixed_point_limit(t: &DsOperator) -> Result<FixedPointLimit> {
    let dim = t.algebra.vector_dimension();
    let gap_matrix = DMatrix::<C64>::identity(dim, dim) - &t.matrix;
    let svd = SVD::new(gap_matrix, true, true);
    let u = svd.u.as_ref().expect("requested U");
    let vt = svd.v_t.as_ref().expect("requested V*");
    let kernel: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] <= FIXED_POINT_TOL)
        .collect();
    let projector = if kernel.is_empty() {
        DMatrix::zeros(dim, dim)
    } else {
        let k = DMatrix::from_columns(&kernel.iter().map(|&i| vt.row(i).adjoint()).collect::<Vec<_>>());
        let l = DMatrix::from_columns(&kernel.iter().map(|&i| u.column(i).into_owned()).collect::<Vec<_>>());
        let gram = l.adjoint() * &k;
        let inv = gram
            .try_inverse()
            .ok_or_else(|| Error::Numerical("eigenvalue 1 is not semisimple".into()))?;
        &k * inv * l.adjoint()
    };
    let one = C64::new(1.0, 0.0);
    let spectral_gap = Schur::new(t.matrix.clone())
        .eigenvalues()
        .map(|ev| {
            ev.iter()
                .map(|&l| (l - one).norm())
                .filter(|&g| g > FIXED_POINT_TOL)
                .fold(f64::INFINITY, f64::min)
        })
        .unwrap_or(0.0);
    Ok(FixedPointLimit {
        projector,
        spectral_gap,
        flagged: spectral_gap < MIN_SPECTRAL_GAP,
        algebra: t.algebra.clone(),
    })
}

/// Least-squares slope of `log env(n)` against `log n` on a log-spaced subset
/// of `[n_lo, n_hi]`, where `env(n) = max_{m ≥ n} dist(m)` is the tail envelope.
/// Envelope values at or below `floor` are treated as exact zeros and skipped.
pub fn fit_decay_exponent(series: &[(usize, f64)], n_lo: usize, n_hi: usize, floor: f64) -> Option<RateFit> {
    let mut envelope = vec![0.0; series.len()];
    let mut running = 0.0f64;
    for (i, &(_, d)) in series.iter().enumerate().rev() {
        running = running.max(d);
        envelope[i] = running;
    }
    let (lo, hi) = ((n_lo.max(1)) as f64, n_hi as f64);
    let targets: Vec<usize> = (0..60)
        .map(|k| (lo * (hi / lo).powf(k as f64 / 59.0)).round() as usize)
        .collect();
    let mut pts: Vec<(f64, f64)> = Vec::new();
    let mut last = 0;
    for target in targets {
        if target == last {
            continue;
        }
        last = target;
        if let Ok(i) = series.binary_search_by_key(&target, |s| s.0) {
            if envelope[i] > floor {
                pts.push(((target as f64).ln(), envelope[i].ln()));
            }
        }
    }
    if pts.len() < 3 {
        return None;
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let exponent = sxy / sxx;
    Some(RateFit {
        exponent,
        intercept: my - exponent * mx,
        n_lo,
        n_hi,
        points: pts.len(),
    })
}

/// Smallest eigenvalue of `S(x²) − S(x)²`; Kadison's inequality says it is `≥ 0`
/// for positive `S` with `S(𝟏) ≤ 𝟏` and self-adjoint `x`.
pub fn kadison_check(s: &DsOperator, x: &AlgElement) -> Result<f64> {
    let a = &s.algebra;
    a.check(x)?;
    if !x.is_self_adjoint(PSD_TOL) {
        return Err(Error::Domain("Kadison's inequality needs a self-adjoint argument".into()));
    }
    let cert = verify_ds_with(s, 0, 0);
    if !cert.complete_positivity.passed || !cert.subunital.passed {
        return Err(Error::Domain("Kadison's inequality needs a positive map with S(1) <= 1".into()));
    }
    let x = x.hermitian_part();
    Ok(kadison_margin(&s.apply(&(&x * &x))?, &s.apply(&x)?))
}

/// `λ_min(S(x²) − S(x)²)` given the two images.
pub(crate) fn kadison_margin(image_of_square: &AlgElement, image: &AlgElement) -> f64 {
    let h = image.hermitian_part();
    (&image_of_square.hermitian_part() - &(&h * &h)).min_eigenvalue()
}
