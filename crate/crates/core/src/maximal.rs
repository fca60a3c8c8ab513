//! Maximal-inequality projection searches and the equicontinuity witnesses
//! built on them.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::algebra::{
    apply_function, kernel_projection, spectral_projection, AlgElement, Interval, Projection, TracedAlgebra, C64,
    PSD_TOL,
};
use crate::check::Check;
use crate::dsops::{
    averages, fit_decay_exponent, fixed_point_limit, kadison_margin, verify_ds, DsOperator, ErgodicRecord,
    ErgodicTrace, RateFit,
};
use crate::error::{Error, Result};
use crate::orlicz::{default_grid, derived_tilde, lemma_constant, luxemburg_norm, two_convex_check, OrliczFunction};
use crate::symfunc::singular_value_function;

/// Slack on the realized sup bound of a witness.
pub const WITNESS_TOL: f64 = 1e-8;
/// Relative slack on the `‖x‖_Φ ≤ γ` precondition, matching the norm solver's bracket width.
const THRESHOLD_SLACK: f64 = 1e-9;
/// Tail of `‖e(A_n − x̂)e‖_∞` over `[N/2, N]` must stay below `TAIL_CONSTANT·‖x‖_∞/(gap·N)`.
pub const TAIL_CONSTANT: f64 = 20.0;

/// Parameters of the bounded-equicontinuity witness.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WitnessParams {
    pub epsilon: f64,
    pub delta: f64,
    pub t: f64,
    pub nu: f64,
    pub gamma: f64,
    pub horizon: usize,
}

impl WitnessParams {
    /// `t = δ'/Φ(δ')` with `δ' = δ/2`, `ν = δ/(2t)`, `γ = min(1, εν)`.
    pub fn new(phi: &OrliczFunction, epsilon: f64, delta: f64, horizon: usize) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(Error::Domain(format!("epsilon must be > 0, got {epsilon}")));
        }
        if !(delta.is_finite() && delta > 0.0) {
            return Err(Error::Domain(format!("delta must be > 0, got {delta}")));
        }
        let t = lemma_constant(phi, delta / 2.0)?;
        let nu = delta / (2.0 * t);
        let gamma = (epsilon * nu).min(1.0);
        Ok(WitnessParams {
            epsilon,
            delta,
            t,
            nu,
            gamma,
            horizon,
        })
    }

    pub fn invariants_hold(&self) -> bool {
        self.nu <= self.delta / (2.0 * self.t) + 1e-12 && self.gamma <= 1.0 && self.gamma / self.nu <= self.epsilon + 1e-12
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct WitnessReport {
    pub epsilon: Option<f64>,
    pub delta: Option<f64>,
    pub t: Option<f64>,
    pub nu: f64,
    pub gamma: Option<f64>,
    pub trace_complement: f64,
    pub sup_bound: f64,
    pub pass: bool,
    pub flags: Vec<String>,
    pub checks: Vec<Check>,
    pub details: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kadison_margins: Option<Vec<f64>>,
    #[serde(skip)]
    pub e: Projection,
}

impl WitnessReport {
    fn finish(mut self) -> Self {
        self.pass = self.checks.iter().all(|c| c.passed);
        self
    }
}

/// `e = 𝟏_{[0,ν]}(x)`, so that `exe ≤ νe` and `τ(e⊥) ≤ τ(x)/ν`.
pub fn chebyshev_projection(a: &TracedAlgebra, x: &AlgElement, nu: f64) -> Result<Projection> {
    require_positive(x)?;
    if !(nu > 0.0) {
        return Err(Error::Domain(format!("level must be > 0, got {nu}")));
    }
    spectral_projection(a, x, Interval::closed(f64::NEG_INFINITY, nu))
}

fn require_positive(x: &AlgElement) -> Result<()> {
    if !x.is_self_adjoint(PSD_TOL) || !x.is_positive() {
        return Err(Error::Domain("element must be positive".into()));
    }
    Ok(())
}

fn require_ds(t: &DsOperator) -> Result<()> {
    if !verify_ds(t).passed() {
        return Err(Error::Domain("operator failed Dunford–Schwartz verification".into()));
    }
    Ok(())
}

/// Orthonormal basis of the range of each block of `e`.
fn range_basis(e: &Projection) -> Vec<DMatrix<C64>> {
    e.as_element()
        .blocks()
        .iter()
        .map(|b| {
            let eig = SymmetricEigen::new(b.clone());
            let cols: Vec<_> = (0..b.nrows())
                .filter(|&i| eig.eigenvalues[i] > 0.5)
                .map(|i| eig.eigenvectors.column(i).into_owned())
                .collect();
            if cols.is_empty() {
                DMatrix::zeros(b.nrows(), 0)
            } else {
                DMatrix::from_columns(&cols)
            }
        })
        .collect()
}

fn projection_from_basis(a: &TracedAlgebra, basis: &[DMatrix<C64>]) -> Projection {
    let blocks = basis.iter().map(|q| q * q.adjoint()).collect();
    Projection::new(a.element(blocks).expect("algebra shape"), 1e-8).expect("orthonormal basis")
}

struct SandwichStats {
    sup: f64,
    min_margin: f64,
}

fn sandwich_stats(t: &DsOperator, x: &AlgElement, e: &Projection, nu: f64, horizon: usize) -> Result<SandwichStats> {
    let mut stats = SandwichStats {
        sup: 0.0,
        min_margin: f64::INFINITY,
    };
    let ne = e.as_element().scale(nu);
    for (_, avg) in averages(t, x)?.take(horizon) {
        let b = e.sandwich(&avg).hermitian_part();
        stats.sup = stats.sup.max(b.uniform_norm());
        stats.min_margin = stats.min_margin.min((&ne - &b).min_eigenvalue());
    }
    Ok(stats)
}

/// Shrinks `e` until every compression `eA_n(x)e` is bounded by `νe`: at each
/// step the current range is replaced by the span of the compressed
/// eigenvectors with eigenvalue `≤ ν`. Compressing further never undoes an
/// earlier bound.
fn compress_below(t: &DsOperator, x: &AlgElement, start: &Projection, nu: f64, horizon: usize) -> Result<Projection> {
    let a = t.algebra();
    let mut basis = range_basis(start);
    for (_, avg) in averages(t, x)?.take(horizon) {
        for (q, blk) in basis.iter_mut().zip(avg.blocks()) {
            if q.ncols() == 0 {
                continue;
            }
            let c = q.adjoint() * blk * &*q;
            let eig = SymmetricEigen::new((&c + c.adjoint()).scale(0.5));
            let keep: Vec<_> = (0..c.nrows())
                .filter(|&i| eig.eigenvalues[i] <= nu)
                .map(|i| eig.eigenvectors.column(i).into_owned())
                .collect();
            *q = if keep.is_empty() {
                DMatrix::zeros(q.nrows(), 0)
            } else {
                &*q * DMatrix::from_columns(&keep)
            };
        }
    }
    Ok(projection_from_basis(a, &basis))
}

/// Meet of the level projections `𝟏_{[0,ν]}(A_n(x))` over `n ≤ N`.
///
/// `sup_n ‖eA_n(x)e‖_∞ ≤ ν` is asserted on every run. `τ(e⊥) ≤ ‖x‖_1/ν` is
/// asserted only on commutative algebras; otherwise it is reported.
pub fn yeadon_search(t: &DsOperator, x: &AlgElement, nu: f64, horizon: usize) -> Result<WitnessReport> {
    let a = t.algebra();
    a.check(x)?;
    require_positive(x)?;
    require_ds(t)?;
    if !(nu.is_finite() && nu > 0.0) {
        return Err(Error::Domain(format!("level must be > 0, got {nu}")));
    }
    if horizon == 0 {
        return Err(Error::Domain("horizon must be at least 1".into()));
    }
    let x = x.hermitian_part();

    let mut complement_sum = a.zero();
    for (_, avg) in averages(t, &x)?.take(horizon) {
        let p = spectral_projection(a, &avg.hermitian_part(), Interval::closed(f64::NEG_INFINITY, nu))?;
        complement_sum = &complement_sum + p.complement().as_element();
    }
    let mut e = kernel_projection(a, &complement_sum);
    let mut stats = sandwich_stats(t, &x, &e, nu, horizon)?;
    let psd_tol = PSD_TOL * nu.max(1.0);
    let mut flags = Vec::new();
    if stats.min_margin < -psd_tol {
        e = compress_below(t, &x, &e, nu, horizon)?;
        stats = sandwich_stats(t, &x, &e, nu, horizon)?;
        flags.push("meet_refined".to_string());
    }

    let trace_complement = e.trace_complement(a)?;
    let l1 = a.trace_re(&x)?;
    let bound = l1 / nu;
    let mut checks = vec![
        Check::at_most("sup_bound", stats.sup, nu + PSD_TOL),
        Check::at_least("sandwich_psd", stats.min_margin, -psd_tol),
    ];
    if a.is_commutative() {
        checks.push(Check::at_most("trace_bound", trace_complement, bound + PSD_TOL));
    } else {
        flags.push("trace_bound_reported".to_string());
    }
    let mut details = BTreeMap::new();
    details.insert("trace_bound".to_string(), bound);
    details.insert("l1_norm".to_string(), l1);
    details.insert("min_psd_margin".to_string(), stats.min_margin);
    if l1 > 0.0 {
        details.insert("trace_ratio".to_string(), trace_complement * nu / l1);
    }
    Ok(WitnessReport {
        epsilon: None,
        delta: None,
        t: None,
        nu,
        gamma: None,
        trace_complement,
        sup_bound: stats.sup,
        pass: false,
        flags,
        checks,
        details,
        kadison_margins: None,
        e,
    }
    .finish())
}

/// Witness for bounded equicontinuity in measure at `0`: for `‖x‖_Φ ≤ γ`,
/// splits `x ≤ x_δ + t·Φ(x)` with `x_δ = x·𝟏_{[0,δ/2]}(x)` and runs the
/// maximal search on `Φ(x)` at level `ν`.
pub fn buem_witness(
    t: &DsOperator,
    phi: &OrliczFunction,
    epsilon: f64,
    delta: f64,
    x: &AlgElement,
    horizon: usize,
) -> Result<WitnessReport> {
    let a = t.algebra();
    a.check(x)?;
    require_positive(x)?;
    let params = WitnessParams::new(phi, epsilon, delta, horizon)?;
    let norm = luxemburg_norm(a, x, phi)?.value;
    if norm > params.gamma * (1.0 + THRESHOLD_SLACK) {
        return Err(Error::Domain(format!(
            "‖x‖_Φ = {norm} exceeds the witness threshold γ = {}",
            params.gamma
        )));
    }
    let mut report = buem_unchecked(t, phi, &params, &x.hermitian_part())?;
    report.details.insert("orlicz_norm".to_string(), norm);
    Ok(report)
}

fn buem_unchecked(t: &DsOperator, phi: &OrliczFunction, params: &WitnessParams, x: &AlgElement) -> Result<WitnessReport> {
    let a = t.algebra();
    let cut = params.delta / 2.0;
    let x_delta = apply_function(a, |u| if u <= cut { u } else { 0.0 }, x)?;
    let phi_x = apply_function(a, |u| phi.eval(u), x)?;
    let inner = yeadon_search(t, &phi_x, params.nu, params.horizon)?;
    let e = inner.e.clone();

    let (mut sup_x, mut sup_cut, mut sup_phi) = (0.0f64, 0.0f64, 0.0f64);
    let zipped = averages(t, x)?.zip(averages(t, &x_delta)?).zip(averages(t, &phi_x)?);
    for (((_, ax), (_, ad)), (_, ap)) in zipped.take(params.horizon) {
        sup_x = sup_x.max(e.sandwich(&ax).uniform_norm());
        sup_cut = sup_cut.max(e.sandwich(&ad).uniform_norm());
        sup_phi = sup_phi.max(e.sandwich(&ap).uniform_norm());
    }
    let chain = sup_cut + params.t * sup_phi;
    let trace_complement = e.trace_complement(a)?;

    let mut checks = vec![
        Check::at_most("split_bound", sup_x, chain + WITNESS_TOL),
        Check::at_most("truncated_part", sup_cut, cut + WITNESS_TOL),
        Check::at_most("chain_bound", cut + params.t * params.nu, params.delta + 1e-12),
        Check::at_most("sup_bound", sup_x, params.delta + WITNESS_TOL),
    ];
    checks.extend(inner.checks.iter().map(|c| Check {
        name: format!("maximal.{}", c.name),
        ..c.clone()
    }));
    let mut flags = inner.flags.clone();
    if a.is_commutative() {
        checks.push(Check::at_most("trace_budget", trace_complement, params.epsilon + PSD_TOL));
    } else {
        flags.push("trace_budget_reported".to_string());
    }
    let mut details = BTreeMap::new();
    details.insert("sup_truncated".to_string(), sup_cut);
    details.insert("sup_phi".to_string(), sup_phi);
    details.insert("chain".to_string(), chain);
    details.insert("truncated_norm".to_string(), x_delta.uniform_norm());
    details.insert("phi_trace".to_string(), a.trace_re(&phi_x)?);
    Ok(WitnessReport {
        epsilon: Some(params.epsilon),
        delta: Some(params.delta),
        t: Some(params.t),
        nu: params.nu,
        gamma: Some(params.gamma),
        trace_complement,
        sup_bound: sup_x,
        pass: false,
        flags,
        checks,
        details,
        kadison_margins: None,
        e,
    }
    .finish())
}

/// One-sided witness for 2-convex `Φ`: the bounded witness for
/// `(Φ̃, ε, δ², x²)` gives `e`, and Kadison's inequality for `A_n` turns
/// `sup‖eA_n(x²)e‖ ≤ δ²` into `sup‖A_n(x)e‖ ≤ δ`.
pub fn uem_witness(
    t: &DsOperator,
    phi: &OrliczFunction,
    epsilon: f64,
    delta: f64,
    x: &AlgElement,
    horizon: usize,
) -> Result<WitnessReport> {
    let a = t.algebra();
    a.check(x)?;
    require_positive(x)?;
    if !two_convex_check(phi, &default_grid()) {
        return Err(Error::Domain(format!("{} is not 2-convex", phi.label())));
    }
    let tilde = derived_tilde(phi)?;
    let params = WitnessParams::new(&tilde, epsilon, delta * delta, horizon)?;
    let x = x.hermitian_part();
    let norm = luxemburg_norm(a, &x, phi)?.value;
    if norm > params.gamma.sqrt() * (1.0 + THRESHOLD_SLACK) {
        return Err(Error::Domain(format!(
            "‖x‖_Φ = {norm} exceeds the witness threshold √γ = {}",
            params.gamma.sqrt()
        )));
    }
    let square = (&x * &x).hermitian_part();
    let square_norm = luxemburg_norm(a, &square, &tilde)?.value;
    let p5_gap = (square_norm - norm * norm).abs();

    let inner = buem_unchecked(t, &tilde, &params, &square)?;
    let e = inner.e.clone();
    let mut one_sided = 0.0f64;
    let mut margins = Vec::with_capacity(horizon);
    let mut sandwiched_margin = f64::INFINITY;
    for ((_, ax), (_, ax2)) in averages(t, &x)?.zip(averages(t, &square)?).take(horizon) {
        one_sided = one_sided.max((&ax * e.as_element()).uniform_norm());
        margins.push(kadison_margin(&ax2, &ax));
        let h = ax.hermitian_part();
        let diff = &e.sandwich(&ax2) - &e.sandwich(&(&h * &h));
        sandwiched_margin = sandwiched_margin.min(diff.hermitian_part().min_eigenvalue());
    }
    let min_margin = margins.iter().cloned().fold(f64::INFINITY, f64::min);
    let kadison_tol = PSD_TOL * x.uniform_norm().powi(2).max(1.0);

    let mut checks = vec![
        Check::at_most("one_sided_bound", one_sided, delta + WITNESS_TOL),
        Check::at_least("kadison_margin", min_margin, -kadison_tol),
        Check::at_least("kadison_sandwiched", sandwiched_margin, -kadison_tol),
        Check::at_most("square_norm_identity", p5_gap, 1e-8 * norm.powi(2).max(1.0)),
    ];
    checks.extend(inner.checks.iter().map(|c| Check {
        name: format!("squared.{}", c.name),
        ..c.clone()
    }));
    let mut details = inner.details.clone();
    details.insert("orlicz_norm".to_string(), norm);
    details.insert("square_tilde_norm".to_string(), square_norm);
    details.insert("squared_sup_bound".to_string(), inner.sup_bound);
    details.insert("min_kadison_margin".to_string(), min_margin);
    Ok(WitnessReport {
        epsilon: Some(epsilon),
        delta: Some(delta),
        t: Some(params.t),
        nu: params.nu,
        gamma: Some(params.gamma),
        trace_complement: inner.trace_complement,
        sup_bound: one_sided,
        pass: false,
        flags: inner.flags,
        checks,
        details,
        kadison_margins: Some(margins),
        e,
    }
    .finish())
}

/// Outcome of the `V(ε,δ)` membership test.
#[derive(Debug, Clone)]
pub struct NbhdMembership {
    pub member: bool,
    /// `μ_ε(x)`, right-continuous.
    pub mu: f64,
    /// `e = 𝟏_{[0,μ_ε]}(|x|)` when `member`.
    pub witness: Option<Projection>,
    /// `‖exe‖_∞ ≤ δ` for the same `e`, the two-sided `W(ε,δ)` condition.
    pub two_sided: bool,
}

/// `x ∈ V(ε,δ)` iff `μ_ε(x) ≤ δ`.
pub fn measure_nbhd_member(a: &TracedAlgebra, x: &AlgElement, epsilon: f64, delta: f64) -> Result<NbhdMembership> {
    if !(epsilon > 0.0 && delta > 0.0) {
        return Err(Error::Domain(format!("need ε, δ > 0, got ({epsilon}, {delta})")));
    }
    let mu = singular_value_function(a, x)?.eval(epsilon);
    if mu > delta {
        return Ok(NbhdMembership {
            member: false,
            mu,
            witness: None,
            two_sided: false,
        });
    }
    let e = spectral_projection(a, &x.abs(), Interval::closed(f64::NEG_INFINITY, mu))?;
    let slack = 1e-12 * x.uniform_norm().max(1.0);
    let verified = e.trace_complement(a)? <= epsilon + 1e-12 * a.total_trace()
        && (x * e.as_element()).uniform_norm() <= delta + slack;
    if !verified {
        return Err(Error::Consistency(format!("spectral witness at level {mu} failed recomputation")));
    }
    let two_sided = e.sandwich(x).uniform_norm() <= delta + slack;
    Ok(NbhdMembership {
        member: true,
        mu,
        witness: Some(e),
        two_sided,
    })
}

/// `(n, ‖x − x e_n‖_Φ)` with `e_n = 𝟏_{(1/n, n)}(x)`.
pub fn truncation_sequence(
    a: &TracedAlgebra,
    x: &AlgElement,
    phi: &OrliczFunction,
    n_list: &[usize],
) -> Result<Vec<(usize, f64)>> {
    a.check(x)?;
    require_positive(x)?;
    let x = x.hermitian_part();
    n_list
        .iter()
        .map(|&n| {
            if n == 0 {
                return Err(Error::Domain("truncation index must be >= 1".into()));
            }
            let nf = n as f64;
            let e = spectral_projection(a, &x, Interval::open(1.0 / nf, nf))?;
            let rest = &x - &(&x * e.as_element());
            Ok((n, luxemburg_norm(a, &rest, phi)?.value))
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    /// Per-`n` records with every distance column filled.
    pub trace: ErgodicTrace,
    pub limit: AlgElement,
    pub e: Projection,
    pub trace_complement: f64,
    pub spectral_gap: f64,
    /// `max_{N/2 ≤ n ≤ N} ‖e(A_n − x̂)e‖_∞`.
    pub sandwiched_tail: f64,
    /// `max_{N/2 ≤ n ≤ N} ‖(A_n − x̂)e‖_∞`.
    pub one_sided_tail: f64,
    /// Threshold used for the tail checks; `None` when no spectral gap is available.
    pub tail_threshold: Option<f64>,
    pub two_convex: bool,
    pub checks: Vec<Check>,
    pub flags: Vec<String>,
}

impl ConvergenceReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn rate_fit(&self) -> Option<&RateFit> {
        self.trace.rate_fit.as_ref()
    }
}

/// Runs `A_n(x)` to the horizon, compares it with the mean-ergodic limit
/// `x̂`, and searches the spectral projections of `|A_N − x̂|` with
/// `τ(e⊥) ≤ ε` for the one minimizing the sandwiched tail.
pub fn convergence_report(
    t: &DsOperator,
    x: &AlgElement,
    phi: &OrliczFunction,
    epsilon: f64,
    horizon: usize,
) -> Result<ConvergenceReport> {
    let a = t.algebra();
    a.check(x)?;
    require_ds(t)?;
    if horizon < 2 {
        return Err(Error::Domain("horizon must be at least 2".into()));
    }
    if !(epsilon >= 0.0) {
        return Err(Error::Domain(format!("epsilon must be >= 0, got {epsilon}")));
    }
    let limit_op = fixed_point_limit(t)?;
    let mut flags = Vec::new();
    let (limit, last) = {
        let mut last = a.zero();
        for (_, avg) in averages(t, x)?.take(horizon) {
            last = avg;
        }
        if limit_op.flagged {
            flags.push("cesaro_fallback".to_string());
            (last.clone(), last)
        } else {
            (limit_op.apply(x)?, last)
        }
    };

    let mut candidates = vec![Projection::identity(a)];
    let diff = (&last - &limit).abs();
    let sd = a.spectral_decompose(&diff)?;
    let mut removed = 0.0;
    for k in (1..sd.eigenvalues.len()).rev() {
        removed += sd.traces[k];
        if removed > epsilon {
            break;
        }
        let level = sd.eigenvalues[k - 1];
        let member = measure_nbhd_member(a, &diff, removed.max(f64::MIN_POSITIVE), level.max(f64::MIN_POSITIVE))?;
        if let Some(e) = member.witness {
            candidates.push(e);
        }
    }

    let tail_start = horizon / 2;
    let mut records: Vec<ErgodicRecord> = Vec::with_capacity(horizon);
    let mut sandwiched: Vec<Vec<f64>> = vec![Vec::with_capacity(horizon); candidates.len()];
    let mut one_sided: Vec<Vec<f64>> = vec![Vec::with_capacity(horizon); candidates.len()];
    for (n, avg) in averages(t, x)?.take(horizon) {
        let d = &avg - &limit;
        for (i, e) in candidates.iter().enumerate() {
            sandwiched[i].push(e.sandwich(&d).uniform_norm());
            one_sided[i].push((&d * e.as_element()).uniform_norm());
        }
        records.push(ErgodicRecord {
            n,
            sup_norm: avg.uniform_norm(),
            orlicz_norm: Some(luxemburg_norm(a, &avg, phi)?.value),
            dist_to_limit: Some(d.uniform_norm()),
            sandwiched_dist: None,
            one_sided_dist: None,
        });
    }
    let tail = |series: &[f64]| series[tail_start.max(1) - 1..].iter().cloned().fold(0.0, f64::max);
    let best = (0..candidates.len())
        .min_by(|&i, &j| tail(&sandwiched[i]).total_cmp(&tail(&sandwiched[j])))
        .expect("identity is a candidate");
    for (r, (s, o)) in records.iter_mut().zip(sandwiched[best].iter().zip(&one_sided[best])) {
        r.sandwiched_dist = Some(*s);
        r.one_sided_dist = Some(*o);
    }
    let e = candidates.swap_remove(best);
    let sandwiched_tail = tail(&sandwiched[best]);
    let one_sided_tail = tail(&one_sided[best]);

    let scale = x.uniform_norm();
    let series: Vec<(usize, f64)> = records.iter().map(|r| (r.n, r.dist_to_limit.unwrap_or(0.0))).collect();
    let n_lo = if horizon >= 1000 { 100 } else { (horizon / 10).max(1) };
    let rate_fit = if limit_op.flagged {
        None
    } else {
        fit_decay_exponent(&series, n_lo, horizon, 1e-13 * scale.max(f64::MIN_POSITIVE))
    };

    let x_norm = luxemburg_norm(a, x, phi)?.value;
    let limit_norm = luxemburg_norm(a, &limit, phi)?.value;
    let mut checks = vec![Check::at_most(
        "limit_norm",
        limit_norm,
        x_norm + 1e-8 * x_norm.max(1.0),
    )];
    let two_convex = two_convex_check(phi, &default_grid());
    let tail_threshold = (!limit_op.flagged)
        .then(|| TAIL_CONSTANT * scale * (1.0 / limit_op.spectral_gap).max(1.0) / horizon as f64);
    match tail_threshold {
        Some(th) => {
            checks.push(Check::at_most("bau_tail", sandwiched_tail, th));
            if two_convex {
                checks.push(Check::at_most("au_tail", one_sided_tail, th));
            }
        }
        None => flags.push("tail_not_asserted".to_string()),
    }
    let trace_complement = e.trace_complement(a)?;
    Ok(ConvergenceReport {
        trace: ErgodicTrace {
            records,
            limit: Some(limit.clone()),
            rate_fit,
        },
        limit,
        e,
        trace_complement,
        spectral_gap: limit_op.spectral_gap,
        sandwiched_tail,
        one_sided_tail,
        tail_threshold,
        two_convex,
        checks,
        flags,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::ElementKind;
    use approx::assert_abs_diff_eq;
    use nalgebra::DVector;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn shift(d: usize) -> (TracedAlgebra, DsOperator) {
        let a = TracedAlgebra::diagonal(&vec![1.0; d]).unwrap();
        let s = DMatrix::from_fn(d, d, |i, j| if j == (i + d - 1) % d { 1.0 } else { 0.0 });
        let t = DsOperator::from_substochastic(&a, &s).unwrap();
        (a, t)
    }

    fn phase_unitary(a: &TracedAlgebra, phases: &[C64]) -> AlgElement {
        let d = a.dims()[0];
        a.element(vec![DMatrix::from_diagonal(&DVector::from_row_slice(&phases[..d]))]).unwrap()
    }

    #[test]
    fn witness_params_worked_example() {
        let p = WitnessParams::new(&OrliczFunction::power(2.0).unwrap(), 0.5, 1.0, 10).unwrap();
        assert_abs_diff_eq!(p.t, 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.nu, 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(p.gamma, 0.125, epsilon = 1e-15);
        assert!(p.invariants_hold());
        assert!(WitnessParams::new(&OrliczFunction::power(2.0).unwrap(), 0.0, 1.0, 10).is_err());
    }

    #[test]
    fn chebyshev_examples() {
        let a = TracedAlgebra::diagonal(&[1.0, 1.0]).unwrap();
        let x = a.from_diagonal(&[0.1, 5.0]).unwrap();
        let e = chebyshev_projection(&a, &x, 1.0).unwrap();
        assert_eq!(e.as_element(), &a.from_diagonal(&[1.0, 0.0]).unwrap());
        assert_abs_diff_eq!(e.trace_complement(&a).unwrap(), 1.0, epsilon = 1e-15);
        let e = chebyshev_projection(&a, &x, 6.0).unwrap();
        assert_eq!(e.trace_complement(&a).unwrap(), 0.0);

        let b = TracedAlgebra::new(&[(3, 0.5), (2, 2.0)]).unwrap();
        for seed in 0..10 {
            let x = b.random_element(ElementKind::Positive, seed);
            let nu = 0.3 * x.uniform_norm();
            let e = chebyshev_projection(&b, &x, nu).unwrap();
            assert!(e.trace_complement(&b).unwrap() <= b.trace_re(&x).unwrap() / nu + 1e-12);
            assert!((&e.as_element().scale(nu) - &e.sandwich(&x)).min_eigenvalue() >= -1e-12);
        }
    }

    #[test]
    fn yeadon_shift_example() {
        let (a, t) = shift(4);
        let x = a.from_diagonal(&[1.0, 0.0, 0.0, 0.0]).unwrap();
        let r = yeadon_search(&t, &x, 0.3, 64).unwrap();
        assert!(r.pass);
        assert_eq!(r.e.as_element(), &a.from_diagonal(&[0.0, 0.0, 0.0, 1.0]).unwrap());
        assert_abs_diff_eq!(r.trace_complement, 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.details["trace_bound"], 1.0 / 0.3, epsilon = 1e-12);
        assert_abs_diff_eq!(r.sup_bound, 0.25, epsilon = 1e-12);
    }

    #[test]
    fn yeadon_identity_small_x() {
        let a = TracedAlgebra::new(&[(2, 1.0), (1, 3.0)]).unwrap();
        let x = a.random_element(ElementKind::Positive, 1);
        let nu = x.uniform_norm() * 1.01;
        let r = yeadon_search(&DsOperator::identity(&a), &x, nu, 5).unwrap();
        assert!(r.pass);
        assert_eq!(r.trace_complement, 0.0);
        assert!(matches!(
            yeadon_search(&DsOperator::identity(&a), &a.identity().scale(-1.0), 1.0, 5),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn yeadon_noncommutative_sup_guarantee() {
        let a = TracedAlgebra::new(&[(3, 1.0), (2, 0.5)]).unwrap();
        let corr = DMatrix::from_row_slice(3, 3, &[c(1.0), c(0.4), c(0.1), c(0.4), c(1.0), c(0.3), c(0.1), c(0.3), c(1.0)]);
        let s = DsOperator::from_schur_correlation(&a, &corr, 0).unwrap();
        let u = DsOperator::from_unitary_conjugation(&a, &a.random_unitary(2)).unwrap();
        let t = crate::dsops::compose(&u, &s).unwrap();
        for seed in 0..5 {
            let x = a.random_element(ElementKind::Positive, seed);
            let r = yeadon_search(&t, &x, 0.5 * x.uniform_norm(), 40).unwrap();
            assert!(r.pass, "{:?}", r.checks);
            assert!(r.flags.contains(&"trace_bound_reported".to_string()));
            assert!(r.details.contains_key("trace_ratio"));
        }
    }

    #[test]
    fn compression_refinement_bounds_every_average() {
        let a = TracedAlgebra::new(&[(3, 1.0)]).unwrap();
        let t = DsOperator::from_unitary_conjugation(&a, &a.random_unitary(5)).unwrap();
        let x = a.random_element(ElementKind::Positive, 3);
        let nu = 0.6 * x.uniform_norm();
        let e = compress_below(&t, &x, &Projection::identity(&a), nu, 30).unwrap();
        let stats = sandwich_stats(&t, &x, &e, nu, 30).unwrap();
        assert!(stats.min_margin >= -1e-12);
    }

    #[test]
    fn buem_zero_and_commutative_runs() {
        let (a, t) = shift(5);
        let phi = OrliczFunction::power(2.0).unwrap();
        let r = buem_witness(&t, &phi, 0.5, 1.0, &a.zero(), 20).unwrap();
        assert!(r.pass);
        assert_eq!(r.trace_complement, 0.0);
        assert_eq!(r.sup_bound, 0.0);

        let x = a.from_diagonal(&[0.1, 0.0, 0.02, 0.0, 0.05]).unwrap();
        let r = buem_witness(&t, &phi, 0.5, 1.0, &x, 50).unwrap();
        assert!(r.pass, "{:?}", r.checks);
        assert!(r.sup_bound <= 1.0 + 1e-8);
        assert!(r.trace_complement <= 0.5);

        let big = a.from_diagonal(&[1.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        assert!(matches!(buem_witness(&t, &phi, 0.5, 1.0, &big, 5), Err(Error::Domain(_))));
    }

    #[test]
    fn uem_one_sided_bound() {
        let a = TracedAlgebra::new(&[(2, 1.0), (1, 0.5)]).unwrap();
        let phi = OrliczFunction::power(2.0).unwrap();
        let t = DsOperator::from_unitary_conjugation(&a, &a.random_unitary(7)).unwrap();
        let x = a.random_element(ElementKind::Positive, 4);
        let params = WitnessParams::new(&derived_tilde(&phi).unwrap(), 0.5, 1.0, 30).unwrap();
        let norm = luxemburg_norm(&a, &x, &phi).unwrap().value;
        let x = x.scale(0.9 * params.gamma.sqrt() / norm);
        let r = uem_witness(&t, &phi, 0.5, 1.0, &x, 30).unwrap();
        assert!(r.pass, "{:?}", r.checks);
        assert_eq!(r.kadison_margins.as_ref().unwrap().len(), 30);

        let z = uem_witness(&t, &phi, 0.5, 1.0, &a.zero(), 10).unwrap();
        assert!(z.pass);
        assert_eq!(z.trace_complement, 0.0);

        let linear = OrliczFunction::power(1.0).unwrap();
        assert!(matches!(uem_witness(&t, &linear, 0.5, 1.0, &x, 10), Err(Error::Domain(_))));
    }

    #[test]
    fn membership_examples() {
        let a = TracedAlgebra::diagonal(&[1.0, 1.0]).unwrap();
        let x = a.from_diagonal(&[3.0, 1.0]).unwrap();
        let m = measure_nbhd_member(&a, &x, 1.0, 1.0).unwrap();
        assert!(m.member && m.two_sided);
        assert_eq!(m.witness.unwrap().as_element(), &a.from_diagonal(&[0.0, 1.0]).unwrap());
        assert!(!measure_nbhd_member(&a, &x, 0.5, 1.0).unwrap().member);
        let all = measure_nbhd_member(&a, &x, 2.0, 1e-6).unwrap();
        assert!(all.member);
        assert_eq!(all.mu, 0.0);
    }

    #[test]
    fn truncation_examples() {
        let a = TracedAlgebra::diagonal(&[1.0, 1.0, 1.0]).unwrap();
        let x = a.from_diagonal(&[0.05, 2.0, 100.0]).unwrap();
        let e = spectral_projection(&a, &x, Interval::open(0.1, 10.0)).unwrap();
        assert_eq!(&x * e.as_element(), a.from_diagonal(&[0.0, 2.0, 0.0]).unwrap());
        let phi = OrliczFunction::power(2.0).unwrap();
        let seq = truncation_sequence(&a, &x, &phi, &[1, 10, 21, 101]).unwrap();
        assert!(seq.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-12));
        assert_eq!(seq[3].1, 0.0);
        assert_abs_diff_eq!(seq[1].1, (0.05f64.powi(2) + 1e4).sqrt(), epsilon = 1e-7);
    }

    #[test]
    fn convergence_identity() {
        let a = TracedAlgebra::new(&[(2, 1.0)]).unwrap();
        let x = a.random_element(ElementKind::General, 1);
        let phi = OrliczFunction::power(2.0).unwrap();
        let r = convergence_report(&DsOperator::identity(&a), &x, &phi, 0.5, 50).unwrap();
        assert!(r.passed());
        assert!(r.trace.records.iter().all(|rec| rec.dist_to_limit.unwrap() < 1e-14));
    }

    #[test]
    fn convergence_phase_rotation() {
        let a = TracedAlgebra::new(&[(2, 1.0)]).unwrap();
        let u = phase_unitary(&a, &[c(1.0), C64::new(0.0, 1.0)]);
        let t = DsOperator::from_unitary_conjugation(&a, &u).unwrap();
        let x = a.element_from_real(&[vec![vec![1.0, 1.0], vec![1.0, 1.0]]]).unwrap();
        let phi = OrliczFunction::power(2.0).unwrap();
        let r = convergence_report(&t, &x, &phi, 0.5, 2000).unwrap();
        assert!(r.passed(), "{:?}", r.checks);
        assert!((&r.limit - &a.identity()).uniform_norm() < 1e-12);
        let fit = r.rate_fit().unwrap();
        assert!((fit.exponent + 1.0).abs() <= 0.1, "exponent {}", fit.exponent);
    }

    #[test]
    fn convergence_averaging_operator() {
        let d = 4;
        let a = TracedAlgebra::diagonal(&vec![1.0; d]).unwrap();
        let s = DMatrix::from_element(d, d, 1.0 / d as f64);
        let t = DsOperator::from_substochastic(&a, &s).unwrap();
        let x = a.from_diagonal(&[4.0, 0.0, 1.0, 3.0]).unwrap();
        let phi = OrliczFunction::power(2.0).unwrap();
        let r = convergence_report(&t, &x, &phi, 0.5, 100).unwrap();
        assert!(r.passed());
        assert!((&r.limit - &a.identity().scale(2.0)).uniform_norm() < 1e-12);
        for rec in &r.trace.records {
            let expected = (&x - &a.identity().scale(2.0)).uniform_norm() / rec.n as f64;
            assert_abs_diff_eq!(rec.dist_to_limit.unwrap(), expected, epsilon = 1e-12);
        }
    }
}
