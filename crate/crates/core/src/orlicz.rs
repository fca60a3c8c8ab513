//! Orlicz functions, growth certificates and Luxemburg norms.
//!
//! Norms are computed two ways: through the functional calculus of `|x|` in the
//! matrix algebra, and through the singular-value function on `(0, ∞)`. Both
//! solve `τ(Φ(|x|/a)) = 1` for `a` by bisection on the nonincreasing modular.

use std::f64::consts::E;

use serde::{Deserialize, Serialize};

use crate::algebra::{apply_function, AlgElement, TracedAlgebra};
use crate::error::{Error, Result};
use crate::symfunc::StepFunction;

const MAX_BISECTION: usize = 200;
const NORM_REL_WIDTH: f64 = 1e-10;
const GRID_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OrliczKind {
    /// `u^p`.
    Power { p: f64 },
    /// `u^p / p`.
    PowerOverP { p: f64 },
    /// `u · ln^α(e + u)`.
    LogPower { alpha: f64 },
    /// Convex piecewise-linear interpolation of `(u, Φ(u))` knots starting at
    /// the origin, continued with the last slope.
    Piecewise { knots: Vec<[f64; 2]> },
    /// `u ↦ base(√u)`.
    SqrtComposed { base: Box<OrliczFunction> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "OrliczKind", into = "OrliczKind")]
pub struct OrliczFunction {
    kind: OrliczKind,
}

impl TryFrom<OrliczKind> for OrliczFunction {
    type Error = Error;
    fn try_from(kind: OrliczKind) -> Result<Self> {
        OrliczFunction::new(kind)
    }
}

impl From<OrliczFunction> for OrliczKind {
    fn from(f: OrliczFunction) -> Self {
        f.kind
    }
}

impl OrliczFunction {
    pub fn new(kind: OrliczKind) -> Result<Self> {
        match &kind {
            OrliczKind::Power { p } | OrliczKind::PowerOverP { p } => {
                if !(p.is_finite() && *p >= 1.0) {
                    return Err(Error::Domain(format!("power Orlicz function needs p >= 1, got {p}")));
                }
            }
            OrliczKind::LogPower { alpha } => {
                if !(alpha.is_finite() && *alpha >= 0.0) {
                    return Err(Error::Domain(format!("log_power needs alpha >= 0, got {alpha}")));
                }
            }
            OrliczKind::Piecewise { knots } => validate_knots(knots)?,
            OrliczKind::SqrtComposed { .. } => {}
        }
        Ok(OrliczFunction { kind })
    }

    pub fn power(p: f64) -> Result<Self> {
        Self::new(OrliczKind::Power { p })
    }

    pub fn power_over_p(p: f64) -> Result<Self> {
        Self::new(OrliczKind::PowerOverP { p })
    }

    pub fn log_power(alpha: f64) -> Result<Self> {
        Self::new(OrliczKind::LogPower { alpha })
    }

    pub fn piecewise(knots: Vec<[f64; 2]>) -> Result<Self> {
        Self::new(OrliczKind::Piecewise { knots })
    }

    pub fn kind(&self) -> &OrliczKind {
        &self.kind
    }

    pub fn label(&self) -> String {
        match &self.kind {
            OrliczKind::Power { p } => format!("u^{p}"),
            OrliczKind::PowerOverP { p } => format!("u^{p}/{p}"),
            OrliczKind::LogPower { alpha } => format!("u*ln^{alpha}(e+u)"),
            OrliczKind::Piecewise { knots } => format!("piecewise[{} knots]", knots.len()),
            OrliczKind::SqrtComposed { base } => format!("({})(sqrt u)", base.label()),
        }
    }

    pub fn eval(&self, u: f64) -> f64 {
        let u = u.max(0.0);
        match &self.kind {
            OrliczKind::Power { p } => u.powf(*p),
            OrliczKind::PowerOverP { p } => u.powf(*p) / p,
            OrliczKind::LogPower { alpha } => u * (E + u).ln().powf(*alpha),
            OrliczKind::Piecewise { knots } => {
                let i = knots.partition_point(|k| k[0] <= u).clamp(1, knots.len() - 1);
                let (a, b) = (knots[i - 1], knots[i]);
                a[1] + (b[1] - a[1]) / (b[0] - a[0]) * (u - a[0])
            }
            OrliczKind::SqrtComposed { base } => base.eval(u.sqrt()),
        }
    }

    /// `Φ⁻¹(v)`, closed form where available, otherwise bisection on the
    /// increasing evaluator.
    pub fn inverse(&self, v: f64) -> f64 {
        if v <= 0.0 {
            return 0.0;
        }
        match &self.kind {
            OrliczKind::Power { p } => v.powf(1.0 / p),
            OrliczKind::PowerOverP { p } => (p * v).powf(1.0 / p),
            OrliczKind::LogPower { alpha } if *alpha == 0.0 => v,
            OrliczKind::LogPower { .. } => self.inverse_by_bisection(v),
            OrliczKind::Piecewise { knots } => {
                let i = knots.partition_point(|k| k[1] <= v).clamp(1, knots.len() - 1);
                let (a, b) = (knots[i - 1], knots[i]);
                a[0] + (b[0] - a[0]) / (b[1] - a[1]) * (v - a[1])
            }
            OrliczKind::SqrtComposed { base } => base.inverse(v).powi(2),
        }
    }

    fn inverse_by_bisection(&self, v: f64) -> f64 {
        let mut hi = v.max(1.0);
        let mut doublings = 0;
        while self.eval(hi) < v {
            hi *= 2.0;
            doublings += 1;
            if doublings > 2000 || !hi.is_finite() {
                return f64::NAN;
            }
        }
        let mut lo = 0.0;
        for _ in 0..MAX_BISECTION {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.eval(mid) < v {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Sampled checks of the defining properties: `Φ(0) = 0`, strict increase,
    /// midpoint convexity and inverse round trip.
    pub fn sampled_invariants(&self, grid: &[f64]) -> OrliczInvariants {
        let mut sorted: Vec<f64> = grid.iter().cloned().filter(|u| *u >= 0.0).collect();
        sorted.sort_by(f64::total_cmp);
        let values: Vec<f64> = sorted.iter().map(|&u| self.eval(u)).collect();
        let strictly_increasing = sorted
            .windows(2)
            .zip(values.windows(2))
            .all(|(u, v)| u[1] == u[0] || v[1] > v[0]);
        let inverse_error = sorted
            .iter()
            .zip(&values)
            .map(|(&u, &v)| (self.inverse(v) - u).abs() / u.max(1.0))
            .fold(0.0, f64::max);
        OrliczInvariants {
            zero_at_origin: self.eval(0.0) == 0.0,
            strictly_increasing,
            convex: midpoint_convex(|u| self.eval(u), &sorted),
            inverse_error,
        }
    }

    /// `k̂` constants for δ₂ on `[lo, u0]` and Δ₂ on `[u0, hi]`.
    pub fn growth_certificate(&self, lo: f64, u0: f64, hi: f64, grid_size: usize) -> Result<GrowthCertificate> {
        let k_small = delta2_sup(self, lo, u0, grid_size)?;
        let k_large = delta2_sup(self, u0, hi, grid_size)?;
        Ok(GrowthCertificate {
            range: [lo, hi],
            u0,
            k_small,
            k_large,
            c: k_small.max(k_large),
        })
    }
}

fn validate_knots(knots: &[[f64; 2]]) -> Result<()> {
    if knots.len() < 2 || knots[0] != [0.0, 0.0] {
        return Err(Error::Domain("piecewise Orlicz function needs knots starting at (0, 0)".into()));
    }
    let mut last_slope = 0.0;
    for (i, w) in knots.windows(2).enumerate() {
        let du = w[1][0] - w[0][0];
        if !(du > 0.0 && du.is_finite()) {
            return Err(Error::Domain(format!("knot abscissae must increase (segment {i})")));
        }
        let slope = (w[1][1] - w[0][1]) / du;
        if !(slope > 0.0) {
            return Err(Error::Domain(format!("segment {i} has non-positive slope {slope}")));
        }
        if slope < last_slope * (1.0 - 1e-12) {
            return Err(Error::Domain(format!("knots are not convex at segment {i}")));
        }
        last_slope = slope;
    }
    Ok(())
}

fn midpoint_convex(g: impl Fn(f64) -> f64, grid: &[f64]) -> bool {
    for (i, &a) in grid.iter().enumerate() {
        for &b in &grid[i + 1..] {
            let avg = 0.5 * (g(a) + g(b));
            if g(0.5 * (a + b)) > avg + GRID_TOL * avg.abs().max(1e-300) {
                return false;
            }
        }
    }
    true
}

/// `{0} ∪` 44 log-spaced points on `[1e-6, 1e6]`: 990 midpoint pairs.
pub fn default_grid() -> Vec<f64> {
    let mut g = vec![0.0];
    g.extend(log_grid(1e-6, 1e6, 44));
    g
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n < 2 {
        return vec![lo];
    }
    let (l, h) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (l + (h - l) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrliczInvariants {
    pub zero_at_origin: bool,
    pub strictly_increasing: bool,
    pub convex: bool,
    /// Largest `|Φ⁻¹(Φ(u)) − u| / max(1, u)` on the grid.
    pub inverse_error: f64,
}

impl OrliczInvariants {
    pub fn passed(&self) -> bool {
        self.zero_at_origin && self.strictly_increasing && self.convex && self.inverse_error <= 1e-8
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthCertificate {
    pub range: [f64; 2],
    pub u0: f64,
    pub k_small: f64,
    pub k_large: f64,
    pub c: f64,
}

/// Scale `t` with `t·Φ(u) ≥ u` for all `u ≥ δ`; `t = δ/Φ(δ)` works because
/// `Φ(u)/u` is nondecreasing for convex `Φ` vanishing at the origin.
pub fn lemma_constant(phi: &OrliczFunction, delta: f64) -> Result<f64> {
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::Domain(format!("delta must be > 0, got {delta}")));
    }
    let v = phi.eval(delta);
    if !(v > f64::MIN_POSITIVE) {
        return Err(Error::Domain(format!("Φ({delta}) = {v} is not positive")));
    }
    Ok(delta / v)
}

/// Verifies `t·Φ(u) ≥ u` on a log grid of `[δ, 10⁴δ]`.
pub fn lemma_holds(phi: &OrliczFunction, delta: f64, t: f64) -> bool {
    log_grid(delta, 1e4 * delta, 400)
        .into_iter()
        .all(|u| t * phi.eval(u) >= u * (1.0 - 1e-12))
}

/// `max Φ(2u)/Φ(u)` over a log grid of `[lo, hi]`.
pub fn delta2_sup(phi: &OrliczFunction, lo: f64, hi: f64, grid_size: usize) -> Result<f64> {
    if !(lo > 0.0 && lo < hi && hi.is_finite()) {
        return Err(Error::Domain(format!("delta2_sup needs 0 < lo < hi, got [{lo}, {hi}]")));
    }
    Ok(log_grid(lo, hi, grid_size.max(2))
        .into_iter()
        .map(|u| phi.eval(2.0 * u) / phi.eval(u))
        .fold(0.0, f64::max))
}

/// Midpoint convexity of `u ↦ Φ(√u)` on all grid pairs.
pub fn two_convex_check(phi: &OrliczFunction, grid: &[f64]) -> bool {
    let mut sorted: Vec<f64> = grid.iter().cloned().filter(|u| *u >= 0.0).collect();
    sorted.sort_by(f64::total_cmp);
    midpoint_convex(|u| phi.eval(u.sqrt()), &sorted)
}

/// `Φ̃(u) = Φ(√u)` for 2-convex `Φ`.
pub fn derived_tilde(phi: &OrliczFunction) -> Result<OrliczFunction> {
    if !two_convex_check(phi, &default_grid()) {
        return Err(Error::Domain(format!("{} is not 2-convex", phi.label())));
    }
    Ok(match phi.kind() {
        OrliczKind::Power { p } => OrliczFunction::power(p / 2.0).ok(),
        _ => None,
    }
    .unwrap_or_else(|| OrliczFunction {
        kind: OrliczKind::SqrtComposed { base: Box::new(phi.clone()) },
    }))
}

/// `τ(Φ(|x|))`.
pub fn modular(a: &TracedAlgebra, x: &AlgElement, phi: &OrliczFunction) -> Result<f64> {
    let fx = apply_function(a, |u| phi.eval(u), &x.abs())?;
    a.trace_re(&fx)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormResult {
    pub value: f64,
    /// Final bisection interval `[a_lo, a_hi]`; `value = a_hi`.
    pub bracket: [f64; 2],
    pub modular_at_value: f64,
}

/// `‖x‖_Φ = inf{a > 0 : τ(Φ(|x|/a)) ≤ 1}` in the matrix algebra.
pub fn luxemburg_norm(a: &TracedAlgebra, x: &AlgElement, phi: &OrliczFunction) -> Result<NormResult> {
    a.check(x)?;
    let sup = x.uniform_norm();
    if sup == 0.0 {
        return Ok(zero_norm());
    }
    let sd = a.spectral_decompose(&x.abs())?;
    let levels: Vec<(f64, f64)> = sd
        .eigenvalues
        .iter()
        .zip(&sd.traces)
        .map(|(&l, &w)| (l.max(0.0), w))
        .collect();
    bisect(|s| levels.iter().map(|&(l, w)| w * phi.eval(l / s)).sum(), sup)
}

/// `‖f‖_Φ` for a step function on `(0, ∞)`.
pub fn luxemburg_norm_sf(f: &StepFunction, phi: &OrliczFunction) -> Result<NormResult> {
    let sup = f.sup();
    if sup == 0.0 {
        return Ok(zero_norm());
    }
    bisect(|s| f.integrate_composed(|v| phi.eval(v / s)), sup)
}

fn zero_norm() -> NormResult {
    NormResult {
        value: 0.0,
        bracket: [0.0, 0.0],
        modular_at_value: 0.0,
    }
}

fn bisect(modular: impl Fn(f64) -> f64, start: f64) -> Result<NormResult> {
    let mut hi = start;
    let mut steps = 0;
    while modular(hi) > 1.0 {
        hi *= 2.0;
        steps += 1;
        if steps > MAX_BISECTION {
            return Err(Error::Numerical("no admissible scale found in 200 doublings".into()));
        }
    }
    let mut lo = hi;
    steps = 0;
    while modular(lo) <= 1.0 {
        lo *= 0.5;
        steps += 1;
        if steps > MAX_BISECTION {
            return Err(Error::Numerical("modular stays below 1 after 200 halvings".into()));
        }
    }
    for _ in 0..MAX_BISECTION {
        if hi - lo <= NORM_REL_WIDTH * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if modular(mid) <= 1.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(NormResult {
        value: hi,
        bracket: [lo, hi],
        modular_at_value: modular(hi),
    })
}

/// `τ(Φ(|x|)) ≤ ‖x‖_Φ` for `‖x‖_Φ ≤ 1`.
pub fn modular_bound_check(a: &TracedAlgebra, x: &AlgElement, phi: &OrliczFunction) -> Result<bool> {
    let norm = luxemburg_norm(a, x, phi)?.value;
    if norm > 1.0 + 1e-10 {
        return Err(Error::Domain(format!("needs ‖x‖_Φ ≤ 1, got {norm}")));
    }
    Ok(modular(a, x, phi)? <= norm + 1e-9)
}
