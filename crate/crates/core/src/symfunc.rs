//! Nonincreasing step functions on `(0, ∞)` and the generalized singular-value
//! function `t ↦ μ_t(x)`.
//!
//! On a weighted block algebra `μ(x)` is the decreasing rearrangement of the
//! singular values of the blocks, each singular value of block `j` occupying an
//! interval of length `w_j`.

use serde::{Deserialize, Serialize};

use crate::algebra::{AlgElement, TracedAlgebra};
use crate::error::{Error, Result};
use crate::orlicz::OrliczFunction;

/// Relative tolerance under which adjacent piece values are merged.
const MERGE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PieceRepr", into = "PieceRepr")]
pub struct Piece {
    pub value: f64,
    /// `f64::INFINITY` for the trailing piece.
    pub length: f64,
}

#[derive(Serialize, Deserialize)]
struct PieceRepr {
    value: f64,
    length: Option<f64>,
}

impl From<Piece> for PieceRepr {
    fn from(p: Piece) -> Self {
        PieceRepr {
            value: p.value,
            length: p.length.is_finite().then_some(p.length),
        }
    }
}

impl TryFrom<PieceRepr> for Piece {
    type Error = String;
    fn try_from(r: PieceRepr) -> std::result::Result<Self, String> {
        Ok(Piece {
            value: r.value,
            length: r.length.unwrap_or(f64::INFINITY),
        })
    }
}

/// Right-continuous nonincreasing step function in canonical form: strictly
/// decreasing values, positive lengths, and a final `(0, ∞)` piece.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Piece>", into = "Vec<Piece>")]
pub struct StepFunction {
    pieces: Vec<Piece>,
}

impl TryFrom<Vec<Piece>> for StepFunction {
    type Error = Error;
    fn try_from(p: Vec<Piece>) -> Result<Self> {
        StepFunction::from_pieces(p)
    }
}

impl From<StepFunction> for Vec<Piece> {
    fn from(f: StepFunction) -> Self {
        f.pieces
    }
}

impl StepFunction {
    /// Zero function.
    pub fn zero() -> Self {
        StepFunction {
            pieces: vec![Piece { value: 0.0, length: f64::INFINITY }],
        }
    }

    /// `c · χ_{(0, b)}`.
    pub fn indicator(height: f64, b: f64) -> Result<Self> {
        Self::from_pieces(vec![Piece { value: height, length: b }])
    }

    /// Validates and normalizes a nonincreasing sequence of pieces.
    pub fn from_pieces(pieces: Vec<Piece>) -> Result<Self> {
        let n = pieces.len();
        for (i, p) in pieces.iter().enumerate() {
            if !(p.value.is_finite() && p.value >= 0.0) {
                return Err(Error::Domain(format!("piece {i} has value {}", p.value)));
            }
            if p.length.is_nan() || p.length <= 0.0 {
                return Err(Error::Domain(format!("piece {i} has length {}", p.length)));
            }
            if p.length.is_infinite() && (i + 1 != n || p.value != 0.0) {
                return Err(Error::Domain(
                    "only the final piece may be infinite, and it must carry value 0".into(),
                ));
            }
        }
        if pieces.windows(2).any(|w| w[1].value > w[0].value) {
            return Err(Error::Domain("step function values must be nonincreasing".into()));
        }
        Ok(Self::normalize(pieces))
    }

    /// Decreasing rearrangement of weighted values: each `(value, weight)`
    /// contributes an interval of length `weight` at height `value`.
    pub fn rearrangement(values: impl IntoIterator<Item = (f64, f64)>) -> Self {
        let mut v: Vec<(f64, f64)> = values
            .into_iter()
            .filter(|&(val, w)| w > 0.0 && val > 0.0)
            .collect();
        v.sort_by(|a, b| b.0.total_cmp(&a.0));
        Self::normalize(v.into_iter().map(|(value, length)| Piece { value, length }).collect())
    }

    fn normalize(pieces: Vec<Piece>) -> Self {
        let top = pieces.first().map_or(0.0, |p| p.value);
        let tol = MERGE_TOL * top;
        let mut out: Vec<Piece> = Vec::with_capacity(pieces.len() + 1);
        for p in pieces {
            if p.value <= 0.0 || p.length.is_infinite() {
                break;
            }
            match out.last_mut() {
                Some(last) if last.value - p.value <= tol => {
                    let len = last.length + p.length;
                    last.value = (last.value * last.length + p.value * p.length) / len;
                    last.length = len;
                }
                _ => out.push(p),
            }
        }
        out.push(Piece { value: 0.0, length: f64::INFINITY });
        StepFunction { pieces: out }
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    /// Right endpoints of the finite pieces.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut acc = 0.0;
        self.pieces
            .iter()
            .filter(|p| p.length.is_finite())
            .map(|p| {
                acc += p.length;
                acc
            })
            .collect()
    }

    /// Measure of `{t : f(t) > 0}`.
    pub fn support_length(&self) -> f64 {
        self.pieces
            .iter()
            .filter(|p| p.length.is_finite())
            .map(|p| p.length)
            .sum()
    }

    /// `f(0⁺)`, the supremum.
    pub fn sup(&self) -> f64 {
        self.pieces[0].value
    }

    /// Value at `t ≥ 0`, right-continuous: a piece covers `[start, end)`.
    pub fn eval(&self, t: f64) -> f64 {
        let mut start = 0.0;
        for p in &self.pieces {
            let end = start + p.length;
            if t < end {
                return p.value;
            }
            start = end;
        }
        0.0
    }

    /// `∫_0^upper f(t) dt`; `upper` may be `+∞`.
    pub fn integral(&self, upper: f64) -> f64 {
        let mut acc = 0.0;
        let mut start = 0.0;
        for p in &self.pieces {
            if p.value == 0.0 || start >= upper {
                break;
            }
            let end = start + p.length;
            acc += p.value * (end.min(upper) - start);
            start = end;
        }
        acc
    }

    /// `∫_0^∞ g(f(t)) dt` for `g` with `g(0) = 0`.
    pub fn integrate_composed(&self, g: impl Fn(f64) -> f64) -> f64 {
        self.pieces
            .iter()
            .filter(|p| p.length.is_finite())
            .map(|p| g(p.value) * p.length)
            .sum()
    }

    /// `g ∘ f` for nondecreasing `g` with `g(0) = 0`.
    pub fn map(&self, g: impl Fn(f64) -> f64) -> StepFunction {
        Self::normalize(
            self.pieces
                .iter()
                .filter(|p| p.length.is_finite())
                .map(|p| Piece { value: g(p.value), length: p.length })
                .collect(),
        )
    }

    /// Dilation `(D_s f)(t) = f(t/s)`.
    pub fn dilate(&self, s: f64) -> Result<StepFunction> {
        if !(s.is_finite() && s > 0.0) {
            return Err(Error::Domain(format!("dilation scale must be > 0, got {s}")));
        }
        Ok(StepFunction {
            pieces: self
                .pieces
                .iter()
                .map(|p| Piece { value: p.value, length: p.length * s })
                .collect(),
        })
    }

    /// `sup_t |f(t) − g(t)|`, evaluated on the common refinement of both partitions.
    pub fn sup_distance(&self, other: &StepFunction) -> f64 {
        let mut points = vec![0.0];
        points.extend(self.breakpoints());
        points.extend(other.breakpoints());
        points
            .iter()
            .map(|&t| (self.eval(t) - other.eval(t)).abs())
            .fold(0.0, f64::max)
    }
}

/// `t ↦ μ_t(x) = inf{λ > 0 : τ(e_λ⊥) ≤ t}` for the spectral family of `|x|`.
pub fn singular_value_function(a: &TracedAlgebra, x: &AlgElement) -> Result<StepFunction> {
    a.check(x)?;
    let w = a.weights();
    Ok(StepFunction::rearrangement(
        x.singular_values().into_iter().map(|(j, s)| (s, w[j])),
    ))
}

/// `∫_0^upper f(t) dt`.
pub fn sf_integral(f: &StepFunction, upper: f64) -> f64 {
    f.integral(upper)
}

/// Hardy–Littlewood–Pólya majorization: `∫_0^s y ≤ ∫_0^s x` for every `s > 0`.
/// Both cumulative integrals are piecewise linear, so the breakpoints suffice.
pub fn majorizes(x: &StepFunction, y: &StepFunction) -> bool {
    const TOL: f64 = 1e-10;
    let mut points = x.breakpoints();
    points.extend(y.breakpoints());
    points.push(f64::INFINITY);
    points.iter().all(|&s| y.integral(s) <= x.integral(s) + TOL)
}

pub fn dilate(f: &StepFunction, s: f64) -> Result<StepFunction> {
    f.dilate(s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoydEstimate {
    pub s_grid: Vec<f64>,
    /// Lower bounds for `‖D_s‖` on `L^Φ(0, ∞)`.
    pub dilation_norm_lower: Vec<f64>,
    /// `log s / log ‖D_s‖_lower`, absent where the ratio is undefined.
    pub local_index: Vec<Option<f64>>,
    /// Estimate at the largest scale.
    pub p_hat: f64,
    /// Estimate at the smallest scale.
    pub q_hat: f64,
}

/// Default scales `2^k`, `k ∈ {-10, …, -1, 1, …, 10}`.
pub fn default_boyd_grid() -> Vec<f64> {
    (-10..=10).filter(|&k| k != 0).map(|k| 2f64.powi(k)).collect()
}

/// Estimates the Boyd indices of `L^Φ(0, ∞)` from the characteristic-function
/// family: `‖D_s χ_{(0,b)}‖ / ‖χ_{(0,b)}‖ = φ(sb)/φ(b)` with fundamental
/// function `φ(t) = 1 / Φ⁻¹(1/t)`, maximised over a log grid of `b`.
/// The dilation norms are only bounded from below, so `p_hat` over-estimates `p_E`.
pub fn boyd_estimate(phi: &OrliczFunction, s_grid: &[f64]) -> Result<BoydEstimate> {
    let max_s = s_grid.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min_s = s_grid.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(max_s >= 1024.0 && min_s <= 1.0 / 1024.0)
        || !(s_grid.iter().any(|&s| s > 1.0 && s <= 2.0) && s_grid.iter().any(|&s| (0.5..1.0).contains(&s)))
    {
        return Err(Error::Domain(
            "s_grid must span [2, 2^10] and [2^-10, 1/2]".into(),
        ));
    }
    if s_grid.iter().any(|&s| !(s.is_finite() && s > 0.0)) {
        return Err(Error::Domain("dilation scales must be finite and > 0".into()));
    }
    let fundamental = |t: f64| -> Result<f64> {
        let inv = phi.inverse(1.0 / t);
        if !(inv.is_finite() && inv > 0.0) {
            return Err(Error::Domain(format!(
                "Φ⁻¹({}) = {inv} is not a positive finite number",
                1.0 / t
            )));
        }
        Ok(1.0 / inv)
    };
    let b_grid: Vec<f64> = (-240..=240).map(|k| 2f64.powf(k as f64 / 4.0)).collect();
    let phi_b: Vec<f64> = b_grid.iter().map(|&b| fundamental(b)).collect::<Result<_>>()?;

    let mut lower = Vec::with_capacity(s_grid.len());
    let mut local = Vec::with_capacity(s_grid.len());
    for &s in s_grid {
        let mut best = 0.0f64;
        for (&b, &fb) in b_grid.iter().zip(&phi_b) {
            best = best.max(fundamental(s * b)? / fb);
        }
        lower.push(best);
        let idx = s.ln() / best.ln();
        local.push((s != 1.0 && best != 1.0 && idx.is_finite()).then_some(idx));
    }
    let at = |target: f64| {
        let i = s_grid.iter().position(|&s| s == target).expect("scale present");
        target.ln() / lower[i].ln()
    };
    let (p_hat, q_hat) = (at(max_s), at(min_s));
    Ok(BoydEstimate {
        s_grid: s_grid.to_vec(),
        dilation_norm_lower: lower,
        local_index: local,
        p_hat,
        q_hat,
    })
}
