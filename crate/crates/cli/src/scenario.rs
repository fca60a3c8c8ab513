use anyhow::{anyhow, bail, Context, Result};
use nalgebra::DMatrix;
use ncorlicz::dsops::{compose, convex_combine, Descriptor};
use ncorlicz::orlicz::luxemburg_norm;
use ncorlicz::{AlgElement, DsOperator, ElementKind, Error, OrliczFunction, TracedAlgebra, C64};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{ElementKindConfig, OperatorConfig, ParamsConfig, ScenarioConfig};

/// Stream ids for the per-scenario generator.
pub const ELEMENT_STREAM: u64 = 1;
pub const SAMPLE_STREAM: u64 = 2;
const OPERATOR_STREAM: u64 = 100;

/// `n`-th output of the ChaCha stream `stream` keyed by `seed`.
pub fn stream_seed(seed: u64, stream: u64, n: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.set_word_pos(2 * n as u128);
    rng.next_u64()
}

/// A scenario with every object constructed and validated.
pub struct Scenario {
    pub name: String,
    pub seed: u64,
    pub horizon: usize,
    pub samples: usize,
    pub algebra: TracedAlgebra,
    pub phi: OrliczFunction,
    pub operator: DsOperator,
    /// Why a checked constructor refused the operator; `operator` then holds
    /// the unvalidated map so verification can name the failing check.
    pub rejected: Option<String>,
    pub element: AlgElement,
    pub element_kind: ElementKind,
    pub params: ParamsConfig,
}

impl Scenario {
    pub fn build(cfg: &ScenarioConfig, seed_override: Option<u64>) -> Result<Self> {
        let seed = seed_override.unwrap_or(cfg.seed);
        let algebra = TracedAlgebra::new(&cfg.algebra.blocks).context("algebra")?;
        let phi = cfg.orlicz.clone();
        let mut counter = 0;
        let (operator, rejected) = match build_operator(&algebra, &cfg.operator, seed, &mut counter, true) {
            Ok(op) => (op, None),
            Err(err @ (Error::Domain(_) | Error::Consistency(_))) => {
                let mut counter = 0;
                let raw = build_operator(&algebra, &cfg.operator, seed, &mut counter, false).context("operator")?;
                (raw, Some(err.to_string()))
            }
            Err(err) => return Err(anyhow!(err)).context("operator"),
        };
        let (element, element_kind) = build_element(&algebra, cfg, seed, &phi).context("element")?;
        Ok(Scenario {
            name: cfg.name.clone(),
            seed,
            horizon: cfg.horizon,
            samples: cfg.samples,
            algebra,
            phi,
            operator,
            rejected,
            element,
            element_kind,
            params: cfg.params.clone(),
        })
    }

    /// The configured element if positive, otherwise `|x|`.
    pub fn positive_element(&self) -> AlgElement {
        if self.element.is_self_adjoint(1e-12) && self.element.is_positive() {
            self.element.hermitian_part()
        } else {
            self.element.abs()
        }
    }

    pub fn sample(&self, kind: ElementKind, i: usize) -> AlgElement {
        self.algebra.random_element(kind, stream_seed(self.seed, SAMPLE_STREAM, i as u64))
    }
}

fn real_matrix(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        bail!("{what} must be a non-empty square matrix");
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn build_operator(
    a: &TracedAlgebra,
    cfg: &OperatorConfig,
    seed: u64,
    counter: &mut u64,
    checked: bool,
) -> std::result::Result<DsOperator, Error> {
    let op = match cfg {
        OperatorConfig::Identity => DsOperator::identity(a),
        OperatorConfig::Unitary { seed: own, phases } => {
            let u = match phases {
                Some(ph) => {
                    if ph.len() != a.total_dimension() {
                        return Err(Error::Structural(format!(
                            "{} phases for total dimension {}",
                            ph.len(),
                            a.total_dimension()
                        )));
                    }
                    let mut it = ph.iter();
                    let blocks = a
                        .dims()
                        .iter()
                        .map(|&d| {
                            DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
                                d,
                                it.by_ref().take(d).map(|&t| C64::from_polar(1.0, t)),
                            ))
                        })
                        .collect();
                    a.element(blocks)?
                }
                None => {
                    *counter += 1;
                    a.random_unitary(own.unwrap_or_else(|| stream_seed(seed, OPERATOR_STREAM, *counter)))
                }
            };
            DsOperator::from_unitary_conjugation(a, &u)?
        }
        OperatorConfig::Schur { block, correlation, matrix } => {
            let d = *a
                .dims()
                .get(*block)
                .ok_or_else(|| Error::Structural(format!("no block {block}")))?;
            let c = match (correlation, matrix) {
                (Some(r), _) => DMatrix::from_fn(d, d, |i, j| C64::new(r.powi((i as i32 - j as i32).abs()), 0.0)),
                (_, Some(m)) => real_matrix(m, "schur matrix")
                    .map_err(|e| Error::Structural(e.to_string()))?
                    .map(|v| C64::new(v, 0.0)),
                _ => unreachable!("validated"),
            };
            if checked {
                DsOperator::from_schur_correlation(a, &c, *block)?
            } else {
                DsOperator::schur_multiplier_raw(a, &c, *block)?
            }
        }
        OperatorConfig::Substochastic { matrix } => {
            let s = real_matrix(matrix, "substochastic matrix").map_err(|e| Error::Structural(e.to_string()))?;
            if checked {
                DsOperator::from_substochastic(a, &s)?
            } else {
                DsOperator::substochastic_raw(a, &s)?
            }
        }
        OperatorConfig::Compose { parts } => {
            let ops = parts
                .iter()
                .map(|p| build_operator(a, p, seed, counter, checked))
                .collect::<std::result::Result<Vec<_>, _>>()?;
            let mut it = ops.into_iter().rev();
            let mut acc = it.next().expect("validated non-empty");
            for outer in it {
                acc = if checked {
                    compose(&outer, &acc)?
                } else {
                    DsOperator::from_superoperator(
                        a,
                        Descriptor::Compose {
                            outer: Box::new(outer.descriptor().clone()),
                            inner: Box::new(acc.descriptor().clone()),
                        },
                        outer.matrix() * acc.matrix(),
                    )?
                };
            }
            acc
        }
        OperatorConfig::Mix { lambda, parts } => {
            let first = build_operator(a, &parts[0], seed, counter, checked)?;
            let second = build_operator(a, &parts[1], seed, counter, checked)?;
            if checked {
                convex_combine(&first, &second, *lambda)?
            } else {
                DsOperator::from_superoperator(
                    a,
                    Descriptor::Mix {
                        lambda: *lambda,
                        first: Box::new(first.descriptor().clone()),
                        second: Box::new(second.descriptor().clone()),
                    },
                    first.matrix().scale(*lambda) + second.matrix().scale(1.0 - lambda),
                )?
            }
        }
    };
    Ok(op)
}

fn build_element(
    a: &TracedAlgebra,
    cfg: &ScenarioConfig,
    seed: u64,
    phi: &OrliczFunction,
) -> Result<(AlgElement, ElementKind)> {
    let e = &cfg.element;
    let element_seed = e.seed.unwrap_or_else(|| stream_seed(seed, ELEMENT_STREAM, 0));
    let (x, kind) = match e.kind {
        ElementKindConfig::General => (a.random_element(ElementKind::General, element_seed), ElementKind::General),
        ElementKindConfig::Hermitian => (a.random_element(ElementKind::Hermitian, element_seed), ElementKind::Hermitian),
        ElementKindConfig::Positive => (a.random_element(ElementKind::Positive, element_seed), ElementKind::Positive),
        ElementKindConfig::Projection => (a.random_element(ElementKind::Projection, element_seed), ElementKind::Projection),
        ElementKindConfig::Explicit => {
            let x = a.element_from_real(e.blocks.as_deref().expect("validated"))?;
            let kind = if x.is_self_adjoint(1e-12) && x.is_positive() {
                ElementKind::Positive
            } else if x.is_self_adjoint(1e-12) {
                ElementKind::Hermitian
            } else {
                ElementKind::General
            };
            (x, kind)
        }
    };
    let x = match e.rescale {
        Some(target) => {
            let n = luxemburg_norm(a, &x, phi)?.value;
            if n > 0.0 {
                x.scale(target / n)
            } else {
                x
            }
        }
        None => x,
    };
    Ok((x, kind))
}
