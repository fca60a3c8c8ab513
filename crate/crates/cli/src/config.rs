use std::path::Path;

use anyhow::{bail, Context, Result};
use ncorlicz::OrliczFunction;
use serde::{Deserialize, Serialize};

pub const DEFAULT_CONFIG: &str = r#"
[[scenario]]
name = "default"
seed = 7
horizon = 256

[scenario.algebra]
blocks = [[2, 1.0], [2, 0.5], [1, 2.0]]

[scenario.orlicz]
kind = "power"
p = 2.0

[scenario.operator]
kind = "mix"
lambda = 0.5
parts = [
  { kind = "unitary" },
  { kind = "schur", block = 0, correlation = 0.6 },
]

[scenario.element]
kind = "positive"
rescale = 0.1
"#;

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub scenario: Vec<ScenarioConfig>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    #[serde(default = "default_samples")]
    pub samples: usize,
    pub algebra: AlgebraConfig,
    #[serde(default = "default_orlicz")]
    pub orlicz: OrliczFunction,
    pub operator: OperatorConfig,
    #[serde(default)]
    pub element: ElementConfig,
    #[serde(default)]
    pub params: ParamsConfig,
}

fn default_horizon() -> usize {
    256
}

fn default_samples() -> usize {
    20
}

fn default_orlicz() -> OrliczFunction {
    OrliczFunction::power(2.0).expect("valid exponent")
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct AlgebraConfig {
    /// `(dimension, weight)` per block.
    pub blocks: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OperatorConfig {
    Identity,
    /// Diagonal phases `e^{iθ}` when given, otherwise a seeded random unitary.
    Unitary {
        #[serde(default)]
        seed: Option<u64>,
        #[serde(default)]
        phases: Option<Vec<f64>>,
    },
    /// Correlation matrix `r^{|i−j|}` or an explicit real matrix on one block.
    Schur {
        #[serde(default)]
        block: usize,
        #[serde(default)]
        correlation: Option<f64>,
        #[serde(default)]
        matrix: Option<Vec<Vec<f64>>>,
    },
    Substochastic {
        matrix: Vec<Vec<f64>>,
    },
    /// `parts[0] ∘ parts[1] ∘ …`.
    Compose {
        parts: Vec<OperatorConfig>,
    },
    /// `λ·parts[0] + (1 − λ)·parts[1]`.
    Mix {
        lambda: f64,
        parts: Vec<OperatorConfig>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ElementKindConfig {
    General,
    Hermitian,
    Positive,
    Projection,
    Explicit,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ElementConfig {
    pub kind: ElementKindConfig,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Rescale to this Orlicz norm.
    #[serde(default)]
    pub rescale: Option<f64>,
    /// Real blocks for `kind = "explicit"`.
    #[serde(default)]
    pub blocks: Option<Vec<Vec<Vec<f64>>>>,
}

impl Default for ElementConfig {
    fn default() -> Self {
        ElementConfig {
            kind: ElementKindConfig::Positive,
            seed: None,
            rescale: None,
            blocks: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsConfig {
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    /// Level for the maximal search; defaults to half of `‖x‖_∞`.
    #[serde(default)]
    pub nu: Option<f64>,
}

fn default_epsilon() -> f64 {
    0.5
}

fn default_delta() -> f64 {
    1.0
}

impl Default for ParamsConfig {
    fn default() -> Self {
        ParamsConfig {
            epsilon: default_epsilon(),
            delta: default_delta(),
            nu: None,
        }
    }
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let config: Config = toml::from_str(text).context("invalid configuration")?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn default_config() -> Self {
        Self::parse(DEFAULT_CONFIG).expect("built-in configuration is valid")
    }

    fn validate(&self) -> Result<()> {
        if self.scenario.is_empty() {
            bail!("configuration defines no scenarios");
        }
        let mut names: Vec<&str> = self.scenario.iter().map(|s| s.name.as_str()).collect();
        names.sort_unstable();
        if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
            bail!("duplicate scenario name '{}'", w[0]);
        }
        for s in &self.scenario {
            s.validate().with_context(|| format!("scenario '{}'", s.name))?;
        }
        Ok(())
    }

    /// Keeps scenarios whose name contains one of the comma-separated patterns.
    pub fn filter(&mut self, patterns: &str) -> Result<()> {
        let pats: Vec<&str> = patterns.split(',').map(str::trim).filter(|p| !p.is_empty()).collect();
        self.scenario.retain(|s| pats.iter().any(|p| s.name.contains(p)));
        if self.scenario.is_empty() {
            bail!("no scenario matches '{patterns}'");
        }
        Ok(())
    }
}

impl ScenarioConfig {
    fn validate(&self) -> Result<()> {
        if self.name.is_empty() || !self.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
            bail!("name must be non-empty and use only [A-Za-z0-9_-]");
        }
        if self.horizon < 2 {
            bail!("horizon must be at least 2");
        }
        if self.samples == 0 {
            bail!("samples must be at least 1");
        }
        let p = &self.params;
        if !(p.epsilon > 0.0 && p.delta > 0.0) {
            bail!("epsilon and delta must be > 0");
        }
        if let Some(nu) = p.nu {
            if !(nu > 0.0) {
                bail!("nu must be > 0");
            }
        }
        if let Some(r) = self.element.rescale {
            if !(r >= 0.0 && r.is_finite()) {
                bail!("element.rescale must be a finite number >= 0");
            }
        }
        if (self.element.kind == ElementKindConfig::Explicit) != self.element.blocks.is_some() {
            bail!("element.blocks is required for kind = \"explicit\" and only allowed there");
        }
        self.operator.validate()
    }
}

impl OperatorConfig {
    fn validate(&self) -> Result<()> {
        match self {
            OperatorConfig::Schur { correlation, matrix, .. } => {
                if correlation.is_some() == matrix.is_some() {
                    bail!("schur operator needs exactly one of correlation or matrix");
                }
            }
            OperatorConfig::Compose { parts } => {
                if parts.is_empty() {
                    bail!("compose needs at least one part");
                }
                parts.iter().try_for_each(OperatorConfig::validate)?;
            }
            OperatorConfig::Mix { lambda, parts } => {
                if parts.len() != 2 {
                    bail!("mix needs exactly two parts");
                }
                if !(0.0..=1.0).contains(lambda) {
                    bail!("mix lambda must lie in [0, 1]");
                }
                parts.iter().try_for_each(OperatorConfig::validate)?;
            }
            _ => {}
        }
        Ok(())
    }
}
