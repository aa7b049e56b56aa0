use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::gauge::{builtin, ConnectionField, FamilySpec};
use crate::quadrature::HeatQuadrature;
use crate::transport::Scheme;

use super::proposal::Proposal;

fn default_steps() -> usize {
    4096
}
fn default_paths() -> usize {
    200
}
fn default_modes() -> Vec<usize> {
    vec![8, 16, 32, 64, 128]
}
fn default_epsilon() -> f64 {
    1e-4
}
fn default_seed() -> u64 {
    20_240_601
}
fn default_x_samples() -> usize {
    1000
}
fn default_radial_nodes() -> usize {
    256
}

/// One experiment, exactly as parsed. Unset dimensions and base point are
/// resolved from the family by [`ExperimentConfig::resolve`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "zero_family")]
    pub family: FamilySpec,
    #[serde(default)]
    pub dim: Option<usize>,
    #[serde(default)]
    pub matrix_size: Option<usize>,
    #[serde(default)]
    pub x: Option<Vec<f64>>,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default = "default_paths")]
    pub paths: usize,
    #[serde(default = "default_modes")]
    pub modes: Vec<usize>,
    #[serde(default)]
    pub scheme: Scheme,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub proposal: Proposal,
    #[serde(default = "default_x_samples")]
    pub x_samples: usize,
    #[serde(default)]
    pub quadrature: HeatQuadrature,
    #[serde(default = "default_radial_nodes")]
    pub radial_nodes: usize,
}

fn zero_family() -> FamilySpec {
    FamilySpec::Zero
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            family: FamilySpec::Zero,
            dim: None,
            matrix_size: None,
            x: None,
            steps: default_steps(),
            paths: default_paths(),
            modes: default_modes(),
            scheme: Scheme::default(),
            epsilon: default_epsilon(),
            seed: default_seed(),
            proposal: Proposal::default(),
            x_samples: default_x_samples(),
            quadrature: HeatQuadrature::default(),
            radial_nodes: default_radial_nodes(),
        }
    }
}

/// A validated configuration with the field instantiated.
#[derive(Clone)]
pub struct Resolved {
    pub field: Arc<dyn ConnectionField>,
    pub d: usize,
    pub n: usize,
    pub x: Vec<f64>,
}

impl std::fmt::Debug for Resolved {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Resolved").field("field", &self.field.label()).field("d", &self.d).field("n", &self.n).field("x", &self.x).finish()
    }
}

impl ExperimentConfig {
    pub fn for_family(family: FamilySpec) -> Self {
        ExperimentConfig { family, ..Default::default() }
    }

    pub fn max_modes(&self) -> usize {
        self.modes.last().copied().unwrap_or(0)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.resolve().map(|_| ())
    }

    pub fn resolve(&self) -> Result<Resolved, ConfigError> {
        let (dd, dn) = self.family.default_dims();
        let d = self.dim.unwrap_or(dd);
        let n = self.matrix_size.unwrap_or(dn);
        let field = builtin(&self.family, d, n)?;
        if self.steps < 2 {
            return Err(ConfigError::new(format!("steps must be >= 2, got {}", self.steps)));
        }
        if self.paths < 2 {
            return Err(ConfigError::new(format!("paths must be >= 2 for an error bar, got {}", self.paths)));
        }
        if self.modes.is_empty() || self.modes[0] == 0 || self.modes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(ConfigError::new("modes must be a non-empty, strictly increasing list of positive integers"));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(ConfigError::new(format!("epsilon must be a positive number, got {}", self.epsilon)));
        }
        if self.x_samples < 2 {
            return Err(ConfigError::new(format!("x_samples must be >= 2, got {}", self.x_samples)));
        }
        if self.radial_nodes == 0 {
            return Err(ConfigError::new("radial_nodes must be positive"));
        }
        self.quadrature.validate()?;
        self.proposal.validate()?;
        let x = match &self.x {
            Some(x) if x.len() != d => {
                return Err(ConfigError::new(format!("x has {} coordinates but dim is {d}", x.len())));
            }
            Some(x) if x.iter().any(|v| !v.is_finite()) => {
                return Err(ConfigError::new("x coordinates must be finite"));
            }
            Some(x) => x.clone(),
            None => vec![0.0; d],
        };
        Ok(Resolved { field, d, n, x })
    }
}
