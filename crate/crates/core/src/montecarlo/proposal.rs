use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::ConfigError;

/// Centred importance-sampling proposal on `ℝ^d` for spatial integrals.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Proposal {
    /// Isotropic multivariate Student-t with `dof` degrees of freedom.
    StudentT { dof: f64, scale: f64 },
    /// Isotropic Gaussian `N(0, sigma² I)`.
    Gaussian { sigma: f64 },
}

impl Default for Proposal {
    fn default() -> Self {
        Proposal::StudentT { dof: 3.0, scale: 1.0 }
    }
}

impl Proposal {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let ok = match *self {
            Proposal::StudentT { dof, scale } => dof > 0.0 && dof.is_finite() && scale > 0.0 && scale.is_finite(),
            Proposal::Gaussian { sigma } => sigma > 0.0 && sigma.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(ConfigError::new(format!("invalid proposal parameters: {self:?}")))
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, d: usize, rng: &mut R) -> Vec<f64> {
        let z: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        match *self {
            Proposal::Gaussian { sigma } => z.into_iter().map(|v| sigma * v).collect(),
            Proposal::StudentT { dof, scale } => {
                let w: f64 = ChiSquared::new(dof).expect("validated dof").sample(rng);
                let s = scale / (w / dof).sqrt();
                z.into_iter().map(|v| s * v).collect()
            }
        }
    }

    pub fn ln_density(&self, x: &[f64]) -> f64 {
        let d = x.len() as f64;
        let r2: f64 = x.iter().map(|v| v * v).sum();
        match *self {
            Proposal::Gaussian { sigma } => -0.5 * d * (2.0 * PI * sigma * sigma).ln() - 0.5 * r2 / (sigma * sigma),
            Proposal::StudentT { dof, scale } => {
                ln_gamma(0.5 * (dof + d)) - ln_gamma(0.5 * dof) - 0.5 * d * (dof * PI).ln() - d * scale.ln()
                    - 0.5 * (dof + d) * (r2 / (dof * scale * scale)).ln_1p()
            }
        }
    }
}
