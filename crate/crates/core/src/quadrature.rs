//! Deterministic quadrature oracles: Gauss rules, the heat-kernel average of
//! the Yang–Mills residual density, and radial integrals of action densities.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{ConfigError, Result};
use crate::gauge::{bpst_action_density, ym_residual_density, ConnectionField, FamilySpec};

/// Nodes and weights of a one-dimensional rule.
#[derive(Clone, Debug, PartialEq)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }
}

/// Gauss–Legendre rule on `[a, b]`.
pub fn gauss_legendre(n: usize, a: f64, b: f64) -> Rule {
    assert!(n >= 1, "rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 1 { x } else { p1 };
            let pm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * p - pm1) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = mid - half * x;
        nodes[n - 1 - i] = mid + half * x;
        weights[i] = half * w;
        weights[n - 1 - i] = half * w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = mid;
    }
    Rule { nodes, weights }
}

/// Gauss–Hermite rule for `E f(Z)`, `Z ~ N(0, 1)`: nodes scaled by `√2`,
/// weights normalised to sum to one.
pub fn gauss_hermite_normal(n: usize) -> Rule {
    assert!(n >= 1, "rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    let mut x = 0.0;
    for i in 0..n.div_ceil(2) {
        // Starting guesses for the physicists' Hermite roots, largest first.
        x = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => x - 1.14 * nf.powf(0.426) / x,
            2 => 1.86 * x - 0.86 * nodes[0],
            3 => 1.91 * x - 0.91 * nodes[1],
            _ => 2.0 * x - nodes[i - 2],
        };
        let mut dp = 0.0;
        for _ in 0..100 {
            // Orthonormal recurrence keeps the values bounded for large n.
            let mut p1 = PI.powf(-0.25);
            let mut p0 = 0.0;
            for j in 1..=n {
                let p2 = x * (2.0 / j as f64).sqrt() * p1 - ((j - 1) as f64 / j as f64).sqrt() * p0;
                p0 = p1;
                p1 = p2;
            }
            dp = (2.0 * nf).sqrt() * p0;
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-14 {
                break;
            }
        }
        nodes[i] = x;
        nodes[n - 1 - i] = -x;
        weights[i] = 2.0 / (dp * dp);
        weights[n - 1 - i] = weights[i];
    }
    let norm = PI.sqrt();
    Rule {
        nodes: nodes.iter().map(|x| x * std::f64::consts::SQRT_2).collect(),
        weights: weights.iter().map(|w| w / norm).collect(),
    }
}

/// Node counts for the heat-kernel quadrature.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeatQuadrature {
    pub hermite_nodes: usize,
    pub time_nodes: usize,
}

impl Default for HeatQuadrature {
    fn default() -> Self {
        HeatQuadrature { hermite_nodes: 10, time_nodes: 24 }
    }
}

impl HeatQuadrature {
    pub fn validate(&self) -> std::result::Result<(), ConfigError> {
        if self.hermite_nodes == 0 || self.time_nodes == 0 {
            return Err(ConfigError::new("quadrature node counts must be positive"));
        }
        Ok(())
    }
}

/// `E_Z[f(Z)]` for `Z ~ N(0, I_d)` on a tensor Gauss–Hermite grid.
pub fn gaussian_expectation(d: usize, rule: &Rule, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
    let n = rule.len();
    let mut idx = vec![0usize; d];
    let mut z = vec![0.0; d];
    let mut acc = 0.0;
    loop {
        let mut w = 1.0;
        for (k, &j) in idx.iter().enumerate() {
            z[k] = rule.nodes[j];
            w *= rule.weights[j];
        }
        acc += w * f(&z);
        let mut k = 0;
        while k < d {
            idx[k] += 1;
            if idx[k] < n {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
        if k == d {
            return acc;
        }
    }
}

/// `∫_0^1 E[ −Σ_ν tr(Y_ν Y_ν)(x + b_t) ] dt`, the expected squared norm of the
/// Itô integral `∫ U⁻¹ Y_ν U db^ν`.
pub fn heat_kernel_residual(field: &dyn ConnectionField, x: &[f64], q: HeatQuadrature) -> Result<f64> {
    q.validate()?;
    let d = field.dim();
    if x.len() != d {
        return Err(ConfigError::new(format!("base point has {} coordinates, expected {d}", x.len())).into());
    }
    let hermite = gauss_hermite_normal(q.hermite_nodes);
    let time = gauss_legendre(q.time_nodes, 0.0, 1.0);
    let mut y = vec![0.0; d];
    let mut acc = 0.0;
    for (&t, &wt) in time.nodes.iter().zip(&time.weights) {
        let s = t.sqrt();
        acc += wt
            * gaussian_expectation(d, &hermite, |z| {
                for k in 0..d {
                    y[k] = x[k] + s * z[k];
                }
                ym_residual_density(field, &y)
            });
    }
    Ok(acc)
}

/// Surface area of the unit sphere in `ℝ^d`.
pub fn sphere_area(d: usize) -> f64 {
    let h = 0.5 * d as f64;
    2.0 * PI.powf(h) / ln_gamma(h).exp()
}

/// `∫_{ℝ^d} a(|x|) dx` for a radial density, using `r = scale·tan θ` and
/// Gauss–Legendre in `θ`.
pub fn radial_integral(d: usize, scale: f64, nodes: usize, density: impl Fn(f64) -> f64) -> f64 {
    let rule = gauss_legendre(nodes, 0.0, 0.5 * PI);
    let radial = rule.integrate(|theta| {
        let (s, c) = theta.sin_cos();
        let r = scale * s / c;
        density(r) * r.powi(d as i32 - 1) * scale / (c * c)
    });
    sphere_area(d) * radial
}

/// Deterministic `−∫ tr(F_μν F_μν) dx` for families with an integrable action.
pub fn action_integral(spec: &FamilySpec, d: usize, nodes: usize) -> Result<f64> {
    match *spec {
        FamilySpec::Zero => Ok(0.0),
        FamilySpec::Bpst { rho } => Ok(radial_integral(d, rho, nodes, |r| bpst_action_density(rho, r))),
        _ => Err(ConfigError::new(format!("family `{}` has no integrable action density", spec.id())).into()),
    }
}
