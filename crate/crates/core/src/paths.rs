//! Brownian paths on a uniform grid over `[0, 1]`, Cameron–Martin directions
//! and the Cesàro kernel `l_n(s, t)`.

use std::f64::consts::{PI, SQRT_2};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{ConfigError, Error, Result};

/// Sampled `d`-dimensional path `b_i = b(i/M)`, `i = 0..=M`, with `b_0 = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct BrownianPath {
    steps: usize,
    d: usize,
    seed: u64,
    values: Vec<f64>,
}

/// Mixes a master seed and a path index into an independent per-path seed.
///
/// SplitMix64 finaliser applied twice; stable across platforms and releases.
pub fn derive_path_seed(master_seed: u64, path_index: u64) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    mix(mix(master_seed) ^ path_index.wrapping_mul(0xD6E8_FEB8_6659_FD93))
}

impl BrownianPath {
    /// Samples a path with independent `N(0, 1/M)` increments per coordinate.
    pub fn sample(seed: u64, steps: usize, d: usize) -> Result<Self> {
        if steps < 2 {
            return Err(ConfigError::new(format!("step count must be >= 2, got {steps}")).into());
        }
        if d == 0 {
            return Err(ConfigError::new("path dimension must be >= 1").into());
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sd = (1.0 / steps as f64).sqrt();
        let mut values = vec![0.0; (steps + 1) * d];
        for i in 0..steps {
            for nu in 0..d {
                let z: f64 = rng.sample(StandardNormal);
                values[(i + 1) * d + nu] = values[i * d + nu] + sd * z;
            }
        }
        Ok(BrownianPath { steps, d, seed, values })
    }

    /// Wraps explicit grid values (row `i` holds `b(i/M)`).
    pub fn from_values(steps: usize, d: usize, values: Vec<f64>) -> Result<Self> {
        if steps < 2 || d == 0 || values.len() != (steps + 1) * d {
            return Err(Error::InvalidInput(format!(
                "expected {} values for M={steps}, d={d}, got {}",
                (steps + 1) * d,
                values.len()
            )));
        }
        Ok(BrownianPath { steps, d, seed: 0, values })
    }

    #[inline]
    pub fn steps(&self) -> usize {
        self.steps
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    #[inline]
    pub fn dt(&self) -> f64 {
        1.0 / self.steps as f64
    }

    #[inline]
    pub fn time(&self, i: usize) -> f64 {
        i as f64 / self.steps as f64
    }

    /// `b(t_i)`.
    #[inline]
    pub fn at(&self, i: usize) -> &[f64] {
        &self.values[i * self.d..(i + 1) * self.d]
    }

    /// `b^ν(t_{i+1}) − b^ν(t_i)`.
    #[inline]
    pub fn increment(&self, i: usize, nu: usize) -> f64 {
        self.values[(i + 1) * self.d + nu] - self.values[i * self.d + nu]
    }

    pub fn endpoint(&self) -> &[f64] {
        self.at(self.steps)
    }

    /// The deterministically shifted path `b + Σ εⱼ uⱼ`, same grid.
    pub fn shifted(&self, shifts: &[(&Direction, f64)]) -> BrownianPath {
        let mut values = self.values.clone();
        let mut buf = vec![0.0; self.d];
        for i in 0..=self.steps {
            let t = self.time(i);
            for (dir, eps) in shifts {
                dir.value(t, &mut buf);
                for nu in 0..self.d {
                    values[i * self.d + nu] += eps * buf[nu];
                }
            }
        }
        BrownianPath { steps: self.steps, d: self.d, seed: self.seed, values }
    }
}

/// `h_k(t) = √2 sin(kπt)`.
#[inline]
pub fn sine_mode(k: usize, t: f64) -> f64 {
    SQRT_2 * (k as f64 * PI * t).sin()
}

/// `ḣ_k(t) = √2 kπ cos(kπt)`.
#[inline]
pub fn sine_mode_rate(k: usize, t: f64) -> f64 {
    let w = k as f64 * PI;
    SQRT_2 * w * (w * t).cos()
}

/// One term `coeff · p_component · h_mode` of a sine-series direction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SineTerm {
    pub component: usize,
    pub mode: usize,
    pub coeff: f64,
}

/// A Cameron–Martin direction `u` with `u(0) = 0`.
///
/// Components are zero-based.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// `p_component · h_mode`.
    Sine { component: usize, mode: usize },
    /// Finite combination of basis directions.
    SineSeries(Vec<SineTerm>),
    /// `u(t) = t · slope`; does not vanish at `t = 1`.
    Ramp { slope: Vec<f64> },
}

impl Direction {
    pub fn value(&self, t: f64, out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        match self {
            Direction::Sine { component, mode } => out[*component] = sine_mode(*mode, t),
            Direction::SineSeries(terms) => {
                for term in terms {
                    out[term.component] += term.coeff * sine_mode(term.mode, t);
                }
            }
            Direction::Ramp { slope } => {
                for (o, s) in out.iter_mut().zip(slope) {
                    *o = s * t;
                }
            }
        }
    }

    pub fn rate(&self, t: f64, out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        match self {
            Direction::Sine { component, mode } => out[*component] = sine_mode_rate(*mode, t),
            Direction::SineSeries(terms) => {
                for term in terms {
                    out[term.component] += term.coeff * sine_mode_rate(term.mode, t);
                }
            }
            Direction::Ramp { slope } => out.copy_from_slice(&slope[..out.len()]),
        }
    }

    /// `u(1) = 0` holds by construction.
    pub fn vanishes_at_end(&self) -> bool {
        !matches!(self, Direction::Ramp { .. })
    }

    /// Checks component indices and modes against the space dimension.
    pub fn validate(&self, d: usize) -> Result<(), ConfigError> {
        let check = |component: usize, mode: usize| {
            if component >= d {
                Err(ConfigError::new(format!("direction component {component} out of range for d={d}")))
            } else if mode == 0 {
                Err(ConfigError::new("sine mode index must be >= 1"))
            } else {
                Ok(())
            }
        };
        match self {
            Direction::Sine { component, mode } => check(*component, *mode),
            Direction::SineSeries(terms) => terms.iter().try_for_each(|t| check(t.component, t.mode)),
            Direction::Ramp { slope } => {
                if slope.len() == d {
                    Ok(())
                } else {
                    Err(ConfigError::new(format!("ramp slope has {} entries, expected {d}", slope.len())))
                }
            }
        }
    }

    /// Samples `u` and `u̇` on the grid of `path`.
    pub fn on_grid(&self, path: &BrownianPath) -> DirectionGrid {
        let d = path.dim();
        let m = path.steps();
        let mut u = vec![0.0; (m + 1) * d];
        let mut udot = vec![0.0; (m + 1) * d];
        for i in 0..=m {
            let t = path.time(i);
            self.value(t, &mut u[i * d..(i + 1) * d]);
            self.rate(t, &mut udot[i * d..(i + 1) * d]);
        }
        DirectionGrid { d, u, udot }
    }
}

/// The basis direction `p_component · h_mode`.
pub fn basis_direction(component: usize, mode: usize, d: usize) -> Result<Direction, ConfigError> {
    let dir = Direction::Sine { component, mode };
    dir.validate(d)?;
    Ok(dir)
}

/// Grid samples of a direction.
#[derive(Clone, Debug)]
pub struct DirectionGrid {
    d: usize,
    u: Vec<f64>,
    udot: Vec<f64>,
}

impl DirectionGrid {
    #[inline]
    pub fn u(&self, i: usize) -> &[f64] {
        &self.u[i * self.d..(i + 1) * self.d]
    }

    #[inline]
    pub fn udot(&self, i: usize) -> &[f64] {
        &self.udot[i * self.d..(i + 1) * self.d]
    }
}

/// Cesàro kernel `l_n(s,t) = (1/n) Σ_{k≤n} h_k(s) h_k(t)`, by direct summation.
pub fn levy_kernel(n: usize, s: f64, t: f64) -> f64 {
    assert!(n >= 1, "levy_kernel needs n >= 1");
    (1..=n).map(|k| sine_mode(k, s) * sine_mode(k, t)).sum::<f64>() / n as f64
}
