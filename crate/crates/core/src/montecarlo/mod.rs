//! Ensemble estimation over independent Brownian paths, plus the verification
//! drivers that compare Cesàro partial sums, Lemma remainders and action
//! identities against their closed forms and deterministic oracles.
//!
//! Every path draws from its own ChaCha8 stream seeded by
//! [`derive_path_seed`]`(master, index)`. Paths run on a rayon pool of the
//! requested width; results are gathered in index order and reduced
//! sequentially, so estimates do not depend on the worker count.

mod config;
mod drivers;
mod proposal;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use config::{ExperimentConfig, Resolved};
pub use drivers::*;
pub use proposal::Proposal;

use crate::error::{ConfigError, Error, Result};
use crate::liealg::{c64, CMat};
use crate::paths::{derive_path_seed, BrownianPath};
use crate::transport::solve_transport;

/// Mean and standard error of an ensemble average.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McEstimate<T> {
    pub mean: T,
    pub stderr: T,
    pub paths: usize,
    pub master_seed: u64,
}

impl McEstimate<f64> {
    /// Sample mean and `s/√n`, reduced in the given order.
    pub fn from_samples(samples: &[f64], master_seed: u64) -> Self {
        let n = samples.len();
        assert!(n >= 1, "estimate needs at least one sample");
        let mean = samples.iter().sum::<f64>() / n as f64;
        let stderr = if n > 1 {
            let var = samples.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        McEstimate { mean, stderr, paths: n, master_seed }
    }

    /// `sqrt(mean)` with a delta-method error bar, for root-mean-square estimates.
    pub fn sqrt(&self) -> McEstimate<f64> {
        let root = self.mean.max(0.0).sqrt();
        let stderr = if root > 0.0 { self.stderr / (2.0 * root) } else { 0.0 };
        McEstimate { mean: root, stderr, paths: self.paths, master_seed: self.master_seed }
    }

    /// `|mean − value| / stderr`, with `0/0 = 0`.
    pub fn z_score(&self, value: f64) -> f64 {
        let diff = (self.mean - value).abs();
        if diff == 0.0 {
            0.0
        } else {
            diff / self.stderr
        }
    }
}

impl McEstimate<CMat> {
    /// Entrywise mean; the error bar holds the real and imaginary standard
    /// errors in the real and imaginary slots.
    pub fn from_matrices(samples: &[CMat], master_seed: u64) -> Self {
        let n = samples.len();
        assert!(n >= 1, "estimate needs at least one sample");
        let size = samples[0].dim();
        let mut mean = CMat::zeros(size);
        for s in samples {
            mean += *s;
        }
        mean *= 1.0 / n as f64;
        let stderr = CMat::from_fn(size, |r, c| {
            if n < 2 {
                return c64(0.0, 0.0);
            }
            let (mut vr, mut vi) = (0.0, 0.0);
            for s in samples {
                let dz = s[(r, c)] - mean[(r, c)];
                vr += dz.re * dz.re;
                vi += dz.im * dz.im;
            }
            let k = ((n - 1) * n) as f64;
            c64((vr / k).sqrt(), (vi / k).sqrt())
        });
        McEstimate { mean, stderr, paths: n, master_seed }
    }
}

/// Standard error of the difference of two independent estimates.
pub fn combined_stderr(a: f64, b: f64) -> f64 {
    (a * a + b * b).sqrt()
}

/// Execution settings that do not affect results.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Exec {
    pub workers: usize,
}

impl Default for Exec {
    fn default() -> Self {
        Exec { workers: std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1) }
    }
}

impl Exec {
    pub fn with_workers(workers: usize) -> Self {
        Exec { workers: workers.max(1) }
    }
}

/// Runs `work(index, path_seed)` for `index in 0..count` and returns the
/// results in index order. The lowest failing index is reported with its seed.
pub fn run_paths<T, F>(master_seed: u64, count: usize, exec: Exec, work: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64, u64) -> Result<T> + Sync,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(exec.workers.max(1))
        .build()
        .map_err(|e| Error::Config(ConfigError::new(format!("cannot start worker pool: {e}"))))?;
    let results: Vec<Result<T>> = pool.install(|| {
        (0..count as u64)
            .into_par_iter()
            .map(|i| {
                let seed = derive_path_seed(master_seed, i);
                work(i, seed).map_err(|e| Error::PathFailure { path_index: i, path_seed: seed, source: Box::new(e) })
            })
            .collect()
    });
    results.into_iter().collect()
}

/// Scalar path functionals available to [`mc_run`].
pub const FUNCTIONAL_IDS: &[&str] = &["constant", "endpoint_b1", "transport_trace_re", "path_action"];

/// Monte Carlo estimate of a registered scalar path functional.
pub fn mc_run(functional: &str, cfg: &ExperimentConfig, exec: Exec) -> Result<McEstimate<f64>> {
    if !FUNCTIONAL_IDS.contains(&functional) {
        return Err(ConfigError::new(format!(
            "unknown functional '{functional}', expected one of {}",
            FUNCTIONAL_IDS.join(", ")
        ))
        .into());
    }
    let r = cfg.resolve()?;
    let values = run_paths(cfg.seed, cfg.paths, exec, |_, seed| {
        let path = BrownianPath::sample(seed, cfg.steps, r.d)?;
        Ok(match functional {
            "constant" => 1.0,
            "endpoint_b1" => path.endpoint()[0],
            "transport_trace_re" => solve_transport(r.field.as_ref(), &r.x, &path, cfg.scheme)?.endpoint().trace().re,
            _ => path_action(r.field.as_ref(), &r.x, &path),
        })
    })?;
    Ok(McEstimate::from_samples(&values, cfg.seed))
}

/// Pass/fail outcome of one acceptance gate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Gate {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Gate { name: name.into(), passed, detail: detail.into() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gauge::FamilySpec;

    fn cheap(paths: usize) -> ExperimentConfig {
        ExperimentConfig { steps: 16, paths, ..Default::default() }
    }

    #[test]
    fn constant_functional_has_zero_error() {
        let e = mc_run("constant", &cheap(50), Exec::with_workers(2)).unwrap();
        assert_eq!(e.mean, 1.0);
        assert_eq!(e.stderr, 0.0);
        assert_eq!(e.paths, 50);
    }

    #[test]
    fn endpoint_coordinate_is_centred() {
        let e = mc_run("endpoint_b1", &cheap(10_000), Exec::default()).unwrap();
        assert!(e.mean.abs() <= 3.0 * e.stderr, "{e:?}");
        assert!((e.stderr - 0.01).abs() < 1e-3);
    }

    #[test]
    fn results_do_not_depend_on_worker_count() {
        let cfg = ExperimentConfig { family: FamilySpec::Custom { seed: 1, amplitude: 1.0, modes: 2 }, steps: 64, paths: 37, ..Default::default() };
        let a = mc_run("transport_trace_re", &cfg, Exec::with_workers(1)).unwrap();
        let b = mc_run("transport_trace_re", &cfg, Exec::with_workers(5)).unwrap();
        assert_eq!(a.mean.to_bits(), b.mean.to_bits());
        assert_eq!(a.stderr.to_bits(), b.stderr.to_bits());
    }

    #[test]
    fn unknown_functional_is_a_config_error() {
        assert!(matches!(mc_run("nope", &cheap(4), Exec::default()), Err(Error::Config(_))));
    }

    #[test]
    fn failures_carry_the_lowest_seed() {
        let err = run_paths(9, 20, Exec::with_workers(4), |i, _| {
            if i == 7 || i == 13 {
                Err(Error::InvalidInput("boom".into()))
            } else {
                Ok(i)
            }
        })
        .unwrap_err();
        match err {
            Error::PathFailure { path_index, path_seed, .. } => {
                assert_eq!(path_index, 7);
                assert_eq!(path_seed, derive_path_seed(9, 7));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn matrix_estimate_separates_real_and_imaginary_errors() {
        let a = CMat::from_fn(1, |_, _| c64(1.0, 0.0));
        let b = CMat::from_fn(1, |_, _| c64(3.0, 2.0));
        let e = McEstimate::from_matrices(&[a, b], 0);
        assert_eq!(e.mean[(0, 0)], c64(2.0, 1.0));
        assert!((e.stderr[(0, 0)].re - 1.0).abs() < 1e-15);
        assert!((e.stderr[(0, 0)].im - 1.0).abs() < 1e-15);
    }
}
