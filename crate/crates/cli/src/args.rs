use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use levyt_core::gauge::FamilySpec;
use levyt_core::montecarlo::ExperimentConfig;
use levyt_core::transport::Scheme;
use levyt_core::ConfigError;

#[derive(Debug, Parser)]
#[command(name = "levyt", version, about = "Monte Carlo checks of stochastic Lévy operators on parallel transport")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one experiment and write its report.
    Run(RunArgs),
    /// Re-execute a single path with per-step diagnostics.
    Replay(ReplayArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Experiment {
    Transport,
    VariationCheck,
    Laplacian,
    Divergence,
    Dalembertian,
    Lemmas,
    Prop6,
    Action,
    Equivalence,
    VerifyAll,
}

impl Experiment {
    pub fn id(self) -> &'static str {
        match self {
            Experiment::Transport => "transport",
            Experiment::VariationCheck => "variation-check",
            Experiment::Laplacian => "laplacian",
            Experiment::Divergence => "divergence",
            Experiment::Dalembertian => "dalembertian",
            Experiment::Lemmas => "lemmas",
            Experiment::Prop6 => "prop6",
            Experiment::Action => "action",
            Experiment::Equivalence => "equivalence",
            Experiment::VerifyAll => "verify-all",
        }
    }
}

#[derive(Debug, Args)]
pub struct RunArgs {
    pub experiment: Experiment,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    /// Per-path seed from a failure manifest (decimal or 0x-prefixed hex).
    #[arg(long, value_parser = parse_seed)]
    pub path_seed: u64,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// JSON experiment configuration; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub family: Option<String>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub matrix_size: Option<usize>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub paths: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub modes: Option<Vec<usize>>,
    #[arg(long, value_parser = parse_scheme)]
    pub scheme: Option<Scheme>,
    /// Master seed; the LEVYT_SEED variable is used when the flag is absent.
    #[arg(long, env = "LEVYT_SEED", value_parser = parse_seed)]
    pub seed: Option<u64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub x: Option<Vec<f64>>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub x_samples: Option<usize>,
    /// Field strength of constant_abelian.
    #[arg(long)]
    pub f: Option<f64>,
    /// Instanton scale of bpst.
    #[arg(long)]
    pub rho: Option<f64>,
    /// Amplitude of sine_nonym or custom.
    #[arg(long)]
    pub amplitude: Option<f64>,
    #[arg(long, default_value = "levyt-out")]
    pub out: PathBuf,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long)]
    pub workers: Option<usize>,
}

fn parse_seed(s: &str) -> Result<u64, String> {
    let t = s.trim();
    match t.strip_prefix("0x").or_else(|| t.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(hex, 16),
        None => t.parse(),
    }
    .map_err(|e| format!("invalid seed '{s}': {e}"))
}

fn parse_scheme(s: &str) -> Result<Scheme, String> {
    Scheme::from_id(s).ok_or_else(|| format!("unknown scheme '{s}' (expected geometric_midpoint or heun_projected)"))
}

fn read_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::new(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| ConfigError::new(format!("invalid config {}: {e}", path.display())))
}

impl CommonArgs {
    /// Config file (or defaults) with every given flag applied, validated.
    pub fn build_config(&self) -> Result<ExperimentConfig, ConfigError> {
        let mut cfg = match &self.config {
            Some(path) => read_config(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(id) = &self.family {
            if id != cfg.family.id() {
                cfg.family = FamilySpec::from_id(id)?;
            }
        }
        self.apply_family_params(&mut cfg.family)?;
        macro_rules! set {
            ($($field:ident),*) => {$(if let Some(v) = &self.$field { cfg.$field = v.clone(); })*};
        }
        set!(steps, paths, modes, scheme, seed, epsilon, x_samples);
        if let Some(d) = self.dim {
            cfg.dim = Some(d);
        }
        if let Some(n) = self.matrix_size {
            cfg.matrix_size = Some(n);
        }
        if let Some(x) = &self.x {
            cfg.x = Some(x.clone());
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply_family_params(&self, family: &mut FamilySpec) -> Result<(), ConfigError> {
        let id = family.id().to_string();
        let mismatch = |flag: &str| ConfigError::new(format!("--{flag} does not apply to family '{id}'"));
        if let Some(v) = self.f {
            match family {
                FamilySpec::ConstantAbelian { f } => *f = v,
                _ => return Err(mismatch("f")),
            }
        }
        if let Some(v) = self.rho {
            match family {
                FamilySpec::Bpst { rho } => *rho = v,
                _ => return Err(mismatch("rho")),
            }
        }
        if let Some(v) = self.amplitude {
            match family {
                FamilySpec::SineNonym { amplitude } | FamilySpec::Custom { amplitude, .. } => *amplitude = v,
                _ => return Err(mismatch("amplitude")),
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> CommonArgs {
        let mut full = vec!["levyt", "run", "laplacian"];
        full.extend_from_slice(args);
        match Cli::try_parse_from(full).unwrap().command {
            Command::Run(r) => r.common,
            Command::Replay(_) => unreachable!(),
        }
    }

    #[test]
    fn flags_override_defaults() {
        let c = parse(&["--family", "constant_abelian", "--f", "2", "--modes", "4,8", "--x", "-0.5,1", "--seed", "0x10"]);
        let cfg = c.build_config().unwrap();
        assert_eq!(cfg.family, FamilySpec::ConstantAbelian { f: 2.0 });
        assert_eq!(cfg.modes, vec![4, 8]);
        assert_eq!(cfg.x, Some(vec![-0.5, 1.0]));
        assert_eq!(cfg.seed, 16);
    }

    #[test]
    fn family_parameter_must_match() {
        let c = parse(&["--family", "bpst", "--f", "2"]);
        assert!(c.build_config().is_err());
    }

    #[test]
    fn seeds_parse_in_hex_and_decimal() {
        assert_eq!(parse_seed("0xff").unwrap(), 255);
        assert_eq!(parse_seed("12").unwrap(), 12);
        assert!(parse_seed("zz").is_err());
    }
}
