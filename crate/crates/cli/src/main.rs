mod args;
mod report;
mod run;

use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use levyt_core::montecarlo::{replay_path, Exec, ExperimentConfig};
use levyt_core::Error;

use args::{Cli, Command, CommonArgs, Experiment};
use report::{BuildInfo, FailureManifest, NumericalFailure, Report, Timing, SCHEMA_VERSION};

const EXIT_GATE_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run(r) => run_experiment(r.experiment, &r.common),
        Command::Replay(r) => replay(r.path_seed, &r.common),
    }
}

fn config_or_exit(common: &CommonArgs) -> Result<ExperimentConfig, ExitCode> {
    common.build_config().map_err(|e| {
        eprintln!("error: configuration: {e}");
        ExitCode::from(EXIT_CONFIG)
    })
}

fn prepare_out(out: &Path) -> Result<(), ExitCode> {
    fs::create_dir_all(out).map_err(|e| {
        eprintln!("error: cannot create output directory {}: {e}", out.display());
        ExitCode::from(EXIT_CONFIG)
    })
}

fn io_failure(e: std::io::Error) -> ExitCode {
    eprintln!("error: writing output: {e}");
    ExitCode::from(EXIT_NUMERICAL)
}

fn exec_for(common: &CommonArgs) -> Exec {
    common.workers.map(Exec::with_workers).unwrap_or_default()
}

fn replay_command(config_path: &Path, seed: u64, out: &Path) -> String {
    format!("levyt replay --path-seed {seed:#018x} --config {} --out {}", config_path.display(), out.display())
}

fn report_error(experiment: &str, err: &Error, cfg: &ExperimentConfig, out: &Path) -> ExitCode {
    let code = match err {
        Error::Config(_) | Error::InvalidInput(_) => EXIT_CONFIG,
        _ => EXIT_NUMERICAL,
    };
    eprintln!("error: {experiment}: {err}");
    if let Error::PathFailure { path_index, path_seed, .. } = err {
        let config_path = report::output_path(out, experiment, ".config.json");
        let cmd = replay_command(&config_path, *path_seed, out);
        eprintln!("replay with: {cmd}");
        let failure = NumericalFailure {
            experiment: experiment.to_string(),
            error: err.to_string(),
            path_index: Some(*path_index),
            path_seed: Some(format!("{path_seed:#018x}")),
            replay: Some(cmd),
        };
        let path = report::output_path(out, experiment, ".failure.json");
        let written = fs::create_dir_all(out)
            .and_then(|_| report::write_json(&config_path, cfg))
            .and_then(|_| report::write_json(&path, &failure));
        if written.is_err() {
            eprintln!("warning: could not write {}", path.display());
        }
    }
    ExitCode::from(code)
}

fn run_experiment(experiment: Experiment, common: &CommonArgs) -> ExitCode {
    let cfg = match config_or_exit(common) {
        Ok(c) => c,
        Err(code) => return code,
    };
    if let Err(code) = prepare_out(&common.out) {
        return code;
    }
    let exec = exec_for(common);
    let id = experiment.id();
    let start = Instant::now();
    let outcome = match run::execute(experiment, &cfg, exec) {
        Ok(o) => o,
        Err(e) => return report_error(id, &e, &cfg, &common.out),
    };
    let elapsed = start.elapsed().as_secs_f64();

    let passed = outcome.gates.iter().all(|g| g.passed);
    let rep = Report {
        schema_version: SCHEMA_VERSION,
        experiment: id.to_string(),
        config: cfg,
        results: outcome.results,
        gates: outcome.gates,
        passed,
        build: BuildInfo::current(),
    };
    let report_path = report::output_path(&common.out, id, ".report.json");
    let timing = Timing { experiment: id.to_string(), wall_clock_seconds: elapsed, workers: exec.workers };
    let written = report::write_json(&report_path, &rep)
        .and_then(|_| report::write_json(&report::output_path(&common.out, id, ".timing.json"), &timing))
        .and_then(|_| {
            outcome
                .csvs
                .iter()
                .try_for_each(|c| report::write_csv(&common.out.join(format!("{}.csv", c.name)), &c.rows))
        });
    if let Err(e) = written {
        return io_failure(e);
    }

    for g in &rep.gates {
        println!("[{}] {}: {}", if g.passed { "PASS" } else { "FAIL" }, g.name, g.detail);
    }
    println!("{id}: {} ({:.1}s) -> {}", if passed { "passed" } else { "FAILED" }, elapsed, report_path.display());

    if passed {
        return ExitCode::SUCCESS;
    }
    let manifest = FailureManifest {
        experiment: id.to_string(),
        failed_gates: rep.gates.iter().filter(|g| !g.passed).cloned().collect(),
        report: report_path.display().to_string(),
    };
    if let Err(e) = report::write_json(&report::output_path(&common.out, id, ".manifest.json"), &manifest) {
        return io_failure(e);
    }
    ExitCode::from(EXIT_GATE_FAILURE)
}

fn replay(path_seed: u64, common: &CommonArgs) -> ExitCode {
    let cfg = match config_or_exit(common) {
        Ok(c) => c,
        Err(code) => return code,
    };
    if let Err(code) = prepare_out(&common.out) {
        return code;
    }
    let dump = match replay_path(&cfg, path_seed) {
        Ok(d) => d,
        Err(e) => return report_error("replay", &e, &cfg, &common.out),
    };
    let path = common.out.join("replay.json");
    if let Err(e) = report::write_json(&path, &dump) {
        return io_failure(e);
    }
    println!("replay of path seed {path_seed:#018x}: max drift {:.3e} -> {}", dump.max_drift, path.display());
    ExitCode::SUCCESS
}
