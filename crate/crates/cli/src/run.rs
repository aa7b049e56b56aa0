use levyt_core::montecarlo::{
    action_functional_check, cesaro_sweep, lemma_decay_check, prop6_check, transport_check, variation_check,
    ym_equivalence_report, Exec, ExperimentConfig, Gate, McEstimate, SweepKind, SweepSummary,
};
use serde::Serialize;
use serde_json::{Map, Value};

use crate::args::Experiment;
use crate::report::SweepCsv;

/// Results of one experiment before they are written out.
pub struct Outcome {
    pub results: Value,
    pub gates: Vec<Gate>,
    pub csvs: Vec<SweepCsv>,
}

fn to_value<T: Serialize>(v: &T) -> levyt_core::Result<Value> {
    serde_json::to_value(v).map_err(|e| levyt_core::Error::InvalidInput(format!("cannot serialise results: {e}")))
}

fn rows(n_values: &[usize], est: &[McEstimate<f64>]) -> Vec<(usize, f64, f64)> {
    n_values.iter().zip(est).map(|(&n, e)| (n, e.mean, e.stderr)).collect()
}

fn sweep_outcome(s: SweepSummary, name: &str) -> levyt_core::Result<Outcome> {
    let csv = SweepCsv { name: name.to_string(), rows: rows(&s.n_values, &s.rms) };
    Ok(Outcome { results: to_value(&s)?, gates: s.gates, csvs: vec![csv] })
}

macro_rules! simple {
    ($report:expr) => {{
        let r = $report;
        Outcome { results: to_value(&r)?, gates: r.gates.clone(), csvs: Vec::new() }
    }};
}

pub fn execute(exp: Experiment, cfg: &ExperimentConfig, exec: Exec) -> levyt_core::Result<Outcome> {
    Ok(match exp {
        Experiment::Transport => simple!(transport_check(cfg, exec)?),
        Experiment::VariationCheck => simple!(variation_check(cfg, exec)?),
        Experiment::Laplacian => sweep_outcome(cesaro_sweep(SweepKind::Laplacian, cfg, exec)?, "laplacian")?,
        Experiment::Divergence => sweep_outcome(cesaro_sweep(SweepKind::Divergence, cfg, exec)?, "divergence")?,
        Experiment::Dalembertian => sweep_outcome(cesaro_sweep(SweepKind::Dalembertian, cfg, exec)?, "dalembertian")?,
        Experiment::Lemmas => {
            let r = lemma_decay_check(cfg, exec)?;
            let csvs = r
                .curves
                .iter()
                .map(|c| SweepCsv { name: format!("lemma{}", c.lemma), rows: rows(&c.n_values, &c.norm) })
                .collect();
            Outcome { results: to_value(&r)?, gates: r.gates, csvs }
        }
        Experiment::Prop6 => simple!(prop6_check(cfg, exec)?),
        Experiment::Action => simple!(action_functional_check(cfg, exec)?),
        Experiment::Equivalence => simple!(ym_equivalence_report(cfg, exec)?),
        Experiment::VerifyAll => verify_all(cfg, exec)?,
    })
}

/// The experiments that apply to the configured family and dimension.
pub fn verify_all_sections(cfg: &ExperimentConfig) -> levyt_core::Result<Vec<Experiment>> {
    let d = cfg.resolve()?.d;
    let mut out = vec![
        Experiment::Transport,
        Experiment::VariationCheck,
        Experiment::Laplacian,
        Experiment::Divergence,
    ];
    if d >= 2 {
        out.push(Experiment::Dalembertian);
    }
    out.extend([Experiment::Lemmas, Experiment::Prop6]);
    if cfg.family.has_integrable_action() {
        out.push(Experiment::Action);
    }
    out.push(Experiment::Equivalence);
    Ok(out)
}

fn verify_all(cfg: &ExperimentConfig, exec: Exec) -> levyt_core::Result<Outcome> {
    let mut results = Map::new();
    let mut gates = Vec::new();
    let mut csvs = Vec::new();
    for section in verify_all_sections(cfg)? {
        let o = execute(section, cfg, exec)?;
        let id = section.id();
        results.insert(id.to_string(), o.results);
        gates.extend(o.gates.into_iter().map(|g| Gate { name: format!("{id}/{}", g.name), ..g }));
        csvs.extend(o.csvs);
    }
    Ok(Outcome { results: Value::Object(results), gates, csvs })
}
