//! Error bars are honest: over many independent seeds, an estimator with a
//! known exact answer lands within three standard errors almost always.

use levyt_core::gauge::FamilySpec;
use levyt_core::montecarlo::{prop6_check, Exec, ExperimentConfig};

#[test]
fn abelian_energy_estimate_covers_the_exact_value() {
    let exec = Exec::default();
    let mut inside = 0;
    let mut z_scores = Vec::new();
    for seed in 0..100u64 {
        let cfg = ExperimentConfig {
            family: FamilySpec::ConstantAbelian { f: 1.0 },
            steps: 256,
            paths: 200,
            modes: vec![8],
            seed: 1000 + seed,
            ..Default::default()
        };
        let r = prop6_check(&cfg, exec).unwrap();
        let z = r.lhs.z_score(2.0);
        z_scores.push(z);
        if z <= 3.0 {
            inside += 1;
        }
    }
    assert!(inside >= 99, "only {inside}/100 within 3 stderr; z = {z_scores:?}");
    let mean_sq = z_scores.iter().map(|z| z * z).sum::<f64>() / z_scores.len() as f64;
    assert!((0.5..=2.0).contains(&mean_sq), "mean squared z-score {mean_sq:.3}");
}
