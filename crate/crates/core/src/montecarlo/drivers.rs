use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ConfigError, Result};
use crate::gauge::{action_density, ConnectionField, FamilySpec, PureGauge};
use crate::levyops::{
    dalembertian_closed, dalembertian_partial, directional_closed, divergence_closed, divergence_partial, laplacian_closed,
    laplacian_partial, ModeCache, ModeOptions,
};
use crate::liealg::{c64, CMat};
use crate::paths::{derive_path_seed, sine_mode, BrownianPath, Direction};
use crate::quadrature::{action_integral, heat_kernel_residual};
use crate::transport::{process_grids, solve_transport, ProcessGrid, ProcessLevel, Scheme, TransportGrid};
use crate::variation::{
    b_variation, fd_b_variation, fd_second_variation, fd_variation, fd_variation_inv, first_variation_u,
    first_variation_uinv, second_variation_u, FdOptions, MalliavinKernel,
};

use super::{combined_stderr, run_paths, Exec, ExperimentConfig, Gate, McEstimate, Proposal};

/// Non-monotonicity tolerated between successive sweep points.
pub const SWEEP_JITTER: f64 = 1.10;
/// Fraction of the target scale the final partial sum must reach.
pub const SWEEP_RELATIVE: f64 = 0.10;
/// Squared norms below this are treated as exact zeros.
pub const ROUNDOFF_FLOOR: f64 = 1e-20;
/// Decay factor between the first and last remainder norm.
pub const LEMMA_DECAY: f64 = 0.25;

/// `∫_0^1 −Σ tr(F_μν F_μν)(x + b_t) dt` by the trapezoid rule.
pub fn path_action(field: &dyn ConnectionField, x: &[f64], path: &BrownianPath) -> f64 {
    let m = path.steps();
    let mut y = vec![0.0; x.len()];
    let mut acc = 0.0;
    for i in 0..=m {
        for (k, v) in y.iter_mut().enumerate() {
            *v = x[k] + path.at(i)[k];
        }
        let w = if i == 0 || i == m { 0.5 } else { 1.0 };
        acc += w * action_density(field, &y);
    }
    acc * path.dt()
}

fn grids(
    field: &dyn ConnectionField,
    x: &[f64],
    path: &BrownianPath,
    scheme: Scheme,
    level: ProcessLevel,
) -> Result<(TransportGrid, ProcessGrid)> {
    let tg = solve_transport(field, x, path, scheme)?;
    let pg = process_grids(field, path, &tg, level);
    Ok((tg, pg))
}

fn relative_error(analytic: &CMat, reference: &CMat) -> f64 {
    let diff = (*analytic - *reference).frob_norm();
    if diff == 0.0 {
        0.0
    } else {
        diff / reference.frob_norm().max(1e-300)
    }
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    if n == 0 {
        0.0
    } else if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

fn fmt_est(e: &McEstimate<f64>) -> String {
    format!("{:.6e} ± {:.2e}", e.mean, e.stderr)
}

// ---------------------------------------------------------------- transport

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransportReport {
    pub max_drift: f64,
    pub mean_endpoint: McEstimate<CMat>,
    /// `‖U_geometric(1) − U_heun(1)‖_F` per path.
    pub scheme_gap: McEstimate<f64>,
    /// Largest pathwise distance to the analytic transport, when one exists.
    pub closed_form_error: Option<f64>,
    pub gates: Vec<Gate>,
}

/// Analytic `U(1)` for families where the transport is explicit.
pub fn closed_form_transport(spec: &FamilySpec, d: usize, n: usize, x: &[f64], path: &BrownianPath) -> Option<CMat> {
    let end: Vec<f64> = x.iter().zip(path.endpoint()).map(|(a, b)| a + b).collect();
    match *spec {
        FamilySpec::Zero => Some(CMat::identity(n)),
        FamilySpec::PureGauge { a, b } => {
            let g = PureGauge { d, a, b };
            Some(g.group_element(&end).adjoint().matmul(&g.group_element(x)))
        }
        FamilySpec::ConstantAbelian { f } => {
            // exp(−(if/2) ∮ (y⁰dy¹ − y¹dy⁰)) along the piecewise-linear path.
            let mut phase = 0.0;
            for i in 0..path.steps() {
                let y0 = x[0] + 0.5 * (path.at(i)[0] + path.at(i + 1)[0]);
                let y1 = x[1] + 0.5 * (path.at(i)[1] + path.at(i + 1)[1]);
                phase -= 0.5 * f * (y0 * path.increment(i, 1) - y1 * path.increment(i, 0));
            }
            Some(CMat::scalar(n, c64(0.0, phase).exp()))
        }
        _ => None,
    }
}

pub fn transport_check(cfg: &ExperimentConfig, exec: Exec) -> Result<TransportReport> {
    let r = cfg.resolve()?;
    let other = match cfg.scheme {
        Scheme::GeometricMidpoint => Scheme::HeunProjected,
        Scheme::HeunProjected => Scheme::GeometricMidpoint,
    };
    let rows = run_paths(cfg.seed, cfg.paths, exec, |_, seed| {
        let path = BrownianPath::sample(seed, cfg.steps, r.d)?;
        let tg = solve_transport(r.field.as_ref(), &r.x, &path, cfg.scheme)?;
        let alt = solve_transport(r.field.as_ref(), &r.x, &path, other)?;
        let closed = closed_form_transport(&cfg.family, r.d, r.n, &r.x, &path).map(|c| (c - *tg.endpoint()).frob_norm());
        Ok((tg.max_drift(), *tg.endpoint(), (*tg.endpoint() - *alt.endpoint()).frob_norm(), closed))
    })?;
    let max_drift = rows.iter().map(|r| r.0).fold(0.0, f64::max);
    let endpoints: Vec<CMat> = rows.iter().map(|r| r.1).collect();
    let gaps: Vec<f64> = rows.iter().map(|r| r.2).collect();
    let closed_form_error = rows.iter().map(|r| r.3).try_fold(0.0f64, |acc, e| e.map(|e| acc.max(e)));
    let mut gates = vec![Gate::new("transport_unitarity", max_drift <= 1e-10, format!("max drift {max_drift:.3e} (limit 1e-10)"))];
    if let Some(err) = closed_form_error {
        let limit = match cfg.family {
            FamilySpec::PureGauge { .. } => 1e-4,
            _ => 1e-6,
        };
        gates.push(Gate::new("transport_closed_form", err <= limit, format!("max pathwise error {err:.3e} (limit {limit:.0e})")));
    }
    Ok(TransportReport {
        max_drift,
        mean_endpoint: McEstimate::from_matrices(&endpoints, cfg.seed),
        scheme_gap: McEstimate::from_samples(&gaps, cfg.seed),
        closed_form_error,
        gates,
    })
}

// ---------------------------------------------------------------- variation check

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariationCheckReport {
    /// Median relative error against the finite-difference oracle, per formula.
    pub median_relative_error: Vec<(String, f64)>,
    pub richardson_warnings: usize,
    pub gates: Vec<Gate>,
}

pub const FIRST_ORDER_TOL: f64 = 1e-2;
pub const SECOND_ORDER_TOL: f64 = 3e-2;

pub fn variation_check(cfg: &ExperimentConfig, exec: Exec) -> Result<VariationCheckReport> {
    let r = cfg.resolve()?;
    let f = r.field.as_ref();
    let u = Direction::Sine { component: 0, mode: 1 };
    let v = Direction::Sine { component: 1.min(r.d - 1), mode: 2 };
    let ramp = Direction::Ramp { slope: (0..r.d).map(|k| 1.0 / (k + 1) as f64).collect() };
    let opts = FdOptions { epsilon: cfg.epsilon, richardson: true };
    let rows = run_paths(cfg.seed, cfg.paths, exec, |_, seed| {
        let path = BrownianPath::sample(seed, cfg.steps, r.d)?;
        let (tg, pg) = grids(f, &r.x, &path, cfg.scheme, ProcessLevel::Full)?;
        let mut errs = Vec::with_capacity(6);
        let mut warnings = 0usize;
        let mut push = |name: &'static str, an: CMat, fd: crate::variation::FdEstimate| {
            warnings += fd.warning.is_some() as usize;
            errs.push((name, relative_error(&an, &fd.value)));
        };
        let first = first_variation_u(f, &path, &tg, &pg, &u)?.value;
        push("first_variation", first, fd_variation(f, &r.x, &path, cfg.scheme, &u, opts)?);
        let boundary = first_variation_u(f, &path, &tg, &pg, &ramp)?.value;
        push("first_variation_boundary", boundary, fd_variation(f, &r.x, &path, cfg.scheme, &ramp, opts)?);
        let inv = first_variation_uinv(f, &path, &tg, &pg, &u)?.value;
        push("inverse_variation", inv, fd_variation_inv(f, &r.x, &path, cfg.scheme, &u, opts)?);
        let second = second_variation_u(&path, &tg, &pg, &u, &v)?.value;
        push("second_variation", second, fd_second_variation(f, &r.x, &path, cfg.scheme, &u, &v, opts)?);
        let bv = b_variation(&path, &tg, &pg, &u, &v)?.value;
        push("b_variation", bv, fd_b_variation(f, &r.x, &path, cfg.scheme, &u, &v, opts)?);
        let z = MalliavinKernel::new(f, &path, &tg).reconstruct(&path, &u);
        errs.push(("malliavin_reconstruction", relative_error(&z, &first)));
        Ok((errs, warnings))
    })?;
    let names: Vec<&'static str> = rows[0].0.iter().map(|e| e.0).collect();
    let mut medians = Vec::new();
    let mut gates = Vec::new();
    for (k, name) in names.iter().enumerate() {
        let mut col: Vec<f64> = rows.iter().map(|row| row.0[k].1).collect();
        let med = median(&mut col);
        let tol = match *name {
            "second_variation" => SECOND_ORDER_TOL,
            _ => FIRST_ORDER_TOL,
        };
        gates.push(Gate::new(format!("fd_{name}"), med <= tol, format!("median relative error {med:.3e} (limit {tol:.0e})")));
        medians.push((name.to_string(), med));
    }
    Ok(VariationCheckReport {
        median_relative_error: medians,
        richardson_warnings: rows.iter().map(|r| r.1).sum(),
        gates,
    })
}

// ---------------------------------------------------------------- Cesàro sweeps

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    Laplacian,
    Divergence,
    Dalembertian,
}

impl SweepKind {
    pub fn id(self) -> &'static str {
        match self {
            SweepKind::Laplacian => "laplacian",
            SweepKind::Divergence => "divergence",
            SweepKind::Dalembertian => "dalembertian",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub kind: SweepKind,
    pub n_values: Vec<usize>,
    /// RMS over paths of `‖partial(n) − closed‖_F`.
    pub rms: Vec<McEstimate<f64>>,
    /// RMS of `‖closed‖_F`.
    pub closed_rms: McEstimate<f64>,
    /// RMS of the scale the relative gate is measured against.
    pub scale_rms: McEstimate<f64>,
    /// Largest `‖P + P†‖_F` over all partial sums, for the divergence.
    pub max_anti_hermitian_defect: Option<f64>,
    pub gates: Vec<Gate>,
}

/// Per-path squared errors at each `n`, squared closed norm and squared scale.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepPathValues {
    pub errors: Vec<f64>,
    pub closed: f64,
    pub scale: f64,
    pub defect: f64,
}

pub fn sweep_path_values(kind: SweepKind, cfg: &ExperimentConfig, path: &BrownianPath) -> Result<SweepPathValues> {
    let r = cfg.resolve()?;
    let (tg, pg) = grids(r.field.as_ref(), &r.x, path, cfg.scheme, ProcessLevel::Contracted)?;
    let cache = ModeCache::build(path, &pg, cfg.max_modes(), ModeOptions::default())?;
    let (closed, scale) = match kind {
        SweepKind::Laplacian => {
            let c = laplacian_closed(path, &tg, &pg);
            (c, c.frob_norm())
        }
        SweepKind::Divergence => {
            let c = divergence_closed(path, &pg);
            (c, c.frob_norm())
        }
        SweepKind::Dalembertian => {
            let c = dalembertian_closed(path, &tg, &pg)?;
            let s: f64 = (0..r.d).map(|mu| directional_closed(path, &pg, mu).frob_norm()).sum();
            (c, s)
        }
    };
    let mut errors = Vec::with_capacity(cfg.modes.len());
    let mut defect: f64 = 0.0;
    for &n in &cfg.modes {
        let p = match kind {
            SweepKind::Laplacian => laplacian_partial(&cache, &tg, n)?,
            SweepKind::Divergence => {
                let p = divergence_partial(&cache, n)?;
                defect = defect.max(p.anti_hermitian_defect());
                p
            }
            SweepKind::Dalembertian => dalembertian_partial(&cache, &tg, n)?,
        };
        errors.push((p - closed).frob_norm_sqr());
    }
    Ok(SweepPathValues { errors, closed: closed.frob_norm_sqr(), scale: scale * scale, defect })
}

pub fn cesaro_sweep(kind: SweepKind, cfg: &ExperimentConfig, exec: Exec) -> Result<SweepSummary> {
    let r = cfg.resolve()?;
    if kind == SweepKind::Dalembertian && r.d < 2 {
        return Err(ConfigError::new("the d'Alembertian needs d >= 2").into());
    }
    let rows = run_paths(cfg.seed, cfg.paths, exec, |_, seed| {
        let path = BrownianPath::sample(seed, cfg.steps, r.d)?;
        sweep_path_values(kind, cfg, &path)
    })?;
    let col = |f: &dyn Fn(&SweepPathValues) -> f64| -> McEstimate<f64> {
        let v: Vec<f64> = rows.iter().map(f).collect();
        McEstimate::from_samples(&v, cfg.seed).sqrt()
    };
    let rms: Vec<McEstimate<f64>> = (0..cfg.modes.len()).map(|k| col(&|p| p.errors[k])).collect();
    let closed_rms = col(&|p| p.closed);
    let scale_rms = col(&|p| p.scale);
    let defect = rows.iter().map(|p| p.defect).fold(0.0, f64::max);
    let id = kind.id();
    let mut gates = Vec::new();
    let worst = rms
        .windows(2)
        .map(|w| if w[1].mean <= 1e-12 { 0.0 } else { w[1].mean / w[0].mean.max(1e-300) })
        .fold(0.0, f64::max);
    gates.push(Gate::new(
        format!("{id}_monotone"),
        worst <= SWEEP_JITTER,
        format!("largest successive RMS ratio {worst:.3} (limit {SWEEP_JITTER})"),
    ));
    let last = rms.last().map(|e| e.mean).unwrap_or(0.0);
    if scale_rms.mean > 1e-9 {
        let limit = SWEEP_RELATIVE * scale_rms.mean;
        gates.push(Gate::new(
            format!("{id}_relative"),
            last <= limit,
            format!("RMS at n={} is {last:.4e}, limit {limit:.4e}", cfg.max_modes()),
        ));
    }
    let max_anti_hermitian_defect = (kind == SweepKind::Divergence).then_some(defect);
    if kind == SweepKind::Divergence {
        gates.push(Gate::new("divergence_anti_hermitian", defect <= 1e-9, format!("max defect {defect:.3e} (limit 1e-9)")));
    }
    Ok(SweepSummary { kind, n_values: cfg.modes.clone(), rms, closed_rms, scale_rms, max_anti_hermitian_defect, gates })
}

pub fn theorem1_sweep(cfg: &ExperimentConfig, exec: Exec) -> Result<SweepSummary> {
    cesaro_sweep(SweepKind::Laplacian, cfg, exec)
}

pub fn divergence_sweep(cfg: &ExperimentConfig, exec: Exec) -> Result<SweepSummary> {
    cesaro_sweep(SweepKind::Divergence, cfg, exec)
}

pub fn dalembertian_sweep(cfg: &ExperimentConfig, exec: Exec) -> Result<SweepSummary> {
    cesaro_sweep(SweepKind::Dalembertian, cfg, exec)
}

// ---------------------------------------------------------------- YM equivalence

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    /// `E‖−∫ C_ν db^ν‖²_F`.
    pub closed_norm_sq: McEstimate<f64>,
    /// `E‖divergence partial(n)‖²_F` at the largest configured `n`.
    pub partial_norm_sq: McEstimate<f64>,
    pub partial_modes: usize,
    /// Heat-kernel quadrature of `∫_0^1 E‖Σ_μ ∇_μ F_μν(x + b_t)‖² dt`.
    pub quadrature: f64,
    pub known_ym_solution: bool,
    pub gates: Vec<Gate>,
}

pub fn ym_equivalence_report(cfg: &ExperimentConfig, exec: Exec) -> Result<EquivalenceReport> {
    let r = cfg.resolve()?;
    let n = cfg.max_modes();
    let rows = run_paths(cfg.seed, cfg.paths, exec, |_, seed| {
        let path = BrownianPath::sample(seed, cfg.steps, r.d)?;
        let (_, pg) = grids(r.field.as_ref(), &r.x, &path, cfg.scheme, ProcessLevel::Contracted)?;
        let cache = ModeCache::build(&path, &pg, n, ModeOptions::default())?;
        Ok((divergence_closed(&path, &pg).frob_norm_sqr(), divergence_partial(&cache, n)?.frob_norm_sqr()))
    })?;
    let closed: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let partial: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let closed_norm_sq = McEstimate::from_samples(&closed, cfg.seed);
    let partial_norm_sq = McEstimate::from_samples(&partial, cfg.seed);
    let quadrature = heat_kernel_residual(r.field.as_ref(), &r.x, cfg.quadrature)?;
    let known = cfg.family.is_known_ym_solution();
    let mut gates = Vec::new();
    if known {
        let limit = (3.0 * closed_norm_sq.stderr).max(ROUNDOFF_FLOOR);
        gates.push(Gate::new(
            "equivalence_zero_divergence",
            closed_norm_sq.mean <= limit,
            format!("E‖div‖² = {} (limit {limit:.3e})", fmt_est(&closed_norm_sq)),
        ));
        gates.push(Gate::new(
            "equivalence_zero_quadrature",
            quadrature <= ROUNDOFF_FLOOR,
            format!("quadrature {quadrature:.3e}"),
        ));
    } else {
        let z = closed_norm_sq.z_score(quadrature);
        gates.push(Gate::new(
            "equivalence_matches_quadrature",
            z <= 3.0,
            format!("E‖div‖² = {} vs quadrature {quadrature:.6e} ({z:.2} stderr)", fmt_est(&closed_norm_sq)),
        ));
        let positive = closed_norm_sq.mean / closed_norm_sq.stderr.max(1e-300);
        gates.push(Gate::new(
            "equivalence_positive",
            positive >= 5.0,
            format!("E‖div‖² is {positive:.1} stderr above zero (limit 5)"),
        ));
    }
    Ok(EquivalenceReport { closed_norm_sq, partial_norm_sq, partial_modes: n, quadrature, known_ym_solution: known, gates })
}

// ---------------------------------------------------------------- remainder decay

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaCurve {
    pub lemma: u8,
    pub n_values: Vec<usize>,
    /// `‖R_n‖₂ = sqrt(E‖R_n‖²_F)` at each `n`.
    pub norm: Vec<McEstimate<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaReport {
    pub curves: Vec<LemmaCurve>,
    pub gates: Vec<Gate>,
}

/// Squared Frobenius norms of the four remainder terms at each `n` in
/// `n_values`, with `H = M = L_{1·}` and `K = R = J_{1,1,2}` (zero-based
/// `L_{0·}` and `J_{0,0,1}`).
pub fn lemma_remainders(path: &BrownianPath, pg: &ProcessGrid, n_values: &[usize]) -> Vec<[f64; 4]> {
    let (d, n) = (pg.dim(), pg.matrix_size());
    let m = path.steps();
    let dt = path.dt();
    let kdir = if d > 1 { 1 } else { 0 };
    let k_proc: Vec<CMat> = (0..=m).map(|i| *pg.jdiag(i, 0, kdir)).collect();
    let mut db_sum = vec![CMat::zeros(n); m];
    for (i, a) in db_sum.iter_mut().enumerate() {
        for mu in 0..d {
            a.axpy(path.increment(i, mu), pg.l(i, 0, mu));
        }
    }
    let n_max = n_values.last().copied().unwrap_or(0);
    let mut totals = [CMat::zeros(n); 4];
    let mut out = Vec::with_capacity(n_values.len());
    let mut next = 0;
    let mut h = vec![0.0; m + 1];
    for k in 1..=n_max {
        for (i, hv) in h.iter_mut().enumerate() {
            *hv = sine_mode(k, path.time(i));
        }
        let mut g = CMat::zeros(n);
        let mut kc = CMat::zeros(n);
        for i in 0..=m {
            let w = if i == 0 || i == m { 0.5 * dt } else { dt };
            totals[2].add_scaled_matmul(w * h[i], &g, &k_proc[i]);
            totals[3].add_scaled_matmul(w * h[i], &kc, &k_proc[i]);
            if i < m {
                totals[0].add_scaled_matmul(h[i], &g, &db_sum[i]);
                totals[1].add_scaled_matmul(h[i], &kc, &db_sum[i]);
                g.axpy(h[i], &db_sum[i]);
                kc.axpy(0.5 * dt * h[i], &k_proc[i]);
                kc.axpy(0.5 * dt * h[i + 1], &k_proc[i + 1]);
            }
        }
        if next < n_values.len() && n_values[next] == k {
            let inv = 1.0 / k as f64;
            out.push([0, 1, 2, 3].map(|j| totals[j].scale(inv).frob_norm_sqr()));
            next += 1;
        }
    }
    out
}

pub fn lemma_decay_check(cfg: &ExperimentConfig, exec: Exec) -> Result<LemmaReport> {
    let r = cfg.resolve()?;
    let rows = run_paths(cfg.seed, cfg.paths, exec, |_, seed| {
        let path = BrownianPath::sample(seed, cfg.steps, r.d)?;
        let (_, pg) = grids(r.field.as_ref(), &r.x, &path, cfg.scheme, ProcessLevel::Contracted)?;
        Ok(lemma_remainders(&path, &pg, &cfg.modes))
    })?;
    let mut curves = Vec::new();
    let mut gates = Vec::new();
    for lemma in 0..4 {
        let norm: Vec<McEstimate<f64>> = (0..cfg.modes.len())
            .map(|k| {
                let v: Vec<f64> = rows.iter().map(|row| row[k][lemma]).collect();
                McEstimate::from_samples(&v, cfg.seed).sqrt()
            })
            .collect();
        let first = norm[0].mean;
        let last = norm[norm.len() - 1].mean;
        let passed = last <= LEMMA_DECAY * first || (first <= 1e-12 && last <= 1e-12);
        gates.push(Gate::new(
            format!("lemma{}_decay", lemma + 1),
            passed,
            format!(
                "‖R_n‖₂ {:.4e} at n={} vs {:.4e} at n={} (limit factor {LEMMA_DECAY})",
                last,
                cfg.max_modes(),
                first,
                cfg.modes[0]
            ),
        ));
        curves.push(LemmaCurve { lemma: lemma as u8 + 1, n_values: cfg.modes.clone(), norm });
    }
    if r.field.bound().is_none() && cfg.family != FamilySpec::Zero {
        gates.push(Gate::new("lemma_bounded_processes", true, "warning: family has unbounded L/J processes on ℝ^d"));
    }
    Ok(LemmaReport { curves, gates })
}

// ---------------------------------------------------------------- energy identity

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prop6Report {
    pub modes: usize,
    /// `(1/n) Σ_k Σ_μ E tr(∂U⁻¹ ∂U)` at `n = modes`.
    pub lhs: McEstimate<f64>,
    /// `E ∫ −tr(F F)(x + b_t) dt` by quadrature along each path.
    pub rhs: McEstimate<f64>,
    /// Pathwise `lhs − rhs` on common paths; its error bar is much tighter
    /// than the combined one and exposes finite-`n` and finite-`M` bias.
    pub difference: McEstimate<f64>,
    pub max_imaginary: f64,
    /// Analytic right-hand side when available.
    pub exact_rhs: Option<f64>,
    pub gates: Vec<Gate>,
}

fn exact_action_density(spec: &FamilySpec, n: usize) -> Option<f64> {
    match *spec {
        FamilySpec::Zero | FamilySpec::PureGauge { .. } => Some(0.0),
        FamilySpec::ConstantAbelian { f } => Some(2.0 * f * f * n as f64),
        _ => None,
    }
}

pub fn prop6_check(cfg: &ExperimentConfig, exec: Exec) -> Result<Prop6Report> {
    let r = cfg.resolve()?;
    let n = cfg.max_modes();
    let rows = run_paths(cfg.seed, cfg.paths, exec, |_, seed| {
        let path = BrownianPath::sample(seed, cfg.steps, r.d)?;
        let (_, pg) = grids(r.field.as_ref(), &r.x, &path, cfg.scheme, ProcessLevel::Contracted)?;
        let cache = ModeCache::build(&path, &pg, n, ModeOptions::default())?;
        let lhs = cache.energy_partial(n)?;
        Ok((lhs.re, lhs.im.abs(), path_action(r.field.as_ref(), &r.x, &path)))
    })?;
    let lhs_v: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let rhs_v: Vec<f64> = rows.iter().map(|r| r.2).collect();
    let diff_v: Vec<f64> = rows.iter().map(|r| r.0 - r.2).collect();
    let max_imaginary = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    let lhs = McEstimate::from_samples(&lhs_v, cfg.seed);
    let rhs = McEstimate::from_samples(&rhs_v, cfg.seed);
    let difference = McEstimate::from_samples(&diff_v, cfg.seed);
    let exact_rhs = exact_action_density(&cfg.family, r.n);
    let mut gates = vec![Gate::new(
        "prop6_real",
        max_imaginary <= 1e-9,
        format!("max |Im| {max_imaginary:.3e} (limit 1e-9)"),
    )];
    let combined = combined_stderr(lhs.stderr, rhs.stderr);
    let gap = (lhs.mean - rhs.mean).abs();
    let z = if gap == 0.0 { 0.0 } else { gap / combined };
    gates.push(Gate::new(
        "prop6_lhs_matches_rhs",
        z <= 3.0,
        format!(
            "LHS {} vs RHS {} ({z:.2} combined stderr; paired difference {:.2} stderr)",
            fmt_est(&lhs),
            fmt_est(&rhs),
            difference.z_score(0.0)
        ),
    ));
    if let Some(exact) = exact_rhs {
        let z = lhs.z_score(exact);
        gates.push(Gate::new("prop6_lhs_matches_exact", z <= 3.0, format!("LHS {} vs exact {exact} ({z:.2} stderr)", fmt_est(&lhs))));
    }
    Ok(Prop6Report { modes: n, lhs, rhs, difference, max_imaginary, exact_rhs, gates })
}

// ---------------------------------------------------------------- action functional

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActionReport {
    pub modes: usize,
    pub proposal: Proposal,
    pub x_samples: usize,
    /// Importance-sampled `∫ dx (1/n) Σ_k Σ_μ E tr(∂U⁻¹ ∂U)`.
    pub lhs: McEstimate<f64>,
    /// Radial quadrature of `−∫ tr(F_μν F_μν) dx`.
    pub rhs: f64,
    pub gates: Vec<Gate>,
}

pub fn action_functional_check(cfg: &ExperimentConfig, exec: Exec) -> Result<ActionReport> {
    if !cfg.family.has_integrable_action() {
        return Err(ConfigError::new(format!(
            "family `{}` does not have an integrable action density on ℝ^d",
            cfg.family.id()
        ))
        .into());
    }
    let r = cfg.resolve()?;
    let rhs = action_integral(&cfg.family, r.d, cfg.radial_nodes)?;
    let n = cfg.max_modes();
    let proposal = cfg.proposal;
    let samples = run_paths(cfg.seed, cfg.x_samples, exec, |_, seed| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = proposal.sample(r.d, &mut rng);
        let path = BrownianPath::sample(derive_path_seed(seed, 0), cfg.steps, r.d)?;
        let (_, pg) = grids(r.field.as_ref(), &x, &path, cfg.scheme, ProcessLevel::Contracted)?;
        let cache = ModeCache::build(&path, &pg, n, ModeOptions::default())?;
        Ok(cache.energy_partial(n)?.re * (-proposal.ln_density(&x)).exp())
    })?;
    let lhs = McEstimate::from_samples(&samples, cfg.seed);
    let z = lhs.z_score(rhs);
    let gates = vec![Gate::new(
        "action_identity",
        z <= 3.0,
        format!("LHS {} vs radial quadrature {rhs:.6e} ({z:.2} stderr)", fmt_est(&lhs)),
    )];
    Ok(ActionReport { modes: n, proposal, x_samples: cfg.x_samples, lhs, rhs, gates })
}

// ---------------------------------------------------------------- replay

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplayDump {
    pub path_seed: u64,
    pub steps: usize,
    pub max_drift: f64,
    /// `(step, drift)` at up to 64 evenly spaced steps.
    pub drift_samples: Vec<(usize, f64)>,
    pub scheme_gap: f64,
    pub endpoint: CMat,
    pub n_values: Vec<usize>,
    pub laplacian: SweepPathValuesDump,
    pub divergence: SweepPathValuesDump,
    pub divergence_closed: CMat,
    pub laplacian_closed: CMat,
    pub second_variation_terms: Vec<(String, CMat)>,
    pub prop6_lhs: f64,
    pub path_action: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPathValuesDump {
    pub squared_errors: Vec<f64>,
    pub closed_norm_sq: f64,
}

impl From<SweepPathValues> for SweepPathValuesDump {
    fn from(v: SweepPathValues) -> Self {
        SweepPathValuesDump { squared_errors: v.errors, closed_norm_sq: v.closed }
    }
}

/// Re-executes one path with per-step diagnostics.
pub fn replay_path(cfg: &ExperimentConfig, path_seed: u64) -> Result<ReplayDump> {
    let r = cfg.resolve()?;
    let f = r.field.as_ref();
    let path = BrownianPath::sample(path_seed, cfg.steps, r.d)?;
    let other = match cfg.scheme {
        Scheme::GeometricMidpoint => Scheme::HeunProjected,
        Scheme::HeunProjected => Scheme::GeometricMidpoint,
    };
    let (tg, pg) = grids(f, &r.x, &path, cfg.scheme, ProcessLevel::Full)?;
    let alt = solve_transport(f, &r.x, &path, other)?;
    let stride = (cfg.steps / 64).max(1);
    let drift_samples = (0..=cfg.steps).step_by(stride).map(|i| (i, tg.drift()[i])).collect();
    let n = cfg.max_modes();
    let cache = ModeCache::build(&path, &pg, n, ModeOptions::default())?;
    let u = Direction::Sine { component: 0, mode: 1 };
    let second = second_variation_u(&path, &tg, &pg, &u, &u)?;
    Ok(ReplayDump {
        path_seed,
        steps: cfg.steps,
        max_drift: tg.max_drift(),
        drift_samples,
        scheme_gap: (*tg.endpoint() - *alt.endpoint()).frob_norm(),
        endpoint: *tg.endpoint(),
        n_values: cfg.modes.clone(),
        laplacian: sweep_path_values(SweepKind::Laplacian, cfg, &path)?.into(),
        divergence: sweep_path_values(SweepKind::Divergence, cfg, &path)?.into(),
        divergence_closed: divergence_closed(&path, &pg),
        laplacian_closed: laplacian_closed(&path, &tg, &pg),
        second_variation_terms: second.breakdown.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        prop6_lhs: cache.energy_partial(n)?.re,
        path_action: path_action(f, &r.x, &path),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(family: FamilySpec) -> ExperimentConfig {
        ExperimentConfig { family, steps: 256, paths: 16, modes: vec![4, 8, 16], x_samples: 16, ..Default::default() }
    }

    #[test]
    fn zero_family_everything_vanishes() {
        let cfg = small(FamilySpec::Zero);
        let exec = Exec::with_workers(2);
        for kind in [SweepKind::Laplacian, SweepKind::Divergence, SweepKind::Dalembertian] {
            let s = cesaro_sweep(kind, &cfg, exec).unwrap();
            assert!(s.rms.iter().all(|e| e.mean == 0.0 && e.stderr == 0.0));
            assert!(s.gates.iter().all(|g| g.passed), "{:?}", s.gates);
        }
        let e = ym_equivalence_report(&cfg, exec).unwrap();
        assert_eq!(e.closed_norm_sq.mean, 0.0);
        assert!(e.gates.iter().all(|g| g.passed));
        let l = lemma_decay_check(&cfg, exec).unwrap();
        assert!(l.curves.iter().all(|c| c.norm.iter().all(|e| e.mean == 0.0)));
        assert!(l.gates.iter().all(|g| g.passed));
        let p = prop6_check(&cfg, exec).unwrap();
        assert_eq!((p.lhs.mean, p.rhs.mean), (0.0, 0.0));
        assert!(p.gates.iter().all(|g| g.passed));
        let a = action_functional_check(&cfg, exec).unwrap();
        assert_eq!((a.lhs.mean, a.rhs), (0.0, 0.0));
        let t = transport_check(&cfg, exec).unwrap();
        assert!(t.gates.iter().all(|g| g.passed));
    }

    #[test]
    fn action_rejects_non_integrable_family() {
        let cfg = small(FamilySpec::SineNonym { amplitude: 1.0 });
        assert!(matches!(action_functional_check(&cfg, Exec::default()), Err(crate::Error::Config(_))));
    }

    #[test]
    fn closed_form_transports_match_solver() {
        let cfg = ExperimentConfig { x: Some(vec![0.2, -0.3]), ..small(FamilySpec::ConstantAbelian { f: 1.0 }) };
        let t = transport_check(&cfg, Exec::default()).unwrap();
        assert!(t.closed_form_error.unwrap() <= 1e-12);
        assert!(t.gates.iter().all(|g| g.passed), "{:?}", t.gates);
        // The pure-gauge error is first order in the step size.
        let mut errs = Vec::new();
        for steps in [128, 512] {
            let cfg = ExperimentConfig { x: Some(vec![0.2, -0.3]), steps, ..small(FamilySpec::PureGauge { a: 1.0, b: 0.5 }) };
            errs.push(transport_check(&cfg, Exec::default()).unwrap().closed_form_error.unwrap());
        }
        assert!(errs[1] < 0.5 * errs[0], "{errs:?}");
    }

    #[test]
    fn replay_matches_ensemble_values() {
        let cfg = small(FamilySpec::Custom { seed: 4, amplitude: 0.8, modes: 2 });
        let seed = derive_path_seed(cfg.seed, 3);
        let dump = replay_path(&cfg, seed).unwrap();
        let path = BrownianPath::sample(seed, cfg.steps, 3).unwrap();
        let direct = sweep_path_values(SweepKind::Laplacian, &cfg, &path).unwrap();
        assert_eq!(dump.laplacian.squared_errors, direct.errors);
    }

    #[test]
    fn median_handles_even_and_odd() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn combined_error_is_quadrature_sum() {
        assert_eq!(combined_stderr(3.0, 4.0), 5.0);
    }
}
