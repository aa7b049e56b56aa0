//! Built-in connection families.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{ConnectionField, FieldJet};
use crate::error::ConfigError;
use crate::liealg::{c64, exp_anti_hermitian, pauli, su2_basis, CMat, C64};

/// Family id plus parameters, as it appears in experiment configs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FamilySpec {
    Zero,
    /// Constant field strength `f` in the (1,2) plane; `A` grows linearly.
    ConstantAbelian {
        #[serde(default = "one")]
        f: f64,
    },
    /// `A = g⁻¹dg` with `g(x) = exp(i a sin(x¹) σ₃) exp(i b sin(x²) σ₁)`.
    PureGauge {
        #[serde(default = "one")]
        a: f64,
        #[serde(default)]
        b: f64,
    },
    /// SU(2) instanton of scale `rho` centred at the origin, `d = 4`.
    Bpst {
        #[serde(default = "one")]
        rho: f64,
    },
    /// `A₁ = i·amplitude·sin(x²)`, all other components zero; not a Yang–Mills solution.
    SineNonym {
        #[serde(default = "one")]
        amplitude: f64,
    },
    /// Random bounded trigonometric connection, seeded.
    Custom {
        #[serde(default)]
        seed: u64,
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default = "three")]
        modes: usize,
    },
}

fn one() -> f64 {
    1.0
}
fn three() -> usize {
    3
}

impl FamilySpec {
    /// Family id used on the command line.
    pub fn id(&self) -> &'static str {
        match self {
            FamilySpec::Zero => "zero",
            FamilySpec::ConstantAbelian { .. } => "constant_abelian",
            FamilySpec::PureGauge { .. } => "pure_gauge",
            FamilySpec::Bpst { .. } => "bpst",
            FamilySpec::SineNonym { .. } => "sine_nonym",
            FamilySpec::Custom { .. } => "custom",
        }
    }

    /// Family with default parameters for a command-line id.
    pub fn from_id(id: &str) -> Result<Self, ConfigError> {
        Ok(match id {
            "zero" => FamilySpec::Zero,
            "constant_abelian" => FamilySpec::ConstantAbelian { f: 1.0 },
            "pure_gauge" => FamilySpec::PureGauge { a: 1.0, b: 0.0 },
            "bpst" => FamilySpec::Bpst { rho: 1.0 },
            "sine_nonym" => FamilySpec::SineNonym { amplitude: 1.0 },
            "custom" => FamilySpec::Custom { seed: 0, amplitude: 1.0, modes: 3 },
            other => return Err(ConfigError::new(format!("unknown family id '{other}'"))),
        })
    }

    /// `(d, N)` forced by the family, if any.
    pub fn required_dims(&self) -> (Option<usize>, Option<usize>) {
        match self {
            FamilySpec::Bpst { .. } => (Some(4), Some(2)),
            FamilySpec::PureGauge { .. } => (None, Some(2)),
            _ => (None, None),
        }
    }

    /// Natural default `(d, N)` for the family.
    pub fn default_dims(&self) -> (usize, usize) {
        match self {
            FamilySpec::Bpst { .. } => (4, 2),
            FamilySpec::PureGauge { .. } => (2, 2),
            FamilySpec::Custom { .. } => (3, 2),
            _ => (2, 1),
        }
    }

    /// Whether the family is known to satisfy the Yang–Mills equations.
    pub fn is_known_ym_solution(&self) -> bool {
        matches!(
            self,
            FamilySpec::Zero
                | FamilySpec::ConstantAbelian { .. }
                | FamilySpec::PureGauge { .. }
                | FamilySpec::Bpst { .. }
        )
    }

    /// Whether `∫ tr(F F) dx` over `ℝ^d` is finite.
    pub fn has_integrable_action(&self) -> bool {
        matches!(self, FamilySpec::Zero | FamilySpec::Bpst { .. })
    }
}

/// Builds a built-in family for dimension `d` and matrix size `n`.
pub fn builtin(
    spec: &FamilySpec,
    d: usize,
    n: usize,
) -> Result<Arc<dyn ConnectionField>, ConfigError> {
    if d == 0 {
        return Err(ConfigError::new("dimension must be at least 1"));
    }
    if !(1..=crate::liealg::MAX_N).contains(&n) {
        return Err(ConfigError::new(format!(
            "matrix size {n} outside 1..={}",
            crate::liealg::MAX_N
        )));
    }
    let (rd, rn) = spec.required_dims();
    if let Some(rd) = rd {
        if d != rd {
            return Err(ConfigError::new(format!("{} requires d = {rd}, got {d}", spec.id())));
        }
    }
    if let Some(rn) = rn {
        if n != rn {
            return Err(ConfigError::new(format!("{} requires N = {rn}, got {n}", spec.id())));
        }
    }
    let check_finite = |name: &str, v: f64| {
        if v.is_finite() {
            Ok(())
        } else {
            Err(ConfigError::new(format!("{name} must be finite")))
        }
    };
    Ok(match *spec {
        FamilySpec::Zero => Arc::new(ZeroField { d, n }),
        FamilySpec::ConstantAbelian { f } => {
            check_finite("f", f)?;
            if d < 2 {
                return Err(ConfigError::new("constant_abelian requires d >= 2"));
            }
            Arc::new(ConstantAbelian { d, n, f })
        }
        FamilySpec::PureGauge { a, b } => {
            check_finite("a", a)?;
            check_finite("b", b)?;
            if d < 2 {
                return Err(ConfigError::new("pure_gauge requires d >= 2"));
            }
            Arc::new(PureGauge { d, a, b })
        }
        FamilySpec::Bpst { rho } => {
            if !(rho > 0.0 && rho.is_finite()) {
                return Err(ConfigError::new(format!("bpst requires rho > 0, got {rho}")));
            }
            Arc::new(Bpst::new(rho))
        }
        FamilySpec::SineNonym { amplitude } => {
            check_finite("amplitude", amplitude)?;
            if d < 2 {
                return Err(ConfigError::new("sine_nonym requires d >= 2"));
            }
            Arc::new(SineNonym { d, n, amplitude })
        }
        FamilySpec::Custom { seed, amplitude, modes } => {
            check_finite("amplitude", amplitude)?;
            if modes == 0 {
                return Err(ConfigError::new("custom requires modes >= 1"));
            }
            Arc::new(Custom::new(d, n, seed, amplitude, modes))
        }
    })
}

#[derive(Debug, Clone)]
pub struct ZeroField {
    pub d: usize,
    pub n: usize,
}

impl ConnectionField for ZeroField {
    fn dim(&self) -> usize {
        self.d
    }
    fn matrix_size(&self) -> usize {
        self.n
    }
    fn fill_jet(&self, _x: &[f64], order: usize, jet: &mut FieldJet) {
        jet.reset(order);
    }
    fn bound(&self) -> Option<f64> {
        Some(0.0)
    }
    fn label(&self) -> String {
        "zero".into()
    }
}

/// `A₁ = −(i f/2) x²`, `A₂ = (i f/2) x¹` (times the identity), so `F₁₂ = i f`.
///
/// `A` grows linearly in `x`, so the global boundedness assumed for the
/// transport theory fails. Everything here is evaluated pathwise on `[0,1]`
/// where all moments exist, and the family has closed forms for every check.
#[derive(Debug, Clone)]
pub struct ConstantAbelian {
    pub d: usize,
    pub n: usize,
    pub f: f64,
}

impl ConnectionField for ConstantAbelian {
    fn dim(&self) -> usize {
        self.d
    }
    fn matrix_size(&self) -> usize {
        self.n
    }
    fn fill_jet(&self, x: &[f64], order: usize, jet: &mut FieldJet) {
        jet.reset(order);
        let half = c64(0.0, 0.5 * self.f);
        jet.a[0] = CMat::scalar(self.n, -half * x[1]);
        jet.a[1] = CMat::scalar(self.n, half * x[0]);
        if order >= 1 {
            *jet.da_mut(1, 0) = CMat::scalar(self.n, -half);
            *jet.da_mut(0, 1) = CMat::scalar(self.n, half);
        }
    }
    fn bound(&self) -> Option<f64> {
        None
    }
    fn label(&self) -> String {
        format!("constant_abelian(f={})", self.f)
    }
}

/// Flat SU(2) connection `A = g⁻¹dg`, `g(x) = exp(i a sin(x¹) σ₃) exp(i b sin(x²) σ₁)`.
///
/// Closed forms: `A₁ = i a cos(x¹) (cos 2β σ₃ − sin 2β σ₂)` with `β = b sin(x²)`,
/// `A₂ = i b cos(x²) σ₁`, higher components zero.
#[derive(Debug, Clone)]
pub struct PureGauge {
    pub d: usize,
    pub a: f64,
    pub b: f64,
}

impl PureGauge {
    /// The gauge transformation `g(x)`.
    pub fn group_element(&self, x: &[f64]) -> CMat {
        let [s1, _, s3] = pauli();
        let i = c64(0.0, 1.0);
        let g1 = exp_anti_hermitian(&(s3 * (i * (self.a * x[0].sin()))));
        let g2 = exp_anti_hermitian(&(s1 * (i * (self.b * x[1].sin()))));
        g1.matmul(&g2)
    }
}

impl ConnectionField for PureGauge {
    fn dim(&self) -> usize {
        self.d
    }
    fn matrix_size(&self) -> usize {
        2
    }
    fn fill_jet(&self, x: &[f64], order: usize, jet: &mut FieldJet) {
        jet.reset(order);
        let [s1, s2, s3] = pauli();
        let i = c64(0.0, 1.0);
        let (sx1, cx1) = x[0].sin_cos();
        let (sx2, cx2) = x[1].sin_cos();
        let beta = self.b * sx2;
        let dbeta = self.b * cx2;
        let ddbeta = -self.b * sx2;
        let (s2b, c2b) = (2.0 * beta).sin_cos();
        let p = s3 * c64(c2b, 0.0) - s2 * c64(s2b, 0.0);
        let dp = s3 * c64(-2.0 * s2b, 0.0) - s2 * c64(2.0 * c2b, 0.0);
        let ddp = p * c64(-4.0, 0.0);
        let ia = i * self.a;
        let ib = i * self.b;
        jet.a[0] = p * (ia * cx1);
        jet.a[1] = s1 * (ib * cx2);
        if order >= 1 {
            *jet.da_mut(0, 0) = p * (-ia * sx1);
            *jet.da_mut(1, 0) = dp * (ia * cx1 * dbeta);
            *jet.da_mut(1, 1) = s1 * (-ib * sx2);
        }
        if order >= 2 {
            *jet.dda_mut(0, 0, 0) = p * (-ia * cx1);
            let mixed = dp * (-ia * sx1 * dbeta);
            *jet.dda_mut(0, 1, 0) = mixed;
            *jet.dda_mut(1, 0, 0) = mixed;
            *jet.dda_mut(1, 1, 0) =
                (ddp * c64(dbeta * dbeta, 0.0) + dp * c64(ddbeta, 0.0)) * (ia * cx1);
            *jet.dda_mut(1, 1, 1) = s1 * (-ib * cx2);
        }
    }
    fn bound(&self) -> Option<f64> {
        let m = self.a.abs().max(self.b.abs());
        Some(m * (1.0 + 2.0 * self.b.abs()).powi(2))
    }
    fn label(&self) -> String {
        format!("pure_gauge(a={}, b={})", self.a, self.b)
    }
}

/// 't Hooft symbol `η_{aμν}` (zero-based; index 3 plays the role of the fourth axis).
pub fn thooft_eta(a: usize, mu: usize, nu: usize) -> f64 {
    fn eps3(i: usize, j: usize, k: usize) -> f64 {
        match (i, j, k) {
            (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1.0,
            (0, 2, 1) | (2, 1, 0) | (1, 0, 2) => -1.0,
            _ => 0.0,
        }
    }
    match (mu, nu) {
        (3, 3) => 0.0,
        (m, 3) => {
            if m == a {
                1.0
            } else {
                0.0
            }
        }
        (3, n) => {
            if n == a {
                -1.0
            } else {
                0.0
            }
        }
        (m, n) => eps3(a, m, n),
    }
}

/// BPST instanton in regular gauge:
/// `A_μ = 2 η_{aμν} x_ν T_a / (|x|² + ρ²)` with `T_a = −(i/2) σ_a`.
///
/// With these constants `F_μν = −4ρ² η_{aμν} T_a / (|x|² + ρ²)²`, which is
/// self-dual, so the Yang–Mills equations hold. The action density is
/// `−tr(F_μν F_μν) = 96 ρ⁴ / (|x|² + ρ²)⁴` and integrates to `16π²`.
#[derive(Debug, Clone)]
pub struct Bpst {
    pub rho: f64,
    /// `E_{μλ} = η_{aμλ} T_a`, index `μ·4 + λ`.
    e: [CMat; 16],
}

impl Bpst {
    pub fn new(rho: f64) -> Self {
        let t = su2_basis();
        let mut e = [CMat::zeros(2); 16];
        for mu in 0..4 {
            for lam in 0..4 {
                let mut m = CMat::zeros(2);
                for (a, ta) in t.iter().enumerate() {
                    m.axpy(thooft_eta(a, mu, lam), ta);
                }
                e[mu * 4 + lam] = m;
            }
        }
        Bpst { rho, e }
    }
}

/// `−tr(F_μν F_μν)` for the BPST instanton at radius `r`.
pub fn bpst_action_density(rho: f64, r: f64) -> f64 {
    96.0 * rho.powi(4) / (r * r + rho * rho).powi(4)
}

impl ConnectionField for Bpst {
    fn dim(&self) -> usize {
        4
    }
    fn matrix_size(&self) -> usize {
        2
    }
    fn fill_jet(&self, x: &[f64], order: usize, jet: &mut FieldJet) {
        jet.reset(order);
        let r2: f64 = x[..4].iter().map(|v| v * v).sum();
        let den = r2 + self.rho * self.rho;
        let inv = 1.0 / den;
        let mut k = [CMat::zeros(2); 4];
        for (mu, km) in k.iter_mut().enumerate() {
            for (nu, xn) in x[..4].iter().enumerate() {
                km.axpy(*xn, &self.e[mu * 4 + nu]);
            }
        }
        for mu in 0..4 {
            jet.a[mu] = k[mu].scale(2.0 * inv);
        }
        if order >= 1 {
            for lam in 0..4 {
                for mu in 0..4 {
                    let mut m = self.e[mu * 4 + lam].scale(2.0 * inv);
                    m.axpy(-4.0 * x[lam] * inv * inv, &k[mu]);
                    *jet.da_mut(lam, mu) = m;
                }
            }
        }
        if order >= 2 {
            let inv2 = inv * inv;
            let inv3 = inv2 * inv;
            for kap in 0..4 {
                for lam in 0..4 {
                    for mu in 0..4 {
                        let mut m = self.e[mu * 4 + lam].scale(-4.0 * x[kap] * inv2);
                        m.axpy(-4.0 * x[lam] * inv2, &self.e[mu * 4 + kap]);
                        let mut coeff = 16.0 * x[kap] * x[lam] * inv3;
                        if kap == lam {
                            coeff -= 4.0 * inv2;
                        }
                        m.axpy(coeff, &k[mu]);
                        *jet.dda_mut(kap, lam, mu) = m;
                    }
                }
            }
        }
    }
    fn bound(&self) -> Option<f64> {
        Some(8.0 / (self.rho * self.rho).min(self.rho))
    }
    fn label(&self) -> String {
        format!("bpst(rho={})", self.rho)
    }
}

/// `A₁ = i·amplitude·sin(x²)` (times the identity); `∇₂F₂₁ = −i·amplitude·sin(x²)`.
#[derive(Debug, Clone)]
pub struct SineNonym {
    pub d: usize,
    pub n: usize,
    pub amplitude: f64,
}

impl ConnectionField for SineNonym {
    fn dim(&self) -> usize {
        self.d
    }
    fn matrix_size(&self) -> usize {
        self.n
    }
    fn fill_jet(&self, x: &[f64], order: usize, jet: &mut FieldJet) {
        jet.reset(order);
        let (s, c) = x[1].sin_cos();
        let ia = c64(0.0, self.amplitude);
        jet.a[0] = CMat::scalar(self.n, ia * s);
        if order >= 1 {
            *jet.da_mut(1, 0) = CMat::scalar(self.n, ia * c);
        }
        if order >= 2 {
            *jet.dda_mut(1, 1, 0) = CMat::scalar(self.n, -ia * s);
        }
    }
    fn bound(&self) -> Option<f64> {
        Some(self.amplitude.abs())
    }
    fn label(&self) -> String {
        format!("sine_nonym(amplitude={})", self.amplitude)
    }
}

#[derive(Debug, Clone)]
struct Wave {
    k: Vec<f64>,
    phase: f64,
    generator: CMat,
}

/// `A_μ(x) = Σ_j sin(k_{μj}·x + φ_{μj}) X_{μj}` with Gaussian wave vectors and
/// random anti-Hermitian `X_{μj}` of Frobenius norm `amplitude/√modes`.
#[derive(Debug, Clone)]
pub struct Custom {
    d: usize,
    n: usize,
    seed: u64,
    amplitude: f64,
    waves: Vec<Vec<Wave>>,
}

impl Custom {
    pub fn new(d: usize, n: usize, seed: u64, amplitude: f64, modes: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let waves = (0..d)
            .map(|_| {
                (0..modes)
                    .map(|_| {
                        let k: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
                        let phase = rng.random::<f64>() * 2.0 * PI;
                        let g = CMat::from_fn(n, |_, _| {
                            C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
                        });
                        let mut x = g.anti_hermitian_part();
                        let norm = x.frob_norm();
                        if norm > 0.0 {
                            x = x.scale(amplitude / (norm * (modes as f64).sqrt()));
                        }
                        Wave { k, phase, generator: x }
                    })
                    .collect()
            })
            .collect();
        Custom { d, n, seed, amplitude, waves }
    }
}

impl ConnectionField for Custom {
    fn dim(&self) -> usize {
        self.d
    }
    fn matrix_size(&self) -> usize {
        self.n
    }
    fn fill_jet(&self, x: &[f64], order: usize, jet: &mut FieldJet) {
        jet.reset(order);
        let d = self.d;
        for mu in 0..d {
            for w in &self.waves[mu] {
                let arg: f64 = w.k.iter().zip(x).map(|(k, xi)| k * xi).sum::<f64>() + w.phase;
                let (s, c) = arg.sin_cos();
                jet.a[mu].axpy(s, &w.generator);
                if order >= 1 {
                    for nu in 0..d {
                        jet.da_mut(nu, mu).axpy(w.k[nu] * c, &w.generator);
                    }
                }
                if order >= 2 {
                    for lam in 0..d {
                        for nu in 0..d {
                            jet.dda_mut(lam, nu, mu).axpy(-w.k[lam] * w.k[nu] * s, &w.generator);
                        }
                    }
                }
            }
        }
    }
    fn bound(&self) -> Option<f64> {
        let kmax = self
            .waves
            .iter()
            .flatten()
            .map(|w| w.k.iter().map(|v| v * v).sum::<f64>())
            .fold(1.0, f64::max);
        let modes = self.waves.first().map_or(1, Vec::len) as f64;
        Some(self.amplitude.abs() * modes.sqrt() * kmax)
    }
    fn label(&self) -> String {
        format!("custom(seed={}, amplitude={})", self.seed, self.amplitude)
    }
}
