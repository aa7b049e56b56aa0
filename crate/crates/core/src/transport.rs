//! Stochastic parallel transport `dU = −A_μ(x + b) U ∘ db^μ`, the conjugated
//! curvature processes `L` and `J`, and discrete stochastic integrals.
//!
//! Discrete conventions on the uniform grid `t_i = i/M`:
//!
//! * Stratonovich: `Σ_i ½(f_i + f_{i+1}) Δb_i`;
//! * Itô: `Σ_i f_i Δb_i`;
//! * time: trapezoid rule.

use serde::{Deserialize, Serialize};

use crate::error::{Error, NumericalError, Result};
use crate::gauge::{cov_deriv_from_jet, curvature_from_jet, ConnectionField};
use crate::liealg::{exp_anti_hermitian, polar_unitary, CMat};
use crate::paths::{BrownianPath, Direction};

/// Unitarity drift tolerated before a solve aborts.
pub const DRIFT_ABORT: f64 = 1e-6;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// `U_{i+1} = exp(−A_μ(x + b_mid) Δb^μ) U_i`.
    #[default]
    GeometricMidpoint,
    /// Heun predictor-corrector on the linear interpolant, projected back to `U(N)`.
    HeunProjected,
}

impl Scheme {
    pub fn id(&self) -> &'static str {
        match self {
            Scheme::GeometricMidpoint => "geometric_midpoint",
            Scheme::HeunProjected => "heun_projected",
        }
    }

    pub fn from_id(id: &str) -> Option<Self> {
        match id {
            "geometric_midpoint" => Some(Scheme::GeometricMidpoint),
            "heun_projected" => Some(Scheme::HeunProjected),
            _ => None,
        }
    }
}

/// `U_i = U^x(b, t_i)` on the path grid.
#[derive(Clone, Debug)]
pub struct TransportGrid {
    x: Vec<f64>,
    scheme: Scheme,
    u: Vec<CMat>,
    uinv: Vec<CMat>,
    drift: Vec<f64>,
}

impl TransportGrid {
    pub fn base_point(&self) -> &[f64] {
        &self.x
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn steps(&self) -> usize {
        self.u.len() - 1
    }

    #[inline]
    pub fn u(&self, i: usize) -> &CMat {
        &self.u[i]
    }

    #[inline]
    pub fn uinv(&self, i: usize) -> &CMat {
        &self.uinv[i]
    }

    pub fn endpoint(&self) -> &CMat {
        &self.u[self.u.len() - 1]
    }

    pub fn endpoint_inv(&self) -> &CMat {
        &self.uinv[self.uinv.len() - 1]
    }

    /// `‖U_i†U_i − I‖_F` per step.
    pub fn drift(&self) -> &[f64] {
        &self.drift
    }

    pub fn max_drift(&self) -> f64 {
        self.drift.iter().copied().fold(0.0, f64::max)
    }
}

fn point(x: &[f64], b: &[f64], out: &mut [f64]) {
    for ((o, xi), bi) in out.iter_mut().zip(x).zip(b) {
        *o = xi + bi;
    }
}

/// Solves the transport equation along `path` starting from `U_0 = I`.
pub fn solve_transport(
    field: &dyn ConnectionField,
    x: &[f64],
    path: &BrownianPath,
    scheme: Scheme,
) -> Result<TransportGrid> {
    let d = field.dim();
    let n = field.matrix_size();
    if x.len() != d || path.dim() != d {
        return Err(Error::InvalidInput(format!(
            "base point has {} coordinates and path has {}, field dimension is {d}",
            x.len(),
            path.dim()
        )));
    }
    let m = path.steps();
    let mut jet = field.new_jet();
    let mut jet2 = field.new_jet();
    let mut y = vec![0.0; d];
    let mut mid = vec![0.0; d];
    let mut u = Vec::with_capacity(m + 1);
    let mut drift = Vec::with_capacity(m + 1);
    let mut cur = CMat::identity(n);
    u.push(cur);
    drift.push(0.0);

    for i in 0..m {
        let (bi, bj) = (path.at(i), path.at(i + 1));
        let next = match scheme {
            Scheme::GeometricMidpoint => {
                for k in 0..d {
                    mid[k] = 0.5 * (bi[k] + bj[k]);
                }
                point(x, &mid, &mut y);
                field.fill_jet(&y, 0, &mut jet);
                let mut gen = CMat::zeros(n);
                for mu in 0..d {
                    gen.axpy(-path.increment(i, mu), &jet.a[mu]);
                }
                exp_anti_hermitian(&gen).matmul(&cur)
            }
            Scheme::HeunProjected => {
                point(x, bi, &mut y);
                field.fill_jet(&y, 0, &mut jet);
                point(x, bj, &mut y);
                field.fill_jet(&y, 0, &mut jet2);
                let mut g0 = CMat::zeros(n);
                let mut g1 = CMat::zeros(n);
                for mu in 0..d {
                    let db = path.increment(i, mu);
                    g0.axpy(-db, &jet.a[mu]);
                    g1.axpy(-db, &jet2.a[mu]);
                }
                let k1 = g0.matmul(&cur);
                let k2 = g1.matmul(&(cur + k1));
                polar_unitary(&(cur + (k1 + k2).scale(0.5)))
            }
        };
        if !next.is_finite() {
            return Err(NumericalError::NonFinite { step: i + 1 }.into());
        }
        let defect = next.unitarity_defect();
        if defect > DRIFT_ABORT {
            return Err(NumericalError::UnitarityDrift { step: i + 1, drift: defect, limit: DRIFT_ABORT }.into());
        }
        drift.push(defect);
        u.push(next);
        cur = next;
    }
    let uinv = u.iter().map(CMat::adjoint).collect();
    Ok(TransportGrid { x: x.to_vec(), scheme, u, uinv, drift })
}

/// How much of the curvature hierarchy a [`ProcessGrid`] holds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum ProcessLevel {
    /// `L` only.
    Curvature,
    /// `L`, the diagonal slices `J_μμλ` and the contraction `C_ν = Σ_μ J_μμν`.
    Contracted,
    /// Everything, including the full `J_λμν`.
    Full,
}

/// `L_μν(t_i) = U_i⁻¹ F_μν(x + b_i) U_i` and `J_λμν(t_i) = U_i⁻¹ ∇_λF_μν(x + b_i) U_i`.
#[derive(Clone, Debug)]
pub struct ProcessGrid {
    d: usize,
    n: usize,
    steps: usize,
    level: ProcessLevel,
    l: Vec<CMat>,
    jdiag: Vec<CMat>,
    contraction: Vec<CMat>,
    j: Vec<CMat>,
}

impl ProcessGrid {
    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn matrix_size(&self) -> usize {
        self.n
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn level(&self) -> ProcessLevel {
        self.level
    }

    #[inline]
    pub fn l(&self, i: usize, mu: usize, nu: usize) -> &CMat {
        &self.l[(i * self.d + mu) * self.d + nu]
    }

    /// `J_μμλ(t_i)`.
    #[inline]
    pub fn jdiag(&self, i: usize, mu: usize, lam: usize) -> &CMat {
        assert!(self.level >= ProcessLevel::Contracted, "process grid built without J");
        &self.jdiag[(i * self.d + mu) * self.d + lam]
    }

    /// `C_ν(t_i) = Σ_μ J_μμν(t_i)`.
    #[inline]
    pub fn contraction(&self, i: usize, nu: usize) -> &CMat {
        assert!(self.level >= ProcessLevel::Contracted, "process grid built without J");
        &self.contraction[i * self.d + nu]
    }

    #[inline]
    pub fn j(&self, i: usize, lam: usize, mu: usize, nu: usize) -> &CMat {
        assert!(self.level == ProcessLevel::Full, "process grid built without full J");
        let d = self.d;
        &self.j[((i * d + lam) * d + mu) * d + nu]
    }

    pub fn l_values(&self, mu: usize, nu: usize) -> Vec<CMat> {
        (0..=self.steps).map(|i| *self.l(i, mu, nu)).collect()
    }

    pub fn contraction_values(&self, nu: usize) -> Vec<CMat> {
        (0..=self.steps).map(|i| *self.contraction(i, nu)).collect()
    }
}

/// Builds the `L`/`J` grids for a solved transport.
pub fn process_grids(
    field: &dyn ConnectionField,
    path: &BrownianPath,
    tg: &TransportGrid,
    level: ProcessLevel,
) -> ProcessGrid {
    let d = field.dim();
    let n = field.matrix_size();
    let m = path.steps();
    assert_eq!(tg.steps(), m, "transport grid and path disagree on step count");
    let order = if level == ProcessLevel::Curvature { 1 } else { 2 };
    let mut jet = field.new_jet();
    let mut y = vec![0.0; d];
    let mut f = vec![CMat::zeros(n); d * d];
    let mut cov = vec![CMat::zeros(n); d * d * d];

    let mut l = Vec::with_capacity((m + 1) * d * d);
    let mut jdiag = Vec::new();
    let mut contraction = Vec::new();
    let mut j = Vec::new();
    if level >= ProcessLevel::Contracted {
        jdiag.reserve((m + 1) * d * d);
        contraction.reserve((m + 1) * d);
    }
    if level == ProcessLevel::Full {
        j.reserve((m + 1) * d * d * d);
    }
    let conj = |ui: &CMat, u: &CMat, v: &CMat| ui.matmul(&v.matmul(u));

    for i in 0..=m {
        point(tg.base_point(), path.at(i), &mut y);
        field.fill_jet(&y, order, &mut jet);
        curvature_from_jet(&jet, &mut f);
        let (u, ui) = (tg.u(i), tg.uinv(i));
        for mu in 0..d {
            for nu in 0..d {
                l.push(conj(ui, u, &f[mu * d + nu]));
            }
        }
        if level == ProcessLevel::Curvature {
            continue;
        }
        cov_deriv_from_jet(&jet, &f, &mut cov);
        for mu in 0..d {
            for lam in 0..d {
                jdiag.push(conj(ui, u, &cov[(mu * d + mu) * d + lam]));
            }
        }
        let base = i * d * d;
        for nu in 0..d {
            let mut c = CMat::zeros(n);
            for mu in 0..d {
                c += jdiag[base + mu * d + nu];
            }
            contraction.push(c);
        }
        if level == ProcessLevel::Full {
            for v in &cov {
                j.push(conj(ui, u, v));
            }
        }
    }
    ProcessGrid { d, n, steps: m, level, l, jdiag, contraction, j }
}

fn check_len(len: usize, path: &BrownianPath) -> Result<()> {
    if len != path.steps() + 1 {
        return Err(Error::InvalidInput(format!(
            "integrand has {len} grid values, path grid has {}",
            path.steps() + 1
        )));
    }
    Ok(())
}

/// Midpoint-rule Stratonovich integral `∫ f ∘ db^ν` of grid values.
pub fn strat_integral(values: &[CMat], path: &BrownianPath, nu: usize) -> Result<CMat> {
    check_len(values.len(), path)?;
    Ok(strat_with(path, nu, values[0].dim(), |i| values[i]))
}

/// Left-point Itô integral `∫ f db^ν` of grid values.
pub fn ito_integral(values: &[CMat], path: &BrownianPath, nu: usize) -> Result<CMat> {
    check_len(values.len(), path)?;
    Ok(ito_with(path, nu, values[0].dim(), |i| values[i]))
}

/// Trapezoid-rule `∫ f dt` of grid values.
pub fn time_integral(values: &[CMat], path: &BrownianPath) -> Result<CMat> {
    check_len(values.len(), path)?;
    Ok(time_with(path, values[0].dim(), |i| values[i]))
}

/// Stratonovich integral of a lazily evaluated integrand.
pub fn strat_with(path: &BrownianPath, nu: usize, n: usize, f: impl Fn(usize) -> CMat) -> CMat {
    let m = path.steps();
    let mut acc = CMat::zeros(n);
    let mut prev = f(0);
    for i in 0..m {
        let next = f(i + 1);
        acc.axpy(0.5 * path.increment(i, nu), &(prev + next));
        prev = next;
    }
    acc
}

pub fn ito_with(path: &BrownianPath, nu: usize, n: usize, f: impl Fn(usize) -> CMat) -> CMat {
    let mut acc = CMat::zeros(n);
    for i in 0..path.steps() {
        acc.axpy(path.increment(i, nu), &f(i));
    }
    acc
}

pub fn time_with(path: &BrownianPath, n: usize, f: impl Fn(usize) -> CMat) -> CMat {
    let m = path.steps();
    let mut acc = CMat::zeros(n);
    for i in 0..=m {
        let w = if i == 0 || i == m { 0.5 } else { 1.0 };
        acc.axpy(w * path.dt(), &f(i));
    }
    acc
}

/// Residuals of the Itô/Stratonovich conversion identities.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prop1Residual {
    /// `‖∫L_μν u^μ ∘db^ν − ∫L_μν u^μ db^ν − ½∫C_μ u^μ dt‖_F`.
    pub conversion: f64,
    /// `‖∫C_μ ∘db^μ − ∫C_μ db^μ‖_F`.
    pub contraction: f64,
}

/// Compares the discrete Stratonovich-minus-Itô covariation of `L u` with
/// the analytic correction built from the contraction of `J`.
pub fn prop1_residual(path: &BrownianPath, pg: &ProcessGrid, u: &Direction) -> Prop1Residual {
    let d = pg.dim();
    let n = pg.matrix_size();
    let ug = u.on_grid(path);
    let lu = |i: usize, nu: usize| {
        let mut acc = CMat::zeros(n);
        for (mu, &c) in ug.u(i).iter().enumerate() {
            if c != 0.0 {
                acc.axpy(c, pg.l(i, mu, nu));
            }
        }
        acc
    };
    let mut diff = CMat::zeros(n);
    let mut cdiff = CMat::zeros(n);
    for nu in 0..d {
        diff += strat_with(path, nu, n, |i| lu(i, nu)) - ito_with(path, nu, n, |i| lu(i, nu));
        cdiff += strat_with(path, nu, n, |i| *pg.contraction(i, nu))
            - ito_with(path, nu, n, |i| *pg.contraction(i, nu));
    }
    let correction = time_with(path, n, |i| {
        let mut acc = CMat::zeros(n);
        for (mu, &c) in ug.u(i).iter().enumerate() {
            if c != 0.0 {
                acc.axpy(c, pg.contraction(i, mu));
            }
        }
        acc
    });
    Prop1Residual {
        conversion: (diff - correction.scale(0.5)).frob_norm(),
        contraction: cdiff.frob_norm(),
    }
}
