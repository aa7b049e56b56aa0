//! Connection fields on `ℝ^d` with analytic derivatives, and the curvature
//! quantities built from them.
//!
//! Index conventions (all zero-based, Euclidean metric, so raised and lowered
//! indices coincide):
//!
//! * `A_μ` lives at `jet.a[μ]`;
//! * `∂_ν A_μ` at `jet.da[ν·d + μ]`;
//! * `∂_λ ∂_ν A_μ` at `jet.dda[(λ·d + ν)·d + μ]`;
//! * `F_μν = ∂_μ A_ν − ∂_ν A_μ + [A_μ, A_ν]`;
//! * `∇_λ F_μν = ∂_λ F_μν + [A_λ, F_μν]`.

mod families;

use std::fmt;

pub use families::{
    bpst_action_density, builtin, thooft_eta, Bpst, ConstantAbelian, Custom, FamilySpec, PureGauge,
    SineNonym, ZeroField,
};

use crate::liealg::CMat;

/// Values and derivatives of a connection at one point.
#[derive(Clone, Debug)]
pub struct FieldJet {
    d: usize,
    n: usize,
    order: usize,
    pub a: Vec<CMat>,
    pub da: Vec<CMat>,
    pub dda: Vec<CMat>,
}

impl FieldJet {
    pub fn new(d: usize, n: usize) -> Self {
        FieldJet {
            d,
            n,
            order: 2,
            a: vec![CMat::zeros(n); d],
            da: vec![CMat::zeros(n); d * d],
            dda: vec![CMat::zeros(n); d * d * d],
        }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn matrix_size(&self) -> usize {
        self.n
    }

    /// Highest derivative order filled by the last evaluation.
    pub fn order(&self) -> usize {
        self.order
    }

    /// Zeroes entries up to `order` and records it; called by field implementations.
    pub fn reset(&mut self, order: usize) {
        let z = CMat::zeros(self.n);
        self.order = order;
        self.a.iter_mut().for_each(|m| *m = z);
        if order >= 1 {
            self.da.iter_mut().for_each(|m| *m = z);
        }
        if order >= 2 {
            self.dda.iter_mut().for_each(|m| *m = z);
        }
    }

    #[inline]
    pub fn da(&self, nu: usize, mu: usize) -> &CMat {
        &self.da[nu * self.d + mu]
    }

    #[inline]
    pub fn da_mut(&mut self, nu: usize, mu: usize) -> &mut CMat {
        &mut self.da[nu * self.d + mu]
    }

    #[inline]
    pub fn dda(&self, lam: usize, nu: usize, mu: usize) -> &CMat {
        &self.dda[(lam * self.d + nu) * self.d + mu]
    }

    #[inline]
    pub fn dda_mut(&mut self, lam: usize, nu: usize, mu: usize) -> &mut CMat {
        &mut self.dda[(lam * self.d + nu) * self.d + mu]
    }
}

/// A smooth `u(N)`-valued 1-form `A = A_μ dx^μ` on `ℝ^d`.
///
/// Implementations are immutable after construction and must be safe to
/// evaluate from several threads at once.
pub trait ConnectionField: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;

    fn matrix_size(&self) -> usize;

    /// Fills `jet` with `A`, and its derivatives up to `order` (0, 1 or 2), at `x`.
    fn fill_jet(&self, x: &[f64], order: usize, jet: &mut FieldJet);

    /// Documented sup-norm bound on `A` and its first two derivatives, if
    /// the family has one.
    fn bound(&self) -> Option<f64>;

    fn label(&self) -> String;

    fn new_jet(&self) -> FieldJet {
        FieldJet::new(self.dim(), self.matrix_size())
    }

    fn eval(&self, x: &[f64]) -> Vec<CMat> {
        let mut jet = self.new_jet();
        self.fill_jet(x, 0, &mut jet);
        jet.a
    }

    /// `∂_ν A_μ` at index `ν·d + μ`.
    fn deval(&self, x: &[f64]) -> Vec<CMat> {
        let mut jet = self.new_jet();
        self.fill_jet(x, 1, &mut jet);
        jet.da
    }

    /// `∂_λ ∂_ν A_μ` at index `(λ·d + ν)·d + μ`.
    fn ddeval(&self, x: &[f64]) -> Vec<CMat> {
        let mut jet = self.new_jet();
        self.fill_jet(x, 2, &mut jet);
        jet.dda
    }
}

/// `F_μν` at a point, stored densely with `F_νμ = −F_μν`.
#[derive(Clone, Debug)]
pub struct CurvatureAtPoint {
    d: usize,
    f: Vec<CMat>,
}

impl CurvatureAtPoint {
    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn get(&self, mu: usize, nu: usize) -> &CMat {
        &self.f[mu * self.d + nu]
    }

    pub fn as_slice(&self) -> &[CMat] {
        &self.f
    }
}

/// `∇_λ F_μν` at a point.
#[derive(Clone, Debug)]
pub struct CovariantCurvature {
    d: usize,
    v: Vec<CMat>,
}

impl CovariantCurvature {
    pub fn get(&self, lam: usize, mu: usize, nu: usize) -> &CMat {
        &self.v[(lam * self.d + mu) * self.d + nu]
    }

    pub fn as_slice(&self) -> &[CMat] {
        &self.v
    }
}

/// Writes `F_μν` into `out[μ·d + ν]` from a jet of order ≥ 1.
pub fn curvature_from_jet(jet: &FieldJet, out: &mut [CMat]) {
    let d = jet.dim();
    debug_assert!(jet.order() >= 1 && out.len() >= d * d);
    for mu in 0..d {
        out[mu * d + mu] = CMat::zeros(jet.matrix_size());
        for nu in mu + 1..d {
            let f = *jet.da(mu, nu) - *jet.da(nu, mu) + jet.a[mu].bracket(&jet.a[nu]);
            out[mu * d + nu] = f;
            out[nu * d + mu] = -f;
        }
    }
}

/// Writes `∇_λ F_μν` into `out[(λ·d + μ)·d + ν]` from a jet of order 2 and
/// the curvature produced by [`curvature_from_jet`].
pub fn cov_deriv_from_jet(jet: &FieldJet, f: &[CMat], out: &mut [CMat]) {
    let d = jet.dim();
    debug_assert!(jet.order() >= 2 && out.len() >= d * d * d);
    let z = CMat::zeros(jet.matrix_size());
    for lam in 0..d {
        for mu in 0..d {
            out[(lam * d + mu) * d + mu] = z;
            for nu in mu + 1..d {
                // ∂_λ F_μν = ∂_λ∂_μ A_ν − ∂_λ∂_ν A_μ + [∂_λ A_μ, A_ν] + [A_μ, ∂_λ A_ν]
                let df = *jet.dda(lam, mu, nu) - *jet.dda(lam, nu, mu)
                    + jet.da(lam, mu).bracket(&jet.a[nu])
                    + jet.a[mu].bracket(jet.da(lam, nu));
                let v = df + jet.a[lam].bracket(&f[mu * d + nu]);
                out[(lam * d + mu) * d + nu] = v;
                out[(lam * d + nu) * d + mu] = -v;
            }
        }
    }
}

/// `F_μν(x)`.
pub fn curvature(field: &dyn ConnectionField, x: &[f64]) -> CurvatureAtPoint {
    let d = field.dim();
    let mut jet = field.new_jet();
    field.fill_jet(x, 1, &mut jet);
    let mut f = vec![CMat::zeros(field.matrix_size()); d * d];
    curvature_from_jet(&jet, &mut f);
    CurvatureAtPoint { d, f }
}

/// `∇_λ F_μν(x)`.
pub fn cov_deriv_curvature(field: &dyn ConnectionField, x: &[f64]) -> CovariantCurvature {
    let d = field.dim();
    let n = field.matrix_size();
    let mut jet = field.new_jet();
    field.fill_jet(x, 2, &mut jet);
    let mut f = vec![CMat::zeros(n); d * d];
    curvature_from_jet(&jet, &mut f);
    let mut v = vec![CMat::zeros(n); d * d * d];
    cov_deriv_from_jet(&jet, &f, &mut v);
    CovariantCurvature { d, v }
}

/// Yang–Mills residual `Σ_μ ∇_μ F_μν`, one matrix per `ν`.
pub fn ym_residual(field: &dyn ConnectionField, x: &[f64]) -> Vec<CMat> {
    let cov = cov_deriv_curvature(field, x);
    ym_contraction(field.dim(), field.matrix_size(), cov.as_slice())
}

/// `Σ_μ V_{μμν}` for a dense `d³` array indexed `(λ·d + μ)·d + ν`.
pub fn ym_contraction(d: usize, n: usize, cov: &[CMat]) -> Vec<CMat> {
    (0..d)
        .map(|nu| {
            let mut acc = CMat::zeros(n);
            for mu in 0..d {
                acc += cov[(mu * d + mu) * d + nu];
            }
            acc
        })
        .collect()
}

/// Cyclic sum `∇_λ F_μν + ∇_ν F_λμ + ∇_μ F_νλ`, indexed `(λ·d + μ)·d + ν`.
pub fn bianchi_residual(field: &dyn ConnectionField, x: &[f64]) -> Vec<CMat> {
    let d = field.dim();
    let cov = cov_deriv_curvature(field, x);
    let mut out = Vec::with_capacity(d * d * d);
    for lam in 0..d {
        for mu in 0..d {
            for nu in 0..d {
                out.push(*cov.get(lam, mu, nu) + *cov.get(nu, lam, mu) + *cov.get(mu, nu, lam));
            }
        }
    }
    out
}

/// `-Σ_{μν} tr(F_μν F_μν)`, the Yang–Mills action density (non-negative).
pub fn action_density(field: &dyn ConnectionField, x: &[f64]) -> f64 {
    let f = curvature(field, x);
    -f.as_slice().iter().map(|m| m.matmul(m).trace().re).sum::<f64>()
}

/// `-Σ_ν tr(Y_ν Y_ν)` with `Y_ν = Σ_μ ∇_μ F_μν`; zero exactly on Yang–Mills solutions.
pub fn ym_residual_density(field: &dyn ConnectionField, x: &[f64]) -> f64 {
    -ym_residual(field, x).iter().map(|m| m.matmul(m).trace().re).sum::<f64>()
}

#[cfg(test)]
mod tests;
