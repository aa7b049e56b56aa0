//! Directional derivatives of the transport endpoint `U = U^x(b, 1)` along
//! Cameron–Martin shifts of the driving path.
//!
//! The closed-form derivatives are assembled from the `L` and `J` grids.
//! Iterated Stratonovich integrals use the nested midpoint rule
//! `Σ_i ΔI^u_i · ½(I^v_i + I^v_{i+1})`, which keeps the discrete product
//! rule exact. The finite-difference oracles re-solve the transport along
//! `b + εu` and know nothing about `L` or `J`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gauge::ConnectionField;
use crate::liealg::CMat;
use crate::paths::{BrownianPath, Direction, DirectionGrid};
use crate::transport::{process_grids, solve_transport, strat_with, time_with, ProcessGrid, ProcessLevel, Scheme, TransportGrid};

/// A derivative value together with the addends it was summed from.
#[derive(Clone, Debug, PartialEq)]
pub struct VariationResult {
    pub value: CMat,
    pub breakdown: Vec<(&'static str, CMat)>,
}

impl VariationResult {
    fn from_terms(n: usize, breakdown: Vec<(&'static str, CMat)>) -> Self {
        let mut value = CMat::zeros(n);
        for (_, t) in &breakdown {
            value += *t;
        }
        VariationResult { value, breakdown }
    }

    pub fn term(&self, name: &str) -> Option<&CMat> {
        self.breakdown.iter().find(|(k, _)| *k == name).map(|(_, v)| v)
    }
}

fn check_grids(path: &BrownianPath, tg: &TransportGrid, pg: &ProcessGrid) -> Result<()> {
    if tg.steps() != path.steps() || pg.steps() != path.steps() || pg.dim() != path.dim() {
        return Err(Error::InvalidInput(format!(
            "grid mismatch: path M={} d={}, transport M={}, processes M={} d={}",
            path.steps(),
            path.dim(),
            tg.steps(),
            pg.steps(),
            pg.dim()
        )));
    }
    Ok(())
}

fn check_direction(u: &Direction, d: usize) -> Result<()> {
    u.validate(d).map_err(Error::from)
}

fn require_vanishing(u: &Direction, v: &Direction) -> Result<()> {
    if !u.vanishes_at_end() || !v.vanishes_at_end() {
        return Err(Error::Precondition(
            "second-order derivatives need directions with u(1) = v(1) = 0".into(),
        ));
    }
    Ok(())
}

/// `I^u(t_i) = ∫_0^{t_i} L_μλ u^μ ∘db^λ` for every grid index.
pub fn cumulative_l_integral(path: &BrownianPath, pg: &ProcessGrid, ug: &DirectionGrid) -> Vec<CMat> {
    let d = pg.dim();
    let n = pg.matrix_size();
    let m = path.steps();
    let weighted = |i: usize, j: usize| {
        // Σ_{μλ} u^μ(t_i) L_μλ(t_i) Δb_j^λ
        let mut acc = CMat::zeros(n);
        for (mu, &c) in ug.u(i).iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            for lam in 0..d {
                acc.axpy(c * path.increment(j, lam), pg.l(i, mu, lam));
            }
        }
        acc
    };
    let mut out = Vec::with_capacity(m + 1);
    let mut cur = CMat::zeros(n);
    out.push(cur);
    for i in 0..m {
        let delta = (weighted(i, i) + weighted(i + 1, i)).scale(0.5);
        cur += delta;
        out.push(cur);
    }
    out
}

/// Nested midpoint sum `Σ_i ΔI^a_i · ½(I^b_i + I^b_{i+1})`.
fn nested(ia: &[CMat], ib: &[CMat]) -> CMat {
    let mut acc = CMat::zeros(ia[0].dim());
    for i in 0..ia.len() - 1 {
        let da = ia[i + 1] - ia[i];
        acc += da.matmul(&(ib[i] + ib[i + 1]).scale(0.5));
    }
    acc
}

/// `Σ_i [ΔI^a_i, ½(I^b_i + I^b_{i+1})]`.
fn nested_bracket(ia: &[CMat], ib: &[CMat]) -> CMat {
    let mut acc = CMat::zeros(ia[0].dim());
    for i in 0..ia.len() - 1 {
        let da = ia[i + 1] - ia[i];
        acc += da.bracket(&(ib[i] + ib[i + 1]).scale(0.5));
    }
    acc
}

/// `A_μ(x + b_1) u^μ(1)`.
fn endpoint_connection(field: &dyn ConnectionField, tg: &TransportGrid, path: &BrownianPath, u: &Direction) -> CMat {
    let d = field.dim();
    let y: Vec<f64> = tg.base_point().iter().zip(path.endpoint()).map(|(a, b)| a + b).collect();
    let a = field.eval(&y);
    let mut uend = vec![0.0; d];
    u.value(1.0, &mut uend);
    let mut acc = CMat::zeros(field.matrix_size());
    for mu in 0..d {
        if uend[mu] != 0.0 {
            acc.axpy(uend[mu], &a[mu]);
        }
    }
    acc
}

/// `∂_u U = −U ∫L_μν u^μ ∘db^ν − A_μ(x + b_1) u^μ(1) U`.
pub fn first_variation_u(
    field: &dyn ConnectionField,
    path: &BrownianPath,
    tg: &TransportGrid,
    pg: &ProcessGrid,
    u: &Direction,
) -> Result<VariationResult> {
    check_grids(path, tg, pg)?;
    check_direction(u, pg.dim())?;
    let iu = cumulative_l_integral(path, pg, &u.on_grid(path));
    let big_u = tg.endpoint();
    let stochastic = -big_u.matmul(&iu[path.steps()]);
    let boundary = if u.vanishes_at_end() {
        CMat::zeros(pg.matrix_size())
    } else {
        -endpoint_connection(field, tg, path, u).matmul(big_u)
    };
    Ok(VariationResult::from_terms(pg.matrix_size(), vec![("stochastic", stochastic), ("boundary", boundary)]))
}

/// `∂_u U⁻¹ = (∫L_μν u^μ ∘db^ν) U⁻¹ + U⁻¹ A_μ(x + b_1) u^μ(1)`.
pub fn first_variation_uinv(
    field: &dyn ConnectionField,
    path: &BrownianPath,
    tg: &TransportGrid,
    pg: &ProcessGrid,
    u: &Direction,
) -> Result<VariationResult> {
    check_grids(path, tg, pg)?;
    check_direction(u, pg.dim())?;
    let iu = cumulative_l_integral(path, pg, &u.on_grid(path));
    let uinv = tg.endpoint_inv();
    let stochastic = iu[path.steps()].matmul(uinv);
    let boundary = if u.vanishes_at_end() {
        CMat::zeros(pg.matrix_size())
    } else {
        uinv.matmul(&endpoint_connection(field, tg, path, u))
    };
    Ok(VariationResult::from_terms(pg.matrix_size(), vec![("stochastic", stochastic), ("boundary", boundary)]))
}

/// `−½ ∫ (J_νμλ + J_μνλ) u^μ v^ν ∘db^λ`.
fn symmetrized_j_term(path: &BrownianPath, pg: &ProcessGrid, ug: &DirectionGrid, vg: &DirectionGrid) -> CMat {
    let d = pg.dim();
    let n = pg.matrix_size();
    let mut acc = CMat::zeros(n);
    for lam in 0..d {
        acc += strat_with(path, lam, n, |i| {
            let mut s = CMat::zeros(n);
            for (mu, &a) in ug.u(i).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (nu, &b) in vg.u(i).iter().enumerate() {
                    if b == 0.0 {
                        continue;
                    }
                    s.axpy(a * b, &(*pg.j(i, nu, mu, lam) + *pg.j(i, mu, nu, lam)));
                }
            }
            s
        });
    }
    acc.scale(-0.5)
}

/// `−½ ∫ L_μν (u̇^ν v^μ + v̇^ν u^μ) dt`.
fn rate_time_term(path: &BrownianPath, pg: &ProcessGrid, ug: &DirectionGrid, vg: &DirectionGrid) -> CMat {
    let d = pg.dim();
    let n = pg.matrix_size();
    time_with(path, n, |i| {
        let mut s = CMat::zeros(n);
        let (u, ud, v, vd) = (ug.u(i), ug.udot(i), vg.u(i), vg.udot(i));
        for mu in 0..d {
            for nu in 0..d {
                let c = ud[nu] * v[mu] + vd[nu] * u[mu];
                if c != 0.0 {
                    s.axpy(c, pg.l(i, mu, nu));
                }
            }
        }
        s
    })
    .scale(-0.5)
}

fn require_full(pg: &ProcessGrid) -> Result<()> {
    if pg.level() != ProcessLevel::Full {
        return Err(Error::InvalidInput("second-order derivatives need a full process grid".into()));
    }
    Ok(())
}

/// `∂_v ∂_u U` for endpoint-vanishing directions.
pub fn second_variation_u(
    path: &BrownianPath,
    tg: &TransportGrid,
    pg: &ProcessGrid,
    u: &Direction,
    v: &Direction,
) -> Result<VariationResult> {
    check_grids(path, tg, pg)?;
    check_direction(u, pg.dim())?;
    check_direction(v, pg.dim())?;
    require_vanishing(u, v)?;
    require_full(pg)?;
    let (ug, vg) = (u.on_grid(path), v.on_grid(path));
    let iu = cumulative_l_integral(path, pg, &ug);
    let iv = cumulative_l_integral(path, pg, &vg);
    let big_u = tg.endpoint();
    let terms = vec![
        ("iterated_uv", big_u.matmul(&nested(&iu, &iv))),
        ("iterated_vu", big_u.matmul(&nested(&iv, &iu))),
        ("symmetrized_j", big_u.matmul(&symmetrized_j_term(path, pg, &ug, &vg))),
        ("time", big_u.matmul(&rate_time_term(path, pg, &ug, &vg))),
    ];
    Ok(VariationResult::from_terms(pg.matrix_size(), terms))
}

/// `B u = U⁻¹ ∂_u U`, a `u(N)` element.
pub fn b_apply(
    field: &dyn ConnectionField,
    path: &BrownianPath,
    tg: &TransportGrid,
    pg: &ProcessGrid,
    u: &Direction,
) -> Result<CMat> {
    check_grids(path, tg, pg)?;
    check_direction(u, pg.dim())?;
    let iu = cumulative_l_integral(path, pg, &u.on_grid(path));
    let mut out = -iu[path.steps()];
    if !u.vanishes_at_end() {
        let a = endpoint_connection(field, tg, path, u);
        out -= tg.endpoint_inv().matmul(&a.matmul(tg.endpoint()));
    }
    Ok(out)
}

/// `∂_u (B v)` for endpoint-vanishing directions.
pub fn b_variation(
    path: &BrownianPath,
    tg: &TransportGrid,
    pg: &ProcessGrid,
    u: &Direction,
    v: &Direction,
) -> Result<VariationResult> {
    check_grids(path, tg, pg)?;
    check_direction(u, pg.dim())?;
    check_direction(v, pg.dim())?;
    require_vanishing(u, v)?;
    require_full(pg)?;
    let (ug, vg) = (u.on_grid(path), v.on_grid(path));
    let iu = cumulative_l_integral(path, pg, &ug);
    let iv = cumulative_l_integral(path, pg, &vg);
    let terms = vec![
        ("commutator", nested_bracket(&iv, &iu)),
        ("symmetrized_j", symmetrized_j_term(path, pg, &ug, &vg)),
        ("time", rate_time_term(path, pg, &ug, &vg)),
    ];
    Ok(VariationResult::from_terms(pg.matrix_size(), terms))
}

/// The two-parameter kernel `Z_ν(b, t, s)` with `∂_u U(t) = ∫ Z_μ(b, t, s) u̇^μ(s) ds`.
#[derive(Clone, Debug)]
pub struct MalliavinKernel {
    d: usize,
    n: usize,
    steps: usize,
    u: Vec<CMat>,
    /// `U_s⁻¹ A_ν(x + b_s) U_s` at `s·d + ν`.
    a_conj: Vec<CMat>,
    /// `∫_0^{s} U_r⁻¹ ∂_ν A_μ(x + b_r) U_r ∘db^μ_r` at `s·d + ν`.
    cum: Vec<CMat>,
}

impl MalliavinKernel {
    pub fn new(field: &dyn ConnectionField, path: &BrownianPath, tg: &TransportGrid) -> Self {
        let d = field.dim();
        let n = field.matrix_size();
        let m = path.steps();
        let mut jet = field.new_jet();
        let mut y = vec![0.0; d];
        let mut a_conj = Vec::with_capacity((m + 1) * d);
        // U⁻¹ ∂_ν A_μ U at (s·d + ν)·d + μ
        let mut da_conj = Vec::with_capacity((m + 1) * d * d);
        for i in 0..=m {
            for (k, v) in y.iter_mut().enumerate() {
                *v = tg.base_point()[k] + path.at(i)[k];
            }
            field.fill_jet(&y, 1, &mut jet);
            let (u, ui) = (tg.u(i), tg.uinv(i));
            for nu in 0..d {
                a_conj.push(ui.matmul(&jet.a[nu].matmul(u)));
            }
            for nu in 0..d {
                for mu in 0..d {
                    da_conj.push(ui.matmul(&jet.da(nu, mu).matmul(u)));
                }
            }
        }
        let mut cum = Vec::with_capacity((m + 1) * d);
        cum.extend(std::iter::repeat_n(CMat::zeros(n), d));
        for i in 0..m {
            for nu in 0..d {
                let mut step = CMat::zeros(n);
                for mu in 0..d {
                    let w = 0.5 * path.increment(i, mu);
                    step.axpy(w, &da_conj[(i * d + nu) * d + mu]);
                    step.axpy(w, &da_conj[((i + 1) * d + nu) * d + mu]);
                }
                let prev = cum[i * d + nu];
                cum.push(prev + step);
            }
        }
        MalliavinKernel { d, n, steps: m, u: (0..=m).map(|i| *tg.u(i)).collect(), a_conj, cum }
    }

    /// `Z_ν(b, t_ti, s_si)`; zero when `s > t`.
    pub fn eval(&self, nu: usize, ti: usize, si: usize) -> CMat {
        if si > ti {
            return CMat::zeros(self.n);
        }
        let d = self.d;
        let inner = self.a_conj[si * d + nu] + self.cum[ti * d + nu] - self.cum[si * d + nu];
        -self.u[ti].matmul(&inner)
    }

    /// Trapezoid quadrature of `∫_0^1 Z_μ(b, 1, s) u̇^μ(s) ds`.
    pub fn reconstruct(&self, path: &BrownianPath, u: &Direction) -> CMat {
        let ug = u.on_grid(path);
        let m = self.steps;
        time_with(path, self.n, |si| {
            let mut acc = CMat::zeros(self.n);
            for (mu, &r) in ug.udot(si).iter().enumerate() {
                if r != 0.0 {
                    acc.axpy(r, &self.eval(mu, m, si));
                }
            }
            acc
        })
    }
}

/// Single evaluation of the kernel at grid indices `(t_index, s_index)`.
pub fn malliavin_kernel_z(
    field: &dyn ConnectionField,
    path: &BrownianPath,
    tg: &TransportGrid,
    nu: usize,
    t_index: usize,
    s_index: usize,
) -> Result<CMat> {
    if t_index > path.steps() || s_index > path.steps() || nu >= field.dim() {
        return Err(Error::InvalidInput(format!(
            "kernel index out of range: nu={nu}, t={t_index}, s={s_index}, M={}",
            path.steps()
        )));
    }
    Ok(MalliavinKernel::new(field, path, tg).eval(nu, t_index, s_index))
}

/// Finite-difference settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FdOptions {
    pub epsilon: f64,
    /// Also evaluate at `ε/2` and `ε/4` and flag an inconsistent error ratio.
    pub richardson: bool,
}

impl Default for FdOptions {
    fn default() -> Self {
        FdOptions { epsilon: 1e-4, richardson: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FdWarning {
    /// Successive differences did not shrink by the central-difference factor 4.
    RichardsonInconsistent { ratio: f64, coarse: f64, fine: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct FdEstimate {
    pub value: CMat,
    pub warning: Option<FdWarning>,
}

fn with_richardson(
    opts: FdOptions,
    order: i32,
    scale: f64,
    mut est: impl FnMut(f64) -> Result<CMat>,
) -> Result<FdEstimate> {
    if !(opts.epsilon > 0.0 && opts.epsilon.is_finite()) {
        return Err(Error::InvalidInput(format!("finite-difference step must be > 0, got {}", opts.epsilon)));
    }
    let e0 = est(opts.epsilon)?;
    if !opts.richardson {
        return Ok(FdEstimate { value: e0, warning: None });
    }
    let e1 = est(opts.epsilon / 2.0)?;
    let e2 = est(opts.epsilon / 4.0)?;
    let coarse = (e0 - e1).frob_norm();
    let fine = (e1 - e2).frob_norm();
    let floor = 1e3 * f64::EPSILON * scale / (opts.epsilon / 4.0).powi(order);
    let warning = if coarse <= floor && fine <= floor {
        None
    } else {
        let ratio = coarse / fine;
        if (2.0..=8.0).contains(&ratio) {
            None
        } else {
            Some(FdWarning::RichardsonInconsistent { ratio, coarse, fine })
        }
    };
    Ok(FdEstimate { value: e0, warning })
}

fn endpoint_on(field: &dyn ConnectionField, x: &[f64], path: &BrownianPath, scheme: Scheme) -> Result<CMat> {
    Ok(*solve_transport(field, x, path, scheme)?.endpoint())
}

/// Central difference of `U(b + εu, 1)` in `ε`.
pub fn fd_variation(
    field: &dyn ConnectionField,
    x: &[f64],
    path: &BrownianPath,
    scheme: Scheme,
    u: &Direction,
    opts: FdOptions,
) -> Result<FdEstimate> {
    check_direction(u, field.dim())?;
    let scale = (field.matrix_size() as f64).sqrt();
    with_richardson(opts, 1, scale, |e| {
        let p = endpoint_on(field, x, &path.shifted(&[(u, e)]), scheme)?;
        let m = endpoint_on(field, x, &path.shifted(&[(u, -e)]), scheme)?;
        Ok((p - m).scale(0.5 / e))
    })
}

/// Central difference of `U(b + εu, 1)⁻¹` in `ε`.
pub fn fd_variation_inv(
    field: &dyn ConnectionField,
    x: &[f64],
    path: &BrownianPath,
    scheme: Scheme,
    u: &Direction,
    opts: FdOptions,
) -> Result<FdEstimate> {
    check_direction(u, field.dim())?;
    let scale = (field.matrix_size() as f64).sqrt();
    with_richardson(opts, 1, scale, |e| {
        let p = endpoint_on(field, x, &path.shifted(&[(u, e)]), scheme)?.adjoint();
        let m = endpoint_on(field, x, &path.shifted(&[(u, -e)]), scheme)?.adjoint();
        Ok((p - m).scale(0.5 / e))
    })
}

/// Mixed central second difference of `U(b + εu + δv, 1)` with `δ = ε`.
pub fn fd_second_variation(
    field: &dyn ConnectionField,
    x: &[f64],
    path: &BrownianPath,
    scheme: Scheme,
    u: &Direction,
    v: &Direction,
    opts: FdOptions,
) -> Result<FdEstimate> {
    check_direction(u, field.dim())?;
    check_direction(v, field.dim())?;
    let scale = (field.matrix_size() as f64).sqrt();
    with_richardson(opts, 2, scale, |e| {
        let mut acc = CMat::zeros(field.matrix_size());
        for (su, sv, w) in [(e, e, 1.0), (e, -e, -1.0), (-e, e, -1.0), (-e, -e, 1.0)] {
            acc.axpy(w, &endpoint_on(field, x, &path.shifted(&[(u, su), (v, sv)]), scheme)?);
        }
        Ok(acc.scale(0.25 / (e * e)))
    })
}

/// Central difference of `B(b + εu) v` in `ε`.
pub fn fd_b_variation(
    field: &dyn ConnectionField,
    x: &[f64],
    path: &BrownianPath,
    scheme: Scheme,
    u: &Direction,
    v: &Direction,
    opts: FdOptions,
) -> Result<FdEstimate> {
    check_direction(u, field.dim())?;
    check_direction(v, field.dim())?;
    let b_on = |p: &BrownianPath| -> Result<CMat> {
        let tg = solve_transport(field, x, p, scheme)?;
        let pg = process_grids(field, p, &tg, ProcessLevel::Curvature);
        b_apply(field, p, &tg, &pg, v)
    };
    let scale = b_on(path)?.frob_norm().max(1.0);
    with_richardson(opts, 1, scale, |e| {
        let p = b_on(&path.shifted(&[(u, e)]))?;
        let m = b_on(&path.shifted(&[(u, -e)]))?;
        Ok((p - m).scale(0.5 / e))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gauge::{builtin, FamilySpec};
    use crate::liealg::c64;
    use crate::paths::sine_mode;

    fn setup(spec: FamilySpec, d: usize, n: usize, m: usize, seed: u64) -> (std::sync::Arc<dyn ConnectionField>, BrownianPath, TransportGrid, ProcessGrid) {
        let a = builtin(&spec, d, n).unwrap();
        let p = BrownianPath::sample(seed, m, d).unwrap();
        let x = vec![0.2; d];
        let tg = solve_transport(a.as_ref(), &x, &p, Scheme::GeometricMidpoint).unwrap();
        let pg = process_grids(a.as_ref(), &p, &tg, ProcessLevel::Full);
        (a, p, tg, pg)
    }

    #[test]
    fn zero_field_derivatives_vanish() {
        let (a, p, tg, pg) = setup(FamilySpec::Zero, 2, 2, 64, 1);
        let u = Direction::Sine { component: 0, mode: 1 };
        let v = Direction::Sine { component: 1, mode: 3 };
        assert_eq!(first_variation_u(a.as_ref(), &p, &tg, &pg, &u).unwrap().value.frob_norm(), 0.0);
        assert_eq!(second_variation_u(&p, &tg, &pg, &u, &v).unwrap().value.frob_norm(), 0.0);
        assert_eq!(b_apply(a.as_ref(), &p, &tg, &pg, &u).unwrap().frob_norm(), 0.0);
        assert_eq!(b_variation(&p, &tg, &pg, &u, &v).unwrap().value.frob_norm(), 0.0);
        assert_eq!(malliavin_kernel_z(a.as_ref(), &p, &tg, 0, 64, 10).unwrap().frob_norm(), 0.0);
        let fd = fd_variation(a.as_ref(), &[0.2, 0.2], &p, Scheme::GeometricMidpoint, &u, FdOptions::default()).unwrap();
        assert_eq!(fd.value.frob_norm(), 0.0);
        assert!(fd.warning.is_none());
    }

    #[test]
    fn breakdown_sums_to_value() {
        let (a, p, tg, pg) = setup(FamilySpec::Bpst { rho: 1.0 }, 4, 2, 128, 3);
        let u = Direction::Ramp { slope: vec![0.5, -1.0, 0.0, 0.2] };
        let r = first_variation_u(a.as_ref(), &p, &tg, &pg, &u).unwrap();
        let mut sum = CMat::zeros(2);
        for (_, t) in &r.breakdown {
            sum += *t;
        }
        assert_eq!(sum, r.value);
        assert!(r.term("boundary").unwrap().frob_norm() > 0.0);
    }

    #[test]
    fn abelian_first_variation_closed_form() {
        let f = 1.0;
        let (a, p, tg, pg) = setup(FamilySpec::ConstantAbelian { f }, 2, 1, 1024, 9);
        let u = Direction::Sine { component: 0, mode: 1 };
        let r = first_variation_u(a.as_ref(), &p, &tg, &pg, &u).unwrap();
        // −U · i f ∫ h_1 ∘db^1 on the same grid
        let mut s = 0.0;
        for i in 0..1024 {
            s += 0.5 * (sine_mode(1, p.time(i)) + sine_mode(1, p.time(i + 1))) * p.increment(i, 1);
        }
        let expected = -tg.endpoint()[(0, 0)] * c64(0.0, f * s);
        assert!((r.value[(0, 0)] - expected).norm() <= 1e-8);
    }

    #[test]
    fn product_rule_for_inverse() {
        let (a, p, tg, pg) = setup(FamilySpec::Custom { seed: 3, amplitude: 1.0, modes: 3 }, 3, 2, 256, 5);
        for u in [Direction::Sine { component: 2, mode: 2 }, Direction::Ramp { slope: vec![1.0, 0.3, -0.4] }] {
            let du = first_variation_u(a.as_ref(), &p, &tg, &pg, &u).unwrap().value;
            let dinv = first_variation_uinv(a.as_ref(), &p, &tg, &pg, &u).unwrap().value;
            let r = dinv.matmul(tg.endpoint()) + tg.endpoint_inv().matmul(&du);
            assert!(r.frob_norm() <= 1e-10);
        }
    }

    #[test]
    fn second_variation_is_symmetric_and_checks_endpoints() {
        let (_, p, tg, pg) = setup(FamilySpec::SineNonym { amplitude: 1.0 }, 2, 1, 256, 2);
        let u = Direction::Sine { component: 0, mode: 2 };
        let v = Direction::Sine { component: 1, mode: 1 };
        let uv = second_variation_u(&p, &tg, &pg, &u, &v).unwrap().value;
        let vu = second_variation_u(&p, &tg, &pg, &v, &u).unwrap().value;
        assert!((uv - vu).frob_norm() <= 1e-8);
        let ramp = Direction::Ramp { slope: vec![1.0, 0.0] };
        assert!(matches!(second_variation_u(&p, &tg, &pg, &ramp, &v), Err(Error::Precondition(_))));
        assert!(matches!(b_variation(&p, &tg, &pg, &u, &ramp), Err(Error::Precondition(_))));
    }

    #[test]
    fn b_is_anti_hermitian_and_matches_direct_formula() {
        let (a, p, tg, pg) = setup(FamilySpec::Bpst { rho: 0.8 }, 4, 2, 256, 7);
        let u = Direction::Sine { component: 3, mode: 2 };
        let b = b_apply(a.as_ref(), &p, &tg, &pg, &u).unwrap();
        assert!(b.anti_hermitian_defect() <= 1e-10);
        let mut direct = CMat::zeros(2);
        for nu in 0..4 {
            direct -= strat_with(&p, nu, 2, |i| pg.l(i, 3, nu).scale(sine_mode(2, p.time(i))));
        }
        assert!((b - direct).frob_norm() <= 1e-10);
    }

    #[test]
    fn kernel_is_causal() {
        let (a, p, tg, _) = setup(FamilySpec::Bpst { rho: 1.0 }, 4, 2, 64, 11);
        let z = MalliavinKernel::new(a.as_ref(), &p, &tg);
        assert_eq!(z.eval(1, 20, 21).frob_norm(), 0.0);
        assert!(z.eval(1, 20, 20).frob_norm() > 0.0);
        assert!(malliavin_kernel_z(a.as_ref(), &p, &tg, 4, 1, 1).is_err());
    }

    #[test]
    fn fd_rejects_bad_step() {
        let (a, p, _, _) = setup(FamilySpec::Zero, 2, 1, 16, 1);
        let u = Direction::Sine { component: 0, mode: 1 };
        let opts = FdOptions { epsilon: 0.0, richardson: false };
        assert!(fd_variation(a.as_ref(), &[0.0, 0.0], &p, Scheme::GeometricMidpoint, &u, opts).is_err());
    }
}
