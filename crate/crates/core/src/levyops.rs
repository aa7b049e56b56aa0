//! Cesàro partial sums over the sine basis `p_μ h_k` and their closed forms:
//! the Lévy Laplacian and d'Alembertian of the transport endpoint, the Lévy
//! divergence of `B = U⁻¹∂U`, and the divergence of the `d = 3` operator
//! `S h = ∫ ε_μνλ L_νλ h^μ dt`.
//!
//! All partial sums share one [`ModeCache`]. For `u = p_μ h_k` the cache
//! holds, with `I(t) = ∫_0^t h_k L_μλ ∘db^λ`:
//!
//! * `U⁻¹ ∂_u∂_u U = 2 Σ ΔI·Ī − ∫ h_k² J_μμλ ∘db^λ`;
//! * `∂_u(B u) = Σ [ΔI, Ī] − ∫ h_k² J_μμλ ∘db^λ`;
//! * `tr(∂_u U⁻¹ ∂_u U) = −tr(I(1)²)`.

use crate::error::{ConfigError, Error, Result};
use crate::gauge::{ym_residual, ConnectionField};
use crate::liealg::{CMat, C64};
use crate::paths::{sine_mode, BrownianPath};
use crate::transport::{ito_with, strat_with, time_with, ProcessGrid, ProcessLevel, TransportGrid};

/// Per-mode quantities for `u = p_μ h_k`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModeTerms {
    pub laplacian: CMat,
    pub divergence: CMat,
    pub energy: C64,
    /// `∫ ε_μνλ ∂_u L_νλ h_k dt`, present for `d = 3` when requested.
    pub s_divergence: Option<CMat>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ModeOptions {
    pub s_operator: bool,
}

/// Cached mode terms for `k = 1..=modes` and every spatial direction.
#[derive(Clone, Debug)]
pub struct ModeCache {
    d: usize,
    n: usize,
    modes: usize,
    terms: Vec<ModeTerms>,
}

fn levi_civita(a: usize, b: usize, c: usize) -> f64 {
    match (a, b, c) {
        (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1.0,
        (0, 2, 1) | (2, 1, 0) | (1, 0, 2) => -1.0,
        _ => 0.0,
    }
}

impl ModeCache {
    pub fn build(path: &BrownianPath, pg: &ProcessGrid, modes: usize, opts: ModeOptions) -> Result<Self> {
        let d = pg.dim();
        let n = pg.matrix_size();
        let m = path.steps();
        if modes == 0 {
            return Err(ConfigError::new("mode count must be >= 1").into());
        }
        if pg.steps() != m || pg.dim() != path.dim() {
            return Err(Error::InvalidInput("process grid does not match path".into()));
        }
        if pg.level() < ProcessLevel::Contracted {
            return Err(Error::InvalidInput("mode sums need J on the process grid".into()));
        }
        let with_s = opts.s_operator;
        if with_s && (d != 3 || pg.level() != ProcessLevel::Full) {
            return Err(ConfigError::new("the S operator needs d = 3 and a full process grid").into());
        }

        // Stratonovich weights w_i^λ = ½(Δb_{i−1}^λ + Δb_i^λ).
        let weight = |i: usize, lam: usize| {
            let left = if i > 0 { path.increment(i - 1, lam) } else { 0.0 };
            let right = if i < m { path.increment(i, lam) } else { 0.0 };
            0.5 * (left + right)
        };
        let mut p_fwd = vec![CMat::zeros(n); d * m];
        let mut p_bwd = vec![CMat::zeros(n); d * m];
        let mut jw = vec![CMat::zeros(n); d * (m + 1)];
        for mu in 0..d {
            for i in 0..=m {
                for lam in 0..d {
                    if i < m {
                        let db = path.increment(i, lam);
                        p_fwd[mu * m + i].axpy(db, pg.l(i, mu, lam));
                        p_bwd[mu * m + i].axpy(db, pg.l(i + 1, mu, lam));
                    }
                    let w = weight(i, lam);
                    jw[mu * (m + 1) + i].axpy(w, pg.jdiag(i, mu, lam));
                }
            }
        }
        let (eps_l, eps_j) = if with_s {
            let mut el = vec![CMat::zeros(n); d * (m + 1)];
            let mut ej = vec![CMat::zeros(n); m + 1];
            for i in 0..=m {
                for a in 0..3 {
                    for b in 0..3 {
                        for c in 0..3 {
                            let e = levi_civita(a, b, c);
                            if e != 0.0 {
                                el[a * (m + 1) + i].axpy(e, pg.l(i, b, c));
                                ej[i].axpy(e, pg.j(i, a, b, c));
                            }
                        }
                    }
                }
            }
            (el, ej)
        } else {
            (Vec::new(), Vec::new())
        };

        let dt = path.dt();
        let mut h = vec![0.0; m + 1];
        let mut terms = Vec::with_capacity(modes * d);
        for k in 1..=modes {
            for (i, hv) in h.iter_mut().enumerate() {
                *hv = sine_mode(k, path.time(i));
            }
            for mu in 0..d {
                let mut cur = CMat::zeros(n);
                let mut prod_fwd = CMat::zeros(n);
                let mut prod_bwd = CMat::zeros(n);
                let mut sq = CMat::zeros(n);
                let mut jterm = CMat::zeros(n);
                let mut s_acc = CMat::zeros(n);
                let mut s_prev = CMat::zeros(n);
                for i in 0..=m {
                    jterm.axpy(h[i] * h[i], &jw[mu * (m + 1) + i]);
                    if with_s {
                        let tw = if i == 0 || i == m { 0.5 * dt } else { dt };
                        let integrand = cur.bracket(&eps_l[mu * (m + 1) + i]);
                        s_acc.axpy(tw * h[i], &integrand);
                        if mu == 0 {
                            s_prev.axpy(tw * h[i] * h[i], &eps_j[i]);
                        }
                    }
                    if i == m {
                        break;
                    }
                    let mut delta = p_fwd[mu * m + i].scale(0.5 * h[i]);
                    delta.axpy(0.5 * h[i + 1], &p_bwd[mu * m + i]);
                    prod_fwd.add_scaled_matmul(1.0, &delta, &cur);
                    prod_bwd.add_scaled_matmul(1.0, &cur, &delta);
                    sq.add_scaled_matmul(1.0, &delta, &delta);
                    cur += delta;
                }
                let laplacian = prod_fwd.scale(2.0) + sq - jterm;
                let divergence = prod_fwd - prod_bwd - jterm;
                let energy = -cur.matmul(&cur).trace();
                let s_divergence = with_s.then(|| s_acc + s_prev);
                terms.push(ModeTerms { laplacian, divergence, energy, s_divergence });
            }
        }
        Ok(ModeCache { d, n, modes, terms })
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// Terms for `u = p_mu h_k`, `k ≥ 1`.
    pub fn term(&self, k: usize, mu: usize) -> &ModeTerms {
        &self.terms[(k - 1) * self.d + mu]
    }

    fn check(&self, n: usize) -> Result<()> {
        if n == 0 || n > self.modes {
            return Err(Error::InvalidInput(format!("partial sum index {n} outside 1..={}", self.modes)));
        }
        Ok(())
    }

    fn cesaro(&self, n: usize, mus: impl Iterator<Item = usize> + Clone, pick: impl Fn(&ModeTerms) -> CMat) -> CMat {
        let mut acc = CMat::zeros(self.n);
        for k in 1..=n {
            for mu in mus.clone() {
                acc += pick(self.term(k, mu));
            }
        }
        acc.scale(1.0 / n as f64)
    }

    /// `(1/n) Σ_{k≤n} U⁻¹ ∂²_{p_μ h_k} U` for a single direction `μ`.
    pub fn directional_laplacian(&self, n: usize, mu: usize) -> Result<CMat> {
        self.check(n)?;
        Ok(self.cesaro(n, mu..mu + 1, |t| t.laplacian))
    }

    /// `(1/n) Σ_{k≤n} Σ_μ tr(∂U⁻¹ ∂U)`.
    pub fn energy_partial(&self, n: usize) -> Result<C64> {
        self.check(n)?;
        let mut acc = C64::new(0.0, 0.0);
        for k in 1..=n {
            for mu in 0..self.d {
                acc += self.term(k, mu).energy;
            }
        }
        Ok(acc / n as f64)
    }
}

/// `(1/n) Σ_{k≤n} Σ_μ ∂²_{p_μ h_k} U(1)`.
pub fn laplacian_partial(cache: &ModeCache, tg: &TransportGrid, n: usize) -> Result<CMat> {
    cache.check(n)?;
    Ok(tg.endpoint().matmul(&cache.cesaro(n, 0..cache.d, |t| t.laplacian)))
}

/// `U(1) (∫ L_μν L_μν dt − ∫ C_ν ∘db^ν)`.
pub fn laplacian_closed(path: &BrownianPath, tg: &TransportGrid, pg: &ProcessGrid) -> CMat {
    let (d, n) = (pg.dim(), pg.matrix_size());
    let energy = time_with(path, n, |i| {
        let mut acc = CMat::zeros(n);
        for mu in 0..d {
            for nu in 0..d {
                let l = pg.l(i, mu, nu);
                acc += l.matmul(l);
            }
        }
        acc
    });
    let mut inner = energy;
    for nu in 0..d {
        inner -= strat_with(path, nu, n, |i| *pg.contraction(i, nu));
    }
    tg.endpoint().matmul(&inner)
}

/// `∫ Σ_ν L_μν L_μν dt − ∫ J_μμν ∘db^ν` for one direction `μ` (no sum over `μ`).
pub fn directional_closed(path: &BrownianPath, pg: &ProcessGrid, mu: usize) -> CMat {
    let (d, n) = (pg.dim(), pg.matrix_size());
    let mut acc = time_with(path, n, |i| {
        let mut acc = CMat::zeros(n);
        for nu in 0..d {
            let l = pg.l(i, mu, nu);
            acc += l.matmul(l);
        }
        acc
    });
    for nu in 0..d {
        acc -= strat_with(path, nu, n, |i| *pg.jdiag(i, mu, nu));
    }
    acc
}

/// `U(1) (D_1 − Σ_{μ≥2} D_μ)` with `D_μ` from [`directional_closed`].
pub fn dalembertian_closed(path: &BrownianPath, tg: &TransportGrid, pg: &ProcessGrid) -> Result<CMat> {
    if pg.dim() < 2 {
        return Err(ConfigError::new("the d'Alembertian needs d >= 2").into());
    }
    let mut inner = directional_closed(path, pg, 0);
    for mu in 1..pg.dim() {
        inner -= directional_closed(path, pg, mu);
    }
    Ok(tg.endpoint().matmul(&inner))
}

/// `(1/n) Σ_{k≤n} (∂²_{p_1 h_k} − Σ_{μ≥2} ∂²_{p_μ h_k}) U(1)`.
pub fn dalembertian_partial(cache: &ModeCache, tg: &TransportGrid, n: usize) -> Result<CMat> {
    if cache.d < 2 {
        return Err(ConfigError::new("the d'Alembertian needs d >= 2").into());
    }
    cache.check(n)?;
    let first = cache.cesaro(n, 0..1, |t| t.laplacian);
    let rest = cache.cesaro(n, 1..cache.d, |t| t.laplacian);
    Ok(tg.endpoint().matmul(&(first - rest)))
}

/// `(1/n) Σ_{k≤n} Σ_μ ∂_{p_μ h_k} B(p_μ h_k)`.
pub fn divergence_partial(cache: &ModeCache, n: usize) -> Result<CMat> {
    cache.check(n)?;
    Ok(cache.cesaro(n, 0..cache.d, |t| t.divergence))
}

/// `−∫ C_ν db^ν` (Itô).
pub fn divergence_closed(path: &BrownianPath, pg: &ProcessGrid) -> CMat {
    let mut acc = CMat::zeros(pg.matrix_size());
    for nu in 0..pg.dim() {
        acc -= ito_with(path, nu, pg.matrix_size(), |i| *pg.contraction(i, nu));
    }
    acc
}

/// `−∫ C_ν ∘db^ν` (Stratonovich).
pub fn divergence_closed_strat(path: &BrownianPath, pg: &ProcessGrid) -> CMat {
    let mut acc = CMat::zeros(pg.matrix_size());
    for nu in 0..pg.dim() {
        acc -= strat_with(path, nu, pg.matrix_size(), |i| *pg.contraction(i, nu));
    }
    acc
}

/// `−∫ U⁻¹ (Σ_μ ∇_μ F_μν)(x + b) U db^ν`, evaluated from the pointwise residual.
pub fn divergence_closed_from_residual(field: &dyn ConnectionField, path: &BrownianPath, tg: &TransportGrid) -> CMat {
    let d = field.dim();
    let n = field.matrix_size();
    let residuals: Vec<Vec<CMat>> = (0..=path.steps())
        .map(|i| {
            let y: Vec<f64> = tg.base_point().iter().zip(path.at(i)).map(|(a, b)| a + b).collect();
            ym_residual(field, &y)
        })
        .collect();
    let mut acc = CMat::zeros(n);
    for nu in 0..d {
        acc -= ito_with(path, nu, n, |i| tg.uinv(i).matmul(&residuals[i][nu].matmul(tg.u(i))));
    }
    acc
}

/// Cesàro partial sum of the divergence of `S h = ∫ ε_μνλ L_νλ h^μ dt` (`d = 3`).
pub fn s_operator_divergence(cache: &ModeCache, n: usize) -> Result<CMat> {
    if cache.d != 3 {
        return Err(ConfigError::new(format!("the S operator is defined for d = 3, got d = {}", cache.d)).into());
    }
    cache.check(n)?;
    if cache.term(1, 0).s_divergence.is_none() {
        return Err(Error::InvalidInput("mode cache built without S-operator terms".into()));
    }
    // The J piece is stored once per k on μ = 0.
    Ok(cache.cesaro(n, 0..3, |t| t.s_divergence.unwrap_or_else(|| CMat::zeros(t.laplacian.dim()))))
}

/// `∫ ε_μνλ J_μνλ dt`, zero by the Bianchi identity.
pub fn s_operator_closed(path: &BrownianPath, pg: &ProcessGrid) -> Result<CMat> {
    if pg.dim() != 3 {
        return Err(ConfigError::new(format!("the S operator is defined for d = 3, got d = {}", pg.dim())).into());
    }
    if pg.level() != ProcessLevel::Full {
        return Err(Error::InvalidInput("the S operator needs a full process grid".into()));
    }
    let n = pg.matrix_size();
    Ok(time_with(path, n, |i| {
        let mut acc = CMat::zeros(n);
        for a in 0..3 {
            for b in 0..3 {
                for c in 0..3 {
                    let e = levi_civita(a, b, c);
                    if e != 0.0 {
                        acc.axpy(e, pg.j(i, a, b, c));
                    }
                }
            }
        }
        acc
    }))
}

/// Partial sums at several `n` next to the closed-form target, one path.
#[derive(Clone, Debug, PartialEq)]
pub struct CesaroSweep {
    pub n_values: Vec<usize>,
    pub partial: Vec<CMat>,
    pub closed: CMat,
}

impl CesaroSweep {
    /// `‖partial(n) − closed‖_F` for each `n`.
    pub fn errors(&self) -> Vec<f64> {
        self.partial.iter().map(|p| (*p - self.closed).frob_norm()).collect()
    }
}

fn check_n_values(n_values: &[usize], cache: &ModeCache) -> Result<()> {
    if n_values.is_empty() || n_values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(ConfigError::new("mode list must be non-empty and strictly increasing").into());
    }
    cache.check(*n_values.last().unwrap_or(&0))
}

pub fn laplacian_sweep(
    cache: &ModeCache,
    path: &BrownianPath,
    tg: &TransportGrid,
    pg: &ProcessGrid,
    n_values: &[usize],
) -> Result<CesaroSweep> {
    check_n_values(n_values, cache)?;
    let partial = n_values.iter().map(|&n| laplacian_partial(cache, tg, n)).collect::<Result<_>>()?;
    Ok(CesaroSweep { n_values: n_values.to_vec(), partial, closed: laplacian_closed(path, tg, pg) })
}

pub fn dalembertian_sweep(
    cache: &ModeCache,
    path: &BrownianPath,
    tg: &TransportGrid,
    pg: &ProcessGrid,
    n_values: &[usize],
) -> Result<CesaroSweep> {
    check_n_values(n_values, cache)?;
    let partial = n_values.iter().map(|&n| dalembertian_partial(cache, tg, n)).collect::<Result<_>>()?;
    Ok(CesaroSweep { n_values: n_values.to_vec(), partial, closed: dalembertian_closed(path, tg, pg)? })
}

pub fn divergence_sweep(cache: &ModeCache, path: &BrownianPath, pg: &ProcessGrid, n_values: &[usize]) -> Result<CesaroSweep> {
    check_n_values(n_values, cache)?;
    let partial = n_values.iter().map(|&n| divergence_partial(cache, n)).collect::<Result<_>>()?;
    Ok(CesaroSweep { n_values: n_values.to_vec(), partial, closed: divergence_closed(path, pg) })
}
