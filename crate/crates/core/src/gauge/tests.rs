use std::f64::consts::{FRAC_PI_2, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::liealg::{c64, pauli};

fn all_families() -> Vec<(FamilySpec, usize, usize)> {
    vec![
        (FamilySpec::Zero, 3, 2),
        (FamilySpec::ConstantAbelian { f: 1.0 }, 2, 1),
        (FamilySpec::ConstantAbelian { f: 0.7 }, 3, 2),
        (FamilySpec::PureGauge { a: 1.0, b: 0.5 }, 2, 2),
        (FamilySpec::PureGauge { a: 0.8, b: 1.3 }, 3, 2),
        (FamilySpec::Bpst { rho: 1.0 }, 4, 2),
        (FamilySpec::Bpst { rho: 0.6 }, 4, 2),
        (FamilySpec::SineNonym { amplitude: 1.0 }, 2, 1),
        (FamilySpec::Custom { seed: 7, amplitude: 1.0, modes: 3 }, 3, 2),
        (FamilySpec::Custom { seed: 11, amplitude: 0.8, modes: 2 }, 4, 3),
    ]
}

fn random_point(rng: &mut ChaCha8Rng, d: usize, scale: f64) -> Vec<f64> {
    (0..d).map(|_| scale * (2.0 * rng.random::<f64>() - 1.0)).collect()
}

#[test]
fn zero_field_has_zero_curvature() {
    let a = builtin(&FamilySpec::Zero, 3, 2).unwrap();
    let x = [0.3, -1.0, 2.0];
    assert!(a.eval(&x).iter().all(|m| m.frob_norm() == 0.0));
    assert!(curvature(a.as_ref(), &x).as_slice().iter().all(|m| m.frob_norm() == 0.0));
    assert!(cov_deriv_curvature(a.as_ref(), &x).as_slice().iter().all(|m| m.frob_norm() == 0.0));
}

#[test]
fn constant_abelian_values_and_curvature() {
    let a = builtin(&FamilySpec::ConstantAbelian { f: 1.0 }, 2, 1).unwrap();
    let vals = a.eval(&[1.0, 0.0]);
    assert!(vals[0].frob_norm() < 1e-15);
    assert!((vals[1][(0, 0)] - c64(0.0, 0.5)).norm() < 1e-15);
    let f = curvature(a.as_ref(), &[0.4, -2.0]);
    assert!((f.get(0, 1)[(0, 0)] - c64(0.0, 1.0)).norm() < 1e-15);
    assert!((f.get(1, 0)[(0, 0)] + c64(0.0, 1.0)).norm() < 1e-15);
    let cov = cov_deriv_curvature(a.as_ref(), &[0.4, -2.0]);
    assert!(cov.as_slice().iter().all(|m| m.frob_norm() < 1e-15));
    assert!(ym_residual(a.as_ref(), &[5.0, 1.0]).iter().all(|m| m.frob_norm() < 1e-15));
}

#[test]
fn sine_family_covariant_derivative_and_residual() {
    let a = builtin(&FamilySpec::SineNonym { amplitude: 1.0 }, 2, 1).unwrap();
    let x = [0.0, FRAC_PI_2];
    let cov = cov_deriv_curvature(a.as_ref(), &x);
    // ∇₂F₂₁ = −i sin(x²)
    assert!((cov.get(1, 1, 0)[(0, 0)] - c64(0.0, -1.0)).norm() < 1e-15);
    let res = ym_residual(a.as_ref(), &x);
    assert!((res[0][(0, 0)] - c64(0.0, -1.0)).norm() < 1e-15);
    assert!(res[1].frob_norm() < 1e-15);
}

#[test]
fn pure_gauge_matches_group_element() {
    let spec = FamilySpec::PureGauge { a: 1.0, b: 0.5 };
    let a = builtin(&spec, 2, 2).unwrap();
    let i = c64(0.0, 1.0);
    let a0 = a.eval(&[0.0, 0.0]);
    assert!(a0[0].max_abs_diff(&(pauli()[2] * i)) < 1e-15);

    let pg = PureGauge { d: 2, a: 1.0, b: 0.5 };
    let x = [0.37, -0.81];
    let h = 1e-5;
    let g = pg.group_element(&x);
    let ginv = g.adjoint();
    let vals = a.eval(&x);
    for mu in 0..2 {
        let mut xp = x;
        let mut xm = x;
        xp[mu] += h;
        xm[mu] -= h;
        let dg = (pg.group_element(&xp) - pg.group_element(&xm)).scale(0.5 / h);
        assert!(ginv.matmul(&dg).max_abs_diff(&vals[mu]) < 1e-9, "mu={mu}");
    }
}

#[test]
fn pure_gauge_is_flat() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for (spec, d) in [(FamilySpec::PureGauge { a: 1.0, b: 0.5 }, 2), (FamilySpec::PureGauge { a: 0.8, b: 1.3 }, 3)] {
        let a = builtin(&spec, d, 2).unwrap();
        for _ in 0..200 {
            let x = random_point(&mut rng, d, 3.0);
            let f = curvature(a.as_ref(), &x);
            assert!(f.as_slice().iter().all(|m| m.frob_norm() <= 1e-10));
        }
    }
}

#[test]
fn bpst_is_self_dual_with_closed_form_curvature() {
    let rho = 0.8;
    let a = builtin(&FamilySpec::Bpst { rho }, 4, 2).unwrap();
    let t = crate::liealg::su2_basis();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let perms: [([usize; 4], f64); 3] =
        [([0, 1, 2, 3], 1.0), ([0, 2, 3, 1], 1.0), ([0, 3, 1, 2], 1.0)];
    for _ in 0..100 {
        let x = random_point(&mut rng, 4, 2.0);
        let r2: f64 = x.iter().map(|v| v * v).sum();
        let f = curvature(a.as_ref(), &x);
        for mu in 0..4 {
            for nu in 0..4 {
                let mut expected = CMat::zeros(2);
                for (ai, ta) in t.iter().enumerate() {
                    expected.axpy(-4.0 * rho * rho * thooft_eta(ai, mu, nu) / (r2 + rho * rho).powi(2), ta);
                }
                assert!(f.get(mu, nu).max_abs_diff(&expected) < 1e-12);
            }
        }
        // F_01 = F_23, F_02 = F_31, F_03 = F_12
        for (p, s) in &perms {
            let lhs = *f.get(p[0], p[1]);
            let rhs = f.get(p[2], p[3]).scale(*s);
            assert!(lhs.max_abs_diff(&rhs) < 1e-12);
        }
        let density = action_density(a.as_ref(), &x);
        assert!((density - bpst_action_density(rho, r2.sqrt())).abs() < 1e-10 * density.max(1.0));
    }
}

#[test]
fn bpst_solves_yang_mills() {
    let a = builtin(&FamilySpec::Bpst { rho: 1.0 }, 4, 2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..100 {
        let x = random_point(&mut rng, 4, 3.0);
        for r in ym_residual(a.as_ref(), &x) {
            assert!(r.frob_norm() <= 1e-10);
        }
    }
}

#[test]
fn bianchi_identity_for_every_family() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for (spec, d, n) in all_families() {
        let a = builtin(&spec, d, n).unwrap();
        for _ in 0..1000 {
            let x = random_point(&mut rng, d, 2.5);
            let worst = bianchi_residual(a.as_ref(), &x).iter().map(CMat::frob_norm).fold(0.0, f64::max);
            assert!(worst <= 1e-10, "{spec:?}: {worst:e}");
        }
    }
}

#[test]
fn curvature_is_antisymmetric_and_anti_hermitian() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for (spec, d, n) in all_families() {
        let a = builtin(&spec, d, n).unwrap();
        for _ in 0..50 {
            let x = random_point(&mut rng, d, 2.0);
            for m in a.eval(&x).iter().chain(a.deval(&x).iter()).chain(a.ddeval(&x).iter()) {
                assert!(m.anti_hermitian_defect() <= 1e-12);
            }
            let f = curvature(a.as_ref(), &x);
            let cov = cov_deriv_curvature(a.as_ref(), &x);
            for mu in 0..d {
                for nu in 0..d {
                    assert_eq!(*f.get(mu, nu), -*f.get(nu, mu));
                    assert!(f.get(mu, nu).anti_hermitian_defect() <= 1e-12);
                    for lam in 0..d {
                        assert_eq!(*cov.get(lam, mu, nu), -*cov.get(lam, nu, mu));
                    }
                }
            }
        }
    }
}

#[test]
fn analytic_derivatives_match_finite_differences() {
    let h = 1e-4;
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for (spec, d, n) in all_families() {
        let a = builtin(&spec, d, n).unwrap();
        for _ in 0..20 {
            let x = random_point(&mut rng, d, 1.5);
            let da = a.deval(&x);
            let dda = a.ddeval(&x);
            for nu in 0..d {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[nu] += h;
                xm[nu] -= h;
                let (ap, am) = (a.eval(&xp), a.eval(&xm));
                let (dp, dm) = (a.deval(&xp), a.deval(&xm));
                for mu in 0..d {
                    let fd = (ap[mu] - am[mu]).scale(0.5 / h);
                    let exact = da[nu * d + mu];
                    let err = (fd - exact).frob_norm();
                    assert!(err <= 1e-6 * exact.frob_norm().max(1.0), "{spec:?} da[{nu}][{mu}] {err:e}");
                    for lam in 0..d {
                        // ∂_ν (∂_λ A_μ)
                        let fd2 = (dp[lam * d + mu] - dm[lam * d + mu]).scale(0.5 / h);
                        let exact2 = dda[(nu * d + lam) * d + mu];
                        let err2 = (fd2 - exact2).frob_norm();
                        assert!(err2 <= 1e-6 * exact2.frob_norm().max(1.0), "{spec:?} dda {err2:e}");
                    }
                }
            }
        }
    }
}

#[test]
fn sine_residual_bounded_away_from_zero() {
    // Σ_ν ‖Y_ν‖² = amplitude² sin²(x²) ≥ 1/2 on |x² − π/2| ≤ π/4.
    let a = builtin(&FamilySpec::SineNonym { amplitude: 1.0 }, 2, 1).unwrap();
    for i in 0..=50 {
        let x2 = PI / 4.0 + (i as f64) * (PI / 2.0) / 50.0;
        assert!(ym_residual_density(a.as_ref(), &[0.3, x2]) >= 0.5 - 1e-12);
    }
}

#[test]
fn invalid_family_parameters() {
    assert!(builtin(&FamilySpec::Bpst { rho: 0.0 }, 4, 2).is_err());
    assert!(builtin(&FamilySpec::Bpst { rho: -1.0 }, 4, 2).is_err());
    assert!(builtin(&FamilySpec::Bpst { rho: 1.0 }, 3, 2).is_err());
    assert!(builtin(&FamilySpec::PureGauge { a: 1.0, b: 0.5 }, 2, 1).is_err());
    assert!(builtin(&FamilySpec::ConstantAbelian { f: 1.0 }, 1, 1).is_err());
    assert!(builtin(&FamilySpec::Zero, 2, 5).is_err());
    assert!(FamilySpec::from_id("nope").is_err());
    assert_eq!(FamilySpec::from_id("bpst").unwrap(), FamilySpec::Bpst { rho: 1.0 });
}

#[test]
fn family_spec_serde_shape() {
    let spec: FamilySpec = serde_json::from_str(r#"{"kind":"constant_abelian","f":2.0}"#).unwrap();
    assert_eq!(spec, FamilySpec::ConstantAbelian { f: 2.0 });
    let spec: FamilySpec = serde_json::from_str(r#"{"kind":"bpst"}"#).unwrap();
    assert_eq!(spec, FamilySpec::Bpst { rho: 1.0 });
}
