//! Closed-form path derivatives against finite-difference re-solves.

use levyt_core::gauge::{builtin, ConnectionField, FamilySpec};
use levyt_core::liealg::CMat;
use levyt_core::paths::{BrownianPath, Direction, SineTerm};
use levyt_core::transport::{process_grids, solve_transport, ProcessLevel, Scheme};
use levyt_core::variation::{
    b_variation, fd_b_variation, fd_second_variation, fd_variation, fd_variation_inv, first_variation_u,
    first_variation_uinv, second_variation_u, FdOptions, MalliavinKernel,
};

fn rel(a: &CMat, b: &CMat) -> f64 {
    (*a - *b).frob_norm() / b.frob_norm().max(1e-3)
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

fn fields() -> Vec<(&'static str, std::sync::Arc<dyn ConnectionField>)> {
    vec![
        ("custom", builtin(&FamilySpec::Custom { seed: 4, amplitude: 1.0, modes: 3 }, 3, 2).unwrap()),
        ("sine_nonym", builtin(&FamilySpec::SineNonym { amplitude: 1.0 }, 2, 1).unwrap()),
        ("bpst", builtin(&FamilySpec::Bpst { rho: 1.0 }, 4, 2).unwrap()),
    ]
}

fn directions(d: usize) -> Vec<Direction> {
    vec![
        Direction::Sine { component: 0, mode: 1 },
        Direction::Sine { component: d - 1, mode: 3 },
        Direction::SineSeries(vec![
            SineTerm { component: 0, mode: 2, coeff: 0.5 },
            SineTerm { component: 1, mode: 5, coeff: -1.0 },
        ]),
    ]
}

#[test]
fn first_and_second_variations_match_finite_differences() {
    let opts = FdOptions { epsilon: 1e-4, richardson: false };
    for (name, field) in fields() {
        let d = field.dim();
        let x = vec![0.2; d];
        let (mut first, mut inverse, mut second, mut bvar) = (vec![], vec![], vec![], vec![]);
        for seed in 0..6 {
            let path = BrownianPath::sample(seed, 512, d).unwrap();
            let tg = solve_transport(field.as_ref(), &x, &path, Scheme::GeometricMidpoint).unwrap();
            let pg = process_grids(field.as_ref(), &path, &tg, ProcessLevel::Full);
            let mut dirs = directions(d);
            dirs.push(Direction::Ramp { slope: (0..d).map(|k| 0.3 + 0.1 * k as f64).collect() });
            for u in &dirs {
                let fd = fd_variation(field.as_ref(), &x, &path, Scheme::GeometricMidpoint, u, opts).unwrap();
                let cf = first_variation_u(field.as_ref(), &path, &tg, &pg, u).unwrap();
                first.push(rel(&cf.value, &fd.value));
                let fd = fd_variation_inv(field.as_ref(), &x, &path, Scheme::GeometricMidpoint, u, opts).unwrap();
                let cf = first_variation_uinv(field.as_ref(), &path, &tg, &pg, u).unwrap();
                inverse.push(rel(&cf.value, &fd.value));
            }
            let dirs = directions(d);
            for u in &dirs {
                for v in &dirs {
                    let fd = fd_second_variation(field.as_ref(), &x, &path, Scheme::GeometricMidpoint, u, v, opts).unwrap();
                    let cf = second_variation_u(&path, &tg, &pg, u, v).unwrap();
                    second.push(rel(&cf.value, &fd.value));
                    let fd = fd_b_variation(field.as_ref(), &x, &path, Scheme::GeometricMidpoint, u, v, opts).unwrap();
                    let cf = b_variation(&path, &tg, &pg, u, v).unwrap();
                    bvar.push(rel(&cf.value, &fd.value));
                }
            }
        }
        let (f, i, s, b) = (median(first), median(inverse), median(second), median(bvar));
        assert!(f <= 1e-2 && i <= 1e-2, "{name}: first {f:.2e}, inverse {i:.2e}");
        assert!(s <= 3e-2 && b <= 3e-2, "{name}: second {s:.2e}, B {b:.2e}");
    }
}

#[test]
fn malliavin_reconstruction_converges_with_the_grid() {
    let field = builtin(&FamilySpec::Custom { seed: 9, amplitude: 1.0, modes: 2 }, 2, 2).unwrap();
    let x = [0.1, -0.4];
    let u = Direction::SineSeries(vec![
        SineTerm { component: 0, mode: 1, coeff: 1.0 },
        SineTerm { component: 1, mode: 2, coeff: 0.5 },
    ]);
    let error_at = |steps: usize| {
        let mut worst = 0.0f64;
        for seed in 0..5 {
            let path = BrownianPath::sample(seed, steps, 2).unwrap();
            let tg = solve_transport(field.as_ref(), &x, &path, Scheme::GeometricMidpoint).unwrap();
            let pg = process_grids(field.as_ref(), &path, &tg, ProcessLevel::Curvature);
            let direct = first_variation_u(field.as_ref(), &path, &tg, &pg, &u).unwrap().value;
            let z = MalliavinKernel::new(field.as_ref(), &path, &tg).reconstruct(&path, &u);
            worst = worst.max(rel(&z, &direct));
        }
        worst
    };
    let coarse = error_at(256);
    let fine = error_at(4096);
    assert!(fine < 0.25 * coarse, "reconstruction error {coarse:.2e} at M=256, {fine:.2e} at M=4096");
    assert!(fine < 1e-2, "reconstruction error {fine:.2e} at M=4096");
}
