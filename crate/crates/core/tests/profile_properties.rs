use pmc_core::family::{a_family, a_family_derivative, valid_interval};
use pmc_core::profile::{f_complex, profile_rhs, Normalization, ProfileOptions, ProfileSolution};
use pmc_core::{ModelParams, C64};
use proptest::prelude::*;

const RHO: f64 = -3.0;
const B: f64 = 1.0;

fn solved(a0: C64, range: (f64, f64), norm: Normalization) -> ProfileSolution {
    let mut p = ProfileSolution::solve(ModelParams::new(RHO, B), 0.6, a0, range, &ProfileOptions::default()).unwrap();
    p.build_potential(norm).unwrap();
    p
}

fn default_profile() -> ProfileSolution {
    solved(C64::new(0.3, 0.4), (0.45, 0.9), Normalization::default())
}

fn samples(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |k| lo + (hi - lo) * (k as f64 + 0.5) / n as f64)
}

#[test]
fn real_initial_value_stays_real() {
    for a0 in [-0.4, 0.3, 1.5] {
        let p = solved(C64::new(a0, 0.0), (0.45, 0.9), Normalization::default());
        let worst = samples(0.45, 0.9, 500)
            .map(|al| p.a(al).unwrap().im.abs())
            .fold(0.0, f64::max);
        assert!(worst <= 1e-9, "a0 = {a0}: max |Im a| = {worst:e}");
    }
}

#[test]
fn psi_inverts_k_at_1000_points() {
    let p = default_profile();
    let pot = p.potential().unwrap();
    let worst = samples(0.45, 0.9, 1000)
        .map(|al| (p.psi(pot.k(al)).unwrap() - al).abs())
        .fold(0.0, f64::max);
    assert!(worst <= 1e-8, "max |psi(K(alpha)) - alpha| = {worst:e}");
}

#[test]
fn psi_solves_second_order_equation() {
    // psi'' = F(psi) psi'^2, second derivative by central differences
    let p = default_profile();
    let (lo, hi) = p.potential().unwrap().range();
    let h = 1e-4 * (hi - lo);
    let mut worst = 0.0f64;
    for t in samples(lo + 2.0 * h, hi - 2.0 * h, 400) {
        let (m, c, q) = (p.psi(t - h).unwrap(), p.psi(t).unwrap(), p.psi(t + h).unwrap());
        let d2 = (q - 2.0 * c + m) / (h * h);
        let d1 = (q - m) / (2.0 * h);
        let r = (d2 - p.f(c).unwrap() * d1 * d1).abs();
        worst = worst.max(r / (1.0 + d2.abs()));
    }
    assert!(worst <= 1e-6, "psi residual {worst:e}");
}

#[test]
fn f_is_real_and_k_increasing() {
    let p = default_profile();
    let pot = p.potential().unwrap();
    for al in samples(0.45, 0.9, 400) {
        let f = f_complex(al, p.a(al).unwrap(), &p.params);
        assert!(f.im.abs() <= 1e-12 * f.norm().max(1.0), "Im F = {:e} at {al}", f.im);
        assert!(pot.k_prime(al) > 0.0);
    }
}

#[test]
fn ode_self_consistency() {
    let p = default_profile();
    let r = p.ode_self_residual(401);
    assert!(r <= 10.0 * p.tol, "scaled residual {r:e} against tol {:e}", p.tol);
    for al in samples(0.45, 0.9, 200) {
        let a = p.a(al).unwrap();
        let want = profile_rhs(al, a, &p.params);
        assert!((p.da(al).unwrap() - want).norm() <= 1e-8 * (1.0 + want.norm()));
    }
}

#[test]
fn family_closed_form_solves_profile_ode() {
    let params = ModelParams::new(RHO, B);
    for c1 in [2.0, 1.5, 4.0, -0.5, -3.0] {
        let (lo, hi) = valid_interval(c1).unwrap().inner(0.02);
        for t in samples(lo, hi, 200) {
            let rhs = profile_rhs(t, a_family(t, c1), &params);
            let e = (a_family_derivative(t, c1) - rhs).norm();
            assert!(e <= 1e-8 * (1.0 + rhs.norm()), "c1 = {c1}, t = {t}: {e:e}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn normalization_is_an_affine_reparametrization(k0 in -2.0f64..2.0, g0 in 0.2f64..5.0) {
        let base = default_profile();
        let moved = solved(C64::new(0.3, 0.4), (0.45, 0.9), Normalization { k0, kprime0: g0 });
        let (lo, hi) = moved.potential().unwrap().range();
        for t in samples(lo, hi, 100) {
            let want = base.psi((t - k0) / g0).unwrap();
            prop_assert!((moved.psi(t).unwrap() - want).abs() <= 1e-8);
        }
    }
}
