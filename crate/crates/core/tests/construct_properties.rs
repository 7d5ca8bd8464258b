use std::path::PathBuf;

use pmc_core::config::RunConfig;
use pmc_core::construct::{construct, generic_profile, GenericInput, SurfaceFields};
use pmc_core::grid::Field;
use pmc_core::profile::Normalization;
use pmc_core::C64;

fn input(name: &str, n: usize) -> GenericInput {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name);
    let mut cfg = RunConfig::load(&path).unwrap();
    cfg.grid = cfg.grid.with_resolution(n, n);
    cfg.harmonic.rescale = false;
    cfg.generic_input().unwrap()
}

fn bits_r(x: &Field<f64>) -> Vec<u64> {
    x.data.iter().map(|v| v.to_bits()).collect()
}

fn bits_c(x: &Field<C64>) -> Vec<(u64, u64)> {
    x.data.iter().map(|v| (v.re.to_bits(), v.im.to_bits())).collect()
}

fn max_diff_c(x: &Field<C64>, y: &Field<C64>) -> f64 {
    x.data
        .iter()
        .zip(&y.data)
        .map(|(u, v)| (u - v).norm())
        .fold(0.0, f64::max)
}

fn max_diff_r(x: &Field<f64>, y: &Field<f64>) -> f64 {
    x.data
        .iter()
        .zip(&y.data)
        .map(|(u, v)| (u - v).abs())
        .fold(0.0, f64::max)
}

#[test]
fn nu0_changes_only_the_phase_of_c() {
    let base = input("corollary.json", 41);
    let s0 = construct(&base).unwrap();
    let s1 = construct(&GenericInput {
        nu0: 0.37,
        ..base.clone()
    })
    .unwrap();
    assert_eq!(bits_r(&s0.alpha), bits_r(&s1.alpha));
    assert_eq!(bits_c(&s0.a), bits_c(&s1.a));
    assert_eq!(bits_c(&s0.lambda), bits_c(&s1.lambda));
    assert_eq!(bits_r(&s0.k_formula), bits_r(&s1.k_formula));
    assert_eq!(bits_r(&s0.k_metric), bits_r(&s1.k_metric));
    assert_eq!(s0.mask, s1.mask);
    for k in 0..s0.c.data.len() {
        let (c0, c1) = (s0.c.data[k], s1.c.data[k]);
        assert!((c0.norm() - c1.norm()).abs() <= 4.0 * f64::EPSILON * c0.norm());
        assert!((s1.nu.data[k] - s0.nu.data[k] - 0.37).abs() <= 1e-14);
        assert!((c1 - c0 * C64::from_polar(1.0, 0.37)).norm() <= 1e-14 * c0.norm());
    }
}

#[test]
fn normalization_change_matches_affine_prediction() {
    // new potential K~ = k0 + g0 K and data f~ = k0 + g0 f give the same surface
    let base = input("corollary.json", 41);
    let s0 = construct(&base).unwrap();
    let (k0, g0) = (0.25, 1.7);
    let moved = GenericInput {
        normalization: Normalization { k0, kprime0: g0 },
        harmonic: base.harmonic.affine(g0, k0),
        ..base.clone()
    };
    let s1 = construct(&moved).unwrap();
    assert!(max_diff_r(&s0.alpha, &s1.alpha) <= 1e-8);
    assert!(max_diff_c(&s0.a, &s1.a) <= 1e-8);
    assert!(max_diff_c(&s0.lambda, &s1.lambda) <= 1e-8);
    assert!(max_diff_r(&s0.nu, &s1.nu) <= 1e-8);
    assert!(max_diff_c(&s0.c, &s1.c) <= 1e-8);
}

#[test]
fn initial_value_moves_the_profile() {
    // Off the admissible curve the nu form stops being closed, so the effect
    // of a0 is checked on the profile itself.
    let base = input("corollary.json", 33);
    let p0 = generic_profile(&base).unwrap();
    let d = 1e-3;
    for a0 in [base.a0 + d, base.a0 + C64::new(0.0, d)] {
        let p = generic_profile(&GenericInput { a0, ..base.clone() }).unwrap();
        let moved = (0..=20)
            .map(|k| 0.56 + 0.33 * k as f64 / 20.0)
            .map(|al| (p.a(al).unwrap() - p0.a(al).unwrap()).norm())
            .fold(0.0, f64::max);
        assert!(moved > 0.1 * d && moved < 100.0 * d, "a0 = {a0}: {moved:e}");
    }
}

#[test]
fn remaining_constants_alter_the_surface() {
    let base = input("corollary.json", 33);
    let s0 = construct(&base).unwrap();
    let d = 1e-3;
    let variants: [(&str, GenericInput); 3] = [
        (
            "K0",
            GenericInput {
                normalization: Normalization { k0: d, kprime0: 1.0 },
                ..base.clone()
            },
        ),
        (
            "Kprime0",
            GenericInput {
                normalization: Normalization {
                    k0: 0.0,
                    kprime0: 1.0 + d,
                },
                ..base.clone()
            },
        ),
        ("nu0", GenericInput { nu0: d, ..base.clone() }),
    ];
    for (name, v) in variants {
        let s = construct(&v).unwrap();
        let change = change(&s0, &s);
        assert!(change > 1e-6, "{name} left the surface unchanged ({change:e})");
    }
}

fn change(x: &SurfaceFields, y: &SurfaceFields) -> f64 {
    max_diff_r(&x.alpha, &y.alpha)
        .max(max_diff_c(&x.a, &y.a))
        .max(max_diff_c(&x.lambda, &y.lambda))
        .max(max_diff_c(&x.c, &y.c))
}
