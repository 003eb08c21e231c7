mod common;

use proptest::prelude::*;
use vmbspec::c64;
use vmbspec::velocity::{build_grid, chi, chi_at, inner_product, macro_moments, project, GridFunction, Projection};
use vmbspec::Error;

#[test]
fn maxwellian_mass_and_second_moment() {
    let g = build_grid(8, 1.0).unwrap();
    let mass: f64 = g.nodes.iter().zip(&g.weights).map(|(v, w)| w * common::maxwellian(*v)).sum();
    let energy: f64 = g.nodes.iter().zip(&g.weights).map(|(v, w)| w * common::dot(*v, *v) * common::maxwellian(*v)).sum();
    assert!((mass - 1.0).abs() < 1e-12, "mass {mass}");
    assert!((energy - 3.0).abs() < 1e-11, "energy {energy}");
}

#[test]
fn chi_basis_is_orthonormal() {
    let g = build_grid(10, 1.0).unwrap();
    for i in 0..5 {
        for j in 0..5 {
            let ip = inner_product(&chi(i, &g).unwrap(), &chi(j, &g).unwrap(), &g).unwrap();
            let want = if i == j { 1.0 } else { 0.0 };
            assert!((ip - want).norm() < 1e-12, "({i},{j}) = {ip}");
        }
    }
}

#[test]
fn chi_values_match_definition() {
    let v = [0.3, -1.1, 0.7];
    let sm = common::maxwellian(v).sqrt();
    let v2 = common::dot(v, v);
    assert!((chi_at(0, v).unwrap() - sm).abs() < 1e-15);
    assert!((chi_at(2, v).unwrap() - v[1] * sm).abs() < 1e-15);
    assert!((chi_at(4, v).unwrap() - (v2 - 3.0) / 6f64.sqrt() * sm).abs() < 1e-15);
    assert!(matches!(chi_at(5, v), Err(Error::Index(5))));
}

#[test]
fn rejects_coarse_resolution() {
    assert!(matches!(build_grid(3, 1.0), Err(Error::InvalidResolution(3))));
}

#[test]
fn macro_moments_of_a_shifted_maxwellian() {
    let g = build_grid(12, 1.0).unwrap();
    // d/du M(v - u) at u = 0 is v1 M, so f = v1 sqrt(M) carries unit x-momentum
    let f = g.sample(|v| v[0] * common::maxwellian(v).sqrt());
    let m = macro_moments(&f, &g).unwrap();
    assert!(m.n.norm() < 1e-13 && m.q.norm() < 1e-13);
    assert!((m.m[0] - 1.0).norm() < 1e-12 && m.m[1].norm() < 1e-13);
}

#[test]
fn to_sym_roundtrip() {
    let g = build_grid(6, 1.0).unwrap();
    let f = g.sample(|v| (v[0] - 0.2 * v[2]).sin());
    let back = g.from_sym(&g.to_sym(&f).unwrap());
    for (a, b) in f.values.iter().zip(&back.values) {
        assert!((a - b).norm() < 1e-12 * (1.0 + a.norm()));
    }
}

fn random_function(seed: Vec<f64>, n: usize) -> GridFunction {
    GridFunction {
        values: (0..n).map(|k| c64::new(seed[k % seed.len()] * (1.0 + k as f64).sin(), seed[(k + 1) % seed.len()])).collect(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn projections_are_orthogonal_and_idempotent(seed in prop::collection::vec(-1.0f64..1.0, 3..9)) {
        let g = build_grid(6, 1.0).unwrap();
        let f = random_function(seed, g.len());
        for (p, q) in [(Projection::P0, Projection::P1), (Projection::Pd, Projection::Pr)] {
            let pf = project(&f, p, &g).unwrap();
            let qf = project(&f, q, &g).unwrap();
            let ppf = project(&pf, p, &g).unwrap();
            for k in 0..g.len() {
                prop_assert!((pf.values[k] + qf.values[k] - f.values[k]).norm() < 1e-10);
                prop_assert!((ppf.values[k] - pf.values[k]).norm() < 1e-10);
            }
            prop_assert!(inner_product(&pf, &qf, &g).unwrap().norm() < 1e-10);
        }
    }

    #[test]
    fn inner_product_is_hermitian(a in prop::collection::vec(-1.0f64..1.0, 3..9), b in prop::collection::vec(-1.0f64..1.0, 3..9)) {
        let g = build_grid(5, 1.0).unwrap();
        let (f, h) = (random_function(a, g.len()), random_function(b, g.len()));
        let fh = inner_product(&f, &h, &g).unwrap();
        let hf = inner_product(&h, &f, &g).unwrap();
        prop_assert!((fh - hf.conj()).norm() < 1e-12);
        prop_assert!(inner_product(&f, &f, &g).unwrap().re >= 0.0);
    }
}
