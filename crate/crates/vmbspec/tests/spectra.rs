use faer::Mat;
use vmbspec::c64;
use vmbspec::collision::{assemble, Species};
use vmbspec::dispersion::{trace_branch, Resolvent};
use vmbspec::modes::{assemble_mode, Frame, ModeKind};
use vmbspec::spectra::{crossvalidate, dense_eigenvalues, eig_all, eig_all_residuals, eig_near, gap_scan, spectral_distance};
use vmbspec::velocity::build_grid;

#[test]
fn dense_eigenvalues_of_a_known_matrix() {
    // rotation generator plus damping: eigenvalues -1 +- 2i and -3
    let mut a = Mat::<c64>::zeros(3, 3);
    a[(0, 0)] = c64::new(-1.0, 0.0);
    a[(1, 1)] = c64::new(-1.0, 0.0);
    a[(0, 1)] = c64::new(2.0, 0.0);
    a[(1, 0)] = c64::new(-2.0, 0.0);
    a[(2, 2)] = c64::new(-3.0, 0.0);
    let want = [c64::new(-1.0, 2.0), c64::new(-1.0, -2.0), c64::new(-3.0, 0.0)];
    assert!(spectral_distance(&dense_eigenvalues(a.as_ref()).unwrap(), &want) < 1e-13);
}

#[test]
fn spectral_distance_is_a_multiset_distance() {
    let a = [c64::new(0.0, 0.0), c64::new(1.0, 0.0)];
    let b = [c64::new(0.0, 0.1)];
    assert!((spectral_distance(&a, &b) - (1.0f64 + 0.01).sqrt()).abs() < 1e-15);
    assert_eq!(spectral_distance(&a, &a), 0.0);
}

#[test]
fn spectrum_lies_in_the_left_half_plane_with_a_gap() {
    let g = build_grid(8, 1.0).unwrap();
    let cm = assemble(&g).unwrap();
    for kind in [ModeKind::TwoSpecies, ModeKind::OneSpecies] {
        let scan = gap_scan(kind, &[0.5, 1.0, 2.0, 5.0], &cm, &g).unwrap();
        assert!(scan.alpha_emp > 0.0, "{kind:?}: {scan:?}");
        assert_eq!(scan.rows.len(), 4);
    }
}

#[test]
fn eigenpairs_have_small_residuals() {
    let g = build_grid(6, 1.0).unwrap();
    let cm = assemble(&g).unwrap();
    let op = assemble_mode(ModeKind::OneSpecies, 0.8, Frame::canonical(), &cm, &g).unwrap();
    let rep = eig_all(&op).unwrap();
    assert_eq!(rep.eigenvalues.len(), op.dim());
    assert!(rep.eigenvalues.iter().all(|z| z.re <= rep.rightmost.re + 1e-14));
    for (z, r) in eig_all_residuals(&op).unwrap() {
        assert!(r <= 1e-8 * rep.norm_bound, "{z}: {r:e}");
    }
    let target = rep.rightmost + c64::new(1e-3, 1e-3);
    let near = eig_near(&op, target, 2).unwrap();
    assert!((near[0].lambda - rep.rightmost).norm() < 1e-8);
    assert!(near[0].residual <= 1e-8 * rep.norm_bound);
}

#[test]
fn nine_eigenvalues_right_of_half_gap_at_small_s() {
    let g = build_grid(10, 1.0).unwrap();
    let cm = assemble(&g).unwrap();
    let op = assemble_mode(ModeKind::OneSpecies, 0.05, Frame::canonical(), &cm, &g).unwrap();
    let right = eig_all(&op).unwrap().right_of(-cm.gap(Species::One) / 2.0);
    assert_eq!(right.len(), 9, "{right:?}");
}

#[test]
fn traced_branch_crossvalidates_against_dense_spectra() {
    let g = build_grid(8, 1.0).unwrap();
    let cm = assemble(&g).unwrap();
    let res = Resolvent::new(&cm, &g).unwrap();
    let levels = [0.005, 0.01, 0.02];
    let a1 = vmbspec::dispersion::asymptotic_coefficients(&cm, &g).unwrap().a1_two;
    let br = trace_branch(|l, s| res.d_two_low1(l, s), &levels, c64::new(-a1 * 2.5e-5, 0.0), "two_low1", 2).unwrap();
    let d = crossvalidate(&br, |s| assemble_mode(ModeKind::TwoSpecies, s, Frame::canonical(), &cm, &g)).unwrap();
    assert!(d < 1e-8, "{d:e}");
}
