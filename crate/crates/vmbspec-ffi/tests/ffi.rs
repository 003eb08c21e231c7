use std::ffi::CStr;
use std::ptr;

use vmbspec_ffi::*;

fn last_error() -> String {
    let mut buf = [0 as std::ffi::c_char; 256];
    unsafe {
        vmb_last_error(buf.as_mut_ptr(), buf.len());
        CStr::from_ptr(buf.as_ptr()).to_string_lossy().into_owned()
    }
}

#[test]
fn handles_roundtrip_and_match_the_library() {
    unsafe {
        let mut g = ptr::null_mut();
        assert_eq!(vmb_grid_new(8, 1.0, &mut g), VmbStatus::Ok);
        assert_eq!(vmb_grid_len(g), 512);
        let mut c = ptr::null_mut();
        assert_eq!(vmb_collision_new(g, &mut c), VmbStatus::Ok);
        let mut mu = 0.0;
        assert_eq!(vmb_collision_gap(c, VmbSpecies::One, &mut mu), VmbStatus::Ok);
        assert!(mu > 0.0);

        let mut k = VmbCoefficients::default();
        assert_eq!(vmb_coefficients(g, c, &mut k), VmbStatus::Ok);
        assert!((k.kappa3 * k.a1_two - 1.0).abs() < 1e-6);

        let grid = vmbspec::velocity::build_grid(8, 1.0).unwrap();
        let cm = vmbspec::collision::assemble(&grid).unwrap();
        let direct = vmbspec::dispersion::asymptotic_coefficients(&cm, &grid).unwrap();
        assert_eq!(k.a3, direct.a3);
        assert_eq!(k.b1, direct.b1);

        let mut m = ptr::null_mut();
        assert_eq!(vmb_mode_new(g, c, VmbModeKind::OneSpecies, 0.5, &mut m), VmbStatus::Ok);
        let n = vmb_mode_dim(m);
        assert_eq!(n, 516);
        let (mut re, mut im) = (vec![0.0; n], vec![0.0; n]);
        assert_eq!(vmb_mode_eigenvalues(m, re.as_mut_ptr(), im.as_mut_ptr(), n), VmbStatus::Ok);
        assert!(re.iter().all(|&x| x < 0.0));

        let y0: Vec<f64> = (0..n).map(|i| ((i * 7 % 13) as f64 - 6.0) / 13.0).collect();
        let zeros = vec![0.0; n];
        let (mut ro, mut io) = (vec![0.0; n], vec![0.0; n]);
        let st = vmb_mode_propagate(m, 5.0, y0.as_ptr(), zeros.as_ptr(), ro.as_mut_ptr(), io.as_mut_ptr(), n);
        assert_eq!(st, VmbStatus::Ok);
        let n0: f64 = y0.iter().map(|x| x * x).sum();
        let n1: f64 = ro.iter().zip(&io).map(|(a, b)| a * a + b * b).sum();
        assert!(n1 < n0);

        vmb_mode_free(m);
        vmb_collision_free(c);
        vmb_grid_free(g);
    }
}

#[test]
fn errors_set_status_and_message() {
    unsafe {
        let mut g = ptr::null_mut();
        assert_eq!(vmb_grid_new(1, 1.0, &mut g), VmbStatus::InvalidArgument);
        assert!(g.is_null());
        assert!(!last_error().is_empty());

        assert_eq!(vmb_grid_new(8, 1.0, ptr::null_mut()), VmbStatus::NullPointer);
        assert!(last_error().contains("out"));

        let mut mu = 0.0;
        assert_eq!(vmb_collision_gap(ptr::null(), VmbSpecies::Two, &mut mu), VmbStatus::NullPointer);

        assert_eq!(vmb_grid_new(6, 1.0, &mut g), VmbStatus::Ok);
        let mut c = ptr::null_mut();
        assert_eq!(vmb_collision_new(g, &mut c), VmbStatus::Ok);
        let mut m = ptr::null_mut();
        assert_eq!(vmb_mode_new(g, c, VmbModeKind::TwoSpecies, 1.0, &mut m), VmbStatus::Ok);
        let mut small = [0.0; 4];
        let mut small2 = [0.0; 4];
        assert_eq!(vmb_mode_eigenvalues(m, small.as_mut_ptr(), small2.as_mut_ptr(), 4), VmbStatus::BufferTooSmall);
        assert_eq!(vmb_last_error(ptr::null_mut(), 0), last_error().len());

        vmb_mode_free(m);
        vmb_collision_free(c);
        vmb_grid_free(g);
        vmb_grid_free(ptr::null_mut());
    }
}

#[test]
fn header_declares_every_export() {
    let h = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/vmbspec.h")).unwrap();
    for f in [
        "vmb_last_error",
        "vmb_grid_new",
        "vmb_grid_free",
        "vmb_grid_len",
        "vmb_collision_new",
        "vmb_collision_free",
        "vmb_collision_gap",
        "vmb_coefficients",
        "vmb_mode_new",
        "vmb_mode_free",
        "vmb_mode_dim",
        "vmb_mode_eigenvalues",
        "vmb_mode_propagate",
    ] {
        assert!(h.contains(&format!("{f}(")), "{f} missing from header");
    }
    assert!(h.contains("typedef struct VmbGrid VmbGrid;"));
}
