use faer::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vmbspec::c64;
use vmbspec::collision::assemble;
use vmbspec::modes::{assemble_mode, Frame, ModeKind};
use vmbspec::semigroup::{
    decay_targets, fit_series, lebedev14, make_initial, propagate_mode, propagate_stepper, propagate_sym, radial_rule,
    reconstruct_fields, time_schedule,
    Channel, FitMode, Method, Profile, Scenario, Target,
};
use vmbspec::velocity::build_grid;
use vmbspec::Error;

#[test]
fn stepper_matches_matrix_exponential() {
    // exp(t [[-a, w], [-w, -a]]) = e^{-at} [[cos wt, sin wt], [-sin wt, cos wt]]
    let (a, w) = (0.3, 2.0);
    let mut m = Mat::<c64>::zeros(2, 2);
    m[(0, 0)] = c64::new(-a, 0.0);
    m[(1, 1)] = c64::new(-a, 0.0);
    m[(0, 1)] = c64::new(w, 0.0);
    m[(1, 0)] = c64::new(-w, 0.0);
    let times = [0.0, 0.5, 3.0, 10.0];
    let out = propagate_stepper(m.as_ref(), &[c64::new(1.0, 0.0), c64::new(0.0, 0.0)], &times, 1e-10).unwrap();
    for (t, y) in times.iter().zip(&out) {
        let e = (-a * t).exp();
        assert!((y[0] - e * (w * t).cos()).norm() < 1e-9, "t = {t}");
        assert!((y[1] + e * (w * t).sin()).norm() < 1e-9, "t = {t}");
    }
}

#[test]
fn mode_propagation_contracts_and_methods_agree() {
    let g = build_grid(6, 1.0).unwrap();
    let cm = assemble(&g).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for kind in [ModeKind::Boltzmann, ModeKind::TwoSpecies, ModeKind::OneSpecies] {
        for s in [0.01, 0.5, 8.0] {
            let op = assemble_mode(kind, s, Frame::canonical(), &cm, &g).unwrap();
            let y0: Vec<c64> = (0..op.dim()).map(|_| c64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect();
            let times = [0.0, 1.0, 10.0, 40.0];
            let a = propagate_sym(&op, &y0, &times, Some(Method::Eigen)).unwrap();
            let b = propagate_sym(&op, &y0, &times, Some(Method::Stepper)).unwrap();
            assert!(a.max_ratio <= 1.0 + 1e-8 && b.max_ratio <= 1.0 + 1e-8, "{kind:?} s = {s}");
            let n0 = op.metric.norm_sym(&y0);
            let mut prev = n0;
            for (ya, yb) in a.states.iter().zip(&b.states) {
                let d: f64 = ya.iter().zip(yb).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt();
                assert!(d <= 1e-6 * n0, "{kind:?} s = {s}: {d:e}");
                let n = op.metric.norm_sym(ya);
                assert!(n <= prev * (1.0 + 1e-10));
                prev = n;
            }
        }
    }
}

#[test]
fn initial_data_satisfy_gauss_law() {
    let g = build_grid(6, 1.0).unwrap();
    let p = Profile::default();
    // the electric scenario prescribes its longitudinal field independently
    for sc in [Scenario::TwoSpeciesField, Scenario::OneMagnetic] {
        for xi in [[0.3, 0.1, -0.2], [1.5, -2.0, 0.4]] {
            let init = make_initial(sc, xi, &p, &g).unwrap();
            assert!(init.gauss_residual(&g).unwrap().norm() < 1e-12, "{sc} at {xi:?}");
        }
    }
    assert!(matches!(make_initial(Scenario::OneMagnetic, [0.0, 0.0, 1.0], &p, &g), Err(Error::PoleExclusion)));
}

#[test]
fn reconstructed_fields_satisfy_constraints_along_the_flow() {
    let g = build_grid(6, 1.0).unwrap();
    let cm = assemble(&g).unwrap();
    let xi = [0.4, -0.3, 0.5];
    let i = c64::new(0.0, 1.0);
    for sc in [Scenario::TwoSpeciesField, Scenario::OneMagnetic, Scenario::OneElectric] {
        let init = make_initial(sc, xi, &Profile::default(), &g).unwrap();
        let frame = Frame::transverse(init.omega()).unwrap();
        let op = assemble_mode(sc.kind(), init.s(), frame, &cm, &g).unwrap();
        let u0 = init.tangent_state(&frame).unwrap();
        for u in propagate_mode(&op, &u0, &[0.0, 2.0, 20.0], &g).unwrap() {
            let (f, e, b) = reconstruct_fields(&u, xi, &frame, &g).unwrap();
            let n: c64 = g.to_sym(&f).unwrap().iter().zip(g.chi_sym(0)).map(|(a, c)| a * c).sum();
            let div_e = i * (xi[0] * e[0] + xi[1] * e[1] + xi[2] * e[2]);
            let div_b = xi[0] * b[0] + xi[1] * b[1] + xi[2] * b[2];
            assert!((div_e - n).norm() < 1e-12 && div_b.norm() < 1e-12, "{sc}");
        }
    }
}

#[test]
fn fitting_recovers_exact_rates() {
    let t: Vec<f64> = (0..40).map(|k| 10f64.powf(1.0 + 2.0 * k as f64 / 39.0)).collect();
    let y: Vec<f64> = t.iter().map(|t| 3.0 * t.powf(-0.75)).collect();
    let f = fit_series(&t, &y, (50.0, 500.0), FitMode::LogLog).unwrap();
    assert!((f.slope + 0.75).abs() < 1e-12 && f.stderr < 1e-10);
    let y: Vec<f64> = t.iter().map(|t| (-0.01 * t).exp()).collect();
    let f = fit_series(&t, &y, (50.0, 500.0), FitMode::SemiLog).unwrap();
    assert!((f.slope + 0.01).abs() < 1e-12);
    assert!(matches!(fit_series(&t, &y, (50.0, 55.0), FitMode::LogLog), Err(Error::TooFewSamples(_))));
    let mut dead = y.clone();
    dead[30] = 0.0;
    assert!(matches!(fit_series(&t, &dead, (50.0, 500.0), FitMode::LogLog), Err(Error::ChannelDead(_))));
}

#[test]
fn quadrature_rules() {
    let dirs = lebedev14();
    let total: f64 = dirs.weights.iter().sum();
    assert!((total - 4.0 * std::f64::consts::PI).abs() < 1e-12);
    // degree-4 moment: int x^4 = 4 pi / 5
    let x4: f64 = dirs.points.iter().zip(&dirs.weights).map(|(p, w)| w * p[0].powi(4)).sum();
    assert!((x4 - 4.0 * std::f64::consts::PI / 5.0).abs() < 1e-12);
    assert!(dirs.points.iter().all(|p| p[0].hypot(p[1]) > 0.1));

    let (s, w) = radial_rule(24, 1e-3, 8.0).unwrap();
    let int: f64 = s.iter().zip(&w).map(|(s, w)| w * s * s).sum();
    assert!((int - (512.0 - 1e-9) / 3.0).abs() < 1e-9 * int);
    assert!(radial_rule(4, 1.0, 0.5).is_err());

    let t = time_schedule(500.0, 40).unwrap();
    assert_eq!(t.len(), 41);
    assert_eq!(t[0], 0.0);
    assert!((t[1] - 1.0).abs() < 1e-15 && (t[40] - 500.0).abs() < 1e-9);
}

#[test]
fn decay_targets_cover_each_scenario() {
    for sc in Scenario::ALL {
        let targets = decay_targets(sc, 0.08);
        assert!(!targets.is_empty());
        assert_eq!(sc.name().parse::<Scenario>().unwrap(), sc);
    }
    let b = decay_targets(Scenario::Boltzmann, 0.08);
    assert!(b.contains(&(Channel::Macro, Target::PowerLaw { slope: -0.75, tol: 0.08 })));
    assert!(Target::PowerLaw { slope: -0.75, tol: 0.08 }.accepts(-0.7));
    assert!(!Target::PowerLaw { slope: -0.75, tol: 0.08 }.accepts(-0.6));
    assert!(Target::Exponential.accepts(-1e-3) && !Target::Exponential.accepts(0.0));
    assert!("nope".parse::<Scenario>().is_err());
}
