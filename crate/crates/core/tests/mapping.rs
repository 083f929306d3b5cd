mod support;

use xlate::xmap::{
    evaluate_translation, fit_gradient_descent, fit_least_squares, Aligned, FitMethod, MappingConfig,
    ProjectionMatrix, RIDGE,
};

fn frob(a: &[f64], b: &[f64]) -> f64 {
    ProjectionMatrix::relative_frobenius(a, b)
}

#[test]
fn gradient_descent_recovers_planted_map() {
    let mut r = support::rng(11);
    let syn = support::SyntheticAlignment::generate(&mut r, 16, 500, 200, 0.01);
    let data = syn.train();
    let gd = fit_gradient_descent(&data, &MappingConfig::default()).unwrap();
    assert_eq!(gd.diagnostics.method, FitMethod::GradientDescent);
    let err = frob(&gd.w, &syn.w_star);
    assert!(err <= 0.05, "relative error {err}");
    assert!(gd.diagnostics.final_loss < gd.diagnostics.initial_loss * 1e-3);

    let report = evaluate_translation(&syn.test_lexicon(), &gd, &syn.source, &syn.target, &[1]).unwrap();
    assert_eq!(report.evaluated, 200);
    assert!(report.precision(0).unwrap() >= 0.95, "{}", report.render());

    let ls = fit_least_squares(&data).unwrap();
    assert_eq!(ls.diagnostics.ridge, 0.0);
    assert!(frob(&gd.w, &ls.w) <= 1e-3, "gd vs lstsq {}", frob(&gd.w, &ls.w));
    assert!(ls.loss(&data) <= gd.loss(&data) * (1.0 + 1e-12));
}

#[test]
fn identity_when_target_equals_source() {
    let mut r = support::rng(12);
    let dim = 8;
    let n = 200;
    let s: Vec<f64> = (0..n * dim).map(|_| support::gaussian(&mut r)).collect();
    let data = Aligned::new(n, dim, dim, s.clone(), s).unwrap();
    let eye = ProjectionMatrix::identity(dim);
    let gd = fit_gradient_descent(&data, &MappingConfig::default()).unwrap();
    let max_gd = gd.w.iter().zip(&eye.w).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(max_gd <= 1e-3, "{max_gd}");
    let ls = fit_least_squares(&data).unwrap();
    let max_ls = ls.w.iter().zip(&eye.w).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(max_ls <= 1e-10, "{max_ls}");
}

#[test]
fn noiseless_data_is_recovered_exactly() {
    let mut r = support::rng(13);
    let syn = support::SyntheticAlignment::generate(&mut r, 10, 100, 10, 0.0);
    let ls = fit_least_squares(&syn.train()).unwrap();
    assert!(frob(&ls.w, &syn.w_star) < 1e-10);
    assert!(ls.diagnostics.final_loss < 1e-16);
}

#[test]
fn underdetermined_fit_uses_ridge() {
    let mut r = support::rng(14);
    let syn = support::SyntheticAlignment::generate(&mut r, 12, 6, 0, 0.0);
    let data = syn.train();
    let ls = fit_least_squares(&data).unwrap();
    assert_eq!(ls.diagnostics.ridge, RIDGE);
    assert!(ls.w.iter().all(|x| x.is_finite()));
    // Six generic pairs in 12 dimensions can be fit almost exactly.
    assert!(ls.diagnostics.final_loss < 1e-6 * ls.diagnostics.initial_loss);
}

#[test]
fn rectangular_and_minibatch_fits() {
    let mut r = support::rng(15);
    let (n, ds, dt) = (300, 6, 4);
    let w_star: Vec<f64> = (0..dt * ds).map(|_| support::gaussian(&mut r)).collect();
    let s: Vec<f64> = (0..n * ds).map(|_| support::gaussian(&mut r)).collect();
    let t: Vec<f64> = s.chunks(ds).flat_map(|row| xlate::xmap::apply(&w_star, dt, ds, row)).collect();
    let data = Aligned::new(n, ds, dt, s, t).unwrap();
    let ls = fit_least_squares(&data).unwrap();
    assert_eq!((ls.rows, ls.cols), (dt, ds));
    assert!(frob(&ls.w, &w_star) < 1e-10);
    let cfg = MappingConfig { batch: Some(32), lr: 0.01, ..MappingConfig::default() };
    let gd = fit_gradient_descent(&data, &cfg).unwrap();
    assert!(frob(&gd.w, &w_star) < 1e-3, "{}", frob(&gd.w, &w_star));
    let again = fit_gradient_descent(&data, &cfg).unwrap();
    assert_eq!(gd.w, again.w);
}

#[test]
fn oversized_step_diverges() {
    let mut r = support::rng(16);
    let syn = support::SyntheticAlignment::generate(&mut r, 8, 200, 0, 0.01);
    let cfg = MappingConfig { lr: 1.0, halve_on_increase: false, ..MappingConfig::default() };
    assert!(matches!(
        fit_gradient_descent(&syn.train(), &cfg),
        Err(xlate::Error::Diverged { .. })
    ));
}
