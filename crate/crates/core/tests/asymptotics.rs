use qcurv::asymptotics::{fit_expansion, mc_numerator_check, unit_jet, Case, RadialGrid, TestFunctionModel};
use qcurv::tensor::Jet;
use qcurv::verify::{asymptotics_case, model_for};

fn all_pass(case: Case, n: usize) {
    let (fit, checks) = asymptotics_case(case, n, 7, &case.default_lambdas(), 1.0, 9).unwrap();
    let failed: Vec<String> = checks.iter().filter(|c| !c.pass).map(|c| format!("{} {} vs {}", c.id, c.computed, c.expected)).collect();
    assert!(failed.is_empty(), "{case:?} n={n}: {failed:?}");
    for suffix in ["drop_largest_lambda", "cutoff_independence", "grid_refinement"] {
        assert!(checks.iter().any(|c| c.id.ends_with(suffix)), "{case:?} n={n} lacks {suffix}");
    }
    assert!(fit.fit.condition < 1e8);
}

#[test]
fn flat_cases_reproduce_the_mass_coefficient() {
    for n in 5..=7 {
        all_pass(Case::Flat, n);
    }
}

#[test]
fn lowdim_case() {
    all_pass(Case::Lowdim, 5);
}

#[test]
fn n8_log_fit() {
    all_pass(Case::N8, 8);
}

#[test]
fn n9_fit() {
    all_pass(Case::N9, 9);
}

#[test]
fn high_case_at_n10() {
    all_pass(Case::High, 10);
}

#[test]
fn refined_grid_leaves_the_fit_unchanged() {
    let model = model_for(Case::Flat, 5, 7, 1.0).unwrap();
    let lambdas = Case::Flat.default_lambdas();
    let a = fit_expansion(&model, &lambdas).unwrap();
    let b = fit_expansion(&model.clone().with_grid(RadialGrid::default().refined()), &lambdas).unwrap();
    assert!((a.coefficient / b.coefficient - 1.0).abs() < 1e-8, "{} vs {}", a.coefficient, b.coefficient);
}

#[test]
fn monte_carlo_agrees_with_the_angular_reduction() {
    let jet = unit_jet(&Jet::random(10, 7));
    let mc = mc_numerator_check(&jet, 0.02, 200_000, 11).unwrap();
    assert!(mc.within_3sigma, "{} vs {} (sigma {})", mc.estimate, mc.exact, mc.sigma);
    assert!(mc.sigma > 0.0);
}

#[test]
fn invalid_lambda_grids_are_rejected() {
    let model = model_for(Case::Flat, 6, 7, 1.0).unwrap();
    assert!(fit_expansion(&model, &[0.1, 0.05, 0.025]).is_err());
    assert!(fit_expansion(&model, &[0.3, 0.1, 0.05, 0.025]).is_err());
    assert!(fit_expansion(&model, &[0.1, 0.05, 0.05, 0.025]).is_err());
    assert!(fit_expansion(&model, &[0.1, -0.05, 0.025, 0.0125]).is_err());
}

#[test]
fn cases_are_tied_to_their_dimensions() {
    assert!(TestFunctionModel::new(Case::N9, 10, Some(&Jet::random(10, 1)), 1.0).is_err());
    assert!(TestFunctionModel::new(Case::High, 8, Some(&Jet::random(8, 1)), 1.0).is_err());
    assert!(TestFunctionModel::new(Case::Flat, 8, None, 1.0).is_err());
    assert!(TestFunctionModel::new(Case::High, 10, None, 1.0).is_err());
}
