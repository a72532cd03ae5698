use isoperim_core::constants::{proximal_forward_l_bar, ula_l_bar};
use isoperim_core::criteria::{
    check_mgf_criterion, check_mgf_criterion_mc, check_var_criterion, check_var_criterion_mc, derive_l_bar,
    standard_directions, Certification, CheckMethod, SufficientCondition,
};
use isoperim_core::kernels::{
    make_ehmc_kernel, make_proximal_kernels, make_ula_kernel, BoundedPerturbation, GaussianKernel,
};
use isoperim_core::rng::stream_rng;
use isoperim_core::TargetPotential;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn v(xs: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(xs)
}

fn m2() -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[1.5, 0.4, 0.4, 0.8])
}

fn y_grid() -> Vec<DVector<f64>> {
    vec![v(&[0.0, 0.0]), v(&[1.0, -0.5]), v(&[-2.0, 1.5])]
}

fn ula() -> (GaussianKernel, f64) {
    let t = TargetPotential::quadratic(m2()).unwrap();
    let eta = 0.4;
    (make_ula_kernel(&t, eta).unwrap(), ula_l_bar(t.ula_contraction(eta), eta))
}

#[test]
fn ula_passes_at_c_over_root_two_eta_and_mc_agrees() {
    let (k, l) = ula();
    let us = standard_directions(2);
    let mut rng = stream_rng(1, 0);
    let var = check_var_criterion(&k, &y_grid(), &us, l, 0, &mut rng).unwrap();
    assert!(var.passed());
    assert_eq!(var.method, CheckMethod::Analytic);
    assert_eq!(var.certification, Certification::Global);
    let mgf = check_mgf_criterion(&k, &y_grid(), &us, &[0.5, 1.0, 2.0], l, 0, &mut rng).unwrap();
    assert!(mgf.passed());

    let var_mc = check_var_criterion_mc(&k, &y_grid(), &us, l, 10_000, &mut rng).unwrap();
    assert_eq!(var_mc.method, CheckMethod::MonteCarlo);
    assert_eq!(var_mc.certification, Certification::Grid);
    for (a, m) in var.probes.iter().zip(&var_mc.probes) {
        assert!((a.observed - m.observed).abs() <= 5.0 * m.std_err, "{} vs {} ± {}", a.observed, m.observed, m.std_err);
    }
    let mgf_mc = check_mgf_criterion_mc(&k, &y_grid(), &us, &[0.5, 1.0, 2.0], l, 10_000, &mut rng).unwrap();
    for (a, m) in mgf.probes.iter().zip(&mgf_mc.probes) {
        assert!((a.observed - m.observed).abs() <= 5.0 * m.std_err);
    }
}

#[test]
fn proximal_forward_mgf_holds_with_equality() {
    let t = TargetPotential::quadratic(m2()).unwrap();
    for eta in [0.1, 0.7, 3.0] {
        let (fwd, _) = make_proximal_kernels(&t, eta).unwrap();
        let mut rng = stream_rng(2, 0);
        let l = proximal_forward_l_bar(eta);
        let r = check_mgf_criterion(&fwd, &y_grid(), &standard_directions(2), &[0.1, 1.0, 10.0], l, 0, &mut rng)
            .unwrap();
        assert!(r.passed());
        assert_eq!(r.certification, Certification::Global);
        for p in &r.probes {
            assert!(p.margin.abs() <= 1e-12 * p.bound, "margin {}", p.margin);
        }
        let var = check_var_criterion(&fwd, &y_grid(), &standard_directions(2), l, 0, &mut rng).unwrap();
        for p in &var.probes {
            assert!((p.observed - 1.0 / eta).abs() <= 1e-12 / eta);
        }
    }
}

#[test]
fn zero_bound_is_violated() {
    let (k, _) = ula();
    let mut rng = stream_rng(3, 0);
    let r = check_var_criterion(&k, &y_grid(), &standard_directions(2), 0.0, 0, &mut rng).unwrap();
    assert!(r.violated);
    let r = check_var_criterion_mc(&k, &y_grid(), &standard_directions(2), 0.0, 1000, &mut rng).unwrap();
    assert!(r.violated);
}

#[test]
fn ehmc_passes_mgf_via_lipschitz_and_lsi() {
    for (m, t) in [(m2(), 0.9), (DMatrix::from_diagonal(&v(&[1.0, 4.0])), 0.25)] {
        let k = make_ehmc_kernel(&m, t).unwrap();
        let cond = SufficientCondition::LipschitzPlusLsi { lipschitz: k.grad_lipschitz(), beta: k.beta() };
        let (var_l, mgf_l) = derive_l_bar(&cond);
        assert!(var_l.is_none());
        let l = mgf_l.unwrap();
        assert!((l - k.mgf_l_bar()).abs() < 1e-15);
        let mut rng = stream_rng(4, 0);
        let r = check_mgf_criterion(&k, &y_grid(), &standard_directions(2), &[0.5, 1.0, 3.0], l, 0, &mut rng).unwrap();
        assert!(r.passed(), "sup {} vs {l}", r.observed_sup);
        assert_eq!(r.certification, Certification::Global);
    }
}

#[test]
fn perturbed_ula_is_grid_certified() {
    let p = BoundedPerturbation::new(0.6, 1.7, v(&[0.6, -0.8]), Some(0.0)).unwrap();
    let t = TargetPotential::plus_bounded(m2(), p).unwrap();
    let eta = 0.3;
    let k = make_ula_kernel(&t, eta).unwrap();
    let l = ula_l_bar(t.ula_contraction(eta), eta);
    let mut rng = stream_rng(5, 0);
    let r = check_var_criterion(&k, &y_grid(), &standard_directions(2), l, 0, &mut rng).unwrap();
    assert!(r.passed());
    assert_eq!(r.certification, Certification::Grid);
}

#[test]
fn rejection_backward_kernel_by_monte_carlo() {
    // ∇₂G = (y − x)/η is (1/η)-Lipschitz in x; with LSI(β) the MGF constant is √β/η
    let p = BoundedPerturbation::new(0.5, 1.0, v(&[1.0, 0.0]), Some(0.0)).unwrap();
    let t = TargetPotential::plus_bounded(m2(), p).unwrap();
    let eta = 0.5;
    let (_, back) = make_proximal_kernels(&t, eta).unwrap();
    let cond = SufficientCondition::LipschitzPlusLsi { lipschitz: 1.0 / eta, beta: back.beta() };
    let l = derive_l_bar(&cond).1.unwrap();
    let mut rng = stream_rng(6, 0);
    let ys = [v(&[0.0, 0.0]), v(&[1.0, 1.0])];
    let us = [v(&[1.0, 0.0]), v(&[0.0, 1.0])];
    let r = check_mgf_criterion(&back, &ys, &us, &[0.5, 1.0], l, 4000, &mut rng).unwrap();
    assert_eq!(r.method, CheckMethod::MonteCarlo);
    assert!(r.passed(), "{:?}", r.probes);
    assert!(r.observed_sup <= l);
}

#[test]
fn overflowing_mgf_probe_is_skipped() {
    let (k, l) = ula();
    let mut rng = stream_rng(7, 0);
    let r = check_mgf_criterion_mc(&k, &[v(&[0.0, 0.0])], &[v(&[1.0, 0.0])], &[f64::MAX], l, 100, &mut rng).unwrap();
    assert_eq!(r.skipped(), 1);
    assert!(r.probes[0].overflow);
    assert!(r.passed());
}

#[test]
fn probes_are_deterministic() {
    let (k, l) = ula();
    let run = || {
        let mut rng = stream_rng(8, 0);
        check_var_criterion_mc(&k, &y_grid(), &standard_directions(2), l, 500, &mut rng).unwrap()
    };
    let a = run();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
    let b = pool.install(run);
    assert_eq!(a, b);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn passing_is_monotone_in_l_bar(l in 0.0f64..3.0, extra in 0.0f64..2.0, mc in any::<bool>()) {
        let (k, _) = ula();
        let us = standard_directions(2);
        let run = |l: f64| {
            let mut rng = stream_rng(9, 0);
            if mc {
                check_mgf_criterion_mc(&k, &y_grid(), &us, &[1.0], l, 500, &mut rng).unwrap()
            } else {
                check_mgf_criterion(&k, &y_grid(), &us, &[1.0], l, 0, &mut rng).unwrap()
            }
        };
        if run(l).passed() {
            prop_assert!(run(l + extra).passed());
        }
    }

    #[test]
    fn mgf_at_sigma_implies_var_at_two_sigma(sigma in 0.0f64..3.0, eta in 0.05f64..2.0) {
        let t = TargetPotential::quadratic(m2()).unwrap();
        let k = make_ula_kernel(&t, eta).unwrap();
        let us = standard_directions(2);
        let mut rng = stream_rng(10, 0);
        let mgf = check_mgf_criterion(&k, &y_grid(), &us, &[0.25, 1.0, 4.0], sigma, 0, &mut rng).unwrap();
        if mgf.passed() {
            let var = check_var_criterion(&k, &y_grid(), &us, 2.0 * sigma, 0, &mut rng).unwrap();
            prop_assert!(var.passed());
        }
    }
}
