use isoperim_core::constants::{
    affine_recursion_closed_form, brigati_sufficient_step, c_ula, ehmc_constants, ehmc_recursion,
    holley_stroock_min_step, perturbation_constants, product_convolution_constants, proximal_beta,
    proximal_c_k, proximal_d_k, proximal_recursion, ula_recursion, ula_strongly_convex_limit, xi, zeta,
    PerturbationCase, RecursionState,
};
use isoperim_core::{Inequality, TwoScaleInput};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

/// `max{β + α(1 + 1/C)L̄²β, α(1 + C)}`.
fn objective(a: f64, b: f64, l: f64, c: f64) -> f64 {
    (b + a * (1.0 + 1.0 / c) * l * l * b).max(a * (1.0 + c))
}

/// Infimum over `C > 0` by repeated log-grid refinement.
fn grid_inf(a: f64, b: f64, l: f64) -> f64 {
    let (mut lo, mut hi) = (-14.0f64, 14.0f64);
    let n = 200;
    let mut best = f64::INFINITY;
    let mut arg = 0.0;
    for _ in 0..60 {
        let step = (hi - lo) / n as f64;
        for i in 0..=n {
            let e = lo + i as f64 * step;
            let v = objective(a, b, l, 10f64.powf(e));
            if v < best {
                best = v;
                arg = e;
            }
        }
        lo = arg - 2.0 * step;
        hi = arg + 2.0 * step;
    }
    best
}

fn input(a: f64, b: f64, l: f64) -> TwoScaleInput {
    TwoScaleInput::new(a, b, l, Inequality::Lsi).unwrap()
}

#[test]
fn zeta_golden_ratio_case() {
    let z = zeta(&input(1.0, 1.0, 1.0));
    assert!((z - grid_inf(1.0, 1.0, 1.0)).abs() <= 1e-8 * z);
    assert!((z - 2.618_033_988_749_895).abs() < 1e-12);
}

#[test]
fn gaussian_product_and_convolution() {
    // N(0,1) ⊗ N(0,4): covariance diag(1,4), λ_max = 4; N(0,1) ∗ N(0,4) = N(0,5)
    let (p, c) = product_convolution_constants(1.0, 4.0).unwrap();
    let cov = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 4.0]));
    assert_eq!(p, cov.symmetric_eigen().eigenvalues.max());
    assert_eq!(c, 1.0 + 4.0);
    assert!(c < 2.0 * p);
}

fn check_against_closed_form(r: &RecursionState, tol: f64) {
    for (k, a) in r.history.iter().enumerate() {
        let cf = affine_recursion_closed_form(r.contraction, r.offset, r.alpha0(), k as u32);
        assert!((a - cf).abs() <= tol * cf.abs().max(1.0), "k={k}: {a} vs {cf}");
        assert_eq!(r.closed_form(k), cf);
    }
}

fn check_fixed_point(r: &RecursionState) {
    let l = r.limit.expect("convergent");
    assert!((r.contraction * l + r.offset - l).abs() <= 1e-10 * l.max(1.0));
}

#[test]
fn ula_recursion_properties() {
    let r = ula_recursion(1.0, 2.0, 0.5, 3.0, 200).unwrap();
    check_against_closed_form(&r, 1e-10);
    check_fixed_point(&r);
    assert!((r.limit.unwrap() - ula_strongly_convex_limit(1.0, 2.0, 0.5).unwrap()).abs() < 1e-14);
    // monotone toward the limit after the first step
    let l = r.limit.unwrap();
    for w in r.history[1..].windows(2) {
        assert!((w[1] - l).abs() <= (w[0] - l).abs());
    }
    assert_eq!(ula_recursion(1.0, 1.0, 1.0, 5.0, 3).unwrap().limit, Some(2.0));
}

#[test]
fn ula_divergence_flips_at_unit_contraction() {
    // c_ULA = |1 − ηλ| crosses 1 at η = 2/λ
    let lambda = 4.0;
    let below = ula_recursion(1.0, lambda, 0.5 - 1e-9, 1.0, 200).unwrap();
    let at = ula_recursion(1.0, lambda, 0.5, 1.0, 200).unwrap();
    let above = ula_recursion(1.0, lambda, 0.5 + 1e-9, 1.0, 200).unwrap();
    assert!(!below.diverges);
    assert_eq!(c_ula(1.0, lambda, 0.5), 1.0);
    assert!(at.diverges && above.diverges);
    check_against_closed_form(&above, 1e-10);
}

#[test]
fn proximal_recursion_properties() {
    for &(beta, eta) in &[(0.2, 1.0), (0.5, 0.7), (1.0, 10.0)] {
        let r = proximal_recursion(beta, eta, 0.3, 200).unwrap();
        check_against_closed_form(&r, 1e-10);
        check_fixed_point(&r);
        let c = proximal_c_k(beta, eta);
        assert!((r.contraction - c).abs() < 1e-16);
        // α/η follows a ↦ c·a + (c + √c)
        assert!((r.offset / eta - proximal_d_k(beta, eta)).abs() < 1e-15);
        assert!((proximal_d_k(beta, eta) - (c + c.sqrt())).abs() < 1e-15);
        let sc = c.sqrt();
        assert!((r.limit.unwrap() - eta * sc / (1.0 - sc)).abs() < 1e-12);
    }
    assert!(proximal_recursion(1.0, 1.0, 0.0, 5).unwrap().diverges);
    assert!(!proximal_recursion(1.0 - 1e-12, 1.0, 0.0, 5).unwrap().diverges);
    assert!(proximal_recursion(1.0 + 1e-12, 1.0, 0.0, 5).unwrap().diverges);
}

#[test]
fn proximal_strongly_convex_limit_is_inverse_mu() {
    for mu in [0.5, 1.0, 3.0] {
        for eta in [0.01, 0.5, 2.0, 100.0] {
            let r = proximal_recursion(proximal_beta(mu, eta, None), eta, 1.0, 10).unwrap();
            assert!((r.limit.unwrap() - 1.0 / mu).abs() < 1e-10);
        }
    }
}

#[test]
fn holley_stroock_threshold() {
    let b = 2f64.ln();
    let mu = 1.0;
    let eta_min = holley_stroock_min_step(b, mu);
    assert!((eta_min - 1.0).abs() < 1e-15);
    let case = Some(PerturbationCase::HolleyStroock { oscillation: b });
    let above = 1.0 + 1e-6;
    assert!(proximal_beta(mu, above, case) < above);
    let below = 1.0 - 1e-6;
    assert!(proximal_beta(mu, below, case) > below);
}

#[test]
fn brigati_constants() {
    let (mu, eta, l) = (1.0, 3.0, 0.2);
    let beta = proximal_beta(mu, eta, Some(PerturbationCase::BrigatiLipschitz { lipschitz: l }));
    let direct = (eta / (eta * mu + 1.0))
        * (eta * l * l / (eta * mu + 1.0) + 4.0 * l * eta.sqrt() / (eta * mu + 1.0).sqrt()).exp();
    assert!((beta - direct).abs() <= 1e-14 * direct);
    // 𝔏² with 𝔏 = (1/√μ)exp(L²/2μ + 2L/√μ)
    let script_l = (1.0 / mu.sqrt()) * (l * l / (2.0 * mu) + 2.0 * l / mu.sqrt()).exp();
    let v = perturbation_constants(mu, PerturbationCase::BrigatiLipschitz { lipschitz: l });
    assert!((v - script_l * script_l).abs() < 1e-14 * v);
    // above the sufficient step, β < η
    let step = brigati_sufficient_step(l, mu);
    for eta in [step * 1.0001, step * 2.0, step * 10.0] {
        let b = proximal_beta(mu, eta, Some(PerturbationCase::BrigatiLipschitz { lipschitz: l }));
        assert!(b < eta, "η={eta}, β={b}");
    }
}

#[test]
fn ehmc_recursion_properties() {
    let m = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 4.0]));
    let r = ehmc_recursion(&m, 2.0, 0.0, 200).unwrap();
    assert!((r.limit.unwrap() - 1.0).abs() < 1e-10);
    check_against_closed_form(&r, 1e-10);
    check_fixed_point(&r);
    let k = ehmc_constants(&m, 2.0).unwrap();
    assert_eq!(k.kernel_pi_constant, 128.0);
    let iso = DMatrix::identity(3, 3) * 2.5;
    let r = ehmc_recursion(&iso, 3.0, 1.0, 50).unwrap();
    assert!((r.limit.unwrap() - 0.4).abs() < 1e-12);
    assert_eq!(ehmc_constants(&iso, 3.0).unwrap().kappa, 1.0);
    let bad = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
    assert!(ehmc_recursion(&bad, 2.0, 1.0, 5).is_err());
}

#[test]
fn affine_closed_form_loop_oracle() {
    for &(c, d, a0) in &[(0.9, 2.0, 10.0), (0.999, 0.1, 0.0), (1.5, 1.0, 1.0), (-0.5, 1.0, 2.0), (0.0, 3.0, 1.0)] {
        let mut a: f64 = a0;
        for n in 0..=200u32 {
            let cf = affine_recursion_closed_form(c, d, a0, n);
            assert!((a - cf).abs() <= 1e-12 * a.abs().max(1.0), "c={c} n={n}: {a} vs {cf}");
            a = c * a + d;
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn zeta_matches_grid_infimum(a in 1e-3f64..=10.0, b in 1e-3f64..=10.0, l in 0.0f64..=10.0) {
        let i = input(a, b, l);
        let z = zeta(&i);
        let g = grid_inf(a, b, l);
        prop_assert!((z - g).abs() <= 1e-8 * z, "ζ={z}, grid={g}");
        prop_assert!(xi(&i) <= z * (1.0 + 1e-15));
    }

    #[test]
    fn zero_coupling(a in 1e-3f64..=10.0, b in 1e-3f64..=10.0) {
        let i = input(a, b, 0.0);
        prop_assert_eq!(zeta(&i), a.max(b));
        prop_assert_eq!(xi(&i), b);
    }

    #[test]
    fn recursions_are_affine(
        beta in 0.01f64..5.0, eta in 0.01f64..5.0, a0 in 0.0f64..5.0,
        mu in 0.1f64..2.0, ratio in 1.0f64..10.0,
    ) {
        let r = proximal_recursion(beta, eta, a0, 60).unwrap();
        prop_assert_eq!(r.diverges, beta >= eta);
        let u = ula_recursion(mu, mu * ratio, eta, a0, 60).unwrap();
        prop_assert_eq!(u.diverges, c_ula(mu, mu * ratio, eta) >= 1.0);
        for s in [&r, &u] {
            for (k, a) in s.history.iter().enumerate() {
                let cf = s.closed_form(k);
                prop_assert!((a - cf).abs() <= 1e-10 * cf.abs().max(1.0));
            }
            if let Some(l) = s.limit {
                prop_assert!((s.contraction * l + s.offset - l).abs() <= 1e-10 * l.max(1.0));
            }
        }
    }

    #[test]
    fn ehmc_never_diverges(d1 in 0.1f64..10.0, d2 in 0.1f64..10.0, c in 2.0f64..20.0) {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![d1, d2]));
        let r = ehmc_recursion(&m, c, 0.0, 5).unwrap();
        prop_assert!(!r.diverges);
        prop_assert!(r.contraction < 1.0);
        prop_assert!((r.limit.unwrap() - 1.0 / d1.min(d2)).abs() <= 1e-10 * r.limit.unwrap());
    }
}
