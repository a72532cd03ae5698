//! Closed-form constants: the two-scale constants ζ and ξ, product and
//! convolution constants, sampler constants, and the affine recursions
//! `α^(k+1) = c·α^(k) + d` tracking them along the iterates.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{sinc_squared, SpdMatrix};

/// Which functional inequality a constant refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Inequality {
    Pi,
    Lsi,
}

impl Inequality {
    pub fn name(self) -> &'static str {
        match self {
            Self::Pi => "PI",
            Self::Lsi => "LSI",
        }
    }
}

/// A constant attached to a distribution or kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IsoperimetricProfile {
    pub inequality: Inequality,
    pub constant: f64,
}

/// `α` for the mixing law, `β` for every component, `L̄` for the criterion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoScaleInput {
    pub alpha: f64,
    pub beta: f64,
    pub l_bar: f64,
    pub inequality: Inequality,
}

impl TwoScaleInput {
    pub fn new(alpha: f64, beta: f64, l_bar: f64, inequality: Inequality) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidParameter(format!("alpha must be > 0, got {alpha}")));
        }
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::InvalidParameter(format!("beta must be > 0, got {beta}")));
        }
        if !(l_bar >= 0.0 && l_bar.is_finite()) {
            return Err(Error::InvalidParameter(format!("L̄ must be ≥ 0, got {l_bar}")));
        }
        Ok(Self { alpha, beta, l_bar, inequality })
    }
}

/// Joint constant `ζ = inf_C max{β + α(1 + 1/C)L̄²β, α(1 + C)}` in closed form.
pub fn zeta(input: &TwoScaleInput) -> f64 {
    let TwoScaleInput { alpha: a, beta: b, l_bar, .. } = *input;
    let l2 = l_bar * l_bar;
    let u = a * b * l2;
    let hi = a.max(b + u);
    if l2 == 0.0 {
        return hi;
    }
    // ½(a + b + u + √D) = max{a, b + u} + ½(√D − |s|), rationalized
    let s = b - a + u;
    let q = 4.0 * a * a * b * l2;
    hi + 0.5 * q / ((q + s * s).sqrt() + s.abs())
}

/// Mixture constant `ξ = β + αβL̄²`.
pub fn xi(input: &TwoScaleInput) -> f64 {
    input.beta + input.alpha * input.beta * input.l_bar * input.l_bar
}

/// `(max{α, β}, α + β)`: constants of `ρ ⊗ P` and `ρ ∗ P`.
pub fn product_convolution_constants(alpha: f64, beta: f64) -> Result<(f64, f64)> {
    if !(alpha > 0.0 && beta > 0.0 && alpha.is_finite() && beta.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "constants must be positive, got ({alpha}, {beta})"
        )));
    }
    Ok((alpha.max(beta), alpha + beta))
}

/// `c_ULA = max{|1 − η·hi|, |1 − η·lo|}` for Hessians between `lo` and `hi`.
pub fn c_ula(lo: f64, hi: f64, eta: f64) -> f64 {
    (1.0 - eta * hi).abs().max((1.0 - eta * lo).abs())
}

/// Criterion constant of the ULA kernel, `c_ULA/√(2η)`.
pub fn ula_l_bar(c_ula: f64, eta: f64) -> f64 {
    c_ula / (2.0 * eta).sqrt()
}

/// Criterion constant of the proximal forward kernel, `1/√η`.
pub fn proximal_forward_l_bar(eta: f64) -> f64 {
    1.0 / eta.sqrt()
}

/// `d·Σ_{i<n} cⁱ + cⁿ·a0`, the n-th term of `a ↦ c·a + d` from `a0`.
pub fn affine_recursion_closed_form(c: f64, d: f64, a0: f64, n: u32) -> f64 {
    if n == 0 {
        return a0;
    }
    if c == 1.0 {
        return d * f64::from(n) + a0;
    }
    if c == 0.0 {
        return d;
    }
    let (cn, geometric) = if c > 0.0 {
        let l = (c - 1.0).ln_1p();
        let nl = f64::from(n) * l;
        (nl.exp(), nl.exp_m1() / (c - 1.0))
    } else {
        let cn = c.powi(n as i32);
        (cn, (1.0 - cn) / (1.0 - c))
    };
    d * geometric + cn * a0
}

/// Sampler and parameters behind a [`RecursionState`].
#[derive(Debug, Clone, PartialEq)]
pub enum Scheme {
    Ula { eta: f64, c_ula: f64 },
    Proximal { eta: f64, beta: f64 },
    Ehmc { c: f64, integration_time: f64, kappa: f64, lambda_min: f64 },
}

/// History `α^(0), …, α^(k_max)` of `α ↦ contraction·α + offset`.
#[derive(Debug, Clone, PartialEq)]
pub struct RecursionState {
    pub scheme: Scheme,
    pub history: Vec<f64>,
    pub limit: Option<f64>,
    pub diverges: bool,
    pub contraction: f64,
    pub offset: f64,
}

impl RecursionState {
    fn iterate(scheme: Scheme, contraction: f64, offset: f64, alpha0: f64, k_max: usize, limit: Option<f64>) -> Self {
        let mut history = Vec::with_capacity(k_max + 1);
        let mut a = alpha0;
        history.push(a);
        for _ in 0..k_max {
            a = contraction * a + offset;
            history.push(a);
        }
        Self { scheme, history, diverges: limit.is_none(), limit, contraction, offset }
    }

    pub fn alpha0(&self) -> f64 {
        self.history[0]
    }

    /// Closed-form value of `α^(k)`.
    pub fn closed_form(&self, k: usize) -> f64 {
        affine_recursion_closed_form(self.contraction, self.offset, self.alpha0(), k as u32)
    }

    pub fn last(&self) -> f64 {
        *self.history.last().expect("history holds α^(0)")
    }
}

fn check_alpha0(alpha0: f64) -> Result<()> {
    if alpha0 >= 0.0 && alpha0.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("alpha0 must be ≥ 0, got {alpha0}")))
    }
}

/// `α^(k+1) = 2η + c_ULA²·α^(k)` for a μ-strongly convex, λ-smooth target.
pub fn ula_recursion(mu: f64, lambda: f64, eta: f64, alpha0: f64, k_max: usize) -> Result<RecursionState> {
    if !(mu > 0.0 && mu <= lambda && lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!("need 0 < mu ≤ lambda, got ({mu}, {lambda})")));
    }
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::BadStep(eta));
    }
    ula_recursion_with_contraction(c_ula(mu, lambda, eta), eta, alpha0, k_max)
}

/// ULA recursion for a given `c_ULA`, e.g. from Hessian bounds of a perturbed target.
pub fn ula_recursion_with_contraction(c_ula: f64, eta: f64, alpha0: f64, k_max: usize) -> Result<RecursionState> {
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::BadStep(eta));
    }
    check_alpha0(alpha0)?;
    let c2 = c_ula * c_ula;
    let limit = (c_ula < 1.0).then(|| 2.0 * eta / (1.0 - c2));
    Ok(RecursionState::iterate(Scheme::Ula { eta, c_ula }, c2, 2.0 * eta, alpha0, k_max, limit))
}

/// `min{λ − ηλ²/2, μ − ημ²/2}⁻¹`, the ULA limit written through μ and λ.
/// `None` when the minimum is not positive.
pub fn ula_strongly_convex_limit(mu: f64, lambda: f64, eta: f64) -> Option<f64> {
    let m = (lambda - eta * lambda * lambda / 2.0).min(mu - eta * mu * mu / 2.0);
    (m > 0.0).then(|| 1.0 / m)
}

/// `α^(k+1) = β + (α^(k) + η)·β²/η²`. Diverges iff `β ≥ η`.
pub fn proximal_recursion(beta: f64, eta: f64, alpha0: f64, k_max: usize) -> Result<RecursionState> {
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::BadStep(eta));
    }
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::InvalidParameter(format!("beta must be > 0, got {beta}")));
    }
    check_alpha0(alpha0)?;
    let c_k = proximal_c_k(beta, eta);
    let limit = (beta < eta).then(|| 1.0 / (1.0 / beta - 1.0 / eta));
    let offset = eta * proximal_d_k(beta, eta);
    Ok(RecursionState::iterate(Scheme::Proximal { eta, beta }, c_k, offset, alpha0, k_max, limit))
}

/// `c_K = β²/η²`.
pub fn proximal_c_k(beta: f64, eta: f64) -> f64 {
    let r = beta / eta;
    r * r
}

/// `d_K = c_K + √c_K`, the offset of the recursion for `α/η`.
pub fn proximal_d_k(beta: f64, eta: f64) -> f64 {
    let r = beta / eta;
    r * r + r
}

/// Quantities of exact HMC on `xᵀMx/2` with `T = 1/(c√λ_max)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EhmcConstants {
    pub integration_time: f64,
    pub kappa: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    /// `(c√κ)⁻¹ = √λ_min·T`.
    pub z_min: f64,
    /// Poincaré constant `8c²κ` of every kernel.
    pub kernel_pi_constant: f64,
}

pub fn ehmc_constants(m: &DMatrix<f64>, c: f64) -> Result<EhmcConstants> {
    if !(c >= 2.0 && c.is_finite()) {
        return Err(Error::BadStep(c));
    }
    let m = SpdMatrix::new(m.clone())?;
    let (lambda_min, lambda_max) = (m.lambda_min(), m.lambda_max());
    let kappa = lambda_max / lambda_min;
    let integration_time = 1.0 / (c * lambda_max.sqrt());
    Ok(EhmcConstants {
        integration_time,
        kappa,
        lambda_min,
        lambda_max,
        z_min: 1.0 / (c * kappa.sqrt()),
        kernel_pi_constant: 8.0 * c * c * kappa,
    })
}

/// `α^(k+1) = T²·φ(z) + α^(k)·cos²(z)` with `z = (c√κ)⁻¹`; limit `1/λ_min(M)`.
pub fn ehmc_recursion(m: &DMatrix<f64>, c: f64, alpha0: f64, k_max: usize) -> Result<RecursionState> {
    check_alpha0(alpha0)?;
    let k = ehmc_constants(m, c)?;
    let t = k.integration_time;
    let z = k.z_min;
    let contraction = z.cos().powi(2);
    let offset = t * t * sinc_squared(z);
    // offset / (1 − cos² z) without the cancellation: T²/z²
    let limit = Some(t * t / (z * z));
    let scheme = Scheme::Ehmc { c, integration_time: t, kappa: k.kappa, lambda_min: k.lambda_min };
    Ok(RecursionState::iterate(scheme, contraction, offset, alpha0, k_max, limit))
}

/// A perturbation of a strongly convex potential with Bakry–Émery constant `1/μ_eff`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PerturbationCase {
    /// Bounded oscillation `B`: factor `e^B`.
    HolleyStroock { oscillation: f64 },
    /// `L`-Lipschitz: `μ_eff⁻¹·exp(L²/μ_eff + 4L/√μ_eff)`.
    BrigatiLipschitz { lipschitz: f64 },
}

/// LSI constant of the perturbed law, given `base_beta_inv = μ_eff`.
pub fn perturbation_constants(base_beta_inv: f64, case: PerturbationCase) -> f64 {
    let mu = base_beta_inv;
    match case {
        PerturbationCase::HolleyStroock { oscillation } => oscillation.exp() / mu,
        PerturbationCase::BrigatiLipschitz { lipschitz: l } => (l * l / mu + 4.0 * l / mu.sqrt()).exp() / mu,
    }
}

/// Component constant `β` of the proximal backward kernel with strong
/// convexity `μ` and step `η`, optionally perturbed.
pub fn proximal_beta(mu: f64, eta: f64, perturbation: Option<PerturbationCase>) -> f64 {
    let mu_eff = mu + 1.0 / eta;
    match perturbation {
        None => 1.0 / mu_eff,
        Some(case) => perturbation_constants(mu_eff, case),
    }
}

/// Steps above `(e^B − 1)/μ` give `β < η` in the Holley–Stroock case.
pub fn holley_stroock_min_step(oscillation: f64, mu: f64) -> f64 {
    oscillation.exp_m1() / mu
}

/// Steps above `(1/μ)(exp(L²/μ + 4L/√μ) − 1)` give `β < η` in the Lipschitz case.
pub fn brigati_sufficient_step(lipschitz: f64, mu: f64) -> f64 {
    let l = lipschitz;
    (l * l / mu + 4.0 * l / mu.sqrt()).exp_m1() / mu
}

#[cfg(test)]
mod tests {
    use super::*;

    fn input(a: f64, b: f64, l: f64) -> TwoScaleInput {
        TwoScaleInput::new(a, b, l, Inequality::Pi).unwrap()
    }

    #[test]
    fn zeta_and_xi_examples() {
        assert_eq!(zeta(&input(1.0, 1.0, 0.0)), 1.0);
        assert!((zeta(&input(1.0, 1.0, 1.0)) - (3.0 + 5f64.sqrt()) / 2.0).abs() < 1e-15);
        assert_eq!(zeta(&input(2.0, 1.0, 0.0)), 2.0);
        assert_eq!(xi(&input(1.0, 1.0, 1.0)), 2.0);
        assert_eq!(xi(&input(0.7, 1.3, 0.0)), 1.3);
        assert_eq!(xi(&input(0.5, 2.0, 3.0)), 11.0);
    }

    #[test]
    fn product_and_convolution() {
        assert_eq!(product_convolution_constants(1.0, 4.0).unwrap(), (4.0, 5.0));
        assert_eq!(product_convolution_constants(3.0, 3.0).unwrap(), (3.0, 6.0));
        assert!(product_convolution_constants(0.0, 1.0).is_err());
    }

    #[test]
    fn affine_closed_form_examples() {
        assert_eq!(affine_recursion_closed_form(0.5, 1.0, 0.0, 3), 1.75);
        assert_eq!(affine_recursion_closed_form(1.0, 1.0, 0.0, 5), 5.0);
        let mut a = 10.0;
        for _ in 0..50 {
            a = 0.9 * a + 2.0;
        }
        assert!((affine_recursion_closed_form(0.9, 2.0, 10.0, 50) - a).abs() < 1e-12);
    }

    #[test]
    fn ula_examples() {
        let r = ula_recursion(1.0, 1.0, 1.0, 1.0, 10).unwrap();
        assert_eq!(r.contraction, 0.0);
        assert_eq!(r.limit, Some(2.0));
        let r = ula_recursion(1.0, 2.0, 0.5, 1.0, 10).unwrap();
        assert!((r.limit.unwrap() - 4.0 / 3.0).abs() < 1e-15);
        assert!((ula_strongly_convex_limit(1.0, 2.0, 0.5).unwrap() - 4.0 / 3.0).abs() < 1e-15);
        let small = ula_recursion(1.0, 2.0, 1e-8, 1.0, 1).unwrap();
        assert!((small.limit.unwrap() - 1.0).abs() < 1e-7);
        assert!(matches!(ula_recursion(1.0, 1.0, 0.0, 1.0, 1), Err(Error::BadStep(_))));
        // c_ULA = 1 exactly at η = 2/λ
        assert!(ula_recursion(1.0, 1.0, 2.0, 1.0, 1).unwrap().diverges);
    }

    #[test]
    fn proximal_examples() {
        for eta in [0.1, 1.0, 7.0] {
            let beta = proximal_beta(1.0, eta, None);
            let r = proximal_recursion(beta, eta, 3.0, 5).unwrap();
            assert!((r.limit.unwrap() - 1.0).abs() < 1e-12);
        }
        assert!(proximal_recursion(1.0, 1.0, 1.0, 5).unwrap().diverges);
        let b = 2f64.ln();
        assert!((holley_stroock_min_step(b, 1.0) - 1.0).abs() < 1e-15);
        assert_eq!(perturbation_constants(2.0, PerturbationCase::HolleyStroock { oscillation: 0.0 }), 0.5);
        assert_eq!(perturbation_constants(1.0, PerturbationCase::BrigatiLipschitz { lipschitz: 0.0 }), 1.0);
    }

    #[test]
    fn ehmc_examples() {
        let m = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 4.0]));
        let k = ehmc_constants(&m, 2.0).unwrap();
        assert_eq!(k.kappa, 4.0);
        assert_eq!(k.integration_time, 0.25);
        assert_eq!(k.kernel_pi_constant, 128.0);
        let r = ehmc_recursion(&m, 2.0, 0.0, 10).unwrap();
        assert!((r.limit.unwrap() - 1.0).abs() < 1e-12);
        assert!(!r.diverges);
        assert!(matches!(ehmc_recursion(&m, 1.5, 0.0, 1), Err(Error::BadStep(_))));
    }
}
