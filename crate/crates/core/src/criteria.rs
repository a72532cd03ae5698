//! The two-scale criteria on the y-score `s(x, y) = ∇_y log p_{X|Y=y}(x)`:
//!
//! - Var: `E_{P_y}[⟨u, s⟩²] ≤ L̄²‖u‖²`
//! - MGF: `log E_{P_y}[exp⟨u, s⟩] ≤ L̄²‖u‖²/2`
//!
//! Gaussian kernels are checked in closed form, others by Monte Carlo with a
//! 5-standard-error slack. Neither path can cover every `(y, u)`; reports say
//! whether the result is global or only holds on the probe grid.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernels::ConditionalFamily;
use crate::linalg::symmetric_lambda_max;
use crate::rng::{derive_seed, stream_rng, ChainRng};

/// Relative floating-point tolerance for analytic comparisons.
pub const ANALYTIC_REL_TOL: f64 = 1e-12;

/// Standard errors of slack before a Monte Carlo probe counts as violated.
pub const MC_SLACK_SIGMAS: f64 = 5.0;

/// Allowed deviation of `‖u‖` from 1.
pub const UNIT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CriterionKind {
    Var,
    Mgf,
}

impl CriterionKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Var => "Var",
            Self::Mgf => "MGF",
        }
    }
}

/// Score conditions that imply one or both criteria.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SufficientCondition {
    /// `|⟨u, s⟩| ≤ B‖u‖` almost surely.
    BoundedScore { bound: f64 },
    /// `E[⟨u, s⟩²] ≤ B²‖u‖²`.
    BoundedVariance { bound: f64 },
    /// `x ↦ ∇₂G(x, y)` is `L`-Lipschitz and `P_y` satisfies PI(β).
    LipschitzPlusPi { lipschitz: f64, beta: f64 },
    /// `⟨u, s⟩` is σ‖u‖-sub-Gaussian.
    SubGaussianScore { sigma: f64 },
    /// `x ↦ ∇₂G(x, y)` is `L`-Lipschitz and `P_y` satisfies LSI(β).
    LipschitzPlusLsi { lipschitz: f64, beta: f64 },
}

impl SufficientCondition {
    pub fn name(&self) -> &'static str {
        match self {
            Self::BoundedScore { .. } => "bounded-score",
            Self::BoundedVariance { .. } => "bounded-variance",
            Self::LipschitzPlusPi { .. } => "lipschitz+pi",
            Self::SubGaussianScore { .. } => "sub-gaussian-score",
            Self::LipschitzPlusLsi { .. } => "lipschitz+lsi",
        }
    }
}

/// Constants `(Var L̄, MGF L̄)` implied by a sufficient condition; a criterion
/// the condition does not imply is `None`.
pub fn derive_l_bar(cond: &SufficientCondition) -> (Option<f64>, Option<f64>) {
    match *cond {
        SufficientCondition::BoundedScore { bound } => (Some(bound), Some(bound)),
        SufficientCondition::BoundedVariance { bound } => (Some(bound), None),
        SufficientCondition::LipschitzPlusPi { lipschitz, beta } => (Some(beta.sqrt() * lipschitz), None),
        SufficientCondition::SubGaussianScore { sigma } => (Some(2.0 * sigma), Some(sigma)),
        SufficientCondition::LipschitzPlusLsi { lipschitz, beta } => (None, Some(beta.sqrt() * lipschitz)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CheckMethod {
    Analytic,
    MonteCarlo,
    Sufficient(SufficientCondition),
}

impl CheckMethod {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Analytic => "analytic",
            Self::MonteCarlo => "monte-carlo",
            Self::Sufficient(_) => "sufficient",
        }
    }
}

/// Scope of a passing report.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Certification {
    /// The bound holds for every `y` and `u`.
    Global,
    /// The bound holds on the supplied probes only.
    Grid,
}

impl Certification {
    pub fn name(self) -> &'static str {
        match self {
            Self::Global => "global",
            Self::Grid => "grid",
        }
    }
}

/// One `(y, u, λ)` evaluation. For Var, `lambda` is 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Probe {
    pub y: DVector<f64>,
    pub u: DVector<f64>,
    pub lambda: f64,
    pub observed: f64,
    pub bound: f64,
    pub std_err: f64,
    /// Tolerance added to `bound` before declaring a violation.
    pub slack: f64,
    /// `bound − observed`.
    pub margin: f64,
    /// The empirical MGF overflowed; the probe is skipped.
    pub overflow: bool,
}

impl Probe {
    pub fn violated(&self) -> bool {
        !self.overflow && self.observed > self.bound + self.slack
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriterionReport {
    pub kind: CriterionKind,
    pub l_bar: f64,
    pub method: CheckMethod,
    pub certification: Certification,
    pub probes: Vec<Probe>,
    pub violated: bool,
    /// Smallest `L̄` that would satisfy every probe, slack aside.
    pub observed_sup: f64,
}

impl CriterionReport {
    pub fn passed(&self) -> bool {
        !self.violated
    }

    pub fn skipped(&self) -> usize {
        self.probes.iter().filter(|p| p.overflow).count()
    }
}

fn validate(y_grid: &[DVector<f64>], u_grid: &[DVector<f64>], l_bar: f64, dim_y: usize) -> Result<()> {
    if !(l_bar >= 0.0 && l_bar.is_finite()) {
        return Err(Error::InvalidParameter(format!("L̄ must be ≥ 0, got {l_bar}")));
    }
    for y in y_grid {
        crate::error::check_dim(dim_y, y.len())?;
    }
    for u in u_grid {
        crate::error::check_dim(dim_y, u.len())?;
        let n = u.norm();
        if (n - 1.0).abs() > UNIT_TOL {
            return Err(Error::NonUnitProbe(n));
        }
    }
    Ok(())
}

/// Var criterion; analytic for Gaussian kernels, Monte Carlo otherwise.
pub fn check_var_criterion<K: ConditionalFamily + ?Sized>(
    family: &K,
    y_grid: &[DVector<f64>],
    u_grid: &[DVector<f64>],
    l_bar: f64,
    n_mc: usize,
    rng: &mut ChainRng,
) -> Result<CriterionReport> {
    check(family, CriterionKind::Var, y_grid, u_grid, &[1.0], l_bar, n_mc, rng, false)
}

/// Var criterion by Monte Carlo even when a Gaussian form is known.
pub fn check_var_criterion_mc<K: ConditionalFamily + ?Sized>(
    family: &K,
    y_grid: &[DVector<f64>],
    u_grid: &[DVector<f64>],
    l_bar: f64,
    n_mc: usize,
    rng: &mut ChainRng,
) -> Result<CriterionReport> {
    check(family, CriterionKind::Var, y_grid, u_grid, &[1.0], l_bar, n_mc, rng, true)
}

/// MGF criterion at directions `λu`, bound `L̄²λ²/2`.
pub fn check_mgf_criterion<K: ConditionalFamily + ?Sized>(
    family: &K,
    y_grid: &[DVector<f64>],
    u_grid: &[DVector<f64>],
    lambda_grid: &[f64],
    l_bar: f64,
    n_mc: usize,
    rng: &mut ChainRng,
) -> Result<CriterionReport> {
    check(family, CriterionKind::Mgf, y_grid, u_grid, lambda_grid, l_bar, n_mc, rng, false)
}

/// MGF criterion by Monte Carlo even when a Gaussian form is known.
pub fn check_mgf_criterion_mc<K: ConditionalFamily + ?Sized>(
    family: &K,
    y_grid: &[DVector<f64>],
    u_grid: &[DVector<f64>],
    lambda_grid: &[f64],
    l_bar: f64,
    n_mc: usize,
    rng: &mut ChainRng,
) -> Result<CriterionReport> {
    check(family, CriterionKind::Mgf, y_grid, u_grid, lambda_grid, l_bar, n_mc, rng, true)
}

#[allow(clippy::too_many_arguments)]
fn check<K: ConditionalFamily + ?Sized>(
    family: &K,
    kind: CriterionKind,
    y_grid: &[DVector<f64>],
    u_grid: &[DVector<f64>],
    lambda_grid: &[f64],
    l_bar: f64,
    n_mc: usize,
    rng: &mut ChainRng,
    force_mc: bool,
) -> Result<CriterionReport> {
    validate(y_grid, u_grid, l_bar, family.dim_y())?;
    if lambda_grid.iter().any(|l| !l.is_finite()) {
        return Err(Error::InvalidParameter("lambda grid must be finite".into()));
    }
    let l2 = l_bar * l_bar;
    let mut cases = Vec::with_capacity(y_grid.len() * u_grid.len() * lambda_grid.len());
    for y in y_grid {
        for u in u_grid {
            for &lambda in lambda_grid {
                cases.push((y, u, lambda));
            }
        }
    }
    let bound_at = |lambda: f64| match kind {
        CriterionKind::Var => l2,
        CriterionKind::Mgf => 0.5 * l2 * lambda * lambda,
    };

    let gaussian = if force_mc { None } else { family.gaussian() };
    let (method, probes, certification) = match gaussian {
        Some(g) => {
            let probes: Vec<Probe> = cases
                .iter()
                .map(|&(y, u, lambda)| {
                    let var = u.dot(&(g.score_covariance(y) * u));
                    let observed = match kind {
                        CriterionKind::Var => var,
                        CriterionKind::Mgf => 0.5 * lambda * lambda * var,
                    };
                    let bound = bound_at(lambda);
                    Probe {
                        y: y.clone(),
                        u: u.clone(),
                        lambda,
                        observed,
                        bound,
                        std_err: 0.0,
                        slack: ANALYTIC_REL_TOL * bound.max(observed),
                        margin: bound - observed,
                        overflow: false,
                    }
                })
                .collect();
            let certification = if g.mean_map().is_affine() {
                let y0 = DVector::zeros(family.dim_y());
                let sup = symmetric_lambda_max(&g.score_covariance(&y0));
                if sup <= l2 * (1.0 + ANALYTIC_REL_TOL) {
                    Certification::Global
                } else {
                    Certification::Grid
                }
            } else {
                Certification::Grid
            };
            (CheckMethod::Analytic, probes, certification)
        }
        None => {
            if n_mc < 2 {
                return Err(Error::InvalidParameter("n_mc must be ≥ 2".into()));
            }
            let base = derive_seed(rng);
            let probes = cases
                .par_iter()
                .enumerate()
                .map(|(i, &(y, u, lambda))| {
                    let mut probe_rng = stream_rng(base, i as u64);
                    mc_probe(family, kind, y, u, lambda, bound_at(lambda), n_mc, &mut probe_rng)
                })
                .collect::<Result<Vec<_>>>()?;
            (CheckMethod::MonteCarlo, probes, Certification::Grid)
        }
    };

    let violated = probes.iter().any(Probe::violated);
    let observed_sup = probes
        .iter()
        .filter(|p| !p.overflow)
        .map(|p| match kind {
            CriterionKind::Var => p.observed.max(0.0).sqrt(),
            CriterionKind::Mgf if p.lambda != 0.0 => (2.0 * p.observed.max(0.0)).sqrt() / p.lambda.abs(),
            CriterionKind::Mgf => 0.0,
        })
        .fold(0.0, f64::max);
    Ok(CriterionReport { kind, l_bar, method, certification, probes, violated, observed_sup })
}

#[allow(clippy::too_many_arguments)]
fn mc_probe<K: ConditionalFamily + ?Sized>(
    family: &K,
    kind: CriterionKind,
    y: &DVector<f64>,
    u: &DVector<f64>,
    lambda: f64,
    bound: f64,
    n_mc: usize,
    rng: &mut ChainRng,
) -> Result<Probe> {
    let expected = match family.expected_potential_grad_y(y) {
        Some(e) => e,
        None => {
            let mut acc = DVector::zeros(family.dim_y());
            for _ in 0..n_mc {
                acc += family.potential_grad_y(&family.sample(y, rng)?, y);
            }
            acc / n_mc as f64
        }
    };
    let e_u = u.dot(&expected);
    let mut projections = Vec::with_capacity(n_mc);
    for _ in 0..n_mc {
        let x = family.sample(y, rng)?;
        projections.push(e_u - u.dot(&family.potential_grad_y(&x, y)));
    }
    let (observed, std_err, overflow) = match kind {
        CriterionKind::Var => {
            let sq: Vec<f64> = projections.iter().map(|s| s * s).collect();
            let (m, se) = crate::numeric::mean_and_std_err(&sq);
            (m, se, false)
        }
        CriterionKind::Mgf => {
            let exps: Vec<f64> = projections.iter().map(|s| lambda * s).collect();
            if exps.iter().any(|e| !e.is_finite()) {
                (f64::NAN, f64::NAN, true)
            } else {
                let shift = exps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let w: Vec<f64> = exps.iter().map(|e| (e - shift).exp()).collect();
                let (mw, sew) = crate::numeric::mean_and_std_err(&w);
                let log_mgf = shift + mw.ln();
                // delta method: se(log m̂) ≈ se(m̂)/m̂
                (log_mgf, sew / mw, !log_mgf.is_finite())
            }
        }
    };
    let slack = if overflow { 0.0 } else { MC_SLACK_SIGMAS * std_err };
    Ok(Probe {
        y: y.clone(),
        u: u.clone(),
        lambda,
        observed,
        bound,
        std_err,
        slack,
        margin: bound - observed,
        overflow,
    })
}

/// Unit coordinate directions plus the normalized diagonals `(e_i ± e_j)/√2`.
pub fn standard_directions(dim: usize) -> Vec<DVector<f64>> {
    let mut out = Vec::new();
    for i in 0..dim {
        out.push(DVector::from_fn(dim, |k, _| if k == i { 1.0 } else { 0.0 }));
    }
    let r = std::f64::consts::FRAC_1_SQRT_2;
    for i in 0..dim {
        for j in i + 1..dim {
            for sign in [1.0, -1.0] {
                out.push(DVector::from_fn(dim, |k, _| {
                    if k == i {
                        r
                    } else if k == j {
                        sign * r
                    } else {
                        0.0
                    }
                }));
            }
        }
    }
    out
}

/// Score covariance `JᵀΣ⁻¹J` of a Gaussian family at `y`, exposed for reporting.
pub fn gaussian_score_covariance<K: ConditionalFamily + ?Sized>(family: &K, y: &DVector<f64>) -> Option<DMatrix<f64>> {
    family.gaussian().map(|g| g.score_covariance(y))
}
