//! Conditional families `y ↦ P_{X|Y=y}` with density `∝ exp(−G(x, y))`, the
//! y-score identities, and the concrete kernels of the three samplers.
//!
//! The y-score is `∇_y log p_{X|Y=y}(x) = E_{P_y}[∇₂G] − ∇₂G(x, y)`; the
//! normalizer `Z(y)` is never formed.

use nalgebra::{DMatrix, DVector};

use crate::constants::{self, PerturbationCase};
use crate::error::{check_dim, Error, Result};
use crate::linalg::{op_norm, sinc_squared, SpdMatrix};
use crate::rng::{standard_normal_vector, ChainRng};
use rand::Rng;

/// Default number of Monte Carlo draws for score expectations.
pub const DEFAULT_SCORE_SAMPLES: usize = 10_000;

/// Maximum proposals per draw in the rejection sampler.
pub const MAX_REJECTION_PROPOSALS: usize = 1_000_000;

/// `x ↦ (B/2)(1 − cos(ω⟨w, x⟩))`, oscillation `B`, infimum 0.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundedPerturbation {
    oscillation: f64,
    frequency: f64,
    direction: DVector<f64>,
    lower_bound: Option<f64>,
}

impl BoundedPerturbation {
    /// `lower_bound` is the caller's certified lower bound on the perturbation,
    /// required by the rejection sampler.
    pub fn new(
        oscillation: f64,
        frequency: f64,
        direction: DVector<f64>,
        lower_bound: Option<f64>,
    ) -> Result<Self> {
        if !(oscillation >= 0.0 && oscillation.is_finite()) {
            return Err(Error::InvalidParameter(format!("oscillation must be ≥ 0, got {oscillation}")));
        }
        if !frequency.is_finite() {
            return Err(Error::InvalidParameter("frequency must be finite".into()));
        }
        let norm = direction.norm();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::InvalidParameter("perturbation direction must be nonzero".into()));
        }
        Ok(Self { oscillation, frequency, direction: direction / norm, lower_bound })
    }

    pub fn oscillation(&self) -> f64 {
        self.oscillation
    }

    pub fn lower_bound(&self) -> Option<f64> {
        self.lower_bound
    }

    pub fn infimum(&self) -> f64 {
        0.0
    }

    fn phase(&self, x: &DVector<f64>) -> f64 {
        self.frequency * self.direction.dot(x)
    }

    pub fn value(&self, x: &DVector<f64>) -> f64 {
        0.5 * self.oscillation * (1.0 - self.phase(x).cos())
    }

    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.direction * (0.5 * self.oscillation * self.frequency * self.phase(x).sin())
    }

    pub fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let s = 0.5 * self.oscillation * self.frequency * self.frequency * self.phase(x).cos();
        &self.direction * self.direction.transpose() * s
    }

    /// Bound on the spectral norm of the Hessian.
    pub fn curvature_bound(&self) -> f64 {
        0.5 * self.oscillation * self.frequency * self.frequency
    }
}

/// Potential `V*` of the target `π* ∝ exp(−V*)`. The strongly convex part is
/// always the quadratic `xᵀMx/2`.
#[derive(Debug, Clone)]
pub enum TargetPotential {
    Quadratic(SpdMatrix),
    /// Quadratic plus a perturbation of bounded oscillation.
    PlusBounded { base: SpdMatrix, perturbation: BoundedPerturbation },
    /// Quadratic plus `L·√(1 + ‖x‖²)`, which is `L`-Lipschitz.
    PlusLipschitz { base: SpdMatrix, lipschitz: f64 },
}

impl TargetPotential {
    pub fn quadratic(m: DMatrix<f64>) -> Result<Self> {
        Ok(Self::Quadratic(SpdMatrix::new(m)?))
    }

    pub fn plus_bounded(m: DMatrix<f64>, perturbation: BoundedPerturbation) -> Result<Self> {
        let base = SpdMatrix::new(m)?;
        check_dim(base.dim(), perturbation.direction.len())?;
        Ok(Self::PlusBounded { base, perturbation })
    }

    pub fn plus_lipschitz(m: DMatrix<f64>, lipschitz: f64) -> Result<Self> {
        if !(lipschitz >= 0.0 && lipschitz.is_finite()) {
            return Err(Error::InvalidParameter(format!("Lipschitz constant must be ≥ 0, got {lipschitz}")));
        }
        Ok(Self::PlusLipschitz { base: SpdMatrix::new(m)?, lipschitz })
    }

    pub fn base(&self) -> &SpdMatrix {
        match self {
            Self::Quadratic(m) => m,
            Self::PlusBounded { base, .. } | Self::PlusLipschitz { base, .. } => base,
        }
    }

    pub fn as_quadratic(&self) -> Option<&SpdMatrix> {
        match self {
            Self::Quadratic(m) => Some(m),
            _ => None,
        }
    }

    pub fn dim(&self) -> usize {
        self.base().dim()
    }

    /// Strong convexity of the quadratic part.
    pub fn strong_convexity(&self) -> f64 {
        self.base().lambda_min()
    }

    pub fn value(&self, x: &DVector<f64>) -> f64 {
        let q = 0.5 * x.dot(&(self.base().matrix() * x));
        match self {
            Self::Quadratic(_) => q,
            Self::PlusBounded { perturbation, .. } => q + perturbation.value(x),
            Self::PlusLipschitz { lipschitz, .. } => q + lipschitz * (1.0 + x.norm_squared()).sqrt(),
        }
    }

    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let g = self.base().matrix() * x;
        match self {
            Self::Quadratic(_) => g,
            Self::PlusBounded { perturbation, .. } => g + perturbation.gradient(x),
            Self::PlusLipschitz { lipschitz, .. } => {
                let s = (1.0 + x.norm_squared()).sqrt();
                g + x * (lipschitz / s)
            }
        }
    }

    pub fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let h = self.base().matrix().clone();
        match self {
            Self::Quadratic(_) => h,
            Self::PlusBounded { perturbation, .. } => h + perturbation.hessian(x),
            Self::PlusLipschitz { lipschitz, .. } => {
                let d = x.len();
                let s2 = 1.0 + x.norm_squared();
                let s = s2.sqrt();
                h + (DMatrix::identity(d, d) / s - x * x.transpose() / (s2 * s)) * *lipschitz
            }
        }
    }

    /// Bounds `(lo, hi)` with `lo·I ⪯ ∇²V*(x) ⪯ hi·I` for every `x`.
    pub fn hessian_bounds(&self) -> (f64, f64) {
        let (lo, hi) = (self.base().lambda_min(), self.base().lambda_max());
        match self {
            Self::Quadratic(_) => (lo, hi),
            Self::PlusBounded { perturbation, .. } => {
                let k = perturbation.curvature_bound();
                (lo - k, hi + k)
            }
            Self::PlusLipschitz { lipschitz, .. } => (lo, hi + lipschitz),
        }
    }

    /// `c_ULA = sup_y ‖I − η∇²V*(y)‖_op` from the Hessian bounds.
    pub fn ula_contraction(&self, eta: f64) -> f64 {
        let (lo, hi) = self.hessian_bounds();
        constants::c_ula(lo, hi, eta)
    }
}

/// A family of conditional laws indexed by `y`, with density `∝ exp(−G(x, y))`.
pub trait ConditionalFamily: Send + Sync {
    fn dim_x(&self) -> usize;

    fn dim_y(&self) -> usize;

    /// `G(x, y)`.
    fn potential(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64;

    /// `∇₂G(x, y)`, the gradient in the conditioning variable.
    fn potential_grad_y(&self, x: &DVector<f64>, y: &DVector<f64>) -> DVector<f64>;

    /// Draws `x ~ P_{X|Y=y}`.
    fn sample(&self, y: &DVector<f64>, rng: &mut ChainRng) -> Result<DVector<f64>>;

    /// Exact `E_{P_y}[∇₂G(·, y)]`, when known.
    fn expected_potential_grad_y(&self, _y: &DVector<f64>) -> Option<DVector<f64>> {
        None
    }

    /// Gaussian form of the family, when it has one.
    fn gaussian(&self) -> Option<&GaussianKernel> {
        None
    }

    /// Log-Sobolev constant shared by every `P_y`, when known.
    fn lsi_constant(&self) -> Option<f64> {
        None
    }
}

/// Mean map of a Gaussian kernel.
#[derive(Debug, Clone)]
pub enum MeanMap {
    /// `y ↦ A y + b`.
    Affine { matrix: DMatrix<f64>, offset: DVector<f64> },
    /// `y ↦ y − η∇V*(y)`.
    LangevinDrift { target: TargetPotential, eta: f64 },
}

impl MeanMap {
    pub fn linear(matrix: DMatrix<f64>) -> Self {
        let n = matrix.nrows();
        Self::Affine { matrix, offset: DVector::zeros(n) }
    }

    pub fn eval(&self, y: &DVector<f64>) -> DVector<f64> {
        match self {
            Self::Affine { matrix, offset } => matrix * y + offset,
            Self::LangevinDrift { target, eta } => y - target.gradient(y) * *eta,
        }
    }

    pub fn jacobian(&self, y: &DVector<f64>) -> DMatrix<f64> {
        match self {
            Self::Affine { matrix, .. } => matrix.clone(),
            Self::LangevinDrift { target, eta } => {
                let d = y.len();
                DMatrix::identity(d, d) - target.hessian(y) * *eta
            }
        }
    }

    /// Whether the Jacobian is constant in `y`.
    pub fn is_affine(&self) -> bool {
        match self {
            Self::Affine { .. } => true,
            Self::LangevinDrift { target, .. } => target.as_quadratic().is_some(),
        }
    }

    fn dims(&self) -> (usize, usize) {
        match self {
            Self::Affine { matrix, .. } => (matrix.nrows(), matrix.ncols()),
            Self::LangevinDrift { target, .. } => (target.dim(), target.dim()),
        }
    }
}

/// `P_y = N(m(y), Σ)` with a constant covariance.
#[derive(Debug, Clone)]
pub struct GaussianKernel {
    mean_map: MeanMap,
    covariance: SpdMatrix,
    factor: DMatrix<f64>,
    precision: DMatrix<f64>,
    log_normalizer: f64,
}

impl GaussianKernel {
    pub fn new(mean_map: MeanMap, covariance: DMatrix<f64>) -> Result<Self> {
        let covariance = SpdMatrix::new(covariance)?;
        let (rows, _) = mean_map.dims();
        check_dim(covariance.dim(), rows)?;
        let factor = covariance.cholesky_factor();
        let precision = covariance.inverse();
        let log_det: f64 = covariance.eigenvalues().iter().map(|l| l.ln()).sum();
        let d = covariance.dim() as f64;
        let log_normalizer = 0.5 * (d * (2.0 * std::f64::consts::PI).ln() + log_det);
        Ok(Self { mean_map, covariance, factor, precision, log_normalizer })
    }

    pub fn mean_map(&self) -> &MeanMap {
        &self.mean_map
    }

    pub fn mean(&self, y: &DVector<f64>) -> DVector<f64> {
        self.mean_map.eval(y)
    }

    pub fn jacobian(&self, y: &DVector<f64>) -> DMatrix<f64> {
        self.mean_map.jacobian(y)
    }

    pub fn covariance(&self) -> &SpdMatrix {
        &self.covariance
    }

    /// Lower-triangular `L` with `L Lᵀ = Σ`.
    pub fn covariance_factor(&self) -> &DMatrix<f64> {
        &self.factor
    }

    pub fn precision(&self) -> &DMatrix<f64> {
        &self.precision
    }

    /// Normalized `log p_{X|Y=y}(x)`.
    pub fn log_density(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        let r = x - self.mean(y);
        -0.5 * r.dot(&(&self.precision * &r)) - self.log_normalizer
    }

    /// Closed-form y-score `Jᵀ Σ⁻¹ (x − m(y))`.
    pub fn analytic_score(&self, x: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
        let r = x - self.mean(y);
        self.jacobian(y).transpose() * (&self.precision * r)
    }

    /// Covariance `Jᵀ Σ⁻¹ J` of the y-score under `P_y`.
    pub fn score_covariance(&self, y: &DVector<f64>) -> DMatrix<f64> {
        let j = self.jacobian(y);
        j.transpose() * &self.precision * j
    }

    /// Draw `m(y) + L z` for a given standard normal `z`.
    pub fn transform(&self, y: &DVector<f64>, z: &DVector<f64>) -> DVector<f64> {
        self.mean(y) + &self.factor * z
    }
}

impl ConditionalFamily for GaussianKernel {
    fn dim_x(&self) -> usize {
        self.covariance.dim()
    }

    fn dim_y(&self) -> usize {
        self.mean_map.dims().1
    }

    fn potential(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        let r = x - self.mean(y);
        0.5 * r.dot(&(&self.precision * &r))
    }

    fn potential_grad_y(&self, x: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
        -self.analytic_score(x, y)
    }

    fn sample(&self, y: &DVector<f64>, rng: &mut ChainRng) -> Result<DVector<f64>> {
        let z = standard_normal_vector(rng, self.dim_x());
        Ok(self.transform(y, &z))
    }

    fn expected_potential_grad_y(&self, _y: &DVector<f64>) -> Option<DVector<f64>> {
        Some(DVector::zeros(self.dim_y()))
    }

    fn gaussian(&self) -> Option<&GaussianKernel> {
        Some(self)
    }

    fn lsi_constant(&self) -> Option<f64> {
        Some(self.covariance.lambda_max())
    }
}

/// One ULA step as a kernel: `N(y − η∇V*(y), 2η I)`.
pub fn make_ula_kernel(target: &TargetPotential, eta: f64) -> Result<GaussianKernel> {
    check_step(eta)?;
    let d = target.dim();
    GaussianKernel::new(
        MeanMap::LangevinDrift { target: target.clone(), eta },
        DMatrix::identity(d, d) * (2.0 * eta),
    )
}

/// How the backward proximal kernel is sampled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BackwardSampler {
    /// Restricted Gaussian oracle for quadratic targets.
    Exact,
    /// Propose from the quadratic part, accept with `exp(−(V_bdd(x) − lower_bound))`.
    Rejection { lower_bound: f64 },
    Unavailable,
}

/// Backward kernel `∝ exp(−V*(x) − ‖y − x‖²/(2η))`.
#[derive(Debug, Clone)]
pub struct ProximalBackward {
    target: TargetPotential,
    eta: f64,
    sampler: BackwardSampler,
    quadratic_part: GaussianKernel,
}

impl ProximalBackward {
    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn target(&self) -> &TargetPotential {
        &self.target
    }

    pub fn sampler(&self) -> BackwardSampler {
        self.sampler
    }

    /// Kernel of the quadratic part alone, `N((M + I/η)⁻¹ y/η, (M + I/η)⁻¹)`.
    pub fn quadratic_part(&self) -> &GaussianKernel {
        &self.quadratic_part
    }

    /// LSI constant of every `P_y`: Bakry–Émery for quadratics, Holley–Stroock
    /// for bounded perturbations, the transport bound for Lipschitz ones.
    pub fn beta(&self) -> f64 {
        let mu_eff = self.target.strong_convexity() + 1.0 / self.eta;
        match &self.target {
            TargetPotential::Quadratic(_) => 1.0 / mu_eff,
            TargetPotential::PlusBounded { perturbation, .. } => constants::perturbation_constants(
                mu_eff,
                PerturbationCase::HolleyStroock { oscillation: perturbation.oscillation() },
            ),
            TargetPotential::PlusLipschitz { lipschitz, .. } => constants::perturbation_constants(
                mu_eff,
                PerturbationCase::BrigatiLipschitz { lipschitz: *lipschitz },
            ),
        }
    }
}

impl ConditionalFamily for ProximalBackward {
    fn dim_x(&self) -> usize {
        self.target.dim()
    }

    fn dim_y(&self) -> usize {
        self.target.dim()
    }

    fn potential(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        self.target.value(x) + (y - x).norm_squared() / (2.0 * self.eta)
    }

    fn potential_grad_y(&self, x: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
        (y - x) / self.eta
    }

    fn sample(&self, y: &DVector<f64>, rng: &mut ChainRng) -> Result<DVector<f64>> {
        match self.sampler {
            BackwardSampler::Exact => self.quadratic_part.sample(y, rng),
            BackwardSampler::Rejection { lower_bound } => {
                let TargetPotential::PlusBounded { perturbation, .. } = &self.target else {
                    return Err(Error::SamplerUnavailable);
                };
                for _ in 0..MAX_REJECTION_PROPOSALS {
                    let x = self.quadratic_part.sample(y, rng)?;
                    let log_accept = -(perturbation.value(&x) - lower_bound);
                    let u: f64 = rng.random();
                    if u.ln() < log_accept {
                        return Ok(x);
                    }
                }
                Err(Error::RejectionInfeasible(format!(
                    "no acceptance in {MAX_REJECTION_PROPOSALS} proposals"
                )))
            }
            BackwardSampler::Unavailable => Err(Error::SamplerUnavailable),
        }
    }

    fn expected_potential_grad_y(&self, y: &DVector<f64>) -> Option<DVector<f64>> {
        match self.sampler {
            BackwardSampler::Exact => Some((y - self.quadratic_part.mean(y)) / self.eta),
            _ => None,
        }
    }

    fn gaussian(&self) -> Option<&GaussianKernel> {
        match self.sampler {
            BackwardSampler::Exact => Some(&self.quadratic_part),
            _ => None,
        }
    }

    fn lsi_constant(&self) -> Option<f64> {
        Some(self.beta())
    }
}

/// Forward `N(x, ηI)` and backward kernels of the proximal sampler.
pub fn make_proximal_kernels(
    target: &TargetPotential,
    eta: f64,
) -> Result<(GaussianKernel, ProximalBackward)> {
    check_step(eta)?;
    let d = target.dim();
    let identity = DMatrix::<f64>::identity(d, d);
    let forward = GaussianKernel::new(MeanMap::linear(identity.clone()), &identity * eta)?;

    let precision = target.base().matrix() + &identity / eta;
    let cov = SpdMatrix::new(precision)?.inverse();
    let quadratic_part = GaussianKernel::new(MeanMap::linear(&cov / eta), cov)?;

    let sampler = match target {
        TargetPotential::Quadratic(_) => BackwardSampler::Exact,
        TargetPotential::PlusBounded { perturbation, .. } => match perturbation.lower_bound() {
            None => {
                return Err(Error::RejectionInfeasible(
                    "no lower bound supplied for the bounded perturbation".into(),
                ))
            }
            Some(lb) if lb > perturbation.infimum() => {
                return Err(Error::RejectionInfeasible(format!(
                    "lower bound {lb} exceeds the perturbation infimum"
                )))
            }
            Some(lb) => BackwardSampler::Rejection { lower_bound: lb },
        },
        TargetPotential::PlusLipschitz { .. } => BackwardSampler::Unavailable,
    };

    let backward = ProximalBackward { target: target.clone(), eta, sampler, quadratic_part };
    Ok((forward, backward))
}

/// One step of exact HMC on `V*(x) = xᵀMx/2` with integration time `T`:
/// `N(cos(√M T) y, T² φ(√M T))`, `φ(z) = (sin z / z)²`.
#[derive(Debug, Clone)]
pub struct EhmcKernel {
    gaussian: GaussianKernel,
    matrix: SpdMatrix,
    integration_time: f64,
    cos_flow: DMatrix<f64>,
    sin_flow: DMatrix<f64>,
    phi: DMatrix<f64>,
}

impl EhmcKernel {
    pub fn integration_time(&self) -> f64 {
        self.integration_time
    }

    pub fn matrix(&self) -> &SpdMatrix {
        &self.matrix
    }

    /// `cos(√M T)`.
    pub fn cos_flow(&self) -> &DMatrix<f64> {
        &self.cos_flow
    }

    /// `φ(√M T)`.
    pub fn phi(&self) -> &DMatrix<f64> {
        &self.phi
    }

    pub fn as_gaussian(&self) -> &GaussianKernel {
        &self.gaussian
    }

    /// Bakry–Émery constant `T² λ_max(φ(√M T))`.
    pub fn beta(&self) -> f64 {
        let t = self.integration_time;
        let max_phi = self
            .matrix
            .eigenvalues()
            .iter()
            .map(|&l| sinc_squared(l.sqrt() * t))
            .fold(f64::NEG_INFINITY, f64::max);
        t * t * max_phi
    }

    /// Lipschitz constant of `x ↦ ∇₂G(x, y)`: `T⁻² ‖φ(√M T)⁻¹ cos(√M T)‖_op`.
    pub fn grad_lipschitz(&self) -> f64 {
        let t = self.integration_time;
        let m = self.matrix.map_spectrum(|l| {
            let z = l.sqrt() * t;
            z.cos() / sinc_squared(z)
        });
        op_norm(&m) / (t * t)
    }

    /// MGF criterion constant `√β · L` from the Lipschitz-plus-LSI route.
    pub fn mgf_l_bar(&self) -> f64 {
        self.beta().sqrt() * self.grad_lipschitz()
    }

    /// Draw through the Hamiltonian flow: `cos(√M T) y + (√M)⁻¹ sin(√M T) q`, `q ~ N(0, I)`.
    pub fn sample_flow(&self, y: &DVector<f64>, rng: &mut ChainRng) -> DVector<f64> {
        let q = standard_normal_vector(rng, self.matrix.dim());
        self.flow(y, &q)
    }

    /// Position after time `T` from `(y, q)`.
    pub fn flow(&self, y: &DVector<f64>, q: &DVector<f64>) -> DVector<f64> {
        &self.cos_flow * y + &self.sin_flow * q
    }

    /// Linear map `(√M)⁻¹ sin(√M T)` applied to the initial velocity.
    pub fn sin_flow(&self) -> &DMatrix<f64> {
        &self.sin_flow
    }
}

impl ConditionalFamily for EhmcKernel {
    fn dim_x(&self) -> usize {
        self.gaussian.dim_x()
    }

    fn dim_y(&self) -> usize {
        self.gaussian.dim_y()
    }

    fn potential(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        self.gaussian.potential(x, y)
    }

    fn potential_grad_y(&self, x: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
        self.gaussian.potential_grad_y(x, y)
    }

    fn sample(&self, y: &DVector<f64>, rng: &mut ChainRng) -> Result<DVector<f64>> {
        Ok(self.sample_flow(y, rng))
    }

    fn expected_potential_grad_y(&self, y: &DVector<f64>) -> Option<DVector<f64>> {
        self.gaussian.expected_potential_grad_y(y)
    }

    fn gaussian(&self) -> Option<&GaussianKernel> {
        Some(&self.gaussian)
    }

    fn lsi_constant(&self) -> Option<f64> {
        Some(self.beta())
    }
}

pub fn make_ehmc_kernel(m: &DMatrix<f64>, integration_time: f64) -> Result<EhmcKernel> {
    check_step(integration_time)?;
    let matrix = SpdMatrix::new(m.clone())?;
    let t = integration_time;
    let cos_flow = matrix.map_spectrum(|l| (l.sqrt() * t).cos());
    let sin_flow = matrix.map_spectrum(|l| {
        let r = l.sqrt();
        (r * t).sin() / r
    });
    let phi = matrix.map_spectrum(|l| sinc_squared(l.sqrt() * t));
    let gaussian = GaussianKernel::new(MeanMap::linear(cos_flow.clone()), &phi * (t * t))?;
    Ok(EhmcKernel { gaussian, matrix, integration_time, cos_flow, sin_flow, phi })
}

fn check_step(step: f64) -> Result<()> {
    if step > 0.0 && step.is_finite() {
        Ok(())
    } else {
        Err(Error::BadStep(step))
    }
}

/// `∇_y log p_{X|Y=y}(x)`. Uses the exact `E_{P_y}[∇₂G]` when the family
/// declares it, otherwise an `n_mc`-draw Monte Carlo mean.
pub fn score_in_y<K: ConditionalFamily + ?Sized>(
    family: &K,
    x: &DVector<f64>,
    y: &DVector<f64>,
    n_mc: usize,
    rng: &mut ChainRng,
) -> Result<DVector<f64>> {
    check_dim(family.dim_x(), x.len())?;
    check_dim(family.dim_y(), y.len())?;
    let expected = match family.expected_potential_grad_y(y) {
        Some(e) => e,
        None => mc_expected_grad(family, y, n_mc, rng)?,
    };
    Ok(expected - family.potential_grad_y(x, y))
}

fn mc_expected_grad<K: ConditionalFamily + ?Sized>(
    family: &K,
    y: &DVector<f64>,
    n_mc: usize,
    rng: &mut ChainRng,
) -> Result<DVector<f64>> {
    if n_mc == 0 {
        return Err(Error::InvalidParameter("n_mc must be ≥ 1".into()));
    }
    let mut acc = DVector::zeros(family.dim_y());
    for _ in 0..n_mc {
        let x = family.sample(y, rng)?;
        acc += family.potential_grad_y(&x, y);
    }
    Ok(acc / n_mc as f64)
}

/// A test function `ψ(x, y)` with its gradient in `y`.
pub trait JointFunction: Sync {
    fn value(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64;
    fn grad_y(&self, x: &DVector<f64>, y: &DVector<f64>) -> DVector<f64>;
}

/// [`JointFunction`] from a pair of closures.
pub struct FnJoint<V, G> {
    pub value: V,
    pub grad_y: G,
}

impl<V, G> JointFunction for FnJoint<V, G>
where
    V: Fn(&DVector<f64>, &DVector<f64>) -> f64 + Sync,
    G: Fn(&DVector<f64>, &DVector<f64>) -> DVector<f64> + Sync,
{
    fn value(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        (self.value)(x, y)
    }

    fn grad_y(&self, x: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
        (self.grad_y)(x, y)
    }
}

/// Monte Carlo estimate of `∇_y E_{P_y}[ψ(·, y)]` through
/// `E[∇_y log p · ψ] + E[∇₂ψ]`.
pub fn expectation_gradient<K, P>(
    family: &K,
    psi: &P,
    y: &DVector<f64>,
    n_mc: usize,
    rng: &mut ChainRng,
) -> Result<DVector<f64>>
where
    K: ConditionalFamily + ?Sized,
    P: JointFunction + ?Sized,
{
    check_dim(family.dim_y(), y.len())?;
    if n_mc == 0 {
        return Err(Error::InvalidParameter("n_mc must be ≥ 1".into()));
    }
    let draws = (0..n_mc).map(|_| family.sample(y, rng)).collect::<Result<Vec<_>>>()?;
    let grads: Vec<DVector<f64>> = draws.iter().map(|x| family.potential_grad_y(x, y)).collect();
    let expected = match family.expected_potential_grad_y(y) {
        Some(e) => e,
        None => grads.iter().fold(DVector::zeros(family.dim_y()), |a, g| a + g) / n_mc as f64,
    };
    let mut score_term = DVector::zeros(family.dim_y());
    let mut direct_term = DVector::zeros(family.dim_y());
    for (x, g) in draws.iter().zip(&grads) {
        score_term += (&expected - g) * psi.value(x, y);
        direct_term += psi.grad_y(x, y);
    }
    Ok((score_term + direct_term) / n_mc as f64)
}
