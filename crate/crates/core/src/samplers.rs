//! The three samplers run as iterated kernels over many independent chains.
//!
//! Chain `i` draws all of its randomness from `stream_rng(seed, i)`, and
//! clouds are assembled in chain order, so output does not depend on the
//! number of worker threads.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::constants::ehmc_constants;
use crate::error::{check_dim, Error, Result};
use crate::kernels::{
    make_ehmc_kernel, make_proximal_kernels, make_ula_kernel, ConditionalFamily, TargetPotential,
};
use crate::linalg::{sinc_squared, SpdMatrix};
use crate::rng::{standard_normal_vector, stream_rng};

/// `N` points in `ℝ^d`, one per chain, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleCloud {
    points: Vec<f64>,
    dim: usize,
    pub iteration: usize,
    pub seed: u64,
    pub stream_count: u64,
}

impl SampleCloud {
    pub fn new(points: Vec<f64>, dim: usize, iteration: usize, seed: u64, stream_count: u64) -> Result<Self> {
        if dim == 0 || points.is_empty() || !points.len().is_multiple_of(dim) {
            return Err(Error::BadConfig(format!(
                "cloud of {} values does not split into points of dimension {dim}",
                points.len()
            )));
        }
        if points.iter().any(|v| !v.is_finite()) {
            return Err(Error::BadConfig("cloud has non-finite entries".into()));
        }
        Ok(Self { points, dim, iteration, seed, stream_count })
    }

    /// `n` i.i.d. draws from `law`, point `i` from stream `i`.
    pub fn from_gaussian(law: &GaussianLaw, n: usize, seed: u64) -> Result<Self> {
        let d = law.dim();
        let factor = psd_factor(&law.cov)?;
        let points: Vec<f64> = (0..n)
            .into_par_iter()
            .flat_map_iter(|i| {
                let mut rng = stream_rng(seed, i as u64);
                let z = standard_normal_vector(&mut rng, d);
                let x = &law.mean + &factor * z;
                x.as_slice().to_vec()
            })
            .collect();
        Self::new(points, d, 0, seed, n as u64)
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn point_vector(&self, i: usize) -> DVector<f64> {
        DVector::from_column_slice(self.point(i))
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn mean(&self) -> DVector<f64> {
        let n = self.len();
        DVector::from_fn(self.dim, |j, _| crate::numeric::par_mean(n, |i| self.points[i * self.dim + j]))
    }

    /// Unbiased sample covariance.
    pub fn covariance(&self) -> DMatrix<f64> {
        let n = self.len();
        let m = self.mean();
        let d = self.dim;
        let mut c = DMatrix::zeros(d, d);
        for a in 0..d {
            for b in a..d {
                let s = crate::numeric::par_sum(n, |i| {
                    (self.points[i * d + a] - m[a]) * (self.points[i * d + b] - m[b])
                }) / (n as f64 - 1.0);
                c[(a, b)] = s;
                c[(b, a)] = s;
            }
        }
        c
    }
}

/// Lower factor `L` with `L Lᵀ = cov` for a positive semidefinite `cov`.
fn psd_factor(cov: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if cov.iter().all(|v| *v == 0.0) {
        return Ok(DMatrix::zeros(cov.nrows(), cov.ncols()));
    }
    Ok(SpdMatrix::new(cov.clone())?.cholesky_factor())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Algorithm {
    Ula { eta: f64 },
    Proximal { eta: f64 },
    /// Exact HMC with `T = 1/(c√λ_max(M))`.
    Ehmc { c: f64 },
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Ula { .. } => "ula",
            Self::Proximal { .. } => "proximal",
            Self::Ehmc { .. } => "ehmc",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Init {
    Gaussian { mean: DVector<f64>, cov: DMatrix<f64> },
    Dirac(DVector<f64>),
}

impl Init {
    fn dim(&self) -> usize {
        match self {
            Self::Gaussian { mean, .. } => mean.len(),
            Self::Dirac(p) => p.len(),
        }
    }

    pub fn law(&self) -> GaussianLaw {
        match self {
            Self::Gaussian { mean, cov } => GaussianLaw { mean: mean.clone(), cov: cov.clone() },
            Self::Dirac(p) => GaussianLaw { mean: p.clone(), cov: DMatrix::zeros(p.len(), p.len()) },
        }
    }
}

#[derive(Debug, Clone)]
pub struct ChainConfig {
    pub algorithm: Algorithm,
    pub target: TargetPotential,
    pub n_chains: usize,
    pub n_iters: usize,
    pub init: Init,
}

impl ChainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_chains == 0 {
            return Err(Error::BadConfig("n_chains must be ≥ 1".into()));
        }
        let step = match self.algorithm {
            Algorithm::Ula { eta } | Algorithm::Proximal { eta } => eta,
            Algorithm::Ehmc { c } => c,
        };
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::BadConfig(format!("step parameter must be positive, got {step}")));
        }
        if let Algorithm::Ehmc { c } = self.algorithm {
            if c < 2.0 {
                return Err(Error::BadConfig(format!("exact HMC needs c ≥ 2, got {c}")));
            }
        }
        if self.init.dim() != self.target.dim() {
            return Err(Error::BadConfig(format!(
                "init has dimension {}, target {}",
                self.init.dim(),
                self.target.dim()
            )));
        }
        if let Init::Gaussian { cov, .. } = &self.init {
            psd_factor(cov).map_err(|e| Error::BadConfig(format!("init covariance: {e}")))?;
        }
        Ok(())
    }
}

// built once per run, so variant size does not matter
#[allow(clippy::large_enum_variant)]
enum Stepper {
    Ula(crate::kernels::GaussianKernel),
    Proximal(crate::kernels::GaussianKernel, crate::kernels::ProximalBackward),
    Ehmc(crate::kernels::EhmcKernel),
}

impl Stepper {
    fn new(config: &ChainConfig) -> Result<Self> {
        Ok(match config.algorithm {
            Algorithm::Ula { eta } => Self::Ula(make_ula_kernel(&config.target, eta)?),
            Algorithm::Proximal { eta } => {
                let (f, b) = make_proximal_kernels(&config.target, eta)?;
                if b.sampler() == crate::kernels::BackwardSampler::Unavailable {
                    return Err(Error::SamplerUnavailable);
                }
                Self::Proximal(f, b)
            }
            Algorithm::Ehmc { c } => {
                let m = config
                    .target
                    .as_quadratic()
                    .ok_or_else(|| Error::BadConfig("exact HMC needs a quadratic target".into()))?;
                let t = ehmc_constants(m.matrix(), c)?.integration_time;
                Self::Ehmc(make_ehmc_kernel(m.matrix(), t)?)
            }
        })
    }

    fn step(&self, x: &DVector<f64>, rng: &mut crate::rng::ChainRng) -> Result<DVector<f64>> {
        match self {
            Self::Ula(k) => k.sample(x, rng),
            Self::Proximal(f, b) => {
                let y = f.sample(x, rng)?;
                b.sample(&y, rng)
            }
            Self::Ehmc(k) => Ok(k.sample_flow(x, rng)),
        }
    }
}

/// One cloud per iteration `0..=n_iters`.
pub fn run_chains(config: &ChainConfig, seed: u64) -> Result<Vec<SampleCloud>> {
    let all: Vec<usize> = (0..=config.n_iters).collect();
    run_chains_recorded(config, seed, &all)
}

/// Clouds at the listed iterations only, in the order given.
pub fn run_chains_recorded(config: &ChainConfig, seed: u64, record: &[usize]) -> Result<Vec<SampleCloud>> {
    config.validate()?;
    if let Some(&k) = record.iter().find(|&&k| k > config.n_iters) {
        return Err(Error::BadConfig(format!("iteration {k} exceeds n_iters {}", config.n_iters)));
    }
    let stepper = Stepper::new(config)?;
    let d = config.target.dim();
    let init = config.init.law();
    let init_factor = psd_factor(&init.cov)?;
    let last = record.iter().copied().max().unwrap_or(0);

    let per_chain: Vec<Vec<f64>> = (0..config.n_chains)
        .into_par_iter()
        .map(|chain| {
            let mut rng = stream_rng(seed, chain as u64);
            let mut x = match &config.init {
                Init::Dirac(p) => p.clone(),
                Init::Gaussian { .. } => &init.mean + &init_factor * standard_normal_vector(&mut rng, d),
            };
            let mut kept = vec![0.0; record.len() * d];
            let store = |k: usize, x: &DVector<f64>, kept: &mut Vec<f64>| {
                for (slot, &r) in record.iter().enumerate() {
                    if r == k {
                        kept[slot * d..(slot + 1) * d].copy_from_slice(x.as_slice());
                    }
                }
            };
            store(0, &x, &mut kept);
            for k in 1..=last {
                x = stepper.step(&x, &mut rng)?;
                store(k, &x, &mut kept);
            }
            Ok(kept)
        })
        .collect::<Result<_>>()?;

    record
        .iter()
        .enumerate()
        .map(|(slot, &k)| {
            let mut points = Vec::with_capacity(config.n_chains * d);
            for chain in &per_chain {
                points.extend_from_slice(&chain[slot * d..(slot + 1) * d]);
            }
            SampleCloud::new(points, d, k, seed, config.n_chains as u64)
        })
        .collect()
}

/// `N(mean, cov)`; `cov` may be singular (e.g. a Dirac start).
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianLaw {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl GaussianLaw {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// `(A, Q)` with `x' = A x + N(0, Q)` for a quadratic target `xᵀMx/2`.
pub fn affine_step(algorithm: Algorithm, m: &SpdMatrix) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let d = m.dim();
    Ok(match algorithm {
        Algorithm::Ula { eta } => (
            DMatrix::identity(d, d) - m.matrix() * eta,
            DMatrix::identity(d, d) * (2.0 * eta),
        ),
        Algorithm::Proximal { eta } => {
            let p = m.map_spectrum(|l| 1.0 / (l + 1.0 / eta));
            (&p / eta, &p * &p / eta + &p)
        }
        Algorithm::Ehmc { c } => {
            let t = ehmc_constants(m.matrix(), c)?.integration_time;
            (
                m.map_spectrum(|l| (l.sqrt() * t).cos()),
                m.map_spectrum(|l| t * t * sinc_squared(l.sqrt() * t)),
            )
        }
    })
}

/// Exact law of iterate `k` for a quadratic target.
pub fn analytic_law(config: &ChainConfig, k: usize) -> Result<GaussianLaw> {
    Ok(analytic_laws(config, k)?.pop().expect("k + 1 laws"))
}

/// Exact laws of iterates `0..=k` for a quadratic target.
pub fn analytic_laws(config: &ChainConfig, k: usize) -> Result<Vec<GaussianLaw>> {
    let m = config.target.as_quadratic().ok_or_else(|| Error::Unavailable("analytic laws need a quadratic target".into()))?;
    check_dim(m.dim(), config.init.dim())?;
    let (a, q) = affine_step(config.algorithm, m)?;
    let mut law = config.init.law();
    let mut out = Vec::with_capacity(k + 1);
    out.push(law.clone());
    for _ in 0..k {
        let mean = &a * &law.mean;
        let cov = &a * &law.cov * a.transpose() + &q;
        law = GaussianLaw { mean, cov: symmetrize(cov) };
        out.push(law.clone());
    }
    Ok(out)
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

/// Stationary law of the iterates on a quadratic target, `N(0, (I − A²)⁻¹Q)`;
/// `None` when the step is unstable.
pub fn stationary_law(algorithm: Algorithm, m: &SpdMatrix) -> Result<Option<GaussianLaw>> {
    let t = match algorithm {
        Algorithm::Ehmc { c } => ehmc_constants(m.matrix(), c)?.integration_time,
        _ => 0.0,
    };
    let per_eigen = |l: f64| -> f64 {
        match algorithm {
            Algorithm::Ula { eta } => {
                let a = 1.0 - eta * l;
                2.0 * eta / (1.0 - a * a)
            }
            // (p²/η + p)/(1 − p²/η²) with p = (l + 1/η)⁻¹ reduces to 1/l
            Algorithm::Proximal { .. } => 1.0 / l,
            // T²φ(√l T)/sin²(√l T) = 1/l
            Algorithm::Ehmc { .. } => {
                let z = l.sqrt() * t;
                t * t * sinc_squared(z) / z.sin().powi(2)
            }
        }
    };
    if let Algorithm::Ula { eta } = algorithm {
        if m.eigenvalues().iter().any(|&l| (1.0 - eta * l).abs() >= 1.0) {
            return Ok(None);
        }
    }
    let d = m.dim();
    Ok(Some(GaussianLaw { mean: DVector::zeros(d), cov: m.map_spectrum(per_eigen) }))
}

/// Law of `y = x + √η z` for `x ~ law`.
pub fn proximal_forward_law(law: &GaussianLaw, eta: f64) -> GaussianLaw {
    let d = law.dim();
    GaussianLaw { mean: law.mean.clone(), cov: &law.cov + DMatrix::identity(d, d) * eta }
}

/// Iterations after which a transient decaying like `contractionᵏ` is below 1e-6.
pub fn stationary_iteration(contraction: f64) -> usize {
    if contraction <= 0.0 {
        return 1;
    }
    if contraction >= 1.0 {
        return usize::MAX;
    }
    ((1e-6f64).ln() / contraction.ln()).ceil().max(1.0) as usize
}

/// CSV with header `iter,chain,dim0..`, one row per point, 17 significant digits.
pub fn write_clouds_csv<W: Write>(clouds: &[SampleCloud], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let d = clouds.first().map_or(0, |c| c.dim());
    let mut header = vec!["iter".to_string(), "chain".to_string()];
    header.extend((0..d).map(|j| format!("dim{j}")));
    w.write_record(&header)?;
    for cloud in clouds {
        check_dim(d, cloud.dim())?;
        for i in 0..cloud.len() {
            let mut row = vec![cloud.iteration.to_string(), i.to_string()];
            row.extend(cloud.point(i).iter().map(|v| format!("{v:.16e}")));
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}
