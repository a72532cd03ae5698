//! Empirical certificates for Poincaré and log-Sobolev constants.
//!
//! Each test function `f` contributes the ratio `var[f] / E‖∇f‖²` (PI) or
//! `ent[f²] / (2E‖∇f‖²)` (LSI) over a sample cloud. A predicted constant `γ`
//! is "not violated on the family" when every ratio stays below
//! `γ(1 + 5·se/ratio)`, with standard errors from batch means over chains.

use std::fmt;
use std::io::Write;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::constants::Inequality;
use crate::error::{check_dim, Error, Result};
use crate::linalg::leading_eigenvectors;
use crate::numeric::{sum, NeumaierSum};
use crate::samplers::{GaussianLaw, SampleCloud};

/// Minimum cloud size accepted by the certificates.
pub const MIN_CLOUD: usize = 1000;

/// Number of contiguous chain batches used for standard errors.
pub const N_BATCHES: usize = 20;

/// Standard errors of slack in the pass rule.
pub const SLACK_SIGMAS: f64 = 5.0;

/// Below this `E‖∇f‖²` the function counts as constant and is skipped.
pub const DEGENERATE_DENOMINATOR: f64 = 1e-12;

/// Smallest admissible `f²` in the entropy estimator.
pub const SQUARE_FLOOR: f64 = 1e-300;

/// Exponents of the exp-linear functions in the standard family.
pub const EXP_LINEAR_LAMBDAS: [f64; 4] = [0.1, -0.1, 0.25, -0.25];

type ValueFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type GradFn = Arc<dyn Fn(&[f64]) -> DVector<f64> + Send + Sync>;

#[derive(Clone)]
pub enum TestFamily {
    /// `⟨u, x⟩`.
    Linear { u: DVector<f64> },
    /// `xᵀAx + bᵀx + shift`.
    Quadratic { a: DMatrix<f64>, b: DVector<f64>, shift: f64 },
    /// `exp(λ⟨u, x⟩/2)`, so that `f² = e^{λ⟨u, x⟩}`.
    ExpLinear { lambda: f64, u: DVector<f64> },
    Custom { value: ValueFn, gradient: GradFn },
}

impl fmt::Debug for TestFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Linear { u } => f.debug_struct("Linear").field("u", u).finish(),
            Self::Quadratic { a, b, shift } => {
                f.debug_struct("Quadratic").field("a", a).field("b", b).field("shift", shift).finish()
            }
            Self::ExpLinear { lambda, u } => f.debug_struct("ExpLinear").field("lambda", lambda).field("u", u).finish(),
            Self::Custom { .. } => f.write_str("Custom"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TestFunction {
    pub id: String,
    pub family: TestFamily,
}

fn dot(u: &DVector<f64>, x: &[f64]) -> f64 {
    u.iter().zip(x).map(|(a, b)| a * b).sum()
}

impl TestFunction {
    pub fn linear(id: impl Into<String>, u: DVector<f64>) -> Self {
        Self { id: id.into(), family: TestFamily::Linear { u } }
    }

    pub fn quadratic(id: impl Into<String>, a: DMatrix<f64>, b: DVector<f64>, shift: f64) -> Self {
        Self { id: id.into(), family: TestFamily::Quadratic { a, b, shift } }
    }

    pub fn exp_linear(id: impl Into<String>, lambda: f64, u: DVector<f64>) -> Self {
        Self { id: id.into(), family: TestFamily::ExpLinear { lambda, u } }
    }

    pub fn custom<V, G>(id: impl Into<String>, value: V, gradient: G) -> Self
    where
        V: Fn(&[f64]) -> f64 + Send + Sync + 'static,
        G: Fn(&[f64]) -> DVector<f64> + Send + Sync + 'static,
    {
        Self { id: id.into(), family: TestFamily::Custom { value: Arc::new(value), gradient: Arc::new(gradient) } }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match &self.family {
            TestFamily::Linear { u } => dot(u, x),
            TestFamily::Quadratic { a, b, shift } => {
                let xv = DVector::from_column_slice(x);
                xv.dot(&(a * &xv)) + dot(b, x) + shift
            }
            TestFamily::ExpLinear { lambda, u } => (0.5 * lambda * dot(u, x)).exp(),
            TestFamily::Custom { value, .. } => value(x),
        }
    }

    pub fn gradient(&self, x: &[f64]) -> DVector<f64> {
        match &self.family {
            TestFamily::Linear { u } => u.clone(),
            TestFamily::Quadratic { a, b, .. } => {
                let xv = DVector::from_column_slice(x);
                (a + a.transpose()) * xv + b
            }
            TestFamily::ExpLinear { lambda, u } => u * (0.5 * lambda * self.value(x)),
            TestFamily::Custom { gradient, .. } => gradient(x),
        }
    }

    /// `E f(X)` for `X ~ law`, when the family has a closed form.
    pub fn gaussian_expectation(&self, law: &GaussianLaw) -> Option<f64> {
        let m = &law.mean;
        let s = &law.cov;
        match &self.family {
            TestFamily::Linear { u } => Some(u.dot(m)),
            TestFamily::Quadratic { a, b, shift } => Some((a * s).trace() + m.dot(&(a * m)) + b.dot(m) + shift),
            TestFamily::ExpLinear { lambda, u } => {
                let h = 0.5 * lambda;
                Some((h * u.dot(m) + 0.5 * h * h * u.dot(&(s * u))).exp())
            }
            TestFamily::Custom { .. } => None,
        }
    }
}

/// Linear coordinate functions, `x_i x_j + 1` for `i ≤ j`, and
/// `exp(λ⟨v, x⟩/2)` for each leading direction `v` and `λ ∈ {±0.1, ±0.25}`.
pub fn standard_family(dim: usize, leading: &[DVector<f64>]) -> Vec<TestFunction> {
    let mut out = Vec::new();
    for i in 0..dim {
        out.push(TestFunction::linear(format!("lin{i}"), unit(dim, i)));
    }
    for i in 0..dim {
        for j in i..dim {
            let mut a = DMatrix::zeros(dim, dim);
            a[(i, j)] += 0.5;
            a[(j, i)] += 0.5;
            out.push(TestFunction::quadratic(format!("quad{i}_{j}"), a, DVector::zeros(dim), 1.0));
        }
    }
    for (k, v) in leading.iter().enumerate() {
        for lambda in EXP_LINEAR_LAMBDAS {
            out.push(TestFunction::exp_linear(format!("exp{k}_{lambda:+}"), lambda, v.clone()));
        }
    }
    out
}

/// [`standard_family`] with leading directions from `cov`.
pub fn standard_family_for_covariance(cov: &DMatrix<f64>) -> Vec<TestFunction> {
    let d = cov.nrows();
    standard_family(d, &leading_eigenvectors(cov, d.min(2)))
}

fn unit(dim: usize, i: usize) -> DVector<f64> {
    DVector::from_fn(dim, |k, _| if k == i { 1.0 } else { 0.0 })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FunctionRatio {
    pub id: String,
    pub numerator: f64,
    pub denominator: f64,
    pub ratio: f64,
    pub std_err: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatioCertificate {
    pub inequality: Inequality,
    pub predicted: f64,
    pub observed_sup_ratio: f64,
    pub per_function: Vec<FunctionRatio>,
    /// Ids of functions with a degenerate denominator.
    pub skipped: Vec<String>,
    pub pass: bool,
}

impl RatioCertificate {
    /// CSV `fn_id,numerator,denominator,ratio,std_err,pass`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["fn_id", "numerator", "denominator", "ratio", "std_err", "pass"])?;
        for r in &self.per_function {
            w.write_record([
                r.id.clone(),
                format!("{:.16e}", r.numerator),
                format!("{:.16e}", r.denominator),
                format!("{:.16e}", r.ratio),
                format!("{:.16e}", r.std_err),
                r.pass.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `var[f] ≤ γ·E‖∇f‖²` over the cloud, for each test function.
pub fn certify_pi(cloud: &SampleCloud, fns: &[TestFunction], gamma: f64) -> Result<RatioCertificate> {
    certify(cloud, fns, gamma, Inequality::Pi)
}

/// `ent[f²] ≤ 2γ·E‖∇f‖²` over the cloud, for each test function.
pub fn certify_lsi(cloud: &SampleCloud, fns: &[TestFunction], gamma: f64) -> Result<RatioCertificate> {
    certify(cloud, fns, gamma, Inequality::Lsi)
}

fn certify(cloud: &SampleCloud, fns: &[TestFunction], gamma: f64, inequality: Inequality) -> Result<RatioCertificate> {
    if cloud.len() < MIN_CLOUD {
        return Err(Error::InvalidParameter(format!(
            "certificates need at least {MIN_CLOUD} points, got {}",
            cloud.len()
        )));
    }
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidParameter(format!("gamma must be ≥ 0, got {gamma}")));
    }
    let n = cloud.len();
    let mut per_function = Vec::new();
    let mut skipped = Vec::new();
    for f in fns {
        let evals: Vec<(f64, f64)> = (0..n)
            .into_par_iter()
            .map(|i| {
                let x = cloud.point(i);
                check_dim(cloud.dim(), x.len())?;
                let v = f.value(x);
                let g = f.gradient(x).norm_squared();
                Ok((v, g))
            })
            .collect::<Result<_>>()?;
        let (values, grads): (Vec<f64>, Vec<f64>) = evals.into_iter().unzip();
        let squares: Option<Vec<f64>> = match inequality {
            Inequality::Pi => None,
            Inequality::Lsi => {
                let sq: Vec<f64> = values.iter().map(|v| v * v).collect();
                if let Some(bad) = sq.iter().find(|s| !(**s >= SQUARE_FLOOR && s.is_finite())) {
                    return Err(Error::Domain { what: "f² in the entropy estimator", value: *bad });
                }
                Some(sq)
            }
        };
        let stats = |lo: usize, hi: usize| -> (f64, f64) {
            let num = match &squares {
                None => variance(&values[lo..hi]),
                Some(sq) => entropy(&sq[lo..hi]),
            };
            let mean_grad = sum(grads[lo..hi].iter().copied()) / (hi - lo) as f64;
            let den = match inequality {
                Inequality::Pi => mean_grad,
                Inequality::Lsi => 2.0 * mean_grad,
            };
            (num, den)
        };
        let (numerator, denominator) = stats(0, n);
        if denominator < DEGENERATE_DENOMINATOR {
            skipped.push(f.id.clone());
            continue;
        }
        let ratio = numerator / denominator;
        let batch_ratios: Vec<f64> = (0..N_BATCHES)
            .map(|b| {
                let (lo, hi) = (b * n / N_BATCHES, (b + 1) * n / N_BATCHES);
                let (num, den) = stats(lo, hi);
                num / den
            })
            .collect();
        let std_err = batch_std_err(&batch_ratios);
        let pass = ratio <= gamma + SLACK_SIGMAS * std_err.max(0.0) * if ratio > 0.0 { gamma / ratio } else { 1.0 };
        per_function.push(FunctionRatio { id: f.id.clone(), numerator, denominator, ratio, std_err, pass });
    }
    if per_function.is_empty() && !skipped.is_empty() {
        return Err(Error::DegenerateDenominator(skipped.join(",")));
    }
    let observed_sup_ratio = per_function.iter().map(|r| r.ratio).fold(0.0, f64::max);
    let pass = per_function.iter().all(|r| r.pass);
    Ok(RatioCertificate { inequality, predicted: gamma, observed_sup_ratio, per_function, skipped, pass })
}

fn batch_std_err(batches: &[f64]) -> f64 {
    let k = batches.len() as f64;
    if batches.iter().any(|b| !b.is_finite()) {
        return f64::INFINITY;
    }
    let m = sum(batches.iter().copied()) / k;
    let ss = sum(batches.iter().map(|b| (b - m) * (b - m)));
    (ss / (k - 1.0) / k).sqrt()
}

/// Unbiased variance, shifted by the first value so a constant input gives 0 exactly.
fn variance(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let c = values[0];
    let m = sum(values.iter().map(|v| v - c)) / n as f64;
    let ss: NeumaierSum = values.iter().map(|v| (v - c - m) * (v - c - m)).collect();
    ss.value() / (n - 1) as f64
}

/// `mean(F log F) − mean(F) log mean(F)` for `F > 0`, computed as
/// `F_0 · ent(F/F_0)` in Bregman form so every term is nonnegative and a
/// constant input gives 0 exactly.
fn entropy(squares: &[f64]) -> f64 {
    let n = squares.len() as f64;
    let scale = squares[0];
    let h: Vec<f64> = squares.iter().map(|s| s / scale).collect();
    let m = sum(h.iter().copied()) / n;
    let lm = m.ln();
    let terms = sum(h.iter().map(|&t| (t * (t.ln() - lm) - t + m).max(0.0)));
    scale * terms / n
}

/// `|f̄_N − E_{π*}f| ≤ |f̄_N − E_{ρ_k}f| + |E_{ρ_k}f − E_{π*}f|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorSplit {
    pub total: f64,
    pub mc_term: f64,
    pub bias_term: f64,
}

/// Splits the estimation error of `f` against the algorithm's exact law at
/// the cloud's iteration.
pub fn estimation_error_split(
    cloud: &SampleCloud,
    f: &TestFunction,
    algorithm_law: Option<&GaussianLaw>,
    exact_target_mean: f64,
) -> Result<ErrorSplit> {
    let law = algorithm_law.ok_or_else(|| Error::Unavailable("no analytic law for this cloud".into()))?;
    check_dim(law.dim(), cloud.dim())?;
    let algorithm_mean = f.gaussian_expectation(law).ok_or_else(|| Error::Unavailable(format!("no closed-form expectation for {}", f.id)))?;
    let n = cloud.len();
    let average = crate::numeric::par_mean(n, |i| f.value(cloud.point(i)));
    Ok(ErrorSplit {
        total: (average - exact_target_mean).abs(),
        mc_term: (average - algorithm_mean).abs(),
        bias_term: (algorithm_mean - exact_target_mean).abs(),
    })
}
