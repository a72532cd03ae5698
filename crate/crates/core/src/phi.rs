//! Convex generators Φ, Φ-entropies over finite distributions, and the
//! decomposition and duality identities built on them.
//!
//! For a probability vector `π` and a function `f` into the domain `𝒮` of Φ,
//!
//! ```text
//! J^Φ_π[f] = E_π[Φ(f)] − Φ(E_π[f])
//! ```
//!
//! which is the variance for `Φ(t) = t²` and the entropy for `Φ(t) = t log t`.
//! The power family `Φ_p(t) = (t^p − 1)/(p − 1)`, `p ∈ (1, 2]`, interpolates
//! between the two.

use crate::error::{Error, Result};
use crate::numeric::NeumaierSum;

/// Arguments of `t log t` below this are rejected rather than clamped.
pub const XLOGX_FLOOR: f64 = 1e-300;

/// Probability weights must sum to one within this tolerance.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PhiKind {
    /// `Φ(t) = t²` on ℝ.
    Square,
    /// `Φ(t) = t log t` on (0, ∞).
    XLogX,
    /// `Φ_p(t) = (t^p − 1)/(p − 1)` on (0, ∞).
    Power(f64),
}

/// `Φ(t)`, `Φ′(t)` and `Φ″(t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhiValue {
    pub value: f64,
    pub first: f64,
    pub second: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhiFunction {
    kind: PhiKind,
}

impl PhiFunction {
    pub fn square() -> Self {
        Self { kind: PhiKind::Square }
    }

    pub fn xlogx() -> Self {
        Self { kind: PhiKind::XLogX }
    }

    /// Power generator; `p` must lie in (1, 2]. `p = 1` is the `xlogx` limit.
    pub fn power(p: f64) -> Result<Self> {
        if p > 1.0 && p <= 2.0 {
            Ok(Self { kind: PhiKind::Power(p) })
        } else {
            Err(Error::InvalidParameter(format!(
                "power exponent must lie in (1, 2], got {p}"
            )))
        }
    }

    pub fn kind(&self) -> PhiKind {
        self.kind
    }

    /// Whether `t` lies in the domain 𝒮.
    pub fn contains(&self, t: f64) -> bool {
        match self.kind {
            PhiKind::Square => t.is_finite(),
            PhiKind::XLogX => t.is_finite() && t >= XLOGX_FLOOR,
            PhiKind::Power(_) => t.is_finite() && t > 0.0,
        }
    }

    fn check(&self, t: f64) -> Result<()> {
        if self.contains(t) {
            Ok(())
        } else {
            Err(Error::Domain { what: self.name(), value: t })
        }
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            PhiKind::Square => "square",
            PhiKind::XLogX => "xlogx",
            PhiKind::Power(_) => "power",
        }
    }

    pub fn eval(&self, t: f64) -> Result<PhiValue> {
        self.check(t)?;
        Ok(match self.kind {
            PhiKind::Square => PhiValue { value: t * t, first: 2.0 * t, second: 2.0 },
            PhiKind::XLogX => {
                let l = t.ln();
                PhiValue { value: t * l, first: 1.0 + l, second: 1.0 / t }
            }
            PhiKind::Power(p) => PhiValue {
                value: (t.powf(p) - 1.0) / (p - 1.0),
                first: p * t.powf(p - 1.0) / (p - 1.0),
                second: p * t.powf(p - 2.0),
            },
        })
    }

    pub fn value(&self, t: f64) -> Result<f64> {
        self.eval(t).map(|v| v.value)
    }

    pub fn derivative(&self, t: f64) -> Result<f64> {
        self.eval(t).map(|v| v.first)
    }

    /// Convex conjugate `Φ*(s) = sup_t { s t − Φ(t) }`.
    ///
    /// Only the Legendre-type generators are exposed: the power family's
    /// derivative stays bounded as `t → 0`, so its conjugate does not invert Φ′.
    pub fn conjugate(&self, s: f64) -> Result<f64> {
        match self.kind {
            PhiKind::Square if s.is_finite() => Ok(0.25 * s * s),
            PhiKind::XLogX if s.is_finite() => Ok((s - 1.0).exp()),
            PhiKind::Power(_) => Err(Error::Unsupported("convex conjugate of the power generator")),
            _ => Err(Error::Domain { what: "conjugate", value: s }),
        }
    }

    /// `(Φ*)′(s)`, the inverse of Φ′.
    pub fn conjugate_derivative(&self, s: f64) -> Result<f64> {
        match self.kind {
            PhiKind::Square if s.is_finite() => Ok(0.5 * s),
            PhiKind::XLogX if s.is_finite() => Ok((s - 1.0).exp()),
            PhiKind::Power(_) => Err(Error::Unsupported("convex conjugate of the power generator")),
            _ => Err(Error::Domain { what: "conjugate", value: s }),
        }
    }

    /// Bregman divergence `Φ(t) − Φ(m) − Φ′(m)(t − m)`, nonnegative by convexity.
    fn bregman(&self, t: f64, m: f64) -> f64 {
        let d = match self.kind {
            PhiKind::Square => (t - m) * (t - m),
            PhiKind::XLogX => {
                let r = t / m;
                m * (r * (r - 1.0).ln_1p() - (r - 1.0))
            }
            PhiKind::Power(p) => {
                (t.powf(p) - m.powf(p) - p * m.powf(p - 1.0) * (t - m)) / (p - 1.0)
            }
        };
        d.max(0.0)
    }
}

/// A probability vector over a finite list of atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteDistribution<T> {
    atoms: Vec<T>,
    weights: Vec<f64>,
}

impl<T> FiniteDistribution<T> {
    pub fn new(atoms: Vec<T>, weights: Vec<f64>) -> Result<Self> {
        if atoms.is_empty() || atoms.len() != weights.len() {
            return Err(Error::InvalidDistribution(format!(
                "{} atoms with {} weights",
                atoms.len(),
                weights.len()
            )));
        }
        validate_weights(&weights)?;
        Ok(Self { atoms, weights })
    }

    pub fn uniform(atoms: Vec<T>) -> Result<Self> {
        let n = atoms.len();
        Self::new(atoms, vec![1.0 / n.max(1) as f64; n])
    }

    pub fn point_mass(atom: T) -> Self {
        Self { atoms: vec![atom], weights: vec![1.0] }
    }

    pub fn atoms(&self) -> &[T] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&T, f64)> {
        self.atoms.iter().zip(self.weights.iter().copied())
    }

    /// Compensated `E_π[f]`.
    pub fn expectation<F: Fn(&T) -> f64>(&self, f: F) -> f64 {
        self.iter().map(|(a, w)| w * f(a)).collect::<NeumaierSum>().value()
    }
}

fn validate_weights(weights: &[f64]) -> Result<()> {
    if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
        return Err(Error::InvalidDistribution(format!("weight {w} is negative or non-finite")));
    }
    let total = crate::numeric::sum(weights.iter().copied());
    if (total - 1.0).abs() > WEIGHT_SUM_TOL {
        return Err(Error::InvalidDistribution(format!("weights sum to {total}")));
    }
    Ok(())
}

/// `J^Φ_π[f] = E_π[Φ(f)] − Φ(E_π[f])` on precomputed values `f(atom_i)`.
pub fn phi_entropy_of_values(phi: &PhiFunction, weights: &[f64], values: &[f64]) -> Result<f64> {
    if weights.len() != values.len() {
        return Err(Error::Dimension { expected: weights.len(), got: values.len() });
    }
    for &v in values {
        phi.check(v)?;
    }
    let mean = weights
        .iter()
        .zip(values)
        .map(|(w, v)| w * v)
        .collect::<NeumaierSum>()
        .value();
    phi.check(mean)?;
    Ok(weights
        .iter()
        .zip(values)
        .map(|(w, &v)| w * phi.bregman(v, mean))
        .collect::<NeumaierSum>()
        .value())
}

/// `J^Φ_π[f]`.
pub fn phi_entropy<T, F>(phi: &PhiFunction, dist: &FiniteDistribution<T>, f: F) -> Result<f64>
where
    F: Fn(&T) -> f64,
{
    let values: Vec<f64> = dist.atoms.iter().map(f).collect();
    phi_entropy_of_values(phi, &dist.weights, &values)
}

/// A finite mixing law `ρ` over labels `0..n_y` and components `P_y` sharing
/// the ground set `0..n_x`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMixtureModel {
    mixing: Vec<f64>,
    components: Vec<Vec<f64>>,
}

impl DiscreteMixtureModel {
    pub fn new(mixing: Vec<f64>, components: Vec<Vec<f64>>) -> Result<Self> {
        if mixing.is_empty() || mixing.len() != components.len() {
            return Err(Error::InvalidDistribution(format!(
                "{} mixing weights for {} components",
                mixing.len(),
                components.len()
            )));
        }
        validate_weights(&mixing)?;
        let n_x = components[0].len();
        if n_x == 0 {
            return Err(Error::InvalidDistribution("empty ground set".into()));
        }
        for c in &components {
            if c.len() != n_x {
                return Err(Error::InvalidDistribution(
                    "components do not share a ground set".into(),
                ));
            }
            validate_weights(c)?;
        }
        Ok(Self { mixing, components })
    }

    pub fn n_x(&self) -> usize {
        self.components[0].len()
    }

    pub fn n_y(&self) -> usize {
        self.mixing.len()
    }

    pub fn mixing(&self) -> &[f64] {
        &self.mixing
    }

    pub fn component(&self, y: usize) -> &[f64] {
        &self.components[y]
    }

    /// Joint law `ν(x, y) = ρ(y) P_y(x)` over `(x, y)` pairs.
    pub fn joint(&self) -> FiniteDistribution<(usize, usize)> {
        let mut atoms = Vec::with_capacity(self.n_x() * self.n_y());
        let mut weights = Vec::with_capacity(atoms.capacity());
        for (y, &r) in self.mixing.iter().enumerate() {
            for (x, &p) in self.components[y].iter().enumerate() {
                atoms.push((x, y));
                weights.push(r * p);
            }
        }
        FiniteDistribution { atoms, weights }
    }

    /// Mixture law `μ(x) = Σ_y ρ(y) P_y(x)`.
    pub fn mixture(&self) -> FiniteDistribution<usize> {
        let weights = (0..self.n_x())
            .map(|x| {
                self.mixing
                    .iter()
                    .zip(&self.components)
                    .map(|(r, c)| r * c[x])
                    .collect::<NeumaierSum>()
                    .value()
            })
            .collect();
        FiniteDistribution { atoms: (0..self.n_x()).collect(), weights }
    }
}

/// Components of the Φ-entropy decomposition under a mixture model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyDecomposition {
    /// `J^Φ_ν[f]` under the joint law.
    pub total: f64,
    /// `E_ρ[J^Φ_{P_y}[f(·, y)]]`.
    pub within_expected: f64,
    /// `J^Φ_ρ[y ↦ E_{P_y}[f(·, y)]]`.
    pub between: f64,
}

impl EntropyDecomposition {
    /// `|total − within − between|`.
    pub fn residual(&self) -> f64 {
        (self.total - self.within_expected - self.between).abs()
    }
}

/// Splits `J^Φ_ν[f]` into the expected within-component entropy and the
/// entropy of the component means. `total` is computed independently on the
/// joint law, so `residual()` measures the identity's numerical error.
pub fn entropy_decomposition<F>(
    phi: &PhiFunction,
    model: &DiscreteMixtureModel,
    f: F,
) -> Result<EntropyDecomposition>
where
    F: Fn(usize, usize) -> f64,
{
    let joint = model.joint();
    let total = phi_entropy(phi, &joint, |&(x, y)| f(x, y))?;

    let mut within = NeumaierSum::new();
    let mut means = Vec::with_capacity(model.n_y());
    for (y, &r) in model.mixing.iter().enumerate() {
        let comp = &model.components[y];
        let values: Vec<f64> = (0..model.n_x()).map(|x| f(x, y)).collect();
        let j = phi_entropy_of_values(phi, comp, &values)?;
        within.add(r * j);
        means.push(
            comp.iter()
                .zip(&values)
                .map(|(p, v)| p * v)
                .collect::<NeumaierSum>()
                .value(),
        );
    }
    let between = phi_entropy_of_values(phi, &model.mixing, &means)?;
    Ok(EntropyDecomposition { total, within_expected: within.value(), between })
}

/// The same split for a function of `x` alone; `total` is then computed on the
/// mixture law `μ`.
pub fn mixture_entropy_decomposition<F>(
    phi: &PhiFunction,
    model: &DiscreteMixtureModel,
    f: F,
) -> Result<EntropyDecomposition>
where
    F: Fn(usize) -> f64,
{
    let mut d = entropy_decomposition(phi, model, |x, _| f(x))?;
    d.total = phi_entropy(phi, &model.mixture(), |&x| f(x))?;
    Ok(d)
}

/// Slack in the variational inequality
///
/// ```text
/// E_π[(Φ′(f) − E_π[Φ′(f)]) g] ≤ J^Φ_π[g] + E_π[g](Φ′(E_π f) − E_π[Φ′(f)]) + J^{Φ*(Φ′)}_π[f]
/// ```
///
/// returned as right-hand side minus left-hand side.
pub fn duality_gap<T, F, G>(phi: &PhiFunction, dist: &FiniteDistribution<T>, f: F, g: G) -> Result<f64>
where
    F: Fn(&T) -> f64,
    G: Fn(&T) -> f64,
{
    if let PhiKind::Power(_) = phi.kind {
        return Err(Error::Unsupported("duality gap for the power generator"));
    }
    let fv: Vec<f64> = dist.atoms.iter().map(f).collect();
    let gv: Vec<f64> = dist.atoms.iter().map(g).collect();
    let w = &dist.weights;
    let mean = |vals: &[f64]| -> f64 {
        w.iter().zip(vals).map(|(a, b)| a * b).collect::<NeumaierSum>().value()
    };

    let dphi_f = fv.iter().map(|&t| phi.derivative(t)).collect::<Result<Vec<_>>>()?;
    let mean_f = mean(&fv);
    let mean_g = mean(&gv);
    let mean_dphi = mean(&dphi_f);

    let centered: Vec<f64> = dphi_f.iter().zip(&gv).map(|(d, g)| (d - mean_dphi) * g).collect();
    let lhs = mean(&centered);

    let ent_g = phi_entropy_of_values(phi, w, &gv)?;
    let cross = mean_g * (phi.derivative(mean_f)? - mean_dphi);
    let conj_f = dphi_f.iter().map(|&s| phi.conjugate(s)).collect::<Result<Vec<_>>>()?;
    let conj_term = mean(&conj_f) - phi.conjugate(phi.derivative(mean_f)?)?;

    Ok(ent_g + cross + conj_term - lhs)
}

/// Worst cases of the decomposition, duality and conjugate identities over
/// randomized inputs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentitySuiteReport {
    pub trials: usize,
    /// Largest `residual / max(1, |total|)` for `Φ(t) = t²`.
    pub decomposition_square: f64,
    /// Largest `residual / max(1, |total|)` for `Φ(t) = t log t`.
    pub decomposition_xlogx: f64,
    /// Smallest duality gap over both generators.
    pub duality_min_gap: f64,
    /// Largest `|Φ(t) + Φ*(Φ′(t)) − tΦ′(t)| / max(1, |tΦ′(t)|)` on a log grid.
    pub conjugate: f64,
}

/// Tolerance for the decomposition and conjugate identities.
pub const IDENTITY_TOL: f64 = 1e-12;

/// Lower tolerance for the duality gap.
pub const DUALITY_TOL: f64 = -1e-10;

impl IdentitySuiteReport {
    pub fn decomposition_pass(&self) -> bool {
        self.decomposition_square <= IDENTITY_TOL && self.decomposition_xlogx <= IDENTITY_TOL
    }

    pub fn duality_pass(&self) -> bool {
        self.duality_min_gap >= DUALITY_TOL
    }

    pub fn conjugate_pass(&self) -> bool {
        self.conjugate <= IDENTITY_TOL
    }

    pub fn pass(&self) -> bool {
        self.decomposition_pass() && self.duality_pass() && self.conjugate_pass()
    }
}

fn random_weights(rng: &mut crate::rng::ChainRng, n: usize) -> Vec<f64> {
    use rand::Rng;
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..1.0)).collect();
    let total = crate::numeric::sum(raw.iter().copied());
    raw.into_iter().map(|w| w / total).collect()
}

/// Runs `trials` random mixtures (up to 8 × 8 atoms) and `trials` random
/// 5-atom duality instances, half of them at or near equality, trial `i` on
/// stream `i` of `seed`.
pub fn run_identity_suite(seed: u64, trials: usize) -> Result<IdentitySuiteReport> {
    use rand::Rng;
    use rayon::prelude::*;

    let per_trial: Vec<(f64, f64, f64)> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = crate::rng::stream_rng(seed, i as u64);
            let nx = rng.random_range(1..=8usize);
            let ny = rng.random_range(1..=8usize);
            let mixing = random_weights(&mut rng, ny);
            let components = (0..ny).map(|_| random_weights(&mut rng, nx)).collect();
            let model = DiscreteMixtureModel::new(mixing, components)?;
            let values: Vec<f64> = (0..nx * ny).map(|_| rng.random_range(0.05..10.0)).collect();
            let f = |x: usize, y: usize| values[y * nx + x];
            let rel = |d: EntropyDecomposition| d.residual() / d.total.abs().max(1.0);
            let sq = rel(entropy_decomposition(&PhiFunction::square(), &model, f)?);
            let xl = rel(entropy_decomposition(&PhiFunction::xlogx(), &model, f)?);

            let dist = FiniteDistribution::new((0..5).collect::<Vec<usize>>(), random_weights(&mut rng, 5))?;
            let fv: Vec<f64> = (0..5).map(|_| rng.random_range(0.05..10.0)).collect();
            // g = f is the equality case; a quarter of the trials sit on it, a quarter next to it
            let gv: Vec<f64> = match (i / 2) % 4 {
                0 => fv.clone(),
                1 => fv.iter().map(|f| f * (1.0 + rng.random_range(-1e-3..1e-3))).collect(),
                _ => (0..5).map(|_| rng.random_range(0.05..10.0)).collect(),
            };
            let phi = if i % 2 == 0 { PhiFunction::square() } else { PhiFunction::xlogx() };
            let gap = duality_gap(&phi, &dist, |&k| fv[k], |&k| gv[k])?;
            Ok((sq, xl, gap))
        })
        .collect::<Result<_>>()?;

    let mut conjugate: f64 = 0.0;
    for phi in [PhiFunction::square(), PhiFunction::xlogx()] {
        for k in -60..=60 {
            let t = 10f64.powf(f64::from(k) / 10.0);
            let d = phi.derivative(t)?;
            let rhs = t * d;
            let r = (phi.value(t)? + phi.conjugate(d)? - rhs).abs() / rhs.abs().max(1.0);
            conjugate = conjugate.max(r);
        }
    }

    Ok(IdentitySuiteReport {
        trials,
        decomposition_square: per_trial.iter().map(|t| t.0).fold(0.0, f64::max),
        decomposition_xlogx: per_trial.iter().map(|t| t.1).fold(0.0, f64::max),
        duality_min_gap: per_trial.iter().map(|t| t.2).fold(f64::INFINITY, f64::min),
        conjugate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_evaluations() {
        let v = PhiFunction::square().eval(3.0).unwrap();
        assert_eq!((v.value, v.first, v.second), (9.0, 6.0, 2.0));
        let v = PhiFunction::xlogx().eval(1.0).unwrap();
        assert_eq!((v.value, v.first, v.second), (0.0, 1.0, 1.0));
        let p2 = PhiFunction::power(2.0).unwrap();
        for t in [0.3, 1.0, 2.5] {
            let v = p2.eval(t).unwrap();
            assert!((v.value - (t * t - 1.0)).abs() < 1e-14);
            assert!((v.first - 2.0 * t).abs() < 1e-14);
            assert!((v.second - 2.0).abs() < 1e-14);
        }
    }

    #[test]
    fn domain_errors() {
        assert!(matches!(PhiFunction::xlogx().eval(0.0), Err(Error::Domain { .. })));
        assert!(matches!(PhiFunction::xlogx().eval(1e-301), Err(Error::Domain { .. })));
        assert!(PhiFunction::xlogx().eval(1e-299).is_ok());
        assert!(PhiFunction::power(1.5).unwrap().eval(-1.0).is_err());
        assert!(PhiFunction::square().eval(f64::NAN).is_err());
        assert!(PhiFunction::power(1.0).is_err());
        assert!(PhiFunction::power(2.5).is_err());
    }

    #[test]
    fn conjugate_examples() {
        let sq = PhiFunction::square();
        assert_eq!(sq.conjugate(6.0).unwrap(), 9.0);
        assert_eq!(sq.value(3.0).unwrap() + sq.conjugate(6.0).unwrap(), 18.0);
        let xl = PhiFunction::xlogx();
        assert_eq!(xl.conjugate(1.0).unwrap(), 1.0);
        assert!(matches!(
            PhiFunction::power(1.5).unwrap().conjugate(1.0),
            Err(Error::Unsupported(_))
        ));
        assert_eq!(xl.conjugate_derivative(xl.derivative(2.0).unwrap()).unwrap(), 2.0);
    }

    #[test]
    fn entropy_examples() {
        let sq = PhiFunction::square();
        let d = FiniteDistribution::uniform(vec![1.0, 3.0]).unwrap();
        assert_eq!(phi_entropy(&sq, &d, |&x| x).unwrap(), 1.0);

        let pm = FiniteDistribution::point_mass(4.2);
        assert_eq!(phi_entropy(&PhiFunction::xlogx(), &pm, |&x| x).unwrap(), 0.0);

        let d = FiniteDistribution::new(vec![1.0, 3.0], vec![0.75, 0.25]).unwrap();
        // 0.75·1 + 0.25·9 − 1.5² = 0.75
        assert!((phi_entropy(&sq, &d, |&x| x).unwrap() - 0.75).abs() < 1e-15);

        let bad = FiniteDistribution::uniform(vec![-1.0, 2.0]).unwrap();
        assert!(matches!(
            phi_entropy(&PhiFunction::xlogx(), &bad, |&x| x),
            Err(Error::Domain { .. })
        ));
    }

    #[test]
    fn distribution_validation() {
        assert!(FiniteDistribution::new(vec![0, 1], vec![0.5, 0.4]).is_err());
        assert!(FiniteDistribution::new(vec![0, 1], vec![1.5, -0.5]).is_err());
        assert!(FiniteDistribution::new(vec![0], vec![0.5, 0.5]).is_err());
        assert!(DiscreteMixtureModel::new(vec![1.0], vec![vec![0.5, 0.5], vec![1.0]]).is_err());
        assert!(DiscreteMixtureModel::new(vec![0.5, 0.5], vec![vec![0.5, 0.5], vec![1.0]]).is_err());
    }

    #[test]
    fn decomposition_worked_example() {
        // ρ uniform on {y1, y2}; P_{y1} = (.5, .5), P_{y2} = (1, 0); f = (1, 3)
        let model =
            DiscreteMixtureModel::new(vec![0.5, 0.5], vec![vec![0.5, 0.5], vec![1.0, 0.0]]).unwrap();
        let f = |x: usize, _y: usize| if x == 0 { 1.0 } else { 3.0 };
        let d = entropy_decomposition(&PhiFunction::square(), &model, f).unwrap();

        // brute force over the four joint atoms
        let weights = [0.25, 0.25, 0.5, 0.0];
        let values = [1.0, 3.0, 1.0, 3.0];
        let m: f64 = weights.iter().zip(values).map(|(w, v)| w * v).sum();
        let m2: f64 = weights.iter().zip(values).map(|(w, v)| w * v * v).sum();
        let brute = m2 - m * m;

        assert!((brute - 0.75).abs() < 1e-15);
        assert!((d.total - 0.75).abs() < 1e-15);
        assert!((d.within_expected - 0.5).abs() < 1e-15);
        assert!((d.between - 0.25).abs() < 1e-15);

        let mix = mixture_entropy_decomposition(&PhiFunction::square(), &model, |x| {
            if x == 0 { 1.0 } else { 3.0 }
        })
        .unwrap();
        assert!((mix.total - 0.75).abs() < 1e-15);
    }

    #[test]
    fn decomposition_degenerate_cases() {
        let model =
            DiscreteMixtureModel::new(vec![0.3, 0.7], vec![vec![0.2, 0.8], vec![0.6, 0.4]]).unwrap();
        for phi in [PhiFunction::square(), PhiFunction::xlogx()] {
            let d = entropy_decomposition(&phi, &model, |_, _| 2.0).unwrap();
            assert_eq!((d.total, d.within_expected, d.between), (0.0, 0.0, 0.0));
        }
        let single = DiscreteMixtureModel::new(vec![1.0], vec![vec![0.2, 0.8]]).unwrap();
        let d = entropy_decomposition(&PhiFunction::xlogx(), &single, |x, _| 1.0 + x as f64).unwrap();
        assert_eq!(d.between, 0.0);
        assert!((d.total - d.within_expected).abs() < 1e-15);
    }

    #[test]
    fn duality_gap_examples() {
        let d = FiniteDistribution::new(vec![0.5, 1.0, 2.0], vec![0.2, 0.5, 0.3]).unwrap();
        let gap = duality_gap(&PhiFunction::square(), &d, |&x| x, |&x| x).unwrap();
        assert!(gap.abs() < 1e-14);
        for phi in [PhiFunction::square(), PhiFunction::xlogx()] {
            let gap = duality_gap(&phi, &d, |&x| x, |_| 1.7).unwrap();
            let ent_g = phi_entropy(&phi, &d, |_| 1.7).unwrap();
            assert_eq!(ent_g, 0.0);
            assert!(gap >= -1e-14);
        }
        assert!(matches!(
            duality_gap(&PhiFunction::power(1.5).unwrap(), &d, |&x| x, |&x| x),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn power_interpolates_between_entropy_and_variance() {
        let d = FiniteDistribution::new(vec![0.5, 1.0, 4.0], vec![0.3, 0.3, 0.4]).unwrap();
        let ent = phi_entropy(&PhiFunction::xlogx(), &d, |&x| x).unwrap();
        let near = phi_entropy(&PhiFunction::power(1.001).unwrap(), &d, |&x| x).unwrap();
        assert!((near - ent).abs() <= 1e-2 * ent);
        let var = phi_entropy(&PhiFunction::square(), &d, |&x| x).unwrap();
        let p2 = phi_entropy(&PhiFunction::power(2.0).unwrap(), &d, |&x| x).unwrap();
        assert!((var - p2).abs() < 1e-14);
    }
}
