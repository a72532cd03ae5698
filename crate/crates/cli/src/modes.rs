//! One function per mode. Each returns a [`Report`] holding every output file.

use isoperim_core::constants::{
    self, ehmc_constants, ehmc_recursion, proximal_recursion, ula_recursion_with_contraction, xi, zeta,
};
use isoperim_core::criteria::{
    check_mgf_criterion, check_mgf_criterion_mc, check_var_criterion, check_var_criterion_mc, standard_directions,
    CriterionReport,
};
use isoperim_core::estimators::{certify_lsi, certify_pi, standard_family_for_covariance, RatioCertificate};
use isoperim_core::kernels::{make_ehmc_kernel, make_proximal_kernels, make_ula_kernel, BackwardSampler};
use isoperim_core::linalg::symmetric_lambda_max;
use isoperim_core::numeric::mean_and_std_err;
use isoperim_core::phi::{run_identity_suite, DUALITY_TOL, IDENTITY_TOL};
use isoperim_core::rng::stream_rng;
use isoperim_core::samplers::{run_chains_recorded, write_clouds_csv, Algorithm, ChainConfig, SampleCloud};
use isoperim_core::{ConditionalFamily, Inequality, RecursionState, TargetPotential, TwoScaleInput};
use nalgebra::DVector;

use crate::config::{ExperimentConfig, Mode};
use crate::output::{num, vector, Report, Table};
use crate::{core_err, RunError};

pub const DEFAULT_K_MAX: usize = 200;
pub const DEFAULT_N_MC: usize = 10_000;
pub const DEFAULT_LAMBDAS: [f64; 3] = [0.5, 1.0, 2.0];
pub const DEFAULT_TRIALS: usize = 10_000;
/// Relative agreement required between a recursion and its closed form.
pub const RECURSION_TOL: f64 = 1e-10;
/// Standard errors of slack on empirical λ_max checks.
pub const SLACK_SIGMAS: f64 = 5.0;

pub fn run_mode(cfg: &ExperimentConfig) -> Result<Report, RunError> {
    match cfg.mode {
        Mode::Constants => constants_mode(cfg),
        Mode::Criteria => criteria_mode(cfg),
        Mode::Track => track_mode(cfg),
        Mode::Certify => certify_mode(cfg),
        Mode::Identities => identities_mode(cfg),
    }
}

fn seed(cfg: &ExperimentConfig) -> u64 {
    cfg.seed.expect("stochastic modes are checked for a seed")
}

fn constants_mode(cfg: &ExperimentConfig) -> Result<Report, RunError> {
    let mut report = Report::new();
    let mut table = Table::new(&["quantity", "value"]);
    let mut put = |report: &mut Report, name: &str, v: f64| {
        table.row([name.to_string(), num(v)]);
        report.line(name, num(v));
    };

    if let Some(ts) = &cfg.two_scale {
        for ineq in [Inequality::Pi, Inequality::Lsi] {
            let input = TwoScaleInput::new(ts.alpha, ts.beta, ts.l_bar, ineq).map_err(core_err("two_scale"))?;
            put(&mut report, &format!("zeta_{}", ineq.name()), zeta(&input));
            put(&mut report, &format!("xi_{}", ineq.name()), xi(&input));
        }
        let (product, convolution) =
            constants::product_convolution_constants(ts.alpha, ts.beta).map_err(core_err("two_scale"))?;
        put(&mut report, "product", product);
        put(&mut report, "convolution", convolution);
    }

    if cfg.algorithm.is_some() {
        let target = cfg.target()?;
        let (lo, hi) = target.hessian_bounds();
        put(&mut report, "hessian_lower", lo);
        put(&mut report, "hessian_upper", hi);
        match cfg.algorithm()? {
            Algorithm::Ula { eta } => {
                let c = target.ula_contraction(eta);
                put(&mut report, "eta", eta);
                put(&mut report, "c_ula", c);
                put(&mut report, "l_bar", constants::ula_l_bar(c, eta));
                let limit = if c < 1.0 { 2.0 * eta / (1.0 - c * c) } else { f64::INFINITY };
                put(&mut report, "alpha_limit", limit);
            }
            Algorithm::Proximal { eta } => {
                let (_, backward) = make_proximal_kernels(&target, eta).map_err(core_err("proximal kernels"))?;
                let beta = backward.beta();
                put(&mut report, "eta", eta);
                put(&mut report, "beta", beta);
                put(&mut report, "c_k", constants::proximal_c_k(beta, eta));
                put(&mut report, "d_k", constants::proximal_d_k(beta, eta));
                put(&mut report, "l_bar_forward", constants::proximal_forward_l_bar(eta));
                put(&mut report, "l_bar_backward", beta.sqrt() / eta);
                let limit = if beta < eta { 1.0 / (1.0 / beta - 1.0 / eta) } else { f64::INFINITY };
                put(&mut report, "alpha_limit", limit);
            }
            Algorithm::Ehmc { c } => {
                let m = quadratic_matrix(&target)?;
                let k = ehmc_constants(&m, c).map_err(core_err("exact HMC"))?;
                put(&mut report, "c", c);
                put(&mut report, "integration_time", k.integration_time);
                put(&mut report, "kappa", k.kappa);
                put(&mut report, "lambda_min", k.lambda_min);
                put(&mut report, "lambda_max", k.lambda_max);
                put(&mut report, "z_min", k.z_min);
                put(&mut report, "kernel_pi_constant", k.kernel_pi_constant);
                put(&mut report, "alpha_limit", 1.0 / k.lambda_min);
            }
        }
    }
    report.file("constants.csv", table.into_bytes());
    Ok(report)
}

fn quadratic_matrix(target: &TargetPotential) -> Result<nalgebra::DMatrix<f64>, RunError> {
    target
        .as_quadratic()
        .map(|m| m.matrix().clone())
        .ok_or_else(|| RunError::Config(crate::ConfigError("exact HMC needs a quadratic target".into())))
}

/// The recursion matching `cfg`, run to `k_max`.
fn recursion(cfg: &ExperimentConfig, alpha0: f64, k_max: usize) -> Result<RecursionState, RunError> {
    let target = cfg.target()?;
    match cfg.algorithm()? {
        Algorithm::Ula { eta } => ula_recursion_with_contraction(target.ula_contraction(eta), eta, alpha0, k_max)
            .map_err(core_err("ULA recursion")),
        Algorithm::Proximal { eta } => {
            let (_, backward) = make_proximal_kernels(&target, eta).map_err(core_err("proximal kernels"))?;
            proximal_recursion(backward.beta(), eta, alpha0, k_max).map_err(core_err("proximal recursion"))
        }
        Algorithm::Ehmc { c } => {
            ehmc_recursion(&quadratic_matrix(&target)?, c, alpha0, k_max).map_err(core_err("exact HMC recursion"))
        }
    }
}

/// `α^(0)`: the configured value, else `λ_max` of the initial covariance.
fn alpha0(cfg: &ExperimentConfig) -> Result<f64, RunError> {
    if let Some(a) = cfg.alpha0 {
        return Ok(a);
    }
    let dim = cfg.target()?.dim();
    let law = cfg.init(dim)?.law();
    Ok(symmetric_lambda_max(&law.cov).max(0.0))
}

fn chain_config(cfg: &ExperimentConfig) -> Result<ChainConfig, RunError> {
    let target = cfg.target()?;
    let init = cfg.init(target.dim())?;
    let n_chains = cfg.n_chains.ok_or_else(|| crate::ConfigError("missing `n_chains`".into()))?;
    let n_iters = cfg.n_iters.unwrap_or(0);
    Ok(ChainConfig { algorithm: cfg.algorithm()?, target, n_chains, n_iters, init })
}

/// Largest sample-covariance eigenvalue and a standard error from the spread
/// of squared projections on its eigenvector.
fn cloud_lambda_max(cloud: &SampleCloud) -> (f64, f64) {
    let cov = cloud.covariance();
    let eig = cov.clone().symmetric_eigen();
    let (i_max, &lambda) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty spectrum");
    let v: DVector<f64> = eig.eigenvectors.column(i_max).into_owned();
    let mean = cloud.mean();
    let squares: Vec<f64> = (0..cloud.len())
        .map(|i| {
            let p = v.dot(&(cloud.point_vector(i) - &mean));
            p * p
        })
        .collect();
    let (_, se) = mean_and_std_err(&squares);
    (lambda, se)
}

fn track_mode(cfg: &ExperimentConfig) -> Result<Report, RunError> {
    let mut report = Report::new();
    let k_max = cfg.k_max.unwrap_or(DEFAULT_K_MAX).max(cfg.n_iters.unwrap_or(0));
    let a0 = alpha0(cfg)?;
    let rec = recursion(cfg, a0, k_max)?;

    let mut table = Table::new(&["k", "alpha_k", "closed_form", "abs_diff"]);
    let mut worst = 0.0f64;
    let mut agree = true;
    for (k, &a) in rec.history.iter().enumerate() {
        let cf = rec.closed_form(k);
        let diff = (a - cf).abs();
        agree &= diff <= RECURSION_TOL * a.abs().max(cf.abs()).max(1.0);
        worst = worst.max(diff / a.abs().max(1.0));
        table.row([k.to_string(), num(a), num(cf), num(diff)]);
    }
    let limit = rec.limit.unwrap_or(f64::INFINITY);
    table.row(["inf".to_string(), num(limit), num(limit), num(0.0)]);
    report.file("recursion.csv", table.into_bytes());

    report.line("algorithm", cfg.algorithm()?.name());
    report.line("alpha0", num(a0));
    report.line("contraction", num(rec.contraction));
    report.line("offset", num(rec.offset));
    report.line("k_max", k_max);
    report.line("alpha_k_max", num(rec.last()));
    report.line("limit", num(limit));
    report.line("diverges", rec.diverges);
    report.line("max_rel_closed_form_gap", num(worst));
    report.check("closed_form_agreement", agree);

    if cfg.n_chains.is_some() {
        let chain = chain_config(cfg)?;
        let record = cfg.record.clone().unwrap_or_else(|| vec![chain.n_iters]);
        let clouds = run_chains_recorded(&chain, seed(cfg), &record).map_err(core_err("chains"))?;
        let mut t = Table::new(&["k", "lambda_max_cov", "std_err", "alpha_k", "pass"]);
        let mut all = true;
        for cloud in &clouds {
            let (lambda, se) = cloud_lambda_max(cloud);
            let a = rec.history[cloud.iteration];
            let ok = lambda <= a + SLACK_SIGMAS * se;
            all &= ok;
            t.row([cloud.iteration.to_string(), num(lambda), num(se), num(a), ok.to_string()]);
        }
        report.file("tracking.csv", t.into_bytes());
        report.check("empirical_below_alpha_k", all);
        if cfg.write_clouds {
            report.file("clouds.csv", clouds_bytes(&clouds)?);
        }
    }
    Ok(report)
}

fn clouds_bytes(clouds: &[SampleCloud]) -> Result<Vec<u8>, RunError> {
    let mut buf = Vec::new();
    write_clouds_csv(clouds, &mut buf).map_err(core_err("clouds.csv"))?;
    Ok(buf)
}

/// Default `y` probes: origin, each unit vector, and the all-ones vector.
fn default_y_grid(dim: usize) -> Vec<DVector<f64>> {
    let mut grid = vec![DVector::zeros(dim)];
    for i in 0..dim {
        let mut e = DVector::zeros(dim);
        e[i] = 1.0;
        grid.push(e);
    }
    grid.push(DVector::from_element(dim, 1.0));
    grid
}

struct Family<'a> {
    name: &'static str,
    kernel: &'a dyn ConditionalFamily,
    l_bar: f64,
}

fn criteria_mode(cfg: &ExperimentConfig) -> Result<Report, RunError> {
    let mut report = Report::new();
    let target = cfg.target()?;
    let params = cfg.criteria.clone().unwrap_or_default();
    let dim = target.dim();
    let y_grid: Vec<DVector<f64>> = match &params.y_grid {
        Some(g) => g.iter().map(|y| DVector::from_column_slice(y)).collect(),
        None => default_y_grid(dim),
    };
    let lambdas = params.lambdas.clone().unwrap_or_else(|| DEFAULT_LAMBDAS.to_vec());
    let n_mc = params.n_mc.unwrap_or(DEFAULT_N_MC);
    let u_grid = standard_directions(dim);

    let ula;
    let proximal;
    let ehmc;
    let mut families = Vec::new();
    match cfg.algorithm()? {
        Algorithm::Ula { eta } => {
            ula = make_ula_kernel(&target, eta).map_err(core_err("ULA kernel"))?;
            let l_bar = constants::ula_l_bar(target.ula_contraction(eta), eta);
            families.push(Family { name: "ula", kernel: &ula, l_bar });
        }
        Algorithm::Proximal { eta } => {
            proximal = make_proximal_kernels(&target, eta).map_err(core_err("proximal kernels"))?;
            let l_fwd = constants::proximal_forward_l_bar(eta);
            families.push(Family { name: "proximal_forward", kernel: &proximal.0, l_bar: l_fwd });
            if proximal.1.sampler() == BackwardSampler::Unavailable {
                report.line("proximal_backward", "skipped: no sampler for this target");
            } else {
                let l_bwd = proximal.1.beta().sqrt() / eta;
                families.push(Family { name: "proximal_backward", kernel: &proximal.1, l_bar: l_bwd });
            }
        }
        Algorithm::Ehmc { c } => {
            let m = quadratic_matrix(&target)?;
            let t = ehmc_constants(&m, c).map_err(core_err("exact HMC"))?.integration_time;
            ehmc = make_ehmc_kernel(&m, t).map_err(core_err("exact HMC kernel"))?;
            families.push(Family { name: "ehmc", kernel: &ehmc, l_bar: ehmc.mgf_l_bar() });
        }
    }

    let mut table = Table::new(&[
        "family", "criterion", "method", "certification", "l_bar", "y", "u", "lambda", "observed", "bound",
        "std_err", "slack", "margin", "overflow", "violated",
    ]);
    let base_seed = seed(cfg);
    for (fi, fam) in families.iter().enumerate() {
        let mut rng_var = stream_rng(base_seed, 2 * fi as u64);
        let mut rng_mgf = stream_rng(base_seed, 2 * fi as u64 + 1);
        let var = if params.monte_carlo {
            check_var_criterion_mc(fam.kernel, &y_grid, &u_grid, fam.l_bar, n_mc, &mut rng_var)
        } else {
            check_var_criterion(fam.kernel, &y_grid, &u_grid, fam.l_bar, n_mc, &mut rng_var)
        }
        .map_err(core_err(fam.name))?;
        let mgf = if params.monte_carlo {
            check_mgf_criterion_mc(fam.kernel, &y_grid, &u_grid, &lambdas, fam.l_bar, n_mc, &mut rng_mgf)
        } else {
            check_mgf_criterion(fam.kernel, &y_grid, &u_grid, &lambdas, fam.l_bar, n_mc, &mut rng_mgf)
        }
        .map_err(core_err(fam.name))?;
        for r in [&var, &mgf] {
            criterion_rows(&mut table, fam.name, r);
            let key = format!("{}_{}", fam.name, r.kind.name());
            report.line(format!("{key}_l_bar"), num(r.l_bar));
            report.line(format!("{key}_observed_sup"), num(r.observed_sup));
            report.line(format!("{key}_method"), format!("{} ({})", r.method.name(), r.certification.name()));
            if r.skipped() > 0 {
                report.line(format!("{key}_skipped_probes"), r.skipped());
            }
            report.check(key, r.passed());
        }
    }
    report.file("criteria.csv", table.into_bytes());
    Ok(report)
}

fn criterion_rows(table: &mut Table, family: &str, r: &CriterionReport) {
    for p in &r.probes {
        table.row([
            family.to_string(),
            r.kind.name().to_string(),
            r.method.name().to_string(),
            r.certification.name().to_string(),
            num(r.l_bar),
            vector(&p.y),
            vector(&p.u),
            num(p.lambda),
            num(p.observed),
            num(p.bound),
            num(p.std_err),
            num(p.slack),
            num(p.margin),
            p.overflow.to_string(),
            p.violated().to_string(),
        ]);
    }
}

fn certify_mode(cfg: &ExperimentConfig) -> Result<Report, RunError> {
    let mut report = Report::new();
    let chain = chain_config(cfg)?;
    let k = chain.n_iters;
    if k == 0 {
        return Err(crate::ConfigError("certify needs n_iters ≥ 1".into()).into());
    }
    let rec = recursion(cfg, alpha0(cfg)?, k)?;
    let gamma = rec.history[k];

    let clouds = run_chains_recorded(&chain, seed(cfg), &[k]).map_err(core_err("chains"))?;
    let cloud = &clouds[0];
    let fns = standard_family_for_covariance(&cloud.covariance());
    let pi = certify_pi(cloud, &fns, gamma).map_err(core_err("PI certificate"))?;
    let lsi = certify_lsi(cloud, &fns, gamma).map_err(core_err("LSI certificate"))?;

    let (lambda, se) = cloud_lambda_max(cloud);
    report.line("algorithm", chain.algorithm.name());
    report.line("iteration", k);
    report.line("n_chains", chain.n_chains);
    report.line("gamma", num(gamma));
    report.line("lambda_max_cov", num(lambda));
    report.line("lambda_max_cov_std_err", num(se));
    for c in [&pi, &lsi] {
        let key = c.inequality.name();
        report.line(format!("{key}_observed_sup_ratio"), num(c.observed_sup_ratio));
        if !c.skipped.is_empty() {
            report.line(format!("{key}_skipped"), c.skipped.join(" "));
        }
        report.check(format!("{key}_certificate"), c.pass);
    }

    let mut combined = RatioCertificate { per_function: Vec::new(), skipped: Vec::new(), ..pi.clone() };
    for c in [&pi, &lsi] {
        for r in &c.per_function {
            let mut r = r.clone();
            r.id = format!("{}/{}", c.inequality.name().to_lowercase(), r.id);
            combined.per_function.push(r);
        }
    }
    let mut buf = Vec::new();
    combined.write_csv(&mut buf).map_err(core_err("certificate.csv"))?;
    report.file("certificate.csv", buf);
    if cfg.write_clouds {
        report.file("clouds.csv", clouds_bytes(&clouds)?);
    }
    Ok(report)
}

fn identities_mode(cfg: &ExperimentConfig) -> Result<Report, RunError> {
    let mut report = Report::new();
    let trials = cfg.trials.unwrap_or(DEFAULT_TRIALS);
    let r = run_identity_suite(seed(cfg), trials).map_err(core_err("identity suite"))?;
    let mut table = Table::new(&["suite", "trials", "worst", "tolerance", "pass"]);
    let rows = [
        ("decomposition_square", r.decomposition_square, IDENTITY_TOL, r.decomposition_square <= IDENTITY_TOL),
        ("decomposition_xlogx", r.decomposition_xlogx, IDENTITY_TOL, r.decomposition_xlogx <= IDENTITY_TOL),
        ("duality_min_gap", r.duality_min_gap, DUALITY_TOL, r.duality_pass()),
        ("conjugate", r.conjugate, IDENTITY_TOL, r.conjugate_pass()),
    ];
    report.line("trials", trials);
    for (name, worst, tol, ok) in rows {
        table.row([name.to_string(), trials.to_string(), num(worst), num(tol), ok.to_string()]);
        report.line(format!("{name}_worst"), num(worst));
        report.check(name, ok);
    }
    report.file("identities.csv", table.into_bytes());
    Ok(report)
}
