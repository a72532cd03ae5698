//! Batch front-end: reads a JSON experiment config, runs one mode and writes
//! CSV tables plus a plain-text summary to `<output_dir>/<name>/`.

pub mod config;
mod modes;
mod output;

use std::path::{Path, PathBuf};

pub use config::{ConfigError, ExperimentConfig, Mode};

/// Everything worked and every pass flag held.
pub const EXIT_OK: i32 = 0;
/// Bad config or a library error.
pub const EXIT_ERROR: i32 = 1;
/// A criterion, certificate or identity check failed.
pub const EXIT_FAILED: i32 = 2;

/// Command-line overrides applied on top of the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub quiet: bool,
    /// Worker threads; `None` uses the rayon default.
    pub threads: Option<usize>,
}

/// What a mode produced.
#[derive(Debug)]
pub struct Outcome {
    pub dir: PathBuf,
    pub pass: bool,
    pub summary: String,
}

#[derive(Debug)]
pub enum RunError {
    Config(ConfigError),
    Core(String),
    Io(String),
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Config(e) => write!(f, "config error: {e}"),
            Self::Core(e) => write!(f, "error: {e}"),
            Self::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for RunError {}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        Self::Config(e)
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        Self::Io(e.to_string())
    }
}

pub(crate) fn core_err(context: &str) -> impl Fn(isoperim_core::Error) -> RunError + '_ {
    move |e| match e {
        isoperim_core::Error::Io(m) => RunError::Io(format!("{context}: {m}")),
        e => RunError::Core(format!("{context}: {e}")),
    }
}

/// Loads, runs and reports; returns the process exit code.
pub fn run(config_path: &Path, overrides: &Overrides) -> i32 {
    let result = ExperimentConfig::load(config_path)
        .map_err(RunError::from)
        .and_then(|cfg| run_config(cfg, overrides));
    match result {
        Ok(outcome) => {
            if !overrides.quiet {
                print!("{}", outcome.summary);
                println!("output: {}", outcome.dir.display());
            }
            if outcome.pass {
                EXIT_OK
            } else {
                EXIT_FAILED
            }
        }
        Err(e) => {
            eprintln!("{e}");
            EXIT_ERROR
        }
    }
}

/// Runs an already-parsed config.
pub fn run_config(mut cfg: ExperimentConfig, overrides: &Overrides) -> Result<Outcome, RunError> {
    if let Some(seed) = overrides.seed {
        cfg.seed = Some(seed);
    }
    if let Some(out) = &overrides.out {
        cfg.output_dir = out.clone();
    }
    if cfg.is_stochastic() && cfg.seed.is_none() {
        return Err(ConfigError(format!("mode {} is stochastic and needs a seed", cfg.mode.name())).into());
    }
    let dir = cfg.output_dir.join(&cfg.name);

    let work = || -> Result<Outcome, RunError> {
        let report = modes::run_mode(&cfg)?;
        std::fs::create_dir_all(&dir)?;
        for (file, bytes) in &report.files {
            std::fs::write(dir.join(file), bytes)?;
        }
        let summary = report.summary(&cfg);
        std::fs::write(dir.join("summary.txt"), &summary)?;
        Ok(Outcome { dir: dir.clone(), pass: report.pass, summary })
    };

    match overrides.threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| RunError::Core(format!("thread pool: {e}")))?;
            pool.install(work)
        }
        None => work(),
    }
}
