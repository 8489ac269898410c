//! Batch front end: JSON job in, CSV/JSON reports out.
//!
//! Exit codes: 0 pass, 1 a residual above tolerance, 2 invalid configuration,
//! unusable input or an output that could not be written.

pub mod config;
pub mod run;

use std::path::{Path, PathBuf};

use config::{grid_job, identities_job, load_config, shuffle_job, Command, ConfigError, JobConfig};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

/// Command-line overrides of config fields.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub tol: Option<f64>,
    pub seed: Option<u64>,
    pub jobs: usize,
}

pub fn apply_overrides(cfg: &mut JobConfig, o: &Overrides) {
    if let Some(p) = &o.out {
        cfg.out = Some(p.clone());
    }
    if let Some(t) = o.tol {
        cfg.tol = t;
    }
    if let Some(s) = o.seed {
        cfg.seed = s;
    }
}

/// `out.csv` -> `out.json`; other names get `.json` appended.
pub fn sidecar_path(csv: &Path) -> PathBuf {
    if csv.extension().is_some_and(|e| e == "csv") {
        csv.with_extension("json")
    } else {
        let mut s = csv.as_os_str().to_owned();
        s.push(".json");
        PathBuf::from(s)
    }
}

fn write(path: &Path, text: &str) -> Result<(), String> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| format!("cannot create {}: {e}", dir.display()))?;
    }
    std::fs::write(path, text).map_err(|e| format!("cannot write {}: {e}", path.display()))
}

fn emit_json<T: serde::Serialize>(value: &T, out: Option<&Path>) -> Result<(), String> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| e.to_string())?;
    text.push('\n');
    match out {
        Some(p) => write(p, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Run one job; diagnostics go to stderr, the exit code is returned.
pub fn execute(config_path: &Path, o: &Overrides) -> i32 {
    let mut cfg = match load_config(config_path) {
        Ok(c) => c,
        Err(e) => return config_error(&e),
    };
    apply_overrides(&mut cfg, o);
    match execute_config(&cfg, o.jobs) {
        Ok(code) => code,
        Err(Failure::Config(e)) => config_error(&e),
        Err(Failure::Other(msg)) => {
            eprintln!("error: {msg}");
            EXIT_CONFIG
        }
    }
}

fn config_error(e: &ConfigError) -> i32 {
    eprintln!("config error: {e}");
    EXIT_CONFIG
}

pub enum Failure {
    Config(ConfigError),
    Other(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e)
    }
}

impl From<run::RunError> for Failure {
    fn from(e: run::RunError) -> Self {
        Failure::Other(e.to_string())
    }
}

fn verdict(pass: bool) -> i32 {
    if pass {
        EXIT_PASS
    } else {
        EXIT_FAIL
    }
}

pub fn execute_config(cfg: &JobConfig, jobs: usize) -> Result<i32, Failure> {
    if !(cfg.tol.is_finite() && cfg.tol > 0.0) {
        return Err(ConfigError::Invalid { pointer: "/tol".into(), message: "must be a positive number".into() }.into());
    }
    let pool = run::pool(jobs)?;
    let out = cfg.out.as_deref();
    match cfg.command {
        Command::Solve => {
            let job = grid_job(cfg)?;
            let csv_path = out.ok_or_else(|| ConfigError::Invalid {
                pointer: "/out".into(),
                message: "solve writes a CSV file and needs a path (or --out)".into(),
            })?;
            let (csv, sidecar) = run::solve(cfg, &job, &pool)?;
            write(csv_path, &csv).map_err(Failure::Other)?;
            emit_json(&sidecar, Some(&sidecar_path(csv_path))).map_err(Failure::Other)?;
            Ok(EXIT_PASS)
        }
        Command::Verify => {
            let job = grid_job(cfg)?;
            let report = run::verify(&job, cfg.tol, &pool)?;
            emit_json(&report, out).map_err(Failure::Other)?;
            Ok(verdict(report.pass))
        }
        Command::Identities => {
            let c = identities_job(cfg)?;
            let report = run::identities(&c, cfg.seed, cfg.tol, &pool)?;
            emit_json(&report, out).map_err(Failure::Other)?;
            Ok(verdict(report.pass))
        }
        Command::Shuffle => {
            let (phi, s) = shuffle_job(cfg)?;
            let report = run::shuffle(&phi, &s, cfg.domain_max, cfg.quad_step, cfg.seed, cfg.tol, &pool)?;
            emit_json(&report, out).map_err(Failure::Other)?;
            Ok(verdict(report.pass))
        }
    }
}
