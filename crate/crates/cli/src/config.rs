//! Job configuration: JSON parsing with pointer-style error paths, then
//! command-specific validation.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use toda_core::expr::FuncExpr;
use toda_core::liedata::{Family, LieType};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{pointer}: {message}")]
    Invalid { pointer: String, message: String },
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
}

impl ConfigError {
    pub fn pointer(&self) -> Option<&str> {
        match self {
            ConfigError::Invalid { pointer, .. } => Some(pointer),
            ConfigError::Read { .. } => None,
        }
    }
}

fn invalid(pointer: impl Into<String>, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { pointer: pointer.into(), message: message.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Solve,
    Verify,
    Identities,
    Shuffle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub x_min: f64,
    pub x_max: f64,
    pub nx: usize,
    pub y_min: f64,
    pub y_max: f64,
    pub ny: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    X,
    Y,
}

/// `eps * expr` added to one component of one chiral vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbSpec {
    pub side: Side,
    pub component: usize,
    pub eps: f64,
    pub expr: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GroupName {
    Sp,
    SoOdd,
    SoEven,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupSuite {
    pub group: GroupName,
    pub n: usize,
    pub elements: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IdentitiesConfig {
    pub cofactor_matrices: usize,
    pub cofactor_max_size: usize,
    pub groups: Vec<GroupSuite>,
    pub alternating_max_n: usize,
    pub alternating_draws: usize,
    pub shuffle_pairs: usize,
    pub shuffle_max_len: usize,
    pub pairing_max_n: usize,
}

impl Default for IdentitiesConfig {
    fn default() -> Self {
        IdentitiesConfig {
            cofactor_matrices: 20,
            cofactor_max_size: 5,
            groups: vec![
                GroupSuite { group: GroupName::Sp, n: 2, elements: 10 },
                GroupSuite { group: GroupName::SoOdd, n: 2, elements: 10 },
                GroupSuite { group: GroupName::SoEven, n: 2, elements: 10 },
            ],
            alternating_max_n: 3,
            alternating_draws: 5,
            shuffle_pairs: 10,
            shuffle_max_len: 3,
            pairing_max_n: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShuffleConfig {
    /// Explicit label sequences to pair; labels index `phi` from 1.
    #[serde(default)]
    pub pairs: Vec<(Vec<usize>, Vec<usize>)>,
    /// Additional random pairs drawn from the seed.
    #[serde(default)]
    pub random_pairs: usize,
    #[serde(default = "default_max_len")]
    pub max_len: usize,
    pub points: Vec<f64>,
}

fn default_max_len() -> usize {
    3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobConfig {
    pub command: Command,
    #[serde(default)]
    pub family: Option<String>,
    #[serde(default)]
    pub rank: Option<usize>,
    #[serde(default)]
    pub phi: Vec<String>,
    #[serde(default)]
    pub psi: Vec<String>,
    #[serde(default)]
    pub grid: Option<Grid>,
    /// Jet order; raised to what the checks need.
    #[serde(default)]
    pub order: Option<usize>,
    #[serde(default)]
    pub quad_step: Option<f64>,
    /// Right end of the integration domain; defaults to the largest grid coordinate.
    #[serde(default)]
    pub domain_max: Option<f64>,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub perturb: Vec<PerturbSpec>,
    #[serde(default)]
    pub identities: Option<IdentitiesConfig>,
    #[serde(default)]
    pub shuffle: Option<ShuffleConfig>,
}

fn default_tol() -> f64 {
    1e-7
}

/// Pointer form of a serde path (`grid.nx` -> `/grid/nx`, `phi[2]` -> `/phi/2`).
fn pointer_of(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut s = String::new();
    for seg in path.iter() {
        match seg {
            Segment::Seq { index } => s.push_str(&format!("/{index}")),
            Segment::Map { key } => s.push_str(&format!("/{}", key.replace('~', "~0").replace('/', "~1"))),
            Segment::Enum { variant } => s.push_str(&format!("/{variant}")),
            Segment::Unknown => s.push_str("/?"),
        }
    }
    if s.is_empty() {
        s.push('/');
    }
    s
}

pub fn parse_config(text: &str) -> Result<JobConfig, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let pointer = pointer_of(e.path());
        invalid(pointer, e.into_inner().to_string())
    })
}

pub fn load_config(path: &std::path::Path) -> Result<JobConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.into(), source })?;
    parse_config(&text)
}

/// A validated grid job.
#[derive(Debug, Clone)]
pub struct GridJob {
    pub lie_type: LieType,
    pub phi: Vec<FuncExpr>,
    pub psi: Vec<FuncExpr>,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub domain_max: f64,
    pub quad_step: Option<f64>,
    pub order: usize,
    pub perturb: Vec<(Side, usize, f64, FuncExpr)>,
}

fn parse_exprs(srcs: &[String], field: &str) -> Result<Vec<FuncExpr>, ConfigError> {
    srcs.iter()
        .enumerate()
        .map(|(k, s)| {
            s.parse::<FuncExpr>()
                .map_err(|e| {
                    let at = e.offset().map(|o| format!(" (at byte {o})")).unwrap_or_default();
                    invalid(format!("/{field}/{k}"), format!("{e}{at}"))
                })
        })
        .collect()
}

pub fn lie_type_of(cfg: &JobConfig) -> Result<LieType, ConfigError> {
    let fam: Family = cfg
        .family
        .as_deref()
        .ok_or_else(|| invalid("/family", "required for this command"))?
        .parse()
        .map_err(|e: toda_core::liedata::LieError| invalid("/family", e.to_string()))?;
    let rank = cfg.rank.ok_or_else(|| invalid("/rank", "required for this command"))?;
    LieType::new(fam, rank).map_err(|e| invalid("/rank", e.to_string()))
}

fn axis(lo: f64, hi: f64, n: usize, name: &str) -> Result<Vec<f64>, ConfigError> {
    if n == 0 {
        return Err(invalid(format!("/grid/n{name}"), "must be at least 1"));
    }
    if !(lo.is_finite() && hi.is_finite()) || lo > hi {
        return Err(invalid(format!("/grid/{name}_min"), format!("bounds [{lo}, {hi}] are not an interval")));
    }
    if lo < 0.0 {
        return Err(invalid(format!("/grid/{name}_min"), "integrals start at 0, so the grid must be nonnegative"));
    }
    Ok(toda_core::sampling::linspace(lo, hi, n))
}

pub fn grid_job(cfg: &JobConfig) -> Result<GridJob, ConfigError> {
    let lie_type = lie_type_of(cfg)?;
    let n = lie_type.rank();
    if cfg.phi.len() != n {
        return Err(invalid("/phi", format!("expected {n} expressions, got {}", cfg.phi.len())));
    }
    if cfg.psi.len() != n {
        return Err(invalid("/psi", format!("expected {n} expressions, got {}", cfg.psi.len())));
    }
    let phi = parse_exprs(&cfg.phi, "phi")?;
    let psi = parse_exprs(&cfg.psi, "psi")?;
    let g = cfg.grid.as_ref().ok_or_else(|| invalid("/grid", "required for this command"))?;
    let xs = axis(g.x_min, g.x_max, g.nx, "x")?;
    let ys = axis(g.y_min, g.y_max, g.ny, "y")?;
    let reach = g.x_max.max(g.y_max);
    let domain_max = cfg.domain_max.unwrap_or(reach);
    if !(domain_max >= reach) {
        return Err(invalid("/domain_max", format!("{domain_max} is below the grid extent {reach}")));
    }
    if let Some(h) = cfg.quad_step {
        if !(h.is_finite() && h > 0.0) {
            return Err(invalid("/quad_step", "must be a positive number"));
        }
    }
    if !(cfg.tol.is_finite() && cfg.tol > 0.0) {
        return Err(invalid("/tol", "must be a positive number"));
    }
    let need = n + 1;
    let order = match cfg.order {
        Some(o) if o < need => return Err(invalid("/order", format!("must be at least {need}"))),
        Some(o) => o,
        None => 2 * n + 2,
    };
    let mut perturb = Vec::new();
    for (k, p) in cfg.perturb.iter().enumerate() {
        if p.component >= lie_type.vector_len() {
            return Err(invalid(
                format!("/perturb/{k}/component"),
                format!("vector has {} components", lie_type.vector_len()),
            ));
        }
        let e = p
            .expr
            .parse::<FuncExpr>()
            .map_err(|e| invalid(format!("/perturb/{k}/expr"), e.to_string()))?;
        perturb.push((p.side, p.component, p.eps, e));
    }
    Ok(GridJob { lie_type, phi, psi, xs, ys, domain_max, quad_step: cfg.quad_step, order, perturb })
}

pub fn shuffle_job(cfg: &JobConfig) -> Result<(Vec<FuncExpr>, ShuffleConfig), ConfigError> {
    let s = cfg.shuffle.clone().ok_or_else(|| invalid("/shuffle", "required for this command"))?;
    if cfg.phi.is_empty() {
        return Err(invalid("/phi", "at least one integrand is required"));
    }
    let phi = parse_exprs(&cfg.phi, "phi")?;
    for (k, (a, b)) in s.pairs.iter().enumerate() {
        for (w, seq) in [(0, a), (1, b)] {
            if let Some(bad) = seq.iter().find(|&&l| l == 0 || l > phi.len()) {
                return Err(invalid(format!("/shuffle/pairs/{k}/{w}"), format!("label {bad} outside 1..={}", phi.len())));
            }
        }
    }
    if s.points.is_empty() {
        return Err(invalid("/shuffle/points", "at least one point is required"));
    }
    if let Some(k) = s.points.iter().position(|&x| !(x >= 0.0 && x.is_finite())) {
        return Err(invalid(format!("/shuffle/points/{k}"), "points must be finite and nonnegative"));
    }
    if s.max_len == 0 {
        return Err(invalid("/shuffle/max_len", "must be at least 1"));
    }
    Ok((phi, s))
}

pub fn identities_job(cfg: &JobConfig) -> Result<IdentitiesConfig, ConfigError> {
    let c = cfg.identities.clone().unwrap_or_default();
    if c.cofactor_max_size > 8 {
        return Err(invalid("/identities/cofactor_max_size", "at most 8 (all subsets are enumerated)"));
    }
    for (k, g) in c.groups.iter().enumerate() {
        let dim = if g.group == GroupName::SoOdd { 2 * g.n + 1 } else { 2 * g.n };
        if g.n == 0 || dim > 9 {
            return Err(invalid(format!("/identities/groups/{k}/n"), "dimension must lie in 2..=9"));
        }
    }
    if c.pairing_max_n > 6 {
        return Err(invalid("/identities/pairing_max_n", "at most 6"));
    }
    Ok(c)
}
