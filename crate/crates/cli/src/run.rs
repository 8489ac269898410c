//! The four commands. Each returns a JSON report; `solve` also returns CSV text.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use toda_core::iterint::{check_alternating_sum, check_shuffle_product, IntegrandSet, IterError, IterSeq};
use toda_core::leznov::{condition_order, verify_conditions, ChiralVector, LeznovError, Perturbation};
use toda_core::liedata::{Family, LieType};
use toda_core::minors::{
    all_subsets, check_cofactor_minor_identity, max_duality_residual, random_group_element, random_matrix,
    reflection, Group, MinorError,
};
use toda_core::pairing::{bilinear_pairing_check, PairingKind};
use toda_core::sampling::random_integrands;
use toda_core::tau::{b_log2_shift, point_report, PointReport, TauError};

use crate::config::{GridJob, GroupName, IdentitiesConfig, JobConfig, ShuffleConfig, Side};

#[derive(Debug, Error)]
pub enum RunError {
    #[error("building the chiral vectors failed: {0}")]
    Build(#[from] LeznovError),
    #[error(transparent)]
    Tau(#[from] TauError),
    #[error(transparent)]
    Iter(#[from] IterError),
    #[error(transparent)]
    Minor(#[from] MinorError),
    #[error("worker pool: {0}")]
    Pool(String),
}

pub fn pool(jobs: usize) -> Result<rayon::ThreadPool, RunError> {
    rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build().map_err(|e| RunError::Pool(e.to_string()))
}

fn vector(lt: LieType, funcs: &[toda_core::expr::FuncExpr], job: &GridJob, side: Side) -> Result<ChiralVector, RunError> {
    let mut set = IntegrandSet::new(funcs.to_vec(), job.domain_max);
    if let Some(h) = job.quad_step {
        set = set.with_step(h)?;
    }
    let mut v = ChiralVector::build(lt, set)?;
    for (s, c, eps, e) in &job.perturb {
        if *s == side {
            v = v.perturbed(Perturbation { component: *c, eps: *eps, expr: e.clone() })?;
        }
    }
    Ok(v)
}

/// Everything evaluated over the grid, in x-major order.
pub struct GridRun {
    pub f: ChiralVector,
    pub g: ChiralVector,
    pub reports: Vec<PointReport>,
    pub branch: Option<f64>,
}

/// Evaluate every grid point on the pool. On the B series the coefficient sign
/// is the one measured at the first nonsingular point in grid order.
pub fn run_grid(job: &GridJob, pool: &rayon::ThreadPool) -> Result<GridRun, RunError> {
    let lt = job.lie_type;
    let f = vector(lt, &job.phi, job, Side::X)?;
    let g = vector(lt, &job.psi, job, Side::Y)?;
    let (fj, gj) = pool.join(|| f.jets(&job.xs, job.order), || g.jets(&job.ys, job.order));
    let (fj, gj) = (fj?, gj?);
    let ny = job.ys.len();
    let eval = |idx: usize, branch: Option<f64>| {
        let (i, k) = (idx / ny, idx % ny);
        point_report(&fj[i], &gj[k], lt, job.xs[i], job.ys[k], branch)
    };
    let total = job.xs.len() * ny;
    let mut reports: Vec<PointReport> =
        pool.install(|| (0..total).into_par_iter().map(|idx| eval(idx, None)).collect::<Result<_, _>>())?;
    let branch = reports.iter().find_map(|r| r.fields.as_ref().and_then(|p| p.branch));
    if let Some(b) = branch {
        let redo: Vec<usize> = (0..total)
            .filter(|&idx| reports[idx].fields.as_ref().is_some_and(|p| p.branch != Some(b)))
            .collect();
        let fixed: Vec<PointReport> =
            pool.install(|| redo.par_iter().map(|&idx| eval(idx, Some(b))).collect::<Result<_, _>>())?;
        for (idx, r) in redo.into_iter().zip(fixed) {
            reports[idx] = r;
        }
    }
    Ok(GridRun { f, g, reports, branch })
}

/// Shortest decimal that reads back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

pub fn solution_csv(lt: LieType, reports: &[PointReport]) -> String {
    let n = lt.rank();
    let mut head = vec!["x".to_string(), "y".to_string()];
    head.extend((1..=n).map(|i| format!("tau_{i}")));
    head.extend((1..=n).map(|i| format!("u_{i}")));
    head.push("excluded".into());
    let mut out = head.join(",");
    out.push('\n');
    for r in reports {
        let mut cells = vec![fmt_f64(r.x), fmt_f64(r.y)];
        cells.extend(r.taus[..n].iter().map(|&t| fmt_f64(t)));
        match &r.fields {
            Some(p) => cells.extend(p.us.iter().map(|&u| fmt_f64(u))),
            None => cells.extend(std::iter::repeat_n(String::new(), n)),
        }
        cells.push(if r.fields.is_some() { "0" } else { "1" }.into());
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

#[derive(Debug, Serialize)]
pub struct SolveSidecar {
    pub command: &'static str,
    pub config: JobConfig,
    pub lie_type: String,
    pub rows: usize,
    pub excluded: usize,
    pub quadrature_estimate: f64,
    pub branch_sign: Option<f64>,
    pub normalization_shift: Option<Vec<f64>>,
}

fn quadrature(run: &GridRun, job: &GridJob) -> Result<f64, RunError> {
    Ok(run.f.quadrature_estimate(&job.xs)?.max(run.g.quadrature_estimate(&job.ys)?))
}

pub fn solve(cfg: &JobConfig, job: &GridJob, pool: &rayon::ThreadPool) -> Result<(String, SolveSidecar), RunError> {
    let run = run_grid(job, pool)?;
    let lt = job.lie_type;
    let csv = solution_csv(lt, &run.reports);
    let sidecar = SolveSidecar {
        command: "solve",
        config: cfg.clone(),
        lie_type: lt.to_string(),
        rows: run.reports.len(),
        excluded: run.reports.iter().filter(|r| r.fields.is_none()).count(),
        quadrature_estimate: quadrature(&run, job)?,
        branch_sign: if lt.family() == Family::B { Some(run.branch.unwrap_or(1.0)) } else { None },
        normalization_shift: (lt.family() == Family::B).then(|| b_log2_shift(lt)),
    };
    Ok((csv, sidecar))
}

#[derive(Debug, Serialize)]
pub struct ConditionEntry {
    pub side: Side,
    pub id: String,
    pub max_residual: f64,
}

#[derive(Debug, Serialize)]
pub struct EquationEntry {
    pub index: usize,
    pub max_residual: f64,
}

#[derive(Debug, Serialize)]
pub struct VerifyReport {
    pub command: &'static str,
    pub lie_type: String,
    pub tol: f64,
    pub points: usize,
    pub excluded_points: usize,
    pub conditions: Vec<ConditionEntry>,
    /// `DD(sigma_i)` against the sigma product, relative.
    pub equations: Vec<EquationEntry>,
    /// `u_xy + c exp(A u)`, absolute.
    pub field_equations: Vec<EquationEntry>,
    /// B only: unit-coefficient form after the log 2 shift.
    pub standard_form_equations: Option<Vec<EquationEntry>>,
    pub recurrence_max_residual: f64,
    pub branch_sign: Option<f64>,
    pub quadrature_estimate: f64,
    pub max_residual: f64,
    pub pass: bool,
}

fn column_max(n: usize, rows: impl Iterator<Item = Vec<f64>>) -> Vec<EquationEntry> {
    let mut worst = vec![0.0f64; n];
    for r in rows {
        for (w, v) in worst.iter_mut().zip(r) {
            *w = w.max(v);
        }
    }
    worst.into_iter().enumerate().map(|(i, m)| EquationEntry { index: i + 1, max_residual: m }).collect()
}

pub fn verify(job: &GridJob, tol: f64, pool: &rayon::ThreadPool) -> Result<VerifyReport, RunError> {
    let lt = job.lie_type;
    let n = lt.rank();
    let run = run_grid(job, pool)?;
    let order = condition_order(lt).max(1);
    let mut conditions = Vec::new();
    for (side, v, pts) in [(Side::X, &run.f, &job.xs), (Side::Y, &run.g, &job.ys)] {
        for c in verify_conditions(v, lt, pts, order)? {
            conditions.push(ConditionEntry { side, id: c.id, max_residual: c.max_residual });
        }
    }
    let fields: Vec<_> = run.reports.iter().filter_map(|r| r.fields.as_ref()).collect();
    let equations = column_max(n, fields.iter().map(|p| p.sigma_residuals.clone()));
    let field_equations = column_max(n, fields.iter().map(|p| p.field_residuals.clone()));
    let standard_form_equations =
        (lt.family() == Family::B).then(|| column_max(n, fields.iter().filter_map(|p| p.shifted_residuals.clone())));
    let recurrence = run.reports.iter().flat_map(|r| r.recurrence.iter().copied()).fold(0.0, f64::max);
    let max_residual = conditions
        .iter()
        .map(|c| c.max_residual)
        .chain(equations.iter().map(|e| e.max_residual))
        .chain(std::iter::once(recurrence))
        .fold(0.0, f64::max);
    Ok(VerifyReport {
        command: "verify",
        lie_type: lt.to_string(),
        tol,
        points: run.reports.len(),
        excluded_points: run.reports.len() - fields.len(),
        conditions,
        equations,
        field_equations,
        standard_form_equations,
        recurrence_max_residual: recurrence,
        branch_sign: if lt.family() == Family::B { Some(run.branch.unwrap_or(1.0)) } else { None },
        quadrature_estimate: quadrature(&run, job)?,
        max_residual,
        pass: max_residual <= tol,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct IdentityEntry {
    pub name: String,
    pub cases: usize,
    pub max_residual: f64,
}

#[derive(Debug, Serialize)]
pub struct IdentitiesReport {
    pub command: &'static str,
    pub seed: u64,
    pub tol: f64,
    pub identities: Vec<IdentityEntry>,
    pub max_residual: f64,
    pub pass: bool,
}

fn group_of(g: GroupName) -> (Group, &'static str) {
    match g {
        GroupName::Sp => (Group::Sp, "Sp"),
        GroupName::SoOdd => (Group::SoOdd, "SO"),
        GroupName::SoEven => (Group::SoEven, "SO"),
    }
}

fn entry(name: impl Into<String>, residuals: &[f64]) -> IdentityEntry {
    IdentityEntry { name: name.into(), cases: residuals.len(), max_residual: residuals.iter().copied().fold(0.0, f64::max) }
}

/// Minor, iterated-integral and pairing identity suites. Sub-seeds are drawn in
/// a fixed order from one ChaCha8 stream, so reports depend only on the seed.
pub fn identities(c: &IdentitiesConfig, seed: u64, tol: f64, pool: &rayon::ThreadPool) -> Result<IdentitiesReport, RunError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();

    let seeds: Vec<u64> = (0..c.cofactor_matrices).map(|_| rng.gen()).collect();
    let max_size = c.cofactor_max_size.max(1);
    let res: Vec<f64> = pool.install(|| {
        seeds
            .par_iter()
            .enumerate()
            .map(|(k, &s)| {
                let a = random_matrix(1 + k % max_size, s);
                all_subsets(a.nrows()).map(|sub| check_cofactor_minor_identity(&a, &sub).residual).fold(0.0, f64::max)
            })
            .collect()
    });
    out.push(entry("cofactor_minor", &res));

    for suite in &c.groups {
        let (group, label) = group_of(suite.group);
        let seeds: Vec<u64> = (0..suite.elements).map(|_| rng.gen()).collect();
        let res: Vec<f64> = pool.install(|| {
            seeds
                .par_iter()
                .enumerate()
                .map(|(k, &s)| {
                    let mut a = random_group_element(group, suite.n, s);
                    if group != Group::Sp && k % 2 == 1 {
                        a = reflection(group, suite.n) * a;
                    }
                    max_duality_residual(&a, group)
                })
                .collect::<Result<_, _>>()
        })?;
        out.push(entry(format!("group_minor_duality {label}({})", group.dim(suite.n)), &res));
    }

    for n in 1..=c.alternating_max_n {
        let seeds: Vec<u64> = (0..c.alternating_draws).map(|_| rng.gen()).collect();
        let res: Vec<f64> = pool.install(|| {
            seeds
                .par_iter()
                .map(|&s| check_alternating_sum(&random_integrands(n, s, 1.0), n, 1.0))
                .collect::<Result<_, _>>()
        })?;
        out.push(entry(format!("alternating_sum n={n}"), &res));
    }

    let phis = random_integrands(3, rng.gen(), 1.0);
    let pairs: Vec<(IterSeq, IterSeq)> = (0..c.shuffle_pairs)
        .map(|_| {
            let mut seq = || {
                let len = rng.gen_range(1..=c.shuffle_max_len.max(1));
                IterSeq::new((0..len).map(|_| rng.gen_range(1..=3)).collect())
            };
            (seq(), seq())
        })
        .collect();
    let res: Vec<f64> = pool.install(|| {
        pairs.par_iter().map(|(a, b)| check_shuffle_product(&phis, a, b, 0.8)).collect::<Result<_, _>>()
    })?;
    out.push(entry("shuffle_product", &res));

    let (mut line, mut zeros, mut branched) = (Vec::new(), Vec::new(), Vec::new());
    for n in 2..=c.pairing_max_n {
        let phis = random_integrands(n, rng.gen(), 1.0);
        for i in 0..=n {
            for j in 0..=n {
                let o = bilinear_pairing_check(PairingKind::JDelayed, &phis, i, j, 0.7, 0)?;
                if i + j > n {
                    zeros.push(o.value.abs());
                } else {
                    line.push(o.deviation());
                    line.push(bilinear_pairing_check(PairingKind::JDerivative, &phis, i, j, 0.7, n)?.deviation());
                }
            }
        }
        if n >= 3 {
            let phis = random_integrands(2 * n - 2, rng.gen(), 1.0);
            for i in 0..2 * n {
                for j in 0..2 * n {
                    branched.push(bilinear_pairing_check(PairingKind::KDelayed, &phis, i, j, 0.7, 0)?.deviation());
                    if i < n && j < n {
                        branched
                            .push(bilinear_pairing_check(PairingKind::KDerivative, &phis, i, j, 0.7, n)?.deviation());
                    }
                }
            }
        }
    }
    out.push(entry("line_pairing", &line));
    out.push(entry("line_structural_zeros", &zeros));
    out.push(entry("branched_pairing", &branched));

    let max_residual = out.iter().map(|e| e.max_residual).fold(0.0, f64::max);
    Ok(IdentitiesReport { command: "identities", seed, tol, identities: out, max_residual, pass: max_residual <= tol })
}

#[derive(Debug, Serialize)]
pub struct ShuffleCase {
    pub a: Vec<usize>,
    pub b: Vec<usize>,
    pub x: f64,
    pub residual: f64,
}

#[derive(Debug, Serialize)]
pub struct ShuffleReport {
    pub command: &'static str,
    pub seed: u64,
    pub tol: f64,
    pub cases: Vec<ShuffleCase>,
    pub max_residual: f64,
    pub pass: bool,
}

pub fn shuffle(
    phi: &[toda_core::expr::FuncExpr],
    s: &ShuffleConfig,
    domain_max: Option<f64>,
    quad_step: Option<f64>,
    seed: u64,
    tol: f64,
    pool: &rayon::ThreadPool,
) -> Result<ShuffleReport, RunError> {
    let reach = s.points.iter().copied().fold(0.0, f64::max);
    let mut set = IntegrandSet::new(phi.to_vec(), domain_max.unwrap_or(reach).max(reach));
    if let Some(h) = quad_step {
        set = set.with_step(h)?;
    }
    let m = phi.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = s.pairs.clone();
    for _ in 0..s.random_pairs {
        let mut seq = || {
            let len = rng.gen_range(1..=s.max_len);
            (0..len).map(|_| rng.gen_range(1..=m)).collect::<Vec<_>>()
        };
        pairs.push((seq(), seq()));
    }
    let jobs: Vec<(Vec<usize>, Vec<usize>, f64)> =
        pairs.iter().flat_map(|(a, b)| s.points.iter().map(move |&x| (a.clone(), b.clone(), x))).collect();
    let cases: Vec<ShuffleCase> = pool.install(|| {
        jobs.into_par_iter()
            .map(|(a, b, x)| {
                let residual = check_shuffle_product(&set, &IterSeq::new(a.clone()), &IterSeq::new(b.clone()), x)?;
                Ok(ShuffleCase { a, b, x, residual })
            })
            .collect::<Result<_, RunError>>()
    })?;
    let max_residual = cases.iter().map(|c| c.residual).fold(0.0, f64::max);
    Ok(ShuffleReport { command: "shuffle", seed, tol, cases, max_residual, pass: max_residual <= tol })
}
