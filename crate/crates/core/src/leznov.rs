//! Chiral vectors `F(x)` built from generating functions, and the pointwise
//! conditions they have to meet for each family.

use nalgebra::DMatrix;
use thiserror::Error;

use crate::expr::{eval_jet, EvalError, FuncExpr};
use crate::iterint::{slot_jet, IntegrandSet, IterError, IterSeq, IterSystem, Slot};
use crate::jet::{JetError, TaylorJet};
use crate::liedata::{structure_form_f64, Family, FormKind, LieError, LieType};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LeznovError {
    #[error(transparent)]
    Iter(#[from] IterError),
    #[error(transparent)]
    Lie(#[from] LieError),
    #[error("component {component}: {source}")]
    Component { component: usize, source: EvalError },
    #[error("{what}: need {need} functions, got {have}")]
    WrongCount { what: &'static str, need: usize, have: usize },
    #[error("generating function {label} is not positive at x = {x} (value {value})")]
    NonPositive { label: usize, x: f64, value: f64 },
    #[error("need jets of order {need}, requested {have}")]
    OrderTooLow { need: usize, have: usize },
    #[error("vector has {have} components, {lie_type} needs {need}")]
    WrongLength { lie_type: LieType, need: usize, have: usize },
    #[error("index {what} = {value} out of range")]
    Index { what: &'static str, value: usize },
    #[error("jet arithmetic failed: {0}")]
    Jet(#[from] JetError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    LeznovBuilt,
    UserSupplied,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    pub coef: f64,
    pub seq: IterSeq,
}

impl Term {
    pub fn new(coef: f64, labels: Vec<usize>) -> Self {
        Term { coef, seq: IterSeq::new(labels) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Component {
    /// `prefactor * sum(coef * I(seq))`; an empty list is the zero function.
    Integrals(Vec<Term>),
    /// A closed-form function, not scaled by the prefactor.
    Explicit(FuncExpr),
}

/// Additive `eps * expr` on one component, for negative controls.
#[derive(Debug, Clone, PartialEq)]
pub struct Perturbation {
    pub component: usize,
    pub eps: f64,
    pub expr: FuncExpr,
}

/// A vector of functions of one variable, evaluable to jets at any point of its domain.
#[derive(Debug, Clone)]
pub struct ChiralVector {
    lie_type: Option<LieType>,
    integrands: IntegrandSet,
    /// `f_0 = prod phi_L^{e_L}`; all zero means `f_0 = 1`.
    prefactor: Vec<f64>,
    components: Vec<Component>,
    perturbations: Vec<Perturbation>,
    provenance: Provenance,
}

fn check_positive(phis: &IntegrandSet, exponents: &[f64]) -> Result<(), LeznovError> {
    const SAMPLES: usize = 256;
    for (l, &e) in exponents.iter().enumerate() {
        if e == 0.0 {
            continue;
        }
        for k in 0..=SAMPLES {
            let x = phis.x_max() * k as f64 / SAMPLES as f64;
            let value = phis.funcs()[l]
                .eval(x)
                .map_err(|source| IterError::Integrand { label: l + 1, x, source })?;
            if value <= 0.0 {
                return Err(LeznovError::NonPositive { label: l + 1, x, value });
            }
        }
    }
    Ok(())
}

fn run(a: usize, b: usize) -> Vec<usize> {
    IterSeq::run(a, b).0
}

fn cat(parts: &[&[usize]]) -> Vec<usize> {
    parts.iter().flat_map(|p| p.iter().copied()).collect()
}

fn single(coef: f64, labels: Vec<usize>) -> Component {
    Component::Integrals(vec![Term::new(coef, labels)])
}

fn sign(k: usize) -> f64 {
    if k % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Components of the `2n`-vector over `2n-2` labels, before any folding.
fn d_components(n: usize) -> Vec<Component> {
    let base = run(1, n - 2);
    let mut comps: Vec<Component> = (0..=n - 2).map(|p| single(1.0, run(1, p))).collect();
    comps.push(single(1.0, cat(&[&base, &[n - 1]])));
    comps.push(single(1.0, cat(&[&base, &[n]])));
    for p in n + 1..2 * n {
        let tail: Vec<usize> = (n + 1..p).collect();
        comps.push(Component::Integrals(vec![
            Term::new(1.0, cat(&[&base, &[n - 1, n], &tail])),
            Term::new(1.0, cat(&[&base, &[n, n - 1], &tail])),
        ]));
    }
    comps
}

impl ChiralVector {
    /// The family vector built from `n` generating functions.
    pub fn build(lt: LieType, phis: IntegrandSet) -> Result<Self, LeznovError> {
        let n = lt.rank();
        if phis.len() != n {
            return Err(LeznovError::WrongCount { what: "generating functions", need: n, have: phis.len() });
        }
        let (prefactor, components) = match lt.family() {
            Family::A => {
                let e = (1..=n).map(|l| -((n + 1 - l) as f64) / (n + 1) as f64).collect();
                (e, (0..=n).map(|i| single(1.0, run(1, i))).collect())
            }
            Family::C => {
                let mut e = vec![-1.0; n];
                e[n - 1] = -0.5;
                let mut comps: Vec<Component> = (0..n).map(|i| single(sign(n - i), run(1, i))).collect();
                for i in n..=2 * n - 2 {
                    comps.push(single(1.0, cat(&[&run(1, n), &run(n - 1, i - n + 1)])));
                }
                comps.push(single(1.0, run(1, n)));
                (e, comps)
            }
            Family::B => {
                let mut comps: Vec<Component> = (0..n).map(|i| single(sign(n - i), run(1, i))).collect();
                for i in n..=2 * n - 2 {
                    comps.push(single(1.0, cat(&[&run(1, n), &run(n, i - n + 1)])));
                }
                comps.push(single(1.0, cat(&[&run(1, n), &[n]])));
                comps.push(single(1.0, run(1, n)));
                (vec![-1.0; n], comps)
            }
            Family::D => {
                let mut e = vec![-1.0; n];
                e[n - 2] = -0.5;
                e[n - 1] = -0.5;
                let fold = |l: usize| if l <= n { l } else { 2 * n - 1 - l };
                let comps = d_components(n).into_iter().map(|c| relabel_component(c, fold)).collect();
                (e, comps)
            }
        };
        check_positive(&phis, &prefactor)?;
        Ok(ChiralVector {
            lie_type: Some(lt),
            integrands: phis,
            prefactor,
            components,
            perturbations: Vec::new(),
            provenance: Provenance::LeznovBuilt,
        })
    }

    /// `(prod phi)^{-1/2} (1, I(1), I(12), .., I(1->n))` over `n` functions.
    pub fn line_vector(phis: IntegrandSet) -> Result<Self, LeznovError> {
        let n = phis.len();
        let prefactor = vec![-0.5; n];
        check_positive(&phis, &prefactor)?;
        Ok(ChiralVector {
            lie_type: None,
            integrands: phis,
            prefactor,
            components: (0..=n).map(|i| single(1.0, run(1, i))).collect(),
            perturbations: Vec::new(),
            provenance: Provenance::LeznovBuilt,
        })
    }

    /// The unfolded `2n`-vector over `2n-2` functions, scaled by `(prod phi)^{-1/2}`.
    pub fn branched_vector(phis: IntegrandSet) -> Result<Self, LeznovError> {
        let m = phis.len();
        if m < 4 || m % 2 == 1 {
            return Err(LeznovError::WrongCount { what: "branched vector (2n-2, n >= 3)", need: m.max(4) + m % 2, have: m });
        }
        let n = m / 2 + 1;
        let prefactor = vec![-0.5; m];
        check_positive(&phis, &prefactor)?;
        Ok(ChiralVector {
            lie_type: None,
            integrands: phis,
            prefactor,
            components: d_components(n),
            perturbations: Vec::new(),
            provenance: Provenance::LeznovBuilt,
        })
    }

    /// A vector given directly by closed forms.
    pub fn user(lt: LieType, exprs: Vec<FuncExpr>, x_max: f64) -> Result<Self, LeznovError> {
        let need = lt.vector_len();
        if exprs.len() != need {
            return Err(LeznovError::WrongLength { lie_type: lt, need, have: exprs.len() });
        }
        Ok(ChiralVector {
            lie_type: Some(lt),
            integrands: IntegrandSet::new(Vec::new(), x_max),
            prefactor: Vec::new(),
            components: exprs.into_iter().map(Component::Explicit).collect(),
            perturbations: Vec::new(),
            provenance: Provenance::UserSupplied,
        })
    }

    /// Raw integral vector with no prefactor (used for the delayed vectors).
    pub fn from_components(phis: IntegrandSet, components: Vec<Component>) -> Self {
        ChiralVector {
            lie_type: None,
            integrands: phis,
            prefactor: Vec::new(),
            components,
            perturbations: Vec::new(),
            provenance: Provenance::LeznovBuilt,
        }
    }

    pub fn perturbed(mut self, p: Perturbation) -> Result<Self, LeznovError> {
        if p.component >= self.components.len() {
            return Err(LeznovError::Index { what: "perturbed component", value: p.component });
        }
        self.perturbations.push(p);
        Ok(self)
    }

    /// Same vector with each label `L` replaced by `map(L)` in every integral.
    pub fn swapped(&self, map: impl Fn(usize) -> usize + Copy) -> Self {
        let mut out = self.clone();
        out.integrands = self.integrands.relabeled(self.integrands.len(), map);
        out
    }

    pub fn with_step(&self, step: f64) -> Result<Self, LeznovError> {
        let mut out = self.clone();
        out.integrands = out.integrands.with_step(step)?;
        Ok(out)
    }

    pub fn lie_type(&self) -> Option<LieType> {
        self.lie_type
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn integrands(&self) -> &IntegrandSet {
        &self.integrands
    }

    fn prefactor_jet(&self, phi_jets: &[TaylorJet], at: f64, order: usize) -> Result<TaylorJet, LeznovError> {
        let mut acc = TaylorJet::constant(at, 1.0, order);
        for (l, &e) in self.prefactor.iter().enumerate() {
            if e == 0.0 {
                continue;
            }
            let p = phi_jets[l].powf(e).map_err(|_| LeznovError::NonPositive {
                label: l + 1,
                x: at,
                value: phi_jets[l].value(),
            })?;
            acc = acc.mul(&p)?;
        }
        Ok(acc)
    }

    /// Jets of every component at each point (any order of points), `[point][component]`.
    pub fn jets(&self, points: &[f64], order: usize) -> Result<Vec<Vec<TaylorJet>>, LeznovError> {
        let mut sys = IterSystem::new();
        let m = self.integrands.len();
        let mut slots: Vec<Vec<(f64, Slot)>> = Vec::with_capacity(self.components.len());
        for c in &self.components {
            let mut v = Vec::new();
            if let Component::Integrals(terms) = c {
                for t in terms {
                    v.push((t.coef, sys.add_seq(&t.seq, m)?));
                }
            }
            slots.push(v);
        }
        let mut idx: Vec<usize> = (0..points.len()).collect();
        idx.sort_by(|&a, &b| points[a].total_cmp(&points[b]));
        let sorted: Vec<f64> = idx.iter().map(|&i| points[i]).collect();
        let values = if sys.is_empty() {
            vec![Vec::new(); sorted.len()]
        } else {
            sys.sweep(&self.integrands, &sorted, self.integrands.step())?
        };

        let mut out = vec![Vec::new(); points.len()];
        for (k, &x) in sorted.iter().enumerate() {
            let phi_jets = if m > 0 { self.integrands.jets(x, order)? } else { Vec::new() };
            let node_jets = sys.jets(&values[k], &phi_jets, order);
            let f0 = if m > 0 { Some(self.prefactor_jet(&phi_jets, x, order)?) } else { None };
            let mut row = Vec::with_capacity(self.components.len());
            for (ci, c) in self.components.iter().enumerate() {
                let jet = match c {
                    Component::Explicit(e) => {
                        eval_jet(e, x, order).map_err(|source| LeznovError::Component { component: ci, source })?
                    }
                    Component::Integrals(_) => {
                        let mut acc = TaylorJet::zero(x, order);
                        for &(coef, slot) in &slots[ci] {
                            acc = acc.add(&slot_jet(slot, &node_jets, x, order).scale(coef))?;
                        }
                        match &f0 {
                            Some(f) => acc.mul(f)?,
                            None => acc,
                        }
                    }
                };
                row.push(jet);
            }
            for p in &self.perturbations {
                let d = eval_jet(&p.expr, x, order)
                    .map_err(|source| LeznovError::Component { component: p.component, source })?;
                row[p.component] = row[p.component].add(&d.scale(p.eps))?;
            }
            out[idx[k]] = row;
        }
        Ok(out)
    }

    /// Derivative rows `F^{(0..=order)}` at `x`, as a `(order+1) x len` matrix.
    pub fn derivative_matrix(&self, x: f64, order: usize) -> Result<DMatrix<f64>, LeznovError> {
        let jets = self.jets(&[x], order)?.remove(0);
        Ok(derivative_rows(&jets, order))
    }

    /// Largest change of any component value when the quadrature step is halved.
    pub fn quadrature_estimate(&self, points: &[f64]) -> Result<f64, LeznovError> {
        let coarse = self.jets(points, 0)?;
        let fine = self.with_step(0.5 * self.integrands.step())?.jets(points, 0)?;
        Ok(coarse
            .iter()
            .flatten()
            .zip(fine.iter().flatten())
            .map(|(a, b)| (a.value() - b.value()).abs())
            .fold(0.0, f64::max))
    }
}

fn relabel_component(c: Component, map: impl Fn(usize) -> usize) -> Component {
    match c {
        Component::Integrals(terms) => Component::Integrals(
            terms.into_iter().map(|t| Term { coef: t.coef, seq: t.seq.relabel(&map) }).collect(),
        ),
        other => other,
    }
}

/// Rows `k = 0..=order` hold the k-th derivatives of the components.
pub fn derivative_rows(jets: &[TaylorJet], order: usize) -> DMatrix<f64> {
    DMatrix::from_fn(order + 1, jets.len(), |k, c| jets[c].derivative(k).unwrap_or(0.0))
}

/// `X M Y^T` for row vectors.
pub fn pair(form: &DMatrix<f64>, x: &[f64], y: &[f64]) -> f64 {
    let mut s = 0.0;
    for (i, &xi) in x.iter().enumerate() {
        if xi == 0.0 {
            continue;
        }
        for (j, &yj) in y.iter().enumerate() {
            let m = form[(i, j)];
            if m != 0.0 {
                s += xi * m * yj;
            }
        }
    }
    s
}

pub fn row(m: &DMatrix<f64>, i: usize) -> Vec<f64> {
    m.row(i).iter().copied().collect()
}

/// The invariant form a family vector is paired with.
pub fn family_form(lt: LieType) -> Option<DMatrix<f64>> {
    let n = lt.rank();
    match lt.family() {
        Family::A => None,
        Family::C => Some(structure_form_f64(FormKind::Omega, n)),
        Family::B => Some(structure_form_f64(FormKind::ThetaOdd, n)),
        Family::D => Some(structure_form_f64(FormKind::K, n)),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionResidual {
    pub id: String,
    pub max_residual: f64,
}

/// Highest derivative the family conditions involve.
pub fn condition_order(lt: LieType) -> usize {
    match lt.family() {
        Family::D => lt.rank() - 1,
        _ => lt.rank(),
    }
}

/// Worst absolute deviation of every family condition over the samples.
pub fn verify_conditions(
    v: &ChiralVector,
    lt: LieType,
    x_samples: &[f64],
    order: usize,
) -> Result<Vec<ConditionResidual>, LeznovError> {
    let need = condition_order(lt);
    if order < need {
        return Err(LeznovError::OrderTooLow { need, have: order });
    }
    if v.len() != lt.vector_len() {
        return Err(LeznovError::WrongLength { lie_type: lt, need: lt.vector_len(), have: v.len() });
    }
    let n = lt.rank();
    let jets = v.jets(x_samples, order)?;
    let mut out: Vec<ConditionResidual> = Vec::new();
    let mut record = |id: String, r: f64| match out.iter_mut().find(|c| c.id == id) {
        Some(c) => c.max_residual = c.max_residual.max(r),
        None => out.push(ConditionResidual { id, max_residual: r }),
    };
    for pj in &jets {
        let d = derivative_rows(pj, order);
        match lt.family() {
            Family::A => {
                let w = d.rows(0, n + 1).into_owned().determinant();
                record("wronskian".into(), (w - 1.0).abs());
            }
            Family::C => {
                let om = structure_form_f64(FormKind::Omega, n);
                for i in 0..n - 1 {
                    record(format!("c({i},{})=0", i + 1), pair(&om, &row(&d, i), &row(&d, i + 1)).abs());
                }
                record(format!("c({},{n})=-1", n - 1), (pair(&om, &row(&d, n - 1), &row(&d, n)) + 1.0).abs());
            }
            Family::B => {
                let th = structure_form_f64(FormKind::ThetaOdd, n);
                for i in 0..n {
                    record(format!("b({i},{i})=0"), pair(&th, &row(&d, i), &row(&d, i)).abs());
                }
                record(format!("b({n},{n})=1"), (pair(&th, &row(&d, n), &row(&d, n)) - 1.0).abs());
            }
            Family::D => {
                let k = structure_form_f64(FormKind::K, n);
                for i in 0..n {
                    for j in i..n {
                        if i + j < 2 * n - 2 {
                            record(format!("k({i},{j})=0"), pair(&k, &row(&d, i), &row(&d, j)).abs());
                        }
                    }
                }
                let want = sign(n - 1) * 2.0;
                record(
                    format!("k({},{})={}", n - 1, n - 1, want),
                    (pair(&k, &row(&d, n - 1), &row(&d, n - 1)) - want).abs(),
                );
            }
        }
    }
    Ok(out)
}

/// Worst deviation of the extended symplectic chain: `C(i,j) = 0` for `i+j <= 2n-2`,
/// `C(i,2n-1-i) = (-1)^{n-i}`, `C(i,2n-i) = 0`, over `0 <= i <= j`.
pub fn c_chain_residual(v: &ChiralVector, lt: LieType, x_samples: &[f64]) -> Result<f64, LeznovError> {
    let n = lt.rank();
    let order = 2 * n;
    let om = structure_form_f64(FormKind::Omega, n);
    let mut worst = 0.0f64;
    for pj in v.jets(x_samples, order)? {
        let d = derivative_rows(&pj, order);
        for i in 0..=order {
            for j in i..=order - i {
                let c = pair(&om, &row(&d, i), &row(&d, j));
                let want = if i + j == 2 * n - 1 { -sign(n - 1 - i) } else { 0.0 };
                worst = worst.max((c - want).abs());
            }
        }
    }
    Ok(worst)
}
