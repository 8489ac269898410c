//! Iterated integrals `I(a_1..a_k)(x)` anchored at 0.
//!
//! Every integral satisfies `d/dx I(a_1..a_k) = phi_{a_1} I(a_2..a_k)`, so a set
//! of sequences reduces to a triangular linear ODE system over their distinct
//! suffixes. Values come from one fixed-step RK4 sweep over sorted points;
//! higher Taylor coefficients follow exactly from the same recursion.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

use crate::expr::{eval_jet, EvalError, FuncExpr};
use crate::jet::TaylorJet;

/// Number of RK4 steps across the domain when no step is configured.
pub const DEFAULT_STEPS: usize = 4096;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IterError {
    #[error("label {label} does not name an integrand (have {count})")]
    UnknownLabel { label: usize, count: usize },
    #[error("need {need} integrands, have {have}")]
    NotEnoughIntegrands { need: usize, have: usize },
    #[error("point {x} lies outside the integration domain [0, {x_max}]")]
    OutOfDomain { x: f64, x_max: f64 },
    #[error("query points must be sorted ascending")]
    Unsorted,
    #[error("integrand {label} failed at x = {x}: {source}")]
    Integrand { label: usize, x: f64, source: EvalError },
    #[error("invalid quadrature step {0}")]
    BadStep(f64),
}

/// Labels `a_1..a_k` (1-based) of an iterated integral; empty means `I = 1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct IterSeq(pub Vec<usize>);

impl IterSeq {
    pub fn new(labels: Vec<usize>) -> Self {
        IterSeq(labels)
    }

    pub fn empty() -> Self {
        IterSeq(Vec::new())
    }

    /// `a -> b`, ascending or descending, inclusive; empty when `a = 0` and `b = 0`.
    pub fn run(a: usize, b: usize) -> Self {
        if a == 0 || b == 0 {
            return IterSeq::empty();
        }
        if a <= b {
            IterSeq((a..=b).collect())
        } else {
            IterSeq((b..=a).rev().collect())
        }
    }

    pub fn labels(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn concat(&self, other: &IterSeq) -> IterSeq {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        IterSeq(v)
    }

    /// Relabel through `map` (1-based in, 1-based out).
    pub fn relabel(&self, map: impl Fn(usize) -> usize) -> IterSeq {
        IterSeq(self.0.iter().map(|&a| map(a)).collect())
    }
}

impl fmt::Display for IterSeq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|a| a.to_string()).collect();
        write!(f, "I({})", parts.join(","))
    }
}

/// The integrands `phi_1..phi_m` on `[0, x_max]`, with the RK4 step used for them.
#[derive(Debug, Clone)]
pub struct IntegrandSet {
    funcs: Vec<FuncExpr>,
    x_max: f64,
    step: f64,
}

impl IntegrandSet {
    pub fn new(funcs: Vec<FuncExpr>, x_max: f64) -> Self {
        let x_max = x_max.abs();
        let step = if x_max > 0.0 { x_max / DEFAULT_STEPS as f64 } else { 1.0 / DEFAULT_STEPS as f64 };
        IntegrandSet { funcs, x_max, step }
    }

    pub fn with_step(mut self, step: f64) -> Result<Self, IterError> {
        if !(step.is_finite() && step > 0.0) {
            return Err(IterError::BadStep(step));
        }
        self.step = step;
        Ok(self)
    }

    pub fn funcs(&self) -> &[FuncExpr] {
        &self.funcs
    }

    pub fn len(&self) -> usize {
        self.funcs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.funcs.is_empty()
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    /// New set whose label `L` is this set's label `map(L)`.
    pub fn relabeled(&self, count: usize, map: impl Fn(usize) -> usize) -> IntegrandSet {
        IntegrandSet {
            funcs: (1..=count).map(|l| self.funcs[map(l) - 1].clone()).collect(),
            x_max: self.x_max,
            step: self.step,
        }
    }

    fn eval(&self, label: usize, x: f64) -> Result<f64, IterError> {
        self.funcs[label]
            .eval(x)
            .map_err(|source| IterError::Integrand { label: label + 1, x, source })
    }

    /// Jets of every integrand at `x`.
    pub fn jets(&self, x: f64, order: usize) -> Result<Vec<TaylorJet>, IterError> {
        self.funcs
            .iter()
            .enumerate()
            .map(|(i, f)| {
                eval_jet(f, x, order).map_err(|source| IterError::Integrand { label: i + 1, x, source })
            })
            .collect()
    }

    fn check_point(&self, x: f64) -> Result<(), IterError> {
        let slack = 1e-12 * self.x_max.max(1.0);
        if !(x.is_finite() && x >= -slack && x <= self.x_max + slack) {
            return Err(IterError::OutOfDomain { x, x_max: self.x_max });
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct Node {
    label: usize,
    factors: Vec<usize>,
}

/// Triangular ODE system `s_k' = phi_{label_k} * prod(s_f for f in factors_k)`, `s_k(0) = 0`.
///
/// Suffix states are shared between sequences; a node's factors always precede it.
#[derive(Debug, Clone, Default)]
pub struct IterSystem {
    nodes: Vec<Node>,
    suffixes: HashMap<Vec<usize>, usize>,
}

/// A handle into an [`IterSystem`]: either the constant 1 or a state index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slot {
    One,
    State(usize),
}

impl IterSystem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Register `seq` (labels checked against `count` integrands).
    pub fn add_seq(&mut self, seq: &IterSeq, count: usize) -> Result<Slot, IterError> {
        for &a in seq.labels() {
            if a == 0 || a > count {
                return Err(IterError::UnknownLabel { label: a, count });
            }
        }
        let labels = seq.labels();
        let mut slot = Slot::One;
        for start in (0..labels.len()).rev() {
            let key = labels[start..].to_vec();
            let idx = match self.suffixes.get(&key) {
                Some(&i) => i,
                None => {
                    let factors = match slot {
                        Slot::One => vec![],
                        Slot::State(t) => vec![t],
                    };
                    self.nodes.push(Node { label: labels[start] - 1, factors });
                    let i = self.nodes.len() - 1;
                    self.suffixes.insert(key, i);
                    i
                }
            };
            slot = Slot::State(idx);
        }
        Ok(slot)
    }

    /// Add the state `int_0^x phi_label * prod(slots)`.
    pub fn add_product(&mut self, label: usize, slots: &[Slot], count: usize) -> Result<Slot, IterError> {
        if label == 0 || label > count {
            return Err(IterError::UnknownLabel { label, count });
        }
        let factors = slots
            .iter()
            .filter_map(|s| match s {
                Slot::One => None,
                Slot::State(i) => Some(*i),
            })
            .collect();
        self.nodes.push(Node { label: label - 1, factors });
        Ok(Slot::State(self.nodes.len() - 1))
    }

    fn used_labels(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.nodes.iter().map(|n| n.label).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    fn rhs(&self, phi: &[f64], s: &[f64], out: &mut [f64]) {
        for (k, node) in self.nodes.iter().enumerate() {
            let mut v = phi[node.label];
            for &f in &node.factors {
                v *= s[f];
            }
            out[k] = v;
        }
    }

    /// State values at each sorted point, integrating from 0 with step at most `h`.
    pub fn sweep(&self, phis: &IntegrandSet, points: &[f64], h: f64) -> Result<Vec<Vec<f64>>, IterError> {
        if !(h.is_finite() && h > 0.0) {
            return Err(IterError::BadStep(h));
        }
        for w in points.windows(2) {
            if w[1] < w[0] {
                return Err(IterError::Unsorted);
            }
        }
        for &p in points {
            phis.check_point(p)?;
        }
        let m = self.nodes.len();
        let labels = self.used_labels();
        let mut phi = vec![0.0; phis.len()];
        let eval_phi = |x: f64, phi: &mut [f64]| -> Result<(), IterError> {
            for &l in &labels {
                phi[l] = phis.eval(l, x)?;
            }
            Ok(())
        };

        let mut s = vec![0.0; m];
        let (mut k1, mut k2, mut k3, mut k4, mut tmp) =
            (vec![0.0; m], vec![0.0; m], vec![0.0; m], vec![0.0; m], vec![0.0; m]);
        let mut x = 0.0;
        let mut out = Vec::with_capacity(points.len());
        for &p in points {
            let span = p - x;
            if span > 0.0 && m > 0 {
                let steps = ((span / h) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
                let dt = span / steps as f64;
                for step in 0..steps {
                    let x0 = x + step as f64 * dt;
                    eval_phi(x0, &mut phi)?;
                    self.rhs(&phi, &s, &mut k1);
                    eval_phi(x0 + 0.5 * dt, &mut phi)?;
                    for i in 0..m {
                        tmp[i] = s[i] + 0.5 * dt * k1[i];
                    }
                    self.rhs(&phi, &tmp, &mut k2);
                    for i in 0..m {
                        tmp[i] = s[i] + 0.5 * dt * k2[i];
                    }
                    self.rhs(&phi, &tmp, &mut k3);
                    eval_phi(x0 + dt, &mut phi)?;
                    for i in 0..m {
                        tmp[i] = s[i] + dt * k3[i];
                    }
                    self.rhs(&phi, &tmp, &mut k4);
                    for i in 0..m {
                        s[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
                    }
                }
            }
            if span > 0.0 {
                x = p;
            }
            out.push(s.clone());
        }
        Ok(out)
    }

    /// Sweep at the set's step and at half of it; returns the coarse values and
    /// the largest difference between the two as an error estimate.
    pub fn sweep_with_estimate(
        &self,
        phis: &IntegrandSet,
        points: &[f64],
    ) -> Result<(Vec<Vec<f64>>, f64), IterError> {
        let coarse = self.sweep(phis, points, phis.step())?;
        let fine = self.sweep(phis, points, 0.5 * phis.step())?;
        let est = coarse
            .iter()
            .flatten()
            .zip(fine.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        Ok((coarse, est))
    }

    /// Jets of every state at a point, given the swept values there and the
    /// integrand jets at that point. Only the constant terms carry quadrature error.
    pub fn jets(&self, values: &[f64], phi_jets: &[TaylorJet], order: usize) -> Vec<TaylorJet> {
        let at = phi_jets.first().map(|j| j.base_point()).unwrap_or(0.0);
        let mut out: Vec<TaylorJet> = Vec::with_capacity(self.nodes.len());
        for (k, node) in self.nodes.iter().enumerate() {
            let mut integrand = phi_jets[node.label].truncate(order);
            for &f in &node.factors {
                integrand = integrand.mul(&out[f]).expect("jets share base point and order");
            }
            let mut coeffs = vec![0.0; order + 1];
            coeffs[0] = values[k];
            for j in 0..order {
                coeffs[j + 1] = integrand.coeffs()[j] / (j + 1) as f64;
            }
            out.push(TaylorJet::from_coeffs(at, coeffs));
        }
        out
    }
}

/// Resolve a slot against swept state values.
pub fn slot_value(slot: Slot, values: &[f64]) -> f64 {
    match slot {
        Slot::One => 1.0,
        Slot::State(i) => values[i],
    }
}

pub fn slot_jet(slot: Slot, jets: &[TaylorJet], at: f64, order: usize) -> TaylorJet {
    match slot {
        Slot::One => TaylorJet::constant(at, 1.0, order),
        Slot::State(i) => jets[i].clone(),
    }
}

/// `I(seq)` at each sorted point.
pub fn eval_iterseq(phis: &IntegrandSet, seq: &IterSeq, points: &[f64]) -> Result<Vec<f64>, IterError> {
    let mut sys = IterSystem::new();
    let slot = sys.add_seq(seq, phis.len())?;
    let vals = sys.sweep(phis, points, phis.step())?;
    Ok(vals.iter().map(|v| slot_value(slot, v)).collect())
}

/// Jet of `I(seq)` at `x`.
pub fn lift_iterseq_jet(
    phis: &IntegrandSet,
    seq: &IterSeq,
    x: f64,
    order: usize,
) -> Result<TaylorJet, IterError> {
    let mut sys = IterSystem::new();
    let slot = sys.add_seq(seq, phis.len())?;
    let vals = sys.sweep(phis, &[x], phis.step())?;
    let phi_jets = phis.jets(x, order)?;
    let jets = sys.jets(&vals[0], &phi_jets, order);
    Ok(slot_jet(slot, &jets, x, order))
}

fn tail(seq: &IterSeq) -> IterSeq {
    IterSeq(seq.labels()[1..].to_vec())
}

/// `|I(a) I(b) - int phi_{a_1} I(a_2..) I(b) - int phi_{b_1} I(a) I(b_2..)|` at `x`.
pub fn check_shuffle_product(
    phis: &IntegrandSet,
    a: &IterSeq,
    b: &IterSeq,
    x: f64,
) -> Result<f64, IterError> {
    if a.is_empty() || b.is_empty() {
        return Ok(0.0);
    }
    let m = phis.len();
    let mut sys = IterSystem::new();
    let ia = sys.add_seq(a, m)?;
    let ib = sys.add_seq(b, m)?;
    let ta = sys.add_seq(&tail(a), m)?;
    let tb = sys.add_seq(&tail(b), m)?;
    let p1 = sys.add_product(a.labels()[0], &[ta, ib], m)?;
    let p2 = sys.add_product(b.labels()[0], &[ia, tb], m)?;
    let vals = sys.sweep(phis, &[x], phis.step())?;
    let v = &vals[0];
    let lhs = slot_value(ia, v) * slot_value(ib, v);
    Ok((lhs - slot_value(p1, v) - slot_value(p2, v)).abs())
}

/// The alternating sum `sum_i (-1)^i I(1->i) I(n->i+1)` over the first `n` integrands.
pub fn alternating_sum(phis: &IntegrandSet, n: usize, x: f64) -> Result<f64, IterError> {
    if n > phis.len() {
        return Err(IterError::NotEnoughIntegrands { need: n, have: phis.len() });
    }
    if n == 0 {
        return Ok(1.0);
    }
    let mut sys = IterSystem::new();
    let mut pairs = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let up = sys.add_seq(&IterSeq::run(if i == 0 { 0 } else { 1 }, i), n)?;
        let down = sys.add_seq(&IterSeq::run(if i == n { 0 } else { n }, i + 1), n)?;
        pairs.push((up, down));
    }
    let vals = sys.sweep(phis, &[x], phis.step())?;
    let v = &vals[0];
    Ok(pairs
        .iter()
        .enumerate()
        .map(|(i, &(u, d))| {
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            sign * slot_value(u, v) * slot_value(d, v)
        })
        .sum())
}

/// Residual of the alternating-sum identity; `n = 0` checks nothing and returns 0.
pub fn check_alternating_sum(phis: &IntegrandSet, n: usize, x: f64) -> Result<f64, IterError> {
    let a = alternating_sum(phis, n, x)?;
    if n == 0 {
        return Ok((a - 1.0).abs());
    }
    Ok(a.abs())
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::expr::parse_expr;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    pub(crate) fn set(srcs: &[&str], x_max: f64) -> IntegrandSet {
        IntegrandSet::new(srcs.iter().map(|s| parse_expr(s).unwrap()).collect(), x_max)
    }

    /// Nested trapezoid quadrature on a fine uniform grid with one Richardson step.
    pub(crate) fn nested_quadrature(phis: &IntegrandSet, seq: &[usize], x: f64) -> f64 {
        let run = |n: usize| {
            let h = x / n as f64;
            let grid: Vec<f64> = (0..=n).map(|i| i as f64 * h).collect();
            let mut s = vec![1.0; n + 1];
            for &a in seq.iter().rev() {
                let f: Vec<f64> = grid.iter().zip(&s).map(|(&t, &v)| phis.funcs()[a - 1].eval(t).unwrap() * v).collect();
                let mut acc = vec![0.0; n + 1];
                for i in 1..=n {
                    acc[i] = acc[i - 1] + 0.5 * h * (f[i - 1] + f[i]);
                }
                s = acc;
            }
            s[n]
        };
        let (c, f) = (run(4000), run(8000));
        (4.0 * f - c) / 3.0
    }

    #[test]
    fn constant_integrand() {
        let phis = set(&["1"], 2.0);
        let v = eval_iterseq(&phis, &IterSeq::new(vec![1]), &[0.0, 1.0, 2.0]).unwrap();
        for (got, want) in v.iter().zip([0.0, 1.0, 2.0]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-13);
        }
    }

    #[test]
    fn closed_form_pairs() {
        let phis = set(&["1", "t"], 1.0);
        let i12 = eval_iterseq(&phis, &IterSeq::new(vec![1, 2]), &[1.0]).unwrap()[0];
        let i21 = eval_iterseq(&phis, &IterSeq::new(vec![2, 1]), &[1.0]).unwrap()[0];
        assert_abs_diff_eq!(i12, 1.0 / 6.0, epsilon = 1e-13);
        assert_abs_diff_eq!(i21, 1.0 / 3.0, epsilon = 1e-13);
    }

    #[test]
    fn empty_sequence_is_one() {
        let phis = set(&["1"], 1.0);
        let v = eval_iterseq(&phis, &IterSeq::empty(), &[0.0, 0.3, 1.0]).unwrap();
        assert_eq!(v, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn jet_examples() {
        let phis = set(&["1"], 2.0);
        let j = lift_iterseq_jet(&phis, &IterSeq::new(vec![1]), 2.0, 2).unwrap();
        assert_abs_diff_eq!(j.coeffs()[0], 2.0, epsilon = 1e-13);
        assert_eq!(&j.coeffs()[1..], &[1.0, 0.0]);

        let phis = set(&["1", "t"], 1.0);
        let j = lift_iterseq_jet(&phis, &IterSeq::new(vec![2, 1]), 1.0, 1).unwrap();
        assert_abs_diff_eq!(j.coeffs()[0], 1.0 / 3.0, epsilon = 1e-13);
        assert_abs_diff_eq!(j.coeffs()[1], 1.0, epsilon = 1e-13);
        // x^3/3 has second derivative 2x, third 2
        let j = lift_iterseq_jet(&phis, &IterSeq::new(vec![2, 1]), 1.0, 3).unwrap();
        assert_abs_diff_eq!(j.derivative(2).unwrap(), 2.0, epsilon = 1e-13);
        assert_abs_diff_eq!(j.derivative(3).unwrap(), 2.0, epsilon = 1e-13);
    }

    #[test]
    fn order_zero_jet_matches_values() {
        let phis = set(&["1 + t^2", "exp(-t)", "2 + sin(t)"], 1.5);
        let seq = IterSeq::new(vec![3, 1, 1, 2]);
        let v = eval_iterseq(&phis, &seq, &[1.2]).unwrap()[0];
        let j = lift_iterseq_jet(&phis, &seq, 1.2, 0).unwrap();
        assert_eq!(j.coeffs(), &[v]);
    }

    #[test]
    fn repeated_labels_are_not_collapsed() {
        let phis = set(&["1", "1", "1"], 1.0);
        let i33 = eval_iterseq(&phis, &IterSeq::new(vec![3, 3]), &[1.0]).unwrap()[0];
        let i3 = eval_iterseq(&phis, &IterSeq::run(3, 3), &[1.0]).unwrap()[0];
        assert_abs_diff_eq!(i33, 0.5, epsilon = 1e-13);
        assert_abs_diff_eq!(i3, 1.0, epsilon = 1e-13);
    }

    #[test]
    fn runs() {
        assert_eq!(IterSeq::run(1, 3).labels(), &[1, 2, 3]);
        assert_eq!(IterSeq::run(3, 1).labels(), &[3, 2, 1]);
        assert!(IterSeq::run(1, 0).is_empty());
        assert_eq!(IterSeq::new(vec![1, 2]).to_string(), "I(1,2)");
    }

    #[test]
    fn errors() {
        let phis = set(&["1"], 1.0);
        assert!(matches!(
            eval_iterseq(&phis, &IterSeq::new(vec![2]), &[0.5]),
            Err(IterError::UnknownLabel { label: 2, count: 1 })
        ));
        assert!(matches!(
            eval_iterseq(&phis, &IterSeq::new(vec![1]), &[0.5, 0.2]),
            Err(IterError::Unsorted)
        ));
        assert!(matches!(
            eval_iterseq(&phis, &IterSeq::new(vec![1]), &[1.5]),
            Err(IterError::OutOfDomain { .. })
        ));
        let bad = set(&["log(t - 0.5)"], 1.0);
        match eval_iterseq(&bad, &IterSeq::new(vec![1]), &[1.0]) {
            Err(IterError::Integrand { label: 1, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        assert!(check_alternating_sum(&phis, 2, 0.5).is_err());
    }

    #[test]
    fn shuffle_closed_form() {
        let phis = set(&["1", "t"], 1.0);
        let r = check_shuffle_product(&phis, &IterSeq::new(vec![1]), &IterSeq::new(vec![2]), 1.0).unwrap();
        assert!(r < 1e-13);
        let r = check_shuffle_product(&phis, &IterSeq::empty(), &IterSeq::new(vec![2]), 1.0).unwrap();
        assert_eq!(r, 0.0);
    }

    #[test]
    fn alternating_sum_examples() {
        let phis = set(&["1", "t"], 1.0);
        assert_eq!(check_alternating_sum(&phis, 1, 1.0).unwrap(), 0.0);
        assert!(check_alternating_sum(&phis, 2, 1.0).unwrap() < 1e-14);
        assert_eq!(check_alternating_sum(&phis, 0, 1.0).unwrap(), 0.0);
        let phis = set(&["1.3 + 0.4*sin(2*t)", "2 - t/3", "exp(0.2*t)", "1 + 0.5*cos(t)"], 1.0);
        assert!(check_alternating_sum(&phis, 4, 1.0).unwrap() < 1e-8);
    }

    #[test]
    fn alternating_sum_terms_against_nested_quadrature() {
        let phis = set(&["1.3 + 0.4*sin(2*t)", "2 - t/3", "exp(0.2*t)", "1 + 0.5*cos(t)"], 1.0);
        let n = 4;
        let mut total = 0.0;
        for i in 0..=n {
            let up: Vec<usize> = (1..=i).collect();
            let down: Vec<usize> = (i + 1..=n).rev().collect();
            let u = nested_quadrature(&phis, &up, 1.0);
            let d = nested_quadrature(&phis, &down, 1.0);
            let ru = eval_iterseq(&phis, &IterSeq::new(up), &[1.0]).unwrap()[0];
            let rd = eval_iterseq(&phis, &IterSeq::new(down), &[1.0]).unwrap()[0];
            assert_abs_diff_eq!(u, ru, epsilon = 1e-9);
            assert_abs_diff_eq!(d, rd, epsilon = 1e-9);
            total += if i % 2 == 0 { u * d } else { -u * d };
        }
        assert!(total.abs() < 1e-8);
    }

    #[test]
    fn derivative_track_matches_recursion() {
        let phis = set(&["1 + t^2", "exp(-t)", "2 + sin(t)"], 2.0);
        let seq = IterSeq::new(vec![2, 3, 1]);
        let h = 1e-3;
        let pts = [1.0 - h, 1.0, 1.0 + h];
        let v = eval_iterseq(&phis, &seq, &pts).unwrap();
        let fd = (v[2] - v[0]) / (2.0 * h);
        let tail_v = eval_iterseq(&phis, &IterSeq::new(vec![3, 1]), &[1.0]).unwrap()[0];
        let want = phis.funcs()[1].eval(1.0).unwrap() * tail_v;
        assert_abs_diff_eq!(fd, want, epsilon = 1e-6);
    }

    #[test]
    fn alternating_sum_converges_at_fourth_order() {
        let srcs = ["1 + 0.9*sin(7*t)", "2 + cos(5*t)", "1.5 + sin(9*t)"];
        let coarse = set(&srcs, 2.0).with_step(0.2).unwrap();
        let fine = set(&srcs, 2.0).with_step(0.1).unwrap();
        let seq = IterSeq::new(vec![1, 2, 3]);
        let exact = nested_quadrature(&coarse, &[1, 2, 3], 2.0);
        let ec = (eval_iterseq(&coarse, &seq, &[2.0]).unwrap()[0] - exact).abs();
        let ef = (eval_iterseq(&fine, &seq, &[2.0]).unwrap()[0] - exact).abs();
        assert!(ec / ef > 10.0, "ratio {}", ec / ef);
    }

    #[test]
    fn estimate_is_small_for_smooth_data() {
        let phis = set(&["1 + t", "2 - t/2"], 1.0);
        let mut sys = IterSystem::new();
        sys.add_seq(&IterSeq::new(vec![1, 2, 1]), 2).unwrap();
        let (_, est) = sys.sweep_with_estimate(&phis, &[0.5, 1.0]).unwrap();
        assert!(est < 1e-13);
    }

    fn smooth_set() -> impl Strategy<Value = IntegrandSet> {
        prop::collection::vec((0.5f64..2.0, -0.4f64..0.4, 0.5f64..3.0), 3).prop_map(|ps| {
            let srcs: Vec<String> = ps.iter().map(|(a, b, c)| format!("{a} + {b}*sin({c}*t)")).collect();
            let refs: Vec<&str> = srcs.iter().map(|s| s.as_str()).collect();
            set(&refs, 1.0)
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn shuffle_holds_for_short_sequences(
            phis in smooth_set(),
            a in prop::collection::vec(1usize..=3, 0..=3),
            b in prop::collection::vec(1usize..=3, 0..=3),
        ) {
            let r = check_shuffle_product(&phis, &IterSeq::new(a.clone()), &IterSeq::new(b.clone()), 1.0).unwrap();
            prop_assert!(r <= 1e-8);
            if !a.is_empty() && !b.is_empty() {
                // oracle: product of independently computed nested integrals
                let lhs = nested_quadrature(&phis, &a, 1.0) * nested_quadrature(&phis, &b, 1.0);
                let ia = eval_iterseq(&phis, &IterSeq::new(a), &[1.0]).unwrap()[0];
                let ib = eval_iterseq(&phis, &IterSeq::new(b), &[1.0]).unwrap()[0];
                prop_assert!((lhs - ia * ib).abs() <= 1e-8);
            }
        }
    }
}
