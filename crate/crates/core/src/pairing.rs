//! Skew-diagonal pairings of iterated-integral vectors against their swapped
//! counterparts: the delayed vectors and the derivatives of the scaled vectors.

use crate::iterint::{IntegrandSet, IterSeq};
use crate::leznov::{derivative_rows, pair, row, ChiralVector, Component, LeznovError, Term};
use crate::liedata::{leznov_swap_s, structure_form_f64, FormKind, SwapKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairingKind {
    JDelayed,
    JDerivative,
    KDelayed,
    KDerivative,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairingOutcome {
    pub value: f64,
    pub expected: f64,
}

impl PairingOutcome {
    pub fn deviation(&self) -> f64 {
        (self.value - self.expected).abs()
    }
}

fn seq_range(a: usize, b: usize) -> Vec<usize> {
    if a > b {
        Vec::new()
    } else {
        (a..=b).collect()
    }
}

fn one(labels: Vec<usize>) -> Component {
    Component::Integrals(vec![Term { coef: 1.0, seq: IterSeq::new(labels) }])
}

fn zero() -> Component {
    Component::Integrals(Vec::new())
}

/// `(0,..,0, 1, I(i+1), .., I(i+1 -> n))` with `i` leading zeros.
pub fn line_delayed(n: usize, i: usize) -> Vec<Component> {
    (0..=n)
        .map(|p| if p < i { zero() } else { one(seq_range(i + 1, p)) })
        .collect()
}

/// Delayed vectors of the branched `2n`-vector over labels `1..2n-2`.
///
/// Beyond the branch point the entry at position `p` of `delta_i` is
/// `I(i, .., p-1)`, which is what `d/dx delta_{n-1} = phi_n delta_{n+1}` forces.
pub fn branched_delayed(n: usize, i: usize) -> Vec<Component> {
    let d = 2 * n;
    let mut out = Vec::with_capacity(d);
    for p in 0..d {
        let c = if p < i {
            zero()
        } else if p == i {
            one(Vec::new())
        } else if i <= n - 2 {
            let base = seq_range(i + 1, n - 2);
            let tail = seq_range(n + 1, p.saturating_sub(1));
            if p <= n - 2 {
                one(seq_range(i + 1, p))
            } else if p == n - 1 {
                one([base.clone(), vec![n - 1]].concat())
            } else if p == n {
                one([base.clone(), vec![n]].concat())
            } else {
                Component::Integrals(vec![
                    Term { coef: 1.0, seq: IterSeq::new([base.clone(), vec![n - 1, n], tail.clone()].concat()) },
                    Term { coef: 1.0, seq: IterSeq::new([base, vec![n, n - 1], tail].concat()) },
                ])
            }
        } else if i == n - 1 {
            if p == n {
                zero()
            } else {
                one([vec![n], seq_range(n + 1, p - 1)].concat())
            }
        } else if i == n {
            one([vec![n - 1], seq_range(n + 1, p - 1)].concat())
        } else {
            one(seq_range(i, p - 1))
        };
        out.push(c);
    }
    out
}

fn values_at(v: &ChiralVector, x: f64) -> Result<Vec<f64>, LeznovError> {
    Ok(v.jets(&[x], 0)?.remove(0).iter().map(|j| j.value()).collect())
}

/// Pair a vector (or its derivatives) against the swapped copy, and report the
/// value the pairing propositions predict.
pub fn bilinear_pairing_check(
    kind: PairingKind,
    phis: &IntegrandSet,
    i: usize,
    j: usize,
    x: f64,
    order: usize,
) -> Result<PairingOutcome, LeznovError> {
    let m = phis.len();
    match kind {
        PairingKind::JDelayed | PairingKind::JDerivative => {
            if m < 2 {
                return Err(LeznovError::WrongCount { what: "line pairing", need: 2, have: m });
            }
            let n = m;
            let s = move |l: usize| leznov_swap_s(SwapKind::Line, n, l).expect("label in range");
            let form = structure_form_f64(FormKind::J, n + 1);
            if kind == PairingKind::JDelayed {
                if i > n || j > n {
                    return Err(LeznovError::Index { what: "delay", value: i.max(j) });
                }
                let left = ChiralVector::from_components(phis.clone(), line_delayed(n, i));
                let right = ChiralVector::from_components(phis.relabeled(n, s), line_delayed(n, j));
                let value = pair(&form, &values_at(&left, x)?, &values_at(&right, x)?);
                let expected = if i + j == n { sign(i) } else { 0.0 };
                return Ok(PairingOutcome { value, expected });
            }
            if i + j > n {
                return Err(LeznovError::Index { what: "derivative level i+j", value: i + j });
            }
            let order = order.max(i).max(j);
            let f = ChiralVector::line_vector(phis.clone())?;
            let sf = f.swapped(s);
            let value = derivative_pairing(&f, &sf, &form, i, j, x, order)?;
            let expected = if i + j == n { sign(i) } else { 0.0 };
            Ok(PairingOutcome { value, expected })
        }
        PairingKind::KDelayed | PairingKind::KDerivative => {
            if m < 4 || m % 2 == 1 {
                return Err(LeznovError::WrongCount { what: "branched pairing (2n-2 functions)", need: 4, have: m });
            }
            let n = m / 2 + 1;
            let s = move |l: usize| leznov_swap_s(SwapKind::D, n, l).expect("label in range");
            let form = structure_form_f64(FormKind::K, n);
            if kind == PairingKind::KDelayed {
                if i >= 2 * n || j >= 2 * n {
                    return Err(LeznovError::Index { what: "delay", value: i.max(j) });
                }
                let left = ChiralVector::from_components(phis.clone(), branched_delayed(n, i));
                let right = ChiralVector::from_components(phis.relabeled(m, s), branched_delayed(n, j));
                let value = pair(&form, &values_at(&left, x)?, &values_at(&right, x)?);
                let expected = if i + j == 2 * n - 1 { sign(i.min(j)) } else { 0.0 };
                return Ok(PairingOutcome { value, expected });
            }
            if i > n - 1 || j > n - 1 {
                return Err(LeznovError::Index { what: "derivative", value: i.max(j) });
            }
            let order = order.max(i).max(j);
            let f = ChiralVector::branched_vector(phis.clone())?;
            let sf = f.swapped(s);
            let value = derivative_pairing(&f, &sf, &form, i, j, x, order)?;
            let expected = if i == n - 1 && j == n - 1 { 2.0 * sign(n - 1) } else { 0.0 };
            Ok(PairingOutcome { value, expected })
        }
    }
}

fn derivative_pairing(
    f: &ChiralVector,
    sf: &ChiralVector,
    form: &nalgebra::DMatrix<f64>,
    i: usize,
    j: usize,
    x: f64,
    order: usize,
) -> Result<f64, LeznovError> {
    let a = derivative_rows(&f.jets(&[x], order)?[0], order);
    let b = derivative_rows(&sf.jets(&[x], order)?[0], order);
    Ok(pair(form, &row(&a, i), &row(&b, j)))
}

fn sign(k: usize) -> f64 {
    if k % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::leznov::tests::phis;

    const SRC: [&str; 8] = [
        "1.2 + 0.3*sin(2*t)",
        "0.8 + 0.2*t^2",
        "exp(0.3*t)",
        "1.5 - 0.4*cos(t)",
        "1 + 0.5*t",
        "2 - sin(t)",
        "0.7 + 0.1*t^3",
        "1.1 + 0.2*cos(3*t)",
    ];

    #[test]
    fn line_delayed_examples() {
        let p = phis(&SRC[..2], 1.0);
        let r = bilinear_pairing_check(PairingKind::JDelayed, &p, 0, 2, 0.7, 0).unwrap();
        assert_eq!(r.expected, 1.0);
        assert!(r.deviation() < 1e-12);
        for n in 2..=5 {
            let p = phis(&SRC[..n], 1.0);
            for i in 0..=n {
                for j in 0..=n {
                    let r = bilinear_pairing_check(PairingKind::JDelayed, &p, i, j, 0.9, 0).unwrap();
                    if i + j > n {
                        assert_eq!(r.value, 0.0);
                    } else {
                        assert!(r.deviation() < 1e-9, "n={n} i={i} j={j}: {r:?}");
                    }
                }
            }
        }
    }

    #[test]
    fn line_derivative_levels() {
        for n in 2..=4 {
            let p = phis(&SRC[..n], 1.0);
            for i in 0..=n {
                for j in 0..=n - i {
                    let r = bilinear_pairing_check(PairingKind::JDerivative, &p, i, j, 0.6, 0).unwrap();
                    assert!(r.deviation() < 1e-8, "n={n} i={i} j={j}: {r:?}");
                }
            }
        }
        let p = phis(&SRC[..2], 1.0);
        assert!(bilinear_pairing_check(PairingKind::JDerivative, &p, 2, 1, 0.6, 0).is_err());
    }

    #[test]
    fn branched_delayed_all_pairs() {
        for n in 3..=5 {
            let p = phis(&SRC[..2 * n - 2], 1.0);
            for i in 0..2 * n {
                for j in 0..2 * n {
                    let r = bilinear_pairing_check(PairingKind::KDelayed, &p, i, j, 0.8, 0).unwrap();
                    if i + j > 2 * n - 1 {
                        assert_eq!(r.value, 0.0);
                    }
                    assert!(r.deviation() < 1e-9, "n={n} i={i} j={j}: {r:?}");
                }
            }
        }
    }

    #[test]
    fn delayed_vectors_differentiate_into_each_other() {
        // d/dx delta_{n-1} = phi_n delta_{n+1}: compare first-derivative jets
        let n = 4;
        let p = phis(&SRC[..2 * n - 2], 1.0);
        let x = 0.5;
        let a = ChiralVector::from_components(p.clone(), branched_delayed(n, n - 1)).jets(&[x], 1).unwrap();
        let b = ChiralVector::from_components(p.clone(), branched_delayed(n, n + 1)).jets(&[x], 0).unwrap();
        let phi_n = p.funcs()[n - 1].eval(x).unwrap();
        for (da, vb) in a[0].iter().zip(&b[0]) {
            assert!((da.derivative(1).unwrap() - phi_n * vb.value()).abs() < 1e-12);
        }
        // d/dx delta_{n-2} = phi_{n-1} delta_{n-1} + phi_n delta_n
        let a = ChiralVector::from_components(p.clone(), branched_delayed(n, n - 2)).jets(&[x], 1).unwrap();
        let b1 = ChiralVector::from_components(p.clone(), branched_delayed(n, n - 1)).jets(&[x], 0).unwrap();
        let b2 = ChiralVector::from_components(p.clone(), branched_delayed(n, n)).jets(&[x], 0).unwrap();
        let (pa, pb) = (p.funcs()[n - 2].eval(x).unwrap(), phi_n);
        for k in 0..2 * n {
            let want = pa * b1[0][k].value() + pb * b2[0][k].value();
            assert!((a[0][k].derivative(1).unwrap() - want).abs() < 1e-12, "k={k}");
        }
    }

    #[test]
    fn branched_derivative_levels() {
        for n in 3..=4 {
            let p = phis(&SRC[..2 * n - 2], 1.0);
            for i in 0..n {
                for j in 0..n {
                    if i + j < 2 * n - 2 || (i == n - 1 && j == n - 1) {
                        let r = bilinear_pairing_check(PairingKind::KDerivative, &p, i, j, 0.7, 0).unwrap();
                        assert!(r.deviation() < 1e-7, "n={n} i={i} j={j}: {r:?}");
                    }
                }
            }
            let r = bilinear_pairing_check(PairingKind::KDerivative, &p, n - 1, n - 1, 0.3, 0).unwrap();
            assert_eq!(r.expected, 2.0 * sign(n - 1));
        }
    }

    #[test]
    fn structural_errors() {
        let p = phis(&SRC[..3], 1.0);
        assert!(bilinear_pairing_check(PairingKind::KDelayed, &p, 0, 0, 0.5, 0).is_err());
        assert!(bilinear_pairing_check(PairingKind::JDelayed, &p, 4, 0, 0.5, 0).is_err());
        let bad = phis(&["1", "t - 0.5"], 1.0);
        assert!(matches!(
            bilinear_pairing_check(PairingKind::JDerivative, &bad, 0, 0, 0.7, 0),
            Err(LeznovError::NonPositive { .. })
        ));
    }
}
