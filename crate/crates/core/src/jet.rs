//! Truncated Taylor jets of scalar functions of one variable.
//!
//! A [`TaylorJet`] stores `coeffs[m] = f^(m)(x0) / m!` for `m = 0..=order`.
//! Arithmetic is exact up to the truncation order, so differential identities
//! evaluated on jets reduce to algebra on the coefficients.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum JetError {
    #[error("jet order mismatch: {0} vs {1}")]
    OrderMismatch(usize, usize),
    #[error("jet base point mismatch: {0} vs {1}")]
    BasePointMismatch(f64, f64),
    #[error("division by a jet with zero constant term at x = {at}")]
    Singular { at: f64 },
    #[error("real power {exponent} undefined for nonpositive base {value} at x = {at}")]
    Domain { at: f64, value: f64, exponent: f64 },
    #[error("jet has order 0, cannot differentiate")]
    Exhausted,
    #[error("non-finite coefficient produced at x = {at}")]
    NonFinite { at: f64 },
}

pub type Result<T> = std::result::Result<T, JetError>;

/// Binary operations supported by [`jet_arith`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JetOp {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaylorJet {
    base_point: f64,
    coeffs: Vec<f64>,
}

impl TaylorJet {
    /// Builds a jet from Taylor-normalized coefficients. Panics on an empty list.
    pub fn from_coeffs(base_point: f64, coeffs: Vec<f64>) -> Self {
        assert!(!coeffs.is_empty(), "a jet needs at least the constant term");
        Self { base_point, coeffs }
    }

    /// Builds a jet from plain derivative values `f^(m)(x0)`.
    pub fn from_derivatives(base_point: f64, derivs: &[f64]) -> Self {
        let mut fact = 1.0;
        let coeffs = derivs
            .iter()
            .enumerate()
            .map(|(m, d)| {
                if m > 0 {
                    fact *= m as f64;
                }
                d / fact
            })
            .collect();
        Self::from_coeffs(base_point, coeffs)
    }

    pub fn constant(base_point: f64, value: f64, order: usize) -> Self {
        let mut coeffs = vec![0.0; order + 1];
        coeffs[0] = value;
        Self { base_point, coeffs }
    }

    pub fn zero(base_point: f64, order: usize) -> Self {
        Self::constant(base_point, 0.0, order)
    }

    /// The identity function `t` expanded at `base_point`.
    pub fn variable(base_point: f64, order: usize) -> Self {
        let mut coeffs = vec![0.0; order + 1];
        coeffs[0] = base_point;
        if order >= 1 {
            coeffs[1] = 1.0;
        }
        Self { base_point, coeffs }
    }

    pub fn base_point(&self) -> f64 {
        self.base_point
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    /// `f^(m)(x0)`, or `None` beyond the truncation order.
    pub fn derivative(&self, m: usize) -> Option<f64> {
        self.coeffs.get(m).map(|c| c * factorial(m))
    }

    /// All derivative values `f^(0..=order)(x0)`.
    pub fn derivatives(&self) -> Vec<f64> {
        (0..=self.order()).map(|m| self.derivative(m).unwrap()).collect()
    }

    /// The jet of `f'`, one order shorter.
    pub fn differentiate(&self) -> Result<TaylorJet> {
        if self.order() == 0 {
            return Err(JetError::Exhausted);
        }
        let coeffs = (1..self.coeffs.len())
            .map(|m| m as f64 * self.coeffs[m])
            .collect();
        Ok(Self { base_point: self.base_point, coeffs })
    }

    /// The jet of `f^(k)`, `k` orders shorter.
    pub fn nth_derivative_jet(&self, k: usize) -> Result<TaylorJet> {
        let mut out = self.clone();
        for _ in 0..k {
            out = out.differentiate()?;
        }
        Ok(out)
    }

    pub fn truncate(&self, order: usize) -> TaylorJet {
        let keep = (order + 1).min(self.coeffs.len());
        Self { base_point: self.base_point, coeffs: self.coeffs[..keep].to_vec() }
    }

    pub fn scale(&self, s: f64) -> TaylorJet {
        Self {
            base_point: self.base_point,
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    pub fn neg(&self) -> TaylorJet {
        self.scale(-1.0)
    }

    pub fn add(&self, other: &TaylorJet) -> Result<TaylorJet> {
        jet_arith(JetOp::Add, self, other)
    }

    pub fn sub(&self, other: &TaylorJet) -> Result<TaylorJet> {
        jet_arith(JetOp::Sub, self, other)
    }

    pub fn mul(&self, other: &TaylorJet) -> Result<TaylorJet> {
        jet_arith(JetOp::Mul, self, other)
    }

    pub fn div(&self, other: &TaylorJet) -> Result<TaylorJet> {
        jet_arith(JetOp::Div, self, other)
    }

    pub fn powf(&self, p: f64) -> Result<TaylorJet> {
        jet_pow_real(self, p)
    }

    /// Nonnegative integer power by repeated multiplication; valid for any sign of the base.
    pub fn powi(&self, k: u32) -> TaylorJet {
        let mut acc = TaylorJet::constant(self.base_point, 1.0, self.order());
        for _ in 0..k {
            acc = cauchy(&acc, self);
        }
        acc
    }

    pub fn exp(&self) -> TaylorJet {
        let u = &self.coeffs;
        let mut e = vec![0.0; u.len()];
        e[0] = u[0].exp();
        for k in 1..u.len() {
            let s: f64 = (1..=k).map(|j| j as f64 * u[j] * e[k - j]).sum();
            e[k] = s / k as f64;
        }
        Self { base_point: self.base_point, coeffs: e }
    }

    pub fn ln(&self) -> Result<TaylorJet> {
        let u = &self.coeffs;
        if u[0] <= 0.0 {
            return Err(JetError::Domain { at: self.base_point, value: u[0], exponent: 0.0 });
        }
        let mut l = vec![0.0; u.len()];
        l[0] = u[0].ln();
        for k in 1..u.len() {
            let s: f64 = (1..k).map(|j| j as f64 * l[j] * u[k - j]).sum();
            l[k] = (u[k] - s / k as f64) / u[0];
        }
        Ok(Self { base_point: self.base_point, coeffs: l })
    }

    /// Sine and cosine together, via `s' = c u'`, `c' = -s u'`.
    pub fn sin_cos(&self) -> (TaylorJet, TaylorJet) {
        let u = &self.coeffs;
        let mut s = vec![0.0; u.len()];
        let mut c = vec![0.0; u.len()];
        s[0] = u[0].sin();
        c[0] = u[0].cos();
        for k in 1..u.len() {
            let mut ss = 0.0;
            let mut cc = 0.0;
            for j in 1..=k {
                let w = j as f64 * u[j];
                ss += w * c[k - j];
                cc -= w * s[k - j];
            }
            s[k] = ss / k as f64;
            c[k] = cc / k as f64;
        }
        (
            Self { base_point: self.base_point, coeffs: s },
            Self { base_point: self.base_point, coeffs: c },
        )
    }

    pub fn sqrt(&self) -> Result<TaylorJet> {
        jet_pow_real(self, 0.5)
    }

    /// Evaluates the truncated Taylor polynomial at `t`.
    pub fn eval_at(&self, t: f64) -> f64 {
        let d = t - self.base_point;
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * d + c)
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }
}

impl fmt::Display for TaylorJet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "jet@{}[", self.base_point)?;
        for (i, c) in self.coeffs.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, "]")
    }
}

fn check_compatible(a: &TaylorJet, b: &TaylorJet) -> Result<()> {
    if a.order() != b.order() {
        return Err(JetError::OrderMismatch(a.order(), b.order()));
    }
    if a.base_point != b.base_point {
        return Err(JetError::BasePointMismatch(a.base_point, b.base_point));
    }
    Ok(())
}

fn cauchy(a: &TaylorJet, b: &TaylorJet) -> TaylorJet {
    let n = a.coeffs.len();
    let coeffs = (0..n)
        .map(|k| (0..=k).map(|j| a.coeffs[j] * b.coeffs[k - j]).sum())
        .collect();
    TaylorJet { base_point: a.base_point, coeffs }
}

/// Pointwise combination of two jets at the same base point and order.
pub fn jet_arith(op: JetOp, a: &TaylorJet, b: &TaylorJet) -> Result<TaylorJet> {
    check_compatible(a, b)?;
    let base_point = a.base_point;
    let out = match op {
        JetOp::Add => TaylorJet {
            base_point,
            coeffs: a.coeffs.iter().zip(&b.coeffs).map(|(x, y)| x + y).collect(),
        },
        JetOp::Sub => TaylorJet {
            base_point,
            coeffs: a.coeffs.iter().zip(&b.coeffs).map(|(x, y)| x - y).collect(),
        },
        JetOp::Mul => cauchy(a, b),
        JetOp::Div => {
            let b0 = b.coeffs[0];
            if b0 == 0.0 {
                return Err(JetError::Singular { at: base_point });
            }
            let n = a.coeffs.len();
            let mut q = vec![0.0; n];
            for k in 0..n {
                let s: f64 = (1..=k).map(|j| b.coeffs[j] * q[k - j]).sum();
                q[k] = (a.coeffs[k] - s) / b0;
            }
            TaylorJet { base_point, coeffs: q }
        }
    };
    if !out.is_finite() {
        return Err(JetError::NonFinite { at: base_point });
    }
    Ok(out)
}

/// Real power `a^p` on the positive branch, from `(a^p)' = p a^(p-1) a'`.
pub fn jet_pow_real(a: &TaylorJet, p: f64) -> Result<TaylorJet> {
    let u = &a.coeffs;
    if u[0] <= 0.0 {
        return Err(JetError::Domain { at: a.base_point, value: u[0], exponent: p });
    }
    if p == 1.0 {
        return Ok(a.clone());
    }
    let mut w = vec![0.0; u.len()];
    w[0] = u[0].powf(p);
    for k in 1..u.len() {
        let kf = k as f64;
        let s: f64 = (1..=k)
            .map(|j| ((p + 1.0) * j as f64 - kf) * u[j] * w[k - j])
            .sum();
        w[k] = s / (kf * u[0]);
    }
    let out = TaylorJet { base_point: a.base_point, coeffs: w };
    if !out.is_finite() {
        return Err(JetError::NonFinite { at: a.base_point });
    }
    Ok(out)
}

pub fn factorial(m: usize) -> f64 {
    (1..=m).fold(1.0, |acc, k| acc * k as f64)
}
