//! Tau determinants of a chiral pair, their exact first mixed derivatives, the
//! fields built from them, and the Toda residuals.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::jet::TaylorJet;
use crate::leznov::{ChiralVector, LeznovError};
use crate::liedata::{cartan_matrix_f64, Family, LieType};
use crate::minors::minor;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TauError {
    #[error("jets of order {have} are too short, need {need}")]
    OrderTooLow { need: usize, have: usize },
    #[error("vectors have different lengths ({0} and {1})")]
    LengthMismatch(usize, usize),
    #[error("tau index {index} out of range 1..={max}")]
    Index { index: usize, max: usize },
    #[error("singular point ({x}, {y}): {what} (index {index})")]
    Singular { x: f64, y: f64, index: usize, what: &'static str },
    #[error(transparent)]
    Leznov(#[from] LeznovError),
}

/// `(v, v_x, v_y, v_xy)`: a function modulo `dx^2` and `dy^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixedJet {
    pub v: f64,
    pub vx: f64,
    pub vy: f64,
    pub vxy: f64,
}

impl MixedJet {
    pub fn new(v: f64, vx: f64, vy: f64, vxy: f64) -> Self {
        MixedJet { v, vx, vy, vxy }
    }

    pub fn constant(v: f64) -> Self {
        MixedJet::new(v, 0.0, 0.0, 0.0)
    }

    pub fn add(self, o: Self) -> Self {
        MixedJet::new(self.v + o.v, self.vx + o.vx, self.vy + o.vy, self.vxy + o.vxy)
    }

    pub fn sub(self, o: Self) -> Self {
        self.add(o.scale(-1.0))
    }

    pub fn scale(self, s: f64) -> Self {
        MixedJet::new(s * self.v, s * self.vx, s * self.vy, s * self.vxy)
    }

    pub fn mul(self, o: Self) -> Self {
        MixedJet::new(
            self.v * o.v,
            self.vx * o.v + self.v * o.vx,
            self.vy * o.v + self.v * o.vy,
            self.vxy * o.v + self.vx * o.vy + self.vy * o.vx + self.v * o.vxy,
        )
    }

    /// Apply a scalar function given its value and first two derivatives at `v`.
    fn compose(self, f: f64, f1: f64, f2: f64) -> Self {
        MixedJet::new(f, f1 * self.vx, f1 * self.vy, f1 * self.vxy + f2 * self.vx * self.vy)
    }

    /// `None` unless `v > 0`.
    pub fn sqrt(self) -> Option<Self> {
        if !(self.v > 0.0) {
            return None;
        }
        let r = self.v.sqrt();
        Some(self.compose(r, 0.5 / r, -0.25 / (r * self.v)))
    }

    pub fn ln(self) -> Option<Self> {
        if !(self.v > 0.0) {
            return None;
        }
        Some(self.compose(self.v.ln(), 1.0 / self.v, -1.0 / (self.v * self.v)))
    }

    pub fn dd(&self) -> f64 {
        dd(self.v, self.vx, self.vy, self.vxy)
    }
}

/// `v v_xy - v_x v_y`.
pub fn dd(v: f64, v_x: f64, v_y: f64, v_xy: f64) -> f64 {
    v * v_xy - v_x * v_y
}

/// Pairings `F^{(j)} . G^{(k)}` at one point and the leading minors built from them.
#[derive(Debug, Clone)]
pub struct TauTable {
    pub x: f64,
    pub y: f64,
    pub pair_matrix: DMatrix<f64>,
    /// `tau_0 .. tau_{size}` where `size` is the pair matrix dimension.
    pub taus: Vec<f64>,
}

impl TauTable {
    /// Table from a pair matrix; its dimension should be `n+2`.
    pub fn from_pair_matrix(x: f64, y: f64, pair_matrix: DMatrix<f64>) -> Self {
        let size = pair_matrix.nrows();
        let taus = (0..=size)
            .map(|i| {
                let idx: Vec<usize> = (0..i).collect();
                minor(&pair_matrix, &idx, &idx)
            })
            .collect();
        TauTable { x, y, pair_matrix, taus }
    }

    pub fn size(&self) -> usize {
        self.pair_matrix.nrows()
    }

    pub fn tau(&self, i: usize) -> f64 {
        self.taus[i]
    }

    /// `tau_i` with its exact first mixed derivatives; `tau_0 = 1`.
    pub fn tau_jet(&self, i: usize) -> Result<MixedJet, TauError> {
        if i == 0 {
            return Ok(MixedJet::constant(1.0));
        }
        let (tx, ty, txy) = tau_derivatives(self, i)?;
        Ok(MixedJet::new(self.taus[i], tx, ty, txy))
    }
}

/// Jets of `F` at `x` and `G` at `y` to order `n+1` give the `(n+2)`-square table.
pub fn tau_table(f: &[TaylorJet], g: &[TaylorJet], x: f64, y: f64, n: usize) -> Result<TauTable, TauError> {
    if f.len() != g.len() {
        return Err(TauError::LengthMismatch(f.len(), g.len()));
    }
    let size = n + 2;
    let have = f.iter().chain(g).map(|j| j.order()).min().unwrap_or(0);
    if have < size - 1 {
        return Err(TauError::OrderTooLow { need: size - 1, have });
    }
    let fd: Vec<Vec<f64>> = f.iter().map(|j| j.derivatives()).collect();
    let gd: Vec<Vec<f64>> = g.iter().map(|j| j.derivatives()).collect();
    let m = DMatrix::from_fn(size, size, |j, k| fd.iter().zip(&gd).map(|(a, b)| a[j] * b[k]).sum());
    Ok(TauTable::from_pair_matrix(x, y, m))
}

/// `(tau_{i,x}, tau_{i,y}, tau_{i,xy})` as minors of the leading `(i+1)` block:
/// differentiating in `x` moves the last row down one derivative, in `y` the last column.
pub fn tau_derivatives(t: &TauTable, i: usize) -> Result<(f64, f64, f64), TauError> {
    let max = t.size() - 1;
    if i == 0 || i > max {
        return Err(TauError::Index { index: i, max });
    }
    let lead: Vec<usize> = (0..i).collect();
    let shifted: Vec<usize> = (0..i - 1).chain(std::iter::once(i)).collect();
    let m = &t.pair_matrix;
    Ok((minor(m, &shifted, &lead), minor(m, &lead, &shifted), minor(m, &shifted, &shifted)))
}

/// `|DD(tau_i) - tau_{i-1} tau_{i+1}| / max(1, |tau_{i-1} tau_{i+1}|)` for `i = 1..=n`.
pub fn recurrence_residuals(t: &TauTable, n: usize) -> Result<Vec<f64>, TauError> {
    (1..=n)
        .map(|i| {
            let lhs = t.tau_jet(i)?.dd();
            let rhs = t.taus[i - 1] * t.taus[i + 1];
            Ok((lhs - rhs).abs() / rhs.abs().max(1.0))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SigmaFields {
    pub sigmas: Vec<MixedJet>,
    /// `u_i = -log sigma_i`.
    pub us: Vec<f64>,
    /// `sign(tau_{n+1} / tau_n)` for the B series.
    pub branch: Option<f64>,
}

pub fn sigma_fields(t: &TauTable, lt: LieType) -> Result<SigmaFields, TauError> {
    let n = lt.rank();
    if t.size() < n + 1 {
        return Err(TauError::Index { index: n + 1, max: t.size() });
    }
    let singular = |index: usize, what: &'static str| TauError::Singular { x: t.x, y: t.y, index, what };
    let positive = |i: usize| -> Result<MixedJet, TauError> {
        let j = t.tau_jet(i)?;
        if j.v > 0.0 {
            Ok(j)
        } else {
            Err(singular(i, "tau is not positive"))
        }
    };
    let mut sigmas = Vec::with_capacity(n);
    let mut branch = None;
    match lt.family() {
        Family::A | Family::C => {
            for i in 1..=n {
                sigmas.push(positive(i)?);
            }
        }
        Family::B => {
            for i in 1..n {
                sigmas.push(positive(i)?);
            }
            let tn = positive(n)?;
            sigmas.push(tn.sqrt().ok_or_else(|| singular(n, "tau is not positive"))?);
            branch = Some(if t.taus[n + 1] / tn.v >= 0.0 { 1.0 } else { -1.0 });
        }
        Family::D => {
            for i in 1..=n - 2 {
                sigmas.push(positive(i)?);
            }
            let t1 = t.tau_jet(n - 1)?;
            let tn = t.tau_jet(n)?;
            let p = tn.add(t1.scale(2.0)).sqrt().ok_or_else(|| singular(n, "tau_n + 2 tau_{n-1} is not positive"))?;
            let q = tn.sub(t1.scale(2.0)).sqrt().ok_or_else(|| singular(n, "tau_n - 2 tau_{n-1} is not positive"))?;
            let s_minus = p.sub(q).scale(0.5);
            if !(s_minus.v > 0.0) {
                return Err(singular(n, "sigma_n is not positive"));
            }
            sigmas.push(p.add(q).scale(0.5));
            sigmas.push(s_minus);
        }
    }
    let us = sigmas.iter().map(|s| -s.v.ln()).collect();
    Ok(SigmaFields { sigmas, us, branch })
}

/// Right-hand coefficients: 1 everywhere, `branch / 2` on the last B equation.
pub fn equation_coefficients(lt: LieType, branch: Option<f64>) -> Vec<f64> {
    let n = lt.rank();
    let mut c = vec![1.0; n];
    if lt.family() == Family::B {
        c[n - 1] = 0.5 * branch.unwrap_or(1.0);
    }
    c
}

/// `|DD(sigma_i) - c_i prod_{j != i} sigma_j^{-a_ij}| / max(1, |rhs|)` per equation.
pub fn sigma_residuals(sf: &SigmaFields, lt: LieType, coefficients: &[f64]) -> Vec<f64> {
    let a = cartan_matrix_f64(lt);
    let n = lt.rank();
    (0..n)
        .map(|i| {
            let mut rhs = coefficients[i];
            for j in (0..n).filter(|&j| j != i) {
                rhs *= sf.sigmas[j].v.powf(-a[(i, j)]);
            }
            (sf.sigmas[i].dd() - rhs).abs() / rhs.abs().max(1.0)
        })
        .collect()
}

/// `|u_{i,xy} + c_i exp(sum_j a_ij (u_j - shift_j))|` with `u = -log sigma`.
pub fn field_residuals(sf: &SigmaFields, lt: LieType, coefficients: &[f64], shift: &[f64]) -> Vec<f64> {
    let a = cartan_matrix_f64(lt);
    let n = lt.rank();
    (0..n)
        .map(|i| {
            let s = sf.sigmas[i];
            let u_xy = -s.dd() / (s.v * s.v);
            let arg: f64 = (0..n).map(|j| a[(i, j)] * (sf.us[j] - shift[j])).sum();
            (u_xy + coefficients[i] * arg.exp()).abs()
        })
        .collect()
}

/// Solve `A r = (0, .., 0, last)`.
pub fn normalization_shift(lt: LieType, last: f64) -> Vec<f64> {
    let n = lt.rank();
    let mut b = DVector::zeros(n);
    b[n - 1] = last;
    let r = cartan_matrix_f64(lt).lu().solve(&b).expect("Cartan matrices are invertible");
    r.iter().copied().collect()
}

/// Shift taking the `+-1/2` B system to unit coefficients: `u_std = u - r`,
/// `A r = (0, .., log 2)`. A real shift rescales but cannot flip the sign, so
/// on the negative branch the last equation keeps its opposite sign.
pub fn b_log2_shift(lt: LieType) -> Vec<f64> {
    normalization_shift(lt, std::f64::consts::LN_2)
}

/// Outcome of one grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct PointReport {
    pub x: f64,
    pub y: f64,
    /// `tau_1 .. tau_{n+1}`.
    pub taus: Vec<f64>,
    pub recurrence: Vec<f64>,
    pub fields: Option<PointFields>,
    pub excluded: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointFields {
    pub us: Vec<f64>,
    pub sigma_residuals: Vec<f64>,
    pub field_residuals: Vec<f64>,
    pub branch: Option<f64>,
    /// B only: residuals of the unit-coefficient system after the log 2 shift.
    pub shifted_residuals: Option<Vec<f64>>,
}

/// Everything computable at one point from precomputed jets. `branch` fixes the
/// B coefficient sign; `None` uses the sign measured at this point.
pub fn point_report(
    f: &[TaylorJet],
    g: &[TaylorJet],
    lt: LieType,
    x: f64,
    y: f64,
    branch: Option<f64>,
) -> Result<PointReport, TauError> {
    let n = lt.rank();
    let t = tau_table(f, g, x, y, n)?;
    let recurrence = recurrence_residuals(&t, n)?;
    let taus = t.taus[1..=n + 1].to_vec();
    match sigma_fields(&t, lt) {
        Ok(sf) => {
            let b = branch.or(sf.branch);
            let coef = equation_coefficients(lt, b);
            let zero = vec![0.0; n];
            let shifted_residuals = (lt.family() == Family::B).then(|| {
                let mut unit = vec![1.0; n];
                unit[n - 1] = b.unwrap_or(1.0);
                field_residuals(&sf, lt, &unit, &b_log2_shift(lt))
            });
            Ok(PointReport {
                x,
                y,
                taus,
                recurrence,
                fields: Some(PointFields {
                    sigma_residuals: sigma_residuals(&sf, lt, &coef),
                    field_residuals: field_residuals(&sf, lt, &coef, &zero),
                    us: sf.us,
                    branch: sf.branch,
                    shifted_residuals,
                }),
                excluded: None,
            })
        }
        Err(e @ TauError::Singular { .. }) => {
            Ok(PointReport { x, y, taus, recurrence, fields: None, excluded: Some(e.to_string()) })
        }
        Err(e) => Err(e),
    }
}

/// Ratio-form (tau) residuals at one point, or `None` at a singular point.
pub fn toda_residual(
    f: &ChiralVector,
    g: &ChiralVector,
    lt: LieType,
    x: f64,
    y: f64,
) -> Result<Option<Vec<f64>>, TauError> {
    let order = lt.rank() + 1;
    let fj = f.jets(&[x], order)?.remove(0);
    let gj = g.jets(&[y], order)?.remove(0);
    Ok(point_report(&fj, &gj, lt, x, y, None)?.fields.map(|p| p.sigma_residuals))
}

/// Reports over the grid `xs x ys` (x-major), sharing jets along each axis. For
/// B the branch sign is taken from the first nonsingular point.
pub fn grid_reports(
    f: &ChiralVector,
    g: &ChiralVector,
    lt: LieType,
    xs: &[f64],
    ys: &[f64],
) -> Result<Vec<PointReport>, TauError> {
    let order = lt.rank() + 1;
    let fj = f.jets(xs, order)?;
    let gj = g.jets(ys, order)?;
    let mut out = Vec::with_capacity(xs.len() * ys.len());
    let mut branch = None;
    for (i, &x) in xs.iter().enumerate() {
        for (k, &y) in ys.iter().enumerate() {
            let r = point_report(&fj[i], &gj[k], lt, x, y, branch)?;
            if branch.is_none() {
                branch = r.fields.as_ref().and_then(|p| p.branch);
            }
            out.push(r);
        }
    }
    Ok(out)
}
