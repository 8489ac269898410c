//! Completing the derivative rows of a symplectic or orthogonal chiral vector to
//! a full group element, the bilinear tables `C(i,j)` / `B(i,j)` of its
//! derivatives, and the pairings `I~_j` that parameterize the completion.

use nalgebra::DMatrix;
use thiserror::Error;

use crate::jet::{JetError, TaylorJet};
use crate::leznov::{derivative_rows, pair, row, ChiralVector, LeznovError};
use crate::liedata::{structure_form_f64, Family, FormKind, LieType};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CompletionError {
    #[error("{0} has no completion here (only C and B)")]
    WrongFamily(LieType),
    #[error("derivative rows are degenerate at x = {x}: smallest/largest singular value {ratio:e}")]
    Degenerate { x: f64, ratio: f64 },
    #[error("pivot pairing vanishes for row {row} at x = {x}")]
    ZeroPivot { row: usize, x: f64 },
    #[error("table entry ({i},{j}): induction gives {induced}, direct pairing {direct}")]
    Inconsistent { i: usize, j: usize, induced: f64, direct: f64 },
    #[error("conserved index {j} outside 1..={max}")]
    ConservedIndex { j: usize, max: usize },
    #[error("expected {need} conserved jets, got {have}")]
    ConservedCount { need: usize, have: usize },
    #[error(transparent)]
    Leznov(#[from] LeznovError),
    #[error(transparent)]
    Jet(#[from] JetError),
}

fn family_of(lt: LieType) -> Result<(Family, DMatrix<f64>), CompletionError> {
    let n = lt.rank();
    match lt.family() {
        Family::C => Ok((Family::C, structure_form_f64(FormKind::Omega, n))),
        Family::B => Ok((Family::B, structure_form_f64(FormKind::ThetaOdd, n))),
        _ => Err(CompletionError::WrongFamily(lt)),
    }
}

/// Largest index in the table: `2n-1` for C, `2n` for B.
pub fn table_max_index(lt: LieType) -> usize {
    match lt.family() {
        Family::B => 2 * lt.rank(),
        _ => 2 * lt.rank() - 1,
    }
}

/// Jet order of `F` sufficient for the whole table and its seeds.
pub fn table_jet_order(lt: LieType) -> usize {
    4 * lt.rank() + 2
}

/// Jet of `F^{(i)} X F^{(j)T}`.
pub fn pairing_jet(f: &[TaylorJet], form: &DMatrix<f64>, i: usize, j: usize) -> Result<TaylorJet, JetError> {
    let di: Vec<TaylorJet> = f.iter().map(|c| c.nth_derivative_jet(i)).collect::<Result<_, _>>()?;
    let dj: Vec<TaylorJet> = f.iter().map(|c| c.nth_derivative_jet(j)).collect::<Result<_, _>>()?;
    let order = di[0].order().min(dj[0].order());
    let mut acc = TaylorJet::zero(f[0].base_point(), order);
    for a in 0..f.len() {
        for b in 0..f.len() {
            let m = form[(a, b)];
            if m != 0.0 {
                acc = acc.add(&di[a].truncate(order).mul(&dj[b].truncate(order))?.scale(m))?;
            }
        }
    }
    Ok(acc)
}

/// Jets of `I~_j`: `C(F^{(n+j-1)}, F^{(n+j)})` for `j < n` (C) or `B(F^{(n+j)}, F^{(n+j)})` for `j <= n` (B).
pub fn conserved_jets(f: &[TaylorJet], lt: LieType) -> Result<Vec<TaylorJet>, CompletionError> {
    let (fam, form) = family_of(lt)?;
    let n = lt.rank();
    match fam {
        Family::C => (1..n).map(|j| Ok(pairing_jet(f, &form, n + j - 1, n + j)?)).collect(),
        _ => (1..=n).map(|j| Ok(pairing_jet(f, &form, n + j, n + j)?)).collect(),
    }
}

fn sub_trunc(a: &TaylorJet, b: &TaylorJet) -> Result<TaylorJet, JetError> {
    let o = a.order().min(b.order());
    a.truncate(o).sub(&b.truncate(o))
}

/// `C(i,j)` (skew, `Omega`) or `B(i,j)` (symmetric, odd `Theta`) for
/// `0 <= i <= j <= max_index`, filled level by level from the family
/// conditions and the conserved pairings.
#[derive(Debug, Clone)]
pub struct BilinearTable {
    pub family: Family,
    pub max_index: usize,
    entries: Vec<Vec<Option<TaylorJet>>>,
    /// Worst `|induced - direct|` over the table.
    pub max_deviation: f64,
}

impl BilinearTable {
    /// Value of the entry, using skew- or symmetry for `i > j`.
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        if i > j {
            let v = self.get(j, i)?;
            return Some(if self.family == Family::C { -v } else { v });
        }
        self.entries.get(i)?.get(j)?.as_ref().map(|e| e.value())
    }

    pub fn jet(&self, i: usize, j: usize) -> Option<&TaylorJet> {
        self.entries.get(i.min(j))?.get(i.max(j))?.as_ref()
    }
}

/// Build the table from the jets of `F` at one point and the jets of `I~_j`
/// (the induction differentiates them, so values alone are not enough). Every
/// entry is compared with the direct pairing of the jets of `F`.
pub fn bilinear_table(
    f: &[TaylorJet],
    lt: LieType,
    conserved: &[TaylorJet],
    tol: f64,
) -> Result<BilinearTable, CompletionError> {
    let (fam, form) = family_of(lt)?;
    let n = lt.rank();
    let need = if fam == Family::C { n - 1 } else { n };
    if conserved.len() != need {
        return Err(CompletionError::ConservedCount { need, have: conserved.len() });
    }
    let max = table_max_index(lt);
    let at = f[0].base_point();
    let order = f[0].order();
    let konst = |v: f64| TaylorJet::constant(at, v, order);
    let mut e: Vec<Vec<Option<TaylorJet>>> = vec![vec![None; max + 1]; max + 1];
    // diagonal and first off-diagonal seeds
    for i in 0..=max {
        match fam {
            Family::C => {
                e[i][i] = Some(konst(0.0));
                if i < max {
                    e[i][i + 1] = Some(if i + 1 < n {
                        konst(0.0)
                    } else if i + 1 == n {
                        konst(-1.0)
                    } else {
                        conserved[i - n].clone()
                    });
                }
            }
            _ => {
                e[i][i] = Some(if i < n {
                    konst(0.0)
                } else if i == n {
                    konst(1.0)
                } else {
                    conserved[i - n - 1].clone()
                });
            }
        }
    }
    for level in 1..=2 * max {
        let top = level / 2;
        if fam == Family::B && level % 2 == 1 && top < max {
            // B(i,i+1) = (1/2) d/dx B(i,i)
            let d = e[top][top].as_ref().expect("seeded").differentiate()?;
            e[top][top + 1] = Some(d.scale(0.5));
        }
        let start = if level % 2 == 1 { top } else { top + 1 };
        // C(i,j) = d/dx C(i,j-1) - C(i+1,j-1), descending in i
        for i in (0..start.min(max + 1)).rev() {
            let j = level - i;
            if j > max || j <= i + 1 {
                continue;
            }
            let d = e[i][j - 1].as_ref().expect("lower level filled").differentiate()?;
            let (a, b) = (i + 1, j - 1);
            let other = e[a.min(b)][a.max(b)].clone().expect("same level filled");
            let other = if a > b && fam == Family::C { other.neg() } else { other };
            e[i][j] = Some(sub_trunc(&d, &other)?);
        }
    }
    let mut worst = 0.0f64;
    let d = derivative_rows(f, max);
    for i in 0..=max {
        for j in i..=max {
            let induced = e[i][j].as_ref().expect("table filled").value();
            let direct = pair(&form, &row(&d, i), &row(&d, j));
            let dev = (induced - direct).abs();
            if !(dev <= tol * direct.abs().max(1.0)) {
                return Err(CompletionError::Inconsistent { i, j, induced, direct });
            }
            worst = worst.max(dev);
        }
    }
    Ok(BilinearTable { family: fam, max_index: max, entries: e, max_deviation: worst })
}

/// Jets of `F` at `x` plus the conserved seeds, then [`bilinear_table`].
pub fn bilinear_table_at(v: &ChiralVector, lt: LieType, x: f64, tol: f64) -> Result<BilinearTable, CompletionError> {
    let f = v.jets(&[x], table_jet_order(lt))?.remove(0);
    let c = conserved_jets(&f, lt)?;
    bilinear_table(&f, lt, &c, tol)
}

fn check_independent(d: &DMatrix<f64>, x: f64) -> Result<(), CompletionError> {
    let sv = d.clone().svd(false, false).singular_values;
    let (lo, hi) = (sv.min(), sv.max());
    let ratio = if hi > 0.0 { lo / hi } else { 0.0 };
    if !(ratio >= 1e-8) {
        return Err(CompletionError::Degenerate { x, ratio });
    }
    Ok(())
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Symplectic completion from derivative rows `F^{(0..=2n-1)}` (as rows of `d`).
///
/// Rows (0-based) `n..2n` are `F, .., F^{(n-1)}`, row `n-1` is `F^{(n)}`; row
/// `n-k` is `F^{(n+k)}` with its pairings against the finished pairs projected
/// out, scaled so it pairs to 1 with row `2n-k`.
pub fn complete_symplectic_rows(d: &DMatrix<f64>, n: usize, x: f64) -> Result<DMatrix<f64>, CompletionError> {
    check_independent(&d.rows(0, 2 * n).into_owned(), x)?;
    let om = structure_form_f64(FormKind::Omega, n);
    let c = |a: &[f64], b: &[f64]| pair(&om, a, b);
    let mut rows: Vec<Vec<f64>> = vec![Vec::new(); 2 * n];
    for i in 0..n {
        rows[n + i] = row(d, i);
    }
    rows[n - 1] = row(d, n);
    for k in 1..n {
        let target = n - 1 - k;
        let v = row(d, n + k);
        let mut w = v.clone();
        for m in target + 1..n {
            let (e, f) = (&rows[m], &rows[n + m]);
            axpy(&mut w, -c(&v, f), e);
            axpy(&mut w, c(&v, e), f);
        }
        let p = c(&w, &rows[n + target]);
        if p.abs() < 1e-12 {
            return Err(CompletionError::ZeroPivot { row: target + 1, x });
        }
        rows[target] = w.iter().map(|t| t / p).collect();
    }
    Ok(DMatrix::from_fn(2 * n, 2 * n, |i, j| rows[i][j]))
}

pub fn complete_symplectic(v: &ChiralVector, lt: LieType, x: f64) -> Result<DMatrix<f64>, CompletionError> {
    if lt.family() != Family::C {
        return Err(CompletionError::WrongFamily(lt));
    }
    let n = lt.rank();
    complete_symplectic_rows(&v.derivative_matrix(x, 2 * n - 1)?, n, x)
}

/// Orthogonal completion from derivative rows `F^{(0..=2n)}`; also returns `sign(det)`.
///
/// Rows (0-based) `n..=2n` are `F, .., F^{(n)}`; row `m-1` comes from
/// `F^{(2n+1-m)}`, projected, scaled against row `n+m-1` and made isotropic.
pub fn complete_orthogonal_rows(d: &DMatrix<f64>, n: usize, x: f64) -> Result<(DMatrix<f64>, f64), CompletionError> {
    check_independent(&d.rows(0, 2 * n + 1).into_owned(), x)?;
    let th = structure_form_f64(FormKind::ThetaOdd, n);
    let b = |a: &[f64], c: &[f64]| pair(&th, a, c);
    let mut rows: Vec<Vec<f64>> = vec![Vec::new(); 2 * n + 1];
    for i in 0..=n {
        rows[n + i] = row(d, i);
    }
    for m in (1..=n).rev() {
        let v = row(d, 2 * n + 1 - m);
        let mut w = v.clone();
        let g = &rows[2 * n];
        axpy(&mut w, -b(&v, g), g);
        for mm in m + 1..=n {
            let (e, f) = (&rows[mm - 1], &rows[n + mm - 1]);
            axpy(&mut w, -b(&v, f), e);
            axpy(&mut w, -b(&v, e), f);
        }
        let partner = rows[n + m - 1].clone();
        let p = b(&w, &partner);
        if p.abs() < 1e-12 {
            return Err(CompletionError::ZeroPivot { row: m, x });
        }
        let mut e: Vec<f64> = w.iter().map(|t| t / p).collect();
        let self_pair = b(&e, &e);
        axpy(&mut e, -0.5 * self_pair, &partner);
        rows[m - 1] = e;
    }
    let phi = DMatrix::from_fn(2 * n + 1, 2 * n + 1, |i, j| rows[i][j]);
    let sign = phi.determinant().signum();
    Ok((phi, sign))
}

pub fn complete_orthogonal(v: &ChiralVector, lt: LieType, x: f64) -> Result<(DMatrix<f64>, f64), CompletionError> {
    if lt.family() != Family::B {
        return Err(CompletionError::WrongFamily(lt));
    }
    let n = lt.rank();
    complete_orthogonal_rows(&v.derivative_matrix(x, 2 * n)?, n, x)
}

/// `max |Phi X Phi^T - X|` for the family form.
pub fn completion_deviation(phi: &DMatrix<f64>, lt: LieType) -> Result<f64, CompletionError> {
    let (_, form) = family_of(lt)?;
    Ok((phi * &form * phi.transpose() - &form).amax())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConservedReport {
    pub j: usize,
    pub values: Vec<f64>,
    /// `max - min` over the samples.
    pub max_drift: f64,
}

/// `I~_j` at each sample. These are functions of `x`; drift is reported only.
pub fn conserved_quantity(
    v: &ChiralVector,
    lt: LieType,
    j: usize,
    x_samples: &[f64],
) -> Result<ConservedReport, CompletionError> {
    let (fam, form) = family_of(lt)?;
    let n = lt.rank();
    let max = if fam == Family::C { n - 1 } else { n };
    if j == 0 || j > max {
        return Err(CompletionError::ConservedIndex { j, max });
    }
    let (a, b) = if fam == Family::C { (n + j - 1, n + j) } else { (n + j, n + j) };
    let values: Vec<f64> = v
        .jets(x_samples, b)?
        .iter()
        .map(|pj| {
            let d = derivative_rows(pj, b);
            pair(&form, &row(&d, a), &row(&d, b))
        })
        .collect();
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max_drift = if values.is_empty() { 0.0 } else { hi - lo };
    Ok(ConservedReport { j, values, max_drift })
}

pub fn conserved_quantities(v: &ChiralVector, lt: LieType, x_samples: &[f64]) -> Result<Vec<ConservedReport>, CompletionError> {
    let n = lt.rank();
    let max = match lt.family() {
        Family::C => n - 1,
        Family::B => n,
        _ => return Err(CompletionError::WrongFamily(lt)),
    };
    (1..=max).map(|j| conserved_quantity(v, lt, j, x_samples)).collect()
}
