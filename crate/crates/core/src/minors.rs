//! Principal minors, cofactors, and the minor identities for general,
//! symplectic and orthogonal matrices.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::liedata::{iota_swap, structure_form_f64, FormKind, IotaKind};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MinorError {
    #[error("index set {0:?} is not sorted, distinct and within 1..={1}")]
    BadIndexSet(Vec<usize>, usize),
    #[error("matrix is {rows}x{cols}, expected {want}x{want}")]
    Shape { rows: usize, cols: usize, want: usize },
    #[error("matrix violates the group relation: max deviation {deviation:e}")]
    NotInGroup { deviation: f64 },
}

/// Sorted distinct 1-based indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct IndexSet(Vec<usize>);

impl IndexSet {
    pub fn new(mut idx: Vec<usize>, n: usize) -> Result<Self, MinorError> {
        let orig = idx.clone();
        idx.sort_unstable();
        idx.dedup();
        if idx.len() != orig.len() || idx.iter().any(|&i| i == 0 || i > n) {
            return Err(MinorError::BadIndexSet(orig, n));
        }
        Ok(IndexSet(idx))
    }

    pub fn from_mask(mask: u64, n: usize) -> Self {
        IndexSet((1..=n).filter(|i| mask >> (i - 1) & 1 == 1).collect())
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn complement(&self, n: usize) -> IndexSet {
        IndexSet((1..=n).filter(|i| !self.0.contains(i)).collect())
    }

    fn map(&self, f: impl Fn(usize) -> usize) -> IndexSet {
        let mut v: Vec<usize> = self.0.iter().map(|&i| f(i)).collect();
        v.sort_unstable();
        IndexSet(v)
    }
}

/// All `2^n` subsets of `1..=n`.
pub fn all_subsets(n: usize) -> impl Iterator<Item = IndexSet> {
    (0..1u64 << n).map(move |m| IndexSet::from_mask(m, n))
}

pub fn principal_minor(a: &DMatrix<f64>, s: &IndexSet) -> f64 {
    let k = s.len();
    if k == 0 {
        return 1.0;
    }
    let idx = s.indices();
    DMatrix::from_fn(k, k, |i, j| a[(idx[i] - 1, idx[j] - 1)]).determinant()
}

/// Determinant of the submatrix with the given 0-based rows and columns.
pub fn minor(a: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> f64 {
    debug_assert_eq!(rows.len(), cols.len());
    if rows.is_empty() {
        return 1.0;
    }
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| a[(rows[i], cols[j])]).determinant()
}

pub fn cofactor_matrix(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    DMatrix::from_fn(n, n, |i, j| {
        let rows: Vec<usize> = (0..n).filter(|&r| r != i).collect();
        let cols: Vec<usize> = (0..n).filter(|&c| c != j).collect();
        let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
        sign * minor(a, &rows, &cols)
    })
}

fn inf_norm(a: &DMatrix<f64>) -> f64 {
    a.row_iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CofactorCheck {
    pub residual: f64,
    /// `|det A| < 1e-8 * ||A||^N`; the identity still holds, but digits are lost.
    pub near_singular: bool,
}

/// Residual of `M^C_S = M^A_{S^c} det(A)^{|S|-1}`, relative to `max(1, |rhs|)`.
pub fn check_cofactor_minor_identity(a: &DMatrix<f64>, s: &IndexSet) -> CofactorCheck {
    let n = a.nrows();
    let det = a.determinant();
    let c = cofactor_matrix(a);
    let lhs = principal_minor(&c, s);
    let rhs = principal_minor(a, &s.complement(n)) * det.powi(s.len() as i32 - 1);
    CofactorCheck {
        residual: (lhs - rhs).abs() / rhs.abs().max(1.0),
        near_singular: det.abs() < 1e-8 * inf_norm(a).powi(n as i32),
    }
}

/// Worst residual over every subset, reusing one cofactor matrix.
pub fn max_cofactor_residual(a: &DMatrix<f64>) -> CofactorCheck {
    let n = a.nrows();
    let det = a.determinant();
    let c = cofactor_matrix(a);
    let mut worst = 0.0f64;
    for s in all_subsets(n) {
        let lhs = principal_minor(&c, &s);
        let rhs = principal_minor(a, &s.complement(n)) * det.powi(s.len() as i32 - 1);
        worst = worst.max((lhs - rhs).abs() / rhs.abs().max(1.0));
    }
    CofactorCheck { residual: worst, near_singular: det.abs() < 1e-8 * inf_norm(a).powi(n as i32) }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Group {
    /// `Sp(2n)`, preserving Omega.
    Sp,
    /// `O(2n+1)`, preserving the odd Theta.
    SoOdd,
    /// `O(2n)`, preserving the even Theta.
    SoEven,
}

impl Group {
    pub fn dim(self, n: usize) -> usize {
        match self {
            Group::SoOdd => 2 * n + 1,
            _ => 2 * n,
        }
    }

    pub fn form(self, n: usize) -> DMatrix<f64> {
        match self {
            Group::Sp => structure_form_f64(FormKind::Omega, n),
            Group::SoOdd => structure_form_f64(FormKind::ThetaOdd, n),
            Group::SoEven => structure_form_f64(FormKind::ThetaEven, n),
        }
    }

    fn half_rank(self, dim: usize) -> usize {
        match self {
            Group::SoOdd => (dim - 1) / 2,
            _ => dim / 2,
        }
    }

    fn iota(self) -> IotaKind {
        match self {
            Group::SoOdd => IotaKind::BOdd,
            _ => IotaKind::Even,
        }
    }
}

/// `max |A^T X A - X|` for the group's form `X`.
pub fn group_deviation(a: &DMatrix<f64>, group: Group) -> f64 {
    let x = group.form(group.half_rank(a.nrows()));
    (a.transpose() * &x * a - &x).amax()
}

fn group_checked(a: &DMatrix<f64>, group: Group) -> Result<(usize, f64), MinorError> {
    let dim = a.nrows();
    let n = group.half_rank(dim);
    if a.ncols() != dim || group.dim(n) != dim || dim == 0 {
        return Err(MinorError::Shape { rows: a.nrows(), cols: a.ncols(), want: group.dim(n.max(1)) });
    }
    let dev = group_deviation(a, group);
    if dev > 1e-9 {
        return Err(MinorError::NotInGroup { deviation: dev });
    }
    let sign = match group {
        Group::Sp => 1.0,
        _ => a.determinant().signum(),
    };
    Ok((n, sign))
}

fn duality_residual(a: &DMatrix<f64>, group: Group, n: usize, sign: f64, s: &IndexSet) -> f64 {
    let dim = a.nrows();
    let dual = s.complement(dim).map(|k| iota_swap(group.iota(), n, k).expect("index in range"));
    (principal_minor(a, s) - sign * principal_minor(a, &dual)).abs()
}

/// `|M_S - det(A) M_{iota(S^c)}|` (sign fixed to +1 for the symplectic group).
pub fn check_group_minor_duality(a: &DMatrix<f64>, group: Group, s: &IndexSet) -> Result<f64, MinorError> {
    let (n, sign) = group_checked(a, group)?;
    Ok(duality_residual(a, group, n, sign, s))
}

pub fn max_duality_residual(a: &DMatrix<f64>, group: Group) -> Result<f64, MinorError> {
    let (n, sign) = group_checked(a, group)?;
    Ok(all_subsets(a.nrows()).map(|s| duality_residual(a, group, n, sign, &s)).fold(0.0, f64::max))
}

/// A form-preserving element with determinant -1: `diag(1,..,1,-1)` for the odd
/// form, the transposition of `e_n` and `e_{2n}` for the even one.
pub fn reflection(group: Group, n: usize) -> DMatrix<f64> {
    let d = group.dim(n);
    let mut r = DMatrix::identity(d, d);
    match group {
        Group::Sp => {}
        Group::SoOdd => r[(d - 1, d - 1)] = -1.0,
        Group::SoEven => {
            r.swap_rows(n - 1, 2 * n - 1);
        }
    }
    r
}

/// `exp(X S)` with `S` symmetric (Sp) or antisymmetric (orthogonal), entries in `[-1/2, 1/2]`.
pub fn random_group_element(group: Group, n: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = group.dim(n);
    let mut s = DMatrix::<f64>::zeros(d, d);
    for i in 0..d {
        for j in i..d {
            let v: f64 = rng.gen_range(-0.5..0.5);
            match group {
                Group::Sp => {
                    s[(i, j)] = v;
                    s[(j, i)] = v;
                }
                _ if i != j => {
                    s[(i, j)] = v;
                    s[(j, i)] = -v;
                }
                _ => {}
            }
        }
    }
    (group.form(n) * s).exp()
}

/// Dense matrix with entries uniform in `[-1, 1]`.
pub fn random_matrix(n: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn set(v: &[usize], n: usize) -> IndexSet {
        IndexSet::new(v.to_vec(), n).unwrap()
    }

    /// Leibniz-formula determinant, used as an independent oracle.
    fn leibniz(a: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> f64 {
        if rows.is_empty() {
            return 1.0;
        }
        let mut total = 0.0;
        for (k, &c) in cols.iter().enumerate() {
            let rest: Vec<usize> = cols.iter().copied().filter(|&x| x != c).collect();
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            total += sign * a[(rows[0], c)] * leibniz(a, &rows[1..], &rest);
        }
        total
    }

    #[test]
    fn minor_examples() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(principal_minor(&a, &set(&[1], 2)), 1.0);
        assert_abs_diff_eq!(principal_minor(&a, &set(&[1, 2], 2)), -2.0, epsilon = 1e-14);
        assert_eq!(principal_minor(&a, &IndexSet::default()), 1.0);
        assert!(IndexSet::new(vec![2, 2], 3).is_err());
        assert!(IndexSet::new(vec![4], 3).is_err());
        assert_eq!(set(&[3, 1], 3).indices(), &[1, 3]);
    }

    #[test]
    fn cofactor_examples() {
        let (a, b, c, d) = (1.5, -2.0, 0.25, 3.0);
        let m = DMatrix::from_row_slice(2, 2, &[a, b, c, d]);
        let want = DMatrix::from_row_slice(2, 2, &[d, -c, -b, a]);
        assert!((cofactor_matrix(&m) - want).amax() < 1e-15);
        let id = DMatrix::<f64>::identity(3, 3);
        assert_eq!(cofactor_matrix(&id), id);

        let r = random_matrix(4, 7);
        let det = leibniz(&r, &[0, 1, 2, 3], &[0, 1, 2, 3]);
        let prod = &r * cofactor_matrix(&r).transpose();
        let diff = prod - DMatrix::identity(4, 4) * det;
        assert!(diff.amax() <= 1e-10 * det.abs().max(1.0));
        // diagonal cofactors are complementary principal minors
        let c = cofactor_matrix(&r);
        for i in 1..=4 {
            assert_abs_diff_eq!(c[(i - 1, i - 1)], principal_minor(&r, &set(&[i], 4).complement(4)), epsilon = 1e-13);
        }
    }

    #[test]
    fn cofactor_identity_cases() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 3.0]);
        assert!(check_cofactor_minor_identity(&m, &set(&[1], 2)).residual < 1e-15);
        let r = random_matrix(5, 11);
        let det = r.determinant();
        let c = cofactor_matrix(&r);
        // Jacobi: 2x2 minors of the cofactor matrix against brute-force expansion
        for s in all_subsets(5).filter(|s| s.len() == 2) {
            let idx: Vec<usize> = s.indices().iter().map(|i| i - 1).collect();
            let comp: Vec<usize> = s.complement(5).indices().iter().map(|i| i - 1).collect();
            let lhs = leibniz(&c, &idx, &idx);
            let rhs = leibniz(&r, &comp, &comp) * det;
            assert!((lhs - rhs).abs() <= 1e-9 * rhs.abs().max(1.0));
            assert!(check_cofactor_minor_identity(&r, &s).residual <= 1e-9);
        }
        assert!(max_cofactor_residual(&random_matrix(4, 3)).residual <= 1e-9);
    }

    #[test]
    fn near_singular_flagged() {
        let mut m = random_matrix(3, 5);
        for j in 0..3 {
            m[(2, j)] = m[(0, j)] + 1e-12 * m[(1, j)];
        }
        let chk = check_cofactor_minor_identity(&m, &set(&[1, 2], 3));
        assert!(chk.near_singular);
    }

    #[test]
    fn omega_is_its_own_example() {
        let o = structure_form_f64(FormKind::Omega, 2);
        assert!(group_deviation(&o, Group::Sp) < 1e-15);
        assert_eq!(principal_minor(&o, &set(&[1], 4)), 0.0);
        assert!(check_group_minor_duality(&o, Group::Sp, &set(&[1], 4)).unwrap() < 1e-15);
        assert!(check_group_minor_duality(&o, Group::Sp, &IndexSet::default()).unwrap() < 1e-15);
    }

    #[test]
    fn group_elements_satisfy_relations() {
        for (g, n) in [(Group::Sp, 2), (Group::Sp, 3), (Group::SoOdd, 2), (Group::SoOdd, 3), (Group::SoEven, 3)] {
            let a = random_group_element(g, n, 99);
            assert!(group_deviation(&a, g) <= 1e-10);
            assert!((a.determinant() - 1.0).abs() <= 1e-10);
            if g != Group::Sp {
                let b = &a * reflection(g, n);
                assert!(group_deviation(&b, g) <= 1e-10);
                assert!((b.determinant() + 1.0).abs() <= 1e-10);
            }
        }
        assert_eq!(random_group_element(Group::Sp, 3, 5), random_group_element(Group::Sp, 3, 5));
    }

    #[test]
    fn duality_exhaustive() {
        let a = random_group_element(Group::Sp, 3, 42);
        assert!(max_duality_residual(&a, Group::Sp).unwrap() <= 1e-8);
        for (g, n) in [(Group::SoOdd, 2), (Group::SoEven, 3), (Group::SoOdd, 3)] {
            let a = random_group_element(g, n, 8);
            assert!(max_duality_residual(&a, g).unwrap() <= 1e-8);
            let b = &a * reflection(g, n);
            assert!(max_duality_residual(&b, g).unwrap() <= 1e-8);
            // ignoring the sign clause must fail for det -1
            let dim = g.dim(n);
            let s = set(&[1], dim);
            let dual = s.complement(dim).map(|k| iota_swap(g.iota(), n, k).unwrap());
            let plain = (principal_minor(&b, &s) - principal_minor(&b, &dual)).abs();
            assert!(plain > 1e-3 || principal_minor(&b, &s).abs() < 1e-3);
        }
    }

    #[test]
    fn rejects_non_members() {
        let a = random_matrix(4, 1);
        assert!(matches!(max_duality_residual(&a, Group::Sp), Err(MinorError::NotInGroup { .. })));
        let a = random_matrix(3, 1);
        assert!(matches!(max_duality_residual(&a, Group::Sp), Err(MinorError::Shape { .. })));
    }
}
