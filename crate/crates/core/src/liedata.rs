//! Cartan matrices, invariant forms and index involutions for the classical series.
//!
//! Public indices are 1-based; matrix storage is 0-based.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LieError {
    #[error("{family} requires rank at least {min}, got {rank}")]
    RankTooSmall { family: Family, rank: usize, min: usize },
    #[error("index {index} out of range 1..={max}")]
    IndexOutOfRange { index: usize, max: usize },
    #[error("unknown family `{0}`")]
    UnknownFamily(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    A,
    B,
    C,
    D,
}

impl Family {
    pub fn min_rank(self) -> usize {
        match self {
            Family::A => 1,
            Family::B | Family::C => 2,
            Family::D => 3,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Family::A => "A",
            Family::B => "B",
            Family::C => "C",
            Family::D => "D",
        };
        f.write_str(s)
    }
}

impl FromStr for Family {
    type Err = LieError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "A" | "a" => Ok(Family::A),
            "B" | "b" => Ok(Family::B),
            "C" | "c" => Ok(Family::C),
            "D" | "d" => Ok(Family::D),
            other => Err(LieError::UnknownFamily(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LieType {
    family: Family,
    rank: usize,
}

impl LieType {
    pub fn new(family: Family, rank: usize) -> Result<Self, LieError> {
        let min = family.min_rank();
        if rank < min {
            return Err(LieError::RankTooSmall { family, rank, min });
        }
        Ok(LieType { family, rank })
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Length of the chiral vector: n+1, 2n+1, 2n, 2n.
    pub fn vector_len(&self) -> usize {
        let n = self.rank;
        match self.family {
            Family::A => n + 1,
            Family::B => 2 * n + 1,
            Family::C | Family::D => 2 * n,
        }
    }

    /// `C_2` coincides with `B_2` up to relabeling.
    pub fn is_folded_c2(&self) -> bool {
        self.family == Family::C && self.rank == 2
    }
}

impl fmt::Display for LieType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}_{}", self.family, self.rank)
    }
}

pub fn cartan_matrix(lt: LieType) -> DMatrix<i64> {
    let n = lt.rank();
    let mut a = DMatrix::<i64>::zeros(n, n);
    for i in 0..n {
        a[(i, i)] = 2;
    }
    let chain_end = match lt.family() {
        Family::D => n - 1,
        _ => n,
    };
    for i in 1..chain_end {
        a[(i - 1, i)] = -1;
        a[(i, i - 1)] = -1;
    }
    match lt.family() {
        Family::A => {}
        Family::B => a[(n - 2, n - 1)] = -2,
        Family::C => a[(n - 1, n - 2)] = -2,
        Family::D => {
            a[(n - 3, n - 1)] = -1;
            a[(n - 1, n - 3)] = -1;
        }
    }
    a
}

pub fn cartan_matrix_f64(lt: LieType) -> DMatrix<f64> {
    cartan_matrix(lt).map(|v| v as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FormKind {
    Omega,
    ThetaOdd,
    ThetaEven,
    J,
    K,
}

/// Integer pairing matrix.
///
/// `Omega`, `ThetaOdd`, `ThetaEven` and `K` take the rank `n` (dimensions 2n,
/// 2n+1, 2n, 2n); `J` takes its dimension `m` directly.
pub fn structure_form(kind: FormKind, n: usize) -> DMatrix<i64> {
    match kind {
        FormKind::Omega => {
            let mut m = DMatrix::zeros(2 * n, 2 * n);
            for i in 0..n {
                m[(i, n + i)] = 1;
                m[(n + i, i)] = -1;
            }
            m
        }
        FormKind::ThetaOdd => {
            let mut m = DMatrix::zeros(2 * n + 1, 2 * n + 1);
            for i in 0..n {
                m[(i, n + i)] = 1;
                m[(n + i, i)] = 1;
            }
            m[(2 * n, 2 * n)] = 1;
            m
        }
        FormKind::ThetaEven => {
            let mut m = DMatrix::zeros(2 * n, 2 * n);
            for i in 0..n {
                m[(i, n + i)] = 1;
                m[(n + i, i)] = 1;
            }
            m
        }
        FormKind::J => {
            let mut m = DMatrix::zeros(n, n);
            for i in 0..n {
                m[(i, n - 1 - i)] = if i % 2 == 0 { 1 } else { -1 };
            }
            m
        }
        FormKind::K => {
            let d = 2 * n;
            let mut m = DMatrix::zeros(d, d);
            for p in 0..d {
                let q = d - 1 - p;
                m[(p, q)] = if p.min(q) % 2 == 0 { 1 } else { -1 };
            }
            m
        }
    }
}

pub fn structure_form_f64(kind: FormKind, n: usize) -> DMatrix<f64> {
    structure_form(kind, n).map(|v| v as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IotaKind {
    /// `{1..2n+1}`, fixing `2n+1`.
    BOdd,
    /// `{1..2n}`.
    Even,
}

/// The half-swap `k -> k +- n` used by the minor duality.
pub fn iota_swap(kind: IotaKind, n: usize, index: usize) -> Result<usize, LieError> {
    let max = match kind {
        IotaKind::BOdd => 2 * n + 1,
        IotaKind::Even => 2 * n,
    };
    if index == 0 || index > max {
        return Err(LieError::IndexOutOfRange { index, max });
    }
    Ok(if index <= n {
        index + n
    } else if index <= 2 * n {
        index - n
    } else {
        index
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SwapKind {
    /// `s(i) = n+1-i` on `1..n`.
    Line,
    /// The reversal on `1..2n-2` that fixes `n-1` and `n`.
    D,
}

pub fn leznov_swap_s(kind: SwapKind, n: usize, index: usize) -> Result<usize, LieError> {
    let max = match kind {
        SwapKind::Line => n,
        SwapKind::D => 2 * n - 2,
    };
    if index == 0 || index > max {
        return Err(LieError::IndexOutOfRange { index, max });
    }
    Ok(match kind {
        SwapKind::Line => n + 1 - index,
        SwapKind::D if index == n - 1 || index == n => index,
        SwapKind::D => 2 * n - 1 - index,
    })
}
