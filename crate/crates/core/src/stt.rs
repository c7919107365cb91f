//! Space-time transformation: legality, the iteration to (PE, cycle) map and
//! the reuse subspace of a tensor access.

use std::fmt;
use std::str::FromStr;

use num_rational::BigRational;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Mat3, Vec3};

/// A 3x3 integer transformation plus the loops it is applied to.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SttMatrix {
    pub entries: Mat3,
    pub selected_iterators: [String; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LegalityVerdict {
    pub legal: bool,
    pub det: i64,
}

/// PE coordinates `p` and cycle `t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SpaceTimePoint {
    pub p: [i64; 2],
    pub t: i64,
}

impl SttMatrix {
    pub fn new(entries: Mat3, selected_iterators: [String; 3]) -> Self {
        SttMatrix {
            entries,
            selected_iterators,
        }
    }

    pub fn det(&self) -> i64 {
        linalg::det3(&self.entries)
    }

    pub fn adjugate(&self) -> Mat3 {
        linalg::adjugate3(&self.entries)
    }

    pub fn flat(&self) -> [i64; 9] {
        let e = &self.entries;
        [
            e[0][0], e[0][1], e[0][2], e[1][0], e[1][1], e[1][2], e[2][0], e[2][1], e[2][2],
        ]
    }
}

/// Parses `"1,0,0;0,1,0;1,1,1"` (rows separated by `;`) or nine
/// comma-separated entries.
pub fn parse_matrix(text: &str) -> Result<Mat3> {
    let nums: Vec<i64> = text
        .split([';', ',', ' '])
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            s.trim()
                .parse::<i64>()
                .map_err(|_| Error::InvalidSelection(format!("bad matrix entry `{s}`")))
        })
        .collect::<Result<_>>()?;
    if nums.len() != 9 {
        return Err(Error::InvalidSelection(format!(
            "a space-time matrix needs 9 entries, got {}",
            nums.len()
        )));
    }
    Ok(std::array::from_fn(|r| std::array::from_fn(|c| nums[r * 3 + c])))
}

pub fn format_matrix(m: &Mat3) -> String {
    m.iter()
        .map(|r| format!("{},{},{}", r[0], r[1], r[2]))
        .collect::<Vec<_>>()
        .join(";")
}

/// A transformation is legal iff it is full rank.
pub fn validate_stt(t: &SttMatrix) -> LegalityVerdict {
    let det = t.det();
    LegalityVerdict {
        legal: det != 0,
        det,
    }
}

pub fn space_time_map(t: &SttMatrix, x: Vec3) -> SpaceTimePoint {
    let v = linalg::mat_vec(&t.entries, &x);
    SpaceTimePoint {
        p: [v[0], v[1]],
        t: v[2],
    }
}

/// Space-time displacements `(dp_x, dp_y, dt)` under which a tensor element
/// recurs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReuseSpace {
    pub dimension: usize,
    pub basis: Vec<Vec3>,
}

impl ReuseSpace {
    /// Builds a normalized reuse space from arbitrary nonzero rational
    /// spanning vectors (assumed independent).
    pub fn from_rational_basis(basis: &[[BigRational; 3]]) -> Self {
        let basis: Vec<Vec3> = basis
            .iter()
            .map(|v| {
                let ints = linalg::big_to_i64(&linalg::primitive_integer(v));
                normalize_direction([ints[0], ints[1], ints[2]])
            })
            .collect();
        ReuseSpace {
            dimension: basis.len(),
            basis,
        }
    }

    pub fn contains(&self, v: &Vec3) -> bool {
        match self.basis.as_slice() {
            [] => *v == [0, 0, 0],
            [a] => linalg::cross(a, v) == [0, 0, 0],
            [a, b] => linalg::det3(&[*a, *b, *v]) == 0,
            _ => true,
        }
    }

    /// Same subspace, whatever the basis.
    pub fn same_span(&self, other: &ReuseSpace) -> bool {
        self.dimension == other.dimension && other.basis.iter().all(|v| self.contains(v))
    }
}

/// Primitive direction with `dt > 0`, or `dt == 0` and first nonzero spatial
/// entry positive.
pub fn normalize_direction(v: Vec3) -> Vec3 {
    let g = linalg::gcd_all(&v).max(1);
    let v = [v[0] / g, v[1] / g, v[2] / g];
    let flip = if v[2] != 0 {
        v[2] < 0
    } else if v[0] != 0 {
        v[0] < 0
    } else {
        v[1] < 0
    };
    if flip {
        [-v[0], -v[1], -v[2]]
    } else {
        v
    }
}

/// The product `A * T^-1` in exact arithmetic.
pub fn access_times_inverse(access: &[Vec3], t: &SttMatrix) -> Result<Vec<Vec<BigRational>>> {
    let inv = linalg::inverse3(&t.entries).ok_or(Error::SingularStt { det: 0 })?;
    Ok(access
        .iter()
        .map(|row| {
            (0..3)
                .map(|c| {
                    (0..3).fold(BigRational::zero(), |acc, k| {
                        acc + BigRational::from_integer(row[k].into()) * &inv[k][c]
                    })
                })
                .collect()
        })
        .collect())
}

/// Kernel of `A * T^-1` for an access restricted to the selected loops.
///
/// `T^-1 = adj(T) / det`, so the kernel equals that of the integer matrix
/// `A * adj(T)`; it is computed by exact integer column reduction.
pub fn reuse_space(access: &[Vec3], t: &SttMatrix) -> Result<ReuseSpace> {
    let det = t.det();
    if det == 0 {
        return Err(Error::SingularStt { det });
    }
    let m = linalg::rows_mul(access, &t.adjugate());
    let basis: Vec<Vec3> = linalg::integer_kernel_lattice(&m)
        .into_iter()
        .map(normalize_direction)
        .collect();
    Ok(ReuseSpace {
        dimension: basis.len(),
        basis,
    })
}

/// The same subspace by rational Gaussian elimination on `A * T^-1`.
pub fn reuse_space_rational(access: &[Vec3], t: &SttMatrix) -> Result<ReuseSpace> {
    let m = access_times_inverse(access, t)?;
    let kernel = linalg::rational_kernel(&m, 3);
    let rational: Vec<[BigRational; 3]> = kernel
        .into_iter()
        .map(|v| [v[0].clone(), v[1].clone(), v[2].clone()])
        .collect();
    Ok(ReuseSpace::from_rational_basis(&rational))
}

/// Exact check that `A * T^-1 * v = 0`.
pub fn annihilates(access: &[Vec3], t: &SttMatrix, v: &Vec3) -> Result<bool> {
    let m = access_times_inverse(access, t)?;
    Ok(m.iter().all(|row| {
        row.iter()
            .zip(v)
            .fold(BigRational::zero(), |acc, (a, x)| acc + a * BigRational::from_integer((*x).into()))
            .is_zero()
    }))
}

impl fmt::Display for SpaceTimePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PE({}, {}) @ t={}", self.p[0], self.p[1], self.t)
    }
}

impl FromStr for SttMatrix {
    type Err = Error;

    /// `"1,0,0;0,1,0;1,1,1@m,n,k"`
    fn from_str(s: &str) -> Result<Self> {
        let (m, sel) = s
            .split_once('@')
            .ok_or_else(|| Error::InvalidSelection("expected `matrix@i,j,k`".into()))?;
        let names: Vec<String> = sel.split(',').map(|x| x.trim().to_string()).collect();
        if names.len() != 3 {
            return Err(Error::InvalidSelection("expected three loop names".into()));
        }
        Ok(SttMatrix::new(
            parse_matrix(m)?,
            [names[0].clone(), names[1].clone(), names[2].clone()],
        ))
    }
}

/// Largest absolute entry, used when rendering diagnostics.
pub fn max_abs_entry(m: &Mat3) -> i64 {
    m.iter().flatten().map(|v| v.abs()).max().unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sel() -> [String; 3] {
        ["i".into(), "j".into(), "k".into()]
    }

    const OS: Mat3 = [[1, 0, 0], [0, 1, 0], [1, 1, 1]];

    #[test]
    fn legality() {
        let v = validate_stt(&SttMatrix::new(OS, sel()));
        assert_eq!(v, LegalityVerdict { legal: true, det: 1 });
        let id = [[1, 0, 0], [0, 1, 0], [0, 0, 1]];
        assert!(validate_stt(&SttMatrix::new(id, sel())).legal);
        let bad = [[1, 0, 0], [1, 0, 0], [0, 0, 1]];
        assert_eq!(
            validate_stt(&SttMatrix::new(bad, sel())),
            LegalityVerdict { legal: false, det: 0 }
        );
    }

    #[test]
    fn worked_example_mapping() {
        let pt = space_time_map(&SttMatrix::new(OS, sel()), [1, 2, 3]);
        assert_eq!(pt, SpaceTimePoint { p: [1, 2], t: 6 });
        let id = SttMatrix::new([[1, 0, 0], [0, 1, 0], [0, 0, 1]], sel());
        assert_eq!(space_time_map(&id, [4, -2, 7]), SpaceTimePoint { p: [4, -2], t: 7 });
    }

    #[test]
    fn gemm_reuse() {
        let t = SttMatrix::new(OS, sel());
        let a = reuse_space(&[[1, 0, 0], [0, 0, 1]], &t).unwrap();
        assert_eq!(a, ReuseSpace { dimension: 1, basis: vec![[0, 1, 1]] });
        let c = reuse_space(&[[1, 0, 0], [0, 1, 0]], &t).unwrap();
        assert_eq!(c.basis, vec![[0, 0, 1]]);
        let b = reuse_space(&[[0, 1, 0], [0, 0, 1]], &t).unwrap();
        assert_eq!(b.basis, vec![[1, 0, 1]]);
    }

    #[test]
    fn unicast_and_planar_reuse() {
        let id = SttMatrix::new([[1, 0, 0], [0, 1, 0], [0, 0, 1]], sel());
        let r = reuse_space(&[[1, 0, 0], [0, 1, 0], [0, 0, 1]], &id).unwrap();
        assert_eq!(r.dimension, 0);
        assert!(r.basis.is_empty());
        let r = reuse_space(&[[0, 1, 0], [0, 0, 0]], &id).unwrap();
        assert_eq!(r.basis, vec![[1, 0, 0], [0, 0, 1]]);
    }

    #[test]
    fn matrix_text() {
        assert_eq!(parse_matrix("1,0,0;0,1,0;1,1,1").unwrap(), OS);
        assert_eq!(format_matrix(&OS), "1,0,0;0,1,0;1,1,1");
        assert!(parse_matrix("1,2").is_err());
    }

    #[test]
    fn normalization() {
        assert_eq!(normalize_direction([0, -2, -2]), [0, 1, 1]);
        assert_eq!(normalize_direction([-1, 1, 0]), [1, -1, 0]);
        assert_eq!(normalize_direction([0, -3, 0]), [0, 1, 0]);
    }
}
