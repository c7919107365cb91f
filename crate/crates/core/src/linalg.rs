//! Exact integer and rational linear algebra for small matrices.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub type Mat3 = [[i64; 3]; 3];
pub type Vec3 = [i64; 3];

pub fn det3(m: &Mat3) -> i64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Adjugate, so that `m * adj(m) = det(m) * I`.
pub fn adjugate3(m: &Mat3) -> Mat3 {
    let mut adj = [[0i64; 3]; 3];
    for (r, row) in adj.iter_mut().enumerate() {
        for (c, v) in row.iter_mut().enumerate() {
            // cofactor of (c, r)
            let rows: Vec<usize> = (0..3).filter(|&i| i != c).collect();
            let cols: Vec<usize> = (0..3).filter(|&j| j != r).collect();
            let minor = m[rows[0]][cols[0]] * m[rows[1]][cols[1]]
                - m[rows[0]][cols[1]] * m[rows[1]][cols[0]];
            *v = if (r + c) % 2 == 0 { minor } else { -minor };
        }
    }
    adj
}

pub fn mat_vec(m: &Mat3, v: &Vec3) -> Vec3 {
    [
        m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
        m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
        m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
    ]
}

pub fn rows_times(rows: &[Vec3], v: &Vec3) -> Vec<i64> {
    rows.iter()
        .map(|r| r[0] * v[0] + r[1] * v[1] + r[2] * v[2])
        .collect()
}

/// `rows * m` for a list of 3-wide rows.
pub fn rows_mul(rows: &[Vec3], m: &Mat3) -> Vec<Vec3> {
    rows.iter()
        .map(|r| {
            let mut out = [0i64; 3];
            for (c, o) in out.iter_mut().enumerate() {
                *o = (0..3).map(|k| r[k] * m[k][c]).sum();
            }
            out
        })
        .collect()
}

pub fn cross(a: &Vec3, b: &Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub fn gcd_all(v: &[i64]) -> i64 {
    v.iter().fold(0i64, |g, x| g.gcd(x))
}

/// Exact inverse of an integer 3x3 matrix, `None` when singular.
pub fn inverse3(m: &Mat3) -> Option<[[BigRational; 3]; 3]> {
    let det = det3(m);
    if det == 0 {
        return None;
    }
    let adj = adjugate3(m);
    let d = BigInt::from(det);
    Some(std::array::from_fn(|r| {
        std::array::from_fn(|c| BigRational::new(BigInt::from(adj[r][c]), d.clone()))
    }))
}

pub fn to_rational(rows: &[Vec<i64>]) -> Vec<Vec<BigRational>> {
    rows.iter()
        .map(|r| r.iter().map(|&v| BigRational::from_integer(v.into())).collect())
        .collect()
}

/// Reduced row echelon form in place; returns the pivot columns.
pub fn rref(m: &mut [Vec<BigRational>]) -> Vec<usize> {
    let rows = m.len();
    let cols = m.first().map_or(0, |r| r.len());
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let Some(p) = (r..rows).find(|&i| !m[i][c].is_zero()) else {
            continue;
        };
        m.swap(r, p);
        let inv = m[r][c].recip();
        for v in m[r].iter_mut() {
            *v = &*v * &inv;
        }
        for i in 0..rows {
            if i != r && !m[i][c].is_zero() {
                let f = m[i][c].clone();
                for j in 0..cols {
                    let delta = &f * &m[r][j];
                    m[i][j] -= delta;
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    pivots
}

pub fn rank(m: &[Vec<BigRational>]) -> usize {
    let mut work = m.to_vec();
    rref(&mut work).len()
}

/// Rational basis of the right kernel of `m` (`cols` columns), one vector per
/// free column.
pub fn rational_kernel(m: &[Vec<BigRational>], cols: usize) -> Vec<Vec<BigRational>> {
    let mut work = m.to_vec();
    let pivots = rref(&mut work);
    let free: Vec<usize> = (0..cols).filter(|c| !pivots.contains(c)).collect();
    free.iter()
        .map(|&f| {
            let mut v = vec![BigRational::zero(); cols];
            v[f] = BigRational::one();
            for (row, &pc) in pivots.iter().enumerate() {
                v[pc] = -work[row][f].clone();
            }
            v
        })
        .collect()
}

/// Scale a rational vector to the primitive integer vector on the same ray.
pub fn primitive_integer(v: &[BigRational]) -> Vec<BigInt> {
    let lcm = v
        .iter()
        .fold(BigInt::one(), |acc, x| acc.lcm(x.denom()));
    let ints: Vec<BigInt> = v.iter().map(|x| (x * BigRational::from_integer(lcm.clone())).to_integer()).collect();
    let g = ints.iter().fold(BigInt::zero(), |acc, x| acc.gcd(x));
    if g.is_zero() {
        return ints;
    }
    ints.into_iter().map(|x| x / &g).collect()
}

pub fn big_to_i64(v: &[BigInt]) -> Vec<i64> {
    v.iter()
        .map(|x| x.to_i64().expect("integer entry exceeds 64 bits"))
        .collect()
}

pub fn is_zero_vec(v: &[BigRational]) -> bool {
    v.iter().all(|x| x.is_zero())
}

pub fn abs_max(v: &[i64]) -> i64 {
    v.iter().map(|x| x.abs()).max().unwrap_or(0)
}

/// Basis of the integer lattice `{ d in Z^3 : rows * d = 0 }`.
///
/// Column-style Hermite reduction: unimodular column operations bring
/// `rows` to echelon form; the columns of the accumulated transform that map
/// to zero span the kernel lattice exactly.
pub fn integer_kernel_lattice(rows: &[Vec3]) -> Vec<Vec3> {
    let mut a: Vec<Vec3> = rows.to_vec();
    // columns of u, stored as u[col]
    let mut u: [Vec3; 3] = [[1, 0, 0], [0, 1, 0], [0, 0, 1]];
    let mut next = 0usize;
    for r in 0..a.len() {
        if next == 3 {
            break;
        }
        loop {
            let nonzero: Vec<usize> = (next..3).filter(|&c| a[r][c] != 0).collect();
            if nonzero.len() <= 1 {
                if let Some(&c) = nonzero.first() {
                    swap_cols(&mut a, &mut u, c, next);
                    next += 1;
                }
                break;
            }
            let piv = *nonzero.iter().min_by_key(|&&c| a[r][c].abs()).unwrap();
            for &c in &nonzero {
                if c != piv {
                    let q = Integer::div_floor(&a[r][c], &a[r][piv]);
                    sub_col(&mut a, &mut u, c, piv, q);
                }
            }
        }
    }
    (next..3).map(|c| u[c]).collect()
}

fn swap_cols(a: &mut [Vec3], u: &mut [Vec3; 3], i: usize, j: usize) {
    if i == j {
        return;
    }
    for row in a.iter_mut() {
        row.swap(i, j);
    }
    u.swap(i, j);
}

fn sub_col(a: &mut [Vec3], u: &mut [Vec3; 3], target: usize, src: usize, q: i64) {
    for row in a.iter_mut() {
        row[target] -= q * row[src];
    }
    for k in 0..3 {
        u[target][k] -= q * u[src][k];
    }
}

/// Split a lattice basis into one vector with the smallest positive third
/// component (if any vector has a nonzero one) and a basis of the sublattice
/// whose third component is zero.
pub fn split_on_last(basis: &[Vec3]) -> (Option<Vec3>, Vec<Vec3>) {
    let mut vs: Vec<Vec3> = basis.to_vec();
    loop {
        let nz: Vec<usize> = (0..vs.len()).filter(|&i| vs[i][2] != 0).collect();
        if nz.len() <= 1 {
            let temporal = nz.first().map(|&i| {
                let v = vs[i];
                if v[2] < 0 {
                    [-v[0], -v[1], -v[2]]
                } else {
                    v
                }
            });
            let rest = (0..vs.len()).filter(|i| !nz.contains(i)).map(|i| vs[i]).collect();
            return (temporal, rest);
        }
        let piv = *nz.iter().min_by_key(|&&i| vs[i][2].abs()).unwrap();
        for &i in &nz {
            if i != piv {
                let q = Integer::div_floor(&vs[i][2], &vs[piv][2]);
                let p = vs[piv];
                for k in 0..3 {
                    vs[i][k] -= q * p[k];
                }
            }
        }
    }
}

/// Lagrange-Gauss reduction of a planar lattice basis (vectors in Z^2).
pub fn reduce_2d(a: [i64; 2], b: [i64; 2]) -> ([i64; 2], [i64; 2]) {
    let norm = |v: [i64; 2]| v[0] * v[0] + v[1] * v[1];
    let (mut u, mut v) = if norm(a) <= norm(b) { (a, b) } else { (b, a) };
    loop {
        let dot = u[0] * v[0] + u[1] * v[1];
        let nu = norm(u);
        if nu == 0 {
            return (u, v);
        }
        // nearest integer to dot / nu
        let q = Integer::div_floor(&(2 * dot + nu), &(2 * nu));
        v = [v[0] - q * u[0], v[1] - q * u[1]];
        if norm(v) >= nu {
            return (u, v);
        }
        std::mem::swap(&mut u, &mut v);
    }
}
