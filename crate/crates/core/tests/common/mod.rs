//! Independent oracles shared by the integration tests. Nothing here calls
//! into the library's linear algebra or classification code.

#![allow(dead_code)]

use num_rational::Rational64;
use sttgen::dataflow::{DataflowKind, IoRole, Reuse2DKind};

pub type Q = Rational64;

fn q(v: i64) -> Q {
    Q::from_integer(v)
}

/// Gauss-Jordan inverse over the rationals; `None` when singular.
pub fn inverse(t: &[[i64; 3]; 3]) -> Option<[[Q; 3]; 3]> {
    let mut a: Vec<Vec<Q>> = (0..3)
        .map(|r| {
            let mut row: Vec<Q> = t[r].iter().map(|&v| q(v)).collect();
            row.extend((0..3).map(|c| q((r == c) as i64)));
            row
        })
        .collect();
    for col in 0..3 {
        let piv = (col..3).find(|&r| a[r][col] != q(0))?;
        a.swap(col, piv);
        let p = a[col][col];
        for v in a[col].iter_mut() {
            *v /= p;
        }
        for r in 0..3 {
            if r != col && a[r][col] != q(0) {
                let f = a[r][col];
                for c in 0..6 {
                    let sub = f * a[col][c];
                    a[r][c] -= sub;
                }
            }
        }
    }
    Some(std::array::from_fn(|r| std::array::from_fn(|c| a[r][c + 3])))
}

/// `A * T^-1`.
pub fn access_times_inverse(access: &[[i64; 3]], t: &[[i64; 3]; 3]) -> Option<Vec<[Q; 3]>> {
    let inv = inverse(t)?;
    Some(
        access
            .iter()
            .map(|row| std::array::from_fn(|c| (0..3).map(|k| q(row[k]) * inv[k][c]).sum()))
            .collect(),
    )
}

/// Null-space basis of a rational matrix with three columns, one vector per
/// free column of the reduced row echelon form.
pub fn nullspace(m: &[[Q; 3]]) -> Vec<[Q; 3]> {
    let mut a: Vec<[Q; 3]> = m.to_vec();
    let mut pivots = Vec::new();
    let mut row = 0;
    for col in 0..3 {
        let Some(piv) = (row..a.len()).find(|&r| a[r][col] != q(0)) else {
            continue;
        };
        a.swap(row, piv);
        let p = a[row][col];
        for v in a[row].iter_mut() {
            *v /= p;
        }
        for r in 0..a.len() {
            if r != row && a[r][col] != q(0) {
                let f = a[r][col];
                for c in 0..3 {
                    let sub = f * a[row][c];
                    a[r][c] -= sub;
                }
            }
        }
        pivots.push(col);
        row += 1;
    }
    (0..3)
        .filter(|c| !pivots.contains(c))
        .map(|free| {
            let mut v = [q(0); 3];
            v[free] = q(1);
            for (r, &pc) in pivots.iter().enumerate() {
                v[pc] = -a[r][free];
            }
            v
        })
        .collect()
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

fn lcm(a: i64, b: i64) -> i64 {
    a / gcd(a, b) * b
}

/// Smallest integer multiple, sign fixed so `dt > 0`, or `dt = 0` and the
/// first nonzero spatial entry is positive.
pub fn primitive(v: &[Q; 3]) -> [i64; 3] {
    let den = v.iter().fold(1, |acc, x| lcm(acc, *x.denom()));
    let ints: Vec<i64> = v.iter().map(|x| (x * q(den)).to_integer()).collect();
    let g = ints.iter().fold(0, |acc, &x| gcd(acc, x)).max(1);
    let mut out = [ints[0] / g, ints[1] / g, ints[2] / g];
    let lead = if out[2] != 0 { out[2] } else if out[0] != 0 { out[0] } else { out[1] };
    if lead < 0 {
        out = out.map(|x| -x);
    }
    out
}

pub fn cross(a: &[i64; 3], b: &[i64; 3]) -> [i64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub fn annihilated(m: &[[Q; 3]], v: &[i64; 3]) -> bool {
    m.iter().all(|row| (0..3).map(|c| row[c] * q(v[c])).sum::<Q>() == q(0))
}

/// Dataflow of one tensor from first principles: kind, planar sub-kind and
/// the canonical direction (reuse line, or normal of the reuse plane).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct OracleFlow {
    pub kind: DataflowKind,
    pub sub_kind: Option<Reuse2DKind>,
    pub direction: Option<[i64; 3]>,
}

pub fn classify(access: &[[i64; 3]], t: &[[i64; 3]; 3], role: IoRole) -> Option<OracleFlow> {
    let m = access_times_inverse(access, t)?;
    let basis: Vec<[i64; 3]> = nullspace(&m).iter().map(primitive).collect();
    let flow = match basis.len() {
        0 => OracleFlow {
            kind: DataflowKind::Unicast,
            sub_kind: None,
            direction: None,
        },
        1 => {
            let v = basis[0];
            let kind = if v[0] == 0 && v[1] == 0 {
                DataflowKind::Stationary
            } else if v[2] != 0 {
                DataflowKind::Systolic
            } else if role == IoRole::Input {
                DataflowKind::Multicast
            } else {
                DataflowKind::ReductionTree
            };
            OracleFlow {
                kind,
                sub_kind: None,
                direction: Some(v),
            }
        }
        2 => {
            let normal = primitive(&cross(&basis[0], &basis[1]).map(q));
            // the plane holds (0,0,1) iff its normal has no time component
            let sub = if normal[0] == 0 && normal[1] == 0 {
                Reuse2DKind::Broadcast
            } else if normal[2] == 0 {
                Reuse2DKind::MulticastStationary
            } else {
                Reuse2DKind::SystolicMulticast
            };
            OracleFlow {
                kind: DataflowKind::Reuse2D,
                sub_kind: Some(sub),
                direction: Some(normal),
            }
        }
        _ => OracleFlow {
            kind: DataflowKind::Reuse2D,
            sub_kind: Some(Reuse2DKind::Broadcast),
            direction: None,
        },
    };
    Some(flow)
}

/// Access rows restricted to three chosen loops.
pub fn restrict(matrix: &[Vec<i64>], loops: [usize; 3]) -> Vec<[i64; 3]> {
    matrix.iter().map(|row| loops.map(|l| row[l])).collect()
}

/// Loop-nest evaluation written independently of the library: every
/// iteration point is visited with an explicit mixed-radix counter.
pub fn brute_force_output(
    bounds: &[usize],
    output: &[Vec<i64>],
    out_extents: &[usize],
    inputs: &[(&[Vec<i64>], &[usize], &[i64])],
) -> Vec<i64> {
    let flat = |rows: &[Vec<i64>], extents: &[usize], x: &[usize]| -> usize {
        rows.iter().zip(extents).fold(0, |acc, (row, &e)| {
            let i: i64 = row.iter().zip(x).map(|(a, &b)| a * b as i64).sum();
            acc * e + i as usize
        })
    };
    let mut out = vec![0i64; out_extents.iter().product()];
    let volume: usize = bounds.iter().product();
    let mut x = vec![0usize; bounds.len()];
    for n in 0..volume {
        let mut rem = n;
        for d in (0..bounds.len()).rev() {
            x[d] = rem % bounds[d];
            rem /= bounds[d];
        }
        let prod: i64 = inputs.iter().map(|(rows, ext, data)| data[flat(rows, ext, &x)]).product();
        out[flat(output, out_extents, &x)] += prod;
    }
    out
}
