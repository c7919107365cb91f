//! Reuse as the hardware sees it: integer steps between uses of one element.
//!
//! The rational reuse subspace fixes the dataflow kind. The hardware needs the
//! integer lattice inside it: only space-time displacements that are images
//! of integer iteration steps connect two real uses of an element. When
//! `|det T| > 1` this lattice is coarser than the primitive rational
//! directions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Mat3, Vec3};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HardwareReuse {
    /// Smallest-`dt` step between consecutive uses, `dt > 0`.
    pub temporal: Option<Vec3>,
    pub temporal_iter: Option<Vec3>,
    /// Same-cycle sharing lattice over PE coordinates.
    pub spatial: Vec<[i64; 2]>,
}

fn linf(v: [i64; 2]) -> i64 {
    v[0].abs().max(v[1].abs())
}

/// Sign convention only: lattice vectors keep their length.
fn normalize_2d(v: [i64; 2]) -> [i64; 2] {
    if v[0] < 0 || (v[0] == 0 && v[1] < 0) {
        [-v[0], -v[1]]
    } else {
        v
    }
}

/// Derives the temporal step and spatial sharing lattice of a restricted
/// access under `stt`. Non-adjacent steps are rejected.
pub fn hardware_reuse(access: &[Vec3], stt: &Mat3) -> Result<HardwareReuse> {
    let det = linalg::det3(stt);
    if det == 0 {
        return Err(Error::SingularStt { det });
    }
    let kernel = linalg::integer_kernel_lattice(access);
    let images: Vec<Vec3> = kernel.iter().map(|d| linalg::mat_vec(stt, d)).collect();
    let (temporal, flat) = linalg::split_on_last(&images);
    let mut spatial: Vec<[i64; 2]> = flat.iter().map(|v| [v[0], v[1]]).collect();
    if spatial.len() == 2 {
        let (a, b) = linalg::reduce_2d(spatial[0], spatial[1]);
        spatial = vec![a, b];
    }
    let spatial: Vec<[i64; 2]> = spatial.into_iter().map(normalize_2d).collect();

    let temporal = temporal.map(|v| reduce_modulo(v, &spatial));
    if let Some(v) = temporal {
        if linf([v[0], v[1]]) > 1 {
            return Err(Error::Unsupported(format!(
                "reuse step ({},{},{}) links non-adjacent PEs",
                v[0], v[1], v[2]
            )));
        }
    }
    if spatial.len() == 1 && linf(spatial[0]) > 1 {
        return Err(Error::Unsupported(format!(
            "multicast step ({},{}) skips PEs",
            spatial[0][0], spatial[0][1]
        )));
    }
    let adj = linalg::adjugate3(stt);
    let temporal_iter = temporal.map(|v| {
        let n = linalg::mat_vec(&adj, &v);
        debug_assert!(n.iter().all(|c| c % det == 0));
        [n[0] / det, n[1] / det, n[2] / det]
    });
    Ok(HardwareReuse {
        temporal,
        temporal_iter,
        spatial,
    })
}

/// Shortest representative of `v + spatial lattice`.
fn reduce_modulo(v: Vec3, spatial: &[[i64; 2]]) -> Vec3 {
    let key = |c: [i64; 2]| (linf(c), c[0].abs() + c[1].abs(), std::cmp::Reverse(c));
    let base = [v[0], v[1]];
    let mut best = base;
    const R: i64 = 8;
    match spatial {
        [] => {}
        [a] => {
            for k in -R..=R {
                let c = [base[0] + k * a[0], base[1] + k * a[1]];
                if key(c) < key(best) {
                    best = c;
                }
            }
        }
        [a, b, ..] => {
            for k in -R..=R {
                for l in -R..=R {
                    let c = [base[0] + k * a[0] + l * b[0], base[1] + k * a[1] + l * b[1]];
                    if key(c) < key(best) {
                        best = c;
                    }
                }
            }
        }
    }
    [best[0], best[1], v[2]]
}

/// Key identifying the same-cycle sharing group of a PE: two PEs share an
/// element in one cycle iff their keys are equal.
pub fn group_key(access: &[Vec3], stt: &Mat3, p: [i64; 2]) -> Vec<i64> {
    let adj = linalg::adjugate3(stt);
    let det = linalg::det3(stt).abs();
    let v = [p[0], p[1], 0];
    let iter_num = linalg::mat_vec(&adj, &v);
    let mut key = linalg::rows_times(access, &iter_num);
    if det > 1 {
        key.extend(iter_num.iter().map(|x| x.rem_euclid(det)));
    }
    key
}
