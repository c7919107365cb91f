//! Design-space enumeration, analytic cost model and exploration driver.

mod cost;
mod explore;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::TensorAlgebra;
use crate::arch::tensor_modules;
use crate::dataflow::{DataflowKind, Reuse2DKind, TensorDataflow};
use crate::linalg::{self, Mat3, Vec3};
use crate::stt::{normalize_direction, SttMatrix};
use crate::tiling::{select_loops_and_tile, ArrayDims};

pub use cost::{estimate_cost, AreaWeights, CostReport, EnergyWeights, SimSummary};
pub use explore::{explore, pareto_front, Evaluated, Exploration, ExploreStatus};

pub const DEFAULT_TIME_BUDGET: usize = 1 << 16;

/// How enumerated points collapse into one.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Dedup {
    /// Same loops and per-tensor (kind, direction).
    #[default]
    Signature,
    /// As `Signature`, also identifying mirrored or transposed layouts.
    ArraySymmetry,
}

/// Per-tensor part of a dataflow signature: kind, planar sub-kind and a
/// canonical direction (the reuse line, or the normal of the reuse plane).
pub type TensorSignature = (DataflowKind, Option<Reuse2DKind>, Option<Vec3>);

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Signature {
    /// Selected loops as an unordered set.
    pub loops: [usize; 3],
    pub tensors: Vec<TensorSignature>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DesignPoint {
    pub algebra: String,
    pub selected_iterators: [String; 3],
    pub selection: [usize; 3],
    pub stt: SttMatrix,
    pub tiles: [usize; 3],
    pub time_budget: usize,
    pub dataflows: Vec<TensorDataflow>,
    pub name: String,
    pub signature: Signature,
    /// A selected loop has bound 1, so one array dimension is wasted.
    pub degenerate: bool,
}

pub fn tensor_signature(flow: &TensorDataflow) -> TensorSignature {
    let dir = match flow.direction.len() {
        1 => Some(normalize_direction(flow.direction[0])),
        2 => Some(normalize_direction(linalg::cross(&flow.direction[0], &flow.direction[1]))),
        _ => None,
    };
    (flow.kind, flow.sub_kind, dir)
}

pub fn signature(selection: [usize; 3], flows: &[TensorDataflow]) -> Signature {
    let mut loops = selection;
    loops.sort_unstable();
    Signature {
        loops,
        tensors: flows.iter().map(tensor_signature).collect(),
    }
}

/// Canonical representative of a signature under the symmetries of the
/// array: mirroring either axis and, for square arrays, transposing.
pub fn array_symmetry_class(sig: &Signature, square: bool) -> Signature {
    let mut best: Option<Signature> = None;
    for swap in [false, true] {
        if swap && !square {
            continue;
        }
        for sx in [1, -1] {
            for sy in [1, -1] {
                let map = |v: Vec3| {
                    let (x, y) = if swap { (v[1], v[0]) } else { (v[0], v[1]) };
                    normalize_direction([sx * x, sy * y, v[2]])
                };
                let cand = Signature {
                    loops: sig.loops,
                    tensors: sig.tensors.iter().map(|&(k, s, d)| (k, s, d.map(map))).collect(),
                };
                if best.as_ref().is_none_or(|b| cand < *b) {
                    best = Some(cand);
                }
            }
        }
    }
    best.expect("identity is always a candidate")
}

/// All 3x3 matrices over `alphabet`, ordered by the sum of absolute entries
/// and then lexicographically by entry position in the alphabet.
pub fn candidate_matrices(alphabet: &[i64]) -> Vec<Mat3> {
    let mut alpha = alphabet.to_vec();
    alpha.sort_by_key(|&v| (v.abs(), v));
    alpha.dedup();
    let n = alpha.len();
    if n == 0 {
        return Vec::new();
    }
    let total = n.pow(9);
    let mut out: Vec<(i64, [usize; 9])> = (0..total)
        .map(|mut code| {
            let mut digits = [0usize; 9];
            for d in digits.iter_mut().rev() {
                *d = code % n;
                code /= n;
            }
            let weight = digits.iter().map(|&d| alpha[d].abs()).sum();
            (weight, digits)
        })
        .collect();
    out.sort();
    out.into_iter()
        .map(|(_, d)| std::array::from_fn(|r| std::array::from_fn(|c| alpha[d[r * 3 + c]])))
        .collect()
}

/// Three-loop selections in declaration order. Reordering a selection is
/// the same as permuting the columns of the STT, which the matrix
/// enumeration already covers.
pub fn loop_selections(n: usize) -> Vec<[usize; 3]> {
    let mut out = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            for c in b + 1..n {
                out.push([a, b, c]);
            }
        }
    }
    out
}

/// Evaluates one candidate: `None` when singular or not implementable.
pub fn design_point(
    algebra: &TensorAlgebra,
    selection: [usize; 3],
    matrix: Mat3,
    array: ArrayDims,
    time_budget: usize,
) -> Option<DesignPoint> {
    if linalg::det3(&matrix) == 0 {
        return None;
    }
    let names = selection.map(|i| algebra.iterators[i].name.clone());
    let stt = SttMatrix::new(matrix, names.clone());
    let (modules, name, _) = tensor_modules(algebra, &stt).ok()?;
    let plan = select_loops_and_tile(algebra, selection, &matrix, array, time_budget).ok()?;
    let dataflows: Vec<TensorDataflow> = modules.into_iter().map(|m| m.dataflow).collect();
    Some(DesignPoint {
        algebra: algebra.name.clone(),
        selected_iterators: names,
        selection,
        signature: signature(selection, &dataflows),
        tiles: plan.tile,
        time_budget,
        degenerate: !plan.warnings.is_empty(),
        stt,
        dataflows,
        name,
    })
}

pub fn enumerate_designs(algebra: &TensorAlgebra, array: ArrayDims, alphabet: &[i64]) -> Vec<DesignPoint> {
    enumerate_designs_with(algebra, array, alphabet, DEFAULT_TIME_BUDGET, Dedup::Signature)
}

/// Legal points, deduplicated by `dedup`; the first point of each class
/// in (selection, matrix) order is kept.
pub fn enumerate_designs_with(
    algebra: &TensorAlgebra,
    array: ArrayDims,
    alphabet: &[i64],
    time_budget: usize,
    dedup: Dedup,
) -> Vec<DesignPoint> {
    let square = array.rows == array.cols;
    if algebra.iterators.len() < 3 {
        return Vec::new();
    }
    let matrices = candidate_matrices(alphabet);
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::new();
    for selection in loop_selections(algebra.iterators.len()) {
        let found: Vec<Option<DesignPoint>> = matrices
            .par_iter()
            .map(|m| design_point(algebra, selection, *m, array, time_budget))
            .collect();
        for p in found.into_iter().flatten() {
            let key = match dedup {
                Dedup::Signature => p.signature.clone(),
                Dedup::ArraySymmetry => array_symmetry_class(&p.signature, square),
            };
            if seen.insert(key) {
                out.push(p);
            }
        }
    }
    out
}
