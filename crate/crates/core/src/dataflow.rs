//! Per-tensor dataflow classification from the reuse subspace.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::algebra::TensorAlgebra;
use crate::error::{Error, Result};
use crate::linalg::Vec3;
use crate::stt::{self, normalize_direction, ReuseSpace, SttMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum IoRole {
    Input,
    Output,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DataflowKind {
    Unicast,
    Stationary,
    Systolic,
    Multicast,
    ReductionTree,
    Reuse2D,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Reuse2DKind {
    Broadcast,
    MulticastStationary,
    SystolicMulticast,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TensorDataflow {
    pub kind: DataflowKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sub_kind: Option<Reuse2DKind>,
    /// Reuse directions `(dp_x, dp_y, dt)`. For planar reuse the first entry
    /// has `dt = 0` and the second is its companion.
    pub direction: Vec<Vec3>,
    pub io_role: IoRole,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl DataflowKind {
    /// Letter used in dataflow names.
    pub fn letter(self) -> char {
        match self {
            DataflowKind::Systolic => 'S',
            DataflowKind::Stationary => 'T',
            DataflowKind::Multicast | DataflowKind::ReductionTree => 'M',
            DataflowKind::Unicast => 'U',
            DataflowKind::Reuse2D => 'B',
        }
    }
}

impl fmt::Display for DataflowKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            DataflowKind::Unicast => "Unicast",
            DataflowKind::Stationary => "Stationary",
            DataflowKind::Systolic => "Systolic",
            DataflowKind::Multicast => "Multicast",
            DataflowKind::ReductionTree => "ReductionTree",
            DataflowKind::Reuse2D => "Reuse2D",
        };
        f.write_str(s)
    }
}

impl fmt::Display for TensorDataflow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.kind)?;
        if let Some(sub) = self.sub_kind {
            write!(f, "/{sub:?}")?;
        }
        for d in &self.direction {
            write!(f, " ({},{},{})", d[0], d[1], d[2])?;
        }
        Ok(())
    }
}

/// Classify a reuse subspace.
pub fn classify_dataflow(reuse: &ReuseSpace, io_role: IoRole) -> TensorDataflow {
    let basis: Vec<Vec3> = reuse.basis.iter().map(|v| normalize_direction(*v)).collect();
    let mut warnings = Vec::new();
    let (kind, sub_kind, direction) = match basis.len() {
        0 => (DataflowKind::Unicast, None, Vec::new()),
        1 => {
            let v = basis[0];
            let spatial = v[0] != 0 || v[1] != 0;
            let kind = match (spatial, v[2] != 0) {
                (false, _) => DataflowKind::Stationary,
                (true, true) => DataflowKind::Systolic,
                (true, false) => match io_role {
                    IoRole::Input => DataflowKind::Multicast,
                    IoRole::Output => DataflowKind::ReductionTree,
                },
            };
            (kind, None, vec![v])
        }
        2 => {
            let sub = if basis.iter().all(|v| v[2] == 0) {
                Reuse2DKind::Broadcast
            } else if reuse.contains(&[0, 0, 1]) {
                Reuse2DKind::MulticastStationary
            } else {
                Reuse2DKind::SystolicMulticast
            };
            (DataflowKind::Reuse2D, Some(sub), planar_directions(&basis))
        }
        _ => {
            warnings.push("tensor is constant over all selected loops".to_string());
            (
                DataflowKind::Reuse2D,
                Some(Reuse2DKind::Broadcast),
                vec![[1, 0, 0], [0, 1, 0], [0, 0, 1]],
            )
        }
    };
    TensorDataflow {
        kind,
        sub_kind,
        direction,
        io_role,
        warnings,
    }
}

/// One `dt = 0` vector of the plane plus a companion with the smallest
/// positive `dt` and the shortest spatial part.
fn planar_directions(basis: &[Vec3]) -> Vec<Vec3> {
    let (a, b) = (basis[0], basis[1]);
    let flat = if a[2] == 0 {
        a
    } else if b[2] == 0 {
        b
    } else {
        [
            b[2] * a[0] - a[2] * b[0],
            b[2] * a[1] - a[2] * b[1],
            0,
        ]
    };
    if basis.iter().all(|v| v[2] == 0) {
        return vec![[1, 0, 0], [0, 1, 0]];
    }
    let flat = normalize_direction(flat);
    let normal = crate::linalg::cross(&a, &b);
    let in_plane = |v: &Vec3| normal[0] * v[0] + normal[1] * v[1] + normal[2] * v[2] == 0;
    let mut best: Option<((i64, i64, i64), Vec3)> = None;
    for dt in 1..=4i64 {
        for dx in -4..=4i64 {
            for dy in -4..=4i64 {
                let v = [dx, dy, dt];
                if !in_plane(&v) || crate::linalg::gcd_all(&v) != 1 {
                    continue;
                }
                let key = (dt, dx.abs().max(dy.abs()), dx.abs() + dy.abs());
                if best.as_ref().is_none_or(|(k, _)| key < *k) {
                    best = Some((key, v));
                }
            }
        }
        if best.is_some() {
            break;
        }
    }
    let companion = best
        .map(|(_, v)| v)
        .unwrap_or_else(|| normalize_direction(if a[2] != 0 { a } else { b }));
    vec![flat, companion]
}

/// Reuse and dataflow of one tensor under a mapping.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorAnalysis {
    pub tensor: String,
    pub reuse: ReuseSpace,
    pub dataflow: TensorDataflow,
}

/// Dataflow analysis of a whole statement under one STT.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Analysis {
    pub selection: [usize; 3],
    pub stt: SttMatrix,
    pub det: i64,
    /// Inputs in statement order, then the output.
    pub tensors: Vec<TensorAnalysis>,
    pub name: String,
}

/// Canonical name: upper-cased selected loops, a dash, then one letter per
/// tensor (inputs in statement order, output last).
pub fn dataflow_name(algebra: &TensorAlgebra, selection: [usize; 3], flows: &[TensorDataflow]) -> String {
    let loops: String = selection
        .iter()
        .map(|&i| algebra.iterators[i].name.to_uppercase())
        .collect();
    let letters: String = flows.iter().map(|f| f.kind.letter()).collect();
    format!("{loops}-{letters}")
}

pub fn analyze(algebra: &TensorAlgebra, stt: &SttMatrix) -> Result<Analysis> {
    let names: Vec<String> = stt.selected_iterators.to_vec();
    let selection = algebra.resolve_selection(&names)?;
    let verdict = stt::validate_stt(stt);
    if !verdict.legal {
        return Err(Error::SingularStt { det: verdict.det });
    }
    let mut tensors = Vec::new();
    for (i, access) in algebra.tensors().enumerate() {
        let role = if i < algebra.inputs.len() {
            IoRole::Input
        } else {
            IoRole::Output
        };
        let restricted = access.restrict(selection);
        let reuse = stt::reuse_space(&restricted, stt)?;
        let dataflow = classify_dataflow(&reuse, role);
        tensors.push(TensorAnalysis {
            tensor: access.tensor_name.clone(),
            reuse,
            dataflow,
        });
    }
    let flows: Vec<TensorDataflow> = tensors.iter().map(|t| t.dataflow.clone()).collect();
    Ok(Analysis {
        selection,
        stt: stt.clone(),
        det: verdict.det,
        name: dataflow_name(algebra, selection, &flows),
        tensors,
    })
}
