use std::collections::BTreeSet;

use crate::algebra::{TensorAccess, TensorAlgebra};
use crate::dataflow::IoRole;
use crate::linalg::{self, Mat3, Vec3};
use crate::tiling::TilePlan;

use super::interconnect::{sharing_groups, Interconnect};
use super::mapping::{in_box, sub, add, Mapping};
use super::{AddressStream, BankDescriptor, Pe, TensorModules};

pub fn address_stream(access: &TensorAccess, selection: [usize; 3], sequential: &[usize], stt: &Mat3) -> AddressStream {
    let restricted = access.restrict(selection);
    let adj = linalg::adjugate3(stt);
    AddressStream {
        space_time: linalg::rows_mul(&restricted, &adj),
        det: linalg::det3(stt),
        tile_origin: restricted,
        sequential: access
            .access_matrix
            .iter()
            .map(|row| sequential.iter().map(|&i| row[i]).collect())
            .collect(),
        offsets: access.offsets.clone(),
    }
}

/// Replica-local PEs that ever execute an iteration, and those that ever
/// start or end a reuse chain along `step`.
struct Occupancy {
    used: BTreeSet<Pe>,
    starts: BTreeSet<Pe>,
    ends: BTreeSet<Pe>,
}

fn occupancy(map: &Mapping, shapes: &[[usize; 3]], step: Option<Vec3>) -> Occupancy {
    let mut occ = Occupancy {
        used: BTreeSet::new(),
        starts: BTreeSet::new(),
        ends: BTreeSet::new(),
    };
    for &shape in shapes {
        for (x, p, _) in map.points(shape) {
            occ.used.insert(p);
            let (pred, succ) = match step {
                Some(s) => (in_box(sub(x, s), shape), in_box(add(x, s), shape)),
                None => (false, false),
            };
            if !pred {
                occ.starts.insert(p);
            }
            if !succ {
                occ.ends.insert(p);
            }
        }
    }
    occ
}

/// One bank per sharing group (multicast source, tree root or shared
/// stationary cell), otherwise one per PE that touches the bank: chain
/// starts for streamed inputs, chain ends for streamed outputs, every used
/// PE for stationary and unicast tensors.
pub fn assign_banks(
    algebra: &TensorAlgebra,
    modules: &[TensorModules],
    stt: &Mat3,
    plan: &TilePlan,
    net: &mut Interconnect,
) -> Vec<BankDescriptor> {
    let map = Mapping::new(*stt, plan.space_time_min, plan.footprint, plan.time_extent);
    let shapes = plan.tile_shapes(algebra);
    let origins = &plan.replicas.origins;
    let mut banks = Vec::new();
    for m in modules {
        let access = algebra.tensor(&m.tensor).expect("module names a tensor");
        let stream = address_stream(access, plan.selection, &plan.sequential, stt);
        let step = if m.is_stationary() { None } else { m.iteration_step };
        let occ = occupancy(&map, &shapes, step);
        let groups: Vec<Vec<Pe>> = if m.spatial_basis.is_empty() {
            let touched = if m.is_stationary() {
                &occ.used
            } else if m.io_role == IoRole::Input {
                &occ.starts
            } else {
                &occ.ends
            };
            touched.iter().map(|&p| vec![p]).collect()
        } else {
            sharing_groups(&access.restrict(plan.selection), stt, plan.footprint)
                .into_iter()
                .filter(|g| g.iter().any(|p| occ.used.contains(p)))
                .collect()
        };
        for (replica, o) in origins.iter().enumerate() {
            for g in &groups {
                let served: Vec<Pe> = g.iter().map(|p| [o[0] + p[0], o[1] + p[1]]).collect();
                let id = banks.len();
                if g.len() > 1 || !m.spatial_basis.is_empty() {
                    if let Some(mg) = net
                        .multicast_groups
                        .iter_mut()
                        .find(|mg| mg.tensor == m.tensor && mg.members == served)
                    {
                        mg.bank = Some(id);
                    }
                    if let Some(t) = net
                        .reduction_trees
                        .iter_mut()
                        .find(|t| t.tensor == m.tensor && t.members == served)
                    {
                        t.bank = Some(id);
                    }
                }
                banks.push(BankDescriptor {
                    tensor: m.tensor.clone(),
                    bank: id,
                    replica,
                    served,
                    stream: stream.clone(),
                });
            }
        }
    }
    banks
}
