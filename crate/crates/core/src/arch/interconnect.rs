use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dataflow::IoRole;
use crate::linalg::{Mat3, Vec3};

use super::reuse::group_key;
use super::{Link, MulticastGroup, Pe, ReductionTree, TensorModules};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interconnect {
    pub links: Vec<Link>,
    pub multicast_groups: Vec<MulticastGroup>,
    pub reduction_trees: Vec<ReductionTree>,
}

/// Partitions a footprint into same-cycle sharing groups, replica-local
/// coordinates, each group in row-major order.
pub fn sharing_groups(access: &[Vec3], stt: &Mat3, footprint: [usize; 2]) -> Vec<Vec<Pe>> {
    let mut groups: BTreeMap<Vec<i64>, Vec<Pe>> = BTreeMap::new();
    for r in 0..footprint[0] {
        for c in 0..footprint[1] {
            let key = group_key(access, stt, [r as i64, c as i64]);
            groups.entry(key).or_default().push([r, c]);
        }
    }
    let mut out: Vec<Vec<Pe>> = groups.into_values().collect();
    out.sort();
    out
}

pub fn tree_depth(leaves: usize) -> usize {
    (leaves.max(1) as f64).log2().ceil() as usize
}

fn offset(origin: Pe, p: Pe) -> Pe {
    [origin[0] + p[0], origin[1] + p[1]]
}

/// Links along each tensor's temporal step, multicast groups for shared
/// inputs and reduction trees for shared outputs, repeated per replica.
///
/// `accesses[i]` is the restricted access of `modules[i]`.
pub fn build_interconnect(
    modules: &[TensorModules],
    accesses: &[Vec<Vec3>],
    stt: &Mat3,
    footprint: [usize; 2],
    origins: &[Pe],
) -> Interconnect {
    let mut net = Interconnect::default();
    for (m, access) in modules.iter().zip(accesses) {
        if let Some([dx, dy, dt]) = m.temporal_step {
            if dx != 0 || dy != 0 {
                for &o in origins {
                    for r in 0..footprint[0] as i64 {
                        for c in 0..footprint[1] as i64 {
                            let (r2, c2) = (r + dx, c + dy);
                            if r2 < 0 || c2 < 0 || r2 >= footprint[0] as i64 || c2 >= footprint[1] as i64 {
                                continue;
                            }
                            net.links.push(Link {
                                tensor: m.tensor.clone(),
                                src: offset(o, [r as usize, c as usize]),
                                dst: offset(o, [r2 as usize, c2 as usize]),
                                delay: dt as u32,
                            });
                        }
                    }
                }
            }
        }
        if m.spatial_basis.is_empty() {
            continue;
        }
        let diagonal = m.spatial_basis.len() == 1 && m.spatial_basis[0].iter().all(|&v| v != 0);
        let groups = sharing_groups(access, stt, footprint);
        for &o in origins {
            for g in &groups {
                let members: Vec<Pe> = g.iter().map(|&p| offset(o, p)).collect();
                match m.io_role {
                    IoRole::Input => net.multicast_groups.push(MulticastGroup {
                        tensor: m.tensor.clone(),
                        bank: None,
                        members,
                        diagonal,
                    }),
                    IoRole::Output => net.reduction_trees.push(ReductionTree {
                        tensor: m.tensor.clone(),
                        bank: None,
                        depth: tree_depth(members.len()),
                        latency: 0,
                        members,
                        arity: 2,
                    }),
                }
            }
        }
    }
    let mut deepest: BTreeMap<String, usize> = BTreeMap::new();
    for t in &net.reduction_trees {
        let d = deepest.entry(t.tensor.clone()).or_default();
        *d = (*d).max(t.depth);
    }
    for t in &mut net.reduction_trees {
        t.latency = deepest[&t.tensor];
    }
    net
}
