use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::algebra::TensorAlgebra;
use crate::arch::{generate, in_box, ArchSpec, GenerateOptions, PeModuleKind};
use crate::dataflow::IoRole;
use crate::error::Result;
use crate::linalg::Vec3;
use crate::tiling::ArrayDims;

use super::DesignPoint;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AreaWeights {
    pub stationary: f64,
    pub systolic: f64,
    pub pass: f64,
    /// Per link register stage.
    pub link: f64,
    /// Per multicast group member.
    pub multicast: f64,
    /// Per reduction-tree adder.
    pub tree: f64,
    pub bank: f64,
}

impl Default for AreaWeights {
    fn default() -> Self {
        AreaWeights {
            stationary: 3.0,
            systolic: 2.0,
            pass: 1.0,
            link: 1.0,
            multicast: 2.0,
            tree: 3.0,
            bank: 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnergyWeights {
    pub mac: f64,
    pub bank: f64,
    /// Per value per link register stage.
    pub link_hop: f64,
    /// Per PE reached by a multicast.
    pub multicast: f64,
    pub tree_add: f64,
    pub stationary_hold: f64,
}

impl Default for EnergyWeights {
    fn default() -> Self {
        EnergyWeights {
            mac: 1.0,
            bank: 2.0,
            link_hop: 1.0,
            multicast: 4.0,
            tree_add: 1.5,
            stationary_hold: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimSummary {
    pub total_cycles: u64,
    pub compute_cycles: u64,
    pub spatial_utilization: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub estimated_cycles: u64,
    pub spatial_utilization: f64,
    /// Peak streaming transfers per cycle for each tensor.
    pub bandwidth: BTreeMap<String, u64>,
    pub bw_peak: u64,
    pub area_proxy: f64,
    /// Links, multicast wiring and tree adders only.
    pub interconnect_area: f64,
    pub energy_proxy: f64,
    /// Partial tiles or idle replicas exist; the estimate scales a full tile.
    pub approximate: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulated: Option<SimSummary>,
}

#[derive(Default)]
struct TileEvents {
    macs: f64,
    bank: f64,
    hops: f64,
    deliveries: f64,
    tree_adds: f64,
    holds: f64,
}

fn module_weight(k: PeModuleKind, w: &AreaWeights) -> f64 {
    match k {
        PeModuleKind::StationaryIn | PeModuleKind::StationaryOut => w.stationary,
        PeModuleKind::SystolicIn | PeModuleKind::SystolicOut => w.systolic,
        PeModuleKind::PassIn | PeModuleKind::PassOut => w.pass,
    }
}

/// Analytic cost of a design point: one full tile is walked without data
/// to count per-cycle bank demand and events, then scaled by the stages.
pub fn estimate_cost(
    algebra: &TensorAlgebra,
    point: &DesignPoint,
    array: ArrayDims,
    bandwidth_cap: Option<usize>,
    area: &AreaWeights,
    energy: &EnergyWeights,
) -> Result<CostReport> {
    let arch = generate(
        algebra,
        &point.stt,
        GenerateOptions {
            array,
            time_budget: point.time_budget,
        },
    )?;
    Ok(cost_of_arch(&arch, bandwidth_cap, area, energy))
}

pub fn cost_of_arch(arch: &ArchSpec, bandwidth_cap: Option<usize>, area: &AreaWeights, energy: &EnergyWeights) -> CostReport {
    let sched = &arch.stages;
    let map = arch.mapping();
    let shape = sched.tile;
    let reps = sched.replica_origins.len();
    let cap = bandwidth_cap.map(|c| c.max(1) as u64);
    let window = |n: u64| match (n, cap) {
        (0, _) => 0,
        (_, None) => 1,
        (n, Some(c)) => n.div_ceil(c),
    };
    let points: Vec<(Vec3, [usize; 2], usize)> = map.points(shape).collect();
    let used: BTreeSet<[usize; 2]> = points.iter().map(|p| p.1).collect();

    let cycles = sched.cycles_per_stage;
    let mut demand = vec![vec![0u64; cycles]; arch.pe_modules.len()];
    let mut ev = TileEvents::default();
    let mut load = 0u64;
    let mut drain = 0u64;
    for (ti, m) in arch.pe_modules.iter().enumerate() {
        // groups of the first replica, whose origin is the array corner
        let mut group_map: HashMap<[usize; 2], usize> = HashMap::new();
        let mut depths = Vec::new();
        let members = arch
            .multicast_groups
            .iter()
            .filter(|g| g.tensor == m.tensor)
            .map(|g| (&g.members, 0))
            .chain(
                arch.reduction_trees
                    .iter()
                    .filter(|t| t.tensor == m.tensor)
                    .map(|t| (&t.members, t.latency)),
            );
        for (gi, (ms, d)) in members.enumerate() {
            for &p in ms {
                group_map.insert(p, gi);
            }
            depths.push(d);
        }
        let gix = |p: [usize; 2]| group_map.get(&p).copied();
        let depth = |g: usize| depths[g];
        let step = if m.is_stationary() { None } else { m.iteration_step };
        let dt = m.temporal_step.map_or(0, |v| v[2]) as f64;
        if m.is_stationary() {
            let distinct: HashSet<Result<usize, [usize; 2]>> =
                used.iter().map(|&p| gix(p).ok_or(p)).collect();
            let n = distinct.len() as u64 * reps as u64;
            match m.io_role {
                IoRole::Input => load = load.max(window(n)),
                IoRole::Output => drain = drain.max(window(n)),
            }
            ev.bank += n as f64;
            ev.holds += points.len() as f64;
            continue;
        }
        let mut sources: HashSet<(usize, Option<usize>, [usize; 2])> = HashSet::new();
        let mut tree_parts: BTreeMap<(usize, usize), u64> = BTreeMap::new();
        for &(x, p, t) in &points {
            let pred = step.is_some_and(|s| in_box([x[0] - s[0], x[1] - s[1], x[2] - s[2]], shape));
            let succ = step.is_some_and(|s| in_box([x[0] + s[0], x[1] + s[1], x[2] + s[2]], shape));
            let g = gix(p);
            match m.io_role {
                IoRole::Input => {
                    if !pred {
                        let key = (t, g, if g.is_some() { [0, 0] } else { p });
                        if sources.insert(key) {
                            demand[ti][t] += reps as u64;
                        }
                        if g.is_some() {
                            ev.deliveries += 1.0;
                        }
                    }
                }
                IoRole::Output => {
                    if !succ {
                        match g {
                            Some(g) => *tree_parts.entry((t, g)).or_default() += 1,
                            None => demand[ti][t] += reps as u64,
                        }
                    }
                }
            }
            if succ {
                ev.hops += dt;
            }
        }
        for ((t, g), n) in tree_parts {
            demand[ti][(t + depth(g)).min(cycles - 1)] += reps as u64;
            ev.tree_adds += (n - 1) as f64;
        }
    }
    ev.macs = points.len() as f64;
    for d in &demand {
        ev.bank += d.iter().sum::<u64>() as f64 / reps as f64;
    }

    let mut stage_cycles = 0u64;
    for t in 0..cycles {
        let worst = demand.iter().map(|d| window(d[t])).max().unwrap_or(0);
        stage_cycles += worst.max(1);
    }
    let stages = sched.stage_count as u64;
    let busy = stage_cycles.max(load).max(drain);
    let estimated_cycles = load + stages * busy + drain;

    let per_stage = ev.macs * energy.mac
        + ev.bank * energy.bank
        + ev.hops * energy.link_hop
        + ev.deliveries * energy.multicast
        + ev.tree_adds * energy.tree_add
        + ev.holds * energy.stationary_hold;
    let energy_proxy = per_stage * reps as f64 * stages as f64;

    let occupied = used.len() * reps;
    let modules: f64 = arch
        .pe_modules
        .iter()
        .flat_map(|m| m.modules.iter())
        .map(|&k| module_weight(k, area))
        .sum::<f64>()
        * occupied as f64;
    let interconnect_area = arch.links.iter().map(|l| l.delay as f64 * area.link).sum::<f64>()
        + arch.multicast_groups.iter().map(|g| g.members.len() as f64 * area.multicast).sum::<f64>()
        + arch
            .reduction_trees
            .iter()
            .map(|t| (t.members.len() - 1) as f64 * area.tree)
            .sum::<f64>();
    let area_proxy = modules + interconnect_area + arch.banks.len() as f64 * area.bank;

    let bandwidth: BTreeMap<String, u64> = arch
        .pe_modules
        .iter()
        .zip(&demand)
        .map(|(m, d)| (m.tensor.clone(), d.iter().copied().max().unwrap_or(0)))
        .collect();
    let bw_peak = bandwidth.values().copied().max().unwrap_or(0);
    let idle_replicas = sched.sequential.iter().any(|l| l.replicated && l.bound % reps != 0);
    let approximate = tile_partial(arch) || idle_replicas;
    CostReport {
        estimated_cycles,
        spatial_utilization: occupied as f64 / arch.array.pes() as f64,
        bandwidth,
        bw_peak,
        area_proxy,
        interconnect_area,
        energy_proxy,
        approximate,
        simulated: None,
    }
}

fn tile_partial(arch: &ArchSpec) -> bool {
    let sched = &arch.stages;
    sched.selection.iter().zip(&sched.tile).any(|(name, &t)| {
        let it = arch.algebra.iterator_index(name).expect("selection names a loop");
        arch.algebra.iterators[it].bound % t != 0
    })
}
