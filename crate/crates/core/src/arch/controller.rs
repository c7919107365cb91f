use crate::algebra::TensorAlgebra;
use crate::dataflow::IoRole;
use crate::linalg::{self, Mat3};
use crate::tiling::TilePlan;

use super::{SequentialLoop, StageAction, StageEvent, StageSchedule, TensorModules};

/// Stage schedule: one stage per tile origin and sequential-loop value
/// (per replica round), with load/swap/drain events for stationary tensors.
pub fn build_controller(
    algebra: &TensorAlgebra,
    plan: &TilePlan,
    modules: &[TensorModules],
    stt: &Mat3,
    fill_drain_margin: usize,
) -> StageSchedule {
    let trips = plan.sequential_trips(algebra);
    let sequential: Vec<SequentialLoop> = plan
        .sequential
        .iter()
        .zip(&trips)
        .map(|(&it, &t)| SequentialLoop {
            iterator: algebra.iterators[it].name.clone(),
            bound: algebra.iterators[it].bound,
            trips: t,
            replicated: plan.replicas.loop_index == Some(it),
        })
        .collect();
    let stage_count = plan.stage_count(algebra);
    let mut events = Vec::new();
    for s in 0..stage_count {
        for m in modules.iter().filter(|m| m.is_stationary()) {
            let mut push = |action, overlapped| {
                events.push(StageEvent {
                    stage: s,
                    tensor: m.tensor.clone(),
                    action,
                    overlapped,
                })
            };
            match m.io_role {
                IoRole::Input => {
                    push(StageAction::Load, s > 0);
                    if s > 0 {
                        push(StageAction::Swap, false);
                    }
                }
                IoRole::Output => {
                    if s > 0 {
                        push(StageAction::Swap, false);
                    }
                    push(StageAction::Drain, s + 1 < stage_count);
                }
            }
        }
    }
    StageSchedule {
        selection: plan.selection.map(|i| algebra.iterators[i].name.clone()),
        stt: *stt,
        adjugate: linalg::adjugate3(stt),
        det: linalg::det3(stt),
        tile: plan.tile,
        tile_counts: plan.tile_counts,
        sequential,
        replica_origins: plan.replicas.origins.clone(),
        footprint: plan.footprint,
        space_time_min: plan.space_time_min,
        time_extent: plan.time_extent,
        stage_count,
        cycles_per_stage: plan.time_extent + fill_drain_margin,
        fill_drain_margin,
        double_buffered: modules.iter().any(|m| m.is_stationary()),
        events,
    }
}

impl StageSchedule {
    /// Tile origin (per selected loop) and sequential-loop values of each
    /// replica for stage `s`. A replica whose replicated-loop value runs past
    /// the bound gets `None`.
    pub fn stage_coordinates(&self, s: usize) -> ([usize; 3], Vec<Option<Vec<i64>>>) {
        let tiles: usize = self.tile_counts.iter().product();
        let mut tile_ix = s % tiles;
        let mut seq_ix = s / tiles;
        let mut origin = [0usize; 3];
        for i in (0..3).rev() {
            origin[i] = (tile_ix % self.tile_counts[i]) * self.tile[i];
            tile_ix /= self.tile_counts[i];
        }
        let mut rounds = vec![0usize; self.sequential.len()];
        for (i, l) in self.sequential.iter().enumerate().rev() {
            rounds[i] = seq_ix % l.trips;
            seq_ix /= l.trips;
        }
        let replicas = self.replica_origins.len();
        let per_replica = (0..replicas)
            .map(|r| {
                let vals: Vec<i64> = self
                    .sequential
                    .iter()
                    .zip(&rounds)
                    .map(|(l, &v)| if l.replicated { (v * replicas + r) as i64 } else { v as i64 })
                    .collect();
                let live = self
                    .sequential
                    .iter()
                    .zip(&vals)
                    .all(|(l, &v)| (v as usize) < l.bound);
                live.then_some(vals)
            })
            .collect();
        (origin, per_replica)
    }

    /// Box of the tile starting at `origin`.
    pub fn tile_shape(&self, origin: [usize; 3], bounds: [usize; 3]) -> [usize; 3] {
        std::array::from_fn(|i| self.tile[i].min(bounds[i] - origin[i]))
    }
}
