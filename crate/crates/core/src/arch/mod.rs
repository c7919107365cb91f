//! Architecture IR generated from a dataflow: PE-internal modules, array
//! interconnect, memory banks and the stage controller.
//!
//! The serialized [`ArchSpec`] is the contract between generation and
//! simulation. It is plain JSON; see `docs/archspec.schema.json`.

mod banks;
mod controller;
mod generate;
mod interconnect;
mod mapping;
mod pe;
mod reuse;

use serde::{Deserialize, Serialize};

use crate::algebra::TensorAlgebra;
use crate::dataflow::{IoRole, TensorDataflow};
use crate::linalg::{Mat3, Vec3};
use crate::tiling::ArrayDims;

pub use banks::{address_stream, assign_banks};
pub use controller::build_controller;
pub use generate::{generate, tensor_modules, GenerateOptions};
pub use interconnect::{build_interconnect, sharing_groups, tree_depth, Interconnect};
pub use mapping::{in_box, Mapping};
pub use pe::{select_pe_module, PeModuleKind};
pub use reuse::{group_key, hardware_reuse, HardwareReuse};

pub type Pe = [usize; 2];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorModules {
    pub tensor: String,
    pub io_role: IoRole,
    pub dataflow: TensorDataflow,
    pub modules: Vec<PeModuleKind>,
    /// Space-time step `(dx, dy, dt)` to the next use of an element.
    pub temporal_step: Option<Vec3>,
    /// The same step in iteration space.
    pub iteration_step: Option<Vec3>,
    /// Basis of the same-cycle sharing lattice over PE coordinates.
    pub spatial_basis: Vec<[i64; 2]>,
}

impl TensorModules {
    /// Stationary reuse: the element stays in its PE between uses.
    pub fn is_stationary(&self) -> bool {
        matches!(self.temporal_step, Some([0, 0, _]))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Link {
    pub tensor: String,
    pub src: Pe,
    pub dst: Pe,
    pub delay: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MulticastGroup {
    pub tensor: String,
    pub bank: Option<usize>,
    pub members: Vec<Pe>,
    pub diagonal: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReductionTree {
    pub tensor: String,
    pub bank: Option<usize>,
    pub members: Vec<Pe>,
    pub arity: usize,
    pub depth: usize,
    /// Cycles from the partial sums to the bank write. Every tree of a
    /// tensor is padded to the deepest one so sums for one element never
    /// land in the same cycle.
    pub latency: usize,
}

/// Affine address generator of one bank.
///
/// For a PE at replica-local position `p` and stage cycle `t`, with
/// `s = (p + space_time_min[..2], t + space_time_min[2])`, the tensor index
/// is `(space_time * s) / det + tile_origin * o + sequential * q + offsets`
/// where `o` is the stage's tile origin and `q` its sequential loop values.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AddressStream {
    pub space_time: Vec<Vec3>,
    pub det: i64,
    pub tile_origin: Vec<Vec3>,
    pub sequential: Vec<Vec<i64>>,
    pub offsets: Vec<i64>,
}

impl AddressStream {
    pub fn index(&self, st: Vec3, origin: Vec3, seq: &[i64]) -> Vec<i64> {
        self.space_time
            .iter()
            .zip(&self.tile_origin)
            .zip(&self.sequential)
            .zip(&self.offsets)
            .map(|(((m, o), q), off)| {
                let num = m[0] * st[0] + m[1] * st[1] + m[2] * st[2];
                debug_assert_eq!(num % self.det, 0);
                num / self.det
                    + o[0] * origin[0]
                    + o[1] * origin[1]
                    + o[2] * origin[2]
                    + q.iter().zip(seq).map(|(a, b)| a * b).sum::<i64>()
                    + off
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BankDescriptor {
    pub tensor: String,
    pub bank: usize,
    pub replica: usize,
    pub served: Vec<Pe>,
    pub stream: AddressStream,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SequentialLoop {
    pub iterator: String,
    pub bound: usize,
    pub trips: usize,
    pub replicated: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StageAction {
    /// Fill the shadow register of a stationary input.
    Load,
    /// Exchange working and shadow registers at a stage boundary.
    Swap,
    /// Write a stationary output's shadow register back to its bank.
    Drain,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageEvent {
    pub stage: usize,
    pub tensor: String,
    pub action: StageAction,
    /// Runs concurrently with another stage's compute.
    pub overlapped: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageSchedule {
    pub selection: [String; 3],
    pub stt: Mat3,
    pub adjugate: Mat3,
    pub det: i64,
    pub tile: [usize; 3],
    pub tile_counts: [usize; 3],
    pub sequential: Vec<SequentialLoop>,
    pub replica_origins: Vec<Pe>,
    pub footprint: [usize; 2],
    pub space_time_min: Vec3,
    pub time_extent: usize,
    pub stage_count: usize,
    /// Time extent plus the fill/drain margin.
    pub cycles_per_stage: usize,
    pub fill_drain_margin: usize,
    pub double_buffered: bool,
    pub events: Vec<StageEvent>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComputeCell {
    pub operands: usize,
    pub accumulate: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchSpec {
    pub name: String,
    pub algebra: TensorAlgebra,
    pub array: ArrayDims,
    pub pe_modules: Vec<TensorModules>,
    pub links: Vec<Link>,
    pub multicast_groups: Vec<MulticastGroup>,
    pub reduction_trees: Vec<ReductionTree>,
    pub banks: Vec<BankDescriptor>,
    pub stages: StageSchedule,
    pub compute_cell: ComputeCell,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl ArchSpec {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("ArchSpec serializes")
    }

    pub fn from_json(text: &str) -> crate::Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn mapping(&self) -> Mapping {
        Mapping::from_schedule(&self.stages)
    }

    pub fn tensor_modules(&self, tensor: &str) -> Option<&TensorModules> {
        self.pe_modules.iter().find(|m| m.tensor == tensor)
    }

    pub fn banks_of<'a>(&'a self, tensor: &'a str) -> impl Iterator<Item = &'a BankDescriptor> + 'a {
        self.banks.iter().filter(move |b| b.tensor == tensor)
    }
}
