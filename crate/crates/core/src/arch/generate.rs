use serde::{Deserialize, Serialize};

use crate::algebra::TensorAlgebra;
use crate::dataflow::analyze;
use crate::error::Result;
use crate::linalg::Vec3;
use crate::stt::SttMatrix;
use crate::tiling::{select_loops_and_tile, ArrayDims};

use super::banks::assign_banks;
use super::controller::build_controller;
use super::interconnect::build_interconnect;
use super::pe::select_pe_module;
use super::reuse::hardware_reuse;
use super::{ArchSpec, ComputeCell, TensorModules};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerateOptions {
    pub array: ArrayDims,
    /// Upper bound on the time extent of one tile.
    pub time_budget: usize,
}

impl GenerateOptions {
    pub fn new(array: ArrayDims) -> Self {
        GenerateOptions {
            array,
            time_budget: 1 << 16,
        }
    }
}

/// Per-tensor module selection plus the integer reuse steps the hardware
/// implements. Fails on non-adjacent reuse.
pub fn tensor_modules(algebra: &TensorAlgebra, stt: &SttMatrix) -> Result<(Vec<TensorModules>, String, [usize; 3])> {
    let selection = algebra.resolve_selection(&stt.selected_iterators)?;
    if stt.det() == 0 {
        return Err(crate::error::Error::SingularStt { det: 0 });
    }
    // integer adjacency check first; it rejects most candidates cheaply
    let hw = algebra
        .tensors()
        .map(|a| hardware_reuse(&a.restrict(selection), &stt.entries))
        .collect::<Result<Vec<_>>>()?;
    let analysis = analyze(algebra, stt)?;
    let mut out = Vec::new();
    for (ta, hw) in analysis.tensors.iter().zip(hw) {
        out.push(TensorModules {
            tensor: ta.tensor.clone(),
            io_role: ta.dataflow.io_role,
            modules: select_pe_module(&ta.dataflow)?,
            dataflow: ta.dataflow.clone(),
            temporal_step: hw.temporal,
            iteration_step: hw.temporal_iter,
            spatial_basis: hw.spatial,
        });
    }
    Ok((out, analysis.name, analysis.selection))
}

pub fn generate(algebra: &TensorAlgebra, stt: &SttMatrix, opts: GenerateOptions) -> Result<ArchSpec> {
    let (modules, name, selection) = tensor_modules(algebra, stt)?;
    let plan = select_loops_and_tile(algebra, selection, &stt.entries, opts.array, opts.time_budget)?;
    let accesses: Vec<Vec<Vec3>> = algebra.tensors().map(|a| a.restrict(selection)).collect();
    let mut net = build_interconnect(
        &modules,
        &accesses,
        &stt.entries,
        plan.footprint,
        &plan.replicas.origins,
    );
    let banks = assign_banks(algebra, &modules, &stt.entries, &plan, &mut net);
    let margin = net.reduction_trees.iter().map(|t| t.latency).max().unwrap_or(0);
    let stages = build_controller(algebra, &plan, &modules, &stt.entries, margin);
    let mut warnings: Vec<String> = modules
        .iter()
        .flat_map(|m| m.dataflow.warnings.iter().map(move |w| format!("{}: {w}", m.tensor)))
        .collect();
    warnings.extend(plan.warnings.iter().cloned());
    Ok(ArchSpec {
        name,
        algebra: algebra.clone(),
        array: opts.array,
        pe_modules: modules,
        links: net.links,
        multicast_groups: net.multicast_groups,
        reduction_trees: net.reduction_trees,
        banks,
        stages,
        compute_cell: ComputeCell {
            operands: algebra.inputs.len(),
            accumulate: true,
        },
        warnings,
    })
}
