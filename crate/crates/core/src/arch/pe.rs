use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dataflow::{DataflowKind, IoRole, Reuse2DKind, TensorDataflow};
use crate::error::{Error, Result};

/// PE-internal I/O module templates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PeModuleKind {
    /// (a) forwards the operand to the next PE after a delay.
    SystolicIn,
    /// (b) adds the cell result to the incoming partial sum and forwards it.
    SystolicOut,
    /// (c) double-buffered operand register.
    StationaryIn,
    /// (d) double-buffered accumulator; one register accumulates while the
    /// other drains the previous stage.
    StationaryOut,
    /// (e) operand taken straight from the bus or bank.
    PassIn,
    /// (f) result handed straight to the bank or reduction tree.
    PassOut,
}

impl PeModuleKind {
    pub fn letter(self) -> char {
        match self {
            PeModuleKind::SystolicIn => 'a',
            PeModuleKind::SystolicOut => 'b',
            PeModuleKind::StationaryIn => 'c',
            PeModuleKind::StationaryOut => 'd',
            PeModuleKind::PassIn => 'e',
            PeModuleKind::PassOut => 'f',
        }
    }

    pub fn is_output(self) -> bool {
        matches!(
            self,
            PeModuleKind::SystolicOut | PeModuleKind::StationaryOut | PeModuleKind::PassOut
        )
    }
}

impl fmt::Display for PeModuleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}) {:?}", self.letter(), self)
    }
}

pub fn select_pe_module(dataflow: &TensorDataflow) -> Result<Vec<PeModuleKind>> {
    use PeModuleKind::*;
    let input = dataflow.io_role == IoRole::Input;
    let pick = |i: PeModuleKind, o: PeModuleKind| if input { i } else { o };
    Ok(match dataflow.kind {
        DataflowKind::Systolic => vec![pick(SystolicIn, SystolicOut)],
        DataflowKind::Stationary => vec![pick(StationaryIn, StationaryOut)],
        DataflowKind::Unicast => vec![pick(PassIn, PassOut)],
        DataflowKind::Multicast if input => vec![PassIn],
        DataflowKind::ReductionTree if !input => vec![PassOut],
        DataflowKind::Multicast | DataflowKind::ReductionTree => {
            return Err(Error::Contract(format!(
                "{} dataflow on an {:?} tensor",
                dataflow.kind, dataflow.io_role
            )))
        }
        DataflowKind::Reuse2D => match dataflow.sub_kind {
            Some(Reuse2DKind::Broadcast) => vec![pick(PassIn, PassOut)],
            Some(Reuse2DKind::MulticastStationary) => {
                vec![pick(PassIn, PassOut), pick(StationaryIn, StationaryOut)]
            }
            Some(Reuse2DKind::SystolicMulticast) => {
                vec![pick(PassIn, PassOut), pick(SystolicIn, SystolicOut)]
            }
            None => return Err(Error::Contract("planar reuse without a sub-kind".into())),
        },
    })
}
