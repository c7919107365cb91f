use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EventKind {
    /// Streaming bank read (one per bank per cycle, shared by a multicast).
    Read,
    /// Streaming bank write from a chain end or tree root.
    Write,
    /// Stationary register filled at a stage boundary.
    Load,
    /// Stationary accumulator written back at a stage boundary.
    Drain,
    Mac,
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            EventKind::Read => "read",
            EventKind::Write => "write",
            EventKind::Load => "load",
            EventKind::Drain => "drain",
            EventKind::Mac => "mac",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub cycle: u64,
    pub pe: [usize; 2],
    pub event: EventKind,
    pub tensor: String,
    /// Tensor index, or the full iteration vector for `Mac`.
    pub index: Vec<i64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Bandwidth {
    /// Most streaming transfers in one cycle.
    pub peak: u64,
    /// All transfers, boundary loads and drains included, per compute cycle.
    pub average: f64,
}

pub fn trace_csv(trace: &[TraceEvent]) -> String {
    let mut out = String::from("cycle,pe_x,pe_y,event,tensor,index\n");
    for e in trace {
        let idx: Vec<String> = e.index.iter().map(|v| v.to_string()).collect();
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            e.cycle,
            e.pe[0],
            e.pe[1],
            e.event,
            e.tensor,
            idx.join(",")
        ));
    }
    out
}

/// Per-tensor bank bandwidth from a trace.
pub fn measure_bandwidth(trace: &[TraceEvent]) -> BTreeMap<String, Bandwidth> {
    let compute: BTreeSet<u64> = trace
        .iter()
        .filter(|e| e.event == EventKind::Mac)
        .map(|e| e.cycle)
        .collect();
    let mut per_cycle: BTreeMap<(&str, u64), u64> = BTreeMap::new();
    let mut totals: BTreeMap<&str, u64> = BTreeMap::new();
    for e in trace {
        match e.event {
            EventKind::Mac => continue,
            EventKind::Read | EventKind::Write => {
                *per_cycle.entry((e.tensor.as_str(), e.cycle)).or_default() += 1;
            }
            EventKind::Load | EventKind::Drain => {}
        }
        *totals.entry(e.tensor.as_str()).or_default() += 1;
    }
    totals
        .into_iter()
        .map(|(t, total)| {
            let peak = per_cycle
                .iter()
                .filter(|((name, _), _)| *name == t)
                .map(|(_, n)| *n)
                .max()
                .unwrap_or(0);
            let average = total as f64 / compute.len().max(1) as f64;
            (t.to_string(), Bandwidth { peak, average })
        })
        .collect()
}
