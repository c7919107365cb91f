//! Cycle-accurate simulation of a generated architecture.
//!
//! Each cycle has two phases: every link shifts (all reads see the previous
//! cycle's values), then PEs compute and push into their outgoing links.
//! Tree sums land in the bank `latency` cycles after their partials. When a
//! tensor demands more bank transfers in one cycle than the port cap allows,
//! the whole array freezes until the transfers have gone through.

mod reference;
mod trace;

use std::collections::{BTreeMap, HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::arch::{in_box, ArchSpec, Pe};
use crate::error::{Error, FaultKind, Result};
use crate::linalg::Vec3;
use crate::tensor::{Element, Tensor};

pub use reference::{check_inputs, random_inputs, reference_execute, Inputs};
pub use trace::{measure_bandwidth, trace_csv, Bandwidth, EventKind, TraceEvent};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimOptions {
    /// Bank transfers per tensor per cycle; `None` is unlimited.
    pub bandwidth_cap: Option<usize>,
    pub trace: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport<T> {
    pub total_cycles: u64,
    /// Cycles in which at least one PE executed a MAC.
    pub compute_cycles: u64,
    pub fill_drain_cycles: u64,
    /// Part of `fill_drain_cycles` spent frozen on bank bandwidth.
    pub stall_cycles: u64,
    pub macs: u64,
    pub spatial_utilization: f64,
    pub bandwidth: BTreeMap<String, Bandwidth>,
    pub output: Tensor<T>,
    #[serde(skip)]
    pub trace: Vec<TraceEvent>,
}

fn fault<T>(cycle: u64, kind: FaultKind) -> Result<T> {
    Err(Error::SimFault { cycle, kind })
}

/// Static per-tensor wiring derived from the ArchSpec.
struct Port {
    name: String,
    stationary: bool,
    /// Iteration step of streamed reuse.
    step: Option<Vec3>,
    /// Sharing group of each PE (flat index), with member order.
    group_of: Vec<Option<usize>>,
    groups: Vec<Vec<Pe>>,
    tree_depth: Vec<usize>,
    bank_of: Vec<Option<usize>>,
    /// Incoming and outgoing link of each PE.
    link_in: Vec<Option<usize>>,
    link_out: Vec<Option<usize>>,
}

struct Pending<T> {
    tensor: usize,
    bank: usize,
    pe: Pe,
    index: Vec<i64>,
    value: T,
}

pub fn simulate<T: Element>(arch: &ArchSpec, inputs: &Inputs<T>, opts: SimOptions) -> Result<SimReport<T>> {
    let alg = &arch.algebra;
    check_inputs(alg, inputs)?;
    let sched = &arch.stages;
    let map = arch.mapping();
    let cols = arch.array.cols;
    let npe = arch.array.pes();
    let flat = |p: Pe| p[0] * cols + p[1];
    let selection: [usize; 3] = std::array::from_fn(|i| {
        alg.iterator_index(&sched.selection[i])
            .expect("schedule names algebra loops")
    });
    let sel_bounds: [usize; 3] = std::array::from_fn(|i| alg.iterators[selection[i]].bound);

    let mut ports: Vec<Port> = Vec::new();
    for m in &arch.pe_modules {
        let mut port = Port {
            name: m.tensor.clone(),
            stationary: m.is_stationary(),
            step: if m.is_stationary() { None } else { m.iteration_step },
            group_of: vec![None; npe],
            groups: Vec::new(),
            tree_depth: Vec::new(),
            bank_of: vec![None; npe],
            link_in: vec![None; npe],
            link_out: vec![None; npe],
        };
        let groups: Vec<(&Vec<Pe>, usize)> = arch
            .multicast_groups
            .iter()
            .filter(|g| g.tensor == m.tensor)
            .map(|g| (&g.members, 0))
            .chain(
                arch.reduction_trees
                    .iter()
                    .filter(|t| t.tensor == m.tensor)
                    .map(|t| (&t.members, t.latency)),
            )
            .collect();
        for (gi, (members, depth)) in groups.into_iter().enumerate() {
            for &p in members {
                port.group_of[flat(p)] = Some(gi);
            }
            port.groups.push(members.clone());
            port.tree_depth.push(depth);
        }
        for b in arch.banks_of(&m.tensor) {
            for &p in &b.served {
                port.bank_of[flat(p)] = Some(b.bank);
            }
        }
        for (li, l) in arch.links.iter().enumerate() {
            if l.tensor == m.tensor {
                port.link_in[flat(l.dst)] = Some(li);
                port.link_out[flat(l.src)] = Some(li);
            }
        }
        ports.push(port);
    }
    let n_in = alg.inputs.len();
    let out_ix = ports.len() - 1;
    let tensor_data: Vec<&Tensor<T>> = alg.inputs.iter().map(|a| &inputs[&a.tensor_name]).collect();
    let mut output = Tensor::<T>::zeros(&alg.extents(&alg.output));

    let mut links: Vec<VecDeque<Option<T>>> = arch
        .links
        .iter()
        .map(|l| VecDeque::from(vec![None; l.delay as usize]))
        .collect();
    let mut arrivals: Vec<Option<T>> = vec![None; links.len()];
    let mut sends: Vec<Option<T>> = vec![None; links.len()];

    let mut schedules: HashMap<[usize; 3], Vec<Vec<(Vec3, Pe)>>> = HashMap::new();
    let cap = opts.bandwidth_cap.map(|c| c.max(1) as u64);
    let window = |n: u64| -> u64 {
        match (n, cap) {
            (0, _) => 0,
            (_, None) => 1,
            (n, Some(c)) => n.div_ceil(c),
        }
    };

    let mut trace = Vec::new();
    let mut phys: u64 = 0;
    let mut compute_cycles = 0u64;
    let mut stall_cycles = 0u64;
    let mut macs = 0u64;
    let mut peak = vec![0u64; ports.len()];
    let mut totals = vec![0u64; ports.len()];
    let cycles_per_stage = sched.cycles_per_stage;
    let stage_count = sched.stage_count;
    // boundary windows: load of stage s, drain of stage s
    let mut load_w = vec![0u64; stage_count + 1];
    let mut drain_w = vec![0u64; stage_count + 1];
    let mut stage_len = vec![0u64; stage_count];

    // registers: stationary input values and stationary output partials
    let mut reg_in: Vec<Vec<Option<T>>> = vec![vec![None; npe]; ports.len()];
    let mut acc: Vec<Option<(T, usize)>> = vec![None; npe];
    let mut issued = vec![u64::MAX; npe];

    // trace cycles count compute and stalls only; boundary windows are
    // added to the total at the end
    for s in 0..stage_count {
        let (origin_u, reps) = sched.stage_coordinates(s);
        let origin: Vec3 = origin_u.map(|v| v as i64);
        let shape = sched.tile_shape(origin_u, sel_bounds);
        let buckets = schedules.entry(shape).or_insert_with(|| {
            let mut b = vec![Vec::new(); sched.time_extent];
            for (x, p, t) in map.points(shape) {
                b[t].push((x, p));
            }
            b
        });
        let live: Vec<(usize, Pe, &Vec<i64>)> = reps
            .iter()
            .enumerate()
            .filter_map(|(r, q)| q.as_ref().map(|q| (r, sched.replica_origins[r], q)))
            .collect();
        let abs = |o: Pe, p: Pe| [o[0] + p[0], o[1] + p[1]];
        let stage_base = phys;

        // preload stationary inputs
        for (ti, port) in ports.iter().enumerate().take(n_in) {
            if !port.stationary {
                continue;
            }
            reg_in[ti].iter_mut().for_each(|r| *r = None);
            let mut loaded_groups = std::collections::BTreeSet::new();
            let mut count = 0u64;
            for (t, bucket) in buckets.iter().enumerate() {
                for &(_, p) in bucket {
                    for &(_, o, q) in &live {
                        let pa = abs(o, p);
                        let f = flat(pa);
                        if reg_in[ti][f].is_some() {
                            continue;
                        }
                        let Some(bank) = port.bank_of[f] else {
                            return fault(phys, FaultKind::UndrivenPort { tensor: port.name.clone(), pe: pa });
                        };
                        let idx = arch.banks[bank].stream.index(map.space_time(p, t), origin, q);
                        let Some(v) = tensor_data[ti].get(&idx) else {
                            return fault(phys, FaultKind::BankRange { bank, tensor: port.name.clone() });
                        };
                        reg_in[ti][f] = Some(v);
                        let key = port.group_of[f].map(|g| (g, usize::MAX)).unwrap_or((usize::MAX, f));
                        if loaded_groups.insert(key) {
                            count += 1;
                            totals[ti] += 1;
                            if opts.trace {
                                trace.push(TraceEvent { cycle: phys, pe: pa, event: EventKind::Load, tensor: port.name.clone(), index: idx });
                            }
                        }
                    }
                }
            }
            load_w[s] = load_w[s].max(window(count));
        }
        acc.iter_mut().for_each(|a| *a = None);
        for (l, q) in links.iter_mut().zip(&arch.links) {
            l.clear();
            l.resize(q.delay as usize, None);
        }

        let mut delayed: Vec<Vec<Pending<T>>> = (0..cycles_per_stage).map(|_| Vec::new()).collect();
        let mut stage_stall = 0u64;
        for t in 0..cycles_per_stage {
            for (li, l) in links.iter_mut().enumerate() {
                arrivals[li] = l.pop_front().flatten();
                sends[li] = None;
            }
            let mut demand = vec![0u64; ports.len()];
            let mut bank_cache: HashMap<usize, T> = HashMap::new();
            let mut tree_parts: BTreeMap<(usize, usize), Vec<(Pe, Pe, T)>> = BTreeMap::new();
            let mut any_mac = false;
            let bucket: &[(Vec3, Pe)] = if t < sched.time_extent { &buckets[t] } else { &[] };
            for &(r_ix, o, q) in &live {
                for &(x, p) in bucket {
                    let pa = abs(o, p);
                    let f = flat(pa);
                    if issued[f] == phys {
                        return fault(phys, FaultKind::DoubleIssue { pe: pa });
                    }
                    issued[f] = phys;
                    any_mac = true;
                    macs += 1;
                    let mut prod: Option<T> = None;
                    for (ti, port) in ports.iter().enumerate().take(n_in) {
                        let pred = port.step.is_some_and(|s| in_box(sub(x, s), shape));
                        let succ = port.step.is_some_and(|s| in_box(add(x, s), shape));
                        let v = if port.stationary {
                            match reg_in[ti][f] {
                                Some(v) => v,
                                None => return fault(phys, FaultKind::UndrivenPort { tensor: port.name.clone(), pe: pa }),
                            }
                        } else if pred {
                            match port.link_in[f].and_then(|li| arrivals[li]) {
                                Some(v) => v,
                                None => return fault(phys, FaultKind::UndrivenPort { tensor: port.name.clone(), pe: pa }),
                            }
                        } else {
                            let Some(bank) = port.bank_of[f] else {
                                return fault(phys, FaultKind::UndrivenPort { tensor: port.name.clone(), pe: pa });
                            };
                            match bank_cache.get(&bank) {
                                Some(v) => *v,
                                None => {
                                    let idx = arch.banks[bank].stream.index(map.space_time(p, t), origin, q);
                                    let Some(v) = tensor_data[ti].get(&idx) else {
                                        return fault(phys, FaultKind::BankRange { bank, tensor: port.name.clone() });
                                    };
                                    bank_cache.insert(bank, v);
                                    demand[ti] += 1;
                                    if opts.trace {
                                        trace.push(TraceEvent { cycle: phys, pe: pa, event: EventKind::Read, tensor: port.name.clone(), index: idx });
                                    }
                                    v
                                }
                            }
                        };
                        if succ {
                            match port.link_out[f] {
                                Some(li) => sends[li] = Some(v),
                                None => return fault(phys, FaultKind::UndrivenPort { tensor: port.name.clone(), pe: pa }),
                            }
                        }
                        prod = Some(match prod {
                            Some(a) => a * v,
                            None => v,
                        });
                    }
                    let prod = prod.expect("at least one input");
                    if opts.trace {
                        let mut it = vec![0i64; alg.iterators.len()];
                        for k in 0..3 {
                            it[selection[k]] = origin[k] + x[k];
                        }
                        let seq_ix = (0..alg.iterators.len()).filter(|i| !selection.contains(i));
                        for (i, v) in seq_ix.zip(q.iter()) {
                            it[i] = *v;
                        }
                        trace.push(TraceEvent { cycle: phys, pe: pa, event: EventKind::Mac, tensor: ports[out_ix].name.clone(), index: it });
                    }
                    let port = &ports[out_ix];
                    if port.stationary {
                        acc[f] = Some(match acc[f] {
                            Some((a, t0)) => (a + prod, t0),
                            None => (prod, t),
                        });
                        continue;
                    }
                    let pred = port.step.is_some_and(|s| in_box(sub(x, s), shape));
                    let succ = port.step.is_some_and(|s| in_box(add(x, s), shape));
                    let partial = if pred {
                        match port.link_in[f].and_then(|li| arrivals[li]) {
                            Some(v) => v + prod,
                            None => return fault(phys, FaultKind::UndrivenPort { tensor: port.name.clone(), pe: pa }),
                        }
                    } else {
                        prod
                    };
                    if succ {
                        match port.link_out[f] {
                            Some(li) => sends[li] = Some(partial),
                            None => return fault(phys, FaultKind::UndrivenPort { tensor: port.name.clone(), pe: pa }),
                        }
                    } else if let Some(g) = port.group_of[f] {
                        tree_parts.entry((r_ix, g)).or_default().push((pa, p, partial));
                    } else {
                        let Some(bank) = port.bank_of[f] else {
                            return fault(phys, FaultKind::UndrivenPort { tensor: port.name.clone(), pe: pa });
                        };
                        let index = arch.banks[bank].stream.index(map.space_time(p, t), origin, q);
                        delayed[t].push(Pending { tensor: out_ix, bank, pe: pa, index, value: partial });
                    }
                }
                // trees: fixed member order
                let port = &ports[out_ix];
                for ((r, g), mut parts) in std::mem::take(&mut tree_parts) {
                    debug_assert_eq!(r, r_ix);
                    let order = &port.groups[g];
                    parts.sort_by_key(|(pa, _, _)| order.iter().position(|m| m == pa));
                    let (pa, p, _) = parts[0];
                    let Some(bank) = port.bank_of[flat(pa)] else {
                        return fault(phys, FaultKind::UndrivenPort { tensor: port.name.clone(), pe: pa });
                    };
                    let mut sum = parts[0].2;
                    for part in &parts[1..] {
                        sum = sum + part.2;
                    }
                    let index = arch.banks[bank].stream.index(map.space_time(p, t), origin, q);
                    delayed[t + port.tree_depth[g]].push(Pending { tensor: out_ix, bank, pe: order[0], index, value: sum });
                }
            }
            // bank writes due this cycle
            let mut written = std::collections::BTreeSet::new();
            for w in std::mem::take(&mut delayed[t]) {
                let name = &ports[w.tensor].name;
                let Some(o) = output.offset(&w.index) else {
                    return fault(phys, FaultKind::BankRange { bank: w.bank, tensor: name.clone() });
                };
                if !written.insert(o) {
                    let index = w.index.iter().map(|&v| v as usize).collect();
                    return fault(phys, FaultKind::DoubleWrite { tensor: name.clone(), index });
                }
                output.data[o] = output.data[o] + w.value;
                demand[w.tensor] += 1;
                if opts.trace {
                    trace.push(TraceEvent { cycle: phys, pe: w.pe, event: EventKind::Write, tensor: name.clone(), index: w.index });
                }
            }
            for (li, l) in links.iter_mut().enumerate() {
                l.push_back(sends[li]);
            }
            let mut extra = 0u64;
            for (ti, &d) in demand.iter().enumerate() {
                peak[ti] = peak[ti].max(d);
                totals[ti] += d;
                extra = extra.max(window(d).saturating_sub(1));
            }
            if any_mac {
                compute_cycles += 1;
            }
            stage_stall += extra;
            phys += 1 + extra;
        }
        stall_cycles += stage_stall;
        stage_len[s] = phys - stage_base;

        // drain stationary outputs, one write per sharing group
        let port = &ports[out_ix];
        if port.stationary {
            let mut count = 0u64;
            let mut done = vec![false; npe];
            for &(_, o, q) in &live {
                for bucket in buckets.iter() {
                    for &(_, p) in bucket {
                        let pa = abs(o, p);
                        let f = flat(pa);
                        if done[f] {
                            continue;
                        }
                        let members: Vec<Pe> = match port.group_of[f] {
                            Some(g) => port.groups[g].clone(),
                            None => vec![pa],
                        };
                        let mut sum: Option<(T, Pe, usize)> = None;
                        for m in &members {
                            let fm = flat(*m);
                            done[fm] = true;
                            if let Some((v, t0)) = acc[fm].take() {
                                sum = Some(match sum {
                                    Some((a, pm, tm)) => (a + v, pm, tm),
                                    None => (v, *m, t0),
                                });
                            }
                        }
                        let Some((v, pm, t0)) = sum else { continue };
                        let Some(bank) = port.bank_of[flat(pm)] else {
                            return fault(phys, FaultKind::UndrivenPort { tensor: port.name.clone(), pe: pm });
                        };
                        let local = [pm[0] - o[0], pm[1] - o[1]];
                        let index = arch.banks[bank].stream.index(map.space_time(local, t0), origin, q);
                        let Some(off) = output.offset(&index) else {
                            return fault(phys, FaultKind::BankRange { bank, tensor: port.name.clone() });
                        };
                        output.data[off] = output.data[off] + v;
                        count += 1;
                        totals[out_ix] += 1;
                        if opts.trace {
                            trace.push(TraceEvent { cycle: phys, pe: pm, event: EventKind::Drain, tensor: port.name.clone(), index });
                        }
                    }
                }
            }
            drain_w[s] = window(count);
        }
    }

    // Boundary traffic runs on the shadow registers: load of stage s+1 and
    // drain of stage s-1 overlap stage s; only the first load and the last
    // drain are exposed.
    let mut boundary = load_w[0];
    for s in 0..stage_count {
        let mut busy = stage_len[s];
        if s + 1 < stage_count {
            busy = busy.max(load_w[s + 1]);
        }
        if s > 0 {
            busy = busy.max(drain_w[s - 1]);
        }
        boundary += busy - stage_len[s];
    }
    if stage_count > 0 {
        boundary += drain_w[stage_count - 1];
    }
    let total_cycles = phys + boundary;
    let bandwidth = ports
        .iter()
        .enumerate()
        .map(|(i, p)| {
            (
                p.name.clone(),
                Bandwidth {
                    peak: peak[i],
                    average: totals[i] as f64 / compute_cycles.max(1) as f64,
                },
            )
        })
        .collect();
    Ok(SimReport {
        total_cycles,
        compute_cycles,
        fill_drain_cycles: total_cycles - compute_cycles,
        stall_cycles,
        macs,
        spatial_utilization: macs as f64 / (npe as f64 * total_cycles.max(1) as f64),
        bandwidth,
        output,
        trace,
    })
}

fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::TensorAlgebra;
    use crate::arch::{generate, GenerateOptions};
    use crate::linalg::Mat3;
    use crate::stt::SttMatrix;
    use crate::tiling::ArrayDims;
    use rand::SeedableRng;

    fn run(src: &str, sel: [&str; 3], t: Mat3, dims: ArrayDims, opts: SimOptions) -> (SimReport<i64>, Tensor<i64>) {
        let alg = TensorAlgebra::parse(src).unwrap();
        let stt = SttMatrix::new(t, sel.map(String::from));
        let arch = generate(&alg, &stt, GenerateOptions::new(dims)).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let inputs = random_inputs(&alg, &mut rng);
        let report = simulate(&arch, &inputs, opts).unwrap();
        (report, reference_execute(&alg, &inputs).unwrap())
    }

    const OS: Mat3 = [[1, 0, 0], [0, 1, 0], [1, 1, 1]];
    const GEMM: [&str; 3] = ["m", "n", "k"];

    #[test]
    fn dot_product_on_one_pe() {
        let (r, want) = run("C[m,n] += A[m,k] * B[n,k]; m=1 n=1 k=4", GEMM, OS, ArrayDims::new(1, 1), SimOptions::default());
        assert_eq!(r.output, want);
        assert_eq!(r.compute_cycles, 4);
        assert_eq!(r.macs, 4);
        assert_eq!(r.total_cycles, r.compute_cycles + r.fill_drain_cycles);
    }

    #[test]
    fn output_stationary_gemm() {
        let (r, want) = run("C[m,n] += A[m,k] * B[n,k]; m=16 n=16 k=16", GEMM, OS, ArrayDims::new(16, 16), SimOptions::default());
        assert_eq!(r.output, want);
        assert_eq!(r.macs, 16 * 16 * 16);
        // skewed wavefront: 16 + 15 + 15 cycles, then one drain cycle
        assert_eq!(r.compute_cycles, 46);
        assert_eq!(r.total_cycles, 47);
        assert_eq!(r.bandwidth["A"].peak, 16);
        assert_eq!(r.bandwidth["B"].peak, 16);
    }

    #[test]
    fn utilization_grows_with_k() {
        let small = run("C[m,n] += A[m,k] * B[n,k]; m=8 n=8 k=8", GEMM, OS, ArrayDims::new(8, 8), SimOptions::default()).0;
        let large = run("C[m,n] += A[m,k] * B[n,k]; m=8 n=8 k=128", GEMM, OS, ArrayDims::new(8, 8), SimOptions::default()).0;
        assert!(large.spatial_utilization > small.spatial_utilization);
        assert!(large.spatial_utilization > 0.85 && large.spatial_utilization <= 1.0);
    }

    #[test]
    fn identity_multicast_and_tree() {
        for t in [[[1, 0, 0], [0, 1, 0], [0, 0, 1]], [[0, 0, 1], [1, 0, 0], [0, 1, 0]], [[1, 0, 0], [0, 0, 1], [0, 1, 1]]] {
            let (r, want) = run("C[m,n] += A[m,k] * B[n,k]; m=4 n=5 k=3", GEMM, t, ArrayDims::new(4, 4), SimOptions::default());
            assert_eq!(r.output, want, "{t:?}");
        }
    }

    #[test]
    fn unicast_stalls_by_ratio() {
        let src = "C[b,m] += A[b,m,k] * B[b,k]; b=4 m=4 k=8";
        let id = [[1, 0, 0], [0, 1, 0], [0, 0, 1]];
        let sel = ["b", "m", "k"];
        let free = run(src, sel, id, ArrayDims::new(4, 4), SimOptions::default()).0;
        let capped = run(src, sel, id, ArrayDims::new(4, 4), SimOptions { bandwidth_cap: Some(4), trace: false }).0;
        assert_eq!(free.output, capped.output);
        assert_eq!(capped.bandwidth["A"].peak, 16);
        // A needs 16 reads per cycle through 4 ports
        assert_eq!(capped.stall_cycles, 8 * 3);
        assert!(capped.total_cycles > free.total_cycles);
    }

    #[test]
    fn trace_bandwidth_matches_report() {
        let opts = SimOptions { bandwidth_cap: None, trace: true };
        let (r, _) = run("C[m,n] += A[m,k] * B[n,k]; m=4 n=4 k=8", GEMM, OS, ArrayDims::new(4, 4), opts);
        assert_eq!(measure_bandwidth(&r.trace), r.bandwidth);
        let csv = trace_csv(&r.trace);
        assert!(csv.starts_with("cycle,pe_x,pe_y,event,tensor,index"));
        assert_eq!(r.trace.iter().filter(|e| e.event == EventKind::Mac).count() as u64, r.macs);
    }
}
