mod common;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::sync::OnceLock;

use proptest::prelude::*;
use rand::SeedableRng;
use sttgen::algebra::TensorAlgebra;
use sttgen::arch::{generate, ArchSpec, GenerateOptions};
use sttgen::dataflow::{classify_dataflow, IoRole};
use sttgen::dse::{enumerate_designs, DesignPoint};
use sttgen::sim::{random_inputs, reference_execute, simulate, EventKind, Inputs, SimOptions};
use sttgen::stt::{annihilates, normalize_direction, reuse_space, reuse_space_rational, space_time_map, SttMatrix};
use sttgen::tiling::ArrayDims;

fn stt(m: [[i64; 3]; 3]) -> SttMatrix {
    SttMatrix::new(m, ["a".into(), "b".into(), "c".into()])
}

fn det(m: &[[i64; 3]; 3]) -> i64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

fn matrix(range: i64) -> impl Strategy<Value = [[i64; 3]; 3]> {
    prop::array::uniform3(prop::array::uniform3(-range..=range))
}

fn nonsingular(range: i64) -> impl Strategy<Value = [[i64; 3]; 3]> {
    matrix(range).prop_filter("singular", |m| det(m) != 0)
}

fn access() -> impl Strategy<Value = Vec<[i64; 3]>> {
    prop::collection::vec(prop::array::uniform3(-1i64..=1), 1..=3)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn reuse_basis_is_annihilated(a in access(), t in nonsingular(2)) {
        let t = stt(t);
        let space = reuse_space(&a, &t).unwrap();
        let m = common::access_times_inverse(&a, &t.entries).unwrap();
        prop_assert_eq!(space.dimension, common::nullspace(&m).len());
        for v in &space.basis {
            prop_assert!(annihilates(&a, &t, v).unwrap());
            prop_assert!(common::annihilated(&m, v));
        }
    }

    #[test]
    fn integer_and_rational_kernels_agree(a in access(), t in nonsingular(2)) {
        let t = stt(t);
        let int = reuse_space(&a, &t).unwrap();
        let rat = reuse_space_rational(&a, &t).unwrap();
        prop_assert!(int.same_span(&rat), "{:?} vs {:?}", int, rat);
        prop_assert!(rat.same_span(&int));
    }

    #[test]
    fn classification_matches_oracle(a in access(), t in nonsingular(2), output in any::<bool>()) {
        let role = if output { IoRole::Output } else { IoRole::Input };
        let t = stt(t);
        let flow = classify_dataflow(&reuse_space(&a, &t).unwrap(), role);
        let want = common::classify(&a, &t.entries, role).unwrap();
        prop_assert_eq!(flow.kind, want.kind);
        prop_assert_eq!(flow.sub_kind, want.sub_kind);
        if flow.direction.len() == 1 {
            prop_assert_eq!(Some(flow.direction[0]), want.direction);
        }
    }

    #[test]
    fn singular_stt_is_rejected(a in access(), t in matrix(1).prop_filter("nonsingular", |m| det(m) == 0)) {
        prop_assert!(reuse_space(&a, &stt(t)).is_err());
    }

    #[test]
    fn space_time_map_is_injective(t in nonsingular(2)) {
        let t = stt(t);
        let mut seen = HashSet::new();
        for x in 0..4 {
            for y in 0..4 {
                for z in 0..4 {
                    let v = [x, y, z];
                    let p = space_time_map(&t, v);
                    let want: Vec<i64> = (0..3).map(|r| (0..3).map(|c| t.entries[r][c] * v[c]).sum()).collect();
                    prop_assert_eq!(vec![p.p[0], p.p[1], p.t], want);
                    prop_assert!(seen.insert((p.p, p.t)));
                }
            }
        }
    }

    #[test]
    fn normalization_ignores_scale(v in prop::array::uniform3(-6i64..=6), k in prop::sample::select(vec![-3i64, -2, -1, 1, 2, 5])) {
        prop_assume!(v != [0, 0, 0]);
        let n = normalize_direction(v);
        prop_assert_eq!(normalize_direction(v.map(|x| x * k)), n);
        prop_assert_eq!(n, common::primitive(&v.map(common::Q::from_integer)));
    }

    #[test]
    fn reuse_ignores_row_scaling(a in access(), t in nonsingular(2), k in 2i64..4) {
        let t = stt(t);
        let scaled: Vec<[i64; 3]> = a.iter().map(|r| r.map(|x| x * k)).collect();
        prop_assert_eq!(reuse_space(&a, &t).unwrap(), reuse_space(&scaled, &t).unwrap());
    }
}

const SMALL: [&str; 4] = [
    "gemm: C[m,n] += A[m,k] * B[k,n]; m=4 n=3 k=4",
    "conv1d: C[k,x] += A[c,x+p] * B[k,c,p]; k=2 c=2 x=4 p=3",
    "mttkrp: D[i,j] += A[i,k,l] * B[k,j] * C[l,j]; i=3 j=3 k=3 l=3",
    "bmv: C[b,m] += A[b,m,k] * B[b,k]; b=3 m=3 k=4",
];

struct Corpus {
    algebra: TensorAlgebra,
    points: Vec<DesignPoint>,
    inputs: Inputs<i64>,
    reference: Vec<i64>,
}

fn corpus() -> &'static Vec<Corpus> {
    static CELL: OnceLock<Vec<Corpus>> = OnceLock::new();
    CELL.get_or_init(|| {
        SMALL
            .iter()
            .map(|src| {
                let algebra = TensorAlgebra::parse(src).unwrap();
                let points = enumerate_designs(&algebra, ArrayDims::new(4, 4), &[-1, 0, 1]);
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
                let inputs = random_inputs(&algebra, &mut rng);
                let reference = reference_execute(&algebra, &inputs).unwrap().data;
                Corpus {
                    algebra,
                    points,
                    inputs,
                    reference,
                }
            })
            .collect()
    })
}

fn pick(which: usize, index: usize) -> (&'static Corpus, ArchSpec) {
    let c = &corpus()[which % SMALL.len()];
    let p = &c.points[index % c.points.len()];
    let arch = generate(&c.algebra, &p.stt, GenerateOptions::new(ArrayDims::new(4, 4))).unwrap();
    (c, arch)
}

fn iterations(alg: &TensorAlgebra) -> Vec<Vec<i64>> {
    let bounds = alg.bounds();
    let mut out = vec![vec![]];
    for b in bounds {
        out = out
            .into_iter()
            .flat_map(|x| {
                (0..b as i64).map(move |v| {
                    let mut y = x.clone();
                    y.push(v);
                    y
                })
            })
            .collect();
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn simulation_matches_reference(which in 0usize..4, index in any::<usize>(), cap in prop::option::of(1usize..6)) {
        let (c, arch) = pick(which, index);
        let r = simulate(&arch, &c.inputs, SimOptions { bandwidth_cap: cap, trace: false }).unwrap();
        prop_assert_eq!(&r.output.data, &c.reference, "{}", arch.name);
        prop_assert_eq!(r.macs, c.algebra.volume());
    }

    #[test]
    fn simulation_is_deterministic(which in 0usize..4, index in any::<usize>()) {
        let (c, arch) = pick(which, index);
        let opts = SimOptions { bandwidth_cap: Some(2), trace: true };
        let a = simulate(&arch, &c.inputs, opts).unwrap();
        let b = simulate(&arch, &c.inputs, opts).unwrap();
        prop_assert_eq!(a.total_cycles, b.total_cycles);
        prop_assert_eq!(a.trace, b.trace);
        prop_assert_eq!(a.output, b.output);
    }

    #[test]
    fn more_bandwidth_never_slows(which in 0usize..4, index in any::<usize>(), cap in 1usize..8) {
        let (c, arch) = pick(which, index);
        let cycles = |cap| simulate(&arch, &c.inputs, SimOptions { bandwidth_cap: cap, trace: false }).unwrap().total_cycles;
        let lo = cycles(Some(cap));
        prop_assert!(lo >= cycles(Some(cap + 1)));
        prop_assert!(cycles(Some(cap + 1)) >= cycles(None));
    }

    #[test]
    fn bank_streams_cover_demanded_indices(which in 0usize..4, index in any::<usize>()) {
        let (c, arch) = pick(which, index);
        let r = simulate(&arch, &c.inputs, SimOptions { bandwidth_cap: None, trace: true }).unwrap();
        let alg = &c.algebra;
        let points = iterations(alg);
        let macs: BTreeMap<Vec<i64>, usize> = r.trace.iter().filter(|e| e.event == EventKind::Mac).fold(BTreeMap::new(), |mut m, e| {
            *m.entry(e.index.clone()).or_default() += 1;
            m
        });
        prop_assert_eq!(macs.len(), points.len());
        prop_assert!(macs.values().all(|&n| n == 1));
        for access in alg.tensors() {
            let want: BTreeSet<Vec<i64>> = points.iter().map(|x| access.index(x)).collect();
            let moved: BTreeSet<Vec<i64>> = r
                .trace
                .iter()
                .filter(|e| e.tensor == access.tensor_name && e.event != EventKind::Mac)
                .map(|e| e.index.clone())
                .collect();
            prop_assert_eq!(moved, want, "{} {}", arch.name, access.tensor_name);
        }
    }

    #[test]
    fn sharing_groups_are_disjoint(which in 0usize..4, index in any::<usize>()) {
        let (_, arch) = pick(which, index);
        for m in &arch.pe_modules {
            let mut seen = HashSet::new();
            let groups = arch
                .multicast_groups
                .iter()
                .filter(|g| g.tensor == m.tensor)
                .map(|g| &g.members)
                .chain(arch.reduction_trees.iter().filter(|t| t.tensor == m.tensor).map(|t| &t.members));
            for members in groups {
                prop_assert!(!members.is_empty());
                for p in members {
                    prop_assert!(p[0] < arch.array.rows && p[1] < arch.array.cols);
                    prop_assert!(seen.insert(*p), "{} {}: {:?} in two groups", arch.name, m.tensor, p);
                }
            }
        }
        for t in &arch.reduction_trees {
            prop_assert!(t.latency >= t.depth);
            prop_assert!(t.members.len() <= t.arity.max(1).pow(t.depth as u32));
        }
    }
}
