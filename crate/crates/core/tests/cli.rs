use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use sttgen::algebra::TensorAlgebra;
use sttgen::sim::reference_execute;
use sttgen::tensor::Tensor;

const OS: &str = "1,0,0;0,1,0;1,1,1";

fn golden(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

fn read(name: &str) -> String {
    std::fs::read_to_string(golden(name)).unwrap()
}

fn run(args: &[&str], stdin: Option<&[u8]>) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_sttgen"))
        .args(args)
        .current_dir(golden(""))
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut pipe = child.stdin.take().unwrap();
    pipe.write_all(stdin.unwrap_or_default()).unwrap();
    drop(pipe);
    child.wait_with_output().unwrap()
}

fn stdout(out: &Output) -> String {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn analyze_matches_golden() {
    let text = run(&["analyze", "--algebra", "gemm4.ta", "--stt", OS, "--text"], None);
    assert_eq!(stdout(&text), read("analyze_os.txt"));
    let json = run(&["analyze", "--algebra", "gemm4.ta", "--stt", OS], None);
    assert_eq!(stdout(&json).trim_end(), read("analyze_os.json").trim_end());
}

#[test]
fn generate_matches_golden() {
    let out = run(&["generate", "analyze_os.json", "--array", "4x4"], None);
    assert_eq!(stdout(&out).trim_end(), read("generate_os.json").trim_end());
    let direct = run(&["generate", "--algebra", "gemm4.ta", "--stt", OS, "--array", "4x4"], None);
    assert_eq!(stdout(&direct), stdout(&out));
}

#[test]
fn simulate_matches_golden() {
    let text = run(&["simulate", "generate_os.json", "--bw", "2", "--text"], None);
    assert_eq!(stdout(&text), read("simulate_os.txt"));
    let json = run(&["simulate", "generate_os.json", "--bw", "2"], None);
    assert_eq!(stdout(&json).trim_end(), read("simulate_os.json").trim_end());
}

#[test]
fn pipeline_reproduces_reference() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let out = dir.path().join("c.tnsr");
    let trace = dir.path().join("trace.csv");
    // 4x4 A given explicitly, B random from the seed
    let a_tensor = Tensor::from_vec(&[4, 4], (0..16).map(|v| v - 7).collect::<Vec<i64>>()).unwrap();
    std::fs::write(&a, a_tensor.to_csv()).unwrap();

    let analysis = stdout(&run(&["analyze", "--algebra", "gemm4.ta", "--stt", "0,1,0;0,0,1;1,1,1", "--select", "m,n,k"], None));
    let arch = stdout(&run(&["generate", "-", "--array", "4x4"], Some(analysis.as_bytes())));
    let tensor_arg = format!("A={}", a.display());
    let sim = run(
        &[
            "simulate",
            "--tensor",
            &tensor_arg,
            "--seed",
            "4",
            "--check",
            "--output-tensor",
            out.to_str().unwrap(),
            "--trace",
            trace.to_str().unwrap(),
        ],
        Some(arch.as_bytes()),
    );
    let report: serde_json::Value = serde_json::from_str(&stdout(&sim)).unwrap();
    assert_eq!(report["matches_reference"], true);

    let c: Tensor<i64> = sttgen::tensor::load(&out).unwrap();
    let alg = TensorAlgebra::parse(&read("gemm4.ta")).unwrap();
    // rebuild B the way the CLI does: every input not given is drawn from the seed
    let b = report_inputs(&alg, &a_tensor, 4);
    let want = reference_execute(&alg, &b).unwrap();
    assert_eq!(c, want);
    let trace = std::fs::read_to_string(&trace).unwrap();
    assert!(trace.starts_with("cycle,pe_x,pe_y,event,tensor,index\n"));
    assert_eq!(trace.lines().filter(|l| l.contains(",mac,")).count(), 64);
}

fn report_inputs(alg: &TensorAlgebra, a: &Tensor<i64>, seed: u64) -> sttgen::sim::Inputs<i64> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut inputs = sttgen::sim::random_inputs(alg, &mut rng);
    inputs.insert("A".into(), a.clone());
    inputs
}

#[test]
fn exit_codes() {
    let usage = run(&["analyze", "--no-such-flag"], None);
    assert_eq!(usage.status.code(), Some(1));
    let singular = run(&["analyze", "--algebra", "gemm4.ta", "--stt", "1,0,0;0,1,1;1,1,1"], None);
    assert_eq!(singular.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&singular.stderr).contains("singular"));
    let missing = run(&["analyze", "--algebra", "nope.ta", "--stt", OS], None);
    assert_eq!(missing.status.code(), Some(1));
    let garbage = run(&["simulate"], Some(b"{"));
    assert_eq!(garbage.status.code(), Some(1));
}

#[test]
fn explore_writes_csv_and_pareto() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("points.csv");
    let pareto = dir.path().join("pareto.csv");
    let out = run(
        &[
            "explore",
            "--algebra",
            "gemm4.ta",
            "--array",
            "4x4",
            "--out",
            csv.to_str().unwrap(),
            "--pareto",
            pareto.to_str().unwrap(),
        ],
        None,
    );
    stdout(&out);
    let rows = std::fs::read_to_string(&csv).unwrap();
    let front = std::fs::read_to_string(&pareto).unwrap();
    assert!(rows.lines().count() > front.lines().count());
    assert_eq!(rows.lines().next(), front.lines().next());
    for line in front.lines().skip(1) {
        assert!(rows.contains(line));
    }
}

#[test]
fn schema_lists_every_archspec_key() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/archspec.schema.json");
    let schema: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    let arch: serde_json::Value = serde_json::from_str(&read("generate_os.json")).unwrap();
    let props = schema["properties"].as_object().unwrap();
    for key in arch.as_object().unwrap().keys() {
        assert!(props.contains_key(key), "{key} missing from the schema");
    }
    for key in schema["required"].as_array().unwrap() {
        assert!(arch.get(key.as_str().unwrap()).is_some(), "{key}");
    }
    let stages = props["stages"]["properties"].as_object().unwrap();
    for key in arch["stages"].as_object().unwrap().keys() {
        assert!(stages.contains_key(key), "stages.{key}");
    }
}
