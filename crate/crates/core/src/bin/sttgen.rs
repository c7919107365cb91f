use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use sttgen::algebra::TensorAlgebra;
use sttgen::arch::{generate, ArchSpec, GenerateOptions};
use sttgen::config::ExploreConfig;
use sttgen::dataflow::{analyze, Analysis};
use sttgen::dse::{explore, Dedup, DEFAULT_TIME_BUDGET};
use sttgen::sim::{random_inputs, reference_execute, simulate, trace_csv, Inputs, SimOptions};
use sttgen::stt::{parse_matrix, SttMatrix};
use sttgen::tensor::{self, Element, Tensor};
use sttgen::tiling::ArrayDims;
use sttgen::Error;

#[derive(Parser)]
#[command(name = "sttgen", version, about = "Dataflow analysis, accelerator generation and simulation for tensor algebra")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Classify the dataflow of every tensor under a space-time transformation.
    Analyze(AnalyzeArgs),
    /// Build an architecture description from an analysis.
    Generate(GenerateArgs),
    /// Run an architecture description cycle by cycle.
    Simulate(SimulateArgs),
    /// Enumerate and rank design points.
    Explore(ExploreArgs),
}

#[derive(Args)]
struct Mapping {
    /// `.ta` file holding one statement.
    #[arg(long)]
    algebra: Option<PathBuf>,
    /// Space-time matrix, rows separated by `;`.
    #[arg(long)]
    stt: Option<String>,
    /// Three loops the matrix applies to; defaults to the first three.
    #[arg(long, value_delimiter = ',')]
    select: Option<Vec<String>>,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    mapping: Mapping,
    #[arg(long)]
    out: Option<PathBuf>,
    /// One line of plain text instead of JSON.
    #[arg(long)]
    text: bool,
}

#[derive(Args)]
struct GenerateArgs {
    /// Analysis JSON; `-` or absent reads stdin unless `--algebra` is given.
    input: Option<PathBuf>,
    #[command(flatten)]
    mapping: Mapping,
    #[arg(long, default_value = "16x16")]
    array: String,
    #[arg(long, default_value_t = DEFAULT_TIME_BUDGET)]
    time_budget: usize,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    text: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Dtype {
    Int,
    Float,
}

#[derive(Args)]
struct SimulateArgs {
    /// ArchSpec JSON; `-` or absent reads stdin.
    input: Option<PathBuf>,
    /// `NAME=PATH`, binary or `.csv`. Missing inputs are random.
    #[arg(long = "tensor")]
    tensors: Vec<String>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Bank transfers per tensor per cycle.
    #[arg(long)]
    bw: Option<usize>,
    #[arg(long, value_enum, default_value = "int")]
    dtype: Dtype,
    /// Write the event trace as CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Write the output tensor, binary or `.csv`.
    #[arg(long)]
    output_tensor: Option<PathBuf>,
    /// Fail unless the result equals direct loop evaluation.
    #[arg(long)]
    check: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    text: bool,
}

#[derive(Args)]
struct ExploreArgs {
    #[arg(long)]
    algebra: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    array: Option<String>,
    #[arg(long)]
    bw: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Simulate this many of the best points.
    #[arg(long)]
    top_k: Option<usize>,
    #[arg(long, value_enum)]
    dedup: Option<DedupArg>,
    /// Ranked CSV; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Pareto frontier CSV.
    #[arg(long)]
    pareto: Option<PathBuf>,
    /// Full JSON report instead of CSV.
    #[arg(long)]
    json: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum DedupArg {
    Signature,
    ArraySymmetry,
}

/// What `analyze` hands to `generate`.
#[derive(Serialize, Deserialize)]
struct AnalyzeReport {
    source: String,
    analysis: Analysis,
}

enum Failure {
    Lib(Error),
    Usage(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Lib(e.into())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Lib(e.into())
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn exit_code(e: &Failure) -> u8 {
    match e {
        Failure::Usage(_) => 1,
        Failure::Lib(Error::SingularStt { .. } | Error::Unsupported(_)) => 2,
        Failure::Lib(Error::SimFault { .. } | Error::Contract(_)) => 3,
        Failure::Lib(_) => 1,
    }
}

fn read_input(path: Option<&Path>) -> CliResult<String> {
    match path {
        Some(p) if p != Path::new("-") => Ok(std::fs::read_to_string(p)?),
        _ => {
            let mut s = String::new();
            std::io::stdin().read_to_string(&mut s)?;
            Ok(s)
        }
    }
}

fn emit(out: Option<&Path>, text: &str) -> CliResult<()> {
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => match std::io::stdout().write_all(text.as_bytes()) {
            Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => {}
            r => r?,
        },
    }
    Ok(())
}

fn pretty<T: Serialize>(v: &T) -> CliResult<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

fn load_algebra(path: &Path) -> CliResult<(String, TensorAlgebra)> {
    let source = std::fs::read_to_string(path)?;
    let algebra = TensorAlgebra::parse(&source)?;
    Ok((source, algebra))
}

fn build_stt(algebra: &TensorAlgebra, m: &Mapping) -> CliResult<SttMatrix> {
    let text = m.stt.as_deref().ok_or_else(|| Failure::Usage("--stt is required".into()))?;
    let entries = parse_matrix(text)?;
    let names: Vec<String> = match &m.select {
        Some(s) => s.iter().map(|v| v.trim().to_string()).collect(),
        None => algebra.iterators.iter().take(3).map(|it| it.name.clone()).collect(),
    };
    let names: [String; 3] = names
        .try_into()
        .map_err(|v: Vec<String>| Failure::Usage(format!("--select needs three loops, got {}", v.len())))?;
    algebra.resolve_selection(&names)?;
    Ok(SttMatrix::new(entries, names))
}

fn analysis_text(analysis: &Analysis) -> String {
    let mut parts: Vec<String> = analysis
        .tensors
        .iter()
        .map(|t| format!("{}: {}", t.tensor, t.dataflow))
        .collect();
    parts.push(format!("name {}", analysis.name));
    parts.join("; ") + "\n"
}

fn cmd_analyze(a: AnalyzeArgs) -> CliResult<()> {
    let path = a
        .mapping
        .algebra
        .as_deref()
        .ok_or_else(|| Failure::Usage("--algebra is required".into()))?;
    let (source, algebra) = load_algebra(path)?;
    let stt = build_stt(&algebra, &a.mapping)?;
    let analysis = analyze(&algebra, &stt)?;
    let text = if a.text {
        analysis_text(&analysis)
    } else {
        pretty(&AnalyzeReport { source, analysis })?
    };
    emit(a.out.as_deref(), &text)
}

fn cmd_generate(a: GenerateArgs) -> CliResult<()> {
    let (algebra, stt) = match &a.mapping.algebra {
        Some(path) => {
            let (_, algebra) = load_algebra(path)?;
            let stt = build_stt(&algebra, &a.mapping)?;
            (algebra, stt)
        }
        None => {
            let report: AnalyzeReport = serde_json::from_str(&read_input(a.input.as_deref())?)?;
            (TensorAlgebra::parse(&report.source)?, report.analysis.stt)
        }
    };
    let opts = GenerateOptions {
        array: ArrayDims::parse(&a.array)?,
        time_budget: a.time_budget,
    };
    let arch = generate(&algebra, &stt, opts)?;
    let text = if a.text {
        format!(
            "{}: {} PEs, {} links, {} multicast groups, {} reduction trees, {} banks, {} stages of {} cycles\n",
            arch.name,
            arch.array.pes(),
            arch.links.len(),
            arch.multicast_groups.len(),
            arch.reduction_trees.len(),
            arch.banks.len(),
            arch.stages.stage_count,
            arch.stages.cycles_per_stage,
        )
    } else {
        arch.to_json() + "\n"
    };
    emit(a.out.as_deref(), &text)
}

fn gather_inputs<T: Element>(algebra: &TensorAlgebra, specs: &[String], seed: u64) -> CliResult<Inputs<T>> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut inputs: Inputs<T> = random_inputs(algebra, &mut rng);
    for spec in specs {
        let (name, path) = spec
            .split_once('=')
            .ok_or_else(|| Failure::Usage(format!("--tensor expects NAME=PATH, got `{spec}`")))?;
        if !inputs.contains_key(name) {
            return Err(Failure::Usage(format!("`{name}` is not an input tensor")));
        }
        inputs.insert(name.to_string(), tensor::load(Path::new(path))?);
    }
    Ok(inputs)
}

fn save_tensor<T: Element>(t: &Tensor<T>, path: &Path) -> CliResult<()> {
    if path.extension().is_some_and(|e| e == "csv") {
        std::fs::write(path, t.to_csv())?;
    } else {
        t.write_binary(std::io::BufWriter::new(std::fs::File::create(path)?))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct SimOutput<'a, T> {
    #[serde(flatten)]
    report: &'a sttgen::sim::SimReport<T>,
    #[serde(skip_serializing_if = "Option::is_none")]
    matches_reference: Option<bool>,
}

fn run_sim<T: Element>(arch: &ArchSpec, a: &SimulateArgs) -> CliResult<()> {
    let inputs: Inputs<T> = gather_inputs(&arch.algebra, &a.tensors, a.seed)?;
    let opts = SimOptions {
        bandwidth_cap: a.bw,
        trace: a.trace.is_some(),
    };
    let report = simulate(arch, &inputs, opts)?;
    let matches = if a.check {
        Some(reference_execute(&arch.algebra, &inputs)? == report.output)
    } else {
        None
    };
    if let Some(p) = &a.trace {
        std::fs::write(p, trace_csv(&report.trace))?;
    }
    if let Some(p) = &a.output_tensor {
        save_tensor(&report.output, p)?;
    }
    let text = if a.text {
        let bw: BTreeMap<&String, u64> = report.bandwidth.iter().map(|(k, v)| (k, v.peak)).collect();
        format!(
            "{}: {} cycles ({} compute, {} fill/drain, {} stall), {} MACs, utilization {:.4}, peak bandwidth {:?}\n",
            arch.name,
            report.total_cycles,
            report.compute_cycles,
            report.fill_drain_cycles,
            report.stall_cycles,
            report.macs,
            report.spatial_utilization,
            bw
        )
    } else {
        pretty(&SimOutput {
            report: &report,
            matches_reference: matches,
        })?
    };
    emit(a.out.as_deref(), &text)?;
    if matches == Some(false) {
        return Err(Error::Contract("simulated output differs from the reference".into()).into());
    }
    Ok(())
}

fn cmd_simulate(a: SimulateArgs) -> CliResult<()> {
    let arch = ArchSpec::from_json(&read_input(a.input.as_deref())?)?;
    match a.dtype {
        Dtype::Int => run_sim::<i64>(&arch, &a),
        Dtype::Float => run_sim::<f64>(&arch, &a),
    }
}

fn cmd_explore(a: ExploreArgs) -> CliResult<()> {
    let (_, algebra) = load_algebra(&a.algebra)?;
    let mut cfg = match &a.config {
        Some(p) => ExploreConfig::load(p)?,
        None => ExploreConfig::default(),
    };
    if let Some(v) = a.array {
        ArrayDims::parse(&v)?;
        cfg.array = v;
    }
    if a.bw.is_some() {
        cfg.bandwidth_cap = a.bw;
    }
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if let Some(v) = a.top_k {
        cfg.top_k = v;
    }
    if let Some(d) = a.dedup {
        cfg.dedup = match d {
            DedupArg::Signature => Dedup::Signature,
            DedupArg::ArraySymmetry => Dedup::ArraySymmetry,
        };
    }
    let result = explore(&algebra, &cfg)?;
    if result.points.is_empty() {
        eprintln!("no legal design point for `{}`", algebra.name);
    }
    if let Some(p) = &a.pareto {
        std::fs::write(p, result.pareto_csv())?;
    }
    let text = if a.json { pretty(&result)? } else { result.to_csv() };
    emit(a.out.as_deref(), &text)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Analyze(a) => cmd_analyze(a),
        Command::Generate(a) => cmd_generate(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Explore(a) => cmd_explore(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            match &e {
                Failure::Usage(m) => eprintln!("error: {m}"),
                Failure::Lib(err) => eprintln!("error: {err}"),
            }
            ExitCode::from(exit_code(&e))
        }
    }
}
