//! `errw` — command-line front end for the edge-reinforced walk library.
//!
//! Subcommands: `simulate`, `analyze-weights`, `nu`, `check-identities`,
//! `experiment`, `presets`. All outputs are JSON (stdout or `--out`).
//! Exit codes: 0 success, 1 assertion or tolerance failure, 2 usage or
//! config error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use errw_core::diagnostics::{run_identity_check, DRIFT_TOLERANCE, IDENTITY_TOLERANCE};
use errw_core::graph::{nu, odd_cycles, parse_graph_spec, NuValue, VertexId};
use errw_core::harness::{
    preset, preset_names, run_experiment, write_report_files, ExperimentConfig,
};
use errw_core::walk::{init_state, run, StepObserver, TrajectoryLog};
use errw_core::weight::{
    check_h0, check_h1, check_h2, check_h3, parse_weight_spec, HypothesisVerdict,
    TruncationPolicy,
};

#[derive(Parser)]
#[command(
    name = "errw",
    version,
    about = "Edge-reinforced random walk simulation and analysis"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one seeded walk and print its trajectory summary
    Simulate(SimulateArgs),
    /// Hypothesis checks (h0-h3) for a weight function
    AnalyzeWeights(AnalyzeArgs),
    /// Odd-cycle statistic of a graph
    Nu(NuArgs),
    /// Identity residual checks along a cycle run (exit 1 on breach)
    CheckIdentities(CheckIdentitiesArgs),
    /// Run a batched experiment from a config file or preset
    Experiment(ExperimentArgs),
    /// List the built-in experiment presets
    Presets(PresetsArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Graph spec (cycle:<len>, z, z2, triangle, square, k4, file:<path>)
    #[arg(long)]
    graph: String,
    /// Weight spec (power:<rho>, exp:<b>, sellke:<rho>, exposc, table:<path>)
    #[arg(long)]
    weight: String,
    #[arg(long)]
    steps: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Start vertex label
    #[arg(long, default_value_t = 0)]
    start: i64,
    /// Initial count on every edge
    #[arg(long, default_value_t = 1)]
    initial: u64,
    /// Write a per-step CSV trajectory log to this path
    #[arg(long)]
    log: Option<PathBuf>,
    /// Write the JSON summary here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    weight: String,
    /// Comma-separated subset of h0,h1,h2,h3
    #[arg(long, default_value = "h0,h1,h2,h3")]
    checks: String,
    /// Numeric odd-cycle statistic (required for h1; 0 means none)
    #[arg(long)]
    nu_value: Option<f64>,
    /// Index window "lo,hi" for liminf estimates
    #[arg(long, default_value = "1000,100000")]
    window: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct NuArgs {
    #[arg(long)]
    graph: String,
    /// Longest cycle length examined
    #[arg(long, default_value_t = 15)]
    max_len: usize,
    /// Include the enumerated odd cycles (explicit graphs only)
    #[arg(long)]
    list_cycles: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CheckIdentitiesArgs {
    /// Cycle graph spec (cycle:<len>)
    #[arg(long)]
    graph: String,
    #[arg(long)]
    weight: String,
    #[arg(long)]
    steps: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    initial: u64,
    /// Residual check interval in steps (1 = every step)
    #[arg(long, default_value_t = 1)]
    check_every: u64,
    /// Emit accumulator snapshots every this many steps (0 = off)
    #[arg(long, default_value_t = 0)]
    snapshot_every: u64,
    /// Write snapshots as JSON lines to this path
    #[arg(long)]
    snapshots_out: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// TOML experiment config
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Named preset (see `errw presets`)
    #[arg(long)]
    preset: Option<String>,
    /// Directory for report.json and replicas.csv
    #[arg(long)]
    out: PathBuf,
    /// Override the config's worker count
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct PresetsArgs {
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::AnalyzeWeights(args) => cmd_analyze(args),
        Command::Nu(args) => cmd_nu(args),
        Command::CheckIdentities(args) => cmd_check_identities(args),
        Command::Experiment(args) => cmd_experiment(args),
        Command::Presets(args) => cmd_presets(args),
    };
    match result {
        Ok(code) => code,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    }
}

fn emit(value: &impl serde::Serialize, out: Option<&PathBuf>) -> Result<(), String> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| e.to_string())?;
    bytes.push(b'\n');
    match out {
        Some(path) => std::fs::write(path, bytes).map_err(|e| e.to_string()),
        None => {
            use std::io::Write;
            std::io::stdout()
                .write_all(&bytes)
                .map_err(|e| e.to_string())
        }
    }
}

#[derive(serde::Serialize)]
struct SimulateOutput {
    graph: String,
    weight: String,
    steps: u64,
    seed: u64,
    start: i64,
    initial_default: u64,
    final_vertex: i64,
    last_switch: Option<u64>,
    total_traversals: u64,
    edge_counts: Vec<SimEdgeCount>,
    visit_counts: Vec<(i64, u64)>,
}

#[derive(serde::Serialize)]
struct SimEdgeCount {
    lo: i64,
    hi: i64,
    initial: u64,
    count: u64,
}

fn cmd_simulate(args: SimulateArgs) -> Result<ExitCode, String> {
    let g = parse_graph_spec(&args.graph).map_err(|e| e.to_string())?;
    let w = parse_weight_spec(&args.weight).map_err(|e| e.to_string())?;
    let mut state = init_state(&*g, &*w, VertexId(args.start), args.initial, &[], args.seed)
        .map_err(|e| e.to_string())?;

    let mut log = match &args.log {
        Some(path) => {
            let file = std::fs::File::create(path).map_err(|e| e.to_string())?;
            Some(TrajectoryLog::new(std::io::BufWriter::new(file)).map_err(|e| e.to_string())?)
        }
        None => None,
    };
    let summary = {
        let mut observers: Vec<&mut dyn StepObserver> = Vec::new();
        if let Some(l) = log.as_mut() {
            observers.push(l);
        }
        run(&mut state, &*g, &*w, args.steps, &mut observers).map_err(|e| e.to_string())?
    };
    if let Some(l) = log {
        l.finish().map_err(|e| e.to_string())?;
    }

    let output = SimulateOutput {
        graph: args.graph,
        weight: args.weight,
        steps: summary.steps,
        seed: args.seed,
        start: args.start,
        initial_default: args.initial,
        final_vertex: summary.final_vertex.0,
        last_switch: summary.last_switch,
        total_traversals: summary
            .edge_counts
            .values()
            .map(|c| c.current - c.initial)
            .sum(),
        edge_counts: summary
            .edge_counts
            .iter()
            .map(|(e, c)| SimEdgeCount {
                lo: e.lo.0,
                hi: e.hi.0,
                initial: c.initial,
                count: c.current,
            })
            .collect(),
        visit_counts: summary
            .visit_counts
            .iter()
            .map(|(v, &c)| (v.0, c))
            .collect(),
    };
    emit(&output, args.out.as_ref())?;
    Ok(ExitCode::SUCCESS)
}

#[derive(serde::Serialize)]
struct AnalyzeOutput {
    weight: String,
    window: (u64, u64),
    verdicts: Vec<HypothesisVerdict>,
}

fn cmd_analyze(args: AnalyzeArgs) -> Result<ExitCode, String> {
    let w = parse_weight_spec(&args.weight).map_err(|e| e.to_string())?;
    let policy = TruncationPolicy::default();
    let window = parse_window(&args.window)?;
    let mut verdicts = Vec::new();
    for check in args.checks.split(',') {
        let verdict = match check.trim() {
            "h0" => check_h0(&*w, &policy).map_err(|e| e.to_string())?,
            "h1" => {
                let nu_value = match args.nu_value {
                    Some(v) if v == 0.0 => NuValue::Zero,
                    Some(v) if v > 0.0 => NuValue::Finite(v),
                    Some(v) => return Err(format!("--nu-value must be >= 0, got {v}")),
                    None => return Err("h1 requires --nu-value".into()),
                };
                check_h1(&*w, nu_value, window, &policy).map_err(|e| e.to_string())?
            }
            "h2" => check_h2(&*w, (window.0.max(2), window.1), &policy)
                .map_err(|e| e.to_string())?,
            "h3" => check_h3(&*w, &policy).map_err(|e| e.to_string())?,
            other => return Err(format!("unknown check {other:?} (expected h0..h3)")),
        };
        verdicts.push(verdict);
    }
    let output = AnalyzeOutput {
        weight: args.weight,
        window,
        verdicts,
    };
    emit(&output, args.out.as_ref())?;
    Ok(ExitCode::SUCCESS)
}

fn parse_window(text: &str) -> Result<(u64, u64), String> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != 2 {
        return Err(format!("window must be \"lo,hi\", got {text:?}"));
    }
    let lo = parts[0].trim().parse().map_err(|_| "bad window lo")?;
    let hi = parts[1].trim().parse().map_err(|_| "bad window hi")?;
    if lo < 1 || lo > hi {
        return Err(format!("window must satisfy 1 <= lo <= hi, got {lo},{hi}"));
    }
    Ok((lo, hi))
}

#[derive(serde::Serialize)]
struct NuOutput {
    graph: String,
    max_len: usize,
    nu: NuValue,
    #[serde(skip_serializing_if = "Option::is_none")]
    odd_cycles: Option<errw_core::graph::CycleSet>,
}

fn cmd_nu(args: NuArgs) -> Result<ExitCode, String> {
    let g = parse_graph_spec(&args.graph).map_err(|e| e.to_string())?;
    let value = nu(&*g, args.max_len).map_err(|e| e.to_string())?;
    let cycles = if args.list_cycles {
        Some(odd_cycles(&*g, args.max_len).map_err(|e| e.to_string())?)
    } else {
        None
    };
    let output = NuOutput {
        graph: args.graph,
        max_len: args.max_len,
        nu: value,
        odd_cycles: cycles,
    };
    emit(&output, args.out.as_ref())?;
    Ok(ExitCode::SUCCESS)
}

#[derive(serde::Serialize)]
struct CheckIdentitiesOutput {
    graph: String,
    weight: String,
    seed: u64,
    identity_tolerance: f64,
    drift_tolerance: f64,
    #[serde(flatten)]
    report: errw_core::diagnostics::IdentityRunReport,
}

fn cmd_check_identities(args: CheckIdentitiesArgs) -> Result<ExitCode, String> {
    let g = parse_graph_spec(&args.graph).map_err(|e| e.to_string())?;
    let w = parse_weight_spec(&args.weight).map_err(|e| e.to_string())?;
    let (report, snapshots) = run_identity_check(
        &*g,
        &w,
        args.steps,
        args.seed,
        args.initial,
        args.check_every,
        args.snapshot_every,
    )
    .map_err(|e| e.to_string())?;
    if let Some(path) = &args.snapshots_out {
        let mut text = String::new();
        for snap in &snapshots {
            text.push_str(&serde_json::to_string(snap).map_err(|e| e.to_string())?);
            text.push('\n');
        }
        std::fs::write(path, text).map_err(|e| e.to_string())?;
    }
    let ok = report.within_tolerance;
    let output = CheckIdentitiesOutput {
        graph: args.graph,
        weight: args.weight,
        seed: args.seed,
        identity_tolerance: IDENTITY_TOLERANCE,
        drift_tolerance: DRIFT_TOLERANCE,
        report,
    };
    emit(&output, args.out.as_ref())?;
    Ok(if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn cmd_experiment(args: ExperimentArgs) -> Result<ExitCode, String> {
    let mut cfg: ExperimentConfig = match (&args.config, &args.preset) {
        (Some(path), None) => {
            let text = std::fs::read_to_string(path).map_err(|e| e.to_string())?;
            ExperimentConfig::from_toml(&text).map_err(|e| e.to_string())?
        }
        (None, Some(name)) => preset(name).map_err(|e| e.to_string())?,
        _ => return Err("exactly one of --config or --preset is required".into()),
    };
    if let Some(workers) = args.workers {
        cfg.parallelism = workers;
    }
    let report = run_experiment(&cfg).map_err(|e| e.to_string())?;
    write_report_files(&report, &args.out).map_err(|e| e.to_string())?;
    for assertion in &report.aggregate.assertions {
        let status = if assertion.passed { "pass" } else { "FAIL" };
        eprintln!("[{status}] {}: {}", assertion.name, assertion.detail);
    }
    Ok(if report.aggregate.all_assertions_passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

#[derive(serde::Serialize)]
struct PresetEntry {
    name: String,
    description: String,
    config: ExperimentConfig,
}

fn cmd_presets(args: PresetsArgs) -> Result<ExitCode, String> {
    let entries: Vec<PresetEntry> = preset_names()
        .into_iter()
        .map(|(name, description)| PresetEntry {
            name: name.into(),
            description: description.into(),
            config: preset(name).expect("registered preset resolves"),
        })
        .collect();
    emit(&entries, args.out.as_ref())?;
    Ok(ExitCode::SUCCESS)
}
