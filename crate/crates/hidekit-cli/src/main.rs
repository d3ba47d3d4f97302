//! hidekit: experiments on location-hiding protocols for mobile agents on
//! port-labeled graphs.
//!
//! Subcommands: `generate` (graph families), `simulate` (run batches as
//! JSONL), `analyze` (hiding reports), `mixing` (lazy-walk mixing times) and
//! `lowerbound` (the adversarial experiments). All outputs are
//! machine-readable and byte-identical across reruns with the same config
//! and seed. Exit codes: 0 success, 2 validation error, 3 non-termination.

mod config;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use hidekit::algorithms::AlgorithmSpec;
use hidekit::analyze::{
    bipartite_parity_probe, chain_cliques_scaling, exact_joint, floor_d_half_experiment,
    hiding_report, lemma_known_check, lemma_known_check_sampled, mc_joint, truncated_u_series,
    vertex_prior_to_configurations, AnalysisMode, HidingReport,
};
use hidekit::graph::{gen_family, GraphFamilySpec, PortLabeledGraph};
use hidekit::infotheory::Dist;
use hidekit::markov::{
    d_t, default_mixing_cap, lazy_walk_matrix, mixing_time, stationary_distribution, MarkovError,
};
use hidekit::simulate::{child_seed, run_multi, LoopCertificate, RunResult, SimulateError};

use config::{load_config, load_graph_file, parse_prior, ExperimentConfig, Mode};

const SEED_ENV: &str = "HIDEKIT_SEED";

#[derive(Debug)]
pub enum CliError {
    Validation(String),
    /// The non-termination payload has already been written to the output.
    NonTermination,
    Io(String),
}

impl CliError {
    fn validation(msg: impl Into<String>) -> Self {
        CliError::Validation(msg.into())
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 2,
            CliError::NonTermination => 3,
            CliError::Io(_) => 2,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

#[derive(Parser)]
#[command(
    name = "hidekit",
    version,
    about = "Simulate and analyze location-hiding protocols on port-labeled graphs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a graph family member; prints n, m and the diameter
    Generate(GenerateArgs),
    /// Run simulation batches; one JSON run result per line
    Simulate(SimulateArgs),
    /// Hiding analysis: the uncertainty coefficient U(X0;XT) under a prior
    Analyze(AnalyzeArgs),
    /// Mixing time of the lazy random walk
    Mixing(MixingArgs),
    /// Lower-bound experiments
    #[command(subcommand)]
    Lowerbound(LowerboundCommand),
}

/// Graph selection shared by most subcommands: a JSON file or an inline
/// family.
#[derive(Args, Debug)]
struct GraphInput {
    /// Graph JSON file
    #[arg(long, value_name = "FILE", conflicts_with = "family")]
    graph: Option<PathBuf>,
    /// Family: path | cycle | clique | double-star | chain-of-cliques |
    /// complete-bipartite
    #[arg(long)]
    family: Option<String>,
    /// Vertex count (path, cycle, clique)
    #[arg(long)]
    n: Option<usize>,
    /// Clique size (chain-of-cliques)
    #[arg(long)]
    x: Option<usize>,
    /// Clique count (chain-of-cliques)
    #[arg(long)]
    y: Option<usize>,
    /// Leaves per star (double-star)
    #[arg(long)]
    d: Option<usize>,
    /// Bridge port (double-star)
    #[arg(long)]
    p: Option<usize>,
    /// Left side size (complete-bipartite)
    #[arg(long)]
    a: Option<usize>,
    /// Right side size (complete-bipartite)
    #[arg(long)]
    b: Option<usize>,
    /// Seed for randomized family members
    #[arg(long)]
    graph_seed: Option<u64>,
}

#[derive(Debug, Default, Clone, Copy)]
struct FamilyParams {
    n: Option<usize>,
    x: Option<usize>,
    y: Option<usize>,
    d: Option<usize>,
    p: Option<usize>,
    a: Option<usize>,
    b: Option<usize>,
    seed: Option<u64>,
}

/// Builds a family spec from flags, rejecting parameters the family does
/// not take.
fn build_family_spec(family: &str, params: FamilyParams) -> Result<GraphFamilySpec, CliError> {
    let take = |field: Option<usize>, name: &str| {
        field.ok_or_else(|| CliError::validation(format!("family {family:?} requires --{name}")))
    };
    let reject = |fields: &[(Option<usize>, &str)]| -> Result<(), CliError> {
        for (f, name) in fields {
            if f.is_some() {
                return Err(CliError::validation(format!(
                    "family {family:?} does not take --{name}"
                )));
            }
        }
        Ok(())
    };
    let FamilyParams { n, x, y, d, p, a, b, seed } = params;
    match family {
        "path" | "cycle" | "clique" => {
            reject(&[(x, "x"), (y, "y"), (d, "d"), (p, "p"), (a, "a"), (b, "b")])?;
            let n = take(n, "n")?;
            Ok(match family {
                "path" => GraphFamilySpec::Path { n },
                "cycle" => GraphFamilySpec::Cycle { n },
                _ => GraphFamilySpec::Clique { n },
            })
        }
        "double-star" => {
            reject(&[(n, "n"), (x, "x"), (y, "y"), (a, "a"), (b, "b")])?;
            Ok(GraphFamilySpec::DoubleStar {
                d: take(d, "d")?,
                p: take(p, "p")?,
            })
        }
        "chain-of-cliques" => {
            reject(&[(n, "n"), (d, "d"), (p, "p"), (a, "a"), (b, "b")])?;
            Ok(GraphFamilySpec::ChainOfCliques {
                x: take(x, "x")?,
                y: take(y, "y")?,
                seed,
            })
        }
        "complete-bipartite" => {
            reject(&[(n, "n"), (x, "x"), (y, "y"), (d, "d"), (p, "p")])?;
            Ok(GraphFamilySpec::CompleteBipartite {
                a: take(a, "a")?,
                b: take(b, "b")?,
            })
        }
        other => Err(CliError::validation(format!("unknown family {other:?}"))),
    }
}

impl GraphInput {
    fn params(&self) -> FamilyParams {
        FamilyParams {
            n: self.n,
            x: self.x,
            y: self.y,
            d: self.d,
            p: self.p,
            a: self.a,
            b: self.b,
            seed: self.graph_seed,
        }
    }

    fn load(&self) -> Result<PortLabeledGraph, CliError> {
        match (&self.graph, &self.family) {
            (Some(path), None) => load_graph_file(path),
            (None, Some(family)) => {
                let spec = build_family_spec(family, self.params())?;
                gen_family(&spec).map_err(|e| CliError::validation(e.to_string()))
            }
            _ => Err(CliError::validation(
                "provide a graph with --graph FILE or --family NAME",
            )),
        }
    }
}

/// Algorithm selection shared by simulate/analyze/lowerbound.
#[derive(Args, Debug)]
struct AlgoInput {
    /// go-to-min-id | dfs-min-id | rw-hider | deterministic-no-memory
    #[arg(long)]
    algo: Option<String>,
    /// Termination probability (rw-hider)
    #[arg(long)]
    q: Option<f64>,
    /// Degree->port rule as a JSON map (deterministic-no-memory)
    #[arg(long)]
    rule: Option<String>,
}

impl AlgoInput {
    fn to_spec(&self) -> Result<AlgorithmSpec, CliError> {
        let name = self
            .algo
            .as_deref()
            .ok_or_else(|| CliError::validation("--algo is required"))?;
        let no_q = || -> Result<(), CliError> {
            if self.q.is_some() {
                return Err(CliError::validation(format!(
                    "algorithm {name:?} does not take --q"
                )));
            }
            Ok(())
        };
        let no_rule = || -> Result<(), CliError> {
            if self.rule.is_some() {
                return Err(CliError::validation(format!(
                    "algorithm {name:?} does not take --rule"
                )));
            }
            Ok(())
        };
        match name {
            "go-to-min-id" => {
                no_q()?;
                no_rule()?;
                Ok(AlgorithmSpec::GoToMinId)
            }
            "dfs-min-id" => {
                no_q()?;
                no_rule()?;
                Ok(AlgorithmSpec::DfsMinId)
            }
            "rw-hider" => {
                no_rule()?;
                let q = self
                    .q
                    .ok_or_else(|| CliError::validation("rw-hider requires --q"))?;
                Ok(AlgorithmSpec::RandomWalkHider { q })
            }
            "deterministic-no-memory" => {
                no_q()?;
                let raw = self
                    .rule
                    .as_deref()
                    .ok_or_else(|| CliError::validation("deterministic-no-memory requires --rule"))?;
                let by_string: BTreeMap<String, usize> = serde_json::from_str(raw)
                    .map_err(|e| CliError::validation(format!("--rule: {e}")))?;
                let mut rule = BTreeMap::new();
                for (k, v) in by_string {
                    let degree: usize = k
                        .parse()
                        .map_err(|_| CliError::validation(format!("--rule: bad degree {k:?}")))?;
                    rule.insert(degree, v);
                }
                Ok(AlgorithmSpec::DeterministicNoMemory { rule })
            }
            other => Err(CliError::validation(format!("unknown algorithm {other:?}"))),
        }
    }
}

#[derive(Args)]
struct GenerateArgs {
    /// Family name (see --help of the graph options)
    #[arg(long)]
    family: String,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    x: Option<usize>,
    #[arg(long)]
    y: Option<usize>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    p: Option<usize>,
    #[arg(long)]
    a: Option<usize>,
    #[arg(long)]
    b: Option<usize>,
    /// Seed for randomized family members
    #[arg(long)]
    seed: Option<u64>,
    /// Where to write the graph JSON; without it only the summary is printed
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Experiment config JSON (instead of inline flags)
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(flatten)]
    graph: GraphInput,
    #[command(flatten)]
    algo: AlgoInput,
    /// Start vertices, one per agent (comma separated)
    #[arg(long, value_delimiter = ',')]
    starts: Vec<usize>,
    /// Independent runs, each with a derived seed
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Parallel workers for independent trials
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Experiment config JSON (instead of inline flags)
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(flatten)]
    graph: GraphInput,
    #[command(flatten)]
    algo: AlgoInput,
    /// "uniform", "two_point:u,v", or a JSON map of vertex -> probability
    #[arg(long)]
    prior: Option<String>,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    /// Sample count in mc mode
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Analyze the same family at several sizes (comma-separated n values)
    #[arg(long, value_delimiter = ',')]
    sweep_n: Vec<usize>,
    /// Write a CSV series: (t, U) for the truncated protocol, or (n, U)
    /// under --sweep-n
    #[arg(long, value_name = "FILE")]
    emit_plot_data: Option<PathBuf>,
    /// Horizon for the (t, U) series
    #[arg(long, default_value_t = 64)]
    t_max: u64,
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MixingArgs {
    #[command(flatten)]
    graph: GraphInput,
    #[arg(long, default_value_t = 0.25)]
    epsilon: f64,
    /// Cap on the search; defaults to 8 n^3 ceil(log2(1/epsilon))
    #[arg(long)]
    t_max: Option<u64>,
    /// Write a CSV series of (t, d(t)) up to the mixing time
    #[arg(long, value_name = "FILE")]
    emit_plot_data: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum LowerboundCommand {
    /// Reachable-set disjointness witness at time t
    LemmaKnown(LemmaKnownArgs),
    /// Step-count experiment at a diameter pair, paired with hiding quality
    DHalf(DHalfArgs),
    /// Middle-reaching time scaling on chains of cliques (CSV)
    ChainCliques(ChainCliquesArgs),
    /// Parity leak of the non-lazy walk on a bipartite graph
    BipartiteParity(BipartiteParityArgs),
    /// Deterministic memoryless trap on the double star
    DoubleStarTrap(DoubleStarTrapArgs),
}

#[derive(Args)]
struct LemmaKnownArgs {
    #[command(flatten)]
    graph: GraphInput,
    #[command(flatten)]
    algo: AlgoInput,
    #[arg(long)]
    u: usize,
    #[arg(long)]
    v: usize,
    #[arg(long)]
    t: u64,
    #[arg(long, value_enum, default_value = "exact")]
    mode: Mode,
    #[arg(long, default_value_t = 1000)]
    trials: u64,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DHalfArgs {
    #[command(flatten)]
    graph: GraphInput,
    #[command(flatten)]
    algo: AlgoInput,
    #[arg(long, default_value_t = 1)]
    agents: usize,
    #[arg(long, default_value_t = 1000)]
    trials: u64,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ChainCliquesArgs {
    #[command(flatten)]
    algo: AlgoInput,
    /// Clique sizes to sweep (comma separated)
    #[arg(long, value_delimiter = ',', required = true)]
    x_list: Vec<usize>,
    /// Chain lengths to sweep (comma separated)
    #[arg(long, value_delimiter = ',', required = true)]
    y_list: Vec<usize>,
    /// Random family members per (x, y)
    #[arg(long, default_value_t = 50)]
    members: u64,
    /// Trials per member
    #[arg(long, default_value_t = 20)]
    trials: u64,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BipartiteParityArgs {
    #[command(flatten)]
    graph: GraphInput,
    /// Fixed, adversary-known running time
    #[arg(long)]
    t: u64,
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DoubleStarTrapArgs {
    /// Leaves per star
    #[arg(long)]
    d: usize,
    /// Bridge port (also the rule's exit port at the centers)
    #[arg(long)]
    p: usize,
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            match &e {
                CliError::Validation(msg) => eprintln!("error: {msg}"),
                CliError::Io(msg) => eprintln!("error: {msg}"),
                CliError::NonTermination => eprintln!("error: run did not terminate"),
            }
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Generate(args) => cmd_generate(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Analyze(args) => cmd_analyze(args),
        Command::Mixing(args) => cmd_mixing(args),
        Command::Lowerbound(cmd) => match cmd {
            LowerboundCommand::LemmaKnown(args) => cmd_lemma_known(args),
            LowerboundCommand::DHalf(args) => cmd_d_half(args),
            LowerboundCommand::ChainCliques(args) => cmd_chain_cliques(args),
            LowerboundCommand::BipartiteParity(args) => cmd_bipartite_parity(args),
            LowerboundCommand::DoubleStarTrap(args) => cmd_double_star_trap(args),
        },
    }
}

fn resolve_seed(flag: Option<u64>, config: Option<u64>) -> u64 {
    flag.or(config)
        .or_else(|| std::env::var(SEED_ENV).ok().and_then(|s| s.parse().ok()))
        .unwrap_or(0)
}

fn write_output(out: &Option<PathBuf>, content: &str) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, content)?,
        None => print!("{content}"),
    }
    Ok(())
}

fn to_json_line<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string(value).expect("reports serialize");
    s.push('\n');
    s
}

fn cmd_generate(args: GenerateArgs) -> Result<(), CliError> {
    let spec = build_family_spec(
        &args.family,
        FamilyParams {
            n: args.n,
            x: args.x,
            y: args.y,
            d: args.d,
            p: args.p,
            a: args.a,
            b: args.b,
            seed: args.seed,
        },
    )?;
    let g = gen_family(&spec).map_err(|e| CliError::validation(e.to_string()))?;
    if let Some(path) = &args.out {
        std::fs::write(path, g.to_json())?;
    }
    #[derive(Serialize)]
    struct Summary {
        n: usize,
        m: usize,
        diameter: usize,
    }
    print!(
        "{}",
        to_json_line(&Summary {
            n: g.n(),
            m: g.m(),
            diameter: g.diameter(),
        })
    );
    Ok(())
}

/// Inputs a simulate/analyze run actually uses, from flags or a config file.
struct ResolvedExperiment {
    graph: PortLabeledGraph,
    algo: AlgorithmSpec,
    prior: Option<Dist<usize>>,
    starts: Vec<usize>,
    trials: u64,
    seed: u64,
    mode: Mode,
    out: Option<PathBuf>,
    output_format: Option<config::OutputFormat>,
}

#[allow(clippy::too_many_arguments)]
fn resolve_experiment(
    config_path: &Option<PathBuf>,
    graph: &GraphInput,
    algo: &AlgoInput,
    prior_flag: Option<&str>,
    starts_flag: &[usize],
    trials_flag: Option<u64>,
    seed_flag: Option<u64>,
    mode_flag: Option<Mode>,
    out_flag: &Option<PathBuf>,
) -> Result<ResolvedExperiment, CliError> {
    if let Some(path) = config_path {
        if graph.graph.is_some()
            || graph.family.is_some()
            || algo.algo.is_some()
            || prior_flag.is_some()
            || !starts_flag.is_empty()
        {
            return Err(CliError::validation(
                "use either --config or inline graph/algo/prior flags, not both",
            ));
        }
        let cfg: ExperimentConfig = load_config(path)?;
        let g = cfg.graph.load()?;
        let prior = match &cfg.prior {
            Some(p) => Some(p.resolve(&g)?),
            None => None,
        };
        let starts = cfg.starts.clone().unwrap_or_default();
        Ok(ResolvedExperiment {
            algo: cfg.algorithm,
            prior,
            starts,
            trials: trials_flag.unwrap_or(cfg.trials),
            seed: resolve_seed(seed_flag, cfg.seed),
            mode: mode_flag.unwrap_or(cfg.mode),
            out: out_flag
                .clone()
                .or_else(|| cfg.output.as_ref().map(|o| o.path.clone())),
            output_format: cfg.output.as_ref().and_then(|o| o.format),
            graph: g,
        })
    } else {
        let g = graph.load()?;
        let spec = algo.to_spec()?;
        let prior = match prior_flag {
            Some(s) => Some(parse_prior(s, &g)?),
            None => None,
        };
        Ok(ResolvedExperiment {
            graph: g,
            algo: spec,
            prior,
            starts: starts_flag.to_vec(),
            trials: trials_flag.unwrap_or(1),
            seed: resolve_seed(seed_flag, None),
            mode: mode_flag.unwrap_or_default(),
            out: out_flag.clone(),
            output_format: None,
        })
    }
}

fn validate_exact_mode(algo: &AlgorithmSpec, mode: Mode) -> Result<(), CliError> {
    if mode == Mode::Exact && !algo.supports_exact_law() {
        return Err(CliError::validation(
            "mode: exact mode is unsupported for deterministic-no-memory; use mc",
        ));
    }
    Ok(())
}

#[derive(Serialize)]
struct NonTerminationPayload<'a> {
    error: &'a str,
    trial: u64,
    cap: u64,
    certificate: Option<LoopCertificate>,
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), CliError> {
    let exp = resolve_experiment(
        &args.config,
        &args.graph,
        &args.algo,
        None,
        &args.starts,
        args.trials,
        args.seed,
        None,
        &args.out,
    )?;
    if exp.starts.is_empty() {
        return Err(CliError::validation("simulate requires --starts (or starts in the config)"));
    }
    if let Some(f) = exp.output_format {
        if f != config::OutputFormat::Jsonl {
            return Err(CliError::validation(
                "output.format: simulate emits jsonl",
            ));
        }
    }
    for &s in &exp.starts {
        if !exp.graph.contains_vertex(s) {
            return Err(CliError::validation(format!(
                "starts: vertex {s} outside 1..={}",
                exp.graph.n()
            )));
        }
    }

    let run_trial = |i: u64| -> Result<RunResult, SimulateError> {
        run_multi(&exp.graph, &exp.algo, &exp.starts, child_seed(exp.seed, i))
    };
    let results: Vec<Result<RunResult, SimulateError>> = if args.jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(args.jobs)
            .build()
            .map_err(|e| CliError::validation(format!("--jobs: {e}")))?;
        pool.install(|| {
            use rayon::prelude::*;
            (0..exp.trials).into_par_iter().map(run_trial).collect()
        })
    } else {
        (0..exp.trials).map(run_trial).collect()
    };

    // Canonical order by trial index regardless of scheduling.
    let mut lines = String::new();
    for (i, result) in results.into_iter().enumerate() {
        match result {
            Ok(r) => lines.push_str(&to_json_line(&r)),
            Err(SimulateError::NonTermination { cap, certificate }) => {
                let payload = NonTerminationPayload {
                    error: "non-termination",
                    trial: i as u64,
                    cap,
                    certificate,
                };
                write_output(&exp.out, &to_json_line(&payload))?;
                return Err(CliError::NonTermination);
            }
            Err(e) => return Err(CliError::validation(e.to_string())),
        }
    }
    write_output(&exp.out, &lines)
}

fn cmd_analyze(args: AnalyzeArgs) -> Result<(), CliError> {
    if !args.sweep_n.is_empty() {
        return analyze_sweep(&args);
    }
    let exp = resolve_experiment(
        &args.config,
        &args.graph,
        &args.algo,
        args.prior.as_deref(),
        &[],
        args.trials,
        args.seed,
        args.mode,
        &args.out,
    )?;
    validate_exact_mode(&exp.algo, exp.mode)?;
    if let Some(f) = exp.output_format {
        if f != config::OutputFormat::Json {
            return Err(CliError::validation("output.format: analyze emits json"));
        }
    }

    let prior = match &exp.prior {
        Some(p) => p.clone(),
        None => Dist::uniform(exp.graph.vertices().collect::<Vec<_>>())
            .map_err(|e| CliError::validation(e.to_string()))?,
    };
    let report = analyze_one(&exp.graph, &exp.algo, &prior, exp.mode, exp.trials, exp.seed)?;
    write_output(&exp.out, &to_json_line(&report))?;

    if let Some(path) = &args.emit_plot_data {
        let series = truncated_u_series(&exp.graph, &exp.algo, &prior, args.t_max)
            .map_err(|e| CliError::validation(e.to_string()))?;
        let mut csv = String::from("t,u\n");
        for (t, u) in series {
            csv.push_str(&format!("{t},{u}\n"));
        }
        std::fs::write(path, csv)?;
    }
    Ok(())
}

fn analyze_one(
    g: &PortLabeledGraph,
    algo: &AlgorithmSpec,
    prior: &Dist<usize>,
    mode: Mode,
    trials: u64,
    seed: u64,
) -> Result<HidingReport, CliError> {
    match mode {
        Mode::Exact => {
            let joint =
                exact_joint(g, algo, prior).map_err(|e| CliError::validation(e.to_string()))?;
            Ok(hiding_report(&joint, AnalysisMode::Exact))
        }
        Mode::Mc => {
            let samples = trials.max(1);
            let config_prior = vertex_prior_to_configurations(prior);
            let joint = mc_joint(g, algo, &config_prior, samples, seed)
                .map_err(|e| CliError::validation(e.to_string()))?;
            Ok(hiding_report(
                &joint,
                AnalysisMode::MonteCarlo { samples, seed },
            ))
        }
    }
}

/// Hiding quality of one family at several sizes: the finite-scale view of
/// an asymptotic property, reported as a trend rather than a verdict.
fn analyze_sweep(args: &AnalyzeArgs) -> Result<(), CliError> {
    if args.config.is_some() {
        return Err(CliError::validation(
            "--sweep-n works with inline flags, not --config",
        ));
    }
    let family = args.graph.family.as_deref().ok_or_else(|| {
        CliError::validation("--sweep-n requires an n-parameterized --family (path, cycle, clique)")
    })?;
    if !matches!(family, "path" | "cycle" | "clique") {
        return Err(CliError::validation(format!(
            "--sweep-n supports path, cycle and clique, not {family:?}"
        )));
    }
    let algo = args.algo.to_spec()?;
    let mode = args.mode.unwrap_or_default();
    validate_exact_mode(&algo, mode)?;
    let trials = args.trials.unwrap_or(10_000);
    let seed = resolve_seed(args.seed, None);

    #[derive(Serialize)]
    struct SweepPoint {
        n: usize,
        #[serde(flatten)]
        report: HidingReport,
    }
    let mut points = Vec::new();
    for &n in &args.sweep_n {
        let mut params = args.graph.params();
        params.n = Some(n);
        let spec = build_family_spec(family, params)?;
        let g = gen_family(&spec).map_err(|e| CliError::validation(e.to_string()))?;
        let prior = match &args.prior {
            Some(s) => parse_prior(s, &g)?,
            None => Dist::uniform(g.vertices().collect::<Vec<_>>())
                .map_err(|e| CliError::validation(e.to_string()))?,
        };
        let report = analyze_one(&g, &algo, &prior, mode, trials, seed)?;
        points.push(SweepPoint { n, report });
    }
    write_output(&args.out, &to_json_line(&points))?;
    if let Some(path) = &args.emit_plot_data {
        let mut csv = String::from("n,u\n");
        for p in &points {
            csv.push_str(&format!("{},{}\n", p.n, p.report.uc));
        }
        std::fs::write(path, csv)?;
    }
    Ok(())
}

fn cmd_mixing(args: MixingArgs) -> Result<(), CliError> {
    if !(args.epsilon > 0.0 && args.epsilon < 1.0) {
        return Err(CliError::validation(format!(
            "--epsilon {} outside (0, 1)",
            args.epsilon
        )));
    }
    let g = args.graph.load()?;
    let p = lazy_walk_matrix(&g);
    let pi = stationary_distribution(&g);
    let cap = args
        .t_max
        .unwrap_or_else(|| default_mixing_cap(g.n(), args.epsilon));

    #[derive(Serialize)]
    struct MixingOutcome {
        n: usize,
        epsilon: f64,
        t_mix: Option<u64>,
        #[serde(skip_serializing_if = "Option::is_none")]
        not_mixed_within_cap: Option<u64>,
    }
    let found = mixing_time(&p, &pi, args.epsilon, cap);
    let outcome = match found {
        Ok(t) => MixingOutcome {
            n: g.n(),
            epsilon: args.epsilon,
            t_mix: Some(t),
            not_mixed_within_cap: None,
        },
        Err(MarkovError::NotMixedWithinCap { cap }) => MixingOutcome {
            n: g.n(),
            epsilon: args.epsilon,
            t_mix: None,
            not_mixed_within_cap: Some(cap),
        },
        Err(e) => return Err(CliError::validation(e.to_string())),
    };
    write_output(&args.out, &to_json_line(&outcome))?;

    if let Some(path) = &args.emit_plot_data {
        let horizon = outcome.t_mix.unwrap_or(cap).min(4096);
        let mut csv = String::from("t,d\n");
        for t in 0..=horizon {
            let d = d_t(&p, &pi, t).map_err(|e| CliError::validation(e.to_string()))?;
            csv.push_str(&format!("{t},{d}\n"));
        }
        std::fs::write(path, csv)?;
    }
    Ok(())
}

fn cmd_lemma_known(args: LemmaKnownArgs) -> Result<(), CliError> {
    let g = args.graph.load()?;
    let algo = args.algo.to_spec()?;
    let seed = resolve_seed(args.seed, None);
    let witness = match args.mode {
        Mode::Exact => lemma_known_check(&g, &algo, args.t, args.u, args.v),
        Mode::Mc => {
            lemma_known_check_sampled(&g, &algo, args.t, args.u, args.v, args.trials, seed)
        }
    }
    .map_err(|e| CliError::validation(e.to_string()))?;
    write_output(&args.out, &to_json_line(&witness))
}

fn cmd_d_half(args: DHalfArgs) -> Result<(), CliError> {
    let g = args.graph.load()?;
    let algo = args.algo.to_spec()?;
    if args.agents < 1 {
        return Err(CliError::validation("--agents must be at least 1"));
    }
    let seed = resolve_seed(args.seed, None);
    let report = floor_d_half_experiment(&g, &algo, args.agents, args.trials.max(1), seed)
        .map_err(|e| CliError::validation(e.to_string()))?;
    write_output(&args.out, &to_json_line(&report))
}

fn cmd_chain_cliques(args: ChainCliquesArgs) -> Result<(), CliError> {
    let algo = args.algo.to_spec()?;
    if !matches!(
        algo,
        AlgorithmSpec::DfsMinId | AlgorithmSpec::RandomWalkHider { .. }
    ) {
        return Err(CliError::validation(
            "chain-cliques supports dfs-min-id and rw-hider",
        ));
    }
    let seed = resolve_seed(args.seed, None);
    let table = chain_cliques_scaling(
        &args.x_list,
        &args.y_list,
        &algo,
        args.members.max(1),
        args.trials.max(1),
        seed,
    )
    .map_err(|e| CliError::validation(e.to_string()))?;
    write_output(&args.out, &table.to_csv())?;
    eprintln!("log-log slope of mean steps vs m: {:.4}", table.log_log_slope());
    Ok(())
}

fn cmd_bipartite_parity(args: BipartiteParityArgs) -> Result<(), CliError> {
    let g = args.graph.load()?;
    let report = bipartite_parity_probe(&g, args.t)
        .map_err(|e| CliError::validation(e.to_string()))?;
    write_output(&args.out, &to_json_line(&report))
}

fn cmd_double_star_trap(args: DoubleStarTrapArgs) -> Result<(), CliError> {
    let spec = GraphFamilySpec::DoubleStar {
        d: args.d,
        p: args.p,
    };
    let g = gen_family(&spec).map_err(|e| CliError::validation(e.to_string()))?;
    let rule: BTreeMap<usize, usize> = [(1, 1), (args.d + 1, args.p)].into_iter().collect();
    let algo = AlgorithmSpec::DeterministicNoMemory { rule: rule.clone() };

    #[derive(Serialize)]
    struct TrapRun {
        start: usize,
        certificate: LoopCertificate,
    }
    #[derive(Serialize)]
    struct TrapReport {
        d: usize,
        p: usize,
        n: usize,
        rule: BTreeMap<usize, usize>,
        runs: Vec<TrapRun>,
    }
    let mut runs = Vec::new();
    for start in g.vertices() {
        match run_multi(&g, &algo, &[start], 0) {
            Err(SimulateError::NonTermination {
                certificate: Some(certificate),
                ..
            }) => runs.push(TrapRun { start, certificate }),
            Err(e) => return Err(CliError::validation(e.to_string())),
            Ok(_) => {
                return Err(CliError::validation(format!(
                    "unexpected termination from start {start}; the trap should loop"
                )))
            }
        }
    }
    let report = TrapReport {
        d: args.d,
        p: args.p,
        n: g.n(),
        rule,
        runs,
    };
    write_output(&args.out, &to_json_line(&report))
}
