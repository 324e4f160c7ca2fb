//! Batch command-line surface over the rankfuse library.
//!
//! Exit codes: 0 success, 1 data error (unreadable or invalid input
//! files), 2 usage error (bad or inconsistent flags).

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use rankfuse::fge::{build_schedule, FgeScheduleConfig};
use rankfuse::fusion::{
    compute_weights, estimate_positional_relevance, fuse_average, fuse_map_slidefuse,
    fuse_mapfuse, fuse_rrf, fuse_slidefuse, FusionConfig, FusionMethod, Normalize,
    SystemWeights,
};
use rankfuse::ltr::{rerank, sample_training_groups, train, LtrConfig, LtrModel};
use rankfuse::metrics::evaluate;
use rankfuse::runio::{parse_qrels, parse_run, write_run, Qrels, RunList};
use rankfuse::stats::{paired_exact_test, paired_randomization_test, MetricKind};

#[derive(Parser)]
#[command(name = "rankfuse", version, about = "Fuse, evaluate and compare ranked retrieval runs")]
struct Cli {
    /// Seed for commands that sample (ltr train negatives, compare resampling).
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,

    /// Worker threads; 0 picks one per core.
    #[arg(long, global = true, default_value_t = 0, env = "RANKFUSE_THREADS")]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fuse several runs into one consensus run.
    Fuse(FuseArgs),
    /// Evaluate a run against qrels (MAP, MRR, MRR@k).
    Eval(EvalArgs),
    /// Train or apply the learning-to-rank meta-combiner.
    Ltr {
        #[command(subcommand)]
        command: LtrCommand,
    },
    /// Generate a cyclical learning-rate schedule with checkpoint indices.
    Schedule(ScheduleArgs),
    /// Paired randomization significance test between two runs.
    Compare(CompareArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Avg,
    Rrf,
    Mapfuse,
    Slidefuse,
    Mapslidefuse,
}

impl MethodArg {
    fn method(self) -> FusionMethod {
        match self {
            MethodArg::Avg => FusionMethod::Average,
            MethodArg::Rrf => FusionMethod::Rrf,
            MethodArg::Mapfuse => FusionMethod::MapFuse,
            MethodArg::Slidefuse => FusionMethod::SlideFuse,
            MethodArg::Mapslidefuse => FusionMethod::MapSlideFuse,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum NormalizeArg {
    None,
    Minmax,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    Ap,
    Rr,
    RrAtK,
}

impl MetricArg {
    fn kind(self) -> MetricKind {
        match self {
            MetricArg::Ap => MetricKind::Ap,
            MetricArg::Rr => MetricKind::Rr,
            MetricArg::RrAtK => MetricKind::RrAtK,
        }
    }
}

#[derive(Args)]
struct FuseArgs {
    #[arg(long, value_enum)]
    method: MethodArg,

    /// Run files to fuse, one per system.
    #[arg(long, num_args = 1.., required = true)]
    runs: Vec<PathBuf>,

    /// Held-out qrels used to compute per-system MAP weights
    /// (mapfuse/mapslidefuse).
    #[arg(long)]
    weights_qrels: Option<PathBuf>,

    /// Runs covering the held-out queries, one per fused system.
    #[arg(long, num_args = 1..)]
    weights_runs: Vec<PathBuf>,

    /// Precomputed weights as JSON `{system_id: weight}`; alternative to
    /// --weights-qrels/--weights-runs.
    #[arg(long, conflicts_with_all = ["weights_qrels", "weights_runs"])]
    weights_json: Option<PathBuf>,

    /// Training runs for the positional relevance model
    /// (slidefuse/mapslidefuse).
    #[arg(long, num_args = 1..)]
    train_runs: Vec<PathBuf>,

    /// Qrels for the training runs.
    #[arg(long)]
    train_qrels: Option<PathBuf>,

    /// Rank smoothing constant.
    #[arg(long, default_value_t = 60.0)]
    k: f64,

    /// Sliding-window half width.
    #[arg(long, default_value_t = 6)]
    window: usize,

    /// Fused output depth per query.
    #[arg(long, default_value_t = 1000)]
    depth: usize,

    #[arg(long, value_enum, default_value_t = NormalizeArg::None)]
    normalize: NormalizeArg,

    /// Tag written to the output run; defaults to the method name.
    #[arg(long)]
    tag: Option<String>,

    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    run: PathBuf,
    #[arg(long)]
    qrels: PathBuf,
    #[arg(long, default_value_t = 10)]
    cutoff: usize,
    /// Also print one row per evaluated query.
    #[arg(long)]
    per_query: bool,
    /// Emit a JSON object instead of aligned text.
    #[arg(long)]
    json: bool,
}

#[derive(Subcommand)]
enum LtrCommand {
    /// Sample training triples and fit the boosted model.
    Train(LtrTrainArgs),
    /// Score the union of run documents with a trained model.
    Rerank(LtrRerankArgs),
}

#[derive(Args)]
struct LtrTrainArgs {
    /// All runs: the first stage plus the checkpoint runs.
    #[arg(long, num_args = 1.., required = true)]
    runs: Vec<PathBuf>,
    /// System id of the first-stage run among --runs.
    #[arg(long)]
    first_stage: String,
    #[arg(long)]
    qrels: PathBuf,
    /// Where to write the model JSON.
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = 100)]
    rounds: usize,
    #[arg(long, default_value_t = 6)]
    max_depth: usize,
    #[arg(long, default_value_t = 0.3)]
    eta: f64,
    /// Non-relevant docs sampled per query.
    #[arg(long, default_value_t = 2)]
    negatives: usize,
}

#[derive(Args)]
struct LtrRerankArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, num_args = 1.., required = true)]
    runs: Vec<PathBuf>,
    #[arg(long)]
    first_stage: String,
    /// Tag written to the output run.
    #[arg(long, default_value = "ltr")]
    tag: String,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct ScheduleArgs {
    /// Cycle-endpoint learning rate.
    #[arg(long)]
    alpha1: f64,
    /// Mid-cycle learning rate (checkpoint value).
    #[arg(long)]
    alpha2: f64,
    /// Cycle length; must be even after applying --iters-per-epoch.
    #[arg(long)]
    cycle_iters: u64,
    #[arg(long)]
    total_iters: u64,
    /// Multiplier converting epoch-denominated --cycle-iters/--total-iters
    /// into iterations.
    #[arg(long, default_value_t = 1)]
    iters_per_epoch: u64,
    #[arg(long, value_enum, default_value_t = FormatArg::Json)]
    format: FormatArg,
    /// Write here instead of stdout.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    run_a: PathBuf,
    #[arg(long)]
    run_b: PathBuf,
    #[arg(long)]
    qrels: PathBuf,
    #[arg(long, value_enum)]
    metric: MetricArg,
    /// Cutoff for the rr-at-k metric.
    #[arg(long, default_value_t = 10)]
    cutoff: usize,
    /// Monte-Carlo resamples.
    #[arg(long, default_value_t = 10_000)]
    iters: usize,
    /// Enumerate all sign patterns exactly (up to 20 common queries).
    #[arg(long)]
    exact: bool,
    #[arg(long)]
    json: bool,
}

enum CliError {
    /// Inconsistent or missing flags: exit 2.
    Usage(String),
    /// Unreadable or invalid data: exit 1.
    Data(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for CliError {
    fn from(err: E) -> Self {
        CliError::Data(err.into())
    }
}

fn usage(message: impl Into<String>) -> CliError {
    CliError::Usage(message.into())
}

fn load_run(path: &Path) -> anyhow::Result<RunList> {
    let file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let run = parse_run(std::io::BufReader::new(file))
        .with_context(|| format!("parsing run file {}", path.display()))?;
    Ok(run.canonicalize())
}

fn load_runs(paths: &[PathBuf]) -> anyhow::Result<Vec<RunList>> {
    paths.par_iter().map(|p| load_run(p)).collect()
}

fn load_qrels(path: &Path) -> anyhow::Result<Qrels> {
    let file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    parse_qrels(std::io::BufReader::new(file))
        .with_context(|| format!("parsing qrels file {}", path.display()))
}

/// Write via a temp file in the destination directory plus rename.
fn write_atomic(path: &Path, contents: &str) -> anyhow::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let mut tmp = tempfile::NamedTempFile::new_in(dir.unwrap_or(Path::new(".")))
        .with_context(|| format!("creating temp file near {}", path.display()))?;
    tmp.write_all(contents.as_bytes())?;
    tmp.persist(path)
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn cmd_fuse(args: &FuseArgs) -> Result<(), CliError> {
    let method = args.method.method();
    let needs_weights = matches!(method, FusionMethod::MapFuse | FusionMethod::MapSlideFuse);
    let needs_model = matches!(method, FusionMethod::SlideFuse | FusionMethod::MapSlideFuse);
    if needs_weights
        && args.weights_json.is_none()
        && (args.weights_qrels.is_none() || args.weights_runs.is_empty())
    {
        return Err(usage(format!(
            "--method {} requires --weights-qrels and --weights-runs (or --weights-json)",
            method.label()
        )));
    }
    if needs_model && (args.train_runs.is_empty() || args.train_qrels.is_none()) {
        return Err(usage(format!(
            "--method {} requires --train-runs and --train-qrels",
            method.label()
        )));
    }

    let cfg = FusionConfig {
        method,
        k: args.k,
        window: args.window,
        output_depth: args.depth,
        normalize: match args.normalize {
            NormalizeArg::None => Normalize::None,
            NormalizeArg::Minmax => Normalize::MinMax,
        },
    };
    let runs = load_runs(&args.runs)?;

    let weights = if needs_weights {
        Some(match &args.weights_json {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .with_context(|| format!("reading {}", path.display()))?;
                serde_json::from_str::<SystemWeights>(&text)
                    .with_context(|| format!("parsing weights {}", path.display()))?
                    .validated()
                    .map_err(anyhow::Error::from)?
            }
            None => {
                let heldout = load_qrels(args.weights_qrels.as_ref().expect("validated above"))?;
                let weight_runs = load_runs(&args.weights_runs)?;
                compute_weights(&weight_runs, &heldout).map_err(anyhow::Error::from)?
            }
        })
    } else {
        None
    };

    let model = if needs_model {
        let training_runs = load_runs(&args.train_runs)?;
        let training_qrels = load_qrels(args.train_qrels.as_ref().expect("validated above"))?;
        Some(
            estimate_positional_relevance(&training_runs, &training_qrels)
                .map_err(anyhow::Error::from)?,
        )
    } else {
        None
    };

    let fused = match method {
        FusionMethod::Average => fuse_average(&runs, &cfg),
        FusionMethod::Rrf => fuse_rrf(&runs, &cfg),
        FusionMethod::MapFuse => fuse_mapfuse(&runs, weights.as_ref().expect("loaded above"), &cfg),
        FusionMethod::SlideFuse => {
            fuse_slidefuse(&runs, model.as_ref().expect("loaded above"), &cfg)
        }
        FusionMethod::MapSlideFuse => fuse_map_slidefuse(
            &runs,
            model.as_ref().expect("loaded above"),
            weights.as_ref().expect("loaded above"),
            &cfg,
        ),
    }
    .map_err(anyhow::Error::from)?;

    let tag = args.tag.clone().unwrap_or_else(|| method.label().to_string());
    write_atomic(&args.output, &write_run(&fused, &tag))?;
    Ok(())
}

fn cmd_eval(args: &EvalArgs) -> Result<(), CliError> {
    let run = load_run(&args.run)?;
    let qrels = load_qrels(&args.qrels)?;
    let report = evaluate(&run, &qrels, args.cutoff).map_err(anyhow::Error::from)?;
    if args.json {
        #[derive(serde::Serialize)]
        struct JsonReport<'a> {
            map: f64,
            mrr: f64,
            mrr_at_k: f64,
            cutoff: usize,
            queries: usize,
            #[serde(skip_serializing_if = "Option::is_none")]
            per_query:
                Option<&'a std::collections::BTreeMap<String, rankfuse::metrics::QueryMetrics>>,
        }
        let payload = JsonReport {
            map: report.map_score,
            mrr: report.mrr,
            mrr_at_k: report.mrr_at_k,
            cutoff: report.cutoff,
            queries: report.per_query.len(),
            per_query: args.per_query.then_some(&report.per_query),
        };
        println!(
            "{}",
            serde_json::to_string_pretty(&payload).map_err(anyhow::Error::from)?
        );
    } else {
        let label = format!("MRR@{}", report.cutoff);
        println!("MAP     {:.4}", report.map_score);
        println!("MRR     {:.4}", report.mrr);
        println!("{label:<7} {:.4}", report.mrr_at_k);
        if args.per_query {
            println!();
            println!("{:<20} {:>8} {:>8} {:>8}", "query", "ap", "rr", "rr@k");
            for (query_id, m) in &report.per_query {
                println!(
                    "{query_id:<20} {:>8.4} {:>8.4} {:>8.4}",
                    m.ap, m.rr, m.rr_at_k
                );
            }
        }
    }
    Ok(())
}

fn cmd_ltr_train(args: &LtrTrainArgs, seed: u64) -> Result<(), CliError> {
    let runs = load_runs(&args.runs)?;
    let qrels = load_qrels(&args.qrels)?;
    let (groups, report) =
        sample_training_groups(&runs, &args.first_stage, &qrels, args.negatives, seed)
            .map_err(anyhow::Error::from)?;
    let cfg = LtrConfig {
        rounds: args.rounds,
        max_depth: args.max_depth,
        eta: args.eta,
        seed,
        ..LtrConfig::default()
    };
    let model = train(&groups, &cfg).map_err(anyhow::Error::from)?;
    write_atomic(&args.model, &model.to_json().map_err(anyhow::Error::from)?)?;
    eprintln!(
        "trained {} trees on {} groups ({} queries skipped)",
        model.trees.len(),
        report.sampled_queries,
        report.skipped_no_relevant.len() + report.skipped_no_negatives.len(),
    );
    Ok(())
}

fn cmd_ltr_rerank(args: &LtrRerankArgs) -> Result<(), CliError> {
    let text = fs::read_to_string(&args.model)
        .with_context(|| format!("reading {}", args.model.display()))?;
    let model = LtrModel::from_json(&text)
        .with_context(|| format!("parsing model {}", args.model.display()))?;
    let runs = load_runs(&args.runs)?;
    let reranked = rerank(&model, &runs, &args.first_stage).map_err(anyhow::Error::from)?;
    write_atomic(&args.output, &write_run(&reranked, &args.tag))?;
    Ok(())
}

fn cmd_schedule(args: &ScheduleArgs) -> Result<(), CliError> {
    if args.iters_per_epoch == 0 {
        return Err(usage("--iters-per-epoch must be >= 1"));
    }
    let cfg = FgeScheduleConfig::new(
        args.alpha1,
        args.alpha2,
        args.cycle_iters.saturating_mul(args.iters_per_epoch),
        args.total_iters.saturating_mul(args.iters_per_epoch),
    )
    .map_err(|e| usage(e.to_string()))?;
    let schedule = build_schedule(&cfg);

    let rendered = match args.format {
        FormatArg::Json => {
            let mut text = serde_json::to_string_pretty(&schedule).map_err(anyhow::Error::from)?;
            text.push('\n');
            text
        }
        FormatArg::Csv => {
            let mut text = String::from("iteration,rate\n");
            for (i, rate) in schedule.rates.iter().enumerate() {
                let _ = writeln!(text, "{},{}", i + 1, rate);
            }
            text
        }
    };
    match &args.output {
        Some(path) => write_atomic(path, &rendered)?,
        None => print!("{rendered}"),
    }
    let checkpoints: Vec<String> = schedule.checkpoints.iter().map(u64::to_string).collect();
    eprintln!("checkpoints: [{}]", checkpoints.join(", "));
    Ok(())
}

fn cmd_compare(args: &CompareArgs, seed: u64) -> Result<(), CliError> {
    let run_a = load_run(&args.run_a)?;
    let run_b = load_run(&args.run_b)?;
    let qrels = load_qrels(&args.qrels)?;
    let metric = args.metric.kind();
    let result = if args.exact {
        paired_exact_test(&run_a, &run_b, &qrels, metric, args.cutoff)
    } else {
        paired_randomization_test(&run_a, &run_b, &qrels, metric, args.cutoff, args.iters, seed)
    }
    .map_err(anyhow::Error::from)?;
    if args.json {
        println!(
            "{}",
            serde_json::to_string_pretty(&result).map_err(anyhow::Error::from)?
        );
    } else {
        println!("{result}");
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Fuse(args) => cmd_fuse(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Ltr { command } => match command {
            LtrCommand::Train(args) => cmd_ltr_train(args, cli.seed),
            LtrCommand::Rerank(args) => cmd_ltr_rerank(args),
        },
        Command::Schedule(args) => cmd_schedule(args),
        Command::Compare(args) => cmd_compare(args, cli.seed),
    }
}

fn main() -> ExitCode {
    // Die quietly when a downstream pipe (head, less) closes early instead
    // of panicking on the next print.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = Cli::parse();
    if cli.threads > 0 {
        // The global pool can only be set once; later attempts are no-ops.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global();
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
        Err(CliError::Data(err)) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}
