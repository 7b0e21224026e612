use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use gwselect::baselines::{Direction, MetricKind, MetricScore};
use gwselect::embed_io::{read_embeddings, sample_pairs, EmbeddingSet, Modality};
use gwselect::error::Error;
use gwselect::gw::{solve_gw, GwConfig, PenaltyKind};
use gwselect::mmspace::{median_scale_match, pairwise_distances, write_dst1};
use gwselect::report::{num, to_json, GwReport};
use gwselect::selection::{
    correlate_with_performance, gw_pair, load_performance, load_pool, load_report, score_pair,
    score_pool, CorrelationStats, ScoreOptions,
};
use gwselect::synthetic::random_pair;
use gwselect::theory::theory_sweep;

const DEFAULT_PAIRS: usize = 1000;
const THREADS_VAR: &str = "GWSELECT_THREADS";

/// Gromov-Wasserstein encoder selection.
#[derive(Debug, Parser)]
#[command(name = "gwselect", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// GW distance between one vision and one text embedding file.
    Gw(GwArgs),
    /// Score one vision/text pair with any metric.
    Score(ScoreArgs),
    /// Score and rank every encoder of a pool manifest.
    Rank(RankArgs),
    /// Correlate a ranking report with measured performance.
    Correlate(CorrelateArgs),
    /// Check the Lipschitz bound on seeded synthetic instances.
    TheoryCheck(TheoryArgs),
    /// Time GW estimation over a range of sample sizes.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
struct SolverArgs {
    /// Frank-Wolfe iteration cap.
    #[arg(long, default_value_t = 1000)]
    iters: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    restarts: usize,
    /// l1 or l2.
    #[arg(long, default_value = "l1")]
    penalty: PenaltyKind,
    /// Relative objective decrease below which a run stops.
    #[arg(long, default_value_t = 1e-9)]
    tolerance: f64,
}

impl SolverArgs {
    fn config(&self) -> Result<GwConfig, Error> {
        let config = GwConfig {
            max_iters: self.iters,
            tolerance: self.tolerance,
            restarts: self.restarts,
            seed: self.seed,
            penalty: self.penalty,
        };
        config.validate()?;
        Ok(config)
    }
}

#[derive(Debug, Args)]
struct PairArgs {
    #[arg(long)]
    vision: PathBuf,
    #[arg(long)]
    text: PathBuf,
    /// Sampled pairs; defaults to 1000 or every row if fewer.
    #[arg(long)]
    pairs: Option<usize>,
}

#[derive(Debug, Args)]
struct GwArgs {
    #[command(flatten)]
    pair: PairArgs,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also dump the coupling as DST1.
    #[arg(long)]
    coupling: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ScoreArgs {
    /// gw, rsa, cca or mutualnn.
    #[arg(long)]
    metric: MetricKind,
    #[command(flatten)]
    pair: PairArgs,
    #[command(flatten)]
    solver: SolverArgs,
    /// Neighbours for mutualnn.
    #[arg(long, default_value_t = 10)]
    k: usize,
    /// Canonical correlations averaged for cca.
    #[arg(long, default_value_t = 10)]
    components: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RankArgs {
    #[arg(long)]
    pool: PathBuf,
    #[arg(long)]
    text: PathBuf,
    #[arg(long, default_value = "gw")]
    metric: MetricKind,
    /// Name recorded in the report; defaults to the text file's source.
    #[arg(long)]
    llm: Option<String>,
    #[arg(long)]
    pairs: Option<usize>,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long, default_value_t = 10)]
    k: usize,
    #[arg(long, default_value_t = 10)]
    components: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CorrelateArgs {
    #[arg(long)]
    scores: PathBuf,
    #[arg(long)]
    performance: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TheoryArgs {
    #[arg(long, default_value_t = 200)]
    instances: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_value = "100,200,500,1000")]
    sizes: Vec<usize>,
    /// Embedding dimension of the synthetic inputs.
    #[arg(long, default_value_t = 64)]
    dim: usize,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct GwRunReport<'a> {
    vision: &'a str,
    text: &'a str,
    pairs: usize,
    seed: u64,
    penalty: PenaltyKind,
    #[serde(serialize_with = "num")]
    scale: f64,
    result: GwReport<'a>,
}

#[derive(Serialize)]
struct ScoreReport<'a> {
    vision: &'a str,
    text: &'a str,
    pairs: usize,
    seed: u64,
    score: MetricScore,
}

#[derive(Serialize)]
struct CorrelationReport<'a> {
    llm_name: &'a str,
    metric: MetricKind,
    direction: Direction,
    encoders: usize,
    stats: CorrelationStats,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    if let Err(code) = configure_threads() {
        return code;
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(Failure::Internal(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn configure_threads() -> Result<(), ExitCode> {
    let Ok(raw) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    match raw.trim().parse::<usize>() {
        Ok(n) => {
            gwselect::exec::init_threads(n);
            Ok(())
        }
        Err(_) => {
            eprintln!("error: {THREADS_VAR} must be a non-negative integer, got `{raw}`");
            Err(ExitCode::from(2))
        }
    }
}

enum Failure {
    Input(Error),
    Internal(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_input_error() {
            Failure::Input(e)
        } else {
            Failure::Internal(e.to_string())
        }
    }
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Gw(args) => run_gw(args),
        Command::Score(args) => run_score(args),
        Command::Rank(args) => run_rank(args),
        Command::Correlate(args) => run_correlate(args),
        Command::TheoryCheck(args) => run_theory(args),
        Command::Bench(args) => run_bench(args),
    }
}

fn emit(out: Option<&Path>, body: &str) -> Result<(), Failure> {
    match out {
        Some(path) => std::fs::write(path, body)
            .map_err(|e| Failure::Internal(format!("writing {}: {e}", path.display()))),
        None => std::io::stdout()
            .lock()
            .write_all(body.as_bytes())
            .map_err(|e| Failure::Internal(format!("writing to stdout: {e}"))),
    }
}

fn json<T: Serialize>(value: &T) -> Result<String, Failure> {
    to_json(value).map_err(|e| Failure::Internal(format!("encoding report: {e}")))
}

/// Loads both files and draws the paired sample. Everything that can fail
/// on bad input fails here, before any distance is computed.
fn load_pair(pair: &PairArgs, seed: u64) -> Result<(EmbeddingSet, EmbeddingSet, usize), Failure> {
    let vision = read_embeddings(&pair.vision)?.with_modality(Modality::Vision);
    let text = read_embeddings(&pair.text)?.with_modality(Modality::Text);
    let count = pair.pairs.unwrap_or(DEFAULT_PAIRS.min(vision.len()));
    let sample = sample_pairs(&vision, &text, count, seed)?;
    Ok((sample.vision, sample.text, count))
}

fn run_gw(args: GwArgs) -> Result<(), Failure> {
    let config = args.solver.config()?;
    let (vision, text, pairs) = load_pair(&args.pair, config.seed)?;
    let outcome = gw_pair(&vision, &text, &config)?;
    if let Some(path) = &args.coupling {
        write_dst1(outcome.solve.coupling.weights(), path)?;
    }
    let report = GwRunReport {
        vision: vision.source(),
        text: text.source(),
        pairs,
        seed: config.seed,
        penalty: config.penalty,
        scale: outcome.scale,
        result: GwReport::from(&outcome.solve),
    };
    emit(args.out.as_deref(), &json(&report)?)
}

fn run_score(args: ScoreArgs) -> Result<(), Failure> {
    if args.metric == MetricKind::AccuracyExternal {
        return Err(Error::Parameter("accuracy_external is only available through `rank`".into()).into());
    }
    let options = ScoreOptions {
        gw: args.solver.config()?,
        pairs: args.pair.pairs,
        neighbors: args.k,
        components: args.components,
    };
    let (vision, text, pairs) = load_pair(&args.pair, options.gw.seed)?;
    let score = score_pair(&vision, &text, args.metric, &options)?;
    let report = ScoreReport {
        vision: vision.source(),
        text: text.source(),
        pairs,
        seed: options.gw.seed,
        score,
    };
    emit(args.out.as_deref(), &json(&report)?)
}

fn run_rank(args: RankArgs) -> Result<(), Failure> {
    let gw = args.solver.config()?;
    let pool = load_pool(&args.pool)?;
    let text = read_embeddings(&args.text)?.with_modality(Modality::Text);
    let options = ScoreOptions {
        gw,
        pairs: Some(args.pairs.unwrap_or(DEFAULT_PAIRS.min(text.len()))),
        neighbors: args.k,
        components: args.components,
    };
    let llm = args.llm.clone().unwrap_or_else(|| text.source().to_owned());
    let report = score_pool(&pool, &text, args.metric, &options, &llm)?;
    emit(args.out.as_deref(), &json(&report)?)
}

fn run_correlate(args: CorrelateArgs) -> Result<(), Failure> {
    let ranking = load_report(&args.scores)?;
    let performance = load_performance(&args.performance)?;
    let stats = correlate_with_performance(&ranking.scores(), &performance)?;
    let report = CorrelationReport {
        llm_name: &ranking.llm_name,
        metric: ranking.metric,
        direction: ranking.direction,
        encoders: ranking.rows.len(),
        stats,
    };
    emit(args.out.as_deref(), &json(&report)?)
}

fn run_theory(args: TheoryArgs) -> Result<(), Failure> {
    let report = theory_sweep(args.instances, args.seed)?;
    emit(args.out.as_deref(), &json(&report)?)?;
    let tight = &report.records[report.tightest];
    eprintln!(
        "{}/{} instances hold; tightest slack {:.3e} (n = {}, noise = {:.3})",
        report.instances - report.violations,
        report.instances,
        tight.slack,
        tight.n,
        tight.noise
    );
    if report.violations > 0 {
        return Err(Failure::Internal(format!(
            "{} instances violate the bound",
            report.violations
        )));
    }
    Ok(())
}

fn run_bench(args: BenchArgs) -> Result<(), Failure> {
    let config = args.solver.config()?;
    if args.sizes.is_empty() || args.sizes.iter().any(|&n| n < 2) {
        return Err(Error::Parameter("--sizes needs values >= 2".into()).into());
    }
    if args.dim == 0 {
        return Err(Error::Parameter("--dim must be positive".into()).into());
    }
    let mut csv = String::from("n,seconds,penalty,iters,distance_seconds,solver_seconds\n");
    for &n in &args.sizes {
        let (vision, text) = random_pair(n, args.dim, config.seed ^ n as u64)?;
        let start = Instant::now();
        let dv = pairwise_distances(&vision)?;
        let dt = pairwise_distances(&text)?;
        let matched = median_scale_match(&dv, &dt)?;
        let distance_seconds = start.elapsed().as_secs_f64();
        let solve_start = Instant::now();
        let result = solve_gw(&matched.scaled, &dt, &config)?;
        let solver_seconds = solve_start.elapsed().as_secs_f64();
        let seconds = start.elapsed().as_secs_f64();
        eprintln!(
            "n = {n}: {seconds:.3} s ({} iterations, value {:.6})",
            result.iterations_run, result.value
        );
        csv.push_str(&format!(
            "{n},{seconds:.6},{},{},{distance_seconds:.6},{solver_seconds:.6}\n",
            config.penalty.short_name(),
            result.iterations_run
        ));
    }
    emit(args.out.as_deref(), &csv)
}
