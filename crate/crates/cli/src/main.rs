//! Command-line front end: benchmark ingestion, search runs, ablation
//! grids, and the ranking proof-of-concept.
//!
//! Every run writes a self-describing output directory: a manifest (config
//! snapshot, benchmark digest, backend identity, seed list) recorded before
//! the first evaluation, plus per-seed results, trajectories, learning
//! curves, and full chat transcripts. Transcripts replay byte-identically
//! through `--backend scripted:<transcript>`.
//!
//! Exit codes: 0 success, 1 configuration error, 2 data error, 3 backend
//! error.

use archsearch::archspace::SearchSpace;
use archsearch::backend::http::HttpBackend;
use archsearch::backend::oracle::{OracleBackend, OracleMode};
use archsearch::backend::scripted::ScriptedBackend;
use archsearch::backend::{ChatBackend, LoggingBackend, RunLog, SamplingParams};
use archsearch::baselines::{evolutionary_search, random_search, rl_search, EaConfig, RlConfig};
use archsearch::bench::{BenchTable, Dataset, DatasetId, Split};
use archsearch::collm::prompts::PromptSet;
use archsearch::collm::{collm_search, sillm_search, CandidatesPolicy, CollmConfig, MemoryPolicy};
use archsearch::ranking::{run_poc, write_poc_csv, PocConfig};
use archsearch::search::{
    summarize, write_curve_csv, write_trajectory_csv, write_trajectory_jsonl, BenchEvaluator,
    Constraint, Evaluator, SearchConfig, SearchResult,
};
use archsearch::synthetic::{synthetic_table, SurrogateEvaluator};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

#[derive(Debug)]
enum CliError {
    Config(String),
    Data(String),
    Backend(String),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Data(_) => 2,
            CliError::Backend(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Data(m) | CliError::Backend(m) => m,
        }
    }
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn data_err(msg: impl Into<String>) -> CliError {
    CliError::Data(msg.into())
}

fn search_err(e: archsearch::search::SearchError) -> CliError {
    use archsearch::search::SearchError;
    match e {
        SearchError::Config(_) => config_err(e.to_string()),
        SearchError::Eval(_) | SearchError::BudgetExhausted => data_err(e.to_string()),
    }
}

#[derive(Parser)]
#[command(
    name = "archsearch",
    version,
    about = "Architecture search over tabular benchmarks with collaborative-LLM and conventional methods"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a benchmark file and optionally re-emit it in canonical form.
    Ingest {
        /// Benchmark JSONL file to read.
        #[arg(long)]
        input: PathBuf,
        /// Where to write the validated table (omit to only validate).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Accept tables that do not cover the whole cell space.
        #[arg(long)]
        allow_partial: bool,
    },
    /// Generate a deterministic synthetic benchmark table.
    Synth {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a search method across seeds and summarize the results.
    Search(Box<SearchOpts>),
    /// Run an ablation grid (memory retention or sampling temperature).
    Ablate(Box<AblateOpts>),
    /// Run the ranking proof-of-concept trials.
    Poc(Box<PocOpts>),
}

#[derive(Args, Debug, Clone)]
struct DataOpts {
    /// Search space: nb201, mobilenet, shufflenet, autoformer-{tiny,small,base}.
    #[arg(long, default_value = "nb201")]
    space: String,
    /// Benchmark table (JSONL). Required for nb201 unless --synth-bench is set.
    #[arg(long)]
    bench: Option<PathBuf>,
    /// Use a generated synthetic table with this seed instead of --bench.
    #[arg(long)]
    synth_bench: Option<u64>,
    /// Dataset for table lookups: cifar10, cifar100, imagenet16-120.
    #[arg(long, default_value = "cifar10")]
    dataset: String,
    /// Split for table lookups: valid or test.
    #[arg(long, default_value = "test")]
    split: String,
    /// Seed of the surrogate landscape used for macro spaces.
    #[arg(long, default_value_t = 0)]
    surrogate_seed: u64,
}

#[derive(Args, Debug, Clone)]
struct BackendOpts {
    /// Chat backend: remote | scripted:<transcript.jsonl> | oracle:<mode>
    /// (modes: random, greedy-hill-climb, epsilon-greedy[:eps]).
    #[arg(long)]
    backend: Option<String>,
    /// Optional TOML file with HTTP timeout/retry/delimiter settings.
    #[arg(long)]
    http_config: Option<PathBuf>,
    /// Sampling temperature for both roles.
    #[arg(long, default_value_t = 0.6)]
    temperature: f64,
    /// Navigator keeps its conversation across iterations.
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    nav_memory: bool,
    /// Generator keeps its conversation across iterations.
    #[arg(long, default_value_t = false, action = clap::ArgAction::Set)]
    gen_memory: bool,
    /// Directory of prompt template overrides.
    #[arg(long)]
    prompts: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
struct SearchOpts {
    /// Search method: rs, rl, ea, collm, sillm.
    #[arg(long)]
    method: String,
    #[command(flatten)]
    data: DataOpts,
    #[command(flatten)]
    backend: BackendOpts,
    /// Evaluation budget (distinct architectures evaluated).
    #[arg(long, default_value_t = 100)]
    budget: usize,
    /// Iteration limit (defaults: collm/sillm 20, ea 10).
    #[arg(long)]
    iters: Option<usize>,
    /// Number of seeds to run.
    #[arg(long, default_value_t = 1)]
    seeds: u64,
    /// First seed value.
    #[arg(long, default_value_t = 0)]
    seed_base: u64,
    /// Cost constraint, e.g. flops:600 or params:12 (mega-units).
    #[arg(long, default_value = "none")]
    constraint: String,
    /// Stop a run as soon as this accuracy is reached.
    #[arg(long)]
    target: Option<f64>,
    /// Parallel seed workers.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// EA population size.
    #[arg(long, default_value_t = 10)]
    population: usize,
    /// RL learning rate.
    #[arg(long, default_value_t = 0.01)]
    learning_rate: f64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Clone)]
struct AblateOpts {
    /// Grid kind: memory or temperature.
    #[arg(long)]
    kind: String,
    /// Method to ablate: collm or sillm.
    #[arg(long, default_value = "collm")]
    method: String,
    /// Comma-separated temperature grid (temperature kind only).
    #[arg(long, default_value = "0.0,0.2,0.4,0.6,0.8,1.0")]
    grid: String,
    #[command(flatten)]
    data: DataOpts,
    #[command(flatten)]
    backend: BackendOpts,
    #[arg(long, default_value_t = 100)]
    budget: usize,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long, default_value_t = 1)]
    seeds: u64,
    #[arg(long, default_value_t = 0)]
    seed_base: u64,
    #[arg(long, default_value = "none")]
    constraint: String,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Clone)]
struct PocOpts {
    #[command(flatten)]
    data: DataOpts,
    #[command(flatten)]
    backend: BackendOpts,
    /// Number of ranking trials.
    #[arg(long, default_value_t = 40)]
    trials: usize,
    /// Architectures per trial.
    #[arg(long, default_value_t = 10)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed_base: u64,
    /// Comma-separated temperature list, cycled across trials.
    #[arg(long, default_value = "0.6")]
    temperatures: String,
    #[arg(long)]
    out: PathBuf,
}

/// Config snapshot written to `manifest.json` before the first evaluation.
#[derive(Serialize)]
struct RunManifest {
    tool: &'static str,
    version: &'static str,
    command: String,
    space: String,
    dataset: Option<String>,
    bench_digest: Option<String>,
    backend: Option<String>,
    seeds: Vec<u64>,
    out_dir: String,
    config: serde_json::Value,
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            // bad arguments are configuration errors
            eprint!("{e}");
            std::process::exit(1);
        }
        Err(e) => {
            // --help / --version
            print!("{e}");
            std::process::exit(0);
        }
    };
    if let Err(e) = run(cli) {
        eprintln!("error: {}", e.message());
        std::process::exit(e.exit_code());
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Ingest {
            input,
            out,
            allow_partial,
        } => cmd_ingest(&input, out.as_deref(), allow_partial),
        Command::Synth { seed, out } => cmd_synth(seed, &out),
        Command::Search(opts) => cmd_search(&opts),
        Command::Ablate(opts) => cmd_ablate(&opts),
        Command::Poc(opts) => cmd_poc(&opts),
    }
}

fn cmd_ingest(input: &Path, out: Option<&Path>, allow_partial: bool) -> Result<(), CliError> {
    let table = if allow_partial {
        BenchTable::load_partial(input)
    } else {
        BenchTable::load(input)
    }
    .map_err(|e| data_err(format!("{}: {e}", input.display())))?;
    if let Some(out) = out {
        let file = std::fs::File::create(out)
            .map_err(|e| data_err(format!("{}: {e}", out.display())))?;
        table
            .write_jsonl(std::io::BufWriter::new(file))
            .map_err(|e| data_err(e.to_string()))?;
    }
    println!("{} entries, digest {:016x}", table.len(), table.digest());
    Ok(())
}

fn cmd_synth(seed: u64, out: &Path) -> Result<(), CliError> {
    let table = synthetic_table(seed);
    let file =
        std::fs::File::create(out).map_err(|e| data_err(format!("{}: {e}", out.display())))?;
    table
        .write_jsonl(std::io::BufWriter::new(file))
        .map_err(|e| data_err(e.to_string()))?;
    println!("{} entries, digest {:016x}", table.len(), table.digest());
    Ok(())
}

/// Resolved evaluation context shared by search/ablate/poc.
struct EvalContext {
    space: SearchSpace,
    table: Option<Arc<BenchTable>>,
    dataset: DatasetId,
    surrogate_seed: u64,
}

impl EvalContext {
    fn resolve(data: &DataOpts) -> Result<Self, CliError> {
        let space: SearchSpace = data
            .space
            .parse()
            .map_err(|e: archsearch::archspace::UnknownSpace| config_err(e.to_string()))?;
        let dataset: Dataset = data.dataset.parse().map_err(config_err)?;
        let split: Split = data.split.parse().map_err(config_err)?;
        let dataset = DatasetId::new(dataset, split);
        let table = match (&space, &data.bench, data.synth_bench) {
            (SearchSpace::Nb201, Some(_), Some(_)) => {
                return Err(config_err("--bench and --synth-bench are mutually exclusive"));
            }
            (SearchSpace::Nb201, Some(path), None) => Some(Arc::new(
                BenchTable::load(path).map_err(|e| data_err(format!("{}: {e}", path.display())))?,
            )),
            (SearchSpace::Nb201, None, Some(seed)) => Some(Arc::new(synthetic_table(seed))),
            (SearchSpace::Nb201, None, None) => {
                return Err(config_err(
                    "the nb201 space needs --bench <table.jsonl> or --synth-bench <seed>",
                ));
            }
            (SearchSpace::Macro(_), Some(_), _) | (SearchSpace::Macro(_), _, Some(_)) => {
                return Err(config_err(
                    "macro spaces use the surrogate evaluator; --bench/--synth-bench do not apply",
                ));
            }
            (SearchSpace::Macro(_), None, None) => None,
        };
        Ok(EvalContext {
            space,
            table,
            dataset,
            surrogate_seed: data.surrogate_seed,
        })
    }

    fn evaluator(&self) -> Box<dyn Evaluator + Send + Sync> {
        match &self.table {
            Some(table) => Box::new(BenchEvaluator::new(Arc::clone(table), self.dataset)),
            None => Box::new(SurrogateEvaluator::new(self.space, self.surrogate_seed)),
        }
    }

    fn is_surrogate(&self) -> bool {
        self.table.is_none()
    }
}

/// How to build a fresh backend for one seed.
#[derive(Debug, Clone)]
enum BackendSpec {
    Remote { config: Option<PathBuf> },
    Scripted(PathBuf),
    Oracle(OracleMode),
}

impl BackendSpec {
    fn parse(opts: &BackendOpts) -> Result<Option<Self>, CliError> {
        let Some(text) = &opts.backend else {
            return Ok(None);
        };
        let spec = if text == "remote" {
            BackendSpec::Remote {
                config: opts.http_config.clone(),
            }
        } else if let Some(path) = text.strip_prefix("scripted:") {
            BackendSpec::Scripted(PathBuf::from(path))
        } else if let Some(mode) = text.strip_prefix("oracle:") {
            BackendSpec::Oracle(mode.parse().map_err(config_err)?)
        } else {
            return Err(config_err(format!(
                "unknown backend {text:?} (expected remote, scripted:<path>, or oracle:<mode>)"
            )));
        };
        Ok(Some(spec))
    }

    fn build(&self, seed: u64, ctx: &EvalContext) -> Result<Box<dyn ChatBackend>, CliError> {
        match self {
            BackendSpec::Remote { config } => {
                let backend = HttpBackend::from_env(config.as_deref())
                    .map_err(|e| config_err(e.to_string()))?;
                Ok(Box::new(backend))
            }
            BackendSpec::Scripted(path) => {
                let backend = ScriptedBackend::from_run_log(path)
                    .map_err(|e| CliError::Backend(format!("{}: {e}", path.display())))?;
                Ok(Box::new(backend))
            }
            BackendSpec::Oracle(mode) => {
                let table = ctx.table.as_ref().ok_or_else(|| {
                    config_err("the oracle backend needs a benchmark table (nb201 space)")
                })?;
                Ok(Box::new(OracleBackend::new(
                    Arc::clone(table),
                    ctx.dataset,
                    *mode,
                    seed,
                )))
            }
        }
    }

    fn describe(&self) -> String {
        match self {
            BackendSpec::Remote { .. } => "remote".to_string(),
            BackendSpec::Scripted(path) => format!("scripted:{}", path.display()),
            BackendSpec::Oracle(mode) => format!("oracle:{mode:?}"),
        }
    }
}

fn load_prompts(opts: &BackendOpts) -> Result<PromptSet, CliError> {
    match &opts.prompts {
        Some(dir) => PromptSet::from_dir(dir).map_err(|e| data_err(format!("{}: {e}", dir.display()))),
        None => Ok(PromptSet::builtin()),
    }
}

fn collm_config(
    search: SearchConfig,
    backend: &BackendOpts,
    sillm: bool,
    nav_temperature: f64,
    gen_temperature: f64,
) -> CollmConfig {
    let params = |temperature| SamplingParams {
        temperature,
        ..SamplingParams::default()
    };
    CollmConfig {
        search,
        memory: MemoryPolicy {
            navigator_retains: backend.nav_memory,
            generator_retains: backend.gen_memory,
        },
        candidates: CandidatesPolicy::default(),
        sillm,
        navigator_params: params(nav_temperature),
        generator_params: params(gen_temperature),
        max_history_entries: 10,
    }
}

struct SeedRun {
    seed: u64,
    result: SearchResult,
}

/// Everything one seed run needs besides its seed. Shared read-only across
/// worker threads.
struct RunPlan<'a> {
    method: &'a str,
    ctx: &'a EvalContext,
    evaluator: &'a (dyn Evaluator + Send + Sync),
    backend_spec: Option<&'a BackendSpec>,
    prompts: &'a PromptSet,
    base_config: &'a SearchConfig,
    backend_opts: &'a BackendOpts,
    ea: EaConfig,
    rl: RlConfig,
    out: &'a Path,
    /// `(navigator, generator)` override used by the temperature grid.
    temperatures: Option<(f64, f64)>,
}

/// Run one method over a list of seeds, writing per-seed artifacts under
/// `out/seed_<n>/`. Seeds are distributed round-robin over `workers`.
fn run_seeds(plan: &RunPlan, seeds: &[u64], workers: usize) -> Result<Vec<SeedRun>, CliError> {
    let workers = workers.clamp(1, seeds.len().max(1));
    let slots: Mutex<Vec<Option<Result<SeedRun, CliError>>>> =
        Mutex::new((0..seeds.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for worker in 0..workers {
            let slots = &slots;
            let assigned: Vec<(usize, u64)> = seeds
                .iter()
                .copied()
                .enumerate()
                .filter(|(i, _)| i % workers == worker)
                .collect();
            scope.spawn(move || {
                for (index, seed) in assigned {
                    let outcome = run_one_seed(plan, seed);
                    slots.lock().expect("no poisoned slots")[index] = Some(outcome);
                }
            });
        }
    });
    slots
        .into_inner()
        .expect("all workers joined")
        .into_iter()
        .map(|slot| slot.expect("every seed produced an outcome"))
        .collect()
}

fn run_one_seed(plan: &RunPlan, seed: u64) -> Result<SeedRun, CliError> {
    let seed_dir = plan.out.join(format!("seed_{seed}"));
    std::fs::create_dir_all(&seed_dir)
        .map_err(|e| data_err(format!("{}: {e}", seed_dir.display())))?;
    let config = SearchConfig {
        seed,
        ..plan.base_config.clone()
    };
    let result = match plan.method {
        "rs" => random_search(&plan.ctx.space, plan.evaluator, &config),
        "ea" => evolutionary_search(&plan.ctx.space, plan.evaluator, &config, &plan.ea),
        "rl" => rl_search(&plan.ctx.space, plan.evaluator, &config, &plan.rl),
        "collm" | "sillm" => {
            let spec = plan
                .backend_spec
                .ok_or_else(|| config_err("methods collm/sillm need --backend"))?;
            let inner = spec.build(seed, plan.ctx)?;
            let log = RunLog::to_file(&seed_dir.join("transcript.jsonl"))
                .map_err(|e| data_err(e.to_string()))?;
            let mut backend = LoggingBackend::new(inner, log);
            let (nav_t, gen_t) = plan
                .temperatures
                .unwrap_or((plan.backend_opts.temperature, plan.backend_opts.temperature));
            let cfg = collm_config(
                config,
                plan.backend_opts,
                plan.method == "sillm",
                nav_t,
                gen_t,
            );
            if plan.method == "sillm" {
                sillm_search(&plan.ctx.space, plan.evaluator, &mut backend, plan.prompts, &cfg)
            } else {
                collm_search(&plan.ctx.space, plan.evaluator, &mut backend, plan.prompts, &cfg)
            }
        }
        other => return Err(config_err(format!("unknown method {other:?}"))),
    }
    .map_err(search_err)?;

    write_seed_artifacts(&seed_dir, &result)?;
    Ok(SeedRun { seed, result })
}

fn write_seed_artifacts(seed_dir: &Path, result: &SearchResult) -> Result<(), CliError> {
    let io = |e: std::io::Error| data_err(format!("{}: {e}", seed_dir.display()));
    let json = serde_json::to_string_pretty(result).expect("results serialize");
    std::fs::write(seed_dir.join("result.json"), json + "\n").map_err(io)?;
    let file = std::fs::File::create(seed_dir.join("trajectory.jsonl")).map_err(io)?;
    write_trajectory_jsonl(result, std::io::BufWriter::new(file)).map_err(io)?;
    let file = std::fs::File::create(seed_dir.join("trajectory.csv")).map_err(io)?;
    write_trajectory_csv(result, std::io::BufWriter::new(file))
        .map_err(|e| data_err(e.to_string()))?;
    let file = std::fs::File::create(seed_dir.join("curve.csv")).map_err(io)?;
    write_curve_csv(result, std::io::BufWriter::new(file))
        .map_err(|e| data_err(e.to_string()))?;
    Ok(())
}

fn write_manifest(
    out: &Path,
    command: &str,
    ctx: &EvalContext,
    backend: Option<&BackendSpec>,
    seeds: &[u64],
    config: serde_json::Value,
) -> Result<(), CliError> {
    std::fs::create_dir_all(out).map_err(|e| data_err(format!("{}: {e}", out.display())))?;
    let manifest = RunManifest {
        tool: "archsearch",
        version: env!("CARGO_PKG_VERSION"),
        command: command.to_string(),
        space: ctx.space.name(),
        dataset: ctx.table.as_ref().map(|_| ctx.dataset.to_string()),
        bench_digest: ctx
            .table
            .as_ref()
            .map(|t| format!("{:016x}", t.digest())),
        backend: backend.map(|b| b.describe()),
        seeds: seeds.to_vec(),
        out_dir: out.display().to_string(),
        config,
    };
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(out.join("manifest.json"), json + "\n")
        .map_err(|e| data_err(format!("{}: {e}", out.display())))?;
    Ok(())
}

/// Accuracies of a result's best architecture on both splits of the run's
/// dataset, for the summary table.
fn split_accuracies(ctx: &EvalContext, result: &SearchResult) -> Option<(f64, f64)> {
    let table = ctx.table.as_ref()?;
    let best = result.best_arch.as_deref()?;
    let arch = match ctx.space.parse_arch(best).ok()? {
        archsearch::archspace::Arch::Nb201(a) => a,
        archsearch::archspace::Arch::Macro(_) => return None,
    };
    let record = table.record(&arch).ok()?;
    let dataset = ctx.dataset.dataset;
    Some((
        record.get(DatasetId::new(dataset, Split::Valid)),
        record.get(DatasetId::new(dataset, Split::Test)),
    ))
}

fn fmt_stats(values: &[f64]) -> String {
    match summarize(values) {
        Some(stats) => format!("{:.2} ± {:.2}", stats.mean, stats.std),
        None => "n/a".to_string(),
    }
}

fn cmd_search(opts: &SearchOpts) -> Result<(), CliError> {
    let ctx = EvalContext::resolve(&opts.data)?;
    let backend_spec = BackendSpec::parse(&opts.backend)?;
    let method = opts.method.as_str();
    if matches!(method, "collm" | "sillm") && backend_spec.is_none() {
        return Err(config_err("methods collm/sillm need --backend"));
    }
    let prompts = load_prompts(&opts.backend)?;
    let constraint: Constraint = opts.constraint.parse().map_err(config_err)?;
    let iteration_limit = opts.iters.unwrap_or(match method {
        "ea" => 10,
        _ => 20,
    });
    let base_config = SearchConfig {
        arch_budget: opts.budget,
        iteration_limit,
        target: opts.target,
        constraint,
        seed: 0,
    };
    base_config.validate().map_err(|e| config_err(e.to_string()))?;
    let seeds: Vec<u64> = (opts.seed_base..opts.seed_base + opts.seeds).collect();
    if seeds.is_empty() {
        return Err(config_err("--seeds must be at least 1"));
    }
    write_manifest(
        &opts.out,
        "search",
        &ctx,
        backend_spec.as_ref(),
        &seeds,
        serde_json::json!({
            "method": method,
            "budget": opts.budget,
            "iters": iteration_limit,
            "constraint": opts.constraint,
            "target": opts.target,
            "nav_memory": opts.backend.nav_memory,
            "gen_memory": opts.backend.gen_memory,
            "temperature": opts.backend.temperature,
            "population": opts.population,
            "learning_rate": opts.learning_rate,
        }),
    )?;

    let evaluator = ctx.evaluator();
    let plan = RunPlan {
        method,
        ctx: &ctx,
        evaluator: evaluator.as_ref(),
        backend_spec: backend_spec.as_ref(),
        prompts: &prompts,
        base_config: &base_config,
        backend_opts: &opts.backend,
        ea: EaConfig {
            population: opts.population,
            iterations: iteration_limit,
            ..EaConfig::default()
        },
        rl: RlConfig {
            learning_rate: opts.learning_rate,
            ..RlConfig::default()
        },
        out: &opts.out,
        temperatures: None,
    };
    let runs = run_seeds(&plan, &seeds, opts.workers)?;

    write_search_summary(&opts.out, &ctx, method, &runs)?;

    let partial = runs.iter().filter(|r| r.result.partial).count();
    if partial == runs.len() {
        return Err(CliError::Backend(format!(
            "all {partial} runs aborted early; see abort_reason in the result files"
        )));
    }
    if partial > 0 {
        eprintln!("warning: {partial}/{} runs are partial", runs.len());
    }
    Ok(())
}

fn write_search_summary(
    out: &Path,
    ctx: &EvalContext,
    method: &str,
    runs: &[SeedRun],
) -> Result<(), CliError> {
    let file = std::fs::File::create(out.join("summary.csv"))
        .map_err(|e| data_err(format!("{}: {e}", out.display())))?;
    let mut writer = csv::Writer::from_writer(std::io::BufWriter::new(file));
    writer
        .write_record([
            "seed",
            "best_arch",
            "search_accuracy",
            "valid_accuracy",
            "test_accuracy",
            "evaluations",
            "iterations",
            "partial",
        ])
        .map_err(|e| data_err(e.to_string()))?;
    let mut search_accs = Vec::new();
    let mut valid_accs = Vec::new();
    let mut test_accs = Vec::new();
    for run in runs {
        let result = &run.result;
        let splits = split_accuracies(ctx, result);
        if let Some(acc) = result.best_accuracy {
            search_accs.push(acc);
        }
        if let Some((v, t)) = splits {
            valid_accs.push(v);
            test_accs.push(t);
        }
        writer
            .write_record([
                run.seed.to_string(),
                result.best_arch.clone().unwrap_or_default(),
                result
                    .best_accuracy
                    .map(|a| format!("{a:.4}"))
                    .unwrap_or_default(),
                splits.map(|(v, _)| format!("{v:.4}")).unwrap_or_default(),
                splits.map(|(_, t)| format!("{t:.4}")).unwrap_or_default(),
                result.evaluations.to_string(),
                result.iterations.to_string(),
                result.partial.to_string(),
            ])
            .map_err(|e| data_err(e.to_string()))?;
    }
    writer.flush().map_err(|e| data_err(e.to_string()))?;

    if ctx.is_surrogate() {
        println!(
            "{method} on {} over {} seeds | surrogate accuracy {}",
            ctx.space.name(),
            runs.len(),
            fmt_stats(&search_accs),
        );
    } else {
        println!(
            "{method} on {} {} over {} seeds | search {} | valid {} | test {}",
            ctx.space.name(),
            ctx.dataset,
            runs.len(),
            fmt_stats(&search_accs),
            fmt_stats(&valid_accs),
            fmt_stats(&test_accs),
        );
    }
    Ok(())
}

fn cmd_ablate(opts: &AblateOpts) -> Result<(), CliError> {
    let ctx = EvalContext::resolve(&opts.data)?;
    let backend_spec = BackendSpec::parse(&opts.backend)?
        .ok_or_else(|| config_err("ablations need --backend"))?;
    if !matches!(opts.method.as_str(), "collm" | "sillm") {
        return Err(config_err("ablations support methods collm and sillm"));
    }
    let prompts = load_prompts(&opts.backend)?;
    let constraint: Constraint = opts.constraint.parse().map_err(config_err)?;
    let base_config = SearchConfig {
        arch_budget: opts.budget,
        iteration_limit: opts.iters.unwrap_or(20),
        target: None,
        constraint,
        seed: 0,
    };
    base_config.validate().map_err(|e| config_err(e.to_string()))?;
    let seeds: Vec<u64> = (opts.seed_base..opts.seed_base + opts.seeds).collect();
    if seeds.is_empty() {
        return Err(config_err("--seeds must be at least 1"));
    }
    write_manifest(
        &opts.out,
        &format!("ablate-{}", opts.kind),
        &ctx,
        Some(&backend_spec),
        &seeds,
        serde_json::json!({
            "kind": opts.kind,
            "method": opts.method,
            "grid": opts.grid,
            "budget": opts.budget,
            "iters": base_config.iteration_limit,
        }),
    )?;
    let evaluator = ctx.evaluator();

    match opts.kind.as_str() {
        "memory" => {
            let file = std::fs::File::create(opts.out.join("memory_grid.csv"))
                .map_err(|e| data_err(e.to_string()))?;
            let mut writer = csv::Writer::from_writer(std::io::BufWriter::new(file));
            writer
                .write_record(["nav_memory", "gen_memory", "mean_accuracy", "std_accuracy", "partial_runs"])
                .map_err(|e| data_err(e.to_string()))?;
            for (nav, gen) in [(true, true), (true, false), (false, true), (false, false)] {
                let mut backend_opts = opts.backend.clone();
                backend_opts.nav_memory = nav;
                backend_opts.gen_memory = gen;
                let cell_dir = opts.out.join(format!(
                    "memory_nav-{}_gen-{}",
                    flag(nav),
                    flag(gen)
                ));
                let plan = RunPlan {
                    method: &opts.method,
                    ctx: &ctx,
                    evaluator: evaluator.as_ref(),
                    backend_spec: Some(&backend_spec),
                    prompts: &prompts,
                    base_config: &base_config,
                    backend_opts: &backend_opts,
                    ea: EaConfig::default(),
                    rl: RlConfig::default(),
                    out: &cell_dir,
                    temperatures: None,
                };
                let runs = run_seeds(&plan, &seeds, opts.workers)?;
                let accs: Vec<f64> =
                    runs.iter().filter_map(|r| r.result.best_accuracy).collect();
                let partial = runs.iter().filter(|r| r.result.partial).count();
                let stats = summarize(&accs);
                writer
                    .write_record([
                        flag(nav).to_string(),
                        flag(gen).to_string(),
                        stats.map(|s| format!("{:.4}", s.mean)).unwrap_or_default(),
                        stats.map(|s| format!("{:.4}", s.std)).unwrap_or_default(),
                        partial.to_string(),
                    ])
                    .map_err(|e| data_err(e.to_string()))?;
                println!(
                    "memory nav={} gen={} | accuracy {}",
                    flag(nav),
                    flag(gen),
                    fmt_stats(&accs)
                );
            }
            writer.flush().map_err(|e| data_err(e.to_string()))?;
        }
        "temperature" => {
            let grid: Vec<f64> = opts
                .grid
                .split(',')
                .map(|t| t.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| config_err(format!("bad --grid: {e}")))?;
            if grid.is_empty() {
                return Err(config_err("--grid needs at least one temperature"));
            }
            let file = std::fs::File::create(opts.out.join("temperature_grid.csv"))
                .map_err(|e| data_err(e.to_string()))?;
            let mut writer = csv::Writer::from_writer(std::io::BufWriter::new(file));
            writer
                .write_record(["nav_temperature", "gen_temperature", "mean_accuracy", "std_accuracy"])
                .map_err(|e| data_err(e.to_string()))?;
            let mut cell_means = Vec::new();
            for &nav_t in &grid {
                for &gen_t in &grid {
                    let cell_dir = opts
                        .out
                        .join(format!("temperature_nav-{nav_t}_gen-{gen_t}"));
                    let plan = RunPlan {
                        method: &opts.method,
                        ctx: &ctx,
                        evaluator: evaluator.as_ref(),
                        backend_spec: Some(&backend_spec),
                        prompts: &prompts,
                        base_config: &base_config,
                        backend_opts: &opts.backend,
                        ea: EaConfig::default(),
                        rl: RlConfig::default(),
                        out: &cell_dir,
                        temperatures: Some((nav_t, gen_t)),
                    };
                    let runs = run_seeds(&plan, &seeds, opts.workers)?;
                    let accs: Vec<f64> =
                        runs.iter().filter_map(|r| r.result.best_accuracy).collect();
                    let stats = summarize(&accs);
                    if let Some(s) = stats {
                        cell_means.push(s.mean);
                    }
                    writer
                        .write_record([
                            nav_t.to_string(),
                            gen_t.to_string(),
                            stats.map(|s| format!("{:.4}", s.mean)).unwrap_or_default(),
                            stats.map(|s| format!("{:.4}", s.std)).unwrap_or_default(),
                        ])
                        .map_err(|e| data_err(e.to_string()))?;
                }
            }
            writer.flush().map_err(|e| data_err(e.to_string()))?;
            let cv = match summarize(&cell_means) {
                Some(stats) if stats.mean.abs() > f64::EPSILON => {
                    100.0 * stats.std / stats.mean
                }
                _ => 0.0,
            };
            println!(
                "temperature grid {}x{} | coefficient of variation {cv:.4}%",
                grid.len(),
                grid.len()
            );
        }
        other => {
            return Err(config_err(format!(
                "unknown ablation kind {other:?} (expected memory or temperature)"
            )));
        }
    }
    Ok(())
}

fn flag(b: bool) -> &'static str {
    if b {
        "on"
    } else {
        "off"
    }
}

fn cmd_poc(opts: &PocOpts) -> Result<(), CliError> {
    let ctx = EvalContext::resolve(&opts.data)?;
    let table = ctx
        .table
        .as_ref()
        .ok_or_else(|| config_err("the ranking trials need an nb201 benchmark table"))?;
    let backend_spec = BackendSpec::parse(&opts.backend)?
        .ok_or_else(|| config_err("the ranking trials need --backend"))?;
    let prompts = load_prompts(&opts.backend)?;
    let temperatures: Vec<f64> = opts
        .temperatures
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| config_err(format!("bad --temperatures: {e}")))?;
    let config = PocConfig {
        n_archs: opts.n,
        n_trials: opts.trials,
        seed: opts.seed_base,
        temperatures,
    };
    if config.n_archs < 2 {
        return Err(config_err("--n must be at least 2"));
    }
    write_manifest(
        &opts.out,
        "poc",
        &ctx,
        Some(&backend_spec),
        &[opts.seed_base],
        serde_json::json!({
            "trials": opts.trials,
            "n_archs": opts.n,
            "temperatures": opts.temperatures,
        }),
    )?;
    let inner = backend_spec.build(opts.seed_base, &ctx)?;
    let log = RunLog::to_file(&opts.out.join("transcript.jsonl"))
        .map_err(|e| data_err(e.to_string()))?;
    let mut backend = LoggingBackend::new(inner, log);
    let report = run_poc(table, ctx.dataset, &mut backend, &prompts, &config)
        .map_err(|e| config_err(e.to_string()))?;

    let file = std::fs::File::create(opts.out.join("trials.csv"))
        .map_err(|e| data_err(e.to_string()))?;
    write_poc_csv(&report, std::io::BufWriter::new(file))
        .map_err(|e| data_err(e.to_string()))?;
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    std::fs::write(opts.out.join("report.json"), json + "\n")
        .map_err(|e| data_err(e.to_string()))?;

    let top1 = report
        .trials
        .iter()
        .filter(|t| t.top1_correct == Some(true))
        .count();
    let usable = report.trials.len() - report.failed;
    match (report.mean_tau, report.std_tau) {
        (Some(mean), Some(std)) => println!(
            "ranking trials: {usable}/{} usable | mean tau {mean:.4} ± {std:.4} | top-1 correct {top1}/{usable}",
            report.trials.len()
        ),
        _ => println!(
            "ranking trials: 0/{} usable (all replies unparseable)",
            report.trials.len()
        ),
    }
    if report.failed == report.trials.len() {
        return Err(CliError::Backend(
            "every trial failed; see trials.csv".to_string(),
        ));
    }
    Ok(())
}
