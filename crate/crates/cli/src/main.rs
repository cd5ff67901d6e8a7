//! `cascade` command-line tool.
//!
//! Machine output is JSON on stdout. Failures print
//! `{"error": <code>, "message": <text>}` on stderr and exit with
//! 2 (config or contract), 3 (I/O) or 4 (data).

mod lock;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use cascade_core::config::{self, EngineConfigFile, TierSource, TierSpec};
use cascade_core::cost::{self, CostParams};
use cascade_core::eval::{self, GroundTruthPairs, WorkloadOptions, TABLE_HEADER};
use cascade_core::store;
use cascade_core::synthetic::{NoiseShape, SyntheticDataset, SyntheticParams};
use cascade_core::{Cascade, ErrorKind, QueryMode};

use crate::lock::StateLock;

/// Overrides `state_dir` from the config file.
const STATE_DIR_ENV: &str = "CASCADE_STATE_DIR";

#[derive(Debug)]
enum CliError {
    Core(cascade_core::Error),
    Contract { code: &'static str, message: String },
}

impl From<cascade_core::Error> for CliError {
    fn from(e: cascade_core::Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    fn contract(code: &'static str, message: impl Into<String>) -> Self {
        CliError::Contract {
            code,
            message: message.into(),
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) => match e.kind() {
                ErrorKind::Config => 2,
                ErrorKind::Io => 3,
                ErrorKind::Data => 4,
            },
            CliError::Contract { .. } => 2,
        }
    }

    fn to_json(&self) -> Value {
        match self {
            CliError::Core(e) => json!({ "error": e.code(), "message": e.to_string() }),
            CliError::Contract { code, message } => json!({ "error": code, "message": message }),
        }
    }
}

type CliResult<T = ()> = Result<T, CliError>;

#[derive(Parser, Debug)]
#[command(name = "cascade", version, about = "Cascaded text-to-image retrieval")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct ConfigArg {
    /// Engine config file (TOML).
    #[arg(long)]
    config: PathBuf,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Encode the collection with the cheapest tier and initialize state.
    Build {
        #[command(flatten)]
        config: ConfigArg,
        /// Replace existing state.
        #[arg(long)]
        force: bool,
    },
    /// Run one recorded query.
    Query {
        #[command(flatten)]
        config: ConfigArg,
        /// Caption key.
        key: u64,
        /// Number of results; at most the last candidate count.
        #[arg(long)]
        k: Option<usize>,
    },
    /// Recall@k over all ground-truth captions, without touching state.
    Eval {
        #[command(flatten)]
        config: ConfigArg,
        /// Ground-truth TSV (caption_key, doc_id).
        #[arg(long)]
        truth: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "1,5,10")]
        ks: Vec<usize>,
        #[arg(long, default_value = "synthetic")]
        dataset: String,
        #[arg(long, default_value = "cascade")]
        method: String,
    },
    /// Evaluate the cost model.
    Simulate(SimulateArgs),
    /// Generate a query sequence with a target return fraction.
    Workload {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        target_f: f64,
        /// Defaults to the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output file, one caption key per line.
        #[arg(long)]
        out: PathBuf,
        /// Number of queries; defaults to ten per pool caption.
        #[arg(long)]
        length: Option<usize>,
        #[arg(long, default_value_t = 1.0)]
        zipf: f64,
    },
    /// Execute a workload, then evaluate recall and lifetime cost.
    RunExperiment {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        truth: PathBuf,
        /// Query file; otherwise a workload is generated from --target-f.
        #[arg(long, conflicts_with = "target_f")]
        workload: Option<PathBuf>,
        #[arg(long, required_unless_present = "workload")]
        target_f: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_delimiter = ',', default_value = "1,5,10")]
        ks: Vec<usize>,
        #[arg(long, default_value = "synthetic")]
        dataset: String,
        #[arg(long, default_value = "cascade")]
        method: String,
    },
    /// Write a seeded synthetic collection and a matching config.
    Synth(SynthArgs),
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// Collection size.
    #[arg(long)]
    n: Option<u64>,
    /// Lifetime return fraction.
    #[arg(long)]
    f: Option<f64>,
    /// Tier costs `t_s,t_1,...`; the query speedup uses the last |m| entries.
    #[arg(long, value_delimiter = ',')]
    t: Vec<f64>,
    /// Candidate counts `m_1,...`.
    #[arg(long, value_delimiter = ',')]
    m: Vec<usize>,
    /// Solve for the middle candidate count reaching this query speedup.
    #[arg(long)]
    target_speedup: Option<f64>,
    /// Measure per-tier encode time from the config's tiers instead of --t.
    #[arg(long, requires = "config")]
    calibrate: bool,
    /// Documents sampled per tier when calibrating.
    #[arg(long, default_value_t = 256)]
    sample: usize,
    /// Engine config; adds the realized return fraction when state exists.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 64)]
    dim: usize,
    #[arg(long, default_value_t = 200)]
    queries: usize,
    #[arg(long, default_value_t = 1.5)]
    noise: f64,
    #[arg(long, default_value_t = 1.0)]
    decay: f64,
    /// Noise proportional to each coordinate's signal instead of isotropic.
    #[arg(long)]
    shaped_noise: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Truncation widths, cheapest first; defaults to `dim/8,dim`.
    #[arg(long, value_delimiter = ',')]
    widths: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "1,4")]
    costs: Vec<f64>,
    /// Candidate counts; defaults to `min(50, n)` for two tiers.
    #[arg(long, value_delimiter = ',')]
    m: Vec<usize>,
    #[arg(long, default_value_t = 10)]
    k: usize,
    #[arg(long, default_value_t = 0.1)]
    f: f64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(out) => {
            println!("{}", serde_json::to_string_pretty(&out).expect("output serializes"));
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(command: Command) -> CliResult<Value> {
    match command {
        Command::Build { config, force } => build(&config.config, force),
        Command::Query { config, key, k } => query(&config.config, key, k),
        Command::Eval {
            config,
            truth,
            ks,
            dataset,
            method,
        } => evaluate(&config.config, &truth, &ks, &dataset, &method),
        Command::Simulate(args) => simulate(&args),
        Command::Workload {
            config,
            truth,
            target_f,
            seed,
            out,
            length,
            zipf,
        } => workload(&config.config, &truth, target_f, seed, &out, length, zipf),
        Command::RunExperiment {
            config,
            truth,
            workload,
            target_f,
            seed,
            ks,
            dataset,
            method,
        } => run_experiment(
            &config.config,
            &truth,
            workload.as_deref(),
            target_f,
            seed,
            &ks,
            &dataset,
            &method,
        ),
        Command::Synth(args) => synth(&args),
    }
}

fn to_value<T: Serialize>(value: &T) -> Value {
    serde_json::to_value(value).expect("output serializes")
}

fn load_config(path: &Path) -> CliResult<EngineConfigFile> {
    let mut config = EngineConfigFile::load(path)?;
    if let Some(dir) = std::env::var_os(STATE_DIR_ENV).filter(|d| !d.is_empty()) {
        config.state_dir = PathBuf::from(dir);
    }
    config.check_inputs_exist()?;
    Ok(config)
}

fn open_engine(config: &EngineConfigFile) -> CliResult<Cascade> {
    let manifest = config.state_dir.join(cascade_core::engine::MANIFEST_FILE);
    if !manifest.exists() {
        return Err(CliError::contract(
            "no_state",
            format!("no built state at {}; run build first", config.state_dir.display()),
        ));
    }
    Ok(Cascade::open(config.cascade_config()?, &config.state_dir)?)
}

fn table_csv(dataset: &str, method: &str, recall: &eval::RecallReport, speedup: f64) -> CliResult<String> {
    Ok(format!(
        "{}\n{}",
        TABLE_HEADER.join(","),
        eval::table_row(dataset, method, recall, speedup)?
    ))
}

fn build(path: &Path, force: bool) -> CliResult<Value> {
    let config = load_config(path)?;
    let dir = &config.state_dir;
    let manifest = dir.join(cascade_core::engine::MANIFEST_FILE);
    if manifest.exists() && !force {
        return Err(CliError::contract(
            "state_exists",
            format!("state exists at {}; pass --force to rebuild", dir.display()),
        ));
    }
    fs::create_dir_all(dir).map_err(|e| cascade_core::Error::Io {
        path: dir.clone(),
        source: e,
    })?;
    let _lock = StateLock::acquire(dir)?;
    let collection = config.read_collection()?;
    let engine = Cascade::build_persistent(&collection, config.cascade_config()?, dir)?;
    let report = engine.lifetime_report()?;
    Ok(json!({
        "state_dir": dir,
        "n": engine.n(),
        "levels": engine.config().tiers.len(),
        "level0_dim": engine.level0().dim(),
        "build_cost": report.build_cost,
    }))
}

fn query(path: &Path, key: u64, k: Option<usize>) -> CliResult<Value> {
    let config = load_config(path)?;
    let _lock = StateLock::acquire(&config.state_dir)?;
    let engine = open_engine(&config)?;
    let k = k.unwrap_or(engine.config().output_k);
    let result = engine.query_with(key, k, QueryMode::Record)?;
    Ok(to_value(&result))
}

fn evaluate(path: &Path, truth: &Path, ks: &[usize], dataset: &str, method: &str) -> CliResult<Value> {
    let config = load_config(path)?;
    let engine = open_engine(&config)?;
    let truth = GroundTruthPairs::read_tsv(truth, engine.collection())?;
    let report = eval::evaluate(&engine, &truth, ks)?;
    let lifetime = engine.lifetime_report()?;
    let costs = engine.config().costs();
    let model_speedup = lifetime.n as f64 * costs[costs.len() - 1] / lifetime.predicted_cost;
    Ok(json!({
        "recall": report,
        "table_csv": table_csv(dataset, method, &report, model_speedup)?,
    }))
}

fn simulate(args: &SimulateArgs) -> CliResult<Value> {
    let engine_config = args.config.as_deref().map(load_config).transpose()?;
    let t = match (&engine_config, args.calibrate) {
        (Some(config), true) => calibrate(config, args.sample)?,
        _ => args.t.clone(),
    };
    if t.is_empty() {
        return Err(CliError::contract("missing_costs", "pass --t or --calibrate"));
    }

    let lifetime_cost = match (args.n, args.f) {
        (Some(n), Some(f)) => Some(cost::lifetime_cost(&CostParams {
            n,
            f,
            t: t.clone(),
            m: vec![],
        })?),
        _ => None,
    };
    let two_level_speedup = match (args.f, t.len() >= 2) {
        (Some(f), true) => Some(cost::two_level_speedup(t[0], t[1], f)?),
        _ => None,
    };
    let query_speedup = if args.m.is_empty() {
        None
    } else if args.m.len() > t.len() {
        return Err(CliError::contract(
            "missing_costs",
            format!("{} candidate counts need at least as many costs", args.m.len()),
        ));
    } else {
        Some(cost::query_speedup::<f64>(&args.m, &t[t.len() - args.m.len()..])?)
    };
    let solved_m2 = match args.target_speedup {
        Some(target) => {
            let m_1 = *args
                .m
                .first()
                .ok_or_else(|| CliError::contract("missing_m", "--target-speedup needs --m"))?;
            if t.len() < 2 {
                return Err(CliError::contract("missing_costs", "--target-speedup needs two costs"));
            }
            Some(cost::solve_intermediate_m(m_1, target, t[t.len() - 2], t[t.len() - 1])?)
        }
        None => None,
    };
    let predicted_vs_realized_f = match &engine_config {
        Some(config) if config.state_dir.join(cascade_core::engine::MANIFEST_FILE).exists() => {
            let report = open_engine(config)?.lifetime_report()?;
            Some(json!({
                "predicted": report.f_assumed,
                "realized": report.realized_f,
                "q": report.q,
            }))
        }
        _ => None,
    };
    Ok(json!({
        "t": t,
        "lifetime_cost": lifetime_cost,
        "two_level_speedup": two_level_speedup,
        "query_speedup": query_speedup,
        "solved_m2": solved_m2,
        "predicted_vs_realized_f": predicted_vs_realized_f,
    }))
}

/// Mean wall-clock image encode time per tier over an evenly spaced sample,
/// normalized so the first tier costs 1.
fn calibrate(config: &EngineConfigFile, sample: usize) -> CliResult<Vec<f64>> {
    let collection = config.read_collection()?;
    if collection.is_empty() || sample == 0 {
        return Err(CliError::contract("empty_sample", "nothing to calibrate on"));
    }
    let step = (collection.len() / sample.min(collection.len())).max(1);
    let ids: Vec<_> = collection.iter().step_by(step).take(sample).copied().collect();
    let mut times = Vec::new();
    for tier in config.load_tiers()? {
        let start = Instant::now();
        for &id in &ids {
            std::hint::black_box(tier.encode_image(id)?);
        }
        times.push(start.elapsed().as_secs_f64() / ids.len() as f64);
    }
    let base = times[0].max(f64::MIN_POSITIVE);
    Ok(times.iter().map(|t| t / base).collect())
}

fn workload(
    path: &Path,
    truth: &Path,
    target_f: f64,
    seed: Option<u64>,
    out: &Path,
    length: Option<usize>,
    zipf: f64,
) -> CliResult<Value> {
    let config = load_config(path)?;
    let engine = open_engine(&config)?;
    let truth = GroundTruthPairs::read_tsv(truth, engine.collection())?;
    let options = WorkloadOptions {
        length,
        zipf_exponent: zipf,
        ..WorkloadOptions::default()
    };
    let workload = eval::generate_workload(&engine, &truth, target_f, seed.unwrap_or(config.seed), &options)?;
    workload.write(out)?;
    Ok(json!({
        "out": out,
        "pilot_f": workload.pilot_f,
        "target_f": workload.target_f,
        "pool": workload.pool.len(),
        "queries": workload.queries.len(),
    }))
}

#[allow(clippy::too_many_arguments)]
fn run_experiment(
    path: &Path,
    truth: &Path,
    workload_file: Option<&Path>,
    target_f: Option<f64>,
    seed: Option<u64>,
    ks: &[usize],
    dataset: &str,
    method: &str,
) -> CliResult<Value> {
    let config = load_config(path)?;
    let _lock = StateLock::acquire(&config.state_dir)?;
    let engine = open_engine(&config)?;
    let truth = GroundTruthPairs::read_tsv(truth, engine.collection())?;
    let queries = match (workload_file, target_f) {
        (Some(file), _) => eval::read_query_list(file)?,
        (None, Some(f)) => {
            eval::generate_workload(&engine, &truth, f, seed.unwrap_or(config.seed), &WorkloadOptions::default())?
                .queries
        }
        (None, None) => return Err(CliError::contract("missing_workload", "pass --workload or --target-f")),
    };
    let report = eval::run_experiment(&engine, &truth, &queries, ks)?;
    let speedup = report.realized_speedup.unwrap_or(1.0);
    let table = table_csv(dataset, method, &report.recall, speedup)?;
    let mut value = to_value(&report);
    value["table_csv"] = Value::String(table);
    Ok(value)
}

fn synth(args: &SynthArgs) -> CliResult<Value> {
    let widths = if args.widths.is_empty() {
        vec![(args.dim / 8).max(1), args.dim]
    } else {
        args.widths.clone()
    };
    if widths.len() != args.costs.len() {
        return Err(CliError::contract("bad_tiers", "--widths and --costs differ in length"));
    }
    let m = match (args.m.is_empty(), widths.len()) {
        (false, _) | (true, 1) => args.m.clone(),
        (true, 2) => vec![args.n.min(50)],
        (true, _) => return Err(CliError::contract("missing_m", "pass --m for three or more tiers")),
    };
    let data = SyntheticDataset::generate(&SyntheticParams {
        n: args.n,
        dim: args.dim,
        queries: args.queries,
        noise: args.noise,
        decay: args.decay,
        shape: if args.shaped_noise {
            NoiseShape::Shaped
        } else {
            NoiseShape::Isotropic
        },
        seed: args.seed,
    })?;
    let out = &args.out;
    fs::create_dir_all(out).map_err(|e| cascade_core::Error::Io {
        path: out.clone(),
        source: e,
    })?;
    store::write_matrix(&data.images, out.join("images.csc"))?;
    store::write_matrix(&data.queries, out.join("queries.csc"))?;
    data.truth.write_tsv(out.join("truth.tsv"))?;
    config::write_id_list(out.join("collection.txt"), data.images.doc_ids())?;

    let engine_config = EngineConfigFile {
        collection: "collection.txt".into(),
        state_dir: "state".into(),
        m,
        f_assumed: args.f,
        output_k: args.k,
        seed: args.seed,
        tiers: widths
            .iter()
            .zip(&args.costs)
            .enumerate()
            .map(|(i, (&width, &cost))| TierSpec {
                id: i as u16,
                cost,
                source: TierSource::Truncation {
                    width,
                    images: "images.csc".into(),
                    queries: "queries.csc".into(),
                },
            })
            .collect(),
    };
    let config_path = out.join("config.toml");
    fs::write(&config_path, engine_config.to_toml()).map_err(|e| cascade_core::Error::Io {
        path: config_path.clone(),
        source: e,
    })?;
    EngineConfigFile::load(&config_path)?.cascade_config()?;
    Ok(json!({
        "config": config_path,
        "n": args.n,
        "dim": args.dim,
        "queries": args.queries,
    }))
}
