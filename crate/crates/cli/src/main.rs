use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use serde_json::json;

use rulefit::analysis::{
    crossval_animals, crossval_future, evaluate_models, history_gap, model_history_gap, model_slices, rule_slices,
    slice_rmse, HistoryCondition, ReportMetadata, SliceGrid,
};
use rulefit::inference::{fit, FitConfig, FittedModel, ModelKind};
use rulefit::io::{
    load_model, read_dataset, read_slices, save_model, sha256_hex, write_dataset, write_history_gap, write_latents,
    write_slices, RunConfig,
};
use rulefit::rules::{GroundTruthRule, RuleKind, RuleParams};
use rulefit::sim::{simulate_pool, RuleSpec, StimulusGrid};
use rulefit::{Error, Result};

#[derive(Parser)]
#[command(name = "rulefit", version, about = "Simulate learners, fit learning-rule models, evaluate and analyze them")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Log verbosity: -v info, -vv debug.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a pool of animals from a run config.
    Simulate(SimulateArgs),
    /// Fit a learning-rule model to a dataset.
    Fit(FitArgs),
    /// Score models on held-out data.
    Eval(EvalArgs),
    /// Tabulate weight updates on a grid of stimuli, weights and outcomes.
    Slices(SlicesArgs),
    /// Compare updates after rewarded and unrewarded recent history.
    Historygap(HistoryArgs),
    /// RMSE between two slice tables computed on the same grid.
    SliceDiff(SliceDiffArgs),
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (overrides the config's output_dir).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    kind: ModelKind,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    out: PathBuf,
    /// Fit report path (default: model path with .json extension).
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProtocolArg {
    Holdout,
    Animals,
    Future,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    data: PathBuf,
    /// Fitted model files. Under the animals and future protocols they are
    /// refit from their stored kind and fit config.
    #[arg(long = "model")]
    models: Vec<PathBuf>,
    /// Model kinds to fit from scratch (animals and future protocols).
    #[arg(long = "kind")]
    kinds: Vec<ModelKind>,
    #[arg(long, value_enum, default_value = "holdout")]
    protocol: ProtocolArg,
    #[arg(long)]
    split: Option<usize>,
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long)]
    folds: Option<usize>,
    /// Include the chance baseline.
    #[arg(long)]
    chance: bool,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Fitting seeds (comma separated); defaults to the single master seed.
    #[arg(long, value_delimiter = ',')]
    seeds: Vec<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SourceArgs {
    /// Fitted model file.
    #[arg(long, conflicts_with = "rule")]
    model: Option<PathBuf>,
    /// Ground-truth rule instead of a fitted model.
    #[arg(long, value_enum, requires = "alpha")]
    rule: Option<RuleArg>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, default_value_t = 10)]
    window: usize,
    #[arg(long)]
    learn_bias: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum RuleArg {
    Reinforce,
    MaxLikelihood,
    Etrace,
}

enum Source {
    Model(Box<FittedModel>),
    Rule(RuleParams, bool),
}

impl SourceArgs {
    fn resolve(&self) -> Result<Source> {
        match (&self.model, self.rule) {
            (Some(path), _) => Ok(Source::Model(Box::new(load_model(path)?.0))),
            (None, Some(rule)) => {
                let alpha = self.alpha.expect("clap enforces --alpha");
                let params = match rule {
                    RuleArg::Reinforce => RuleParams::reinforce(alpha),
                    RuleArg::MaxLikelihood => RuleParams::max_likelihood(alpha),
                    RuleArg::Etrace => RuleParams::etrace(alpha, self.window),
                };
                params.validate()?;
                let learn_bias = self.learn_bias || params.kind == RuleKind::EtraceReinforce;
                Ok(Source::Rule(params, learn_bias))
            }
            (None, None) => Err(Error::Config("one of --model or --rule is required".into())),
        }
    }
}

#[derive(Args)]
struct SlicesArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Weight levels (comma separated).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    w_levels: Vec<f64>,
    #[arg(long)]
    bias: Option<f64>,
    #[arg(long)]
    history_samples: Option<usize>,
    /// Output CSV (default: standard output).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct HistoryArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    offset: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    w_stim: Option<f64>,
    #[arg(long)]
    draws: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SliceDiffArgs {
    a: PathBuf,
    b: PathBuf,
    /// Accepted for uniformity; the comparison is deterministic.
    #[arg(long)]
    seed: Option<u64>,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Json(_) => 2,
        Error::Numerical(_) => 4,
        Error::UnsupportedModel(_) => 5,
        _ => 3,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build_global() {
            eprintln!("error: cannot configure {jobs} worker threads: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Fit(a) => fit_cmd(a),
        Command::Eval(a) => eval(a),
        Command::Slices(a) => slices(a),
        Command::Historygap(a) => historygap(a),
        Command::SliceDiff(a) => slice_diff(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn load_config(path: Option<&Path>, seed: Option<u64>) -> Result<RunConfig> {
    match path {
        Some(p) => RunConfig::load(p, seed),
        None => RunConfig::parse(&json!({"version": 1, "master_seed": seed.unwrap_or(0)}).to_string(), None),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(create(p)?),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn load_data(path: &Path) -> Result<(Vec<rulefit::glm::SessionRecord>, String)> {
    let bytes = std::fs::read(path)?;
    let sessions = read_dataset(bytes.as_slice()).map_err(|e| match e {
        Error::Data { row, message } => Error::Data {
            row,
            message: format!("{}: {message}", path.display()),
        },
        other => other,
    })?;
    if sessions.is_empty() {
        return Err(Error::InvalidData(format!("{} has no trials", path.display())));
    }
    Ok((sessions, sha256_hex(&bytes)))
}

fn describe_rule(spec: &RuleSpec) -> String {
    let one = |r: &RuleParams| match r.kind {
        RuleKind::EtraceReinforce => format!("etrace(alpha={}, window={})", r.learning_rate, r.window),
        RuleKind::Reinforce => format!("reinforce(alpha={})", r.learning_rate),
        RuleKind::MaxLikelihood => format!("max_likelihood(alpha={})", r.learning_rate),
    };
    match spec {
        RuleSpec::Single(r) => one(r),
        RuleSpec::Mixture(c) => {
            let parts: Vec<String> = c.iter().map(|m| format!("{}*{}", m.weight, one(&m.rule))).collect();
            format!("mixture[{}]", parts.join(" + "))
        }
    }
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let config = RunConfig::load(&a.config, a.seed)?;
    let sim = config
        .simulate
        .as_ref()
        .ok_or_else(|| Error::Config("config has no \"simulate\" section".into()))?;
    let dir = a.out.or(config.output_dir.clone()).unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir)?;
    let pool = simulate_pool(sim)?;
    let data_path = dir.join("dataset.csv");
    let latents_path = dir.join("latents.csv");
    let mut out = create(&data_path)?;
    write_dataset(&mut out, &pool.sessions)?;
    out.flush()?;
    let mut out = create(&latents_path)?;
    write_latents(&mut out, &pool.latents)?;
    out.flush()?;
    let mut out = create(&dir.join("config.json"))?;
    serde_json::to_writer_pretty(&mut out, &config)?;
    writeln!(out)?;
    out.flush()?;
    println!(
        "simulated n_animals={} T={} rule={} seed={} -> {}",
        sim.n_animals,
        sim.trials,
        describe_rule(&sim.rule),
        sim.master_seed,
        data_path.display()
    );
    Ok(())
}

fn fit_config(run: &RunConfig, epochs: Option<usize>) -> Result<FitConfig> {
    let mut c = run.fit.clone().unwrap_or_else(|| FitConfig {
        seed: run.master_seed,
        ..FitConfig::default()
    });
    if let Some(e) = epochs {
        c.epochs = e;
    }
    c.validate()?;
    Ok(c)
}

fn fit_cmd(a: FitArgs) -> Result<()> {
    let run = load_config(a.config.as_deref(), a.seed)?;
    let config = fit_config(&run, a.epochs)?;
    let (sessions, data_hash) = load_data(&a.data)?;
    info!("fitting {} to {} animals", a.kind.name(), sessions.len());
    let start = Instant::now();
    let model = fit(&sessions, a.kind, &config)?;
    let wall = start.elapsed().as_secs_f64();
    let model_hash = save_model(&a.out, &model)?;
    let d = &model.diagnostics;
    let report = json!({
        "format_version": 1,
        "kind": a.kind.name(),
        "dataset": a.data,
        "dataset_sha256": data_hash,
        "model": a.out,
        "model_sha256": model_hash,
        "animals": sessions.len(),
        "final_train_loss": d.train_loss.last(),
        "final_validation_ll": d.validation_ll.last(),
        "best_epoch": d.best_epoch,
        "epochs_run": d.epochs_run(),
        "stopped_early": d.stopped_early,
        "wall_seconds": wall,
        "config": config,
    });
    let report_path = a.report.unwrap_or_else(|| a.out.with_extension("json"));
    let mut out = create(&report_path)?;
    serde_json::to_writer_pretty(&mut out, &report)?;
    writeln!(out)?;
    out.flush()?;
    println!(
        "fit {} epochs={} best_epoch={} sha256={} -> {}",
        a.kind.name(),
        d.epochs_run(),
        d.best_epoch,
        model_hash,
        a.out.display()
    );
    Ok(())
}

fn model_name(path: &Path, model: &FittedModel, taken: &[String]) -> String {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let base = if stem.is_empty() { model.kind().name().to_string() } else { stem };
    let mut name = base.clone();
    let mut k = 2;
    while taken.contains(&name) {
        name = format!("{base}_{k}");
        k += 1;
    }
    name
}

fn eval(a: EvalArgs) -> Result<()> {
    let run = load_config(a.config.as_deref(), a.seed)?;
    let settings = run.eval.clone().unwrap_or_default();
    let (sessions, data_hash) = load_data(&a.data)?;
    let mut loaded = Vec::new();
    let mut names: Vec<String> = Vec::new();
    let mut hashes = std::collections::BTreeMap::new();
    for path in &a.models {
        let (model, hash) = load_model(path)?;
        let name = model_name(path, &model, &names);
        hashes.insert(name.clone(), hash);
        names.push(name.clone());
        loaded.push((name, model));
    }
    let seeds = if !a.seeds.is_empty() {
        a.seeds.clone()
    } else if !settings.seeds.is_empty() {
        settings.seeds.clone()
    } else {
        vec![run.master_seed]
    };
    let mut report = match a.protocol {
        ProtocolArg::Holdout => {
            if !a.kinds.is_empty() {
                return Err(Error::Config("--kind needs --protocol animals or future; holdout scores --model files".into()));
            }
            if loaded.is_empty() && !a.chance {
                return Err(Error::Config("nothing to evaluate: pass --model and/or --chance".into()));
            }
            let metadata = ReportMetadata {
                seeds: seeds.clone(),
                ..ReportMetadata::default()
            };
            evaluate_models(&loaded, &sessions, a.chance, metadata)?
        }
        ProtocolArg::Animals | ProtocolArg::Future => {
            let config = fit_config(&run, a.epochs)?;
            // Model files contribute their kind; every kind is refit per seed.
            let mut kinds = a.kinds.clone();
            kinds.extend(loaded.iter().map(|(_, m)| m.kind()));
            if kinds.is_empty() && !a.chance {
                return Err(Error::Config("nothing to evaluate: pass --kind, --model and/or --chance".into()));
            }
            if matches!(a.protocol, ProtocolArg::Animals) {
                let folds = a.folds.unwrap_or(settings.folds);
                let split_seed = settings.split_seed.unwrap_or(run.master_seed);
                crossval_animals(&sessions, &kinds, folds, &seeds, &config, split_seed, a.chance)?
            } else {
                let split = a
                    .split
                    .or(settings.split)
                    .ok_or_else(|| Error::Config("--protocol future needs --split".into()))?;
                let horizon = a.horizon.or(settings.horizon).unwrap_or(500);
                crossval_future(&sessions, &kinds, split, horizon, &seeds, &config, a.chance)?
            }
        }
    };
    report.metadata.dataset_sha256 = Some(data_hash);
    report.metadata.model_sha256 = hashes;
    print!("{}", report.summary_table());
    if let Some(path) = &a.out {
        let mut out = create(path)?;
        serde_json::to_writer_pretty(&mut out, &report)?;
        writeln!(out)?;
        out.flush()?;
    }
    Ok(())
}

fn slices(a: SlicesArgs) -> Result<()> {
    let run = load_config(a.config.as_deref(), a.seed)?;
    let mut grid = run.slices.clone().unwrap_or_else(|| SliceGrid {
        seed: run.master_seed,
        ..SliceGrid::default()
    });
    if !a.w_levels.is_empty() {
        grid.w_levels = a.w_levels.clone();
    }
    if let Some(b) = a.bias {
        grid.bias = b;
    }
    if let Some(n) = a.history_samples {
        grid.history_samples = n;
    }
    grid.validate()?;
    let rows = match a.source.resolve()? {
        Source::Model(m) => model_slices(&m, &grid)?,
        Source::Rule(r, learn_bias) => rule_slices(r, learn_bias, &grid)?,
    };
    let mut out = output(a.out.as_deref())?;
    write_slices(&mut out, &rows)?;
    out.flush()?;
    info!("{} slice rows", rows.len());
    Ok(())
}

fn historygap(a: HistoryArgs) -> Result<()> {
    let run = load_config(a.config.as_deref(), a.seed)?;
    let mut cond = run.history.clone().unwrap_or_else(|| HistoryCondition {
        seed: run.master_seed,
        ..HistoryCondition::default()
    });
    if let Some(k) = a.k {
        cond.k = k;
    }
    if let Some(o) = a.offset {
        cond.offset = o;
    }
    if let Some(w) = a.w_stim {
        cond.w_stim = w;
    }
    if let Some(d) = a.draws {
        cond.draws = d;
    }
    let stimuli = StimulusGrid::default().values()?;
    let gap = match a.source.resolve()? {
        Source::Model(m) => model_history_gap(&m, &cond, &stimuli)?,
        Source::Rule(r, learn_bias) => history_gap(&mut GroundTruthRule::new(r, learn_bias), &cond, &stimuli)?,
    };
    let mut out = output(a.out.as_deref())?;
    write_history_gap(&mut out, &gap)?;
    out.flush()?;
    info!("mean gap {}", gap.mean_gap());
    Ok(())
}

fn slice_diff(a: SliceDiffArgs) -> Result<()> {
    let read = |p: &Path| read_slices(BufReader::new(File::open(p)?));
    let rmse = slice_rmse(&read(&a.a)?, &read(&a.b)?)?;
    println!("rmse={rmse:?} log10_rmse={:?}", rmse.log10());
    Ok(())
}
