//! Command-line front end.
//!
//! Exit codes: 0 success, 2 usage or configuration error, 3 data or I/O
//! error, 4 numerical failure.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::checkpoint::{
    load_edges, load_embeddings, load_session, save_edges, save_embeddings, save_session, CheckpointMeta,
};
use crate::config::{apply_setting, config_hash, load_config_file, RunManifest};
use crate::data::{inject_interaction_noise, load_edge_lists, read_split, split_train_test, write_split, DatasetSplit};
use crate::denoise::{denoise_interaction, denoise_social, social_enhance, DenoiseThresholds};
use crate::encoder::propagate_interaction;
use crate::error::{Error, Result};
use crate::eval::{evaluate_split, real_plus_n, retention_tsv, robustness_report, MetricsReport};
use crate::graph::{InteractionGraph, SocialNetwork};
use crate::trainer::{scoring_embeddings, TrainConfig, TrainOutcome, TrainingSession};

pub const EXIT_OK: i32 = 0;

#[derive(Debug, Parser)]
#[command(name = "dcdsr", version, about = "Dual-domain collaborative denoising social recommender")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Split raw edge lists into train/test files with id maps.
    Split(SplitArgs),
    /// Train a model and write checkpoint, log and manifest.
    Train(TrainArgs),
    /// Evaluate a checkpoint on a split.
    Eval(EvalArgs),
    /// Run one structure-denoising pass from a checkpoint and report it.
    DenoiseReport(DenoiseArgs),
    /// Add fabricated interactions to a split's training set.
    InjectNoise(InjectArgs),
    /// Train every cell of a hyperparameter grid.
    Sweep(SweepArgs),
    /// Train at several noise ratios and report metric retention.
    Robustness(RobustnessArgs),
}

#[derive(Debug, Args)]
struct SplitArgs {
    #[arg(long)]
    interactions: PathBuf,
    #[arg(long)]
    social: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Fraction of each user's interactions used for training.
    #[arg(long, default_value_t = 0.8)]
    ratio: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args, Clone, Default)]
struct DataArgs {
    /// Interaction edge list (`user item` per line).
    #[arg(long)]
    interactions: Option<PathBuf>,
    /// Social edge list (`user user` per line).
    #[arg(long)]
    social: Option<PathBuf>,
    /// Existing split directory, instead of raw edge lists.
    #[arg(long, conflicts_with_all = ["interactions", "social"])]
    split: Option<PathBuf>,
    #[arg(long, default_value_t = 0.8)]
    split_ratio: f64,
    /// Seed of the train/test split; defaults to --seed.
    #[arg(long)]
    split_seed: Option<u64>,
    /// Inject this fraction of fabricated training interactions.
    #[arg(long)]
    noise_ratio: Option<f64>,
}

#[derive(Debug, Args, Clone, Default)]
struct HyperArgs {
    /// Flat `key = value` file; flags given here override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    beta_s: Option<f64>,
    #[arg(long)]
    beta_r: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    lambda1: Option<f64>,
    #[arg(long)]
    lambda2: Option<f64>,
    #[arg(long)]
    lambda3: Option<f64>,
    #[arg(long)]
    lambda_reg: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
    /// full, rd, sd, ed, or a '+' combination such as sd+ed.
    #[arg(long)]
    ablation: Option<String>,
    /// cp (collaborative) or rp (random).
    #[arg(long)]
    perturb: Option<String>,
    /// ac (anchor-centered) or infonce.
    #[arg(long)]
    cl_loss: Option<String>,
    /// Train for exactly --epochs epochs without a validation holdout.
    #[arg(long)]
    no_validation: bool,
}

impl HyperArgs {
    fn resolve(&self) -> Result<TrainConfig> {
        let mut cfg = TrainConfig::default();
        if let Some(path) = &self.config {
            load_config_file(path, &mut cfg)?;
        }
        let text = |v: Option<String>| v;
        let s = |v: Option<f64>| v.map(|x| x.to_string());
        let n = |v: Option<usize>| v.map(|x| x.to_string());
        let pairs = [
            ("seed", self.seed.map(|x| x.to_string())),
            ("beta_s", s(self.beta_s)),
            ("beta_r", s(self.beta_r)),
            ("sigma", s(self.sigma)),
            ("lambda1", s(self.lambda1)),
            ("lambda2", s(self.lambda2)),
            ("lambda3", s(self.lambda3)),
            ("lambda_reg", s(self.lambda_reg)),
            ("tau", s(self.tau)),
            ("epsilon", s(self.epsilon)),
            ("layers", n(self.layers)),
            ("dim", n(self.dim)),
            ("batch", n(self.batch)),
            ("lr", s(self.lr)),
            ("epochs", n(self.epochs)),
            ("patience", n(self.patience)),
            ("ablation", text(self.ablation.clone())),
            ("perturb", text(self.perturb.clone())),
            ("cl_loss", text(self.cl_loss.clone())),
            ("validation", self.no_validation.then(|| "false".to_string())),
        ];
        for (k, v) in pairs {
            if let Some(v) = v {
                apply_setting(&mut cfg, k, &v)?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    hyper: HyperArgs,
    /// Output directory; every artifact is written below it.
    #[arg(long)]
    out: PathBuf,
    /// Write 0 in the wall_seconds log column so logs compare byte for byte.
    #[arg(long)]
    no_timing: bool,
    /// Continue from the session snapshot in --out.
    #[arg(long)]
    resume: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ProtocolArg {
    AllRanking,
    RealPlusN,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Tsv,
    Kv,
    Json,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    split: PathBuf,
    /// Interaction edges to propagate over; defaults to the checkpoint's
    /// sibling `scoring_edges.txt`, else the split's training edges.
    #[arg(long)]
    scoring_edges: Option<PathBuf>,
    /// Propagation depth; defaults to the checkpoint metadata, else 2.
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long, value_enum, default_value = "all-ranking")]
    protocol: ProtocolArg,
    /// Comma-separated cutoffs; default 10,20 (all-ranking) or 3 (real-plus-n).
    #[arg(long, value_delimiter = ',')]
    k: Vec<usize>,
    /// Sampled negatives per user under real-plus-n.
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "tsv")]
    format: FormatArg,
    /// Shorthand for --format json.
    #[arg(long)]
    json: bool,
    /// Also write the report into this directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
struct DenoiseArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    split: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    scoring_edges: Option<PathBuf>,
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long)]
    beta_s: Option<f64>,
    #[arg(long)]
    beta_r: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    /// Also write the PC/IC histogram CSV.
    #[arg(long)]
    histogram: bool,
}

#[derive(Debug, Args)]
struct InjectArgs {
    #[arg(long)]
    split: PathBuf,
    #[arg(long)]
    noise_ratio: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
struct SweepArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    hyper: HyperArgs,
    #[arg(long)]
    out: PathBuf,
    /// Grid such as `beta_s=0.5,0.6;beta_r=0.3,0.4`.
    #[arg(long)]
    grid: String,
    #[arg(long)]
    no_timing: bool,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
struct RobustnessArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    hyper: HyperArgs,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.2,0.3")]
    ratios: Vec<f64>,
    #[arg(long, default_value_t = 0)]
    noise_seed: u64,
    #[arg(long, value_delimiter = ',', default_value = "20")]
    k: Vec<usize>,
}

/// Parse `args` (program name first), run, and return the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Split(a) => cmd_split(a),
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::DenoiseReport(a) => cmd_denoise_report(a),
        Command::InjectNoise(a) => cmd_inject(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Robustness(a) => cmd_robustness(a),
    }
}

fn write(path: &Path, body: &str) -> Result<()> {
    fs::write(path, body).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(format!("creating {}", path.display()), e))
}

/// Exclusive claim on an output directory, released on drop.
struct OutputLock {
    path: PathBuf,
}

impl OutputLock {
    fn acquire(dir: &Path) -> Result<Self> {
        create_dir(dir)?;
        let path = dir.join(".lock");
        match fs::OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                use std::io::Write;
                let _ = writeln!(f, "{}", std::process::id());
                Ok(OutputLock { path })
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(Error::Usage(format!(
                "{} is in use by another run (remove {} if that run is gone)",
                dir.display(),
                path.display()
            ))),
            Err(e) => Err(Error::io(format!("creating {}", path.display()), e)),
        }
    }
}

impl Drop for OutputLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

fn cmd_split(a: SplitArgs) -> Result<()> {
    let raw = load_edge_lists(&a.interactions, &a.social)?;
    let split = split_train_test(&raw, a.ratio, a.seed)?;
    write_split(&split, &a.out)?;
    println!(
        "users={} items={} train={} test={} social={}",
        split.user_count,
        split.item_count,
        split.train.len(),
        split.test.len(),
        split.social.len()
    );
    Ok(())
}

impl DataArgs {
    fn inputs(&self) -> Vec<(String, PathBuf)> {
        let mut v = Vec::new();
        if let Some(p) = &self.interactions {
            v.push(("interactions".to_string(), p.clone()));
        }
        if let Some(p) = &self.social {
            v.push(("social".to_string(), p.clone()));
        }
        if let Some(p) = &self.split {
            v.push(("split".to_string(), p.clone()));
        }
        v
    }

    fn check(&self) -> Result<()> {
        match (&self.split, &self.interactions, &self.social) {
            (Some(_), _, _) | (None, Some(_), Some(_)) => Ok(()),
            _ => Err(Error::Usage("give --split DIR, or both --interactions and --social".into())),
        }
    }

    fn load(&self, seed: u64) -> Result<DatasetSplit> {
        self.check()?;
        let split = match (&self.split, &self.interactions, &self.social) {
            (Some(dir), _, _) => read_split(dir)?,
            (None, Some(i), Some(s)) => {
                let raw = load_edge_lists(i, s)?;
                split_train_test(&raw, self.split_ratio, self.split_seed.unwrap_or(seed))?
            }
            _ => unreachable!("checked above"),
        };
        match self.noise_ratio {
            Some(r) if r > 0.0 => inject_interaction_noise(&split, r, seed),
            Some(r) if r < 0.0 => Err(Error::Config(format!("noise ratio must lie in [0, 1), got {r}"))),
            _ => Ok(split),
        }
    }
}

struct RunFiles {
    manifest: PathBuf,
    split: PathBuf,
    log: PathBuf,
    session: PathBuf,
    model: PathBuf,
    meta: PathBuf,
    scoring: PathBuf,
    report: PathBuf,
    histogram: PathBuf,
    metrics: PathBuf,
}

impl RunFiles {
    fn new(out: &Path) -> Self {
        RunFiles {
            manifest: out.join("manifest.txt"),
            split: out.join("split"),
            log: out.join("train_log.tsv"),
            session: out.join("session.bin"),
            model: out.join("model.bin"),
            meta: out.join("model.meta"),
            scoring: out.join("scoring_edges.txt"),
            report: out.join("denoise_report.txt"),
            histogram: out.join("denoise_histogram.csv"),
            metrics: out.join("metrics.tsv"),
        }
    }
}

fn manifest_hash(path: &Path) -> Result<Option<String>> {
    if !path.exists() {
        return Ok(None);
    }
    let text = fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    Ok(text
        .lines()
        .filter_map(|l| l.split_once('='))
        .find(|(k, _)| k.trim() == "config_hash")
        .map(|(_, v)| v.trim().to_string()))
}

/// Train into `out`, writing every artifact as it goes.
fn train_into(
    command: &str,
    cfg: &TrainConfig,
    split: &DatasetSplit,
    inputs: Vec<(String, PathBuf)>,
    out: &Path,
    timing: bool,
    resume: bool,
) -> Result<(TrainOutcome, MetricsReport)> {
    let files = RunFiles::new(out);
    let hash = config_hash(cfg);
    let mut session = TrainingSession::new(cfg.clone(), split)?;
    if resume && files.session.exists() {
        if manifest_hash(&files.manifest)?.as_deref() != Some(hash.as_str()) {
            return Err(Error::Config(format!(
                "cannot resume: {} was written with a different configuration",
                files.manifest.display()
            )));
        }
        session.restore(load_session(&files.session)?)?;
    } else {
        RunManifest {
            command: command.to_string(),
            config: cfg.clone(),
            inputs,
            out: out.to_path_buf(),
        }
        .write(&files.manifest)?;
        write_split(split, &files.split)?;
    }

    while !session.is_finished() {
        let record = session.step()?.clone();
        write(&files.log, &session.log().to_tsv(timing))?;
        let snap = session.snapshot();
        save_session(&files.session, &if timing { snap } else { snap.without_timing() })?;
        write(&files.report, &record.report.to_key_values())?;
        write(&files.histogram, &record.report.histogram_csv())?;
    }
    write(&files.log, &session.log().to_tsv(timing))?;

    let outcome = session.finish();
    save_embeddings(&files.model, &outcome.state)?;
    CheckpointMeta {
        config_hash: hash,
        epoch: outcome.best_epoch,
        metric: outcome.best_metric,
        layers: cfg.layers,
    }
    .save(&files.meta)?;
    save_edges(&files.scoring, &outcome.scoring_edges())?;
    let (pu, pi) = outcome.scoring_embeddings(split.user_count, split.item_count)?;
    let metrics = evaluate_split(&pu, &pi, split, &[10, 20])?;
    write(&files.metrics, &metrics.to_tsv())?;
    Ok((outcome, metrics))
}

fn cmd_train(a: TrainArgs) -> Result<()> {
    let cfg = a.hyper.resolve()?;
    a.data.check()?;
    let _lock = OutputLock::acquire(&a.out)?;
    let split = a.data.load(cfg.seed)?;
    let (outcome, metrics) = train_into("train", &cfg, &split, a.data.inputs(), &a.out, !a.no_timing, a.resume)?;
    println!(
        "epochs={} best_epoch={} ablation={} config_hash={}",
        outcome.log.records.len(),
        outcome.best_epoch,
        cfg.ablation,
        config_hash(&cfg)
    );
    print!("{}", metrics.to_key_values());
    Ok(())
}

/// Scoring graph for a checkpoint: explicit file, sibling file, or the
/// split's training edges.
fn scoring_graph(checkpoint: &Path, explicit: Option<&Path>, split: &DatasetSplit) -> Result<InteractionGraph> {
    let sibling = checkpoint.with_file_name("scoring_edges.txt");
    let edges = match explicit {
        Some(p) => load_edges(p)?,
        None if sibling.exists() => load_edges(&sibling)?,
        None => split.train.clone(),
    };
    InteractionGraph::new(&edges, split.user_count, split.item_count)
}

fn checkpoint_layers(checkpoint: &Path, explicit: Option<usize>) -> Result<usize> {
    if let Some(l) = explicit {
        return Ok(l);
    }
    let meta = checkpoint.with_extension("meta");
    if meta.exists() {
        Ok(CheckpointMeta::load(&meta)?.layers)
    } else {
        Ok(TrainConfig::default().layers)
    }
}

fn load_model(
    checkpoint: &Path,
    split_dir: &Path,
    scoring: Option<&Path>,
    layers: Option<usize>,
) -> Result<(DatasetSplit, crate::encoder::EmbeddingState, InteractionGraph, usize)> {
    let state = load_embeddings(checkpoint)?;
    let split = read_split(split_dir)?;
    if state.user_count() != split.user_count || state.item_count() != split.item_count {
        return Err(Error::Shape(format!(
            "checkpoint holds {} users x {} items but the split has {} x {}",
            state.user_count(),
            state.item_count(),
            split.user_count,
            split.item_count
        )));
    }
    let graph = scoring_graph(checkpoint, scoring, &split)?;
    let layers = checkpoint_layers(checkpoint, layers)?;
    Ok((split, state, graph, layers))
}

fn cmd_eval(a: EvalArgs) -> Result<()> {
    let (split, state, graph, layers) = load_model(&a.checkpoint, &a.split, a.scoring_edges.as_deref(), a.layers)?;
    let (pu, pi) = scoring_embeddings(&state, &graph, layers)?;
    let report = match a.protocol {
        ProtocolArg::AllRanking => {
            let ks = if a.k.is_empty() { vec![10, 20] } else { a.k.clone() };
            evaluate_split(&pu, &pi, &split, &ks)?
        }
        ProtocolArg::RealPlusN => {
            let ks = if a.k.is_empty() { vec![3] } else { a.k.clone() };
            real_plus_n(&pu, &pi, &split, a.n, &ks, a.seed)?
        }
    };
    let format = if a.json { FormatArg::Json } else { a.format };
    let (body, ext) = match format {
        FormatArg::Tsv => (report.to_tsv(), "tsv"),
        FormatArg::Kv => (report.to_key_values(), "txt"),
        FormatArg::Json => (report.to_json_lines(), "jsonl"),
    };
    print!("{body}");
    if let Some(out) = &a.out {
        create_dir(out)?;
        write(&out.join(format!("metrics_{}.{ext}", report.protocol.tag())), &body)?;
    }
    Ok(())
}

fn cmd_denoise_report(a: DenoiseArgs) -> Result<()> {
    let (split, state, graph, layers) = load_model(&a.checkpoint, &a.split, a.scoring_edges.as_deref(), a.layers)?;
    let defaults = DenoiseThresholds::default();
    let thresholds = DenoiseThresholds {
        beta_s: a.beta_s.unwrap_or(defaults.beta_s),
        beta_r: a.beta_r.unwrap_or(defaults.beta_r),
        sigma: a.sigma.unwrap_or(defaults.sigma),
    };
    thresholds.validate()?;
    let interaction = InteractionGraph::new(&split.train, split.user_count, split.item_count)?;
    let social = SocialNetwork::new(&split.social, split.user_count)?;
    let h = propagate_interaction(&state, &graph, layers)?;
    let (kept_social, _, srep) = denoise_social(&social, &h, &thresholds, Some(&split.social_fabricated))?;
    let enhanced = social_enhance(&h, &kept_social);
    let (_, _, irep) = denoise_interaction(&interaction, &enhanced, &h, &thresholds, Some(&split.train_fabricated))?;
    let report = srep.merge(&irep);
    create_dir(&a.out)?;
    write(&a.out.join("denoise_report.txt"), &report.to_key_values())?;
    if a.histogram {
        write(&a.out.join("denoise_histogram.csv"), &report.histogram_csv())?;
    }
    print!("{}", report.to_key_values());
    Ok(())
}

fn cmd_inject(a: InjectArgs) -> Result<()> {
    let split = read_split(&a.split)?;
    let noisy = inject_interaction_noise(&split, a.noise_ratio, a.seed)?;
    write_split(&noisy, &a.out)?;
    println!(
        "train={} fabricated={}",
        noisy.train.len(),
        noisy.fabricated_count() - split.fabricated_count()
    );
    Ok(())
}

/// `key=v1,v2;key2=v3` into per-key value lists, keys in given order.
fn parse_grid(grid: &str) -> Result<Vec<(String, Vec<String>)>> {
    let mut axes = Vec::new();
    for part in grid.split(';').map(str::trim).filter(|p| !p.is_empty()) {
        let (k, vs) = part
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("grid axis '{part}' is not 'key=v1,v2'")))?;
        let values: Vec<String> = vs
            .split(',')
            .map(|v| v.trim().to_string())
            .filter(|v| !v.is_empty())
            .collect();
        if values.is_empty() {
            return Err(Error::Config(format!("grid axis '{}' has no values", k.trim())));
        }
        axes.push((k.trim().to_string(), values));
    }
    if axes.is_empty() {
        return Err(Error::Config("the sweep grid is empty".into()));
    }
    Ok(axes)
}

/// Cartesian product of the axes, first axis slowest.
fn grid_cells(axes: &[(String, Vec<String>)]) -> Vec<Vec<(String, String)>> {
    let mut cells: Vec<Vec<(String, String)>> = vec![Vec::new()];
    for (k, values) in axes {
        cells = cells
            .into_iter()
            .flat_map(|cell| {
                values.iter().map(move |v| {
                    let mut c = cell.clone();
                    c.push((k.clone(), v.clone()));
                    c
                })
            })
            .collect();
    }
    cells
}

fn cmd_sweep(a: SweepArgs) -> Result<()> {
    let base = a.hyper.resolve()?;
    let axes = parse_grid(&a.grid)?;
    let cells = grid_cells(&axes);
    let configs: Vec<TrainConfig> = cells
        .iter()
        .map(|cell| {
            let mut cfg = base.clone();
            for (k, v) in cell {
                apply_setting(&mut cfg, k, v)?;
            }
            cfg.validate()?;
            Ok(cfg)
        })
        .collect::<Result<_>>()?;
    a.data.check()?;
    let _lock = OutputLock::acquire(&a.out)?;
    let split = a.data.load(base.seed)?;

    let mut table = String::from("cell");
    for (k, _) in &axes {
        let _ = write!(table, "\t{k}");
    }
    table.push_str("\tconfig_hash\tbest_epoch\tval_recall@20\trecall@10\tndcg@10\trecall@20\tndcg@20\n");
    for (n, (cell, cfg)) in cells.iter().zip(&configs).enumerate() {
        let dir = a.out.join(format!("cell-{n:03}"));
        create_dir(&dir)?;
        let (outcome, m) = train_into("sweep", cfg, &split, a.data.inputs(), &dir, !a.no_timing, false)?;
        let _ = write!(table, "{n}");
        for (_, v) in cell {
            let _ = write!(table, "\t{v}");
        }
        let val = outcome.best_metric.map_or_else(|| "nan".to_string(), |v| v.to_string());
        let _ = writeln!(
            table,
            "\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            config_hash(cfg),
            outcome.best_epoch,
            val,
            m.recall[0],
            m.ndcg[0],
            m.recall[1],
            m.ndcg[1]
        );
        write(&a.out.join("sweep.tsv"), &table)?;
    }
    print!("{table}");
    Ok(())
}

fn cmd_robustness(a: RobustnessArgs) -> Result<()> {
    let cfg = a.hyper.resolve()?;
    if a.ratios.iter().any(|r| !(0.0..1.0).contains(r)) {
        return Err(Error::Config("noise ratios must lie in [0, 1)".into()));
    }
    a.data.check()?;
    let _lock = OutputLock::acquire(&a.out)?;
    let split = a.data.load(cfg.seed)?;
    RunManifest {
        command: "robustness".into(),
        config: cfg.clone(),
        inputs: a.data.inputs(),
        out: a.out.clone(),
    }
    .write(&a.out.join("manifest.txt"))?;
    let rows = robustness_report(&cfg, &split, &a.ratios, a.noise_seed, &a.k)?;
    let table = retention_tsv(&rows);
    write(&a.out.join("robustness.tsv"), &table)?;
    print!("{table}");
    Ok(())
}
