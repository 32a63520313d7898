#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use realscale::camrig::{export_rig, generate_rig, DEFAULT_RADIUS_MULT, DEFAULT_VIEW_COUNT};
use realscale::corpus::{
    generate_synthetic_corpus, load_manifest, stratified_split, FramePhase, Manifest, SyntheticConfig, INPUT_EMB,
    RENDER_EMB,
};
use realscale::embedding::{read_embeddings, Embedding};
use realscale::eval::{
    baseline_predictions, evaluate, export_scatter, load_predictions, save_predictions, BaselineMethod,
};
use realscale::geometry::{bounding_sphere, load_mesh, pipeline_volume, rescale_mesh, save_obj};
use realscale::nutrition::{energy_report, load_density_table, DensityTable};
use realscale::pipeline::{build_training_set, predict_items, EmbeddingIndex};
use realscale::scalereg::{load_checkpoint, save_checkpoint, train, Checkpoint, Mode, TrainConfig};
use realscale::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "realscale", version, about = "Recover real-world scale for single-view 3D reconstructions")]
struct Cli {
    /// Seed for every stochastic step of the command.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Only report errors.
    #[arg(long, short, global = true)]
    quiet: bool,

    /// More logging; repeat for debug output.
    #[arg(long, short, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Export the spherical camera rig as JSON.
    Poses(PosesArgs),
    /// Print the enclosed volume of a mesh.
    Volume(VolumeArgs),
    /// Rescale a mesh by a volume scale factor.
    Rescale(RescaleArgs),
    /// Generate a synthetic corpus (meshes, embeddings, manifest).
    GenSynthetic(GenArgs),
    /// Train the scale regressor.
    Train(TrainArgs),
    /// Predict volumes with a trained checkpoint.
    Predict(PredictArgs),
    /// Score predictions against ground truth.
    Evaluate(EvaluateArgs),
    /// Mean-volume baseline predictions.
    Baseline(BaselineArgs),
    /// Score predicted energy using a density table.
    Energy(EnergyArgs),
}

#[derive(Args, Debug, Serialize)]
struct PosesArgs {
    /// Comma-separated polar angles in degrees.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_values_t = vec![-45.0, 0.0, 45.0])]
    polar: Vec<f64>,
    #[arg(long, default_value_t = DEFAULT_VIEW_COUNT)]
    count: usize,
    /// Absolute camera distance.
    #[arg(long, conflicts_with = "mesh")]
    radius: Option<f64>,
    /// Camera distance as a multiple of the mesh's bounding radius.
    #[arg(long, default_value_t = DEFAULT_RADIUS_MULT, requires = "mesh")]
    radius_mult: f64,
    #[arg(long)]
    mesh: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct VolumeArgs {
    mesh: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct RescaleArgs {
    #[arg(long)]
    mesh: PathBuf,
    /// Volume scale factor.
    #[arg(long, required_unless_present = "prediction", conflicts_with = "prediction", allow_hyphen_values = true)]
    factor: Option<f64>,
    /// Predictions file; the factor is taken from the record for --item.
    #[arg(long, requires = "item")]
    prediction: Option<PathBuf>,
    #[arg(long)]
    item: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct GenArgs {
    #[arg(long, default_value_t = 250)]
    n: usize,
    #[arg(long, default_value_t = 4)]
    categories: usize,
    #[arg(long, default_value_t = 5.0)]
    vmin: f64,
    #[arg(long, default_value_t = 1500.0)]
    vmax: f64,
    #[arg(long, default_value_t = 0.1)]
    sigma: f64,
    #[arg(long, default_value_t = DEFAULT_VIEW_COUNT)]
    views: usize,
    #[arg(long, default_value_t = 3)]
    frames: usize,
    #[arg(long, default_value_t = realscale::embedding::DEFAULT_DIM)]
    dim: usize,
    #[arg(long, default_value = "synthetic")]
    name: String,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct EmbeddingArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Input-image embeddings [default: <manifest dir>/embeddings/input.emb]
    #[arg(long)]
    input_emb: Option<PathBuf>,
    /// Render embeddings [default: <manifest dir>/embeddings/render.emb]
    #[arg(long)]
    render_emb: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct SplitArgs {
    #[arg(long, default_value_t = 0.2)]
    test_fraction: f64,
    /// Seed of the train/test split [default: the manifest's seed]
    #[arg(long)]
    split_seed: Option<u64>,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum ModeArg {
    Pair,
    InputOnly,
    RenderOnly,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Pair => Mode::Pair,
            ModeArg::InputOnly => Mode::InputOnly,
            ModeArg::RenderOnly => Mode::RenderOnly,
        }
    }
}

#[derive(Args, Debug, Serialize)]
struct TrainArgs {
    #[command(flatten)]
    embeddings: EmbeddingArgs,
    #[command(flatten)]
    split: SplitArgs,
    #[arg(long, value_enum, default_value_t = ModeArg::Pair)]
    mode: ModeArg,
    #[arg(long, default_value_t = 300)]
    epochs: usize,
    #[arg(long, default_value_t = 64)]
    batch: usize,
    #[arg(long, default_value_t = 1e-4)]
    lr: f64,
    #[arg(long, default_value_t = 0.7)]
    lr_decay: f64,
    #[arg(long, default_value_t = 10)]
    lr_step: usize,
    #[arg(long, value_delimiter = ',', default_values_t = vec![512, 128])]
    hidden: Vec<usize>,
    /// Frames sampled per training item.
    #[arg(long, default_value_t = 10)]
    frames_per_item: usize,
    /// Checkpoint path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum SplitSel {
    Train,
    Test,
    All,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum FrameSel {
    First,
    Random,
}

#[derive(Args, Debug, Serialize)]
struct PredictArgs {
    #[arg(long)]
    ckpt: PathBuf,
    #[command(flatten)]
    embeddings: EmbeddingArgs,
    #[command(flatten)]
    split_args: SplitArgs,
    /// Rendered views averaged per item.
    #[arg(long, default_value_t = DEFAULT_VIEW_COUNT)]
    m: usize,
    #[arg(long, value_enum, default_value_t = SplitSel::Test)]
    split: SplitSel,
    /// Which input frame to use per item.
    #[arg(long, value_enum, default_value_t = FrameSel::First)]
    frame: FrameSel,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct EvaluateArgs {
    #[arg(long)]
    predictions: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
    /// Method name recorded in the report.
    #[arg(long, default_value = "real-scale")]
    method: String,
    #[arg(long)]
    out: PathBuf,
    /// Optional scatter CSV of ground truth against estimates.
    #[arg(long)]
    scatter: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum BaselineArg {
    DatasetMean,
    CategoryMean,
}

#[derive(Args, Debug, Serialize)]
struct BaselineArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[command(flatten)]
    split: SplitArgs,
    #[arg(long, value_enum, default_value_t = BaselineArg::DatasetMean)]
    method: BaselineArg,
    /// Predictions file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct EnergyArgs {
    #[arg(long)]
    predictions: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
    /// Density table JSON [default: the bundled sample table]
    #[arg(long)]
    table: Option<PathBuf>,
    /// Optional JSON object of ground-truth kcal per item id.
    #[arg(long)]
    gt_energy: Option<PathBuf>,
    #[arg(long, default_value = "real-scale")]
    method: String,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match (cli.quiet, cli.verbose) {
        (true, _) => "error",
        (false, 0) => "warn",
        (false, 1) => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 2 } else { 1 })
        }
    }
}

fn run(cli: &Cli) -> Result<()> {
    let started = Instant::now();
    let seed = cli.seed;
    let (name, out, config) = match &cli.command {
        Command::Poses(a) => ("poses", cmd_poses(a)?, serde_json::to_value(a)?),
        Command::Volume(a) => return cmd_volume(a),
        Command::Rescale(a) => ("rescale", cmd_rescale(a)?, serde_json::to_value(a)?),
        Command::GenSynthetic(a) => ("gen-synthetic", cmd_gen(a, seed)?, serde_json::to_value(a)?),
        Command::Train(a) => ("train", cmd_train(a, seed)?, serde_json::to_value(a)?),
        Command::Predict(a) => ("predict", cmd_predict(a, seed)?, serde_json::to_value(a)?),
        Command::Evaluate(a) => ("evaluate", cmd_evaluate(a)?, serde_json::to_value(a)?),
        Command::Baseline(a) => ("baseline", cmd_baseline(a)?, serde_json::to_value(a)?),
        Command::Energy(a) => ("energy", cmd_energy(a)?, serde_json::to_value(a)?),
    };
    write_run_log(&out, name, config, seed, started)
}

/// Records the resolved configuration next to the command's output.
fn write_run_log(out_dir: &Path, command: &str, config: serde_json::Value, seed: u64, started: Instant) -> Result<()> {
    let finished = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let log = serde_json::json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "seed": seed,
        "config": config,
        "wall_time_s": started.elapsed().as_secs_f64(),
        "finished_unix": finished,
    });
    let path = out_dir.join("run.json");
    fs::write(&path, serde_json::to_string_pretty(&log)? + "\n")
        .map_err(|e| Error::Io { context: format!("writing {}", path.display()), source: e })
}

fn parent_dir(path: &Path) -> PathBuf {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

fn ensure_parent(path: &Path) -> Result<PathBuf> {
    let dir = parent_dir(path);
    fs::create_dir_all(&dir).map_err(|e| Error::Io { context: format!("creating {}", dir.display()), source: e })?;
    Ok(dir)
}

/// Missing user-named files are a usage problem, not an internal failure.
fn require_file(path: &Path, what: &str) -> Result<()> {
    if !path.is_file() {
        return Err(Error::Domain(format!("{what} file {} does not exist", path.display())));
    }
    Ok(())
}

fn cmd_poses(a: &PosesArgs) -> Result<PathBuf> {
    let radius = match (&a.mesh, a.radius) {
        (Some(mesh), _) => {
            require_file(mesh, "mesh")?;
            a.radius_mult * bounding_sphere(&load_mesh(mesh)?).1
        }
        (None, Some(r)) => r,
        (None, None) => DEFAULT_RADIUS_MULT,
    };
    let rig = generate_rig(&a.polar, a.count, radius)?;
    let dir = ensure_parent(&a.out)?;
    export_rig(&rig, &a.out)?;
    Ok(dir)
}

fn cmd_volume(a: &VolumeArgs) -> Result<()> {
    require_file(&a.mesh, "mesh")?;
    println!("{:.6} mL", pipeline_volume(&load_mesh(&a.mesh)?)?);
    Ok(())
}

fn cmd_rescale(a: &RescaleArgs) -> Result<PathBuf> {
    require_file(&a.mesh, "mesh")?;
    let factor = match (a.factor, &a.prediction, &a.item) {
        (Some(f), _, _) => f,
        (None, Some(path), Some(item)) => {
            require_file(path, "predictions")?;
            load_predictions(path)?
                .into_iter()
                .find(|p| &p.item_id == item)
                .map(|p| p.v_scale_hat)
                .ok_or_else(|| Error::Domain(format!("no prediction for item {item}")))?
        }
        _ => return Err(Error::Domain("either --factor or --prediction with --item is required".into())),
    };
    let mesh = rescale_mesh(&load_mesh(&a.mesh)?, factor)?;
    let dir = ensure_parent(&a.out)?;
    save_obj(&mesh, &a.out)?;
    Ok(dir)
}

fn cmd_gen(a: &GenArgs, seed: u64) -> Result<PathBuf> {
    let cfg = SyntheticConfig {
        dataset_name: a.name.clone(),
        n_items: a.n,
        categories: a.categories,
        volume_range_ml: (a.vmin, a.vmax),
        noise_sigma: a.sigma,
        views_per_frame: a.views,
        frames_per_item: a.frames,
        dim: a.dim,
        seed,
    };
    let manifest = generate_synthetic_corpus(&cfg, &a.out)?;
    log::info!("wrote {} items to {}", manifest.items.len(), a.out.display());
    Ok(a.out.clone())
}

struct Loaded {
    manifest: Manifest,
    embeddings: EmbeddingIndex,
}

fn load_inputs(a: &EmbeddingArgs, mode: Mode) -> Result<Loaded> {
    require_file(&a.manifest, "manifest")?;
    let manifest = load_manifest(&a.manifest)?;
    let base = parent_dir(&a.manifest);
    let read = |given: &Option<PathBuf>, default: &str, what: &str| -> Result<Vec<Embedding>> {
        let path = given.clone().unwrap_or_else(|| base.join(default));
        require_file(&path, what)?;
        read_embeddings(&path)
    };
    let inputs = if mode.needs_inputs() { read(&a.input_emb, INPUT_EMB, "input embedding")? } else { Vec::new() };
    // input-only training reuses the pair layout when renders are at hand
    let renders_default = base.join(RENDER_EMB);
    let renders = if mode.needs_renders() || a.render_emb.is_some() || renders_default.is_file() {
        read(&a.render_emb, RENDER_EMB, "render embedding")?
    } else {
        Vec::new()
    };
    let embeddings = EmbeddingIndex::new(inputs, renders, manifest.dim)?;
    Ok(Loaded { manifest, embeddings })
}

fn split_ids(manifest: &Manifest, a: &SplitArgs) -> Result<realscale::corpus::Split> {
    stratified_split(manifest, a.test_fraction, a.split_seed.unwrap_or(manifest.seed))
}

fn cmd_train(a: &TrainArgs, seed: u64) -> Result<PathBuf> {
    let mode = Mode::from(a.mode);
    let cfg = TrainConfig {
        epochs: a.epochs,
        batch_size: a.batch,
        base_lr: a.lr,
        lr_decay: a.lr_decay,
        lr_step_epochs: a.lr_step,
        seed,
        mode,
        hidden: a.hidden.clone(),
    };
    cfg.validate()?;
    let loaded = load_inputs(&a.embeddings, mode)?;
    let split = split_ids(&loaded.manifest, &a.split)?;
    let set = build_training_set(&loaded.manifest, &split.train, &loaded.embeddings, mode, a.frames_per_item, seed)?;
    log::info!("training {mode} regressor on {} samples from {} items", set.len(), split.train.len());
    let outcome = train(&set, &cfg)?;
    if let Some(last) = outcome.history.last() {
        log::info!("final epoch loss {last:.6}");
    }
    let dir = ensure_parent(&a.out)?;
    save_checkpoint(&Checkpoint { params: outcome.params, config: cfg, history: outcome.history }, &a.out)?;
    Ok(dir)
}

fn cmd_predict(a: &PredictArgs, seed: u64) -> Result<PathBuf> {
    if a.m == 0 {
        return Err(Error::Domain("--m must be at least 1".into()));
    }
    require_file(&a.ckpt, "checkpoint")?;
    let ckpt = load_checkpoint(&a.ckpt)?;
    let loaded = load_inputs(&a.embeddings, ckpt.params.mode)?;
    let ids = match a.split {
        SplitSel::All => loaded.manifest.all_ids(),
        SplitSel::Train => split_ids(&loaded.manifest, &a.split_args)?.train,
        SplitSel::Test => split_ids(&loaded.manifest, &a.split_args)?.test,
    };
    let phase = match a.frame {
        FrameSel::First => FramePhase::Inference,
        FrameSel::Random => FramePhase::InferenceRandom,
    };
    let preds = predict_items(&ckpt.params, &loaded.manifest, &ids, &loaded.embeddings, a.m, phase, seed)?;
    let dir = ensure_parent(&a.out)?;
    save_predictions(&preds, &a.out)?;
    Ok(dir)
}

fn cmd_evaluate(a: &EvaluateArgs) -> Result<PathBuf> {
    require_file(&a.predictions, "predictions")?;
    require_file(&a.manifest, "manifest")?;
    let preds = load_predictions(&a.predictions)?;
    let manifest = load_manifest(&a.manifest)?;
    let ids: Vec<String> = preds.iter().map(|p| p.item_id.clone()).collect();
    let report = evaluate(&preds, &manifest, &ids, &a.method)?;
    let dir = ensure_parent(&a.out)?;
    report.save(&a.out)?;
    if let Some(path) = &a.scatter {
        ensure_parent(path)?;
        export_scatter(&preds, &manifest, path)?;
    }
    println!("{}", serde_json::to_string(&report)?);
    Ok(dir)
}

fn cmd_baseline(a: &BaselineArgs) -> Result<PathBuf> {
    require_file(&a.manifest, "manifest")?;
    let manifest = load_manifest(&a.manifest)?;
    let split = split_ids(&manifest, &a.split)?;
    let method = match a.method {
        BaselineArg::DatasetMean => BaselineMethod::DatasetMean,
        BaselineArg::CategoryMean => BaselineMethod::CategoryMean,
    };
    let preds = baseline_predictions(&manifest, &split.train, &split.test, method)?;
    let dir = ensure_parent(&a.out)?;
    save_predictions(&preds, &a.out)?;
    Ok(dir)
}

fn cmd_energy(a: &EnergyArgs) -> Result<PathBuf> {
    require_file(&a.predictions, "predictions")?;
    require_file(&a.manifest, "manifest")?;
    let table = match &a.table {
        Some(path) => {
            require_file(path, "density table")?;
            load_density_table(path)?
        }
        None => DensityTable::sample(),
    };
    let gt_energy: Option<BTreeMap<String, f64>> = match &a.gt_energy {
        Some(path) => {
            require_file(path, "ground-truth energy")?;
            let text = fs::read_to_string(path)
                .map_err(|e| Error::Io { context: format!("reading {}", path.display()), source: e })?;
            Some(serde_json::from_str(&text)?)
        }
        None => None,
    };
    let preds = load_predictions(&a.predictions)?;
    let manifest = load_manifest(&a.manifest)?;
    let report = energy_report(&preds, &manifest, &table, gt_energy.as_ref(), &a.method)?;
    let dir = ensure_parent(&a.out)?;
    report.save(&a.out)?;
    Ok(dir)
}
