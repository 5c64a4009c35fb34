//! `predcode`: generate datasets, train and evaluate next-frame predictors,
//! and run the named experiments.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use predcode::data::Dataset;
use predcode::eval::{self, EvalReport};
use predcode::gol::{self, Boundary, GenSpec};
use predcode::io::{self, EpisodeSplit};
use predcode::models::{ModelConfig, PredNetConfig, SimpleCnnConfig};
use predcode::presets::{self, PRESET_NAMES};
use predcode::training::{self, EpochRecord, TrainConfig};

#[derive(Parser)]
#[command(name = "predcode", version, about = "Next-frame prediction lab")]
struct Cli {
    /// Worker threads for matrix kernels (needs the `threading` build feature).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random Game-of-Life dataset.
    GenGol(GenGolArgs),
    /// Generate a single-pattern sequence (a glider, say).
    GenPattern(GenPatternArgs),
    /// Convert a directory of PGM/PPM frames into a dataset.
    Ingest(IngestArgs),
    /// Train a model and write its checkpoint.
    Train(TrainArgs),
    /// Score a checkpoint and/or the previous-frame baseline.
    Eval(EvalArgs),
    /// Write predicted frames next to the actual ones.
    Predict(PredictArgs),
    /// Run a named experiment end to end.
    Preset(PresetArgs),
    /// List the named experiments.
    Presets,
}

#[derive(Args)]
struct SeedArg {
    #[arg(long, env = "PREDCODE_SEED", default_value_t = 0)]
    seed: u64,
}

/// `--height`/`--width` size the board; frames are `--upscale` times larger.
#[derive(Args)]
struct GenGolArgs {
    #[arg(long, default_value_t = 1000)]
    episodes: usize,
    #[arg(long, default_value_t = 10)]
    steps: usize,
    #[arg(long, default_value_t = 128)]
    height: usize,
    #[arg(long, default_value_t = 160)]
    width: usize,
    #[arg(long, default_value_t = 0.10)]
    density: f64,
    #[arg(long, default_value_t = 1)]
    upscale: usize,
    /// Wrap the board edges instead of treating outside cells as dead.
    #[arg(long)]
    toroidal: bool,
    #[command(flatten)]
    seed: SeedArg,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GenPatternArgs {
    #[arg(long, default_value = "glider")]
    pattern: String,
    #[arg(long, default_value_t = 32)]
    height: usize,
    #[arg(long, default_value_t = 40)]
    width: usize,
    #[arg(long, default_value_t = 40)]
    frames: usize,
    /// Top-left cell of the pattern.
    #[arg(long, default_value_t = 0)]
    row: usize,
    #[arg(long, default_value_t = 0)]
    col: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long)]
    src: PathBuf,
    #[arg(long, default_value_t = 128)]
    height: usize,
    #[arg(long, default_value_t = 160)]
    width: usize,
    /// `single`, `subdirs`, or comma-separated episode lengths such as `10,12,8`.
    #[arg(long, default_value = "subdirs")]
    split: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelKind {
    SimpleCnn,
    Prednet,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long, value_enum)]
    model: ModelKind,
    #[arg(long)]
    data: PathBuf,
    /// Validation dataset; without it a share of episodes is held out.
    #[arg(long)]
    val: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    /// Filter size of the simple CNN.
    #[arg(long, default_value_t = 3)]
    kernel: usize,
    #[command(flatten)]
    seed: SeedArg,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    ckpt: Option<PathBuf>,
    #[arg(long)]
    data: PathBuf,
    /// Also score time-reversed episodes.
    #[arg(long)]
    reverse: bool,
    /// Include the previous-frame baseline.
    #[arg(long)]
    baseline: bool,
    #[arg(long)]
    report: PathBuf,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    ckpt: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Only the first N episodes.
    #[arg(long)]
    limit: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PresetArgs {
    #[arg(value_parser = clap::builder::PossibleValuesParser::new(PRESET_NAMES))]
    name: String,
    #[command(flatten)]
    seed: SeedArg,
    /// Output directory; defaults to `runs/<name>-seed<seed>`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Dataset to use instead of the preset's generated one.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
}

/// Failures carry the exit code the process should end with.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl From<anyhow::Error> for Failure {
    fn from(error: anyhow::Error) -> Self {
        let code = match error.downcast_ref::<predcode::Error>() {
            Some(predcode::Error::NonFiniteLoss { .. }) => 3,
            _ => 2,
        };
        Failure { code, error }
    }
}

impl From<predcode::Error> for Failure {
    fn from(e: predcode::Error) -> Self {
        anyhow::Error::from(e).into()
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        // matrixmultiply reads this once, on its first threaded call.
        std::env::set_var("MATMUL_NUM_THREADS", n.to_string());
    }
    let result = match cli.command {
        Command::GenGol(a) => gen_gol(a),
        Command::GenPattern(a) => gen_pattern(a),
        Command::Ingest(a) => ingest(a),
        Command::Train(a) => train(a),
        Command::Eval(a) => evaluate(a),
        Command::Predict(a) => predict(a),
        Command::Preset(a) => run_preset(a),
        Command::Presets => {
            for name in PRESET_NAMES {
                let p = presets::preset(name, 0).expect("listed preset");
                println!("{name:<16} {}", p.summary);
            }
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn load(dir: &Path) -> anyhow::Result<Dataset> {
    let (d, m) =
        io::read_dataset(dir).with_context(|| format!("loading dataset {}", dir.display()))?;
    log::info!(
        "dataset {} ({} episodes, {} frames of {}x{}x{})",
        m.name,
        m.episodes.len(),
        m.num_frames(),
        m.frame_size[0],
        m.frame_size[1],
        m.frame_size[2]
    );
    Ok(d)
}

fn print_epoch(r: &EpochRecord) {
    println!("{}", r.progress_line());
}

fn gen_gol(a: GenGolArgs) -> CmdResult {
    let spec = GenSpec {
        episodes: a.episodes,
        steps_per_episode: a.steps,
        height: a.height * a.upscale,
        width: a.width * a.upscale,
        alive_density: a.density,
        upscale_factor: a.upscale,
        seed: a.seed.seed,
        boundary: if a.toroidal {
            Boundary::Toroidal
        } else {
            Boundary::Dead
        },
    };
    let d = gol::generate_dataset(&spec)?;
    let m = io::write_dataset(&d, &a.out, Some(&spec))?;
    log::info!("config digest {}", eval::config_digest(&spec));
    println!("wrote {} frames to {}", m.num_frames(), a.out.display());
    Ok(())
}

fn gen_pattern(a: GenPatternArgs) -> CmdResult {
    let Some(pattern) = gol::Pattern::by_name(&a.pattern) else {
        let names: Vec<_> = gol::Pattern::library()
            .into_iter()
            .map(|p| p.name)
            .collect();
        return Err(anyhow::anyhow!(
            "unknown pattern `{}`; known: {}",
            a.pattern,
            names.join(", ")
        )
        .into());
    };
    if a.frames == 0 {
        return Err(anyhow::anyhow!("--frames must be at least 1").into());
    }
    let mut board = gol::place_pattern(
        &gol::Board::empty(a.height, a.width),
        &pattern,
        (a.row, a.col),
    )?;
    let mut frames = Vec::with_capacity(a.frames);
    for _ in 0..a.frames {
        frames.push(board.render());
        board = board.step();
    }
    let d = Dataset::new(pattern.name, vec![predcode::data::Episode::new(frames)]);
    let m = io::write_dataset(&d, &a.out, None)?;
    println!("wrote {} frames to {}", m.num_frames(), a.out.display());
    Ok(())
}

fn parse_split(s: &str) -> anyhow::Result<EpisodeSplit> {
    Ok(match s {
        "single" => EpisodeSplit::Single,
        "subdirs" => EpisodeSplit::Subdirectories,
        lengths => EpisodeSplit::Lengths(
            lengths
                .split(',')
                .map(|n| n.trim().parse::<usize>())
                .collect::<Result<_, _>>()
                .with_context(|| format!("bad --split `{s}`"))?,
        ),
    })
}

fn ingest(a: IngestArgs) -> CmdResult {
    let split = parse_split(&a.split)?;
    let (d, report) = io::ingest_frames(&a.src, (a.height, a.width), &split)?;
    if !report.skipped.is_empty() {
        log::warn!("skipped {} unreadable frames", report.skipped.len());
    }
    io::write_dataset(&d, &a.out, None)?;
    println!(
        "ingested {} frames in {} episodes ({} skipped) into {}",
        report.frames_read,
        report.episodes,
        report.skipped.len(),
        a.out.display()
    );
    Ok(())
}

fn history_path(ckpt: &Path) -> PathBuf {
    ckpt.with_extension("history.json")
}

fn train(a: TrainArgs) -> CmdResult {
    let data = load(&a.data)?;
    let val = a.val.as_deref().map(load).transpose()?;
    let channels = data.frame_dims()?.0;
    let model_config = match a.model {
        ModelKind::SimpleCnn => {
            let mut c = SimpleCnnConfig::with_kernel(a.kernel);
            c.in_channels = channels;
            ModelConfig::SimpleCnn(c)
        }
        ModelKind::Prednet => ModelConfig::PredNet(PredNetConfig::for_channels(channels)),
    };
    let mut config = TrainConfig::for_model(&model_config, a.seed.seed);
    if let Some(e) = a.epochs {
        config.epochs = e;
    }
    if let Some(b) = a.batch_size {
        config.batch_size = b;
    }
    if let Some(lr) = a.lr {
        config.optimizer = config.optimizer.with_lr(lr);
    }
    log::info!(
        "config digest {}",
        eval::config_digest(&(&model_config, &config))
    );
    let mut progress = print_epoch;
    let (model, mut history, _) = training::train(
        &model_config,
        &data,
        val.as_ref(),
        &config,
        Some(&mut progress),
    )?;
    io::write_checkpoint(&model, &a.out)?;
    history.checkpoint = Some(a.out.display().to_string());
    let hp = history_path(&a.out);
    std::fs::write(
        &hp,
        serde_json::to_string_pretty(&history).context("history")?,
    )
    .with_context(|| format!("writing {}", hp.display()))?;
    log::info!("trained in {:.1}s", history.wall_time_secs);
    println!("wrote {}", a.out.display());
    Ok(())
}

fn evaluate(a: EvalArgs) -> CmdResult {
    if a.ckpt.is_none() && !a.baseline {
        return Err(anyhow::anyhow!("nothing to evaluate: pass --ckpt and/or --baseline").into());
    }
    let data = load(&a.data)?;
    let model = match &a.ckpt {
        Some(p) => {
            let ck = io::read_checkpoint(p)?;
            let (c, _, _) = data.frame_dims()?;
            if ck.config.in_channels() != c {
                return Err(anyhow::anyhow!(
                    "checkpoint expects {}-channel frames, dataset has {c}",
                    ck.config.in_channels()
                )
                .into());
            }
            Some(ck.to_model()?)
        }
        None => None,
    };
    let digest = match &model {
        Some(m) => eval::config_digest(&m.config()),
        None => eval::config_digest(&presets::BASELINE_METHOD),
    };
    let full = presets::score(model.as_ref(), &data, a.reverse, &digest)?;
    let report = EvalReport {
        rows: full
            .rows
            .into_iter()
            .filter(|r| a.baseline || r.method != presets::BASELINE_METHOD)
            .collect(),
    };
    report.write(&a.report)?;
    print!("{}", report.table()?);
    Ok(())
}

fn predict(a: PredictArgs) -> CmdResult {
    let data = load(&a.data)?;
    let model = io::read_checkpoint(&a.ckpt)?.to_model()?;
    let take = a.limit.unwrap_or(data.episodes.len());
    let mut written = 0;
    for (k, ep) in data.episodes.iter().enumerate().take(take) {
        let dir = a.out.join(format!("ep{k:05}"));
        std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        let preds = model.predict_episode(ep)?;
        for (t, p) in preds.iter().enumerate() {
            let ext = if p.channels() == 1 { "pgm" } else { "ppm" };
            // Prediction i targets frame i + 1; both files share that index.
            io::write_frame(p, &dir.join(format!("pred{:04}.{ext}", t + 1)))?;
            io::write_frame(
                &ep.frames[t + 1],
                &dir.join(format!("actual{:04}.{ext}", t + 1)),
            )?;
            written += 1;
        }
    }
    println!("wrote {written} predictions to {}", a.out.display());
    Ok(())
}

fn run_preset(a: PresetArgs) -> CmdResult {
    let seed = a.seed.seed;
    let mut preset = presets::preset(&a.name, seed).expect("validated by clap");
    if let (Some(e), Some(t)) = (a.epochs, preset.train.as_mut()) {
        t.epochs = e;
    }
    let data = a.data.as_deref().map(load).transpose()?;
    if let (Some(d), Some(ModelConfig::SimpleCnn(c))) = (&data, preset.model.as_mut()) {
        c.in_channels = d.frame_dims()?.0;
    }
    let out = a
        .out
        .unwrap_or_else(|| PathBuf::from(format!("runs/{}-seed{seed}", a.name)));
    std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    log::info!(
        "preset {} ({}), config digest {}",
        preset.name,
        preset.summary,
        preset.digest()
    );
    std::fs::write(
        out.join("preset.json"),
        serde_json::to_string_pretty(&preset).context("preset")?,
    )
    .context("writing preset.json")?;
    let mut progress = print_epoch;
    let run = presets::run_preset(&preset, data, Some(&mut progress))?;
    if let (Some(m), Some(h)) = (&run.model, &run.history) {
        let ckpt = out.join("model.ckpt");
        io::write_checkpoint(m, &ckpt)?;
        let mut h = h.clone();
        h.checkpoint = Some(ckpt.display().to_string());
        std::fs::write(
            history_path(&ckpt),
            serde_json::to_string_pretty(&h).context("history")?,
        )
        .context("writing history")?;
        log::info!("trained in {:.1}s", h.wall_time_secs);
    }
    let report_path = out.join("report.txt");
    run.report.write(&report_path)?;
    print!("{}", run.report.table()?);
    Ok(())
}
