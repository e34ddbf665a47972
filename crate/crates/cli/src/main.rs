use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use dwcgp_core::dwcgp::{EstimatorMode, LengthAggregation};
use dwcgp_core::{PipelineConfig, ScaleAggregation, WindowSpec};

mod commands;

#[derive(Parser, Debug)]
#[command(name = "dwcgp", version, about = "Roadside grass biomass and fire risk from images")]
struct Cli {
    /// TOML configuration; flags given on the command line override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for every file a command writes.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads; the default uses every core.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Also write chainage against average DWCGP as CSV.
    #[arg(long, global = true)]
    emit_plot_data: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train the grass pixel classifier on a corpus directory.
    Train(TrainArgs),
    /// Write the grass mask of an image.
    Segment(ImageArgs),
    /// Write the dominant Gabor orientation of every pixel.
    Orient(ImageArgs),
    /// DWCGP of one image or window.
    Estimate(EstimateArgs),
    /// Run an experiment over a dataset manifest.
    Evaluate(EvaluateArgs),
    /// Profile a sequence of road frames and list fire-prone stretches.
    Firerisk(FireriskArgs),
    /// Render a synthetic corpus with ground truth.
    Synth(SynthArgs),
}

#[derive(Args, Debug, Clone, Default)]
struct EstimatorFlags {
    /// Trained model file.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long)]
    region_width: Option<usize>,
    #[arg(long, value_enum)]
    length_agg: Option<LengthArg>,
    #[arg(long, value_enum)]
    scale_agg: Option<ScaleArg>,
    /// Grass probability threshold.
    #[arg(long)]
    threshold: Option<f64>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Directory with `grass/`, `nongrass/` swatches and/or `scenes/` image and mask pairs.
    corpus: PathBuf,
    /// Labeled pixels drawn from each scene.
    #[arg(long, default_value_t = 150)]
    per_image: usize,
    /// Where to write the model; defaults to `<out>/model.txt`.
    #[arg(long)]
    model_out: Option<PathBuf>,
    #[arg(long)]
    max_epochs: Option<usize>,
}

#[derive(Args, Debug)]
struct ImageArgs {
    image: PathBuf,
    #[command(flatten)]
    flags: EstimatorFlags,
}

#[derive(Args, Debug)]
struct EstimateArgs {
    image: PathBuf,
    /// Window as `x,y,width,height`.
    #[arg(long, value_parser = parse_window)]
    window: Option<WindowSpec>,
    /// Calibration factor; when given, biomass in tonnes/ha is printed too.
    #[arg(long)]
    calibration: Option<f64>,
    #[command(flatten)]
    flags: EstimatorFlags,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    /// Dataset manifest; the bundled field table is used when absent.
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ExperimentArg::BaselineCompare)]
    experiment: ExperimentArg,
    #[command(flatten)]
    flags: EstimatorFlags,
}

#[derive(Args, Debug)]
struct FireriskArgs {
    /// Directory of frame images, processed in file name order.
    frames: PathBuf,
    /// CSV with `frame_id,chainage` columns; ids are file stems.
    #[arg(long)]
    chainage: Option<PathBuf>,
    #[arg(long)]
    window_threshold: Option<f64>,
    #[arg(long)]
    frame_threshold: Option<f64>,
    #[command(flatten)]
    flags: EstimatorFlags,
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// TOML file with `[[scenes]]` tables; missing keys take defaults.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Scenes drawn from the default generator when no spec file is given.
    #[arg(long, default_value_t = 60)]
    count: usize,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum ModeArg {
    Dwcgp,
    Vocgp,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum LengthArg {
    Longest,
    Sum,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum ScaleArg {
    Max,
    Average,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum ExperimentArg {
    BaselineCompare,
    RotationSweep,
    WidthSweep,
    GaborModeGrid,
    All,
}

fn parse_window(s: &str) -> Result<WindowSpec, String> {
    let v: Vec<usize> = s
        .split(',')
        .map(|p| p.trim().parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|e| format!("window must be x,y,width,height: {e}"))?;
    match v[..] {
        [x, y, w, h] => Ok(WindowSpec::new(x, y, w, h)),
        _ => Err("window must have four comma separated values".into()),
    }
}

impl EstimatorFlags {
    fn apply(&self, cfg: &mut PipelineConfig) {
        if let Some(m) = &self.model {
            cfg.model.path = Some(m.clone());
        }
        if let Some(m) = self.mode {
            cfg.dwcgp.mode = match m {
                ModeArg::Dwcgp => EstimatorMode::Dwcgp,
                ModeArg::Vocgp => EstimatorMode::Vocgp,
            };
        }
        if let Some(w) = self.region_width {
            cfg.dwcgp.region_width = w;
        }
        if let Some(l) = self.length_agg {
            cfg.dwcgp.length_agg = match l {
                LengthArg::Longest => LengthAggregation::Longest,
                LengthArg::Sum => LengthAggregation::Sum,
            };
        }
        if let Some(s) = self.scale_agg {
            cfg.gabor.scale_aggregation = match s {
                ScaleArg::Max => ScaleAggregation::Max,
                ScaleArg::Average => ScaleAggregation::Average,
            };
        }
        if let Some(t) = self.threshold {
            cfg.model.threshold = t;
        }
    }
}

/// Settings shared by every command after flags are merged into the config.
pub struct Ctx {
    pub config: PipelineConfig,
    pub out: PathBuf,
    pub emit_plot_data: bool,
}

fn effective_config(cli: &Cli) -> anyhow::Result<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p).with_context(|| format!("loading config {}", p.display()))?,
        None => PipelineConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    match &cli.command {
        Command::Segment(a) | Command::Orient(a) => a.flags.apply(&mut cfg),
        Command::Estimate(a) => a.flags.apply(&mut cfg),
        Command::Evaluate(a) => a.flags.apply(&mut cfg),
        Command::Firerisk(a) => {
            a.flags.apply(&mut cfg);
            if let Some(t) = a.window_threshold {
                cfg.risk.window_threshold = t;
            }
            if let Some(t) = a.frame_threshold {
                cfg.risk.frame_threshold = t;
            }
        }
        Command::Train(a) => {
            if let Some(e) = a.max_epochs {
                cfg.training.max_epochs = e;
            }
        }
        Command::Synth(_) => {}
    }
    cfg.validate().context("invalid configuration")?;
    Ok(cfg)
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    if let Some(n) = cli.threads {
        if n == 0 {
            bail!("--threads must be at least 1");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let config = effective_config(&cli)?;
    std::fs::create_dir_all(&cli.out).with_context(|| format!("creating {}", cli.out.display()))?;
    commands::write_text(&cli.out.join("effective_config.toml"), &config.to_toml()?)?;
    let ctx = Ctx {
        config,
        out: cli.out.clone(),
        emit_plot_data: cli.emit_plot_data,
    };
    match &cli.command {
        Command::Train(a) => commands::train(&ctx, &a.corpus, a.per_image, a.model_out.as_deref()),
        Command::Segment(a) => commands::segment(&ctx, &a.image),
        Command::Orient(a) => commands::orient(&ctx, &a.image),
        Command::Estimate(a) => commands::estimate(&ctx, &a.image, a.window.as_ref(), a.calibration),
        Command::Evaluate(a) => commands::evaluate(&ctx, a.manifest.as_deref(), a.experiment),
        Command::Firerisk(a) => commands::firerisk(&ctx, &a.frames, a.chainage.as_deref()),
        Command::Synth(a) => commands::synth(&ctx, a.spec.as_deref(), a.count),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

/// File stem used to name per-image outputs.
fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "image".into())
}
