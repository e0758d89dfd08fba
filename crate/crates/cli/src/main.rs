//! `pumfa` command-line entry point.
//!
//! Exit codes: 0 on success, 1 on usage errors, 2 on runtime failures.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use log::info;
use pumfa::geometry::io::{read_cloud, write_cloud};
use pumfa::geometry::add_gaussian_noise;
use pumfa::network::Model;
use pumfa::pipeline::attention::DEFAULT_TOP_K;
use pumfa::pipeline::dataset::MANIFEST;
use pumfa::pipeline::inference::passes_for;
use pumfa::pipeline::{
    dump_attention, evaluate, generate_dataset, read_dataset, upsample_to_ratio, write_dataset, PipelineConfig, Profile, Trainer,
};
use pumfa::tensor::checkpoint::Checkpoint;
use rand::SeedableRng;

#[derive(Parser, Debug)]
#[command(name = "pumfa", version, about = "Point cloud upsampling with multi-scale feature attention")]
#[command(arg_required_else_help = true)]
struct Cli {
    /// TOML file overriding the profile's settings.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Base settings: `paper` (full size) or `desk` (laptop scale).
    #[arg(long, global = true, default_value = "paper")]
    profile: Profile,
    /// Overrides both the training and the evaluation seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample training patch pairs and write them as XYZ files plus a manifest.
    GenData {
        /// Output directory; defaults to `data.dir`.
        #[arg(long = "out")]
        out: Option<PathBuf>,
    },
    /// Train a model and write its checkpoint.
    Train {
        /// Dataset directory from `gen-data`; defaults to `data.dir` when it
        /// holds a manifest, otherwise patches are generated in memory.
        #[arg(long = "in")]
        input: Option<PathBuf>,
        /// Checkpoint path; defaults to `train.checkpoint`.
        #[arg(long)]
        ckpt: Option<PathBuf>,
        /// Continue from the checkpoint instead of starting over.
        #[arg(long)]
        resume: bool,
    },
    /// Upsample a point cloud file.
    Upsample {
        #[command(flatten)]
        io: Io,
        #[command(flatten)]
        model: ModelArgs,
        /// Total ratio; a power of the model ratio.
        #[arg(long)]
        ratio: Option<usize>,
        /// Gaussian noise added to the input first.
        #[arg(long = "noise-level")]
        noise_level: Option<f64>,
    },
    /// Score a model on the evaluation meshes across noise levels.
    Eval {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        ratio: Option<usize>,
        /// Replaces `eval.noise_levels`; repeatable.
        #[arg(long = "noise-level")]
        noise_level: Vec<f64>,
        /// CSV report path; defaults to `eval.report`.
        #[arg(long = "out")]
        out: Option<PathBuf>,
    },
    /// Rank input points by received attention and write per-layer overlays.
    AttnDump {
        #[command(flatten)]
        io: Io,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long = "top-k", default_value_t = DEFAULT_TOP_K)]
        top_k: usize,
        /// Comma-separated head indices; defaults to the first three.
        #[arg(long, value_delimiter = ',')]
        heads: Vec<usize>,
    },
}

#[derive(Args, Debug)]
struct Io {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long = "out")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ModelArgs {
    /// Checkpoint path; defaults to `train.checkpoint`.
    #[arg(long)]
    ckpt: Option<PathBuf>,
}

/// Distinguishes bad invocations from failures while running.
enum Failure {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

impl From<pumfa::Error> for Failure {
    fn from(e: pumfa::Error) -> Self {
        Failure::Runtime(e.into())
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(1);
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

/// `PUMFA_THREADS` caps the worker pool.
fn configure_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("PUMFA_THREADS") {
        let n: usize = v.parse().with_context(|| format!("PUMFA_THREADS={v:?} is not a thread count"))?;
        if n == 0 {
            bail!("PUMFA_THREADS must be positive");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    let mut config = PipelineConfig::load(cli.profile, cli.config.as_deref()).map_err(|e| Failure::Usage(e.into()))?;
    if let Some(seed) = cli.seed {
        config.train.seed = seed;
        config.eval.seed = seed;
    }
    match cli.command {
        Command::GenData { out } => {
            let dir = out.unwrap_or_else(|| config.data.dir.clone());
            echo(&config);
            let pairs = generate_dataset(&config.data, config.model.points, config.model.ratio, config.train.seed)?;
            write_dataset(&dir, &pairs)?;
            info!("wrote {} patch pairs to {}", pairs.len(), dir.display());
        }
        Command::Train { input, ckpt, resume } => {
            let ckpt = ckpt.unwrap_or_else(|| config.train.checkpoint.clone());
            echo(&config);
            let dataset = match input.or_else(|| Some(config.data.dir.clone()).filter(|d| d.join(MANIFEST).exists())) {
                Some(dir) => {
                    info!("reading patch pairs from {}", dir.display());
                    read_dataset(&dir)?
                }
                None => generate_dataset(&config.data, config.model.points, config.model.ratio, config.train.seed)?,
            };
            let mut trainer = if resume {
                Trainer::resume(&config, dataset, &ckpt)?
            } else {
                Trainer::new(&config, dataset)?
            };
            info!(
                "training {} parameters for {} steps ({} per epoch)",
                trainer.model().parameter_count(),
                trainer.total_steps(),
                trainer.steps_per_epoch()
            );
            trainer.run(Some(&ckpt), &mut |_| {})?;
            info!("checkpoint written to {}", ckpt.display());
        }
        Command::Upsample { io, model, ratio, noise_level } => {
            let model = load_model(&mut config, model.ckpt)?;
            let ratio = check_ratio(&model, ratio)?;
            echo(&config);
            let mut cloud = read_cloud(&io.input)?;
            if let Some(level) = noise_level {
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(config.eval.seed);
                cloud = add_gaussian_noise(&cloud, level, &mut rng)?;
            }
            let dense = upsample_to_ratio(&model, &cloud, ratio, config.eval.coverage_factor)?;
            write_cloud(&io.out, &dense)?;
            info!("{} → {} points written to {}", cloud.len(), dense.len(), io.out.display());
        }
        Command::Eval { model, ratio, noise_level, out } => {
            let model = load_model(&mut config, model.ckpt)?;
            let ratio = check_ratio(&model, ratio)?;
            if !noise_level.is_empty() {
                config.eval.noise_levels = noise_level;
            }
            if let Some(out) = out {
                config.eval.report = out;
            }
            config.validate().map_err(|e| Failure::Usage(e.into()))?;
            echo(&config);
            let report = evaluate(&model, &config.eval, ratio)?;
            print!("{}", report.to_table());
            std::fs::write(&config.eval.report, report.to_csv()).with_context(|| format!("writing {}", config.eval.report.display()))?;
            info!("report written to {}", config.eval.report.display());
        }
        Command::AttnDump { io, model, top_k, heads } => {
            let model = load_model(&mut config, model.ckpt)?;
            let heads = if heads.is_empty() {
                (0..model.config().heads.min(3)).collect()
            } else {
                heads
            };
            if let Some(h) = heads.iter().find(|&&h| h >= model.config().heads) {
                return Err(Failure::Usage(anyhow::anyhow!("head {h} out of range; the model has {} heads", model.config().heads)));
            }
            echo(&config);
            let cloud = read_cloud(&io.input)?;
            let report = dump_attention(&model, &cloud, &heads, top_k, Some(&io.out))?;
            for layer in &report.layers {
                for h in &layer.heads {
                    let top: Vec<String> = h.top.iter().map(usize::to_string).collect();
                    println!("layer {} head {}: {}", layer.layer, h.head, top.join(" "));
                }
            }
            info!("{} overlays written to {}", report.overlays.len(), io.out.display());
        }
    }
    Ok(())
}

/// Loads the checkpoint; its model settings replace the configured ones.
fn load_model(config: &mut PipelineConfig, ckpt: Option<PathBuf>) -> Result<Model, Failure> {
    let path = ckpt.unwrap_or_else(|| config.train.checkpoint.clone());
    let model = read_model(&path)?;
    config.model = *model.config();
    Ok(model)
}

fn read_model(path: &Path) -> anyhow::Result<Model> {
    let ck = Checkpoint::read(path).with_context(|| format!("reading checkpoint {}", path.display()))?;
    Ok(Model::from_checkpoint(&ck)?)
}

fn check_ratio(model: &Model, ratio: Option<usize>) -> Result<usize, Failure> {
    let ratio = ratio.unwrap_or(model.config().ratio);
    passes_for(model.config().ratio, ratio).map_err(|e| Failure::Usage(e.into()))?;
    Ok(ratio)
}

fn echo(config: &PipelineConfig) {
    eprintln!("# resolved configuration\n{}", config.to_toml());
}
