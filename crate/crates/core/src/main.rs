use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use avfuse::backbone::{EmbeddingTap, ModelKind};
use avfuse::config::RunConfig;
use avfuse::data_io::{checkpoint_kind, load_backbone, load_fusion, parse_manifest, save_backbone, save_fusion, EmbeddingCache, Split};
use avfuse::dsp::SpectrogramKind;
use avfuse::fusion::{FusionMethod, Modality};
use avfuse::pipeline;
use avfuse::Error;

#[derive(Parser)]
#[command(name = "avfuse", version, about = "Audio-visual scene classification with two-phase training")]
struct Cli {
    /// More log output (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// key = value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory receiving the effective config (default: next to the output).
    #[arg(long)]
    run_dir: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct TrainFlags {
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    mixup_alpha: Option<f64>,
    #[arg(long)]
    no_mixup: bool,
    #[arg(long)]
    lambda: Option<f64>,
}

fn parse_with<T: std::str::FromStr<Err = Error>>(s: &str) -> Result<T, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Subcommand)]
enum Command {
    /// Compute delta-stacked spectrograms for every clip in a manifest.
    Extract {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        out_cache: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', value_parser = parse_with::<SpectrogramKind>)]
        features: Option<Vec<SpectrogramKind>>,
        /// Worker threads (0 = one per logical core).
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Train one backbone and save it frozen.
    TrainPhase1 {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_parser = parse_with::<ModelKind>)]
        model: ModelKind,
        /// Spectrogram cache (audio models).
        #[arg(long)]
        cache: Option<PathBuf>,
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        out_checkpoint: Option<PathBuf>,
        #[command(flatten)]
        train: TrainFlags,
    },
    /// Run the five backbones and write their embeddings.
    ExportEmbeddings {
        #[command(flatten)]
        common: Common,
        #[arg(long, num_args = 1.., required = true)]
        checkpoints: Vec<PathBuf>,
        #[arg(long, value_delimiter = ',', value_parser = parse_with::<EmbeddingTap>)]
        tap: Option<Vec<EmbeddingTap>>,
        /// Spectrogram cache written by `extract`.
        #[arg(long)]
        cache: Option<PathBuf>,
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        out_cache: Option<PathBuf>,
    },
    /// Train a fusion layer and classifier on exported embeddings.
    TrainPhase2 {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_parser = parse_with::<FusionMethod>)]
        fusion: Option<FusionMethod>,
        #[arg(long, value_parser = parse_with::<Modality>)]
        mode: Option<Modality>,
        /// Embedding cache written by `export-embeddings`.
        #[arg(long)]
        cache: Option<PathBuf>,
        #[arg(long)]
        out_checkpoint: Option<PathBuf>,
        #[command(flatten)]
        train: TrainFlags,
    },
    /// Evaluate trained fusion checkpoints and write reports.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long, num_args = 1.., required = true)]
        checkpoint: Vec<PathBuf>,
        #[arg(long)]
        cache: Option<PathBuf>,
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Only evaluate the checkpoint trained for this mode.
        #[arg(long, value_parser = parse_with::<Modality>)]
        mode: Option<Modality>,
        #[arg(long)]
        report_dir: Option<PathBuf>,
        #[arg(long, default_value = "eval", value_parser = parse_with::<Split>)]
        split: Split,
    },
}

enum Failure {
    Usage(String),
    Runtime(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Runtime(e)
    }
}

fn usage(e: Error) -> Failure {
    Failure::Usage(e.to_string())
}

fn load_config(common: &Common) -> Result<RunConfig, Failure> {
    let mut cfg = RunConfig::load(common.config.as_deref()).map_err(usage)?;
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn apply_train_flags(cfg: &mut RunConfig, t: &TrainFlags, phase1: bool) {
    if let Some(e) = t.epochs {
        if phase1 {
            cfg.phase1_epochs = e;
        } else {
            cfg.phase2_epochs = e;
        }
    }
    if let Some(lr) = t.lr {
        if phase1 {
            cfg.phase1_lr = lr;
        } else {
            cfg.phase2_lr = lr;
        }
    }
    if let Some(b) = t.batch_size {
        cfg.batch_size = b;
    }
    if let Some(a) = t.mixup_alpha {
        cfg.mixup_alpha = a;
    }
    if t.no_mixup {
        cfg.mixup = false;
    }
    if let Some(l) = t.lambda {
        cfg.lambda_l2 = l;
    }
}

fn required(value: &Option<PathBuf>, flag: &str) -> Result<PathBuf, Failure> {
    value
        .clone()
        .ok_or_else(|| Failure::Usage(format!("--{flag} is required (flag or config key '{}')", flag.replace('-', "_"))))
}

fn finish_config(cfg: &RunConfig, common: &Common, output: &Path, command: &str) -> Result<(), Failure> {
    cfg.validate().map_err(usage)?;
    let dir = common.run_dir.clone().unwrap_or_else(|| {
        output
            .parent()
            .filter(|p| !p.as_os_str().is_empty())
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from("."))
    });
    cfg.write_effective(dir, command)?;
    Ok(())
}

fn history_path(checkpoint: &Path) -> PathBuf {
    checkpoint.with_extension("history.tsv")
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Extract {
            common,
            manifest,
            out_cache,
            features,
            workers,
        } => {
            let mut cfg = load_config(&common)?;
            if manifest.is_some() {
                cfg.manifest = manifest;
            }
            if out_cache.is_some() {
                cfg.out_cache = out_cache;
            }
            if let Some(f) = features {
                cfg.features = f;
            }
            if let Some(w) = workers {
                cfg.workers = w;
            }
            let manifest_path = required(&cfg.manifest, "manifest")?;
            let out = required(&cfg.out_cache, "out-cache")?;
            finish_config(&cfg, &common, &out, "extract")?;
            let manifest = parse_manifest(&manifest_path)?;
            let summary = pipeline::extract(&manifest, &cfg.features, &out, cfg.workers)?;
            println!("wrote {} spectrograms to {}", summary.written, out.display());
            if !summary.failures.is_empty() {
                eprintln!("{} clip(s) failed:", summary.failures.len());
                for (id, msg) in &summary.failures {
                    eprintln!("  {id}: {msg}");
                }
                return Err(Failure::Runtime(Error::Validation(format!(
                    "{} of {} clips failed",
                    summary.failures.len(),
                    manifest.len()
                ))));
            }
        }
        Command::TrainPhase1 {
            common,
            model,
            cache,
            manifest,
            out_checkpoint,
            train,
        } => {
            let mut cfg = load_config(&common)?;
            apply_train_flags(&mut cfg, &train, true);
            if cache.is_some() {
                cfg.cache = cache;
            }
            if manifest.is_some() {
                cfg.manifest = manifest;
            }
            if out_checkpoint.is_some() {
                cfg.out_checkpoint = out_checkpoint;
            }
            let manifest_path = required(&cfg.manifest, "manifest")?;
            let out = required(&cfg.out_checkpoint, "out-checkpoint")?;
            if model.is_audio() {
                required(&cfg.cache, "cache")?;
            }
            finish_config(&cfg, &common, &out, "train-phase1")?;
            let manifest = parse_manifest(&manifest_path)?;
            let cache = cfg.cache.as_ref().filter(|_| model.is_audio()).map(EmbeddingCache::open).transpose()?;
            let (trained, history) = pipeline::train_backbone(model, &manifest, cache.as_ref(), &cfg)?;
            save_backbone(&trained, &out)?;
            history.write_log(history_path(&out))?;
            println!(
                "{}: final training accuracy {:.2}% -> {}",
                model.display_name(),
                100.0 * history.final_accuracy().unwrap_or(0.0),
                out.display()
            );
        }
        Command::ExportEmbeddings {
            common,
            checkpoints,
            tap,
            cache,
            manifest,
            out_cache,
        } => {
            let mut cfg = load_config(&common)?;
            if let Some(t) = tap {
                cfg.taps = t;
            }
            if cache.is_some() {
                cfg.cache = cache;
            }
            if manifest.is_some() {
                cfg.manifest = manifest;
            }
            if out_cache.is_some() {
                cfg.out_cache = out_cache;
            }
            let manifest_path = required(&cfg.manifest, "manifest")?;
            let spec_cache = required(&cfg.cache, "cache")?;
            let out = required(&cfg.out_cache, "out-cache")?;
            finish_config(&cfg, &common, &out, "export-embeddings")?;
            let mut models = Vec::new();
            for path in &checkpoints {
                let kind = checkpoint_kind(path)?;
                let m = load_backbone(path)?;
                if models.iter().any(|x: &avfuse::BackboneModel| x.kind() == kind) {
                    return Err(Failure::Usage(format!("two checkpoints for model {kind}")));
                }
                models.push(m);
            }
            let manifest = parse_manifest(&manifest_path)?;
            let cache = EmbeddingCache::open(&spec_cache)?;
            let n = pipeline::export_embeddings(&models, &manifest, Some(&cache), &cfg.taps, &out)?;
            println!("exported embeddings for {n} samples to {}", out.display());
        }
        Command::TrainPhase2 {
            common,
            fusion,
            mode,
            cache,
            out_checkpoint,
            train,
        } => {
            let mut cfg = load_config(&common)?;
            apply_train_flags(&mut cfg, &train, false);
            if let Some(f) = fusion {
                cfg.fusion = f;
            }
            if let Some(m) = mode {
                cfg.mode = m;
            }
            if cache.is_some() {
                cfg.cache = cache;
            }
            if out_checkpoint.is_some() {
                cfg.out_checkpoint = out_checkpoint;
            }
            let cache_path = required(&cfg.cache, "cache")?;
            let out = required(&cfg.out_checkpoint, "out-checkpoint")?;
            finish_config(&cfg, &common, &out, "train-phase2")?;
            let cache = EmbeddingCache::open(&cache_path)?;
            let (model, history) = pipeline::train_fusion(cfg.fusion, cfg.mode, &cache, &cfg)?;
            save_fusion(&model, &out)?;
            history.write_log(history_path(&out))?;
            println!(
                "{} ({}): final training accuracy {:.2}% -> {}",
                cfg.fusion,
                cfg.mode.report_name(),
                100.0 * history.final_accuracy().unwrap_or(0.0),
                out.display()
            );
        }
        Command::Evaluate {
            common,
            checkpoint,
            cache,
            manifest,
            mode,
            report_dir,
            split,
        } => {
            let mut cfg = load_config(&common)?;
            if cache.is_some() {
                cfg.cache = cache;
            }
            if manifest.is_some() {
                cfg.manifest = manifest;
            }
            if report_dir.is_some() {
                cfg.report_dir = report_dir;
            }
            let cache_path = required(&cfg.cache, "cache")?;
            let manifest_path = required(&cfg.manifest, "manifest")?;
            let dir = required(&cfg.report_dir, "report-dir")?;
            let common = Common {
                run_dir: common.run_dir.clone().or_else(|| Some(dir.clone())),
                ..common
            };
            finish_config(&cfg, &common, &dir, "evaluate")?;
            let manifest = parse_manifest(&manifest_path)?;
            let cache = EmbeddingCache::open(&cache_path)?;
            let mut models = checkpoint.iter().map(load_fusion).collect::<avfuse::Result<Vec<_>>>()?;
            if let Some(m) = mode {
                models.retain(|x| x.modality == m);
                if models.is_empty() {
                    return Err(Failure::Runtime(Error::Config(format!("no checkpoint trained for mode '{m}'"))));
                }
            }
            for model in &models {
                let report = pipeline::evaluate_fusion(model, &manifest, &cache, split)?;
                report.write_files(&dir)?;
                print!("{}", report.to_table());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).parse_default_env().init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
