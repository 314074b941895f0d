//! Run configuration: defaults, `key = value` files, the `AVFUSE_SEED`
//! environment override and the echoed effective config.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::backbone::EmbeddingTap;
use crate::dsp::SpectrogramKind;
use crate::error::{Error, Result};
use crate::fusion::{FusionMethod, Modality};
use crate::tensor::AdamConfig;
use crate::training::{LossConfig, MixupConfig, Phase1Config, Phase2Config};

pub const SEED_ENV: &str = "AVFUSE_SEED";

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub fusion: FusionMethod,
    pub mode: Modality,
    pub taps: Vec<EmbeddingTap>,
    pub features: Vec<SpectrogramKind>,
    pub mixup_alpha: f64,
    pub mixup: bool,
    pub lambda_l2: f64,
    pub phase1_lr: f64,
    pub phase1_epochs: usize,
    pub phase2_lr: f64,
    pub phase2_epochs: usize,
    pub batch_size: usize,
    /// 0 means one worker per logical core.
    pub workers: usize,
    pub manifest: Option<PathBuf>,
    pub cache: Option<PathBuf>,
    pub out_cache: Option<PathBuf>,
    pub out_checkpoint: Option<PathBuf>,
    pub report_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            fusion: FusionMethod::F4,
            mode: Modality::AudioVisual,
            taps: vec![EmbeddingTap::Fc1024, EmbeddingTap::Fc10],
            features: SpectrogramKind::ALL.to_vec(),
            mixup_alpha: 0.4,
            mixup: true,
            lambda_l2: 1e-4,
            phase1_lr: 1e-3,
            phase1_epochs: 20,
            phase2_lr: 5e-3,
            phase2_epochs: 40,
            batch_size: 16,
            workers: 0,
            manifest: None,
            cache: None,
            out_cache: None,
            out_checkpoint: None,
            report_dir: None,
        }
    }
}

fn parse_list<T>(value: &str, f: impl Fn(&str) -> Result<T>) -> Result<Vec<T>> {
    let items: Vec<T> = value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(f)
        .collect::<Result<_>>()?;
    if items.is_empty() {
        return Err(Error::Config("empty list".into()));
    }
    Ok(items)
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("bad value '{value}' for '{key}'")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(Error::Config(format!("bad value '{value}' for '{key}'"))),
    }
}

impl RunConfig {
    pub const KEYS: [&'static str; 19] = [
        "seed",
        "fusion",
        "mode",
        "tap",
        "features",
        "mixup_alpha",
        "mixup",
        "lambda_l2",
        "phase1_lr",
        "phase1_epochs",
        "phase2_lr",
        "phase2_epochs",
        "batch_size",
        "workers",
        "manifest",
        "cache",
        "out_cache",
        "out_checkpoint",
        "report_dir",
    ];

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        let path = || (!value.is_empty()).then(|| PathBuf::from(value));
        match key.trim() {
            "seed" => self.seed = parse_num(key, value)?,
            "fusion" => self.fusion = value.parse()?,
            "mode" => self.mode = value.parse()?,
            "tap" => self.taps = parse_list(value, str::parse)?,
            "features" => self.features = parse_list(value, str::parse)?,
            "mixup_alpha" => self.mixup_alpha = parse_num(key, value)?,
            "mixup" => self.mixup = parse_bool(key, value)?,
            "lambda_l2" => self.lambda_l2 = parse_num(key, value)?,
            "phase1_lr" => self.phase1_lr = parse_num(key, value)?,
            "phase1_epochs" => self.phase1_epochs = parse_num(key, value)?,
            "phase2_lr" => self.phase2_lr = parse_num(key, value)?,
            "phase2_epochs" => self.phase2_epochs = parse_num(key, value)?,
            "batch_size" => self.batch_size = parse_num(key, value)?,
            "workers" => self.workers = parse_num(key, value)?,
            "manifest" => self.manifest = path(),
            "cache" => self.cache = path(),
            "out_cache" => self.out_cache = path(),
            "out_checkpoint" => self.out_checkpoint = path(),
            "report_dir" => self.report_dir = path(),
            other => return Err(Error::Config(format!("unknown config key '{other}'"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
            self.set(k, v)
                .map_err(|e| Error::Config(format!("line {}: {}", i + 1, strip_prefix(&e))))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        self.apply_text(&text)
            .map_err(|e| Error::Config(format!("{}: {}", path.display(), strip_prefix(&e))))
    }

    /// Applies the seed override from the given environment value.
    pub fn apply_seed_env(&mut self, value: Option<&str>) -> Result<()> {
        if let Some(v) = value {
            self.seed = v
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("{SEED_ENV}='{v}' is not an unsigned integer")))?;
        }
        Ok(())
    }

    /// Defaults, then the file, then `AVFUSE_SEED`.
    pub fn load(file: Option<&Path>) -> Result<Self> {
        let mut cfg = Self::default();
        if let Some(f) = file {
            cfg.apply_file(f)?;
        }
        cfg.apply_seed_env(std::env::var(SEED_ENV).ok().as_deref())?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mixup_alpha > 0.0) {
            return Err(Error::Config("mixup_alpha must be positive".into()));
        }
        if !(self.lambda_l2 >= 0.0) {
            return Err(Error::Config("lambda_l2 must be non-negative".into()));
        }
        if !(self.phase1_lr >= 0.0) || !(self.phase2_lr >= 0.0) {
            return Err(Error::Config("learning rates must be non-negative".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let list = |v: Vec<&str>| v.join(",");
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("seed", self.seed.to_string());
        kv("fusion", self.fusion.to_string());
        kv("mode", self.mode.to_string());
        kv("tap", list(self.taps.iter().map(|t| t.as_str()).collect()));
        kv("features", list(self.features.iter().map(|f| f.as_str()).collect()));
        kv("mixup_alpha", self.mixup_alpha.to_string());
        kv("mixup", self.mixup.to_string());
        kv("lambda_l2", self.lambda_l2.to_string());
        kv("phase1_lr", self.phase1_lr.to_string());
        kv("phase1_epochs", self.phase1_epochs.to_string());
        kv("phase2_lr", self.phase2_lr.to_string());
        kv("phase2_epochs", self.phase2_epochs.to_string());
        kv("batch_size", self.batch_size.to_string());
        kv("workers", self.workers.to_string());
        kv("manifest", path(&self.manifest));
        kv("cache", path(&self.cache));
        kv("out_cache", path(&self.out_cache));
        kv("out_checkpoint", path(&self.out_checkpoint));
        kv("report_dir", path(&self.report_dir));
        s
    }

    /// Writes the effective config as `<command>.config.txt` in `dir`.
    pub fn write_effective(&self, dir: impl AsRef<Path>, command: &str) -> Result<PathBuf> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))?;
        let path = dir.join(format!("{command}.config.txt"));
        std::fs::write(&path, self.to_text()).map_err(|e| Error::file(&path, e))?;
        Ok(path)
    }

    fn mixup_config(&self) -> MixupConfig {
        MixupConfig {
            alpha: self.mixup_alpha,
            enabled: self.mixup,
        }
    }

    fn loss_config(&self) -> LossConfig {
        LossConfig {
            lambda_l2: self.lambda_l2,
            ..Default::default()
        }
    }

    pub fn phase1(&self) -> Phase1Config {
        Phase1Config {
            epochs: self.phase1_epochs,
            batch_size: self.batch_size,
            seed: self.seed,
            adam: AdamConfig {
                learning_rate: self.phase1_lr,
                ..Default::default()
            },
            mixup: self.mixup_config(),
            loss: self.loss_config(),
            fit_input_norm: true,
        }
    }

    pub fn phase2(&self) -> Phase2Config {
        Phase2Config {
            epochs: self.phase2_epochs,
            batch_size: self.batch_size,
            seed: self.seed,
            adam: AdamConfig {
                learning_rate: self.phase2_lr,
                ..Default::default()
            },
            mixup: self.mixup_config(),
            loss: self.loss_config(),
        }
    }
}

fn strip_prefix(e: &Error) -> String {
    match e {
        Error::Config(m) => m.clone(),
        other => other.to_string(),
    }
}
