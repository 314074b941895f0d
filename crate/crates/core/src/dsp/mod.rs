//! Audio front-end: resampling, STFT-based MEL and gammatone spectrograms,
//! a kernel CQT, and delta stacking.
//!
//! Every front-end frames a 10 s stereo clip at 32 kHz into the same grid:
//! a 2560-sample (80 ms) window advanced by `hop_samples`, with no centering
//! or padding, so `frames = (320000 - 2560) / hop + 1`. The default hop of
//! 1030 samples gives 309 frames; two first-order deltas then trim it to 305.

mod cqt;
mod delta;
mod gammatone;
mod mel;
mod resample;
mod stft;
mod wav;

use std::fmt;
use std::str::FromStr;

pub use cqt::{cqt_spectrogram, CqtKernel};
pub use delta::{delta, stack_deltas};
pub use gammatone::{erb_rate, erb_rate_to_hz, gammatone_centers, gammatone_spectrogram, GammatoneFilterbank};
pub use mel::{hz_to_mel, mel_spectrogram, mel_to_hz, MelFilterbank};
pub use resample::resample;
pub use wav::{read_wav, write_wav, WavSampleFormat};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Multi-channel PCM audio with samples nominally in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    channels: Vec<Vec<f64>>,
    sample_rate: u32,
}

impl AudioClip {
    pub fn new(channels: Vec<Vec<f64>>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::Validation("sample rate must be positive".into()));
        }
        if channels.is_empty() {
            return Err(Error::ChannelCount {
                expected: 2,
                got: 0,
            });
        }
        let len = channels[0].len();
        if channels.iter().any(|c| c.len() != len) {
            return Err(Error::Validation("channels differ in length".into()));
        }
        Ok(Self {
            channels,
            sample_rate,
        })
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn num_channels(&self) -> usize {
        self.channels.len()
    }

    /// Samples per channel.
    pub fn len(&self) -> usize {
        self.channels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn channel(&self, i: usize) -> &[f64] {
        &self.channels[i]
    }

    pub fn channels(&self) -> &[Vec<f64>] {
        &self.channels
    }

    pub fn into_channels(self) -> Vec<Vec<f64>> {
        self.channels
    }

    /// Duplicates a mono clip into two identical channels; other clips are
    /// returned as-is.
    pub fn into_stereo(self) -> Self {
        if self.channels.len() == 1 {
            let c = self.channels.into_iter().next().unwrap();
            Self {
                channels: vec![c.clone(), c],
                sample_rate: self.sample_rate,
            }
        } else {
            self
        }
    }

    pub fn scaled(&self, gain: f64) -> Self {
        Self {
            channels: self
                .channels
                .iter()
                .map(|c| c.iter().map(|v| v * gain).collect())
                .collect(),
            sample_rate: self.sample_rate,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SpectrogramKind {
    Mel,
    Gammatone,
    Cqt,
}

impl SpectrogramKind {
    pub const ALL: [SpectrogramKind; 3] = [Self::Mel, Self::Gammatone, Self::Cqt];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Mel => "mel",
            Self::Gammatone => "gam",
            Self::Cqt => "cqt",
        }
    }
}

impl fmt::Display for SpectrogramKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SpectrogramKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mel" => Ok(Self::Mel),
            "gam" | "gammatone" => Ok(Self::Gammatone),
            "cqt" => Ok(Self::Cqt),
            other => Err(Error::Config(format!("unknown feature kind '{other}' (expected mel, gam or cqt)"))),
        }
    }
}

/// A `bins × frames × channels` time-frequency tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    data: Tensor,
    kind: SpectrogramKind,
}

impl Spectrogram {
    pub fn new(data: Tensor, kind: SpectrogramKind) -> Result<Self> {
        if data.rank() != 3 {
            return Err(Error::dims("[bins, frames, channels]", data.shape()));
        }
        Ok(Self { data, kind })
    }

    pub fn kind(&self) -> SpectrogramKind {
        self.kind
    }

    pub fn data(&self) -> &Tensor {
        &self.data
    }

    pub fn into_tensor(self) -> Tensor {
        self.data
    }

    pub fn bins(&self) -> usize {
        self.data.shape()[0]
    }

    pub fn frames(&self) -> usize {
        self.data.shape()[1]
    }

    pub fn channels(&self) -> usize {
        self.data.shape()[2]
    }

    pub fn get(&self, bin: usize, frame: usize, channel: usize) -> f64 {
        let s = self.data.shape();
        self.data.data()[(bin * s[1] + frame) * s[2] + channel]
    }
}

/// Framing and compression settings shared by all front-ends.
#[derive(Debug, Clone, PartialEq)]
pub struct FrontEndConfig {
    pub target_rate: u32,
    pub n_filters: usize,
    pub window_ms: u32,
    pub hop_samples: usize,
    pub clip_seconds: u32,
    pub log_floor: f64,
}

impl Default for FrontEndConfig {
    fn default() -> Self {
        Self {
            target_rate: 32_000,
            n_filters: 128,
            window_ms: 80,
            hop_samples: 1030,
            clip_seconds: 10,
            log_floor: 1e-10,
        }
    }
}

impl FrontEndConfig {
    pub fn window_samples(&self) -> usize {
        (self.target_rate as usize * self.window_ms as usize) / 1000
    }

    pub fn clip_samples(&self) -> usize {
        self.target_rate as usize * self.clip_seconds as usize
    }

    pub fn n_frames(&self) -> usize {
        (self.clip_samples() - self.window_samples()) / self.hop_samples + 1
    }

    /// First sample of frame `t`.
    pub fn frame_start(&self, t: usize) -> usize {
        t * self.hop_samples
    }

    pub fn validate(&self) -> Result<()> {
        if self.target_rate == 0 || self.n_filters == 0 || self.hop_samples == 0 {
            return Err(Error::Config("rate, filter count and hop must be positive".into()));
        }
        if self.window_samples() < 2 || self.window_samples() > self.clip_samples() {
            return Err(Error::Config(format!(
                "window of {} samples does not fit a clip of {} samples",
                self.window_samples(),
                self.clip_samples()
            )));
        }
        if !(self.log_floor > 0.0 && self.log_floor.is_finite()) {
            return Err(Error::Config("log_floor must be a small positive number".into()));
        }
        Ok(())
    }
}

/// Checks rate and channel count and fits each channel to exactly one clip
/// length (truncate or zero-pad).
pub(crate) fn prepare_channels(clip: &AudioClip, cfg: &FrontEndConfig) -> Result<Vec<Vec<f64>>> {
    cfg.validate()?;
    if clip.sample_rate() != cfg.target_rate {
        return Err(Error::Precondition(format!(
            "clip sampled at {} Hz, front-end expects {} Hz",
            clip.sample_rate(),
            cfg.target_rate
        )));
    }
    if clip.num_channels() != 2 {
        return Err(Error::ChannelCount {
            expected: 2,
            got: clip.num_channels(),
        });
    }
    let n = cfg.clip_samples();
    Ok(clip
        .channels()
        .iter()
        .map(|c| {
            let mut v: Vec<f64> = c.iter().take(n).copied().collect();
            v.resize(n, 0.0);
            v
        })
        .collect())
}

/// Common interface of the three spectral front-ends.
pub trait FrontEnd: Send + Sync {
    fn kind(&self) -> SpectrogramKind;

    fn config(&self) -> &FrontEndConfig;

    /// Pre-compression output (`bins × frames × channels`): band power for
    /// MEL and GAM, magnitude for CQT.
    fn linear(&self, clip: &AudioClip) -> Result<Tensor>;

    fn spectrogram(&self, clip: &AudioClip) -> Result<Spectrogram> {
        let mut t = self.linear(clip)?;
        let floor = self.config().log_floor;
        for v in t.data_mut() {
            *v = (*v + floor).ln();
        }
        Spectrogram::new(t, self.kind())
    }
}

/// All three front-ends built once over one configuration.
pub struct FrontEndBank {
    mel: MelFilterbank,
    gammatone: GammatoneFilterbank,
    cqt: CqtKernel,
}

impl FrontEndBank {
    pub fn new(cfg: &FrontEndConfig) -> Result<Self> {
        Ok(Self {
            mel: MelFilterbank::new(cfg)?,
            gammatone: GammatoneFilterbank::new(cfg)?,
            cqt: CqtKernel::new(cfg)?,
        })
    }

    pub fn get(&self, kind: SpectrogramKind) -> &dyn FrontEnd {
        match kind {
            SpectrogramKind::Mel => &self.mel,
            SpectrogramKind::Gammatone => &self.gammatone,
            SpectrogramKind::Cqt => &self.cqt,
        }
    }

    pub fn spectrogram(&self, kind: SpectrogramKind, clip: &AudioClip) -> Result<Spectrogram> {
        self.get(kind).spectrogram(clip)
    }
}

/// Resamples to the target rate when needed and duplicates mono to stereo,
/// then returns the `128 × 305 × 6` delta stack for one feature kind.
pub fn features(bank: &FrontEndBank, kind: SpectrogramKind, clip: &AudioClip) -> Result<Spectrogram> {
    let cfg = bank.get(kind).config();
    let clip = if clip.sample_rate() != cfg.target_rate {
        resample(clip, cfg.target_rate)?
    } else {
        clip.clone()
    };
    let clip = if clip.num_channels() == 1 {
        log::warn!("mono clip duplicated to stereo");
        clip.into_stereo()
    } else {
        clip
    };
    stack_deltas(&bank.spectrogram(kind, &clip)?)
}

/// Frequency of FFT bin `j` for a window of `n` samples.
pub(crate) fn bin_hz(j: usize, n: usize, rate: u32) -> f64 {
    j as f64 * rate as f64 / n as f64
}

/// Runs a filterbank (one weight row per band over the one-sided power
/// spectrum) across every frame of both channels.
pub(crate) fn apply_filterbank(
    rows: &[(usize, Vec<f64>)],
    clip: &AudioClip,
    cfg: &FrontEndConfig,
) -> Result<Tensor> {
    let channels = prepare_channels(clip, cfg)?;
    let frames = cfg.n_frames();
    let bins = rows.len();
    let n_ch = channels.len();
    let mut out = vec![0.0; bins * frames * n_ch];
    let stft = stft::PowerStft::new(cfg.window_samples());
    for (c, samples) in channels.iter().enumerate() {
        let power = stft.frames(samples, cfg.hop_samples, frames);
        for (t, p) in power.chunks(stft.n_bins()).enumerate() {
            for (b, (start, w)) in rows.iter().enumerate() {
                let acc: f64 = w.iter().zip(&p[*start..]).map(|(a, b)| a * b).sum();
                out[(b * frames + t) * n_ch + c] = acc;
            }
        }
    }
    Tensor::new(vec![bins, frames, n_ch], out)
}
