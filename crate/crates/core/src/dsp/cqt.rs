use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::stft::hann;
use super::{prepare_channels, AudioClip, FrontEnd, FrontEndConfig, Spectrogram, SpectrogramKind};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const CQT_FMIN_HZ: f64 = 32.703;
pub const CQT_BINS_PER_OCTAVE: usize = 16;

/// Spectral-kernel entries below this fraction of a bin's peak are dropped.
const SPARSITY_THRESHOLD: f64 = 1e-4;

/// Constant-Q transform evaluated through sparse spectral kernels.
///
/// Bin `k` sits at `fmin·2^(k/16)` and correlates the signal with a Hann
/// window of `ceil(Q·rate/f_k)` samples, `Q = 1/(2^(1/16) − 1)`, centred on
/// the centre of the matching STFT frame. Each kernel is moved to the
/// frequency domain once; a frame then costs one FFT plus a sparse dot
/// product per bin.
pub struct CqtKernel {
    cfg: FrontEndConfig,
    fft: Arc<dyn Fft<f64>>,
    fft_len: usize,
    kernels: Vec<Vec<(usize, Complex<f64>)>>,
    freqs: Vec<f64>,
}

pub fn cqt_quality() -> f64 {
    1.0 / (2f64.powf(1.0 / CQT_BINS_PER_OCTAVE as f64) - 1.0)
}

pub fn cqt_frequencies(n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| CQT_FMIN_HZ * 2f64.powf(k as f64 / CQT_BINS_PER_OCTAVE as f64))
        .collect()
}

impl CqtKernel {
    pub fn new(cfg: &FrontEndConfig) -> Result<Self> {
        cfg.validate()?;
        let rate = cfg.target_rate as f64;
        let q = cqt_quality();
        let freqs = cqt_frequencies(cfg.n_filters);
        if freqs[freqs.len() - 1] >= rate / 2.0 {
            return Err(Error::Config(format!(
                "top CQT bin {:.1} Hz exceeds Nyquist",
                freqs[freqs.len() - 1]
            )));
        }
        let lengths: Vec<usize> = freqs.iter().map(|f| (q * rate / f).ceil() as usize).collect();
        let fft_len = lengths[0].next_power_of_two();
        let fft = FftPlanner::new().plan_fft_forward(fft_len);

        let mut kernels = Vec::with_capacity(freqs.len());
        let mut buf = vec![Complex::new(0.0, 0.0); fft_len];
        for (&f, &len) in freqs.iter().zip(&lengths) {
            buf.iter_mut().for_each(|c| *c = Complex::new(0.0, 0.0));
            let window = hann(len);
            let offset = fft_len / 2 - len / 2;
            // conj(a[n]) where a[n] = w[n]/len · exp(-2πi f n / rate)
            for (m, w) in window.iter().enumerate() {
                let phase = 2.0 * PI * f * m as f64 / rate;
                buf[offset + m] = Complex::from_polar(w / len as f64, phase);
            }
            fft.process(&mut buf);
            let peak = buf.iter().map(|c| c.norm()).fold(0.0, f64::max);
            let scale = 1.0 / fft_len as f64;
            let sparse = buf
                .iter()
                .enumerate()
                .filter(|(_, c)| c.norm() >= SPARSITY_THRESHOLD * peak)
                .map(|(j, c)| (j, c.conj() * scale))
                .collect();
            kernels.push(sparse);
        }
        Ok(Self {
            cfg: cfg.clone(),
            fft,
            fft_len,
            kernels,
            freqs,
        })
    }

    pub fn center_frequencies(&self) -> &[f64] {
        &self.freqs
    }
}

impl FrontEnd for CqtKernel {
    fn kind(&self) -> SpectrogramKind {
        SpectrogramKind::Cqt
    }

    fn config(&self) -> &FrontEndConfig {
        &self.cfg
    }

    fn linear(&self, clip: &AudioClip) -> Result<Tensor> {
        let channels = prepare_channels(clip, &self.cfg)?;
        let frames = self.cfg.n_frames();
        let bins = self.kernels.len();
        let n_ch = channels.len();
        let half_window = self.cfg.window_samples() / 2;
        let mut out = vec![0.0; bins * frames * n_ch];
        let mut buf = vec![Complex::new(0.0, 0.0); self.fft_len];
        let mut scratch = vec![Complex::new(0.0, 0.0); self.fft.get_inplace_scratch_len()];
        for (c, samples) in channels.iter().enumerate() {
            for t in 0..frames {
                let center = (self.cfg.frame_start(t) + half_window) as isize;
                let start = center - (self.fft_len / 2) as isize;
                for (i, slot) in buf.iter_mut().enumerate() {
                    let idx = start + i as isize;
                    let x = if idx >= 0 {
                        samples.get(idx as usize).copied().unwrap_or(0.0)
                    } else {
                        0.0
                    };
                    *slot = Complex::new(x, 0.0);
                }
                self.fft.process_with_scratch(&mut buf, &mut scratch);
                for (k, kernel) in self.kernels.iter().enumerate() {
                    let acc: Complex<f64> = kernel.iter().map(|&(j, w)| buf[j] * w).sum();
                    out[(k * frames + t) * n_ch + c] = acc.norm();
                }
            }
        }
        Tensor::new(vec![bins, frames, n_ch], out)
    }
}

pub fn cqt_spectrogram(clip: &AudioClip, cfg: &FrontEndConfig) -> Result<Spectrogram> {
    CqtKernel::new(cfg)?.spectrogram(clip)
}
