use super::{apply_filterbank, bin_hz, AudioClip, FrontEnd, FrontEndConfig, Spectrogram, SpectrogramKind};
use crate::error::Result;
use crate::tensor::Tensor;

const LOWEST_CENTER_HZ: f64 = 50.0;
const FILTER_ORDER: i32 = 4;

/// Glasberg & Moore ERB-rate (ERB number) of a frequency.
pub fn erb_rate(hz: f64) -> f64 {
    21.4 * (1.0 + 0.00437 * hz).log10()
}

pub fn erb_rate_to_hz(erb: f64) -> f64 {
    (10f64.powf(erb / 21.4) - 1.0) / 0.00437
}

/// Equivalent rectangular bandwidth at `hz`.
fn erb_width(hz: f64) -> f64 {
    24.7 * (4.37 * hz / 1000.0 + 1.0)
}

/// `n` centers equally spaced on the ERB-rate scale from 50 Hz to `top_hz`.
pub fn gammatone_centers(n: usize, top_hz: f64) -> Vec<f64> {
    let lo = erb_rate(LOWEST_CENTER_HZ);
    let hi = erb_rate(top_hz);
    if n == 1 {
        return vec![LOWEST_CENTER_HZ];
    }
    (0..n)
        .map(|i| erb_rate_to_hz(lo + (hi - lo) * i as f64 / (n - 1) as f64))
        .collect()
}

/// Magnitude response of a 4th-order gammatone filter centred at `fc`.
fn gammatone_magnitude(f: f64, fc: f64) -> f64 {
    let b = 1.019 * erb_width(fc);
    let x = (f - fc) / b;
    (1.0 + x * x).powf(-f64::from(FILTER_ORDER) / 2.0)
}

/// STFT-domain gammatone filterbank: each band weights the power spectrum
/// by a gammatone magnitude response.
#[derive(Debug, Clone)]
pub struct GammatoneFilterbank {
    cfg: FrontEndConfig,
    rows: Vec<(usize, Vec<f64>)>,
    centers: Vec<f64>,
}

impl GammatoneFilterbank {
    pub fn new(cfg: &FrontEndConfig) -> Result<Self> {
        cfg.validate()?;
        let n = cfg.window_samples();
        let n_bins = n / 2 + 1;
        let centers = gammatone_centers(cfg.n_filters, cfg.target_rate as f64 / 2.0);
        let rows = centers
            .iter()
            .map(|&fc| {
                let w = (0..n_bins)
                    .map(|j| gammatone_magnitude(bin_hz(j, n, cfg.target_rate), fc))
                    .collect();
                (0, w)
            })
            .collect();
        Ok(Self {
            cfg: cfg.clone(),
            rows,
            centers,
        })
    }

    pub fn center_frequencies(&self) -> &[f64] {
        &self.centers
    }

    pub fn matrix(&self) -> Tensor {
        let n_bins = self.cfg.window_samples() / 2 + 1;
        let data = self.rows.iter().flat_map(|(_, w)| w.iter().copied()).collect();
        Tensor::new(vec![self.rows.len(), n_bins], data).expect("finite weights")
    }
}

impl FrontEnd for GammatoneFilterbank {
    fn kind(&self) -> SpectrogramKind {
        SpectrogramKind::Gammatone
    }

    fn config(&self) -> &FrontEndConfig {
        &self.cfg
    }

    fn linear(&self, clip: &AudioClip) -> Result<Tensor> {
        apply_filterbank(&self.rows, clip, &self.cfg)
    }
}

pub fn gammatone_spectrogram(clip: &AudioClip, cfg: &FrontEndConfig) -> Result<Spectrogram> {
    GammatoneFilterbank::new(cfg)?.spectrogram(clip)
}
