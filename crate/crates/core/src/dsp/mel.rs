use super::{apply_filterbank, bin_hz, AudioClip, FrontEnd, FrontEndConfig, Spectrogram, SpectrogramKind};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// HTK mel scale.
pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular, area-normalized mel filters spanning 0 Hz to Nyquist.
#[derive(Debug, Clone)]
pub struct MelFilterbank {
    cfg: FrontEndConfig,
    rows: Vec<(usize, Vec<f64>)>,
    centers: Vec<f64>,
}

impl MelFilterbank {
    pub fn new(cfg: &FrontEndConfig) -> Result<Self> {
        cfg.validate()?;
        let n = cfg.window_samples();
        let n_bins = n / 2 + 1;
        let nyquist = cfg.target_rate as f64 / 2.0;
        let top = hz_to_mel(nyquist);
        let edges: Vec<f64> = (0..cfg.n_filters + 2)
            .map(|i| mel_to_hz(top * i as f64 / (cfg.n_filters + 1) as f64))
            .collect();

        let mut rows = Vec::with_capacity(cfg.n_filters);
        for m in 0..cfg.n_filters {
            let (lo, center, hi) = (edges[m], edges[m + 1], edges[m + 2]);
            let norm = 2.0 / (hi - lo);
            let weights: Vec<f64> = (0..n_bins)
                .map(|j| {
                    let f = bin_hz(j, n, cfg.target_rate);
                    let w = if f <= lo || f >= hi {
                        0.0
                    } else if f <= center {
                        (f - lo) / (center - lo)
                    } else {
                        (hi - f) / (hi - center)
                    };
                    w * norm
                })
                .collect();
            let first = weights.iter().position(|&w| w > 0.0);
            let last = weights.iter().rposition(|&w| w > 0.0);
            match (first, last) {
                (Some(a), Some(b)) => rows.push((a, weights[a..=b].to_vec())),
                _ => {
                    return Err(Error::Config(format!(
                        "mel band {m} ({lo:.1}-{hi:.1} Hz) covers no FFT bin"
                    )))
                }
            }
        }
        Ok(Self {
            cfg: cfg.clone(),
            rows,
            centers: edges[1..=cfg.n_filters].to_vec(),
        })
    }

    pub fn center_frequencies(&self) -> &[f64] {
        &self.centers
    }

    /// Dense `bands × fft_bins` weight matrix.
    pub fn matrix(&self) -> Tensor {
        let n_bins = self.cfg.window_samples() / 2 + 1;
        let mut m = vec![0.0; self.rows.len() * n_bins];
        for (b, (start, w)) in self.rows.iter().enumerate() {
            m[b * n_bins + start..b * n_bins + start + w.len()].copy_from_slice(w);
        }
        Tensor::new(vec![self.rows.len(), n_bins], m).expect("finite weights")
    }
}

impl FrontEnd for MelFilterbank {
    fn kind(&self) -> SpectrogramKind {
        SpectrogramKind::Mel
    }

    fn config(&self) -> &FrontEndConfig {
        &self.cfg
    }

    fn linear(&self, clip: &AudioClip) -> Result<Tensor> {
        apply_filterbank(&self.rows, clip, &self.cfg)
    }
}

pub fn mel_spectrogram(clip: &AudioClip, cfg: &FrontEndConfig) -> Result<Spectrogram> {
    MelFilterbank::new(cfg)?.spectrogram(clip)
}

#[cfg(test)]
mod tests {
    use super::super::test_signals::*;
    use super::*;

    #[test]
    fn silence_is_log_floor_everywhere() {
        let cfg = FrontEndConfig::default();
        let s = mel_spectrogram(&silence(&cfg), &cfg).unwrap();
        assert_eq!(s.data().shape(), &[128, 309, 2]);
        let floor = cfg.log_floor.ln();
        assert!(s.data().data().iter().all(|&v| v == floor));
    }

    #[test]
    fn identical_channels_give_identical_planes() {
        let cfg = FrontEndConfig::default();
        let s = mel_spectrogram(&stereo_sine(440.0, &cfg), &cfg).unwrap();
        for b in 0..128 {
            for t in 0..309 {
                assert_eq!(s.get(b, t, 0).to_bits(), s.get(b, t, 1).to_bits());
            }
        }
    }

    #[test]
    fn one_khz_sine_peaks_at_nearest_center() {
        // centers computed from the HTK formula directly
        let top = 2595.0 * (1.0f64 + 16000.0 / 700.0).log10();
        let centers: Vec<f64> = (1..=128)
            .map(|i| 700.0 * (10f64.powf(top * i as f64 / 129.0 / 2595.0) - 1.0))
            .collect();
        let nearest = (0..128)
            .min_by(|&a, &b| (centers[a] - 1000.0).abs().total_cmp(&(centers[b] - 1000.0).abs()))
            .unwrap();

        let cfg = FrontEndConfig::default();
        let fb = MelFilterbank::new(&cfg).unwrap();
        for (a, b) in fb.center_frequencies().iter().zip(&centers) {
            assert!((a - b).abs() < 1e-9);
        }
        let s = fb.spectrogram(&stereo_sine(1000.0, &cfg)).unwrap();
        for t in 0..s.frames() {
            assert_eq!(argmax_bin(&s, t, 0), nearest, "frame {t}");
        }
    }

    #[test]
    fn every_band_is_non_empty() {
        let fb = MelFilterbank::new(&FrontEndConfig::default()).unwrap();
        let m = fb.matrix();
        for b in 0..128 {
            assert!(m.row(b).iter().any(|&w| w > 0.0));
            assert!(m.row(b).iter().all(|&w| w >= 0.0));
        }
    }
}
