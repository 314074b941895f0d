use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

/// Periodic Hann window.
pub(crate) fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos())
        .collect()
}

/// Hann-windowed one-sided power spectra over a fixed framing grid.
pub(crate) struct PowerStft {
    window: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
}

impl PowerStft {
    pub fn new(n: usize) -> Self {
        Self {
            window: hann(n),
            fft: FftPlanner::new().plan_fft_forward(n),
        }
    }

    pub fn n_bins(&self) -> usize {
        self.window.len() / 2 + 1
    }

    /// Power spectra of `n_frames` frames starting every `hop` samples,
    /// flattened frame-major. Samples past the end read as zero.
    pub fn frames(&self, samples: &[f64], hop: usize, n_frames: usize) -> Vec<f64> {
        let n = self.window.len();
        let nb = self.n_bins();
        let mut out = Vec::with_capacity(n_frames * nb);
        let mut buf = vec![Complex::new(0.0, 0.0); n];
        let mut scratch = vec![Complex::new(0.0, 0.0); self.fft.get_inplace_scratch_len()];
        for t in 0..n_frames {
            let start = t * hop;
            for (i, slot) in buf.iter_mut().enumerate() {
                let x = samples.get(start + i).copied().unwrap_or(0.0);
                *slot = Complex::new(x * self.window[i], 0.0);
            }
            self.fft.process_with_scratch(&mut buf, &mut scratch);
            out.extend(buf[..nb].iter().map(|c| c.norm_sqr()));
        }
        out
    }
}
