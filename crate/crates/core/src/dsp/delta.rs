use super::Spectrogram;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Regression delta along the frame axis of a `bins × frames × channels`
/// tensor, evaluated only where the full `±half_width` window fits:
/// `d_t = Σ_{n=1..N} n·(c_{t+n} − c_{t−n}) / (2·Σ n²)`.
/// The output has `frames − 2N` frames.
pub fn delta(spec: &Tensor, half_width: usize) -> Result<Tensor> {
    let [bins, frames, channels] = match spec.shape() {
        &[b, t, c] => [b, t, c],
        other => return Err(Error::dims("[bins, frames, channels]", other)),
    };
    if half_width == 0 {
        return Err(Error::Config("delta half-width must be at least 1".into()));
    }
    if frames <= 2 * half_width {
        return Err(Error::InsufficientFrames { frames, half_width });
    }
    let out_frames = frames - 2 * half_width;
    let denom = 2.0 * (1..=half_width).map(|n| (n * n) as f64).sum::<f64>();
    let src = spec.data();
    let at = |b: usize, t: usize, c: usize| src[(b * frames + t) * channels + c];
    let mut out = Vec::with_capacity(bins * out_frames * channels);
    for b in 0..bins {
        for t in half_width..frames - half_width {
            for c in 0..channels {
                let mut acc = 0.0;
                for n in 1..=half_width {
                    acc += n as f64 * (at(b, t + n, c) - at(b, t - n, c));
                }
                out.push(acc / denom);
            }
        }
    }
    Tensor::new(vec![bins, out_frames, channels], out)
}

/// `bins × T × C` → `bins × (T − 4) × 3C` with channels
/// `[static.., delta.., delta-delta..]`; the static and delta planes are
/// centre-cropped to the delta-delta frames.
pub fn stack_deltas(spec: &Spectrogram) -> Result<Spectrogram> {
    let data = spec.data();
    let [bins, frames, channels] = match data.shape() {
        &[b, t, c] => [b, t, c],
        other => return Err(Error::dims("[bins, frames, channels]", other)),
    };
    if bins != 128 || frames != 309 || channels != 2 {
        return Err(Error::dims([128, 309, 2], data.shape()));
    }
    stack_deltas_any(spec)
}

pub(crate) fn stack_deltas_any(spec: &Spectrogram) -> Result<Spectrogram> {
    let data = spec.data();
    let (bins, frames, channels) = (spec.bins(), spec.frames(), spec.channels());
    let d1 = delta(data, 1)?;
    let d2 = delta(&d1, 1)?;
    let out_frames = frames - 4;
    let out_ch = 3 * channels;
    let mut out = vec![0.0; bins * out_frames * out_ch];
    for b in 0..bins {
        for t in 0..out_frames {
            let dst = (b * out_frames + t) * out_ch;
            for c in 0..channels {
                out[dst + c] = data.data()[(b * frames + t + 2) * channels + c];
                out[dst + channels + c] = d1.data()[(b * (frames - 2) + t + 1) * channels + c];
                out[dst + 2 * channels + c] = d2.data()[(b * out_frames + t) * channels + c];
            }
        }
    }
    Spectrogram::new(Tensor::new(vec![bins, out_frames, out_ch], out)?, spec.kind())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::SpectrogramKind;
    use proptest::prelude::*;

    fn ramp(bins: usize, frames: usize, channels: usize) -> Tensor {
        let mut v = Vec::new();
        for _ in 0..bins {
            for t in 0..frames {
                for _ in 0..channels {
                    v.push(t as f64);
                }
            }
        }
        Tensor::new(vec![bins, frames, channels], v).unwrap()
    }

    #[test]
    fn constant_input_gives_zero_delta() {
        let t = Tensor::filled(&[3, 10, 2], 4.25);
        let d = delta(&t, 2).unwrap();
        assert_eq!(d.shape(), &[3, 6, 2]);
        assert!(d.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn ramp_has_unit_slope() {
        let d = delta(&ramp(2, 9, 2), 1).unwrap();
        assert!(d.data().iter().all(|&v| v == 1.0));
        let d = delta(&ramp(2, 9, 2), 3).unwrap();
        assert!(d.data().iter().all(|&v| (v - 1.0).abs() < 1e-15));
    }

    #[test]
    fn frame_count_shrinks_by_window() {
        assert_eq!(delta(&Tensor::zeros(&[1, 309, 1]), 1).unwrap().shape(), &[1, 307, 1]);
        assert!(matches!(
            delta(&Tensor::zeros(&[1, 2, 1]), 1),
            Err(Error::InsufficientFrames { frames: 2, half_width: 1 })
        ));
    }

    #[test]
    fn stack_rejects_wrong_shape() {
        let s = Spectrogram::new(Tensor::zeros(&[128, 308, 2]), SpectrogramKind::Mel).unwrap();
        assert!(stack_deltas(&s).is_err());
    }

    #[test]
    fn stack_of_constant_input() {
        let s = Spectrogram::new(Tensor::filled(&[128, 309, 2], -3.0), SpectrogramKind::Cqt).unwrap();
        let out = stack_deltas(&s).unwrap();
        assert_eq!(out.data().shape(), &[128, 305, 6]);
        for b in 0..128 {
            for t in 0..305 {
                assert_eq!(out.get(b, t, 0), -3.0);
                assert_eq!(out.get(b, t, 1), -3.0);
                for c in 2..6 {
                    assert_eq!(out.get(b, t, c), 0.0);
                }
            }
        }
    }

    proptest! {
        #[test]
        fn stack_layout_matches_index_bookkeeping(seed in 0u64..50) {
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let input = Tensor::random_normal(&[128, 309, 2], 1.0, &mut rng);
            let s = Spectrogram::new(input.clone(), SpectrogramKind::Mel).unwrap();
            let out = stack_deltas(&s).unwrap();
            let x = |b: usize, t: usize, c: usize| input.data()[(b * 309 + t) * 2 + c];
            // first difference at original frame t: (x[t+1] − x[t−1]) / 2
            let d = |b: usize, t: usize, c: usize| (x(b, t + 1, c) - x(b, t - 1, c)) / 2.0;
            let dd = |b: usize, t: usize, c: usize| (d(b, t + 1, c) - d(b, t - 1, c)) / 2.0;
            for &b in &[0usize, 17, 127] {
                for &t in &[0usize, 1, 150, 304] {
                    for c in 0..2 {
                        let orig = t + 2;
                        prop_assert_eq!(out.get(b, t, c), x(b, orig, c));
                        prop_assert!((out.get(b, t, 2 + c) - d(b, orig, c)).abs() < 1e-12);
                        prop_assert!((out.get(b, t, 4 + c) - dd(b, orig, c)).abs() < 1e-12);
                    }
                }
            }
        }
    }
}
