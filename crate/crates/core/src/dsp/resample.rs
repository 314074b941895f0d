use std::f64::consts::PI;

use super::AudioClip;
use crate::error::{Error, Result};

/// Zero crossings of the sinc kernel on each side, at the output cutoff.
const ZERO_CROSSINGS: f64 = 32.0;
/// Passband edge as a fraction of the lower Nyquist frequency.
const ROLLOFF: f64 = 0.95;
/// Largest number of distinct fractional phases cached in a table.
const MAX_PHASES: u64 = 4096;

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

fn blackman(x: f64) -> f64 {
    // x in [-1, 1]
    0.42 + 0.5 * (PI * x).cos() + 0.08 * (2.0 * PI * x).cos()
}

struct SincKernel {
    cutoff: f64,
    half_width: f64,
}

impl SincKernel {
    fn eval(&self, u: f64) -> f64 {
        if u.abs() >= self.half_width {
            return 0.0;
        }
        let arg = self.cutoff * u;
        let sinc = if arg == 0.0 { 1.0 } else { (PI * arg).sin() / (PI * arg) };
        self.cutoff * sinc * blackman(u / self.half_width)
    }
}

/// Band-limited (Blackman-windowed sinc) resampling. Each output sample is
/// normalized by the sum of the kernel taps that land inside the signal, so
/// DC is preserved exactly up to rounding.
pub fn resample(clip: &AudioClip, target_rate: u32) -> Result<AudioClip> {
    if clip.is_empty() {
        return Err(Error::EmptyInput("cannot resample a zero-length clip".into()));
    }
    if target_rate == 0 {
        return Err(Error::Config("target rate must be positive".into()));
    }
    let src = clip.sample_rate() as u64;
    let dst = target_rate as u64;
    if src == dst {
        return Ok(clip.clone());
    }
    let cutoff = ROLLOFF * (dst as f64 / src as f64).min(1.0);
    let kernel = SincKernel {
        cutoff,
        half_width: ZERO_CROSSINGS / cutoff,
    };
    let reach = kernel.half_width.ceil() as i64;
    let in_len = clip.len() as u64;
    let out_len = ((in_len * dst + src / 2) / src).max(1) as usize;

    // output n sits at input position n·src/dst = i + r/dst
    let g = gcd(src, dst);
    let phases = dst / g;
    let taps = (2 * reach + 2) as usize;
    let table: Option<Vec<Vec<f64>>> = (phases <= MAX_PHASES).then(|| {
        (0..phases)
            .map(|p| {
                let frac = (p * g) as f64 / dst as f64;
                (0..taps).map(|o| kernel.eval(frac - (o as i64 - reach) as f64)).collect()
            })
            .collect()
    });

    let channels = clip
        .channels()
        .iter()
        .map(|x| {
            (0..out_len as u64)
                .map(|n| {
                    let pos = n * src;
                    let i = (pos / dst) as i64;
                    let r = pos % dst;
                    let mut acc = 0.0;
                    let mut wsum = 0.0;
                    for o in 0..taps {
                        let k = i + o as i64 - reach;
                        if k < 0 || k >= in_len as i64 {
                            continue;
                        }
                        let w = match &table {
                            Some(t) => t[(r / g) as usize][o],
                            None => kernel.eval(r as f64 / dst as f64 - (o as i64 - reach) as f64),
                        };
                        acc += w * x[k as usize];
                        wsum += w;
                    }
                    if wsum.abs() > 1e-12 {
                        acc / wsum
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();
    AudioClip::new(channels, target_rate)
}
