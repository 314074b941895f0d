#![allow(dead_code)]

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use avfuse::data_io::{write_manifest, Manifest, ManifestEntry, SceneLabel, Split};
use avfuse::dsp::{write_wav, AudioClip, FrontEndConfig, WavSampleFormat};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Tone frequencies; an audio clip of group `g` carries the first `g + 1`.
pub const TONES: [f64; 5] = [250.0, 630.0, 1400.0, 3100.0, 6800.0];

/// Image colors, one per visual group.
pub const COLORS: [[f64; 3]; 5] = [
    [0.9, 0.1, 0.1],
    [0.1, 0.8, 0.2],
    [0.15, 0.2, 0.9],
    [0.9, 0.85, 0.1],
    [0.8, 0.1, 0.8],
];

/// Audio separates classes in pairs (`c / 2`), images in a different
/// pairing (`c % 5`); only both together identify the class.
pub fn audio_group(class: usize) -> usize {
    class / 2
}

pub fn visual_group(class: usize) -> usize {
    class % 5
}

pub fn synth_clip(class: usize, rng: &mut impl Rng, rate: u32, seconds: f64) -> AudioClip {
    let n = (rate as f64 * seconds) as usize;
    let k = audio_group(class) + 1;
    let channels = (0..2)
        .map(|_| {
            let mut x: Vec<f64> = (0..n).map(|_| 0.01 * (rng.random::<f64>() - 0.5)).collect();
            for &f in &TONES[..k] {
                let amp = 0.12 * (0.8 + 0.4 * rng.random::<f64>());
                let phase = 2.0 * PI * rng.random::<f64>();
                let f = f * (0.97 + 0.06 * rng.random::<f64>());
                for (i, v) in x.iter_mut().enumerate() {
                    *v += amp * (2.0 * PI * f * i as f64 / rate as f64 + phase).sin();
                }
            }
            x
        })
        .collect();
    AudioClip::new(channels, rate).unwrap()
}

pub fn synth_image(class: usize, rng: &mut impl Rng, size: u32) -> image::RgbImage {
    let base = COLORS[visual_group(class)];
    let gain = 0.8 + 0.3 * rng.random::<f64>();
    image::RgbImage::from_fn(size, size, |_, _| {
        image::Rgb(std::array::from_fn(|c| {
            let v = base[c] * gain + 0.25 * (rng.random::<f64>() - 0.5);
            (v.clamp(0.0, 1.0) * 255.0).round() as u8
        }))
    })
}

pub struct DatasetSpec {
    /// Only the first `classes` labels are used.
    pub classes: usize,
    pub train_per_class: usize,
    pub eval_per_class: usize,
    pub frames: usize,
    pub image_size: u32,
    pub seconds: f64,
    pub seed: u64,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        Self {
            classes: 10,
            train_per_class: 8,
            eval_per_class: 4,
            frames: 2,
            image_size: 48,
            seconds: FrontEndConfig::default().clip_seconds as f64,
            seed: 17,
        }
    }
}

/// Writes WAV clips, PNG frames and `manifest.csv` under `dir`.
pub fn write_dataset(dir: &Path, spec: &DatasetSpec) -> PathBuf {
    let rate = FrontEndConfig::default().target_rate;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    std::fs::create_dir_all(dir.join("audio")).unwrap();
    std::fs::create_dir_all(dir.join("video")).unwrap();
    let mut entries = Vec::new();
    for (split, per_class) in [(Split::Train, spec.train_per_class), (Split::Eval, spec.eval_per_class)] {
        for i in 0..per_class {
            for (c, label) in SceneLabel::ALL.iter().enumerate().take(spec.classes) {
                let id = format!("{split}_{c}_{i}");
                let audio = PathBuf::from(format!("audio/{id}.wav"));
                write_wav(dir.join(&audio), &synth_clip(c, &mut rng, rate, spec.seconds), WavSampleFormat::Int16).unwrap();
                let image_paths = (0..spec.frames)
                    .map(|f| {
                        let p = PathBuf::from(format!("video/{id}_{f}.png"));
                        synth_image(c, &mut rng, spec.image_size).save(dir.join(&p)).unwrap();
                        p
                    })
                    .collect();
                entries.push(ManifestEntry {
                    sample_id: id,
                    label: *label,
                    split: Some(split),
                    audio_path: audio,
                    image_paths,
                });
            }
        }
    }
    let manifest = Manifest::new(entries, dir).unwrap();
    let path = dir.join("manifest.csv");
    write_manifest(&manifest, &path).unwrap();
    path
}

pub fn sha256_file(path: &Path) -> String {
    use sha2::{Digest, Sha256};
    let bytes = std::fs::read(path).unwrap();
    Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
}
