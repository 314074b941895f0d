//! Acceptance suite. Runs without the libtest harness so every criterion
//! prints exactly one PASS/FAIL line; the process exits nonzero if any fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use avfuse::backbone::{BackboneArch, EmbeddingTap, ModelKind};
use avfuse::config::RunConfig;
use avfuse::data_io::{load_backbone, parse_manifest, save_backbone, EmbeddingCache, Split};
use avfuse::dsp::{
    cqt_spectrogram, gammatone_spectrogram, mel_spectrogram, resample, stack_deltas, AudioClip, FrontEndBank,
    FrontEndConfig, SpectrogramKind,
};
use avfuse::fusion::{fuse, init_fusion_params, FusionMethod, FusionParams, Modality};
use avfuse::pipeline;
use avfuse::training::{
    backbone_loss_and_grad, finite_difference_audit, fusion_loss_and_grad, kl_loss, mixup_batch, train_phase2,
    LossConfig, MixupConfig,
};
use avfuse::{load_embedding_set, BackboneModel, EmbeddingSet, EvalReport, FusionModel, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn random_set(tap: EmbeddingTap, d: usize, rng: &mut impl Rng) -> EmbeddingSet {
    EmbeddingSet::with_dim(tap, std::array::from_fn(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect())).unwrap()
}

fn random_params(d: usize, rng: &mut impl Rng) -> FusionParams {
    let mut v = || (0..d).map(|_| rng.random_range(-1.5..1.5)).collect::<Vec<f64>>();
    FusionParams {
        w: std::array::from_fn(|_| v()),
        wa: v(),
        wv: v(),
        b: v(),
    }
}

fn one_hot(c: usize, k: usize) -> Vec<f64> {
    let mut v = vec![0.0; k];
    v[c] = 1.0;
    v
}

fn shape_contract() -> Outcome {
    let cfg = FrontEndConfig::default();
    let bank = FrontEndBank::new(&cfg).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let clips = [
        common::synth_clip(7, &mut rng, 32_000, 10.0),
        AudioClip::new(
            (0..2).map(|_| (0..320_000).map(|_| rng.random_range(-0.5..0.5)).collect()).collect(),
            32_000,
        )
        .unwrap(),
        resample(&common::synth_clip(2, &mut rng, 44_100, 10.0), 32_000).map_err(|e| e.to_string())?,
    ];
    let mut slowest = Duration::ZERO;
    for (ci, clip) in clips.iter().enumerate() {
        for kind in SpectrogramKind::ALL {
            let t = Instant::now();
            let raw = match kind {
                SpectrogramKind::Mel => mel_spectrogram(clip, &cfg),
                SpectrogramKind::Gammatone => gammatone_spectrogram(clip, &cfg),
                SpectrogramKind::Cqt => cqt_spectrogram(clip, &cfg),
            }
            .map_err(|e| e.to_string())?;
            let stacked = stack_deltas(&raw).map_err(|e| e.to_string())?;
            let elapsed = t.elapsed();
            slowest = slowest.max(elapsed);
            ensure(raw.data().shape() == [128, 309, 2], || {
                format!("clip {ci} {kind:?}: front-end shape {:?}", raw.data().shape())
            })?;
            ensure(stacked.data().shape() == [128, 305, 6], || {
                format!("clip {ci} {kind:?}: stacked shape {:?}", stacked.data().shape())
            })?;
            ensure(stacked.data().data().iter().all(|v| v.is_finite()), || format!("clip {ci} {kind:?}: non-finite"))?;
            ensure(elapsed < Duration::from_secs(5), || format!("clip {ci} {kind:?} took {elapsed:?}"))?;
        }
        let bank_out = bank.spectrogram(SpectrogramKind::Mel, clip).map_err(|e| e.to_string())?;
        ensure(bank_out.data().shape() == [128, 309, 2], || "bank shape".into())?;
    }
    Ok(format!("3 clips x 3 front-ends: 128x309x2 -> 128x305x6, slowest {:.2}s", slowest.as_secs_f64()))
}

fn gradient_audit() -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let cfg = LossConfig::default();
    let mut worst: f64 = 0.0;
    for d in [4, 10] {
        for method in FusionMethod::ALL {
            let mut model = FusionModel::new(method, Modality::AudioVisual, d, 10, 3);
            let mut theta = model.trainable_params();
            theta.iter_mut().for_each(|v| *v += rng.random_range(-0.3..0.3));
            model.load_trainable(&theta).map_err(|e| e.to_string())?;
            let sets: Vec<EmbeddingSet> = (0..3).map(|_| random_set(method.tap(), d, &mut rng)).collect();
            let mut soft = vec![0.0; 10];
            soft[3] = 0.35;
            soft[8] = 0.65;
            let targets = vec![one_hot(0, 10), one_hot(6, 10), soft];
            let err = finite_difference_audit(
                |p| {
                    let mut m = model.clone();
                    m.load_trainable(p).unwrap();
                    fusion_loss_and_grad(&m, &sets, &targets, &cfg).unwrap()
                },
                &theta,
                1e-5,
            );
            ensure(err < 1e-4, || format!("{method} at d={d}: relative error {err:.3e}"))?;
            worst = worst.max(err);
        }
    }
    let arch = BackboneArch {
        input_shape: [8, 8, 6],
        conv_widths: vec![3, 4, 4],
        hidden: 12,
        classes: 10,
    };
    let mut bb = BackboneModel::with_arch(ModelKind::AudGam, arch, 4).map_err(|e| e.to_string())?;
    let mut p = bb.flat_params();
    p.iter_mut().for_each(|v| *v += rng.random_range(-0.05..0.05));
    bb.load_flat(&p).map_err(|e| e.to_string())?;
    let inputs: Vec<Tensor> = (0..2).map(|_| Tensor::random_normal(&[8, 8, 6], 1.0, &mut rng)).collect();
    let targets = vec![one_hot(2, 10), {
        let mut y = vec![0.0; 10];
        y[1] = 0.25;
        y[9] = 0.75;
        y
    }];
    let bb_err = finite_difference_audit(
        |theta| {
            let mut m = bb.clone();
            m.load_flat(theta).unwrap();
            backbone_loss_and_grad(&m, &inputs, &targets, &cfg).unwrap()
        },
        &p,
        1e-5,
    );
    ensure(bb_err < 1e-4, || format!("reduced backbone: relative error {bb_err:.3e}"))?;
    let elapsed = t.elapsed();
    ensure(elapsed < Duration::from_secs(60), || format!("audit took {elapsed:?}"))?;
    Ok(format!(
        "6 methods x d in {{4,10}} worst {worst:.2e}; reduced backbone ({} params) {bb_err:.2e}; {:.1}s",
        p.len(),
        elapsed.as_secs_f64()
    ))
}

/// Flat form written out one scalar at a time.
fn flat_oracle(p: &FusionParams, e: &EmbeddingSet) -> Vec<f64> {
    let d = e.dim();
    let v = e.vectors();
    let mut out = vec![0.0; d];
    for k in 0..d {
        let mut s = p.b[k];
        for (e, w) in v.iter().zip(&p.w) {
            s += e[k] * w[k];
        }
        out[k] = s;
    }
    out
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn fusion_algebra() -> Outcome {
    let tol = 1e-12;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    let mut check = |what: &str, a: &[f64], b: &[f64]| -> Result<(), String> {
        let d = max_diff(a, b);
        worst = worst.max(d);
        ensure(d <= tol, || format!("{what}: max difference {d:.3e}"))
    };
    for method in [FusionMethod::F1, FusionMethod::F4] {
        let d = method.tap().dim();
        let e = random_set(method.tap(), d, &mut rng);
        for slot in 0..5 {
            let mut p = FusionParams::zeros(d);
            p.w[slot] = vec![1.0; d];
            let out = fuse(method, &p, &e).map_err(|x| x.to_string())?;
            check(&format!("{method} selector {slot}"), out.data(), &e.vectors()[slot])?;
        }
        let init = init_fusion_params(method, 0);
        let sum: Vec<f64> = (0..d).map(|k| (0..5).map(|i| e.vectors()[i][k]).sum()).collect();
        check(&format!("{method} unit weights"), fuse(method, &init, &e).unwrap().data(), &sum)?;
        let p = random_params(d, &mut rng);
        check(&format!("{method} scalar loop"), fuse(method, &p, &e).unwrap().data(), &flat_oracle(&p, &e))?;
    }
    for hier in [FusionMethod::F2, FusionMethod::F5] {
        let d = hier.tap().dim();
        let e = random_set(hier.tap(), d, &mut rng);
        let p = random_params(d, &mut rng);
        let mul = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(a, b)| a * b).collect::<Vec<f64>>();
        let reduced = FusionParams {
            w: std::array::from_fn(|i| mul(&p.w[i], if i < 3 { &p.wa } else { &p.wv })),
            wa: vec![1.0; d],
            wv: vec![1.0; d],
            b: p.b.clone(),
        };
        let flat = if hier == FusionMethod::F2 { FusionMethod::F1 } else { FusionMethod::F4 };
        check(
            &format!("{hier} -> {flat} reduction"),
            fuse(hier, &p, &e).unwrap().data(),
            fuse(flat, &reduced, &e).unwrap().data(),
        )?;
    }
    for concat in [FusionMethod::F3, FusionMethod::F6] {
        for d in [4, concat.tap().dim()] {
            let e = random_set(concat.tap(), d, &mut rng);
            let out = fuse(concat, &random_params(d, &mut rng), &e).unwrap();
            ensure(out.len() == 2 * d, || format!("{concat} at d={d} gave {} outputs", out.len()))?;
        }
    }
    let vectors: [Vec<f64>; 5] = std::array::from_fn(|_| (0..10).map(|_| rng.random_range(-2.0..2.0)).collect());
    let e1024 = EmbeddingSet::with_dim(EmbeddingTap::Fc1024, vectors.clone()).unwrap();
    let e10 = EmbeddingSet::new(EmbeddingTap::Fc10, vectors).unwrap();
    for low in [FusionMethod::F1, FusionMethod::F2, FusionMethod::F3] {
        let p = random_params(10, &mut rng);
        let a = fuse(low, &p, &e1024).unwrap();
        let b = fuse(low.twin(), &p, &e10).unwrap();
        check(&format!("{low}/{} pairing at d=10", low.twin()), a.data(), b.data())?;
    }
    Ok(format!("selector, unit sum, scalar loop, F2->F1 and F5->F4, concat 2d, twins; worst {worst:.1e}"))
}

fn freeze_invariance(run: Option<&EndToEnd>) -> Outcome {
    let run = run.ok_or("end-to-end run did not produce backbones")?;
    let before: Vec<Vec<u8>> = run.backbone_paths.iter().map(|p| std::fs::read(p).unwrap()).collect();
    let backbones: Vec<BackboneModel> = run
        .backbone_paths
        .iter()
        .map(|p| load_backbone(p).map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;
    let refs: Vec<&BackboneModel> = backbones.iter().collect();
    let cache = EmbeddingCache::open(&run.embeddings).map_err(|e| e.to_string())?;
    let samples = pipeline::cached_samples(&cache).map_err(|e| e.to_string())?;
    let data: Vec<(EmbeddingSet, Vec<f64>)> = samples
        .iter()
        .filter(|s| s.split == Some(Split::Train))
        .map(|s| (load_embedding_set(&cache, &s.sample_id, EmbeddingTap::Fc10).unwrap(), s.label.one_hot()))
        .collect();
    let mut cfg = run.config.phase2();
    cfg.epochs = 20;
    let mut model = FusionModel::new(FusionMethod::F4, Modality::AudioVisual, 10, 10, 0);
    let history = train_phase2(&mut model, &data, &refs, &cfg).map_err(|e| e.to_string())?;
    ensure(history.history.len() == 20, || "expected 20 epochs".into())?;
    let dir = run.dir.join("after_phase2");
    std::fs::create_dir_all(&dir).unwrap();
    for (i, (m, orig)) in backbones.iter().zip(&before).enumerate() {
        let p = dir.join(format!("{i}.ckpt"));
        save_backbone(m, &p).map_err(|e| e.to_string())?;
        let after = std::fs::read(&p).unwrap();
        ensure(&after == orig, || format!("{} checkpoint bytes changed", m.kind()))?;
        ensure(&std::fs::read(&run.backbone_paths[i]).unwrap() == orig, || "checkpoint file changed".into())?;
    }
    Ok(format!("5 backbone checkpoints byte-identical across 20 Phase II epochs ({} samples)", data.len()))
}

fn loss_oracle() -> Outcome {
    let tol = 1e-6;
    let cfg0 = LossConfig {
        lambda_l2: 0.0,
        ..Default::default()
    };
    let row = |v: Vec<f64>| Tensor::new(vec![1, v.len()], v).unwrap();
    let a = kl_loss(&row(vec![1.0, 0.0]), &row(vec![0.5, 0.5]), &[], &cfg0).map_err(|e| e.to_string())?;
    let want_a = 2f64.ln();
    ensure((a - want_a).abs() < tol, || format!("ln 2 case gave {a}"))?;
    let b = kl_loss(&row(vec![0.5, 0.5]), &row(vec![0.25, 0.75]), &[], &cfg0).map_err(|e| e.to_string())?;
    let want_b = 0.5 * (0.5f64 / 0.25).ln() + 0.5 * (0.5f64 / 0.75).ln();
    ensure((b - want_b).abs() < tol, || format!("soft case gave {b}, closed form {want_b}"))?;
    ensure((b - 0.1438).abs() < 5e-5, || format!("soft case {b} does not round to 0.1438"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..100 {
        let raw: Vec<f64> = (0..10).map(|_| rng.random::<f64>() + 1e-3).collect();
        let s: f64 = raw.iter().sum();
        let y = row(raw.iter().map(|v| v / s).collect());
        let z = kl_loss(&y, &y, &[], &cfg0).map_err(|e| e.to_string())?;
        ensure(z.abs() < tol, || format!("y == yhat gave {z}"))?;
    }
    let cfg2 = LossConfig {
        lambda_l2: 2.0,
        ..Default::default()
    };
    let y = row(vec![0.3, 0.7]);
    let r = kl_loss(&y, &y, &[1.0, 1.0], &cfg2).map_err(|e| e.to_string())?;
    ensure((r - 2.0).abs() < tol, || format!("pure regularizer gave {r}"))?;
    Ok(format!("ln2 err {:.1e}; soft case {b:.6} err {:.1e}; identity 0; regularizer 2", (a - want_a).abs(), (b - want_b).abs()))
}

fn mixup_validity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let cfg = MixupConfig {
        alpha: 0.4,
        enabled: true,
    };
    let mut worst: f64 = 0.0;
    let mut rows = 0usize;
    for draw in 0..10_000 {
        let batch = 1 + draw % 6;
        let k = 10;
        let mut ys = Vec::with_capacity(batch * k);
        for i in 0..batch {
            if (draw + i) % 3 == 0 {
                let raw: Vec<f64> = (0..k).map(|_| rng.random::<f64>()).collect();
                let s: f64 = raw.iter().sum();
                ys.extend(raw.iter().map(|v| v / s));
            } else {
                ys.extend(one_hot(rng.random_range(0..k), k));
            }
        }
        let xs = Tensor::random_normal(&[batch, 3], 1.0, &mut rng);
        let ys = Tensor::new(vec![batch, k], ys).unwrap();
        let (_, mixed) = mixup_batch(&xs, &ys, &cfg, &mut rng).map_err(|e| e.to_string())?;
        for r in mixed.data().chunks(k) {
            ensure(r.iter().all(|v| *v >= 0.0), || format!("negative entry in {r:?}"))?;
            let s: f64 = r.iter().sum();
            worst = worst.max((s - 1.0).abs());
            rows += 1;
        }
    }
    ensure(worst <= 1e-12, || format!("row sum off by {worst:.3e}"))?;
    Ok(format!("10000 draws, {rows} rows, max |sum - 1| = {worst:.1e}, all nonnegative"))
}

struct EndToEnd {
    dir: PathBuf,
    config: RunConfig,
    backbone_paths: Vec<PathBuf>,
    embeddings: PathBuf,
    reports: Vec<EvalReport>,
    elapsed: Duration,
}

fn run_end_to_end(dir: &Path) -> Result<EndToEnd, String> {
    let e = |x: avfuse::Error| x.to_string();
    let manifest_path = common::write_dataset(dir, &common::DatasetSpec::default());
    let t = Instant::now();
    let manifest = parse_manifest(&manifest_path).map_err(e)?;
    let spectrograms = dir.join("spectrograms.avf");
    let summary = pipeline::extract(&manifest, &SpectrogramKind::ALL, &spectrograms, 4).map_err(e)?;
    ensure(summary.failures.is_empty(), || format!("extraction failures: {:?}", summary.failures))?;
    let spec_cache = EmbeddingCache::open(&spectrograms).map_err(e)?;
    let cfg = RunConfig {
        phase1_epochs: 6,
        phase1_lr: 3e-3,
        ..Default::default()
    };
    let mut backbones = Vec::new();
    let mut backbone_paths = Vec::new();
    for kind in ModelKind::ALL {
        let (model, _) = pipeline::train_backbone(kind, &manifest, Some(&spec_cache), &cfg).map_err(e)?;
        let p = dir.join(format!("{}.ckpt", kind.as_str()));
        save_backbone(&model, &p).map_err(e)?;
        backbones.push(model);
        backbone_paths.push(p);
    }
    let embeddings = dir.join("embeddings.avf");
    pipeline::export_embeddings(&backbones, &manifest, Some(&spec_cache), &[EmbeddingTap::Fc10], &embeddings).map_err(e)?;
    let emb_cache = EmbeddingCache::open(&embeddings).map_err(e)?;
    let mut reports = Vec::new();
    for mode in [Modality::Audio, Modality::Visual, Modality::AudioVisual] {
        let (model, _) = pipeline::train_fusion(FusionMethod::F4, mode, &emb_cache, &cfg).map_err(e)?;
        reports.push(pipeline::evaluate_fusion(&model, &manifest, &emb_cache, Split::Eval).map_err(e)?);
    }
    Ok(EndToEnd {
        dir: dir.to_path_buf(),
        config: cfg,
        backbone_paths,
        embeddings,
        reports,
        elapsed: t.elapsed(),
    })
}

fn end_to_end(run: &Result<EndToEnd, String>) -> Outcome {
    let run = run.as_ref().map_err(Clone::clone)?;
    let [audio, visual, fused] = [&run.reports[0], &run.reports[1], &run.reports[2]];
    let summary = format!(
        "held-out accuracy audio {:.1}%, visual {:.1}%, fused {:.1}%; pipeline {:.0}s",
        audio.overall_accuracy,
        visual.overall_accuracy,
        fused.overall_accuracy,
        run.elapsed.as_secs_f64()
    );
    ensure(fused.overall_accuracy >= 95.0, || format!("fused below 95%: {summary}"))?;
    ensure(
        fused.overall_accuracy >= audio.overall_accuracy && fused.overall_accuracy >= visual.overall_accuracy,
        || format!("fusion below a single mode: {summary}"),
    )?;
    ensure(run.elapsed < Duration::from_secs(15 * 60), || format!("too slow: {summary}"))?;
    Ok(summary)
}

fn cli(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_avfuse"))
        .args(args)
        .env_remove("AVFUSE_SEED")
        .output()
        .map_err(|e| e.to_string())?;
    ensure(out.status.success(), || {
        format!("avfuse {} failed: {}", args.join(" "), String::from_utf8_lossy(&out.stderr))
    })
}

fn cli_run(data: &Path, run: &Path) -> Result<Vec<PathBuf>, String> {
    let s = |p: &Path| p.to_str().unwrap().to_string();
    let manifest = s(&data.join("manifest.csv"));
    let config = data.join("run.config");
    let spectrograms = s(&run.join("spectrograms.avf"));
    let embeddings = s(&run.join("embeddings.avf"));
    cli(&["extract", "--config", &s(&config), "--manifest", &manifest, "--out-cache", &spectrograms])?;
    let mut ckpts = Vec::new();
    for kind in ModelKind::ALL {
        let ckpt = s(&run.join(format!("{}.ckpt", kind.as_str())));
        cli(&[
            "train-phase1", "--config", &s(&config), "--model", kind.as_str(), "--cache", &spectrograms,
            "--manifest", &manifest, "--out-checkpoint", &ckpt,
        ])?;
        ckpts.push(ckpt);
    }
    let mut export = vec!["export-embeddings", "--config", config.to_str().unwrap(), "--checkpoints"];
    export.extend(ckpts.iter().map(String::as_str));
    export.extend(["--cache", &spectrograms, "--manifest", &manifest, "--out-cache", &embeddings]);
    cli(&export)?;
    let fusion = s(&run.join("f4_av.ckpt"));
    cli(&["train-phase2", "--config", &s(&config), "--fusion", "f4", "--cache", &embeddings, "--out-checkpoint", &fusion])?;
    let reports = run.join("reports");
    cli(&[
        "evaluate", "--config", &s(&config), "--checkpoint", &fusion, "--cache", &embeddings, "--manifest", &manifest,
        "--report-dir", &s(&reports),
    ])?;
    let mut artifacts: Vec<PathBuf> = ckpts.iter().map(PathBuf::from).collect();
    artifacts.push(PathBuf::from(fusion));
    let mut report_files: Vec<PathBuf> = std::fs::read_dir(&reports)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| !p.to_string_lossy().ends_with(".config.txt"))
        .collect();
    report_files.sort();
    ensure(report_files.len() == 3, || format!("expected 3 report files, found {report_files:?}"))?;
    artifacts.extend(report_files);
    Ok(artifacts)
}

fn determinism(dir: &Path) -> Outcome {
    let data = dir.join("data");
    let spec = common::DatasetSpec {
        train_per_class: 1,
        eval_per_class: 1,
        frames: 1,
        seed: 23,
        ..Default::default()
    };
    common::write_dataset(&data, &spec);
    std::fs::write(data.join("run.config"), "seed = 5\nphase1_epochs = 2\nphase1_lr = 0.003\nphase2_epochs = 10\nbatch_size = 4\n")
        .unwrap();
    let a = cli_run(&data, &dir.join("run_a"))?;
    let b = cli_run(&data, &dir.join("run_b"))?;
    ensure(a.len() == b.len(), || "artifact lists differ".into())?;
    for (x, y) in a.iter().zip(&b) {
        ensure(x.file_name() == y.file_name(), || format!("{x:?} vs {y:?}"))?;
        ensure(common::sha256_file(x) == common::sha256_file(y), || {
            format!("{} differs between runs", x.file_name().unwrap().to_string_lossy())
        })?;
    }
    Ok(format!("{} checkpoints and reports byte-identical across two CLI runs", a.len()))
}

fn guarded(f: impl FnOnce() -> Outcome) -> Outcome {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panic".into());
        Err(format!("panicked: {msg}"))
    })
}

fn main() {
    let tmp = tempfile::tempdir().expect("temp dir");
    let e2e_dir = tmp.path().join("e2e");
    let det_dir = tmp.path().join("determinism");
    let e2e = catch_unwind(AssertUnwindSafe(|| run_end_to_end(&e2e_dir)))
        .unwrap_or_else(|_| Err("end-to-end run panicked".into()));

    let results: Vec<(&str, Outcome)> = vec![
        ("1 shape contract", guarded(shape_contract)),
        ("2 gradient audit", guarded(gradient_audit)),
        ("3 fusion algebra", guarded(fusion_algebra)),
        ("4 freeze invariance", guarded(|| freeze_invariance(e2e.as_ref().ok()))),
        ("5 loss oracle", guarded(loss_oracle)),
        ("6 mixup validity", guarded(mixup_validity)),
        ("7 end-to-end synthetic", guarded(|| end_to_end(&e2e))),
        ("8 determinism", guarded(|| determinism(&det_dir))),
    ];
    let mut failed = 0;
    for (name, r) in &results {
        match r {
            Ok(msg) => println!("criterion {name}: PASS ({msg})"),
            Err(msg) => {
                failed += 1;
                println!("criterion {name}: FAIL ({msg})");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
