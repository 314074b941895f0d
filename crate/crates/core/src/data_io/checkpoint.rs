use std::path::Path;

use super::container::{ContainerReader, ContainerWriter, DType};
use crate::backbone::{BackboneArch, BackboneModel, Conv3x3, InputNorm, ModelKind};
use crate::error::{Error, Result};
use crate::fusion::{FusionMethod, FusionModel, FusionParams, Modality, PARAM_NAMES};
use crate::tensor::{DenseLayer, Tensor};

const TYPE_KEY: &str = "checkpoint/type";
const BACKBONE_TYPE: f64 = 1.0;
const FUSION_TYPE: f64 = 2.0;

fn scalar(v: f64) -> Tensor {
    Tensor::vector(vec![v])
}

fn write_dense(w: &mut ContainerWriter, name: &str, layer: &DenseLayer) -> Result<()> {
    w.write(&format!("{name}/weight"), layer.weights(), DType::F64)?;
    w.write(&format!("{name}/bias"), layer.bias(), DType::F64)
}

fn read_dense(r: &ContainerReader, name: &str) -> Result<DenseLayer> {
    let weights = r.read(&format!("{name}/weight"))?;
    let bias = r.read(&format!("{name}/bias"))?;
    DenseLayer::new(weights, bias).map_err(|e| Error::Format(format!("{name}: {e}")))
}

fn read_scalar(r: &ContainerReader, key: &str) -> Result<f64> {
    let t = r.read(key).map_err(|e| match e {
        Error::NotFound(_) => Error::Format(format!("{}: missing '{key}'", r.path().display())),
        other => other,
    })?;
    match t.data() {
        [v] => Ok(*v),
        _ => Err(Error::Format(format!("'{key}' is not a scalar"))),
    }
}

fn expect_type(r: &ContainerReader, want: f64, what: &str) -> Result<()> {
    let got = read_scalar(r, TYPE_KEY)?;
    if got != want {
        return Err(Error::Format(format!("{} is not a {what} checkpoint", r.path().display())));
    }
    Ok(())
}

fn small_int(v: f64, what: &str) -> Result<usize> {
    if v >= 0.0 && v.fract() == 0.0 && v < 1e9 {
        Ok(v as usize)
    } else {
        Err(Error::Format(format!("bad {what} {v}")))
    }
}

pub fn save_backbone(model: &BackboneModel, path: impl AsRef<Path>) -> Result<()> {
    let mut w = ContainerWriter::create(path)?;
    w.write(TYPE_KEY, &scalar(BACKBONE_TYPE), DType::F64)?;
    w.write("backbone/kind", &scalar(model.kind.index() as f64), DType::F64)?;
    let arch = &model.arch;
    let mut a: Vec<f64> = arch.input_shape.iter().map(|&v| v as f64).collect();
    a.push(arch.hidden as f64);
    a.push(arch.classes as f64);
    a.extend(arch.conv_widths.iter().map(|&v| v as f64));
    w.write("backbone/arch", &Tensor::vector(a), DType::F64)?;
    w.write("backbone/frozen", &scalar(f64::from(u8::from(model.frozen))), DType::F64)?;
    w.write("norm/mean", &Tensor::vector(model.norm.mean.clone()), DType::F64)?;
    w.write("norm/std", &Tensor::vector(model.norm.std.clone()), DType::F64)?;
    for (i, c) in model.convs.iter().enumerate() {
        let wt = Tensor::new(vec![3, 3, c.in_ch, c.out_ch], c.weights.clone())?;
        w.write(&format!("conv{i}/weight"), &wt, DType::F64)?;
        w.write(&format!("conv{i}/bias"), &Tensor::vector(c.bias.clone()), DType::F64)?;
    }
    write_dense(&mut w, "fc1", &model.fc1)?;
    write_dense(&mut w, "fc2", &model.fc2)?;
    w.finish()
}

pub fn load_backbone(path: impl AsRef<Path>) -> Result<BackboneModel> {
    let r = ContainerReader::open(path)?;
    expect_type(&r, BACKBONE_TYPE, "backbone")?;
    let kind = ModelKind::from_index(small_int(read_scalar(&r, "backbone/kind")?, "model kind")?)
        .ok_or_else(|| Error::Format("unknown model kind".into()))?;
    let a = r.read("backbone/arch")?;
    let a: Vec<usize> = a
        .data()
        .iter()
        .map(|&v| small_int(v, "layer width"))
        .collect::<Result<_>>()?;
    if a.len() < 6 {
        return Err(Error::Format("truncated architecture record".into()));
    }
    let arch = BackboneArch {
        input_shape: [a[0], a[1], a[2]],
        hidden: a[3],
        classes: a[4],
        conv_widths: a[5..].to_vec(),
    };
    let mut model = BackboneModel::with_arch(kind, arch, 0).map_err(|e| Error::Format(e.to_string()))?;
    model
        .set_input_norm(InputNorm {
            mean: r.read("norm/mean")?.into_data(),
            std: r.read("norm/std")?.into_data(),
        })
        .map_err(|e| Error::Format(format!("input norm: {e}")))?;
    let mut in_ch = model.arch.input_shape[2];
    for i in 0..model.convs.len() {
        let out_ch = model.arch.conv_widths[i];
        let wt = r.read(&format!("conv{i}/weight"))?;
        let bias = r.read(&format!("conv{i}/bias"))?;
        if wt.shape() != [3, 3, in_ch, out_ch] || bias.len() != out_ch {
            return Err(Error::Format(format!("conv{i} has shape {:?}", wt.shape())));
        }
        model.convs[i] = Conv3x3 {
            in_ch,
            out_ch,
            weights: wt.into_data(),
            bias: bias.into_data(),
        };
        in_ch = out_ch;
    }
    let fc1 = read_dense(&r, "fc1")?;
    let fc2 = read_dense(&r, "fc2")?;
    if (fc1.in_dim(), fc1.out_dim()) != (model.fc1.in_dim(), model.fc1.out_dim())
        || (fc2.in_dim(), fc2.out_dim()) != (model.fc2.in_dim(), model.fc2.out_dim())
    {
        return Err(Error::Format("dense head does not match architecture".into()));
    }
    model.fc1 = fc1;
    model.fc2 = fc2;
    model.frozen = read_scalar(&r, "backbone/frozen")? != 0.0;
    Ok(model)
}

/// Model kind stored in a backbone checkpoint, without loading weights.
pub fn checkpoint_kind(path: impl AsRef<Path>) -> Result<ModelKind> {
    let r = ContainerReader::open(path)?;
    expect_type(&r, BACKBONE_TYPE, "backbone")?;
    ModelKind::from_index(small_int(read_scalar(&r, "backbone/kind")?, "model kind")?)
        .ok_or_else(|| Error::Format("unknown model kind".into()))
}

pub fn save_fusion(model: &FusionModel, path: impl AsRef<Path>) -> Result<()> {
    let mut w = ContainerWriter::create(path)?;
    w.write(TYPE_KEY, &scalar(FUSION_TYPE), DType::F64)?;
    w.write("fusion/method", &scalar(model.method.number() as f64), DType::F64)?;
    w.write("fusion/mode", &scalar(model.modality.index() as f64), DType::F64)?;
    for (name, v) in model.params.named_vectors() {
        w.write(&format!("fusion/{name}"), &Tensor::vector(v.to_vec()), DType::F64)?;
    }
    write_dense(&mut w, "head", &model.head)?;
    w.finish()
}

pub fn load_fusion(path: impl AsRef<Path>) -> Result<FusionModel> {
    let r = ContainerReader::open(path)?;
    expect_type(&r, FUSION_TYPE, "fusion")?;
    let method = FusionMethod::from_number(small_int(read_scalar(&r, "fusion/method")?, "fusion method")?)
        .ok_or_else(|| Error::Format("unknown fusion method".into()))?;
    let modality = Modality::from_index(small_int(read_scalar(&r, "fusion/mode")?, "mode")?)
        .ok_or_else(|| Error::Format("unknown mode".into()))?;
    let mut vs = PARAM_NAMES
        .iter()
        .map(|n| r.read(&format!("fusion/{n}")).map(Tensor::into_data))
        .collect::<Result<Vec<_>>>()?
        .into_iter();
    let mut next = || vs.next().unwrap();
    let params = FusionParams {
        w: std::array::from_fn(|_| next()),
        wa: next(),
        wv: next(),
        b: next(),
    };
    let d = params.dim();
    if params.named_vectors().iter().any(|(_, v)| v.len() != d) {
        return Err(Error::Format("fusion vectors differ in length".into()));
    }
    let head = read_dense(&r, "head")?;
    if head.in_dim() != method.output_dim(d) {
        return Err(Error::Format(format!(
            "head input {} does not match {method} output {}",
            head.in_dim(),
            method.output_dim(d)
        )));
    }
    Ok(FusionModel {
        method,
        modality,
        params,
        head,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backbone::EmbeddingSet;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small(kind: ModelKind) -> BackboneModel {
        let arch = BackboneArch {
            input_shape: [8, 8, 3],
            conv_widths: vec![2, 4],
            hidden: 6,
            classes: 10,
        };
        BackboneModel::with_arch(kind, arch, 5).unwrap()
    }

    #[test]
    fn backbone_round_trip_restores_behavior() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("b.ckpt");
        let mut m = small(ModelKind::VisConv);
        m.set_input_norm(InputNorm {
            mean: vec![0.1, 0.2, 0.3],
            std: vec![1.5, 2.0, 0.5],
        })
        .unwrap();
        m.freeze();
        save_backbone(&m, &path).unwrap();
        let probe = Tensor::random_normal(&[8, 8, 3], 1.0, &mut ChaCha8Rng::seed_from_u64(1));
        let before = m.forward(&probe).unwrap();

        let mut mutated = m.clone();
        mutated.unfreeze();
        let zeros = vec![0.0; mutated.param_count()];
        mutated.load_flat(&zeros).unwrap();
        assert_ne!(mutated.forward(&probe).unwrap(), before);

        let back = load_backbone(&path).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.forward(&probe).unwrap(), before);
        assert_eq!(checkpoint_kind(&path).unwrap(), ModelKind::VisConv);
    }

    #[test]
    fn fusion_round_trip_identical_logits() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.ckpt");
        let mut m = FusionModel::new(FusionMethod::F6, Modality::AudioVisual, 10, 10, 3);
        m.params.wa[2] = 0.25;
        save_fusion(&m, &path).unwrap();
        let back = load_fusion(&path).unwrap();
        assert_eq!(back, m);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let e = EmbeddingSet::new(
            crate::backbone::EmbeddingTap::Fc10,
            std::array::from_fn(|_| Tensor::random_normal(&[10], 1.0, &mut rng).into_data()),
        )
        .unwrap();
        assert_eq!(back.logits(&e).unwrap(), m.logits(&e).unwrap());
    }

    #[test]
    fn wrong_magic_and_wrong_type() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.ckpt");
        save_fusion(&FusionModel::new(FusionMethod::F4, Modality::Audio, 10, 10, 0), &path).unwrap();
        assert!(matches!(load_backbone(&path), Err(Error::Format(_))));
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[..4].copy_from_slice(b"NOPE");
        std::fs::write(&path, bytes).unwrap();
        assert!(matches!(load_fusion(&path), Err(Error::Format(_))));
    }

    #[test]
    fn save_is_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let m = small(ModelKind::VisInc);
        save_backbone(&m, dir.path().join("a")).unwrap();
        save_backbone(&m, dir.path().join("b")).unwrap();
        assert_eq!(std::fs::read(dir.path().join("a")).unwrap(), std::fs::read(dir.path().join("b")).unwrap());
    }
}
