//! Accuracy, per-class recall and confusion matrices.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::backbone::EmbeddingSet;
use crate::data_io::SceneLabel;
use crate::error::{Error, Result};
use crate::fusion::{FusionModel, Modality};

const K: usize = SceneLabel::COUNT;

/// Rows are true classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ConfusionMatrix {
    counts: [[u64; K]; K],
}

impl ConfusionMatrix {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, truth: usize, predicted: usize) {
        self.counts[truth][predicted] += 1;
    }

    pub fn counts(&self) -> &[[u64; K]; K] {
        &self.counts
    }

    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth][predicted]
    }

    pub fn row_sum(&self, truth: usize) -> u64 {
        self.counts[truth].iter().sum()
    }

    pub fn total(&self) -> u64 {
        (0..K).map(|r| self.row_sum(r)).sum()
    }

    pub fn trace(&self) -> u64 {
        (0..K).map(|c| self.counts[c][c]).sum()
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) {
        for r in 0..K {
            for c in 0..K {
                self.counts[r][c] += other.counts[r][c];
            }
        }
    }

    /// CSV grid with class names on both axes.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("true\\predicted");
        for l in SceneLabel::ALL {
            let _ = write!(s, ",{l}");
        }
        s.push('\n');
        for (r, l) in SceneLabel::ALL.iter().enumerate() {
            s.push_str(l.as_str());
            for c in 0..K {
                let _ = write!(s, ",{}", self.counts[r][c]);
            }
            s.push('\n');
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub mode: Modality,
    /// Percent.
    pub overall_accuracy: f64,
    /// Percent recall per class; `None` for classes absent from the truths.
    pub per_class_accuracy: [Option<f64>; K],
    pub confusion: ConfusionMatrix,
}

impl EvalReport {
    pub fn with_mode(mut self, mode: Modality) -> Self {
        self.mode = mode;
        self
    }

    pub fn to_table(&self) -> String {
        let mut s = format!("mode: {}\n", self.mode.report_name());
        let _ = writeln!(s, "{:<20}{:>10}{:>12}", "class", "accuracy", "correct");
        for (c, l) in SceneLabel::ALL.iter().enumerate() {
            let acc = self.per_class_accuracy[c].map_or_else(|| "n/a".to_string(), |a| format!("{a:.2}%"));
            let _ = writeln!(
                s,
                "{:<20}{:>10}{:>12}",
                l.as_str(),
                acc,
                format!("{}/{}", self.confusion.get(c, c), self.confusion.row_sum(c))
            );
        }
        let _ = writeln!(
            s,
            "{:<20}{:>10}{:>12}",
            "overall",
            format!("{:.2}%", self.overall_accuracy),
            format!("{}/{}", self.confusion.trace(), self.confusion.total())
        );
        s
    }

    pub fn to_tsv(&self) -> String {
        let mut s = String::from("mode\tclass\taccuracy\tcorrect\ttotal\n");
        let mode = self.mode.report_name();
        for (c, l) in SceneLabel::ALL.iter().enumerate() {
            let acc = self.per_class_accuracy[c].map_or_else(|| "NA".to_string(), |a| format!("{a:.4}"));
            let _ = writeln!(
                s,
                "{mode}\t{l}\t{acc}\t{}\t{}",
                self.confusion.get(c, c),
                self.confusion.row_sum(c)
            );
        }
        let _ = writeln!(
            s,
            "{mode}\toverall\t{:.4}\t{}\t{}",
            self.overall_accuracy,
            self.confusion.trace(),
            self.confusion.total()
        );
        s
    }

    /// Writes `<mode>_report.txt`, `<mode>_report.tsv` and
    /// `<mode>_confusion.csv` into `dir`.
    pub fn write_files(&self, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))?;
        let stem = self.mode.report_name();
        let files = [
            (format!("{stem}_report.txt"), self.to_table()),
            (format!("{stem}_report.tsv"), self.to_tsv()),
            (format!("{stem}_confusion.csv"), self.confusion.to_csv()),
        ];
        let mut written = Vec::new();
        for (name, body) in files {
            let p = dir.join(name);
            std::fs::write(&p, body).map_err(|e| Error::file(&p, e))?;
            written.push(p);
        }
        Ok(written)
    }
}

/// Index of the largest posterior; ties go to the lowest class index.
pub fn predict_class(posteriors: &[f64]) -> usize {
    crate::training::argmax(posteriors)
}

pub fn evaluate(predictions: &[usize], truths: &[usize]) -> Result<EvalReport> {
    if predictions.len() != truths.len() {
        return Err(Error::Validation(format!(
            "{} predictions for {} truths",
            predictions.len(),
            truths.len()
        )));
    }
    if predictions.is_empty() {
        return Err(Error::Validation("nothing to evaluate".into()));
    }
    if let Some(bad) = predictions.iter().chain(truths).find(|&&i| i >= K) {
        return Err(Error::Validation(format!("class index {bad} out of range")));
    }
    let mut confusion = ConfusionMatrix::new();
    for (&p, &t) in predictions.iter().zip(truths) {
        confusion.add(t, p);
    }
    let per_class_accuracy = std::array::from_fn(|c| {
        let n = confusion.row_sum(c);
        (n > 0).then(|| 100.0 * confusion.get(c, c) as f64 / n as f64)
    });
    Ok(EvalReport {
        mode: Modality::AudioVisual,
        overall_accuracy: 100.0 * confusion.trace() as f64 / confusion.total() as f64,
        per_class_accuracy,
        confusion,
    })
}

pub fn predict_all(model: &FusionModel, sets: &[EmbeddingSet]) -> Result<Vec<usize>> {
    sets.iter().map(|e| Ok(predict_class(&model.logits(e)?.into_data()))).collect()
}

/// Reports for the audio-only, visual-only and fused heads, in that order,
/// on the same samples.
pub fn modal_ablation(models: &[FusionModel], sets: &[EmbeddingSet], truths: &[usize]) -> Result<Vec<EvalReport>> {
    Modality::ALL
        .iter()
        .map(|&mode| {
            let model = models
                .iter()
                .find(|m| m.modality == mode)
                .ok_or_else(|| Error::Config(format!("no trained head for mode '{mode}'")))?;
            Ok(evaluate(&predict_all(model, sets)?, truths)?.with_mode(mode))
        })
        .collect()
}
