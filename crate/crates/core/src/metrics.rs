//! Pixel-level segmentation scoring: confusion counts, the five standard
//! metrics, and batch reports with mean/std rows.

use std::collections::BTreeSet;
use std::path::Path;

use crate::error::{Error, Result};
use crate::image::BinaryMask;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConfusionCounts {
    pub true_pos: u64,
    pub false_pos: u64,
    pub true_neg: u64,
    pub false_neg: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.true_pos + self.false_pos + self.true_neg + self.false_neg
    }
}

/// Accuracy, sensitivity, specificity, precision and Dice, each in [0,1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegMetrics {
    pub accuracy: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub precision: f64,
    pub dice: f64,
}

/// Exact pixel counts; foreground = `true`.
pub fn confusion(pred: &BinaryMask, gt: &BinaryMask) -> Result<ConfusionCounts> {
    if pred.height() != gt.height() || pred.width() != gt.width() {
        return Err(Error::DimensionMismatch(format!(
            "confusion: prediction {}x{} vs ground truth {}x{}",
            pred.height(),
            pred.width(),
            gt.height(),
            gt.width()
        )));
    }
    let mut c = ConfusionCounts {
        true_pos: 0,
        false_pos: 0,
        true_neg: 0,
        false_neg: 0,
    };
    for (&p, &g) in pred.data().iter().zip(gt.data()) {
        match (p, g) {
            (true, true) => c.true_pos += 1,
            (true, false) => c.false_pos += 1,
            (false, false) => c.true_neg += 1,
            (false, true) => c.false_neg += 1,
        }
    }
    Ok(c)
}

/// The five ratio metrics with explicit zero-denominator conventions:
/// an empty class scores 1.0, and Dice is 1.0 only when both masks are empty.
pub fn compute_metrics(c: &ConfusionCounts) -> Result<SegMetrics> {
    let total = c.total();
    if total == 0 {
        return Err(Error::InvalidConfig(
            "compute_metrics: all confusion counts are zero".into(),
        ));
    }
    let (tp, fp, tn, fn_) = (
        c.true_pos as f64,
        c.false_pos as f64,
        c.true_neg as f64,
        c.false_neg as f64,
    );
    let accuracy = (tp + tn) / total as f64;
    let sensitivity = if c.true_pos + c.false_neg == 0 {
        1.0
    } else {
        tp / (tp + fn_)
    };
    let specificity = if c.true_neg + c.false_pos == 0 {
        1.0
    } else {
        tn / (fp + tn)
    };
    let precision = if c.true_pos + c.false_pos == 0 {
        1.0
    } else {
        tp / (tp + fp)
    };
    let dice = if 2 * c.true_pos + c.false_pos + c.false_neg == 0 {
        // Both masks empty: perfect agreement.
        1.0
    } else if precision + sensitivity == 0.0 {
        0.0
    } else {
        2.0 * precision * sensitivity / (precision + sensitivity)
    };
    Ok(SegMetrics {
        accuracy,
        sensitivity,
        specificity,
        precision,
        dice,
    })
}

/// One scored image of a batch report.
#[derive(Debug, Clone)]
pub struct EvalRow {
    pub name: String,
    pub counts: ConfusionCounts,
    pub metrics: SegMetrics,
}

/// Per-image rows plus mean/std aggregation.
#[derive(Debug, Clone)]
pub struct BatchReport {
    pub rows: Vec<EvalRow>,
}

pub const CSV_HEADER: &str = "image,tp,fp,tn,fn,accuracy,sensitivity,specificity,precision,dice";

impl BatchReport {
    fn columns(row: &EvalRow) -> [f64; 9] {
        [
            row.counts.true_pos as f64,
            row.counts.false_pos as f64,
            row.counts.true_neg as f64,
            row.counts.false_neg as f64,
            row.metrics.accuracy,
            row.metrics.sensitivity,
            row.metrics.specificity,
            row.metrics.precision,
            row.metrics.dice,
        ]
    }

    /// Column means in CSV order (counts then metrics).
    pub fn mean(&self) -> [f64; 9] {
        let mut acc = [0.0f64; 9];
        for row in &self.rows {
            for (a, v) in acc.iter_mut().zip(Self::columns(row)) {
                *a += v;
            }
        }
        let n = self.rows.len() as f64;
        acc.map(|v| v / n)
    }

    /// Population standard deviation per column.
    pub fn std(&self) -> [f64; 9] {
        let mean = self.mean();
        let mut acc = [0.0f64; 9];
        for row in &self.rows {
            for ((a, v), m) in acc.iter_mut().zip(Self::columns(row)).zip(mean) {
                *a += (v - m) * (v - m);
            }
        }
        let n = self.rows.len() as f64;
        acc.map(|v| (v / n).sqrt())
    }

    /// CSV with one row per image plus MEAN and STD rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for row in &self.rows {
            let c = Self::columns(row);
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                row.name,
                row.counts.true_pos,
                row.counts.false_pos,
                row.counts.true_neg,
                row.counts.false_neg,
                c[4],
                c[5],
                c[6],
                c[7],
                c[8]
            ));
        }
        for (label, vals) in [("MEAN", self.mean()), ("STD", self.std())] {
            out.push_str(label);
            for v in vals {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }

    /// Markdown table in the Sensitivity/Specificity/Accuracy/Dice column
    /// order used by the comparison tables.
    pub fn to_markdown(&self) -> String {
        let mut out = String::from("| Image | Sensitivity | Specificity | Accuracy | Dice |\n");
        out.push_str("|---|---|---|---|---|\n");
        for row in &self.rows {
            out.push_str(&format!(
                "| {} | {:.4} | {:.4} | {:.4} | {:.4} |\n",
                row.name,
                row.metrics.sensitivity,
                row.metrics.specificity,
                row.metrics.accuracy,
                row.metrics.dice
            ));
        }
        let m = self.mean();
        out.push_str(&format!(
            "| MEAN | {:.4} | {:.4} | {:.4} | {:.4} |\n",
            m[5], m[6], m[4], m[8]
        ));
        out
    }

    /// Detection-rate / precision / F-measure summary lines, mean ± std.
    pub fn summary_lines(&self) -> String {
        let m = self.mean();
        let s = self.std();
        format!(
            "detection_rate: {:.4} \u{b1} {:.4}\nprecision:      {:.4} \u{b1} {:.4}\nf_measure:      {:.4} \u{b1} {:.4}\n",
            m[5], s[5], m[7], s[7], m[8], s[8]
        )
    }
}

fn png_names(dir: &Path) -> Result<BTreeSet<String>> {
    let mut names = BTreeSet::new();
    let rd = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    for entry in rd {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let path = entry.path();
        if path.extension().and_then(|e| e.to_str()) == Some("png") {
            if let Some(name) = path.file_name().and_then(|n| n.to_str()) {
                names.insert(name.to_string());
            }
        }
    }
    Ok(names)
}

/// Scores every prediction mask in `pred_dir` against the same-named
/// ground-truth mask in `gt_dir`.
pub fn evaluate_batch(pred_dir: &Path, gt_dir: &Path) -> Result<BatchReport> {
    let preds = png_names(pred_dir)?;
    let gts = png_names(gt_dir)?;
    if preds.is_empty() {
        return Err(Error::EmptyDirectory(pred_dir.to_path_buf()));
    }
    let missing: Vec<String> = preds
        .symmetric_difference(&gts)
        .map(|n| n.clone())
        .collect();
    if !missing.is_empty() {
        return Err(Error::UnmatchedFiles(missing.join(", ")));
    }
    let mut rows = Vec::with_capacity(preds.len());
    for name in &preds {
        let pred = BinaryMask::load_png(pred_dir.join(name))?;
        let gt = BinaryMask::load_png(gt_dir.join(name))?;
        let counts = confusion(&pred, &gt)?;
        let metrics = compute_metrics(&counts)?;
        rows.push(EvalRow {
            name: name.clone(),
            counts,
            metrics,
        });
    }
    Ok(BatchReport { rows })
}
