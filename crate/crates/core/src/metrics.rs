//! Per-class confusion counts and the evaluation protocol built on them.
//!
//! Every class is scored as a binary problem: IoU = tp / (tp + fp + fn) and
//! OA = (tp + tn) / N over the non-ignored pixels. Dataset-level figures are
//! macro averages over classes.

use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::BinaryMask;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

impl Add for ConfusionCounts {
    type Output = ConfusionCounts;

    fn add(self, rhs: Self) -> Self {
        ConfusionCounts {
            tp: self.tp + rhs.tp,
            fp: self.fp + rhs.fp,
            fn_: self.fn_ + rhs.fn_,
            tn: self.tn + rhs.tn,
        }
    }
}

impl AddAssign for ConfusionCounts {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl std::iter::Sum for ConfusionCounts {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::default(), Add::add)
    }
}

/// Counts the four outcomes over pixels where `ignore` is unset.
pub fn confusion_counts(pred: &BinaryMask, gt: &BinaryMask, ignore: Option<&BinaryMask>) -> Result<ConfusionCounts> {
    pred.ensure_same_dims(gt)?;
    // Index into a 2x2 table: bit 1 = pred, bit 0 = gt.
    let mut table = [0u64; 4];
    match ignore {
        Some(ignore) => {
            pred.ensure_same_dims(ignore)?;
            for ((&p, &g), &skip) in pred.bits().iter().zip(gt.bits()).zip(ignore.bits()) {
                table[((p as usize) << 1) | g as usize] += (!skip) as u64;
            }
        }
        None => {
            for (&p, &g) in pred.bits().iter().zip(gt.bits()) {
                table[((p as usize) << 1) | g as usize] += 1;
            }
        }
    }
    Ok(ConfusionCounts {
        tn: table[0b00],
        fn_: table[0b01],
        fp: table[0b10],
        tp: table[0b11],
    })
}

/// `1.0` when the class is absent and never predicted.
pub fn iou(c: &ConfusionCounts) -> f64 {
    let denom = c.tp + c.fp + c.fn_;
    if denom == 0 {
        return 1.0;
    }
    c.tp as f64 / denom as f64
}

pub fn oa(c: &ConfusionCounts) -> Result<f64> {
    let total = c.total();
    if total == 0 {
        return Err(Error::InvalidArgument(
            "overall accuracy over zero evaluated pixels".into(),
        ));
    }
    Ok((c.tp + c.tn) as f64 / total as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub class_id: u32,
    pub label: String,
    pub counts: ConfusionCounts,
    pub iou: f64,
    pub oa: f64,
}

impl ClassReport {
    pub fn from_counts(class_id: u32, label: impl Into<String>, counts: ConfusionCounts) -> Result<Self> {
        Ok(Self {
            class_id,
            label: label.into(),
            counts,
            iou: iou(&counts),
            oa: oa(&counts)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetReport {
    pub classes: Vec<ClassReport>,
    pub miou: f64,
    pub oa: f64,
}

pub fn aggregate(reports: &[ClassReport]) -> Result<DatasetReport> {
    if reports.is_empty() {
        return Err(Error::InvalidArgument("aggregate over zero classes".into()));
    }
    let n = reports.len() as f64;
    let miou = reports.iter().map(|r| r.iou).sum::<f64>() / n;
    let oa = reports.iter().map(|r| r.oa).sum::<f64>() / n;
    Ok(DatasetReport {
        classes: reports.to_vec(),
        miou,
        oa,
    })
}

/// Maximum score over classes: the protocol for class-agnostic predictions.
pub fn best_over_classes<K>(scores: impl IntoIterator<Item = (K, f64)>) -> Result<f64> {
    scores
        .into_iter()
        .map(|(_, v)| v)
        .reduce(f64::max)
        .ok_or_else(|| Error::InvalidArgument("best_over_classes over zero classes".into()))
}
