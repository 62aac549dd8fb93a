use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imagecore::LabelMap;

/// A label counts toward a split or merge when it holds at least this
/// fraction of a truth cell.
pub const SPLIT_MERGE_FRACTION: f64 = 0.2;

/// Dice at or above which a truth cell counts as detected.
pub const DETECTION_DICE: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentationMetrics {
    /// `(truth id, best-overlap Dice)` in ascending id order.
    pub per_cell_dice: Vec<(u32, f64)>,
    pub mean_dice: f64,
    pub detected: usize,
    pub splits: usize,
    pub merges: usize,
    pub truth_cells: usize,
    /// Distinct non-background predicted labels.
    pub n_labels_used: usize,
}

/// Matches every truth cell to the non-background predicted label with the
/// largest intersection and reports Dice, splits and merges.
pub fn segmentation_metrics(predicted: &LabelMap, truth: &LabelMap) -> Result<SegmentationMetrics> {
    if predicted.dims() != truth.dims() {
        return Err(Error::DimensionMismatch {
            expected: truth.dims(),
            got: predicted.dims(),
        });
    }
    let mut truth_size: HashMap<u32, usize> = HashMap::new();
    let mut pred_size: HashMap<u32, usize> = HashMap::new();
    let mut overlap: HashMap<(u32, u32), usize> = HashMap::new();
    for (&t, &p) in truth.labels().iter().zip(predicted.labels()) {
        if t != 0 {
            *truth_size.entry(t).or_default() += 1;
        }
        if p != 0 {
            *pred_size.entry(p).or_default() += 1;
        }
        if t != 0 && p != 0 {
            *overlap.entry((t, p)).or_default() += 1;
        }
    }

    let mut by_truth: HashMap<u32, Vec<(u32, usize)>> = HashMap::new();
    for (&(t, p), &n) in &overlap {
        by_truth.entry(t).or_default().push((p, n));
    }

    let mut ids: Vec<u32> = truth_size.keys().copied().collect();
    ids.sort_unstable();
    let mut per_cell_dice = Vec::with_capacity(ids.len());
    let mut splits = 0;
    let mut claims: HashMap<u32, usize> = HashMap::new();
    for &t in &ids {
        let size = truth_size[&t];
        let parts = by_truth.get(&t).map(Vec::as_slice).unwrap_or(&[]);
        let dice = parts
            .iter()
            .map(|&(p, n)| 2.0 * n as f64 / (size + pred_size[&p]) as f64)
            .fold(0.0, f64::max);
        per_cell_dice.push((t, dice));
        let mut big = 0;
        for &(p, n) in parts {
            if n as f64 >= SPLIT_MERGE_FRACTION * size as f64 {
                big += 1;
                *claims.entry(p).or_default() += 1;
            }
        }
        if big >= 2 {
            splits += 1;
        }
    }
    let merges = claims.values().filter(|&&n| n >= 2).count();
    let mean_dice = if ids.is_empty() {
        if pred_size.is_empty() { 1.0 } else { 0.0 }
    } else {
        per_cell_dice.iter().map(|(_, d)| d).sum::<f64>() / ids.len() as f64
    };
    Ok(SegmentationMetrics {
        detected: per_cell_dice.iter().filter(|(_, d)| *d >= DETECTION_DICE).count(),
        per_cell_dice,
        mean_dice,
        splits,
        merges,
        truth_cells: ids.len(),
        n_labels_used: pred_size.len(),
    })
}

/// Flat metrics document. Accuracy fields are present when a
/// cross-validation run accompanies the segmentation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub mean_dice: f64,
    pub accuracy_mean: Option<f64>,
    pub accuracy_std: Option<f64>,
    pub splits: usize,
    pub merges: usize,
    pub n_labels_used: usize,
}

impl MetricsReport {
    pub fn from_metrics(m: &SegmentationMetrics) -> Self {
        MetricsReport {
            mean_dice: m.mean_dice,
            accuracy_mean: None,
            accuracy_std: None,
            splits: m.splits,
            merges: m.merges,
            n_labels_used: m.n_labels_used,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain struct serializes")
    }

    /// `key = value` lines; absent values are written as `none`.
    pub fn to_text(&self) -> String {
        let opt = |v: Option<f64>| v.map_or("none".to_string(), |v| format!("{v:.6}"));
        format!(
            "mean_dice = {:.6}\naccuracy_mean = {}\naccuracy_std = {}\nsplits = {}\nmerges = {}\nn_labels_used = {}\n",
            self.mean_dice,
            opt(self.accuracy_mean),
            opt(self.accuracy_std),
            self.splits,
            self.merges,
            self.n_labels_used
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn map(w: usize, h: usize, f: impl Fn(usize, usize) -> u32) -> LabelMap {
        LabelMap::new(w, h, (0..w * h).map(|i| f(i % w, i / w)).collect()).unwrap()
    }

    fn blocks() -> LabelMap {
        map(12, 6, |x, y| {
            if (1..5).contains(&y) && (1..5).contains(&x) {
                1
            } else if (1..5).contains(&y) && (7..11).contains(&x) {
                2
            } else {
                0
            }
        })
    }

    #[test]
    fn perfect_prediction() {
        let t = blocks();
        let m = segmentation_metrics(&t, &t).unwrap();
        assert_eq!(m.mean_dice, 1.0);
        assert_eq!((m.splits, m.merges, m.detected, m.n_labels_used), (0, 0, 2, 2));
    }

    #[test]
    fn all_background_prediction() {
        let t = blocks();
        let m = segmentation_metrics(&LabelMap::zeros(12, 6), &t).unwrap();
        assert_eq!(m.mean_dice, 0.0);
        assert_eq!(m.detected, 0);
    }

    #[test]
    fn half_split_gives_two_thirds() {
        let t = map(8, 4, |_, _| 1);
        let p = map(8, 4, |x, _| if x < 4 { 5 } else { 9 });
        let m = segmentation_metrics(&p, &t).unwrap();
        assert!((m.mean_dice - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!((m.splits, m.merges), (1, 0));
    }

    #[test]
    fn merged_pair() {
        let t = blocks();
        let p = map(12, 6, |x, y| (t.get(x, y) != 0) as u32 * 3);
        let m = segmentation_metrics(&p, &t).unwrap();
        assert_eq!((m.splits, m.merges), (0, 1));
        // each cell: 2*16 / (16 + 32)
        assert!((m.mean_dice - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch() {
        assert!(segmentation_metrics(&LabelMap::zeros(3, 3), &LabelMap::zeros(3, 4)).is_err());
    }

    #[test]
    fn report_formats() {
        let r = MetricsReport {
            mean_dice: 0.5,
            accuracy_mean: Some(0.9),
            accuracy_std: None,
            splits: 1,
            merges: 2,
            n_labels_used: 3,
        };
        let v: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        for key in ["mean_dice", "accuracy_mean", "accuracy_std", "splits", "merges", "n_labels_used"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert!(r.to_text().contains("accuracy_std = none"));
        assert!(r.to_text().contains("merges = 2"));
    }

    proptest! {
        #[test]
        fn relabeling_prediction_is_harmless(
            truth in proptest::collection::vec(0u32..4, 64),
            pred in proptest::collection::vec(0u32..5, 64),
            shift in 1u32..100
        ) {
            let t = LabelMap::new(8, 8, truth).unwrap();
            let p = LabelMap::new(8, 8, pred.clone()).unwrap();
            // permutation of nonzero ids: reverse order then shift
            let q = LabelMap::new(8, 8, pred.iter().map(|&l| if l == 0 { 0 } else { 5 - l + shift }).collect()).unwrap();
            let a = segmentation_metrics(&p, &t).unwrap();
            let b = segmentation_metrics(&q, &t).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
