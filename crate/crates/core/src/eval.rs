//! Detection quality: ROC curves, trapezoidal AUC, and boxplot separability
//! statistics of anomaly versus background scores.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::raster::{DetectionMap, GroundTruthMask};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
}

/// ROC curve from `(0, 0)` to `(1, 1)`. `thresholds[i]` produced
/// `points[i]`; the first threshold is `+inf`.
#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    pub thresholds: Vec<f64>,
}

fn split_classes(map: &DetectionMap, mask: &GroundTruthMask) -> Result<(Vec<f64>, Vec<f64>)> {
    map.check_mask(mask)?;
    let mut anomaly = Vec::new();
    let mut background = Vec::new();
    for (&s, &l) in map.scores().iter().zip(mask.labels()) {
        if l {
            anomaly.push(s);
        } else {
            background.push(s);
        }
    }
    if anomaly.is_empty() || background.is_empty() {
        return Err(Error::SingleClassMask);
    }
    Ok((anomaly, background))
}

/// ROC over every distinct score, a pixel counting as detected when its
/// score is at least the threshold.
pub fn roc_curve(map: &DetectionMap, mask: &GroundTruthMask) -> Result<RocCurve> {
    let (anomaly, background) = split_classes(map, mask)?;
    let (n_pos, n_neg) = (anomaly.len() as f64, background.len() as f64);

    let mut scored: Vec<(f64, bool)> = map
        .scores()
        .iter()
        .copied()
        .zip(mask.labels().iter().copied())
        .collect();
    scored.sort_unstable_by(|a, b| b.0.total_cmp(&a.0));

    let mut points = vec![RocPoint { fpr: 0.0, tpr: 0.0 }];
    let mut thresholds = vec![f64::INFINITY];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < scored.len() {
        let threshold = scored[i].0;
        while i < scored.len() && scored[i].0 == threshold {
            if scored[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(RocPoint {
            fpr: fp as f64 / n_neg,
            tpr: tp as f64 / n_pos,
        });
        thresholds.push(threshold);
    }
    Ok(RocCurve { points, thresholds })
}

/// Trapezoidal area under the curve.
pub fn auc(curve: &RocCurve) -> f64 {
    curve
        .points
        .windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) * 0.5)
        .sum()
}

/// Five-number summary of one class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxStats {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

impl BoxStats {
    /// Quartiles by linear interpolation at rank `q * (n - 1)`.
    pub fn from_scores(scores: &[f64]) -> Option<Self> {
        if scores.is_empty() {
            return None;
        }
        let mut sorted = scores.to_vec();
        sorted.sort_unstable_by(f64::total_cmp);
        Some(Self {
            min: sorted[0],
            q1: quantile_sorted(&sorted, 0.25),
            median: quantile_sorted(&sorted, 0.5),
            q3: quantile_sorted(&sorted, 0.75),
            max: sorted[sorted.len() - 1],
        })
    }
}

pub(crate) fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let frac = pos - lo as f64;
    if lo + 1 >= sorted.len() || frac == 0.0 {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeparabilityStats {
    pub anomaly: BoxStats,
    pub background: BoxStats,
    /// Gap between the anomaly box bottom and the background box top,
    /// `q1(anomaly) - q3(background)`.
    pub interval: f64,
}

pub fn separability_stats(map: &DetectionMap, mask: &GroundTruthMask) -> Result<SeparabilityStats> {
    let (anomaly, background) = split_classes(map, mask)?;
    let anomaly = BoxStats::from_scores(&anomaly).expect("non-empty class");
    let background = BoxStats::from_scores(&background).expect("non-empty class");
    Ok(SeparabilityStats {
        anomaly,
        background,
        interval: anomaly.q1 - background.q3,
    })
}

/// `threshold,fpr,tpr` rows, one per curve point.
pub fn roc_csv(curve: &RocCurve) -> String {
    let mut out = String::from("threshold,fpr,tpr\n");
    for (t, p) in curve.thresholds.iter().zip(&curve.points) {
        let _ = writeln!(out, "{t},{},{}", p.fpr, p.tpr);
    }
    out
}

/// One row per class plus the interval column repeated on each row.
pub fn separability_csv(stats: &SeparabilityStats) -> String {
    let mut out = String::from("class,min,q1,median,q3,max,interval\n");
    for (name, b) in [
        ("anomaly", &stats.anomaly),
        ("background", &stats.background),
    ] {
        let _ = writeln!(
            out,
            "{name},{},{},{},{},{},{}",
            b.min, b.q1, b.median, b.q3, b.max, stats.interval
        );
    }
    out
}

pub fn write_roc_csv(curve: &RocCurve, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, roc_csv(curve)).map_err(|e| Error::io(path, e))
}

pub fn write_separability_csv(stats: &SeparabilityStats, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, separability_csv(stats)).map_err(|e| Error::io(path, e))
}
