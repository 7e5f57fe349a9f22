//! Patch-verification evaluation: FPR95 and the ROC curve.

use std::io::Write;

use crate::error::{Error, Result};

/// Whether a larger score or a smaller score means "match".
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Polarity {
    HigherIsMatch,
    LowerIsMatch,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RocPoint {
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

fn validate(scores: &[f64], labels: &[bool]) -> Result<(usize, usize)> {
    if scores.len() != labels.len() {
        return Err(Error::contract(
            "fpr95",
            format!("{} scores vs {} labels", scores.len(), labels.len()),
        ));
    }
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::contract(
            "fpr95",
            format!("need both classes, got {pos} positives / {neg} negatives"),
        ));
    }
    Ok((pos, neg))
}

/// Indices sorted by descending effective score, positives first at ties.
fn sorted_indices(scores: &[f64], labels: &[bool], polarity: Polarity) -> Vec<usize> {
    let eff = |i: usize| match polarity {
        Polarity::HigherIsMatch => scores[i],
        Polarity::LowerIsMatch => -scores[i],
    };
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| {
        eff(b)
            .partial_cmp(&eff(a))
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| labels[b].cmp(&labels[a]))
    });
    idx
}

/// False-positive rate at the loosest threshold reaching 95% true-positive
/// rate. Ties are resolved by sorting positives first at equal scores.
pub fn fpr95(scores: &[f64], labels: &[bool], polarity: Polarity) -> Result<f64> {
    let (pos, neg) = validate(scores, labels)?;
    let idx = sorted_indices(scores, labels, polarity);
    let mut tp = 0usize;
    let mut fp = 0usize;
    for i in idx {
        if labels[i] {
            tp += 1;
        } else {
            fp += 1;
        }
        // tp/pos >= 0.95 without float division: 20*tp >= 19*pos.
        if 20 * tp >= 19 * pos {
            return Ok(fp as f64 / neg as f64);
        }
    }
    unreachable!("tp reaches pos before the walk ends");
}

/// ROC staircase over all distinct thresholds (inclusive `score >= t`
/// semantics after polarity normalization), with endpoints (0,0) and (1,1).
/// Thresholds are reported on the original score scale.
pub fn roc_curve(scores: &[f64], labels: &[bool], polarity: Polarity) -> Result<Vec<RocPoint>> {
    let (pos, neg) = validate(scores, labels)?;
    let idx = sorted_indices(scores, labels, polarity);
    let eff = |i: usize| match polarity {
        Polarity::HigherIsMatch => scores[i],
        Polarity::LowerIsMatch => -scores[i],
    };
    let mut points = vec![RocPoint { threshold: f64::INFINITY, fpr: 0.0, tpr: 0.0 }];
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut k = 0usize;
    while k < idx.len() {
        let t = eff(idx[k]);
        while k < idx.len() && eff(idx[k]) == t {
            if labels[idx[k]] {
                tp += 1;
            } else {
                fp += 1;
            }
            k += 1;
        }
        let threshold = match polarity {
            Polarity::HigherIsMatch => t,
            Polarity::LowerIsMatch => -t,
        };
        points.push(RocPoint { threshold, fpr: fp as f64 / neg as f64, tpr: tp as f64 / pos as f64 });
    }
    Ok(points)
}

/// Trapezoidal area under a curve returned by [`roc_curve`].
pub fn auc(points: &[RocPoint]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * (w[0].tpr + w[1].tpr) * 0.5)
        .sum()
}

/// CSV export: header `threshold,fpr,tpr`, one row per distinct threshold.
pub fn write_roc_csv<W: Write>(w: &mut W, points: &[RocPoint]) -> Result<()> {
    writeln!(w, "threshold,fpr,tpr")?;
    for p in points {
        writeln!(w, "{},{},{}", p.threshold, p.fpr, p.tpr)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn perfectly_separated_is_zero() {
        let scores = [0.9, 0.8, 0.7, 0.3, 0.2, 0.1];
        let labels = [true, true, true, false, false, false];
        assert_eq!(fpr95(&scores, &labels, Polarity::HigherIsMatch).unwrap(), 0.0);
    }

    #[test]
    fn threshold_sweep_example() {
        // Loosest threshold reaching TPR >= 0.95 must include the positive at
        // 0.2, so every negative >= 0.2 (0.5, 0.4, 0.3) counts: FPR = 3/5.
        let scores = [0.9, 0.8, 0.7, 0.6, 0.2, 0.5, 0.4, 0.3, 0.1, 0.05];
        let labels = [true, true, true, true, true, false, false, false, false, false];
        let got = fpr95(&scores, &labels, Polarity::HigherIsMatch).unwrap();
        assert_eq!(got, 0.6);
    }

    #[test]
    fn tie_puts_positives_first() {
        // One positive and one negative share the deciding score: the
        // positive is counted before the negative, so FPR stays 0.
        let scores = [0.5, 0.5];
        let labels = [true, false];
        assert_eq!(fpr95(&scores, &labels, Polarity::HigherIsMatch).unwrap(), 0.0);
    }

    #[test]
    fn lower_is_match_polarity() {
        let distances = [0.1, 0.2, 0.3, 0.8, 0.9, 1.0];
        let labels = [true, true, true, false, false, false];
        assert_eq!(fpr95(&distances, &labels, Polarity::LowerIsMatch).unwrap(), 0.0);
    }

    #[test]
    fn random_labels_sit_near_095() {
        let mut rng = ChaCha12Rng::seed_from_u64(99);
        let n = 20_000;
        let scores: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
        let labels: Vec<bool> = (0..n).map(|_| rng.gen::<bool>()).collect();
        let v = fpr95(&scores, &labels, Polarity::HigherIsMatch).unwrap();
        assert!((v - 0.95).abs() < 0.02, "random-classifier FPR95 was {v}");
    }

    #[test]
    fn class_requirements() {
        assert!(fpr95(&[0.1, 0.2], &[true, true], Polarity::HigherIsMatch).is_err());
        assert!(fpr95(&[0.1, 0.2], &[false, false], Polarity::HigherIsMatch).is_err());
    }

    #[test]
    fn roc_endpoints_and_perfect_curve() {
        let scores = [0.9, 0.8, 0.2, 0.1];
        let labels = [true, true, false, false];
        let pts = roc_curve(&scores, &labels, Polarity::HigherIsMatch).unwrap();
        assert_eq!((pts[0].fpr, pts[0].tpr), (0.0, 0.0));
        let last = pts.last().unwrap();
        assert_eq!((last.fpr, last.tpr), (1.0, 1.0));
        assert!(pts.iter().any(|p| p.fpr == 0.0 && p.tpr == 1.0));
        assert!((auc(&pts) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn roc_monotone_and_random_auc_half() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let n = 20_000;
        let scores: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
        let labels: Vec<bool> = (0..n).map(|_| rng.gen::<bool>()).collect();
        let pts = roc_curve(&scores, &labels, Polarity::HigherIsMatch).unwrap();
        for w in pts.windows(2) {
            assert!(w[1].fpr >= w[0].fpr && w[1].tpr >= w[0].tpr);
        }
        assert!((auc(&pts) - 0.5).abs() < 0.02);
    }

    #[test]
    fn polarity_reversal_mirrors_auc() {
        let mut rng = ChaCha12Rng::seed_from_u64(21);
        let n = 5000;
        let scores: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
        let labels: Vec<bool> = (0..n).map(|i| (i % 3) == 0).collect();
        let hi = auc(&roc_curve(&scores, &labels, Polarity::HigherIsMatch).unwrap());
        let lo = auc(&roc_curve(&scores, &labels, Polarity::LowerIsMatch).unwrap());
        assert!((hi + lo - 1.0).abs() < 1e-9, "{hi} + {lo}");
    }

    #[test]
    fn csv_format() {
        let pts = vec![
            RocPoint { threshold: f64::INFINITY, fpr: 0.0, tpr: 0.0 },
            RocPoint { threshold: 0.5, fpr: 0.25, tpr: 1.0 },
        ];
        let mut buf = Vec::new();
        write_roc_csv(&mut buf, &pts).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "threshold,fpr,tpr");
        assert_eq!(lines.next().unwrap(), "inf,0,0");
        assert_eq!(lines.next().unwrap(), "0.5,0.25,1");
    }
}
