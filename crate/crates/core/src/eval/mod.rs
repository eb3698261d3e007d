//! HOTA-family scores with Dot Distance as the similarity kernel
//! (SO-HOTA, SO-DetA, SO-AssA).
//!
//! The matching protocol follows HOTA: a global alignment score between every
//! gt/pred identity pair is accumulated over the sequence first, then each
//! frame is matched once by maximizing `alignment * similarity`, and each
//! localization threshold `alpha` keeps the matched pairs whose similarity
//! reaches it.

mod idsw;

use std::collections::{BTreeSet, HashMap};

use nalgebra::DMatrix;
use rayon::prelude::*;

pub use idsw::count_id_switches;

use crate::assignment::linear_sum_assignment;
use crate::error::{Error, Result};
use crate::geometry::{check_s_norm, dotd_unchecked, BBox};
use crate::trackset::TrackSet;

/// Localization thresholds 0.05, 0.10, ..., 0.95.
pub fn alphas() -> [f64; 19] {
    std::array::from_fn(|i| 0.05 * (i + 1) as f64)
}

/// Raw counts at one threshold; `assoc_sum` is the sum over true positives of
/// their association Jaccard score.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct AlphaCounts {
    pub tp: f64,
    pub fn_: f64,
    pub fp: f64,
    pub assoc_sum: f64,
}

impl AlphaCounts {
    fn add(&mut self, o: &AlphaCounts) {
        self.tp += o.tp;
        self.fn_ += o.fn_;
        self.fp += o.fp;
        self.assoc_sum += o.assoc_sum;
    }
}

/// Scores in percent. Per-threshold vectors are indexed like [`alphas`].
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceEval {
    pub counts: Vec<AlphaCounts>,
    pub det_a: Vec<f64>,
    pub ass_a: Vec<f64>,
    pub hota: Vec<f64>,
    pub so_hota: f64,
    pub so_det_a: f64,
    pub so_ass_a: f64,
}

impl SequenceEval {
    pub fn from_counts(counts: Vec<AlphaCounts>) -> Self {
        let det_a: Vec<f64> = counts
            .iter()
            .map(|c| 100.0 * c.tp / (c.tp + c.fn_ + c.fp).max(1.0))
            .collect();
        let ass_a: Vec<f64> = counts
            .iter()
            .map(|c| 100.0 * c.assoc_sum / c.tp.max(1.0))
            .collect();
        let hota: Vec<f64> = det_a
            .iter()
            .zip(&ass_a)
            .map(|(d, a)| (d * a).sqrt())
            .collect();
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        SequenceEval {
            so_hota: mean(&hota),
            so_det_a: mean(&det_a),
            so_ass_a: mean(&ass_a),
            counts,
            det_a,
            ass_a,
            hota,
        }
    }
}

/// Mean over all ground-truth boxes of `sqrt(w * h)`.
pub fn compute_s_norm(gt: &TrackSet) -> Result<f64> {
    let (sum, n) = gt
        .boxes()
        .fold((0.0, 0usize), |(s, n), b| (s + (b.w * b.h).sqrt(), n + 1));
    if n == 0 {
        return Err(Error::Validation(
            "cannot derive the DotD normalizer from empty ground truth".into(),
        ));
    }
    Ok(sum / n as f64)
}

fn dense_ids(set: &TrackSet) -> HashMap<u32, usize> {
    let mut ids = HashMap::new();
    for v in set.frames().values() {
        for (id, _) in v {
            let next = ids.len();
            ids.entry(*id).or_insert(next);
        }
    }
    ids
}

fn dotd_matrix(gt: &[(u32, BBox)], pred: &[(u32, BBox)], s_norm: f64) -> DMatrix<f64> {
    DMatrix::from_fn(gt.len(), pred.len(), |i, j| {
        dotd_unchecked(&gt[i].1, &pred[j].1, s_norm)
    })
}

pub fn evaluate(gt: &TrackSet, pred: &TrackSet, s_norm: f64) -> Result<SequenceEval> {
    check_s_norm(s_norm)?;
    gt.validate_unique_ids()?;
    pred.validate_unique_ids()?;

    let gt_ids = dense_ids(gt);
    let pred_ids = dense_ids(pred);
    let (ng, np) = (gt_ids.len(), pred_ids.len());
    let frames: BTreeSet<u32> = gt
        .frames()
        .keys()
        .chain(pred.frames().keys())
        .copied()
        .collect();

    // Pass 1: global alignment between identities.
    let mut gt_count = vec![0.0; ng];
    let mut pred_count = vec![0.0; np];
    let mut potential = DMatrix::<f64>::zeros(ng, np);
    let mut per_frame = Vec::with_capacity(frames.len());
    for &f in &frames {
        let (g, p) = (gt.frame(f), pred.frame(f));
        let gi: Vec<usize> = g.iter().map(|(id, _)| gt_ids[id]).collect();
        let pi: Vec<usize> = p.iter().map(|(id, _)| pred_ids[id]).collect();
        let sim = dotd_matrix(g, p, s_norm);
        let row_sums: Vec<f64> = sim.row_iter().map(|r| r.sum()).collect();
        let col_sums: Vec<f64> = sim.column_iter().map(|c| c.sum()).collect();
        for (r, &gr) in gi.iter().enumerate() {
            for (c, &pc) in pi.iter().enumerate() {
                let denom = row_sums[r] + col_sums[c] - sim[(r, c)];
                if denom > f64::EPSILON {
                    potential[(gr, pc)] += sim[(r, c)] / denom;
                }
            }
        }
        for &g in &gi {
            gt_count[g] += 1.0;
        }
        for &p in &pi {
            pred_count[p] += 1.0;
        }
        per_frame.push((gi, pi, sim));
    }
    let alignment = DMatrix::from_fn(ng, np, |g, p| {
        let m = potential[(g, p)];
        m / (gt_count[g] + pred_count[p] - m)
    });

    // Pass 2: one optimal matching per frame, thresholded at each alpha.
    let thresholds = alphas();
    let mut counts = vec![AlphaCounts::default(); thresholds.len()];
    let mut pair_matches: Vec<DMatrix<f64>> = vec![DMatrix::zeros(ng, np); thresholds.len()];
    for (gi, pi, sim) in &per_frame {
        let (n_gt, n_pred) = (gi.len() as f64, pi.len() as f64);
        if gi.is_empty() || pi.is_empty() {
            for c in &mut counts {
                c.fn_ += n_gt;
                c.fp += n_pred;
            }
            continue;
        }
        let score = DMatrix::from_fn(gi.len(), pi.len(), |r, c| {
            -(alignment[(gi[r], pi[c])] * sim[(r, c)])
        });
        let pairs = linear_sum_assignment(&score)?;
        for (k, &alpha) in thresholds.iter().enumerate() {
            let mut tp = 0.0;
            for &(r, c) in &pairs {
                if sim[(r, c)] >= alpha - f64::EPSILON {
                    tp += 1.0;
                    pair_matches[k][(gi[r], pi[c])] += 1.0;
                }
            }
            counts[k].tp += tp;
            counts[k].fn_ += n_gt - tp;
            counts[k].fp += n_pred - tp;
        }
    }

    counts
        .par_iter_mut()
        .zip(pair_matches.par_iter())
        .for_each(|(c, m)| {
            let mut sum = 0.0;
            for g in 0..ng {
                for p in 0..np {
                    let n = m[(g, p)];
                    if n > 0.0 {
                        sum += n * n / (gt_count[g] + pred_count[p] - n);
                    }
                }
            }
            c.assoc_sum = sum;
        });

    Ok(SequenceEval::from_counts(counts))
}

/// Dataset-level scores from pooled counts.
pub fn aggregate(seqs: &[SequenceEval]) -> Result<SequenceEval> {
    let first = seqs
        .first()
        .ok_or_else(|| Error::Validation("nothing to aggregate".into()))?;
    let mut counts = vec![AlphaCounts::default(); first.counts.len()];
    for s in seqs {
        for (acc, c) in counts.iter_mut().zip(&s.counts) {
            acc.add(c);
        }
    }
    Ok(SequenceEval::from_counts(counts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn b(x: f64, y: f64) -> BBox {
        BBox::new(x, y, 10.0, 10.0)
    }

    fn two_targets(ids_f2: (u32, u32)) -> (TrackSet, TrackSet) {
        let mut gt = TrackSet::new();
        let mut pred = TrackSet::new();
        for f in 1..=2 {
            gt.push(f, 1, b(0.0, 0.0));
            gt.push(f, 2, b(200.0, 0.0));
        }
        pred.push(1, 1, b(0.0, 0.0));
        pred.push(1, 2, b(200.0, 0.0));
        pred.push(2, ids_f2.0, b(0.0, 0.0));
        pred.push(2, ids_f2.1, b(200.0, 0.0));
        (gt, pred)
    }

    #[test]
    fn alpha_grid() {
        let a = alphas();
        assert_eq!(a.len(), 19);
        assert_abs_diff_eq!(a[0], 0.05);
        assert_abs_diff_eq!(a[18], 0.95, epsilon = 1e-12);
    }

    #[test]
    fn s_norm_examples() {
        let mut gt = TrackSet::new();
        gt.push(1, 1, b(0.0, 0.0));
        gt.push(2, 1, b(5.0, 0.0));
        assert_eq!(compute_s_norm(&gt).unwrap(), 10.0);

        let mut gt = TrackSet::new();
        gt.push(1, 1, BBox::new(0.0, 0.0, 4.0, 9.0));
        gt.push(1, 2, BBox::new(0.0, 0.0, 16.0, 16.0));
        assert_eq!(compute_s_norm(&gt).unwrap(), 11.0);

        let mut gt = TrackSet::new();
        gt.push(1, 1, BBox::new(0.0, 0.0, 25.0, 4.0));
        assert_eq!(compute_s_norm(&gt).unwrap(), 10.0);

        assert!(compute_s_norm(&TrackSet::new()).is_err());
    }

    #[test]
    fn perfect_prediction_scores_100() {
        let (gt, _) = two_targets((1, 2));
        let e = evaluate(&gt, &gt, 10.0).unwrap();
        assert_eq!(e.so_hota, 100.0);
        assert_eq!(e.so_det_a, 100.0);
        assert_eq!(e.so_ass_a, 100.0);
    }

    #[test]
    fn empty_prediction_scores_zero() {
        let (gt, _) = two_targets((1, 2));
        let e = evaluate(&gt, &TrackSet::new(), 10.0).unwrap();
        assert_eq!(e.so_hota, 0.0);
        assert_eq!(e.so_det_a, 0.0);
    }

    #[test]
    fn exchanged_ids_score_one_third_association() {
        // Each TP has TPA = 1, FNA = 1, FPA = 1.
        let (gt, pred) = two_targets((2, 1));
        let e = evaluate(&gt, &pred, 10.0).unwrap();
        for k in 0..19 {
            assert_abs_diff_eq!(e.det_a[k], 100.0, epsilon = 1e-12);
            assert_abs_diff_eq!(e.ass_a[k], 100.0 / 3.0, epsilon = 1e-9);
        }
        assert_abs_diff_eq!(e.so_hota, 100.0 * (1.0f64 / 3.0).sqrt(), epsilon = 1e-9);
    }

    #[test]
    fn fresh_ids_score_half_association() {
        // Each TP has TPA = 1, FNA = 1, FPA = 0.
        let (gt, pred) = two_targets((3, 4));
        let e = evaluate(&gt, &pred, 10.0).unwrap();
        assert_abs_diff_eq!(e.so_ass_a, 50.0, epsilon = 1e-9);
        assert_abs_diff_eq!(e.so_hota, 100.0 * 0.5f64.sqrt(), epsilon = 1e-9);
    }

    #[test]
    fn duplicate_ids_rejected() {
        let (gt, mut pred) = two_targets((1, 2));
        pred.push(1, 1, b(50.0, 50.0));
        assert!(matches!(
            evaluate(&gt, &pred, 10.0),
            Err(Error::Validation(_))
        ));
        assert!(evaluate(&gt, &gt, 0.0).is_err());
    }

    #[test]
    fn far_predictions_never_match() {
        let mut gt = TrackSet::new();
        gt.push(1, 1, b(0.0, 0.0));
        let mut pred = TrackSet::new();
        // center distance 20 with s_norm 10: DotD = exp(-2) ~ 0.135
        pred.push(1, 7, b(20.0, 0.0));
        let e = evaluate(&gt, &pred, 10.0).unwrap();
        let limit = (-2.0f64).exp();
        for (k, a) in alphas().iter().enumerate() {
            if *a > limit {
                assert_eq!(e.counts[k].tp, 0.0);
            } else {
                assert_eq!(e.counts[k].tp, 1.0);
            }
        }
    }

    #[test]
    fn identity_bounds_hold() {
        let (gt, pred) = two_targets((2, 5));
        let e = evaluate(&gt, &pred, 10.0).unwrap();
        for k in 0..19 {
            assert!((0.0..=100.0).contains(&e.hota[k]));
            assert_abs_diff_eq!(e.hota[k], (e.det_a[k] * e.ass_a[k]).sqrt(), epsilon = 1e-9);
        }
    }

    #[test]
    fn aggregation_pools_counts() {
        let (gt, pred) = two_targets((2, 1));
        let a = evaluate(&gt, &pred, 10.0).unwrap();
        assert_eq!(aggregate(std::slice::from_ref(&a)).unwrap(), a);
        let twice = aggregate(&[a.clone(), a.clone()]).unwrap();
        assert_abs_diff_eq!(twice.so_hota, a.so_hota, epsilon = 1e-12);
        assert!(aggregate(&[]).is_err());
    }
}
