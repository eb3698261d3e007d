use std::collections::HashMap;

use nalgebra::DMatrix;

use crate::assignment::linear_sum_assignment;
use crate::error::Result;
use crate::geometry::{check_s_norm, dotd_unchecked};
use crate::trackset::TrackSet;

/// Identity switches, CLEAR-MOT style: per frame, a gt identity keeps the
/// prediction it was matched to in the previous frame while their DotD stays
/// at or above `min_similarity`; the remaining boxes are matched by maximum
/// DotD. A switch is counted whenever a gt identity is matched to a different
/// prediction id than at its previous match.
pub fn count_id_switches(
    gt: &TrackSet,
    pred: &TrackSet,
    s_norm: f64,
    min_similarity: f64,
) -> Result<usize> {
    check_s_norm(s_norm)?;
    let mut last: HashMap<u32, u32> = HashMap::new();
    let mut previous_frame: HashMap<u32, u32> = HashMap::new();
    let mut switches = 0;
    for (&frame, g) in gt.frames() {
        let p = pred.frame(frame);
        let mut current: HashMap<u32, u32> = HashMap::new();
        if !g.is_empty() && !p.is_empty() {
            let sim = DMatrix::from_fn(g.len(), p.len(), |i, j| {
                dotd_unchecked(&g[i].1, &p[j].1, s_norm)
            });
            let mut row_done = vec![false; g.len()];
            let mut col_done = vec![false; p.len()];
            for (i, (gid, _)) in g.iter().enumerate() {
                let Some(&pid) = previous_frame.get(gid) else {
                    continue;
                };
                if let Some(j) = p.iter().position(|(id, _)| *id == pid) {
                    if !col_done[j] && sim[(i, j)] >= min_similarity {
                        row_done[i] = true;
                        col_done[j] = true;
                        current.insert(*gid, pid);
                    }
                }
            }
            let rows: Vec<usize> = (0..g.len()).filter(|&i| !row_done[i]).collect();
            let cols: Vec<usize> = (0..p.len()).filter(|&j| !col_done[j]).collect();
            if !rows.is_empty() && !cols.is_empty() {
                let masked = DMatrix::from_fn(rows.len(), cols.len(), |a, b| {
                    let s = sim[(rows[a], cols[b])];
                    if s >= min_similarity {
                        -s
                    } else {
                        0.0
                    }
                });
                for (a, b) in linear_sum_assignment(&masked)? {
                    let (i, j) = (rows[a], cols[b]);
                    if sim[(i, j)] >= min_similarity {
                        current.insert(g[i].0, p[j].0);
                    }
                }
            }
        }
        let mut matched: Vec<(u32, u32)> = current.iter().map(|(&g, &p)| (g, p)).collect();
        matched.sort_unstable();
        for (gid, pid) in matched {
            if let Some(prev) = last.insert(gid, pid) {
                if prev != pid {
                    switches += 1;
                }
            }
        }
        previous_frame = current;
    }
    Ok(switches)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BBox;

    #[test]
    fn counts_exchange_as_two_switches() {
        let mut gt = TrackSet::new();
        let mut pred = TrackSet::new();
        for f in 1..=4 {
            gt.push(f, 1, BBox::new(0.0, 0.0, 5.0, 5.0));
            gt.push(f, 2, BBox::new(100.0, 0.0, 5.0, 5.0));
            let (a, b) = if f <= 2 { (10, 20) } else { (20, 10) };
            pred.push(f, a, BBox::new(0.0, 0.0, 5.0, 5.0));
            pred.push(f, b, BBox::new(100.0, 0.0, 5.0, 5.0));
        }
        assert_eq!(count_id_switches(&gt, &pred, 5.0, 0.5).unwrap(), 2);
        assert_eq!(count_id_switches(&gt, &gt, 5.0, 0.5).unwrap(), 0);
    }

    #[test]
    fn gaps_do_not_count() {
        let mut gt = TrackSet::new();
        let mut pred = TrackSet::new();
        for f in 1..=5 {
            gt.push(f, 1, BBox::new(0.0, 0.0, 5.0, 5.0));
            if f != 3 {
                pred.push(f, 4, BBox::new(0.0, 0.0, 5.0, 5.0));
            }
        }
        assert_eq!(count_id_switches(&gt, &pred, 5.0, 0.5).unwrap(), 0);
    }

    #[test]
    fn coincident_boxes_keep_previous_matches() {
        let mut gt = TrackSet::new();
        let mut pred = TrackSet::new();
        for f in 1..=5u32 {
            let off = (f as f64 - 3.0).abs() * 20.0;
            gt.push(f, 1, BBox::new(off, 0.0, 5.0, 5.0));
            gt.push(f, 2, BBox::new(-off, 0.0, 5.0, 5.0));
            pred.push(f, 8, BBox::new(-off, 0.0, 5.0, 5.0));
            pred.push(f, 9, BBox::new(off, 0.0, 5.0, 5.0));
        }
        // Frame 3 has all four boxes on top of each other.
        assert_eq!(count_id_switches(&gt, &pred, 5.0, 0.5).unwrap(), 0);
    }
}
