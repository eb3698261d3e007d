//! Rectangular linear sum assignment.
//!
//! Shortest augmenting path with dual potentials (Jonker-Volgenant style), one
//! augmentation per row of the smaller side. Runs in `O(n^2 m)`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Gated assignment result. Indices refer to rows (tracks) and columns (detections).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Assignment {
    pub matches: Vec<(usize, usize)>,
    pub unmatched_rows: Vec<usize>,
    pub unmatched_cols: Vec<usize>,
}

/// Minimum-cost one-to-one assignment of `min(rows, cols)` pairs, sorted by row.
///
/// Deterministic: candidate columns are scanned in increasing index order and
/// a strictly smaller reduced cost is needed to displace the current best, so
/// ties resolve towards the lowest column (free columns first).
pub fn linear_sum_assignment(cost: &DMatrix<f64>) -> Result<Vec<(usize, usize)>> {
    if let Some(bad) = cost.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "assignment cost matrix contains non-finite entry {bad}"
        )));
    }
    let (nr, nc) = cost.shape();
    if nr == 0 || nc == 0 {
        return Ok(Vec::new());
    }
    if nr > nc {
        let transposed = cost.transpose();
        let mut pairs: Vec<_> = solve_wide(&transposed)
            .into_iter()
            .map(|(c, r)| (r, c))
            .collect();
        pairs.sort_unstable();
        return Ok(pairs);
    }
    Ok(solve_wide(cost))
}

/// Requires `rows <= cols`; every row gets assigned.
fn solve_wide(cost: &DMatrix<f64>) -> Vec<(usize, usize)> {
    const NONE: usize = usize::MAX;
    let (nr, nc) = cost.shape();
    let mut u = vec![0.0; nr];
    let mut v = vec![0.0; nc];
    let mut col4row = vec![NONE; nr];
    let mut row4col = vec![NONE; nc];
    let mut path = vec![NONE; nc];
    let mut shortest = vec![f64::INFINITY; nc];
    let mut visited_rows = vec![false; nr];
    let mut visited_cols = vec![false; nc];
    let mut remaining: Vec<usize> = Vec::with_capacity(nc);

    for cur_row in 0..nr {
        shortest.fill(f64::INFINITY);
        visited_rows.fill(false);
        visited_cols.fill(false);
        remaining.clear();
        remaining.extend(0..nc);

        let mut min_val = 0.0;
        let mut i = cur_row;
        let sink = loop {
            visited_rows[i] = true;
            let mut best_pos = NONE;
            let mut lowest = f64::INFINITY;
            for (pos, &j) in remaining.iter().enumerate() {
                let reduced = min_val + cost[(i, j)] - u[i] - v[j];
                if reduced < shortest[j] {
                    path[j] = i;
                    shortest[j] = reduced;
                }
                let better = match best_pos {
                    NONE => true,
                    _ => {
                        shortest[j] < lowest
                            || (shortest[j] == lowest
                                && row4col[j] == NONE
                                && row4col[remaining[best_pos]] != NONE)
                    }
                };
                if better {
                    lowest = shortest[j];
                    best_pos = pos;
                }
            }
            // Finite costs and nr <= nc: some column is always reachable.
            min_val = lowest;
            let j = remaining.remove(best_pos);
            visited_cols[j] = true;
            if row4col[j] == NONE {
                break j;
            }
            i = row4col[j];
        };

        u[cur_row] += min_val;
        for r in 0..nr {
            if visited_rows[r] && r != cur_row {
                u[r] += min_val - shortest[col4row[r]];
            }
        }
        for c in 0..nc {
            if visited_cols[c] {
                v[c] -= min_val - shortest[c];
            }
        }

        let mut j = sink;
        loop {
            let r = path[j];
            row4col[j] = r;
            let prev = std::mem::replace(&mut col4row[r], j);
            if r == cur_row {
                break;
            }
            j = prev;
        }
    }

    col4row.into_iter().enumerate().collect()
}

/// Solves on `cost`, then drops every pair whose `similarity` is below `gate`.
/// Unmatched rows and columns are returned in increasing order.
pub fn solve_assignment(
    cost: &DMatrix<f64>,
    similarity: &DMatrix<f64>,
    gate: f64,
) -> Result<Assignment> {
    if cost.shape() != similarity.shape() {
        return Err(Error::InvalidParameter(format!(
            "cost {:?} and similarity {:?} shapes differ",
            cost.shape(),
            similarity.shape()
        )));
    }
    let (nr, nc) = cost.shape();
    let mut row_used = vec![false; nr];
    let mut col_used = vec![false; nc];
    let mut matches = Vec::new();
    for (r, c) in linear_sum_assignment(cost)? {
        if similarity[(r, c)] >= gate {
            row_used[r] = true;
            col_used[c] = true;
            matches.push((r, c));
        }
    }
    Ok(Assignment {
        matches,
        unmatched_rows: (0..nr).filter(|&r| !row_used[r]).collect(),
        unmatched_cols: (0..nc).filter(|&c| !col_used[c]).collect(),
    })
}

/// Sum of `cost` over `pairs`, accumulated in row order.
pub fn total_cost(cost: &DMatrix<f64>, pairs: &[(usize, usize)]) -> f64 {
    let mut sorted = pairs.to_vec();
    sorted.sort_unstable();
    sorted.iter().map(|&(r, c)| cost[(r, c)]).sum()
}
