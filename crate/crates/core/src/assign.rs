//! Hungarian (Kuhn-Munkres) assignment in O(n^2 m).
//!
//! Minimizes total cost over one-to-one row/column pairings. Used to match
//! extracted endmembers to ground truth by spectral angle and predicted
//! segmentation clusters to labeled classes by IoU.

use alloc::vec;
use alloc::vec::Vec;

#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    /// row i is paired with `row_to_col[i]`, or None when rows > cols.
    pub row_to_col: Vec<Option<usize>>,
    pub cost: f64,
}

impl Assignment {
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.row_to_col
            .iter()
            .enumerate()
            .filter_map(|(i, c)| c.map(|j| (i, j)))
    }
}

/// Solves min-cost assignment for a row-major `rows x cols` cost matrix.
/// Every row is assigned when rows <= cols; otherwise exactly `cols` rows
/// are assigned.
pub fn solve(cost: &[f64], rows: usize, cols: usize) -> Assignment {
    assert_eq!(cost.len(), rows * cols, "cost matrix shape mismatch");
    if rows == 0 || cols == 0 {
        return Assignment {
            row_to_col: vec![None; rows],
            cost: 0.0,
        };
    }
    if rows > cols {
        // Transpose so the augmenting loop always runs rows <= cols.
        let mut t = vec![0.0; rows * cols];
        for i in 0..rows {
            for j in 0..cols {
                t[j * rows + i] = cost[i * cols + j];
            }
        }
        let sub = solve(&t, cols, rows);
        let mut row_to_col = vec![None; rows];
        let mut total = 0.0;
        for (j, i) in sub.pairs() {
            row_to_col[i] = Some(j);
            total += cost[i * cols + j];
        }
        return Assignment {
            row_to_col,
            cost: total,
        };
    }

    let n = rows;
    let m = cols;
    // Potentials and matching, 1-indexed with column 0 as the virtual root.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; m + 1];
    let mut matched_row = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];

    for i in 1..=n {
        matched_row[0] = i;
        let mut j0 = 0usize;
        let mut min_to = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = matched_row[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let reduced = cost[(i0 - 1) * m + (j - 1)] - u[i0] - v[j];
                if reduced < min_to[j] {
                    min_to[j] = reduced;
                    way[j] = j0;
                }
                if min_to[j] < delta {
                    delta = min_to[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[matched_row[j]] += delta;
                    v[j] -= delta;
                } else {
                    min_to[j] -= delta;
                }
            }
            j0 = j1;
            if matched_row[j0] == 0 {
                break;
            }
        }
        // Unwind the augmenting path.
        while j0 != 0 {
            let j1 = way[j0];
            matched_row[j0] = matched_row[j1];
            j0 = j1;
        }
    }

    let mut row_to_col = vec![None; n];
    let mut total = 0.0;
    for j in 1..=m {
        let i = matched_row[j];
        if i != 0 {
            row_to_col[i - 1] = Some(j - 1);
            total += cost[(i - 1) * m + (j - 1)];
        }
    }
    Assignment {
        row_to_col,
        cost: total,
    }
}
