//! Minimum-cost assignment (Hungarian method with potentials, O(n²m)).

use crate::error::{Error, Result};

/// Optimal matching of every column of an `m × n` cost matrix (`m ≥ n`)
/// to a distinct row.
#[derive(Debug, Clone, PartialEq)]
pub struct TapAssignment {
    /// `(row, column)` pairs, i.e. `(pred_index, truth_index)`, ordered by column.
    pub pairs: Vec<(usize, usize)>,
    /// Rows left without a column, ascending.
    pub unmatched_pred: Vec<usize>,
    pub cost: f64,
}

/// Solves the rectangular assignment problem exactly.
///
/// `cost[i][j]` is the cost of giving column `j` to row `i`. Every column is
/// assigned; surplus rows stay unmatched. The reported cost sums the chosen
/// entries in column order.
pub fn hungarian_assign(cost: &[Vec<f64>]) -> Result<TapAssignment> {
    let m = cost.len();
    let n = cost.first().map_or(0, Vec::len);
    if cost.iter().any(|row| row.len() != n) {
        return Err(Error::Shape("cost matrix rows differ in length".into()));
    }
    if cost.iter().flatten().any(|c| !c.is_finite()) {
        return Err(Error::Domain("cost matrix holds non-finite entries".into()));
    }
    if m < n {
        return Err(Error::Shape(format!(
            "{m} rows cannot cover {n} columns; pad the row set first"
        )));
    }
    if n == 0 {
        return Ok(TapAssignment {
            pairs: Vec::new(),
            unmatched_pred: (0..m).collect(),
            cost: 0.0,
        });
    }

    // Work on the transpose: columns become the n "workers", rows the m
    // "jobs". 1-based with index 0 as the virtual start.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; m + 1];
    let mut owner = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];

    for worker in 1..=n {
        owner[0] = worker;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost[j - 1][i0 - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut row_of_col = vec![usize::MAX; n];
    let mut unmatched_pred = Vec::new();
    for j in 1..=m {
        match owner[j] {
            0 => unmatched_pred.push(j - 1),
            col => row_of_col[col - 1] = j - 1,
        }
    }
    let pairs: Vec<(usize, usize)> = row_of_col.iter().enumerate().map(|(c, &r)| (r, c)).collect();
    let total = pairs.iter().map(|&(r, c)| cost[r][c]).sum();
    Ok(TapAssignment {
        pairs,
        unmatched_pred,
        cost: total,
    })
}
