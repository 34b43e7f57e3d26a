//! Phase-1 simplex feasibility test for systems of the form
//! Cx <= d, Ex >= 0 with free x, using Bland's rule for anti-cycling.

use super::matrix::{Matrix, Vector};
use crate::error::Error;

const TOL: f64 = 1e-9;

/// True iff some x satisfies Cx <= d and Ex >= 0.
///
/// Free variables are split as x = u - w with u, w >= 0; every constraint
/// row gets a slack and an artificial variable, and phase 1 minimizes the
/// artificial sum. Deterministic by construction (Bland's rule).
pub fn lp_feasible(c: &Matrix, d: &Vector, e: &Matrix) -> Result<bool, Error> {
    let n = if c.rows() > 0 { c.cols() } else { e.cols() };
    if c.rows() != d.dim() {
        return Err(Error::Dimension(format!(
            "C has {} rows but d has {} entries",
            c.rows(),
            d.dim()
        )));
    }
    if c.rows() > 0 && e.rows() > 0 && c.cols() != e.cols() {
        return Err(Error::Dimension(format!(
            "C has {} cols but E has {}",
            c.cols(),
            e.cols()
        )));
    }
    let m = c.rows() + e.rows();
    if m == 0 || n == 0 {
        return Ok(true); // no constraints, or only the trivial x = 0
    }

    // Columns: u (n), w (n), slacks (m), artificials (m), then the rhs.
    let n_struct = 2 * n + m;
    let n_cols = n_struct + m + 1;
    let mut tab = vec![vec![0.0f64; n_cols]; m];

    for i in 0..c.rows() {
        for j in 0..n {
            tab[i][j] = c.get(i, j);
            tab[i][n + j] = -c.get(i, j);
        }
        tab[i][2 * n + i] = 1.0; // slack: Cx + s = d
        tab[i][n_cols - 1] = d[i];
    }
    for i in 0..e.rows() {
        let r = c.rows() + i;
        for j in 0..n {
            tab[r][j] = -e.get(i, j);
            tab[r][n + j] = e.get(i, j);
        }
        tab[r][2 * n + r] = 1.0; // slack: -Ex + s = 0
        tab[r][n_cols - 1] = 0.0;
    }

    // Nonnegative rhs, then an artificial basis.
    for (i, row) in tab.iter_mut().enumerate() {
        if row[n_cols - 1] < 0.0 {
            for v in row.iter_mut() {
                *v = -*v;
            }
        }
        row[n_struct + i] = 1.0;
    }
    let mut basis: Vec<usize> = (0..m).map(|i| n_struct + i).collect();

    // Reduced costs for minimizing the artificial sum.
    let mut obj = vec![0.0f64; n_cols];
    for j in n_struct..n_cols - 1 {
        obj[j] = 1.0;
    }
    for (i, row) in tab.iter().enumerate() {
        debug_assert!(basis[i] >= n_struct);
        for (j, v) in row.iter().enumerate() {
            obj[j] -= v;
        }
    }

    loop {
        // Bland: lowest-index column with a negative reduced cost.
        let entering = (0..n_cols - 1).find(|&j| obj[j] < -TOL);
        let Some(enter) = entering else { break };

        // Ratio test; ties broken by the lowest basis index.
        let mut leave: Option<usize> = None;
        let mut best_ratio = f64::INFINITY;
        for i in 0..m {
            let a = tab[i][enter];
            if a > TOL {
                let ratio = tab[i][n_cols - 1] / a;
                let better = ratio < best_ratio - TOL
                    || (ratio < best_ratio + TOL
                        && leave.map_or(true, |l| basis[i] < basis[l]));
                if better {
                    best_ratio = ratio;
                    leave = Some(i);
                }
            }
        }
        let Some(leave) = leave else {
            // Unbounded in phase 1 cannot happen; treat as numerically stuck.
            break;
        };

        pivot(&mut tab, &mut obj, leave, enter);
        basis[leave] = enter;
    }

    let objective: f64 = basis
        .iter()
        .enumerate()
        .filter(|(_, &b)| b >= n_struct)
        .map(|(i, _)| tab[i][n_cols - 1])
        .sum();
    Ok(objective <= TOL)
}

fn pivot(tab: &mut [Vec<f64>], obj: &mut [f64], row: usize, col: usize) {
    let p = tab[row][col];
    for v in tab[row].iter_mut() {
        *v /= p;
    }
    let pivot_row = tab[row].clone();
    for (i, r) in tab.iter_mut().enumerate() {
        if i == row {
            continue;
        }
        let f = r[col];
        if f != 0.0 {
            for (v, pv) in r.iter_mut().zip(&pivot_row) {
                *v -= f * pv;
            }
        }
    }
    let f = obj[col];
    if f != 0.0 {
        for (v, pv) in obj.iter_mut().zip(&pivot_row) {
            *v -= f * pv;
        }
    }
}
