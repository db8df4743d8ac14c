use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// A vertex of `{x >= 0 : A x = b}`.
#[derive(Debug, Clone, PartialEq)]
pub struct BasicSolution {
    pub x: Vec<f64>,
    /// Columns of `A` that are basic, in increasing order.
    pub basis: Vec<usize>,
}

const PIVOT_EPS: f64 = 1e-11;

struct Tableau {
    n_cols: usize,
    t: Vec<Vec<f64>>,
    cost: Vec<f64>,
    basis: Vec<usize>,
}

impl Tableau {
    fn rhs(&self, i: usize) -> f64 {
        self.t[i][self.n_cols]
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.t[r][c];
        for v in self.t[r].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.t[r].clone();
        for (i, row) in self.t.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[c];
            if f != 0.0 {
                for (v, pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
                row[c] = 0.0;
            }
        }
        let f = self.cost[c];
        if f != 0.0 {
            for (v, pv) in self.cost.iter_mut().zip(&pivot_row) {
                *v -= f * pv;
            }
            self.cost[c] = 0.0;
        }
        self.basis[r] = c;
    }
}

/// Phase-one simplex with Bland's rule. Returns a basic feasible solution
/// whose support has at most `rank(A)` entries.
pub fn find_basic_feasible(a: &DMatrix<f64>, b: &[f64], tol: f64) -> Result<BasicSolution> {
    let (m, n) = a.shape();
    if b.len() != m {
        return Err(Error::config(format!("right-hand side has length {}, expected {m}", b.len())));
    }
    let n_cols = n + m;
    let mut t = vec![vec![0.0; n_cols + 1]; m];
    for (i, row) in t.iter_mut().enumerate() {
        let sign = if b[i] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            row[j] = sign * a[(i, j)];
        }
        row[n + i] = 1.0;
        row[n_cols] = sign * b[i];
    }
    let mut cost = vec![0.0; n_cols + 1];
    for row in &t {
        for j in 0..n {
            cost[j] -= row[j];
        }
        cost[n_cols] -= row[n_cols];
    }
    let mut tab = Tableau { n_cols, t, cost, basis: (n..n_cols).collect() };

    let max_pivots = 50 * (n_cols + 1).pow(2);
    let mut pivots = 0;
    while let Some(c) = (0..n).find(|&j| tab.cost[j] < -PIVOT_EPS) {
        let mut best: Option<(usize, f64)> = None;
        for i in 0..m {
            let aij = tab.t[i][c];
            if aij <= PIVOT_EPS {
                continue;
            }
            let ratio = tab.rhs(i) / aij;
            best = match best {
                None => Some((i, ratio)),
                Some((bi, br)) => {
                    if ratio < br - PIVOT_EPS || (ratio <= br + PIVOT_EPS && tab.basis[i] < tab.basis[bi]) {
                        Some((i, ratio))
                    } else {
                        Some((bi, br))
                    }
                }
            };
        }
        let Some((r, _)) = best else {
            // the phase-one objective is bounded below, so this is numerical noise
            tab.cost[c] = 0.0;
            continue;
        };
        tab.pivot(r, c);
        pivots += 1;
        if pivots > max_pivots {
            return Err(Error::Numeric("simplex did not terminate".into()));
        }
    }

    let infeasibility: f64 = (0..m).filter(|&i| tab.basis[i] >= n).map(|i| tab.rhs(i).abs()).sum();
    let scale = 1.0 + b.iter().map(|v| v.abs()).fold(0.0, f64::max);
    if infeasibility > tol * scale {
        return Err(Error::Numeric(format!("linear system infeasible (phase-one residual {infeasibility:e})")));
    }

    // drive remaining artificials out of the basis where possible
    for i in 0..m {
        if tab.basis[i] < n {
            continue;
        }
        let entering = (0..n).filter(|j| !tab.basis.contains(j)).find(|&j| tab.t[i][j].abs() > 1e-9);
        if let Some(c) = entering {
            tab.pivot(i, c);
        }
    }

    let mut x = vec![0.0; n];
    let mut basis = Vec::new();
    for i in 0..m {
        let j = tab.basis[i];
        if j < n {
            x[j] = tab.rhs(i);
            basis.push(j);
        }
    }
    basis.sort_unstable();
    Ok(BasicSolution { x, basis })
}

/// Re-solves the basic columns exactly and clamps round-off negatives.
pub(crate) fn polish(a: &DMatrix<f64>, b: &[f64], sol: &mut BasicSolution) {
    if sol.basis.is_empty() {
        return;
    }
    let cols: Vec<_> = sol.basis.iter().map(|&j| a.column(j).into_owned()).collect();
    let ab = DMatrix::from_columns(&cols);
    let rhs = DVector::from_column_slice(b);
    let Ok(xb) = ab.clone().svd(true, true).solve(&rhs, 1e-13) else {
        return;
    };
    let residual = (&ab * &xb - &rhs).amax();
    let old: Vec<f64> = sol.basis.iter().map(|&j| sol.x[j]).collect();
    let old_residual = (&ab * DVector::from_vec(old) - &rhs).amax();
    if residual > old_residual || xb.iter().any(|v| *v < -1e-9) {
        return;
    }
    for (&j, &v) in sol.basis.iter().zip(xb.iter()) {
        sol.x[j] = v.max(0.0);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_vertex_of_simplex() {
        let a = DMatrix::from_row_slice(1, 3, &[1.0, 1.0, 1.0]);
        let sol = find_basic_feasible(&a, &[1.0], 1e-12).unwrap();
        assert_eq!(sol.basis.len(), 1);
        assert!((sol.x.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn detects_infeasible() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(find_basic_feasible(&a, &[1.0, 2.0], 1e-12).is_err());
        let a = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        assert!(find_basic_feasible(&a, &[-1.0], 1e-12).is_err());
    }

    #[test]
    fn redundant_rows_keep_support_at_rank() {
        let a = DMatrix::from_row_slice(3, 4, &[1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0]);
        let sol = find_basic_feasible(&a, &[0.5, 0.5, 1.0], 1e-12).unwrap();
        let nnz = sol.x.iter().filter(|v| **v > 0.0).count();
        assert!(nnz <= 2);
        let ax = &a * DVector::from_vec(sol.x.clone());
        assert!((ax[0] - 0.5).abs() < 1e-12 && (ax[1] - 0.5).abs() < 1e-12);
    }
}
