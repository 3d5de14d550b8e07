//! A small dense two-phase simplex solver for `max cᵀx` subject to `Ax = b`,
//! `x ≥ 0`. Only used for the positive-combination feasibility problem, where
//! the constraint count is at most `p + 1`.

use nalgebra::DMatrix;

const PIVOT_TOL: f64 = 1e-11;
const COST_TOL: f64 = 1e-10;
/// Degenerate pivots tolerated under Dantzig pricing before switching to Bland.
const DEGENERATE_STREAK: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { x: Vec<f64>, objective: f64 },
    Infeasible,
    Unbounded,
}

struct Tableau {
    // rows 0..m are constraints, row m is the reduced-cost row; last column is the rhs
    t: DMatrix<f64>,
    basis: Vec<usize>,
    m: usize,
    cols: usize,
}

impl Tableau {
    fn rhs(&self) -> usize {
        self.cols
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let width = self.cols + 1;
        let p = self.t[(row, col)];
        for k in 0..width {
            self.t[(row, k)] /= p;
        }
        for r in 0..=self.m {
            if r == row {
                continue;
            }
            let f = self.t[(r, col)];
            if f == 0.0 {
                continue;
            }
            for k in 0..width {
                let v = self.t[(row, k)];
                self.t[(r, k)] -= f * v;
            }
        }
        self.basis[row] = col;
    }

    /// Runs simplex iterations on the current cost row over columns `0..allowed`.
    /// Returns false if the objective is unbounded.
    fn optimize(&mut self, allowed: usize) -> bool {
        let rhs = self.rhs();
        let mut streak = 0usize;
        let max_iter = 50 * (self.cols + self.m) + 1000;
        for _ in 0..max_iter {
            let bland = streak >= DEGENERATE_STREAK;
            let mut enter = None;
            let mut best = COST_TOL;
            for j in 0..allowed {
                let d = self.t[(self.m, j)];
                if d > COST_TOL {
                    if bland {
                        enter = Some(j);
                        break;
                    }
                    if d > best {
                        best = d;
                        enter = Some(j);
                    }
                }
            }
            let Some(col) = enter else {
                return true;
            };
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.m {
                let a = self.t[(r, col)];
                if a > PIVOT_TOL {
                    let ratio = self.t[(r, rhs)].max(0.0) / a;
                    leave = match leave {
                        None => Some((r, ratio)),
                        Some((lr, lratio)) => {
                            if ratio < lratio - 1e-14
                                || (ratio <= lratio + 1e-14 && self.basis[r] < self.basis[lr])
                            {
                                Some((r, ratio))
                            } else {
                                Some((lr, lratio))
                            }
                        }
                    };
                }
            }
            let Some((row, ratio)) = leave else {
                return false;
            };
            if ratio <= 1e-14 {
                streak += 1;
            } else {
                streak = 0;
            }
            self.pivot(row, col);
        }
        true
    }
}

/// Maximizes `cᵀx` subject to `a·x = b`, `x ≥ 0`.
pub fn maximize(c: &[f64], a: &DMatrix<f64>, b: &[f64]) -> LpOutcome {
    let m = a.nrows();
    let n = a.ncols();
    assert_eq!(c.len(), n);
    assert_eq!(b.len(), m);

    let cols = n + m;
    let mut t = DMatrix::zeros(m + 1, cols + 1);
    for i in 0..m {
        let s = if b[i] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            t[(i, j)] = s * a[(i, j)];
        }
        t[(i, n + i)] = 1.0;
        t[(i, cols)] = s * b[i];
    }
    // phase 1: maximize −Σ artificials
    for j in 0..n {
        t[(m, j)] = (0..m).map(|i| t[(i, j)]).sum();
    }
    t[(m, cols)] = (0..m).map(|i| t[(i, cols)]).sum();
    let mut tab = Tableau {
        t,
        basis: (n..n + m).collect(),
        m,
        cols,
    };
    tab.optimize(n);
    let scale = 1.0 + b.iter().map(|v| v.abs()).fold(0.0, f64::max);
    if tab.t[(m, cols)] > 1e-9 * scale {
        return LpOutcome::Infeasible;
    }

    // drive artificials out of the basis; rows where that is impossible are redundant
    let mut redundant = vec![false; m];
    #[allow(clippy::needless_range_loop)] // the pivot mutates the tableau row by row
    for r in 0..m {
        if tab.basis[r] < n {
            continue;
        }
        let pivot_col = (0..n)
            .filter(|&j| tab.t[(r, j)].abs() > 1e-9)
            .max_by(|&i, &j| tab.t[(r, i)].abs().total_cmp(&tab.t[(r, j)].abs()));
        match pivot_col {
            Some(j) => tab.pivot(r, j),
            None => redundant[r] = true,
        }
    }
    if redundant.iter().any(|&x| x) {
        let keep: Vec<usize> = (0..m).filter(|&r| !redundant[r]).collect();
        let mut t = DMatrix::zeros(keep.len() + 1, cols + 1);
        for (new_r, &r) in keep.iter().enumerate() {
            t.set_row(new_r, &tab.t.row(r));
        }
        let basis = keep.iter().map(|&r| tab.basis[r]).collect();
        tab = Tableau {
            t,
            basis,
            m: keep.len(),
            cols,
        };
    }

    // phase 2 cost row
    let m = tab.m;
    for j in 0..=cols {
        let base = if j < n { c[j] } else { 0.0 };
        let cb: f64 = (0..m)
            .map(|r| {
                let bj = tab.basis[r];
                let cj = if bj < n { c[bj] } else { 0.0 };
                cj * tab.t[(r, j)]
            })
            .sum();
        tab.t[(m, j)] = if j == cols { -cb } else { base - cb };
    }
    if !tab.optimize(n) {
        return LpOutcome::Unbounded;
    }
    let mut x = vec![0.0; n];
    for r in 0..m {
        if tab.basis[r] < n {
            x[tab.basis[r]] = tab.t[(r, cols)].max(0.0);
        }
    }
    let objective = c.iter().zip(&x).map(|(ci, xi)| ci * xi).sum();
    LpOutcome::Optimal { x, objective }
}
