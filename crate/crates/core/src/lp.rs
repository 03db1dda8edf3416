//! Small dense two-phase simplex with Bland's rule.
//!
//! Solves `min cᵀx  s.t.  A x = b, x ≥ 0`. Sizes here are a few dozen
//! variables at most, so a full tableau is fine.

const PIVOT_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { x: Vec<f64>, value: f64 },
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub constraints: Vec<Vec<f64>>,
    pub rhs: Vec<f64>,
}

struct Tableau {
    // rows: constraints, last column rhs
    t: Vec<Vec<f64>>,
    basis: Vec<usize>,
    cols: usize,
}

impl Tableau {
    fn pivot(&mut self, row: usize, col: usize) {
        let p = self.t[row][col];
        self.t[row].iter_mut().for_each(|v| *v /= p);
        let pivot_row = self.t[row].clone();
        for (r, line) in self.t.iter_mut().enumerate() {
            if r == row {
                continue;
            }
            let f = line[col];
            if f != 0.0 {
                for (v, &pv) in line.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
                line[col] = 0.0;
            }
        }
        self.basis[row] = col;
    }

    fn rhs(&self, row: usize) -> f64 {
        self.t[row][self.cols]
    }

    /// Minimizes `cost` over columns where `allowed` is true.
    /// Returns false if unbounded.
    fn optimize(&mut self, cost: &[f64], allowed: &[bool]) -> bool {
        loop {
            // reduced cost c_j - c_B B^-1 A_j
            let entering = (0..self.cols).find(|&j| {
                if !allowed[j] || self.basis.contains(&j) {
                    return false;
                }
                let reduced = cost[j]
                    - self
                        .basis
                        .iter()
                        .enumerate()
                        .map(|(r, &b)| cost[b] * self.t[r][j])
                        .sum::<f64>();
                reduced < -1e-11
            });
            let Some(col) = entering else {
                return true;
            };
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.t.len() {
                let a = self.t[r][col];
                if a > PIVOT_EPS {
                    let ratio = self.rhs(r) / a;
                    leave = match leave {
                        None => Some((r, ratio)),
                        Some((lr, lratio)) => {
                            if ratio < lratio - 1e-14
                                || ((ratio - lratio).abs() <= 1e-14 && self.basis[r] < self.basis[lr])
                            {
                                Some((r, ratio))
                            } else {
                                Some((lr, lratio))
                            }
                        }
                    };
                }
            }
            match leave {
                None => return false,
                Some((row, _)) => self.pivot(row, col),
            }
        }
    }
}

impl LinearProgram {
    /// `feasibility_tol` bounds the phase-one residual accepted as feasible.
    pub fn solve(&self, feasibility_tol: f64) -> LpOutcome {
        let n = self.objective.len();
        let m = self.constraints.len();
        let cols = n + m;
        let mut t = Vec::with_capacity(m);
        for (i, row) in self.constraints.iter().enumerate() {
            let sign = if self.rhs[i] < 0.0 { -1.0 } else { 1.0 };
            let mut line = vec![0.0; cols + 1];
            for (j, &a) in row.iter().enumerate() {
                line[j] = sign * a;
            }
            line[n + i] = 1.0;
            line[cols] = sign * self.rhs[i];
            t.push(line);
        }
        let mut tab = Tableau {
            t,
            basis: (n..n + m).collect(),
            cols,
        };

        let mut phase1 = vec![0.0; cols];
        phase1[n..].iter_mut().for_each(|c| *c = 1.0);
        tab.optimize(&phase1, &vec![true; cols]);
        let residual: f64 = (0..m).filter(|&r| tab.basis[r] >= n).map(|r| tab.rhs(r)).sum();
        if residual > feasibility_tol {
            return LpOutcome::Infeasible;
        }

        // drive zero-level artificials out of the basis; rows that cannot be
        // pivoted are redundant and get dropped
        let mut r = 0;
        while r < tab.t.len() {
            if tab.basis[r] >= n {
                let col = (0..n)
                    .filter(|j| !tab.basis.contains(j))
                    .max_by(|&a, &b| tab.t[r][a].abs().total_cmp(&tab.t[r][b].abs()))
                    .filter(|&j| tab.t[r][j].abs() > 1e-9);
                match col {
                    Some(j) => tab.pivot(r, j),
                    None => {
                        tab.t.remove(r);
                        tab.basis.remove(r);
                        continue;
                    }
                }
            }
            r += 1;
        }

        let mut cost = vec![0.0; cols];
        cost[..n].copy_from_slice(&self.objective);
        let allowed: Vec<bool> = (0..cols).map(|j| j < n).collect();
        if !tab.optimize(&cost, &allowed) {
            return LpOutcome::Unbounded;
        }
        let mut x = vec![0.0; n];
        for (r, &b) in tab.basis.iter().enumerate() {
            if b < n {
                x[b] = tab.rhs(r).max(0.0);
            }
        }
        let value = x.iter().zip(&self.objective).map(|(a, c)| a * c).sum();
        LpOutcome::Optimal { x, value }
    }
}
