//! Dense two-phase tableau simplex with Bland's anti-cycling rule.
//!
//! Problems in this crate are small (at most a few thousand constraints and
//! a handful of variables), so a dense tableau is adequate.

use crate::error::{Error, Result};

/// Absolute feasibility tolerance.
pub const FEAS_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-11;
const MAX_PIVOTS: usize = 200_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

/// `maximize objective·x` subject to the constraints. Variables are
/// nonnegative unless marked free.
#[derive(Debug, Clone)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
    pub free: Vec<bool>,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    /// One multiplier per constraint, in the original orientation; for a
    /// maximization these satisfy `Aᵗ y >= c` on nonnegative variables.
    pub duals: Vec<f64>,
    pub pivots: usize,
}

impl LinearProgram {
    pub fn new(n_vars: usize) -> Self {
        LinearProgram {
            objective: vec![0.0; n_vars],
            constraints: Vec::new(),
            free: vec![false; n_vars],
        }
    }

    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add(&mut self, coeffs: Vec<f64>, relation: Relation, rhs: f64) {
        debug_assert_eq!(coeffs.len(), self.n_vars());
        self.constraints.push(Constraint { coeffs, relation, rhs });
    }

    pub fn solve(&self) -> Result<LpSolution> {
        Tableau::build(self).run(self)
    }
}

struct Tableau {
    rows: usize,
    cols: usize,
    // row-major, `cols + 1` entries per row, rhs last
    a: Vec<f64>,
    basis: Vec<usize>,
    // column that started as the identity column of each row
    init_col: Vec<usize>,
    artificial_start: usize,
    // structural column -> (variable, sign)
    col_var: Vec<(usize, f64)>,
    row_sign: Vec<f64>,
    pivots: usize,
}

impl Tableau {
    fn build(lp: &LinearProgram) -> Tableau {
        let n = lp.n_vars();
        let mut col_var = Vec::new();
        for j in 0..n {
            col_var.push((j, 1.0));
            if lp.free[j] {
                col_var.push((j, -1.0));
            }
        }
        let structural = col_var.len();
        let m = lp.constraints.len();

        // orient rows so rhs >= 0
        let mut rels = Vec::with_capacity(m);
        let mut row_sign = Vec::with_capacity(m);
        for c in &lp.constraints {
            let s = if c.rhs < 0.0 { -1.0 } else { 1.0 };
            let rel = match (c.relation, s < 0.0) {
                (Relation::Le, true) => Relation::Ge,
                (Relation::Ge, true) => Relation::Le,
                (r, _) => r,
            };
            rels.push(rel);
            row_sign.push(s);
        }
        let n_slack = rels.iter().filter(|r| **r != Relation::Eq).count();
        let n_art = rels.iter().filter(|r| **r != Relation::Le).count();
        let artificial_start = structural + n_slack;
        let cols = artificial_start + n_art;
        let w = cols + 1;
        let mut a = vec![0.0; m * w];
        let mut basis = vec![0; m];
        let mut init_col = vec![0; m];
        let (mut slack, mut art) = (structural, artificial_start);
        for (i, c) in lp.constraints.iter().enumerate() {
            let s = row_sign[i];
            let row = &mut a[i * w..(i + 1) * w];
            for (col, &(var, sign)) in col_var.iter().enumerate() {
                row[col] = s * sign * c.coeffs[var];
            }
            row[cols] = s * c.rhs;
            match rels[i] {
                Relation::Le => {
                    row[slack] = 1.0;
                    basis[i] = slack;
                    init_col[i] = slack;
                    slack += 1;
                }
                Relation::Ge => {
                    row[slack] = -1.0;
                    slack += 1;
                    row[art] = 1.0;
                    basis[i] = art;
                    init_col[i] = art;
                    art += 1;
                }
                Relation::Eq => {
                    row[art] = 1.0;
                    basis[i] = art;
                    init_col[i] = art;
                    art += 1;
                }
            }
        }
        Tableau {
            rows: m,
            cols,
            a,
            basis,
            init_col,
            artificial_start,
            col_var,
            row_sign,
            pivots: 0,
        }
    }

    #[inline]
    fn at(&self, r: usize, c: usize) -> f64 {
        self.a[r * (self.cols + 1) + c]
    }

    fn pivot(&mut self, pr: usize, pc: usize) {
        let w = self.cols + 1;
        let p = self.at(pr, pc);
        for c in 0..w {
            self.a[pr * w + c] /= p;
        }
        let (before, rest) = self.a.split_at_mut(pr * w);
        let (prow, after) = rest.split_at_mut(w);
        for row in before.chunks_mut(w).chain(after.chunks_mut(w)) {
            let f = row[pc];
            if f != 0.0 {
                for (x, y) in row.iter_mut().zip(prow.iter()) {
                    *x -= f * y;
                }
                row[pc] = 0.0;
            }
        }
        self.basis[pr] = pc;
        self.pivots += 1;
    }

    /// Maximizes `cost·x` over the current basis. Columns at or beyond
    /// `barred` may not enter.
    fn optimize(&mut self, cost: &[f64], barred: usize) -> Result<()> {
        loop {
            if self.pivots > MAX_PIVOTS {
                return Err(Error::Consistency("simplex pivot limit reached".into()));
            }
            let mut is_basic = vec![false; self.cols];
            self.basis.iter().for_each(|&b| is_basic[b] = true);
            // Bland: lowest-index improving column
            let mut entering = None;
            for c in 0..barred {
                if is_basic[c] {
                    continue;
                }
                let mut rc = cost[c];
                for r in 0..self.rows {
                    rc -= cost[self.basis[r]] * self.at(r, c);
                }
                if rc > FEAS_TOL {
                    entering = Some(c);
                    break;
                }
            }
            let Some(pc) = entering else {
                return Ok(());
            };
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.rows {
                let v = self.at(r, pc);
                if v > PIVOT_TOL {
                    let ratio = self.at(r, self.cols) / v;
                    leave = match leave {
                        None => Some((r, ratio)),
                        Some((br, bratio)) => {
                            if ratio < bratio - 1e-12
                                || (ratio <= bratio + 1e-12 && self.basis[r] < self.basis[br])
                            {
                                Some((r, ratio))
                            } else {
                                Some((br, bratio))
                            }
                        }
                    };
                }
            }
            let Some((pr, _)) = leave else {
                return Err(Error::Unbounded);
            };
            self.pivot(pr, pc);
        }
    }

    fn run(mut self, lp: &LinearProgram) -> Result<LpSolution> {
        // phase I: maximize -Σ artificials
        if self.artificial_start < self.cols {
            let mut cost = vec![0.0; self.cols];
            cost[self.artificial_start..].iter_mut().for_each(|c| *c = -1.0);
            self.optimize(&cost, self.cols)?;
            let infeas: f64 = (0..self.rows)
                .filter(|&r| self.basis[r] >= self.artificial_start)
                .map(|r| self.at(r, self.cols))
                .sum();
            if infeas > FEAS_TOL * (1.0 + self.rows as f64) {
                return Err(Error::Infeasible);
            }
            // drive zero-level artificials out where possible
            for r in 0..self.rows {
                if self.basis[r] >= self.artificial_start {
                    if let Some(c) = (0..self.artificial_start)
                        .filter(|c| !self.basis.contains(c))
                        .find(|&c| self.at(r, c).abs() > 1e-9)
                    {
                        self.pivot(r, c);
                    }
                }
            }
        }

        let mut cost = vec![0.0; self.cols];
        for (col, &(var, sign)) in self.col_var.iter().enumerate() {
            cost[col] = sign * lp.objective[var];
        }
        self.optimize(&cost, self.artificial_start)?;

        let mut x = vec![0.0; lp.n_vars()];
        for r in 0..self.rows {
            let b = self.basis[r];
            if b < self.col_var.len() {
                let (var, sign) = self.col_var[b];
                x[var] += sign * self.at(r, self.cols);
            }
        }
        let duals = (0..self.rows)
            .map(|i| {
                let c0 = self.init_col[i];
                let pi: f64 = (0..self.rows).map(|r| cost[self.basis[r]] * self.at(r, c0)).sum();
                pi * self.row_sign[i]
            })
            .collect();
        let objective = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
        Ok(LpSolution { x, objective, duals, pivots: self.pivots })
    }
}
