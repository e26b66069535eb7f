//! Dense two-phase simplex for the small linear programs that appear in the
//! simulator: the exact OPT oracle (|Pi| variables, d + 1 rows), the relaxed
//! exploration LP, and the restricted master problems of the oracle-based
//! solvers.
//!
//! Problems are stated as `maximize c.x` subject to `<=`, `>=` and `=` rows
//! with `x >= 0`. Bland's rule is used throughout, so the method terminates on
//! degenerate problems. Row duals are read off the final tableau and follow the
//! usual sign convention for a maximization: `y >= 0` on `<=` rows, `y <= 0`
//! on `>=` rows, free on equalities, with `b.y` equal to the optimal value.

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("problem is infeasible")]
    Infeasible,
    #[error("problem is unbounded")]
    Unbounded,
    #[error("pivot limit reached")]
    IterationLimit,
    #[error("malformed problem: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    /// One dual value per constraint, in insertion order.
    pub duals: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct LinearProgram {
    objective: Vec<f64>,
    constraints: Vec<Constraint>,
}

const PIVOT_EPS: f64 = 1e-12;
const MAX_PIVOTS: usize = 100_000;

impl LinearProgram {
    pub fn maximize(objective: Vec<f64>) -> Self {
        Self {
            objective,
            constraints: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add_constraint(&mut self, coeffs: Vec<f64>, relation: Relation, rhs: f64) -> &mut Self {
        self.constraints.push(Constraint {
            coeffs,
            relation,
            rhs,
        });
        self
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn solve(&self) -> Result<LpSolution, LpError> {
        let n = self.objective.len();
        for (i, c) in self.constraints.iter().enumerate() {
            if c.coeffs.len() != n {
                return Err(LpError::Malformed(format!(
                    "row {i} has {} coefficients, expected {n}",
                    c.coeffs.len()
                )));
            }
            if !c.rhs.is_finite() || c.coeffs.iter().any(|v| !v.is_finite()) {
                return Err(LpError::Malformed(format!(
                    "row {i} has non-finite entries"
                )));
            }
        }
        if self.objective.iter().any(|v| !v.is_finite()) {
            return Err(LpError::Malformed(
                "objective has non-finite entries".into(),
            ));
        }
        Tableau::build(self).run(&self.objective)
    }
}

struct Tableau {
    m: usize,
    n_orig: usize,
    n_cols: usize,
    /// Row-major `m x (n_cols + 1)`; the last column holds the rhs.
    rows: Vec<f64>,
    basis: Vec<usize>,
    artificial: Vec<bool>,
    identity_col: Vec<usize>,
    flipped: Vec<bool>,
    scale: f64,
}

impl Tableau {
    fn build(lp: &LinearProgram) -> Self {
        let m = lp.constraints.len();
        let n_orig = lp.objective.len();
        let mut flipped = vec![false; m];
        let mut rels = Vec::with_capacity(m);
        for (i, c) in lp.constraints.iter().enumerate() {
            let mut rel = c.relation;
            if c.rhs < 0.0 {
                flipped[i] = true;
                rel = match rel {
                    Relation::Le => Relation::Ge,
                    Relation::Ge => Relation::Le,
                    Relation::Eq => Relation::Eq,
                };
            }
            rels.push(rel);
        }
        let extra: usize = rels
            .iter()
            .map(|r| match r {
                Relation::Le | Relation::Eq => 1,
                Relation::Ge => 2,
            })
            .sum();
        let n_cols = n_orig + extra;
        let width = n_cols + 1;
        let mut rows = vec![0.0; m * width];
        let mut artificial = vec![false; n_cols];
        let mut identity_col = vec![0; m];
        let mut basis = vec![0; m];
        let mut next = n_orig;
        let mut scale: f64 = 1.0;
        for (i, c) in lp.constraints.iter().enumerate() {
            let sign = if flipped[i] { -1.0 } else { 1.0 };
            let row = &mut rows[i * width..(i + 1) * width];
            for (j, &a) in c.coeffs.iter().enumerate() {
                row[j] = sign * a;
                scale = scale.max(a.abs());
            }
            row[n_cols] = sign * c.rhs;
            scale = scale.max(c.rhs.abs());
            match rels[i] {
                Relation::Le => {
                    row[next] = 1.0;
                    identity_col[i] = next;
                    next += 1;
                }
                Relation::Ge => {
                    row[next] = -1.0;
                    row[next + 1] = 1.0;
                    artificial[next + 1] = true;
                    identity_col[i] = next + 1;
                    next += 2;
                }
                Relation::Eq => {
                    row[next] = 1.0;
                    artificial[next] = true;
                    identity_col[i] = next;
                    next += 1;
                }
            }
            basis[i] = identity_col[i];
        }
        for &c in &lp.objective {
            scale = scale.max(c.abs());
        }
        Self {
            m,
            n_orig,
            n_cols,
            rows,
            basis,
            artificial,
            identity_col,
            flipped,
            scale,
        }
    }

    #[inline]
    fn width(&self) -> usize {
        self.n_cols + 1
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.rows[i * self.width() + j]
    }

    /// Reduced-cost row `z_j - c_j` (last entry: objective value).
    fn reduced_costs(&self, costs: &[f64]) -> Vec<f64> {
        let w = self.width();
        let mut obj = vec![0.0; w];
        for j in 0..self.n_cols {
            obj[j] = -costs[j];
        }
        for i in 0..self.m {
            let cb = costs[self.basis[i]];
            if cb != 0.0 {
                let row = &self.rows[i * w..(i + 1) * w];
                for j in 0..w {
                    obj[j] += cb * row[j];
                }
            }
        }
        obj
    }

    fn pivot(&mut self, obj: &mut [f64], r: usize, c: usize) {
        let w = self.width();
        let p = self.at(r, c);
        for j in 0..w {
            self.rows[r * w + j] /= p;
        }
        let pivot_row: Vec<f64> = self.rows[r * w..(r + 1) * w].to_vec();
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.rows[i * w + c];
            if f != 0.0 {
                let row = &mut self.rows[i * w..(i + 1) * w];
                for j in 0..w {
                    row[j] -= f * pivot_row[j];
                }
                row[c] = 0.0;
            }
        }
        let f = obj[c];
        if f != 0.0 {
            for j in 0..w {
                obj[j] -= f * pivot_row[j];
            }
            obj[c] = 0.0;
        }
        self.basis[r] = c;
    }

    /// Runs simplex iterations with Bland's rule until optimal.
    fn optimize(&mut self, obj: &mut [f64], allow: &dyn Fn(usize) -> bool) -> Result<(), LpError> {
        let opt_tol = 1e-11 * self.scale;
        for _ in 0..MAX_PIVOTS {
            let entering = (0..self.n_cols).find(|&j| allow(j) && obj[j] < -opt_tol);
            let Some(c) = entering else {
                return Ok(());
            };
            let mut best: Option<(usize, f64)> = None;
            for i in 0..self.m {
                let a = self.at(i, c);
                if a > PIVOT_EPS {
                    let ratio = self.at(i, self.n_cols) / a;
                    best = match best {
                        None => Some((i, ratio)),
                        Some((bi, br)) => {
                            if ratio < br - 1e-14 * br.abs().max(1.0)
                                || (ratio <= br + 1e-14 * br.abs().max(1.0)
                                    && self.basis[i] < self.basis[bi])
                            {
                                Some((i, ratio))
                            } else {
                                Some((bi, br))
                            }
                        }
                    };
                }
            }
            let Some((r, _)) = best else {
                return Err(LpError::Unbounded);
            };
            self.pivot(obj, r, c);
        }
        Err(LpError::IterationLimit)
    }

    fn run(mut self, objective: &[f64]) -> Result<LpSolution, LpError> {
        let w = self.width();
        // Phase 1: maximize -sum(artificials).
        if self.artificial.iter().any(|&a| a) {
            let costs: Vec<f64> = (0..self.n_cols)
                .map(|j| if self.artificial[j] { -1.0 } else { 0.0 })
                .collect();
            let mut obj = self.reduced_costs(&costs);
            self.optimize(&mut obj, &|_| true)?;
            if obj[self.n_cols] < -1e-9 * self.scale {
                return Err(LpError::Infeasible);
            }
            // Drive zero-level artificials out of the basis where possible.
            for r in 0..self.m {
                if !self.artificial[self.basis[r]] {
                    continue;
                }
                if let Some(c) =
                    (0..self.n_cols).find(|&j| !self.artificial[j] && self.at(r, j).abs() > 1e-9)
                {
                    self.pivot(&mut obj, r, c);
                }
            }
        }
        let mut costs = vec![0.0; self.n_cols];
        costs[..self.n_orig].copy_from_slice(objective);
        let mut obj = self.reduced_costs(&costs);
        let artificial = self.artificial.clone();
        self.optimize(&mut obj, &|j| !artificial[j])?;

        let mut x = vec![0.0; self.n_orig];
        for i in 0..self.m {
            let b = self.basis[i];
            if b < self.n_orig {
                x[b] = self.rows[i * w + self.n_cols].max(0.0);
            }
        }
        let duals = (0..self.m)
            .map(|i| {
                let y = obj[self.identity_col[i]];
                if self.flipped[i] {
                    -y
                } else {
                    y
                }
            })
            .collect();
        let objective_value = objective.iter().zip(&x).map(|(c, v)| c * v).sum();
        Ok(LpSolution {
            x,
            objective: objective_value,
            duals,
        })
    }
}
