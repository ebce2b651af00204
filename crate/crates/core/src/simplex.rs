//! Dense two-phase simplex for the tiny decoy-state linear programs.
//!
//! The LPs here have a few dozen variables and rows, so a dense tableau with
//! Bland's anti-cycling rule is exact enough and, more importantly,
//! deterministic: identical inputs pivot identically. Problems are stated as
//!
//! ```text
//! minimize c·x   subject to  A x ≤ b,  x ≥ 0
//! ```
//!
//! with upper bounds supplied by the caller as explicit rows.

const EPS: f64 = 1e-11;

/// Outcome of a solve.
#[derive(Clone, Debug, PartialEq)]
pub enum LpOutcome {
    Optimal {
        objective: f64,
        solution: Vec<f64>,
    },
    Infeasible,
    Unbounded,
    /// The pivot sequence lost feasibility beyond recoverable tolerance;
    /// callers must treat the instance as unresolved.
    NumericalFailure,
}

/// A dense inequality-form LP.
#[derive(Clone, Debug, Default)]
pub struct LinearProgram {
    pub n_vars: usize,
    /// Rows (a, b) meaning a·x ≤ b.
    pub rows: Vec<(Vec<f64>, f64)>,
    /// Minimization objective.
    pub objective: Vec<f64>,
}

impl LinearProgram {
    pub fn new(n_vars: usize) -> Self {
        LinearProgram {
            n_vars,
            rows: Vec::new(),
            objective: vec![0.0; n_vars],
        }
    }

    pub fn add_row(&mut self, coeffs: Vec<f64>, rhs: f64) {
        debug_assert_eq!(coeffs.len(), self.n_vars);
        self.rows.push((coeffs, rhs));
    }

    /// Append x_j ≤ hi for every variable.
    pub fn add_upper_bounds(&mut self, hi: f64) {
        for j in 0..self.n_vars {
            let mut row = vec![0.0; self.n_vars];
            row[j] = 1.0;
            self.rows.push((row, hi));
        }
    }

    pub fn solve_min(&self) -> LpOutcome {
        let out = Tableau::new(self).solve();
        if let LpOutcome::Optimal { solution, .. } = &out {
            // certify the vertex against the original, unscaled data
            for (row, rhs) in &self.rows {
                let lhs: f64 = row.iter().zip(solution).map(|(a, x)| a * x).sum();
                if lhs > rhs + 1e-6 * (1.0 + rhs.abs()) {
                    return LpOutcome::NumericalFailure;
                }
            }
            if solution.iter().any(|x| *x < -1e-8) {
                return LpOutcome::NumericalFailure;
            }
        }
        out
    }

    pub fn solve_max(&self) -> LpOutcome {
        let mut flipped = self.clone();
        for c in &mut flipped.objective {
            *c = -*c;
        }
        match flipped.solve_min() {
            LpOutcome::Optimal {
                objective,
                solution,
            } => LpOutcome::Optimal {
                objective: -objective,
                solution,
            },
            other => other,
        }
    }
}

struct Tableau {
    m: usize,
    /// structural + slack + artificial
    n_total: usize,
    n_struct: usize,
    n_art: usize,
    /// m rows of n_total coefficients plus rhs
    a: Vec<f64>,
    rhs: Vec<f64>,
    basis: Vec<usize>,
    /// phase-2 cost row (reduced costs maintained through pivots)
    cost: Vec<f64>,
    cost_rhs: f64,
    /// phase-1 cost row
    art_cost: Vec<f64>,
    art_rhs: f64,
}

impl Tableau {
    fn new(lp: &LinearProgram) -> Self {
        let m = lp.rows.len();
        let n_struct = lp.n_vars;
        // negative-rhs rows get negated (to ≥) and receive an artificial
        let n_art = lp.rows.iter().filter(|(_, b)| *b < 0.0).count();
        let n_total = n_struct + m + n_art;
        let mut a = vec![0.0; m * n_total];
        let mut rhs = vec![0.0; m];
        let mut basis = vec![0usize; m];
        let mut art_cost = vec![0.0; n_total];
        let mut art_rhs = 0.0;
        let mut art_idx = 0;
        for (i, (coeffs, b)) in lp.rows.iter().enumerate() {
            // row equilibration keeps the pivot tolerances meaningful when
            // constraint coefficients span many orders of magnitude
            let row_scale = coeffs
                .iter()
                .fold(0.0f64, |acc, v| acc.max(v.abs()))
                .max(b.abs() * 1e-3)
                .max(1e-300);
            let flip = if *b < 0.0 { -1.0 } else { 1.0 } / row_scale;
            for (j, v) in coeffs.iter().enumerate() {
                a[i * n_total + j] = flip * v;
            }
            a[i * n_total + n_struct + i] = flip.signum(); // slack (negated = surplus)
            rhs[i] = flip * b;
            if *b < 0.0 {
                let col = n_struct + m + art_idx;
                a[i * n_total + col] = 1.0;
                basis[i] = col;
                art_idx += 1;
                // phase-1 objective: sum of artificials; express in reduced form
                // by subtracting this row from the cost row
                for (j, c) in art_cost.iter_mut().enumerate() {
                    *c -= a[i * n_total + j];
                }
                art_cost[col] += 1.0; // cancel the +1 of the artificial itself
                art_rhs -= rhs[i];
            } else {
                basis[i] = n_struct + i;
            }
        }
        let mut cost = vec![0.0; n_total];
        cost[..n_struct].copy_from_slice(&lp.objective);
        Tableau {
            m,
            n_total,
            n_struct,
            n_art,
            a,
            rhs,
            basis,
            cost,
            cost_rhs: 0.0,
            art_cost,
            art_rhs,
        }
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let n = self.n_total;
        let piv = self.a[row * n + col];
        let inv = 1.0 / piv;
        for j in 0..n {
            self.a[row * n + j] *= inv;
        }
        self.rhs[row] *= inv;
        self.a[row * n + col] = 1.0;
        for i in 0..self.m {
            if i == row {
                continue;
            }
            let factor = self.a[i * n + col];
            if factor == 0.0 {
                continue;
            }
            for j in 0..n {
                self.a[i * n + j] -= factor * self.a[row * n + j];
            }
            self.rhs[i] -= factor * self.rhs[row];
            self.a[i * n + col] = 0.0;
        }
        for (costs, crhs) in [
            (&mut self.cost, &mut self.cost_rhs),
            (&mut self.art_cost, &mut self.art_rhs),
        ] {
            let factor = costs[col];
            if factor != 0.0 {
                for (j, c) in costs.iter_mut().enumerate().take(n) {
                    *c -= factor * self.a[row * n + j];
                }
                *crhs -= factor * self.rhs[row];
                costs[col] = 0.0;
            }
        }
        self.basis[row] = col;
    }

    /// One pivot on the given cost row; returns false when optimal.
    ///
    /// Entering column: most negative reduced cost (Dantzig) normally, the
    /// lowest negative index (Bland) while a degenerate streak is running —
    /// Dantzig makes progress, Bland guarantees escape from cycling.
    fn iterate(
        &mut self,
        phase1: bool,
        allow_struct_only: bool,
        bland: bool,
    ) -> Result<Option<f64>, LpOutcome> {
        let n = self.n_total;
        let limit = if allow_struct_only {
            self.n_struct + self.m
        } else {
            n
        };
        let costs = if phase1 { &self.art_cost } else { &self.cost };
        let mut entering = None;
        if bland {
            for (j, c) in costs.iter().enumerate().take(limit) {
                if *c < -EPS {
                    entering = Some(j);
                    break;
                }
            }
        } else {
            let mut best = -EPS;
            for (j, c) in costs.iter().enumerate().take(limit) {
                if *c < best {
                    best = *c;
                    entering = Some(j);
                }
            }
        }
        let Some(col) = entering else {
            return Ok(None);
        };
        // ratio test with a small feasibility cushion against degeneracy,
        // ties broken toward the smallest basis index (Bland-compatible)
        let mut leaving: Option<(usize, f64)> = None;
        for i in 0..self.m {
            let aij = self.a[i * n + col];
            if aij > 1e-9 {
                let ratio = self.rhs[i] / aij;
                match leaving {
                    None => leaving = Some((i, ratio)),
                    Some((bi, br)) => {
                        if ratio < br - 1e-12
                            || ((ratio - br).abs() <= 1e-12 && self.basis[i] < self.basis[bi])
                        {
                            leaving = Some((i, ratio));
                        }
                    }
                }
            }
        }
        let Some((row, ratio)) = leaving else {
            return Err(LpOutcome::Unbounded);
        };
        self.pivot(row, col);
        Ok(Some(ratio))
    }

    /// Run one phase to optimality; returns false on a stall.
    fn run_phase(&mut self, phase1: bool, allow_struct_only: bool) -> Result<bool, LpOutcome> {
        let max_iters = 2000 + 400 * (self.m + self.n_total);
        let mut iters = 0usize;
        let mut degenerate_streak = 0usize;
        loop {
            let bland = degenerate_streak > 30;
            match self.iterate(phase1, allow_struct_only, bland) {
                Ok(None) => return Ok(true),
                Ok(Some(ratio)) => {
                    if ratio.abs() <= 1e-12 {
                        degenerate_streak += 1;
                    } else {
                        degenerate_streak = 0;
                    }
                }
                Err(out) => return Err(out),
            }
            iters += 1;
            if iters > max_iters {
                return Ok(false);
            }
        }
    }

    fn solve(mut self) -> LpOutcome {
        // phase 1
        if self.n_art > 0 {
            match self.run_phase(true, false) {
                Ok(true) => {}
                Ok(false) => return LpOutcome::NumericalFailure,
                Err(_) => return LpOutcome::Infeasible,
            }
            if self.art_rhs < -1e-7 {
                return LpOutcome::Infeasible;
            }
            // drive any artificial still in the basis out of it
            for i in 0..self.m {
                if self.basis[i] >= self.n_struct + self.m {
                    let n = self.n_total;
                    if let Some(col) =
                        (0..self.n_struct + self.m).find(|&j| self.a[i * n + j].abs() > 1e-9)
                    {
                        self.pivot(i, col);
                    }
                    // otherwise the row is all-zero (redundant) and harmless
                }
            }
        }
        // phase 2 ignores artificial columns
        match self.run_phase(false, true) {
            Ok(true) => {}
            Ok(false) => return LpOutcome::NumericalFailure,
            Err(out) => return out,
        }
        let mut solution = vec![0.0; self.n_struct];
        for i in 0..self.m {
            if self.basis[i] < self.n_struct {
                solution[self.basis[i]] = self.rhs[i];
            }
        }
        // cost_rhs accumulates -(c·x_B) through pivots
        LpOutcome::Optimal {
            objective: -self.cost_rhs,
            solution,
        }
    }
}
