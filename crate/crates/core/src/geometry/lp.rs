//! Small dense two-phase simplex with Bland's rule.
//!
//! Every membership, intersection and norm computation in the crate reduces to
//! one of these programs. Problems are tiny (tens of rows, a few hundred
//! columns), so a dense tableau is the simplest correct choice.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

const PIVOT_EPS: f64 = 1e-11;
/// Pivots at least this fraction of their row's largest entry are preferred.
const STABLE_PIVOT: f64 = 1e-6;
const COST_EPS: f64 = 1e-11;
/// Phase-one objective above this means the constraints are inconsistent.
const FEASIBILITY_EPS: f64 = 1e-9;
/// Phase one stops once the artificials sum to less than this.
const PHASE_ONE_FLOOR: f64 = 1e-13;
const MAX_PIVOTS: usize = 100_000;
/// Pivots between rebuilds of the tableau from the original rows.
const REINVERT_EVERY: usize = 50;
/// Primal slack allowed in the first pass of the ratio test.
const RATIO_SLACK: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VarKind {
    NonNegative,
    Free,
}

#[derive(Clone, Debug)]
struct Row {
    coeffs: Vec<(usize, f64)>,
    relation: Relation,
    rhs: f64,
}

/// `minimize c·x` subject to linear rows; variables are nonnegative unless declared free.
#[derive(Clone, Debug)]
pub struct LinearProgram {
    kinds: Vec<VarKind>,
    objective: Vec<f64>,
    rows: Vec<Row>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum LpOutcome {
    Optimal { x: Vec<f64>, value: f64 },
    Infeasible,
    Unbounded,
}

impl LpOutcome {
    pub fn point(&self) -> Option<&[f64]> {
        match self {
            LpOutcome::Optimal { x, .. } => Some(x),
            _ => None,
        }
    }
}

impl LinearProgram {
    pub fn new() -> Self {
        LinearProgram {
            kinds: Vec::new(),
            objective: Vec::new(),
            rows: Vec::new(),
        }
    }

    /// Adds `count` variables of one kind and returns the index of the first.
    pub fn add_vars(&mut self, count: usize, kind: VarKind) -> usize {
        let first = self.kinds.len();
        self.kinds.extend(std::iter::repeat_n(kind, count));
        self.objective.extend(std::iter::repeat_n(0.0, count));
        first
    }

    pub fn num_vars(&self) -> usize {
        self.kinds.len()
    }

    pub fn set_objective(&mut self, var: usize, coeff: f64) {
        self.objective[var] = coeff;
    }

    /// Adds `Σ coeff·x[var] (rel) rhs`. Repeated indices are summed.
    pub fn add_row<I>(&mut self, coeffs: I, relation: Relation, rhs: f64)
    where
        I: IntoIterator<Item = (usize, f64)>,
    {
        let coeffs: Vec<_> = coeffs.into_iter().filter(|&(_, c)| c != 0.0).collect();
        debug_assert!(coeffs.iter().all(|&(v, _)| v < self.kinds.len()));
        self.rows.push(Row {
            coeffs,
            relation,
            rhs,
        });
    }

    pub fn solve(&self) -> Result<LpOutcome> {
        // Column layout: split structural columns, then slacks, then artificials.
        let mut col_of = Vec::with_capacity(self.kinds.len());
        let mut ncols = 0;
        for kind in &self.kinds {
            col_of.push(ncols);
            ncols += match kind {
                VarKind::NonNegative => 1,
                VarKind::Free => 2,
            };
        }
        let n_struct = ncols;

        let m = self.rows.len();
        let mut dense = vec![vec![0.0; n_struct]; m];
        let mut rhs = vec![0.0; m];
        let mut rel = vec![Relation::Eq; m];
        for (i, row) in self.rows.iter().enumerate() {
            for &(v, c) in &row.coeffs {
                let col = col_of[v];
                dense[i][col] += c;
                if self.kinds[v] == VarKind::Free {
                    dense[i][col + 1] -= c;
                }
            }
            rhs[i] = row.rhs;
            rel[i] = row.relation;
            let scale = dense[i].iter().fold(rhs[i].abs(), |m, a| m.max(a.abs()));
            if scale > 0.0 && scale != 1.0 {
                dense[i].iter_mut().for_each(|a| *a /= scale);
                rhs[i] /= scale;
            }
            if rhs[i] < 0.0 {
                dense[i].iter_mut().for_each(|a| *a = -*a);
                rhs[i] = -rhs[i];
                rel[i] = match rel[i] {
                    Relation::Le => Relation::Ge,
                    Relation::Ge => Relation::Le,
                    Relation::Eq => Relation::Eq,
                };
            }
        }

        let n_slack = rel.iter().filter(|r| **r != Relation::Eq).count();
        let n_art = rel.iter().filter(|r| **r != Relation::Le).count();
        let width = n_struct + n_slack + n_art;
        let art_start = n_struct + n_slack;

        let mut tab = Tableau {
            cells: vec![vec![0.0; width + 1]; m],
            cost: vec![0.0; width + 1],
            basis: vec![0; m],
            active: width,
            original: Vec::new(),
            row_ids: (0..m).collect(),
            base_cost: Vec::new(),
            since_reinvert: 0,
        };
        let (mut s, mut a) = (n_struct, art_start);
        for i in 0..m {
            tab.cells[i][..n_struct].copy_from_slice(&dense[i]);
            tab.cells[i][width] = rhs[i];
            match rel[i] {
                Relation::Le => {
                    tab.cells[i][s] = 1.0;
                    tab.basis[i] = s;
                    s += 1;
                }
                Relation::Ge => {
                    tab.cells[i][s] = -1.0;
                    tab.cells[i][a] = 1.0;
                    tab.basis[i] = a;
                    s += 1;
                    a += 1;
                }
                Relation::Eq => {
                    tab.cells[i][a] = 1.0;
                    tab.basis[i] = a;
                    a += 1;
                }
            }
        }

        tab.original = tab.cells.clone();

        // Phase one: minimize the sum of artificials.
        if n_art > 0 {
            let mut cost = vec![0.0; width + 1];
            cost[art_start..width].fill(1.0);
            tab.set_cost(cost);
            tab.run(Some(PHASE_ONE_FLOOR))?;
            let infeasibility = -tab.cost[width];
            if infeasibility > FEASIBILITY_EPS {
                return Ok(LpOutcome::Infeasible);
            }
            if infeasibility < -FEASIBILITY_EPS {
                return Err(Error::Numerical(format!(
                    "phase one ended at negative infeasibility {infeasibility:e}"
                )));
            }
            tab.evict_artificials(art_start);
            tab.active = art_start;
        }

        // Phase two on the original objective.
        let mut cost = vec![0.0; width + 1];
        for (v, kind) in self.kinds.iter().enumerate() {
            let col = col_of[v];
            cost[col] = self.objective[v];
            if *kind == VarKind::Free {
                cost[col + 1] = -self.objective[v];
            }
        }
        tab.set_cost(cost);
        if !tab.run(None)? {
            return Ok(LpOutcome::Unbounded);
        }

        let mut col_value = vec![0.0; n_struct];
        for (i, &b) in tab.basis.iter().enumerate() {
            if b < n_struct {
                col_value[b] = tab.cells[i][width];
            }
        }
        let x: Vec<f64> = self
            .kinds
            .iter()
            .enumerate()
            .map(|(v, kind)| match kind {
                VarKind::NonNegative => col_value[col_of[v]],
                VarKind::Free => col_value[col_of[v]] - col_value[col_of[v] + 1],
            })
            .collect();
        let value = x.iter().zip(&self.objective).map(|(a, b)| a * b).sum();
        Ok(LpOutcome::Optimal { x, value })
    }
}

impl Default for LinearProgram {
    fn default() -> Self {
        Self::new()
    }
}

struct Tableau {
    /// Constraint rows; last column is the right-hand side.
    cells: Vec<Vec<f64>>,
    /// Reduced costs; last entry is minus the objective value.
    cost: Vec<f64>,
    basis: Vec<usize>,
    /// Columns at or beyond this index may not enter the basis.
    active: usize,
    /// Rows as first laid out, before any pivoting.
    original: Vec<Vec<f64>>,
    /// Original row behind each current row.
    row_ids: Vec<usize>,
    /// Objective of the current phase, before pricing out.
    base_cost: Vec<f64>,
    since_reinvert: usize,
}

impl Tableau {
    fn rhs_col(&self) -> usize {
        self.cost.len() - 1
    }

    fn set_cost(&mut self, cost: Vec<f64>) {
        self.base_cost.clone_from(&cost);
        self.cost = cost;
        self.price_out();
    }

    /// Rebuilds the rows as `B⁻¹A` for the current basis, discarding the
    /// rounding error that pivoting accumulates.
    fn reinvert(&mut self) -> Result<()> {
        self.since_reinvert = 0;
        let m = self.cells.len();
        if m == 0 {
            return Ok(());
        }
        let width = self.rhs_col();
        let cols: Vec<usize> = (0..self.active).chain([width]).collect();
        let orig = |i: usize, j: usize| self.original[self.row_ids[i]][j];
        let b = DMatrix::from_fn(m, m, |i, k| orig(i, self.basis[k]));
        let a = DMatrix::from_fn(m, cols.len(), |i, j| orig(i, cols[j]));
        let t = b
            .lu()
            .solve(&a)
            .ok_or_else(|| Error::Numerical("basis matrix became singular".into()))?;
        for k in 0..m {
            let row = &mut self.cells[k];
            row.fill(0.0);
            for (j, &c) in cols.iter().enumerate() {
                row[c] = t[(k, j)];
            }
            for (k2, &b) in self.basis.iter().enumerate() {
                row[b] = f64::from(k == k2);
            }
        }
        self.cost.clone_from(&self.base_cost);
        self.price_out();
        Ok(())
    }

    /// Makes reduced costs of basic columns zero.
    fn price_out(&mut self) {
        for i in 0..self.cells.len() {
            let cb = self.cost[self.basis[i]];
            if cb != 0.0 {
                for (c, a) in self.cost.iter_mut().zip(&self.cells[i]) {
                    *c -= cb * a;
                }
            }
        }
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.cells[r][c];
        self.cells[r].iter_mut().for_each(|a| *a /= p);
        let pivot_row = self.cells[r].clone();
        for (i, row) in self.cells.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[c];
            if f != 0.0 {
                for (a, b) in row.iter_mut().zip(&pivot_row) {
                    *a -= f * b;
                }
                row[c] = 0.0;
            }
        }
        let f = self.cost[c];
        if f != 0.0 {
            for (a, b) in self.cost.iter_mut().zip(&pivot_row) {
                *a -= f * b;
            }
            self.cost[c] = 0.0;
        }
        self.basis[r] = c;
    }

    /// Largest coefficient magnitude in row `i`, at least 1.
    fn row_scale(&self, i: usize) -> f64 {
        self.cells[i][..self.active]
            .iter()
            .fold(1.0, |m, a| m.max(a.abs()))
    }

    /// Runs pivots to optimality, or until the objective reaches `floor`.
    /// Returns `false` when unbounded.
    ///
    /// Entering columns follow Bland's order, skipping columns whose pivot
    /// would be tiny next to its row while a better-conditioned one exists.
    fn run(&mut self, floor: Option<f64>) -> Result<bool> {
        let width = self.rhs_col();
        for _ in 0..MAX_PIVOTS {
            if self.since_reinvert >= REINVERT_EVERY {
                self.reinvert()?;
            }
            if floor.is_some_and(|f| -self.cost[width] <= f) {
                if self.since_reinvert > 0 {
                    self.reinvert()?;
                    continue;
                }
                return Ok(true);
            }
            let eps = COST_EPS
                * self.cost[..self.active]
                    .iter()
                    .fold(1.0_f64, |m, c| m.max(c.abs()));
            let mut fallback = None;
            let mut chosen = None;
            for enter in (0..self.active).filter(|&j| self.cost[j] < -eps) {
                let Some(leave) = self.leaving_row(enter) else {
                    chosen = None;
                    fallback = None;
                    if self.since_reinvert == 0 {
                        return Ok(false);
                    }
                    break;
                };
                if self.cells[leave][enter] >= STABLE_PIVOT * self.row_scale(leave) {
                    chosen = Some((leave, enter));
                    break;
                }
                fallback.get_or_insert((leave, enter));
            }
            match chosen.or(fallback) {
                Some((r, c)) => {
                    self.pivot(r, c);
                    self.since_reinvert += 1;
                }
                // confirm on a freshly rebuilt tableau before stopping
                None if self.since_reinvert > 0 => self.reinvert()?,
                None => return Ok(true),
            }
        }
        Err(Error::PivotLimit(MAX_PIVOTS))
    }

    /// Harris two-pass ratio test: bound the step with a little slack, then
    /// take the largest pivot among rows within that bound.
    fn leaving_row(&self, enter: usize) -> Option<usize> {
        let rhs = self.rhs_col();
        let candidates: Vec<usize> = (0..self.cells.len())
            .filter(|&i| self.cells[i][enter] > PIVOT_EPS)
            .collect();
        let bound = candidates
            .iter()
            .map(|&i| (self.cells[i][rhs].max(0.0) + RATIO_SLACK) / self.cells[i][enter])
            .fold(f64::INFINITY, f64::min);
        candidates
            .into_iter()
            .filter(|&i| self.cells[i][rhs].max(0.0) / self.cells[i][enter] <= bound)
            .max_by(|&i, &r| {
                self.cells[i][enter]
                    .total_cmp(&self.cells[r][enter])
                    .then(self.basis[r].cmp(&self.basis[i]))
            })
    }

    /// Pivots zero-level artificials out of the basis; rows that cannot be
    /// pivoted are redundant and dropped.
    fn evict_artificials(&mut self, art_start: usize) {
        let mut i = 0;
        while i < self.cells.len() {
            if self.basis[i] >= art_start {
                let best = (0..art_start)
                    .filter(|&j| self.cells[i][j].abs() > PIVOT_EPS)
                    .max_by(|&a, &b| self.cells[i][a].abs().total_cmp(&self.cells[i][b].abs()));
                match best {
                    Some(c) => self.pivot(i, c),
                    None => {
                        self.cells.remove(i);
                        self.basis.remove(i);
                        self.row_ids.remove(i);
                        continue;
                    }
                }
            }
            i += 1;
        }
        // Artificial columns are frozen out; clear them so they cannot leak into phase two.
        for row in &mut self.cells {
            for a in &mut row[art_start..self.cost.len() - 1] {
                *a = 0.0;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn optimal(out: LpOutcome) -> (Vec<f64>, f64) {
        match out {
            LpOutcome::Optimal { x, value } => (x, value),
            other => panic!("expected optimum, got {other:?}"),
        }
    }

    #[test]
    fn textbook_maximization() {
        // max 3x + 5y s.t. x ≤ 4, 2y ≤ 12, 3x + 2y ≤ 18 → (2, 6), 36
        let mut lp = LinearProgram::new();
        let x = lp.add_vars(2, VarKind::NonNegative);
        lp.set_objective(x, -3.0);
        lp.set_objective(x + 1, -5.0);
        lp.add_row([(x, 1.0)], Relation::Le, 4.0);
        lp.add_row([(x + 1, 2.0)], Relation::Le, 12.0);
        lp.add_row([(x, 3.0), (x + 1, 2.0)], Relation::Le, 18.0);
        let (sol, value) = optimal(lp.solve().unwrap());
        assert!((sol[0] - 2.0).abs() < 1e-12 && (sol[1] - 6.0).abs() < 1e-12);
        assert!((value + 36.0).abs() < 1e-12);
    }

    #[test]
    fn equality_and_ge_rows() {
        // min x + y s.t. x + y ≥ 2, x − y = 1 → (1.5, 0.5)
        let mut lp = LinearProgram::new();
        let x = lp.add_vars(2, VarKind::NonNegative);
        lp.set_objective(x, 1.0);
        lp.set_objective(x + 1, 1.0);
        lp.add_row([(x, 1.0), (x + 1, 1.0)], Relation::Ge, 2.0);
        lp.add_row([(x, 1.0), (x + 1, -1.0)], Relation::Eq, 1.0);
        let (sol, value) = optimal(lp.solve().unwrap());
        assert!((value - 2.0).abs() < 1e-12);
        assert!((sol[0] - sol[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn free_variables_go_negative() {
        // min x s.t. x ≥ −3 with x free
        let mut lp = LinearProgram::new();
        let x = lp.add_vars(1, VarKind::Free);
        lp.set_objective(x, 1.0);
        lp.add_row([(x, 1.0)], Relation::Ge, -3.0);
        let (sol, _) = optimal(lp.solve().unwrap());
        assert!((sol[0] + 3.0).abs() < 1e-12);
    }

    #[test]
    fn detects_infeasible_and_unbounded() {
        let mut lp = LinearProgram::new();
        let x = lp.add_vars(1, VarKind::NonNegative);
        lp.add_row([(x, 1.0)], Relation::Le, 1.0);
        lp.add_row([(x, 1.0)], Relation::Ge, 2.0);
        assert_eq!(lp.solve().unwrap(), LpOutcome::Infeasible);

        let mut lp = LinearProgram::new();
        let x = lp.add_vars(1, VarKind::Free);
        lp.set_objective(x, -1.0);
        lp.add_row([(x, 1.0)], Relation::Ge, 0.0);
        assert_eq!(lp.solve().unwrap(), LpOutcome::Unbounded);
    }

    #[test]
    fn redundant_equalities_are_dropped() {
        let mut lp = LinearProgram::new();
        let x = lp.add_vars(2, VarKind::NonNegative);
        lp.set_objective(x, 1.0);
        lp.add_row([(x, 1.0), (x + 1, 1.0)], Relation::Eq, 1.0);
        lp.add_row([(x, 2.0), (x + 1, 2.0)], Relation::Eq, 2.0);
        let (sol, value) = optimal(lp.solve().unwrap());
        assert!(value.abs() < 1e-12);
        assert!((sol[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_cycling_example_terminates() {
        // Beale's example cycles under the largest-coefficient rule.
        let mut lp = LinearProgram::new();
        let x = lp.add_vars(4, VarKind::NonNegative);
        for (j, c) in [-0.75, 150.0, -0.02, 6.0].into_iter().enumerate() {
            lp.set_objective(x + j, c);
        }
        lp.add_row(
            [(x, 0.25), (x + 1, -60.0), (x + 2, -0.04), (x + 3, 9.0)],
            Relation::Le,
            0.0,
        );
        lp.add_row(
            [(x, 0.5), (x + 1, -90.0), (x + 2, -0.02), (x + 3, 3.0)],
            Relation::Le,
            0.0,
        );
        lp.add_row([(x + 2, 1.0)], Relation::Le, 1.0);
        let (_, value) = optimal(lp.solve().unwrap());
        assert!((value + 0.05).abs() < 1e-12);
    }
}
