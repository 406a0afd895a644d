//! Dense linear programs and a two-phase tableau simplex.
//!
//! Pricing uses Bland's rule (smallest improving column). The ratio test is
//! two-pass: near-ties are broken by smallest basic index, but only among
//! pivot entries of comparable size, so degenerate rows holding round-off are
//! skipped. The pivot sequence is a pure function of the model. The final point
//! is recomputed from the original rows when the tableau has drifted.
//! Variables with general bounds are rewritten into nonnegative columns before
//! the tableau is built; finite upper bounds become explicit rows.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Pivot element magnitude below which a column entry is treated as zero.
const PIVOT_TOL: f64 = 1e-9;
/// Reduced cost a column needs before it may enter the basis.
const OPT_TOL: f64 = 1e-9;
/// Feasibility slack granted to basic values in the ratio test.
const RATIO_SLACK: f64 = 1e-9;
/// Smallest admissible pivot relative to the largest ratio-test candidate.
const PIVOT_SHARE: f64 = 1e-2;
const DEFAULT_MAX_PIVOTS: usize = 200_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Maximize,
    Minimize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

/// `sense c·x` subject to linear rows and `lower ≤ x ≤ upper`.
///
/// Infinite bounds are `f64::INFINITY` / `f64::NEG_INFINITY`.
#[derive(Debug, Clone, PartialEq)]
pub struct LpModel {
    pub sense: Sense,
    pub objective: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub constraints: Vec<Constraint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Optimal assignment; empty unless `status` is `Optimal`.
    pub x: Vec<f64>,
    /// `c·x` when optimal, NaN when infeasible, ±∞ in the improving direction
    /// when unbounded.
    pub objective: f64,
    pub pivots: usize,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LpError {
    #[error("malformed linear program: {0}")]
    Malformed(String),
    #[error("simplex did not terminate within {pivots} pivots")]
    PivotLimit { pivots: usize },
    #[error("simplex returned a point violating row {row} by {violation:e}")]
    Numerical { row: usize, violation: f64 },
}

impl LpModel {
    /// A model with `n` variables, zero objective and bounds `[0, ∞)`.
    pub fn new(sense: Sense, n: usize) -> Self {
        Self {
            sense,
            objective: vec![0.0; n],
            lower: vec![0.0; n],
            upper: vec![f64::INFINITY; n],
            constraints: Vec::new(),
        }
    }

    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }

    /// Appends a variable and returns its index. Existing rows are widened.
    pub fn add_var(&mut self, lower: f64, upper: f64, cost: f64) -> usize {
        self.objective.push(cost);
        self.lower.push(lower);
        self.upper.push(upper);
        for c in &mut self.constraints {
            c.coeffs.push(0.0);
        }
        self.objective.len() - 1
    }

    pub fn add_constraint(&mut self, coeffs: Vec<f64>, relation: Relation, rhs: f64) {
        self.constraints.push(Constraint {
            coeffs,
            relation,
            rhs,
        });
    }

    /// Adds a row given as `(variable, coefficient)` pairs; repeated indices accumulate.
    pub fn add_sparse(&mut self, terms: &[(usize, f64)], relation: Relation, rhs: f64) {
        let mut coeffs = vec![0.0; self.n_vars()];
        for &(j, a) in terms {
            coeffs[j] += a;
        }
        self.add_constraint(coeffs, relation, rhs);
    }

    fn check(&self) -> Result<(), LpError> {
        let n = self.n_vars();
        if self.lower.len() != n || self.upper.len() != n {
            return Err(LpError::Malformed("bound vectors differ in length from the objective".into()));
        }
        for j in 0..n {
            let (l, u) = (self.lower[j], self.upper[j]);
            if l.is_nan() || u.is_nan() || l > u || l == f64::INFINITY || u == f64::NEG_INFINITY {
                return Err(LpError::Malformed(format!("variable {j} has bounds [{l}, {u}]")));
            }
            if !self.objective[j].is_finite() {
                return Err(LpError::Malformed(format!("objective coefficient {j} is not finite")));
            }
        }
        for (r, c) in self.constraints.iter().enumerate() {
            if c.coeffs.len() != n {
                return Err(LpError::Malformed(format!(
                    "row {r} has {} coefficients, model has {n} variables",
                    c.coeffs.len()
                )));
            }
            if !c.rhs.is_finite() || c.coeffs.iter().any(|a| !a.is_finite()) {
                return Err(LpError::Malformed(format!("row {r} has a non-finite entry")));
            }
        }
        Ok(())
    }

    /// Largest violation of rows and bounds at `x`, scaled per row, with its row index.
    /// Bound violations are reported with row index `constraints.len() + j`.
    pub fn max_violation(&self, x: &[f64]) -> (usize, f64) {
        let mut worst = (0, 0.0);
        for (r, c) in self.constraints.iter().enumerate() {
            let mut lhs = 0.0;
            let mut scale = c.rhs.abs();
            for (a, v) in c.coeffs.iter().zip(x) {
                let t = a * v;
                lhs += t;
                scale = scale.max(t.abs());
            }
            let gap = match c.relation {
                Relation::Le => lhs - c.rhs,
                Relation::Ge => c.rhs - lhs,
                Relation::Eq => (lhs - c.rhs).abs(),
            };
            let v = gap / (1.0 + scale);
            if v > worst.1 {
                worst = (r, v);
            }
        }
        for j in 0..x.len() {
            let v = (self.lower[j] - x[j]).max(x[j] - self.upper[j]) / (1.0 + x[j].abs());
            if v > worst.1 {
                worst = (self.constraints.len() + j, v);
            }
        }
        worst
    }
}

/// Solves `model`, requiring the returned point to satisfy every row within
/// `feas_tol` relative to the row's magnitude.
pub fn solve_lp(model: &LpModel, feas_tol: f64) -> Result<LpSolution, LpError> {
    solve_lp_with_limit(model, feas_tol, DEFAULT_MAX_PIVOTS)
}

pub fn solve_lp_with_limit(
    model: &LpModel,
    feas_tol: f64,
    max_pivots: usize,
) -> Result<LpSolution, LpError> {
    model.check()?;
    let std = StandardForm::build(model);
    let mut t = std.tableau();
    let mut pivots = 0usize;

    // Phase 1: maximize minus the sum of artificials.
    let n_cols = t.cols;
    let mut allowed = vec![true; n_cols];
    if std.first_artificial < n_cols {
        let mut phase1 = vec![0.0; n_cols];
        for c in &mut phase1[std.first_artificial..] {
            *c = -1.0;
        }
        t.set_objective(&phase1);
        t.optimize(&allowed, max_pivots, &mut pivots)?;
        let infeas = -t.objective_value();
        let scale = 1.0 + std.rhs_scale;
        if infeas > feas_tol * scale {
            return Ok(LpSolution {
                status: LpStatus::Infeasible,
                x: Vec::new(),
                objective: f64::NAN,
                pivots,
            });
        }
        t.expel_artificials(std.first_artificial);
        for a in &mut allowed[std.first_artificial..] {
            *a = false;
        }
    }

    // Phase 2 on the internal maximization objective.
    let mut phase2 = vec![0.0; n_cols];
    phase2[..std.structural.len()].copy_from_slice(&std.structural);
    t.set_objective(&phase2);
    let bounded = t.optimize(&allowed, max_pivots, &mut pivots)?;
    if !bounded {
        let objective = match model.sense {
            Sense::Maximize => f64::INFINITY,
            Sense::Minimize => f64::NEG_INFINITY,
        };
        return Ok(LpSolution {
            status: LpStatus::Unbounded,
            x: Vec::new(),
            objective,
            pivots,
        });
    }

    let mut y = vec![0.0; n_cols];
    for (i, &b) in t.basis.iter().enumerate() {
        y[b] = t.rhs(i).max(0.0);
    }
    let mut x = std.recover(&y);
    let (mut row, mut violation) = model.max_violation(&x);
    if violation > 0.0 {
        // Round-off accumulated over many pivots; re-solve for the final basis
        // from the original rows and keep whichever point is closer.
        if let Some(y) = std.resolve_basis(&t) {
            let refined = std.recover(&y);
            let (r, v) = model.max_violation(&refined);
            if v < violation {
                (x, row, violation) = (refined, r, v);
            }
        }
    }
    if violation > feas_tol {
        return Err(LpError::Numerical { row, violation });
    }
    let objective = model.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
    Ok(LpSolution {
        status: LpStatus::Optimal,
        x,
        objective,
        pivots,
    })
}

/// How an original variable is expressed through nonnegative columns.
#[derive(Debug, Clone, Copy)]
enum VarMap {
    /// `x = offset + y_col`.
    Shift { col: usize, offset: f64 },
    /// `x = offset − y_col`.
    Mirror { col: usize, offset: f64 },
    /// `x = y_pos − y_neg`.
    Free { pos: usize, neg: usize },
}

struct StdRow {
    coeffs: Vec<f64>,
    relation: Relation,
    rhs: f64,
}

struct StandardForm {
    maps: Vec<VarMap>,
    /// Maximization objective over structural columns.
    structural: Vec<f64>,
    rows: Vec<StdRow>,
    first_artificial: usize,
    n_slack: usize,
    rhs_scale: f64,
}

impl StandardForm {
    fn build(model: &LpModel) -> Self {
        let sign = match model.sense {
            Sense::Maximize => 1.0,
            Sense::Minimize => -1.0,
        };
        let mut maps = Vec::with_capacity(model.n_vars());
        let mut structural = Vec::new();
        let mut bound_rows = Vec::new();
        for j in 0..model.n_vars() {
            let (l, u) = (model.lower[j], model.upper[j]);
            let c = sign * model.objective[j];
            if l.is_finite() {
                let col = structural.len();
                structural.push(c);
                maps.push(VarMap::Shift { col, offset: l });
                if u.is_finite() {
                    bound_rows.push((col, u - l));
                }
            } else if u.is_finite() {
                let col = structural.len();
                structural.push(-c);
                maps.push(VarMap::Mirror { col, offset: u });
            } else {
                let pos = structural.len();
                structural.push(c);
                structural.push(-c);
                maps.push(VarMap::Free { pos, neg: pos + 1 });
            }
        }
        let n_struct = structural.len();

        let mut rows = Vec::with_capacity(model.constraints.len() + bound_rows.len());
        let mut rhs_scale: f64 = 0.0;
        for c in &model.constraints {
            let mut coeffs = vec![0.0; n_struct];
            let mut rhs = c.rhs;
            for (j, &a) in c.coeffs.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                match maps[j] {
                    VarMap::Shift { col, offset } => {
                        coeffs[col] += a;
                        rhs -= a * offset;
                    }
                    VarMap::Mirror { col, offset } => {
                        coeffs[col] -= a;
                        rhs -= a * offset;
                    }
                    VarMap::Free { pos, neg } => {
                        coeffs[pos] += a;
                        coeffs[neg] -= a;
                    }
                }
            }
            rhs_scale = rhs_scale.max(rhs.abs());
            rows.push(normalize(coeffs, c.relation, rhs));
        }
        for (col, width) in bound_rows {
            let mut coeffs = vec![0.0; n_struct];
            coeffs[col] = 1.0;
            rhs_scale = rhs_scale.max(width.abs());
            rows.push(normalize(coeffs, Relation::Le, width));
        }

        let n_slack = rows.iter().filter(|r| r.relation != Relation::Eq).count();
        let first_artificial = n_struct + n_slack;
        Self {
            maps,
            structural,
            rows,
            first_artificial,
            n_slack,
            rhs_scale,
        }
    }

    fn tableau(&self) -> Tableau {
        let n_struct = self.structural.len();
        let n_art = self
            .rows
            .iter()
            .filter(|r| r.relation != Relation::Le)
            .count();
        let cols = n_struct + self.n_slack + n_art;
        let m = self.rows.len();
        let mut t = Tableau::new(m, cols);
        let mut slack = n_struct;
        let mut art = self.first_artificial;
        for (i, row) in self.rows.iter().enumerate() {
            t.row_mut(i)[..n_struct].copy_from_slice(&row.coeffs);
            *t.rhs_mut(i) = row.rhs;
            match row.relation {
                Relation::Le => {
                    t.row_mut(i)[slack] = 1.0;
                    t.basis[i] = slack;
                    slack += 1;
                }
                Relation::Ge => {
                    t.row_mut(i)[slack] = -1.0;
                    slack += 1;
                    t.row_mut(i)[art] = 1.0;
                    t.basis[i] = art;
                    art += 1;
                }
                Relation::Eq => {
                    t.row_mut(i)[art] = 1.0;
                    t.basis[i] = art;
                    art += 1;
                }
            }
        }
        t
    }

    /// Solves `B y_B = b` over the rows still present in `t`, with `B` taken
    /// from the original tableau.
    fn resolve_basis(&self, t: &Tableau) -> Option<Vec<f64>> {
        let original = self.tableau();
        let m = t.rows;
        let b = DMatrix::from_fn(m, m, |i, k| original.row(t.origin[i])[t.basis[k]]);
        let rhs = DVector::from_fn(m, |i, _| original.rhs(t.origin[i]));
        let sol = b.lu().solve(&rhs)?;
        let mut y = vec![0.0; t.cols];
        for (k, &col) in t.basis.iter().enumerate() {
            y[col] = sol[k].max(0.0);
        }
        Some(y)
    }

    fn recover(&self, y: &[f64]) -> Vec<f64> {
        self.maps
            .iter()
            .map(|m| match *m {
                VarMap::Shift { col, offset } => offset + y[col],
                VarMap::Mirror { col, offset } => offset - y[col],
                VarMap::Free { pos, neg } => y[pos] - y[neg],
            })
            .collect()
    }
}

/// Orients a row so that its right-hand side is nonnegative, preferring a
/// slack-only (`≤`) row whenever the sign allows it.
fn normalize(mut coeffs: Vec<f64>, relation: Relation, rhs: f64) -> StdRow {
    let flip = match relation {
        Relation::Le => rhs < 0.0,
        Relation::Ge => rhs <= 0.0,
        Relation::Eq => rhs < 0.0,
    };
    if !flip {
        return StdRow {
            coeffs,
            relation,
            rhs,
        };
    }
    for a in &mut coeffs {
        *a = -*a;
    }
    let relation = match relation {
        Relation::Le => Relation::Ge,
        Relation::Ge => Relation::Le,
        Relation::Eq => Relation::Eq,
    };
    StdRow {
        coeffs,
        relation,
        rhs: -rhs,
    }
}

/// Row-major tableau with the reduced-cost row stored last.
struct Tableau {
    rows: usize,
    cols: usize,
    width: usize,
    data: Vec<f64>,
    basis: Vec<usize>,
    /// Index of each remaining row in the original tableau.
    origin: Vec<usize>,
}

impl Tableau {
    fn new(rows: usize, cols: usize) -> Self {
        let width = cols + 1;
        Self {
            rows,
            cols,
            width,
            data: vec![0.0; (rows + 1) * width],
            basis: vec![usize::MAX; rows],
            origin: (0..rows).collect(),
        }
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.width..(i + 1) * self.width]
    }

    fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.width..(i + 1) * self.width]
    }

    fn rhs(&self, i: usize) -> f64 {
        self.data[i * self.width + self.cols]
    }

    fn rhs_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.data[i * self.width + self.cols]
    }

    fn objective_value(&self) -> f64 {
        -self.rhs(self.rows)
    }

    /// Loads `c` (to be maximized) and prices out the current basis.
    fn set_objective(&mut self, c: &[f64]) {
        let (rows, width, cols) = (self.rows, self.width, self.cols);
        let (body, z) = self.data.split_at_mut(rows * width);
        z[..cols].copy_from_slice(c);
        z[cols] = 0.0;
        for i in 0..rows {
            let cb = c[self.basis[i]];
            if cb != 0.0 {
                let r = &body[i * width..(i + 1) * width];
                for (zj, a) in z.iter_mut().zip(r) {
                    *zj -= cb * a;
                }
            }
        }
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let width = self.width;
        let p = self.data[r * width + c];
        {
            let row = self.row_mut(r);
            for v in row.iter_mut() {
                *v /= p;
            }
            row[c] = 1.0;
        }
        let pivot_row: Vec<f64> = self.row(r).to_vec();
        for i in 0..=self.rows {
            if i == r {
                continue;
            }
            let f = self.data[i * width + c];
            if f == 0.0 {
                continue;
            }
            let row = &mut self.data[i * width..(i + 1) * width];
            for (v, pv) in row.iter_mut().zip(&pivot_row) {
                *v -= f * pv;
            }
            row[c] = 0.0;
        }
        self.basis[r] = c;
    }

    /// Runs primal simplex with Bland pricing. Returns `false` if unbounded.
    fn optimize(
        &mut self,
        allowed: &[bool],
        max_pivots: usize,
        pivots: &mut usize,
    ) -> Result<bool, LpError> {
        loop {
            let z = self.row(self.rows);
            let Some(enter) = (0..self.cols).find(|&j| allowed[j] && z[j] > OPT_TOL) else {
                return Ok(true);
            };
            let Some(r) = self.leaving_row(enter) else {
                return Ok(false);
            };
            if *pivots >= max_pivots {
                return Err(LpError::PivotLimit { pivots: *pivots });
            }
            // Basic values within the slack of zero are treated as zero so the
            // step never runs backwards.
            let rhs = self.rhs_mut(r);
            *rhs = rhs.max(0.0);
            self.pivot(r, enter);
            *pivots += 1;
        }
    }

    /// Two-pass ratio test. The first pass bounds the step with every basic
    /// value relaxed by `RATIO_SLACK`. Among rows whose exact ratio fits under
    /// that bound, entries much smaller than the largest one are discarded as
    /// round-off, and the lowest basis index wins among the rest.
    fn leaving_row(&self, enter: usize) -> Option<usize> {
        let col = |i: usize| self.data[i * self.width + enter];
        let bound = (0..self.rows)
            .filter(|&i| col(i) > PIVOT_TOL)
            .map(|i| (self.rhs(i).max(0.0) + RATIO_SLACK) / col(i))
            .fold(f64::INFINITY, f64::min);
        if bound == f64::INFINITY {
            return None;
        }
        let fits = |i: usize| col(i) > PIVOT_TOL && self.rhs(i).max(0.0) / col(i) <= bound;
        let largest = (0..self.rows)
            .filter(|&i| fits(i))
            .map(col)
            .fold(0.0, f64::max);
        (0..self.rows)
            .filter(|&i| fits(i) && col(i) >= PIVOT_SHARE * largest)
            .min_by_key(|&i| self.basis[i])
    }

    /// Pivots basic artificial columns out after phase 1; rows where that is
    /// impossible are linearly dependent and are dropped.
    fn expel_artificials(&mut self, first_artificial: usize) {
        let mut i = 0;
        while i < self.rows {
            if self.basis[i] < first_artificial {
                i += 1;
                continue;
            }
            let row = self.row(i);
            let best = (0..first_artificial)
                .map(|j| (j, row[j].abs()))
                .filter(|&(_, a)| a > PIVOT_TOL)
                .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)));
            match best {
                Some((j, _)) => {
                    self.pivot(i, j);
                    i += 1;
                }
                None => self.remove_row(i),
            }
        }
    }

    fn remove_row(&mut self, i: usize) {
        let w = self.width;
        self.data.drain(i * w..(i + 1) * w);
        self.basis.remove(i);
        self.origin.remove(i);
        self.rows -= 1;
    }
}
