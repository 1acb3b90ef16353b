//! Dense two-phase simplex over general-form linear programs.
//!
//! The public shape is deliberately small: a [`LinearProgram`] with
//! finite lower bounds, optional upper bounds, and <= / = rows; a
//! [`solve_lp`] call; and a [`SimplexSolution`] that never hides a
//! non-optimal outcome behind a default.
//!
//! Pivoting is Dantzig's rule with smallest-index tie-breaking, switching
//! to Bland's rule (smallest index with reduced cost below -1e-9) while
//! the objective stalls, which guarantees termination on degenerate
//! programs. The final basic solution is re-solved against the original
//! constraint data with a dense LU factorization so reported primal
//! values do not carry accumulated tableau drift.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Relation of a constraint row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Rel {
    Le,
    Eq,
}

/// One decision variable: finite lower bound, optional upper bound.
#[derive(Debug, Clone)]
pub struct VarDef {
    pub name: String,
    pub lower: f64,
    pub upper: Option<f64>,
}

/// One constraint row with sparse coefficients.
#[derive(Debug, Clone)]
pub struct Row {
    pub coeffs: Vec<(usize, f64)>,
    pub rel: Rel,
    pub rhs: f64,
}

/// Minimize `objective . x` subject to the rows and variable bounds.
#[derive(Debug, Clone, Default)]
pub struct LinearProgram {
    pub vars: Vec<VarDef>,
    pub objective: Vec<f64>,
    pub rows: Vec<Row>,
}

impl LinearProgram {
    pub fn n_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.objective.len() != self.vars.len() {
            return Err(Error::BadProgram(format!(
                "objective has {} entries for {} variables",
                self.objective.len(),
                self.vars.len()
            )));
        }
        for v in &self.vars {
            if !v.lower.is_finite() {
                return Err(Error::BadProgram(format!("{}: non-finite lower bound", v.name)));
            }
            if let Some(u) = v.upper {
                if !u.is_finite() || u < v.lower {
                    return Err(Error::BadProgram(format!("{}: bad upper bound {u}", v.name)));
                }
            }
        }
        if self.objective.iter().any(|c| !c.is_finite()) {
            return Err(Error::BadProgram("non-finite objective coefficient".into()));
        }
        for (r, row) in self.rows.iter().enumerate() {
            if !row.rhs.is_finite() {
                return Err(Error::BadProgram(format!("row {r}: non-finite rhs")));
            }
            for &(j, a) in &row.coeffs {
                if j >= self.vars.len() {
                    return Err(Error::BadProgram(format!("row {r}: variable {j} out of range")));
                }
                if !a.is_finite() {
                    return Err(Error::BadProgram(format!("row {r}: non-finite coefficient")));
                }
            }
        }
        Ok(())
    }

    /// Plain-text dump: objective, rows, bounds. Diagnostic surface for
    /// `--dump-lp`.
    pub fn dump(&self) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        out.push_str("minimize\n ");
        for (j, c) in self.objective.iter().enumerate() {
            if *c != 0.0 {
                let _ = write!(out, " {:+} {}", c, self.vars[j].name);
            }
        }
        out.push_str("\nsubject to\n");
        for row in &self.rows {
            out.push(' ');
            for &(j, a) in &row.coeffs {
                let _ = write!(out, " {:+} {}", a, self.vars[j].name);
            }
            let rel = match row.rel {
                Rel::Le => "<=",
                Rel::Eq => "=",
            };
            let _ = writeln!(out, " {rel} {}", row.rhs);
        }
        out.push_str("bounds\n");
        for v in &self.vars {
            match v.upper {
                Some(u) => {
                    let _ = writeln!(out, "  {} <= {} <= {}", v.lower, v.name, u);
                }
                None => {
                    let _ = writeln!(out, "  {} <= {}", v.lower, v.name);
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Debug, Clone)]
pub struct SimplexSolution {
    pub status: SolveStatus,
    /// Values of the original variables (empty unless optimal).
    pub primal: Vec<f64>,
    /// objective . primal, recomputed from the primal vector.
    pub objective: f64,
    pub iterations: usize,
    /// Largest absolute constraint or bound violation of the primal.
    pub max_violation: f64,
}

const RC_TOL: f64 = 1e-9;
// Minimum magnitude for a pivot element; smaller entries act as zero in
// the ratio test so one bad pivot cannot blow up the whole tableau.
const PIVOT_TOL: f64 = 1e-7;
const FEAS_TOL: f64 = 1e-7;

// Column provenance in the standardized tableau, used to rebuild the
// basis matrix from original data during the final refinement.
#[derive(Clone, Copy)]
enum ColKind {
    Structural(usize),
    Slack { row: usize, sign: f64 },
    Artificial { row: usize },
}

struct Standardized {
    // Rows over structural variables after the lower-bound shift and sign
    // normalization; rhs is non-negative.
    rows: Vec<Vec<(usize, f64)>>,
    rhs: Vec<f64>,
    cols: Vec<ColKind>,
    n_struct: usize,
    n_total: usize,
    first_artificial: usize,
    basis: Vec<usize>,
}

fn standardize(lp: &LinearProgram) -> Standardized {
    let n_struct = lp.n_vars();
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut rhs: Vec<f64> = Vec::new();
    let mut rels: Vec<Rel> = Vec::new();

    for row in &lp.rows {
        let shift: f64 = row
            .coeffs
            .iter()
            .map(|&(j, a)| a * lp.vars[j].lower)
            .sum();
        rows.push(row.coeffs.clone());
        rhs.push(row.rhs - shift);
        rels.push(row.rel);
    }
    // Upper bounds become rows in the shifted space: v_j <= upper - lower.
    for (j, v) in lp.vars.iter().enumerate() {
        if let Some(u) = v.upper {
            rows.push(vec![(j, 1.0)]);
            rhs.push(u - v.lower);
            rels.push(Rel::Le);
        }
    }

    let m = rows.len();
    let mut cols: Vec<ColKind> = (0..n_struct).map(ColKind::Structural).collect();
    let mut basis = vec![usize::MAX; m];
    let mut flipped = vec![false; m];
    for r in 0..m {
        if rhs[r] < 0.0 {
            for c in rows[r].iter_mut() {
                c.1 = -c.1;
            }
            rhs[r] = -rhs[r];
            flipped[r] = true;
        }
    }
    // Slacks for inequality rows; a slack that enters with +1 on a
    // non-negative rhs can start in the basis.
    for r in 0..m {
        if rels[r] == Rel::Le {
            let sign = if flipped[r] { -1.0 } else { 1.0 };
            cols.push(ColKind::Slack { row: r, sign });
            if sign > 0.0 {
                basis[r] = cols.len() - 1;
            }
        }
    }
    let first_artificial = cols.len();
    for r in 0..m {
        if basis[r] == usize::MAX {
            cols.push(ColKind::Artificial { row: r });
            basis[r] = cols.len() - 1;
        }
    }
    let n_total = cols.len();
    Standardized {
        rows,
        rhs,
        cols,
        n_struct,
        n_total,
        first_artificial,
        basis,
    }
}

struct Tableau {
    data: Vec<f64>,
    stride: usize,
    m: usize,
    n_total: usize,
}

impl Tableau {
    fn new(std_form: &Standardized) -> Self {
        let m = std_form.rhs.len();
        let n_total = std_form.n_total;
        let stride = n_total + 1;
        let mut data = vec![0.0; (m + 1) * stride];
        for r in 0..m {
            for &(j, a) in &std_form.rows[r] {
                data[r * stride + j] += a;
            }
            data[r * stride + n_total] = std_form.rhs[r];
        }
        for (j, kind) in std_form.cols.iter().enumerate() {
            match *kind {
                ColKind::Structural(_) => {}
                ColKind::Slack { row, sign } => data[row * stride + j] = sign,
                ColKind::Artificial { row } => data[row * stride + j] = 1.0,
            }
        }
        Self {
            data,
            stride,
            m,
            n_total,
        }
    }

    #[inline]
    fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.stride + c]
    }

    fn obj_row(&self) -> &[f64] {
        &self.data[self.m * self.stride..]
    }

    /// Installs reduced costs for the cost vector `c` given the current
    /// basis: the objective row becomes c with basic columns eliminated.
    fn set_objective(&mut self, c: &[f64], basis: &[usize]) {
        let stride = self.stride;
        let (body, obj) = self.data.split_at_mut(self.m * stride);
        obj[..self.n_total].copy_from_slice(c);
        obj[self.n_total] = 0.0;
        for r in 0..self.m {
            let cb = c[basis[r]];
            if cb != 0.0 {
                let row = &body[r * stride..(r + 1) * stride];
                for (o, v) in obj.iter_mut().zip(row) {
                    *o -= cb * v;
                }
            }
        }
    }

    fn objective_value(&self) -> f64 {
        -self.at(self.m, self.n_total)
    }

    fn pivot(&mut self, pivot_row: usize, entering: usize) {
        let stride = self.stride;
        let start = pivot_row * stride;
        let inv = 1.0 / self.data[start + entering];
        for v in &mut self.data[start..start + stride] {
            *v *= inv;
        }
        self.data[start + entering] = 1.0;
        let pivot_copy = self.data[start..start + stride].to_vec();
        self.data
            .par_chunks_mut(stride)
            .enumerate()
            .for_each(|(i, row)| {
                if i == pivot_row {
                    return;
                }
                let factor = row[entering];
                if factor != 0.0 {
                    for (v, p) in row.iter_mut().zip(&pivot_copy) {
                        *v -= factor * p;
                    }
                    row[entering] = 0.0;
                }
            });
    }
}

enum LoopOutcome {
    Optimal,
    Unbounded,
    IterationLimit,
}

// A column whose reduced cost is at least this negative and which has no
// positive pivot entry proves unboundedness; marginally negative columns
// in that situation are treated as accumulated round-off and skipped.
const DECIDED_RC: f64 = 1e-5;

/// Runs pivots until the reduced costs are non-negative. `banned` columns
/// never enter. Returns when optimal for the installed objective row.
fn run_simplex(
    tab: &mut Tableau,
    basis: &mut [usize],
    banned: &[bool],
    iterations: &mut usize,
    max_iters: usize,
) -> LoopOutcome {
    let mut stall_count = 0usize;
    let mut bland = false;
    let mut last_obj = tab.objective_value();
    let mut skip = vec![false; tab.n_total];
    loop {
        if *iterations >= max_iters {
            return LoopOutcome::IterationLimit;
        }
        let obj = tab.obj_row();
        let entering = if bland {
            (0..tab.n_total).find(|&j| !banned[j] && !skip[j] && obj[j] < -RC_TOL)
        } else {
            let mut best: Option<(usize, f64)> = None;
            for j in 0..tab.n_total {
                if banned[j] || skip[j] || obj[j] >= -RC_TOL {
                    continue;
                }
                match best {
                    Some((_, rc)) if obj[j] >= rc => {}
                    _ => best = Some((j, obj[j])),
                }
            }
            best.map(|(j, _)| j)
        };
        let Some(entering) = entering else {
            return LoopOutcome::Optimal;
        };

        // Ratio test. Ties go to the largest pivot element for stability,
        // or to the smallest basic index while Bland's rule is active.
        let mut leaving: Option<(usize, f64)> = None;
        for r in 0..tab.m {
            let a = tab.at(r, entering);
            if a > PIVOT_TOL {
                let b = tab.at(r, tab.n_total).max(0.0);
                let ratio = b / a;
                let better = match leaving {
                    None => true,
                    Some((lr, lratio)) => {
                        if ratio < lratio - 1e-12 {
                            true
                        } else if ratio <= lratio + 1e-12 {
                            if bland {
                                basis[r] < basis[lr]
                            } else {
                                a > tab.at(lr, entering)
                            }
                        } else {
                            false
                        }
                    }
                };
                if better {
                    leaving = Some((r, ratio));
                }
            }
        }
        let Some((pivot_row, _)) = leaving else {
            if tab.obj_row()[entering] < -DECIDED_RC {
                return LoopOutcome::Unbounded;
            }
            skip[entering] = true;
            continue;
        };
        skip.fill(false);

        tab.pivot(pivot_row, entering);
        basis[pivot_row] = entering;
        *iterations += 1;

        let obj_now = tab.objective_value();
        if (last_obj - obj_now).abs() <= 1e-12 * (1.0 + last_obj.abs()) {
            stall_count += 1;
            if stall_count >= tab.m.max(16) {
                bland = true;
            }
        } else {
            stall_count = 0;
            bland = false;
        }
        last_obj = obj_now;
    }
}

// Dense LU solve of B y = b with partial pivoting; returns None when the
// basis matrix is numerically singular.
fn lu_solve(mut a: Vec<f64>, n: usize, mut b: Vec<f64>) -> Option<Vec<f64>> {
    for k in 0..n {
        let mut p = k;
        let mut max = a[k * n + k].abs();
        for r in (k + 1)..n {
            let v = a[r * n + k].abs();
            if v > max {
                max = v;
                p = r;
            }
        }
        if max < 1e-12 {
            return None;
        }
        if p != k {
            for c in 0..n {
                a.swap(k * n + c, p * n + c);
            }
            b.swap(k, p);
        }
        let inv = 1.0 / a[k * n + k];
        for r in (k + 1)..n {
            let f = a[r * n + k] * inv;
            if f != 0.0 {
                a[r * n + k] = 0.0;
                for c in (k + 1)..n {
                    a[r * n + c] -= f * a[k * n + c];
                }
                b[r] -= f * b[k];
            }
        }
    }
    for k in (0..n).rev() {
        let mut v = b[k];
        for c in (k + 1)..n {
            v -= a[k * n + c] * b[c];
        }
        b[k] = v / a[k * n + k];
    }
    Some(b)
}

/// Solves the program with the two-phase dense simplex.
///
/// The returned status is always explicit; `primal`, `objective`, and
/// `max_violation` are meaningful only on `Optimal`.
pub fn solve_lp(lp: &LinearProgram, max_iters: usize) -> Result<SimplexSolution> {
    lp.validate()?;
    let mut std_form = standardize(lp);
    let mut tab = Tableau::new(&std_form);
    let m = tab.m;
    let n_total = tab.n_total;
    let mut iterations = 0usize;

    let failed = |status: SolveStatus, iterations: usize| SimplexSolution {
        status,
        primal: Vec::new(),
        objective: f64::NAN,
        iterations,
        max_violation: f64::NAN,
    };

    // Phase 1: drive artificials to zero.
    if std_form.first_artificial < n_total {
        let mut c1 = vec![0.0; n_total];
        for j in std_form.first_artificial..n_total {
            c1[j] = 1.0;
        }
        tab.set_objective(&c1, &std_form.basis);
        let mut banned = vec![false; n_total];
        match run_simplex(&mut tab, &mut std_form.basis, &banned, &mut iterations, max_iters) {
            LoopOutcome::IterationLimit => {
                return Ok(failed(SolveStatus::IterationLimit, iterations))
            }
            LoopOutcome::Unbounded => {
                // Phase-1 objective is bounded below by zero; treat as a
                // numerical failure surfaced as infeasibility.
                if std::env::var("BUDGET_TREE_SIMPLEX_DEBUG").is_ok() {
                    eprintln!("phase1: spurious unbounded after {iterations} iters");
                }
                return Ok(failed(SolveStatus::Infeasible, iterations));
            }
            LoopOutcome::Optimal => {}
        }
        // The running objective cell carries accumulated drift on large
        // right-hand sides; measure infeasibility from the basic
        // artificials themselves.
        let residual: f64 = (0..m)
            .filter(|&r| std_form.basis[r] >= std_form.first_artificial)
            .map(|r| tab.at(r, n_total).max(0.0))
            .sum();
        let rhs_scale = std_form.rhs.iter().fold(1.0f64, |a, &b| a.max(b.abs()));
        if std::env::var("BUDGET_TREE_SIMPLEX_DEBUG").is_ok() {
            let basic_arts = (0..m)
                .filter(|&r| std_form.basis[r] >= std_form.first_artificial)
                .count();
            eprintln!(
                "phase1: residual {residual:.6e}, scale {rhs_scale:.3e}, basic artificials {basic_arts}, iters {iterations}, obj cell {:.6e}",
                tab.objective_value()
            );
        }
        if residual > FEAS_TOL * rhs_scale {
            return Ok(failed(SolveStatus::Infeasible, iterations));
        }
        // Pivot remaining artificials out of the basis where possible,
        // preferring the largest available pivot. Rows with no usable
        // pivot are redundant and stay inert.
        for r in 0..m {
            if std_form.basis[r] >= std_form.first_artificial {
                let pivot_col = (0..std_form.first_artificial)
                    .filter(|&j| tab.at(r, j).abs() > PIVOT_TOL)
                    .max_by(|&a, &b| {
                        tab.at(r, a)
                            .abs()
                            .partial_cmp(&tab.at(r, b).abs())
                            .unwrap()
                            .then(b.cmp(&a))
                    });
                if let Some(j) = pivot_col {
                    tab.pivot(r, j);
                    std_form.basis[r] = j;
                }
            }
        }
        for b in banned.iter_mut().skip(std_form.first_artificial) {
            *b = true;
        }
        let mut c2 = vec![0.0; n_total];
        c2[..std_form.n_struct].copy_from_slice(&lp.objective);
        tab.set_objective(&c2, &std_form.basis);
        match run_simplex(&mut tab, &mut std_form.basis, &banned, &mut iterations, max_iters) {
            LoopOutcome::IterationLimit => {
                return Ok(failed(SolveStatus::IterationLimit, iterations))
            }
            LoopOutcome::Unbounded => return Ok(failed(SolveStatus::Unbounded, iterations)),
            LoopOutcome::Optimal => {}
        }
    } else {
        let banned = vec![false; n_total];
        let mut c2 = vec![0.0; n_total];
        c2[..std_form.n_struct].copy_from_slice(&lp.objective);
        tab.set_objective(&c2, &std_form.basis);
        match run_simplex(&mut tab, &mut std_form.basis, &banned, &mut iterations, max_iters) {
            LoopOutcome::IterationLimit => {
                return Ok(failed(SolveStatus::IterationLimit, iterations))
            }
            LoopOutcome::Unbounded => return Ok(failed(SolveStatus::Unbounded, iterations)),
            LoopOutcome::Optimal => {}
        }
    }

    // Extract the basic solution, then re-solve the basis system against
    // the original standardized data to shed tableau drift.
    let mut v = vec![0.0; n_total];
    for r in 0..m {
        v[std_form.basis[r]] = tab.at(r, n_total);
    }
    if let Some(refined) = refine_basis(&std_form, m) {
        for (r, &col) in std_form.basis.iter().enumerate() {
            v[col] = refined[r];
        }
    }
    for val in v.iter_mut() {
        if *val < 0.0 && *val > -FEAS_TOL {
            *val = 0.0;
        }
    }

    let mut primal = vec![0.0; lp.n_vars()];
    for (j, p) in primal.iter_mut().enumerate() {
        *p = v[j] + lp.vars[j].lower;
    }
    let objective: f64 = lp
        .objective
        .iter()
        .zip(&primal)
        .map(|(c, x)| c * x)
        .sum();

    let mut max_violation = 0.0f64;
    for row in &lp.rows {
        let act: f64 = row.coeffs.iter().map(|&(j, a)| a * primal[j]).sum();
        let viol = match row.rel {
            Rel::Le => act - row.rhs,
            Rel::Eq => (act - row.rhs).abs(),
        };
        max_violation = max_violation.max(viol);
    }
    for (j, var) in lp.vars.iter().enumerate() {
        max_violation = max_violation.max(var.lower - primal[j]);
        if let Some(u) = var.upper {
            max_violation = max_violation.max(primal[j] - u);
        }
    }

    Ok(SimplexSolution {
        status: SolveStatus::Optimal,
        primal,
        objective,
        iterations,
        max_violation,
    })
}

fn refine_basis(std_form: &Standardized, m: usize) -> Option<Vec<f64>> {
    let mut b_mat = vec![0.0; m * m];
    for (pos, &col) in std_form.basis.iter().enumerate() {
        match std_form.cols[col] {
            ColKind::Structural(j) => {
                for (r, row) in std_form.rows.iter().enumerate() {
                    for &(jj, a) in row {
                        if jj == j {
                            b_mat[r * m + pos] += a;
                        }
                    }
                }
            }
            ColKind::Slack { row, sign } => b_mat[row * m + pos] = sign,
            ColKind::Artificial { row } => b_mat[row * m + pos] = 1.0,
        }
    }
    lu_solve(b_mat, m, std_form.rhs.clone())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn var(name: &str, lower: f64, upper: Option<f64>) -> VarDef {
        VarDef {
            name: name.into(),
            lower,
            upper,
        }
    }

    #[test]
    fn maximize_single_variable_under_cap() {
        // min -x s.t. x <= 3, x >= 0
        let lp = LinearProgram {
            vars: vec![var("x", 0.0, None)],
            objective: vec![-1.0],
            rows: vec![Row {
                coeffs: vec![(0, 1.0)],
                rel: Rel::Le,
                rhs: 3.0,
            }],
        };
        let sol = solve_lp(&lp, 1000).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.primal[0] - 3.0).abs() <= 1e-9);
        assert!((sol.objective + 3.0).abs() <= 1e-9);
    }

    #[test]
    fn covering_constraint() {
        // min x + y s.t. x + y >= 1 (written as -x - y <= -1), x, y >= 0
        let lp = LinearProgram {
            vars: vec![var("x", 0.0, None), var("y", 0.0, None)],
            objective: vec![1.0, 1.0],
            rows: vec![Row {
                coeffs: vec![(0, -1.0), (1, -1.0)],
                rel: Rel::Le,
                rhs: -1.0,
            }],
        };
        let sol = solve_lp(&lp, 1000).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.objective - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn detects_infeasible() {
        // x <= -1 with x >= 0
        let lp = LinearProgram {
            vars: vec![var("x", 0.0, None)],
            objective: vec![1.0],
            rows: vec![Row {
                coeffs: vec![(0, 1.0)],
                rel: Rel::Le,
                rhs: -1.0,
            }],
        };
        let sol = solve_lp(&lp, 1000).unwrap();
        assert_eq!(sol.status, SolveStatus::Infeasible);
    }

    #[test]
    fn detects_unbounded() {
        let lp = LinearProgram {
            vars: vec![var("x", 0.0, None)],
            objective: vec![-1.0],
            rows: vec![],
        };
        let sol = solve_lp(&lp, 1000).unwrap();
        assert_eq!(sol.status, SolveStatus::Unbounded);
    }

    #[test]
    fn reports_iteration_limit() {
        let lp = LinearProgram {
            vars: vec![var("x", 0.0, Some(3.0)), var("y", 0.0, Some(3.0))],
            objective: vec![-1.0, -1.0],
            rows: vec![Row {
                coeffs: vec![(0, 1.0), (1, 1.0)],
                rel: Rel::Le,
                rhs: 4.0,
            }],
        };
        let sol = solve_lp(&lp, 0).unwrap();
        assert_eq!(sol.status, SolveStatus::IterationLimit);
    }

    #[test]
    fn equality_rows_and_shifted_bounds() {
        // min x + 2y s.t. x + y = 2, x in [-1, 5], y >= 0
        // optimum: y = 0, x = 2 -> objective 2.
        let lp = LinearProgram {
            vars: vec![var("x", -1.0, Some(5.0)), var("y", 0.0, None)],
            objective: vec![1.0, 2.0],
            rows: vec![Row {
                coeffs: vec![(0, 1.0), (1, 1.0)],
                rel: Rel::Eq,
                rhs: 2.0,
            }],
        };
        let sol = solve_lp(&lp, 1000).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.objective - 2.0).abs() <= 1e-9, "objective {}", sol.objective);
        assert!(sol.max_violation <= 1e-7);
    }

    #[test]
    fn negative_lower_bound_can_be_optimal() {
        // min x with x in [-4, 9]: optimum sits on the shifted floor.
        let lp = LinearProgram {
            vars: vec![var("x", -4.0, Some(9.0))],
            objective: vec![1.0],
            rows: vec![],
        };
        let sol = solve_lp(&lp, 100).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.primal[0] + 4.0).abs() <= 1e-9);
    }

    #[test]
    fn deterministic_pivot_sequence() {
        let lp = LinearProgram {
            vars: vec![
                var("a", 0.0, Some(2.0)),
                var("b", 0.0, Some(2.0)),
                var("c", 0.0, Some(2.0)),
            ],
            objective: vec![-1.0, -2.0, 1.0],
            rows: vec![
                Row {
                    coeffs: vec![(0, 1.0), (1, 1.0), (2, 1.0)],
                    rel: Rel::Le,
                    rhs: 3.0,
                },
                Row {
                    coeffs: vec![(0, 1.0), (1, -1.0)],
                    rel: Rel::Le,
                    rhs: 1.0,
                },
            ],
        };
        let a = solve_lp(&lp, 1000).unwrap();
        let b = solve_lp(&lp, 1000).unwrap();
        assert_eq!(a.iterations, b.iterations);
        assert_eq!(a.primal, b.primal);
        assert!(a.objective.to_bits() == b.objective.to_bits());
    }

    #[test]
    fn degenerate_program_terminates() {
        // Many redundant constraints through the origin.
        let lp = LinearProgram {
            vars: vec![var("x", 0.0, None), var("y", 0.0, None)],
            objective: vec![-1.0, -1.0],
            rows: vec![
                Row { coeffs: vec![(0, 1.0), (1, -1.0)], rel: Rel::Le, rhs: 0.0 },
                Row { coeffs: vec![(0, -1.0), (1, 1.0)], rel: Rel::Le, rhs: 0.0 },
                Row { coeffs: vec![(0, 2.0), (1, -2.0)], rel: Rel::Le, rhs: 0.0 },
                Row { coeffs: vec![(0, 1.0), (1, 1.0)], rel: Rel::Le, rhs: 4.0 },
            ],
        };
        let sol = solve_lp(&lp, 10_000).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.objective + 4.0).abs() <= 1e-9);
    }

    #[test]
    fn rejects_malformed_programs() {
        let lp = LinearProgram {
            vars: vec![var("x", 0.0, None)],
            objective: vec![f64::NAN],
            rows: vec![],
        };
        assert!(matches!(solve_lp(&lp, 10), Err(Error::BadProgram(_))));
    }
}
