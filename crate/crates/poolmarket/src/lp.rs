//! Dense linear-programming kernel: primal simplex on a full tableau with
//! Bland anti-cycling.
//!
//! Serves the oracle module, edge-toll recovery and the multipop restricted
//! master. All in-scope programs have at most a few thousand nonzeros, so a
//! dense tableau is deliberate; there is no presolve, no sparsity, no revised
//! simplex.
//!
//! Duals are reported in the caller's original row space: equality rows are
//! split into two inequalities internally and their duals recombined, so an
//! equality dual may carry either sign while inequality duals follow the
//! usual convention (`<=` rows nonnegative under `Maximize`, `>=` rows
//! nonnegative under `Minimize`).

use thiserror::Error;

/// Objective sense.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

/// Row relation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

/// One constraint row.
#[derive(Debug, Clone)]
pub struct Row {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

impl Row {
    pub fn new(coeffs: Vec<f64>, relation: Relation, rhs: f64) -> Self {
        Row { coeffs, relation, rhs }
    }
}

/// A linear program over variables `x >= 0` (optional upper bounds).
#[derive(Debug, Clone)]
pub struct LinearProgram {
    pub sense: Sense,
    pub objective: Vec<f64>,
    pub rows: Vec<Row>,
    /// Optional per-variable upper bounds; lower bounds are fixed at 0.
    pub upper_bounds: Vec<Option<f64>>,
}

impl LinearProgram {
    pub fn new(sense: Sense, objective: Vec<f64>) -> Self {
        let n = objective.len();
        LinearProgram { sense, objective, rows: Vec::new(), upper_bounds: vec![None; n] }
    }

    pub fn push_row(&mut self, coeffs: Vec<f64>, relation: Relation, rhs: f64) {
        self.rows.push(Row::new(coeffs, relation, rhs));
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }
}

/// Optimal solution with complementary dual values.
#[derive(Debug, Clone)]
pub struct Optimum {
    pub value: f64,
    pub primal: Vec<f64>,
    /// One dual per original row (upper-bound rows are internal and not reported).
    pub dual: Vec<f64>,
}

/// Solver outcome for a well-formed program.
#[derive(Debug, Clone)]
pub enum Outcome {
    Optimal(Optimum),
    Infeasible,
    Unbounded,
}

impl Outcome {
    pub fn optimal(&self) -> Option<&Optimum> {
        match self {
            Outcome::Optimal(o) => Some(o),
            _ => None,
        }
    }
}

#[derive(Debug, Error)]
pub enum LpError {
    #[error("malformed program: {0}")]
    Shape(String),
    #[error("numerical breakdown: pivot below 1e-12")]
    NumericalBreakdown,
    #[error("iteration cap exceeded after {0} cutting-plane rounds")]
    IterationCapExceeded(usize),
}

pub const FEAS_TOL: f64 = 1e-9;
pub const OPT_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-12;
/// Consecutive degenerate pivots before switching from Dantzig to Bland.
const DEGENERATE_STREAK: usize = 32;
const MAX_PIVOTS: usize = 200_000;

/// Internal row bookkeeping: which original row (if any) an internal row came
/// from and with which sign, so duals can be folded back.
#[derive(Clone, Copy)]
struct RowOrigin {
    orig: Option<usize>,
    sign: f64,
}

struct Tableau {
    /// rows x cols, cols = structurals + slacks (+ artificials appended later)
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    origin: Vec<RowOrigin>,
    n_struct: usize,
}

/// Solve a linear program. Feasibility and optimality tolerances are `1e-9`;
/// pivots smaller than `1e-12` raise [`LpError::NumericalBreakdown`].
pub fn solve(lp: &LinearProgram) -> Result<Outcome, LpError> {
    validate(lp)?;
    let n = lp.num_vars();
    let sigma = match lp.sense {
        Sense::Maximize => 1.0,
        Sense::Minimize => -1.0,
    };

    // Internal form: maximize (sigma*c)'x subject to all-<= rows.
    let mut rows: Vec<(Vec<f64>, f64, RowOrigin)> = Vec::new();
    for (i, r) in lp.rows.iter().enumerate() {
        match r.relation {
            Relation::Le => rows.push((r.coeffs.clone(), r.rhs, RowOrigin { orig: Some(i), sign: 1.0 })),
            Relation::Ge => rows.push((
                r.coeffs.iter().map(|c| -c).collect(),
                -r.rhs,
                RowOrigin { orig: Some(i), sign: -1.0 },
            )),
            Relation::Eq => {
                rows.push((r.coeffs.clone(), r.rhs, RowOrigin { orig: Some(i), sign: 1.0 }));
                rows.push((
                    r.coeffs.iter().map(|c| -c).collect(),
                    -r.rhs,
                    RowOrigin { orig: Some(i), sign: -1.0 },
                ));
            }
        }
    }
    for (j, ub) in lp.upper_bounds.iter().enumerate() {
        if let Some(u) = ub {
            let mut coeffs = vec![0.0; n];
            coeffs[j] = 1.0;
            rows.push((coeffs, *u, RowOrigin { orig: None, sign: 1.0 }));
        }
    }

    let m = rows.len();
    let mut tab = Tableau {
        a: Vec::with_capacity(m),
        b: Vec::with_capacity(m),
        origin: Vec::with_capacity(m),
        n_struct: n,
    };
    // Structural + slack columns; rows with negative rhs are flipped and get
    // an artificial column appended below.
    let mut flipped = vec![false; m];
    for (k, (coeffs, rhs, origin)) in rows.into_iter().enumerate() {
        let mut row = vec![0.0; n + m];
        row[..n].copy_from_slice(&coeffs);
        row[n + k] = 1.0;
        let mut b = rhs;
        if b < 0.0 {
            for v in row.iter_mut() {
                *v = -*v;
            }
            b = -b;
            flipped[k] = true;
        }
        tab.a.push(row);
        tab.b.push(b);
        tab.origin.push(origin);
    }
    let slack0 = n;
    let mut n_cols = n + m;
    let mut artificial_of_row: Vec<Option<usize>> = vec![None; m];
    let mut basis: Vec<usize> = (0..m).map(|k| slack0 + k).collect();
    for k in 0..m {
        if flipped[k] {
            for (r, row) in tab.a.iter_mut().enumerate() {
                row.push(if r == k { 1.0 } else { 0.0 });
            }
            artificial_of_row[k] = Some(n_cols);
            basis[k] = n_cols;
            n_cols += 1;
        }
    }
    let is_artificial = |j: usize| j >= n + m;

    // Phase 1: maximize -sum(artificials).
    if n_cols > n + m {
        let mut c1 = vec![0.0; n_cols];
        for j in (n + m)..n_cols {
            c1[j] = -1.0;
        }
        let v = run_simplex(&mut tab, &mut basis, &c1, n_cols, &is_artificial, false)?;
        let v = v.ok_or(LpError::NumericalBreakdown)?; // phase 1 is always bounded
        if v < -FEAS_TOL {
            return Ok(Outcome::Infeasible);
        }
        // Drive any artificial still basic (at zero level) out if possible.
        for r in 0..m {
            if is_artificial(basis[r]) {
                if let Some(j) = (0..n + m).find(|&j| tab.a[r][j].abs() > 1e-7) {
                    pivot(&mut tab, &mut basis, r, j);
                }
            }
        }
    }

    // Phase 2.
    let mut c2 = vec![0.0; n_cols];
    for j in 0..n {
        c2[j] = sigma * lp.objective[j];
    }
    match run_simplex(&mut tab, &mut basis, &c2, n_cols, &is_artificial, true)? {
        None => Ok(Outcome::Unbounded),
        Some(internal_value) => {
            let mut primal = vec![0.0; n];
            for (r, &j) in basis.iter().enumerate() {
                if j < n {
                    primal[j] = tab.b[r];
                }
            }
            // Internal duals read off the objective row under each slack
            // column; fold back into the caller's row space.
            let row0 = objective_row(&tab, &basis, &c2, n_cols);
            let mut dual = vec![0.0; lp.rows.len()];
            for k in 0..m {
                if let Some(orig) = tab.origin[k].orig {
                    let y_hat = row0[slack0 + k];
                    dual[orig] += sigma * tab.origin[k].sign * y_hat;
                }
            }
            Ok(Outcome::Optimal(Optimum { value: sigma * internal_value, primal, dual }))
        }
    }
}

fn validate(lp: &LinearProgram) -> Result<(), LpError> {
    let n = lp.num_vars();
    if lp.upper_bounds.len() != n {
        return Err(LpError::Shape(format!(
            "upper_bounds length {} != {} variables",
            lp.upper_bounds.len(),
            n
        )));
    }
    if !lp.objective.iter().all(|c| c.is_finite()) {
        return Err(LpError::Shape("non-finite objective coefficient".into()));
    }
    for (i, r) in lp.rows.iter().enumerate() {
        if r.coeffs.len() != n {
            return Err(LpError::Shape(format!("row {} has {} coefficients, expected {}", i, r.coeffs.len(), n)));
        }
        if !r.coeffs.iter().all(|c| c.is_finite()) || !r.rhs.is_finite() {
            return Err(LpError::Shape(format!("row {i} has a non-finite entry")));
        }
    }
    Ok(())
}

fn objective_row(tab: &Tableau, basis: &[usize], c: &[f64], n_cols: usize) -> Vec<f64> {
    // z_j - c_j for each column.
    let mut row0 = vec![0.0; n_cols];
    for j in 0..n_cols {
        let mut z = 0.0;
        for (r, &bj) in basis.iter().enumerate() {
            z += c[bj] * tab.a[r][j];
        }
        row0[j] = z - c[j];
    }
    row0
}

/// Primal simplex on the current (feasible) basis. Returns `Ok(None)` when
/// unbounded (only possible when `allow_unbounded`). Pivot selection is
/// Dantzig with a switch to Bland's rule after a degenerate streak, which
/// preserves the termination guarantee. The objective row is maintained
/// incrementally and refreshed periodically against drift.
fn run_simplex(
    tab: &mut Tableau,
    basis: &mut Vec<usize>,
    c: &[f64],
    n_cols: usize,
    is_artificial: &dyn Fn(usize) -> bool,
    allow_unbounded: bool,
) -> Result<Option<f64>, LpError> {
    let m = tab.a.len();
    let phase2 = allow_unbounded;
    let mut degenerate_streak = 0usize;
    let mut row0 = objective_row(tab, basis, c, n_cols);
    for it in 0..MAX_PIVOTS {
        if it % 256 == 255 {
            row0 = objective_row(tab, basis, c, n_cols);
        }
        let candidate = |j: usize| -> bool {
            if row0[j] >= -OPT_TOL {
                return false;
            }
            // Artificials never re-enter in phase 2.
            !(phase2 && is_artificial(j))
        };
        let entering = if degenerate_streak >= DEGENERATE_STREAK {
            (0..n_cols).find(|&j| candidate(j))
        } else {
            let mut best: Option<(usize, f64)> = None;
            for j in 0..n_cols {
                if candidate(j) && best.map_or(true, |(_, v)| row0[j] < v) {
                    best = Some((j, row0[j]));
                }
            }
            best.map(|(j, _)| j)
        };
        let Some(jin) = entering else {
            // Re-derive exactly before declaring optimality.
            let exact = objective_row(tab, basis, c, n_cols);
            let clean = (0..n_cols)
                .all(|j| exact[j] >= -OPT_TOL * 10.0 || (phase2 && is_artificial(j)));
            if !clean {
                row0 = exact;
                continue;
            }
            let mut value = 0.0;
            for (r, &bj) in basis.iter().enumerate() {
                value += c[bj] * tab.b[r];
            }
            return Ok(Some(value));
        };
        // Ratio test; Bland tie-break on the basic variable index.
        let mut leave: Option<(usize, f64)> = None;
        for r in 0..m {
            let arj = tab.a[r][jin];
            if arj > PIVOT_TOL {
                let ratio = tab.b[r] / arj;
                match leave {
                    None => leave = Some((r, ratio)),
                    Some((lr, lratio)) => {
                        if ratio < lratio - 1e-12
                            || ((ratio - lratio).abs() <= 1e-12 && basis[r] < basis[lr])
                        {
                            leave = Some((r, ratio));
                        }
                    }
                }
            }
        }
        let Some((rout, ratio)) = leave else {
            if allow_unbounded {
                return Ok(None);
            }
            return Err(LpError::NumericalBreakdown);
        };
        if tab.a[rout][jin].abs() < PIVOT_TOL {
            return Err(LpError::NumericalBreakdown);
        }
        if ratio.abs() <= 1e-12 {
            degenerate_streak += 1;
        } else {
            degenerate_streak = 0;
        }
        pivot(tab, basis, rout, jin);
        // Update the objective row by the same elimination step.
        let f = row0[jin];
        if f != 0.0 {
            for j in 0..n_cols {
                row0[j] -= f * tab.a[rout][j];
            }
        }
    }
    Err(LpError::IterationCapExceeded(MAX_PIVOTS))
}

fn pivot(tab: &mut Tableau, basis: &mut [usize], rout: usize, jin: usize) {
    let piv = tab.a[rout][jin];
    let n_cols = tab.a[rout].len();
    for j in 0..n_cols {
        tab.a[rout][j] /= piv;
    }
    tab.b[rout] /= piv;
    for r in 0..tab.a.len() {
        if r == rout {
            continue;
        }
        let f = tab.a[r][jin];
        if f == 0.0 {
            continue;
        }
        for j in 0..n_cols {
            tab.a[r][j] -= f * tab.a[rout][j];
        }
        tab.b[r] -= f * tab.b[rout];
        if tab.b[r].abs() < 1e-13 {
            tab.b[r] = 0.0;
        }
    }
    basis[rout] = jin;
}

/// Cutting-plane driver: solve, ask the generator for a violated row at the
/// current point, append it and re-solve; stops when the generator returns
/// `None`. The generator is trusted to attest feasibility, so a generator
/// that keeps producing rows (e.g. duplicates) is stopped by the iteration
/// cap and reported as a defect.
pub fn solve_with_rows<F>(lp: &LinearProgram, mut row_generator: F) -> Result<Outcome, LpError>
where
    F: FnMut(&[f64]) -> Option<Row>,
{
    use std::collections::HashSet;
    const ROUND_CAP: usize = 10_000;
    let fingerprint = |row: &Row| -> (u8, u64, Vec<u64>) {
        let rel = match row.relation {
            Relation::Le => 0u8,
            Relation::Eq => 1,
            Relation::Ge => 2,
        };
        (rel, row.rhs.to_bits(), row.coeffs.iter().map(|c| c.to_bits()).collect())
    };
    let mut seen: HashSet<(u8, u64, Vec<u64>)> = lp.rows.iter().map(&fingerprint).collect();
    let mut work = lp.clone();
    let mut outcome = solve(&work)?;
    for _ in 0..ROUND_CAP {
        let point = match &outcome {
            Outcome::Optimal(o) => o.primal.clone(),
            _ => return Ok(outcome),
        };
        match row_generator(&point) {
            None => return Ok(outcome),
            Some(row) => {
                // A row already present cannot tighten the optimum, so don't
                // waste a solve on it; the round still counts toward the cap.
                if seen.insert(fingerprint(&row)) {
                    work.rows.push(row);
                    outcome = solve(&work)?;
                }
            }
        }
    }
    Err(LpError::IterationCapExceeded(ROUND_CAP))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lp_max(objective: Vec<f64>) -> LinearProgram {
        LinearProgram::new(Sense::Maximize, objective)
    }

    #[test]
    fn single_bound() {
        // max x s.t. x <= 3
        let mut lp = lp_max(vec![1.0]);
        lp.push_row(vec![1.0], Relation::Le, 3.0);
        let opt = solve(&lp).unwrap();
        let o = opt.optimal().unwrap();
        assert!((o.value - 3.0).abs() < 1e-9);
        assert!((o.primal[0] - 3.0).abs() < 1e-9);
        assert!((o.dual[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn two_var_with_equality() {
        // max x + 2y s.t. x + y = 4, y <= 3
        let mut lp = lp_max(vec![1.0, 2.0]);
        lp.push_row(vec![1.0, 1.0], Relation::Eq, 4.0);
        lp.push_row(vec![0.0, 1.0], Relation::Le, 3.0);
        let o = solve(&lp).unwrap();
        let o = o.optimal().unwrap();
        assert!((o.value - 7.0).abs() < 1e-9);
        assert!((o.primal[0] - 1.0).abs() < 1e-9);
        assert!((o.primal[1] - 3.0).abs() < 1e-9);
        // strong duality in the original row space
        let dual_val = o.dual[0] * 4.0 + o.dual[1] * 3.0;
        assert!((dual_val - 7.0).abs() < 1e-7);
    }

    #[test]
    fn infeasible_detected() {
        // x <= 1, x >= 2
        let mut lp = lp_max(vec![0.0]);
        lp.push_row(vec![1.0], Relation::Le, 1.0);
        lp.push_row(vec![1.0], Relation::Ge, 2.0);
        assert!(matches!(solve(&lp).unwrap(), Outcome::Infeasible));
    }

    #[test]
    fn unbounded_detected() {
        let mut lp = lp_max(vec![1.0, 0.0]);
        lp.push_row(vec![0.0, 1.0], Relation::Le, 1.0);
        assert!(matches!(solve(&lp).unwrap(), Outcome::Unbounded));
    }

    #[test]
    fn minimize_with_ge_rows() {
        // min 2x + 3y s.t. x + y >= 4, x <= 2  ->  x=2, y=2, value 10
        let mut lp = LinearProgram::new(Sense::Minimize, vec![2.0, 3.0]);
        lp.push_row(vec![1.0, 1.0], Relation::Ge, 4.0);
        lp.push_row(vec![1.0, 0.0], Relation::Le, 2.0);
        let o = solve(&lp).unwrap();
        let o = o.optimal().unwrap();
        assert!((o.value - 10.0).abs() < 1e-9);
        // >= row in a min problem carries a nonnegative dual
        assert!(o.dual[0] >= -1e-9);
        let dual_val = o.dual[0] * 4.0 + o.dual[1] * 2.0;
        assert!((dual_val - 10.0).abs() < 1e-7);
    }

    #[test]
    fn upper_bounds_respected() {
        let mut lp = lp_max(vec![1.0, 1.0]);
        lp.upper_bounds = vec![Some(1.5), Some(2.5)];
        lp.push_row(vec![1.0, 1.0], Relation::Le, 10.0);
        let o = solve(&lp).unwrap();
        let o = o.optimal().unwrap();
        assert!((o.value - 4.0).abs() < 1e-9);
    }

    #[test]
    fn degenerate_program_terminates() {
        // Classic cycling-prone instance (Beale); Bland fallback must terminate.
        let mut lp = lp_max(vec![0.75, -150.0, 0.02, -6.0]);
        lp.push_row(vec![0.25, -60.0, -0.04, 9.0], Relation::Le, 0.0);
        lp.push_row(vec![0.5, -90.0, -0.02, 3.0], Relation::Le, 0.0);
        lp.push_row(vec![0.0, 0.0, 1.0, 0.0], Relation::Le, 1.0);
        let o = solve(&lp).unwrap();
        let o = o.optimal().unwrap();
        assert!((o.value - 0.05).abs() < 1e-9);
    }

    #[test]
    fn generator_never_violating_returns_first_solve() {
        let mut lp = lp_max(vec![1.0]);
        lp.push_row(vec![1.0], Relation::Le, 5.0);
        let o = solve_with_rows(&lp, |_| None).unwrap();
        assert!((o.optimal().unwrap().value - 5.0).abs() < 1e-9);
    }

    #[test]
    fn cutting_plane_loop_adds_rows() {
        // max x + y s.t. x <= 4, y <= 4, with x + y <= 5 only known to the
        // separator.
        let mut lp = lp_max(vec![1.0, 1.0]);
        lp.push_row(vec![1.0, 0.0], Relation::Le, 4.0);
        lp.push_row(vec![0.0, 1.0], Relation::Le, 4.0);
        let o = solve_with_rows(&lp, |x| {
            if x[0] + x[1] > 5.0 + 1e-9 {
                Some(Row::new(vec![1.0, 1.0], Relation::Le, 5.0))
            } else {
                None
            }
        })
        .unwrap();
        assert!((o.optimal().unwrap().value - 5.0).abs() < 1e-9);
    }

    #[test]
    fn duplicate_row_generator_hits_cap() {
        let mut lp = lp_max(vec![1.0]);
        lp.push_row(vec![1.0], Relation::Le, 5.0);
        let r = solve_with_rows(&lp, |_| Some(Row::new(vec![1.0], Relation::Le, 5.0)));
        assert!(matches!(r, Err(LpError::IterationCapExceeded(_))));
    }

    /// Exhaustive vertex enumeration for cross-checking: intersect every
    /// n-subset of constraint hyperplanes (including x_j = 0 bounds), keep
    /// feasible points, return the best objective value.
    fn vertex_enumeration_optimum(lp: &LinearProgram) -> Option<f64> {
        let n = lp.num_vars();
        // Build constraint list a.x <= b (plus equalities both ways, plus
        // x_j >= 0 as -x_j <= 0).
        let mut cons: Vec<(Vec<f64>, f64)> = Vec::new();
        for r in &lp.rows {
            match r.relation {
                Relation::Le => cons.push((r.coeffs.clone(), r.rhs)),
                Relation::Ge => cons.push((r.coeffs.iter().map(|c| -c).collect(), -r.rhs)),
                Relation::Eq => {
                    cons.push((r.coeffs.clone(), r.rhs));
                    cons.push((r.coeffs.iter().map(|c| -c).collect(), -r.rhs));
                }
            }
        }
        for j in 0..n {
            let mut c = vec![0.0; n];
            c[j] = -1.0;
            cons.push((c, 0.0));
            if let Some(u) = lp.upper_bounds[j] {
                let mut c = vec![0.0; n];
                c[j] = 1.0;
                cons.push((c, u));
            }
        }
        let idx: Vec<usize> = (0..cons.len()).collect();
        let mut best: Option<f64> = None;
        let mut combo = vec![0usize; n];
        fn subsets(
            idx: &[usize],
            k: usize,
            start: usize,
            combo: &mut Vec<usize>,
            f: &mut dyn FnMut(&[usize]),
        ) {
            if combo.len() == k {
                f(combo);
                return;
            }
            for i in start..idx.len() {
                combo.push(idx[i]);
                subsets(idx, k, i + 1, combo, f);
                combo.pop();
            }
        }
        combo.clear();
        let mut visit = |chosen: &[usize]| {
            // Solve the n x n system by Gaussian elimination.
            let mut a: Vec<Vec<f64>> = chosen.iter().map(|&i| cons[i].0.clone()).collect();
            let mut b: Vec<f64> = chosen.iter().map(|&i| cons[i].1).collect();
            for col in 0..n {
                let p = (col..n).max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap());
                let p = match p {
                    Some(p) if a[p][col].abs() > 1e-9 => p,
                    _ => return,
                };
                a.swap(col, p);
                b.swap(col, p);
                let d = a[col][col];
                for j in 0..n {
                    a[col][j] /= d;
                }
                b[col] /= d;
                for i in 0..n {
                    if i != col {
                        let f = a[i][col];
                        for j in 0..n {
                            a[i][j] -= f * a[col][j];
                        }
                        b[i] -= f * b[col];
                    }
                }
            }
            let x = b;
            for (c, rhs) in &cons {
                let lhs: f64 = c.iter().zip(&x).map(|(a, b)| a * b).sum();
                if lhs > rhs + 1e-7 {
                    return;
                }
            }
            let v: f64 = lp.objective.iter().zip(&x).map(|(a, b)| a * b).sum();
            let v = match lp.sense {
                Sense::Maximize => v,
                Sense::Minimize => -v,
            };
            best = Some(best.map_or(v, |b: f64| b.max(v)));
        };
        subsets(&idx, n, 0, &mut combo, &mut visit);
        best.map(|v| match lp.sense {
            Sense::Maximize => v,
            Sense::Minimize => -v,
        })
    }

    #[test]
    fn random_programs_match_vertex_enumeration() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(20240917);
        let mut solved = 0;
        for _ in 0..120 {
            let n = rng.gen_range(1..=4usize);
            let m = rng.gen_range(1..=5usize);
            let mut lp = LinearProgram::new(
                if rng.gen_bool(0.5) { Sense::Maximize } else { Sense::Minimize },
                (0..n).map(|_| rng.gen_range(-5..=5) as f64).collect(),
            );
            for _ in 0..m {
                let coeffs: Vec<f64> = (0..n).map(|_| rng.gen_range(-3..=3) as f64).collect();
                let rel = match rng.gen_range(0..3) {
                    0 => Relation::Le,
                    1 => Relation::Ge,
                    _ => Relation::Eq,
                };
                lp.push_row(coeffs, rel, rng.gen_range(-4..=8) as f64);
            }
            // Keep the polytope bounded so vertex enumeration is exhaustive.
            for j in 0..n {
                let mut c = vec![0.0; n];
                c[j] = 1.0;
                lp.push_row(c, Relation::Le, 10.0);
            }
            let got = solve(&lp).unwrap();
            let want = vertex_enumeration_optimum(&lp);
            match (got, want) {
                (Outcome::Optimal(o), Some(w)) => {
                    assert!(
                        (o.value - w).abs() < 1e-6,
                        "simplex {} vs enumeration {}",
                        o.value,
                        w
                    );
                    solved += 1;
                }
                (Outcome::Infeasible, None) => {}
                (g, w) => panic!("solver {:?} vs enumeration {:?}", g, w),
            }
        }
        assert!(solved > 30, "too few feasible random programs: {solved}");
    }

    #[test]
    fn strong_duality_and_slackness_on_random_programs() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..60 {
            let n = rng.gen_range(1..=4usize);
            let m = rng.gen_range(1..=4usize);
            let mut lp = LinearProgram::new(Sense::Maximize, (0..n).map(|_| rng.gen_range(0..=5) as f64).collect());
            for _ in 0..m {
                let coeffs: Vec<f64> = (0..n).map(|_| rng.gen_range(0..=3) as f64).collect();
                lp.push_row(coeffs, Relation::Le, rng.gen_range(1..=6) as f64);
            }
            for j in 0..n {
                let mut c = vec![0.0; n];
                c[j] = 1.0;
                lp.push_row(c, Relation::Le, 9.0);
            }
            let o = solve(&lp).unwrap();
            let o = o.optimal().unwrap();
            let dual_value: f64 = o.dual.iter().zip(lp.rows.iter()).map(|(y, r)| y * r.rhs).sum();
            assert!((dual_value - o.value).abs() < 1e-7, "duality gap");
            for (y, r) in o.dual.iter().zip(lp.rows.iter()) {
                let lhs: f64 = r.coeffs.iter().zip(&o.primal).map(|(a, b)| a * b).sum();
                let slack = r.rhs - lhs;
                assert!(slack >= -1e-7);
                assert!((y * slack).abs() < 1e-7, "complementary slackness");
            }
        }
    }
}
