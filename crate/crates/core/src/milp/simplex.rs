//! Dense two-phase primal simplex with bounded variables.
//!
//! Every variable is rewritten as a column `0 ≤ y ≤ u` (shifting finite
//! lower bounds, mirroring variables bounded only above, splitting free
//! variables). Nonbasic columns sit at either bound, so variable bounds never
//! become rows. Dantzig pricing is used until the iteration count passes
//! `10·(vars + rows)`, then Bland's rule takes over to guarantee termination.

use super::{LinearProgram, MilpError, MilpSolution, MilpStatus, Relation, Sense, FEAS_TOL};

const PIVOT_TOL: f64 = 1e-9;
const COST_TOL: f64 = 1e-9;
const DROP_TOL: f64 = 1e-13;

pub fn simplex_solve(lp: &LinearProgram) -> Result<MilpSolution, MilpError> {
    lp.validate()?;
    solve_with_bounds(lp, &lp.bounds)
}

/// Solves `lp` with its variable bounds replaced by `bounds`.
pub(crate) fn solve_with_bounds(
    lp: &LinearProgram,
    bounds: &[(f64, f64)],
) -> Result<MilpSolution, MilpError> {
    let mut tab = match Tableau::build(lp, bounds) {
        Some(t) => t,
        None => return Ok(MilpSolution::infeasible()),
    };
    let status = tab.solve()?;
    let iterations = tab.iterations;
    match status {
        LpStatus::Infeasible => {
            let mut s = MilpSolution::infeasible();
            s.simplex_iterations = iterations;
            Ok(s)
        }
        LpStatus::Unbounded => Ok(MilpSolution {
            status: MilpStatus::Unbounded,
            values: Vec::new(),
            objective: match lp.sense {
                Sense::Minimize => f64::NEG_INFINITY,
                Sense::Maximize => f64::INFINITY,
            },
            duals: Vec::new(),
            nodes: 0,
            simplex_iterations: iterations,
        }),
        LpStatus::Optimal => {
            let values = tab.primal_values();
            let duals = tab.duals();
            let mut check = lp.clone();
            check.bounds = bounds.to_vec();
            let viol = check.max_violation(&values);
            let scale = 1.0
                + lp.constraints
                    .iter()
                    .map(|c| c.rhs.abs())
                    .fold(0.0, f64::max)
                    * 1e-3;
            if viol > FEAS_TOL * scale {
                return Err(MilpError::Numeric(format!(
                    "optimal basis violates constraints by {viol:.3e}"
                )));
            }
            Ok(MilpSolution {
                status: MilpStatus::Optimal,
                objective: lp.objective_value(&values),
                values,
                duals,
                nodes: 0,
                simplex_iterations: iterations,
            })
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// `x_j = offset + Σ sign·y_col`.
struct VarMap {
    offset: f64,
    parts: Vec<(usize, f64)>,
}

struct Tableau {
    rows: usize,
    cols: usize,
    /// Row-major `B⁻¹A`.
    t: Vec<f64>,
    /// Original standardized matrix, for the final recomputation of basics.
    a0: Vec<f64>,
    rhs0: Vec<f64>,
    beta: Vec<f64>,
    basis: Vec<usize>,
    is_basic: Vec<bool>,
    at_upper: Vec<bool>,
    upper: Vec<f64>,
    cost: Vec<f64>,
    d: Vec<f64>,
    first_artificial: usize,
    /// Column that formed the initial identity for each row.
    init_col: Vec<usize>,
    /// Index of the original constraint for each tableau row and the sign flip applied.
    row_origin: Vec<(usize, f64)>,
    n_constraints: usize,
    sense_sign: f64,
    vars: Vec<VarMap>,
    iterations: usize,
    bland_after: usize,
    max_iterations: usize,
}

impl Tableau {
    /// Returns `None` when an all-zero row is violated.
    fn build(lp: &LinearProgram, bounds: &[(f64, f64)]) -> Option<Self> {
        let sense_sign = match lp.sense {
            Sense::Minimize => 1.0,
            Sense::Maximize => -1.0,
        };
        let mut vars = Vec::with_capacity(lp.num_vars());
        let mut upper = Vec::new();
        let mut cost = Vec::new();
        for (j, &(lo, hi)) in bounds.iter().enumerate() {
            let c = sense_sign * lp.objective[j];
            let push = |u: f64, sign: f64, upper: &mut Vec<f64>, cost: &mut Vec<f64>| {
                upper.push(u);
                cost.push(c * sign);
                (upper.len() - 1, sign)
            };
            let map = if lo.is_finite() {
                VarMap {
                    offset: lo,
                    parts: vec![push(hi - lo, 1.0, &mut upper, &mut cost)],
                }
            } else if hi.is_finite() {
                VarMap {
                    offset: hi,
                    parts: vec![push(f64::INFINITY, -1.0, &mut upper, &mut cost)],
                }
            } else {
                let p = push(f64::INFINITY, 1.0, &mut upper, &mut cost);
                let m = push(f64::INFINITY, -1.0, &mut upper, &mut cost);
                VarMap {
                    offset: 0.0,
                    parts: vec![p, m],
                }
            };
            vars.push(map);
        }
        let structural = upper.len();

        // Standardized rows.
        let mut std_rows: Vec<(Vec<f64>, Relation, f64, usize, f64)> = Vec::new();
        for (i, c) in lp.constraints.iter().enumerate() {
            let mut row = vec![0.0; structural];
            let mut rhs = c.rhs;
            for &(j, a) in &c.coeffs {
                rhs -= a * vars[j].offset;
                for &(col, s) in &vars[j].parts {
                    row[col] += a * s;
                }
            }
            if row.iter().all(|v| v.abs() < DROP_TOL) {
                let ok = match c.relation {
                    Relation::Le => 0.0 <= rhs + FEAS_TOL,
                    Relation::Ge => 0.0 >= rhs - FEAS_TOL,
                    Relation::Eq => rhs.abs() <= FEAS_TOL,
                };
                if !ok {
                    return None;
                }
                continue;
            }
            let (mut rel, mut flip) = (c.relation, 1.0);
            if rhs < 0.0 {
                for v in row.iter_mut() {
                    *v = -*v;
                }
                rhs = -rhs;
                flip = -1.0;
                rel = match rel {
                    Relation::Le => Relation::Ge,
                    Relation::Ge => Relation::Le,
                    Relation::Eq => Relation::Eq,
                };
            }
            std_rows.push((row, rel, rhs, i, flip));
        }

        let m = std_rows.len();
        let n_slack = std_rows.iter().filter(|r| r.1 != Relation::Eq).count();
        let n_art = std_rows.iter().filter(|r| r.1 != Relation::Le).count();
        let cols = structural + n_slack + n_art;
        let first_artificial = structural + n_slack;
        upper.resize(cols, f64::INFINITY);
        cost.resize(cols, 0.0);

        let mut t = vec![0.0; m * cols];
        let mut basis = vec![0; m];
        let mut init_col = vec![0; m];
        let mut beta = vec![0.0; m];
        let mut row_origin = Vec::with_capacity(m);
        let (mut next_slack, mut next_art) = (structural, first_artificial);
        for (r, (row, rel, rhs, origin, flip)) in std_rows.into_iter().enumerate() {
            t[r * cols..r * cols + structural].copy_from_slice(&row);
            beta[r] = rhs;
            row_origin.push((origin, flip));
            match rel {
                Relation::Le => {
                    t[r * cols + next_slack] = 1.0;
                    basis[r] = next_slack;
                    init_col[r] = next_slack;
                    next_slack += 1;
                }
                Relation::Ge => {
                    t[r * cols + next_slack] = -1.0;
                    next_slack += 1;
                    t[r * cols + next_art] = 1.0;
                    basis[r] = next_art;
                    init_col[r] = next_art;
                    next_art += 1;
                }
                Relation::Eq => {
                    t[r * cols + next_art] = 1.0;
                    basis[r] = next_art;
                    init_col[r] = next_art;
                    next_art += 1;
                }
            }
        }
        let mut is_basic = vec![false; cols];
        for &b in &basis {
            is_basic[b] = true;
        }
        let size = structural + m;
        Some(Self {
            rows: m,
            cols,
            a0: t.clone(),
            rhs0: beta.clone(),
            t,
            beta,
            basis,
            is_basic,
            at_upper: vec![false; cols],
            upper,
            cost,
            d: vec![0.0; cols],
            first_artificial,
            init_col,
            row_origin,
            n_constraints: lp.constraints.len(),
            sense_sign,
            vars,
            iterations: 0,
            bland_after: 10 * size,
            max_iterations: 200 * size + 10_000,
        })
    }

    fn solve(&mut self) -> Result<LpStatus, MilpError> {
        if self.first_artificial < self.cols {
            // Phase 1: minimize the sum of artificials.
            let phase1: Vec<f64> = (0..self.cols)
                .map(|j| if j >= self.first_artificial { 1.0 } else { 0.0 })
                .collect();
            self.price_from(&phase1);
            if self.optimize(&phase1, true)? == LpStatus::Unbounded {
                return Err(MilpError::Numeric("phase 1 reported unbounded".into()));
            }
            let infeas: f64 = (0..self.rows)
                .filter(|&r| self.basis[r] >= self.first_artificial)
                .map(|r| self.beta[r])
                .sum();
            let scale = 1.0 + self.rhs0.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if infeas > 1e-9 * scale {
                return Ok(LpStatus::Infeasible);
            }
            self.drive_out_artificials();
            for j in self.first_artificial..self.cols {
                self.upper[j] = 0.0;
                self.at_upper[j] = false;
            }
        }
        let cost = self.cost.clone();
        self.price_from(&cost);
        let status = self.optimize(&cost, false)?;
        if status == LpStatus::Optimal {
            self.recompute_basics();
        }
        Ok(status)
    }

    fn row(&self, r: usize) -> &[f64] {
        &self.t[r * self.cols..(r + 1) * self.cols]
    }

    /// Reduced costs `d = c − c_Bᵀ B⁻¹A`.
    fn price_from(&mut self, cost: &[f64]) {
        self.d.copy_from_slice(cost);
        for r in 0..self.rows {
            let cb = cost[self.basis[r]];
            if cb == 0.0 {
                continue;
            }
            let start = r * self.cols;
            for j in 0..self.cols {
                self.d[j] -= cb * self.t[start + j];
            }
        }
        for &b in &self.basis {
            self.d[b] = 0.0;
        }
    }

    fn entering(&self, bland: bool, phase1: bool) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        let last = if phase1 {
            self.cols
        } else {
            self.first_artificial
        };
        for j in 0..last {
            if self.is_basic[j] || self.upper[j] <= 0.0 {
                continue;
            }
            let dj = self.d[j];
            let (eligible, dir, score) = if self.at_upper[j] {
                (dj > COST_TOL, -1.0, dj)
            } else {
                (dj < -COST_TOL, 1.0, -dj)
            };
            if !eligible {
                continue;
            }
            if bland {
                return Some((j, dir));
            }
            if best.is_none_or(|(b, _)| score > self.d[b].abs()) {
                best = Some((j, dir));
            }
        }
        best
    }

    fn optimize(&mut self, cost: &[f64], phase1: bool) -> Result<LpStatus, MilpError> {
        let _ = cost;
        let mut col = vec![0.0; self.rows];
        loop {
            if self.iterations > self.max_iterations {
                return Err(MilpError::Numeric(format!(
                    "iteration cap {} reached",
                    self.max_iterations
                )));
            }
            let bland = self.iterations >= self.bland_after;
            let Some((q, dir)) = self.entering(bland, phase1) else {
                return Ok(LpStatus::Optimal);
            };
            self.iterations += 1;
            for (r, c) in col.iter_mut().enumerate() {
                *c = self.t[r * self.cols + q];
            }

            // Ratio test.
            let mut limit = self.upper[q];
            let mut leave: Option<(usize, bool)> = None;
            let mut best_alpha = 0.0f64;
            for r in 0..self.rows {
                let alpha = dir * col[r];
                let b = self.basis[r];
                let ratio = if alpha > PIVOT_TOL {
                    self.beta[r].max(0.0) / alpha
                } else if alpha < -PIVOT_TOL && self.upper[b].is_finite() {
                    (self.upper[b] - self.beta[r]).max(0.0) / -alpha
                } else {
                    continue;
                };
                let better = match leave {
                    None => ratio < limit,
                    Some((lr, _)) if (ratio - limit).abs() <= 1e-12 => {
                        if bland {
                            b < self.basis[lr]
                        } else {
                            alpha.abs() > best_alpha
                        }
                    }
                    Some(_) => ratio < limit,
                };
                if better {
                    limit = ratio;
                    leave = Some((r, alpha < 0.0));
                    best_alpha = alpha.abs();
                }
            }

            if !limit.is_finite() {
                return Ok(LpStatus::Unbounded);
            }

            match leave {
                None => {
                    // Bound flip of the entering column.
                    let step = self.upper[q];
                    for r in 0..self.rows {
                        self.beta[r] -= dir * step * col[r];
                    }
                    self.at_upper[q] = !self.at_upper[q];
                }
                Some((r, to_upper)) => {
                    let start = if self.at_upper[q] { self.upper[q] } else { 0.0 };
                    for i in 0..self.rows {
                        self.beta[i] -= dir * limit * col[i];
                    }
                    let leaving = self.basis[r];
                    self.beta[r] = start + dir * limit;
                    self.at_upper[leaving] = to_upper;
                    self.is_basic[leaving] = false;
                    self.pivot(r, q);
                }
            }
        }
    }

    fn pivot(&mut self, r: usize, q: usize) {
        let cols = self.cols;
        let p = self.t[r * cols + q];
        let inv = 1.0 / p;
        let mut nz: Vec<(usize, f64)> = Vec::new();
        for j in 0..cols {
            let v = self.t[r * cols + j] * inv;
            if v.abs() > DROP_TOL {
                nz.push((j, v));
                self.t[r * cols + j] = v;
            } else {
                self.t[r * cols + j] = 0.0;
            }
        }
        self.t[r * cols + q] = 1.0;
        for i in 0..self.rows {
            if i == r {
                continue;
            }
            let f = self.t[i * cols + q];
            if f == 0.0 {
                continue;
            }
            let row = &mut self.t[i * cols..(i + 1) * cols];
            for &(j, v) in &nz {
                let nv = row[j] - f * v;
                row[j] = if nv.abs() < DROP_TOL { 0.0 } else { nv };
            }
            row[q] = 0.0;
        }
        let dq = self.d[q];
        if dq != 0.0 {
            for &(j, v) in &nz {
                self.d[j] -= dq * v;
            }
            self.d[q] = 0.0;
        }
        self.basis[r] = q;
        self.is_basic[q] = true;
        self.at_upper[q] = false;
    }

    fn drive_out_artificials(&mut self) {
        for r in 0..self.rows {
            if self.basis[r] < self.first_artificial {
                continue;
            }
            let mut best: Option<(usize, f64)> = None;
            for j in 0..self.first_artificial {
                if self.is_basic[j] {
                    continue;
                }
                let v = self.row(r)[j].abs();
                if v > 1e-7 && best.is_none_or(|(_, b)| v > b) {
                    best = Some((j, v));
                }
            }
            if let Some((q, _)) = best {
                let value = if self.at_upper[q] { self.upper[q] } else { 0.0 };
                let leaving = self.basis[r];
                self.is_basic[leaving] = false;
                self.at_upper[leaving] = false;
                self.pivot(r, q);
                self.beta[r] = value;
            }
        }
    }

    /// Recomputes basic values from the original data, `x_B = B⁻¹(b − N x_N)`.
    fn recompute_basics(&mut self) {
        let cols = self.cols;
        let mut rhs = self.rhs0.clone();
        for j in 0..cols {
            if !self.is_basic[j] && self.at_upper[j] && self.upper[j] > 0.0 {
                let u = self.upper[j];
                for (i, r) in rhs.iter_mut().enumerate() {
                    *r -= self.a0[i * cols + j] * u;
                }
            }
        }
        for r in 0..self.rows {
            let row = self.row(r);
            let mut v = 0.0;
            for (i, rv) in rhs.iter().enumerate() {
                let binv = row[self.init_col[i]];
                if binv != 0.0 {
                    v += binv * rv;
                }
            }
            self.beta[r] = v;
        }
    }

    fn column_values(&self) -> Vec<f64> {
        let mut y: Vec<f64> = (0..self.cols)
            .map(|j| if self.at_upper[j] { self.upper[j] } else { 0.0 })
            .collect();
        for (r, &b) in self.basis.iter().enumerate() {
            y[b] = self.beta[r];
        }
        y
    }

    fn primal_values(&self) -> Vec<f64> {
        let y = self.column_values();
        self.vars
            .iter()
            .map(|m| m.offset + m.parts.iter().map(|&(c, s)| s * y[c]).sum::<f64>())
            .collect()
    }

    fn duals(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n_constraints];
        for r in 0..self.rows {
            let (origin, flip) = self.row_origin[r];
            let col = self.init_col[r];
            let y_std = self.cost[col] - self.d[col];
            out[origin] = self.sense_sign * flip * y_std;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::{Constraint, LinearProgram, Relation, Sense};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn max_single_var() {
        let mut lp = LinearProgram::new(Sense::Maximize);
        let x = lp.add_var("x", 0.0, f64::INFINITY, 1.0);
        lp.add_constraint(vec![(x, 1.0)], Relation::Le, 5.0);
        let s = simplex_solve(&lp).unwrap();
        assert_eq!(s.status, MilpStatus::Optimal);
        assert!((s.values[0] - 5.0).abs() < 1e-12 && (s.objective - 5.0).abs() < 1e-12);
    }

    #[test]
    fn contradictory_bounds_are_infeasible() {
        let mut lp = LinearProgram::new(Sense::Minimize);
        let x = lp.add_var("x", f64::NEG_INFINITY, f64::INFINITY, 0.0);
        lp.add_constraint(vec![(x, 1.0)], Relation::Ge, 1.0);
        lp.add_constraint(vec![(x, 1.0)], Relation::Le, 0.0);
        assert_eq!(simplex_solve(&lp).unwrap().status, MilpStatus::Infeasible);
    }

    #[test]
    fn two_variable_vertex() {
        // Vertices (0,0),(4,0),(0,2),(3,1) give 0, 12, 4, 11.
        let mut lp = LinearProgram::new(Sense::Maximize);
        let x = lp.add_var("x", 0.0, f64::INFINITY, 3.0);
        let y = lp.add_var("y", 0.0, f64::INFINITY, 2.0);
        lp.add_constraint(vec![(x, 1.0), (y, 1.0)], Relation::Le, 4.0);
        lp.add_constraint(vec![(x, 1.0), (y, 3.0)], Relation::Le, 6.0);
        let s = simplex_solve(&lp).unwrap();
        assert_eq!(s.status, MilpStatus::Optimal);
        assert!((s.values[0] - 4.0).abs() < 1e-9 && s.values[1].abs() < 1e-9);
        assert!((s.objective - 12.0).abs() < 1e-9);
    }

    #[test]
    fn unbounded_detected() {
        let mut lp = LinearProgram::new(Sense::Maximize);
        let x = lp.add_var("x", 0.0, f64::INFINITY, 1.0);
        let y = lp.add_var("y", 0.0, f64::INFINITY, 0.0);
        lp.add_constraint(vec![(x, 1.0), (y, -1.0)], Relation::Le, 1.0);
        assert_eq!(simplex_solve(&lp).unwrap().status, MilpStatus::Unbounded);
    }

    #[test]
    fn free_and_upper_only_variables() {
        // min x + y with x free, y ≤ 3, x ≥ y − 10 and x + y ≥ −4
        let mut lp = LinearProgram::new(Sense::Minimize);
        let x = lp.add_var("x", f64::NEG_INFINITY, f64::INFINITY, 1.0);
        let y = lp.add_var("y", f64::NEG_INFINITY, 3.0, 1.0);
        lp.add_constraint(vec![(x, 1.0), (y, -1.0)], Relation::Ge, -10.0);
        lp.add_constraint(vec![(x, 1.0), (y, 1.0)], Relation::Ge, -4.0);
        let s = simplex_solve(&lp).unwrap();
        assert_eq!(s.status, MilpStatus::Optimal);
        assert!((s.objective + 4.0).abs() < 1e-9);
    }

    #[test]
    fn equality_and_degenerate_rows() {
        let mut lp = LinearProgram::new(Sense::Minimize);
        let x = lp.add_var("x", 0.0, 10.0, 1.0);
        let y = lp.add_var("y", 0.0, 10.0, 2.0);
        lp.add_constraint(vec![(x, 1.0), (y, 1.0)], Relation::Eq, 3.0);
        lp.add_constraint(vec![(x, 2.0), (y, 2.0)], Relation::Eq, 6.0);
        lp.add_constraint(vec![(x, 1.0)], Relation::Le, 2.0);
        let s = simplex_solve(&lp).unwrap();
        assert_eq!(s.status, MilpStatus::Optimal);
        assert!((s.values[0] - 2.0).abs() < 1e-9 && (s.values[1] - 1.0).abs() < 1e-9);
    }

    /// Dual objective from the reported row duals, computed independently of
    /// the tableau: `bᵀy + Σ_j bound_j · d_j` with `d = c − Aᵀy`.
    fn dual_objective(lp: &LinearProgram, y: &[f64]) -> f64 {
        let mut d = lp.objective.clone();
        for (c, yi) in lp.constraints.iter().zip(y) {
            for &(j, a) in &c.coeffs {
                d[j] -= a * yi;
            }
        }
        let mut obj: f64 = lp.constraints.iter().zip(y).map(|(c, yi)| c.rhs * yi).sum();
        for (j, dj) in d.iter().enumerate() {
            let (lo, hi) = lp.bounds[j];
            let at_lower = match lp.sense {
                Sense::Minimize => *dj > 0.0,
                Sense::Maximize => *dj < 0.0,
            };
            if dj.abs() < 1e-12 {
                continue;
            }
            obj += dj * if at_lower { lo } else { hi };
        }
        obj
    }

    fn random_lp(rng: &mut ChaCha8Rng) -> LinearProgram {
        let sense = if rng.random_bool(0.5) {
            Sense::Minimize
        } else {
            Sense::Maximize
        };
        let mut lp = LinearProgram::new(sense);
        let n = rng.random_range(2..7);
        for j in 0..n {
            let lo = rng.random_range(-5.0..0.0);
            let hi = lo + rng.random_range(0.5..8.0);
            lp.add_var(format!("v{j}"), lo, hi, rng.random_range(-3.0..3.0));
        }
        for _ in 0..rng.random_range(1..6) {
            let coeffs: Vec<(usize, f64)> =
                (0..n).map(|j| (j, rng.random_range(-2.0..2.0))).collect();
            let rel = match rng.random_range(0..3) {
                0 => Relation::Le,
                1 => Relation::Ge,
                _ => Relation::Eq,
            };
            // Keep the box centre feasible most of the time.
            let centre: Vec<f64> = lp.bounds.iter().map(|(l, h)| 0.5 * (l + h)).collect();
            let act: f64 = coeffs.iter().map(|(j, a)| a * centre[*j]).sum();
            let rhs = match rel {
                Relation::Le => act + rng.random_range(0.0..2.0),
                Relation::Ge => act - rng.random_range(0.0..2.0),
                Relation::Eq => act,
            };
            lp.constraints.push(Constraint {
                coeffs,
                relation: rel,
                rhs,
            });
        }
        lp
    }

    #[test]
    fn strong_duality_on_random_lps() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut solved = 0;
        for _ in 0..300 {
            let lp = random_lp(&mut rng);
            let s = simplex_solve(&lp).unwrap();
            if s.status != MilpStatus::Optimal {
                continue;
            }
            solved += 1;
            let dual = dual_objective(&lp, &s.duals);
            assert!(
                (dual - s.objective).abs() <= 1e-7 * (1.0 + s.objective.abs()),
                "primal {} dual {}",
                s.objective,
                dual
            );
        }
        assert!(solved > 200);
    }

    #[test]
    fn matches_vertex_enumeration_on_random_2d_lps() {
        // Brute force: every pair of tight constraints/bounds gives a candidate vertex.
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for _ in 0..200 {
            let mut lp = LinearProgram::new(Sense::Maximize);
            let c = [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
            lp.add_var("x", 0.0, 10.0, c[0]);
            lp.add_var("y", 0.0, 10.0, c[1]);
            let mut lines = vec![
                ([1.0, 0.0], 0.0),
                ([1.0, 0.0], 10.0),
                ([0.0, 1.0], 0.0),
                ([0.0, 1.0], 10.0),
            ];
            for _ in 0..4 {
                let a = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
                let b = rng.random_range(1.0..10.0);
                lp.add_constraint(vec![(0, a[0]), (1, a[1])], Relation::Le, b);
                lines.push((a, b));
            }
            let mut best = f64::NEG_INFINITY;
            for i in 0..lines.len() {
                for k in i + 1..lines.len() {
                    let (a1, b1) = lines[i];
                    let (a2, b2) = lines[k];
                    let det = a1[0] * a2[1] - a1[1] * a2[0];
                    if det.abs() < 1e-12 {
                        continue;
                    }
                    let p = [
                        (b1 * a2[1] - a1[1] * b2) / det,
                        (a1[0] * b2 - b1 * a2[0]) / det,
                    ];
                    if lp.max_violation(&p) <= 1e-9 {
                        best = best.max(c[0] * p[0] + c[1] * p[1]);
                    }
                }
            }
            let s = simplex_solve(&lp).unwrap();
            assert_eq!(s.status, MilpStatus::Optimal);
            assert!(
                (s.objective - best).abs() < 1e-7,
                "{} vs {}",
                s.objective,
                best
            );
        }
    }
}
