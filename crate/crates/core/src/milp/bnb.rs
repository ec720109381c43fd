use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::simplex::solve_with_bounds;
use super::{MilpError, MilpProblem, MilpSolution, MilpStatus, Sense, INT_TOL};
use crate::budget::Deadline;

pub const DEFAULT_NODE_LIMIT: usize = 200_000;

#[derive(Clone, Debug)]
pub struct BnbOptions {
    pub node_limit: usize,
    pub deadline: Deadline,
    /// Depth-first dive for an early incumbent before the best-first search.
    pub dive: bool,
    /// Relaxations solved by the dive at most.
    pub dive_node_limit: usize,
    /// Per-unit objective penalty on integer variables during the dive.
    pub dive_integer_cost: f64,
}

impl Default for BnbOptions {
    fn default() -> Self {
        Self {
            node_limit: DEFAULT_NODE_LIMIT,
            deadline: Deadline::unbounded(),
            dive: false,
            dive_node_limit: 500,
            dive_integer_cost: 0.1,
        }
    }
}

pub fn branch_and_bound(milp: &MilpProblem, node_limit: usize) -> Result<MilpSolution, MilpError> {
    branch_and_bound_with(
        milp,
        &BnbOptions {
            node_limit,
            ..BnbOptions::default()
        },
    )
}

struct Node {
    /// Parent relaxation bound in minimisation sense.
    bound: f64,
    seq: u64,
    changes: Vec<(usize, f64, f64)>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // BinaryHeap is a max-heap: the smallest bound, then the oldest node, wins.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

struct Search<'a> {
    milp: &'a MilpProblem,
    sign: f64,
    root_bounds: Vec<(f64, f64)>,
    incumbent: Option<(f64, Vec<f64>)>,
    iterations: usize,
}

impl Search<'_> {
    fn bounds_with(&self, changes: &[(usize, f64, f64)]) -> Vec<(f64, f64)> {
        let mut b = self.root_bounds.clone();
        for &(j, lo, hi) in changes {
            b[j] = (lo, hi);
        }
        b
    }

    fn solve(&mut self, bounds: &[(f64, f64)]) -> Result<MilpSolution, MilpError> {
        let s = solve_with_bounds(&self.milp.lp, bounds)?;
        self.iterations += s.simplex_iterations;
        Ok(s)
    }

    fn cutoff(&self) -> f64 {
        match &self.incumbent {
            Some((v, _)) => v - 1e-9 * (1.0 + v.abs()),
            None => f64::INFINITY,
        }
    }

    /// Most fractional integer variable, smallest index on ties.
    fn branch_var(&self, x: &[f64]) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for &j in &self.milp.integers {
            let f = x[j] - x[j].floor();
            let dist = f.min(1.0 - f);
            if dist > INT_TOL && best.is_none_or(|(bj, bd)| dist > bd || (dist == bd && j < bj)) {
                best = Some((j, dist));
            }
        }
        best.map(|(j, _)| j)
    }

    fn offer(&mut self, obj: f64, x: Vec<f64>) {
        if obj < self.cutoff() {
            self.incumbent = Some((obj, x));
        }
    }

    /// Depth-first search for an early incumbent. The relaxations add
    /// `integer_cost` per unit of every integer variable so that integers
    /// with no work to do settle at their lower bounds; branching takes the
    /// first fractional variable by index, ceiling first.
    fn dive(
        &mut self,
        budget: usize,
        integer_cost: f64,
        deadline: &Deadline,
    ) -> Result<usize, MilpError> {
        let mut lp = self.milp.lp.clone();
        for &j in &self.milp.integers {
            lp.objective[j] += self.sign * integer_cost;
        }
        let mut stack = vec![self.root_bounds.clone()];
        let mut used = 0;
        while let Some(bounds) = stack.pop() {
            if used >= budget || deadline.expired() {
                break;
            }
            used += 1;
            let s = solve_with_bounds(&lp, &bounds)?;
            self.iterations += s.simplex_iterations;
            if s.status != MilpStatus::Optimal {
                continue;
            }
            let x = s.values;
            let pick = self.milp.integers.iter().copied().find(|&j| {
                let f = x[j] - x[j].floor();
                f > INT_TOL && f < 1.0 - INT_TOL
            });
            let Some(j) = pick else {
                let obj = self.sign * self.milp.lp.objective_value(&x);
                self.offer(obj, x);
                break;
            };
            let (lo, hi) = bounds[j];
            let mut down = bounds.clone();
            down[j] = (lo, x[j].floor());
            let mut up = bounds;
            up[j] = (x[j].ceil(), hi);
            stack.push(down);
            stack.push(up);
        }
        Ok(used)
    }
}

pub fn branch_and_bound_with(
    milp: &MilpProblem,
    opts: &BnbOptions,
) -> Result<MilpSolution, MilpError> {
    milp.lp.validate()?;
    let mut root_bounds = milp.lp.bounds.clone();
    for &j in &milp.integers {
        if j >= root_bounds.len() {
            return Err(MilpError::Malformed(format!(
                "integer index {j} out of range"
            )));
        }
        let (lo, hi) = root_bounds[j];
        if !lo.is_finite() || !hi.is_finite() {
            return Err(MilpError::UnboundedInteger(j));
        }
        let (lo, hi) = ((lo - INT_TOL).ceil(), (hi + INT_TOL).floor());
        if lo > hi {
            return Ok(MilpSolution::infeasible());
        }
        root_bounds[j] = (lo, hi);
    }
    let sign = match milp.lp.sense {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };
    let mut search = Search {
        milp,
        sign,
        root_bounds,
        incumbent: None,
        iterations: 0,
    };

    let mut heap = BinaryHeap::new();
    heap.push(Node {
        bound: f64::NEG_INFINITY,
        seq: 0,
        changes: Vec::new(),
    });
    let mut seq = 1u64;
    let mut nodes = 0usize;
    let mut hit_limit = false;

    while let Some(node) = heap.pop() {
        if node.bound >= search.cutoff() {
            continue;
        }
        if nodes >= opts.node_limit {
            hit_limit = true;
            break;
        }
        if opts.deadline.expired() {
            return Err(MilpError::DeadlineExceeded { nodes });
        }
        nodes += 1;
        let bounds = search.bounds_with(&node.changes);
        let relax = search.solve(&bounds)?;
        match relax.status {
            MilpStatus::Infeasible => continue,
            MilpStatus::Unbounded => {
                return Ok(MilpSolution {
                    status: MilpStatus::Unbounded,
                    values: Vec::new(),
                    objective: -sign * f64::INFINITY,
                    duals: Vec::new(),
                    nodes,
                    simplex_iterations: search.iterations,
                });
            }
            _ => {}
        }
        let obj = sign * relax.objective;
        if obj >= search.cutoff() {
            continue;
        }
        let Some(j) = search.branch_var(&relax.values) else {
            search.offer(obj, relax.values);
            continue;
        };
        if nodes == 1 && opts.dive {
            nodes += search.dive(
                opts.dive_node_limit.min(opts.node_limit.saturating_sub(1)),
                opts.dive_integer_cost,
                &opts.deadline,
            )?;
            if obj >= search.cutoff() {
                continue;
            }
        }
        let v = relax.values[j];
        let (lo, hi) = bounds[j];
        let mut down = node.changes.clone();
        down.push((j, lo, v.floor()));
        let mut up = node.changes;
        up.push((j, v.ceil(), hi));
        for changes in [down, up] {
            heap.push(Node {
                bound: obj,
                seq,
                changes,
            });
            seq += 1;
        }
    }

    let status = if hit_limit {
        MilpStatus::NodeLimit
    } else if search.incumbent.is_some() {
        MilpStatus::Optimal
    } else {
        MilpStatus::Infeasible
    };
    let (objective, values) = match search.incumbent {
        Some((_, x)) => (milp.lp.objective_value(&x), x),
        None => (f64::NAN, Vec::new()),
    };
    Ok(MilpSolution {
        status,
        values,
        objective,
        duals: Vec::new(),
        nodes,
        simplex_iterations: search.iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::{simplex_solve, LinearProgram, Relation};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn floor_of_relaxation() {
        let mut lp = LinearProgram::new(Sense::Maximize);
        let x = lp.add_var("x", 0.0, 10.0, 1.0);
        lp.add_constraint(vec![(x, 1.0)], Relation::Le, 2.5);
        let s = branch_and_bound(&MilpProblem::new(lp, vec![x]), DEFAULT_NODE_LIMIT).unwrap();
        assert_eq!(s.status, MilpStatus::Optimal);
        assert!((s.objective - 2.0).abs() < 1e-9);
    }

    #[test]
    fn binary_knapsack() {
        let mut lp = LinearProgram::new(Sense::Maximize);
        let a = lp.add_var("a", 0.0, 1.0, 5.0);
        let b = lp.add_var("b", 0.0, 1.0, 4.0);
        lp.add_constraint(vec![(a, 3.0), (b, 2.0)], Relation::Le, 4.0);
        let s = branch_and_bound(&MilpProblem::new(lp, vec![a, b]), DEFAULT_NODE_LIMIT).unwrap();
        assert_eq!(s.status, MilpStatus::Optimal);
        assert!((s.values[a] - 1.0).abs() < 1e-6 && s.values[b].abs() < 1e-6);
        assert!((s.objective - 5.0).abs() < 1e-9);
    }

    #[test]
    fn fractional_equality_is_infeasible() {
        let mut lp = LinearProgram::new(Sense::Minimize);
        let a = lp.add_var("a", 0.0, 1.0, 0.0);
        lp.add_constraint(vec![(a, 1.0)], Relation::Eq, 0.5);
        let s = branch_and_bound(&MilpProblem::new(lp, vec![a]), DEFAULT_NODE_LIMIT).unwrap();
        assert_eq!(s.status, MilpStatus::Infeasible);
    }

    #[test]
    fn unbounded_integer_rejected() {
        let mut lp = LinearProgram::new(Sense::Minimize);
        let a = lp.add_var("a", 0.0, f64::INFINITY, 1.0);
        let r = branch_and_bound(&MilpProblem::new(lp, vec![a]), 10);
        assert_eq!(r, Err(MilpError::UnboundedInteger(0)));
    }

    #[test]
    fn node_limit_returns_incumbent() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let milp = random_milp(&mut rng, 8, 2);
        let full = branch_and_bound(&milp, DEFAULT_NODE_LIMIT).unwrap();
        let capped = branch_and_bound_with(
            &milp,
            &BnbOptions {
                node_limit: 1,
                dive: true,
                ..BnbOptions::default()
            },
        )
        .unwrap();
        if full.nodes > 1 {
            assert_eq!(capped.status, MilpStatus::NodeLimit);
            if capped.has_solution() {
                assert!(milp.lp.max_violation(&capped.values) < 1e-7);
            }
        }
    }

    fn random_milp(rng: &mut ChaCha8Rng, nb: usize, nc: usize) -> MilpProblem {
        let sense = if rng.random_bool(0.5) {
            Sense::Maximize
        } else {
            Sense::Minimize
        };
        let mut lp = LinearProgram::new(sense);
        let mut ints = Vec::new();
        for j in 0..nb {
            ints.push(lp.add_var(format!("b{j}"), 0.0, 1.0, rng.random_range(-5.0..5.0)));
        }
        for j in 0..nc {
            let lo = rng.random_range(-3.0..0.0);
            lp.add_var(
                format!("c{j}"),
                lo,
                lo + rng.random_range(0.5..5.0),
                rng.random_range(-2.0..2.0),
            );
        }
        let n = nb + nc;
        for _ in 0..rng.random_range(1..6) {
            let mut coeffs = Vec::new();
            for j in 0..n {
                if rng.random_bool(0.7) {
                    coeffs.push((j, rng.random_range(-3.0..3.0)));
                }
            }
            let rel = if rng.random_bool(0.8) {
                Relation::Le
            } else {
                Relation::Ge
            };
            let rhs = match rel {
                Relation::Le => rng.random_range(-1.0..4.0),
                _ => rng.random_range(-4.0..1.0),
            };
            lp.add_constraint(coeffs, rel, rhs);
        }
        MilpProblem::new(lp, ints)
    }

    /// Fix every binary assignment and solve the residual LP.
    fn enumerate(milp: &MilpProblem) -> Option<f64> {
        let nb = milp.integers.len();
        let mut best: Option<f64> = None;
        for mask in 0u32..(1 << nb) {
            let mut lp = milp.lp.clone();
            for (k, &j) in milp.integers.iter().enumerate() {
                let v = f64::from((mask >> k) & 1);
                lp.bounds[j] = (v, v);
            }
            let s = simplex_solve(&lp).unwrap();
            if s.status == MilpStatus::Optimal {
                best = Some(match (best, lp.sense) {
                    (None, _) => s.objective,
                    (Some(b), Sense::Maximize) => b.max(s.objective),
                    (Some(b), Sense::Minimize) => b.min(s.objective),
                });
            }
        }
        best
    }

    #[test]
    fn matches_enumeration_and_relaxation_dominates() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let mut feasible = 0;
        for _ in 0..200 {
            let nb = rng.random_range(1..=8);
            let nc = rng.random_range(0..=6);
            let milp = random_milp(&mut rng, nb, nc);
            let s = branch_and_bound(&milp, DEFAULT_NODE_LIMIT).unwrap();
            match enumerate(&milp) {
                None => assert_eq!(s.status, MilpStatus::Infeasible),
                Some(best) => {
                    feasible += 1;
                    assert_eq!(s.status, MilpStatus::Optimal);
                    assert!(
                        (s.objective - best).abs() <= 1e-6,
                        "{} vs {}",
                        s.objective,
                        best
                    );
                    assert!(milp.lp.max_violation(&s.values) <= 1e-7);
                    for &j in &milp.integers {
                        assert!((s.values[j] - s.values[j].round()).abs() <= 1e-6);
                    }
                    let relax = simplex_solve(&milp.lp).unwrap();
                    let gap = match milp.lp.sense {
                        Sense::Maximize => relax.objective - s.objective,
                        Sense::Minimize => s.objective - relax.objective,
                    };
                    assert!(gap >= -1e-9);
                }
            }
        }
        assert!(feasible > 100, "only {feasible} feasible instances");
    }

    #[test]
    fn dive_does_not_change_optimum() {
        let mut rng = ChaCha8Rng::seed_from_u64(78);
        for _ in 0..50 {
            let milp = random_milp(&mut rng, 8, 3);
            let a = branch_and_bound(&milp, DEFAULT_NODE_LIMIT).unwrap();
            let b = branch_and_bound_with(
                &milp,
                &BnbOptions {
                    dive: true,
                    ..BnbOptions::default()
                },
            )
            .unwrap();
            assert_eq!(a.status, b.status);
            if a.status == MilpStatus::Optimal {
                assert!((a.objective - b.objective).abs() < 1e-6);
            }
        }
    }
}
