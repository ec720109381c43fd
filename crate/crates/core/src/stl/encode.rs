//! Big-M mixed-integer encoding of bounded-horizon STL over linear dynamics.
//!
//! Every subformula/time pair maps to a [`TermRef`]: a constant when interval
//! reachability already decides it, otherwise a `[0, 1]` variable `z` with
//! `z = 1 ⇒` "the subformula holds with margin ρ̄". Negations are pushed to
//! the leaves, so each term is tied to its children in one direction only:
//! conjunctions by `z ≤ zᵢ`, disjunctions by `z ≤ Σ zᵢ`. Only leaf terms
//! (predicates and rectangle memberships) are integer; composite terms are
//! integral at every integral leaf assignment.

use std::collections::HashMap;

use nalgebra::DMatrix;

use super::{StlError, StlFormula};
use crate::dynamics::{Control, DynamicsModel, State, Trajectory};
use crate::environment::Rect;
use crate::milp::{LinearProgram, MilpProblem, Relation, Sense};

/// Gap separating a violated predicate from its boundary.
pub const DEFAULT_STRICT_GAP: f64 = 1e-4;
pub const HORIZON_CAP: usize = 40;

#[derive(Clone, Debug, PartialEq)]
pub struct EncodeOptions {
    /// Bounds on the position components.
    pub workspace: Rect,
    /// Optional symmetric bound on velocity components of the double integrator.
    pub velocity_limit: Option<f64>,
    /// Fixed big-M constant; `None` derives a tight constant per row from
    /// the reachable box at that step.
    pub big_m: Option<f64>,
    pub strict_gap: f64,
    /// Required robustness margin ρ̄ of every decided predicate.
    pub margin: f64,
}

impl EncodeOptions {
    pub fn new(workspace: Rect) -> Self {
        Self {
            workspace,
            velocity_limit: None,
            big_m: None,
            strict_gap: DEFAULT_STRICT_GAP,
            margin: 0.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TermRef {
    True,
    False,
    Var(usize),
}

#[derive(Clone, Debug)]
pub struct MilpEncoding {
    pub problem: MilpProblem,
    /// `state_vars[t][i]` is the column of state component `i` at step `t`.
    pub state_vars: Vec<Vec<usize>>,
    /// Positive and negative parts of each control component, `u = p − q`.
    pub control_vars: Vec<Vec<(usize, usize)>>,
    pub margin_var: usize,
    pub root: TermRef,
    /// Integer (leaf) and continuous (composite) satisfaction variables.
    pub leaf_count: usize,
    pub composite_count: usize,
    pub big_m: f64,
    pub dt: f64,
}

impl MilpEncoding {
    pub fn decode_states(&self, values: &[f64]) -> Trajectory {
        let states = self
            .state_vars
            .iter()
            .map(|cols| State::from_iterator(cols.len(), cols.iter().map(|&c| values[c])))
            .collect();
        Trajectory::new(self.dt, states)
    }

    pub fn decode_controls(&self, values: &[f64]) -> Vec<Control> {
        self.control_vars
            .iter()
            .map(|cols| {
                Control::from_iterator(cols.len(), cols.iter().map(|&(p, q)| values[p] - values[q]))
            })
            .collect()
    }

    /// Pins every state variable to `traj`, e.g. to test membership of a
    /// known trajectory in the feasible set.
    pub fn fix_states(&mut self, traj: &Trajectory) {
        for (t, cols) in self.state_vars.iter().enumerate() {
            for (i, &c) in cols.iter().enumerate() {
                let v = traj.states[t][i];
                self.problem.lp.bounds[c] = (v, v);
            }
        }
    }
}

#[derive(Clone, PartialEq, Eq, Hash)]
enum Key {
    Pred {
        a: Vec<u64>,
        b: u64,
        t: usize,
        pos: bool,
    },
    Inside {
        rect: Vec<u64>,
        t: usize,
    },
    Node {
        ptr: usize,
        t: usize,
        pos: bool,
    },
}

fn bits(v: &[f64]) -> Vec<u64> {
    v.iter().map(|x| x.to_bits()).collect()
}

struct Encoder<'a> {
    lp: LinearProgram,
    integers: Vec<usize>,
    states: Vec<Vec<usize>>,
    lo: Vec<Vec<f64>>,
    hi: Vec<Vec<f64>>,
    margin_var: usize,
    opts: &'a EncodeOptions,
    memo: HashMap<Key, TermRef>,
    composite: usize,
    max_m: f64,
}

impl Encoder<'_> {
    /// Range of `aᵀx_t` over the reachable box.
    fn range(&self, a: &[f64], t: usize) -> (f64, f64) {
        let (mut lo, mut hi) = (0.0, 0.0);
        for (i, &ai) in a.iter().enumerate() {
            if ai == 0.0 || i >= self.lo[t].len() {
                continue;
            }
            let (l, h) = (ai * self.lo[t][i], ai * self.hi[t][i]);
            lo += l.min(h);
            hi += l.max(h);
        }
        (lo, hi)
    }

    fn gap(&self) -> f64 {
        (self.opts.strict_gap - self.opts.margin).max(0.0)
    }

    /// Row `z = 1 ⇒ aᵀx_t + ρ̄ ≤ b − δ`; `None` when already implied.
    /// Returns `Err(())` when the implication can never hold.
    fn implication_row(
        &mut self,
        a: &[f64],
        b: f64,
        delta: f64,
        t: usize,
    ) -> Result<Option<(Vec<(usize, f64)>, f64, f64)>, ()> {
        let (lo, hi) = self.range(a, t);
        let rho = self.opts.margin;
        if hi + rho <= b - delta {
            return Ok(None);
        }
        if lo + rho > b - delta {
            return Err(());
        }
        let m = match self.opts.big_m {
            Some(m) => m,
            None => hi + rho - (b - delta),
        };
        self.max_m = self.max_m.max(m);
        let mut coeffs: Vec<(usize, f64)> = a
            .iter()
            .enumerate()
            .filter(|(i, ai)| **ai != 0.0 && *i < self.states[t].len())
            .map(|(i, ai)| (self.states[t][i], *ai))
            .collect();
        coeffs.push((self.margin_var, 1.0));
        Ok(Some((coeffs, m, b - delta)))
    }

    fn new_leaf(&mut self, rows: Vec<(Vec<(usize, f64)>, f64, f64)>) -> TermRef {
        let z = self
            .lp
            .add_var(format!("b{}", self.integers.len()), 0.0, 1.0, 0.0);
        self.integers.push(z);
        for (mut coeffs, m, rhs) in rows {
            coeffs.push((z, m));
            self.lp.add_constraint(coeffs, Relation::Le, rhs + m);
        }
        TermRef::Var(z)
    }

    /// `aᵀx_t ≤ b` when `pos`, otherwise `aᵀx_t ≥ b + gap`.
    fn predicate(&mut self, a: &[f64], b: f64, t: usize, pos: bool) -> TermRef {
        let key = Key::Pred {
            a: bits(a),
            b: b.to_bits(),
            t,
            pos,
        };
        if let Some(r) = self.memo.get(&key) {
            return *r;
        }
        let res = if pos {
            self.implication_row(a, b, 0.0, t)
        } else {
            let neg: Vec<f64> = a.iter().map(|v| -v).collect();
            let gap = self.gap();
            self.implication_row(&neg, -b, gap, t)
        };
        let term = match res {
            Err(()) => TermRef::False,
            Ok(None) => TermRef::True,
            Ok(Some(row)) => self.new_leaf(vec![row]),
        };
        self.memo.insert(key, term);
        term
    }

    fn inside(&mut self, rect: &Rect, t: usize) -> TermRef {
        let key = Key::Inside {
            rect: bits(&[rect.min[0], rect.min[1], rect.max[0], rect.max[1]]),
            t,
        };
        if let Some(r) = self.memo.get(&key) {
            return *r;
        }
        let mut rows = Vec::new();
        let mut term = None;
        for (a, b) in StlFormula::rect_halfplanes(rect) {
            match self.implication_row(&a, b, 0.0, t) {
                Err(()) => {
                    term = Some(TermRef::False);
                    break;
                }
                Ok(None) => {}
                Ok(Some(row)) => rows.push(row),
            }
        }
        let term = match term {
            Some(t) => t,
            None if rows.is_empty() => TermRef::True,
            None => self.new_leaf(rows),
        };
        self.memo.insert(key, term);
        term
    }

    fn outside(&mut self, rect: &Rect, t: usize) -> TermRef {
        let terms = StlFormula::rect_halfplanes(rect)
            .into_iter()
            .map(|(a, b)| self.predicate(&a, b, t, false))
            .collect();
        self.disj(terms)
    }

    fn conj(&mut self, terms: Vec<TermRef>) -> TermRef {
        let mut vars = Vec::new();
        for t in terms {
            match t {
                TermRef::False => return TermRef::False,
                TermRef::True => {}
                TermRef::Var(v) => {
                    if !vars.contains(&v) {
                        vars.push(v)
                    }
                }
            }
        }
        match vars.len() {
            0 => TermRef::True,
            1 => TermRef::Var(vars[0]),
            _ => {
                let z = self.composite_var();
                for v in vars {
                    self.lp
                        .add_constraint(vec![(z, 1.0), (v, -1.0)], Relation::Le, 0.0);
                }
                TermRef::Var(z)
            }
        }
    }

    fn disj(&mut self, terms: Vec<TermRef>) -> TermRef {
        let mut vars = Vec::new();
        for t in terms {
            match t {
                TermRef::True => return TermRef::True,
                TermRef::False => {}
                TermRef::Var(v) => {
                    if !vars.contains(&v) {
                        vars.push(v)
                    }
                }
            }
        }
        match vars.len() {
            0 => TermRef::False,
            1 => TermRef::Var(vars[0]),
            _ => {
                let z = self.composite_var();
                let mut coeffs = vec![(z, 1.0)];
                coeffs.extend(vars.into_iter().map(|v| (v, -1.0)));
                self.lp.add_constraint(coeffs, Relation::Le, 0.0);
                TermRef::Var(z)
            }
        }
    }

    fn composite_var(&mut self) -> usize {
        self.composite += 1;
        self.lp
            .add_var(format!("z{}", self.composite), 0.0, 1.0, 0.0)
    }

    /// Conjunction when the node is read positively, disjunction otherwise.
    fn junction(&mut self, and_positive: bool, pos: bool, terms: Vec<TermRef>) -> TermRef {
        if and_positive == pos {
            self.conj(terms)
        } else {
            self.disj(terms)
        }
    }

    fn encode(&mut self, f: &StlFormula, t: usize, pos: bool) -> TermRef {
        let key = Key::Node {
            ptr: f as *const StlFormula as usize,
            t,
            pos,
        };
        if let Some(r) = self.memo.get(&key) {
            return *r;
        }
        let last = self.states.len() - 1;
        let term = match f {
            StlFormula::Predicate { a, b } => self.predicate(a, *b, t, pos),
            StlFormula::Region { rect, inside, .. } => {
                if *inside == pos {
                    self.inside(rect, t)
                } else {
                    self.outside(rect, t)
                }
            }
            StlFormula::Not(g) => self.encode(g, t, !pos),
            StlFormula::And(gs) => {
                let terms = gs.iter().map(|g| self.encode(g, t, pos)).collect();
                self.junction(true, pos, terms)
            }
            StlFormula::Or(gs) => {
                let terms = gs.iter().map(|g| self.encode(g, t, pos)).collect();
                self.junction(false, pos, terms)
            }
            StlFormula::Always { lo, hi, body } => {
                let terms = (t + lo..=(t + hi).min(last))
                    .map(|k| self.encode(body, k, pos))
                    .collect();
                self.junction(true, pos, terms)
            }
            StlFormula::Eventually { lo, hi, body } => {
                let terms = (t + lo..=(t + hi).min(last))
                    .map(|k| self.encode(body, k, pos))
                    .collect();
                self.junction(false, pos, terms)
            }
            StlFormula::Until {
                lo,
                hi,
                left,
                right,
            } => {
                // Positive: ∨_{t'} (ψ@t' ∧ ∧_{t''<t'} φ@t'').
                // Negative: ∧_{t'} (¬ψ@t' ∨ ∨_{t''<t'} ¬φ@t'').
                let mut prefix = if pos { TermRef::True } else { TermRef::False };
                let mut options = Vec::new();
                for tp in t..=(t + hi).min(last) {
                    if tp >= t + lo {
                        let r = self.encode(right, tp, pos);
                        options.push(self.junction(true, pos, vec![r, prefix]));
                    }
                    let l = self.encode(left, tp, pos);
                    prefix = self.junction(true, pos, vec![prefix, l]);
                }
                self.junction(false, pos, options)
            }
        };
        self.memo.insert(key, term);
        term
    }
}

/// Builds the MILP whose feasible points are exactly the dynamically
/// feasible trajectories (within bounds) satisfying `formula` at step 0 with
/// every decided predicate at margin at least `opts.margin`. The objective
/// is total L1 control effort.
pub fn encode_stl_milp(
    formula: &StlFormula,
    model: &DynamicsModel,
    x0: &State,
    horizon: usize,
    dt: f64,
    opts: &EncodeOptions,
) -> Result<MilpEncoding, StlError> {
    formula.validate()?;
    if !model.kind.is_linear() {
        return Err(StlError::NonlinearModel(model.kind));
    }
    if horizon > HORIZON_CAP {
        return Err(StlError::HorizonTooLarge {
            horizon,
            cap: HORIZON_CAP,
        });
    }
    if formula.horizon() > horizon {
        return Err(StlError::WindowOverflow {
            start: 0,
            needed: formula.horizon() + 1,
            available: horizon + 1,
        });
    }
    if opts.margin < 0.0 || opts.strict_gap < 0.0 {
        return Err(StlError::Malformed(
            "margin and strict gap must be non-negative".into(),
        ));
    }
    let n = model.state_dim();
    let m = model.control_dim();
    let zero_u = Control::zeros(m);
    let (a_mat, b_mat) = model.linearize(x0, &zero_u, dt)?;

    // State bounds and interval reachability.
    let mut state_lo = vec![f64::NEG_INFINITY; n];
    let mut state_hi = vec![f64::INFINITY; n];
    for i in 0..2.min(n) {
        state_lo[i] = opts.workspace.min[i];
        state_hi[i] = opts.workspace.max[i];
    }
    if let Some(v) = opts.velocity_limit {
        for i in 2..n {
            state_lo[i] = -v;
            state_hi[i] = v;
        }
    }
    for i in 0..n {
        if x0[i] < state_lo[i] - 1e-9 || x0[i] > state_hi[i] + 1e-9 {
            return Err(StlError::Infeasible);
        }
    }
    let (u_lo, u_hi): (Vec<f64>, Vec<f64>) =
        model.control_bounds.iter().map(|b| (b.lo, b.hi)).unzip();
    let mut lo = vec![x0.iter().copied().collect::<Vec<_>>()];
    let mut hi = lo.clone();
    for t in 0..horizon {
        let (l, h) = propagate(&a_mat, &b_mat, &lo[t], &hi[t], &u_lo, &u_hi);
        let l: Vec<f64> = l.iter().zip(&state_lo).map(|(a, b)| a.max(*b)).collect();
        let h: Vec<f64> = h.iter().zip(&state_hi).map(|(a, b)| a.min(*b)).collect();
        if l.iter().zip(&h).any(|(a, b)| a > b) {
            return Err(StlError::Infeasible);
        }
        lo.push(l);
        hi.push(h);
    }

    let mut lp = LinearProgram::new(Sense::Minimize);
    let mut states = Vec::with_capacity(horizon + 1);
    for t in 0..=horizon {
        let cols = (0..n)
            .map(|i| lp.add_var(format!("x{t}_{i}"), lo[t][i], hi[t][i], 0.0))
            .collect::<Vec<_>>();
        states.push(cols);
    }
    let mut controls = Vec::with_capacity(horizon);
    for t in 0..horizon {
        let cols = (0..m)
            .map(|j| {
                let (l, h) = (u_lo[j], u_hi[j]);
                let p_range = (l.max(0.0), h.max(0.0));
                let q_range = ((-h).max(0.0), (-l).max(0.0));
                let p = lp.add_var(format!("up{t}_{j}"), p_range.0, p_range.1, 1.0);
                let q = lp.add_var(format!("uq{t}_{j}"), q_range.0, q_range.1, 1.0);
                (p, q)
            })
            .collect::<Vec<_>>();
        controls.push(cols);
    }
    // x_{t+1} − A x_t − B (p − q) = 0
    for t in 0..horizon {
        for i in 0..n {
            let mut coeffs = vec![(states[t + 1][i], 1.0)];
            for k in 0..n {
                let a = a_mat[(i, k)];
                if a != 0.0 {
                    coeffs.push((states[t][k], -a));
                }
            }
            for (j, &(p, q)) in controls[t].iter().enumerate() {
                let b = b_mat[(i, j)];
                if b != 0.0 {
                    coeffs.push((p, -b));
                    coeffs.push((q, b));
                }
            }
            lp.add_constraint(coeffs, Relation::Eq, 0.0);
        }
    }
    let margin_var = lp.add_var("rho", opts.margin, opts.margin, 0.0);

    let mut enc = Encoder {
        lp,
        integers: Vec::new(),
        states,
        lo,
        hi,
        margin_var,
        opts,
        memo: HashMap::new(),
        composite: 0,
        max_m: 0.0,
    };
    let root = enc.encode(formula, 0, true);
    match root {
        TermRef::False => enc.lp.add_constraint(Vec::new(), Relation::Ge, 1.0),
        TermRef::True => {}
        TermRef::Var(z) => enc.lp.bounds[z] = (1.0, 1.0),
    }
    let leaf_count = enc.integers.len();
    Ok(MilpEncoding {
        problem: MilpProblem::new(enc.lp, enc.integers),
        state_vars: enc.states,
        control_vars: controls,
        margin_var,
        root,
        leaf_count,
        composite_count: enc.composite,
        big_m: enc.max_m,
        dt,
    })
}

fn propagate(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    lo: &[f64],
    hi: &[f64],
    u_lo: &[f64],
    u_hi: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let n = lo.len();
    let mut nl = vec![0.0; n];
    let mut nh = vec![0.0; n];
    for i in 0..n {
        for k in 0..n {
            let (x, y) = (a[(i, k)] * lo[k], a[(i, k)] * hi[k]);
            nl[i] += x.min(y);
            nh[i] += x.max(y);
        }
        for j in 0..u_lo.len() {
            let (x, y) = (b[(i, j)] * u_lo[j], b[(i, j)] * u_hi[j]);
            nl[i] += x.min(y);
            nh[i] += x.max(y);
        }
    }
    (nl, nh)
}
