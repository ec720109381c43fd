use nalgebra::{DMatrix, DVector};

use super::{
    box_qp, check_pd, check_psd, check_square, feedforward, state_error, window, ControlError,
};
use crate::budget::Deadline;
use crate::dynamics::{Bound, Control, DynamicsModel, Integrator, State, Trajectory};

/// State-bound violation above this after convergence is reported as
/// infeasible.
pub const STATE_BOUND_TOL: f64 = 1e-3;
const MAX_HALVINGS: usize = 20;

/// Scalar weight and solver defaults used to build an [`MpcProblem`].
#[derive(Clone, Debug)]
pub struct MpcConfig {
    pub horizon: usize,
    /// `Q = q·I`.
    pub q: f64,
    /// `R = r·I`.
    pub r: f64,
    /// `Q_f = qf·I`.
    pub qf: f64,
    pub state_bounds: Option<Vec<Bound>>,
    pub max_sqp_iters: usize,
    pub convergence_tol: f64,
    /// Quadratic penalty on state-bound violation.
    pub state_penalty: f64,
    /// In closed loop, shorten the horizon to the remaining reference steps
    /// instead of extending the reference past its end.
    pub shrink_horizon: bool,
    pub deadline: Deadline,
}

impl Default for MpcConfig {
    fn default() -> Self {
        Self {
            horizon: 15,
            q: 1.0,
            r: 0.1,
            qf: 10.0,
            state_bounds: None,
            max_sqp_iters: 20,
            convergence_tol: 1e-6,
            state_penalty: 1e6,
            shrink_horizon: true,
            deadline: Deadline::unbounded(),
        }
    }
}

impl MpcConfig {
    pub fn problem(
        &self,
        model: &DynamicsModel,
        x0: &State,
        reference: Vec<State>,
        dt: f64,
        integrator: Integrator,
    ) -> MpcProblem {
        let (n, m) = (model.state_dim(), model.control_dim());
        MpcProblem {
            model: model.clone(),
            x0: x0.clone(),
            reference,
            horizon: self.horizon,
            q: DMatrix::identity(n, n) * self.q,
            r: DMatrix::identity(m, m) * self.r,
            qf: DMatrix::identity(n, n) * self.qf,
            control_bounds: model.control_bounds.clone(),
            state_bounds: self.state_bounds.clone(),
            max_sqp_iters: self.max_sqp_iters,
            convergence_tol: self.convergence_tol,
            state_penalty: self.state_penalty,
            dt,
            integrator,
            warm_start: None,
            deadline: self.deadline,
        }
    }
}

/// One horizon solve. The cost is
/// `Σ_{k<N} e_kᵀQe_k + (u_k − u_ref,k)ᵀR(u_k − u_ref,k) + e_NᵀQ_f e_N`
/// with `e_k = x_k − x_ref,k` and `u_ref` the feedforward that reproduces the
/// reference transitions, plus `state_penalty` times the squared state-bound
/// violation.
#[derive(Clone, Debug)]
pub struct MpcProblem {
    pub model: DynamicsModel,
    pub x0: State,
    /// At least `horizon + 1` states.
    pub reference: Vec<State>,
    pub horizon: usize,
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub qf: DMatrix<f64>,
    /// Intersected with the model's own bounds.
    pub control_bounds: Vec<Bound>,
    pub state_bounds: Option<Vec<Bound>>,
    pub max_sqp_iters: usize,
    pub convergence_tol: f64,
    pub state_penalty: f64,
    pub dt: f64,
    pub integrator: Integrator,
    pub warm_start: Option<Vec<Control>>,
    pub deadline: Deadline,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MpcSolution {
    pub controls: Vec<Control>,
    pub predicted: Trajectory,
    pub cost: f64,
    pub sqp_iterations: usize,
    /// Cost of the initial guess followed by the cost after each accepted step.
    pub cost_history: Vec<f64>,
}

impl MpcProblem {
    fn validate(&self) -> Result<(), ControlError> {
        let (n, m) = (self.model.state_dim(), self.model.control_dim());
        if self.horizon == 0 {
            return Err(ControlError::InvalidWeights(
                "horizon must be at least 1".into(),
            ));
        }
        if self.reference.len() < self.horizon + 1 {
            return Err(ControlError::ShortReference {
                needed: self.horizon + 1,
                got: self.reference.len(),
            });
        }
        if self.x0.len() != n || self.reference.iter().any(|r| r.len() != n) {
            return Err(ControlError::Dimension(format!(
                "states must have {n} components"
            )));
        }
        check_square("Q", &self.q, n)?;
        check_psd("Q", &self.q)?;
        check_square("Q_f", &self.qf, n)?;
        check_psd("Q_f", &self.qf)?;
        check_square("R", &self.r, m)?;
        check_pd("R", &self.r)?;
        if self.control_bounds.len() != m {
            return Err(ControlError::Dimension(format!(
                "{m} control bounds expected"
            )));
        }
        if self.state_bounds.as_ref().is_some_and(|b| b.len() != n) {
            return Err(ControlError::Dimension(format!(
                "{n} state bounds expected"
            )));
        }
        if self.max_sqp_iters == 0 || !(self.convergence_tol > 0.0) || !(self.state_penalty > 0.0) {
            return Err(ControlError::InvalidWeights(
                "max_sqp_iters, convergence_tol and state_penalty must be positive".into(),
            ));
        }
        if let Some(w) = &self.warm_start {
            if w.len() != self.horizon || w.iter().any(|u| u.len() != m) {
                return Err(ControlError::Dimension(
                    "warm start must hold one control per step".into(),
                ));
            }
        }
        Ok(())
    }

    fn bounds(&self) -> Vec<Bound> {
        self.control_bounds
            .iter()
            .zip(&self.model.control_bounds)
            .map(|(a, b)| Bound::new(a.lo.max(b.lo), a.hi.min(b.hi)))
            .collect()
    }

    fn violation(&self, x: &State) -> DVector<f64> {
        match &self.state_bounds {
            None => DVector::zeros(x.len()),
            Some(b) => DVector::from_iterator(
                x.len(),
                x.iter().zip(b).map(|(v, b)| {
                    if *v > b.hi {
                        v - b.hi
                    } else if *v < b.lo {
                        v - b.lo
                    } else {
                        0.0
                    }
                }),
            ),
        }
    }

    /// Bound that state component `i` with value `v` violates, if any.
    fn row_violation(&self, i: usize, v: f64) -> Option<f64> {
        let b = self.state_bounds.as_ref()?.get(i)?;
        if v > b.hi {
            Some(b.hi)
        } else if v < b.lo {
            Some(b.lo)
        } else {
            None
        }
    }

    fn weight(&self, k: usize) -> &DMatrix<f64> {
        if k == self.horizon {
            &self.qf
        } else {
            &self.q
        }
    }

    fn cost(&self, traj: &Trajectory, u: &[Control], u_ref: &[Control]) -> f64 {
        let mut j = 0.0;
        for k in 0..=self.horizon {
            let e = state_error(self.model.kind, &traj.states[k], &self.reference[k]);
            j += (e.transpose() * self.weight(k) * &e)[0];
            j += self.state_penalty * self.violation(&traj.states[k]).norm_squared();
            if k < self.horizon {
                let du = &u[k] - &u_ref[k];
                j += (du.transpose() * &self.r * &du)[0];
            }
        }
        j
    }
}

fn stack(u: &[Control]) -> DVector<f64> {
    DVector::from_iterator(
        u.iter().map(|c| c.len()).sum(),
        u.iter().flat_map(|c| c.iter().copied()),
    )
}

/// Solves one horizon by Gauss-Newton sequential quadratic programming on
/// the condensed (shooting) form. Each iteration linearizes the rollout
/// about the current controls, solves the box-constrained QP for the step
/// and halves the step until the true cost does not increase. For a linear
/// model the first iteration is exact and is returned.
pub fn mpc_solve(problem: &MpcProblem) -> Result<MpcSolution, ControlError> {
    problem.validate()?;
    let p = problem;
    let (n, m, nh) = (p.model.state_dim(), p.model.control_dim(), p.horizon);
    let refs = &p.reference[..=nh];
    let u_ref = feedforward(&p.model, refs, p.dt, p.integrator)?;
    let bounds = p.bounds();
    let clamp =
        |u: &Control| Control::from_iterator(m, u.iter().zip(&bounds).map(|(v, b)| b.clamp(*v)));
    let mut u: Vec<Control> = p
        .warm_start
        .clone()
        .unwrap_or_else(|| u_ref.clone())
        .iter()
        .map(clamp)
        .collect();
    let mut traj = p.model.rollout(&p.x0, &u, p.dt, p.integrator)?;
    let mut cost = p.cost(&traj, &u, &u_ref);
    let mut history = vec![cost];
    let mut iterations = 0;
    let mut converged = false;

    while iterations < p.max_sqp_iters {
        if p.deadline.expired() {
            return Err(ControlError::Timeout);
        }
        iterations += 1;
        // Sensitivity of x_1..x_N to u_0..u_{N−1}: block (k, j) = A_{k−1}⋯A_{j+1} B_j.
        let mut s = DMatrix::zeros(nh * n, nh * m);
        for j in 0..nh {
            let (_, b) = p
                .model
                .step_jacobians(&traj.states[j], &u[j], p.dt, p.integrator);
            let mut block = b;
            for k in j..nh {
                if k > j {
                    let (a, _) = p
                        .model
                        .step_jacobians(&traj.states[k], &u[k], p.dt, p.integrator);
                    block = a * block;
                }
                s.view_mut((k * n, j * m), (n, m)).copy_from(&block);
            }
        }
        let mut w = DMatrix::zeros(nh * n, nh * n);
        let mut resid = DVector::zeros(nh * n);
        let mut xs = DVector::zeros(nh * n);
        for k in 1..=nh {
            let rows = (k - 1) * n;
            w.view_mut((rows, rows), (n, n)).copy_from(p.weight(k));
            let e = state_error(p.model.kind, &traj.states[k], &refs[k]);
            resid.rows_mut(rows, n).copy_from(&e);
            xs.rows_mut(rows, n).copy_from(&traj.states[k]);
        }
        let mut rbar = DMatrix::zeros(nh * m, nh * m);
        for k in 0..nh {
            rbar.view_mut((k * m, k * m), (m, m)).copy_from(&p.r);
        }
        let st = s.transpose();
        let h0 = (&st * &w * &s + &rbar) * 2.0;
        let g0 = (&st * &w * &resid + &rbar * (stack(&u) - stack(&u_ref))) * 2.0;
        let ustack = stack(&u);
        let lo = DVector::from_iterator(nh * m, (0..nh * m).map(|i| bounds[i % m].lo - ustack[i]));
        let hi = DVector::from_iterator(nh * m, (0..nh * m).map(|i| bounds[i % m].hi - ustack[i]));

        // Active-set Newton on the violation penalty: penalize the rows the
        // linearized prediction violates until that set stops changing.
        let violated = |x: &DVector<f64>| -> Vec<Option<f64>> {
            (0..nh * n).map(|i| p.row_violation(i % n, x[i])).collect()
        };
        let mut active = violated(&xs);
        let mut step;
        let mut settled = false;
        let mut inner = 0;
        loop {
            let mut d = DVector::zeros(nh * n);
            let mut target = DVector::zeros(nh * n);
            for (i, a) in active.iter().enumerate() {
                if let Some(bound) = a {
                    d[i] = p.state_penalty;
                    target[i] = xs[i] - bound;
                }
            }
            let dm = DMatrix::from_diagonal(&d);
            let h = &h0 + &st * &dm * &s * 2.0;
            let h = (&h + h.transpose()) * 0.5;
            let g = &g0 + &st * (&dm * &target) * 2.0;
            step = box_qp(&h, &g, &lo, &hi, None)?;
            if p.state_bounds.is_none() {
                settled = true;
                break;
            }
            let next = violated(&(&xs + &s * &step));
            inner += 1;
            if next
                .iter()
                .map(Option::is_some)
                .eq(active.iter().map(Option::is_some))
            {
                settled = true;
                break;
            }
            if inner > nh * n {
                break;
            }
            active = next;
        }
        let exact = settled && p.model.kind.is_linear();

        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let trial: Vec<Control> = (0..nh)
                .map(|k| clamp(&(&u[k] + step.rows(k * m, m) * alpha)))
                .collect();
            let t = p.model.rollout(&p.x0, &trial, p.dt, p.integrator)?;
            let c = p.cost(&t, &trial, &u_ref);
            if c <= cost {
                accepted = Some((trial, t, c));
                break;
            }
            alpha *= 0.5;
        }
        let Some((trial, t, c)) = accepted else {
            // No descent along the QP step: the iterate is stationary.
            converged = true;
            break;
        };
        u = trial;
        traj = t;
        cost = c;
        history.push(cost);
        if exact || alpha * step.amax() < p.convergence_tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(ControlError::NoConvergence { iterations });
    }
    let violation = traj.states[1..]
        .iter()
        .map(|x| p.violation(x).amax())
        .fold(0.0, f64::max);
    if violation > STATE_BOUND_TOL {
        return Err(ControlError::Infeasible { violation });
    }
    Ok(MpcSolution {
        controls: u,
        predicted: traj,
        cost,
        sqp_iterations: iterations,
        cost_history: history,
    })
}

/// Receding-horizon closed loop: one horizon solve per reference
/// transition, applying the first control and warm-starting the next solve
/// with the shifted plan. Near the end of the reference the horizon either
/// shrinks to the remaining steps or, with `shrink_horizon` off, the
/// reference is extended by holding its last state.
pub fn mpc_track(
    model: &DynamicsModel,
    x0: &State,
    reference: &Trajectory,
    config: &MpcConfig,
    dt: f64,
    integrator: Integrator,
) -> Result<(Vec<Control>, Trajectory), ControlError> {
    if reference.len() < 2 {
        return Err(ControlError::ShortReference {
            needed: 2,
            got: reference.len(),
        });
    }
    let steps = reference.len() - 1;
    let mut x = x0.clone();
    let mut controls = Vec::with_capacity(steps);
    let mut states = vec![x.clone()];
    let mut warm: Option<Vec<Control>> = None;
    for k in 0..steps {
        let horizon = if config.shrink_horizon {
            config.horizon.min(steps - k)
        } else {
            config.horizon
        };
        let mut problem = config.problem(
            model,
            &x,
            window(&reference.states, k, horizon),
            dt,
            integrator,
        );
        problem.horizon = horizon;
        problem.warm_start = warm.take().map(|mut w| {
            w.truncate(horizon);
            w
        });
        let sol = mpc_solve(&problem)?;
        let u = model.clamp_control(&sol.controls[0]);
        x = model.step(&x, &u, dt, integrator)?;
        let mut shifted = sol.controls[1..].to_vec();
        shifted.push(sol.controls[sol.controls.len() - 1].clone());
        warm = Some(shifted);
        controls.push(u);
        states.push(x.clone());
    }
    Ok((controls, Trajectory::new(dt, states)))
}
