use nalgebra::DVector;

use super::PlannerError;
use crate::budget::Deadline;
use crate::dynamics::{position, Control, DynamicsModel, Integrator, State, Trajectory};
use crate::environment::{Disc, Obstacle};

#[derive(Clone, Debug)]
pub struct GradParams {
    /// Control steps to optimize; `None` uses the caller's horizon.
    pub step_count: Option<usize>,
    pub learning_rate: f64,
    pub iterations: usize,
    pub deadline: Deadline,
}

impl Default for GradParams {
    fn default() -> Self {
        Self {
            step_count: None,
            learning_rate: 0.5,
            iterations: 300,
            deadline: Deadline::unbounded(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradWeights {
    pub obstacle: f64,
    pub effort: f64,
    /// Distance below which the barrier switches on [m].
    pub safety_margin: f64,
    /// Softplus sharpness `k` in `ln(1 + e^{kz}) / k`.
    pub sharpness: f64,
}

impl Default for GradWeights {
    fn default() -> Self {
        Self {
            obstacle: 10.0,
            effort: 1e-3,
            safety_margin: 0.2,
            sharpness: 10.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum GradTarget {
    /// Squared final distance to the disc center.
    Goal(Disc),
    /// Sum of squared position errors, holding the reference's last state.
    Reference(Trajectory),
}

fn softplus(z: f64, k: f64) -> (f64, f64) {
    let kz = k * z;
    let value = if kz > 30.0 { z } else { kz.exp().ln_1p() / k };
    let slope = 1.0 / (1.0 + (-kz).exp());
    (value, slope)
}

/// Running and terminal position cost at step `t` and its gradient with
/// respect to the position.
fn stage_cost(
    p: [f64; 2],
    t: usize,
    last: usize,
    target: &GradTarget,
    obstacles: &[Obstacle],
    w: &GradWeights,
) -> (f64, [f64; 2]) {
    let mut c = 0.0;
    let mut g = [0.0, 0.0];
    let mut quad = |r: [f64; 2]| {
        let e = [p[0] - r[0], p[1] - r[1]];
        c += e[0] * e[0] + e[1] * e[1];
        g[0] += 2.0 * e[0];
        g[1] += 2.0 * e[1];
    };
    match target {
        GradTarget::Goal(d) if t == last => quad(d.center),
        GradTarget::Goal(_) => {}
        GradTarget::Reference(r) => quad(position(r.sample_held(t))),
    }
    for o in obstacles {
        let (s, ds) = softplus(w.safety_margin - o.signed_distance(p), w.sharpness);
        let grad_d = o.signed_distance_gradient(p);
        c += w.obstacle * s * s;
        // d/dp of s² = 2 s · s' · (−∇d)
        g[0] -= w.obstacle * 2.0 * s * ds * grad_d[0];
        g[1] -= w.obstacle * 2.0 * s * ds * grad_d[1];
    }
    (c, g)
}

/// Objective value and its gradient with respect to the raw (unsaturated)
/// controls, by reverse accumulation through the rollout.
#[allow(clippy::too_many_arguments)]
pub fn grad_objective(
    model: &DynamicsModel,
    x0: &State,
    controls: &[Control],
    dt: f64,
    integrator: Integrator,
    target: &GradTarget,
    obstacles: &[Obstacle],
    weights: &GradWeights,
) -> Result<(f64, Vec<Control>, Trajectory), PlannerError> {
    let traj = model.rollout(x0, controls, dt, integrator)?;
    let n = model.state_dim();
    let last = controls.len();
    let mut total = 0.0;
    let mut lambda = DVector::zeros(n);
    let mut grads = vec![Control::zeros(model.control_dim()); last];
    for t in (1..=last).rev() {
        let (c, g) = stage_cost(traj.position(t), t, last, target, obstacles, weights);
        total += c;
        lambda[0] += g[0];
        if n > 1 {
            lambda[1] += g[1];
        }
        let (a, b) = model.step_jacobians(&traj.states[t - 1], &controls[t - 1], dt, integrator);
        grads[t - 1] = b.transpose() * &lambda + &controls[t - 1] * (2.0 * weights.effort);
        total += weights.effort * controls[t - 1].norm_squared();
        lambda = a.transpose() * lambda;
    }
    let (c0, _) = stage_cost(traj.position(0), 0, last, target, obstacles, weights);
    total += c0;
    if !total.is_finite() {
        return Err(PlannerError::Objective(total));
    }
    Ok((total, grads, traj))
}

/// Fixed-step gradient descent on the control sequence starting from zero
/// controls. Returns the best iterate (saturated) and its rollout.
#[allow(clippy::too_many_arguments)]
pub fn grad_plan(
    model: &DynamicsModel,
    x0: &State,
    target: &GradTarget,
    obstacles: &[Obstacle],
    horizon: usize,
    dt: f64,
    integrator: Integrator,
    params: &GradParams,
    weights: &GradWeights,
) -> Result<(Vec<Control>, Trajectory), PlannerError> {
    let steps = params.step_count.unwrap_or(horizon);
    if steps == 0 || !(params.learning_rate > 0.0) {
        return Err(PlannerError::InvalidParams(
            "step_count and learning_rate must be positive".into(),
        ));
    }
    let mut u = vec![Control::zeros(model.control_dim()); steps];
    let mut best: Option<(f64, Vec<Control>)> = None;
    for it in 0..=params.iterations {
        if params.deadline.expired() {
            return Err(PlannerError::Timeout);
        }
        let (j, g, _) =
            match grad_objective(model, x0, &u, dt, integrator, target, obstacles, weights) {
                Ok(v) => v,
                Err(PlannerError::Objective(_)) | Err(PlannerError::Dynamics(_)) => {
                    return Err(PlannerError::Diverged { iteration: it })
                }
                Err(e) => return Err(e),
            };
        if best.as_ref().is_none_or(|(bj, _)| j < *bj) {
            best = Some((j, u.clone()));
        }
        if it == params.iterations {
            break;
        }
        for (uk, gk) in u.iter_mut().zip(&g) {
            *uk -= gk * params.learning_rate;
        }
    }
    let controls: Vec<Control> = best
        .map(|(_, u)| u)
        .unwrap_or_default()
        .iter()
        .map(|c| model.clamp_control(c))
        .collect();
    let traj = model.rollout(x0, &controls, dt, integrator)?;
    Ok((controls, traj))
}
