//! Feedback controllers: PID waypoint following, LQR (infinite and finite
//! horizon, time-varying tracking) and model predictive control by direct
//! shooting with a box-constrained QP.

mod lqr;
mod mpc;
mod pid;
mod qp;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::dynamics::{Control, DynamicsError, DynamicsModel, Integrator, ModelKind, State};

pub use lqr::{
    lqr_gain, lqr_gain_schedule, lqr_track, riccati_residual, LqrHorizon, LqrSolution, LqrWeights,
};
pub use mpc::{mpc_solve, mpc_track, MpcConfig, MpcProblem, MpcSolution};
pub use pid::{pid_control, pid_track, PidGains, PidState};
pub use qp::{box_qp, QpError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControlError {
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("no convergence after {iterations} iterations")]
    NoConvergence { iterations: usize },
    #[error("state bounds cannot be met (violation {violation:.3e})")]
    Infeasible { violation: f64 },
    #[error("reference needs at least {needed} states, got {got}")]
    ShortReference { needed: usize, got: usize },
    #[error("quadratic program: {0}")]
    Qp(#[from] QpError),
    #[error("dynamics: {0}")]
    Dynamics(#[from] DynamicsError),
    #[error("control budget exhausted")]
    Timeout,
}

fn wrap_angle(a: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    let r = (a + std::f64::consts::PI).rem_euclid(two_pi) - std::f64::consts::PI;
    if r <= -std::f64::consts::PI {
        r + two_pi
    } else {
        r
    }
}

/// `x − r`, with the unicycle heading difference wrapped to `(−π, π]`.
pub fn state_error(kind: ModelKind, x: &State, r: &State) -> DVector<f64> {
    let mut e = x - r;
    if kind == ModelKind::Unicycle {
        e[2] = wrap_angle(e[2]);
    }
    e
}

/// Controls that best reproduce each reference transition, found by a few
/// Gauss-Newton steps on `‖step(x_k, u) − x_{k+1}‖²` and saturated.
pub fn feedforward(
    model: &DynamicsModel,
    reference: &[State],
    dt: f64,
    integrator: Integrator,
) -> Result<Vec<Control>, ControlError> {
    let m = model.control_dim();
    let mut out = Vec::with_capacity(reference.len().saturating_sub(1));
    for w in reference.windows(2) {
        let mut u = Control::zeros(m);
        for _ in 0..4 {
            let next = model.step(&w[0], &u, dt, integrator)?;
            let resid = state_error(model.kind, &w[1], &next);
            let (_, b) = model.step_jacobians(&w[0], &u, dt, integrator);
            let bt = b.transpose();
            let normal = &bt * &b + DMatrix::identity(m, m) * 1e-12;
            let Some(chol) = normal.cholesky() else { break };
            let du = chol.solve(&(&bt * resid));
            u = model.clamp_control(&(&u + &du));
            if du.amax() < 1e-12 {
                break;
            }
        }
        out.push(u);
    }
    Ok(out)
}

/// Reference states `start..=start + len`, holding the last one.
pub(crate) fn window(reference: &[State], start: usize, len: usize) -> Vec<State> {
    (start..=start + len)
        .map(|k| reference[k.min(reference.len() - 1)].clone())
        .collect()
}

pub(crate) fn check_square(name: &str, m: &DMatrix<f64>, n: usize) -> Result<(), ControlError> {
    if m.nrows() != n || m.ncols() != n {
        return Err(ControlError::Dimension(format!(
            "{name} is {}x{}, expected {n}x{n}",
            m.nrows(),
            m.ncols()
        )));
    }
    if (m - m.transpose()).amax() > 1e-9 * (1.0 + m.amax()) {
        return Err(ControlError::InvalidWeights(format!(
            "{name} is not symmetric"
        )));
    }
    Ok(())
}

pub(crate) fn check_psd(name: &str, m: &DMatrix<f64>) -> Result<(), ControlError> {
    let min = m.clone().symmetric_eigenvalues().min();
    if min < -1e-10 * (1.0 + m.amax()) {
        return Err(ControlError::InvalidWeights(format!(
            "{name} is not positive semidefinite (eigenvalue {min:.3e})"
        )));
    }
    Ok(())
}

pub(crate) fn check_pd(name: &str, m: &DMatrix<f64>) -> Result<(), ControlError> {
    if m.clone().cholesky().is_none() {
        return Err(ControlError::InvalidWeights(format!(
            "{name} is not positive definite"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wraps_angles() {
        assert!((wrap_angle(3.0 * std::f64::consts::PI) - std::f64::consts::PI).abs() < 1e-12);
        assert!((wrap_angle(-0.5) + 0.5).abs() < 1e-15);
        assert!((wrap_angle(7.0) - (7.0 - std::f64::consts::TAU)).abs() < 1e-12);
    }

    #[test]
    fn feedforward_inverts_linear_and_unicycle_steps() {
        let si = DynamicsModel::single_integrator(3.0);
        let refs = vec![
            State::from_vec(vec![0.0, 0.0]),
            State::from_vec(vec![0.1, -0.2]),
        ];
        let u = feedforward(&si, &refs, 0.1, Integrator::Euler).unwrap();
        assert!((u[0][0] - 1.0).abs() < 1e-12 && (u[0][1] + 2.0).abs() < 1e-12);

        let uni = DynamicsModel::unicycle(3.0, 3.0);
        let x0 = State::from_vec(vec![1.0, 1.0, 0.3]);
        let applied = Control::from_vec(vec![1.2, -0.7]);
        let x1 = uni.step(&x0, &applied, 0.1, Integrator::Rk4).unwrap();
        let u = feedforward(&uni, &[x0, x1], 0.1, Integrator::Rk4).unwrap();
        assert!((&u[0] - applied).amax() < 1e-8, "{}", u[0]);
    }
}
