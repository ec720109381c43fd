use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{check_pd, check_psd, check_square, feedforward, state_error, window, ControlError};
use crate::dynamics::{Control, DynamicsModel, Integrator, State, Trajectory};

/// Riccati iteration stops once successive iterates differ by less than
/// this, relative to `max(1, ‖P‖∞)`.
pub const RICCATI_TOL: f64 = 1e-10;
pub const RICCATI_MAX_ITERS: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LqrHorizon {
    Finite(usize),
    Infinite,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LqrWeights {
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
    /// Terminal weight; `None` reuses `q`.
    pub qf: Option<DMatrix<f64>>,
    pub horizon: LqrHorizon,
}

impl LqrWeights {
    /// `Q = q·I`, `R = r·I`, `Q_f = Q`.
    pub fn diagonal(n: usize, m: usize, q: f64, r: f64, horizon: LqrHorizon) -> Self {
        Self {
            q: DMatrix::identity(n, n) * q,
            r: DMatrix::identity(m, m) * r,
            qf: None,
            horizon,
        }
    }

    pub fn terminal(&self) -> &DMatrix<f64> {
        self.qf.as_ref().unwrap_or(&self.q)
    }

    pub fn validate(&self, n: usize, m: usize) -> Result<(), ControlError> {
        check_square("Q", &self.q, n)?;
        check_psd("Q", &self.q)?;
        check_square("R", &self.r, m)?;
        check_pd("R", &self.r)?;
        if let Some(qf) = &self.qf {
            check_square("Q_f", qf, n)?;
            check_psd("Q_f", qf)?;
        }
        if self.horizon == LqrHorizon::Finite(0) {
            return Err(ControlError::InvalidWeights(
                "horizon must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Feedback gains and cost-to-go matrices. For a finite horizon `N`,
/// `gains[k]` is `K_k` for `k < N` and `cost_to_go[k]` is `P_k` for
/// `k ≤ N`. The infinite-horizon solution holds one of each.
#[derive(Clone, Debug, PartialEq)]
pub struct LqrSolution {
    pub gains: Vec<DMatrix<f64>>,
    pub cost_to_go: Vec<DMatrix<f64>>,
}

impl LqrSolution {
    /// Gain for step `k`, holding the last one.
    pub fn gain(&self, k: usize) -> &DMatrix<f64> {
        &self.gains[k.min(self.gains.len() - 1)]
    }
}

fn check_pair(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<(), ControlError> {
    if a.nrows() != a.ncols() || b.nrows() != a.nrows() {
        return Err(ControlError::Dimension(format!(
            "A is {}x{}, B is {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    Ok(())
}

/// One backward Riccati step: returns `(K, P_k)` from `P_{k+1}`.
fn riccati_step(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    p: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, DMatrix<f64>), ControlError> {
    let bt_p = b.transpose() * p;
    let s = r + &bt_p * b;
    let chol = s
        .cholesky()
        .ok_or_else(|| ControlError::InvalidWeights("R + BᵀPB is not positive definite".into()))?;
    let k = chol.solve(&(&bt_p * a));
    let next = q + a.transpose() * p * (a - b * &k);
    Ok((k, (&next + next.transpose()) * 0.5))
}

/// Discrete-time LQR for `x⁺ = Ax + Bu` with cost
/// `Σ xᵀQx + uᵀRu (+ x_NᵀQ_f x_N)` and control law `u = −Kx`.
pub fn lqr_gain(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    qf: Option<&DMatrix<f64>>,
    horizon: LqrHorizon,
) -> Result<LqrSolution, ControlError> {
    check_pair(a, b)?;
    let weights = LqrWeights {
        q: q.clone(),
        r: r.clone(),
        qf: qf.cloned(),
        horizon,
    };
    weights.validate(a.nrows(), b.ncols())?;
    match horizon {
        LqrHorizon::Finite(n) => {
            let a_seq = vec![a.clone(); n];
            let b_seq = vec![b.clone(); n];
            lqr_gain_schedule(&a_seq, &b_seq, q, r, weights.terminal())
        }
        LqrHorizon::Infinite => {
            let mut p = q.clone();
            for _ in 0..RICCATI_MAX_ITERS {
                let (k, next) = riccati_step(a, b, q, r, &p)?;
                if !next.iter().all(|v| v.is_finite()) {
                    break;
                }
                let delta = (&next - &p).amax();
                p = next;
                if delta < RICCATI_TOL * p.amax().max(1.0) {
                    return Ok(LqrSolution {
                        gains: vec![k],
                        cost_to_go: vec![p],
                    });
                }
            }
            Err(ControlError::NoConvergence {
                iterations: RICCATI_MAX_ITERS,
            })
        }
    }
}

/// Finite-horizon LQR for the time-varying pair `(A_k, B_k)`,
/// `k = 0..N−1`, by backward recursion from `P_N = Q_f`.
pub fn lqr_gain_schedule(
    a_seq: &[DMatrix<f64>],
    b_seq: &[DMatrix<f64>],
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    qf: &DMatrix<f64>,
) -> Result<LqrSolution, ControlError> {
    if a_seq.len() != b_seq.len() || a_seq.is_empty() {
        return Err(ControlError::Dimension(format!(
            "{} A matrices, {} B matrices",
            a_seq.len(),
            b_seq.len()
        )));
    }
    let n = a_seq.len();
    let mut p = vec![qf.clone(); n + 1];
    let mut k = Vec::with_capacity(n);
    for t in (0..n).rev() {
        check_pair(&a_seq[t], &b_seq[t])?;
        let (gain, pk) = riccati_step(&a_seq[t], &b_seq[t], q, r, &p[t + 1])?;
        k.push(gain);
        p[t] = pk;
    }
    k.reverse();
    Ok(LqrSolution {
        gains: k,
        cost_to_go: p,
    })
}

/// `‖P − (Q + AᵀPA − AᵀPB(R + BᵀPB)⁻¹BᵀPA)‖∞`.
pub fn riccati_residual(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    p: &DMatrix<f64>,
) -> f64 {
    match riccati_step(a, b, q, r, p) {
        Ok((_, next)) => (p - next).amax(),
        Err(_) => f64::INFINITY,
    }
}

/// Closed-loop tracking with `u_k = u_ref,k − K_k (x_k − x_ref,k)`, saturated.
///
/// The feedforward `u_ref` reproduces the reference transitions and the
/// gains come from a finite-horizon recursion on the Jacobians along the
/// reference. A `Finite(N)` horizon runs `N` steps, holding the last
/// reference state as needed; `Infinite` runs one step per reference
/// transition and, for linear models, uses the stationary gain.
pub fn lqr_track(
    model: &DynamicsModel,
    x0: &State,
    reference: &Trajectory,
    weights: &LqrWeights,
    dt: f64,
    integrator: Integrator,
) -> Result<(Vec<Control>, Trajectory), ControlError> {
    let (n, m) = (model.state_dim(), model.control_dim());
    weights.validate(n, m)?;
    if reference.is_empty() {
        return Err(ControlError::ShortReference { needed: 2, got: 0 });
    }
    let steps = match weights.horizon {
        LqrHorizon::Finite(h) => h,
        LqrHorizon::Infinite if reference.len() >= 2 => reference.len() - 1,
        LqrHorizon::Infinite => return Err(ControlError::ShortReference { needed: 2, got: 1 }),
    };
    let refs = window(&reference.states, 0, steps);
    let u_ref = feedforward(model, &refs, dt, integrator)?;
    let (a_seq, b_seq): (Vec<_>, Vec<_>) = (0..steps)
        .map(|k| model.step_jacobians(&refs[k], &u_ref[k], dt, integrator))
        .unzip();
    let solution = if weights.horizon == LqrHorizon::Infinite && model.kind.is_linear() {
        lqr_gain(
            &a_seq[0],
            &b_seq[0],
            &weights.q,
            &weights.r,
            None,
            LqrHorizon::Infinite,
        )?
    } else {
        lqr_gain_schedule(&a_seq, &b_seq, &weights.q, &weights.r, weights.terminal())?
    };
    let mut x = x0.clone();
    let mut controls = Vec::with_capacity(steps);
    let mut states = vec![x.clone()];
    for k in 0..steps {
        let e = state_error(model.kind, &x, &refs[k]);
        let u = model.clamp_control(&(&u_ref[k] - solution.gain(k) * e));
        x = model.step(&x, &u, dt, integrator)?;
        controls.push(u);
        states.push(x.clone());
    }
    Ok((controls, Trajectory::new(dt, states)))
}
