//! Continuous-time robot models `ẋ = f(x, u)`, their discretization,
//! analytic linearization and rollout.
//!
//! Positions are always the first two state components, which is what the
//! geometry in [`crate::environment`] relies on.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type State = DVector<f64>;
pub type Control = DVector<f64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("numeric overflow: state became non-finite at step {step}")]
    NumericOverflow { step: usize },
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("rollout needs at least one control")]
    EmptyControls,
    #[error("time step must be positive, got {0}")]
    BadTimeStep(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModelKind {
    SingleIntegrator2D,
    DoubleIntegrator2D,
    Unicycle,
    Pendulum,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [
        ModelKind::SingleIntegrator2D,
        ModelKind::DoubleIntegrator2D,
        ModelKind::Unicycle,
        ModelKind::Pendulum,
    ];

    pub fn state_dim(self) -> usize {
        match self {
            ModelKind::SingleIntegrator2D => 2,
            ModelKind::DoubleIntegrator2D => 4,
            ModelKind::Unicycle => 3,
            ModelKind::Pendulum => 2,
        }
    }

    pub fn control_dim(self) -> usize {
        match self {
            ModelKind::Pendulum => 1,
            _ => 2,
        }
    }

    /// Linear in both state and control (the MILP encoder needs this).
    pub fn is_linear(self) -> bool {
        matches!(
            self,
            ModelKind::SingleIntegrator2D | ModelKind::DoubleIntegrator2D
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::SingleIntegrator2D => "SingleIntegrator2D",
            ModelKind::DoubleIntegrator2D => "DoubleIntegrator2D",
            ModelKind::Unicycle => "Unicycle",
            ModelKind::Pendulum => "Pendulum",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bound {
    pub lo: f64,
    pub hi: f64,
}

impl Bound {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn symmetric(limit: f64) -> Self {
        Self {
            lo: -limit,
            hi: limit,
        }
    }

    pub fn clamp(&self, v: f64) -> f64 {
        v.clamp(self.lo, self.hi)
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.lo && v <= self.hi
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Integrator {
    Euler,
    Rk4,
}

/// A planar robot model with saturated controls.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DynamicsModel {
    pub kind: ModelKind,
    /// Physical parameters; only the pendulum uses any (`g`, `l`, `mass`).
    pub params: BTreeMap<String, f64>,
    pub control_bounds: Vec<Bound>,
}

impl DynamicsModel {
    pub fn new(
        kind: ModelKind,
        params: BTreeMap<String, f64>,
        control_bounds: Vec<Bound>,
    ) -> Result<Self, DynamicsError> {
        let model = Self {
            kind,
            params,
            control_bounds,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn single_integrator(speed_limit: f64) -> Self {
        Self::unchecked(
            ModelKind::SingleIntegrator2D,
            BTreeMap::new(),
            vec![Bound::symmetric(speed_limit); 2],
        )
    }

    pub fn double_integrator(accel_limit: f64) -> Self {
        Self::unchecked(
            ModelKind::DoubleIntegrator2D,
            BTreeMap::new(),
            vec![Bound::symmetric(accel_limit); 2],
        )
    }

    pub fn unicycle(speed_limit: f64, turn_rate_limit: f64) -> Self {
        Self::unchecked(
            ModelKind::Unicycle,
            BTreeMap::new(),
            vec![
                Bound::symmetric(speed_limit),
                Bound::symmetric(turn_rate_limit),
            ],
        )
    }

    pub fn pendulum(gravity: f64, length: f64, mass: f64, torque_limit: f64) -> Self {
        let params = BTreeMap::from([
            ("g".to_string(), gravity),
            ("l".to_string(), length),
            ("mass".to_string(), mass),
        ]);
        Self::unchecked(
            ModelKind::Pendulum,
            params,
            vec![Bound::symmetric(torque_limit)],
        )
    }

    /// Default model of each kind with generous bounds.
    pub fn default_for(kind: ModelKind) -> Self {
        match kind {
            ModelKind::SingleIntegrator2D => Self::single_integrator(3.0),
            ModelKind::DoubleIntegrator2D => Self::double_integrator(3.0),
            ModelKind::Unicycle => Self::unicycle(3.0, 3.0),
            ModelKind::Pendulum => Self::pendulum(9.8, 1.0, 1.0, 20.0),
        }
    }

    fn unchecked(kind: ModelKind, params: BTreeMap<String, f64>, bounds: Vec<Bound>) -> Self {
        let m = Self {
            kind,
            params,
            control_bounds: bounds,
        };
        debug_assert!(m.validate().is_ok());
        m
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        let m = self.kind.control_dim();
        if self.control_bounds.len() != m {
            return Err(DynamicsError::InvalidModel(format!(
                "{} needs {} control bounds, got {}",
                self.kind,
                m,
                self.control_bounds.len()
            )));
        }
        for (i, b) in self.control_bounds.iter().enumerate() {
            if !(b.lo <= b.hi) {
                return Err(DynamicsError::InvalidModel(format!(
                    "control bound {i} has lo > hi"
                )));
            }
        }
        if self.kind == ModelKind::Pendulum {
            for key in ["g", "l", "mass"] {
                match self.params.get(key) {
                    Some(v) if *v > 0.0 && v.is_finite() => {}
                    Some(v) => {
                        return Err(DynamicsError::InvalidModel(format!(
                            "pendulum parameter {key} must be positive, got {v}"
                        )))
                    }
                    None => {
                        return Err(DynamicsError::InvalidModel(format!(
                            "pendulum parameter {key} missing"
                        )))
                    }
                }
            }
        }
        Ok(())
    }

    pub fn state_dim(&self) -> usize {
        self.kind.state_dim()
    }

    pub fn control_dim(&self) -> usize {
        self.kind.control_dim()
    }

    pub fn default_integrator(&self) -> Integrator {
        match self.kind {
            ModelKind::Unicycle | ModelKind::Pendulum => Integrator::Rk4,
            _ => Integrator::Euler,
        }
    }

    fn param(&self, key: &str) -> f64 {
        self.params.get(key).copied().unwrap_or(f64::NAN)
    }

    fn pendulum_consts(&self) -> (f64, f64) {
        let (g, l, mass) = (self.param("g"), self.param("l"), self.param("mass"));
        (g / l, 1.0 / (mass * l * l))
    }

    fn check_dims(&self, x: &State, u: &Control) -> Result<(), DynamicsError> {
        if x.len() != self.state_dim() {
            return Err(DynamicsError::DimensionMismatch {
                what: "state",
                expected: self.state_dim(),
                got: x.len(),
            });
        }
        if u.len() != self.control_dim() {
            return Err(DynamicsError::DimensionMismatch {
                what: "control",
                expected: self.control_dim(),
                got: u.len(),
            });
        }
        Ok(())
    }

    /// Saturates `u` to the control bounds.
    pub fn clamp_control(&self, u: &Control) -> Control {
        Control::from_iterator(
            u.len(),
            u.iter().zip(&self.control_bounds).map(|(v, b)| b.clamp(*v)),
        )
    }

    /// 1 where the control is strictly inside its bounds (saturation has unit slope), else 0.
    fn clamp_mask(&self, u: &Control) -> DVector<f64> {
        DVector::from_iterator(
            u.len(),
            u.iter().zip(&self.control_bounds).map(|(v, b)| {
                if *v >= b.lo && *v <= b.hi {
                    1.0
                } else {
                    0.0
                }
            }),
        )
    }

    pub fn eval_f(&self, x: &State, u: &Control) -> Result<State, DynamicsError> {
        self.check_dims(x, u)?;
        if x.iter().chain(u.iter()).any(|v| !v.is_finite()) {
            return Err(DynamicsError::NonFinite("state or control"));
        }
        Ok(self.f(x, u))
    }

    fn f(&self, x: &State, u: &Control) -> State {
        match self.kind {
            ModelKind::SingleIntegrator2D => u.clone(),
            ModelKind::DoubleIntegrator2D => State::from_vec(vec![x[2], x[3], u[0], u[1]]),
            ModelKind::Unicycle => {
                let th = x[2];
                State::from_vec(vec![u[0] * th.cos(), u[0] * th.sin(), u[1]])
            }
            ModelKind::Pendulum => {
                let (g_over_l, inv_inertia) = self.pendulum_consts();
                State::from_vec(vec![x[1], -g_over_l * x[0].sin() + inv_inertia * u[0]])
            }
        }
    }

    /// Continuous-time Jacobians `(∂f/∂x, ∂f/∂u)`.
    pub fn f_jacobians(&self, x: &State, u: &Control) -> (DMatrix<f64>, DMatrix<f64>) {
        let n = self.state_dim();
        let m = self.control_dim();
        let mut fx = DMatrix::zeros(n, n);
        let mut fu = DMatrix::zeros(n, m);
        match self.kind {
            ModelKind::SingleIntegrator2D => {
                fu[(0, 0)] = 1.0;
                fu[(1, 1)] = 1.0;
            }
            ModelKind::DoubleIntegrator2D => {
                fx[(0, 2)] = 1.0;
                fx[(1, 3)] = 1.0;
                fu[(2, 0)] = 1.0;
                fu[(3, 1)] = 1.0;
            }
            ModelKind::Unicycle => {
                let (s, c) = x[2].sin_cos();
                fx[(0, 2)] = -u[0] * s;
                fx[(1, 2)] = u[0] * c;
                fu[(0, 0)] = c;
                fu[(1, 0)] = s;
                fu[(2, 1)] = 1.0;
            }
            ModelKind::Pendulum => {
                let (g_over_l, inv_inertia) = self.pendulum_consts();
                fx[(0, 1)] = 1.0;
                fx[(1, 0)] = -g_over_l * x[0].cos();
                fu[(1, 0)] = inv_inertia;
            }
        }
        (fx, fu)
    }

    /// One integration step; the control is saturated first.
    pub fn step(
        &self,
        x: &State,
        u: &Control,
        dt: f64,
        method: Integrator,
    ) -> Result<State, DynamicsError> {
        self.check_dims(x, u)?;
        if !(dt > 0.0) {
            return Err(DynamicsError::BadTimeStep(dt));
        }
        let u = self.clamp_control(u);
        let next = self.integrate(x, &u, dt, method);
        if next.iter().all(|v| v.is_finite()) {
            Ok(next)
        } else {
            Err(DynamicsError::NumericOverflow { step: 0 })
        }
    }

    fn integrate(&self, x: &State, u: &Control, dt: f64, method: Integrator) -> State {
        match method {
            Integrator::Euler => x + self.f(x, u) * dt,
            Integrator::Rk4 => {
                let k1 = self.f(x, u);
                let k2 = self.f(&(x + &k1 * (dt / 2.0)), u);
                let k3 = self.f(&(x + &k2 * (dt / 2.0)), u);
                let k4 = self.f(&(x + &k3 * dt), u);
                x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0)
            }
        }
    }

    /// Discrete-time Jacobians of the Euler step: `A = I + dt·∂f/∂x`, `B = dt·∂f/∂u`.
    pub fn linearize(
        &self,
        x0: &State,
        u0: &Control,
        dt: f64,
    ) -> Result<(DMatrix<f64>, DMatrix<f64>), DynamicsError> {
        self.check_dims(x0, u0)?;
        let (fx, fu) = self.f_jacobians(x0, u0);
        let n = self.state_dim();
        Ok((DMatrix::identity(n, n) + fx * dt, fu * dt))
    }

    /// Exact Jacobians of [`step`](Self::step) for either integrator, with
    /// respect to the state and the *unsaturated* control.
    pub fn step_jacobians(
        &self,
        x: &State,
        u_raw: &Control,
        dt: f64,
        method: Integrator,
    ) -> (DMatrix<f64>, DMatrix<f64>) {
        let n = self.state_dim();
        let u = self.clamp_control(u_raw);
        let mask = self.clamp_mask(u_raw);
        let eye = DMatrix::<f64>::identity(n, n);
        let (a, b) = match method {
            Integrator::Euler => {
                let (fx, fu) = self.f_jacobians(x, &u);
                (&eye + fx * dt, fu * dt)
            }
            Integrator::Rk4 => {
                let h = dt / 2.0;
                let k1 = self.f(x, &u);
                let (f1x, f1u) = self.f_jacobians(x, &u);
                let x2 = x + &k1 * h;
                let k2 = self.f(&x2, &u);
                let (f2x, f2u) = self.f_jacobians(&x2, &u);
                let x3 = x + &k2 * h;
                let k3 = self.f(&x3, &u);
                let (f3x, f3u) = self.f_jacobians(&x3, &u);
                let x4 = x + &k3 * dt;
                let (f4x, f4u) = self.f_jacobians(&x4, &u);

                let k1x = f1x.clone();
                let k2x = &f2x * (&eye + &k1x * h);
                let k3x = &f3x * (&eye + &k2x * h);
                let k4x = &f4x * (&eye + &k3x * dt);
                let k1u = f1u;
                let k2u = &f2x * (&k1u * h) + f2u;
                let k3u = &f3x * (&k2u * h) + f3u;
                let k4u = &f4x * (&k3u * dt) + f4u;
                let a = &eye + (k1x + k2x * 2.0 + k3x * 2.0 + k4x) * (dt / 6.0);
                let b = (k1u + k2u * 2.0 + k3u * 2.0 + k4u) * (dt / 6.0);
                (a, b)
            }
        };
        let mut b = b;
        for (j, s) in mask.iter().enumerate() {
            if *s == 0.0 {
                b.column_mut(j).fill(0.0);
            }
        }
        (a, b)
    }

    pub fn rollout(
        &self,
        x0: &State,
        controls: &[Control],
        dt: f64,
        method: Integrator,
    ) -> Result<Trajectory, DynamicsError> {
        if controls.is_empty() {
            return Err(DynamicsError::EmptyControls);
        }
        let mut states = Vec::with_capacity(controls.len() + 1);
        states.push(x0.clone());
        for (k, u) in controls.iter().enumerate() {
            let next = self.step(&states[k], u, dt, method).map_err(|e| match e {
                DynamicsError::NumericOverflow { .. } => DynamicsError::NumericOverflow { step: k },
                other => other,
            })?;
            states.push(next);
        }
        Ok(Trajectory::new(dt, states))
    }
}

/// Uniformly sampled state sequence starting at `t = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub dt: f64,
    pub states: Vec<State>,
}

impl Trajectory {
    pub fn new(dt: f64, states: Vec<State>) -> Self {
        debug_assert!(dt > 0.0);
        Self { dt, states }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    pub fn position(&self, k: usize) -> [f64; 2] {
        position(&self.states[k])
    }

    pub fn positions(&self) -> impl Iterator<Item = [f64; 2]> + '_ {
        self.states.iter().map(position)
    }

    pub fn last(&self) -> Option<&State> {
        self.states.last()
    }

    pub fn is_finite(&self) -> bool {
        self.states.iter().all(|s| s.iter().all(|v| v.is_finite()))
    }

    /// Sample `k`, holding the final state past the end.
    pub fn sample_held(&self, k: usize) -> &State {
        &self.states[k.min(self.states.len() - 1)]
    }
}

/// First two components of a state.
pub fn position(x: &State) -> [f64; 2] {
    [x[0], x.get(1).copied().unwrap_or(0.0)]
}
