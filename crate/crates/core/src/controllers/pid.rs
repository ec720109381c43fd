use super::{wrap_angle, ControlError};
use crate::dynamics::{position, Control, DynamicsModel, Integrator, ModelKind, State, Trajectory};

/// PID gains, shared by both position axes. `heading_kp` is only used by the
/// unicycle wrapper.
#[derive(Clone, Debug, PartialEq)]
pub struct PidGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    /// Anti-windup clamp on each axis integral.
    pub integral_limit: f64,
    pub heading_kp: f64,
}

impl Default for PidGains {
    fn default() -> Self {
        Self {
            kp: 4.0,
            ki: 0.0,
            kd: 0.0,
            integral_limit: 1.0,
            heading_kp: 4.0,
        }
    }
}

impl PidGains {
    pub fn validate(&self) -> Result<(), ControlError> {
        let gains = [self.kp, self.ki, self.kd, self.heading_kp];
        if gains.iter().any(|g| !(*g >= 0.0)) {
            return Err(ControlError::InvalidWeights(
                "PID gains must be non-negative".into(),
            ));
        }
        if !(self.integral_limit > 0.0) {
            return Err(ControlError::InvalidWeights(
                "integral_limit must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Integral and previous error per axis.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PidState {
    pub integral: [f64; 2],
    pub prev_error: Option<[f64; 2]>,
}

/// One PID update toward `target`.
///
/// Single and double integrators get `u_i = kp·e_i + ki·∫e_i + kd·ė_i` per
/// axis with `e = target − position`. The pendulum uses the first axis only,
/// with the angle as position. The unicycle wrapper maps the planar error to
/// `v = kp·‖e‖·cos Δθ` and `ω = heading_kp·Δθ`, where `Δθ` is the wrapped
/// bearing of the target relative to the heading; the integral and
/// derivative terms are added to `v` along the distance error.
///
/// The integral uses the trapezoid rule and the derivative a backward
/// difference; both are zero-history safe. Outputs are saturated.
pub fn pid_control(
    model: &DynamicsModel,
    target: [f64; 2],
    x: &State,
    state: &PidState,
    gains: &PidGains,
    dt: f64,
) -> (Control, PidState) {
    let p = position(x);
    let mut e = [target[0] - p[0], target[1] - p[1]];
    if model.kind == ModelKind::Pendulum {
        e[1] = 0.0;
    }
    let prev = state.prev_error.unwrap_or(e);
    let lim = gains.integral_limit;
    let integral = [
        (state.integral[0] + 0.5 * (e[0] + prev[0]) * dt).clamp(-lim, lim),
        (state.integral[1] + 0.5 * (e[1] + prev[1]) * dt).clamp(-lim, lim),
    ];
    let deriv = [(e[0] - prev[0]) / dt, (e[1] - prev[1]) / dt];
    let axis = |i: usize| gains.kp * e[i] + gains.ki * integral[i] + gains.kd * deriv[i];
    let raw = match model.kind {
        ModelKind::SingleIntegrator2D | ModelKind::DoubleIntegrator2D => {
            Control::from_vec(vec![axis(0), axis(1)])
        }
        ModelKind::Pendulum => Control::from_vec(vec![axis(0)]),
        ModelKind::Unicycle => {
            let dist = e[0].hypot(e[1]);
            let dtheta = if dist > 1e-9 {
                wrap_angle(e[1].atan2(e[0]) - x[2])
            } else {
                0.0
            };
            let (c, s) = (x[2].cos(), x[2].sin());
            let along = |v: [f64; 2]| v[0] * c + v[1] * s;
            let v = gains.kp * dist * dtheta.cos()
                + gains.ki * along(integral)
                + gains.kd * along(deriv);
            Control::from_vec(vec![v, gains.heading_kp * dtheta])
        }
    };
    let next = PidState {
        integral,
        prev_error: Some(e),
    };
    (model.clamp_control(&raw), next)
}

/// Closed-loop PID following the reference positions, targeting sample
/// `k + 1` at step `k`.
pub fn pid_track(
    model: &DynamicsModel,
    x0: &State,
    reference: &Trajectory,
    gains: &PidGains,
    dt: f64,
    integrator: Integrator,
) -> Result<(Vec<Control>, Trajectory), ControlError> {
    gains.validate()?;
    let steps = reference.len().saturating_sub(1);
    if steps == 0 {
        return Err(ControlError::ShortReference {
            needed: 2,
            got: reference.len(),
        });
    }
    let mut x = x0.clone();
    let mut st = PidState::default();
    let mut controls = Vec::with_capacity(steps);
    let mut states = vec![x.clone()];
    for k in 0..steps {
        let (u, next) = pid_control(
            model,
            position(reference.sample_held(k + 1)),
            &x,
            &st,
            gains,
            dt,
        );
        st = next;
        x = model.step(&x, &u, dt, integrator)?;
        controls.push(u);
        states.push(x.clone());
    }
    Ok((controls, Trajectory::new(dt, states)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn si() -> DynamicsModel {
        DynamicsModel::single_integrator(10.0)
    }

    #[test]
    fn zero_error_gives_zero_control() {
        let x = State::from_vec(vec![1.0, 2.0]);
        let (u, _) = pid_control(
            &si(),
            [1.0, 2.0],
            &x,
            &PidState::default(),
            &PidGains::default(),
            0.1,
        );
        assert_eq!(u.norm(), 0.0);
    }

    #[test]
    fn proportional_only() {
        let g = PidGains {
            kp: 2.0,
            ..PidGains::default()
        };
        let x = State::from_vec(vec![0.0, 0.0]);
        let (u, _) = pid_control(&si(), [1.5, 0.0], &x, &PidState::default(), &g, 0.1);
        assert_eq!(u[0], 3.0);
    }

    #[test]
    fn zero_gains_output_zero() {
        let g = PidGains {
            kp: 0.0,
            ki: 0.0,
            kd: 0.0,
            heading_kp: 0.0,
            ..PidGains::default()
        };
        let uni = DynamicsModel::unicycle(2.0, 2.0);
        let mut st = PidState::default();
        let x = State::from_vec(vec![0.0, 0.0, 1.0]);
        for k in 0..5 {
            let (u, next) = pid_control(&uni, [k as f64, 3.0], &x, &st, &g, 0.1);
            assert_eq!(u.norm(), 0.0);
            st = next;
        }
    }

    #[test]
    fn integral_is_clamped() {
        let g = PidGains {
            kp: 0.0,
            ki: 1.0,
            integral_limit: 0.3,
            ..PidGains::default()
        };
        let x = State::from_vec(vec![0.0, 0.0]);
        let mut st = PidState::default();
        for _ in 0..100 {
            st = pid_control(&si(), [5.0, 0.0], &x, &st, &g, 0.1).1;
        }
        assert_eq!(st.integral[0], 0.3);
    }

    #[test]
    fn closed_loop_decay() {
        let g = PidGains {
            kp: 1.0,
            ..PidGains::default()
        };
        let reference = Trajectory::new(0.1, vec![State::from_vec(vec![1.0, 0.0]); 51]);
        let (_, traj) = pid_track(
            &si(),
            &State::zeros(2),
            &reference,
            &g,
            0.1,
            Integrator::Euler,
        )
        .unwrap();
        let errs: Vec<f64> = traj.positions().map(|p| (1.0 - p[0]).hypot(p[1])).collect();
        assert!(errs.windows(2).all(|w| w[1] < w[0]));
        assert!(errs[50] < 0.02, "{}", errs[50]);
    }

    #[test]
    fn unicycle_wrapper_turns_toward_target() {
        let uni = DynamicsModel::unicycle(2.0, 2.0);
        let x = State::from_vec(vec![0.0, 0.0, 0.0]);
        let (u, _) = pid_control(
            &uni,
            [0.0, 1.0],
            &x,
            &PidState::default(),
            &PidGains::default(),
            0.1,
        );
        assert!(u[0].abs() < 1e-12);
        assert_eq!(u[1], 2.0);
    }
}
