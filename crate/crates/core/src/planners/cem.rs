use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::PlannerError;
use crate::budget::Deadline;
use crate::dynamics::{position, Control, DynamicsModel, Integrator, State, Trajectory};
use crate::environment::{dist, Disc, Obstacle};

/// Lower bound on every sampling standard deviation.
pub const STD_FLOOR: f64 = 1e-3;

#[derive(Clone, Debug)]
pub struct CemParams {
    pub population: usize,
    /// Share of each population refitted as the next distribution.
    pub elite_fraction: f64,
    pub iterations: usize,
    pub init_std: f64,
    pub rng_seed: u64,
    pub deadline: Deadline,
}

impl Default for CemParams {
    fn default() -> Self {
        Self {
            population: 64,
            elite_fraction: 0.125,
            iterations: 30,
            init_std: 1.0,
            rng_seed: 0,
            deadline: Deadline::unbounded(),
        }
    }
}

impl CemParams {
    pub fn elite_count(&self) -> usize {
        (self.elite_fraction * self.population as f64).ceil() as usize
    }

    fn validate(&self) -> Result<(), PlannerError> {
        let bad = |m: String| Err(PlannerError::InvalidParams(m));
        if !(self.elite_fraction > 0.0 && self.elite_fraction <= 1.0) {
            return bad(format!(
                "elite_fraction {} outside (0, 1]",
                self.elite_fraction
            ));
        }
        if self.population < 2 * self.elite_count() {
            return bad(format!(
                "population {} must be at least twice the elite count {}",
                self.population,
                self.elite_count()
            ));
        }
        if self.iterations == 0 || !(self.init_std > 0.0) {
            return bad("iterations and init_std must be positive".into());
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CemResult {
    /// Final distribution mean.
    pub mean: Vec<f64>,
    /// Best sample seen and its objective value.
    pub best: Vec<f64>,
    pub best_value: f64,
    /// Best-so-far objective after each iteration.
    pub history: Vec<f64>,
}

/// Gaussian cross-entropy minimization of `objective` from `init_mean`.
pub fn cem_optimize(
    mut objective: impl FnMut(&[f64]) -> f64,
    init_mean: &[f64],
    params: &CemParams,
) -> Result<CemResult, PlannerError> {
    params.validate()?;
    if init_mean.is_empty() {
        return Err(PlannerError::InvalidParams(
            "dimension must be at least 1".into(),
        ));
    }
    let dim = init_mean.len();
    let elites = params.elite_count();
    let mut rng = ChaCha8Rng::seed_from_u64(params.rng_seed);
    let mut mean = init_mean.to_vec();
    let mut std = vec![params.init_std; dim];
    let mut best = mean.clone();
    let mut best_value = f64::INFINITY;
    let mut history = Vec::with_capacity(params.iterations);

    for _ in 0..params.iterations {
        if params.deadline.expired() {
            return Err(PlannerError::Timeout);
        }
        let mut scored: Vec<(f64, Vec<f64>)> = Vec::with_capacity(params.population);
        for _ in 0..params.population {
            let x: Vec<f64> = (0..dim)
                .map(|i| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    mean[i] + std[i] * z
                })
                .collect();
            let v = objective(&x);
            if !v.is_finite() {
                return Err(PlannerError::Objective(v));
            }
            scored.push((v, x));
        }
        scored.sort_by(|a, b| a.0.total_cmp(&b.0));
        if scored[0].0 < best_value {
            best_value = scored[0].0;
            best = scored[0].1.clone();
        }
        history.push(best_value);
        for i in 0..dim {
            let m = scored[..elites].iter().map(|(_, x)| x[i]).sum::<f64>() / elites as f64;
            let var = scored[..elites]
                .iter()
                .map(|(_, x)| (x[i] - m).powi(2))
                .sum::<f64>()
                / elites as f64;
            mean[i] = m;
            std[i] = var.sqrt().max(STD_FLOOR);
        }
    }
    Ok(CemResult {
        mean,
        best,
        best_value,
        history,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct CemPlanWeights {
    pub goal: f64,
    pub collision: f64,
    pub effort: f64,
    /// Penetration margin counted as collision [m].
    pub safety_margin: f64,
}

impl Default for CemPlanWeights {
    fn default() -> Self {
        Self {
            goal: 10.0,
            collision: 100.0,
            effort: 1e-3,
            safety_margin: 0.1,
        }
    }
}

fn unflatten(u: &[f64], m: usize) -> Vec<Control> {
    u.chunks(m).map(Control::from_column_slice).collect()
}

/// Optimizes a control sequence with CEM against final goal distance,
/// obstacle penetration depth and control effort, then rolls out the best
/// sequence found.
#[allow(clippy::too_many_arguments)]
pub fn cem_plan(
    model: &DynamicsModel,
    x0: &State,
    goal: &Disc,
    obstacles: &[Obstacle],
    horizon: usize,
    dt: f64,
    integrator: Integrator,
    params: &CemParams,
    weights: &CemPlanWeights,
) -> Result<(Vec<Control>, Trajectory), PlannerError> {
    let m = model.control_dim();
    let cost = |u: &[f64]| -> f64 {
        let controls = unflatten(u, m);
        let traj = match model.rollout(x0, &controls, dt, integrator) {
            Ok(t) => t,
            Err(_) => return f64::MAX,
        };
        let mut penetration = 0.0;
        for p in traj.positions() {
            for o in obstacles {
                let d = weights.safety_margin - o.signed_distance(p);
                if d > 0.0 {
                    penetration += d * d;
                }
            }
        }
        let effort: f64 = controls
            .iter()
            .map(|c| model.clamp_control(c).norm_squared())
            .sum();
        let miss = dist(position(traj.last().unwrap()), goal.center);
        weights.goal * miss * miss + weights.collision * penetration + weights.effort * effort
    };
    let res = cem_optimize(cost, &vec![0.0; horizon * m], params)?;
    let controls: Vec<Control> = unflatten(&res.best, m)
        .iter()
        .map(|c| model.clamp_control(c))
        .collect();
    let traj = model.rollout(x0, &controls, dt, integrator)?;
    Ok((controls, traj))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_minimum() {
        let p = CemParams {
            init_std: 2.0,
            ..CemParams::default()
        };
        let r = cem_optimize(|x| (x[0] - 3.0).powi(2), &[0.0], &p).unwrap();
        assert!((r.mean[0] - 3.0).abs() < 0.05, "{:?}", r.mean);
        assert!(r.history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn sphere_and_constant() {
        let p = CemParams::default();
        for seed in 0..50 {
            let p = CemParams {
                rng_seed: seed,
                ..p.clone()
            };
            let r = cem_optimize(|x| x[0] * x[0] + x[1] * x[1], &[1.0, -1.0], &p).unwrap();
            assert!(
                r.mean[0].hypot(r.mean[1]) < 0.05,
                "seed {seed}: {:?}",
                r.mean
            );
        }
        let c = cem_optimize(|_| 1.0, &[5.0], &p).unwrap();
        assert!((c.mean[0] - 5.0).abs() <= 3.0 * p.init_std);
    }

    #[test]
    fn rejects_bad_population_and_nan() {
        let p = CemParams {
            population: 10,
            elite_fraction: 0.6,
            ..CemParams::default()
        };
        assert!(matches!(
            cem_optimize(|x| x[0], &[0.0], &p),
            Err(PlannerError::InvalidParams(_))
        ));
        assert!(matches!(
            cem_optimize(|_| f64::NAN, &[0.0], &CemParams::default()),
            Err(PlannerError::Objective(_))
        ));
    }

    #[test]
    fn plans_toward_goal() {
        let model = DynamicsModel::single_integrator(3.0);
        let x0 = State::from_vec(vec![1.0, 1.0]);
        let goal = Disc::new([3.0, 2.0], 0.3);
        let params = CemParams {
            population: 128,
            iterations: 40,
            ..CemParams::default()
        };
        let (u, traj) = cem_plan(
            &model,
            &x0,
            &goal,
            &[],
            10,
            0.1,
            Integrator::Euler,
            &params,
            &CemPlanWeights::default(),
        )
        .unwrap();
        assert_eq!(u.len(), 10);
        assert!(goal.contains(traj.position(10)), "{:?}", traj.position(10));
    }
}
