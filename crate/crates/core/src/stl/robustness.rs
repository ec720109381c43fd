use crate::dynamics::{State, Trajectory};

use super::{StlError, StlFormula};

/// Margin `b − aᵀx` of a single predicate; missing state components count as 0.
pub(crate) fn predicate_margin(a: &[f64], b: f64, x: &State) -> f64 {
    let ax: f64 = a
        .iter()
        .enumerate()
        .map(|(i, ai)| ai * x.get(i).copied().unwrap_or(0.0))
        .sum();
    b - ax
}

pub(crate) fn region_margin(rect: &crate::environment::Rect, x: &State) -> f64 {
    StlFormula::rect_halfplanes(rect)
        .iter()
        .map(|(a, b)| predicate_margin(a, *b, x))
        .fold(f64::INFINITY, f64::min)
}

/// Quantitative robustness of `formula` on `traj` at step `t`.
pub fn robustness(formula: &StlFormula, traj: &Trajectory, t: usize) -> Result<f64, StlError> {
    let needed = formula.horizon() + 1;
    if t + needed > traj.len() {
        return Err(StlError::WindowOverflow {
            start: t,
            needed,
            available: traj.len(),
        });
    }
    let sig = robustness_signal(formula, &traj.states);
    Ok(sig[t])
}

/// Robustness at every step where the formula's window fits in the signal.
///
/// The returned vector has `len − horizon` entries (empty when the signal
/// is too short).
pub fn robustness_signal(formula: &StlFormula, states: &[State]) -> Vec<f64> {
    let defined = states.len().saturating_sub(formula.horizon());
    let mut out = signal(formula, states);
    out.truncate(defined);
    out
}

// Evaluates bottom-up over whole signals. Entries past the defined range are
// computed on clipped windows and discarded by the caller.
fn signal(formula: &StlFormula, states: &[State]) -> Vec<f64> {
    let len = states.len();
    match formula {
        StlFormula::Predicate { a, b } => {
            states.iter().map(|x| predicate_margin(a, *b, x)).collect()
        }
        StlFormula::Region { rect, inside, .. } => states
            .iter()
            .map(|x| {
                let m = region_margin(rect, x);
                if *inside {
                    m
                } else {
                    -m
                }
            })
            .collect(),
        StlFormula::Not(f) => signal(f, states).into_iter().map(|v| -v).collect(),
        StlFormula::And(fs) => combine(fs, states, f64::min, f64::INFINITY),
        StlFormula::Or(fs) => combine(fs, states, f64::max, f64::NEG_INFINITY),
        StlFormula::Always { lo, hi, body } => {
            let s = signal(body, states);
            window(&s, *lo, *hi, f64::min, f64::INFINITY)
        }
        StlFormula::Eventually { lo, hi, body } => {
            let s = signal(body, states);
            window(&s, *lo, *hi, f64::max, f64::NEG_INFINITY)
        }
        StlFormula::Until {
            lo,
            hi,
            left,
            right,
        } => {
            let l = signal(left, states);
            let r = signal(right, states);
            (0..len)
                .map(|t| {
                    let mut best = f64::NEG_INFINITY;
                    // Running minimum of the left signal over [t, t').
                    let mut prefix = f64::INFINITY;
                    for tp in t..=(t + hi).min(len - 1) {
                        if tp >= t + lo {
                            best = best.max(r[tp].min(prefix));
                        }
                        prefix = prefix.min(l[tp]);
                    }
                    best
                })
                .collect()
        }
    }
}

fn combine(fs: &[StlFormula], states: &[State], op: fn(f64, f64) -> f64, init: f64) -> Vec<f64> {
    let mut acc = vec![init; states.len()];
    for f in fs {
        for (a, v) in acc.iter_mut().zip(signal(f, states)) {
            *a = op(*a, v);
        }
    }
    acc
}

fn window(s: &[f64], lo: usize, hi: usize, op: fn(f64, f64) -> f64, init: f64) -> Vec<f64> {
    let len = s.len();
    (0..len)
        .map(|t| {
            let start = t + lo;
            let end = (t + hi).min(len - 1);
            if start > end {
                return init;
            }
            s[start..=end].iter().copied().fold(init, op)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;

    fn scalar_traj(xs: &[f64]) -> Trajectory {
        Trajectory::new(
            0.1,
            xs.iter()
                .map(|v| DVector::from_vec(vec![*v, 0.0]))
                .collect(),
        )
    }

    // x₀ > c is written as −x₀ ≤ −c.
    fn gt(c: f64) -> StlFormula {
        StlFormula::pred(vec![-1.0, 0.0], -c)
    }

    #[test]
    fn always_and_eventually_examples() {
        let traj = scalar_traj(&[1.0, 2.0, 3.0]);
        // min(1, 2, 3)
        assert_eq!(
            robustness(&StlFormula::always(0, 2, gt(0.0)), &traj, 0).unwrap(),
            1.0
        );
        // max(1 − 2.5, 2 − 2.5, 3 − 2.5)
        assert_eq!(
            robustness(&StlFormula::eventually(0, 2, gt(2.5)), &traj, 0).unwrap(),
            0.5
        );
    }

    #[test]
    fn until_example() {
        // x > 0 until x > 2.5 on [1, 2, 3]: witness t' = 2, min(0.5, min(1, 2)) = 0.5
        let traj = scalar_traj(&[1.0, 2.0, 3.0]);
        let f = StlFormula::until(0, 2, gt(0.0), gt(2.5));
        assert_eq!(robustness(&f, &traj, 0).unwrap(), 0.5);
    }

    #[test]
    fn window_overflow_is_reported() {
        let traj = scalar_traj(&[1.0, 2.0, 3.0]);
        let f = StlFormula::always(0, 3, gt(0.0));
        assert!(matches!(
            robustness(&f, &traj, 0),
            Err(StlError::WindowOverflow { .. })
        ));
        assert!(matches!(
            robustness(&StlFormula::always(0, 2, gt(0.0)), &traj, 1),
            Err(StlError::WindowOverflow { .. })
        ));
    }

    #[test]
    fn region_margin_is_distance_to_nearest_edge() {
        let rect = crate::environment::Rect::new([0.0, 0.0], [2.0, 4.0]);
        let traj = Trajectory::new(0.1, vec![DVector::from_vec(vec![0.5, 1.0])]);
        let inside = StlFormula::inside("r", rect);
        let outside = StlFormula::outside("r", rect);
        assert_eq!(robustness(&inside, &traj, 0).unwrap(), 0.5);
        assert_eq!(robustness(&outside, &traj, 0).unwrap(), -0.5);
    }
}
