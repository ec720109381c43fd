use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QpError {
    #[error("Hessian is not positive definite on the free subspace")]
    NotPositiveDefinite,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("lower bound exceeds upper bound at index {0}")]
    EmptyBox(usize),
    #[error("active set did not settle after {0} iterations")]
    MaxIterations(usize),
    #[error("non-finite problem data")]
    NonFinite,
}

const TOL: f64 = 1e-12;

/// Solves `min ½ xᵀHx + gᵀx` subject to `lo ≤ x ≤ hi` with a primal
/// active-set method. `H` must be symmetric positive definite. Bounds may be
/// infinite. `x0` is an optional starting point; it is clipped into the box.
pub fn box_qp(
    h: &DMatrix<f64>,
    g: &DVector<f64>,
    lo: &DVector<f64>,
    hi: &DVector<f64>,
    x0: Option<&DVector<f64>>,
) -> Result<DVector<f64>, QpError> {
    let n = g.len();
    if h.nrows() != n
        || h.ncols() != n
        || lo.len() != n
        || hi.len() != n
        || x0.is_some_and(|x| x.len() != n)
    {
        return Err(QpError::Dimension(format!(
            "H {}x{}, g {n}",
            h.nrows(),
            h.ncols()
        )));
    }
    if h.iter().chain(g.iter()).any(|v| !v.is_finite())
        || lo.iter().chain(hi.iter()).any(|v| v.is_nan())
    {
        return Err(QpError::NonFinite);
    }
    if let Some(i) = (0..n).find(|&i| lo[i] > hi[i]) {
        return Err(QpError::EmptyBox(i));
    }
    let mut x = match x0 {
        Some(x0) => x0.clone(),
        None => DVector::zeros(n),
    };
    for i in 0..n {
        x[i] = x[i].clamp(lo[i], hi[i]);
    }
    // Start with every variable sitting on a bound active.
    let mut active: Vec<bool> = (0..n).map(|i| x[i] == lo[i] || x[i] == hi[i]).collect();
    let scale = 1.0 + h.amax() + g.amax();
    let max_iter = 10 * n + 50;
    // Set after an unblocked step, which lands exactly on the minimizer of
    // the current free subspace.
    let mut settled = false;
    let mut released: Option<usize> = None;
    for _ in 0..max_iter {
        let grad = h * &x + g;
        let free: Vec<usize> = (0..n).filter(|&i| !active[i]).collect();
        let mut p = DVector::zeros(n);
        if !free.is_empty() && !settled {
            let hff = DMatrix::from_fn(free.len(), free.len(), |r, c| h[(free[r], free[c])]);
            let rhs = DVector::from_iterator(free.len(), free.iter().map(|&i| -grad[i]));
            let chol = hff.cholesky().ok_or(QpError::NotPositiveDefinite)?;
            let pf = chol.solve(&rhs);
            for (k, &i) in free.iter().enumerate() {
                p[i] = pf[k];
            }
            // A freshly released variable moves inward in exact arithmetic;
            // drop a rounding-sized outward component instead of cycling.
            if let Some(i) = released.take() {
                let outward = (x[i] == lo[i] && p[i] < 0.0) || (x[i] == hi[i] && p[i] > 0.0);
                if outward {
                    p[i] = 0.0;
                }
            }
        }
        if settled || p.amax() <= TOL * (1.0 + x.amax()) {
            settled = false;
            // Multiplier check: at the lower bound the gradient must point
            // inward (≥ 0), at the upper bound outward (≤ 0).
            let mut worst: Option<(usize, f64)> = None;
            for i in (0..n).filter(|&i| active[i]) {
                let wrong = if x[i] == lo[i] && x[i] == hi[i] {
                    0.0
                } else if x[i] == lo[i] {
                    -grad[i]
                } else {
                    grad[i]
                };
                if wrong > TOL * scale && worst.is_none_or(|(_, w)| wrong > w) {
                    worst = Some((i, wrong));
                }
            }
            match worst {
                None => return Ok(x),
                Some((i, _)) => {
                    active[i] = false;
                    released = Some(i);
                }
            }
            continue;
        }
        let mut alpha = 1.0;
        let mut blocking = None;
        for &i in &free {
            let limit = if p[i] > 0.0 {
                (hi[i] - x[i]) / p[i]
            } else if p[i] < 0.0 {
                (lo[i] - x[i]) / p[i]
            } else {
                continue;
            };
            if limit < alpha {
                alpha = limit.max(0.0);
                blocking = Some(i);
            }
        }
        x += &p * alpha;
        match blocking {
            Some(i) => {
                x[i] = if p[i] > 0.0 { hi[i] } else { lo[i] };
                active[i] = true;
            }
            None => settled = true,
        }
    }
    Err(QpError::MaxIterations(max_iter))
}
