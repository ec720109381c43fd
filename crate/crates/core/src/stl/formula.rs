use crate::environment::Rect;

use super::StlError;

/// STL abstract syntax tree. Predicates read `aᵀx ≤ b`.
#[derive(Clone, Debug, PartialEq)]
pub enum StlFormula {
    Predicate {
        a: Vec<f64>,
        b: f64,
    },
    /// Position (first two state components) inside or outside a rectangle.
    Region {
        label: Option<String>,
        rect: Rect,
        inside: bool,
    },
    Not(Box<StlFormula>),
    And(Vec<StlFormula>),
    Or(Vec<StlFormula>),
    Always {
        lo: usize,
        hi: usize,
        body: Box<StlFormula>,
    },
    Eventually {
        lo: usize,
        hi: usize,
        body: Box<StlFormula>,
    },
    Until {
        lo: usize,
        hi: usize,
        left: Box<StlFormula>,
        right: Box<StlFormula>,
    },
}

impl StlFormula {
    pub fn pred(a: Vec<f64>, b: f64) -> Self {
        StlFormula::Predicate { a, b }
    }

    pub fn inside(label: &str, rect: Rect) -> Self {
        StlFormula::Region {
            label: Some(label.to_string()),
            rect,
            inside: true,
        }
    }

    pub fn outside(label: &str, rect: Rect) -> Self {
        StlFormula::Region {
            label: Some(label.to_string()),
            rect,
            inside: false,
        }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: StlFormula) -> Self {
        StlFormula::Not(Box::new(f))
    }

    pub fn always(lo: usize, hi: usize, f: StlFormula) -> Self {
        StlFormula::Always {
            lo,
            hi,
            body: Box::new(f),
        }
    }

    pub fn eventually(lo: usize, hi: usize, f: StlFormula) -> Self {
        StlFormula::Eventually {
            lo,
            hi,
            body: Box::new(f),
        }
    }

    pub fn until(lo: usize, hi: usize, left: StlFormula, right: StlFormula) -> Self {
        StlFormula::Until {
            lo,
            hi,
            left: Box::new(left),
            right: Box::new(right),
        }
    }

    /// Number of future steps the formula looks at beyond its evaluation time.
    pub fn horizon(&self) -> usize {
        match self {
            StlFormula::Predicate { .. } | StlFormula::Region { .. } => 0,
            StlFormula::Not(f) => f.horizon(),
            StlFormula::And(fs) | StlFormula::Or(fs) => {
                fs.iter().map(|f| f.horizon()).max().unwrap_or(0)
            }
            StlFormula::Always { hi, body, .. } | StlFormula::Eventually { hi, body, .. } => {
                hi + body.horizon()
            }
            StlFormula::Until {
                hi, left, right, ..
            } => hi + left.horizon().max(right.horizon()),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            StlFormula::Predicate { .. } | StlFormula::Region { .. } => 0,
            StlFormula::Not(f) => 1 + f.depth(),
            StlFormula::And(fs) | StlFormula::Or(fs) => {
                1 + fs.iter().map(|f| f.depth()).max().unwrap_or(0)
            }
            StlFormula::Always { body, .. } | StlFormula::Eventually { body, .. } => {
                1 + body.depth()
            }
            StlFormula::Until { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn validate(&self) -> Result<(), StlError> {
        match self {
            StlFormula::Predicate { a, b } => {
                if a.is_empty() {
                    return Err(StlError::Malformed(
                        "predicate with empty coefficient vector".into(),
                    ));
                }
                if !b.is_finite() || a.iter().any(|v| !v.is_finite()) {
                    return Err(StlError::Malformed(
                        "non-finite predicate coefficient".into(),
                    ));
                }
                Ok(())
            }
            StlFormula::Region { rect, label, .. } => {
                if let Some(l) = label {
                    let bad_char = l.chars().any(|c| c.is_whitespace() || c == '(' || c == ')');
                    if l.is_empty() || bad_char || l.parse::<f64>().is_ok() {
                        return Err(StlError::Malformed(format!("invalid region label '{l}'")));
                    }
                }
                if rect.is_valid() && rect.min.iter().chain(&rect.max).all(|v| v.is_finite()) {
                    Ok(())
                } else {
                    Err(StlError::Malformed(
                        "region with empty or non-finite extent".into(),
                    ))
                }
            }
            StlFormula::Not(f) => f.validate(),
            StlFormula::And(fs) | StlFormula::Or(fs) => {
                if fs.is_empty() {
                    return Err(StlError::Malformed(
                        "empty conjunction or disjunction".into(),
                    ));
                }
                fs.iter().try_for_each(|f| f.validate())
            }
            StlFormula::Always { lo, hi, body } | StlFormula::Eventually { lo, hi, body } => {
                if lo > hi {
                    return Err(StlError::Malformed(format!(
                        "interval [{lo},{hi}] is empty"
                    )));
                }
                body.validate()
            }
            StlFormula::Until {
                lo,
                hi,
                left,
                right,
            } => {
                if lo > hi {
                    return Err(StlError::Malformed(format!(
                        "interval [{lo},{hi}] is empty"
                    )));
                }
                left.validate()?;
                right.validate()
            }
        }
    }

    /// The half-plane predicates `aᵀx ≤ b` whose conjunction is the rectangle.
    pub fn rect_halfplanes(rect: &Rect) -> [(Vec<f64>, f64); 4] {
        [
            (vec![-1.0, 0.0], -rect.min[0]),
            (vec![1.0, 0.0], rect.max[0]),
            (vec![0.0, -1.0], -rect.min[1]),
            (vec![0.0, 1.0], rect.max[1]),
        ]
    }

    /// Region labels in the order they first appear.
    pub fn region_labels(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.visit(&mut |f| {
            if let StlFormula::Region { label: Some(l), .. } = f {
                if !out.contains(l) {
                    out.push(l.clone());
                }
            }
        });
        out
    }

    pub fn visit(&self, f: &mut impl FnMut(&StlFormula)) {
        f(self);
        match self {
            StlFormula::Predicate { .. } | StlFormula::Region { .. } => {}
            StlFormula::Not(g) => g.visit(f),
            StlFormula::And(gs) | StlFormula::Or(gs) => gs.iter().for_each(|g| g.visit(f)),
            StlFormula::Always { body, .. } | StlFormula::Eventually { body, .. } => body.visit(f),
            StlFormula::Until { left, right, .. } => {
                left.visit(f);
                right.visit(f);
            }
        }
    }
}
