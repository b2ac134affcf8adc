use std::fmt;

use super::StlError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Comparator {
    Lt,
    Le,
    Gt,
    Ge,
}

impl Comparator {
    /// `true` for `>`/`>=`, whose robustness is `x - c`.
    pub fn is_lower_bound(self) -> bool {
        matches!(self, Comparator::Gt | Comparator::Ge)
    }

    pub fn holds(self, x: f64, c: f64) -> bool {
        match self {
            Comparator::Lt => x < c,
            Comparator::Le => x <= c,
            Comparator::Gt => x > c,
            Comparator::Ge => x >= c,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Comparator::Lt => "<",
            Comparator::Le => "<=",
            Comparator::Gt => ">",
            Comparator::Ge => ">=",
        }
    }
}

/// Closed time interval `[a, b]` with `0 <= a <= b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    a: f64,
    b: f64,
}

impl Interval {
    pub fn new(a: f64, b: f64) -> Result<Self, StlError> {
        if !(a.is_finite() && b.is_finite() && 0.0 <= a && a <= b) {
            return Err(StlError::Interval { a, b });
        }
        Ok(Self { a, b })
    }

    pub fn start(&self) -> f64 {
        self.a
    }

    pub fn end(&self) -> f64 {
        self.b
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Formula {
    True,
    /// `x[index] cmp threshold`
    Pred { index: usize, cmp: Comparator, threshold: f64 },
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Eventually(Interval, Box<Formula>),
    Always(Interval, Box<Formula>),
    Until(Interval, Box<Formula>, Box<Formula>),
}

impl Formula {
    pub fn pred(index: usize, cmp: Comparator, threshold: f64) -> Self {
        Formula::Pred { index, cmp, threshold }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(phi: Formula) -> Self {
        Formula::Not(Box::new(phi))
    }

    pub fn and(lhs: Formula, rhs: Formula) -> Self {
        Formula::And(Box::new(lhs), Box::new(rhs))
    }

    pub fn or(lhs: Formula, rhs: Formula) -> Self {
        Formula::Or(Box::new(lhs), Box::new(rhs))
    }

    pub fn eventually(i: Interval, phi: Formula) -> Self {
        Formula::Eventually(i, Box::new(phi))
    }

    pub fn always(i: Interval, phi: Formula) -> Self {
        Formula::Always(i, Box::new(phi))
    }

    pub fn until(i: Interval, lhs: Formula, rhs: Formula) -> Self {
        Formula::Until(i, Box::new(lhs), Box::new(rhs))
    }

    /// Length of signal needed beyond the evaluation time.
    pub fn horizon(&self) -> f64 {
        match self {
            Formula::True | Formula::Pred { .. } => 0.0,
            Formula::Not(p) => p.horizon(),
            Formula::And(p, q) | Formula::Or(p, q) => p.horizon().max(q.horizon()),
            Formula::Eventually(i, p) | Formula::Always(i, p) => i.end() + p.horizon(),
            Formula::Until(i, p, q) => i.end() + p.horizon().max(q.horizon()),
        }
    }

    /// Largest signal index referenced by a predicate.
    pub fn max_index(&self) -> Option<usize> {
        match self {
            Formula::True => None,
            Formula::Pred { index, .. } => Some(*index),
            Formula::Not(p) | Formula::Eventually(_, p) | Formula::Always(_, p) => p.max_index(),
            Formula::And(p, q) | Formula::Or(p, q) | Formula::Until(_, p, q) => {
                p.max_index().max(q.max_index())
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Formula::True | Formula::Pred { .. } => 0,
            Formula::Not(p) | Formula::Eventually(_, p) | Formula::Always(_, p) => 1 + p.depth(),
            Formula::And(p, q) | Formula::Or(p, q) | Formula::Until(_, p, q) => {
                1 + p.depth().max(q.depth())
            }
        }
    }
}

/// Prints fully parenthesized concrete syntax accepted by [`super::parse`].
impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::True => f.write_str("true"),
            Formula::Pred { index, cmp, threshold } => {
                write!(f, "(x{index} {} {threshold:?})", cmp.symbol())
            }
            Formula::Not(p) => write!(f, "(not {p})"),
            Formula::And(p, q) => write!(f, "({p} and {q})"),
            Formula::Or(p, q) => write!(f, "({p} or {q})"),
            Formula::Eventually(i, p) => write!(f, "(F[{:?},{:?}] {p})", i.start(), i.end()),
            Formula::Always(i, p) => write!(f, "(G[{:?},{:?}] {p})", i.start(), i.end()),
            Formula::Until(i, p, q) => write!(f, "({p} U[{:?},{:?}] {q})", i.start(), i.end()),
        }
    }
}
