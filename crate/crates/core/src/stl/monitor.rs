//! Discrete-time quantitative and Boolean evaluation.
//!
//! Temporal operators range over the signal's sample times inside `t + I`;
//! an empty supremum is `-inf` and an empty infimum is `+inf`.

use std::collections::VecDeque;
use std::ops::Range;

use super::ast::{Formula, Interval};
use super::StlError;
use crate::signal::Signal;

/// Slack applied to interval endpoints so that times produced by
/// accumulating a sampling period still land inside their window.
pub const TIME_EPS: f64 = 1e-9;

fn window(times: &[f64], t: f64, i: &Interval) -> Range<usize> {
    let lo = times.partition_point(|&s| s < t + i.start() - TIME_EPS);
    let hi = times.partition_point(|&s| s <= t + i.end() + TIME_EPS);
    lo..hi.max(lo)
}

fn check(phi: &Formula, sig: &Signal, t: f64) -> Result<(), StlError> {
    if !(t >= sig.start() && t <= sig.end()) {
        return Err(StlError::OutOfDomain { t, start: sig.start(), end: sig.end() });
    }
    if let Some(index) = phi.max_index() {
        if index >= sig.dim() {
            return Err(StlError::IndexOutOfRange { index, dim: sig.dim() });
        }
    }
    let required = t + phi.horizon();
    if required > sig.end() + TIME_EPS {
        return Err(StlError::InsufficientHorizon { required, available: sig.end() });
    }
    Ok(())
}

/// Robustness of `phi` on `sig` at time `t`.
pub fn robustness(phi: &Formula, sig: &Signal, t: f64) -> Result<f64, StlError> {
    check(phi, sig, t)?;
    Ok(Quantitative.eval_at(phi, sig, t))
}

/// Boolean satisfaction of `phi` on `sig` at time `t`, with predicates
/// evaluated using their written comparator.
pub fn satisfies(phi: &Formula, sig: &Signal, t: f64) -> Result<bool, StlError> {
    check(phi, sig, t)?;
    Ok(Qualitative.eval_at(phi, sig, t))
}

/// The two semantics share the traversal; they differ only in their lattice.
trait Semantics {
    type V: Copy;
    fn top(&self) -> Self::V;
    fn bottom(&self) -> Self::V;
    fn atom(&self, x: f64, phi: &Formula) -> Self::V;
    fn neg(&self, v: Self::V) -> Self::V;
    fn meet(&self, a: Self::V, b: Self::V) -> Self::V;
    fn join(&self, a: Self::V, b: Self::V) -> Self::V;
    /// `a` is at least as large as `b` in the lattice order.
    fn dominates(&self, a: Self::V, b: Self::V) -> bool;

    /// Values of `phi` at every sample index. Entries whose temporal windows
    /// run past the end of the signal are computed over the truncated window.
    fn trace(&self, phi: &Formula, sig: &Signal) -> Vec<Self::V> {
        let n = sig.len();
        match phi {
            Formula::True => vec![self.top(); n],
            Formula::Pred { index, .. } => {
                (0..n).map(|i| self.atom(sig.sample(i)[*index], phi)).collect()
            }
            Formula::Not(p) => self.trace(p, sig).into_iter().map(|v| self.neg(v)).collect(),
            Formula::And(p, q) => {
                let (a, b) = (self.trace(p, sig), self.trace(q, sig));
                a.into_iter().zip(b).map(|(x, y)| self.meet(x, y)).collect()
            }
            Formula::Or(p, q) => {
                let (a, b) = (self.trace(p, sig), self.trace(q, sig));
                a.into_iter().zip(b).map(|(x, y)| self.join(x, y)).collect()
            }
            Formula::Eventually(i, p) => self.sliding(sig, i, &self.trace(p, sig), true),
            Formula::Always(i, p) => self.sliding(sig, i, &self.trace(p, sig), false),
            Formula::Until(i, p, q) => {
                let (lhs, rhs) = (self.trace(p, sig), self.trace(q, sig));
                let times = sig.times();
                (0..n).map(|k| self.until_at(times, times[k], k, i, &lhs, &rhs)).collect()
            }
        }
    }

    /// Windowed sup (`take_max`) or inf over sample times in `t_k + I`,
    /// using a monotone deque since both window ends only move forward.
    fn sliding(&self, sig: &Signal, i: &Interval, vals: &[Self::V], take_max: bool) -> Vec<Self::V> {
        let times = sig.times();
        let better = |a: Self::V, b: Self::V| {
            if take_max { self.dominates(a, b) } else { self.dominates(b, a) }
        };
        let mut dq: VecDeque<usize> = VecDeque::new();
        let mut next = 0;
        let mut out = Vec::with_capacity(times.len());
        for &t in times {
            let w = window(times, t, i);
            while next < w.end {
                while dq.back().is_some_and(|&j| better(vals[next], vals[j])) {
                    dq.pop_back();
                }
                dq.push_back(next);
                next += 1;
            }
            while dq.front().is_some_and(|&j| j < w.start) {
                dq.pop_front();
            }
            out.push(match dq.front() {
                Some(&j) => vals[j],
                None if take_max => self.bottom(),
                None => self.top(),
            });
        }
        out
    }

    /// `sup_{t1 in t+I} min(rhs(t1), inf_{t2 in [t, t1)} lhs(t2))`, with `first`
    /// the index of the first sample time `>= t`.
    fn until_at(
        &self,
        times: &[f64],
        t: f64,
        first: usize,
        i: &Interval,
        lhs: &[Self::V],
        rhs: &[Self::V],
    ) -> Self::V {
        let w = window(times, t, i);
        let mut best = self.bottom();
        let mut prefix = self.top();
        for j in first..w.end {
            if j >= w.start {
                best = self.join(best, self.meet(rhs[j], prefix));
            }
            prefix = self.meet(prefix, lhs[j]);
        }
        best
    }

    fn eval_at(&self, phi: &Formula, sig: &Signal, t: f64) -> Self::V {
        let times = sig.times();
        let k = times.partition_point(|&s| s < t);
        if k < times.len() && times[k] == t {
            return self.trace(phi, sig)[k];
        }
        match phi {
            Formula::True => self.top(),
            Formula::Pred { index, .. } => {
                let x = sig.value_at(t).expect("checked domain")[*index];
                self.atom(x, phi)
            }
            Formula::Not(p) => self.neg(self.eval_at(p, sig, t)),
            Formula::And(p, q) => self.meet(self.eval_at(p, sig, t), self.eval_at(q, sig, t)),
            Formula::Or(p, q) => self.join(self.eval_at(p, sig, t), self.eval_at(q, sig, t)),
            Formula::Eventually(i, p) => {
                let vals = self.trace(p, sig);
                window(times, t, i).fold(self.bottom(), |acc, j| self.join(acc, vals[j]))
            }
            Formula::Always(i, p) => {
                let vals = self.trace(p, sig);
                window(times, t, i).fold(self.top(), |acc, j| self.meet(acc, vals[j]))
            }
            Formula::Until(i, p, q) => {
                let (lhs, rhs) = (self.trace(p, sig), self.trace(q, sig));
                self.until_at(times, t, k, i, &lhs, &rhs)
            }
        }
    }
}

struct Quantitative;

impl Semantics for Quantitative {
    type V = f64;

    fn top(&self) -> f64 {
        f64::INFINITY
    }

    fn bottom(&self) -> f64 {
        f64::NEG_INFINITY
    }

    fn atom(&self, x: f64, phi: &Formula) -> f64 {
        match phi {
            Formula::Pred { cmp, threshold, .. } if cmp.is_lower_bound() => x - threshold,
            Formula::Pred { threshold, .. } => threshold - x,
            _ => unreachable!("atom called on a non-predicate"),
        }
    }

    fn neg(&self, v: f64) -> f64 {
        -v
    }

    fn meet(&self, a: f64, b: f64) -> f64 {
        a.min(b)
    }

    fn join(&self, a: f64, b: f64) -> f64 {
        a.max(b)
    }

    fn dominates(&self, a: f64, b: f64) -> bool {
        a >= b
    }
}

struct Qualitative;

impl Semantics for Qualitative {
    type V = bool;

    fn top(&self) -> bool {
        true
    }

    fn bottom(&self) -> bool {
        false
    }

    fn atom(&self, x: f64, phi: &Formula) -> bool {
        match phi {
            Formula::Pred { cmp, threshold, .. } => cmp.holds(x, *threshold),
            _ => unreachable!("atom called on a non-predicate"),
        }
    }

    fn neg(&self, v: bool) -> bool {
        !v
    }

    fn meet(&self, a: bool, b: bool) -> bool {
        a && b
    }

    fn join(&self, a: bool, b: bool) -> bool {
        a || b
    }

    fn dominates(&self, a: bool, b: bool) -> bool {
        a >= b
    }
}
