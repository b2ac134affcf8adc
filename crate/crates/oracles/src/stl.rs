//! Definitional STL evaluation by direct recursion, plus random corpora.

use rand::Rng;

use cverify::signal::Signal;
use cverify::stl::{Comparator, Formula, Interval};

const EPS: f64 = 1e-9;

fn in_window(s: f64, t: f64, i: &Interval) -> bool {
    s >= t + i.start() - EPS && s <= t + i.end() + EPS
}

fn value(sig: &Signal, t: f64, index: usize) -> f64 {
    let mut k = 0;
    for (j, &s) in sig.times().iter().enumerate() {
        if s <= t {
            k = j;
        }
    }
    sig.sample(k)[index]
}

/// Robustness straight from the recursive definition, with suprema and
/// infima taken over the sample times in each window.
pub fn robustness(phi: &Formula, sig: &Signal, t: f64) -> f64 {
    let times = sig.times();
    match phi {
        Formula::True => f64::INFINITY,
        Formula::Pred { index, cmp, threshold } => match cmp {
            Comparator::Gt | Comparator::Ge => value(sig, t, *index) - threshold,
            Comparator::Lt | Comparator::Le => threshold - value(sig, t, *index),
        },
        Formula::Not(p) => -robustness(p, sig, t),
        Formula::And(p, q) => robustness(p, sig, t).min(robustness(q, sig, t)),
        Formula::Or(p, q) => robustness(p, sig, t).max(robustness(q, sig, t)),
        Formula::Eventually(i, p) => times
            .iter()
            .filter(|&&s| in_window(s, t, i))
            .map(|&s| robustness(p, sig, s))
            .fold(f64::NEG_INFINITY, f64::max),
        Formula::Always(i, p) => times
            .iter()
            .filter(|&&s| in_window(s, t, i))
            .map(|&s| robustness(p, sig, s))
            .fold(f64::INFINITY, f64::min),
        Formula::Until(i, p, q) => times
            .iter()
            .filter(|&&s| in_window(s, t, i))
            .map(|&s| {
                let hold = times
                    .iter()
                    .filter(|&&u| u >= t && u < s)
                    .map(|&u| robustness(p, sig, u))
                    .fold(f64::INFINITY, f64::min);
                robustness(q, sig, s).min(hold)
            })
            .fold(f64::NEG_INFINITY, f64::max),
    }
}

/// Boolean satisfaction from the recursive definition.
pub fn satisfies(phi: &Formula, sig: &Signal, t: f64) -> bool {
    let times = sig.times();
    match phi {
        Formula::True => true,
        Formula::Pred { index, cmp, threshold } => {
            let x = value(sig, t, *index);
            match cmp {
                Comparator::Lt => x < *threshold,
                Comparator::Le => x <= *threshold,
                Comparator::Gt => x > *threshold,
                Comparator::Ge => x >= *threshold,
            }
        }
        Formula::Not(p) => !satisfies(p, sig, t),
        Formula::And(p, q) => satisfies(p, sig, t) && satisfies(q, sig, t),
        Formula::Or(p, q) => satisfies(p, sig, t) || satisfies(q, sig, t),
        Formula::Eventually(i, p) => times.iter().any(|&s| in_window(s, t, i) && satisfies(p, sig, s)),
        Formula::Always(i, p) => times.iter().all(|&s| !in_window(s, t, i) || satisfies(p, sig, s)),
        Formula::Until(i, p, q) => times.iter().any(|&s| {
            in_window(s, t, i)
                && satisfies(q, sig, s)
                && times.iter().all(|&u| !(u >= t && u < s) || satisfies(p, sig, u))
        }),
    }
}

/// Signal with 2 to `max_len` samples on a half-unit time lattice. Values
/// are drawn from a coarse grid half of the time so that ties occur.
pub fn random_signal<R: Rng>(rng: &mut R, max_len: usize, dim: usize) -> Signal {
    let n = rng.random_range(2..=max_len);
    let coarse = rng.random_bool(0.5);
    let mut t = rng.random_range(0..3) as f64 * 0.5;
    let mut times = Vec::with_capacity(n);
    let mut values = Vec::with_capacity(n);
    for _ in 0..n {
        times.push(t);
        t += rng.random_range(1..=3) as f64 * 0.5;
        values.push(
            (0..dim)
                .map(|_| if coarse { rng.random_range(-4..=4) as f64 * 0.5 } else { rng.random_range(-2.0..2.0) })
                .collect(),
        );
    }
    Signal::new(times, values).expect("valid signal")
}

fn random_interval<R: Rng>(rng: &mut R) -> Interval {
    let a = rng.random_range(0..=4) as f64 * 0.5;
    let len = rng.random_range(0..=4) as f64 * 0.5;
    Interval::new(a, a + len).expect("valid interval")
}

/// Random formula of depth at most `depth` over `dim` signal components.
pub fn random_formula<R: Rng>(rng: &mut R, depth: usize, dim: usize) -> Formula {
    if depth == 0 || rng.random_bool(0.2) {
        if rng.random_bool(0.03) {
            return Formula::True;
        }
        let cmp = [Comparator::Lt, Comparator::Le, Comparator::Gt, Comparator::Ge][rng.random_range(0..4)];
        let c = rng.random_range(-4..=4) as f64 * 0.25;
        return Formula::pred(rng.random_range(0..dim), cmp, c);
    }
    let d = depth - 1;
    match rng.random_range(0..7) {
        0 => Formula::not(random_formula(rng, d, dim)),
        1 => Formula::and(random_formula(rng, d, dim), random_formula(rng, d, dim)),
        2 => Formula::or(random_formula(rng, d, dim), random_formula(rng, d, dim)),
        3 => Formula::eventually(random_interval(rng), random_formula(rng, d, dim)),
        4 => Formula::always(random_interval(rng), random_formula(rng, d, dim)),
        _ => Formula::until(random_interval(rng), random_formula(rng, d, dim), random_formula(rng, d, dim)),
    }
}
