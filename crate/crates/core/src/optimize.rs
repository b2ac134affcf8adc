//! Bound-constrained multi-start local search over a parameter box.
//!
//! Starts are a Latin-hypercube design plus the box center and, for up to
//! [`MAX_CORNER_DIM`] dimensions, every corner. The best starts are polished by
//! compass search along the coordinate axes with step halving.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::signal::ParamBox;

/// Corners are only enumerated up to this dimension.
pub const MAX_CORNER_DIM: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerCfg {
    /// Latin-hypercube starts.
    pub starts: usize,
    /// How many of the best starts are polished.
    pub polish: usize,
    /// Polishing stops once every step is below `tol` times its axis width.
    pub tol: f64,
    /// Multiplier on the largest improvement seen in the last polishing
    /// round, used to pad the reported optimum.
    pub safety: f64,
    pub seed: u64,
}

impl Default for OptimizerCfg {
    fn default() -> Self {
        Self { starts: 256, polish: 16, tol: 1e-6, safety: 1.0, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Extremum {
    pub point: Vec<f64>,
    pub value: f64,
    /// Conservative slack: the optimum is reported as `value - padding` for a
    /// minimum (`value + padding` for a maximum).
    pub padding: f64,
    pub evaluations: usize,
}

fn latin_hypercube<R: Rng>(b: &ParamBox, n: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let k = b.dim();
    let mut pts = vec![vec![0.0; k]; n];
    let mut perm: Vec<usize> = (0..n).collect();
    for axis in 0..k {
        perm.shuffle(rng);
        let w = b.upper[axis] - b.lower[axis];
        for (p, &cell) in pts.iter_mut().zip(&perm) {
            let u: f64 = rng.random();
            p[axis] = (b.lower[axis] + (cell as f64 + u) / n as f64 * w).min(b.upper[axis]);
        }
    }
    pts
}

fn corners(b: &ParamBox) -> Vec<Vec<f64>> {
    let k = b.dim();
    if k > MAX_CORNER_DIM {
        return Vec::new();
    }
    (0..1usize << k)
        .map(|mask| (0..k).map(|i| if mask >> i & 1 == 0 { b.lower[i] } else { b.upper[i] }).collect())
        .collect()
}

/// Compass search from `x`. Returns the final value and the improvement made
/// during the finest step size.
fn polish<F: Fn(&[f64]) -> f64>(f: &F, b: &ParamBox, x: &mut [f64], mut fx: f64, tol: f64, evals: &mut usize) -> (f64, f64) {
    let widths = b.diameters();
    let mut step: Vec<f64> = widths.iter().map(|w| 0.25 * w).collect();
    loop {
        let level_start = fx;
        loop {
            let mut improved = false;
            for axis in 0..x.len() {
                for dir in [1.0, -1.0] {
                    let old = x[axis];
                    let cand = (old + dir * step[axis]).clamp(b.lower[axis], b.upper[axis]);
                    if cand == old {
                        continue;
                    }
                    x[axis] = cand;
                    let fc = f(x);
                    *evals += 1;
                    if fc < fx {
                        fx = fc;
                        improved = true;
                        break;
                    }
                    x[axis] = old;
                }
            }
            if !improved {
                break;
            }
        }
        if step.iter().zip(&widths).all(|(s, w)| *s <= tol * w) {
            return (fx, level_start - fx);
        }
        for s in &mut step {
            *s *= 0.5;
        }
    }
}

/// Approximate global minimum of `f` over `b`.
pub fn minimize<F: Fn(&[f64]) -> f64>(f: F, b: &ParamBox, cfg: &OptimizerCfg) -> Extremum {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut starts = latin_hypercube(b, cfg.starts, &mut rng);
    starts.push(b.center());
    starts.extend(corners(b));

    let mut evaluations = 0;
    let mut scored: Vec<(f64, usize)> = starts
        .iter()
        .enumerate()
        .map(|(i, p)| {
            evaluations += 1;
            (f(p), i)
        })
        .collect();
    // NaN sorts last
    scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let mut best_point = starts[scored[0].1].clone();
    let mut best = scored[0].0;
    let mut padding: f64 = 0.0;
    for &(fx, i) in scored.iter().take(cfg.polish.max(1)) {
        let mut x = starts[i].clone();
        let (fx, gain) = polish(&f, b, &mut x, fx, cfg.tol, &mut evaluations);
        padding = padding.max(gain);
        if fx < best {
            best = fx;
            best_point = x;
        }
    }
    Extremum { point: best_point, value: best, padding: padding * cfg.safety, evaluations }
}

/// Approximate global maximum of `f` over `b`.
pub fn maximize<F: Fn(&[f64]) -> f64>(f: F, b: &ParamBox, cfg: &OptimizerCfg) -> Extremum {
    let e = minimize(|x| -f(x), b, cfg);
    Extremum { value: -e.value, ..e }
}
