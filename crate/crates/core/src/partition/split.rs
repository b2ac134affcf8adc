//! Ways of cutting a region into children.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::optimize::{self, OptimizerCfg};
use crate::regress::Posterior;
use crate::signal::ParamBox;

/// Cut points are clamped into this central fraction of each axis.
pub const CENTRAL_FRACTION: f64 = 0.8;

/// Probe-line search for zeros of `μ - σ`.
#[derive(Debug, Clone, PartialEq)]
pub struct RootSearch {
    pub lines_per_axis: usize,
    /// Grid cells per probe line scanned for sign changes.
    pub cells: usize,
    /// Accept a point once `|μ - σ|` is at most this.
    pub tol: f64,
}

impl Default for RootSearch {
    fn default() -> Self {
        Self { lines_per_axis: 8, cells: 32, tol: 1e-3 }
    }
}

/// Clamps each coordinate of `point` into the central [`CENTRAL_FRACTION`] of
/// the corresponding axis.
pub fn clamp_central(b: &ParamBox, point: &[f64]) -> Vec<f64> {
    let margin = 0.5 * (1.0 - CENTRAL_FRACTION);
    point
        .iter()
        .zip(b.lower.iter().zip(&b.upper))
        .map(|(x, (l, u))| {
            let w = u - l;
            x.clamp(l + margin * w, u - margin * w)
        })
        .collect()
}

/// Bisects `b` at the midpoint of an axis drawn uniformly from `axes`
/// (every axis when `axes` is empty).
pub fn split_naive(b: &ParamBox, axes: &[usize], seed: u64) -> Vec<ParamBox> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let axis = if axes.is_empty() { rng.random_range(0..b.dim()) } else { axes[rng.random_range(0..axes.len())] };
    let mid = 0.5 * (b.lower[axis] + b.upper[axis]);
    let (lo, hi) = b.split(axis, mid);
    vec![lo, hi]
}

/// Point of greatest posterior standard deviation, clamped off the faces.
pub fn greatest_uncertainty<P: Posterior + ?Sized>(b: &ParamBox, post: &P, opt: &OptimizerCfg) -> Vec<f64> {
    let best = optimize::maximize(|x| post.stddev(x), b, opt);
    clamp_central(b, &best.point)
}

/// Cuts `b` through `point` on each of `axes` (every axis when empty),
/// giving `2^|axes|` children. Children are ordered by the binary index of
/// their side per cut axis, first axis most significant, lower side 0.
pub fn cut_through(b: &ParamBox, point: &[f64], axes: &[usize]) -> Vec<ParamBox> {
    if axes.is_empty() {
        return b.split_through(point);
    }
    let mut out = vec![b.clone()];
    for &axis in axes {
        out = out
            .into_iter()
            .flat_map(|c| {
                let (lo, hi) = c.split(axis, point[axis]);
                [lo, hi]
            })
            .collect();
    }
    out
}

/// Children cut through the point of greatest uncertainty on each of `axes`
/// (every axis when empty).
pub fn split_greatest_uncertainty<P: Posterior + ?Sized>(
    b: &ParamBox,
    axes: &[usize],
    post: &P,
    opt: &OptimizerCfg,
) -> Vec<ParamBox> {
    cut_through(b, &greatest_uncertainty(b, post, opt), axes)
}

fn bisect<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, mut fa: f64, tol: f64) -> Option<f64> {
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        let fm = f(mid);
        if fm.abs() <= tol {
            return Some(mid);
        }
        if mid <= a || mid >= b {
            return None;
        }
        if (fm < 0.0) == (fa < 0.0) {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
    }
    None
}

/// Searches seeded axis-parallel lines through `b` for points where
/// `|μ - σ| <= tol` and returns the one with the largest `σ`.
pub fn find_root<P: Posterior + ?Sized>(b: &ParamBox, post: &P, rs: &RootSearch, seed: u64) -> Option<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let acq = |x: &[f64]| post.predict(x) - post.stddev(x);
    let cells = rs.cells.max(1);
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut consider = |x: Vec<f64>| {
        let s = post.stddev(&x);
        if best.as_ref().is_none_or(|(bs, _)| s > *bs) {
            best = Some((s, x));
        }
    };
    for axis in 0..b.dim() {
        for _ in 0..rs.lines_per_axis {
            let mut x: Vec<f64> = (0..b.dim()).map(|i| rng.random_range(b.lower[i]..=b.upper[i])).collect();
            let (l, u) = (b.lower[axis], b.upper[axis]);
            let at = |x: &mut Vec<f64>, t: f64| {
                x[axis] = t;
                acq(x)
            };
            let grid: Vec<f64> = (0..=cells).map(|i| l + (u - l) * i as f64 / cells as f64).collect();
            let vals: Vec<f64> = grid.iter().map(|&t| at(&mut x, t)).collect();
            for i in 0..=cells {
                if vals[i].abs() <= rs.tol {
                    x[axis] = grid[i];
                    consider(x.clone());
                } else if i < cells && vals[i + 1].abs() > rs.tol && (vals[i] < 0.0) != (vals[i + 1] < 0.0) {
                    let mut y = x.clone();
                    let f = |t: f64| {
                        y[axis] = t;
                        acq(&y)
                    };
                    if let Some(t) = bisect(f, grid[i], grid[i + 1], vals[i], rs.tol) {
                        x[axis] = t;
                        consider(x.clone());
                    }
                }
            }
        }
    }
    best.map(|(_, x)| x)
}

/// Cuts through a zero of `μ - σ`, falling back to the greatest-uncertainty
/// split when none is found.
pub fn split_root<P: Posterior + ?Sized>(
    b: &ParamBox,
    axes: &[usize],
    post: &P,
    opt: &OptimizerCfg,
    rs: &RootSearch,
    seed: u64,
) -> Vec<ParamBox> {
    match find_root(b, post, rs, seed) {
        Some(x) => cut_through(b, &clamp_central(b, &x), axes),
        None => split_greatest_uncertainty(b, axes, post, opt),
    }
}
