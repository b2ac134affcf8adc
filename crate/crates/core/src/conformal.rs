//! Split conformal prediction around a fitted surrogate, and the region-level
//! verdicts derived from the resulting robustness band.

use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::optimize::{self, OptimizerCfg};
use crate::regress::{Dataset, FittedSurrogate, RegressError, Regressor, Surrogate};
use crate::signal::ParamBox;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConformalError {
    #[error("miscoverage level {0} is not in (0, 1)")]
    InvalidAlpha(f64),
    #[error("split conformal needs at least 4 samples, got {0}")]
    TooFewSamples(usize),
    #[error("alpha = {alpha} is below 2/(m+2) = {min} for m = {m}: the calibration rank exceeds m/2")]
    AlphaTooSmall { alpha: f64, m: usize, min: f64 },
    #[error(transparent)]
    Regress(#[from] RegressError),
}

/// Rank `k = ⌈(m/2 + 1)(1 - α)⌉` of the calibration residual used as the
/// confidence range, for an even sample count `m`.
///
/// Computed as `h - ⌊h α⌋` with `h = m/2 + 1`, where the product `h α` is
/// resolved exactly, so the `k > m/2` rejection fires exactly when
/// `α < 2/(m+2)`.
pub fn calibration_rank(m: usize, alpha: f64) -> Result<usize, ConformalError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(ConformalError::InvalidAlpha(alpha));
    }
    if m < 4 {
        return Err(ConformalError::TooFewSamples(m));
    }
    let h = (m / 2 + 1) as f64;
    let p = h * alpha;
    let err = h.mul_add(alpha, -p);
    let floor = if p.fract() == 0.0 && err < 0.0 { p - 1.0 } else { p.floor() };
    let k = (h - floor) as usize;
    if k > m / 2 {
        return Err(ConformalError::AlphaTooSmall { alpha, m, min: 2.0 / (m as f64 + 2.0) });
    }
    Ok(k)
}

/// The `k`-th smallest of `residuals` (1-based).
pub fn kth_smallest(residuals: &[f64], k: usize) -> f64 {
    assert!(k >= 1 && k <= residuals.len(), "rank {k} out of 1..={}", residuals.len());
    let mut r = residuals.to_vec();
    let (_, kth, _) = r.select_nth_unstable_by(k - 1, f64::total_cmp);
    *kth
}

/// A surrogate with its split-conformal confidence range `d`.
#[derive(Debug, Clone)]
pub struct ConformalModel {
    surrogate: FittedSurrogate,
    d: f64,
    alpha: f64,
    m: usize,
    k: usize,
    fit_idx: Vec<usize>,
    calib_idx: Vec<usize>,
    residuals: Vec<f64>,
}

impl ConformalModel {
    pub fn surrogate(&self) -> &FittedSurrogate {
        &self.surrogate
    }

    pub fn d(&self) -> f64 {
        self.d
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Samples actually used (the input count, minus one if it was odd).
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Indices into the input dataset used to fit the surrogate.
    pub fn fit_indices(&self) -> &[usize] {
        &self.fit_idx
    }

    /// Indices into the input dataset used for calibration.
    pub fn calibration_indices(&self) -> &[usize] {
        &self.calib_idx
    }

    /// `|y - μ̂(x)|` on the calibration half, aligned with
    /// [`Self::calibration_indices`].
    pub fn residuals(&self) -> &[f64] {
        &self.residuals
    }

    /// `[μ̂(θ) - d, μ̂(θ) + d]`.
    pub fn band(&self, theta: &[f64]) -> (f64, f64) {
        let mu = self.surrogate.predict(theta);
        (mu - self.d, mu + self.d)
    }
}

/// Split conformal regression: fit on a random half, calibrate on the other.
///
/// An odd sample count drops one seeded-random sample first.
pub fn conf_int(data: &Dataset, alpha: f64, reg: &Regressor, seed: u64) -> Result<ConformalModel, ConformalError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx: Vec<usize> = (0..data.len()).collect();
    if idx.len() % 2 == 1 {
        let drop = rng.random_range(0..idx.len());
        log::warn!("odd sample count {}: dropping sample {drop}", idx.len());
        idx.remove(drop);
    }
    let m = idx.len();
    let k = calibration_rank(m, alpha)?;
    idx.shuffle(&mut rng);
    let calib_idx = idx.split_off(m / 2);
    let fit_idx = idx;

    let surrogate = reg.fit(&data.subset(&fit_idx), rng.random())?;
    let residuals: Vec<f64> = calib_idx
        .iter()
        .map(|&i| (data.rhos()[i] - surrogate.predict(&data.thetas()[i])).abs())
        .collect();
    let d = kth_smallest(&residuals, k);
    if !d.is_finite() {
        return Err(RegressError::NonFinite("calibration residual".into()).into());
    }
    Ok(ConformalModel { surrogate, d, alpha, m, k, fit_idx, calib_idx, residuals })
}

/// Fraction of `fresh` points inside the conformal band.
pub fn coverage_check(cm: &ConformalModel, fresh: &Dataset) -> f64 {
    coverage_of(&cm.surrogate, cm.d, fresh)
}

pub(crate) fn coverage_of<S: Surrogate + ?Sized>(s: &S, d: f64, fresh: &Dataset) -> f64 {
    let hits = fresh
        .thetas()
        .iter()
        .zip(fresh.rhos())
        .filter(|(t, y)| (*y - s.predict(t)).abs() <= d)
        .count();
    hits as f64 / fresh.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobustnessInterval {
    pub lo: f64,
    pub hi: f64,
    pub alpha: f64,
}

/// Interval plus how it was obtained.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionInterval {
    pub interval: RobustnessInterval,
    /// Lower bound on `min μ̂` over the region (optimum minus padding).
    pub v_min: f64,
    /// Upper bound on `max μ̂` over the region (optimum plus padding).
    pub v_max: f64,
    /// Padding applied to each end by the optimizer.
    pub padding: (f64, f64),
}

/// `[v_min - d, v_max + d]` with `v_min`/`v_max` conservative estimates of
/// the surrogate's extremes over `region`.
pub fn region_interval(cm: &ConformalModel, region: &ParamBox, opt: &OptimizerCfg) -> RegionInterval {
    surrogate_interval(&cm.surrogate, cm.d, cm.alpha, region, opt)
}

pub(crate) fn surrogate_interval<S: Surrogate + ?Sized>(
    s: &S,
    d: f64,
    alpha: f64,
    region: &ParamBox,
    opt: &OptimizerCfg,
) -> RegionInterval {
    let lo = optimize::minimize(|x| s.predict(x), region, opt);
    let hi = optimize::maximize(|x| s.predict(x), region, opt);
    let v_min = lo.value - lo.padding;
    let v_max = hi.value + hi.padding;
    RegionInterval {
        interval: RobustnessInterval { lo: v_min - d, hi: v_max + d, alpha },
        v_min,
        v_max,
        padding: (lo.padding, hi.padding),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Safe,
    Unsafe,
    Unknown,
    /// The region could not be evaluated (simulator failure).
    Failed,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Safe => "safe",
            Verdict::Unsafe => "unsafe",
            Verdict::Unknown => "unknown",
            Verdict::Failed => "failed",
        })
    }
}

/// Safe if the whole interval is above zero, unsafe if below, else unknown.
pub fn classify(iv: &RobustnessInterval) -> Verdict {
    if iv.lo > 0.0 {
        Verdict::Safe
    } else if iv.hi < 0.0 {
        Verdict::Unsafe
    } else {
        Verdict::Unknown
    }
}
