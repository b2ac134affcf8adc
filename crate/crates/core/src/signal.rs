//! Sampled trajectories, parameter boxes and the sampling distributions
//! placed on them.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use thiserror::Error;

/// Consecutive rejections tolerated by the truncated-Gaussian sampler
/// before it gives up on a draw.
pub const MAX_REJECTIONS: u64 = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SignalError {
    #[error("signal has no samples")]
    Empty,
    #[error("sample times must be strictly increasing (index {0})")]
    NonIncreasingTimes(usize),
    #[error("first sample time {0} is negative")]
    NegativeStart(f64),
    #[error("{times} time points but {values} value vectors")]
    LengthMismatch { times: usize, values: usize },
    #[error("value vector {index} has dimension {got}, expected {expected}")]
    DimensionMismatch { index: usize, expected: usize, got: usize },
    #[error("time {t} outside signal domain [{start}, {end}]")]
    OutOfDomain { t: f64, start: f64, end: f64 },
    #[error("invalid parameter box: {0}")]
    InvalidBox(String),
    #[error("sub-box exceeds the distribution support on axis {axis}")]
    SubsetNotContained { axis: usize },
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("rejection sampler stalled after {0} consecutive rejections")]
    RejectionStall(u64),
}

/// A finite sequence of `(time, vector)` samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    times: Vec<f64>,
    values: Vec<f64>,
    dim: usize,
}

impl Signal {
    pub fn new(times: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self, SignalError> {
        if times.len() != values.len() {
            return Err(SignalError::LengthMismatch { times: times.len(), values: values.len() });
        }
        let dim = values.first().map_or(0, Vec::len);
        let mut flat = Vec::with_capacity(dim * values.len());
        for (index, v) in values.iter().enumerate() {
            if v.len() != dim {
                return Err(SignalError::DimensionMismatch { index, expected: dim, got: v.len() });
            }
            flat.extend_from_slice(v);
        }
        Self::from_flat(times, flat, dim)
    }

    /// Builds a signal from row-major values, `dim` entries per time point.
    pub fn from_flat(times: Vec<f64>, values: Vec<f64>, dim: usize) -> Result<Self, SignalError> {
        if times.is_empty() {
            return Err(SignalError::Empty);
        }
        if values.len() != times.len() * dim {
            return Err(SignalError::LengthMismatch {
                times: times.len(),
                values: if dim == 0 { 0 } else { values.len() / dim },
            });
        }
        if !(times[0] >= 0.0) {
            return Err(SignalError::NegativeStart(times[0]));
        }
        if let Some(i) = times.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(SignalError::NonIncreasingTimes(i + 1));
        }
        Ok(Self { times, values, dim })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn start(&self) -> f64 {
        self.times[0]
    }

    pub fn end(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    /// Value vector of the `i`-th sample.
    pub fn sample(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    /// Index of the greatest sample time `<= t`.
    pub fn index_at(&self, t: f64) -> Result<usize, SignalError> {
        if !(t >= self.start() && t <= self.end()) {
            return Err(SignalError::OutOfDomain { t, start: self.start(), end: self.end() });
        }
        Ok(self.times.partition_point(|&s| s <= t) - 1)
    }

    /// Piecewise-constant lookup: the value at the greatest sample time `<= t`.
    pub fn value_at(&self, t: f64) -> Result<&[f64], SignalError> {
        self.index_at(t).map(|i| self.sample(i))
    }
}

/// Axis-aligned box in parameter space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub names: Option<Vec<String>>,
}

impl ParamBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, SignalError> {
        let b = Self { lower, upper, names: None };
        b.validate()?;
        Ok(b)
    }

    pub fn with_names(mut self, names: Vec<String>) -> Result<Self, SignalError> {
        if names.len() != self.dim() {
            return Err(SignalError::InvalidBox(format!(
                "{} names for a {}-dimensional box",
                names.len(),
                self.dim()
            )));
        }
        self.names = Some(names);
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), SignalError> {
        if self.lower.is_empty() {
            return Err(SignalError::InvalidBox("zero dimensions".into()));
        }
        if self.lower.len() != self.upper.len() {
            return Err(SignalError::InvalidBox(format!(
                "{} lower bounds but {} upper bounds",
                self.lower.len(),
                self.upper.len()
            )));
        }
        for (i, (l, u)) in self.lower.iter().zip(&self.upper).enumerate() {
            if !(l.is_finite() && u.is_finite() && l < u) {
                return Err(SignalError::InvalidBox(format!("axis {i}: need finite {l} < {u}")));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn diameters(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(l, u)| u - l).collect()
    }

    pub fn volume(&self) -> f64 {
        self.diameters().iter().product()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(l, u)| 0.5 * (l + u)).collect()
    }

    pub fn contains(&self, theta: &[f64]) -> bool {
        theta.len() == self.dim()
            && theta
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(x, (l, u))| *l <= *x && *x <= *u)
    }

    /// First axis on which `other` sticks out of `self`, if any.
    pub fn first_axis_not_containing(&self, other: &ParamBox) -> Option<usize> {
        if other.dim() != self.dim() {
            return Some(0);
        }
        (0..self.dim()).find(|&i| other.lower[i] < self.lower[i] || other.upper[i] > self.upper[i])
    }

    pub fn contains_box(&self, other: &ParamBox) -> bool {
        self.first_axis_not_containing(other).is_none()
    }

    /// Cuts the box at `value` along `axis`, returning the lower and upper halves.
    pub fn split(&self, axis: usize, value: f64) -> (ParamBox, ParamBox) {
        let mut lo = self.clone();
        let mut hi = self.clone();
        lo.upper[axis] = value;
        hi.lower[axis] = value;
        (lo, hi)
    }

    /// Grid cut through `point` on every axis, producing `2^k` children ordered
    /// by the binary index of (above/below) per axis, axis 0 most significant.
    pub fn split_through(&self, point: &[f64]) -> Vec<ParamBox> {
        let k = self.dim();
        (0..1usize << k)
            .map(|mask| {
                let mut child = self.clone();
                for axis in 0..k {
                    if mask >> (k - 1 - axis) & 1 == 0 {
                        child.upper[axis] = point[axis];
                    } else {
                        child.lower[axis] = point[axis];
                    }
                }
                child
            })
            .collect()
    }
}

impl fmt::Display for ParamBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (l, u)) in self.lower.iter().zip(&self.upper).enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{l}:{u}")?;
        }
        Ok(())
    }
}

/// Parses the `l0:u0,l1:u1,...` notation.
impl FromStr for ParamBox {
    type Err = SignalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut lower = Vec::new();
        let mut upper = Vec::new();
        for part in s.split(',') {
            let (l, u) = part
                .trim()
                .split_once(':')
                .ok_or_else(|| SignalError::InvalidBox(format!("expected lo:hi, got {part:?}")))?;
            let parse = |x: &str| {
                x.trim()
                    .parse::<f64>()
                    .map_err(|e| SignalError::InvalidBox(format!("{x:?}: {e}")))
            };
            lower.push(parse(l)?);
            upper.push(parse(u)?);
        }
        ParamBox::new(lower, upper)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DistributionKind {
    Uniform,
    /// Axis-independent Gaussian truncated to the support.
    TruncatedGaussian { mean: Vec<f64>, std: Vec<f64> },
}

/// A probability distribution over parameter vectors, supported on a box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    pub kind: DistributionKind,
    pub support: ParamBox,
}

fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// `P(a <= Z <= b)` for a standard normal `Z`, evaluated on the tail side
/// that avoids cancellation.
fn std_normal_mass(a: f64, b: f64) -> f64 {
    let s = std::f64::consts::SQRT_2;
    if a >= 0.0 {
        0.5 * (erfc(a / s) - erfc(b / s))
    } else if b <= 0.0 {
        0.5 * (erfc(-b / s) - erfc(-a / s))
    } else {
        1.0 - 0.5 * (erfc(-a / s) + erfc(b / s))
    }
}

impl Distribution {
    pub fn uniform(support: ParamBox) -> Self {
        Self { kind: DistributionKind::Uniform, support }
    }

    pub fn truncated_gaussian(
        mean: Vec<f64>,
        std: Vec<f64>,
        support: ParamBox,
    ) -> Result<Self, SignalError> {
        let d = Self { kind: DistributionKind::TruncatedGaussian { mean, std }, support };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<(), SignalError> {
        self.support.validate()?;
        if let DistributionKind::TruncatedGaussian { mean, std } = &self.kind {
            let k = self.support.dim();
            if mean.len() != k || std.len() != k {
                return Err(SignalError::InvalidDistribution(format!(
                    "mean/std must have {k} entries"
                )));
            }
            if std.iter().any(|s| !(s.is_finite() && *s > 0.0)) || mean.iter().any(|m| !m.is_finite()) {
                return Err(SignalError::InvalidDistribution(
                    "std must be positive and finite, mean finite".into(),
                ));
            }
            if self.normalizer() <= 0.0 {
                return Err(SignalError::InvalidDistribution(
                    "support carries no Gaussian mass".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.support.dim()
    }

    /// Probability mass of the untruncated law inside the support.
    fn normalizer(&self) -> f64 {
        match &self.kind {
            DistributionKind::Uniform => 1.0,
            DistributionKind::TruncatedGaussian { mean, std } => (0..self.dim())
                .map(|i| {
                    std_normal_mass(
                        (self.support.lower[i] - mean[i]) / std[i],
                        (self.support.upper[i] - mean[i]) / std[i],
                    )
                })
                .product(),
        }
    }

    pub fn density(&self, theta: &[f64]) -> f64 {
        if !self.support.contains(theta) {
            return 0.0;
        }
        match &self.kind {
            DistributionKind::Uniform => 1.0 / self.support.volume(),
            DistributionKind::TruncatedGaussian { mean, std } => {
                let raw: f64 = (0..self.dim())
                    .map(|i| std_normal_pdf((theta[i] - mean[i]) / std[i]) / std[i])
                    .product();
                raw / self.normalizer()
            }
        }
    }

    /// Probability that a draw lands in `sub` (clipped to the support).
    pub fn mass(&self, sub: &ParamBox) -> f64 {
        let k = self.dim();
        let clipped: Vec<(f64, f64)> = (0..k)
            .map(|i| (sub.lower[i].max(self.support.lower[i]), sub.upper[i].min(self.support.upper[i])))
            .collect();
        if clipped.iter().any(|(l, u)| l >= u) {
            return 0.0;
        }
        match &self.kind {
            DistributionKind::Uniform => clipped
                .iter()
                .zip(self.support.diameters())
                .map(|((l, u), w)| (u - l) / w)
                .product(),
            DistributionKind::TruncatedGaussian { mean, std } => {
                let raw: f64 = clipped
                    .iter()
                    .enumerate()
                    .map(|(i, (l, u))| std_normal_mass((l - mean[i]) / std[i], (u - mean[i]) / std[i]))
                    .product();
                raw / self.normalizer()
            }
        }
    }

    /// The distribution conditioned on `sub`: density `f / ∫_sub f` on `sub`,
    /// zero elsewhere.
    pub fn restrict(&self, sub: &ParamBox) -> Result<Distribution, SignalError> {
        sub.validate()?;
        if let Some(axis) = self.support.first_axis_not_containing(sub) {
            return Err(SignalError::SubsetNotContained { axis });
        }
        let d = Distribution { kind: self.kind.clone(), support: sub.clone() };
        d.validate()?;
        Ok(d)
    }

    /// Draws `m` i.i.d. points; deterministic in `seed`.
    pub fn sample(&self, m: usize, seed: u64) -> Result<Vec<Vec<f64>>, SignalError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..m).map(|_| self.draw(&mut rng)).collect()
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<f64>, SignalError> {
        let b = &self.support;
        match &self.kind {
            DistributionKind::Uniform => Ok((0..b.dim())
                .map(|i| {
                    let u: f64 = rng.random();
                    // u in [0, 1): guard the rounding of l + u (h - l) past h
                    (b.lower[i] + u * (b.upper[i] - b.lower[i])).min(b.upper[i])
                })
                .collect()),
            DistributionKind::TruncatedGaussian { mean, std } => (0..b.dim())
                .map(|i| {
                    let mut rejected = 0u64;
                    loop {
                        let z: f64 = rng.sample(StandardNormal);
                        let x = mean[i] + std[i] * z;
                        if b.lower[i] <= x && x <= b.upper[i] {
                            return Ok(x);
                        }
                        rejected += 1;
                        if rejected >= MAX_REJECTIONS {
                            return Err(SignalError::RejectionStall(rejected));
                        }
                    }
                })
                .collect(),
        }
    }
}
