//! Deterministic black-box simulators: the bundled ODE benchmarks and a
//! subprocess client for external models.

mod external;
mod models;
mod ode;

use thiserror::Error;

use crate::signal::{Signal, SignalError};

pub use external::{ExternalSimulator, DEFAULT_TIMEOUT};
pub use models::{Controller, MountainCar, VanDerPol};
pub use ode::{rk4_step, Dynamics, OdeSimulator, DEFAULT_STEP};

/// Sampling period used when the caller does not pick one.
pub const DEFAULT_SAMPLE_PERIOD: f64 = 0.05;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("expected a {expected}-dimensional parameter, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid sample times: {0}")]
    InvalidTimes(String),
    #[error("simulator failure: {0}")]
    Failure(String),
    #[error("unknown model {0:?} (expected one of: vdp, mountain-car)")]
    UnknownModel(String),
    #[error(transparent)]
    Signal(#[from] SignalError),
}

/// A deterministic map from a parameter vector to a trajectory sampled at the
/// requested times.
pub trait Simulator: Send + Sync {
    /// Parameter dimension `k`.
    fn param_dim(&self) -> usize;
    /// Output dimension `n`.
    fn output_dim(&self) -> usize;
    fn simulate(&self, theta: &[f64], times: &[f64]) -> Result<Signal, SimError>;
}

impl<S: Simulator + ?Sized> Simulator for Box<S> {
    fn param_dim(&self) -> usize {
        (**self).param_dim()
    }

    fn output_dim(&self) -> usize {
        (**self).output_dim()
    }

    fn simulate(&self, theta: &[f64], times: &[f64]) -> Result<Signal, SimError> {
        (**self).simulate(theta, times)
    }
}

pub(crate) fn check_request(sim: &dyn Simulator, theta: &[f64], times: &[f64]) -> Result<(), SimError> {
    if theta.len() != sim.param_dim() {
        return Err(SimError::DimensionMismatch { expected: sim.param_dim(), got: theta.len() });
    }
    if times.is_empty() {
        return Err(SimError::InvalidTimes("no sample times".into()));
    }
    if !(times[0] >= 0.0) {
        return Err(SimError::InvalidTimes(format!("first time {} is negative", times[0])));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) || times.iter().any(|t| !t.is_finite()) {
        return Err(SimError::InvalidTimes("times must be finite and strictly increasing".into()));
    }
    Ok(())
}

/// Uniform sample grid `0, dt, 2 dt, ...` covering `[0, horizon]`.
pub fn sample_times(horizon: f64, dt: f64) -> Vec<f64> {
    let n = (horizon / dt - 1e-9).ceil().max(0.0) as usize;
    (0..=n).map(|i| i as f64 * dt).collect()
}

/// Looks up a bundled benchmark model.
pub fn builtin(name: &str) -> Result<Box<dyn Simulator>, SimError> {
    match name {
        "vdp" => Ok(Box::new(OdeSimulator::new(VanDerPol, DEFAULT_STEP))),
        "mountain-car" => Ok(Box::new(OdeSimulator::new(MountainCar::default(), DEFAULT_STEP))),
        other => Err(SimError::UnknownModel(other.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_dimensions() {
        let vdp = builtin("vdp").unwrap();
        assert_eq!((vdp.param_dim(), vdp.output_dim()), (2, 2));
        let mc = builtin("mountain-car").unwrap();
        assert_eq!((mc.param_dim(), mc.output_dim()), (2, 1));
        assert!(matches!(builtin("f16"), Err(SimError::UnknownModel(_))));
    }

    #[test]
    fn sample_grid_reaches_horizon() {
        let t = sample_times(10.0, 0.05);
        assert_eq!(t.len(), 201);
        assert!((t[200] - 10.0).abs() < 1e-12);
        assert_eq!(sample_times(0.0, 0.05), vec![0.0]);
    }

    #[test]
    fn request_validation() {
        let vdp = builtin("vdp").unwrap();
        assert!(matches!(
            vdp.simulate(&[0.0], &[0.0]),
            Err(SimError::DimensionMismatch { expected: 2, got: 1 })
        ));
        assert!(matches!(vdp.simulate(&[0.0, 0.0], &[0.0, 0.0]), Err(SimError::InvalidTimes(_))));
    }
}
