use super::{check_request, SimError, Simulator};
use crate::signal::Signal;

/// Default fixed integration step (seconds).
pub const DEFAULT_STEP: f64 = 0.01;

/// Right-hand side and observation map of a parameterized ODE.
pub trait Dynamics: Send + Sync {
    fn param_dim(&self) -> usize;
    fn state_dim(&self) -> usize;
    fn output_dim(&self) -> usize;
    fn initial_state(&self, theta: &[f64]) -> Vec<f64>;
    fn derivative(&self, t: f64, x: &[f64], dx: &mut [f64]);
    fn observe(&self, x: &[f64], out: &mut Vec<f64>);
}

/// One classical fourth-order Runge-Kutta step of size `h`, in place.
pub fn rk4_step<D: Dynamics + ?Sized>(dynamics: &D, t: f64, x: &mut [f64], h: f64) {
    let mut scratch = vec![0.0; 5 * x.len()];
    rk4_step_in(dynamics, t, x, h, &mut scratch);
}

/// [`rk4_step`] with caller-provided scratch space of at least `5 * x.len()`.
fn rk4_step_in<D: Dynamics + ?Sized>(dynamics: &D, t: f64, x: &mut [f64], h: f64, scratch: &mut [f64]) {
    let n = x.len();
    let (k1, rest) = scratch.split_at_mut(n);
    let (k2, rest) = rest.split_at_mut(n);
    let (k3, rest) = rest.split_at_mut(n);
    let (k4, tmp) = rest.split_at_mut(n);
    let tmp = &mut tmp[..n];

    dynamics.derivative(t, x, k1);
    for i in 0..n {
        tmp[i] = x[i] + 0.5 * h * k1[i];
    }
    dynamics.derivative(t + 0.5 * h, tmp, k2);
    for i in 0..n {
        tmp[i] = x[i] + 0.5 * h * k2[i];
    }
    dynamics.derivative(t + 0.5 * h, tmp, k3);
    for i in 0..n {
        tmp[i] = x[i] + h * k3[i];
    }
    dynamics.derivative(t + h, tmp, k4);
    for i in 0..n {
        x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
}

/// Fixed-step RK4 integration from `t = 0`, observed at the requested times.
///
/// Each gap between consecutive requested times is covered by the smallest
/// number of equal steps no longer than `step`, so requests on the `step`
/// grid are integrated with exactly `step`.
#[derive(Debug, Clone)]
pub struct OdeSimulator<D> {
    dynamics: D,
    step: f64,
}

impl<D: Dynamics> OdeSimulator<D> {
    pub fn new(dynamics: D, step: f64) -> Self {
        assert!(step > 0.0 && step.is_finite(), "integration step must be positive");
        Self { dynamics, step }
    }

    pub fn dynamics(&self) -> &D {
        &self.dynamics
    }

    pub fn step(&self) -> f64 {
        self.step
    }
}

impl<D: Dynamics> Simulator for OdeSimulator<D> {
    fn param_dim(&self) -> usize {
        self.dynamics.param_dim()
    }

    fn output_dim(&self) -> usize {
        self.dynamics.output_dim()
    }

    fn simulate(&self, theta: &[f64], times: &[f64]) -> Result<Signal, SimError> {
        check_request(self, theta, times)?;
        let mut x = self.dynamics.initial_state(theta);
        let mut scratch = vec![0.0; 5 * x.len()];
        let mut t = 0.0;
        let mut values = Vec::with_capacity(times.len() * self.output_dim());
        for &target in times {
            let gap = target - t;
            if gap > 0.0 {
                let n = ((gap / self.step) - 1e-9).ceil().max(1.0) as usize;
                let h = gap / n as f64;
                for i in 0..n {
                    rk4_step_in(&self.dynamics, t + i as f64 * h, &mut x, h, &mut scratch);
                }
                t = target;
            }
            self.dynamics.observe(&x, &mut values);
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(SimError::Failure(format!("non-finite state for theta {theta:?}")));
        }
        Ok(Signal::from_flat(times.to_vec(), values, self.output_dim())?)
    }
}
