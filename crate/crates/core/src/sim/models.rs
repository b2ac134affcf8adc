use super::ode::Dynamics;

/// Time-reversed van der Pol oscillator, `x1' = -x2`, `x2' = 4 (x1^2 - 1) x2 + x1`.
/// The parameter is the initial state; both states are observed.
#[derive(Debug, Clone, Copy, Default)]
pub struct VanDerPol;

impl Dynamics for VanDerPol {
    fn param_dim(&self) -> usize {
        2
    }

    fn state_dim(&self) -> usize {
        2
    }

    fn output_dim(&self) -> usize {
        2
    }

    fn initial_state(&self, theta: &[f64]) -> Vec<f64> {
        theta.to_vec()
    }

    fn derivative(&self, _t: f64, x: &[f64], dx: &mut [f64]) {
        dx[0] = -x[1];
        dx[1] = 4.0 * (x[0] * x[0] - 1.0) * x[1] + x[0];
    }

    fn observe(&self, x: &[f64], out: &mut Vec<f64>) {
        out.extend_from_slice(x);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Controller {
    /// `u = sign(v)`, with `u = +1` at `v = 0`.
    BangBang,
    /// `u = 0`.
    Off,
}

/// Mountain car, `x' = v`, `v' = -m g cos(3x) + (F/m) u - mu v`.
/// The parameter is the initial `(x, v)`; only the position is observed.
#[derive(Debug, Clone, Copy)]
pub struct MountainCar {
    pub mass: f64,
    pub gravity: f64,
    pub force: f64,
    pub friction: f64,
    pub controller: Controller,
}

impl Default for MountainCar {
    fn default() -> Self {
        Self { mass: 0.2, gravity: 9.8, force: 0.2, friction: 0.5, controller: Controller::BangBang }
    }
}

impl MountainCar {
    pub fn control(&self, v: f64) -> f64 {
        match self.controller {
            Controller::BangBang if v >= 0.0 => 1.0,
            Controller::BangBang => -1.0,
            Controller::Off => 0.0,
        }
    }

    /// Potential whose negative gradient is the gravity term, `m g sin(3x) / 3`.
    pub fn potential(&self, x: f64) -> f64 {
        self.mass * self.gravity * (3.0 * x).sin() / 3.0
    }
}

impl Dynamics for MountainCar {
    fn param_dim(&self) -> usize {
        2
    }

    fn state_dim(&self) -> usize {
        2
    }

    fn output_dim(&self) -> usize {
        1
    }

    fn initial_state(&self, theta: &[f64]) -> Vec<f64> {
        theta.to_vec()
    }

    fn derivative(&self, _t: f64, s: &[f64], ds: &mut [f64]) {
        let (x, v) = (s[0], s[1]);
        ds[0] = v;
        ds[1] = -self.mass * self.gravity * (3.0 * x).cos() + self.force / self.mass * self.control(v)
            - self.friction * v;
    }

    fn observe(&self, s: &[f64], out: &mut Vec<f64>) {
        out.push(s[0]);
    }
}
