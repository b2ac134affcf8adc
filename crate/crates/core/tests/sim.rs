use cverify::sim::{builtin, rk4_step, sample_times, Dynamics, MountainCar, OdeSimulator, SimError, Simulator, VanDerPol};

fn final_state(h: f64, theta: &[f64], horizon: f64) -> Vec<f64> {
    let sim = OdeSimulator::new(VanDerPol, h);
    let sig = sim.simulate(theta, &[0.0, horizon]).unwrap();
    sig.sample(1).to_vec()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

#[test]
fn rk4_is_fourth_order_on_vdp() {
    let theta = [0.5, 0.2];
    let reference = final_state(0.000625, &theta, 2.0);
    let coarse = dist(&final_state(0.02, &theta, 2.0), &reference);
    let fine = dist(&final_state(0.01, &theta, 2.0), &reference);
    let ratio = coarse / fine;
    assert!((8.0..=32.0).contains(&ratio), "ratio {ratio}");
}

struct Decay;

impl Dynamics for Decay {
    fn param_dim(&self) -> usize {
        1
    }
    fn state_dim(&self) -> usize {
        1
    }
    fn output_dim(&self) -> usize {
        1
    }
    fn initial_state(&self, theta: &[f64]) -> Vec<f64> {
        theta.to_vec()
    }
    fn derivative(&self, _t: f64, x: &[f64], dx: &mut [f64]) {
        dx[0] = -x[0];
    }
    fn observe(&self, x: &[f64], out: &mut Vec<f64>) {
        out.push(x[0]);
    }
}

#[test]
fn single_step_matches_taylor_polynomial() {
    let h: f64 = 0.1;
    let mut x = [1.0];
    rk4_step(&Decay, 0.0, &mut x, h);
    let taylor = 1.0 - h + h * h / 2.0 - h.powi(3) / 6.0 + h.powi(4) / 24.0;
    assert!((x[0] - taylor).abs() < 1e-15);
}

#[test]
fn observation_times_need_not_be_on_step_grid() {
    let sim = OdeSimulator::new(Decay, 0.01);
    let times = [0.0, 0.333, 1.0, 2.5];
    let sig = sim.simulate(&[2.0], &times).unwrap();
    for (i, &t) in times.iter().enumerate() {
        assert!((sig.sample(i)[0] - 2.0 * (-t).exp()).abs() < 1e-9);
    }
}

#[test]
fn rejects_bad_requests() {
    let vdp = builtin("vdp").unwrap();
    assert!(matches!(vdp.simulate(&[0.1], &[0.0, 1.0]), Err(SimError::DimensionMismatch { expected: 2, got: 1 })));
    assert!(matches!(vdp.simulate(&[0.1, 0.1], &[0.0, 1.0, 1.0]), Err(SimError::InvalidTimes(_))));
    assert!(matches!(vdp.simulate(&[0.1, 0.1], &[]), Err(SimError::InvalidTimes(_))));
}

#[test]
fn vdp_escapes_outside_limit_cycle() {
    let vdp = builtin("vdp").unwrap();
    let times = sample_times(10.0, 0.05);
    let inside = vdp.simulate(&[0.2, 0.1], &times).unwrap();
    assert!(inside.sample(inside.len() - 1).iter().all(|v| v.abs() < 0.05));
    assert!(matches!(vdp.simulate(&[2.5, 2.5], &times), Err(SimError::Failure(_))));
}

#[test]
fn mountain_car_energy_decreases_without_control() {
    let car = MountainCar { controller: cverify::sim::Controller::Off, ..MountainCar::default() };
    let energy = |s: &[f64]| s[1] * s[1] / 2.0 + car.potential(s[0]);
    let mut s = [-0.3, 0.4];
    for i in 0..500 {
        let before = energy(&s);
        rk4_step(&car, i as f64 * 0.01, &mut s, 0.01);
        assert!(energy(&s) <= before + 1e-9);
    }
    let sim = OdeSimulator::new(car, 0.01);
    assert_eq!(sim.simulate(&[-0.3, 0.4], &[0.0, 5.0]).unwrap().sample(1), &s[..1]);
}

#[test]
fn sample_grid_covers_horizon() {
    let t = sample_times(10.0, 0.05);
    assert_eq!(t.len(), 201);
    assert_eq!(t[0], 0.0);
    assert!((t[200] - 10.0).abs() < 1e-12);
    assert_eq!(sample_times(1.0, 0.3).len(), 5);
    assert_eq!(sample_times(0.0, 0.1), vec![0.0]);
}
