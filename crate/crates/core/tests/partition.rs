use cverify::conformal::Verdict;
use cverify::partition::{self, verify, verify_observed, DeltaMinPolicy, LabeledRegion, PartitionConfig, Region, StopRule, Strategy};
use cverify::signal::{Distribution, ParamBox, Signal};
use cverify::sim::{SimError, Simulator};
use cverify::stl::{self, Formula};

/// Outputs the parameters themselves, held constant over time.
struct Identity;

impl Simulator for Identity {
    fn param_dim(&self) -> usize {
        2
    }
    fn output_dim(&self) -> usize {
        2
    }
    fn simulate(&self, theta: &[f64], times: &[f64]) -> Result<Signal, SimError> {
        Ok(Signal::new(times.to_vec(), vec![theta.to_vec(); times.len()])?)
    }
}

/// Fails on a small patch of the frontier of `kinked`.
struct Flaky;

impl Simulator for Flaky {
    fn param_dim(&self) -> usize {
        2
    }
    fn output_dim(&self) -> usize {
        2
    }
    fn simulate(&self, theta: &[f64], times: &[f64]) -> Result<Signal, SimError> {
        if (theta[0] - 0.3).abs() < 0.02 && theta[1] < 0.1 {
            return Err(SimError::Failure("diverged".into()));
        }
        Identity.simulate(theta, times)
    }
}

fn unit_square() -> Distribution {
    Distribution::uniform(ParamBox::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap())
}

fn config(strategy: Strategy) -> PartitionConfig {
    PartitionConfig {
        strategy,
        sims_per_region: 40,
        stop: StopRule::Absolute(0.1),
        max_regions: 400,
        workers: 1,
        ..PartitionConfig::default()
    }
}

fn overlap(a: &ParamBox, b: &ParamBox) -> f64 {
    (0..a.dim())
        .map(|i| (a.upper[i].min(b.upper[i]) - a.lower[i].max(b.lower[i])).max(0.0))
        .product()
}

fn assert_tiles(root: &ParamBox, boxes: &[&ParamBox]) {
    let total: f64 = boxes.iter().map(|b| b.volume()).sum();
    assert!((total - root.volume()).abs() <= 1e-9 * root.volume(), "volume {total}");
    for (i, a) in boxes.iter().enumerate() {
        assert!(root.contains_box(a));
        for b in &boxes[i + 1..] {
            assert!(overlap(a, b) <= 1e-12 * root.volume(), "{a} overlaps {b}");
        }
    }
}

fn kinked() -> Formula {
    stl::parse("G[0,1] (x0 > 0.3 or x1 > 0.6)").unwrap()
}

#[test]
fn every_wave_tiles_the_root() {
    let root = unit_square();
    for strategy in [Strategy::Naive, Strategy::GreatestUncertainty, Strategy::RootSplit] {
        let mut waves = 0;
        let res = verify_observed(&Identity, &kinked(), &root, &config(strategy), |done: &[LabeledRegion], todo: &[Region]| {
            let boxes: Vec<&ParamBox> = done.iter().map(|r| &r.bounds).chain(todo.iter().map(|r| &r.bounds)).collect();
            assert_tiles(&root.support, &boxes);
            waves += 1;
        })
        .unwrap();
        assert!(waves > 2, "{strategy}: {waves} waves");
        let boxes: Vec<&ParamBox> = res.regions.iter().map(|r| &r.bounds).collect();
        assert_tiles(&root.support, &boxes);
        let sum: f64 = [Verdict::Safe, Verdict::Unsafe, Verdict::Unknown, Verdict::Failed]
            .iter()
            .map(|&v| res.volume_fraction(v))
            .sum();
        assert!((sum - 1.0).abs() < 1e-9);
        assert!(res.count(Verdict::Safe) > 0 && res.count(Verdict::Unsafe) > 0, "{strategy}");
    }
}

#[test]
fn results_do_not_depend_on_worker_count() {
    let root = unit_square();
    for strategy in [Strategy::Naive, Strategy::GreatestUncertainty, Strategy::RootSplit] {
        let one = verify(&Identity, &kinked(), &root, &config(strategy)).unwrap();
        let four = verify(&Identity, &kinked(), &root, &PartitionConfig { workers: 4, ..config(strategy) }).unwrap();
        assert_eq!(partition::to_json(&one), partition::to_json(&four));
        let other_seed = verify(&Identity, &kinked(), &root, &PartitionConfig { seed: 9, ..config(strategy) }).unwrap();
        assert_ne!(partition::to_json(&one), partition::to_json(&other_seed));
    }
}

#[test]
fn constant_requirements_need_one_region() {
    let root = unit_square();
    for (spec, verdict) in [("G[0,1] (x0 > -1)", Verdict::Safe), ("G[0,1] (x0 > 2)", Verdict::Unsafe)] {
        let phi = stl::parse(spec).unwrap();
        let res = verify(&Identity, &phi, &root, &config(Strategy::GreatestUncertainty)).unwrap();
        assert_eq!(res.regions.len(), 1, "{spec}");
        assert_eq!(res.regions[0].verdict, verdict);
        assert_eq!(res.regions[0].id(), "0");
        assert_eq!(res.total_sims, 40);
    }
}

#[test]
fn unknown_regions_are_below_the_size_threshold() {
    let root = unit_square();
    for strategy in [Strategy::Naive, Strategy::GreatestUncertainty, Strategy::RootSplit] {
        let cfg = config(strategy);
        let res = verify(&Identity, &kinked(), &root, &cfg).unwrap();
        assert!(!res.exhausted);
        for r in res.regions.iter().filter(|r| r.verdict == Verdict::Unknown) {
            assert!(cfg.stop.is_small(&r.bounds, &root.support), "{} is {:?}", r.id(), r.bounds.diameters());
        }
        for r in &res.regions {
            let iv = r.interval.expect("evaluated");
            assert!(iv.lo <= iv.hi);
            assert_eq!(r.depth + 1, r.path.len());
        }
    }
}

#[test]
fn counterexample_policy_marks_small_regions_unsafe() {
    let root = unit_square();
    let cfg = PartitionConfig { delta_min_policy: DeltaMinPolicy::CounterexampleUnsafe, ..config(Strategy::Naive) };
    let res = verify(&Identity, &kinked(), &root, &cfg).unwrap();
    let phi = kinked();
    let flagged: Vec<_> = res.regions.iter().filter(|r| r.counterexample.is_some()).collect();
    assert!(!flagged.is_empty());
    for r in flagged {
        assert_eq!(r.verdict, Verdict::Unsafe);
        let theta = r.counterexample.as_ref().unwrap();
        assert!(r.bounds.contains(theta));
        let sig = Identity.simulate(theta, &[0.0, 1.0]).unwrap();
        assert!(stl::robustness(&phi, &sig, 0.0).unwrap() < 0.0);
    }
    let default = verify(&Identity, &kinked(), &root, &config(Strategy::Naive)).unwrap();
    assert!(res.volume_fraction(Verdict::Unknown) < default.volume_fraction(Verdict::Unknown));
}

#[test]
fn budget_is_respected() {
    let root = unit_square();
    let cfg = PartitionConfig { max_regions: 12, ..config(Strategy::GreatestUncertainty) };
    let res = verify(&Identity, &kinked(), &root, &cfg).unwrap();
    assert!(res.exhausted);
    assert!(res.regions.len() <= 12);
    assert_eq!(res.total_sims, res.regions.iter().map(|r| r.sims_used).sum::<usize>());
    let boxes: Vec<&ParamBox> = res.regions.iter().map(|r| &r.bounds).collect();
    assert_tiles(&root.support, &boxes);
}

#[test]
fn simulator_failures_are_isolated() {
    let root = unit_square();
    let res = verify(&Flaky, &kinked(), &root, &config(Strategy::Naive)).unwrap();
    let failed: Vec<_> = res.regions.iter().filter(|r| r.verdict == Verdict::Failed).collect();
    assert!(!failed.is_empty());
    for r in &failed {
        assert!(r.interval.is_none());
        assert!(r.error.as_deref().unwrap().contains("diverged"));
        assert!(r.bounds.lower[0] < 0.32 && r.bounds.upper[0] > 0.28 && r.bounds.lower[1] < 0.1);
    }
    assert!(res.count(Verdict::Failed) < res.regions.len());
}

#[test]
fn results_are_in_path_order() {
    let res = verify(&Identity, &kinked(), &unit_square(), &config(Strategy::GreatestUncertainty)).unwrap();
    for w in res.regions.windows(2) {
        assert!(w[0].path < w[1].path);
    }
    assert!(res.locate(&[0.9, 0.9]).is_some());
    assert!(res.locate(&[1.5, 0.9]).is_none());
}

#[test]
fn safe_union_sampling_stays_safe() {
    let root = unit_square();
    let res = verify(&Identity, &kinked(), &root, &config(Strategy::GreatestUncertainty)).unwrap();
    let pts = res.sample_union(&root, Verdict::Safe, 500, 4).unwrap().unwrap();
    assert_eq!(pts.len(), 500);
    for p in &pts {
        assert_eq!(res.locate(p).unwrap().verdict, Verdict::Safe);
    }
    assert!(res.sample_union(&root, Verdict::Failed, 10, 4).unwrap().is_none());
}

#[test]
fn mismatched_dimensions_are_rejected() {
    let three = Distribution::uniform(ParamBox::new(vec![0.0; 3], vec![1.0; 3]).unwrap());
    assert!(verify(&Identity, &kinked(), &three, &config(Strategy::Naive)).is_err());
    let phi = stl::parse("x2 > 0").unwrap();
    assert!(verify(&Identity, &phi, &unit_square(), &config(Strategy::Naive)).is_err());
    let bad = PartitionConfig { sims_per_region: 7, ..config(Strategy::Naive) };
    assert!(verify(&Identity, &kinked(), &unit_square(), &bad).is_err());
}
