//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the test fails if any criterion does.

use std::fs;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cverify::conformal::{conf_int, coverage_check, ConformalError, Verdict};
use cverify::partition::{verify, verify_observed, PartitionConfig, PartitionResult, StopRule, Strategy};
use cverify::regress::{gp, Dataset, Kernel, Mlp, Posterior, Regressor, Surrogate};
use cverify::signal::{Distribution, ParamBox, Signal};
use cverify::sim::{builtin, sample_times, ExternalSimulator, OdeSimulator, SimError, Simulator, VanDerPol};
use cverify::stl::{self, Formula};
use cverify_oracles::{conformal as conformal_oracle, gp as gp_oracle, stl as stl_oracle};

const BIN: &str = env!("CARGO_BIN_EXE_cverify");
const SIM: &str = env!("CARGO_BIN_EXE_cverify-sim");

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok { Ok(detail) } else { Err(detail) }
}

struct Corpus {
    pairs: Vec<(Formula, Signal, Vec<f64>)>,
}

/// 1000 formula/signal pairs, each with at least one evaluation time whose
/// horizon fits inside the signal.
fn corpus() -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut pairs = Vec::with_capacity(1000);
    while pairs.len() < 1000 {
        let dim = rng.random_range(1..=3);
        let sig = stl_oracle::random_signal(&mut rng, 25, dim);
        let phi = stl_oracle::random_formula(&mut rng, 3, dim);
        let times: Vec<f64> = sig.times().iter().copied().filter(|&t| t + phi.horizon() <= sig.end()).collect();
        if !times.is_empty() {
            pairs.push((phi, sig, times));
        }
    }
    Corpus { pairs }
}

fn stl_oracle_equivalence(c: &Corpus) -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut evaluations = 0;
    let mut mismatches = 0;
    for (phi, sig, times) in &c.pairs {
        for &t in times {
            let got = stl::robustness(phi, sig, t).map_err(|e| format!("{phi}: {e}"))?;
            let want = stl_oracle::robustness(phi, sig, t);
            let diff = if got == want { 0.0 } else { (got - want).abs() };
            if !(diff <= 1e-12) {
                mismatches += 1;
            }
            worst = worst.max(if diff.is_nan() { f64::INFINITY } else { diff });
            evaluations += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    check(
        mismatches == 0 && secs < 10.0,
        format!("{} pairs, {evaluations} evaluations, max |diff| {worst:e}, {mismatches} mismatches, {secs:.2} s", c.pairs.len()),
    )
}

fn robustness_soundness(c: &Corpus) -> Outcome {
    let mut decided = 0;
    let mut disagreements = 0;
    for (phi, sig, times) in &c.pairs {
        for &t in times {
            let rho = stl::robustness(phi, sig, t).map_err(|e| e.to_string())?;
            if rho.abs() <= 1e-9 {
                continue;
            }
            decided += 1;
            let sat = stl::satisfies(phi, sig, t).map_err(|e| e.to_string())?;
            if (rho > 0.0) != sat || sat != stl_oracle::satisfies(phi, sig, t) {
                disagreements += 1;
            }
        }
    }
    check(disagreements == 0, format!("{decided} evaluations with |rho| > 1e-9, {disagreements} sign disagreements"))
}

fn synthetic(rng: &mut ChaCha8Rng, n: usize) -> Dataset {
    let xs: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random::<f64>(), rng.random::<f64>()]).collect();
    let ys = xs.iter().map(|x| (2.0 * std::f64::consts::PI * x[0]).sin() * x[1]).collect();
    Dataset::new(xs, ys).expect("valid data")
}

fn conformal_coverage() -> Outcome {
    let start = Instant::now();
    let reg: Regressor = "gp".parse().expect("gp");
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let reps = 500;
    let mut total = 0.0;
    for seed in 0..reps {
        let data = synthetic(&mut rng, 200);
        let fresh = synthetic(&mut rng, 500);
        let cm = conf_int(&data, 0.1, &reg, seed).map_err(|e| e.to_string())?;
        total += coverage_check(&cm, &fresh);
    }
    let mean = total / reps as f64;
    let secs = start.elapsed().as_secs_f64();
    check(
        (0.88..=0.97).contains(&mean) && secs < 120.0,
        format!("mean coverage {mean:.4} over {reps} repetitions (alpha 0.1, m 200), {secs:.1} s"),
    )
}

fn adjacent(a: f64) -> [f64; 3] {
    [f64::from_bits(a.to_bits() - 1), a, f64::from_bits(a.to_bits() + 1)]
}

fn rank_exactness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let reg = Regressor::Poly { degree: 1 };
    let (mut accepted, mut rejected, mut wrong) = (0, 0, 0);
    for i in 0..10_000u64 {
        let m = 2 * rng.random_range(2..=100);
        let h = (m / 2 + 1) as f64;
        let alpha = match rng.random_range(0..3) {
            0 => rng.random_range(1e-4..0.999),
            1 => adjacent(2.0 / (m as f64 + 2.0))[rng.random_range(0..3)],
            _ => adjacent(rng.random_range(1..=m / 2) as f64 / h)[rng.random_range(0..3)],
        };
        let data = synthetic(&mut rng, m);
        match (conformal_oracle::rank(m, alpha), conf_int(&data, alpha, &reg, i)) {
            (Some(k), Ok(cm)) => {
                let residuals: Vec<f64> = cm
                    .calibration_indices()
                    .iter()
                    .map(|&j| (data.rhos()[j] - cm.surrogate().predict(&data.thetas()[j])).abs())
                    .collect();
                if cm.k() != k || cm.d() != conformal_oracle::order_statistic(&residuals, k) {
                    wrong += 1;
                }
                accepted += 1;
            }
            (None, Err(ConformalError::AlphaTooSmall { .. })) => rejected += 1,
            _ => wrong += 1,
        }
    }
    check(wrong == 0, format!("{accepted} exact d values, {rejected} AlphaTooSmall rejections, {wrong} mismatches"))
}

fn gp_correctness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let kernel = Kernel::default();
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let n = rng.random_range(5..=50);
        let k = rng.random_range(1..=3);
        let xs: Vec<Vec<f64>> = (0..n).map(|_| (0..k).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let ys: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let data = Dataset::new(xs, ys).map_err(|e| e.to_string())?;
        let model = gp::fit(&data, &kernel).map_err(|e| e.to_string())?;
        for _ in 0..10 {
            let q: Vec<f64> = (0..k).map(|_| rng.random_range(-1.5..1.5)).collect();
            let (mean, sd) = gp_oracle::posterior(data.thetas(), data.rhos(), kernel.sigma0_sq, kernel.noise, &q);
            worst = worst.max((model.predict(&q) - mean).abs()).max((model.stddev(&q) - sd).abs());
        }
    }
    let tiny = Kernel { sigma0_sq: 1.0, noise: 1e-12 };
    let mut interp: f64 = 0.0;
    for _ in 0..20 {
        let xs: Vec<Vec<f64>> = (0..30).map(|_| vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]).collect();
        let ys: Vec<f64> = (0..30).map(|_| rng.random_range(-2.0..2.0)).collect();
        let data = Dataset::new(xs, ys).map_err(|e| e.to_string())?;
        let model = gp::fit(&data, &tiny).map_err(|e| e.to_string())?;
        for (x, y) in data.thetas().iter().zip(data.rhos()) {
            interp = interp.max((model.predict(x) - y).abs());
        }
    }
    check(
        worst <= 1e-8 && interp <= 1e-5,
        format!("max deviation from explicit inverse {worst:e}, interpolation error at noise 1e-12 {interp:e}"),
    )
}

fn mlp_gradient() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let (k, h) = (rng.random_range(1..=3), rng.random_range(2..=10));
        let params: Vec<f64> = (0..Mlp::param_count(k, h)).map(|_| rng.random_range(-1.0..1.0)).collect();
        let net = Mlp::new(k, h, params);
        let xs: Vec<Vec<f64>> = (0..16).map(|_| (0..k).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let ys: Vec<f64> = (0..16).map(|_| rng.random_range(-1.0..1.0)).collect();
        let idx: Vec<usize> = (0..16).collect();
        let (_, grad) = net.loss_and_gradient(&xs, &ys, &idx);
        for (p, &g) in grad.iter().enumerate() {
            let step = 1e-5;
            let mut plus = net.clone();
            plus.params_mut()[p] += step;
            let mut minus = net.clone();
            minus.params_mut()[p] -= step;
            let fd = (plus.loss_and_gradient(&xs, &ys, &idx).0 - minus.loss_and_gradient(&xs, &ys, &idx).0) / (2.0 * step);
            worst = worst.max((g - fd).abs() / g.abs().max(fd.abs()).max(1e-6));
        }
    }
    check(worst <= 1e-5, format!("max relative gradient error {worst:e} over 20 networks"))
}

fn rk4_order() -> Outcome {
    let theta = [0.5, 0.2];
    let at = |h: f64| -> Result<Vec<f64>, String> {
        let sig = OdeSimulator::new(VanDerPol, h).simulate(&theta, &[0.0, 2.0]).map_err(|e| e.to_string())?;
        Ok(sig.sample(1).to_vec())
    };
    let reference = at(0.000625)?;
    let err = |x: &[f64]| x.iter().zip(&reference).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let ratio = err(&at(0.02)?) / err(&at(0.01)?);
    check((8.0..=32.0).contains(&ratio), format!("error ratio {ratio:.2} for h = 0.02 vs 0.01"))
}

fn mountain_car_setup() -> (Box<dyn Simulator>, Formula, Distribution) {
    let sim = builtin("mountain-car").expect("bundled");
    let phi = stl::parse("F[0,10] (x0 > 0.45)").expect("valid spec");
    let root = Distribution::uniform(ParamBox::new(vec![-0.7, -0.5], vec![0.2, 0.5]).expect("valid box"));
    (sim, phi, root)
}

fn mountain_car_config(strategy: Strategy) -> PartitionConfig {
    PartitionConfig {
        alpha: 0.05,
        sims_per_region: 100,
        strategy,
        stop: StopRule::Absolute(0.02),
        // large enough that the size threshold, not the budget, ends the run
        max_regions: 100_000,
        ..PartitionConfig::default()
    }
}

struct Run {
    result: PartitionResult,
    elapsed: Duration,
}

fn mountain_car_run(strategy: Strategy) -> Result<Run, String> {
    let (sim, phi, root) = mountain_car_setup();
    let start = Instant::now();
    let result = verify(&sim, &phi, &root, &mountain_car_config(strategy)).map_err(|e| e.to_string())?;
    Ok(Run { result, elapsed: start.elapsed() })
}

fn mountain_car_end_to_end(run: &Run) -> Outcome {
    let (sim, phi, root) = mountain_car_setup();
    let res = &run.result;
    let times = sample_times(phi.horizon(), 0.05);
    let n = 200;
    let (mut truth, mut covered) = (0, 0);
    for i in 0..n {
        for j in 0..n {
            let theta = [-0.7 + 0.9 * (i as f64 + 0.5) / n as f64, -0.5 + (j as f64 + 0.5) / n as f64];
            let sig = sim.simulate(&theta, &times).map_err(|e| e.to_string())?;
            if stl::robustness(&phi, &sig, 0.0).map_err(|e| e.to_string())? > 0.0 {
                truth += 1;
                if res.locate(&theta).is_some_and(|r| r.verdict == Verdict::Safe) {
                    covered += 1;
                }
            }
        }
    }
    let coverage = covered as f64 / truth as f64;
    let fresh = res
        .sample_union(&root, Verdict::Safe, 10_000, 8)
        .map_err(|e| e.to_string())?
        .ok_or("no safe regions")?;
    let mut sat = 0;
    for theta in &fresh {
        let sig = sim.simulate(theta, &times).map_err(|e| e.to_string())?;
        if stl::satisfies(&phi, &sig, 0.0).map_err(|e| e.to_string())? {
            sat += 1;
        }
    }
    let rate = sat as f64 / fresh.len() as f64;
    let unknown = res.volume_fraction(Verdict::Unknown);
    let secs = run.elapsed.as_secs_f64();
    check(
        coverage >= 0.90 && rate >= 0.92 && unknown <= 0.05 && secs < 300.0 && !res.exhausted,
        format!(
            "ground-truth safe covered {coverage:.4} ({covered}/{truth}), fresh satisfaction {rate:.4}, unknown volume {unknown:.4}, {} regions, {secs:.1} s",
            res.regions.len()
        ),
    )
}

fn strategy_comparison(runs: &[(Strategy, &Run)], warnings: &mut Vec<String>) -> Outcome {
    let safe: Vec<f64> = runs.iter().map(|(_, r)| r.result.volume_fraction(Verdict::Safe)).collect();
    let spread = safe.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - safe.iter().cloned().fold(f64::INFINITY, f64::min);
    let count = |s: Strategy| runs.iter().find(|(t, _)| *t == s).map(|(_, r)| r.result.regions.len()).unwrap_or(0);
    let (gu, naive) = (count(Strategy::GreatestUncertainty), count(Strategy::Naive));
    if gu > naive {
        warnings.push(format!("greatest-uncertainty used {gu} regions, more than naive ({naive})"));
    }
    let summary: Vec<String> = runs
        .iter()
        .zip(&safe)
        .map(|((s, r), v)| format!("{s} safe {v:.4} in {} regions", r.result.regions.len()))
        .collect();
    check(spread <= 0.05, format!("{}; safe-volume spread {:.2} points", summary.join(", "), spread * 100.0))
}

fn tiles(root: &ParamBox, boxes: &[&ParamBox]) -> bool {
    let total: f64 = boxes.iter().map(|b| b.volume()).sum();
    let disjoint = boxes.iter().enumerate().all(|(i, a)| {
        boxes[i + 1..].iter().all(|b| {
            let shared: f64 = (0..a.dim()).map(|d| (a.upper[d].min(b.upper[d]) - a.lower[d].max(b.lower[d])).max(0.0)).product();
            shared <= 1e-12 * root.volume()
        })
    });
    (total - root.volume()).abs() <= 1e-9 * root.volume() && disjoint && boxes.iter().all(|b| root.contains_box(b))
}

fn tiling_and_determinism(mc: &Run) -> Outcome {
    let (sim, phi, root) = mountain_car_setup();
    let cfg = PartitionConfig { sims_per_region: 40, stop: StopRule::Absolute(0.1), ..mountain_car_config(Strategy::RootSplit) };
    let mut waves = 0;
    let mut broken = 0;
    verify_observed(&sim, &phi, &root, &cfg, |done, todo| {
        let boxes: Vec<&ParamBox> = done.iter().map(|r| &r.bounds).chain(todo.iter().map(|r| &r.bounds)).collect();
        waves += 1;
        if !tiles(&root.support, &boxes) {
            broken += 1;
        }
    })
    .map_err(|e| e.to_string())?;
    let final_boxes: Vec<&ParamBox> = mc.result.regions.iter().map(|r| &r.bounds).collect();
    if !tiles(&root.support, &final_boxes) {
        broken += 1;
    }

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut outputs = Vec::new();
    for workers in ["1", "4"] {
        let out_dir = dir.path().join(format!("w{workers}"));
        let status = Command::new(BIN)
            .args(["verify", "--model", "vdp", "--spec", "F[0,2] G[0,8] (abs(x0) < 0.3)", "--box=-1:1,-1:1"])
            .args(["--max-regions", "64", "--workers", workers, "--out-dir", out_dir.to_str().unwrap()])
            .env("CVERIFY_LOG", "off")
            .output()
            .map_err(|e| e.to_string())?;
        if status.status.code() != Some(0) {
            return Err(format!("verify exited with {:?}", status.status.code()));
        }
        outputs.push(fs::read(out_dir.join("result.json")).map_err(|e| e.to_string())?);
    }
    let identical = outputs[0] == outputs[1];
    check(
        broken == 0 && identical,
        format!(
            "{waves} waves tiled the root, {broken} tiling violations; result.json with 1 and 4 workers {} ({} bytes)",
            if identical { "byte-identical" } else { "differs" },
            outputs[0].len()
        ),
    )
}

fn protocol_round_trip() -> Outcome {
    let spawn = |args: &[&str], timeout: Duration| {
        let mut cmd = vec![SIM.to_string()];
        cmd.extend(args.iter().map(|s| s.to_string()));
        ExternalSimulator::with_timeout(cmd, timeout)
    };
    let times = sample_times(3.0, 0.05);
    let theta = [0.4, -0.3];
    let mut notes = Vec::new();

    let sim = spawn(&["--model", "vdp"], Duration::from_secs(10)).map_err(|e| e.to_string())?;
    if (sim.param_dim(), sim.output_dim()) != (2, 2) {
        return Err(format!("handshake announced k={}, n={}", sim.param_dim(), sim.output_dim()));
    }
    notes.push("handshake".to_string());
    let remote = sim.simulate(&theta, &times).map_err(|e| e.to_string())?;
    let local = builtin("vdp").expect("bundled").simulate(&theta, &times).map_err(|e| e.to_string())?;
    if remote != local {
        return Err("remote trajectory differs from the bundled model".into());
    }
    notes.push(format!("normal reply ({} rows, bit-identical)", remote.len()));

    let sim = spawn(&["--mode", "error", "--after", "1"], Duration::from_secs(10)).map_err(|e| e.to_string())?;
    sim.simulate(&theta, &times).map_err(|e| e.to_string())?;
    match sim.simulate(&theta, &times) {
        Err(SimError::Failure(m)) if m.contains("requested failure") => notes.push("error reply".into()),
        other => return Err(format!("error reply not surfaced: {other:?}")),
    }

    let sim = spawn(&["--mode", "hang", "--after", "1"], Duration::from_millis(500)).map_err(|e| e.to_string())?;
    sim.simulate(&theta, &times).map_err(|e| e.to_string())?;
    let start = Instant::now();
    let outcome = sim.simulate(&theta, &times);
    let waited = start.elapsed();
    match outcome {
        Err(SimError::Failure(_)) if waited < Duration::from_secs(5) => {
            notes.push(format!("timeout after {:.2} s", waited.as_secs_f64()))
        }
        other => return Err(format!("hang not detected: {other:?} after {waited:?}")),
    }
    check(true, notes.join(", "))
}

#[test]
fn acceptance() {
    let mut lines = Vec::new();
    let mut warnings = Vec::new();
    let mut record = |n: u32, name: &str, outcome: Outcome| {
        let (status, detail) = match &outcome {
            Ok(d) => ("PASS", d.clone()),
            Err(d) => ("FAIL", d.clone()),
        };
        let line = format!("criterion {n:>2} {status}  {name}: {detail}");
        println!("{line}");
        lines.push((outcome.is_ok(), line));
    };

    let c = corpus();
    record(1, "STL monitor vs definitional evaluator", stl_oracle_equivalence(&c));
    record(2, "robustness sign vs Boolean satisfaction", robustness_soundness(&c));
    record(3, "split-conformal marginal coverage", conformal_coverage());
    record(4, "calibration rank exactness", rank_exactness());
    record(5, "GP posterior vs explicit inverse", gp_correctness());
    record(6, "MLP gradient vs finite differences", mlp_gradient());
    record(7, "RK4 step-halving order", rk4_order());

    let gu = mountain_car_run(Strategy::GreatestUncertainty);
    let naive = mountain_car_run(Strategy::Naive);
    let root = mountain_car_run(Strategy::RootSplit);
    match &gu {
        Ok(run) => record(8, "mountain-car end to end", mountain_car_end_to_end(run)),
        Err(e) => record(8, "mountain-car end to end", Err(e.clone())),
    }
    match (&gu, &naive, &root) {
        (Ok(g), Ok(n), Ok(r)) => {
            let runs = [(Strategy::Naive, n), (Strategy::GreatestUncertainty, g), (Strategy::RootSplit, r)];
            let outcome = strategy_comparison(&runs, &mut warnings);
            record(9, "strategy comparison", outcome);
        }
        _ => record(9, "strategy comparison", Err("a mountain-car run failed".into())),
    }
    match &gu {
        Ok(run) => record(10, "partition tiling and determinism", tiling_and_determinism(run)),
        Err(e) => record(10, "partition tiling and determinism", Err(e.clone())),
    }
    record(11, "external simulator protocol", protocol_round_trip());

    for w in &warnings {
        println!("warning: {w}");
    }
    let failed: Vec<&String> = lines.iter().filter(|(ok, _)| !ok).map(|(_, l)| l).collect();
    assert!(failed.is_empty(), "failing criteria:\n{}", failed.iter().map(|l| l.as_str()).collect::<Vec<_>>().join("\n"));
}
