//! Branch-and-bound verification: regions whose conformal robustness band is
//! strictly signed are finalized, the rest are split until they drop below a
//! size threshold.

mod report;
mod split;

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conformal::{self, calibration_rank, classify, RobustnessInterval, Verdict};
use crate::optimize::OptimizerCfg;
use crate::regress::{gp, Dataset, Kernel, Regressor};
use crate::signal::{Distribution, ParamBox, SignalError};
use crate::sim::{sample_times, SimError, Simulator, DEFAULT_SAMPLE_PERIOD};
use crate::stl::{self, Formula};

pub use report::{format_float, to_csv, to_json, to_svg};
pub use split::{
    clamp_central, cut_through, find_root, greatest_uncertainty, split_greatest_uncertainty, split_naive, split_root, RootSearch,
    CENTRAL_FRACTION,
};

#[derive(Debug, Error)]
pub enum PartitionError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error("failed to start worker pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    Naive,
    GreatestUncertainty,
    RootSplit,
}

impl Strategy {
    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Naive => "naive",
            Strategy::GreatestUncertainty => "greatest-uncertainty",
            Strategy::RootSplit => "root-split",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "naive" => Ok(Strategy::Naive),
            "greatest-uncertainty" | "gu" => Ok(Strategy::GreatestUncertainty),
            "root-split" | "root" => Ok(Strategy::RootSplit),
            other => Err(format!("unknown strategy {other:?} (expected naive, greatest-uncertainty or root-split)")),
        }
    }
}

/// When an undecided region is small enough to stop splitting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopRule {
    /// Every axis narrower than the given fraction of the root's width on
    /// that axis. A single entry applies to all axes.
    Fraction(Vec<f64>),
    /// Every axis narrower than this absolute width.
    Absolute(f64),
}

impl StopRule {
    fn validate(&self, k: usize) -> Result<(), String> {
        match self {
            StopRule::Fraction(f) => {
                if f.len() != 1 && f.len() != k {
                    return Err(format!("{} diameter fractions for {k} parameters", f.len()));
                }
                if let Some(x) = f.iter().find(|x| !(**x > 0.0 && **x <= 1.0)) {
                    return Err(format!("diameter fraction {x} not in (0, 1]"));
                }
            }
            StopRule::Absolute(d) => {
                if !(*d > 0.0 && d.is_finite()) {
                    return Err(format!("minimum diameter {d} must be positive"));
                }
            }
        }
        Ok(())
    }

    fn threshold(&self, axis: usize, root: &ParamBox) -> f64 {
        match self {
            StopRule::Fraction(f) => f[if f.len() == 1 { 0 } else { axis }] * (root.upper[axis] - root.lower[axis]),
            StopRule::Absolute(min) => *min,
        }
    }

    /// Axes on which `b` is still at least as wide as the threshold.
    pub fn open_axes(&self, b: &ParamBox, root: &ParamBox) -> Vec<usize> {
        (0..b.dim()).filter(|&i| b.upper[i] - b.lower[i] >= self.threshold(i, root)).collect()
    }

    /// True when `b` is below the threshold on every axis.
    pub fn is_small(&self, b: &ParamBox, root: &ParamBox) -> bool {
        self.open_axes(b, root).is_empty()
    }
}

/// What becomes of an undecided region that is too small to split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DeltaMinPolicy {
    #[default]
    Unknown,
    /// Unsafe if one of the region's own samples violates the formula.
    CounterexampleUnsafe,
}

impl FromStr for DeltaMinPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "unknown" => Ok(DeltaMinPolicy::Unknown),
            "counterexample-unsafe" => Ok(DeltaMinPolicy::CounterexampleUnsafe),
            other => Err(format!("unknown policy {other:?} (expected unknown or counterexample-unsafe)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartitionConfig {
    pub alpha: f64,
    /// Simulations per region, `m`.
    pub sims_per_region: usize,
    pub regressor: Regressor,
    pub strategy: Strategy,
    pub stop: StopRule,
    /// Maximum number of regions evaluated.
    pub max_regions: usize,
    pub seed: u64,
    pub delta_min_policy: DeltaMinPolicy,
    /// Worker threads; 0 uses every core.
    pub workers: usize,
    pub sample_period: f64,
    pub optimizer: OptimizerCfg,
    pub probe_lines: usize,
}

impl Default for PartitionConfig {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            sims_per_region: 100,
            regressor: Regressor::Gp(Kernel::default()),
            strategy: Strategy::GreatestUncertainty,
            stop: StopRule::Fraction(vec![0.05]),
            max_regions: 512,
            seed: 0,
            delta_min_policy: DeltaMinPolicy::Unknown,
            workers: 0,
            sample_period: DEFAULT_SAMPLE_PERIOD,
            optimizer: OptimizerCfg::default(),
            probe_lines: 8,
        }
    }
}

impl PartitionConfig {
    pub fn validate(&self, k: usize) -> Result<(), PartitionError> {
        let m = self.sims_per_region;
        if m < 4 || m % 2 == 1 {
            return Err(PartitionError::Config(format!("sims per region must be even and at least 4, got {m}")));
        }
        calibration_rank(m, self.alpha).map_err(|e| PartitionError::Config(e.to_string()))?;
        self.stop.validate(k).map_err(PartitionError::Config)?;
        if self.max_regions == 0 {
            return Err(PartitionError::Config("region budget must be positive".into()));
        }
        if !(self.sample_period > 0.0 && self.sample_period.is_finite()) {
            return Err(PartitionError::Config(format!("sample period {}", self.sample_period)));
        }
        Ok(())
    }
}

/// A box of the parameter space with the root distribution restricted to it.
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    pub bounds: ParamBox,
    pub dist: Distribution,
    pub depth: usize,
    /// Child indices from the root; the root is `[0]`.
    pub path: Vec<u32>,
}

impl Region {
    pub fn root(dist: Distribution) -> Self {
        Self { bounds: dist.support.clone(), dist, depth: 0, path: vec![0] }
    }

    /// Dotted split path, e.g. `0.1.0`.
    pub fn id(&self) -> String {
        path_id(&self.path)
    }
}

fn path_id(path: &[u32]) -> String {
    path.iter().map(u32::to_string).collect::<Vec<_>>().join(".")
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledRegion {
    pub path: Vec<u32>,
    pub bounds: ParamBox,
    pub depth: usize,
    pub verdict: Verdict,
    /// Absent when the region could not be evaluated.
    pub interval: Option<RobustnessInterval>,
    pub sims_used: usize,
    pub counterexample: Option<Vec<f64>>,
    pub error: Option<String>,
}

impl LabeledRegion {
    pub fn id(&self) -> String {
        path_id(&self.path)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartitionResult {
    pub root: ParamBox,
    pub alpha: f64,
    pub seed: u64,
    pub strategy: Strategy,
    pub regressor: String,
    pub sims_per_region: usize,
    /// Sorted by split path.
    pub regions: Vec<LabeledRegion>,
    pub total_sims: usize,
    /// The region budget ran out before every region was decided or small.
    pub exhausted: bool,
}

impl PartitionResult {
    /// Share of the root volume carrying `verdict`.
    pub fn volume_fraction(&self, verdict: Verdict) -> f64 {
        let v: f64 = self.regions.iter().filter(|r| r.verdict == verdict).map(|r| r.bounds.volume()).sum();
        // an empty float sum is -0.0
        v / self.root.volume() + 0.0
    }

    pub fn count(&self, verdict: Verdict) -> usize {
        self.regions.iter().filter(|r| r.verdict == verdict).count()
    }

    /// Region containing `theta` (the first in path order if it lies on a
    /// shared face).
    pub fn locate(&self, theta: &[f64]) -> Option<&LabeledRegion> {
        self.regions.iter().find(|r| r.bounds.contains(theta))
    }

    /// Draws `n` parameters from `root` conditioned on the union of regions
    /// labelled `verdict`. `None` if that union has zero mass.
    pub fn sample_union(
        &self,
        root: &Distribution,
        verdict: Verdict,
        n: usize,
        seed: u64,
    ) -> Result<Option<Vec<Vec<f64>>>, SignalError> {
        let picked: Vec<&LabeledRegion> = self.regions.iter().filter(|r| r.verdict == verdict).collect();
        let mut cum = Vec::with_capacity(picked.len());
        let mut total = 0.0;
        for r in &picked {
            total += root.mass(&r.bounds);
            cum.push(total);
        }
        if !(total > 0.0) {
            return Ok(None);
        }
        let dists = picked.iter().map(|r| root.restrict(&r.bounds)).collect::<Result<Vec<_>, _>>()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            let u = rng.random::<f64>() * total;
            let i = cum.partition_point(|c| *c <= u).min(cum.len() - 1);
            out.push(dists[i].draw(&mut rng)?);
        }
        Ok(Some(out))
    }
}

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for a region, a function of the run seed and the split path only.
pub fn region_seed(seed: u64, path: &[u32]) -> u64 {
    path.iter().fold(mix(seed), |h, &p| mix(h ^ (u64::from(p) + 1)))
}

enum Outcome {
    Done(LabeledRegion),
    /// Undecided and large enough to refine.
    Split(LabeledRegion, Vec<ParamBox>),
}

struct Job<'a, S: ?Sized> {
    sim: &'a S,
    phi: &'a Formula,
    root: &'a Distribution,
    cfg: &'a PartitionConfig,
    times: Vec<f64>,
}

impl<S: Simulator + ?Sized> Job<'_, S> {
    fn failed(region: &Region, sims: usize, msg: String) -> Outcome {
        Outcome::Done(LabeledRegion {
            path: region.path.clone(),
            bounds: region.bounds.clone(),
            depth: region.depth,
            verdict: Verdict::Failed,
            interval: None,
            sims_used: sims,
            counterexample: None,
            error: Some(msg),
        })
    }

    fn robustness(&self, theta: &[f64]) -> Result<f64, String> {
        let sig = self.sim.simulate(theta, &self.times).map_err(|e: SimError| e.to_string())?;
        stl::robustness(self.phi, &sig, 0.0).map_err(|e| e.to_string())
    }

    fn process(&self, region: &Region) -> Outcome {
        let cfg = self.cfg;
        let seed = region_seed(cfg.seed, &region.path);
        let m = cfg.sims_per_region;
        let thetas = match region.dist.sample(m, mix(seed ^ 1)) {
            Ok(t) => t,
            Err(e) => return Self::failed(region, 0, e.to_string()),
        };
        let rhos: Vec<Result<f64, String>> = thetas.par_iter().map(|t| self.robustness(t)).collect();
        let rhos = match rhos.into_iter().collect::<Result<Vec<f64>, String>>() {
            Ok(r) => r,
            Err(e) => return Self::failed(region, m, e),
        };
        let data = match Dataset::new(thetas, rhos) {
            Ok(d) => d,
            Err(e) => return Self::failed(region, m, e.to_string()),
        };
        let cm = match conformal::conf_int(&data, cfg.alpha, &cfg.regressor, mix(seed ^ 2)) {
            Ok(cm) => cm,
            Err(e) => return Self::failed(region, m, e.to_string()),
        };
        let opt = OptimizerCfg { seed: mix(seed ^ 3), ..cfg.optimizer.clone() };
        let iv = conformal::region_interval(&cm, &region.bounds, &opt).interval;
        let mut labeled = LabeledRegion {
            path: region.path.clone(),
            bounds: region.bounds.clone(),
            depth: region.depth,
            verdict: classify(&iv),
            interval: Some(iv),
            sims_used: m,
            counterexample: None,
            error: None,
        };
        if labeled.verdict != Verdict::Unknown {
            return Outcome::Done(labeled);
        }
        if cfg.stop.is_small(&region.bounds, &self.root.support) {
            if cfg.delta_min_policy == DeltaMinPolicy::CounterexampleUnsafe {
                let worst = (0..data.len()).min_by(|&a, &b| data.rhos()[a].total_cmp(&data.rhos()[b]));
                if let Some(i) = worst.filter(|&i| data.rhos()[i] < 0.0) {
                    labeled.verdict = Verdict::Unsafe;
                    labeled.counterexample = Some(data.thetas()[i].clone());
                }
            }
            return Outcome::Done(labeled);
        }
        let axes = cfg.stop.open_axes(&region.bounds, &self.root.support);
        let children = match cfg.strategy {
            Strategy::Naive => split_naive(&region.bounds, &axes, mix(seed ^ 4)),
            Strategy::GreatestUncertainty | Strategy::RootSplit => {
                let kernel = match &cfg.regressor {
                    Regressor::Gp(k) => *k,
                    _ => Kernel::default(),
                };
                let side = match gp::fit(&data, &kernel) {
                    Ok(g) => g,
                    Err(e) => return Self::failed(region, m, e.to_string()),
                };
                if cfg.strategy == Strategy::GreatestUncertainty {
                    split_greatest_uncertainty(&region.bounds, &axes, &side, &opt)
                } else {
                    let scale = data.rhos().iter().filter(|r| r.is_finite()).fold(0.0f64, |a, r| a.max(r.abs()));
                    let rs = RootSearch {
                        lines_per_axis: cfg.probe_lines,
                        tol: 1e-3 * if scale > 0.0 { scale } else { 1.0 },
                        ..RootSearch::default()
                    };
                    split_root(&region.bounds, &axes, &side, &opt, &rs, mix(seed ^ 5))
                }
            }
        };
        Outcome::Split(labeled, children)
    }
}

/// Runs the partition loop over `root`.
pub fn verify<S: Simulator + ?Sized>(
    sim: &S,
    phi: &Formula,
    root: &Distribution,
    cfg: &PartitionConfig,
) -> Result<PartitionResult, PartitionError> {
    verify_observed(sim, phi, root, cfg, |_, _| {})
}

/// [`verify`], calling `observe(finalized, worklist)` before each wave of
/// regions is evaluated and once more at the end.
pub fn verify_observed<S, O>(
    sim: &S,
    phi: &Formula,
    root: &Distribution,
    cfg: &PartitionConfig,
    mut observe: O,
) -> Result<PartitionResult, PartitionError>
where
    S: Simulator + ?Sized,
    O: FnMut(&[LabeledRegion], &[Region]),
{
    root.validate()?;
    let k = root.dim();
    if sim.param_dim() != k {
        return Err(PartitionError::Config(format!(
            "simulator takes {} parameters but the box has {k}",
            sim.param_dim()
        )));
    }
    if let Some(i) = phi.max_index() {
        if i >= sim.output_dim() {
            return Err(PartitionError::Config(format!(
                "formula refers to x{i} but the simulator has {} outputs",
                sim.output_dim()
            )));
        }
    }
    cfg.validate(k)?;
    let job = Job { sim, phi, root, cfg, times: sample_times(phi.horizon(), cfg.sample_period) };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| PartitionError::Pool(e.to_string()))?;

    let mut done: Vec<LabeledRegion> = Vec::new();
    let mut pending = vec![Region::root(root.clone())];
    let mut evaluated = 0usize;
    let mut exhausted = false;
    while !pending.is_empty() {
        observe(&done, &pending);
        log::info!("evaluating {} regions ({} finalized)", pending.len(), done.len());
        let outcomes: Vec<Outcome> = pool.install(|| pending.par_iter().map(|r| job.process(r)).collect());
        evaluated += pending.len();
        let mut next = Vec::new();
        for (region, outcome) in pending.iter().zip(outcomes) {
            match outcome {
                Outcome::Done(l) => done.push(l),
                Outcome::Split(l, children) => {
                    if evaluated + next.len() + children.len() > cfg.max_regions {
                        exhausted = true;
                        done.push(l);
                        continue;
                    }
                    for (i, b) in children.into_iter().enumerate() {
                        let mut path = region.path.clone();
                        path.push(i as u32);
                        next.push(Region { dist: root.restrict(&b)?, bounds: b, depth: region.depth + 1, path });
                    }
                }
            }
        }
        pending = next;
    }
    if exhausted {
        log::warn!("region budget of {} exhausted", cfg.max_regions);
    }
    done.sort_by(|a, b| a.path.cmp(&b.path));
    observe(&done, &[]);
    let total_sims = done.iter().map(|r| r.sims_used).sum();
    Ok(PartitionResult {
        root: root.support.clone(),
        alpha: cfg.alpha,
        seed: cfg.seed,
        strategy: cfg.strategy,
        regressor: cfg.regressor.name().to_string(),
        sims_per_region: cfg.sims_per_region,
        regions: done,
        total_sims,
        exhausted,
    })
}
