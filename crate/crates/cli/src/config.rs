//! Run configuration: a TOML file layered under command-line flags.

use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::Args;
use serde::{Deserialize, Serialize};

use cverify::partition::{DeltaMinPolicy, PartitionConfig, StopRule, Strategy};
use cverify::regress::Regressor;
use cverify::signal::{Distribution, ParamBox};
use cverify::sim::DEFAULT_SAMPLE_PERIOD;

use crate::CliError;

/// Every setting of a `verify` run. Fields left unset fall back to the
/// config file, then to the defaults in [`RunConfig`].
#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigLayer {
    /// Bundled model: vdp or mountain-car
    #[arg(long, conflicts_with = "sim_cmd")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    /// External simulator command line (shell-style quoting)
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sim_cmd: Option<String>,
    /// Per-request timeout for the external simulator, in seconds
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sim_timeout: Option<f64>,
    /// STL requirement
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spec: Option<String>,
    /// Parameter box, "l0:u0,l1:u1,..."
    #[arg(long = "box", allow_hyphen_values = true)]
    #[serde(rename = "box", skip_serializing_if = "Option::is_none")]
    pub bounds: Option<String>,
    /// Sampling distribution: uniform or truncated-gaussian
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dist: Option<String>,
    /// Truncated-Gaussian means, comma separated
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean: Option<Vec<f64>>,
    /// Truncated-Gaussian standard deviations, comma separated
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub std: Option<Vec<f64>>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sims_per_region: Option<usize>,
    /// poly1, poly2, mlp or gp
    #[arg(long = "reg")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub regressor: Option<String>,
    /// naive, greatest-uncertainty or root-split
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub strategy: Option<String>,
    /// Stop splitting below this absolute diameter on every axis
    #[arg(long, conflicts_with = "delta_frac")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_min: Option<f64>,
    /// Stop splitting below these fractions of the root diameters
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_frac: Option<Vec<f64>>,
    /// unknown or counterexample-unsafe
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_min_policy: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_regions: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sample_period: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    /// Worker threads (0 = all cores)
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
}

macro_rules! overlay {
    ($base:ident, $top:ident; $($f:ident),*) => {
        $( if $top.$f.is_some() { $base.$f = $top.$f; } )*
    };
}

impl ConfigLayer {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(format!("config file: {}", e.message())))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml(&text)
    }

    /// `self` with every field set in `top` replaced.
    pub fn overlay(mut self, top: ConfigLayer) -> Self {
        if top.model.is_some() || top.sim_cmd.is_some() {
            self.model = None;
            self.sim_cmd = None;
        }
        if top.delta_min.is_some() || top.delta_frac.is_some() {
            self.delta_min = None;
            self.delta_frac = None;
        }
        overlay!(self, top; model, sim_cmd, sim_timeout, spec, bounds, dist, mean, std, alpha, sims_per_region,
            regressor, strategy, delta_min, delta_frac, delta_min_policy, max_regions, seed, sample_period,
            out_dir, workers);
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelSource {
    Builtin(String),
    /// Program and arguments.
    External(Vec<String>),
}

/// A fully resolved `verify` configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: ModelSource,
    pub sim_timeout: Duration,
    pub spec: String,
    pub distribution: Distribution,
    pub partition: PartitionConfig,
    pub out_dir: PathBuf,
}

impl RunConfig {
    pub fn resolve(layer: ConfigLayer) -> Result<Self, CliError> {
        let cfg = |m: String| CliError::Config(m);
        let model = match (layer.model, layer.sim_cmd) {
            (Some(_), Some(_)) => return Err(cfg("give either a model or a simulator command, not both".into())),
            (Some(m), None) => ModelSource::Builtin(m),
            (None, Some(cmd)) => {
                let argv = shlex::split(&cmd).filter(|a| !a.is_empty()).ok_or_else(|| cfg(format!("cannot split simulator command {cmd:?}")))?;
                ModelSource::External(argv)
            }
            (None, None) => return Err(cfg("no model: set --model or --sim-cmd".into())),
        };
        let secs = layer.sim_timeout.unwrap_or(cverify::sim::DEFAULT_TIMEOUT.as_secs_f64());
        let sim_timeout = Duration::try_from_secs_f64(secs)
            .ok()
            .filter(|d| !d.is_zero())
            .ok_or_else(|| cfg(format!("simulator timeout {secs} must be positive")))?;
        let spec = layer.spec.ok_or_else(|| cfg("no requirement: set --spec".into()))?;
        let bounds: ParamBox = layer
            .bounds
            .ok_or_else(|| cfg("no parameter box: set --box".into()))?
            .parse()
            .map_err(|e: cverify::signal::SignalError| cfg(e.to_string()))?;
        let distribution = match layer.dist.as_deref().unwrap_or("uniform") {
            "uniform" => {
                if layer.mean.is_some() || layer.std.is_some() {
                    return Err(cfg("mean/std only apply to the truncated-gaussian distribution".into()));
                }
                Distribution::uniform(bounds)
            }
            "truncated-gaussian" => {
                let mean = layer.mean.ok_or_else(|| cfg("truncated-gaussian needs --mean".into()))?;
                let std = layer.std.ok_or_else(|| cfg("truncated-gaussian needs --std".into()))?;
                Distribution::truncated_gaussian(mean, std, bounds).map_err(|e| cfg(e.to_string()))?
            }
            other => return Err(cfg(format!("unknown distribution {other:?} (expected uniform or truncated-gaussian)"))),
        };
        let defaults = PartitionConfig::default();
        let regressor: Regressor = match layer.regressor {
            Some(r) => r.parse().map_err(|e: cverify::regress::RegressError| cfg(e.to_string()))?,
            None => defaults.regressor.clone(),
        };
        let strategy: Strategy = match layer.strategy {
            Some(s) => s.parse().map_err(cfg)?,
            None => defaults.strategy,
        };
        let stop = match (layer.delta_min, layer.delta_frac) {
            (Some(_), Some(_)) => return Err(cfg("give either delta_min or delta_frac, not both".into())),
            (Some(d), None) => StopRule::Absolute(d),
            (None, Some(f)) => StopRule::Fraction(f),
            (None, None) => defaults.stop.clone(),
        };
        let delta_min_policy: DeltaMinPolicy = match layer.delta_min_policy {
            Some(p) => p.parse().map_err(cfg)?,
            None => defaults.delta_min_policy,
        };
        let partition = PartitionConfig {
            alpha: layer.alpha.unwrap_or(defaults.alpha),
            sims_per_region: layer.sims_per_region.unwrap_or(defaults.sims_per_region),
            regressor,
            strategy,
            stop,
            max_regions: layer.max_regions.unwrap_or(defaults.max_regions),
            seed: layer.seed.unwrap_or(defaults.seed),
            delta_min_policy,
            workers: layer.workers.unwrap_or(defaults.workers),
            sample_period: layer.sample_period.unwrap_or(DEFAULT_SAMPLE_PERIOD),
            ..defaults
        };
        partition.validate(distribution.dim()).map_err(|e| cfg(e.to_string()))?;
        Ok(Self {
            model,
            sim_timeout,
            spec,
            distribution,
            partition,
            out_dir: layer.out_dir.unwrap_or_else(|| PathBuf::from("cverify-out")),
        })
    }

    /// The configuration as a layer with every field set.
    pub fn to_layer(&self) -> ConfigLayer {
        let (model, sim_cmd) = match &self.model {
            ModelSource::Builtin(m) => (Some(m.clone()), None),
            ModelSource::External(argv) => (None, Some(shlex::try_join(argv.iter().map(String::as_str)).expect("no NUL bytes"))),
        };
        let (dist, mean, std) = match &self.distribution.kind {
            cverify::signal::DistributionKind::Uniform => ("uniform", None, None),
            cverify::signal::DistributionKind::TruncatedGaussian { mean, std } => {
                ("truncated-gaussian", Some(mean.clone()), Some(std.clone()))
            }
        };
        let p = &self.partition;
        let (delta_min, delta_frac) = match &p.stop {
            StopRule::Absolute(d) => (Some(*d), None),
            StopRule::Fraction(f) => (None, Some(f.clone())),
        };
        ConfigLayer {
            model,
            sim_cmd,
            sim_timeout: Some(self.sim_timeout.as_secs_f64()),
            spec: Some(self.spec.clone()),
            bounds: Some(self.distribution.support.to_string()),
            dist: Some(dist.into()),
            mean,
            std,
            alpha: Some(p.alpha),
            sims_per_region: Some(p.sims_per_region),
            regressor: Some(p.regressor.name().into()),
            strategy: Some(p.strategy.name().into()),
            delta_min,
            delta_frac,
            delta_min_policy: Some(
                match p.delta_min_policy {
                    DeltaMinPolicy::Unknown => "unknown",
                    DeltaMinPolicy::CounterexampleUnsafe => "counterexample-unsafe",
                }
                .into(),
            ),
            max_regions: Some(p.max_regions),
            seed: Some(p.seed),
            sample_period: Some(p.sample_period),
            out_dir: Some(self.out_dir.clone()),
            workers: Some(p.workers),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(&self.to_layer()).expect("config serializes")
    }
}
