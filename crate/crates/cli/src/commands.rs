use std::fs;
use std::path::Path;

use serde_json::json;

use cverify::conformal::{conf_int, Verdict};
use cverify::partition::{self, format_float, PartitionError};
use cverify::regress::{Dataset, Regressor};
use cverify::signal::Signal;
use cverify::sim::{builtin, ExternalSimulator, Simulator};
use cverify::stl;

use crate::config::{ModelSource, RunConfig};
use crate::{CliError, EXIT_OK, EXIT_SIMULATOR};

fn json_float(x: f64) -> String {
    if x.is_finite() { format_float(x) } else { format!("\"{}\"", format_float(x)) }
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Runs the partition loop and writes `result.json`, `result.csv`,
/// `partition.svg` (two parameters only) and the effective `run.toml` into
/// the output directory.
///
/// Exits with [`EXIT_SIMULATOR`] when the simulator cannot be started or
/// fails on every region.
pub fn run_verify(cfg: &RunConfig) -> Result<i32, CliError> {
    let phi = stl::parse(&cfg.spec)?;
    let sim: Box<dyn Simulator> = match &cfg.model {
        ModelSource::Builtin(name) => builtin(name).map_err(|e| CliError::Config(e.to_string()))?,
        ModelSource::External(argv) => Box::new(
            ExternalSimulator::with_timeout(argv.clone(), cfg.sim_timeout)
                .map_err(|e| CliError::Simulator(e.to_string()))?,
        ),
    };
    let result = partition::verify(&sim, &phi, &cfg.distribution, &cfg.partition).map_err(|e| match e {
        PartitionError::Config(m) => CliError::Config(m),
        other => CliError::Config(other.to_string()),
    })?;

    let dir = &cfg.out_dir;
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    write(&dir.join("result.json"), &partition::to_json(&result))?;
    write(&dir.join("result.csv"), &partition::to_csv(&result))?;
    if let Some(svg) = partition::to_svg(&result) {
        write(&dir.join("partition.svg"), &svg)?;
    }
    write(&dir.join("run.toml"), &cfg.to_toml())?;

    if result.exhausted {
        eprintln!(
            "{}",
            json!({
                "level": "warning",
                "kind": "BudgetExhausted",
                "message": format!("region budget of {} reached; undecided regions were left unknown", cfg.partition.max_regions),
            })
        );
    }
    println!(
        "{}",
        json!({
            "out_dir": dir.display().to_string(),
            "regions": result.regions.len(),
            "total_sims": result.total_sims,
            "safe": result.volume_fraction(Verdict::Safe),
            "unsafe": result.volume_fraction(Verdict::Unsafe),
            "unknown": result.volume_fraction(Verdict::Unknown),
            "failed": result.volume_fraction(Verdict::Failed),
            "exhausted": result.exhausted,
        })
    );

    // isolated failures are reported; the run only counts as aborted when
    // nothing could be evaluated
    let failed: Vec<_> = result.regions.iter().filter(|r| r.verdict == Verdict::Failed).collect();
    if let Some(first) = failed.first() {
        let aborted = failed.len() == result.regions.len();
        eprintln!(
            "{}",
            json!({
                "level": if aborted { "error" } else { "warning" },
                "kind": "SimFailure",
                "message": format!(
                    "{} of {} regions could not be evaluated; first ({}): {}",
                    failed.len(),
                    result.regions.len(),
                    first.id(),
                    first.error.as_deref().unwrap_or("unknown error")
                ),
                "regions": failed.iter().map(|r| r.id()).collect::<Vec<_>>(),
            })
        );
        if aborted {
            return Ok(EXIT_SIMULATOR);
        }
    }
    Ok(EXIT_OK)
}

/// Reads a `time,x0,x1,...` CSV trace.
pub fn read_trace(path: &Path) -> Result<Signal, CliError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path).map_err(|e| CliError::io(path, e))?;
    let headers = rdr.headers().map_err(|e| CliError::io(path, e))?.clone();
    if headers.get(0) != Some("time") {
        return Err(CliError::Input(format!("{}: first column must be named time", path.display())));
    }
    for (i, h) in headers.iter().skip(1).enumerate() {
        if h != format!("x{i}") {
            return Err(CliError::Input(format!("{}: column {} should be x{i}, found {h:?}", path.display(), i + 1)));
        }
    }
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CliError::io(path, e))?;
        let nums = rec
            .iter()
            .map(|f| f.parse::<f64>())
            .collect::<Result<Vec<f64>, _>>()
            .map_err(|e| CliError::Input(format!("{}: row {}: {e}", path.display(), line + 2)))?;
        times.push(nums[0]);
        values.push(nums[1..].to_vec());
    }
    Signal::new(times, values).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonitorReport {
    pub robustness: f64,
    pub satisfied: bool,
}

impl MonitorReport {
    /// `{"robustness": <r>, "satisfied": <bool>}` with `r` at full precision.
    pub fn to_json(&self) -> String {
        format!("{{\"robustness\": {}, \"satisfied\": {}}}", json_float(self.robustness), self.satisfied)
    }
}

pub fn run_monitor(trace: &Path, spec: &str, t: f64) -> Result<MonitorReport, CliError> {
    let phi = stl::parse(spec)?;
    let sig = read_trace(trace)?;
    Ok(MonitorReport { robustness: stl::robustness(&phi, &sig, t)?, satisfied: stl::satisfies(&phi, &sig, t)? })
}

fn read_dataset(path: &Path) -> Result<Dataset, CliError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::io(path, e))?;
    let mut thetas = Vec::new();
    let mut rhos = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CliError::io(path, e))?;
        let nums: Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        let mut nums = match nums {
            Ok(n) => n,
            Err(_) if line == 0 => continue,
            Err(e) => return Err(CliError::Input(format!("{}: row {}: {e}", path.display(), line + 1))),
        };
        if nums.len() < 2 {
            return Err(CliError::Input(format!("{}: row {} needs theta columns and rho", path.display(), line + 1)));
        }
        rhos.push(nums.pop().expect("non-empty"));
        thetas.push(nums);
    }
    Dataset::new(thetas, rhos).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

/// Split-conformal fit of `data`, reported as pretty JSON.
pub fn run_conformal(data: &Path, alpha: f64, regressor: &str, seed: u64) -> Result<String, CliError> {
    let reg: Regressor = regressor.parse().map_err(|e: cverify::regress::RegressError| CliError::Config(e.to_string()))?;
    let ds = read_dataset(data)?;
    let cm = conf_int(&ds, alpha, &reg, seed).map_err(|e| CliError::Config(e.to_string()))?;
    let doc = json!({
        "regressor": reg.name(),
        "alpha": alpha,
        "seed": seed,
        "m": cm.m(),
        "k": cm.k(),
        "d": cm.d(),
        "fit_size": cm.fit_indices().len(),
        "calibration_size": cm.calibration_indices().len(),
        "surrogate": cm.surrogate().summary(),
    });
    Ok(serde_json::to_string_pretty(&doc).expect("summary serializes"))
}
