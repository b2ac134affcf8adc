//! Reference child process for the external-simulator protocol.
//!
//! Serves a bundled model over stdin/stdout, or misbehaves on purpose so the
//! client's failure handling can be exercised.

use std::io::{self, BufRead, Write};
use std::time::Duration;

use clap::{Parser, ValueEnum};
use serde::Deserialize;
use serde_json::json;

use cverify::sim::builtin;

#[derive(Debug, Clone, Copy, PartialEq, ValueEnum)]
enum Mode {
    /// Simulate the bundled model
    Serve,
    /// Reply with theta, truncated or zero-padded to n, at every time
    Echo,
    /// Reply with an error field
    Error,
    /// Reply with one row too few
    Short,
    /// Exit on the first request
    Crash,
    /// Never answer
    Hang,
    /// Exit without a handshake
    Silent,
}

#[derive(Debug, Parser)]
#[command(about = "Line-delimited JSON simulator for cverify")]
struct Args {
    #[arg(long, default_value = "vdp")]
    model: String,
    #[arg(long, value_enum, default_value_t = Mode::Serve)]
    mode: Mode,
    /// Behave normally for this many requests before switching to --mode
    #[arg(long, default_value_t = 0)]
    after: usize,
}

#[derive(Deserialize)]
struct Request {
    id: u64,
    theta: Vec<f64>,
    times: Vec<f64>,
}

fn main() {
    let args = Args::parse();
    let sim = match builtin(&args.model) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("{e}");
            std::process::exit(2);
        }
    };
    if args.mode == Mode::Silent {
        std::process::exit(1);
    }
    let (k, n) = (sim.param_dim(), sim.output_dim());
    let stdout = io::stdout();
    let mut out = stdout.lock();
    writeln!(out, "{}", json!({ "k": k, "n": n })).expect("stdout");
    out.flush().expect("stdout");

    for (served, line) in io::stdin().lock().lines().enumerate() {
        let Ok(line) = line else { break };
        let req: Request = match serde_json::from_str(&line) {
            Ok(r) => r,
            Err(e) => {
                writeln!(out, "{}", json!({ "id": null, "error": format!("bad request: {e}") })).expect("stdout");
                out.flush().expect("stdout");
                continue;
            }
        };
        let mode = if served < args.after { Mode::Serve } else { args.mode };
        let reply = match mode {
            Mode::Serve => match sim.simulate(&req.theta, &req.times) {
                Ok(sig) => {
                    let rows: Vec<&[f64]> = (0..sig.len()).map(|i| sig.sample(i)).collect();
                    json!({ "id": req.id, "values": rows })
                }
                Err(e) => json!({ "id": req.id, "error": e.to_string() }),
            },
            Mode::Echo => {
                let row: Vec<f64> = (0..n).map(|i| req.theta.get(i).copied().unwrap_or(0.0)).collect();
                json!({ "id": req.id, "values": vec![row; req.times.len()] })
            }
            Mode::Error => json!({ "id": req.id, "error": "requested failure" }),
            Mode::Short => {
                let rows = vec![vec![0.0; n]; req.times.len().saturating_sub(1)];
                json!({ "id": req.id, "values": rows })
            }
            Mode::Crash => std::process::exit(1),
            Mode::Hang => loop {
                std::thread::sleep(Duration::from_secs(3600));
            },
            Mode::Silent => unreachable!(),
        };
        writeln!(out, "{reply}").expect("stdout");
        out.flush().expect("stdout");
    }
}
