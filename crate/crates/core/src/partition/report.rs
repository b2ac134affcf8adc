//! Serialized forms of a partition result.
//!
//! Floats are always written with 17 significant digits so a result file is
//! byte-for-byte reproducible. Non-finite values become the strings `"inf"`,
//! `"-inf"` and `"nan"`.

use std::fmt::Write;

use crate::conformal::Verdict;
use crate::signal::ParamBox;

use super::{LabeledRegion, PartitionResult};

/// `x` with 17 significant digits in exponent notation (`-1.2500000000000000e-1`).
pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.16e}")
    }
}

enum J {
    Null,
    Bool(bool),
    Int(u64),
    Num(f64),
    Str(String),
    Arr(Vec<J>),
    Obj(Vec<(&'static str, J)>),
}

impl J {
    fn nums(xs: &[f64]) -> J {
        J::Arr(xs.iter().map(|x| J::Num(*x)).collect())
    }

    fn write(&self, out: &mut String, indent: usize) {
        let pad = |out: &mut String, n: usize| out.extend(std::iter::repeat_n(' ', n));
        match self {
            J::Null => out.push_str("null"),
            J::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
            J::Int(i) => {
                let _ = write!(out, "{i}");
            }
            J::Num(x) if x.is_finite() => out.push_str(&format_float(*x)),
            J::Num(x) => J::Str(format_float(*x)).write(out, indent),
            J::Str(s) => out.push_str(&serde_json::to_string(s).expect("string serialization")),
            // short numeric arrays stay on one line
            J::Arr(items) if items.iter().all(|i| matches!(i, J::Num(_) | J::Int(_))) => {
                out.push('[');
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    item.write(out, indent);
                }
                out.push(']');
            }
            J::Arr(items) => {
                if items.is_empty() {
                    out.push_str("[]");
                    return;
                }
                out.push_str("[\n");
                for (i, item) in items.iter().enumerate() {
                    pad(out, indent + 2);
                    item.write(out, indent + 2);
                    out.push_str(if i + 1 < items.len() { ",\n" } else { "\n" });
                }
                pad(out, indent);
                out.push(']');
            }
            J::Obj(fields) => {
                out.push_str("{\n");
                for (i, (k, v)) in fields.iter().enumerate() {
                    pad(out, indent + 2);
                    let _ = write!(out, "\"{k}\": ");
                    v.write(out, indent + 2);
                    out.push_str(if i + 1 < fields.len() { ",\n" } else { "\n" });
                }
                pad(out, indent);
                out.push('}');
            }
        }
    }
}

fn box_json(b: &ParamBox) -> J {
    let mut f = vec![("lower", J::nums(&b.lower)), ("upper", J::nums(&b.upper))];
    if let Some(names) = &b.names {
        f.push(("names", J::Arr(names.iter().cloned().map(J::Str).collect())));
    }
    J::Obj(f)
}

fn region_json(r: &LabeledRegion) -> J {
    let mut f = vec![
        ("id", J::Str(r.id())),
        ("depth", J::Int(r.depth as u64)),
        ("box", box_json(&r.bounds)),
        ("verdict", J::Str(r.verdict.to_string())),
        ("interval", r.interval.map_or(J::Null, |iv| J::nums(&[iv.lo, iv.hi]))),
        ("sims_used", J::Int(r.sims_used as u64)),
    ];
    if let Some(c) = &r.counterexample {
        f.push(("counterexample", J::nums(c)));
    }
    if let Some(e) = &r.error {
        f.push(("error", J::Str(e.clone())));
    }
    J::Obj(f)
}

/// The result as pretty-printed JSON with a trailing newline.
pub fn to_json(res: &PartitionResult) -> String {
    let fractions = J::Obj(
        [Verdict::Safe, Verdict::Unsafe, Verdict::Unknown, Verdict::Failed]
            .into_iter()
            .map(|v| {
                let key = match v {
                    Verdict::Safe => "safe",
                    Verdict::Unsafe => "unsafe",
                    Verdict::Unknown => "unknown",
                    Verdict::Failed => "failed",
                };
                (key, J::Num(res.volume_fraction(v)))
            })
            .collect(),
    );
    let doc = J::Obj(vec![
        ("alpha", J::Num(res.alpha)),
        ("seed", J::Int(res.seed)),
        ("strategy", J::Str(res.strategy.to_string())),
        ("regressor", J::Str(res.regressor.clone())),
        ("sims_per_region", J::Int(res.sims_per_region as u64)),
        ("total_sims", J::Int(res.total_sims as u64)),
        ("exhausted", J::Bool(res.exhausted)),
        ("root", box_json(&res.root)),
        ("volume_fractions", fractions),
        ("regions", J::Arr(res.regions.iter().map(region_json).collect())),
    ]);
    let mut out = String::new();
    doc.write(&mut out, 0);
    out.push('\n');
    out
}

/// One row per region: id, verdict, interval, sims, box bounds and the
/// counterexample coordinates (empty when absent).
pub fn to_csv(res: &PartitionResult) -> String {
    let k = res.root.dim();
    let mut header = vec!["id".to_string(), "depth".into(), "verdict".into(), "lo".into(), "hi".into(), "sims_used".into()];
    for i in 0..k {
        header.push(format!("lower{i}"));
        header.push(format!("upper{i}"));
    }
    header.extend((0..k).map(|i| format!("counterexample{i}")));
    let mut out = header.join(",");
    out.push('\n');
    for r in &res.regions {
        let mut row = vec![r.id(), r.depth.to_string(), r.verdict.to_string()];
        match r.interval {
            Some(iv) => row.extend([format_float(iv.lo), format_float(iv.hi)]),
            None => row.extend([String::new(), String::new()]),
        }
        row.push(r.sims_used.to_string());
        for i in 0..k {
            row.push(format_float(r.bounds.lower[i]));
            row.push(format_float(r.bounds.upper[i]));
        }
        match &r.counterexample {
            Some(c) => row.extend(c.iter().map(|x| format_float(*x))),
            None => row.extend(std::iter::repeat_n(String::new(), k)),
        }
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Map of the regions for a two-parameter problem; `None` otherwise.
pub fn to_svg(res: &PartitionResult) -> Option<String> {
    if res.root.dim() != 2 {
        return None;
    }
    const SIZE: f64 = 600.0;
    let (w, h) = (res.root.upper[0] - res.root.lower[0], res.root.upper[1] - res.root.lower[1]);
    let (sx, sy) = if w >= h { (SIZE, SIZE * h / w) } else { (SIZE * w / h, SIZE) };
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{sx:.0}" height="{sy:.0}" viewBox="0 0 {sx:.3} {sy:.3}">"#
    );
    for r in &res.regions {
        let x = (r.bounds.lower[0] - res.root.lower[0]) / w * sx;
        // parameter axis 1 points up
        let y = (res.root.upper[1] - r.bounds.upper[1]) / h * sy;
        let rw = (r.bounds.upper[0] - r.bounds.lower[0]) / w * sx;
        let rh = (r.bounds.upper[1] - r.bounds.lower[1]) / h * sy;
        let fill = match r.verdict {
            Verdict::Safe => "#2ca02c",
            Verdict::Unsafe => "#d62728",
            Verdict::Unknown => "#9a9a9a",
            Verdict::Failed => "#000000",
        };
        let _ = writeln!(
            out,
            r#"  <rect x="{x:.3}" y="{y:.3}" width="{rw:.3}" height="{rh:.3}" fill="{fill}" stroke="white" stroke-width="0.5"><title>{} {}</title></rect>"#,
            r.id(),
            r.verdict
        );
    }
    out.push_str("</svg>\n");
    Some(out)
}
