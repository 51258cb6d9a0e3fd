//! On-disk formats.
//!
//! Floats are written in the shortest form that parses back to the same
//! `f64`, so every file round-trips exactly.

use std::io::{BufRead, Write};

use serde_json::{json, Value};

use crate::analysis::{ExponentFit, GammaLikelihood};
use crate::error::{RapError, Result};
use crate::geometry::BoxDomain;
use crate::order::Order;
use crate::packer::{Checkpoint, Packing, ProbeResult, SnapshotSeries};

fn parse_err(line: usize, message: impl Into<String>) -> RapError {
    RapError::Parse {
        line,
        message: message.into(),
    }
}

/// `dim,side,seed` header and values, then `x1,..,xd,r` and one row per
/// sphere in insertion order.
pub fn write_packing_csv<W: Write>(packing: &Packing, mut out: W) -> Result<()> {
    let d = packing.domain().dimension();
    writeln!(out, "dim,side,seed")?;
    writeln!(out, "{},{},{}", d, packing.domain().side(), packing.seed())?;
    let names: Vec<String> = (1..=d).map(|i| format!("x{i}")).collect();
    writeln!(out, "{},r", names.join(","))?;
    let mut line = String::new();
    for (center, r) in packing.spheres() {
        line.clear();
        for x in center {
            line.push_str(&x.to_string());
            line.push(',');
        }
        line.push_str(&r.to_string());
        writeln!(out, "{line}")?;
    }
    Ok(())
}

/// Inverse of [`write_packing_csv`]; errors name the offending line (1-based).
pub fn read_packing_csv<R: BufRead>(input: R) -> Result<Packing> {
    let mut lines = input.lines().enumerate().map(|(i, l)| (i + 1, l));
    let mut next = |what: &str| -> Result<(usize, String)> {
        match lines.next() {
            Some((i, Ok(l))) => Ok((i, l)),
            Some((i, Err(e))) => Err(parse_err(i, e.to_string())),
            None => Err(parse_err(0, format!("unexpected end of file, expected {what}"))),
        }
    };
    let (i, header) = next("header")?;
    if header.trim() != "dim,side,seed" {
        return Err(parse_err(i, format!("expected header `dim,side,seed`, found `{header}`")));
    }
    let (i, values) = next("dim,side,seed values")?;
    let fields: Vec<&str> = values.trim().split(',').collect();
    if fields.len() != 3 {
        return Err(parse_err(i, format!("expected 3 fields, found {}", fields.len())));
    }
    let dim: usize = fields[0].parse().map_err(|e| parse_err(i, format!("dim: {e}")))?;
    let side: f64 = fields[1].parse().map_err(|e| parse_err(i, format!("side: {e}")))?;
    let seed: u64 = fields[2].parse().map_err(|e| parse_err(i, format!("seed: {e}")))?;
    let domain = BoxDomain::new(dim, side).map_err(|e| parse_err(i, e.to_string()))?;
    let (i, columns) = next("column header")?;
    let expected: Vec<String> = (1..=dim).map(|k| format!("x{k}")).chain(["r".to_string()]).collect();
    if columns.trim() != expected.join(",") {
        return Err(parse_err(i, format!("expected `{}`, found `{columns}`", expected.join(","))));
    }
    let mut spheres = Vec::new();
    for (i, line) in lines {
        let line = line.map_err(|e| parse_err(i, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let values = line
            .trim()
            .split(',')
            .map(|f| f.parse::<f64>().map_err(|e| parse_err(i, format!("`{f}`: {e}"))))
            .collect::<Result<Vec<f64>>>()?;
        if values.len() != dim + 1 {
            return Err(parse_err(i, format!("expected {} fields, found {}", dim + 1, values.len())));
        }
        let r = values[dim];
        let center = values[..dim].to_vec();
        if !(r > 0.0 && r.is_finite()) || !domain.contains(&center) {
            return Err(parse_err(i, "sphere is not a valid sphere inside the box"));
        }
        spheres.push((center, r));
    }
    Packing::from_spheres(domain, seed, &spheres)
}

/// One JSON object per checkpoint: `{"n", "M", "pore", "attempts"[, "hist"]}`.
pub fn write_snapshots_jsonl<W: Write>(series: &SnapshotSeries, mut out: W) -> Result<()> {
    for cp in &series.checkpoints {
        serde_json::to_writer(&mut out, cp)?;
        writeln!(out)?;
    }
    Ok(())
}

pub fn read_snapshots_jsonl<R: BufRead>(input: R) -> Result<SnapshotSeries> {
    let mut checkpoints: Vec<Checkpoint> = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(|e| parse_err(i + 1, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let cp: Checkpoint = serde_json::from_str(&line).map_err(|e| parse_err(i + 1, e.to_string()))?;
        if checkpoints.last().is_some_and(|prev| prev.n >= cp.n) {
            return Err(parse_err(i + 1, "checkpoints must have increasing n"));
        }
        checkpoints.push(cp);
    }
    Ok(SnapshotSeries { checkpoints })
}

/// `ln_r_bin_center,density` rows of the probe histogram.
pub fn write_probe_csv<W: Write>(probe: &ProbeResult, mut out: W) -> Result<()> {
    writeln!(out, "ln_r_bin_center,density")?;
    for (c, dens) in &probe.log_histogram {
        writeln!(out, "{c},{dens}")?;
    }
    Ok(())
}

/// Sidecar summary of a probe run.
pub fn probe_sidecar(probe: &ProbeResult) -> Value {
    json!({
        "attempts": probe.attempts,
        "inside_rejections": probe.inside_rejections,
        "accepted": probe.accepted(),
        "seed": probe.seed,
    })
}

/// `alpha` as a JSON number: an integer when it is one.
pub fn order_json(alpha: Order) -> Value {
    if alpha.is_integer() {
        json!(alpha.num() / alpha.den())
    } else {
        json!(alpha.value())
    }
}

/// `{"alpha", "lambda", "sigma", "b", "c", "window": [n0, n1]}`.
pub fn fit_json(fit: &ExponentFit) -> Value {
    json!({
        "alpha": order_json(fit.alpha),
        "lambda": fit.fit.lambda,
        "sigma": fit.fit.sigma_lambda,
        "b": fit.fit.b,
        "c": fit.fit.c,
        "window": [fit.window.0, fit.window.1],
    })
}

/// Summary of a `gamma` likelihood; an infinite upper end is written as `null`.
pub fn likelihood_json(l: &GammaLikelihood) -> Value {
    let finite = |x: f64| if x.is_finite() { json!(x) } else { Value::Null };
    json!({
        "alpha": order_json(l.alpha),
        "lambda": l.lambda,
        "sigma": l.sigma,
        "gamma": l.point,
        "mode": l.mode,
        "interval": [finite(l.interval.0), finite(l.interval.1)],
        "truncated_mass": l.truncated_mass,
        "truncated": l.truncated,
    })
}
