//! Text and JSON artifact formats.
//!
//! Every text artifact starts with `#` comment lines holding the resolved
//! configuration and the command that regenerates it:
//!
//! ```text
//! # urnlab <version> <command>
//! # config: {...}
//! # replay: urnlab <args>
//! ```

use std::io::{self, Write};

use serde::Serialize;
use serde_json::{json, Value};

use urnlab_core::bounds::BoundReport;
use urnlab_core::config::{to_urn_trajectory, GeneratedGraph, PairingCounts};
use urnlab_core::oracle::DumpRow;
use urnlab_core::urn::{predicted_x_unchecked, Draw, UrnTrajectory};

use crate::montecarlo::EnsembleReport;

pub const CONFIG_PREFIX: &str = "# config: ";
pub const REPLAY_PREFIX: &str = "# replay: ";

/// Formats like C's `%.17g`.
pub fn fmt_real(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return if v.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{:.16e}", v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..17).contains(&exp) {
        let digits = (16 - exp).max(0) as usize;
        trim_fraction(&format!("{:.*}", digits, v))
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{}{:02}", trim_fraction(mantissa), sign, exp.abs())
    }
}

fn trim_fraction(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

fn opt_real(v: Option<f64>) -> String {
    v.map(fmt_real).unwrap_or_default()
}

/// Provenance written at the top of every artifact.
#[derive(Debug, Clone, PartialEq)]
pub struct Header {
    pub command: String,
    pub config: Value,
    pub replay: String,
}

impl Header {
    pub fn write_comments<W: Write + ?Sized>(&self, w: &mut W) -> io::Result<()> {
        writeln!(w, "# urnlab {} {}", env!("CARGO_PKG_VERSION"), self.command)?;
        writeln!(w, "{CONFIG_PREFIX}{}", self.config)?;
        writeln!(w, "{REPLAY_PREFIX}{}", self.replay)
    }

    /// JSON artifacts carry the same provenance as top-level fields.
    pub fn wrap_json<T: Serialize>(&self, body: &T) -> serde_json::Result<Value> {
        let mut v = serde_json::to_value(body)?;
        let meta = json!({
            "generator": format!("urnlab {}", env!("CARGO_PKG_VERSION")),
            "command": self.command,
            "config": self.config,
            "replay": self.replay,
        });
        match &mut v {
            Value::Object(map) => {
                for (k, val) in meta.as_object().expect("object") {
                    map.insert(k.clone(), val.clone());
                }
                Ok(v)
            }
            _ => Ok(json!({ "meta": meta, "result": v })),
        }
    }
}

/// Reads the replay command line back out of an artifact.
pub fn find_replay(text: &str) -> Option<String> {
    if let Some(line) = text.lines().find_map(|l| l.strip_prefix(REPLAY_PREFIX)) {
        return Some(line.to_string());
    }
    let v: Value = serde_json::from_str(text).ok()?;
    v.get("replay").or_else(|| v.get("meta").and_then(|m| m.get("replay")))?.as_str().map(str::to_string)
}

/// `n,x,y,draw,k,l,x_pred,y_pred`, one row per step up to the stopping time.
pub fn write_urn_trajectory_csv<W: Write + ?Sized>(w: &mut W, traj: &UrnTrajectory) -> io::Result<()> {
    writeln!(w, "n,x,y,draw,k,l,x_pred,y_pred")?;
    let p = &traj.params;
    for s in &traj.states {
        let draw = match s.n.checked_sub(1).map(|i| traj.draws[i as usize]) {
            None => "-",
            Some(Draw::Blue) => "B",
            Some(Draw::Red) => "R",
        };
        let in_range = p.a() * s.n as f64 <= p.total();
        let x_pred = in_range.then(|| predicted_x_unchecked(p, s.n));
        let y_pred = x_pred.map(|px| p.remaining(s.n) - px);
        let k = x_pred.filter(|v| *v > 0.0).map(|v| s.x / v);
        let l = y_pred.filter(|v| *v > 0.0).map(|v| s.y / v);
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            s.n,
            fmt_real(s.x),
            fmt_real(s.y),
            draw,
            opt_real(k),
            opt_real(l),
            opt_real(x_pred),
            opt_real(y_pred)
        )?;
    }
    Ok(())
}

/// `n,j,x,y,prob,absorbed`.
pub fn write_oracle_dump_csv<W: Write + ?Sized>(w: &mut W, rows: &[DumpRow]) -> io::Result<()> {
    writeln!(w, "n,j,x,y,prob,absorbed")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.n,
            r.j,
            fmt_real(r.x),
            fmt_real(r.y),
            fmt_real(r.prob),
            u8::from(r.absorbed)
        )?;
    }
    Ok(())
}

/// Edge list `u v`, preceded by a comment with `n`, `d`, seed and simplicity.
pub fn write_edge_list<W: Write + ?Sized>(w: &mut W, graph: &GeneratedGraph, seed: u64) -> io::Result<()> {
    writeln!(w, "# n={} d={} seed={} simple={}", graph.n_vertices, graph.degree, seed, graph.simple)?;
    for (u, v) in &graph.edges {
        writeln!(w, "{u} {v}")?;
    }
    Ok(())
}

/// `k,a,i,x_urn,y_urn`; the urn columns stop at the urn's stopping step.
pub fn write_pairing_csv<W: Write + ?Sized>(w: &mut W, counts: &[PairingCounts]) -> io::Result<()> {
    writeln!(w, "k,a,i,x_urn,y_urn")?;
    let urn = to_urn_trajectory(counts);
    for (k, c) in counts.iter().enumerate() {
        match urn.get(k) {
            Some(p) => writeln!(w, "{},{},{},{},{}", k, c.a, c.i, p.x, p.y)?,
            None => writeln!(w, "{},{},{},,", k, c.a, c.i)?,
        }
    }
    Ok(())
}

fn quantile_label(q: f64) -> String {
    format!("q{:02}", (q * 100.0).round() as u64)
}

/// `n,k_mean,k_q05,k_q50,k_q95,l_mean,l_q05,l_q50,l_q95,x_pred,y_pred` for
/// the default quantiles; other quantile sets change the column names.
pub fn write_ensemble_csv<W: Write + ?Sized>(w: &mut W, report: &EnsembleReport) -> io::Result<()> {
    let labels: Vec<String> = report.quantiles.iter().map(|q| quantile_label(*q)).collect();
    let mut cols = vec!["n".to_string(), "k_mean".into()];
    cols.extend(labels.iter().map(|l| format!("k_{l}")));
    cols.push("l_mean".into());
    cols.extend(labels.iter().map(|l| format!("l_{l}")));
    cols.extend(["x_pred".to_string(), "y_pred".into()]);
    writeln!(w, "{}", cols.join(","))?;
    let undefined_nan = |v: f64| if v.is_nan() { String::new() } else { fmt_real(v) };
    for r in &report.rows {
        let mut fields = vec![r.n.to_string(), undefined_nan(r.k_mean)];
        fields.extend(r.k_quantiles.iter().map(|v| undefined_nan(*v)));
        fields.push(undefined_nan(r.l_mean));
        fields.extend(r.l_quantiles.iter().map(|v| undefined_nan(*v)));
        fields.push(fmt_real(r.x_pred));
        fields.push(fmt_real(r.y_pred));
        writeln!(w, "{}", fields.join(","))?;
    }
    Ok(())
}

/// One sampled point of the active-fraction figure.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FigureRow {
    pub k: u64,
    /// Horizontal axis `2k / (n d)`.
    pub x: f64,
    pub predicted: f64,
    /// `(n d - 2k) / (n d)`.
    pub diagonal: f64,
    pub simulated: Option<f64>,
}

/// `k,x,predicted,diagonal,simulated`; `simulated` is empty without an overlay.
pub fn write_figure_csv<W: Write + ?Sized>(w: &mut W, rows: &[FigureRow]) -> io::Result<()> {
    writeln!(w, "k,x,predicted,diagonal,simulated")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{}",
            r.k,
            fmt_real(r.x),
            fmt_real(r.predicted),
            fmt_real(r.diagonal),
            opt_real(r.simulated)
        )?;
    }
    Ok(())
}

/// `{name, value, clamped_value, domain_ok, inputs}` plus the condition text.
pub fn bound_json(report: &BoundReport) -> Value {
    let i = &report.inputs;
    json!({
        "name": report.name,
        "value": report.value,
        "clamped_value": report.clamped_value,
        "clamped": report.clamped,
        "domain_ok": report.domain_ok,
        "condition": report.condition,
        "inputs": {
            "a": i.params.a(),
            "b": i.params.b(),
            "x0": i.params.x0(),
            "y0": i.params.y0(),
            "c_const": i.c_const,
            "t": i.t,
            "eps": i.eps,
            "m": i.m,
            "n": i.n,
        },
    })
}

/// `name,value,clamped_value,domain_ok` rows.
pub fn write_bounds_csv<W: Write + ?Sized>(w: &mut W, reports: &[BoundReport]) -> io::Result<()> {
    writeln!(w, "name,value,clamped_value,domain_ok")?;
    for r in reports {
        writeln!(w, "{},{},{},{}", r.name, fmt_real(r.value), fmt_real(r.clamped_value), r.domain_ok)?;
    }
    Ok(())
}
