//! Files written by `run` and `compare`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::Context;
use serde::Serialize;
use shg_core::brd::SolveResult;
use shg_core::Trace;

/// Enough digits to round-trip any `f64`.
fn num(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

/// `iter, field_norm, grad_norm_<i>..., x_<k>...`, one row per recorded
/// iterate.
pub fn trace_csv(trace: &Trace) -> String {
    let first = &trace.entries[0];
    let mut s = String::from("iter,field_norm");
    for i in 0..first.grad_norms.len() {
        write!(s, ",grad_norm_{i}").unwrap();
    }
    for k in 0..first.profile.len() {
        write!(s, ",x_{k}").unwrap();
    }
    s.push('\n');
    for e in &trace.entries {
        write!(s, "{},{}", e.iteration, num(e.field_norm)).unwrap();
        for v in e.grad_norms.iter().chain(&e.profile) {
            write!(s, ",{}", num(*v)).unwrap();
        }
        s.push('\n');
    }
    s
}

/// `round, epsilon`: the regret of each top-level round's entering profile.
pub fn rounds_csv(result: &SolveResult) -> String {
    let mut s = String::from("round,epsilon\n");
    for (t, e) in result.round_eps.iter().enumerate() {
        writeln!(s, "{t},{}", num(*e)).unwrap();
    }
    s
}

/// `solver, wall_seconds, epsilon`.
pub fn regret_vs_time_csv(rows: &[(String, f64, f64)]) -> String {
    let mut s = String::from("solver,wall_seconds,epsilon\n");
    for (solver, t, e) in rows {
        writeln!(s, "{solver},{},{}", num(*t), num(*e)).unwrap();
    }
    s
}

pub fn write_text(path: &Path, text: &str) -> anyhow::Result<()> {
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}
