//! JSON and text renderings of a run.

use std::fmt::Write as _;

use serde::ser::{SerializeMap, SerializeSeq};
use serde::{Serialize, Serializer};
use serde_json::value::RawValue;

use contactforge_core::report::sig17;
use contactforge_core::{CheckRecord, Metric, Status};

use crate::runner::{task_status, Run};

pub const SCHEMA_VERSION: u32 = 1;

/// A float written with 17 significant digits; non-finite values become
/// strings.
struct Num(f64);

impl Serialize for Num {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let text = sig17(self.0);
        if self.0.is_finite() {
            let raw = RawValue::from_string(text).map_err(serde::ser::Error::custom)?;
            raw.serialize(s)
        } else {
            s.serialize_str(&text)
        }
    }
}

struct Nums<'a>(&'a [f64]);

impl Serialize for Nums<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(self.0.len()))?;
        for v in self.0 {
            seq.serialize_element(&Num(*v))?;
        }
        seq.end()
    }
}

struct MetricJson<'a>(&'a Metric);

impl Serialize for MetricJson<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self.0 {
            Metric::Real(v) => Num(*v).serialize(s),
            Metric::Int(v) => s.serialize_i64(*v),
            Metric::Bool(b) => s.serialize_bool(*b),
            Metric::Text(t) => s.serialize_str(t),
            Metric::Reals(v) => Nums(v).serialize(s),
            Metric::Ints(v) => v.serialize(s),
        }
    }
}

/// Metrics in insertion order.
struct Metrics<'a>(&'a [(String, Metric)]);

impl Serialize for Metrics<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(self.0.len()))?;
        for (k, m) in self.0 {
            map.serialize_entry(k, &MetricJson(m))?;
        }
        map.end()
    }
}

#[derive(Serialize)]
struct CheckJson<'a> {
    name: &'a str,
    status: &'static str,
    diagnostic: bool,
    tolerance: Num,
    samples: usize,
    evaluated: usize,
    passed: usize,
    skipped: &'a std::collections::BTreeMap<String, usize>,
    max_residual: Num,
    mean_residual: Num,
    worst_point: Option<Nums<'a>>,
    metrics: Metrics<'a>,
    notes: &'a [String],
}

impl<'a> CheckJson<'a> {
    fn of(c: &'a CheckRecord) -> Self {
        CheckJson {
            name: &c.name,
            status: c.status.as_str(),
            diagnostic: c.diagnostic,
            tolerance: Num(c.tolerance),
            samples: c.samples,
            evaluated: c.evaluated,
            passed: c.passed,
            skipped: &c.skipped,
            max_residual: Num(c.max_residual),
            mean_residual: Num(c.mean_residual),
            worst_point: c.worst_point.as_deref().map(Nums),
            metrics: Metrics(&c.metrics),
            notes: &c.notes,
        }
    }
}

#[derive(Serialize)]
struct TaskJson<'a> {
    name: &'a str,
    kind: &'a str,
    status: &'static str,
    checks: Vec<CheckJson<'a>>,
}

struct Tols<'a>(&'a crate::scenario::Tolerances);

impl Serialize for Tols<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(None)?;
        for (k, v) in self.0.iter() {
            map.serialize_entry(k, &Num(v))?;
        }
        map.end()
    }
}

#[derive(Serialize)]
struct ReportJson<'a> {
    schema_version: u32,
    tool: &'static str,
    version: &'static str,
    scenario: &'a str,
    source: &'a str,
    command: &'a str,
    seed: u64,
    samples: usize,
    tolerances: Tols<'a>,
    status: &'static str,
    exit_code: i32,
    tasks: Vec<TaskJson<'a>>,
}

/// The JSON report. Contains no timing so that reruns are byte-identical.
pub fn to_json(run: &Run) -> String {
    let r = &run.report;
    let doc = ReportJson {
        schema_version: SCHEMA_VERSION,
        tool: "contactforge",
        version: env!("CARGO_PKG_VERSION"),
        scenario: &r.scenario,
        source: &run.source,
        command: &r.command,
        seed: r.seed,
        samples: r.samples,
        tolerances: Tols(&run.tolerances),
        status: r.status().as_str(),
        exit_code: r.exit_code(),
        tasks: r
            .tasks
            .iter()
            .map(|t| TaskJson {
                name: &t.task,
                kind: &t.kind,
                status: task_status(t).as_str(),
                checks: t.checks.iter().map(CheckJson::of).collect(),
            })
            .collect(),
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("report serialisation cannot fail");
    s.push('\n');
    s
}

fn tag(s: Status) -> &'static str {
    match s {
        Status::Pass => "PASS",
        Status::Fail => "FAIL",
        Status::Skipped => "SKIP",
        Status::Inconsistent => "INCONSISTENT",
    }
}

fn short(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.3e}")
    } else {
        sig17(v)
    }
}

fn metric_text(m: &Metric) -> String {
    match m {
        Metric::Real(v) => short(*v),
        Metric::Int(v) => v.to_string(),
        Metric::Bool(b) => b.to_string(),
        Metric::Text(t) => t.clone(),
        Metric::Reals(v) => format!("[{}]", v.iter().map(|x| short(*x)).collect::<Vec<_>>().join(", ")),
        Metric::Ints(v) => format!("{v:?}"),
    }
}

/// Human-readable summary. `verbose` adds metrics and notes of passing
/// checks.
pub fn to_text(run: &Run, verbose: bool) -> String {
    let r = &run.report;
    let mut s = String::new();
    let _ = writeln!(
        s,
        "scenario {} ({})  command {}  seed {}  samples {}",
        r.scenario, run.source, r.command, r.seed, r.samples
    );
    let mut counts = [0usize; 4];
    for t in &r.tasks {
        let st = task_status(t);
        counts[st as usize] += 1;
        let _ = writeln!(s, "[{}] {} ({})", tag(st), t.task, t.kind);
        if st == Status::Skipped && t.checks.len() == 1 && t.checks[0].name == "not_selected" {
            continue;
        }
        for c in &t.checks {
            let label = if c.diagnostic { " (diagnostic)" } else { "" };
            let _ = writeln!(
                s,
                "    {:<12} {:<40} max {:<10} tol {:<10} {}/{} evaluated{}",
                c.status.as_str(),
                c.name,
                short(c.max_residual),
                short(c.tolerance),
                c.evaluated,
                c.samples,
                label
            );
            let detail = verbose || c.status != Status::Pass;
            if detail || c.name == "nogo_verdict" {
                if !c.metrics.is_empty() {
                    let m: Vec<String> = c.metrics.iter().map(|(k, v)| format!("{k}={}", metric_text(v))).collect();
                    let _ = writeln!(s, "        {}", m.join("  "));
                }
                for n in &c.notes {
                    let _ = writeln!(s, "        - {n}");
                }
                for (class, k) in &c.skipped {
                    let _ = writeln!(s, "        - skipped {k} samples: {class}");
                }
            }
        }
    }
    let _ = writeln!(
        s,
        "summary: {} pass, {} fail, {} inconsistent, {} skipped; status {} (exit {})",
        counts[Status::Pass as usize],
        counts[Status::Fail as usize],
        counts[Status::Inconsistent as usize],
        counts[Status::Skipped as usize],
        r.status().as_str(),
        r.exit_code()
    );
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn json<T: Serialize>(v: &T) -> String {
        serde_json::to_string(v).unwrap()
    }

    #[test]
    fn numbers_carry_seventeen_significant_digits() {
        assert_eq!(json(&Num(0.1)), "0.10000000000000001");
        assert_eq!(json(&Num(1.0)), "1");
        assert_eq!(json(&Num(-(2f64.powi(-20)))), "-9.5367431640625e-07");
        assert_eq!(json(&Num(-2.5e-12)), "-2.4999999999999998e-12");
        assert_eq!(json(&Num(f64::NAN)), "\"NaN\"");
        assert_eq!(json(&Num(f64::INFINITY)), "\"inf\"");
        assert_eq!(json(&Nums(&[1.0, 0.5])), "[1,0.5]");
    }

    #[test]
    fn metrics_keep_insertion_order() {
        let m = vec![
            ("z".to_string(), Metric::Int(1)),
            ("a".to_string(), Metric::Ints(vec![1, 2])),
            ("k".to_string(), Metric::Text("none".into())),
        ];
        assert_eq!(json(&Metrics(&m)), r#"{"z":1,"a":[1,2],"k":"none"}"#);
    }
}
