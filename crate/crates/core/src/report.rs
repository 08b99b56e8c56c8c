//! Check records and per-sample aggregation.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Status {
    Pass,
    Fail,
    Skipped,
    Inconsistent,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::Skipped => "skipped",
            Status::Inconsistent => "inconsistent",
        }
    }
}

/// Extra named quantity attached to a check.
#[derive(Debug, Clone, PartialEq)]
pub enum Metric {
    Real(f64),
    Int(i64),
    Bool(bool),
    Text(String),
    Reals(Vec<f64>),
    Ints(Vec<i64>),
}

/// Outcome at one sample point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Verdict {
    pub residual: f64,
    pub pass: bool,
}

impl Verdict {
    pub fn within(residual: f64, tol: f64) -> Self {
        Verdict {
            residual,
            pass: residual.is_finite() && residual < tol,
        }
    }

    pub fn new(residual: f64, pass: bool) -> Self {
        Verdict { residual, pass }
    }
}

/// Result of one named check over a sample set.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckRecord {
    pub name: String,
    pub status: Status,
    pub tolerance: f64,
    pub samples: usize,
    pub evaluated: usize,
    pub passed: usize,
    /// Skip counts keyed by error class.
    pub skipped: BTreeMap<String, usize>,
    pub max_residual: f64,
    pub mean_residual: f64,
    pub worst_point: Option<Vec<f64>>,
    pub metrics: Vec<(String, Metric)>,
    pub notes: Vec<String>,
    /// Diagnostic checks are reported but never gate the run.
    pub diagnostic: bool,
}

impl CheckRecord {
    /// A record that carries no sampling, e.g. an exact expression identity.
    pub fn single(name: impl Into<String>, residual: f64, tol: f64) -> Self {
        let v = Verdict::within(residual, tol);
        CheckRecord {
            name: name.into(),
            status: if v.pass { Status::Pass } else { Status::Fail },
            tolerance: tol,
            samples: 1,
            evaluated: 1,
            passed: usize::from(v.pass),
            skipped: BTreeMap::new(),
            max_residual: residual,
            mean_residual: residual,
            worst_point: None,
            metrics: Vec::new(),
            notes: Vec::new(),
            diagnostic: false,
        }
    }

    /// A record for a check that could not run at all.
    pub fn errored(name: impl Into<String>, err: &Error) -> Self {
        let status = if matches!(err, Error::InternalInconsistency(_)) {
            Status::Inconsistent
        } else {
            Status::Fail
        };
        CheckRecord {
            name: name.into(),
            status,
            tolerance: 0.0,
            samples: 0,
            evaluated: 0,
            passed: 0,
            skipped: BTreeMap::new(),
            max_residual: f64::NAN,
            mean_residual: f64::NAN,
            worst_point: None,
            metrics: Vec::new(),
            notes: vec![format!("{}: {err}", err.class())],
            diagnostic: false,
        }
    }

    pub fn with_metric(mut self, key: impl Into<String>, m: Metric) -> Self {
        self.metrics.push((key.into(), m));
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.notes.push(note.into());
        self
    }

    pub fn metric(&self, key: &str) -> Option<&Metric> {
        self.metrics.iter().find(|(k, _)| k == key).map(|(_, m)| m)
    }

    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }

    pub fn as_diagnostic(mut self) -> Self {
        self.diagnostic = true;
        self
    }

    /// Marks the record inconsistent, keeping the explanation.
    pub fn inconsistent(mut self, why: impl Into<String>) -> Self {
        self.status = Status::Inconsistent;
        self.notes.push(why.into());
        self
    }
}

/// Aggregation policy shared by sampled checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Policy {
    /// Fraction of samples that must be evaluated (not skipped).
    pub min_coverage: f64,
    /// Fraction of evaluated samples that must pass.
    pub min_pass_fraction: f64,
}

impl Default for Policy {
    fn default() -> Self {
        Policy {
            min_coverage: 0.9,
            min_pass_fraction: 1.0,
        }
    }
}

/// Evaluates `f` at every sample in parallel, keeping sample order.
pub fn evaluate<T, F>(points: &[Vec<f64>], f: F) -> Vec<Result<T>>
where
    T: Send,
    F: Fn(&[f64]) -> Result<T> + Sync,
{
    points.par_iter().map(|p| f(p)).collect()
}

/// Folds per-sample outcomes into a record. Pointwise errors count as
/// skips; any other error makes the whole check fail (or be inconsistent).
pub fn aggregate(
    name: impl Into<String>,
    tol: f64,
    points: &[Vec<f64>],
    outcomes: Vec<Result<Verdict>>,
    policy: Policy,
) -> CheckRecord {
    let mut rec = CheckRecord {
        name: name.into(),
        status: Status::Pass,
        tolerance: tol,
        samples: points.len(),
        evaluated: 0,
        passed: 0,
        skipped: BTreeMap::new(),
        max_residual: 0.0,
        mean_residual: 0.0,
        worst_point: None,
        metrics: Vec::new(),
        notes: Vec::new(),
        diagnostic: false,
    };
    let mut sum = 0.0;
    let mut worst = f64::NEG_INFINITY;
    let mut first_failure: Option<usize> = None;
    let mut fatal: Option<Error> = None;
    for (i, out) in outcomes.into_iter().enumerate() {
        match out {
            Ok(v) => {
                rec.evaluated += 1;
                if v.pass {
                    rec.passed += 1;
                } else if first_failure.is_none() {
                    first_failure = Some(i);
                }
                let r = if v.residual.is_nan() { f64::INFINITY } else { v.residual };
                sum += r;
                if r > worst {
                    worst = r;
                    rec.worst_point = Some(points[i].clone());
                }
            }
            Err(e) if e.is_pointwise() => {
                *rec.skipped.entry(e.class().to_string()).or_insert(0) += 1;
            }
            Err(e) => {
                if fatal.is_none() {
                    fatal = Some(e);
                }
            }
        }
    }
    if rec.evaluated > 0 {
        rec.max_residual = worst;
        rec.mean_residual = sum / rec.evaluated as f64;
    } else {
        rec.max_residual = f64::NAN;
        rec.mean_residual = f64::NAN;
    }
    if let Some(i) = first_failure {
        rec.notes.push(format!("first failing sample #{i}"));
    }
    let coverage = if points.is_empty() {
        0.0
    } else {
        rec.evaluated as f64 / points.len() as f64
    };
    let pass_fraction = if rec.evaluated == 0 {
        0.0
    } else {
        rec.passed as f64 / rec.evaluated as f64
    };
    rec.status = if let Some(e) = fatal {
        rec.notes.push(format!("{}: {e}", e.class()));
        if matches!(e, Error::InternalInconsistency(_)) {
            Status::Inconsistent
        } else {
            Status::Fail
        }
    } else if coverage < policy.min_coverage {
        rec.notes.push(format!(
            "coverage {:.3} below required {:.3}",
            coverage, policy.min_coverage
        ));
        Status::Fail
    } else if pass_fraction + 1e-12 < policy.min_pass_fraction {
        Status::Fail
    } else {
        Status::Pass
    };
    rec
}

/// Convenience: evaluate a residual at each sample and compare with `tol`.
pub fn residual_check<F>(
    name: impl Into<String>,
    tol: f64,
    points: &[Vec<f64>],
    policy: Policy,
    f: F,
) -> CheckRecord
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    let outcomes = evaluate(points, |x| f(x).map(|r| Verdict::within(r, tol)));
    aggregate(name, tol, points, outcomes, policy)
}

/// A named group of checks produced by one task.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskReport {
    pub task: String,
    pub kind: String,
    pub checks: Vec<CheckRecord>,
}

impl TaskReport {
    pub fn status(&self) -> Status {
        worst_status(self.checks.iter().filter(|c| !c.diagnostic).map(|c| c.status))
    }
}

/// Whole-run report.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub scenario: String,
    pub command: String,
    pub seed: u64,
    pub samples: usize,
    pub tasks: Vec<TaskReport>,
}

impl Report {
    pub fn status(&self) -> Status {
        worst_status(self.tasks.iter().map(TaskReport::status))
    }

    /// 0 all pass, 1 any fail, 2 inconsistent.
    pub fn exit_code(&self) -> i32 {
        match self.status() {
            Status::Inconsistent => 2,
            Status::Fail => 1,
            Status::Pass | Status::Skipped => 0,
        }
    }
}

/// Inconsistent dominates fail, which dominates pass; skipped is neutral.
pub fn worst_status(it: impl IntoIterator<Item = Status>) -> Status {
    let mut out = Status::Pass;
    for s in it {
        out = match (out, s) {
            (Status::Inconsistent, _) | (_, Status::Inconsistent) => Status::Inconsistent,
            (Status::Fail, _) | (_, Status::Fail) => Status::Fail,
            _ => Status::Pass,
        };
    }
    out
}

/// Shortest `%.17g`-style rendering: 17 significant digits, trailing zeros
/// trimmed, exponent form outside `[1e-5, 1e17)`.
pub fn sig17(v: f64) -> String {
    if v.is_nan() {
        return "NaN".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return if v.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{v:.16e}");
    let (mant, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let trim = |s: &str| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if !(-5..17).contains(&exp) {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim(mant), exp.abs())
    } else {
        let decimals = (16 - exp).max(0) as usize;
        trim(&format!("{v:.decimals$}"))
    }
}
