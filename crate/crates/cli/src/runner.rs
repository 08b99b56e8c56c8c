//! Executes scenario tasks and assembles the report.

use contactforge_core::bihamiltonian::{
    bihamiltonian_check, eigenvalue_clusters, fernandes_separability_residual, involution_check,
    jacobi_compatibility, kolmogorov_check, nogo_diagnostic, poisson_compatibility, recursion_operator,
    EigenFields, Family, NoGoInput, NoGoTolerances,
};
use contactforge_core::flows::{conservation_monitor, dissipation_monitor, integrate_source};
use contactforge_core::generators::random_polynomials;
use contactforge_core::report::{aggregate, evaluate, residual_check};
use contactforge_core::structures::{
    contact_volume_check, homogeneity_profile, is_jacobi, max_diff, verify_contact_integrable,
    verify_homogeneous_integrable, HomTarget, DEFAULT_K_RANGE,
};
use contactforge_core::symplectization::{
    bracket_correspondence, lift_function, poissonization_checks, project_function,
    symplectization_consistency, SymplectizationLink,
};
use contactforge_core::tensor::dot;
use contactforge_core::{
    CheckRecord, Error, Metric, Policy, Report, ScalarField, Status, TaskReport, Trajectory, Verdict,
};

use crate::scenario::{Scenario, Tolerances};
use crate::task::{
    Command, ConformalSpec, FamilySpec, FlowSpec, HomObject, HomSpec, NoGoSpec, PairSpec, Task, TaskSpec,
};

/// Command-line settings of one run.
#[derive(Debug, Clone)]
pub struct RunOptions {
    pub command: Command,
    pub seed: Option<u64>,
    pub samples: Option<usize>,
    pub tolerances: Vec<(String, f64)>,
}

impl RunOptions {
    pub fn new(command: Command) -> Self {
        RunOptions {
            command,
            seed: None,
            samples: None,
            tolerances: Vec::new(),
        }
    }
}

/// Result of a run: the report plus artifacts that are not part of it.
#[derive(Debug, Clone)]
pub struct Run {
    pub report: Report,
    pub source: String,
    pub tolerances: Tolerances,
    /// Flow trajectories by task name.
    pub trajectories: Vec<(String, Trajectory)>,
}

/// Runs every task of `scenario`; tasks outside `opts.command` are reported
/// as skipped.
pub fn run(scenario: &Scenario, opts: &RunOptions) -> Result<Run, String> {
    let mut tolerances = scenario.tolerances.clone();
    for (k, v) in &opts.tolerances {
        tolerances.set(k, *v)?;
    }
    if opts.samples == Some(0) {
        return Err("sample count must be positive".into());
    }
    let seed = opts.seed.unwrap_or(scenario.sampling.seed);
    let samples = opts.samples.unwrap_or(scenario.sampling.samples);
    let mut trajectories = Vec::new();
    let tasks = scenario
        .tasks
        .iter()
        .map(|task| {
            let checks = if opts.command.selects(task.spec.group()) {
                let ctx = Ctx {
                    scenario,
                    task,
                    tol: &tolerances,
                    seed,
                    samples: task.samples.unwrap_or(samples),
                };
                let (checks, traj) = ctx.run();
                if let Some(t) = traj {
                    trajectories.push((task.name.clone(), t));
                }
                if task.expect_fail {
                    expect_failure(checks)
                } else {
                    checks
                }
            } else {
                vec![not_selected(task, opts.command)]
            };
            TaskReport {
                task: task.name.clone(),
                kind: task.spec.kind().to_string(),
                checks,
            }
        })
        .collect();
    Ok(Run {
        report: Report {
            scenario: scenario.name.clone(),
            command: opts.command.name().to_string(),
            seed,
            samples,
            tasks,
        },
        source: scenario.source.clone(),
        tolerances,
        trajectories,
    })
}

fn not_selected(task: &Task, command: Command) -> CheckRecord {
    let mut rec = CheckRecord::single("not_selected", 0.0, 0.0);
    rec.status = Status::Skipped;
    rec.samples = 0;
    rec.evaluated = 0;
    rec.passed = 0;
    rec.with_note(format!(
        "task group `{}` is not run by command `{}`",
        task.spec.group().name(),
        command.name()
    ))
}

/// Inverts the gate of a task declared with `expect = "fail"`.
fn expect_failure(checks: Vec<CheckRecord>) -> Vec<CheckRecord> {
    let failed = checks.iter().filter(|c| !c.diagnostic && c.status == Status::Fail).count();
    let mut out: Vec<CheckRecord> = checks
        .into_iter()
        .map(|c| {
            if c.status == Status::Inconsistent || c.diagnostic {
                c
            } else {
                c.as_diagnostic()
            }
        })
        .collect();
    let mut rec = CheckRecord::single("expected_failure", if failed > 0 { 0.0 } else { 1.0 }, 0.5)
        .with_metric("failed_checks", Metric::Int(failed as i64));
    if failed == 0 {
        rec = rec.with_note("declared to fail, but every check passed");
    }
    out.push(rec);
    out
}

fn errored(name: &str, e: &Error) -> Vec<CheckRecord> {
    vec![CheckRecord::errored(name, e)]
}

fn skipped(name: impl Into<String>, note: &str) -> CheckRecord {
    let mut rec = CheckRecord::single(name, 0.0, 0.0);
    rec.status = Status::Skipped;
    rec.evaluated = 0;
    rec.passed = 0;
    rec.with_note(note)
}

/// A record for a quantity that must lie in `[lo, hi]`.
fn range_record(name: &str, value: f64, lo: f64, hi: f64) -> CheckRecord {
    let mut rec = CheckRecord::single(name, value, f64::INFINITY);
    rec.tolerance = hi;
    rec.status = if (lo..=hi).contains(&value) {
        Status::Pass
    } else {
        Status::Fail
    };
    rec.passed = usize::from(rec.status == Status::Pass);
    rec.with_metric("lower", Metric::Real(lo)).with_metric("upper", Metric::Real(hi))
}

struct Ctx<'a> {
    scenario: &'a Scenario,
    task: &'a Task,
    tol: &'a Tolerances,
    seed: u64,
    samples: usize,
}

impl Ctx<'_> {
    fn policy(&self) -> Policy {
        self.tol.policy()
    }

    /// Tolerance `name`, or the task override when `name` is the primary one.
    fn t(&self, name: &str) -> f64 {
        match self.task.tol {
            Some(v) if name == self.task.spec.primary_tolerance() => v,
            _ => self.tol.get(name),
        }
    }

    fn points_on(&self, chart: &contactforge_core::Chart, extra: bool) -> contactforge_core::Result<Vec<Vec<f64>>> {
        let domain: &[_] = if extra { &self.task.domain } else { &[] };
        self.scenario.sampling.points(chart, self.samples, self.seed, domain)
    }

    fn run(&self) -> (Vec<CheckRecord>, Option<Trajectory>) {
        if let TaskSpec::Flow(f) = &self.task.spec {
            return self.flow(f);
        }
        let pts = match self.points_on(&self.task.chart, true) {
            Ok(p) => p,
            Err(e) => return (errored("sampling", &e), None),
        };
        (self.checks(&pts), None)
    }

    fn checks(&self, pts: &[Vec<f64>]) -> Vec<CheckRecord> {
        let pol = self.policy();
        match &self.task.spec {
            TaskSpec::Contact { eta, reeb } => {
                let mut out = vec![contact_volume_check(eta, pts, self.t("volume"), pol)];
                out.push(residual_check("reeb_conditions", self.t("residual"), pts, pol, |x| {
                    let r = eta.reeb_at(x)?;
                    let (e, d) = eta.parts(x)?;
                    let contraction = d
                        .iter()
                        .map(|row| dot(row, &r).abs())
                        .fold(0.0, f64::max);
                    Ok((dot(&e, &r) - 1.0).abs().max(contraction))
                }));
                if let Some(want) = reeb {
                    out.push(residual_check("reeb_field", self.t("residual"), pts, pol, |x| {
                        Ok(max_diff(&eta.reeb_at(x)?, &want.eval::<f64>(x)?.as_vector()))
                    }));
                }
                let j = contactforge_core::JacobiStructure::contact(eta);
                out.push(is_jacobi(&j, pts, &[], self.t("jacobi"), pol));
                out
            }
            TaskSpec::HamiltonianField { field, expected } => {
                vec![residual_check("hamiltonian_field", self.t("residual"), pts, pol, |x| {
                    Ok(max_diff(&field.eval::<f64>(x)?, &expected.eval::<f64>(x)?.as_vector()))
                })]
            }
            TaskSpec::Jacobi { j } => vec![is_jacobi(j, pts, &[], self.t("jacobi"), pol)],
            TaskSpec::Compatibility { a, b, total } => vec![match total {
                None => poisson_compatibility(a, b, pts, self.t("compatibility"), pol),
                Some(total) => jacobi_compatibility(a, b, total, pts, self.t("compatibility"), pol),
            }],
            TaskSpec::Homogeneity { delta, targets } => targets
                .iter()
                .map(|t| self.homogeneity(delta, t, pts))
                .collect(),
            TaskSpec::Recursion {
                lambda,
                lambda1,
                eigenvalues,
                multiplicity,
                independent,
            } => self.recursion(lambda, lambda1, eigenvalues, *multiplicity, *independent, pts),
            TaskSpec::Involution { structures, family } => {
                let eig;
                let fam: &dyn Family = match family {
                    FamilySpec::Functions(fs) => fs,
                    FamilySpec::Eigenvalues(a, b) => {
                        eig = EigenFields::new(a, b);
                        &eig
                    }
                };
                structures
                    .iter()
                    .map(|(name, j)| {
                        involution_check(&format!("involution[{name}]"), fam, j, pts, self.t("involution"), pol)
                    })
                    .collect()
            }
            TaskSpec::Bihamiltonian {
                field,
                lambda,
                h,
                lambda1,
                h1,
            } => vec![bihamiltonian_check(field, lambda, h, lambda1, h1, pts, self.t("residual"), pol)],
            TaskSpec::ContactIntegrable { eta, h, integrals } => {
                verify_contact_integrable(eta, h, integrals, pts, self.t("residual"), pol)
                    .unwrap_or_else(|e| errored("contact_integrable", &e))
            }
            TaskSpec::HomogeneousIntegrable {
                theta,
                h,
                delta,
                integrals,
            } => verify_homogeneous_integrable(theta, h, delta, integrals, pts, self.t("residual"), pol)
                .unwrap_or_else(|e| errored("homogeneous_integrable", &e)),
            TaskSpec::Kolmogorov { h, actions } => vec![kolmogorov_check(h, actions, pts, self.t("det"), pol)],
            TaskSpec::Separability { h, lambda, lambda1 } => {
                let eig = EigenFields::new(lambda, lambda1);
                vec![fernandes_separability_residual(h, &eig, pts, self.t("separability"), pol)]
            }
            TaskSpec::ConformalChart(c) => self.conformal(c, pts),
            TaskSpec::Lift { link, pairs } => pairs
                .iter()
                .map(|(f, want)| match lift_function(link, f) {
                    Ok(lifted) => residual_check(format!("lift[{}]", f.expr), self.t("residual"), pts, pol, |y| {
                        Ok((lifted.eval::<f64>(y)? - want.eval::<f64>(y)?).abs())
                    }),
                    Err(e) => CheckRecord::errored(format!("lift[{}]", f.expr), &e),
                })
                .collect(),
            TaskSpec::Project { link, pairs, degree } => pairs
                .iter()
                .map(|(big, want)| self.projection(link, big, want, *degree, pts))
                .collect(),
            TaskSpec::BracketCorrespondence { link, pairs } => {
                vec![bracket_correspondence(link, &self.pairs(link, pairs), pts, self.t("bracket"), pol)]
            }
            TaskSpec::SymplectizationConsistency { link, pairs } => vec![symplectization_consistency(
                link,
                &self.pairs(link, pairs),
                pts,
                self.t("bracket"),
                pol,
            )],
            TaskSpec::Poissonization { link, j } => poissonization_checks(link, j, pts, self.t("jacobi"), pol),
            TaskSpec::NoGo(n) => self.nogo(n, pts),
            TaskSpec::Flow(_) => unreachable!("flows are dispatched before sampling"),
        }
    }

    fn homogeneity(
        &self,
        delta: &contactforge_core::VectorSource,
        t: &HomSpec,
        pts: &[Vec<f64>],
    ) -> CheckRecord {
        let name = format!("degree[{}]", t.label);
        let target = match &t.object {
            HomObject::DeltaSelf => {
                return skipped(name, "the Lie derivative of a field along itself vanishes; no degree test");
            }
            HomObject::Scalar(f) => HomTarget::Scalar(f),
            HomObject::Form(f) => HomTarget::Form(f),
            HomObject::Multivector(m) => HomTarget::Multivector(m),
            HomObject::Symplectic(s) => HomTarget::SymplecticForm(s),
            HomObject::Bivector(j) => HomTarget::Bivector(j),
            HomObject::Recursion(a, b) => HomTarget::Recursion(a, b),
        };
        let tol = self.t("homogeneity");
        let h = match homogeneity_profile(&target, delta, pts, DEFAULT_K_RANGE, tol) {
            Ok(h) => h,
            Err(e) => return CheckRecord::errored(name, &e),
        };
        let detected = h.degree.map_or(Metric::Text("none".into()), |k| Metric::Int(k.into()));
        let want = t.degree.or(h.degree);
        let residual = want
            .and_then(|k| h.profile.iter().find(|(j, _)| *j == k).map(|(_, r)| *r))
            .unwrap_or(f64::INFINITY);
        let mut rec = CheckRecord::single(&name, residual, tol);
        rec.samples = pts.len();
        rec.evaluated = pts.len() - h.skipped;
        rec.passed = if h.degree == want && want.is_some() { rec.evaluated } else { 0 };
        rec.status = if rec.passed > 0 && rec.evaluated as f64 >= self.policy().min_coverage * pts.len() as f64 {
            Status::Pass
        } else {
            Status::Fail
        };
        if h.skipped > 0 {
            rec.skipped.insert("pointwise".into(), h.skipped);
        }
        let mut rec = rec.with_metric("detected_degree", detected);
        if let Some(k) = t.degree {
            rec = rec.with_metric("expected_degree", Metric::Int(k.into()));
        }
        rec.with_note(format!("profile: {}", h.describe()))
    }

    fn recursion(
        &self,
        lambda: &contactforge_core::JacobiStructure,
        lambda1: &contactforge_core::JacobiStructure,
        eigenvalues: &[ScalarField],
        multiplicity: Option<usize>,
        independent: Option<usize>,
        pts: &[Vec<f64>],
    ) -> Vec<CheckRecord> {
        let pol = self.policy();
        let (ctol, itol) = (self.t("cluster"), self.t("complex"));
        let eig = EigenFields::new(lambda, lambda1);
        let per = evaluate(pts, |x| {
            let n = recursion_operator(lambda, lambda1, x)?;
            let cl = eigenvalue_clusters(&n.matrix, x, ctol, itol)?;
            let count = match independent {
                Some(_) => Some(eig.independent_count(x)?),
                None => None,
            };
            Ok((cl, count))
        });
        let mut out = Vec::new();
        let tol = self.t("eigenvalue");
        let mut clusters_seen = (usize::MAX, 0usize);
        let spectrum = per
            .iter()
            .zip(pts)
            .map(|(r, x)| {
                let (cl, _) = r.as_ref().map_err(Clone::clone)?;
                clusters_seen = (clusters_seen.0.min(cl.real.len()), clusters_seen.1.max(cl.real.len()));
                if !cl.non_real.is_empty() {
                    return Ok(Verdict::new(f64::INFINITY, false));
                }
                if eigenvalues.is_empty() {
                    return Ok(Verdict::new(0.0, true));
                }
                let mut want = eigenvalues
                    .iter()
                    .map(|f| f.eval::<f64>(x))
                    .collect::<contactforge_core::Result<Vec<_>>>()?;
                want.sort_by(f64::total_cmp);
                want.dedup_by(|a, b| (*a - *b).abs() <= ctol * (1.0 + b.abs()));
                let got = cl.values();
                if got.len() != want.len() {
                    return Ok(Verdict::new(f64::INFINITY, false));
                }
                Ok(Verdict::within(max_diff(&got, &want), tol))
            })
            .collect();
        let mut rec = aggregate("eigenvalue_clusters", tol, pts, spectrum, pol);
        if clusters_seen.0 <= clusters_seen.1 {
            rec = rec
                .with_metric("min_clusters", Metric::Int(clusters_seen.0 as i64))
                .with_metric("max_clusters", Metric::Int(clusters_seen.1 as i64));
        }
        out.push(rec);
        if let Some(m) = multiplicity {
            let mult = per
                .iter()
                .map(|r| {
                    let (cl, _) = r.as_ref().map_err(Clone::clone)?;
                    let worst = cl
                        .real
                        .iter()
                        .map(|(_, k)| k.abs_diff(m))
                        .max()
                        .unwrap_or(m);
                    Ok(Verdict::new(worst as f64, worst == 0 && cl.non_real.is_empty()))
                })
                .collect();
            out.push(
                aggregate("multiplicity", 0.5, pts, mult, pol)
                    .with_metric("expected_multiplicity", Metric::Int(m as i64)),
            );
        }
        if let Some(k) = independent {
            let counts: Vec<usize> = per
                .iter()
                .filter_map(|r| r.as_ref().ok().and_then(|(_, c)| *c))
                .collect();
            let indep = per
                .iter()
                .map(|r| {
                    let (_, c) = r.as_ref().map_err(Clone::clone)?;
                    let c = c.unwrap_or(0);
                    Ok(Verdict::new(k.saturating_sub(c) as f64, c >= k))
                })
                .collect();
            let mut rec = aggregate("independent_eigenvalues", 0.5, pts, indep, pol)
                .with_metric("required", Metric::Int(k as i64));
            if let (Some(lo), Some(hi)) = (counts.iter().min(), counts.iter().max()) {
                rec = rec
                    .with_metric("min_count", Metric::Int(*lo as i64))
                    .with_metric("max_count", Metric::Int(*hi as i64));
            }
            out.push(rec);
        }
        out
    }

    fn conformal(&self, c: &ConformalSpec, pts: &[Vec<f64>]) -> Vec<CheckRecord> {
        let pol = self.policy();
        let tol = self.t("residual");
        let mut out = vec![residual_check("pushforward", tol, pts, pol, |x| {
            let pushed = c.map.pushforward(x, &c.source.eval::<f64>(x)?)?;
            let y = c.map.apply(x)?;
            Ok(max_diff(&pushed, &c.target.eval::<f64>(&y)?))
        })];
        out.push(residual_check("conformal_pullback", tol, pts, pol, |x| {
            let y = c.map.apply(x)?;
            let pulled = c.map.pullback_covector(x, &c.eta_bar.eta().eval::<f64>(&y)?.as_vector())?;
            let s = c.factor.eval::<f64>(x)?;
            let scaled: Vec<f64> = c.eta.eta().eval::<f64>(x)?.as_vector().iter().map(|v| s * v).collect();
            Ok(max_diff(&pulled, &scaled))
        }));
        if let Some(want) = &c.expected {
            out.push(residual_check("expected_field", tol, pts, pol, |x| {
                let pushed = c.map.pushforward(x, &c.source.eval::<f64>(x)?)?;
                let y = c.map.apply(x)?;
                Ok(max_diff(&pushed, &want.eval::<f64>(&y)?.as_vector()))
            }));
        }
        out
    }

    fn projection(
        &self,
        link: &SymplectizationLink,
        big: &ScalarField,
        want: &ScalarField,
        degree: i32,
        pts: &[Vec<f64>],
    ) -> CheckRecord {
        let name = format!("project[{}]", big.expr);
        match project_function(link, big, degree, pts) {
            Ok(f) => residual_check(name, self.t("residual"), pts, self.policy(), |y| {
                let x = link.project_point(y);
                Ok((f.eval::<f64>(x)? - want.eval::<f64>(x)?).abs())
            })
            .with_note(format!("projection: {}", f.expr)),
            Err(e) => CheckRecord::errored(name, &e),
        }
    }

    fn pairs(&self, link: &SymplectizationLink, spec: &PairSpec) -> Vec<(ScalarField, ScalarField)> {
        match spec {
            PairSpec::Explicit(p) => p.clone(),
            PairSpec::Random(n) => {
                let fs = random_polynomials(&link.base, 2 * n, self.seed);
                fs.chunks(2).map(|c| (c[0].clone(), c[1].clone())).collect()
            }
        }
    }

    fn nogo(&self, n: &NoGoSpec, pts: &[Vec<f64>]) -> Vec<CheckRecord> {
        let action_pts;
        let action = match &n.action {
            Some((h, idx)) => {
                action_pts = match self.points_on(&h.chart, false) {
                    Ok(p) => p,
                    Err(e) => return errored("action_sampling", &e),
                };
                Some((h, idx.as_slice(), action_pts.as_slice()))
            }
            None => None,
        };
        let input = NoGoInput {
            lambda: &n.lambda,
            lambda1: &n.lambda1,
            delta: &n.delta,
            hamiltonian: n.hamiltonian.as_ref(),
            h1: n.h1.as_ref(),
            action,
            samples: pts,
            tol: NoGoTolerances {
                homogeneity: self.t("homogeneity"),
                eigen_homogeneity: self.t("eigen_homogeneity"),
                euler: self.t("euler"),
                det: self.t("det"),
                closedness: self.t("closedness"),
            },
        };
        let v = match nogo_diagnostic(&input) {
            Ok(v) => v,
            Err(e) => return errored("nogo_verdict", &e),
        };
        let int_or_none = |d: Option<i32>| d.map_or(Metric::Text("none".into()), |k| Metric::Int(k.into()));
        let mut verdict = CheckRecord::single("nogo_verdict", 0.0, 0.5);
        verdict.samples = pts.len();
        verdict.evaluated = pts.len() - v.skipped;
        let mut verdict = verdict
            .with_metric("poissonized", Metric::Bool(n.poissonized))
            .with_metric("lambda1_degree", int_or_none(v.lambda1_degree))
            .with_metric("n_degree", int_or_none(v.n_degree))
            .with_metric("eigen_degrees", Metric::Ints(v.eigen_degrees.iter().map(|&k| k.into()).collect()))
            .with_metric("eigen_unassigned", Metric::Int(v.eigen_unassigned as i64))
            .with_metric("eigen_delta_max", Metric::Real(v.eigen_delta_max));
        if let (Some(lo), Some(hi)) = (v.independent_min, v.independent_max) {
            verdict = verdict
                .with_metric("independent_min", Metric::Int(lo as i64))
                .with_metric("independent_max", Metric::Int(hi as i64));
        }
        if let Some(r) = v.euler_residual {
            verdict = verdict.with_metric("euler_residual", Metric::Real(r));
        }
        if let Some(b) = v.bihamiltonian {
            verdict = verdict.with_metric("bihamiltonian", Metric::Bool(b));
        }
        if let Some(nd) = v.nd_holds {
            verdict = verdict.with_metric("nondegenerate", Metric::Bool(nd));
        }
        verdict = verdict
            .with_metric("clause_homogeneous", Metric::Bool(v.clause_homogeneous))
            .with_metric("clause_independent", Metric::Bool(v.clause_independent))
            .with_metric("forbidden", Metric::Bool(v.forbidden));
        for l in &v.lines {
            verdict = verdict.with_note(l.clone());
        }
        if let Some(why) = &v.inconsistency {
            verdict = verdict.inconsistent(why.clone());
        }
        let mut out = vec![verdict];

        let eig_tol = self.t("eigen_homogeneity");
        out.push(if v.lambda1_degree == Some(-1) {
            let need = v.dim / 2;
            let few = v.independent_max.is_some_and(|k| k < need);
            let mut rec = CheckRecord::single("minus_one_homogeneous_consequences", v.eigen_delta_max, eig_tol)
                .with_metric("independent_max", v.independent_max.map_or(Metric::Text("none".into()), |k| Metric::Int(k as i64)))
                .with_metric("needed_for_integrability", Metric::Int(need as i64));
            rec.samples = pts.len();
            rec.evaluated = pts.len() - v.skipped;
            if rec.status != Status::Pass || !few {
                rec = rec.inconsistent(format!(
                    "deg Lambda1 = -1 but max |Delta(lambda)| = {:e} and up to {:?} independent real eigenvalues",
                    v.eigen_delta_max, v.independent_max
                ));
            }
            rec
        } else {
            skipped("minus_one_homogeneous_consequences", "Lambda1 is not (-1)-homogeneous")
        });
        out
    }

    fn flow(&self, f: &FlowSpec) -> (Vec<CheckRecord>, Option<Trajectory>) {
        let traj = match integrate_source(&f.source, &f.x0, f.t_end, f.dt) {
            Ok(t) => t,
            Err(e) => return (errored("integrate", &e), None),
        };
        let mut out = Vec::new();
        let flow_tol = self.t("flow");
        if let Some(exact) = &f.exact {
            let err = max_diff(traj.endpoint(), exact);
            let mut rec = CheckRecord::single("endpoint", err, flow_tol)
                .with_metric("endpoint", Metric::Reals(traj.endpoint().to_vec()))
                .with_metric("steps", Metric::Int(traj.times.len() as i64 - 1));
            rec.worst_point = Some(traj.endpoint().to_vec());
            out.push(rec);
            if let Some(h) = f.order_dt {
                out.push(self.order_ratio(f, exact, h));
            }
        }
        if let Some((eta, h)) = &f.contact {
            for g in &f.dissipated {
                out.push(
                    dissipation_monitor(&traj, eta, h, g, self.t("dissipation"), self.t("bracket"))
                        .unwrap_or_else(|e| CheckRecord::errored(format!("dissipation[{}]", g.expr), &e)),
                );
            }
        }
        for g in &f.conserved {
            out.push(
                conservation_monitor(&traj, g, self.t("conservation"))
                    .unwrap_or_else(|e| CheckRecord::errored(format!("conservation[{}]", g.expr), &e)),
            );
        }
        if let Some((link, src, r0)) = &f.lift {
            out.push(self.lift_commutes(link, src, *r0, f, &traj));
        }
        (out, Some(traj))
    }

    fn order_ratio(&self, f: &FlowSpec, exact: &[f64], h: f64) -> CheckRecord {
        let err = |dt: f64| integrate_source(&f.source, &f.x0, f.t_end, dt).map(|t| max_diff(t.endpoint(), exact));
        match (err(h), err(h / 2.0)) {
            (Ok(a), Ok(b)) => {
                let ratio = a / b;
                range_record("rk4_order_ratio", ratio, self.t("order_min"), self.t("order_max"))
                    .with_metric("error_dt", Metric::Real(a))
                    .with_metric("error_dt_half", Metric::Real(b))
                    .with_metric("dt", Metric::Real(h))
            }
            (Err(e), _) | (_, Err(e)) => CheckRecord::errored("rk4_order_ratio", &e),
        }
    }

    fn lift_commutes(
        &self,
        link: &SymplectizationLink,
        src: &contactforge_core::VectorSource,
        r0: f64,
        f: &FlowSpec,
        base: &Trajectory,
    ) -> CheckRecord {
        let y0 = link.lift_point(&f.x0, r0);
        match integrate_source(src, &y0, f.t_end, f.dt) {
            Ok(up) => {
                let worst = up
                    .states
                    .iter()
                    .zip(&base.states)
                    .map(|(y, x)| max_diff(link.project_point(y), x))
                    .fold(0.0, f64::max);
                let mut rec = CheckRecord::single("lift_projects_to_flow", worst, self.t("commutation"))
                    .with_metric("r0", Metric::Real(r0));
                rec.samples = up.states.len();
                rec.evaluated = up.states.len();
                rec
            }
            Err(e) => CheckRecord::errored("lift_projects_to_flow", &e),
        }
    }
}

/// Task status for display: checks that were all skipped make a skipped task.
pub fn task_status(t: &TaskReport) -> Status {
    if !t.checks.is_empty() && t.checks.iter().all(|c| c.status == Status::Skipped) {
        Status::Skipped
    } else {
        t.status()
    }
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::parse_scenario;

    fn scenario(tasks: &str) -> Scenario {
        let text = format!(
            r#"
name = "r"
[chart]
coords = ["x", "y", "z"]
[tensors.eta]
kind = "one-form"
components = {{ x = "-y", z = "1" }}
[structures.C]
type = "contact"
form = "eta"
{tasks}
"#
        );
        parse_scenario(&text, "r.toml").unwrap()
    }

    const VOLUME: &str = "[[tasks]]\nname = \"c\"\nkind = \"contact\"\nstructure = \"C\"\n";
    const FLOW: &str = "[[tasks]]\nname = \"f\"\nkind = \"flow\"\nstructure = \"C\"\nhamiltonian = \"1\"\n\
                        x0 = [0.0, 0.0, 0.0]\nt_end = 1.0\ndt = 0.1\nexact = [\"0\", \"0\", \"-1\"]\n";

    #[test]
    fn unselected_tasks_are_reported_as_skipped() {
        let s = scenario(&format!("{VOLUME}{FLOW}"));
        let r = run(&s, &RunOptions::new(Command::Flow)).unwrap();
        assert_eq!(r.report.tasks.len(), 2);
        assert_eq!(task_status(&r.report.tasks[0]), Status::Skipped);
        assert_eq!(r.report.tasks[0].checks[0].name, "not_selected");
        assert_eq!(task_status(&r.report.tasks[1]), Status::Pass, "{:?}", r.report.tasks[1]);
        assert_eq!(r.trajectories.len(), 1);
        assert_eq!(r.report.exit_code(), 0);
    }

    #[test]
    fn expected_failures_invert_the_gate() {
        let s = scenario(&format!("{VOLUME}expect = \"fail\"\n"));
        let r = run(&s, &RunOptions::new(Command::All)).unwrap();
        let t = &r.report.tasks[0];
        assert!(t.checks.iter().filter(|c| c.name != "expected_failure").all(|c| c.diagnostic));
        let last = t.checks.last().unwrap();
        assert_eq!(last.name, "expected_failure");
        assert_eq!(last.status, Status::Fail);
        assert_eq!(r.report.exit_code(), 1);
    }

    #[test]
    fn tolerance_overrides_apply_and_are_validated() {
        let s = scenario(FLOW);
        let mut opts = RunOptions::new(Command::All);
        opts.tolerances.push(("flow".into(), 0.0));
        let r = run(&s, &opts).unwrap();
        assert_eq!(r.tolerances.get("flow"), 0.0);
        assert_eq!(r.report.exit_code(), 1);
        opts.tolerances = vec![("nonsense".into(), 1.0)];
        assert!(run(&s, &opts).is_err());
    }

    #[test]
    fn seed_and_samples_come_from_options_then_scenario() {
        let s = scenario(VOLUME);
        let r = run(&s, &RunOptions::new(Command::All)).unwrap();
        assert_eq!((r.report.seed, r.report.samples), (42, 64));
        let mut opts = RunOptions::new(Command::All);
        opts.seed = Some(3);
        opts.samples = Some(5);
        let r = run(&s, &opts).unwrap();
        assert_eq!((r.report.seed, r.report.samples), (3, 5));
        assert_eq!(r.report.tasks[0].checks[0].samples, 5);
    }
}
