//! Task declarations: per-kind parameters resolved against a scenario scope.

use std::collections::HashMap;
use std::sync::Arc;

use serde::de::DeserializeOwned;
use serde::Deserialize;

use contactforge_core::symplectization::{cone_chart, lift_function, poissonize, SymplectizationLink};
use contactforge_core::{
    Chart, ChartMap, ContactForm, ExactSymplectic, Expr, FormField, JacobiStructure, MultivectorField,
    ScalarField, VectorSource,
};

use crate::error::{CliError, CliResult};
use crate::scenario::{invalid, Scope, Structure};

/// Command groups of the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Command {
    CheckStructure,
    Recursion,
    Involution,
    Integrable,
    Symplectize,
    NogoReport,
    Flow,
    All,
}

impl Command {
    pub const ALL: [Command; 8] = [
        Command::CheckStructure,
        Command::Recursion,
        Command::Involution,
        Command::Integrable,
        Command::Symplectize,
        Command::NogoReport,
        Command::Flow,
        Command::All,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::CheckStructure => "check-structure",
            Command::Recursion => "recursion",
            Command::Involution => "involution",
            Command::Integrable => "integrable",
            Command::Symplectize => "symplectize",
            Command::NogoReport => "nogo-report",
            Command::Flow => "flow",
            Command::All => "all",
        }
    }

    pub fn from_name(s: &str) -> Option<Command> {
        Command::ALL.into_iter().find(|c| c.name() == s)
    }

    /// Whether a task of group `g` runs under this command.
    pub fn selects(self, g: Command) -> bool {
        self == Command::All || self == g
    }
}

/// Homogeneity target of a `homogeneity` task.
#[derive(Debug, Clone)]
pub enum HomObject {
    Scalar(ScalarField),
    Form(FormField),
    Multivector(MultivectorField),
    Symplectic(ExactSymplectic),
    Bivector(JacobiStructure),
    Recursion(JacobiStructure, JacobiStructure),
    /// The Liouville field against itself; reported as skipped.
    DeltaSelf,
}

#[derive(Debug, Clone)]
pub struct HomSpec {
    pub label: String,
    pub object: HomObject,
    pub degree: Option<i32>,
}

/// Function family of an involution task.
#[derive(Debug, Clone)]
pub enum FamilySpec {
    Functions(Vec<ScalarField>),
    Eigenvalues(JacobiStructure, JacobiStructure),
}

/// Pairs of base functions for the symplectisation bracket checks.
#[derive(Debug, Clone)]
pub enum PairSpec {
    /// Random quadratic polynomials drawn from the run seed.
    Random(usize),
    Explicit(Vec<(ScalarField, ScalarField)>),
}

#[derive(Debug, Clone)]
pub struct FlowSpec {
    pub source: VectorSource,
    pub x0: Vec<f64>,
    pub t_end: f64,
    pub dt: f64,
    pub exact: Option<Vec<f64>>,
    /// Contact form and Hamiltonian, when the flow is a contact flow.
    pub contact: Option<(ContactForm, ScalarField)>,
    pub dissipated: Vec<ScalarField>,
    pub conserved: Vec<ScalarField>,
    pub order_dt: Option<f64>,
    /// Lifted flow on the symplectisation and the initial radius.
    pub lift: Option<(SymplectizationLink, VectorSource, f64)>,
}

#[derive(Debug, Clone)]
pub struct NoGoSpec {
    pub lambda: JacobiStructure,
    pub lambda1: JacobiStructure,
    pub delta: VectorSource,
    pub hamiltonian: Option<ScalarField>,
    pub h1: Option<ScalarField>,
    pub action: Option<(ScalarField, Vec<usize>)>,
    pub poissonized: bool,
}

#[derive(Debug, Clone)]
pub struct ConformalSpec {
    pub source: VectorSource,
    pub target: VectorSource,
    pub map: ChartMap,
    pub eta: ContactForm,
    pub eta_bar: ContactForm,
    pub factor: ScalarField,
    pub expected: Option<MultivectorField>,
}

/// A resolved task body.
#[derive(Debug, Clone)]
pub enum TaskSpec {
    Contact {
        eta: ContactForm,
        reeb: Option<MultivectorField>,
    },
    HamiltonianField {
        field: VectorSource,
        expected: MultivectorField,
    },
    Jacobi {
        j: JacobiStructure,
    },
    Compatibility {
        a: JacobiStructure,
        b: JacobiStructure,
        /// Total chart for the Poissonization route; `None` for Poisson pairs.
        total: Option<Arc<Chart>>,
    },
    Homogeneity {
        delta: VectorSource,
        targets: Vec<HomSpec>,
    },
    Recursion {
        lambda: JacobiStructure,
        lambda1: JacobiStructure,
        eigenvalues: Vec<ScalarField>,
        multiplicity: Option<usize>,
        independent: Option<usize>,
    },
    Involution {
        structures: Vec<(String, JacobiStructure)>,
        family: FamilySpec,
    },
    Bihamiltonian {
        field: VectorSource,
        lambda: JacobiStructure,
        h: ScalarField,
        lambda1: JacobiStructure,
        h1: ScalarField,
    },
    ContactIntegrable {
        eta: ContactForm,
        h: ScalarField,
        integrals: Vec<ScalarField>,
    },
    HomogeneousIntegrable {
        theta: ExactSymplectic,
        h: ScalarField,
        delta: VectorSource,
        integrals: Vec<ScalarField>,
    },
    Kolmogorov {
        h: ScalarField,
        actions: Vec<usize>,
    },
    Separability {
        h: ScalarField,
        lambda: JacobiStructure,
        lambda1: JacobiStructure,
    },
    ConformalChart(Box<ConformalSpec>),
    Lift {
        link: Box<SymplectizationLink>,
        pairs: Vec<(ScalarField, ScalarField)>,
    },
    Project {
        link: Box<SymplectizationLink>,
        pairs: Vec<(ScalarField, ScalarField)>,
        degree: i32,
    },
    BracketCorrespondence {
        link: Box<SymplectizationLink>,
        pairs: PairSpec,
    },
    SymplectizationConsistency {
        link: Box<SymplectizationLink>,
        pairs: PairSpec,
    },
    Poissonization {
        link: Box<SymplectizationLink>,
        j: JacobiStructure,
    },
    NoGo(Box<NoGoSpec>),
    Flow(Box<FlowSpec>),
}

impl TaskSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            TaskSpec::Contact { .. } => "contact",
            TaskSpec::HamiltonianField { .. } => "hamiltonian_field",
            TaskSpec::Jacobi { .. } => "jacobi",
            TaskSpec::Compatibility { .. } => "compatibility",
            TaskSpec::Homogeneity { .. } => "homogeneity",
            TaskSpec::Recursion { .. } => "recursion",
            TaskSpec::Involution { .. } => "involution",
            TaskSpec::Bihamiltonian { .. } => "bihamiltonian",
            TaskSpec::ContactIntegrable { .. } => "contact_integrable",
            TaskSpec::HomogeneousIntegrable { .. } => "homogeneous_integrable",
            TaskSpec::Kolmogorov { .. } => "kolmogorov",
            TaskSpec::Separability { .. } => "separability",
            TaskSpec::ConformalChart(_) => "conformal_chart",
            TaskSpec::Lift { .. } => "lift",
            TaskSpec::Project { .. } => "project",
            TaskSpec::BracketCorrespondence { .. } => "bracket_correspondence",
            TaskSpec::SymplectizationConsistency { .. } => "symplectization_consistency",
            TaskSpec::Poissonization { .. } => "poissonization",
            TaskSpec::NoGo(_) => "nogo",
            TaskSpec::Flow(_) => "flow",
        }
    }

    pub fn group(&self) -> Command {
        match self {
            TaskSpec::Contact { .. }
            | TaskSpec::HamiltonianField { .. }
            | TaskSpec::Jacobi { .. }
            | TaskSpec::Compatibility { .. }
            | TaskSpec::Homogeneity { .. } => Command::CheckStructure,
            TaskSpec::Recursion { .. } => Command::Recursion,
            TaskSpec::Involution { .. } | TaskSpec::Bihamiltonian { .. } => Command::Involution,
            TaskSpec::ContactIntegrable { .. }
            | TaskSpec::HomogeneousIntegrable { .. }
            | TaskSpec::Kolmogorov { .. }
            | TaskSpec::Separability { .. }
            | TaskSpec::ConformalChart(_) => Command::Integrable,
            TaskSpec::Lift { .. }
            | TaskSpec::Project { .. }
            | TaskSpec::BracketCorrespondence { .. }
            | TaskSpec::SymplectizationConsistency { .. }
            | TaskSpec::Poissonization { .. } => Command::Symplectize,
            TaskSpec::NoGo(_) => Command::NogoReport,
            TaskSpec::Flow(_) => Command::Flow,
        }
    }

    /// Name of the tolerance a task-level `tol` overrides.
    pub fn primary_tolerance(&self) -> &'static str {
        match self {
            TaskSpec::Jacobi { .. } | TaskSpec::Poissonization { .. } => "jacobi",
            TaskSpec::Compatibility { .. } => "compatibility",
            TaskSpec::Homogeneity { .. } | TaskSpec::NoGo(_) => "homogeneity",
            TaskSpec::Recursion { .. } => "eigenvalue",
            TaskSpec::Involution { .. } => "involution",
            TaskSpec::Kolmogorov { .. } => "det",
            TaskSpec::Separability { .. } => "separability",
            TaskSpec::Flow(_) => "flow",
            _ => "residual",
        }
    }
}

/// A declared task.
#[derive(Debug, Clone)]
pub struct Task {
    pub name: String,
    pub location: String,
    pub expect_fail: bool,
    pub tol: Option<f64>,
    pub samples: Option<usize>,
    /// Chart the task samples.
    pub chart: Arc<Chart>,
    /// Extra positivity constraints for sampling.
    pub domain: Vec<Expr>,
    pub spec: TaskSpec,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Common {
    name: String,
    kind: String,
    expect: Option<String>,
    tol: Option<f64>,
    samples: Option<usize>,
    chart: Option<String>,
    #[serde(default)]
    domain: Vec<String>,
}

const COMMON_KEYS: [&str; 7] = ["name", "kind", "expect", "tol", "samples", "chart", "domain"];

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ContactParams {
    structure: String,
    reeb: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct HamiltonianFieldParams {
    structure: String,
    hamiltonian: String,
    expected: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct StructureParams {
    structure: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PairParams {
    structures: [String; 2],
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct HomogeneityParams {
    delta: String,
    targets: Vec<RawHomTarget>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawHomTarget {
    object: Option<String>,
    recursion: Option<[String; 2]>,
    #[serde(default)]
    delta_self: bool,
    degree: Option<i32>,
    label: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RecursionParams {
    structures: [String; 2],
    #[serde(default)]
    eigenvalues: Vec<String>,
    multiplicity: Option<usize>,
    independent: Option<usize>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct InvolutionParams {
    structures: Vec<String>,
    functions: Option<Vec<String>>,
    eigenvalues_of: Option<[String; 2]>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BihamiltonianParams {
    field: String,
    structures: [String; 2],
    hamiltonians: [String; 2],
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SystemParams {
    system: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct HomogeneousIntegrableParams {
    system: String,
    #[serde(default)]
    lift: bool,
    delta: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct KolmogorovParams {
    hamiltonian: String,
    actions: Vec<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SeparabilityParams {
    hamiltonian: String,
    structures: [String; 2],
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ConformalParams {
    structure: String,
    hamiltonian: String,
    target_structure: String,
    target_hamiltonian: String,
    map: Vec<String>,
    factor: String,
    expected: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LiftParams {
    structure: String,
    functions: Vec<String>,
    expected: Vec<String>,
    degree: Option<i32>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BracketParams {
    structure: String,
    pairs: Option<usize>,
    functions: Option<Vec<[String; 2]>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PoissonizationParams {
    structure: String,
    jacobi: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NoGoParams {
    structures: [String; 2],
    delta: Option<String>,
    hamiltonian: Option<String>,
    h1: Option<String>,
    action: Option<ActionParams>,
    #[serde(default)]
    poissonize: bool,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ActionParams {
    hamiltonian: String,
    actions: Vec<String>,
    chart: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FlowParams {
    structure: String,
    hamiltonian: String,
    x0: Vec<f64>,
    t_end: f64,
    dt: f64,
    exact: Option<Vec<String>>,
    #[serde(default)]
    dissipated: Vec<String>,
    #[serde(default)]
    conserved: Vec<String>,
    order_dt: Option<f64>,
    #[serde(default)]
    lift: bool,
    lift_r0: Option<f64>,
}

fn params<T: DeserializeOwned>(body: toml::Table, kind: &str, at: &str) -> CliResult<T> {
    toml::Value::Table(body).try_into().map_err(|e: toml::de::Error| CliError::Invalid {
        location: at.into(),
        message: format!("task of kind `{kind}`: {}", e.message()),
    })
}

fn jacobi_pair(scope: &Scope<'_>, names: &[String; 2], at: &str) -> CliResult<(JacobiStructure, JacobiStructure)> {
    let a = scope.structure(&names[0], at)?.jacobi();
    let b = scope.structure(&names[1], at)?.jacobi();
    if !a.chart().same_as(b.chart()) {
        return Err(invalid(at, "the two structures live on different charts"));
    }
    Ok((a, b))
}

fn require_poisson(j: &JacobiStructure, name: &str, at: &str) -> CliResult<()> {
    if j.is_poisson() {
        Ok(())
    } else {
        Err(invalid(at, &format!("`{name}` must be a Poisson structure here")))
    }
}

fn pairs_from(
    scope: &Scope<'_>,
    lhs: &[String],
    lhs_chart: &Arc<Chart>,
    rhs: &[String],
    rhs_chart: &Arc<Chart>,
    at: &str,
) -> CliResult<Vec<(ScalarField, ScalarField)>> {
    if lhs.len() != rhs.len() {
        return Err(invalid(at, "`functions` and `expected` must have the same length"));
    }
    lhs.iter()
        .zip(rhs)
        .map(|(a, b)| Ok((scope.function(a, lhs_chart, at)?, scope.function(b, rhs_chart, at)?)))
        .collect()
}

fn constant(text: &str, at: &str) -> CliResult<f64> {
    let e = contactforge_core::parse(text).map_err(|e| CliError::Parse {
        location: at.into(),
        message: format!("`{text}`: {e}"),
    })?;
    e.eval::<f64>(&HashMap::new()).map_err(|e| CliError::from_core(at, e))
}

/// Resolves one `[[tasks]]` table.
pub fn resolve_task(scope: &Scope<'_>, mut table: toml::Table, at: &str) -> CliResult<Task> {
    let mut common_table = toml::Table::new();
    for k in COMMON_KEYS {
        if let Some(v) = table.remove(k) {
            common_table.insert(k.to_string(), v);
        }
    }
    let common: Common = params(common_table, "any", at)?;
    let at_owned = format!("{at} (task `{}`)", common.name);
    let at = at_owned.as_str();
    let expect_fail = match common.expect.as_deref() {
        None | Some("pass") => false,
        Some("fail") => true,
        Some(other) => return Err(invalid(at, &format!("`expect` must be \"pass\" or \"fail\", got `{other}`"))),
    };
    let explicit_chart = common
        .chart
        .as_deref()
        .map(|c| scope.chart_named(c, at))
        .transpose()?;
    let kind = common.kind.as_str();
    let ctx = |default: &Arc<Chart>| explicit_chart.clone().unwrap_or_else(|| default.clone());

    let (spec, chart): (TaskSpec, Arc<Chart>) = match kind {
        "contact" => {
            let p: ContactParams = params(table, kind, at)?;
            let eta = scope.contact(&p.structure, at)?;
            let reeb = p.reeb.as_deref().map(|r| scope.vector(r, at)).transpose()?;
            let c = eta.chart().clone();
            (TaskSpec::Contact { eta, reeb }, c)
        }
        "hamiltonian_field" => {
            let p: HamiltonianFieldParams = params(table, kind, at)?;
            let s = scope.structure(&p.structure, at)?;
            let c = s.chart().clone();
            let h = scope.function(&p.hamiltonian, &c, at)?;
            let field = s.hamiltonian_field(&h).map_err(|m| invalid(at, &m))?;
            let expected = scope.vector(&p.expected, at)?;
            (TaskSpec::HamiltonianField { field, expected }, c)
        }
        "jacobi" => {
            let p: StructureParams = params(table, kind, at)?;
            let j = scope.structure(&p.structure, at)?.jacobi();
            let c = j.chart().clone();
            (TaskSpec::Jacobi { j }, c)
        }
        "compatibility" => {
            let p: PairParams = params(table, kind, at)?;
            let (a, b) = jacobi_pair(scope, &p.structures, at)?;
            let c = a.chart().clone();
            let total = if a.is_poisson() && b.is_poisson() {
                None
            } else {
                let link = p
                    .structures
                    .iter()
                    .find_map(|n| scope.links.get(n).map(|l| l.total.clone()));
                Some(match link {
                    Some(t) => t,
                    None => cone_chart(&c).map_err(|e| CliError::from_core(at, e))?.0,
                })
            };
            (TaskSpec::Compatibility { a, b, total }, c)
        }
        "homogeneity" => {
            let p: HomogeneityParams = params(table, kind, at)?;
            let delta = scope.vector_source(&p.delta, at)?;
            let c = delta.chart().clone();
            let targets = p
                .targets
                .iter()
                .map(|t| resolve_hom_target(scope, t, &c, at))
                .collect::<CliResult<Vec<_>>>()?;
            (TaskSpec::Homogeneity { delta, targets }, c)
        }
        "recursion" => {
            let p: RecursionParams = params(table, kind, at)?;
            let (lambda, lambda1) = jacobi_pair(scope, &p.structures, at)?;
            require_poisson(&lambda, &p.structures[0], at)?;
            require_poisson(&lambda1, &p.structures[1], at)?;
            let c = lambda.chart().clone();
            let eigenvalues = scope.functions(&p.eigenvalues, &c, at)?;
            (
                TaskSpec::Recursion {
                    lambda,
                    lambda1,
                    eigenvalues,
                    multiplicity: p.multiplicity,
                    independent: p.independent,
                },
                c,
            )
        }
        "involution" => {
            let p: InvolutionParams = params(table, kind, at)?;
            if p.structures.is_empty() {
                return Err(invalid(at, "involution needs at least one structure"));
            }
            let structures = p
                .structures
                .iter()
                .map(|n| Ok((n.clone(), scope.structure(n, at)?.jacobi())))
                .collect::<CliResult<Vec<_>>>()?;
            let c = structures[0].1.chart().clone();
            let family = match (p.functions, p.eigenvalues_of) {
                (Some(fs), None) => FamilySpec::Functions(scope.functions(&fs, &c, at)?),
                (None, Some(pair)) => {
                    let (a, b) = jacobi_pair(scope, &pair, at)?;
                    FamilySpec::Eigenvalues(a, b)
                }
                _ => return Err(invalid(at, "give exactly one of `functions` and `eigenvalues_of`")),
            };
            (TaskSpec::Involution { structures, family }, c)
        }
        "bihamiltonian" => {
            let p: BihamiltonianParams = params(table, kind, at)?;
            let (lambda, lambda1) = jacobi_pair(scope, &p.structures, at)?;
            let c = lambda.chart().clone();
            let field = VectorSource::Field(scope.vector(&p.field, at)?);
            let h = scope.function(&p.hamiltonians[0], &c, at)?;
            let h1 = scope.function(&p.hamiltonians[1], &c, at)?;
            (
                TaskSpec::Bihamiltonian {
                    field,
                    lambda,
                    h,
                    lambda1,
                    h1,
                },
                c,
            )
        }
        "contact_integrable" => {
            let p: SystemParams = params(table, kind, at)?;
            let sys = scope.system(&p.system, at)?;
            let eta = scope.contact(&sys.structure, at)?;
            let c = eta.chart().clone();
            (
                TaskSpec::ContactIntegrable {
                    eta,
                    h: sys.hamiltonian.clone(),
                    integrals: sys.integrals.clone(),
                },
                c,
            )
        }
        "homogeneous_integrable" => {
            let p: HomogeneousIntegrableParams = params(table, kind, at)?;
            let sys = scope.system(&p.system, at)?;
            if p.lift {
                let link = scope.link(&sys.structure, at)?;
                let lift = |f: &ScalarField| lift_function(&link, f).map_err(|e| CliError::from_core(at, e));
                let h = lift(&sys.hamiltonian)?;
                let integrals = sys.integrals.iter().map(lift).collect::<CliResult<Vec<_>>>()?;
                let c = link.total.clone();
                (
                    TaskSpec::HomogeneousIntegrable {
                        theta: link.theta.clone(),
                        h,
                        delta: link.delta(),
                        integrals,
                    },
                    c,
                )
            } else {
                let theta = match scope.structure(&sys.structure, at)? {
                    Structure::ExactSymplectic(t) => t.clone(),
                    other => {
                        return Err(invalid(
                            at,
                            &format!(
                                "system structure is {}; use `lift = true` for contact systems",
                                other.kind()
                            ),
                        ))
                    }
                };
                let delta = match &p.delta {
                    Some(d) => scope.vector_source(d, at)?,
                    None => VectorSource::Liouville(theta.clone()),
                };
                let c = theta.chart().clone();
                (
                    TaskSpec::HomogeneousIntegrable {
                        theta,
                        h: sys.hamiltonian.clone(),
                        delta,
                        integrals: sys.integrals.clone(),
                    },
                    c,
                )
            }
        }
        "kolmogorov" => {
            let p: KolmogorovParams = params(table, kind, at)?;
            let default = scope
                .fields
                .get(&p.hamiltonian)
                .map_or_else(|| scope.chart.clone(), |f| f.chart.clone());
            let c = ctx(&default);
            let h = scope.function(&p.hamiltonian, &c, at)?;
            let actions = scope.coordinate_indices(&c, &p.actions, at)?;
            (TaskSpec::Kolmogorov { h, actions }, c)
        }
        "separability" => {
            let p: SeparabilityParams = params(table, kind, at)?;
            let (lambda, lambda1) = jacobi_pair(scope, &p.structures, at)?;
            let c = lambda.chart().clone();
            let h = scope.function(&p.hamiltonian, &c, at)?;
            (TaskSpec::Separability { h, lambda, lambda1 }, c)
        }
        "conformal_chart" => {
            let p: ConformalParams = params(table, kind, at)?;
            let eta = scope.contact(&p.structure, at)?;
            let eta_bar = scope.contact(&p.target_structure, at)?;
            let (c, cb) = (eta.chart().clone(), eta_bar.chart().clone());
            let h = scope.function(&p.hamiltonian, &c, at)?;
            let h_bar = scope.function(&p.target_hamiltonian, &cb, at)?;
            let exprs = p
                .map
                .iter()
                .map(|s| scope.expr_on(s, &c, at))
                .collect::<CliResult<Vec<_>>>()?;
            let map = ChartMap::new(&c, &cb, exprs).map_err(|e| CliError::from_core(at, e))?;
            let factor = scope.function(&p.factor, &c, at)?;
            let expected = p.expected.as_deref().map(|n| scope.vector(n, at)).transpose()?;
            if expected.as_ref().is_some_and(|v| !v.chart.same_as(&cb)) {
                return Err(invalid(at, "`expected` must live on the target chart"));
            }
            (
                TaskSpec::ConformalChart(Box::new(ConformalSpec {
                    source: VectorSource::ContactHamiltonian(eta.clone(), h),
                    target: VectorSource::ContactHamiltonian(eta_bar.clone(), h_bar),
                    map,
                    eta,
                    eta_bar,
                    factor,
                    expected,
                })),
                c,
            )
        }
        "lift" => {
            let p: LiftParams = params(table, kind, at)?;
            if p.degree.is_some() {
                return Err(invalid(at, "`degree` applies to `project` tasks only"));
            }
            let link = scope.link(&p.structure, at)?;
            let pairs = pairs_from(scope, &p.functions, &link.base, &p.expected, &link.total, at)?;
            let c = link.total.clone();
            (
                TaskSpec::Lift {
                    link: Box::new(link),
                    pairs,
                },
                c,
            )
        }
        "project" => {
            let p: LiftParams = params(table, kind, at)?;
            let link = scope.link(&p.structure, at)?;
            let pairs = pairs_from(scope, &p.functions, &link.total, &p.expected, &link.base, at)?;
            let c = link.total.clone();
            (
                TaskSpec::Project {
                    link: Box::new(link),
                    pairs,
                    degree: p.degree.unwrap_or(1),
                },
                c,
            )
        }
        "bracket_correspondence" | "symplectization_consistency" => {
            let p: BracketParams = params(table, kind, at)?;
            let link = scope.link(&p.structure, at)?;
            let pairs = match (p.pairs, p.functions) {
                (Some(n), None) if n > 0 => PairSpec::Random(n),
                (None, Some(fs)) => PairSpec::Explicit(
                    fs.iter()
                        .map(|[a, b]| Ok((scope.function(a, &link.base, at)?, scope.function(b, &link.base, at)?)))
                        .collect::<CliResult<Vec<_>>>()?,
                ),
                (None, None) => PairSpec::Random(10),
                _ => return Err(invalid(at, "give either a positive `pairs` count or `functions`")),
            };
            let c = link.total.clone();
            let link = Box::new(link);
            let spec = if kind == "bracket_correspondence" {
                TaskSpec::BracketCorrespondence { link, pairs }
            } else {
                TaskSpec::SymplectizationConsistency { link, pairs }
            };
            (spec, c)
        }
        "poissonization" => {
            let p: PoissonizationParams = params(table, kind, at)?;
            let link = scope.link(&p.structure, at)?;
            let j = match &p.jacobi {
                Some(n) => scope.structure(n, at)?.jacobi(),
                None => JacobiStructure::contact(&link.contact),
            };
            if !j.chart().same_as(&link.base) {
                return Err(invalid(at, "the Jacobi structure must live on the contact chart"));
            }
            let pj = poissonize(&link, &j).map_err(|e| CliError::from_core(at, e))?;
            let c = link.total.clone();
            (
                TaskSpec::Poissonization {
                    link: Box::new(link),
                    j: pj,
                },
                c,
            )
        }
        "nogo" => {
            let p: NoGoParams = params(table, kind, at)?;
            let (spec, c) = resolve_nogo(scope, p, at)?;
            (TaskSpec::NoGo(Box::new(spec)), c)
        }
        "flow" => {
            let p: FlowParams = params(table, kind, at)?;
            let (spec, c) = resolve_flow(scope, p, at)?;
            (TaskSpec::Flow(Box::new(spec)), c)
        }
        other => {
            return Err(invalid(at, &format!("unknown task kind `{other}`")));
        }
    };

    if let Some(c) = &explicit_chart {
        if !c.same_as(&chart) {
            return Err(invalid(
                at,
                &format!("task samples chart `{}`, not `{}`", chart.name, c.name),
            ));
        }
    }
    if common.samples == Some(0) {
        return Err(invalid(at, "sample count must be positive"));
    }
    let domain = common
        .domain
        .iter()
        .map(|d| scope.expr_on(d, &chart, at))
        .collect::<CliResult<Vec<_>>>()?;
    Ok(Task {
        name: common.name,
        location: at.to_string(),
        expect_fail,
        tol: common.tol,
        samples: common.samples,
        chart,
        domain,
        spec,
    })
}

fn resolve_hom_target(scope: &Scope<'_>, t: &RawHomTarget, chart: &Arc<Chart>, at: &str) -> CliResult<HomSpec> {
    let on_chart = |c: &Arc<Chart>, what: &str| -> CliResult<()> {
        if c.same_as(chart) {
            Ok(())
        } else {
            Err(invalid(at, &format!("`{what}` does not live on the chart of the Liouville field")))
        }
    };
    let (label, object) = match (&t.object, &t.recursion, t.delta_self) {
        (None, None, true) => ("Delta".to_string(), HomObject::DeltaSelf),
        (None, Some(pair), false) => {
            let (a, b) = jacobi_pair(scope, pair, at)?;
            on_chart(a.chart(), &pair[0])?;
            (format!("N({}, {})", pair[0], pair[1]), HomObject::Recursion(a, b))
        }
        (Some(name), None, false) => {
            let obj = if let Some(s) = scope.structures.get(name) {
                on_chart(s.chart(), name)?;
                match s {
                    Structure::ExactSymplectic(t) => HomObject::Symplectic(t.clone()),
                    Structure::Contact(c) => HomObject::Form(c.eta().clone()),
                    Structure::Jacobi(j) => HomObject::Bivector(j.clone()),
                }
            } else if let Some(tensor) = scope.tensors.get(name) {
                on_chart(tensor.chart(), name)?;
                match tensor {
                    crate::scenario::Tensor::Vector(v) | crate::scenario::Tensor::Bivector(v) => {
                        HomObject::Multivector(v.clone())
                    }
                    crate::scenario::Tensor::OneForm(f) | crate::scenario::Tensor::TwoForm(f) => {
                        HomObject::Form(f.clone())
                    }
                }
            } else {
                HomObject::Scalar(scope.function(name, chart, at)?)
            };
            (name.clone(), obj)
        }
        _ => {
            return Err(invalid(
                at,
                "each homogeneity target needs exactly one of `object`, `recursion`, `delta_self`",
            ))
        }
    };
    Ok(HomSpec {
        label: t.label.clone().unwrap_or(label),
        object,
        degree: t.degree,
    })
}

fn resolve_nogo(scope: &Scope<'_>, p: NoGoParams, at: &str) -> CliResult<(NoGoSpec, Arc<Chart>)> {
    let core = |e: contactforge_core::Error| CliError::from_core(at, e);
    let action = match &p.action {
        Some(a) => {
            let c = match &a.chart {
                Some(name) => scope.chart_named(name, at)?,
                None => scope
                    .fields
                    .get(&a.hamiltonian)
                    .map_or_else(|| scope.chart.clone(), |f| f.chart.clone()),
            };
            let h = scope.function(&a.hamiltonian, &c, at)?;
            let idx = scope.coordinate_indices(&c, &a.actions, at)?;
            Some((h, idx))
        }
        None => None,
    };
    if p.poissonize {
        if p.delta.is_some() {
            return Err(invalid(at, "`delta` is implied by `poissonize = true`"));
        }
        let link = scope.link(&p.structures[0], at)?;
        let base1 = scope.structure(&p.structures[1], at)?.jacobi();
        if !base1.chart().same_as(&link.base) {
            return Err(invalid(at, "the perturbation must live on the contact chart"));
        }
        let lambda = poissonize(&link, &JacobiStructure::contact(&link.contact)).map_err(core)?;
        let lambda1 = poissonize(&link, &base1).map_err(core)?;
        let lift = |name: &Option<String>| -> CliResult<Option<ScalarField>> {
            name.as_deref()
                .map(|n| lift_function(&link, &scope.function(n, &link.base, at)?).map_err(core))
                .transpose()
        };
        let spec = NoGoSpec {
            lambda,
            lambda1,
            delta: link.delta(),
            hamiltonian: lift(&p.hamiltonian)?,
            h1: lift(&p.h1)?,
            action,
            poissonized: true,
        };
        return Ok((spec, link.total.clone()));
    }
    let (lambda, lambda1) = jacobi_pair(scope, &p.structures, at)?;
    let c = lambda.chart().clone();
    let delta = match &p.delta {
        Some(d) => scope.vector_source(d, at)?,
        None => return Err(invalid(at, "`delta` is required unless `poissonize = true`")),
    };
    if !delta.chart().same_as(&c) {
        return Err(invalid(at, "`delta` must live on the chart of the structures"));
    }
    let f = |name: &Option<String>| name.as_deref().map(|n| scope.function(n, &c, at)).transpose();
    let spec = NoGoSpec {
        lambda,
        lambda1,
        delta,
        hamiltonian: f(&p.hamiltonian)?,
        h1: f(&p.h1)?,
        action,
        poissonized: false,
    };
    Ok((spec, c))
}

fn resolve_flow(scope: &Scope<'_>, p: FlowParams, at: &str) -> CliResult<(FlowSpec, Arc<Chart>)> {
    let s = scope.structure(&p.structure, at)?;
    let c = s.chart().clone();
    if p.x0.len() != c.dim() {
        return Err(invalid(at, &format!("`x0` needs {} entries", c.dim())));
    }
    if !(p.dt > 0.0) || !(p.t_end >= 0.0) {
        return Err(invalid(at, "flow needs dt > 0 and t_end >= 0"));
    }
    let h = scope.function(&p.hamiltonian, &c, at)?;
    let source = s.hamiltonian_field(&h).map_err(|m| invalid(at, &m))?;
    let exact = p
        .exact
        .as_ref()
        .map(|v| {
            if v.len() != c.dim() {
                return Err(invalid(at, &format!("`exact` needs {} entries", c.dim())));
            }
            v.iter().map(|t| constant(t, at)).collect::<CliResult<Vec<_>>>()
        })
        .transpose()?;
    if p.order_dt.is_some() && exact.is_none() {
        return Err(invalid(at, "`order_dt` needs an `exact` endpoint"));
    }
    let contact = match s {
        Structure::Contact(eta) => Some((eta.clone(), h.clone())),
        _ => None,
    };
    if contact.is_none() && !p.dissipated.is_empty() {
        return Err(invalid(at, "dissipated quantities need a contact structure"));
    }
    let lift = if p.lift {
        let link = scope.link(&p.structure, at)?;
        let big_h = lift_function(&link, &h).map_err(|e| CliError::from_core(at, e))?;
        let src = VectorSource::Hamiltonian(link.theta.clone(), big_h);
        Some((link, src, p.lift_r0.unwrap_or(1.0)))
    } else {
        None
    };
    Ok((
        FlowSpec {
            source,
            x0: p.x0,
            t_end: p.t_end,
            dt: p.dt,
            exact,
            contact,
            dissipated: scope.functions(&p.dissipated, &c, at)?,
            conserved: scope.functions(&p.conserved, &c, at)?,
            order_dt: p.order_dt,
            lift,
        },
        c,
    ))
}
