//! Scenario files: TOML declarations of charts, fields, tensors,
//! structures, systems and tasks, resolved into core objects at load time.

use std::collections::BTreeMap;
use std::ops::Range;
use std::path::Path;
use std::sync::Arc;

use serde::Deserialize;
use toml::Spanned;

use contactforge_core::sampling::{sample_points, SamplingConfig};
use contactforge_core::structures::is_jacobi;
use contactforge_core::symplectization::{symplectize, SymplectizationLink};
use contactforge_core::{
    parse, Chart, ContactForm, ExactSymplectic, Expr, FormField, JacobiStructure, MultivectorField,
    Policy, ScalarField, VectorSource,
};

use crate::builtin;
use crate::error::{CliError, CliResult};
use crate::task::{resolve_task, Task};

/// Named tolerances and their defaults. `--tol NAME=V` and the scenario's
/// `[tolerances]` block may only override names listed here.
pub const DEFAULT_TOLERANCES: &[(&str, f64)] = &[
    ("bracket", 1e-9),
    ("closedness", 1e-8),
    ("cluster", 1e-6),
    ("commutation", 1e-8),
    ("compatibility", 1e-9),
    ("complex", 1e-8),
    ("conservation", 1e-9),
    ("coverage", 0.9),
    ("det", 1e-9),
    ("dissipation", 1e-8),
    ("eigen_homogeneity", 1e-6),
    ("eigenvalue", 1e-9),
    ("euler", 1e-9),
    ("flow", 1e-8),
    ("homogeneity", 1e-9),
    ("involution", 1e-6),
    ("jacobi", 1e-8),
    ("order_max", 20.0),
    ("order_min", 12.0),
    ("residual", 1e-9),
    ("separability", 1e-5),
    ("volume", 1e-9),
];

pub const DEFAULT_SAMPLES: usize = 64;
pub const DEFAULT_SEED: u64 = 42;

/// Samples and seed used for the load-time Jacobi check of declared
/// structures.
const LOAD_CHECK_SAMPLES: usize = 16;
const LOAD_CHECK_SEED: u64 = 0;

#[derive(Debug, Clone, PartialEq)]
pub struct Tolerances(BTreeMap<String, f64>);

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances(
            DEFAULT_TOLERANCES
                .iter()
                .map(|(k, v)| (k.to_string(), *v))
                .collect(),
        )
    }
}

impl Tolerances {
    pub fn get(&self, name: &str) -> f64 {
        self.0[name]
    }

    pub fn set(&mut self, name: &str, value: f64) -> Result<(), String> {
        match self.0.get_mut(name) {
            Some(v) => {
                if !value.is_finite() || value < 0.0 {
                    return Err(format!("tolerance `{name}` must be a non-negative number"));
                }
                *v = value;
                Ok(())
            }
            None => Err(format!(
                "unknown tolerance `{name}` (known: {})",
                DEFAULT_TOLERANCES
                    .iter()
                    .map(|(k, _)| *k)
                    .collect::<Vec<_>>()
                    .join(", ")
            )),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.0.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn policy(&self) -> Policy {
        Policy {
            min_coverage: self.get("coverage"),
            ..Policy::default()
        }
    }
}

/// Sampling settings of a scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Sampling {
    pub samples: usize,
    pub seed: u64,
    pub lo: f64,
    pub hi: f64,
    pub margin: f64,
    pub max_attempts: usize,
    /// Per-chart coordinate boxes.
    pub boxes: BTreeMap<String, Vec<Option<(f64, f64)>>>,
}

impl Default for Sampling {
    fn default() -> Self {
        let d = SamplingConfig::default();
        Sampling {
            samples: DEFAULT_SAMPLES,
            seed: DEFAULT_SEED,
            lo: d.lo,
            hi: d.hi,
            margin: d.margin,
            max_attempts: d.max_attempts,
            boxes: BTreeMap::new(),
        }
    }
}

impl Sampling {
    /// Sampling configuration for `chart`. A symplectised chart inherits the
    /// boxes of its base.
    pub fn config(&self, chart: &Chart) -> SamplingConfig {
        let boxes = self
            .boxes
            .get(&chart.name)
            .or_else(|| {
                chart
                    .name
                    .strip_suffix("xR+")
                    .and_then(|base| self.boxes.get(base))
            })
            .cloned()
            .unwrap_or_default();
        SamplingConfig {
            lo: self.lo,
            hi: self.hi,
            boxes,
            margin: self.margin,
            max_attempts: self.max_attempts,
        }
    }

    pub fn points(
        &self,
        chart: &Chart,
        n: usize,
        seed: u64,
        extra: &[Expr],
    ) -> contactforge_core::Result<Vec<Vec<f64>>> {
        sample_points(chart, n, seed, &self.config(chart), extra)
    }
}

/// A declared tensor field.
#[derive(Debug, Clone)]
pub enum Tensor {
    Vector(MultivectorField),
    Bivector(MultivectorField),
    OneForm(FormField),
    TwoForm(FormField),
}

impl Tensor {
    pub fn kind(&self) -> &'static str {
        match self {
            Tensor::Vector(_) => "vector",
            Tensor::Bivector(_) => "bivector",
            Tensor::OneForm(_) => "one-form",
            Tensor::TwoForm(_) => "two-form",
        }
    }

    pub fn chart(&self) -> &Arc<Chart> {
        match self {
            Tensor::Vector(t) | Tensor::Bivector(t) => &t.chart,
            Tensor::OneForm(t) | Tensor::TwoForm(t) => &t.chart,
        }
    }
}

/// A declared geometric structure.
#[derive(Debug, Clone)]
pub enum Structure {
    Contact(ContactForm),
    Jacobi(JacobiStructure),
    ExactSymplectic(ExactSymplectic),
}

impl Structure {
    pub fn chart(&self) -> &Arc<Chart> {
        match self {
            Structure::Contact(c) => c.chart(),
            Structure::Jacobi(j) => j.chart(),
            Structure::ExactSymplectic(s) => s.chart(),
        }
    }

    /// The Jacobi structure this declaration defines.
    pub fn jacobi(&self) -> JacobiStructure {
        match self {
            Structure::Contact(c) => JacobiStructure::contact(c),
            Structure::Jacobi(j) => j.clone(),
            Structure::ExactSymplectic(s) => JacobiStructure::symplectic(s),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Structure::Contact(_) => "contact",
            Structure::Jacobi(j) if j.is_poisson() => "poisson",
            Structure::Jacobi(_) => "jacobi",
            Structure::ExactSymplectic(_) => "exact_symplectic",
        }
    }

    /// Hamiltonian vector field of `h`.
    pub fn hamiltonian_field(&self, h: &ScalarField) -> Result<VectorSource, String> {
        match self {
            Structure::Contact(c) => Ok(VectorSource::ContactHamiltonian(c.clone(), h.clone())),
            Structure::ExactSymplectic(s) => Ok(VectorSource::Hamiltonian(s.clone(), h.clone())),
            Structure::Jacobi(j) if j.is_poisson() => Ok(VectorSource::Sharp(j.clone(), h.clone())),
            Structure::Jacobi(_) => Err(
                "Hamiltonian fields of Jacobi structures with a nonzero vector field are \
                 supported through contact forms only"
                    .into(),
            ),
        }
    }
}

/// A Hamiltonian with candidate integrals.
#[derive(Debug, Clone)]
pub struct System {
    pub structure: String,
    pub hamiltonian: ScalarField,
    pub integrals: Vec<ScalarField>,
}

/// A loaded, cross-referenced scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub description: Option<String>,
    /// File path or `builtin:<name>`.
    pub source: String,
    pub chart: Arc<Chart>,
    pub charts: BTreeMap<String, Arc<Chart>>,
    pub fields: BTreeMap<String, ScalarField>,
    pub tensors: BTreeMap<String, Tensor>,
    pub structures: BTreeMap<String, Structure>,
    pub systems: BTreeMap<String, System>,
    pub tolerances: Tolerances,
    pub sampling: Sampling,
    pub tasks: Vec<Task>,
}

/// Maps byte offsets of the source text to `file:line:col`.
pub struct Locator<'a> {
    path: &'a str,
    text: &'a str,
}

impl<'a> Locator<'a> {
    pub fn new(path: &'a str, text: &'a str) -> Self {
        Locator { path, text }
    }

    pub fn at(&self, span: Range<usize>) -> String {
        let upto = &self.text[..span.start.min(self.text.len())];
        let line = upto.matches('\n').count() + 1;
        let col = upto.rfind('\n').map_or(upto.len(), |i| upto.len() - i - 1) + 1;
        format!("{}:{line}:{col}", self.path)
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    name: String,
    description: Option<String>,
    chart: Spanned<RawChart>,
    #[serde(default)]
    charts: BTreeMap<String, Spanned<RawChart>>,
    #[serde(default)]
    fields: BTreeMap<String, Spanned<RawField>>,
    #[serde(default)]
    tensors: BTreeMap<String, Spanned<RawTensor>>,
    #[serde(default)]
    structures: BTreeMap<String, Spanned<RawStructure>>,
    #[serde(default)]
    systems: BTreeMap<String, Spanned<RawSystem>>,
    tolerances: Option<Spanned<BTreeMap<String, f64>>>,
    sampling: Option<Spanned<RawSampling>>,
    #[serde(default)]
    tasks: Vec<Spanned<toml::Table>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChart {
    name: Option<String>,
    coords: Vec<String>,
    #[serde(default)]
    constraints: Vec<String>,
    #[serde(default)]
    boxes: BTreeMap<String, [f64; 2]>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawField {
    Expr(String),
    OnChart { expr: String, chart: String },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTensor {
    kind: String,
    chart: Option<String>,
    #[serde(default)]
    components: BTreeMap<String, String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStructure {
    #[serde(rename = "type")]
    kind: String,
    form: Option<String>,
    bivector: Option<String>,
    vector: Option<String>,
    /// Run the load-time Jacobi check (default true).
    check: Option<bool>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSystem {
    structure: String,
    hamiltonian: String,
    #[serde(default)]
    integrals: Vec<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSampling {
    samples: Option<usize>,
    seed: Option<u64>,
    #[serde(rename = "box")]
    bounds: Option<[f64; 2]>,
    margin: Option<f64>,
    max_attempts: Option<usize>,
}

/// Name resolution shared by structure and task declarations.
pub struct Scope<'a> {
    pub loc: &'a Locator<'a>,
    pub chart: Arc<Chart>,
    pub charts: BTreeMap<String, Arc<Chart>>,
    pub fields: BTreeMap<String, ScalarField>,
    pub tensors: BTreeMap<String, Tensor>,
    pub structures: BTreeMap<String, Structure>,
    pub systems: BTreeMap<String, System>,
    pub links: BTreeMap<String, SymplectizationLink>,
}

impl Scope<'_> {
    pub fn chart_named(&self, name: &str, at: &str) -> CliResult<Arc<Chart>> {
        self.charts.get(name).cloned().ok_or_else(|| CliError::UnknownReference {
            location: at.into(),
            name: name.into(),
            what: "chart".into(),
        })
    }

    /// A named field, or an inline expression parsed on `chart`.
    pub fn function(&self, text: &str, chart: &Arc<Chart>, at: &str) -> CliResult<ScalarField> {
        if let Some(f) = self.fields.get(text) {
            if !f.chart.same_as(chart) {
                return Err(CliError::Invalid {
                    location: at.into(),
                    message: format!(
                        "field `{text}` lives on chart `{}`, expected chart `{}`",
                        f.chart.name, chart.name
                    ),
                });
            }
            return Ok(f.clone());
        }
        let e = parse(text).map_err(|e| CliError::Parse {
            location: at.into(),
            message: format!("`{text}`: {e}"),
        })?;
        ScalarField::new(chart, e).map_err(|e| CliError::from_core(at, e))
    }

    pub fn functions(&self, texts: &[String], chart: &Arc<Chart>, at: &str) -> CliResult<Vec<ScalarField>> {
        texts.iter().map(|t| self.function(t, chart, at)).collect()
    }

    pub fn expr_on(&self, text: &str, chart: &Chart, at: &str) -> CliResult<Expr> {
        let e = parse(text).map_err(|e| CliError::Parse {
            location: at.into(),
            message: format!("`{text}`: {e}"),
        })?;
        chart.check_vars(&e).map_err(|e| CliError::from_core(at, e))?;
        Ok(e)
    }

    pub fn tensor(&self, name: &str, at: &str) -> CliResult<&Tensor> {
        self.tensors.get(name).ok_or_else(|| CliError::UnknownReference {
            location: at.into(),
            name: name.into(),
            what: "tensor".into(),
        })
    }

    pub fn vector(&self, name: &str, at: &str) -> CliResult<MultivectorField> {
        match self.tensor(name, at)? {
            Tensor::Vector(v) => Ok(v.clone()),
            other => Err(wrong_kind(at, name, other.kind(), "vector")),
        }
    }

    pub fn bivector(&self, name: &str, at: &str) -> CliResult<MultivectorField> {
        match self.tensor(name, at)? {
            Tensor::Bivector(v) => Ok(v.clone()),
            other => Err(wrong_kind(at, name, other.kind(), "bivector")),
        }
    }

    pub fn one_form(&self, name: &str, at: &str) -> CliResult<FormField> {
        match self.tensor(name, at)? {
            Tensor::OneForm(v) => Ok(v.clone()),
            other => Err(wrong_kind(at, name, other.kind(), "one-form")),
        }
    }

    pub fn structure(&self, name: &str, at: &str) -> CliResult<&Structure> {
        self.structures.get(name).ok_or_else(|| CliError::UnknownReference {
            location: at.into(),
            name: name.into(),
            what: "structure".into(),
        })
    }

    pub fn contact(&self, name: &str, at: &str) -> CliResult<ContactForm> {
        match self.structure(name, at)? {
            Structure::Contact(c) => Ok(c.clone()),
            other => Err(wrong_kind(at, name, other.kind(), "contact")),
        }
    }

    pub fn link(&self, name: &str, at: &str) -> CliResult<SymplectizationLink> {
        self.contact(name, at)?;
        Ok(self.links[name].clone())
    }

    pub fn system(&self, name: &str, at: &str) -> CliResult<&System> {
        self.systems.get(name).ok_or_else(|| CliError::UnknownReference {
            location: at.into(),
            name: name.into(),
            what: "system".into(),
        })
    }

    /// A vector field named by an exact symplectic structure (its Liouville
    /// field) or by a vector tensor.
    pub fn vector_source(&self, name: &str, at: &str) -> CliResult<VectorSource> {
        if let Some(s) = self.structures.get(name) {
            return match s {
                Structure::ExactSymplectic(t) => Ok(VectorSource::Liouville(t.clone())),
                Structure::Contact(c) => Ok(VectorSource::Reeb(c.clone())),
                other => Err(wrong_kind(at, name, other.kind(), "exact_symplectic or contact")),
            };
        }
        Ok(VectorSource::Field(self.vector(name, at)?))
    }

    pub fn coordinate_indices(&self, chart: &Chart, names: &[String], at: &str) -> CliResult<Vec<usize>> {
        names
            .iter()
            .map(|n| {
                chart.index_of(n).ok_or_else(|| CliError::UnknownReference {
                    location: at.into(),
                    name: n.clone(),
                    what: format!("coordinate of chart `{}`", chart.name),
                })
            })
            .collect()
    }
}

fn wrong_kind(at: &str, name: &str, got: &str, want: &str) -> CliError {
    CliError::Invalid {
        location: at.into(),
        message: format!("`{name}` is a {got}, expected a {want}"),
    }
}

/// Loads a scenario from a file path, or a builtin by name.
pub fn load_scenario(path_or_builtin: &str) -> CliResult<Scenario> {
    let path = Path::new(path_or_builtin);
    if path.is_file() {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path_or_builtin.into(),
            source,
        })?;
        return parse_scenario(&text, path_or_builtin);
    }
    match builtin::source(path_or_builtin) {
        Some(text) => parse_scenario(text, &format!("builtin:{path_or_builtin}")),
        None => Err(CliError::NotFound(path_or_builtin.into())),
    }
}

/// Parses and cross-references scenario text. `origin` names the source in
/// error locations.
pub fn parse_scenario(text: &str, origin: &str) -> CliResult<Scenario> {
    let raw: RawScenario = toml::from_str(text).map_err(|e| CliError::Syntax {
        location: origin.into(),
        message: e.to_string().trim_end().to_string(),
    })?;
    let loc = Locator::new(origin, text);

    let mut sampling = Sampling::default();
    if let Some(s) = &raw.sampling {
        let at = loc.at(s.span());
        let s = s.get_ref();
        if let Some(n) = s.samples {
            if n == 0 {
                return Err(invalid(&at, "sample count must be positive"));
            }
            sampling.samples = n;
        }
        if let Some(seed) = s.seed {
            sampling.seed = seed;
        }
        if let Some([lo, hi]) = s.bounds {
            if !(lo < hi) {
                return Err(invalid(&at, "sampling box needs lo < hi"));
            }
            sampling.lo = lo;
            sampling.hi = hi;
        }
        if let Some(m) = s.margin {
            sampling.margin = m;
        }
        if let Some(m) = s.max_attempts {
            sampling.max_attempts = m;
        }
    }

    let mut charts = BTreeMap::new();
    let primary_name = raw.chart.get_ref().name.clone().unwrap_or_else(|| "M".into());
    let chart = build_chart(&loc, &primary_name, &raw.chart, &mut sampling)?;
    charts.insert(primary_name.clone(), chart.clone());
    for (name, rc) in &raw.charts {
        let at = loc.at(rc.span());
        if charts.contains_key(name) {
            return Err(invalid(&at, &format!("chart `{name}` declared twice")));
        }
        if rc.get_ref().name.as_ref().is_some_and(|n| n != name) {
            return Err(invalid(&at, "a chart in [charts] is named by its key"));
        }
        let c = build_chart(&loc, name, rc, &mut sampling)?;
        charts.insert(name.clone(), c);
    }

    let mut scope = Scope {
        loc: &loc,
        chart: chart.clone(),
        charts,
        fields: BTreeMap::new(),
        tensors: BTreeMap::new(),
        structures: BTreeMap::new(),
        systems: BTreeMap::new(),
        links: BTreeMap::new(),
    };

    for (name, rf) in &raw.fields {
        let at = loc.at(rf.span());
        let (expr, c) = match rf.get_ref() {
            RawField::Expr(e) => (e.as_str(), chart.clone()),
            RawField::OnChart { expr, chart } => (expr.as_str(), scope.chart_named(chart, &at)?),
        };
        if c.index_of(name).is_some() {
            return Err(invalid(
                &at,
                &format!("field name `{name}` shadows a coordinate of chart `{}`", c.name),
            ));
        }
        let e = scope.expr_on(expr, &c, &at)?;
        let f = ScalarField::new(&c, e).map_err(|e| CliError::from_core(&at, e))?;
        scope.fields.insert(name.clone(), f);
    }

    for (name, rt) in &raw.tensors {
        let at = loc.at(rt.span());
        let t = build_tensor(&scope, rt.get_ref(), &at)?;
        scope.tensors.insert(name.clone(), t);
    }

    for (name, rs) in &raw.structures {
        let at = loc.at(rs.span());
        let s = build_structure(&scope, name, rs.get_ref(), &at, &sampling)?;
        if let Structure::Contact(c) = &s {
            let link = symplectize(c).map_err(|e| CliError::from_core(&at, e))?;
            scope.links.insert(name.clone(), link);
        }
        scope.structures.insert(name.clone(), s);
    }

    for (name, rs) in &raw.systems {
        let at = loc.at(rs.span());
        let rs = rs.get_ref();
        let s = scope.structure(&rs.structure, &at)?;
        let c = s.chart().clone();
        let system = System {
            structure: rs.structure.clone(),
            hamiltonian: scope.function(&rs.hamiltonian, &c, &at)?,
            integrals: scope.functions(&rs.integrals, &c, &at)?,
        };
        scope.systems.insert(name.clone(), system);
    }

    let mut tolerances = Tolerances::default();
    if let Some(block) = &raw.tolerances {
        let tol_at = loc.at(block.span());
        for (k, v) in block.get_ref() {
            tolerances.set(k, *v).map_err(|m| invalid(&tol_at, &m))?;
        }
    }

    let mut tasks: Vec<Task> = Vec::new();
    for t in &raw.tasks {
        let at = loc.at(t.span());
        let task = resolve_task(&scope, t.get_ref().clone(), &at)?;
        if tasks.iter().any(|o| o.name == task.name) {
            return Err(invalid(&at, &format!("task name `{}` used twice", task.name)));
        }
        tasks.push(task);
    }

    Ok(Scenario {
        name: raw.name,
        description: raw.description,
        source: origin.into(),
        chart,
        charts: scope.charts,
        fields: scope.fields,
        tensors: scope.tensors,
        structures: scope.structures,
        systems: scope.systems,
        tolerances,
        sampling,
        tasks,
    })
}

pub fn invalid(at: &str, message: &str) -> CliError {
    CliError::Invalid {
        location: at.into(),
        message: message.into(),
    }
}

fn build_chart(
    loc: &Locator<'_>,
    name: &str,
    rc: &Spanned<RawChart>,
    sampling: &mut Sampling,
) -> CliResult<Arc<Chart>> {
    let at = loc.at(rc.span());
    let r = rc.get_ref();
    if r.coords.is_empty() {
        return Err(invalid(&at, "a chart needs at least one coordinate"));
    }
    let bare = Chart::new(name, &r.coords).map_err(|e| CliError::from_core(&at, e))?;
    let constraints = r
        .constraints
        .iter()
        .map(|s| {
            let e = parse(s).map_err(|e| CliError::Parse {
                location: at.clone(),
                message: format!("`{s}`: {e}"),
            })?;
            bare.check_vars(&e).map_err(|e| CliError::from_core(&at, e))?;
            Ok(e)
        })
        .collect::<CliResult<Vec<_>>>()?;
    let chart = Chart::with_constraints(name, &r.coords, constraints).map_err(|e| CliError::from_core(&at, e))?;
    if !r.boxes.is_empty() {
        let mut boxes = vec![None; chart.dim()];
        for (coord, [lo, hi]) in &r.boxes {
            let i = chart.index_of(coord).ok_or_else(|| CliError::UnknownReference {
                location: at.clone(),
                name: coord.clone(),
                what: format!("coordinate of chart `{name}`"),
            })?;
            if !(lo < hi) {
                return Err(invalid(&at, &format!("box for `{coord}` needs lo < hi")));
            }
            boxes[i] = Some((*lo, *hi));
        }
        sampling.boxes.insert(name.to_string(), boxes);
    }
    Ok(chart)
}

fn parse_index(chart: &Chart, key: &str, degree: usize, at: &str) -> CliResult<Vec<usize>> {
    let parts: Vec<&str> = key.split(',').map(str::trim).collect();
    if parts.len() != degree {
        return Err(CliError::IndexOutOfRange {
            location: at.into(),
            message: format!("`{key}` has {} indices, expected {degree}", parts.len()),
        });
    }
    parts
        .iter()
        .map(|p| {
            if let Some(i) = chart.index_of(p) {
                return Ok(i);
            }
            match p.parse::<usize>() {
                Ok(i) if i < chart.dim() => Ok(i),
                Ok(i) => Err(CliError::IndexOutOfRange {
                    location: at.into(),
                    message: format!("index {i} in `{key}` on a {}-dimensional chart", chart.dim()),
                }),
                Err(_) => Err(CliError::UnknownReference {
                    location: at.into(),
                    name: p.to_string(),
                    what: format!("coordinate of chart `{}`", chart.name),
                }),
            }
        })
        .collect()
}

fn build_tensor(scope: &Scope<'_>, rt: &RawTensor, at: &str) -> CliResult<Tensor> {
    let chart = match &rt.chart {
        Some(c) => scope.chart_named(c, at)?,
        None => scope.chart.clone(),
    };
    let degree = match rt.kind.as_str() {
        "vector" | "one-form" => 1,
        "bivector" | "two-form" => 2,
        other => {
            return Err(invalid(
                at,
                &format!("unknown tensor kind `{other}` (vector, bivector, one-form, two-form)"),
            ))
        }
    };
    let mut entries = Vec::new();
    for (key, text) in &rt.components {
        let idx = parse_index(&chart, key, degree, at)?;
        let e = scope.expr_on(text, &chart, at)?;
        entries.push((idx, e));
    }
    let core = |e: contactforge_core::Error| CliError::from_core(at, e);
    if rt.kind.ends_with("form") {
        let mut f = FormField::zero(&chart, degree).map_err(core)?;
        for (idx, e) in entries {
            f.set(&idx, e).map_err(core)?;
        }
        Ok(if degree == 1 { Tensor::OneForm(f) } else { Tensor::TwoForm(f) })
    } else {
        let mut f = MultivectorField::zero(&chart, degree).map_err(core)?;
        for (idx, e) in entries {
            f.set(&idx, e).map_err(core)?;
        }
        Ok(if degree == 1 { Tensor::Vector(f) } else { Tensor::Bivector(f) })
    }
}

fn build_structure(
    scope: &Scope<'_>,
    name: &str,
    rs: &RawStructure,
    at: &str,
    sampling: &Sampling,
) -> CliResult<Structure> {
    let core = |e: contactforge_core::Error| CliError::from_core(at, e);
    let need = |v: &Option<String>, key: &str| -> CliResult<String> {
        v.clone()
            .ok_or_else(|| invalid(at, &format!("structure `{name}` of type `{}` needs `{key}`", rs.kind)))
    };
    let forbid = |v: &Option<String>, key: &str| -> CliResult<()> {
        match v {
            Some(_) => Err(invalid(
                at,
                &format!("`{key}` is not used by structures of type `{}`", rs.kind),
            )),
            None => Ok(()),
        }
    };
    let s = match rs.kind.as_str() {
        "contact" => {
            forbid(&rs.bivector, "bivector")?;
            forbid(&rs.vector, "vector")?;
            Structure::Contact(ContactForm::new(scope.one_form(&need(&rs.form, "form")?, at)?).map_err(core)?)
        }
        "exact_symplectic" => {
            forbid(&rs.bivector, "bivector")?;
            forbid(&rs.vector, "vector")?;
            Structure::ExactSymplectic(
                ExactSymplectic::new(scope.one_form(&need(&rs.form, "form")?, at)?).map_err(core)?,
            )
        }
        "poisson" => {
            forbid(&rs.form, "form")?;
            forbid(&rs.vector, "vector")?;
            Structure::Jacobi(JacobiStructure::poisson(scope.bivector(&need(&rs.bivector, "bivector")?, at)?).map_err(core)?)
        }
        "jacobi" => {
            forbid(&rs.form, "form")?;
            let l = scope.bivector(&need(&rs.bivector, "bivector")?, at)?;
            let e = scope.vector(&need(&rs.vector, "vector")?, at)?;
            Structure::Jacobi(JacobiStructure::new(l, e).map_err(core)?)
        }
        other => {
            return Err(invalid(
                at,
                &format!("unknown structure type `{other}` (contact, poisson, jacobi, exact_symplectic)"),
            ))
        }
    };
    if let Structure::Jacobi(j) = &s {
        if rs.check.unwrap_or(true) {
            let pts = sampling
                .points(j.chart(), LOAD_CHECK_SAMPLES, LOAD_CHECK_SEED, &[])
                .map_err(core)?;
            let rec = is_jacobi(j, &pts, &[], Tolerances::default().get("jacobi"), Policy::default());
            if !rec.passed() {
                return Err(invalid(
                    at,
                    &format!(
                        "structure `{name}` fails the Jacobi identity at load (max residual {:e}); \
                         set `check = false` to defer",
                        rec.max_residual
                    ),
                ));
            }
        }
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
name = "m"
[chart]
coords = ["x", "y"]
"#;

    #[test]
    fn locator_reports_line_and_column() {
        let loc = Locator::new("f.toml", "a\nbc\nd");
        assert_eq!(loc.at(0..1), "f.toml:1:1");
        assert_eq!(loc.at(3..4), "f.toml:2:2");
        assert_eq!(loc.at(5..6), "f.toml:3:1");
    }

    #[test]
    fn minimal_scenario_loads_with_defaults() {
        let s = parse_scenario(MINIMAL, "t").unwrap();
        assert_eq!(s.chart.name, "M");
        assert_eq!(s.sampling.samples, DEFAULT_SAMPLES);
        assert_eq!(s.tolerances.get("involution"), 1e-6);
        assert!(s.tasks.is_empty());
    }

    #[test]
    fn diagonal_bivector_slot_is_rejected() {
        let text = format!("{MINIMAL}\n[tensors.L]\nkind = \"bivector\"\ncomponents = {{ \"1,1\" = \"x\" }}\n");
        let err = parse_scenario(&text, "t").unwrap_err();
        assert!(matches!(err, CliError::AntisymmetryViolation { .. }), "{err}");
        let text = format!("{MINIMAL}\n[tensors.L]\nkind = \"bivector\"\ncomponents = {{ \"0,2\" = \"x\" }}\n");
        let err = parse_scenario(&text, "t").unwrap_err();
        assert!(matches!(err, CliError::IndexOutOfRange { .. }), "{err}");
    }

    #[test]
    fn unknown_names_are_located() {
        let text = format!("{MINIMAL}\n[fields]\nf = \"x + w\"\n");
        let err = parse_scenario(&text, "t.toml").unwrap_err();
        match err {
            CliError::UnknownReference { location, name, .. } => {
                assert_eq!(name, "w");
                assert!(location.starts_with("t.toml:"), "{location}");
            }
            other => panic!("{other}"),
        }
        let text = format!("{MINIMAL}\n[structures.P]\ntype = \"poisson\"\nbivector = \"nope\"\n");
        assert!(matches!(
            parse_scenario(&text, "t").unwrap_err(),
            CliError::UnknownReference { .. }
        ));
    }

    #[test]
    fn non_jacobi_structure_fails_at_load_unless_deferred() {
        let base = r#"
name = "m"
[chart]
coords = ["x", "y", "z"]
[tensors.L]
kind = "bivector"
components = { "x,y" = "z", "y,z" = "y" }
[structures.P]
type = "poisson"
bivector = "L"
"#;
        assert!(parse_scenario(base, "t").is_err());
        let deferred = format!("{base}check = false\n");
        assert!(parse_scenario(&deferred, "t").is_ok());
    }

    #[test]
    fn tolerance_names_are_checked() {
        let text = format!("{MINIMAL}\n[tolerances]\nwobble = 1.0\n");
        assert!(matches!(parse_scenario(&text, "t").unwrap_err(), CliError::Invalid { .. }));
        let mut t = Tolerances::default();
        assert!(t.set("residual", 1e-6).is_ok());
        assert!(t.set("residual", -1.0).is_err());
    }

    #[test]
    fn contradictory_constraints_exhaust_rejection() {
        let s = parse_scenario(
            "name = \"e\"\n[chart]\ncoords = [\"x\"]\nconstraints = [\"x\", \"-x\"]\n",
            "t",
        )
        .unwrap();
        let mut sampling = s.sampling.clone();
        sampling.max_attempts = 1000;
        let err = sampling.points(&s.chart, 4, 1, &[]).unwrap_err();
        assert_eq!(err.class(), "RejectionExhausted");
    }
}
