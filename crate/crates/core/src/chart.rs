//! Charts, scalar fields, and the pointwise scalar-function abstraction.

use std::collections::HashSet;
use std::fmt;
use std::sync::Arc;

use crate::autodiff::{self, Dual, Scalar};
use crate::error::{Error, Result};
use crate::expr::{self, Expr};

/// A single coordinate chart: ordered coordinate names plus positivity
/// constraints carving out the domain.
#[derive(Debug, Clone, PartialEq)]
pub struct Chart {
    pub name: String,
    coords: Vec<String>,
    /// Each expression must be strictly positive on the domain.
    constraints: Vec<Expr>,
}

impl Chart {
    pub fn new<S: AsRef<str>>(name: &str, coords: &[S]) -> Result<Arc<Chart>> {
        Self::with_constraints(name, coords, Vec::new())
    }

    pub fn with_constraints<S: AsRef<str>>(
        name: &str,
        coords: &[S],
        constraints: Vec<Expr>,
    ) -> Result<Arc<Chart>> {
        let coords: Vec<String> = coords.iter().map(|c| c.as_ref().to_string()).collect();
        let mut seen = HashSet::new();
        for c in &coords {
            if !seen.insert(c.as_str()) {
                return Err(Error::NameCollision(format!(
                    "coordinate `{c}` repeated in chart `{name}`"
                )));
            }
        }
        let chart = Chart {
            name: name.to_string(),
            coords,
            constraints,
        };
        for c in &chart.constraints {
            chart.check_vars(c)?;
        }
        Ok(Arc::new(chart))
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[String] {
        &self.coords
    }

    pub fn constraints(&self) -> &[Expr] {
        &self.constraints
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.coords.iter().position(|c| c == name)
    }

    /// Errors with `UnboundVariable` if `e` mentions a non-coordinate.
    pub fn check_vars(&self, e: &Expr) -> Result<()> {
        match e.free_variables().into_iter().find(|v| self.index_of(v).is_none()) {
            Some(v) => Err(Error::UnboundVariable(format!("{v} (chart `{}`)", self.name))),
            None => Ok(()),
        }
    }

    /// Evaluates an expression at a point given in this chart's ordering.
    pub fn eval<S: Scalar>(&self, e: &Expr, x: &[S]) -> Result<S> {
        e.eval_with(&|name: &str| self.index_of(name).and_then(|i| x.get(i).cloned()))
    }

    /// Smallest constraint value at `x`; `+inf` when unconstrained.
    /// Evaluation failures count as violations.
    pub fn constraint_margin(&self, x: &[f64]) -> f64 {
        self.constraints
            .iter()
            .map(|c| self.eval::<f64>(c, x).unwrap_or(f64::NEG_INFINITY))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn admissible(&self, x: &[f64]) -> bool {
        self.constraint_margin(x) > 0.0
    }

    pub fn same_as(&self, other: &Chart) -> bool {
        self.name == other.name && self.coords == other.coords
    }

    pub fn ensure_same(&self, other: &Chart) -> Result<()> {
        if self.same_as(other) {
            Ok(())
        } else {
            Err(Error::ChartMismatch {
                left: self.name.clone(),
                right: other.name.clone(),
            })
        }
    }
}

/// An expression bound to a chart.
#[derive(Debug, Clone)]
pub struct ScalarField {
    pub chart: Arc<Chart>,
    pub expr: Expr,
}

impl ScalarField {
    pub fn new(chart: &Arc<Chart>, expr: Expr) -> Result<Self> {
        chart.check_vars(&expr)?;
        Ok(ScalarField {
            chart: chart.clone(),
            expr,
        })
    }

    pub fn parse(chart: &Arc<Chart>, text: &str) -> Result<Self> {
        Self::new(chart, expr::parse(text)?)
    }

    pub fn constant(chart: &Arc<Chart>, v: f64) -> Self {
        ScalarField {
            chart: chart.clone(),
            expr: Expr::Const(v),
        }
    }

    pub fn coordinate(chart: &Arc<Chart>, index: usize) -> Self {
        ScalarField {
            chart: chart.clone(),
            expr: Expr::var(chart.coords()[index].clone()),
        }
    }

    pub fn eval<S: Scalar>(&self, x: &[S]) -> Result<S> {
        self.chart.eval(&self.expr, x)
    }

    /// Value with first derivatives over an arbitrary base scalar.
    pub fn eval_jet<S: Scalar>(&self, x: &[S]) -> Result<Dual<S>> {
        self.eval(&autodiff::seed(x))
    }
}

impl fmt::Display for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.expr)
    }
}

/// A scalar function known pointwise, with a gradient.
///
/// Expression fields differentiate exactly; functions known only through
/// values (eigenvalue fields) fall back to central differences.
pub trait ScalarFn: Send + Sync {
    fn value(&self, x: &[f64]) -> Result<f64>;
    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>>;
    fn label(&self) -> String;

    fn value_and_gradient(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        Ok((self.value(x)?, self.gradient(x)?))
    }
}

impl ScalarFn for ScalarField {
    fn value(&self, x: &[f64]) -> Result<f64> {
        self.eval(x)
    }
    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        autodiff::gradient(self, x)
    }
    fn label(&self) -> String {
        self.expr.to_string()
    }
    fn value_and_gradient(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        autodiff::value_and_gradient(self, x)
    }
}

/// A closure-backed function differentiated by central differences.
pub struct FdFunction<F> {
    pub label: String,
    pub f: F,
    pub step: f64,
}

impl<F> FdFunction<F>
where
    F: Fn(&[f64]) -> Result<f64> + Send + Sync,
{
    pub fn new(label: impl Into<String>, f: F) -> Self {
        FdFunction {
            label: label.into(),
            f,
            step: autodiff::DEFAULT_FD_STEP,
        }
    }
}

impl<F> ScalarFn for FdFunction<F>
where
    F: Fn(&[f64]) -> Result<f64> + Send + Sync,
{
    fn value(&self, x: &[f64]) -> Result<f64> {
        (self.f)(x)
    }
    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        autodiff::fd_gradient(&self.f, x, self.step)
    }
    fn label(&self) -> String {
        self.label.clone()
    }
}

/// A coordinate change `y = φ(x)` between two charts, given by one
/// expression per target coordinate in the source coordinates.
#[derive(Debug, Clone)]
pub struct ChartMap {
    pub source: Arc<Chart>,
    pub target: Arc<Chart>,
    pub exprs: Vec<Expr>,
}

impl ChartMap {
    pub fn new(source: &Arc<Chart>, target: &Arc<Chart>, exprs: Vec<Expr>) -> Result<Self> {
        if exprs.len() != target.dim() {
            return Err(Error::InvalidArgument(format!(
                "map into `{}` needs {} components, got {}",
                target.name,
                target.dim(),
                exprs.len()
            )));
        }
        for e in &exprs {
            source.check_vars(e)?;
        }
        Ok(ChartMap {
            source: source.clone(),
            target: target.clone(),
            exprs,
        })
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.exprs.iter().map(|e| self.source.eval(e, x)).collect()
    }

    /// Jacobian `∂yᵃ/∂xⁱ`, one row per target coordinate.
    pub fn jacobian(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        let sx = autodiff::seed(x);
        self.exprs
            .iter()
            .map(|e| {
                let v: Dual<f64> = self.source.eval(e, &sx)?;
                Ok((0..x.len()).map(|i| v.d(i)).collect())
            })
            .collect()
    }

    /// Image of the tangent vector `v` at `x`.
    pub fn pushforward(&self, x: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        Ok(self
            .jacobian(x)?
            .iter()
            .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// Pullback of the covector `a` given at `φ(x)`.
    pub fn pullback_covector(&self, x: &[f64], a: &[f64]) -> Result<Vec<f64>> {
        let j = self.jacobian(x)?;
        Ok((0..x.len())
            .map(|i| j.iter().zip(a).map(|(row, ak)| row[i] * ak).sum())
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicate_coordinates_rejected() {
        assert!(matches!(Chart::new("c", &["x", "x"]), Err(Error::NameCollision(_))));
    }

    #[test]
    fn fields_must_use_chart_coordinates() {
        let c = Chart::new("c", &["q", "p", "z"]).unwrap();
        assert!(ScalarField::parse(&c, "p - z").is_ok());
        assert!(matches!(
            ScalarField::parse(&c, "p - r"),
            Err(Error::UnboundVariable(_))
        ));
    }

    #[test]
    fn constraints_define_admissibility() {
        let c = Chart::with_constraints("c", &["x", "r"], vec![expr::parse("r").unwrap()]).unwrap();
        assert!(c.admissible(&[-1.0, 0.5]));
        assert!(!c.admissible(&[1.0, -0.5]));
        assert_eq!(c.constraint_margin(&[0.0, 0.25]), 0.25);
    }

    #[test]
    fn chart_map_pushforward() {
        let m = Chart::new("M", &["q", "p", "z"]).unwrap();
        let a = Chart::new("A", &["phi1", "phi2", "lam"]).unwrap();
        let exprs = ["q", "log(z)", "p/z"].iter().map(|s| expr::parse(s).unwrap()).collect();
        let map = ChartMap::new(&m, &a, exprs).unwrap();
        let x = [0.3, 0.6, 1.5];
        let v = map.pushforward(&x, &[1.0, 0.6, 1.5]).unwrap();
        assert!((v[0] - 1.0).abs() < 1e-15 && (v[1] - 1.0).abs() < 1e-15 && v[2].abs() < 1e-15);
        let pulled = map.pullback_covector(&x, &[0.0, 1.0, 0.0]).unwrap();
        assert_eq!(pulled, vec![0.0, 0.0, 1.0 / 1.5]);
    }
}
