//! Jacobi, Poisson, contact and exact symplectic structures.
//!
//! Every structure evaluates pointwise over any [`Scalar`], so the same
//! code yields plain values, first derivatives (for Schouten brackets and
//! Lie derivatives) and second derivatives (for Jacobiators).

use std::sync::Arc;

use crate::autodiff::{self, seed, Dual, Jet2, Scalar};
use crate::chart::{Chart, ScalarFn, ScalarField};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::linalg::{self, Mat};
use crate::report::{self, CheckRecord, Metric, Policy, Verdict};
use crate::tensor::{
    dot, exterior_derivative, lie_derivative_form, lie_derivative_mixed,
    lie_derivative_multivector, pair_bivector, schouten, sharp_value, wedge, AltTensor, FormField,
    MultivectorField,
};

fn map_singular<T>(r: Result<T>, to: Error) -> Result<T> {
    r.map_err(|e| match e {
        Error::SingularMatrix => to,
        other => other,
    })
}

/// Largest absolute difference of two vectors.
pub fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn max_abs(a: &[f64]) -> f64 {
    a.iter().map(|v| v.abs()).fold(0.0, f64::max)
}

/// A contact one-form on a `2n+1`-dimensional chart.
#[derive(Debug, Clone)]
pub struct ContactForm {
    eta: FormField,
}

impl ContactForm {
    pub fn new(eta: FormField) -> Result<Self> {
        if eta.degree() != 1 {
            return Err(Error::InvalidArgument("contact form must be a one-form".into()));
        }
        if eta.chart.dim() % 2 == 0 {
            return Err(Error::InvalidArgument(format!(
                "contact form on even-dimensional chart `{}`",
                eta.chart.name
            )));
        }
        Ok(ContactForm { eta })
    }

    pub fn eta(&self) -> &FormField {
        &self.eta
    }

    pub fn chart(&self) -> &Arc<Chart> {
        &self.eta.chart
    }

    /// `n` in `dim = 2n + 1`.
    pub fn half_dim(&self) -> usize {
        (self.chart().dim() - 1) / 2
    }

    /// Conformally rescaled form `factor · η`.
    pub fn rescaled(&self, factor: &Expr) -> Result<Self> {
        ContactForm::new(self.eta.scale_by(factor)?)
    }

    /// `η` and the full matrix of `dη` at `x`.
    pub fn parts<S: Scalar>(&self, x: &[S]) -> Result<(Vec<S>, Mat<S>)> {
        let jet = self.eta.eval_jet(x)?;
        let d = exterior_derivative(&jet)?.as_matrix();
        Ok((jet.value().as_vector(), d))
    }

    fn flat_from_parts<S: Scalar>(eta: &[S], d: &Mat<S>) -> Mat<S> {
        let n = eta.len();
        (0..n)
            .map(|j| {
                (0..n)
                    .map(|i| d[i][j].clone() + eta[j].clone() * eta[i].clone())
                    .collect()
            })
            .collect()
    }

    /// Matrix of `♭(X) = ι_X dη + η(X) η`, acting on vector components.
    pub fn flat_matrix<S: Scalar>(&self, x: &[S]) -> Result<Mat<S>> {
        let (eta, d) = self.parts(x)?;
        Ok(Self::flat_from_parts(&eta, &d))
    }

    pub fn reeb_at<S: Scalar>(&self, x: &[S]) -> Result<Vec<S>> {
        let (eta, d) = self.parts(x)?;
        let b = Self::flat_from_parts(&eta, &d);
        map_singular(linalg::solve(&b, &eta), Error::SingularFlat)
    }

    /// `X_f = ♭⁻¹(df − (R(f) + f) η)`.
    pub fn hamiltonian_vf_at<S: Scalar>(&self, f: &ScalarField, x: &[S]) -> Result<Vec<S>> {
        self.chart().ensure_same(&f.chart)?;
        let (eta, d) = self.parts(x)?;
        let b = Self::flat_from_parts(&eta, &d);
        let fj = f.eval_jet(x)?;
        let df = fj.tangent(x.len());
        let reeb = map_singular(linalg::solve(&b, &eta), Error::SingularFlat)?;
        let c = dot(&reeb, &df) + fj.re;
        let rhs: Vec<S> = df
            .iter()
            .zip(&eta)
            .map(|(g, e)| g.clone() - c.clone() * e.clone())
            .collect();
        map_singular(linalg::solve(&b, &rhs), Error::SingularFlat)
    }

    /// Induced Jacobi pair: `Λ(α, β) = dη(♭⁻¹β̂, ♭⁻¹α̂)` with
    /// `α̂ = α − α(R) η`, and `E = −R`.
    pub fn jacobi_at<S: Scalar>(&self, x: &[S]) -> Result<(AltTensor<S>, Vec<S>)> {
        let (eta, d) = self.parts(x)?;
        let n = eta.len();
        let b = Self::flat_from_parts(&eta, &d);
        let m = map_singular(linalg::inverse(&b), Error::SingularFlat)?;
        let reeb = linalg::matvec(&m, &eta);
        let q = linalg::matmul(&linalg::transpose(&m), &linalg::matmul(&d, &m));
        let proj: Mat<S> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        let id = if i == j { S::one() } else { S::zero() };
                        id - eta[i].clone() * reeb[j].clone()
                    })
                    .collect()
            })
            .collect();
        let p = linalg::matmul(
            &linalg::transpose(&proj),
            &linalg::matmul(&linalg::transpose(&q), &proj),
        );
        let e = reeb.into_iter().map(|v| -v).collect();
        Ok((AltTensor::from_matrix(&p), e))
    }

    /// Top component of `η ∧ (dη)ⁿ`.
    pub fn volume_at(&self, x: &[f64]) -> Result<f64> {
        let jet = self.eta.eval_jet(x)?;
        let d = exterior_derivative(&jet)?;
        let mut acc = jet.value();
        for _ in 0..self.half_dim() {
            acc = wedge(&acc, &d)?;
        }
        let top: Vec<usize> = (0..self.chart().dim()).collect();
        Ok(acc.get(&top))
    }
}

/// Reeb field at a point.
pub fn reeb(eta: &ContactForm, x: &[f64]) -> Result<Vec<f64>> {
    eta.reeb_at(x)
}

/// Contact Hamiltonian vector field, with its defining equations
/// `η(X_f) = −f` and `ι_{X_f} dη = df − R(f) η` verified before returning.
pub fn contact_hamiltonian_vf(eta: &ContactForm, f: &ScalarField, x: &[f64]) -> Result<Vec<f64>> {
    let xf = eta.hamiltonian_vf_at(f, x)?;
    let (e, d) = eta.parts(x)?;
    let (fv, df) = autodiff::value_and_gradient(f, x)?;
    let r = eta.reeb_at(x)?;
    let rf = dot(&r, &df);
    let scale = 1.0 + max_abs(&xf) + max_abs(&df) + fv.abs();
    let res1 = (dot(&e, &xf) + fv).abs();
    let contraction: Vec<f64> = (0..x.len())
        .map(|j| (0..x.len()).map(|i| xf[i] * d[i][j]).sum::<f64>())
        .collect();
    let expected: Vec<f64> = df.iter().zip(&e).map(|(g, ei)| g - rf * ei).collect();
    let res2 = max_diff(&contraction, &expected);
    if res1.max(res2) > 1e-10 * scale {
        return Err(Error::InternalInconsistency(format!(
            "contact Hamiltonian field fails its defining equations (residuals {res1:e}, {res2:e})"
        )));
    }
    Ok(xf)
}

/// An exact symplectic structure `ω = −dθ`.
#[derive(Debug, Clone)]
pub struct ExactSymplectic {
    theta: FormField,
}

impl ExactSymplectic {
    pub fn new(theta: FormField) -> Result<Self> {
        if theta.degree() != 1 {
            return Err(Error::InvalidArgument("symplectic potential must be a one-form".into()));
        }
        if theta.chart.dim() % 2 == 1 {
            return Err(Error::InvalidArgument(format!(
                "symplectic potential on odd-dimensional chart `{}`",
                theta.chart.name
            )));
        }
        Ok(ExactSymplectic { theta })
    }

    pub fn theta(&self) -> &FormField {
        &self.theta
    }

    pub fn chart(&self) -> &Arc<Chart> {
        &self.theta.chart
    }

    /// `θ` and the matrix `W` of `ω = −dθ`.
    pub fn parts<S: Scalar>(&self, x: &[S]) -> Result<(Vec<S>, Mat<S>)> {
        let jet = self.theta.eval_jet(x)?;
        let w = exterior_derivative(&jet)?.scale(-1.0).as_matrix();
        Ok((jet.value().as_vector(), w))
    }

    pub fn omega_at<S: Scalar>(&self, x: &[S]) -> Result<AltTensor<S>> {
        Ok(AltTensor::from_matrix(&self.parts(x)?.1))
    }

    /// Matrix of the Poisson bivector with `♯(dF) = X_F`, i.e. `−W⁻¹`.
    pub fn poisson_matrix<S: Scalar>(&self, x: &[S]) -> Result<Mat<S>> {
        let (_, w) = self.parts(x)?;
        let inv = map_singular(linalg::inverse(&w), Error::SingularSymplectic)?;
        Ok(inv
            .into_iter()
            .map(|r| r.into_iter().map(|v| -v).collect())
            .collect())
    }

    /// Solves `ι_Δ ω = −θ`.
    pub fn liouville_at<S: Scalar>(&self, x: &[S]) -> Result<Vec<S>> {
        let (theta, w) = self.parts(x)?;
        let rhs: Vec<S> = theta.into_iter().map(|v| -v).collect();
        map_singular(
            linalg::solve(&linalg::transpose(&w), &rhs),
            Error::SingularSymplectic,
        )
    }

    /// Solves `ι_{X_f} ω = df`.
    pub fn hamiltonian_vf_at<S: Scalar>(&self, f: &ScalarField, x: &[S]) -> Result<Vec<S>> {
        self.chart().ensure_same(&f.chart)?;
        let (_, w) = self.parts(x)?;
        let df = f.eval_jet(x)?.tangent(x.len());
        map_singular(
            linalg::solve(&linalg::transpose(&w), &df),
            Error::SingularSymplectic,
        )
    }

    pub fn determinant(&self, x: &[f64]) -> Result<f64> {
        Ok(linalg::determinant(&self.parts(x)?.1))
    }
}

pub fn liouville_field(theta: &ExactSymplectic, x: &[f64]) -> Result<Vec<f64>> {
    theta.liouville_at(x)
}

pub fn hamiltonian_vf(theta: &ExactSymplectic, f: &ScalarField, x: &[f64]) -> Result<Vec<f64>> {
    theta.hamiltonian_vf_at(f, x)
}

/// Bracket of an exact symplectic manifold, `{F, G}_θ = X_F(G)`.
pub fn theta_bracket(
    theta: &ExactSymplectic,
    f: &ScalarField,
    g: &ScalarField,
    x: &[f64],
) -> Result<f64> {
    let xf = theta.hamiltonian_vf_at(f, x)?;
    Ok(dot(&xf, &autodiff::gradient(g, x)?))
}

#[derive(Debug, Clone)]
enum JacobiSource {
    Fields {
        lambda: MultivectorField,
        e: Option<MultivectorField>,
    },
    Contact(ContactForm),
    Symplectic(ExactSymplectic),
    Poissonized(Box<JacobiStructure>),
    Sum(Box<JacobiStructure>, Box<JacobiStructure>),
    Scaled(f64, Box<JacobiStructure>),
}

/// A Jacobi pair `(Λ, E)`; Poisson when `E ≡ 0`.
#[derive(Debug, Clone)]
pub struct JacobiStructure {
    chart: Arc<Chart>,
    source: JacobiSource,
}

impl JacobiStructure {
    pub fn new(lambda: MultivectorField, e: MultivectorField) -> Result<Self> {
        lambda.chart.ensure_same(&e.chart)?;
        if lambda.degree() != 2 || e.degree() != 1 {
            return Err(Error::InvalidArgument(
                "Jacobi structure needs a bivector and a vector field".into(),
            ));
        }
        Ok(JacobiStructure {
            chart: lambda.chart.clone(),
            source: JacobiSource::Fields {
                lambda,
                e: Some(e),
            },
        })
    }

    pub fn poisson(lambda: MultivectorField) -> Result<Self> {
        if lambda.degree() != 2 {
            return Err(Error::InvalidArgument("Poisson structure needs a bivector".into()));
        }
        Ok(JacobiStructure {
            chart: lambda.chart.clone(),
            source: JacobiSource::Fields { lambda, e: None },
        })
    }

    /// The Jacobi structure induced by a contact form.
    pub fn contact(eta: &ContactForm) -> Self {
        JacobiStructure {
            chart: eta.chart().clone(),
            source: JacobiSource::Contact(eta.clone()),
        }
    }

    /// The Poisson structure of `ω = −dθ`.
    pub fn symplectic(theta: &ExactSymplectic) -> Self {
        JacobiStructure {
            chart: theta.chart().clone(),
            source: JacobiSource::Symplectic(theta.clone()),
        }
    }

    /// `Λ/r + ∂_r ∧ E` on `total`, whose last coordinate is `r` and whose
    /// leading coordinates are those of the base chart.
    pub fn poissonized(base: &JacobiStructure, total: &Arc<Chart>) -> Result<Self> {
        let n = base.chart.dim();
        if total.dim() != n + 1 || total.coords()[..n] != *base.chart.coords() {
            return Err(Error::ChartMismatch {
                left: base.chart.name.clone(),
                right: total.name.clone(),
            });
        }
        Ok(JacobiStructure {
            chart: total.clone(),
            source: JacobiSource::Poissonized(Box::new(base.clone())),
        })
    }

    pub fn sum(a: &JacobiStructure, b: &JacobiStructure) -> Result<Self> {
        a.chart.ensure_same(&b.chart)?;
        Ok(JacobiStructure {
            chart: a.chart.clone(),
            source: JacobiSource::Sum(Box::new(a.clone()), Box::new(b.clone())),
        })
    }

    pub fn scaled(&self, c: f64) -> Self {
        JacobiStructure {
            chart: self.chart.clone(),
            source: JacobiSource::Scaled(c, Box::new(self.clone())),
        }
    }

    pub fn chart(&self) -> &Arc<Chart> {
        &self.chart
    }

    /// True when `E` vanishes by construction.
    pub fn is_poisson(&self) -> bool {
        match &self.source {
            JacobiSource::Fields { e, .. } => e.as_ref().is_none_or(|e| e.components().is_empty()),
            JacobiSource::Contact(_) => false,
            JacobiSource::Symplectic(_) | JacobiSource::Poissonized(_) => true,
            JacobiSource::Sum(a, b) => a.is_poisson() && b.is_poisson(),
            JacobiSource::Scaled(_, a) => a.is_poisson(),
        }
    }

    /// Expression-level components, when the structure was given by fields.
    pub fn fields(&self) -> Option<(&MultivectorField, Option<&MultivectorField>)> {
        match &self.source {
            JacobiSource::Fields { lambda, e } => Some((lambda, e.as_ref())),
            _ => None,
        }
    }

    /// `(Λ, E)` at `x`.
    pub fn eval<S: Scalar>(&self, x: &[S]) -> Result<(AltTensor<S>, Vec<S>)> {
        let n = self.chart.dim();
        if x.len() != n {
            return Err(Error::InvalidArgument(format!(
                "point of length {} on {n}-dimensional chart `{}`",
                x.len(),
                self.chart.name
            )));
        }
        match &self.source {
            JacobiSource::Fields { lambda, e } => {
                let l = lambda.eval(x)?;
                let ev = match e {
                    Some(e) => e.eval(x)?.as_vector(),
                    None => vec![S::zero(); n],
                };
                Ok((l, ev))
            }
            JacobiSource::Contact(eta) => eta.jacobi_at(x),
            JacobiSource::Symplectic(th) => {
                Ok((AltTensor::from_matrix(&th.poisson_matrix(x)?), vec![S::zero(); n]))
            }
            JacobiSource::Poissonized(base) => {
                let m = n - 1;
                let (l, e) = base.eval(&x[..m])?;
                let r = x[m].clone();
                let mut out = AltTensor::zeros(n, 2);
                for (idx, v) in l.components() {
                    out.set(&idx, v / r.clone());
                }
                for (i, ei) in e.into_iter().enumerate() {
                    out.set(&[i, m], -ei);
                }
                Ok((out, vec![S::zero(); n]))
            }
            JacobiSource::Sum(a, b) => {
                let (la, ea) = a.eval(x)?;
                let (lb, eb) = b.eval(x)?;
                let e = ea.into_iter().zip(eb).map(|(u, v)| u + v).collect();
                Ok((la.add(&lb)?, e))
            }
            JacobiSource::Scaled(c, a) => {
                let (l, e) = a.eval(x)?;
                Ok((l.scale(*c), e.into_iter().map(|v| v.scale(*c)).collect()))
            }
        }
    }

    /// `(Λ, E)` carrying first derivatives.
    pub fn eval_jet(&self, x: &[f64]) -> Result<(AltTensor<Dual<f64>>, Vec<Dual<f64>>)> {
        self.eval(&seed(x))
    }

    /// Full antisymmetric matrix of `Λ` at `x`.
    pub fn bivector_matrix<S: Scalar>(&self, x: &[S]) -> Result<Mat<S>> {
        Ok(self.eval(x)?.0.as_matrix())
    }
}

/// Bivector-field-only view used by the Poissonization of expression data.
pub fn poissonize_fields(
    lambda: &MultivectorField,
    e: Option<&MultivectorField>,
    total: &Arc<Chart>,
) -> Result<MultivectorField> {
    let n = lambda.chart.dim();
    if total.dim() != n + 1 || total.coords()[..n] != *lambda.chart.coords() {
        return Err(Error::ChartMismatch {
            left: lambda.chart.name.clone(),
            right: total.name.clone(),
        });
    }
    let r = Expr::var(total.coords()[n].clone());
    let mut out = lambda.map_exprs(total, |c| c.clone() / r.clone())?;
    if let Some(e) = e {
        for (idx, c) in e.components() {
            out.set(&[idx[0], n], -c.clone())?;
        }
    }
    Ok(out)
}

/// `Λ(df, dg) + f E(g) − g E(f)` from pointwise data.
pub fn bracket_from_parts<S: Scalar>(
    lambda: &AltTensor<S>,
    e: &[S],
    f: &S,
    df: &[S],
    g: &S,
    dg: &[S],
) -> S {
    pair_bivector(lambda, df, dg) + f.clone() * dot(e, dg) - g.clone() * dot(e, df)
}

pub fn jacobi_bracket(j: &JacobiStructure, f: &ScalarField, g: &ScalarField, x: &[f64]) -> Result<f64> {
    let (l, e) = j.eval(x)?;
    let (fv, df) = autodiff::value_and_gradient(f, x)?;
    let (gv, dg) = autodiff::value_and_gradient(g, x)?;
    Ok(bracket_from_parts(&l, &e, &fv, &df, &gv, &dg))
}

/// Bracket of two pointwise functions (value plus gradient).
pub fn bracket_of(j: &JacobiStructure, f: &dyn ScalarFn, g: &dyn ScalarFn, x: &[f64]) -> Result<f64> {
    let (l, e) = j.eval(x)?;
    let (fv, df) = f.value_and_gradient(x)?;
    let (gv, dg) = g.value_and_gradient(x)?;
    Ok(bracket_from_parts(&l, &e, &fv, &df, &gv, &dg))
}

/// Value and gradient of a scalar field, both carrying one more order of
/// derivatives.
#[derive(Debug, Clone)]
pub struct FieldJet {
    pub value: Dual<f64>,
    pub grad: Vec<Dual<f64>>,
}

impl FieldJet {
    pub fn of(f: &ScalarField, x: &[f64]) -> Result<Self> {
        let j: Jet2 = autodiff::jet2(f, x)?;
        Ok(FieldJet {
            value: j.value_dual(),
            grad: j.gradient_duals(),
        })
    }
}

fn jacobiator_from_jets(
    lj: &AltTensor<Dual<f64>>,
    ej: &[Dual<f64>],
    f: &FieldJet,
    g: &FieldJet,
    h: &FieldJet,
) -> f64 {
    let n = ej.len();
    let l0 = lj.value();
    let e0: Vec<f64> = ej.iter().map(|v| v.re).collect();
    let inner = |a: &FieldJet, b: &FieldJet| {
        bracket_from_parts(lj, ej, &a.value, &a.grad, &b.value, &b.grad)
    };
    let outer = |ab: Dual<f64>, c: &FieldJet| {
        let c_grad: Vec<f64> = c.grad.iter().map(|v| v.re).collect();
        bracket_from_parts(&l0, &e0, &ab.re, &ab.tangent(n), &c.value.re, &c_grad)
    };
    (outer(inner(f, g), h) + outer(inner(g, h), f) + outer(inner(h, f), g)).abs()
}

/// `|{{f,g},h} + {{g,h},f} + {{h,f},g}|` at `x`.
pub fn jacobiator_residual(
    j: &JacobiStructure,
    f: &ScalarField,
    g: &ScalarField,
    h: &ScalarField,
    x: &[f64],
) -> Result<f64> {
    let (lj, ej) = j.eval_jet(x)?;
    Ok(jacobiator_from_jets(
        &lj,
        &ej,
        &FieldJet::of(f, x)?,
        &FieldJet::of(g, x)?,
        &FieldJet::of(h, x)?,
    ))
}

/// Residuals of `[Λ,Λ] − 2E∧Λ` and `[E,Λ]` at `x`.
pub fn lichnerowicz_residuals(j: &JacobiStructure, x: &[f64]) -> Result<(f64, f64)> {
    let (lj, ej) = j.eval_jet(x)?;
    lichnerowicz_from_jets(&lj, &ej)
}

fn lichnerowicz_from_jets(lj: &AltTensor<Dual<f64>>, ej: &[Dual<f64>]) -> Result<(f64, f64)> {
    let n = ej.len();
    let first = if n >= 3 {
        let ll = schouten(lj, lj)?;
        let e0 = AltTensor::from_vector(ej.iter().map(|v| v.re).collect());
        let el = wedge(&e0, &lj.value())?;
        ll.sub(&el.scale(2.0))?.max_abs()
    } else {
        0.0
    };
    let ejet = AltTensor::from_vector(ej.to_vec());
    let second = schouten(&ejet, lj)?.max_abs();
    Ok((first, second))
}

/// Constant one, the coordinates, and their pairwise products.
pub fn default_test_family(chart: &Arc<Chart>) -> Vec<ScalarField> {
    let n = chart.dim();
    let mut fam = vec![ScalarField::constant(chart, 1.0)];
    fam.extend((0..n).map(|i| ScalarField::coordinate(chart, i)));
    for i in 0..n {
        for k in i..n {
            let e = Expr::var(chart.coords()[i].clone()) * Expr::var(chart.coords()[k].clone());
            fam.push(ScalarField {
                chart: chart.clone(),
                expr: e,
            });
        }
    }
    fam
}

/// Pointwise outcome of the Jacobi test: tensor residual and largest
/// Jacobiator over the test family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JacobiPoint {
    pub tensor: f64,
    pub jacobiator: f64,
}

pub fn jacobi_point(j: &JacobiStructure, family: &[ScalarField], x: &[f64]) -> Result<JacobiPoint> {
    let (lj, ej) = j.eval_jet(x)?;
    let (a, b) = lichnerowicz_from_jets(&lj, &ej)?;
    let jets = family
        .iter()
        .map(|f| FieldJet::of(f, x))
        .collect::<Result<Vec<_>>>()?;
    let mut worst = 0.0f64;
    for i in 0..jets.len() {
        for k in (i + 1)..jets.len() {
            for m in (k + 1)..jets.len() {
                worst = worst.max(jacobiator_from_jets(&lj, &ej, &jets[i], &jets[k], &jets[m]));
            }
        }
    }
    Ok(JacobiPoint {
        tensor: a.max(b),
        jacobiator: worst,
    })
}

/// Checks both the Lichnerowicz tensor equations and the Jacobi identity on
/// `family` (default family plus `extra`) at every sample. The two verdicts
/// must agree pointwise; disagreement is reported as inconsistent.
pub fn is_jacobi(
    j: &JacobiStructure,
    samples: &[Vec<f64>],
    extra: &[ScalarField],
    tol: f64,
    policy: Policy,
) -> CheckRecord {
    let mut family = default_test_family(j.chart());
    family.extend(extra.iter().cloned());
    let pts = report::evaluate(samples, |x| jacobi_point(j, &family, x));
    let mut max_t = 0.0f64;
    let mut max_j = 0.0f64;
    let outcomes: Vec<Result<Verdict>> = pts
        .into_iter()
        .map(|r| {
            r.and_then(|p| {
                max_t = max_t.max(p.tensor);
                max_j = max_j.max(p.jacobiator);
                let t_ok = p.tensor < tol;
                let j_ok = p.jacobiator < tol;
                if t_ok != j_ok {
                    return Err(Error::InternalInconsistency(format!(
                        "tensor residual {:e} vs Jacobiator {:e} disagree",
                        p.tensor, p.jacobiator
                    )));
                }
                Ok(Verdict::new(p.tensor.max(p.jacobiator), t_ok))
            })
        })
        .collect();
    report::aggregate("is_jacobi", tol, samples, outcomes, policy)
        .with_metric("max_tensor_residual", Metric::Real(max_t))
        .with_metric("max_jacobiator", Metric::Real(max_j))
}

/// A vector field known pointwise.
#[derive(Debug, Clone)]
pub enum VectorSource {
    Field(MultivectorField),
    Reeb(ContactForm),
    ContactHamiltonian(ContactForm, ScalarField),
    Liouville(ExactSymplectic),
    Hamiltonian(ExactSymplectic, ScalarField),
    /// `♯_Λ(dh)`.
    Sharp(JacobiStructure, ScalarField),
}

impl VectorSource {
    pub fn chart(&self) -> &Arc<Chart> {
        match self {
            VectorSource::Field(f) => &f.chart,
            VectorSource::Reeb(c) | VectorSource::ContactHamiltonian(c, _) => c.chart(),
            VectorSource::Liouville(s) | VectorSource::Hamiltonian(s, _) => s.chart(),
            VectorSource::Sharp(j, _) => j.chart(),
        }
    }

    pub fn eval<S: Scalar>(&self, x: &[S]) -> Result<Vec<S>> {
        match self {
            VectorSource::Field(f) => {
                if f.degree() != 1 {
                    return Err(Error::InvalidArgument("vector source must have degree 1".into()));
                }
                Ok(f.eval(x)?.as_vector())
            }
            VectorSource::Reeb(c) => c.reeb_at(x),
            VectorSource::ContactHamiltonian(c, f) => c.hamiltonian_vf_at(f, x),
            VectorSource::Liouville(s) => s.liouville_at(x),
            VectorSource::Hamiltonian(s, f) => s.hamiltonian_vf_at(f, x),
            VectorSource::Sharp(j, h) => {
                let (l, _) = j.eval(x)?;
                let dh = h.eval_jet(x)?.tangent(x.len());
                Ok(sharp_value(&l, &dh))
            }
        }
    }

    pub fn eval_jet(&self, x: &[f64]) -> Result<Vec<Dual<f64>>> {
        self.eval(&seed(x))
    }
}

/// Anything whose homogeneity under a vector field can be tested.
pub enum HomTarget<'a> {
    Scalar(&'a dyn ScalarFn),
    Form(&'a FormField),
    Multivector(&'a MultivectorField),
    /// `ω = −dθ`.
    SymplecticForm(&'a ExactSymplectic),
    /// The bivector of a Jacobi structure.
    Bivector(&'a JacobiStructure),
    /// The recursion operator of a pair of bivectors.
    Recursion(&'a JacobiStructure, &'a JacobiStructure),
}

/// `(T, ℒ_Δ T)` at `x`, flattened.
pub fn lie_pair(t: &HomTarget<'_>, delta: &VectorSource, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let flat = |a: AltTensor<f64>| a.components().into_iter().map(|(_, v)| v).collect::<Vec<_>>();
    match t {
        HomTarget::Scalar(f) => {
            let (v, g) = f.value_and_gradient(x)?;
            let d = delta.eval::<f64>(x)?;
            Ok((vec![v], vec![dot(&d, &g)]))
        }
        HomTarget::Form(a) => {
            let d = delta.eval_jet(x)?;
            let aj = a.eval_jet(x)?;
            let l = lie_derivative_form(&d, &aj)?;
            Ok((flat(aj.value()), flat(l)))
        }
        HomTarget::Multivector(a) => {
            let d = delta.eval_jet(x)?;
            let aj = a.eval_jet(x)?;
            let l = lie_derivative_multivector(&d, &aj)?;
            Ok((flat(aj.value()), flat(l)))
        }
        HomTarget::SymplecticForm(s) => {
            let d = delta.eval_jet(x)?;
            let w = s.omega_at(&seed(x))?;
            let l = lie_derivative_form(&d, &w)?;
            Ok((flat(w.value()), flat(l)))
        }
        HomTarget::Bivector(j) => {
            let d = delta.eval_jet(x)?;
            let (lj, _) = j.eval_jet(x)?;
            let l = lie_derivative_multivector(&d, &lj)?;
            Ok((flat(lj.value()), flat(l)))
        }
        HomTarget::Recursion(a, b) => {
            let d = delta.eval_jet(x)?;
            let nj = recursion_matrix(a, b, &seed(x))?;
            let l = lie_derivative_mixed(&d, &nj);
            let v: Vec<f64> = nj.iter().flatten().map(|z| z.re).collect();
            Ok((v, l.into_iter().flatten().collect()))
        }
    }
}

/// `N = P₁ P⁻¹` for bivector matrices `P`, `P₁`.
pub fn recursion_matrix<S: Scalar>(
    lambda: &JacobiStructure,
    lambda1: &JacobiStructure,
    x: &[S],
) -> Result<Mat<S>> {
    lambda.chart().ensure_same(lambda1.chart())?;
    let p = lambda.bivector_matrix(x)?;
    let p1 = lambda1.bivector_matrix(x)?;
    let pinv = map_singular(linalg::inverse(&p), Error::SingularSharp)?;
    Ok(linalg::matmul(&p1, &pinv))
}

/// Largest residual of `ℒ_Δ T − k T` at one point, relative to `1 + |T|`.
pub fn homogeneity_residual(value: &[f64], lie: &[f64], k: i32) -> f64 {
    let scale = 1.0 + max_abs(value);
    value
        .iter()
        .zip(lie)
        .map(|(v, l)| (l - k as f64 * v).abs())
        .fold(0.0, f64::max)
        / scale
}

/// Degree detection result with the residual profile over `k_range`.
#[derive(Debug, Clone, PartialEq)]
pub struct Homogeneity {
    pub degree: Option<i32>,
    /// `(k, max residual over samples)`.
    pub profile: Vec<(i32, f64)>,
    pub skipped: usize,
}

impl Homogeneity {
    pub fn describe(&self) -> String {
        let parts: Vec<String> = self
            .profile
            .iter()
            .map(|(k, r)| format!("k={k}: {r:.3e}"))
            .collect();
        parts.join(", ")
    }
}

/// Profiles `ℒ_Δ T − kT` for `k` in `k_range`; the degree is the unique
/// `k` with residual below `tol` at every evaluated sample.
pub fn homogeneity_profile(
    t: &HomTarget<'_>,
    delta: &VectorSource,
    samples: &[Vec<f64>],
    k_range: (i32, i32),
    tol: f64,
) -> Result<Homogeneity> {
    let mut profile: Vec<(i32, f64)> = (k_range.0..=k_range.1).map(|k| (k, 0.0)).collect();
    let mut skipped = 0;
    let mut evaluated = 0;
    for x in samples {
        match lie_pair(t, delta, x) {
            Ok((v, l)) => {
                evaluated += 1;
                for (k, r) in profile.iter_mut() {
                    *r = r.max(homogeneity_residual(&v, &l, *k));
                }
            }
            Err(e) if e.is_pointwise() => skipped += 1,
            Err(e) => return Err(e),
        }
    }
    let hits: Vec<i32> = profile
        .iter()
        .filter(|(_, r)| *r < tol)
        .map(|(k, _)| *k)
        .collect();
    let degree = if evaluated > 0 && hits.len() == 1 {
        Some(hits[0])
    } else {
        None
    };
    Ok(Homogeneity {
        degree,
        profile,
        skipped,
    })
}

pub const DEFAULT_K_RANGE: (i32, i32) = (-3, 3);

pub fn homogeneity_degree(
    t: &HomTarget<'_>,
    delta: &VectorSource,
    samples: &[Vec<f64>],
    k_range: (i32, i32),
    tol: f64,
) -> Result<i32> {
    let h = homogeneity_profile(t, delta, samples, k_range, tol)?;
    h.degree
        .ok_or_else(|| Error::NotHomogeneous(h.describe()))
}

/// Rank of a stack of differentials.
pub fn differential_rank(grads: &[Vec<f64>], rel_tol: f64) -> usize {
    linalg::numerical_rank(&grads.to_vec(), rel_tol)
}

pub const RANK_TOL: f64 = 1e-8;

fn duplicate_note(fs: &[ScalarField]) -> Option<String> {
    for i in 0..fs.len() {
        for k in (i + 1)..fs.len() {
            if fs[i].expr == fs[k].expr {
                return Some(format!("candidates #{i} and #{k} are identical"));
            }
        }
    }
    None
}

/// Contact integrability: dissipation, involution and the rank condition.
pub fn verify_contact_integrable(
    eta: &ContactForm,
    h: &ScalarField,
    integrals: &[ScalarField],
    samples: &[Vec<f64>],
    tol: f64,
    policy: Policy,
) -> Result<Vec<CheckRecord>> {
    let n = eta.half_dim();
    if integrals.len() != n + 1 {
        return Err(Error::WrongCount {
            expected: n + 1,
            got: integrals.len(),
        });
    }
    let j = JacobiStructure::contact(eta);
    let dissipated = report::residual_check("dissipated", tol, samples, policy, |x| {
        let mut worst = 0.0f64;
        for f in integrals {
            worst = worst.max(jacobi_bracket(&j, f, h, x)?.abs());
        }
        Ok(worst)
    });
    let involution = report::residual_check("involution", tol, samples, policy, |x| {
        let mut worst = 0.0f64;
        for a in 0..integrals.len() {
            for b in (a + 1)..integrals.len() {
                worst = worst.max(jacobi_bracket(&j, &integrals[a], &integrals[b], x)?.abs());
            }
        }
        Ok(worst)
    });
    let ranks = report::evaluate(samples, |x| {
        let grads = integrals
            .iter()
            .map(|f| autodiff::gradient(f, x))
            .collect::<Result<Vec<_>>>()?;
        Ok(differential_rank(&grads, RANK_TOL))
    });
    let rank = rank_record("rank", n, samples, ranks, policy);
    let rank = match duplicate_note(integrals) {
        Some(note) => rank.with_note(note),
        None => rank,
    };
    Ok(vec![dissipated, involution, rank])
}

fn rank_record(
    name: &str,
    required: usize,
    samples: &[Vec<f64>],
    ranks: Vec<Result<usize>>,
    policy: Policy,
) -> CheckRecord {
    let ok: Vec<usize> = ranks.iter().filter_map(|r| r.as_ref().ok().copied()).collect();
    let (lo, hi) = (ok.iter().min().copied(), ok.iter().max().copied());
    let outcomes = ranks
        .into_iter()
        .map(|r| {
            r.map(|k| {
                let deficit = required.saturating_sub(k) as f64;
                Verdict::new(deficit, k >= required)
            })
        })
        .collect();
    let mut rec = report::aggregate(name, 0.5, samples, outcomes, policy)
        .with_metric("required_rank", Metric::Int(required as i64));
    if let (Some(lo), Some(hi)) = (lo, hi) {
        rec = rec
            .with_metric("min_rank", Metric::Int(lo as i64))
            .with_metric("max_rank", Metric::Int(hi as i64));
    }
    rec
}

/// Homogeneous integrability on an exact symplectic chart.
pub fn verify_homogeneous_integrable(
    theta: &ExactSymplectic,
    hamiltonian: &ScalarField,
    delta: &VectorSource,
    integrals: &[ScalarField],
    samples: &[Vec<f64>],
    tol: f64,
    policy: Policy,
) -> Result<Vec<CheckRecord>> {
    let n = theta.chart().dim() / 2;
    if integrals.len() != n {
        return Err(Error::WrongCount {
            expected: n,
            got: integrals.len(),
        });
    }
    let conserved = report::residual_check("first_integrals", tol, samples, policy, |x| {
        let xh = theta.hamiltonian_vf_at(hamiltonian, x)?;
        let mut worst = 0.0f64;
        for f in integrals {
            worst = worst.max(dot(&xh, &autodiff::gradient(f, x)?).abs());
        }
        Ok(worst)
    });
    let involution = report::residual_check("involution", tol, samples, policy, |x| {
        let mut worst = 0.0f64;
        for a in 0..integrals.len() {
            for b in (a + 1)..integrals.len() {
                worst = worst.max(theta_bracket(theta, &integrals[a], &integrals[b], x)?.abs());
            }
        }
        Ok(worst)
    });
    let ranks = report::evaluate(samples, |x| {
        let grads = integrals
            .iter()
            .map(|f| autodiff::gradient(f, x))
            .collect::<Result<Vec<_>>>()?;
        Ok(differential_rank(&grads, RANK_TOL))
    });
    let rank = rank_record("rank", n, samples, ranks, policy);
    let homogeneous = report::residual_check("homogeneous_degree_1", tol, samples, policy, |x| {
        let mut worst = 0.0f64;
        for f in integrals.iter().chain(std::iter::once(hamiltonian)) {
            let (v, l) = lie_pair(&HomTarget::Scalar(f), delta, x)?;
            worst = worst.max(homogeneity_residual(&v, &l, 1));
        }
        Ok(worst)
    });
    Ok(vec![conserved, involution, rank, homogeneous])
}

/// `|η ∧ (dη)ⁿ|` stays away from zero at every sample.
pub fn contact_volume_check(eta: &ContactForm, samples: &[Vec<f64>], tol: f64, policy: Policy) -> CheckRecord {
    let vols = report::evaluate(samples, |x| eta.volume_at(x));
    let mut min_abs = f64::INFINITY;
    let outcomes = vols
        .into_iter()
        .map(|r| {
            r.map(|v| {
                min_abs = min_abs.min(v.abs());
                Verdict::new(v.abs(), v.abs() > tol)
            })
        })
        .collect();
    report::aggregate("contact_volume", tol, samples, outcomes, policy)
        .with_metric("min_abs_volume", Metric::Real(min_abs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn e(s: &str) -> Expr {
        parse(s).unwrap()
    }

    fn darboux3() -> ContactForm {
        let ch = Chart::new("M", &["q", "p", "z"]).unwrap();
        ContactForm::new(FormField::one_form(&ch, vec![e("-p"), e("0"), e("1")]).unwrap()).unwrap()
    }

    fn field(c: &Arc<Chart>, s: &str) -> ScalarField {
        ScalarField::parse(c, s).unwrap()
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        max_diff(a, b) < tol
    }

    #[test]
    fn reeb_examples() {
        let eta = darboux3();
        assert!(close(&reeb(&eta, &[0.3, -1.2, 0.8]).unwrap(), &[0.0, 0.0, 1.0], 1e-14));
        let two = eta.rescaled(&e("2")).unwrap();
        assert!(close(&reeb(&two, &[0.3, -1.2, 0.8]).unwrap(), &[0.0, 0.0, 0.5], 1e-14));
        let bar = Chart::new("bar", &["phi1", "phi2", "lam"]).unwrap();
        let etabar =
            ContactForm::new(FormField::one_form(&bar, vec![e("-lam"), e("1"), e("0")]).unwrap()).unwrap();
        assert!(close(&reeb(&etabar, &[0.1, 0.2, 0.7]).unwrap(), &[0.0, 1.0, 0.0], 1e-14));
    }

    #[test]
    fn contact_hamiltonian_examples() {
        let eta = darboux3();
        let c = eta.chart().clone();
        let xh = contact_hamiltonian_vf(&eta, &field(&c, "p - z"), &[0.0, 2.0, 5.0]).unwrap();
        assert!(close(&xh, &[1.0, 2.0, 5.0], 1e-12));
        let xz = contact_hamiltonian_vf(&eta, &field(&c, "z"), &[0.4, 2.0, 5.0]).unwrap();
        assert!(close(&xz, &[0.0, -2.0, -5.0], 1e-12));
        let bar = Chart::new("bar", &["phi1", "phi2", "lam"]).unwrap();
        let etabar =
            ContactForm::new(FormField::one_form(&bar, vec![e("-lam"), e("1"), e("0")]).unwrap()).unwrap();
        let xb = contact_hamiltonian_vf(&etabar, &field(&bar, "lam - 1"), &[0.3, 0.1, 1.7]).unwrap();
        assert!(close(&xb, &[1.0, 1.0, 0.0], 1e-12));
    }

    #[test]
    fn induced_jacobi_components() {
        let eta = darboux3();
        let j = JacobiStructure::contact(&eta);
        let (l, ev) = j.eval::<f64>(&[0.2, 1.3, -0.4]).unwrap();
        assert!((l.get(&[0, 1]) + 1.0).abs() < 1e-14);
        assert!((l.get(&[1, 2]) - 1.3).abs() < 1e-14);
        assert!(l.get(&[0, 2]).abs() < 1e-14);
        assert!(close(&ev, &[0.0, 0.0, -1.0], 1e-14));
        let c = eta.chart().clone();
        let qp = jacobi_bracket(&j, &field(&c, "q"), &field(&c, "p"), &[0.2, 1.3, -0.4]).unwrap();
        assert!((qp + 1.0).abs() < 1e-14);
        let ph = jacobi_bracket(&j, &field(&c, "p"), &field(&c, "p - z"), &[0.2, 1.3, -0.4]).unwrap();
        assert!(ph.abs() < 1e-14);
    }

    #[test]
    fn induced_bracket_matches_darboux_route_and_kills_eta() {
        let eta = darboux3();
        let c = eta.chart().clone();
        let j = JacobiStructure::contact(&eta);
        let fs = ["q*p + z", "sin(q) - z*p", "p^2", "exp(z)*q", "1"];
        for x in [[0.3, -0.7, 1.1], [1.5, 0.2, -0.9], [-1.0, 1.0, 0.5]] {
            for f in fs {
                for g in fs {
                    let (f, g) = (field(&c, f), field(&c, g));
                    let lhs = jacobi_bracket(&j, &f, &g, &x).unwrap();
                    let xf = contact_hamiltonian_vf(&eta, &f, &x).unwrap();
                    let (gv, dg) = autodiff::value_and_gradient(&g, &x).unwrap();
                    let rf = dot(&reeb(&eta, &x).unwrap(), &autodiff::gradient(&f, &x).unwrap());
                    let rhs = dot(&xf, &dg) + gv * rf;
                    assert!((lhs - rhs).abs() < 1e-9, "{lhs} vs {rhs}");
                }
            }
            let (l, _) = j.eval::<f64>(&x).unwrap();
            let etav = eta.eta().eval::<f64>(&x).unwrap().as_vector();
            assert!(max_abs(&sharp_value(&l, &etav)) < 1e-14);
        }
    }

    #[test]
    fn conformal_reeb_equations() {
        let eta = darboux3();
        let scaled = eta.rescaled(&e("exp(q*z)")).unwrap();
        let x = [0.4, -0.3, 0.9];
        let r = reeb(&scaled, &x).unwrap();
        let (ev, d) = scaled.parts(&x).unwrap();
        assert!((dot(&ev, &r) - 1.0).abs() < 1e-12);
        for jj in 0..3 {
            let c: f64 = (0..3).map(|i| r[i] * d[i][jj]).sum();
            assert!(c.abs() < 1e-12);
        }
    }

    #[test]
    fn liouville_and_hamiltonian_examples() {
        let ch = Chart::new("T", &["x1", "x2", "p1", "p2"]).unwrap();
        let th = ExactSymplectic::new(FormField::one_form(&ch, vec![e("p1"), e("p2"), e("0"), e("0")]).unwrap()).unwrap();
        let x = [0.5, 2.0, 0.7, 1.5];
        assert!(close(&liouville_field(&th, &x).unwrap(), &[0.0, 0.0, 0.7, 1.5], 1e-14));
        let xh = hamiltonian_vf(&th, &field(&ch, "p1 + p2*x2"), &x).unwrap();
        assert!(close(&xh, &[1.0, 2.0, 0.0, -1.5], 1e-14));
        assert!(close(&hamiltonian_vf(&th, &field(&ch, "3"), &x).unwrap(), &[0.0; 4], 1e-15));

        let s = Chart::new("S", &["q", "p", "z", "r"]).unwrap();
        let ths = ExactSymplectic::new(FormField::one_form(&s, vec![e("-r*p"), e("0"), e("r"), e("0")]).unwrap()).unwrap();
        let y = [0.1, 0.6, -1.2, 0.8];
        assert!(close(&liouville_field(&ths, &y).unwrap(), &[0.0, 0.0, 0.0, 0.8], 1e-14));
        let xh = hamiltonian_vf(&ths, &field(&s, "r*z - r*p"), &y).unwrap();
        assert!(close(&xh, &[1.0, 0.6, -1.2, -0.8], 1e-13), "{xh:?}");

        let aa = Chart::new("AA", &["phi1", "phi2", "lam1", "lam2"]).unwrap();
        let tha = ExactSymplectic::new(FormField::one_form(&aa, vec![e("lam1"), e("lam2"), e("0"), e("0")]).unwrap()).unwrap();
        assert!(close(&liouville_field(&tha, &[1.0, 2.0, 0.3, 0.9]).unwrap(), &[0.0, 0.0, 0.3, 0.9], 1e-14));
    }

    #[test]
    fn jacobiator_witnesses() {
        let r2 = Chart::new("R2", &["x", "y"]).unwrap();
        let lam = MultivectorField::zero(&r2, 2).unwrap().with(&[0, 1], e("x")).unwrap();
        let j = JacobiStructure::poisson(lam).unwrap();
        let r = jacobiator_residual(&j, &field(&r2, "x"), &field(&r2, "y"), &field(&r2, "x*y"), &[0.7, -1.1]).unwrap();
        assert!(r < 1e-12);

        let r3 = Chart::new("R3", &["x", "y", "z"]).unwrap();
        let lam = MultivectorField::zero(&r3, 2)
            .unwrap()
            .with(&[0, 1], e("y^2"))
            .unwrap()
            .with(&[1, 2], e("x"))
            .unwrap();
        let j = JacobiStructure::poisson(lam).unwrap();
        // {x,y} = y², {y,z} = x, {x,z} = 0: Jacobiator of (x,y,z) = {y²,z} + {x,x} + {0,y} = 2y·x
        let r = jacobiator_residual(&j, &field(&r3, "x"), &field(&r3, "y"), &field(&r3, "z"), &[0.5, 1.0, 0.3]).unwrap();
        assert!((r - 1.0).abs() < 1e-12, "{r}");
        let (t, _) = lichnerowicz_residuals(&j, &[0.5, 1.0, 0.3]).unwrap();
        assert!(t > 0.5);
    }

    #[test]
    fn is_jacobi_verdicts() {
        let pts: Vec<Vec<f64>> = (0..8)
            .map(|i| vec![0.1 * i as f64 - 0.3, 0.7 - 0.05 * i as f64, 0.2 * i as f64 + 0.1])
            .collect();
        let eta = darboux3();
        let rec = is_jacobi(&JacobiStructure::contact(&eta), &pts, &[], 1e-8, Policy::default());
        assert!(rec.passed(), "{rec:?}");

        let c4 = Chart::new("C", &["x1", "x2", "p1", "p2"]).unwrap();
        let can = MultivectorField::zero(&c4, 2)
            .unwrap()
            .with(&[0, 2], e("1"))
            .unwrap()
            .with(&[1, 3], e("1"))
            .unwrap();
        let pts4: Vec<Vec<f64>> = (0..6).map(|i| vec![0.1 * i as f64, 0.3, -0.2, 1.0 - 0.1 * i as f64]).collect();
        assert!(is_jacobi(&JacobiStructure::poisson(can.clone()).unwrap(), &pts4, &[], 1e-8, Policy::default()).passed());
        let broken = can.add(&MultivectorField::zero(&c4, 2).unwrap().with(&[0, 1], e("x1")).unwrap()).unwrap();
        let rec = is_jacobi(&JacobiStructure::poisson(broken).unwrap(), &pts4, &[], 1e-8, Policy::default());
        assert_eq!(rec.status, crate::report::Status::Fail);
    }

    #[test]
    fn volume_and_homogeneity() {
        let eta = darboux3();
        assert!((eta.volume_at(&[0.1, 0.2, 0.3]).unwrap().abs() - 1.0).abs() < 1e-14);

        let s = Chart::new("S", &["q", "p", "z", "r"]).unwrap();
        let theta = FormField::one_form(&s, vec![e("-r*p"), e("0"), e("r"), e("0")]).unwrap();
        let delta = VectorSource::Field(
            MultivectorField::vector(&s, vec![e("0"), e("0"), e("0"), e("r")]).unwrap(),
        );
        let pts: Vec<Vec<f64>> = (0..5).map(|i| vec![0.1 * i as f64, -0.4, 0.9, 0.2 + 0.3 * i as f64]).collect();
        assert_eq!(homogeneity_degree(&HomTarget::Form(&theta), &delta, &pts, DEFAULT_K_RANGE, 1e-9).unwrap(), 1);
        let sym = ExactSymplectic::new(theta).unwrap();
        assert_eq!(homogeneity_degree(&HomTarget::SymplecticForm(&sym), &delta, &pts, DEFAULT_K_RANGE, 1e-9).unwrap(), 1);
        let r2 = field(&s, "r^2");
        assert_eq!(homogeneity_degree(&HomTarget::Scalar(&r2), &delta, &pts, DEFAULT_K_RANGE, 1e-9).unwrap(), 2);
        let mixed = field(&s, "r + r^2");
        assert!(matches!(
            homogeneity_degree(&HomTarget::Scalar(&mixed), &delta, &pts, DEFAULT_K_RANGE, 1e-9),
            Err(Error::NotHomogeneous(_))
        ));
    }

    #[test]
    fn poissonized_contact_structure() {
        let eta = darboux3();
        let s = Chart::with_constraints("S", &["q", "p", "z", "r"], vec![e("r")]).unwrap();
        let j = JacobiStructure::contact(&eta);
        let pt = JacobiStructure::poissonized(&j, &s).unwrap();
        let x = [0.3, -0.6, 1.2, 0.7];
        let (l, ev) = pt.eval::<f64>(&x).unwrap();
        assert!(ev.iter().all(|v| *v == 0.0));
        assert!((l.get(&[0, 1]) + 1.0 / 0.7).abs() < 1e-14);
        assert!((l.get(&[1, 2]) - (-0.6 / 0.7)).abs() < 1e-14);
        assert!((l.get(&[2, 3]) - 1.0).abs() < 1e-14);
        // agrees with the Poisson structure of θ = r dz − rp dq
        let theta = ExactSymplectic::new(FormField::one_form(&s, vec![e("-r*p"), e("0"), e("r"), e("0")]).unwrap()).unwrap();
        let (lw, _) = JacobiStructure::symplectic(&theta).eval::<f64>(&x).unwrap();
        assert!(lw.residual(&l).unwrap() < 1e-14);
        let delta = VectorSource::Liouville(theta);
        let pts = vec![x.to_vec(), vec![-1.0, 0.4, 0.2, 1.9]];
        assert_eq!(homogeneity_degree(&HomTarget::Bivector(&pt), &delta, &pts, DEFAULT_K_RANGE, 1e-9).unwrap(), -1);
    }
}
