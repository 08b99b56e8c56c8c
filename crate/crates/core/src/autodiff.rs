//! Forward-mode automatic differentiation.
//!
//! [`Dual`] carries a primal value and a tangent vector. Because `Dual<S>`
//! is itself a [`Scalar`] whenever `S` is, nesting gives second
//! derivatives: evaluating at `Dual<Dual<f64>>` seeds yields the Hessian in
//! the tangent-of-tangent slots. An empty tangent vector stands for the
//! zero tangent, so constants never need to know the chart dimension.

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

use crate::chart::ScalarField;
use crate::error::{Error, Result};

/// Field arithmetic plus the unary functions expressions can call.
pub trait Scalar:
    Clone
    + Debug
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn from_f64(v: f64) -> Self;
    /// The underlying real value, stripped of all tangent information.
    fn primal(&self) -> f64;
    fn exp(&self) -> Self;
    fn ln(&self) -> Self;
    fn sin(&self) -> Self;
    fn cos(&self) -> Self;
    fn sqrt(&self) -> Self;
    fn powi(&self, n: i32) -> Self;
    fn powf(&self, e: f64) -> Self;

    fn zero() -> Self {
        Self::from_f64(0.0)
    }

    fn one() -> Self {
        Self::from_f64(1.0)
    }

    fn scale(&self, c: f64) -> Self {
        self.clone() * Self::from_f64(c)
    }
}

impl Scalar for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }
    fn primal(&self) -> f64 {
        *self
    }
    fn exp(&self) -> Self {
        f64::exp(*self)
    }
    fn ln(&self) -> Self {
        f64::ln(*self)
    }
    fn sin(&self) -> Self {
        f64::sin(*self)
    }
    fn cos(&self) -> Self {
        f64::cos(*self)
    }
    fn sqrt(&self) -> Self {
        f64::sqrt(*self)
    }
    fn powi(&self, n: i32) -> Self {
        f64::powi(*self, n)
    }
    fn powf(&self, e: f64) -> Self {
        f64::powf(*self, e)
    }
    fn scale(&self, c: f64) -> Self {
        self * c
    }
}

/// First-order dual number over a generic scalar.
#[derive(Debug, Clone, PartialEq)]
pub struct Dual<S> {
    pub re: S,
    /// Tangent components; an empty vector is the zero tangent.
    pub du: Vec<S>,
}

impl<S: Scalar> Dual<S> {
    pub fn constant(re: S) -> Self {
        Dual { re, du: Vec::new() }
    }

    /// The `index`-th coordinate function of an `n`-dimensional chart.
    pub fn variable(re: S, index: usize, n: usize) -> Self {
        let du = (0..n)
            .map(|i| if i == index { S::one() } else { S::zero() })
            .collect();
        Dual { re, du }
    }

    /// Tangent component `i`, zero when absent.
    pub fn d(&self, i: usize) -> S {
        self.du.get(i).cloned().unwrap_or_else(S::zero)
    }

    /// Full tangent padded to length `n`.
    pub fn tangent(&self, n: usize) -> Vec<S> {
        (0..n).map(|i| self.d(i)).collect()
    }

    fn map_du(&self, f: impl Fn(&S) -> S) -> Vec<S> {
        self.du.iter().map(f).collect()
    }
}

fn zip_with<S: Scalar>(a: &[S], b: &[S], f: impl Fn(S, S) -> S) -> Vec<S> {
    let n = a.len().max(b.len());
    (0..n)
        .map(|i| {
            let x = a.get(i).cloned().unwrap_or_else(S::zero);
            let y = b.get(i).cloned().unwrap_or_else(S::zero);
            f(x, y)
        })
        .collect()
}

impl<S: Scalar> Add for Dual<S> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        let du = if rhs.du.is_empty() {
            self.du
        } else if self.du.is_empty() {
            rhs.du
        } else {
            zip_with(&self.du, &rhs.du, |a, b| a + b)
        };
        Dual { re: self.re + rhs.re, du }
    }
}

impl<S: Scalar> Sub for Dual<S> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        let du = if rhs.du.is_empty() {
            self.du
        } else {
            zip_with(&self.du, &rhs.du, |a, b| a - b)
        };
        Dual { re: self.re - rhs.re, du }
    }
}

impl<S: Scalar> Neg for Dual<S> {
    type Output = Self;
    fn neg(self) -> Self {
        Dual {
            re: -self.re,
            du: self.du.into_iter().map(|d| -d).collect(),
        }
    }
}

impl<S: Scalar> Mul for Dual<S> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let du = match (self.du.is_empty(), rhs.du.is_empty()) {
            (true, true) => Vec::new(),
            (false, true) => self.map_du(|d| d.clone() * rhs.re.clone()),
            (true, false) => rhs.map_du(|d| self.re.clone() * d.clone()),
            (false, false) => zip_with(&self.du, &rhs.du, |a, b| {
                a * rhs.re.clone() + self.re.clone() * b
            }),
        };
        Dual {
            re: self.re * rhs.re,
            du,
        }
    }
}

impl<S: Scalar> Div for Dual<S> {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        let q = self.re.clone() / rhs.re.clone();
        // (a' - q b') / b
        let du = if rhs.du.is_empty() {
            self.map_du(|d| d.clone() / rhs.re.clone())
        } else {
            zip_with(&self.du, &rhs.du, |a, b| (a - q.clone() * b) / rhs.re.clone())
        };
        Dual { re: q, du }
    }
}

impl<S: Scalar> Scalar for Dual<S> {
    fn from_f64(v: f64) -> Self {
        Dual::constant(S::from_f64(v))
    }
    fn primal(&self) -> f64 {
        self.re.primal()
    }
    fn exp(&self) -> Self {
        let e = self.re.exp();
        Dual {
            du: self.map_du(|d| d.clone() * e.clone()),
            re: e,
        }
    }
    fn ln(&self) -> Self {
        Dual {
            re: self.re.ln(),
            du: self.map_du(|d| d.clone() / self.re.clone()),
        }
    }
    fn sin(&self) -> Self {
        let c = self.re.cos();
        Dual {
            re: self.re.sin(),
            du: self.map_du(|d| d.clone() * c.clone()),
        }
    }
    fn cos(&self) -> Self {
        let s = self.re.sin();
        Dual {
            re: self.re.cos(),
            du: self.map_du(|d| -(d.clone() * s.clone())),
        }
    }
    fn sqrt(&self) -> Self {
        let r = self.re.sqrt();
        let two_r = r.scale(2.0);
        Dual {
            du: self.map_du(|d| d.clone() / two_r.clone()),
            re: r,
        }
    }
    fn powi(&self, n: i32) -> Self {
        if n == 0 {
            return Dual::constant(S::one());
        }
        let dfac = self.re.powi(n - 1).scale(n as f64);
        Dual {
            re: self.re.powi(n),
            du: self.map_du(|d| d.clone() * dfac.clone()),
        }
    }
    fn powf(&self, e: f64) -> Self {
        let dfac = self.re.powf(e - 1.0).scale(e);
        Dual {
            re: self.re.powf(e),
            du: self.map_du(|d| d.clone() * dfac.clone()),
        }
    }
    fn scale(&self, c: f64) -> Self {
        Dual {
            re: self.re.scale(c),
            du: self.map_du(|d| d.scale(c)),
        }
    }
}

pub type Dual2 = Dual<Dual<f64>>;

/// Seeds `x` as the coordinate functions over an arbitrary base scalar.
pub fn seed<S: Scalar>(x: &[S]) -> Vec<Dual<S>> {
    let n = x.len();
    x.iter()
        .enumerate()
        .map(|(i, xi)| Dual::variable(xi.clone(), i, n))
        .collect()
}

/// Seeds for second-order evaluation at a real point.
pub fn seed2(x: &[f64]) -> Vec<Dual2> {
    seed(&seed(x))
}

/// Value, gradient, and symmetric Hessian at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet2 {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub hessian: Vec<Vec<f64>>,
}

impl Jet2 {
    /// Reads a nested dual, symmetrising the second-order block.
    pub fn from_dual2(d: &Dual2, n: usize) -> Self {
        let gradient = d.re.tangent(n);
        let mut hessian = vec![vec![0.0; n]; n];
        for (i, row) in hessian.iter_mut().enumerate() {
            let di = d.d(i);
            for (j, h) in row.iter_mut().enumerate() {
                *h = di.d(j);
            }
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let s = 0.5 * (hessian[i][j] + hessian[j][i]);
                hessian[i][j] = s;
                hessian[j][i] = s;
            }
        }
        Jet2 {
            value: d.re.re,
            gradient,
            hessian,
        }
    }

    /// The gradient components as first-order duals (value ∂_i f, tangent
    /// the i-th Hessian row). Used to differentiate brackets once more.
    pub fn gradient_duals(&self) -> Vec<Dual<f64>> {
        self.gradient
            .iter()
            .zip(&self.hessian)
            .map(|(g, row)| Dual {
                re: *g,
                du: row.clone(),
            })
            .collect()
    }

    pub fn value_dual(&self) -> Dual<f64> {
        Dual {
            re: self.value,
            du: self.gradient.clone(),
        }
    }
}

/// Exact gradient of an expression field.
pub fn gradient(f: &ScalarField, x: &[f64]) -> Result<Vec<f64>> {
    let d = f.eval(&seed(x))?;
    Ok(d.tangent(x.len()))
}

/// Exact value and gradient in one pass.
pub fn value_and_gradient(f: &ScalarField, x: &[f64]) -> Result<(f64, Vec<f64>)> {
    let d = f.eval(&seed(x))?;
    Ok((d.re, d.tangent(x.len())))
}

pub fn jet2(f: &ScalarField, x: &[f64]) -> Result<Jet2> {
    let d = f.eval(&seed2(x))?;
    Ok(Jet2::from_dual2(&d, x.len()))
}

/// Exact symmetric Hessian via nested duals.
pub fn hessian(f: &ScalarField, x: &[f64]) -> Result<Vec<Vec<f64>>> {
    Ok(jet2(f, x)?.hessian)
}

pub const DEFAULT_FD_STEP: f64 = 1e-5;

/// Central-difference gradient with per-coordinate step `h·max(1, |x_i|)`.
pub fn fd_gradient<F>(f: F, x: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(format!("fd step must be positive, got {h}")));
    }
    let mut probe = x.to_vec();
    let mut out = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let hi = h * x[i].abs().max(1.0);
        probe[i] = x[i] + hi;
        let fp = f(&probe)?;
        probe[i] = x[i] - hi;
        let fm = f(&probe)?;
        probe[i] = x[i];
        out.push((fp - fm) / (2.0 * hi));
    }
    Ok(out)
}

/// Central-difference Jacobian of a vector-valued map, rows = outputs.
pub fn fd_jacobian<F>(f: F, x: &[f64], h: f64) -> Result<Vec<Vec<f64>>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let mut probe = x.to_vec();
    let mut cols = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let hi = h * x[i].abs().max(1.0);
        probe[i] = x[i] + hi;
        let fp = f(&probe)?;
        probe[i] = x[i] - hi;
        let fm = f(&probe)?;
        probe[i] = x[i];
        cols.push(
            fp.iter()
                .zip(&fm)
                .map(|(a, b)| (a - b) / (2.0 * hi))
                .collect::<Vec<_>>(),
        );
    }
    let m = cols.first().map_or(0, Vec::len);
    Ok((0..m)
        .map(|r| cols.iter().map(|c| c[r]).collect())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::{Chart, ScalarFn};
    use approx::assert_relative_eq;

    fn field(coords: &[&str], e: &str) -> ScalarField {
        let chart = Chart::new("c", coords).unwrap();
        ScalarField::parse(&chart, e).unwrap()
    }

    #[test]
    fn leibniz_rule_on_products() {
        let a = Dual::variable(3.0, 0, 2) * Dual::from_f64(2.0);
        let b = Dual::variable(5.0, 1, 2);
        let p = a.clone() * b.clone();
        assert_eq!(p.re, 30.0);
        assert_eq!(p.du, vec![10.0, 6.0]);
    }

    #[test]
    fn gradient_of_eigenvalue_formula() {
        // ordering (x2, p2)
        let f = field(&["x2", "p2"], "p2*x2");
        let g = gradient(&f, &[2.0, 1.5]).unwrap();
        assert_eq!(g, vec![1.5, 2.0]);
    }

    #[test]
    fn gradient_of_contact_hamiltonian() {
        let f = field(&["q", "p", "z"], "p - z");
        let g = gradient(&f, &[0.3, -1.2, 4.0]).unwrap();
        assert_eq!(g, vec![0.0, 1.0, -1.0]);
    }

    #[test]
    fn gradient_of_log() {
        let f = field(&["x2"], "log(x2)");
        assert_relative_eq!(gradient(&f, &[2.0]).unwrap()[0], 0.5);
    }

    #[test]
    fn hessian_examples() {
        let f = field(&["s1", "s2"], "s1 + s2");
        assert_eq!(hessian(&f, &[0.4, 1.3]).unwrap(), vec![vec![0.0; 2]; 2]);
        let f = field(&["q", "p"], "q*p");
        assert_eq!(
            hessian(&f, &[0.4, 1.3]).unwrap(),
            vec![vec![0.0, 1.0], vec![1.0, 0.0]]
        );
        let f = field(&["p"], "p^2");
        assert_eq!(hessian(&f, &[3.0]).unwrap(), vec![vec![2.0]]);
    }

    #[test]
    fn fd_gradient_examples() {
        let g = fd_gradient(|x| Ok(x[0] * x[0]), &[1.0], 1e-4).unwrap();
        assert!((g[0] - 2.0).abs() < 1e-7);
        let g = fd_gradient(|_| Ok(4.25), &[1.0, -3.0], 1e-4).unwrap();
        assert_eq!(g, vec![0.0, 0.0]);
    }

    #[test]
    fn fd_gradient_propagates_domain_errors() {
        let f = field(&["x"], "log(x)");
        let r = fd_gradient(|x| f.value(x), &[1e-7], 1e-5);
        assert!(matches!(r, Err(Error::Domain { .. })));
    }

    #[test]
    fn transcendental_derivatives() {
        let f = field(&["x"], "exp(x)*sin(x) + cos(x) + sqrt(x) + x^(1/3)");
        let x = 0.7_f64;
        let g = gradient(&f, &[x]).unwrap()[0];
        let expected = x.exp() * x.sin() + x.exp() * x.cos() - x.sin()
            + 0.5 / x.sqrt()
            + (1.0 / 3.0) * x.powf(-2.0 / 3.0);
        assert_relative_eq!(g, expected, max_relative = 1e-14);
    }

    #[test]
    fn nested_hessian_symmetric() {
        let f = field(&["a", "b", "c"], "exp(a*b)*c^3/(1+b^2)");
        let h = hessian(&f, &[0.3, -0.8, 1.1]).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(h[i][j], h[j][i]);
            }
        }
    }
}
