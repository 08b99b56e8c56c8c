//! Seeded random test objects: polynomials, vector and bivector fields, and
//! Jacobi pairs of known type.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::chart::{Chart, ScalarField};
use crate::error::Result;
use crate::expr::Expr;
use crate::structures::JacobiStructure;
use crate::tensor::MultivectorField;

fn coeff(rng: &mut Xoshiro256PlusPlus) -> Expr {
    Expr::constant(rng.random_range(-1.0..1.0))
}

/// Polynomial of degree at most two in the coordinates listed in `vars`.
pub fn random_polynomial_in(rng: &mut Xoshiro256PlusPlus, vars: &[Expr]) -> Expr {
    let mut e = coeff(rng);
    for i in 0..vars.len() {
        if rng.random_bool(0.6) {
            e = e + coeff(rng) * vars[i].clone();
        }
        for j in i..vars.len() {
            if rng.random_bool(0.3) {
                e = e + coeff(rng) * vars[i].clone() * vars[j].clone();
            }
        }
    }
    e
}

fn chart_vars(chart: &Chart) -> Vec<Expr> {
    chart.coords().iter().map(|c| Expr::var(c.clone())).collect()
}

/// `count` random polynomials of degree at most two on `chart`.
pub fn random_polynomials(chart: &Arc<Chart>, count: usize, seed: u64) -> Vec<ScalarField> {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let vars = chart_vars(chart);
    (0..count)
        .map(|_| ScalarField {
            chart: chart.clone(),
            expr: random_polynomial_in(&mut rng, &vars),
        })
        .collect()
}

/// Random functions homogeneous of degree one in all coordinates, meant for
/// the positive orthant: sums of `c · xᵢ^a · xⱼ^(1−a)`, `c · xᵢ²/xⱼ` and
/// `c · sqrt(xᵢ² + xⱼ²)`.
pub fn random_one_homogeneous(chart: &Arc<Chart>, count: usize, seed: u64) -> Vec<ScalarField> {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let vars = chart_vars(chart);
    let n = vars.len();
    (0..count)
        .map(|_| {
            let mut e = Expr::constant(0.0);
            for _ in 0..rng.random_range(1..4) {
                let i = rng.random_range(0..n);
                let j = rng.random_range(0..n);
                let term = match rng.random_range(0..3) {
                    0 => {
                        let a: f64 = rng.random_range(0.1..0.9);
                        vars[i].clone().pow(a) * vars[j].clone().pow(1.0 - a)
                    }
                    1 => vars[i].clone().pow(2.0) / vars[j].clone(),
                    _ => Expr::call(
                        crate::expr::Func::Sqrt,
                        vars[i].clone().pow(2.0) + vars[j].clone().pow(2.0),
                    ),
                };
                e = e + coeff(&mut rng) * term;
            }
            ScalarField {
                chart: chart.clone(),
                expr: e,
            }
        })
        .collect()
}

/// Kinds of generated Jacobi pairs `(Λ, E)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InstanceKind {
    /// Polynomial components everywhere; almost surely not Jacobi.
    Generic,
    /// `f · a∧b` for constant vectors `a`, `b`: Poisson.
    ScaledRankTwo,
    /// Constant bivector, `E = 0`: Poisson.
    Constant,
    /// `Λ = E∧Y` with `E = ∂_k` and `Y` independent of the `k`-th
    /// coordinate: Jacobi with `E ≠ 0`.
    Transverse,
    /// A Jacobi instance plus a small generic bivector: not Jacobi.
    Perturbed,
}

impl InstanceKind {
    pub const ALL: [InstanceKind; 5] = [
        InstanceKind::Generic,
        InstanceKind::ScaledRankTwo,
        InstanceKind::Constant,
        InstanceKind::Transverse,
        InstanceKind::Perturbed,
    ];

    pub fn is_jacobi(self) -> bool {
        matches!(
            self,
            InstanceKind::ScaledRankTwo | InstanceKind::Constant | InstanceKind::Transverse
        )
    }
}

fn generic_bivector(rng: &mut Xoshiro256PlusPlus, chart: &Arc<Chart>, vars: &[Expr]) -> Result<MultivectorField> {
    let n = chart.dim();
    let mut l = MultivectorField::zero(chart, 2)?;
    for i in 0..n {
        for j in (i + 1)..n {
            l.set(&[i, j], random_polynomial_in(rng, vars))?;
        }
    }
    Ok(l)
}

/// One random Jacobi pair of the requested kind on `chart`.
pub fn random_jacobi(chart: &Arc<Chart>, kind: InstanceKind, seed: u64) -> Result<JacobiStructure> {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let vars = chart_vars(chart);
    let n = chart.dim();
    match kind {
        InstanceKind::Generic => {
            let l = generic_bivector(&mut rng, chart, &vars)?;
            let e = MultivectorField::vector(chart, (0..n).map(|_| random_polynomial_in(&mut rng, &vars)).collect())?;
            JacobiStructure::new(l, e)
        }
        InstanceKind::ScaledRankTwo => {
            let a: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let b: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let f = random_polynomial_in(&mut rng, &vars);
            let mut l = MultivectorField::zero(chart, 2)?;
            for i in 0..n {
                for j in (i + 1)..n {
                    let c = a[i] * b[j] - a[j] * b[i];
                    l.set(&[i, j], Expr::constant(c) * f.clone())?;
                }
            }
            JacobiStructure::poisson(l)
        }
        InstanceKind::Constant => {
            let mut l = MultivectorField::zero(chart, 2)?;
            for i in 0..n {
                for j in (i + 1)..n {
                    l.set(&[i, j], coeff(&mut rng))?;
                }
            }
            JacobiStructure::poisson(l)
        }
        InstanceKind::Transverse => {
            let k = rng.random_range(0..n);
            let others: Vec<Expr> = vars
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != k)
                .map(|(_, v)| v.clone())
                .collect();
            let y: Vec<Expr> = (0..n).map(|_| random_polynomial_in(&mut rng, &others)).collect();
            let mut l = MultivectorField::zero(chart, 2)?;
            for (j, yj) in y.into_iter().enumerate() {
                if j != k {
                    l.set(&[k, j], yj)?;
                }
            }
            let mut e = vec![Expr::constant(0.0); n];
            e[k] = Expr::constant(1.0);
            JacobiStructure::new(l, MultivectorField::vector(chart, e)?)
        }
        InstanceKind::Perturbed => {
            let base = random_jacobi(chart, InstanceKind::ScaledRankTwo, rng.random())?;
            let (l, _) = base.fields().expect("field-backed instance");
            let noise = generic_bivector(&mut rng, chart, &vars)?.scale_by(&Expr::constant(0.1))?;
            JacobiStructure::poisson(l.add(&noise)?)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproducible() {
        let c = Chart::new("c", &["x", "y", "z"]).unwrap();
        let a = random_polynomials(&c, 3, 11);
        let b = random_polynomials(&c, 3, 11);
        for (f, g) in a.iter().zip(&b) {
            assert_eq!(f.expr, g.expr);
        }
        let x = [0.3, -0.2, 0.9];
        for kind in InstanceKind::ALL {
            let j1 = random_jacobi(&c, kind, 5).unwrap();
            let j2 = random_jacobi(&c, kind, 5).unwrap();
            assert_eq!(j1.eval::<f64>(&x).unwrap(), j2.eval::<f64>(&x).unwrap());
        }
    }
}
