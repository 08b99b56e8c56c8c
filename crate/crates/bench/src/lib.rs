//! Fixtures shared by the kernel benchmarks.

use std::sync::Arc;

use contactforge_core::sampling::{sample_points, SamplingConfig};
use contactforge_core::{parse, Chart, ContactForm, Expr, FormField, JacobiStructure, MultivectorField};

fn e(s: &str) -> Expr {
    parse(s).expect("fixture expressions parse")
}

/// `dz − p dq` on `(q, p, z)`.
pub fn darboux_contact() -> ContactForm {
    let chart = Chart::new("M", &["q", "p", "z"]).unwrap();
    ContactForm::new(FormField::one_form(&chart, vec![e("-p"), e("0"), e("1")]).unwrap()).unwrap()
}

/// The compatible Poisson pair on `(x1, x2, p1, p2)` with `x2 > 0`.
pub fn poisson_pair() -> (JacobiStructure, JacobiStructure) {
    let chart = Chart::with_constraints("U", &["x1", "x2", "p1", "p2"], vec![e("x2")]).unwrap();
    let lam = MultivectorField::zero(&chart, 2)
        .unwrap()
        .with(&[0, 2], e("1"))
        .unwrap()
        .with(&[1, 3], e("1"))
        .unwrap();
    let lam1 = MultivectorField::zero(&chart, 2)
        .unwrap()
        .with(&[0, 2], e("p1"))
        .unwrap()
        .with(&[1, 3], e("p2*x2"))
        .unwrap();
    (JacobiStructure::poisson(lam).unwrap(), JacobiStructure::poisson(lam1).unwrap())
}

pub fn points(chart: &Arc<Chart>, n: usize) -> Vec<Vec<f64>> {
    sample_points(chart, n, 42, &SamplingConfig::default(), &[]).unwrap()
}
