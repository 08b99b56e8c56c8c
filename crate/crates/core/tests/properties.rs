use std::sync::Arc;

use proptest::prelude::*;

use contactforge_core::autodiff::{fd_gradient, gradient, hessian};
use contactforge_core::bihamiltonian::recursion_operator;
use contactforge_core::generators::{random_jacobi, random_one_homogeneous, random_polynomials, InstanceKind};
use contactforge_core::structures::{bracket_of, jacobi_bracket, lie_pair, homogeneity_residual, HomTarget};
use contactforge_core::tensor::dot;
use contactforge_core::{
    parse, Chart, ContactForm, Expr, FormField, JacobiStructure, MultivectorField, ScalarField, VectorSource,
};

fn chart4() -> Arc<Chart> {
    Chart::new("T", &["x1", "x2", "p1", "p2"]).unwrap()
}

fn contact3() -> ContactForm {
    let c = Chart::new("M", &["q", "p", "z"]).unwrap();
    let comps = ["-p", "0", "1"].iter().map(|s| parse(s).unwrap()).collect();
    ContactForm::new(FormField::one_form(&c, comps).unwrap()).unwrap()
}

fn product(f: &ScalarField, g: &ScalarField) -> ScalarField {
    ScalarField {
        chart: f.chart.clone(),
        expr: f.expr.clone() * g.expr.clone(),
    }
}

fn point(n: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(-1.5f64..1.5, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn gradients_match_finite_differences(seed in 0u64..10_000, x in point(4)) {
        let f = &random_polynomials(&chart4(), 1, seed)[0];
        let exact = gradient(f, &x).unwrap();
        let fd = fd_gradient(|y| f.eval::<f64>(y), &x, 1e-5).unwrap();
        for (a, b) in exact.iter().zip(&fd) {
            prop_assert!((a - b).abs() < 1e-7);
        }
    }

    #[test]
    fn display_parse_round_trip(seed in 0u64..10_000, x in point(4)) {
        let f = &random_polynomials(&chart4(), 1, seed)[0];
        let back = parse(&f.expr.to_string()).unwrap();
        let text = back.to_string();
        prop_assert_eq!(parse(&text).unwrap(), back.clone());
        let g = ScalarField { chart: f.chart.clone(), expr: back };
        prop_assert_eq!(g.eval::<f64>(&x).unwrap(), f.eval::<f64>(&x).unwrap());
    }

    #[test]
    fn weak_leibniz_rule(seed in 0u64..10_000, x in point(3), kind in 0usize..3) {
        let c = Chart::new("L", &["x", "y", "z"]).unwrap();
        let kinds = [InstanceKind::Transverse, InstanceKind::ScaledRankTwo, InstanceKind::Constant];
        let j = random_jacobi(&c, kinds[kind], seed).unwrap();
        let fs = random_polynomials(&c, 3, seed + 1);
        let (f, g, h) = (&fs[0], &fs[1], &fs[2]);
        let lhs = jacobi_bracket(&j, f, &product(g, h), &x).unwrap();
        let (_, e) = j.eval::<f64>(&x).unwrap();
        let ef = dot(&e, &gradient(f, &x).unwrap());
        let (gv, hv) = (g.eval::<f64>(&x).unwrap(), h.eval::<f64>(&x).unwrap());
        let rhs = jacobi_bracket(&j, f, g, &x).unwrap() * hv
            + jacobi_bracket(&j, f, h, &x).unwrap() * gv
            + gv * hv * ef;
        prop_assert!((lhs - rhs).abs() < 1e-9 * (1.0 + lhs.abs()));
        let anti = jacobi_bracket(&j, f, g, &x).unwrap() + jacobi_bracket(&j, g, f, &x).unwrap();
        prop_assert!(anti.abs() < 1e-12);
    }

    #[test]
    fn contact_bracket_is_flow_derivative_plus_reeb_term(seed in 0u64..10_000, x in point(3)) {
        let eta = contact3();
        let j = JacobiStructure::contact(&eta);
        let fs = random_polynomials(eta.chart(), 2, seed);
        let (f, g) = (&fs[0], &fs[1]);
        let xf = eta.hamiltonian_vf_at(f, &x).unwrap();
        let r = eta.reeb_at(&x).unwrap();
        let want = dot(&xf, &gradient(g, &x).unwrap())
            + g.eval::<f64>(&x).unwrap() * dot(&r, &gradient(f, &x).unwrap());
        let got = bracket_of(&j, f, g, &x).unwrap();
        prop_assert!((got - want).abs() < 1e-9 * (1.0 + want.abs()));
    }

    #[test]
    fn recursion_operator_is_linear_in_the_second_bivector(
        seed in 0u64..10_000,
        a in -2.0f64..2.0,
        b in -2.0f64..2.0,
        x in point(4),
    ) {
        let c = chart4();
        let mut can = MultivectorField::zero(&c, 2).unwrap();
        can.set(&[0, 2], Expr::constant(1.0)).unwrap();
        can.set(&[1, 3], Expr::constant(1.0)).unwrap();
        let lambda = JacobiStructure::poisson(can).unwrap();
        let l1 = random_jacobi(&c, InstanceKind::Generic, seed).unwrap();
        let l2 = random_jacobi(&c, InstanceKind::Generic, seed + 7).unwrap();
        let combo = JacobiStructure::sum(&l1.scaled(a), &l2.scaled(b)).unwrap();
        let n = recursion_operator(&lambda, &combo, &x).unwrap().matrix;
        let n1 = recursion_operator(&lambda, &l1, &x).unwrap().matrix;
        let n2 = recursion_operator(&lambda, &l2, &x).unwrap().matrix;
        for i in 0..4 {
            for k in 0..4 {
                let want = a * n1[i][k] + b * n2[i][k];
                prop_assert!((n[i][k] - want).abs() < 1e-9 * (1.0 + want.abs()));
            }
        }
    }

    #[test]
    fn homogeneity_ladder(power in 0i32..3, c1 in 0.2f64..2.0, c2 in 0.2f64..2.0, x in point(4)) {
        // Λ has degree −1 under Δ = pᵢ∂_{pᵢ}; pᵢ^a ∂_{xᵢ}∧∂_{pᵢ} has degree a − 1
        let c = chart4();
        let mut can = MultivectorField::zero(&c, 2).unwrap();
        can.set(&[0, 2], Expr::constant(1.0)).unwrap();
        can.set(&[1, 3], Expr::constant(1.0)).unwrap();
        let mut l1 = MultivectorField::zero(&c, 2).unwrap();
        let a = power as f64;
        l1.set(&[0, 2], Expr::constant(c1) * Expr::var("p1").pow(a)).unwrap();
        l1.set(&[1, 3], Expr::constant(c2) * Expr::var("x2") * Expr::var("p2").pow(a)).unwrap();
        let lambda = JacobiStructure::poisson(can).unwrap();
        let lambda1 = JacobiStructure::poisson(l1).unwrap();
        let delta = VectorSource::Field(
            MultivectorField::vector(&c, vec![Expr::constant(0.0), Expr::constant(0.0), Expr::var("p1"), Expr::var("p2")]).unwrap(),
        );
        let (v, l) = lie_pair(&HomTarget::Recursion(&lambda, &lambda1), &delta, &x).unwrap();
        prop_assert!(homogeneity_residual(&v, &l, power) < 1e-9);
    }

    #[test]
    fn euler_identity_for_one_homogeneous_functions(seed in 0u64..10_000) {
        let c = Chart::new("P", &["a", "b", "c"]).unwrap();
        let f = &random_one_homogeneous(&c, 1, seed)[0];
        let x = [0.4 + (seed % 7) as f64 * 0.2, 1.3, 0.8];
        let hs = hessian(f, &x).unwrap();
        let hx: f64 = hs
            .iter()
            .map(|row| row.iter().zip(&x).map(|(h, xi)| h * xi).sum::<f64>().abs())
            .fold(0.0, f64::max);
        prop_assert!(hx < 1e-8);
        let euler = dot(&gradient(f, &x).unwrap(), &x) - f.eval::<f64>(&x).unwrap();
        prop_assert!(euler.abs() < 1e-12);
    }
}
