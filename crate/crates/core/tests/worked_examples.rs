use std::sync::Arc;

use contactforge_core::bihamiltonian::{
    bihamiltonian_check, eigenvalue_clusters, fernandes_separability_residual, involution_check,
    jacobi_compatibility, kolmogorov_check, nogo_diagnostic, poisson_compatibility,
    recursion_operator, EigenFields, NoGoInput, NoGoTolerances, CLUSTER_TOL, COMPLEX_TOL,
};
use contactforge_core::flows::{dissipation_monitor, integrate_source};
use contactforge_core::sampling::{sample_points, SamplingConfig};
use contactforge_core::structures::{
    contact_hamiltonian_vf, homogeneity_degree, max_diff, reeb, verify_contact_integrable,
    verify_homogeneous_integrable, HomTarget, DEFAULT_K_RANGE,
};
use contactforge_core::symplectization::{lift_function, poissonize, project_function, symplectize};
use contactforge_core::{
    parse, Chart, ChartMap, ContactForm, ExactSymplectic, Expr, FormField, JacobiStructure,
    MultivectorField, Policy, ScalarField, Status, VectorSource,
};

fn e(s: &str) -> Expr {
    parse(s).unwrap()
}

fn bivector(c: &Arc<Chart>, comps: &[([usize; 2], &str)]) -> MultivectorField {
    let mut l = MultivectorField::zero(c, 2).unwrap();
    for (idx, s) in comps {
        l.set(idx, e(s)).unwrap();
    }
    l
}

struct PoissonExample {
    chart: Arc<Chart>,
    lambda: JacobiStructure,
    lambda1: JacobiStructure,
    theta: ExactSymplectic,
}

fn poisson_example() -> PoissonExample {
    let chart = Chart::with_constraints("U", &["x1", "x2", "p1", "p2"], vec![e("x2")]).unwrap();
    let lambda = JacobiStructure::poisson(bivector(&chart, &[([0, 2], "1"), ([1, 3], "1")])).unwrap();
    let lambda1 =
        JacobiStructure::poisson(bivector(&chart, &[([0, 2], "p1"), ([1, 3], "p2*x2")])).unwrap();
    let theta =
        ExactSymplectic::new(FormField::one_form(&chart, vec![e("p1"), e("p2"), e("0"), e("0")]).unwrap())
            .unwrap();
    PoissonExample {
        chart,
        lambda,
        lambda1,
        theta,
    }
}

fn samples(chart: &Chart, n: usize, seed: u64, extra: &[&str]) -> Vec<Vec<f64>> {
    let extra: Vec<Expr> = extra.iter().map(|s| e(s)).collect();
    sample_points(chart, n, seed, &SamplingConfig::default(), &extra).unwrap()
}

fn field(c: &Arc<Chart>, s: &str) -> ScalarField {
    ScalarField::parse(c, s).unwrap()
}

#[test]
fn recursion_operator_eigenvalues_have_multiplicity_two() {
    let ex = poisson_example();
    for x in samples(&ex.chart, 50, 3, &[]) {
        let n = recursion_operator(&ex.lambda, &ex.lambda1, &x).unwrap();
        let cl = eigenvalue_clusters(&n.matrix, &x, CLUSTER_TOL, COMPLEX_TOL).unwrap();
        let mut want = [x[2], x[3] * x[1]];
        want.sort_by(f64::total_cmp);
        assert_eq!(cl.real.len(), 2, "at {x:?}");
        for ((v, m), w) in cl.real.iter().zip(want) {
            assert_eq!(*m, 2);
            assert!((v - w).abs() < 1e-9);
        }
    }
}

#[test]
fn poisson_pair_compatibility() {
    let ex = poisson_example();
    let pts = samples(&ex.chart, 16, 4, &[]);
    let pol = Policy::default();
    assert!(poisson_compatibility(&ex.lambda, &ex.lambda1, &pts, 1e-9, pol).passed());
    assert!(poisson_compatibility(&ex.lambda1, &ex.lambda1, &pts, 1e-9, pol).passed());
}

#[test]
fn eigenvalues_in_involution_under_both_brackets() {
    let ex = poisson_example();
    let pts = samples(&ex.chart, 32, 5, &[]);
    let eig = EigenFields::new(&ex.lambda, &ex.lambda1);
    for j in [&ex.lambda, &ex.lambda1] {
        let rec = involution_check("eigen", &eig, j, &pts, 1e-6, Policy::default());
        assert!(rec.passed(), "{rec:?}");
    }
    let exprs = vec![field(&ex.chart, "p1"), field(&ex.chart, "p2*x2")];
    for j in [&ex.lambda, &ex.lambda1] {
        assert!(involution_check("expr", &exprs, j, &pts, 1e-12, Policy::default()).passed());
    }
}

#[test]
fn bihamiltonian_vector_field() {
    let ex = poisson_example();
    let pts = samples(&ex.chart, 32, 6, &["p1*p2"]);
    let x = VectorSource::Field(MultivectorField::vector(&ex.chart, vec![e("1"), e("x2"), e("0"), e("-p2")]).unwrap());
    let h = field(&ex.chart, "p1 + p2*x2");
    let h1 = field(&ex.chart, "log(p1*p2*x2)");
    let pol = Policy::default();
    assert!(bihamiltonian_check(&x, &ex.lambda, &h, &ex.lambda1, &h1, &pts, 1e-9, pol).passed());
    let wrong = field(&ex.chart, "p1");
    let rec = bihamiltonian_check(&x, &ex.lambda, &h, &ex.lambda1, &wrong, &pts, 1e-9, pol);
    assert_eq!(rec.status, Status::Fail);
    assert!(rec.worst_point.is_some());
}

#[test]
fn kolmogorov_in_action_angle_chart() {
    let aa = Chart::new("AA", &["phi1", "phi2", "s1", "s2"]).unwrap();
    let pts = samples(&aa, 20, 7, &[]);
    let pol = Policy::default();
    let linear = kolmogorov_check(&field(&aa, "s1 + s2"), &[2, 3], &pts, 1e-9, pol);
    assert_eq!(linear.status, Status::Fail);
    assert!(kolmogorov_check(&field(&aa, "(s1^2 + s2^2)/2"), &[2, 3], &pts, 1e-9, pol).passed());
    assert!(kolmogorov_check(&field(&aa, "s1*s2"), &[2, 3], &pts, 1e-9, pol).passed());
}

#[test]
fn separability_diagnostic() {
    let ex = poisson_example();
    let pts = samples(&ex.chart, 12, 8, &["p1", "p2"]);
    let eig = EigenFields::new(&ex.lambda, &ex.lambda1);
    let pol = Policy { min_coverage: 0.5, ..Policy::default() };
    let sum = fernandes_separability_residual(&field(&ex.chart, "p1 + p2*x2"), &eig, &pts, 1e-5, pol);
    assert!(sum.diagnostic && sum.passed(), "{sum:?}");
    let single = fernandes_separability_residual(&field(&ex.chart, "p1^2"), &eig, &pts, 1e-5, pol);
    assert!(single.passed(), "{single:?}");
    let product = fernandes_separability_residual(&field(&ex.chart, "p1*p2*x2"), &eig, &pts, 1e-5, pol);
    assert!((product.max_residual - 1.0).abs() < 1e-3, "{product:?}");
}

#[test]
fn homogeneity_table_of_the_poisson_example() {
    let ex = poisson_example();
    let pts = samples(&ex.chart, 16, 9, &[]);
    let delta = VectorSource::Liouville(ex.theta.clone());
    let deg = |t: HomTarget<'_>| homogeneity_degree(&t, &delta, &pts, DEFAULT_K_RANGE, 1e-9).unwrap();
    assert_eq!(deg(HomTarget::Form(ex.theta.theta())), 1);
    assert_eq!(deg(HomTarget::SymplecticForm(&ex.theta)), 1);
    assert_eq!(deg(HomTarget::Bivector(&ex.lambda)), -1);
    assert_eq!(deg(HomTarget::Bivector(&ex.lambda1)), 0);
    assert_eq!(deg(HomTarget::Recursion(&ex.lambda, &ex.lambda1)), 1);
    for (f, k) in [("p1", 1), ("p2*x2", 1), ("x1", 0), ("log(x2)", 0)] {
        let f = field(&ex.chart, f);
        assert_eq!(deg(HomTarget::Scalar(&f)), k);
    }
}

#[test]
fn nogo_on_the_poisson_example() {
    let ex = poisson_example();
    let pts = samples(&ex.chart, 24, 10, &["p1*p2"]);
    let delta = VectorSource::Liouville(ex.theta.clone());
    let h = field(&ex.chart, "p1 + p2*x2");
    let v = nogo_diagnostic(&NoGoInput {
        lambda: &ex.lambda,
        lambda1: &ex.lambda1,
        delta: &delta,
        hamiltonian: Some(&h),
        h1: None,
        action: None,
        samples: &pts,
        tol: NoGoTolerances::default(),
    })
    .unwrap();
    assert_eq!(v.lambda1_degree, Some(0));
    assert_eq!(v.n_degree, Some(1));
    assert_eq!(v.eigen_degrees, vec![1]);
    assert!(v.euler_residual.unwrap() < 1e-12);
    assert_eq!(v.bihamiltonian, Some(true));
    assert!(!v.clause_homogeneous);
    assert!(v.is_consistent(), "{:?}", v.inconsistency);
}

struct ContactExample {
    chart: Arc<Chart>,
    eta: ContactForm,
    h: ScalarField,
}

fn contact_example() -> ContactExample {
    let chart = Chart::new("M", &["q", "p", "z"]).unwrap();
    let eta = ContactForm::new(FormField::one_form(&chart, vec![e("-p"), e("0"), e("1")]).unwrap()).unwrap();
    let h = field(&chart, "p - z");
    ContactExample { chart, eta, h }
}

#[test]
fn contact_example_fields_lifts_and_projections() {
    let ex = contact_example();
    for x in samples(&ex.chart, 20, 11, &[]) {
        assert!(max_diff(&reeb(&ex.eta, &x).unwrap(), &[0.0, 0.0, 1.0]) < 1e-12);
        let xh = contact_hamiltonian_vf(&ex.eta, &ex.h, &x).unwrap();
        assert!(max_diff(&xh, &[1.0, x[1], x[2]]) < 1e-10);
    }
    let link = symplectize(&ex.eta).unwrap();
    let big_h = lift_function(&link, &ex.h).unwrap();
    let tot = sample_points(
        &link.total,
        20,
        12,
        &SamplingConfig::default(),
        &[],
    )
    .unwrap();
    let expected = field(&link.total, "r*z - r*p");
    for y in &tot {
        assert!((big_h.eval::<f64>(y).unwrap() - expected.eval::<f64>(y).unwrap()).abs() < 1e-14);
    }
    for (lifted, base) in [("-r*p", "p"), ("r*z", "-z")] {
        let f = project_function(&link, &field(&link.total, lifted), 1, &tot).unwrap();
        let want = field(&ex.chart, base);
        for y in &tot {
            let x = &y[..3];
            assert_eq!(f.eval::<f64>(x).unwrap(), want.eval::<f64>(x).unwrap());
        }
    }
}

#[test]
fn contact_integrability_and_its_transfer() {
    let ex = contact_example();
    let pts = samples(&ex.chart, 32, 13, &[]);
    let pol = Policy::default();
    let ints = vec![field(&ex.chart, "p"), field(&ex.chart, "-z")];
    let recs = verify_contact_integrable(&ex.eta, &ex.h, &ints, &pts, 1e-9, pol).unwrap();
    assert!(recs.iter().all(|r| r.passed()), "{recs:?}");
    let bad = vec![field(&ex.chart, "p"), field(&ex.chart, "q")];
    let recs = verify_contact_integrable(&ex.eta, &ex.h, &bad, &pts, 1e-9, pol).unwrap();
    assert_eq!(recs[0].status, Status::Fail);
    let dup = vec![ex.h.clone(), ex.h.clone()];
    let recs = verify_contact_integrable(&ex.eta, &ex.h, &dup, &pts, 1e-9, pol).unwrap();
    assert!(recs.iter().all(|r| r.passed()));
    assert!(!recs[2].notes.is_empty());

    let link = symplectize(&ex.eta).unwrap();
    let tot = sample_points(&link.total, 32, 14, &SamplingConfig::default(), &[]).unwrap();
    let lifted: Vec<ScalarField> = ints.iter().map(|f| lift_function(&link, f).unwrap()).collect();
    let big_h = lift_function(&link, &ex.h).unwrap();
    let recs = verify_homogeneous_integrable(&link.theta, &big_h, &link.delta(), &lifted, &tot, 1e-9, pol).unwrap();
    assert!(recs.iter().all(|r| r.passed()), "{recs:?}");
    let lifted_bad: Vec<ScalarField> = bad.iter().map(|f| lift_function(&link, f).unwrap()).collect();
    let recs = verify_homogeneous_integrable(&link.theta, &big_h, &link.delta(), &lifted_bad, &tot, 1e-9, pol).unwrap();
    assert_eq!(recs[0].status, Status::Fail);
}

#[test]
fn conformal_angle_chart() {
    let ex = contact_example();
    let abar = Chart::with_constraints("Ubar", &["phi1", "phi2", "lam"], vec![]).unwrap();
    let map = ChartMap::new(&ex.chart, &abar, vec![e("q"), e("log(z)"), e("p/z")]).unwrap();
    let eta_bar =
        ContactForm::new(FormField::one_form(&abar, vec![e("-lam"), e("1"), e("0")]).unwrap()).unwrap();
    let h_bar = field(&abar, "lam - 1");
    for x in samples(&ex.chart, 20, 15, &["z"]) {
        let xh = contact_hamiltonian_vf(&ex.eta, &ex.h, &x).unwrap();
        let pushed = map.pushforward(&x, &xh).unwrap();
        assert!(max_diff(&pushed, &[1.0, 1.0, 0.0]) < 1e-9);
        let y = map.apply(&x).unwrap();
        let xbar = contact_hamiltonian_vf(&eta_bar, &h_bar, &y).unwrap();
        assert!(max_diff(&pushed, &xbar) < 1e-9);
        // pullback of η̄ equals η / z
        let eb = eta_bar.eta().eval::<f64>(&y).unwrap().as_vector();
        let pulled = map.pullback_covector(&x, &eb).unwrap();
        let eta = ex.eta.eta().eval::<f64>(&x).unwrap().as_vector();
        let scaled: Vec<f64> = eta.iter().map(|v| v / x[2]).collect();
        assert!(max_diff(&pulled, &scaled) < 1e-12);
    }
}

fn perturbation(chart: &Arc<Chart>) -> JacobiStructure {
    JacobiStructure::poisson(bivector(chart, &[([0, 1], "exp(q)")])).unwrap()
}

#[test]
fn jacobi_compatibility_routes_agree() {
    let ex = contact_example();
    let j = JacobiStructure::contact(&ex.eta);
    let link = symplectize(&ex.eta).unwrap();
    let pts = samples(&ex.chart, 50, 16, &[]);
    let pol = Policy::default();
    assert!(jacobi_compatibility(&j, &j, &link.total, &pts, 1e-9, pol).passed());
    assert!(jacobi_compatibility(&j, &perturbation(&ex.chart), &link.total, &pts, 1e-9, pol).passed());
    let reeb_like = JacobiStructure::new(
        MultivectorField::zero(&ex.chart, 2).unwrap(),
        MultivectorField::vector(&ex.chart, vec![e("0"), e("0"), e("1")]).unwrap(),
    )
    .unwrap();
    let rec = jacobi_compatibility(&j, &reeb_like, &link.total, &pts, 1e-9, pol);
    assert_ne!(rec.status, Status::Inconsistent, "{rec:?}");
}

#[test]
fn nogo_on_the_poissonized_contact_pair() {
    let ex = contact_example();
    let link = symplectize(&ex.eta).unwrap();
    let lt = poissonize(&link, &JacobiStructure::contact(&ex.eta)).unwrap();
    let lt1 = poissonize(&link, &perturbation(&ex.chart)).unwrap();
    let tot = sample_points(&link.total, 24, 17, &SamplingConfig::default(), &[]).unwrap();
    let big_h = lift_function(&link, &ex.h).unwrap();
    let v = nogo_diagnostic(&NoGoInput {
        lambda: &lt,
        lambda1: &lt1,
        delta: &link.delta(),
        hamiltonian: Some(&big_h),
        h1: None,
        action: None,
        samples: &tot,
        tol: NoGoTolerances::default(),
    })
    .unwrap();
    assert_eq!(v.lambda1_degree, Some(-1));
    assert_eq!(v.n_degree, Some(0));
    assert!(v.eigen_delta_max < 1e-6);
    assert!(v.independent_max.unwrap() < 2);
    assert!(v.is_consistent());
}

#[test]
fn flow_laws_and_lift_commutation() {
    let ex = contact_example();
    let src = VectorSource::ContactHamiltonian(ex.eta.clone(), ex.h.clone());
    let traj = integrate_source(&src, &[0.0, 1.0, 1.0], 1.0, 1e-3).unwrap();
    let e1 = std::f64::consts::E;
    assert!(max_diff(traj.endpoint(), &[1.0, e1, e1]) < 1e-8);
    for f in ["p", "-z"] {
        let rec = dissipation_monitor(&traj, &ex.eta, &ex.h, &field(&ex.chart, f), 1e-8, 1e-9).unwrap();
        assert!(rec.passed());
    }
    let err = |dt: f64| {
        let t = integrate_source(&src, &[0.0, 1.0, 1.0], 1.0, dt).unwrap();
        max_diff(t.endpoint(), &[1.0, e1, e1])
    };
    let ratio = err(0.1) / err(0.05);
    assert!((12.0..=20.0).contains(&ratio), "ratio {ratio}");

    let link = symplectize(&ex.eta).unwrap();
    let lifted = VectorSource::Hamiltonian(link.theta.clone(), lift_function(&link, &ex.h).unwrap());
    let up = integrate_source(&lifted, &[0.0, 1.0, 1.0, 0.7], 1.0, 1e-3).unwrap();
    for (a, b) in up.states.iter().zip(&traj.states) {
        assert!(max_diff(&a[..3], b) < 1e-8);
    }
}
