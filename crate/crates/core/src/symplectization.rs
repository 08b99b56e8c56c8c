//! Trivial symplectisation `M × ℝ₊ → M`, homogeneous lifts and projections,
//! and Poissonization of Jacobi structures.

use std::sync::Arc;

use crate::chart::{Chart, ScalarField};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::report::{self, CheckRecord, Policy, Status};
use crate::structures::{
    bracket_of, homogeneity_profile, is_jacobi, jacobi_bracket, poissonize_fields, theta_bracket,
    ContactForm, ExactSymplectic, HomTarget, JacobiStructure, VectorSource, DEFAULT_K_RANGE,
};
use crate::tensor::{FormField, MultivectorField};

/// Tolerance used to decide the homogeneity degree of projected functions.
pub const PROJECTION_TOL: f64 = 1e-9;

/// The trivial symplectisation of a contact chart.
#[derive(Debug, Clone)]
pub struct SymplectizationLink {
    pub base: Arc<Chart>,
    /// Base coordinates followed by the radial coordinate, with `r > 0`.
    pub total: Arc<Chart>,
    pub contact: ContactForm,
    /// Name of the radial coordinate (`r` unless that was taken).
    pub radial: String,
    pub conformal_factor: Expr,
    pub theta: ExactSymplectic,
    pub liouville: MultivectorField,
    pub warnings: Vec<String>,
}

fn radial_name(base: &Chart) -> (String, Option<String>) {
    if base.index_of("r").is_none() {
        return ("r".into(), None);
    }
    let name = (1..)
        .map(|k| format!("r_{k}"))
        .find(|n| base.index_of(n).is_none())
        .expect("unbounded search");
    let warn = format!(
        "coordinate `r` already present in chart `{}`; radial coordinate renamed to `{name}`",
        base.name
    );
    (name, Some(warn))
}

/// The chart of `M × ℝ₊`: base coordinates, then the radial one with
/// `r > 0`. Returns the chart, the radial name and a renaming warning.
pub fn cone_chart(base: &Arc<Chart>) -> Result<(Arc<Chart>, String, Option<String>)> {
    let (radial, warning) = radial_name(base);
    let mut coords: Vec<String> = base.coords().to_vec();
    coords.push(radial.clone());
    let mut constraints = base.constraints().to_vec();
    constraints.push(Expr::var(radial.clone()));
    let total = Chart::with_constraints(&format!("{}xR+", base.name), &coords, constraints)?;
    Ok((total, radial, warning))
}

/// Builds `θ = r·η` on `M × ℝ₊`.
pub fn symplectize(eta: &ContactForm) -> Result<SymplectizationLink> {
    let base = eta.chart().clone();
    let (total, radial, warning) = cone_chart(&base)?;
    let r = Expr::var(radial.clone());
    let theta_field = eta.eta().map_exprs(&total, |c| r.clone() * c.clone())?;
    let theta = ExactSymplectic::new(theta_field)?;
    let mut delta = vec![Expr::constant(0.0); total.dim()];
    delta[base.dim()] = r.clone();
    let liouville = MultivectorField::vector(&total, delta)?;
    Ok(SymplectizationLink {
        base,
        total,
        contact: eta.clone(),
        radial,
        conformal_factor: r,
        theta,
        liouville,
        warnings: warning.into_iter().collect(),
    })
}

impl SymplectizationLink {
    /// Declares a different conformal factor. Operations reject anything
    /// other than the radial coordinate itself.
    pub fn with_conformal_factor(mut self, sigma: Expr) -> Self {
        self.conformal_factor = sigma;
        self
    }

    pub fn ensure_trivial(&self) -> Result<()> {
        if self.conformal_factor == Expr::var(self.radial.clone()) {
            Ok(())
        } else {
            Err(Error::UnsupportedConformalFactor(self.conformal_factor.to_string()))
        }
    }

    pub fn radial_var(&self) -> Expr {
        Expr::var(self.radial.clone())
    }

    pub fn delta(&self) -> VectorSource {
        VectorSource::Field(self.liouville.clone())
    }

    pub fn lift_point(&self, x: &[f64], r: f64) -> Vec<f64> {
        let mut y = x.to_vec();
        y.push(r);
        y
    }

    pub fn project_point<'a>(&self, y: &'a [f64]) -> &'a [f64] {
        &y[..self.base.dim()]
    }

    /// Pullback along the projection: the same expression on the total chart.
    pub fn pullback(&self, f: &ScalarField) -> Result<ScalarField> {
        self.base.ensure_same(&f.chart)?;
        ScalarField::new(&self.total, f.expr.clone())
    }

    pub fn pullback_form(&self, a: &FormField) -> Result<FormField> {
        self.base.ensure_same(&a.chart)?;
        a.map_exprs(&self.total, Clone::clone)
    }
}

/// `f^Σ = −r·f`.
pub fn lift_function(link: &SymplectizationLink, f: &ScalarField) -> Result<ScalarField> {
    link.ensure_trivial()?;
    link.base.ensure_same(&f.chart)?;
    let expr = if f.expr.is_zero_constant() {
        Expr::constant(0.0)
    } else {
        -(link.radial_var() * f.expr.clone())
    };
    ScalarField::new(&link.total, expr)
}

/// Inverse of the lift on 1-homogeneous functions (`−F|_{r=1}`), or the
/// restriction `F|_{r=1}` of a 0-homogeneous one.
pub fn project_function(
    link: &SymplectizationLink,
    f: &ScalarField,
    expected_degree: i32,
    samples: &[Vec<f64>],
) -> Result<ScalarField> {
    link.ensure_trivial()?;
    link.total.ensure_same(&f.chart)?;
    if !(0..=1).contains(&expected_degree) {
        return Err(Error::InvalidArgument(format!(
            "projection expects degree 0 or 1, got {expected_degree}"
        )));
    }
    let h = homogeneity_profile(
        &HomTarget::Scalar(f),
        &link.delta(),
        samples,
        DEFAULT_K_RANGE,
        PROJECTION_TOL,
    )?;
    if h.degree != Some(expected_degree) {
        let found = h.degree.map_or("no degree".to_string(), |k| format!("degree {k}"));
        return Err(Error::NotHomogeneous(format!(
            "expected degree {expected_degree}, detected {found} ({})",
            h.describe()
        )));
    }
    let restricted = f.expr.substitute_value(&link.radial, 1.0);
    let expr = if expected_degree == 1 { -restricted } else { restricted };
    ScalarField::new(&link.base, expr)
}

/// `Λ/r + ∂_r ∧ E` on the total chart of `link`.
pub fn poissonize(link: &SymplectizationLink, j: &JacobiStructure) -> Result<JacobiStructure> {
    link.ensure_trivial()?;
    JacobiStructure::poissonized(j, &link.total)
}

/// Expression components of the Poissonization, available when `j` is given
/// by component expressions.
pub fn poissonize_expr(link: &SymplectizationLink, j: &JacobiStructure) -> Result<MultivectorField> {
    link.ensure_trivial()?;
    let (lambda, e) = j.fields().ok_or_else(|| {
        Error::InvalidArgument("structure has no component expressions to Poissonize".into())
    })?;
    poissonize_fields(lambda, e, &link.total)
}

/// Post-conditions of a Poissonization at samples on the total chart:
/// Poisson (Jacobi with zero vector field) and homogeneous of degree −1.
pub fn poissonization_checks(
    link: &SymplectizationLink,
    p: &JacobiStructure,
    samples: &[Vec<f64>],
    tol: f64,
    policy: Policy,
) -> Vec<CheckRecord> {
    let jac = is_jacobi(p, samples, &[], tol, policy);
    let mut hom = match homogeneity_profile(
        &HomTarget::Bivector(p),
        &link.delta(),
        samples,
        DEFAULT_K_RANGE,
        tol,
    ) {
        Ok(h) => {
            let res = h
                .profile
                .iter()
                .find(|(k, _)| *k == -1)
                .map_or(f64::INFINITY, |(_, r)| *r);
            let mut rec = CheckRecord::single("poissonization_degree", res, tol)
                .with_metric(
                    "degree",
                    h.degree.map_or(crate::report::Metric::Text("none".into()), |k| {
                        crate::report::Metric::Int(k as i64)
                    }),
                );
            rec.samples = samples.len();
            rec.evaluated = samples.len() - h.skipped;
            if h.degree != Some(-1) {
                rec.status = Status::Fail;
            }
            rec
        }
        Err(e) => CheckRecord::errored("poissonization_degree", &e),
    };
    if hom.evaluated == 0 && hom.status == Status::Pass {
        hom.status = Status::Skipped;
    }
    vec![jac, hom]
}

/// `max |{f^Σ, g^Σ}_θ − (−r·{f, g}_η)|` over pairs and samples on the total
/// chart.
pub fn bracket_correspondence(
    link: &SymplectizationLink,
    pairs: &[(ScalarField, ScalarField)],
    samples: &[Vec<f64>],
    tol: f64,
    policy: Policy,
) -> CheckRecord {
    let lifted = match lift_pairs(link, pairs) {
        Ok(l) => l,
        Err(e) => return CheckRecord::errored("bracket_correspondence", &e),
    };
    let j = JacobiStructure::contact(&link.contact);
    report::residual_check("bracket_correspondence", tol, samples, policy, |y| {
        let r = y[link.base.dim()];
        let x = link.project_point(y);
        let mut worst = 0.0f64;
        for ((f, g), (fl, gl)) in pairs.iter().zip(&lifted) {
            let lhs = theta_bracket(&link.theta, fl, gl, y)?;
            let rhs = -r * jacobi_bracket(&j, f, g, x)?;
            worst = worst.max((lhs - rhs).abs());
        }
        Ok(worst)
    })
}

fn lift_pairs(
    link: &SymplectizationLink,
    pairs: &[(ScalarField, ScalarField)],
) -> Result<Vec<(ScalarField, ScalarField)>> {
    pairs
        .iter()
        .map(|(f, g)| Ok((lift_function(link, f)?, lift_function(link, g)?)))
        .collect()
}

/// Brackets of the Poisson bivector of `ω = −dθ` and of the Poissonized
/// induced Jacobi structure on lifted pairs. The former is
/// `Λ_ω(dF, dG) = −{F, G}_θ`. Disagreement means the two constructions have diverged and
/// is reported as an inconsistency rather than a failed check.
pub fn symplectization_consistency(
    link: &SymplectizationLink,
    pairs: &[(ScalarField, ScalarField)],
    samples: &[Vec<f64>],
    tol: f64,
    policy: Policy,
) -> CheckRecord {
    let setup = || -> Result<(JacobiStructure, Vec<(ScalarField, ScalarField)>)> {
        let p = poissonize(link, &JacobiStructure::contact(&link.contact))?;
        Ok((p, lift_pairs(link, pairs)?))
    };
    let (p, lifted) = match setup() {
        Ok(v) => v,
        Err(e) => return CheckRecord::errored("symplectization_consistency", &e),
    };
    let omega = JacobiStructure::symplectic(&link.theta);
    let rec = report::residual_check("symplectization_consistency", tol, samples, policy, |y| {
        let mut worst = 0.0f64;
        for (fl, gl) in &lifted {
            let a = bracket_of(&omega, fl, gl, y)?;
            let b = bracket_of(&p, fl, gl, y)?;
            worst = worst.max((a - b).abs());
        }
        Ok(worst)
    });
    if rec.status == Status::Fail && rec.evaluated > rec.passed {
        let why = format!(
            "symplectic and Poissonized brackets differ by {:e}",
            rec.max_residual
        );
        return rec.inconsistent(why);
    }
    rec
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use crate::generators::random_polynomials;
    use crate::sampling::{sample_points, SamplingConfig};
    use crate::structures::{liouville_field, max_diff};

    fn e(s: &str) -> Expr {
        parse(s).unwrap()
    }

    fn example() -> SymplectizationLink {
        let c = Chart::new("M", &["q", "p", "z"]).unwrap();
        let eta = FormField::one_form(&c, vec![e("-p"), e("0"), e("1")]).unwrap();
        symplectize(&ContactForm::new(eta).unwrap()).unwrap()
    }

    fn total_samples(link: &SymplectizationLink, n: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut cfg = SamplingConfig::default();
        cfg.boxes = vec![None; link.total.dim()];
        cfg.boxes[link.base.dim()] = Some((0.1, 3.0));
        sample_points(&link.total, n, seed, &cfg, &[]).unwrap()
    }

    #[test]
    fn theta_of_example() {
        let link = example();
        assert_eq!(link.total.coords(), &["q", "p", "z", "r"]);
        assert!(link.warnings.is_empty());
        let th = link.theta.theta().components();
        assert_eq!(th.len(), 2);
        let y = [0.3, -0.4, 1.1, 1.7];
        let vals = link.theta.theta().eval::<f64>(&y).unwrap();
        assert_eq!(vals.get(&[0]), 1.7 * 0.4);
        assert_eq!(vals.get(&[2]), 1.7);
        assert_eq!(vals.get(&[1]), 0.0);
        let d = liouville_field(&link.theta, &y).unwrap();
        assert!(max_diff(&d, &[0.0, 0.0, 0.0, 1.7]) < 1e-12);
    }

    #[test]
    fn darboux_five_dim() {
        let c = Chart::new("D", &["q1", "q2", "p1", "p2", "z"]).unwrap();
        let eta = FormField::one_form(&c, vec![e("-p1"), e("-p2"), e("0"), e("0"), e("1")]).unwrap();
        let link = symplectize(&ContactForm::new(eta).unwrap()).unwrap();
        let samples = total_samples(&link, 20, 5);
        let pairs: Vec<_> = random_polynomials(&link.base, 6, 9)
            .chunks(2)
            .map(|c| (c[0].clone(), c[1].clone()))
            .collect();
        let pol = Policy::default();
        assert!(bracket_correspondence(&link, &pairs, &samples, 1e-9, pol).passed());
        assert!(symplectization_consistency(&link, &pairs, &samples, 1e-9, pol).passed());
    }

    #[test]
    fn repeated_symplectization_renames() {
        // the naming rule only needs some one-form on an odd chart containing r
        let c5 = Chart::new("N", &["q", "p", "z", "r", "s"]).unwrap();
        let eta = FormField::one_form(&c5, vec![e("-p"), e("0"), e("1"), e("-s"), e("0")]).unwrap();
        let again = symplectize(&ContactForm::new(eta).unwrap()).unwrap();
        assert_eq!(again.radial, "r_1");
        assert_eq!(again.warnings.len(), 1);
        assert_eq!(again.total.coords()[5], "r_1");
    }

    #[test]
    fn lifts_and_projections() {
        let link = example();
        let h = ScalarField::parse(&link.base, "p - z").unwrap();
        let big_h = lift_function(&link, &h).unwrap();
        let y = [0.2, 0.6, -1.2, 0.8];
        let want = 0.8 * -1.2 - 0.8 * 0.6;
        assert!((big_h.eval::<f64>(&y).unwrap() - want).abs() < 1e-15);
        let zero = lift_function(&link, &ScalarField::constant(&link.base, 0.0)).unwrap();
        assert!(zero.expr.is_zero_constant());

        let samples = total_samples(&link, 20, 1);
        let rz = ScalarField::parse(&link.total, "r*z").unwrap();
        let f = project_function(&link, &rz, 1, &samples).unwrap();
        assert_eq!(f.eval::<f64>(&[0.3, 0.1, 2.5]).unwrap(), -2.5);
        let ratio = ScalarField::parse(&link.total, "p*z^2").unwrap();
        assert!(project_function(&link, &ratio, 0, &samples).is_ok());
        let r2 = ScalarField::parse(&link.total, "r^2").unwrap();
        let err = project_function(&link, &r2, 1, &samples).unwrap_err();
        match err {
            Error::NotHomogeneous(msg) => assert!(msg.contains("degree 2"), "{msg}"),
            other => panic!("{other:?}"),
        }

        for f in random_polynomials(&link.base, 100, 77) {
            let back = project_function(&link, &lift_function(&link, &f).unwrap(), 1, &samples).unwrap();
            for y in &samples {
                let x = link.project_point(y);
                assert_eq!(back.eval::<f64>(x).unwrap(), f.eval::<f64>(x).unwrap());
            }
        }
    }

    #[test]
    fn bracket_examples() {
        let link = example();
        let samples = total_samples(&link, 30, 2);
        let f = |s: &str| ScalarField::parse(&link.base, s).unwrap();
        let pol = Policy::default();
        for (a, b) in [("p", "p - z"), ("q", "p"), ("q*z", "q*z")] {
            let rec = bracket_correspondence(&link, &[(f(a), f(b))], &samples, 1e-10, pol);
            assert!(rec.passed(), "{a},{b}: {rec:?}");
        }
        let j = JacobiStructure::contact(&link.contact);
        let fq = lift_function(&link, &f("q")).unwrap();
        let fp = lift_function(&link, &f("p")).unwrap();
        let y = [0.2, 0.6, -1.2, 0.8];
        assert!((theta_bracket(&link.theta, &fq, &fp, &y).unwrap() - 0.8).abs() < 1e-12);
        assert!((jacobi_bracket(&j, &f("q"), &f("p"), &y[..3]).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn consistency_and_poissonization() {
        let link = example();
        let samples = total_samples(&link, 50, 3);
        let polys = random_polynomials(&link.base, 20, 4);
        let pairs: Vec<_> = polys.chunks(2).map(|c| (c[0].clone(), c[1].clone())).collect();
        let pol = Policy::default();
        let rec = symplectization_consistency(&link, &pairs, &samples, 1e-9, pol);
        assert!(rec.passed(), "{rec:?}");

        let p = poissonize(&link, &JacobiStructure::contact(&link.contact)).unwrap();
        let checks = poissonization_checks(&link, &p, &samples[..10], 1e-9, pol);
        assert!(checks.iter().all(CheckRecord::passed), "{checks:?}");
        // −(1/r)(∂q + p∂z)∧∂p − ∂r∧∂z
        let (t, ev) = p.eval::<f64>(&[0.2, 0.6, -1.2, 0.8]).unwrap();
        assert!(ev.iter().all(|v| *v == 0.0));
        assert!((t.get(&[0, 1]) + 1.0 / 0.8).abs() < 1e-12);
        assert!((t.get(&[2, 1]) + 0.6 / 0.8).abs() < 1e-12);
        assert!((t.get(&[3, 2]) + 1.0).abs() < 1e-12);
    }

    #[test]
    fn poissonize_expression_fields() {
        let link = example();
        let mut l = MultivectorField::zero(&link.base, 2).unwrap();
        l.set(&[0, 1], e("1")).unwrap();
        let j = JacobiStructure::poisson(l).unwrap();
        let pe = poissonize_expr(&link, &j).unwrap();
        assert_eq!(pe.components().len(), 1);
        let v = pe.eval::<f64>(&[0.0, 0.0, 0.0, 2.0]).unwrap();
        assert_eq!(v.get(&[0, 1]), 0.5);
    }

    #[test]
    fn conformal_factor_rejected() {
        let link = example().with_conformal_factor(e("r/2"));
        let f = ScalarField::parse(&link.base, "p").unwrap();
        assert!(matches!(lift_function(&link, &f), Err(Error::UnsupportedConformalFactor(_))));
        let rec = symplectization_consistency(&link, &[(f.clone(), f)], &[vec![0.0, 0.0, 0.0, 1.0]], 1e-9, Policy::default());
        assert_eq!(rec.status, Status::Fail);
    }

    #[test]
    fn dissipated_iff_conserved() {
        let link = example();
        let h = ScalarField::parse(&link.base, "p - z").unwrap();
        let big_h = lift_function(&link, &h).unwrap();
        let j = JacobiStructure::contact(&link.contact);
        let samples = total_samples(&link, 20, 6);
        for (f, dissipated) in [("p", true), ("-z", true), ("q", false)] {
            let f = ScalarField::parse(&link.base, f).unwrap();
            let fl = lift_function(&link, &f).unwrap();
            let mut contact_max = 0.0f64;
            let mut symp_max = 0.0f64;
            for y in &samples {
                contact_max = contact_max.max(jacobi_bracket(&j, &f, &h, link.project_point(y)).unwrap().abs());
                symp_max = symp_max.max(theta_bracket(&link.theta, &big_h, &fl, y).unwrap().abs());
            }
            assert_eq!(contact_max < 1e-10, dissipated);
            assert_eq!(symp_max < 1e-10, dissipated);
        }
    }
}
