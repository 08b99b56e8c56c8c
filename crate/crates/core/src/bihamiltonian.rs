//! Compatible pairs, recursion operators, eigenvalue fields and the no-go
//! diagnostic.

use std::sync::Arc;

use nalgebra::Complex;

use crate::autodiff::{self, seed, Dual};
use crate::chart::{Chart, ScalarFn, ScalarField};
use crate::error::{Error, Result};
use crate::linalg::{self, Mat};
use crate::report::{self, CheckRecord, Metric, Policy, Verdict};
use crate::structures::{
    bracket_from_parts, default_test_family, homogeneity_profile, jacobi_point,
    lichnerowicz_residuals, max_diff, recursion_matrix, FieldJet, HomTarget, JacobiStructure,
    VectorSource, DEFAULT_K_RANGE, RANK_TOL,
};
use crate::tensor::{dot, exterior_derivative, schouten, sharp_value, AltTensor, MixedTensorPointValue};

/// Relative spectral clustering tolerance.
pub const CLUSTER_TOL: f64 = 1e-6;
/// Imaginary parts below this (relative to `max(1, ρ)`) are dropped.
pub const COMPLEX_TOL: f64 = 1e-8;

fn require_poisson(j: &JacobiStructure, x: &[f64], tol: f64, which: &str) -> Result<()> {
    let (t, e) = lichnerowicz_residuals(j, x)?;
    let (_, ev) = j.eval::<f64>(x)?;
    let e_norm = ev.iter().map(|v| v.abs()).fold(0.0, f64::max);
    if t.max(e) >= tol || e_norm >= tol {
        return Err(Error::InvalidArgument(format!(
            "{which} is not Poisson at this point (residual {:e})",
            t.max(e).max(e_norm)
        )));
    }
    Ok(())
}

/// `[Λ, Λ₁] = 0` at every sample, cross-checked against the Jacobi test of
/// `Λ + Λ₁`.
pub fn poisson_compatibility(
    lambda: &JacobiStructure,
    lambda1: &JacobiStructure,
    samples: &[Vec<f64>],
    tol: f64,
    policy: Policy,
) -> CheckRecord {
    let sum = match JacobiStructure::sum(lambda, lambda1) {
        Ok(s) => s,
        Err(e) => return CheckRecord::errored("poisson_compatibility", &e),
    };
    let family = default_test_family(lambda.chart());
    let outcomes = report::evaluate(samples, |x| {
        require_poisson(lambda, x, tol, "first bivector")?;
        require_poisson(lambda1, x, tol, "second bivector")?;
        let (a, _) = lambda.eval_jet(x)?;
        let (b, _) = lambda1.eval_jet(x)?;
        let residual = if x.len() >= 3 { schouten(&a, &b)?.max_abs() } else { 0.0 };
        let p = jacobi_point(&sum, &family, x)?;
        let direct = residual < tol;
        let via_sum = p.tensor < tol && p.jacobiator < tol;
        if direct != via_sum {
            return Err(Error::InternalInconsistency(format!(
                "[Λ,Λ₁] residual {residual:e} but sum Jacobi residuals ({:e}, {:e})",
                p.tensor, p.jacobiator
            )));
        }
        Ok(Verdict::within(residual, tol))
    });
    report::aggregate("poisson_compatibility", tol, samples, outcomes, policy)
}

/// `(Λ+Λ₁, E+E₁)` is Jacobi at every sample; cross-checked against the
/// compatibility of the Poissonizations on `total` (base chart plus `r`),
/// evaluated on the slices `r = 1` and `r = 1.7`.
pub fn jacobi_compatibility(
    j: &JacobiStructure,
    j1: &JacobiStructure,
    total: &Arc<Chart>,
    samples: &[Vec<f64>],
    tol: f64,
    policy: Policy,
) -> CheckRecord {
    let build = || -> Result<(JacobiStructure, JacobiStructure, JacobiStructure)> {
        let sum = JacobiStructure::sum(j, j1)?;
        let p = JacobiStructure::poissonized(j, total)?;
        let p1 = JacobiStructure::poissonized(j1, total)?;
        Ok((sum, p, p1))
    };
    let (sum, p, p1) = match build() {
        Ok(v) => v,
        Err(e) => return CheckRecord::errored("jacobi_compatibility", &e),
    };
    let family = default_test_family(j.chart());
    let outcomes = report::evaluate(samples, |x| {
        for (which, s) in [("first", j), ("second", j1)] {
            let (t, e) = lichnerowicz_residuals(s, x)?;
            if t.max(e) >= tol {
                return Err(Error::InvalidArgument(format!(
                    "{which} structure is not Jacobi at this point"
                )));
            }
        }
        let direct = jacobi_point(&sum, &family, x)?;
        let direct_res = direct.tensor.max(direct.jacobiator);
        let mut lifted = 0.0f64;
        for r in [1.0, 1.7] {
            let mut y = x.to_vec();
            y.push(r);
            let (a, _) = p.eval_jet(&y)?;
            let (b, _) = p1.eval_jet(&y)?;
            lifted = lifted.max(schouten(&a, &b)?.max_abs());
        }
        if (direct_res < tol) != (lifted < tol) {
            return Err(Error::InternalInconsistency(format!(
                "sum Jacobi residual {direct_res:e} vs Poissonized compatibility {lifted:e}"
            )));
        }
        Ok(Verdict::within(direct_res, tol))
    });
    report::aggregate("jacobi_compatibility", tol, samples, outcomes, policy)
}

/// `N = ♯_{Λ₁} ∘ ♯_Λ⁻¹` at `x`, checked against `N ♯_Λ(α) = ♯_{Λ₁}(α)` on
/// the coordinate covectors.
pub fn recursion_operator(
    lambda: &JacobiStructure,
    lambda1: &JacobiStructure,
    x: &[f64],
) -> Result<MixedTensorPointValue> {
    let n = recursion_matrix::<f64>(lambda, lambda1, x)?;
    let (l, _) = lambda.eval::<f64>(x)?;
    let (l1, _) = lambda1.eval::<f64>(x)?;
    let dim = x.len();
    let scale = 1.0 + n.iter().flatten().map(|v| v.abs()).fold(0.0, f64::max);
    for k in 0..dim {
        let mut alpha = vec![0.0; dim];
        alpha[k] = 1.0;
        let lhs = linalg::matvec(&n, &sharp_value(&l, &alpha));
        let rhs = sharp_value(&l1, &alpha);
        let r = max_diff(&lhs, &rhs);
        if r > 1e-9 * scale {
            return Err(Error::InternalInconsistency(format!(
                "recursion operator contract violated by {r:e}"
            )));
        }
    }
    Ok(MixedTensorPointValue {
        chart: lambda.chart().clone(),
        point: x.to_vec(),
        matrix: n,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenvalueClusters {
    pub point: Vec<f64>,
    /// `(value, multiplicity)` in increasing order.
    pub real: Vec<(f64, usize)>,
    /// Eigenvalues with non-negligible imaginary part.
    pub non_real: Vec<Complex<f64>>,
    pub spectral_radius: f64,
}

impl EigenvalueClusters {
    pub fn values(&self) -> Vec<f64> {
        self.real.iter().map(|(v, _)| *v).collect()
    }
}

/// Eigenvalues of `n`, with real ones grouped when closer than
/// `cluster_tol · ρ`.
pub fn eigenvalue_clusters(
    n: &Mat<f64>,
    point: &[f64],
    cluster_tol: f64,
    complex_tol: f64,
) -> Result<EigenvalueClusters> {
    let eig = linalg::eigenvalues(n)?;
    let rho = eig.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let ctol = cluster_tol * rho;
    let itol = complex_tol * rho.max(1.0);
    let mut reals: Vec<f64> = Vec::new();
    let mut non_real = Vec::new();
    for z in eig {
        if z.im.abs() <= itol {
            reals.push(z.re);
        } else {
            non_real.push(z);
        }
    }
    reals.sort_by(f64::total_cmp);
    let mut groups: Vec<Vec<f64>> = Vec::new();
    for v in reals {
        match groups.last_mut() {
            Some(g) if v - g[g.len() - 1] <= ctol => g.push(v),
            _ => groups.push(vec![v]),
        }
    }
    let real = groups
        .into_iter()
        .map(|g| (g.iter().sum::<f64>() / g.len() as f64, g.len()))
        .collect();
    Ok(EigenvalueClusters {
        point: point.to_vec(),
        real,
        non_real,
        spectral_radius: rho,
    })
}

/// Real eigenvalues of a recursion operator as local functions.
#[derive(Debug, Clone)]
pub struct EigenFields {
    pub lambda: JacobiStructure,
    pub lambda1: JacobiStructure,
    pub cluster_tol: f64,
    pub complex_tol: f64,
    pub fd_step: f64,
}

/// A local eigenvalue function near a point: value and differential.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenGerm {
    pub value: f64,
    pub multiplicity: usize,
    pub gradient: Vec<f64>,
}

fn gap(values: &[f64]) -> f64 {
    values
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min)
}

/// Assigns each old value its nearest new value; fails unless the match is
/// one-to-one and every move is below half the old spectral gap.
fn match_values(old: &[f64], new: &[f64]) -> Result<Vec<f64>> {
    if old.len() != new.len() {
        return Err(Error::TrackingAmbiguity(format!(
            "{} distinct eigenvalues became {}",
            old.len(),
            new.len()
        )));
    }
    let half_gap = gap(old) / 2.0;
    let mut used = vec![false; new.len()];
    let mut out = Vec::with_capacity(old.len());
    for v in old {
        let (k, d) = new
            .iter()
            .enumerate()
            .map(|(k, w)| (k, (w - v).abs()))
            .fold((usize::MAX, f64::INFINITY), |b, c| if c.1 < b.1 { c } else { b });
        if k == usize::MAX || used[k] || d >= half_gap {
            return Err(Error::TrackingAmbiguity(format!(
                "eigenvalue {v} moved {d:e} with half-gap {half_gap:e}"
            )));
        }
        used[k] = true;
        out.push(new[k]);
    }
    Ok(out)
}

impl EigenFields {
    pub fn new(lambda: &JacobiStructure, lambda1: &JacobiStructure) -> Self {
        EigenFields {
            lambda: lambda.clone(),
            lambda1: lambda1.clone(),
            cluster_tol: CLUSTER_TOL,
            complex_tol: COMPLEX_TOL,
            fd_step: 1e-5,
        }
    }

    pub fn chart(&self) -> &Arc<Chart> {
        self.lambda.chart()
    }

    pub fn clusters(&self, x: &[f64]) -> Result<EigenvalueClusters> {
        let n = recursion_matrix::<f64>(&self.lambda, &self.lambda1, x)?;
        eigenvalue_clusters(&n, x, self.cluster_tol, self.complex_tol)
    }

    /// Distinct real eigenvalues at `x`, increasing.
    pub fn local_values(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.clusters(x)?.values())
    }

    /// Values and central-difference gradients of the local eigenvalue
    /// functions at `x`.
    pub fn germs(&self, x: &[f64]) -> Result<Vec<EigenGerm>> {
        let c = self.clusters(x)?;
        let base = c.values();
        let mut grads = vec![vec![0.0; x.len()]; base.len()];
        for k in 0..x.len() {
            let h = self.fd_step * x[k].abs().max(1.0);
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[k] += h;
            xm[k] -= h;
            let vp = match_values(&base, &self.local_values(&xp)?)?;
            let vm = match_values(&base, &self.local_values(&xm)?)?;
            for i in 0..base.len() {
                grads[i][k] = (vp[i] - vm[i]) / (2.0 * h);
            }
        }
        Ok(c
            .real
            .iter()
            .zip(grads)
            .map(|(&(value, multiplicity), gradient)| EigenGerm {
                value,
                multiplicity,
                gradient,
            })
            .collect())
    }

    /// Continues `from_values` (the distinct eigenvalues at `from`) along the
    /// segment to `to`, refining steps until matches are unambiguous.
    pub fn track(&self, from: &[f64], from_values: &[f64], to: &[f64]) -> Result<Vec<f64>> {
        const MAX_DEPTH: u32 = 14;
        fn lerp(a: &[f64], b: &[f64], t: f64) -> Vec<f64> {
            a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect()
        }
        fn go(
            me: &EigenFields,
            a: &[f64],
            b: &[f64],
            t0: f64,
            t1: f64,
            vals: &[f64],
            depth: u32,
        ) -> Result<Vec<f64>> {
            let next = me.local_values(&lerp(a, b, t1))?;
            match match_values(vals, &next) {
                Ok(v) => Ok(v),
                Err(e) if depth >= MAX_DEPTH || next.len() != vals.len() => Err(e),
                Err(_) => {
                    let mid = 0.5 * (t0 + t1);
                    let half = go(me, a, b, t0, mid, vals, depth + 1)?;
                    go(me, a, b, mid, t1, &half, depth + 1)
                }
            }
        }
        let steps = 16;
        let mut vals = from_values.to_vec();
        for s in 0..steps {
            let t0 = s as f64 / steps as f64;
            let t1 = (s + 1) as f64 / steps as f64;
            vals = go(self, from, to, t0, t1, &vals, 0)?;
        }
        Ok(vals)
    }

    /// Distinct eigenvalues at `base`, continued to every probe.
    pub fn fields(&self, base: &[f64], probes: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        let start = self.local_values(base)?;
        let vals = probes
            .iter()
            .map(|p| self.track(base, &start, p))
            .collect::<Result<Vec<_>>>()?;
        Ok((start, vals))
    }

    /// Number of functionally independent real eigenvalue germs at `x`.
    pub fn independent_count(&self, x: &[f64]) -> Result<usize> {
        let g: Vec<Vec<f64>> = self.germs(x)?.into_iter().map(|g| g.gradient).collect();
        if g.is_empty() {
            return Ok(0);
        }
        Ok(linalg::numerical_rank(&g, RANK_TOL))
    }
}

pub fn eigenvalue_fields(
    lambda: &JacobiStructure,
    lambda1: &JacobiStructure,
    base: &[f64],
    probes: &[Vec<f64>],
) -> Result<Vec<Vec<f64>>> {
    Ok(EigenFields::new(lambda, lambda1).fields(base, probes)?.1)
}

/// A family of functions known pointwise with gradients.
pub trait Family: Sync {
    fn jets(&self, x: &[f64]) -> Result<Vec<(f64, Vec<f64>)>>;
}

impl Family for [ScalarField] {
    fn jets(&self, x: &[f64]) -> Result<Vec<(f64, Vec<f64>)>> {
        self.iter().map(|f| autodiff::value_and_gradient(f, x)).collect()
    }
}

impl Family for Vec<ScalarField> {
    fn jets(&self, x: &[f64]) -> Result<Vec<(f64, Vec<f64>)>> {
        self.as_slice().jets(x)
    }
}

impl Family for EigenFields {
    fn jets(&self, x: &[f64]) -> Result<Vec<(f64, Vec<f64>)>> {
        Ok(self
            .germs(x)?
            .into_iter()
            .map(|g| (g.value, g.gradient))
            .collect())
    }
}

/// Largest pairwise bracket of the family under `j`.
pub fn involution_check(
    name: &str,
    family: &dyn Family,
    j: &JacobiStructure,
    samples: &[Vec<f64>],
    tol: f64,
    policy: Policy,
) -> CheckRecord {
    report::residual_check(name, tol, samples, policy, |x| {
        let jets = family.jets(x)?;
        let (l, e) = j.eval::<f64>(x)?;
        let mut worst = 0.0f64;
        for a in 0..jets.len() {
            for b in (a + 1)..jets.len() {
                let v = bracket_from_parts(&l, &e, &jets[a].0, &jets[a].1, &jets[b].0, &jets[b].1);
                worst = worst.max(v.abs());
            }
        }
        Ok(worst)
    })
}

/// `X = ♯_Λ(dh) = ♯_{Λ₁}(dh₁)` at every sample.
pub fn bihamiltonian_check(
    x_field: &VectorSource,
    lambda: &JacobiStructure,
    h: &ScalarField,
    lambda1: &JacobiStructure,
    h1: &ScalarField,
    samples: &[Vec<f64>],
    tol: f64,
    policy: Policy,
) -> CheckRecord {
    report::residual_check("bihamiltonian", tol, samples, policy, |x| {
        let xv = x_field.eval::<f64>(x)?;
        let (l, _) = lambda.eval::<f64>(x)?;
        let (l1, _) = lambda1.eval::<f64>(x)?;
        let a = sharp_value(&l, &autodiff::gradient(h, x)?);
        let b = sharp_value(&l1, &autodiff::gradient(h1, x)?);
        Ok(max_diff(&xv, &a).max(max_diff(&xv, &b)))
    })
}

/// Determinant of the Hessian block of `h` in the given coordinates.
pub fn action_hessian_det(h: &ScalarField, action: &[usize], x: &[f64]) -> Result<f64> {
    let hess = autodiff::hessian(h, x)?;
    let block: Mat<f64> = action
        .iter()
        .map(|&i| action.iter().map(|&j| hess[i][j]).collect())
        .collect();
    Ok(linalg::determinant(&block))
}

/// Kolmogorov nondegeneracy: `|det ∂²H/∂s_i∂s_j| > det_tol` on at least
/// `policy.min_pass_fraction` of the samples.
pub fn kolmogorov_check(
    h: &ScalarField,
    action: &[usize],
    samples: &[Vec<f64>],
    det_tol: f64,
    policy: Policy,
) -> CheckRecord {
    let dets = report::evaluate(samples, |x| action_hessian_det(h, action, x));
    let finite: Vec<f64> = dets.iter().filter_map(|d| d.as_ref().ok().map(|v| v.abs())).collect();
    let outcomes = dets
        .into_iter()
        .map(|d| d.map(|v| Verdict::new(v.abs(), v.abs() > det_tol)))
        .collect();
    let mut rec = report::aggregate("kolmogorov", det_tol, samples, outcomes, policy);
    if !finite.is_empty() {
        rec = rec
            .with_metric("min_abs_det", Metric::Real(finite.iter().copied().fold(f64::INFINITY, f64::min)))
            .with_metric("max_abs_det", Metric::Real(finite.iter().copied().fold(0.0, f64::max)));
    }
    rec
}

/// Mixed partials of `h` re-expressed in eigenvalue variables, by least
/// squares on the local Jacobian of the eigenvalue germs.
pub fn separability_at(h: &dyn ScalarFn, eig: &EigenFields, x: &[f64], step: f64) -> Result<f64> {
    let germs = eig.germs(x)?;
    let m = germs.len();
    if m < 2 {
        return Ok(0.0);
    }
    let base: Vec<f64> = germs.iter().map(|g| g.value).collect();
    let jac_t = |gs: &[Vec<f64>]| -> Mat<f64> {
        (0..x.len()).map(|k| gs.iter().map(|g| g[k]).collect()).collect()
    };
    let grads: Vec<Vec<f64>> = germs.iter().map(|g| g.gradient.clone()).collect();
    let cond = linalg::condition_number(&grads);
    if !(cond < 1e8) {
        return Err(Error::IllConditionedJacobian(cond));
    }
    // ∂H/∂λ at a nearby point, with germs ordered to match `base`
    let dh_dlambda = |y: &[f64]| -> Result<Vec<f64>> {
        let gs = eig.germs(y)?;
        let vals: Vec<f64> = gs.iter().map(|g| g.value).collect();
        let matched = match_values(&base, &vals)?;
        let ordered: Vec<Vec<f64>> = matched
            .iter()
            .map(|v| {
                gs.iter()
                    .find(|g| g.value == *v)
                    .map(|g| g.gradient.clone())
                    .unwrap_or_default()
            })
            .collect();
        linalg::least_squares(&jac_t(&ordered), &h.gradient(y)?)
    };
    let mut dg: Vec<Vec<f64>> = vec![vec![0.0; x.len()]; m];
    for k in 0..x.len() {
        let hk = step * x[k].abs().max(1.0);
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[k] += hk;
        xm[k] -= hk;
        let gp = dh_dlambda(&xp)?;
        let gm = dh_dlambda(&xm)?;
        for i in 0..m {
            dg[i][k] = (gp[i] - gm[i]) / (2.0 * hk);
        }
    }
    let jt = jac_t(&grads);
    let mut worst = 0.0f64;
    for (i, row) in dg.iter().enumerate() {
        let c = linalg::least_squares(&jt, row)?;
        for (j, cij) in c.iter().enumerate() {
            if i != j {
                worst = worst.max(cij.abs());
            }
        }
    }
    Ok(worst)
}

/// Diagnostic evidence for additive separability of `h` in the eigenvalues.
pub fn fernandes_separability_residual(
    h: &dyn ScalarFn,
    eig: &EigenFields,
    samples: &[Vec<f64>],
    tol: f64,
    policy: Policy,
) -> CheckRecord {
    report::residual_check("separability", tol, samples, policy, |x| {
        separability_at(h, eig, x, 1e-4)
    })
    .as_diagnostic()
}

/// Tolerances of the no-go diagnostic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoGoTolerances {
    pub homogeneity: f64,
    pub eigen_homogeneity: f64,
    pub euler: f64,
    pub det: f64,
    pub closedness: f64,
}

impl Default for NoGoTolerances {
    fn default() -> Self {
        NoGoTolerances {
            homogeneity: 1e-9,
            eigen_homogeneity: 1e-6,
            euler: 1e-9,
            det: 1e-9,
            closedness: 1e-8,
        }
    }
}

/// Inputs of the no-go diagnostic.
pub struct NoGoInput<'a> {
    pub lambda: &'a JacobiStructure,
    pub lambda1: &'a JacobiStructure,
    pub delta: &'a VectorSource,
    pub hamiltonian: Option<&'a ScalarField>,
    /// Explicit second Hamiltonian for the bi-Hamiltonian test.
    pub h1: Option<&'a ScalarField>,
    /// `H` in action-angle form, its action coordinates and samples there.
    pub action: Option<(&'a ScalarField, &'a [usize], &'a [Vec<f64>])>,
    pub samples: &'a [Vec<f64>],
    pub tol: NoGoTolerances,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoGoVerdict {
    pub dim: usize,
    pub lambda1_degree: Option<i32>,
    pub lambda1_profile: Vec<(i32, f64)>,
    pub n_degree: Option<i32>,
    /// Distinct degrees detected among the eigenvalue germs.
    pub eigen_degrees: Vec<i32>,
    /// Germs whose degree could not be determined.
    pub eigen_unassigned: usize,
    /// `max |Δ(λ)|` over germs and samples.
    pub eigen_delta_max: f64,
    pub independent_min: Option<usize>,
    pub independent_max: Option<usize>,
    pub euler_residual: Option<f64>,
    pub hessian_dets: Option<Vec<f64>>,
    pub nd_holds: Option<bool>,
    pub bihamiltonian: Option<bool>,
    pub bihamiltonian_residual: Option<f64>,
    /// Clause 1: `Λ₁` is (−1)-homogeneous.
    pub clause_homogeneous: bool,
    /// Clause 2 evidence: `dim/2` independent real eigenvalues everywhere.
    pub clause_independent: bool,
    pub forbidden: bool,
    pub inconsistency: Option<String>,
    pub skipped: usize,
    pub lines: Vec<String>,
}

impl NoGoVerdict {
    pub fn is_consistent(&self) -> bool {
        self.inconsistency.is_none()
    }
}

fn fmt_deg(d: Option<i32>) -> String {
    d.map_or("not homogeneous".into(), |k| k.to_string())
}

/// Bi-Hamiltonian evidence at `x`: either the explicit `h1`, or closedness
/// of `♯_{Λ₁}⁻¹(X_H)` when `Λ₁` is invertible. `None` when undecidable.
fn bihamiltonian_residual(input: &NoGoInput<'_>, h: &ScalarField, x: &[f64]) -> Result<Option<f64>> {
    if let Some(h1) = input.h1 {
        let (l, _) = input.lambda.eval::<f64>(x)?;
        let (l1, _) = input.lambda1.eval::<f64>(x)?;
        let a = sharp_value(&l, &autodiff::gradient(h, x)?);
        let b = sharp_value(&l1, &autodiff::gradient(h1, x)?);
        return Ok(Some(max_diff(&a, &b)));
    }
    let sx = seed(x);
    let (l, _) = input.lambda.eval(&sx)?;
    let (l1, _) = input.lambda1.eval(&sx)?;
    let dh = FieldJet::of(h, x)?.grad;
    let xh = sharp_value(&l, &dh);
    let p1 = l1.as_matrix();
    let alpha: Vec<Dual<f64>> = match linalg::solve(&p1, &xh) {
        Ok(a) => a,
        Err(Error::SingularMatrix) => return Ok(None),
        Err(e) => return Err(e),
    };
    let d = exterior_derivative(&AltTensor::from_vector(alpha))?;
    Ok(Some(d.max_abs()))
}

/// Records the quantities entering the no-go statement and checks that the
/// forbidden combination does not occur.
pub fn nogo_diagnostic(input: &NoGoInput<'_>) -> Result<NoGoVerdict> {
    let t = input.tol;
    let dim = input.lambda.chart().dim();
    let samples = input.samples;
    let mut lines = Vec::new();

    let l1 = homogeneity_profile(
        &HomTarget::Bivector(input.lambda1),
        input.delta,
        samples,
        DEFAULT_K_RANGE,
        t.homogeneity,
    )?;
    let l0 = homogeneity_profile(
        &HomTarget::Bivector(input.lambda),
        input.delta,
        samples,
        DEFAULT_K_RANGE,
        t.homogeneity,
    )?;
    let nh = homogeneity_profile(
        &HomTarget::Recursion(input.lambda, input.lambda1),
        input.delta,
        samples,
        DEFAULT_K_RANGE,
        t.homogeneity,
    )?;
    lines.push(format!("deg(Lambda1) = {}", fmt_deg(l1.degree)));
    lines.push(format!("deg(N) = {}", fmt_deg(nh.degree)));
    let mut inconsistency = None;
    if let (Some(a), Some(b), Some(c)) = (l0.degree, l1.degree, nh.degree) {
        if c != b - a {
            inconsistency = Some(format!("deg N = {c} but deg Lambda1 - deg Lambda = {}", b - a));
        }
    }

    let eig = EigenFields::new(input.lambda, input.lambda1);
    let mut degrees: Vec<i32> = Vec::new();
    let mut unassigned = 0;
    let mut delta_max = 0.0f64;
    let mut n_resid_max = 0.0f64;
    let mut counts: Vec<usize> = Vec::new();
    let mut skipped = 0;
    let per_sample = report::evaluate(samples, |x| {
        let germs = eig.germs(x)?;
        let d = input.delta.eval::<f64>(x)?;
        let count = if germs.is_empty() {
            0
        } else {
            let g: Vec<Vec<f64>> = germs.iter().map(|g| g.gradient.clone()).collect();
            linalg::numerical_rank(&g, RANK_TOL)
        };
        let derivs: Vec<(f64, f64)> = germs.iter().map(|g| (g.value, dot(&d, &g.gradient))).collect();
        Ok((count, derivs))
    });
    for r in per_sample {
        match r {
            Ok((count, derivs)) => {
                counts.push(count);
                for (v, dv) in derivs {
                    delta_max = delta_max.max(dv.abs());
                    let scale = 1.0 + v.abs();
                    let fit = |k: i32| (dv - k as f64 * v).abs() / scale;
                    // a vanishing germ fits every degree; report the one of N
                    let best = match nh.degree {
                        Some(k) if fit(k) < t.eigen_homogeneity => (k, fit(k)),
                        _ => (DEFAULT_K_RANGE.0..=DEFAULT_K_RANGE.1)
                            .map(|k| (k, fit(k)))
                            .fold((0, f64::INFINITY), |b, c| if c.1 < b.1 { c } else { b }),
                    };
                    if best.1 < t.eigen_homogeneity {
                        if !degrees.contains(&best.0) {
                            degrees.push(best.0);
                        }
                    } else {
                        unassigned += 1;
                    }
                    if let Some(k) = nh.degree {
                        n_resid_max = n_resid_max.max((dv - k as f64 * v).abs() / scale);
                    }
                }
            }
            Err(e) if e.is_pointwise() => skipped += 1,
            Err(e) => return Err(e),
        }
    }
    degrees.sort_unstable();
    if let Some(k) = nh.degree {
        if n_resid_max >= t.eigen_homogeneity && inconsistency.is_none() {
            inconsistency = Some(format!(
                "N is {k}-homogeneous but an eigenvalue germ misses degree {k} by {n_resid_max:e}"
            ));
        }
    }
    lines.push(format!("eigenvalue degrees = {degrees:?} (unassigned germs: {unassigned})"));
    lines.push(format!("max |Delta(lambda)| = {delta_max:.3e}"));
    let (cmin, cmax) = (counts.iter().min().copied(), counts.iter().max().copied());
    let show = |c: Option<usize>| c.map_or("-".to_string(), |k| k.to_string());
    lines.push(format!(
        "independent real eigenvalues: min {}, max {}, need {}",
        show(cmin),
        show(cmax),
        dim / 2
    ));

    let euler_residual = match input.hamiltonian {
        Some(h) => {
            let mut worst = 0.0f64;
            for x in samples {
                match h.value_and_gradient(x) {
                    Ok((v, g)) => {
                        let d = match input.delta.eval::<f64>(x) {
                            Ok(d) => d,
                            Err(e) if e.is_pointwise() => continue,
                            Err(e) => return Err(e),
                        };
                        worst = worst.max((dot(&d, &g) - v).abs());
                    }
                    Err(e) if e.is_pointwise() => continue,
                    Err(e) => return Err(e),
                }
            }
            lines.push(format!("Euler residual |Delta(H) - H| = {worst:.3e}"));
            Some(worst)
        }
        None => None,
    };

    let (hessian_dets, nd_holds) = match input.action {
        Some((ha, coords, pts)) => {
            let dets = pts
                .iter()
                .map(|x| action_hessian_det(ha, coords, x))
                .collect::<Result<Vec<_>>>()?;
            let nonzero = dets.iter().filter(|d| d.abs() > t.det).count();
            let holds = !dets.is_empty() && nonzero as f64 >= 0.9 * dets.len() as f64;
            lines.push(format!(
                "(ND) Hessian determinant nonzero at {nonzero}/{} action samples",
                dets.len()
            ));
            (Some(dets), Some(holds))
        }
        None => (None, None),
    };

    let (bihamiltonian, bh_res) = match input.hamiltonian {
        Some(h) => {
            let mut worst: Option<f64> = None;
            let mut undecided = false;
            for x in samples {
                match bihamiltonian_residual(input, h, x) {
                    Ok(Some(r)) => worst = Some(worst.map_or(r, |w| w.max(r))),
                    Ok(None) => undecided = true,
                    Err(e) if e.is_pointwise() => {}
                    Err(e) => return Err(e),
                }
            }
            match (worst, undecided) {
                (Some(w), false) => {
                    lines.push(format!("bi-Hamiltonian residual = {w:.3e}"));
                    (Some(w < t.closedness), Some(w))
                }
                _ => {
                    lines.push("bi-Hamiltonian property undecided (second bivector degenerate)".into());
                    (None, worst)
                }
            }
        }
        None => (None, None),
    };

    let clause_homogeneous = l1.degree == Some(-1);
    let clause_independent = !counts.is_empty() && counts.iter().all(|&c| c == dim / 2);
    let forbidden = clause_homogeneous
        && clause_independent
        && euler_residual.is_some_and(|r| r < t.euler)
        && bihamiltonian != Some(false)
        && nd_holds != Some(false);
    if forbidden && inconsistency.is_none() {
        inconsistency = Some(
            "(-1)-homogeneous compatible bivector with a full set of independent real eigenvalues"
                .into(),
        );
    }
    lines.push(match (clause_homogeneous, clause_independent) {
        (false, _) => "clause 1 fails (Lambda1 not (-1)-homogeneous): no contradiction".into(),
        (true, false) => "clause 2 fails (too few independent real eigenvalues): no contradiction".into(),
        (true, true) if !forbidden => "both clauses hold but the remaining hypotheses do not: no contradiction".into(),
        _ => "FORBIDDEN CONJUNCTION OBSERVED".into(),
    });

    Ok(NoGoVerdict {
        dim,
        lambda1_degree: l1.degree,
        lambda1_profile: l1.profile,
        n_degree: nh.degree,
        eigen_degrees: degrees,
        eigen_unassigned: unassigned,
        eigen_delta_max: delta_max,
        independent_min: cmin,
        independent_max: cmax,
        euler_residual,
        hessian_dets,
        nd_holds,
        bihamiltonian,
        bihamiltonian_residual: bh_res,
        clause_homogeneous,
        clause_independent,
        forbidden,
        inconsistency,
        skipped,
        lines,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use crate::tensor::MultivectorField;

    fn chart() -> Arc<Chart> {
        Chart::with_constraints(
            "U",
            &["x1", "x2", "p1", "p2"],
            ["x2", "p1", "p2"].iter().map(|s| parse(s).unwrap()).collect(),
        )
        .unwrap()
    }

    fn pair(c: &Arc<Chart>) -> (JacobiStructure, JacobiStructure) {
        let l = MultivectorField::zero(c, 2)
            .unwrap()
            .with(&[0, 2], parse("1").unwrap())
            .unwrap()
            .with(&[1, 3], parse("1").unwrap())
            .unwrap();
        let l1 = MultivectorField::zero(c, 2)
            .unwrap()
            .with(&[0, 2], parse("p1").unwrap())
            .unwrap()
            .with(&[1, 3], parse("p2*x2").unwrap())
            .unwrap();
        (JacobiStructure::poisson(l).unwrap(), JacobiStructure::poisson(l1).unwrap())
    }

    #[test]
    fn recursion_operator_is_diagonal() {
        let c = chart();
        let (l, l1) = pair(&c);
        let x = [0.5, 2.0, 0.7, 1.5];
        let n = recursion_operator(&l, &l1, &x).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let expected = if i != j { 0.0 } else if i % 2 == 0 { 0.7 } else { 3.0 };
                assert!((n.matrix[i][j] - expected).abs() < 1e-14);
            }
        }
        let id = recursion_operator(&l, &l, &x).unwrap();
        let two = recursion_operator(&l, &l.scaled(2.0), &x).unwrap();
        for i in 0..4 {
            assert!((id.matrix[i][i] - 1.0).abs() < 1e-15);
            assert!((two.matrix[i][i] - 2.0).abs() < 1e-15);
        }
        let cl = eigenvalue_clusters(&n.matrix, &x, CLUSTER_TOL, COMPLEX_TOL).unwrap();
        assert_eq!(cl.real.len(), 2);
        assert!((cl.real[0].0 - 0.7).abs() < 1e-12 && cl.real[0].1 == 2);
        assert!((cl.real[1].0 - 3.0).abs() < 1e-12 && cl.real[1].1 == 2);
    }

    #[test]
    fn rotation_is_non_real() {
        let rot = vec![vec![0.0, -1.0], vec![1.0, 0.0]];
        let cl = eigenvalue_clusters(&rot, &[], CLUSTER_TOL, COMPLEX_TOL).unwrap();
        assert!(cl.real.is_empty());
        assert_eq!(cl.non_real.len(), 2);
    }

    #[test]
    fn tracked_fields_and_crossing() {
        let c = chart();
        let (l, l1) = pair(&c);
        let ef = EigenFields::new(&l, &l1);
        // p1 = 0.2 stays below p2*x2 = 1.0 along the whole segment
        let (start, vals) = ef
            .fields(&[0.5, 2.0, 0.7, 1.5], &[vec![0.0, 1.0, 0.2, 1.0]])
            .unwrap();
        assert!((start[0] - 0.7).abs() < 1e-12 && (start[1] - 3.0).abs() < 1e-12);
        assert!((vals[0][0] - 0.2).abs() < 1e-12 && (vals[0][1] - 1.0).abs() < 1e-12);
        // from p1 < p2 x2 to p1 > p2 x2 the two eigenvalues must cross
        let err = ef
            .fields(&[0.0, 1.0, 0.5, 1.0], &[vec![0.0, 1.0, 1.5, 1.0]])
            .unwrap_err();
        assert!(matches!(err, Error::TrackingAmbiguity(_)), "{err:?}");

        let germs = ef.germs(&[0.5, 2.0, 0.7, 1.5]).unwrap();
        let d1 = [0.0, 0.0, 1.0, 0.0];
        let d2 = [0.0, 1.5, 0.0, 2.0];
        assert!(max_diff(&germs[0].gradient, &d1) < 1e-6);
        assert!(max_diff(&germs[1].gradient, &d2) < 1e-6);
    }

    #[test]
    fn kolmogorov_examples() {
        let c = Chart::new("A", &["phi1", "phi2", "s1", "s2"]).unwrap();
        let pts: Vec<Vec<f64>> = (0..5).map(|i| vec![0.1, 0.2, 0.3 + 0.1 * i as f64, 1.0]).collect();
        let pol = Policy { min_pass_fraction: 0.9, ..Policy::default() };
        let lin = ScalarField::parse(&c, "s1 + s2").unwrap();
        let rec = kolmogorov_check(&lin, &[2, 3], &pts, 1e-9, pol);
        assert!(!rec.passed());
        let quad = ScalarField::parse(&c, "(s1^2 + s2^2)/2").unwrap();
        assert!(kolmogorov_check(&quad, &[2, 3], &pts, 1e-9, pol).passed());
        let prod = ScalarField::parse(&c, "s1*s2").unwrap();
        assert!((action_hessian_det(&prod, &[2, 3], &pts[0]).unwrap() + 1.0).abs() < 1e-14);
    }
}
