//! Antisymmetric tensor fields and their calculus.
//!
//! Convention used everywhere: a degree-k field with stored components
//! `A^{i₁<…<i_k}` denotes `Σ_{i₁<…<i_k} A^{i₁…i_k} ∂_{i₁}∧…∧∂_{i_k}` (and
//! likewise for forms). Point values are held as full antisymmetric arrays,
//! so the pairing of a bivector with two one-forms is
//! `Λ(α, β) = Σ_{i<j} Λ^{ij}(α_iβ_j − α_jβ_i) = Σ_{ij} Λ[i][j] α_i β_j`.
//! The Schouten–Nijenhuis normalisation is documented in
//! `docs/conventions.md`; it is fixed by the requirement that
//! `[Λ,Λ] = 2E∧Λ, [E,Λ] = 0` holds exactly when the bracket
//! `Λ(df,dg) + fE(g) − gE(f)` satisfies the Jacobi identity.

use std::collections::BTreeMap;
use std::fmt;
use std::marker::PhantomData;
use std::sync::Arc;

use crate::autodiff::{self, Dual, Scalar};
use crate::chart::Chart;
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::linalg::Mat;

/// Strictly increasing index tuples of length `k` in `0..n`.
pub fn sorted_tuples(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::with_capacity(k), &mut out);
    out
}

/// All permutations of `0..k` with their signs.
pub fn permutations(k: usize) -> Vec<(Vec<usize>, f64)> {
    fn rec(prefix: &mut Vec<usize>, rest: &mut Vec<usize>, sign: f64, out: &mut Vec<(Vec<usize>, f64)>) {
        if rest.is_empty() {
            out.push((prefix.clone(), sign));
            return;
        }
        for pos in 0..rest.len() {
            let v = rest.remove(pos);
            prefix.push(v);
            // moving element at `pos` to the front costs `pos` transpositions
            let s = if pos % 2 == 0 { sign } else { -sign };
            rec(prefix, rest, s, out);
            prefix.pop();
            rest.insert(pos, v);
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut (0..k).collect(), 1.0, &mut out);
    out
}

/// Sorts an index tuple, returning the permutation sign, or `None` when an
/// index repeats.
pub fn sort_with_sign(idx: &[usize]) -> Option<(Vec<usize>, f64)> {
    let mut v = idx.to_vec();
    let mut sign = 1.0;
    for i in 0..v.len() {
        for j in 0..v.len() - 1 - i {
            if v[j] > v[j + 1] {
                v.swap(j, j + 1);
                sign = -sign;
            }
        }
    }
    if v.windows(2).any(|w| w[0] == w[1]) {
        None
    } else {
        Some((v, sign))
    }
}

/// Point value of a totally antisymmetric tensor, stored densely.
#[derive(Debug, Clone, PartialEq)]
pub struct AltTensor<S> {
    dim: usize,
    degree: usize,
    data: Vec<S>,
}

impl<S: Scalar> AltTensor<S> {
    pub fn zeros(dim: usize, degree: usize) -> Self {
        AltTensor {
            dim,
            degree,
            data: vec![S::zero(); dim.pow(degree as u32)],
        }
    }

    pub fn scalar(v: S) -> Self {
        AltTensor {
            dim: 0,
            degree: 0,
            data: vec![v],
        }
    }

    /// A degree-0 value on an `n`-dimensional chart.
    pub fn scalar_on(dim: usize, v: S) -> Self {
        AltTensor {
            dim,
            degree: 0,
            data: vec![v],
        }
    }

    pub fn from_vector(v: Vec<S>) -> Self {
        AltTensor {
            dim: v.len(),
            degree: 1,
            data: v,
        }
    }

    /// Builds a bivector value from its full antisymmetric matrix.
    pub fn from_matrix(m: &Mat<S>) -> Self {
        let n = m.len();
        AltTensor {
            dim: n,
            degree: 2,
            data: m.iter().flat_map(|r| r.iter().cloned()).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    fn flat(&self, idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, &i| acc * self.dim + i)
    }

    /// Component at an arbitrary (not necessarily sorted) index tuple.
    pub fn get(&self, idx: &[usize]) -> S {
        self.data[self.flat(idx)].clone()
    }

    /// Sets the component at a sorted tuple and all its permutations.
    pub fn set(&mut self, sorted: &[usize], value: S) {
        if self.degree == 0 {
            self.data[0] = value;
            return;
        }
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return;
        }
        for (perm, sign) in permutations(sorted.len()) {
            let idx: Vec<usize> = perm.iter().map(|&p| sorted[p]).collect();
            let f = self.flat(&idx);
            self.data[f] = if sign > 0.0 { value.clone() } else { -value.clone() };
        }
    }

    /// Stored components, keyed by sorted tuple.
    pub fn components(&self) -> Vec<(Vec<usize>, S)> {
        sorted_tuples(self.dim, self.degree)
            .into_iter()
            .map(|t| {
                let v = self.get(&t);
                (t, v)
            })
            .collect()
    }

    /// Vector components (degree 1).
    pub fn as_vector(&self) -> Vec<S> {
        debug_assert_eq!(self.degree, 1);
        self.data.clone()
    }

    /// Full antisymmetric matrix (degree 2).
    pub fn as_matrix(&self) -> Mat<S> {
        debug_assert_eq!(self.degree, 2);
        self.data.chunks(self.dim).map(<[S]>::to_vec).collect()
    }

    pub fn map<T: Scalar>(&self, f: impl Fn(&S) -> T) -> AltTensor<T> {
        AltTensor {
            dim: self.dim,
            degree: self.degree,
            data: self.data.iter().map(f).collect(),
        }
    }

    pub fn primal(&self) -> AltTensor<f64> {
        self.map(Scalar::primal)
    }

    fn check_shape(&self, other: &Self) -> Result<()> {
        if self.dim != other.dim || self.degree != other.degree {
            return Err(Error::InvalidArgument(format!(
                "tensor shape mismatch: (dim {}, deg {}) vs (dim {}, deg {})",
                self.dim, self.degree, other.dim, other.degree
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_shape(other)?;
        Ok(AltTensor {
            dim: self.dim,
            degree: self.degree,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a.clone() + b.clone())
                .collect(),
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_shape(other)?;
        Ok(AltTensor {
            dim: self.dim,
            degree: self.degree,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a.clone() - b.clone())
                .collect(),
        })
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| v.scale(c))
    }

    pub fn mul_scalar(&self, s: &S) -> Self {
        self.map(|v| v.clone() * s.clone())
    }

    /// Largest absolute primal component.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|v| v.primal().abs()).fold(0.0, f64::max)
    }
}

impl AltTensor<f64> {
    /// Maximum componentwise absolute difference.
    pub fn residual(&self, other: &AltTensor<f64>) -> Result<f64> {
        Ok(self.sub(other)?.max_abs())
    }
}

impl<S: Scalar> AltTensor<Dual<S>> {
    /// Primal part, dropping one level of tangents.
    pub fn value(&self) -> AltTensor<S> {
        AltTensor {
            dim: self.dim,
            degree: self.degree,
            data: self.data.iter().map(|d| d.re.clone()).collect(),
        }
    }

    /// Partial derivative along coordinate `l`.
    pub fn partial(&self, l: usize) -> AltTensor<S> {
        AltTensor {
            dim: self.dim,
            degree: self.degree,
            data: self.data.iter().map(|d| d.d(l)).collect(),
        }
    }
}

/// Graded antisymmetric product, computed by summing over shuffles.
pub fn wedge<S: Scalar>(a: &AltTensor<S>, b: &AltTensor<S>) -> Result<AltTensor<S>> {
    let dim = a.dim.max(b.dim);
    if a.degree > 0 && b.degree > 0 && a.dim != b.dim {
        return Err(Error::InvalidArgument("wedge of tensors on different dimensions".into()));
    }
    let deg = a.degree + b.degree;
    if deg > dim {
        return Err(Error::DegreeOverflow { degree: deg, dim });
    }
    if a.degree == 0 {
        return Ok(b.mul_scalar(&a.data[0]));
    }
    if b.degree == 0 {
        return Ok(a.mul_scalar(&b.data[0]));
    }
    let mut out = AltTensor::zeros(dim, deg);
    let shuffles: Vec<(Vec<usize>, Vec<usize>, f64)> = sorted_tuples(deg, a.degree)
        .into_iter()
        .map(|left| {
            let right: Vec<usize> = (0..deg).filter(|p| !left.contains(p)).collect();
            let order: Vec<usize> = left.iter().chain(&right).copied().collect();
            let sign = sort_with_sign(&order).map_or(0.0, |(_, s)| s);
            (left, right, sign)
        })
        .collect();
    for idx in sorted_tuples(dim, deg) {
        let mut acc = S::zero();
        for (left, right, sign) in &shuffles {
            let li: Vec<usize> = left.iter().map(|&p| idx[p]).collect();
            let ri: Vec<usize> = right.iter().map(|&p| idx[p]).collect();
            let term = a.get(&li) * b.get(&ri);
            acc = if *sign > 0.0 { acc + term } else { acc - term };
        }
        out.set(&idx, acc);
    }
    Ok(out)
}

/// Contraction of a vector into the first slot of a form.
pub fn interior<S: Scalar>(x: &[S], alpha: &AltTensor<S>) -> Result<AltTensor<S>> {
    if alpha.degree == 0 {
        return Err(Error::InvalidArgument("interior product of a 0-form".into()));
    }
    if x.len() != alpha.dim {
        return Err(Error::InvalidArgument("interior product dimension mismatch".into()));
    }
    let n = alpha.dim;
    let mut out = AltTensor::zeros(n, alpha.degree - 1);
    for j in sorted_tuples(n, alpha.degree - 1) {
        let mut acc = S::zero();
        for (i, xi) in x.iter().enumerate() {
            let mut idx = Vec::with_capacity(alpha.degree);
            idx.push(i);
            idx.extend_from_slice(&j);
            acc = acc + xi.clone() * alpha.get(&idx);
        }
        out.set(&j, acc);
    }
    Ok(out)
}

/// Exterior derivative from component values carrying first derivatives.
pub fn exterior_derivative<S: Scalar>(alpha: &AltTensor<Dual<S>>) -> Result<AltTensor<S>> {
    let n = alpha.dim;
    let k = alpha.degree;
    if k + 1 > n {
        return Err(Error::DegreeOverflow { degree: k + 1, dim: n });
    }
    let mut out = AltTensor::zeros(n, k + 1);
    for idx in sorted_tuples(n, k + 1) {
        let mut acc = S::zero();
        for m in 0..=k {
            let rest: Vec<usize> = idx
                .iter()
                .enumerate()
                .filter(|&(p, _)| p != m)
                .map(|(_, &i)| i)
                .collect();
            let term = alpha.get(&rest).d(idx[m]);
            acc = if m % 2 == 0 { acc + term } else { acc - term };
        }
        out.set(&idx, acc);
    }
    Ok(out)
}

/// Lie derivative of a form by Cartan's formula `ι_X d + d ι_X`.
pub fn lie_derivative_form<S: Scalar>(
    x: &[Dual<S>],
    alpha: &AltTensor<Dual<S>>,
) -> Result<AltTensor<S>> {
    let xv: Vec<S> = x.iter().map(|d| d.re.clone()).collect();
    let n = alpha.dim;
    if alpha.degree == n {
        // d of a top form vanishes; only d ι_X survives.
        return exterior_derivative(&interior(x, alpha)?);
    }
    let i_d = interior(&xv, &exterior_derivative(alpha)?)?;
    if alpha.degree == 0 {
        return Ok(i_d);
    }
    let d_i = exterior_derivative(&interior(x, alpha)?)?;
    i_d.add(&d_i)
}

/// Lie derivative of a multivector: `X^l ∂_l A^I − Σ_m A^{…l…} ∂_l X^{i_m}`.
pub fn lie_derivative_multivector<S: Scalar>(
    x: &[Dual<S>],
    a: &AltTensor<Dual<S>>,
) -> Result<AltTensor<S>> {
    let n = a.dim;
    if x.len() != n {
        return Err(Error::InvalidArgument("Lie derivative dimension mismatch".into()));
    }
    let mut out = AltTensor::zeros(n, a.degree);
    for idx in sorted_tuples(n, a.degree) {
        let mut acc = S::zero();
        for (l, xl) in x.iter().enumerate() {
            acc = acc + xl.re.clone() * a.get(&idx).d(l);
        }
        for m in 0..a.degree {
            for l in 0..n {
                let mut swapped = idx.clone();
                swapped[m] = l;
                acc = acc - a.get(&swapped).re * x[idx[m]].d(l);
            }
        }
        out.set(&idx, acc);
    }
    Ok(out)
}

/// Lie derivative of a (1,1) tensor `N^i_j`.
pub fn lie_derivative_mixed<S: Scalar>(x: &[Dual<S>], n_op: &Mat<Dual<S>>) -> Mat<S> {
    let n = x.len();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let mut acc = S::zero();
                    for l in 0..n {
                        acc = acc + x[l].re.clone() * n_op[i][j].d(l);
                        acc = acc - n_op[l][j].re.clone() * x[i].d(l);
                        acc = acc + n_op[i][l].re.clone() * x[l].d(j);
                    }
                    acc
                })
                .collect()
        })
        .collect()
}

/// Schouten–Nijenhuis bracket for vector and bivector arguments.
pub fn schouten<S: Scalar>(a: &AltTensor<Dual<S>>, b: &AltTensor<Dual<S>>) -> Result<AltTensor<S>> {
    if a.dim != b.dim {
        return Err(Error::InvalidArgument("Schouten bracket dimension mismatch".into()));
    }
    let n = a.dim;
    match (a.degree, b.degree) {
        (1, 1) => {
            let mut out = AltTensor::zeros(n, 1);
            for i in 0..n {
                let mut acc = S::zero();
                for l in 0..n {
                    acc = acc + a.get(&[l]).re * b.get(&[i]).d(l);
                    acc = acc - b.get(&[l]).re * a.get(&[i]).d(l);
                }
                out.set(&[i], acc);
            }
            Ok(out)
        }
        (1, 2) => lie_derivative_multivector(&a.as_vector(), b),
        (2, 1) => Ok(lie_derivative_multivector(&b.as_vector(), a)?.scale(-1.0)),
        (2, 2) => {
            if n < 3 {
                return Ok(AltTensor::zeros(n, 3));
            }
            let mut out = AltTensor::zeros(n, 3);
            for idx in sorted_tuples(n, 3) {
                let (i, j, k) = (idx[0], idx[1], idx[2]);
                let mut acc = S::zero();
                for (p, q, r) in [(i, j, k), (j, k, i), (k, i, j)] {
                    for l in 0..n {
                        acc = acc + a.get(&[l, p]).re * b.get(&[q, r]).d(l);
                        acc = acc + b.get(&[l, p]).re * a.get(&[q, r]).d(l);
                    }
                }
                out.set(&idx, acc);
            }
            Ok(out)
        }
        (p, q) => Err(Error::UnsupportedDegree(p, q)),
    }
}

/// `♯_Λ(α) = Λ(·, α)`, i.e. `(♯α)^i = Σ_j Λ[i][j] α_j`.
pub fn sharp_value<S: Scalar>(lambda: &AltTensor<S>, alpha: &[S]) -> Vec<S> {
    let n = lambda.dim;
    (0..n)
        .map(|i| {
            (0..n).fold(S::zero(), |acc, j| acc + lambda.get(&[i, j]) * alpha[j].clone())
        })
        .collect()
}

/// `Λ(α, β)`.
pub fn pair_bivector<S: Scalar>(lambda: &AltTensor<S>, alpha: &[S], beta: &[S]) -> S {
    let s = sharp_value(lambda, beta);
    alpha
        .iter()
        .zip(s)
        .fold(S::zero(), |acc, (a, v)| acc + a.clone() * v)
}

/// Pairing of a one-form with a vector.
pub fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    a.iter()
        .zip(b)
        .fold(S::zero(), |acc, (x, y)| acc + x.clone() * y.clone())
}

/// Marker for contravariant (multivector) fields.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contravariant;
/// Marker for covariant (differential form) fields.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Covariant;

/// Antisymmetric field with expression components on one chart.
#[derive(Debug, Clone)]
pub struct TensorField<K> {
    pub chart: Arc<Chart>,
    degree: usize,
    components: BTreeMap<Vec<usize>, Expr>,
    _kind: PhantomData<K>,
}

pub type MultivectorField = TensorField<Contravariant>;
pub type FormField = TensorField<Covariant>;

impl<K> TensorField<K> {
    pub fn zero(chart: &Arc<Chart>, degree: usize) -> Result<Self> {
        if degree > chart.dim() {
            return Err(Error::DegreeOverflow {
                degree,
                dim: chart.dim(),
            });
        }
        Ok(TensorField {
            chart: chart.clone(),
            degree,
            components: BTreeMap::new(),
            _kind: PhantomData,
        })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn components(&self) -> &BTreeMap<Vec<usize>, Expr> {
        &self.components
    }

    /// Sets a component given in any index order; unsorted tuples are
    /// reordered with the permutation sign.
    pub fn set(&mut self, idx: &[usize], e: Expr) -> Result<()> {
        if idx.len() != self.degree {
            return Err(Error::IndexOutOfRange(format!(
                "expected {} indices, got {}",
                self.degree,
                idx.len()
            )));
        }
        if let Some(&bad) = idx.iter().find(|&&i| i >= self.chart.dim()) {
            return Err(Error::IndexOutOfRange(format!(
                "index {bad} on a {}-dimensional chart",
                self.chart.dim()
            )));
        }
        let (sorted, sign) = sort_with_sign(idx).ok_or_else(|| {
            Error::AntisymmetryViolation(format!("repeated index in {idx:?}"))
        })?;
        self.chart.check_vars(&e)?;
        let e = if sign < 0.0 { -e } else { e };
        if self.components.insert(sorted.clone(), e).is_some() {
            return Err(Error::AntisymmetryViolation(format!(
                "component {sorted:?} given twice"
            )));
        }
        Ok(())
    }

    pub fn with(mut self, idx: &[usize], e: Expr) -> Result<Self> {
        self.set(idx, e)?;
        Ok(self)
    }

    /// Sets a component addressed by coordinate names.
    pub fn set_named(&mut self, names: &[&str], e: Expr) -> Result<()> {
        let idx = names
            .iter()
            .map(|n| {
                self.chart
                    .index_of(n)
                    .ok_or_else(|| Error::IndexOutOfRange(format!("unknown coordinate `{n}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        self.set(&idx, e)
    }

    pub fn eval<S: Scalar>(&self, x: &[S]) -> Result<AltTensor<S>> {
        let mut out = AltTensor::zeros(self.chart.dim(), self.degree);
        for (idx, e) in &self.components {
            out.set(idx, self.chart.eval(e, x)?);
        }
        Ok(out)
    }

    /// Value with first derivatives over an arbitrary base scalar.
    pub fn eval_jet<S: Scalar>(&self, x: &[S]) -> Result<AltTensor<Dual<S>>> {
        self.eval(&autodiff::seed(x))
    }

    /// Componentwise map of expressions, e.g. pulling back or rescaling.
    pub fn map_exprs(&self, chart: &Arc<Chart>, f: impl Fn(&Expr) -> Expr) -> Result<Self> {
        let mut out = TensorField::zero(chart, self.degree)?;
        for (idx, e) in &self.components {
            out.set(idx, f(e))?;
        }
        Ok(out)
    }

    pub fn scale_by(&self, factor: &Expr) -> Result<Self> {
        self.map_exprs(&self.chart, |e| factor.clone() * e.clone())
    }

    /// Componentwise sum as expressions.
    pub fn add(&self, other: &Self) -> Result<Self> {
        self.chart.ensure_same(&other.chart)?;
        if self.degree != other.degree {
            return Err(Error::InvalidArgument("sum of fields of different degree".into()));
        }
        let mut components = self.components.clone();
        for (idx, e) in &other.components {
            let merged = match components.remove(idx) {
                Some(prev) => prev + e.clone(),
                None => e.clone(),
            };
            components.insert(idx.clone(), merged);
        }
        Ok(TensorField {
            chart: self.chart.clone(),
            degree: self.degree,
            components,
            _kind: PhantomData,
        })
    }
}

impl<K> fmt::Display for TensorField<K> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.components.is_empty() {
            return write!(f, "0");
        }
        let coords = self.chart.coords();
        let parts: Vec<String> = self
            .components
            .iter()
            .map(|(idx, e)| {
                let names: Vec<&str> = idx.iter().map(|&i| coords[i].as_str()).collect();
                format!("[{}] = {e}", names.join(","))
            })
            .collect();
        write!(f, "{}", parts.join("; "))
    }
}

impl MultivectorField {
    /// A vector field from its component expressions in chart order.
    pub fn vector(chart: &Arc<Chart>, comps: Vec<Expr>) -> Result<Self> {
        let mut v = MultivectorField::zero(chart, 1)?;
        for (i, e) in comps.into_iter().enumerate() {
            if !e.is_zero_constant() {
                v.set(&[i], e)?;
            }
        }
        Ok(v)
    }
}

impl FormField {
    pub fn one_form(chart: &Arc<Chart>, comps: Vec<Expr>) -> Result<Self> {
        let mut v = FormField::zero(chart, 1)?;
        for (i, e) in comps.into_iter().enumerate() {
            if !e.is_zero_constant() {
                v.set(&[i], e)?;
            }
        }
        Ok(v)
    }
}

/// Field-level wedge product with expression components (no simplification).
pub fn wedge_fields<K>(a: &TensorField<K>, b: &TensorField<K>) -> Result<TensorField<K>> {
    a.chart.ensure_same(&b.chart)?;
    let dim = a.chart.dim();
    let deg = a.degree + b.degree;
    if deg > dim {
        return Err(Error::DegreeOverflow { degree: deg, dim });
    }
    let mut out = TensorField::zero(&a.chart, deg)?;
    for (ia, ea) in &a.components {
        for (ib, eb) in &b.components {
            let joined: Vec<usize> = ia.iter().chain(ib).copied().collect();
            let Some((sorted, sign)) = sort_with_sign(&joined) else {
                continue;
            };
            let term = ea.clone() * eb.clone();
            let term = if sign < 0.0 { -term } else { term };
            let merged = match out.components.remove(&sorted) {
                Some(prev) => prev + term,
                None => term,
            };
            out.components.insert(sorted, merged);
        }
    }
    Ok(out)
}

/// Exterior derivative of a form field at a point.
pub fn exterior_derivative_at(alpha: &FormField, x: &[f64]) -> Result<AltTensor<f64>> {
    exterior_derivative(&alpha.eval_jet(x)?)
}

/// `ι_X α` for point values.
pub fn interior_product(x: &[f64], alpha: &AltTensor<f64>) -> Result<AltTensor<f64>> {
    interior(x, alpha)
}

/// Lie derivative of a form field along a vector field at a point.
pub fn lie_derivative_of_form(
    x_field: &MultivectorField,
    alpha: &FormField,
    at: &[f64],
) -> Result<AltTensor<f64>> {
    x_field.chart.ensure_same(&alpha.chart)?;
    let xv = x_field.eval_jet(at)?.as_vector();
    lie_derivative_form(&xv, &alpha.eval_jet(at)?)
}

/// Lie derivative of a multivector field along a vector field at a point.
pub fn lie_derivative_of_multivector(
    x_field: &MultivectorField,
    a: &MultivectorField,
    at: &[f64],
) -> Result<AltTensor<f64>> {
    x_field.chart.ensure_same(&a.chart)?;
    let xv = x_field.eval_jet(at)?.as_vector();
    lie_derivative_multivector(&xv, &a.eval_jet(at)?)
}

/// Schouten–Nijenhuis bracket of two multivector fields at a point.
pub fn schouten_nijenhuis(
    a: &MultivectorField,
    b: &MultivectorField,
    at: &[f64],
) -> Result<AltTensor<f64>> {
    a.chart.ensure_same(&b.chart)?;
    if a.degree == 0 || b.degree == 0 || a.degree > 2 || b.degree > 2 {
        return Err(Error::UnsupportedDegree(a.degree, b.degree));
    }
    schouten(&a.eval_jet(at)?, &b.eval_jet(at)?)
}

/// `♯_Λ(α)` for a bivector field and a one-form value at a point.
pub fn sharp(lambda: &MultivectorField, alpha: &[f64], at: &[f64]) -> Result<Vec<f64>> {
    if lambda.degree != 2 {
        return Err(Error::InvalidArgument("sharp needs a bivector".into()));
    }
    if alpha.len() != lambda.chart.dim() {
        return Err(Error::ChartMismatch {
            left: lambda.chart.name.clone(),
            right: format!("{}-component one-form", alpha.len()),
        });
    }
    Ok(sharp_value(&lambda.eval::<f64>(at)?, alpha))
}

/// Point value of a (1,1) tensor such as a recursion operator.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedTensorPointValue {
    pub chart: Arc<Chart>,
    pub point: Vec<f64>,
    /// `matrix[i][j] = N^i_j`.
    pub matrix: Mat<f64>,
}
