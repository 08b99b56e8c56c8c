//! Fixed-step RK4 flows and invariant monitors.

use std::io::{self, Write};
use std::sync::Arc;

use crate::autodiff;
use crate::chart::{Chart, ScalarField};
use crate::error::{Error, Result};
use crate::report::{sig17, CheckRecord, Metric, Status};
use crate::structures::{jacobi_bracket, ContactForm, JacobiStructure, VectorSource};
use crate::tensor::dot;

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub chart: Arc<Chart>,
    pub dt: f64,
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub integrator: &'static str,
}

impl Trajectory {
    pub fn endpoint(&self) -> &[f64] {
        self.states.last().map_or(&[], Vec::as_slice)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let mut header = vec!["t".to_string()];
        header.extend(self.chart.coords().iter().cloned());
        writeln!(w, "{}", header.join(","))?;
        for (t, x) in self.times.iter().zip(&self.states) {
            let mut row = vec![sig17(*t)];
            row.extend(x.iter().map(|v| sig17(*v)));
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

fn axpy(x: &[f64], a: f64, k: &[f64]) -> Vec<f64> {
    x.iter().zip(k).map(|(xi, ki)| xi + a * ki).collect()
}

/// Classical RK4 with `round(t_end / dt)` equal steps ending exactly at
/// `t_end`. Leaving the chart domain stops the integration with the partial
/// trajectory attached to the error.
pub fn integrate<F>(chart: &Arc<Chart>, vf: F, x0: &[f64], t_end: f64, dt: f64) -> Result<Trajectory>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    if !(dt > 0.0) || !(t_end >= 0.0) || !t_end.is_finite() {
        return Err(Error::InvalidArgument(format!("bad time grid: t_end={t_end}, dt={dt}")));
    }
    if x0.len() != chart.dim() {
        return Err(Error::InvalidArgument("initial point has wrong dimension".into()));
    }
    let steps = ((t_end / dt).round() as usize).max(1);
    let h = t_end / steps as f64;
    let mut traj = Trajectory {
        chart: chart.clone(),
        dt: h,
        times: vec![0.0],
        states: vec![x0.to_vec()],
        integrator: "rk4",
    };
    let exit = |traj: &Trajectory, time: f64| Error::DomainExit {
        time,
        trajectory: Box::new(traj.clone()),
    };
    if !chart.admissible(x0) && !chart.constraints().is_empty() {
        return Err(exit(&traj, 0.0));
    }
    let mut x = x0.to_vec();
    for i in 0..steps {
        let t = i as f64 * h;
        let step = || -> Result<Vec<f64>> {
            let k1 = vf(&x)?;
            let k2 = vf(&axpy(&x, h / 2.0, &k1))?;
            let k3 = vf(&axpy(&x, h / 2.0, &k2))?;
            let k4 = vf(&axpy(&x, h, &k3))?;
            Ok((0..x.len())
                .map(|j| x[j] + h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]))
                .collect())
        };
        let next = match step() {
            Ok(v) => v,
            Err(e) if e.is_pointwise() => return Err(exit(&traj, t)),
            Err(e) => return Err(e),
        };
        if next.iter().any(|v| !v.is_finite())
            || (!chart.constraints().is_empty() && !chart.admissible(&next))
        {
            return Err(exit(&traj, t + h));
        }
        x = next;
        traj.times.push(if i + 1 == steps { t_end } else { (i + 1) as f64 * h });
        traj.states.push(x.clone());
    }
    Ok(traj)
}

pub fn integrate_source(src: &VectorSource, x0: &[f64], t_end: f64, dt: f64) -> Result<Trajectory> {
    integrate(src.chart(), |x| src.eval::<f64>(x), x0, t_end, dt)
}

/// Cumulative trapezoid integral of samples on a uniform grid.
pub fn cumulative_trapezoid(values: &[f64], dt: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut acc = 0.0;
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            acc += 0.5 * dt * (values[i - 1] + v);
        }
        out.push(acc);
    }
    out
}

/// Compares `f` along the flow of `X_h` with `f(0)·exp(−∫R(h))`. When `f`
/// is not dissipated the record is labelled as such and only the drift is
/// reported.
pub fn dissipation_monitor(
    traj: &Trajectory,
    eta: &ContactForm,
    h: &ScalarField,
    f: &ScalarField,
    tol: f64,
    bracket_tol: f64,
) -> Result<CheckRecord> {
    let j = JacobiStructure::contact(eta);
    let mut fh_max = 0.0f64;
    for x in &traj.states {
        fh_max = fh_max.max(jacobi_bracket(&j, f, h, x)?.abs());
    }
    let fvals = traj
        .states
        .iter()
        .map(|x| f.eval::<f64>(x))
        .collect::<Result<Vec<_>>>()?;
    let f0 = fvals[0];
    let drift = fvals.iter().map(|v| (v - f0).abs()).fold(0.0, f64::max);
    let name = format!("dissipation[{}]", f.expr);
    if fh_max >= bracket_tol {
        let mut rec = CheckRecord::single(name, drift, tol)
            .with_metric("bracket_with_h", Metric::Real(fh_max))
            .with_metric("drift", Metric::Real(drift))
            .with_note("not dissipated: {f, h} != 0 along the trajectory");
        rec.status = Status::Skipped;
        rec.samples = traj.states.len();
        rec.evaluated = 0;
        rec.passed = 0;
        return Ok(rec);
    }
    let rh = traj
        .states
        .iter()
        .map(|x| {
            let r = eta.reeb_at(x)?;
            Ok(dot(&r, &autodiff::gradient(h, x)?))
        })
        .collect::<Result<Vec<f64>>>()?;
    let integral = cumulative_trapezoid(&rh, traj.dt);
    let mut worst = 0.0f64;
    let mut worst_at = 0;
    for (i, (v, int)) in fvals.iter().zip(&integral).enumerate() {
        let r = (v - f0 * (-int).exp()).abs();
        if r > worst {
            worst = r;
            worst_at = i;
        }
    }
    let mut rec = CheckRecord::single(name, worst, tol)
        .with_metric("bracket_with_h", Metric::Real(fh_max))
        .with_metric("drift", Metric::Real(drift));
    rec.samples = traj.states.len();
    rec.evaluated = traj.states.len();
    rec.worst_point = Some(traj.states[worst_at].clone());
    Ok(rec)
}

/// `max_t |F(x(t)) − F(x(0))|`.
pub fn conservation_monitor(traj: &Trajectory, f: &ScalarField, tol: f64) -> Result<CheckRecord> {
    let vals = traj
        .states
        .iter()
        .map(|x| f.eval::<f64>(x))
        .collect::<Result<Vec<_>>>()?;
    let mut worst = 0.0f64;
    let mut worst_at = 0;
    for (i, v) in vals.iter().enumerate() {
        let r = (v - vals[0]).abs();
        if r > worst {
            worst = r;
            worst_at = i;
        }
    }
    let mut rec = CheckRecord::single(format!("conservation[{}]", f.expr), worst, tol);
    rec.samples = vals.len();
    rec.evaluated = vals.len();
    rec.worst_point = Some(traj.states[worst_at].clone());
    Ok(rec)
}
