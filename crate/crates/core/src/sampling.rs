//! Seeded rejection sampling of chart points.

use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::chart::Chart;
use crate::error::{Error, Result};
use crate::expr::Expr;

#[derive(Debug, Clone, PartialEq)]
pub struct SamplingConfig {
    /// Default box applied to every coordinate.
    pub lo: f64,
    pub hi: f64,
    /// Per-coordinate overrides, by chart index.
    pub boxes: Vec<Option<(f64, f64)>>,
    /// Every constraint must exceed this margin.
    pub margin: f64,
    pub max_attempts: usize,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig {
            lo: -2.0,
            hi: 2.0,
            boxes: Vec::new(),
            margin: 1e-3,
            max_attempts: 1_000_000,
        }
    }
}

impl SamplingConfig {
    fn bounds(&self, i: usize) -> (f64, f64) {
        self.boxes
            .get(i)
            .copied()
            .flatten()
            .unwrap_or((self.lo, self.hi))
    }
}

/// Draws `n` admissible points. Constraints are the chart's plus `extra`.
pub fn sample_points(
    chart: &Chart,
    n: usize,
    seed: u64,
    cfg: &SamplingConfig,
    extra: &[Expr],
) -> Result<Vec<Vec<f64>>> {
    if n == 0 {
        return Err(Error::InvalidArgument("sample count must be positive".into()));
    }
    for e in extra {
        chart.check_vars(e)?;
    }
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let dim = chart.dim();
    let mut out = Vec::with_capacity(n);
    let mut attempts = 0;
    while out.len() < n {
        if attempts >= cfg.max_attempts {
            return Err(Error::RejectionExhausted {
                attempts,
                accepted: out.len(),
                wanted: n,
            });
        }
        attempts += 1;
        let x: Vec<f64> = (0..dim)
            .map(|i| {
                let (lo, hi) = cfg.bounds(i);
                rng.random_range(lo..hi)
            })
            .collect();
        let ok = chart.constraint_margin(&x) >= cfg.margin
            && extra
                .iter()
                .all(|e| chart.eval::<f64>(e, &x).is_ok_and(|v| v >= cfg.margin));
        if ok {
            out.push(x);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    #[test]
    fn deterministic_and_respects_margin() {
        let c = Chart::with_constraints("c", &["q", "r"], vec![parse("r").unwrap()]).unwrap();
        let cfg = SamplingConfig::default();
        let a = sample_points(&c, 50, 42, &cfg, &[]).unwrap();
        let b = sample_points(&c, 50, 42, &cfg, &[]).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|p| p[1] >= 1e-3 && p[1] < 2.0));
        assert_ne!(a, sample_points(&c, 50, 43, &cfg, &[]).unwrap());
    }

    #[test]
    fn contradictory_constraints_exhaust() {
        let c = Chart::with_constraints(
            "c",
            &["x"],
            vec![parse("x").unwrap(), parse("-x").unwrap()],
        )
        .unwrap();
        let cfg = SamplingConfig {
            max_attempts: 10_000,
            ..SamplingConfig::default()
        };
        assert!(matches!(
            sample_points(&c, 3, 1, &cfg, &[]),
            Err(Error::RejectionExhausted { accepted: 0, .. })
        ));
    }
}
