//! The cap-integral decision functional ∫ Λ(θ,δ)^q dδ/δ, its divergence
//! classifier, the L^q lower-bound functional and the weights ω_k.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::body::{unit, ConvexBoundary, Vec2};
use crate::error::{Error, Result};
use crate::quad::fit_line;

/// Grid density in u = ln(1/δ), points per decade of δ.
pub const POINTS_PER_DECADE: usize = 64;

/// Tail exponents closer to the divergence boundary than this are
/// inconclusive.
pub const KAPPA_MARGIN: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Finite,
    Divergent,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Finite => "finite",
            Verdict::Divergent => "divergent",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

/// One direction's integral over [δ_min, δ₀].
#[derive(Debug, Clone, PartialEq)]
pub struct CapIntegral {
    pub value: f64,
    /// κ = 1 - p over the last two decades, where the integrand in u decays
    /// like u^{-p}; κ > 0 means the tail integral diverges. -∞ when the
    /// integrand decays faster than any power or the range is empty.
    pub slope: f64,
    /// κ for each of the last two decades separately (older first).
    pub decade_slopes: [f64; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriterionReport {
    pub q: f64,
    pub delta0: f64,
    pub delta_min: f64,
    pub theta_grid: Vec<Vec2>,
    pub integrals: Vec<f64>,
    pub divergence_slope: Vec<f64>,
    pub verdict: Verdict,
}

impl CriterionReport {
    pub fn sup(&self) -> f64 {
        self.integrals.iter().copied().fold(0.0, f64::max)
    }

    /// (sup_θ ∫ Λ^q dδ/δ)^{1/q}.
    pub fn functional(&self) -> f64 {
        self.sup().powf(1.0 / self.q)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriterionOptions {
    pub q: f64,
    /// Computed from the body when absent.
    pub delta0: Option<f64>,
    pub delta_min: f64,
    /// Directions in [0, π); Λ is even in θ.
    pub theta_grid: usize,
}

impl Default for CriterionOptions {
    fn default() -> Self {
        CriterionOptions {
            q: 2.0,
            delta0: None,
            delta_min: 1e-12,
            theta_grid: 720,
        }
    }
}

/// ∫_{δ_min}^{δ₀} Λ(θ,δ)^q dδ/δ by the trapezoid rule in u = ln(1/δ).
pub fn cap_integral(body: &ConvexBoundary, theta: Vec2, q: f64, delta0: f64, delta_min: f64) -> Result<CapIntegral> {
    if !(q >= 1.0) {
        return Err(Error::Precondition(format!("q must be at least 1, got {q}")));
    }
    if !(delta_min > 0.0 && delta0 > 0.0) {
        return Err(Error::Precondition("delta bounds must be positive".into()));
    }
    if delta_min >= delta0 {
        return Ok(CapIntegral {
            value: 0.0,
            slope: f64::NEG_INFINITY,
            decade_slopes: [f64::NEG_INFINITY; 2],
        });
    }
    let (u0, u1) = ((1.0 / delta0).ln(), (1.0 / delta_min).ln());
    let decades = (u1 - u0) / std::f64::consts::LN_10;
    let count = ((decades * POINTS_PER_DECADE as f64).ceil() as usize).max(2) + 1;
    let us: Vec<f64> = (0..count)
        .map(|i| u0 + (u1 - u0) * i as f64 / (count - 1) as f64)
        .collect();
    let deltas: Vec<f64> = us.iter().map(|u| (-u).exp()).collect();
    let lam = body.lambda_many(theta, &deltas)?;
    let f: Vec<f64> = lam.iter().map(|l| l.powf(q)).collect();
    let mut value = 0.0;
    for i in 1..count {
        value += 0.5 * (f[i] + f[i - 1]) * (us[i] - us[i - 1]);
    }
    let tail = |from: f64, to: f64| -> f64 {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for (u, v) in us.iter().zip(&f) {
            if *u >= from - 1e-12 && *u <= to + 1e-12 && *v > 0.0 {
                x.push(u.ln());
                y.push(v.ln());
            }
        }
        if x.len() < 3 || y.iter().any(|v| !v.is_finite()) {
            return f64::NEG_INFINITY;
        }
        1.0 + fit_line(&x, &y).0
    };
    let ln10 = std::f64::consts::LN_10;
    let start = (u1 - 2.0 * ln10).max(u0);
    let mid = (u1 - ln10).max(u0);
    Ok(CapIntegral {
        value,
        slope: tail(start, u1),
        decade_slopes: [tail(start, mid), tail(mid, u1)],
    })
}

fn classify(decades: &[[f64; 2]]) -> Verdict {
    if decades.iter().all(|d| d[0] < -KAPPA_MARGIN && d[1] < -KAPPA_MARGIN) {
        Verdict::Finite
    } else if decades.iter().any(|d| d[0] > KAPPA_MARGIN && d[1] > KAPPA_MARGIN) {
        Verdict::Divergent
    } else {
        Verdict::Inconclusive
    }
}

/// Evaluates the cap integral over a θ grid in [0, π), refined around the
/// direction with the largest integral, and classifies the result.
pub fn decide(body: &ConvexBoundary, opts: &CriterionOptions) -> Result<CriterionReport> {
    let delta0 = match opts.delta0 {
        Some(d) => d,
        None => body.delta0(720)?,
    };
    let count = opts.theta_grid.max(1);
    let mut angles: Vec<f64> = (0..count).map(|i| PI * i as f64 / count as f64).collect();
    let run = |angles: &[f64]| -> Result<Vec<CapIntegral>> {
        angles
            .par_iter()
            .map(|&a| cap_integral(body, unit(a), opts.q, delta0, opts.delta_min))
            .collect()
    };
    let mut results = run(&angles)?;
    let best = results
        .iter()
        .enumerate()
        .fold(0, |b, (i, r)| if r.value > results[b].value { i } else { b });
    let step = PI / count as f64;
    let extra: Vec<f64> = (1..=6)
        .flat_map(|j| {
            let d = step / 2f64.powi(j);
            [angles[best] - d, angles[best] + d]
        })
        .collect();
    results.extend(run(&extra)?);
    angles.extend(extra);
    let decades: Vec<[f64; 2]> = results.iter().map(|r| r.decade_slopes).collect();
    Ok(CriterionReport {
        q: opts.q,
        delta0,
        delta_min: opts.delta_min,
        theta_grid: angles.iter().map(|&a| unit(a)).collect(),
        integrals: results.iter().map(|r| r.value).collect(),
        divergence_slope: results.iter().map(|r| r.slope).collect(),
        verdict: classify(&decades),
    })
}

/// The L² decision for a body (q = 2, default grids).
pub fn l2_decision(body: &ConvexBoundary) -> Result<CriterionReport> {
    decide(body, &CriterionOptions::default())
}

/// sup_θ (∫_0^{δ₀} Λ(θ,δ)^q dδ/δ)^{1/q}.
pub fn lq_functional(body: &ConvexBoundary, q: f64) -> Result<f64> {
    Ok(decide(
        body,
        &CriterionOptions {
            q,
            ..CriterionOptions::default()
        },
    )?
    .functional())
}

/// ω_k = 1 / sup_θ Λ(θ, 2^{-k}) over `theta_grid` directions in [0, π),
/// refined by golden-section search around the best grid direction.
pub fn omega_weight(body: &ConvexBoundary, k: i32, delta0: f64, theta_grid: usize) -> Result<f64> {
    let delta = 2f64.powi(-k);
    if !(delta < delta0) {
        return Err(Error::Range {
            value: delta,
            lo: 0.0,
            hi: delta0,
        });
    }
    let count = theta_grid.max(4);
    let lam = |a: f64| body.lambda(unit(a), delta);
    let vals = (0..count)
        .map(|i| lam(PI * i as f64 / count as f64))
        .collect::<Result<Vec<_>>>()?;
    let (i, mut best) = vals
        .iter()
        .enumerate()
        .fold((0, 0.0), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
    let step = PI / count as f64;
    let (mut lo, mut hi) = (PI * i as f64 / count as f64 - step, PI * i as f64 / count as f64 + step);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (lam(x1)?, lam(x2)?);
    for _ in 0..40 {
        if f1 > f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = lam(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = lam(x2)?;
        }
    }
    best = best.max(f1).max(f2);
    Ok(1.0 / best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn circle_integrand_limit() {
        let c = ConvexBoundary::circle(1.0).unwrap();
        let d = 1e-8;
        let l = c.lambda([1.0, 0.0], d).unwrap();
        assert_relative_eq!(l * l / d, 8.0, max_relative = 1e-6);
        let r = cap_integral(&c, [0.0, 1.0], 2.0, 0.5, 1e-12).unwrap();
        assert!(r.value.is_finite() && r.slope < -1.0);
    }

    #[test]
    fn empty_range_is_zero() {
        let c = ConvexBoundary::circle(1.0).unwrap();
        let r = cap_integral(&c, [0.0, 1.0], 2.0, 0.5, 0.5).unwrap();
        assert_eq!(r.value, 0.0);
        assert_eq!(r.slope, f64::NEG_INFINITY);
    }

    #[test]
    fn circle_omega_weight() {
        let c = ConvexBoundary::circle(1.0).unwrap();
        for k in [4, 10, 20] {
            let w = omega_weight(&c, k, 1.0, 90).unwrap();
            let want = 1.0 / (2.0 * (1.0 - 2f64.powi(-k)).acos());
            assert_relative_eq!(w, want, max_relative = 1e-10);
        }
        assert!(omega_weight(&c, 0, 1.0, 90).is_err());
    }

    #[test]
    fn classifier_rules() {
        assert_eq!(classify(&[[-0.5, -0.3], [-0.02, -0.02]]), Verdict::Finite);
        assert_eq!(classify(&[[-0.5, -0.3], [0.05, 0.03]]), Verdict::Divergent);
        assert_eq!(classify(&[[-0.5, -0.3], [0.05, 0.0]]), Verdict::Inconclusive);
    }
}
