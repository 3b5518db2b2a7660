//! Convex graph curves flat at the origin, the calculus built on them
//! (h, inverses, weights, the limit b) and the dyadic partition.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::{fit_line, solve_increasing};

const ROOT_TOL: f64 = 1e-15;

/// A closed-form family, or tabulated samples. Evaluation here performs no
/// domain check; use [`GraphCurve`] for the validated object.
#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    Power { m: f64 },
    ExpFlat { a: f64 },
    IterExpFlat { n: u32, c: f64, lambda: f64 },
    Tabulated(Spline),
}

/// Cubic spline through (t_i, γ_i), clamped to slope zero at t = 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Spline {
    t: Vec<f64>,
    y: Vec<f64>,
    m: Vec<f64>,
}

impl Spline {
    pub fn new(t: &[f64], y: &[f64]) -> Result<Self> {
        let n = t.len();
        if n < 4 || y.len() != n {
            return Err(Error::InvalidCurve(
                "tabulated curves need at least four (t, gamma) samples".into(),
            ));
        }
        if t[0] != 0.0 || y[0] != 0.0 {
            return Err(Error::InvalidCurve("tabulated curves must start at (0, 0)".into()));
        }
        for i in 1..n {
            if !(t[i] > t[i - 1]) || !(y[i] > y[i - 1]) {
                return Err(Error::InvalidCurve(
                    "tabulated samples must be strictly increasing in t and gamma".into(),
                ));
            }
        }
        let h: Vec<f64> = (0..n - 1).map(|i| t[i + 1] - t[i]).collect();
        // right slope from the cubic through the last four samples
        let (x0, x1, x2, x3) = (t[n - 4], t[n - 3], t[n - 2], t[n - 1]);
        let f01 = (y[n - 3] - y[n - 4]) / (x1 - x0);
        let f12 = (y[n - 2] - y[n - 3]) / (x2 - x1);
        let f23 = (y[n - 1] - y[n - 2]) / (x3 - x2);
        let f012 = (f12 - f01) / (x2 - x0);
        let f123 = (f23 - f12) / (x3 - x1);
        let f0123 = (f123 - f012) / (x3 - x0);
        let slope_end = f01
            + f012 * ((x3 - x0) + (x3 - x1))
            + f0123 * ((x3 - x1) * (x3 - x2) + (x3 - x0) * (x3 - x2) + (x3 - x0) * (x3 - x1));

        let mut sub = vec![0.0; n];
        let mut diag = vec![0.0; n];
        let mut sup = vec![0.0; n];
        let mut rhs = vec![0.0; n];
        diag[0] = 2.0 * h[0];
        sup[0] = h[0];
        rhs[0] = 6.0 * ((y[1] - y[0]) / h[0]);
        for i in 1..n - 1 {
            sub[i] = h[i - 1];
            diag[i] = 2.0 * (h[i - 1] + h[i]);
            sup[i] = h[i];
            rhs[i] = 6.0 * ((y[i + 1] - y[i]) / h[i] - (y[i] - y[i - 1]) / h[i - 1]);
        }
        sub[n - 1] = h[n - 2];
        diag[n - 1] = 2.0 * h[n - 2];
        rhs[n - 1] = 6.0 * (slope_end - (y[n - 1] - y[n - 2]) / h[n - 2]);
        // Thomas algorithm
        for i in 1..n {
            let w = sub[i] / diag[i - 1];
            diag[i] -= w * sup[i - 1];
            rhs[i] -= w * rhs[i - 1];
        }
        let mut m = vec![0.0; n];
        m[n - 1] = rhs[n - 1] / diag[n - 1];
        for i in (0..n - 1).rev() {
            m[i] = (rhs[i] - sup[i] * m[i + 1]) / diag[i];
        }
        let scale = m.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        if m[0] < -1e-10 * scale {
            return Err(Error::InvalidCurve(format!(
                "interpolated second derivative at 0 is negative ({:e}); refine the samples near 0",
                m[0]
            )));
        }
        for i in 1..n {
            if !(m[i] > m[i - 1]) {
                return Err(Error::InvalidCurve(format!(
                    "interpolated second derivative is not strictly increasing near t = {}",
                    t[i]
                )));
            }
        }
        Ok(Spline {
            t: t.to_vec(),
            y: y.to_vec(),
            m,
        })
    }

    pub fn knots(&self) -> (&[f64], &[f64]) {
        (&self.t, &self.y)
    }

    fn end(&self) -> f64 {
        *self.t.last().unwrap()
    }

    fn eval(&self, x: f64, order: usize) -> f64 {
        let n = self.t.len();
        let i = match self.t.partition_point(|&v| v <= x) {
            0 => 0,
            p if p >= n => n - 2,
            p => p - 1,
        };
        let (ta, tb) = (self.t[i], self.t[i + 1]);
        let h = tb - ta;
        let (ma, mb) = (self.m[i], self.m[i + 1]);
        let (ya, yb) = (self.y[i], self.y[i + 1]);
        let (l, r) = (tb - x, x - ta);
        let ca = ya / h - ma * h / 6.0;
        let cb = yb / h - mb * h / 6.0;
        match order {
            0 => ma * l * l * l / (6.0 * h) + mb * r * r * r / (6.0 * h) + ca * l + cb * r,
            1 => -ma * l * l / (2.0 * h) + mb * r * r / (2.0 * h) - ca + cb,
            _ => (ma * l + mb * r) / h,
        }
    }
}

// Iterated-exponential jet in overflow-safe form: φ_n, ln|φ_n'| and the
// normalized ratios u = φ''/φ'^2, v = φ'''/φ'^3.
struct IterJet {
    phi: f64,
    ln_p: f64,
    u: f64,
    v: f64,
}

fn iter_jet(n: u32, c: f64, lambda: f64, t: f64) -> IterJet {
    let lt = t.ln();
    let mut phi = c * t.powf(-lambda);
    let mut ln_p = (lambda * c).ln() - (lambda + 1.0) * lt;
    let mut u = (lambda + 1.0) / (lambda * c) * t.powf(lambda);
    let mut v = (lambda + 1.0) * (lambda + 2.0) / (lambda * lambda * c * c) * t.powf(2.0 * lambda);
    for _ in 0..n {
        let e = (-phi).exp();
        ln_p += phi;
        let (u0, v0) = (u, v);
        u = (1.0 + u0) * e;
        v = (1.0 + 3.0 * u0 + v0) * e * e;
        phi = phi.exp();
    }
    IterJet { phi, ln_p, u, v }
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Power { .. } => "power",
            Family::ExpFlat { .. } => "expflat",
            Family::IterExpFlat { .. } => "iterexp",
            Family::Tabulated(_) => "tabulated",
        }
    }

    pub fn is_analytic(&self) -> bool {
        !matches!(self, Family::Tabulated(_))
    }

    fn check_params(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidCurve(msg));
        match *self {
            Family::Power { m } if !(m > 2.0 && m.is_finite()) => {
                bad(format!("power exponent must exceed 2, got {m}"))
            }
            Family::ExpFlat { a } if !(a > 0.0 && a.is_finite()) => {
                bad(format!("flat exponent must be positive, got {a}"))
            }
            Family::IterExpFlat { n, c, lambda }
                if n == 0 || !(c > 0.0 && c.is_finite()) || !(lambda > 0.0 && lambda.is_finite()) =>
            {
                bad(format!("iterated exponential needs n >= 1, C > 0, lambda > 0 (got {n}, {c}, {lambda})"))
            }
            _ => Ok(()),
        }
    }

    /// Closed-form derivative of order 0..=3 at t >= 0 (spline value for
    /// tabulated data, orders 0..=2 only). No domain check is made.
    pub fn derivative(&self, t: f64, order: usize) -> Result<f64> {
        if order > 3 {
            return Err(Error::UnsupportedOrder {
                order,
                family: self.name(),
            });
        }
        match *self {
            Family::Power { m } => {
                let coef = match order {
                    0 => 1.0,
                    1 => m,
                    2 => m * (m - 1.0),
                    _ => m * (m - 1.0) * (m - 2.0),
                };
                let e = m - order as f64;
                if t == 0.0 {
                    return Ok(if e > 0.0 {
                        0.0
                    } else if e == 0.0 {
                        coef
                    } else {
                        f64::INFINITY
                    });
                }
                Ok(coef * t.powf(e))
            }
            Family::ExpFlat { a } => {
                if t == 0.0 {
                    return Ok(0.0);
                }
                let x = t.powf(a);
                let e = (-1.0 / x).exp();
                if e == 0.0 {
                    return Ok(0.0);
                }
                let f = match order {
                    0 => 1.0,
                    1 => a / (t * x),
                    2 => a / (t * t * x * x) * (a - (a + 1.0) * x),
                    _ => a / (t * t * t * x * x * x) * exp_flat_q(a, x),
                };
                Ok(f * e)
            }
            Family::IterExpFlat { .. } => {
                if t == 0.0 {
                    return Ok(0.0);
                }
                let (sign, ln) = self.ln_derivative_any(t, order);
                Ok(sign * ln.exp())
            }
            Family::Tabulated(ref s) => {
                if order == 3 {
                    return Err(Error::UnsupportedOrder {
                        order,
                        family: "tabulated",
                    });
                }
                Ok(s.eval(t, order))
            }
        }
    }

    // (sign, ln|γ^(order)|) for t > 0.
    fn ln_derivative_any(&self, t: f64, order: usize) -> (f64, f64) {
        match *self {
            Family::Power { m } => {
                let coef: f64 = match order {
                    0 => 1.0,
                    1 => m,
                    2 => m * (m - 1.0),
                    _ => m * (m - 1.0) * (m - 2.0),
                };
                (1.0, coef.ln() + (m - order as f64) * t.ln())
            }
            Family::ExpFlat { a } => {
                let x = t.powf(a);
                let (lt, lx) = (t.ln(), x.ln());
                let base = -1.0 / x + a.ln();
                match order {
                    0 => (1.0, -1.0 / x),
                    1 => (1.0, base - lt - lx),
                    2 => {
                        let f = a - (a + 1.0) * x;
                        (f.signum(), base - 2.0 * lt - 2.0 * lx + f.abs().ln())
                    }
                    _ => {
                        let q = exp_flat_q(a, x);
                        (q.signum(), base - 3.0 * lt - 3.0 * lx + q.abs().ln())
                    }
                }
            }
            Family::IterExpFlat { n, c, lambda } => {
                let j = iter_jet(n, c, lambda, t);
                if !j.phi.is_finite() {
                    return (1.0, f64::NEG_INFINITY);
                }
                match order {
                    0 => (1.0, -j.phi),
                    1 => (1.0, -j.phi + j.ln_p),
                    2 => {
                        let f = 1.0 - j.u;
                        (f.signum(), -j.phi + 2.0 * j.ln_p + f.abs().ln())
                    }
                    _ => {
                        let f = 1.0 - 3.0 * j.u + j.v;
                        (f.signum(), -j.phi + 3.0 * j.ln_p + f.abs().ln())
                    }
                }
            }
            Family::Tabulated(ref s) => {
                let v = s.eval(t, order.min(2));
                (v.signum(), v.abs().ln())
            }
        }
    }

    /// ln γ^(order)(t) for orders 0..=2 where the derivative is positive.
    pub(crate) fn ln_derivative(&self, t: f64, order: usize) -> f64 {
        if t <= 0.0 {
            return f64::NEG_INFINITY;
        }
        let (s, l) = self.ln_derivative_any(t, order);
        if s > 0.0 {
            l
        } else {
            f64::NAN
        }
    }

    /// γ^(order+1)/γ^(order), the derivative of ln γ^(order).
    pub(crate) fn dlog(&self, t: f64, order: usize) -> f64 {
        match *self {
            Family::Power { m } => (m - order as f64) / t,
            Family::ExpFlat { a } => {
                let x = t.powf(a);
                match order {
                    0 => a / (t * x),
                    1 => (a - (a + 1.0) * x) / (t * x),
                    _ => exp_flat_q(a, x) / (t * x * (a - (a + 1.0) * x)),
                }
            }
            Family::IterExpFlat { n, c, lambda } => {
                let j = iter_jet(n, c, lambda, t);
                let p = j.ln_p.exp();
                match order {
                    0 => p,
                    1 => p * (1.0 - j.u),
                    _ => p * (1.0 - 3.0 * j.u + j.v) / (1.0 - j.u),
                }
            }
            Family::Tabulated(ref s) => s.eval(t, order + 1) / s.eval(t, order),
        }
    }

    /// γ''(t)/(t γ'''(t)) in a cancellation-free form.
    pub(crate) fn b_ratio(&self, t: f64) -> Result<f64> {
        match *self {
            Family::Power { m } => Ok(1.0 / (m - 2.0)),
            Family::ExpFlat { a } => {
                let x = t.powf(a);
                Ok(x * (a - (a + 1.0) * x) / exp_flat_q(a, x))
            }
            Family::IterExpFlat { n, c, lambda } => {
                let j = iter_jet(n, c, lambda, t);
                let denom_ln = t.ln() + j.ln_p;
                Ok((1.0 - j.u) / (1.0 - 3.0 * j.u + j.v) * (-denom_ln).exp())
            }
            Family::Tabulated(_) => Err(Error::UnsupportedOrder {
                order: 3,
                family: "tabulated",
            }),
        }
    }

    /// Limit of γ''/(tγ''') at 0 when known in closed form.
    pub fn b_exact(&self) -> Option<f64> {
        match *self {
            Family::Power { m } => Some(1.0 / (m - 2.0)),
            Family::ExpFlat { .. } | Family::IterExpFlat { .. } => Some(0.0),
            Family::Tabulated(_) => None,
        }
    }

    /// First zeros of γ'' and γ''' on (0, 1], if any.
    pub fn convexity_limits(&self) -> (Option<f64>, Option<f64>) {
        match *self {
            Family::Power { .. } => (None, None),
            Family::ExpFlat { a } => {
                let z2 = (a / (a + 1.0)).powf(1.0 / a);
                let a1 = a + 1.0;
                let disc = 9.0 * a * a * a1 * a1 - 4.0 * a * a * a1 * (a + 2.0);
                let x3 = (3.0 * a * a1 - disc.sqrt()) / (2.0 * a1 * (a + 2.0));
                // nudged inward so the sign test at T is not decided by rounding
                let z3 = x3.powf(1.0 / a) * (1.0 - 1e-12);
                (Some(z2).filter(|z| *z <= 1.0), Some(z3).filter(|z| *z <= 1.0))
            }
            Family::IterExpFlat { .. } => {
                let f2 = |t: f64| self.ln_derivative_any(t, 2).0;
                let f3 = |t: f64| self.ln_derivative_any(t, 3).0;
                (first_sign_change(&f2), first_sign_change(&f3))
            }
            Family::Tabulated(_) => (None, None),
        }
    }
}

fn exp_flat_q(a: f64, x: f64) -> f64 {
    a * a - 3.0 * a * (a + 1.0) * x + (a + 1.0) * (a + 2.0) * x * x
}

// First t in (0, 1] where sign(t) turns nonpositive; lower end of the
// final bracket so that the sign is still positive there.
fn first_sign_change(sign: &dyn Fn(f64) -> f64) -> Option<f64> {
    let steps = 4000;
    let mut prev = None;
    for i in 1..=steps {
        let t = i as f64 / steps as f64;
        let s = sign(t);
        if s.is_nan() {
            continue;
        }
        if s <= 0.0 {
            let mut lo = prev?;
            let mut hi = t;
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if sign(mid) > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            return Some(lo);
        }
        prev = Some(t);
    }
    None
}

/// A validated convex graph curve on [0, T].
#[derive(Debug, Clone, PartialEq)]
pub struct GraphCurve {
    family: Family,
    t_end: f64,
}

/// The dyadic partition for one frequency scale k.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionTable {
    pub k: i32,
    pub t0: f64,
    pub rho: Vec<f64>,
    pub t: Vec<f64>,
    pub nk: usize,
    pub b: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TauSample {
    pub s: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WktknScan {
    pub max: f64,
    /// (k, max over n) for every scanned k.
    pub trace: Vec<(i32, f64)>,
    /// Least-squares slope of log2(trace) against k.
    pub slope: f64,
    /// The same slope over the upper half of the k range.
    pub tail_slope: f64,
}

impl GraphCurve {
    pub fn new(family: Family, domain_end: Option<f64>) -> Result<Self> {
        family.check_params()?;
        let t_end = match domain_end {
            Some(t) => t,
            None => default_domain_end(&family),
        };
        if let Family::Tabulated(ref s) = family {
            if domain_end.is_some_and(|t| t > s.end()) {
                return Err(Error::InvalidCurve(format!(
                    "domain end {t_end} beyond the last sample {}",
                    s.end()
                )));
            }
        }
        if !(t_end > 0.0 && t_end <= 1.0) {
            return Err(Error::InvalidCurve(format!("domain end must lie in (0, 1], got {t_end}")));
        }
        let curve = GraphCurve { family, t_end };
        curve.validate()?;
        Ok(curve)
    }

    pub fn power(m: f64) -> Result<Self> {
        Self::new(Family::Power { m }, None)
    }

    pub fn exp_flat(a: f64) -> Result<Self> {
        Self::new(Family::ExpFlat { a }, None)
    }

    pub fn iter_exp_flat(n: u32, c: f64, lambda: f64) -> Result<Self> {
        Self::new(Family::IterExpFlat { n, c, lambda }, None)
    }

    pub fn tabulated(t: &[f64], gamma: &[f64]) -> Result<Self> {
        Self::new(Family::Tabulated(Spline::new(t, gamma)?), None)
    }

    pub fn with_domain_end(&self, t_end: f64) -> Result<Self> {
        Self::new(self.family.clone(), Some(t_end))
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn domain_end(&self) -> f64 {
        self.t_end
    }

    fn validate(&self) -> Result<()> {
        let f = &self.family;
        let t_end = self.t_end;
        let samples = 600;
        for i in 0..=samples {
            // log-spaced over nine decades, then uniform
            let t = if i <= samples / 2 {
                t_end * 10f64.powf(-9.0 * (1.0 - i as f64 / (samples / 2) as f64))
            } else {
                t_end * (i - samples / 2) as f64 / (samples / 2) as f64
            };
            if t <= 0.0 {
                continue;
            }
            let (s2, l2) = f.ln_derivative_any(t, 2);
            if l2.is_finite() && s2 < 0.0 {
                return Err(Error::InvalidCurve(format!("gamma'' < 0 at t = {t}")));
            }
            if f.is_analytic() {
                let (s3, l3) = f.ln_derivative_any(t, 3);
                if l3.is_finite() && s3 < 0.0 {
                    return Err(Error::InvalidCurve(format!("gamma''' < 0 at t = {t}")));
                }
            }
        }
        if !f.is_analytic() {
            // monotone second derivative is checked on the knots
            return Ok(());
        }
        let g2 = |t: f64| f.derivative(t, 2).unwrap_or(f64::NAN);
        let mut prev = 0.0;
        for i in 1..=samples {
            let t = t_end * i as f64 / samples as f64;
            let v = g2(t);
            if v < prev {
                return Err(Error::InvalidCurve(format!(
                    "gamma'' is not increasing near t = {t}"
                )));
            }
            prev = v;
        }
        Ok(())
    }

    fn check_t(&self, t: f64) -> Result<()> {
        if !(t >= 0.0 && t <= self.t_end) {
            return Err(Error::Domain {
                value: t,
                lo: 0.0,
                hi: self.t_end,
            });
        }
        Ok(())
    }

    /// γ^(order)(t) for t in [0, T].
    pub fn eval(&self, t: f64, order: usize) -> Result<f64> {
        self.check_t(t)?;
        self.family.derivative(t, order)
    }

    fn g(&self, t: f64, order: usize) -> f64 {
        self.family.derivative(t, order).unwrap_or(f64::NAN)
    }

    // Inverse of an increasing quantity given in log form.
    fn invert_ln(
        &self,
        s: f64,
        top: f64,
        ln_f: &dyn Fn(f64) -> f64,
        dln_f: &dyn Fn(f64) -> f64,
    ) -> Result<f64> {
        if !(s >= 0.0) || s > top * (1.0 + 4.0 * f64::EPSILON) {
            return Err(Error::range(s, 0.0, top));
        }
        if s == 0.0 {
            return Ok(0.0);
        }
        if s >= top {
            return Ok(self.t_end);
        }
        Ok(invert_ln(s.ln(), self.t_end, ln_f, dln_f))
    }

    /// The unique t with γ(t) = s.
    pub fn gamma_inverse(&self, s: f64) -> Result<f64> {
        let top = self.g(self.t_end, 0);
        let fam = &self.family;
        self.invert_ln(s, top, &|t| fam.ln_derivative(t, 0), &|t| fam.dlog(t, 0))
    }

    /// The unique t with γ''(t) = s.
    pub fn gamma2_inverse(&self, s: f64) -> Result<f64> {
        let top = self.g(self.t_end, 2);
        let fam = &self.family;
        self.invert_ln(s, top, &|t| fam.ln_derivative(t, 2), &|t| fam.dlog(t, 2))
    }

    /// h(t) = t^2 γ''(t).
    pub fn h_eval(&self, t: f64) -> Result<f64> {
        self.check_t(t)?;
        if t == 0.0 {
            return Ok(0.0);
        }
        Ok(t * t * self.g(t, 2))
    }

    pub fn h_inverse(&self, s: f64) -> Result<f64> {
        let top = self.h_eval(self.t_end)?;
        let fam = &self.family;
        self.invert_ln(
            s,
            top,
            &|t| 2.0 * t.ln() + fam.ln_derivative(t, 2),
            &|t| 2.0 / t + fam.dlog(t, 2),
        )
    }

    /// w_k = 1/γ^{-1}(2^{-k}).
    pub fn weight(&self, k: i32) -> Result<f64> {
        let s = (-k as f64).exp2();
        let top = self.g(self.t_end, 0);
        if s > top {
            return Err(Error::range(s, 0.0, top));
        }
        Ok(1.0 / self.gamma_inverse(s)?)
    }

    /// Smallest k with 2^{-k} <= γ''(T)/4 and 2^{-k} <= γ(T); every k above
    /// it has a partition and a weight.
    pub fn k_circ(&self) -> i32 {
        let a = -(self.g(self.t_end, 2) / 4.0).log2();
        let b = -self.g(self.t_end, 0).log2();
        a.max(b).ceil() as i32
    }

    fn b_value(&self) -> Result<f64> {
        match self.family.b_exact() {
            Some(b) => Ok(b),
            None => self.b_estimate(),
        }
    }

    /// τ_b(s) = s/(γ'''(t) t) - b with t = γ''^{-1}(s).
    pub fn tau_b(&self, s: f64) -> Result<TauSample> {
        if !self.family.is_analytic() {
            return Err(Error::UnsupportedOrder {
                order: 3,
                family: "tabulated",
            });
        }
        let top = self.g(self.t_end, 2);
        if !(s > 0.0 && s <= top * (1.0 + 4.0 * f64::EPSILON)) {
            return Err(Error::range(s, 0.0, top));
        }
        let t = self.gamma2_inverse(s)?;
        let b = self.b_value()?;
        Ok(TauSample {
            s,
            value: self.family.b_ratio(t)? - b,
        })
    }

    /// The limit of γ''(t)/(tγ'''(t)) as t -> 0, sampled at t = T 2^{-j}.
    pub fn b_estimate(&self) -> Result<f64> {
        let mut prev: Option<f64> = None;
        let mut small = 0;
        for j in 1..=200 {
            let t = self.t_end * (-(j as f64)).exp2();
            let r = self.family.b_ratio(t)?;
            if !r.is_finite() {
                break;
            }
            if let Some(p) = prev {
                if (r - p).abs() < 1e-8 {
                    small += 1;
                    if small >= 3 {
                        return Ok(r);
                    }
                } else {
                    small = 0;
                }
            }
            prev = Some(r);
        }
        Err(Error::Estimation(
            "gamma''/(t gamma''') did not settle within 200 dyadic samples".into(),
        ))
    }

    /// Largest s such that |τ_b| < tol at every sampled argument below s.
    pub fn tau_threshold(&self, tol: f64) -> Result<f64> {
        let b = self.b_value()?;
        let mut best = None;
        for j in (0..=240).rev() {
            let t = self.t_end * (-(j as f64) / 4.0).exp2();
            let tau = self.family.b_ratio(t)? - b;
            if !tau.is_finite() {
                continue;
            }
            if tau.abs() < tol {
                best = Some(self.g(t, 2));
            } else {
                break;
            }
        }
        best.ok_or_else(|| Error::Estimation(format!("no range where |tau_b| < {tol}")))
    }

    pub fn partition(&self, k: i32) -> Result<PartitionTable> {
        let kc = self.k_circ();
        if k <= kc {
            return Err(Error::Precondition(format!(
                "partition needs k > {kc}, got {k}"
            )));
        }
        let t0 = self.h_inverse((-k as f64).exp2())?;
        let rho0 = self.g(t0, 2);
        let top = self.g(self.t_end, 2);
        let mut nu_max: Option<i32> = None;
        let mut nu = 0;
        while rho0 * (nu as f64).exp2() <= 0.5 * top {
            nu_max = Some(nu);
            nu += 1;
        }
        let nk = (1 + nu_max.unwrap_or(0)) as usize;
        let rho: Vec<f64> = (0..=nk)
            .map(|n| (rho0 * (n as f64).exp2()).min(top))
            .collect();
        let mut t = Vec::with_capacity(nk + 1);
        t.push(t0);
        for r in rho.iter().take(nk).skip(1) {
            t.push(self.gamma2_inverse(*r)?);
        }
        t.push(self.t_end);
        Ok(PartitionTable {
            k,
            t0,
            rho,
            t,
            nk,
            b: self.b_value().unwrap_or(f64::NAN),
        })
    }

    /// max over k∘ < k <= k_max and n <= N_k of 2^{-n(b+ε)} w_k t_{k,n}.
    pub fn wktkn_scan(&self, k_max: i32, eps: f64) -> Result<WktknScan> {
        if !(eps > 0.0) {
            return Err(Error::Precondition("epsilon must be positive".into()));
        }
        let kc = self.k_circ();
        if k_max <= kc {
            return Err(Error::EmptyRange(format!("k_max {k_max} <= k_circ {kc}")));
        }
        let mut trace = Vec::new();
        for k in kc + 1..=k_max {
            let table = self.partition(k)?;
            let w = self.weight(k)?;
            let b = table.b;
            let m = table
                .t
                .iter()
                .enumerate()
                .map(|(n, t)| (-(n as f64) * (b + eps)).exp2() * w * t)
                .fold(0.0, f64::max);
            trace.push((k, m));
        }
        let max = trace.iter().map(|p| p.1).fold(0.0, f64::max);
        Ok(WktknScan {
            max,
            slope: trend_slope(&trace),
            tail_slope: tail_trend_slope(&trace),
            trace,
        })
    }
}

// Root of ln_f(t) = ls on (0, t_hi] for an increasing ln_f; 0 when the root
// lies below the representable range.
pub(crate) fn invert_ln(
    ls: f64,
    t_hi: f64,
    ln_f: &dyn Fn(f64) -> f64,
    dln_f: &dyn Fn(f64) -> f64,
) -> f64 {
    let f = |t: f64| ln_f(t) - ls;
    let mut lo = 0.5 * t_hi;
    let mut hi = t_hi;
    let mut guard = 0;
    while !(f(lo) <= 0.0) {
        hi = lo;
        lo *= 0.5;
        guard += 1;
        if guard > 1070 {
            return 0.0;
        }
    }
    solve_increasing(f, Some(dln_f), lo, hi, ROOT_TOL)
}

impl Family {
    /// The t in [0, t_hi] where γ^(order) equals `value` (orders 0..=2,
    /// on a range where that derivative is increasing).
    pub(crate) fn inverse(&self, order: usize, value: f64, t_hi: f64) -> f64 {
        if value <= 0.0 {
            return 0.0;
        }
        let top = self.derivative(t_hi, order).unwrap_or(f64::NAN);
        if value >= top {
            return t_hi;
        }
        invert_ln(
            value.ln(),
            t_hi,
            &|t| self.ln_derivative(t, order),
            &|t| self.dlog(t, order),
        )
    }
}

/// log2-slope of a per-k trace.
pub fn trend_slope(trace: &[(i32, f64)]) -> f64 {
    let x: Vec<f64> = trace.iter().map(|p| p.0 as f64).collect();
    let y: Vec<f64> = trace.iter().map(|p| p.1.log2()).collect();
    fit_line(&x, &y).0
}

/// log2-slope over the entries with k at or above the midpoint of the
/// trace's k range; the rise before a bounded sequence levels off is
/// left out.
pub fn tail_trend_slope(trace: &[(i32, f64)]) -> f64 {
    let (Some(first), Some(last)) = (trace.first(), trace.last()) else {
        return f64::NAN;
    };
    let mid = (first.0 + last.0) as f64 / 2.0;
    let tail: Vec<(i32, f64)> = trace.iter().copied().filter(|p| p.0 as f64 >= mid).collect();
    trend_slope(&tail)
}

fn default_domain_end(f: &Family) -> f64 {
    match f {
        Family::Power { .. } => 1.0,
        Family::Tabulated(s) => s.end().min(1.0),
        _ => {
            let (z2, z3) = f.convexity_limits();
            let mut t: f64 = 1.0;
            if let Some(z) = z2 {
                t = t.min(0.5 * z);
            }
            if let Some(z) = z3 {
                t = t.min(z);
            }
            t
        }
    }
}

/// TOML form of a curve: `family = "power"`, `m = 4.0`, optional
/// `domain_end`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveSpec {
    pub family: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain_end: Option<f64>,
}

fn need<T: Copy>(v: Option<T>, key: &str, family: &str) -> Result<T> {
    v.ok_or_else(|| Error::InvalidCurve(format!("family {family} requires `{key}`")))
}

impl CurveSpec {
    pub fn family(&self) -> Result<Family> {
        let f = self.family.as_str();
        Ok(match f {
            "power" => Family::Power {
                m: need(self.m, "m", f)?,
            },
            "expflat" => Family::ExpFlat {
                a: need(self.a, "a", f)?,
            },
            "iterexp" => Family::IterExpFlat {
                n: need(self.n, "n", f)?,
                c: need(self.c, "c", f)?,
                lambda: need(self.lambda, "lambda", f)?,
            },
            "tabulated" => {
                let (Some(t), Some(g)) = (&self.t, &self.gamma) else {
                    return Err(Error::InvalidCurve("tabulated curves require `t` and `gamma`".into()));
                };
                Family::Tabulated(Spline::new(t, g)?)
            }
            other => return Err(Error::InvalidCurve(format!("unknown curve family `{other}`"))),
        })
    }

    pub fn build(&self) -> Result<GraphCurve> {
        GraphCurve::new(self.family()?, self.domain_end)
    }

    pub fn from_curve(curve: &GraphCurve) -> Self {
        let mut s = CurveSpec {
            family: curve.family.name().to_string(),
            domain_end: Some(curve.t_end),
            ..Default::default()
        };
        match curve.family {
            Family::Power { m } => s.m = Some(m),
            Family::ExpFlat { a } => s.a = Some(a),
            Family::IterExpFlat { n, c, lambda } => {
                s.n = Some(n);
                s.c = Some(c);
                s.lambda = Some(lambda);
            }
            Family::Tabulated(ref sp) => {
                s.t = Some(sp.t.clone());
                s.gamma = Some(sp.y.clone());
            }
        }
        s
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Format(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn closed_form_values() {
        let p4 = GraphCurve::power(4.0).unwrap();
        assert_relative_eq!(p4.eval(0.5, 0).unwrap(), 0.0625, max_relative = 1e-15);
        assert_eq!(p4.eval(0.0, 0).unwrap(), 0.0);
        let e1 = Family::ExpFlat { a: 1.0 };
        assert_relative_eq!(e1.derivative(0.5, 0).unwrap(), (-2.0f64).exp(), max_relative = 1e-15);
    }

    #[test]
    fn evaluation_outside_domain_fails() {
        let e1 = GraphCurve::exp_flat(1.0).unwrap();
        assert!(matches!(e1.eval(0.5, 0), Err(Error::Domain { .. })));
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let curves = [
            GraphCurve::power(4.0).unwrap(),
            GraphCurve::exp_flat(1.0).unwrap(),
            GraphCurve::exp_flat(2.5).unwrap(),
            GraphCurve::iter_exp_flat(1, 1.0, 1.0).unwrap(),
        ];
        for c in &curves {
            let t = 0.7 * c.domain_end();
            for order in 0..3 {
                let h = 1e-4 * t;
                let fd = (-c.g(t + 2.0 * h, order) + 8.0 * c.g(t + h, order)
                    - 8.0 * c.g(t - h, order)
                    + c.g(t - 2.0 * h, order))
                    / (12.0 * h);
                let exact = c.g(t, order + 1);
                assert_relative_eq!(fd, exact, max_relative = 1e-7);
            }
        }
    }

    #[test]
    fn default_domain_ends() {
        assert_relative_eq!(
            GraphCurve::exp_flat(1.0).unwrap().domain_end(),
            0.211_324_865_405_187_1,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            GraphCurve::exp_flat(2.0).unwrap().domain_end(),
            0.5 * (2.0f64 / 3.0).sqrt(),
            max_relative = 1e-12
        );
        // ExpFlat(1) is not admissible past the zero of gamma'''
        assert!(GraphCurve::exp_flat(1.0).unwrap().with_domain_end(0.3).is_err());
    }

    #[test]
    fn inverses() {
        let p4 = GraphCurve::power(4.0).unwrap();
        assert_relative_eq!(p4.gamma_inverse((-8f64).exp2()).unwrap(), 0.25, max_relative = 1e-12);
        assert_eq!(p4.gamma_inverse(1.0).unwrap(), 1.0);
        let e2 = GraphCurve::exp_flat(2.0).unwrap().with_domain_end(0.5).unwrap();
        assert_relative_eq!(e2.gamma_inverse((-4f64).exp()).unwrap(), 0.5, max_relative = 1e-12);
        assert_relative_eq!(
            p4.h_inverse((-8f64).exp2()).unwrap(),
            ((-8f64).exp2() / 12.0).powf(0.25),
            max_relative = 1e-12
        );
        assert_eq!(p4.h_eval(0.0).unwrap(), 0.0);
        assert!(matches!(p4.gamma_inverse(1.5), Err(Error::Range { .. })));
        assert!(matches!(p4.h_inverse(13.0), Err(Error::Range { .. })));
    }

    #[test]
    fn weights() {
        let p4 = GraphCurve::power(4.0).unwrap();
        assert_relative_eq!(p4.weight(8).unwrap(), 4.0, max_relative = 1e-12);
        assert_relative_eq!(p4.weight(0).unwrap(), 1.0, max_relative = 1e-12);
        let e1 = GraphCurve::exp_flat(1.0).unwrap();
        assert_relative_eq!(e1.weight(10).unwrap(), 10.0 * 2f64.ln(), max_relative = 1e-12);
        assert!(e1.weight(2).is_err());
    }

    #[test]
    fn b_limits_and_tau() {
        assert_relative_eq!(GraphCurve::power(4.0).unwrap().b_estimate().unwrap(), 0.5);
        assert!(GraphCurve::exp_flat(1.0).unwrap().b_estimate().unwrap().abs() < 1e-6);
        let p4 = GraphCurve::power(4.0).unwrap();
        for s in [1e-6, 1e-3, 1.0, 12.0] {
            assert!(p4.tau_b(s).unwrap().value.abs() < 1e-12);
        }
        let e1 = GraphCurve::exp_flat(1.0).unwrap();
        let s0 = e1.tau_threshold(0.01).unwrap();
        assert!(s0 > 0.0);
        assert!(e1.tau_b(0.5 * s0).unwrap().value.abs() < 0.01);
    }

    #[test]
    fn tabulated_rejects_third_derivative() {
        let t: Vec<f64> = (0..=40).map(|i| i as f64 / 40.0).collect();
        let y: Vec<f64> = t.iter().map(|v| v.powi(3)).collect();
        let c = GraphCurve::tabulated(&t, &y).unwrap();
        assert!(matches!(c.eval(0.5, 3), Err(Error::UnsupportedOrder { .. })));
        assert_relative_eq!(c.eval(0.5, 0).unwrap(), 0.125, max_relative = 1e-4);
        assert_relative_eq!(c.gamma_inverse(0.125).unwrap(), 0.5, max_relative = 1e-4);
        assert!(c.partition(c.k_circ() + 2).is_ok());
        assert!(c.tau_b(1.0).is_err());
    }

    #[test]
    fn partition_golden_value() {
        let p4 = GraphCurve::power(4.0).unwrap();
        assert_eq!(p4.k_circ(), 0);
        let tab = p4.partition(8).unwrap();
        let t0 = ((-8f64).exp2() / 12.0).powf(0.25);
        assert_relative_eq!(tab.t0, t0, max_relative = 1e-12);
        assert_relative_eq!(tab.rho[0], 12.0 * t0 * t0, max_relative = 1e-12);
        assert_eq!(tab.nk, 5);
        assert_eq!(tab.t.len(), 6);
        assert_eq!(*tab.t.last().unwrap(), 1.0);
        for n in 0..tab.nk {
            assert!(tab.t[n] < tab.t[n + 1]);
        }
        for n in 0..4 {
            assert_eq!(tab.rho[n + 1], 2.0 * tab.rho[n]);
        }
        assert!(p4.partition(0).is_err());
    }

    #[test]
    fn spec_round_trip() {
        let spec = CurveSpec::from_toml("family = \"power\"\nm = 4.0\n").unwrap();
        let c = spec.build().unwrap();
        assert_eq!(c, GraphCurve::power(4.0).unwrap());
        let again = CurveSpec::from_toml(&CurveSpec::from_curve(&c).to_toml().unwrap()).unwrap();
        assert_eq!(again.build().unwrap(), c);
        assert!(CurveSpec::from_toml("family = \"power\"\nm = 4.0\nbogus = 1\n").is_err());
    }
}
