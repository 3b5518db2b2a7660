//! Oscillatory integrals: the Fourier transform of arclength measure, the
//! localized multipliers m₀ and m_k, the partial multipliers m_{k,n} and the
//! scans built on them.

use std::f64::consts::{FRAC_PI_4, PI, TAU};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::body::{unit, ConvexBoundary, Vec2};
use crate::curve::{tail_trend_slope, trend_slope, GraphCurve};
use crate::error::{Error, Result};
use crate::grid::beta_circ;
use crate::quad::gauss6;

/// Panel budget shared by every oscillatory quadrature.
pub const PANEL_BUDGET: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OscIntegralResult {
    pub value: Complex64,
    pub abs_error_estimate: f64,
    pub panels: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Panel {
    a: f64,
    b: f64,
    value: Complex64,
    err: f64,
}

/// ∫ w(u) exp(-i φ(u)) du over the union of `segments`, each of which must
/// carry a monotone phase. Panels are bisected until the phase moves by at
/// most π/4 across each, then a 6-point rule is checked against its two
/// halves and the worst panels are refined until the summed estimate is
/// below `tol`.
pub fn oscillatory<P, W>(segments: &[(f64, f64)], phase: P, weight: W, tol: f64) -> Result<OscIntegralResult>
where
    P: Fn(f64) -> f64,
    W: Fn(f64) -> f64,
{
    let rule = gauss6();
    let eval = |a: f64, b: f64| -> Complex64 {
        let c = 0.5 * (a + b);
        let r = 0.5 * (b - a);
        let mut s = Complex64::new(0.0, 0.0);
        for (x, w) in rule.nodes.iter().zip(&rule.weights) {
            let u = c + r * x;
            let (sn, cs) = phase(u).sin_cos();
            s += Complex64::new(cs, -sn) * (w * weight(u));
        }
        s * r
    };
    let make = |a: f64, b: f64| -> Panel {
        let m = 0.5 * (a + b);
        let coarse = eval(a, b);
        let fine = eval(a, m) + eval(m, b);
        Panel {
            a,
            b,
            value: fine,
            err: (fine - coarse).norm(),
        }
    };
    let mut stack: Vec<(f64, f64, f64, f64)> = segments
        .iter()
        .filter(|s| s.1 > s.0)
        .map(|&(a, b)| (a, b, phase(a), phase(b)))
        .collect();
    let mut panels = Vec::new();
    while let Some((a, b, pa, pb)) = stack.pop() {
        let m = 0.5 * (a + b);
        let pm = phase(m);
        let var = pa.max(pb).max(pm) - pa.min(pb).min(pm);
        if var > FRAC_PI_4 && m > a && m < b {
            stack.push((a, m, pa, pm));
            stack.push((m, b, pm, pb));
        } else {
            panels.push(make(a, b));
        }
        if panels.len() + stack.len() > PANEL_BUDGET {
            return Err(non_convergence(&panels));
        }
    }
    loop {
        let total: f64 = panels.iter().map(|p| p.err).sum();
        if total <= tol {
            return Ok(OscIntegralResult {
                value: panels.iter().map(|p| p.value).sum(),
                abs_error_estimate: total,
                panels: panels.len(),
            });
        }
        let cut = (tol / panels.len() as f64).max(0.1 * panels.iter().map(|p| p.err).fold(0.0, f64::max));
        let mut next = Vec::with_capacity(panels.len() + 16);
        let mut split = 0usize;
        for p in panels {
            let m = 0.5 * (p.a + p.b);
            if p.err >= cut && m > p.a && m < p.b {
                next.push(make(p.a, m));
                next.push(make(m, p.b));
                split += 1;
            } else {
                next.push(p);
            }
        }
        panels = next;
        if split == 0 || panels.len() > PANEL_BUDGET {
            return Err(non_convergence(&panels));
        }
    }
}

fn non_convergence(panels: &[Panel]) -> Error {
    Error::NonConvergence {
        partial: panels.iter().map(|p| p.value).sum(),
        error: panels.iter().map(|p| p.err).sum(),
        panels: panels.len(),
    }
}

// Parameter intervals of a piece split where y·θ is extremal.
fn monotone_segments(body: &ConvexBoundary, theta: Vec2) -> Vec<(usize, f64, f64)> {
    let mut out = Vec::new();
    for (i, p) in body.pieces().iter().enumerate() {
        let (a, b) = p.domain();
        let mut cuts = vec![a, b];
        for dir in [theta, [-theta[0], -theta[1]]] {
            let (u, _) = p.extreme(dir);
            for shift in [-TAU, 0.0, TAU] {
                let v = u + shift;
                if v > a && v < b {
                    cuts.push(v);
                }
            }
        }
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        for w in cuts.windows(2) {
            out.push((i, w[0], w[1]));
        }
    }
    out
}

/// σ̂(ξ) = ∫ exp(-i x·ξ) dσ(x).
pub fn sigma_hat(body: &ConvexBoundary, xi: Vec2, tol: f64) -> Result<OscIntegralResult> {
    if !(tol >= 1e-12) {
        return Err(Error::Precondition(format!("tolerance must be at least 1e-12, got {tol}")));
    }
    let r = xi[0].hypot(xi[1]);
    let theta = if r > 0.0 { [xi[0] / r, xi[1] / r] } else { [1.0, 0.0] };
    let segs = monotone_segments(body, theta);
    let share = tol / body.pieces().len() as f64;
    let mut out = OscIntegralResult {
        value: Complex64::new(0.0, 0.0),
        abs_error_estimate: 0.0,
        panels: 0,
    };
    for (i, p) in body.pieces().iter().enumerate() {
        let mine: Vec<(f64, f64)> = segs.iter().filter(|s| s.0 == i).map(|s| (s.1, s.2)).collect();
        let part = oscillatory(
            &mine,
            |u| {
                let q = p.point(u);
                q[0] * xi[0] + q[1] * xi[1]
            },
            |u| p.speed(u),
            share,
        );
        let part = match part {
            Err(Error::NonConvergence { partial, error, panels }) => {
                return Err(Error::NonConvergence {
                    partial: partial + out.value,
                    error: error + out.abs_error_estimate,
                    panels: panels + out.panels,
                })
            }
            other => other?,
        };
        out.value += part.value;
        out.abs_error_estimate += part.abs_error_estimate;
        out.panels += part.panels;
    }
    Ok(out)
}

/// Composite fixed Gauss rule with `per_piece` equal panels per piece; the
/// brute-force reference for `sigma_hat`.
pub fn sigma_hat_fixed(body: &ConvexBoundary, xi: Vec2, per_piece: usize) -> Complex64 {
    let rule = gauss6();
    let mut s = Complex64::new(0.0, 0.0);
    for p in body.pieces() {
        let (a, b) = p.domain();
        let h = (b - a) / per_piece as f64;
        for j in 0..per_piece {
            let (a0, b0) = (a + h * j as f64, a + h * (j + 1) as f64);
            let c = 0.5 * (a0 + b0);
            let r = 0.5 * h;
            for (x, w) in rule.nodes.iter().zip(&rule.weights) {
                let u = c + r * x;
                let q = p.point(u);
                let (sn, cs) = (q[0] * xi[0] + q[1] * xi[1]).sin_cos();
                s += Complex64::new(cs, -sn) * (w * r * p.speed(u));
            }
        }
    }
    s
}

/// |σ̂(Rθ)| / Λ(θ, 1/R).
pub fn ft_cap_ratio(body: &ConvexBoundary, theta: Vec2, r: f64) -> Result<f64> {
    if !(r >= 1.0) {
        return Err(Error::Precondition(format!("R must be at least 1, got {r}")));
    }
    let lam = body.lambda(theta, 1.0 / r)?;
    if !(lam >= 1e-14) {
        return Err(Error::Degenerate(format!("cap length {lam:e} at R = {r}")));
    }
    let v = sigma_hat(body, [r * theta[0], r * theta[1]], 1e-10)?;
    Ok(v.value.norm() / lam)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatioSweep {
    pub sup: f64,
    pub argmax: (f64, f64),
}

/// sup of `ft_cap_ratio` over `directions` angles in [0, π) (σ̂(-ξ) is the
/// conjugate of σ̂(ξ) and Λ is even in θ) and `per_decade` log-spaced radii
/// in [r_lo, r_hi].
pub fn ratio_sweep(body: &ConvexBoundary, directions: usize, r_lo: f64, r_hi: f64, per_decade: usize) -> Result<RatioSweep> {
    let decades = (r_hi / r_lo).log10();
    let count = ((decades * per_decade as f64).round() as usize).max(1) + 1;
    let radii = crate::quad::log_grid(r_lo, r_hi, count);
    let pts: Vec<(f64, f64)> = (0..directions)
        .flat_map(|i| {
            let a = PI * i as f64 / directions as f64;
            radii.iter().map(move |&r| (a, r))
        })
        .collect();
    let vals = pts
        .par_iter()
        .map(|&(a, r)| ft_cap_ratio(body, unit(a), r).map(|v| (v, a, r)))
        .collect::<Result<Vec<_>>>()?;
    let best = vals.iter().fold((0.0, 0.0, 0.0), |acc, v| if v.0 > acc.0 { *v } else { acc });
    Ok(RatioSweep {
        sup: best.0,
        argmax: (best.1, best.2),
    })
}

/// Profile of a local graph piece: a validated curve or the lower arc of a
/// circle, r - √(r² - t²).
#[derive(Debug, Clone, PartialEq)]
pub enum LocalProfile {
    Graph(GraphCurve),
    Circle { radius: f64 },
}

impl LocalProfile {
    fn end(&self) -> f64 {
        match self {
            LocalProfile::Graph(c) => c.domain_end(),
            LocalProfile::Circle { radius } => 0.25 * radius,
        }
    }

    pub fn gamma(&self, t: f64) -> f64 {
        match self {
            LocalProfile::Graph(c) => c.family().derivative(t, 0).unwrap_or(f64::NAN),
            LocalProfile::Circle { radius: r } => t * t / (r + (r * r - t * t).sqrt()),
        }
    }

    pub fn slope(&self, t: f64) -> f64 {
        match self {
            LocalProfile::Graph(c) => c.family().derivative(t, 1).unwrap_or(f64::NAN),
            LocalProfile::Circle { radius: r } => t / (r * r - t * t).sqrt(),
        }
    }

    fn curvature_floor(&self) -> f64 {
        match self {
            LocalProfile::Graph(_) => 0.0,
            LocalProfile::Circle { radius } => 1.0 / radius,
        }
    }

    // t in [0, t_hi] with γ'(t) = v
    fn slope_inverse(&self, v: f64, t_hi: f64) -> f64 {
        match self {
            LocalProfile::Graph(c) => c.family().inverse(1, v, t_hi),
            LocalProfile::Circle { radius: r } => (r * v / (1.0 + v * v).sqrt()).min(t_hi),
        }
    }
}

/// A graph piece (t, L - γ(|t|)), |t| <= ε, as it appears in the reduced
/// form of a lacunary maximal operator.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalCurve {
    pub profile: LocalProfile,
    pub eps: f64,
    pub height: f64,
}

impl LocalCurve {
    /// Defaults: ε = T/2, L = 1.
    pub fn new(curve: GraphCurve) -> Self {
        let eps = 0.5 * curve.domain_end();
        LocalCurve {
            profile: LocalProfile::Graph(curve),
            eps,
            height: 1.0,
        }
    }

    /// Bottom arc of the circle of radius r, with ε = r/8 and L = 1.
    pub fn circle(radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::InvalidCurve(format!("radius must be positive, got {radius}")));
        }
        Ok(LocalCurve {
            profile: LocalProfile::Circle { radius },
            eps: 0.125 * radius,
            height: 1.0,
        })
    }

    pub fn with_aperture(mut self, eps: f64, height: f64) -> Result<Self> {
        if !(eps > 0.0 && eps <= self.profile.end() && height > 0.0) {
            return Err(Error::Precondition(format!(
                "aperture {eps} must lie in (0, {}] and height {height} must be positive",
                self.profile.end()
            )));
        }
        self.eps = eps;
        self.height = height;
        Ok(self)
    }

    pub fn gamma(&self, t: f64) -> f64 {
        self.profile.gamma(t.abs())
    }
}

/// m₀(ξ) = ∫_{|t|≤ε} exp(-i[ξ₁t + Lξ₂ - ξ₂γ(t)]) dt.
pub fn m0(local: &LocalCurve, xi: Vec2) -> Result<Complex64> {
    Ok(m0_detail(local, xi, 1e-12)?.value)
}

pub fn m0_detail(local: &LocalCurve, xi: Vec2, tol: f64) -> Result<OscIntegralResult> {
    let eps = local.eps;
    let mut cuts = vec![-eps, 0.0, eps];
    if xi[1] != 0.0 {
        // stationary where sgn(t) γ'(|t|) = ξ₁/ξ₂
        let v = xi[0] / xi[1];
        let t = local.profile.slope_inverse(v.abs(), eps);
        if t > 0.0 && t < eps {
            cuts.push(t * v.signum());
        }
    }
    cuts.sort_by(f64::total_cmp);
    let segs: Vec<(f64, f64)> = cuts.windows(2).map(|w| (w[0], w[1])).collect();
    let mut r = oscillatory(&segs, |t| xi[0] * t - xi[1] * local.gamma(t), |_| 1.0, tol)?;
    // the constant phase Lξ₂ is applied exactly
    let (s, c) = (local.height * xi[1]).sin_cos();
    r.value *= Complex64::new(c, -s);
    Ok(r)
}

/// m_k(ξ) = m₀(2^k ξ).
pub fn m_k(local: &LocalCurve, k: i32, xi: Vec2) -> Result<Complex64> {
    let s = 2f64.powi(k);
    m0(local, [s * xi[0], s * xi[1]])
}

#[derive(Debug, Clone, PartialEq)]
pub struct GSum {
    /// Σ_k |m₀(2^kξ) - Φ̂(2^kξ)|² over the requested range.
    pub value: f64,
    pub terms: Vec<(i32, f64)>,
    /// Certified bounds for the omitted k below and above the range.
    pub lower_tail: f64,
    pub upper_tail: f64,
    /// False when a tail could not be certified.
    pub certified: bool,
}

/// Φ̂ for the Gaussian Φ of total integral 2ε and width s.
pub fn phi_hat(eps: f64, scale: f64, zeta: Vec2) -> f64 {
    2.0 * eps * (-0.5 * scale * scale * (zeta[0] * zeta[0] + zeta[1] * zeta[1])).exp()
}

pub fn g_term(local: &LocalCurve, k: i32, xi: Vec2, phi_scale: f64) -> Result<f64> {
    let s = 2f64.powi(k);
    let z = [s * xi[0], s * xi[1]];
    let m = m0(local, z)?;
    Ok((m - phi_hat(local.eps, phi_scale, z)).norm_sqr())
}

/// Partial sum of the g-function symbol over k_lo..=k_hi with certified
/// tail bounds: linearization below the range, van der Corput above it.
pub fn g_sum(local: &LocalCurve, xi: Vec2, k_range: (i32, i32), phi_scale: f64) -> Result<GSum> {
    let (k_lo, k_hi) = k_range;
    if k_hi < k_lo {
        return Err(Error::EmptyRange(format!("k range {k_lo}..={k_hi}")));
    }
    let terms = (k_lo..=k_hi)
        .map(|k| Ok((k, g_term(local, k, xi, phi_scale)?)))
        .collect::<Result<Vec<_>>>()?;
    let value = terms.iter().map(|t| t.1).sum();
    let (lower_tail, ok_lo) = lower_tail(local, xi, k_lo, phi_scale);
    let (upper_tail, ok_hi) = upper_tail(local, xi, k_hi, phi_scale);
    Ok(GSum {
        value,
        terms,
        lower_tail,
        upper_tail,
        certified: ok_lo && ok_hi,
    })
}

// |m₀(ζ) - 2ε| <= 2ε√(ε²+L²)|ζ| and |Φ̂(ζ) - 2ε| <= εs²|ζ|²; summed over
// the halving sequence below k_lo once |ζ| <= 1.
fn lower_tail(local: &LocalCurve, xi: Vec2, k_lo: i32, scale: f64) -> (f64, bool) {
    let r = xi[0].hypot(xi[1]);
    if r == 0.0 {
        return (0.0, true);
    }
    let z0 = 2f64.powi(k_lo - 1) * r;
    if z0 > 1.0 {
        return (f64::INFINITY, false);
    }
    let eps = local.eps;
    let a = 2.0 * eps * (eps * eps + local.height * local.height).sqrt();
    let b = eps * scale * scale;
    ((a + b).powi(2) * z0 * z0 * 4.0 / 3.0, true)
}

/// Certified bound for Σ_{k > k_hi} of the g terms, or None when the
/// decay needed for it has not set in yet.
pub fn g_upper_tail(local: &LocalCurve, xi: Vec2, k_hi: i32, phi_scale: f64) -> Option<f64> {
    match upper_tail(local, xi, k_hi, phi_scale) {
        (v, true) => Some(v),
        _ => None,
    }
}

// |m₀(ζ)| <= min(3/λ₁, 8/√λ₂) with λ₁ the first-derivative floor of the
// monotone phase derivative and λ₂ the curvature floor; both bounds shrink
// by at least 1/√2 per doubling, as does the Gaussian once past its width.
fn upper_tail(local: &LocalCurve, xi: Vec2, k_hi: i32, scale: f64) -> (f64, bool) {
    let r = xi[0].hypot(xi[1]);
    if r == 0.0 {
        return (0.0, true);
    }
    let s = 2f64.powi(k_hi + 1);
    let z = [s * xi[0], s * xi[1]];
    let l1 = z[0].abs() - z[1].abs() * local.profile.slope(local.eps);
    let l2 = z[1].abs() * local.profile.curvature_floor();
    let mut bound = 2.0 * local.eps;
    if l1 > 0.0 {
        bound = bound.min(3.0 / l1);
    }
    if l2 > 0.0 {
        bound = bound.min(8.0 / l2.sqrt());
    }
    let zr = s * r;
    let gauss_ok = scale * scale * zr * zr >= (2f64).ln() / 3.0;
    let decays = (l1 > 0.0 || l2 > 0.0) && gauss_ok;
    if !decays {
        return (f64::INFINITY, false);
    }
    let a = bound + phi_hat(local.eps, scale, z);
    (2.0 * a * a, true)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShellSup {
    pub k: i32,
    pub sup_abs: f64,
    pub argmax: Vec2,
}

// Radical inverse in base b.
fn halton(mut i: usize, b: usize) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= b as f64;
        r += f * (i % b) as f64;
        i /= b;
    }
    r
}

/// max |σ̂| over `samples` Halton points of the shell 2^{k-1} <= |ξ| <= 2^{k+1}
/// (log-radius and angle coordinates), refined by a pattern search around the
/// best sample.
pub fn shell_sup(body: &ConvexBoundary, k: i32, samples: usize) -> Result<ShellSup> {
    if k < 1 {
        return Err(Error::Precondition(format!("shell index must be at least 1, got {k}")));
    }
    let lr_lo = (k - 1) as f64 * 2f64.ln();
    let lr_hi = (k + 1) as f64 * 2f64.ln();
    let at = |lr: f64, a: f64| -> Vec2 {
        let r = lr.clamp(lr_lo, lr_hi).exp();
        [r * a.cos(), r * a.sin()]
    };
    let f = |lr: f64, a: f64| -> Result<f64> { Ok(sigma_hat(body, at(lr, a), 1e-10)?.value.norm()) };
    let pts: Vec<(f64, f64)> = (1..=samples.max(1))
        .map(|i| (lr_lo + (lr_hi - lr_lo) * halton(i, 2), PI * halton(i, 3)))
        .collect();
    let vals = pts
        .par_iter()
        .map(|&(lr, a)| f(lr, a).map(|v| (v, lr, a)))
        .collect::<Result<Vec<_>>>()?;
    let (mut best, mut lr, mut a) = vals.iter().fold((-1.0, 0.0, 0.0), |acc, v| if v.0 > acc.0 { *v } else { acc });
    // steps start at the sample spacing
    let n = samples.max(1) as f64;
    let mut step_r = (lr_hi - lr_lo) / n;
    let mut step_a = PI / n.sqrt();
    for _ in 0..60 {
        let mut moved = false;
        for (dr, da) in [(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0)] {
            let (nr, na) = ((lr + dr * step_r).clamp(lr_lo, lr_hi), a + da * step_a);
            let v = f(nr, na)?;
            if v > best {
                best = v;
                lr = nr;
                a = na;
                moved = true;
            }
        }
        if !moved {
            step_r *= 0.5;
            step_a *= 0.5;
            if step_r < 1e-9 && step_a < 1e-9 {
                break;
            }
        }
    }
    Ok(ShellSup {
        k,
        sup_abs: best,
        argmax: at(lr, a),
    })
}

/// m_{k,n}(ξ) = ∫ exp(i(ξ₁t + ξ₂γ(t))) dt over [t_{k,n-1}, t_{k,n}], or over
/// [0, t_{k,0}] when n = 0.
pub fn m_kn(curve: &GraphCurve, k: i32, n: usize, xi: Vec2) -> Result<Complex64> {
    let table = curve.partition(k)?;
    m_kn_with(curve, &table.t, n, xi)
}

fn m_kn_with(curve: &GraphCurve, t: &[f64], n: usize, xi: Vec2) -> Result<Complex64> {
    if n >= t.len() {
        return Err(Error::Precondition(format!("n = {n} exceeds the partition length {}", t.len() - 1)));
    }
    let (a, b) = if n == 0 { (0.0, t[0]) } else { (t[n - 1], t[n]) };
    let fam = curve.family();
    let mut cuts = vec![a, b];
    if xi[1] != 0.0 {
        let v = -xi[0] / xi[1];
        if v > 0.0 {
            let s = fam.inverse(1, v, b);
            if s > a && s < b {
                cuts.push(s);
            }
        }
    }
    cuts.sort_by(f64::total_cmp);
    let segs: Vec<(f64, f64)> = cuts.windows(2).map(|w| (w[0], w[1])).collect();
    // exp(+iψ) is the conjugate of exp(-iψ)
    let r = oscillatory(
        &segs,
        |s| xi[0] * s + xi[1] * fam.derivative(s, 0).unwrap_or(f64::NAN),
        |_| 1.0,
        1e-10 * (b - a).max(1e-300),
    )?;
    Ok(r.value.conj())
}

#[derive(Debug, Clone, PartialEq)]
pub struct VdcScan {
    pub max: f64,
    /// (k, max over n and ξ).
    pub trace: Vec<(i32, f64)>,
    /// log2-slope of the trace over the full range and over its upper half.
    pub slope: f64,
    pub tail_slope: f64,
}

/// max over k∘ < k <= k_max, n <= N_k and shell samples ξ of
/// w_k 2^{n/2} |m_{k,n}(ξ)| β(2^{-k}|ξ|), with 2^{n/2} read as 1 at n = 0.
/// β = β∘(r) - β∘(2r) is positive for 1/4 < r < 1; the samples sit at
/// radii (3/8, 1/2, 5/8, 3/4)·2^k in 8 fixed directions of [0, π) plus, for
/// each n, the nine directions that put the stationary point of the phase
/// at equally spaced points of the n-th interval, ends included.
pub fn vdc_scan(curve: &GraphCurve, k_max: i32) -> Result<VdcScan> {
    let k0 = curve.k_circ() + 1;
    if k_max < k0 {
        return Err(Error::EmptyRange(format!("k_max = {k_max} is below {k0}")));
    }
    let fam = curve.family();
    let trace = (k0..=k_max)
        .into_par_iter()
        .map(|k| {
            let table = curve.partition(k)?;
            let w = curve.weight(k)?;
            let mut best: f64 = 0.0;
            for n in 0..=table.nk.min(table.t.len() - 1) {
                let (a, b) = if n == 0 { (0.0, table.t[0]) } else { (table.t[n - 1], table.t[n]) };
                let mut dirs: Vec<Vec2> = (0..8).map(|j| unit(PI * j as f64 / 8.0)).collect();
                for i in 0..=8 {
                    let d = fam.derivative(a + (b - a) * i as f64 / 8.0, 1)?;
                    let norm = d.hypot(1.0);
                    dirs.push([-d / norm, 1.0 / norm]);
                }
                let gain = if n == 0 { 1.0 } else { 2f64.powf(0.5 * n as f64) };
                for rel in [0.375, 0.5, 0.625, 0.75] {
                    let beta = beta_circ(rel) - beta_circ(2.0 * rel);
                    let r = rel * 2f64.powi(k);
                    for d in &dirs {
                        let m = m_kn_with(curve, &table.t, n, [r * d[0], r * d[1]])?;
                        best = best.max(w * gain * m.norm() * beta);
                    }
                }
            }
            Ok((k, best))
        })
        .collect::<Result<Vec<_>>>()?;
    let max = trace.iter().map(|t| t.1).fold(0.0, f64::max);
    Ok(VdcScan {
        max,
        slope: trend_slope(&trace),
        tail_slope: tail_trend_slope(&trace),
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::bessel_j0;
    use approx::assert_relative_eq;

    #[test]
    fn circle_transform_is_a_bessel_function() {
        let c = ConvexBoundary::circle(1.0).unwrap();
        let z = sigma_hat(&c, [0.0, 0.0], 1e-12).unwrap();
        assert_relative_eq!(z.value.re, TAU, max_relative = 1e-14);
        for (x, y) in [(10.0, 0.0), (3.0, 4.0), (-70.0, 20.0)] {
            let v = sigma_hat(&c, [x, y], 1e-10).unwrap().value;
            let want = TAU * bessel_j0(f64::hypot(x, y));
            assert!((v.re - want).abs() < 1e-9 && v.im.abs() < 1e-9, "{x},{y}: {v}");
        }
    }

    #[test]
    fn hermitian_symmetry() {
        let b = ConvexBoundary::flat_spot(crate::Family::ExpFlat { a: 1.0 }, None).unwrap();
        let xi = [13.0, -7.5];
        let p = sigma_hat(&b, xi, 1e-10).unwrap().value;
        let m = sigma_hat(&b, [-xi[0], -xi[1]], 1e-10).unwrap().value;
        assert!((p - m.conj()).norm() < 1e-9);
        let f = sigma_hat_fixed(&b, xi, 2000);
        assert!((p - f).norm() < 1e-8);
    }

    #[test]
    fn budget_exhaustion_reports_partial_value() {
        let e = oscillatory(&[(0.0, 1.0)], |u| 1e9 * u, |_| 1.0, 1e-12).unwrap_err();
        assert!(matches!(e, Error::NonConvergence { panels, .. } if panels > 0));
    }

    #[test]
    fn local_multiplier_basics() {
        let l = LocalCurve::new(GraphCurve::power(4.0).unwrap());
        assert_eq!(m0(&l, [0.0, 0.0]).unwrap(), Complex64::new(2.0 * l.eps, 0.0));
        let xi = [0.3, -1.7];
        assert_eq!(m_k(&l, 5, xi).unwrap(), m0(&l, [32.0 * xi[0], 32.0 * xi[1]]).unwrap());
        for k in 0..12 {
            assert!(m_k(&l, k, xi).unwrap().norm() <= 2.0 * l.eps * (1.0 + 1e-12));
        }
    }

    #[test]
    fn g_terms_vanish_at_zero() {
        let l = LocalCurve::circle(1.0).unwrap();
        assert_eq!(g_term(&l, 3, [0.0, 0.0], 1.0).unwrap(), 0.0);
        let g = g_sum(&l, [0.0, 1.0], (-12, 14), 1.0).unwrap();
        assert!(g.certified && g.value.is_finite());
    }

    #[test]
    fn partial_multiplier_at_zero_is_the_interval_length() {
        let c = GraphCurve::power(4.0).unwrap();
        let t = c.partition(8).unwrap();
        let v = m_kn(&c, 8, 2, [0.0, 0.0]).unwrap();
        assert_relative_eq!(v.re, t.t[2] - t.t[1], max_relative = 1e-13);
        let v0 = m_kn(&c, 8, 0, [40.0, 200.0]).unwrap();
        assert!(v0.norm() <= t.t0 * (1.0 + 1e-12));
    }
}
