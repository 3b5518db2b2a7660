//! Curve measures discretized for convolution on the grid. Nodes are placed
//! by a 6-point Gauss rule on parameter intervals cut at every grid-line
//! crossing, so the bilinear weights are polynomial inside each interval.

use num_complex::Complex64;

use super::{fft2, Field2D};
use crate::body::{ConvexBoundary, Vec2};
use crate::curve::GraphCurve;
use crate::error::{Error, Result};
use crate::oscint::LocalCurve;
use crate::quad::gauss6;

/// Weighted point masses y_j; the operator is f ↦ Σ w_j f(x - y_j).
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    pub nodes: Vec<(Vec2, f64)>,
}

/// The curves the grid operators average over.
#[derive(Debug, Clone, Copy)]
pub enum MeasureSource<'a> {
    /// Arclength on 2^k ∂Ω: ∫ f(x - 2^k y) dσ(y).
    Body(&'a ConvexBoundary),
    /// ∫_{|t|<=ε} f(x₁ - 2^k t, x₂ - 2^k L + 2^k γ(t)) dt.
    Local(&'a LocalCurve),
    /// ∫_a^b f(x₁ - 2^k t, x₂ - 2^k γ(t)) dt / (b - a)^{norm}.
    Graph {
        curve: &'a GraphCurve,
        a: f64,
        b: f64,
        normalized: bool,
    },
}

impl MeasureSource<'_> {
    /// Largest distance between support points at k = 0.
    pub fn diameter(&self) -> f64 {
        match self {
            MeasureSource::Body(b) => b.diameter(),
            MeasureSource::Local(l) => {
                let g = l.gamma(l.eps);
                (2.0 * l.eps).hypot(g)
            }
            MeasureSource::Graph { curve, a, b, .. } => {
                let f = curve.family();
                let ga = f.derivative(*a, 0).unwrap_or(0.0);
                let gb = f.derivative(*b, 0).unwrap_or(0.0);
                (b - a).hypot(gb - ga)
            }
        }
    }

    /// Largest distance from the origin to the support at k = 0.
    pub fn reach(&self) -> f64 {
        match self {
            MeasureSource::Body(b) => b
                .polyline(2048)
                .iter()
                .map(|p| p[0].hypot(p[1]))
                .fold(0.0, f64::max),
            MeasureSource::Local(l) => l.eps.hypot(l.height),
            MeasureSource::Graph { curve, b, .. } => b.hypot(curve.family().derivative(*b, 0).unwrap_or(0.0)),
        }
    }

    pub fn total_mass(&self) -> f64 {
        match self {
            MeasureSource::Body(b) => b.perimeter(),
            MeasureSource::Local(l) => 2.0 * l.eps,
            MeasureSource::Graph { a, b, normalized, .. } => {
                if *normalized {
                    1.0
                } else {
                    b - a
                }
            }
        }
    }

    /// Nodes of the 2^k-dilated measure for a grid of spacing h.
    pub fn discretize(&self, k: i32, h: f64) -> Result<DiscreteMeasure> {
        let s = 2f64.powi(k);
        let mut nodes = Vec::new();
        match self {
            MeasureSource::Body(b) => {
                for p in b.pieces() {
                    let (u0, u1) = p.domain();
                    let path = |u: f64| {
                        let q = p.point(u);
                        [s * q[0], s * q[1]]
                    };
                    push_path(&mut nodes, &path, &|u| p.speed(u), u0, u1, h)?;
                }
            }
            MeasureSource::Local(l) => {
                let path = |t: f64| [s * t, s * (l.height - l.gamma(t))];
                push_path(&mut nodes, &path, &|_| 1.0, -l.eps, 0.0, h)?;
                push_path(&mut nodes, &path, &|_| 1.0, 0.0, l.eps, h)?;
            }
            MeasureSource::Graph { curve, a, b, normalized } => {
                let f = curve.family();
                let w = if *normalized { 1.0 / (b - a) } else { 1.0 };
                let path = |t: f64| [s * t, s * f.derivative(t, 0).unwrap_or(f64::NAN)];
                push_path(&mut nodes, &path, &|_| w, *a, *b, h)?;
            }
        }
        Ok(DiscreteMeasure { nodes })
    }
}

fn push_path(
    out: &mut Vec<(Vec2, f64)>,
    path: &dyn Fn(f64) -> Vec2,
    density: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    h: f64,
) -> Result<()> {
    if b <= a {
        return Ok(());
    }
    // path length bound from a fine sample
    let probe = 512;
    let mut len = 0.0;
    let mut prev = path(a);
    for i in 1..=probe {
        let q = path(a + (b - a) * i as f64 / probe as f64);
        len += (q[0] - prev[0]).hypot(q[1] - prev[1]);
        prev = q;
    }
    let steps = ((8.0 * len / h).ceil() as usize).max(4);
    if steps > 50_000_000 {
        return Err(Error::Resolution(format!("curve needs {steps} steps at spacing {h:e}")));
    }
    let cell = |v: f64| (v / h).floor();
    let mut cuts = Vec::with_capacity(steps + 16);
    let mut u0 = a;
    let mut p0 = path(a);
    cuts.push(a);
    for i in 1..=steps {
        let u1 = if i == steps { b } else { a + (b - a) * i as f64 / steps as f64 };
        let p1 = path(u1);
        let mut local = Vec::new();
        for c in 0..2 {
            let (c0, c1) = (cell(p0[c]), cell(p1[c]));
            if c0 != c1 {
                let line = c0.max(c1) * h;
                let sgn = if p1[c] > p0[c] { 1.0 } else { -1.0 };
                let (mut lo, mut hi) = (u0, u1);
                for _ in 0..60 {
                    let m = 0.5 * (lo + hi);
                    if sgn * (path(m)[c] - line) < 0.0 {
                        lo = m;
                    } else {
                        hi = m;
                    }
                }
                local.push(0.5 * (lo + hi));
            }
        }
        local.sort_by(f64::total_cmp);
        cuts.extend(local);
        cuts.push(u1);
        u0 = u1;
        p0 = p1;
    }
    let rule = gauss6();
    for w in cuts.windows(2) {
        let (x0, x1) = (w[0], w[1]);
        if x1 <= x0 {
            continue;
        }
        let c = 0.5 * (x0 + x1);
        let r = 0.5 * (x1 - x0);
        for (x, wt) in rule.nodes.iter().zip(&rule.weights) {
            let u = c + r * x;
            out.push((path(u), wt * r * density(u)));
        }
    }
    Ok(())
}

impl DiscreteMeasure {
    pub fn mass(&self) -> f64 {
        self.nodes.iter().map(|n| n.1).sum()
    }

    /// Convolution kernel K with (Af)(x_i) = Σ_c K(c) f(x_i - c): the adjoint
    /// of bilinear interpolation applied to each node.
    pub fn kernel(&self, n: usize, side: f64) -> Vec<f64> {
        let h = side / n as f64;
        let mut k = vec![0.0; n * n];
        let wrap = |i: f64| -> usize { (i as i64).rem_euclid(n as i64) as usize };
        for &(p, w) in &self.nodes {
            let (x, y) = (p[0] / h, p[1] / h);
            let (fx, fy) = (x.floor(), y.floor());
            let (ax, ay) = (x - fx, y - fy);
            let (c0, c1) = (wrap(fx), wrap(fx + 1.0));
            let (r0, r1) = (wrap(fy), wrap(fy + 1.0));
            k[r0 * n + c0] += w * (1.0 - ax) * (1.0 - ay);
            k[r0 * n + c1] += w * ax * (1.0 - ay);
            k[r1 * n + c0] += w * (1.0 - ax) * ay;
            k[r1 * n + c1] += w * ax * ay;
        }
        k
    }

    pub fn kernel_spectrum(&self, n: usize, side: f64) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = self.kernel(n, side).into_iter().map(|v| Complex64::new(v, 0.0)).collect();
        fft2(&mut buf, n, false);
        buf
    }

    /// Direct evaluation at one grid point; the reference for the FFT path.
    pub fn apply_at(&self, f: &Field2D, row: usize, col: usize) -> f64 {
        let n = f.n();
        let h = f.spacing();
        let mut s = 0.0;
        for &(p, w) in &self.nodes {
            let x = col as f64 - p[0] / h;
            let y = row as f64 - p[1] / h;
            let (fx, fy) = (x.floor(), y.floor());
            let (ax, ay) = (x - fx, y - fy);
            let at = |r: f64, c: f64| {
                let r = (r as i64).rem_euclid(n as i64) as usize;
                let c = (c as i64).rem_euclid(n as i64) as usize;
                f.get(r, c)
            };
            s += w
                * ((1.0 - ax) * (1.0 - ay) * at(fy, fx)
                    + ax * (1.0 - ay) * at(fy, fx + 1.0)
                    + (1.0 - ax) * ay * at(fy + 1.0, fx)
                    + ax * ay * at(fy + 1.0, fx + 1.0));
        }
        s
    }
}
