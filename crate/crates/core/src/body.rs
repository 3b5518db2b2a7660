//! Closed convex boundary curves: supporting lines, caps, the cap function
//! Λ(θ, δ), the disjointness threshold δ₀ and covering numbers.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::curve::Family;
use crate::error::{Error, Result};
use crate::quad::{fit_line, gauss6, integrate_smooth, solve_increasing};

pub type Vec2 = [f64; 2];

fn dot(a: Vec2, b: Vec2) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn rot(v: Vec2, ang: f64) -> Vec2 {
    let (s, c) = ang.sin_cos();
    [c * v[0] - s * v[1], s * v[0] + c * v[1]]
}

/// Unit vector at angle `ang`; exact at multiples of a quarter turn so that
/// flat normals are hit exactly.
pub fn unit(ang: f64) -> Vec2 {
    let q = ang / (0.5 * PI);
    if (q - q.round()).abs() < 1e-15 {
        return match (q.round() as i64).rem_euclid(4) {
            0 => [1.0, 0.0],
            1 => [0.0, 1.0],
            2 => [-1.0, 0.0],
            _ => [0.0, -1.0],
        };
    }
    let (s, c) = ang.sin_cos();
    [c, s]
}

/// Direction grid of `count` angles starting at 0.
pub fn theta_grid(count: usize) -> Vec<Vec2> {
    (0..count).map(|i| unit(TAU * i as f64 / count as f64)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    fn apply(self, theta: Vec2) -> Vec2 {
        match self {
            Sign::Plus => theta,
            Sign::Minus => [-theta[0], -theta[1]],
        }
    }
}

/// A convex graph arc (s, γ(s)), 0 <= s <= t_max, placed by a rotation and a
/// translation; mirrored pieces run (-s, γ(s)) from s = t_max down to 0.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphPiece {
    pub family: Family,
    pub t_max: f64,
    pub origin: Vec2,
    pub angle: f64,
    pub mirrored: bool,
}

/// Support function h sampled with h' on a uniform angle grid; the boundary
/// point with outer normal n(φ) is h n + h' n'.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportCurve {
    h: Vec<f64>,
    dh: Vec<f64>,
    origin: Vec2,
    angle: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Piece {
    Arc {
        center: Vec2,
        radius: f64,
        start: f64,
        sweep: f64,
    },
    Ellipse {
        center: Vec2,
        semi: Vec2,
        rotation: f64,
    },
    Graph(GraphPiece),
    Support(SupportCurve),
}

impl GraphPiece {
    fn s_of(&self, u: f64) -> f64 {
        if self.mirrored {
            self.t_max - u
        } else {
            u
        }
    }

    fn sigma(&self) -> f64 {
        if self.mirrored {
            -1.0
        } else {
            1.0
        }
    }

    fn g(&self, s: f64, order: usize) -> f64 {
        self.family.derivative(s, order).unwrap_or(f64::NAN)
    }

    fn local(&self, s: f64) -> Vec2 {
        [self.sigma() * s, self.g(s, 0)]
    }

    // argmax over s of c1 σ s + c2 γ(s)
    fn argmax_s(&self, c: Vec2) -> f64 {
        let sig = self.sigma();
        if c[1] < 0.0 {
            let target = sig * c[0] / (-c[1]);
            if target <= 0.0 {
                return 0.0;
            }
            return self.family.inverse(1, target, self.t_max);
        }
        let v0 = 0.0;
        let v1 = c[0] * sig * self.t_max + c[1] * self.g(self.t_max, 0);
        if v1 > v0 {
            self.t_max
        } else {
            0.0
        }
    }
}

impl SupportCurve {
    fn m(&self) -> usize {
        self.h.len()
    }

    // Hermite cubic value and first two derivatives at local angle φ
    fn eval(&self, phi: f64) -> (f64, f64, f64) {
        let m = self.m();
        let step = TAU / m as f64;
        let x = phi.rem_euclid(TAU) / step;
        let i = (x.floor() as usize).min(m - 1);
        let s = x - i as f64;
        let j = (i + 1) % m;
        let (h0, h1) = (self.h[i], self.h[j]);
        let (d0, d1) = (self.dh[i] * step, self.dh[j] * step);
        let s2 = s * s;
        let s3 = s2 * s;
        let v = (2.0 * s3 - 3.0 * s2 + 1.0) * h0
            + (s3 - 2.0 * s2 + s) * d0
            + (-2.0 * s3 + 3.0 * s2) * h1
            + (s3 - s2) * d1;
        let dv = (6.0 * s2 - 6.0 * s) * h0
            + (3.0 * s2 - 4.0 * s + 1.0) * d0
            + (-6.0 * s2 + 6.0 * s) * h1
            + (3.0 * s2 - 2.0 * s) * d1;
        let ddv = (12.0 * s - 6.0) * h0 + (6.0 * s - 4.0) * d0 + (-12.0 * s + 6.0) * h1 + (6.0 * s - 2.0) * d1;
        (v, dv / step, ddv / (step * step))
    }

    fn local_point(&self, phi: f64) -> Vec2 {
        let (h, dh, _) = self.eval(phi);
        let (s, c) = phi.sin_cos();
        [h * c - dh * s, h * s + dh * c]
    }
}

impl Piece {
    pub fn domain(&self) -> (f64, f64) {
        match self {
            Piece::Arc { start, sweep, .. } => (*start, start + sweep),
            Piece::Ellipse { .. } | Piece::Support(_) => (0.0, TAU),
            Piece::Graph(g) => (0.0, g.t_max),
        }
    }

    /// True when the piece alone is the whole closed curve.
    pub fn is_closed(&self) -> bool {
        match self {
            Piece::Arc { sweep, .. } => *sweep >= TAU,
            Piece::Ellipse { .. } | Piece::Support(_) => true,
            Piece::Graph(_) => false,
        }
    }

    pub fn point(&self, u: f64) -> Vec2 {
        match self {
            Piece::Arc { center, radius, .. } => {
                let (s, c) = u.sin_cos();
                [center[0] + radius * c, center[1] + radius * s]
            }
            Piece::Ellipse {
                center,
                semi,
                rotation,
            } => {
                let (s, c) = u.sin_cos();
                let p = rot([semi[0] * c, semi[1] * s], *rotation);
                [center[0] + p[0], center[1] + p[1]]
            }
            Piece::Graph(g) => {
                let p = rot(g.local(g.s_of(u)), g.angle);
                [g.origin[0] + p[0], g.origin[1] + p[1]]
            }
            Piece::Support(sc) => {
                let p = rot(sc.local_point(u - sc.angle), sc.angle);
                [sc.origin[0] + p[0], sc.origin[1] + p[1]]
            }
        }
    }

    pub fn velocity(&self, u: f64) -> Vec2 {
        match self {
            Piece::Arc { radius, .. } => {
                let (s, c) = u.sin_cos();
                [-radius * s, radius * c]
            }
            Piece::Ellipse { semi, rotation, .. } => {
                let (s, c) = u.sin_cos();
                rot([-semi[0] * s, semi[1] * c], *rotation)
            }
            Piece::Graph(g) => {
                let d = g.g(g.s_of(u), 1);
                let v = if g.mirrored { [1.0, -d] } else { [1.0, d] };
                rot(v, g.angle)
            }
            Piece::Support(sc) => {
                let phi = u - sc.angle;
                let (h, _, ddh) = sc.eval(phi);
                let r = h + ddh;
                let (s, c) = u.sin_cos();
                [-r * s, r * c]
            }
        }
    }

    pub fn speed(&self, u: f64) -> f64 {
        match self {
            Piece::Arc { radius, .. } => *radius,
            Piece::Graph(g) => {
                let d = g.g(g.s_of(u), 1);
                (1.0 + d * d).sqrt()
            }
            Piece::Support(sc) => {
                let (h, _, ddh) = sc.eval(u - sc.angle);
                h + ddh
            }
            _ => {
                let v = self.velocity(u);
                v[0].hypot(v[1])
            }
        }
    }

    /// Arclength between parameters u0 <= u1 (may run past the domain end
    /// for closed pieces).
    pub fn arclength(&self, u0: f64, u1: f64) -> f64 {
        if u1 <= u0 {
            return 0.0;
        }
        match self {
            Piece::Arc { radius, .. } => radius * (u1 - u0),
            Piece::Ellipse { .. } => integrate_smooth(&|u| self.speed(u), u0, u1, 1e-14),
            Piece::Graph(g) => {
                let (s0, s1) = if g.mirrored {
                    (g.s_of(u1), g.s_of(u0))
                } else {
                    (u0, u1)
                };
                integrate_smooth(
                    &|s| {
                        let d = g.g(s, 1);
                        (1.0 + d * d).sqrt()
                    },
                    s0,
                    s1,
                    1e-14,
                )
            }
            Piece::Support(sc) => {
                // ∫(h + h'') = ∫h + [h'], with ∫h exact per Hermite cell
                let step = TAU / sc.m() as f64;
                let (a, b) = (u0 - sc.angle, u1 - sc.angle);
                let mut acc = sc.eval(b).1 - sc.eval(a).1;
                let mut x = a;
                while x < b {
                    let mut next = ((x / step).floor() + 1.0) * step;
                    if next <= x {
                        next += step;
                    }
                    let next = next.min(b);
                    acc += gauss6().integrate(x, next, |p| sc.eval(p).0);
                    x = next;
                }
                acc
            }
        }
    }

    /// (argmax u, max value) of p(u)·θ over the piece.
    pub fn extreme(&self, theta: Vec2) -> (f64, f64) {
        let (a, b) = self.domain();
        let u = match self {
            Piece::Arc { .. } => {
                let ang = theta[1].atan2(theta[0]);
                if self.is_closed() {
                    ang.rem_euclid(TAU)
                } else {
                    let rel = (ang - a).rem_euclid(TAU);
                    if rel <= b - a {
                        a + rel
                    } else if dot(self.point(a), theta) >= dot(self.point(b), theta) {
                        a
                    } else {
                        b
                    }
                }
            }
            Piece::Ellipse { semi, rotation, .. } => {
                let c = rot(theta, -rotation);
                (semi[1] * c[1]).atan2(semi[0] * c[0]).rem_euclid(TAU)
            }
            Piece::Graph(g) => {
                let c = rot(theta, -g.angle);
                let s = g.argmax_s(c);
                if g.mirrored {
                    g.t_max - s
                } else {
                    s
                }
            }
            Piece::Support(_) => theta[1].atan2(theta[0]).rem_euclid(TAU),
        };
        (u, dot(self.point(u), theta))
    }

    /// (p(u_ref) - p(u))·θ without cancellation near u_ref.
    pub fn gap_between(&self, u_ref: f64, u: f64, theta: Vec2) -> f64 {
        match self {
            Piece::Arc { radius, .. } => {
                let m = 0.5 * (u_ref + u);
                let d = (0.5 * (u_ref - u)).sin();
                let (s, c) = m.sin_cos();
                2.0 * radius * d * (-s * theta[0] + c * theta[1])
            }
            Piece::Ellipse { semi, rotation, .. } => {
                let c = rot(theta, -rotation);
                let m = 0.5 * (u_ref + u);
                let d = (0.5 * (u_ref - u)).sin();
                let (sm, cm) = m.sin_cos();
                2.0 * d * (-semi[0] * sm * c[0] + semi[1] * cm * c[1])
            }
            Piece::Graph(g) => {
                let c = rot(theta, -g.angle);
                let (sr, s) = (g.s_of(u_ref), g.s_of(u));
                c[0] * g.sigma() * (sr - s) + c[1] * (g.g(sr, 0) - g.g(s, 0))
            }
            Piece::Support(sc) => {
                let c = rot(theta, -sc.angle);
                let (pa, pb) = (sc.local_point(u_ref - sc.angle), sc.local_point(u - sc.angle));
                (pa[0] - pb[0]) * c[0] + (pa[1] - pb[1]) * c[1]
            }
        }
    }

    fn max_speed(&self) -> f64 {
        let (a, b) = self.domain();
        (0..=64)
            .map(|i| self.speed(a + (b - a) * i as f64 / 64.0))
            .fold(0.0, f64::max)
    }

    fn rotated(&self, phi: f64) -> Piece {
        match self {
            Piece::Arc {
                center,
                radius,
                start,
                sweep,
            } => Piece::Arc {
                center: rot(*center, phi),
                radius: *radius,
                start: start + phi,
                sweep: *sweep,
            },
            Piece::Ellipse {
                center,
                semi,
                rotation,
            } => Piece::Ellipse {
                center: rot(*center, phi),
                semi: *semi,
                rotation: rotation + phi,
            },
            Piece::Graph(g) => Piece::Graph(GraphPiece {
                origin: rot(g.origin, phi),
                angle: g.angle + phi,
                ..g.clone()
            }),
            Piece::Support(sc) => Piece::Support(SupportCurve {
                origin: rot(sc.origin, phi),
                angle: sc.angle + phi,
                ..sc.clone()
            }),
        }
    }

    fn translated(&self, v: Vec2) -> Piece {
        let add = |p: Vec2| [p[0] + v[0], p[1] + v[1]];
        match self {
            Piece::Arc {
                center,
                radius,
                start,
                sweep,
            } => Piece::Arc {
                center: add(*center),
                radius: *radius,
                start: *start,
                sweep: *sweep,
            },
            Piece::Ellipse {
                center,
                semi,
                rotation,
            } => Piece::Ellipse {
                center: add(*center),
                semi: *semi,
                rotation: *rotation,
            },
            Piece::Graph(g) => Piece::Graph(GraphPiece {
                origin: add(g.origin),
                ..g.clone()
            }),
            Piece::Support(sc) => Piece::Support(SupportCurve {
                origin: add(sc.origin),
                ..sc.clone()
            }),
        }
    }
}

/// A closed convex curve made of pieces traversed counterclockwise.
#[derive(Debug, Clone)]
pub struct ConvexBoundary {
    pieces: Vec<Piece>,
    lengths: Vec<f64>,
    origin_interior: bool,
    label: String,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupportLine {
    pub theta: Vec2,
    pub offset: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CapArc {
    pub piece: usize,
    pub u0: f64,
    pub u1: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cap {
    pub theta: Vec2,
    pub delta: f64,
    pub sign: Sign,
    pub arcs: Vec<CapArc>,
    pub length: f64,
    /// Set when δ reaches the width: the cap is the whole curve.
    pub whole: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoveringReport {
    pub rho_grid: Vec<f64>,
    pub counts: Vec<usize>,
    pub fitted_codim: f64,
}

impl Cap {
    /// True if the two caps share boundary points.
    pub fn intersects(&self, other: &Cap, body: &ConvexBoundary) -> bool {
        if self.whole || other.whole {
            return true;
        }
        for a in &self.arcs {
            for b in &other.arcs {
                if a.piece != b.piece {
                    continue;
                }
                if body.pieces[a.piece].is_closed() {
                    // compare on the circle of parameters
                    let shift = ((b.u0 - a.u0) / TAU).round() * TAU;
                    for k in [-1.0, 0.0, 1.0] {
                        let (b0, b1) = (b.u0 - shift + k * TAU, b.u1 - shift + k * TAU);
                        if b0 <= a.u1 && a.u0 <= b1 {
                            return true;
                        }
                    }
                } else if b.u0 <= a.u1 && a.u0 <= b.u1 {
                    return true;
                }
            }
        }
        false
    }

    /// Sample points along the cap arcs.
    pub fn points(&self, body: &ConvexBoundary, per_arc: usize) -> Vec<Vec<Vec2>> {
        self.arcs
            .iter()
            .map(|a| {
                (0..=per_arc)
                    .map(|i| {
                        body.pieces[a.piece].point(a.u0 + (a.u1 - a.u0) * i as f64 / per_arc as f64)
                    })
                    .collect()
            })
            .collect()
    }
}

/// Contact data for one direction, reused across many δ.
pub struct CapSolver<'a> {
    body: &'a ConvexBoundary,
    theta: Vec2,
    dir: Vec2,
    sign: Sign,
    piece: usize,
    u_star: f64,
    offset: f64,
    // per piece (argmax, max) of y·dir, and the width in direction dir
    tops: Vec<(f64, f64)>,
    width: f64,
}

impl ConvexBoundary {
    pub fn new(pieces: Vec<Piece>, label: &str) -> Result<Self> {
        if pieces.is_empty() {
            return Err(Error::InvalidBody("no pieces".into()));
        }
        let lengths: Vec<f64> = pieces
            .iter()
            .map(|p| {
                let (a, b) = p.domain();
                p.arclength(a, b)
            })
            .collect();
        let mut body = ConvexBoundary {
            pieces,
            lengths,
            origin_interior: false,
            label: label.to_string(),
        };
        body.validate()?;
        body.origin_interior = body.contains_origin();
        Ok(body)
    }

    pub fn circle(radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidBody(format!("radius must be positive, got {radius}")));
        }
        Self::new(
            vec![Piece::Arc {
                center: [0.0, 0.0],
                radius,
                start: 0.0,
                sweep: TAU,
            }],
            "circle",
        )
    }

    pub fn ellipse(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
            return Err(Error::InvalidBody(format!("semi-axes must be positive, got {a}, {b}")));
        }
        Self::new(
            vec![Piece::Ellipse {
                center: [0.0, 0.0],
                semi: [a, b],
                rotation: 0.0,
            }],
            "ellipse",
        )
    }

    /// Body whose bottom is the symmetric graph γ(|x|), |x| <= t_max, closed
    /// by the circular arc tangent at both ends and centered at the origin.
    /// The flat normal is -e2.
    pub fn flat_spot(family: Family, t_max: Option<f64>) -> Result<Self> {
        let t_max = match t_max {
            Some(t) => t,
            None => default_flat_extent(&family),
        };
        if !(t_max > 0.0) {
            return Err(Error::InvalidBody(format!("graph extent must be positive, got {t_max}")));
        }
        let d1 = family.derivative(t_max, 1)?;
        if !(d1 > 0.0) {
            return Err(Error::InvalidBody("graph has zero slope at its end".into()));
        }
        for i in 1..=400 {
            let s = t_max * i as f64 / 400.0;
            if family.derivative(s, 2)? < -1e-12 * d1 {
                return Err(Error::InvalidBody(format!("graph is not convex at s = {s}")));
            }
        }
        let g_end = family.derivative(t_max, 0)?;
        let radius = t_max * (1.0 + d1 * d1).sqrt() / d1;
        let cy = g_end + t_max / d1;
        let shift = [0.0, -cy];
        let start = (g_end - cy).atan2(t_max);
        let left = GraphPiece {
            family: family.clone(),
            t_max,
            origin: shift,
            angle: 0.0,
            mirrored: true,
        };
        let right = GraphPiece {
            mirrored: false,
            ..left.clone()
        };
        let arc = Piece::Arc {
            center: [0.0, 0.0],
            radius,
            start,
            sweep: PI - 2.0 * start,
        };
        Self::new(
            vec![Piece::Graph(left), Piece::Graph(right), arc],
            &format!("flat-{}", family.name()),
        )
    }

    /// Body from samples of a support function and its derivative on a
    /// uniform grid of angles starting at 0.
    pub fn from_support(h: Vec<f64>, dh: Vec<f64>) -> Result<Self> {
        if h.len() < 8 || h.len() != dh.len() {
            return Err(Error::InvalidBody("support samples need at least 8 (h, h') pairs".into()));
        }
        Self::new(
            vec![Piece::Support(SupportCurve {
                h,
                dh,
                origin: [0.0, 0.0],
                angle: 0.0,
            })],
            "support",
        )
    }

    pub fn rotated(&self, phi: f64) -> Result<Self> {
        Self::new(self.pieces.iter().map(|p| p.rotated(phi)).collect(), &self.label)
    }

    pub fn translated(&self, v: Vec2) -> Result<Self> {
        Self::new(self.pieces.iter().map(|p| p.translated(v)).collect(), &self.label)
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn origin_interior(&self) -> bool {
        self.origin_interior
    }

    pub fn perimeter(&self) -> f64 {
        self.lengths.iter().sum()
    }

    pub fn piece_lengths(&self) -> &[f64] {
        &self.lengths
    }

    /// Dense polyline with about `n` points, distributed by arclength share.
    pub fn polyline(&self, n: usize) -> Vec<Vec2> {
        let total = self.perimeter();
        let mut pts = Vec::with_capacity(n + self.pieces.len());
        for (p, len) in self.pieces.iter().zip(&self.lengths) {
            let m = ((n as f64 * len / total).ceil() as usize).max(2);
            let (a, b) = p.domain();
            for i in 0..m {
                pts.push(p.point(a + (b - a) * i as f64 / m as f64));
            }
        }
        pts
    }

    fn validate(&self) -> Result<()> {
        let np = self.pieces.len();
        let scale = self.pieces.iter().map(|p| {
            let (a, _) = p.domain();
            let q = p.point(a);
            q[0].abs().max(q[1].abs())
        });
        let scale = scale.fold(1e-300, f64::max);
        if np > 1 {
            for i in 0..np {
                let p = &self.pieces[i];
                let q = &self.pieces[(i + 1) % np];
                if p.is_closed() {
                    return Err(Error::InvalidBody("closed piece inside a union".into()));
                }
                let end = p.point(p.domain().1);
                let start = q.point(q.domain().0);
                if (end[0] - start[0]).hypot(end[1] - start[1]) > 1e-9 * scale.max(1.0) {
                    return Err(Error::InvalidBody(format!("pieces {i} and {} do not join", (i + 1) % np)));
                }
            }
        } else if !self.pieces[0].is_closed() {
            return Err(Error::InvalidBody("a single piece must be closed".into()));
        }
        for (i, l) in self.lengths.iter().enumerate() {
            if !(l.is_finite() && *l >= 0.0) {
                return Err(Error::InvalidBody(format!("piece {i} has invalid length")));
            }
        }
        let pts = self.polyline(4096);
        let n = pts.len();
        let mut turning = 0.0;
        for i in 0..n {
            let a = pts[i];
            let b = pts[(i + 1) % n];
            let c = pts[(i + 2) % n];
            let e1 = [b[0] - a[0], b[1] - a[1]];
            let e2 = [c[0] - b[0], c[1] - b[1]];
            let cross = e1[0] * e2[1] - e1[1] * e2[0];
            let norms = e1[0].hypot(e1[1]) * e2[0].hypot(e2[1]);
            if norms == 0.0 {
                continue;
            }
            if cross < -1e-9 * norms {
                return Err(Error::InvalidBody(format!("not convex near ({:.4}, {:.4})", b[0], b[1])));
            }
            turning += cross.atan2(e1[0] * e2[0] + e1[1] * e2[1]);
        }
        if (turning - TAU).abs() > 1e-6 {
            return Err(Error::InvalidBody(format!(
                "boundary is not a simple loop (total turning {turning})"
            )));
        }
        Ok(())
    }

    fn contains_origin(&self) -> bool {
        let pts = self.polyline(4096);
        let n = pts.len();
        (0..n).all(|i| {
            let a = pts[i];
            let b = pts[(i + 1) % n];
            (b[0] - a[0]) * (-a[1]) - (b[1] - a[1]) * (-a[0]) > 0.0
        })
    }

    /// Supporting line with θ (sign +) or -θ (sign -) as outer normal;
    /// the offset is max y·θ, respectively min y·θ.
    pub fn support(&self, theta: Vec2, sign: Sign) -> SupportLine {
        let (_, _, v) = self.contact(sign.apply(theta));
        let offset = match sign {
            Sign::Plus => v,
            Sign::Minus => -v,
        };
        SupportLine { theta, offset }
    }

    pub fn width(&self, theta: Vec2) -> f64 {
        self.contact(theta).2 + self.contact([-theta[0], -theta[1]]).2
    }

    pub fn diameter(&self) -> f64 {
        let mut best: f64 = 0.0;
        let mut arg = 0.0;
        for i in 0..720 {
            let a = PI * i as f64 / 720.0;
            let w = self.width(unit(a));
            if w > best {
                best = w;
                arg = a;
            }
        }
        let step = PI / 720.0;
        for i in -32..=32 {
            let a = arg + step * i as f64 / 32.0;
            best = best.max(self.width(unit(a)));
        }
        best
    }

    // (piece, u*, max y·dir)
    fn contact(&self, dir: Vec2) -> (usize, f64, f64) {
        let mut best = (0, 0.0, f64::NEG_INFINITY);
        for (i, p) in self.pieces.iter().enumerate() {
            let (u, v) = p.extreme(dir);
            if v > best.2 {
                best = (i, u, v);
            }
        }
        best
    }

    pub fn cap_solver(&self, theta: Vec2, sign: Sign) -> CapSolver<'_> {
        let dir = sign.apply(theta);
        let (piece, u_star, offset) = self.contact(dir);
        let tops = self.pieces.iter().map(|p| p.extreme(dir)).collect();
        let bottom = self.contact([-dir[0], -dir[1]]).2;
        CapSolver {
            body: self,
            theta,
            dir,
            sign,
            piece,
            u_star,
            offset,
            tops,
            width: offset + bottom,
        }
    }

    /// C±(θ, δ): the boundary points within δ of the supporting line.
    pub fn cap(&self, theta: Vec2, delta: f64, sign: Sign) -> Result<Cap> {
        self.cap_solver(theta, sign).cap(delta)
    }

    /// Λ(θ, δ), the longer of the two caps.
    pub fn lambda(&self, theta: Vec2, delta: f64) -> Result<f64> {
        let a = self.cap(theta, delta, Sign::Plus)?.length;
        let b = self.cap(theta, delta, Sign::Minus)?.length;
        Ok(a.max(b))
    }

    /// Λ(θ, δ) for many δ with the contact points computed once.
    pub fn lambda_many(&self, theta: Vec2, deltas: &[f64]) -> Result<Vec<f64>> {
        let p = self.cap_solver(theta, Sign::Plus);
        let m = self.cap_solver(theta, Sign::Minus);
        deltas
            .iter()
            .map(|&d| Ok(p.cap(d)?.length.max(m.cap(d)?.length)))
            .collect()
    }

    fn caps_disjoint(&self, theta: Vec2, delta: f64) -> Result<bool> {
        let a = self.cap(theta, delta, Sign::Plus)?;
        let b = self.cap(theta, delta, Sign::Minus)?;
        Ok(!a.intersects(&b, self))
    }

    /// Largest δ (by bisection) at which C+(θ,δ) and C-(θ,δ) are disjoint for
    /// every θ of a uniform grid, refined around the narrowest grid direction.
    pub fn delta0(&self, theta_grid_size: usize) -> Result<f64> {
        let count = theta_grid_size.max(4);
        // antipodal directions give the same pair of caps
        let mut thetas: Vec<Vec2> = (0..count).map(|i| unit(PI * i as f64 / count as f64)).collect();
        let (imin, wmin) = thetas
            .iter()
            .enumerate()
            .map(|(i, t)| (i, self.width(*t)))
            .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
        if !(wmin > 1e-14) {
            return Err(Error::Degenerate(format!("zero width ({wmin:e})")));
        }
        let a0 = PI * imin as f64 / count as f64;
        let step = PI / count as f64;
        for j in -16..=16 {
            if j != 0 {
                thetas.push(unit(a0 + step * j as f64 / 16.0));
            }
        }
        let mut lo = 0.0;
        let mut hi = self.diameter();
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            let mut ok = true;
            for t in &thetas {
                if !self.caps_disjoint(*t, mid)? {
                    ok = false;
                    break;
                }
            }
            if ok {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-13 * hi {
                break;
            }
        }
        Ok(lo)
    }

    /// Greedy sequential cover of a boundary polyline with spacing at most
    /// ρ/10; at most twice the minimal number of ρ-balls.
    pub fn box_count(&self, rho: f64) -> Result<usize> {
        if !(rho > 0.0) {
            return Err(Error::Precondition("rho must be positive".into()));
        }
        let spacing = rho / 10.0;
        let mut pts = Vec::new();
        for p in &self.pieces {
            let (a, b) = p.domain();
            let m = (p.max_speed() * (b - a) / spacing).ceil();
            if m > 5e7 {
                return Err(Error::Resolution(format!(
                    "rho = {rho:e} needs more than 5e7 polyline points"
                )));
            }
            let m = (m as usize).max(2);
            pts.extend((0..m).map(|i| p.point(a + (b - a) * i as f64 / m as f64)));
        }
        Ok(box_count_points(&pts, rho))
    }

    pub fn codim_fit(&self, rho_grid: &[f64]) -> Result<CoveringReport> {
        let counts = rho_grid
            .iter()
            .map(|&r| self.box_count(r))
            .collect::<Result<Vec<_>>>()?;
        Ok(covering_report(rho_grid, counts))
    }
}

/// Greedy sequential cover count of an ordered point set.
pub fn box_count_points(points: &[Vec2], rho: f64) -> usize {
    let mut iter = points.iter();
    let Some(first) = iter.next() else {
        return 0;
    };
    let mut center = *first;
    let mut count = 1;
    for p in iter {
        if (p[0] - center[0]).hypot(p[1] - center[1]) > rho {
            center = *p;
            count += 1;
        }
    }
    count
}

pub fn covering_report(rho_grid: &[f64], counts: Vec<usize>) -> CoveringReport {
    let x: Vec<f64> = rho_grid.iter().map(|r| (1.0 / r).ln()).collect();
    let y: Vec<f64> = counts.iter().map(|&c| (c as f64).ln()).collect();
    CoveringReport {
        rho_grid: rho_grid.to_vec(),
        counts,
        fitted_codim: fit_line(&x, &y).0,
    }
}

fn default_flat_extent(f: &Family) -> f64 {
    match f {
        Family::Power { .. } => 1.0,
        Family::Tabulated(s) => *s.knots().0.last().unwrap(),
        _ => f.convexity_limits().0.unwrap_or(1.0),
    }
}

impl CapSolver<'_> {
    pub fn offset(&self) -> f64 {
        self.offset
    }

    fn gap(&self, i: usize, u: f64) -> f64 {
        let p = &self.body.pieces[i];
        if i == self.piece {
            p.gap_between(self.u_star, u, self.dir)
        } else {
            let (ut, vt) = self.tops[i];
            (self.offset - vt) + p.gap_between(ut, u, self.dir)
        }
    }

    pub fn cap(&self, delta: f64) -> Result<Cap> {
        if !(delta > 0.0) {
            return Err(Error::Precondition(format!("delta must be positive, got {delta}")));
        }
        let body = self.body;
        let mut cap = Cap {
            theta: self.theta,
            delta,
            sign: self.sign,
            arcs: Vec::new(),
            length: 0.0,
            whole: false,
        };
        let whole = |mut cap: Cap| {
            cap.whole = true;
            cap.arcs = body
                .pieces
                .iter()
                .enumerate()
                .map(|(i, p)| {
                    let (a, b) = p.domain();
                    CapArc { piece: i, u0: a, u1: b }
                })
                .collect();
            cap.length = body.perimeter();
            cap
        };
        if body.pieces.len() == 1 {
            let p = &body.pieces[0];
            let us = self.u_star;
            let (ub, _) = p.extreme([-self.dir[0], -self.dir[1]]);
            let mut ub = ub;
            while ub <= us {
                ub += TAU;
            }
            while ub > us + TAU {
                ub -= TAU;
            }
            if delta >= self.width || self.gap(0, ub) <= delta {
                return Ok(whole(cap));
            }
            let (u0, u1) = match p {
                Piece::Arc { radius: r, .. } => {
                    let d = 2.0 * (delta / (2.0 * r)).sqrt().asin();
                    (us - d, us + d)
                }
                Piece::Ellipse { semi, rotation, .. } => {
                    let c = rot(self.dir, -rotation);
                    let amp = (semi[0] * c[0]).hypot(semi[1] * c[1]);
                    let d = 2.0 * (delta / (2.0 * amp)).sqrt().asin();
                    (us - d, us + d)
                }
                _ => {
                    let up = solve_increasing(|u| self.gap(0, u) - delta, None::<fn(f64) -> f64>, us, ub, 1e-15);
                    let lb = ub - TAU;
                    let down = solve_increasing(
                        |u| delta - self.gap(0, u),
                        None::<fn(f64) -> f64>,
                        lb,
                        us,
                        1e-15,
                    );
                    (down, up)
                }
            };
            cap.arcs.push(CapArc { piece: 0, u0, u1 });
            cap.length = p.arclength(u0, u1);
            return Ok(cap);
        }
        if delta >= self.width {
            return Ok(whole(cap));
        }
        // δ is below the width, so both walks stop before the antipode
        let np = body.pieces.len();
        let down = [-self.dir[0], -self.dir[1]];
        let mut arcs = Vec::new();
        let mut i = self.piece;
        let mut start = self.u_star;
        for _ in 0..=np {
            let p = &body.pieces[i];
            let (_, b) = p.domain();
            let (um, _) = p.extreme(down);
            let stop = if um > start && um < b { um } else { b };
            if self.gap(i, stop) <= delta && stop == b {
                arcs.push(CapArc { piece: i, u0: start, u1: stop });
                i = (i + 1) % np;
                start = body.pieces[i].domain().0;
            } else {
                let root = solve_increasing(|u| self.gap(i, u) - delta, None::<fn(f64) -> f64>, start, stop, 1e-15);
                arcs.push(CapArc { piece: i, u0: start, u1: root });
                break;
            }
        }
        let mut i = self.piece;
        let mut end = self.u_star;
        for _ in 0..=np {
            let p = &body.pieces[i];
            let (a, _) = p.domain();
            let (um, _) = p.extreme(down);
            let stop = if um < end && um > a { um } else { a };
            if self.gap(i, stop) <= delta && stop == a {
                arcs.push(CapArc { piece: i, u0: stop, u1: end });
                i = (i + np - 1) % np;
                end = body.pieces[i].domain().1;
            } else {
                let root = solve_increasing(|u| delta - self.gap(i, u), None::<fn(f64) -> f64>, stop, end, 1e-15);
                arcs.push(CapArc { piece: i, u0: root, u1: end });
                break;
            }
        }
        arcs.retain(|a| a.u1 > a.u0);
        cap.length = arcs
            .iter()
            .map(|a| body.pieces[a.piece].arclength(a.u0, a.u1))
            .sum();
        cap.arcs = merge_arcs(arcs);
        Ok(cap)
    }
}

// Joins the two halves that meet at the contact point.
fn merge_arcs(mut arcs: Vec<CapArc>) -> Vec<CapArc> {
    arcs.sort_by(|a, b| a.piece.cmp(&b.piece).then(a.u0.total_cmp(&b.u0)));
    let mut out: Vec<CapArc> = Vec::new();
    for a in arcs {
        if let Some(last) = out.last_mut() {
            if last.piece == a.piece && a.u0 <= last.u1 {
                last.u1 = last.u1.max(a.u1);
                continue;
            }
        }
        out.push(a);
    }
    out
}

/// TOML form of a body.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BodySpec {
    /// circle | ellipse | power | expflat | iterexp | support
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub semi_a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub semi_b: Option<f64>,
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
    pub t_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rotation: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dh: Option<Vec<f64>>,
}

impl BodySpec {
    pub fn build(&self) -> Result<ConvexBoundary> {
        let need = |v: Option<f64>, key: &str| {
            v.ok_or_else(|| Error::InvalidBody(format!("body `{}` requires `{key}`", self.kind)))
        };
        let body = match self.kind.as_str() {
            "circle" => ConvexBoundary::circle(self.radius.unwrap_or(1.0))?,
            "ellipse" => ConvexBoundary::ellipse(need(self.semi_a, "semi_a")?, need(self.semi_b, "semi_b")?)?,
            "power" => ConvexBoundary::flat_spot(Family::Power { m: need(self.m, "m")? }, self.t_max)?,
            "expflat" => ConvexBoundary::flat_spot(Family::ExpFlat { a: need(self.a, "a")? }, self.t_max)?,
            "iterexp" => ConvexBoundary::flat_spot(
                Family::IterExpFlat {
                    n: self
                        .n
                        .ok_or_else(|| Error::InvalidBody("body `iterexp` requires `n`".into()))?,
                    c: need(self.c, "c")?,
                    lambda: need(self.lambda, "lambda")?,
                },
                self.t_max,
            )?,
            "support" => {
                let (Some(h), Some(dh)) = (&self.h, &self.dh) else {
                    return Err(Error::InvalidBody("body `support` requires `h` and `dh`".into()));
                };
                ConvexBoundary::from_support(h.clone(), dh.clone())?
            }
            other => return Err(Error::InvalidBody(format!("unknown body kind `{other}`"))),
        };
        match self.rotation {
            Some(r) if r != 0.0 => body.rotated(r),
            _ => Ok(body),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Format(e.to_string()))
    }
}
