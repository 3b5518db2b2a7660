//! Small numerical kernels shared by the analysis modules: Gauss-Legendre
//! rules, adaptive smooth quadrature, bracketed root finding and line fits.

use std::sync::OnceLock;

/// Nodes and weights of an n-point Gauss-Legendre rule on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    /// Newton iteration on the Legendre recurrence, started from the
    /// Chebyshev-like asymptotic guess.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        GaussRule { nodes, weights }
    }

    /// Applies the rule on [a, b].
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let c = 0.5 * (a + b);
        let r = 0.5 * (b - a);
        let mut s = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            s += w * f(c + r * x);
        }
        s * r
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for j in 2..=n {
        let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

pub fn gauss6() -> &'static GaussRule {
    static R: OnceLock<GaussRule> = OnceLock::new();
    R.get_or_init(|| GaussRule::new(6))
}

pub fn gauss10() -> &'static GaussRule {
    static R: OnceLock<GaussRule> = OnceLock::new();
    R.get_or_init(|| GaussRule::new(10))
}

/// Adaptive Gauss-Legendre integration of a smooth function. Each interval
/// is compared against its two halves; recursion stops at `rel_tol` or at
/// depth 40.
pub fn integrate_smooth<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, rel_tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let g = gauss10();
    let whole = g.integrate(a, b, f);
    adapt(f, g, a, b, whole, rel_tol, whole.abs().max(1e-300), 0)
}

#[allow(clippy::too_many_arguments)]
fn adapt<F: Fn(f64) -> f64>(
    f: &F,
    g: &GaussRule,
    a: f64,
    b: f64,
    whole: f64,
    rel_tol: f64,
    scale: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let left = g.integrate(a, m, f);
    let right = g.integrate(m, b, f);
    let sum = left + right;
    if depth >= 40 || (sum - whole).abs() <= rel_tol * scale.max(sum.abs()) {
        return sum;
    }
    adapt(f, g, a, m, left, rel_tol, scale, depth + 1)
        + adapt(f, g, m, b, right, rel_tol, scale, depth + 1)
}

/// Root of an increasing function on [lo, hi] with f(lo) <= 0 <= f(hi).
/// Bisection to `rel_tol`, followed by Newton polish when `df` is given and
/// the Newton step stays inside the final bracket.
pub fn solve_increasing<F, D>(f: F, df: Option<D>, mut lo: f64, mut hi: f64, rel_tol: f64) -> f64
where
    F: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if hi - lo <= rel_tol * hi.abs().max(lo.abs()) * 0.25 {
            break;
        }
        let v = f(mid);
        if v.is_nan() || v <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut x = 0.5 * (lo + hi);
    if let Some(df) = df {
        for _ in 0..3 {
            let d = df(x);
            let v = f(x);
            if !(d.is_finite() && v.is_finite()) || d == 0.0 {
                break;
            }
            let nx = x - v / d;
            if !(nx >= lo && nx <= hi) {
                break;
            }
            x = nx;
        }
    }
    x
}

/// Least-squares slope and intercept of y against x.
pub fn fit_line(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    if x.len() < 2 {
        return (0.0, y.first().copied().unwrap_or(0.0));
    }
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
    }
    if sxx == 0.0 {
        return (0.0, my);
    }
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Logarithmically spaced grid from `a` to `b` inclusive.
pub fn log_grid(a: f64, b: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![a];
    }
    let (la, lb) = (a.ln(), b.ln());
    (0..count)
        .map(|i| {
            if i == count - 1 {
                b
            } else {
                (la + (lb - la) * i as f64 / (count - 1) as f64).exp()
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gauss_rules_integrate_polynomials_exactly() {
        for n in [1usize, 2, 5, 6, 10, 16] {
            let r = GaussRule::new(n);
            assert_relative_eq!(r.weights.iter().sum::<f64>(), 2.0, max_relative = 1e-14);
            let deg = 2 * n - 1;
            let v = r.integrate(0.0, 1.0, |x| x.powi(deg as i32));
            assert_relative_eq!(v, 1.0 / (deg as f64 + 1.0), max_relative = 1e-13);
        }
    }

    #[test]
    fn adaptive_integration_of_sqrt() {
        let v = integrate_smooth(&|x: f64| x.sqrt(), 0.0, 1.0, 1e-13);
        assert_relative_eq!(v, 2.0 / 3.0, max_relative = 1e-11);
    }

    #[test]
    fn root_of_cubic() {
        let x = solve_increasing(|x| x * x * x - 2.0, Some(|x: f64| 3.0 * x * x), 0.0, 2.0, 1e-14);
        assert_relative_eq!(x, 2f64.cbrt(), max_relative = 1e-14);
    }

    #[test]
    fn line_fit_recovers_slope() {
        let x: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v - 1.0).collect();
        let (s, c) = fit_line(&x, &y);
        assert_relative_eq!(s, 3.0, max_relative = 1e-14);
        assert_relative_eq!(c, -1.0, max_relative = 1e-13);
    }
}
