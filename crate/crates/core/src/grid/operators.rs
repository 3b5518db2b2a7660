//! Averaging, maximal and square-function operators on the grid.

use num_complex::Complex64;
use rayon::prelude::*;

use super::{frequency, k_top, random_bandlimited, Field2D, MeasureSource, SpectralProjector};
use crate::curve::GraphCurve;
use crate::error::{Error, Result};
use crate::oscint::LocalCurve;
use crate::quad::fit_line;

fn convolve_spectrum(fs: &[Complex64], ks: &[Complex64]) -> Vec<Complex64> {
    fs.iter().zip(ks).map(|(a, b)| a * b).collect()
}

fn check_scale(src: &MeasureSource<'_>, k: i32, side: f64) -> Result<()> {
    if 2f64.powi(k) * src.diameter().max(src.reach()) >= 0.5 * side {
        return Err(Error::Scale { k });
    }
    Ok(())
}

/// A_k f(x) = ∫ f(x - 2^k y) dμ(y) for the measure described by `src`.
pub fn avg_ak(field: &Field2D, src: MeasureSource<'_>, k: i32) -> Result<Field2D> {
    check_scale(&src, k, field.side())?;
    avg_periodic(field, &field.spectrum(), src, k)
}

// Same without the wraparound check, for callers that handle periodicity.
fn avg_periodic(field: &Field2D, spec: &[Complex64], src: MeasureSource<'_>, k: i32) -> Result<Field2D> {
    let m = src.discretize(k, field.spacing())?;
    let ks = m.kernel_spectrum(field.n(), field.side());
    Field2D::from_spectrum(field.n(), field.side(), convolve_spectrum(spec, &ks))
}

/// sup over k_min <= k <= k_max of |A_k f|.
pub fn lacunary_max(field: &Field2D, src: MeasureSource<'_>, k_min: i32, k_max: i32) -> Result<Field2D> {
    if k_max < k_min {
        return Err(Error::EmptyRange(format!("k range {k_min}..={k_max}")));
    }
    for k in k_min..=k_max {
        check_scale(&src, k, field.side())?;
    }
    let spec = field.spectrum();
    let parts = (k_min..=k_max)
        .into_par_iter()
        .map(|k| avg_periodic(field, &spec, src, k))
        .collect::<Result<Vec<_>>>()?;
    let mut out = parts[0].map(f64::abs);
    for p in &parts[1..] {
        out = out.zip_with(p, |a, b| a.max(b.abs()))?;
    }
    Ok(out)
}

/// Dyadic scales k whose dilates are at least four cells across and avoid
/// wraparound.
pub fn admissible_scales(src: &MeasureSource<'_>, n: usize, side: f64) -> Result<(i32, i32)> {
    let d = src.diameter().max(src.reach());
    let h = side / n as f64;
    let mut hi = 0;
    while 2f64.powi(hi) * d < 0.5 * side {
        hi += 1;
    }
    while 2f64.powi(hi) * d >= 0.5 * side {
        hi -= 1;
    }
    let mut lo = hi;
    while 2f64.powi(lo - 1) * src.diameter() >= 4.0 * h {
        lo -= 1;
    }
    if lo > hi {
        return Err(Error::Resolution(format!("no admissible scale on an {n}-point grid")));
    }
    Ok((lo, hi))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub n: usize,
    pub side: f64,
    pub seed: u64,
    pub random_fields: usize,
    pub band: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OpnormReport {
    pub estimate: f64,
    pub best: String,
    pub k_range: (i32, i32),
}

/// max ‖Mf‖_q/‖f‖_q over horizontal, vertical and diagonal strips of
/// several widths and seeded random band-limited fields.
pub fn opnorm_lower(src: MeasureSource<'_>, q: f64, ens: &Ensemble) -> Result<OpnormReport> {
    let (n, side) = (ens.n, ens.side);
    let (k_min, k_max) = admissible_scales(&src, n, side)?;
    let h = side / n as f64;
    let mut tests: Vec<(String, Field2D)> = Vec::new();
    for cells in [1.0, 2.0, 4.0, 8.0] {
        let eta = cells * h;
        tests.push((format!("strip-h-{cells}"), Field2D::from_fn(n, side, |_, y| ((y.abs() <= eta) as u8) as f64)?));
        tests.push((format!("strip-v-{cells}"), Field2D::from_fn(n, side, |x, _| ((x.abs() <= eta) as u8) as f64)?));
        let period = side;
        tests.push((
            format!("strip-d-{cells}"),
            Field2D::from_fn(n, side, |x, y| {
                let d = (x - y).rem_euclid(period);
                let d = d.min(period - d) / std::f64::consts::SQRT_2;
                ((d <= eta) as u8) as f64
            })?,
        ));
    }
    for i in 0..ens.random_fields {
        tests.push((format!("random-{i}"), random_bandlimited(n, side, ens.band, ens.seed + i as u64)?));
    }
    let vals = tests
        .par_iter()
        .map(|(name, f)| {
            let m = lacunary_max(f, src, k_min, k_max)?;
            Ok((m.lp_norm(q) / f.lp_norm(q), name.clone()))
        })
        .collect::<Result<Vec<_>>>()?;
    let best = vals
        .into_iter()
        .fold((0.0, String::new()), |a, b| if b.0 > a.0 { b } else { a });
    Ok(OpnormReport {
        estimate: best.0,
        best: best.1,
        k_range: (k_min, k_max),
    })
}

/// Parameters of the thin-strip test. Lengths are in units where the
/// torus has side 2; the strip E_η = {|x₂| <= η} is a full band.
#[derive(Debug, Clone, PartialEq)]
pub struct StripSpec {
    pub q: f64,
    pub n: usize,
    /// Strip half-height in grid cells.
    pub eta_cells: usize,
    /// Scales k0 + from ..= k0 + to.
    pub k_offsets: (i32, i32),
}

#[derive(Debug, Clone, PartialEq)]
pub struct StripRow {
    pub k: i32,
    pub points: usize,
    pub fraction_ok: f64,
    /// Σ_{j<=k} |F_{η,j}| [γ⁻¹(2^{-j}η)]^q / (4η).
    pub partial_sum: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StripReport {
    pub k0: i32,
    pub eta: f64,
    pub f_norm: f64,
    pub disjoint: bool,
    pub rows: Vec<StripRow>,
}

pub const STRIP_SIDE: f64 = 2.0;

/// Tests M f_η >= 0.9 (2η)^{-1/q} γ⁻¹(2^{-k}η) on the sets
/// F_{η,k} = {|x₁| <= 1/4, 2^k L <= x₂ <= 2^k L + η/4} for f_η = (4η)^{-1/q} 1_E.
/// Because E is a band, wraparound along x₁ leaves every average unchanged.
pub fn strip_test(local: &LocalCurve, spec: &StripSpec) -> Result<StripReport> {
    let n = spec.n;
    if spec.eta_cells < 8 {
        return Err(Error::Resolution(format!("strip is {} cells high, need at least 8", spec.eta_cells)));
    }
    let field0 = Field2D::zeros(n, STRIP_SIDE)?;
    let h = field0.spacing();
    let eta = spec.eta_cells as f64 * h;
    let q = spec.q;
    let l = local.height;
    let g_eps = local.gamma(local.eps);
    let need = eta * (1.0 / (4.0 * l)).max(1.0 / g_eps);
    let k0 = need.log2().ceil() as i32;
    let k0 = if 2f64.powi(k0 - 1) >= need { k0 - 1 } else { k0 };
    let ks: Vec<i32> = (k0 + spec.k_offsets.0..=k0 + spec.k_offsets.1).collect();
    for &k in &ks {
        let s = 2f64.powi(k);
        // the heights sampled from F must not reach the next copy of E
        if s * g_eps + eta / 4.0 >= STRIP_SIDE - eta {
            return Err(Error::Scale { k });
        }
    }
    let amp = (4.0 * eta).powf(-1.0 / q);
    // cell [x₂, x₂ + h) belongs to E when it lies in [-η, η)
    let f = Field2D::from_fn(n, STRIP_SIDE, |_, y| if y >= -eta - 1e-12 && y < eta - 1e-12 { amp } else { 0.0 })?;
    let f_norm = f.lp_norm(q);
    let spec_f = f.spectrum();
    let src = MeasureSource::Local(local);
    let parts = ks
        .par_iter()
        .map(|&k| avg_periodic(&f, &spec_f, src, k))
        .collect::<Result<Vec<_>>>()?;
    let mut mf = parts[0].map(f64::abs);
    for p in &parts[1..] {
        mf = mf.zip_with(p, |a, b| a.max(b.abs()))?;
    }
    let inverse = |s: f64| -> Result<f64> {
        match &local.profile {
            crate::oscint::LocalProfile::Graph(c) => c.gamma_inverse(s),
            crate::oscint::LocalProfile::Circle { radius } => {
                let r = *radius;
                Ok((s * (2.0 * r - s)).sqrt())
            }
        }
    };
    let mut rows = Vec::new();
    let mut partial = 0.0;
    let mut sets: Vec<Vec<(usize, usize)>> = Vec::new();
    for &k in &ks {
        let s = 2f64.powi(k);
        let bound = 0.9 * (2.0 * eta).powf(-1.0 / q) * inverse(eta / s)?;
        let mut pts = Vec::new();
        for i in 0..n {
            let y = (f.coord(i) - s * l + 1e-12).rem_euclid(STRIP_SIDE);
            if y > eta / 4.0 + 2e-12 {
                continue;
            }
            for j in 0..n {
                if f.coord(j).abs() <= 0.25 + 1e-12 {
                    pts.push((i, j));
                }
            }
        }
        let ok = pts.iter().filter(|&&(i, j)| mf.get(i, j) >= bound).count();
        partial += (eta / 4.0) * inverse(eta / s)?.powf(q) / (4.0 * eta);
        rows.push(StripRow {
            k,
            points: pts.len(),
            fraction_ok: if pts.is_empty() { 0.0 } else { ok as f64 / pts.len() as f64 },
            partial_sum: partial,
        });
        sets.push(pts);
    }
    let mut all: Vec<(usize, usize)> = sets.iter().flatten().copied().collect();
    let total = all.len();
    all.sort_unstable();
    all.dedup();
    Ok(StripReport {
        k0,
        eta,
        f_norm,
        disjoint: all.len() == total,
        rows,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SquareFunction {
    pub sf: Field2D,
    /// None when f = 0.
    pub ratio: Option<f64>,
    pub k_range: (i32, i32),
}

/// Sf = (Σ_k w_k² |P_k A f|²)^{1/2} with A the k = 0 average of `src` and
/// weights given for each k used.
pub fn square_function(field: &Field2D, src: MeasureSource<'_>, weights: &[(i32, f64)], p: f64) -> Result<SquareFunction> {
    let mut out = square_function_multi(field, src, weights, &[p])?;
    Ok(out.remove(0))
}

/// Same for several exponents at once (the field Sf does not depend on p).
pub fn square_function_multi(field: &Field2D, src: MeasureSource<'_>, weights: &[(i32, f64)], ps: &[f64]) -> Result<Vec<SquareFunction>> {
    if weights.is_empty() {
        return Err(Error::EmptyRange("no weights".into()));
    }
    check_scale(&src, 0, field.side())?;
    let (n, side) = (field.n(), field.side());
    let m = src.discretize(0, field.spacing())?;
    let af = convolve_spectrum(&field.spectrum(), &m.kernel_spectrum(n, side));
    let parts = weights
        .par_iter()
        .map(|&(k, w)| {
            let pk = SpectralProjector::new(k, n, side)?;
            let g = Field2D::from_spectrum(n, side, pk.apply_spectrum(&af))?;
            Ok(g.map(|v| (w * v).powi(2)))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut acc = Field2D::zeros(n, side)?;
    for part in &parts {
        acc = acc.zip_with(part, |a, b| a + b)?;
    }
    let sf = acc.map(f64::sqrt);
    let k_range = (weights.iter().map(|w| w.0).min().unwrap(), weights.iter().map(|w| w.0).max().unwrap());
    Ok(ps
        .iter()
        .map(|&p| {
            let den = field.lp_norm(p);
            SquareFunction {
                sf: sf.clone(),
                ratio: if den > 0.0 { Some(sf.lp_norm(p) / den) } else { None },
                k_range,
            }
        })
        .collect())
}

/// (k, w_k) for every k in 1..=k_top where w_k is defined.
pub fn curve_weights(curve: &GraphCurve, n: usize, side: f64) -> Vec<(i32, f64)> {
    (1..=k_top(n, side)).filter_map(|k| curve.weight(k).ok().map(|w| (k, w))).collect()
}

/// 𝔐f = sup over r = T 2^{-j}, j = 0..=J, of r^{-1} ∫_0^r |f(x₁ - t, x₂ - γ(t))| dt,
/// with J the last level at least four grid spacings long.
pub fn curve_max(field: &Field2D, curve: &GraphCurve) -> Result<(Field2D, Vec<f64>)> {
    let t_end = curve.domain_end();
    let h = field.spacing();
    let mut radii = vec![t_end];
    while radii.last().unwrap() * 0.5 >= 4.0 * h {
        radii.push(radii.last().unwrap() * 0.5);
    }
    let abs = field.map(f64::abs);
    let spec = abs.spectrum();
    let parts = radii
        .par_iter()
        .map(|&r| {
            let src = MeasureSource::Graph {
                curve,
                a: 0.0,
                b: r,
                normalized: true,
            };
            check_scale(&src, 0, field.side())?;
            avg_periodic(&abs, &spec, src, 0)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = parts[0].clone();
    for p in &parts[1..] {
        out = out.zip_with(p, f64::max)?;
    }
    Ok((out, radii))
}

/// η₀(s) = exp(-s²/(2 scale²)).
pub fn eta0(s: f64, scale: f64) -> f64 {
    (-0.5 * (s / scale).powi(2)).exp()
}

/// 𝕄_N f = sup_{|k|<=N} |T_k f| with T_k the multiplier η₀(2^{2k} ξ₁ξ₂).
/// Also returns 𝕄_j f's L² norm for every j <= N.
pub fn hyperbolic_max(field: &Field2D, big_n: u32, eta0_scale: f64) -> Result<(Field2D, Vec<f64>)> {
    let (n, side) = (field.n(), field.side());
    let spec = field.spectrum();
    let ks: Vec<i32> = (-(big_n as i32)..=big_n as i32).collect();
    let parts = ks
        .par_iter()
        .map(|&k| {
            let s = 4f64.powi(k);
            let mut buf = spec.clone();
            for row in 0..n {
                for col in 0..n {
                    let (a, b) = frequency(row, col, n, side);
                    buf[row * n + col] *= eta0(s * a * b, eta0_scale);
                }
            }
            Ok((k, Field2D::from_spectrum(n, side, buf)?.map(f64::abs)))
        })
        .collect::<Result<Vec<_>>>()?;
    let get = |k: i32| &parts[(k + big_n as i32) as usize].1;
    let mut acc = get(0).clone();
    let mut norms = vec![acc.lp_norm(2.0)];
    for j in 1..=big_n as i32 {
        acc = acc.zip_with(get(j), f64::max)?.zip_with(get(-j), f64::max)?;
        norms.push(acc.lp_norm(2.0));
    }
    Ok((acc, norms))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrowthReport {
    pub n_values: Vec<u32>,
    /// Lower bounds for ‖𝕄_N‖_{2→2}.
    pub estimates: Vec<f64>,
    /// Fitted exponent α in estimate ≈ C N^α over N >= 1.
    pub exponent: f64,
    /// Relative RMS residual of the best fits c·√N and c·log(1+N).
    pub residual_sqrt: f64,
    pub residual_log: f64,
}

/// Lower bounds for ‖𝕄_N‖₂ over N = 0..=n_max from an ensemble of seeded
/// random fields (full band) and band-limited fields.
pub fn hyperbolic_growth(n: usize, n_max: u32, eta0_scale: f64, seed: u64, fields: usize) -> Result<GrowthReport> {
    let mut tests = Vec::new();
    for i in 0..fields {
        let band = if i % 2 == 0 { n / 2 - 1 } else { n / 8 };
        tests.push(random_bandlimited(n, 1.0, band, seed + i as u64)?);
    }
    let mut estimates = vec![0.0f64; n_max as usize + 1];
    for f in &tests {
        let base = f.lp_norm(2.0);
        let (_, norms) = hyperbolic_max(f, n_max, eta0_scale)?;
        for (e, v) in estimates.iter_mut().zip(norms) {
            *e = e.max(v / base);
        }
    }
    let n_values: Vec<u32> = (0..=n_max).collect();
    let xs: Vec<f64> = (1..=n_max).map(|v| (v as f64).ln()).collect();
    let ys: Vec<f64> = estimates[1..].iter().map(|v| v.ln()).collect();
    let exponent = fit_line(&xs, &ys).0;
    let residual = |g: &dyn Fn(f64) -> f64| -> f64 {
        let pairs: Vec<(f64, f64)> = (1..=n_max).map(|v| (g(v as f64), estimates[v as usize])).collect();
        let c = pairs.iter().map(|p| p.0 * p.1).sum::<f64>() / pairs.iter().map(|p| p.0 * p.0).sum::<f64>();
        let rms = (pairs.iter().map(|p| ((c * p.0 - p.1) / p.1).powi(2)).sum::<f64>() / pairs.len() as f64).sqrt();
        rms
    };
    Ok(GrowthReport {
        n_values,
        exponent,
        residual_sqrt: residual(&|v| v.sqrt()),
        residual_log: residual(&|v| (1.0 + v).ln()),
        estimates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::body::ConvexBoundary;
    use approx::assert_relative_eq;

    #[test]
    fn constant_field_is_scaled_by_the_mass() {
        let c = ConvexBoundary::circle(1.0).unwrap();
        let one = Field2D::constant(64, 1.0, 1.0).unwrap();
        let a = avg_ak(&one, MeasureSource::Body(&c), -3).unwrap();
        for v in a.data() {
            assert_relative_eq!(*v, c.perimeter(), max_relative = 1e-12);
        }
        assert!(matches!(avg_ak(&one, MeasureSource::Body(&c), -1), Err(Error::Scale { k: -1 })));
    }

    #[test]
    fn fft_path_matches_direct_sum() {
        let c = ConvexBoundary::ellipse(1.0, 0.6).unwrap();
        let f = random_bandlimited(32, 1.0, 8, 5).unwrap();
        let src = MeasureSource::Body(&c);
        let a = avg_ak(&f, src, -3).unwrap();
        let m = src.discretize(-3, f.spacing()).unwrap();
        for (i, j) in [(0, 0), (5, 17), (31, 2)] {
            assert_relative_eq!(a.get(i, j), m.apply_at(&f, i, j), epsilon = 1e-12);
        }
    }

    #[test]
    fn curve_maximal_function_of_one() {
        let g = GraphCurve::power(4.0).unwrap();
        let one = Field2D::constant(64, 4.0, 1.0).unwrap();
        let (m, radii) = curve_max(&one, &g).unwrap();
        assert!(radii.len() > 2);
        for v in m.data() {
            assert_relative_eq!(*v, 1.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn zero_field_has_no_ratio() {
        let g = GraphCurve::power(4.0).unwrap();
        let z = Field2D::zeros(32, 4.0).unwrap();
        let w = curve_weights(&g, 32, 4.0);
        let src = MeasureSource::Graph {
            curve: &g,
            a: 0.0,
            b: 1.0,
            normalized: false,
        };
        let s = square_function(&z, src, &w, 2.0).unwrap();
        assert!(s.ratio.is_none());
        assert!(s.sf.data().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn hyperbolic_norms_grow_with_n() {
        let f = random_bandlimited(32, 1.0, 15, 2).unwrap();
        let (_, norms) = hyperbolic_max(&f, 4, 1.0).unwrap();
        assert!(norms.windows(2).all(|w| w[1] >= w[0]));
        assert!(norms[0] <= f.lp_norm(2.0) * (1.0 + 1e-12));
    }
}
