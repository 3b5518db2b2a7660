//! One function per subcommand. Each writes its artifacts and returns the
//! verdict line and exit code.

use std::f64::consts::PI;

use caplab_core::body::{unit, Sign};
use caplab_core::criterion::{decide, CriterionOptions, Verdict};
use caplab_core::grid::{
    curve_weights, hyperbolic_growth, opnorm_lower, random_bandlimited, square_function, strip_test, Ensemble,
    MeasureSource, StripSpec,
};
use caplab_core::oscint::{ft_cap_ratio, sigma_hat, vdc_scan, LocalCurve};
use caplab_core::quad::log_grid;
use caplab_core::{Error, GraphCurve, Result};
use rayon::prelude::*;

use crate::config::Params;
use crate::output::{line_plot, num, outline, Sink};

pub struct Outcome {
    pub line: String,
    pub code: i32,
}

fn ok(line: String) -> Result<Outcome> {
    Ok(Outcome { line, code: 0 })
}

fn curve(p: &Params) -> Result<GraphCurve> {
    p.curve_spec()?.build()
}

pub fn curve_info(p: &Params) -> Result<Outcome> {
    let c = curve(p)?;
    let sink = Sink::new(&p.out_dir(), &["curve.csv", "curve.svg"])?;
    let t_end = c.domain_end();
    let rows = (1..=200)
        .map(|i| {
            let t = t_end * i as f64 / 200.0;
            Ok(vec![num(t), num(c.eval(t, 0)?), num(c.eval(t, 1)?), num(c.eval(t, 2)?), num(c.h_eval(t)?)])
        })
        .collect::<Result<Vec<_>>>()?;
    sink.csv("curve.csv", &["t", "gamma", "gamma_prime", "gamma_second", "h"], &rows)?;
    let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r[0].parse().unwrap(), r[1].parse().unwrap())).collect();
    sink.svg("curve.svg", &line_plot(c.family().name(), "t", "gamma(t)", &[pts]))?;
    let b = c.b_estimate().map(num).unwrap_or_else(|_| "n/a".into());
    ok(format!(
        "curve {}: T = {}, k_circ = {}, gamma(T) = {}, b = {b}",
        c.family().name(),
        num(t_end),
        c.k_circ(),
        num(c.eval(t_end, 0)?)
    ))
}

pub fn caps(p: &Params) -> Result<Outcome> {
    let body = p.body_spec()?.build()?;
    let sink = Sink::new(&p.out_dir(), &["caps.csv", "caps.svg"])?;
    let d0 = match p.delta0 {
        Some(d) => d,
        None => body.delta0(360)?,
    };
    let d_min = p.delta_min.unwrap_or(1e-9);
    if !(d_min < d0) {
        return Err(Error::Precondition(format!("delta_min {d_min} must be below delta0 {d0}")));
    }
    let count = p.theta_grid.unwrap_or(36);
    let deltas = log_grid(d_min, d0, p.per_decade.unwrap_or(8) * ((d0 / d_min).log10().ceil() as usize) + 1);
    let rows = (0..count)
        .into_par_iter()
        .map(|i| {
            let a = PI * i as f64 / count as f64;
            let lam = body.lambda_many(unit(a), &deltas)?;
            Ok(deltas
                .iter()
                .zip(lam)
                .map(|(d, l)| vec![num(a), num(*d), num(l)])
                .collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>>>()?
        .concat();
    sink.csv("caps.csv", &["theta", "delta", "lambda_theta_delta"], &rows)?;
    let th = unit(p.rotation.unwrap_or(0.0) + 0.5 * PI);
    let cap = body.cap(th, d0, Sign::Plus)?;
    let marks: Vec<Vec<(f64, f64)>> = cap
        .points(&body, 64)
        .into_iter()
        .map(|a| a.into_iter().map(|q| (q[0], q[1])).collect())
        .collect();
    let poly: Vec<(f64, f64)> = body.polyline(720).into_iter().map(|q| (q[0], q[1])).collect();
    sink.svg("caps.svg", &outline(body.label(), &poly, &marks))?;
    let worst = rows
        .iter()
        .filter(|r| r[1] == num(deltas[0]))
        .map(|r| r[2].parse::<f64>().unwrap())
        .fold(0.0, f64::max);
    ok(format!(
        "caps: delta0 = {}, largest cap at delta = {} is {}",
        num(d0),
        num(d_min),
        num(worst)
    ))
}

pub fn ft(p: &Params) -> Result<Outcome> {
    let body = p.body_spec()?.build()?;
    let sink = Sink::new(&p.out_dir(), &["ft.csv", "ft.svg"])?;
    let (r_lo, r_hi) = (p.r_min.unwrap_or(10.0), p.r_max.unwrap_or(1e3));
    if !(r_lo >= 1.0 && r_hi > r_lo) {
        return Err(Error::Precondition(format!("need 1 <= r_min < r_max, got {r_lo}, {r_hi}")));
    }
    let count = p.theta_grid.unwrap_or(36);
    let per = p.per_decade.unwrap_or(8);
    let radii = log_grid(r_lo, r_hi, ((r_hi / r_lo).log10() * per as f64).round() as usize + 1);
    let pts: Vec<(f64, f64)> = (0..count)
        .flat_map(|i| radii.iter().map(move |&r| (PI * i as f64 / count as f64, r)))
        .collect();
    let rows = pts
        .par_iter()
        .map(|&(a, r)| {
            let th = unit(a);
            let s = sigma_hat(&body, [r * th[0], r * th[1]], 1e-10)?.value.norm();
            let lam = body.lambda(th, 1.0 / r)?;
            let ratio = ft_cap_ratio(&body, th, r)?;
            Ok(vec![num(a), num(r), num(s), num(lam), num(ratio)])
        })
        .collect::<Result<Vec<_>>>()?;
    sink.csv("ft.csv", &["theta", "r", "sigma_hat_abs", "lambda_theta_inv_r", "ratio"], &rows)?;
    let by_r: Vec<(f64, f64)> = radii
        .iter()
        .map(|&r| {
            let m = rows
                .iter()
                .filter(|row| row[1] == num(r))
                .map(|row| row[4].parse::<f64>().unwrap())
                .fold(0.0, f64::max);
            (r.log10(), m)
        })
        .collect();
    sink.svg("ft.svg", &line_plot("sup ratio", "log10 R", "sup |sigma_hat| / Lambda", &[by_r]))?;
    let sup = rows.iter().map(|r| r[4].parse::<f64>().unwrap()).fold(0.0, f64::max);
    ok(format!("ft: calibrated constant C = {}", num(sup)))
}

pub fn criterion(p: &Params) -> Result<Outcome> {
    let body = p.body_spec()?.build()?;
    let sink = Sink::new(&p.out_dir(), &["criterion.csv", "criterion.svg"])?;
    let opts = CriterionOptions {
        q: p.q.unwrap_or(2.0),
        delta0: p.delta0,
        delta_min: p.delta_min.unwrap_or(1e-12),
        theta_grid: p.theta_grid.unwrap_or(720),
    };
    let r = decide(&body, &opts)?;
    let mut rows: Vec<(f64, Vec<String>)> = r
        .theta_grid
        .iter()
        .zip(&r.integrals)
        .zip(&r.divergence_slope)
        .map(|((t, v), s)| {
            let a = t[1].atan2(t[0]).rem_euclid(PI);
            (a, vec![num(a), num(*v), num(*s)])
        })
        .collect();
    rows.sort_by(|x, y| x.0.total_cmp(&y.0));
    let plot: Vec<(f64, f64)> = rows.iter().map(|(a, row)| (*a, row[1].parse().unwrap())).collect();
    let rows: Vec<Vec<String>> = rows.into_iter().map(|r| r.1).collect();
    sink.csv("criterion.csv", &["theta", "cap_integral_lambda_q", "tail_exponent_kappa"], &rows)?;
    sink.svg("criterion.svg", &line_plot("cap integral", "theta", "integral of Lambda^q ddelta/delta", &[plot]))?;
    let code = match r.verdict {
        Verdict::Finite => 0,
        Verdict::Divergent => 4,
        Verdict::Inconclusive => 5,
    };
    Ok(Outcome {
        line: format!(
            "verdict: {} (q = {}, sup integral {} over [{}, {}])",
            r.verdict.as_str(),
            r.q,
            num(r.sup()),
            num(r.delta_min),
            num(r.delta0)
        ),
        code,
    })
}

pub fn partition(p: &Params) -> Result<Outcome> {
    let c = curve(p)?;
    let sink = Sink::new(&p.out_dir(), &["partition.csv", "wktkn.csv"])?;
    let k = p.k.unwrap_or(c.k_circ() + 8);
    let t = c.partition(k)?;
    let rows: Vec<Vec<String>> = t
        .t
        .iter()
        .zip(&t.rho)
        .enumerate()
        .map(|(n, (tn, rn))| vec![n.to_string(), num(*tn), num(*rn)])
        .collect();
    sink.csv("partition.csv", &["n", "t_kn", "rho_kn"], &rows)?;
    let scan = c.wktkn_scan(p.k_max.unwrap_or(30), p.eps.unwrap_or(0.1))?;
    let rows: Vec<Vec<String>> = scan.trace.iter().map(|(k, v)| vec![k.to_string(), num(*v)]).collect();
    sink.csv("wktkn.csv", &["k", "max_n_weighted_w_k_t_kn"], &rows)?;
    ok(format!(
        "partition k = {k}: t_k0 = {}, N_k = {}, b = {}; w_k t_kn scan max {} slope {}",
        num(t.t0),
        t.nk,
        num(t.b),
        num(scan.max),
        num(scan.slope)
    ))
}

pub fn vdc(p: &Params) -> Result<Outcome> {
    let c = curve(p)?;
    let sink = Sink::new(&p.out_dir(), &["vdc.csv", "vdc.svg"])?;
    let s = vdc_scan(&c, p.k_max.unwrap_or(14))?;
    let rows: Vec<Vec<String>> = s.trace.iter().map(|(k, v)| vec![k.to_string(), num(*v)]).collect();
    sink.csv("vdc.csv", &["k", "max_w_k_2_n_half_m_kn"], &rows)?;
    let pts: Vec<(f64, f64)> = s.trace.iter().map(|(k, v)| (*k as f64, v.log2())).collect();
    sink.svg("vdc.svg", &line_plot("van der Corput scan", "k", "log2 max", &[pts]))?;
    ok(format!("vdc: max {}, trend slope {}, upper-half slope {}", num(s.max), num(s.slope), num(s.tail_slope)))
}

pub fn grid_max(p: &Params) -> Result<Outcome> {
    let body = p.body_spec()?.build()?;
    let sink = Sink::new(&p.out_dir(), &["grid_max.csv"])?;
    let q = p.q.unwrap_or(2.0);
    let ens = Ensemble {
        n: p.grid.unwrap_or(256),
        side: p.side.unwrap_or(16.0),
        seed: p.seed(),
        random_fields: p.fields.unwrap_or(4),
        band: p.band.unwrap_or(16),
    };
    let r = opnorm_lower(MeasureSource::Body(&body), q, &ens)?;
    sink.csv(
        "grid_max.csv",
        &["q", "k_min", "k_max", "opnorm_lower_bound", "best_test"],
        &[vec![num(q), r.k_range.0.to_string(), r.k_range.1.to_string(), num(r.estimate), r.best.clone()]],
    )?;
    ok(format!("grid-max: ||M||_q >= {} (from {})", num(r.estimate), r.best))
}

pub fn strip(p: &Params) -> Result<Outcome> {
    let c = curve(p)?;
    let sink = Sink::new(&p.out_dir(), &["strip.csv"])?;
    let local = LocalCurve::new(c);
    let eps = p.eps.unwrap_or(local.eps);
    let local = local.with_aperture(eps, p.height.unwrap_or(1.0 / 16.0))?;
    let spec = StripSpec {
        q: p.q.unwrap_or(2.0),
        n: p.grid.unwrap_or(1024),
        eta_cells: p.eta_cells.unwrap_or(32),
        k_offsets: (0, p.k_max.unwrap_or(4)),
    };
    let r = strip_test(&local, &spec)?;
    let rows: Vec<Vec<String>> = r
        .rows
        .iter()
        .map(|row| vec![row.k.to_string(), row.points.to_string(), num(row.fraction_ok), num(row.partial_sum)])
        .collect();
    sink.csv("strip.csv", &["k", "f_points", "fraction_above_bound", "partial_sum_f_gamma_inv_q"], &rows)?;
    let worst = r.rows.iter().map(|row| row.fraction_ok).fold(1.0, f64::min);
    ok(format!("strip: k0 = {}, eta = {}, min fraction above bound {}", r.k0, num(r.eta), num(worst)))
}

pub fn squarefn(p: &Params) -> Result<Outcome> {
    let c = curve(p)?;
    let sink = Sink::new(&p.out_dir(), &["squarefn.csv"])?;
    let n = p.grid.unwrap_or(256);
    let src = MeasureSource::Graph {
        curve: &c,
        a: 0.0,
        b: c.domain_end(),
        normalized: false,
    };
    let side = match p.side {
        Some(s) => s,
        None => {
            let d = 2.0 * src.diameter().max(src.reach());
            let mut s = 1.0;
            while s < d {
                s *= 2.0;
            }
            s
        }
    };
    let exp = p.p.unwrap_or(2.0);
    let k_min = (-c.eval(c.domain_end(), 0)?.log2()).ceil().max(1.0) as i32;
    let w: Vec<(i32, f64)> = curve_weights(&c, n, side).into_iter().filter(|x| x.0 >= k_min).collect();
    let seed = p.seed();
    let count = p.fields.unwrap_or(10) as u64;
    let band = p.band.unwrap_or(48);
    let rows = (seed..seed + count)
        .map(|s| {
            let f = random_bandlimited(n, side, band, s)?;
            let r = square_function(&f, src, &w, exp)?.ratio.unwrap_or(0.0);
            Ok(vec![s.to_string(), num(exp), num(r)])
        })
        .collect::<Result<Vec<_>>>()?;
    sink.csv("squarefn.csv", &["seed", "p", "sf_norm_over_f_norm"], &rows)?;
    let best = rows.iter().map(|r| r[2].parse::<f64>().unwrap()).fold(0.0, f64::max);
    ok(format!("squarefn: max ||Sf||_p/||f||_p = {} over {count} fields", num(best)))
}

pub fn hyperbolic(p: &Params) -> Result<Outcome> {
    let sink = Sink::new(&p.out_dir(), &["hyperbolic.csv", "hyperbolic.svg"])?;
    let g = hyperbolic_growth(
        p.grid.unwrap_or(256),
        p.n_max.unwrap_or(8),
        p.eta0_scale.unwrap_or(1.0),
        p.seed(),
        p.fields.unwrap_or(4),
    )?;
    let rows: Vec<Vec<String>> = g.n_values.iter().zip(&g.estimates).map(|(n, e)| vec![n.to_string(), num(*e)]).collect();
    sink.csv("hyperbolic.csv", &["n", "maximal_norm_lower_bound"], &rows)?;
    let pts: Vec<(f64, f64)> = g.n_values.iter().zip(&g.estimates).map(|(n, e)| (*n as f64, *e)).collect();
    sink.svg("hyperbolic.svg", &line_plot("hyperbolic maximal probe", "N", "lower bound", &[pts]))?;
    ok(format!(
        "hyperbolic: exponent {}, rms residual sqrt(N) {}, log(N) {}",
        num(g.exponent),
        num(g.residual_sqrt),
        num(g.residual_log)
    ))
}
