//! A periodic square grid: fields, Fourier transforms, the dyadic
//! frequency decomposition, discrete curve measures and the maximal and
//! square-function operators built from them.

use std::collections::HashMap;
use std::f64::consts::{PI, TAU};
use std::io::{Read, Write};
use std::path::Path;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

mod measure;
mod operators;

pub use measure::{DiscreteMeasure, MeasureSource};
pub use operators::*;

/// Name of the generator behind every random ensemble.
pub const RNG_NAME: &str = "chacha8-v1";

/// Real samples on an n×n grid over the torus [0, side)².
#[derive(Debug, Clone, PartialEq)]
pub struct Field2D {
    n: usize,
    side: f64,
    data: Vec<f64>,
}

impl Field2D {
    pub fn zeros(n: usize, side: f64) -> Result<Self> {
        check_size(n)?;
        if !(side > 0.0 && side.is_finite()) {
            return Err(Error::Precondition(format!("side must be positive, got {side}")));
        }
        Ok(Field2D {
            n,
            side,
            data: vec![0.0; n * n],
        })
    }

    pub fn constant(n: usize, side: f64, v: f64) -> Result<Self> {
        let mut f = Self::zeros(n, side)?;
        f.data.iter_mut().for_each(|x| *x = v);
        Ok(f)
    }

    pub fn from_vec(n: usize, side: f64, data: Vec<f64>) -> Result<Self> {
        let mut f = Self::zeros(n, side)?;
        if data.len() != n * n {
            return Err(Error::Precondition(format!("expected {} samples, got {}", n * n, data.len())));
        }
        f.data = data;
        Ok(f)
    }

    /// Samples x ↦ g(x₁, x₂) with coordinates in [-side/2, side/2).
    pub fn from_fn<G: Fn(f64, f64) -> f64>(n: usize, side: f64, g: G) -> Result<Self> {
        let mut f = Self::zeros(n, side)?;
        for i in 0..n {
            let y = f.coord(i);
            for j in 0..n {
                f.data[i * n + j] = g(f.coord(j), y);
            }
        }
        Ok(f)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn side(&self) -> f64 {
        self.side
    }

    pub fn spacing(&self) -> f64 {
        self.side / self.n as f64
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Row i holds x₂ = coord(i); column j holds x₁ = coord(j).
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.n + col]
    }

    /// Centered coordinate of grid index i.
    pub fn coord(&self, i: usize) -> f64 {
        let h = self.spacing();
        if i < self.n / 2 {
            i as f64 * h
        } else {
            (i as f64 - self.n as f64) * h
        }
    }

    /// (h² Σ |f|^p)^{1/p}.
    pub fn lp_norm(&self, p: f64) -> f64 {
        let h2 = self.spacing().powi(2);
        if p.is_infinite() {
            return self.data.iter().fold(0.0, |m, v| m.max(v.abs()));
        }
        (h2 * self.data.iter().map(|v| v.abs().powf(p)).sum::<f64>()).powf(1.0 / p)
    }

    /// L² norm computed from the Fourier coefficients.
    pub fn spectral_l2(&self) -> f64 {
        let s = self.spectrum();
        let n2 = (self.n * self.n) as f64;
        (self.spacing().powi(2) * s.iter().map(|c| c.norm_sqr()).sum::<f64>() / n2).sqrt()
    }

    pub fn map<G: Fn(f64) -> f64>(&self, g: G) -> Field2D {
        Field2D {
            n: self.n,
            side: self.side,
            data: self.data.iter().map(|&v| g(v)).collect(),
        }
    }

    pub fn zip_with<G: Fn(f64, f64) -> f64>(&self, other: &Field2D, g: G) -> Result<Field2D> {
        self.same_shape(other)?;
        Ok(Field2D {
            n: self.n,
            side: self.side,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| g(a, b)).collect(),
        })
    }

    fn same_shape(&self, other: &Field2D) -> Result<()> {
        if self.n != other.n || self.side != other.side {
            return Err(Error::Precondition("fields live on different grids".into()));
        }
        Ok(())
    }

    /// Unnormalized forward DFT.
    pub fn spectrum(&self) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = self.data.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        fft2(&mut buf, self.n, false);
        buf
    }

    /// Real part of the inverse DFT of `spec` (including the 1/n² factor).
    pub fn from_spectrum(n: usize, side: f64, mut spec: Vec<Complex64>) -> Result<Field2D> {
        fft2(&mut spec, n, true);
        let s = 1.0 / (n * n) as f64;
        Field2D::from_vec(n, side, spec.iter().map(|c| c.re * s).collect())
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let mut head = [0u8; 16];
        head[..4].copy_from_slice(b"CAPF");
        head[4..8].copy_from_slice(&(self.n as u32).to_le_bytes());
        w.write_all(&head)?;
        let mut bytes = Vec::with_capacity(self.data.len() * 8);
        for v in &self.data {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&bytes)?;
        Ok(())
    }

    /// Reads a field written by `write_to`; the side is not stored and is
    /// set to 1.
    pub fn read_from<R: Read>(mut r: R) -> Result<Field2D> {
        let mut head = [0u8; 16];
        r.read_exact(&mut head)?;
        if &head[..4] != b"CAPF" {
            return Err(Error::Format("missing CAPF magic".into()));
        }
        let n = u32::from_le_bytes(head[4..8].try_into().unwrap()) as usize;
        check_size(n)?;
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        if bytes.len() != n * n * 8 {
            return Err(Error::Format(format!("expected {} data bytes, found {}", n * n * 8, bytes.len())));
        }
        let data = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Field2D::from_vec(n, 1.0, data)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_to(std::io::BufWriter::new(f))
    }

    pub fn load(path: &Path) -> Result<Field2D> {
        Field2D::read_from(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

fn check_size(n: usize) -> Result<()> {
    if n < 2 || !n.is_power_of_two() {
        return Err(Error::Precondition(format!("grid size must be a power of two, got {n}")));
    }
    Ok(())
}

type Plan = (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>);

fn plans(n: usize) -> Plan {
    static CACHE: OnceLock<Mutex<HashMap<usize, Plan>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut map = cache.lock().unwrap();
    map.entry(n)
        .or_insert_with(|| {
            let mut p = FftPlanner::new();
            (p.plan_fft_forward(n), p.plan_fft_inverse(n))
        })
        .clone()
}

fn transpose(buf: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in i + 1..n {
            buf.swap(i * n + j, j * n + i);
        }
    }
}

/// In-place unnormalized 2D DFT of a row-major n×n array.
pub fn fft2(buf: &mut [Complex64], n: usize, inverse: bool) {
    let (fwd, inv) = plans(n);
    let plan = if inverse { inv } else { fwd };
    let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
    plan.process_with_scratch(buf, &mut scratch);
    transpose(buf, n);
    plan.process_with_scratch(buf, &mut scratch);
    transpose(buf, n);
}

/// Signed integer frequency of DFT index i.
pub fn freq_index(i: usize, n: usize) -> f64 {
    if i <= n / 2 {
        i as f64
    } else {
        i as f64 - n as f64
    }
}

/// Angular frequencies (ξ₁, ξ₂) of DFT bin (row, col).
pub fn frequency(row: usize, col: usize, n: usize, side: f64) -> (f64, f64) {
    let s = TAU / side;
    (s * freq_index(col, n), s * freq_index(row, n))
}

fn psi(u: f64) -> f64 {
    if u > 0.0 {
        (-1.0 / u).exp()
    } else {
        0.0
    }
}

/// The smooth bump β∘: 1 on [0, 1/2], 0 on [1, ∞), monotone in between.
pub fn beta_circ(r: f64) -> f64 {
    let u = 2.0 * (1.0 - r.abs());
    if u >= 1.0 {
        return 1.0;
    }
    if u <= 0.0 {
        return 0.0;
    }
    let a = psi(u);
    a / (a + psi(1.0 - u))
}

/// Multiplier of P_k at radial frequency |ξ|.
pub fn projector_symbol(k: i32, r: f64) -> f64 {
    if k == 0 {
        beta_circ(r)
    } else {
        beta_circ(r * 2f64.powi(-k)) - beta_circ(r * 2f64.powi(1 - k))
    }
}

/// Smallest K with Σ_{k<=K} P_k = identity on the grid.
pub fn k_top(n: usize, side: f64) -> i32 {
    let xi_max = PI * n as f64 / side * std::f64::consts::SQRT_2;
    let mut k = 0;
    while 2f64.powi(-k) * xi_max > 0.5 {
        k += 1;
    }
    k
}

/// Precomputed P_k multiplier on the grid frequencies.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralProjector {
    pub k: i32,
    multiplier: Vec<f64>,
}

impl SpectralProjector {
    pub fn new(k: i32, n: usize, side: f64) -> Result<Self> {
        let top = k_top(n, side);
        if k < 0 || k > top {
            return Err(Error::range(k as f64, 0.0, top as f64));
        }
        let mut multiplier = vec![0.0; n * n];
        for row in 0..n {
            for col in 0..n {
                let (a, b) = frequency(row, col, n, side);
                multiplier[row * n + col] = projector_symbol(k, a.hypot(b));
            }
        }
        Ok(SpectralProjector { k, multiplier })
    }

    pub fn multiplier(&self) -> &[f64] {
        &self.multiplier
    }

    pub fn apply_spectrum(&self, spec: &[Complex64]) -> Vec<Complex64> {
        spec.iter().zip(&self.multiplier).map(|(c, m)| c * m).collect()
    }
}

/// P_k f.
pub fn pk_project(field: &Field2D, k: i32) -> Result<Field2D> {
    let p = SpectralProjector::new(k, field.n, field.side)?;
    Field2D::from_spectrum(field.n, field.side, p.apply_spectrum(&field.spectrum()))
}

/// Real field Σ c_m exp(2πi m·x/side) over integer modes |m₁|, |m₂| <= band.
/// Coefficients are drawn in a fixed mode order, so the same seed gives the
/// same function at every grid size.
pub fn random_bandlimited(n: usize, side: f64, band: usize, seed: u64) -> Result<Field2D> {
    check_size(n)?;
    if 2 * band >= n {
        return Err(Error::Resolution(format!("band {band} does not fit on an {n}-point grid")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut spec = vec![Complex64::new(0.0, 0.0); n * n];
    let b = band as i64;
    let idx = |m: i64| -> usize { m.rem_euclid(n as i64) as usize };
    for m2 in -b..=b {
        for m1 in -b..=b {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            // fill each ± pair once so the field is real
            if (m2, m1) < (0, 0) || (m2 == 0 && m1 < 0) {
                continue;
            }
            let c = if m1 == 0 && m2 == 0 {
                Complex64::new(re, 0.0)
            } else {
                Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
            };
            spec[idx(m2) * n + idx(m1)] = c;
            spec[idx(-m2) * n + idx(-m1)] = c.conj();
        }
    }
    let scale = (n * n) as f64;
    spec.iter_mut().for_each(|c| *c *= scale);
    Field2D::from_spectrum(n, side, spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn bump_shape() {
        assert_eq!(beta_circ(0.0), 1.0);
        assert_eq!(beta_circ(0.5), 1.0);
        assert_eq!(beta_circ(1.0), 0.0);
        assert_relative_eq!(beta_circ(0.75), 0.5, epsilon = 1e-15);
        let mut prev = 1.0;
        for i in 0..=200 {
            let v = beta_circ(0.5 + 0.5 * i as f64 / 200.0);
            assert!(v <= prev);
            prev = v;
        }
    }

    #[test]
    fn projectors_telescope() {
        let f = random_bandlimited(32, 1.0, 12, 3).unwrap();
        let top = k_top(32, 1.0);
        let mut acc = Field2D::zeros(32, 1.0).unwrap();
        for k in 0..=top {
            acc = acc.zip_with(&pk_project(&f, k).unwrap(), |a, b| a + b).unwrap();
        }
        let err = acc.zip_with(&f, |a, b| a - b).unwrap().lp_norm(f64::INFINITY);
        assert!(err < 1e-10 * f.lp_norm(f64::INFINITY));
        assert!(pk_project(&f, top + 1).is_err());
    }

    #[test]
    fn parseval_and_io() {
        let f = random_bandlimited(64, 1.0, 20, 9).unwrap();
        assert_relative_eq!(f.lp_norm(2.0), f.spectral_l2(), max_relative = 1e-10);
        let mut bytes = Vec::new();
        f.write_to(&mut bytes).unwrap();
        assert_eq!(bytes.len(), 16 + 64 * 64 * 8);
        let g = Field2D::read_from(&bytes[..]).unwrap();
        assert_eq!(g.data(), f.data());
        assert!(Field2D::read_from(&b"CAPX0000"[..]).is_err());
    }

    #[test]
    fn random_fields_do_not_depend_on_grid_size() {
        let a = random_bandlimited(32, 1.0, 6, 1).unwrap();
        let b = random_bandlimited(64, 1.0, 6, 1).unwrap();
        for i in 0..32 {
            for j in 0..32 {
                assert!((a.get(i, j) - b.get(2 * i, 2 * j)).abs() < 1e-10);
            }
        }
    }
}
