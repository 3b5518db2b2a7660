//! Flat experiment parameters shared by the TOML config and the flags.

use std::path::{Path, PathBuf};

use caplab_core::{BodySpec, CurveSpec, Error, Result};
use clap::Args;
use serde::Deserialize;

/// Every key may come from the config file or a flag; the flag wins.
#[derive(Debug, Clone, Default, PartialEq, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    /// Subcommand name; when present in a config it must match the one run.
    #[arg(skip)]
    pub command: Option<String>,
    /// circle | ellipse | power | expflat | iterexp
    #[arg(long)]
    pub body: Option<String>,
    #[arg(long)]
    pub radius: Option<f64>,
    #[arg(long)]
    pub semi_a: Option<f64>,
    #[arg(long)]
    pub semi_b: Option<f64>,
    /// Power-law exponent.
    #[arg(long)]
    pub m: Option<f64>,
    /// Flatness exponent of exp(-1/t^a).
    #[arg(long)]
    pub a: Option<f64>,
    /// Iteration depth of the iterated exponential.
    #[arg(long)]
    pub depth: Option<u32>,
    #[arg(long)]
    pub c: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Graph domain end T (curves) or flat-spot half width (bodies).
    #[arg(long)]
    pub t_max: Option<f64>,
    #[arg(long)]
    pub rotation: Option<f64>,
    #[arg(long)]
    pub q: Option<f64>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub delta0: Option<f64>,
    #[arg(long)]
    pub delta_min: Option<f64>,
    /// Number of directions in [0, π).
    #[arg(long)]
    pub theta_grid: Option<usize>,
    #[arg(long)]
    pub r_min: Option<f64>,
    #[arg(long)]
    pub r_max: Option<f64>,
    #[arg(long)]
    pub per_decade: Option<usize>,
    #[arg(long)]
    pub k: Option<i32>,
    #[arg(long)]
    pub k_max: Option<i32>,
    #[arg(long)]
    pub eps: Option<f64>,
    /// Grid points per side (a power of two).
    #[arg(long)]
    pub grid: Option<usize>,
    #[arg(long)]
    pub side: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub fields: Option<usize>,
    #[arg(long)]
    pub band: Option<usize>,
    #[arg(long)]
    pub eta_cells: Option<usize>,
    /// Aperture height L of the local curve.
    #[arg(long)]
    pub height: Option<f64>,
    #[arg(long)]
    pub n_max: Option<u32>,
    #[arg(long)]
    pub eta0_scale: Option<f64>,
    /// Output directory for CSV and SVG files.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

macro_rules! overlay {
    ($base:ident, $top:ident, $($f:ident),*) => {
        $(if $top.$f.is_some() { $base.$f = $top.$f.clone(); })*
    };
}

impl Params {
    pub fn from_file(path: &Path) -> Result<Params> {
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
    }

    /// Values set in `top` replace those here.
    pub fn overlay(mut self, top: &Params) -> Params {
        overlay!(
            self, top, body, radius, semi_a, semi_b, m, a, depth, c, lambda, t_max, rotation, q, p, delta0,
            delta_min, theta_grid, r_min, r_max, per_decade, k, k_max, eps, grid, side, seed, fields, band,
            eta_cells, height, n_max, eta0_scale, out
        );
        self
    }

    pub fn body_spec(&self) -> Result<BodySpec> {
        let kind = self
            .body
            .clone()
            .ok_or_else(|| Error::InvalidBody("no body given (use --body)".into()))?;
        Ok(BodySpec {
            kind,
            radius: self.radius,
            semi_a: self.semi_a,
            semi_b: self.semi_b,
            m: self.m,
            a: self.a,
            n: self.depth,
            c: self.c,
            lambda: self.lambda,
            t_max: self.t_max,
            rotation: self.rotation,
            h: None,
            dh: None,
        })
    }

    pub fn curve_spec(&self) -> Result<CurveSpec> {
        let family = self
            .body
            .clone()
            .ok_or_else(|| Error::InvalidCurve("no curve given (use --body power|expflat|iterexp)".into()))?;
        Ok(CurveSpec {
            family,
            m: self.m,
            a: self.a,
            n: self.depth,
            c: self.c,
            lambda: self.lambda,
            t: None,
            gamma: None,
            domain_end: self.t_max,
        })
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("."))
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }
}
