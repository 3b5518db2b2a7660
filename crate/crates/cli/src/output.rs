//! CSV tables and small SVG plots.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use caplab_core::{Error, Result};

/// Output files of one run, checked for writability before any work.
pub struct Sink {
    dir: PathBuf,
}

impl Sink {
    pub fn new(dir: &Path, names: &[&str]) -> Result<Sink> {
        std::fs::create_dir_all(dir)?;
        for name in names {
            let path = dir.join(name);
            let existed = path.exists();
            std::fs::OpenOptions::new().append(true).create(true).open(&path)?;
            if !existed {
                std::fs::remove_file(&path)?;
            }
        }
        Ok(Sink { dir: dir.to_path_buf() })
    }

    pub fn csv<R: AsRef<[String]>>(&self, name: &str, header: &[&str], rows: &[R]) -> Result<()> {
        let mut w = csv::Writer::from_path(self.dir.join(name)).map_err(csv_err)?;
        w.write_record(header).map_err(csv_err)?;
        for r in rows {
            w.write_record(r.as_ref()).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn svg(&self, name: &str, text: &str) -> Result<()> {
        std::fs::write(self.dir.join(name), text)?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}

/// Shortest round-trip formatting, so files are byte-identical across runs.
pub fn num(v: f64) -> String {
    format!("{v:e}")
}

const W: f64 = 640.0;
const H: f64 = 400.0;
const PAD: f64 = 56.0;

fn header(title: &str) -> String {
    format!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n<title>{title}</title>\n<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n"
    )
}

fn bounds(pts: &[(f64, f64)]) -> (f64, f64, f64, f64) {
    let mut b = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in pts {
        b = (b.0.min(x), b.1.max(x), b.2.min(y), b.3.max(y));
    }
    if b.1 <= b.0 {
        b.1 = b.0 + 1.0;
    }
    if b.3 <= b.2 {
        b.3 = b.2 + 1.0;
    }
    b
}

/// Line plot of finite points; axes labelled with the given names.
pub fn line_plot(title: &str, xlabel: &str, ylabel: &str, series: &[Vec<(f64, f64)>]) -> String {
    let all: Vec<(f64, f64)> = series
        .iter()
        .flatten()
        .copied()
        .filter(|p| p.0.is_finite() && p.1.is_finite())
        .collect();
    let (x0, x1, y0, y1) = bounds(&all);
    let sx = |x: f64| PAD + (x - x0) / (x1 - x0) * (W - 2.0 * PAD);
    let sy = |y: f64| H - PAD - (y - y0) / (y1 - y0) * (H - 2.0 * PAD);
    let mut s = header(title);
    let _ = writeln!(
        s,
        "<g stroke=\"black\" fill=\"none\"><rect x=\"{PAD}\" y=\"{PAD}\" width=\"{}\" height=\"{}\"/></g>",
        W - 2.0 * PAD,
        H - 2.0 * PAD
    );
    let colors = ["#1f5fa8", "#b8402a", "#2e8b57", "#7a4aa0"];
    for (i, ser) in series.iter().enumerate() {
        let pts: Vec<String> = ser
            .iter()
            .filter(|p| p.0.is_finite() && p.1.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let _ = writeln!(
            s,
            "<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\" points=\"{}\"/>",
            colors[i % colors.len()],
            pts.join(" ")
        );
    }
    let _ = writeln!(
        s,
        "<g font-family=\"sans-serif\" font-size=\"12\"><text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{xlabel}</text><text x=\"14\" y=\"{}\" transform=\"rotate(-90 14 {})\" text-anchor=\"middle\">{ylabel}</text>",
        W / 2.0,
        H - 16.0,
        H / 2.0,
        H / 2.0
    );
    let _ = writeln!(
        s,
        "<text x=\"{PAD}\" y=\"{}\">{x0:.3}</text><text x=\"{}\" y=\"{}\" text-anchor=\"end\">{x1:.3}</text><text x=\"{}\" y=\"{}\" text-anchor=\"end\">{y0:.3}</text><text x=\"{}\" y=\"{}\" text-anchor=\"end\">{y1:.3}</text></g>",
        H - PAD + 16.0,
        W - PAD,
        H - PAD + 16.0,
        PAD - 4.0,
        H - PAD,
        PAD - 4.0,
        PAD + 10.0
    );
    s.push_str("</svg>\n");
    s
}

/// Closed outline with highlighted arcs, equal axis scales.
pub fn outline(title: &str, boundary: &[(f64, f64)], marks: &[Vec<(f64, f64)>]) -> String {
    let (x0, x1, y0, y1) = bounds(boundary);
    let scale = ((W - 2.0 * PAD) / (x1 - x0)).min((H - 2.0 * PAD) / (y1 - y0));
    let (cx, cy) = (0.5 * (x0 + x1), 0.5 * (y0 + y1));
    let map = |&(x, y): &(f64, f64)| format!("{:.2},{:.2}", W / 2.0 + (x - cx) * scale, H / 2.0 - (y - cy) * scale);
    let mut s = header(title);
    let pts: Vec<String> = boundary.iter().map(map).collect();
    let _ = writeln!(s, "<polygon fill=\"#eef2f7\" stroke=\"black\" points=\"{}\"/>", pts.join(" "));
    for m in marks {
        let pts: Vec<String> = m.iter().map(map).collect();
        let _ = writeln!(s, "<polyline fill=\"none\" stroke=\"#b8402a\" stroke-width=\"3\" points=\"{}\"/>", pts.join(" "));
    }
    s.push_str("</svg>\n");
    s
}
