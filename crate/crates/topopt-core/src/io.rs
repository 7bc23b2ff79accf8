//! File writers for run artifacts: binary PGM images and CSV tables.
//!
//! Conventions shared by every exporter:
//! - PGM is P5, 8-bit, one byte per pixel, written top row first.
//! - Density images use the `255 * (1 - y)` gray map so solid material
//!   (`y = 1`) renders black.
//! - CSV files carry a header row; floating-point cells use scientific
//!   notation with 17 significant digits so round-tripping is exact.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

/// Format a float with 17 significant digits (exact f64 round trip).
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Write an 8-bit binary PGM (P5). `pixels` is row-major, top row first.
pub fn write_pgm(path: &Path, width: usize, height: usize, pixels: &[u8]) -> std::io::Result<()> {
    assert_eq!(pixels.len(), width * height, "pixel buffer size mismatch");
    let mut w = BufWriter::new(File::create(path)?);
    write!(w, "P5\n{width} {height}\n255\n")?;
    w.write_all(pixels)?;
    w.flush()
}

/// Render a per-element density field as PGM bytes. The field is indexed
/// `e = ey * nx + ex` with `ey` counted upward, so rows are emitted from
/// `ey = ny - 1` down to give a conventional image orientation.
pub fn density_to_pixels(y: &[f64], nx: usize, ny: usize) -> Vec<u8> {
    assert_eq!(y.len(), nx * ny, "field size mismatch");
    let mut px = Vec::with_capacity(nx * ny);
    for ey in (0..ny).rev() {
        for ex in 0..nx {
            let v = (255.0 * (1.0 - y[ey * nx + ex].clamp(0.0, 1.0))).round();
            px.push(v as u8);
        }
    }
    px
}

/// Render an arbitrary per-element scalar field by min/max normalization.
/// A constant field maps to mid-gray.
pub fn field_to_pixels(v: &[f64], nx: usize, ny: usize) -> Vec<u8> {
    assert_eq!(v.len(), nx * ny, "field size mismatch");
    let min = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = max - min;
    let mut px = Vec::with_capacity(nx * ny);
    for ey in (0..ny).rev() {
        for ex in 0..nx {
            let t = if span > 0.0 {
                (v[ey * nx + ex] - min) / span
            } else {
                0.5
            };
            px.push((255.0 * t).round() as u8);
        }
    }
    px
}

/// Write a CSV table. Each row must have `header.len()` cells.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> std::io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{}", header.join(","))?;
    for row in rows {
        assert_eq!(row.len(), header.len(), "csv row width mismatch");
        writeln!(w, "{}", row.join(","))?;
    }
    w.flush()
}
