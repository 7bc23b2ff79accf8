//! Field diagnostics recorded during training.

use crate::fft2::fft2_real;

/// Share of elements with density strictly between 0.1 and 0.9; a measure of
/// how binary the design is.
pub fn gray_fraction(y: &[f64]) -> f64 {
    let gray = y.iter().filter(|&&v| v > 0.1 && v < 0.9).count();
    gray as f64 / y.len() as f64
}

/// Fraction of mean-removed spectral energy within half a Nyquist of the
/// checkerboard frequency. Per-axis frequencies are normalized so Nyquist
/// is 1; counted modes satisfy `|f - (1, 1)| < 1/2`. A perfect checkerboard
/// concentrates all its energy at `(1, 1)` and scores 1, a constant field
/// scores 0, and crisp but artifact-free designs stay low because edge
/// energy lives along the frequency axes, far from the corner.
pub fn checkerboard_index(y: &[f64], nx: usize, ny: usize) -> f64 {
    assert_eq!(y.len(), nx * ny, "field size mismatch");
    assert!(nx >= 4 && ny >= 4, "grid too small for a spectral split");
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let centered: Vec<f64> = y.iter().map(|&v| v - mean).collect();
    let spec = fft2_real(&centered, ny, nx);
    let mut total = 0.0;
    let mut high = 0.0;
    for ky in 0..ny {
        for kx in 0..nx {
            let e = spec[ky * nx + kx].norm_sqr();
            total += e;
            let gx = 1.0 - kx.min(nx - kx) as f64 / (nx as f64 / 2.0);
            let gy = 1.0 - ky.min(ny - ky) as f64 / (ny as f64 / 2.0);
            if (gx * gx + gy * gy).sqrt() < 0.5 {
                high += e;
            }
        }
    }
    if total > 0.0 {
        high / total
    } else {
        0.0
    }
}

/// Relative L1 distance between a field and its left-right mirror image.
pub fn mirror_asymmetry(y: &[f64], nx: usize, ny: usize) -> f64 {
    assert_eq!(y.len(), nx * ny, "field size mismatch");
    let mut num = 0.0;
    let mut den = 0.0;
    for ey in 0..ny {
        for ex in 0..nx {
            let a = y[ey * nx + ex];
            let b = y[ey * nx + (nx - 1 - ex)];
            num += (a - b).abs();
            den += a.abs();
        }
    }
    num / den.max(f64::MIN_POSITIVE)
}
