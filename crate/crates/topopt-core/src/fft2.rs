//! 2D FFT on row-major grids, shared by the torus filter and the
//! checkerboard diagnostic.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

/// In-place 2D FFT of a row-major `rows x cols` grid. `inverse` selects the
/// conjugate transform; no normalization is applied in either direction.
pub fn fft2_inplace(data: &mut [Complex64], rows: usize, cols: usize, inverse: bool) {
    assert_eq!(data.len(), rows * cols, "grid size mismatch");
    let mut planner = FftPlanner::new();
    let dir = if inverse {
        rustfft::FftDirection::Inverse
    } else {
        rustfft::FftDirection::Forward
    };
    let row_fft = planner.plan_fft(cols, dir);
    for r in 0..rows {
        row_fft.process(&mut data[r * cols..(r + 1) * cols]);
    }
    let col_fft = planner.plan_fft(rows, dir);
    let mut col = vec![Complex64::default(); rows];
    for c in 0..cols {
        for r in 0..rows {
            col[r] = data[r * cols + c];
        }
        col_fft.process(&mut col);
        for r in 0..rows {
            data[r * cols + c] = col[r];
        }
    }
}

/// Forward 2D FFT of a real row-major grid.
pub fn fft2_real(data: &[f64], rows: usize, cols: usize) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = data.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft2_inplace(&mut buf, rows, cols, false);
    buf
}

/// Inverse 2D FFT, normalized by `1/(rows*cols)`, returning the real part.
/// The caller is responsible for the input being (numerically) conjugate
/// symmetric so the imaginary part is noise.
pub fn ifft2_real(spectrum: &[Complex64], rows: usize, cols: usize) -> Vec<f64> {
    let mut buf = spectrum.to_vec();
    fft2_inplace(&mut buf, rows, cols, true);
    let scale = 1.0 / (rows * cols) as f64;
    buf.iter().map(|v| v.re * scale).collect()
}
