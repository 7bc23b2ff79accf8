//! Named load cases. Node/dof indices follow the crate-wide convention
//! (`node = ix * (ny + 1) + iy`, dofs `(2 node, 2 node + 1)`, `iy` up).

use super::{FeaError, ProblemSpec};

/// Half-beam with a symmetry plane on the left edge: `ux = 0` along the left
/// edge, `uy = 0` at the bottom-right corner node, unit downward load at the
/// top-left corner node.
pub fn mbb(nx: usize, ny: usize, volfrac: f64) -> Result<ProblemSpec, FeaError> {
    let mut fixed = Vec::new();
    for iy in 0..=ny {
        fixed.push(2 * iy); // ux on left edge (nodes ix = 0)
    }
    let br = nx * (ny + 1); // node (nx, 0)
    fixed.push(2 * br + 1);
    let tl = ny; // node (0, ny)
    let loads = vec![(2 * tl + 1, -1.0)];
    ProblemSpec::new(nx, ny, fixed, loads, volfrac * (nx * ny) as f64)
}

/// Cantilever clamped on the whole left edge with a unit downward load at the
/// right-edge mid-height node.
pub fn cantilever(nx: usize, ny: usize, volfrac: f64) -> Result<ProblemSpec, FeaError> {
    let mut fixed = Vec::new();
    for iy in 0..=ny {
        fixed.push(2 * iy);
        fixed.push(2 * iy + 1);
    }
    let tip = nx * (ny + 1) + ny / 2; // node (nx, ny/2)
    let loads = vec![(2 * tip + 1, -1.0)];
    ProblemSpec::new(nx, ny, fixed, loads, volfrac * (nx * ny) as f64)
}

/// Mirror-symmetric bridge: both bottom corner nodes pinned, two unit
/// downward loads at the bottom quarter-span nodes `(nx/4, 0)` and
/// `(3 nx/4, 0)`. Requires `nx` divisible by 4 so the load pair mirrors onto
/// itself.
pub fn bridge(nx: usize, ny: usize, volfrac: f64) -> Result<ProblemSpec, FeaError> {
    if !nx.is_multiple_of(4) {
        return Err(FeaError::InvalidProblem(format!(
            "bridge preset needs nx divisible by 4 for a mirror-symmetric load pair, got {nx}"
        )));
    }
    let bl = 0; // node (0, 0)
    let br = nx * (ny + 1); // node (nx, 0)
    let fixed = vec![2 * bl, 2 * bl + 1, 2 * br, 2 * br + 1];
    let left = (nx / 4) * (ny + 1); // node (nx/4, 0)
    let right = (3 * nx / 4) * (ny + 1); // node (3*nx/4, 0)
    let loads = vec![(2 * left + 1, -1.0), (2 * right + 1, -1.0)];
    ProblemSpec::new(nx, ny, fixed, loads, volfrac * (nx * ny) as f64)
}
