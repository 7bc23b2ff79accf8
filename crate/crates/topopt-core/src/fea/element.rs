//! Unit-square bilinear quad element, plane stress, unit Young's modulus.

/// Analytic 8x8 stiffness matrix for a unit-square bilinear quad in plane
/// stress with `E = 1` and Poisson ratio `nu`. Dof order is
/// `(u1, v1, ..., u4, v4)` with nodes counterclockwise from the bottom-left
/// corner. Symmetric positive semi-definite with the three rigid-body modes
/// in its null space.
pub fn element_stiffness(nu: f64) -> [[f64; 8]; 8] {
    debug_assert!(-1.0 < nu && nu < 0.5, "nu out of range: {nu}");
    let k = [
        0.5 - nu / 6.0,
        0.125 + nu / 8.0,
        -0.25 - nu / 12.0,
        -0.125 + 3.0 * nu / 8.0,
        -0.25 + nu / 12.0,
        -0.125 - nu / 8.0,
        nu / 6.0,
        0.125 - 3.0 * nu / 8.0,
    ];
    // Index pattern of the classic SIMP quad (1-based in the literature).
    const P: [[usize; 8]; 8] = [
        [1, 2, 3, 4, 5, 6, 7, 8],
        [2, 1, 8, 7, 6, 5, 4, 3],
        [3, 8, 1, 6, 7, 4, 5, 2],
        [4, 7, 6, 1, 8, 3, 2, 5],
        [5, 6, 7, 8, 1, 2, 3, 4],
        [6, 5, 4, 3, 2, 1, 8, 7],
        [7, 4, 5, 2, 3, 8, 1, 6],
        [8, 3, 2, 5, 4, 7, 6, 1],
    ];
    let scale = 1.0 / (1.0 - nu * nu);
    let mut ke = [[0.0; 8]; 8];
    for a in 0..8 {
        for b in 0..8 {
            ke[a][b] = scale * k[P[a][b] - 1];
        }
    }
    ke
}
