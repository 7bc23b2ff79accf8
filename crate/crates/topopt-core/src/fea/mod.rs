//! 2D plane-stress linear-elasticity engine for SIMP compliance minimization.
//!
//! The design domain is a regular `nx x ny` grid of unit-square bilinear quad
//! elements. Conventions, fixed so artifacts are reproducible bit for bit:
//! - Nodes sit at integer coordinates `(ix, iy)` with `iy` pointing up and
//!   are numbered column-major: `node = ix * (ny + 1) + iy`.
//! - Each node carries interleaved dofs `(ux, uy) = (2 * node, 2 * node + 1)`.
//! - Elements are indexed row-major over centers: `e = ey * nx + ex`.
//! - Element stiffness uses modified SIMP: `E(y) = emin + y^p (e0 - emin)`.

mod element;
pub mod presets;
mod solver;

pub use element::element_stiffness;
pub use solver::CgOptions;

use thiserror::Error;

/// Errors raised while validating a problem or solving its state equation.
#[derive(Debug, Error)]
pub enum FeaError {
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("density {value} at element {index} is outside [0, 1]")]
    InvalidDensity { index: usize, value: f64 },
    #[error(
        "linear solver stalled at relative residual {residual:.3e} after {iters} iterations; \
         check that the supports prevent rigid-body motion"
    )]
    SingularSystem { residual: f64, iters: usize },
}

/// Discretized minimum-compliance problem: grid, supports, loads, and SIMP
/// material constants.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub nx: usize,
    pub ny: usize,
    /// Constrained displacement dofs (deduplicated, sorted).
    pub fixed_dofs: Vec<usize>,
    /// Sparse load vector as (dof, force) pairs, sorted by dof.
    pub loads: Vec<(usize, f64)>,
    /// Target material volume in element units, `0 < v0 < nx * ny`.
    pub v0: f64,
    pub e0: f64,
    pub emin: f64,
    pub nu: f64,
    /// SIMP penalization exponent.
    pub penal: f64,
}

impl ProblemSpec {
    /// Validate and normalize a problem description.
    pub fn new(
        nx: usize,
        ny: usize,
        mut fixed_dofs: Vec<usize>,
        mut loads: Vec<(usize, f64)>,
        v0: f64,
    ) -> Result<Self, FeaError> {
        let err = |m: String| Err(FeaError::InvalidProblem(m));
        if nx == 0 || ny == 0 {
            return err(format!("grid must be nonempty, got {nx}x{ny}"));
        }
        let n = (nx * ny) as f64;
        if !(v0 > 0.0 && v0 < n) {
            return err(format!("V0 must satisfy 0 < V0 < N = {n}, got {v0}"));
        }
        let ndof = 2 * (nx + 1) * (ny + 1);
        fixed_dofs.sort_unstable();
        fixed_dofs.dedup();
        if fixed_dofs.is_empty() {
            return err("fixed_dofs must be nonempty".into());
        }
        if let Some(&d) = fixed_dofs.iter().find(|&&d| d >= ndof) {
            return err(format!("fixed dof {d} out of range (ndof = {ndof})"));
        }
        loads.sort_unstable_by_key(|&(d, _)| d);
        for &(d, _) in &loads {
            if d >= ndof {
                return err(format!("load dof {d} out of range (ndof = {ndof})"));
            }
            if fixed_dofs.binary_search(&d).is_ok() {
                return err(format!("load dof {d} is fixed"));
            }
        }
        Ok(Self {
            nx,
            ny,
            fixed_dofs,
            loads,
            v0,
            e0: 1.0,
            emin: 1e-9,
            nu: 0.3,
            penal: 3.0,
        })
    }

    /// Number of elements.
    pub fn n_elements(&self) -> usize {
        self.nx * self.ny
    }

    /// Number of displacement dofs.
    pub fn n_dofs(&self) -> usize {
        2 * (self.nx + 1) * (self.ny + 1)
    }

    pub fn with_material(mut self, e0: f64, emin: f64, nu: f64, penal: f64) -> Result<Self, FeaError> {
        if !(emin < e0) {
            return Err(FeaError::InvalidProblem(format!(
                "emin must be below e0, got emin = {emin}, e0 = {e0}"
            )));
        }
        if !(-1.0 < nu && nu < 0.5) {
            return Err(FeaError::InvalidProblem(format!(
                "nu must lie in (-1, 0.5), got {nu}"
            )));
        }
        if !(penal >= 1.0) {
            return Err(FeaError::InvalidProblem(format!(
                "penal must be at least 1, got {penal}"
            )));
        }
        self.e0 = e0;
        self.emin = emin;
        self.nu = nu;
        self.penal = penal;
        Ok(self)
    }

    /// The 8 dofs of element `(ex, ey)`, nodes counterclockwise from the
    /// bottom-left corner.
    pub fn element_dofs(&self, ex: usize, ey: usize) -> [usize; 8] {
        let nyy = self.ny + 1;
        let n1 = ex * nyy + ey;
        let n2 = (ex + 1) * nyy + ey;
        let n3 = (ex + 1) * nyy + ey + 1;
        let n4 = ex * nyy + ey + 1;
        [
            2 * n1,
            2 * n1 + 1,
            2 * n2,
            2 * n2 + 1,
            2 * n3,
            2 * n3 + 1,
            2 * n4,
            2 * n4 + 1,
        ]
    }

    /// SIMP stiffness interpolation for one density value.
    pub fn young(&self, y: f64) -> f64 {
        self.emin + y.powf(self.penal) * (self.e0 - self.emin)
    }
}

/// Nodal displacement solution of `K(y) U = F`.
#[derive(Debug, Clone)]
pub struct DisplacementField {
    pub u: Vec<f64>,
}

/// Compliance value and its gradient with respect to element densities.
#[derive(Debug, Clone)]
pub struct ComplianceResult {
    pub c: f64,
    pub grad_y: Vec<f64>,
}

fn check_densities(y: &[f64], n: usize) -> Result<(), FeaError> {
    assert_eq!(y.len(), n, "density vector length mismatch");
    for (i, &v) in y.iter().enumerate() {
        if !(0.0..=1.0).contains(&v) || !v.is_finite() {
            return Err(FeaError::InvalidDensity { index: i, value: v });
        }
    }
    Ok(())
}

/// Assemble the SIMP-interpolated stiffness matrix and solve for the
/// displacements, eliminating fixed dofs by reduction.
pub fn assemble_and_solve(spec: &ProblemSpec, y: &[f64]) -> Result<DisplacementField, FeaError> {
    assemble_and_solve_warm(spec, y, None)
}

/// As [`assemble_and_solve`], reusing a previous solution as the iterative
/// solver's starting point.
pub fn assemble_and_solve_warm(
    spec: &ProblemSpec,
    y: &[f64],
    warm: Option<&DisplacementField>,
) -> Result<DisplacementField, FeaError> {
    check_densities(y, spec.n_elements())?;
    let u = solver::solve_reduced(spec, y, warm.map(|w| w.u.as_slice()))?;
    Ok(DisplacementField { u })
}

/// Compliance `C = U^T K U` and its density gradient
/// `dC/dy_i = -p y_i^(p-1) (e0 - emin) u_i^T KE u_i`, both accumulated
/// element-wise from one solve (adjoint equals state by self-adjointness).
pub fn compliance_and_grad(spec: &ProblemSpec, y: &[f64]) -> Result<ComplianceResult, FeaError> {
    compliance_and_grad_warm(spec, y, None).map(|(r, _)| r)
}

/// As [`compliance_and_grad`], with an optional warm start for the solver.
pub fn compliance_and_grad_warm(
    spec: &ProblemSpec,
    y: &[f64],
    warm: Option<&DisplacementField>,
) -> Result<(ComplianceResult, DisplacementField), FeaError> {
    let disp = assemble_and_solve_warm(spec, y, warm)?;
    let ke = element_stiffness(spec.nu);
    let de = spec.e0 - spec.emin;
    let mut c = 0.0;
    let mut grad_y = vec![0.0; spec.n_elements()];
    let mut ue = [0.0; 8];
    for ey in 0..spec.ny {
        for ex in 0..spec.nx {
            let e = ey * spec.nx + ex;
            let dofs = spec.element_dofs(ex, ey);
            for (k, &d) in dofs.iter().enumerate() {
                ue[k] = disp.u[d];
            }
            // u_e^T KE u_e
            let mut q = 0.0;
            for a in 0..8 {
                let mut row = 0.0;
                for b in 0..8 {
                    row += ke[a][b] * ue[b];
                }
                q += ue[a] * row;
            }
            c += spec.young(y[e]) * q;
            grad_y[e] = -spec.penal * y[e].powf(spec.penal - 1.0) * de * q;
        }
    }
    Ok((ComplianceResult { c, grad_y }, disp))
}
