//! Reduced-system assembly and the preconditioned conjugate gradient solver.
//! Fixed dofs are eliminated, so the reduced matrix is symmetric positive
//! definite whenever the supports remove all rigid-body modes.
//!
//! Near-binary density fields make the stiffness contrast as large as
//! `e0 / emin = 1e9`, which defeats diagonal preconditioning within any
//! reasonable iteration cap. The solver therefore uses a zero-fill incomplete
//! Cholesky preconditioner, retrying the factorization with a progressively
//! shifted diagonal when a pivot fails, and falls back to plain Jacobi only
//! if every shift fails. The recurrence residual is cross-checked against the
//! true residual before a solve is accepted.

use super::{element_stiffness, FeaError, ProblemSpec};

/// Iterative solver settings. The defaults satisfy the residual contract
/// `|KU - F| / |F| <= 1e-8` with margin.
#[derive(Debug, Clone, Copy)]
pub struct CgOptions {
    pub rel_tol: f64,
    /// Iteration cap as a multiple of the number of free dofs.
    pub max_iter_factor: usize,
}

impl Default for CgOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            max_iter_factor: 10,
        }
    }
}

/// Relative residual every solve must meet; see the solver contract.
pub const RESIDUAL_CONTRACT: f64 = 1e-8;

struct Csr {
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl Csr {
    fn n(&self) -> usize {
        self.indptr.len() - 1
    }

    fn matvec(&self, x: &[f64], out: &mut [f64]) {
        for (r, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.indptr[r]..self.indptr[r + 1] {
                acc += self.values[k] * x[self.indices[k]];
            }
            *o = acc;
        }
    }

    fn diagonal(&self) -> Vec<f64> {
        let n = self.n();
        let mut d = vec![0.0; n];
        for r in 0..n {
            for k in self.indptr[r]..self.indptr[r + 1] {
                if self.indices[k] == r {
                    d[r] += self.values[k];
                }
            }
        }
        d
    }
}

/// Zero-fill incomplete Cholesky factor, stored as the strict lower triangle
/// plus the diagonal, row-compressed with sorted column indices.
struct Ic0 {
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
    diag: Vec<f64>,
}

impl Ic0 {
    /// Factor `A + shift * diag(A)` on the lower-triangular pattern of `A`.
    /// Returns `None` on a non-positive pivot.
    fn factor(a: &Csr, shift: f64) -> Option<Ic0> {
        let n = a.n();
        let mut indptr = Vec::with_capacity(n + 1);
        let mut indices = Vec::new();
        indptr.push(0);
        for r in 0..n {
            for k in a.indptr[r]..a.indptr[r + 1] {
                if a.indices[k] < r {
                    indices.push(a.indices[k]);
                }
            }
            indptr.push(indices.len());
        }
        let mut values = vec![0.0; indices.len()];
        let mut diag = vec![0.0; n];
        let a_diag = a.diagonal();
        for r in 0..n {
            // strict lower entries of row r
            for k in indptr[r]..indptr[r + 1] {
                let c = indices[k];
                let mut sum = lower_entry(a, r, c);
                // dot of rows r and c of L over columns < c (both sorted)
                let (mut i, mut j) = (indptr[r], indptr[c]);
                while i < k && j < indptr[c + 1] {
                    match indices[i].cmp(&indices[j]) {
                        std::cmp::Ordering::Less => i += 1,
                        std::cmp::Ordering::Greater => j += 1,
                        std::cmp::Ordering::Equal => {
                            sum -= values[i] * values[j];
                            i += 1;
                            j += 1;
                        }
                    }
                }
                values[k] = sum / diag[c];
            }
            let mut pivot = a_diag[r] * (1.0 + shift);
            for k in indptr[r]..indptr[r + 1] {
                pivot -= values[k] * values[k];
            }
            if pivot <= 0.0 || !pivot.is_finite() {
                return None;
            }
            diag[r] = pivot.sqrt();
        }
        Some(Ic0 {
            indptr,
            indices,
            values,
            diag,
        })
    }

    /// `z = (L L^T)^{-1} r`: forward substitution (gather) then backward
    /// substitution (scatter) on the same row-compressed factor.
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        let n = self.diag.len();
        for i in 0..n {
            let mut acc = r[i];
            for k in self.indptr[i]..self.indptr[i + 1] {
                acc -= self.values[k] * z[self.indices[k]];
            }
            z[i] = acc / self.diag[i];
        }
        for i in (0..n).rev() {
            let zi = z[i] / self.diag[i];
            z[i] = zi;
            for k in self.indptr[i]..self.indptr[i + 1] {
                z[self.indices[k]] -= self.values[k] * zi;
            }
        }
    }
}

fn lower_entry(a: &Csr, r: usize, c: usize) -> f64 {
    for k in a.indptr[r]..a.indptr[r + 1] {
        if a.indices[k] == c {
            return a.values[k];
        }
    }
    0.0
}

enum Preconditioner {
    Ic0(Ic0),
    Jacobi(Vec<f64>),
}

impl Preconditioner {
    fn build(a: &Csr) -> Preconditioner {
        for shift in [0.0, 1e-8, 1e-6, 1e-4, 1e-2, 1.0] {
            if let Some(f) = Ic0::factor(a, shift) {
                return Preconditioner::Ic0(f);
            }
        }
        let inv: Vec<f64> = a
            .diagonal()
            .iter()
            .map(|&d| if d > 0.0 { 1.0 / d } else { 0.0 })
            .collect();
        Preconditioner::Jacobi(inv)
    }

    fn apply(&self, r: &[f64], z: &mut [f64]) {
        match self {
            Preconditioner::Ic0(f) => f.apply(r, z),
            Preconditioner::Jacobi(inv) => {
                for i in 0..r.len() {
                    z[i] = r[i] * inv[i];
                }
            }
        }
    }
}

/// Map full dof index -> reduced index (usize::MAX for fixed dofs).
fn dof_map(spec: &ProblemSpec) -> (Vec<usize>, usize) {
    let ndof = spec.n_dofs();
    let mut map = vec![usize::MAX; ndof];
    let mut next = 0;
    let mut fixed = spec.fixed_dofs.iter().peekable();
    for d in 0..ndof {
        if fixed.peek() == Some(&&d) {
            fixed.next();
        } else {
            map[d] = next;
            next += 1;
        }
    }
    (map, next)
}

fn assemble_reduced(spec: &ProblemSpec, y: &[f64], map: &[usize], nred: usize) -> Csr {
    let ke = element_stiffness(spec.nu);
    let mut trips: Vec<(u32, u32, f64)> = Vec::with_capacity(spec.n_elements() * 64);
    for ey in 0..spec.ny {
        for ex in 0..spec.nx {
            let e = ey * spec.nx + ex;
            let s = spec.young(y[e]);
            let dofs = spec.element_dofs(ex, ey);
            for a in 0..8 {
                let ra = map[dofs[a]];
                if ra == usize::MAX {
                    continue;
                }
                for b in 0..8 {
                    let rb = map[dofs[b]];
                    if rb == usize::MAX {
                        continue;
                    }
                    trips.push((ra as u32, rb as u32, s * ke[a][b]));
                }
            }
        }
    }
    trips.sort_unstable_by_key(|&(r, c, _)| ((r as u64) << 32) | c as u64);
    let mut indptr = vec![0usize; nred + 1];
    let mut indices = Vec::with_capacity(trips.len() / 3);
    let mut values: Vec<f64> = Vec::with_capacity(trips.len() / 3);
    let mut last: Option<(u32, u32)> = None;
    for &(r, c, v) in &trips {
        if last == Some((r, c)) {
            *values.last_mut().unwrap() += v;
        } else {
            indices.push(c as usize);
            values.push(v);
            indptr[r as usize + 1] += 1;
            last = Some((r, c));
        }
    }
    for r in 0..nred {
        indptr[r + 1] += indptr[r];
    }
    Csr {
        indptr,
        indices,
        values,
    }
}

/// Solve the reduced system with preconditioned CG and scatter back to the
/// full dof vector (zeros at fixed dofs).
pub fn solve_reduced(
    spec: &ProblemSpec,
    y: &[f64],
    warm: Option<&[f64]>,
) -> Result<Vec<f64>, FeaError> {
    let opts = CgOptions::default();
    let (map, nred) = dof_map(spec);
    let mut b = vec![0.0; nred];
    for &(d, f) in &spec.loads {
        b[map[d]] += f;
    }
    let bnorm = norm(&b);
    let mut u = vec![0.0; spec.n_dofs()];
    if bnorm == 0.0 {
        return Ok(u);
    }

    let k = assemble_reduced(spec, y, &map, nred);
    let precond = Preconditioner::build(&k);

    let mut x = vec![0.0; nred];
    if let Some(w) = warm {
        for d in 0..spec.n_dofs() {
            if map[d] != usize::MAX {
                x[map[d]] = w[d];
            }
        }
    }

    let max_iter = opts.max_iter_factor * nred.max(1);
    let mut total_iters = 0;
    let mut scratch = vec![0.0; nred];
    // Outer restarts guard against recurrence drift on ill-conditioned K.
    for _restart in 0..4 {
        let iters_left = max_iter.saturating_sub(total_iters);
        pcg(
            &k,
            &b,
            &mut x,
            &precond,
            opts.rel_tol * bnorm,
            iters_left,
            &mut scratch,
            &mut total_iters,
        );
        k.matvec(&x, &mut scratch);
        let true_res = b
            .iter()
            .zip(scratch.iter())
            .map(|(&bi, &ax)| (bi - ax) * (bi - ax))
            .sum::<f64>()
            .sqrt();
        if true_res / bnorm <= RESIDUAL_CONTRACT {
            for d in 0..spec.n_dofs() {
                if map[d] != usize::MAX {
                    u[d] = x[map[d]];
                }
            }
            return Ok(u);
        }
        if total_iters >= max_iter {
            return Err(FeaError::SingularSystem {
                residual: true_res / bnorm,
                iters: total_iters,
            });
        }
    }
    k.matvec(&x, &mut scratch);
    let true_res = b
        .iter()
        .zip(scratch.iter())
        .map(|(&bi, &ax)| (bi - ax) * (bi - ax))
        .sum::<f64>()
        .sqrt();
    Err(FeaError::SingularSystem {
        residual: true_res / bnorm,
        iters: total_iters,
    })
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|&x| x * x).sum::<f64>().sqrt()
}

/// One PCG sweep; returns when converged on the recurrence residual, on a
/// breakdown (non-PD behavior, handed to the restart logic), or when the
/// iteration budget is spent.
#[allow(clippy::too_many_arguments)]
fn pcg(
    k: &Csr,
    b: &[f64],
    x: &mut [f64],
    precond: &Preconditioner,
    abs_tol: f64,
    max_iter: usize,
    ap: &mut [f64],
    total_iters: &mut usize,
) {
    let n = b.len();
    let mut r = vec![0.0; n];
    k.matvec(x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let mut z = vec![0.0; n];
    precond.apply(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    for _ in 0..max_iter {
        if norm(&r) <= abs_tol {
            return;
        }
        *total_iters += 1;
        k.matvec(&p, ap);
        let pap = dot(&p, ap);
        if pap <= 0.0 || !pap.is_finite() {
            return;
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        precond.apply(&r, &mut z);
        let rz_new = dot(&r, &z);
        if !rz_new.is_finite() {
            return;
        }
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}
