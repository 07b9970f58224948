//! Coefficient fields in M(α, β, Ω), P1 stiffness and lumped mass assembly,
//! and the symmetric positive definite solves used throughout.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Mesh, Point};

/// 2×2 matrix, row-major. One-dimensional fields use entry 0 only.
pub type Mat2 = [f64; 4];

/// Element-wise constant matrix field with certified ellipticity bounds.
#[derive(Debug, Clone)]
pub struct CoefficientField {
    mesh: Arc<Mesh>,
    matrices: Vec<Mat2>,
    alpha: f64,
    beta: f64,
}

impl CoefficientField {
    /// Field from one matrix per element; fails if any element is not coercive.
    pub fn new(mesh: &Arc<Mesh>, matrices: Vec<Mat2>) -> Result<Self> {
        assert_eq!(matrices.len(), mesh.num_cells(), "one matrix per element");
        let (alpha, beta) = ellipticity_bounds(mesh.dim(), &matrices)?;
        Ok(Self {
            mesh: mesh.clone(),
            matrices,
            alpha,
            beta,
        })
    }

    pub fn identity(mesh: &Arc<Mesh>) -> Self {
        Self::constant(mesh, [1.0, 0.0, 0.0, 1.0]).expect("identity is coercive")
    }

    pub fn constant(mesh: &Arc<Mesh>, m: Mat2) -> Result<Self> {
        Self::new(mesh, vec![m; mesh.num_cells()])
    }

    /// Scalar field a(x)·I sampled at element centroids.
    pub fn scalar<F: Fn(Point) -> f64>(mesh: &Arc<Mesh>, a: F) -> Result<Self> {
        Self::from_fn(mesh, |p| {
            let v = a(p);
            [v, 0.0, 0.0, v]
        })
    }

    /// Matrix field sampled at element centroids.
    pub fn from_fn<F: Fn(Point) -> Mat2>(mesh: &Arc<Mesh>, a: F) -> Result<Self> {
        let matrices = (0..mesh.num_cells()).map(|e| a(mesh.centroid(e))).collect();
        Self::new(mesh, matrices)
    }

    /// Replaces the element-derived bounds with wider known ones, e.g. the
    /// range of an analytic profile sampled at midpoints.
    pub fn with_certified_bounds(mut self, alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= beta) {
            return Err(Error::InvalidArgument(format!("invalid bounds [{alpha}, {beta}]")));
        }
        self.alpha = self.alpha.min(alpha);
        self.beta = self.beta.max(beta);
        Ok(self)
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn matrix(&self, e: usize) -> Mat2 {
        self.matrices[e]
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn is_symmetric(&self) -> bool {
        self.mesh.dim() == 1 || self.matrices.iter().all(|m| m[1] == m[2])
    }
}

/// Certified (α, β) of a coefficient field.
pub fn check_ellipticity(a: &CoefficientField) -> (f64, f64) {
    (a.alpha, a.beta)
}

fn min_sym_eigen(m: Mat2) -> f64 {
    let (a, b, d) = (m[0], 0.5 * (m[1] + m[2]), m[3]);
    0.5 * (a + d) - (0.25 * (a - d) * (a - d) + b * b).sqrt()
}

/// α = min over elements of the smallest eigenvalue of sym(M);
/// β = max over elements of 1 / (smallest eigenvalue of sym(M⁻¹)).
pub fn ellipticity_bounds(dim: usize, matrices: &[Mat2]) -> Result<(f64, f64)> {
    let mut alpha = f64::INFINITY;
    let mut beta: f64 = 0.0;
    for (e, m) in matrices.iter().enumerate() {
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::NotCoercive {
                element: e,
                eigenvalue: f64::NAN,
            });
        }
        let (lo, inv_lo) = if dim == 1 {
            (m[0], 1.0 / m[0])
        } else {
            let lo = min_sym_eigen(*m);
            let det = m[0] * m[3] - m[1] * m[2];
            let inv = [m[3] / det, -m[1] / det, -m[2] / det, m[0] / det];
            (lo, min_sym_eigen(inv))
        };
        if lo <= 0.0 || inv_lo <= 0.0 || !lo.is_finite() {
            return Err(Error::NotCoercive {
                element: e,
                eigenvalue: lo.min(inv_lo),
            });
        }
        alpha = alpha.min(lo);
        beta = beta.max(1.0 / inv_lo);
    }
    Ok((alpha, beta))
}

/// Compressed sparse row matrix over interior degrees of freedom.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Sparsity pattern of P1 couplings between interior dofs, zero-filled.
    pub fn p1_pattern(mesh: &Mesh) -> Self {
        let n = mesh.num_dofs();
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); n];
        for e in 0..mesh.num_cells() {
            let c = mesh.cell(e);
            for &a in c {
                let Some(i) = mesh.dof(a) else { continue };
                for &b in c {
                    if let Some(j) = mesh.dof(b) {
                        rows[i].push(j);
                    }
                }
            }
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        row_ptr.push(0);
        for mut r in rows {
            r.sort_unstable();
            r.dedup();
            cols.extend(r);
            row_ptr.push(cols.len());
        }
        let values = vec![0.0; cols.len()];
        Self {
            n,
            row_ptr,
            cols,
            values,
        }
    }

    pub fn from_dense(dense: &[Vec<f64>]) -> Self {
        let n = dense.len();
        let mut row_ptr = vec![0];
        let mut cols = Vec::new();
        let mut values = Vec::new();
        for row in dense {
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    cols.push(j);
                    values.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        Self {
            n,
            row_ptr,
            cols,
            values,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            n,
            row_ptr: (0..=n).collect(),
            cols: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    /// Storage slot of entry (i, j), if present in the pattern.
    pub fn slot(&self, i: usize, j: usize) -> Option<usize> {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].binary_search(&j).ok().map(|k| r.start + k)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.slot(i, j).map_or(0.0, |k| self.values[k])
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.row(i).map(|(j, v)| v * x[j]).sum();
        }
    }

    /// xᵀ M y
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        (0..self.n)
            .map(|i| x[i] * self.row(i).map(|(j, v)| v * y[j]).sum::<f64>())
            .sum()
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| self.row(i).all(|(j, v)| self.get(j, i) == v))
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n]; self.n];
        for (i, row) in d.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                row[j] = v;
            }
        }
        d
    }

    pub fn bandwidth(&self) -> usize {
        (0..self.n)
            .flat_map(|i| self.row(i).map(move |(j, _)| i.abs_diff(j)))
            .max()
            .unwrap_or(0)
    }
}

/// Value slots of the 3×3 local-to-global couplings of each element
/// (`usize::MAX` where a vertex is on the boundary).
pub fn element_slots(mesh: &Mesh, pattern: &CsrMatrix) -> Vec<[usize; 9]> {
    (0..mesh.num_cells())
        .map(|e| {
            let c = mesh.cell(e);
            let mut s = [usize::MAX; 9];
            for (a, &va) in c.iter().enumerate() {
                for (b, &vb) in c.iter().enumerate() {
                    if let (Some(i), Some(j)) = (mesh.dof(va), mesh.dof(vb)) {
                        s[3 * a + b] = pattern.slot(i, j).expect("pattern covers element couplings");
                    }
                }
            }
            s
        })
        .collect()
}

/// Stiffness K[i][j] = ∫ A∇φ_j·∇φ_i over interior basis functions.
pub fn assemble_stiffness(mesh: &Arc<Mesh>, a: &CoefficientField) -> CsrMatrix {
    let mut k = CsrMatrix::p1_pattern(mesh);
    let slots = element_slots(mesh, &k);
    let symmetric = a.is_symmetric();
    let vals = k.values_mut();
    for e in 0..mesh.num_cells() {
        let g = mesh.basis_gradients(e);
        let m = a.matrix(e);
        let area = mesh.cell_measure(e);
        let nloc = mesh.nodes_per_cell();
        let mut local = [[0.0; 3]; 3];
        for i in 0..nloc {
            for j in 0..nloc {
                let (gi, gj) = (g[i], g[j]);
                let flux = if mesh.dim() == 1 {
                    m[0] * (gj[0] * gi[0])
                } else {
                    (m[0] * gj[0] + m[1] * gj[1]) * gi[0] + (m[2] * gj[0] + m[3] * gj[1]) * gi[1]
                };
                local[i][j] = area * flux;
            }
        }
        if symmetric {
            // keep K bitwise symmetric
            for i in 0..nloc {
                for j in 0..i {
                    local[i][j] = local[j][i];
                }
            }
        }
        for i in 0..nloc {
            for j in 0..nloc {
                let slot = slots[e][3 * i + j];
                if slot != usize::MAX {
                    vals[slot] += local[i][j];
                }
            }
        }
    }
    k
}

/// Diagonal ∫φ_i dx for every vertex (boundary included).
pub fn assemble_lumped_mass(mesh: &Mesh) -> Vec<f64> {
    let mut d = vec![0.0; mesh.num_vertices()];
    for e in 0..mesh.num_cells() {
        let share = mesh.cell_measure(e) / mesh.nodes_per_cell() as f64;
        for &v in mesh.cell(e) {
            d[v] += share;
        }
    }
    d
}

/// Outcome of a conjugate-gradient solve.
#[derive(Debug, Clone)]
pub struct CgSolution {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Jacobi-preconditioned conjugate gradients from a zero initial guess.
///
/// Stops when ‖r‖₂ ≤ rel_tol·‖b‖₂; at most 50·dim iterations.
pub fn solve_spd(k: &CsrMatrix, b: &[f64], rel_tol: f64) -> Result<CgSolution> {
    if b.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidLoad);
    }
    let n = k.dim();
    let bnorm = norm2(b);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok(CgSolution {
            x,
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let inv_diag: Vec<f64> = k.diagonal().iter().map(|d| 1.0 / d).collect();
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut kp = vec![0.0; n];
    let cap = 50 * n.max(1);
    for it in 1..=cap {
        k.matvec_into(&p, &mut kp);
        let pkp = dot(&p, &kp);
        if pkp <= 0.0 {
            return Err(Error::NotPositiveDefinite { row: 0, pivot: pkp });
        }
        let step = rz / pkp;
        for i in 0..n {
            x[i] += step * p[i];
            r[i] -= step * kp[i];
        }
        let rel = norm2(&r) / bnorm;
        if rel <= rel_tol {
            return Ok(CgSolution {
                x,
                iterations: it,
                relative_residual: rel,
            });
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::CgStagnation {
        iterations: cap,
        residual: norm2(&r) / bnorm,
    })
}

/// Banded Cholesky factor L·Lᵀ of a symmetric positive definite matrix.
#[derive(Debug, Clone)]
pub struct BandedCholesky {
    n: usize,
    bw: usize,
    // row i stores L[i][i-bw..=i]
    band: Vec<f64>,
}

impl BandedCholesky {
    pub fn factor(k: &CsrMatrix) -> Result<Self> {
        let n = k.dim();
        let bw = k.bandwidth();
        let w = bw + 1;
        let mut band = vec![0.0; n * w];
        for i in 0..n {
            for (j, v) in k.row(i) {
                if j <= i {
                    band[i * w + (bw - (i - j))] = v;
                }
            }
        }
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            for j in lo..=i {
                let jlo = j.saturating_sub(bw).max(lo);
                let mut s = band[i * w + (bw - (i - j))];
                for m in jlo..j {
                    s -= band[i * w + (bw - (i - m))] * band[j * w + (bw - (j - m))];
                }
                if j == i {
                    if s <= 0.0 || !s.is_finite() {
                        return Err(Error::NotPositiveDefinite { row: i, pivot: s });
                    }
                    band[i * w + bw] = s.sqrt();
                } else {
                    band[i * w + (bw - (i - j))] = s / band[j * w + bw];
                }
            }
        }
        Ok(Self { n, bw, band })
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidLoad);
        }
        let (n, bw, w) = (self.n, self.bw, self.bw + 1);
        let mut y = b.to_vec();
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            let mut s = y[i];
            for m in lo..i {
                s -= self.band[i * w + (bw - (i - m))] * y[m];
            }
            y[i] = s / self.band[i * w + bw];
        }
        for i in (0..n).rev() {
            let hi = (i + bw).min(n - 1);
            let mut s = y[i];
            for m in i + 1..=hi {
                s -= self.band[m * w + (bw - (m - i))] * y[m];
            }
            y[i] = s / self.band[i * w + bw];
        }
        Ok(y)
    }
}

/// Linear solver used by the potential and nonlinear drivers.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum LinearBackend {
    /// Banded Cholesky factorization.
    #[default]
    Direct,
    /// Jacobi-preconditioned CG to the given relative residual.
    Cg { rel_tol: f64 },
}


impl LinearBackend {
    pub fn solve(&self, k: &CsrMatrix, b: &[f64]) -> Result<Vec<f64>> {
        if !k.is_symmetric() {
            return Err(Error::NotSymmetric);
        }
        match *self {
            LinearBackend::Direct => BandedCholesky::factor(k)?.solve(b),
            LinearBackend::Cg { rel_tol } => solve_spd(k, b, rel_tol).map(|s| s.x),
        }
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}
