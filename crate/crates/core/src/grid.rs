//! Uniform simplicial meshes of the unit interval and the unit square, nodal
//! P1 functions on them, and their exact norms.

use std::io::Write;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::quadrature::GaussLegendre;

/// A point of Ω. One-dimensional meshes keep the second coordinate at zero.
pub type Point = [f64; 2];

/// Distance from `p` to the boundary of the unit interval or unit square.
pub fn dist_boundary(dim: usize, p: Point) -> f64 {
    let dx = p[0].min(1.0 - p[0]);
    if dim == 1 {
        dx
    } else {
        dx.min(p[1].min(1.0 - p[1]))
    }
}

/// Uniform mesh of (0,1) or (0,1)².
///
/// Vertices are numbered lexicographically by coordinate. Two-dimensional meshes
/// split every grid square along its (x, y) → (x + h, y + h) diagonal, which keeps
/// the Laplacian stiffness an M-matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    dim: usize,
    cells_per_side: usize,
    coords: Vec<Point>,
    connectivity: Vec<usize>,
    boundary: Vec<bool>,
    dof: Vec<Option<usize>>,
    interior: Vec<usize>,
}

impl Mesh {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cells_per_side(&self) -> usize {
        self.cells_per_side
    }

    /// Grid step 1/n along each axis.
    pub fn spacing(&self) -> f64 {
        1.0 / self.cells_per_side as f64
    }

    /// Largest element diameter.
    pub fn h(&self) -> f64 {
        if self.dim == 1 {
            self.spacing()
        } else {
            std::f64::consts::SQRT_2 * self.spacing()
        }
    }

    pub fn num_vertices(&self) -> usize {
        self.coords.len()
    }

    pub fn num_cells(&self) -> usize {
        self.connectivity.len() / self.nodes_per_cell()
    }

    pub fn nodes_per_cell(&self) -> usize {
        self.dim + 1
    }

    pub fn vertex(&self, v: usize) -> Point {
        self.coords[v]
    }

    pub fn vertices(&self) -> &[Point] {
        &self.coords
    }

    pub fn cell(&self, e: usize) -> &[usize] {
        let k = self.nodes_per_cell();
        &self.connectivity[e * k..(e + 1) * k]
    }

    pub fn is_boundary(&self, v: usize) -> bool {
        self.boundary[v]
    }

    /// Interior degree-of-freedom index of vertex `v`, if it is interior.
    pub fn dof(&self, v: usize) -> Option<usize> {
        self.dof[v]
    }

    pub fn num_dofs(&self) -> usize {
        self.interior.len()
    }

    /// Vertex index of every interior degree of freedom, in dof order.
    pub fn interior_vertices(&self) -> &[usize] {
        &self.interior
    }

    /// Length (1D) or area (2D) of element `e`.
    pub fn cell_measure(&self, e: usize) -> f64 {
        let c = self.cell(e);
        if self.dim == 1 {
            self.coords[c[1]][0] - self.coords[c[0]][0]
        } else {
            let [a, b, d] = [self.coords[c[0]], self.coords[c[1]], self.coords[c[2]]];
            0.5 * ((b[0] - a[0]) * (d[1] - a[1]) - (d[0] - a[0]) * (b[1] - a[1])).abs()
        }
    }

    pub fn centroid(&self, e: usize) -> Point {
        let c = self.cell(e);
        let k = c.len() as f64;
        let mut p = [0.0; 2];
        for &v in c {
            p[0] += self.coords[v][0] / k;
            p[1] += self.coords[v][1] / k;
        }
        p
    }

    /// Constant gradients of the local basis functions on element `e`.
    pub fn basis_gradients(&self, e: usize) -> [[f64; 2]; 3] {
        let c = self.cell(e);
        if self.dim == 1 {
            let len = self.cell_measure(e);
            [[-1.0 / len, 0.0], [1.0 / len, 0.0], [0.0, 0.0]]
        } else {
            let [a, b, d] = [self.coords[c[0]], self.coords[c[1]], self.coords[c[2]]];
            let det = (b[0] - a[0]) * (d[1] - a[1]) - (d[0] - a[0]) * (b[1] - a[1]);
            [
                [(b[1] - d[1]) / det, (d[0] - b[0]) / det],
                [(d[1] - a[1]) / det, (a[0] - d[0]) / det],
                [(a[1] - b[1]) / det, (b[0] - a[0]) / det],
            ]
        }
    }

    /// Physical point with barycentric coordinates `bary` in element `e`.
    pub fn map_point(&self, e: usize, bary: &[f64; 3]) -> Point {
        let mut p = [0.0; 2];
        for (i, &v) in self.cell(e).iter().enumerate() {
            p[0] += bary[i] * self.coords[v][0];
            p[1] += bary[i] * self.coords[v][1];
        }
        p
    }

    /// Element containing the 1D point `x` and its barycentric coordinates.
    pub fn locate_1d(&self, x: f64) -> (usize, [f64; 3]) {
        debug_assert_eq!(self.dim, 1);
        let n = self.cells_per_side;
        let e = ((x * n as f64).floor() as usize).min(n - 1);
        let t = x * n as f64 - e as f64;
        (e, [1.0 - t, t, 0.0])
    }
}

/// Uniform mesh of [0,1] with `n` cells.
pub fn build_interval_mesh(n: usize) -> Result<Arc<Mesh>> {
    if n < 2 {
        return Err(Error::NoInteriorDofs);
    }
    let coords: Vec<Point> = (0..=n).map(|i| [i as f64 / n as f64, 0.0]).collect();
    let connectivity = (0..n).flat_map(|e| [e, e + 1]).collect();
    let boundary = (0..=n).map(|i| i == 0 || i == n).collect();
    Ok(Arc::new(finish(1, n, coords, connectivity, boundary)))
}

/// Uniform right-triangle mesh of [0,1]² with `n` cells per side.
pub fn build_square_mesh(n: usize) -> Result<Arc<Mesh>> {
    if n < 2 {
        return Err(Error::NoInteriorDofs);
    }
    let idx = |i: usize, j: usize| i * (n + 1) + j;
    let mut coords = Vec::with_capacity((n + 1) * (n + 1));
    let mut boundary = Vec::with_capacity((n + 1) * (n + 1));
    for i in 0..=n {
        for j in 0..=n {
            coords.push([i as f64 / n as f64, j as f64 / n as f64]);
            boundary.push(i == 0 || j == 0 || i == n || j == n);
        }
    }
    let mut connectivity = Vec::with_capacity(6 * n * n);
    for i in 0..n {
        for j in 0..n {
            connectivity.extend([idx(i, j), idx(i + 1, j), idx(i + 1, j + 1)]);
            connectivity.extend([idx(i, j), idx(i + 1, j + 1), idx(i, j + 1)]);
        }
    }
    Ok(Arc::new(finish(2, n, coords, connectivity, boundary)))
}

fn finish(
    dim: usize,
    n: usize,
    coords: Vec<Point>,
    connectivity: Vec<usize>,
    boundary: Vec<bool>,
) -> Mesh {
    let mut dof = vec![None; coords.len()];
    let mut interior = Vec::new();
    for (v, &b) in boundary.iter().enumerate() {
        if !b {
            dof[v] = Some(interior.len());
            interior.push(v);
        }
    }
    Mesh {
        dim,
        cells_per_side: n,
        coords,
        connectivity,
        boundary,
        dof,
        interior,
    }
}

/// Nodal P1 function on a mesh.
#[derive(Debug, Clone)]
pub struct FeFunction {
    mesh: Arc<Mesh>,
    values: Vec<f64>,
    conforming: bool,
}

impl FeFunction {
    pub fn zero(mesh: Arc<Mesh>) -> Self {
        let values = vec![0.0; mesh.num_vertices()];
        Self {
            mesh,
            values,
            conforming: true,
        }
    }

    /// Conforming function from interior degrees of freedom.
    pub fn from_interior(mesh: Arc<Mesh>, dofs: &[f64]) -> Self {
        assert_eq!(dofs.len(), mesh.num_dofs(), "dof vector length");
        let mut values = vec![0.0; mesh.num_vertices()];
        for (&v, &x) in mesh.interior_vertices().iter().zip(dofs) {
            values[v] = x;
        }
        Self {
            mesh,
            values,
            conforming: true,
        }
    }

    /// Function from values at every vertex; conforming iff boundary values vanish.
    pub fn from_vertex_values(mesh: Arc<Mesh>, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), mesh.num_vertices(), "vertex vector length");
        let conforming = (0..values.len()).all(|v| !mesh.is_boundary(v) || values[v] == 0.0);
        Self {
            mesh,
            values,
            conforming,
        }
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_conforming(&self) -> bool {
        self.conforming
    }

    pub fn interior_values(&self) -> Vec<f64> {
        self.mesh
            .interior_vertices()
            .iter()
            .map(|&v| self.values[v])
            .collect()
    }

    /// Value at barycentric coordinates `bary` of element `e`.
    pub fn eval_in_cell(&self, e: usize, bary: &[f64; 3]) -> f64 {
        self.mesh
            .cell(e)
            .iter()
            .enumerate()
            .map(|(i, &v)| bary[i] * self.values[v])
            .sum()
    }

    /// Point evaluation on a 1D mesh.
    pub fn eval_1d(&self, x: f64) -> f64 {
        let (e, bary) = self.mesh.locate_1d(x);
        self.eval_in_cell(e, &bary)
    }

    pub fn scaled(&self, t: f64) -> Self {
        Self {
            mesh: self.mesh.clone(),
            values: self.values.iter().map(|v| t * v).collect(),
            conforming: self.conforming,
        }
    }

    /// Pointwise difference; both functions must live on the same mesh.
    pub fn sub(&self, other: &FeFunction) -> Self {
        assert!(Arc::ptr_eq(&self.mesh, &other.mesh) || *self.mesh == *other.mesh);
        Self {
            mesh: self.mesh.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a - b)
                .collect(),
            conforming: self.conforming && other.conforming,
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// |u|_{H¹} by exact element-wise integration.
    pub fn h1_seminorm(&self) -> f64 {
        let m = &self.mesh;
        let mut acc = 0.0;
        for e in 0..m.num_cells() {
            let g = m.basis_gradients(e);
            let mut grad = [0.0; 2];
            for (i, &v) in m.cell(e).iter().enumerate() {
                grad[0] += g[i][0] * self.values[v];
                grad[1] += g[i][1] * self.values[v];
            }
            acc += m.cell_measure(e) * (grad[0] * grad[0] + grad[1] * grad[1]);
        }
        acc.sqrt()
    }

    /// ‖u‖_{L²} by exact element-wise integration.
    pub fn l2_norm(&self) -> f64 {
        let m = &self.mesh;
        let mut acc = 0.0;
        for e in 0..m.num_cells() {
            let c = m.cell(e);
            let vals: Vec<f64> = c.iter().map(|&v| self.values[v]).collect();
            let sum: f64 = vals.iter().sum();
            let sq: f64 = vals.iter().map(|a| a * a).sum();
            // ∫ u² = |e| (Σa_i² + (Σa_i)²) / ((d+1)(d+2))
            let k = c.len() as f64;
            acc += m.cell_measure(e) * (sq + sum * sum) / (k * (k + 1.0));
        }
        acc.sqrt()
    }

    /// ‖u − f‖_{L²} using a Gauss rule of `order` points per direction on each element.
    pub fn l2_error_against<F: Fn(Point) -> f64>(&self, f: F, order: usize) -> f64 {
        let rule = GaussLegendre::new(order);
        let m = &self.mesh;
        let mut acc = 0.0;
        for e in 0..m.num_cells() {
            rule.for_each_in_simplex(m.dim(), |bary, w| {
                let p = m.map_point(e, &bary);
                let d = self.eval_in_cell(e, &bary) - f(p);
                acc += w * m.cell_measure(e) * d * d;
            });
        }
        acc.sqrt()
    }

    /// CSV dump `x[,y],value`, one row per vertex, 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        if self.mesh.dim() == 1 {
            writeln!(out, "x,value")?;
        } else {
            writeln!(out, "x,y,value")?;
        }
        for (p, v) in self.mesh.vertices().iter().zip(&self.values) {
            if self.mesh.dim() == 1 {
                writeln!(out, "{:.16e},{:.16e}", p[0], v)?;
            } else {
                writeln!(out, "{:.16e},{:.16e},{:.16e}", p[0], p[1], v)?;
            }
        }
        Ok(())
    }
}

/// Nodal interpolant of `f`. Conforming interpolants vanish on boundary vertices.
pub fn p1_interpolate<F: Fn(Point) -> f64>(
    f: F,
    mesh: &Arc<Mesh>,
    conforming: bool,
) -> Result<FeFunction> {
    let mut values = Vec::with_capacity(mesh.num_vertices());
    for (v, &p) in mesh.vertices().iter().enumerate() {
        if conforming && mesh.is_boundary(v) {
            values.push(0.0);
            continue;
        }
        let y = f(p);
        if !y.is_finite() {
            return Err(Error::NonInterpolable { vertex: v });
        }
        values.push(y);
    }
    let conforming = conforming || (0..values.len()).all(|v| !mesh.is_boundary(v) || values[v] == 0.0);
    Ok(FeFunction {
        mesh: mesh.clone(),
        values,
        conforming,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn interval_counts() {
        let m = build_interval_mesh(2).unwrap();
        assert_eq!(m.num_vertices(), 3);
        assert_eq!(m.num_dofs(), 1);
        assert_eq!(m.h(), 0.5);
        let m = build_interval_mesh(4).unwrap();
        let xs: Vec<f64> = m.vertices().iter().map(|p| p[0]).collect();
        assert_eq!(xs, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert!(matches!(build_interval_mesh(1), Err(Error::NoInteriorDofs)));
    }

    #[test]
    fn square_counts() {
        let m = build_square_mesh(2).unwrap();
        assert_eq!((m.num_vertices(), m.num_cells(), m.num_dofs()), (9, 8, 1));
        let m = build_square_mesh(4).unwrap();
        assert_eq!((m.num_vertices(), m.num_cells(), m.num_dofs()), (25, 32, 9));
        assert!(matches!(build_square_mesh(1), Err(Error::NoInteriorDofs)));
        let area: f64 = (0..m.num_cells()).map(|e| m.cell_measure(e)).sum();
        assert_abs_diff_eq!(area, 1.0, epsilon = 1e-14);
        assert!((0..m.num_cells()).all(|e| m.cell_measure(e) > 0.0));
    }

    #[test]
    fn interpolation_examples() {
        let m = build_interval_mesh(4).unwrap();
        let one = p1_interpolate(|_| 1.0, &m, false).unwrap();
        assert!(one.values().iter().all(|&v| v == 1.0));
        assert!(!one.is_conforming());
        let x = p1_interpolate(|p| p[0], &m, false).unwrap();
        assert_eq!(x.values(), &[0.0, 0.25, 0.5, 0.75, 1.0]);
        let s = p1_interpolate(|p| (std::f64::consts::PI * p[0]).sin(), &m, true).unwrap();
        assert_abs_diff_eq!(s.values()[2], 1.0, epsilon = 1e-15);
        let err = p1_interpolate(|p| 1.0 / (p[0] - 0.5), &m, false);
        assert!(matches!(err, Err(Error::NonInterpolable { vertex: 2 })));
    }

    #[test]
    fn norm_examples() {
        let m = build_interval_mesh(4).unwrap();
        let x = p1_interpolate(|p| p[0], &m, false).unwrap();
        assert_abs_diff_eq!(x.h1_seminorm(), 1.0, epsilon = 1e-14);
        let m2 = build_interval_mesh(2).unwrap();
        let hat = FeFunction::from_interior(m2.clone(), &[1.0]);
        assert_abs_diff_eq!(hat.h1_seminorm(), 2.0, epsilon = 1e-14);
        let one = p1_interpolate(|_| 1.0, &m, false).unwrap();
        assert_abs_diff_eq!(one.l2_norm(), 1.0, epsilon = 1e-14);
        let sq = build_square_mesh(3).unwrap();
        let one = p1_interpolate(|_| 1.0, &sq, false).unwrap();
        assert_abs_diff_eq!(one.l2_norm(), 1.0, epsilon = 1e-14);
        let x = p1_interpolate(|p| p[0], &sq, false).unwrap();
        assert_abs_diff_eq!(x.l2_norm(), (1.0f64 / 3.0).sqrt(), epsilon = 1e-14);
        assert_abs_diff_eq!(x.h1_seminorm(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn gradients_reproduce_linear_functions() {
        let m = build_square_mesh(3).unwrap();
        for e in 0..m.num_cells() {
            let g = m.basis_gradients(e);
            let c = m.cell(e);
            let mut grad = [0.0; 2];
            for i in 0..3 {
                let p = m.vertex(c[i]);
                let val = 2.0 * p[0] - 3.0 * p[1];
                grad[0] += g[i][0] * val;
                grad[1] += g[i][1] * val;
            }
            assert_abs_diff_eq!(grad[0], 2.0, epsilon = 1e-12);
            assert_abs_diff_eq!(grad[1], -3.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn csv_dump_format() {
        let m = build_interval_mesh(2).unwrap();
        let u = FeFunction::from_interior(m, &[0.125]);
        let mut buf = Vec::new();
        u.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "x,value");
        assert_eq!(lines[2], "5.0000000000000000e-1,1.2500000000000000e-1");
        assert_eq!(lines.len(), 4);
    }
}
