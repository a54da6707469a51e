//! Structured triangulation of a regular grid of observation locations.
//!
//! Nodes are the grid points themselves, indexed row-major
//! (`node(i, j) = j * nx + i`), so rasters map one-to-one onto node indices.
//! Every cell is split along its lower-left to upper-right diagonal into two
//! counter-clockwise triangles.

use crate::error::{invalid, Result};
use crate::scalar::Scalar;

/// Geometry of a regular grid: node counts and spacings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid<T> {
    pub nx: usize,
    pub ny: usize,
    pub dx: T,
    pub dy: T,
}

impl<T: Scalar> Grid<T> {
    /// A grid with at least one node per axis and positive spacings.
    pub fn new(nx: usize, ny: usize, dx: T, dy: T) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(invalid(format!("grid dimensions must be positive, got {nx}x{ny}")));
        }
        if !(dx > T::zero()) || !(dy > T::zero()) || !dx.is_finite() || !dy.is_finite() {
            return Err(invalid(format!("grid spacings must be positive and finite, got dx={dx}, dy={dy}")));
        }
        Ok(Self { nx, ny, dx, dy })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    /// Grid coordinates `(i, j)` of a node.
    #[inline]
    pub fn ij(&self, node: usize) -> (usize, usize) {
        (node % self.nx, node / self.nx)
    }

    #[inline]
    pub fn position(&self, node: usize) -> [T; 2] {
        let (i, j) = self.ij(node);
        [T::lit(i as f64) * self.dx, T::lit(j as f64) * self.dy]
    }

    /// Whether the node lies at least `margin` cells away from every edge.
    pub fn is_interior(&self, node: usize, margin: usize) -> bool {
        let (i, j) = self.ij(node);
        i >= margin && j >= margin && i + margin < self.nx && j + margin < self.ny
    }

    pub fn center_node(&self) -> usize {
        self.index(self.nx / 2, self.ny / 2)
    }
}

/// Planar P1 triangulation of a regular grid.
#[derive(Debug, Clone)]
pub struct TriMesh<T> {
    grid: Grid<T>,
    nodes: Vec<[T; 2]>,
    triangles: Vec<[usize; 3]>,
}

/// Per-element quantities needed for P1 assembly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementGeometry<T> {
    pub area: T,
    /// Constant gradients of the three hat functions, in vertex order.
    pub gradients: [[T; 2]; 3],
    pub centroid: [T; 2],
}

/// Splits each grid cell along its lower-left to upper-right diagonal.
pub fn triangulate_grid<T: Scalar>(nx: usize, ny: usize, dx: T, dy: T) -> Result<TriMesh<T>> {
    if nx < 2 || ny < 2 {
        return Err(invalid(format!(
            "triangulation needs at least 2 nodes per axis, got {nx}x{ny}"
        )));
    }
    let grid = Grid::new(nx, ny, dx, dy)?;
    let nodes = (0..grid.len()).map(|k| grid.position(k)).collect();
    let mut triangles = Vec::with_capacity(2 * (nx - 1) * (ny - 1));
    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            let ll = grid.index(i, j);
            let lr = grid.index(i + 1, j);
            let ul = grid.index(i, j + 1);
            let ur = grid.index(i + 1, j + 1);
            triangles.push([ll, lr, ur]);
            triangles.push([ll, ur, ul]);
        }
    }
    Ok(TriMesh { grid, nodes, triangles })
}

impl<T: Scalar> TriMesh<T> {
    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn nodes(&self) -> &[[T; 2]] {
        &self.nodes
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn element_geometry(&self, t: usize) -> Result<ElementGeometry<T>> {
        let tri = self.triangles.get(t).ok_or_else(|| {
            invalid(format!("triangle index {t} out of range ({})", self.triangles.len()))
        })?;
        Ok(triangle_geometry([
            self.nodes[tri[0]],
            self.nodes[tri[1]],
            self.nodes[tri[2]],
        ]))
    }
}

/// Area, hat-function gradients and centroid of a counter-clockwise triangle.
pub fn triangle_geometry<T: Scalar>(v: [[T; 2]; 3]) -> ElementGeometry<T> {
    let two = T::lit(2.0);
    let det = (v[1][0] - v[0][0]) * (v[2][1] - v[0][1]) - (v[2][0] - v[0][0]) * (v[1][1] - v[0][1]);
    let area = det / two;
    let mut gradients = [[T::zero(); 2]; 3];
    for (a, g) in gradients.iter_mut().enumerate() {
        let b = (a + 1) % 3;
        let c = (a + 2) % 3;
        *g = [(v[b][1] - v[c][1]) / det, (v[c][0] - v[b][0]) / det];
    }
    let three = T::lit(3.0);
    let centroid = [
        (v[0][0] + v[1][0] + v[2][0]) / three,
        (v[0][1] + v[1][1] + v[2][1]) / three,
    ];
    ElementGeometry { area, gradients, centroid }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    #[test]
    fn single_cell() {
        let m = triangulate_grid(2, 2, 1.0, 1.0).unwrap();
        assert_eq!(m.node_count(), 4);
        assert_eq!(m.triangle_count(), 2);
        let area: f64 = (0..2).map(|t| m.element_geometry(t).unwrap().area).sum();
        assert!((area - 1.0).abs() < 1e-15);
    }

    #[test]
    fn counts_follow_formula() {
        let m = triangulate_grid(3, 3, 1.0, 1.0).unwrap();
        assert_eq!((m.node_count(), m.triangle_count()), (9, 8));
        let m = triangulate_grid(400, 400, 1.0f32, 1.0).unwrap();
        assert_eq!((m.node_count(), m.triangle_count()), (160_000, 318_402));
    }

    #[test]
    fn rejects_degenerate_input() {
        assert!(triangulate_grid(1, 3, 1.0, 1.0).is_err());
        assert!(triangulate_grid(3, 3, 0.0, 1.0).is_err());
        assert!(triangulate_grid(3, 3, 1.0, -2.0).is_err());
        let m = triangulate_grid(3, 3, 1.0, 1.0).unwrap();
        assert!(m.element_geometry(8).is_err());
    }

    #[test]
    fn unit_right_triangle() {
        let g = triangle_geometry([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]);
        assert_eq!(g.area, 0.5);
        assert_eq!(g.gradients, [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]]);
    }

    #[test]
    fn scaling_law() {
        let v: [[f64; 2]; 3] = [[0.3, 0.1], [1.7, 0.4], [0.9, 1.3]];
        let g1 = triangle_geometry(v);
        let g2 = triangle_geometry(v.map(|p| [2.0 * p[0], 2.0 * p[1]]));
        assert!((g2.area - 4.0 * g1.area).abs() < 1e-14);
        for a in 0..3 {
            for d in 0..2 {
                assert!((g2.gradients[a][d] - 0.5 * g1.gradients[a][d]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn mesh_invariants() {
        let (nx, ny, dx, dy) = (7, 5, 0.5, 1.5);
        let m = triangulate_grid(nx, ny, dx, dy).unwrap();
        let mut total = 0.0;
        let mut edges: HashMap<(usize, usize), usize> = HashMap::new();
        for t in 0..m.triangle_count() {
            let g = m.element_geometry(t).unwrap();
            assert!(g.area > 0.0);
            total += g.area;
            let gx: f64 = g.gradients.iter().map(|v| v[0]).sum();
            let gy: f64 = g.gradients.iter().map(|v| v[1]).sum();
            assert!(gx.abs() < 1e-14 && gy.abs() < 1e-14);
            let tri = m.triangles()[t];
            for a in 0..3 {
                let (p, q) = (tri[a], tri[(a + 1) % 3]);
                *edges.entry((p.min(q), p.max(q))).or_default() += 1;
            }
        }
        let expected = (nx - 1) as f64 * dx * (ny - 1) as f64 * dy;
        assert!((total - expected).abs() < 1e-12);
        for (&(p, q), &count) in &edges {
            let (pi, pj) = m.grid().ij(p);
            let (qi, qj) = m.grid().ij(q);
            let on_boundary = (pi == qi && (pi == 0 || pi == nx - 1))
                || (pj == qj && (pj == 0 || pj == ny - 1));
            assert_eq!(count, if on_boundary { 1 } else { 2 }, "edge {p}-{q}");
        }
    }

    #[test]
    fn row_major_indexing() {
        let m = triangulate_grid(4, 3, 2.0, 1.0).unwrap();
        assert_eq!(m.grid().index(3, 2), 11);
        assert_eq!(m.nodes()[11], [6.0, 2.0]);
        assert_eq!(m.grid().ij(7), (3, 1));
    }
}
