use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::MeshError;

pub type Point2 = [f64; 2];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BoundaryTag {
    Dirichlet,
    Neumann,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BoundaryEdge {
    pub vertices: [usize; 2],
    pub tag: BoundaryTag,
}

/// Sides of an axis-aligned rectangle.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RectSide {
    Left,
    Right,
    Bottom,
    Top,
}

/// Area and constant shape-function gradients of a P1 triangle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ElementGeometry {
    pub area: f64,
    /// `∇N_i` for the three local vertices.
    pub grad: [[f64; 2]; 3],
}

impl ElementGeometry {
    pub fn new(p: [Point2; 3]) -> Option<Self> {
        let [a, b, c] = p;
        let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
        if det.is_nan() || det <= 0.0 {
            return None;
        }
        let inv = 1.0 / det;
        let grad = [
            [(b[1] - c[1]) * inv, (c[0] - b[0]) * inv],
            [(c[1] - a[1]) * inv, (a[0] - c[0]) * inv],
            [(a[1] - b[1]) * inv, (b[0] - a[0]) * inv],
        ];
        Some(Self {
            area: 0.5 * det,
            grad,
        })
    }
}

pub(crate) fn signed_area(p: [Point2; 3]) -> f64 {
    let [a, b, c] = p;
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Conforming triangulation with tagged boundary edges.
#[derive(Clone, Debug)]
pub struct Mesh {
    vertices: Vec<Point2>,
    triangles: Vec<[usize; 3]>,
    boundary_edges: Vec<BoundaryEdge>,
    edge_triangles: HashMap<(usize, usize), Vec<usize>>,
}

impl Mesh {
    /// Builds a mesh, tagging each boundary edge Dirichlet when `is_dirichlet(a, b)`.
    ///
    /// Triangles must be counter-clockwise with positive area, and every
    /// interior edge must be shared by exactly two oppositely oriented triangles.
    pub fn new(
        vertices: Vec<Point2>,
        triangles: Vec<[usize; 3]>,
        is_dirichlet: impl Fn(Point2, Point2) -> bool,
    ) -> Result<Self, MeshError> {
        if vertices.is_empty() || triangles.is_empty() {
            return Err(MeshError::InvalidDimensions("empty mesh".into()));
        }
        let mut edge_triangles: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
        let mut directed: HashMap<(usize, usize), usize> = HashMap::new();
        for (t, tri) in triangles.iter().enumerate() {
            for &v in tri {
                if v >= vertices.len() {
                    return Err(MeshError::VertexOutOfRange(v));
                }
            }
            let area = signed_area([vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]]);
            if area.is_nan() || area <= 0.0 {
                return Err(MeshError::DegenerateTriangle { index: t, area });
            }
            for i in 0..3 {
                let (a, b) = (tri[i], tri[(i + 1) % 3]);
                if let Some(other) = directed.insert((a, b), t) {
                    return Err(MeshError::NonConforming(format!(
                        "edge ({a}, {b}) has the same orientation in triangles {other} and {t}"
                    )));
                }
                let owners = edge_triangles.entry(edge_key(a, b)).or_default();
                owners.push(t);
                if owners.len() > 2 {
                    return Err(MeshError::NonConforming(format!(
                        "edge ({a}, {b}) is shared by more than two triangles"
                    )));
                }
            }
        }
        let mut boundary_edges = Vec::new();
        for tri in &triangles {
            for i in 0..3 {
                let (a, b) = (tri[i], tri[(i + 1) % 3]);
                if edge_triangles[&edge_key(a, b)].len() == 1 {
                    let tag = if is_dirichlet(vertices[a], vertices[b]) {
                        BoundaryTag::Dirichlet
                    } else {
                        BoundaryTag::Neumann
                    };
                    boundary_edges.push(BoundaryEdge {
                        vertices: [a, b],
                        tag,
                    });
                }
            }
        }
        Ok(Self {
            vertices,
            triangles,
            boundary_edges,
            edge_triangles,
        })
    }

    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary_edges
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn triangle_points(&self, t: usize) -> [Point2; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        signed_area(self.triangle_points(t))
    }

    pub fn area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.triangle_area(t)).sum()
    }

    pub fn boundary_length(&self) -> f64 {
        self.boundary_edges
            .iter()
            .map(|e| dist(self.vertices[e.vertices[0]], self.vertices[e.vertices[1]]))
            .sum()
    }

    /// Triangles sharing the undirected edge `(a, b)`; empty if it is not a mesh edge.
    pub fn edge_triangles(&self, a: usize, b: usize) -> &[usize] {
        self.edge_triangles
            .get(&edge_key(a, b))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn is_interior_edge(&self, a: usize, b: usize) -> bool {
        self.edge_triangles(a, b).len() == 2
    }

    pub fn boundary_vertices(&self) -> Vec<bool> {
        let mut mask = vec![false; self.vertices.len()];
        for e in &self.boundary_edges {
            mask[e.vertices[0]] = true;
            mask[e.vertices[1]] = true;
        }
        mask
    }

    pub fn dirichlet_vertices(&self) -> Vec<bool> {
        let mut mask = vec![false; self.vertices.len()];
        for e in self
            .boundary_edges
            .iter()
            .filter(|e| e.tag == BoundaryTag::Dirichlet)
        {
            mask[e.vertices[0]] = true;
            mask[e.vertices[1]] = true;
        }
        mask
    }

    /// Vertex within `tol` of `p`, if any.
    pub fn find_vertex(&self, p: Point2, tol: f64) -> Option<usize> {
        self.vertices
            .iter()
            .position(|v| (v[0] - p[0]).abs() <= tol && (v[1] - p[1]).abs() <= tol)
    }

    /// Triangles incident to each vertex.
    pub fn vertex_triangles(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.vertices.len()];
        for (t, tri) in self.triangles.iter().enumerate() {
            for &v in tri {
                out[v].push(t);
            }
        }
        out
    }
}

pub(crate) fn dist(a: Point2, b: Point2) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Structured mesh of `[0, width] × [0, height]` with `nx × ny` cells, each
/// split into two triangles along alternating diagonals. The left side is
/// Dirichlet, the rest Neumann.
pub fn build_rect_mesh(width: f64, height: f64, nx: usize, ny: usize) -> Result<Mesh, MeshError> {
    build_rect_mesh_with(width, height, nx, ny, &[RectSide::Left])
}

pub fn build_rect_mesh_with(
    width: f64,
    height: f64,
    nx: usize,
    ny: usize,
    dirichlet: &[RectSide],
) -> Result<Mesh, MeshError> {
    if !(width.is_finite() && width > 0.0 && height.is_finite() && height > 0.0) {
        return Err(MeshError::InvalidDimensions(format!(
            "width and height must be positive, got {width} x {height}"
        )));
    }
    if nx < 2 || ny < 2 {
        return Err(MeshError::InvalidDimensions(format!(
            "need at least 2 cells per direction, got {nx} x {ny}"
        )));
    }
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            vertices.push([width * i as f64 / nx as f64, height * j as f64 / ny as f64]);
        }
    }
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            if (i + j) % 2 == 0 {
                triangles.push([a, b, c]);
                triangles.push([a, c, d]);
            } else {
                triangles.push([a, b, d]);
                triangles.push([b, c, d]);
            }
        }
    }
    let tol = 1e-12 * width.max(height);
    let on_side = |p: Point2, side: RectSide| match side {
        RectSide::Left => p[0].abs() <= tol,
        RectSide::Right => (p[0] - width).abs() <= tol,
        RectSide::Bottom => p[1].abs() <= tol,
        RectSide::Top => (p[1] - height).abs() <= tol,
    };
    Mesh::new(vertices, triangles, |a, b| {
        dirichlet.iter().any(|&s| on_side(a, s) && on_side(b, s))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two_counts() {
        let m = build_rect_mesh(1.0, 1.0, 2, 2).unwrap();
        assert_eq!(m.num_vertices(), 9);
        assert_eq!(m.num_triangles(), 8);
    }

    #[test]
    fn boundary_edge_count_by_enumeration() {
        let m = build_rect_mesh(2.0, 1.0, 4, 2).unwrap();
        // enumerate edges used by exactly one triangle
        let mut count: HashMap<(usize, usize), usize> = HashMap::new();
        for tri in m.triangles() {
            for i in 0..3 {
                *count.entry(edge_key(tri[i], tri[(i + 1) % 3])).or_default() += 1;
            }
        }
        let enumerated = count.values().filter(|&&c| c == 1).count();
        assert_eq!(enumerated, 12);
        assert_eq!(m.boundary_edges().len(), 12);
    }

    #[test]
    fn areas_partition_the_rectangle() {
        for (w, h, nx, ny) in [(1.0, 1.0, 2, 2), (2.0, 0.7, 5, 3), (3.3, 1.9, 16, 9)] {
            let m = build_rect_mesh(w, h, nx, ny).unwrap();
            assert!((m.area() - w * h).abs() < 1e-12);
            assert!((m.boundary_length() - 2.0 * (w + h)).abs() < 1e-12);
            for t in 0..m.num_triangles() {
                assert!(m.triangle_area(t) > 0.0);
            }
        }
    }

    #[test]
    fn left_side_is_dirichlet_by_default() {
        let m = build_rect_mesh(1.0, 1.0, 4, 4).unwrap();
        let d = m.dirichlet_vertices();
        for (v, p) in m.vertices().iter().enumerate() {
            assert_eq!(d[v], p[0] == 0.0);
        }
        let dirichlet_edges = m
            .boundary_edges()
            .iter()
            .filter(|e| e.tag == BoundaryTag::Dirichlet)
            .count();
        assert_eq!(dirichlet_edges, 4);
    }

    #[test]
    fn invalid_dimensions_rejected() {
        assert!(build_rect_mesh(1.0, 1.0, 1, 4).is_err());
        assert!(build_rect_mesh(0.0, 1.0, 2, 2).is_err());
        assert!(build_rect_mesh(1.0, f64::NAN, 2, 2).is_err());
    }

    #[test]
    fn clockwise_triangle_rejected() {
        let err = Mesh::new(
            vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            vec![[0, 2, 1]],
            |_, _| false,
        )
        .unwrap_err();
        assert!(matches!(err, MeshError::DegenerateTriangle { index: 0, .. }));
    }

    #[test]
    fn overlapping_triangles_rejected() {
        let err = Mesh::new(
            vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]],
            vec![[0, 1, 2], [0, 1, 3]],
            |_, _| false,
        )
        .unwrap_err();
        assert!(matches!(err, MeshError::NonConforming(_)));
    }

    #[test]
    fn shape_gradients_reproduce_linear_fields() {
        let g = ElementGeometry::new([[0.1, 0.2], [1.3, 0.4], [0.5, 1.7]]).unwrap();
        let f = |p: Point2| 2.0 * p[0] - 3.0 * p[1] + 0.5;
        let pts = [[0.1, 0.2], [1.3, 0.4], [0.5, 1.7]];
        let mut grad = [0.0; 2];
        for (dg, &p) in g.grad.iter().zip(&pts) {
            grad[0] += dg[0] * f(p);
            grad[1] += dg[1] * f(p);
        }
        assert!((grad[0] - 2.0).abs() < 1e-13 && (grad[1] + 3.0).abs() < 1e-13);
    }
}
