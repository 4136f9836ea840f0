//! Prescribed crack paths realised by node duplication.
//!
//! Every vertex strictly inside the path gets a second copy. Triangles to the
//! right of the path (walking from its first to its last vertex) reference the
//! copy, triangles to the left keep the original. A tie constraint equates the
//! two copies as long as either adjacent segment is still closed, so the two
//! path end points and the moving tip are always single-valued.

use std::f64::consts::TAU;

use crate::domain::mesh::{dist, ElementGeometry, Mesh, Point2};
use crate::error::MeshError;
use crate::tensor::SymTensor2;

/// Ordered edge path along mesh vertices with per-segment release times.
#[derive(Clone, Debug, PartialEq)]
pub struct CrackPath {
    vertices: Vec<usize>,
    release_times: Vec<f64>,
}

impl CrackPath {
    pub fn empty() -> Self {
        Self {
            vertices: Vec::new(),
            release_times: Vec::new(),
        }
    }

    /// Path through `vertices`; segment `i` joins `vertices[i]` and `vertices[i + 1]`
    /// and opens at `release_times[i]` (`+∞` for never).
    pub fn new(vertices: Vec<usize>, release_times: Vec<f64>) -> Result<Self, MeshError> {
        if vertices.is_empty() && release_times.is_empty() {
            return Ok(Self::empty());
        }
        let segments = vertices.len().saturating_sub(1);
        if segments == 0 || segments != release_times.len() {
            return Err(MeshError::ReleaseCountMismatch {
                segments,
                times: release_times.len(),
            });
        }
        for (i, &t) in release_times.iter().enumerate() {
            if t.is_nan() || t < 0.0 {
                return Err(MeshError::InvalidReleaseTime(t));
            }
            if i > 0 && t < release_times[i - 1] {
                return Err(MeshError::ReleaseNotMonotone {
                    index: i,
                    previous: release_times[i - 1],
                    time: t,
                });
            }
        }
        Ok(Self {
            vertices,
            release_times,
        })
    }

    /// Path along the polyline with the given corner points. Each piece between
    /// consecutive corners is split into the collinear mesh edges it covers;
    /// `release_times` has one entry per resulting mesh edge.
    pub fn from_polyline(
        mesh: &Mesh,
        corners: &[Point2],
        release_times: Vec<f64>,
    ) -> Result<Self, MeshError> {
        if corners.is_empty() {
            return Self::new(Vec::new(), release_times);
        }
        let scale = mesh
            .vertices()
            .iter()
            .fold(0.0f64, |m, v| m.max(v[0].abs()).max(v[1].abs()))
            .max(1.0);
        let tol = 1e-9 * scale;
        let ids = corners
            .iter()
            .map(|&p| mesh.find_vertex(p, tol).ok_or(MeshError::CrackPointNotVertex(p[0], p[1])))
            .collect::<Result<Vec<_>, _>>()?;
        let neighbours = vertex_neighbours(mesh);
        let mut path = vec![ids[0]];
        for w in ids.windows(2) {
            let (a, b) = (w[0], w[1]);
            let (pa, pb) = (mesh.vertices()[a], mesh.vertices()[b]);
            let len = dist(pa, pb);
            if len <= tol {
                return Err(MeshError::CrackNotOnEdges(format!("repeated corner at vertex {a}")));
            }
            let dir = [(pb[0] - pa[0]) / len, (pb[1] - pa[1]) / len];
            let mut current = a;
            while current != b {
                let pc = mesh.vertices()[current];
                let remaining = dist(pc, pb);
                let next = neighbours[current]
                    .iter()
                    .copied()
                    .filter(|&n| {
                        let q = mesh.vertices()[n];
                        let rel = [q[0] - pa[0], q[1] - pa[1]];
                        let cross = rel[0] * dir[1] - rel[1] * dir[0];
                        cross.abs() <= tol && dist(q, pb) < remaining - tol
                    })
                    .min_by(|&x, &y| {
                        dist(mesh.vertices()[x], pc).total_cmp(&dist(mesh.vertices()[y], pc))
                    });
                match next {
                    Some(n) => {
                        path.push(n);
                        current = n;
                    }
                    None => {
                        return Err(MeshError::CrackNotOnEdges(format!(
                            "no mesh edge from vertex {current} towards ({}, {})",
                            pb[0], pb[1]
                        )))
                    }
                }
            }
        }
        Self::new(path, release_times)
    }

    pub fn vertices(&self) -> &[usize] {
        &self.vertices
    }

    pub fn release_times(&self) -> &[f64] {
        &self.release_times
    }

    pub fn num_segments(&self) -> usize {
        self.release_times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.release_times.is_empty()
    }

    pub fn segment(&self, i: usize) -> [usize; 2] {
        [self.vertices[i], self.vertices[i + 1]]
    }
}

fn vertex_neighbours(mesh: &Mesh) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new(); mesh.num_vertices()];
    for tri in mesh.triangles() {
        for i in 0..3 {
            let (a, b) = (tri[i], tri[(i + 1) % 3]);
            if !out[a].contains(&b) {
                out[a].push(b);
            }
            if !out[b].contains(&a) {
                out[b].push(a);
            }
        }
    }
    out
}

/// Pair-equality constraint between a duplicated vertex and its copy.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tie {
    pub vertex: usize,
    pub copy: usize,
    /// Path segments adjacent to the vertex; the tie holds while either is closed.
    pub segments: [usize; 2],
}

/// Set of crack segments that are still closed at some time.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConstraintSet {
    tied: Vec<bool>,
}

impl ConstraintSet {
    pub fn is_tied(&self, segment: usize) -> bool {
        self.tied[segment]
    }

    pub fn tied_segments(&self) -> Vec<usize> {
        (0..self.tied.len()).filter(|&i| self.tied[i]).collect()
    }

    pub fn released_segments(&self) -> Vec<usize> {
        (0..self.tied.len()).filter(|&i| !self.tied[i]).collect()
    }

    pub fn num_tied(&self) -> usize {
        self.tied.iter().filter(|&&t| t).count()
    }

    pub fn is_subset_of(&self, other: &ConstraintSet) -> bool {
        self.tied.len() == other.tied.len()
            && self.tied.iter().zip(&other.tied).all(|(&a, &b)| !a || b)
    }

    pub fn tie_active(&self, tie: &Tie) -> bool {
        tie.segments.iter().any(|&s| self.tied[s])
    }
}

/// Condensed numbering of the nodal unknowns for one constraint state.
///
/// Dirichlet nodes carry no unknown; tied copies share the unknown of the
/// original vertex. Unknown `i` owns the displacement components `2i` and `2i+1`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DofMap {
    node_to_free: Vec<Option<usize>>,
    representative: Vec<usize>,
}

impl DofMap {
    pub fn num_nodes(&self) -> usize {
        self.node_to_free.len()
    }

    pub fn num_free_nodes(&self) -> usize {
        self.representative.len()
    }

    pub fn num_dofs(&self) -> usize {
        2 * self.representative.len()
    }

    pub fn free_index(&self, node: usize) -> Option<usize> {
        self.node_to_free[node]
    }

    /// Full nodal field `base + P·x`, where `P` scatters unknowns to nodes.
    pub fn expand(&self, x: &[f64], base: &[f64]) -> Vec<f64> {
        let mut out = base.to_vec();
        for (node, free) in self.node_to_free.iter().enumerate() {
            if let Some(i) = free {
                out[2 * node] += x[2 * i];
                out[2 * node + 1] += x[2 * i + 1];
            }
        }
        out
    }

    /// Unknowns read off a full nodal field (one representative node per unknown).
    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.num_dofs()];
        for (i, &node) in self.representative.iter().enumerate() {
            x[2 * i] = full[2 * node];
            x[2 * i + 1] = full[2 * node + 1];
        }
        x
    }

    /// `Pᵀ·g`: accumulates a full nodal vector onto the unknowns.
    pub fn gather(&self, full: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.num_dofs()];
        for (node, free) in self.node_to_free.iter().enumerate() {
            if let Some(i) = free {
                x[2 * i] += full[2 * node];
                x[2 * i + 1] += full[2 * node + 1];
            }
        }
        x
    }
}

/// Mesh with the crack path duplicated and the Dirichlet mask resolved.
#[derive(Clone, Debug)]
pub struct CrackedSpace {
    mesh: Mesh,
    path: CrackPath,
    node_coords: Vec<Point2>,
    node_vertex: Vec<usize>,
    copy_of_vertex: Vec<Option<usize>>,
    element_nodes: Vec<[usize; 3]>,
    geometry: Vec<ElementGeometry>,
    lumped_mass: Vec<f64>,
    dirichlet: Vec<bool>,
    ties: Vec<Tie>,
    segment_lengths: Vec<f64>,
}

/// Duplicates the interior path vertices of `path` in `mesh`.
pub fn insert_crack(mesh: &Mesh, path: CrackPath) -> Result<CrackedSpace, MeshError> {
    let nv = mesh.num_vertices();
    let boundary = mesh.boundary_vertices();
    let verts = path.vertices();
    for (i, &v) in verts.iter().enumerate() {
        if v >= nv {
            return Err(MeshError::VertexOutOfRange(v));
        }
        if boundary[v] {
            return Err(MeshError::CrackTouchesBoundary(v));
        }
        if verts[..i].contains(&v) {
            return Err(MeshError::InconsistentSide(format!(
                "path visits vertex {v} twice"
            )));
        }
    }
    for s in 0..path.num_segments() {
        let [a, b] = path.segment(s);
        if !mesh.is_interior_edge(a, b) {
            return Err(MeshError::CrackEdgeNotInterior(a, b));
        }
    }

    let mut element_nodes: Vec<[usize; 3]> = mesh.triangles().to_vec();
    let mut node_coords: Vec<Point2> = mesh.vertices().to_vec();
    let mut node_vertex: Vec<usize> = (0..nv).collect();
    let mut copy_of_vertex = vec![None; nv];
    let mut ties = Vec::new();
    let vertex_triangles = mesh.vertex_triangles();
    let mut right_side = vec![Vec::<usize>::new(); verts.len()];

    for i in 1..verts.len().saturating_sub(1) {
        let v = verts[i];
        let pv = mesh.vertices()[v];
        let prev = mesh.vertices()[verts[i - 1]];
        let next = mesh.vertices()[verts[i + 1]];
        let forward = (next[1] - pv[1]).atan2(next[0] - pv[0]);
        let backward = (prev[1] - pv[1]).atan2(prev[0] - pv[0]);
        let wedge = (backward - forward).rem_euclid(TAU);
        let copy = node_coords.len();
        node_coords.push(pv);
        node_vertex.push(v);
        copy_of_vertex[v] = Some(copy);
        ties.push(Tie {
            vertex: v,
            copy,
            segments: [i - 1, i],
        });
        for &t in &vertex_triangles[v] {
            let c = centroid(mesh.triangle_points(t));
            let theta = (c[1] - pv[1]).atan2(c[0] - pv[0]);
            let left = (theta - forward).rem_euclid(TAU) < wedge;
            if !left {
                right_side[i].push(t);
                for slot in element_nodes[t].iter_mut() {
                    if *slot == v {
                        *slot = copy;
                    }
                }
            }
        }
    }

    // each segment must separate its two triangles
    for s in 0..path.num_segments() {
        let [a, b] = path.segment(s);
        let (pa, pb) = (mesh.vertices()[a], mesh.vertices()[b]);
        for &t in mesh.edge_triangles(a, b) {
            let c = centroid(mesh.triangle_points(t));
            let geometric_right =
                (pb[0] - pa[0]) * (c[1] - pa[1]) - (pb[1] - pa[1]) * (c[0] - pa[0]) < 0.0;
            for (k, v) in [(s, a), (s + 1, b)] {
                if copy_of_vertex[v].is_some() && right_side[k].contains(&t) != geometric_right {
                    return Err(MeshError::InconsistentSide(format!(
                        "triangle {t} at vertex {v} of segment {s}"
                    )));
                }
            }
        }
    }

    let mut geometry = Vec::with_capacity(element_nodes.len());
    for (t, nodes) in element_nodes.iter().enumerate() {
        let pts = [node_coords[nodes[0]], node_coords[nodes[1]], node_coords[nodes[2]]];
        let g = ElementGeometry::new(pts).ok_or(MeshError::DegenerateTriangle {
            index: t,
            area: crate::domain::mesh::signed_area(pts),
        })?;
        geometry.push(g);
    }
    let mut lumped_mass = vec![0.0; node_coords.len()];
    for (nodes, g) in element_nodes.iter().zip(&geometry) {
        for &n in nodes {
            lumped_mass[n] += g.area / 3.0;
        }
    }
    let mesh_dirichlet = mesh.dirichlet_vertices();
    let dirichlet = node_vertex.iter().map(|&v| mesh_dirichlet[v]).collect();
    let segment_lengths = (0..path.num_segments())
        .map(|s| {
            let [a, b] = path.segment(s);
            dist(mesh.vertices()[a], mesh.vertices()[b])
        })
        .collect();

    Ok(CrackedSpace {
        mesh: mesh.clone(),
        path,
        node_coords,
        node_vertex,
        copy_of_vertex,
        element_nodes,
        geometry,
        lumped_mass,
        dirichlet,
        ties,
        segment_lengths,
    })
}

fn centroid(p: [Point2; 3]) -> Point2 {
    [
        (p[0][0] + p[1][0] + p[2][0]) / 3.0,
        (p[0][1] + p[1][1] + p[2][1]) / 3.0,
    ]
}

impl CrackedSpace {
    /// The mesh without any crack.
    pub fn uncracked(mesh: &Mesh) -> Result<Self, MeshError> {
        insert_crack(mesh, CrackPath::empty())
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn path(&self) -> &CrackPath {
        &self.path
    }

    pub fn num_nodes(&self) -> usize {
        self.node_coords.len()
    }

    /// Length of a full nodal displacement vector.
    pub fn field_len(&self) -> usize {
        2 * self.node_coords.len()
    }

    pub fn num_elements(&self) -> usize {
        self.element_nodes.len()
    }

    pub fn node_coords(&self) -> &[Point2] {
        &self.node_coords
    }

    /// Base mesh vertex of each node.
    pub fn node_vertex(&self) -> &[usize] {
        &self.node_vertex
    }

    pub fn copy_of_vertex(&self, v: usize) -> Option<usize> {
        self.copy_of_vertex[v]
    }

    pub fn element_nodes(&self) -> &[[usize; 3]] {
        &self.element_nodes
    }

    pub fn geometry(&self) -> &[ElementGeometry] {
        &self.geometry
    }

    pub fn lumped_mass(&self) -> &[f64] {
        &self.lumped_mass
    }

    pub fn dirichlet_nodes(&self) -> &[bool] {
        &self.dirichlet
    }

    pub fn ties(&self) -> &[Tie] {
        &self.ties
    }

    pub fn segment_lengths(&self) -> &[f64] {
        &self.segment_lengths
    }

    pub fn area(&self) -> f64 {
        self.geometry.iter().map(|g| g.area).sum()
    }

    /// Segments still closed at time `t`: those with `release_time > t`.
    pub fn active_constraints(&self, t: f64) -> ConstraintSet {
        ConstraintSet {
            tied: self.path.release_times().iter().map(|&r| r > t).collect(),
        }
    }

    /// Constraint state used on the time-grid node `t`: a segment whose
    /// release time does not exceed `t` (up to rounding of `k·τ`) is open.
    pub fn constraints_at_grid_time(&self, t: f64) -> ConstraintSet {
        self.active_constraints(t + 1e-12 * t.abs().max(1.0))
    }

    pub fn all_tied(&self) -> ConstraintSet {
        ConstraintSet {
            tied: vec![true; self.path.num_segments()],
        }
    }

    pub fn dof_map(&self, constraints: &ConstraintSet) -> DofMap {
        let n = self.num_nodes();
        let mut node_to_free = vec![None; n];
        let mut representative = Vec::new();
        let tie_of_copy: Vec<Option<&Tie>> = {
            let mut v = vec![None; n];
            for tie in &self.ties {
                v[tie.copy] = Some(tie);
            }
            v
        };
        // vertex order with each copy right after its original keeps the band narrow
        let mut order = Vec::with_capacity(n);
        for v in 0..self.mesh.num_vertices() {
            order.push(v);
            if let Some(c) = self.copy_of_vertex[v] {
                order.push(c);
            }
        }
        for node in order {
            if self.dirichlet[node] {
                continue;
            }
            if let Some(tie) = tie_of_copy[node] {
                if constraints.tie_active(tie) {
                    node_to_free[node] = node_to_free[tie.vertex];
                    continue;
                }
            }
            node_to_free[node] = Some(representative.len());
            representative.push(node);
        }
        DofMap {
            node_to_free,
            representative,
        }
    }

    /// Piecewise-constant symmetric gradient of element `e`.
    #[inline]
    pub fn strain_of_element(&self, e: usize, u: &[f64]) -> SymTensor2 {
        let g = &self.geometry[e];
        let nodes = &self.element_nodes[e];
        let mut s = SymTensor2::ZERO;
        for (i, &n) in nodes.iter().enumerate() {
            let (ux, uy) = (u[2 * n], u[2 * n + 1]);
            let [gx, gy] = g.grad[i];
            s.xx += gx * ux;
            s.yy += gy * uy;
            s.xy += 0.5 * (gy * ux + gx * uy);
        }
        s
    }

    pub fn element_strain(&self, u: &[f64]) -> Result<Vec<SymTensor2>, MeshError> {
        if u.len() != self.field_len() {
            return Err(MeshError::FieldLength {
                expected: self.field_len(),
                got: u.len(),
            });
        }
        Ok((0..self.num_elements())
            .map(|e| self.strain_of_element(e, u))
            .collect())
    }

    /// Total length of segments released in `(t0, t1]`.
    pub fn crack_increment(&self, t0: f64, t1: f64) -> f64 {
        self.path
            .release_times()
            .iter()
            .zip(&self.segment_lengths)
            .filter(|(&r, _)| r > t0 && r <= t1)
            .map(|(_, &l)| l)
            .sum()
    }

    /// Total length of the segments open under `constraints`.
    pub fn open_length(&self, constraints: &ConstraintSet) -> f64 {
        constraints
            .released_segments()
            .iter()
            .map(|&s| self.segment_lengths[s])
            .sum()
    }

    /// Nodal interpolant of a vector field.
    pub fn interpolate(&self, f: impl Fn(Point2) -> [f64; 2]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.field_len());
        for &p in &self.node_coords {
            let v = f(p);
            out.push(v[0]);
            out.push(v[1]);
        }
        out
    }

    /// Whether Dirichlet vertices lie on each side of the line through the
    /// crack end points, as `(left, right)`. Only meaningful for a non-empty path.
    pub fn dirichlet_sides(&self) -> (bool, bool) {
        let verts = self.path.vertices();
        if verts.len() < 2 {
            return (true, true);
        }
        let a = self.mesh.vertices()[verts[0]];
        let b = self.mesh.vertices()[*verts.last().unwrap()];
        let scale = dist(a, b);
        let mut sides = (false, false);
        for (v, &d) in self.mesh.dirichlet_vertices().iter().enumerate() {
            if !d {
                continue;
            }
            let p = self.mesh.vertices()[v];
            let cross = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]);
            if cross > 1e-12 * scale {
                sides.0 = true;
            } else if cross < -1e-12 * scale {
                sides.1 = true;
            }
        }
        sides
    }
}
