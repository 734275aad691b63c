//! Interval and structured triangular meshes with boundary tags.
//!
//! Conventions:
//! - vertices are numbered lexicographically (1D: left to right; 2D: fastest
//!   along x₂, then x₁), which keeps the assembled matrices banded;
//! - boundary facets carry exactly one tag (Dirichlet or Neumann);
//! - Dirichlet vertices are eliminated when building an [`FESpace`].

use serde::{Deserialize, Serialize};

use crate::error::{RbMpcError, Result};

/// Boundary condition tag attached to a boundary facet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundaryTag {
    /// Homogeneous essential condition; vertices are eliminated.
    Dirichlet,
    /// Natural (do-nothing) condition.
    Neumann,
}

/// Sides of the 2D rectangle (used to configure boundary tags).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RectSide {
    Left,
    Right,
    Bottom,
    Top,
}

/// Element connectivity: intervals in 1D, triangles in 2D.
#[derive(Debug, Clone)]
pub enum Elements {
    Intervals(Vec<[usize; 2]>),
    Triangles(Vec<[usize; 3]>),
}

/// A conforming simplicial mesh of an interval or an axis-aligned rectangle.
#[derive(Debug, Clone)]
pub struct Mesh {
    /// Spatial dimension (1 or 2).
    pub dim: usize,
    /// Vertex coordinates; 1D meshes use only the first component.
    pub vertices: Vec<[f64; 2]>,
    /// Element connectivity.
    pub elements: Elements,
    /// Boundary facets as (vertex list, tag); 1D facets are single vertices.
    pub boundary: Vec<(Vec<usize>, BoundaryTag)>,
    /// Per-vertex Dirichlet flag derived from the boundary facets.
    pub dirichlet: Vec<bool>,
}

impl Mesh {
    /// Number of elements.
    pub fn n_elements(&self) -> usize {
        match &self.elements {
            Elements::Intervals(e) => e.len(),
            Elements::Triangles(e) => e.len(),
        }
    }

    /// Measure (length/area) of element `e`; positive on valid meshes.
    pub fn element_measure(&self, e: usize) -> f64 {
        match &self.elements {
            Elements::Intervals(elems) => {
                let [a, b] = elems[e];
                self.vertices[b][0] - self.vertices[a][0]
            }
            Elements::Triangles(elems) => {
                let [a, b, c] = elems[e];
                let (pa, pb, pc) = (self.vertices[a], self.vertices[b], self.vertices[c]);
                0.5 * ((pb[0] - pa[0]) * (pc[1] - pa[1]) - (pc[0] - pa[0]) * (pb[1] - pa[1]))
            }
        }
    }

    /// Barycenter of element `e`.
    pub fn element_barycenter(&self, e: usize) -> [f64; 2] {
        match &self.elements {
            Elements::Intervals(elems) => {
                let [a, b] = elems[e];
                [0.5 * (self.vertices[a][0] + self.vertices[b][0]), 0.0]
            }
            Elements::Triangles(elems) => {
                let [a, b, c] = elems[e];
                [
                    (self.vertices[a][0] + self.vertices[b][0] + self.vertices[c][0]) / 3.0,
                    (self.vertices[a][1] + self.vertices[b][1] + self.vertices[c][1]) / 3.0,
                ]
            }
        }
    }
}

/// Uniform interval mesh with the default §5.1 tags: Dirichlet at the left
/// endpoint, Neumann at the right endpoint.
pub fn build_mesh_1d(n_elems: usize, interval: (f64, f64)) -> Result<Mesh> {
    build_mesh_1d_tagged(n_elems, interval, BoundaryTag::Dirichlet, BoundaryTag::Neumann)
}

/// Uniform interval mesh with configurable endpoint tags.
pub fn build_mesh_1d_tagged(
    n_elems: usize,
    interval: (f64, f64),
    left: BoundaryTag,
    right: BoundaryTag,
) -> Result<Mesh> {
    let (a, b) = interval;
    if n_elems == 0 {
        return Err(RbMpcError::invalid("1D mesh needs at least one element"));
    }
    if !(b > a) {
        return Err(RbMpcError::invalid(format!(
            "degenerate interval [{a}, {b}]"
        )));
    }
    let h = (b - a) / n_elems as f64;
    let vertices: Vec<[f64; 2]> = (0..=n_elems).map(|i| [a + i as f64 * h, 0.0]).collect();
    let elements = Elements::Intervals((0..n_elems).map(|i| [i, i + 1]).collect());
    let boundary = vec![(vec![0], left), (vec![n_elems], right)];
    let mut dirichlet = vec![false; vertices.len()];
    for (vs, tag) in &boundary {
        if *tag == BoundaryTag::Dirichlet {
            for &v in vs {
                dirichlet[v] = true;
            }
        }
    }
    Ok(Mesh {
        dim: 1,
        vertices,
        elements,
        boundary,
        dirichlet,
    })
}

/// Structured crossed-triangle mesh of `[x0,x1]×[y0,y1]` with the default
/// §5.2 tags: Dirichlet on the right edge, Neumann elsewhere.
pub fn build_mesh_2d(nx: usize, ny: usize, rect: (f64, f64, f64, f64)) -> Result<Mesh> {
    build_mesh_2d_tagged(nx, ny, rect, &[RectSide::Right])
}

/// Structured crossed-triangle mesh with a configurable set of Dirichlet sides.
pub fn build_mesh_2d_tagged(
    nx: usize,
    ny: usize,
    rect: (f64, f64, f64, f64),
    dirichlet_sides: &[RectSide],
) -> Result<Mesh> {
    let (x0, x1, y0, y1) = rect;
    if nx == 0 || ny == 0 {
        return Err(RbMpcError::invalid("2D mesh needs nx, ny ≥ 1"));
    }
    if !(x1 > x0) || !(y1 > y0) {
        return Err(RbMpcError::invalid(format!(
            "degenerate rectangle ({x0},{x1})×({y0},{y1})"
        )));
    }
    let hx = (x1 - x0) / nx as f64;
    let hy = (y1 - y0) / ny as f64;
    // Vertex (i, j) with i along x₁ (slow), j along x₂ (fast) → small bandwidth ny+2.
    let vid = |i: usize, j: usize| i * (ny + 1) + j;
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for i in 0..=nx {
        for j in 0..=ny {
            vertices.push([x0 + i as f64 * hx, y0 + j as f64 * hy]);
        }
    }
    // Two triangles per cell, alternating diagonal orientation per cell parity
    // ("crossed" pattern in the aggregate).
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for i in 0..nx {
        for j in 0..ny {
            let (v00, v10, v01, v11) = (vid(i, j), vid(i + 1, j), vid(i, j + 1), vid(i + 1, j + 1));
            if (i + j) % 2 == 0 {
                triangles.push([v00, v10, v11]);
                triangles.push([v00, v11, v01]);
            } else {
                triangles.push([v00, v10, v01]);
                triangles.push([v10, v11, v01]);
            }
        }
    }
    let tag_of = |side: RectSide| {
        if dirichlet_sides.contains(&side) {
            BoundaryTag::Dirichlet
        } else {
            BoundaryTag::Neumann
        }
    };
    let mut boundary = Vec::new();
    for j in 0..ny {
        boundary.push((vec![vid(0, j), vid(0, j + 1)], tag_of(RectSide::Left)));
        boundary.push((vec![vid(nx, j), vid(nx, j + 1)], tag_of(RectSide::Right)));
    }
    for i in 0..nx {
        boundary.push((vec![vid(i, 0), vid(i + 1, 0)], tag_of(RectSide::Bottom)));
        boundary.push((vec![vid(i, ny), vid(i + 1, ny)], tag_of(RectSide::Top)));
    }
    let mut dirichlet = vec![false; vertices.len()];
    for (vs, tag) in &boundary {
        if *tag == BoundaryTag::Dirichlet {
            for &v in vs {
                dirichlet[v] = true;
            }
        }
    }
    Ok(Mesh {
        dim: 2,
        vertices,
        elements: Elements::Triangles(triangles),
        boundary,
        dirichlet,
    })
}

/// Linear Lagrange finite element space with Dirichlet degrees of freedom eliminated.
#[derive(Debug, Clone)]
pub struct FESpace {
    /// Underlying mesh.
    pub mesh: Mesh,
    /// Number of degrees of freedom after Dirichlet elimination.
    pub n_dofs: usize,
    /// Vertex index → dof index (None for Dirichlet vertices).
    pub dof_of_vertex: Vec<Option<usize>>,
    /// Dof index → vertex index.
    pub vertex_of_dof: Vec<usize>,
}

impl FESpace {
    /// Builds the space on a mesh.
    pub fn new(mesh: Mesh) -> Self {
        let mut dof_of_vertex = vec![None; mesh.vertices.len()];
        let mut vertex_of_dof = Vec::new();
        for (v, &is_dir) in mesh.dirichlet.iter().enumerate() {
            if !is_dir {
                dof_of_vertex[v] = Some(vertex_of_dof.len());
                vertex_of_dof.push(v);
            }
        }
        let n_dofs = vertex_of_dof.len();
        FESpace {
            mesh,
            n_dofs,
            dof_of_vertex,
            vertex_of_dof,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mesh_1d_counts_and_spacing() {
        let m = build_mesh_1d(200, (0.0, 1.0)).unwrap();
        assert_eq!(m.vertices.len(), 201);
        let s = FESpace::new(m);
        assert_eq!(s.n_dofs, 200);

        let m4 = build_mesh_1d(4, (0.0, 1.0)).unwrap();
        assert!((m4.vertices[1][0] - 0.25).abs() < 1e-15);

        let m1 = build_mesh_1d(1, (0.0, 1.0)).unwrap();
        assert_eq!(FESpace::new(m1).n_dofs, 1);
    }

    #[test]
    fn mesh_1d_rejects_bad_input() {
        assert!(build_mesh_1d(0, (0.0, 1.0)).is_err());
        assert!(build_mesh_1d(5, (1.0, 1.0)).is_err());
    }

    #[test]
    fn mesh_2d_counts() {
        let m = build_mesh_2d(10, 2, (0.0, 5.0, 0.0, 1.0)).unwrap();
        assert_eq!(m.vertices.len(), 33);
        assert_eq!(m.n_elements(), 40);

        let m11 = build_mesh_2d(1, 1, (0.0, 1.0, 0.0, 1.0)).unwrap();
        assert_eq!(m11.n_elements(), 2);
    }

    #[test]
    fn mesh_2d_positive_measures_sum_to_area() {
        let m = build_mesh_2d(7, 3, (0.0, 5.0, 0.0, 1.0)).unwrap();
        let mut total = 0.0;
        for e in 0..m.n_elements() {
            let a = m.element_measure(e);
            assert!(a > 0.0, "element {e} has nonpositive measure");
            total += a;
        }
        assert!((total - 5.0).abs() < 1e-12);
    }

    #[test]
    fn mesh_2d_default_dirichlet_right_edge() {
        let m = build_mesh_2d(4, 2, (0.0, 5.0, 0.0, 1.0)).unwrap();
        let s = FESpace::new(m);
        // Right edge has ny+1 = 3 Dirichlet vertices.
        assert_eq!(s.n_dofs, 15 - 3);
        for &v in &s.vertex_of_dof {
            assert!(s.mesh.vertices[v][0] < 5.0 - 1e-12);
        }
    }

    #[test]
    fn boundary_facets_have_single_tags() {
        let m = build_mesh_2d(3, 2, (0.0, 1.0, 0.0, 1.0)).unwrap();
        // 2·ny + 2·nx facets, each appearing exactly once.
        assert_eq!(m.boundary.len(), 2 * 2 + 2 * 3);
        let mut seen = std::collections::HashSet::new();
        for (vs, _) in &m.boundary {
            let mut key = vs.clone();
            key.sort_unstable();
            assert!(seen.insert(key), "boundary facet tagged twice");
        }
    }
}
