//! Structured P1 meshes: intervals in 1D, triangulated rectangles in 2D.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MeshError {
    #[error("unsupported mesh dimension {0} (expected 1 or 2)")]
    Dimension(usize),
    #[error("expected {expected} extents/subdivisions, got {got}")]
    Arity { expected: usize, got: usize },
    #[error("extent {0} must be positive")]
    Extent(f64),
    #[error("subdivisions must be >= 1")]
    Subdivisions,
    #[error("Dirichlet boundary is empty: select at least one facet")]
    EmptyDirichlet,
    #[error("facet {0:?} does not exist in {1}D")]
    Facet(Facet, usize),
}

/// Boundary facets of the box domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Facet {
    /// x = 0
    Left,
    /// x = Lx
    Right,
    /// y = 0 (2D only)
    Bottom,
    /// y = Ly (2D only)
    Top,
}

impl Facet {
    fn bit(self) -> u8 {
        1 << (self as u8)
    }

    fn exists_in(self, dim: usize) -> bool {
        dim == 2 || matches!(self, Facet::Left | Facet::Right)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Dirichlet,
    Neumann,
    Interior,
}

/// Simplex with precomputed measure and shape-function gradients.
#[derive(Debug, Clone, Copy)]
pub struct Element {
    nodes: [usize; 3],
    n: usize,
    pub measure: f64,
    grads: [[f64; 2]; 3],
}

impl Element {
    pub fn nodes(&self) -> &[usize] {
        &self.nodes[..self.n]
    }

    /// ∇φ_a for local node `a` (only the first `dim` entries are meaningful).
    pub fn grad(&self, a: usize) -> &[f64; 2] {
        &self.grads[a]
    }

    pub fn n_nodes(&self) -> usize {
        self.n
    }
}

#[derive(Debug, Clone)]
pub struct Mesh {
    dim: usize,
    extents: Vec<f64>,
    subdivisions: Vec<usize>,
    coords: Vec<[f64; 2]>,
    elements: Vec<Element>,
    facets: Vec<u8>,
    kinds: Vec<NodeKind>,
    lumped: Vec<f64>,
    dirichlet: Vec<Facet>,
}

impl Mesh {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_nodes(&self) -> usize {
        self.coords.len()
    }

    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    pub fn coords(&self, node: usize) -> &[f64] {
        &self.coords[node][..self.dim]
    }

    pub fn kind(&self, node: usize) -> NodeKind {
        self.kinds[node]
    }

    pub fn extents(&self) -> &[f64] {
        &self.extents
    }

    pub fn subdivisions(&self) -> &[usize] {
        &self.subdivisions
    }

    pub fn dirichlet_facets(&self) -> &[Facet] {
        &self.dirichlet
    }

    pub fn on_facet(&self, node: usize, facet: Facet) -> bool {
        self.facets[node] & facet.bit() != 0
    }

    /// Lumped nodal weights m_i = Σ_T |T| / (nodes per element).
    pub fn lumped_mass(&self) -> &[f64] {
        &self.lumped
    }

    /// |Ω|
    pub fn volume(&self) -> f64 {
        self.extents.iter().product()
    }

    /// Boundary pieces of `facet` as `(node, weight)` pairs; weights are the
    /// lumped facet measure (1 for a 1D end point).
    pub fn facet_weights(&self, facet: Facet) -> Vec<(usize, f64)> {
        if self.dim == 1 {
            let node = match facet {
                Facet::Left => 0,
                _ => self.n_nodes() - 1,
            };
            return vec![(node, 1.0)];
        }
        let (nx, ny) = (self.subdivisions[0], self.subdivisions[1]);
        let (hx, hy) = (self.extents[0] / nx as f64, self.extents[1] / ny as f64);
        let id = |i: usize, j: usize| j * (nx + 1) + i;
        let mut w = Vec::new();
        match facet {
            Facet::Bottom | Facet::Top => {
                let j = if facet == Facet::Bottom { 0 } else { ny };
                for i in 0..nx {
                    w.push((id(i, j), 0.5 * hx));
                    w.push((id(i + 1, j), 0.5 * hx));
                }
            }
            Facet::Left | Facet::Right => {
                let i = if facet == Facet::Left { 0 } else { nx };
                for j in 0..ny {
                    w.push((id(i, j), 0.5 * hy));
                    w.push((id(i, j + 1), 0.5 * hy));
                }
            }
        }
        w
    }
}

/// Builds a structured mesh; 2D rectangles are split along the (i,j)–(i+1,j+1)
/// diagonal into two counter-clockwise triangles.
pub fn build_mesh(dim: usize, extents: &[f64], subdivisions: &[usize], dirichlet: &[Facet]) -> Result<Mesh, MeshError> {
    if !(1..=2).contains(&dim) {
        return Err(MeshError::Dimension(dim));
    }
    if extents.len() != dim || subdivisions.len() != dim {
        return Err(MeshError::Arity { expected: dim, got: extents.len().min(subdivisions.len()) });
    }
    if let Some(&e) = extents.iter().find(|&&e| !(e > 0.0)) {
        return Err(MeshError::Extent(e));
    }
    if subdivisions.contains(&0) {
        return Err(MeshError::Subdivisions);
    }
    if let Some(&f) = dirichlet.iter().find(|f| !f.exists_in(dim)) {
        return Err(MeshError::Facet(f, dim));
    }
    if dirichlet.is_empty() {
        return Err(MeshError::EmptyDirichlet);
    }

    let mut coords = Vec::new();
    let mut facets = Vec::new();
    let mut elements = Vec::new();
    if dim == 1 {
        let n = subdivisions[0];
        let h = extents[0] / n as f64;
        for i in 0..=n {
            coords.push([i as f64 * h, 0.0]);
            let mut f = 0;
            if i == 0 {
                f |= Facet::Left.bit();
            }
            if i == n {
                f |= Facet::Right.bit();
            }
            facets.push(f);
        }
        for i in 0..n {
            elements.push(Element { nodes: [i, i + 1, 0], n: 2, measure: h, grads: [[-1.0 / h, 0.0], [1.0 / h, 0.0], [0.0; 2]] });
        }
    } else {
        let (nx, ny) = (subdivisions[0], subdivisions[1]);
        let (hx, hy) = (extents[0] / nx as f64, extents[1] / ny as f64);
        for j in 0..=ny {
            for i in 0..=nx {
                coords.push([i as f64 * hx, j as f64 * hy]);
                let mut f = 0;
                if i == 0 {
                    f |= Facet::Left.bit();
                }
                if i == nx {
                    f |= Facet::Right.bit();
                }
                if j == 0 {
                    f |= Facet::Bottom.bit();
                }
                if j == ny {
                    f |= Facet::Top.bit();
                }
                facets.push(f);
            }
        }
        let id = |i: usize, j: usize| j * (nx + 1) + i;
        for j in 0..ny {
            for i in 0..nx {
                let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
                elements.push(triangle([a, b, c], &coords));
                elements.push(triangle([a, c, d], &coords));
            }
        }
    }

    let dmask = dirichlet.iter().fold(0u8, |m, f| m | f.bit());
    let kinds = facets
        .iter()
        .map(|&f| {
            if f & dmask != 0 {
                NodeKind::Dirichlet
            } else if f != 0 {
                NodeKind::Neumann
            } else {
                NodeKind::Interior
            }
        })
        .collect();

    let mut lumped = vec![0.0; coords.len()];
    for e in &elements {
        for &a in e.nodes() {
            lumped[a] += e.measure / e.n as f64;
        }
    }

    let mut dirichlet = dirichlet.to_vec();
    dirichlet.sort();
    dirichlet.dedup();
    Ok(Mesh { dim, extents: extents.to_vec(), subdivisions: subdivisions.to_vec(), coords, elements, facets, kinds, lumped, dirichlet })
}

fn triangle(nodes: [usize; 3], coords: &[[f64; 2]]) -> Element {
    let [p1, p2, p3] = nodes.map(|n| coords[n]);
    let area2 = (p2[0] - p1[0]) * (p3[1] - p1[1]) - (p3[0] - p1[0]) * (p2[1] - p1[1]);
    let grads = [
        [(p2[1] - p3[1]) / area2, (p3[0] - p2[0]) / area2],
        [(p3[1] - p1[1]) / area2, (p1[0] - p3[0]) / area2],
        [(p1[1] - p2[1]) / area2, (p2[0] - p1[0]) / area2],
    ];
    Element { nodes, n: 3, measure: 0.5 * area2, grads }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts() {
        let m = build_mesh(1, &[1.0], &[4], &[Facet::Left]).unwrap();
        assert_eq!((m.n_nodes(), m.n_elements()), (5, 4));
        assert_eq!(m.kind(0), NodeKind::Dirichlet);
        assert_eq!(m.kind(4), NodeKind::Neumann);
        assert_eq!(m.kind(2), NodeKind::Interior);

        let m = build_mesh(2, &[1.0, 1.0], &[2, 2], &[Facet::Left]).unwrap();
        assert_eq!((m.n_nodes(), m.n_elements()), (9, 8));
        assert_eq!(m.kind(4), NodeKind::Interior);
        assert_eq!(m.kind(3), NodeKind::Dirichlet);
        assert_eq!(m.kind(5), NodeKind::Neumann);
    }

    #[test]
    fn empty_dirichlet_rejected() {
        assert_eq!(build_mesh(1, &[1.0], &[4], &[]).unwrap_err(), MeshError::EmptyDirichlet);
        assert!(matches!(build_mesh(1, &[1.0], &[4], &[Facet::Top]), Err(MeshError::Facet(..))));
        assert!(build_mesh(2, &[1.0, 1.0], &[0, 2], &[Facet::Left]).is_err());
    }

    #[test]
    fn elements_are_positive_and_partition_the_domain() {
        let m = build_mesh(2, &[2.0, 0.5], &[4, 3], &[Facet::Bottom]).unwrap();
        assert!(m.elements().iter().all(|e| e.measure > 0.0));
        let total: f64 = m.elements().iter().map(|e| e.measure).sum();
        assert!((total - 1.0).abs() < 1e-14);
        let lumped: f64 = m.lumped_mass().iter().sum();
        assert!((lumped - 1.0).abs() < 1e-14);
        for e in m.elements() {
            assert!(e.nodes().iter().all(|&n| n < m.n_nodes()));
            // gradients of a partition of unity sum to zero
            for k in 0..2 {
                let s: f64 = (0..3).map(|a| e.grad(a)[k]).sum();
                assert!(s.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn facet_weights_sum_to_facet_length() {
        let m = build_mesh(2, &[2.0, 0.5], &[4, 3], &[Facet::Bottom]).unwrap();
        let s: f64 = m.facet_weights(Facet::Right).iter().map(|p| p.1).sum();
        assert!((s - 0.5).abs() < 1e-14);
        let s: f64 = m.facet_weights(Facet::Top).iter().map(|p| p.1).sum();
        assert!((s - 2.0).abs() < 1e-14);
    }
}
