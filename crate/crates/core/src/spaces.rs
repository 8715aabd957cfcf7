//! Discrete spaces of the complex: DOF layouts, numbering and counts.

use std::fmt;

use nalgebra::DVector;

use crate::mesh::{Element, Mesh};
use crate::polybasis::{dim_p, dim_p1};

/// The three spaces of the complex.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, clap::ValueEnum)]
pub enum SpaceKind {
    /// Scalar head space (gradient domain).
    V,
    /// Vector space (rotor domain).
    Sigma,
    /// Scalar tail space.
    W,
}

impl SpaceKind {
    pub const ALL: [SpaceKind; 3] = [SpaceKind::V, SpaceKind::Sigma, SpaceKind::W];

    pub fn name(self) -> &'static str {
        match self {
            SpaceKind::V => "V",
            SpaceKind::Sigma => "Sigma",
            SpaceKind::W => "W",
        }
    }
}

impl fmt::Display for SpaceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, clap::ValueEnum)]
pub enum BoundaryCondition {
    #[default]
    None,
    /// Boundary edge and vertex unknowns are removed.
    Homogeneous,
}

impl fmt::Display for BoundaryCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BoundaryCondition::None => "none",
            BoundaryCondition::Homogeneous => "homogeneous",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, clap::ValueEnum)]
pub enum Variant {
    #[default]
    Full,
    /// Reduced element unknowns; only the layout and counts are provided.
    Serendipity,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Full => "full",
            Variant::Serendipity => "serendipity",
        })
    }
}

/// Number of pairwise non-aligned edges of an element (edges lying on
/// distinct lines), at least 2.
pub fn eta(mesh: &Mesh, element: &Element) -> usize {
    let mut lines: Vec<(nalgebra::Vector2<f64>, f64)> = Vec::new();
    for &e in &element.edges {
        let edge = &mesh.edges[e];
        let n = edge.normal;
        let c = n.dot(&edge.midpoint);
        let scale = element.diameter;
        let aligned = lines.iter().any(|(m, d)| {
            let cross = m.x * n.y - m.y * n.x;
            cross.abs() < 1e-10 && (d - c * m.dot(&n).signum()).abs() < 1e-10 * scale
        });
        if !aligned {
            lines.push((n, c));
        }
    }
    lines.len().max(2)
}

/// Serendipity degree `max(k + 1 - η, -1)`.
pub fn serendipity_degree(k: usize, eta: usize) -> isize {
    (k as isize + 1 - eta as isize).max(-1)
}

/// Sizes of the element, edge and vertex unknown blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockSizes {
    pub element: usize,
    pub edge: usize,
    pub vertex: usize,
}

/// Block sizes of `kind` at degree `k` for an element with serendipity
/// number `eta` (ignored for the full variant).
pub fn block_sizes(kind: SpaceKind, variant: Variant, k: usize, eta: usize) -> BlockSizes {
    let k = k as isize;
    let element_degree = match variant {
        Variant::Full => k - 1,
        Variant::Serendipity => serendipity_degree(k as usize, eta),
    };
    // the Koszul complement of Σ drops one degree further than V
    let complement_degree = match variant {
        Variant::Full => k - 1,
        Variant::Serendipity => element_degree - 1,
    };
    match kind {
        SpaceKind::V => BlockSizes {
            element: dim_p(element_degree),
            edge: dim_p1(k - 1),
            vertex: 1,
        },
        SpaceKind::Sigma => BlockSizes {
            // Roly^{k-1} and the Koszul complement (x - x_T) P^{m}
            element: dim_p(k) - 1 + dim_p(complement_degree),
            edge: dim_p1(k) + dim_p1(k - 1),
            vertex: 1,
        },
        SpaceKind::W => BlockSizes {
            element: dim_p(k),
            edge: dim_p1(k - 1),
            vertex: 1,
        },
    }
}

/// Local DOF count of `kind` on an element with `nedges` edges (and as many vertices).
pub fn local_dof_count(kind: SpaceKind, variant: Variant, k: usize, nedges: usize, eta: usize) -> usize {
    let b = block_sizes(kind, variant, k, eta);
    b.element + nedges * (b.edge + b.vertex)
}

/// Global numbering of a discrete space.
///
/// Unknowns are ordered element blocks first, then edge blocks, then vertex
/// blocks, each by entity id. With homogeneous boundary conditions the blocks
/// of boundary edges and vertices are left out.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceLayout {
    pub kind: SpaceKind,
    pub k: usize,
    pub bc: BoundaryCondition,
    pub variant: Variant,
    pub element_sizes: Vec<usize>,
    pub edge_size: usize,
    pub vertex_size: usize,
    element_offset: Vec<usize>,
    edge_offset: Vec<Option<usize>>,
    vertex_offset: Vec<Option<usize>>,
    ndofs: usize,
}

impl SpaceLayout {
    pub fn new(mesh: &Mesh, kind: SpaceKind, k: usize, bc: BoundaryCondition, variant: Variant) -> Self {
        let element_sizes: Vec<usize> = mesh
            .elements
            .iter()
            .map(|t| block_sizes(kind, variant, k, eta(mesh, t)).element)
            .collect();
        let b = block_sizes(kind, variant, k, 2);
        let mut n = 0;
        let element_offset = element_sizes
            .iter()
            .map(|&s| {
                n += s;
                n - s
            })
            .collect();
        let keep = |boundary: bool| bc == BoundaryCondition::None || !boundary;
        let edge_offset = mesh
            .edges
            .iter()
            .map(|e| {
                keep(e.boundary).then(|| {
                    n += b.edge;
                    n - b.edge
                })
            })
            .collect();
        let vertex_offset = (0..mesh.num_vertices())
            .map(|v| {
                keep(mesh.is_boundary_vertex(v)).then(|| {
                    n += b.vertex;
                    n - b.vertex
                })
            })
            .collect();
        SpaceLayout {
            kind,
            k,
            bc,
            variant,
            element_sizes,
            edge_size: b.edge,
            vertex_size: b.vertex,
            element_offset,
            edge_offset,
            vertex_offset,
            ndofs: n,
        }
    }

    pub fn full(mesh: &Mesh, kind: SpaceKind, k: usize) -> Self {
        Self::new(mesh, kind, k, BoundaryCondition::None, Variant::Full)
    }

    pub fn ndofs(&self) -> usize {
        self.ndofs
    }

    pub fn element_offset(&self, t: usize) -> usize {
        self.element_offset[t]
    }

    pub fn edge_offset(&self, e: usize) -> Option<usize> {
        self.edge_offset[e]
    }

    pub fn vertex_offset(&self, v: usize) -> Option<usize> {
        self.vertex_offset[v]
    }

    /// Number of local unknowns of element `t`.
    pub fn local_size(&self, mesh: &Mesh, t: usize) -> usize {
        self.element_sizes[t] + mesh.elements[t].num_edges() * (self.edge_size + self.vertex_size)
    }

    /// Offset of the block of loop edge `i` within the local vector of an
    /// element with element block size `elem`.
    pub fn local_edge_offset(&self, elem: usize, i: usize) -> usize {
        elem + i * self.edge_size
    }

    /// Offset of loop vertex `i` within the local vector of an element with
    /// element block size `elem` and `nedges` edges.
    pub fn local_vertex_offset(&self, elem: usize, nedges: usize, i: usize) -> usize {
        elem + nedges * self.edge_size + i * self.vertex_size
    }

    /// Global index of every local unknown of element `t` (`None` for removed ones).
    ///
    /// Local order: element block, then the block of each edge in loop order,
    /// then each loop vertex.
    pub fn local_to_global(&self, mesh: &Mesh, t: usize) -> Vec<Option<usize>> {
        let el = &mesh.elements[t];
        let mut out = Vec::with_capacity(self.local_size(mesh, t));
        let off = self.element_offset[t];
        out.extend((off..off + self.element_sizes[t]).map(Some));
        for &e in &el.edges {
            let o = self.edge_offset[e];
            out.extend((0..self.edge_size).map(|j| o.map(|o| o + j)));
        }
        for &v in &el.vertices {
            let o = self.vertex_offset[v];
            out.extend((0..self.vertex_size).map(|j| o.map(|o| o + j)));
        }
        out
    }

    /// Positions of this layout's unknowns within the layout without boundary
    /// conditions of the same space.
    pub fn full_indices(&self, mesh: &Mesh) -> Vec<usize> {
        let full = SpaceLayout::new(mesh, self.kind, self.k, BoundaryCondition::None, self.variant);
        let mut idx = Vec::with_capacity(self.ndofs);
        for t in 0..mesh.num_elements() {
            let o = full.element_offset[t];
            idx.extend(o..o + self.element_sizes[t]);
        }
        for e in 0..mesh.num_edges() {
            if self.edge_offset[e].is_some() {
                let o = full.edge_offset[e].unwrap();
                idx.extend(o..o + self.edge_size);
            }
        }
        for v in 0..mesh.num_vertices() {
            if self.vertex_offset[v].is_some() {
                let o = full.vertex_offset[v].unwrap();
                idx.extend(o..o + self.vertex_size);
            }
        }
        idx
    }

    /// Gathers the local unknowns of element `t` from a global vector
    /// (removed unknowns read as zero).
    pub fn gather(&self, mesh: &Mesh, t: usize, global: &DVector<f64>) -> DVector<f64> {
        let l2g = self.local_to_global(mesh, t);
        DVector::from_iterator(l2g.len(), l2g.iter().map(|g| g.map_or(0.0, |g| global[g])))
    }
}

/// A vector of unknowns together with its layout.
#[derive(Debug, Clone, PartialEq)]
pub struct DofVector {
    pub layout: SpaceLayout,
    pub values: DVector<f64>,
}

impl DofVector {
    pub fn zeros(layout: SpaceLayout) -> Self {
        let n = layout.ndofs();
        DofVector {
            layout,
            values: DVector::zeros(n),
        }
    }

    pub fn local(&self, mesh: &Mesh, t: usize) -> DVector<f64> {
        self.layout.gather(mesh, t, &self.values)
    }
}

/// One row of the local DOF count table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DofTableRow {
    pub shape: &'static str,
    pub nedges: usize,
    pub k: usize,
    pub space: SpaceKind,
    pub full: usize,
    pub serendipity: usize,
}

pub const TABLE_SHAPES: [(&str, usize); 4] = [("triangle", 3), ("quadrangle", 4), ("pentagon", 5), ("hexagon", 6)];

/// Local DOF counts on regular polygons, counted from the layout of a
/// single-element mesh.
pub fn dof_table(degrees: std::ops::RangeInclusive<usize>) -> Vec<DofTableRow> {
    let mut rows = Vec::new();
    for (shape, n) in TABLE_SHAPES {
        let mesh = crate::mesh::regular_polygon_mesh(n);
        for k in degrees.clone() {
            for space in SpaceKind::ALL {
                let count = |variant| SpaceLayout::new(&mesh, space, k, BoundaryCondition::None, variant).ndofs();
                rows.push(DofTableRow {
                    shape,
                    nedges: n,
                    k,
                    space,
                    full: count(Variant::Full),
                    serendipity: count(Variant::Serendipity),
                });
            }
        }
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_structured_mesh, regular_polygon_mesh, MeshFamily};

    #[test]
    fn eta_of_regular_polygons() {
        for n in 3..=8 {
            let m = regular_polygon_mesh(n);
            assert_eq!(eta(&m, &m.elements[0]), n);
        }
    }

    #[test]
    fn single_triangle_k0() {
        let m = regular_polygon_mesh(3);
        let sizes: Vec<usize> = SpaceKind::ALL
            .iter()
            .map(|&s| SpaceLayout::full(&m, s, 0).ndofs())
            .collect();
        assert_eq!(sizes, vec![3, 6, 4]);
    }

    #[test]
    fn triangle_sigma_row() {
        let got: Vec<(usize, usize)> = dof_table(0..=4)
            .into_iter()
            .filter(|r| r.nedges == 3 && r.space == SpaceKind::Sigma)
            .map(|r| (r.full, r.serendipity))
            .collect();
        assert_eq!(got, vec![(6, 6), (15, 14), (26, 23), (39, 34), (54, 47)]);
    }

    #[test]
    fn counts_match_formula() {
        for row in dof_table(0..=4) {
            let f = local_dof_count(row.space, Variant::Full, row.k, row.nedges, row.nedges);
            let s = local_dof_count(row.space, Variant::Serendipity, row.k, row.nedges, row.nedges);
            assert_eq!((row.full, row.serendipity), (f, s), "{row:?}");
        }
    }

    #[test]
    fn homogeneous_layout_drops_boundary_blocks() {
        let m = build_structured_mesh(MeshFamily::Cartesian, 3).unwrap();
        for space in SpaceKind::ALL {
            let full = SpaceLayout::full(&m, space, 2);
            let bc = SpaceLayout::new(&m, space, 2, BoundaryCondition::Homogeneous, Variant::Full);
            let removed = m.num_boundary_edges() * (full.edge_size + full.vertex_size);
            assert_eq!(full.ndofs() - bc.ndofs(), removed);
            let idx = bc.full_indices(&m);
            assert_eq!(idx.len(), bc.ndofs());
            assert!(idx.windows(2).all(|w| w[0] < w[1]));
            // local maps agree through the embedding
            for t in 0..m.num_elements() {
                for (a, b) in bc.local_to_global(&m, t).iter().zip(full.local_to_global(&m, t)) {
                    if let Some(a) = a {
                        assert_eq!(Some(idx[*a]), b);
                    }
                }
            }
        }
    }
}
