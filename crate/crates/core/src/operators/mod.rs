//! Discrete operators of the complex and their global assembly.

mod local;

use nalgebra::DVector;

pub use local::{EdgeOperators, ElementBases, ElementOperators, LocalSizes};

use crate::error::Result;
use crate::linalg::{SparseMatrix, TripletBuilder};
use crate::mesh::{Mesh, Point};
use crate::par::{try_map_indexed, Execution};
use crate::polybasis::dim_p;
use crate::spaces::{SpaceKind, SpaceLayout};

/// Degree of the rules used to project non-polynomial data.
pub fn interpolation_degree(k: usize) -> usize {
    (2 * k + 12).max(20)
}

/// All local operators of a mesh at degree `k`, with the full (boundary
/// unknowns included) layouts of the three spaces.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub mesh: Mesh,
    pub k: usize,
    pub exec: Execution,
    pub edges: Vec<EdgeOperators>,
    pub elements: Vec<ElementOperators>,
    pub v: SpaceLayout,
    pub sigma: SpaceLayout,
    pub w: SpaceLayout,
}

impl Discretization {
    pub fn new(mesh: Mesh, k: usize, exec: Execution) -> Result<Self> {
        let edges = try_map_indexed(exec, mesh.num_edges(), |e| EdgeOperators::new(&mesh, e, k))?;
        let elements = try_map_indexed(exec, mesh.num_elements(), |t| {
            ElementOperators::new(&mesh, t, k, &edges)
        })?;
        let v = SpaceLayout::full(&mesh, SpaceKind::V, k);
        let sigma = SpaceLayout::full(&mesh, SpaceKind::Sigma, k);
        let w = SpaceLayout::full(&mesh, SpaceKind::W, k);
        Ok(Discretization {
            mesh,
            k,
            exec,
            edges,
            elements,
            v,
            sigma,
            w,
        })
    }

    pub fn layout(&self, kind: SpaceKind) -> &SpaceLayout {
        match kind {
            SpaceKind::V => &self.v,
            SpaceKind::Sigma => &self.sigma,
            SpaceKind::W => &self.w,
        }
    }

    /// Global indices of the unknowns of element `t` in space `kind`.
    pub fn l2g(&self, kind: SpaceKind, t: usize) -> Vec<Option<usize>> {
        self.layout(kind).local_to_global(&self.mesh, t)
    }

    /// Global discrete gradient, `dim Σ × dim V`.
    pub fn global_gradient(&self) -> SparseMatrix {
        let k = self.k;
        let mut b = TripletBuilder::new(self.sigma.ndofs(), self.v.ndofs());
        for op in &self.elements {
            let t = op.element;
            let rows: Vec<usize> = (0..op.sizes.sigma_element())
                .map(|r| self.sigma.element_offset(t) + r)
                .collect();
            let cols = self.l2g(SpaceKind::V, t);
            for (i, &r) in rows.iter().enumerate() {
                for (j, c) in cols.iter().enumerate() {
                    b.push(r, c.unwrap(), op.discrete_gradient[(i, j)]);
                }
            }
        }
        for (e, op) in self.edges.iter().enumerate() {
            let row0 = self.sigma.edge_offset(e).unwrap();
            let cols = self.edge_scalar_dofs(&self.v, e);
            for r in 0..=k {
                for (j, &c) in cols.iter().enumerate() {
                    b.push(row0 + r, c, op.gradient[(r, j)]);
                }
            }
        }
        b.build()
    }

    /// Global discrete rotor, `dim W × dim Σ`.
    pub fn global_rotor(&self) -> SparseMatrix {
        let k = self.k;
        let mut b = TripletBuilder::new(self.w.ndofs(), self.sigma.ndofs());
        for op in &self.elements {
            let t = op.element;
            let cols = self.l2g(SpaceKind::Sigma, t);
            let row0 = self.w.element_offset(t);
            for i in 0..op.rotor.nrows() {
                for (j, c) in cols.iter().enumerate() {
                    b.push(row0 + i, c.unwrap(), op.rotor[(i, j)]);
                }
            }
        }
        for e in 0..self.mesh.num_edges() {
            let (w0, s0) = (self.w.edge_offset(e).unwrap(), self.sigma.edge_offset(e).unwrap());
            for j in 0..k {
                b.push(w0 + j, s0 + k + 1 + j, 1.0);
            }
        }
        for v in 0..self.mesh.num_vertices() {
            b.push(self.w.vertex_offset(v).unwrap(), self.sigma.vertex_offset(v).unwrap(), 1.0);
        }
        b.build()
    }

    /// Global indices of the edge-local scalar unknowns `[q_E | v0 | v1]`.
    fn edge_scalar_dofs(&self, layout: &SpaceLayout, e: usize) -> Vec<usize> {
        let edge = &self.mesh.edges[e];
        let o = layout.edge_offset(e).unwrap();
        let mut idx: Vec<usize> = (o..o + self.k).collect();
        idx.extend(edge.vertices.iter().map(|&v| layout.vertex_offset(v).unwrap()));
        idx
    }

    fn assemble(&self, kind: SpaceKind, local: impl Fn(&ElementOperators) -> &nalgebra::DMatrix<f64>) -> SparseMatrix {
        let layout = self.layout(kind);
        let mut b = TripletBuilder::new(layout.ndofs(), layout.ndofs());
        for op in &self.elements {
            let l2g = self.l2g(kind, op.element);
            b.add_block(&l2g, &l2g, local(op));
        }
        b.build()
    }

    /// Gram matrix of the discrete L² product on Σ.
    pub fn sigma_product(&self) -> SparseMatrix {
        self.assemble(SpaceKind::Sigma, |op| &op.sigma_product)
    }

    /// Matrix of the rot-rot form `a_h`.
    pub fn rotrot_matrix(&self) -> SparseMatrix {
        self.assemble(SpaceKind::Sigma, |op| &op.rotrot)
    }

    /// Gram matrix of the potential-based L² norm on V.
    pub fn v_product(&self) -> SparseMatrix {
        self.assemble(SpaceKind::V, |op| &op.v_product)
    }

    /// `M_Σ G̲`, assembled element by element.
    pub fn mixed_matrix(&self) -> SparseMatrix {
        let mut b = TripletBuilder::new(self.sigma.ndofs(), self.v.ndofs());
        for op in &self.elements {
            let rows = self.l2g(SpaceKind::Sigma, op.element);
            let cols = self.l2g(SpaceKind::V, op.element);
            b.add_block(&rows, &cols, &(&op.sigma_product * &op.discrete_gradient));
        }
        b.build()
    }

    /// Diagonal of the component norm: element unknowns weigh 1, edge unknowns
    /// `h_T` (`h_T³` for the rotor traces of Σ), vertex unknowns `h_T²`
    /// (`h_T⁴` on Σ), summed over the elements sharing them.
    pub fn component_weights(&self, kind: SpaceKind) -> DVector<f64> {
        let layout = self.layout(kind);
        let k = self.k;
        let mut d = DVector::zeros(layout.ndofs());
        for op in &self.elements {
            let h = self.mesh.elements[op.element].diameter;
            let l2g = self.l2g(kind, op.element);
            let s = &op.sizes;
            let nedges = s.nedges;
            let (elem, per_edge) = match kind {
                SpaceKind::V => (s.v_element(), k),
                SpaceKind::W => (s.w_element(), k),
                SpaceKind::Sigma => (s.sigma_element(), 2 * k + 1),
            };
            for (j, g) in l2g.iter().enumerate() {
                let wgt = if j < elem {
                    1.0
                } else if j < elem + nedges * per_edge {
                    let r = (j - elem) % per_edge;
                    if kind == SpaceKind::Sigma && r > k {
                        h.powi(3)
                    } else {
                        h
                    }
                } else if kind == SpaceKind::Sigma {
                    h.powi(4)
                } else {
                    h * h
                };
                d[g.unwrap()] += wgt;
            }
        }
        d
    }

    /// Interpolate of a scalar function on V.
    pub fn interpolate_v(&self, q: impl Fn(Point) -> f64 + Sync) -> DVector<f64> {
        self.interpolate_scalar(SpaceKind::V, dim_p(self.k as isize - 1), &q)
    }

    /// Interpolate of a scalar function on W.
    pub fn interpolate_w(&self, r: impl Fn(Point) -> f64 + Sync) -> DVector<f64> {
        self.interpolate_scalar(SpaceKind::W, dim_p(self.k as isize), &r)
    }

    fn interpolate_scalar(&self, kind: SpaceKind, elem: usize, q: &(dyn Fn(Point) -> f64 + Sync)) -> DVector<f64> {
        let layout = self.layout(kind);
        let deg = interpolation_degree(self.k);
        let mesh = &self.mesh;
        let mut out = DVector::zeros(layout.ndofs());
        let blocks = crate::par::map_indexed(self.exec, mesh.num_elements(), |t| {
            let op = &self.elements[t];
            let basis = op.bases.scalar.columns(0, elem);
            op.polys.project(mesh, t, &basis, deg, |x| [q(x), 0.0])
        });
        for (t, c) in blocks.iter().enumerate() {
            let o = layout.element_offset(t);
            out.rows_mut(o, c.len()).copy_from(c);
        }
        let edges = crate::par::map_indexed(self.exec, mesh.num_edges(), |e| {
            self.edges[e].polys.project(mesh, e, self.k, deg, q)
        });
        for (e, c) in edges.iter().enumerate() {
            let o = layout.edge_offset(e).unwrap();
            out.rows_mut(o, c.len()).copy_from(c);
        }
        for v in &mesh.vertices {
            out[layout.vertex_offset(v.id).unwrap()] = q(v.x);
        }
        out
    }

    /// Interpolate on Σ of a vector field `v` with rotor `rot_v`.
    pub fn interpolate_sigma(
        &self,
        v: impl Fn(Point) -> [f64; 2] + Sync,
        rot_v: impl Fn(Point) -> f64 + Sync,
    ) -> DVector<f64> {
        let k = self.k;
        let deg = interpolation_degree(k);
        let mesh = &self.mesh;
        let layout = &self.sigma;
        let mut out = DVector::zeros(layout.ndofs());
        let blocks = crate::par::map_indexed(self.exec, mesh.num_elements(), |t| {
            let op = &self.elements[t];
            let a = op.polys.project(mesh, t, &op.bases.roly, deg, &v);
            let b = op.polys.project(mesh, t, &op.bases.croly, deg, &v);
            (a, b)
        });
        for (t, (a, b)) in blocks.iter().enumerate() {
            let o = layout.element_offset(t);
            out.rows_mut(o, a.len()).copy_from(a);
            out.rows_mut(o + a.len(), b.len()).copy_from(b);
        }
        let edges = crate::par::map_indexed(self.exec, mesh.num_edges(), |e| {
            let t = mesh.edges[e].tangent;
            let p = &self.edges[e].polys;
            let ve = p.project(mesh, e, k + 1, deg, |x| {
                let val = v(x);
                val[0] * t.x + val[1] * t.y
            });
            let ce = p.project(mesh, e, k, deg, &rot_v);
            (ve, ce)
        });
        for (e, (ve, ce)) in edges.iter().enumerate() {
            let o = layout.edge_offset(e).unwrap();
            out.rows_mut(o, ve.len()).copy_from(ve);
            out.rows_mut(o + ve.len(), ce.len()).copy_from(ce);
        }
        for vx in &mesh.vertices {
            out[layout.vertex_offset(vx.id).unwrap()] = rot_v(vx.x);
        }
        out
    }
}

#[cfg(test)]
mod tests;
