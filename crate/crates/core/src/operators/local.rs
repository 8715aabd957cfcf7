//! Element and edge reconstructions.

use nalgebra::DMatrix;

use crate::error::Result;
use crate::linalg::{lu_solve, require, spd_solve};
use crate::mesh::{Mesh, Point};
use crate::polybasis::{dim_p, weighted_gram, Basis, EdgePolys, ElementPolys, Subspace, Tabulation};

/// Edge reconstructions shared by the scalar spaces.
///
/// Edge-local unknowns are ordered `[q_E (k) | q at v0 | q at v1]`; the same
/// layout serves both scalar spaces.
#[derive(Debug, Clone)]
pub struct EdgeOperators {
    pub polys: EdgePolys,
    /// Trace reconstruction `P^{k+1}_E`, as coefficients in the edge frame (`(k+2) × (k+2)`).
    pub potential: DMatrix<f64>,
    /// Tangential derivative of the trace, in `P^k(E)` (`(k+1) × (k+2)`).
    pub gradient: DMatrix<f64>,
}

impl EdgeOperators {
    pub fn new(mesh: &Mesh, e: usize, k: usize) -> Result<Self> {
        let polys = EdgePolys::new(mesh, e, k + 2)?;
        let edge = &mesh.edges[e];
        let n = k + 2;
        // π^{k-1}_E p = q_E reads off the first k coefficients of the
        // hierarchical frame; the endpoint values close the system.
        let mut a = DMatrix::zeros(n, n);
        for j in 0..k {
            a[(j, j)] = 1.0;
        }
        let ends = [mesh.vertex(edge.vertices[0]), mesh.vertex(edge.vertices[1])];
        let vals = polys.eval(&ends, n);
        a.rows_mut(k, 2).copy_from(&vals);
        let potential = require(lu_solve(&a, &DMatrix::identity(n, n)), e, "edge trace system")?;
        let deriv = polys.eval_derivative(&polys.rule.points, n) * &potential;
        let low = polys.values.columns(0, k + 1).into_owned();
        let gradient = weighted_gram(&polys.rule.weights, &[&low], &[&deriv]);
        Ok(EdgeOperators {
            polys,
            potential,
            gradient,
        })
    }

    /// Values of the trace reconstruction at the edge quadrature points
    /// (`npts × (k+2)`, edge-local unknowns).
    pub fn potential_values(&self) -> DMatrix<f64> {
        self.polys.values.columns(0, self.potential.nrows()) * &self.potential
    }
}

/// Bases used on an element, all orthonormal in `L²(T)`.
#[derive(Debug, Clone)]
pub struct ElementBases {
    /// `P^{k+1}`; its first `dim P^m` members span `P^m`.
    pub scalar: Basis,
    /// `P^k` squared.
    pub vector: Basis,
    /// `Roly^{k-1}`
    pub roly: Basis,
    /// `cRoly^k`
    pub croly: Basis,
    /// `cRoly^{k+2}`
    pub croly_high: Basis,
    /// `cGoly^{k+2}`
    pub cgoly_high: Basis,
    /// `P^{k+1}` with zero mean.
    pub scalar_zero_mean: Basis,
}

/// Local sizes and offsets of the three spaces on one element.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LocalSizes {
    pub k: usize,
    pub nedges: usize,
    pub roly: usize,
    pub croly: usize,
}

impl LocalSizes {
    pub fn v_element(&self) -> usize {
        dim_p(self.k as isize - 1)
    }
    pub fn w_element(&self) -> usize {
        dim_p(self.k as isize)
    }
    pub fn sigma_element(&self) -> usize {
        self.roly + self.croly
    }
    pub fn nv(&self) -> usize {
        self.v_element() + self.nedges * (self.k + 1)
    }
    pub fn nw(&self) -> usize {
        self.w_element() + self.nedges * (self.k + 1)
    }
    pub fn nsigma(&self) -> usize {
        self.sigma_element() + self.nedges * (2 * self.k + 2)
    }
    /// Offset of the `v_E` block of loop edge `i` (followed by `C_E`).
    pub fn sigma_edge(&self, i: usize) -> usize {
        self.sigma_element() + i * (2 * self.k + 1)
    }
    pub fn sigma_vertex(&self, i: usize) -> usize {
        self.sigma_element() + self.nedges * (2 * self.k + 1) + i
    }
    /// Edge-local to element-local map of a scalar space with element block
    /// size `elem`, for loop edge `i` whose endpoints sit at loop slots `slots`.
    pub fn scalar_edge_indices(&self, elem: usize, i: usize, slots: [usize; 2]) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.k).map(|j| elem + i * self.k + j).collect();
        let vert = elem + self.nedges * self.k;
        idx.push(vert + slots[0]);
        idx.push(vert + slots[1]);
        idx
    }
}

/// Reconstructions and local products on one element.
#[derive(Debug, Clone)]
pub struct ElementOperators {
    pub element: usize,
    pub polys: ElementPolys,
    pub bases: ElementBases,
    pub sizes: LocalSizes,
    /// Element gradient `G_T` in the vector basis (`2 dim P^k × nV`).
    pub gradient: DMatrix<f64>,
    /// Scalar potential `P_{V,T}` in `P^{k+1}` (`dim P^{k+1} × nV`).
    pub potential_v: DMatrix<f64>,
    /// Scalar rotor `R_T` in `P^k` (`dim P^k × nΣ`).
    pub rotor: DMatrix<f64>,
    /// Vector potential `P_{Σ,T}` in the vector basis (`2 dim P^k × nΣ`).
    pub potential_sigma: DMatrix<f64>,
    /// Vector rotor on the tail space, in the vector basis (`2 dim P^k × nW`).
    pub vector_rotor: DMatrix<f64>,
    /// Potential `P_{W,T}` in `P^{k+1}` (`dim P^{k+1} × nW`).
    pub potential_w: DMatrix<f64>,
    /// Restriction of the discrete gradient to the element (`nΣ × nV`).
    pub discrete_gradient: DMatrix<f64>,
    /// Restriction of the discrete rotor to the element (`nW × nΣ`).
    pub discrete_rotor: DMatrix<f64>,
    /// Local discrete L² product on the vector space.
    pub sigma_product: DMatrix<f64>,
    /// Stabilisation on the tail space.
    pub stabilization: DMatrix<f64>,
    /// Local rot-rot form `a_T`.
    pub rotrot: DMatrix<f64>,
    /// Local discrete L² norm on the head space built on the potentials.
    pub v_product: DMatrix<f64>,
}

/// Per-edge data on an element.
struct EdgeView<'a> {
    omega: f64,
    normal: Point,
    tangent: Point,
    ops: &'a EdgeOperators,
    weights: &'a [f64],
    /// Element-local indices of the edge-local scalar unknowns (V layout).
    v_idx: Vec<usize>,
    /// Same for the W layout.
    w_idx: Vec<usize>,
}

fn add_cols(dst: &mut DMatrix<f64>, src: &DMatrix<f64>, cols: &[usize], scale: f64) {
    for (j, &c) in cols.iter().enumerate() {
        let mut col = dst.column_mut(c);
        col.axpy(scale, &src.column(j), 1.0);
    }
}

fn vals_times(t: &Tabulation, m: &DMatrix<f64>) -> Vec<DMatrix<f64>> {
    t.val.iter().map(|v| v * m).collect()
}

impl ElementOperators {
    pub fn new(mesh: &Mesh, t: usize, k: usize, edges: &[EdgeOperators]) -> Result<Self> {
        let el = &mesh.elements[t];
        let polys = ElementPolys::new(mesh, t, k + 2)?;
        let ki = k as isize;
        let bases = ElementBases {
            scalar: polys.basis(Subspace::Scalar, ki + 1),
            vector: polys.basis(Subspace::Vector, ki),
            roly: polys.basis(Subspace::Roly, ki - 1),
            croly: polys.basis(Subspace::CRoly, ki),
            croly_high: polys.basis(Subspace::CRoly, ki + 2),
            cgoly_high: polys.basis(Subspace::CGoly, ki + 2),
            scalar_zero_mean: polys.basis(Subspace::ScalarZeroMean, ki + 1),
        };
        let sizes = LocalSizes {
            k,
            nedges: el.num_edges(),
            roly: bases.roly.dim(),
            croly: bases.croly.dim(),
        };
        let (nv, ns, nw) = (sizes.nv(), sizes.nsigma(), sizes.nw());
        let (dk, dkm1) = (dim_p(ki), dim_p(ki - 1));
        let w = &polys.rule.weights;
        let h = el.diameter;

        let ts = polys.tabulate(&bases.scalar);
        let tv = polys.tabulate(&bases.vector);
        let troly = polys.tabulate(&bases.roly);
        let tcroly = polys.tabulate(&bases.croly);
        let tcr2 = polys.tabulate(&bases.croly_high);
        let tcg2 = polys.tabulate(&bases.cgoly_high);
        let tzm = polys.tabulate(&bases.scalar_zero_mean);
        let s_k = ts.val[0].columns(0, dk).into_owned();
        let s_km1 = ts.val[0].columns(0, dkm1).into_owned();
        let s_kp1 = ts.val[0].clone();

        let views: Vec<EdgeView> = (0..sizes.nedges)
            .map(|i| {
                let e = el.edges[i];
                let slots = el.edge_vertex_slots(mesh, i);
                EdgeView {
                    omega: el.orientations[i] as f64,
                    normal: mesh.edges[e].normal,
                    tangent: mesh.edges[e].tangent,
                    ops: &edges[e],
                    weights: &edges[e].polys.rule.weights,
                    v_idx: sizes.scalar_edge_indices(dkm1, i, slots),
                    w_idx: sizes.scalar_edge_indices(dk, i, slots),
                }
            })
            .collect();
        // element bases at the edge quadrature points
        let at_edge = |b: &Basis, v: &EdgeView| polys.tabulate_at(b, &v.ops.polys.rule.points);

        let mass_vec = polys.gram(&bases.vector, &bases.vector);
        let mass_scalar = weighted_gram(w, &[&s_kp1], &[&s_kp1]);
        let mass_k = mass_scalar.view((0, 0), (dk, dk)).into_owned();

        // ---- head space: gradient and potential
        let mut rhs = DMatrix::zeros(2 * dk, nv);
        rhs.columns_mut(0, dkm1)
            .copy_from(&(-weighted_gram(w, &[tv.div()], &[&s_km1])));
        let mut rhs_p = DMatrix::zeros(tcr2.dim(), nv);
        for v in &views {
            let trace = v.ops.potential_values();
            let tve = at_edge(&bases.vector, v);
            add_cols(&mut rhs, &weighted_gram(v.weights, &[tve.dot(v.normal)], &[&trace]), &v.v_idx, v.omega);
            let tce = at_edge(&bases.croly_high, v);
            add_cols(&mut rhs_p, &weighted_gram(v.weights, &[tce.dot(v.normal)], &[&trace]), &v.v_idx, v.omega);
        }
        let gradient = require(spd_solve(&mass_vec, &rhs), t, "vector mass matrix")?;
        rhs_p -= weighted_gram(w, &tcr2.val, &vals_times(&tv, &gradient));
        let div_cr2 = weighted_gram(w, &[tcr2.div()], &[&s_kp1]);
        let potential_v = require(lu_solve(&div_cr2, &rhs_p), t, "divergence of the Koszul space")?;

        // ---- vector space: scalar rotor and potential
        let mut rhs = DMatrix::zeros(dk, ns);
        {
            let vr = ts.vrot();
            let vr_k = [vr[0].columns(0, dk).into_owned(), vr[1].columns(0, dk).into_owned()];
            rhs.columns_mut(0, sizes.roly)
                .copy_from(&weighted_gram(w, &vr_k, &troly.val));
        }
        let nedge_sigma = k + 1;
        for (i, v) in views.iter().enumerate() {
            let q = at_edge(&bases.scalar, v).val[0].columns(0, dk).into_owned();
            let ve = v.ops.polys.values.columns(0, nedge_sigma).into_owned();
            let g = weighted_gram(v.weights, &[&q], &[&ve]);
            let off = sizes.sigma_edge(i);
            let mut block = rhs.columns_mut(off, nedge_sigma);
            block += g * -v.omega;
        }
        let rotor = require(spd_solve(&mass_k, &rhs), t, "scalar mass matrix")?;

        // test functions vrot q (q of zero mean in P^{k+1}) and w in cRoly^k
        let nzm = tzm.dim();
        let mut lhs = DMatrix::zeros(2 * dk, 2 * dk);
        let mut rhs = DMatrix::zeros(2 * dk, ns);
        lhs.rows_mut(0, nzm).copy_from(&weighted_gram(w, &tzm.vrot(), &tv.val));
        lhs.rows_mut(nzm, sizes.croly)
            .copy_from(&weighted_gram(w, &tcroly.val, &tv.val));
        rhs.rows_mut(0, nzm)
            .copy_from(&(weighted_gram(w, &tzm.val, &[&s_k]) * &rotor));
        for (i, v) in views.iter().enumerate() {
            let q = at_edge(&bases.scalar_zero_mean, v).val[0].clone();
            let ve = v.ops.polys.values.columns(0, nedge_sigma).into_owned();
            let g = weighted_gram(v.weights, &[&q], &[&ve]);
            let off = sizes.sigma_edge(i);
            let mut block = rhs.view_mut((0, off), (nzm, nedge_sigma));
            block += g * v.omega;
        }
        rhs.view_mut((nzm, sizes.roly), (sizes.croly, sizes.croly))
            .copy_from(&weighted_gram(w, &tcroly.val, &tcroly.val));
        let potential_sigma = require(lu_solve(&lhs, &rhs), t, "vector potential system")?;

        // ---- tail space: vector rotor and potential
        let mut rhs = DMatrix::zeros(2 * dk, nw);
        rhs.columns_mut(0, dk).copy_from(&weighted_gram(w, &[tv.rot()], &[&s_k]));
        let mut rhs_p = DMatrix::zeros(tcg2.dim(), nw);
        for v in &views {
            let trace = v.ops.potential_values();
            let tve = at_edge(&bases.vector, v);
            add_cols(&mut rhs, &weighted_gram(v.weights, &[tve.dot(v.tangent)], &[&trace]), &v.w_idx, v.omega);
            let tge = at_edge(&bases.cgoly_high, v);
            add_cols(&mut rhs_p, &weighted_gram(v.weights, &[tge.dot(v.tangent)], &[&trace]), &v.w_idx, -v.omega);
        }
        let vector_rotor = require(spd_solve(&mass_vec, &rhs), t, "vector mass matrix")?;
        rhs_p += weighted_gram(w, &tcg2.val, &vals_times(&tv, &vector_rotor));
        let rot_cg2 = weighted_gram(w, &[tcg2.rot()], &[&s_kp1]);
        let potential_w = require(lu_solve(&rot_cg2, &rhs_p), t, "rotor of the Koszul space")?;

        // ---- discrete gradient and rotor restricted to the element
        let mut discrete_gradient = DMatrix::zeros(ns, nv);
        let proj_roly = weighted_gram(w, &troly.val, &vals_times(&tv, &gradient));
        let proj_croly = weighted_gram(w, &tcroly.val, &vals_times(&tv, &gradient));
        discrete_gradient.rows_mut(0, sizes.roly).copy_from(&require(
            spd_solve(&polys.gram(&bases.roly, &bases.roly), &proj_roly),
            t,
            "Roly mass matrix",
        )?);
        discrete_gradient.rows_mut(sizes.roly, sizes.croly).copy_from(&require(
            spd_solve(&polys.gram(&bases.croly, &bases.croly), &proj_croly),
            t,
            "cRoly mass matrix",
        )?);
        for (i, v) in views.iter().enumerate() {
            let off = sizes.sigma_edge(i);
            for (j, &c) in v.v_idx.iter().enumerate() {
                for r in 0..nedge_sigma {
                    discrete_gradient[(off + r, c)] += v.ops.gradient[(r, j)];
                }
            }
        }

        let mut discrete_rotor = DMatrix::zeros(nw, ns);
        discrete_rotor.rows_mut(0, dk).copy_from(&rotor);
        for i in 0..sizes.nedges {
            for j in 0..k {
                discrete_rotor[(dk + i * k + j, sizes.sigma_edge(i) + nedge_sigma + j)] = 1.0;
            }
            discrete_rotor[(dk + sizes.nedges * k + i, sizes.sigma_vertex(i))] = 1.0;
        }

        // ---- discrete L² product on the vector space
        let mut sigma_product = potential_sigma.transpose() * &mass_vec * &potential_sigma;
        for (i, v) in views.iter().enumerate() {
            let ew = v.weights;
            let tve = at_edge(&bases.vector, v);
            let mut res = tve.dot(v.tangent) * &potential_sigma;
            let ve = v.ops.polys.values.columns(0, nedge_sigma);
            let mut block = res.columns_mut(sizes.sigma_edge(i), nedge_sigma);
            block -= ve;
            sigma_product += weighted_gram(ew, &[&res], &[&res]) * h;

            let q = at_edge(&bases.scalar, v).val[0].columns(0, dk).into_owned();
            let low = v.ops.polys.values.columns(0, k).into_owned();
            let mut c = weighted_gram(ew, &[&low], &[&q]) * &rotor;
            for j in 0..k {
                c[(j, sizes.sigma_edge(i) + nedge_sigma + j)] -= 1.0;
            }
            sigma_product += c.transpose() * &c * h.powi(3);
        }
        for (i, &vx) in el.vertices.iter().enumerate() {
            let q = polys.tabulate_at(&bases.scalar, &[mesh.vertex(vx)]).val[0].columns(0, dk).into_owned();
            let mut r = q * &rotor;
            r[(0, sizes.sigma_vertex(i))] -= 1.0;
            sigma_product += r.transpose() * &r * h.powi(4);
        }

        // ---- stabilisation on the tail space and rot-rot form
        let mut y = potential_w.rows(0, dk).into_owned();
        for j in 0..dk {
            y[(j, j)] -= 1.0;
        }
        let mut stabilization = y.transpose() * &mass_k * &y / (h * h);
        for v in &views {
            let se = at_edge(&bases.scalar, v).val[0].clone();
            let mut z = se * &potential_w;
            add_cols(&mut z, &v.ops.potential_values(), &v.w_idx, -1.0);
            stabilization += weighted_gram(v.weights, &[&z], &[&z]) / h;
        }
        let rr = vector_rotor.transpose() * &mass_vec * &vector_rotor + &stabilization;
        let rotrot = discrete_rotor.transpose() * rr * &discrete_rotor;

        // ---- discrete L² norm on the head space
        let mut v_product = potential_v.transpose() * &mass_scalar * &potential_v;
        for v in &views {
            let trace = v.ops.potential_values();
            let g = weighted_gram(v.weights, &[&trace], &[&trace]) * h;
            for (a, &ra) in v.v_idx.iter().enumerate() {
                for (b, &rb) in v.v_idx.iter().enumerate() {
                    v_product[(ra, rb)] += g[(a, b)];
                }
            }
        }

        Ok(ElementOperators {
            element: t,
            polys,
            bases,
            sizes,
            gradient,
            potential_v,
            rotor,
            potential_sigma,
            vector_rotor,
            potential_w,
            discrete_gradient,
            discrete_rotor,
            sigma_product: crate::linalg::symmetrize(&sigma_product),
            stabilization: crate::linalg::symmetrize(&stabilization),
            rotrot: crate::linalg::symmetrize(&rotrot),
            v_product: crate::linalg::symmetrize(&v_product),
        })
    }
}
