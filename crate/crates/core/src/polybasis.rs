//! Orthonormal polynomial frames on elements and edges.
//!
//! Polynomials are stored as coefficient columns over scaled monomials
//! `ξ^α` with `ξ = (x - x_T) / h_T`, in graded order
//! `1; ξ1, ξ2; ξ1², ξ1ξ2, ξ2²; ...`. Vector-valued polynomials stack the two
//! components: rows `[0, n)` hold the first component, rows `[n, 2n)` the second.

use nalgebra::{DMatrix, DVector};

use crate::error::{DdrError, Result};
use crate::linalg::orthonormalize;
use crate::mesh::{Mesh, Point};
use crate::quadrature::{edge_rule, element_rule, QuadratureRule};

/// Dimension of `P^m` in two variables, zero for negative `m`.
pub fn dim_p(m: isize) -> usize {
    if m < 0 {
        0
    } else {
        let m = m as usize;
        (m + 1) * (m + 2) / 2
    }
}

/// Dimension of `P^m` in one variable, zero for negative `m`.
pub fn dim_p1(m: isize) -> usize {
    (m + 1).max(0) as usize
}

/// Exponents of the scaled monomials of degree at most `degree`, graded order.
pub fn exponents(degree: usize) -> Vec<(usize, usize)> {
    (0..=degree)
        .flat_map(|m| (0..=m).map(move |b| (m - b, b)))
        .collect()
}

fn mono_index(a: usize, b: usize) -> usize {
    let m = a + b;
    m * (m + 1) / 2 + b
}

/// Polynomial subspaces used by the complex.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Subspace {
    /// `P^m`
    Scalar,
    /// `P^m` with zero mean value.
    ScalarZeroMean,
    /// `P^m` squared.
    Vector,
    /// `vrot P^{m+1}`
    Roly,
    /// `(x - x_T) P^{m-1}`
    CRoly,
    /// `∇ P^{m+1}`
    Goly,
    /// `(x - x_T)^⊥ P^{m-1}`
    CGoly,
}

impl Subspace {
    pub fn is_vector(self) -> bool {
        !matches!(self, Subspace::Scalar | Subspace::ScalarZeroMean)
    }

    pub fn dim(self, m: isize) -> usize {
        match self {
            Subspace::Scalar => dim_p(m),
            Subspace::ScalarZeroMean => dim_p(m).saturating_sub(1),
            Subspace::Vector => 2 * dim_p(m),
            Subspace::Roly | Subspace::Goly => dim_p(m + 1).saturating_sub(1),
            Subspace::CRoly | Subspace::CGoly => dim_p(m - 1),
        }
    }
}

/// Basis of a polynomial space, one coefficient column per member.
#[derive(Debug, Clone, PartialEq)]
pub struct Basis {
    pub coeffs: DMatrix<f64>,
    pub vector: bool,
}

impl Basis {
    pub fn dim(&self) -> usize {
        self.coeffs.ncols()
    }

    pub fn ncomp(&self) -> usize {
        if self.vector {
            2
        } else {
            1
        }
    }

    /// Sub-basis formed by a contiguous range of members.
    pub fn columns(&self, start: usize, count: usize) -> Basis {
        Basis {
            coeffs: self.coeffs.columns(start, count).into_owned(),
            vector: self.vector,
        }
    }
}

/// Values and first derivatives of a basis at a set of points.
///
/// Each vector has one matrix per component, of size `npts × dim`.
#[derive(Debug, Clone)]
pub struct Tabulation {
    pub val: Vec<DMatrix<f64>>,
    pub dx: Vec<DMatrix<f64>>,
    pub dy: Vec<DMatrix<f64>>,
}

impl Tabulation {
    pub fn dim(&self) -> usize {
        self.val[0].ncols()
    }

    pub fn grad(&self) -> [DMatrix<f64>; 2] {
        [self.dx[0].clone(), self.dy[0].clone()]
    }

    /// `vrot q = (∂2 q, -∂1 q)`
    pub fn vrot(&self) -> [DMatrix<f64>; 2] {
        [self.dy[0].clone(), -&self.dx[0]]
    }

    pub fn div(&self) -> DMatrix<f64> {
        &self.dx[0] + &self.dy[1]
    }

    /// `rot v = ∂1 v2 - ∂2 v1`
    pub fn rot(&self) -> DMatrix<f64> {
        &self.dx[1] - &self.dy[0]
    }

    /// Tangential component `v · t` of a vector basis.
    pub fn dot(&self, t: Point) -> DMatrix<f64> {
        &self.val[0] * t.x + &self.val[1] * t.y
    }
}

/// `Σ_c aᶜᵀ diag(w) bᶜ`, the discrete L² pairing of two tabulated families.
pub fn weighted_gram<A, B>(w: &[f64], a: &[A], b: &[B]) -> DMatrix<f64>
where
    A: std::borrow::Borrow<DMatrix<f64>>,
    B: std::borrow::Borrow<DMatrix<f64>>,
{
    assert_eq!(a.len(), b.len());
    let wv = DVector::from_column_slice(w);
    let mut g = DMatrix::zeros(a[0].borrow().ncols(), b[0].borrow().ncols());
    for (ac, bc) in a.iter().zip(b) {
        let mut wb = bc.borrow().clone();
        for (mut row, &wi) in wb.row_iter_mut().zip(wv.iter()) {
            row *= wi;
        }
        g += ac.borrow().transpose() * wb;
    }
    g
}

/// Scaled monomials of an element and the matching quadrature.
#[derive(Debug, Clone)]
pub struct ElementPolys {
    pub center: Point,
    pub h: f64,
    pub degree: usize,
    pub rule: QuadratureRule,
    exps: Vec<(usize, usize)>,
    mass: DMatrix<f64>,
    frame: DMatrix<f64>,
    tab_mono: [DMatrix<f64>; 3],
}

impl ElementPolys {
    /// Monomials up to `degree` on element `t`; the stored rule integrates
    /// products of such polynomials exactly.
    pub fn new(mesh: &Mesh, t: usize, degree: usize) -> Result<Self> {
        let el = &mesh.elements[t];
        let rule = element_rule(mesh, el, 2 * degree);
        let exps = exponents(degree);
        let mut this = ElementPolys {
            center: el.center,
            h: el.diameter,
            degree,
            rule,
            exps,
            mass: DMatrix::zeros(0, 0),
            frame: DMatrix::zeros(0, 0),
            tab_mono: [DMatrix::zeros(0, 0), DMatrix::zeros(0, 0), DMatrix::zeros(0, 0)],
        };
        this.tab_mono = this.monomials_at(&this.rule.points);
        let v = &this.tab_mono[0];
        this.mass = weighted_gram(&this.rule.weights, &[v], &[v]);
        let n = this.nmono();
        this.frame = orthonormalize(&DMatrix::identity(n, n), &this.mass).ok_or(DdrError::SingularLocal {
            element: t,
            what: "monomial mass matrix",
        })?;
        Ok(this)
    }

    pub fn nmono(&self) -> usize {
        self.exps.len()
    }

    /// Monomial values and derivatives `[val, ∂1, ∂2]` at `points` (`npts × nmono`).
    pub fn monomials_at(&self, points: &[Point]) -> [DMatrix<f64>; 3] {
        let n = self.nmono();
        let d = self.degree;
        let mut val = DMatrix::zeros(points.len(), n);
        let mut dx = DMatrix::zeros(points.len(), n);
        let mut dy = DMatrix::zeros(points.len(), n);
        let mut px = vec![0.0; d + 1];
        let mut py = vec![0.0; d + 1];
        for (q, x) in points.iter().enumerate() {
            let xi = (x - self.center) / self.h;
            px[0] = 1.0;
            py[0] = 1.0;
            for i in 1..=d {
                px[i] = px[i - 1] * xi.x;
                py[i] = py[i - 1] * xi.y;
            }
            for (j, &(a, b)) in self.exps.iter().enumerate() {
                val[(q, j)] = px[a] * py[b];
                if a > 0 {
                    dx[(q, j)] = a as f64 * px[a - 1] * py[b] / self.h;
                }
                if b > 0 {
                    dy[(q, j)] = b as f64 * px[a] * py[b - 1] / self.h;
                }
            }
        }
        [val, dx, dy]
    }

    /// Orthonormal basis of `kind` of degree `m`. Scalar and vector bases are
    /// hierarchical: the first `dim(j)` members span the degree-`j` space.
    pub fn basis(&self, kind: Subspace, m: isize) -> Basis {
        let n = self.nmono();
        let dim = kind.dim(m);
        // Roly and Goly are generated by differentiating degree m + 1 monomials
        let top = match kind {
            Subspace::Roly | Subspace::Goly => m + 1,
            _ => m,
        };
        assert!(
            top <= self.degree as isize,
            "degree {top} exceeds the element monomial degree {}",
            self.degree
        );
        match kind {
            Subspace::Scalar => Basis {
                coeffs: self.frame.columns(0, dim).into_owned(),
                vector: false,
            },
            Subspace::ScalarZeroMean => Basis {
                coeffs: self.frame.columns(1, dim).into_owned(),
                vector: false,
            },
            Subspace::Vector => {
                let mut c = DMatrix::zeros(2 * n, dim);
                for i in 0..dim / 2 {
                    c.view_mut((0, 2 * i), (n, 1)).copy_from(&self.frame.column(i));
                    c.view_mut((n, 2 * i + 1), (n, 1)).copy_from(&self.frame.column(i));
                }
                Basis { coeffs: c, vector: true }
            }
            _ => {
                let gen = self.generators(kind, m);
                let metric = self.vector_mass();
                let coeffs = orthonormalize(&gen, &metric)
                    .expect("polynomial generators are linearly independent");
                Basis { coeffs, vector: true }
            }
        }
    }

    fn vector_mass(&self) -> DMatrix<f64> {
        let n = self.nmono();
        let mut m = DMatrix::zeros(2 * n, 2 * n);
        m.view_mut((0, 0), (n, n)).copy_from(&self.mass);
        m.view_mut((n, n), (n, n)).copy_from(&self.mass);
        m
    }

    /// Spanning monomial combinations for the non-trivial subspaces.
    fn generators(&self, kind: Subspace, m: isize) -> DMatrix<f64> {
        let n = self.nmono();
        let dim = kind.dim(m);
        let mut g = DMatrix::zeros(2 * n, dim);
        match kind {
            Subspace::Roly | Subspace::Goly => {
                // derivatives of ξ^α, |α| = 1..=m+1 (scaled by h, which does not change the span)
                for (col, &(a, b)) in self.exps[1..=dim].iter().enumerate() {
                    let (d1, d2) = (
                        (a > 0).then(|| (a as f64, mono_index(a - 1, b))),
                        (b > 0).then(|| (b as f64, mono_index(a, b - 1))),
                    );
                    let (c1, c2) = if kind == Subspace::Goly { (d1, d2) } else { (d2, d1) };
                    if let Some((s, j)) = c1 {
                        g[(j, col)] = s;
                    }
                    if let Some((s, j)) = c2 {
                        g[(n + j, col)] = if kind == Subspace::Roly { -s } else { s };
                    }
                }
            }
            Subspace::CRoly | Subspace::CGoly => {
                for (col, &(a, b)) in self.exps[..dim].iter().enumerate() {
                    let x1 = mono_index(a + 1, b);
                    let x2 = mono_index(a, b + 1);
                    if kind == Subspace::CRoly {
                        g[(x1, col)] = 1.0;
                        g[(n + x2, col)] = 1.0;
                    } else {
                        g[(x2, col)] = 1.0;
                        g[(n + x1, col)] = -1.0;
                    }
                }
            }
            _ => unreachable!("scalar and full vector spaces use the orthonormal frame"),
        }
        g
    }

    /// Tabulates a basis at arbitrary points.
    pub fn tabulate_at(&self, basis: &Basis, points: &[Point]) -> Tabulation {
        self.tabulate_mono(basis, &self.monomials_at(points))
    }

    /// Tabulates a basis at the element quadrature points.
    pub fn tabulate(&self, basis: &Basis) -> Tabulation {
        self.tabulate_mono(basis, &self.tab_mono)
    }

    fn tabulate_mono(&self, basis: &Basis, mono: &[DMatrix<f64>; 3]) -> Tabulation {
        let n = self.nmono();
        let comp = |c: usize| basis.coeffs.rows(c * n, n);
        let mut t = Tabulation {
            val: vec![],
            dx: vec![],
            dy: vec![],
        };
        for c in 0..basis.ncomp() {
            t.val.push(&mono[0] * comp(c));
            t.dx.push(&mono[1] * comp(c));
            t.dy.push(&mono[2] * comp(c));
        }
        t
    }

    /// L² inner products `∫_T a_i · b_j` of two bases.
    pub fn gram(&self, a: &Basis, b: &Basis) -> DMatrix<f64> {
        let ta = self.tabulate(a);
        let tb = self.tabulate(b);
        weighted_gram(&self.rule.weights, &ta.val, &tb.val)
    }

    /// Coefficients of the L² projection of `f` on an orthonormal basis,
    /// computed with a rule of degree `quad_degree`. `f` returns one value per
    /// component.
    pub fn project(
        &self,
        mesh: &Mesh,
        t: usize,
        basis: &Basis,
        quad_degree: usize,
        f: impl Fn(Point) -> [f64; 2],
    ) -> DVector<f64> {
        let rule = element_rule(mesh, &mesh.elements[t], quad_degree);
        let tab = self.tabulate_at(basis, &rule.points);
        let mut c = DVector::zeros(basis.dim());
        for (q, (&x, &w)) in rule.points.iter().zip(&rule.weights).enumerate() {
            let fx = f(x);
            for (comp, val) in tab.val.iter().enumerate() {
                c.axpy(w * fx[comp], &val.row(q).transpose(), 1.0);
            }
        }
        c
    }
}

/// Orthonormal frame of `P^degree(E)` in the arc coordinate
/// `s = (x - x_E) · t_E / h_E`.
#[derive(Debug, Clone)]
pub struct EdgePolys {
    pub midpoint: Point,
    pub tangent: Point,
    pub length: f64,
    pub degree: usize,
    pub rule: QuadratureRule,
    frame: DMatrix<f64>,
    /// Frame values at the rule points, `npts × (degree + 1)`.
    pub values: DMatrix<f64>,
}

impl EdgePolys {
    pub fn new(mesh: &Mesh, e: usize, degree: usize) -> Result<Self> {
        let edge = &mesh.edges[e];
        let rule = edge_rule(mesh, e, 2 * degree + 2);
        let mut this = EdgePolys {
            midpoint: edge.midpoint,
            tangent: edge.tangent,
            length: edge.length,
            degree,
            rule,
            frame: DMatrix::identity(degree + 1, degree + 1),
            values: DMatrix::zeros(0, 0),
        };
        let mono = this.monomials_at(&this.rule.points);
        let mass = weighted_gram(&this.rule.weights, &[&mono], &[&mono]);
        this.frame = orthonormalize(&DMatrix::identity(degree + 1, degree + 1), &mass).ok_or(
            DdrError::SingularLocal {
                element: e,
                what: "edge mass matrix",
            },
        )?;
        this.values = mono * &this.frame;
        Ok(this)
    }

    pub fn coordinate(&self, x: Point) -> f64 {
        (x - self.midpoint).dot(&self.tangent) / self.length
    }

    fn monomials_at(&self, points: &[Point]) -> DMatrix<f64> {
        DMatrix::from_fn(points.len(), self.degree + 1, |q, j| {
            self.coordinate(points[q]).powi(j as i32)
        })
    }

    /// Values of the first `dim` frame members at `points` (`npts × dim`).
    pub fn eval(&self, points: &[Point], dim: usize) -> DMatrix<f64> {
        (self.monomials_at(points) * &self.frame).columns(0, dim).into_owned()
    }

    /// Tangential derivatives of the first `dim` frame members at `points`.
    pub fn eval_derivative(&self, points: &[Point], dim: usize) -> DMatrix<f64> {
        let d = DMatrix::from_fn(points.len(), self.degree + 1, |q, j| {
            if j == 0 {
                0.0
            } else {
                j as f64 * self.coordinate(points[q]).powi(j as i32 - 1) / self.length
            }
        });
        (d * &self.frame).columns(0, dim).into_owned()
    }

    /// Coefficients of the L² projection of `f` on the first `dim` members.
    pub fn project(&self, mesh: &Mesh, e: usize, dim: usize, quad_degree: usize, f: impl Fn(Point) -> f64) -> DVector<f64> {
        let rule = edge_rule(mesh, e, quad_degree);
        let vals = self.eval(&rule.points, dim);
        let mut c = DVector::zeros(dim);
        for (q, (&x, &w)) in rule.points.iter().zip(&rule.weights).enumerate() {
            c.axpy(w * f(x), &vals.row(q).transpose(), 1.0);
        }
        c
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::numerical_rank;
    use crate::mesh::{build_structured_mesh, MeshFamily};

    fn element(family: MeshFamily, degree: usize) -> (Mesh, ElementPolys) {
        let mesh = build_structured_mesh(family, 2).unwrap();
        let p = ElementPolys::new(&mesh, 1, degree).unwrap();
        (mesh, p)
    }

    #[test]
    fn dimensions() {
        assert_eq!(dim_p(-1), 0);
        assert_eq!(dim_p(3), 10);
        assert_eq!(dim_p1(-1), 0);
        assert_eq!(dim_p1(2), 3);
        for m in 0..5isize {
            assert_eq!(Subspace::Roly.dim(m) + Subspace::CRoly.dim(m), Subspace::Vector.dim(m));
            assert_eq!(Subspace::Goly.dim(m) + Subspace::CGoly.dim(m), Subspace::Vector.dim(m));
        }
    }

    #[test]
    fn bases_are_orthonormal() {
        for family in MeshFamily::ALL {
            let (_, p) = element(family, 5);
            for kind in [
                Subspace::Scalar,
                Subspace::ScalarZeroMean,
                Subspace::Vector,
                Subspace::Roly,
                Subspace::CRoly,
                Subspace::Goly,
                Subspace::CGoly,
            ] {
                for m in 0..=4 {
                    let b = p.basis(kind, m);
                    assert_eq!(b.dim(), kind.dim(m));
                    if b.dim() == 0 {
                        continue;
                    }
                    let g = p.gram(&b, &b);
                    let err = (g - DMatrix::identity(b.dim(), b.dim())).abs().max();
                    assert!(err < 1e-12, "{kind:?} {m}: {err}");
                }
            }
        }
    }

    #[test]
    fn decompositions_are_direct() {
        let (_, p) = element(MeshFamily::Hexagonal, 4);
        for m in 0..=3 {
            for (a, b) in [(Subspace::Roly, Subspace::CRoly), (Subspace::Goly, Subspace::CGoly)] {
                let ba = p.basis(a, m);
                let bb = p.basis(b, m);
                let mut joined = ba.coeffs.clone().insert_columns(ba.dim(), bb.dim(), 0.0);
                joined.columns_mut(ba.dim(), bb.dim()).copy_from(&bb.coeffs);
                let g = p.gram(
                    &Basis {
                        coeffs: joined,
                        vector: true,
                    },
                    &Basis {
                        coeffs: p.basis(Subspace::Vector, m).coeffs,
                        vector: true,
                    },
                );
                assert_eq!(numerical_rank(&g, 1e-10).rank, Subspace::Vector.dim(m));
            }
        }
    }

    #[test]
    fn roly_is_divergence_free_and_goly_is_curl_free() {
        let (_, p) = element(MeshFamily::Triangular, 4);
        let r = p.tabulate(&p.basis(Subspace::Roly, 3));
        assert!(r.div().abs().max() < 1e-10);
        let g = p.tabulate(&p.basis(Subspace::Goly, 3));
        assert!(g.rot().abs().max() < 1e-10);
    }

    #[test]
    fn scalar_frame_is_hierarchical() {
        let (_, p) = element(MeshFamily::Cartesian, 4);
        let full = p.basis(Subspace::Scalar, 4);
        let low = p.basis(Subspace::Scalar, 2);
        assert_eq!(full.columns(0, low.dim()), low);
        // zero-mean members integrate to zero
        let z = p.tabulate(&p.basis(Subspace::ScalarZeroMean, 3));
        let w = DVector::from_column_slice(&p.rule.weights);
        assert!((z.val[0].transpose() * w).abs().max() < 1e-12);
    }

    #[test]
    fn projection_is_idempotent_on_polynomials() {
        let (mesh, p) = element(MeshFamily::Hexagonal, 4);
        let b = p.basis(Subspace::Scalar, 3);
        let f = |x: Point| [1.0 + x.x * x.x * x.y - 2.0 * x.y.powi(3), 0.0];
        let c = p.project(&mesh, 1, &b, 8, f);
        let pts = [Point::new(0.3, 0.2), Point::new(0.1, 0.45)];
        let vals = p.tabulate_at(&b, &pts).val[0].clone() * &c;
        for (q, x) in pts.iter().enumerate() {
            assert!((vals[q] - f(*x)[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn edge_frame() {
        let mesh = build_structured_mesh(MeshFamily::Triangular, 2).unwrap();
        for e in 0..mesh.num_edges() {
            let ep = EdgePolys::new(&mesh, e, 4).unwrap();
            let g = weighted_gram(&ep.rule.weights, &[&ep.values], &[&ep.values]);
            assert!((g - DMatrix::identity(5, 5)).abs().max() < 1e-12);
            let edge = &mesh.edges[e];
            let x0 = mesh.vertex(edge.vertices[0]);
            let f = |x: Point| (x - x0).norm().powi(3);
            let c = ep.project(&mesh, e, 4, 10, f);
            let x = x0 + edge.tangent * 0.3 * edge.length;
            let v = (ep.eval(&[x], 4) * &c)[0];
            assert!((v - f(x)).abs() < 1e-13);
            let dv = (ep.eval_derivative(&[x], 4) * &c)[0];
            assert!((dv - 3.0 * (0.3 * edge.length).powi(2)).abs() < 1e-12);
        }
    }
}
