use nalgebra::DVector;

use super::*;
use crate::mesh::{build_structured_mesh, MeshFamily};

/// Bivariate polynomial `Σ c_ab x^a y^b` with exact derivatives.
#[derive(Clone)]
struct Poly(Vec<(i32, i32, f64)>);

impl Poly {
    fn pseudo_random(degree: i32, seed: u64) -> Poly {
        let mut s = seed;
        let mut terms = Vec::new();
        for m in 0..=degree {
            for b in 0..=m {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                let c = ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0;
                terms.push((m - b, b, c));
            }
        }
        Poly(terms)
    }
    fn eval(&self, x: Point) -> f64 {
        self.0.iter().map(|&(a, b, c)| c * x.x.powi(a) * x.y.powi(b)).sum()
    }
    fn dx(&self) -> Poly {
        Poly(self.0.iter().filter(|t| t.0 > 0).map(|&(a, b, c)| (a - 1, b, c * a as f64)).collect())
    }
    fn dy(&self) -> Poly {
        Poly(self.0.iter().filter(|t| t.1 > 0).map(|&(a, b, c)| (a, b - 1, c * b as f64)).collect())
    }
}

fn meshes() -> Vec<Mesh> {
    MeshFamily::ALL
        .iter()
        .map(|&f| build_structured_mesh(f, 2).unwrap())
        .collect()
}

fn sample_points(op: &ElementOperators, mesh: &Mesh) -> Vec<Point> {
    let el = &mesh.elements[op.element];
    el.vertices
        .iter()
        .map(|&v| el.center + (mesh.vertex(v) - el.center) * 0.7)
        .chain(std::iter::once(el.center))
        .collect()
}

#[test]
fn head_space_reconstructions_are_polynomially_consistent() {
    for mesh in meshes() {
        for k in 0..=3 {
            let d = Discretization::new(mesh.clone(), k, Execution::Sequential).unwrap();
            let q = Poly::pseudo_random(k as i32 + 1, 7 + k as u64);
            let (qx, qy) = (q.dx(), q.dy());
            let iq = d.interpolate_v(|x| q.eval(x));
            for op in &d.elements {
                let local = d.v.gather(&d.mesh, op.element, &iq);
                let pts = sample_points(op, &d.mesh);
                let g = op.polys.tabulate_at(&op.bases.vector, &pts);
                let p = op.polys.tabulate_at(&op.bases.scalar, &pts);
                let gv = [&g.val[0] * (&op.gradient * &local), &g.val[1] * (&op.gradient * &local)];
                let pv = &p.val[0] * (&op.potential_v * &local);
                for (i, x) in pts.iter().enumerate() {
                    assert!((gv[0][i] - qx.eval(*x)).abs() < 1e-10, "k={k}");
                    assert!((gv[1][i] - qy.eval(*x)).abs() < 1e-10, "k={k}");
                    assert!((pv[i] - q.eval(*x)).abs() < 1e-10, "k={k}");
                }
            }
        }
    }
}

#[test]
fn vector_space_reconstructions_are_polynomially_consistent() {
    for mesh in meshes() {
        for k in 0..=3 {
            let d = Discretization::new(mesh.clone(), k, Execution::Sequential).unwrap();
            // potential reproduces P^k, rotor is exact up to P^{k+1}
            let (a, b) = (Poly::pseudo_random(k as i32, 3), Poly::pseudo_random(k as i32, 5));
            let rot = |x: Point| b.dx().eval(x) - a.dy().eval(x);
            let iv = d.interpolate_sigma(|x| [a.eval(x), b.eval(x)], rot);
            let (a1, b1) = (Poly::pseudo_random(k as i32 + 1, 9), Poly::pseudo_random(k as i32 + 1, 11));
            let rot1 = |x: Point| b1.dx().eval(x) - a1.dy().eval(x);
            let iv1 = d.interpolate_sigma(|x| [a1.eval(x), b1.eval(x)], rot1);
            for op in &d.elements {
                let pts = sample_points(op, &d.mesh);
                let local = d.sigma.gather(&d.mesh, op.element, &iv);
                let t = op.polys.tabulate_at(&op.bases.vector, &pts);
                let pv = &op.potential_sigma * &local;
                let local1 = d.sigma.gather(&d.mesh, op.element, &iv1);
                let s = op.polys.tabulate_at(&op.bases.scalar, &pts);
                let r = s.val[0].columns(0, op.rotor.nrows()) * (&op.rotor * &local1);
                for (i, x) in pts.iter().enumerate() {
                    assert!(((&t.val[0] * &pv)[i] - a.eval(*x)).abs() < 1e-10);
                    assert!(((&t.val[1] * &pv)[i] - b.eval(*x)).abs() < 1e-10);
                    assert!((r[i] - rot1(*x)).abs() < 1e-10);
                }
            }
        }
    }
}

#[test]
fn tail_space_reconstructions_are_polynomially_consistent() {
    for mesh in meshes() {
        for k in 0..=3 {
            let d = Discretization::new(mesh.clone(), k, Execution::Sequential).unwrap();
            let r = Poly::pseudo_random(k as i32 + 1, 13);
            let ir = d.interpolate_w(|x| r.eval(x));
            for op in &d.elements {
                let pts = sample_points(op, &d.mesh);
                let local = d.w.gather(&d.mesh, op.element, &ir);
                let t = op.polys.tabulate_at(&op.bases.vector, &pts);
                let vr = &op.vector_rotor * &local;
                let s = op.polys.tabulate_at(&op.bases.scalar, &pts);
                let p = &s.val[0] * (&op.potential_w * &local);
                for (i, x) in pts.iter().enumerate() {
                    assert!(((&t.val[0] * &vr)[i] - r.dy().eval(*x)).abs() < 1e-10);
                    assert!(((&t.val[1] * &vr)[i] + r.dx().eval(*x)).abs() < 1e-10);
                    assert!((p[i] - r.eval(*x)).abs() < 1e-10);
                }
                assert!((&op.stabilization * &local).norm() < 1e-9 * local.norm().max(1.0));
            }
        }
    }
}

#[test]
fn rotor_of_gradient_vanishes() {
    for mesh in meshes() {
        for k in 0..=2 {
            let d = Discretization::new(mesh.clone(), k, Execution::Sequential).unwrap();
            let g = d.global_gradient().to_dense();
            let r = d.global_rotor().to_dense();
            assert!((r * &g).abs().max() < 1e-10 * g.abs().max());
        }
    }
}

#[test]
fn gradient_commutes_with_interpolation() {
    for mesh in meshes() {
        for k in 0..=2 {
            let d = Discretization::new(mesh.clone(), k, Execution::Sequential).unwrap();
            let q = Poly::pseudo_random(k as i32 + 1, 17);
            let (qx, qy) = (q.dx(), q.dy());
            let lhs = d.global_gradient().mul_vec(&d.interpolate_v(|x| q.eval(x)));
            let rhs = d.interpolate_sigma(|x| [qx.eval(x), qy.eval(x)], |_| 0.0);
            assert!((lhs - rhs).amax() < 1e-10);
        }
    }
}

#[test]
fn sigma_product_is_exact_on_polynomials() {
    for mesh in meshes() {
        for k in 0..=2 {
            let d = Discretization::new(mesh.clone(), k, Execution::Sequential).unwrap();
            let a = Poly::pseudo_random(k as i32, 19);
            let b = Poly::pseudo_random(k as i32, 23);
            let iv = d.interpolate_sigma(|x| [a.eval(x), b.eval(x)], |x| b.dx().eval(x) - a.dy().eval(x));
            let m = d.sigma_product();
            let discrete = iv.dot(&m.mul_vec(&iv));
            let exact: f64 = d
                .mesh
                .elements
                .iter()
                .map(|t| {
                    crate::quadrature::element_rule(&d.mesh, t, 2 * k)
                        .integrate(|x| a.eval(x).powi(2) + b.eval(x).powi(2))
                })
                .sum();
            assert!((discrete - exact).abs() < 1e-10 * exact, "{discrete} vs {exact}");
        }
    }
}

#[test]
fn rotrot_form_is_exact_on_polynomials() {
    // v = (a, b) of degree k + 2 has rot v of degree k + 1
    for mesh in meshes() {
        for k in 0..=2 {
            let d = Discretization::new(mesh.clone(), k, Execution::Sequential).unwrap();
            let a = Poly::pseudo_random(k as i32 + 2, 29);
            let b = Poly::pseudo_random(k as i32 + 2, 31);
            let rot = |x: Point| b.dx().eval(x) - a.dy().eval(x);
            let iv = d.interpolate_sigma(|x| [a.eval(x), b.eval(x)], rot);
            let form = iv.dot(&d.rotrot_matrix().mul_vec(&iv));
            let (rx, ry) = (
                Poly([b.dx().dx().0, a.dy().dx().0.iter().map(|&(p, q, c)| (p, q, -c)).collect()].concat()),
                Poly([b.dx().dy().0, a.dy().dy().0.iter().map(|&(p, q, c)| (p, q, -c)).collect()].concat()),
            );
            let exact: f64 = d
                .mesh
                .elements
                .iter()
                .map(|t| {
                    crate::quadrature::element_rule(&d.mesh, t, 2 * k + 2)
                        .integrate(|x| rx.eval(x).powi(2) + ry.eval(x).powi(2))
                })
                .sum();
            assert!((form - exact).abs() < 1e-9 * exact, "k={k}: {form} vs {exact}");
        }
    }
}

#[test]
fn parallel_and_sequential_agree_bitwise() {
    let mesh = build_structured_mesh(MeshFamily::Hexagonal, 3).unwrap();
    let a = Discretization::new(mesh.clone(), 1, Execution::Sequential).unwrap();
    let b = Discretization::new(mesh, 1, Execution::Parallel).unwrap();
    assert_eq!(a.sigma_product(), b.sigma_product());
    assert_eq!(a.rotrot_matrix(), b.rotrot_matrix());
    let f = |x: Point| (3.0 * x.x).sin() * x.y;
    let ia: DVector<f64> = a.interpolate_v(f);
    assert_eq!(ia, b.interpolate_v(f));
}
