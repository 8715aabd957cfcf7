//! Quadrature on polygons (fan of triangles around x_T) and on edges.

use std::num::NonZeroUsize;
use std::sync::OnceLock;

use gauss_quad::GaussLegendre;

use crate::mesh::{Element, Mesh, Point};

const MAX_POINTS: usize = 64;

/// Gauss–Legendre nodes and weights mapped to [0, 1].
fn unit_gauss(n: usize) -> &'static [(f64, f64)] {
    static RULES: OnceLock<Vec<Vec<(f64, f64)>>> = OnceLock::new();
    let rules = RULES.get_or_init(|| {
        (1..=MAX_POINTS)
            .map(|n| {
                GaussLegendre::new(NonZeroUsize::new(n).unwrap())
                    .as_node_weight_pairs()
                    .iter()
                    .map(|&(x, w)| (0.5 * (x + 1.0), 0.5 * w))
                    .collect()
            })
            .collect()
    });
    assert!((1..=MAX_POINTS).contains(&n), "Gauss rule with {n} points is not available");
    &rules[n - 1]
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
    /// Total polynomial degree integrated exactly.
    pub degree: usize,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(Point) -> f64) -> f64 {
        self.points.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }
}

/// Rule exact for polynomials of total degree `degree` on the polygon of `element`.
pub fn element_rule(mesh: &Mesh, element: &Element, degree: usize) -> QuadratureRule {
    let g = unit_gauss((degree + 3) / 2);
    let n = element.vertices.len();
    let c = element.center;
    let mut points = Vec::with_capacity(n * g.len() * g.len());
    let mut weights = Vec::with_capacity(points.capacity());
    for i in 0..n {
        let a = mesh.vertex(element.vertices[i]) - c;
        let b = mesh.vertex(element.vertices[(i + 1) % n]) - c;
        let jac = (a.x * b.y - a.y * b.x).abs();
        // x = c + s (a + t (b - a)), Jacobian s |det(a, b)|
        for &(s, ws) in g {
            for &(t, wt) in g {
                points.push(c + (a + (b - a) * t) * s);
                weights.push(ws * wt * s * jac);
            }
        }
    }
    QuadratureRule {
        points,
        weights,
        degree,
    }
}

/// Rule exact for polynomials of degree `degree` along `edge`; points run from
/// the first to the second vertex of the edge.
pub fn edge_rule(mesh: &Mesh, edge: usize, degree: usize) -> QuadratureRule {
    let e = &mesh.edges[edge];
    let x0 = mesh.vertex(e.vertices[0]);
    let x1 = mesh.vertex(e.vertices[1]);
    let g = unit_gauss(degree / 2 + 1);
    QuadratureRule {
        points: g.iter().map(|&(t, _)| x0 + (x1 - x0) * t).collect(),
        weights: g.iter().map(|&(_, w)| w * e.length).collect(),
        degree,
    }
}
