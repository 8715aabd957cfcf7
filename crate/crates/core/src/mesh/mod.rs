//! Polygonal meshes: topology, geometry, structured families and file I/O.

mod io;
mod structured;

use std::collections::HashMap;
use std::fmt;

use nalgebra::Vector2;

use crate::error::{DdrError, Result};

pub use io::{load_mesh, read_mesh, save_mesh, write_mesh};
pub use structured::{build_structured_mesh, regular_polygon_mesh, MeshFamily};

pub type Point = Vector2<f64>;

#[derive(Debug, Clone, PartialEq)]
pub struct Vertex {
    pub id: usize,
    pub x: Point,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub id: usize,
    /// Tangent points from `vertices[0]` to `vertices[1]`.
    pub vertices: [usize; 2],
    pub tangent: Point,
    /// Tangent rotated by +π/2, so that `(t, n)` is right-handed.
    pub normal: Point,
    pub length: f64,
    pub midpoint: Point,
    pub boundary: bool,
    /// Incident elements (one for boundary edges, two otherwise).
    pub elements: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Element {
    pub id: usize,
    pub edges: Vec<usize>,
    /// Relative orientations ω_TE ∈ {−1, +1}: `ω n_E` points out of the element.
    pub orientations: Vec<i8>,
    /// `vertices[i]` is the vertex at which `edges[i]` starts when walking the loop.
    pub vertices: Vec<usize>,
    /// Interior point x_T.
    pub center: Point,
    /// Whether `center` was supplied explicitly rather than computed as the centroid.
    pub center_override: bool,
    /// Diameter h_T (max pairwise vertex distance).
    pub diameter: f64,
    pub area: f64,
}

impl Element {
    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Position of `edges[i]`'s endpoints within the element vertex loop,
    /// returned in the edge's own orientation `(v0, v1)`.
    pub fn edge_vertex_slots(&self, mesh: &Mesh, i: usize) -> [usize; 2] {
        let n = self.vertices.len();
        let start = i;
        let end = (i + 1) % n;
        let e = &mesh.edges[self.edges[i]];
        if e.vertices[0] == self.vertices[start] {
            [start, end]
        } else {
            [end, start]
        }
    }
}

/// Polygonal mesh of a planar domain.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub vertices: Vec<Vertex>,
    pub edges: Vec<Edge>,
    pub elements: Vec<Element>,
    /// Mesh size, `max_T h_T`.
    pub h: f64,
    boundary_vertex: Vec<bool>,
}

/// Raw element description: edge loop with orientations and optional interior point.
#[derive(Debug, Clone, PartialEq)]
pub struct RawElement {
    pub edges: Vec<usize>,
    pub orientations: Vec<i8>,
    pub center: Option<Point>,
}

impl Mesh {
    /// Builds a mesh from vertex coordinates, oriented edges and element loops,
    /// validating the topology.
    pub fn from_raw(points: Vec<Point>, edge_vertices: Vec<[usize; 2]>, raw: Vec<RawElement>) -> Result<Mesh> {
        let nv = points.len();
        let mut seen: HashMap<(usize, usize), usize> = HashMap::new();
        for (id, &[a, b]) in edge_vertices.iter().enumerate() {
            if a >= nv || b >= nv {
                return Err(topology("edge", id, "vertex index out of range"));
            }
            if a == b {
                return Err(topology("edge", id, "degenerate edge with identical endpoints"));
            }
            if let Some(prev) = seen.insert((a.min(b), a.max(b)), id) {
                return Err(topology("edge", id, format!("duplicate of edge {prev}")));
            }
        }

        let mut edges: Vec<Edge> = edge_vertices
            .iter()
            .enumerate()
            .map(|(id, &[a, b])| {
                let d = points[b] - points[a];
                let length = d.norm();
                let tangent = d / length;
                Edge {
                    id,
                    vertices: [a, b],
                    tangent,
                    normal: Point::new(-tangent.y, tangent.x),
                    length,
                    midpoint: (points[a] + points[b]) * 0.5,
                    boundary: false,
                    elements: Vec::new(),
                }
            })
            .collect();

        let mut elements = Vec::with_capacity(raw.len());
        for (id, r) in raw.into_iter().enumerate() {
            let n = r.edges.len();
            if n < 3 {
                return Err(topology("element", id, "fewer than three edges"));
            }
            if r.orientations.len() != n {
                return Err(topology("element", id, "orientation count does not match edge count"));
            }
            if let Some(&e) = r.edges.iter().find(|&&e| e >= edges.len()) {
                return Err(topology("element", id, format!("edge index {e} out of range")));
            }
            if r.orientations.iter().any(|&s| s != 1 && s != -1) {
                return Err(topology("element", id, "orientation must be +1 or -1"));
            }
            let mut vertices = Vec::with_capacity(n);
            for i in 0..n {
                let [a, b] = edges[r.edges[i]].vertices;
                let [c, d] = edges[r.edges[(i + 1) % n]].vertices;
                let end = if a == c || a == d {
                    if b == c || b == d {
                        return Err(topology("element", id, "consecutive edges coincide"));
                    }
                    a
                } else if b == c || b == d {
                    b
                } else {
                    return Err(topology("element", id, "edge loop does not close"));
                };
                vertices.push(if end == a { b } else { a });
            }
            // start of edge i+1 must be the end of edge i
            for i in 0..n {
                let [a, b] = edges[r.edges[i]].vertices;
                let end = if vertices[i] == a { b } else { a };
                if vertices[(i + 1) % n] != end {
                    return Err(topology("element", id, "edge loop does not close"));
                }
            }
            let mut uniq = vertices.clone();
            uniq.sort_unstable();
            uniq.dedup();
            if uniq.len() != n {
                return Err(topology("element", id, "edge loop is not simple"));
            }
            for &e in &r.edges {
                edges[e].elements.push(id);
            }
            let coords: Vec<Point> = vertices.iter().map(|&v| points[v]).collect();
            let (signed_area, centroid) = polygon_area_centroid(&coords);
            if signed_area.abs() <= 0.0 {
                return Err(topology("element", id, "zero area"));
            }
            let diameter = coords
                .iter()
                .enumerate()
                .flat_map(|(i, p)| coords[i + 1..].iter().map(move |q| (p - q).norm()))
                .fold(0.0, f64::max);
            elements.push(Element {
                id,
                edges: r.edges,
                orientations: r.orientations,
                vertices,
                center: r.center.unwrap_or(centroid),
                center_override: r.center.is_some(),
                diameter,
                area: signed_area.abs(),
            });
        }

        for e in &mut edges {
            match e.elements.len() {
                1 => e.boundary = true,
                2 => {}
                0 => return Err(topology("edge", e.id, "not used by any element")),
                _ => return Err(topology("edge", e.id, "shared by more than two elements")),
            }
        }
        let mut boundary_vertex = vec![false; nv];
        for e in edges.iter().filter(|e| e.boundary) {
            boundary_vertex[e.vertices[0]] = true;
            boundary_vertex[e.vertices[1]] = true;
        }
        let h = elements.iter().map(|t| t.diameter).fold(0.0, f64::max);
        let vertices = points.into_iter().enumerate().map(|(id, x)| Vertex { id, x }).collect();
        Ok(Mesh {
            vertices,
            edges,
            elements,
            h,
            boundary_vertex,
        })
    }

    /// Builds a mesh from polygons given as vertex loops.
    ///
    /// Vertices are renumbered by first appearance, edges are numbered by first
    /// appearance and oriented from the lower to the higher vertex id, and loops
    /// are traversed counter-clockwise.
    pub fn from_polygons(points: &[Point], polygons: &[Vec<usize>]) -> Result<Mesh> {
        let mut renumber = vec![usize::MAX; points.len()];
        let mut new_points = Vec::new();
        let mut loops = Vec::with_capacity(polygons.len());
        for poly in polygons {
            let mut lp: Vec<usize> = poly
                .iter()
                .map(|&v| {
                    if renumber[v] == usize::MAX {
                        renumber[v] = new_points.len();
                        new_points.push(points[v]);
                    }
                    renumber[v]
                })
                .collect();
            let coords: Vec<Point> = lp.iter().map(|&v| new_points[v]).collect();
            if polygon_area_centroid(&coords).0 < 0.0 {
                lp.reverse();
            }
            loops.push(lp);
        }
        let mut edge_ids: HashMap<(usize, usize), usize> = HashMap::new();
        let mut edge_vertices = Vec::new();
        let mut raw = Vec::with_capacity(loops.len());
        for lp in &loops {
            let n = lp.len();
            let mut edges = Vec::with_capacity(n);
            let mut orientations = Vec::with_capacity(n);
            for i in 0..n {
                let (a, b) = (lp[i], lp[(i + 1) % n]);
                let key = (a.min(b), a.max(b));
                let id = *edge_ids.entry(key).or_insert_with(|| {
                    edge_vertices.push([key.0, key.1]);
                    edge_vertices.len() - 1
                });
                edges.push(id);
                // Counter-clockwise walk: the interior is on the left, so n_E
                // (left normal of t_E) points inward when the walk follows t_E.
                orientations.push(if a == key.0 { -1 } else { 1 });
            }
            raw.push(RawElement {
                edges,
                orientations,
                center: None,
            });
        }
        Mesh::from_raw(new_points, edge_vertices, raw)
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        self.boundary_vertex[v]
    }

    pub fn num_boundary_edges(&self) -> usize {
        self.edges.iter().filter(|e| e.boundary).count()
    }

    pub fn vertex(&self, v: usize) -> Point {
        self.vertices[v].x
    }

    pub fn diagnostics(&self) -> MeshDiagnostics {
        mesh_diagnostics(self)
    }
}

fn topology(entity: &'static str, id: usize, message: impl Into<String>) -> DdrError {
    DdrError::Topology {
        entity,
        id,
        message: message.into(),
    }
}

/// Signed area (positive for counter-clockwise loops) and centroid.
pub fn polygon_area_centroid(p: &[Point]) -> (f64, Point) {
    let n = p.len();
    let mut a = 0.0;
    let mut c = Point::zeros();
    for i in 0..n {
        let (x0, x1) = (p[i], p[(i + 1) % n]);
        let cross = x0.x * x1.y - x1.x * x0.y;
        a += cross;
        c += (x0 + x1) * cross;
    }
    a *= 0.5;
    if a == 0.0 {
        return (0.0, p.iter().sum::<Point>() / n as f64);
    }
    (a, c / (6.0 * a))
}

/// Geometry and orientation summary of a mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct MeshDiagnostics {
    pub h: f64,
    pub min_element_diameter: f64,
    pub max_element_diameter: f64,
    pub max_edges_per_element: usize,
    pub boundary_edge_count: usize,
    pub total_area: f64,
    /// Internal edges whose two relative orientations do not cancel.
    pub orientation_sum_violations: Vec<usize>,
    /// `(element, edge)` pairs for which `ω n_E` does not point away from x_T.
    pub outward_violations: Vec<(usize, usize)>,
    /// Elements whose interior point is not strictly inside.
    pub center_violations: Vec<usize>,
    /// Worst value of `|det[t n] - 1|` over all edges.
    pub frame_defect: f64,
}

impl MeshDiagnostics {
    pub fn orientation_ok(&self) -> bool {
        self.orientation_sum_violations.is_empty() && self.outward_violations.is_empty()
    }

    pub fn is_valid(&self) -> bool {
        self.orientation_ok() && self.center_violations.is_empty()
    }
}

impl fmt::Display for MeshDiagnostics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "h                      {:.17e}", self.h)?;
        writeln!(f, "min h_T                {:.17e}", self.min_element_diameter)?;
        writeln!(f, "max h_T                {:.17e}", self.max_element_diameter)?;
        writeln!(f, "max edges per element  {}", self.max_edges_per_element)?;
        writeln!(f, "boundary edges         {}", self.boundary_edge_count)?;
        writeln!(f, "total area             {:.17e}", self.total_area)?;
        writeln!(
            f,
            "orientation check      {}",
            if self.orientation_ok() { "pass" } else { "FAIL" }
        )?;
        write!(
            f,
            "interior points        {}",
            if self.center_violations.is_empty() { "pass" } else { "FAIL" }
        )
    }
}

/// Reports geometry summaries and orientation consistency; never fails.
pub fn mesh_diagnostics(mesh: &Mesh) -> MeshDiagnostics {
    let mut orientation_sum_violations = Vec::new();
    let mut sums: Vec<i32> = vec![0; mesh.num_edges()];
    let mut outward_violations = Vec::new();
    let mut center_violations = Vec::new();
    for t in &mesh.elements {
        let mut inside = true;
        for (&e, &w) in t.edges.iter().zip(&t.orientations) {
            sums[e] += w as i32;
            let edge = &mesh.edges[e];
            let out = edge.normal * w as f64;
            // distance of x_T to the edge line, measured along the outward normal
            let d = out.dot(&(edge.midpoint - t.center));
            if d <= 0.0 {
                outward_violations.push((t.id, e));
                inside = false;
            }
        }
        if !inside {
            center_violations.push(t.id);
        }
    }
    for e in &mesh.edges {
        if !e.boundary && sums[e.id] != 0 {
            orientation_sum_violations.push(e.id);
        }
    }
    let frame_defect = mesh
        .edges
        .iter()
        .map(|e| (e.tangent.x * e.normal.y - e.tangent.y * e.normal.x - 1.0).abs())
        .fold(0.0, f64::max);
    MeshDiagnostics {
        h: mesh.h,
        min_element_diameter: mesh.elements.iter().map(|t| t.diameter).fold(f64::INFINITY, f64::min),
        max_element_diameter: mesh.elements.iter().map(|t| t.diameter).fold(0.0, f64::max),
        max_edges_per_element: mesh.elements.iter().map(|t| t.num_edges()).max().unwrap_or(0),
        boundary_edge_count: mesh.num_boundary_edges(),
        total_area: mesh.elements.iter().map(|t| t.area).sum(),
        orientation_sum_violations,
        outward_violations,
        center_violations,
        frame_defect,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_triangle() -> Mesh {
        let pts = vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(0.0, 1.0)];
        Mesh::from_polygons(&pts, &[vec![0, 1, 2]]).unwrap()
    }

    #[test]
    fn triangle_geometry() {
        let m = unit_triangle();
        assert_eq!((m.num_elements(), m.num_edges(), m.num_vertices()), (1, 3, 3));
        let t = &m.elements[0];
        assert!((t.area - 0.5).abs() < 1e-15);
        assert!((t.center - Point::new(1.0 / 3.0, 1.0 / 3.0)).norm() < 1e-15);
        assert!((t.diameter - 2f64.sqrt()).abs() < 1e-15);
        assert!(m.diagnostics().is_valid());
        assert_eq!(m.num_boundary_edges(), 3);
    }

    #[test]
    fn outward_orientation() {
        let m = unit_triangle();
        let t = &m.elements[0];
        for (&e, &w) in t.edges.iter().zip(&t.orientations) {
            let edge = &m.edges[e];
            assert!((edge.normal * w as f64).dot(&(edge.midpoint - t.center)) > 0.0);
        }
    }

    #[test]
    fn open_loop_is_rejected() {
        let pts = vec![
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(0.0, 1.0),
            Point::new(1.0, 1.0),
        ];
        let edges = vec![[0, 1], [1, 2], [2, 3]];
        let raw = vec![RawElement {
            edges: vec![0, 1, 2],
            orientations: vec![1, 1, 1],
            center: None,
        }];
        match Mesh::from_raw(pts, edges, raw) {
            Err(DdrError::Topology { entity: "element", id: 0, .. }) => {}
            other => panic!("expected topology error, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_edge_is_rejected() {
        let pts = vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(0.0, 1.0)];
        let edges = vec![[0, 1], [1, 2], [2, 0], [1, 0]];
        let err = Mesh::from_raw(pts, edges, vec![]).unwrap_err();
        assert!(matches!(err, DdrError::Topology { entity: "edge", id: 3, .. }));
    }
}
