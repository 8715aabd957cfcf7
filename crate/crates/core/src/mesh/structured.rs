use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use super::{Mesh, Point};
use crate::error::{DdrError, Result};

/// Structured mesh families on the unit square.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, clap::ValueEnum)]
pub enum MeshFamily {
    /// n × n squares.
    Cartesian,
    /// n × n squares, each split along its rising diagonal.
    Triangular,
    /// Flat-topped hexagons clipped to the square, mesh size close to 1/n.
    Hexagonal,
}

impl MeshFamily {
    pub const ALL: [MeshFamily; 3] = [MeshFamily::Cartesian, MeshFamily::Triangular, MeshFamily::Hexagonal];

    pub fn name(self) -> &'static str {
        match self {
            MeshFamily::Cartesian => "cartesian",
            MeshFamily::Triangular => "triangular",
            MeshFamily::Hexagonal => "hexagonal",
        }
    }
}

impl fmt::Display for MeshFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MeshFamily {
    type Err = DdrError;

    fn from_str(s: &str) -> Result<Self> {
        MeshFamily::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| DdrError::InvalidArgument(format!("unknown mesh family '{s}'")))
    }
}

pub fn build_structured_mesh(family: MeshFamily, n: usize) -> Result<Mesh> {
    if n == 0 {
        return Err(DdrError::InvalidArgument("mesh refinement n must be positive".into()));
    }
    let polygons = match family {
        MeshFamily::Cartesian => grid_polygons(n, false),
        MeshFamily::Triangular => grid_polygons(n, true),
        MeshFamily::Hexagonal => hexagon_polygons(n),
    };
    let mut pool = PointPool::default();
    let loops: Vec<Vec<usize>> = polygons
        .iter()
        .map(|poly| poly.iter().map(|&p| pool.insert(p)).collect())
        .collect();
    Mesh::from_polygons(&pool.points, &loops)
}

/// Single-element mesh of the regular polygon with `nsides` sides inscribed
/// in the unit circle.
pub fn regular_polygon_mesh(nsides: usize) -> Mesh {
    let pts: Vec<Point> = (0..nsides)
        .map(|i| {
            let a = std::f64::consts::TAU * i as f64 / nsides as f64;
            Point::new(a.cos(), a.sin())
        })
        .collect();
    Mesh::from_polygons(&pts, &[(0..nsides).collect()]).expect("regular polygons are valid elements")
}

fn grid_polygons(n: usize, split: bool) -> Vec<Vec<Point>> {
    let h = 1.0 / n as f64;
    let p = |i: usize, j: usize| Point::new(i as f64 * h, j as f64 * h);
    let mut out = Vec::with_capacity(if split { 2 * n * n } else { n * n });
    for j in 0..n {
        for i in 0..n {
            let (a, b, c, d) = (p(i, j), p(i + 1, j), p(i + 1, j + 1), p(i, j + 1));
            if split {
                out.push(vec![a, b, c]);
                out.push(vec![a, c, d]);
            } else {
                out.push(vec![a, b, c, d]);
            }
        }
    }
    out
}

fn hexagon_polygons(n: usize) -> Vec<Vec<Point>> {
    // Column steps and half-rows chosen so that the hexagons are close to
    // regular with diameter about 1/n, while fitting the square exactly.
    let columns = ((4.0 * n as f64 / 3.0).round() as usize).max(1);
    let half_rows = ((4.0 * n as f64 / 3f64.sqrt()).round() as usize).max(1);
    let r = 1.0 / (1.5 * columns as f64);
    let b = 1.0 / half_rows as f64;
    let min_area = 1e-6 * r * b;
    let mut out = Vec::new();
    for i in 0..=columns {
        let cx = 1.5 * r * i as f64;
        let offset = if i % 2 == 0 { 0.0 } else { b };
        let jmax = half_rows / 2 + 1;
        for j in 0..=jmax {
            let cy = 2.0 * b * j as f64 + offset;
            let hex = vec![
                Point::new(cx + r, cy),
                Point::new(cx + 0.5 * r, cy + b),
                Point::new(cx - 0.5 * r, cy + b),
                Point::new(cx - r, cy),
                Point::new(cx - 0.5 * r, cy - b),
                Point::new(cx + 0.5 * r, cy - b),
            ];
            let clipped = clip_to_unit_square(&hex);
            if clipped.len() >= 3 && super::polygon_area_centroid(&clipped).0.abs() > min_area {
                out.push(clipped);
            }
        }
    }
    out
}

const SNAP: f64 = 1e-12;

fn snap(v: f64) -> f64 {
    if v.abs() < SNAP {
        0.0
    } else if (v - 1.0).abs() < SNAP {
        1.0
    } else {
        v
    }
}

/// Sutherland–Hodgman clipping against the four sides of the unit square.
fn clip_to_unit_square(poly: &[Point]) -> Vec<Point> {
    // (axis, bound, keep-greater)
    let planes = [(0, 0.0, true), (0, 1.0, false), (1, 0.0, true), (1, 1.0, false)];
    let mut current: Vec<Point> = poly.to_vec();
    for &(axis, bound, greater) in &planes {
        if current.is_empty() {
            break;
        }
        let inside = |p: &Point| {
            if greater {
                p[axis] >= bound - SNAP
            } else {
                p[axis] <= bound + SNAP
            }
        };
        let mut next = Vec::with_capacity(current.len() + 2);
        for i in 0..current.len() {
            let s = current[(i + current.len() - 1) % current.len()];
            let e = current[i];
            if inside(&e) {
                if !inside(&s) {
                    next.push(intersect(s, e, axis, bound));
                }
                next.push(e);
            } else if inside(&s) {
                next.push(intersect(s, e, axis, bound));
            }
        }
        current = next;
    }
    let mut out: Vec<Point> = Vec::with_capacity(current.len());
    for p in current {
        let p = Point::new(snap(p.x), snap(p.y));
        if out.last().is_none_or(|q| (p - q).norm() > SNAP) {
            out.push(p);
        }
    }
    while out.len() > 1 && (out[0] - out[out.len() - 1]).norm() <= SNAP {
        out.pop();
    }
    out
}

fn intersect(s: Point, e: Point, axis: usize, bound: f64) -> Point {
    let t = (bound - s[axis]) / (e[axis] - s[axis]);
    let mut p = s + (e - s) * t;
    p[axis] = bound;
    p
}

/// Merges coincident points (up to rounding) and hands out indices.
#[derive(Default)]
struct PointPool {
    points: Vec<Point>,
    index: HashMap<(i64, i64), usize>,
}

impl PointPool {
    const SCALE: f64 = 1e8;

    fn insert(&mut self, p: Point) -> usize {
        let key = ((p.x * Self::SCALE).round() as i64, (p.y * Self::SCALE).round() as i64);
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(&id) = self.index.get(&(key.0 + dx, key.1 + dy)) {
                    if (self.points[id] - p).norm() < 1e-9 {
                        return id;
                    }
                }
            }
        }
        self.points.push(p);
        self.index.insert(key, self.points.len() - 1);
        self.points.len() - 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cartesian_counts() {
        let m = build_structured_mesh(MeshFamily::Cartesian, 2).unwrap();
        assert_eq!((m.num_elements(), m.num_edges(), m.num_vertices()), (4, 12, 9));
        let m4 = build_structured_mesh(MeshFamily::Cartesian, 4).unwrap();
        assert!((m4.h - 2f64.sqrt() / 4.0).abs() < 1e-15);
        assert_eq!(m4.num_boundary_edges(), 16);
    }

    #[test]
    fn triangular_counts() {
        let m = build_structured_mesh(MeshFamily::Triangular, 2).unwrap();
        assert_eq!((m.num_elements(), m.num_edges(), m.num_vertices()), (8, 16, 9));
    }

    #[test]
    fn families_cover_unit_square() {
        for family in MeshFamily::ALL {
            for n in 1..=6 {
                let m = build_structured_mesh(family, n).unwrap();
                let d = m.diagnostics();
                assert!((d.total_area - 1.0).abs() < 1e-12, "{family} {n}: {}", d.total_area);
                assert!(d.is_valid(), "{family} {n}");
                assert!(d.frame_defect < 1e-14);
                // Euler characteristic of a disc
                let chi = m.num_vertices() as i64 - m.num_edges() as i64 + m.num_elements() as i64;
                assert_eq!(chi, 1, "{family} {n}");
            }
        }
    }

    #[test]
    fn hexagonal_is_mostly_hexagons() {
        let m = build_structured_mesh(MeshFamily::Hexagonal, 4).unwrap();
        let hexes = m.elements.iter().filter(|t| t.num_edges() == 6).count();
        assert!(hexes * 2 > m.num_elements());
        assert!(m.h < 0.3 && m.h > 0.2, "h = {}", m.h);
    }

    #[test]
    fn family_names_round_trip() {
        for f in MeshFamily::ALL {
            assert_eq!(f.name().parse::<MeshFamily>().unwrap(), f);
        }
        assert!("square".parse::<MeshFamily>().is_err());
    }
}
