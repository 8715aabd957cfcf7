//! Plain-text mesh format:
//!
//! ```text
//! VERTICES <nv>
//! <x> <y>                      (nv lines)
//! EDGES <ne>
//! <v0> <v1>                    (ne lines, tangent from v0 to v1)
//! ELEMENTS <nt>
//! <m> <e_1> <s_1> ... <e_m> <s_m> [<xT_1> <xT_2>]
//! ```
//!
//! Indices are 0-based, `s_i = ±1` is the relative orientation of edge `e_i`,
//! and blank lines or lines starting with `#` are ignored.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{Mesh, Point, RawElement};
use crate::error::{DdrError, Result};

pub fn load_mesh(path: &Path) -> Result<Mesh> {
    read_mesh(&fs::read_to_string(path)?)
}

pub fn save_mesh(mesh: &Mesh, path: &Path) -> Result<()> {
    fs::write(path, write_mesh(mesh))?;
    Ok(())
}

pub fn write_mesh(mesh: &Mesh) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "VERTICES {}", mesh.num_vertices());
    for v in &mesh.vertices {
        let _ = writeln!(s, "{:?} {:?}", v.x.x, v.x.y);
    }
    let _ = writeln!(s, "EDGES {}", mesh.num_edges());
    for e in &mesh.edges {
        let _ = writeln!(s, "{} {}", e.vertices[0], e.vertices[1]);
    }
    let _ = writeln!(s, "ELEMENTS {}", mesh.num_elements());
    for t in &mesh.elements {
        let _ = write!(s, "{}", t.num_edges());
        for (e, o) in t.edges.iter().zip(&t.orientations) {
            let _ = write!(s, " {e} {o}");
        }
        if t.center_override {
            let _ = write!(s, " {:?} {:?}", t.center.x, t.center.y);
        }
        s.push('\n');
    }
    s
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn next_line(&mut self, what: &str) -> Result<(usize, Vec<&'a str>)> {
        for (i, line) in self.inner.by_ref() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            return Ok((i + 1, line.split_whitespace().collect()));
        }
        Err(DdrError::Parse {
            line: 0,
            message: format!("unexpected end of file, expected {what}"),
        })
    }

    fn header(&mut self, keyword: &str) -> Result<usize> {
        let (line, tok) = self.next_line(keyword)?;
        if tok.len() != 2 || tok[0] != keyword {
            return Err(parse_err(line, format!("expected '{keyword} <count>'")));
        }
        parse(line, tok[1])
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> DdrError {
    DdrError::Parse {
        line,
        message: message.into(),
    }
}

fn parse<T: std::str::FromStr>(line: usize, tok: &str) -> Result<T> {
    tok.parse()
        .map_err(|_| parse_err(line, format!("cannot parse '{tok}'")))
}

pub fn read_mesh(text: &str) -> Result<Mesh> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
    };

    let nv = lines.header("VERTICES")?;
    let mut points = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (line, tok) = lines.next_line("vertex coordinates")?;
        if tok.len() != 2 {
            return Err(parse_err(line, "expected two vertex coordinates"));
        }
        let p = Point::new(parse(line, tok[0])?, parse(line, tok[1])?);
        if !p.iter().all(|c| c.is_finite()) {
            return Err(parse_err(line, "non-finite vertex coordinate"));
        }
        points.push(p);
    }

    let ne = lines.header("EDGES")?;
    let mut edges = Vec::with_capacity(ne);
    for _ in 0..ne {
        let (line, tok) = lines.next_line("edge vertices")?;
        if tok.len() != 2 {
            return Err(parse_err(line, "expected two vertex indices"));
        }
        let e: [usize; 2] = [parse(line, tok[0])?, parse(line, tok[1])?];
        if e.iter().any(|&v| v >= nv) {
            return Err(parse_err(line, "vertex index out of range"));
        }
        edges.push(e);
    }

    let nt = lines.header("ELEMENTS")?;
    let mut raw = Vec::with_capacity(nt);
    for _ in 0..nt {
        let (line, tok) = lines.next_line("element")?;
        let m: usize = parse(line, tok[0])?;
        let rest = &tok[1..];
        let center = match rest.len() {
            l if l == 2 * m => None,
            l if l == 2 * m + 2 => Some(Point::new(parse(line, rest[2 * m])?, parse(line, rest[2 * m + 1])?)),
            _ => return Err(parse_err(line, format!("expected {m} edge/orientation pairs"))),
        };
        let mut el = RawElement {
            edges: Vec::with_capacity(m),
            orientations: Vec::with_capacity(m),
            center,
        };
        for pair in rest[..2 * m].chunks(2) {
            let e: usize = parse(line, pair[0])?;
            if e >= ne {
                return Err(parse_err(line, format!("edge index {e} out of range")));
            }
            let s: i8 = parse(line, pair[1])?;
            if s != 1 && s != -1 {
                return Err(parse_err(line, "orientation must be 1 or -1"));
            }
            el.edges.push(e);
            el.orientations.push(s);
        }
        raw.push(el);
    }
    if let Ok((line, _)) = lines.next_line("") {
        return Err(parse_err(line, "trailing content after last element"));
    }
    Mesh::from_raw(points, edges, raw)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_structured_mesh, MeshFamily};

    #[test]
    fn round_trip_is_exact() {
        for family in MeshFamily::ALL {
            let m = build_structured_mesh(family, 3).unwrap();
            let back = read_mesh(&write_mesh(&m)).unwrap();
            assert_eq!(back, m);
        }
    }

    #[test]
    fn reports_line_numbers() {
        let text = "VERTICES 3\n0 0\n1 0\n0 x\n";
        match read_mesh(text) {
            Err(DdrError::Parse { line: 4, .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn single_triangle() {
        let text = "VERTICES 3\n0 0\n1 0\n0 1\nEDGES 3\n0 1\n1 2\n0 2\nELEMENTS 1\n3 0 -1 1 -1 2 1\n";
        let m = read_mesh(text).unwrap();
        assert_eq!(m.elements[0].vertices, vec![0, 1, 2]);
        assert!(m.diagnostics().is_valid());
        assert!(!m.elements[0].center_override);
    }
}
