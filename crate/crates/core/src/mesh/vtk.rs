//! Legacy ASCII VTK unstructured-grid reader and writer (triangles only).

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::Triangulation;
use crate::error::{Error, Result};
use crate::linalg::{Mat2, Point};

const VTK_TRIANGLE: usize = 5;

/// Optional attributes attached to a mesh on output.
#[derive(Default)]
pub struct VtkFields<'a> {
    pub point_scalars: Vec<(&'a str, &'a [f64])>,
    pub cell_scalars: Vec<(&'a str, &'a [f64])>,
    pub cell_tensors: Vec<(&'a str, &'a [Mat2])>,
}

/// Result of reading a VTK file: the mesh plus any point scalars found.
#[derive(Debug)]
pub struct VtkData {
    pub mesh: Triangulation,
    pub point_scalars: Vec<(String, Vec<f64>)>,
}

impl VtkData {
    pub fn scalar(&self, name: &str) -> Option<&[f64]> {
        self.point_scalars
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_slice())
    }
}

pub fn to_vtk_string(mesh: &Triangulation, title: &str, fields: &VtkFields) -> String {
    let mut s = String::new();
    let nv = mesh.n_vertices();
    let n = mesh.n_elements();
    // infallible: writing into a String
    let _ = writeln!(s, "# vtk DataFile Version 3.0");
    let _ = writeln!(s, "{}", title.lines().next().unwrap_or(""));
    let _ = writeln!(s, "ASCII");
    let _ = writeln!(s, "DATASET UNSTRUCTURED_GRID");
    let _ = writeln!(s, "POINTS {nv} double");
    for p in mesh.vertices() {
        let _ = writeln!(s, "{:?} {:?} 0", p.x, p.y);
    }
    let _ = writeln!(s, "CELLS {n} {}", 4 * n);
    for t in mesh.triangles() {
        let _ = writeln!(s, "3 {} {} {}", t[0], t[1], t[2]);
    }
    let _ = writeln!(s, "CELL_TYPES {n}");
    for _ in 0..n {
        let _ = writeln!(s, "{VTK_TRIANGLE}");
    }
    if !fields.point_scalars.is_empty() {
        let _ = writeln!(s, "POINT_DATA {nv}");
        for (name, values) in &fields.point_scalars {
            let _ = writeln!(s, "SCALARS {name} double 1");
            let _ = writeln!(s, "LOOKUP_TABLE default");
            for v in values.iter() {
                let _ = writeln!(s, "{v:?}");
            }
        }
    }
    if !fields.cell_scalars.is_empty() || !fields.cell_tensors.is_empty() {
        let _ = writeln!(s, "CELL_DATA {n}");
        for (name, values) in &fields.cell_scalars {
            let _ = writeln!(s, "SCALARS {name} double 1");
            let _ = writeln!(s, "LOOKUP_TABLE default");
            for v in values.iter() {
                let _ = writeln!(s, "{v:?}");
            }
        }
        for (name, values) in &fields.cell_tensors {
            let _ = writeln!(s, "TENSORS {name} double");
            for m in values.iter() {
                let _ = writeln!(s, "{:?} {:?} 0", m[(0, 0)], m[(0, 1)]);
                let _ = writeln!(s, "{:?} {:?} 0", m[(1, 0)], m[(1, 1)]);
                let _ = writeln!(s, "0 0 0");
            }
        }
    }
    s
}

pub fn write_vtk(path: impl AsRef<Path>, mesh: &Triangulation, title: &str, fields: &VtkFields) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, to_vtk_string(mesh, title, fields)).map_err(|e| Error::io(path, e))
}

pub fn read_vtk(path: impl AsRef<Path>) -> Result<VtkData> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_vtk(&text)
}

struct Tokens<'a> {
    inner: std::iter::Peekable<std::str::SplitWhitespace<'a>>,
}

impl<'a> Tokens<'a> {
    fn next(&mut self, what: &str) -> Result<&'a str> {
        self.inner
            .next()
            .ok_or_else(|| Error::VtkParse(format!("unexpected end of file reading {what}")))
    }

    fn number<T: std::str::FromStr>(&mut self, what: &str) -> Result<T> {
        let tok = self.next(what)?;
        tok.parse().map_err(|_| Error::VtkParse(format!("bad {what}: {tok:?}")))
    }
}

pub fn parse_vtk(text: &str) -> Result<VtkData> {
    let mut lines = text.lines();
    let header = lines.next().unwrap_or("");
    if !header.starts_with("# vtk DataFile") {
        return Err(Error::VtkParse("missing '# vtk DataFile' header".into()));
    }
    let _title = lines.next();
    let body: Vec<&str> = lines.collect();
    let body = body.join("\n");
    let mut tok = Tokens {
        inner: body.split_whitespace().peekable(),
    };
    let format = tok.next("format")?;
    if !format.eq_ignore_ascii_case("ASCII") {
        return Err(Error::VtkParse(format!("only ASCII files are supported, got {format}")));
    }

    let mut points: Vec<Point> = Vec::new();
    let mut cells: Vec<[usize; 3]> = Vec::new();
    let mut point_scalars = Vec::new();
    let mut n_point_data = None;
    let mut in_cell_data = false;

    while let Some(key) = tok.inner.next() {
        match key.to_ascii_uppercase().as_str() {
            "DATASET" => {
                let kind = tok.next("dataset type")?;
                if !kind.eq_ignore_ascii_case("UNSTRUCTURED_GRID") {
                    return Err(Error::VtkParse(format!("unsupported dataset {kind}")));
                }
            }
            "POINTS" => {
                let n: usize = tok.number("point count")?;
                let _ty = tok.next("point type")?;
                points.reserve(n);
                for _ in 0..n {
                    let x: f64 = tok.number("x")?;
                    let y: f64 = tok.number("y")?;
                    let _z: f64 = tok.number("z")?;
                    points.push(Point::new(x, y));
                }
            }
            "CELLS" => {
                let n: usize = tok.number("cell count")?;
                let _size: usize = tok.number("cell list size")?;
                for _ in 0..n {
                    let k: usize = tok.number("cell arity")?;
                    if k != 3 {
                        return Err(Error::VtkParse(format!("only triangles supported, got {k}-cell")));
                    }
                    cells.push([tok.number("index")?, tok.number("index")?, tok.number("index")?]);
                }
            }
            "CELL_TYPES" => {
                let n: usize = tok.number("cell type count")?;
                for _ in 0..n {
                    let ty: usize = tok.number("cell type")?;
                    if ty != VTK_TRIANGLE {
                        return Err(Error::VtkParse(format!("unsupported cell type {ty}")));
                    }
                }
            }
            "POINT_DATA" => {
                n_point_data = Some(tok.number::<usize>("point data count")?);
                in_cell_data = false;
            }
            "CELL_DATA" => {
                let _n: usize = tok.number("cell data count")?;
                in_cell_data = true;
            }
            "SCALARS" => {
                let name = tok.next("scalar name")?.to_string();
                let _ty = tok.next("scalar type")?;
                if tok.inner.peek().is_some_and(|t| t.parse::<usize>().is_ok()) {
                    let _ncomp = tok.next("components")?;
                }
                if tok.inner.peek().is_some_and(|t| t.eq_ignore_ascii_case("LOOKUP_TABLE")) {
                    tok.next("lookup table")?;
                    tok.next("lookup table name")?;
                }
                let count = if in_cell_data {
                    cells.len()
                } else {
                    n_point_data.unwrap_or(points.len())
                };
                let mut values = Vec::with_capacity(count);
                for _ in 0..count {
                    values.push(tok.number::<f64>("scalar value")?);
                }
                if !in_cell_data {
                    point_scalars.push((name, values));
                }
            }
            "TENSORS" => {
                let _name = tok.next("tensor name")?;
                let _ty = tok.next("tensor type")?;
                let count = if in_cell_data { cells.len() } else { points.len() };
                for _ in 0..9 * count {
                    tok.number::<f64>("tensor value")?;
                }
            }
            other => {
                return Err(Error::VtkParse(format!("unexpected keyword {other}")));
            }
        }
    }

    let mesh = Triangulation::new(points, cells)?;
    Ok(VtkData { mesh, point_scalars })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_fixed_mesh, Rect};

    #[test]
    fn round_trip_is_exact() {
        let m = generate_fixed_mesh(Rect::new(-3.0, 3.0, -1.0, 2.0).unwrap(), 3, 2).unwrap();
        let u: Vec<f64> = m.vertices().iter().map(|p| (p.x * 0.1).sin() + p.y / 3.0).collect();
        let metric = vec![Mat2::new(2.0, 0.5, 0.5, 1.0); m.n_elements()];
        let text = to_vtk_string(
            &m,
            "snapshot",
            &VtkFields {
                point_scalars: vec![("u", &u)],
                cell_scalars: vec![],
                cell_tensors: vec![("metric", &metric)],
            },
        );
        let back = parse_vtk(&text).unwrap();
        assert_eq!(back.mesh.vertices(), m.vertices());
        assert_eq!(back.mesh.triangles(), m.triangles());
        assert_eq!(back.scalar("u").unwrap(), u.as_slice());
    }

    #[test]
    fn rejects_quads() {
        let text = "# vtk DataFile Version 3.0\nq\nASCII\nDATASET UNSTRUCTURED_GRID\n\
                    POINTS 4 double\n0 0 0\n1 0 0\n1 1 0\n0 1 0\nCELLS 1 5\n4 0 1 2 3\nCELL_TYPES 1\n9\n";
        assert!(matches!(parse_vtk(text), Err(Error::VtkParse(_))));
    }
}
