//! Plain-text mesh and matrix files.
//!
//! Mesh files read `dim n`, then `vertices V` with `V` coordinate lines,
//! then `cells C` with `C` lines of `n + 1` zero-based vertex indices.
//! Lines starting with `#` and blank lines are ignored. Matrix files hold a
//! `rows cols` header followed by the entries in row-major order.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::generators::MeshData;

fn perr(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn new(s: &'a str) -> Self {
        Lines {
            inner: s.lines().enumerate(),
            last: 0,
        }
    }

    /// Next meaningful line with its 1-based number.
    fn next(&mut self) -> Result<(usize, &'a str)> {
        for (i, l) in self.inner.by_ref() {
            let t = l.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            self.last = i + 1;
            return Ok((i + 1, t));
        }
        Err(perr(self.last + 1, "unexpected end of file"))
    }

    fn header(&mut self, key: &str) -> Result<usize> {
        let (ln, t) = self.next()?;
        let mut it = t.split_whitespace();
        if it.next() != Some(key) {
            return Err(perr(ln, format!("expected `{key} <count>`")));
        }
        let v = it
            .next()
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| perr(ln, format!("bad count after `{key}`")))?;
        if it.next().is_some() {
            return Err(perr(ln, "trailing tokens"));
        }
        Ok(v)
    }
}

fn parse_row<T: std::str::FromStr>(ln: usize, t: &str, want: usize) -> Result<Vec<T>> {
    let row: Vec<T> = t
        .split_whitespace()
        .map(|v| v.parse().map_err(|_| perr(ln, format!("cannot parse `{v}`"))))
        .collect::<Result<_>>()?;
    if row.len() != want {
        return Err(perr(ln, format!("expected {want} values, found {}", row.len())));
    }
    Ok(row)
}

pub fn parse_mesh(text: &str) -> Result<MeshData> {
    let mut lines = Lines::new(text);
    let dim = lines.header("dim")?;
    if !(2..=3).contains(&dim) {
        return Err(Error::UnsupportedDimension(dim));
    }
    let nv = lines.header("vertices")?;
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (ln, t) = lines.next()?;
        let row: Vec<f64> = parse_row(ln, t, dim)?;
        if row.iter().any(|x| !x.is_finite()) {
            return Err(perr(ln, "non-finite coordinate"));
        }
        vertices.push(row);
    }
    let nc = lines.header("cells")?;
    let mut cells = Vec::with_capacity(nc);
    for _ in 0..nc {
        let (ln, t) = lines.next()?;
        let row: Vec<usize> = parse_row(ln, t, dim + 1)?;
        if let Some(v) = row.iter().find(|&&v| v >= nv) {
            return Err(perr(ln, format!("vertex index {v} out of range")));
        }
        cells.push(row);
    }
    if let Ok((ln, _)) = lines.next() {
        return Err(perr(ln, "content after the last cell"));
    }
    Ok(MeshData { dim, vertices, cells })
}

pub fn write_mesh(data: &MeshData) -> String {
    let mut s = String::new();
    writeln!(s, "dim {}", data.dim).unwrap();
    writeln!(s, "vertices {}", data.vertices.len()).unwrap();
    for v in &data.vertices {
        let row: Vec<String> = v.iter().map(|x| format!("{x:?}")).collect();
        writeln!(s, "{}", row.join(" ")).unwrap();
    }
    writeln!(s, "cells {}", data.cells.len()).unwrap();
    for c in &data.cells {
        let row: Vec<String> = c.iter().map(usize::to_string).collect();
        writeln!(s, "{}", row.join(" ")).unwrap();
    }
    s
}

pub fn read_mesh(path: &Path) -> Result<MeshData> {
    parse_mesh(&std::fs::read_to_string(path)?)
}

/// Dense matrix in the export format. Values use the shortest
/// representation that round-trips.
pub fn write_matrix(a: &DMatrix<f64>) -> String {
    let mut s = String::new();
    writeln!(s, "{} {}", a.nrows(), a.ncols()).unwrap();
    for i in 0..a.nrows() {
        let row: Vec<String> = (0..a.ncols()).map(|j| format!("{:?}", a[(i, j)])).collect();
        writeln!(s, "{}", row.join(" ")).unwrap();
    }
    s
}

pub fn parse_matrix(text: &str) -> Result<DMatrix<f64>> {
    let mut tokens = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim_start().starts_with('#'))
        .flat_map(|(i, l)| l.split_whitespace().map(move |t| (i + 1, t)));
    let mut dim = |what: &str| -> Result<usize> {
        let (ln, t) = tokens.next().ok_or_else(|| perr(1, format!("missing {what}")))?;
        t.parse().map_err(|_| perr(ln, format!("bad {what} `{t}`")))
    };
    let (r, c) = (dim("row count")?, dim("column count")?);
    let mut vals = Vec::with_capacity(r * c);
    for (ln, t) in tokens {
        vals.push(t.parse::<f64>().map_err(|_| perr(ln, format!("cannot parse `{t}`")))?);
    }
    if vals.len() != r * c {
        return Err(perr(0, format!("expected {} entries, found {}", r * c, vals.len())));
    }
    Ok(DMatrix::from_row_slice(r, c, &vals))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{generate_data, Generator};

    #[test]
    fn mesh_round_trip() {
        let d = generate_data(Generator::Annulus2d, 2).unwrap();
        let back = parse_mesh(&write_mesh(&d)).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn comments_and_errors() {
        let ok = "# tri\ndim 2\nvertices 3\n0 0\n1 0\n# mid\n0 1\ncells 1\n0 1 2\n";
        let m = parse_mesh(ok).unwrap();
        assert_eq!(m.cells, vec![vec![0, 1, 2]]);
        let bad = "dim 2\nvertices 3\n0 0\n1 0\n0 1\ncells 1\n0 1 7\n";
        assert!(matches!(parse_mesh(bad), Err(Error::Parse { line: 7, .. })));
        assert!(matches!(parse_mesh("dim 4\n"), Err(Error::UnsupportedDimension(4))));
        assert!(parse_mesh("dim 2\nvertices 1\n0\n").is_err());
    }

    #[test]
    fn matrix_round_trip() {
        let a = DMatrix::from_row_slice(2, 3, &[1.0, -0.1, 1e-300, 3.5, 0.0, f64::MAX]);
        assert_eq!(parse_matrix(&write_matrix(&a)).unwrap(), a);
        assert!(parse_matrix("2 2\n1 2 3\n").is_err());
    }
}
