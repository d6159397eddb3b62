//! Built-in test manifolds and uniform refinement.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::mesh::SimplicialComplex;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Generator {
    Disk2d,
    Annulus2d,
    Ball3d,
    Shell3d,
    SolidTorus3d,
}

impl Generator {
    pub const ALL: [Generator; 5] = [
        Generator::Disk2d,
        Generator::Annulus2d,
        Generator::Ball3d,
        Generator::Shell3d,
        Generator::SolidTorus3d,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Generator::Disk2d => "disk2d",
            Generator::Annulus2d => "annulus2d",
            Generator::Ball3d => "ball3d",
            Generator::Shell3d => "shell3d",
            Generator::SolidTorus3d => "solidtorus3d",
        }
    }

    pub fn min_resolution(self) -> usize {
        1
    }

    /// Resolution used when none is requested.
    pub fn default_resolution(self) -> usize {
        match self {
            Generator::Disk2d => 12,
            Generator::Annulus2d => 16,
            Generator::Ball3d => 3,
            Generator::Shell3d => 1,
            Generator::SolidTorus3d => 2,
        }
    }
}

impl fmt::Display for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Generator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Generator::ALL
            .into_iter()
            .find(|g| g.name() == s)
            .ok_or_else(|| Error::UnknownGenerator(s.to_string()))
    }
}

/// Raw mesh data: dimension, coordinates and top cells.
#[derive(Clone, Debug, PartialEq)]
pub struct MeshData {
    pub dim: usize,
    pub vertices: Vec<Vec<f64>>,
    pub cells: Vec<Vec<usize>>,
}

impl MeshData {
    pub fn build(&self) -> Result<SimplicialComplex> {
        SimplicialComplex::from_cells(self.dim, self.vertices.clone(), &self.cells)
    }
}

pub fn generate_data(g: Generator, resolution: usize) -> Result<MeshData> {
    if resolution < g.min_resolution() {
        return Err(Error::Resolution {
            generator: g.name().to_string(),
            resolution,
            minimum: g.min_resolution(),
        });
    }
    Ok(match g {
        Generator::Disk2d => disk(resolution),
        Generator::Annulus2d => annulus(resolution),
        Generator::Ball3d => ball(resolution),
        Generator::Shell3d => shell(resolution),
        Generator::SolidTorus3d => solid_torus(resolution),
    })
}

/// Generate and validate a built-in mesh.
pub fn generate(g: Generator, resolution: usize) -> Result<(SimplicialComplex, MeshData)> {
    let data = generate_data(g, resolution)?;
    Ok((data.build()?, data))
}

/// Unit disk: concentric rings of `6i` vertices joined by strips.
fn disk(rings: usize) -> MeshData {
    let mut vertices = vec![vec![0.0, 0.0]];
    let mut start = vec![0usize];
    for i in 1..=rings {
        start.push(vertices.len());
        let r = i as f64 / rings as f64;
        let count = 6 * i;
        for j in 0..count {
            let t = 2.0 * PI * j as f64 / count as f64;
            vertices.push(vec![r * t.cos(), r * t.sin()]);
        }
    }
    let mut cells = Vec::new();
    for i in 1..=rings {
        let inner = if i == 1 { 1 } else { 6 * (i - 1) };
        let outer = 6 * i;
        let (s_in, s_out) = (start[i - 1], start[i]);
        let (mut a, mut b) = (0usize, 0usize);
        while a < inner || b < outer {
            // Advance along whichever ring has the next vertex at the smaller angle.
            let next_a = (a + 1) as f64 / inner as f64;
            let next_b = (b + 1) as f64 / outer as f64;
            let ia = s_in + a % inner;
            let ob = s_out + b % outer;
            if i == 1 || (b < outer && (a >= inner || next_b <= next_a)) {
                cells.push(vec![ia, ob, s_out + (b + 1) % outer]);
                b += 1;
                if i == 1 && b == outer {
                    break;
                }
            } else {
                cells.push(vec![ia, ob, s_in + (a + 1) % inner]);
                a += 1;
            }
        }
    }
    MeshData {
        dim: 2,
        vertices,
        cells,
    }
}

/// Annulus `0.5 ≤ r ≤ 1` with `layers` radial layers of split quads.
fn annulus(layers: usize) -> MeshData {
    let nt = ((3.0 * PI * layers as f64).round() as usize).max(3);
    let mut vertices = Vec::new();
    for i in 0..=layers {
        let r = 0.5 + 0.5 * i as f64 / layers as f64;
        for j in 0..nt {
            let t = 2.0 * PI * j as f64 / nt as f64;
            vertices.push(vec![r * t.cos(), r * t.sin()]);
        }
    }
    let id = |i: usize, j: usize| i * nt + j % nt;
    let mut cells = Vec::new();
    for i in 0..layers {
        for j in 0..nt {
            cells.push(vec![id(i, j), id(i, j + 1), id(i + 1, j + 1)]);
            cells.push(vec![id(i, j), id(i + 1, j + 1), id(i + 1, j)]);
        }
    }
    MeshData {
        dim: 2,
        vertices,
        cells,
    }
}

/// The six Kuhn tetrahedra of the unit cube, as offset triples.
fn kuhn_offsets() -> Vec<[[usize; 3]; 4]> {
    let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    perms
        .iter()
        .map(|p| {
            let mut v = [[0usize; 3]; 4];
            for s in 0..3 {
                v[s + 1] = v[s];
                v[s + 1][p[s]] = 1;
            }
            v
        })
        .collect()
}

/// Radial map sending cube shells to round spheres.
fn round(x: [f64; 3]) -> Vec<f64> {
    let inf = x.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let two = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
    if two == 0.0 {
        return x.to_vec();
    }
    x.iter().map(|v| v * inf / two).collect()
}

/// Kuhn-subdivided grid of cubes selected by `keep`, coordinates from
/// `place`. The third axis wraps when `periodic` is set.
fn cube_grid(
    dims: [usize; 3],
    periodic: bool,
    keep: impl Fn(usize, usize, usize) -> bool,
    place: impl Fn(usize, usize, usize) -> Vec<f64>,
) -> MeshData {
    let mut index = HashMap::new();
    let mut vertices = Vec::new();
    let mut cells = Vec::new();
    let offsets = kuhn_offsets();
    for i in 0..dims[0] {
        for j in 0..dims[1] {
            for l in 0..dims[2] {
                if !keep(i, j, l) {
                    continue;
                }
                for tet in &offsets {
                    let cell = tet
                        .iter()
                        .map(|o| {
                            let mut key = (i + o[0], j + o[1], l + o[2]);
                            if periodic {
                                key.2 %= dims[2];
                            }
                            *index.entry(key).or_insert_with(|| {
                                vertices.push(place(key.0, key.1, key.2));
                                vertices.len() - 1
                            })
                        })
                        .collect();
                    cells.push(cell);
                }
            }
        }
    }
    MeshData {
        dim: 3,
        vertices,
        cells,
    }
}

/// Unit ball from a `2r × 2r × 2r` cube grid.
fn ball(res: usize) -> MeshData {
    let n = 2 * res;
    let h = 1.0 / res as f64;
    cube_grid(
        [n; 3],
        false,
        |_, _, _| true,
        |i, j, l| round([i as f64 * h - 1.0, j as f64 * h - 1.0, l as f64 * h - 1.0]),
    )
}

/// Shell `1 ≤ r ≤ 2`.
fn shell(res: usize) -> MeshData {
    let n = 4 * res;
    let h = 1.0 / res as f64;
    let inner = |c: usize| c >= res && c < 3 * res;
    cube_grid(
        [n; 3],
        false,
        |i, j, l| !(inner(i) && inner(j) && inner(l)),
        |i, j, l| round([i as f64 * h - 2.0, j as f64 * h - 2.0, l as f64 * h - 2.0]),
    )
}

/// Solid torus with major radius 2 and minor radius 1.
fn solid_torus(res: usize) -> MeshData {
    let n = 2 * res;
    let nt = (6 * res).max(3);
    let h = 1.0 / res as f64;
    cube_grid(
        [n, n, nt],
        true,
        |_, _, _| true,
        |i, j, l| {
            let p = round([i as f64 * h - 1.0, j as f64 * h - 1.0, 0.0]);
            let t = 2.0 * PI * l as f64 / nt as f64;
            let rr = 2.0 + p[0];
            vec![rr * t.cos(), rr * t.sin(), p[1]]
        },
    )
}

/// Split every triangle into four through edge midpoints.
pub fn refine_2d(data: &MeshData) -> Result<MeshData> {
    if data.dim != 2 {
        return Err(Error::UnsupportedDimension(data.dim));
    }
    let mut vertices = data.vertices.clone();
    let mut mid = HashMap::new();
    let mut midpoint = |a: usize, b: usize, vertices: &mut Vec<Vec<f64>>| -> usize {
        let key = (a.min(b), a.max(b));
        *mid.entry(key).or_insert_with(|| {
            let p = vertices[key.0].iter().zip(&vertices[key.1]).map(|(x, y)| 0.5 * (x + y)).collect();
            vertices.push(p);
            vertices.len() - 1
        })
    };
    let mut cells = Vec::with_capacity(4 * data.cells.len());
    for c in &data.cells {
        let (a, b, d) = (c[0], c[1], c[2]);
        let ab = midpoint(a, b, &mut vertices);
        let bd = midpoint(b, d, &mut vertices);
        let da = midpoint(d, a, &mut vertices);
        cells.push(vec![a, ab, da]);
        cells.push(vec![ab, b, bd]);
        cells.push(vec![da, bd, d]);
        cells.push(vec![ab, bd, da]);
    }
    Ok(MeshData {
        dim: 2,
        vertices,
        cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::extract_boundary;

    #[test]
    fn euler_characteristics_and_components() {
        let expect = [
            (Generator::Disk2d, 1, 1),
            (Generator::Annulus2d, 0, 2),
            (Generator::Ball3d, 1, 1),
            (Generator::Shell3d, 2, 2),
            (Generator::SolidTorus3d, 0, 1),
        ];
        for (g, chi, comps) in expect {
            for res in 1..=2 {
                let (c, _) = generate(g, res).unwrap();
                assert_eq!(c.euler_characteristic(), chi, "{g} {res}");
                let b = extract_boundary(&c).unwrap();
                assert_eq!(b.components(), comps, "{g} {res}");
            }
        }
    }

    #[test]
    fn disk_triangle_count() {
        let (c, _) = generate(Generator::Disk2d, 3).unwrap();
        assert_eq!(c.count(2), 54);
        assert_eq!(c.euler_characteristic(), 1);
    }

    #[test]
    fn zero_resolution_rejected() {
        assert!(matches!(generate(Generator::Ball3d, 0), Err(Error::Resolution { .. })));
        assert!(matches!("klein".parse::<Generator>(), Err(Error::UnknownGenerator(_))));
    }

    #[test]
    fn refinement_quadruples() {
        let d = generate_data(Generator::Annulus2d, 2).unwrap();
        let r = refine_2d(&d).unwrap();
        let c = r.build().unwrap();
        assert_eq!(c.count(2), 4 * d.cells.len());
        assert_eq!(c.euler_characteristic(), 0);
    }
}
