//! Oriented simplicial manifolds with boundary, their incidence matrices and
//! the boundary subcomplex.
//!
//! Simplices are stored as sorted vertex tuples. Cochain coefficients are
//! always taken with respect to the sorted (vertex-order) orientation; the
//! only place where a genuine orientation sign enters is the top-dimensional
//! simplices, whose sign relative to the ambient (bulk) or outward-normal
//! (boundary) orientation is kept in [`SimplicialComplex::top_orientation`].

use std::collections::{BTreeSet, HashMap};

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Sorted vertex tuple.
pub type Simplex = Vec<usize>;

/// Signed integer incidence matrix of the coboundary `D_k`, stored by rows.
///
/// Row `r` lists the faces of the `(k+1)`-simplex `r` with their signs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Incidence {
    nrows: usize,
    ncols: usize,
    rows: Vec<Vec<(usize, i8)>>,
}

impl Incidence {
    pub fn new(nrows: usize, ncols: usize, rows: Vec<Vec<(usize, i8)>>) -> Self {
        debug_assert_eq!(rows.len(), nrows);
        Self { nrows, ncols, rows }
    }

    pub fn empty(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            rows: vec![Vec::new(); nrows],
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn rows(&self) -> &[Vec<(usize, i8)>] {
        &self.rows
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nrows, self.ncols);
        for (r, row) in self.rows.iter().enumerate() {
            for &(c, s) in row {
                m[(r, c)] += f64::from(s);
            }
        }
        m
    }

    /// Integer product `self * rhs`, as a dense integer matrix.
    pub fn compose(&self, rhs: &Incidence) -> Vec<Vec<i64>> {
        assert_eq!(self.ncols, rhs.nrows);
        let mut out = vec![vec![0i64; rhs.ncols]; self.nrows];
        for (r, row) in self.rows.iter().enumerate() {
            for &(mid, s) in row {
                for &(c, t) in &rhs.rows[mid] {
                    out[r][c] += i64::from(s) * i64::from(t);
                }
            }
        }
        out
    }

    /// Restrict to the given rows and columns (both listed by old index).
    pub fn restrict(&self, rows: &[usize], cols: &[usize]) -> Incidence {
        let mut col_map = vec![usize::MAX; self.ncols];
        for (new, &old) in cols.iter().enumerate() {
            col_map[old] = new;
        }
        let new_rows = rows
            .iter()
            .map(|&r| {
                self.rows[r]
                    .iter()
                    .filter(|(c, _)| col_map[*c] != usize::MAX)
                    .map(|&(c, s)| (col_map[c], s))
                    .collect()
            })
            .collect();
        Incidence::new(rows.len(), cols.len(), new_rows)
    }
}

/// Oriented simplicial `n`-complex embedded in Euclidean space.
#[derive(Clone, Debug)]
pub struct SimplicialComplex {
    dim: usize,
    vertices: Vec<Vec<f64>>,
    simplices: Vec<Vec<Simplex>>,
    top_orientation: Vec<i8>,
    lookup: Vec<HashMap<Simplex, usize>>,
    coboundary: Vec<Incidence>,
}

impl SimplicialComplex {
    /// Build and validate a bulk manifold mesh of dimension 2 or 3 from
    /// top-dimensional cells given as vertex indices.
    ///
    /// Top simplices are oriented by the embedding, so every top simplex is
    /// positively oriented. The mesh must be a manifold with nonempty
    /// boundary whose top simplices induce opposite orientations on every
    /// interior facet.
    pub fn from_cells(dim: usize, vertices: Vec<Vec<f64>>, cells: &[Vec<usize>]) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::UnsupportedDimension(dim));
        }
        for (i, v) in vertices.iter().enumerate() {
            if v.len() != dim {
                return Err(Error::Parse {
                    line: 0,
                    msg: format!("vertex {i} has {} coordinates, expected {dim}", v.len()),
                });
            }
        }
        let mut sorted_cells = Vec::with_capacity(cells.len());
        for (i, c) in cells.iter().enumerate() {
            if c.len() != dim + 1 {
                return Err(Error::Parse {
                    line: 0,
                    msg: format!("cell {i} has {} vertices, expected {}", c.len(), dim + 1),
                });
            }
            let mut s = c.clone();
            s.sort_unstable();
            if s.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::NonManifold(format!("cell {i} repeats a vertex")));
            }
            if s[dim] >= vertices.len() {
                return Err(Error::Parse {
                    line: 0,
                    msg: format!("cell {i} references vertex {} out of range", s[dim]),
                });
            }
            sorted_cells.push(s);
        }
        let unique: BTreeSet<_> = sorted_cells.iter().cloned().collect();
        if unique.len() != sorted_cells.len() {
            return Err(Error::NonManifold("duplicate cells".into()));
        }
        let cells: Vec<Simplex> = unique.into_iter().collect();
        let mut orientation = Vec::with_capacity(cells.len());
        for (i, c) in cells.iter().enumerate() {
            let pts: Vec<&[f64]> = c.iter().map(|&v| vertices[v].as_slice()).collect();
            let d = edge_determinant(&pts);
            let vol = d.abs() / factorial(dim);
            if vol <= 1e-14 * scale_of(&pts).powi(dim as i32) {
                return Err(Error::DegenerateSimplex {
                    degree: dim,
                    index: i,
                    volume: vol,
                });
            }
            orientation.push(if d > 0.0 { 1 } else { -1 });
        }
        let complex = Self::assemble(dim, vertices, cells, orientation);
        complex.validate_manifold()?;
        Ok(complex)
    }

    /// Construct a complex from sorted top simplices and their orientation
    /// signs without manifold validation. Used for boundary complexes.
    fn assemble(dim: usize, vertices: Vec<Vec<f64>>, top: Vec<Simplex>, top_orientation: Vec<i8>) -> Self {
        let mut sets: Vec<BTreeSet<Simplex>> = vec![BTreeSet::new(); dim + 1];
        for c in &top {
            for (k, set) in sets.iter_mut().enumerate() {
                set.extend(subsets(c, k + 1));
            }
        }
        // Keep isolated vertices out; every vertex must belong to a cell.
        let simplices: Vec<Vec<Simplex>> = sets
            .into_iter()
            .enumerate()
            .map(|(k, s)| if k == dim { top.clone() } else { s.into_iter().collect() })
            .collect();
        let lookup: Vec<HashMap<Simplex, usize>> = simplices
            .iter()
            .map(|list| list.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect())
            .collect();
        let mut coboundary = Vec::with_capacity(dim);
        for k in 0..dim {
            let rows = simplices[k + 1]
                .iter()
                .map(|s| {
                    (0..s.len())
                        .map(|i| {
                            let mut face = s.clone();
                            face.remove(i);
                            let sign = if i % 2 == 0 { 1 } else { -1 };
                            (lookup[k][&face], sign)
                        })
                        .collect()
                })
                .collect();
            coboundary.push(Incidence::new(simplices[k + 1].len(), simplices[k].len(), rows));
        }
        Self {
            dim,
            vertices,
            simplices,
            top_orientation,
            lookup,
            coboundary,
        }
    }

    fn validate_manifold(&self) -> Result<()> {
        let n = self.dim;
        if self.simplices[0].len() != self.vertices.len() {
            return Err(Error::NonManifold(format!(
                "{} vertices are not used by any cell",
                self.vertices.len() - self.simplices[0].len()
            )));
        }
        // Induced orientation on each facet: sum over cofaces must vanish for
        // interior facets.
        let facets = self.simplices[n - 1].len();
        let mut count = vec![0u32; facets];
        let mut induced = vec![0i32; facets];
        for (row, &o) in self.coboundary[n - 1].rows.iter().zip(&self.top_orientation) {
            for &(f, s) in row {
                count[f] += 1;
                induced[f] += i32::from(s) * i32::from(o);
            }
        }
        let mut boundary = 0usize;
        for f in 0..facets {
            match count[f] {
                1 => boundary += 1,
                2 => {
                    if induced[f] != 0 {
                        return Err(Error::NonOrientable(format!(
                            "facet {:?} receives the same orientation from both neighbours",
                            self.simplices[n - 1][f]
                        )));
                    }
                }
                c => {
                    return Err(Error::NonManifold(format!(
                        "facet {:?} is a face of {c} top simplices",
                        self.simplices[n - 1][f]
                    )))
                }
            }
        }
        if boundary == 0 {
            return Err(Error::EmptyBoundary);
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vertices(&self) -> &[Vec<f64>] {
        &self.vertices
    }

    pub fn simplices(&self, k: usize) -> &[Simplex] {
        &self.simplices[k]
    }

    pub fn count(&self, k: usize) -> usize {
        self.simplices.get(k).map_or(0, Vec::len)
    }

    pub fn counts(&self) -> Vec<usize> {
        self.simplices.iter().map(Vec::len).collect()
    }

    pub fn index_of(&self, k: usize, s: &[usize]) -> Option<usize> {
        self.lookup[k].get(s).copied()
    }

    pub fn top_orientation(&self) -> &[i8] {
        &self.top_orientation
    }

    /// Coboundary `D_k` from k-cochains to (k+1)-cochains.
    pub fn coboundary(&self, k: usize) -> &Incidence {
        &self.coboundary[k]
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.simplices
            .iter()
            .enumerate()
            .map(|(k, s)| if k % 2 == 0 { s.len() as i64 } else { -(s.len() as i64) })
            .sum()
    }

    /// Longest edge length.
    pub fn max_edge_length(&self) -> f64 {
        self.simplices[1]
            .iter()
            .map(|e| distance(&self.vertices[e[0]], &self.vertices[e[1]]))
            .fold(0.0, f64::max)
    }

    pub fn points(&self, s: &[usize]) -> Vec<&[f64]> {
        s.iter().map(|&v| self.vertices[v].as_slice()).collect()
    }
}

/// Boundary subcomplex with its inclusion into the bulk complex.
#[derive(Clone, Debug)]
pub struct BoundaryComplex {
    complex: SimplicialComplex,
    inclusion: Vec<Vec<usize>>,
}

impl BoundaryComplex {
    pub fn complex(&self) -> &SimplicialComplex {
        &self.complex
    }

    /// Index map from boundary k-simplices to bulk k-simplices.
    pub fn inclusion(&self, k: usize) -> &[usize] {
        &self.inclusion[k]
    }

    pub fn dim(&self) -> usize {
        self.complex.dim
    }

    pub fn count(&self, k: usize) -> usize {
        self.complex.count(k)
    }

    /// Number of connected components, by union-find over boundary edges.
    pub fn components(&self) -> usize {
        let n = self.complex.count(0);
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for e in self.complex.simplices(1) {
            let (a, b) = (find(&mut parent, e[0]), find(&mut parent, e[1]));
            if a != b {
                parent[a] = b;
            }
        }
        (0..n).filter(|&v| find(&mut parent, v) == v).count()
    }

    /// Bulk indices of the interior (non-boundary) k-simplices.
    pub fn interior(&self, bulk: &SimplicialComplex, k: usize) -> Vec<usize> {
        let mut on = vec![false; bulk.count(k)];
        if k < self.inclusion.len() {
            for &i in &self.inclusion[k] {
                on[i] = true;
            }
        }
        (0..bulk.count(k)).filter(|&i| !on[i]).collect()
    }
}

/// Extract the boundary of a validated bulk complex.
///
/// Boundary facets are oriented by the outward normal: a facet is positive
/// when (outward normal, sorted facet frame) is positively oriented in the
/// ambient space.
pub fn extract_boundary(c: &SimplicialComplex) -> Result<BoundaryComplex> {
    let n = c.dim;
    let facets = c.count(n - 1);
    let mut count = vec![0u32; facets];
    let mut owner = vec![usize::MAX; facets];
    for (t, row) in c.coboundary[n - 1].rows.iter().enumerate() {
        for &(f, _) in row {
            count[f] += 1;
            owner[f] = t;
        }
    }
    let bfacets: Vec<usize> = (0..facets).filter(|&f| count[f] == 1).collect();
    if bfacets.is_empty() {
        return Err(Error::EmptyBoundary);
    }
    let mut bverts: BTreeSet<usize> = BTreeSet::new();
    for &f in &bfacets {
        bverts.extend(c.simplices[n - 1][f].iter().copied());
    }
    let bverts: Vec<usize> = bverts.into_iter().collect();
    let mut local = HashMap::with_capacity(bverts.len());
    for (i, &v) in bverts.iter().enumerate() {
        local.insert(v, i);
    }
    let mut top = Vec::with_capacity(bfacets.len());
    let mut orient = Vec::with_capacity(bfacets.len());
    for &f in &bfacets {
        let face = &c.simplices[n - 1][f];
        let cell = &c.simplices[n][owner[f]];
        let apex = *cell.iter().find(|v| !face.contains(v)).expect("facet of cell");
        let mut pts: Vec<Vec<f64>> = Vec::with_capacity(n);
        let p0 = &c.vertices[face[0]];
        pts.push(p0.iter().zip(&c.vertices[apex]).map(|(a, b)| a - b).collect());
        for &v in &face[1..] {
            pts.push(c.vertices[v].iter().zip(p0).map(|(a, b)| a - b).collect());
        }
        let m = DMatrix::from_fn(n, n, |i, j| pts[j][i]);
        let d = m.determinant();
        orient.push(if d > 0.0 { 1 } else { -1 });
        // Monotone relabelling keeps the tuple sorted.
        top.push(face.iter().map(|v| local[v]).collect::<Vec<_>>());
    }
    // Boundary facets must be listed in sorted order to match `assemble`.
    let mut order: Vec<usize> = (0..top.len()).collect();
    order.sort_by(|&a, &b| top[a].cmp(&top[b]));
    let top: Vec<Simplex> = order.iter().map(|&i| top[i].clone()).collect();
    let orient: Vec<i8> = order.iter().map(|&i| orient[i]).collect();
    let coords = bverts.iter().map(|&v| c.vertices[v].clone()).collect();
    let complex = SimplicialComplex::assemble(n - 1, coords, top, orient);
    let mut inclusion = Vec::with_capacity(n);
    for k in 0..n {
        let map = complex.simplices[k]
            .iter()
            .map(|s| {
                let global: Vec<usize> = s.iter().map(|&v| bverts[v]).collect();
                c.lookup[k][&global]
            })
            .collect();
        inclusion.push(map);
    }
    let b = BoundaryComplex { complex, inclusion };
    b.check_closed()?;
    Ok(b)
}

impl BoundaryComplex {
    fn check_closed(&self) -> Result<()> {
        let m = self.complex.dim;
        if m == 0 {
            return Ok(());
        }
        let mut count = vec![0u32; self.complex.count(m - 1)];
        for row in &self.complex.coboundary[m - 1].rows {
            for &(f, _) in row {
                count[f] += 1;
            }
        }
        if let Some(f) = count.iter().position(|&c| c != 2) {
            return Err(Error::NonManifold(format!(
                "boundary is not closed: {:?} lies in {} boundary facets",
                self.complex.simplices[m - 1][f], count[f]
            )));
        }
        Ok(())
    }
}

/// Domain of a cochain.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Domain {
    Bulk,
    Boundary,
}

/// How cochain coefficients are to be read.
///
/// Strong coefficients are Whitney degrees of freedom; weak coefficients are
/// a functional paired against basis forms.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Representation {
    Strong,
    Weak,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Cochain {
    pub degree: usize,
    pub domain: Domain,
    pub representation: Representation,
    pub coefficients: nalgebra::DVector<f64>,
}

impl Cochain {
    pub fn new(
        c: &SimplicialComplex,
        b: &BoundaryComplex,
        degree: usize,
        domain: Domain,
        representation: Representation,
        coefficients: nalgebra::DVector<f64>,
    ) -> Result<Self> {
        let (top, len) = match domain {
            Domain::Bulk => (c.dim, c.count(degree)),
            Domain::Boundary => (b.dim(), b.count(degree)),
        };
        if degree > top {
            return Err(Error::InvalidDegree {
                degree,
                msg: format!("exceeds dimension {top} of the {domain:?} complex"),
            });
        }
        if coefficients.len() != len {
            return Err(Error::Shape(format!(
                "{} coefficients for {len} {domain:?} {degree}-simplices",
                coefficients.len()
            )));
        }
        Ok(Self {
            degree,
            domain,
            representation,
            coefficients,
        })
    }
}

/// Tangential trace: restrict a strong bulk k-cochain to the boundary.
pub fn trace(c: &SimplicialComplex, b: &BoundaryComplex, omega: &Cochain) -> Result<Cochain> {
    if omega.domain != Domain::Bulk || omega.representation != Representation::Strong {
        return Err(Error::Shape("trace expects a strong bulk cochain".into()));
    }
    let k = omega.degree;
    if k >= c.dim {
        return Err(Error::InvalidDegree {
            degree: k,
            msg: "the boundary has no simplices of this degree".into(),
        });
    }
    let coeffs = nalgebra::DVector::from_iterator(
        b.count(k),
        b.inclusion(k).iter().map(|&i| omega.coefficients[i]),
    );
    Cochain::new(c, b, k, Domain::Boundary, Representation::Strong, coeffs)
}

pub(crate) fn subsets(s: &[usize], size: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(size);
    fn rec(s: &[usize], start: usize, size: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == size {
            out.push(cur.clone());
            return;
        }
        for i in start..s.len() {
            cur.push(s[i]);
            rec(s, i + 1, size, cur, out);
            cur.pop();
        }
    }
    rec(s, 0, size, &mut cur, &mut out);
    out
}

pub(crate) fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn scale_of(pts: &[&[f64]]) -> f64 {
    let mut s: f64 = 0.0;
    for p in &pts[1..] {
        s = s.max(distance(p, pts[0]));
    }
    s
}

/// `det[p1 - p0, ..., pn - p0]` for `n + 1` points in `R^n`.
fn edge_determinant(pts: &[&[f64]]) -> f64 {
    let n = pts.len() - 1;
    DMatrix::from_fn(n, n, |i, j| pts[j + 1][i] - pts[0][i]).determinant()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn triangle() -> SimplicialComplex {
        SimplicialComplex::from_cells(2, vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]], &[vec![0, 1, 2]])
            .unwrap()
    }

    #[test]
    fn single_triangle() {
        let c = triangle();
        assert_eq!(c.counts(), vec![3, 3, 1]);
        let d0 = c.coboundary(0);
        assert_eq!((d0.nrows(), d0.ncols()), (3, 3));
        let dd = c.coboundary(1).compose(d0);
        assert!(dd.iter().flatten().all(|&x| x == 0));
        let b = extract_boundary(&c).unwrap();
        assert_eq!(b.count(1), 3);
        assert_eq!(b.components(), 1);
    }

    #[test]
    fn fin_is_non_manifold() {
        let v = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, -1.0], vec![1.0, 1.0]];
        // edge (0,1) shared by three triangles
        let err = SimplicialComplex::from_cells(2, v, &[vec![0, 1, 2], vec![0, 1, 3], vec![0, 1, 4]]).unwrap_err();
        assert!(matches!(err, Error::NonManifold(_)), "{err}");
    }

    #[test]
    fn folded_mesh_is_rejected() {
        // Two triangles on the same side of their shared edge.
        let v = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![0.5, 2.0]];
        let err = SimplicialComplex::from_cells(2, v, &[vec![0, 1, 2], vec![0, 1, 3]]).unwrap_err();
        assert!(matches!(err, Error::NonOrientable(_)), "{err}");
    }

    #[test]
    fn degenerate_cell_is_rejected() {
        let v = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![2.0, 0.0]];
        let err = SimplicialComplex::from_cells(2, v, &[vec![0, 1, 2]]).unwrap_err();
        assert!(matches!(err, Error::DegenerateSimplex { .. }));
    }

    #[test]
    fn trace_of_constants_and_interior_support() {
        // Square split into four triangles around a center vertex.
        let v = vec![
            vec![0.0, 0.0],
            vec![1.0, 0.0],
            vec![1.0, 1.0],
            vec![0.0, 1.0],
            vec![0.5, 0.5],
        ];
        let c = SimplicialComplex::from_cells(2, v, &[vec![0, 1, 4], vec![1, 2, 4], vec![2, 3, 4], vec![3, 0, 4]])
            .unwrap();
        let b = extract_boundary(&c).unwrap();
        let ones = Cochain::new(
            &c,
            &b,
            0,
            Domain::Bulk,
            Representation::Strong,
            nalgebra::DVector::from_element(5, 1.0),
        )
        .unwrap();
        let t = trace(&c, &b, &ones).unwrap();
        assert_eq!(t.coefficients, nalgebra::DVector::from_element(4, 1.0));
        let mut bump = nalgebra::DVector::zeros(5);
        bump[4] = 3.0;
        let bump = Cochain::new(&c, &b, 0, Domain::Bulk, Representation::Strong, bump).unwrap();
        assert!(trace(&c, &b, &bump).unwrap().coefficients.iter().all(|&x| x == 0.0));
        let top = Cochain::new(
            &c,
            &b,
            2,
            Domain::Bulk,
            Representation::Strong,
            nalgebra::DVector::zeros(4),
        )
        .unwrap();
        assert!(matches!(trace(&c, &b, &top), Err(Error::InvalidDegree { .. })));
    }

    #[test]
    fn outward_orientation_on_square() {
        let v = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0]];
        let c = SimplicialComplex::from_cells(2, v, &[vec![0, 1, 2], vec![0, 2, 3]]).unwrap();
        let b = extract_boundary(&c).unwrap();
        // Counterclockwise traversal: edge (0,1) runs +x along the bottom.
        let bc = b.complex();
        for (e, &o) in bc.simplices(1).iter().zip(bc.top_orientation()) {
            let (p, q) = (&bc.vertices()[e[0]], &bc.vertices()[e[1]]);
            // Outward normal n at the midpoint: ccw iff det[n, q - p] > 0.
            let mid = [(p[0] + q[0]) / 2.0 - 0.5, (p[1] + q[1]) / 2.0 - 0.5];
            let t = [q[0] - p[0], q[1] - p[1]];
            let ccw = mid[0] * t[1] - mid[1] * t[0] > 0.0;
            assert_eq!(o == 1, ccw, "edge {e:?}");
        }
    }
}
