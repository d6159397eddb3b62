//! Whitney-form mass matrices, stiffness blocks and boundary wedge pairings.
//!
//! Every integral is evaluated in closed form from barycentric coordinates,
//! so no quadrature is involved.

use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::{CooMatrix, CsrMatrix};

use crate::error::{Error, Result};
use crate::mesh::{factorial, subsets, BoundaryComplex, Cochain, Domain, Incidence, Representation, SimplicialComplex};

/// Metric and pairing matrices for a mesh and its boundary.
#[derive(Clone, Debug)]
pub struct GalerkinStructures {
    pub n: usize,
    /// Bulk Whitney mass matrices, degrees `0..=n`.
    pub mass: Vec<CsrMatrix<f64>>,
    /// Bulk coboundaries as real sparse matrices, degrees `0..n`.
    pub d: Vec<CsrMatrix<f64>>,
    /// `D_k^T M_{k+1} D_k`, degrees `0..n`.
    pub stiffness: Vec<CsrMatrix<f64>>,
    /// Boundary mass matrices, degrees `0..n`.
    pub bmass: Vec<DMatrix<f64>>,
    /// Boundary coboundaries, degrees `0..n-1`.
    pub bd: Vec<DMatrix<f64>>,
    /// `wedge[j][e, f] = ∫ w_e ∧ w_f` for boundary `j`-simplex `e` and
    /// `(n-1-j)`-simplex `f`.
    pub wedge: Vec<DMatrix<f64>>,
}

pub fn incidence_to_csr(d: &Incidence) -> CsrMatrix<f64> {
    let mut coo = CooMatrix::new(d.nrows(), d.ncols());
    for (r, row) in d.rows().iter().enumerate() {
        for &(c, s) in row {
            coo.push(r, c, f64::from(s));
        }
    }
    CsrMatrix::from(&coo)
}

/// Volume and the matrix of gradient inner products `<∇λ_i, ∇λ_j>` of a
/// simplex whose vertices are given (possibly embedded in higher dimension).
pub fn barycentric_gram(pts: &[&[f64]]) -> (f64, DMatrix<f64>) {
    let m = pts.len() - 1;
    if m == 0 {
        return (1.0, DMatrix::zeros(1, 1));
    }
    let amb = pts[0].len();
    let e = DMatrix::from_fn(amb, m, |i, j| pts[j + 1][i] - pts[0][i]);
    let g = e.transpose() * &e;
    let det = g.determinant();
    let vol = det.max(0.0).sqrt() / factorial(m);
    let ginv = g.try_inverse().unwrap_or_else(|| DMatrix::from_element(m, m, f64::NAN));
    // ∇λ_0 = -Σ ∇λ_i.
    let mut p = DMatrix::zeros(m + 1, m);
    for j in 0..m {
        p[(0, j)] = -1.0;
        p[(j + 1, j)] = 1.0;
    }
    (vol, &p * ginv * p.transpose())
}

fn lambda_product(vol: f64, m: usize, a: usize, b: usize) -> f64 {
    let f = if a == b { 2.0 } else { 1.0 };
    vol * f / (((m + 1) * (m + 2)) as f64)
}

fn minor(g: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> f64 {
    if rows.is_empty() {
        return 1.0;
    }
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| g[(rows[i], cols[j])]).determinant()
}

fn without(s: &[usize], i: usize) -> Vec<usize> {
    let mut v = s.to_vec();
    v.remove(i);
    v
}

/// Local Whitney `k`-form mass matrix on one simplex, over its `k`-faces in
/// lexicographic order of local vertex positions.
pub fn local_mass(pts: &[&[f64]], k: usize) -> (Vec<Vec<usize>>, DMatrix<f64>) {
    let m = pts.len() - 1;
    let (vol, g) = barycentric_gram(pts);
    let local: Vec<usize> = (0..=m).collect();
    let faces = subsets(&local, k + 1);
    let kf = factorial(k);
    let mut out = DMatrix::zeros(faces.len(), faces.len());
    for (a, s) in faces.iter().enumerate() {
        for (b, t) in faces.iter().enumerate().skip(a) {
            let mut acc = 0.0;
            for i in 0..=k {
                let si = without(s, i);
                for j in 0..=k {
                    let tj = without(t, j);
                    let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
                    acc += sign * lambda_product(vol, m, s[i], t[j]) * minor(&g, &si, &tj);
                }
            }
            out[(a, b)] = kf * kf * acc;
            out[(b, a)] = out[(a, b)];
        }
    }
    (faces, out)
}

fn inversions(v: &[usize]) -> usize {
    let mut c = 0;
    for i in 0..v.len() {
        for j in i + 1..v.len() {
            if v[i] > v[j] {
                c += 1;
            }
        }
    }
    c
}

/// Local wedge pairing `∫_T w_e ∧ w_f` on an `m`-simplex with the sorted
/// vertex orientation, `e` ranging over `j`-faces and `f` over `(m-j)`-faces.
pub fn local_wedge(m: usize, j: usize) -> (Vec<Vec<usize>>, Vec<Vec<usize>>, DMatrix<f64>) {
    let local: Vec<usize> = (0..=m).collect();
    let ef = subsets(&local, j + 1);
    let ff = subsets(&local, m - j + 1);
    let coef = factorial(j) * factorial(m - j) / factorial(m);
    let mut out = DMatrix::zeros(ef.len(), ff.len());
    for (r, e) in ef.iter().enumerate() {
        for (c, f) in ff.iter().enumerate() {
            let mut acc = 0.0;
            for a in 0..=j {
                let s = without(e, a);
                for b in 0..=(m - j) {
                    let t = without(f, b);
                    let mut joined = s.clone();
                    joined.extend(&t);
                    let mut sorted = joined.clone();
                    sorted.sort_unstable();
                    if sorted.windows(2).any(|w| w[0] == w[1]) {
                        continue;
                    }
                    let missing = (0..=m).find(|v| !sorted.contains(v)).expect("one vertex missing");
                    let sign = if (a + b + inversions(&joined) + missing).is_multiple_of(2) { 1.0 } else { -1.0 };
                    let p = if e[a] == f[b] { 2.0 } else { 1.0 } / (((m + 1) * (m + 2)) as f64);
                    acc += sign * p;
                }
            }
            out[(r, c)] = coef * acc;
        }
    }
    (ef, ff, out)
}

fn assemble_mass_entries(c: &SimplicialComplex, k: usize, mut push: impl FnMut(usize, usize, f64)) -> Result<()> {
    let top = c.dim();
    for (ci, cell) in c.simplices(top).iter().enumerate() {
        let pts = c.points(cell);
        let (faces, local) = local_mass(&pts, k);
        if !local.iter().all(|x| x.is_finite()) {
            return Err(Error::DegenerateSimplex {
                degree: top,
                index: ci,
                volume: 0.0,
            });
        }
        let global: Vec<usize> = faces
            .iter()
            .map(|f| {
                let s: Vec<usize> = f.iter().map(|&i| cell[i]).collect();
                c.index_of(k, &s).expect("face of cell")
            })
            .collect();
        for (a, &ga) in global.iter().enumerate() {
            for (b, &gb) in global.iter().enumerate() {
                push(ga, gb, local[(a, b)]);
            }
        }
    }
    Ok(())
}

pub fn sparse_mass(c: &SimplicialComplex, k: usize) -> Result<CsrMatrix<f64>> {
    let n = c.count(k);
    let mut coo = CooMatrix::new(n, n);
    assemble_mass_entries(c, k, |i, j, v| coo.push(i, j, v))?;
    Ok(CsrMatrix::from(&coo))
}

pub fn dense_mass(c: &SimplicialComplex, k: usize) -> Result<DMatrix<f64>> {
    let n = c.count(k);
    let mut m = DMatrix::zeros(n, n);
    assemble_mass_entries(c, k, |i, j, v| m[(i, j)] += v)?;
    Ok(m)
}

/// Wedge pairing matrix of boundary degree `j` with `(m-j)`, using the
/// outward-normal orientation of each boundary top simplex.
pub fn wedge_matrix(b: &SimplicialComplex, j: usize) -> DMatrix<f64> {
    let m = b.dim();
    let (ef, ff, local) = local_wedge(m, j);
    let mut w = DMatrix::zeros(b.count(j), b.count(m - j));
    for (cell, &o) in b.simplices(m).iter().zip(b.top_orientation()) {
        let ge: Vec<usize> = ef
            .iter()
            .map(|f| b.index_of(j, &f.iter().map(|&i| cell[i]).collect::<Vec<_>>()).unwrap())
            .collect();
        let gf: Vec<usize> = ff
            .iter()
            .map(|f| b.index_of(m - j, &f.iter().map(|&i| cell[i]).collect::<Vec<_>>()).unwrap())
            .collect();
        for (r, &gr) in ge.iter().enumerate() {
            for (s, &gs) in gf.iter().enumerate() {
                w[(gr, gs)] += f64::from(o) * local[(r, s)];
            }
        }
    }
    w
}

pub fn assemble_galerkin(c: &SimplicialComplex, b: &BoundaryComplex) -> Result<GalerkinStructures> {
    let n = c.dim();
    let m = n - 1;
    let mass = (0..=n).map(|k| sparse_mass(c, k)).collect::<Result<Vec<_>>>()?;
    let d: Vec<CsrMatrix<f64>> = (0..n).map(|k| incidence_to_csr(c.coboundary(k))).collect();
    let stiffness = (0..n)
        .map(|k| {
            let md = &mass[k + 1] * &d[k];
            &d[k].transpose() * &md
        })
        .collect();
    let bc = b.complex();
    let bmass = (0..=m).map(|k| dense_mass(bc, k)).collect::<Result<Vec<_>>>()?;
    let bd = (0..m).map(|k| bc.coboundary(k).to_dense()).collect();
    let wedge = (0..=m).map(|j| wedge_matrix(bc, j)).collect();
    Ok(GalerkinStructures {
        n,
        mass,
        d,
        stiffness,
        bmass,
        bd,
        wedge,
    })
}

impl GalerkinStructures {
    pub fn m(&self) -> usize {
        self.n - 1
    }

    pub fn bulk_count(&self, k: usize) -> usize {
        self.mass[k].nrows()
    }

    pub fn boundary_count(&self, k: usize) -> usize {
        self.bmass[k].nrows()
    }

    /// Weak-to-strong conversion on the boundary for a weak `j`-form
    /// (a functional over `(m-j)`-simplices).
    ///
    /// The functional is first read as an `L²` pairing, which yields the
    /// Hodge dual, and the wedge matrix maps it back.
    pub fn boundary_weak_to_strong_matrix(&self, j: usize) -> DMatrix<f64> {
        let m = self.m();
        let inv_outer = cholesky_inverse(&self.bmass[j]);
        let inv_inner = cholesky_inverse(&self.bmass[m - j]);
        inv_outer * self.wedge[m - j].transpose() * inv_inner
    }
}

pub(crate) fn cholesky_inverse(a: &DMatrix<f64>) -> DMatrix<f64> {
    if a.nrows() == 0 {
        return a.clone();
    }
    nalgebra::Cholesky::new(a.clone())
        .map(|c| c.inverse())
        .unwrap_or_else(|| a.clone().pseudo_inverse(1e-14).expect("pseudo inverse"))
}

/// `r = D_{k-1}^T M_k ω`, the functional whose mass-solve is `δω`.
pub fn weak_codifferential(gs: &GalerkinStructures, omega: &Cochain) -> Result<Cochain> {
    if omega.degree == 0 {
        return Err(Error::InvalidDegree {
            degree: 0,
            msg: "the codifferential of a 0-form is not a cochain".into(),
        });
    }
    if omega.domain != Domain::Bulk || omega.representation != Representation::Strong {
        return Err(Error::Shape("weak codifferential expects a strong bulk cochain".into()));
    }
    let k = omega.degree;
    let mw = &gs.mass[k] * &omega.coefficients;
    let r = &gs.d[k - 1].transpose() * &mw;
    Ok(Cochain {
        degree: k - 1,
        domain: Domain::Bulk,
        representation: Representation::Weak,
        coefficients: r,
    })
}

/// Solve `mass · x = r` for the matching degree and domain.
pub fn weak_to_strong(gs: &GalerkinStructures, r: &Cochain) -> Result<Cochain> {
    if r.representation != Representation::Weak {
        return Err(Error::Shape("input is already strong".into()));
    }
    let k = r.degree;
    let x = match r.domain {
        Domain::Boundary => {
            let b = gs.bmass.get(k).ok_or_else(|| Error::InvalidDegree {
                degree: k,
                msg: "no boundary mass matrix".into(),
            })?;
            let chol = nalgebra::Cholesky::new(b.clone()).ok_or_else(|| Error::SingularSystem {
                context: format!("boundary mass {k}"),
                condition: f64::INFINITY,
            })?;
            chol.solve(&r.coefficients)
        }
        Domain::Bulk => {
            let m = gs.mass.get(k).ok_or_else(|| Error::InvalidDegree {
                degree: k,
                msg: "no bulk mass matrix".into(),
            })?;
            let lu = crate::sparse::SparseLu::new(m, &format!("bulk mass {k}"))?;
            let mut rhs = DMatrix::from_column_slice(r.coefficients.len(), 1, r.coefficients.as_slice());
            lu.solve_in_place(&mut rhs);
            DVector::from_column_slice(rhs.as_slice())
        }
    };
    Ok(Cochain {
        degree: k,
        domain: r.domain,
        representation: Representation::Strong,
        coefficients: x,
    })
}
