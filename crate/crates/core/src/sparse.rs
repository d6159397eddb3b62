//! Sparse LU factorization on top of faer, fed from nalgebra-sparse blocks.

use faer::linalg::solvers::SolveCore;
use faer::sparse::linalg::solvers::Lu;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Conj, Mat};
use nalgebra::DMatrix;
use nalgebra_sparse::CsrMatrix;

use crate::error::{Error, Result};

/// Accumulates triplets of a square block system.
#[derive(Debug, Default)]
pub struct TripletBuilder {
    size: usize,
    entries: Vec<Triplet<usize, usize, f64>>,
}

impl TripletBuilder {
    pub fn new(size: usize) -> Self {
        Self {
            size,
            entries: Vec::new(),
        }
    }

    pub fn push(&mut self, r: usize, c: usize, v: f64) {
        if v != 0.0 {
            self.entries.push(Triplet::new(r, c, v));
        }
    }

    /// Add `scale * a[rows, cols]` at block offset `(r0, c0)`. `rows` and
    /// `cols` map old indices to new positions (`None` drops them).
    pub fn add_block(
        &mut self,
        a: &CsrMatrix<f64>,
        rows: &[Option<usize>],
        cols: &[Option<usize>],
        r0: usize,
        c0: usize,
        scale: f64,
    ) {
        for (r, row) in a.row_iter().enumerate() {
            let Some(nr) = rows[r] else { continue };
            for (&c, &v) in row.col_indices().iter().zip(row.values()) {
                if let Some(nc) = cols[c] {
                    self.push(r0 + nr, c0 + nc, scale * v);
                }
            }
        }
    }

    pub fn factor(self, context: &str) -> Result<SparseLu> {
        let a = SparseColMat::<usize, f64>::try_new_from_triplets(self.size, self.size, &self.entries)
            .map_err(|e| Error::SingularSystem {
                context: format!("{context}: {e:?}"),
                condition: f64::NAN,
            })?;
        SparseLu::from_faer(a, context)
    }
}

/// Reusable LU factorization of a square sparse matrix.
pub struct SparseLu {
    size: usize,
    a: SparseColMat<usize, f64>,
    lu: Lu<usize, f64>,
}

impl std::fmt::Debug for SparseLu {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "SparseLu({})", self.size)
    }
}

impl SparseLu {
    pub fn new(a: &CsrMatrix<f64>, context: &str) -> Result<Self> {
        assert_eq!(a.nrows(), a.ncols());
        let mut b = TripletBuilder::new(a.nrows());
        let ident: Vec<Option<usize>> = (0..a.nrows()).map(Some).collect();
        b.add_block(a, &ident, &ident, 0, 0, 1.0);
        b.factor(context)
    }

    fn from_faer(a: SparseColMat<usize, f64>, context: &str) -> Result<Self> {
        let size = a.nrows();
        let lu = a.sp_lu().map_err(|e| Error::SingularSystem {
            context: format!("{context}: {e:?}"),
            condition: f64::INFINITY,
        })?;
        let out = Self { size, a, lu };
        out.check(context)?;
        Ok(out)
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Reject factorizations whose solves are not trustworthy, by solving a
    /// system with a known right-hand side.
    fn check(&self, context: &str) -> Result<()> {
        if self.size == 0 {
            return Ok(());
        }
        let x0 = DMatrix::from_fn(self.size, 1, |i, _| 1.0 + ((i * 7919) % 13) as f64 / 13.0);
        let mut b = self.apply(&x0);
        self.solve_in_place(&mut b);
        let err = (&b - &x0).norm() / x0.norm();
        if !err.is_finite() || err > 1e-6 {
            return Err(Error::SingularSystem {
                context: context.to_string(),
                condition: if err.is_finite() { err / f64::EPSILON } else { f64::INFINITY },
            });
        }
        Ok(())
    }

    /// `A x` with the factored matrix.
    pub fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.size, x.ncols());
        let sym = self.a.symbolic();
        let vals = self.a.val();
        for j in 0..self.size {
            let range = sym.col_range(j);
            for (idx, &i) in sym.row_idx()[range.clone()].iter().enumerate() {
                let v = vals[range.start + idx];
                for c in 0..x.ncols() {
                    out[(i, c)] += v * x[(j, c)];
                }
            }
        }
        out
    }

    /// Overwrite `rhs` with `A^{-1} rhs`, with one step of iterative
    /// refinement.
    pub fn solve_in_place(&self, rhs: &mut DMatrix<f64>) {
        if self.size == 0 || rhs.ncols() == 0 {
            return;
        }
        let b = rhs.clone();
        self.raw_solve(rhs);
        let mut r = &b - self.apply(rhs);
        self.raw_solve(&mut r);
        *rhs += r;
    }

    fn raw_solve(&self, rhs: &mut DMatrix<f64>) {
        let mut m = Mat::<f64>::from_fn(rhs.nrows(), rhs.ncols(), |i, j| rhs[(i, j)]);
        self.lu.solve_in_place_with_conj(Conj::No, m.as_mut());
        for j in 0..rhs.ncols() {
            for i in 0..rhs.nrows() {
                rhs[(i, j)] = m[(i, j)];
            }
        }
    }
}

/// Dense product `a * x` for sparse `a`.
pub fn spmm(a: &CsrMatrix<f64>, x: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(a.nrows(), x.ncols());
    for (r, row) in a.row_iter().enumerate() {
        for (&c, &v) in row.col_indices().iter().zip(row.values()) {
            for j in 0..x.ncols() {
                out[(r, j)] += v * x[(c, j)];
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra_sparse::CooMatrix;

    #[test]
    fn solves_small_system() {
        let mut coo = CooMatrix::new(3, 3);
        for (r, c, v) in [(0, 0, 4.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 3.0), (2, 2, 2.0), (2, 0, -1.0)] {
            coo.push(r, c, v);
        }
        let a = CsrMatrix::from(&coo);
        let lu = SparseLu::new(&a, "test").unwrap();
        let x0 = DMatrix::from_column_slice(3, 2, &[1.0, -2.0, 0.5, 0.0, 1.0, 3.0]);
        let mut b = spmm(&a, &x0);
        lu.solve_in_place(&mut b);
        assert!((b - x0).norm() < 1e-13);
    }

    #[test]
    fn singular_is_reported() {
        let mut coo = CooMatrix::new(2, 2);
        coo.push(0, 0, 1.0);
        coo.push(1, 0, 1.0);
        let a = CsrMatrix::from(&coo);
        assert!(matches!(SparseLu::new(&a, "s"), Err(Error::SingularSystem { .. })));
    }
}
