//! Mixed boundary value problem and the boundary operators Φ and Ψ.
//!
//! For degree `k` the unknowns are the strong `(k-1)`-cochain `σ` on all
//! simplices and the interior values of the `k`-cochain `ω`; the trace of `ω`
//! is prescribed. The system solved is
//!
//! ```text
//!   -M_{k-1} σ + D_{k-1}ᵀ M_k ω        = 0      (every (k-1)-row)
//!    M_k D_{k-1} σ + D_kᵀ M_{k+1} D_k ω = 0      (interior k-rows)
//! ```
//!
//! and the flux is the second expression on boundary rows.

use nalgebra::DMatrix;
use nalgebra_sparse::CsrMatrix;

use crate::error::{Error, Result};
use crate::galerkin::GalerkinStructures;
use crate::mesh::{BoundaryComplex, Cochain, Domain, Representation, SimplicialComplex};
use crate::sparse::{spmm, SparseLu, TripletBuilder};

/// Columns solved per block of right-hand sides.
const CHUNK: usize = 64;

/// Solution of the boundary value problem for one boundary datum.
#[derive(Clone, Debug)]
pub struct HarmonicSolution {
    pub omega: Cochain,
    pub sigma: Option<Cochain>,
    pub flux: Cochain,
}

/// Matrices of Φ_k (strong k to weak, indexed by boundary k-simplices) and
/// Ψ_k (strong k to strong k-1) for every boundary degree.
#[derive(Clone, Debug)]
pub struct DtnOperators {
    pub n: usize,
    pub phi: Vec<DMatrix<f64>>,
    pub psi: Vec<DMatrix<f64>>,
}

/// Factored system for one degree, reusable across boundary data.
#[derive(Debug)]
pub struct BvpSystem {
    k: usize,
    n_sigma: usize,
    interior: Vec<usize>,
    boundary: Vec<usize>,
    /// `M_k D_{k-1}`, empty for k = 0.
    g: Option<CsrMatrix<f64>>,
    lu: SparseLu,
}

fn position_map(total: usize, keep: &[usize]) -> Vec<Option<usize>> {
    let mut map = vec![None; total];
    for (new, &old) in keep.iter().enumerate() {
        map[old] = Some(new);
    }
    map
}

impl BvpSystem {
    pub fn new(c: &SimplicialComplex, b: &BoundaryComplex, gs: &GalerkinStructures, k: usize) -> Result<Self> {
        let n = c.dim();
        if k >= n {
            return Err(Error::InvalidDegree {
                degree: k,
                msg: format!("boundary data exists only for degrees below {n}"),
            });
        }
        let interior = b.interior(c, k);
        let boundary = b.inclusion(k).to_vec();
        let nk = c.count(k);
        let omega_map = position_map(nk, &interior);
        let a = &gs.stiffness[k];
        let (n_sigma, g) = if k == 0 { (0, None) } else { (c.count(k - 1), Some(&gs.mass[k] * &gs.d[k - 1])) };
        let size = n_sigma + interior.len();
        let mut t = TripletBuilder::new(size);
        let all_sigma: Vec<Option<usize>> = (0..n_sigma).map(Some).collect();
        if let Some(g) = &g {
            t.add_block(&gs.mass[k - 1], &all_sigma, &all_sigma, 0, 0, -1.0);
            t.add_block(g, &omega_map, &all_sigma, n_sigma, 0, 1.0);
            let gt = g.transpose();
            t.add_block(&gt, &all_sigma, &omega_map, 0, n_sigma, 1.0);
        }
        t.add_block(a, &omega_map, &omega_map, n_sigma, n_sigma, 1.0);
        let lu = t.factor(&format!("harmonic extension, degree {k}"))?;
        Ok(Self {
            k,
            n_sigma,
            interior,
            boundary,
            g,
            lu,
        })
    }

    /// Solve for a block of boundary data (columns of `phi`). Returns
    /// `(omega, sigma, flux)` as column blocks.
    pub fn solve(
        &self,
        gs: &GalerkinStructures,
        phi: &DMatrix<f64>,
    ) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
        let k = self.k;
        let nk = gs.bulk_count(k);
        let cols = phi.ncols();
        let mut omega = DMatrix::zeros(nk, cols);
        let mut sigma = DMatrix::zeros(self.n_sigma, cols);
        let mut flux = DMatrix::zeros(self.boundary.len(), cols);
        let mut start = 0;
        while start < cols {
            let w = CHUNK.min(cols - start);
            let mut full = DMatrix::zeros(nk, w);
            for (bi, &gi) in self.boundary.iter().enumerate() {
                for j in 0..w {
                    full[(gi, j)] = phi[(bi, start + j)];
                }
            }
            let a_phi = spmm(&gs.stiffness[k], &full);
            let size = self.lu.size();
            let mut rhs = DMatrix::zeros(size, w);
            if let Some(g) = &self.g {
                let gt_phi = spmm(&g.transpose(), &full);
                for i in 0..self.n_sigma {
                    for j in 0..w {
                        rhs[(i, j)] = -gt_phi[(i, j)];
                    }
                }
            }
            for (p, &gi) in self.interior.iter().enumerate() {
                for j in 0..w {
                    rhs[(self.n_sigma + p, j)] = -a_phi[(gi, j)];
                }
            }
            self.lu.solve_in_place(&mut rhs);
            for (p, &gi) in self.interior.iter().enumerate() {
                for j in 0..w {
                    full[(gi, j)] = rhs[(self.n_sigma + p, j)];
                }
            }
            let s = rhs.rows(0, self.n_sigma).into_owned();
            let mut r = spmm(&gs.stiffness[k], &full);
            if let Some(g) = &self.g {
                r += spmm(g, &s);
            }
            for (bi, &gi) in self.boundary.iter().enumerate() {
                for j in 0..w {
                    flux[(bi, start + j)] = r[(gi, j)];
                }
            }
            omega.columns_mut(start, w).copy_from(&full);
            sigma.columns_mut(start, w).copy_from(&s);
            start += w;
        }
        (omega, sigma, flux)
    }
}

/// Solve the boundary value problem for a single strong boundary datum.
pub fn solve_bvp(
    c: &SimplicialComplex,
    b: &BoundaryComplex,
    gs: &GalerkinStructures,
    k: usize,
    phi: &Cochain,
) -> Result<HarmonicSolution> {
    if phi.domain != Domain::Boundary || phi.representation != Representation::Strong || phi.degree != k {
        return Err(Error::Shape(format!("expected a strong boundary {k}-cochain")));
    }
    if phi.coefficients.len() != b.count(k) {
        return Err(Error::Shape("boundary datum has the wrong length".into()));
    }
    let sys = BvpSystem::new(c, b, gs, k)?;
    let data = DMatrix::from_column_slice(phi.coefficients.len(), 1, phi.coefficients.as_slice());
    let (omega, sigma, flux) = sys.solve(gs, &data);
    let omega = Cochain::new(c, b, k, Domain::Bulk, Representation::Strong, omega.column(0).into_owned())?;
    let sigma = if k == 0 {
        None
    } else {
        Some(Cochain::new(c, b, k - 1, Domain::Bulk, Representation::Strong, sigma.column(0).into_owned())?)
    };
    let flux = Cochain::new(c, b, k, Domain::Boundary, Representation::Weak, flux.column(0).into_owned())?;
    Ok(HarmonicSolution { omega, sigma, flux })
}

/// Φ_k and Ψ_k by solving with every boundary basis cochain.
pub fn assemble_phi_psi(
    c: &SimplicialComplex,
    b: &BoundaryComplex,
    gs: &GalerkinStructures,
    k: usize,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let sys = BvpSystem::new(c, b, gs, k)?;
    let nb = b.count(k);
    let (_, sigma, flux) = sys.solve(gs, &DMatrix::identity(nb, nb));
    let psi = if k == 0 {
        DMatrix::zeros(0, nb)
    } else {
        let inc = b.inclusion(k - 1);
        DMatrix::from_fn(inc.len(), nb, |i, j| sigma[(inc[i], j)])
    };
    Ok((flux, psi))
}

pub fn assemble_dtn(c: &SimplicialComplex, b: &BoundaryComplex, gs: &GalerkinStructures) -> Result<DtnOperators> {
    let n = c.dim();
    let mut phi = Vec::with_capacity(n);
    let mut psi = Vec::with_capacity(n);
    for k in 0..n {
        let (f, p) = assemble_phi_psi(c, b, gs, k)?;
        phi.push(f);
        psi.push(p);
    }
    Ok(DtnOperators { n, phi, psi })
}

/// Flux matrix of the alternative problem in which `i*δω = 0` is imposed in
/// place of `i*⋆ω = 0`.
///
/// The system is singular exactly along harmonic fields with vanishing
/// trace, which do not change the flux; it is solved with a small shift on
/// the `ω` block followed by refinement against the unshifted matrix.
pub fn direct_lambda(
    c: &SimplicialComplex,
    b: &BoundaryComplex,
    gs: &GalerkinStructures,
    k: usize,
) -> Result<DMatrix<f64>> {
    let n = c.dim();
    if k >= n {
        return Err(Error::InvalidDegree {
            degree: k,
            msg: "no boundary data".into(),
        });
    }
    if k == 0 {
        return Ok(assemble_phi_psi(c, b, gs, 0)?.0);
    }
    let nk = c.count(k);
    let interior = b.interior(c, k);
    let boundary = b.inclusion(k).to_vec();
    let s_int = b.interior(c, k - 1);
    let omega_map = position_map(nk, &interior);
    let sigma_map = position_map(c.count(k - 1), &s_int);
    let ns = s_int.len();
    let size = ns + interior.len();
    let g = &gs.mass[k] * &gs.d[k - 1];
    let gt = g.transpose();
    let build = |shift: f64| {
        let mut t = TripletBuilder::new(size);
        t.add_block(&gs.mass[k - 1], &sigma_map, &sigma_map, 0, 0, -1.0);
        t.add_block(&g, &omega_map, &sigma_map, ns, 0, 1.0);
        t.add_block(&gt, &sigma_map, &omega_map, 0, ns, 1.0);
        t.add_block(&gs.stiffness[k], &omega_map, &omega_map, ns, ns, 1.0);
        if shift != 0.0 {
            t.add_block(&gs.mass[k], &omega_map, &omega_map, ns, ns, shift);
        }
        t
    };
    let apply = |x: &DMatrix<f64>| -> DMatrix<f64> {
        // Unshifted operator applied blockwise.
        let mut full_s = DMatrix::zeros(c.count(k - 1), x.ncols());
        for (p, &gi) in s_int.iter().enumerate() {
            full_s.row_mut(gi).copy_from(&x.row(p));
        }
        let mut full_w = DMatrix::zeros(nk, x.ncols());
        for (p, &gi) in interior.iter().enumerate() {
            full_w.row_mut(gi).copy_from(&x.row(ns + p));
        }
        let top = spmm(&gs.mass[k - 1], &full_s) * -1.0 + spmm(&gt, &full_w);
        let bot = spmm(&g, &full_s) + spmm(&gs.stiffness[k], &full_w);
        let mut out = DMatrix::zeros(size, x.ncols());
        for (p, &gi) in s_int.iter().enumerate() {
            out.row_mut(p).copy_from(&top.row(gi));
        }
        for (p, &gi) in interior.iter().enumerate() {
            out.row_mut(ns + p).copy_from(&bot.row(gi));
        }
        out
    };
    let scale = gs.stiffness[k].values().iter().fold(0.0f64, |a, v| a.max(v.abs()))
        / gs.mass[k].values().iter().fold(0.0f64, |a, v| a.max(v.abs())).max(f64::MIN_POSITIVE);
    let lu = build(1e-8 * scale).factor("direct realization, shifted")?;

    let nb = boundary.len();
    let mut flux = DMatrix::zeros(nb, nb);
    let mut start = 0;
    while start < nb {
        let w = CHUNK.min(nb - start);
        let mut full = DMatrix::zeros(nk, w);
        for j in 0..w {
            full[(boundary[start + j], j)] = 1.0;
        }
        let gt_phi = spmm(&gt, &full);
        let a_phi = spmm(&gs.stiffness[k], &full);
        let mut rhs = DMatrix::zeros(size, w);
        for (p, &gi) in s_int.iter().enumerate() {
            rhs.row_mut(p).copy_from(&(-gt_phi.row(gi)));
        }
        for (p, &gi) in interior.iter().enumerate() {
            rhs.row_mut(ns + p).copy_from(&(-a_phi.row(gi)));
        }
        let mut x = rhs.clone();
        lu.solve_in_place(&mut x);
        let bnorm = rhs.norm().max(f64::MIN_POSITIVE);
        let mut resid = f64::INFINITY;
        for _ in 0..30 {
            let mut r = &rhs - apply(&x);
            resid = r.norm() / bnorm;
            if resid < 1e-11 {
                break;
            }
            lu.solve_in_place(&mut r);
            x += r;
        }
        if resid > 1e-8 {
            return Err(Error::SingularSystem {
                context: format!("direct realization, degree {k}: residual {resid:e}"),
                condition: f64::INFINITY,
            });
        }
        let mut full_s = DMatrix::zeros(c.count(k - 1), w);
        for (p, &gi) in s_int.iter().enumerate() {
            full_s.row_mut(gi).copy_from(&x.row(p));
        }
        for (p, &gi) in interior.iter().enumerate() {
            full.row_mut(gi).copy_from(&x.row(ns + p));
        }
        let r = spmm(&g, &full_s) + spmm(&gs.stiffness[k], &full);
        for (bi, &gi) in boundary.iter().enumerate() {
            for j in 0..w {
                flux[(bi, start + j)] = r[(gi, j)];
            }
        }
        start += w;
    }
    Ok(flux)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::galerkin::assemble_galerkin;
    use crate::generators::{generate, Generator};
    use crate::mesh::extract_boundary;
    use nalgebra::DVector;

    #[test]
    fn constants_are_harmonic() {
        let (c, _) = generate(Generator::Disk2d, 3).unwrap();
        let b = extract_boundary(&c).unwrap();
        let gs = assemble_galerkin(&c, &b).unwrap();
        let phi = Cochain::new(
            &c,
            &b,
            0,
            Domain::Boundary,
            Representation::Strong,
            DVector::from_element(b.count(0), 2.5),
        )
        .unwrap();
        let sol = solve_bvp(&c, &b, &gs, 0, &phi).unwrap();
        assert!(sol.sigma.is_none());
        assert!(sol.omega.coefficients.iter().all(|&x| (x - 2.5).abs() < 1e-12));
        assert!(sol.flux.coefficients.norm() < 1e-12);
    }

    #[test]
    fn phi_is_symmetric_energy_gram() {
        let (c, _) = generate(Generator::Annulus2d, 2).unwrap();
        let b = extract_boundary(&c).unwrap();
        let gs = assemble_galerkin(&c, &b).unwrap();
        for k in 0..2 {
            let sys = BvpSystem::new(&c, &b, &gs, k).unwrap();
            let nb = b.count(k);
            let (omega, sigma, flux) = sys.solve(&gs, &DMatrix::identity(nb, nb));
            assert!((&flux - flux.transpose()).abs().max() < 1e-10 * flux.abs().max());
            // φᵢᵀ Φ φⱼ = <dωᵢ, dωⱼ> + <σᵢ, σⱼ>
            let dw = spmm(&gs.d[k], &omega);
            let mut energy = dw.transpose() * spmm(&gs.mass[k + 1], &dw);
            if k > 0 {
                energy += sigma.transpose() * spmm(&gs.mass[k - 1], &sigma);
            }
            assert!((&energy - &flux).abs().max() < 1e-9 * flux.abs().max(), "k={k}");
        }
    }

    #[test]
    fn top_degree_rejected() {
        let (c, _) = generate(Generator::Disk2d, 2).unwrap();
        let b = extract_boundary(&c).unwrap();
        let gs = assemble_galerkin(&c, &b).unwrap();
        assert!(matches!(BvpSystem::new(&c, &b, &gs, 2), Err(Error::InvalidDegree { .. })));
    }
}
