//! Cohomology dimensions read off the boundary operators by numerical rank,
//! side by side with the exact simplicial Betti numbers.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::algebra::{Calculus, DerivedOperators, Operator, Space};
use crate::dense::{containment_angle, kernel_basis, numerical_rank, spectral_norm, weighted, RankReport};
use crate::exact::Betti;

/// Rank of an annotated operator in the `L²` metrics.
pub fn operator_rank(cx: &Calculus, a: &Operator) -> RankReport {
    if a.matrix.is_empty() {
        return numerical_rank(&a.label, &a.matrix, &cx.policy);
    }
    let w = weighted(&a.matrix, cx.weight(a.output), cx.weight(a.input));
    numerical_rank(&a.label, &w, &cx.policy)
}

fn zero_map(cx: &Calculus, label: &str, input: Space, output: Space, rows: usize) -> Operator {
    Operator::new(label, input, output, DMatrix::zeros(rows, cx.count(input.index_degree(cx.m))))
}

/// Ψ_k, with Ψ_0 and Ψ_{m+1} as zero maps.
fn psi_or_zero(cx: &Calculus, k: usize) -> Option<Operator> {
    if k == 0 {
        Some(zero_map(cx, "Ψ0", Space::strong(0), Space::strong(0), 0))
    } else if k <= cx.m {
        Some(cx.psi(k))
    } else {
        None
    }
}

/// Dimension of the numerical kernel of Φ_k.
pub fn betti_from_phi(cx: &Calculus, k: usize) -> RankReport {
    operator_rank(cx, &cx.phi(k))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FredholmReport {
    pub degree: usize,
    pub kernel_dim: usize,
    pub cokernel_dim: usize,
    /// `‖Hᵀ Φ‖ / ‖Φ‖` for an orthonormal kernel basis `H`: the image paired
    /// against the kernel through the wedge product.
    pub orthogonality: f64,
}

pub fn fredholm_check(cx: &Calculus, k: usize) -> FredholmReport {
    let phi = cx.phi(k);
    let w = weighted(&phi.matrix, cx.weight(phi.output), cx.weight(phi.input));
    let (h, rep) = kernel_basis(&w, &cx.policy);
    let adj = numerical_rank("Φᵀ", &w.transpose(), &cx.policy);
    let cokernel_dim = w.nrows() - adj.rank;
    let norm = spectral_norm(&w);
    // Back to coordinates: kernel vectors are strong, images are weak.
    let hk = cx.weight(phi.input).backward() * h;
    let pair = hk.transpose() * &phi.matrix * cx.weight(phi.input).backward();
    let orthogonality = if norm == 0.0 || pair.is_empty() { 0.0 } else { spectral_norm(&pair) / norm };
    FredholmReport {
        degree: k,
        kernel_dim: rep.nullity(),
        cokernel_dim,
        orthogonality,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PsiHomology {
    pub degree: usize,
    pub dim: i64,
    pub kernel: RankReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub image: Option<RankReport>,
    /// `‖Ψ_k Ψ_{k+1}‖ / (‖Ψ_k‖ ‖Ψ_{k+1}‖)`.
    pub chain_residual: f64,
}

/// `dim ker Ψ_k - rank Ψ_{k+1}`.
pub fn psi_homology(cx: &Calculus, k: usize) -> PsiHomology {
    let pk = psi_or_zero(cx, k).expect("degree within boundary");
    let kernel = operator_rank(cx, &pk);
    let (image, chain_residual) = match psi_or_zero(cx, k + 1) {
        Some(p1) => {
            let r = operator_rank(cx, &p1);
            let res = if k == 0 {
                0.0
            } else {
                let prod = weighted(&(&pk.matrix * &p1.matrix), cx.weight(pk.output), cx.weight(p1.input));
                let scale = cx.weighted_norm(&pk) * cx.weighted_norm(&p1);
                if scale == 0.0 {
                    0.0
                } else {
                    spectral_norm(&prod) / scale
                }
            };
            (Some(r), res)
        }
        None => (None, 0.0),
    };
    let dim = kernel.nullity() as i64 - image.as_ref().map_or(0, |r| r.rank as i64);
    PsiHomology {
        degree: k,
        dim,
        kernel,
        image,
        chain_residual,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EchoReport {
    pub degree: usize,
    pub echo: i64,
    /// Largest principal angle (radians) between ker Φ_k and ker Ψ_k.
    pub containment_angle: f64,
}

pub fn echo_dimension(cx: &Calculus, k: usize, homology: &PsiHomology) -> EchoReport {
    let phi = cx.phi(k);
    let wphi = weighted(&phi.matrix, cx.weight(phi.output), cx.weight(phi.input));
    let (kphi, rep) = kernel_basis(&wphi, &cx.policy);
    let angle = if k == 0 {
        0.0
    } else {
        let psi = cx.psi(k);
        let wpsi = weighted(&psi.matrix, cx.weight(psi.output), cx.weight(psi.input));
        let (kpsi, _) = kernel_basis(&wpsi, &cx.policy);
        containment_angle(&kphi, &kpsi)
    };
    EchoReport {
        degree: k,
        echo: homology.dim - rep.nullity() as i64,
        containment_angle: angle,
    }
}

/// Relative least-squares residual of `im Ψ_k` inside `im Φ_{n-k}`.
pub fn image_containment(cx: &Calculus, k: usize) -> Option<f64> {
    if k == 0 || cx.n - k > cx.m {
        return None;
    }
    let rhs = cx.to_weak(k - 1).after(&cx.psi(k)).ok()?;
    Some(cx.image_residual(&cx.phi(cx.n - k), &rhs))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThetaKernelReport {
    /// `dim ker Θ_0 - dim ker Φ_0` with `Θ = d∂Ψd∂`, which equals `d∂Φ²` on
    /// functions.
    pub value: i64,
    pub theta_rank: RankReport,
    /// The same count through the composite `d∂ Φ C Φ`. The weak-to-strong
    /// map `C` inherits the checkerboard kernel of the mixed-degree wedge
    /// pairing on even cycles, so this can overcount.
    pub value_dphi2: i64,
    pub dphi2_rank: RankReport,
    pub phi_kernel: usize,
}

pub fn theta_kernel_check(cx: &Calculus, derived: &DerivedOperators) -> Option<ThetaKernelReport> {
    if cx.m == 0 {
        return None;
    }
    let theta_rank = operator_rank(cx, &derived.theta_strong[0]);
    let dphi2_rank = operator_rank(cx, &derived.theta[0][0]);
    let phi_kernel = betti_from_phi(cx, 0).nullity();
    Some(ThetaKernelReport {
        value: theta_rank.nullity() as i64 - phi_kernel as i64,
        theta_rank,
        value_dphi2: dphi2_rank.nullity() as i64 - phi_kernel as i64,
        dphi2_rank,
        phi_kernel,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CochainCohomology {
    pub psi_tilde: Vec<i64>,
    pub theta: Vec<i64>,
    /// `H^k(Ψ̃)` against the Ψ homology in degree `m-k`.
    pub duality_holds: bool,
    pub ambiguous: bool,
}

/// Cohomology of the cochain complexes Ψ̃ and Θ on the boundary.
pub fn theta_psitilde_cohomology(cx: &Calculus, derived: &DerivedOperators, psi_h: &[PsiHomology]) -> CochainCohomology {
    let m = cx.m;
    let mut ambiguous = false;
    let mut ranks = |ops: &[Operator]| -> Vec<RankReport> {
        ops.iter()
            .map(|o| {
                let r = operator_rank(cx, o);
                ambiguous |= r.ambiguous && r.rank > 0;
                r
            })
            .collect()
    };
    let pt = ranks(&derived.psi_tilde);
    let th = ranks(&derived.theta_strong);
    let coh = |rk: &[RankReport], size: &dyn Fn(usize) -> usize| -> Vec<i64> {
        (0..=m)
            .map(|k| {
                let ker = if k < m { rk[k].nullity() } else { size(k) };
                let im = if k >= 1 { rk[k - 1].rank } else { 0 };
                ker as i64 - im as i64
            })
            .collect()
    };
    // Weak k-forms are indexed by (m-k)-simplices.
    let psi_tilde = coh(&pt, &|k| cx.count(m - k));
    let theta = coh(&th, &|k| cx.count(k));
    let duality_holds = (0..=m).all(|k| psi_h.get(m - k).is_some_and(|h| h.dim == psi_tilde[k]));
    CochainCohomology {
        psi_tilde,
        theta,
        duality_holds,
        ambiguous,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopologyReport {
    pub betti_abs: Vec<usize>,
    pub betti_rel: Vec<usize>,
    pub dim_ker_phi: Vec<usize>,
    pub phi_ranks: Vec<RankReport>,
    pub fredholm: Vec<FredholmReport>,
    pub psi_homology: Vec<PsiHomology>,
    pub echo: Vec<EchoReport>,
    /// `(k, residual)` for each degree where both Ψ_k and Φ_{n-k} exist.
    pub image_containment: Vec<(usize, f64)>,
    pub lambda_gate: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta_kernel: Option<ThetaKernelReport>,
    pub cochain: CochainCohomology,
    /// Predictions from the exact Betti numbers.
    pub expected_psi_homology: Vec<i64>,
    pub expected_echo: Vec<i64>,
    pub expected_psi_tilde: Vec<i64>,
}

impl TopologyReport {
    pub fn betti_matches(&self) -> bool {
        self.dim_ker_phi.iter().zip(&self.betti_abs).all(|(a, b)| a == b)
    }

    pub fn any_ambiguous(&self) -> bool {
        self.phi_ranks.iter().any(|r| r.ambiguous)
            || self.psi_homology.iter().any(|h| {
                (h.kernel.ambiguous && h.kernel.rank > 0) || h.image.as_ref().is_some_and(|r| r.ambiguous && r.rank > 0)
            })
    }
}

pub fn topology_report(cx: &Calculus, derived: &DerivedOperators, betti: &Betti) -> TopologyReport {
    let m = cx.m;
    let phi_ranks: Vec<RankReport> = (0..=m).map(|k| betti_from_phi(cx, k)).collect();
    let dim_ker_phi = phi_ranks.iter().map(RankReport::nullity).collect();
    let fredholm = (0..=m).map(|k| fredholm_check(cx, k)).collect();
    let psi_h: Vec<PsiHomology> = (0..=m).map(|k| psi_homology(cx, k)).collect();
    let echo = (0..=m).map(|k| echo_dimension(cx, k, &psi_h[k])).collect();
    let image_containment = (0..=m).filter_map(|k| image_containment(cx, k).map(|r| (k, r))).collect();
    let theta_kernel = theta_kernel_check(cx, derived);
    let cochain = theta_psitilde_cohomology(cx, derived, &psi_h);
    let a = &betti.absolute;
    let r = &betti.relative;
    let n = cx.n;
    let expected_psi_homology = (0..=m).map(|k| (r[k + 1] + a[k]) as i64).collect();
    let expected_echo = (0..=m).map(|k| r[k + 1] as i64).collect();
    let expected_psi_tilde = (0..=m).map(|k| (r[n - k] + a[n - k - 1]) as i64).collect();
    TopologyReport {
        betti_abs: betti.absolute.clone(),
        betti_rel: betti.relative.clone(),
        dim_ker_phi,
        phi_ranks,
        fredholm,
        psi_homology: psi_h,
        echo,
        image_containment,
        lambda_gate: derived.lambda_gate.clone(),
        theta_kernel,
        cochain,
        expected_psi_homology,
        expected_echo,
        expected_psi_tilde,
    }
}
