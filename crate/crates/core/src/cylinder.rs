//! Closed-form Φ, Ψ, Λ on the flat cylinder `S¹ × [0, L]`, one Fourier mode
//! at a time, and the classical Dirichlet-to-Neumann eigenvalues of the disk.
//!
//! Conventions: volume form `dt ∧ dθ`; circle 0 sits at `t = 0`, circle 1 at
//! `t = L`; boundary circles are oriented outward-normal-first, so `⋆∂` is
//! `-1` on circle 0 and `+1` on circle 1. Boundary 1-forms are stored by
//! their `dθ` coefficient. For `m ≥ 1` the mode basis is
//! `[cos on c0, cos on c1, sin on c0, sin on c1]`; for `m = 0` it is
//! `[c0, c1]`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dense::{numerical_rank, spectral_norm, truncated_pinv, RankPolicy};

fn pow(e: usize) -> f64 {
    if e.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// Operators of one mode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeBlock {
    pub mode: usize,
    pub length: f64,
    /// Boundary d on 0-forms.
    pub d: DMatrix<f64>,
    /// Boundary Hodge star, in either degree.
    pub star: DMatrix<f64>,
    pub phi: [DMatrix<f64>; 2],
    pub psi: [DMatrix<f64>; 2],
    pub lambda: [DMatrix<f64>; 2],
    /// Size of the terms summed into each Λ, for roundoff-relative scales.
    pub lambda_scale: [f64; 2],
    /// `L²` Gram matrix of the mode basis.
    pub gram: DMatrix<f64>,
}

impl ModeBlock {
    pub fn dim(&self) -> usize {
        self.d.nrows()
    }
}

/// Per-parity block of Φ on the two circles.
fn phi_pair(m: usize, l: f64) -> DMatrix<f64> {
    if m == 0 {
        return DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, -1.0, 1.0]) / l;
    }
    let x = m as f64 * l;
    let mf = m as f64;
    // coth and csch computed from e^{-2x} to stay finite for large x.
    let q = (-2.0 * x).exp();
    let coth = (1.0 + q) / (1.0 - q);
    let csch = 2.0 * (-x).exp() / (1.0 - q);
    DMatrix::from_row_slice(2, 2, &[-mf * coth, mf * csch, -mf * csch, mf * coth])
}

pub fn mode_solve(m: usize, l: f64) -> ModeBlock {
    let dim = if m == 0 { 2 } else { 4 };
    let mut d = DMatrix::zeros(dim, dim);
    let mut star = DMatrix::zeros(dim, dim);
    for i in 0..dim {
        star[(i, i)] = if i % 2 == 0 { -1.0 } else { 1.0 };
    }
    let pair = phi_pair(m, l);
    let mut phi = DMatrix::zeros(dim, dim);
    phi.view_mut((0, 0), (2, 2)).copy_from(&pair);
    if m > 0 {
        phi.view_mut((2, 2), (2, 2)).copy_from(&pair);
        let mf = m as f64;
        for c in 0..2 {
            // d(cos mθ) = -m sin mθ dθ, d(sin mθ) = m cos mθ dθ
            d[(2 + c, c)] = -mf;
            d[(c, 2 + c)] = mf;
        }
    }
    // i*δω = -∂θ φ for the 1-form φ dθ; Ψ vanishes on functions.
    let psi1 = -&d;
    let psi0 = DMatrix::zeros(dim, dim);
    let n = 2;
    // Λ_1 = Φ_1 + s Ψ_1 Φ_1⁺ Ψ_1 with s = (-1)^(n(n-1)+1+1).
    let s = pow(n * (n - 1) + 2);
    let pinv = truncated_pinv(&phi, &RankPolicy::default());
    let tail = &psi1 * pinv * &psi1 * s;
    let lambda_scale = [spectral_norm(&phi), spectral_norm(&phi) + spectral_norm(&tail)];
    let lambda1 = &phi + tail;
    let gram = DMatrix::identity(dim, dim) * if m == 0 { 2.0 * std::f64::consts::PI } else { std::f64::consts::PI };
    ModeBlock {
        mode: m,
        length: l,
        d,
        star,
        phi: [phi.clone(), phi.clone()],
        psi: [psi0, psi1],
        lambda: [phi, lambda1],
        lambda_scale,
        gram,
    }
}

/// Classical Dirichlet-to-Neumann eigenvalue of `e^{imθ}` on the unit disk.
pub fn disk_dtn_mode(m: i64) -> f64 {
    m.unsigned_abs() as f64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleIdentity {
    pub name: String,
    pub degree: usize,
    pub mode: usize,
    pub residual: f64,
}

fn rel(lhs: &DMatrix<f64>, rhs: &DMatrix<f64>) -> f64 {
    let num = spectral_norm(&(lhs - rhs));
    if num == 0.0 {
        return 0.0;
    }
    num / (spectral_norm(lhs) + spectral_norm(rhs))
}

fn zero_rel(lhs: &DMatrix<f64>, scale: f64) -> f64 {
    let num = spectral_norm(lhs);
    if num == 0.0 {
        0.0
    } else {
        num / scale
    }
}

/// Every identity, per mode and degree, as exact small-matrix algebra.
pub fn mode_identities(b: &ModeBlock) -> Vec<OracleIdentity> {
    let n = 2usize;
    let m = b.mode;
    let mut out = Vec::new();
    let mut push = |name: &str, k: usize, r: f64| {
        out.push(OracleIdentity {
            name: name.into(),
            degree: k,
            mode: m,
            residual: r,
        })
    };
    let (d, e) = (&b.d, &b.star);
    let [phi0, phi1] = &b.phi;
    let psi1 = &b.psi[1];
    let [l0, l1] = &b.lambda;
    let nphi = spectral_norm(phi0);
    let npsi = spectral_norm(psi1);
    let nd = spectral_norm(d);
    let zero = DMatrix::<f64>::zeros(b.dim(), b.dim());
    // ΦΨ = (-1)^k d∂Φ; at k = 0 both sides vanish (Ψ_0 = 0, d∂ of a top form).
    push("phi_psi", 0, 0.0);
    push("phi_psi", 1, rel(&(phi0 * psi1), &(d * phi1 * pow(1))));
    // Ψ² = 0: only Ψ_0Ψ_1 exists.
    push("psi_psi", 1, zero_rel(&(&b.psi[0] * psi1), (npsi * npsi).max(f64::MIN_POSITIVE)));
    // ΨΦ = (-1)^(k+1) Φd∂; at k = 1 both sides vanish.
    push("psi_phi", 0, rel(&(psi1 * phi0), &(phi1 * d * pow(1))));
    push("psi_phi", 1, 0.0);
    // Φ² = (-1)^(kn) (d∂Ψ + Ψd∂)
    push("phi_phi", 0, rel(&(phi1 * phi0), &(psi1 * d * pow(0))));
    push("phi_phi", 1, rel(&(phi0 * phi1), &(d * psi1 * pow(n))));
    // Λd∂ = 0, d∂Λ = 0, Λ² = 0
    let [s0, s1] = b.lambda_scale;
    let guard = |x: f64| x.max(f64::MIN_POSITIVE);
    push("lambda_d", 0, zero_rel(&(l1 * d), guard(s1 * nd)));
    push("d_lambda", 1, zero_rel(&(d * l1), guard(nd * s1)));
    push("lambda_lambda", 0, zero_rel(&(l1 * l0), guard(s1 * s0)));
    push("lambda_lambda", 1, zero_rel(&(l0 * l1), guard(s0 * s1)));
    // Ψ̃_0 = (-1)^((k+1)(n-1)) ⋆Ψ_1⋆; Ψ̃_1 = ±⋆Ψ_0⋆ = 0.
    let pt0 = e * psi1 * e * pow(n - 1);
    let pt1 = e * &b.psi[0] * e;
    push("psi_tilde_adjoint", 0, rel(&(&b.gram * &pt0), &(psi1.transpose() * &b.gram)));
    push("psi_tilde_squared", 0, zero_rel(&(&pt1 * &pt0), guard(npsi * npsi)));
    // Θ_0 three ways.
    let ta = d * phi1 * phi0 * pow(0);
    let tb = phi0 * phi1 * d * pow(n);
    let tc = d * psi1 * d;
    push("theta_a_b", 0, rel(&ta, &tb));
    push("theta_a_c", 0, rel(&ta, &tc));
    push("theta_b_c", 0, rel(&tb, &tc));
    let _ = (zero, nphi);
    out
}

/// Adjointness residual with the sign as printed, `(-1)^(k(n-1))`.
pub fn printed_psi_tilde_residual(b: &ModeBlock) -> f64 {
    let pt0 = &b.star * &b.psi[1] * &b.star;
    rel(&(&b.gram * &pt0), &(b.psi[1].transpose() * &b.gram))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeAccounting {
    pub ker_phi: [usize; 2],
    pub psi_homology: [i64; 2],
}

/// Kernel dimensions of Φ and Ψ homology summed over modes `0..=m_max`.
/// Each `m ≥ 1` mode carries the cos and sin parities together.
pub fn mode_accounting(l: f64, m_max: usize) -> ModeAccounting {
    let policy = RankPolicy::default();
    let mut ker_phi = [0usize; 2];
    let mut h = [0i64; 2];
    for m in 0..=m_max {
        let b = mode_solve(m, l);
        for (kp, phi) in ker_phi.iter_mut().zip(&b.phi) {
            *kp += numerical_rank("Φ", phi, &policy).nullity();
        }
        let dim = b.dim() as i64;
        let rank_psi1 = numerical_rank("Ψ1", &b.psi[1], &policy).rank as i64;
        // H_0 = ker Ψ_0 - im Ψ_1 with Ψ_0 = 0; H_1 = ker Ψ_1.
        h[0] += dim - rank_psi1;
        h[1] += dim - rank_psi1;
    }
    ModeAccounting {
        ker_phi,
        psi_homology: h,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Symmetry {
    pub mode: usize,
    /// `‖SΦS + Φ‖`: reflection `t ↦ L - t` reverses the normal.
    pub phi: f64,
    /// `‖SΨS - Ψ‖`.
    pub psi: f64,
    /// Cross-circle Φ entry relative to the same-circle entry.
    pub cross_ratio: f64,
    /// `2 e^{-mL}`.
    pub cross_bound: f64,
}

pub fn reflection_check(b: &ModeBlock) -> Symmetry {
    let dim = b.dim();
    let mut s = DMatrix::zeros(dim, dim);
    for i in (0..dim).step_by(2) {
        s[(i, i + 1)] = 1.0;
        s[(i + 1, i)] = 1.0;
    }
    let phi = &b.phi[0];
    let cross_ratio = if b.mode == 0 { 1.0 } else { (phi[(0, 1)] / phi[(0, 0)]).abs() };
    Symmetry {
        mode: b.mode,
        phi: (&s * phi * &s + phi).norm(),
        psi: (&s * &b.psi[1] * &s - &b.psi[1]).norm(),
        cross_ratio,
        cross_bound: 2.0 * (-(b.mode as f64) * b.length).exp(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub length: f64,
    pub m_max: usize,
    pub identities: Vec<OracleIdentity>,
    pub max_residual: f64,
    pub accounting: ModeAccounting,
    pub symmetry: Vec<Symmetry>,
    pub printed_psi_tilde_residual: f64,
    pub affine_mode: ModeBlock,
}

pub fn oracle_identity_suite(l: f64, m_max: usize) -> OracleReport {
    let mut identities = Vec::new();
    let mut symmetry = Vec::new();
    let mut printed: f64 = 0.0;
    for m in 0..=m_max {
        let b = mode_solve(m, l);
        identities.extend(mode_identities(&b));
        symmetry.push(reflection_check(&b));
        if m > 0 {
            printed = printed.max(printed_psi_tilde_residual(&b));
        }
    }
    let max_residual = identities.iter().map(|i| i.residual).fold(0.0, f64::max);
    OracleReport {
        length: l,
        m_max,
        identities,
        max_residual,
        accounting: mode_accounting(l, m_max),
        symmetry,
        printed_psi_tilde_residual: printed,
        affine_mode: mode_solve(0, l),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;

    #[test]
    fn affine_mode() {
        let l = 2.0;
        let b = mode_solve(0, l);
        let (c1, c2) = (0.5, 3.0);
        let out = &b.phi[0] * DVector::from_vec(vec![c1, c2]);
        // dθ coefficients; as densities w.r.t. the induced orientation the
        // first circle reads the opposite sign.
        assert!((out[0] - (c2 - c1) / l).abs() < 1e-15);
        assert!((out[1] - (c2 - c1) / l).abs() < 1e-15);
        let dens = &b.star * out;
        assert!((dens[0] + (c2 - c1) / l).abs() < 1e-15);
        assert!((&b.phi[0] * DVector::from_vec(vec![1.0, 1.0])).norm() < 1e-15);
        assert!(b.psi[0].norm() == 0.0 && b.psi[1].norm() == 0.0);
    }

    #[test]
    fn phi_block_against_hyperbolic_solution() {
        // ω = (a0 sinh(m(L-t)) + a1 sinh(mt)) / sinh(mL), flux = ∂t ω.
        let (m, l) = (3usize, 0.7);
        let b = mode_solve(m, l);
        let (a0, a1) = (0.4, -1.3);
        let mf = m as f64;
        let dt = |t: f64| mf * (-a0 * (mf * (l - t)).cosh() + a1 * (mf * t).cosh()) / (mf * l).sinh();
        let out = &b.phi[0] * DVector::from_vec(vec![a0, a1, 0.0, 0.0]);
        assert!((out[0] - dt(0.0)).abs() < 1e-12);
        assert!((out[1] - dt(l)).abs() < 1e-12);
    }

    #[test]
    fn identities_at_machine_precision() {
        let r = oracle_identity_suite(1.0, 20);
        assert!(r.max_residual <= 1e-12, "{}", r.max_residual);
        assert_eq!(r.accounting.ker_phi, [1, 1]);
        assert_eq!(r.accounting.psi_homology, [2, 2]);
        assert!(r.printed_psi_tilde_residual > 0.5);
    }

    #[test]
    fn disk_modes() {
        assert_eq!(disk_dtn_mode(0), 0.0);
        assert_eq!(disk_dtn_mode(-5), 5.0);
    }
}
