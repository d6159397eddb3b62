//! Typed boundary operators, the operators derived from Φ and Ψ, and the
//! identity residuals relating them.
//!
//! A boundary `j`-form is carried either strongly (Whitney coefficients on
//! `j`-simplices) or weakly (the functional `e ↦ ∫ w_e ∧ α` on
//! `(m-j)`-simplices, `m = n - 1`). Strong-to-weak is exact; weak-to-strong
//! goes through the mass matrices and is only used where an operator needs
//! strong input.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dense::{spectral_norm, weighted, weighted_pinv, Metric, RankPolicy, Weight};
use crate::dtn::DtnOperators;
use crate::error::{Error, Result};
use crate::galerkin::GalerkinStructures;
use crate::mesh::Representation;

fn pow(e: usize) -> f64 {
    if e.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// Boundary form space: degree and representation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Space {
    pub degree: usize,
    pub repr: Representation,
}

impl Space {
    pub fn strong(degree: usize) -> Self {
        Self {
            degree,
            repr: Representation::Strong,
        }
    }

    pub fn weak(degree: usize) -> Self {
        Self {
            degree,
            repr: Representation::Weak,
        }
    }

    /// Degree of the simplices indexing the coordinates.
    pub fn index_degree(&self, m: usize) -> usize {
        match self.repr {
            Representation::Strong => self.degree,
            Representation::Weak => m - self.degree,
        }
    }
}

impl std::fmt::Display for Space {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let r = match self.repr {
            Representation::Strong => "strong",
            Representation::Weak => "weak",
        };
        write!(f, "{r}({})", self.degree)
    }
}

/// A matrix between two annotated boundary spaces.
#[derive(Clone, Debug)]
pub struct Operator {
    pub label: String,
    pub input: Space,
    pub output: Space,
    pub matrix: DMatrix<f64>,
}

impl Operator {
    pub fn new(label: impl Into<String>, input: Space, output: Space, matrix: DMatrix<f64>) -> Self {
        Self {
            label: label.into(),
            input,
            output,
            matrix,
        }
    }

    /// `self ∘ right`; the output space of `right` must be the input space
    /// of `self`.
    pub fn after(&self, right: &Operator) -> Result<Operator> {
        if right.output != self.input || right.matrix.nrows() != self.matrix.ncols() {
            return Err(Error::Representation {
                left: self.label.clone(),
                right: right.label.clone(),
                detail: format!("{} does not feed {}", right.output, self.input),
            });
        }
        Ok(Operator::new(
            format!("{}·{}", self.label, right.label),
            right.input,
            self.output,
            &self.matrix * &right.matrix,
        ))
    }

    pub fn scaled(mut self, s: f64) -> Operator {
        self.matrix *= s;
        self
    }

    pub fn plus(&self, other: &Operator) -> Result<Operator> {
        if self.input != other.input || self.output != other.output {
            return Err(Error::Representation {
                left: self.label.clone(),
                right: other.label.clone(),
                detail: "sum of operators between different spaces".into(),
            });
        }
        Ok(Operator::new(
            format!("{}+{}", self.label, other.label),
            self.input,
            self.output,
            &self.matrix + &other.matrix,
        ))
    }

    pub fn relabel(mut self, label: impl Into<String>) -> Operator {
        self.label = label.into();
        self
    }
}

/// One row of the sign table: the sign printed for an operator formula and
/// the sign actually used after checking it against the cylinder oracle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignEntry {
    pub name: String,
    pub printed: String,
    pub used: String,
    pub agrees: bool,
}

pub fn sign_table() -> Vec<SignEntry> {
    let e = |name: &str, printed: &str, used: &str| SignEntry {
        name: name.into(),
        printed: printed.into(),
        used: used.into(),
        agrees: printed == used,
    };
    vec![
        e("phi_psi", "(-1)^k", "(-1)^k"),
        e("psi_phi", "(-1)^(k+1)", "(-1)^(k+1)"),
        e("phi_phi", "(-1)^(kn)", "(-1)^(kn)"),
        e("lambda", "(-1)^(n(n-k)+k+1)", "(-1)^(n(n-k)+k+1)"),
        e("pi_12", "(-1)^(n(n-k)+1)", "(-1)^(n(n-k)+1)"),
        e("pi_22", "(-1)^(k+1)", "(-1)^(k+1)"),
        e("g", "(-1)^(kn+k+n)", "(-1)^(kn+k+n)"),
        e("theta_dphi2", "(-1)^(kn)", "(-1)^(kn)"),
        e("theta_phi2d", "(-1)^(n(k+1))", "(-1)^(n(k+1))"),
        e("psi_tilde", "(-1)^(k(n-1))", "(-1)^((k+1)(n-1))"),
        e("boundary_star", "outward normal first", "outward normal first"),
    ]
}

/// Boundary operator context: Galerkin matrices, metrics, Φ and Ψ.
#[derive(Clone, Debug)]
pub struct Calculus {
    pub n: usize,
    pub m: usize,
    pub bmass: Vec<DMatrix<f64>>,
    pub bd: Vec<DMatrix<f64>>,
    pub wedge: Vec<DMatrix<f64>>,
    pub metrics: Vec<Metric>,
    pub phi: Vec<DMatrix<f64>>,
    pub psi: Vec<DMatrix<f64>>,
    pub policy: RankPolicy,
    bmass_inv: Vec<DMatrix<f64>>,
}

impl Calculus {
    pub fn new(gs: &GalerkinStructures, dtn: &DtnOperators, policy: RankPolicy) -> Self {
        let metrics: Vec<Metric> = gs.bmass.iter().map(Metric::new).collect();
        let bmass_inv = metrics.iter().map(|mt| mt.l_inv.transpose() * &mt.l_inv).collect();
        Self {
            n: gs.n,
            m: gs.n - 1,
            bmass: gs.bmass.clone(),
            bd: gs.bd.clone(),
            wedge: gs.wedge.clone(),
            metrics,
            phi: dtn.phi.clone(),
            psi: dtn.psi.clone(),
            policy,
            bmass_inv,
        }
    }

    pub fn count(&self, k: usize) -> usize {
        self.bmass[k].nrows()
    }

    pub fn weight(&self, s: Space) -> Weight<'_> {
        let metric = &self.metrics[s.index_degree(self.m)];
        match s.repr {
            Representation::Strong => Weight::Strong(metric),
            Representation::Weak => Weight::Weak(metric),
        }
    }

    pub fn phi(&self, k: usize) -> Operator {
        Operator::new(format!("Φ{k}"), Space::strong(k), Space::weak(self.m - k), self.phi[k].clone())
    }

    pub fn psi(&self, k: usize) -> Operator {
        assert!(k >= 1);
        Operator::new(format!("Ψ{k}"), Space::strong(k), Space::strong(k - 1), self.psi[k].clone())
    }

    pub fn d(&self, j: usize) -> Operator {
        Operator::new(format!("d{j}"), Space::strong(j), Space::strong(j + 1), self.bd[j].clone())
    }

    /// Exterior derivative acting on weak `j`-forms, from Stokes' theorem:
    /// `∫ w_f ∧ dα = (-1)^(a+1) ∫ dw_f ∧ α` for an `a`-form `w_f`.
    pub fn d_weak(&self, j: usize) -> Operator {
        let a = self.m - j - 1;
        Operator::new(
            format!("d{j}'"),
            Space::weak(j),
            Space::weak(j + 1),
            self.bd[a].transpose() * pow(a + 1),
        )
    }

    /// Ψ acting on weak `j`-forms, through the pairing symmetry
    /// `∫ Ψφ ∧ χ = (-1)^j ∫ φ ∧ Ψχ`.
    pub fn psi_weak(&self, j: usize) -> Operator {
        let n = self.n;
        let m = self.m;
        let e = (n - j) * (j - 1) + j * (m - j) + j;
        Operator::new(
            format!("Ψ{j}'"),
            Space::weak(j),
            Space::weak(j - 1),
            self.psi[n - j].transpose() * pow(e),
        )
    }

    pub fn to_weak(&self, j: usize) -> Operator {
        Operator::new(format!("W{j}"), Space::strong(j), Space::weak(j), self.wedge[self.m - j].clone())
    }

    pub fn to_strong(&self, j: usize) -> Operator {
        let mat = &self.bmass_inv[j] * self.wedge[self.m - j].transpose() * &self.bmass_inv[self.m - j];
        Operator::new(format!("C{j}"), Space::weak(j), Space::strong(j), mat)
    }

    pub fn bmass_inv(&self, k: usize) -> &DMatrix<f64> {
        &self.bmass_inv[k]
    }

    /// Minimum-norm least-squares inverse in the `L²` metrics.
    pub fn pinv(&self, a: &Operator) -> Operator {
        let mat = weighted_pinv(&a.matrix, self.weight(a.output), self.weight(a.input), &self.policy);
        Operator::new(format!("{}⁺", a.label), a.output, a.input, mat)
    }

    /// Relative least-squares residual of `a x = rhs` over all columns of
    /// `rhs`, in the output metric.
    pub fn image_residual(&self, a: &Operator, rhs: &Operator) -> f64 {
        if rhs.matrix.ncols() == 0 || rhs.matrix.nrows() == 0 {
            return 0.0;
        }
        let p = self.pinv(a);
        let fit = &a.matrix * (&p.matrix * &rhs.matrix);
        let w = self.weight(a.output);
        let num = spectral_norm(&(w.forward() * (&fit - &rhs.matrix)));
        let den = spectral_norm(&(w.forward() * &rhs.matrix));
        if den == 0.0 {
            0.0
        } else {
            num / den
        }
    }

    pub fn weighted_norm(&self, a: &Operator) -> f64 {
        spectral_norm(&weighted(&a.matrix, self.weight(a.output), self.weight(a.input)))
    }
}

/// Operators built from Φ and Ψ.
#[derive(Clone, Debug)]
pub struct DerivedOperators {
    pub lambda: Vec<Operator>,
    /// Least-squares residual of `Φx = Ψφ` inside each Λ.
    pub lambda_gate: Vec<f64>,
    pub g: Vec<Operator>,
    pub g_phi: Vec<Operator>,
    /// Θ as `(-1)^(kn) d∂Φ²`, `(-1)^(n(k+1)) Φ²d∂` and `d∂Ψd∂`, all in weak
    /// output form, for `k = 0..m-1`.
    pub theta: [Vec<Operator>; 3],
    /// Θ = d∂Ψd∂ between strong spaces.
    pub theta_strong: Vec<Operator>,
    pub psi_tilde: Vec<Operator>,
    pub psi_tilde_printed: Vec<Operator>,
}

/// Λ_k = Φ_k + s Ψ Φ⁺ Ψ with the containment residual.
pub fn assemble_lambda(cx: &Calculus, k: usize) -> Result<(Operator, f64)> {
    let n = cx.n;
    let phi = cx.phi(k);
    if k == 0 {
        return Ok((phi.relabel("Λ0"), 0.0));
    }
    let s = pow(n * (n - k) + k + 1);
    let inner = cx.to_weak(k - 1).after(&cx.psi(k))?;
    let phi_nk = cx.phi(n - k);
    let gate = cx.image_residual(&phi_nk, &inner);
    let tail = cx
        .to_weak(cx.m - k)
        .after(&cx.psi(n - k))?
        .after(&cx.pinv(&phi_nk))?
        .after(&inner)?;
    Ok((phi.plus(&tail.scaled(s))?.relabel(format!("Λ{k}")), gate))
}

fn assemble_g_with(cx: &Calculus, k: usize, lambda: &Operator, middle: &Operator) -> Result<Operator> {
    let n = cx.n;
    if k + 1 > cx.m {
        return Ok(lambda.clone().relabel(format!("G{k}")));
    }
    let s = pow(k * n + k + n);
    let j = n - 2 - k;
    let tail = cx
        .to_weak(cx.m - k)
        .after(&cx.d(j))?
        .after(&cx.pinv(middle))?
        .after(&cx.to_weak(k + 1))?
        .after(&cx.d(k))?;
    Ok(lambda.plus(&tail.scaled(s))?.relabel(format!("G{k}")))
}

/// Θ_k in its three forms, `k = 0..m-1`.
pub fn assemble_theta(cx: &Calculus, k: usize) -> Result<[Operator; 3]> {
    let (n, m) = (cx.n, cx.m);
    let a = cx
        .d_weak(k)
        .after(&cx.phi(m - k))?
        .after(&cx.to_strong(m - k))?
        .after(&cx.phi(k))?
        .scaled(pow(k * n))
        .relabel(format!("Θ{k}a"));
    let b = cx
        .phi(m - k - 1)
        .after(&cx.to_strong(m - k - 1))?
        .after(&cx.phi(k + 1))?
        .after(&cx.d(k))?
        .scaled(pow(n * (k + 1)))
        .relabel(format!("Θ{k}b"));
    let c = cx.to_weak(k + 1).after(&theta_strong(cx, k)?)?.relabel(format!("Θ{k}c"));
    Ok([a, b, c])
}

pub fn theta_strong(cx: &Calculus, k: usize) -> Result<Operator> {
    Ok(cx.d(k).after(&cx.psi(k + 1))?.after(&cx.d(k))?.relabel(format!("Θ{k}")))
}

/// Ψ̃_k: weak `k`-forms to weak `(k+1)`-forms, `k = 0..m-1`, realised as
/// `B Ψ B⁻¹` with the given overall sign exponent.
fn psi_tilde_with(cx: &Calculus, k: usize, exponent: usize) -> Operator {
    let m = cx.m;
    let mat = &cx.bmass[m - k - 1] * &cx.psi[m - k] * cx.bmass_inv(m - k) * pow(exponent + k * (m - k));
    Operator::new(format!("Ψ̃{k}"), Space::weak(k), Space::weak(k + 1), mat)
}

pub fn assemble_psi_tilde(cx: &Calculus, k: usize) -> Operator {
    psi_tilde_with(cx, k, (k + 1) * (cx.n - 1))
}

pub fn assemble_psi_tilde_printed(cx: &Calculus, k: usize) -> Operator {
    psi_tilde_with(cx, k, k * (cx.n - 1))
}

pub fn assemble_derived(cx: &Calculus) -> Result<DerivedOperators> {
    let m = cx.m;
    let mut lambda = Vec::new();
    let mut lambda_gate = Vec::new();
    for k in 0..=m {
        let (l, g) = assemble_lambda(cx, k)?;
        lambda.push(l);
        lambda_gate.push(g);
    }
    let mut g = Vec::new();
    let mut g_phi = Vec::new();
    for k in 0..=m {
        let mid = if k < m { cx.n - 2 - k } else { 0 };
        g.push(assemble_g_with(cx, k, &lambda[k], &lambda[mid])?);
        g_phi.push(assemble_g_with(cx, k, &lambda[k], &cx.phi(mid))?);
    }
    let mut theta: [Vec<Operator>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    let mut ts = Vec::new();
    let mut pt = Vec::new();
    let mut ptp = Vec::new();
    for k in 0..m {
        let [a, b, c] = assemble_theta(cx, k)?;
        theta[0].push(a);
        theta[1].push(b);
        theta[2].push(c);
        ts.push(theta_strong(cx, k)?);
        pt.push(assemble_psi_tilde(cx, k));
        ptp.push(assemble_psi_tilde_printed(cx, k));
    }
    Ok(DerivedOperators {
        lambda,
        lambda_gate,
        g,
        g_phi,
        theta,
        theta_strong: ts,
        psi_tilde: pt,
        psi_tilde_printed: ptp,
    })
}

/// The 2×2 block operator on pairs (k-form, (n-k)-form), with both output
/// components in weak form.
#[derive(Clone, Debug)]
pub struct PiBlocks {
    pub k: usize,
    pub blocks: [[DMatrix<f64>; 2]; 2],
}

impl PiBlocks {
    pub fn apply(&self, phi: &DVector<f64>, psi: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let [[a, b], [c, d]] = &self.blocks;
        (a * phi + b * psi, c * phi + d * psi)
    }
}

pub fn assemble_pi(cx: &Calculus, k: usize) -> Result<PiBlocks> {
    let (n, m) = (cx.n, cx.m);
    if k > m {
        return Err(Error::InvalidDegree {
            degree: k,
            msg: "no boundary forms of this degree".into(),
        });
    }
    let nk = cx.count(k);
    // The partner degree n-k exists on the boundary only for k ≥ 1.
    let partner = n - k <= m;
    let nn = if partner { cx.count(n - k) } else { 0 };
    let a = cx.phi[k].clone();
    let c = if k >= 1 { cx.to_weak(k - 1).after(&cx.psi(k))?.matrix } else { DMatrix::zeros(0, nk) };
    let (b, d) = if partner {
        let b = cx.to_weak(n - k - 1).after(&cx.psi(n - k))?.matrix * pow(n * (n - k) + 1);
        let d = cx.phi[n - k].clone() * pow(k + 1);
        (b, d)
    } else {
        (DMatrix::zeros(a.nrows(), 0), DMatrix::zeros(c.nrows(), 0))
    };
    debug_assert_eq!(b.ncols(), nn);
    Ok(PiBlocks {
        k,
        blocks: [[a, b], [c, d]],
    })
}

/// `d∂ x` for the minimum-norm solution of `Φ_k x = ψ`, gated by the
/// least-squares residual.
pub fn hilbert_transform(cx: &Calculus, k: usize, psi: &DVector<f64>, tolerance: f64) -> Result<DVector<f64>> {
    if k >= cx.m {
        return Err(Error::InvalidDegree {
            degree: k,
            msg: "d∂ vanishes on top-degree boundary forms".into(),
        });
    }
    let phi = cx.phi(k);
    let rhs = Operator::new("ψ", Space::strong(0), phi.output, DMatrix::from_column_slice(psi.len(), 1, psi.as_slice()));
    let residual = cx.image_residual(&phi, &rhs);
    if residual > tolerance {
        return Err(Error::NotInImage {
            operator: phi.label,
            residual,
            tolerance,
        });
    }
    let x = cx.pinv(&phi).matrix * psi;
    Ok(&cx.bd[k] * x)
}

/// Residual of one identity `lhs = rhs` at degree `k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub name: String,
    pub degree: usize,
    /// Relative residual on the resolved (smooth) input subspace.
    pub residual: f64,
    /// Relative residual over the whole discrete space.
    pub residual_full: f64,
    pub h: f64,
    pub representation: String,
}

/// Eigenvectors of the boundary Hodge Laplacian with eigenvalue at most
/// `cut`, orthonormal in the mass metric: the modes a mesh resolves.
pub fn resolved_basis(cx: &Calculus, k: usize, cut: f64) -> DMatrix<f64> {
    let nk = cx.count(k);
    if nk == 0 {
        return DMatrix::zeros(0, 0);
    }
    let b = &cx.bmass[k];
    let mut lap = DMatrix::zeros(nk, nk);
    if k < cx.m {
        let d = &cx.bd[k];
        lap += d.transpose() * &cx.bmass[k + 1] * d;
    }
    if k >= 1 {
        let d = &cx.bd[k - 1];
        let t = b * d;
        lap += &t * cx.bmass_inv(k - 1) * t.transpose();
    }
    let mt = &cx.metrics[k];
    let s = &mt.l_inv * lap * mt.l_inv.transpose();
    let s = (&s + s.transpose()) * 0.5;
    let eig = s.symmetric_eigen();
    let keep: Vec<usize> = (0..nk).filter(|&i| eig.eigenvalues[i] <= cut).collect();
    let q = DMatrix::from_fn(nk, keep.len(), |r, c| eig.eigenvectors[(r, keep[c])]);
    mt.l_inv.transpose() * q
}

/// Resolved-subspace bases per boundary degree, for strong inputs.
#[derive(Clone, Debug)]
pub struct Resolved {
    pub strong: Vec<DMatrix<f64>>,
    pub cut: f64,
}

impl Resolved {
    pub fn new(cx: &Calculus, cut: f64) -> Self {
        Self {
            strong: (0..=cx.m).map(|k| resolved_basis(cx, k, cut)).collect(),
            cut,
        }
    }

    /// Basis of the input space, orthonormal in that space's norm.
    pub fn basis(&self, cx: &Calculus, s: Space) -> DMatrix<f64> {
        match s.repr {
            Representation::Strong => self.strong[s.degree].clone(),
            Representation::Weak => {
                let j = s.index_degree(cx.m);
                &cx.bmass[j] * &self.strong[j]
            }
        }
    }

    /// Compress `a` to the resolved modes of its input and output, in
    /// orthonormal coordinates.
    pub fn compress(&self, cx: &Calculus, a: &Operator, matrix: &DMatrix<f64>) -> DMatrix<f64> {
        let fo = cx.weight(a.output).forward();
        let q = &fo * self.basis(cx, a.output);
        q.transpose() * fo * matrix * self.basis(cx, a.input)
    }
}

fn restricted_norm(cx: &Calculus, res: &Resolved, a: &Operator) -> f64 {
    spectral_norm(&res.compress(cx, a, &a.matrix))
}

/// Residual of `lhs = rhs`. For identities of the form `A·B = 0` pass the
/// factors so the scale comes from their norms.
pub fn residual(
    cx: &Calculus,
    res: &Resolved,
    lhs: &Operator,
    rhs: &Operator,
    factors: Option<(&Operator, &Operator)>,
) -> Result<(f64, f64)> {
    if lhs.input != rhs.input || lhs.output != rhs.output {
        return Err(Error::Representation {
            left: lhs.label.clone(),
            right: rhs.label.clone(),
            detail: "identity sides live in different spaces".into(),
        });
    }
    let out = cx.weight(lhs.output);
    let diff = &lhs.matrix - &rhs.matrix;
    let full_num = spectral_norm(&weighted(&diff, out, cx.weight(lhs.input)));
    // Both sides are tested on resolved modes: grid-scale output content
    // (the wedge pairing's checkerboard on even cycles) is not resolved.
    let num = spectral_norm(&res.compress(cx, lhs, &diff));
    let (mut full_den, mut den) = (
        cx.weighted_norm(lhs) + cx.weighted_norm(rhs),
        restricted_norm(cx, res, lhs) + restricted_norm(cx, res, rhs),
    );
    if let Some((outer, inner)) = factors {
        full_den += cx.weighted_norm(outer) * cx.weighted_norm(inner);
        den += restricted_norm(cx, res, outer) * restricted_norm(cx, res, inner);
    }
    let ratio = |a: f64, b: f64| if a == 0.0 { 0.0 } else { a / (b + f64::MIN_POSITIVE) };
    Ok((ratio(num, den), ratio(full_num, full_den)))
}

fn zero_like(label: &str, input: Space, output: Space, rows: usize, cols: usize) -> Operator {
    Operator::new(label, input, output, DMatrix::zeros(rows, cols))
}

/// Evaluate every identity at every degree where its operators exist.
pub fn identity_suite(cx: &Calculus, derived: &DerivedOperators, res: &Resolved, h: f64) -> Result<Vec<IdentityReport>> {
    let (n, m) = (cx.n, cx.m);
    let mut out = Vec::new();
    let mut push = |name: &str, k: usize, r: (f64, f64)| {
        out.push(IdentityReport {
            name: name.to_string(),
            degree: k,
            residual: r.0,
            residual_full: r.1,
            h,
            representation: "weak".into(),
        })
    };
    for k in 0..=m {
        // ΦΨ = (-1)^k d∂Φ
        if k >= 1 {
            let lhs = cx.phi(k - 1).after(&cx.psi(k))?;
            let rhs = cx.d_weak(m - k).after(&cx.phi(k))?.scaled(pow(k));
            push("phi_psi", k, residual(cx, res, &lhs, &rhs, None)?);
        }
        // Ψ² = 0
        if k >= 2 {
            let lhs = cx.psi(k - 1).after(&cx.psi(k))?;
            let rhs = zero_like("0", lhs.input, lhs.output, lhs.matrix.nrows(), lhs.matrix.ncols());
            push("psi_psi", k, residual(cx, res, &lhs, &rhs, Some((&cx.psi(k - 1), &cx.psi(k))))?);
        }
        // ΨΦ = (-1)^(k+1) Φd∂
        if k < m {
            let lhs = cx.psi_weak(m - k).after(&cx.phi(k))?;
            let rhs = cx.phi(k + 1).after(&cx.d(k))?.scaled(pow(k + 1));
            push("psi_phi", k, residual(cx, res, &lhs, &rhs, None)?);
        }
        // Φ² = (-1)^(kn) (d∂Ψ + Ψd∂)
        {
            let lhs = cx.phi(m - k).after(&cx.to_strong(m - k))?.after(&cx.phi(k))?;
            let mut inner = DMatrix::zeros(cx.count(k), cx.count(k));
            if k >= 1 {
                inner += &cx.bd[k - 1] * &cx.psi[k];
            }
            if k < m {
                inner += &cx.psi[k + 1] * &cx.bd[k];
            }
            let rhs = cx
                .to_weak(k)
                .after(&Operator::new("d∂Ψ+Ψd∂", Space::strong(k), Space::strong(k), inner))?
                .scaled(pow(k * n));
            push("phi_phi", k, residual(cx, res, &lhs, &rhs, None)?);
        }
        let lam = &derived.lambda;
        // Λd∂ = 0
        if k < m {
            let lhs = lam[k + 1].after(&cx.d(k))?;
            let rhs = zero_like("0", lhs.input, lhs.output, lhs.matrix.nrows(), lhs.matrix.ncols());
            push("lambda_d", k, residual(cx, res, &lhs, &rhs, Some((&lam[k + 1], &cx.d(k))))?);
        }
        // d∂Λ = 0
        if k >= 1 {
            let d = cx.d_weak(m - k);
            let lhs = d.after(&lam[k])?;
            let rhs = zero_like("0", lhs.input, lhs.output, lhs.matrix.nrows(), lhs.matrix.ncols());
            push("d_lambda", k, residual(cx, res, &lhs, &rhs, Some((&d, &lam[k])))?);
        }
        // Λ² = 0
        {
            let outer = lam[m - k].after(&cx.to_strong(m - k))?;
            let lhs = outer.after(&lam[k])?;
            let rhs = zero_like("0", lhs.input, lhs.output, lhs.matrix.nrows(), lhs.matrix.ncols());
            push("lambda_lambda", k, residual(cx, res, &lhs, &rhs, Some((&outer, &lam[k])))?);
        }
    }
    for k in 0..m {
        let [a, b, c] = [&derived.theta[0][k], &derived.theta[1][k], &derived.theta[2][k]];
        push("theta_a_b", k, residual(cx, res, a, b, None)?);
        push("theta_a_c", k, residual(cx, res, a, c, None)?);
        push("theta_b_c", k, residual(cx, res, b, c, None)?);
        if k + 1 < m {
            let t0 = &derived.theta_strong[k];
            let t1 = &derived.theta_strong[k + 1];
            let lhs = t1.after(t0)?;
            let rhs = zero_like("0", lhs.input, lhs.output, lhs.matrix.nrows(), lhs.matrix.ncols());
            push("theta_theta", k, residual(cx, res, &lhs, &rhs, Some((t1, t0)))?);
            let p0 = &derived.psi_tilde[k];
            let p1 = &derived.psi_tilde[k + 1];
            let lhs = p1.after(p0)?;
            let rhs = zero_like("0", lhs.input, lhs.output, lhs.matrix.nrows(), lhs.matrix.ncols());
            push("psi_tilde_squared", k, residual(cx, res, &lhs, &rhs, Some((p1, p0)))?);
        }
        // Adjointness: B_{k+1} C Ψ̃ W ≈ Ψᵀ B_k as maps strong k → weak (m-k-1).
        let pt = &derived.psi_tilde[k];
        let lhs = cx.to_strong(k + 1).after(pt)?.after(&cx.to_weak(k))?;
        let lhs = Operator::new("BΨ̃", lhs.input, Space::weak(m - k - 1), &cx.bmass[k + 1] * &lhs.matrix);
        let rhs = Operator::new(
            "ΨᵀB",
            Space::strong(k),
            Space::weak(m - k - 1),
            cx.psi[k + 1].transpose() * &cx.bmass[k],
        );
        push("psi_tilde_adjoint", k, residual(cx, res, &lhs, &rhs, None)?);
        // The same adjointness read through the wedge pairing instead of the mass.
        let lhs = pt.after(&cx.to_weak(k))?;
        let rhs = cx.to_weak(k + 1).after(&Operator::new(
            "B⁻¹ΨᵀB",
            Space::strong(k),
            Space::strong(k + 1),
            cx.bmass_inv(k + 1) * cx.psi[k + 1].transpose() * &cx.bmass[k],
        ))?;
        push("psi_tilde_adjoint_wedge", k, residual(cx, res, &lhs, &rhs, None)?);
    }
    for k in 0..=m {
        push("g_lambda_phi", k, residual(cx, res, &derived.g[k], &derived.g_phi[k], None)?);
    }
    Ok(out)
}

/// Names of the identities from the four Φ/Ψ relations and the three Λ
/// relations.
pub const CORE_IDENTITIES: [&str; 7] = [
    "phi_psi",
    "psi_psi",
    "psi_phi",
    "phi_phi",
    "lambda_d",
    "d_lambda",
    "lambda_lambda",
];

#[cfg(test)]
mod tests {
    use super::*;

    fn op(label: &str, i: Space, o: Space, r: usize, c: usize) -> Operator {
        Operator::new(label, i, o, DMatrix::from_element(r, c, 1.0))
    }

    #[test]
    fn mismatched_composition_rejected() {
        let a = op("A", Space::strong(0), Space::weak(1), 3, 3);
        let b = op("B", Space::strong(1), Space::strong(0), 3, 3);
        assert!(a.after(&b).is_ok());
        let err = b.after(&a).unwrap_err();
        assert!(matches!(err, Error::Representation { .. }));
        let c = op("C", Space::strong(0), Space::strong(1), 3, 3);
        assert!(a.plus(&c).is_err());
    }

    #[test]
    fn sign_table_marks_the_corrected_entry() {
        let t = sign_table();
        let bad: Vec<_> = t.iter().filter(|e| !e.agrees).map(|e| e.name.as_str()).collect();
        assert_eq!(bad, vec!["psi_tilde"]);
    }
}
