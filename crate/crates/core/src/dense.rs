//! Dense helpers: sorted SVD, ratio-gap rank detection, metric-weighted
//! pseudo-inverses and norm estimates.

use nalgebra::{Cholesky, DMatrix, Dyn};
use serde::{Deserialize, Serialize};

/// Rank detection policy: the rank is placed at the largest ratio between
/// consecutive singular values, with values below `floor * s_max` clamped.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankPolicy {
    pub threshold: f64,
    pub floor: f64,
}

impl Default for RankPolicy {
    fn default() -> Self {
        Self {
            threshold: 1e3,
            floor: 1e-12,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankReport {
    pub label: String,
    pub singular_values: Vec<f64>,
    pub rank: usize,
    /// `s_rank / s_{rank+1}` after clamping to the floor.
    pub gap_ratio: f64,
    pub policy: RankPolicy,
    pub ambiguous: bool,
}

impl RankReport {
    pub fn nullity(&self) -> usize {
        self.singular_values.len() - self.rank
    }
}

/// Rank of a descending spectrum under `policy`. Returns `(rank, gap)`.
pub fn rank_from_spectrum(s: &[f64], policy: &RankPolicy) -> (usize, f64) {
    let smax = s.first().copied().unwrap_or(0.0);
    if s.is_empty() || smax <= f64::MIN_POSITIVE {
        // Every value sits at the floor: as clean a gap as the policy allows.
        return (0, 1.0 / policy.floor);
    }
    let floor = policy.floor * smax;
    let clamped: Vec<f64> = s.iter().map(|&x| x.max(floor)).chain(std::iter::once(floor)).collect();
    let mut best = (0usize, 0.0f64);
    for r in 1..=s.len() {
        let ratio = clamped[r - 1] / clamped[r];
        if ratio > best.1 {
            best = (r, ratio);
        }
    }
    best
}

/// Singular values in descending order.
pub fn singular_values(a: &DMatrix<f64>) -> Vec<f64> {
    if a.is_empty() {
        return Vec::new();
    }
    let mut s: Vec<f64> = a.singular_values().iter().copied().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

pub fn numerical_rank(label: &str, a: &DMatrix<f64>, policy: &RankPolicy) -> RankReport {
    let mut s = singular_values(a);
    // Report one value per column so that nullity = columns - rank.
    s.resize(a.ncols().max(s.len()), 0.0);
    s.truncate(a.ncols());
    let (rank, gap_ratio) = rank_from_spectrum(&s, policy);
    RankReport {
        label: label.to_string(),
        singular_values: s,
        rank,
        gap_ratio,
        policy: *policy,
        ambiguous: gap_ratio < policy.threshold,
    }
}

/// Full SVD with descending singular values: returns `(s, U, V)` where `V`
/// is square (all right singular vectors) and `U` has `min(rows, cols)`
/// columns matching `s`.
pub fn full_svd(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>, DMatrix<f64>) {
    let (m, n) = a.shape();
    if n == 0 {
        return (Vec::new(), DMatrix::zeros(m, 0), DMatrix::zeros(0, 0));
    }
    let padded = if m < n {
        let mut p = DMatrix::zeros(n, n);
        p.view_mut((0, 0), (m, n)).copy_from(a);
        p
    } else {
        a.clone()
    };
    let svd = padded.svd(true, true);
    let u = svd.u.expect("u");
    let vt = svd.v_t.expect("v_t");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let s: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let v = DMatrix::from_fn(n, order.len(), |r, c| vt[(order[c], r)]);
    let u = DMatrix::from_fn(m, order.len(), |r, c| u[(r, order[c])]);
    (s, u, v)
}

/// Orthonormal basis of the numerical kernel, from the trailing right
/// singular vectors.
pub fn kernel_basis(a: &DMatrix<f64>, policy: &RankPolicy) -> (DMatrix<f64>, RankReport) {
    let report = numerical_rank("kernel", a, policy);
    let (_, _, v) = full_svd(a);
    let n = a.ncols();
    (v.columns(report.rank, n - report.rank).into_owned(), report)
}

/// Largest singular value, by power iteration on `AᵀA` for large matrices.
pub fn spectral_norm(a: &DMatrix<f64>) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    if a.nrows().min(a.ncols()) <= 48 {
        return singular_values(a)[0];
    }
    let n = a.ncols();
    let mut x = DMatrix::from_fn(n, 1, |i, _| 1.0 + ((i * 37) % 11) as f64 / 11.0);
    x /= x.norm();
    let mut est = 0.0;
    for _ in 0..500 {
        let y = a * &x;
        let z = a.transpose() * &y;
        let nz = z.norm();
        if nz == 0.0 {
            return 0.0;
        }
        let next = nz.sqrt();
        x = z / nz;
        if (next - est).abs() <= 1e-10 * next {
            return next;
        }
        est = next;
    }
    est
}

/// Sine of the largest principal angle between `span(q1)` and `span(q2)`;
/// both bases orthonormal. Measures how far `span(q1)` is from lying inside
/// `span(q2)`.
pub fn containment_angle(q1: &DMatrix<f64>, q2: &DMatrix<f64>) -> f64 {
    if q1.ncols() == 0 {
        return 0.0;
    }
    let proj = q2 * (q2.transpose() * q1);
    let res = q1 - proj;
    spectral_norm(&res).clamp(0.0, 1.0).asin()
}

/// Lower Cholesky factor of a symmetric positive definite metric together
/// with its inverse, used to move between coordinates and `L²` coordinates.
#[derive(Clone, Debug)]
pub struct Metric {
    pub l: DMatrix<f64>,
    pub l_inv: DMatrix<f64>,
}

impl Metric {
    pub fn new(b: &DMatrix<f64>) -> Self {
        let n = b.nrows();
        if n == 0 {
            return Self {
                l: b.clone(),
                l_inv: b.clone(),
            };
        }
        let chol: Cholesky<f64, Dyn> = Cholesky::new(b.clone()).expect("metric must be positive definite");
        let l = chol.l();
        let l_inv = l
            .clone()
            .solve_lower_triangular(&DMatrix::identity(n, n))
            .expect("triangular inverse");
        Self { l, l_inv }
    }

    pub fn size(&self) -> usize {
        self.l.nrows()
    }
}

/// Which norm a coordinate vector carries: strong coefficients use the mass
/// matrix, weak functionals use its inverse.
#[derive(Clone, Copy, Debug)]
pub enum Weight<'a> {
    Strong(&'a Metric),
    Weak(&'a Metric),
}

impl Weight<'_> {
    /// Map coordinates to orthonormal coordinates.
    pub fn forward(&self) -> DMatrix<f64> {
        match self {
            Weight::Strong(m) => m.l.transpose(),
            Weight::Weak(m) => m.l_inv.clone(),
        }
    }

    /// Map orthonormal coordinates back to coordinates.
    pub fn backward(&self) -> DMatrix<f64> {
        match self {
            Weight::Strong(m) => m.l_inv.transpose(),
            Weight::Weak(m) => m.l.clone(),
        }
    }
}

/// `A` expressed between orthonormal coordinates.
pub fn weighted(a: &DMatrix<f64>, out: Weight<'_>, inp: Weight<'_>) -> DMatrix<f64> {
    out.forward() * a * inp.backward()
}

/// Minimum-norm least-squares pseudo-inverse in the given metrics, truncated
/// at the numerical rank from `policy`.
pub fn weighted_pinv(a: &DMatrix<f64>, out: Weight<'_>, inp: Weight<'_>, policy: &RankPolicy) -> DMatrix<f64> {
    let aw = weighted(a, out, inp);
    inp.backward() * truncated_pinv(&aw, policy) * out.forward()
}

pub fn truncated_pinv(a: &DMatrix<f64>, policy: &RankPolicy) -> DMatrix<f64> {
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return DMatrix::zeros(n, m);
    }
    let (s, u, v) = full_svd(a);
    let (rank, _) = rank_from_spectrum(&s, policy);
    let mut out = DMatrix::zeros(n, m);
    for (i, si) in s.iter().enumerate().take(rank) {
        out += (v.column(i) * u.column(i).transpose()) / *si;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_rank_full() {
        let r = numerical_rank("I", &DMatrix::identity(5, 5), &RankPolicy::default());
        assert_eq!(r.rank, 5);
        assert!(!r.ambiguous);
    }

    #[test]
    fn zero_rank_zero() {
        let r = numerical_rank("0", &DMatrix::zeros(4, 3), &RankPolicy::default());
        assert_eq!(r.rank, 0);
        assert_eq!(r.nullity(), 3);
    }

    #[test]
    fn constructed_gap() {
        let a = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 1.0, 1e-9]));
        let r = numerical_rank("d", &a, &RankPolicy::default());
        assert_eq!(r.rank, 2);
        assert!((r.gap_ratio - 1e9).abs() / 1e9 < 1e-6);
    }

    #[test]
    fn wide_kernel_is_complete() {
        let a = DMatrix::from_row_slice(1, 3, &[1.0, 1.0, 0.0]);
        let (k, _) = kernel_basis(&a, &RankPolicy::default());
        assert_eq!(k.ncols(), 2);
        assert!((&a * &k).norm() < 1e-14);
    }

    #[test]
    fn power_iteration_matches_svd() {
        let a = DMatrix::from_fn(80, 60, |i, j| ((i * 13 + j * 7) % 17) as f64 - 8.0 + if i == j { 30.0 } else { 0.0 });
        let exact = singular_values(&a)[0];
        assert!((spectral_norm(&a) - exact).abs() / exact < 1e-7);
    }

    #[test]
    fn weighted_pinv_recovers_full_rank_inverse() {
        let b = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let m = Metric::new(&b);
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 3.0]);
        let p = weighted_pinv(&a, Weight::Weak(&m), Weight::Strong(&m), &RankPolicy::default());
        assert!((p * &a - DMatrix::identity(2, 2)).norm() < 1e-12);
    }
}
