//! Exact ranks of integer incidence matrices and the simplicial Betti
//! numbers they determine.
//!
//! Ranks are computed over the rationals by fraction-free sparse row
//! reduction: each row is reduced against stored pivot rows keyed by leading
//! column and normalised by the gcd of its entries. Entries stay in `i128`
//! and the whole computation is repeated with big integers on overflow.

use std::collections::HashMap;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::mesh::{BoundaryComplex, Incidence, SimplicialComplex};

trait Exact: Clone + PartialEq {
    fn from_i8(v: i8) -> Self;
    fn is_zero(&self) -> bool;
    fn mul_sub(a: &Self, x: &Self, b: &Self, y: &Self) -> Option<Self>;
    fn gcd(&self, other: &Self) -> Self;
    fn div_exact(&self, d: &Self) -> Self;
    fn abs_is_one(&self) -> bool;
    fn is_negative(&self) -> bool;
    fn neg(&self) -> Self;
}

impl Exact for i128 {
    fn from_i8(v: i8) -> Self {
        i128::from(v)
    }
    fn is_zero(&self) -> bool {
        *self == 0
    }
    fn mul_sub(a: &Self, x: &Self, b: &Self, y: &Self) -> Option<Self> {
        a.checked_mul(*x)?.checked_sub(b.checked_mul(*y)?)
    }
    fn gcd(&self, other: &Self) -> Self {
        Integer::gcd(self, other)
    }
    fn div_exact(&self, d: &Self) -> Self {
        self / d
    }
    fn abs_is_one(&self) -> bool {
        self.abs() == 1
    }
    fn is_negative(&self) -> bool {
        *self < 0
    }
    fn neg(&self) -> Self {
        -self
    }
}

impl Exact for BigInt {
    fn from_i8(v: i8) -> Self {
        BigInt::from(v)
    }
    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
    fn mul_sub(a: &Self, x: &Self, b: &Self, y: &Self) -> Option<Self> {
        Some(a * x - b * y)
    }
    fn gcd(&self, other: &Self) -> Self {
        Integer::gcd(self, other)
    }
    fn div_exact(&self, d: &Self) -> Self {
        self / d
    }
    fn abs_is_one(&self) -> bool {
        self.abs() == BigInt::from(1)
    }
    fn is_negative(&self) -> bool {
        Signed::is_negative(self)
    }
    fn neg(&self) -> Self {
        -self
    }
}

type Row<T> = Vec<(usize, T)>;

/// `p_lead * r - r_lead * p`, eliminating the shared leading column.
fn eliminate<T: Exact>(r: &Row<T>, p: &Row<T>) -> Option<Row<T>> {
    let (rl, pl) = (&r[0].1, &p[0].1);
    let mut out = Vec::with_capacity(r.len() + p.len());
    let (mut i, mut j) = (1, 1);
    let zero = T::from_i8(0);
    while i < r.len() || j < p.len() {
        let ci = r.get(i).map_or(usize::MAX, |e| e.0);
        let cj = p.get(j).map_or(usize::MAX, |e| e.0);
        let (col, v) = if ci < cj {
            i += 1;
            (ci, T::mul_sub(pl, &r[i - 1].1, rl, &zero)?)
        } else if cj < ci {
            j += 1;
            (cj, T::mul_sub(pl, &zero, rl, &p[j - 1].1)?)
        } else {
            i += 1;
            j += 1;
            (ci, T::mul_sub(pl, &r[i - 1].1, rl, &p[j - 1].1)?)
        };
        if !v.is_zero() {
            out.push((col, v));
        }
    }
    normalise(&mut out);
    Some(out)
}

fn normalise<T: Exact>(row: &mut Row<T>) {
    if row.is_empty() {
        return;
    }
    let mut g = row[0].1.clone();
    for (_, v) in row.iter().skip(1) {
        if g.abs_is_one() {
            break;
        }
        g = g.gcd(v);
    }
    if row[0].1.is_negative() {
        g = g.neg();
    }
    if !(g.abs_is_one() && !g.is_negative()) {
        for (_, v) in row.iter_mut() {
            *v = v.div_exact(&g);
        }
    }
}

fn rank_generic<T: Exact>(rows: &[Vec<(usize, i8)>]) -> Option<usize> {
    let mut pivots: HashMap<usize, Row<T>> = HashMap::new();
    for row in rows {
        let mut r: Row<T> = row.iter().map(|&(c, v)| (c, T::from_i8(v))).collect();
        r.sort_by_key(|e| e.0);
        normalise(&mut r);
        while let Some(&(lead, _)) = r.first() {
            match pivots.get(&lead) {
                Some(p) => r = eliminate(&r, p)?,
                None => {
                    pivots.insert(lead, r);
                    break;
                }
            }
        }
    }
    Some(pivots.len())
}

/// Rank over ℚ of a sparse matrix with small integer entries.
pub fn rational_rank(rows: &[Vec<(usize, i8)>]) -> usize {
    rank_generic::<i128>(rows).unwrap_or_else(|| rank_generic::<BigInt>(rows).expect("big integers do not overflow"))
}

pub fn incidence_rank(d: &Incidence) -> usize {
    rational_rank(d.rows())
}

/// Absolute and relative Betti numbers over ℝ.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Betti {
    pub absolute: Vec<usize>,
    pub relative: Vec<usize>,
}

pub fn simplicial_oracle(c: &SimplicialComplex, b: &BoundaryComplex) -> Betti {
    let n = c.dim();
    let ranks: Vec<usize> = (0..n).map(|k| incidence_rank(c.coboundary(k))).collect();
    let rel_ranks: Vec<usize> = (0..n)
        .map(|k| {
            let rows = b.interior(c, k + 1);
            let cols = b.interior(c, k);
            incidence_rank(&c.coboundary(k).restrict(&rows, &cols))
        })
        .collect();
    let rank = |r: &[usize], k: isize| if k < 0 || k as usize >= n { 0 } else { r[k as usize] };
    let absolute = (0..=n)
        .map(|k| c.count(k) - rank(&ranks, k as isize) - rank(&ranks, k as isize - 1))
        .collect();
    let relative = (0..=n)
        .map(|k| b.interior(c, k).len() - rank(&rel_ranks, k as isize) - rank(&rel_ranks, k as isize - 1))
        .collect();
    Betti { absolute, relative }
}
