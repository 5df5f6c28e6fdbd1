//! Multi-index arithmetic, integer index boxes, binary masks and dyadic
//! cells. Axis indices are 0-based internally; reports and error messages
//! convert to the 1-based convention used everywhere in the docs.

use std::fmt;
use std::ops::{Add, Index, Sub};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("multi-index must have at least one entry")]
    EmptyIndex,
    #[error("dimension mismatch: {0} vs {1}")]
    DimMismatch(usize, usize),
    #[error("axis {axis} out of range 1..={dim}")]
    AxisOutOfRange { axis: usize, dim: usize },
    #[error("box edge must be positive, got {0}")]
    NonPositiveEdge(f64),
    #[error("index {index} outside admissible range {lo}..{hi}")]
    OutsideRange {
        index: MultiIndex,
        lo: MultiIndex,
        hi: MultiIndex,
    },
    #[error("entry {0} must be nonnegative")]
    NegativeEntry(i64),
}

/// A vector of `d` small integers: exponents, dyadic levels, spline orders,
/// shift indices. Comparisons are componentwise and therefore partial.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct MultiIndex {
    entries: Vec<i64>,
}

impl MultiIndex {
    pub fn new(entries: Vec<i64>) -> Result<Self, IndexError> {
        if entries.is_empty() {
            return Err(IndexError::EmptyIndex);
        }
        Ok(Self { entries })
    }

    /// Panicking constructor for literals in tests and internal code.
    pub fn of(entries: &[i64]) -> Self {
        Self::new(entries.to_vec()).expect("nonempty multi-index")
    }

    pub fn zeros(d: usize) -> Self {
        Self::of(&vec![0; d])
    }

    /// The vector 𝔢 = (1,…,1).
    pub fn ones(d: usize) -> Self {
        Self::of(&vec![1; d])
    }

    pub fn constant(d: usize, v: i64) -> Self {
        Self::of(&vec![v; d])
    }

    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[i64] {
        &self.entries
    }

    pub fn get(&self, axis: usize) -> i64 {
        self.entries[axis]
    }

    pub fn set(&mut self, axis: usize, v: i64) {
        self.entries[axis] = v;
    }

    /// Componentwise `self_j <= other_j` for all j.
    pub fn le(&self, other: &Self) -> bool {
        self.dim() == other.dim()
            && self
                .entries
                .iter()
                .zip(&other.entries)
                .all(|(a, b)| a <= b)
    }

    /// Componentwise strict inequality on every axis.
    pub fn lt(&self, other: &Self) -> bool {
        self.dim() == other.dim()
            && self
                .entries
                .iter()
                .zip(&other.entries)
                .all(|(a, b)| a < b)
    }

    pub fn is_nonnegative(&self) -> bool {
        self.entries.iter().all(|&a| a >= 0)
    }

    /// Componentwise plus-part `x_+ = max(x, 0)`.
    pub fn plus_part(&self) -> Self {
        Self {
            entries: self.entries.iter().map(|&a| a.max(0)).collect(),
        }
    }

    /// The support set 𝔰(x) = { j : x_j ≠ 0 }, reported 0-based.
    pub fn support(&self) -> Vec<usize> {
        self.entries
            .iter()
            .enumerate()
            .filter(|(_, &a)| a != 0)
            .map(|(j, _)| j)
            .collect()
    }

    pub fn sum(&self) -> i64 {
        self.entries.iter().sum()
    }

    pub fn min_entry(&self) -> i64 {
        *self.entries.iter().min().expect("nonempty")
    }

    pub fn max_entry(&self) -> i64 {
        *self.entries.iter().max().expect("nonempty")
    }

    /// Inner product (x, y) = Σ x_j y_j.
    pub fn dot(&self, other: &Self) -> i64 {
        assert_eq!(self.dim(), other.dim());
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| a * b)
            .sum()
    }

    pub fn map(&self, f: impl Fn(i64) -> i64) -> Self {
        Self {
            entries: self.entries.iter().map(|&a| f(a)).collect(),
        }
    }

    pub fn zip(&self, other: &Self, f: impl Fn(i64, i64) -> i64) -> Self {
        assert_eq!(self.dim(), other.dim());
        Self {
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    /// 2^{-x} componentwise as floating point.
    pub fn pow2_neg(&self) -> Vec<f64> {
        self.entries.iter().map(|&a| (-a as f64).exp2()).collect()
    }

    /// 2^{x} componentwise as floating point.
    pub fn pow2(&self) -> Vec<f64> {
        self.entries.iter().map(|&a| (a as f64).exp2()).collect()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.entries.iter().map(|&a| a as f64).collect()
    }
}

impl Index<usize> for MultiIndex {
    type Output = i64;
    fn index(&self, i: usize) -> &i64 {
        &self.entries[i]
    }
}

impl Add for &MultiIndex {
    type Output = MultiIndex;
    fn add(self, rhs: &MultiIndex) -> MultiIndex {
        self.zip(rhs, |a, b| a + b)
    }
}

impl Sub for &MultiIndex {
    type Output = MultiIndex;
    fn sub(self, rhs: &MultiIndex) -> MultiIndex {
        self.zip(rhs, |a, b| a - b)
    }
}

impl fmt::Debug for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, e) in self.entries.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{e}")?;
        }
        write!(f, ")")
    }
}

/// Indicator vector χ_J of a 0-based axis set J ⊆ {0..d-1}.
pub fn indicator_vector(axes: &[usize], d: usize) -> Result<MultiIndex, IndexError> {
    let mut v = vec![0i64; d];
    for &j in axes {
        if j >= d {
            return Err(IndexError::AxisOutOfRange { axis: j + 1, dim: d });
        }
        v[j] = 1;
    }
    MultiIndex::new(v)
}

/// 𝔪(y) = min_j y_j, the gauge used for series convergence over ℤ_+^d.
pub fn min_coord(y: &[f64]) -> f64 {
    y.iter().copied().fold(f64::INFINITY, f64::min)
}

/// The integer box 𝒩_{lo,hi} = { ν ∈ ℤ^d : lo ≤ ν ≤ hi }, iterated in
/// lexicographic order with the last axis fastest.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IndexBox {
    lo: MultiIndex,
    hi: MultiIndex,
}

impl IndexBox {
    pub fn new(lo: MultiIndex, hi: MultiIndex) -> Result<Self, IndexError> {
        if lo.dim() != hi.dim() {
            return Err(IndexError::DimMismatch(lo.dim(), hi.dim()));
        }
        Ok(Self { lo, hi })
    }

    pub fn of(lo: &[i64], hi: &[i64]) -> Self {
        Self::new(MultiIndex::of(lo), MultiIndex::of(hi)).expect("matching dims")
    }

    pub fn lo(&self) -> &MultiIndex {
        &self.lo
    }

    pub fn hi(&self) -> &MultiIndex {
        &self.hi
    }

    pub fn dim(&self) -> usize {
        self.lo.dim()
    }

    pub fn is_empty(&self) -> bool {
        !self.lo.le(&self.hi)
    }

    pub fn contains(&self, v: &MultiIndex) -> bool {
        self.lo.le(v) && v.le(&self.hi)
    }

    pub fn count(&self) -> usize {
        if self.is_empty() {
            return 0;
        }
        self.lo
            .entries()
            .iter()
            .zip(self.hi.entries())
            .map(|(&a, &b)| (b - a + 1) as usize)
            .product()
    }

    /// Offset of `v` in iteration order; the inverse of `iter().nth`.
    pub fn offset(&self, v: &MultiIndex) -> Option<usize> {
        if !self.contains(v) {
            return None;
        }
        let mut off = 0usize;
        for j in 0..self.dim() {
            let width = (self.hi[j] - self.lo[j] + 1) as usize;
            off = off * width + (v[j] - self.lo[j]) as usize;
        }
        Some(off)
    }

    pub fn iter(&self) -> IndexBoxIter {
        IndexBoxIter {
            boxx: self.clone(),
            cur: if self.is_empty() {
                None
            } else {
                Some(self.lo.clone())
            },
        }
    }
}

pub struct IndexBoxIter {
    boxx: IndexBox,
    cur: Option<MultiIndex>,
}

impl Iterator for IndexBoxIter {
    type Item = MultiIndex;

    fn next(&mut self) -> Option<MultiIndex> {
        let cur = self.cur.clone()?;
        let mut next = cur.clone();
        let d = self.boxx.dim();
        let mut axis = d;
        loop {
            if axis == 0 {
                self.cur = None;
                break;
            }
            axis -= 1;
            if next[axis] < self.boxx.hi[axis] {
                let v = next[axis];
                next.set(axis, v + 1);
                for a in axis + 1..d {
                    next.set(a, self.boxx.lo[a]);
                }
                self.cur = Some(next);
                break;
            }
        }
        Some(cur)
    }
}

/// Element of Υ^d: a 0/1 vector selecting a subset of axes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryMask {
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(bits: Vec<bool>) -> Self {
        assert!(!bits.is_empty());
        Self { bits }
    }

    pub fn dim(&self) -> usize {
        self.bits.len()
    }

    pub fn is_set(&self, axis: usize) -> bool {
        self.bits[axis]
    }

    pub fn support(&self) -> Vec<usize> {
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(j, _)| j)
            .collect()
    }

    pub fn weight(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// (−𝔢)^ε = (−1)^{Σ ε_j}.
    pub fn sign(&self) -> f64 {
        if self.weight().is_multiple_of(2) {
            1.0
        } else {
            -1.0
        }
    }

    pub fn to_multi_index(&self) -> MultiIndex {
        MultiIndex::of(
            &self
                .bits
                .iter()
                .map(|&b| if b { 1 } else { 0 })
                .collect::<Vec<_>>(),
        )
    }

    /// All 2^d masks of dimension d.
    pub fn all(d: usize) -> Vec<BinaryMask> {
        (0..1usize << d)
            .map(|code| BinaryMask::new((0..d).map(|j| code >> j & 1 == 1).collect()))
            .collect()
    }

    /// Masks ε with 𝔰(ε) ⊆ the support of `kappa`.
    pub fn subsets_of_support(kappa: &MultiIndex) -> Vec<BinaryMask> {
        let support = kappa.support();
        let d = kappa.dim();
        (0..1usize << support.len())
            .map(|code| {
                let mut bits = vec![false; d];
                for (i, &j) in support.iter().enumerate() {
                    bits[j] = code >> i & 1 == 1;
                }
                BinaryMask::new(bits)
            })
            .collect()
    }
}

/// An axis-aligned box `corner + edge·I^d` with positive edges. Membership
/// is half-open `[corner, corner+edge)` by default so that dyadic cells tile
/// the cube without double counting; `contains_closed` serves support
/// queries.
#[derive(Clone, Debug, PartialEq)]
pub struct Rect {
    corner: Vec<f64>,
    edge: Vec<f64>,
}

impl Rect {
    pub fn new(corner: Vec<f64>, edge: Vec<f64>) -> Result<Self, IndexError> {
        if corner.is_empty() {
            return Err(IndexError::EmptyIndex);
        }
        if corner.len() != edge.len() {
            return Err(IndexError::DimMismatch(corner.len(), edge.len()));
        }
        if let Some(&bad) = edge.iter().find(|&&e| e.is_nan() || e <= 0.0) {
            return Err(IndexError::NonPositiveEdge(bad));
        }
        Ok(Self { corner, edge })
    }

    pub fn of(corner: &[f64], edge: &[f64]) -> Self {
        Self::new(corner.to_vec(), edge.to_vec()).expect("valid box")
    }

    /// The unit cube I^d.
    pub fn unit(d: usize) -> Self {
        Self::of(&vec![0.0; d], &vec![1.0; d])
    }

    pub fn dim(&self) -> usize {
        self.corner.len()
    }

    pub fn corner(&self) -> &[f64] {
        &self.corner
    }

    pub fn edge(&self) -> &[f64] {
        &self.edge
    }

    pub fn upper(&self) -> Vec<f64> {
        self.corner
            .iter()
            .zip(&self.edge)
            .map(|(c, e)| c + e)
            .collect()
    }

    pub fn volume(&self) -> f64 {
        self.edge.iter().product()
    }

    pub fn contains_half_open(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(&self.corner)
            .zip(&self.edge)
            .all(|((&x, &c), &e)| x >= c && x < c + e)
    }

    pub fn contains_closed(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(&self.corner)
            .zip(&self.edge)
            .all(|((&x, &c), &e)| x >= c && x <= c + e)
    }

    /// Whether `self ⊆ other` as closed boxes, with `tol` slack per face.
    pub fn subset_of(&self, other: &Rect, tol: f64) -> bool {
        self.corner
            .iter()
            .zip(&self.edge)
            .zip(other.corner.iter().zip(&other.edge))
            .all(|((&c, &e), (&oc, &oe))| c >= oc - tol && c + e <= oc + oe + tol)
    }

    /// Intersection as a closed box; `None` when the interiors are disjoint.
    pub fn intersect(&self, other: &Rect) -> Option<Rect> {
        let mut corner = Vec::with_capacity(self.dim());
        let mut edge = Vec::with_capacity(self.dim());
        for j in 0..self.dim() {
            let lo = self.corner[j].max(other.corner[j]);
            let hi = (self.corner[j] + self.edge[j]).min(other.corner[j] + other.edge[j]);
            if hi <= lo {
                return None;
            }
            corner.push(lo);
            edge.push(hi - lo);
        }
        Some(Rect { corner, edge })
    }

    /// The box grown by `pad_j ≥ 0` on both faces of each axis.
    pub fn inflate(&self, pad: &[f64]) -> Rect {
        Rect {
            corner: self
                .corner
                .iter()
                .zip(pad)
                .map(|(c, p)| c - p)
                .collect(),
            edge: self
                .edge
                .iter()
                .zip(pad)
                .map(|(e, p)| e + 2.0 * p)
                .collect(),
        }
    }
}

/// The dyadic cell Q_{κ,ν} = 2^{-κ}ν + 2^{-κ}I^d.
pub fn dyadic_cell(kappa: &MultiIndex, nu: &MultiIndex) -> Rect {
    assert!(kappa.is_nonnegative(), "dyadic level must be nonnegative");
    assert_eq!(kappa.dim(), nu.dim());
    let h = kappa.pow2_neg();
    let corner: Vec<f64> = nu
        .entries()
        .iter()
        .zip(&h)
        .map(|(&n, &h)| n as f64 * h)
        .collect();
    Rect::of(&corner, &h)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn support_set_matches_definition() {
        assert_eq!(MultiIndex::of(&[0, 3, 0]).support(), vec![1]);
        assert!(MultiIndex::of(&[0, 0]).support().is_empty());
        assert_eq!(MultiIndex::of(&[1, 1, 1]).support(), vec![0, 1, 2]);
    }

    #[test]
    fn indicator_vector_round_trip() {
        let chi = indicator_vector(&[0, 2], 3).unwrap();
        assert_eq!(chi, MultiIndex::of(&[1, 0, 1]));
        assert_eq!(chi.support(), vec![0, 2]);
        assert_eq!(indicator_vector(&[], 2).unwrap(), MultiIndex::zeros(2));
        assert_eq!(indicator_vector(&[0, 1], 2).unwrap(), MultiIndex::ones(2));
        assert!(indicator_vector(&[3], 3).is_err());
    }

    #[test]
    fn min_coord_examples() {
        assert_eq!(min_coord(&[3.0, 1.0, 2.0]), 1.0);
        assert_eq!(min_coord(&[5.0]), 5.0);
        assert_eq!(min_coord(&[0.0, 7.0]), 0.0);
    }

    #[test]
    fn dyadic_cell_examples() {
        let q = dyadic_cell(&MultiIndex::of(&[0]), &MultiIndex::of(&[0]));
        assert_eq!(q, Rect::of(&[0.0], &[1.0]));
        let q = dyadic_cell(&MultiIndex::of(&[2]), &MultiIndex::of(&[1]));
        assert_eq!(q, Rect::of(&[0.25], &[0.25]));
        let q = dyadic_cell(&MultiIndex::of(&[1, 2]), &MultiIndex::of(&[1, 3]));
        assert_eq!(q, Rect::of(&[0.5, 0.75], &[0.5, 0.25]));
    }

    #[test]
    fn index_box_iteration_and_count() {
        let b = IndexBox::of(&[-1, 0], &[1, 1]);
        let all: Vec<_> = b.iter().collect();
        assert_eq!(all.len(), b.count());
        assert_eq!(all.len(), 6);
        assert_eq!(all[0], MultiIndex::of(&[-1, 0]));
        assert_eq!(all[1], MultiIndex::of(&[-1, 1]));
        assert_eq!(all[5], MultiIndex::of(&[1, 1]));
        for (i, v) in all.iter().enumerate() {
            assert_eq!(b.offset(v), Some(i));
        }
        assert!(IndexBox::of(&[2], &[1]).is_empty());
        assert_eq!(IndexBox::of(&[2], &[1]).iter().count(), 0);
    }

    #[test]
    fn mask_enumeration_is_bijective() {
        for d in 1..=6 {
            let all = BinaryMask::all(d);
            assert_eq!(all.len(), 1 << d);
            let mut seen: Vec<Vec<usize>> = all.iter().map(|m| m.support()).collect();
            seen.sort();
            seen.dedup();
            assert_eq!(seen.len(), 1 << d);
            for m in &all {
                let chi = indicator_vector(&m.support(), d).unwrap();
                assert_eq!(chi, m.to_multi_index());
            }
        }
    }

    #[test]
    fn masks_restricted_to_support() {
        let kappa = MultiIndex::of(&[2, 0, 1]);
        let subs = BinaryMask::subsets_of_support(&kappa);
        assert_eq!(subs.len(), 4);
        for m in subs {
            assert!(!m.is_set(1));
        }
    }

    #[test]
    fn rect_membership_conventions() {
        let r = Rect::of(&[0.0, 0.0], &[1.0, 1.0]);
        assert!(r.contains_half_open(&[0.0, 0.5]));
        assert!(!r.contains_half_open(&[1.0, 0.5]));
        assert!(r.contains_closed(&[1.0, 1.0]));
        assert!(Rect::new(vec![0.0], vec![0.0]).is_err());
    }
}
