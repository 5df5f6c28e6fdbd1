//! Orthonormal polynomial bases on boxes, the local L² projector, tensor
//! lifting of one-dimensional operators, and exact polynomial calculus.

use std::sync::{Arc, OnceLock};

use thiserror::Error;

use crate::index::{IndexBox, MultiIndex, Rect};
use crate::oracle::{FnOracle, Oracle, SmoothnessHint};
use crate::quad::gauss_unit;
use crate::ratpoly::{self, Rat};

#[derive(Debug, Error)]
pub enum PolyError {
    #[error("basis degree {0} exceeds the cached table (max {MAX_BASIS_DEGREE})")]
    DegreeTooLarge(usize),
    #[error("degenerate box: {0}")]
    DegenerateBox(String),
    #[error("dimension mismatch: {0} vs {1}")]
    DimMismatch(usize, usize),
    #[error("negative derivative order {0}")]
    NegativeOrder(i64),
}

pub const MAX_BASIS_DEGREE: usize = 10;

// ---------------------------------------------------------------------------
// Orthonormal basis on the unit interval
// ---------------------------------------------------------------------------

/// Shifted-Legendre-type orthonormal system {π_0..π_l} on I, built by
/// Gram–Schmidt over the monomials in exact rational arithmetic (floating
/// conversion happens once, per coefficient). π_0 = 1 and deg π_i = i.
#[derive(Clone, Debug)]
pub struct OrthoBasis1D {
    degree: usize,
    /// coeffs[i] = monomial coefficients of π_i on [0,1], ascending.
    coeffs: Vec<Vec<f64>>,
}

struct RationalBasis {
    /// Monic orthogonal polynomials from Gram–Schmidt over the monomials.
    monic: Vec<Vec<Rat>>,
    /// Their squared L²(I) norms.
    norms2: Vec<Rat>,
    /// Normalized coefficient tables in floating point.
    float: Vec<Vec<f64>>,
}

fn build_basis_tables() -> RationalBasis {
    let mut monic: Vec<Vec<Rat>> = Vec::with_capacity(MAX_BASIS_DEGREE + 1);
    let mut norms2: Vec<Rat> = Vec::with_capacity(MAX_BASIS_DEGREE + 1);
    for n in 0..=MAX_BASIS_DEGREE {
        let mut q = vec![Rat::from_integer(0.into()); n + 1];
        q[n] = Rat::from_integer(1.into());
        for i in 0..n {
            let proj = ratpoly::inner_unit(&q, &monic[i]) / norms2[i].clone();
            q = ratpoly::sub(&q, &ratpoly::scale(&monic[i], &proj));
        }
        norms2.push(ratpoly::inner_unit(&q, &q));
        monic.push(q);
    }
    let float = monic
        .iter()
        .zip(&norms2)
        .map(|(q, n2)| {
            let inv = 1.0 / ratpoly::rat_to_f64(n2).sqrt();
            ratpoly::to_f64_vec(q).iter().map(|c| c * inv).collect()
        })
        .collect();
    RationalBasis {
        monic,
        norms2,
        float,
    }
}

fn rational_basis() -> &'static RationalBasis {
    static TABLES: OnceLock<RationalBasis> = OnceLock::new();
    TABLES.get_or_init(build_basis_tables)
}

fn basis_tables() -> &'static Vec<Vec<f64>> {
    &rational_basis().float
}

impl OrthoBasis1D {
    pub fn new(degree: usize) -> Result<Self, PolyError> {
        if degree > MAX_BASIS_DEGREE {
            return Err(PolyError::DegreeTooLarge(degree));
        }
        Ok(Self {
            degree,
            coeffs: basis_tables()[..=degree].to_vec(),
        })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Monomial coefficients of π_i on the unit interval.
    pub fn monomial_coeffs(&self, i: usize) -> &[f64] {
        &self.coeffs[i]
    }

    pub fn eval(&self, i: usize, u: f64) -> f64 {
        horner(&self.coeffs[i], u)
    }

    /// Values π_0(u)..π_l(u).
    pub fn eval_all(&self, u: f64, out: &mut [f64]) {
        for (slot, coeffs) in out.iter_mut().zip(&self.coeffs) {
            *slot = horner(coeffs, u);
        }
    }

    /// Gram matrix entries ⟨π_i, π_j⟩ with the integral taken in exact
    /// rational arithmetic; only the two normalization factors are floats.
    pub fn gram_exact(l: usize) -> Result<Vec<Vec<f64>>, PolyError> {
        if l > MAX_BASIS_DEGREE {
            return Err(PolyError::DegreeTooLarge(l));
        }
        let rb = rational_basis();
        let mut gram = vec![vec![0.0; l + 1]; l + 1];
        for i in 0..=l {
            for j in 0..=l {
                let inner = ratpoly::inner_unit(&rb.monic[i], &rb.monic[j]);
                let scale = (ratpoly::rat_to_f64(&rb.norms2[i])
                    * ratpoly::rat_to_f64(&rb.norms2[j]))
                .sqrt();
                gram[i][j] = ratpoly::rat_to_f64(&inner) / scale;
            }
        }
        Ok(gram)
    }
}

fn horner(coeffs: &[f64], x: f64) -> f64 {
    let mut acc = 0.0;
    for c in coeffs.iter().rev() {
        acc = acc * x + c;
    }
    acc
}

pub fn ortho_basis(l: usize) -> Result<OrthoBasis1D, PolyError> {
    OrthoBasis1D::new(l)
}

// ---------------------------------------------------------------------------
// Dense coefficient tensors
// ---------------------------------------------------------------------------

/// Dense row-major tensor indexed by λ ∈ ℤ_+^d(deg) (last axis fastest).
#[derive(Clone, Debug, PartialEq)]
pub struct CoeffTensor {
    dims: Vec<usize>,
    data: Vec<f64>,
}

impl CoeffTensor {
    pub fn zeros(dims: Vec<usize>) -> Self {
        let len = dims.iter().product();
        Self {
            dims,
            data: vec![0.0; len],
        }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn offset(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.dims.len());
        let mut off = 0;
        for (i, &k) in idx.iter().enumerate() {
            debug_assert!(k < self.dims[i]);
            off = off * self.dims[i] + k;
        }
        off
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.data[self.offset(idx)]
    }

    pub fn set(&mut self, idx: &[usize], v: f64) {
        let off = self.offset(idx);
        self.data[off] = v;
    }

    /// Iterate (multi-index, value) pairs in row-major order.
    pub fn iter_indexed(&self) -> impl Iterator<Item = (Vec<usize>, f64)> + '_ {
        let dims = self.dims.clone();
        self.data.iter().enumerate().map(move |(off, &v)| {
            let mut idx = vec![0usize; dims.len()];
            let mut rem = off;
            for j in (0..dims.len()).rev() {
                idx[j] = rem % dims[j];
                rem /= dims[j];
            }
            (idx, v)
        })
    }

    /// Mode-`axis` product with the matrix `m[old][new]`.
    pub fn apply_axis_matrix(&self, axis: usize, m: &[Vec<f64>]) -> CoeffTensor {
        let d = self.dims.len();
        assert!(axis < d);
        assert_eq!(m.len(), self.dims[axis]);
        let new_len = m.first().map_or(0, |r| r.len());
        let mut dims = self.dims.clone();
        dims[axis] = new_len;
        let mut out = CoeffTensor::zeros(dims);
        let inner: usize = self.dims[axis + 1..].iter().product();
        let outer: usize = self.dims[..axis].iter().product();
        let old_len = self.dims[axis];
        for o in 0..outer {
            for (k_old, row) in m.iter().enumerate() {
                for i in 0..inner {
                    let v = self.data[(o * old_len + k_old) * inner + i];
                    if v == 0.0 {
                        continue;
                    }
                    for (k_new, &mk) in row.iter().enumerate() {
                        out.data[(o * new_len + k_new) * inner + i] += v * mk;
                    }
                }
            }
        }
        out
    }

    pub fn l2_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

// ---------------------------------------------------------------------------
// Polynomials
// ---------------------------------------------------------------------------

/// Polynomial in 𝒫^{d,l} stored over the orthonormal tensor basis
/// π_λ^d(δ^{-1}(x - x⁰)) attached to a reference box. Evaluation is valid on
/// all of ℝ^d (the basis functions are polynomials).
#[derive(Clone, Debug)]
pub struct TensorPoly {
    rect: Rect,
    degree: MultiIndex,
    coeffs: CoeffTensor,
}

impl TensorPoly {
    pub fn zero(rect: Rect, degree: MultiIndex) -> Self {
        let dims: Vec<usize> = degree.entries().iter().map(|&l| l as usize + 1).collect();
        Self {
            rect,
            degree,
            coeffs: CoeffTensor::zeros(dims),
        }
    }

    pub fn from_coeffs(rect: Rect, degree: MultiIndex, coeffs: CoeffTensor) -> Self {
        Self {
            rect,
            degree,
            coeffs,
        }
    }

    pub fn rect(&self) -> &Rect {
        &self.rect
    }

    pub fn degree(&self) -> &MultiIndex {
        &self.degree
    }

    pub fn coeffs(&self) -> &CoeffTensor {
        &self.coeffs
    }

    pub fn dim(&self) -> usize {
        self.degree.dim()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let d = self.dim();
        let basis = basis_tables();
        let mut vals: Vec<Vec<f64>> = Vec::with_capacity(d);
        for j in 0..d {
            let u = (x[j] - self.rect.corner()[j]) / self.rect.edge()[j];
            let deg = self.degree[j] as usize;
            let mut col = vec![0.0; deg + 1];
            for (i, slot) in col.iter_mut().enumerate() {
                *slot = horner(&basis[i], u);
            }
            vals.push(col);
        }
        let mut acc = 0.0;
        for (idx, c) in self.coeffs.iter_indexed() {
            if c == 0.0 {
                continue;
            }
            let mut prod = c;
            for j in 0..d {
                prod *= vals[j][idx[j]];
            }
            acc += prod;
        }
        acc
    }

    /// ‖·‖_{L²(rect)} from the coefficient vector: the basis is orthonormal
    /// in the normalized variable, so the norm is δ^{𝔢/2}·|c|₂.
    pub fn l2_norm_on_box(&self) -> f64 {
        self.rect.volume().sqrt() * self.coeffs.l2_norm()
    }

    /// Convert to global monomial coefficients.
    pub fn to_monomial(&self) -> MonomialPoly {
        let d = self.dim();
        let mut t = self.coeffs.clone();
        let basis = basis_tables();
        for j in 0..d {
            let deg = self.degree[j] as usize;
            // π_i(u) with u = (x - c)/δ = a + b·x, a = -c/δ, b = 1/δ.
            let a = -self.rect.corner()[j] / self.rect.edge()[j];
            let b = 1.0 / self.rect.edge()[j];
            let m: Vec<Vec<f64>> = (0..=deg)
                .map(|i| compose_affine_1d(&basis[i], a, b, deg))
                .collect();
            t = t.apply_axis_matrix(j, &m);
        }
        MonomialPoly {
            degree: self.degree.clone(),
            coeffs: t,
        }
    }
}

/// Coefficients of p(a + b·u) given the coefficients of p(u), padded or
/// truncated to degree `deg_out`.
fn compose_affine_1d(coeffs: &[f64], a: f64, b: f64, deg_out: usize) -> Vec<f64> {
    let mut out = vec![0.0; deg_out + 1];
    for (k, &c) in coeffs.iter().enumerate() {
        if c == 0.0 {
            continue;
        }
        let mut binom = 1.0f64;
        for i in 0..=k {
            if i <= deg_out {
                out[i] += c * binom * a.powi((k - i) as i32) * b.powi(i as i32);
            }
            binom = binom * (k - i) as f64 / (i + 1) as f64;
        }
    }
    out
}

/// Polynomial stored over plain monomials y^λ, in whatever coordinates the
/// caller fixes: global for piecewise families, local for compiled cells.
#[derive(Clone, Debug, PartialEq)]
pub struct MonomialPoly {
    degree: MultiIndex,
    coeffs: CoeffTensor,
}

impl MonomialPoly {
    pub fn zero(degree: MultiIndex) -> Self {
        let dims: Vec<usize> = degree.entries().iter().map(|&l| l as usize + 1).collect();
        Self {
            degree,
            coeffs: CoeffTensor::zeros(dims),
        }
    }

    pub fn constant(d: usize, v: f64) -> Self {
        let mut p = Self::zero(MultiIndex::zeros(d));
        p.coeffs.data_mut()[0] = v;
        p
    }

    pub fn from_coeffs(degree: MultiIndex, coeffs: CoeffTensor) -> Self {
        Self { degree, coeffs }
    }

    pub fn degree(&self) -> &MultiIndex {
        &self.degree
    }

    pub fn coeffs(&self) -> &CoeffTensor {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut CoeffTensor {
        &mut self.coeffs
    }

    pub fn dim(&self) -> usize {
        self.degree.dim()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        eval_rec(self.coeffs.data(), self.coeffs.dims(), x)
    }

    pub fn scale(&self, c: f64) -> MonomialPoly {
        let mut out = self.clone();
        for v in out.coeffs.data_mut() {
            *v *= c;
        }
        out
    }

    pub fn add(&self, other: &MonomialPoly) -> MonomialPoly {
        let d = self.dim();
        assert_eq!(d, other.dim());
        let deg = self.degree.zip(&other.degree, i64::max);
        let mut out = MonomialPoly::zero(deg);
        for (idx, v) in self.coeffs.iter_indexed() {
            if v != 0.0 {
                let off = out.coeffs.offset(&idx);
                out.coeffs.data_mut()[off] += v;
            }
        }
        for (idx, v) in other.coeffs.iter_indexed() {
            if v != 0.0 {
                let off = out.coeffs.offset(&idx);
                out.coeffs.data_mut()[off] += v;
            }
        }
        out
    }

    pub fn mul(&self, other: &MonomialPoly) -> MonomialPoly {
        let d = self.dim();
        assert_eq!(d, other.dim());
        let deg = self.degree.zip(&other.degree, |a, b| a + b);
        let mut out = MonomialPoly::zero(deg);
        for (ia, va) in self.coeffs.iter_indexed() {
            if va == 0.0 {
                continue;
            }
            for (ib, vb) in other.coeffs.iter_indexed() {
                if vb == 0.0 {
                    continue;
                }
                let idx: Vec<usize> = ia.iter().zip(&ib).map(|(a, b)| a + b).collect();
                let off = out.coeffs.offset(&idx);
                out.coeffs.data_mut()[off] += va * vb;
            }
        }
        out
    }

    /// Exact mixed derivative 𝒟^λ; differentiation beyond the degree yields
    /// the zero polynomial.
    pub fn differentiate(&self, lambda: &MultiIndex) -> Result<MonomialPoly, PolyError> {
        if let Some(&bad) = lambda.entries().iter().find(|&&v| v < 0) {
            return Err(PolyError::NegativeOrder(bad));
        }
        let d = self.dim();
        let mut t = self.coeffs.clone();
        let mut deg = self.degree.clone();
        for j in 0..d {
            let lam = lambda[j] as usize;
            if lam == 0 {
                continue;
            }
            let old = deg[j] as usize;
            let new_deg = old.saturating_sub(lam);
            let m: Vec<Vec<f64>> = (0..=old)
                .map(|k| {
                    let mut row = vec![0.0; new_deg + 1];
                    if k >= lam {
                        let mut fac = 1.0;
                        for i in 0..lam {
                            fac *= (k - i) as f64;
                        }
                        row[k - lam] = fac;
                    }
                    row
                })
                .collect();
            t = t.apply_axis_matrix(j, &m);
            deg.set(j, new_deg as i64);
        }
        Ok(MonomialPoly {
            degree: deg,
            coeffs: t,
        })
    }

    /// Tensor product of one-dimensional coefficient vectors:
    /// coeffs[λ] = Π_j pieces[j][λ_j].
    pub fn tensor_outer(pieces: &[&[f64]]) -> MonomialPoly {
        let degree = MultiIndex::of(
            &pieces
                .iter()
                .map(|p| p.len() as i64 - 1)
                .collect::<Vec<_>>(),
        );
        let mut out = MonomialPoly::zero(degree);
        let dims = out.coeffs.dims().to_vec();
        let idx_list: Vec<Vec<usize>> = CoeffTensor::zeros(dims)
            .iter_indexed()
            .map(|(i, _)| i)
            .collect();
        for idx in idx_list {
            let v: f64 = idx.iter().zip(pieces).map(|(&i, p)| p[i]).product();
            out.coeffs.set(&idx, v);
        }
        out
    }

    /// Coefficients of p(a + b·u), one affine substitution per axis.
    pub fn compose_affine(&self, a: &[f64], b: &[f64]) -> MonomialPoly {
        let d = self.dim();
        let mut t = self.coeffs.clone();
        for j in 0..d {
            let deg = self.degree[j] as usize;
            let m: Vec<Vec<f64>> = (0..=deg)
                .map(|k| {
                    let mut e = vec![0.0; k + 1];
                    e[k] = 1.0;
                    compose_affine_1d(&e, a[j], b[j], deg)
                })
                .collect();
            t = t.apply_axis_matrix(j, &m);
        }
        MonomialPoly {
            degree: self.degree.clone(),
            coeffs: t,
        }
    }
}

fn eval_rec(data: &[f64], dims: &[usize], x: &[f64]) -> f64 {
    if dims.len() == 1 {
        let mut acc = 0.0;
        for c in data.iter().rev() {
            acc = acc * x[0] + c;
        }
        return acc;
    }
    let inner: usize = dims[1..].iter().product();
    let mut acc = 0.0;
    for k in (0..dims[0]).rev() {
        acc = acc * x[0] + eval_rec(&data[k * inner..(k + 1) * inner], &dims[1..], &x[1..]);
    }
    acc
}

// ---------------------------------------------------------------------------
// Local L² projector
// ---------------------------------------------------------------------------

/// Gauss order request for a projection.
#[derive(Clone, Debug)]
pub struct QuadSpec {
    pub nodes: Vec<usize>,
}

impl QuadSpec {
    pub fn uniform(d: usize, nodes: usize) -> Self {
        Self {
            nodes: vec![nodes.max(1); d],
        }
    }

    /// Default policy: polynomial oracles get exactness for their declared
    /// degree against the basis; smooth oracles get max(l)+3 nodes per axis.
    pub fn auto(hint: &SmoothnessHint, degree: &MultiIndex) -> Self {
        let d = degree.dim();
        match hint {
            SmoothnessHint::Polynomial(deg_f) => Self {
                nodes: (0..d)
                    .map(|j| {
                        let total = (deg_f[j].max(0) + degree[j].max(0)) as usize;
                        total / 2 + 1
                    })
                    .collect(),
            },
            _ => {
                let base = degree.max_entry().max(0) as usize + 3;
                Self::uniform(d, base)
            }
        }
    }

    /// A warning when the requested order cannot integrate a declared
    /// polynomial oracle exactly against the basis.
    pub fn exactness_warning(&self, hint: &SmoothnessHint, degree: &MultiIndex) -> Option<String> {
        if let SmoothnessHint::Polynomial(deg_f) = hint {
            for j in 0..degree.dim() {
                let needed = (deg_f[j].max(0) + degree[j].max(0)) as usize / 2 + 1;
                if self.nodes[j] < needed {
                    return Some(format!(
                        "quadrature order {} on axis {} below polynomial exactness {}",
                        self.nodes[j],
                        j + 1,
                        needed
                    ));
                }
            }
        }
        None
    }
}

/// The local projector onto 𝒫^{d,l} over `rect`: coefficients
/// c_λ = ∫_{I^d} f(x⁰+δu) π_λ^d(u) du by tensor Gauss–Legendre. Reproduces
/// polynomials of degree ≤ l exactly up to quadrature rounding.
pub fn project(
    f: &dyn Oracle,
    rect: &Rect,
    degree: &MultiIndex,
    quad: &QuadSpec,
) -> Result<TensorPoly, PolyError> {
    let d = degree.dim();
    if rect.dim() != d {
        return Err(PolyError::DimMismatch(rect.dim(), d));
    }
    if rect.edge().iter().any(|&e| e.is_nan() || e <= 0.0 || !e.is_finite()) {
        return Err(PolyError::DegenerateBox(format!("{rect:?}")));
    }
    let max_deg = degree.max_entry();
    if max_deg < 0 {
        return Err(PolyError::NegativeOrder(max_deg));
    }
    if max_deg as usize > MAX_BASIS_DEGREE {
        return Err(PolyError::DegreeTooLarge(max_deg as usize));
    }
    let basis = basis_tables();
    let dims: Vec<usize> = degree.entries().iter().map(|&l| l as usize + 1).collect();
    let n_coeffs: usize = dims.iter().product();
    let mut coeffs = CoeffTensor::zeros(dims.clone());

    // Per-axis tables: basis values at the Gauss nodes of the unit interval.
    let rules: Vec<_> = quad.nodes.iter().map(|&n| gauss_unit(n)).collect();
    let tables: Vec<Vec<Vec<f64>>> = (0..d)
        .map(|j| {
            rules[j]
                .nodes
                .iter()
                .map(|&u| (0..dims[j]).map(|i| horner(&basis[i], u)).collect())
                .collect()
        })
        .collect();

    // Precompute the coefficient multi-indices once.
    let coeff_idx: Vec<Vec<usize>> = {
        let template = CoeffTensor::zeros(dims.clone());
        template.iter_indexed().map(|(idx, _)| idx).collect()
    };

    let mut idx = vec![0usize; d];
    let mut point = vec![0.0; d];
    loop {
        let mut w = 1.0;
        for j in 0..d {
            point[j] = rect.corner()[j] + rect.edge()[j] * rules[j].nodes[idx[j]];
            w *= rules[j].weights[idx[j]];
        }
        let fv = f.eval(&point);
        if fv != 0.0 {
            let wf = w * fv;
            for (off, cidx) in coeff_idx.iter().enumerate().take(n_coeffs) {
                let mut prod = wf;
                for j in 0..d {
                    prod *= tables[j][idx[j]][cidx[j]];
                }
                coeffs.data_mut()[off] += prod;
            }
        }
        let mut axis = d;
        loop {
            if axis == 0 {
                return Ok(TensorPoly::from_coeffs(
                    rect.clone(),
                    degree.clone(),
                    coeffs,
                ));
            }
            axis -= 1;
            idx[axis] += 1;
            if idx[axis] < quad.nodes[axis] {
                break;
            }
            idx[axis] = 0;
        }
    }
}

// ---------------------------------------------------------------------------
// Tensor lifting of 1-D operators
// ---------------------------------------------------------------------------

/// Abstract one-dimensional linear operator acting on functions of a single
/// variable, liftable to any axis of a d-variate function.
#[derive(Clone)]
pub enum AxisOperator {
    Identity,
    /// L² projector onto 𝒫^{1,deg} over [corner, corner+edge].
    Projector {
        corner: f64,
        edge: f64,
        degree: usize,
        quad_nodes: usize,
    },
    /// Indicator of [mask_corner, mask_corner+mask_edge) times a projector.
    MaskedProjector {
        corner: f64,
        edge: f64,
        degree: usize,
        quad_nodes: usize,
        mask_corner: f64,
        mask_edge: f64,
    },
    /// Difference A - B of two operators.
    Sub(Box<AxisOperator>, Box<AxisOperator>),
    /// Composition A ∘ B.
    Compose(Box<AxisOperator>, Box<AxisOperator>),
}

impl AxisOperator {
    pub fn projector(corner: f64, edge: f64, degree: usize) -> Self {
        AxisOperator::Projector {
            corner,
            edge,
            degree,
            quad_nodes: degree + 3,
        }
    }

    pub fn masked_projector(
        corner: f64,
        edge: f64,
        degree: usize,
        mask_corner: f64,
        mask_edge: f64,
    ) -> Self {
        AxisOperator::MaskedProjector {
            corner,
            edge,
            degree,
            quad_nodes: degree + 3,
            mask_corner,
            mask_edge,
        }
    }

    /// E - self, the complementary operator.
    pub fn complement(self) -> Self {
        AxisOperator::Sub(Box::new(AxisOperator::Identity), Box::new(self))
    }

    /// Apply to a 1-D slice at the point y.
    pub fn apply(&self, slice: &dyn Fn(f64) -> f64, y: f64) -> f64 {
        match self {
            AxisOperator::Identity => slice(y),
            AxisOperator::Projector {
                corner,
                edge,
                degree,
                quad_nodes,
            } => project_slice(slice, *corner, *edge, *degree, *quad_nodes, y),
            AxisOperator::MaskedProjector {
                corner,
                edge,
                degree,
                quad_nodes,
                mask_corner,
                mask_edge,
            } => {
                if y < *mask_corner || y >= mask_corner + mask_edge {
                    0.0
                } else {
                    project_slice(slice, *corner, *edge, *degree, *quad_nodes, y)
                }
            }
            AxisOperator::Sub(a, b) => a.apply(slice, y) - b.apply(slice, y),
            AxisOperator::Compose(a, b) => {
                let inner = |z: f64| b.apply(slice, z);
                a.apply(&inner, y)
            }
        }
    }
}

fn project_slice(
    slice: &dyn Fn(f64) -> f64,
    corner: f64,
    edge: f64,
    degree: usize,
    quad_nodes: usize,
    y: f64,
) -> f64 {
    let basis = basis_tables();
    let rule = gauss_unit(quad_nodes);
    let mut coeff = vec![0.0; degree + 1];
    for (u, w) in rule.nodes.iter().zip(&rule.weights) {
        let fv = slice(corner + edge * u);
        for (i, c) in coeff.iter_mut().enumerate() {
            *c += w * fv * horner(&basis[i], *u);
        }
    }
    let uy = (y - corner) / edge;
    coeff
        .iter()
        .enumerate()
        .map(|(i, c)| c * horner(&basis[i], uy))
        .sum()
}

/// Lift `ops[j]` to axis j and compose: (V_1(op_1) … V_d(op_d)) f. The
/// lifted operators on distinct axes commute, so the application order is
/// immaterial (and tested).
pub fn tensor_apply(ops: Vec<AxisOperator>, f: Arc<dyn Oracle>) -> Arc<dyn Oracle> {
    tensor_apply_ordered(ops, f, None)
}

/// Same as [`tensor_apply`] with an explicit application order.
pub fn tensor_apply_ordered(
    ops: Vec<AxisOperator>,
    f: Arc<dyn Oracle>,
    order: Option<Vec<usize>>,
) -> Arc<dyn Oracle> {
    let d = f.dim();
    assert_eq!(ops.len(), d);
    let order = order.unwrap_or_else(|| (0..d).collect());
    let mut cur = f;
    for &axis in &order {
        let op = ops[axis].clone();
        if matches!(op, AxisOperator::Identity) {
            continue;
        }
        let prev = cur.clone();
        cur = Arc::new(FnOracle::new(d, move |x: &[f64]| {
            let prev = prev.clone();
            let base = x.to_vec();
            let slice = move |y: f64| {
                let mut p = base.clone();
                p[axis] = y;
                prev.eval(&p)
            };
            op.apply(&slice, x[axis])
        }));
    }
    cur
}

/// χ_{maskBox}(x) · (P_{projBox}^{d,l} f)(x), evaluated directly from the
/// d-dimensional projection. Pairs with the per-axis masked-projector route
/// through [`tensor_apply`].
pub struct MaskedProjection {
    pub poly: TensorPoly,
    pub mask: Rect,
}

impl MaskedProjection {
    pub fn eval(&self, x: &[f64]) -> f64 {
        if self.mask.contains_half_open(x) {
            self.poly.eval(x)
        } else {
            0.0
        }
    }
}

pub fn masked_project(
    f: &dyn Oracle,
    proj_box: &Rect,
    mask_box: &Rect,
    degree: &MultiIndex,
    quad: &QuadSpec,
) -> Result<MaskedProjection, PolyError> {
    let poly = project(f, proj_box, degree, quad)?;
    Ok(MaskedProjection {
        poly,
        mask: mask_box.clone(),
    })
}

/// Iterate ℤ_+^d(l) as an IndexBox.
pub fn degree_box(l: &MultiIndex) -> IndexBox {
    IndexBox::new(MultiIndex::zeros(l.dim()), l.clone()).expect("matching dims")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::index::MultiIndex;
    use crate::quad::tensor_rule;

    #[test]
    fn basis_starts_with_constant_and_sqrt3() {
        let b = OrthoBasis1D::new(3).unwrap();
        assert_eq!(b.monomial_coeffs(0), &[1.0]);
        // π_1 = √3 (2x - 1)
        let c = b.monomial_coeffs(1);
        let s3 = 3f64.sqrt();
        assert!((c[0] + s3).abs() < 1e-14);
        assert!((c[1] - 2.0 * s3).abs() < 1e-14);
    }

    #[test]
    fn gram_matrix_is_identity() {
        let gram = OrthoBasis1D::gram_exact(MAX_BASIS_DEGREE).unwrap();
        for (i, row) in gram.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((v - want).abs() < 1e-12, "i={i} j={j}: {v}");
            }
        }
    }

    #[test]
    fn quadrature_gram_matches_at_moderate_degree() {
        let b = OrthoBasis1D::new(6).unwrap();
        let rule = gauss_unit(8);
        for i in 0..=6usize {
            for j in 0..=6usize {
                let val: f64 = rule
                    .nodes
                    .iter()
                    .zip(&rule.weights)
                    .map(|(&u, &w)| w * b.eval(i, u) * b.eval(j, u))
                    .sum();
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((val - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn projection_of_square_is_best_linear_fit() {
        let f = FnOracle::with_hint(
            1,
            SmoothnessHint::Polynomial(MultiIndex::of(&[2])),
            |x: &[f64]| x[0] * x[0],
        );
        let deg = MultiIndex::of(&[1]);
        let quad = QuadSpec::auto(&f.hint(), &deg);
        let p = project(&f, &Rect::unit(1), &deg, &quad).unwrap();
        // Best L² linear fit of x² on I is x - 1/6.
        for (x, want) in [(0.0, -1.0 / 6.0), (1.0, 5.0 / 6.0), (0.5, 1.0 / 3.0)] {
            assert!((p.eval(&[x]) - want).abs() < 1e-13, "x={x}");
        }
        let mono = p.to_monomial();
        assert!((mono.eval(&[1.0]) - 5.0 / 6.0).abs() < 1e-13);
    }

    #[test]
    fn projector_reproduces_polynomials() {
        let f = FnOracle::with_hint(
            1,
            SmoothnessHint::Polynomial(MultiIndex::of(&[2])),
            |x: &[f64]| 1.0 - 2.0 * x[0] + 3.0 * x[0] * x[0],
        );
        let deg = MultiIndex::of(&[2]);
        let rect = Rect::of(&[0.25], &[0.5]);
        let p = project(&f, &rect, &deg, &QuadSpec::auto(&f.hint(), &deg)).unwrap();
        for i in 0..=10 {
            let x = i as f64 / 10.0;
            assert!((p.eval(&[x]) - f.eval(&[x])).abs() < 1e-12);
        }
    }

    #[test]
    fn projector_kernel_contains_higher_basis() {
        // π_{l+1} mapped to the box is orthogonal to 𝒫^{1,l}.
        let rect = Rect::of(&[0.5], &[0.25]);
        let rect2 = rect.clone();
        let f = FnOracle::new(1, move |x: &[f64]| {
            let u = (x[0] - rect2.corner()[0]) / rect2.edge()[0];
            OrthoBasis1D::new(3).unwrap().eval(3, u)
        });
        let deg = MultiIndex::of(&[2]);
        let p = project(&f, &rect, &deg, &QuadSpec::uniform(1, 8)).unwrap();
        assert!(p.coeffs().l2_norm() < 1e-12);
    }

    #[test]
    fn l2_norm_identity_on_box() {
        let f = FnOracle::new(2, |x: &[f64]| (x[0] + 0.3).sin() * (2.0 * x[1]).cos());
        let rect = Rect::of(&[0.1, 0.2], &[0.5, 0.25]);
        let deg = MultiIndex::of(&[3, 3]);
        let p = project(&f, &rect, &deg, &QuadSpec::uniform(2, 8)).unwrap();
        let direct = {
            let orders = vec![10usize, 10];
            let mut acc = 0.0;
            tensor_rule(&rect, &orders, |x, w| {
                let v = p.eval(x);
                acc += w * v * v;
            });
            acc.sqrt()
        };
        assert!((p.l2_norm_on_box() - direct).abs() < 1e-10);
    }

    #[test]
    fn monomial_calculus() {
        let p = {
            let mut t = MonomialPoly::zero(MultiIndex::of(&[1, 0]));
            t.coeffs.set(&[0, 0], -1.0 / 6.0);
            t.coeffs.set(&[1, 0], 1.0);
            t
        };
        assert!((p.eval(&[1.0, 7.0]) - 5.0 / 6.0).abs() < 1e-15);
        let dp = p.differentiate(&MultiIndex::of(&[1, 0])).unwrap();
        assert!((dp.eval(&[0.3, 0.4]) - 1.0).abs() < 1e-15);
        let ddp = p.differentiate(&MultiIndex::of(&[2, 0])).unwrap();
        assert_eq!(ddp.coeffs().l2_norm(), 0.0);
        let dc = MonomialPoly::constant(2, 5.0)
            .differentiate(&MultiIndex::of(&[1, 0]))
            .unwrap();
        assert_eq!(dc.coeffs().l2_norm(), 0.0);

        let q = {
            let mut t = MonomialPoly::zero(MultiIndex::of(&[0, 2]));
            t.coeffs.set(&[0, 2], 1.0);
            t
        };
        let pq = p.mul(&q);
        assert!((pq.eval(&[2.0, 3.0]) - (2.0 - 1.0 / 6.0) * 9.0).abs() < 1e-12);

        let r = p.compose_affine(&[1.0, 0.0], &[0.5, 1.0]);
        assert!((r.eval(&[0.0, 0.0]) - p.eval(&[1.0, 0.0])).abs() < 1e-15);
        assert!((r.eval(&[1.0, 0.0]) - p.eval(&[1.5, 0.0])).abs() < 1e-15);
    }

    #[test]
    fn tensor_apply_identity_and_reproduction() {
        let f: Arc<dyn Oracle> = Arc::new(FnOracle::new(2, |x: &[f64]| {
            (1.5 * x[0]).sin() + x[1] * x[0]
        }));
        let id = tensor_apply(
            vec![AxisOperator::Identity, AxisOperator::Identity],
            f.clone(),
        );
        assert_eq!(id.eval(&[0.3, 0.7]), f.eval(&[0.3, 0.7]));

        // Bilinear functions are reproduced by per-axis degree-1 projectors.
        let bil: Arc<dyn Oracle> = Arc::new(FnOracle::new(2, |x: &[f64]| {
            2.0 + x[0] - 3.0 * x[1] + 0.5 * x[0] * x[1]
        }));
        let ops = vec![
            AxisOperator::projector(0.0, 1.0, 1),
            AxisOperator::projector(0.0, 1.0, 1),
        ];
        let proj = tensor_apply(ops, bil.clone());
        for (x, y) in [(0.1, 0.9), (0.5, 0.25), (0.99, 0.01)] {
            assert!((proj.eval(&[x, y]) - bil.eval(&[x, y])).abs() < 1e-12);
        }
    }

    #[test]
    fn lifted_operators_commute() {
        let f: Arc<dyn Oracle> = Arc::new(FnOracle::new(2, |x: &[f64]| {
            (3.0 * x[0] + 0.2).sin() * (2.0 - x[1]).ln()
        }));
        let ops = vec![
            AxisOperator::projector(0.0, 1.0, 2),
            AxisOperator::projector(0.25, 0.5, 1).complement(),
        ];
        let a = tensor_apply_ordered(ops.clone(), f.clone(), Some(vec![0, 1]));
        let b = tensor_apply_ordered(ops, f, Some(vec![1, 0]));
        for (x, y) in [(0.2, 0.8), (0.45, 0.45), (0.7, 0.33)] {
            assert!((a.eval(&[x, y]) - b.eval(&[x, y])).abs() < 1e-12);
        }
    }

    #[test]
    fn axis_operators_are_linear_and_compose_associatively() {
        let ops = [
            AxisOperator::projector(0.1, 0.7, 2),
            AxisOperator::masked_projector(0.0, 1.0, 1, 0.2, 0.5),
            AxisOperator::projector(0.0, 1.0, 1).complement(),
        ];
        let f = |y: f64| (3.0 * y).sin();
        let g = |y: f64| y * y - 0.4;
        let (a, b) = (1.7, -0.6);
        let combo = move |y: f64| a * f(y) + b * g(y);
        for op in &ops {
            for y in [0.15, 0.33, 0.78] {
                let lhs = op.apply(&combo, y);
                let rhs = a * op.apply(&f, y) + b * op.apply(&g, y);
                assert!((lhs - rhs).abs() < 1e-12, "linearity at y={y}");
            }
        }
        let [p, q, r] = ops;
        let left = AxisOperator::Compose(
            Box::new(AxisOperator::Compose(Box::new(p.clone()), Box::new(q.clone()))),
            Box::new(r.clone()),
        );
        let right = AxisOperator::Compose(
            Box::new(p),
            Box::new(AxisOperator::Compose(Box::new(q), Box::new(r))),
        );
        for y in [0.25, 0.5, 0.9] {
            assert!((left.apply(&f, y) - right.apply(&f, y)).abs() < 1e-12);
        }
    }

    #[test]
    fn masked_projection_matches_tensor_route() {
        let f: Arc<dyn Oracle> = Arc::new(FnOracle::new(2, |x: &[f64]| {
            (2.0 * x[0] - x[1]).cos() + x[0] * x[1] * x[1]
        }));
        let proj_box = Rect::of(&[0.25, 0.0], &[0.5, 0.5]);
        let mask_box = Rect::of(&[0.3, 0.1], &[0.6, 0.7]);
        let deg = MultiIndex::of(&[2, 2]);
        let direct = masked_project(
            f.as_ref(),
            &proj_box,
            &mask_box,
            &deg,
            &QuadSpec::uniform(2, 5),
        )
        .unwrap();
        let ops: Vec<AxisOperator> = (0..2)
            .map(|j| {
                AxisOperator::masked_projector(
                    proj_box.corner()[j],
                    proj_box.edge()[j],
                    deg[j] as usize,
                    mask_box.corner()[j],
                    mask_box.edge()[j],
                )
            })
            .collect();
        let lifted = tensor_apply(ops, f);
        for (x, y) in [
            (0.35, 0.2),
            (0.5, 0.5),
            (0.85, 0.75),
            (0.2, 0.2),   // outside mask on axis 0
            (0.95, 0.85), // outside mask
        ] {
            let dv = direct.eval(&[x, y]);
            let lv = lifted.eval(&[x, y]);
            assert!((dv - lv).abs() < 1e-10, "({x},{y}): {dv} vs {lv}");
        }
    }

    #[test]
    fn project_rejects_dim_mismatch() {
        let f = FnOracle::new(1, |x: &[f64]| x[0]);
        assert!(project(
            &f,
            &Rect::of(&[0.0, 0.0], &[1.0, 1.0]),
            &MultiIndex::of(&[1]),
            &QuadSpec::uniform(1, 3)
        )
        .is_err());
    }
}
