//! Dyadic cell geometry on the cube, clamped local projectors, the
//! quasi-interpolants E_κ, and their telescoped level details with the
//! per-shift polynomial coefficient form U_{κ,ν}.
//!
//! The operator degree convention follows the telescoping pipeline: the
//! difference order l is the user-facing parameter and projections are taken
//! at degree l - 𝔢, so that l matches the modulus order in the error bounds.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::analysis::{modulus_avg, Domain, Lq, NormGrid};
use crate::index::{dyadic_cell, BinaryMask, IndexBox, MultiIndex, Rect};
use crate::oracle::{Oracle, SmoothnessHint};
use crate::polyproj::{project, MonomialPoly, PolyError, QuadSpec, TensorPoly};
use crate::quad::sample_grid;
use crate::splines::{eval_g, spline, RefinementMask};

#[derive(Debug, Error)]
pub enum QuasiError {
    #[error("index {nu} outside 𝒩_({lo},{hi})")]
    IndexOutsideRange {
        nu: MultiIndex,
        lo: MultiIndex,
        hi: MultiIndex,
    },
    #[error("level κ = {0} must be nonnegative")]
    NegativeLevel(MultiIndex),
    #[error("difference order l = {0} must be ≥ 𝔢")]
    OrderBelowOne(MultiIndex),
    #[error("spline order m = {m} must dominate l - 𝔢 = {need}")]
    SplineOrderTooSmall { m: MultiIndex, need: MultiIndex },
    #[error(transparent)]
    Poly(#[from] PolyError),
}

// ---------------------------------------------------------------------------
// Cell geometry
// ---------------------------------------------------------------------------

/// Geometry attached to a cell index ν ∈ 𝒩_(0, 2^κ-𝔢): the projection base
/// cell D (corner 2^{-κ}(ν-m)_+, edges min(2^{κ_j}, m_j+1)·2^{-κ_j}) and the
/// wide cell D′ used in the derivative bounds.
#[derive(Clone, Debug)]
pub struct CellGeometry {
    pub kappa: MultiIndex,
    pub nu: MultiIndex,
    pub m: MultiIndex,
    base: Rect,
    wide: Rect,
}

impl CellGeometry {
    pub fn new(kappa: &MultiIndex, nu: &MultiIndex, m: &MultiIndex) -> Result<Self, QuasiError> {
        check_cell_index(kappa, nu)?;
        let d = kappa.dim();
        let h = kappa.pow2_neg();
        let mut base_c = Vec::with_capacity(d);
        let mut base_e = Vec::with_capacity(d);
        let mut wide_c = Vec::with_capacity(d);
        let mut wide_e = Vec::with_capacity(d);
        for j in 0..d {
            let two_k = (kappa[j] as f64).exp2();
            base_c.push(h[j] * (nu[j] - m[j]).max(0) as f64);
            base_e.push(h[j] * two_k.min((m[j] + 1) as f64));
            wide_c.push(h[j] * ((nu[j] - 2 * m[j] - 1).max(0).min((1i64 << kappa[j]) - 2 * m[j] - 3).max(0)) as f64);
            wide_e.push(h[j] * two_k.min((2 * m[j] + 3) as f64));
        }
        Ok(Self {
            kappa: kappa.clone(),
            nu: nu.clone(),
            m: m.clone(),
            base: Rect::of(&base_c, &base_e),
            wide: Rect::of(&wide_c, &wide_e),
        })
    }

    /// The base cell D_{κ,ν}^{d,m} ⊆ I^d; for m = 0 this is the dyadic cell.
    pub fn base(&self) -> &Rect {
        &self.base
    }

    /// The wide cell D′_{κ,ν}^{d,m} with D ⊆ D′ ⊆ I^d.
    pub fn wide(&self) -> &Rect {
        &self.wide
    }
}

fn check_cell_index(kappa: &MultiIndex, nu: &MultiIndex) -> Result<(), QuasiError> {
    if !kappa.is_nonnegative() {
        return Err(QuasiError::NegativeLevel(kappa.clone()));
    }
    let lo = MultiIndex::zeros(kappa.dim());
    let hi = kappa.map(|k| (1i64 << k) - 1);
    if !(lo.le(nu) && nu.le(&hi)) {
        return Err(QuasiError::IndexOutsideRange {
            nu: nu.clone(),
            lo,
            hi,
        });
    }
    Ok(())
}

/// ν_κ^{d,m}(ν) = (2^κ-m-𝔢)_+ - (2^κ-m-𝔢-ν_+)_+, the clamp sending shift
/// indices in 𝒩_(-m, 2^κ-𝔢) to projection cells in 𝒩_(0, 2^κ-𝔢); monotone
/// and componentwise.
pub fn index_clamp(
    kappa: &MultiIndex,
    m: &MultiIndex,
    nu: &MultiIndex,
) -> Result<MultiIndex, QuasiError> {
    let lo = m.map(|v| -v);
    let hi = kappa.map(|k| (1i64 << k) - 1);
    if !(lo.le(nu) && nu.le(&hi)) {
        return Err(QuasiError::IndexOutsideRange {
            nu: nu.clone(),
            lo,
            hi,
        });
    }
    let mut out = Vec::with_capacity(kappa.dim());
    for j in 0..kappa.dim() {
        let cap = ((1i64 << kappa[j]) - m[j] - 1).max(0);
        out.push(cap - (cap - nu[j].max(0)).max(0));
    }
    Ok(MultiIndex::of(&out))
}

/// The local projector S_{κ,ν}^{d,l,m}: projection of f over the base cell
/// D_{κ,ν}^{d,m}. The m = 0 specialization projects over the dyadic cell.
pub fn local_projector(
    f: &dyn Oracle,
    kappa: &MultiIndex,
    nu: &MultiIndex,
    degree: &MultiIndex,
    m: &MultiIndex,
    quad: &QuadSpec,
) -> Result<TensorPoly, QuasiError> {
    let geom = CellGeometry::new(kappa, nu, m)?;
    Ok(project(f, geom.base(), degree, quad)?)
}

// ---------------------------------------------------------------------------
// Indexed families and compiled grids
// ---------------------------------------------------------------------------

/// A family of values indexed by an integer box.
#[derive(Clone, Debug)]
pub struct IndexedFamily<T> {
    range: IndexBox,
    items: Vec<T>,
}

impl<T> IndexedFamily<T> {
    pub fn from_fn(
        range: IndexBox,
        mut f: impl FnMut(&MultiIndex) -> Result<T, QuasiError>,
    ) -> Result<Self, QuasiError> {
        let mut items = Vec::with_capacity(range.count());
        for nu in range.iter() {
            items.push(f(&nu)?);
        }
        Ok(Self { range, items })
    }

    pub fn range(&self) -> &IndexBox {
        &self.range
    }

    pub fn get(&self, nu: &MultiIndex) -> Option<&T> {
        self.range.offset(nu).map(|off| &self.items[off])
    }

    pub fn iter(&self) -> impl Iterator<Item = (MultiIndex, &T)> {
        self.range.iter().zip(self.items.iter())
    }
}

/// Piecewise-polynomial function compiled onto a uniform cell grid: cell
/// (k_1..k_d) covers origin + h·k + h·[0,1)^d and carries a polynomial in
/// the local variable u ∈ [0,1)^d. Evaluation outside the grid is 0.
#[derive(Clone, Debug)]
pub struct PiecewiseGrid {
    origin: Vec<f64>,
    h: Vec<f64>,
    n: Vec<usize>,
    cells: Vec<MonomialPoly>,
}

impl PiecewiseGrid {
    pub fn new(origin: Vec<f64>, h: Vec<f64>, n: Vec<usize>, cells: Vec<MonomialPoly>) -> Self {
        assert_eq!(cells.len(), n.iter().product::<usize>());
        Self { origin, h, n, cells }
    }

    pub fn domain(&self) -> Rect {
        Rect::of(
            &self.origin,
            &self
                .h
                .iter()
                .zip(&self.n)
                .map(|(h, &n)| h * n as f64)
                .collect::<Vec<_>>(),
        )
    }

    pub fn dim(&self) -> usize {
        self.origin.len()
    }

    pub fn cells(&self) -> &[MonomialPoly] {
        &self.cells
    }

    fn locate(&self, x: &[f64]) -> Option<(usize, Vec<f64>)> {
        let d = self.dim();
        let mut off = 0usize;
        let mut u = vec![0.0; d];
        for j in 0..d {
            let t = (x[j] - self.origin[j]) / self.h[j];
            let mut c = t.floor();
            // Close the top face so compiled cube-side objects evaluate at 1.
            if c >= self.n[j] as f64 && t - self.n[j] as f64 <= 1e-12 {
                c = self.n[j] as f64 - 1.0;
            }
            if c < 0.0 || c >= self.n[j] as f64 {
                return None;
            }
            off = off * self.n[j] + c as usize;
            u[j] = t - c;
        }
        Some((off, u))
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self.locate(x) {
            Some((off, u)) => self.cells[off].eval(&u),
            None => 0.0,
        }
    }

    /// Exact per-cell differentiation: 𝒟^λ in global coordinates is the
    /// local derivative scaled by Π h_j^{-λ_j}.
    pub fn derivative(&self, lambda: &MultiIndex) -> Result<PiecewiseGrid, PolyError> {
        let scale: f64 = (0..self.dim())
            .map(|j| self.h[j].powi(-(lambda[j] as i32)))
            .product();
        let cells = self
            .cells
            .iter()
            .map(|p| p.differentiate(lambda).map(|q| q.scale(scale)))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(PiecewiseGrid {
            origin: self.origin.clone(),
            h: self.h.clone(),
            n: self.n.clone(),
            cells,
        })
    }

    /// L_q norm over the grid domain; per-cell Gauss (exact for even integer
    /// q up to rounding), max over per-cell samples for q = ∞.
    pub fn lq_norm(&self, q: Lq, order: usize, sup_samples: usize) -> f64 {
        let cell_vol: f64 = self.h.iter().product();
        match q {
            Lq::Finite(p) => {
                let mut acc = 0.0;
                let unit = Rect::unit(self.dim());
                for poly in &self.cells {
                    let mut cell_acc = 0.0;
                    crate::quad::tensor_rule(&unit, &vec![order; self.dim()], |u, w| {
                        cell_acc += w * poly.eval(u).abs().powf(p);
                    });
                    acc += cell_acc * cell_vol;
                }
                acc.powf(1.0 / p)
            }
            Lq::Infinity => {
                let unit = Rect::unit(self.dim());
                let mut best: f64 = 0.0;
                for poly in &self.cells {
                    sample_grid(&unit, sup_samples, |u| best = best.max(poly.eval(u).abs()));
                }
                best
            }
        }
    }

    /// Pointwise sum; the layouts must agree.
    pub fn add(&self, other: &PiecewiseGrid) -> PiecewiseGrid {
        assert_eq!(self.origin, other.origin);
        assert_eq!(self.h, other.h);
        assert_eq!(self.n, other.n);
        let cells = self
            .cells
            .iter()
            .zip(&other.cells)
            .map(|(a, b)| a.add(b))
            .collect();
        PiecewiseGrid {
            origin: self.origin.clone(),
            h: self.h.clone(),
            n: self.n.clone(),
            cells,
        }
    }

    /// Re-express on a finer uniform grid covering `new_origin + new_h·k`,
    /// `k < new_n`. Every new cell must lie inside one old cell or outside
    /// the old domain (where the function is zero).
    pub fn resample(&self, new_origin: &[f64], new_h: &[f64], new_n: &[usize]) -> PiecewiseGrid {
        let d = self.dim();
        let count: usize = new_n.iter().product();
        let mut cells = Vec::with_capacity(count);
        let zero_deg: Vec<i64> = self
            .cells
            .first()
            .map(|p| p.degree().entries().to_vec())
            .unwrap_or_else(|| vec![0; d]);
        let mut idx = vec![0usize; d];
        for _ in 0..count {
            // Center of the new cell in global coordinates.
            let center: Vec<f64> = (0..d)
                .map(|j| new_origin[j] + new_h[j] * (idx[j] as f64 + 0.5))
                .collect();
            let poly = match self.locate(&center) {
                Some((off, _)) => {
                    // u_old = a + b · u_new with
                    // a = (new_corner - old_corner)/old_h, b = new_h/old_h.
                    let mut a = vec![0.0; d];
                    let mut b = vec![0.0; d];
                    for j in 0..d {
                        let old_c = ((center[j] - self.origin[j]) / self.h[j]).floor();
                        let new_corner = new_origin[j] + new_h[j] * idx[j] as f64;
                        a[j] = (new_corner - (self.origin[j] + self.h[j] * old_c)) / self.h[j];
                        b[j] = new_h[j] / self.h[j];
                    }
                    self.cells[off].compose_affine(&a, &b)
                }
                None => MonomialPoly::zero(MultiIndex::of(&zero_deg)),
            };
            cells.push(poly);
            let mut axis = d;
            loop {
                if axis == 0 {
                    break;
                }
                axis -= 1;
                idx[axis] += 1;
                if idx[axis] < new_n[axis] {
                    break;
                }
                idx[axis] = 0;
            }
        }
        PiecewiseGrid {
            origin: new_origin.to_vec(),
            h: new_h.to_vec(),
            n: new_n.to_vec(),
            cells,
        }
    }
}

impl Oracle for PiecewiseGrid {
    fn dim(&self) -> usize {
        self.origin.len()
    }

    fn eval(&self, x: &[f64]) -> f64 {
        PiecewiseGrid::eval(self, x)
    }

    fn hint(&self) -> SmoothnessHint {
        SmoothnessHint::PiecewiseSmooth
    }
}

// ---------------------------------------------------------------------------
// Blends (Σ polynomial × generator)
// ---------------------------------------------------------------------------

/// Σ_{ν} f_ν(x) g_{κ,ν}^{d,m}(x) with one polynomial per shift index in
/// 𝒩_(-m, 2^κ-𝔢). Evaluation touches only the ≤ Π(m_j+1) indices whose
/// generators are supported at x.
#[derive(Clone, Debug)]
pub struct SplineBlend {
    pub kappa: MultiIndex,
    pub m: MultiIndex,
    degree: MultiIndex,
    fam: IndexedFamily<MonomialPoly>,
}

impl SplineBlend {
    pub fn new(
        kappa: MultiIndex,
        m: MultiIndex,
        degree: MultiIndex,
        fam: IndexedFamily<MonomialPoly>,
    ) -> Self {
        Self {
            kappa,
            m,
            degree,
            fam,
        }
    }

    pub fn degree(&self) -> &MultiIndex {
        &self.degree
    }

    pub fn family(&self) -> &IndexedFamily<MonomialPoly> {
        &self.fam
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let d = self.kappa.dim();
        let mut cell = Vec::with_capacity(d);
        for j in 0..d {
            cell.push(((kappa_scale(&self.kappa, j) * x[j]).floor()) as i64);
        }
        let lo: Vec<i64> = (0..d).map(|j| cell[j] - self.m[j]).collect();
        let range = IndexBox::new(MultiIndex::of(&lo), MultiIndex::of(&cell)).expect("dims");
        let mut acc = 0.0;
        for nu in range.iter() {
            if let Some(poly) = self.fam.get(&nu) {
                let g = eval_g(&self.kappa, &nu, &self.m, x);
                if g != 0.0 {
                    acc += poly.eval(x) * g;
                }
            }
        }
        acc
    }

    /// Compile the blend on the lattice cells `cell_lo ..= cell_hi` (indices
    /// of dyadic cells at level κ) into per-cell combined polynomials of
    /// degree ≤ l + m per axis.
    pub fn compile_cells(&self, cell_lo: &MultiIndex, cell_hi: &MultiIndex) -> PiecewiseGrid {
        let d = self.kappa.dim();
        let h = self.kappa.pow2_neg();
        let origin: Vec<f64> = (0..d).map(|j| cell_lo[j] as f64 * h[j]).collect();
        let n: Vec<usize> = (0..d)
            .map(|j| (cell_hi[j] - cell_lo[j] + 1) as usize)
            .collect();
        let combined_deg = self.degree.zip(&self.m, |a, b| a + b);
        let mut cells = Vec::with_capacity(n.iter().product());
        for k in IndexBox::new(cell_lo.clone(), cell_hi.clone())
            .expect("dims")
            .iter()
        {
            let mut acc = MonomialPoly::zero(combined_deg.clone());
            let corner: Vec<f64> = (0..d).map(|j| k[j] as f64 * h[j]).collect();
            let lo: Vec<i64> = (0..d).map(|j| k[j] - self.m[j]).collect();
            for nu in IndexBox::new(MultiIndex::of(&lo), k.clone())
                .expect("dims")
                .iter()
            {
                if let Some(poly) = self.fam.get(&nu) {
                    // Local polynomial of f_ν on this cell.
                    let local = poly.compose_affine(&corner, &h);
                    // ψ piece per axis: piece index k_j - ν_j.
                    let piece_coeffs: Vec<&[f64]> = (0..d)
                        .map(|j| {
                            spline(self.m[j] as usize).piece_coeffs((k[j] - nu[j]) as usize)
                        })
                        .collect();
                    let gpoly = MonomialPoly::tensor_outer(&piece_coeffs);
                    acc = acc.add(&local.mul(&gpoly));
                }
            }
            cells.push(acc);
        }
        PiecewiseGrid::new(origin, h.clone(), n, cells)
    }

    /// Compile over the cube cells 0 ..= 2^κ - 1.
    pub fn compile_cube(&self) -> PiecewiseGrid {
        let lo = MultiIndex::zeros(self.kappa.dim());
        let hi = self.kappa.map(|k| (1i64 << k) - 1);
        self.compile_cells(&lo, &hi)
    }

    /// Compile over the full support lattice -m ..= 2^κ + m - 1.
    pub fn compile_support(&self) -> PiecewiseGrid {
        let lo = self.m.map(|v| -v);
        let hi = self.kappa.zip(&self.m, |k, mj| (1i64 << k) + mj - 1);
        self.compile_cells(&lo, &hi)
    }

    /// Support box of the blend as a closed rectangle.
    pub fn support(&self) -> Rect {
        let d = self.kappa.dim();
        let h = self.kappa.pow2_neg();
        let corner: Vec<f64> = (0..d).map(|j| -(self.m[j] as f64) * h[j]).collect();
        let edge: Vec<f64> = (0..d)
            .map(|j| 1.0 + 2.0 * self.m[j] as f64 * h[j])
            .collect();
        Rect::of(&corner, &edge)
    }
}

fn kappa_scale(kappa: &MultiIndex, j: usize) -> f64 {
    (kappa[j] as f64).exp2()
}

impl Oracle for SplineBlend {
    fn dim(&self) -> usize {
        self.kappa.dim()
    }

    fn eval(&self, x: &[f64]) -> f64 {
        SplineBlend::eval(self, x)
    }

    fn hint(&self) -> SmoothnessHint {
        SmoothnessHint::PiecewiseSmooth
    }
}

// ---------------------------------------------------------------------------
// The quasi-interpolant builder
// ---------------------------------------------------------------------------

/// A quasi-interpolant at level κ: polynomials blended with the level-κ
/// partition of unity, restricted to the cube in the operators' contracts.
#[derive(Clone, Debug)]
pub struct QuasiInterpolant {
    pub blend: SplineBlend,
}

impl QuasiInterpolant {
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.blend.eval(x)
    }

    pub fn compile_cube(&self) -> PiecewiseGrid {
        self.blend.compile_cube()
    }
}

/// Shared projection tables and operator assembly for one oracle and one
/// (difference order, spline order) pair. The table at level κ holds the
/// projections over every dyadic cell Q_{κ,ν}, ν ∈ 𝒩_(0, 2^κ-𝔢); the same
/// tables back the cube-side operators and (through the zero extension) the
/// whole-space ones.
pub struct QuasiBuilder<'f> {
    f: &'f dyn Oracle,
    /// Difference order l (projection degree is l - 𝔢).
    l: MultiIndex,
    m: MultiIndex,
    degree: MultiIndex,
    tables: RefCell<BTreeMap<Vec<i64>, Arc<IndexedFamily<MonomialPoly>>>>,
}

impl<'f> QuasiBuilder<'f> {
    pub fn new(f: &'f dyn Oracle, l: &MultiIndex, m: &MultiIndex) -> Result<Self, QuasiError> {
        let ones = MultiIndex::ones(l.dim());
        if !ones.le(l) {
            return Err(QuasiError::OrderBelowOne(l.clone()));
        }
        let degree = l.zip(&ones, |a, b| a - b);
        if !degree.le(m) {
            return Err(QuasiError::SplineOrderTooSmall {
                m: m.clone(),
                need: degree,
            });
        }
        Ok(Self {
            f,
            l: l.clone(),
            m: m.clone(),
            degree,
            tables: RefCell::new(BTreeMap::new()),
        })
    }

    pub fn difference_order(&self) -> &MultiIndex {
        &self.l
    }

    pub fn spline_order(&self) -> &MultiIndex {
        &self.m
    }

    pub fn projection_degree(&self) -> &MultiIndex {
        &self.degree
    }

    /// Projections of f over all dyadic cells of level κ, converted to
    /// monomial form and cached.
    pub fn projections(
        &self,
        kappa: &MultiIndex,
    ) -> Result<Arc<IndexedFamily<MonomialPoly>>, QuasiError> {
        if let Some(t) = self.tables.borrow().get(kappa.entries()) {
            return Ok(t.clone());
        }
        let quad = QuadSpec::auto(&self.f.hint(), &self.degree);
        let lo = MultiIndex::zeros(kappa.dim());
        let hi = kappa.map(|k| (1i64 << k) - 1);
        let fam = IndexedFamily::from_fn(IndexBox::new(lo, hi).expect("dims"), |nu| {
            let cell = dyadic_cell(kappa, nu);
            Ok(project(self.f, &cell, &self.degree, &quad)?.to_monomial())
        })?;
        let fam = Arc::new(fam);
        self.tables
            .borrow_mut()
            .insert(kappa.entries().to_vec(), fam.clone());
        Ok(fam)
    }

    /// E_κ^{d,l-𝔢,m} f: the blend of clamped cell projections with the
    /// level-κ partition of unity.
    pub fn quasi_interpolant(&self, kappa: &MultiIndex) -> Result<QuasiInterpolant, QuasiError> {
        if !kappa.is_nonnegative() {
            return Err(QuasiError::NegativeLevel(kappa.clone()));
        }
        let table = self.projections(kappa)?;
        let range = shift_range(kappa, &self.m);
        let fam = IndexedFamily::from_fn(range, |nu| {
            let clamped = index_clamp(kappa, &self.m, nu)?;
            Ok(table.get(&clamped).expect("clamp lands in table").clone())
        })?;
        Ok(QuasiInterpolant {
            blend: SplineBlend::new(kappa.clone(), self.m.clone(), self.degree.clone(), fam),
        })
    }

    /// The level-κ detail 𝓔_κ^{d,l-𝔢,m} f = Σ_{ε ⊆ 𝔰(κ)} (-𝔢)^ε E_{κ-ε},
    /// assembled in coefficient form: the blend polynomial at shift ν is
    /// U_{κ,ν} f, the alternating refinement-mask combination of clamped
    /// projections from levels κ-ε.
    pub fn detail(&self, kappa: &MultiIndex) -> Result<QuasiInterpolant, QuasiError> {
        if !kappa.is_nonnegative() {
            return Err(QuasiError::NegativeLevel(kappa.clone()));
        }
        let range = shift_range(kappa, &self.m);
        let fam = IndexedFamily::from_fn(range, |nu| self.detail_poly(kappa, nu))?;
        Ok(QuasiInterpolant {
            blend: SplineBlend::new(kappa.clone(), self.m.clone(), self.degree.clone(), fam),
        })
    }

    /// U_{κ,ν}^{d,l-𝔢,m} f.
    pub fn detail_poly(
        &self,
        kappa: &MultiIndex,
        nu: &MultiIndex,
    ) -> Result<MonomialPoly, QuasiError> {
        let d = kappa.dim();
        let masks: Vec<RefinementMask> = (0..d)
            .map(|j| RefinementMask::new(self.m[j] as usize))
            .collect();
        let mut acc = MonomialPoly::zero(self.degree.clone());
        for eps in BinaryMask::subsets_of_support(kappa) {
            let kap_eps = &kappa.clone() - &eps.to_multi_index();
            let table = self.projections(&kap_eps)?;
            for rho in rho_set(kappa, nu, &eps, &self.m) {
                let mut weight = eps.sign();
                for &j in &eps.support() {
                    weight *= masks[j].coeff(nu[j] - 2 * rho[j]);
                }
                if weight == 0.0 {
                    continue;
                }
                let clamped = index_clamp(&kap_eps, &self.m, &rho)?;
                let poly = table.get(&clamped).expect("clamp lands in table");
                acc = acc.add(&poly.scale(weight));
            }
        }
        Ok(acc)
    }
}

/// The shift index range 𝒩_(-m, 2^κ-𝔢).
pub fn shift_range(kappa: &MultiIndex, m: &MultiIndex) -> IndexBox {
    IndexBox::new(m.map(|v| -v), kappa.map(|k| (1i64 << k) - 1)).expect("dims")
}

/// The admissible refinement shifts
/// P_{κ,ν,ε} = { ρ : ρ_j = ν_j off 𝔰(ε); ρ ∈ 𝒩_(-m, 2^{κ-ε}-𝔢);
/// ν_j - 2ρ_j ∈ [0, m_j+1] on 𝔰(ε) }.
pub fn rho_set(
    kappa: &MultiIndex,
    nu: &MultiIndex,
    eps: &BinaryMask,
    m: &MultiIndex,
) -> Vec<MultiIndex> {
    let d = kappa.dim();
    let mut per_axis: Vec<Vec<i64>> = Vec::with_capacity(d);
    for j in 0..d {
        if eps.is_set(j) {
            let lo = (-m[j]).max(div_ceil(nu[j] - m[j] - 1, 2));
            let hi = ((1i64 << (kappa[j] - 1)) - 1).min(div_floor(nu[j], 2));
            per_axis.push((lo..=hi).collect());
        } else {
            per_axis.push(vec![nu[j]]);
        }
    }
    let mut out = Vec::new();
    let mut idx = vec![0usize; d];
    if per_axis.iter().any(|v| v.is_empty()) {
        return out;
    }
    loop {
        out.push(MultiIndex::of(
            &(0..d).map(|j| per_axis[j][idx[j]]).collect::<Vec<_>>(),
        ));
        let mut axis = d;
        loop {
            if axis == 0 {
                return out;
            }
            axis -= 1;
            idx[axis] += 1;
            if idx[axis] < per_axis[axis].len() {
                break;
            }
            idx[axis] = 0;
        }
    }
}

fn div_floor(a: i64, b: i64) -> i64 {
    a.div_euclid(b)
}

fn div_ceil(a: i64, b: i64) -> i64 {
    (a + b - 1).div_euclid(b)
}

// ---------------------------------------------------------------------------
// Error and bound reports
// ---------------------------------------------------------------------------

/// ‖f - E‖_{L_p(I^d)} with per-cell quadrature on the compiled grid refined
/// twice per axis.
pub fn approx_error_lp(f: &dyn Oracle, compiled: &PiecewiseGrid, p: f64, order: usize) -> f64 {
    let domain = compiled.domain();
    let panels: Vec<usize> = compiled.n.iter().map(|&n| n * 2).collect();
    crate::quad::integrate_composite(&domain, &panels, order, |x| {
        (f.eval(x) - compiled.eval(x)).abs().powf(p)
    })
    .powf(1.0 / p)
}

/// Ratio record for the level-detail derivative bound: the L_q norm of
/// 𝒟^λ 𝓔_κ f against 2^{(κ, λ + (1/p-1/q)_+ 𝔢)} times the averaged modulus
/// of order l·χ_{𝔰(κ)} at argument s·2^{-κ}.
#[derive(Clone, Debug, Serialize)]
pub struct DetailBoundReport {
    pub kappa: Vec<i64>,
    pub lambda: Vec<i64>,
    pub p: f64,
    pub q: f64,
    pub lhs: f64,
    pub modulus: f64,
    pub scale: f64,
    pub ratio: Option<f64>,
    pub modulus_scale_factor: f64,
}

#[allow(clippy::too_many_arguments)]
pub fn detail_bound_report(
    builder: &QuasiBuilder,
    kappa: &MultiIndex,
    lambda: &MultiIndex,
    p: f64,
    q: f64,
    modulus_scale_factor: f64,
    norm_grid: &NormGrid,
    lq_order: usize,
) -> Result<DetailBoundReport, QuasiError> {
    let d = kappa.dim();
    let detail = builder.detail(kappa)?;
    let compiled = detail.compile_cube();
    let dgrid = compiled.derivative(lambda)?;
    let qv = if q.is_finite() {
        Lq::Finite(q)
    } else {
        Lq::Infinity
    };
    let lhs = dgrid.lq_norm(qv, lq_order, 8);

    let active = kappa.support();
    let order = crate::analysis::masked_order(builder.difference_order(), &active);
    let mut t = vec![1.0; d];
    for &j in &active {
        t[j] = modulus_scale_factor * (-(kappa[j] as f64)).exp2();
    }
    let modulus = modulus_avg(
        builder.f,
        &order,
        &t,
        p,
        &Domain::cube(d),
        &norm_grid.lp,
        norm_grid.xi_order,
        norm_grid.shifts_per_axis,
    )
    .value;
    let gap = (1.0 / p - 1.0 / q).max(0.0);
    let log_scale: f64 = (0..d)
        .map(|j| kappa[j] as f64 * (lambda[j] as f64 + gap))
        .sum();
    let scale = log_scale.exp2();
    let rhs = scale * modulus;
    let ratio = if rhs > 1e-300 { Some(lhs / rhs) } else { None };
    Ok(DetailBoundReport {
        kappa: kappa.entries().to_vec(),
        lambda: lambda.entries().to_vec(),
        p,
        q,
        lhs,
        modulus,
        scale,
        ratio,
        modulus_scale_factor,
    })
}

// ---------------------------------------------------------------------------
// Geometry audit
// ---------------------------------------------------------------------------

/// Exhaustive check of the cell containments and overlap bounds at one
/// level: D ⊆ I^d, Q ⊆ D ⊆ D′ ⊆ I^d, the clamped-cell containment for
/// interacting shifts, the wide-cell containment for refinement shifts, and
/// the cover/interaction counts.
#[derive(Clone, Debug, Serialize)]
pub struct GeometryAudit {
    pub kappa: Vec<i64>,
    pub m: Vec<i64>,
    pub ok: bool,
    pub violations: Vec<String>,
    pub max_cover_count: usize,
    pub max_wide_cover_count: usize,
    pub max_interacting: usize,
    pub max_rho_count: usize,
}

pub fn audit_geometry(kappa: &MultiIndex, m: &MultiIndex) -> Result<GeometryAudit, QuasiError> {
    let d = kappa.dim();
    let cube = Rect::unit(d);
    let tol = 1e-12;
    let mut violations = Vec::new();
    let cells = IndexBox::new(MultiIndex::zeros(d), kappa.map(|k| (1i64 << k) - 1)).expect("dims");

    let mut geoms = Vec::new();
    for nu in cells.iter() {
        let g = CellGeometry::new(kappa, &nu, m)?;
        let q = dyadic_cell(kappa, &nu);
        if !g.base().subset_of(&cube, tol) {
            violations.push(format!("D({nu}) ⊄ cube"));
        }
        if !q.subset_of(g.base(), tol) {
            violations.push(format!("Q({nu}) ⊄ D({nu})"));
        }
        if !g.base().subset_of(g.wide(), tol) {
            violations.push(format!("D({nu}) ⊄ D'({nu})"));
        }
        if !g.wide().subset_of(&cube, tol) {
            violations.push(format!("D'({nu}) ⊄ cube"));
        }
        let zero = CellGeometry::new(kappa, &nu, &MultiIndex::zeros(d))?;
        if !zero.base().subset_of(g.base(), tol) {
            violations.push(format!("D0({nu}) ⊄ D({nu})"));
        }
        geoms.push(g);
    }

    // Interacting-shift containments and counts.
    let mut max_interacting = 0usize;
    let mut max_rho = 0usize;
    for (off, nu_cell) in cells.iter().enumerate() {
        let interact = crate::splines::interacting_indices(kappa, m, &nu_cell)
            .expect("cell in range");
        let shifts = shift_range(kappa, m);
        let count = interact.iter().filter(|nu| shifts.contains(nu)).count();
        max_interacting = max_interacting.max(count);
        for nu in interact.iter() {
            if !shifts.contains(&nu) {
                continue;
            }
            let clamped = index_clamp(kappa, m, &nu)?;
            let inner = CellGeometry::new(kappa, &clamped, &MultiIndex::zeros(d))?;
            if !inner.base().subset_of(geoms[off].base(), tol) {
                violations.push(format!("D0(clamp {nu}) ⊄ D({nu_cell})"));
            }
            for eps in BinaryMask::subsets_of_support(kappa) {
                let kap_eps = &kappa.clone() - &eps.to_multi_index();
                let rhos = rho_set(kappa, &nu, &eps, m);
                max_rho = max_rho.max(rhos.len());
                for rho in rhos {
                    let clamped = index_clamp(&kap_eps, m, &rho)?;
                    let inner = CellGeometry::new(&kap_eps, &clamped, &MultiIndex::zeros(d))?;
                    if !inner.base().subset_of(geoms[off].wide(), tol) {
                        violations
                            .push(format!("D0(level {kap_eps}, clamp {rho}) ⊄ D'({nu_cell})"));
                    }
                }
            }
        }
    }

    // Cover counts on a sample grid.
    let mut max_cover = 0usize;
    let mut max_wide_cover = 0usize;
    sample_grid(&cube, 17, |x| {
        let mut c = 0usize;
        let mut w = 0usize;
        for g in &geoms {
            if g.base().contains_half_open(x) {
                c += 1;
            }
            if g.wide().contains_half_open(x) {
                w += 1;
            }
        }
        max_cover = max_cover.max(c);
        max_wide_cover = max_wide_cover.max(w);
    });

    Ok(GeometryAudit {
        kappa: kappa.entries().to_vec(),
        m: m.entries().to_vec(),
        ok: violations.is_empty(),
        violations,
        max_cover_count: max_cover,
        max_wide_cover_count: max_wide_cover,
        max_interacting,
        max_rho_count: max_rho,
    })
}

/// Gauss order used when integrating |compiled|^p per cell.
pub fn default_lq_order(degree: &MultiIndex, m: &MultiIndex) -> usize {
    ((degree.max_entry() + m.max_entry()) as usize + 2).max(4)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::LpGrid;
    use crate::oracle::FnOracle;
    use std::f64::consts::PI;

    fn builder_oracle() -> FnOracle<impl Fn(&[f64]) -> f64 + Send + Sync> {
        FnOracle::new(1, |x: &[f64]| (2.0 * PI * x[0]).sin())
    }

    #[test]
    fn clamp_examples() {
        // κ=0: everything clamps to 0.
        for m in 0..=2i64 {
            for nu in -m..=0 {
                let c = index_clamp(
                    &MultiIndex::of(&[0]),
                    &MultiIndex::of(&[m]),
                    &MultiIndex::of(&[nu]),
                )
                .unwrap();
                assert_eq!(c, MultiIndex::of(&[0]));
            }
        }
        let c = index_clamp(
            &MultiIndex::of(&[3]),
            &MultiIndex::of(&[1]),
            &MultiIndex::of(&[-1]),
        )
        .unwrap();
        assert_eq!(c, MultiIndex::of(&[0]));
        let c = index_clamp(
            &MultiIndex::of(&[3]),
            &MultiIndex::of(&[1]),
            &MultiIndex::of(&[7]),
        )
        .unwrap();
        assert_eq!(c, MultiIndex::of(&[6]));
        assert!(index_clamp(
            &MultiIndex::of(&[3]),
            &MultiIndex::of(&[1]),
            &MultiIndex::of(&[8]),
        )
        .is_err());
    }

    #[test]
    fn clamp_is_monotone() {
        let kappa = MultiIndex::of(&[3]);
        let m = MultiIndex::of(&[2]);
        let mut last = i64::MIN;
        for nu in -2..=7 {
            let c = index_clamp(&kappa, &m, &MultiIndex::of(&[nu])).unwrap();
            assert!(c[0] >= last);
            assert!((0..8).contains(&c[0]));
            last = c[0];
        }
    }

    #[test]
    fn cell_geometry_basics() {
        // m = 0 degenerates to the dyadic cell.
        let g = CellGeometry::new(
            &MultiIndex::of(&[2]),
            &MultiIndex::of(&[1]),
            &MultiIndex::of(&[0]),
        )
        .unwrap();
        assert_eq!(*g.base(), dyadic_cell(&MultiIndex::of(&[2]), &MultiIndex::of(&[1])));

        // κ=0: D is the whole cube regardless of m.
        let g = CellGeometry::new(
            &MultiIndex::of(&[0, 0]),
            &MultiIndex::of(&[0, 0]),
            &MultiIndex::of(&[2, 1]),
        )
        .unwrap();
        assert_eq!(*g.base(), Rect::unit(2));
        assert_eq!(*g.wide(), Rect::unit(2));
    }

    #[test]
    fn geometry_audit_clean_at_desk_scales() {
        for (kappa, m) in [
            (MultiIndex::of(&[4]), MultiIndex::of(&[2])),
            (MultiIndex::of(&[3, 2]), MultiIndex::of(&[2, 1])),
            (MultiIndex::of(&[0, 2]), MultiIndex::of(&[1, 1])),
        ] {
            let audit = audit_geometry(&kappa, &m).unwrap();
            assert!(audit.ok, "{:?}", audit.violations);
            let bound: usize = m.entries().iter().map(|&v| v as usize + 1).product();
            assert!(audit.max_interacting <= bound);
        }
    }

    #[test]
    fn polynomials_are_reproduced_by_e_kappa() {
        // f ∈ 𝒫^{1,1} (degree l-𝔢 = 1), E_κ f = f on the cube.
        let f = FnOracle::with_hint(
            1,
            SmoothnessHint::Polynomial(MultiIndex::of(&[1])),
            |x: &[f64]| 0.3 - 1.7 * x[0],
        );
        let builder =
            QuasiBuilder::new(&f, &MultiIndex::of(&[2]), &MultiIndex::of(&[2])).unwrap();
        for k in 0..=3i64 {
            let e = builder.quasi_interpolant(&MultiIndex::of(&[k])).unwrap();
            for i in 0..50 {
                let x = (i as f64 + 0.5) / 50.0;
                assert!(
                    (e.eval(&[x]) - f.eval(&[x])).abs() < 1e-10,
                    "κ={k} x={x}"
                );
            }
        }
    }

    #[test]
    fn compiled_blend_matches_direct_eval() {
        let f = builder_oracle();
        let builder =
            QuasiBuilder::new(&f, &MultiIndex::of(&[2]), &MultiIndex::of(&[2])).unwrap();
        let e = builder.quasi_interpolant(&MultiIndex::of(&[3])).unwrap();
        let compiled = e.compile_cube();
        for i in 0..200 {
            let x = i as f64 / 199.0;
            let a = e.eval(&[x]);
            let b = compiled.eval(&[x]);
            assert!((a - b).abs() < 1e-12, "x={x}: {a} vs {b}");
        }
    }

    #[test]
    fn details_telescope_to_the_top_level() {
        let f = builder_oracle();
        let l = MultiIndex::of(&[2]);
        let m = MultiIndex::of(&[2]);
        let builder = QuasiBuilder::new(&f, &l, &m).unwrap();
        let cap = 4i64;
        let top = builder.quasi_interpolant(&MultiIndex::of(&[cap])).unwrap();
        for i in 0..100 {
            let x = (i as f64 + 0.5) / 100.0;
            let mut acc = 0.0;
            for k in 0..=cap {
                acc += builder.detail(&MultiIndex::of(&[k])).unwrap().eval(&[x]);
            }
            assert!(
                (acc - top.eval(&[x])).abs() < 1e-10,
                "x={x}: {acc} vs {}",
                top.eval(&[x])
            );
        }
    }

    #[test]
    fn detail_matches_alternating_sum_in_2d() {
        let f = FnOracle::new(2, |x: &[f64]| {
            (1.5 * PI * x[0]).sin() * (0.7 + x[1] * x[1]).powf(0.8)
        });
        let l = MultiIndex::of(&[2, 2]);
        let m = MultiIndex::of(&[2, 2]);
        let builder = QuasiBuilder::new(&f, &l, &m).unwrap();
        let kappa = MultiIndex::of(&[2, 1]);
        let detail = builder.detail(&kappa).unwrap();
        // Direct alternating sum over ε ⊆ 𝔰(κ).
        let points = [[0.21, 0.37], [0.5, 0.5], [0.83, 0.11], [0.05, 0.94]];
        for x in points {
            let mut want = 0.0;
            for eps in BinaryMask::subsets_of_support(&kappa) {
                let kap_eps = &kappa.clone() - &eps.to_multi_index();
                let e = builder.quasi_interpolant(&kap_eps).unwrap();
                want += eps.sign() * e.eval(&x);
            }
            let got = detail.eval(&x);
            assert!((got - want).abs() < 1e-10, "x={x:?}: {got} vs {want}");
        }
    }

    #[test]
    fn details_vanish_on_reproduced_polynomials() {
        let f = FnOracle::with_hint(
            1,
            SmoothnessHint::Polynomial(MultiIndex::of(&[1])),
            |x: &[f64]| 2.0 * x[0] - 0.4,
        );
        let builder =
            QuasiBuilder::new(&f, &MultiIndex::of(&[2]), &MultiIndex::of(&[2])).unwrap();
        for k in 1..=4i64 {
            let detail = builder.detail(&MultiIndex::of(&[k])).unwrap();
            let compiled = detail.compile_cube();
            let norm = compiled.lq_norm(Lq::Finite(2.0), 4, 4);
            assert!(norm < 1e-10, "κ={k}: {norm}");
        }
        // κ = 0 detail IS E_0.
        let d0 = builder.detail(&MultiIndex::of(&[0])).unwrap();
        let e0 = builder.quasi_interpolant(&MultiIndex::of(&[0])).unwrap();
        for i in 0..20 {
            let x = (i as f64 + 0.5) / 20.0;
            assert!((d0.eval(&[x]) - e0.eval(&[x])).abs() < 1e-12);
        }
    }

    #[test]
    fn quasi_interp_error_decays_at_order_two() {
        // ‖f - E_κ f‖_{L_2} for f = sin(2πx), l = 2: slope ≈ -2.
        let f = builder_oracle();
        let builder =
            QuasiBuilder::new(&f, &MultiIndex::of(&[2]), &MultiIndex::of(&[2])).unwrap();
        let mut errs = Vec::new();
        for k in 2..=6i64 {
            let e = builder.quasi_interpolant(&MultiIndex::of(&[k])).unwrap();
            let compiled = e.compile_cube();
            errs.push(approx_error_lp(&f, &compiled, 2.0, 6));
        }
        let slope = log2_slope(&errs);
        assert!(
            (-2.3..=-1.7).contains(&slope),
            "slope {slope}, errors {errs:?}"
        );
    }

    #[test]
    fn convergence_on_nonsmooth_function_is_monotone() {
        let f = FnOracle::new(1, |x: &[f64]| (x[0] - 0.5).abs().powf(1.2));
        let builder =
            QuasiBuilder::new(&f, &MultiIndex::of(&[2]), &MultiIndex::of(&[2])).unwrap();
        let mut last = f64::INFINITY;
        for k in 1..=5i64 {
            let e = builder.quasi_interpolant(&MultiIndex::of(&[k])).unwrap();
            let err = approx_error_lp(&f, &e.compile_cube(), 2.0, 6);
            assert!(err < last, "κ={k}: {err} ≥ {last}");
            last = err;
        }
    }

    #[test]
    fn rho_set_respects_mask_support() {
        let kappa = MultiIndex::of(&[3, 2]);
        let nu = MultiIndex::of(&[3, -1]);
        let m = MultiIndex::of(&[2, 2]);
        let eps_none = BinaryMask::new(vec![false, false]);
        let set = rho_set(&kappa, &nu, &eps_none, &m);
        assert_eq!(set, vec![nu.clone()]);
        let eps0 = BinaryMask::new(vec![true, false]);
        for rho in rho_set(&kappa, &nu, &eps0, &m) {
            assert_eq!(rho[1], nu[1]);
            let mu = nu[0] - 2 * rho[0];
            assert!((0..=3).contains(&mu));
            assert!((-2..=3).contains(&rho[0]));
        }
    }

    #[test]
    fn detail_bound_ratio_is_stable_across_levels() {
        let f = builder_oracle();
        let builder =
            QuasiBuilder::new(&f, &MultiIndex::of(&[2]), &MultiIndex::of(&[2])).unwrap();
        let grid = NormGrid {
            k_max: 4,
            xi_order: 3,
            lp: LpGrid::uniform(1, 16, 4),
            shifts_per_axis: 5,
        };
        let mut ratios = Vec::new();
        for k in 1..=5i64 {
            let rep = detail_bound_report(
                &builder,
                &MultiIndex::of(&[k]),
                &MultiIndex::of(&[0]),
                2.0,
                2.0,
                1.0,
                &grid,
                6,
            )
            .unwrap();
            ratios.push(rep.ratio.expect("nonzero modulus"));
        }
        let max = ratios.iter().cloned().fold(0.0, f64::max);
        let min = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(max / min < 10.0, "ratios {ratios:?}");
    }

    fn log2_slope(values: &[f64]) -> f64 {
        // Least-squares slope of log2(values) against the index.
        let n = values.len() as f64;
        let logs: Vec<f64> = values.iter().map(|v| v.log2()).collect();
        let xbar = (n - 1.0) / 2.0;
        let ybar = logs.iter().sum::<f64>() / n;
        let mut num = 0.0;
        let mut den = 0.0;
        for (i, y) in logs.iter().enumerate() {
            num += (i as f64 - xbar) * (y - ybar);
            den += (i as f64 - xbar) * (i as f64 - xbar);
        }
        num / den
    }
}
