//! Whole-space operators: masked cell projectors, level details over ℝ^d,
//! the piecewise-polynomial classes with boundary-coefficient constraints,
//! the Bernstein-type inequality experiment, and the truncated extension
//! operator.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{l_of_alpha, AnalysisError, Lq, Theta};
use crate::index::{dyadic_cell, IndexBox, MultiIndex, Rect};
use crate::oracle::{FnOracle, Oracle, SmoothnessHint};
use crate::polyproj::{
    masked_project, CoeffTensor, MaskedProjection, MonomialPoly, PolyError, QuadSpec,
};
use crate::quasiinterp::{
    shift_range, IndexedFamily, PiecewiseGrid, QuasiBuilder, QuasiError, SplineBlend,
};
use crate::splines::eval_g;

#[derive(Debug, Error)]
pub enum ExtError {
    #[error("p = {0} rejected: the extension bounds require 1 ≤ p < ∞")]
    BadP(f64),
    #[error("theta = {0} outside [1, ∞]")]
    BadTheta(f64),
    #[error("spline order m = {m} must be ≥ 𝔢 and dominate l - 𝔢 = {need}")]
    BadSplineOrder { m: MultiIndex, need: MultiIndex },
    #[error("truncation level must be nonnegative")]
    BadTruncation,
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Quasi(#[from] QuasiError),
    #[error(transparent)]
    Poly(#[from] PolyError),
}

// ---------------------------------------------------------------------------
// Zero extension and the fixed support box
// ---------------------------------------------------------------------------

/// ℐ: extend a function on the cube by zero to the whole space.
pub fn zero_extend(f: Arc<dyn Oracle>) -> Arc<dyn Oracle> {
    let d = f.dim();
    let hint = f.hint();
    Arc::new(FnOracle::with_hint(d, hint, move |x: &[f64]| {
        if x.iter().all(|&v| (0.0..=1.0).contains(&v)) {
            f.eval(x)
        } else {
            0.0
        }
    }))
}

/// Q^{d,m} = -(m+𝔢) + (2m+3𝔢)·I^d, the support box of every level blend.
pub fn support_box(m: &MultiIndex) -> Rect {
    let corner: Vec<f64> = m.entries().iter().map(|&v| -((v + 1) as f64)).collect();
    let edge: Vec<f64> = m.entries().iter().map(|&v| (2 * v + 3) as f64).collect();
    Rect::of(&corner, &edge)
}

/// The masked whole-space cell projector: χ_{Q^{d,m}} times the projection
/// of f over the dyadic cell Q_{κ,ν}.
pub fn global_local_projector(
    f: &dyn Oracle,
    kappa: &MultiIndex,
    nu: &MultiIndex,
    degree: &MultiIndex,
    m: &MultiIndex,
    quad: &QuadSpec,
) -> Result<MaskedProjection, ExtError> {
    let cell = dyadic_cell(kappa, nu);
    Ok(masked_project(f, &cell, &support_box(m), degree, quad)?)
}

// ---------------------------------------------------------------------------
// Global piecewise-polynomial families
// ---------------------------------------------------------------------------

/// An element of the class 𝒫_κ^{d,l,m}: the blend Σ f_ν g_{κ,ν}^{d,m} over
/// all shift indices, as a function on ℝ^d supported in Q^{d,m}.
#[derive(Clone, Debug)]
pub struct GlobalPiecewisePoly {
    pub blend: SplineBlend,
}

impl GlobalPiecewisePoly {
    pub fn new(blend: SplineBlend) -> Self {
        Self { blend }
    }

    pub fn kappa(&self) -> &MultiIndex {
        &self.blend.kappa
    }

    pub fn m(&self) -> &MultiIndex {
        &self.blend.m
    }

    pub fn degree(&self) -> &MultiIndex {
        self.blend.degree()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.blend.eval(x)
    }

    pub fn family(&self) -> &IndexedFamily<MonomialPoly> {
        self.blend.family()
    }

    /// Compile on the support lattice (whole space; zero outside).
    pub fn compile(&self) -> PiecewiseGrid {
        self.blend.compile_support()
    }

    /// Compile the restriction to the unit cube.
    pub fn compile_cube(&self) -> PiecewiseGrid {
        self.blend.compile_cube()
    }

    pub fn schema(&self) -> PiecewisePolySchema {
        PiecewisePolySchema::from_poly(self)
    }
}

impl Oracle for GlobalPiecewisePoly {
    fn dim(&self) -> usize {
        self.blend.kappa.dim()
    }

    fn eval(&self, x: &[f64]) -> f64 {
        self.blend.eval(x)
    }

    fn hint(&self) -> SmoothnessHint {
        SmoothnessHint::PiecewiseSmooth
    }
}

/// The level-κ whole-space detail 𝓔_κ^{d,l-𝔢,m,ℝ} f as a coefficient
/// family: the polynomial at shift ν is the alternating refinement-mask
/// combination of cell projections, the mask χ_{Q^{d,m}} being inert under
/// the generators' support. The builder must wrap a whole-space oracle.
pub fn global_detail(
    builder: &QuasiBuilder,
    kappa: &MultiIndex,
) -> Result<GlobalPiecewisePoly, ExtError> {
    Ok(GlobalPiecewisePoly::new(builder.detail(kappa)?.blend))
}

// ---------------------------------------------------------------------------
// Class membership: the boundary-coefficient constraints
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct ClassViolation {
    /// 1-based axis.
    pub axis: usize,
    pub index: i64,
    pub reference: i64,
    pub location: Vec<f64>,
    pub difference: f64,
    pub scale: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ClassCheckReport {
    pub pass: bool,
    pub checked_pairs: usize,
    pub tolerance: f64,
    pub violations: Vec<ClassViolation>,
}

/// Evaluate the axis-sliced polynomial f^j_{ν_j}(x): the sum over all other
/// axes' shifts of f_{(ν_j, ν^{J_j})}(x) Π_{i≠j} g_{κ_i,ν_i}(x_i).
fn axis_slice_eval(
    fam: &IndexedFamily<MonomialPoly>,
    kappa: &MultiIndex,
    m: &MultiIndex,
    axis: usize,
    nu_axis: i64,
    x: &[f64],
) -> f64 {
    let d = kappa.dim();
    // Active shift window on the other axes.
    let mut lo = Vec::with_capacity(d);
    let mut hi = Vec::with_capacity(d);
    for j in 0..d {
        if j == axis {
            lo.push(nu_axis);
            hi.push(nu_axis);
        } else {
            let cell = ((kappa[j] as f64).exp2() * x[j]).floor() as i64;
            lo.push((cell - m[j]).max(-m[j]));
            hi.push(cell.min((1i64 << kappa[j]) - 1));
        }
    }
    if lo.iter().zip(&hi).any(|(a, b)| a > b) {
        return 0.0;
    }
    let window = IndexBox::new(MultiIndex::of(&lo), MultiIndex::of(&hi)).expect("dims");
    let mut acc = 0.0;
    for nu in window.iter() {
        if let Some(poly) = fam.get(&nu) {
            let mut g = 1.0;
            for i in 0..d {
                if i == axis {
                    continue;
                }
                let arg = (kappa[i] as f64).exp2() * x[i] - nu[i] as f64;
                g *= crate::splines::spline(m[i] as usize).value(arg);
                if g == 0.0 {
                    break;
                }
            }
            if g != 0.0 {
                acc += poly.eval(x) * g;
            }
        }
    }
    acc
}

/// Check the low-edge and high-edge slice equalities of the class
/// 𝒫′_κ^{d,l,m} on a sample grid of Q^{d,m}; equality there extends to all
/// of ℝ^d for class members.
pub fn class_check(
    poly: &GlobalPiecewisePoly,
    samples_per_axis: usize,
    rel_tolerance: f64,
) -> ClassCheckReport {
    let kappa = poly.kappa().clone();
    let m = poly.m().clone();
    let d = kappa.dim();
    let fam = poly.family();
    let boxx = support_box(&m);
    let mut violations = Vec::new();
    let mut checked = 0usize;

    for axis in 0..d {
        let top = 1i64 << kappa[axis];
        let mut pairs: Vec<(i64, i64)> = Vec::new();
        // Low block ν_j ∈ [-m_j, 0] against reference 0.
        for nu_j in -m[axis]..=0 {
            if nu_j != 0 {
                pairs.push((nu_j, 0));
            }
        }
        // High block ν_j ∈ [2^κ-m-1, 2^κ-1] against its low end.
        let href = top - m[axis] - 1;
        for nu_j in href.max(-m[axis])..=top - 1 {
            if nu_j != href && nu_j >= -m[axis] {
                pairs.push((nu_j, href.max(-m[axis])));
            }
        }
        for (nu_j, reference) in pairs {
            checked += 1;
            let mut worst = 0.0f64;
            let mut worst_x = vec![0.0; d];
            let mut scale = 0.0f64;
            crate::quad::sample_grid(&boxx, samples_per_axis, |x| {
                let a = axis_slice_eval(fam, &kappa, &m, axis, nu_j, x);
                let b = axis_slice_eval(fam, &kappa, &m, axis, reference, x);
                scale = scale.max(a.abs()).max(b.abs());
                let diff = (a - b).abs();
                if diff > worst {
                    worst = diff;
                    worst_x = x.to_vec();
                }
            });
            if worst > rel_tolerance * scale.max(1e-30) {
                violations.push(ClassViolation {
                    axis: axis + 1,
                    index: nu_j,
                    reference,
                    location: worst_x,
                    difference: worst,
                    scale,
                });
            }
        }
    }
    ClassCheckReport {
        pass: violations.is_empty(),
        checked_pairs: checked,
        tolerance: rel_tolerance,
        violations,
    }
}

/// Draw a random element of 𝒫′_κ^{d,l,m}: independent standard-normal
/// coefficients for the free representatives (interior shifts plus one per
/// clamped edge block), copied across each block.
pub fn random_class_element(
    kappa: &MultiIndex,
    degree: &MultiIndex,
    m: &MultiIndex,
    rng: &mut impl Rng,
) -> GlobalPiecewisePoly {
    let d = kappa.dim();
    let range = shift_range(kappa, m);
    let rep = |nu: &MultiIndex| -> MultiIndex {
        let mut out = Vec::with_capacity(d);
        for j in 0..d {
            let h = (1i64 << kappa[j]) - m[j] - 1;
            out.push(if h <= 0 { 0 } else { nu[j].clamp(0, h) });
        }
        MultiIndex::of(&out)
    };
    let mut reps: std::collections::BTreeMap<Vec<i64>, MonomialPoly> =
        std::collections::BTreeMap::new();
    // Iterate in index order so the draw sequence is deterministic per seed.
    for nu in range.iter() {
        let r = rep(&nu);
        if !reps.contains_key(r.entries()) {
            let dims: Vec<usize> = degree.entries().iter().map(|&l| l as usize + 1).collect();
            let mut coeffs = CoeffTensor::zeros(dims);
            for v in coeffs.data_mut() {
                *v = sample_standard_normal(rng);
            }
            reps.insert(
                r.entries().to_vec(),
                MonomialPoly::from_coeffs(degree.clone(), coeffs),
            );
        }
    }
    let fam = IndexedFamily::from_fn(range, |nu| {
        Ok(reps.get(rep(nu).entries()).expect("drawn").clone())
    })
    .expect("infallible");
    GlobalPiecewisePoly::new(SplineBlend::new(
        kappa.clone(),
        m.clone(),
        degree.clone(),
        fam,
    ))
}

fn sample_standard_normal(rng: &mut impl Rng) -> f64 {
    // Box-Muller; two uniforms per draw keeps the stream simple and seeded.
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

// ---------------------------------------------------------------------------
// Bernstein-type inequality experiment
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct BernsteinReport {
    pub lambda: Vec<i64>,
    pub q: f64,
    pub levels: Vec<Vec<i64>>,
    pub max_ratios: Vec<f64>,
    /// log₂ of consecutive max-ratio quotients per uniform refinement.
    pub slopes: Vec<f64>,
    /// Least-squares slope of log₂(max ratio) against the level counter.
    pub fit_slope: f64,
    pub expected_slope: f64,
    pub trials: usize,
}

/// Least-squares slope of log₂(values) against the index 0,1,2,…
pub fn log2_fit_slope(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let logs: Vec<f64> = values.iter().map(|v| v.max(1e-300).log2()).collect();
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

/// For random class elements F, the ratio ‖𝒟^λ F‖_{L_q(ℝ^d)} / ‖F‖_{L_q(I^d)}
/// per level; the max per level should scale like 2^{(κ,λ)}.
#[allow(clippy::too_many_arguments)]
pub fn bernstein_experiment(
    levels: &[MultiIndex],
    degree: &MultiIndex,
    m: &MultiIndex,
    lambda: &MultiIndex,
    q: Lq,
    trials: usize,
    rng: &mut impl Rng,
    lq_order: usize,
) -> Result<BernsteinReport, ExtError> {
    let mut max_ratios = Vec::with_capacity(levels.len());
    for kappa in levels {
        let mut best: f64 = 0.0;
        for _ in 0..trials {
            let f = random_class_element(kappa, degree, m, rng);
            let whole = f.compile();
            let deriv = whole.derivative(lambda)?;
            let num = deriv.lq_norm(q, lq_order, 6);
            let den = f.compile_cube().lq_norm(q, lq_order, 6);
            if den > 1e-12 {
                best = best.max(num / den);
            }
        }
        max_ratios.push(best);
    }
    let slopes = max_ratios
        .windows(2)
        .map(|w| (w[1] / w[0]).log2())
        .collect();
    let fit_slope = log2_fit_slope(&max_ratios);
    let qv = match q {
        Lq::Finite(p) => p,
        Lq::Infinity => f64::INFINITY,
    };
    Ok(BernsteinReport {
        lambda: lambda.entries().to_vec(),
        q: qv,
        levels: levels.iter().map(|k| k.entries().to_vec()).collect(),
        max_ratios,
        slopes,
        fit_slope,
        expected_slope: lambda.sum() as f64,
        trials,
    })
}

// ---------------------------------------------------------------------------
// The truncated extension operator
// ---------------------------------------------------------------------------

/// Truncated extension Σ_{κ ≤ K𝔢} 𝓔_κ^{d,l-𝔢,m,ℝ}(ℐ f): per-level detail
/// families plus compiled piecewise forms on the common fine grid.
pub struct ExtensionResult {
    pub alpha: Vec<f64>,
    pub p: f64,
    pub theta: Theta,
    pub l: MultiIndex,
    pub m: MultiIndex,
    pub truncation: i64,
    pub levels: Vec<(MultiIndex, GlobalPiecewisePoly)>,
    /// L_p norm of each level detail over ℝ^d, aligned with `levels`.
    pub level_norms: Vec<f64>,
    /// Scalar grouping Σ_{κ: max_j κ_j = k} of the details, k = 0..=K.
    pub by_max_level: Vec<PiecewiseGrid>,
    /// The full truncated sum.
    pub compiled: PiecewiseGrid,
}

impl ExtensionResult {
    pub fn dim(&self) -> usize {
        self.l.dim()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.compiled.eval(x)
    }

    /// 𝒟^λ of the truncated extension, exact per cell.
    pub fn derivative(&self, lambda: &MultiIndex) -> Result<PiecewiseGrid, ExtError> {
        Ok(self.compiled.derivative(lambda)?)
    }

    pub fn support(&self) -> Rect {
        self.compiled.domain()
    }

    pub fn schema(&self) -> ExtensionSchema {
        ExtensionSchema::from_result(self)
    }
}

/// Build the truncated extension of a function given on the cube.
pub fn extend(
    f: Arc<dyn Oracle>,
    alpha: &[f64],
    p: f64,
    theta: Theta,
    m: &MultiIndex,
    truncation: i64,
) -> Result<ExtensionResult, ExtError> {
    if !(1.0..f64::INFINITY).contains(&p) {
        return Err(ExtError::BadP(p));
    }
    if let Theta::Finite(t) = theta {
        if !(1.0..f64::INFINITY).contains(&t) {
            return Err(ExtError::BadTheta(t));
        }
    }
    if truncation < 0 {
        return Err(ExtError::BadTruncation);
    }
    let l = l_of_alpha(alpha)?;
    let d = l.dim();
    let ones = MultiIndex::ones(d);
    let degree = l.zip(&ones, |a, b| a - b);
    if !ones.le(m) || !degree.le(m) {
        return Err(ExtError::BadSplineOrder {
            m: m.clone(),
            need: degree,
        });
    }
    let extended = zero_extend(f);
    let builder = QuasiBuilder::new(extended.as_ref(), &l, m)?;

    // Common fine grid: cells of width 2^{-K} covering [-m_j, 1 + m_j].
    let cap = truncation;
    let fine_h: Vec<f64> = vec![(-(cap as f64)).exp2(); d];
    let origin: Vec<f64> = (0..d).map(|j| -(m[j] as f64)).collect();
    let n: Vec<usize> = (0..d)
        .map(|j| ((1i64 << cap) * (2 * m[j] + 1)) as usize)
        .collect();

    let level_box = IndexBox::new(MultiIndex::zeros(d), MultiIndex::constant(d, cap))
        .expect("dims");
    let mut levels = Vec::new();
    let mut level_norms = Vec::new();
    let mut by_max: Vec<Option<PiecewiseGrid>> = vec![None; cap as usize + 1];
    let mut total: Option<PiecewiseGrid> = None;
    for kappa in level_box.iter() {
        let detail = global_detail(&builder, &kappa)?;
        let own = detail.compile();
        level_norms.push(own.lq_norm(Lq::Finite(p), lq_order_for(&degree, m), 6));
        let resampled = own.resample(&origin, &fine_h, &n);
        let slot = kappa.max_entry() as usize;
        by_max[slot] = Some(match by_max[slot].take() {
            Some(acc) => acc.add(&resampled),
            None => resampled.clone(),
        });
        total = Some(match total.take() {
            Some(acc) => acc.add(&resampled),
            None => resampled,
        });
        levels.push((kappa, detail));
    }
    Ok(ExtensionResult {
        alpha: alpha.to_vec(),
        p,
        theta,
        l,
        m: m.clone(),
        truncation: cap,
        levels,
        level_norms,
        by_max_level: by_max.into_iter().map(|g| g.expect("filled")).collect(),
        compiled: total.expect("at least level 0"),
    })
}

pub fn lq_order_for(degree: &MultiIndex, m: &MultiIndex) -> usize {
    ((degree.max_entry() + m.max_entry()) as usize + 2).max(4)
}

// ---------------------------------------------------------------------------
// Family reconstruction (injectivity of the representation)
// ---------------------------------------------------------------------------

/// Recover the coefficient family of a blend from dense point samples by
/// least squares; the representation map {f_ν} → Σ f_ν g_{κ,ν} is an
/// isomorphism, so the recovery is unique.
pub fn reconstruct_family(
    f: &dyn Oracle,
    kappa: &MultiIndex,
    degree: &MultiIndex,
    m: &MultiIndex,
) -> IndexedFamily<MonomialPoly> {
    let d = kappa.dim();
    let range = shift_range(kappa, m);
    let monomials = crate::polyproj::degree_box(degree);
    let n_unknowns = range.count() * monomials.count();

    // Sample grid: (max degree + 2) points per axis inside every lattice
    // cell of the support.
    let h = kappa.pow2_neg();
    let per_cell = (degree.max_entry() + m.max_entry()) as usize + 2;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut rhs: Vec<f64> = Vec::new();
    let cell_lo = m.map(|v| -v);
    let cell_hi = kappa.zip(m, |k, mj| (1i64 << k) + mj - 1);
    let cells = IndexBox::new(cell_lo, cell_hi).expect("dims");
    for cell in cells.iter() {
        let corner: Vec<f64> = (0..d).map(|j| cell[j] as f64 * h[j]).collect();
        let unit = Rect::of(&corner, &h);
        crate::quad::sample_grid(&unit, per_cell, |x| {
            // Offset interior samples away from the faces.
            let xin: Vec<f64> = (0..d)
                .map(|j| {
                    let lo = unit.corner()[j] + 1e-3 * h[j];
                    let hi = unit.corner()[j] + (1.0 - 1e-3) * h[j];
                    x[j].clamp(lo, hi)
                })
                .collect();
            let mut row = vec![0.0; n_unknowns];
            let mut col = 0usize;
            for nu in range.iter() {
                let g = eval_g(kappa, &nu, m, &xin);
                for mu in monomials.iter() {
                    if g != 0.0 {
                        let mono: f64 = (0..d)
                            .map(|j| xin[j].powi(mu[j] as i32))
                            .product();
                        row[col] = g * mono;
                    }
                    col += 1;
                }
            }
            rows.push(row);
            rhs.push(f.eval(&xin));
        });
    }
    let a = nalgebra::DMatrix::from_fn(rows.len(), n_unknowns, |i, j| rows[i][j]);
    let b = nalgebra::DVector::from_vec(rhs);
    let svd = a.svd(true, true);
    let sol = svd.solve(&b, 1e-12).expect("least squares solvable");

    let dims: Vec<usize> = degree.entries().iter().map(|&l| l as usize + 1).collect();
    let mono_count: usize = dims.iter().product();
    let mut polys = Vec::with_capacity(range.count());
    for (i, _) in range.iter().enumerate() {
        let mut coeffs = CoeffTensor::zeros(dims.clone());
        for (slot, mu) in monomials.iter().enumerate() {
            let idx: Vec<usize> = mu.entries().iter().map(|&v| v as usize).collect();
            coeffs.set(&idx, sol[i * mono_count + slot]);
        }
        polys.push(MonomialPoly::from_coeffs(degree.clone(), coeffs));
    }
    let mut it = polys.into_iter();
    IndexedFamily::from_fn(range, |_| Ok(it.next().expect("sized")))
        .expect("infallible")
}

// ---------------------------------------------------------------------------
// JSON schema
// ---------------------------------------------------------------------------

/// Serialized coefficient family: one row per shift index in iteration
/// order of the index box, coefficients in row-major λ-order.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PiecewisePolySchema {
    pub schema: u32,
    pub kind: String,
    pub kappa: Vec<i64>,
    pub degree: Vec<i64>,
    pub m: Vec<i64>,
    pub index_lo: Vec<i64>,
    pub index_hi: Vec<i64>,
    pub coefficients: Vec<Vec<f64>>,
}

impl PiecewisePolySchema {
    pub fn from_poly(p: &GlobalPiecewisePoly) -> Self {
        let fam = p.family();
        Self {
            schema: 1,
            kind: "piecewise-poly".into(),
            kappa: p.kappa().entries().to_vec(),
            degree: p.degree().entries().to_vec(),
            m: p.m().entries().to_vec(),
            index_lo: fam.range().lo().entries().to_vec(),
            index_hi: fam.range().hi().entries().to_vec(),
            coefficients: fam
                .iter()
                .map(|(_, poly)| poly.coeffs().data().to_vec())
                .collect(),
        }
    }

    pub fn to_poly(&self) -> GlobalPiecewisePoly {
        let kappa = MultiIndex::of(&self.kappa);
        let degree = MultiIndex::of(&self.degree);
        let m = MultiIndex::of(&self.m);
        let range = IndexBox::new(MultiIndex::of(&self.index_lo), MultiIndex::of(&self.index_hi))
            .expect("schema range");
        let dims: Vec<usize> = degree.entries().iter().map(|&l| l as usize + 1).collect();
        let mut rows = self.coefficients.iter();
        let fam = IndexedFamily::from_fn(range, |_| {
            let row = rows.next().expect("coefficient row");
            let mut t = CoeffTensor::zeros(dims.clone());
            t.data_mut().copy_from_slice(row);
            Ok(MonomialPoly::from_coeffs(degree.clone(), t))
        })
        .expect("infallible");
        GlobalPiecewisePoly::new(SplineBlend::new(kappa, m, degree, fam))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LevelNormEntry {
    pub kappa: Vec<i64>,
    pub lp_norm: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExtensionSchema {
    pub schema: u32,
    pub kind: String,
    pub alpha: Vec<f64>,
    pub p: f64,
    /// "inf" for the Nikolskii routing.
    pub theta: String,
    pub l: Vec<i64>,
    pub m: Vec<i64>,
    pub truncation: i64,
    pub level_norms: Vec<LevelNormEntry>,
    pub levels: Vec<PiecewisePolySchema>,
}

impl ExtensionSchema {
    pub fn from_result(r: &ExtensionResult) -> Self {
        Self {
            schema: 1,
            kind: "extension".into(),
            alpha: r.alpha.clone(),
            p: r.p,
            theta: match r.theta {
                Theta::Finite(t) => format!("{t}"),
                Theta::Infinity => "inf".into(),
            },
            l: r.l.entries().to_vec(),
            m: r.m.entries().to_vec(),
            truncation: r.truncation,
            level_norms: r
                .levels
                .iter()
                .zip(&r.level_norms)
                .map(|((kappa, _), &n)| LevelNormEntry {
                    kappa: kappa.entries().to_vec(),
                    lp_norm: n,
                })
                .collect(),
            levels: r.levels.iter().map(|(_, p)| p.schema()).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{self, Domain, LpGrid, NormGrid, SmoothnessParams};
    use crate::polyproj::{tensor_apply, AxisOperator};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn smooth_2d() -> Arc<dyn Oracle> {
        Arc::new(FnOracle::new(2, |x: &[f64]| {
            (PI * x[0]).sin() * (0.5 + x[1]).powi(2)
        }))
    }

    #[test]
    fn zero_extension_vanishes_outside() {
        let f: Arc<dyn Oracle> = Arc::new(FnOracle::new(1, |x: &[f64]| 1.0 + x[0]));
        let zf = zero_extend(f.clone());
        assert_eq!(zf.eval(&[0.5]), 1.5);
        assert_eq!(zf.eval(&[1.5]), 0.0);
        assert_eq!(zf.eval(&[-0.1]), 0.0);
    }

    #[test]
    fn zero_extension_preserves_lp_norm() {
        let f: Arc<dyn Oracle> = Arc::new(FnOracle::new(1, |x: &[f64]| (3.0 * x[0]).cos()));
        let zf = zero_extend(f.clone());
        let inside = analysis::lp_norm_on_rect(
            f.as_ref(),
            &Rect::unit(1),
            Lq::Finite(2.0),
            &analysis::LpGrid::uniform(1, 16, 4),
        );
        // Integrate the extension over a strictly larger box whose panels
        // align with the cube faces (the integrand jumps there).
        let outside = analysis::lp_norm_on_rect(
            zf.as_ref(),
            &Rect::of(&[-1.0], &[3.0]),
            Lq::Finite(2.0),
            &analysis::LpGrid::uniform(1, 48, 4),
        );
        assert!((inside - outside).abs() < 1e-10);
    }

    #[test]
    fn masked_projector_continues_global_polynomials() {
        // A global polynomial of matching degree projects to itself; the
        // masked operator is its continuation windowed to the support box.
        let f: Arc<dyn Oracle> = Arc::new(FnOracle::with_hint(
            1,
            SmoothnessHint::Polynomial(MultiIndex::of(&[1])),
            |x: &[f64]| 2.0 - 0.75 * x[0],
        ));
        let m = MultiIndex::of(&[2]);
        let masked = global_local_projector(
            f.as_ref(),
            &MultiIndex::of(&[2]),
            &MultiIndex::of(&[1]),
            &MultiIndex::of(&[1]),
            &m,
            &QuadSpec::auto(&f.hint(), &MultiIndex::of(&[1])),
        )
        .unwrap();
        for x in [-2.5, -0.5, 0.3, 1.9, 3.5] {
            let want = if support_box(&m).contains_half_open(&[x]) {
                f.eval(&[x])
            } else {
                0.0
            };
            assert!((masked.eval(&[x]) - want).abs() < 1e-12, "x={x}");
        }
    }

    #[test]
    fn masked_projector_masks_and_restricts() {
        let f: Arc<dyn Oracle> = Arc::new(FnOracle::new(1, |x: &[f64]| (x[0] + 0.2).powi(2)));
        let zf = zero_extend(f.clone());
        let kappa = MultiIndex::of(&[2]);
        let nu = MultiIndex::of(&[1]);
        let deg = MultiIndex::of(&[1]);
        let m = MultiIndex::of(&[2]);
        let quad = QuadSpec::uniform(1, 6);
        let masked =
            global_local_projector(zf.as_ref(), &kappa, &nu, &deg, &m, &quad).unwrap();
        // Outside Q^{1,2} = (-3, 4): zero.
        assert_eq!(masked.eval(&[4.5]), 0.0);
        assert_eq!(masked.eval(&[-3.5]), 0.0);
        // Inside the cube: equals the cube-side cell projection.
        let cube_side = crate::quasiinterp::local_projector(
            f.as_ref(),
            &kappa,
            &nu,
            &deg,
            &MultiIndex::zeros(1),
            &quad,
        )
        .unwrap();
        for x in [0.3, 0.4, 0.7] {
            assert!((masked.eval(&[x]) - cube_side.eval(&[x])).abs() < 1e-12);
        }
    }

    #[test]
    fn masked_projector_factorizes_per_axis() {
        let f = smooth_2d();
        let zf = zero_extend(f);
        let kappa = MultiIndex::of(&[1, 2]);
        let nu = MultiIndex::of(&[1, 2]);
        let deg = MultiIndex::of(&[1, 1]);
        let m = MultiIndex::of(&[1, 2]);
        let quad = QuadSpec::uniform(2, 6);
        let direct = global_local_projector(zf.as_ref(), &kappa, &nu, &deg, &m, &quad).unwrap();
        let cell = dyadic_cell(&kappa, &nu);
        let mask = support_box(&m);
        // Matched per-axis quadrature: the identity holds for the exact
        // operators, so both realizations must integrate alike.
        let ops: Vec<AxisOperator> = (0..2)
            .map(|j| AxisOperator::MaskedProjector {
                corner: cell.corner()[j],
                edge: cell.edge()[j],
                degree: deg[j] as usize,
                quad_nodes: 6,
                mask_corner: mask.corner()[j],
                mask_edge: mask.edge()[j],
            })
            .collect();
        let lifted = tensor_apply(ops, zf);
        for x in [[0.3, 0.6], [0.6, 0.8], [2.0, 0.5], [0.3, -2.0]] {
            let a = direct.eval(&x);
            let b = lifted.eval(&x);
            assert!((a - b).abs() < 1e-10, "{x:?}: {a} vs {b}");
        }
    }

    #[test]
    fn global_detail_agrees_with_cube_detail_inside() {
        let f: Arc<dyn Oracle> =
            Arc::new(FnOracle::new(1, |x: &[f64]| (2.0 * PI * x[0]).sin() + x[0]));
        let l = MultiIndex::of(&[2]);
        let m = MultiIndex::of(&[2]);
        let zf = zero_extend(f.clone());
        let gb = QuasiBuilder::new(zf.as_ref(), &l, &m).unwrap();
        let cb = QuasiBuilder::new(f.as_ref(), &l, &m).unwrap();
        for k in 0..=3i64 {
            let kappa = MultiIndex::of(&[k]);
            let gd = global_detail(&gb, &kappa).unwrap();
            let cd = cb.detail(&kappa).unwrap();
            for i in 0..60 {
                let x = (i as f64 + 0.5) / 60.0;
                assert!(
                    (gd.eval(&[x]) - cd.eval(&[x])).abs() < 1e-10,
                    "κ={k} x={x}"
                );
            }
            // And it vanishes outside the support box.
            let sup = gd.blend.support();
            assert_eq!(gd.eval(&[sup.corner()[0] - 0.05]), 0.0);
            assert_eq!(gd.eval(&[sup.upper()[0] + 0.05]), 0.0);
        }
    }

    #[test]
    fn global_detail_passes_class_check() {
        let f = smooth_2d();
        let zf = zero_extend(f);
        let l = MultiIndex::of(&[2, 2]);
        let m = MultiIndex::of(&[2, 2]);
        let builder = QuasiBuilder::new(zf.as_ref(), &l, &m).unwrap();
        for kappa in [MultiIndex::of(&[0, 0]), MultiIndex::of(&[2, 1])] {
            let detail = global_detail(&builder, &kappa).unwrap();
            let report = class_check(&detail, 7, 1e-9);
            assert!(
                report.pass,
                "κ={kappa}: {:?}",
                report.violations.first()
            );
        }
    }

    #[test]
    fn perturbed_family_fails_class_check() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let kappa = MultiIndex::of(&[3]);
        let deg = MultiIndex::of(&[1]);
        let m = MultiIndex::of(&[2]);
        let element = random_class_element(&kappa, &deg, &m, &mut rng);
        assert!(class_check(&element, 9, 1e-9).pass);
        // Perturb one clamped-edge polynomial.
        let fam = element.family();
        let mut polys: Vec<MonomialPoly> = fam.iter().map(|(_, p)| p.clone()).collect();
        polys[0] = polys[0].scale(1.5);
        let mut it = polys.into_iter();
        let fam2 = IndexedFamily::from_fn(fam.range().clone(), |_| Ok(it.next().unwrap()))
            .unwrap();
        let bad = GlobalPiecewisePoly::new(SplineBlend::new(
            kappa.clone(),
            m.clone(),
            deg.clone(),
            fam2,
        ));
        let report = class_check(&bad, 9, 1e-9);
        assert!(!report.pass);
        assert_eq!(report.violations[0].axis, 1);
    }

    #[test]
    fn single_polynomial_blend_is_in_class() {
        // All f_ν equal: the partition of unity makes F = f₀ inside the cube
        // and the slice equalities hold trivially.
        let kappa = MultiIndex::of(&[2, 2]);
        let deg = MultiIndex::of(&[1, 1]);
        let m = MultiIndex::of(&[1, 1]);
        let mut base = MonomialPoly::zero(deg.clone());
        base.coeffs_mut().set(&[0, 0], 0.7);
        base.coeffs_mut().set(&[1, 1], -0.3);
        let fam = IndexedFamily::from_fn(shift_range(&kappa, &m), |_| Ok(base.clone())).unwrap();
        let f = GlobalPiecewisePoly::new(SplineBlend::new(kappa, m, deg, fam));
        assert!(class_check(&f, 7, 1e-9).pass);
        // Inside the cube the blend reproduces the polynomial.
        for x in [[0.2, 0.3], [0.6, 0.9]] {
            assert!((f.eval(&x) - base.eval(&x)).abs() < 1e-12);
        }
    }

    #[test]
    fn reconstruction_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let kappa = MultiIndex::of(&[2]);
        let deg = MultiIndex::of(&[2]);
        let m = MultiIndex::of(&[1]);
        let f = random_class_element(&kappa, &deg, &m, &mut rng);
        let rec = reconstruct_family(&f, &kappa, &deg, &m);
        let mut worst = 0.0f64;
        let mut scale = 0.0f64;
        for ((_, a), (_, b)) in f.family().iter().zip(rec.iter()) {
            for (ca, cb) in a.coeffs().data().iter().zip(b.coeffs().data()) {
                worst = worst.max((ca - cb).abs());
                scale = scale.max(ca.abs());
            }
        }
        assert!(worst <= 1e-8 * scale.max(1.0), "worst {worst}");
    }

    #[test]
    fn bernstein_ratios_grow_with_level() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        // Start above the degenerate regime 2^κ ≤ 2m+2 where the whole
        // family collapses to a single representative.
        let levels: Vec<MultiIndex> = (2..=5).map(|k| MultiIndex::of(&[k])).collect();
        let rep = bernstein_experiment(
            &levels,
            &MultiIndex::of(&[2]),
            &MultiIndex::of(&[2]),
            &MultiIndex::of(&[1]),
            Lq::Finite(2.0),
            12,
            &mut rng,
            6,
        )
        .unwrap();
        assert!(
            (0.5..=1.5).contains(&rep.fit_slope),
            "fit {} slopes {:?}",
            rep.fit_slope,
            rep.slopes
        );
        // λ = 0 control: no growth once past the degenerate levels.
        let levels0: Vec<MultiIndex> = (3..=6).map(|k| MultiIndex::of(&[k])).collect();
        let rep0 = bernstein_experiment(
            &levels0,
            &MultiIndex::of(&[2]),
            &MultiIndex::of(&[2]),
            &MultiIndex::of(&[0]),
            Lq::Finite(2.0),
            12,
            &mut rng,
            6,
        )
        .unwrap();
        assert!(
            rep0.fit_slope.abs() <= 0.2,
            "λ=0 fit {} slopes {:?}",
            rep0.fit_slope,
            rep0.slopes
        );
    }

    #[test]
    fn fixed_polynomial_blend_ratio_is_level_stable() {
        // A single global polynomial copied across the family: at λ = 0 the
        // cube-to-space norm ratio converges to 1 as the boundary ramp
        // thins, so it stays finite and level-independent.
        let deg = MultiIndex::of(&[1]);
        let m = MultiIndex::of(&[2]);
        let mut base = MonomialPoly::zero(deg.clone());
        base.coeffs_mut().set(&[0], 0.8);
        base.coeffs_mut().set(&[1], 0.4);
        let mut ratios = Vec::new();
        for k in 2..=6i64 {
            let kappa = MultiIndex::of(&[k]);
            let fam = IndexedFamily::from_fn(shift_range(&kappa, &m), |_| Ok(base.clone()))
                .unwrap();
            let f = GlobalPiecewisePoly::new(SplineBlend::new(
                kappa,
                m.clone(),
                deg.clone(),
                fam,
            ));
            let num = f.compile().lq_norm(Lq::Finite(2.0), 6, 6);
            let den = f.compile_cube().lq_norm(Lq::Finite(2.0), 6, 6);
            ratios.push(num / den);
        }
        let hi = ratios.iter().cloned().fold(0.0, f64::max);
        let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(hi.is_finite() && hi / lo < 1.5, "ratios {ratios:?}");
    }

    #[test]
    fn extension_restricts_to_top_quasi_interpolant() {
        let f: Arc<dyn Oracle> =
            Arc::new(FnOracle::new(1, |x: &[f64]| (2.0 * PI * x[0]).sin()));
        let m = MultiIndex::of(&[2]);
        let ext = extend(
            f.clone(),
            &[1.5],
            2.0,
            Theta::Finite(2.0),
            &m,
            4,
        )
        .unwrap();
        // Restriction identity: the partial sum on the cube equals E_{K𝔢}.
        let builder = QuasiBuilder::new(f.as_ref(), &ext.l, &m).unwrap();
        let top = builder.quasi_interpolant(&MultiIndex::of(&[4])).unwrap();
        for i in 0..100 {
            let x = (i as f64 + 0.5) / 100.0;
            assert!(
                (ext.eval(&[x]) - top.eval(&[x])).abs() < 1e-10,
                "x={x}"
            );
        }
        // Outside the support box the extension vanishes.
        assert_eq!(ext.eval(&[-2.4]), 0.0);
        assert_eq!(ext.eval(&[3.4]), 0.0);
        // Per-level norms decay beyond level 0.
        assert!(ext.level_norms[4] < ext.level_norms[1]);
    }

    #[test]
    fn extension_of_polynomial_has_single_level() {
        let f: Arc<dyn Oracle> = Arc::new(FnOracle::with_hint(
            1,
            SmoothnessHint::Polynomial(MultiIndex::of(&[1])),
            |x: &[f64]| 1.0 - 0.5 * x[0],
        ));
        let ext = extend(f, &[1.5], 2.0, Theta::Finite(2.0), &MultiIndex::of(&[2]), 3).unwrap();
        for (kappa, norm) in ext.levels.iter().map(|(k, _)| k).zip(&ext.level_norms) {
            if kappa.sum() > 0 {
                assert!(*norm < 1e-10, "κ={kappa}: {norm}");
            } else {
                assert!(*norm > 0.1);
            }
        }
    }

    #[test]
    fn extension_rejects_bad_parameters() {
        let f: Arc<dyn Oracle> = Arc::new(FnOracle::new(1, |x: &[f64]| x[0]));
        assert!(extend(
            f.clone(),
            &[-1.0],
            2.0,
            Theta::Finite(2.0),
            &MultiIndex::of(&[2]),
            2
        )
        .is_err());
        assert!(extend(
            f.clone(),
            &[1.5],
            f64::INFINITY,
            Theta::Finite(2.0),
            &MultiIndex::of(&[2]),
            2
        )
        .is_err());
        assert!(extend(
            f.clone(),
            &[2.5],
            2.0,
            Theta::Finite(2.0),
            &MultiIndex::of(&[1]), // m < l - 𝔢
            2
        )
        .is_err());
    }

    #[test]
    fn schema_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let poly = random_class_element(
            &MultiIndex::of(&[2]),
            &MultiIndex::of(&[1]),
            &MultiIndex::of(&[1]),
            &mut rng,
        );
        let schema = poly.schema();
        let text = serde_json::to_string(&schema).unwrap();
        let parsed: PiecewisePolySchema = serde_json::from_str(&text).unwrap();
        let back = parsed.to_poly();
        for x in [-0.4, 0.1, 0.5, 0.77, 1.3] {
            assert!((poly.eval(&[x]) - back.eval(&[x])).abs() < 1e-14);
        }
    }

    #[test]
    fn extension_seminorm_is_finite() {
        let f: Arc<dyn Oracle> =
            Arc::new(FnOracle::new(1, |x: &[f64]| (2.0 * PI * x[0]).sin()));
        let ext = extend(f, &[1.5], 2.0, Theta::Finite(2.0), &MultiIndex::of(&[2]), 3).unwrap();
        let params = SmoothnessParams::new(vec![1.5], 2.0, Theta::Finite(2.0)).unwrap();
        let grid = NormGrid {
            k_max: 4,
            xi_order: 3,
            lp: LpGrid::uniform(1, 40, 3),
            shifts_per_axis: 5,
        };
        let lambda = MultiIndex::of(&[1]);
        let deriv = ext.derivative(&lambda).unwrap();
        let lhs = analysis::extension_seminorm(
            &deriv,
            &ext.support(),
            &params,
            &lambda,
            &[0],
            &grid,
        )
        .unwrap();
        assert!(lhs.is_finite() && lhs > 0.0);
        let dom = Domain::cube(1);
        let f2: Arc<dyn Oracle> =
            Arc::new(FnOracle::new(1, |x: &[f64]| (2.0 * PI * x[0]).sin()));
        let rhs = analysis::besov_norm_prime(f2.as_ref(), &params, &dom, &grid)
            .unwrap()
            .total;
        let ratio = lhs / rhs;
        assert!(ratio.is_finite() && ratio > 0.0, "ratio {ratio}");
    }
}
