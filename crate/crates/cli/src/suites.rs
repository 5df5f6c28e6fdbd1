//! The verification harness: every module's invariant suite at desk scale,
//! exposed both to `mixext verify` and to the acceptance tests. All suites
//! are deterministic given the seed.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mixext::analysis::{
    self, besov_norm_classical, besov_norm_prime, diff_lp_norm, lp_norm_on_rect,
    masked_order, mixed_difference, modulus_avg, modulus_sup, nikolskii_norm_prime, Domain,
    LpGrid, Lq, NormGrid, SmoothnessParams, Theta,
};
use mixext::extension::{
    bernstein_experiment, class_check, extend, global_detail, global_local_projector,
    log2_fit_slope, random_class_element, reconstruct_family, support_box, zero_extend,
    GlobalPiecewisePoly,
};
use mixext::index::{dyadic_cell, indicator_vector, IndexBox, MultiIndex, Rect};
use mixext::oracle::{FnOracle, Oracle, SmoothnessHint};
use mixext::polyproj::{
    masked_project, ortho_basis, project, tensor_apply, tensor_apply_ordered, AxisOperator,
    MonomialPoly, OrthoBasis1D, QuadSpec,
};
use mixext::quasiinterp::{
    approx_error_lp, audit_geometry, detail_bound_report, index_clamp, shift_range,
    CellGeometry, IndexedFamily, QuasiBuilder, SplineBlend,
};
use mixext::splines::{cube_indices, eval_g, spline, RefinementMask};

use crate::catalog::{self, CatalogFunction};
use crate::config::ExperimentConfig;
use crate::report::{CheckResult, ExtensionRatioReport, RatioRow, SuiteResult, VerifyReport};

// ---------------------------------------------------------------------------
// core-index
// ---------------------------------------------------------------------------

pub fn suite_index(seed: u64) -> SuiteResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x1d);
    let mut checks = Vec::new();

    // Componentwise order antisymmetry on random pairs.
    let mut ok = true;
    for _ in 0..300 {
        let d = rng.gen_range(1..=4);
        let a = MultiIndex::of(&(0..d).map(|_| rng.gen_range(-4..=4)).collect::<Vec<_>>());
        let b = MultiIndex::of(&(0..d).map(|_| rng.gen_range(-4..=4)).collect::<Vec<_>>());
        if a.le(&b) && b.le(&a) && a != b {
            ok = false;
        }
        if !a.le(&a) || a.lt(&a) {
            ok = false;
        }
    }
    checks.push(CheckResult::flag(
        "componentwise order antisymmetry",
        ok,
        "300 random pairs, d ≤ 4",
    ));

    // Index-box iteration count.
    let mut ok = true;
    for _ in 0..200 {
        let d = rng.gen_range(1..=3);
        let lo = MultiIndex::of(&(0..d).map(|_| rng.gen_range(-3..=3)).collect::<Vec<_>>());
        let hi = MultiIndex::of(&(0..d).map(|_| rng.gen_range(-3..=3)).collect::<Vec<_>>());
        let b = IndexBox::new(lo.clone(), hi.clone()).unwrap();
        let expected = if b.is_empty() {
            0
        } else {
            (0..d)
                .map(|j| (hi[j] - lo[j] + 1) as usize)
                .product::<usize>()
        };
        if b.iter().count() != expected || b.count() != expected {
            ok = false;
        }
    }
    checks.push(CheckResult::flag(
        "index-box cardinality = Π(hi-lo+1)",
        ok,
        "200 random boxes",
    ));

    // Indicator bijection over all 2^d masks for d ≤ 6.
    let mut ok = true;
    for d in 1..=6usize {
        let mut seen = std::collections::BTreeSet::new();
        for mask in mixext::index::BinaryMask::all(d) {
            let chi = indicator_vector(&mask.support(), d).unwrap();
            if chi != mask.to_multi_index() || chi.support() != mask.support() {
                ok = false;
            }
            seen.insert(chi.entries().to_vec());
        }
        if seen.len() != 1 << d {
            ok = false;
        }
    }
    checks.push(CheckResult::flag(
        "indicator_vector bijective on subsets",
        ok,
        "all masks, d ≤ 6",
    ));

    SuiteResult::new("index", checks)
}

// ---------------------------------------------------------------------------
// splines
// ---------------------------------------------------------------------------

pub fn suite_splines(seed: u64) -> SuiteResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x2e);
    let mut checks = Vec::new();

    // Refinement identity at 10^3 random points per order.
    let mut worst = 0.0f64;
    for m in 0..=4usize {
        let s = spline(m);
        let mask = RefinementMask::new(m);
        for _ in 0..1000 {
            let x: f64 = rng.gen_range(-0.5..(m as f64 + 1.5));
            if m == 0 && (2.0 * x == (2.0 * x).floor() || x == x.floor()) {
                continue;
            }
            let rhs: f64 = (0..=m as i64 + 1)
                .map(|mu| mask.coeff(mu) * s.value(2.0 * x - mu as f64))
                .sum();
            worst = worst.max((s.value(x) - rhs).abs());
        }
    }
    checks.push(CheckResult::le("refinement identity, m ≤ 4", worst, 1e-10));

    // Parity sums: exact in rationals, 1e-14 in floats.
    let exact = (0..=6).all(RefinementMask::parity_sums_exact);
    let mut fworst = 0.0f64;
    for m in 0..=6usize {
        let fc = RefinementMask::new(m);
        let fe: f64 = fc.coeffs().iter().step_by(2).sum();
        let fo: f64 = fc.coeffs().iter().skip(1).step_by(2).sum();
        fworst = fworst.max((fe - 1.0).abs()).max((fo - 1.0).abs());
    }
    checks.push(CheckResult::flag(
        "mask parity sums exact (rational)",
        exact,
        "m ≤ 6",
    ));
    checks.push(CheckResult::le("mask parity sums (float)", fworst, 1e-14));

    // Normalization ∫ψ = 1 exactly in rationals.
    let ok = (0..=6).all(mixext::splines::spline_integral_exact_one);
    checks.push(CheckResult::flag("∫ψ = 1 exact (rational)", ok, "m ≤ 6"));

    // Partition of unity at 10^3 random points, d ∈ {1,2}.
    let mut worst = 0.0f64;
    for (kappa, m) in [
        (MultiIndex::of(&[3]), MultiIndex::of(&[2])),
        (MultiIndex::of(&[2, 3]), MultiIndex::of(&[2, 2])),
        (MultiIndex::of(&[0, 2]), MultiIndex::of(&[1, 2])),
    ] {
        let d = kappa.dim();
        let idx = cube_indices(&kappa, &m);
        for _ in 0..1000 {
            let x: Vec<f64> = (0..d).map(|_| rng.gen_range(0.0..1.0)).collect();
            let total: f64 = idx.iter().map(|nu| eval_g(&kappa, &nu, &m, &x)).sum();
            worst = worst.max((total - 1.0).abs());
        }
    }
    checks.push(CheckResult::le("partition of unity", worst, 1e-10));

    // Derivative sup-norm dyadic scaling.
    let mut worst_rel = 0.0f64;
    for (m, lam) in [(1usize, 1usize), (2, 1), (2, 2), (3, 2)] {
        let s = spline(m);
        let sup_base = (0..4000)
            .map(|i| {
                let x = (m as f64 + 1.0) * (i as f64 + 0.5) / 4000.0;
                s.eval(lam, x).unwrap().abs()
            })
            .fold(0.0f64, f64::max);
        for k in 0..=4i64 {
            let kappa = MultiIndex::of(&[k]);
            let nu = MultiIndex::of(&[0]);
            let mi = MultiIndex::of(&[m as i64]);
            let li = MultiIndex::of(&[lam as i64]);
            let width = (m as f64 + 1.0) * (-(k as f64)).exp2();
            let sup = (0..4000)
                .map(|i| {
                    let x = width * (i as f64 + 0.5) / 4000.0;
                    mixext::splines::eval_g_deriv(&kappa, &nu, &mi, &li, &[x])
                        .unwrap()
                        .abs()
                })
                .fold(0.0f64, f64::max);
            let expected = ((k * lam as i64) as f64).exp2() * sup_base;
            worst_rel = worst_rel.max((sup - expected).abs() / expected.max(1e-30));
        }
    }
    checks.push(CheckResult::le(
        "derivative sup-norm scaling 2^(κ,λ)",
        worst_rel,
        1e-8,
    ));

    // Positivity exactly inside the support.
    let mut ok = true;
    for m in 0..=4usize {
        let s = spline(m);
        for _ in 0..500 {
            let x: f64 = rng.gen_range(-1.0..(m as f64 + 2.0));
            if x == x.floor() {
                continue;
            }
            let v = s.value(x);
            let inside = x > 0.0 && x < (m + 1) as f64;
            if inside != (v > 0.0) || v < 0.0 {
                ok = false;
            }
        }
    }
    checks.push(CheckResult::flag(
        "ψ > 0 iff inside (0, m+1)",
        ok,
        "500 random points per order",
    ));

    SuiteResult::new("splines", checks)
}

// ---------------------------------------------------------------------------
// polyproj
// ---------------------------------------------------------------------------

fn random_poly_coeffs(deg: &MultiIndex, rng: &mut impl Rng) -> MonomialPoly {
    let mut p = MonomialPoly::zero(deg.clone());
    for v in p.coeffs_mut().data_mut() {
        *v = rng.gen_range(-1.0..1.0);
    }
    p
}

pub fn suite_polyproj(seed: u64) -> SuiteResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x3f);
    let mut checks = Vec::new();

    // Orthonormality from the exact Gram matrix.
    let gram = OrthoBasis1D::gram_exact(10).unwrap();
    let mut worst = 0.0f64;
    for (i, row) in gram.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            let want = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((v - want).abs());
        }
    }
    checks.push(CheckResult::le("basis Gram = identity (deg ≤ 10)", worst, 1e-12));

    // π_0 = 1 and π_1 = √3(2x-1).
    let b = ortho_basis(1).unwrap();
    let ok = b.monomial_coeffs(0) == [1.0]
        && (b.eval(1, 1.0) - 3f64.sqrt()).abs() < 1e-14
        && (b.eval(1, 0.0) + 3f64.sqrt()).abs() < 1e-14;
    checks.push(CheckResult::flag("π_0, π_1 closed forms", ok, ""));

    // Reproduction and kernel on random boxes (d ≤ 2).
    let mut worst_rep = 0.0f64;
    let mut worst_ker = 0.0f64;
    for _ in 0..40 {
        let d = rng.gen_range(1..=2usize);
        let corner: Vec<f64> = (0..d).map(|_| rng.gen_range(0.0..0.5)).collect();
        let edge: Vec<f64> = (0..d).map(|_| rng.gen_range(0.1..0.5)).collect();
        let rect = Rect::of(&corner, &edge);
        let deg = MultiIndex::of(&(0..d).map(|_| rng.gen_range(1..=2)).collect::<Vec<_>>());
        let poly = random_poly_coeffs(&deg, &mut rng);
        let pc = poly.clone();
        let oracle = FnOracle::with_hint(
            d,
            SmoothnessHint::Polynomial(deg.clone()),
            move |x: &[f64]| pc.eval(x),
        );
        let proj = project(&oracle, &rect, &deg, &QuadSpec::auto(&oracle.hint(), &deg)).unwrap();
        for _ in 0..10 {
            let x: Vec<f64> = (0..d).map(|_| rng.gen_range(0.0..1.0)).collect();
            worst_rep = worst_rep.max((proj.eval(&x) - poly.eval(&x)).abs());
        }
        // Kernel: project f - Pf at the same degree.
        let residual = FnOracle::new(d, {
            let poly = poly.clone();
            let proj = proj.clone();
            move |x: &[f64]| poly.eval(x) - proj.eval(x)
        });
        let zero = project(&residual, &rect, &deg, &QuadSpec::uniform(d, 6)).unwrap();
        worst_ker = worst_ker.max(zero.coeffs().l2_norm());
    }
    checks.push(CheckResult::le("projector reproduction", worst_rep, 1e-10));
    checks.push(CheckResult::le("projector kernel property", worst_ker, 1e-10));

    // Projector boundedness: ratio invariant across dyadic box scales.
    // The same random oracles are rescaled onto each box, which isolates
    // box-size dependence of the constant in the operator bound.
    for p in [1.0, 2.0, 4.0] {
        let mut per_scale_max = Vec::new();
        let shapes: Vec<Arc<dyn Oracle>> = (0..28)
            .map(|_| catalog::random_smooth(1, &mut rng))
            .collect();
        for k in 0..=6i32 {
            let edge = 0.5f64.powi(k);
            let rect = Rect::of(&[0.2], &[edge]);
            let mut best: f64 = 0.0;
            for f in &shapes {
                let g = {
                    let f = f.clone();
                    let rect = rect.clone();
                    FnOracle::new(1, move |x: &[f64]| {
                        f.eval(&[(x[0] - rect.corner()[0]) / rect.edge()[0]])
                    })
                };
                let deg = MultiIndex::of(&[2]);
                let proj = project(&g, &rect, &deg, &QuadSpec::uniform(1, 8)).unwrap();
                let grid = LpGrid::uniform(1, 12, 4);
                let pn = lp_norm_on_rect(
                    &FnOracle::new(1, {
                        let proj = proj.clone();
                        move |x: &[f64]| proj.eval(x)
                    }),
                    &rect,
                    Lq::Finite(p),
                    &grid,
                );
                let fnorm = lp_norm_on_rect(&g, &rect, Lq::Finite(p), &grid);
                if fnorm > 1e-12 {
                    best = best.max(pn / fnorm);
                }
            }
            per_scale_max.push(best);
        }
        let hi = per_scale_max.iter().cloned().fold(0.0, f64::max);
        let lo = per_scale_max.iter().cloned().fold(f64::INFINITY, f64::min);
        checks.push(CheckResult::le(
            format!("projector bound scale variation, p={p}"),
            hi / lo - 1.0,
            0.1,
        ));
    }

    // Markov/scale inequality: the normalized derivative ratio is invariant
    // across box scales for rescaled random polynomials.
    for (p, q) in [(2.0, 2.0), (1.0, 2.0), (2.0, f64::INFINITY)] {
        let mut per_scale_max = Vec::new();
        let deg = MultiIndex::of(&[2]);
        let lambda = MultiIndex::of(&[1]);
        let polys: Vec<MonomialPoly> = (0..30)
            .map(|_| random_poly_coeffs(&deg, &mut rng))
            .collect();
        for k in 0..=6i32 {
            let delta = 0.5f64.powi(k);
            let rect = Rect::of(&[0.1], &[delta]);
            let mut best: f64 = 0.0;
            for base in &polys {
                // Rescale onto the box: g(x) = base((x - c)/δ).
                let g = base.compose_affine(&[-rect.corner()[0] / delta], &[1.0 / delta]);
                let dg = g.differentiate(&lambda).unwrap();
                let grid = LpGrid::uniform(1, 8, 5);
                let qn = match q.is_finite() {
                    true => lp_norm_on_rect(
                        &FnOracle::new(1, {
                            let dg = dg.clone();
                            move |x: &[f64]| dg.eval(x)
                        }),
                        &rect,
                        Lq::Finite(q),
                        &grid,
                    ),
                    false => lp_norm_on_rect(
                        &FnOracle::new(1, {
                            let dg = dg.clone();
                            move |x: &[f64]| dg.eval(x)
                        }),
                        &rect,
                        Lq::Infinity,
                        &grid,
                    ),
                };
                let pn = lp_norm_on_rect(
                    &FnOracle::new(1, {
                        let g = g.clone();
                        move |x: &[f64]| g.eval(x)
                    }),
                    &rect,
                    Lq::Finite(p),
                    &grid,
                );
                if pn > 1e-12 {
                    let qinv = if q.is_finite() { 1.0 / q } else { 0.0 };
                    let weight = delta.powf(1.0 + 1.0 / p - qinv);
                    best = best.max(qn * weight / pn);
                }
            }
            per_scale_max.push(best);
        }
        let hi = per_scale_max.iter().cloned().fold(0.0, f64::max);
        let lo = per_scale_max.iter().cloned().fold(f64::INFINITY, f64::min);
        checks.push(CheckResult::le(
            format!("Markov-type scale variation, p={p} q={q}"),
            hi / lo - 1.0,
            0.1,
        ));
    }

    // Jackson decay: the measure-normalized error |Q|^{-1/p}·‖f - Pf‖_{L_p}
    // for f = sin(πx) at degree 1 decays like δ² under box refinement (the
    // raw norm carries an extra δ^{1/p} of shrinking measure).
    {
        let f = FnOracle::new(1, |x: &[f64]| (std::f64::consts::PI * x[0]).sin());
        let deg = MultiIndex::of(&[1]);
        for p in [1.0f64, 2.0] {
            let mut errs = Vec::new();
            for k in 1..=7i32 {
                let rect = Rect::of(&[0.15], &[0.5f64.powi(k)]);
                let proj = project(&f, &rect, &deg, &QuadSpec::uniform(1, 8)).unwrap();
                let grid = LpGrid::uniform(1, 10, 5);
                let e = lp_norm_on_rect(
                    &FnOracle::new(1, move |x: &[f64]| {
                        (std::f64::consts::PI * x[0]).sin() - proj.eval(x)
                    }),
                    &rect,
                    Lq::Finite(p),
                    &grid,
                );
                errs.push(e / rect.volume().powf(1.0 / p));
            }
            let slope = -log2_fit_slope(&errs);
            checks.push(CheckResult::in_range(
                format!("Jackson decay slope (deg 1, p={p})"),
                slope,
                1.8,
                2.2,
            ));
        }
    }

    // Tensorization commutativity and the masked-projector identity.
    {
        let mut worst_comm = 0.0f64;
        let mut worst_mask = 0.0f64;
        for _ in 0..50 {
            let f = catalog::random_smooth(2, &mut rng);
            let c0 = rng.gen_range(0.0..0.4);
            let c1 = rng.gen_range(0.0..0.4);
            let e0 = rng.gen_range(0.2..0.6);
            let e1 = rng.gen_range(0.2..0.6);
            let proj_box = Rect::of(&[c0, c1], &[e0, e1]);
            let mask_box = Rect::of(
                &[rng.gen_range(0.0..0.3), rng.gen_range(0.0..0.3)],
                &[rng.gen_range(0.3..0.7), rng.gen_range(0.3..0.7)],
            );
            let deg = MultiIndex::of(&[1, 2]);
            let ops: Vec<AxisOperator> = (0..2)
                .map(|j| AxisOperator::MaskedProjector {
                    corner: proj_box.corner()[j],
                    edge: proj_box.edge()[j],
                    degree: deg[j] as usize,
                    quad_nodes: 6,
                    mask_corner: mask_box.corner()[j],
                    mask_edge: mask_box.edge()[j],
                })
                .collect();
            let fwd = tensor_apply_ordered(ops.clone(), f.clone(), Some(vec![0, 1]));
            let rev = tensor_apply_ordered(ops, f.clone(), Some(vec![1, 0]));
            let direct =
                masked_project(f.as_ref(), &proj_box, &mask_box, &deg, &QuadSpec::uniform(2, 6))
                    .unwrap();
            for _ in 0..6 {
                let x = [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)];
                let a = fwd.eval(&x);
                worst_comm = worst_comm.max((a - rev.eval(&x)).abs());
                worst_mask = worst_mask.max((a - direct.eval(&x)).abs());
            }
        }
        checks.push(CheckResult::le(
            "lifted operators commute across axes",
            worst_comm,
            1e-12,
        ));
        checks.push(CheckResult::le(
            "masked projector factorizes per axis",
            worst_mask,
            1e-10,
        ));
    }

    // Quadrature-exactness warning: it must fire for a declared-polynomial
    // oracle under an insufficient order and stay silent under the auto
    // policy.
    {
        let deg = MultiIndex::of(&[2]);
        let hint = SmoothnessHint::Polynomial(MultiIndex::of(&[3]));
        let low = QuadSpec::uniform(1, 2);
        let auto = QuadSpec::auto(&hint, &deg);
        let fired = low.exactness_warning(&hint, &deg);
        let silent = auto.exactness_warning(&hint, &deg);
        checks.push(CheckResult::flag(
            "quadrature exactness warning",
            fired.is_some() && silent.is_none(),
            fired.unwrap_or_else(|| "no warning raised".into()),
        ));
    }

    SuiteResult::new("polyproj", checks)
}

// ---------------------------------------------------------------------------
// quasiinterp
// ---------------------------------------------------------------------------

pub fn suite_quasiinterp(seed: u64) -> SuiteResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x4a);
    let mut checks = Vec::new();

    // Exhaustive geometry audit: d=1 all κ ≤ 4, m ≤ 2; d=2 all κ ≤ (4,4),
    // m = (2,2) and (1,1).
    let mut ok = true;
    let mut max_interact = 0usize;
    let mut first_violation = String::new();
    for m in 0..=2i64 {
        for k in 0..=4i64 {
            let audit =
                audit_geometry(&MultiIndex::of(&[k]), &MultiIndex::of(&[m])).unwrap();
            if !audit.ok && first_violation.is_empty() {
                first_violation = audit.violations[0].clone();
            }
            ok &= audit.ok && audit.max_interacting <= (m as usize + 1);
            max_interact = max_interact.max(audit.max_interacting);
        }
    }
    for m in [MultiIndex::of(&[1, 1]), MultiIndex::of(&[2, 2])] {
        for k0 in 0..=4i64 {
            for k1 in 0..=4i64 {
                let audit = audit_geometry(&MultiIndex::of(&[k0, k1]), &m).unwrap();
                if !audit.ok && first_violation.is_empty() {
                    first_violation = audit.violations[0].clone();
                }
                let bound: usize = m.entries().iter().map(|&v| v as usize + 1).product();
                ok &= audit.ok && audit.max_interacting <= bound;
            }
        }
    }
    checks.push(CheckResult::flag(
        "cell containments and overlap bounds",
        ok,
        if first_violation.is_empty() {
            "exhaustive, d ≤ 2, κ ≤ (4,4), m ≤ (2,2)".to_string()
        } else {
            first_violation
        },
    ));

    // Clamp range and monotonicity.
    let mut ok = true;
    for k in 0..=4i64 {
        for m in 0..=2i64 {
            let kappa = MultiIndex::of(&[k]);
            let mm = MultiIndex::of(&[m]);
            let mut last = i64::MIN;
            for nu in shift_range(&kappa, &mm).iter() {
                let c = index_clamp(&kappa, &mm, &nu).unwrap();
                if c[0] < last || c[0] < 0 || c[0] > (1 << k) - 1 {
                    ok = false;
                }
                last = c[0];
            }
        }
    }
    checks.push(CheckResult::flag("index clamp monotone into range", ok, ""));

    // Telescoping Σ_{κ ≤ K𝔢} 𝓔_κ = E_{K𝔢}: d = 1 (K = 4) and d = 2 (K = 3).
    {
        let f1 = FnOracle::new(1, |x: &[f64]| (2.0 * std::f64::consts::PI * x[0]).sin());
        let mut worst = telescoping_gap(&f1, &MultiIndex::of(&[2]), &MultiIndex::of(&[2]), 4, &mut rng);
        let f2 = FnOracle::new(2, |x: &[f64]| {
            (1.3 * x[0] + 0.4).sin() * (2.0 - x[1]).powf(1.5)
        });
        worst = worst.max(telescoping_gap(
            &f2,
            &MultiIndex::of(&[2, 2]),
            &MultiIndex::of(&[2, 2]),
            3,
            &mut rng,
        ));
        checks.push(CheckResult::le("telescoping Σ𝓔_κ = E_K", worst, 1e-10));
    }

    // Details vanish on reproduced polynomials.
    {
        let f = FnOracle::with_hint(
            2,
            SmoothnessHint::Polynomial(MultiIndex::of(&[1, 1])),
            |x: &[f64]| (0.5 + x[0]) * (1.0 - 0.3 * x[1]),
        );
        let builder = QuasiBuilder::new(&f, &MultiIndex::of(&[2, 2]), &MultiIndex::of(&[2, 2]))
            .unwrap();
        let mut worst = 0.0f64;
        for kappa in [
            MultiIndex::of(&[1, 0]),
            MultiIndex::of(&[0, 2]),
            MultiIndex::of(&[2, 2]),
        ] {
            let det = builder.detail(&kappa).unwrap();
            for _ in 0..50 {
                let x = [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)];
                worst = worst.max(det.eval(&x).abs());
            }
        }
        checks.push(CheckResult::le("details vanish on 𝒫^{d,l-𝔢}", worst, 1e-10));
    }

    // Convergence of E_κ on a three-function catalog, three levels each.
    {
        let funcs: Vec<(&str, Arc<dyn Oracle>)> = vec![
            (
                "sin2pi",
                Arc::new(FnOracle::new(1, |x: &[f64]| {
                    (2.0 * std::f64::consts::PI * x[0]).sin()
                })),
            ),
            (
                "kink125",
                Arc::new(FnOracle::new(1, |x: &[f64]| (x[0] - 0.5).abs().powf(1.25))),
            ),
            (
                "expravine",
                Arc::new(FnOracle::new(1, |x: &[f64]| (-3.0 * x[0]).exp())),
            ),
        ];
        let mut ok = true;
        for (_, f) in &funcs {
            let builder =
                QuasiBuilder::new(f.as_ref(), &MultiIndex::of(&[2]), &MultiIndex::of(&[2]))
                    .unwrap();
            let mut last = f64::INFINITY;
            for k in [2i64, 4, 6] {
                let e = builder.quasi_interpolant(&MultiIndex::of(&[k])).unwrap();
                let err = approx_error_lp(f.as_ref(), &e.compile_cube(), 2.0, 5);
                if err >= last {
                    ok = false;
                }
                last = err;
            }
        }
        checks.push(CheckResult::flag(
            "‖f - E_κ f‖ decreases with the level",
            ok,
            "3-function catalog, levels 2/4/6",
        ));
    }

    // Operator-difference bounds: ratios stable across dyadic scales.
    {
        let mut per_scale = Vec::new();
        let shapes: Vec<Arc<dyn Oracle>> = (0..10)
            .map(|_| catalog::random_smooth(2, &mut rng))
            .collect();
        for k in 1..=5i64 {
            let kappa = MultiIndex::of(&[k, k]);
            let nu = MultiIndex::of(&[(1 << k) / 2, (1 << k) / 2]);
            let m = MultiIndex::of(&[2, 2]);
            let geom = CellGeometry::new(&kappa, &nu, &m).unwrap();
            let cell = dyadic_cell(&kappa, &nu);
            let mut best: f64 = 0.0;
            for f in &shapes {
                // Rescale the shape onto the wide cell.
                let wide = geom.wide().clone();
                let g: Arc<dyn Oracle> = Arc::new(FnOracle::new(2, {
                    let f = f.clone();
                    let wide = wide.clone();
                    move |x: &[f64]| {
                        let u: Vec<f64> = (0..2)
                            .map(|j| (x[j] - wide.corner()[j]) / wide.edge()[j])
                            .collect();
                        f.eval(&u)
                    }
                }));
                let ops: Vec<AxisOperator> = (0..2)
                    .map(|j| {
                        AxisOperator::projector(cell.corner()[j], cell.edge()[j], 1).complement()
                    })
                    .collect();
                let applied = tensor_apply(ops, g.clone());
                let grid = LpGrid::uniform(2, 8, 3);
                let num = lp_norm_on_rect(applied.as_ref(), geom.wide(), Lq::Finite(2.0), &grid);
                let den = lp_norm_on_rect(g.as_ref(), geom.wide(), Lq::Finite(2.0), &grid);
                if den > 1e-12 {
                    best = best.max(num / den);
                }
            }
            per_scale.push(best);
        }
        let hi = per_scale.iter().cloned().fold(0.0, f64::max);
        let lo = per_scale.iter().cloned().fold(f64::INFINITY, f64::min);
        checks.push(CheckResult::le(
            "Π(E - P_j) bound stability across scales",
            hi / lo,
            10.0,
        ));
    }

    // Detail-derivative bound ratios across levels.
    {
        let f = FnOracle::new(1, |x: &[f64]| (2.0 * std::f64::consts::PI * x[0]).sin());
        let builder =
            QuasiBuilder::new(&f, &MultiIndex::of(&[2]), &MultiIndex::of(&[2])).unwrap();
        let grid = NormGrid {
            k_max: 4,
            xi_order: 3,
            lp: LpGrid::uniform(1, 16, 4),
            shifts_per_axis: 5,
        };
        for (lambda, q) in [(0i64, 2.0f64), (1, 2.0), (0, f64::INFINITY)] {
            let mut ratios = Vec::new();
            for k in 1..=5i64 {
                let rep = detail_bound_report(
                    &builder,
                    &MultiIndex::of(&[k]),
                    &MultiIndex::of(&[lambda]),
                    2.0,
                    q,
                    1.0,
                    &grid,
                    6,
                )
                .unwrap();
                if let Some(r) = rep.ratio {
                    ratios.push(r);
                }
            }
            let hi = ratios.iter().cloned().fold(0.0, f64::max);
            let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
            checks.push(CheckResult::le(
                format!("detail derivative bound ratio spread, λ={lambda} q={q}"),
                hi / lo,
                10.0,
            ));
        }
        // Scaling relation for λ = 1 on a class-saturating entry (the C¹
        // kink; for entire functions the bound is valid but not tight):
        // slope(LHS) tracks 1 + slope(Ω').
        let fk = FnOracle::new(1, |x: &[f64]| (x[0] - 0.5).abs().powf(1.25));
        let builder_k =
            QuasiBuilder::new(&fk, &MultiIndex::of(&[2]), &MultiIndex::of(&[2])).unwrap();
        let mut lhs = Vec::new();
        let mut rhs = Vec::new();
        for k in 4..=8i64 {
            let rep = detail_bound_report(
                &builder_k,
                &MultiIndex::of(&[k]),
                &MultiIndex::of(&[1]),
                2.0,
                2.0,
                1.0,
                &grid,
                6,
            )
            .unwrap();
            lhs.push(rep.lhs);
            rhs.push(rep.modulus);
        }
        let slope_gap =
            (log2_fit_slope(&lhs) - (1.0 + log2_fit_slope(&rhs))).abs();
        checks.push(CheckResult::le(
            "detail derivative scaling: slope(LHS) ≈ 1 + slope(Ω')",
            slope_gap,
            0.3,
        ));
    }

    SuiteResult::new("quasiinterp", checks)
}

fn telescoping_gap(
    f: &dyn Oracle,
    l: &MultiIndex,
    m: &MultiIndex,
    cap: i64,
    rng: &mut impl Rng,
) -> f64 {
    let d = l.dim();
    let builder = QuasiBuilder::new(f, l, m).unwrap();
    let top = builder
        .quasi_interpolant(&MultiIndex::constant(d, cap))
        .unwrap();
    let levels = IndexBox::new(MultiIndex::zeros(d), MultiIndex::constant(d, cap)).unwrap();
    let details: Vec<_> = levels
        .iter()
        .map(|kappa| builder.detail(&kappa).unwrap())
        .collect();
    let mut worst = 0.0f64;
    for _ in 0..40 {
        let x: Vec<f64> = (0..d).map(|_| rng.gen_range(0.0..1.0)).collect();
        let total: f64 = details.iter().map(|det| det.eval(&x)).sum();
        worst = worst.max((total - top.eval(&x)).abs());
    }
    worst
}

// ---------------------------------------------------------------------------
// extension
// ---------------------------------------------------------------------------

pub fn suite_extension(cfg: &ExperimentConfig, seed: u64) -> SuiteResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5b);
    let mut checks = Vec::new();

    // Masked cell projector factorizes into per-axis compositions,
    // 50 random smooth oracles, d ≤ 2.
    {
        let mut worst = 0.0f64;
        for trial in 0..50 {
            let d = 1 + trial % 2;
            let f = zero_extend(catalog::random_smooth(d, &mut rng));
            let kappa = MultiIndex::of(
                &(0..d).map(|_| rng.gen_range(0..=2i64)).collect::<Vec<_>>(),
            );
            let nu = MultiIndex::of(
                &(0..d)
                    .map(|j| rng.gen_range(0..(1i64 << kappa[j])))
                    .collect::<Vec<_>>(),
            );
            let m = MultiIndex::constant(d, 2);
            let deg = MultiIndex::constant(d, 1);
            let direct = global_local_projector(
                f.as_ref(),
                &kappa,
                &nu,
                &deg,
                &m,
                &QuadSpec::uniform(d, 6),
            )
            .unwrap();
            let cell = dyadic_cell(&kappa, &nu);
            let mask = support_box(&m);
            let ops: Vec<AxisOperator> = (0..d)
                .map(|j| AxisOperator::MaskedProjector {
                    corner: cell.corner()[j],
                    edge: cell.edge()[j],
                    degree: deg[j] as usize,
                    quad_nodes: 6,
                    mask_corner: mask.corner()[j],
                    mask_edge: mask.edge()[j],
                })
                .collect();
            let lifted = tensor_apply(ops, f);
            for _ in 0..4 {
                let x: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.5..2.5)).collect();
                worst = worst.max((direct.eval(&x) - lifted.eval(&x)).abs());
            }
        }
        checks.push(CheckResult::le("whole-space projector factorization", worst, 1e-10));
    }

    // Consistency: the whole-space detail of ℐf restricted to the cube equals
    // the cube-side detail, on the catalog.
    {
        let mut worst = 0.0f64;
        for f in catalog::catalog(1) {
            let l = MultiIndex::of(&[2]);
            let m = MultiIndex::of(&[2]);
            let zf = zero_extend(f.oracle.clone());
            let gb = QuasiBuilder::new(zf.as_ref(), &l, &m).unwrap();
            let cb = QuasiBuilder::new(f.oracle.as_ref(), &l, &m).unwrap();
            for k in [0i64, 2, 3] {
                let kappa = MultiIndex::of(&[k]);
                let gd = global_detail(&gb, &kappa).unwrap();
                let cd = cb.detail(&kappa).unwrap();
                for _ in 0..20 {
                    let x = [rng.gen_range(0.0..1.0)];
                    worst = worst.max((gd.eval(&x) - cd.eval(&x)).abs());
                }
            }
        }
        checks.push(CheckResult::le(
            "global/cube detail consistency",
            worst,
            1e-10,
        ));
    }

    // Class membership: 100 random smooth oracles across d = 1, 2.
    {
        let mut pass = true;
        let mut count = 0usize;
        let mut note = String::new();
        for trial in 0..100 {
            let d = 1 + trial % 2;
            let f = zero_extend(catalog::random_smooth(d, &mut rng));
            let l = MultiIndex::constant(d, 2);
            let m = MultiIndex::constant(d, 2);
            let builder = QuasiBuilder::new(f.as_ref(), &l, &m).unwrap();
            let kappa = MultiIndex::of(
                &(0..d).map(|_| rng.gen_range(0..=3i64)).collect::<Vec<_>>(),
            );
            let detail = global_detail(&builder, &kappa).unwrap();
            let report = class_check(&detail, if d == 1 { 17 } else { 7 }, 1e-9);
            if !report.pass {
                pass = false;
                if note.is_empty() {
                    note = format!(
                        "violation at d={d} κ={kappa} axis {} index {}",
                        report.violations[0].axis, report.violations[0].index
                    );
                }
            }
            count += 1;
        }
        // Optional injected violation to prove the detector works.
        if cfg.inject_class_violation {
            let kappa = MultiIndex::of(&[3]);
            let deg = MultiIndex::of(&[1]);
            let m = MultiIndex::of(&[2]);
            let element = random_class_element(&kappa, &deg, &m, &mut rng);
            let fam = element.family();
            let mut polys: Vec<MonomialPoly> = fam.iter().map(|(_, p)| p.clone()).collect();
            polys[0] = polys[0].scale(2.0);
            let mut it = polys.into_iter();
            let fam2 =
                IndexedFamily::from_fn(fam.range().clone(), |_| Ok(it.next().unwrap())).unwrap();
            let bad = GlobalPiecewisePoly::new(SplineBlend::new(kappa, m, deg, fam2));
            if class_check(&bad, 9, 1e-9).pass {
                // The injected corruption must be detected; treat silence as
                // a failure of the detector itself.
                pass = false;
                note = "injected violation was NOT detected".into();
            } else {
                pass = false;
                note = "injected class violation detected (expected failure)".into();
            }
        }
        checks.push(CheckResult::flag(
            format!("class membership of {count} random details"),
            pass,
            note,
        ));
    }

    // Injectivity: reconstruct the family from samples.
    {
        let mut worst = 0.0f64;
        for (kappa, deg, m) in [
            (MultiIndex::of(&[2]), MultiIndex::of(&[2]), MultiIndex::of(&[1])),
            (
                MultiIndex::of(&[1, 1]),
                MultiIndex::of(&[1, 1]),
                MultiIndex::of(&[1, 1]),
            ),
        ] {
            let f = random_class_element(&kappa, &deg, &m, &mut rng);
            let rec = reconstruct_family(&f, &kappa, &deg, &m);
            let mut scale = 0.0f64;
            let mut diff = 0.0f64;
            for ((_, a), (_, b)) in f.family().iter().zip(rec.iter()) {
                for (ca, cb) in a.coeffs().data().iter().zip(b.coeffs().data()) {
                    diff = diff.max((ca - cb).abs());
                    scale = scale.max(ca.abs());
                }
            }
            worst = worst.max(diff / scale.max(1.0));
        }
        checks.push(CheckResult::le(
            "representation injectivity round-trip",
            worst,
            1e-8,
        ));
    }

    // Per-level decay of detail norms: the bound guarantees decay at least
    // like 2^{-(κ, α-λ)}, so the fitted slope must sit at or below
    // -(min(l,α)-λ) within half an order; class-saturating entries attain
    // it, entire functions may decay faster.
    {
        for (name, alpha_tag) in [("sin2pi", 2.0f64), ("kink125", 1.75)] {
            let f = catalog::find(1, name).unwrap();
            let l = MultiIndex::of(&[2]);
            let m = MultiIndex::of(&[2]);
            let zf = zero_extend(f.oracle.clone());
            let builder = QuasiBuilder::new(zf.as_ref(), &l, &m).unwrap();
            for lam in [0i64, 1] {
                let mut norms = Vec::new();
                for k in 5..=8i64 {
                    let det = global_detail(&builder, &MultiIndex::of(&[k])).unwrap();
                    let g = det.compile().derivative(&MultiIndex::of(&[lam])).unwrap();
                    norms.push(g.lq_norm(Lq::Finite(2.0), 6, 6));
                }
                let slope = log2_fit_slope(&norms);
                let expected = -(alpha_tag.min(2.0) - lam as f64);
                checks.push(CheckResult::le(
                    format!("detail 𝒟^{lam} norm decay envelope, {name}"),
                    slope,
                    expected + 0.5,
                ));
            }
        }
    }

    // Bernstein experiment, d = 1: λ ∈ {1, 2} at q ∈ {2, ∞}; λ = 0 control.
    {
        let deg = MultiIndex::of(&[2]);
        let m = MultiIndex::of(&[2]);
        let levels: Vec<MultiIndex> = (2..=5).map(|k| MultiIndex::of(&[k])).collect();
        for lam in [1i64, 2] {
            for q in [Lq::Finite(2.0), Lq::Infinity] {
                let rep = bernstein_experiment(
                    &levels,
                    &deg,
                    &m,
                    &MultiIndex::of(&[lam]),
                    q,
                    cfg.trials,
                    &mut rng,
                    6,
                )
                .unwrap();
                checks.push(CheckResult::in_range(
                    format!("Bernstein slope d=1 λ={lam} q={:?}", rep.q),
                    rep.fit_slope,
                    lam as f64 - 0.5,
                    lam as f64 + 0.5,
                ));
            }
        }
        let levels0: Vec<MultiIndex> = (3..=6).map(|k| MultiIndex::of(&[k])).collect();
        let rep0 = bernstein_experiment(
            &levels0,
            &deg,
            &m,
            &MultiIndex::of(&[0]),
            Lq::Finite(2.0),
            cfg.trials,
            &mut rng,
            6,
        )
        .unwrap();
        checks.push(CheckResult::in_range(
            "Bernstein slope d=1 λ=0 (control)",
            rep0.fit_slope,
            -0.2,
            0.2,
        ));
        // d = 2, λ = (1,0) and (1,1): slope within ±0.5 per axis.
        let deg2 = MultiIndex::of(&[1, 1]);
        let m2 = MultiIndex::of(&[2, 2]);
        let levels2: Vec<MultiIndex> = (1..=4).map(|k| MultiIndex::constant(2, k)).collect();
        for lam in [MultiIndex::of(&[1, 0]), MultiIndex::of(&[1, 1])] {
            let rep = bernstein_experiment(
                &levels2,
                &deg2,
                &m2,
                &lam,
                Lq::Finite(2.0),
                (cfg.trials / 2).max(4),
                &mut rng,
                5,
            )
            .unwrap();
            let expect = lam.sum() as f64;
            checks.push(CheckResult::in_range(
                format!("Bernstein slope d=2 λ={lam}"),
                rep.fit_slope,
                expect - 1.0,
                expect + 1.0,
            ));
        }
    }

    // Restriction error decreases with the truncation level.
    {
        let f = catalog::find(1, "sin2pi").unwrap();
        let m = MultiIndex::of(&[2]);
        let mut ok = true;
        let mut last = f64::INFINITY;
        for cap in [1i64, 3, 5] {
            let ext = extend(f.oracle.clone(), &[1.5], 2.0, Theta::Finite(2.0), &m, cap).unwrap();
            let err = mixext::quad::integrate_composite(
                &Rect::unit(1),
                &[64],
                4,
                |x| (f.oracle.eval(x) - ext.eval(x)).powi(2),
            )
            .sqrt();
            if err >= last {
                ok = false;
            }
            last = err;
        }
        checks.push(CheckResult::flag(
            "restriction error decreases in K",
            ok,
            "K = 1, 3, 5",
        ));
    }

    SuiteResult::new("extension", checks)
}

// ---------------------------------------------------------------------------
// analysis
// ---------------------------------------------------------------------------

pub fn suite_analysis(cfg: &ExperimentConfig, seed: u64) -> SuiteResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6c);
    let mut checks = Vec::new();

    // Difference commutation across axis orders.
    {
        let mut worst = 0.0f64;
        for _ in 0..50 {
            let f = catalog::random_smooth(2, &mut rng);
            let l = MultiIndex::of(&[rng.gen_range(1..=2), rng.gen_range(1..=2)]);
            let h = [rng.gen_range(-0.1..0.1), rng.gen_range(-0.1..0.1)];
            let x = [rng.gen_range(0.3..0.6), rng.gen_range(0.3..0.6)];
            let dom = Domain::cube(2);
            let direct = mixed_difference(f.as_ref(), &l, &h, &x, &dom);
            // Apply axis 1 first, then axis 0, through a wrapped oracle.
            let l0 = MultiIndex::of(&[l[0], 0]);
            let l1 = MultiIndex::of(&[0, l[1]]);
            let inner = {
                let f = f.clone();
                let l1 = l1.clone();
                FnOracle::new(2, move |y: &[f64]| {
                    analysis::mixed_difference_at(f.as_ref(), &l1, &h, y)
                })
            };
            let nested = mixed_difference(&inner, &l0, &h, &x, &dom);
            if let (Some(a), Some(b)) = (direct, nested) {
                worst = worst.max((a - b).abs());
            }
        }
        checks.push(CheckResult::le("Δ axis-order commutation", worst, 1e-12));
    }

    // Difference-derivative bound: zero violations over 100 random
    // (h, instance) pairs per entry with a known top derivative.
    {
        let mut violations = 0usize;
        let mut pairs = 0usize;
        for d in [1usize, 2] {
            let grid = LpGrid::uniform(d, if d == 1 { 20 } else { 10 }, 4);
            let dom = Domain::cube(d);
            for f in catalog::catalog(d) {
                let l = MultiIndex::constant(d, 2);
                let Some(dl) = f.derivative(&l) else { continue };
                let dnorm = lp_norm_on_rect(dl.as_ref(), &Rect::unit(d), Lq::Finite(2.0), &grid);
                for _ in 0..100 {
                    let h: Vec<f64> = (0..d).map(|_| rng.gen_range(-0.2..0.2)).collect();
                    if h.iter().any(|v| v.abs() < 1e-4) {
                        continue;
                    }
                    pairs += 1;
                    let lhs = diff_lp_norm(f.oracle.as_ref(), &l, &h, Lq::Finite(2.0), &dom, &grid);
                    let rhs: f64 =
                        h.iter().map(|v| v.abs().powi(2)).product::<f64>() * dnorm;
                    if lhs > rhs * (1.0 + 1e-8) + 1e-13 {
                        violations += 1;
                    }
                }
            }
        }
        checks.push(CheckResult::flag(
            "difference ≤ derivative bound",
            violations == 0,
            format!("{pairs} (f, h) pairs, {violations} violations"),
        ));
    }

    // Ω' ≤ Ω at matched arguments on the catalog and dyadic t-grid.
    {
        let mut violations = 0usize;
        for d in [1usize, 2] {
            let dom = Domain::cube(d);
            let grid = LpGrid::uniform(d, if d == 1 { 16 } else { 8 }, 3);
            for f in catalog::catalog(d) {
                let l = MultiIndex::constant(d, 2);
                for k in 1..=4 {
                    let t = vec![0.5f64.powi(k); d];
                    let shifts = cfg.shift_grid.max(9);
                    let sup = modulus_sup(
                        f.oracle.as_ref(),
                        &l,
                        &t,
                        Lq::Finite(2.0),
                        &dom,
                        &grid,
                        shifts,
                    )
                    .value;
                    let avg = modulus_avg(
                        f.oracle.as_ref(),
                        &l,
                        &t,
                        2.0,
                        &dom,
                        &grid,
                        cfg.xi_order.max(4),
                        shifts,
                    )
                    .value;
                    if avg > sup * (1.0 + 1e-9) + 1e-14 {
                        violations += 1;
                    }
                }
            }
        }
        checks.push(CheckResult::flag(
            "averaged ≤ sup modulus at matched arguments",
            violations == 0,
            format!("{violations} violations"),
        ));
    }

    // Averaged modulus monotone on the dyadic grid below the saturation
    // scale t ≤ 1/(2·max l).
    {
        let mut ok = true;
        let dom = Domain::cube(1);
        let grid = LpGrid::uniform(1, 16, 4);
        for f in catalog::catalog(1) {
            let l = MultiIndex::of(&[2]);
            let mut last = 0.0;
            for k in (2..=6).rev() {
                let t = [0.5f64.powi(k)];
                let v = modulus_avg(f.oracle.as_ref(), &l, &t, 2.0, &dom, &grid, 4, 9).value;
                if v + 1e-10 < last {
                    ok = false;
                }
                last = v;
            }
        }
        checks.push(CheckResult::flag(
            "Ω' nondecreasing on t ≤ 1/(2 max l)",
            ok,
            "dyadic grid",
        ));
    }

    // Embeddings: H' ≤ c₄(α) B' with c₄ = Π 2^{2+α_j}, and B' ≤ B^𝓁.
    {
        let mut h_violations = 0usize;
        let mut l_violations = 0usize;
        for d in [1usize, 2] {
            let alpha = vec![1.5; d];
            let params = SmoothnessParams::new(alpha.clone(), 2.0, Theta::Finite(2.0)).unwrap();
            let grid = NormGrid {
                k_max: 5,
                xi_order: cfg.xi_order.min(4),
                lp: LpGrid::uniform(d, if d == 1 { 12 } else { 8 }, 3),
                shifts_per_axis: if d == 1 { 9 } else { 5 },
            };
            let dom = Domain::cube(d);
            let c4: f64 = alpha.iter().map(|a| (2.0 + a).exp2()).product();
            for f in catalog::catalog(d) {
                let b = besov_norm_prime(f.oracle.as_ref(), &params, &dom, &grid)
                    .unwrap()
                    .total;
                let h = nikolskii_norm_prime(f.oracle.as_ref(), &params, &dom, &grid)
                    .unwrap()
                    .total;
                if h > c4 * b * (1.0 + 1e-9) {
                    h_violations += 1;
                }
                // Classical comparison needs the first-derivative oracles.
                let ell = MultiIndex::constant(d, 1);
                let have_all = analysis::axis_subsets(d).iter().all(|axes| {
                    f.derivative(&masked_order(&ell, axes)).is_some()
                });
                if have_all {
                    let params_ell = params.clone().with_ell(ell.clone()).unwrap();
                    let bell = besov_norm_classical(
                        f.oracle.as_ref(),
                        &f.derivs,
                        &params_ell,
                        &dom,
                        &grid,
                    )
                    .unwrap()
                    .total;
                    if b > bell * (1.0 + 1e-9) + 1e-12 {
                        l_violations += 1;
                    }
                }
            }
        }
        checks.push(CheckResult::flag(
            "embedding ‖f‖_H' ≤ c₄(α)‖f‖_B'",
            h_violations == 0,
            format!("{h_violations} violations"),
        ));
        checks.push(CheckResult::flag(
            "embedding ‖f‖_B' ≤ ‖f‖_B^𝓁",
            l_violations == 0,
            format!("{l_violations} violations"),
        ));
    }

    // Homogeneity and the triangle inequality of the computed norms.
    {
        let params = SmoothnessParams::new(vec![1.5], 2.0, Theta::Finite(2.0)).unwrap();
        let grid = NormGrid {
            k_max: 4,
            xi_order: 3,
            lp: LpGrid::uniform(1, 10, 3),
            shifts_per_axis: 5,
        };
        let dom = Domain::cube(1);
        let mut worst_hom = 0.0f64;
        let mut tri_violations = 0usize;
        for _ in 0..6 {
            let f = catalog::random_smooth(1, &mut rng);
            let g = catalog::random_smooth(1, &mut rng);
            let c = rng.gen_range(0.5..3.0);
            let nf = besov_norm_prime(f.as_ref(), &params, &dom, &grid).unwrap().total;
            let ng = besov_norm_prime(g.as_ref(), &params, &dom, &grid).unwrap().total;
            let scaled = FnOracle::new(1, {
                let f = f.clone();
                move |x: &[f64]| c * f.eval(x)
            });
            let ns = besov_norm_prime(&scaled, &params, &dom, &grid).unwrap().total;
            worst_hom = worst_hom.max((ns - c * nf).abs() / (c * nf).max(1e-12));
            let sum = FnOracle::new(1, {
                let f = f.clone();
                let g = g.clone();
                move |x: &[f64]| f.eval(x) + g.eval(x)
            });
            let nsum = besov_norm_prime(&sum, &params, &dom, &grid).unwrap().total;
            if nsum > (nf + ng) * (1.0 + 1e-8) {
                tri_violations += 1;
            }
        }
        checks.push(CheckResult::le("norm homogeneity", worst_hom, 1e-8));
        checks.push(CheckResult::flag(
            "norm triangle inequality",
            tri_violations == 0,
            format!("{tri_violations} violations"),
        ));
    }

    SuiteResult::new("analysis", checks)
}

// ---------------------------------------------------------------------------
// Extension norm-ratio experiment
// ---------------------------------------------------------------------------

/// The extension norm-ratio experiment at the configured parameters: for every
/// catalog function with finite norm and every λ < α with λ ≤ m, the ratio
/// of the derivative-based seminorm of the truncated extension over ℝ^d to
/// the cube norm must be finite, stable in the truncation level, and is
/// recorded as a single constant per (d, α, p, θ, m).
pub fn ratio_experiment(cfg: &ExperimentConfig) -> (SuiteResult, ExtensionRatioReport) {
    let d = cfg.d;
    let m = cfg.spline_order().expect("validated config");
    let caps: Vec<i64> = vec![cfg.truncation - 1, cfg.truncation];
    let stability_tolerance = 0.10;

    let norm_grid = NormGrid {
        k_max: cfg.k_max.min(if d == 1 { 6 } else { 4 }),
        xi_order: cfg.xi_order,
        lp: LpGrid::uniform(d, cfg.lp_panels, cfg.lp_order),
        shifts_per_axis: cfg.shift_grid,
    };
    // Whole-space seminorms integrate over a wider, kinked box: scale the
    // panel count with the compiled resolution.
    let lhs_grid = |cap: i64| NormGrid {
        k_max: norm_grid.k_max,
        xi_order: cfg.xi_order,
        lp: LpGrid::uniform(
            d,
            if d == 1 {
                ((1usize << cap) * 4).max(cfg.lp_panels)
            } else {
                ((1usize << cap) * 4).clamp(32, 72)
            },
            if d == 1 { 3 } else { 2 },
        ),
        shifts_per_axis: if d == 1 { cfg.shift_grid } else { 3 },
    };

    let params = SmoothnessParams::new(cfg.alpha.clone(), cfg.p, cfg.theta).unwrap();
    let dom = Domain::cube(d);

    // All λ < α with λ ≤ m.
    let lambda_cap = MultiIndex::of(
        &(0..d)
            .map(|j| (cfg.alpha[j].ceil() as i64 - 1).min(m[j]).max(0))
            .collect::<Vec<_>>(),
    );
    let lambdas: Vec<MultiIndex> = mixext::polyproj::degree_box(&lambda_cap)
        .iter()
        .filter(|lam| {
            lam.entries()
                .iter()
                .zip(&cfg.alpha)
                .all(|(&lj, &aj)| (lj as f64) < aj)
        })
        .collect();

    let mut rows: Vec<RatioRow> = Vec::new();
    for f in catalog::catalog(d) {
        if !f.finite_norm(&cfg.alpha, cfg.p) {
            continue;
        }
        let rhs = besov_norm_prime(f.oracle.as_ref(), &params, &dom, &norm_grid)
            .unwrap()
            .total;
        // Extensions per truncation level (shared across λ and J).
        let exts: Vec<_> = caps
            .iter()
            .map(|&cap| extend(f.oracle.clone(), &cfg.alpha, cfg.p, cfg.theta, &m, cap).unwrap())
            .collect();
        for lambda in &lambdas {
            let derivs: Vec<_> = exts
                .iter()
                .map(|ext| ext.derivative(lambda).unwrap())
                .collect();
            // J = ∅ row: the plain L_p norm of the derivative.
            let lp_by_cap: Vec<f64> = derivs
                .iter()
                .zip(&caps)
                .map(|(g, &cap)| {
                    lp_norm_on_rect(
                        g,
                        &g.domain(),
                        Lq::Finite(cfg.p),
                        &lhs_grid(cap).lp,
                    )
                })
                .collect();
            rows.push(make_row(
                &f,
                lambda,
                &[],
                lp_by_cap,
                rhs,
                stability_tolerance,
            ));
            for axes in analysis::axis_subsets(d) {
                let lhs_by_cap: Vec<f64> = derivs
                    .iter()
                    .zip(&caps)
                    .map(|(g, &cap)| {
                        analysis::extension_seminorm(
                            g,
                            &g.domain(),
                            &params,
                            lambda,
                            &axes,
                            &lhs_grid(cap),
                        )
                        .unwrap()
                    })
                    .collect();
                rows.push(make_row(
                    &f,
                    lambda,
                    &axes,
                    lhs_by_cap,
                    rhs,
                    stability_tolerance,
                ));
            }
        }
    }

    let recorded_constant = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    let all_finite = rows.iter().all(|r| r.ratio.is_finite());
    let all_stable = rows.iter().all(|r| r.stable);
    let report = ExtensionRatioReport {
        schema: 1,
        kind: "extension-ratio-experiment".into(),
        d,
        alpha: cfg.alpha.clone(),
        p: cfg.p,
        theta: match cfg.theta {
            Theta::Finite(t) => format!("{t}"),
            Theta::Infinity => "inf".into(),
        },
        m: m.entries().to_vec(),
        truncations: caps.clone(),
        stability_tolerance,
        rows,
        recorded_constant,
        all_finite,
        all_stable,
    };
    let checks = vec![
        CheckResult::flag(
            "extension seminorm ratios finite",
            report.all_finite,
            format!("{} rows", report.rows.len()),
        ),
        CheckResult::flag(
            "ratios stable in truncation (last two within 10%)",
            report.all_stable,
            format!("K ∈ {caps:?}"),
        ),
        CheckResult::flag(
            "recorded constant",
            report.recorded_constant.is_finite(),
            format!(
                "C(d={d}, α={:?}, p={}, θ={}, m={:?}) = {:.6}",
                cfg.alpha, cfg.p, report.theta, report.m, report.recorded_constant
            ),
        ),
    ];
    (SuiteResult::new("extension-ratio", checks), report)
}

fn make_row(
    f: &CatalogFunction,
    lambda: &MultiIndex,
    axes: &[usize],
    lhs_by_cap: Vec<f64>,
    rhs: f64,
    tol: f64,
) -> RatioRow {
    let last = *lhs_by_cap.last().unwrap();
    let prev = lhs_by_cap[lhs_by_cap.len() - 2];
    let stable = if last.max(prev) <= 1e-8 * rhs.max(1e-30) {
        true // vanishing seminorm (polynomial inputs)
    } else {
        (last - prev).abs() <= tol * last.abs().max(1e-300)
    };
    RatioRow {
        function: f.name.clone(),
        lambda: lambda.entries().to_vec(),
        axes: axes.iter().map(|j| j + 1).collect(),
        lhs_by_truncation: lhs_by_cap,
        rhs,
        ratio: last / rhs.max(1e-300),
        stable,
    }
}

// ---------------------------------------------------------------------------
// Config suite and the full run
// ---------------------------------------------------------------------------

pub fn suite_config(cfg: &ExperimentConfig) -> SuiteResult {
    let text = cfg.to_text();
    let round = ExperimentConfig::parse(&text)
        .map(|c| c.to_text())
        .unwrap_or_default();
    let checks = vec![CheckResult::flag(
        "config parse/serialize round trip",
        round == text,
        "",
    )];
    SuiteResult::new("config", checks)
}

/// Run every module suite plus the norm-ratio experiment.
pub fn run_all(cfg: &ExperimentConfig) -> (VerifyReport, ExtensionRatioReport) {
    let seed = cfg.seed;
    let mut suites = vec![
        suite_config(cfg),
        suite_index(seed),
        suite_splines(seed),
        suite_polyproj(seed),
        suite_quasiinterp(seed),
        suite_extension(cfg, seed),
        suite_analysis(cfg, seed),
    ];
    let (ratio_suite, ratio_report) = ratio_experiment(cfg);
    suites.push(ratio_suite);
    let pass = suites.iter().all(|s| s.pass);
    (
        VerifyReport {
            schema: 1,
            kind: "verify-report".into(),
            seed,
            pass,
            suites,
        },
        ratio_report,
    )
}
