//! Cardinal B-spline generators ψ^{1,m}, their tensor products, dyadic
//! shifts g_{κ,ν}^{d,m}, refinement masks and support geometry.
//!
//! ψ^{1,0} is the indicator of the unit interval and
//! ψ^{1,m}(x) = ∫_I ψ^{1,m-1}(x-y) dy. Each generator is stored as exact
//! per-knot-interval polynomial coefficients obtained by integrating the
//! convolution recursion in rational arithmetic, then converted to floating
//! point, so downstream identity tests carry no quadrature error. At knots
//! where the order-m derivative jumps, values are right-continuous,
//! consistent with the half-open cell convention.

use std::sync::OnceLock;

use num_traits::{One, Zero};
use thiserror::Error;

use crate::index::{IndexBox, MultiIndex, Rect};
use crate::ratpoly;
pub use crate::ratpoly::Rat;

#[derive(Debug, Error)]
pub enum SplineError {
    #[error("derivative order {lambda} exceeds spline order {m}")]
    DerivativeTooHigh { lambda: usize, m: usize },
    #[error("spline order {0} exceeds the cached table (max {1})")]
    OrderTooLarge(usize, usize),
    #[error("cell index {nu} outside 𝒩_(0, 2^κ-1), κ = {kappa}")]
    CellOutsideCube { nu: MultiIndex, kappa: MultiIndex },
}

const MAX_ORDER: usize = 10;

/// Generator of order m: per-interval polynomials on [k, k+1), k = 0..m, in
/// the local variable u = x - k.
#[derive(Clone, Debug)]
pub struct SplineGen {
    m: usize,
    /// pieces[k][c] = coefficient of u^c on the interval [k, k+1).
    pieces: Vec<Vec<f64>>,
}

fn build_piece_tables() -> Vec<Vec<Vec<Rat>>> {
    // tables[m][k] = rational coefficients of ψ^{1,m} on [k, k+1) in u = x-k.
    let mut tables: Vec<Vec<Vec<Rat>>> = Vec::with_capacity(MAX_ORDER + 1);
    tables.push(vec![vec![Rat::one()]]);
    for m in 1..=MAX_ORDER {
        let prev = &tables[m - 1];
        // Cumulative antiderivative A(x) = ∫_{-∞}^x ψ^{1,m-1}: on [k,k+1)
        // A(k+u) = cum[k] + ∫_0^u piece_{m-1}[k].
        let mut cum = vec![Rat::zero(); m + 1];
        for k in 0..m {
            let w = ratpoly::integral_unit(&prev[k]);
            cum[k + 1] = &cum[k] + w;
        }
        let local_anti: Vec<Vec<Rat>> = prev
            .iter()
            .enumerate()
            .map(|(k, piece)| {
                ratpoly::add(&[cum[k].clone()], &ratpoly::antiderivative(piece))
            })
            .collect();
        // ψ^{1,m}(k+u) = A(k+u) - A(k-1+u) with A ≡ 0 left of 0 and ≡ 1
        // right of m.
        let a_at = |k: i64| -> Vec<Rat> {
            if k < 0 {
                ratpoly::zero_poly()
            } else if (k as usize) >= m {
                ratpoly::one_poly()
            } else {
                local_anti[k as usize].clone()
            }
        };
        let pieces: Vec<Vec<Rat>> = (0..=m as i64)
            .map(|k| ratpoly::sub(&a_at(k), &a_at(k - 1)))
            .collect();
        tables.push(pieces);
    }
    tables
}

fn piece_tables() -> &'static Vec<Vec<Vec<Rat>>> {
    static TABLES: OnceLock<Vec<Vec<Vec<Rat>>>> = OnceLock::new();
    TABLES.get_or_init(build_piece_tables)
}

/// Exact rational piece coefficients of ψ^{1,m} (for identity tests).
pub fn spline_pieces_rational(m: usize) -> Result<&'static Vec<Vec<Rat>>, SplineError> {
    piece_tables()
        .get(m)
        .ok_or(SplineError::OrderTooLarge(m, MAX_ORDER))
}

/// ∫ψ^{1,m} = 1 exactly in rational arithmetic.
pub fn spline_integral_exact_one(m: usize) -> bool {
    use num_traits::One;
    let total: Rat = piece_tables()[m]
        .iter()
        .map(|p| ratpoly::integral_unit(p))
        .sum();
    total.is_one()
}

impl SplineGen {
    pub fn new(m: usize) -> Result<Self, SplineError> {
        let pieces = spline_pieces_rational(m)?
            .iter()
            .map(|p| ratpoly::to_f64_vec(p))
            .collect();
        Ok(Self { m, pieces })
    }

    pub fn order(&self) -> usize {
        self.m
    }

    /// Knot set 0..=m+1.
    pub fn breakpoints(&self) -> Vec<f64> {
        (0..=self.m + 1).map(|k| k as f64).collect()
    }

    /// Monomial coefficients of the piece on [k, k+1) in u = x - k.
    pub fn piece_coeffs(&self, k: usize) -> &[f64] {
        &self.pieces[k]
    }

    /// supp ψ^{1,m} = [0, m+1].
    pub fn support(&self) -> (f64, f64) {
        (0.0, (self.m + 1) as f64)
    }

    /// λ-th derivative at x, exact from the closed-form piece coefficients.
    /// λ = m is allowed: the result is piecewise constant, right-continuous
    /// at the knots.
    pub fn eval(&self, lambda: usize, x: f64) -> Result<f64, SplineError> {
        if lambda > self.m {
            return Err(SplineError::DerivativeTooHigh { lambda, m: self.m });
        }
        Ok(self.eval_unchecked(lambda, x))
    }

    pub(crate) fn eval_unchecked(&self, lambda: usize, x: f64) -> f64 {
        if x < 0.0 || x >= (self.m + 1) as f64 {
            return 0.0;
        }
        let k = x.floor() as usize;
        let u = x - k as f64;
        let piece = &self.pieces[k];
        // Horner on the λ-th derivative coefficients.
        let mut acc = 0.0;
        for c in (lambda..piece.len()).rev() {
            let mut fac = 1.0;
            for i in 0..lambda {
                fac *= (c - i) as f64;
            }
            acc = acc * u + fac * piece[c];
        }
        acc
    }

    /// Value ψ^{1,m}(x).
    pub fn value(&self, x: f64) -> f64 {
        self.eval_unchecked(0, x)
    }
}

/// Cached generator table for orders up to 10.
pub fn spline(m: usize) -> &'static SplineGen {
    static GENS: OnceLock<Vec<SplineGen>> = OnceLock::new();
    let gens = GENS.get_or_init(|| {
        (0..=MAX_ORDER)
            .map(|m| SplineGen::new(m).expect("order within table"))
            .collect()
    });
    &gens[m]
}

/// Refinement mask of ψ^{1,m}: a_μ = 2^{-m} C(m+1, μ), μ = 0..m+1, so that
/// ψ^{1,m}(x) = Σ_μ a_μ ψ^{1,m}(2x - μ).
#[derive(Clone, Debug)]
pub struct RefinementMask {
    m: usize,
    coeffs: Vec<f64>,
}

fn binomial(n: u64, k: u64) -> u128 {
    let mut acc: u128 = 1;
    for i in 0..k.min(n - k) {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

impl RefinementMask {
    pub fn new(m: usize) -> Self {
        let scale = 0.5f64.powi(m as i32);
        let coeffs = (0..=m as u64 + 1)
            .map(|mu| binomial(m as u64 + 1, mu) as f64 * scale)
            .collect();
        Self { m, coeffs }
    }

    pub fn order(&self) -> usize {
        self.m
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// a_μ, zero outside 0..=m+1.
    pub fn coeff(&self, mu: i64) -> f64 {
        if mu < 0 || mu as usize >= self.coeffs.len() {
            0.0
        } else {
            self.coeffs[mu as usize]
        }
    }

    /// Exact rational coefficients, for the parity-sum identities.
    pub fn coeffs_rational(m: usize) -> Vec<Rat> {
        let denom = Rat::from_integer(2i64.pow(m as u32).into());
        (0..=m as u64 + 1)
            .map(|mu| {
                Rat::from_integer(num_bigint::BigInt::from(binomial(m as u64 + 1, mu)))
                    / denom.clone()
            })
            .collect()
    }

    /// Both parity sums Σ_{μ even} a_μ and Σ_{μ odd} a_μ equal 1 exactly in
    /// rational arithmetic.
    pub fn parity_sums_exact(m: usize) -> bool {
        use num_traits::One;
        let coeffs = Self::coeffs_rational(m);
        let even: Rat = coeffs.iter().step_by(2).cloned().sum();
        let odd: Rat = coeffs.iter().skip(1).step_by(2).cloned().sum();
        even.is_one() && odd.is_one()
    }
}

/// g_{κ,ν}^{d,m}(x) = Π_j ψ^{1,m_j}(2^{κ_j} x_j - ν_j).
pub fn eval_g(kappa: &MultiIndex, nu: &MultiIndex, m: &MultiIndex, x: &[f64]) -> f64 {
    debug_assert!(kappa.is_nonnegative());
    let mut acc = 1.0;
    for j in 0..kappa.dim() {
        let arg = (kappa[j] as f64).exp2() * x[j] - nu[j] as f64;
        acc *= spline(m[j] as usize).value(arg);
        if acc == 0.0 {
            return 0.0;
        }
    }
    acc
}

/// Mixed derivative 𝒟^λ g_{κ,ν}^{d,m}(x) = Π_j 2^{κ_j λ_j} ψ^{(λ_j)}(…).
pub fn eval_g_deriv(
    kappa: &MultiIndex,
    nu: &MultiIndex,
    m: &MultiIndex,
    lambda: &MultiIndex,
    x: &[f64],
) -> Result<f64, SplineError> {
    let mut acc = 1.0;
    for j in 0..kappa.dim() {
        let (lam_j, m_j) = (lambda[j] as usize, m[j] as usize);
        if lam_j > m_j {
            return Err(SplineError::DerivativeTooHigh { lambda: lam_j, m: m_j });
        }
        let arg = (kappa[j] as f64).exp2() * x[j] - nu[j] as f64;
        acc *= (kappa[j] as f64 * lam_j as f64).exp2() * spline(m_j).eval_unchecked(lam_j, arg);
    }
    Ok(acc)
}

/// supp g_{κ,ν}^{d,m} = 2^{-κ}ν + 2^{-κ}(m+𝔢)Ī^d as a closed box.
pub fn support_g(kappa: &MultiIndex, nu: &MultiIndex, m: &MultiIndex) -> Rect {
    assert!(kappa.is_nonnegative());
    let h = kappa.pow2_neg();
    let corner: Vec<f64> = (0..kappa.dim()).map(|j| nu[j] as f64 * h[j]).collect();
    let edge: Vec<f64> = (0..kappa.dim())
        .map(|j| (m[j] + 1) as f64 * h[j])
        .collect();
    Rect::of(&corner, &edge)
}

/// Shift indices whose generators meet the cube:
/// { ν : supp g_{κ,ν}^{d,m} ∩ I^d ≠ ∅ } = 𝒩_{-m, 2^κ-𝔢}^d.
pub fn cube_indices(kappa: &MultiIndex, m: &MultiIndex) -> IndexBox {
    let lo = m.map(|v| -v);
    let hi = kappa.map(|k| (1i64 << k) - 1);
    IndexBox::new(lo, hi).expect("matching dims")
}

/// { ν : Q_{κ,ν'} ∩ supp g_{κ,ν}^{d,m} ≠ ∅ } = ν' + 𝒩_{-m,0}^d, for a cell
/// index ν' ∈ 𝒩_{0, 2^κ-𝔢}^d.
pub fn interacting_indices(
    kappa: &MultiIndex,
    m: &MultiIndex,
    nu_cell: &MultiIndex,
) -> Result<IndexBox, SplineError> {
    let cells = IndexBox::new(
        MultiIndex::zeros(kappa.dim()),
        kappa.map(|k| (1i64 << k) - 1),
    )
    .expect("matching dims");
    if !cells.contains(nu_cell) {
        return Err(SplineError::CellOutsideCube {
            nu: nu_cell.clone(),
            kappa: kappa.clone(),
        });
    }
    let lo = nu_cell.zip(m, |n, mj| n - mj);
    Ok(IndexBox::new(lo, nu_cell.clone()).expect("matching dims"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ratpoly::rat_to_f64;

    #[test]
    fn box_spline_closed_forms() {
        // ψ^{1,0} = indicator of I.
        let s0 = spline(0);
        assert_eq!(s0.value(0.5), 1.0);
        assert_eq!(s0.value(-0.1), 0.0);
        assert_eq!(s0.value(1.0), 0.0); // right-continuous at the knot
        // ψ^{1,1} = hat with peak 1 at x = 1.
        let s1 = spline(1);
        assert_eq!(s1.value(0.5), 0.5);
        assert_eq!(s1.value(1.0), 1.0);
        assert_eq!(s1.value(-0.1), 0.0);
        assert_eq!(s1.value(2.0), 0.0);
    }

    #[test]
    fn spline_is_normalized_and_nonnegative() {
        for m in 0..=4usize {
            let s = spline(m);
            let total: Rat = spline_pieces_rational(m)
                .unwrap()
                .iter()
                .map(|p| crate::ratpoly::integral_unit(p))
                .sum();
            assert_eq!(rat_to_f64(&total), 1.0, "∫ψ^(1,{m}) = 1");
            let n = 2001;
            for i in 0..n {
                let x = -0.5 + (m as f64 + 2.0) * i as f64 / (n - 1) as f64;
                if x == x.floor() {
                    continue; // knots: values fixed by right-continuity
                }
                let v = s.value(x);
                assert!(v >= 0.0);
                let inside = x > 0.0 && x < (m + 1) as f64;
                if inside {
                    assert!(v > 0.0, "m={m} x={x}");
                } else {
                    assert!(v == 0.0, "m={m} x={x} v={v}");
                }
            }
        }
    }

    #[test]
    fn derivative_rejects_order_above_m() {
        assert!(spline(2).eval(3, 0.5).is_err());
        assert!(spline(2).eval(2, 0.5).is_ok());
    }

    #[test]
    fn refinement_mask_values() {
        assert_eq!(RefinementMask::new(0).coeffs(), &[1.0, 1.0]);
        assert_eq!(RefinementMask::new(1).coeffs(), &[0.5, 1.0, 0.5]);
        assert_eq!(
            RefinementMask::new(2).coeffs(),
            &[0.25, 0.75, 0.75, 0.25]
        );
    }

    #[test]
    fn refinement_identity_pointwise() {
        for m in 0..=4usize {
            let s = spline(m);
            let mask = RefinementMask::new(m);
            let n = 997; // prime count keeps samples off the dyadic knots
            for i in 0..n {
                let x = -0.3 + (m as f64 + 1.6) * (i as f64 + 0.5) / n as f64;
                let lhs = s.value(x);
                let rhs: f64 = (0..=m as i64 + 1)
                    .map(|mu| mask.coeff(mu) * s.value(2.0 * x - mu as f64))
                    .sum();
                assert!(
                    (lhs - rhs).abs() <= 1e-12,
                    "m={m} x={x}: {lhs} vs {rhs}"
                );
            }
        }
    }

    #[test]
    fn mask_parity_sums_are_exactly_one() {
        use num_traits::One;
        for m in 0..=8usize {
            let coeffs = RefinementMask::coeffs_rational(m);
            let even: Rat = coeffs.iter().step_by(2).cloned().sum();
            let odd: Rat = coeffs.iter().skip(1).step_by(2).cloned().sum();
            assert!(even.is_one(), "even parity sum, m={m}");
            assert!(odd.is_one(), "odd parity sum, m={m}");
            let feven: f64 = RefinementMask::new(m).coeffs().iter().step_by(2).sum();
            assert!((feven - 1.0).abs() <= 1e-14);
        }
    }

    #[test]
    fn tensor_generator_and_support() {
        let kappa = MultiIndex::of(&[0]);
        let nu = MultiIndex::of(&[0]);
        let m = MultiIndex::of(&[0]);
        assert_eq!(eval_g(&kappa, &nu, &m, &[0.5]), 1.0);

        let kappa = MultiIndex::of(&[0, 0]);
        let nu = MultiIndex::of(&[0, 0]);
        let m = MultiIndex::of(&[1, 1]);
        assert_eq!(eval_g(&kappa, &nu, &m, &[1.0, 1.0]), 1.0);

        let s = support_g(&MultiIndex::of(&[2]), &MultiIndex::of(&[1]), &MultiIndex::of(&[1]));
        assert_eq!(s, Rect::of(&[0.25], &[0.5]));
        let s = support_g(&MultiIndex::of(&[0]), &MultiIndex::of(&[-1]), &MultiIndex::of(&[1]));
        assert_eq!(s, Rect::of(&[-1.0], &[2.0]));
        let s = support_g(
            &MultiIndex::of(&[1, 1]),
            &MultiIndex::of(&[0, 0]),
            &MultiIndex::of(&[1, 1]),
        );
        assert_eq!(s, Rect::of(&[0.0, 0.0], &[1.0, 1.0]));

        // Outside the support the generator vanishes.
        assert_eq!(
            eval_g(
                &MultiIndex::of(&[2]),
                &MultiIndex::of(&[1]),
                &MultiIndex::of(&[1]),
                &[0.8]
            ),
            0.0
        );
    }

    #[test]
    fn interacting_indices_examples() {
        let b = interacting_indices(
            &MultiIndex::of(&[2]),
            &MultiIndex::of(&[1]),
            &MultiIndex::of(&[3]),
        )
        .unwrap();
        assert_eq!(b, IndexBox::of(&[2], &[3]));
        let b = interacting_indices(
            &MultiIndex::of(&[0]),
            &MultiIndex::of(&[0]),
            &MultiIndex::of(&[0]),
        )
        .unwrap();
        assert_eq!(b, IndexBox::of(&[0], &[0]));
        let b = interacting_indices(
            &MultiIndex::of(&[1, 2]),
            &MultiIndex::of(&[1, 2]),
            &MultiIndex::of(&[0, 0]),
        )
        .unwrap();
        assert_eq!(b, IndexBox::of(&[-1, -2], &[0, 0]));
        assert!(interacting_indices(
            &MultiIndex::of(&[1]),
            &MultiIndex::of(&[1]),
            &MultiIndex::of(&[2]),
        )
        .is_err());
    }

    #[test]
    fn partition_of_unity_on_cube() {
        for (kappa, m) in [
            (MultiIndex::of(&[3]), MultiIndex::of(&[2])),
            (MultiIndex::of(&[2, 3]), MultiIndex::of(&[1, 2])),
        ] {
            let d = kappa.dim();
            let idx = cube_indices(&kappa, &m);
            let n = 311;
            for i in 0..n {
                let x: Vec<f64> = (0..d)
                    .map(|j| ((i * (j + 7) + 3) % n) as f64 / n as f64)
                    .collect();
                let total: f64 = idx.iter().map(|nu| eval_g(&kappa, &nu, &m, &x)).sum();
                assert!((total - 1.0).abs() <= 1e-12, "x={x:?}");
            }
        }
    }

    #[test]
    fn derivative_sup_norm_scales_dyadically() {
        // ‖𝒟^λ g_{κ,ν}‖_∞ = 2^{(κ,λ)} ‖𝒟^λ ψ‖_∞ on a sample grid.
        let m = MultiIndex::of(&[2]);
        let lambda = MultiIndex::of(&[1]);
        let base = {
            let s = spline(2);
            let mut best: f64 = 0.0;
            for i in 0..3000 {
                let x = 3.0 * (i as f64 + 0.5) / 3000.0;
                best = best.max(s.eval_unchecked(1, x).abs());
            }
            best
        };
        for k in 0..=4i64 {
            let kappa = MultiIndex::of(&[k]);
            let nu = MultiIndex::of(&[1]);
            let mut best: f64 = 0.0;
            let lo = 0.5f64.powi(k as i32);
            for i in 0..3000 {
                let x = lo + 3.0 * 0.5f64.powi(k as i32) * (i as f64 + 0.5) / 3000.0;
                best = best.max(eval_g_deriv(&kappa, &nu, &m, &lambda, &[x]).unwrap().abs());
            }
            let expected = (k as f64).exp2() * base;
            assert!(
                (best - expected).abs() <= 1e-8 * expected.max(1.0),
                "k={k}: {best} vs {expected}"
            );
        }
    }
}
