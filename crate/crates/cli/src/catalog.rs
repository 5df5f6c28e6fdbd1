//! The function catalog: named oracles with known derivative oracles and a
//! smoothness class tag. The catalog spans the classes the smoothness vector
//! is meant to detect: polynomials of mixed degree, tensor sinusoids,
//! |x-½|^β kinks of prescribed per-axis smoothness, and a bounded-variation
//! control.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use mixext::analysis::DerivMap;
use mixext::index::MultiIndex;
use mixext::oracle::{FnOracle, Oracle, SmoothnessHint};
use rand::Rng;

/// What limits the mixed smoothness of an entry, per axis.
#[derive(Clone, Debug, PartialEq)]
pub enum ClassTag {
    /// Entire function: every finite smoothness order applies.
    Analytic,
    /// Exact polynomial; reproduced by the operators at matching degree.
    Polynomial(Vec<i64>),
    /// Per-axis Hölder exponents: the L_p smoothness on axis j is
    /// β_j + 1/p (∞ encoded as f64::INFINITY for smooth axes).
    HolderKink(Vec<f64>),
    /// Jump discontinuity: L_p smoothness 1/p only.
    BoundedVariation,
}

#[derive(Clone)]
pub struct CatalogFunction {
    pub name: String,
    pub oracle: Arc<dyn Oracle>,
    /// Mixed-derivative oracles 𝒟^λ f keyed by λ, for the orders that stay
    /// in L_p; never obtained by numerical differentiation.
    pub derivs: DerivMap,
    pub tag: ClassTag,
}

impl CatalogFunction {
    /// Whether ‖f‖ in the α-smoothness scale is finite for the given p.
    pub fn finite_norm(&self, alpha: &[f64], p: f64) -> bool {
        match &self.tag {
            ClassTag::Analytic | ClassTag::Polynomial(_) => true,
            ClassTag::HolderKink(beta) => alpha
                .iter()
                .zip(beta)
                .all(|(&a, &b)| a < b + 1.0 / p - 1e-9),
            ClassTag::BoundedVariation => alpha.iter().all(|&a| a < 1.0 / p - 1e-9),
        }
    }

    pub fn derivative(&self, lambda: &MultiIndex) -> Option<Arc<dyn Oracle>> {
        self.derivs.get(lambda.entries()).cloned()
    }
}

fn fn_oracle(
    d: usize,
    f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
) -> Arc<dyn Oracle> {
    Arc::new(FnOracle::new(d, f))
}

fn poly_oracle(
    d: usize,
    degree: Vec<i64>,
    f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
) -> Arc<dyn Oracle> {
    Arc::new(FnOracle::with_hint(
        d,
        SmoothnessHint::Polynomial(MultiIndex::of(&degree)),
        f,
    ))
}

fn kink(x: f64, beta: f64) -> f64 {
    (x - 0.5).abs().powf(beta)
}

fn kink_d1(x: f64, beta: f64) -> f64 {
    // d/dx |x-1/2|^β, defined away from the kink.
    beta * (x - 0.5).abs().powf(beta - 1.0) * (x - 0.5).signum()
}

/// The one-dimensional catalog.
pub fn catalog_1d() -> Vec<CatalogFunction> {
    let mut out = Vec::new();

    {
        let mut derivs: DerivMap = BTreeMap::new();
        derivs.insert(vec![1], fn_oracle(1, |_| 1.4));
        derivs.insert(vec![2], fn_oracle(1, |_| 0.0));
        out.push(CatalogFunction {
            name: "poly_lin".into(),
            oracle: poly_oracle(1, vec![1], |x| 0.3 + 1.4 * x[0]),
            derivs,
            tag: ClassTag::Polynomial(vec![1]),
        });
    }
    {
        let mut derivs: DerivMap = BTreeMap::new();
        derivs.insert(vec![1], fn_oracle(1, |x| 3.0 * x[0] * x[0] - 0.5));
        derivs.insert(vec![2], fn_oracle(1, |x| 6.0 * x[0]));
        derivs.insert(vec![3], fn_oracle(1, |_| 6.0));
        out.push(CatalogFunction {
            name: "poly_cubic".into(),
            oracle: poly_oracle(1, vec![3], |x| x[0].powi(3) - 0.5 * x[0]),
            derivs,
            tag: ClassTag::Polynomial(vec![3]),
        });
    }
    {
        let w = 2.0 * PI;
        let mut derivs: DerivMap = BTreeMap::new();
        derivs.insert(vec![1], fn_oracle(1, move |x| w * (w * x[0]).cos()));
        derivs.insert(vec![2], fn_oracle(1, move |x| -w * w * (w * x[0]).sin()));
        derivs.insert(
            vec![3],
            fn_oracle(1, move |x| -w * w * w * (w * x[0]).cos()),
        );
        out.push(CatalogFunction {
            name: "sin2pi".into(),
            oracle: fn_oracle(1, move |x| (w * x[0]).sin()),
            derivs,
            tag: ClassTag::Analytic,
        });
    }
    {
        // β = 1.25: one bounded derivative, kink in the second.
        let beta = 1.25;
        let mut derivs: DerivMap = BTreeMap::new();
        derivs.insert(vec![1], fn_oracle(1, move |x| kink_d1(x[0], beta)));
        out.push(CatalogFunction {
            name: "kink125".into(),
            oracle: fn_oracle(1, move |x| kink(x[0], beta)),
            derivs,
            tag: ClassTag::HolderKink(vec![beta]),
        });
    }
    out.push(CatalogFunction {
        name: "bv_step".into(),
        oracle: fn_oracle(1, |x| if x[0] < 1.0 / 3.0 { 0.0 } else { 1.0 }),
        derivs: BTreeMap::new(),
        tag: ClassTag::BoundedVariation,
    });
    out
}

/// The two-dimensional catalog.
pub fn catalog_2d() -> Vec<CatalogFunction> {
    let mut out = Vec::new();

    {
        let mut derivs: DerivMap = BTreeMap::new();
        derivs.insert(vec![1, 0], fn_oracle(2, |x| 1.4 * (1.0 - 0.5 * x[1])));
        derivs.insert(vec![0, 1], fn_oracle(2, |x| -0.5 * (0.3 + 1.4 * x[0])));
        derivs.insert(vec![1, 1], fn_oracle(2, |_| -0.7));
        derivs.insert(vec![2, 0], fn_oracle(2, |_| 0.0));
        derivs.insert(vec![0, 2], fn_oracle(2, |_| 0.0));
        derivs.insert(vec![2, 2], fn_oracle(2, |_| 0.0));
        derivs.insert(vec![2, 1], fn_oracle(2, |_| 0.0));
        derivs.insert(vec![1, 2], fn_oracle(2, |_| 0.0));
        out.push(CatalogFunction {
            name: "poly_bilinear".into(),
            oracle: poly_oracle(2, vec![1, 1], |x| (0.3 + 1.4 * x[0]) * (1.0 - 0.5 * x[1])),
            derivs,
            tag: ClassTag::Polynomial(vec![1, 1]),
        });
    }
    {
        let w = 2.0 * PI;
        let v = PI;
        let mut derivs: DerivMap = BTreeMap::new();
        let base = move |x: &[f64]| (w * x[0]).sin() * (v * x[1]).sin();
        for l0 in 0..=2i64 {
            for l1 in 0..=2i64 {
                if l0 == 0 && l1 == 0 {
                    continue;
                }
                derivs.insert(
                    vec![l0, l1],
                    fn_oracle(2, move |x| {
                        let fx = match l0 % 4 {
                            0 => (w * x[0]).sin(),
                            1 => (w * x[0]).cos(),
                            2 => -(w * x[0]).sin(),
                            _ => -(w * x[0]).cos(),
                        } * w.powi(l0 as i32);
                        let fy = match l1 % 4 {
                            0 => (v * x[1]).sin(),
                            1 => (v * x[1]).cos(),
                            2 => -(v * x[1]).sin(),
                            _ => -(v * x[1]).cos(),
                        } * v.powi(l1 as i32);
                        fx * fy
                    }),
                );
            }
        }
        out.push(CatalogFunction {
            name: "sinsin".into(),
            oracle: fn_oracle(2, base),
            derivs,
            tag: ClassTag::Analytic,
        });
    }
    {
        // Kink on axis 1, smooth on axis 2.
        let beta = 1.25;
        let v = PI;
        let mut derivs: DerivMap = BTreeMap::new();
        derivs.insert(
            vec![1, 0],
            fn_oracle(2, move |x| kink_d1(x[0], beta) * (v * x[1]).sin()),
        );
        derivs.insert(
            vec![0, 1],
            fn_oracle(2, move |x| kink(x[0], beta) * v * (v * x[1]).cos()),
        );
        derivs.insert(
            vec![1, 1],
            fn_oracle(2, move |x| kink_d1(x[0], beta) * v * (v * x[1]).cos()),
        );
        derivs.insert(
            vec![0, 2],
            fn_oracle(2, move |x| -kink(x[0], beta) * v * v * (v * x[1]).sin()),
        );
        out.push(CatalogFunction {
            name: "kink125_sin".into(),
            oracle: fn_oracle(2, move |x| kink(x[0], beta) * (v * x[1]).sin()),
            derivs,
            tag: ClassTag::HolderKink(vec![beta, f64::INFINITY]),
        });
    }
    out.push(CatalogFunction {
        name: "bv_step_2d".into(),
        oracle: fn_oracle(2, |x| {
            if x[0] < 1.0 / 3.0 {
                0.0
            } else {
                1.0 + 0.2 * x[1]
            }
        }),
        derivs: BTreeMap::new(),
        tag: ClassTag::BoundedVariation,
    });
    out
}

pub fn catalog(d: usize) -> Vec<CatalogFunction> {
    match d {
        1 => catalog_1d(),
        2 => catalog_2d(),
        _ => Vec::new(),
    }
}

pub fn find(d: usize, name: &str) -> Option<CatalogFunction> {
    catalog(d).into_iter().find(|f| f.name == name)
}

/// A random smooth trigonometric mixture Σ a_i Π_j sin(2π ω_{ij} x_j + φ_{ij})
/// with low frequencies; deterministic given the RNG state.
pub fn random_smooth(d: usize, rng: &mut impl Rng) -> Arc<dyn Oracle> {
    let terms = 3usize;
    let mut amps = Vec::with_capacity(terms);
    let mut freqs = Vec::with_capacity(terms);
    let mut phases = Vec::with_capacity(terms);
    for _ in 0..terms {
        amps.push(rng.gen_range(-1.0..1.0f64));
        freqs.push((0..d).map(|_| rng.gen_range(0.4..2.2f64)).collect::<Vec<_>>());
        phases.push((0..d).map(|_| rng.gen_range(0.0..PI)).collect::<Vec<_>>());
    }
    fn_oracle(d, move |x| {
        let mut acc = 0.0;
        for i in 0..amps.len() {
            let mut prod = amps[i];
            for j in 0..x.len() {
                prod *= (2.0 * PI * freqs[i][j] * x[j] + phases[i][j]).sin();
            }
            acc += prod;
        }
        acc
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivative_oracles_pass_finite_difference_spot_check() {
        // Central difference, relative error ≤ 1e-5 at 50 pseudo-random
        // points (kept away from the known kink lines).
        let h = 1e-5;
        for d in [1usize, 2] {
            for f in catalog(d) {
                for (lam, df) in &f.derivs {
                    let order: i64 = lam.iter().sum();
                    if order != 1 {
                        continue; // central differences only for first order
                    }
                    let axis = lam.iter().position(|&v| v == 1).unwrap();
                    let mut checked = 0;
                    let mut i = 0u64;
                    while checked < 50 {
                        i += 1;
                        let x: Vec<f64> = (0..d)
                            .map(|j| {
                                let t = ((i * 37 + j as u64 * 101 + 13) % 1000) as f64 / 1000.0;
                                0.05 + 0.9 * t
                            })
                            .collect();
                        if matches!(f.tag, ClassTag::HolderKink(_)) && (x[0] - 0.5).abs() < 0.05
                        {
                            continue;
                        }
                        let mut xp = x.clone();
                        let mut xm = x.clone();
                        xp[axis] += h;
                        xm[axis] -= h;
                        let fd = (f.oracle.eval(&xp) - f.oracle.eval(&xm)) / (2.0 * h);
                        let dv = df.eval(&x);
                        let scale = dv.abs().max(1.0);
                        assert!(
                            (fd - dv).abs() <= 1e-5 * scale,
                            "{} λ={lam:?} x={x:?}: fd {fd} vs {dv}",
                            f.name
                        );
                        checked += 1;
                    }
                }
            }
        }
    }

    #[test]
    fn finiteness_tags() {
        let k = find(1, "kink125").unwrap();
        assert!(k.finite_norm(&[1.5], 2.0)); // 1.5 < 1.25 + 0.5
        assert!(!k.finite_norm(&[1.8], 2.0));
        let b = find(1, "bv_step").unwrap();
        assert!(!b.finite_norm(&[1.5], 2.0));
        assert!(b.finite_norm(&[0.4], 2.0));
        assert!(find(1, "sin2pi").unwrap().finite_norm(&[3.0], 2.0));
    }
}
