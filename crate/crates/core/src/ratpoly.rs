//! Exact polynomial calculus over the rationals, used once at start-up to
//! build spline piece tables and the orthonormal basis. Polynomials are
//! coefficient vectors in ascending monomial order.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

pub type Rat = BigRational;

pub fn rat(n: i64, d: i64) -> Rat {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

pub fn rat_to_f64(r: &Rat) -> f64 {
    r.to_f64().expect("rational fits in f64")
}

pub fn zero_poly() -> Vec<Rat> {
    vec![Rat::zero()]
}

pub fn add(a: &[Rat], b: &[Rat]) -> Vec<Rat> {
    let n = a.len().max(b.len());
    (0..n)
        .map(|i| {
            let x = a.get(i).cloned().unwrap_or_else(Rat::zero);
            let y = b.get(i).cloned().unwrap_or_else(Rat::zero);
            x + y
        })
        .collect()
}

pub fn sub(a: &[Rat], b: &[Rat]) -> Vec<Rat> {
    let n = a.len().max(b.len());
    (0..n)
        .map(|i| {
            let x = a.get(i).cloned().unwrap_or_else(Rat::zero);
            let y = b.get(i).cloned().unwrap_or_else(Rat::zero);
            x - y
        })
        .collect()
}

pub fn scale(a: &[Rat], c: &Rat) -> Vec<Rat> {
    a.iter().map(|x| x * c).collect()
}

pub fn mul(a: &[Rat], b: &[Rat]) -> Vec<Rat> {
    let mut out = vec![Rat::zero(); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        if x.is_zero() {
            continue;
        }
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Antiderivative with zero constant term.
pub fn antiderivative(a: &[Rat]) -> Vec<Rat> {
    let mut out = vec![Rat::zero(); a.len() + 1];
    for (i, c) in a.iter().enumerate() {
        out[i + 1] = c / rat((i + 1) as i64, 1);
    }
    out
}

/// ∫_0^1 a(x) dx.
pub fn integral_unit(a: &[Rat]) -> Rat {
    a.iter()
        .enumerate()
        .map(|(i, c)| c / rat((i + 1) as i64, 1))
        .sum()
}

/// ∫_0^1 a(x) b(x) dx.
pub fn inner_unit(a: &[Rat], b: &[Rat]) -> Rat {
    integral_unit(&mul(a, b))
}

pub fn to_f64_vec(a: &[Rat]) -> Vec<f64> {
    a.iter().map(rat_to_f64).collect()
}

pub fn one_poly() -> Vec<Rat> {
    vec![Rat::one()]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basic_calculus() {
        // p(x) = 1 + 2x
        let p = vec![rat(1, 1), rat(2, 1)];
        assert_eq!(integral_unit(&p), rat(2, 1));
        let q = antiderivative(&p); // x + x²
        assert_eq!(integral_unit(&q), rat(1, 2) + rat(1, 3));
        assert_eq!(inner_unit(&one_poly(), &p), rat(2, 1));
        assert_eq!(sub(&add(&p, &p), &p), p);
        assert_eq!(mul(&p, &one_poly()), p);
        assert_eq!(scale(&p, &rat(2, 1)), add(&p, &p));
    }
}
