//! Black-box real-valued functions on boxes. An oracle is evaluable
//! pointwise and carries a smoothness hint used to pick quadrature orders.

use std::sync::Arc;

use crate::index::MultiIndex;

/// Quadrature-order selection hint declared by a function oracle.
#[derive(Clone, Debug, PartialEq)]
pub enum SmoothnessHint {
    /// Exactly a polynomial of the given componentwise degree.
    Polynomial(MultiIndex),
    /// Smooth enough that a fixed moderate Gauss order converges fast.
    Smooth,
    /// Kinks or jumps present; composite rules should subdivide.
    PiecewiseSmooth,
}

pub trait Oracle: Send + Sync {
    fn dim(&self) -> usize;
    fn eval(&self, x: &[f64]) -> f64;
    fn hint(&self) -> SmoothnessHint {
        SmoothnessHint::Smooth
    }
}

/// Oracle built from a closure.
pub struct FnOracle<F: Fn(&[f64]) -> f64 + Send + Sync> {
    dim: usize,
    hint: SmoothnessHint,
    f: F,
}

impl<F: Fn(&[f64]) -> f64 + Send + Sync> FnOracle<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self {
            dim,
            hint: SmoothnessHint::Smooth,
            f,
        }
    }

    pub fn with_hint(dim: usize, hint: SmoothnessHint, f: F) -> Self {
        Self { dim, hint, f }
    }
}

impl<F: Fn(&[f64]) -> f64 + Send + Sync> Oracle for FnOracle<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }

    fn hint(&self) -> SmoothnessHint {
        self.hint.clone()
    }
}

impl Oracle for Arc<dyn Oracle> {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn eval(&self, x: &[f64]) -> f64 {
        (**self).eval(x)
    }

    fn hint(&self) -> SmoothnessHint {
        (**self).hint()
    }
}
