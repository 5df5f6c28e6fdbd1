//! Gauss–Legendre quadrature on the unit interval and tensor rules on
//! axis-aligned boxes.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use crate::index::Rect;

/// Nodes and weights of the n-point Gauss–Legendre rule on (0,1).
#[derive(Clone, Debug)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

fn legendre_steps(n: usize, x: f64) -> (f64, f64) {
    // Value and derivative of P_n on [-1,1] via the three-term recurrence.
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

fn compute_rule(n: usize) -> GaussRule {
    assert!((1..=256).contains(&n), "unsupported Gauss order {n}");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        // Tricomi initial guess, then Newton.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_steps(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre_steps(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        // Map [-1,1] -> [0,1]; store ascending.
        nodes[n - 1 - i] = 0.5 * (x + 1.0);
        weights[n - 1 - i] = 0.5 * w;
    }
    GaussRule { nodes, weights }
}

/// Cached Gauss–Legendre rule on the unit interval.
pub fn gauss_unit(n: usize) -> Arc<GaussRule> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<GaussRule>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("gauss cache poisoned");
    guard.entry(n).or_insert_with(|| Arc::new(compute_rule(n))).clone()
}

/// Iterate the tensor rule with `orders[j]` nodes per axis over `rect`,
/// calling `visit(point, weight)` for every node.
pub fn tensor_rule(rect: &Rect, orders: &[usize], mut visit: impl FnMut(&[f64], f64)) {
    let d = rect.dim();
    assert_eq!(orders.len(), d);
    let rules: Vec<Arc<GaussRule>> = orders.iter().map(|&n| gauss_unit(n)).collect();
    let mut idx = vec![0usize; d];
    let mut point = vec![0.0; d];
    loop {
        let mut w = 1.0;
        for j in 0..d {
            let r = &rules[j];
            point[j] = rect.corner()[j] + rect.edge()[j] * r.nodes[idx[j]];
            w *= rect.edge()[j] * r.weights[idx[j]];
        }
        visit(&point, w);
        // Odometer increment, last axis fastest.
        let mut axis = d;
        loop {
            if axis == 0 {
                return;
            }
            axis -= 1;
            idx[axis] += 1;
            if idx[axis] < orders[axis] {
                break;
            }
            idx[axis] = 0;
        }
    }
}

/// ∫_rect f with a plain tensor Gauss rule.
pub fn integrate(rect: &Rect, orders: &[usize], f: impl Fn(&[f64]) -> f64) -> f64 {
    let mut acc = 0.0;
    tensor_rule(rect, orders, |x, w| acc += w * f(x));
    acc
}

/// ∫_rect f with the box subdivided into `panels[j]` equal panels per axis.
pub fn integrate_composite(
    rect: &Rect,
    panels: &[usize],
    order: usize,
    f: impl Fn(&[f64]) -> f64,
) -> f64 {
    let d = rect.dim();
    let sub_edge: Vec<f64> = rect
        .edge()
        .iter()
        .zip(panels)
        .map(|(e, &n)| e / n as f64)
        .collect();
    let mut acc = 0.0;
    let mut cell = vec![0usize; d];
    loop {
        let corner: Vec<f64> = rect
            .corner()
            .iter()
            .zip(&sub_edge)
            .zip(&cell)
            .map(|((c, e), &k)| c + e * k as f64)
            .collect();
        let sub = Rect::of(&corner, &sub_edge);
        acc += integrate(&sub, &vec![order; d], &f);
        let mut axis = d;
        loop {
            if axis == 0 {
                return acc;
            }
            axis -= 1;
            cell[axis] += 1;
            if cell[axis] < panels[axis] {
                break;
            }
            cell[axis] = 0;
        }
    }
}

/// Uniform sample grid over a box, n points per axis including both faces.
pub fn sample_grid(rect: &Rect, n_per_axis: usize, mut visit: impl FnMut(&[f64])) {
    let d = rect.dim();
    let n = n_per_axis.max(2);
    let mut idx = vec![0usize; d];
    let mut point = vec![0.0; d];
    loop {
        for j in 0..d {
            point[j] =
                rect.corner()[j] + rect.edge()[j] * idx[j] as f64 / (n - 1) as f64;
        }
        visit(&point);
        let mut axis = d;
        loop {
            if axis == 0 {
                return;
            }
            axis -= 1;
            idx[axis] += 1;
            if idx[axis] < n {
                break;
            }
            idx[axis] = 0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rule_integrates_monomials_exactly() {
        for n in 1..=12usize {
            let rule = gauss_unit(n);
            assert!((rule.weights.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            for deg in 0..=(2 * n - 1) {
                let val: f64 = rule
                    .nodes
                    .iter()
                    .zip(&rule.weights)
                    .map(|(x, w)| w * x.powi(deg as i32))
                    .sum();
                let exact = 1.0 / (deg as f64 + 1.0);
                assert!(
                    (val - exact).abs() < 1e-14,
                    "n={n} deg={deg}: {val} vs {exact}"
                );
            }
        }
    }

    #[test]
    fn tensor_rule_on_shifted_box() {
        let rect = Rect::of(&[-1.0, 0.5], &[2.0, 0.25]);
        let val = integrate(&rect, &[4, 4], |x| x[0] * x[0] + x[1]);
        // ∫_{-1}^{1}∫_{.5}^{.75} x²+y dy dx = 2/3·0.25 + 2·(0.75²-0.5²)/2
        let exact = 2.0 / 3.0 * 0.25 + 2.0 * (0.75f64.powi(2) - 0.5f64.powi(2)) / 2.0;
        assert!((val - exact).abs() < 1e-13);
    }

    #[test]
    fn composite_matches_plain_for_smooth() {
        let rect = Rect::of(&[0.0], &[1.0]);
        let f = |x: &[f64]| (3.0 * x[0]).sin();
        let a = integrate(&rect, &[20], f);
        let b = integrate_composite(&rect, &[4], 8, f);
        assert!((a - b).abs() < 1e-12);
    }
}
