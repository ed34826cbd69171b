//! Gauss–Legendre rules and an adaptive bisection integrator for
//! vector-valued integrands.

use crate::error::{OfbmError, Result};

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Rule of the given order, nodes from Newton iteration on `P_n`.
    pub fn new(order: usize) -> Self {
        assert!(order >= 1, "Gauss-Legendre order must be >= 1");
        let n = order;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                let pn = if n == 1 { x } else { p1 };
                let pn1 = if n == 1 { 1.0 } else { p0 };
                dp = n as f64 * (x * pn - pn1) / (x * x - 1.0);
                let dx = pn / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        half * self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(mid + half * x))
            .sum::<f64>()
    }

    /// Integrates a vector-valued function of fixed length `len`.
    pub fn integrate_vec<F>(&self, a: f64, b: f64, len: usize, f: &mut F) -> Result<Vec<f64>>
    where
        F: FnMut(f64) -> Result<Vec<f64>>,
    {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut acc = vec![0.0; len];
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            let v = f(mid + half * x)?;
            debug_assert_eq!(v.len(), len);
            for (s, vi) in acc.iter_mut().zip(&v) {
                *s += w * vi;
            }
        }
        acc.iter_mut().for_each(|s| *s *= half);
        Ok(acc)
    }
}

/// Settings for [`adaptive_integrate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveConfig {
    /// Gauss–Legendre order on each panel.
    pub order: usize,
    /// Absolute tolerance for the whole interval, per component.
    pub abs_tol: f64,
    /// Maximum number of accepted panels.
    pub max_panels: usize,
}

impl Default for AdaptiveConfig {
    fn default() -> Self {
        Self {
            order: 16,
            abs_tol: 1e-12,
            max_panels: 4000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Integral {
    pub value: Vec<f64>,
    /// Sum over panels of the coarse/fine discrepancy, max over components.
    pub error_estimate: f64,
    pub panels: usize,
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Adaptive bisection: a panel is accepted when its rule and the sum of the
/// rules on its two halves agree to within the panel's share of `abs_tol`.
pub fn adaptive_integrate<F>(a: f64, b: f64, len: usize, cfg: &AdaptiveConfig, mut f: F) -> Result<Integral>
where
    F: FnMut(f64) -> Result<Vec<f64>>,
{
    if a == b {
        return Ok(Integral {
            value: vec![0.0; len],
            error_estimate: 0.0,
            panels: 0,
        });
    }
    let rule = GaussLegendre::new(cfg.order);
    let width = b - a;
    let mut total = vec![0.0; len];
    let mut err_total = 0.0;
    let mut panels = 0usize;
    let whole = rule.integrate_vec(a, b, len, &mut f)?;
    let mut stack = vec![(a, b, whole)];
    while let Some((lo, hi, coarse)) = stack.pop() {
        let mid = 0.5 * (lo + hi);
        let left = rule.integrate_vec(lo, mid, len, &mut f)?;
        let right = rule.integrate_vec(mid, hi, len, &mut f)?;
        let fine: Vec<f64> = left.iter().zip(&right).map(|(l, r)| l + r).collect();
        let err = max_diff(&coarse, &fine);
        let share = cfg.abs_tol * ((hi - lo) / width).abs();
        let tiny_panel = (hi - lo).abs() <= 1e-14 * width.abs().max(lo.abs().max(hi.abs()));
        if err <= share || tiny_panel {
            for (t, v) in total.iter_mut().zip(&fine) {
                *t += v;
            }
            err_total += err;
            panels += 1;
        } else {
            if panels + stack.len() + 2 > cfg.max_panels {
                return Err(OfbmError::Accuracy {
                    estimate: err_total + err,
                    tolerance: cfg.abs_tol,
                    panels: cfg.max_panels,
                });
            }
            stack.push((mid, hi, right));
            stack.push((lo, mid, left));
        }
    }
    Ok(Integral {
        value: total,
        error_estimate: err_total,
        panels,
    })
}
