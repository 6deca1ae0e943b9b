//! Gauss–Legendre rules and an adaptive panel-halving integrator.
//!
//! Every panel is integrated twice, once with the base rule on the whole
//! panel and once with the same rule on its two halves. The panel with the
//! largest disagreement is halved next, so refinement concentrates where the
//! integrand has sharp features (steep `tanh` fronts at large β).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Controls for the uniform-law expectation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadratureConfig {
    /// Number of Gauss–Legendre nodes per panel.
    pub order: usize,
    /// Relative tolerance between successive refinements.
    pub tol: f64,
    /// Maximum number of halvings of any single panel.
    pub max_doublings: u32,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            order: 12,
            tol: 1e-10,
            max_doublings: 12,
        }
    }
}

/// Nodes and weights on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(order: usize) -> Self {
        assert!(order >= 1, "Gauss-Legendre order must be positive");
        let n = order;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    /// Integral of `f` over [a, b].
    pub fn integrate<F>(&self, a: f64, b: f64, f: &mut F) -> Result<(f64, f64)>
    where
        F: FnMut(f64) -> Result<f64>,
    {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut sum = 0.0;
        let mut sum_abs = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            let v = f(mid + half * x)?;
            sum += w * v;
            sum_abs += w * v.abs();
        }
        Ok((sum * half, sum_abs * half))
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

struct Panel {
    a: f64,
    b: f64,
    depth: u32,
    coarse: f64,
    left: (f64, f64),
    right: (f64, f64),
}

impl Panel {
    fn fine(&self) -> f64 {
        self.left.0 + self.right.0
    }
    fn err(&self) -> f64 {
        (self.fine() - self.coarse).abs()
    }
}

/// Adaptive integral of `f` over [a, b].
pub fn integrate<F>(mut f: F, a: f64, b: f64, cfg: &QuadratureConfig) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    if a == b {
        return Ok(0.0);
    }
    let rule = GaussLegendre::new(cfg.order.max(1));
    let make = |a: f64, b: f64, depth: u32, coarse: f64, f: &mut F| -> Result<Panel> {
        let m = 0.5 * (a + b);
        let left = rule.integrate(a, m, f)?;
        let right = rule.integrate(m, b, f)?;
        Ok(Panel {
            a,
            b,
            depth,
            coarse,
            left,
            right,
        })
    };
    let (whole, _) = rule.integrate(a, b, &mut f)?;
    let mut panels = vec![make(a, b, 0, whole, &mut f)?];
    loop {
        let total: f64 = panels.iter().map(Panel::fine).sum();
        let total_abs: f64 = panels.iter().map(|p| p.left.1 + p.right.1).sum();
        let err: f64 = panels.iter().map(Panel::err).sum();
        let scale = total.abs().max(total_abs);
        if err <= cfg.tol * scale || scale == 0.0 {
            return Ok(total);
        }
        let (worst, _) = panels
            .iter()
            .enumerate()
            .map(|(i, p)| (i, p.err()))
            .fold((0, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });
        if panels[worst].depth >= cfg.max_doublings {
            let previous: f64 = panels.iter().map(|p| p.coarse).sum();
            return Err(Error::Quadrature {
                last: total,
                previous,
            });
        }
        let p = panels.swap_remove(worst);
        let m = 0.5 * (p.a + p.b);
        panels.push(make(p.a, m, p.depth + 1, p.left.0, &mut f)?);
        panels.push(make(m, p.b, p.depth + 1, p.right.0, &mut f)?);
    }
}
