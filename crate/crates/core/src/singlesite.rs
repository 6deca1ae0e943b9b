//! Single-site spectrum, traces with a symmetry-breaking source, and the
//! hard-core closed forms.
//!
//! The site operator is `(μ_eff − 1)n − λn(n−1) + r(a + a*)` on the Fock
//! space truncated at `n_max`; with `r = 0` it is diagonal with entries
//! `−h_n(μ_eff, λ)`.

use serde::{Deserialize, Serialize};

use crate::disorder::log_sum_exp;
use crate::error::{domain, Error, Result};
use crate::tridiag::eigh_tridiagonal;

/// `−ln(1e−16)`: weights below `e^{−TAIL}` of the dominant one are dropped.
const TAIL: f64 = 36.841_361_487_904_734;
const MIN_CUTOFF: usize = 8;
/// Hard cap on the occupancy cutoff.
pub const MAX_CUTOFF: usize = 16_384;
const CUTOFF_STEP: usize = 8;
const CUTOFF_REL_TOL: f64 = 1e-10;
const DEGENERATE_GAP: f64 = 1e-10;
const HC_TAYLOR: f64 = 1e-8;

/// On-site interaction regime.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interaction {
    /// Repulsion `λ ≥ 0` with unrestricted occupation.
    Finite(f64),
    /// `λ = +∞`: occupation 0 or 1.
    HardCore,
    /// `λ = 0` treated in closed form.
    Perfect,
}

impl Interaction {
    pub fn finite(lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return domain(format!("interaction lambda must be finite and >= 0, got {lambda}"));
        }
        Ok(Interaction::Finite(lambda))
    }

    pub fn label(&self) -> String {
        match self {
            Interaction::Finite(l) => format!("{l}"),
            Interaction::HardCore => "inf".into(),
            Interaction::Perfect => "perfect".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub beta: f64,
    pub mu: f64,
    pub interaction: Interaction,
}

impl ModelParams {
    pub fn new(beta: f64, mu: f64, interaction: Interaction) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return domain(format!("beta must be finite and > 0, got {beta}"));
        }
        if !mu.is_finite() {
            return domain(format!("mu must be finite, got {mu}"));
        }
        if let Interaction::Finite(l) = interaction {
            Interaction::finite(l)?;
        }
        Ok(Self { beta, mu, interaction })
    }
}

/// `h_n(μ, λ) = (1 − μ)n + λn(n − 1)`.
pub fn h_n(n: usize, mu: f64, lambda: f64) -> f64 {
    let n = n as f64;
    (1.0 - mu) * n + lambda * n * (n - 1.0)
}

/// Truncated single-site operator without the factor β.
#[derive(Debug, Clone, PartialEq)]
pub struct SingleSiteOperator {
    pub n_max: usize,
    /// `(μ_eff − 1)n − λn(n−1)`, `n = 0..=n_max`.
    pub diag: Vec<f64>,
    /// `r√(n+1)`, `n = 0..n_max`.
    pub offdiag: Vec<f64>,
    pub r: f64,
}

impl SingleSiteOperator {
    /// The source enters only through `|r|`.
    pub fn new(mu_eff: f64, lambda: f64, r: f64, n_max: usize) -> Self {
        let r = r.abs();
        let diag = (0..=n_max).map(|n| -h_n(n, mu_eff, lambda)).collect();
        let offdiag = (0..n_max).map(|n| r * ((n + 1) as f64).sqrt()).collect();
        Self {
            n_max,
            diag,
            offdiag,
            r,
        }
    }

    /// `ln Tr exp(β·op)`.
    pub fn log_trace(&self, beta: f64) -> f64 {
        if self.r == 0.0 {
            let t: Vec<f64> = self.diag.iter().map(|d| beta * d).collect();
            return log_sum_exp(&t);
        }
        let eig = eigh_tridiagonal(&self.diag, &self.offdiag, false);
        let t: Vec<f64> = eig.values.iter().map(|e| beta * e).collect();
        log_sum_exp(&t)
    }

    /// `(ln Tr exp(β·op), ⟨a + a*⟩)` in the Gibbs state of `op`.
    pub fn log_trace_and_source(&self, beta: f64) -> (f64, f64) {
        if self.r == 0.0 {
            return (self.log_trace(beta), 0.0);
        }
        let n = self.n_max + 1;
        let eig = eigh_tridiagonal(&self.diag, &self.offdiag, true);
        let t: Vec<f64> = eig.values.iter().map(|e| beta * e).collect();
        let lz = log_sum_exp(&t);
        let mut acc = 0.0;
        for (k, tk) in t.iter().enumerate() {
            let w = (tk - lz).exp();
            if w < 1e-300 {
                continue;
            }
            let mut m = 0.0;
            for i in 0..n - 1 {
                m += ((i + 1) as f64).sqrt() * eig.vector_component(i, k) * eig.vector_component(i + 1, k);
            }
            acc += w * 2.0 * m;
        }
        (lz, acc)
    }
}

/// Smallest safe occupancy cutoff for the given site parameters.
///
/// The cutoff lies past the minimum of `h_n`, with the neglected diagonal
/// tail below `1e−16` of the dominant weight and the source coupling to
/// dropped levels below `1e−14`.
pub fn choose_cutoff(beta: f64, mu: f64, lambda: f64, r: f64) -> Result<usize> {
    if lambda == 0.0 && mu >= 1.0 {
        return Err(Error::Gapless { mu_eff: mu });
    }
    let r = r.abs();
    let mut h_min = 0.0_f64;
    for n in 0..=MAX_CUTOFF {
        let h = h_n(n, mu, lambda);
        h_min = h_min.min(h);
        if n < MIN_CUTOFF {
            continue;
        }
        let slope = h_n(n + 1, mu, lambda) - h;
        if slope <= 0.0 {
            continue;
        }
        let d = h - h_min;
        // geometric bound on the tail Σ_{k>n} e^{−β(h_k − h_min)}
        let tail_ok = beta * d + (-(-beta * slope).exp_m1()).ln() > TAIL;
        let coupling = r * (n as f64).sqrt() * beta * (-beta * d).exp();
        let source_ok = r == 0.0
            || (coupling < 1e-14 && beta * (d - 2.0 * r * ((n + 1) as f64).sqrt()) > TAIL);
        if tail_ok && source_ok {
            return if r == 0.0 {
                Ok(n)
            } else {
                settle_cutoff(beta, mu, lambda, r, n)
            };
        }
    }
    Err(Error::CutoffInsufficient {
        n_max: MAX_CUTOFF,
        detail: format!("beta = {beta}, mu = {mu}, lambda = {lambda}, r = {r}"),
    })
}

/// With a source the diagonal bound is only a starting point: grow the
/// cutoff until the trace is stable to `1e−13` relative.
fn settle_cutoff(beta: f64, mu: f64, lambda: f64, r: f64, start: usize) -> Result<usize> {
    let mut n = start;
    let mut v = log_trace_truncated(beta, mu, lambda, r, n);
    while n + CUTOFF_STEP <= MAX_CUTOFF {
        let w = log_trace_truncated(beta, mu, lambda, r, n + CUTOFF_STEP);
        if (v - w).abs() <= 1e-13 * v.abs().max(1.0) {
            return Ok(n);
        }
        n += CUTOFF_STEP;
        v = w;
    }
    Err(Error::CutoffInsufficient {
        n_max: n,
        detail: format!("trace unstable with source r = {r} (beta = {beta}, mu = {mu}, lambda = {lambda})"),
    })
}

/// `ln Tr` at a fixed cutoff, with no convergence check.
pub fn log_trace_truncated(beta: f64, mu_eff: f64, lambda: f64, r: f64, n_max: usize) -> f64 {
    SingleSiteOperator::new(mu_eff, lambda, r, n_max).log_trace(beta)
}

/// `ln Tr exp β[(μ_eff − 1)n − λn(n−1) + r(a + a*)]` truncated at `n_max`.
///
/// Fails if raising the cutoff by 8 moves the value by more than `1e−10`
/// relative.
pub fn log_trace(beta: f64, mu_eff: f64, lambda: f64, r: f64, n_max: usize) -> Result<f64> {
    if lambda == 0.0 && mu_eff >= 1.0 {
        return Err(Error::Gapless { mu_eff });
    }
    let v = log_trace_truncated(beta, mu_eff, lambda, r, n_max);
    let w = log_trace_truncated(beta, mu_eff, lambda, r, n_max + CUTOFF_STEP);
    if (v - w).abs() > CUTOFF_REL_TOL * v.abs().max(1.0) {
        return Err(Error::CutoffInsufficient {
            n_max,
            detail: format!("ln Tr moved from {v} to {w} at n_max + {CUTOFF_STEP}"),
        });
    }
    Ok(v)
}

/// `p̃(β, μ, λ; r) = β⁻¹ ln Tr exp(−β[h_n − r(a + a*)])` with automatic cutoff.
pub fn ptilde(beta: f64, mu: f64, lambda: f64, r: f64) -> Result<f64> {
    let n_max = choose_cutoff(beta, mu, lambda, r)?;
    Ok(log_trace_truncated(beta, mu, lambda, r, n_max) / beta)
}

/// `∂_r p̃(β, μ, λ; r)`, i.e. `⟨a + a*⟩` in the single-site Gibbs state.
pub fn source_expectation(beta: f64, mu: f64, lambda: f64, r: f64) -> Result<f64> {
    let n_max = choose_cutoff(beta, mu, lambda, r)?;
    let (_, s) = SingleSiteOperator::new(mu, lambda, r, n_max).log_trace_and_source(beta);
    Ok(s.copysign(r))
}

/// Boltzmann weights `e^{−β(h_n − min h)}` for `n = 0..=n_max` and `min h`.
fn shifted_weights(beta: f64, mu: f64, lambda: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let n_max = choose_cutoff(beta, mu, lambda, 0.0)?;
    let h: Vec<f64> = (0..=n_max).map(|n| h_n(n, mu, lambda)).collect();
    let h_min = h.iter().copied().fold(f64::INFINITY, f64::min);
    let w = h.iter().map(|x| (-beta * (x - h_min)).exp()).collect();
    Ok((h, w))
}

/// `p̃''(β, μ, λ; 0) = (2/Z₀) Σ_n n (e^{−βh_n} − e^{−βh_{n−1}}) / (h_{n−1} − h_n)`.
pub fn ptilde_dd(beta: f64, mu: f64, lambda: f64) -> Result<f64> {
    if lambda == 0.0 {
        if mu >= 1.0 {
            return Err(Error::Gapless { mu_eff: mu });
        }
        return Ok(2.0 / (1.0 - mu));
    }
    let (h, w) = shifted_weights(beta, mu, lambda)?;
    let z: f64 = w.iter().sum();
    let mut acc = 0.0;
    for n in 1..h.len() {
        let d = h[n - 1] - h[n];
        let q = if d.abs() < DEGENERATE_GAP {
            beta * w[n]
        } else if d > 0.0 {
            w[n] * -(-beta * d).exp_m1() / d
        } else {
            w[n - 1] * (beta * d).exp_m1() / d
        };
        acc += n as f64 * q;
    }
    Ok(2.0 * acc / z)
}

/// `ρ = Σ n e^{−βh_n} / Z₀`.
pub fn site_density(beta: f64, mu: f64, lambda: f64) -> Result<f64> {
    if lambda == 0.0 {
        if mu >= 1.0 {
            return Err(Error::Gapless { mu_eff: mu });
        }
        return Ok(1.0 / (beta * (1.0 - mu)).exp_m1());
    }
    let (_, w) = shifted_weights(beta, mu, lambda)?;
    let z: f64 = w.iter().sum();
    let s: f64 = w.iter().enumerate().map(|(n, w)| n as f64 * w).sum();
    Ok(s / z)
}

/// `(ln P, ln N)` with `P = Σ_{n>ρ}(n−ρ)w_n/Z₀` and `N = Σ_{n<ρ}(ρ−n)w_n/Z₀`,
/// so that `site_density − ρ = P − N`. Either may be `−∞`.
pub fn log_density_excess(beta: f64, mu: f64, lambda: f64, rho: f64) -> Result<(f64, f64)> {
    let n_max = choose_cutoff(beta, mu, lambda, 0.0)?;
    let lw: Vec<f64> = (0..=n_max).map(|n| -beta * h_n(n, mu, lambda)).collect();
    let lz = log_sum_exp(&lw);
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    for (n, l) in lw.iter().enumerate() {
        let k = n as f64 - rho;
        if k > 0.0 {
            pos.push(k.ln() + l);
        } else if k < 0.0 {
            neg.push((-k).ln() + l);
        }
    }
    Ok((log_sum_exp(&pos) - lz, log_sum_exp(&neg) - lz))
}

/// `(k, ln C⁺, ln C⁻)` with `k` the most probable occupation,
/// `C⁺ = Σ_{n>k}(n−k)w_n/Z₀` and `C⁻ = Σ_{n<k}(k−n)w_n/Z₀`, so that
/// `site_density = k + C⁺ − C⁻`.
pub fn occupation_split(beta: f64, mu: f64, lambda: f64) -> Result<(usize, f64, f64)> {
    let n_max = choose_cutoff(beta, mu, lambda, 0.0)?;
    let lw: Vec<f64> = (0..=n_max).map(|n| -beta * h_n(n, mu, lambda)).collect();
    let lz = log_sum_exp(&lw);
    let k = (0..=n_max).fold(0, |best, n| if lw[n] > lw[best] { n } else { best });
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    for (n, l) in lw.iter().enumerate() {
        match n.cmp(&k) {
            std::cmp::Ordering::Greater => pos.push(((n - k) as f64).ln() + l),
            std::cmp::Ordering::Less => neg.push(((k - n) as f64).ln() + l),
            std::cmp::Ordering::Equal => {}
        }
    }
    Ok((k, log_sum_exp(&pos) - lz, log_sum_exp(&neg) - lz))
}

/// `(μ_eff − 1)/2 + β⁻¹ ln[2 cosh((β/2)√((μ_eff − 1)² + 4r²))]`.
pub fn hc_pressure_term(beta: f64, mu_eff: f64, r: f64) -> f64 {
    let x = mu_eff - 1.0;
    let s = x.hypot(2.0 * r);
    0.5 * x + log_2cosh(0.5 * beta * s) / beta
}

/// `∂_r` of [`hc_pressure_term`]: `2r tanh(βs/2)/s`, `s = √(x² + 4r²)`.
pub fn hc_source_expectation(beta: f64, mu_eff: f64, r: f64) -> f64 {
    let s = (mu_eff - 1.0).hypot(2.0 * r);
    if s == 0.0 {
        return 0.0;
    }
    if s < HC_TAYLOR {
        return 2.0 * r * 0.5 * beta;
    }
    2.0 * r * (0.5 * beta * s).tanh() / s
}

/// `tanh(βx/2)/x`, continuous at `x = 0`.
pub fn hc_gap_term(beta: f64, x: f64) -> f64 {
    if x.abs() > HC_TAYLOR {
        (0.5 * beta * x).tanh() / x
    } else {
        0.5 * beta - beta.powi(3) * x * x / 24.0
    }
}

/// `1/2 + tanh(βx/2)/2`.
pub fn hc_density_term(beta: f64, x: f64) -> f64 {
    0.5 + 0.5 * (0.5 * beta * x).tanh()
}

/// Hard-core `(ln P, ln N)` in the sense of [`log_density_excess`].
pub fn hc_log_density_excess(beta: f64, x: f64, rho: f64) -> (f64, f64) {
    let u = beta * x;
    let sp = softplus(u);
    ((1.0 - rho).ln() + u - sp, rho.ln() - sp)
}

/// Hard-core [`occupation_split`] at `x = μ_eff − 1`.
pub fn hc_occupation_split(beta: f64, x: f64) -> (usize, f64, f64) {
    let u = beta * x;
    if u > 0.0 {
        (1, f64::NEG_INFINITY, -softplus(u))
    } else {
        (0, u - softplus(u), f64::NEG_INFINITY)
    }
}

/// `ln(1 + e^u)`.
pub(crate) fn softplus(u: f64) -> f64 {
    if u > 0.0 {
        u + (-u).exp().ln_1p()
    } else {
        u.exp().ln_1p()
    }
}

/// `ln(2 cosh u)`.
pub(crate) fn log_2cosh(u: f64) -> f64 {
    let a = u.abs();
    a + (-2.0 * a).exp().ln_1p()
}
