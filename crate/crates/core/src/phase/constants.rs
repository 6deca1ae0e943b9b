//! Closed-form critical values for Bernoulli, trinomial and uniform disorder.
//!
//! Bernoulli laws put mass `p` on `ε` and `1 − p` on `0`. The finite-λ
//! values are low-temperature asymptotics.

use serde::Serialize;

use crate::error::{domain, Result};

/// Critical disorder strength for hard-core bosons under symmetric Bernoulli disorder.
pub fn bernoulli_hc_eps_cr() -> f64 {
    2.0
}

/// `2 / (1 − (1 − p)/λ)`.
pub fn eps_cr_bernoulli(lambda: f64, p: f64) -> Result<f64> {
    let den = 1.0 - (1.0 - p) / lambda;
    if !(lambda > 0.0) || den <= 0.0 {
        return domain(format!("eps_cr_bernoulli needs lambda > 1 - p, got lambda = {lambda}, p = {p}"));
    }
    Ok(2.0 / den)
}

/// `λ_{c,1}(ε) = (3 + √(9 + 2ε(1 − 2p + ε/2)))/2`.
pub fn lambda_c1(eps: f64, p: f64) -> f64 {
    0.5 * (3.0 + (9.0 + 2.0 * eps * (1.0 - 2.0 * p + 0.5 * eps)).sqrt())
}

/// `λ_{c,k}(0) = 2k + 1`.
pub fn lambda_ck_nonrandom(k: u32) -> f64 {
    2.0 * k as f64 + 1.0
}

/// `λ_{c,1−p}(ε) = ε/4 + ε(1 − p)/(ε − 2)`, for `ε > 2`.
pub fn lambda_c_1mp(eps: f64, p: f64) -> Result<f64> {
    if eps <= 2.0 {
        return domain(format!("lambda_c_1mp requires eps > 2, got {eps}"));
    }
    Ok(0.25 * eps + eps * (1.0 - p) / (eps - 2.0))
}

/// Roots `ε_±` of `ε²/2 − (2λ − 1 + 2p)ε + 8λ = 0`.
pub fn eps_cr2_pm(lambda: f64, p: f64) -> Result<(f64, f64)> {
    let b = 2.0 * lambda - 1.0 + 2.0 * p;
    let disc = b * b - 16.0 * lambda;
    if disc < 0.0 {
        return domain(format!("no real eps_cr2 for lambda = {lambda}, p = {p}"));
    }
    let s = disc.sqrt();
    Ok((b - s, b + s))
}

/// `λ_{c,2−p}(ε) = 2(2p − 1)/(ε − 4)`, for `ε > 4`, `p > 1/2`.
pub fn lambda_c_2mp(eps: f64, p: f64) -> Result<f64> {
    if eps <= 4.0 || p <= 0.5 {
        return domain(format!("lambda_c_2mp requires eps > 4 and p > 1/2, got eps = {eps}, p = {p}"));
    }
    Ok(2.0 * (2.0 * p - 1.0) / (eps - 4.0))
}

/// Critical width of the equal-weight trinomial law for hard-core bosons.
pub fn trinomial_hc_eps_cr() -> f64 {
    28.0 / 9.0
}

/// `ε_cr(λ) = 2λ√((λ − 3)/(λ − 1))`, for `λ ≥ 3`.
pub fn trinomial_eps_cr(lambda: f64) -> Result<f64> {
    if lambda < 3.0 {
        return domain(format!("trinomial_eps_cr requires lambda >= 3, got {lambda}"));
    }
    Ok(2.0 * lambda * ((lambda - 3.0) / (lambda - 1.0)).sqrt())
}

/// `(ε/2)(e^{ε/(2k+1)} + 1)/(e^{ε/(2k+1)} − 1)`; tends to `2k + 1` as `ε → 0`.
pub fn uniform_lambda_ck(eps: f64, k: u32) -> f64 {
    let m = 2.0 * k as f64 + 1.0;
    if eps == 0.0 {
        return m;
    }
    let t = eps / m;
    // (e^t + 1)/(e^t − 1) = coth(t/2)
    0.5 * eps / (0.5 * t).tanh()
}

/// `(e^ε − 1 − ε)/(e^ε − 1)`.
pub fn small_lambda_mu(eps: f64) -> f64 {
    if eps == 0.0 {
        return 0.0;
    }
    let em1 = eps.exp_m1();
    (em1 - eps) / em1
}

/// `M_p(μ, ε) = p/|μ − ε − 1| + (1 − p)/|μ − 1|`.
pub fn m_p(mu: f64, eps: f64, p: f64) -> f64 {
    p / (mu - eps - 1.0).abs() + (1.0 - p) / (mu - 1.0).abs()
}

/// `ε_p = 1 + 2√(p(1 − p))`.
pub fn eps_p(p: f64) -> f64 {
    1.0 + 2.0 * (p * (1.0 - p)).sqrt()
}

/// `μ∓ = (ε + 3)/2 − p ∓ √(((ε − 1)/2)² − p(1 − p))`, the two solutions of
/// `M_p(μ, ε) = 1` inside `(1, 1 + ε)`, defined for `ε > ε_p`.
pub fn mu_pm(eps: f64, p: f64) -> Result<(f64, f64)> {
    if eps <= eps_p(p) {
        return domain(format!("mu_pm requires eps > eps_p = {}, got {eps}", eps_p(p)));
    }
    let c = 0.5 * (eps + 3.0) - p;
    let s = (0.25 * (eps - 1.0).powi(2) - p * (1.0 - p)).sqrt();
    Ok((c - s, c + s))
}

/// The open interval `(μ−, μ+)` where `M_p < 1`.
pub fn gap_interval(eps: f64, p: f64) -> Result<(f64, f64)> {
    mu_pm(eps, p)
}

/// One named constant for reporting.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstantEntry {
    pub name: String,
    pub value: Option<f64>,
    pub note: String,
}

impl ConstantEntry {
    fn from_result(name: &str, r: Result<f64>) -> Self {
        match r {
            Ok(v) => Self {
                name: name.into(),
                value: Some(v),
                note: String::new(),
            },
            Err(e) => Self {
                name: name.into(),
                value: None,
                note: e.to_string(),
            },
        }
    }
}

/// Every closed-form value at the given `(λ, p, ε, k)`.
pub fn table(lambda: f64, p: f64, eps: f64, k: u32) -> Vec<ConstantEntry> {
    let e = ConstantEntry::from_result;
    let mut t = vec![
        e("bernoulli_hc_eps_cr", Ok(bernoulli_hc_eps_cr())),
        e("eps_cr_bernoulli", eps_cr_bernoulli(lambda, p)),
        e("lambda_c1", Ok(lambda_c1(eps, p))),
        e("lambda_ck_nonrandom", Ok(lambda_ck_nonrandom(k))),
        e("lambda_c_1mp", lambda_c_1mp(eps, p)),
    ];
    match eps_cr2_pm(lambda, p) {
        Ok((lo, hi)) => {
            t.push(e("eps_cr2_minus", Ok(lo)));
            t.push(e("eps_cr2_plus", Ok(hi)));
        }
        Err(err) => {
            t.push(e("eps_cr2_minus", Err(err.clone())));
            t.push(e("eps_cr2_plus", Err(err)));
        }
    }
    t.extend([
        e("lambda_c_2mp", lambda_c_2mp(eps, p)),
        e("trinomial_hc_eps_cr", Ok(trinomial_hc_eps_cr())),
        e("trinomial_eps_cr", trinomial_eps_cr(lambda)),
        e("uniform_lambda_ck", Ok(uniform_lambda_ck(eps, k))),
        e("small_lambda_mu", Ok(small_lambda_mu(eps))),
        e("eps_p", Ok(eps_p(p))),
    ]);
    match mu_pm(eps, p) {
        Ok((lo, hi)) => {
            t.push(e("mu_minus", Ok(lo)));
            t.push(e("mu_plus", Ok(hi)));
            t.push(e("m_p_at_gap_center", Ok(m_p(0.5 * (lo + hi), eps, p))));
        }
        Err(err) => {
            t.push(e("mu_minus", Err(err.clone())));
            t.push(e("mu_plus", Err(err)));
        }
    }
    t
}
