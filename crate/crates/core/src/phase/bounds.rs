//! Analytic upper bounds on the hard-core critical inverse temperature for
//! Bernoulli disorder near the suppressed density `ρ = 1 − p` (`p ≤ 1/2`).

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    /// `ρ = 1 − p + δ/2`: `ln(2p/δ)/(p − δ − 2e^{−ε})`.
    AboveSuppressed,
    /// `ρ = 1 − p − δ/2`, `μ ≥ 1 + ε/2`: `(2/ε) ln(2(1 − p)/δ)`.
    BelowSuppressedUpperMu,
    /// `ρ = 1 − p − δ/2`, `1 < μ < 1 + ε/2`: `ln(2(1 − p)/δ)/(1 − p − δ − 2pe^{−ε})`.
    BelowSuppressedLowerMu,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum UpperBound {
    Bound { value: f64, which: BoundKind },
    NotApplicable { reason: String },
}

impl UpperBound {
    pub fn value(&self) -> Option<f64> {
        match self {
            UpperBound::Bound { value, .. } => Some(*value),
            UpperBound::NotApplicable { .. } => None,
        }
    }

    fn na(reason: impl Into<String>) -> Self {
        UpperBound::NotApplicable { reason: reason.into() }
    }
}

/// Upper bound on `β_c(ρ)` for hard-core bosons with mass `p` on `ε`.
///
/// Below `1 − p` the bound depends on the critical chemical potential;
/// with `mu_c = None` the weaker of the two branches is returned.
pub fn bernoulli_betac_upper_bound(rho: f64, p: f64, eps: f64, mu_c: Option<f64>) -> UpperBound {
    if !(p > 0.0 && p <= 0.5) {
        return UpperBound::na(format!("requires 0 < p <= 1/2, got {p}"));
    }
    if !(rho > 0.0 && rho < 1.0) {
        return UpperBound::na(format!("requires 0 < rho < 1, got {rho}"));
    }
    let delta = 2.0 * (rho - (1.0 - p)).abs();
    if delta == 0.0 {
        return UpperBound::na("rho = 1 - p is suppressed");
    }
    if rho > 1.0 - p {
        if !(delta < 0.5 * p) {
            return UpperBound::na(format!("requires delta < p/2, got delta = {delta}"));
        }
        if !(eps > (4.0 / p).ln()) {
            return UpperBound::na(format!("requires eps > ln(4/p) = {}", (4.0 / p).ln()));
        }
        let value = (2.0 * p / delta).ln() / (p - delta - 2.0 * (-eps).exp());
        return UpperBound::Bound {
            value,
            which: BoundKind::AboveSuppressed,
        };
    }

    if !(delta < 1.0 - p) {
        return UpperBound::na(format!("requires delta < 1 - p, got delta = {delta}"));
    }
    if !(eps > 0.5 * ((2.0 - 3.0 * p - delta) / (p + delta)).ln()) {
        return UpperBound::na("eps too small to confine mu below 1 + eps");
    }
    let mu_above_one = delta < 1.0 - 2.0 * p
        || eps > 0.5 * ((3.0 * p - 1.0 + delta) / (1.0 - p - delta)).ln();
    if !mu_above_one {
        return UpperBound::na("eps too small to confine mu above 1");
    }
    let log_term = (2.0 * (1.0 - p) / delta).ln();
    let upper_mu = UpperBound::Bound {
        value: 2.0 / eps * log_term,
        which: BoundKind::BelowSuppressedUpperMu,
    };
    let den = 1.0 - p - delta - 2.0 * p * (-eps).exp();
    let lower_mu = if den > 0.0 {
        UpperBound::Bound {
            value: log_term / den,
            which: BoundKind::BelowSuppressedLowerMu,
        }
    } else {
        UpperBound::na("1 - p - delta - 2p e^-eps <= 0")
    };
    match mu_c {
        Some(mu) if mu >= 1.0 + 0.5 * eps => upper_mu,
        Some(_) => lower_mu,
        None => match (upper_mu.value(), lower_mu.value()) {
            (Some(a), Some(b)) if b > a => lower_mu,
            _ => upper_mu,
        },
    }
}
