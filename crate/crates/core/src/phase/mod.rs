//! Critical-temperature curves `β_c(ρ)`.
//!
//! At fixed density the chemical potential `μ(β, ρ)` is fixed by the
//! density equation, and `β_c` is the first root of
//! `G(β) = E[p̃''(β, μ(β, ρ) − ε, λ; 0)] − 2`.

pub mod bounds;
pub mod constants;

use serde::{Deserialize, Serialize};

use crate::disorder::{log_sum_exp, DisorderSpec};
use crate::error::{domain, Error, Result};
use crate::optimize::{bisect, logspace};
use crate::pressure::perfect_density;
use crate::quadrature::QuadratureConfig;
use crate::singlesite::{
    hc_density_term, hc_gap_term, hc_log_density_excess, hc_occupation_split, log_density_excess,
    occupation_split, ptilde_dd, Interaction,
};

/// `|E[k] − ρ|` below this (relative) counts as an exact plateau.
const MODE_SNAP: f64 = 4.0 * f64::EPSILON;

pub use bounds::{bernoulli_betac_upper_bound, BoundKind, UpperBound};

/// Solver controls for the critical-point search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CriticalConfig {
    pub beta_lo: f64,
    pub beta_max: f64,
    /// Log-spaced β samples used to bracket sign changes of `G`.
    pub scan_points: usize,
    /// Absolute bisection tolerance in β.
    pub beta_tol: f64,
    /// `G` counts as positive only above this floor.
    pub gap_floor: f64,
    pub quadrature: QuadratureConfig,
}

impl Default for CriticalConfig {
    fn default() -> Self {
        Self {
            beta_lo: 1e-3,
            beta_max: 500.0,
            scan_points: 64,
            beta_tol: 1e-9,
            gap_floor: 1e-12,
            quadrature: QuadratureConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Status {
    Converged,
    /// No sign change of `G` up to `beta_max`.
    Divergent { beta_max: f64 },
    /// `G > 0` already at the lower end of the bracket.
    BelowBracket,
    /// A solver error at this density; the sweep continues.
    Failed { message: String },
}

impl Status {
    pub fn label(&self) -> &'static str {
        match self {
            Status::Converged => "converged",
            Status::Divergent { .. } => "divergent",
            Status::BelowBracket => "below_bracket",
            Status::Failed { .. } => "failed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriticalPoint {
    pub rho: f64,
    pub beta_c: Option<f64>,
    pub mu_c: Option<f64>,
    pub status: Status,
    /// Sign changes of `G` seen on the β scan.
    pub n_roots: usize,
}

impl CriticalPoint {
    pub fn is_converged(&self) -> bool {
        self.status == Status::Converged
    }

    pub fn is_divergent(&self) -> bool {
        matches!(self.status, Status::Divergent { .. })
    }

    fn failed(rho: f64, err: &Error) -> Self {
        Self {
            rho,
            beta_c: None,
            mu_c: None,
            status: Status::Failed {
                message: err.to_string(),
            },
            n_roots: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriticalCurve {
    pub interaction: Interaction,
    pub spec: DisorderSpec,
    pub config: CriticalConfig,
    pub points: Vec<CriticalPoint>,
}

impl CriticalCurve {
    /// `rho,beta_c,mu_c,status,n_roots`; divergent `β_c` is written `inf`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("rho,beta_c,mu_c,status,n_roots\n");
        for p in &self.points {
            let beta = match (&p.status, p.beta_c) {
                (Status::Divergent { .. }, _) => "inf".to_string(),
                (_, Some(b)) => format!("{b}"),
                (_, None) => "nan".to_string(),
            };
            let mu = p.mu_c.map_or_else(|| "nan".to_string(), |m| format!("{m}"));
            out.push_str(&format!("{},{beta},{mu},{},{}\n", p.rho, p.status.label(), p.n_roots));
        }
        out
    }
}

/// `E[p̃''(β, μ − ε, λ; 0)] − 2`.
pub fn gap_function(
    beta: f64,
    mu: f64,
    interaction: Interaction,
    spec: &DisorderSpec,
    quad: &QuadratureConfig,
) -> Result<f64> {
    let avg = match interaction {
        Interaction::Finite(lambda) => spec.try_expect(|e| ptilde_dd(beta, mu - e, lambda), quad)?,
        Interaction::HardCore => spec.expect(|e| 2.0 * hc_gap_term(beta, mu - e - 1.0), quad)?,
        Interaction::Perfect => {
            if mu >= 1.0 {
                return Err(Error::Gapless { mu_eff: mu });
            }
            spec.expect(|e| 2.0 / (1.0 + e - mu), quad)?
        }
    };
    Ok(avg - 2.0)
}

/// Disorder-averaged density at `(β, μ)`.
pub fn mean_density(
    beta: f64,
    mu: f64,
    interaction: Interaction,
    spec: &DisorderSpec,
    quad: &QuadratureConfig,
) -> Result<f64> {
    match interaction {
        Interaction::Finite(lambda) => {
            spec.try_expect(|e| crate::singlesite::site_density(beta, mu - e, lambda), quad)
        }
        Interaction::HardCore => spec.expect(|e| hc_density_term(beta, mu - e - 1.0), quad),
        Interaction::Perfect => perfect_density(spec, beta, mu, quad),
    }
}

fn check_rho(rho: f64, interaction: Interaction) -> Result<()> {
    if !(rho > 0.0 && rho.is_finite()) {
        return domain(format!("density must be finite and > 0, got {rho}"));
    }
    if interaction == Interaction::HardCore && rho >= 1.0 {
        return domain(format!("hard-core density must lie in (0, 1), got {rho}"));
    }
    Ok(())
}

/// A number with the sign of `E[ρ_site(μ − ε)] − ρ`.
///
/// Discrete laws split each site density into its most probable occupation
/// `k` plus thermal corrections, so the sign stays exact on low-temperature
/// plateaus where `E[k] = ρ` and the difference underflows. Continuous laws
/// compare `ln E[P]` with `ln E[N]`.
fn density_sign(
    beta: f64,
    mu: f64,
    rho: f64,
    interaction: Interaction,
    spec: &DisorderSpec,
    quad: &QuadratureConfig,
) -> Result<f64> {
    let split = |e: f64| -> Result<(usize, f64, f64)> {
        match interaction {
            Interaction::Finite(lambda) => occupation_split(beta, mu - e, lambda),
            Interaction::HardCore => Ok(hc_occupation_split(beta, mu - e - 1.0)),
            Interaction::Perfect => unreachable!("perfect bosons are solved directly"),
        }
    };
    let log_diff = |lp: f64, ln: f64| match (lp == f64::NEG_INFINITY, ln == f64::NEG_INFINITY) {
        (true, true) => 0.0,
        _ => lp - ln,
    };
    match spec {
        DisorderSpec::Discrete { atoms } => {
            let mut mode = -rho;
            let mut pos = Vec::with_capacity(atoms.len());
            let mut neg = Vec::with_capacity(atoms.len());
            for a in atoms {
                let (k, lp, ln) = split(a.value)?;
                mode += a.weight * k as f64;
                pos.push(a.weight.ln() + lp);
                neg.push(a.weight.ln() + ln);
            }
            let (lp, ln) = (log_sum_exp(&pos), log_sum_exp(&neg));
            if mode.abs() <= MODE_SNAP * rho.max(1.0) {
                Ok(log_diff(lp, ln))
            } else {
                Ok(mode + lp.exp() - ln.exp())
            }
        }
        DisorderSpec::Uniform { .. } => {
            let (lp, ln) = match interaction {
                Interaction::Finite(lambda) => (
                    spec.try_expect_log(|e| Ok(log_density_excess(beta, mu - e, lambda, rho)?.0), quad)?,
                    spec.try_expect_log(|e| Ok(log_density_excess(beta, mu - e, lambda, rho)?.1), quad)?,
                ),
                _ => (
                    spec.try_expect_log(|e| Ok(hc_log_density_excess(beta, mu - e - 1.0, rho).0), quad)?,
                    spec.try_expect_log(|e| Ok(hc_log_density_excess(beta, mu - e - 1.0, rho).1), quad)?,
                ),
            };
            Ok(log_diff(lp, ln))
        }
    }
}

/// Closed form for hard-core bosons with `ε` uniform on `[0, w]`:
/// `μ = 1 + w/2 + β⁻¹ ln[sinh(βρw/2)/sinh(β(1 − ρ)w/2)]`.
pub fn hc_uniform_mu(beta: f64, rho: f64, width: f64) -> f64 {
    let ln_sinh = |x: f64| x + (-(-2.0 * x).exp()).ln_1p() - std::f64::consts::LN_2;
    let a = 0.5 * beta * rho * width;
    let b = 0.5 * beta * (1.0 - rho) * width;
    1.0 + 0.5 * width + (ln_sinh(a) - ln_sinh(b)) / beta
}

/// The chemical potential at which the averaged density equals `rho`.
pub fn solve_mu(
    beta: f64,
    rho: f64,
    interaction: Interaction,
    spec: &DisorderSpec,
    quad: &QuadratureConfig,
) -> Result<f64> {
    check_rho(rho, interaction)?;
    match (interaction, spec) {
        (Interaction::HardCore, DisorderSpec::Uniform { width }) => Ok(hc_uniform_mu(beta, rho, *width)),
        (Interaction::Perfect, _) => solve_mu_perfect(beta, rho, spec, quad),
        _ => solve_mu_bisection(beta, rho, interaction, spec, quad),
    }
}

/// [`solve_mu`] by bracketing and bisection only, for every law.
pub fn solve_mu_bisection(
    beta: f64,
    rho: f64,
    interaction: Interaction,
    spec: &DisorderSpec,
    quad: &QuadratureConfig,
) -> Result<f64> {
    check_rho(rho, interaction)?;
    let lambda = match interaction {
        Interaction::Finite(l) => l,
        Interaction::HardCore => 0.0,
        Interaction::Perfect => return solve_mu_perfect(beta, rho, spec, quad),
    };
    let s = |mu: f64| density_sign(beta, mu, rho, interaction, spec, quad);
    let mut lo = -10.0;
    let mut s_lo = s(lo)?;
    let hi;
    if s_lo > 0.0 {
        let mut step = 10.0;
        let mut top = lo;
        loop {
            lo = top - step;
            s_lo = s(lo)?;
            if s_lo <= 0.0 {
                hi = top;
                break;
            }
            top = lo;
            step *= 2.0;
            if step > 1e12 {
                return Err(Error::Bracket(format!("no lower density bracket for rho = {rho}")));
            }
        }
    } else {
        // below the gapless edge `1 + ε_min` probes halve their distance to
        // it; past the edge the mode grows like (μ − 1)/2λ, so the reach
        // starts at the λ scale, keeping the cutoff finite for tiny λ
        let edge = match interaction {
            Interaction::Finite(_) => 1.0 + spec.min_value(),
            _ => f64::INFINITY,
        };
        let near = lambda.max(1e-9);
        let mut step = 1.0;
        let mut reach = 2.0 * lambda * (rho.ceil() + 1.0) + near;
        loop {
            let top = if lo + step < edge {
                step *= 2.0;
                lo + step / 2.0
            } else if edge - lo > near {
                0.5 * (lo + edge)
            } else {
                reach *= 2.0;
                edge + reach / 2.0
            };
            let s_top = s(top)?;
            if s_top >= 0.0 {
                if s_top == 0.0 {
                    return Ok(top);
                }
                hi = top;
                break;
            }
            lo = top;
            s_lo = s_top;
            if reach > 1e12 || step > 1e12 {
                return Err(Error::Bracket(format!("no upper density bracket for rho = {rho}")));
            }
        }
    }
    if s_lo == 0.0 {
        return Ok(lo);
    }
    let tol = 1e-13 * lo.abs().max(hi.abs()).max(1.0);
    bisect(s, lo, hi, s_lo, tol)
}

fn solve_mu_perfect(beta: f64, rho: f64, spec: &DisorderSpec, quad: &QuadratureConfig) -> Result<f64> {
    let rho_c = perfect_density(spec, beta, 0.0, quad)?;
    if rho > rho_c {
        return domain(format!(
            "perfect-boson density {rho} exceeds the critical density {rho_c} at beta = {beta}"
        ));
    }
    let f = |mu: f64| Ok(perfect_density(spec, beta, mu, quad)? - rho);
    let mut lo = -1.0;
    while f(lo)? > 0.0 {
        lo *= 2.0;
    }
    bisect(f, lo, 0.0, f(lo)?, 1e-14)
}

/// Root of `ρ = E[1/(e^{β(1 + ε)} − 1)]`.
pub fn perfect_critical_beta(rho: f64, spec: &DisorderSpec, quad: &QuadratureConfig) -> Result<f64> {
    check_rho(rho, Interaction::Perfect)?;
    let f = |b: f64| Ok(perfect_density(spec, b, 0.0, quad)? - rho);
    let (mut lo, mut hi) = (1.0, 1.0);
    while f(lo)? < 0.0 {
        lo *= 0.5;
    }
    while f(hi)? > 0.0 {
        hi *= 2.0;
    }
    let f_lo = f(lo)?;
    if f_lo == 0.0 {
        return Ok(lo);
    }
    bisect(f, lo, hi, f_lo, 1e-15 * hi)
}

/// `β_c(ρ)`: the smallest root of `G(β)` on `[beta_lo, beta_max]`.
pub fn critical_beta(
    rho: f64,
    interaction: Interaction,
    spec: &DisorderSpec,
    cfg: &CriticalConfig,
) -> Result<CriticalPoint> {
    let quad = &cfg.quadrature;
    if interaction == Interaction::Perfect {
        let beta_c = perfect_critical_beta(rho, spec, quad)?;
        return Ok(CriticalPoint {
            rho,
            beta_c: Some(beta_c),
            mu_c: Some(0.0),
            status: Status::Converged,
            n_roots: 1,
        });
    }
    check_rho(rho, interaction)?;
    let g = |beta: f64| -> Result<f64> {
        let mu = solve_mu(beta, rho, interaction, spec, quad)?;
        gap_function(beta, mu, interaction, spec, quad)
    };
    let positive = |v: f64| v > cfg.gap_floor;
    let betas = logspace(cfg.beta_lo, cfg.beta_max, cfg.scan_points.max(2));
    let mut signs = Vec::with_capacity(betas.len());
    for &b in &betas {
        signs.push(positive(g(b)?));
    }
    let n_roots = signs.windows(2).filter(|w| w[0] != w[1]).count();
    if signs[0] {
        return Ok(CriticalPoint {
            rho,
            beta_c: None,
            mu_c: None,
            status: Status::BelowBracket,
            n_roots,
        });
    }
    let Some(i) = signs.windows(2).position(|w| !w[0] && w[1]) else {
        return Ok(CriticalPoint {
            rho,
            beta_c: None,
            mu_c: None,
            status: Status::Divergent {
                beta_max: cfg.beta_max,
            },
            n_roots,
        });
    };
    let shifted = |b: f64| Ok(g(b)? - cfg.gap_floor);
    let f_lo = shifted(betas[i])?;
    let beta_c = bisect(shifted, betas[i], betas[i + 1], f_lo, cfg.beta_tol)?;
    let mu_c = solve_mu(beta_c, rho, interaction, spec, quad)?;
    Ok(CriticalPoint {
        rho,
        beta_c: Some(beta_c),
        mu_c: Some(mu_c),
        status: Status::Converged,
        n_roots,
    })
}

/// [`critical_beta`] with solver errors recorded in the point.
pub fn critical_point(rho: f64, interaction: Interaction, spec: &DisorderSpec, cfg: &CriticalConfig) -> CriticalPoint {
    critical_beta(rho, interaction, spec, cfg).unwrap_or_else(|e| CriticalPoint::failed(rho, &e))
}

/// Strictly increasing density grid from `rho_min` to `rho_max`.
///
/// Values are rounded to 12 decimals so that grids built from different
/// step arithmetic coincide.
pub fn rho_grid(rho_min: f64, rho_max: f64, points: usize) -> Result<Vec<f64>> {
    if points == 0 {
        return domain("density grid must have at least one point");
    }
    if !(rho_min > 0.0 && rho_max >= rho_min && rho_max.is_finite()) {
        return domain(format!("invalid density range [{rho_min}, {rho_max}]"));
    }
    if points == 1 {
        return Ok(vec![rho_min]);
    }
    if rho_max == rho_min {
        return domain("density range is empty but more than one point was requested");
    }
    let round = |x: f64| (x * 1e12).round() / 1e12;
    Ok((0..points)
        .map(|i| round(rho_min + (rho_max - rho_min) * i as f64 / (points - 1) as f64))
        .collect())
}

/// `β_c` at every density of the grid, in order.
pub fn curve_sweep(
    rho_grid: &[f64],
    interaction: Interaction,
    spec: &DisorderSpec,
    cfg: &CriticalConfig,
) -> Result<CriticalCurve> {
    if rho_grid.windows(2).any(|w| w[1] <= w[0]) {
        return domain("density grid must be strictly increasing");
    }
    let points = rho_grid
        .iter()
        .map(|&rho| critical_point(rho, interaction, spec, cfg))
        .collect();
    Ok(CriticalCurve {
        interaction,
        spec: spec.clone(),
        config: *cfg,
        points,
    })
}
