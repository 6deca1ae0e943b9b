//! Variational pressure `p(β, μ) = sup_{r≥0} g(r)` with
//! `g(r) = −r² + β⁻¹ E[ln Tr exp β((μ − ε − 1)n − λn(n−1) + r(a + a*))]`,
//! the order parameter `r*`, and the perfect-boson closed forms.
//!
//! `g'(r) = 2(f(r) − r)` where `f(r) = E[⟨a + a*⟩_r]/2`, so maximizers are
//! fixed points of `f`.

use serde::Serialize;

use crate::disorder::DisorderSpec;
use crate::error::{domain, Error, Result};
use crate::optimize::{bisect, golden_max, linspace};
use crate::quadrature::QuadratureConfig;
use crate::singlesite::{
    hc_pressure_term, hc_source_expectation, ptilde, source_expectation, Interaction, ModelParams,
};

/// Below this the order parameter is treated as zero.
pub const R_TOL: f64 = 1e-8;
const SCAN_POINTS: usize = 64;
const FIXED_POINT_GRID: usize = 256;
const R_START: f64 = 4.0;
const R_CAP: f64 = 1024.0;
const GOLDEN_TOL: f64 = 1e-10;
const SUSPECT_GAP: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OrderParameterResult {
    pub r_star: f64,
    pub pressure: f64,
    pub bec: bool,
    /// `|r* − f(r*)|`.
    pub f_residual: f64,
}

impl OrderParameterResult {
    /// `r*²`, read as the condensate density (interpretation).
    pub fn condensate_density(&self) -> f64 {
        self.r_star * self.r_star
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SelfConsistencyResult {
    /// Largest fixed point of `r = f(r)`.
    pub r_star: f64,
    /// Maximizer returned by [`variational_pressure`].
    pub r_variational: f64,
    /// Number of `+ → −` sign changes of `f(r) − r` on the grid.
    pub fixed_points: usize,
    /// The two methods disagree by more than `1e−4`.
    pub nonconcave_suspect: bool,
}

fn check_perfect(mu: f64) -> Result<()> {
    if mu > 0.0 {
        return domain(format!("perfect bosons require mu <= 0, got {mu}"));
    }
    Ok(())
}

/// `g(r)`.
pub fn objective(r: f64, params: &ModelParams, spec: &DisorderSpec, quad: &QuadratureConfig) -> Result<f64> {
    let ModelParams { beta, mu, interaction } = *params;
    let avg = match interaction {
        Interaction::Finite(lambda) => spec.try_expect(|e| ptilde(beta, mu - e, lambda, r), quad)?,
        Interaction::HardCore => spec.expect(|e| hc_pressure_term(beta, mu - e, r), quad)?,
        Interaction::Perfect => {
            check_perfect(mu)?;
            spec.expect(
                |e| -(-(beta * (mu - e - 1.0)).exp_m1()).ln() / beta + r * r / (1.0 + e - mu),
                quad,
            )?
        }
    };
    Ok(avg - r * r)
}

/// `f(r) = E[⟨a + a*⟩_r] / 2`.
pub fn selfconsistency_f(r: f64, params: &ModelParams, spec: &DisorderSpec, quad: &QuadratureConfig) -> Result<f64> {
    if r == 0.0 {
        return Ok(0.0);
    }
    let ModelParams { beta, mu, interaction } = *params;
    let avg = match interaction {
        Interaction::Finite(lambda) => spec.try_expect(|e| source_expectation(beta, mu - e, lambda, r), quad)?,
        Interaction::HardCore => spec.expect(|e| hc_source_expectation(beta, mu - e, r), quad)?,
        Interaction::Perfect => {
            check_perfect(mu)?;
            spec.expect(|e| 2.0 * r / (1.0 + e - mu), quad)?
        }
    };
    Ok(0.5 * avg)
}

/// Smallest `R = 4·2^k ≤ 1024` with `g(R) < g(0)`.
fn search_radius(params: &ModelParams, spec: &DisorderSpec, quad: &QuadratureConfig, g0: f64) -> Result<f64> {
    let mut r = R_START;
    loop {
        if objective(r, params, spec, quad)? < g0 {
            return Ok(r);
        }
        r *= 2.0;
        if r > R_CAP {
            return Err(Error::Bracket(format!(
                "objective does not decrease below its r = 0 value for r <= {R_CAP}"
            )));
        }
    }
}

/// `p(β, μ)` and the maximizing `r*`.
pub fn variational_pressure(
    params: &ModelParams,
    spec: &DisorderSpec,
    quad: &QuadratureConfig,
) -> Result<OrderParameterResult> {
    let g0 = objective(0.0, params, spec, quad)?;
    if params.interaction == Interaction::Perfect {
        // E[1/(1 + ε − μ)] ≤ 1 for μ ≤ 0, so g is nonincreasing
        return Ok(OrderParameterResult {
            r_star: 0.0,
            pressure: g0,
            bec: false,
            f_residual: 0.0,
        });
    }
    let r_max = search_radius(params, spec, quad, g0)?;
    let grid = linspace(0.0, r_max, SCAN_POINTS);
    let mut best = (0, g0);
    for (i, &r) in grid.iter().enumerate().skip(1) {
        let g = objective(r, params, spec, quad)?;
        if g > best.1 {
            best = (i, g);
        }
    }
    let lo = grid[best.0.saturating_sub(1)];
    let hi = grid[(best.0 + 1).min(SCAN_POINTS - 1)];
    let (mut r_star, _) = golden_max(|r| objective(r, params, spec, quad), lo, hi, GOLDEN_TOL)?;
    if r_star > R_TOL {
        r_star = match polish(r_star, params, spec, quad)? {
            Some(r) => r,
            None => descend(r_star, params, spec, quad)?,
        };
    }
    let mut pressure = objective(r_star, params, spec, quad)?;
    if r_star <= R_TOL || pressure <= g0 {
        r_star = 0.0;
        pressure = g0;
    }
    let f_residual = (r_star - selfconsistency_f(r_star, params, spec, quad)?).abs();
    Ok(OrderParameterResult {
        r_star,
        pressure,
        bec: r_star > R_TOL,
        f_residual,
    })
}

/// Refine a golden-section maximizer on the zero of `f(r) − r`, which is
/// resolved far below the `√ε_mach` limit of comparing objective values.
/// `None` if no `+ → −` crossing lies near `r`.
fn polish(r: f64, params: &ModelParams, spec: &DisorderSpec, quad: &QuadratureConfig) -> Result<Option<f64>> {
    let phi = |x: f64| Ok(selfconsistency_f(x, params, spec, quad)? - x);
    let mut delta = 1e-7 * r.max(1.0);
    for _ in 0..6 {
        let (a, b) = ((r - delta).max(0.5 * r), r + delta);
        let (fa, fb) = (phi(a)?, phi(b)?);
        if fa > 0.0 && fb <= 0.0 {
            return bisect(phi, a, b, fa, 1e-14 * r.max(1.0)).map(Some);
        }
        delta *= 10.0;
    }
    Ok(None)
}

/// A maximizer candidate that [`polish`] could not confirm. If `g` is
/// decreasing there, the nearest crossing below it is sought on a geometric
/// grid; with none down to `1e−6·r` the objective falls from `r = 0` and the
/// candidate is round-off in `g`.
fn descend(r: f64, params: &ModelParams, spec: &DisorderSpec, quad: &QuadratureConfig) -> Result<f64> {
    let phi = |x: f64| Ok(selfconsistency_f(x, params, spec, quad)? - x);
    let f_r = phi(r)?;
    if f_r > 0.0 {
        return Ok(r);
    }
    let mut hi = r;
    for _ in 0..6 {
        let lo = 0.1 * hi;
        let f_lo = phi(lo)?;
        if f_lo > 0.0 {
            return bisect(phi, lo, hi, f_lo, 1e-14 * r.max(1.0));
        }
        hi = lo;
    }
    Ok(0.0)
}

/// Largest fixed point of `f`, cross-checked against the variational maximizer.
pub fn solve_selfconsistency(
    params: &ModelParams,
    spec: &DisorderSpec,
    quad: &QuadratureConfig,
) -> Result<SelfConsistencyResult> {
    let variational = variational_pressure(params, spec, quad)?;
    if params.interaction == Interaction::Perfect {
        return Ok(SelfConsistencyResult {
            r_star: 0.0,
            r_variational: 0.0,
            fixed_points: 0,
            nonconcave_suspect: false,
        });
    }
    let g0 = objective(0.0, params, spec, quad)?;
    let r_max = search_radius(params, spec, quad, g0)?;
    let mut grid = linspace(0.0, r_max, FIXED_POINT_GRID);
    // f(0) = 0 exactly; probe the slope just above the origin instead
    grid[0] = 1e-6 * grid[1];
    let phi = |x: f64| Ok(selfconsistency_f(x, params, spec, quad)? - x);
    let mut values = Vec::with_capacity(grid.len());
    for &r in &grid {
        values.push(phi(r)?);
    }
    let crossings: Vec<usize> = (0..grid.len() - 1)
        .filter(|&i| values[i] > 0.0 && values[i + 1] <= 0.0)
        .collect();
    let r_star = match crossings.last() {
        Some(&i) => bisect(phi, grid[i], grid[i + 1], values[i], 1e-12)?,
        None => 0.0,
    };
    Ok(SelfConsistencyResult {
        r_star,
        r_variational: variational.r_star,
        fixed_points: crossings.len(),
        nonconcave_suspect: (r_star - variational.r_star).abs() > SUSPECT_GAP,
    })
}

/// `E[−β⁻¹ ln(1 − e^{β(μ − ε − 1)})]`.
pub fn perfect_pressure(spec: &DisorderSpec, beta: f64, mu: f64, quad: &QuadratureConfig) -> Result<f64> {
    check_perfect(mu)?;
    spec.expect(|e| -(-(beta * (mu - e - 1.0)).exp_m1()).ln() / beta, quad)
}

/// `E[1/(e^{β(1 + ε − μ)} − 1)]`.
pub fn perfect_density(spec: &DisorderSpec, beta: f64, mu: f64, quad: &QuadratureConfig) -> Result<f64> {
    check_perfect(mu)?;
    spec.expect(|e| 1.0 / (beta * (1.0 + e - mu)).exp_m1(), quad)
}

/// `sup_{μ≤0} ρ(β, μ) = ρ(β, 0)`.
pub fn perfect_critical_density(spec: &DisorderSpec, beta: f64, quad: &QuadratureConfig) -> Result<f64> {
    perfect_density(spec, beta, 0.0, quad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::singlesite::{hc_gap_term, ptilde_dd, site_density};
    use proptest::prelude::*;

    fn q() -> QuadratureConfig {
        QuadratureConfig::default()
    }

    fn point() -> DisorderSpec {
        DisorderSpec::point_mass()
    }

    #[test]
    fn normal_phase_maximizer_is_not_roundoff() {
        // golden section alone returns r ~ 3e−8 here from ties in g
        let b = DisorderSpec::bernoulli(0.5, 1.0).unwrap();
        for (beta, mu) in [(0.3797, 2.4721), (0.5063, 1.361), (1.1392, 1.361)] {
            let params = ModelParams::new(beta, mu, Interaction::Finite(1.0)).unwrap();
            let r = variational_pressure(&params, &b, &q()).unwrap();
            assert_eq!(r.r_star, 0.0, "beta {beta} mu {mu}");
            assert!(!r.bec);
        }
    }

    fn params(beta: f64, mu: f64, i: Interaction) -> ModelParams {
        ModelParams::new(beta, mu, i).unwrap()
    }

    #[test]
    fn perfect_point_mass_pressure() {
        let p = variational_pressure(&params(1.0, -1.0, Interaction::Perfect), &point(), &q()).unwrap();
        assert_eq!(p.r_star, 0.0);
        assert!(!p.bec);
        assert!((p.pressure + (1.0 - (-2f64).exp()).ln()).abs() < 1e-15);
    }

    #[test]
    fn perfect_rejects_positive_mu() {
        let r = variational_pressure(&params(1.0, 0.1, Interaction::Perfect), &point(), &q());
        assert!(matches!(r, Err(Error::Domain(_))));
        assert!(perfect_density(&point(), 1.0, 0.2, &q()).is_err());
    }

    #[test]
    fn hard_core_condenses_at_low_temperature() {
        let p = variational_pressure(&params(10.0, 1.0, Interaction::HardCore), &point(), &q()).unwrap();
        assert!(p.bec, "{p:?}");
        assert!(p.f_residual < 1e-8);
        // at x = 0, f(r) = tanh(βr)/2
        assert!(((10.0 * p.r_star).tanh() - 2.0 * p.r_star).abs() < 1e-10);
    }

    #[test]
    fn high_temperature_has_no_condensate() {
        let b = DisorderSpec::bernoulli(0.5, 2.0).unwrap();
        let p = variational_pressure(&params(0.1, 0.0, Interaction::Finite(1.0)), &b, &q()).unwrap();
        assert_eq!(p.r_star, 0.0);
        let s = solve_selfconsistency(&params(0.1, 0.0, Interaction::Finite(1.0)), &b, &q()).unwrap();
        assert_eq!(s.r_star, 0.0);
        assert!(!s.nonconcave_suspect);
    }

    #[test]
    fn f_examples() {
        let pr = params(2.0, 1.5, Interaction::Finite(1.0));
        let b = DisorderSpec::bernoulli(0.5, 1.0).unwrap();
        assert_eq!(selfconsistency_f(0.0, &pr, &b, &q()).unwrap(), 0.0);
        let rs = linspace(0.0, 3.0, 31);
        let fs: Vec<f64> = rs.iter().map(|&r| selfconsistency_f(r, &pr, &b, &q()).unwrap()).collect();
        assert!(fs.windows(2).all(|w| w[1] >= w[0]));
        for r in [0.2, 0.9, 2.0] {
            let h = 1e-5;
            let g = |r: f64| objective(r, &pr, &b, &q()).unwrap() + r * r;
            let fd = (g(r + h) - g(r - h)) / (2.0 * h);
            let f = selfconsistency_f(r, &pr, &b, &q()).unwrap();
            assert!((2.0 * f - fd).abs() < 1e-6 * fd.abs(), "{f} vs {fd}");
        }
    }

    #[test]
    fn hard_core_symmetric_point_methods_agree() {
        let pr = params(4.0, 1.0, Interaction::HardCore);
        let s = solve_selfconsistency(&pr, &point(), &q()).unwrap();
        assert!(s.r_star > 0.1);
        assert!((s.r_star - s.r_variational).abs() < 1e-6, "{s:?}");
        assert!(!s.nonconcave_suspect);
    }

    #[test]
    fn order_parameter_is_continuous_across_criticality() {
        // hard-core point mass at μ = 1 is critical at β = 2
        let r_at = |b: f64| variational_pressure(&params(b, 1.0, Interaction::HardCore), &point(), &q()).unwrap().r_star;
        assert_eq!(r_at(1.99), 0.0);
        let r = r_at(2.01);
        assert!(r > 0.0 && r < 0.1, "{r}");
        assert!(r_at(2.001) < r);
    }

    #[test]
    fn perfect_closed_forms() {
        let e1 = -(1.0 - (-1f64).exp()).ln();
        assert!((perfect_pressure(&point(), 1.0, 0.0, &q()).unwrap() - e1).abs() < 1e-15);
        assert!(perfect_pressure(&point(), 1.0, -60.0, &q()).unwrap() < 1e-20);
        let b = DisorderSpec::bernoulli(0.5, 2.0).unwrap();
        let e3 = -(1.0 - (-3f64).exp()).ln();
        assert!((perfect_pressure(&b, 1.0, 0.0, &q()).unwrap() - 0.5 * (e1 + e3)).abs() < 1e-15);

        assert!((perfect_density(&point(), 2f64.ln(), 0.0, &q()).unwrap() - 1.0).abs() < 1e-14);
        assert!(perfect_density(&point(), 1.0, -60.0, &q()).unwrap() < 1e-20);
        assert!((perfect_critical_density(&point(), 2f64.ln(), &q()).unwrap() - 1.0).abs() < 1e-14);
        assert!(perfect_critical_density(&point(), 60.0, &q()).unwrap() < 1e-20);
        let want = 0.5 * (1.0 / (1f64.exp() - 1.0) + 1.0 / (3f64.exp() - 1.0));
        assert!((perfect_critical_density(&b, 1.0, &q()).unwrap() - want).abs() < 1e-15);
    }

    #[test]
    fn perfect_density_matches_density_of_states_form() {
        // N̄(E) = P[ε ≤ E − 1] = (E − 1)/ε on [1, 1 + ε]; integrate dN̄/(e^{β(E−μ)} − 1)
        // by composite Simpson in E
        let (w, beta, mu) = (2.0, 1.3, -0.2);
        let u = DisorderSpec::uniform(w).unwrap();
        let n = 20_000;
        let h = w / n as f64;
        let f = |e: f64| 1.0 / (beta * (e - mu)).exp_m1() / w;
        let mut s = f(1.0) + f(1.0 + w);
        for k in 1..n {
            s += if k % 2 == 1 { 4.0 } else { 2.0 } * f(1.0 + k as f64 * h);
        }
        let simpson = s * h / 3.0;
        assert!((perfect_density(&u, beta, mu, &q()).unwrap() - simpson).abs() < 1e-9);
    }

    #[test]
    fn disorder_lowers_perfect_critical_density() {
        let base = perfect_critical_density(&point(), 1.0, &q()).unwrap();
        let mut prev = base;
        for eps in [0.5, 1.0, 2.0, 4.0] {
            let v = perfect_critical_density(&DisorderSpec::bernoulli(0.5, eps).unwrap(), 1.0, &q()).unwrap();
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn pressure_derivative_is_density() {
        let b = DisorderSpec::bernoulli(0.5, 1.0).unwrap();
        let lambda = 1.0;
        let quad = q();
        let p = |beta: f64, mu: f64| {
            variational_pressure(&params(beta, mu, Interaction::Finite(lambda)), &b, &quad).unwrap()
        };
        let h = 1e-4;
        // normal phase
        let (beta, mu) = (0.5, 0.3);
        assert!(!p(beta, mu).bec);
        let dp = (p(beta, mu + h).pressure - p(beta, mu - h).pressure) / (2.0 * h);
        let rho = b.try_expect(|e| site_density(beta, mu - e, lambda), &quad).unwrap();
        assert!((dp - rho).abs() < 1e-6, "{dp} vs {rho}");
        // condensed phase: the condensate adds to the r = 0 density
        let (beta, mu) = (6.0, 1.6);
        assert!(p(beta, mu).bec);
        let dp = (p(beta, mu + h).pressure - p(beta, mu - h).pressure) / (2.0 * h);
        let rho = b.try_expect(|e| site_density(beta, mu - e, lambda), &quad).unwrap();
        assert!(dp > rho + 1e-3, "{dp} vs {rho}");
    }

    #[test]
    fn gap_sign_matches_condensation() {
        let quad = q();
        let b = DisorderSpec::bernoulli(0.5, 1.0).unwrap();
        for (beta, mu) in [(1.0, 1.5), (3.0, 1.5), (8.0, 1.5), (3.0, 0.2), (3.0, 2.6)] {
            let gap = b.try_expect(|e| ptilde_dd(beta, mu - e, 1.0), &quad).unwrap() - 2.0;
            let p = variational_pressure(&params(beta, mu, Interaction::Finite(1.0)), &b, &quad).unwrap();
            assert_eq!(gap > 0.0, p.bec, "beta {beta} mu {mu} gap {gap}");
        }
        let hc = params(3.0, 1.0, Interaction::HardCore);
        assert_eq!(2.0 * hc_gap_term(3.0, 0.0) - 2.0 > 0.0, variational_pressure(&hc, &point(), &quad).unwrap().bec);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(50))]

        #[test]
        fn pressure_convex_nondecreasing_in_mu(beta in 0.3f64..6.0, lambda in 0.3f64..4.0, mu0 in -1.0f64..3.0) {
            let b = DisorderSpec::bernoulli(0.5, 1.0).unwrap();
            let quad = q();
            let ps: Vec<f64> = (0..7)
                .map(|k| {
                    let pr = params(beta, mu0 + 0.1 * k as f64, Interaction::Finite(lambda));
                    variational_pressure(&pr, &b, &quad).unwrap().pressure
                })
                .collect();
            for w in ps.windows(2) {
                prop_assert!(w[1] >= w[0] - 1e-12);
            }
            for w in ps.windows(3) {
                prop_assert!(w[2] - 2.0 * w[1] + w[0] >= -1e-9);
            }
        }

        #[test]
        fn maximizer_and_fixed_point_agree(beta in 0.3f64..8.0, mu in -0.5f64..4.0, lambda in 0.3f64..5.0, eps in 0.0f64..3.0) {
            let b = DisorderSpec::bernoulli(0.5, eps).unwrap();
            let pr = params(beta, mu, Interaction::Finite(lambda));
            let quad = q();
            let s = solve_selfconsistency(&pr, &b, &quad).unwrap();
            prop_assert!(!s.nonconcave_suspect, "{:?}", s);
            prop_assert!((s.r_star - s.r_variational).abs() < 1e-6, "{:?}", s);
            let v = variational_pressure(&pr, &b, &quad).unwrap();
            prop_assert!(v.pressure >= objective(0.0, &pr, &b, &quad).unwrap());
            prop_assert_eq!(v.bec, v.r_star > R_TOL);
            prop_assert!(v.f_residual <= 1e-8, "{:?}", v);
        }
    }
}
