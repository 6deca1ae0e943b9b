//! Laws for the random single-site energy and expectations over them.
//!
//! Only i.i.d. site energies are represented; the lowest possible energy is
//! normalised to zero.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::quadrature::{self, QuadratureConfig};

const WEIGHT_SUM_TOL: f64 = 1e-12;

/// One value of a discrete law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Atom {
    pub value: f64,
    pub weight: f64,
}

/// Probability law of the single-site energy.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum DisorderSpec {
    /// Finitely many atoms, sorted by value, values distinct.
    Discrete { atoms: Vec<Atom> },
    /// Uniform on `[0, width]`, `width > 0`.
    Uniform { width: f64 },
}

impl DisorderSpec {
    /// The nonrandom case: every site has energy zero.
    pub fn point_mass() -> Self {
        DisorderSpec::Discrete {
            atoms: vec![Atom {
                value: 0.0,
                weight: 1.0,
            }],
        }
    }

    /// Builds a discrete law, merging atoms that share a value.
    pub fn discrete(atoms: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        let mut merged: Vec<Atom> = Vec::new();
        for (value, weight) in atoms {
            if !value.is_finite() || value < 0.0 {
                return domain(format!("atom value {value} must be finite and >= 0"));
            }
            if !(weight > 0.0 && weight <= 1.0) {
                return domain(format!("atom weight {weight} must lie in (0, 1]"));
            }
            match merged.iter_mut().find(|a| a.value == value) {
                Some(a) => a.weight += weight,
                None => merged.push(Atom { value, weight }),
            }
        }
        if merged.is_empty() {
            return domain("a discrete law needs at least one atom");
        }
        let total: f64 = merged.iter().map(|a| a.weight).sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return domain(format!("weights sum to {total}, not 1"));
        }
        merged.sort_by(|a, b| a.value.total_cmp(&b.value));
        if merged[0].value != 0.0 {
            return domain("the lowest site energy must be 0");
        }
        Ok(DisorderSpec::Discrete { atoms: merged })
    }

    /// `eps` with probability `p`, `0` otherwise.
    pub fn bernoulli(p: f64, eps: f64) -> Result<Self> {
        if !(p > 0.0 && p < 1.0) {
            return domain(format!("bernoulli probability {p} must lie in (0, 1)"));
        }
        if !(eps >= 0.0 && eps.is_finite()) {
            return domain(format!("bernoulli energy {eps} must be >= 0"));
        }
        Self::discrete([(eps, p), (0.0, 1.0 - p)])
    }

    /// `m` equiprobable values `k·eps/(m−1)`, `k = 0..m`.
    pub fn multinomial_equidistant(m: usize, eps: f64) -> Result<Self> {
        if m < 2 {
            return domain(format!("multinomial law needs m >= 2, got {m}"));
        }
        if !(eps >= 0.0 && eps.is_finite()) {
            return domain(format!("multinomial width {eps} must be >= 0"));
        }
        let w = 1.0 / m as f64;
        let last = (m - 1) as f64;
        Self::discrete((0..m).map(|k| (k as f64 * eps / last, w)))
    }

    /// Uniform on `[0, eps]`; `eps = 0` gives the point mass.
    pub fn uniform(eps: f64) -> Result<Self> {
        if !(eps >= 0.0 && eps.is_finite()) {
            return domain(format!("uniform width {eps} must be >= 0"));
        }
        if eps == 0.0 {
            return Ok(Self::point_mass());
        }
        Ok(DisorderSpec::Uniform { width: eps })
    }

    pub fn atoms(&self) -> Option<&[Atom]> {
        match self {
            DisorderSpec::Discrete { atoms } => Some(atoms),
            DisorderSpec::Uniform { .. } => None,
        }
    }

    /// Smallest value in the support.
    pub fn min_value(&self) -> f64 {
        match self {
            DisorderSpec::Discrete { atoms } => atoms.first().map_or(0.0, |a| a.value),
            DisorderSpec::Uniform { .. } => 0.0,
        }
    }

    /// Largest value in the support.
    pub fn max_value(&self) -> f64 {
        match self {
            DisorderSpec::Discrete { atoms } => atoms.last().map_or(0.0, |a| a.value),
            DisorderSpec::Uniform { width } => *width,
        }
    }

    pub fn is_point_mass(&self) -> bool {
        matches!(self, DisorderSpec::Discrete { atoms } if atoms.len() == 1)
    }

    /// `E[g(ε)]`.
    pub fn expect<G>(&self, g: G, quad: &QuadratureConfig) -> Result<f64>
    where
        G: Fn(f64) -> f64,
    {
        self.try_expect(|e| Ok(g(e)), quad)
    }

    /// `E[g(ε)]` for a fallible integrand; the first error aborts.
    pub fn try_expect<G>(&self, mut g: G, quad: &QuadratureConfig) -> Result<f64>
    where
        G: FnMut(f64) -> Result<f64>,
    {
        match self {
            DisorderSpec::Discrete { atoms } => {
                let mut acc = 0.0;
                for a in atoms {
                    acc += a.weight * g(a.value)?;
                }
                Ok(acc)
            }
            DisorderSpec::Uniform { width } => {
                Ok(quadrature::integrate(&mut g, 0.0, *width, quad)? / width)
            }
        }
    }

    /// `ln E[exp(l(ε))]`, evaluated without forming `exp(l)` directly.
    ///
    /// Returns `-inf` when the integrand vanishes identically.
    pub fn try_expect_log<L>(&self, mut l: L, quad: &QuadratureConfig) -> Result<f64>
    where
        L: FnMut(f64) -> Result<f64>,
    {
        match self {
            DisorderSpec::Discrete { atoms } => {
                let mut terms = Vec::with_capacity(atoms.len());
                for a in atoms {
                    terms.push(a.weight.ln() + l(a.value)?);
                }
                Ok(log_sum_exp(&terms))
            }
            DisorderSpec::Uniform { width } => {
                const PROBES: usize = 128;
                let mut shift = f64::NEG_INFINITY;
                for k in 0..=PROBES {
                    shift = shift.max(l(*width * k as f64 / PROBES as f64)?);
                }
                if shift == f64::NEG_INFINITY {
                    return Ok(f64::NEG_INFINITY);
                }
                let integral =
                    quadrature::integrate(|e| Ok((l(e)? - shift).exp()), 0.0, *width, quad)?;
                Ok((integral / width).ln() + shift)
            }
        }
    }

    /// `count` i.i.d. draws, reproducible for a given seed.
    pub fn sample(&self, seed: u64, count: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.sample_with(&mut rng, count)
    }

    pub fn sample_with<R: Rng>(&self, rng: &mut R, count: usize) -> Vec<f64> {
        match self {
            DisorderSpec::Discrete { atoms } => (0..count)
                .map(|_| {
                    let u: f64 = rng.gen();
                    let mut cum = 0.0;
                    for a in atoms {
                        cum += a.weight;
                        if u < cum {
                            return a.value;
                        }
                    }
                    atoms[atoms.len() - 1].value
                })
                .collect(),
            DisorderSpec::Uniform { width } => {
                (0..count).map(|_| width * rng.gen::<f64>()).collect()
            }
        }
    }

    /// `P[ε <= x]`.
    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            DisorderSpec::Discrete { atoms } => {
                atoms.iter().filter(|a| a.value <= x).map(|a| a.weight).sum()
            }
            DisorderSpec::Uniform { width } => (x / width).clamp(0.0, 1.0),
        }
    }
}

/// Serialized form used by configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum DisorderConfig {
    Point,
    Bernoulli { p: f64, eps: f64 },
    Multinomial { m: usize, eps: f64 },
    Uniform { eps: f64 },
    Discrete { atoms: Vec<(f64, f64)> },
}

impl DisorderConfig {
    pub fn build(&self) -> Result<DisorderSpec> {
        match self {
            DisorderConfig::Point => Ok(DisorderSpec::point_mass()),
            DisorderConfig::Bernoulli { p, eps } => DisorderSpec::bernoulli(*p, *eps),
            DisorderConfig::Multinomial { m, eps } => DisorderSpec::multinomial_equidistant(*m, *eps),
            DisorderConfig::Uniform { eps } => DisorderSpec::uniform(*eps),
            DisorderConfig::Discrete { atoms } => DisorderSpec::discrete(atoms.iter().copied()),
        }
    }
}

impl TryFrom<&DisorderConfig> for DisorderSpec {
    type Error = Error;
    fn try_from(c: &DisorderConfig) -> Result<Self> {
        c.build()
    }
}

pub(crate) fn log_sum_exp(terms: &[f64]) -> f64 {
    let m = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q() -> QuadratureConfig {
        QuadratureConfig::default()
    }

    /// Adaptive Simpson, used only as an independent reference.
    fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
        #[allow(clippy::too_many_arguments)]
        fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
            let m = 0.5 * (a + b);
            let lm = 0.5 * (a + m);
            let rm = 0.5 * (m + b);
            let flm = f(lm);
            let frm = f(rm);
            let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
            let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
            if depth > 40 || (left + right - whole).abs() <= 15.0 * tol {
                return left + right + (left + right - whole) / 15.0;
            }
            rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth + 1)
                + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth + 1)
        }
        let m = 0.5 * (a + b);
        let (fa, fm, fb) = (f(a), f(m), f(b));
        rec(f, a, b, fa, fm, fb, (b - a) / 6.0 * (fa + 4.0 * fm + fb), tol, 0)
    }

    #[test]
    fn bernoulli_atoms() {
        let s = DisorderSpec::bernoulli(0.5, 2.0).unwrap();
        assert_eq!(
            s.atoms().unwrap(),
            &[Atom { value: 0.0, weight: 0.5 }, Atom { value: 2.0, weight: 0.5 }]
        );
        let s = DisorderSpec::bernoulli(0.5, 4.5).unwrap();
        assert_eq!(s.max_value(), 4.5);
    }

    #[test]
    fn bernoulli_at_zero_energy_merges_to_point_mass() {
        let s = DisorderSpec::bernoulli(0.3, 0.0).unwrap();
        assert_eq!(s, DisorderSpec::point_mass());
    }

    #[test]
    fn bernoulli_rejects_bad_parameters() {
        assert!(DisorderSpec::bernoulli(0.0, 1.0).is_err());
        assert!(DisorderSpec::bernoulli(1.0, 1.0).is_err());
        assert!(DisorderSpec::bernoulli(0.5, -1.0).is_err());
    }

    #[test]
    fn multinomial_grids() {
        let s = DisorderSpec::multinomial_equidistant(3, 10.0).unwrap();
        let v: Vec<f64> = s.atoms().unwrap().iter().map(|a| a.value).collect();
        assert_eq!(v, vec![0.0, 5.0, 10.0]);
        let s = DisorderSpec::multinomial_equidistant(10, 10.0).unwrap();
        let a = s.atoms().unwrap();
        assert_eq!(a.len(), 10);
        assert!((a[1].value - 10.0 / 9.0).abs() < 1e-15);
        assert!(a.iter().all(|x| (x.weight - 0.1).abs() < 1e-15));
        assert_eq!(
            DisorderSpec::multinomial_equidistant(2, 2.0).unwrap(),
            DisorderSpec::bernoulli(0.5, 2.0).unwrap()
        );
        assert!(DisorderSpec::multinomial_equidistant(1, 2.0).is_err());
    }

    #[test]
    fn discrete_requires_zero_minimum_and_unit_mass() {
        assert!(DisorderSpec::discrete([(1.0, 1.0)]).is_err());
        assert!(DisorderSpec::discrete([(0.0, 0.5), (1.0, 0.4)]).is_err());
        assert!(DisorderSpec::discrete([(0.0, 0.5), (-1.0, 0.5)]).is_err());
    }

    #[test]
    fn simple_means() {
        let b = DisorderSpec::bernoulli(0.5, 2.0).unwrap();
        assert_eq!(b.expect(|e| e, &q()).unwrap(), 1.0);
        let u = DisorderSpec::uniform(3.0).unwrap();
        assert!((u.expect(|e| e, &q()).unwrap() - 1.5).abs() < 1e-14);
        assert_eq!(DisorderSpec::uniform(0.0).unwrap(), DisorderSpec::point_mass());
    }

    #[test]
    fn uniform_matches_adaptive_simpson() {
        let u = DisorderSpec::uniform(2.0).unwrap();
        let g = |e: f64| (1.0 - e).tanh();
        let got = u.expect(g, &q()).unwrap();
        let reference = simpson(&g, 0.0, 2.0, 1e-12) / 2.0;
        assert!((got - reference).abs() < 1e-9, "{got} vs {reference}");
    }

    #[test]
    fn expectation_of_constant() {
        let b = DisorderSpec::multinomial_equidistant(7, 3.0).unwrap();
        assert_eq!(b.expect(|_| 2.5, &q()).unwrap(), 2.5);
        let u = DisorderSpec::uniform(3.0).unwrap();
        assert!((u.expect(|_| 2.5, &q()).unwrap() - 2.5).abs() < 1e-10 * 2.5);
    }

    #[test]
    fn multinomial_approaches_uniform() {
        let g = |e: f64| (1.0 - e).tanh();
        let m = DisorderSpec::multinomial_equidistant(1000, 2.0).unwrap();
        let u = DisorderSpec::uniform(2.0).unwrap();
        let a = m.expect(g, &q()).unwrap();
        let b = u.expect(g, &q()).unwrap();
        assert!((a - b).abs() < 1e-4, "{a} vs {b}");
    }

    #[test]
    fn multinomial_bias_is_first_order_in_one_over_m() {
        // equal endpoint weights: E_m[g] − E[g] = (g(0) + g(ε) − 2E[g]) / (2m) + O(1/m²)
        let g = |e: f64| (1.0 - e).tanh();
        let u = DisorderSpec::uniform(3.0).unwrap().expect(g, &q()).unwrap();
        for m in [250, 1000, 4000] {
            let a = DisorderSpec::multinomial_equidistant(m, 3.0)
                .unwrap()
                .expect(g, &q())
                .unwrap();
            let lead = (g(0.0) + g(3.0) - 2.0 * u) / (2.0 * m as f64);
            assert!((a - u - lead).abs() < 2.0 / (m * m) as f64, "m = {m}");
        }
    }

    #[test]
    fn log_expectation_matches_direct() {
        let u = DisorderSpec::uniform(3.0).unwrap();
        let l = |e: f64| Ok(-2.0 * e + 0.3);
        let direct = u.expect(|e| (-2.0 * e + 0.3).exp(), &q()).unwrap().ln();
        let got = u.try_expect_log(l, &q()).unwrap();
        assert!((got - direct).abs() < 1e-10);
        // far below the f64 range
        let far = u.try_expect_log(|e| Ok(-5000.0 - 2.0 * e), &q()).unwrap();
        assert!((far - (direct - 5000.3)).abs() < 1e-9);
        let b = DisorderSpec::bernoulli(0.25, 1.0).unwrap();
        let got = b.try_expect_log(|e| Ok(-3000.0 * (1.0 + e)), &q()).unwrap();
        let expect = -3000.0 + (0.75f64).ln() + (0.25 * (-3000.0f64).exp() / 0.75).ln_1p();
        assert!((got - expect).abs() < 1e-12);
    }

    #[test]
    fn sampling_is_deterministic_and_unbiased() {
        assert_eq!(DisorderSpec::point_mass().sample(3, 5), vec![0.0; 5]);
        let b = DisorderSpec::bernoulli(0.5, 2.0).unwrap();
        assert_eq!(b.sample(7, 100), b.sample(7, 100));
        let xs = b.sample(7, 100_000);
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        assert!((mean - 1.0).abs() < 0.02, "{mean}");
        let u = DisorderSpec::uniform(3.0).unwrap();
        let xs = u.sample(1, 100_000);
        let m = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / xs.len() as f64;
        assert!((var - 0.75).abs() < 0.02, "{var}");
    }

    #[test]
    fn config_round_trip() {
        let c: DisorderConfig = serde_json::from_str(r#"{"kind":"bernoulli","p":0.5,"eps":2.0}"#).unwrap();
        assert_eq!(c.build().unwrap(), DisorderSpec::bernoulli(0.5, 2.0).unwrap());
        let c: DisorderConfig = serde_json::from_str(r#"{"kind":"multinomial","m":10,"eps":10.0}"#).unwrap();
        assert_eq!(c.build().unwrap().atoms().unwrap().len(), 10);
        let c: DisorderConfig = serde_json::from_str(r#"{"kind":"uniform","eps":3.0}"#).unwrap();
        assert_eq!(c.build().unwrap(), DisorderSpec::Uniform { width: 3.0 });
        assert!(serde_json::from_str::<DisorderConfig>(r#"{"kind":"uniform","eps":3.0,"x":1}"#).is_err());
    }
}

#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn expectation_is_linear(alpha in -3.0f64..3.0, eps in 0.1f64..5.0, m in 2usize..12, uniform in any::<bool>()) {
            let spec = if uniform {
                DisorderSpec::uniform(eps).unwrap()
            } else {
                DisorderSpec::multinomial_equidistant(m, eps).unwrap()
            };
            let q = QuadratureConfig::default();
            let g = |e: f64| (0.7 - e).tanh();
            let h = |e: f64| (-e).exp();
            let lhs = spec.expect(|e| alpha * g(e) + h(e), &q).unwrap();
            let rhs = alpha * spec.expect(g, &q).unwrap() + spec.expect(h, &q).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12, "{} vs {}", lhs, rhs);
        }
    }
}
