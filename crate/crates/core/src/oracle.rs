//! Brute-force finite-volume checks: exact diagonalization of the
//! infinite-range Hamiltonian on a truncated Fock space, the approximating
//! (single-site) pressure, their difference, and the integrated density of
//! states of the one-particle operator.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::disorder::{log_sum_exp, DisorderSpec};
use crate::error::{domain, Error, Result};
use crate::optimize::{golden_max, linspace};
use crate::singlesite::log_trace_truncated;

/// Largest total Fock dimension `(n_max + 1)^V`.
pub const MAX_FOCK_DIM: usize = 1 << 20;
/// Largest dense block (fixed particle number) handed to the eigensolver.
pub const MAX_BLOCK_DIM: usize = 4096;
/// Largest one-particle dimension for the density of states.
pub const MAX_IDS_DIM: usize = 4096;
/// Tolerated negative Bogoliubov gap.
pub const GAP_FLOOR: f64 = 1e-9;

const SUP_SCAN: usize = 64;
const SUP_TOL: f64 = 1e-10;

/// One disorder realization on `V` sites with a per-site occupancy cutoff.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LatticeRealization {
    pub v: usize,
    pub n_max: usize,
    pub eps: Vec<f64>,
    pub beta: f64,
    pub mu: f64,
    pub lambda: f64,
    pub seed: u64,
}

impl LatticeRealization {
    pub fn new(eps: Vec<f64>, n_max: usize, beta: f64, mu: f64, lambda: f64, seed: u64) -> Result<Self> {
        let v = eps.len();
        if v == 0 {
            return domain("a lattice needs at least one site");
        }
        if n_max == 0 {
            return domain("occupancy cutoff must be >= 1");
        }
        if eps.iter().any(|e| !(e.is_finite() && *e >= 0.0)) {
            return domain("site energies must be finite and >= 0");
        }
        if !(beta > 0.0 && beta.is_finite()) || !mu.is_finite() || !(lambda >= 0.0 && lambda.is_finite()) {
            return domain(format!("invalid parameters beta = {beta}, mu = {mu}, lambda = {lambda}"));
        }
        fock_dim(v, n_max)?;
        Ok(Self {
            v,
            n_max,
            eps,
            beta,
            mu,
            lambda,
            seed,
        })
    }

    /// Site energies drawn from `spec` with `seed`.
    #[allow(clippy::too_many_arguments)]
    pub fn sampled(
        v: usize,
        n_max: usize,
        spec: &DisorderSpec,
        beta: f64,
        mu: f64,
        lambda: f64,
        seed: u64,
    ) -> Result<Self> {
        Self::new(spec.sample(seed, v), n_max, beta, mu, lambda, seed)
    }

    /// Nonrandom lattice, `ε ≡ 0`.
    pub fn clean(v: usize, n_max: usize, beta: f64, mu: f64, lambda: f64) -> Result<Self> {
        Self::new(vec![0.0; v], n_max, beta, mu, lambda, 0)
    }
}

fn fock_dim(v: usize, n_max: usize) -> Result<usize> {
    let base = n_max + 1;
    let mut dim: usize = 1;
    for _ in 0..v {
        dim = dim.checked_mul(base).filter(|d| *d <= MAX_FOCK_DIM).ok_or_else(|| {
            Error::DimensionGuard(format!("(n_max + 1)^V = {base}^{v} exceeds {MAX_FOCK_DIM}"))
        })?;
    }
    Ok(dim)
}

/// Occupations of basis state `index`, little-endian in base `n_max + 1`.
fn decode(mut index: usize, v: usize, base: usize, out: &mut [usize]) {
    for slot in out.iter_mut().take(v) {
        *slot = index % base;
        index /= base;
    }
}

/// `H − μN` restricted to each particle-number sector, as dense matrices.
///
/// `H − μN = Σ_x [λn_x(n_x − 1) + (ε_x − μ)n_x] + N − (1/V)Σ_{x,y} a*_x a_y`.
fn sector_hamiltonians(cfg: &LatticeRealization) -> Result<Vec<DMatrix<f64>>> {
    let (v, base) = (cfg.v, cfg.n_max + 1);
    let dim = fock_dim(v, cfg.n_max)?;
    let inv_v = 1.0 / v as f64;
    let mut occ = vec![0usize; v];
    let mut pos_in_sector = vec![0usize; dim];
    let mut sectors: Vec<Vec<usize>> = vec![Vec::new(); v * cfg.n_max + 1];
    for (s, pos) in pos_in_sector.iter_mut().enumerate() {
        decode(s, v, base, &mut occ);
        let n: usize = occ.iter().sum();
        *pos = sectors[n].len();
        sectors[n].push(s);
    }
    if let Some(big) = sectors.iter().map(Vec::len).max().filter(|&m| m > MAX_BLOCK_DIM) {
        return Err(Error::DimensionGuard(format!(
            "largest particle-number block has {big} states, limit {MAX_BLOCK_DIM}"
        )));
    }
    let mut pow = vec![1usize; v];
    for x in 1..v {
        pow[x] = pow[x - 1] * base;
    }
    let mut out = Vec::with_capacity(sectors.len());
    for states in &sectors {
        let m = states.len();
        let mut h = DMatrix::<f64>::zeros(m, m);
        for (i, &s) in states.iter().enumerate() {
            decode(s, v, base, &mut occ);
            let mut d = 0.0;
            for (&k, &e) in occ.iter().zip(&cfg.eps) {
                let n = k as f64;
                d += cfg.lambda * n * (n - 1.0) + (e - cfg.mu) * n + n * (1.0 - inv_v);
            }
            h[(i, i)] = d;
            for y in 0..v {
                if occ[y] == 0 {
                    continue;
                }
                for x in 0..v {
                    if x == y || occ[x] == cfg.n_max {
                        continue;
                    }
                    let t = s + pow[x] - pow[y];
                    let amp = ((occ[x] + 1) as f64 * occ[y] as f64).sqrt();
                    h[(pos_in_sector[t], i)] -= inv_v * amp;
                }
            }
        }
        out.push(h);
    }
    Ok(out)
}

/// `(1/βV) ln Tr exp(−β(H − μN))` on the truncated Fock space.
pub fn exact_pressure(cfg: &LatticeRealization) -> Result<f64> {
    let mut exponents = Vec::new();
    for h in sector_hamiltonians(cfg)? {
        exponents.extend(h.symmetric_eigenvalues().iter().map(|e| -cfg.beta * e));
    }
    Ok(log_sum_exp(&exponents) / (cfg.beta * cfg.v as f64))
}

/// `−r² + (1/βV) Σ_x ln Tr exp(−β[h_n(μ − ε_x) − r(a + a*)])` at the
/// realization's cutoff.
pub fn approx_objective(cfg: &LatticeRealization, r: f64) -> f64 {
    let sum: f64 = cfg
        .eps
        .iter()
        .map(|e| log_trace_truncated(cfg.beta, cfg.mu - e, cfg.lambda, r, cfg.n_max))
        .sum();
    -r * r + sum / (cfg.beta * cfg.v as f64)
}

/// `sup_{r ≥ 0}` of [`approx_objective`] and the maximizing `r`.
pub fn approx_pressure_sup(cfg: &LatticeRealization) -> Result<(f64, f64)> {
    let g0 = approx_objective(cfg, 0.0);
    let mut radius = 1.0;
    while approx_objective(cfg, radius) >= g0 {
        radius *= 2.0;
        if radius > 1024.0 {
            return Err(Error::Bracket("approximating objective does not decay".into()));
        }
    }
    let grid = linspace(0.0, radius, SUP_SCAN + 1);
    let values: Vec<f64> = grid.iter().map(|&r| approx_objective(cfg, r)).collect();
    let best = (0..values.len()).fold(0, |b, i| if values[i] > values[b] { i } else { b });
    let a = grid[best.saturating_sub(1)];
    let b = grid[(best + 1).min(SUP_SCAN)];
    let (r, v) = golden_max(|r| Ok(approx_objective(cfg, r)), a, b, SUP_TOL)?;
    Ok(if v >= values[best] { (v, r) } else { (values[best], grid[best]) })
}

/// `p_exact − p_appr`; fails below `−GAP_FLOOR`.
pub fn bogoliubov_gap(cfg: &LatticeRealization) -> Result<f64> {
    let exact = exact_pressure(cfg)?;
    let (appr, _) = approx_pressure_sup(cfg)?;
    let gap = exact - appr;
    if gap < -GAP_FLOOR {
        return Err(Error::InvariantViolation(format!(
            "negative Bogoliubov gap {gap} at V = {} (exact {exact}, approximating {appr})",
            cfg.v
        )));
    }
    Ok(gap)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapRow {
    pub v: usize,
    pub beta: f64,
    pub mu: f64,
    pub lambda: f64,
    pub seed: u64,
    pub p_exact: f64,
    pub p_appr: f64,
    pub gap: f64,
}

/// The gap for each volume in `volumes`, site energies from `spec`.
#[allow(clippy::too_many_arguments)]
pub fn gap_sequence(
    volumes: &[usize],
    n_max: usize,
    spec: &DisorderSpec,
    beta: f64,
    mu: f64,
    lambda: f64,
    seed: u64,
) -> Result<Vec<GapRow>> {
    volumes
        .iter()
        .map(|&v| {
            let cfg = LatticeRealization::sampled(v, n_max, spec, beta, mu, lambda, seed)?;
            let p_exact = exact_pressure(&cfg)?;
            let (p_appr, _) = approx_pressure_sup(&cfg)?;
            let gap = bogoliubov_gap(&cfg)?;
            Ok(GapRow {
                v,
                beta,
                mu,
                lambda,
                seed,
                p_exact,
                p_appr,
                gap,
            })
        })
        .collect()
}

/// Spectrum of `I − J/V + diag(ε)`, ascending.
pub fn one_particle_spectrum(eps: &[f64]) -> Result<Vec<f64>> {
    let v = eps.len();
    if v == 0 || v > MAX_IDS_DIM {
        return Err(Error::DimensionGuard(format!("one-particle dimension {v} outside 1..={MAX_IDS_DIM}")));
    }
    let inv_v = 1.0 / v as f64;
    let h = DMatrix::from_fn(v, v, |i, j| if i == j { 1.0 - inv_v + eps[i] } else { -inv_v });
    let mut values: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
    values.sort_by(f64::total_cmp);
    Ok(values)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IdsPoint {
    pub e: f64,
    pub n_bar: f64,
    /// Standard error of the sample mean; zero for a single sample.
    pub stderr: f64,
}

/// `N̄(E) = (1/V) #{eigenvalues ≤ E}` averaged over `samples` realizations.
///
/// Sample `k` draws from stream `k` of a generator seeded with `seed`, so the
/// result does not depend on how samples are scheduled.
pub fn ids_empirical(
    v: usize,
    spec: &DisorderSpec,
    samples: usize,
    e_grid: &[f64],
    seed: u64,
) -> Result<Vec<IdsPoint>> {
    if samples == 0 {
        return domain("at least one sample is required");
    }
    if v == 0 || v > MAX_IDS_DIM {
        return Err(Error::DimensionGuard(format!("one-particle dimension {v} outside 1..={MAX_IDS_DIM}")));
    }
    let counts: Vec<Vec<f64>> = (0..samples)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let eps = spec.sample_with(&mut rng, v);
            let spectrum = one_particle_spectrum(&eps)?;
            Ok(e_grid
                .iter()
                .map(|&e| spectrum.partition_point(|&x| x <= e) as f64 / v as f64)
                .collect())
        })
        .collect::<Result<_>>()?;
    let n = samples as f64;
    Ok(e_grid
        .iter()
        .enumerate()
        .map(|(j, &e)| {
            let mean = counts.iter().map(|c| c[j]).sum::<f64>() / n;
            let stderr = if samples > 1 {
                let var = counts.iter().map(|c| (c[j] - mean).powi(2)).sum::<f64>() / (n - 1.0);
                (var / n).sqrt()
            } else {
                0.0
            };
            IdsPoint { e, n_bar: mean, stderr }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pressure::perfect_pressure;
    use crate::quadrature::QuadratureConfig;
    use proptest::prelude::*;

    /// Dense `H − μN` on the whole Fock space from explicit operator
    /// products.
    fn full_matrix(cfg: &LatticeRealization) -> DMatrix<f64> {
        let (v, base) = (cfg.v, cfg.n_max + 1);
        let dim = base.pow(v as u32);
        let a1 = DMatrix::from_fn(base, base, |i, j| if i + 1 == j { (j as f64).sqrt() } else { 0.0 });
        let id1 = DMatrix::<f64>::identity(base, base);
        // site x is the x-th least significant factor
        let embed = |op: &DMatrix<f64>, x: usize| {
            let mut m = DMatrix::<f64>::identity(1, 1);
            for y in (0..v).rev() {
                m = m.kronecker(if y == x { op } else { &id1 });
            }
            m
        };
        let a: Vec<DMatrix<f64>> = (0..v).map(|x| embed(&a1, x)).collect();
        let mut h = DMatrix::<f64>::zeros(dim, dim);
        for x in 0..v {
            let n = a[x].transpose() * &a[x];
            let nn = &n * (&n - DMatrix::<f64>::identity(dim, dim));
            h += nn * cfg.lambda + &n * (cfg.eps[x] - cfg.mu + 1.0);
            for y in 0..v {
                h -= a[x].transpose() * &a[y] / v as f64;
            }
        }
        h
    }

    fn full_pressure(cfg: &LatticeRealization) -> f64 {
        let e: Vec<f64> = full_matrix(cfg).symmetric_eigenvalues().iter().map(|e| -cfg.beta * e).collect();
        log_sum_exp(&e) / (cfg.beta * cfg.v as f64)
    }

    #[test]
    fn two_site_hard_core_by_hand() {
        // basis 00, 01, 10, 11 with μ = 1, ε = 0: H − μN has diagonal
        // (0, −1/2, −1/2, −1) and hopping −1/2 between 01 and 10, so the
        // spectrum is {0, 0, −1, −1}
        let cfg = LatticeRealization::clean(2, 1, 1.0, 1.0, 0.7).unwrap();
        let want = (2.0 + 2.0 * 1f64.exp()).ln() / 2.0;
        assert!((exact_pressure(&cfg).unwrap() - want).abs() < 1e-14);
    }

    #[test]
    fn sector_blocks_match_full_matrix() {
        for (v, n_max, lambda) in [(2, 2, 0.3), (3, 2, 1.0), (4, 1, 0.0), (3, 3, 2.0)] {
            let eps: Vec<f64> = (0..v).map(|x| 0.4 * x as f64).collect();
            let cfg = LatticeRealization::new(eps, n_max, 0.8, 0.6, lambda, 0).unwrap();
            assert!((exact_pressure(&cfg).unwrap() - full_pressure(&cfg)).abs() < 1e-12);
        }
    }

    #[test]
    fn single_site_has_no_hopping() {
        let cfg = LatticeRealization::new(vec![0.5], 6, 1.3, 0.2, 0.9, 0).unwrap();
        // T = N − â₀*â₀ vanishes at V = 1, so the unit shift in h_n is absent
        let want = log_trace_truncated(1.3, 0.2 - 0.5 + 1.0, 0.9, 0.0, 6) / 1.3;
        assert!((exact_pressure(&cfg).unwrap() - want).abs() < 1e-13);
    }

    #[test]
    fn infinite_temperature_entropy() {
        let beta = 1e-6;
        let cfg = LatticeRealization::clean(3, 2, beta, 0.0, 1.0).unwrap();
        assert!((exact_pressure(&cfg).unwrap() * beta - 3f64.ln()).abs() < 1e-5);
    }

    #[test]
    fn near_perfect_single_site() {
        // the limit pressure carries the unit kinetic shift that V = 1 lacks
        let (beta, mu) = (1.0, -1.5);
        let cfg = LatticeRealization::new(vec![0.0], 60, beta, mu, 1e-8, 0).unwrap();
        let q = QuadratureConfig::default();
        let perfect = perfect_pressure(&DisorderSpec::point_mass(), beta, mu + 1.0, &q).unwrap();
        assert!((exact_pressure(&cfg).unwrap() - perfect).abs() < 1e-6);
    }

    #[test]
    fn guards() {
        assert!(matches!(LatticeRealization::clean(21, 1, 1.0, 0.0, 1.0), Err(Error::DimensionGuard(_))));
        let cfg = LatticeRealization::clean(20, 1, 1.0, 0.0, 1.0).unwrap();
        assert!(matches!(exact_pressure(&cfg), Err(Error::DimensionGuard(_))));
        assert!(LatticeRealization::clean(2, 0, 1.0, 0.0, 1.0).is_err());
        assert!(one_particle_spectrum(&vec![0.0; MAX_IDS_DIM + 1]).is_err());
    }

    #[test]
    fn approximating_pressure_properties() {
        let cfg = LatticeRealization::clean(3, 4, 1.5, 1.2, 0.5).unwrap();
        let (sup, r) = approx_pressure_sup(&cfg).unwrap();
        assert!(sup >= approx_objective(&cfg, 0.0));
        assert!(r > 0.0);
        for dr in [-1e-3, 1e-3] {
            assert!(approx_objective(&cfg, r + dr) <= sup + 1e-15);
        }
        let diag = log_trace_truncated(1.5, 1.2, 0.5, 0.0, 4) / 1.5;
        assert!((approx_objective(&cfg, 0.0) - diag).abs() < 1e-14);
    }

    #[test]
    fn gap_trend_clean() {
        let rows = gap_sequence(&[2, 3, 4], 3, &DisorderSpec::point_mass(), 1.0, 0.5, 1.0, 0).unwrap();
        for w in rows.windows(2) {
            assert!(w[1].gap <= w[0].gap + 1e-6, "{rows:?}");
        }
        assert!(rows.iter().all(|r| r.gap >= -GAP_FLOOR));
    }

    #[test]
    fn hard_core_disordered_gap_nonnegative() {
        let b = DisorderSpec::bernoulli(0.3, 2.0).unwrap();
        for seed in 0..5 {
            let cfg = LatticeRealization::sampled(3, 1, &b, 2.0, 1.5, 0.0, seed).unwrap();
            assert!(bogoliubov_gap(&cfg).unwrap() >= -GAP_FLOOR);
        }
    }

    /// Eigenvalues of `diag(1 + ε) − (1/V)11ᵀ` below `e`, by Sylvester
    /// inertia of the bordered matrix.
    fn inertia_count(eps: &[f64], e: f64) -> usize {
        let v = eps.len() as f64;
        let below = eps.iter().filter(|x| 1.0 + **x < e).count();
        let secular = 1.0 - eps.iter().map(|x| 1.0 / (1.0 + x - e)).sum::<f64>() / v;
        below + usize::from(secular < 0.0)
    }

    #[test]
    fn spectrum_clean_and_inertia() {
        let s = one_particle_spectrum(&[0.0; 7]).unwrap();
        assert!(s[0].abs() < 1e-14);
        assert!(s[1..].iter().all(|x| (x - 1.0).abs() < 1e-14));
        let b = DisorderSpec::uniform(2.0).unwrap();
        let eps = b.sample(3, 200);
        let s = one_particle_spectrum(&eps).unwrap();
        for e in [0.3, 0.99, 1.37, 2.0, 2.71, 3.5] {
            assert_eq!(s.partition_point(|&x| x < e), inertia_count(&eps, e), "E = {e}");
        }
    }

    #[test]
    fn ids_clean_steps() {
        let pts = ids_empirical(10, &DisorderSpec::point_mass(), 2, &[-0.5, 0.0, 0.5, 1.0, 1.5], 1).unwrap();
        let got: Vec<f64> = pts.iter().map(|p| p.n_bar).collect();
        assert_eq!(got[0], 0.0);
        assert_eq!(got[2], 0.1);
        assert_eq!(got[4], 1.0);
        assert_eq!(pts[2].stderr, 0.0);
    }

    #[test]
    fn ids_is_schedule_independent() {
        let b = DisorderSpec::bernoulli(0.3, 2.0).unwrap();
        let a = ids_empirical(40, &b, 6, &[1.5], 9).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let c = pool.install(|| ids_empirical(40, &b, 6, &[1.5], 9)).unwrap();
        assert_eq!(a, c);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn relabeling_sites_leaves_pressure_unchanged(
            eps in proptest::collection::vec(0.0f64..3.0, 3),
            beta in 0.2f64..3.0,
            mu in -1.0f64..2.0,
            lambda in 0.0f64..2.0,
        ) {
            let a = LatticeRealization::new(eps.clone(), 2, beta, mu, lambda, 0).unwrap();
            let b = LatticeRealization::new(vec![eps[2], eps[0], eps[1]], 2, beta, mu, lambda, 0).unwrap();
            let (pa, pb) = (exact_pressure(&a).unwrap(), exact_pressure(&b).unwrap());
            prop_assert!((pa - pb).abs() < 1e-12 * pa.abs().max(1.0));
        }

        #[test]
        fn gap_is_nonnegative(
            eps in proptest::collection::vec(0.0f64..3.0, 2..=3),
            beta in 0.2f64..4.0,
            mu in -1.0f64..3.0,
            lambda in 0.0f64..2.0,
            n_max in 1usize..=3,
        ) {
            let cfg = LatticeRealization::new(eps, n_max, beta, mu, lambda, 0).unwrap();
            prop_assert!(bogoliubov_gap(&cfg).is_ok());
        }
    }
}
