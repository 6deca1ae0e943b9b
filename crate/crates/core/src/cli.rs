//! Command-line front end: configuration, presets, dispatch and output.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::disorder::DisorderConfig;
use crate::error::{Error, Result};
use crate::optimize::linspace;
use crate::oracle::{gap_sequence, ids_empirical, GapRow, IdsPoint};
use crate::phase::constants::{table, ConstantEntry};
use crate::phase::{critical_point, rho_grid, CriticalConfig, CriticalCurve, CriticalPoint};
use crate::pressure::variational_pressure;
use crate::singlesite::{Interaction, ModelParams};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Parser)]
#[command(name = "irh-bh", version, about = "Disordered infinite-range-hopping Bose-Hubbard solver")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    /// Critical curves β_c(ρ).
    Curve,
    /// Closed-form critical constants.
    Constants,
    /// Pressure and order parameter on a (β, μ) grid.
    Pressure,
    /// Finite-volume Bogoliubov gap and density of states.
    Oracle,
    /// Empirical integrated density of states.
    Ids,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// JSON run configuration.
    #[arg(long, global = true, conflicts_with = "preset")]
    pub config: Option<PathBuf>,
    /// Built-in curve configuration.
    #[arg(long, global = true, value_enum)]
    pub preset: Option<Preset>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads; defaults to the number of logical cores.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Seed for sampled disorder.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Upper end of the β search.
    #[arg(long = "beta-max", global = true)]
    pub beta_max: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Fig1,
    Fig2,
    Fig3,
    Fig4,
    Fig5,
}

/// Complete run description; every field has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub format_version: u32,
    pub seed: u64,
    pub preset: Option<Preset>,
    pub solver: CriticalConfig,
    pub curves: Vec<CurveSpec>,
    pub constants: ConstantsSection,
    pub pressure: PressureSection,
    pub oracle: OracleSection,
    pub ids: IdsSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveSpec {
    /// Output subdirectory; `[A-Za-z0-9_.-]+`.
    pub name: String,
    pub interaction: Interaction,
    pub disorder: DisorderConfig,
    pub rho_min: f64,
    pub rho_max: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConstantsSection {
    pub lambda: f64,
    pub p: f64,
    pub eps: f64,
    pub k: u32,
}

impl Default for ConstantsSection {
    fn default() -> Self {
        Self {
            lambda: 8.0,
            p: 0.5,
            eps: 2.0,
            k: 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl Grid {
    fn values(&self, what: &str) -> Result<Vec<f64>> {
        if self.points == 0 || !(self.min.is_finite() && self.max.is_finite()) || self.max < self.min {
            return Err(Error::Config(format!("invalid {what} grid {self:?}")));
        }
        Ok(linspace(self.min, self.max, self.points))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PressureSection {
    pub interaction: Interaction,
    pub disorder: DisorderConfig,
    pub beta: Grid,
    pub mu: Grid,
}

impl Default for PressureSection {
    fn default() -> Self {
        Self {
            interaction: Interaction::HardCore,
            disorder: DisorderConfig::Bernoulli { p: 0.5, eps: 1.0 },
            beta: Grid {
                min: 0.5,
                max: 10.0,
                points: 20,
            },
            mu: Grid {
                min: 0.0,
                max: 3.0,
                points: 13,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleSection {
    pub volumes: Vec<usize>,
    pub n_max: usize,
    pub beta: f64,
    pub mu: f64,
    pub lambda: f64,
    pub disorder: DisorderConfig,
}

impl Default for OracleSection {
    fn default() -> Self {
        Self {
            volumes: vec![2, 3, 4],
            n_max: 3,
            beta: 1.0,
            mu: 0.5,
            lambda: 1.0,
            disorder: DisorderConfig::Point,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IdsSection {
    pub v: usize,
    pub samples: usize,
    pub disorder: DisorderConfig,
    pub energy: Grid,
}

impl Default for IdsSection {
    fn default() -> Self {
        Self {
            v: 500,
            samples: 50,
            disorder: DisorderConfig::Bernoulli { p: 0.3, eps: 2.0 },
            energy: Grid {
                min: -0.5,
                max: 4.0,
                points: 46,
            },
        }
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            format_version: FORMAT_VERSION,
            seed: 0,
            preset: None,
            solver: CriticalConfig::default(),
            curves: vec![CurveSpec {
                name: "hardcore".into(),
                interaction: Interaction::HardCore,
                disorder: DisorderConfig::Bernoulli { p: 0.5, eps: 2.0 },
                rho_min: 0.02,
                rho_max: 0.98,
                points: 49,
            }],
            constants: ConstantsSection::default(),
            pressure: PressureSection::default(),
            oracle: OracleSection::default(),
            ids: IdsSection::default(),
        }
    }
}

fn curve(name: &str, interaction: Interaction, disorder: DisorderConfig, rho_max: f64) -> CurveSpec {
    let points = (rho_max / 0.02).round() as usize;
    CurveSpec {
        name: name.into(),
        interaction,
        disorder,
        rho_min: 0.02,
        rho_max,
        points,
    }
}

impl RunConfig {
    /// One of the built-in curve sets.
    pub fn preset(p: Preset) -> Self {
        let bern = |eps| DisorderConfig::Bernoulli { p: 0.5, eps };
        let multi = |m, eps| DisorderConfig::Multinomial { m, eps };
        let fin = Interaction::Finite;
        let curves = match p {
            Preset::Fig1 => {
                let mut c: Vec<CurveSpec> = [3.0, 3.3, 4.0, 6.0, 10.0]
                    .iter()
                    .map(|&l| curve(&format!("lambda_{l}"), fin(l), bern(2.0), 1.98))
                    .collect();
                c.push(curve("lambda_inf", Interaction::HardCore, bern(2.0), 0.98));
                c
            }
            Preset::Fig2 => [3.0, 4.0, 6.0, 8.0]
                .iter()
                .map(|&l| curve(&format!("lambda_{l}"), fin(l), multi(3, 10.0), 1.98))
                .collect(),
            Preset::Fig3 => vec![curve("lambda_8", fin(8.0), multi(10, 10.0), 2.48)],
            Preset::Fig4 => vec![
                curve("multinomial_10", fin(10.0), multi(10, 3.0), 1.98),
                curve("nonrandom", fin(10.0), DisorderConfig::Point, 1.98),
            ],
            Preset::Fig5 => vec![
                curve("bernoulli", fin(0.1), bern(2.0), 1.98),
                curve("nonrandom", fin(0.1), DisorderConfig::Point, 1.98),
                curve("perfect_nonrandom", Interaction::Perfect, DisorderConfig::Point, 1.98),
            ],
        };
        Self {
            preset: Some(p),
            curves,
            ..Self::default()
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if cfg.format_version != FORMAT_VERSION {
            return Err(Error::Config(format!(
                "unsupported format_version {}, expected {FORMAT_VERSION}",
                cfg.format_version
            )));
        }
        Ok(cfg)
    }

    /// Loads the base configuration and applies command-line overrides.
    pub fn resolve(args: &CommonArgs) -> Result<Self> {
        let mut cfg = match (&args.config, args.preset) {
            (Some(path), _) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
                Self::from_json(&text)?
            }
            (None, Some(p)) => Self::preset(p),
            (None, None) => Self::default(),
        };
        if let Some(seed) = args.seed {
            cfg.seed = seed;
        }
        if let Some(b) = args.beta_max {
            cfg.solver.beta_max = b;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.solver;
        if !(s.beta_lo > 0.0 && s.beta_max > s.beta_lo && s.beta_max.is_finite()) {
            return Err(Error::Config(format!("need 0 < beta_lo < beta_max < inf, got {} and {}", s.beta_lo, s.beta_max)));
        }
        if s.scan_points < 2 || !(s.beta_tol > 0.0) || !(s.gap_floor >= 0.0) {
            return Err(Error::Config("scan_points >= 2, beta_tol > 0 and gap_floor >= 0 are required".into()));
        }
        let q = &s.quadrature;
        if q.order == 0 || !(q.tol > 0.0) {
            return Err(Error::Config("quadrature order must be >= 1 and tol > 0".into()));
        }
        let mut names = std::collections::BTreeSet::new();
        for c in &self.curves {
            if c.name.is_empty()
                || !c.name.chars().all(|ch| ch.is_ascii_alphanumeric() || "_.-".contains(ch))
                || c.name.starts_with('.')
            {
                return Err(Error::Config(format!("invalid curve name {:?}", c.name)));
            }
            if !names.insert(c.name.as_str()) {
                return Err(Error::Config(format!("duplicate curve name {:?}", c.name)));
            }
            if let Interaction::Finite(l) = c.interaction {
                Interaction::finite(l).map_err(config_error)?;
            }
            c.disorder.build().map_err(config_error)?;
            rho_grid(c.rho_min, c.rho_max, c.points).map_err(config_error)?;
        }
        Ok(())
    }
}

fn config_error(e: Error) -> Error {
    match e {
        Error::Domain(m) => Error::Config(m),
        other => other,
    }
}

/// Process exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Domain(_) => 2,
        Error::InvariantViolation(_) => 3,
        _ => 1,
    }
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    format_version: u32,
    command: Command,
    config: &'a RunConfig,
    result: T,
}

fn envelope_json<T: Serialize>(cfg: &RunConfig, command: Command, result: T) -> Result<String> {
    let env = Envelope {
        format_version: FORMAT_VERSION,
        command,
        config: cfg,
        result,
    };
    let mut s = serde_json::to_string_pretty(&env).map_err(|e| Error::Io(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

/// `#`-prefixed preamble carrying the format version and resolved config.
fn comment_header(cfg: &RunConfig, command: Command) -> Result<String> {
    let json = serde_json::to_string(cfg).map_err(|e| Error::Io(e.to_string()))?;
    let cmd = serde_json::to_string(&command).map_err(|e| Error::Io(e.to_string()))?;
    Ok(format!("# format_version: {FORMAT_VERSION}\n# command: {}\n# config: {json}\n", cmd.trim_matches('"')))
}

fn write(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, contents)?;
    Ok(())
}

fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x}")
    }
}

/// Computes every configured curve; point order is independent of the
/// thread count.
pub fn compute_curves(cfg: &RunConfig) -> Result<Vec<CriticalCurve>> {
    let mut tasks = Vec::new();
    let mut built = Vec::with_capacity(cfg.curves.len());
    for (i, c) in cfg.curves.iter().enumerate() {
        let spec = c.disorder.build().map_err(config_error)?;
        for rho in rho_grid(c.rho_min, c.rho_max, c.points).map_err(config_error)? {
            tasks.push((i, rho));
        }
        built.push(spec);
    }
    let points: Vec<CriticalPoint> = tasks
        .par_iter()
        .map(|&(i, rho)| critical_point(rho, cfg.curves[i].interaction, &built[i], &cfg.solver))
        .collect();
    let mut curves: Vec<CriticalCurve> = cfg
        .curves
        .iter()
        .zip(built)
        .map(|(c, spec)| CriticalCurve {
            interaction: c.interaction,
            spec,
            config: cfg.solver,
            points: Vec::new(),
        })
        .collect();
    for (&(i, _), p) in tasks.iter().zip(points) {
        curves[i].points.push(p);
    }
    Ok(curves)
}

fn gnuplot_script(name: &str, beta_max: f64) -> String {
    format!(
        "# beta_c against rho; divergent densities are drawn as vertical markers\n\
         set datafile separator ','\n\
         set datafile commentschars '#'\n\
         set key autotitle columnhead\n\
         set xlabel 'rho'\n\
         set ylabel 'beta_c'\n\
         set title '{name}'\n\
         bmax = {bm}\n\
         plot 'curve.csv' using 1:(strcol(4) eq 'converged' ? $2 : 1/0) with linespoints title 'beta_c', \\\n\
         \x20    'curve.csv' using 1:(strcol(4) eq 'divergent' ? bmax : 1/0) with impulses dashtype 2 title 'divergent'\n",
        bm = fmt_f64(beta_max)
    )
}

fn cmd_curve(cfg: &RunConfig, out: &Path) -> Result<String> {
    let curves = compute_curves(cfg)?;
    let header = comment_header(cfg, Command::Curve)?;
    let mut summary = String::new();
    for (c, curve) in cfg.curves.iter().zip(&curves) {
        let dir = out.join(&c.name);
        write(&dir.join("curve.csv"), &format!("{header}{}", curve.to_csv()))?;
        write(&dir.join("curve.json"), &envelope_json(cfg, Command::Curve, curve)?)?;
        write(&dir.join("curve.gp"), &format!("{header}{}", gnuplot_script(&c.name, cfg.solver.beta_max)))?;
        let count = |label: &str| curve.points.iter().filter(|p| p.status.label() == label).count();
        let _ = writeln!(
            summary,
            "{}: {} points, {} converged, {} divergent, {} failed",
            c.name,
            curve.points.len(),
            count("converged"),
            count("divergent"),
            count("failed")
        );
    }
    Ok(summary)
}

fn cmd_constants(cfg: &RunConfig, out: &Path) -> Result<String> {
    let s = &cfg.constants;
    let rows: Vec<ConstantEntry> = table(s.lambda, s.p, s.eps, s.k);
    write(&out.join("constants.json"), &envelope_json(cfg, Command::Constants, &rows)?)?;
    let width = rows.iter().map(|r| r.name.len()).max().unwrap_or(0);
    let mut text = format!("lambda = {}, p = {}, eps = {}, k = {}\n", s.lambda, s.p, s.eps, s.k);
    for r in &rows {
        let v = r.value.map_or_else(|| "n/a".to_string(), fmt_f64);
        let _ = write!(text, "{:<width$}  {v}", r.name);
        if !r.note.is_empty() {
            let _ = write!(text, "  ({})", r.note);
        }
        text.push('\n');
    }
    Ok(text)
}

#[derive(Debug, Clone, Copy, Serialize)]
struct PressureRow {
    beta: f64,
    mu: f64,
    p: f64,
    r_star: f64,
    bec: bool,
}

fn cmd_pressure(cfg: &RunConfig, out: &Path) -> Result<String> {
    let s = &cfg.pressure;
    let spec = s.disorder.build().map_err(config_error)?;
    let betas = s.beta.values("beta")?;
    let mus = s.mu.values("mu")?;
    let cells: Vec<(f64, f64)> = betas.iter().flat_map(|&b| mus.iter().map(move |&m| (b, m))).collect();
    let quad = cfg.solver.quadrature;
    let rows: Vec<PressureRow> = cells
        .par_iter()
        .map(|&(beta, mu)| {
            let params = ModelParams::new(beta, mu, s.interaction).map_err(config_error)?;
            let r = variational_pressure(&params, &spec, &quad)?;
            Ok(PressureRow {
                beta,
                mu,
                p: r.pressure,
                r_star: r.r_star,
                bec: r.bec,
            })
        })
        .collect::<Result<_>>()?;
    let mut csv = comment_header(cfg, Command::Pressure)?;
    csv.push_str("beta,mu,p,r_star,bec\n");
    for r in &rows {
        let _ = writeln!(csv, "{},{},{},{},{}", r.beta, r.mu, fmt_f64(r.p), fmt_f64(r.r_star), r.bec);
    }
    write(&out.join("pressure.csv"), &csv)?;
    write(&out.join("pressure.json"), &envelope_json(cfg, Command::Pressure, &rows)?)?;
    let condensed = rows.iter().filter(|r| r.bec).count();
    Ok(format!("{} grid points, {condensed} condensed\n", rows.len()))
}

fn ids_rows(cfg: &RunConfig) -> Result<Vec<IdsPoint>> {
    let s = &cfg.ids;
    let spec = s.disorder.build().map_err(config_error)?;
    let grid = s.energy.values("energy")?;
    ids_empirical(s.v, &spec, s.samples, &grid, cfg.seed).map_err(config_error)
}

fn write_ids(cfg: &RunConfig, command: Command, out: &Path, rows: &[IdsPoint]) -> Result<()> {
    let mut csv = comment_header(cfg, command)?;
    csv.push_str("E,N_bar,stderr\n");
    for r in rows {
        let _ = writeln!(csv, "{},{},{}", r.e, r.n_bar, r.stderr);
    }
    write(&out.join("ids.csv"), &csv)?;
    write(&out.join("ids.json"), &envelope_json(cfg, command, rows)?)
}

fn cmd_ids(cfg: &RunConfig, out: &Path) -> Result<String> {
    let rows = ids_rows(cfg)?;
    write_ids(cfg, Command::Ids, out, &rows)?;
    Ok(format!("{} energies, V = {}, {} samples\n", rows.len(), cfg.ids.v, cfg.ids.samples))
}

fn cmd_oracle(cfg: &RunConfig, out: &Path) -> Result<String> {
    let s = &cfg.oracle;
    if s.volumes.is_empty() {
        return Err(Error::Config("oracle.volumes must not be empty".into()));
    }
    let spec = s.disorder.build().map_err(config_error)?;
    let rows: Vec<GapRow> =
        gap_sequence(&s.volumes, s.n_max, &spec, s.beta, s.mu, s.lambda, cfg.seed).map_err(|e| match e {
            Error::DimensionGuard(m) => Error::Config(m),
            other => config_error(other),
        })?;
    let mut csv = comment_header(cfg, Command::Oracle)?;
    csv.push_str("V,beta,mu,lambda,seed,p_exact,p_appr,gap\n");
    for r in &rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{}",
            r.v, r.beta, r.mu, r.lambda, r.seed, r.p_exact, r.p_appr, r.gap
        );
    }
    write(&out.join("oracle.csv"), &csv)?;
    write(&out.join("oracle.json"), &envelope_json(cfg, Command::Oracle, &rows)?)?;
    let ids = ids_rows(cfg)?;
    write_ids(cfg, Command::Oracle, out, &ids)?;
    let mut text = String::new();
    for r in &rows {
        let _ = writeln!(text, "V = {}: gap = {:e}", r.v, r.gap);
    }
    Ok(text)
}

/// Runs one command; returns the text summary printed on success.
pub fn execute(command: Command, cfg: &RunConfig, out: &Path) -> Result<String> {
    match command {
        Command::Curve => cmd_curve(cfg, out),
        Command::Constants => cmd_constants(cfg, out),
        Command::Pressure => cmd_pressure(cfg, out),
        Command::Oracle => cmd_oracle(cfg, out),
        Command::Ids => cmd_ids(cfg, out),
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = (|| {
        let cfg = RunConfig::resolve(&cli.common)?;
        let mut pool = rayon::ThreadPoolBuilder::new();
        if let Some(j) = cli.common.jobs {
            if j == 0 {
                return Err(Error::Config("--jobs must be >= 1".into()));
            }
            pool = pool.num_threads(j);
        }
        let pool = pool.build().map_err(|e| Error::Config(e.to_string()))?;
        pool.install(|| execute(cli.command, &cfg, &cli.common.out))
    })();
    match result {
        Ok(text) => {
            print!("{text}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
