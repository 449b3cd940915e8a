//! Experiment configuration, output files and the subcommands behind the
//! `double-phase` binary.
//!
//! # Configuration
//!
//! A TOML file; every key is optional and falls back to the default
//! experiment (the unit cube with 16 nodes per axis, `p1 = 2`,
//! `p2 = 2 + 0.5 sin(pi x1)`, `q = 4`).
//!
//! ```toml
//! seed = 24301                # sampling seed (--seed overrides)
//! out = "runs/default"        # output directory (--out overrides)
//!
//! [grid]
//! dim = 3                     # 2 or 3
//! res = 16                    # nodes per axis, at least 4
//! extent = [1.0, 1.0, 1.0]    # box side lengths
//!
//! [exponents]                 # expressions in x1..xN, see `FieldExpr`
//! p1 = "2"
//! p2 = "2 + 0.5*sin(pi*x1)"
//! q = "4"
//!
//! [problem]
//! lambda = 1.0                # solve-min: defaults to twice the lambda* estimate
//! lambda_start = 0.25         # lambda grid for the lambda* search
//! lambda_step = 0.25
//! lambda_count = 40000
//!
//! [bump]                      # plateau region and height of the test bump
//! center = [0.5, 0.5, 0.5]
//! side = 0.5
//! t0 = 2.0
//!
//! [solver]
//! tol = 1e-6
//! max_iter = 5000
//! path_points = 40
//! doubling_limit = 60
//! snapshot_every = 1         # path energy profile every n iterations (0: off)
//!
//! [mountain_pass]
//! delta = 0.5                 # distinctness radius (default: relative)
//! seeds = [
//!   { lo = [0.15, 0.3, 0.3], hi = [0.4, 0.7, 0.7], amplitude = 2.0 },
//!   { lo = [0.6, 0.3, 0.3], hi = [0.85, 0.7, 0.7], amplitude = 2.0 },
//! ]
//!
//! [verify]                    # sample counts, see `SuiteSizes`
//! coercivity = 500
//!
//! [norm]
//! field = "field.csv"         # --field overrides
//! ```
//!
//! Errors in the file are reported with the line they occur on.
//!
//! # Files
//!
//! Fields are CSV with header `x1,...,xN,value` and one row per node in
//! lexicographic order (last axis fastest). Numbers are written in the
//! shortest form that reads back to the same `f64`. Reports are JSON. Each
//! run writes `manifest.json` listing every output with its SHA-256.
//!
//! # Exit codes
//!
//! `0` success, `1` a check or solve failed, `2` usage or configuration error.

use std::fmt::Write as _;
use std::fs;
use std::ops::Range;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};
use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use toml::Spanned;

use crate::discretization::{DomainGrid, GridFunction};
use crate::energy::{Energy, EnergyReport, Functional};
use crate::error::{Error, Result};
use crate::exponents::{
    build_exponent_set, validate_hypotheses, ExponentField, ExponentSet, HypothesisReport, Theorem,
};
use crate::expr::FieldExpr;
use crate::solvers::{
    bump_function, find_endpoint, lambda_star_search, minimize_energy, mountain_pass,
    multi_solution_search, shaped_bump, uniform_lambda_grid, LambdaStarReport, SeedOutcome,
    SolveResult, SolverOptions, SubBox, Termination,
};
use crate::varexp::{luxemburg_norm, modular, sobolev_norm};
use crate::verification::{
    certify_weak_solution, run_suite, CheckReport, SuiteSizes, DEFAULT_SEED,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Relative change of the critical energy allowed when the path resolution
/// doubles.
pub const RESOLUTION_TOL: f64 = 0.05;
/// Mountain-pass path profiles are recorded this often unless configured.
pub const DEFAULT_SNAPSHOT_EVERY: usize = 1;
/// Random test functions in each weak-form certificate.
pub const CERTIFICATE_TESTS: usize = 20;

#[derive(Debug, Parser)]
#[command(
    name = "double-phase",
    version,
    about = "Double-phase p(x)-Laplacian experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Experiment configuration (TOML); defaults apply when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Sampling seed; overrides the config.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Draw a fresh sampling seed (recorded in the manifest).
    #[arg(long, global = true, conflicts_with = "seed")]
    pub random_seed: bool,
    /// Output directory; overrides the config.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Run solvers even when the exponent hypotheses fail.
    #[arg(long, global = true)]
    pub override_hypotheses: bool,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Run every inequality and consistency check.
    Verify,
    /// Bump, lambda* search and global minimisation of I.
    SolveMin,
    /// Mountain-pass critical points of J from every configured seed.
    SolveMp,
    /// Modular, Luxemburg and Sobolev norms of a field file.
    Norm {
        /// Field CSV; overrides `[norm] field`.
        #[arg(long, value_name = "PATH")]
        field: Option<PathBuf>,
    },
    /// lambda* search on the configured bump.
    LambdaStar,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Verify => "verify",
            Command::SolveMin => "solve-min",
            Command::SolveMp => "solve-mp",
            Command::Norm { .. } => "norm",
            Command::LambdaStar => "lambda-star",
        }
    }
}

// ---------------------------------------------------------------- config

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    seed: Option<Spanned<u64>>,
    out: Option<String>,
    grid: Option<RawGrid>,
    exponents: Option<RawExponents>,
    problem: Option<RawProblem>,
    bump: Option<RawBump>,
    solver: Option<RawSolver>,
    mountain_pass: Option<RawMountainPass>,
    verify: Option<SuiteSizes>,
    norm: Option<RawNorm>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    dim: Option<Spanned<usize>>,
    res: Option<Spanned<usize>>,
    extent: Option<Spanned<Vec<f64>>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExponents {
    p1: Option<Spanned<String>>,
    p2: Option<Spanned<String>>,
    q: Option<Spanned<String>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProblem {
    lambda: Option<Spanned<f64>>,
    lambda_start: Option<Spanned<f64>>,
    lambda_step: Option<Spanned<f64>>,
    lambda_count: Option<Spanned<usize>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBump {
    center: Option<Spanned<Vec<f64>>>,
    side: Option<Spanned<f64>>,
    t0: Option<Spanned<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    tol: Option<Spanned<f64>>,
    max_iter: Option<usize>,
    path_points: Option<Spanned<usize>>,
    doubling_limit: Option<usize>,
    snapshot_every: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMountainPass {
    delta: Option<Spanned<f64>>,
    seeds: Option<Spanned<Vec<SeedSpec>>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNorm {
    field: Option<String>,
}

/// Seed direction for the mountain pass: a bump on `[lo, hi]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedSpec {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
}

fn default_amplitude() -> f64 {
    2.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LambdaGridSpec {
    pub start: f64,
    pub step: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BumpSpec {
    pub center: Vec<f64>,
    pub side: f64,
    pub t0: f64,
}

impl BumpSpec {
    pub fn region(&self) -> SubBox {
        SubBox::centered(&self.center, self.side)
    }
}

/// A validated experiment. Serialises to the resolved values (defaults
/// filled in), which the manifest echoes.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentConfig {
    pub dim: usize,
    pub res: usize,
    pub extent: Vec<f64>,
    pub p1: String,
    pub p2: String,
    pub q: String,
    pub lambda: Option<f64>,
    pub lambda_grid: LambdaGridSpec,
    pub bump: BumpSpec,
    pub solver: SolverOptions,
    pub seeds: Vec<SeedSpec>,
    pub delta: Option<f64>,
    pub verify: SuiteSizes,
    pub seed: u64,
    pub out: PathBuf,
    pub norm_field: Option<PathBuf>,
    #[serde(skip)]
    grid: Arc<DomainGrid>,
    #[serde(skip)]
    exponents: ExponentSet,
}

impl ExperimentConfig {
    pub fn grid(&self) -> &Arc<DomainGrid> {
        &self.grid
    }

    pub fn exponents(&self) -> &ExponentSet {
        &self.exponents
    }

    pub fn lambda_values(&self) -> Vec<f64> {
        uniform_lambda_grid(
            self.lambda_grid.start,
            self.lambda_grid.step,
            self.lambda_grid.count,
        )
    }

    pub fn bump(&self) -> Result<GridFunction> {
        bump_function(self.grid.clone(), self.bump.t0, &self.bump.region())
    }

    pub fn seed_fields(&self) -> Result<Vec<GridFunction>> {
        self.seeds
            .iter()
            .map(|s| {
                shaped_bump(
                    self.grid.clone(),
                    s.amplitude,
                    &SubBox::new(s.lo.clone(), s.hi.clone()),
                )
            })
            .collect()
    }
}

/// Default mountain-pass seeds: two bumps with disjoint supports, one in
/// each half of the box along the first axis.
fn default_seeds(dim: usize, extent: &[f64]) -> Vec<SeedSpec> {
    let along = |a: f64, b: f64| {
        let mut lo: Vec<f64> = extent.iter().map(|e| 0.3 * e).collect();
        let mut hi: Vec<f64> = extent.iter().map(|e| 0.7 * e).collect();
        lo[0] = a * extent[0];
        hi[0] = b * extent[0];
        debug_assert_eq!(lo.len(), dim);
        SeedSpec {
            lo,
            hi,
            amplitude: default_amplitude(),
        }
    };
    vec![along(0.15, 0.4), along(0.6, 0.85)]
}

struct Source<'a> {
    text: &'a str,
}

impl Source<'_> {
    fn line(&self, span: &Range<usize>) -> usize {
        let end = span.start.min(self.text.len());
        self.text[..end].matches('\n').count() + 1
    }

    fn err(&self, span: Option<&Range<usize>>, message: impl Into<String>) -> Error {
        Error::Config {
            line: span.map_or(0, |s| self.line(s)),
            message: message.into(),
        }
    }
}

fn value<T: Clone>(v: &Option<Spanned<T>>, default: T) -> (T, Option<Range<usize>>) {
    match v {
        Some(s) => (s.get_ref().clone(), Some(s.span())),
        None => (default, None),
    }
}

/// Parses and validates a configuration. Errors are [`Error::Config`] with
/// the 1-based line of the offending key (0 when it has no source line).
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let src = Source { text };
    let raw: RawConfig =
        toml::from_str(text).map_err(|e| src.err(e.span().as_ref(), e.message().trim()))?;

    let g = raw.grid.unwrap_or_default();
    let (dim, dim_span) = value(&g.dim, 3);
    if !(dim == 2 || dim == 3) {
        return Err(src.err(
            dim_span.as_ref(),
            format!("grid.dim must be 2 or 3, got {dim}"),
        ));
    }
    let (res, res_span) = value(&g.res, 16);
    let (extent, extent_span) = value(&g.extent, vec![1.0; dim]);
    if extent.len() != dim {
        return Err(src.err(
            extent_span.as_ref(),
            format!("grid.extent needs {dim} entries, got {}", extent.len()),
        ));
    }
    let grid = DomainGrid::new(&extent, &vec![res; dim]).map_err(|e| {
        let span = if extent.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
            extent_span.as_ref()
        } else {
            res_span.as_ref()
        };
        src.err(span, e.to_string())
    })?;
    let grid = Arc::new(grid);

    let x = raw.exponents.unwrap_or_default();
    let (p1, p1_span) = value(&x.p1, "2".to_string());
    let (p2, p2_span) = value(&x.p2, "2 + 0.5*sin(pi*x1)".to_string());
    let (q, q_span) = value(&x.q, "4".to_string());
    let parse = |name: &str, text: &str, span: &Option<Range<usize>>| {
        FieldExpr::parse(text).map_err(|e| src.err(span.as_ref(), format!("exponents.{name}: {e}")))
    };
    let (p1e, p2e, qe) = (
        parse("p1", &p1, &p1_span)?,
        parse("p2", &p2, &p2_span)?,
        parse("q", &q, &q_span)?,
    );
    let named = [
        ("p1", &p1e, &p1_span),
        ("p2", &p2e, &p2_span),
        ("q", &qe, &q_span),
    ];
    if let Some((name, e, span)) = named.iter().find(|(_, e, _)| e.max_coord() > dim) {
        return Err(src.err(
            span.as_ref(),
            format!(
                "exponents.{name} uses x{} on a {dim}-dimensional grid",
                e.max_coord()
            ),
        ));
    }
    let exponents = build_exponent_set(&p1e, &p2e, &qe, grid.clone()).map_err(|e| {
        let span = match &e {
            Error::RejectsNonCPlus { field, .. } => named
                .iter()
                .find(|(name, _, _)| name == field)
                .map_or(&p1_span, |(_, _, s)| *s),
            _ => &p1_span,
        };
        src.err(span.as_ref(), e.to_string())
    })?;

    let pr = raw.problem.unwrap_or_default();
    let (lambda, lambda_span) = match &pr.lambda {
        Some(s) => (Some(*s.get_ref()), Some(s.span())),
        None => (None, None),
    };
    if let Some(l) = lambda {
        if !(l >= 0.0 && l.is_finite()) {
            return Err(src.err(
                lambda_span.as_ref(),
                format!("problem.lambda must be finite and >= 0, got {l}"),
            ));
        }
    }
    let (start, start_span) = value(&pr.lambda_start, 0.25);
    let (step, step_span) = value(&pr.lambda_step, 0.25);
    let (count, count_span) = value(&pr.lambda_count, 40_000);
    if !(start > 0.0 && start.is_finite()) {
        return Err(src.err(start_span.as_ref(), "problem.lambda_start must be positive"));
    }
    if !(step > 0.0 && step.is_finite()) {
        return Err(src.err(step_span.as_ref(), "problem.lambda_step must be positive"));
    }
    if count == 0 {
        return Err(src.err(count_span.as_ref(), "problem.lambda_count must be positive"));
    }

    let b = raw.bump.unwrap_or_default();
    let (center, center_span) = value(&b.center, extent.iter().map(|e| 0.5 * e).collect());
    let (side, side_span) = value(&b.side, 0.5);
    let (t0, t0_span) = value(&b.t0, 2.0);
    if center.len() != dim {
        return Err(src.err(
            center_span.as_ref(),
            format!("bump.center needs {dim} entries"),
        ));
    }
    if !(side > 0.0) {
        return Err(src.err(side_span.as_ref(), "bump.side must be positive"));
    }
    let bump = BumpSpec { center, side, t0 };
    if let Err(e) = bump_function(grid.clone(), t0, &bump.region()) {
        let span = if matches!(e, Error::SubdomainTouchesBoundary) {
            side_span.or(center_span)
        } else {
            t0_span
        };
        return Err(src.err(span.as_ref(), format!("bump: {e}")));
    }

    let so = raw.solver.unwrap_or_default();
    let defaults = SolverOptions::default();
    let (tol, tol_span) = value(&so.tol, defaults.tol);
    if !(tol > 0.0) {
        return Err(src.err(tol_span.as_ref(), "solver.tol must be positive"));
    }
    let (path_points, pp_span) = value(&so.path_points, defaults.path_points);
    if path_points < 2 {
        return Err(src.err(pp_span.as_ref(), "solver.path_points must be at least 2"));
    }
    let solver = SolverOptions {
        tol,
        max_iter: so.max_iter.unwrap_or(defaults.max_iter),
        path_points,
        doubling_limit: so.doubling_limit.unwrap_or(defaults.doubling_limit),
        snapshot_every: so.snapshot_every.unwrap_or(DEFAULT_SNAPSHOT_EVERY),
        override_hypotheses: false,
    };

    let mp = raw.mountain_pass.unwrap_or_default();
    let (seeds, seeds_span) = value(&mp.seeds, default_seeds(dim, &extent));
    if seeds.is_empty() {
        return Err(src.err(seeds_span.as_ref(), "mountain_pass.seeds must not be empty"));
    }
    for (i, s) in seeds.iter().enumerate() {
        let region = SubBox::new(s.lo.clone(), s.hi.clone());
        let ok = s.lo.len() == dim
            && s.hi.len() == dim
            && s.amplitude != 0.0
            && s.amplitude.is_finite()
            && shaped_bump(grid.clone(), s.amplitude, &region).is_ok_and(|u| u.max_abs() > 0.0);
        if !ok {
            return Err(src.err(
                seeds_span.as_ref(),
                format!("mountain_pass.seeds[{i}] must be a nonzero bump on a {dim}-dimensional box inside the domain"),
            ));
        }
    }
    let delta = match &mp.delta {
        Some(d) if !(*d.get_ref() > 0.0) => {
            return Err(src.err(Some(&d.span()), "mountain_pass.delta must be positive"));
        }
        Some(d) => Some(*d.get_ref()),
        None => None,
    };

    Ok(ExperimentConfig {
        dim,
        res,
        extent,
        p1,
        p2,
        q,
        lambda,
        lambda_grid: LambdaGridSpec { start, step, count },
        bump,
        solver,
        seeds,
        delta,
        verify: raw.verify.unwrap_or_default(),
        seed: raw.seed.map_or(DEFAULT_SEED, |s| *s.get_ref()),
        out: PathBuf::from(raw.out.unwrap_or_else(|| "double-phase-out".to_string())),
        norm_field: raw.norm.and_then(|n| n.field).map(PathBuf::from),
        grid,
        exponents,
    })
}

/// Reads and parses a config file; `None` gives the default experiment.
pub fn load_config(path: Option<&Path>) -> Result<ExperimentConfig> {
    match path {
        None => parse_config(""),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Error::Config {
                line: 0,
                message: format!("cannot read {}: {e}", p.display()),
            })?;
            parse_config(&text)
        }
    }
}

// ---------------------------------------------------------------- files

/// Shortest round-trip text of an `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:e}")
}

/// Field CSV: header `x1..xN,value`, one node per row.
pub fn field_csv(u: &GridFunction) -> String {
    let g = u.grid();
    let mut out = String::new();
    for a in 1..=g.dim() {
        let _ = write!(out, "x{a},");
    }
    out.push_str("value\n");
    for (n, v) in u.values().iter().enumerate() {
        for x in g.node_coords(n) {
            out.push_str(&fmt_f64(x));
            out.push(',');
        }
        out.push_str(&fmt_f64(*v));
        out.push('\n');
    }
    out
}

/// Parses a field CSV against `grid`. Any disagreement with the grid (node
/// count, column count, coordinates) is a [`Error::ShapeMismatch`] or
/// [`Error::Config`].
pub fn read_field_csv(text: &str, grid: &Arc<DomainGrid>) -> Result<GridFunction> {
    let dim = grid.dim();
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or(Error::ShapeMismatch {
        expected: grid.node_count(),
        found: 0,
    })?;
    let expected: Vec<String> = (1..=dim)
        .map(|a| format!("x{a}"))
        .chain(["value".to_string()])
        .collect();
    let found: Vec<&str> = header.split(',').map(str::trim).collect();
    if found != expected {
        return Err(Error::Config {
            line: 1,
            message: format!("field header must be `{}`", expected.join(",")),
        });
    }
    let mut rows = Vec::with_capacity(grid.node_count());
    for (i, line) in lines {
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if cols.len() != dim + 1 {
            return Err(Error::Config {
                line: i + 1,
                message: format!("expected {} columns, got {}", dim + 1, cols.len()),
            });
        }
        let nums = cols
            .iter()
            .map(|c| c.parse::<f64>())
            .collect::<std::result::Result<Vec<f64>, _>>()
            .map_err(|e| Error::Config {
                line: i + 1,
                message: format!("bad number: {e}"),
            })?;
        rows.push((i + 1, nums));
    }
    if rows.len() != grid.node_count() {
        return Err(Error::ShapeMismatch {
            expected: grid.node_count(),
            found: rows.len(),
        });
    }
    let tol = 1e-9 * grid.extent().iter().copied().fold(0.0, f64::max);
    let mut values = Vec::with_capacity(rows.len());
    for (n, (line, nums)) in rows.into_iter().enumerate() {
        let coords = grid.node_coords(n);
        if coords.iter().zip(&nums).any(|(a, b)| (a - b).abs() > tol) {
            return Err(Error::Config {
                line,
                message: format!("coordinates do not match node {n} of the configured grid"),
            });
        }
        values.push(nums[dim]);
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    GridFunction::new(grid.clone(), values, false)
}

fn history_csv(r: &SolveResult) -> String {
    let mut out = String::from("iteration,energy,residual\n");
    for (i, h) in r.history.iter().enumerate() {
        let _ = writeln!(out, "{i},{},{}", fmt_f64(h.energy), fmt_f64(h.residual));
    }
    out
}

fn profile_csv(r: &SolveResult) -> String {
    let k = r.path_profiles.first().map_or(0, |p| p.energies.len());
    let mut out = String::from("iteration");
    for j in 0..k {
        let _ = write!(out, ",z{j}");
    }
    out.push('\n');
    for p in &r.path_profiles {
        out.push_str(&p.iteration.to_string());
        for e in &p.energies {
            out.push(',');
            out.push_str(&fmt_f64(*e));
        }
        out.push('\n');
    }
    out
}

fn matrix_csv(m: &[Vec<f64>]) -> String {
    let mut out = String::from("solution");
    for j in 0..m.len() {
        let _ = write!(out, ",s{j}");
    }
    out.push('\n');
    for (i, row) in m.iter().enumerate() {
        out.push_str(&format!("s{i}"));
        for v in row {
            out.push(',');
            out.push_str(&fmt_f64(*v));
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputEntry {
    pub file: String,
    pub bytes: usize,
    pub sha256: String,
}

/// Output directory that records the checksum of every file it writes.
pub struct OutputSet {
    dir: PathBuf,
    entries: Vec<OutputEntry>,
}

impl OutputSet {
    pub fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            entries: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, contents: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, contents)?;
        self.entries.push(OutputEntry {
            file: name.to_string(),
            bytes: contents.len(),
            sha256: hex::encode(Sha256::digest(contents)),
        });
        Ok(())
    }

    pub fn json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| Error::Io(e.into()))?;
        bytes.push(b'\n');
        self.write(name, &bytes)
    }

    pub fn entries(&self) -> &[OutputEntry] {
        &self.entries
    }
}

/// `manifest.json`: what ran, on which inputs, and what it wrote.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config: ExperimentConfig,
    pub seed: u64,
    pub seed_source: &'static str,
    pub override_hypotheses: bool,
    pub hypotheses: Vec<HypothesisReport>,
    pub notes: Vec<String>,
    /// Unix seconds; `SOURCE_DATE_EPOCH` pins both when set.
    pub started_at: u64,
    pub finished_at: u64,
    pub exit_code: i32,
    pub outputs: Vec<OutputEntry>,
}

fn timestamp() -> u64 {
    if let Some(t) = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|v| v.parse().ok())
    {
        return t;
    }
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

/// Re-hashes every output listed in `dir/manifest.json`; returns the files
/// whose contents no longer match.
pub fn validate_manifest(dir: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(dir.join("manifest.json"))?;
    let v: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::Io(e.into()))?;
    let entries: Vec<OutputEntry> =
        serde_json::from_value(v["outputs"].clone()).map_err(|e| Error::Io(e.into()))?;
    let mut bad = Vec::new();
    for e in entries {
        match fs::read(dir.join(&e.file)) {
            Ok(bytes)
                if hex::encode(Sha256::digest(&bytes)) == e.sha256 && bytes.len() == e.bytes => {}
            _ => bad.push(e.file),
        }
    }
    Ok(bad)
}

// ---------------------------------------------------------------- commands

/// Run-wide settings resolved from the command line.
#[derive(Debug, Clone)]
pub struct RunContext {
    pub seed: u64,
    pub seed_source: &'static str,
    pub override_hypotheses: bool,
    pub out: PathBuf,
}

/// What a command produced: its exit code, notes for the manifest, and the
/// hypothesis reports it consulted.
struct Outcome {
    code: i32,
    notes: Vec<String>,
    hypotheses: Vec<HypothesisReport>,
}

fn hypotheses(s: &ExponentSet) -> Vec<HypothesisReport> {
    vec![
        validate_hypotheses(s, Theorem::T1),
        validate_hypotheses(s, Theorem::T2),
    ]
}

fn gate(s: &ExponentSet, theorem: Theorem, ctx: &RunContext, notes: &mut Vec<String>) -> bool {
    let report = validate_hypotheses(s, theorem);
    if report.pass {
        return true;
    }
    let failed: Vec<String> = report.failures().map(|c| c.name.clone()).collect();
    if ctx.override_hypotheses {
        let msg = format!(
            "hypotheses of {theorem} fail ({}); continuing because of --override-hypotheses",
            failed.join(", ")
        );
        eprintln!("warning: {msg}");
        notes.push(msg);
        true
    } else {
        eprintln!("error: hypotheses of {theorem} fail: {}", failed.join(", "));
        notes.push(format!("refused: hypotheses of {theorem} fail"));
        false
    }
}

#[derive(Serialize)]
struct CheckSummary<'a> {
    name: &'a str,
    pass: bool,
    samples: usize,
    failures: usize,
}

#[derive(Serialize)]
struct VerifySummary<'a> {
    lambda: f64,
    hypotheses_pass: bool,
    checks: Vec<CheckSummary<'a>>,
    pass: bool,
}

/// Runs the whole check suite and writes one report per check.
pub fn cmd_verify(cfg: &ExperimentConfig, ctx: &RunContext, out: &mut OutputSet) -> Result<i32> {
    Ok(verify(cfg, ctx, out)?.code)
}

fn verify(cfg: &ExperimentConfig, ctx: &RunContext, out: &mut OutputSet) -> Result<Outcome> {
    let s = cfg.exponents();
    let hyp = hypotheses(s);
    out.json("hypotheses.json", &hyp)?;
    let hyp_pass = hyp.iter().all(|h| h.pass);
    for h in &hyp {
        println!(
            "{:<34} {}",
            format!("hypotheses {}", h.theorem),
            if h.pass { "pass" } else { "FAIL" }
        );
    }
    let lambda = cfg.lambda.unwrap_or(1.0);
    let reports = run_suite(lambda, s, &cfg.verify, ctx.seed);
    for r in &reports {
        out.json(&format!("checks/{}.json", r.name), r)?;
        let detail = r
            .error
            .as_deref()
            .map(|e| format!(" ({e})"))
            .unwrap_or_default();
        println!(
            "{:<34} {}{detail}",
            r.name,
            if r.pass { "pass" } else { "FAIL" }
        );
    }
    let pass = hyp_pass && reports.iter().all(|r| r.pass);
    let summary = VerifySummary {
        lambda,
        hypotheses_pass: hyp_pass,
        checks: reports
            .iter()
            .map(|r| CheckSummary {
                name: &r.name,
                pass: r.pass,
                samples: r.samples,
                failures: r.failures,
            })
            .collect(),
        pass,
    };
    out.json("summary.json", &summary)?;
    let mut notes = Vec::new();
    if cfg.lambda.is_none() {
        notes.push("lambda not set; checks use lambda = 1".to_string());
    }
    Ok(Outcome {
        code: if pass { EXIT_OK } else { EXIT_FAILURE },
        notes,
        hypotheses: hyp,
    })
}

fn lambda_star(cfg: &ExperimentConfig) -> Result<LambdaStarReport> {
    let u0 = cfg.bump()?;
    lambda_star_search(
        cfg.exponents(),
        &u0,
        cfg.bump.t0,
        &cfg.bump.region(),
        &cfg.lambda_values(),
    )
}

/// The `lambda*` search on its own.
pub fn cmd_lambda_star(
    cfg: &ExperimentConfig,
    ctx: &RunContext,
    out: &mut OutputSet,
) -> Result<i32> {
    Ok(run_lambda_star(cfg, ctx, out)?.code)
}

fn run_lambda_star(
    cfg: &ExperimentConfig,
    _ctx: &RunContext,
    out: &mut OutputSet,
) -> Result<Outcome> {
    let hyp = hypotheses(cfg.exponents());
    let rep = lambda_star(cfg)?;
    println!("lambda_hat       {}", rep.lambda_hat);
    println!("lambda_exact     {}", rep.lambda_exact);
    println!("analytic_bound   {}", rep.analytic_bound);
    out.json("lambda_star.json", &rep)?;
    Ok(Outcome {
        code: EXIT_OK,
        notes: Vec::new(),
        hypotheses: hyp,
    })
}

#[derive(Serialize)]
struct SolveReport<'a> {
    lambda: f64,
    termination: Termination,
    iterations: usize,
    residual: f64,
    energy: &'a EnergyReport,
    sobolev_norm_m: f64,
    certificate: &'a CheckReport,
}

fn solve_report<'a>(
    lambda: f64,
    r: &'a SolveResult,
    s: &ExponentSet,
    cert: &'a CheckReport,
) -> Result<SolveReport<'a>> {
    Ok(SolveReport {
        lambda,
        termination: r.termination,
        iterations: r.iterations,
        residual: r.residual,
        energy: &r.energy,
        sobolev_norm_m: sobolev_norm(&r.u, &s.m)?,
        certificate: cert,
    })
}

/// Bump, `lambda*` search and minimisation of `I` at the configured
/// `lambda` (twice the `lambda*` estimate when unset).
pub fn cmd_solve_min(cfg: &ExperimentConfig, ctx: &RunContext, out: &mut OutputSet) -> Result<i32> {
    Ok(solve_min(cfg, ctx, out)?.code)
}

fn solve_min(cfg: &ExperimentConfig, ctx: &RunContext, out: &mut OutputSet) -> Result<Outcome> {
    let s = cfg.exponents();
    let hyp = hypotheses(s);
    let mut notes = Vec::new();
    if !gate(s, Theorem::T2, ctx, &mut notes) {
        out.json("hypotheses.json", &hyp)?;
        return Ok(Outcome {
            code: EXIT_FAILURE,
            notes,
            hypotheses: hyp,
        });
    }
    let star = lambda_star(cfg)?;
    out.json("lambda_star.json", &star)?;
    let lambda = match cfg.lambda {
        Some(l) => l,
        None => {
            let l = 2.0 * star.lambda_hat;
            notes.push(format!("lambda not set; using 2 * lambda_hat = {l}"));
            l
        }
    };
    let opts = SolverOptions {
        override_hypotheses: ctx.override_hypotheses,
        ..cfg.solver
    };
    let u0 = cfg.bump()?;
    let r = minimize_energy(lambda, s, &u0, &opts)?;
    let energy = Energy::new(s, lambda, Functional::I);
    let cert = certify_weak_solution(&r, &energy, opts.tol, CERTIFICATE_TESTS, ctx.seed);
    out.write("solution.csv", field_csv(&r.u).as_bytes())?;
    out.write("history.csv", history_csv(&r).as_bytes())?;
    out.json("solve_report.json", &solve_report(lambda, &r, s, &cert)?)?;
    println!("lambda           {lambda}");
    println!(
        "termination      {:?} after {} iterations",
        r.termination, r.iterations
    );
    println!("residual         {:e}", r.residual);
    println!("energy I         {}", r.energy.total);
    println!(
        "certificate      {}",
        if cert.pass { "pass" } else { "FAIL" }
    );
    let ok = r.converged() && cert.pass;
    Ok(Outcome {
        code: if ok { EXIT_OK } else { EXIT_FAILURE },
        notes,
        hypotheses: hyp,
    })
}

#[derive(Serialize)]
struct SolutionEntry<'a> {
    index: usize,
    seed: usize,
    mirrored: bool,
    report: SolveReport<'a>,
}

#[derive(Serialize)]
struct ResolutionCheck {
    path_points: usize,
    path_points_doubled: usize,
    energy: f64,
    energy_doubled: f64,
    relative_change: f64,
    pass: bool,
}

#[derive(Serialize)]
struct MountainPassReport<'a> {
    lambda: f64,
    delta: f64,
    energies: Vec<f64>,
    seeds: &'a [SeedOutcome],
    resolution: Option<ResolutionCheck>,
    distinct_solutions: usize,
}

/// Mountain pass from every seed, mirrored pairs, deduplication, and a
/// path-resolution doubling check on the first seed.
pub fn cmd_solve_mp(cfg: &ExperimentConfig, ctx: &RunContext, out: &mut OutputSet) -> Result<i32> {
    Ok(solve_mp(cfg, ctx, out)?.code)
}

fn solve_mp(cfg: &ExperimentConfig, ctx: &RunContext, out: &mut OutputSet) -> Result<Outcome> {
    let s = cfg.exponents();
    let hyp = hypotheses(s);
    let mut notes = Vec::new();
    if !gate(s, Theorem::T1, ctx, &mut notes) {
        out.json("hypotheses.json", &hyp)?;
        return Ok(Outcome {
            code: EXIT_FAILURE,
            notes,
            hypotheses: hyp,
        });
    }
    let lambda = cfg.lambda.unwrap_or(1.0);
    if cfg.lambda.is_none() {
        notes.push("lambda not set; using 1".to_string());
    }
    let opts = SolverOptions {
        override_hypotheses: ctx.override_hypotheses,
        ..cfg.solver
    };
    let seeds = cfg.seed_fields()?;
    let rep = multi_solution_search(lambda, s, &seeds, cfg.delta, &opts)?;
    let energy = Energy::new(s, lambda, Functional::J);

    let certs: Vec<CheckReport> = rep
        .solutions
        .iter()
        .enumerate()
        .map(|(i, r)| {
            certify_weak_solution(
                r,
                &energy,
                opts.tol,
                CERTIFICATE_TESTS,
                ctx.seed.wrapping_add(i as u64),
            )
        })
        .collect();
    for (i, (r, &(seed, mirrored))) in rep.solutions.iter().zip(&rep.origins).enumerate() {
        out.write(&format!("solution_{i}.csv"), field_csv(&r.u).as_bytes())?;
        let entry = SolutionEntry {
            index: i,
            seed,
            mirrored,
            report: solve_report(lambda, r, s, &certs[i])?,
        };
        out.json(&format!("solution_{i}.json"), &entry)?;
        if !mirrored {
            out.write(&format!("history_{i}.csv"), history_csv(r).as_bytes())?;
            if !r.path_profiles.is_empty() {
                out.write(&format!("path_profile_{i}.csv"), profile_csv(r).as_bytes())?;
            }
        }
    }
    out.write("distances.csv", matrix_csv(&rep.distances).as_bytes())?;

    let resolution = match rep.solutions.iter().zip(&rep.origins).find(|(_, o)| !o.1) {
        Some((first, &(seed, _))) => {
            let (e, _) = find_endpoint(lambda, s, &seeds[seed], opts.doubling_limit)?;
            let doubled = SolverOptions {
                path_points: 2 * opts.path_points,
                snapshot_every: 0,
                ..opts
            };
            let fine = mountain_pass(lambda, s, &e, &doubled)?;
            let (a, b) = (first.energy.total, fine.energy.total);
            let relative_change = (b - a).abs() / a.abs();
            Some(ResolutionCheck {
                path_points: opts.path_points,
                path_points_doubled: doubled.path_points,
                energy: a,
                energy_doubled: b,
                relative_change,
                pass: fine.converged() && relative_change <= RESOLUTION_TOL,
            })
        }
        None => None,
    };
    let report = MountainPassReport {
        lambda,
        delta: rep.delta,
        energies: rep.solutions.iter().map(|r| r.energy.total).collect(),
        seeds: &rep.seeds,
        resolution,
        distinct_solutions: rep.solutions.len(),
    };
    out.json("mp_report.json", &report)?;

    for (i, r) in rep.solutions.iter().enumerate() {
        println!(
            "solution {i:<3} J = {:<22} residual {:e}  certificate {}",
            r.energy.total,
            r.residual,
            if certs[i].pass { "pass" } else { "FAIL" }
        );
    }
    for o in &rep.seeds {
        if let Some(err) = &o.error {
            println!("seed {} failed: {err}", o.seed);
        }
    }
    if let Some(res) = &report.resolution {
        println!(
            "path resolution  K = {} -> {}: relative change {:e} {}",
            res.path_points,
            res.path_points_doubled,
            res.relative_change,
            if res.pass { "pass" } else { "FAIL" }
        );
    }
    let ok = !rep.solutions.is_empty()
        && certs.iter().all(|c| c.pass)
        && report.resolution.as_ref().is_some_and(|r| r.pass);
    Ok(Outcome {
        code: if ok { EXIT_OK } else { EXIT_FAILURE },
        notes,
        hypotheses: hyp,
    })
}

#[derive(Serialize)]
struct NormEntry {
    exponent: &'static str,
    modular: f64,
    luxemburg: f64,
    /// `None` when the field does not vanish on the boundary.
    sobolev: Option<f64>,
}

/// Norms of a field file for each configured exponent.
pub fn cmd_norm(
    cfg: &ExperimentConfig,
    field: &Path,
    ctx: &RunContext,
    out: &mut OutputSet,
) -> Result<i32> {
    Ok(norm(cfg, field, ctx, out)?.code)
}

fn norm(
    cfg: &ExperimentConfig,
    field: &Path,
    _ctx: &RunContext,
    out: &mut OutputSet,
) -> Result<Outcome> {
    let text = fs::read_to_string(field).map_err(|e| Error::Config {
        line: 0,
        message: format!("cannot read {}: {e}", field.display()),
    })?;
    let u = read_field_csv(&text, cfg.grid())?;
    let s = cfg.exponents();
    let fields: [(&'static str, &ExponentField); 4] =
        [("p1", &s.p1), ("p2", &s.p2), ("m", &s.m), ("q", &s.q)];
    let mut entries = Vec::new();
    for (name, p) in fields {
        let (lux, _) = luxemburg_norm(&u, p)?;
        let sob = if u.vanishes_on_boundary() {
            Some(sobolev_norm(&u, p)?)
        } else {
            None
        };
        let entry = NormEntry {
            exponent: name,
            modular: modular(&u, p),
            luxemburg: lux,
            sobolev: sob,
        };
        println!(
            "{name:<3} modular {:<24} luxemburg {:<24} sobolev {}",
            entry.modular,
            entry.luxemburg,
            entry
                .sobolev
                .map_or("n/a (nonzero boundary values)".to_string(), |v| v
                    .to_string())
        );
        entries.push(entry);
    }
    out.json("norms.json", &entries)?;
    Ok(Outcome {
        code: EXIT_OK,
        notes: Vec::new(),
        hypotheses: hypotheses(s),
    })
}

// ---------------------------------------------------------------- entry

fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::Config { .. }
        | Error::Expr(_)
        | Error::ShapeMismatch { .. }
        | Error::InvalidGrid(_)
        | Error::NonFinite => EXIT_USAGE,
        _ => EXIT_FAILURE,
    }
}

/// Runs a parsed command line; returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let cfg = match load_config(cli.config.as_deref()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code_for(&e);
        }
    };
    let (seed, seed_source) = match (cli.seed, cli.random_seed) {
        (Some(s), _) => (s, "flag"),
        (None, true) => (rand::rng().random(), "random"),
        (None, false) => (cfg.seed, "config"),
    };
    let ctx = RunContext {
        seed,
        seed_source,
        override_hypotheses: cli.override_hypotheses,
        out: cli.out.clone().unwrap_or_else(|| cfg.out.clone()),
    };
    if ctx.override_hypotheses {
        eprintln!("warning: --override-hypotheses is set; solvers run even if the exponent hypotheses fail");
    }
    let mut out = match OutputSet::create(&ctx.out) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_FAILURE;
        }
    };
    let started_at = timestamp();
    let result = match &cli.command {
        Command::Verify => verify(&cfg, &ctx, &mut out),
        Command::SolveMin => solve_min(&cfg, &ctx, &mut out),
        Command::SolveMp => solve_mp(&cfg, &ctx, &mut out),
        Command::LambdaStar => run_lambda_star(&cfg, &ctx, &mut out),
        Command::Norm { field } => match field.as_ref().or(cfg.norm_field.as_ref()) {
            Some(path) => norm(&cfg, path, &ctx, &mut out),
            None => Err(Error::Config {
                line: 0,
                message: "norm needs a field file (--field or [norm] field)".into(),
            }),
        },
    };
    let outcome = match result {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            Outcome {
                code: exit_code_for(&e),
                notes: vec![format!("error: {e}")],
                hypotheses: hypotheses(cfg.exponents()),
            }
        }
    };
    let manifest = RunManifest {
        tool: "double-phase",
        version: env!("CARGO_PKG_VERSION"),
        command: cli.command.name().to_string(),
        config: cfg.clone(),
        seed: ctx.seed,
        seed_source: ctx.seed_source,
        override_hypotheses: ctx.override_hypotheses,
        hypotheses: outcome.hypotheses,
        notes: outcome.notes,
        started_at,
        finished_at: timestamp(),
        exit_code: outcome.code,
        outputs: out.entries().to_vec(),
    };
    let mut bytes = match serde_json::to_vec_pretty(&manifest) {
        Ok(b) => b,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_FAILURE;
        }
    };
    bytes.push(b'\n');
    if let Err(e) = fs::write(ctx.out.join("manifest.json"), bytes) {
        eprintln!("error: {e}");
        return EXIT_FAILURE;
    }
    outcome.code
}

/// Parses `args` (including the program name) and runs them.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(cli),
        Err(e) => {
            let _ = e.print();
            if e.use_stderr() {
                EXIT_USAGE
            } else {
                EXIT_OK
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_of(text: &str) -> usize {
        match parse_config(text) {
            Err(Error::Config { line, .. }) => line,
            other => panic!("expected a config error, got {other:?}"),
        }
    }

    #[test]
    fn empty_config_is_the_default_experiment() {
        let cfg = parse_config("").unwrap();
        assert_eq!((cfg.dim, cfg.res), (3, 16));
        assert_eq!(cfg.grid().node_count(), 16usize.pow(3));
        assert_eq!(cfg.seeds.len(), 2);
        assert_eq!(cfg.seed, DEFAULT_SEED);
        assert!(cfg.lambda.is_none());
    }

    #[test]
    fn shipped_config_matches_defaults() {
        let text = include_str!("../../../configs/default.toml");
        let shipped = parse_config(text).unwrap();
        let default = parse_config("").unwrap();
        assert_eq!(shipped.seeds, default.seeds);
        assert_eq!(shipped.bump, default.bump);
        assert_eq!(shipped.p2, default.p2);
        assert_eq!(shipped.seed, default.seed);
    }

    #[test]
    fn errors_point_at_their_line() {
        assert_eq!(line_of("seed = 1\n\n[grid]\ndim = 4\n"), 4);
        assert_eq!(line_of("[grid]\nres = 8\nextent = [1.0]\n"), 3);
        assert_eq!(line_of("[exponents]\np1 = \"2\"\np2 = \"sin(\"\n"), 3);
        assert_eq!(line_of("[bump]\nside = 1.5\n"), 2);
        assert_eq!(line_of("[problem]\nlambda = -1.0\n"), 2);
        assert_eq!(line_of("[mountain_pass]\nseeds = []\n"), 2);
        assert_eq!(line_of("[verify]\nbogus = 1\n"), 2);
        assert_eq!(line_of("[grid\n"), 1);
    }

    #[test]
    fn seeds_must_fit_the_grid() {
        let text = "[mountain_pass]\nseeds = [{ lo = [0.1, 0.1], hi = [0.5, 0.5] }]\n";
        assert_eq!(line_of(text), 2);
        let text = "[mountain_pass]\nseeds = [{ lo = [0.1, 0.1, 0.1], hi = [0.5, 0.5, 0.5] }]\n";
        assert_eq!(parse_config(text).unwrap().seeds[0].amplitude, 2.0);
    }

    #[test]
    fn exit_codes_follow_error_kind() {
        assert_eq!(
            exit_code_for(&Error::Config {
                line: 1,
                message: String::new()
            }),
            EXIT_USAGE
        );
        assert_eq!(
            exit_code_for(&Error::ShapeMismatch {
                expected: 1,
                found: 2
            }),
            EXIT_USAGE
        );
        assert_eq!(exit_code_for(&Error::NoPositiveSphere), EXIT_FAILURE);
    }

    #[test]
    fn header_and_coordinates_are_checked() {
        let cfg = parse_config("[grid]\ndim = 2\nres = 4\n").unwrap();
        let u = GridFunction::zeros(cfg.grid().clone());
        let good = field_csv(&u);
        assert!(read_field_csv(&good, cfg.grid()).is_ok());
        assert!(read_field_csv(&good.replacen("x1", "y1", 1), cfg.grid()).is_err());
        let swapped = good.replacen("0e0,3.333333333333333e-1,", "3.333333333333333e-1,0e0,", 1);
        assert_ne!(swapped, good);
        assert!(matches!(
            read_field_csv(&swapped, cfg.grid()),
            Err(Error::Config { .. })
        ));
    }
}
