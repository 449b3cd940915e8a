//! Critical points of the energies.
//!
//! - [`minimize_energy`]: global descent on the coercive energy `I`
//!   (Barzilai-Borwein steps with an Armijo backtracking safeguard).
//! - [`bump_function`] and [`lambda_star_search`]: the plateau test field and
//!   the smallest grid `lambda` for which `I` is negative on it.
//! - [`find_endpoint`], [`mountain_pass`], [`multi_solution_search`]: a
//!   path-deformation mountain-pass method for the even energy `J`.
//!
//! Both descents step along the discrete `H^1_0` Riesz representative of
//! the residual rather than the raw residual, which removes the `1/h^2`
//! stiffness of the gradient terms.

use std::sync::Arc;

use serde::Serialize;

use crate::discretization::{DomainGrid, GridFunction};
use crate::energy::{pairing, residual_norm, Energy, EnergyReport, Functional, Residual};
use crate::error::{Error, Result};
use crate::exponents::{validate_hypotheses, ExponentSet, Theorem};
use crate::precondition;
use crate::varexp::sobolev_norm;

/// Armijo sufficient-decrease constant.
const ARMIJO_C: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 60;
const RAY_DOUBLINGS: usize = 60;
const RAY_MAX_ITER: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverOptions {
    /// Stop when the residual norm falls to this value.
    pub tol: f64,
    pub max_iter: usize,
    /// Number of segments `K` of the mountain-pass path.
    pub path_points: usize,
    /// Doublings tried by [`find_endpoint`].
    pub doubling_limit: usize,
    /// Record the path energy profile every this many iterations (0: never).
    pub snapshot_every: usize,
    /// Run even if the exponent hypotheses fail.
    pub override_hypotheses: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iter: 5000,
            path_points: 40,
            doubling_limit: 60,
            snapshot_every: 0,
            override_hypotheses: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Termination {
    Converged,
    MaxIter,
    Stagnated,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HistoryEntry {
    pub energy: f64,
    pub residual: f64,
}

/// Energies along the mountain-pass path at one iteration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathProfile {
    pub iteration: usize,
    pub energies: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub u: GridFunction,
    pub energy: EnergyReport,
    pub residual: f64,
    pub iterations: usize,
    pub history: Vec<HistoryEntry>,
    pub termination: Termination,
    /// Mountain-pass runs only.
    pub path_profiles: Vec<PathProfile>,
}

impl SolveResult {
    fn finish(
        energy: &Energy<'_>,
        u: GridFunction,
        iterations: usize,
        history: Vec<HistoryEntry>,
        termination: Termination,
        path_profiles: Vec<PathProfile>,
    ) -> Self {
        let report = energy.report(&u);
        let residual = residual_norm(&energy.gradient(&u));
        Self {
            u,
            energy: report,
            residual,
            iterations,
            history,
            termination,
            path_profiles,
        }
    }

    pub fn converged(&self) -> bool {
        self.termination == Termination::Converged
    }

    /// The mirrored critical point `-u` (the energies are even).
    pub fn negated(&self) -> Self {
        Self {
            u: self.u.scaled(-1.0),
            ..self.clone()
        }
    }
}

fn require(s: &ExponentSet, theorem: Theorem, opts: &SolverOptions) -> Result<()> {
    if opts.override_hypotheses || validate_hypotheses(s, theorem).pass {
        Ok(())
    } else {
        Err(Error::HypothesesFailed(match theorem {
            Theorem::T1 => "T1",
            Theorem::T2 => "T2",
        }))
    }
}

/// Axis-aligned sub-box `[lo, hi]` of the domain.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl SubBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Self {
        Self { lo, hi }
    }

    /// Cube of side `side` centred at `center`.
    pub fn centered(center: &[f64], side: f64) -> Self {
        Self {
            lo: center.iter().map(|c| c - 0.5 * side).collect(),
            hi: center.iter().map(|c| c + 0.5 * side).collect(),
        }
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| b - a).product()
    }

    fn distance(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(&x, (&lo, &hi))| {
                let d = (lo - x).max(x - hi).max(0.0);
                d * d
            })
            .sum::<f64>()
            .sqrt()
    }

    fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(&x, (&lo, &hi))| lo <= x && x <= hi)
    }

    /// Gap between the sub-box and the domain boundary.
    fn clearance(&self, grid: &DomainGrid) -> Result<f64> {
        if self.lo.len() != grid.dim() || self.hi.len() != grid.dim() {
            return Err(Error::PreconditionViolated(
                "sub-box dimension differs from the grid".into(),
            ));
        }
        let gap = self
            .lo
            .iter()
            .zip(&self.hi)
            .zip(grid.extent())
            .map(|((&lo, &hi), &ext)| {
                if lo < hi {
                    lo.min(ext - hi)
                } else {
                    f64::NEG_INFINITY
                }
            })
            .fold(f64::INFINITY, f64::min);
        if gap > 0.0 {
            Ok(gap)
        } else {
            Err(Error::SubdomainTouchesBoundary)
        }
    }

    /// Quadrature measure of the cells lying entirely in the closed sub-box.
    pub fn plateau_measure(&self, grid: &DomainGrid) -> f64 {
        let inside = (0..grid.cell_count())
            .filter(|&c| {
                grid.cell_corners(c)
                    .all(|n| self.contains(&grid.node_coords(n)))
            })
            .count();
        inside as f64 * grid.cell_volume()
    }
}

fn smoothstep(s: f64) -> f64 {
    let s = s.clamp(0.0, 1.0);
    s * s * (3.0 - 2.0 * s)
}

/// Zero-boundary field equal to `t0` on `region`, decaying to zero through a
/// cubic smoothstep of the distance to `region`; the ramp width is the gap
/// between `region` and the boundary.
pub fn bump_function(grid: Arc<DomainGrid>, t0: f64, region: &SubBox) -> Result<GridFunction> {
    if !(t0 > 1.0 && t0.is_finite()) {
        return Err(Error::PreconditionViolated(format!(
            "plateau height must exceed 1, got {t0}"
        )));
    }
    shaped_bump(grid, t0, region)
}

/// [`bump_function`] without the `t0 > 1` requirement; used for seeds.
pub fn shaped_bump(grid: Arc<DomainGrid>, amplitude: f64, region: &SubBox) -> Result<GridFunction> {
    let ramp = region.clearance(&grid)?;
    GridFunction::from_fn(grid, true, |x| {
        amplitude * smoothstep(1.0 - region.distance(x) / ramp)
    })
}

/// Outcome of the `lambda*` search on a bump.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LambdaStarReport {
    /// Smallest grid value with `I_lambda(u0) < 0`.
    pub lambda_hat: f64,
    /// Root of the affine map `lambda -> I_lambda(u0)`.
    pub lambda_exact: f64,
    /// `L m^+ / (t0^{m^-} |Omega_1|)`.
    pub analytic_bound: f64,
    /// `L = int |grad u0|^p1/p1 + |grad u0|^p2/p2 + |u0|^q/q`.
    pub l_constant: f64,
    /// Spacing of the grid just below `lambda_hat`.
    pub grid_step: f64,
    pub t0: f64,
    /// Quadrature measure of the plateau cells.
    pub omega1_measure: f64,
    /// Geometric volume of the plateau box.
    pub omega1_volume: f64,
    pub m_plus: f64,
    pub m_minus: f64,
    pub energy_at_lambda_hat: EnergyReport,
}

/// Scans `lambda_grid` (strictly increasing) for the first value making the
/// energy `I` of `u0` negative.
pub fn lambda_star_search(
    s: &ExponentSet,
    u0: &GridFunction,
    t0: f64,
    region: &SubBox,
    lambda_grid: &[f64],
) -> Result<LambdaStarReport> {
    if lambda_grid.windows(2).any(|w| w[1] <= w[0]) || lambda_grid.is_empty() {
        return Err(Error::PreconditionViolated(
            "lambda grid must be nonempty and strictly increasing".into(),
        ));
    }
    let base = Energy::new(s, 0.0, Functional::I).report(u0);
    if base.term_m <= 0.0 {
        return Err(Error::PreconditionViolated(
            "bump is identically zero".into(),
        ));
    }
    let l_constant = base.term_grad_p1 + base.term_grad_p2 + base.term_q;
    let lambda_exact = l_constant / base.term_m;
    let omega1_measure = region.plateau_measure(u0.grid());
    let (m_plus, m_minus) = (s.m.sup(), s.m.inf());
    let analytic_bound = l_constant * m_plus / (t0.powf(m_minus) * omega1_measure);

    let mut previous = f64::INFINITY;
    for (i, &lambda) in lambda_grid.iter().enumerate() {
        let report = base.with_lambda(lambda);
        assert!(
            report.total < previous,
            "energy must decrease strictly in lambda"
        );
        previous = report.total;
        if report.total < 0.0 {
            if lambda > analytic_bound {
                return Err(Error::LambdaBoundViolated {
                    found: lambda,
                    bound: analytic_bound,
                });
            }
            let grid_step = if i > 0 {
                lambda - lambda_grid[i - 1]
            } else {
                lambda
            };
            return Ok(LambdaStarReport {
                lambda_hat: lambda,
                lambda_exact,
                analytic_bound,
                l_constant,
                grid_step,
                t0,
                omega1_measure,
                omega1_volume: region.volume(),
                m_plus,
                m_minus,
                energy_at_lambda_hat: report,
            });
        }
    }
    Err(Error::GridExhausted {
        max_lambda: *lambda_grid.last().unwrap(),
    })
}

/// Uniform grid `start, start + step, ...` with `count` values.
pub fn uniform_lambda_grid(start: f64, step: f64, count: usize) -> Vec<f64> {
    (0..count).map(|i| start + step * i as f64).collect()
}

/// Armijo backtracking from `u` along `-d`, where `slope` is the pairing
/// of the residual with `d`. Each trial point passes through `project`;
/// returns the accepted point and its energy change.
fn armijo_step(
    energy: &Energy<'_>,
    u: &GridFunction,
    d: &GridFunction,
    slope: f64,
    mut step: f64,
    project: impl Fn(GridFunction) -> Option<GridFunction>,
) -> Option<(GridFunction, f64)> {
    for _ in 0..MAX_BACKTRACKS {
        if let Some(trial) = project(u.axpy(-step, d)) {
            let delta = energy.difference(u, &trial.sub(u));
            if delta <= -ARMIJO_C * step * slope {
                return Some((trial, delta));
            }
        }
        step *= 0.5;
        if step < f64::MIN_POSITIVE {
            break;
        }
    }
    None
}

/// Preconditioned descent direction and its pairing with the residual.
fn direction(r: &GridFunction) -> (GridFunction, f64) {
    let d = precondition::solve(r);
    let slope = pairing(&Residual(r.clone()), &d);
    (d, slope)
}

/// Barzilai-Borwein step `<s,Ks>/<s,y>` in the preconditioner metric,
/// clamped to a sane range.
fn bb_step(s: &GridFunction, y: &GridFunction, fallback: f64) -> f64 {
    let ks = precondition::apply(s.grid(), s.values());
    let sks: f64 = s.values().iter().zip(&ks).map(|(a, b)| a * b).sum();
    let sy: f64 = s.values().iter().zip(y.values()).map(|(a, b)| a * b).sum();
    if sy > 0.0 && sks > 0.0 {
        (sks / sy).clamp(1e-12, 1e12)
    } else {
        fallback
    }
}

/// Monotone descent on `I_lambda` from `init`.
pub fn minimize_energy(
    lambda: f64,
    s: &ExponentSet,
    init: &GridFunction,
    opts: &SolverOptions,
) -> Result<SolveResult> {
    require(s, Theorem::T2, opts)?;
    let energy = Energy::new(s, lambda, Functional::I);
    let mut u = GridFunction::new(init.grid().clone(), init.values().to_vec(), true)?;
    let mut e = energy.value(&u);
    let mut r = energy.gradient(&u).0;
    let mut step = 1.0;
    let mut history = Vec::new();
    let mut iter = 0;
    let termination = loop {
        let res = residual_norm(&Residual(r.clone()));
        history.push(HistoryEntry {
            energy: e,
            residual: res,
        });
        if res <= opts.tol {
            break Termination::Converged;
        }
        if iter >= opts.max_iter {
            break Termination::MaxIter;
        }
        let (d, slope) = direction(&r);
        let Some((next, delta)) = armijo_step(&energy, &u, &d, slope, step, Some) else {
            break Termination::Stagnated;
        };
        let r_next = energy.gradient(&next).0;
        step = bb_step(&next.sub(&u), &r_next.sub(&r), step);
        u = next;
        e += delta;
        r = r_next;
        iter += 1;
    };
    Ok(SolveResult::finish(
        &energy,
        u,
        iter,
        history,
        termination,
        Vec::new(),
    ))
}

/// `e = t u0` for the first `t` in `1, 2, 4, ...` with `J_lambda(e) < 0`.
pub fn find_endpoint(
    lambda: f64,
    s: &ExponentSet,
    direction: &GridFunction,
    doubling_limit: usize,
) -> Result<(GridFunction, f64)> {
    if direction.max_abs() == 0.0 {
        return Err(Error::PreconditionViolated(
            "endpoint direction must be nonzero".into(),
        ));
    }
    let energy = Energy::new(s, lambda, Functional::J);
    let mut t = 1.0;
    for _ in 0..=doubling_limit {
        let e = direction.scaled(t);
        if energy.value(&e) < 0.0 {
            return Ok((e, t));
        }
        t *= 2.0;
    }
    Err(Error::ScheduleExhausted {
        doublings: doubling_limit,
    })
}

/// Discrete path `z_0 = 0, ..., z_K = e` with the energies at its nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct PathState {
    pub nodes: Vec<GridFunction>,
    pub energies: Vec<f64>,
}

impl PathState {
    fn segment(energy: &Energy<'_>, e: &GridFunction, k: usize) -> Self {
        let nodes: Vec<GridFunction> = (0..=k).map(|i| e.scaled(i as f64 / k as f64)).collect();
        let energies = nodes.iter().map(|z| energy.value(z)).collect();
        Self { nodes, energies }
    }

    /// Interior node of highest energy.
    pub fn argmax(&self) -> usize {
        let k = self.nodes.len() - 1;
        (1..k).fold(1, |best, i| {
            if self.energies[i] > self.energies[best] {
                i
            } else {
                best
            }
        })
    }

    /// Pulls every interior node standing above node `k` onto the ray through
    /// `z_k`, keeping its L2 size. Node `k` maximises the energy on that ray,
    /// so afterwards it is the highest node again.
    fn repair(&mut self, energy: &Energy<'_>, k: usize) {
        let top = self.energies[k];
        let size = |z: &GridFunction| z.values().iter().map(|x| x * x).sum::<f64>().sqrt();
        let zk_size = size(&self.nodes[k]);
        for j in 1..self.nodes.len() - 1 {
            if j != k && self.energies[j] > top {
                let moved = self.nodes[k].scaled(size(&self.nodes[j]) / zk_size);
                self.energies[j] = energy.value(&moved);
                self.nodes[j] = moved;
            }
        }
    }
}

/// `t z` with `t > 0` the zero of `t -> <J'(t z), z>`, i.e. the maximum of
/// the energy on the ray through `z`. `None` if no sign change is found.
fn ray_maximize(energy: &Energy<'_>, z: &GridFunction) -> Option<GridFunction> {
    let slope = |t: f64| pairing(&energy.gradient(&z.scaled(t)), z);
    let (mut lo, mut hi) = (1.0, 1.0);
    let mut f = slope(1.0);
    if f == 0.0 {
        return Some(z.clone());
    }
    let (mut f_lo, mut f_hi);
    if f > 0.0 {
        f_lo = f;
        f_hi = f;
        for _ in 0..RAY_DOUBLINGS {
            hi *= 2.0;
            f_hi = slope(hi);
            if f_hi <= 0.0 {
                break;
            }
            lo = hi;
            f_lo = f_hi;
        }
        if f_hi > 0.0 {
            return None;
        }
    } else {
        f_hi = f;
        f_lo = f;
        for _ in 0..RAY_DOUBLINGS {
            lo *= 0.5;
            f_lo = slope(lo);
            if f_lo >= 0.0 {
                break;
            }
            hi = lo;
            f_hi = f_lo;
        }
        if f_lo < 0.0 {
            return None;
        }
    }
    // Illinois regula falsi on [lo, hi] with f_lo >= 0 >= f_hi.
    let mut side = 0i8;
    let mut t = lo;
    for _ in 0..RAY_MAX_ITER {
        if f_lo == 0.0 {
            t = lo;
            break;
        }
        if f_hi == 0.0 {
            t = hi;
            break;
        }
        t = (lo * f_hi - hi * f_lo) / (f_hi - f_lo);
        if !(t > lo && t < hi) {
            t = 0.5 * (lo + hi);
        }
        f = slope(t);
        if f > 0.0 {
            lo = t;
            f_lo = f;
            if side == 1 {
                f_hi *= 0.5;
            }
            side = 1;
        } else if f < 0.0 {
            hi = t;
            f_hi = f;
            if side == -1 {
                f_lo *= 0.5;
            }
            side = -1;
        } else {
            break;
        }
        if hi - lo <= 4.0 * f64::EPSILON * hi {
            break;
        }
    }
    Some(z.scaled(t))
}

/// Path-deformation mountain pass on `J_lambda` between `0` and `e`.
///
/// Each iteration takes the highest interior node of the path, places it at
/// the energy maximum of its ray (for the initial straight path this is the
/// maximum along the path itself) and moves it one preconditioned Armijo step
/// downhill, re-maximising along the new ray. Nodes left above it are pulled
/// onto its ray. The endpoints stay pinned; the iteration stops when the
/// residual at the highest node reaches `opts.tol`.
pub fn mountain_pass(
    lambda: f64,
    s: &ExponentSet,
    e: &GridFunction,
    opts: &SolverOptions,
) -> Result<SolveResult> {
    require(s, Theorem::T1, opts)?;
    let energy = Energy::new(s, lambda, Functional::J);
    let e_level = energy.value(e);
    if e_level >= 0.0 {
        return Err(Error::PreconditionViolated(format!(
            "endpoint energy must be negative, got {e_level}"
        )));
    }
    if opts.path_points < 2 {
        return Err(Error::PreconditionViolated(
            "path needs at least two segments".into(),
        ));
    }
    let floor = e_level.max(0.0);
    let mut path = PathState::segment(&energy, e, opts.path_points);
    let mut on_ray = vec![false; path.nodes.len()];
    let mut profiles = Vec::new();
    let mut history = Vec::new();
    let mut step = 1.0;
    let mut last: Option<(usize, GridFunction, GridFunction)> = None;
    let mut iter = 0;
    let project = |z: GridFunction| ray_maximize(&energy, &z);

    let (termination, k) = loop {
        let k = path.argmax();
        if !on_ray[k] {
            let z = project(path.nodes[k].clone()).ok_or_else(|| {
                Error::PreconditionViolated("energy has no maximum along the path direction".into())
            })?;
            path.energies[k] = energy.value(&z);
            path.nodes[k] = z;
            on_ray[k] = true;
            path.repair(&energy, k);
        }
        if path.energies[k] <= floor {
            return Err(Error::Collapse {
                max_energy: path.energies[k],
                floor,
            });
        }
        if opts.snapshot_every > 0 && iter % opts.snapshot_every == 0 {
            profiles.push(PathProfile {
                iteration: iter,
                energies: path.energies.clone(),
            });
        }
        let z = path.nodes[k].clone();
        let r = energy.gradient(&z).0;
        let res = residual_norm(&Residual(r.clone()));
        history.push(HistoryEntry {
            energy: path.energies[k],
            residual: res,
        });
        if res <= opts.tol {
            break (Termination::Converged, k);
        }
        if iter >= opts.max_iter {
            break (Termination::MaxIter, k);
        }
        if let Some((k_prev, z_prev, r_prev)) = &last {
            if *k_prev == k {
                step = bb_step(&z.sub(z_prev), &r.sub(r_prev), step);
            }
        }
        let (d, slope) = direction(&r);
        let Some((next, delta)) = armijo_step(&energy, &z, &d, slope, step, project) else {
            break (Termination::Stagnated, k);
        };
        last = Some((k, z, r));
        path.nodes[k] = next;
        path.energies[k] += delta;
        path.repair(&energy, k);
        iter += 1;
    };
    if opts.snapshot_every > 0 {
        profiles.push(PathProfile {
            iteration: iter,
            energies: path.energies.clone(),
        });
    }
    let u = path.nodes.swap_remove(k);
    Ok(SolveResult::finish(
        &energy,
        u,
        iter,
        history,
        termination,
        profiles,
    ))
}

/// Status of one seed in [`multi_solution_search`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeedOutcome {
    pub seed: usize,
    pub endpoint_scale: Option<f64>,
    pub termination: Option<Termination>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiSolutionReport {
    /// Distinct converged critical points.
    pub solutions: Vec<SolveResult>,
    /// Seed index each solution came from, and whether it is the mirror `-u`.
    pub origins: Vec<(usize, bool)>,
    /// Distinctness radius used.
    pub delta: f64,
    /// Pairwise `||u_i - u_j||` in the gradient norm of exponent `m`.
    pub distances: Vec<Vec<f64>>,
    pub seeds: Vec<SeedOutcome>,
}

/// Runs [`find_endpoint`] and [`mountain_pass`] from every seed, adds the
/// mirror `-u` of each converged point and keeps the pairwise distinct ones.
/// `delta` defaults to `1e-2` times the largest norm among the candidates.
pub fn multi_solution_search(
    lambda: f64,
    s: &ExponentSet,
    seeds: &[GridFunction],
    delta: Option<f64>,
    opts: &SolverOptions,
) -> Result<MultiSolutionReport> {
    require(s, Theorem::T1, opts)?;
    let mut candidates = Vec::new();
    let mut outcomes = Vec::new();
    for (i, seed) in seeds.iter().enumerate() {
        let mut outcome = SeedOutcome {
            seed: i,
            endpoint_scale: None,
            termination: None,
            error: None,
        };
        match find_endpoint(lambda, s, seed, opts.doubling_limit).and_then(|(e, t)| {
            outcome.endpoint_scale = Some(t);
            mountain_pass(lambda, s, &e, opts)
        }) {
            Ok(res) => {
                outcome.termination = Some(res.termination);
                if res.converged() {
                    let mirror = res.negated();
                    candidates.push(((i, false), res));
                    candidates.push(((i, true), mirror));
                }
            }
            Err(err) => outcome.error = Some(err.to_string()),
        }
        outcomes.push(outcome);
    }
    let norms = candidates
        .iter()
        .map(|(_, c)| sobolev_norm(&c.u, &s.m))
        .collect::<Result<Vec<_>>>()?;
    let delta = delta.unwrap_or_else(|| 1e-2 * norms.iter().copied().fold(0.0, f64::max));
    let mut kept: Vec<((usize, bool), SolveResult)> = Vec::new();
    for (origin, cand) in candidates {
        let mut distinct = true;
        for (_, other) in &kept {
            if sobolev_norm(&cand.u.sub(&other.u), &s.m)? <= delta {
                distinct = false;
                break;
            }
        }
        if distinct {
            kept.push((origin, cand));
        }
    }
    let n = kept.len();
    let mut distances = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let d = sobolev_norm(&kept[i].1.u.sub(&kept[j].1.u), &s.m)?;
            distances[i][j] = d;
            distances[j][i] = d;
        }
    }
    let (origins, solutions) = kept.into_iter().unzip();
    Ok(MultiSolutionReport {
        solutions,
        origins,
        delta,
        distances,
        seeds: outcomes,
    })
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::energy::eval_energy;
    use crate::exponents::build_exponent_set;
    use crate::expr::FieldExpr;

    fn default_set(dim: usize, res: usize) -> ExponentSet {
        let grid = Arc::new(DomainGrid::unit(dim, res).unwrap());
        build_exponent_set(
            &FieldExpr::parse("2").unwrap(),
            &FieldExpr::parse("2 + 0.5*sin(pi*x1)").unwrap(),
            &FieldExpr::parse("4").unwrap(),
            grid,
        )
        .unwrap()
    }

    fn central(dim: usize) -> SubBox {
        SubBox::centered(&vec![0.5; dim], 0.5)
    }

    #[test]
    fn bump_shape() {
        let s = default_set(3, 9);
        let g = s.grid().clone();
        let region = central(3);
        let u = bump_function(g.clone(), 2.0, &region).unwrap();
        for n in 0..g.node_count() {
            let x = g.node_coords(n);
            let v = u.values()[n];
            assert!((0.0..=2.0).contains(&v));
            if region.contains(&x) {
                assert_eq!(v, 2.0);
            }
            if g.is_boundary(n) {
                assert_eq!(v, 0.0);
            }
        }
        assert_eq!(u.max_abs(), 2.0);
    }

    #[test]
    fn bump_rejects_bad_regions() {
        let g = Arc::new(DomainGrid::unit(2, 8).unwrap());
        let touching = SubBox::new(vec![0.0, 0.2], vec![0.5, 0.6]);
        assert!(matches!(
            bump_function(g.clone(), 2.0, &touching),
            Err(Error::SubdomainTouchesBoundary)
        ));
        assert!(matches!(
            bump_function(g, 1.0, &central(2)),
            Err(Error::PreconditionViolated(_))
        ));
    }

    #[test]
    fn lambda_star_brackets_exact_root() {
        let s = default_set(3, 9);
        let region = central(3);
        let u0 = bump_function(s.grid().clone(), 2.0, &region).unwrap();
        let step = 0.25;
        let rep = lambda_star_search(
            &s,
            &u0,
            2.0,
            &region,
            &uniform_lambda_grid(step, step, 4000),
        )
        .unwrap();
        assert!(rep.lambda_hat > rep.lambda_exact && rep.lambda_hat - rep.lambda_exact <= step);
        assert!(rep.lambda_exact <= rep.analytic_bound && rep.lambda_hat <= rep.analytic_bound);
        assert!(rep.energy_at_lambda_hat.total < 0.0);
        let before = eval_energy(&u0, rep.lambda_hat - step, &s, Functional::I).total;
        assert!(before >= 0.0);

        let short = uniform_lambda_grid(step, step, 10);
        assert!(matches!(
            lambda_star_search(&s, &u0, 2.0, &region, &short),
            Err(Error::GridExhausted { .. })
        ));
    }

    #[test]
    fn minimizer_at_zero_lambda_decays() {
        let s = default_set(3, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let g = s.grid().clone();
        let init = GridFunction::new(
            g.clone(),
            (0..g.node_count())
                .map(|_| rng.random_range(-1.0..1.0))
                .collect(),
            true,
        )
        .unwrap();
        let r = minimize_energy(0.0, &s, &init, &SolverOptions::default()).unwrap();
        assert!(r.converged());
        assert!(r.energy.total >= 0.0 && r.energy.total <= r.history[0].energy);
        assert!(r.history.windows(2).all(|w| w[1].energy <= w[0].energy));
        assert!(r.u.max_abs() < 1e-5);
    }

    #[test]
    fn minimizer_is_a_fixed_point() {
        let s = default_set(3, 8);
        let region = central(3);
        let u0 = bump_function(s.grid().clone(), 2.0, &region).unwrap();
        let opts = SolverOptions::default();
        let first = minimize_energy(250.0, &s, &u0, &opts).unwrap();
        assert!(first.converged());
        assert!(first.energy.total < 0.0);
        assert!(first.history.windows(2).all(|w| w[1].energy <= w[0].energy));
        let again = minimize_energy(250.0, &s, &first.u, &opts).unwrap();
        assert!(again.converged() && again.iterations <= 2);
        let recomputed = residual_norm(&Energy::new(&s, 250.0, Functional::I).gradient(&first.u));
        assert!((recomputed - first.residual).abs() <= 1e-12);
    }

    #[test]
    fn hypotheses_gate_solvers() {
        let grid = Arc::new(DomainGrid::unit(2, 8).unwrap());
        let parse = |e: &str| FieldExpr::parse(e).unwrap();
        let bad =
            build_exponent_set(&parse("2"), &parse("3"), &parse("2.5"), grid.clone()).unwrap();
        let u0 = bump_function(grid, 2.0, &central(2)).unwrap();
        let opts = SolverOptions::default();
        assert!(matches!(
            minimize_energy(1.0, &bad, &u0, &opts),
            Err(Error::HypothesesFailed("T2"))
        ));
        assert!(matches!(
            mountain_pass(1.0, &bad, &u0, &opts),
            Err(Error::HypothesesFailed("T1"))
        ));
    }

    #[test]
    fn endpoint_schedule() {
        let s = default_set(3, 8);
        let u0 = bump_function(s.grid().clone(), 2.0, &central(3)).unwrap();
        let (e, t) = find_endpoint(1.0, &s, &u0, 60).unwrap();
        let energy = Energy::new(&s, 1.0, Functional::J);
        assert!(energy.value(&e) < 0.0 && t >= 1.0);
        assert!(energy.value(&u0.scaled(2.0 * t)) < 0.0);
        if t > 1.0 {
            assert!(energy.value(&u0.scaled(0.5 * t)) >= 0.0);
        }
        assert!(matches!(
            find_endpoint(1.0, &s, &u0, 0),
            Err(Error::ScheduleExhausted { doublings: 0 })
        ));
        let zero = GridFunction::zeros(s.grid().clone());
        assert!(find_endpoint(1.0, &s, &zero, 60).is_err());
    }

    #[test]
    fn mountain_pass_finds_positive_level() {
        let s = default_set(3, 8);
        let u0 = bump_function(s.grid().clone(), 2.0, &central(3)).unwrap();
        let (e, _) = find_endpoint(1.0, &s, &u0, 60).unwrap();
        let opts = SolverOptions {
            snapshot_every: 5,
            ..Default::default()
        };
        let r = mountain_pass(1.0, &s, &e, &opts).unwrap();
        assert!(r.converged() && r.residual <= opts.tol);
        assert!(r.energy.total > 0.0);
        assert!(!r.path_profiles.is_empty());
        let energy = Energy::new(&s, 1.0, Functional::J);
        let neg = r.u.scaled(-1.0);
        assert_eq!(energy.value(&neg), r.energy.total);
        assert_eq!(residual_norm(&energy.gradient(&neg)), r.residual);

        assert!(matches!(
            mountain_pass(1.0, &s, &u0.scaled(0.01), &opts),
            Err(Error::PreconditionViolated(_))
        ));
    }

    #[test]
    fn ray_maximum_is_stationary_along_the_ray() {
        let s = default_set(2, 10);
        let energy = Energy::new(&s, 1.0, Functional::J);
        let z = bump_function(s.grid().clone(), 2.0, &central(2)).unwrap();
        let top = ray_maximize(&energy, &z).unwrap();
        let along = pairing(&energy.gradient(&top), &top);
        let scale = pairing(&Residual(top.clone()), &top) * 1e-10;
        assert!(along.abs() < scale.abs().max(1e-10), "{along}");
        let j = energy.value(&top);
        assert!(energy.value(&top.scaled(1.01)) < j && energy.value(&top.scaled(0.99)) < j);
    }

    #[test]
    fn multi_search_pairs_and_dedups() {
        let s = default_set(3, 8);
        let u0 = bump_function(s.grid().clone(), 2.0, &central(3)).unwrap();
        let opts = SolverOptions::default();
        let one = multi_solution_search(1.0, &s, std::slice::from_ref(&u0), None, &opts).unwrap();
        assert_eq!(one.solutions.len(), 2);
        assert_eq!(one.origins, vec![(0, false), (0, true)]);
        assert!(one.distances[0][1] > one.delta);
        let twice = multi_solution_search(1.0, &s, &[u0.clone(), u0], None, &opts).unwrap();
        assert_eq!(twice.solutions.len(), 2);
        assert_eq!(twice.seeds.len(), 2);
    }
}
