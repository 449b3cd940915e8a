//! Randomised oracles for the inequalities and geometric facts behind the
//! existence results, plus consistency checks of the discretisation.
//!
//! Every check draws from a ChaCha8 stream seeded by its `seed` argument, so
//! a report is a pure function of its inputs. Existential constants (the
//! monotonicity constant, the sphere radius and level, embedding ratios,
//! coercivity offsets) are measured and reported, never asserted to equal
//! a specific value.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::discretization::{node_to_cell, DomainGrid, GridFunction};
use crate::energy::{l2_norm, pairing, residual_norm, Energy, Functional};
use crate::error::{Error, Result};
use crate::exponents::{validate_hypotheses, ExponentField, ExponentSet, Theorem};
use crate::solvers::{shaped_bump, SolveResult, SubBox};
use crate::varexp::{
    check_holder, check_inclusion_bound, check_modular_norm_relations, luxemburg_norm,
    luxemburg_norm_cells, modular_cells, sobolev_norm, NormRegime, CHECK_SLACK, NORM_TOL,
};

/// Seed used when the caller does not ask for fresh randomness.
pub const DEFAULT_SEED: u64 = 0x5eed;
/// Relative slack for facts that are exact in real arithmetic.
pub const EXACT_SLACK: f64 = 1e-15;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub name: String,
    pub samples: usize,
    /// Degenerate samples that were drawn but not tested.
    pub skipped: usize,
    pub failures: usize,
    /// Smallest relative margin `(rhs - lhs) / max(|lhs|, |rhs|)` seen;
    /// negative on failure.
    pub worst_margin: f64,
    pub constants: BTreeMap<String, f64>,
    /// Why the check could not run, if it could not.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub pass: bool,
}

/// Running count of `lhs <= rhs` tests.
struct Tally {
    name: String,
    samples: usize,
    skipped: usize,
    failures: usize,
    worst: f64,
    constants: BTreeMap<String, f64>,
}

impl Tally {
    fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            samples: 0,
            skipped: 0,
            failures: 0,
            worst: f64::INFINITY,
            constants: BTreeMap::new(),
        }
    }

    /// Records `lhs <= rhs` up to relative slack; returns whether it held.
    fn le(&mut self, lhs: f64, rhs: f64, slack: f64) -> bool {
        let scale = lhs.abs().max(rhs.abs());
        let margin = if scale == 0.0 {
            0.0
        } else {
            (rhs - lhs) / scale
        };
        self.worst = self.worst.min(margin);
        let ok = lhs <= rhs + slack * scale;
        if !ok {
            self.failures += 1;
        }
        ok
    }

    /// Records `value >= 0` up to `CHECK_SLACK * scale`.
    fn nonnegative(&mut self, value: f64, scale: f64) {
        let margin = if scale == 0.0 { 0.0 } else { value / scale };
        self.worst = self.worst.min(margin);
        if value < -CHECK_SLACK * scale {
            self.failures += 1;
        }
    }

    /// Counts a failure that has no numeric margin.
    fn fail(&mut self) {
        self.failures += 1;
    }

    fn constant(&mut self, key: &str, value: f64) {
        self.constants.insert(key.to_string(), value);
    }

    fn finish(self, extra_ok: bool) -> CheckReport {
        let failures = self.failures + usize::from(!extra_ok);
        CheckReport {
            name: self.name,
            samples: self.samples,
            skipped: self.skipped,
            failures,
            worst_margin: if self.worst.is_finite() {
                self.worst
            } else {
                0.0
            },
            constants: self.constants,
            error: None,
            pass: failures == 0,
        }
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo.ln()..hi.ln()).exp()
}

/// `n` points log-spaced between `lo` and `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| (lo.ln() + (hi.ln() - lo.ln()) * i as f64 / (n - 1) as f64).exp())
            .collect(),
    }
}

/// Random zero-boundary field. Smooth fields are sine series with at most
/// three modes per axis and decaying coefficients; rough ones have
/// independent uniform node values in `[-1, 1]`.
pub fn random_field(grid: &Arc<DomainGrid>, rng: &mut ChaCha8Rng, smooth: bool) -> GridFunction {
    if !smooth {
        let v = (0..grid.node_count())
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        return GridFunction::new(grid.clone(), v, true).expect("random field has grid shape");
    }
    const MODES: usize = 3;
    let dim = grid.dim();
    let n_modes = MODES.pow(dim as u32);
    let coeffs: Vec<f64> = (0..n_modes)
        .map(|i| {
            let mut k2 = 0usize;
            let mut rest = i;
            for _ in 0..dim {
                let k = rest % MODES + 1;
                k2 += k * k;
                rest /= MODES;
            }
            rng.random_range(-1.0..1.0) / k2 as f64
        })
        .collect();
    GridFunction::from_fn(grid.clone(), true, |x| {
        let mut total = 0.0;
        for (i, c) in coeffs.iter().enumerate() {
            let mut term = *c;
            let mut rest = i;
            for (a, &xa) in x.iter().enumerate() {
                let k = (rest % MODES + 1) as f64;
                term *= (k * std::f64::consts::PI * xa / grid.extent()[a]).sin();
                rest /= MODES;
            }
            total += term;
        }
        total
    })
    .expect("random field has grid shape")
}

/// Random nonzero field alternating smooth and rough draws, scaled by a
/// log-uniform amplitude in `[1e-2, 1e2]`.
fn random_sample(grid: &Arc<DomainGrid>, rng: &mut ChaCha8Rng, i: usize) -> GridFunction {
    loop {
        let u = random_field(grid, rng, i.is_multiple_of(2));
        if u.max_abs() > 0.0 {
            let amp = log_uniform(rng, 1e-2, 1e2);
            return u.scaled(amp / u.max_abs());
        }
    }
}

fn require(s: &ExponentSet, theorem: Theorem) -> Result<()> {
    if validate_hypotheses(s, theorem).pass {
        Ok(())
    } else {
        Err(Error::HypothesesFailed(match theorem {
            Theorem::T1 => "T1",
            Theorem::T2 => "T2",
        }))
    }
}

/// `|t|^{p1} + |t|^{p2} >= |t|^{max(p1, p2)}` and
/// `|t|^{q^-} + |t|^{q^+} >= |t|^q` for `q^- <= q <= q^+`.
pub fn check_pointwise_inequalities(samples: usize, seed: u64) -> CheckReport {
    let mut rng = rng(seed);
    let mut tally = Tally::new("pointwise_gradient_and_power_sums");
    for i in 0..samples {
        let t = match i % 3 {
            0 => rng.random_range(0.0..10.0),
            1 => 10f64.powf(rng.random_range(-12.0..0.0)),
            _ => 1.0 + rng.random_range(-1.0..1.0) * 10f64.powf(rng.random_range(-12.0..-1.0)),
        };
        let p1: f64 = rng.random_range(1.01..6.0);
        let p2 = rng.random_range(1.01..6.0);
        let m = p1.max(p2);
        tally.le(t.powf(m), t.powf(p1) + t.powf(p2), EXACT_SLACK);
        let q_lo: f64 = rng.random_range(1.01..6.0);
        let q_hi = q_lo + rng.random_range(0.0..4.0);
        let q = rng.random_range(q_lo..=q_hi);
        tally.le(t.powf(q), t.powf(q_lo) + t.powf(q_hi), EXACT_SLACK);
        tally.samples += 1;
    }
    tally.finish(true)
}

/// `a t^k - b t^l <= a (a/b)^{k/(l-k)}` for `t >= 0`, `a, b > 0`,
/// `0 < k < l`, on a grid covering `[0, 2 (a/b)^{1/(l-k)}]` and the exact
/// maximiser.
pub fn check_auxiliary_inequality(samples: usize, seed: u64) -> CheckReport {
    const T_POINTS: usize = 200;
    let mut rng = rng(seed);
    let mut tally = Tally::new("power_difference_bound");
    for _ in 0..samples {
        let a = log_uniform(&mut rng, 1e-3, 1e3);
        let b = log_uniform(&mut rng, 1e-3, 1e3);
        let k = rng.random_range(0.1..5.0);
        let l = k + rng.random_range(0.05..5.0);
        let rhs = a * (a / b).powf(k / (l - k));
        let crossing = (a / b).powf(1.0 / (l - k));
        let argmax = (k * a / (l * b)).powf(1.0 / (l - k));
        let f = |t: f64| a * t.powf(k) - b * t.powf(l);
        let mut worst = f(0.0).max(f(argmax));
        for j in 0..=T_POINTS {
            worst = worst.max(f(2.0 * crossing * j as f64 / T_POINTS as f64));
        }
        tally.le(worst, rhs, CHECK_SLACK);
        tally.samples += 1;
    }
    tally.finish(true)
}

/// `(|x|^{r-2} x - |y|^{r-2} y) . (x - y) >= C |x - y|^r` on random pairs in
/// `R^dim`. Reports the empirical constant `c_hat` (the minimum ratio);
/// fails on any negative left-hand side or if `c_hat` is not positive.
pub fn check_strong_monotonicity(
    r: f64,
    dim: usize,
    samples: usize,
    seed: u64,
) -> Result<CheckReport> {
    if !(r >= 2.0) || dim == 0 {
        return Err(Error::PreconditionViolated(format!(
            "need r >= 2 and dim >= 1, got r = {r}, dim = {dim}"
        )));
    }
    let mut rng = rng(seed);
    let mut tally = Tally::new(format!("strong_monotonicity_r{r}"));
    let mut c_hat = f64::INFINITY;
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    for i in 0..samples {
        let scale = log_uniform(&mut rng, 1e-3, 1e3);
        let x: Vec<f64> = (0..dim).map(|_| rng.random_range(-scale..scale)).collect();
        let y: Vec<f64> = match i % 10 {
            0 => vec![0.0; dim],
            1 => x.iter().map(|v| v * rng.random_range(0.5..1.5)).collect(),
            _ => (0..dim).map(|_| rng.random_range(-scale..scale)).collect(),
        };
        let d: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
        let nd = norm(&d);
        if nd == 0.0 {
            tally.skipped += 1;
            continue;
        }
        let (nx, ny) = (norm(&x), norm(&y));
        let fx = if nx == 0.0 { 0.0 } else { nx.powf(r - 2.0) };
        let fy = if ny == 0.0 { 0.0 } else { ny.powf(r - 2.0) };
        let lhs: f64 = (0..dim).map(|a| (fx * x[a] - fy * y[a]) * d[a]).sum();
        // rounding floor of the dot product
        let floor = (0..dim)
            .map(|a| ((fx * x[a]).abs() + (fy * y[a]).abs()) * d[a].abs())
            .sum::<f64>();
        tally.nonnegative(lhs, floor);
        c_hat = c_hat.min(lhs / nd.powf(r));
        tally.samples += 1;
    }
    tally.constant("r", r);
    tally.constant("c_hat", c_hat);
    Ok(tally.finish(c_hat > 0.0))
}

/// `C = (lambda/m^-) [(lambda q^+/m^-)^{m^+/(q^- - m^+)} + (lambda q^+/m^-)^{m^-/(q^+ - m^-)}]`
/// and `D = C |Omega|`.
pub fn coercivity_constants(lambda: f64, s: &ExponentSet) -> (f64, f64) {
    let (m_lo, m_hi, q_lo, q_hi) = (s.m.inf(), s.m.sup(), s.q.inf(), s.q.sup());
    let base = lambda * q_hi / m_lo;
    let c = lambda / m_lo * (base.powf(m_hi / (q_lo - m_hi)) + base.powf(m_lo / (q_hi - m_lo)));
    (c, c * s.grid().volume())
}

/// Measures the sphere radius `eta` and level `alpha` around the origin:
/// every direction is scaled to gradient norm `eta` (exponent `m`) and `J` is
/// evaluated there. Also measures the embedding ratios
/// `C1 = min ||u|| / |u|_{q^+}`, `C2 = min ||u|| / |u|_{q^-}` over the
/// directions, and checks on every sample with `eta < 1` the lower bound
/// `J(u) >= g(eta) eta^{m^+}`, `g(t) = beta - gamma t^{q^+ - m^+} - delta t^{q^- - m^+}`.
pub fn check_mp_geometry(
    lambda: f64,
    s: &ExponentSet,
    eta_grid: &[f64],
    directions: usize,
    seed: u64,
) -> Result<CheckReport> {
    require(s, Theorem::T1)?;
    if eta_grid.is_empty() || directions == 0 {
        return Err(Error::PreconditionViolated(
            "need at least one radius and one direction".into(),
        ));
    }
    let grid = s.grid();
    let energy = Energy::new(s, lambda, Functional::J);
    let mut rng = rng(seed);
    let (m_lo, m_hi, q_lo, q_hi) = (s.m.inf(), s.m.sup(), s.q.inf(), s.q.sup());
    let q_hi_field = ExponentField::constant(grid.clone(), q_hi)?;
    let q_lo_field = ExponentField::constant(grid.clone(), q_lo)?;

    let mut units = Vec::with_capacity(directions);
    let (mut c1, mut c2) = (f64::INFINITY, f64::INFINITY);
    for i in 0..directions {
        let d = random_sample(grid, &mut rng, i);
        let n = sobolev_norm(&d, &s.m)?;
        let unit = d.scaled(1.0 / n);
        let means = node_to_cell(&unit);
        let (lq_hi, _) = luxemburg_norm_cells(grid, &means, &q_hi_field)?;
        let (lq_lo, _) = luxemburg_norm_cells(grid, &means, &q_lo_field)?;
        c1 = c1.min(1.0 / lq_hi);
        c2 = c2.min(1.0 / lq_lo);
        units.push(unit);
    }
    let beta = 1.0 / m_hi;
    let gamma = 1.0 / (q_lo * c1.powf(q_hi));
    let delta = 1.0 / (q_lo * c2.powf(q_lo));
    let g = |t: f64| beta - gamma * t.powf(q_hi - m_hi) - delta * t.powf(q_lo - m_hi);

    let mut tally = Tally::new("mountain_pass_geometry");
    let mut best: Option<(f64, f64)> = None;
    for &eta in eta_grid {
        let mut min_j = f64::INFINITY;
        for unit in &units {
            let u = unit.scaled(eta);
            let j = energy.value(&u);
            min_j = min_j.min(j);
            if eta < 1.0 {
                tally.le(g(eta) * eta.powf(m_hi), j, CHECK_SLACK);
            }
            tally.samples += 1;
        }
        if min_j > 0.0 && best.is_none_or(|(e, _)| eta > e) {
            best = Some((eta, min_j));
        }
    }
    let Some((eta, alpha)) = best else {
        return Err(Error::NoPositiveSphere);
    };
    let eta_min = eta_grid.iter().copied().fold(f64::INFINITY, f64::min);
    // largest grid radius below which g stays positive
    let mut g_positive = 0.0;
    for &t in eta_grid {
        if g(t) > 0.0 && t > g_positive {
            g_positive = t;
        }
    }
    tally.constant("eta", eta);
    tally.constant("alpha", alpha);
    tally.constant("c1", c1);
    tally.constant("c2", c2);
    tally.constant("beta", beta);
    tally.constant("gamma", gamma);
    tally.constant("delta", delta);
    tally.constant("g_at_smallest_eta", g(eta_min));
    tally.constant("g_positive_up_to", g_positive);
    tally.constant("m_minus", m_lo);
    Ok(tally.finish(g(eta_min) > 0.0))
}

/// Along `rays` random directions of the span of `k` random bumps, finds the
/// first radius `T(w)` of the doubling schedule `1, 2, 4, ...` with
/// `J(t w) < 0`, then checks that `J` stays negative over `tail` further
/// doublings. Reports `sup T(w)`.
pub fn check_ray_boundedness(
    lambda: f64,
    s: &ExponentSet,
    k: usize,
    rays: usize,
    doublings: usize,
    seed: u64,
) -> Result<CheckReport> {
    const TAIL: usize = 8;
    if k == 0 || k > 8 {
        return Err(Error::PreconditionViolated(format!(
            "subspace dimension must be in 1..=8, got {k}"
        )));
    }
    let grid = s.grid();
    let energy = Energy::new(s, lambda, Functional::J);
    let mut rng = rng(seed);
    let basis: Vec<GridFunction> = (0..k)
        .map(|_| {
            let (lo, hi): (Vec<f64>, Vec<f64>) = grid
                .extent()
                .iter()
                .map(|&e| {
                    let a = rng.random_range(0.1..0.6) * e;
                    let b = a + rng.random_range(0.1..0.3) * e;
                    (a, b.min(0.9 * e))
                })
                .unzip();
            shaped_bump(grid.clone(), 1.0, &SubBox::new(lo, hi))
                .expect("sub-box lies inside the domain")
        })
        .collect();

    let mut tally = Tally::new("ray_boundedness");
    let mut sup_t: f64 = 0.0;
    for ray in 0..rays {
        let mut w = GridFunction::zeros(grid.clone());
        for b in &basis {
            w = w.axpy(rng.random_range(-1.0..1.0), b);
        }
        if w.max_abs() == 0.0 {
            tally.skipped += 1;
            continue;
        }
        let mut t = 1.0;
        let mut found = None;
        for _ in 0..=doublings {
            if energy.value(&w.scaled(t)) < 0.0 {
                found = Some(t);
                break;
            }
            t *= 2.0;
        }
        let Some(t_ray) = found else {
            return Err(Error::RayExhausted { ray });
        };
        let mut tt = t_ray;
        for _ in 0..TAIL {
            tt *= 2.0;
            let j = energy.value(&w.scaled(tt));
            if !(j < 0.0) {
                tally.fail();
            }
        }
        sup_t = sup_t.max(t_ray);
        tally.samples += 1;
    }
    tally.constant("sup_t", sup_t);
    tally.constant("subspace_dim", k as f64);
    Ok(tally.finish(true))
}

/// `(lambda/m^-) int |u|^m - (1/q^+) int |u|^q <= D` and the floor
/// `I(u) >= ||u||^{m^-} / m^+ - D` on random fields with gradient norm
/// above one, plus the trend of `(I(t u) + D) / t^{m^-}` along a ray.
pub fn check_coercivity(
    lambda: f64,
    s: &ExponentSet,
    samples: usize,
    seed: u64,
) -> Result<CheckReport> {
    require(s, Theorem::T2)?;
    let grid = s.grid();
    let energy = Energy::new(s, lambda, Functional::I);
    let (c, d) = coercivity_constants(lambda, s);
    let (m_lo, m_hi, q_hi) = (s.m.inf(), s.m.sup(), s.q.sup());
    let mut rng = rng(seed);
    let mut tally = Tally::new("coercivity");

    // u = 0: the integral bound reads 0 <= D
    tally.le(0.0, d, CHECK_SLACK);
    let mut min_gap = f64::INFINITY;
    let mut ray_dir = None;
    for i in 0..samples {
        let u0 = random_sample(grid, &mut rng, i);
        let n0 = sobolev_norm(&u0, &s.m)?;
        let target = log_uniform(&mut rng, 1.0 + 1e-6, 1e3);
        let u = u0.scaled(target / n0);
        let norm = sobolev_norm(&u, &s.m)?;
        let rep = energy.report(&u);
        let means = node_to_cell(&u);
        let int_m = modular_cells(grid, &means, &s.m);
        let int_q = modular_cells(grid, &means, &s.q);
        tally.le(lambda / m_lo * int_m - int_q / q_hi, d, CHECK_SLACK);
        let floor = norm.powf(m_lo) / m_hi - d;
        tally.le(floor, rep.total, CHECK_SLACK);
        min_gap = min_gap.min(rep.total - floor);
        if ray_dir.is_none() && i % 2 == 0 {
            ray_dir = Some(u.scaled(1.0 / norm));
        }
        tally.samples += 1;
    }
    let mut trend = f64::INFINITY;
    if let Some(w) = ray_dir {
        let mut t: f64 = 2.0;
        for _ in 0..20 {
            trend = trend.min((energy.value(&w.scaled(t)) + d) / t.powf(m_lo));
            t *= 2.0;
        }
    }
    tally.constant("C", c);
    tally.constant("D", d);
    tally.constant("min_floor_gap", min_gap);
    tally.constant("min_ray_trend", trend);
    Ok(tally.finish(trend > 0.0))
}

/// Hölder's inequality on random pairs.
pub fn check_holder_inequality(
    p: &ExponentField,
    samples: usize,
    seed: u64,
) -> Result<CheckReport> {
    let grid = p.grid();
    let mut rng = rng(seed);
    let mut tally = Tally::new("holder");
    for i in 0..samples {
        let u = random_sample(grid, &mut rng, i);
        let v = random_sample(grid, &mut rng, i + 1);
        let rep = check_holder(&u, &v, p)?;
        tally.le(rep.lhs, rep.rhs, CHECK_SLACK);
        tally.samples += 1;
    }
    Ok(tally.finish(true))
}

/// Modular sandwiches `|u|^{p^-} <= rho(u) <= |u|^{p^+}` above norm one and
/// the mirrored bounds below it.
pub fn check_norm_modular_relations(
    p: &ExponentField,
    samples: usize,
    seed: u64,
) -> Result<CheckReport> {
    let grid = p.grid();
    let mut rng = rng(seed);
    let mut tally = Tally::new("norm_modular_relations");
    let (mut above, mut below) = (0usize, 0usize);
    for i in 0..samples {
        let u = random_sample(grid, &mut rng, i);
        let rep = check_modular_norm_relations(&u, p)?;
        tally.le(rep.lower, rep.modular, CHECK_SLACK);
        tally.le(rep.modular, rep.upper, CHECK_SLACK);
        if !rep.pass {
            tally.fail();
        }
        match rep.regime {
            NormRegime::Above => above += 1,
            NormRegime::Below => below += 1,
            NormRegime::Unit => {}
        }
        tally.samples += 1;
    }
    tally.constant("cases_above_one", above as f64);
    tally.constant("cases_below_one", below as f64);
    Ok(tally.finish(true))
}

/// `|u|_{r1} <= (|Omega| + 1) |u|_{r2}` for `r1 <= r2`.
pub fn check_inclusion(
    r1: &ExponentField,
    r2: &ExponentField,
    samples: usize,
    seed: u64,
) -> Result<CheckReport> {
    let grid = r1.grid();
    let mut rng = rng(seed);
    let mut tally = Tally::new("inclusion_bound");
    for i in 0..samples {
        let u = random_sample(grid, &mut rng, i);
        let rep = check_inclusion_bound(&u, r1, r2)?;
        tally.le(rep.lhs, rep.rhs, CHECK_SLACK);
        tally.samples += 1;
    }
    tally.constant("constant", grid.volume() + 1.0);
    Ok(tally.finish(true))
}

/// Luxemburg norm solver: homogeneity `|c u| = |c| |u|` (relative `1e-8`),
/// the closed form `(int |u|^p)^{1/p}` for constant `p` (relative `1e-10`),
/// and the root residual `|rho(u / |u|) - 1| <= 1e-10`.
pub fn check_luxemburg_norm(p: &ExponentField, samples: usize, seed: u64) -> Result<CheckReport> {
    let grid = p.grid();
    let mut rng = rng(seed);
    let mut tally = Tally::new("luxemburg_norm");
    let mut worst_residual: f64 = 0.0;
    for i in 0..samples {
        let u = random_sample(grid, &mut rng, i);
        let c = rng.random_range(-1.0..1.0) * 10f64.powf(rng.random_range(-3.0..3.0));
        let (nu, trace) = luxemburg_norm(&u, p)?;
        let (ncu, _) = luxemburg_norm(&u.scaled(c), p)?;
        tally.le((ncu - c.abs() * nu).abs(), 1e-8 * c.abs() * nu, 0.0);
        tally.le(trace.residual, NORM_TOL, 0.0);
        worst_residual = worst_residual.max(trace.residual);

        let pc = rng.random_range(1.1..6.0);
        let constant = ExponentField::constant(grid.clone(), pc)?;
        let (n_const, _) = luxemburg_norm(&u, &constant)?;
        let closed = modular_cells(grid, &node_to_cell(&u), &constant).powf(1.0 / pc);
        tally.le((n_const - closed).abs(), 1e-10 * closed, 0.0);
        tally.samples += 1;
    }
    tally.constant("worst_root_residual", worst_residual);
    Ok(tally.finish(true))
}

/// Analytic directional derivatives of `J` and `I` against central
/// differences, relative error at most `1e-4`.
pub fn check_gradient_consistency(
    lambda: f64,
    s: &ExponentSet,
    samples: usize,
    seed: u64,
) -> CheckReport {
    let grid = s.grid();
    let mut rng = rng(seed);
    let mut tally = Tally::new("gradient_consistency");
    let mut worst: f64 = 0.0;
    for i in 0..samples {
        let u = random_sample(grid, &mut rng, i);
        let v = random_sample(grid, &mut rng, i + 1);
        for which in [Functional::J, Functional::I] {
            let e = Energy::new(s, lambda, which);
            let analytic = pairing(&e.gradient(&u), &v);
            let eps = 1e-5 * u.max_abs() / v.max_abs();
            let fd = e.difference(&u.axpy(-eps, &v), &v.scaled(2.0 * eps)) / (2.0 * eps);
            let rel = (analytic - fd).abs() / analytic.abs().max(fd.abs()).max(f64::MIN_POSITIVE);
            worst = worst.max(rel);
            tally.le(rel, 1e-4, 0.0);
        }
        tally.samples += 1;
    }
    tally.constant("worst_relative_error", worst);
    tally.finish(true)
}

/// `J(-u) = J(u)`, `I(-u) = I(u)` and `grad(-u) = -grad(u)`, exactly.
pub fn check_parity(lambda: f64, s: &ExponentSet, samples: usize, seed: u64) -> CheckReport {
    let grid = s.grid();
    let mut rng = rng(seed);
    let mut tally = Tally::new("parity");
    for i in 0..samples {
        let u = random_sample(grid, &mut rng, i);
        let neg = u.scaled(-1.0);
        for which in [Functional::J, Functional::I] {
            let e = Energy::new(s, lambda, which);
            // IEEE equality: exact, with +0 and -0 identified
            let even = e.value(&u) == e.value(&neg);
            let (a, b) = (e.gradient(&u), e.gradient(&neg));
            let odd =
                a.0.values()
                    .iter()
                    .zip(b.0.values())
                    .all(|(x, y)| *x == -*y);
            if !(even && odd) {
                tally.fail();
            }
        }
        tally.samples += 1;
    }
    tally.finish(true)
}

/// Midpoint convexity of the gradient part `Lambda_1 + Lambda_2`.
pub fn check_convexity(s: &ExponentSet, samples: usize, seed: u64) -> CheckReport {
    let grid = s.grid();
    let energy = Energy::new(s, 0.0, Functional::I);
    let mut rng = rng(seed);
    let mut tally = Tally::new("gradient_part_convexity");
    for i in 0..samples {
        let u = random_sample(grid, &mut rng, i);
        let v = random_sample(grid, &mut rng, i + 1);
        let mid = u.add(&v).scaled(0.5);
        let lhs = energy.report(&mid).gradient_part();
        let rhs = 0.5 * (energy.report(&u).gradient_part() + energy.report(&v).gradient_part());
        tally.le(lhs, rhs, CHECK_SLACK);
        tally.samples += 1;
    }
    tally.finish(true)
}

/// Weak-form certificate of a computed critical point: for `tests` random
/// zero-boundary `v`, `|<E'(u), v>| <= 10 tol |v|_{L2}`.
pub fn certify_weak_solution(
    result: &SolveResult,
    energy: &Energy<'_>,
    tol: f64,
    tests: usize,
    seed: u64,
) -> CheckReport {
    let grid = result.u.grid();
    let r = energy.gradient(&result.u);
    let mut rng = rng(seed);
    let mut tally = Tally::new("weak_solution_certificate");
    for i in 0..tests {
        let v = random_sample(grid, &mut rng, i);
        tally.le(pairing(&r, &v).abs(), 10.0 * tol * l2_norm(&v), 0.0);
        tally.samples += 1;
    }
    tally.constant("residual", residual_norm(&r));
    tally.constant(
        "sobolev_norm_m",
        sobolev_norm(&result.u, &energy.exps.m).unwrap_or(f64::NAN),
    );
    tally.constant("energy", energy.value(&result.u));
    tally.finish(true)
}

/// Sample counts for [`run_suite`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteSizes {
    pub pointwise: usize,
    pub auxiliary: usize,
    pub monotonicity: usize,
    pub function_space: usize,
    pub coercivity: usize,
    pub directions: usize,
    pub eta_points: usize,
    pub rays: usize,
    pub subspace_dim: usize,
    pub gradient: usize,
    pub parity: usize,
    pub convexity: usize,
    pub norm: usize,
}

impl Default for SuiteSizes {
    fn default() -> Self {
        Self {
            pointwise: 10_000,
            auxiliary: 10_000,
            monotonicity: 100_000,
            function_space: 200,
            coercivity: 500,
            directions: 32,
            eta_points: 13,
            rays: 50,
            subspace_dim: 4,
            gradient: 20,
            parity: 50,
            convexity: 100,
            norm: 50,
        }
    }
}

/// Every check on one exponent set. Checks whose theorem hypotheses fail are
/// reported as failed with zero samples. Each check gets its own seed
/// derived from `seed`.
pub fn run_suite(lambda: f64, s: &ExponentSet, sizes: &SuiteSizes, seed: u64) -> Vec<CheckReport> {
    let sub = |i: u64| seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(i);
    let or_failed = |name: &str, r: Result<CheckReport>| {
        r.unwrap_or_else(|e| CheckReport {
            name: name.to_string(),
            samples: 0,
            skipped: 0,
            failures: 1,
            worst_margin: 0.0,
            constants: BTreeMap::new(),
            error: Some(e.to_string()),
            pass: false,
        })
    };
    let dim = s.dim;
    vec![
        check_pointwise_inequalities(sizes.pointwise, sub(1)),
        check_auxiliary_inequality(sizes.auxiliary, sub(2)),
        or_failed(
            "strong_monotonicity_r2",
            check_strong_monotonicity(2.0, dim, sizes.monotonicity, sub(3)),
        ),
        or_failed(
            "strong_monotonicity_r3",
            check_strong_monotonicity(3.0, dim, sizes.monotonicity, sub(4)),
        ),
        or_failed(
            "mountain_pass_geometry",
            check_mp_geometry(
                lambda,
                s,
                &log_grid(1e-3, 1.0, sizes.eta_points),
                sizes.directions,
                sub(5),
            ),
        ),
        or_failed(
            "ray_boundedness",
            check_ray_boundedness(lambda, s, sizes.subspace_dim, sizes.rays, 60, sub(6)),
        ),
        or_failed(
            "coercivity",
            check_coercivity(lambda, s, sizes.coercivity, sub(7)),
        ),
        or_failed(
            "holder",
            check_holder_inequality(&s.m, sizes.function_space, sub(8)),
        ),
        or_failed(
            "norm_modular_relations",
            check_norm_modular_relations(&s.m, sizes.function_space, sub(9)),
        ),
        or_failed(
            "inclusion_bound",
            check_inclusion(&s.m, &s.q, sizes.function_space, sub(10)),
        ),
        or_failed(
            "luxemburg_norm",
            check_luxemburg_norm(&s.m, sizes.norm, sub(11)),
        ),
        check_gradient_consistency(lambda, s, sizes.gradient, sub(12)),
        check_parity(lambda, s, sizes.parity, sub(13)),
        check_convexity(s, sizes.convexity, sub(14)),
    ]
}
