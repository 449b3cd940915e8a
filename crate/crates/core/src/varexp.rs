//! Variable exponent Lebesgue and Sobolev machinery on the grid: modulars,
//! Luxemburg norms, the gradient norm of `W_0^{1,p(x)}`, and checks of the
//! Hölder, norm-modular and inclusion inequalities.
//!
//! All integrals use the cell quadrature of corner-averaged values, the same
//! quadrature the energies use, so the inequalities hold exactly for the
//! discrete measure and not only in the limit `h -> 0`.

use serde::Serialize;

use crate::discretization::{
    cell_quadrature, discrete_gradient, node_to_cell, DomainGrid, GridFunction,
};
use crate::error::{Error, Result};
use crate::exponents::{conjugate_exponent, ExponentField};

/// Tolerance on `|rho(u / mu) - 1|` at the returned root.
pub const NORM_TOL: f64 = 1e-10;
/// Initial bracket is `[2^-60, 2^60] * max|u|`.
const BRACKET_EXP: i32 = 60;
const MAX_BRACKET_EXPANSIONS: usize = 4;
const MAX_BISECTIONS: usize = 200;
/// Relative slack for the inequality checks.
pub const CHECK_SLACK: f64 = 1e-12;

/// Bookkeeping of one Luxemburg norm root solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormSolveTrace {
    pub root: f64,
    pub bracket: (f64, f64),
    pub iterations: usize,
    pub residual: f64,
}

impl NormSolveTrace {
    fn zero() -> Self {
        Self {
            root: 0.0,
            bracket: (0.0, 0.0),
            iterations: 0,
            residual: 0.0,
        }
    }
}

/// `int |v|^{p(x)}` for cell-located values `v`.
pub fn modular_cells(grid: &DomainGrid, cells: &[f64], p: &ExponentField) -> f64 {
    let w: Vec<f64> = cells
        .iter()
        .zip(p.values())
        .map(|(v, &e)| v.abs().powf(e))
        .collect();
    cell_quadrature(grid, &w)
}

/// `rho_{p(x)}(u)`.
pub fn modular(u: &GridFunction, p: &ExponentField) -> f64 {
    modular_cells(u.grid(), &node_to_cell(u), p)
}

fn scaled_modular(grid: &DomainGrid, cells: &[f64], p: &ExponentField, mu: f64) -> f64 {
    let w: Vec<f64> = cells
        .iter()
        .zip(p.values())
        .map(|(v, &e)| (v.abs() / mu).powf(e))
        .collect();
    cell_quadrature(grid, &w)
}

/// Luxemburg norm of cell-located values: the root `mu` of
/// `rho(v / mu) = 1`, located by geometric bisection. `mu -> rho(v / mu)` is
/// continuous and strictly decreasing whenever `v != 0`.
pub fn luxemburg_norm_cells(
    grid: &DomainGrid,
    cells: &[f64],
    p: &ExponentField,
) -> Result<(f64, NormSolveTrace)> {
    let scale = cells.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return Ok((0.0, NormSolveTrace::zero()));
    }
    let rho = |mu: f64| scaled_modular(grid, cells, p, mu);
    let widen = 2f64.powi(BRACKET_EXP);
    let (mut lo, mut hi) = (scale / widen, scale * widen);
    let mut expansions = 0;
    while rho(lo) < 1.0 {
        expansions += 1;
        lo /= widen;
        if expansions > MAX_BRACKET_EXPANSIONS || lo == 0.0 {
            return Err(Error::BracketFailure { scale });
        }
    }
    expansions = 0;
    while rho(hi) > 1.0 {
        expansions += 1;
        hi *= widen;
        if expansions > MAX_BRACKET_EXPANSIONS || !hi.is_finite() {
            return Err(Error::BracketFailure { scale });
        }
    }
    let bracket = (lo, hi);

    let mut iterations = 0;
    while iterations < MAX_BISECTIONS {
        let mid = (0.5 * (lo.ln() + hi.ln())).exp();
        if mid <= lo || mid >= hi {
            break;
        }
        iterations += 1;
        if rho(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (r_lo, r_hi) = ((rho(lo) - 1.0).abs(), (rho(hi) - 1.0).abs());
    let (root, residual) = if r_lo < r_hi { (lo, r_lo) } else { (hi, r_hi) };
    Ok((
        root,
        NormSolveTrace {
            root,
            bracket,
            iterations,
            residual,
        },
    ))
}

/// `|u|_{p(x)}`.
pub fn luxemburg_norm(u: &GridFunction, p: &ExponentField) -> Result<(f64, NormSolveTrace)> {
    luxemburg_norm_cells(u.grid(), &node_to_cell(u), p)
}

/// `||u||_{p(x)} = | |grad u| |_{p(x)}` for a zero-boundary field.
pub fn sobolev_norm(u: &GridFunction, p: &ExponentField) -> Result<f64> {
    if !(u.bc_zero() || u.vanishes_on_boundary()) {
        return Err(Error::NotZeroBoundary);
    }
    let mags = discrete_gradient(u).magnitudes();
    Ok(luxemburg_norm_cells(u.grid(), &mags, p)?.0)
}

/// Two sides of an inequality `lhs <= rhs`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InequalityReport {
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

impl InequalityReport {
    fn new(lhs: f64, rhs: f64) -> Self {
        Self {
            lhs,
            rhs,
            pass: lhs <= rhs + CHECK_SLACK * rhs.abs(),
        }
    }

    /// `rhs - lhs`, negative on failure.
    pub fn margin(&self) -> f64 {
        self.rhs - self.lhs
    }
}

/// `|int u v| <= (1/p^- + 1/p'^-) |u|_{p(x)} |v|_{p'(x)}`.
pub fn check_holder(
    u: &GridFunction,
    v: &GridFunction,
    p: &ExponentField,
) -> Result<InequalityReport> {
    let grid = u.grid();
    let (uc, vc) = (node_to_cell(u), node_to_cell(v));
    let prod: Vec<f64> = uc.iter().zip(&vc).map(|(a, b)| a * b).collect();
    let lhs = cell_quadrature(grid, &prod).abs();
    let pc = conjugate_exponent(p);
    let (nu, _) = luxemburg_norm_cells(grid, &uc, p)?;
    let (nv, _) = luxemburg_norm_cells(grid, &vc, &pc)?;
    let rhs = (1.0 / p.inf() + 1.0 / pc.inf()) * nu * nv;
    Ok(InequalityReport::new(lhs, rhs))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum NormRegime {
    Above,
    Unit,
    Below,
}

/// Sandwich `norm^{p^-} <= rho <= norm^{p^+}` (norm above one) or its mirror
/// (norm below one).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModularNormReport {
    pub norm: f64,
    pub modular: f64,
    pub lower: f64,
    pub upper: f64,
    pub regime: NormRegime,
    pub pass: bool,
}

pub fn check_modular_norm_relations(
    u: &GridFunction,
    p: &ExponentField,
) -> Result<ModularNormReport> {
    let (norm, _) = luxemburg_norm(u, p)?;
    let rho = modular(u, p);
    let (regime, lower, upper) = if norm > 1.0 {
        (NormRegime::Above, norm.powf(p.inf()), norm.powf(p.sup()))
    } else if norm < 1.0 {
        (NormRegime::Below, norm.powf(p.sup()), norm.powf(p.inf()))
    } else {
        (NormRegime::Unit, 1.0, 1.0)
    };
    let pass = if regime == NormRegime::Unit {
        (rho - 1.0).abs() <= NORM_TOL
    } else {
        lower * (1.0 - CHECK_SLACK) <= rho && rho <= upper * (1.0 + CHECK_SLACK)
    };
    Ok(ModularNormReport {
        norm,
        modular: rho,
        lower,
        upper,
        regime,
        pass,
    })
}

/// `|u|_{r1(x)} <= (|Omega| + 1) |u|_{r2(x)}` for `r1 <= r2` pointwise.
pub fn check_inclusion_bound(
    u: &GridFunction,
    r1: &ExponentField,
    r2: &ExponentField,
) -> Result<InequalityReport> {
    if let Some((a, b)) = r1.values().iter().zip(r2.values()).find(|(a, b)| a > b) {
        return Err(Error::PreconditionViolated(format!(
            "r1 = {a} exceeds r2 = {b} at some cell"
        )));
    }
    let (n1, _) = luxemburg_norm(u, r1)?;
    let (n2, _) = luxemburg_norm(u, r2)?;
    Ok(InequalityReport::new(n1, (u.grid().volume() + 1.0) * n2))
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn grid(dim: usize, res: usize) -> Arc<DomainGrid> {
        Arc::new(DomainGrid::unit(dim, res).unwrap())
    }

    fn affine_exponent(g: &Arc<DomainGrid>) -> ExponentField {
        ExponentField::from_fn(g.clone(), "p", |x| 2.0 + x[0]).unwrap()
    }

    fn random_field(g: &Arc<DomainGrid>, rng: &mut ChaCha8Rng, amp: f64) -> GridFunction {
        let vals = (0..g.node_count())
            .map(|_| rng.random_range(-amp..amp))
            .collect();
        GridFunction::new(g.clone(), vals, true).unwrap()
    }

    #[test]
    fn modular_basics() {
        let g = grid(3, 6);
        let two = ExponentField::constant(g.clone(), 2.0).unwrap();
        let ones = GridFunction::from_fn(g.clone(), false, |_| 1.0).unwrap();
        assert!((modular(&ones, &two) - 1.0).abs() < 1e-14);
        assert_eq!(modular(&GridFunction::zeros(g), &two), 0.0);
    }

    #[test]
    fn modular_converges_to_closed_form() {
        // int_0^1 2^{2 + x} dx = 4 / ln 2
        let exact = 4.0 / std::f64::consts::LN_2;
        let err = |res| {
            let g = grid(2, res);
            let u = GridFunction::from_fn(g.clone(), false, |_| 2.0).unwrap();
            (modular(&u, &affine_exponent(&g)) - exact).abs()
        };
        let (e1, e2) = (err(17), err(33));
        assert!(e2 < 1e-3, "{e2}");
        assert!(e1 / e2 > 3.5, "order check {}", e1 / e2);
    }

    #[test]
    fn norm_of_zero_is_zero() {
        let g = grid(2, 6);
        let (n, t) = luxemburg_norm(&GridFunction::zeros(g.clone()), &affine_exponent(&g)).unwrap();
        assert_eq!(n, 0.0);
        assert_eq!(t.iterations, 0);
    }

    #[test]
    fn constant_exponent_closed_form() {
        let g = grid(2, 9);
        let two = ExponentField::constant(g.clone(), 2.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = random_field(&g, &mut rng, 3.0);
        // rescale so that the modular is exactly 4
        let u = u.scaled((4.0 / modular(&u, &two)).sqrt());
        let (n, t) = luxemburg_norm(&u, &two).unwrap();
        assert!((n - 2.0).abs() < 1e-12, "{n}");
        assert!(t.residual <= NORM_TOL);
    }

    #[test]
    fn variable_exponent_root_self_consistent() {
        // solve on a 33^2 grid, then check against an independent 257^2 quadrature
        let g = grid(2, 33);
        let u = GridFunction::from_fn(g.clone(), false, |_| 2.0).unwrap();
        let (mu, trace) = luxemburg_norm(&u, &affine_exponent(&g)).unwrap();
        assert!(trace.residual <= NORM_TOL);
        let n = 256;
        let fine: f64 = (0..n)
            .map(|i| (2.0 / mu).powf(2.0 + (i as f64 + 0.5) / n as f64))
            .sum::<f64>()
            / n as f64;
        assert!((fine - 1.0).abs() < 1e-8, "{fine}");
    }

    #[test]
    fn sobolev_norm_homogeneous_and_l2() {
        let g = grid(2, 10);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let u = random_field(&g, &mut rng, 1.0);
        let p = affine_exponent(&g);
        let base = sobolev_norm(&u, &p).unwrap();
        for c in [-3.0, 0.01, 250.0] {
            let s = sobolev_norm(&u.scaled(c), &p).unwrap();
            assert!((s - c.abs() * base).abs() <= 1e-8 * c.abs() * base);
        }
        let two = ExponentField::constant(g.clone(), 2.0).unwrap();
        let mags = discrete_gradient(&u).magnitudes();
        let sq: Vec<f64> = mags.iter().map(|m| m * m).collect();
        let direct = cell_quadrature(&g, &sq).sqrt();
        assert!((sobolev_norm(&u, &two).unwrap() - direct).abs() < 1e-10 * direct);
        assert_eq!(
            sobolev_norm(&GridFunction::zeros(g.clone()), &two).unwrap(),
            0.0
        );
        let ones = GridFunction::from_fn(g, false, |_| 1.0).unwrap();
        assert!(matches!(
            sobolev_norm(&ones, &two),
            Err(Error::NotZeroBoundary)
        ));
    }

    #[test]
    fn holder_cases() {
        let g = grid(2, 8);
        let two = ExponentField::constant(g.clone(), 2.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let u = random_field(&g, &mut rng, 2.0);
        let zero = GridFunction::zeros(g.clone());
        assert!(check_holder(&zero, &u, &two).unwrap().pass);
        let eq = check_holder(&u, &u, &two).unwrap();
        assert!(eq.pass);
        assert!((eq.lhs - eq.rhs).abs() < 1e-12 * eq.rhs);
    }

    #[test]
    fn sandwich_collapses_for_constant_exponent() {
        let g = grid(2, 8);
        let two = ExponentField::constant(g.clone(), 2.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u = random_field(&g, &mut rng, 1.0);
        let u = u.scaled(3.0 / luxemburg_norm(&u, &two).unwrap().0);
        let r = check_modular_norm_relations(&u, &two).unwrap();
        assert!(r.pass);
        assert!((r.modular - 9.0).abs() < 1e-12 && (r.lower - 9.0).abs() < 1e-12);
        let unit = u.scaled(1.0 / 3.0);
        let r = check_modular_norm_relations(&unit, &affine_exponent(&g)).unwrap();
        assert!(r.pass);
    }

    #[test]
    fn inclusion_constant_field() {
        let g = grid(2, 7);
        let ones = GridFunction::from_fn(g.clone(), false, |_| 1.0).unwrap();
        let r1 = ExponentField::constant(g.clone(), 2.0).unwrap();
        let r2 = ExponentField::constant(g.clone(), 3.0).unwrap();
        let r = check_inclusion_bound(&ones, &r1, &r2).unwrap();
        assert!((r.lhs - 1.0).abs() < 1e-12 && (r.rhs - 2.0).abs() < 1e-12 && r.pass);
        assert!(
            check_inclusion_bound(&GridFunction::zeros(g), &r1, &r2)
                .unwrap()
                .pass
        );
        assert!(matches!(
            check_inclusion_bound(&ones, &r2, &r1),
            Err(Error::PreconditionViolated(_))
        ));
    }

    #[test]
    fn modular_decreasing_in_mu() {
        let g = grid(2, 8);
        let p = affine_exponent(&g);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let u = random_field(&g, &mut rng, 1.0);
        let cells = node_to_cell(&u);
        let vals: Vec<f64> = (0..60)
            .map(|k| scaled_modular(&g, &cells, &p, 1e-3 * 1.2f64.powi(k)))
            .collect();
        assert!(vals.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn triangle_inequality() {
        let g = grid(2, 8);
        let p = affine_exponent(&g);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let amp = 10f64.powf(rng.random_range(-2.0..2.0));
            let u = random_field(&g, &mut rng, amp);
            let v = random_field(&g, &mut rng, 1.0);
            let n = |w: &GridFunction| luxemburg_norm(w, &p).unwrap().0;
            assert!(n(&u.add(&v)) <= n(&u) + n(&v) + 1e-10);
        }
    }

    #[test]
    fn norm_and_modular_vanish_together() {
        // damped perturbations u_n = u + 2^-n w: both |u_n - u| and rho(u_n - u)
        // must pass below 1e-6 on the same schedule
        let g = grid(2, 8);
        let p = affine_exponent(&g);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let u = random_field(&g, &mut rng, 1.0);
        let w = random_field(&g, &mut rng, 1.0);
        let mut first_norm = None;
        let mut first_mod = None;
        for n in 0..80 {
            let un = u.axpy(0.5f64.powi(n), &w);
            let d = un.sub(&u);
            let (nd, _) = luxemburg_norm(&d, &p).unwrap();
            let md = modular(&d, &p);
            if nd < 1e-6 && first_norm.is_none() {
                first_norm = Some(n);
            }
            if md < 1e-6 && first_mod.is_none() {
                first_mod = Some(n);
            }
        }
        assert!(first_norm.is_some() && first_mod.is_some());
        let (a, b) = (first_norm.unwrap(), first_mod.unwrap());
        // both reach the threshold; the modular, a power >= 2 of the norm, first
        assert!(b <= a && a <= 80);
    }
}
