//! The double-phase energies
//!
//! ```text
//! J(u) = int |grad u|^p1/p1 + |grad u|^p2/p2 + lambda |u|^m/m - |u|^q/q
//! I(u) = int |grad u|^p1/p1 + |grad u|^p2/p2 - lambda |u|^m/m + |u|^q/q
//! ```
//!
//! and their gradients. The gradient is the exact derivative of the discrete
//! energy (chain rule through corner averaging and the cell gradient), so a
//! zero residual is an exact discrete weak solution.

use serde::Serialize;

use crate::discretization::{cell_gradient, GridFunction, MAX_DIM};
use crate::exponents::ExponentSet;

/// Smoothing of `|grad u|` used only for gradient exponents with infimum
/// below two.
pub const FLUX_EPS: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Functional {
    /// `+lambda` on the m-term, `-` on the q-term (infinitely many solutions).
    J,
    /// `-lambda` on the m-term, `+` on the q-term (coercive, minimised).
    I,
}

impl Functional {
    /// Signs of the m- and q-terms.
    fn signs(self) -> (f64, f64) {
        match self {
            Functional::J => (1.0, -1.0),
            Functional::I => (-1.0, 1.0),
        }
    }
}

/// Value of an energy with its four nonnegative integrals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyReport {
    pub which: Functional,
    pub lambda: f64,
    pub total: f64,
    /// `int |grad u|^{p1}/p1`
    pub term_grad_p1: f64,
    /// `int |grad u|^{p2}/p2`
    pub term_grad_p2: f64,
    /// `int |u|^m/m`
    pub term_m: f64,
    /// `int |u|^q/q`
    pub term_q: f64,
    /// Gradient-magnitude smoothing in effect, if any.
    pub flux_eps: Option<f64>,
}

impl EnergyReport {
    fn assemble(which: Functional, lambda: f64, terms: [f64; 4], flux_eps: Option<f64>) -> Self {
        let [g1, g2, tm, tq] = terms;
        let (sm, sq) = which.signs();
        let total = g1 + g2 + sm * lambda * tm + sq * tq;
        Self {
            which,
            lambda,
            total,
            term_grad_p1: g1,
            term_grad_p2: g2,
            term_m: tm,
            term_q: tq,
            flux_eps,
        }
    }

    /// Same field, different `lambda`: the energy is affine in `lambda`.
    pub fn with_lambda(&self, lambda: f64) -> Self {
        Self::assemble(
            self.which,
            lambda,
            [
                self.term_grad_p1,
                self.term_grad_p2,
                self.term_m,
                self.term_q,
            ],
            self.flux_eps,
        )
    }

    /// `Lambda_1 + Lambda_2`.
    pub fn gradient_part(&self) -> f64 {
        self.term_grad_p1 + self.term_grad_p2
    }
}

/// Derivative of an energy: `sum_nodes r v prod(h)` is the directional
/// derivative along any zero-boundary `v`.
#[derive(Debug, Clone, PartialEq)]
pub struct Residual(pub GridFunction);

impl Residual {
    pub fn field(&self) -> &GridFunction {
        &self.0
    }
}

/// An energy functional bound to its exponents and `lambda`.
#[derive(Debug, Clone, Copy)]
pub struct Energy<'a> {
    pub exps: &'a ExponentSet,
    pub lambda: f64,
    pub which: Functional,
}

#[inline]
fn grad_term(mag: f64, p: f64, eps: Option<f64>) -> f64 {
    match eps {
        None => mag.powf(p) / p,
        Some(e) => ((mag * mag + e * e).powf(0.5 * p) - e.powf(p)) / p,
    }
}

#[inline]
fn flux_coeff(mag: f64, p: f64, eps: Option<f64>) -> f64 {
    match eps {
        None if mag == 0.0 => {
            if p == 2.0 {
                1.0
            } else {
                0.0
            }
        }
        None => mag.powf(p - 2.0),
        Some(e) => (mag * mag + e * e).powf(0.5 * p - 1.0),
    }
}

/// `(x + dx)^e - x^e` for `x > 0`, `x + dx >= 0`.
#[inline]
fn power_increment(x: f64, dx: f64, e: f64) -> f64 {
    let t = dx / x;
    if t > -0.5 {
        x.powf(e) * (e * t.ln_1p()).exp_m1()
    } else {
        (x + dx).powf(e) - x.powf(e)
    }
}

/// Change of `|grad u|^p/p` when `|grad u|^2` moves from `sq` to `sq + dsq`.
#[inline]
fn grad_term_diff(sq: f64, dsq: f64, p: f64, eps: Option<f64>) -> f64 {
    let base = match eps {
        None => sq,
        Some(e) => sq + e * e,
    };
    if base == 0.0 {
        return grad_term((sq + dsq).max(0.0).sqrt(), p, eps);
    }
    power_increment(base, dsq, 0.5 * p) / p
}

/// `(|a + b|^r - |a|^r) / r`.
#[inline]
fn pow_diff(a: f64, b: f64, r: f64) -> f64 {
    if a == 0.0 {
        return b.abs().powf(r) / r;
    }
    let t = b / a;
    if t > -0.5 {
        power_increment(a.abs(), t * a.abs(), r) / r
    } else {
        ((a + b).abs().powf(r) - a.abs().powf(r)) / r
    }
}

/// `|s|^{r-2} s`, continuous at zero for `r > 1`.
#[inline]
fn odd_power(s: f64, r: f64) -> f64 {
    if s == 0.0 {
        0.0
    } else {
        s.abs().powf(r - 2.0) * s
    }
}

impl<'a> Energy<'a> {
    pub fn new(exps: &'a ExponentSet, lambda: f64, which: Functional) -> Self {
        Self {
            exps,
            lambda,
            which,
        }
    }

    fn eps(&self) -> (Option<f64>, Option<f64>) {
        let reg = |inf: f64| (inf < 2.0).then_some(FLUX_EPS);
        (reg(self.exps.p1.inf()), reg(self.exps.p2.inf()))
    }

    pub fn report(&self, u: &GridFunction) -> EnergyReport {
        let grid = u.grid();
        let dim = grid.dim();
        let vals = u.values();
        let offsets = grid.corner_offsets();
        let avg = 1.0 / offsets.len() as f64;
        let (e1, e2) = self.eps();
        let (p1, p2, m, q) = (
            self.exps.p1.values(),
            self.exps.p2.values(),
            self.exps.m.values(),
            self.exps.q.values(),
        );
        let mut g = [0.0; MAX_DIM];
        let mut sums = [0.0; 4];
        for (c, &base) in grid.cell_bases().iter().enumerate() {
            cell_gradient(grid, vals, base, &mut g[..dim]);
            let mag = g[..dim].iter().map(|x| x * x).sum::<f64>().sqrt();
            let ubar = offsets.iter().map(|o| vals[base + o]).sum::<f64>() * avg;
            let a = ubar.abs();
            sums[0] += grad_term(mag, p1[c], e1);
            sums[1] += grad_term(mag, p2[c], e2);
            sums[2] += a.powf(m[c]) / m[c];
            sums[3] += a.powf(q[c]) / q[c];
        }
        let vol = grid.cell_volume();
        let flux_eps = e1.or(e2);
        EnergyReport::assemble(self.which, self.lambda, sums.map(|s| s * vol), flux_eps)
    }

    pub fn value(&self, u: &GridFunction) -> f64 {
        self.report(u).total
    }

    /// `E(u + s) - E(u)`, evaluated cell by cell in a form that keeps its
    /// relative accuracy when `s` is small against `u`. Descent steps near a
    /// critical point change the energy by far less than one ulp of its
    /// value, so differences of [`Energy::value`] are pure noise there.
    pub fn difference(&self, u: &GridFunction, s: &GridFunction) -> f64 {
        let grid = u.grid();
        let dim = grid.dim();
        let (uv, sv) = (u.values(), s.values());
        let offsets = grid.corner_offsets();
        let avg = 1.0 / offsets.len() as f64;
        let (e1, e2) = self.eps();
        let (sm, sq) = self.which.signs();
        let (p1, p2, m, q) = (
            self.exps.p1.values(),
            self.exps.p2.values(),
            self.exps.m.values(),
            self.exps.q.values(),
        );
        let mut g = [0.0; MAX_DIM];
        let mut dg = [0.0; MAX_DIM];
        let mut sums = [0.0; 4];
        for (c, &base) in grid.cell_bases().iter().enumerate() {
            cell_gradient(grid, uv, base, &mut g[..dim]);
            cell_gradient(grid, sv, base, &mut dg[..dim]);
            let sq_mag: f64 = g[..dim].iter().map(|x| x * x).sum();
            let d_sq_mag: f64 = g[..dim]
                .iter()
                .zip(&dg[..dim])
                .map(|(a, b)| (2.0 * a + b) * b)
                .sum();
            sums[0] += grad_term_diff(sq_mag, d_sq_mag, p1[c], e1);
            sums[1] += grad_term_diff(sq_mag, d_sq_mag, p2[c], e2);
            let ubar = offsets.iter().map(|o| uv[base + o]).sum::<f64>() * avg;
            let dbar = offsets.iter().map(|o| sv[base + o]).sum::<f64>() * avg;
            sums[2] += pow_diff(ubar, dbar, m[c]);
            sums[3] += pow_diff(ubar, dbar, q[c]);
        }
        let [g1, g2, tm, tq] = sums;
        (g1 + g2 + sm * self.lambda * tm + sq * tq) * grid.cell_volume()
    }

    /// Exact derivative of [`Energy::report`], divided by the cell volume and
    /// with boundary entries zeroed. Summation order is fixed, so the map is
    /// exactly odd in `u`.
    pub fn gradient(&self, u: &GridFunction) -> Residual {
        let grid = u.grid();
        let dim = grid.dim();
        let vals = u.values();
        let offsets = grid.corner_offsets();
        let avg = 1.0 / offsets.len() as f64;
        let edge_w = 1.0 / (1usize << (dim - 1)) as f64;
        let inv_h: Vec<f64> = grid.spacing().iter().map(|h| edge_w / h).collect();
        let (e1, e2) = self.eps();
        let (sm, sq) = self.which.signs();
        let (p1, p2, m, q) = (
            self.exps.p1.values(),
            self.exps.p2.values(),
            self.exps.m.values(),
            self.exps.q.values(),
        );
        let mut r = vec![0.0; vals.len()];
        let mut g = [0.0; MAX_DIM];
        for (c, &base) in grid.cell_bases().iter().enumerate() {
            cell_gradient(grid, vals, base, &mut g[..dim]);
            let mag = g[..dim].iter().map(|x| x * x).sum::<f64>().sqrt();
            let kappa = flux_coeff(mag, p1[c], e1) + flux_coeff(mag, p2[c], e2);
            let mut flux = [0.0; MAX_DIM];
            for a in 0..dim {
                flux[a] = kappa * g[a] * inv_h[a];
            }
            let ubar = offsets.iter().map(|o| vals[base + o]).sum::<f64>() * avg;
            let nodal =
                (sm * self.lambda * odd_power(ubar, m[c]) + sq * odd_power(ubar, q[c])) * avg;
            for (bits, &off) in offsets.iter().enumerate() {
                let mut acc = nodal;
                for (a, f) in flux[..dim].iter().enumerate() {
                    if bits >> a & 1 == 1 {
                        acc += f;
                    } else {
                        acc -= f;
                    }
                }
                r[base + off] += acc;
            }
        }
        for (v, &b) in r.iter_mut().zip(grid.boundary_mask()) {
            if b {
                *v = 0.0;
            }
        }
        Residual(GridFunction::new(grid.clone(), r, true).expect("residual has grid shape"))
    }
}

/// Energy report for `u`.
pub fn eval_energy(
    u: &GridFunction,
    lambda: f64,
    s: &ExponentSet,
    which: Functional,
) -> EnergyReport {
    Energy::new(s, lambda, which).report(u)
}

/// Derivative of the energy at `u` as a nodal field.
pub fn grad_energy(u: &GridFunction, lambda: f64, s: &ExponentSet, which: Functional) -> Residual {
    Energy::new(s, lambda, which).gradient(u)
}

/// Discrete L2 norm `sqrt(sum r^2 prod(h))`.
pub fn residual_norm(r: &Residual) -> f64 {
    let g = r.0.grid();
    (r.0.values().iter().map(|x| x * x).sum::<f64>() * g.cell_volume()).sqrt()
}

/// `sum_nodes r v prod(h)`.
pub fn pairing(r: &Residual, v: &GridFunction) -> f64 {
    let g = r.0.grid();
    r.0.values()
        .iter()
        .zip(v.values())
        .map(|(a, b)| a * b)
        .sum::<f64>()
        * g.cell_volume()
}

/// Discrete L2 norm of a nodal field.
pub fn l2_norm(v: &GridFunction) -> f64 {
    (v.values().iter().map(|x| x * x).sum::<f64>() * v.grid().cell_volume()).sqrt()
}
