//! Variable exponent fields `p1`, `p2`, `q`, their pointwise maximum `m`,
//! and the hypothesis checks required by the two existence results.
//!
//! Field values live at cell centres. The cached `inf`/`sup` summaries are
//! taken over the cell samples together with a lattice four times finer than
//! the node grid covering the closed box, so that they track the analytic
//! extrema over the closure rather than only the cell-centre samples.
//!
//! Exponents are written as expressions in `x1..xN` (see [`FieldExpr`]).
//! In an experiment file they sit under `[exponents]`; the full file
//! grammar is documented in [`crate::cli`].

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::discretization::DomainGrid;
use crate::error::{Error, Result};
use crate::expr::FieldExpr;

/// Refinement factor of the summary lattice.
const SUMMARY_REFINE: usize = 4;

/// A scalar exponent `h(x) > 1`, one value per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ExponentField {
    grid: Arc<DomainGrid>,
    values: Vec<f64>,
    inf: f64,
    sup: f64,
}

impl ExponentField {
    /// Field from raw cell values; summaries are the sample extrema.
    pub fn from_cells(grid: Arc<DomainGrid>, values: Vec<f64>, name: &str) -> Result<Self> {
        if values.len() != grid.cell_count() {
            return Err(Error::ShapeMismatch {
                expected: grid.cell_count(),
                found: values.len(),
            });
        }
        let (inf, sup) = extrema(values.iter().copied());
        Self::checked(grid, values, inf, sup, name)
    }

    pub fn constant(grid: Arc<DomainGrid>, value: f64) -> Result<Self> {
        let n = grid.cell_count();
        Self::checked(grid, vec![value; n], value, value, "constant")
    }

    /// Samples an analytic field at the cell centres.
    pub fn from_fn(grid: Arc<DomainGrid>, name: &str, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let values: Vec<f64> = (0..grid.cell_count())
            .map(|c| f(&grid.cell_center(c)))
            .collect();
        let (ci, cs) = extrema(values.iter().copied());
        let (li, ls) = closure_extrema(&grid, &f);
        Self::checked(grid, values, ci.min(li), cs.max(ls), name)
    }

    pub fn from_expr(grid: Arc<DomainGrid>, name: &str, expr: &FieldExpr) -> Result<Self> {
        check_coords(&grid, expr, name)?;
        Self::from_fn(grid, name, |x| expr.eval(x))
    }

    fn checked(
        grid: Arc<DomainGrid>,
        values: Vec<f64>,
        inf: f64,
        sup: f64,
        name: &str,
    ) -> Result<Self> {
        if !inf.is_finite() || !sup.is_finite() {
            return Err(Error::NonFinite);
        }
        if inf <= 1.0 {
            return Err(Error::RejectsNonCPlus {
                field: name.to_string(),
                value: inf,
            });
        }
        Ok(Self {
            grid,
            values,
            inf,
            sup,
        })
    }

    pub fn grid(&self) -> &Arc<DomainGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `h^-`
    pub fn inf(&self) -> f64 {
        self.inf
    }

    /// `h^+`
    pub fn sup(&self) -> f64 {
        self.sup
    }

    fn map_monotone(&self, f: impl Fn(f64) -> f64, increasing: bool, name: &str) -> Result<Self> {
        let values = self.values.iter().map(|&v| f(v)).collect();
        let (a, b) = (f(self.inf), f(self.sup));
        let (inf, sup) = if increasing { (a, b) } else { (b, a) };
        Self::checked(self.grid.clone(), values, inf, sup, name)
    }
}

fn extrema(it: impl Iterator<Item = f64>) -> (f64, f64) {
    it.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        if v.is_nan() {
            (f64::NAN, f64::NAN)
        } else {
            (lo.min(v), hi.max(v))
        }
    })
}

fn closure_extrema(grid: &DomainGrid, f: &impl Fn(&[f64]) -> f64) -> (f64, f64) {
    let dim = grid.dim();
    let counts: Vec<usize> = grid
        .res()
        .iter()
        .map(|r| (r - 1) * SUMMARY_REFINE + 1)
        .collect();
    let steps: Vec<f64> = grid
        .spacing()
        .iter()
        .map(|h| h / SUMMARY_REFINE as f64)
        .collect();
    let total: usize = counts.iter().product();
    let mut idx = vec![0usize; dim];
    let mut x = vec![0.0; dim];
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for _ in 0..total {
        for a in 0..dim {
            x[a] = idx[a] as f64 * steps[a];
        }
        let v = f(&x);
        if v.is_nan() {
            return (f64::NAN, f64::NAN);
        }
        lo = lo.min(v);
        hi = hi.max(v);
        for a in (0..dim).rev() {
            idx[a] += 1;
            if idx[a] < counts[a] {
                break;
            }
            idx[a] = 0;
        }
    }
    (lo, hi)
}

fn check_coords(grid: &DomainGrid, expr: &FieldExpr, name: &str) -> Result<()> {
    if expr.max_coord() > grid.dim() {
        return Err(Error::PreconditionViolated(format!(
            "exponent `{name}` references x{} on a {}-dimensional grid",
            expr.max_coord(),
            grid.dim()
        )));
    }
    Ok(())
}

/// The exponents of the problem, with `m = max(p1, p2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExponentSet {
    pub p1: ExponentField,
    pub p2: ExponentField,
    pub m: ExponentField,
    pub q: ExponentField,
    pub dim: usize,
}

impl ExponentSet {
    pub fn grid(&self) -> &Arc<DomainGrid> {
        self.p1.grid()
    }
}

/// Samples `p1`, `p2`, `q` at the cell centres and forms `m` pointwise.
pub fn build_exponent_set(
    p1: &FieldExpr,
    p2: &FieldExpr,
    q: &FieldExpr,
    grid: Arc<DomainGrid>,
) -> Result<ExponentSet> {
    for (name, e) in [("p1", p1), ("p2", p2), ("q", q)] {
        check_coords(&grid, e, name)?;
    }
    let p1f = ExponentField::from_expr(grid.clone(), "p1", p1)?;
    let p2f = ExponentField::from_expr(grid.clone(), "p2", p2)?;
    let qf = ExponentField::from_expr(grid.clone(), "q", q)?;
    let mf = ExponentField::from_fn(grid.clone(), "m", |x| p1.eval(x).max(p2.eval(x)))?;
    Ok(ExponentSet {
        p1: p1f,
        p2: p2f,
        m: mf,
        q: qf,
        dim: grid.dim(),
    })
}

/// Pointwise `N m / (N - m)`.
pub fn critical_exponent(m: &ExponentField, dim: usize) -> Result<ExponentField> {
    let n = dim as f64;
    if m.sup() >= n {
        let value = m.values().iter().copied().fold(m.sup(), f64::max);
        return Err(Error::CriticalUndefined { value, dim });
    }
    m.map_monotone(|v| n * v / (n - v), true, "critical")
}

/// Pointwise `p / (p - 1)`.
pub fn conjugate_exponent(p: &ExponentField) -> ExponentField {
    p.map_monotone(|v| v / (v - 1.0), false, "conjugate")
        .expect("conjugate of an exponent above 1 is an exponent above 1")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Theorem {
    /// Infinitely many solutions of the problem with energy `J`.
    T1,
    /// A nontrivial minimiser of the energy `I` for large `lambda`.
    T2,
}

impl fmt::Display for Theorem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Theorem::T1 => "T1",
            Theorem::T2 => "T2",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Condition {
    pub name: String,
    pub lhs: f64,
    pub relation: &'static str,
    pub rhs: f64,
    pub holds: bool,
}

impl Condition {
    fn new(name: &str, lhs: f64, relation: &'static str, rhs: f64) -> Self {
        let holds = match relation {
            "<" => lhs < rhs,
            ">=" => lhs >= rhs,
            _ => unreachable!("unknown relation {relation}"),
        };
        Self {
            name: name.to_string(),
            lhs,
            relation,
            rhs,
            holds,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisReport {
    pub theorem: Theorem,
    pub conditions: Vec<Condition>,
    pub pass: bool,
}

impl HypothesisReport {
    pub fn failures(&self) -> impl Iterator<Item = &Condition> {
        self.conditions.iter().filter(|c| !c.holds)
    }
}

/// Checks the exponent hypotheses of `theorem`. All inequalities are strict
/// except `p_i^- >= 2`, and are evaluated without tolerance.
pub fn validate_hypotheses(s: &ExponentSet, theorem: Theorem) -> HypothesisReport {
    let n = s.dim as f64;
    let (m_lo, m_hi) = (s.m.inf(), s.m.sup());
    let mut conditions = Vec::new();
    if theorem == Theorem::T1 {
        conditions.push(Condition::new("p1^- >= 2", s.p1.inf(), ">=", 2.0));
        conditions.push(Condition::new("p2^- >= 2", s.p2.inf(), ">=", 2.0));
    }
    conditions.push(Condition::new("m^+ < q^-", m_hi, "<", s.q.inf()));
    let global = if m_lo < n {
        n * m_lo / (n - m_lo)
    } else {
        f64::INFINITY
    };
    conditions.push(Condition::new(
        "q^+ < N m^- / (N - m^-)",
        s.q.sup(),
        "<",
        global,
    ));
    conditions.push(Condition::new("m^- < N", m_lo, "<", n));
    // q(x) < m*(x) at every cell; m*(x) is infinite where m(x) >= N.
    let worst =
        s.q.values()
            .iter()
            .zip(s.m.values())
            .filter(|(_, &m)| m < n)
            .map(|(&q, &m)| q - n * m / (n - m))
            .fold(f64::NEG_INFINITY, f64::max);
    conditions.push(Condition::new("max_x (q(x) - m*(x)) < 0", worst, "<", 0.0));
    let pass = conditions.iter().all(|c| c.holds);
    HypothesisReport {
        theorem,
        conditions,
        pass,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(dim: usize, res: usize) -> Arc<DomainGrid> {
        Arc::new(DomainGrid::unit(dim, res).unwrap())
    }

    fn set(dim: usize, p1: &str, p2: &str, q: &str) -> Result<ExponentSet> {
        build_exponent_set(
            &FieldExpr::parse(p1).unwrap(),
            &FieldExpr::parse(p2).unwrap(),
            &FieldExpr::parse(q).unwrap(),
            grid(dim, 16),
        )
    }

    const P2: &str = "2 + 0.5*sin(pi*x1)";

    #[test]
    fn constant_max() {
        let s = set(3, "2", "3", "4").unwrap();
        assert_eq!((s.m.inf(), s.m.sup()), (3.0, 3.0));
        assert!(s.m.values().iter().all(|&v| v == 3.0));
    }

    #[test]
    fn sine_extrema_match_dense_sampling() {
        let s = set(3, "2", P2, "4").unwrap();
        // dense oracle over [0, 1] of max(2, 2 + 0.5 sin(pi t))
        let (lo, hi) = (0..=100_000)
            .map(|i| 2f64.max(2.0 + 0.5 * (std::f64::consts::PI * i as f64 / 1e5).sin()))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
                (a.min(v), b.max(v))
            });
        assert!((s.m.inf() - lo).abs() < 1e-12 && (s.m.inf() - 2.0).abs() < 1e-12);
        assert!((s.m.sup() - hi).abs() < 1e-9 && (s.m.sup() - 2.5).abs() < 1e-12);
    }

    #[test]
    fn m_is_pointwise_max() {
        let s = set(2, "2 + 0.3*x2", P2, "5").unwrap();
        for ((&a, &b), &m) in s.p1.values().iter().zip(s.p2.values()).zip(s.m.values()) {
            assert_eq!(m, a.max(b));
        }
    }

    #[test]
    fn rejects_exponent_at_one() {
        assert!(matches!(
            set(3, "1", "2", "4"),
            Err(Error::RejectsNonCPlus { .. })
        ));
        assert!(matches!(
            set(2, "2", "2", "4 + x3"),
            Err(Error::PreconditionViolated(_))
        ));
    }

    #[test]
    fn default_set_passes_both_theorems() {
        let s = set(3, "2", P2, "4").unwrap();
        for t in [Theorem::T1, Theorem::T2] {
            let r = validate_hypotheses(&s, t);
            assert!(r.pass, "{t}: {:?}", r.failures().collect::<Vec<_>>());
        }
        let r = validate_hypotheses(&s, Theorem::T1);
        let global = r
            .conditions
            .iter()
            .find(|c| c.name.starts_with("q^+"))
            .unwrap();
        assert_eq!((global.lhs, global.rhs), (4.0, 6.0));
    }

    #[test]
    fn supercritical_q_fails() {
        let s = set(3, "2", P2, "7").unwrap();
        let r = validate_hypotheses(&s, Theorem::T1);
        assert!(!r.pass);
        let bad: Vec<_> = r.failures().map(|c| c.name.as_str()).collect();
        assert!(bad.contains(&"q^+ < N m^- / (N - m^-)"));
    }

    #[test]
    fn t2_ignores_lower_exponent_floor() {
        let s = set(3, "1.5", P2, "4").unwrap();
        assert!(!validate_hypotheses(&s, Theorem::T1).pass);
        assert!(validate_hypotheses(&s, Theorem::T2).pass);
    }

    #[test]
    fn critical_exponent_values() {
        let g = grid(3, 8);
        let two = ExponentField::constant(g.clone(), 2.0).unwrap();
        assert!(critical_exponent(&two, 3)
            .unwrap()
            .values()
            .iter()
            .all(|&v| v == 6.0));
        let three = ExponentField::constant(g.clone(), 3.0).unwrap();
        assert!(matches!(
            critical_exponent(&three, 3),
            Err(Error::CriticalUndefined { .. })
        ));
        let s = set(3, "2", P2, "4").unwrap();
        let crit = critical_exponent(&s.m, 3).unwrap();
        let (c, _) =
            s.m.values()
                .iter()
                .enumerate()
                .find(|(_, &v)| v == 2.5)
                .unwrap();
        assert!((crit.values()[c] - 15.0).abs() < 1e-12);
        assert!((crit.sup() - 15.0).abs() < 1e-12 && (crit.inf() - 6.0).abs() < 1e-12);
    }

    #[test]
    fn conjugates() {
        let g = grid(2, 6);
        for (p, want) in [(2.0, 2.0), (3.0, 1.5), (4.0 / 3.0, 4.0)] {
            let c = conjugate_exponent(&ExponentField::constant(g.clone(), p).unwrap());
            assert!(c.values().iter().all(|&v| (v - want).abs() < 1e-14));
        }
        let s = set(2, "2", P2, "4").unwrap();
        let back = conjugate_exponent(&conjugate_exponent(&s.p2));
        for (a, b) in back.values().iter().zip(s.p2.values()) {
            assert!((a - b).abs() < 1e-13);
        }
        let c = conjugate_exponent(&s.p2);
        assert!((c.inf() - 2.5 / 1.5).abs() < 1e-12 && (c.sup() - 2.0).abs() < 1e-12);
    }
}
