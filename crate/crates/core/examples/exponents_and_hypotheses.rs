//! Parse exponent expressions, sample them on a grid, and report which
//! solver hypotheses hold.
//!
//! cargo run --example exponents_and_hypotheses

use std::sync::Arc;

use double_phase::exponents::{build_exponent_set, critical_exponent, validate_hypotheses};
use double_phase::{DomainGrid, FieldExpr, Theorem};

fn main() -> double_phase::Result<()> {
    let grid = Arc::new(DomainGrid::unit(3, 16)?);
    for (p2, q) in [
        ("2 + 0.5*sin(pi*x1)", "4"),
        ("2 + 0.5*sin(pi*x1)", "7"),
        ("2.2 + 0.3*x2*x3", "3.5 + x1"),
    ] {
        let s = build_exponent_set(
            &FieldExpr::parse("2")?,
            &FieldExpr::parse(p2)?,
            &FieldExpr::parse(q)?,
            grid.clone(),
        )?;
        let crit = critical_exponent(&s.m, s.dim)?;
        println!("p2 = {p2}, q = {q}");
        println!(
            "  m in [{:.3}, {:.3}], q in [{:.3}, {:.3}], critical exponent >= {:.3}",
            s.m.inf(),
            s.m.sup(),
            s.q.inf(),
            s.q.sup(),
            crit.inf()
        );
        for theorem in [Theorem::T1, Theorem::T2] {
            let report = validate_hypotheses(&s, theorem);
            println!(
                "  {theorem}: {}",
                if report.pass {
                    "all hypotheses hold"
                } else {
                    "fails"
                }
            );
            for c in report.failures() {
                println!(
                    "    {}: {} {} {} is false",
                    c.name, c.lhs, c.relation, c.rhs
                );
            }
        }
    }
    Ok(())
}
