//! Run every randomised check on the default exponents and print the
//! measured constants.
//!
//! cargo run --release --example verification_suite

use std::sync::Arc;

use double_phase::exponents::build_exponent_set;
use double_phase::verification::{run_suite, SuiteSizes};
use double_phase::{DomainGrid, FieldExpr};

fn main() -> double_phase::Result<()> {
    let grid = Arc::new(DomainGrid::unit(3, 16)?);
    let parse = |e: &str| FieldExpr::parse(e);
    let s = build_exponent_set(
        &parse("2")?,
        &parse("2 + 0.5*sin(pi*x1)")?,
        &parse("4")?,
        grid,
    )?;
    // smaller than the shipped counts so the example finishes quickly
    let sizes = SuiteSizes {
        monotonicity: 10_000,
        function_space: 50,
        coercivity: 100,
        ..SuiteSizes::default()
    };
    for r in run_suite(1.0, &s, &sizes, 11) {
        let constants: Vec<String> = r
            .constants
            .iter()
            .map(|(k, v)| format!("{k}={v:.4e}"))
            .collect();
        println!(
            "{:<34} {} samples={:<6} worst margin {:+.2e} {}",
            r.name,
            if r.pass { "pass" } else { "FAIL" },
            r.samples,
            r.worst_margin,
            constants.join(" ")
        );
    }
    Ok(())
}
