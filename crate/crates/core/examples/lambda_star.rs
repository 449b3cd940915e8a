//! Scan a lambda grid for the first value that makes the energy `I` of a
//! bump negative, and compare with the closed form and the a priori bound.
//!
//! cargo run --example lambda_star

use std::sync::Arc;

use double_phase::exponents::build_exponent_set;
use double_phase::solvers::{bump_function, lambda_star_search, uniform_lambda_grid, SubBox};
use double_phase::{DomainGrid, FieldExpr};

fn main() -> double_phase::Result<()> {
    let grid = Arc::new(DomainGrid::unit(3, 16)?);
    let parse = |e: &str| FieldExpr::parse(e);
    let s = build_exponent_set(
        &parse("2")?,
        &parse("2 + 0.5*sin(pi*x1)")?,
        &parse("4")?,
        grid.clone(),
    )?;
    for t0 in [1.5, 2.0, 4.0] {
        let region = SubBox::centered(&[0.5; 3], 0.5);
        let u0 = bump_function(grid.clone(), t0, &region)?;
        let rep = lambda_star_search(
            &s,
            &u0,
            t0,
            &region,
            &uniform_lambda_grid(0.25, 0.25, 40_000),
        )?;
        println!(
            "t0 = {t0}: lambda_hat = {:<8} closed form {:<10.4} bound {:<10.2} plateau measure {:.4}",
            rep.lambda_hat, rep.lambda_exact, rep.analytic_bound, rep.omega1_measure
        );
    }
    Ok(())
}
