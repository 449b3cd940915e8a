//! Global minimisation of the coercive energy `I` above the lambda*
//! threshold, followed by a weak-form certificate.
//!
//! cargo run --release --example minimize

use std::sync::Arc;

use double_phase::exponents::build_exponent_set;
use double_phase::solvers::{
    bump_function, lambda_star_search, minimize_energy, uniform_lambda_grid, SolverOptions, SubBox,
};
use double_phase::varexp::sobolev_norm;
use double_phase::verification::certify_weak_solution;
use double_phase::{DomainGrid, Energy, FieldExpr, Functional};

fn main() -> double_phase::Result<()> {
    let grid = Arc::new(DomainGrid::unit(3, 16)?);
    let parse = |e: &str| FieldExpr::parse(e);
    let s = build_exponent_set(
        &parse("2")?,
        &parse("2 + 0.5*sin(pi*x1)")?,
        &parse("4")?,
        grid.clone(),
    )?;
    let region = SubBox::centered(&[0.5; 3], 0.5);
    let u0 = bump_function(grid.clone(), 2.0, &region)?;
    let star = lambda_star_search(
        &s,
        &u0,
        2.0,
        &region,
        &uniform_lambda_grid(0.25, 0.25, 40_000),
    )?;

    let opts = SolverOptions::default();
    for lambda in [
        1.5 * star.lambda_hat,
        2.0 * star.lambda_hat,
        4.0 * star.lambda_hat,
    ] {
        let r = minimize_energy(lambda, &s, &u0, &opts)?;
        let cert =
            certify_weak_solution(&r, &Energy::new(&s, lambda, Functional::I), opts.tol, 20, 1);
        println!(
            "lambda {lambda:>7.2}: {:?} in {:>3} iterations, I = {:>12.4}, residual {:.1e}, ||u|| = {:.4}, max |u| = {:.4}, certificate {}",
            r.termination,
            r.iterations,
            r.energy.total,
            r.residual,
            sobolev_norm(&r.u, &s.m)?,
            r.u.max_abs(),
            if cert.pass { "pass" } else { "FAIL" }
        );
    }
    Ok(())
}
