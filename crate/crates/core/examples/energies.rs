//! Evaluate both energies and their gradients on a bump, and check one
//! directional derivative against a central difference.
//!
//! cargo run --example energies

use std::sync::Arc;

use double_phase::energy::{pairing, residual_norm};
use double_phase::exponents::build_exponent_set;
use double_phase::solvers::{bump_function, SubBox};
use double_phase::{DomainGrid, Energy, FieldExpr, Functional, GridFunction};

fn main() -> double_phase::Result<()> {
    let grid = Arc::new(DomainGrid::unit(3, 16)?);
    let parse = |e: &str| FieldExpr::parse(e);
    let s = build_exponent_set(
        &parse("2")?,
        &parse("2 + 0.5*sin(pi*x1)")?,
        &parse("4")?,
        grid.clone(),
    )?;
    let u = bump_function(grid.clone(), 2.0, &SubBox::centered(&[0.5; 3], 0.5))?;
    let v = GridFunction::from_fn(grid.clone(), true, |x| x[0] * (1.0 - x[0]) * x[1])?;

    for which in [Functional::J, Functional::I] {
        let e = Energy::new(&s, 10.0, which);
        let rep = e.report(&u);
        let grad = e.gradient(&u);
        let h = 1e-5;
        let fd = e.difference(&u.axpy(-h, &v), &v.scaled(2.0 * h)) / (2.0 * h);
        println!("{which:?} at lambda 10: total {:.6}", rep.total);
        println!("  terms: {rep:?}");
        println!(
            "  residual norm {:.4e}, <E'(u), v> = {:.10} vs central difference {:.10}",
            residual_norm(&grad),
            pairing(&grad, &v),
            fd
        );
    }
    Ok(())
}
