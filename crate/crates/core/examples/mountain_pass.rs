//! One mountain-pass critical point of `J`: pick an endpoint with negative
//! energy along a bump direction, deform the straight path, and watch the
//! path maximum settle.
//!
//! cargo run --release --example mountain_pass

use std::sync::Arc;

use double_phase::exponents::build_exponent_set;
use double_phase::solvers::{find_endpoint, mountain_pass, shaped_bump, SolverOptions, SubBox};
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
    let dir = shaped_bump(grid.clone(), 1.0, &SubBox::centered(&[0.5; 3], 0.5))?;
    let (e, t) = find_endpoint(1.0, &s, &dir, 60)?;
    println!("endpoint at scale {t}");

    let opts = SolverOptions {
        snapshot_every: 5,
        ..SolverOptions::default()
    };
    let r = mountain_pass(1.0, &s, &e, &opts)?;
    for p in &r.path_profiles {
        let max = p.energies.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        println!("iteration {:>3}: path maximum {max:.4}", p.iteration);
    }
    println!(
        "{:?} after {} iterations: J = {:.6}, residual {:.1e}",
        r.termination, r.iterations, r.energy.total, r.residual
    );
    Ok(())
}
