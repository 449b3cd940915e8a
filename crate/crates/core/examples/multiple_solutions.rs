//! Several critical points of the even energy `J` from seeds with disjoint
//! supports, their mirrors, and the pairwise distances between them.
//!
//! cargo run --release --example multiple_solutions

use std::sync::Arc;

use double_phase::exponents::build_exponent_set;
use double_phase::solvers::{multi_solution_search, shaped_bump, SolverOptions, SubBox};
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
    let seeds = vec![
        shaped_bump(
            grid.clone(),
            2.0,
            &SubBox::new(vec![0.15, 0.3, 0.3], vec![0.4, 0.7, 0.7]),
        )?,
        shaped_bump(
            grid.clone(),
            2.0,
            &SubBox::new(vec![0.6, 0.3, 0.3], vec![0.85, 0.7, 0.7]),
        )?,
        shaped_bump(grid.clone(), 2.0, &SubBox::centered(&[0.5; 3], 0.5))?,
    ];
    let rep = multi_solution_search(1.0, &s, &seeds, None, &SolverOptions::default())?;
    for (r, (seed, mirrored)) in rep.solutions.iter().zip(&rep.origins) {
        let sign = if *mirrored { "-" } else { "+" };
        println!(
            "seed {seed} ({sign}u): J = {:.6}, residual {:.1e}",
            r.energy.total, r.residual
        );
    }
    println!("distinctness radius {:.4}", rep.delta);
    for row in &rep.distances {
        println!(
            "  {}",
            row.iter().map(|d| format!("{d:9.3}")).collect::<String>()
        );
    }
    Ok(())
}
