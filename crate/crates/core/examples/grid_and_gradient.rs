//! Build a grid, sample a field, and compare its discrete gradient and
//! integrals with the exact values.
//!
//! cargo run --example grid_and_gradient

use std::f64::consts::PI;
use std::sync::Arc;

use double_phase::discretization::{cell_quadrature, discrete_gradient, node_to_cell};
use double_phase::{DomainGrid, GridFunction};

fn main() -> double_phase::Result<()> {
    for res in [9, 17, 33] {
        let grid = Arc::new(DomainGrid::unit(2, res)?);
        let u = GridFunction::from_fn(grid.clone(), true, |x| {
            (PI * x[0]).sin() * (PI * x[1]).sin()
        })?;

        // int u = 4 / pi^2, int |grad u|^2 = pi^2 / 2
        let mean = cell_quadrature(&grid, &node_to_cell(&u));
        let sq: Vec<f64> = discrete_gradient(&u)
            .magnitudes()
            .iter()
            .map(|g| g * g)
            .collect();
        let dirichlet = cell_quadrature(&grid, &sq);
        println!(
            "res {res:>2}: int u = {mean:.6} (exact {:.6}), int |grad u|^2 = {dirichlet:.6} (exact {:.6})",
            4.0 / (PI * PI),
            PI * PI / 2.0
        );
    }
    Ok(())
}
