//! Modulars and Luxemburg norms with a variable exponent, plus the
//! norm-modular sandwich and the Hölder inequality on a random pair.
//!
//! cargo run --example luxemburg_norms

use std::sync::Arc;

use double_phase::exponents::ExponentField;
use double_phase::varexp::{
    check_holder, check_modular_norm_relations, luxemburg_norm, modular, sobolev_norm,
};
use double_phase::verification::random_field;
use double_phase::{DomainGrid, GridFunction};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> double_phase::Result<()> {
    let grid = Arc::new(DomainGrid::unit(3, 16)?);
    let p = ExponentField::from_fn(grid.clone(), "p", |x| {
        2.0 + 0.5 * (std::f64::consts::PI * x[0]).sin()
    })?;
    let u = GridFunction::from_fn(grid.clone(), true, |x| {
        3.0 * x.iter().map(|t| t * (1.0 - t)).product::<f64>() * 64.0
    })?;

    let (norm, trace) = luxemburg_norm(&u, &p)?;
    println!("modular rho(u)     = {:.6}", modular(&u, &p));
    println!(
        "Luxemburg |u|      = {norm:.6} ({} bisections, root residual {:.1e})",
        trace.iterations, trace.residual
    );
    println!(
        "|2u| / |u|         = {:.12}",
        luxemburg_norm(&u.scaled(2.0), &p)?.0 / norm
    );
    println!("gradient norm ||u|| = {:.6}", sobolev_norm(&u, &p)?);

    let rel = check_modular_norm_relations(&u, &p)?;
    println!(
        "sandwich {:?}: {:.4} <= rho = {:.4} <= {:.4}",
        rel.regime, rel.lower, rel.modular, rel.upper
    );

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let v = random_field(&grid, &mut rng, true);
    let h = check_holder(&u, &v, &p)?;
    println!("Hölder: |int u v| = {:.4} <= {:.4}", h.lhs, h.rhs);
    Ok(())
}
