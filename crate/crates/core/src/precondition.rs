//! Discrete `H^1_0` Riesz map used to precondition descent directions.
//!
//! `K` is the derivative of `Q(u) = 1/2 int |grad u|^2 + 1/2 int ubar^2`
//! assembled with the same cell gradient and corner averaging as the
//! energies, so it shares their near-kernel (hourglass) modes.

use crate::discretization::{cell_gradient, DomainGrid, GridFunction, MAX_DIM};

const CG_RTOL: f64 = 1e-8;
const CG_MAX_ITER: usize = 2000;

/// `K u`, with boundary rows zeroed.
pub(crate) fn apply(grid: &DomainGrid, u: &[f64]) -> Vec<f64> {
    let dim = grid.dim();
    let offsets = grid.corner_offsets();
    let avg = 1.0 / offsets.len() as f64;
    let edge_w = 1.0 / (1usize << (dim - 1)) as f64;
    let inv_h: Vec<f64> = grid.spacing().iter().map(|h| edge_w / h).collect();
    let mut out = vec![0.0; u.len()];
    let mut g = [0.0; MAX_DIM];
    for &base in grid.cell_bases() {
        cell_gradient(grid, u, base, &mut g[..dim]);
        let ubar = offsets.iter().map(|o| u[base + o]).sum::<f64>() * avg;
        let nodal = ubar * avg;
        for (bits, &off) in offsets.iter().enumerate() {
            let mut acc = nodal;
            for a in 0..dim {
                let f = g[a] * inv_h[a];
                if bits >> a & 1 == 1 {
                    acc += f;
                } else {
                    acc -= f;
                }
            }
            out[base + off] += acc;
        }
    }
    for (v, &b) in out.iter_mut().zip(grid.boundary_mask()) {
        if b {
            *v = 0.0;
        }
    }
    out
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves `K d = r` by conjugate gradients.
pub(crate) fn solve(r: &GridFunction) -> GridFunction {
    let grid = r.grid();
    let b = r.values();
    let mut x = vec![0.0; b.len()];
    let mut res = b.to_vec();
    let b_norm = dot(b, b).sqrt();
    if b_norm > 0.0 {
        let mut p = res.clone();
        let mut rr = dot(&res, &res);
        for _ in 0..CG_MAX_ITER {
            let kp = apply(grid, &p);
            let alpha = rr / dot(&p, &kp);
            for i in 0..x.len() {
                x[i] += alpha * p[i];
                res[i] -= alpha * kp[i];
            }
            let rr_next = dot(&res, &res);
            if rr_next.sqrt() <= CG_RTOL * b_norm {
                break;
            }
            let beta = rr_next / rr;
            for i in 0..p.len() {
                p[i] = res[i] + beta * p[i];
            }
            rr = rr_next;
        }
    }
    GridFunction::new(grid.clone(), x, true).expect("solution has grid shape")
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;

    #[test]
    fn inverts_k() {
        let grid = Arc::new(DomainGrid::unit(3, 8).unwrap());
        let u = GridFunction::from_fn(grid.clone(), true, |x| {
            (x[0] * 7.0).sin() * x[1] * (1.0 - x[2])
        })
        .unwrap();
        let ku = GridFunction::new(grid.clone(), apply(&grid, u.values()), true).unwrap();
        let back = solve(&ku);
        let err = back.sub(&u).max_abs();
        assert!(err < 1e-6 * u.max_abs(), "{err}");
    }

    #[test]
    fn symmetric() {
        let grid = Arc::new(DomainGrid::unit(2, 7).unwrap());
        let a = GridFunction::from_fn(grid.clone(), true, |x| x[0] * x[1]).unwrap();
        let b = GridFunction::from_fn(grid.clone(), true, |x| (3.0 * x[0]).cos() + x[1]).unwrap();
        let lhs = dot(&apply(&grid, a.values()), b.values());
        let rhs = dot(a.values(), &apply(&grid, b.values()));
        assert!((lhs - rhs).abs() < 1e-10 * lhs.abs());
    }
}
