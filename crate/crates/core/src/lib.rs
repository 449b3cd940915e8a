//! Numerical toolkit for the double-phase `p(x)`-Laplacian Dirichlet problem
//!
//! ```text
//! -div((|grad u|^{p1(x)-2} + |grad u|^{p2(x)-2}) grad u) = f(x, u)  in Omega,
//!                                                       u = 0        on the boundary,
//! ```
//!
//! with `f = -lambda |u|^{m-2} u + |u|^{q-2} u` (energy `J`) or its negative
//! (energy `I`), `m = max(p1, p2) < q`.
//!
//! The crate is organised bottom-up:
//!
//! - [`discretization`]: uniform box grids, cell gradients, quadrature.
//! - [`exponents`]: exponent fields and the hypothesis checks.
//! - [`varexp`]: modulars, Luxemburg and Sobolev norms, Hölder and inclusion checks.
//! - [`energy`]: the energies `J`, `I` and their exact discrete derivatives.
//! - [`solvers`]: bump construction, `lambda*` search, coercive minimisation of
//!   `I`, and a path-deformation mountain-pass method for `J`.
//! - [`verification`]: randomised oracles for every inequality the existence
//!   arguments rely on.
//! - [`cli`]: experiment configuration, file formats and the subcommands of
//!   the `double-phase` binary.
//!
//! Runnable walkthroughs for each capability live in `examples/`.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod discretization;
pub mod energy;
pub mod error;
pub mod exponents;
pub mod expr;
mod precondition;
pub mod solvers;
pub mod varexp;
pub mod verification;

pub use discretization::{DomainGrid, GridFunction};
pub use energy::{Energy, EnergyReport, Functional, Residual};
pub use error::{Error, Result};
pub use exponents::{ExponentField, ExponentSet, Theorem};
pub use expr::FieldExpr;
