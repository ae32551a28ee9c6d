//! Higher-order Herglotz variational problems.
//!
//! A problem asks for `x: [a, b] -> R^m` extremizing `z(b)`, where
//! `z' = L(t, x, x', ..., x^(n), z)` with `z(a)` and `x^(j)(a)` prescribed.
//! The crate parses Lagrangians, reduces the problem to an optimal control
//! problem, solves it by shooting on the initial costate, and certifies the
//! result with Euler-Lagrange, DuBois-Reymond and Noether checks.
//!
//! ```
//! use herglotz::{shoot, Expr, Grid, HerglotzProblem, Sense, ShootingConfig};
//!
//! let p = HerglotzProblem {
//!     order: 1,
//!     dim: 1,
//!     a: 0.0,
//!     b: 1.0,
//!     lagrangian: Expr::parse("x1'^2/2", 1, 1).unwrap(),
//!     alpha: vec![vec![0.0]],
//!     gamma: 5.0,
//!     sense: Sense::Minimize,
//! };
//! let ext = shoot(&p, &ShootingConfig::new(Grid::new(0.0, 1.0, 101).unwrap())).unwrap();
//! assert!((ext.z_b - 5.0).abs() < 1e-9);
//! ```

pub mod error;
pub mod expr;
pub mod multipliers;
mod nelder_mead;
pub mod ode;
pub mod problem;
pub mod solver;
pub mod trajectory;
pub mod verify;

pub use error::{Error, Result};
pub use expr::{parse, parse_with, Alphabet, EvalPoint, Expr, Func, VarRef};
pub use multipliers::{
    hamiltonian, psi_backward_ode, psi_closed_form, psi_z_quadrature, HamiltonianValue, MultiplierSet,
};
pub use ode::{Grid, GridFunction};
pub use problem::{reduce_to_ocp, HerglotzProblem, OcpSystem, Sense, Validation};
pub use solver::{
    control_from_costate, direct_oracle, shoot, DirectSolution, Extremal, OracleConfig, ShootingConfig,
};
pub use trajectory::Trajectory;
pub use verify::{
    certify_noether, dubois_reymond, el_report, el_residual, fd_tolerance, gen_x, invariance_check,
    noether_charge, noether_series, transversality, FiniteFamily, SymmetryFamily, VerificationReport,
};
