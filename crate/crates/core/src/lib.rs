//! Steady states, bifurcation coefficients, delayed spectra and time
//! integration for the 1-D reaction-diffusion equation with memory-based
//! diffusion and a nonlinear boundary condition
//!
//! ```text
//! u_t = u_xx + d (u (u_sigma)_x)_x + lambda u f(x, u)     in (0, L)
//! d_n u = lambda r g(u)                                    at x = 0, L
//! ```
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod discrete;
pub mod dynamics;
pub mod eigen;
pub mod error;
pub mod gamma0;
pub mod gamma1;
pub mod grid;
pub mod hopf;
pub mod model;
pub mod spectrum;
pub mod steady;
pub mod tridiag;

pub use error::{Error, Result};
pub use grid::{Field, Grid1D};
pub use model::{BuiltinModel, CustomModel, Expr, ModelSpec};
