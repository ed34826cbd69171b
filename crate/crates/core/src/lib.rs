//! Martingale-difference approximation of Riemann–Liouville operator
//! fractional Brownian motion, with deterministic and Monte Carlo checks of
//! its convergence.

pub mod error;
pub mod io;
pub mod kernel;
pub mod mds;
pub mod matfun;
pub mod quadrature;
pub mod rng;
pub mod simulate;
pub mod verify;

pub use error::{OfbmError, Result};
