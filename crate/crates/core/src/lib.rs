//! Non-local diffusion `u_t = ∫ (u(y) - u(x)) J(x - y) dy` on bounded
//! intervals with zero exterior data, together with the large-deviation
//! machinery that predicts how fast the bounded-domain solution converges to
//! the whole-line one: the jump Hamiltonian `H`, its Legendre transform `L`,
//! the rate function `t L((1 - |x|)/t)` and an empirical harness that measures
//! the actual decay.

pub mod error;
pub mod harness;
pub mod hamiltonian;
pub mod kernel;
pub mod legendre;
pub mod par;
pub mod quadrature;
pub mod ratefn;
pub mod selftest;
pub mod solver;

pub use error::{Error, Result};
pub use kernel::{Family, Kernel};
pub use par::Execution;
