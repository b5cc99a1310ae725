//! Numerical laboratory for the Kawahara equation with distributed infinite memory
//!
//! ```text
//! u_t + u_xxx − a0·u_xxxxx + u·u_x + a1·u_x + (−1)^k ∫₀^∞ g(s) ∂ₓ^{2k} η^t(s) ds = 0
//! u(0) = u(L) = u_x(0) = u_x(L) = u_xx(L) = 0,      η_t + η_s = u,  η^t(0) = 0
//! ```
//!
//! Modules follow the pipeline kernel → spatial → history → solver → diagnostics,
//! with [`cli`] wiring configuration files, presets and output.

// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Banded and dense elimination loops read more clearly with explicit indices.
#![allow(clippy::needless_range_loop)]

pub mod banded;
pub mod cli;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod history;
pub mod kernel;
pub mod output;
pub mod presets;
pub mod quadrature;
pub mod solver;
pub mod spatial;

pub use error::{Error, Result};
