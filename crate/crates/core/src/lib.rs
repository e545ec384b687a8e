//! Numerics for deciding and measuring boundedness of composition operators
//! `C_φ` on weighted Bergman spaces `A²_β(Dⁿ)` over the polydisc, for
//! polynomial symbols `φ`.
//!
//! The crate is `no_std` (it needs `alloc`). Anything that touches the
//! filesystem, threads or the command line lives in the `polycarleson`
//! companion crate; parallelism is injected through [`exec::Executor`].
//!
//! Module map:
//!
//! - [`symbols`]: sparse polynomial maps, exact evaluation/differentiation.
//! - [`measure`]: the weights `dA_β`, `dV_β`, Carleson boxes, samplers and
//!   proposal regions for importance sampling.
//! - [`estimate`]: batched Monte Carlo estimator with leakage audit.
//! - [`sublevel`]: volumes of `{|f − η| ≤ δ}` and their scaling exponents.
//! - [`contact`]: torus contact sets and numerical rank of Jacobians.
//! - [`criteria`]: the rank-sufficiency, bidisc and tridisc deciders.
//! - [`carleson`]: preimage-to-box volume ratios and their growth.
//! - [`inequality_lab`]: sampled checks of the auxiliary inequalities.
#![no_std]
// `!(x > 0.0)` style tests are how NaN gets rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![warn(missing_debug_implementations)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod carleson;
pub mod contact;
pub mod criteria;
mod error;
pub mod estimate;
pub mod exec;
pub mod fit;
pub mod inequality_lab;
pub mod measure;
pub mod rng;
pub mod sublevel;
pub mod symbols;
mod torus;

pub use error::{Error, Result};
pub use num_complex::Complex64;
