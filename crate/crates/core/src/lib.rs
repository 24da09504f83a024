//! Gradient sliding for composite convex optimization.
//!
//! Minimizes `Ψ(x) = f(x) + h(x) + 𝒳(x)` over a closed convex set, where `f`
//! is smooth, `h` is nonsmooth (possibly known only through a stochastic
//! subgradient oracle) and `𝒳` is simple. The sliding methods call `∇f` far
//! less often than the subgradient of `h`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod bench;
pub mod error;
pub mod linalg;
pub mod oracles;
pub mod prox;
pub mod run;
pub mod schedule;
pub mod sliding;
pub mod smoothing;
pub mod stochastic;
pub mod stream;

pub use error::{Result, SlideError};
pub use nalgebra;
