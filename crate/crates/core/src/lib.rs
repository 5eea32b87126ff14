//! Numerical experiments around the very singular solution of `u_t = u''/2 - u^2/2`,
//! the killed Ornstein-Uhlenbeck spectrum it induces, and the zero set of
//! one-dimensional super-Brownian motion.

// `!(x > 0.0)` is how parameter checks reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dimension;
pub mod grid;
pub mod linalg;
pub mod particles;
pub mod pde;
pub mod profile;
pub mod spectral;
pub mod stats;
pub mod tauberian;
