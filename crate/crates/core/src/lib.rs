//! Finite-element solver for the anisotropic porous medium equation
//! `u_t = div(u^m D grad u)` on rectangles, with metric-driven anisotropic
//! mesh adaptation.

// `!(x > 0.0)` deliberately rejects NaN; index loops mirror the formulas.
#![allow(
    clippy::neg_cmp_op_on_partial_ord,
    clippy::needless_range_loop,
    clippy::excessive_precision
)]

pub mod adapt;
pub mod driver;
pub mod error;
pub mod exact;
pub mod fem;
pub mod integrate;
pub mod linalg;
pub mod mesh;
pub mod metric;
pub mod quadrature;
pub mod sparse;

pub use error::{Error, Result};
