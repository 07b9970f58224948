//! Finite element laboratory for the singular elliptic problem
//! −div(A∇u) = σ/u^λ with homogeneous Dirichlet data.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod config;
pub mod error;
pub mod expr;
pub mod grid;
pub mod homogenization;
pub mod measures;
pub mod operators;
pub mod potential;
pub mod quadrature;
pub mod singular;
pub mod verify;

pub use error::{Error, Result};
