//! Numerics for the Nehari manifold of `−Δu = f(x, u)` with zero Dirichlet
//! data on boxes.

// `!(x > 0.0)` guards are meant to reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod grid;
pub mod model;
pub mod nehari;
pub mod report;
pub mod solve;
pub mod spectrum;
pub mod stiffness;
pub mod verify;
