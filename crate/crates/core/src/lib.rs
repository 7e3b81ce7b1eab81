//! Geodesics of Kropina metrics `F = g(ξ,ξ)/ω(ξ)`, CR chains on Heisenberg
//! models, and a lifted null-geodesic cross-check.

pub mod cli;
pub mod compare;
pub mod config;
pub mod connect;
pub mod cr;
pub mod error;
pub mod equivalence;
pub mod euler_lagrange;
pub mod expr;
pub mod geometry;
pub mod io;
pub mod lift;
pub mod linalg;
pub mod ode;
pub mod real;
pub mod trajectory;

pub use error::{Error, Result};
