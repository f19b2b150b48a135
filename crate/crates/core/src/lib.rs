//! Viscosity approximation iterations `x_{n+1} = a_n f(x_n) + (1 - a_n) T_n x_n`
//! for families of nonexpansive maps on `R^d`, with the operators, sets,
//! parameter schedules and diagnostics needed to run and check them.

pub mod cli;
pub mod config;
pub mod convex_sets;
pub mod diagnostics;
pub mod engine;
pub mod error;
pub mod hilbert;
pub mod monotone;
pub mod operators;
pub mod sampling;
pub mod scenarios;
pub mod schedules;

pub use error::{Error, Result};
