//! Exact parametrix algebra and sharp-constant numerics for the Paneitz operator.
//!
//! The crate is split into an exact layer (`polyalg`, `tensor`, `parametrix`),
//! a floating-point layer (`sphereforms`, `spectral`, `asymptotics`) and the
//! `cli` front end that ties both together into reproducible reports.

pub mod asymptotics;
pub mod cli;
pub mod error;
pub mod parametrix;
pub mod polyalg;
pub mod quadrature;
pub mod radial;
pub mod rational;
pub mod report;
pub mod spectral;
pub mod sphereforms;
pub mod tensor;
pub mod verify;

pub use error::{Error, Result};
pub use rational::Rational;
