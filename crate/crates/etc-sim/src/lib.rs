//! Simulation engine and certificate calculator for event-triggered,
//! observer-based control of Lipschitz nonlinear plants.
//!
//! The crate is organized around a pipeline: dense small-matrix numerics
//! ([`num`]), plant/controller/observer descriptions ([`models`]), trigger
//! policies and ISS budget certificates ([`triggering`]), the hybrid
//! fixed-step simulator with event localization ([`simulator`]), post-run
//! diagnostics ([`analysis`]), and scenario/CSV/SVG/report serialization
//! plus the command-line front end ([`io`], [`cli`]).

pub mod analysis;
pub mod cli;
pub mod io;
pub mod models;
pub mod num;
pub mod simulator;
pub mod triggering;
