//! Propeller design optimization that seeds a genetic search with an inverse
//! surrogate trained on simulated designs.
//!
//! * [`hydro`]: lifting-line solver for the torque-optimal circulation at a thrust demand.
//! * [`space`]: requirement and geometry bounds, samplers and the GA genome.
//! * [`dataset`]: simulated design corpus, CSV persistence, train/test split.
//! * [`surrogate`]: regression tree and random forest mapping requirement to design.
//! * [`optimizer`]: genetic algorithm, surrogate seeding and an exhaustive oracle.

pub mod dataset;
pub mod error;
pub mod hydro;
pub mod optimizer;
pub mod space;
pub mod surrogate;

pub use error::{Error, Result};
