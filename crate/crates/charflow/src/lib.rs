//! charflow: a symbolic-numeric analyzer for systems of vector fields.
//!
//! Given a finite system of vector fields the exact engine computes
//! iterated Lie brackets, the s-step degeneration locus, and the chain of
//! iterated characteristic sets, and issues a sound verdict on
//! precompactness of the generalized Dirichlet energy ball. A companion
//! numerical engine validates verdicts on discretized tori via spectral
//! probes, a bump-scaling experiment, and secant-based tangent-cone
//! estimation on point clouds.

pub mod chain;
pub mod config;
pub mod error;
pub mod field;
pub mod glaeser;
pub mod ideal;
pub mod parser;
pub mod poly;
pub mod report;
pub mod smooth;
pub mod torus;

pub use error::{Error, Result};
