//! Numerical laboratory for Dirichlet-to-Neumann maps of the Schrödinger
//! equation (Δ + q + κ²)u = 0 on the unit disk: forward solvers, DtN and
//! DtN-difference matrices, δ-nets of their harmonic representations, and
//! frequency scans of the instability of recovering q from Λ_q.

pub mod cli;
pub mod dtn_map;
pub mod entropy_nets;
pub mod error;
pub mod forward_solver;
pub mod harmonics;
pub mod instability_lab;
pub mod potentials;
pub mod special;

pub use error::{LabError, Result};
