//! Numerical diagnostics: Lyapunov estimates, occupancy histograms and figures.

pub mod figures;
pub mod lyapunov;
pub mod occupancy;
