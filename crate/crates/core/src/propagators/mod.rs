//! Exact time evolution: two-level unitary integration, Fourier split-step
//! propagation and imaginary-time ground states.

pub mod checkpoint;
pub mod grid;
pub mod split_step;
pub mod two_level;

pub use grid::{fidelity, gaussian_guess, Axis, SpatialGrid, WaveFunction};
pub use split_step::{sample_potential, GroundState, GroundStateOptions, RunStats, SplitStep};
pub use two_level::{evolve_unitary, propagate_two_level, StepControl, TwoLevelRun};

/// Default real-time step: `min(0.002 / w, dx^2 m / (pi hbar))` over all axes.
pub fn default_time_step(grid: &SpatialGrid, masses: &[f64]) -> f64 {
    grid.axes
        .iter()
        .zip(masses)
        .map(|(a, m)| a.spacing().powi(2) * m / (std::f64::consts::PI * crate::models::HBAR))
        .fold(0.002, f64::min)
}
