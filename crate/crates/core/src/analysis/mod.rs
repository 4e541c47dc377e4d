//! Envelopes, sweeps, resonance maps, oscillation fits and correlations.

pub mod correlation;
pub mod envelope;
pub mod fit;
pub mod sweep;

pub use correlation::{correlation_matrix, CorrelationMatrix};
pub use envelope::{envelope, steady_amplitude, Envelope};
pub use fit::{fit_damped_oscillation, infer_mass_ratio, DampedFit};
pub use sweep::{
    frequency_grid, frequency_sweep, ground_resonance, hysteresis_width, resonance_map, Direction, ResonanceMap,
    SweepResult, SweepSettings,
};
