//! Hybrid and rigid-body plants driven by the experiments.

pub mod hopper;
pub mod leg;
pub mod vibrobot;

pub use hopper::{advance_hopper, ground_stiffness, simulate_hopper, simulate_hopper_from, GroundModel, HopperPlant, HybridState, Mode};
pub use leg::{step_response, LegModel};
pub use vibrobot::{simulate_vibrobot, VibrobotParams, VibrobotRun};
