//! Oscillator controllers and the resonance tracker.

pub mod hopf;
pub mod kuramoto;
pub mod quad;
pub mod tracker;

pub use hopf::{entrain, hopf_step, EntrainPlant, EntrainRun, FeedbackTap, HopfParams, HopfState};
pub use kuramoto::{kuramoto_step, order_parameter, time_averaged_order, FrequencyDistribution, KuramotoCommunity};
pub use quad::{phase_locking, quad_community_run, CommunityParams, QuadBody, QuadParams, QuadRun};
pub use tracker::{resonance_tracker, tracker_plant, EpochRecord, GroundStep, TrackerParams, TrackerRun};
