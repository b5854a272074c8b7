//! Training-side numerics: learning-rate schedule, GeM pooling, triplet and
//! label-smoothed cross-entropy losses with analytic gradients, projector
//! shape contract and PK batch sampling.
//!
//! Nothing here trains a network; these are the pure functions a training
//! loop would call, checked against finite differences in the tests.

mod gem;
mod projector;
mod sampling;
mod schedule;
mod smoothing;
mod triplet;

pub use gem::{gem_pool, gem_pool_channels, GemParams};
pub use projector::{LayerSpec, ProjectorShape};
pub use sampling::pk_sample;
pub use schedule::{lr_ratio, ScheduleConfig};
pub use smoothing::{ce_label_smooth, smoothed_targets, SmoothConfig};
pub use triplet::{triplet_hard_loss, TripletConfig, TripletDistance, TripletOutput};
