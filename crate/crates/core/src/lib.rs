//! Lightweight federated learning over wireless links.
//!
//! Devices prune and quantize their gradients before uploading them over a
//! lossy uplink. A per-round controller picks the pruning ratio, quantization
//! bits and transmit power of every device to shrink an upper bound on the
//! optimality gap while keeping each round inside a delay and energy budget.

pub mod bound;
pub mod channel;
pub mod compression;
pub mod controller;
pub mod cost;
pub mod error;
pub mod fl;
pub mod harness;
pub mod rng;
pub mod strategy;

pub use channel::{ChannelParams, FadingMode, TransmissionOutcome};
pub use bound::{BoundConstants, GapModel, GapTerms, GradRange};
pub use controller::{two_stage_control, ControlOutcome, ControllerConfig, Problem};
pub use cost::{Budgets, DeviceCost, DeviceProfile, RoundCostReport};
pub use error::{Error, Result};
pub use harness::{run_scheme, RunRecord, ScenarioConfig, Scheme, Summary};
pub use fl::{
    accuracy, aggregate, apply_update, global_loss, local_gradient, Contribution, Dataset, DeviceDataset,
    LogisticRegression, LossModel, Mlp, ModelVector, Sample,
};
pub use strategy::{ControlBox, ControlStrategy};
