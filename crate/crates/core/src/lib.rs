//! Online multi-resource scheduling for Earth-observation satellite networks.
//!
//! The crate models a slotted-time system of ground targets, observing
//! satellites (EOSs) and downlink destinations. Every slot the scheduler
//! picks which EOS observes which target, the compression ratio applied to
//! the captured image, and which EOS downlinks to which destination. The
//! DMRC policy does this by minimising a drift-plus-penalty bound over data
//! queues (one per EOS and flow) and virtual queues enforcing per-flow rate
//! floors.
//!
//! Module map:
//!
//! - [`scenario`]: network dimensions, contact plans, stochastic channels
//! - [`eteg`]: the time-expanded graph ledger and its flow-conservation audit
//! - [`queueing`]: queue recursions, Lyapunov function, drift constant
//! - [`assignment`]: max-weight bipartite assignment with column multiplicities
//! - [`dmrc`]: the per-slot DMRC decision plus the Random and Fixed-CR baselines
//! - [`simulator`]: the slot loop, metrics, V sweeps and policy comparisons
//! - [`report`]: CSV writers for per-slot series and summaries

// `!(x >= 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod assignment;
pub mod dmrc;
mod error;
pub mod eteg;
pub mod queueing;
pub mod report;
pub mod scenario;
pub mod simulator;

pub use error::{Error, Result};

pub use assignment::{brute_force_assignment, max_weight_assignment, Assignment, AssignmentProblem};
pub use dmrc::{Policy, SlotDecision, SolverParams};
pub use eteg::{ConservationReport, Eteg};
pub use queueing::{DriftBound, QueueState};
pub use scenario::{ChannelModel, ChannelState, ContactPlan, NetworkConfig, SyntheticPlan};
pub use simulator::{MetricsSeries, MetricsSummary, RunOutput, Scenario};
