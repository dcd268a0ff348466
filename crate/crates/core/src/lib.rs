//! Selection of one bidirectional LSP pair among several parallel pairs
//! between two edge nodes, and a discrete-event simulator that measures
//! request loss under each selection policy.

pub mod capacity;
pub mod engine;
pub mod metrics;
pub mod policy;
pub mod rng;
pub mod traffic;

pub use capacity::{Allocation, CapacityError, Duplex, LspPairSpec, LspPairState, Request, Topology};
pub use engine::{classify_deadlock, run, run_replications, EngineError, RunResult, Scenario, ScenarioError};
pub use metrics::{
    equal_loss_reduction, loss_probability, scale_topology, LossEstimate, MetricsError, ReductionEstimate,
    ReductionOptions,
};
pub use policy::{Decision, PolicyKind, RejectReason, Selector};
pub use rng::Seeds;
pub use traffic::{ArrivalProcess, DelayClassMix, DemandPattern};
