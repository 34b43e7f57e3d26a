//! Abstraction of event-triggered control traffic into timed safety
//! automata: conic state-space coverings, certified per-cone inter-sample
//! bounds, flow-pipe transition analysis, and automaton emission.

pub mod bounds;
pub mod error;
pub mod linalg;
pub mod partition;
pub mod plant;
pub mod quotient;
pub mod reachability;

pub use bounds::{
    build_embedding, compute_all_bounds, global_lower_bound, BoundsOptions, EmbeddingTables,
    Multiplier, RegionalBounds, VertexCertificate,
};
pub use error::Error;
pub use linalg::{Matrix, Vector};
pub use partition::{isotropic_cover, ConicRegion, Partition};
pub use plant::{Plant, Trace, TraceEvent};
pub use quotient::{
    build_quotient, replay_trace, InitialSet, QuotientSystem, ReplayReport, TrafficAutomaton,
    DEFAULT_CLOCK_SCALE,
};
pub use reachability::{
    compute_transitions, flow_pipe, successor_regions, FlowPipe, FlowPipeSegment,
    ReachabilityResult,
};
