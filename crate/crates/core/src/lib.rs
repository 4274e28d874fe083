//! Discrete-event simulator for clustering-based routing protocols in mobile
//! wireless sensor networks.
//!
//! The crate is organized around a deterministic event kernel:
//!
//! - [`kernel`] — simulation clock, totally ordered event queue, seeded
//!   random streams. Everything else draws time and randomness from here.
//! - [`mobility`] — random-waypoint, mass (inertial), and linear mobility
//!   models with specular boundary reflection.
//! - [`network`] — unit-disk radio, neighbor discovery, and message
//!   scheduling with in-flight range checks.
//! - [`protocols`] — cluster-head election and routing rules for the six
//!   protocols (MAR, GRC, GRC-R, DECA, DEMC, DEMC-R).
//! - [`sim`] — the world that wires nodes, radio, elections, traffic and
//!   recovery together and runs one scenario to completion.
//! - [`metrics`] — packet-loss percentage, delivery ratio, run accounting
//!   and cross-seed aggregation.
//! - [`experiment`] — scenario configuration, protocol × mobility × speed
//!   × seed sweeps, CSV emission and plot-ready tables.

// Validation guards are written `!(x > 0.0)` on purpose: the negation also
// rejects NaN. Node tables are parallel arrays indexed by id, so index loops
// stay.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod experiment;
pub mod geom;
pub mod kernel;
pub mod metrics;
pub mod mobility;
pub mod network;
pub mod protocols;
pub mod sim;

pub use experiment::{ScenarioConfig, SweepSpec};
pub use geom::Vec2;
pub use kernel::{Kernel, RandomStream, SimEvent, SimTime};
pub use metrics::MetricsRecord;
pub use mobility::{FieldGeometry, MobilityModel, MobilityParams, MobilityState};
pub use network::{NodeId, RadioParams, Topology};
pub use protocols::{ProtocolConfig, ProtocolKind, Role};
pub use sim::{RunAudit, RunOutput};
