//! Structural analytics for information cascades.

pub mod cascade;
pub mod dynamics;
pub mod error;
pub mod fit;
pub mod groups;
pub mod io;
pub mod metrics;
pub mod seed;
pub mod store;
pub mod synth;

mod linalg;
mod parallel;

pub use cascade::{
    build_cascades, compute_depths, growth_series, BuildReport, CascadeBuilder, CascadeGraph,
    DepthAssignment, Edge, GrowthSeries, Reject, RejectKind, RetweetEvent,
};
pub use error::{Error, Result};
pub use metrics::{metric_vector, Metric, MetricConfig, MetricVector};
