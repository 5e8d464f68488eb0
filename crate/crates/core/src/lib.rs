//! Constraint-specification toolchain for job-shop production scheduling.
//!
//! Procedure documents are compiled into dual-view DSL programs
//! ([`abstraction`]), verified into resource and precedence constraints
//! ([`constraints`]), solved as a job-shop problem ([`solver`]) and grounded
//! into production plans ([`grounding`]). [`adaptation`] induces a DSL from a
//! corpus, [`synth`] builds benchmark-seeded scenarios and [`metrics`]
//! scores pipeline output against gold.

pub mod abstraction;
pub mod adaptation;
pub mod canonical;
pub mod constraints;
pub mod dsl;
pub mod files;
pub mod flow;
pub mod grounding;
pub mod metrics;
pub mod pipeline;
pub mod report;
pub mod scalar;
pub mod solver;
pub mod synth;

pub use report::{ValidationReport, Violation};
pub use scalar::Scalar;

/// Default scalar for the numeric modules.
pub type Real = f64;
pub type MetricReport = metrics::MetricReport<Real>;
pub type ScenarioMetrics = metrics::ScenarioMetrics<Real>;
pub type AdaptationConfig = adaptation::AdaptationConfig<Real>;
pub type AdaptationReport = adaptation::AdaptationReport<Real>;
pub type Adaptation = adaptation::Adaptation<Real>;
pub type EmState = adaptation::EmState<Real>;
