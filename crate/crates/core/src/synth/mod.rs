//! Scenario synthesis from classical job-shop benchmark instances.

mod benchmark;
mod dependency;
mod scenario;
mod template;
mod vocab;

pub use benchmark::{load_benchmark, parse_benchmark, BenchmarkError, BenchmarkInstance};
pub use dependency::{
    build_dependency_superset, close_dependency_set, job_id, machine_id, DependencySet,
    DeviceAssignment,
};
pub(crate) use scenario::fnv1a;
pub use scenario::{
    plan_id, read_json, read_scenario, synthesize_scenario, write_scenario, GoldArtifacts,
    Scenario, ScenarioError, ScenarioMeta,
};
pub use template::{render_row, render_sentence, StepText};
pub use vocab::{
    benchmark_manifest, bundled_benchmarks, ManifestEntry, OperationEntry, ParamBank, Vocab,
};
