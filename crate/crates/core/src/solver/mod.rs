//! Makespan-minimizing job-shop solver.
//!
//! Branch-and-bound over active schedules (Giffler–Thompson branching) on
//! the disjunctive graph. Each node is bounded by the longest head/tail path
//! and by Jackson's preemptive one-machine bound on every machine. The first
//! incumbent comes from most-work-remaining dispatch, improved by seeded
//! randomized rollouts.
//!
//! The node budget is the deterministic limit: a search that exhausts it
//! returns `feasible`. The wall-clock limit is a safety net and returns
//! `timeout`.

mod bnb;
mod check;
mod dispatch;
mod problem;

use serde::{Deserialize, Serialize};

use crate::constraints::SolverInput;
use crate::flow::StepRef;
use crate::report::ValidationReport;

pub use check::check_schedule;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub time_limit_s: f64,
    pub seed: u64,
    pub node_limit: u64,
    /// Randomized dispatch rollouts used to tighten the initial incumbent.
    pub rollouts: u32,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            time_limit_s: 60.0,
            seed: 0,
            node_limit: 200_000,
            rollouts: 64,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolveStatus {
    Optimal,
    Feasible,
    Infeasible,
    Timeout,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleEntry {
    pub step: StepRef,
    pub solver_index: usize,
    pub start: u64,
    pub end: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schedule {
    pub status: SolveStatus,
    pub makespan: u64,
    pub lower_bound: u64,
    pub nodes: u64,
    pub entries: Vec<ScheduleEntry>,
}

impl Schedule {
    pub fn empty(status: SolveStatus) -> Self {
        Schedule {
            status,
            makespan: 0,
            lower_bound: 0,
            nodes: 0,
            entries: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SolveError {
    #[error("invalid solver input:\n{0}")]
    InvalidInput(ValidationReport),
}

/// Solves `input`. A precedence cycle yields an `infeasible` schedule with
/// no entries; malformed input is an error.
pub fn solve(input: &SolverInput, cfg: &SolverConfig) -> Result<Schedule, SolveError> {
    let report = crate::constraints::validate_solver_input(input);
    if !report.is_empty() {
        return Err(SolveError::InvalidInput(report));
    }
    let Some(problem) = problem::Problem::new(input) else {
        return Ok(Schedule::empty(SolveStatus::Infeasible));
    };
    if problem.n == 0 {
        return Ok(Schedule::empty(SolveStatus::Optimal));
    }
    let outcome = bnb::search(&problem, cfg);
    let mut entries: Vec<ScheduleEntry> = (0..problem.n)
        .map(|o| {
            let (j, k) = problem.pos[o];
            let start = outcome.starts[o] as u64;
            ScheduleEntry {
                step: StepRef::new(&input.jobs[j].job_id, k),
                solver_index: problem.machine[o],
                start,
                end: start + problem.dur[o] as u64,
            }
        })
        .collect();
    entries.sort_by(|a, b| (a.start, &a.step).cmp(&(b.start, &b.step)));
    Ok(Schedule {
        status: outcome.status,
        makespan: outcome.makespan as u64,
        lower_bound: outcome.lower_bound as u64,
        nodes: outcome.nodes,
        entries,
    })
}
