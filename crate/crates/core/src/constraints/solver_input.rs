use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::ConstraintSet;
use crate::dsl::{DslDefinition, DualProgram};
use crate::flow::StepRef;
use crate::report::ValidationReport;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct OpRef {
    pub job: usize,
    pub op: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct OpEdge {
    pub before: OpRef,
    pub after: OpRef,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolverJob {
    pub job_id: String,
    /// `(solver_index, duration)` in job order.
    pub ops: Vec<(usize, u32)>,
}

/// Job-shop instance. Each job's operations form an implicit chain;
/// `extra_precedence` carries every other ordering requirement.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolverInput {
    pub n_machines: usize,
    pub jobs: Vec<SolverJob>,
    #[serde(default)]
    pub extra_precedence: Vec<OpEdge>,
}

impl SolverInput {
    pub fn from_matrix(n_machines: usize, rows: &[Vec<(usize, u32)>]) -> Self {
        SolverInput {
            n_machines,
            jobs: rows
                .iter()
                .enumerate()
                .map(|(j, ops)| SolverJob {
                    job_id: format!("J{:02}", j + 1),
                    ops: ops.clone(),
                })
                .collect(),
            extra_precedence: Vec::new(),
        }
    }

    pub fn n_ops(&self) -> usize {
        self.jobs.iter().map(|j| j.ops.len()).sum()
    }

    pub fn duration(&self, r: OpRef) -> u32 {
        self.jobs[r.job].ops[r.op].1
    }

    pub fn machine(&self, r: OpRef) -> usize {
        self.jobs[r.job].ops[r.op].0
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MachineMapEntry {
    pub solver_index: usize,
    pub machine_id: String,
    pub name: String,
}

/// Inverse of the solver encoding: `solver_index` and job position back to
/// DSL identifiers.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolverMapping {
    pub machines: Vec<MachineMapEntry>,
    pub jobs: Vec<String>,
}

impl SolverMapping {
    pub fn machine_id(&self, solver_index: usize) -> Option<&str> {
        self.machines
            .iter()
            .find(|m| m.solver_index == solver_index)
            .map(|m| m.machine_id.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConstraintError {
    #[error("machine {0} has no solver_index in the catalog")]
    UnmappedMachine(String),
    #[error("step {0} has no resource pair")]
    MissingResource(StepRef),
    #[error("step {0} does not resolve to an exec context")]
    UnresolvedStep(StepRef),
    #[error("precedence references unknown step {0}")]
    UnknownStep(StepRef),
}

pub fn to_solver_input(
    cs: &ConstraintSet,
    programs: &[DualProgram],
    d: &DslDefinition,
) -> Result<(SolverInput, SolverMapping), ConstraintError> {
    let machine_of: BTreeMap<&StepRef, &str> = cs
        .resource
        .iter()
        .map(|r| (&r.step, r.machine.as_str()))
        .collect();
    let mut pos: BTreeMap<StepRef, OpRef> = BTreeMap::new();
    let mut jobs = Vec::with_capacity(programs.len());
    for (j, p) in programs.iter().enumerate() {
        let mut ops = Vec::with_capacity(p.steps.len());
        for (k, inst) in p.steps.iter().enumerate() {
            let sref = StepRef::new(&p.job_id, k);
            let machine = *machine_of
                .get(&sref)
                .ok_or_else(|| ConstraintError::MissingResource(sref.clone()))?;
            let m = d
                .machine(machine)
                .ok_or_else(|| ConstraintError::UnmappedMachine(machine.to_string()))?;
            let ctx = d
                .context(&inst.op_id, inst.interface_index, inst.context_index)
                .ok_or_else(|| ConstraintError::UnresolvedStep(sref.clone()))?;
            ops.push((m.solver_index, ctx.duration));
            pos.insert(sref, OpRef { job: j, op: k });
        }
        jobs.push(SolverJob {
            job_id: p.job_id.clone(),
            ops,
        });
    }

    let mut extra = Vec::new();
    for pair in &cs.precedence {
        let a = *pos
            .get(&pair.before)
            .ok_or_else(|| ConstraintError::UnknownStep(pair.before.clone()))?;
        let b = *pos
            .get(&pair.after)
            .ok_or_else(|| ConstraintError::UnknownStep(pair.after.clone()))?;
        if a.job == b.job && a.op < b.op {
            continue;
        }
        extra.push(OpEdge {
            before: a,
            after: b,
        });
    }
    extra.sort();

    let mut machines: Vec<MachineMapEntry> = d
        .machine_catalog
        .iter()
        .map(|m| MachineMapEntry {
            solver_index: m.solver_index,
            machine_id: m.machine_id.clone(),
            name: m.name.clone(),
        })
        .collect();
    machines.sort_by_key(|m| m.solver_index);
    let n_machines = machines.last().map_or(0, |m| m.solver_index + 1);
    let mapping = SolverMapping {
        machines,
        jobs: programs.iter().map(|p| p.job_id.clone()).collect(),
    };
    Ok((
        SolverInput {
            n_machines,
            jobs,
            extra_precedence: extra,
        },
        mapping,
    ))
}

/// Syntactic validity of a solver input: index ranges, positive durations,
/// edge endpoints, unique job ids. Cycles are a solve-time (semantic) matter.
pub fn validate_solver_input(input: &SolverInput) -> ValidationReport {
    let mut r = ValidationReport::new();
    let mut seen = std::collections::BTreeSet::new();
    for (j, job) in input.jobs.iter().enumerate() {
        if !seen.insert(job.job_id.as_str()) {
            r.push(
                format!("jobs/{j}"),
                format!("duplicate job_id {}", job.job_id),
            );
        }
        for (k, &(m, dur)) in job.ops.iter().enumerate() {
            if m >= input.n_machines {
                r.push(
                    format!("jobs/{j}/ops/{k}"),
                    format!("machine index {m} out of range"),
                );
            }
            if dur == 0 {
                r.push(format!("jobs/{j}/ops/{k}"), "duration must be positive");
            }
        }
    }
    let valid = |o: &OpRef| o.job < input.jobs.len() && o.op < input.jobs[o.job].ops.len();
    for (e, edge) in input.extra_precedence.iter().enumerate() {
        if !valid(&edge.before) || !valid(&edge.after) {
            r.push(
                format!("extra_precedence/{e}"),
                "edge references unknown operation",
            );
        }
    }
    r
}
