//! Grounding of solver schedules into configuration-complete plans.

mod gantt;
mod locks;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::canonical::{self, CanonicalError};
use crate::constraints::SolverMapping;
use crate::dsl::{DslDefinition, DualProgram, ParamValue};
use crate::flow::StepRef;
use crate::report::ValidationReport;
use crate::solver::Schedule;

pub use gantt::{emit_gantt, Gantt, GanttBar};
pub use locks::check_process_locks;

/// Plan entries serialize with sorted keys: `config, duration, end, job_id,
/// machine, operation, start, step_index`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanEntry {
    pub job_id: String,
    pub step_index: usize,
    pub operation: String,
    /// Machine display name.
    pub machine: String,
    pub start: u64,
    pub end: u64,
    pub duration: u64,
    pub config: BTreeMap<String, ParamValue>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProductionPlan {
    pub plan_id: String,
    pub scenario_id: String,
    /// Sorted by `(start, job_id, step_index)`.
    pub entries: Vec<PlanEntry>,
}

impl ProductionPlan {
    pub fn to_canonical(&self) -> Result<String, CanonicalError> {
        canonical::to_versioned_string(self)
    }

    pub fn from_canonical(text: &str) -> Result<Self, CanonicalError> {
        canonical::from_versioned_str(text)
    }

    pub fn makespan(&self) -> u64 {
        self.entries.iter().map(|e| e.end).max().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GroundError {
    #[error("schedule references unknown step {0}")]
    UnknownStepRef(StepRef),
    #[error("step {step} scheduled on {scheduled} but its context requires {expected}")]
    MachineMismatch {
        step: StepRef,
        scheduled: String,
        expected: String,
    },
    #[error("step {step} scheduled for {scheduled} time units but its context lasts {expected}")]
    DurationMismatch {
        step: StepRef,
        scheduled: u64,
        expected: u64,
    },
}

pub fn ground(
    s: &Schedule,
    programs: &[DualProgram],
    d: &DslDefinition,
    mapping: &SolverMapping,
    plan_id: &str,
    scenario_id: &str,
) -> Result<ProductionPlan, GroundError> {
    let by_job: BTreeMap<&str, &DualProgram> =
        programs.iter().map(|p| (p.job_id.as_str(), p)).collect();
    let mut entries = Vec::with_capacity(s.entries.len());
    for e in &s.entries {
        let unknown = || GroundError::UnknownStepRef(e.step.clone());
        let inst = by_job
            .get(e.step.job_id.as_str())
            .and_then(|p| p.steps.get(e.step.step_index))
            .ok_or_else(unknown)?;
        let ctx = d
            .context(&inst.op_id, inst.interface_index, inst.context_index)
            .ok_or_else(unknown)?;
        let scheduled = mapping.machine_id(e.solver_index).unwrap_or("?");
        if scheduled != ctx.machine {
            return Err(GroundError::MachineMismatch {
                step: e.step.clone(),
                scheduled: scheduled.to_string(),
                expected: ctx.machine.clone(),
            });
        }
        let span = e.end.saturating_sub(e.start);
        if span != ctx.duration as u64 {
            return Err(GroundError::DurationMismatch {
                step: e.step.clone(),
                scheduled: span,
                expected: ctx.duration as u64,
            });
        }
        let machine = d
            .machine(&ctx.machine)
            .map_or_else(|| ctx.machine.clone(), |m| m.name.clone());
        entries.push(PlanEntry {
            job_id: e.step.job_id.clone(),
            step_index: e.step.step_index,
            operation: inst.op_id.clone(),
            machine,
            start: e.start,
            end: e.end,
            duration: ctx.duration as u64,
            config: inst.bound_params.clone(),
        });
    }
    entries.sort_by(|a, b| {
        (a.start, &a.job_id, a.step_index).cmp(&(b.start, &b.job_id, b.step_index))
    });
    Ok(ProductionPlan {
        plan_id: plan_id.to_string(),
        scenario_id: scenario_id.to_string(),
        entries,
    })
}

/// Plan-level consistency: one entry per step, `end - start = duration`,
/// and operation, machine, duration and config equal to the program's
/// resolved values.
pub fn check_plan(
    plan: &ProductionPlan,
    programs: &[DualProgram],
    d: &DslDefinition,
) -> ValidationReport {
    let mut r = ValidationReport::new();
    let mut seen: BTreeMap<StepRef, usize> = BTreeMap::new();
    let by_job: BTreeMap<&str, &DualProgram> =
        programs.iter().map(|p| (p.job_id.as_str(), p)).collect();
    for (i, e) in plan.entries.iter().enumerate() {
        let path = format!("entries/{i}");
        if e.end < e.start || e.end - e.start != e.duration {
            r.push(
                &path,
                format!(
                    "start {} end {} inconsistent with duration {}",
                    e.start, e.end, e.duration
                ),
            );
        }
        *seen
            .entry(StepRef::new(&e.job_id, e.step_index))
            .or_default() += 1;
        let Some(inst) = by_job
            .get(e.job_id.as_str())
            .and_then(|p| p.steps.get(e.step_index))
        else {
            r.push(&path, "entry does not correspond to a program step");
            continue;
        };
        let Some(ctx) = d.context(&inst.op_id, inst.interface_index, inst.context_index) else {
            r.push(&path, "program step does not resolve to an exec context");
            continue;
        };
        let machine = d
            .machine(&ctx.machine)
            .map(|m| m.name.as_str())
            .unwrap_or("");
        if e.operation != inst.op_id
            || e.machine != machine
            || e.duration != ctx.duration as u64
            || e.config != inst.bound_params
        {
            r.push(&path, "entry differs from the program step it grounds");
        }
    }
    for p in programs {
        for k in 0..p.steps.len() {
            match seen.get(&StepRef::new(&p.job_id, k)) {
                Some(1) => {}
                Some(n) => r.push(
                    "entries",
                    format!("step {}#{k} planned {n} times", p.job_id),
                ),
                None => r.push(
                    "entries",
                    format!("step {}#{k} missing from plan", p.job_id),
                ),
            }
        }
    }
    r
}
