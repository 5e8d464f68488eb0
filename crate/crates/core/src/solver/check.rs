use std::collections::BTreeMap;

use super::{Schedule, SolveStatus};
use crate::constraints::SolverInput;
use crate::flow::StepRef;
use crate::report::ValidationReport;

/// Re-verifies a schedule against its input without using solver state.
/// Infeasible schedules carry no entries and are checked for exactly that.
pub fn check_schedule(s: &Schedule, input: &SolverInput) -> ValidationReport {
    let mut r = ValidationReport::new();
    if s.status == SolveStatus::Infeasible {
        if !s.entries.is_empty() {
            r.push("entries", "infeasible schedule lists entries");
        }
        return r;
    }

    let mut index: BTreeMap<StepRef, (usize, usize)> = BTreeMap::new();
    for (j, job) in input.jobs.iter().enumerate() {
        for k in 0..job.ops.len() {
            index.insert(StepRef::new(&job.job_id, k), (j, k));
        }
    }
    let mut times: BTreeMap<(usize, usize), (u64, u64)> = BTreeMap::new();
    for (e, entry) in s.entries.iter().enumerate() {
        let path = format!("entries/{e}");
        let Some(&(j, k)) = index.get(&entry.step) else {
            r.push(&path, format!("unknown step {}", entry.step));
            continue;
        };
        let (m, dur) = input.jobs[j].ops[k];
        if entry.solver_index != m {
            r.push(
                &path,
                format!(
                    "step {} on machine {} instead of {m}",
                    entry.step, entry.solver_index
                ),
            );
        }
        if entry.end < entry.start || entry.end - entry.start != dur as u64 {
            r.push(
                &path,
                format!(
                    "step {} spans {}..{} but lasts {dur}",
                    entry.step, entry.start, entry.end
                ),
            );
        }
        if times.insert((j, k), (entry.start, entry.end)).is_some() {
            r.push(&path, format!("step {} scheduled twice", entry.step));
        }
    }
    for (sref, pos) in &index {
        if !times.contains_key(pos) {
            r.push("entries", format!("step {sref} not scheduled"));
        }
    }

    let mut by_machine: BTreeMap<usize, Vec<(u64, u64, &StepRef)>> = BTreeMap::new();
    for entry in &s.entries {
        by_machine.entry(entry.solver_index).or_default().push((
            entry.start,
            entry.end,
            &entry.step,
        ));
    }
    for (m, mut slots) in by_machine {
        slots.sort();
        for w in slots.windows(2) {
            if w[1].0 < w[0].1 {
                r.push(
                    format!("machine/{m}"),
                    format!("steps {} and {} overlap", w[0].2, w[1].2),
                );
            }
        }
    }

    let mut edges: Vec<((usize, usize), (usize, usize))> = Vec::new();
    for (j, job) in input.jobs.iter().enumerate() {
        for k in 1..job.ops.len() {
            edges.push(((j, k - 1), (j, k)));
        }
    }
    edges.extend(
        input
            .extra_precedence
            .iter()
            .map(|e| ((e.before.job, e.before.op), (e.after.job, e.after.op))),
    );
    for (a, b) in edges {
        if let (Some(&(_, ea)), Some(&(sb, _))) = (times.get(&a), times.get(&b)) {
            if sb < ea {
                r.push(
                    "precedence",
                    format!(
                        "job {} op {} starts at {sb} before job {} op {} ends at {ea}",
                        b.0, b.1, a.0, a.1
                    ),
                );
            }
        }
    }

    let max_end = s.entries.iter().map(|e| e.end).max().unwrap_or(0);
    if s.makespan != max_end {
        r.push(
            "makespan",
            format!("makespan {} but last end {max_end}", s.makespan),
        );
    }
    r
}
