use std::collections::BTreeMap;

use super::ProductionPlan;
use crate::dsl::DualProgram;
use crate::flow::{FlowNetwork, StepRef};
use crate::report::ValidationReport;

/// Lock check: every consumer starts no earlier than the latest end of the
/// unit's producers. Breakpoint check: replaying definitions (at producer
/// ends) and kills (at consumer starts) in time order never kills a unit
/// that is not yet available.
pub fn check_process_locks(plan: &ProductionPlan, programs: &[DualProgram]) -> ValidationReport {
    let mut r = ValidationReport::new();
    let times: BTreeMap<StepRef, (u64, u64)> = plan
        .entries
        .iter()
        .map(|e| (StepRef::new(&e.job_id, e.step_index), (e.start, e.end)))
        .collect();
    let net = FlowNetwork::build(programs);

    for u in &net.units {
        let mut ready = 0;
        let mut complete = true;
        for p in &u.producers {
            match times.get(p) {
                Some(&(_, end)) => ready = ready.max(end),
                None => {
                    complete = false;
                    r.push(
                        format!("units/{}", u.key),
                        format!("producer {p} missing from plan"),
                    );
                }
            }
        }
        if !complete {
            continue;
        }
        for c in &u.consumers {
            match times.get(c) {
                Some(&(start, _)) if start < ready => r.push(
                    format!("units/{}", u.key),
                    format!(
                        "lock violated: {c} starts at {start} before inputs are ready at {ready}"
                    ),
                ),
                Some(_) => {}
                None => r.push(
                    format!("units/{}", u.key),
                    format!("consumer {c} missing from plan"),
                ),
            }
        }
    }
    if !r.is_empty() {
        return r;
    }

    // (time, 0 = define | 1 = kill, unit)
    let mut events: Vec<(u64, u8, usize)> = Vec::new();
    for (i, u) in net.units.iter().enumerate() {
        for p in &u.producers {
            events.push((times[p].1, 0, i));
        }
        for c in &u.consumers {
            events.push((times[c].0, 1, i));
        }
    }
    events.sort_unstable();
    let mut pending: Vec<usize> = net.units.iter().map(|u| u.producers.len()).collect();
    let mut live: Vec<bool> = net.units.iter().map(|u| u.sourced).collect();
    for (t, kind, i) in events {
        if kind == 0 {
            pending[i] -= 1;
            if pending[i] == 0 {
                live[i] = true;
            }
        } else if !live[i] {
            r.push(
                format!("units/{}", net.units[i].key),
                format!("flow breakpoint: consumed at {t} before it exists"),
            );
        }
    }
    r
}
