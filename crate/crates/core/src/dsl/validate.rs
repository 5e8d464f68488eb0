use std::collections::{BTreeMap, BTreeSet};

use super::{DslDefinition, DualProgram, FlowRequirement, NonTerminal, ParamSpec, Production};
use crate::report::ValidationReport;

pub fn validate_dsl(d: &DslDefinition) -> ValidationReport {
    let mut r = ValidationReport::new();

    let mut ids = BTreeSet::new();
    let mut indices = BTreeSet::new();
    for (i, m) in d.machine_catalog.iter().enumerate() {
        let path = format!("machine_catalog/{i}");
        if !ids.insert(m.machine_id.as_str()) {
            r.push(&path, format!("duplicate machine {}", m.machine_id));
        }
        if !indices.insert(m.solver_index) {
            r.push(&path, format!("duplicate solver_index {}", m.solver_index));
        }
    }

    for (key, op) in &d.operation_defs {
        let path = format!("operation_defs/{key}");
        if &op.identifier != key {
            r.push(
                &path,
                format!("identifier {} does not match key", op.identifier),
            );
        }
        if op.interfaces.is_empty() {
            r.push(&path, "operation has no interfaces");
        }
        for (i, iface) in op.interfaces.iter().enumerate() {
            let ipath = format!("{path}/interfaces/{i}");
            if op.interfaces[..i].contains(iface) {
                r.push(&ipath, "duplicate interface");
            }
            let slots = iface.preconditions.iter().map(|s| ("preconditions", s));
            let slots = slots.chain(iface.postconditions.iter().map(|s| ("postconditions", s)));
            for (j, (side, slot)) in slots.enumerate() {
                if slot.accepts.is_empty() {
                    r.push(
                        format!("{ipath}/{side}"),
                        format!("empty flow requirement #{j}"),
                    );
                }
                for name in &slot.accepts {
                    if !d.flow_unit_defs.contains_key(name) {
                        r.push(
                            format!("{ipath}/{side}"),
                            format!("unknown flow unit {name}"),
                        );
                    }
                }
            }
            if iface.exec_contexts.is_empty() {
                r.push(&ipath, "interface has no exec_contexts");
            }
            for (c, ctx) in iface.exec_contexts.iter().enumerate() {
                let cpath = format!("{ipath}/exec_contexts/{c}");
                if d.machine(&ctx.machine).is_none() {
                    r.push(&cpath, format!("unknown machine {}", ctx.machine));
                }
                if ctx.duration == 0 {
                    r.push(&cpath, "duration must be positive");
                }
                check_specs(&mut r, &format!("{cpath}/params"), &ctx.params);
            }
        }
    }

    let mut alias_owner: BTreeMap<&str, &str> = BTreeMap::new();
    for (key, def) in &d.flow_unit_defs {
        let path = format!("flow_unit_defs/{key}");
        if &def.identifier != key {
            r.push(
                &path,
                format!("identifier {} does not match key", def.identifier),
            );
        }
        if def.aliases.contains(&def.identifier) {
            r.push(&path, "identifier listed among its own aliases");
        }
        for a in &def.aliases {
            if d.flow_unit_defs.contains_key(a) && a != key {
                r.push(
                    &path,
                    format!("alias {a} collides with a flow unit identifier"),
                );
            }
            if let Some(prev) = alias_owner.insert(a, key) {
                r.push(&path, format!("alias {a} also declared by {prev}"));
            }
        }
        check_specs(&mut r, &format!("{path}/properties"), &def.properties);
    }

    let g = &d.flow_grammar;
    if g.max_pred == 0 {
        r.push("flow_grammar/max_pred", "max_pred must be at least 1");
    }
    if g.max_succ == 0 {
        r.push("flow_grammar/max_succ", "max_succ must be at least 1");
    }
    let base = Production::base_set();
    for (i, p) in g.productions.iter().enumerate() {
        if !base.contains(p) {
            r.push(
                format!("flow_grammar/productions/{i}"),
                "production not derivable from the base grammar",
            );
        }
    }
    for p in &base {
        let bound = match p.lhs {
            NonTerminal::PredS => g.max_pred,
            NonTerminal::SuccS => g.max_succ,
        };
        let required = !p.is_recursive() || bound > 1;
        let present = g.productions.contains(p);
        if required && !present {
            r.push(
                "flow_grammar/productions",
                format!("missing production {p:?}"),
            );
        }
        if !required && present {
            r.push(
                "flow_grammar/productions",
                format!("recursive production {p:?} exceeds bound 1"),
            );
        }
    }
    r
}

fn check_specs(r: &mut ValidationReport, path: &str, specs: &BTreeMap<String, ParamSpec>) {
    for (name, spec) in specs {
        for p in spec.problems() {
            r.push(format!("{path}/{name}"), p);
        }
    }
}

/// Whether every unit def can be paired with a distinct slot accepting it,
/// with no slot left over.
pub(crate) fn perfect_matching(defs: &[&str], slots: &[FlowRequirement]) -> bool {
    if defs.len() != slots.len() {
        return false;
    }
    let mut slot_owner: Vec<Option<usize>> = vec![None; slots.len()];
    for u in 0..defs.len() {
        let mut seen = vec![false; slots.len()];
        if !augment(u, defs, slots, &mut slot_owner, &mut seen) {
            return false;
        }
    }
    true
}

fn augment(
    u: usize,
    defs: &[&str],
    slots: &[FlowRequirement],
    owner: &mut [Option<usize>],
    seen: &mut [bool],
) -> bool {
    for s in 0..slots.len() {
        if seen[s] || !slots[s].accepts(defs[u]) {
            continue;
        }
        seen[s] = true;
        if owner[s].is_none() || augment(owner[s].unwrap(), defs, slots, owner, seen) {
            owner[s] = Some(u);
            return true;
        }
    }
    false
}

pub fn validate_program(p: &DualProgram, d: &DslDefinition) -> ValidationReport {
    let mut r = ValidationReport::new();
    let n = p.steps.len();

    for (i, step) in p.steps.iter().enumerate() {
        let path = format!("steps/{i}");
        if step.step_index != i {
            r.push(
                &path,
                format!("step_index {} at position {i}", step.step_index),
            );
        }
        let Some(op) = d.operation_defs.get(&step.op_id) else {
            r.push(&path, format!("unknown operation {}", step.op_id));
            continue;
        };
        let Some(iface) = op.interfaces.get(step.interface_index) else {
            r.push(
                &path,
                format!("interface_index {} out of range", step.interface_index),
            );
            continue;
        };
        let Some(ctx) = iface.exec_contexts.get(step.context_index) else {
            r.push(
                &path,
                format!("context_index {} out of range", step.context_index),
            );
            continue;
        };
        for (name, value) in &step.bound_params {
            match ctx.params.get(name) {
                None => r.push(
                    format!("{path}/bound_params/{name}"),
                    "parameter not declared by context",
                ),
                Some(spec) if !spec.contains(value) => r.push(
                    format!("{path}/bound_params/{name}"),
                    format!("value {value} outside domain"),
                ),
                _ => {}
            }
        }

        let consumed: Vec<&str> = p.consumed_at(i).map(|u| u.flow_def.as_str()).collect();
        if !perfect_matching(&consumed, &iface.preconditions) {
            r.push(&path, "consumed units do not match interface preconditions");
        }
        let produced: Vec<&str> = p.produced_at(i).map(|u| u.flow_def.as_str()).collect();
        if !perfect_matching(&produced, &iface.postconditions) {
            r.push(
                &path,
                "produced units do not match interface postconditions",
            );
        }
    }

    let mut unit_ids = BTreeSet::new();
    let g = &d.flow_grammar;
    for (k, u) in p.flow_units.iter().enumerate() {
        let path = format!("flow_units/{k}");
        if !unit_ids.insert(u.unit_id.as_str()) {
            r.push(&path, format!("duplicate unit_id {}", u.unit_id));
        }
        if !d.flow_unit_defs.contains_key(&u.flow_def) {
            r.push(&path, format!("unknown flow unit {}", u.flow_def));
        }
        if let Some(&bad) = u.producers.iter().chain(&u.consumers).find(|&&s| s >= n) {
            r.push(&path, format!("step {bad} out of range"));
        }
        if u.producers.is_empty() && u.consumers.is_empty() {
            r.push(&path, "unit has neither producers nor consumers");
        }
        if u.producers.is_empty() && !u.raw_material {
            r.push(&path, "dangling consumer");
        }
        if !u.producers.is_empty() && u.raw_material {
            r.push(&path, "raw-material unit has producers");
        }
        if u.consumers.is_empty() && !u.final_product {
            r.push(&path, "unconsumed unit");
        }
        if !g.admits(u.producers.len(), u.consumers.len()) {
            r.push(
                &path,
                format!(
                    "pipe shape ({}, {}) exceeds grammar bounds ({}, {})",
                    u.producers.len(),
                    u.consumers.len(),
                    g.max_pred,
                    g.max_succ
                ),
            );
        }
        if u.producers
            .iter()
            .any(|&a| u.consumers.iter().any(|&b| a >= b))
        {
            r.push(&path, "cyclic flow");
        }
    }
    r
}
