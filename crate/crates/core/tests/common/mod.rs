//! Random dual-program corpora for oracle tests.

#![allow(dead_code)]

pub mod oracles;

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use shopspec::dsl::{
    DslDefinition, DualProgram, ExecContext, FlowGrammar, FlowRequirement, FlowUnitDef,
    FlowUnitInstance, Interface, MachineDef, OperationDef, OperationInstance,
};

fn unit(
    job: &str,
    k: usize,
    def: String,
    producers: BTreeSet<usize>,
    consumers: BTreeSet<usize>,
) -> FlowUnitInstance {
    FlowUnitInstance {
        unit_id: format!("{job}u{k}"),
        flow_def: def,
        raw_material: producers.is_empty(),
        final_product: consumers.is_empty(),
        producers,
        consumers,
        prop_values: BTreeMap::new(),
    }
}

/// A valid program of `n` steps. Every step consumes at least one unit and
/// produces at least one; units may have up to `max_fan` producers or
/// consumers. Defs are private to the job.
pub fn random_program(rng: &mut ChaCha8Rng, job: &str, n: usize, max_fan: usize) -> DualProgram {
    let mut units = Vec::new();
    let mut consumes: Vec<bool> = vec![false; n];
    for s in 0..n {
        let n_out = rng.gen_range(1..=2);
        for _ in 0..n_out {
            let mut producers: BTreeSet<usize> = [s].into();
            if s > 0 && max_fan > 1 && rng.gen_bool(0.2) {
                producers.insert(rng.gen_range(0..s));
            }
            let later: Vec<usize> = (s + 1..n).collect();
            let k = rng.gen_range(0..=max_fan.min(later.len()));
            let consumers: BTreeSet<usize> = later.choose_multiple(rng, k).copied().collect();
            for &c in &consumers {
                consumes[c] = true;
            }
            let k = units.len();
            units.push(unit(job, k, format!("{job}d{k}"), producers, consumers));
        }
    }
    for s in 0..n {
        if !consumes[s] || rng.gen_bool(0.2) {
            let mut consumers: BTreeSet<usize> = [s].into();
            if max_fan > 1 && s + 1 < n && rng.gen_bool(0.2) {
                consumers.insert(rng.gen_range(s + 1..n));
            }
            let k = units.len();
            units.push(unit(
                job,
                k,
                format!("{job}d{k}"),
                BTreeSet::new(),
                consumers,
            ));
        }
    }
    DualProgram {
        job_id: job.to_string(),
        steps: (0..n)
            .map(|i| OperationInstance {
                step_index: i,
                op_id: format!("{job}S{i}"),
                interface_index: 0,
                context_index: 0,
                bound_params: BTreeMap::new(),
            })
            .collect(),
        flow_units: units,
    }
}

/// One to three jobs with at most `max_steps` steps in total. A later job
/// may start from an earlier job's final product under the same def.
pub fn random_corpus(rng: &mut ChaCha8Rng, max_steps: usize) -> Vec<DualProgram> {
    let total = rng.gen_range(1..=max_steps);
    let n_jobs = rng.gen_range(1..=3.min(total));
    let mut sizes = vec![1; n_jobs];
    for _ in n_jobs..total {
        sizes[rng.gen_range(0..n_jobs)] += 1;
    }
    let mut progs: Vec<DualProgram> = Vec::new();
    for (j, &n) in sizes.iter().enumerate() {
        let mut p = random_program(rng, &format!("J{j}"), n, 2);
        if j > 0 && rng.gen_bool(0.5) {
            let exports: Vec<String> = progs
                .iter()
                .flat_map(|q| &q.flow_units)
                .filter(|u| u.final_product && u.consumers.is_empty() && !u.producers.is_empty())
                .map(|u| u.flow_def.clone())
                .collect();
            let taken: BTreeSet<String> = progs
                .iter()
                .flat_map(|q| &q.flow_units)
                .filter(|u| u.raw_material)
                .map(|u| u.flow_def.clone())
                .collect();
            let free: Vec<&String> = exports.iter().filter(|d| !taken.contains(*d)).collect();
            if let Some(def) = free.choose(rng) {
                if let Some(r) = p.flow_units.iter_mut().find(|u| u.raw_material) {
                    r.flow_def = (*def).clone();
                }
            }
        }
        progs.push(p);
    }
    progs
}

/// Applies one random structural edit, which may or may not break the
/// corpus.
pub fn perturb(rng: &mut ChaCha8Rng, progs: &mut [DualProgram]) {
    let j = rng.gen_range(0..progs.len());
    let p = &mut progs[j];
    let n = p.steps.len();
    let k = rng.gen_range(0..p.flow_units.len());
    let u = &mut p.flow_units[k];
    match rng.gen_range(0..6) {
        0 => u.raw_material = !u.raw_material,
        1 => u.final_product = !u.final_product,
        2 => {
            if let Some(&s) = u.producers.iter().next() {
                u.producers.remove(&s);
            }
        }
        3 => {
            if let Some(&s) = u.consumers.iter().next_back() {
                u.consumers.remove(&s);
            }
        }
        4 => {
            u.consumers.insert(rng.gen_range(0..n));
        }
        _ => {
            u.producers.insert(rng.gen_range(0..n));
        }
    }
}

/// A DSL in which every step's op has exactly the interface the step uses.
pub fn dsl_for(progs: &[DualProgram], grammar: FlowGrammar) -> DslDefinition {
    let mut d = DslDefinition {
        flow_grammar: grammar,
        ..DslDefinition::default()
    };
    d.machine_catalog.push(MachineDef {
        machine_id: "M00".into(),
        name: "Bench".into(),
        solver_index: 0,
    });
    let mut slots: BTreeMap<String, (Vec<FlowRequirement>, Vec<FlowRequirement>)> = BTreeMap::new();
    for p in progs {
        for u in &p.flow_units {
            d.flow_unit_defs.insert(
                u.flow_def.clone(),
                FlowUnitDef {
                    identifier: u.flow_def.clone(),
                    properties: BTreeMap::new(),
                    aliases: BTreeSet::new(),
                },
            );
        }
        for (i, s) in p.steps.iter().enumerate() {
            let e = slots.entry(s.op_id.clone()).or_default();
            for u in p.consumed_at(i) {
                e.0.push(FlowRequirement::single(&u.flow_def));
            }
            for u in p.produced_at(i) {
                e.1.push(FlowRequirement::single(&u.flow_def));
            }
        }
    }
    for (op, (pre, post)) in slots {
        d.operation_defs.insert(
            op.clone(),
            OperationDef {
                identifier: op,
                aliases: BTreeSet::new(),
                interfaces: vec![Interface {
                    preconditions: pre,
                    postconditions: post,
                    exec_contexts: vec![ExecContext {
                        machine: "M00".into(),
                        duration: 1,
                        params: BTreeMap::new(),
                    }],
                }],
            },
        );
    }
    d
}
