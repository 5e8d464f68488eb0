use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::benchmark::BenchmarkInstance;
use crate::constraints::PrecedencePair;
use crate::flow::StepRef;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeviceAssignment {
    pub machine_id: String,
    pub solver_index: usize,
    pub device: String,
}

/// Operation-level dependency superset: every within-job chain edge plus
/// kept extra edges, in insertion order. Extra edges that would close a
/// cycle are listed in `eliminated`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DependencySet {
    pub edges: Vec<PrecedencePair>,
    pub eliminated: Vec<PrecedencePair>,
}

impl DependencySet {
    pub fn contains(&self, before: &StepRef, after: &StepRef) -> bool {
        self.edges
            .iter()
            .any(|e| &e.before == before && &e.after == after)
    }

    /// Kept edges that are not between consecutive steps of one job.
    pub fn extra(&self) -> impl Iterator<Item = &PrecedencePair> {
        self.edges.iter().filter(|e| {
            !(e.before.job_id == e.after.job_id && e.before.step_index + 1 == e.after.step_index)
        })
    }
}

pub fn job_id(j: usize) -> String {
    format!("J{:02}", j + 1)
}

pub fn machine_id(m: usize) -> String {
    format!("M{m:02}")
}

fn reaches(adj: &BTreeMap<&StepRef, Vec<&StepRef>>, from: &StepRef, to: &StepRef) -> bool {
    let mut stack = vec![from];
    let mut seen = BTreeSet::new();
    while let Some(n) = stack.pop() {
        if n == to {
            return true;
        }
        if seen.insert(n) {
            stack.extend(adj.get(n).into_iter().flatten().copied());
        }
    }
    false
}

/// Adds `extra` to `chain` in order, dropping each edge that would close a
/// cycle (a later-added edge never displaces an earlier one).
pub fn close_dependency_set(chain: &[PrecedencePair], extra: &[PrecedencePair]) -> DependencySet {
    let mut set = DependencySet::default();
    for e in chain.iter().chain(extra) {
        if set.edges.contains(e) {
            continue;
        }
        let mut adj: BTreeMap<&StepRef, Vec<&StepRef>> = BTreeMap::new();
        for k in &set.edges {
            adj.entry(&k.before).or_default().push(&k.after);
        }
        if e.before == e.after || reaches(&adj, &e.after, &e.before) {
            set.eliminated.push(e.clone());
        } else {
            set.edges.push(e.clone());
        }
    }
    set
}

/// Assigns a distinct device to every machine and draws extra edges:
/// per job with at least three steps, one edge between steps two or three
/// apart with probability 1/2, reversed with probability 3/10 (and then
/// eliminated as circular).
pub fn build_dependency_superset(
    inst: &BenchmarkInstance,
    device_names: &[&str],
    seed: u64,
) -> (Vec<DeviceAssignment>, DependencySet) {
    let rng = &mut ChaCha8Rng::seed_from_u64(seed);
    assert!(
        device_names.len() >= inst.n_machines,
        "need {} device names, have {}",
        inst.n_machines,
        device_names.len()
    );
    let mut names: Vec<&str> = device_names.to_vec();
    names.shuffle(rng);
    let devices = (0..inst.n_machines)
        .map(|m| DeviceAssignment {
            machine_id: machine_id(m),
            solver_index: m,
            device: names[m].to_string(),
        })
        .collect();

    let mut chain = Vec::new();
    let mut extra = Vec::new();
    for (j, ops) in inst.matrix.iter().enumerate() {
        let step = |k| StepRef::new(job_id(j), k);
        for k in 1..ops.len() {
            chain.push(PrecedencePair {
                before: step(k - 1),
                after: step(k),
            });
        }
        if ops.len() >= 3 && rng.gen_bool(0.5) {
            let gap = if ops.len() >= 4 && rng.gen_bool(0.5) {
                3
            } else {
                2
            };
            let a = rng.gen_range(0..ops.len() - gap);
            let b = a + gap;
            let pair = if rng.gen_bool(0.3) {
                PrecedencePair {
                    before: step(b),
                    after: step(a),
                }
            } else {
                PrecedencePair {
                    before: step(a),
                    after: step(b),
                }
            };
            extra.push(pair);
        }
    }
    (devices, close_dependency_set(&chain, &extra))
}
