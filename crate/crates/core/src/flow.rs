//! Corpus-level product-flow graph.
//!
//! Each program contributes its own units. A unit that one job finishes as
//! an unconsumed final product and another job begins from as a raw material
//! with the same flow def is linked into a single cross-job unit, so the
//! importing steps depend on the exporting ones.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dsl::DualProgram;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct StepRef {
    pub job_id: String,
    pub step_index: usize,
}

impl StepRef {
    pub fn new(job_id: impl Into<String>, step_index: usize) -> Self {
        StepRef {
            job_id: job_id.into(),
            step_index,
        }
    }
}

impl fmt::Display for StepRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.job_id, self.step_index)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GlobalUnit {
    /// `job_id/unit_id` of the first member.
    pub key: String,
    pub flow_def: String,
    pub producers: BTreeSet<StepRef>,
    pub consumers: BTreeSet<StepRef>,
    /// Defined by SOURCE before the walk.
    pub sourced: bool,
    /// Killed by SINK after the walk.
    pub sunk: bool,
    pub members: Vec<String>,
}

impl GlobalUnit {
    /// Number of kills a definition must satisfy: one per consumer plus the
    /// SINK when final. Never zero, so a unit nobody kills stays in memory.
    pub fn planned_kills(&self) -> usize {
        (self.consumers.len() + usize::from(self.sunk)).max(1)
    }
}

#[derive(Clone, Debug, Default)]
pub struct FlowNetwork {
    pub units: Vec<GlobalUnit>,
    /// Steps in corpus order: `(job position, step index)` → ref.
    pub steps: Vec<StepRef>,
    job_pos: BTreeMap<String, usize>,
}

impl FlowNetwork {
    pub fn build(programs: &[DualProgram]) -> Self {
        let mut net = FlowNetwork::default();
        for (j, p) in programs.iter().enumerate() {
            net.job_pos.entry(p.job_id.clone()).or_insert(j);
            for s in 0..p.steps.len() {
                net.steps.push(StepRef::new(&p.job_id, s));
            }
        }

        // exports[def] = (job position, unit) pairs finished by a job
        let mut exports: BTreeMap<&str, Vec<(usize, usize)>> = BTreeMap::new();
        let mut imports: BTreeMap<&str, Vec<(usize, usize)>> = BTreeMap::new();
        for (j, p) in programs.iter().enumerate() {
            for (k, u) in p.flow_units.iter().enumerate() {
                if u.final_product && u.consumers.is_empty() && !u.producers.is_empty() {
                    exports.entry(&u.flow_def).or_default().push((j, k));
                }
                if u.raw_material && u.producers.is_empty() && !u.consumers.is_empty() {
                    imports.entry(&u.flow_def).or_default().push((j, k));
                }
            }
        }

        let mut merged: BTreeSet<(usize, usize)> = BTreeSet::new();
        let mut linked: Vec<GlobalUnit> = Vec::new();
        for (def, ins) in &imports {
            let Some(outs) = exports.get(def) else {
                continue;
            };
            let mut members: BTreeSet<(usize, usize)> = BTreeSet::new();
            for &(ij, ik) in ins {
                let foreign: Vec<_> = outs.iter().filter(|&&(oj, _)| oj != ij).copied().collect();
                if !foreign.is_empty() {
                    members.insert((ij, ik));
                    members.extend(foreign);
                }
            }
            if members.is_empty() {
                continue;
            }
            let mut g = GlobalUnit {
                key: String::new(),
                flow_def: def.to_string(),
                producers: BTreeSet::new(),
                consumers: BTreeSet::new(),
                sourced: false,
                sunk: false,
                members: Vec::new(),
            };
            for &(j, k) in &members {
                let p = &programs[j];
                let u = &p.flow_units[k];
                g.producers
                    .extend(u.producers.iter().map(|&s| StepRef::new(&p.job_id, s)));
                g.consumers
                    .extend(u.consumers.iter().map(|&s| StepRef::new(&p.job_id, s)));
                g.members.push(format!("{}/{}", p.job_id, u.unit_id));
            }
            g.key = g.members[0].clone();
            merged.extend(members);
            linked.push(g);
        }

        for (j, p) in programs.iter().enumerate() {
            for (k, u) in p.flow_units.iter().enumerate() {
                if merged.contains(&(j, k)) {
                    continue;
                }
                let key = format!("{}/{}", p.job_id, u.unit_id);
                net.units.push(GlobalUnit {
                    key: key.clone(),
                    flow_def: u.flow_def.clone(),
                    producers: u
                        .producers
                        .iter()
                        .map(|&s| StepRef::new(&p.job_id, s))
                        .collect(),
                    consumers: u
                        .consumers
                        .iter()
                        .map(|&s| StepRef::new(&p.job_id, s))
                        .collect(),
                    sourced: u.raw_material && u.producers.is_empty(),
                    sunk: u.final_product,
                    members: vec![key],
                });
            }
        }
        net.units.extend(linked);
        net
    }

    pub fn job_position(&self, job_id: &str) -> Option<usize> {
        self.job_pos.get(job_id).copied()
    }

    /// Global execution order: a topological order of within-job chains plus
    /// cross-job flow edges, ties broken by (job position, step index).
    /// Steps caught in a cycle are appended in corpus order so the walk can
    /// still report them.
    pub fn execution_order(&self) -> Vec<StepRef> {
        let index: BTreeMap<&StepRef, usize> =
            self.steps.iter().enumerate().map(|(i, s)| (s, i)).collect();
        let n = self.steps.len();
        let mut succ: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
        for w in self.steps.windows(2) {
            if w[0].job_id == w[1].job_id {
                succ[index[&w[0]]].insert(index[&w[1]]);
            }
        }
        for u in &self.units {
            for p in &u.producers {
                for c in &u.consumers {
                    if p.job_id != c.job_id {
                        if let (Some(&a), Some(&b)) = (index.get(p), index.get(c)) {
                            succ[a].insert(b);
                        }
                    }
                }
            }
        }
        let mut indeg = vec![0usize; n];
        for s in &succ {
            for &b in s {
                indeg[b] += 1;
            }
        }
        let key = |i: usize| {
            let s = &self.steps[i];
            (
                self.job_pos.get(&s.job_id).copied().unwrap_or(usize::MAX),
                s.step_index,
            )
        };
        let mut heap: BinaryHeap<Reverse<((usize, usize), usize)>> = (0..n)
            .filter(|&i| indeg[i] == 0)
            .map(|i| Reverse((key(i), i)))
            .collect();
        let mut done = vec![false; n];
        let mut order = Vec::with_capacity(n);
        while let Some(Reverse((_, i))) = heap.pop() {
            done[i] = true;
            order.push(self.steps[i].clone());
            for &b in &succ[i] {
                indeg[b] -= 1;
                if indeg[b] == 0 {
                    heap.push(Reverse((key(b), b)));
                }
            }
        }
        order.extend((0..n).filter(|&i| !done[i]).map(|i| self.steps[i].clone()));
        order
    }
}
