//! Corpus scan and extraction: turns procedure documents into the
//! observations the inducers fit.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::prior::PriorKnowledge;
use crate::abstraction::{
    extract_actions, op_scores, ExtractedAction, ProcedureDoc, RuleExtractor, Vocabulary,
};
use crate::dsl::{MachineDef, ParamValue};
use crate::synth::machine_id;

/// One extracted action resolved to an operation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActionObs {
    pub doc: usize,
    pub step: usize,
    pub op: String,
    pub machine: String,
    pub duration: u32,
    /// `(name, value, unit)` in extraction order, first mention per name.
    pub params: Vec<(String, ParamValue, Option<String>)>,
    /// Unit occurrence consumed per input mention, in mention order.
    pub inputs: Vec<usize>,
    pub outputs: Vec<usize>,
}

impl ActionObs {
    pub fn schema(&self) -> BTreeSet<&str> {
        self.params.iter().map(|p| p.0.as_str()).collect()
    }
}

/// One flow unit occurrence: a produced (or raw) unit and its consumers
/// within one document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnitObs {
    pub doc: usize,
    pub name: String,
    pub producers: BTreeSet<usize>,
    pub consumers: BTreeSet<usize>,
    pub producer_ops: BTreeSet<String>,
    pub consumer_ops: BTreeSet<String>,
    pub properties: BTreeMap<String, ParamValue>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowGraph {
    pub doc_id: String,
    pub n_steps: usize,
    /// `(producers, consumers)` per unit.
    pub units: Vec<(BTreeSet<usize>, BTreeSet<usize>)>,
}

/// Names and sentences the prior could not account for.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Uncovered {
    /// Verbs no prior operation matched.
    pub operations: Vec<String>,
    /// Sentences that yielded an operation but no machine or duration.
    pub incomplete: Vec<String>,
    /// Sentences that yielded nothing.
    pub empty: Vec<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CorpusObservations {
    pub doc_ids: Vec<String>,
    pub actions: Vec<ActionObs>,
    pub units: Vec<UnitObs>,
    pub machines: Vec<MachineDef>,
    pub uncovered: Uncovered,
}

fn corpus_text(corpus: &[ProcedureDoc]) -> String {
    let mut s = String::new();
    for d in corpus {
        for x in &d.sentences {
            s.push_str(x);
            s.push('\n');
        }
        for r in &d.rows {
            s.push_str(&r.name);
            s.push('\n');
            s.push_str(&r.description);
            s.push('\n');
        }
    }
    s.to_lowercase()
}

/// Operation of `a`: the prior entry with the best `max(exact, semantic)`
/// score at or above `tau`, ties broken by weight then name.
fn identify_op<'a>(a: &ExtractedAction, prior: &'a PriorKnowledge, tau: f64) -> Option<&'a str> {
    let mut best: Option<(f64, f64, &str)> = None;
    for e in &prior.op_taxonomy {
        let aliases: BTreeSet<String> = e.aliases.iter().cloned().collect();
        let (x, s) = op_scores(a, &e.name, &aliases);
        let c = x.max(s);
        if c < tau {
            continue;
        }
        let better = match best {
            None => true,
            Some((bc, bw, bn)) => {
                c > bc || (c == bc && (e.weight > bw || (e.weight == bw && e.name.as_str() < bn)))
            }
        };
        if better {
            best = Some((c, e.weight, &e.name));
        }
    }
    best.map(|b| b.2)
}

/// Extracts every document with a vocabulary drawn from the prior. Only
/// machine and flow names that occur in the corpus text enter the
/// vocabulary; observed machines are numbered in name order.
pub fn observe_corpus(
    corpus: &[ProcedureDoc],
    prior: &PriorKnowledge,
    tau_match: f64,
) -> CorpusObservations {
    let text = corpus_text(corpus);
    let mut machine_names: Vec<&str> = prior
        .machine_taxonomy
        .iter()
        .map(|e| e.name.as_str())
        .filter(|n| text.contains(&n.to_lowercase()))
        .collect();
    machine_names.sort();
    machine_names.dedup();
    let machines: Vec<MachineDef> = machine_names
        .iter()
        .enumerate()
        .map(|(i, n)| MachineDef {
            machine_id: machine_id(i),
            name: n.to_string(),
            solver_index: i,
        })
        .collect();

    let mut vocab = Vocabulary::default();
    for e in &prior.op_taxonomy {
        vocab.add_op(&e.name, e.aliases.iter().map(String::as_str));
    }
    for m in &machines {
        vocab.add_machine(&m.name, &m.machine_id);
    }
    for e in &prior.flow_taxonomy {
        for n in std::iter::once(&e.name).chain(&e.aliases) {
            if text.contains(&n.to_lowercase()) {
                vocab.add_flow(n, n);
            }
        }
    }
    let extractor = RuleExtractor::new(vocab);

    let mut obs = CorpusObservations {
        doc_ids: corpus.iter().map(|d| d.doc_id.clone()).collect(),
        machines,
        ..Default::default()
    };
    for (di, doc) in corpus.iter().enumerate() {
        let ex = extract_actions(doc, &extractor);
        obs.uncovered
            .empty
            .extend(ex.empty.into_iter().map(|e| e.sentence));
        // latest occurrence producing each name, and raw occurrences
        let mut produced: BTreeMap<String, usize> = BTreeMap::new();
        let mut raw: BTreeMap<String, usize> = BTreeMap::new();
        let mut step = 0;
        for a in &ex.actions {
            let Some(op) = identify_op(a, prior, tau_match) else {
                obs.uncovered.operations.push(a.verb_text.clone());
                continue;
            };
            let (Some(machine), Some(duration)) = (a.machine.clone(), a.duration) else {
                obs.uncovered.incomplete.push(a.sentence.clone());
                continue;
            };
            let mut params: Vec<(String, ParamValue, Option<String>)> = Vec::new();
            for p in &a.params {
                if !params.iter().any(|q| q.0 == p.name) {
                    params.push((p.name.clone(), p.value.clone().normalized(), p.unit.clone()));
                }
            }
            let mut inputs = Vec::new();
            for m in a.inputs() {
                let u = match produced.get(&m.flow_def).or_else(|| raw.get(&m.flow_def)) {
                    Some(&u) => u,
                    None => {
                        raw.insert(m.flow_def.clone(), obs.units.len());
                        obs.units.push(UnitObs {
                            doc: di,
                            name: m.flow_def.clone(),
                            producers: BTreeSet::new(),
                            consumers: BTreeSet::new(),
                            producer_ops: BTreeSet::new(),
                            consumer_ops: BTreeSet::new(),
                            properties: BTreeMap::new(),
                        });
                        obs.units.len() - 1
                    }
                };
                let unit = &mut obs.units[u];
                unit.consumers.insert(step);
                unit.consumer_ops.insert(op.to_string());
                for (k, v) in &m.properties {
                    unit.properties
                        .entry(k.clone())
                        .or_insert_with(|| v.clone().normalized());
                }
                inputs.push(u);
            }
            let mut outputs = Vec::new();
            for m in a.outputs() {
                let u = obs.units.len();
                obs.units.push(UnitObs {
                    doc: di,
                    name: m.flow_def.clone(),
                    producers: [step].into(),
                    consumers: BTreeSet::new(),
                    producer_ops: [op.to_string()].into(),
                    consumer_ops: BTreeSet::new(),
                    properties: m
                        .properties
                        .iter()
                        .map(|(k, v)| (k.clone(), v.clone().normalized()))
                        .collect(),
                });
                produced.insert(m.flow_def.clone(), u);
                outputs.push(u);
            }
            obs.actions.push(ActionObs {
                doc: di,
                step,
                op: op.to_string(),
                machine,
                duration,
                params,
                inputs,
                outputs,
            });
            step += 1;
        }
    }
    obs
}

impl CorpusObservations {
    /// Per-document flow graphs, in document order.
    pub fn flow_graphs(&self) -> Vec<FlowGraph> {
        let mut graphs: Vec<FlowGraph> = self
            .doc_ids
            .iter()
            .map(|id| FlowGraph {
                doc_id: id.clone(),
                n_steps: 0,
                units: Vec::new(),
            })
            .collect();
        for a in &self.actions {
            let g = &mut graphs[a.doc];
            g.n_steps = g.n_steps.max(a.step + 1);
        }
        for u in &self.units {
            graphs[u.doc]
                .units
                .push((u.producers.clone(), u.consumers.clone()));
        }
        graphs
    }
}
