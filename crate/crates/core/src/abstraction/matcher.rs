//! Scoring of operation interpretations for one extracted action.

use std::cmp::Ordering;
use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::extract::{ExtractedAction, FlowMention, FlowRole, PseudoLabel};
use super::text::{self, jaccard, stem_phrase};
use crate::dsl::{DslDefinition, ExecContext, FlowRequirement, Interface};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchConfig {
    pub tau_match: f64,
    /// Weights of span distance, structure mismatch and label mismatch.
    pub weights: [f64; 3],
    pub beam_width: usize,
}

impl Default for MatchConfig {
    fn default() -> Self {
        MatchConfig {
            tau_match: 0.6,
            weights: [1.0 / 3.0; 3],
            beam_width: 4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchCandidate {
    pub op_id: String,
    pub interface_index: usize,
    pub context_index: usize,
    pub exact_score: f64,
    pub semantic_score: f64,
    pub span_distance: f64,
    pub structure_score: f64,
    pub label_coverage: f64,
}

impl MatchCandidate {
    pub fn combined(&self) -> f64 {
        self.exact_score.max(self.semantic_score)
    }

    pub fn divergence(&self, w: &[f64; 3]) -> f64 {
        w[0] * self.span_distance
            + w[1] * (1.0 - self.structure_score)
            + w[2] * (1.0 - self.label_coverage)
    }

    /// Ranking: combined score descending, divergence ascending, then
    /// `(op_id, interface, context)` ascending.
    pub fn rank_cmp(&self, other: &Self, w: &[f64; 3]) -> Ordering {
        other
            .combined()
            .total_cmp(&self.combined())
            .then(self.divergence(w).total_cmp(&other.divergence(w)))
            .then_with(|| self.op_id.cmp(&other.op_id))
            .then(self.interface_index.cmp(&other.interface_index))
            .then(self.context_index.cmp(&other.context_index))
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MatchError {
    #[error("no operation matches \"{verb}\" (best combined score {best:.3} below threshold)")]
    NoCandidate { verb: String, best: f64 },
}

/// `(exact, semantic)` scores of an action against one operation.
pub fn op_scores(action: &ExtractedAction, op_id: &str, aliases: &BTreeSet<String>) -> (f64, f64) {
    let verb = stem_phrase(&action.verb_text);
    let exact = std::iter::once(op_id)
        .chain(aliases.iter().map(String::as_str))
        .any(|name| stem_phrase(name) == verb);
    let lhs = text::stem_set(
        std::iter::once(action.verb_text.as_str())
            .chain(action.object_texts.iter().map(String::as_str)),
    );
    let rhs = text::stem_set(std::iter::once(op_id).chain(aliases.iter().map(String::as_str)));
    (if exact { 1.0 } else { 0.0 }, jaccard(&lhs, &rhs))
}

/// Size of a maximum matching between mentions and slots accepting them.
pub(crate) fn max_matching(mentions: &[&FlowMention], slots: &[FlowRequirement]) -> usize {
    let mut owner: Vec<Option<usize>> = vec![None; slots.len()];
    let mut size = 0;
    for m in 0..mentions.len() {
        let mut seen = vec![false; slots.len()];
        if augment(m, mentions, slots, &mut owner, &mut seen) {
            size += 1;
        }
    }
    size
}

fn augment(
    m: usize,
    mentions: &[&FlowMention],
    slots: &[FlowRequirement],
    owner: &mut [Option<usize>],
    seen: &mut [bool],
) -> bool {
    for s in 0..slots.len() {
        if seen[s] || !slots[s].accepts(&mentions[m].flow_def) {
            continue;
        }
        seen[s] = true;
        if owner[s].is_none() || augment(owner[s].unwrap(), mentions, slots, owner, seen) {
            owner[s] = Some(m);
            return true;
        }
    }
    false
}

struct Fit {
    structure: f64,
    coverage: f64,
    span_distance: f64,
}

fn token_count(s: &str) -> usize {
    text::words(s).len()
}

fn fit(action: &ExtractedAction, iface: &Interface, ctx: &ExecContext) -> Fit {
    let inputs: Vec<&FlowMention> = action
        .flows
        .iter()
        .filter(|f| f.role == FlowRole::Input)
        .collect();
    let outputs: Vec<&FlowMention> = action
        .flows
        .iter()
        .filter(|f| f.role == FlowRole::Output)
        .collect();
    let matched =
        max_matching(&inputs, &iface.preconditions) + max_matching(&outputs, &iface.postconditions);
    let slots = iface.preconditions.len() + iface.postconditions.len();
    let denom = slots.max(action.flows.len());
    let structure = if denom == 0 {
        1.0
    } else {
        matched as f64 / denom as f64
    };

    let mut total = 0usize;
    let mut consistent = 0usize;
    let mut informative = token_count(&action.verb_text).max(1);
    let mut covered = informative;
    if let Some(m) = &action.machine {
        total += 1;
        let ok = m == &ctx.machine;
        consistent += usize::from(ok);
        let n: usize = action
            .entity_spans
            .iter()
            .filter(|e| e.label == PseudoLabel::Machine)
            .take(1)
            .map(|e| token_count(&e.text))
            .sum();
        informative += n;
        covered += if ok { n } else { 0 };
    }
    if let Some(dur) = action.duration {
        total += 1;
        let ok = dur == ctx.duration;
        consistent += usize::from(ok);
        informative += 2;
        covered += if ok { 2 } else { 0 };
    }
    for p in &action.params {
        total += 1;
        let ok = ctx
            .params
            .get(&p.name)
            .is_some_and(|spec| spec.contains(&p.value));
        consistent += usize::from(ok);
        let n = token_count(&action.sentence[p.start..p.end]);
        informative += n;
        covered += if ok { n } else { 0 };
    }
    let coverage = if total == 0 {
        1.0
    } else {
        consistent as f64 / total as f64
    };

    for f in &action.flows {
        let n = token_count(&f.text);
        informative += n;
        let slots = match f.role {
            FlowRole::Input => &iface.preconditions,
            FlowRole::Output => &iface.postconditions,
        };
        if slots.iter().any(|s| s.accepts(&f.flow_def)) {
            covered += n;
        }
    }
    Fit {
        structure,
        coverage,
        span_distance: 1.0 - covered as f64 / informative as f64,
    }
}

/// All `(op, interface, context)` interpretations whose operation clears
/// `tau_match`, best first.
pub fn match_operation(
    action: &ExtractedAction,
    d: &DslDefinition,
    cfg: &MatchConfig,
) -> Result<Vec<MatchCandidate>, MatchError> {
    let mut out = Vec::new();
    let mut best = 0.0f64;
    for op in d.operation_defs.values() {
        let (exact, semantic) = op_scores(action, &op.identifier, &op.aliases);
        best = best.max(exact.max(semantic));
        if exact.max(semantic) < cfg.tau_match {
            continue;
        }
        for (i, iface) in op.interfaces.iter().enumerate() {
            for (c, ctx) in iface.exec_contexts.iter().enumerate() {
                let f = fit(action, iface, ctx);
                out.push(MatchCandidate {
                    op_id: op.identifier.clone(),
                    interface_index: i,
                    context_index: c,
                    exact_score: exact,
                    semantic_score: semantic,
                    span_distance: f.span_distance,
                    structure_score: f.structure,
                    label_coverage: f.coverage,
                });
            }
        }
    }
    if out.is_empty() {
        return Err(MatchError::NoCandidate {
            verb: action.verb_text.clone(),
            best,
        });
    }
    out.sort_by(|a, b| a.rank_cmp(b, &cfg.weights));
    Ok(out)
}
