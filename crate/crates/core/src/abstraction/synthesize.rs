//! Program synthesis: choose an interpretation per step and link flows.

use std::collections::{BTreeMap, BTreeSet};

use super::doc::ProcedureDoc;
use super::extract::{extract_actions, ExtractedAction, ExtractorAdapter, FlowMention, FlowRole};
use super::matcher::{match_operation, MatchCandidate, MatchConfig, MatchError};
use crate::dsl::{
    validate_program, DslDefinition, DualProgram, FlowRequirement, FlowUnitInstance,
    OperationInstance, ParamValue,
};
use crate::report::ValidationReport;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SynthesisError {
    #[error("sentence {sentence_index}: {source}")]
    NoCandidate {
        sentence_index: usize,
        #[source]
        source: MatchError,
    },
    #[error("sentence {sentence_index}: ambiguous flow linking: {detail}")]
    AmbiguousFlow {
        sentence_index: usize,
        detail: String,
    },
    #[error("synthesized program is invalid:\n{0}")]
    InvalidProgram(ValidationReport),
}

/// Compiles `doc` against `d`. Each action becomes one step; per step the
/// candidates tied at the best operation score are searched with a beam of
/// width `cfg.beam_width` over summed divergence, and the best-ranked
/// complete interpretation whose flows link and validate is returned.
pub fn synthesize_program(
    doc: &ProcedureDoc,
    d: &DslDefinition,
    adapter: &dyn ExtractorAdapter,
    cfg: &MatchConfig,
) -> Result<DualProgram, SynthesisError> {
    let extraction = extract_actions(doc, adapter);
    let actions = extraction.actions;
    let mut per_step: Vec<Vec<MatchCandidate>> = Vec::with_capacity(actions.len());
    for a in &actions {
        let cands = match_operation(a, d, cfg).map_err(|source| SynthesisError::NoCandidate {
            sentence_index: a.sentence_index,
            source,
        })?;
        let top = cands[0].combined();
        per_step.push(
            cands
                .into_iter()
                .take_while(|c| c.combined() == top)
                .collect(),
        );
    }

    let w = cfg.weights;
    let mut beam: Vec<(f64, Vec<usize>)> = vec![(0.0, Vec::new())];
    for cands in &per_step {
        let mut next: Vec<(f64, Vec<usize>)> = Vec::with_capacity(beam.len() * cands.len());
        for (cost, picks) in &beam {
            for (k, c) in cands.iter().enumerate() {
                let mut p = picks.clone();
                p.push(k);
                next.push((cost + c.divergence(&w), p));
            }
        }
        next.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
        next.truncate(cfg.beam_width.max(1));
        beam = next;
    }

    let mut first_err = None;
    for (_, picks) in &beam {
        let chosen: Vec<&MatchCandidate> = picks
            .iter()
            .enumerate()
            .map(|(i, &k)| &per_step[i][k])
            .collect();
        match assemble(&doc.doc_id, &actions, &chosen, d) {
            Ok(p) => {
                let report = validate_program(&p, d);
                if report.is_empty() {
                    return Ok(p);
                }
                first_err.get_or_insert(SynthesisError::InvalidProgram(report));
            }
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    Err(first_err.expect("beam is never empty"))
}

/// Defs filling each slot, with the mention (if any) that named it.
fn resolve_slots<'a>(
    slots: &[FlowRequirement],
    mentions: &[&'a FlowMention],
    sentence_index: usize,
) -> Result<Vec<(String, Option<&'a FlowMention>)>, SynthesisError> {
    let mut used = vec![false; mentions.len()];
    let mut out: Vec<Option<(String, Option<&FlowMention>)>> = vec![None; slots.len()];
    let take = |def: &str, used: &mut Vec<bool>| {
        let k = (0..mentions.len()).find(|&k| !used[k] && mentions[k].flow_def == def)?;
        used[k] = true;
        Some(mentions[k])
    };
    for (s, slot) in slots.iter().enumerate() {
        if slot.accepts.len() == 1 {
            let def = slot.accepts.iter().next().unwrap().clone();
            let m = take(&def, &mut used);
            out[s] = Some((def, m));
        }
    }
    for (s, slot) in slots.iter().enumerate() {
        if out[s].is_some() {
            continue;
        }
        let hits: BTreeSet<&str> = (0..mentions.len())
            .filter(|&k| !used[k] && slot.accepts(&mentions[k].flow_def))
            .map(|k| mentions[k].flow_def.as_str())
            .collect();
        let Some(&def) = hits.iter().next() else {
            return Err(SynthesisError::AmbiguousFlow {
                sentence_index,
                detail: format!("no mention selects among {:?}", slot.accepts),
            });
        };
        let def = def.to_string();
        let m = take(&def, &mut used);
        out[s] = Some((def, m));
    }
    Ok(out.into_iter().map(Option::unwrap).collect())
}

fn assemble(
    job_id: &str,
    actions: &[ExtractedAction],
    chosen: &[&MatchCandidate],
    d: &DslDefinition,
) -> Result<DualProgram, SynthesisError> {
    let mut steps = Vec::with_capacity(chosen.len());
    let mut units: Vec<FlowUnitInstance> = Vec::new();
    // produced[def] = [(step, unit index)]
    let mut produced: BTreeMap<String, Vec<(usize, usize)>> = BTreeMap::new();
    let mut raw: BTreeMap<String, usize> = BTreeMap::new();

    for (i, (a, c)) in actions.iter().zip(chosen).enumerate() {
        let iface = d
            .interface(&c.op_id, c.interface_index)
            .expect("candidate refers to dsl");
        let ctx = &iface.exec_contexts[c.context_index];
        let mut bound = BTreeMap::new();
        for p in &a.params {
            if let Some(spec) = ctx.params.get(&p.name) {
                if spec.contains(&p.value) && !bound.contains_key(&p.name) {
                    bound.insert(p.name.clone(), p.value.clone());
                }
            }
        }
        steps.push(OperationInstance {
            step_index: i,
            op_id: c.op_id.clone(),
            interface_index: c.interface_index,
            context_index: c.context_index,
            bound_params: bound,
        });

        let ins: Vec<&FlowMention> = a
            .flows
            .iter()
            .filter(|f| f.role == FlowRole::Input)
            .collect();
        let outs: Vec<&FlowMention> = a
            .flows
            .iter()
            .filter(|f| f.role == FlowRole::Output)
            .collect();
        for (def, mention) in resolve_slots(&iface.preconditions, &ins, a.sentence_index)? {
            let props = mention.map(|m| m.properties.clone()).unwrap_or_default();
            let source = produced.get(&def).and_then(|v| {
                let last = v.last()?.0;
                let at_last: Vec<_> = v.iter().filter(|(s, _)| *s == last).collect();
                Some((at_last.len(), at_last[0].1))
            });
            match source {
                Some((1, u)) => {
                    units[u].consumers.insert(i);
                }
                Some(_) => {
                    return Err(SynthesisError::AmbiguousFlow {
                        sentence_index: a.sentence_index,
                        detail: format!("several units of {def} produced by the same step"),
                    })
                }
                None => {
                    if let Some(&u) = raw.get(&def) {
                        units[u].consumers.insert(i);
                        units[u].prop_values.extend(props);
                    } else {
                        raw.insert(def.clone(), units.len());
                        units.push(FlowUnitInstance {
                            unit_id: String::new(),
                            flow_def: def,
                            producers: BTreeSet::new(),
                            consumers: [i].into(),
                            raw_material: true,
                            final_product: false,
                            prop_values: props,
                        });
                    }
                }
            }
        }
        for (def, mention) in resolve_slots(&iface.postconditions, &outs, a.sentence_index)? {
            produced
                .entry(def.clone())
                .or_default()
                .push((i, units.len()));
            units.push(FlowUnitInstance {
                unit_id: String::new(),
                flow_def: def,
                producers: [i].into(),
                consumers: BTreeSet::new(),
                raw_material: false,
                final_product: false,
                prop_values: mention.map(|m| m.properties.clone()).unwrap_or_default(),
            });
        }
    }
    for u in &mut units {
        u.final_product = u.consumers.is_empty();
        let normalized: BTreeMap<String, ParamValue> = std::mem::take(&mut u.prop_values)
            .into_iter()
            .map(|(k, v)| (k, v.normalized()))
            .collect();
        u.prop_values = normalized;
    }
    let mut p = DualProgram {
        job_id: job_id.to_string(),
        steps,
        flow_units: units,
    };
    p.canonicalize_units();
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::abstraction::doc::ProcedureDoc;
    use crate::abstraction::extract::RuleExtractor;
    use crate::dsl::*;

    fn dsl() -> DslDefinition {
        let mut d = DslDefinition::default();
        d.machine_catalog.push(MachineDef {
            machine_id: "M00".into(),
            name: "Foundry".into(),
            solver_index: 0,
        });
        for f in ["alloy", "ingot", "plate"] {
            d.flow_unit_defs.insert(
                f.into(),
                FlowUnitDef {
                    identifier: f.into(),
                    properties: Default::default(),
                    aliases: Default::default(),
                },
            );
        }
        for (op, pre, post) in [("Casting", "alloy", "ingot"), ("Milling", "ingot", "plate")] {
            d.operation_defs.insert(
                op.into(),
                OperationDef {
                    identifier: op.into(),
                    aliases: Default::default(),
                    interfaces: vec![Interface {
                        preconditions: vec![FlowRequirement::single(pre)],
                        postconditions: vec![FlowRequirement::single(post)],
                        exec_contexts: vec![ExecContext {
                            machine: "M00".into(),
                            duration: 10,
                            params: Default::default(),
                        }],
                    }],
                },
            );
        }
        d
    }

    #[test]
    fn two_sentence_chain() {
        let d = dsl();
        let doc = ProcedureDoc::from_text("J1", "Cast ingot from alloy. Mill ingot into plate.");
        let p = synthesize_program(
            &doc,
            &d,
            &RuleExtractor::from_dsl(&d),
            &MatchConfig::default(),
        )
        .unwrap();
        assert_eq!(p.steps.len(), 2);
        let ingot = p.flow_units.iter().find(|u| u.flow_def == "ingot").unwrap();
        assert_eq!(ingot.producers, [0].into());
        assert_eq!(ingot.consumers, [1].into());
        assert!(
            p.flow_units
                .iter()
                .find(|u| u.flow_def == "alloy")
                .unwrap()
                .raw_material
        );
        assert!(
            p.flow_units
                .iter()
                .find(|u| u.flow_def == "plate")
                .unwrap()
                .final_product
        );
    }

    #[test]
    fn empty_table_gives_empty_program() {
        let d = dsl();
        let doc = ProcedureDoc::semi_structured("J1", vec![]);
        let p = synthesize_program(
            &doc,
            &d,
            &RuleExtractor::from_dsl(&d),
            &MatchConfig::default(),
        )
        .unwrap();
        assert!(p.steps.is_empty() && p.flow_units.is_empty());
    }

    #[test]
    fn unknown_verb_reports_sentence() {
        let d = dsl();
        let doc = ProcedureDoc::from_text("J1", "Cast ingot from alloy. Anneal the ingot.");
        let err = synthesize_program(
            &doc,
            &d,
            &RuleExtractor::from_dsl(&d),
            &MatchConfig::default(),
        )
        .unwrap_err();
        assert!(matches!(
            err,
            SynthesisError::NoCandidate {
                sentence_index: 1,
                ..
            }
        ));
    }

    #[test]
    fn multi_def_slot_without_mention_is_ambiguous() {
        let mut d = dsl();
        let op = d.operation_defs.get_mut("Milling").unwrap();
        op.interfaces[0].preconditions = vec![FlowRequirement {
            accepts: ["ingot".to_string(), "alloy".to_string()].into(),
        }];
        let doc = ProcedureDoc::from_text("J1", "Mill into plate.");
        let err = synthesize_program(
            &doc,
            &d,
            &RuleExtractor::from_dsl(&d),
            &MatchConfig::default(),
        )
        .unwrap_err();
        assert!(matches!(err, SynthesisError::AmbiguousFlow { .. }));
    }
}
