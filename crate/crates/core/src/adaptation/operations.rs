//! Operation semantics: per operation, actions are clustered into
//! interfaces by flow signature, machine and parameter profile.

use std::collections::{BTreeMap, BTreeSet};

use super::flows::FlowSemantics;
use super::observe::{ActionObs, CorpusObservations};
use super::prior::PriorKnowledge;
use super::{cluster, induce_param_spec, AdaptationConfig, Features, GibbsReport, InterfaceCounts};
use crate::dsl::{ExecContext, FlowRequirement, Interface, OperationDef, ParamSpec, ParamValue};
use crate::scalar::Scalar;

fn sorted_defs(units: &[usize], flows: &FlowSemantics) -> Vec<String> {
    let mut v: Vec<String> = units.iter().map(|&u| flows.unit_def[u].clone()).collect();
    v.sort();
    v
}

fn slots(lists: &[Vec<String>]) -> Vec<FlowRequirement> {
    let width = lists.first().map_or(0, Vec::len);
    (0..width)
        .map(|j| FlowRequirement {
            accepts: lists.iter().map(|l| l[j].clone()).collect(),
        })
        .collect()
}

/// Most frequent unit of a field, ties to the lexicographically first.
fn field_unit(members: &[&ActionObs], field: &str) -> String {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for a in members {
        for (n, _, u) in &a.params {
            if n == field {
                *counts.entry(u.as_deref().unwrap_or("")).or_default() += 1;
            }
        }
    }
    let best = counts.iter().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)));
    best.map_or(String::new(), |(u, _)| u.to_string())
}

fn draft_interface<T: Scalar>(
    label: &str,
    members: &[&ActionObs],
    flows: &FlowSemantics,
    cfg: &AdaptationConfig<T>,
) -> Interface {
    let pre: Vec<Vec<String>> = members
        .iter()
        .map(|a| sorted_defs(&a.inputs, flows))
        .collect();
    let post: Vec<Vec<String>> = members
        .iter()
        .map(|a| sorted_defs(&a.outputs, flows))
        .collect();
    let mut values: BTreeMap<&str, Vec<ParamValue>> = BTreeMap::new();
    for a in members {
        for (n, v, _) in &a.params {
            values.entry(n).or_default().push(v.clone());
        }
    }
    let params: BTreeMap<String, ParamSpec> = values
        .into_iter()
        .map(|(n, vs)| {
            let s = cfg.spec_settings(&format!("{label}:{n}"));
            (
                n.to_string(),
                induce_param_spec(&vs, &field_unit(members, n), &s),
            )
        })
        .collect();
    let keys: BTreeSet<(&str, u32)> = members
        .iter()
        .map(|a| (a.machine.as_str(), a.duration))
        .collect();
    Interface {
        preconditions: slots(&pre),
        postconditions: slots(&post),
        exec_contexts: keys
            .into_iter()
            .map(|(m, d)| ExecContext {
                machine: m.to_string(),
                duration: d,
                params: params.clone(),
            })
            .collect(),
    }
}

fn param_fields(i: &Interface) -> BTreeSet<&str> {
    i.exec_contexts
        .iter()
        .flat_map(|c| c.params.keys())
        .map(String::as_str)
        .collect()
}

fn merge(a: &Interface, b: &Interface) -> Interface {
    let zip = |x: &[FlowRequirement], y: &[FlowRequirement]| -> Vec<FlowRequirement> {
        x.iter()
            .zip(y)
            .map(|(p, q)| FlowRequirement {
                accepts: p.accepts.union(&q.accepts).cloned().collect(),
            })
            .collect()
    };
    let mut ctx: BTreeMap<(String, u32), BTreeMap<String, ParamSpec>> = BTreeMap::new();
    for c in a.exec_contexts.iter().chain(&b.exec_contexts) {
        let slot = ctx.entry((c.machine.clone(), c.duration)).or_default();
        for (n, s) in &c.params {
            let merged = match slot.get(n) {
                Some(prev) => prev.union(s),
                None => s.clone(),
            };
            slot.insert(n.clone(), merged);
        }
    }
    Interface {
        preconditions: zip(&a.preconditions, &b.preconditions),
        postconditions: zip(&a.postconditions, &b.postconditions),
        exec_contexts: ctx
            .into_iter()
            .map(|((machine, duration), params)| ExecContext {
                machine,
                duration,
                params,
            })
            .collect(),
    }
}

fn canonical_key(i: &Interface) -> String {
    serde_json::to_string(i).expect("interface serializes")
}

/// Merges interfaces with the same slot counts and parameter fields.
/// Slots are unioned position by position and contexts on the same
/// machine and duration have their domains unioned. Each group is folded
/// in canonical order, so the result does not depend on input order, and
/// unifying a unified list changes nothing.
pub fn unify_interfaces(interfaces: &[Interface]) -> Vec<Interface> {
    let mut groups: BTreeMap<(usize, usize, BTreeSet<&str>), Vec<&Interface>> = BTreeMap::new();
    for i in interfaces {
        groups
            .entry((
                i.preconditions.len(),
                i.postconditions.len(),
                param_fields(i),
            ))
            .or_default()
            .push(i);
    }
    let mut out: Vec<Interface> = groups
        .into_values()
        .map(|mut g| {
            g.sort_by_cached_key(|i| canonical_key(i));
            let first = merge(g[0], g[0]);
            g[1..].iter().fold(first, |acc, i| merge(&acc, i))
        })
        .collect();
    out.sort_by_cached_key(canonical_key);
    out
}

/// Prior spread of numeric parameters in the interface mixture, as a
/// fraction of each field's range across the whole operation.
const PRIOR_SPREAD: f64 = 0.25;

/// Induces one definition per observed operation.
pub fn induce_operation_semantics<T: Scalar>(
    obs: &CorpusObservations,
    flows: &FlowSemantics,
    prior: &PriorKnowledge,
    cfg: &AdaptationConfig<T>,
) -> (
    BTreeMap<String, OperationDef>,
    Vec<GibbsReport<T>>,
    InterfaceCounts,
) {
    let mut by_op: BTreeMap<&str, Vec<&ActionObs>> = BTreeMap::new();
    for a in &obs.actions {
        by_op.entry(&a.op).or_default().push(a);
    }
    let mut defs = BTreeMap::new();
    let mut reports = Vec::new();
    let mut counts = InterfaceCounts {
        induced: 0,
        unified: 0,
    };
    for (op, acts) in by_op {
        let fields: BTreeSet<&str> = acts
            .iter()
            .flat_map(|a| a.params.iter().map(|p| p.0.as_str()))
            .collect();
        let mut f = Features {
            n: acts.len(),
            num_scale: PRIOR_SPREAD,
            ..Default::default()
        };
        let key = |v: Vec<String>| Some(v.join("|"));
        f.cats.push(
            acts.iter()
                .map(|a| key(sorted_defs(&a.inputs, flows)))
                .collect(),
        );
        f.cats.push(
            acts.iter()
                .map(|a| key(sorted_defs(&a.outputs, flows)))
                .collect(),
        );
        f.cats
            .push(acts.iter().map(|a| Some(a.machine.clone())).collect());
        f.cats.push(
            acts.iter()
                .map(|a| key(a.schema().into_iter().map(str::to_string).collect()))
                .collect(),
        );
        for field in &fields {
            let vals: Vec<Option<&ParamValue>> = acts
                .iter()
                .map(|a| a.params.iter().find(|p| p.0 == *field).map(|p| &p.1))
                .collect();
            if vals.iter().flatten().all(|v| v.as_f64().is_some()) {
                f.nums.push(
                    vals.iter()
                        .map(|v| v.and_then(ParamValue::as_f64))
                        .collect(),
                );
            } else {
                f.cats
                    .push(vals.iter().map(|v| v.map(|v| v.to_string())).collect());
            }
        }
        let (z, report) = cluster(&format!("op:{op}"), &f, cfg);
        reports.extend(report);

        // clusters split further so every interface has one signature
        let mut parts: BTreeMap<(usize, usize, usize, Vec<&str>), Vec<&ActionObs>> =
            BTreeMap::new();
        for (k, a) in acts.iter().enumerate() {
            let sig = (
                z[k],
                a.inputs.len(),
                a.outputs.len(),
                a.schema().into_iter().collect(),
            );
            parts.entry(sig).or_default().push(a);
        }
        let induced: Vec<Interface> = parts
            .values()
            .enumerate()
            .map(|(k, members)| draft_interface(&format!("op:{op}:{k}"), members, flows, cfg))
            .collect();
        let interfaces = unify_interfaces(&induced);
        counts.induced += induced.len();
        counts.unified += interfaces.len();
        let aliases = prior
            .op_taxonomy
            .iter()
            .find(|e| e.name == op)
            .map(|e| e.aliases.iter().cloned().collect())
            .unwrap_or_default();
        defs.insert(
            op.to_string(),
            OperationDef {
                identifier: op.to_string(),
                aliases,
                interfaces,
            },
        );
    }
    (defs, reports, counts)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iface(pre: &[&[&str]], machine: &str, spec: ParamSpec) -> Interface {
        Interface {
            preconditions: pre
                .iter()
                .map(|s| FlowRequirement {
                    accepts: s.iter().map(|x| x.to_string()).collect(),
                })
                .collect(),
            postconditions: vec![FlowRequirement::single("out")],
            exec_contexts: vec![ExecContext {
                machine: machine.into(),
                duration: 10,
                params: [("speed".to_string(), spec)].into(),
            }],
        }
    }

    fn d(xs: &[i64]) -> ParamSpec {
        ParamSpec::discrete(xs.iter().map(|&x| ParamValue::Int(x)), "rpm")
    }

    #[test]
    fn same_signature_merges() {
        let a = iface(&[&["plate"]], "M00", d(&[100]));
        let b = iface(&[&["sheet"]], "M00", d(&[200]));
        let u = unify_interfaces(&[a, b]);
        assert_eq!(u.len(), 1);
        assert_eq!(u[0].preconditions[0].accepts.len(), 2);
        assert_eq!(u[0].exec_contexts.len(), 1);
        assert_eq!(u[0].exec_contexts[0].params["speed"], d(&[100, 200]));
    }

    #[test]
    fn different_arity_stays_apart() {
        let a = iface(&[&["plate"]], "M00", d(&[100]));
        let b = iface(&[&["plate"], &["bolt"]], "M00", d(&[100]));
        assert_eq!(unify_interfaces(&[a, b]).len(), 2);
    }

    #[test]
    fn contexts_on_other_machines_are_kept() {
        let a = iface(&[&["plate"]], "M00", d(&[100]));
        let b = iface(&[&["plate"]], "M01", d(&[100]));
        let u = unify_interfaces(&[a, b]);
        assert_eq!(u.len(), 1);
        let machines: Vec<&str> = u[0]
            .exec_contexts
            .iter()
            .map(|c| c.machine.as_str())
            .collect();
        assert_eq!(machines, vec!["M00", "M01"]);
    }

    #[test]
    fn unify_is_idempotent_and_order_free() {
        let xs = vec![
            iface(&[&["plate"]], "M00", d(&[100])),
            iface(&[&["sheet"]], "M01", d(&[150])),
            iface(
                &[&["plate"], &["bolt"]],
                "M00",
                ParamSpec::continuous(1.0, 2.0, "rpm"),
            ),
            iface(&[&["bar"]], "M00", d(&[300])),
        ];
        let u = unify_interfaces(&xs);
        assert_eq!(unify_interfaces(&u), u);
        let mut rev = xs.clone();
        rev.reverse();
        assert_eq!(unify_interfaces(&rev), u);
    }
}
