//! Flow-unit semantics: names are split into phases by their property
//! profiles, then synonymous units with identical usage are merged.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::observe::CorpusObservations;
use super::prior::PriorKnowledge;
use super::{cluster, induce_param_spec, AdaptationConfig, Features, GibbsReport};
use crate::abstraction::text::{jaccard, stem_set};
use crate::dsl::{FlowUnitDef, ParamValue};
use crate::scalar::Scalar;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FlowSemantics {
    pub defs: BTreeMap<String, FlowUnitDef>,
    /// Definition of each unit occurrence, indexed like the observations.
    pub unit_def: Vec<String>,
}

#[derive(Clone, Debug)]
struct Draft {
    name: String,
    ident: String,
    members: Vec<usize>,
    producer_ops: BTreeSet<String>,
    consumer_ops: BTreeSet<String>,
    schema: BTreeSet<String>,
}

fn find(parent: &mut [usize], i: usize) -> usize {
    let mut r = i;
    while parent[r] != r {
        r = parent[r];
    }
    let mut i = i;
    while parent[i] != r {
        let next = parent[i];
        parent[i] = r;
        i = next;
    }
    r
}

/// Name similarity: 1 for names the prior files under one category,
/// otherwise the Jaccard index of their stemmed words.
fn similarity(a: &str, b: &str, prior: &PriorKnowledge) -> f64 {
    let cat = |n: &str| prior.flow_entry(n).and_then(|e| e.category.clone());
    if let (Some(x), Some(y)) = (cat(a), cat(b)) {
        if x == y {
            return 1.0;
        }
    }
    jaccard(&stem_set([a]), &stem_set([b]))
}

pub fn induce_flow_semantics<T: Scalar>(
    obs: &CorpusObservations,
    prior: &PriorKnowledge,
    cfg: &AdaptationConfig<T>,
) -> (FlowSemantics, Vec<GibbsReport<T>>) {
    let mut by_name: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, u) in obs.units.iter().enumerate() {
        by_name.entry(&u.name).or_default().push(i);
    }

    let mut reports = Vec::new();
    let mut drafts: Vec<Draft> = Vec::new();
    for (name, occ) in &by_name {
        let props: BTreeSet<&str> = occ
            .iter()
            .flat_map(|&i| obs.units[i].properties.keys())
            .map(String::as_str)
            .collect();
        let mut f = Features {
            n: occ.len(),
            num_scale: 1.0,
            ..Default::default()
        };
        f.cats.push(
            occ.iter()
                .map(|&i| {
                    Some(
                        obs.units[i]
                            .properties
                            .keys()
                            .cloned()
                            .collect::<Vec<_>>()
                            .join("|"),
                    )
                })
                .collect(),
        );
        for p in &props {
            let vals: Vec<Option<&ParamValue>> = occ
                .iter()
                .map(|&i| obs.units[i].properties.get(*p))
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
        let (z, report) = cluster(&format!("flow:{name}"), &f, cfg);
        reports.extend(report);
        let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (k, &i) in occ.iter().enumerate() {
            groups.entry(z[k]).or_default().push(i);
        }
        let mut parts: Vec<Vec<usize>> = groups.into_values().collect();
        parts.sort();
        let split = parts.len() > 1;
        let first = drafts.len();
        for members in parts {
            let u = |i: &usize| &obs.units[*i];
            let schema: BTreeSet<String> = members
                .iter()
                .flat_map(|i| u(i).properties.keys().cloned())
                .collect();
            let ident = if split {
                format!(
                    "{name} [{}]",
                    schema.iter().cloned().collect::<Vec<_>>().join(", ")
                )
            } else {
                name.to_string()
            };
            drafts.push(Draft {
                name: name.to_string(),
                ident,
                producer_ops: members
                    .iter()
                    .flat_map(|i| u(i).producer_ops.iter().cloned())
                    .collect(),
                consumer_ops: members
                    .iter()
                    .flat_map(|i| u(i).consumer_ops.iter().cloned())
                    .collect(),
                members,
                schema,
            });
        }
        // phases with equal fields are told apart by number
        let mut seen: BTreeMap<String, usize> = BTreeMap::new();
        for d in &mut drafts[first..] {
            *seen.entry(d.ident.clone()).or_default() += 1;
        }
        let mut k: BTreeMap<String, usize> = BTreeMap::new();
        for d in &mut drafts[first..] {
            if seen[&d.ident] > 1 {
                let n = k.entry(d.ident.clone()).or_default();
                *n += 1;
                d.ident = format!("{} #{n}", d.name);
            }
        }
    }

    let mut parent: Vec<usize> = (0..drafts.len()).collect();
    let tau = cfg.tau_alias.to_f64_lossy();
    for a in 0..drafts.len() {
        for b in a + 1..drafts.len() {
            let (x, y) = (&drafts[a], &drafts[b]);
            let same_use = x.producer_ops == y.producer_ops
                && x.consumer_ops == y.consumer_ops
                && x.schema == y.schema;
            if x.name != y.name && same_use && similarity(&x.name, &y.name, prior) >= tau {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                parent[ra.max(rb)] = ra.min(rb);
            }
        }
    }
    let mut merged: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..drafts.len() {
        let r = find(&mut parent, i);
        merged.entry(r).or_default().push(i);
    }

    let mut sem = FlowSemantics {
        defs: BTreeMap::new(),
        unit_def: vec![String::new(); obs.units.len()],
    };
    for group in merged.into_values() {
        let weight = |d: &Draft| prior.flow_entry(&d.name).map_or(0.0, |e| e.weight);
        let head = group
            .iter()
            .map(|&i| &drafts[i])
            .max_by(|a, b| {
                weight(a)
                    .total_cmp(&weight(b))
                    .then(a.members.len().cmp(&b.members.len()))
                    .then(b.ident.cmp(&a.ident))
            })
            .expect("non-empty group");
        let ident = head.ident.clone();
        let mut aliases: BTreeSet<String> =
            group.iter().map(|&i| drafts[i].ident.clone()).collect();
        aliases.remove(&ident);
        let members: Vec<usize> = group
            .iter()
            .flat_map(|&i| drafts[i].members.iter().copied())
            .collect();
        let mut values: BTreeMap<&str, Vec<ParamValue>> = BTreeMap::new();
        for &i in &members {
            for (k, v) in &obs.units[i].properties {
                values.entry(k).or_default().push(v.clone());
            }
        }
        let properties = values
            .into_iter()
            .map(|(k, vs)| {
                let s = cfg.spec_settings(&format!("flow:{ident}:{k}"));
                (k.to_string(), induce_param_spec(&vs, "", &s))
            })
            .collect();
        for &i in &members {
            sem.unit_def[i] = ident.clone();
        }
        sem.defs.insert(
            ident.clone(),
            FlowUnitDef {
                identifier: ident,
                properties,
                aliases,
            },
        );
    }
    // the surface name of a split unit resolves to its largest phase
    let mut split_heads: BTreeMap<&str, (&str, usize)> = BTreeMap::new();
    for d in drafts.iter().filter(|d| d.ident != d.name) {
        let def = sem.unit_def[d.members[0]].as_str();
        let size = d.members.len();
        let e = split_heads.entry(&d.name).or_insert((def, size));
        if size > e.1 || (size == e.1 && def < e.0) {
            *e = (def, size);
        }
    }
    let taken: BTreeSet<String> = sem
        .defs
        .values()
        .flat_map(|d| d.aliases.iter().cloned())
        .collect();
    let heads: Vec<(String, String)> = split_heads
        .into_iter()
        .map(|(n, (d, _))| (n.to_string(), d.to_string()))
        .collect();
    for (name, def) in heads {
        if !sem.defs.contains_key(&name) && !taken.contains(&name) {
            sem.defs
                .get_mut(&def)
                .expect("phase def")
                .aliases
                .insert(name);
        }
    }
    (sem, reports)
}
