use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::synth::Vocab;

/// One weighted vocabulary entry. Entries sharing a `category` are
/// synonyms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaxonEntry {
    pub name: String,
    pub weight: f64,
    #[serde(default)]
    pub aliases: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<String>,
}

impl TaxonEntry {
    pub fn new(name: impl Into<String>) -> Self {
        TaxonEntry {
            name: name.into(),
            weight: 1.0,
            aliases: Vec::new(),
            category: None,
        }
    }
}

/// Scenario-independent knowledge of operations, product flows and
/// machine types.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PriorKnowledge {
    pub op_taxonomy: Vec<TaxonEntry>,
    pub flow_taxonomy: Vec<TaxonEntry>,
    #[serde(default)]
    pub machine_taxonomy: Vec<TaxonEntry>,
}

/// Stage suffixes the flow taxonomy spells out.
const MAX_STAGE: usize = 16;

impl PriorKnowledge {
    /// Weights must be finite and non-negative.
    pub fn problems(&self) -> Vec<String> {
        let all = self
            .op_taxonomy
            .iter()
            .chain(&self.flow_taxonomy)
            .chain(&self.machine_taxonomy);
        all.filter(|e| !(e.weight >= 0.0 && e.weight.is_finite()))
            .map(|e| {
                format!(
                    "{}: weight {} must be finite and non-negative",
                    e.name, e.weight
                )
            })
            .collect()
    }

    /// The general shop vocabulary: every operation and machine type of the
    /// bundled banks, and flow names composed from products ("X blank",
    /// "milled X", "milled X stage 3").
    pub fn bundled() -> Self {
        let v = Vocab::bundled();
        let op_taxonomy = v
            .operations
            .iter()
            .map(|o| TaxonEntry {
                aliases: o.aliases.clone(),
                ..TaxonEntry::new(&o.identifier)
            })
            .collect();
        let machine_taxonomy = v
            .operations
            .iter()
            .map(|o| TaxonEntry::new(&o.device))
            .collect();
        let participles: BTreeSet<&str> =
            v.operations.iter().map(|o| o.participle.as_str()).collect();
        let mut flow_taxonomy = Vec::new();
        for p in &v.products {
            flow_taxonomy.push(TaxonEntry::new(format!("{p} blank")));
            for part in &participles {
                flow_taxonomy.push(TaxonEntry::new(format!("{part} {p}")));
                for k in 2..=MAX_STAGE {
                    flow_taxonomy.push(TaxonEntry {
                        weight: 0.5,
                        ..TaxonEntry::new(format!("{part} {p} stage {k}"))
                    });
                }
            }
        }
        PriorKnowledge {
            op_taxonomy,
            flow_taxonomy,
            machine_taxonomy,
        }
    }

    pub fn flow_entry(&self, name: &str) -> Option<&TaxonEntry> {
        self.flow_taxonomy.iter().find(|e| e.name == name)
    }
}
