//! Dual-view DSL data model: the scenario language (`DslDefinition`) and
//! compiled procedures (`DualProgram`).

mod param;
mod validate;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::canonical::{self, CanonicalError};

pub use param::{Interval, ParamKind, ParamSpec, ParamValue};
pub use validate::{validate_dsl, validate_program};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DslDefinition {
    #[serde(default)]
    pub operation_defs: BTreeMap<String, OperationDef>,
    #[serde(default)]
    pub flow_unit_defs: BTreeMap<String, FlowUnitDef>,
    #[serde(default)]
    pub flow_grammar: FlowGrammar,
    #[serde(default)]
    pub machine_catalog: Vec<MachineDef>,
}

impl Default for DslDefinition {
    fn default() -> Self {
        DslDefinition {
            operation_defs: BTreeMap::new(),
            flow_unit_defs: BTreeMap::new(),
            flow_grammar: FlowGrammar::base(),
            machine_catalog: Vec::new(),
        }
    }
}

impl DslDefinition {
    pub fn machine(&self, machine_id: &str) -> Option<&MachineDef> {
        self.machine_catalog
            .iter()
            .find(|m| m.machine_id == machine_id)
    }

    pub fn machine_by_index(&self, solver_index: usize) -> Option<&MachineDef> {
        self.machine_catalog
            .iter()
            .find(|m| m.solver_index == solver_index)
    }

    pub fn context(&self, op_id: &str, interface: usize, context: usize) -> Option<&ExecContext> {
        self.interface(op_id, interface)?.exec_contexts.get(context)
    }

    pub fn interface(&self, op_id: &str, interface: usize) -> Option<&Interface> {
        self.operation_defs.get(op_id)?.interfaces.get(interface)
    }

    /// Identifier of the flow unit def whose identifier or alias equals `name`.
    pub fn resolve_flow(&self, name: &str) -> Option<&str> {
        if let Some(d) = self.flow_unit_defs.get(name) {
            return Some(&d.identifier);
        }
        self.flow_unit_defs
            .values()
            .find(|d| d.aliases.contains(name))
            .map(|d| d.identifier.as_str())
    }

    pub fn to_canonical(&self) -> Result<String, CanonicalError> {
        canonical::to_versioned_string(self)
    }

    pub fn from_canonical(text: &str) -> Result<Self, CanonicalError> {
        canonical::from_versioned_str(text)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperationDef {
    pub identifier: String,
    #[serde(default)]
    pub aliases: BTreeSet<String>,
    pub interfaces: Vec<Interface>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interface {
    pub preconditions: Vec<FlowRequirement>,
    pub postconditions: Vec<FlowRequirement>,
    pub exec_contexts: Vec<ExecContext>,
}

/// One pre- or postcondition slot, satisfied by a unit of any listed def.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FlowRequirement {
    pub accepts: BTreeSet<String>,
}

impl FlowRequirement {
    pub fn single(def: impl Into<String>) -> Self {
        FlowRequirement {
            accepts: [def.into()].into(),
        }
    }

    pub fn accepts(&self, def: &str) -> bool {
        self.accepts.contains(def)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExecContext {
    pub machine: String,
    pub duration: u32,
    #[serde(default)]
    pub params: BTreeMap<String, ParamSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowUnitDef {
    pub identifier: String,
    #[serde(default)]
    pub properties: BTreeMap<String, ParamSpec>,
    #[serde(default)]
    pub aliases: BTreeSet<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum NonTerminal {
    PredS,
    SuccS,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Symbol {
    Pred,
    Succ,
    Prop,
    PredS,
    SuccS,
}

/// `lhs -> rhs`; an empty `rhs` is the empty production.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Production {
    pub lhs: NonTerminal,
    pub rhs: Vec<Symbol>,
}

impl Production {
    fn new(lhs: NonTerminal, rhs: &[Symbol]) -> Self {
        Production {
            lhs,
            rhs: rhs.to_vec(),
        }
    }

    /// The base grammar: for each side an empty production, a single
    /// terminal, and a recursive body `X -> x X`.
    pub fn base_set() -> Vec<Production> {
        use Symbol::*;
        vec![
            Production::new(NonTerminal::PredS, &[]),
            Production::new(NonTerminal::PredS, &[Pred]),
            Production::new(NonTerminal::PredS, &[Pred, PredS]),
            Production::new(NonTerminal::SuccS, &[]),
            Production::new(NonTerminal::SuccS, &[Succ]),
            Production::new(NonTerminal::SuccS, &[Succ, SuccS]),
        ]
    }

    pub fn is_recursive(&self) -> bool {
        self.rhs.len() == 2
    }
}

/// Pipe-structure grammar. A unit's `(producers, consumers)` shape is
/// derivable iff it lies within `(max_pred, max_succ)`; the recursive
/// productions are present exactly when the matching bound exceeds one.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowGrammar {
    pub productions: Vec<Production>,
    pub max_pred: u32,
    pub max_succ: u32,
}

impl Default for FlowGrammar {
    fn default() -> Self {
        FlowGrammar::base()
    }
}

impl FlowGrammar {
    pub fn base() -> Self {
        FlowGrammar::with_bounds(1, 1)
    }

    pub fn with_bounds(max_pred: u32, max_succ: u32) -> Self {
        let productions = Production::base_set()
            .into_iter()
            .filter(|p| {
                !p.is_recursive()
                    || match p.lhs {
                        NonTerminal::PredS => max_pred > 1,
                        NonTerminal::SuccS => max_succ > 1,
                    }
            })
            .collect();
        FlowGrammar {
            productions,
            max_pred,
            max_succ,
        }
    }

    pub fn admits(&self, n_pred: usize, n_succ: usize) -> bool {
        n_pred <= self.max_pred as usize && n_succ <= self.max_succ as usize
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MachineDef {
    pub machine_id: String,
    pub name: String,
    pub solver_index: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualProgram {
    pub job_id: String,
    pub steps: Vec<OperationInstance>,
    pub flow_units: Vec<FlowUnitInstance>,
}

impl DualProgram {
    pub fn to_canonical(&self) -> Result<String, CanonicalError> {
        canonical::to_versioned_string(self)
    }

    pub fn from_canonical(text: &str) -> Result<Self, CanonicalError> {
        canonical::from_versioned_str(text)
    }

    /// Sorts flow units by (first producer, raw first; first consumer;
    /// flow def) and renames them `u0, u1, ...`.
    pub fn canonicalize_units(&mut self) {
        let key = |u: &FlowUnitInstance| {
            (
                u.producers.iter().next().map_or(-1, |&p| p as i64),
                u.consumers.iter().next().map_or(i64::MAX, |&c| c as i64),
                u.flow_def.clone(),
            )
        };
        self.flow_units.sort_by_key(key);
        for (i, u) in self.flow_units.iter_mut().enumerate() {
            u.unit_id = format!("u{i}");
        }
    }

    pub fn consumed_at(&self, step: usize) -> impl Iterator<Item = &FlowUnitInstance> {
        self.flow_units
            .iter()
            .filter(move |u| u.consumers.contains(&step))
    }

    pub fn produced_at(&self, step: usize) -> impl Iterator<Item = &FlowUnitInstance> {
        self.flow_units
            .iter()
            .filter(move |u| u.producers.contains(&step))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperationInstance {
    pub step_index: usize,
    pub op_id: String,
    pub interface_index: usize,
    pub context_index: usize,
    #[serde(default)]
    pub bound_params: BTreeMap<String, ParamValue>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowUnitInstance {
    pub unit_id: String,
    pub flow_def: String,
    #[serde(default)]
    pub producers: BTreeSet<usize>,
    #[serde(default)]
    pub consumers: BTreeSet<usize>,
    #[serde(default)]
    pub raw_material: bool,
    #[serde(default)]
    pub final_product: bool,
    #[serde(default)]
    pub prop_values: BTreeMap<String, ParamValue>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grammar_bounds_control_recursion() {
        let g = FlowGrammar::base();
        assert_eq!(g.productions.len(), 4);
        let g = FlowGrammar::with_bounds(2, 1);
        assert_eq!(g.productions.len(), 5);
        assert!(g.admits(2, 1) && !g.admits(2, 2) && g.admits(0, 0));
    }

    #[test]
    fn canonical_unit_order() {
        let mk = |id: &str, def: &str, p: &[usize], c: &[usize]| FlowUnitInstance {
            unit_id: id.into(),
            flow_def: def.into(),
            producers: p.iter().copied().collect(),
            consumers: c.iter().copied().collect(),
            raw_material: p.is_empty(),
            final_product: c.is_empty(),
            prop_values: BTreeMap::new(),
        };
        let mut p = DualProgram {
            job_id: "J".into(),
            steps: vec![],
            flow_units: vec![
                mk("x", "b", &[0], &[1]),
                mk("y", "a", &[], &[0]),
                mk("z", "c", &[1], &[]),
            ],
        };
        p.canonicalize_units();
        let ids: Vec<_> = p
            .flow_units
            .iter()
            .map(|u| (u.unit_id.as_str(), u.flow_def.as_str()))
            .collect();
        assert_eq!(ids, [("u0", "a"), ("u1", "b"), ("u2", "c")]);
    }
}
