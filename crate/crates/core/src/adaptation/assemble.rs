use std::collections::BTreeMap;

use super::Coverage;
use crate::abstraction::{
    extract_actions, match_operation, MatchConfig, ProcedureDoc, RuleExtractor,
};
use crate::dsl::{DslDefinition, FlowGrammar, FlowUnitDef, MachineDef, OperationDef};

/// Collects induced parts into one definition. Machines that no context
/// uses are kept so solver indices stay dense.
pub fn assemble_dsl(
    operation_defs: BTreeMap<String, OperationDef>,
    flow_unit_defs: BTreeMap<String, FlowUnitDef>,
    flow_grammar: FlowGrammar,
    machine_catalog: Vec<MachineDef>,
) -> DslDefinition {
    DslDefinition {
        operation_defs,
        flow_unit_defs,
        flow_grammar,
        machine_catalog,
    }
}

/// Re-extracts `corpus` under `dsl` and counts actions whose verb matches
/// some operation.
pub fn coverage(dsl: &DslDefinition, corpus: &[ProcedureDoc]) -> Coverage {
    let extractor = RuleExtractor::from_dsl(dsl);
    let cfg = MatchConfig::default();
    let mut c = Coverage {
        actions: 0,
        matched: 0,
        unmatched_verbs: Vec::new(),
    };
    for doc in corpus {
        for a in extract_actions(doc, &extractor).actions {
            c.actions += 1;
            match match_operation(&a, dsl, &cfg) {
                Ok(_) => c.matched += 1,
                Err(_) => c.unmatched_verbs.push(a.verb_text),
            }
        }
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::validate_dsl;

    #[test]
    fn empty_parts_assemble_to_a_valid_dsl() {
        let d = assemble_dsl(
            BTreeMap::new(),
            BTreeMap::new(),
            FlowGrammar::base(),
            Vec::new(),
        );
        assert!(validate_dsl(&d).is_empty());
        assert_eq!(coverage(&d, &[]).actions, 0);
    }
}
