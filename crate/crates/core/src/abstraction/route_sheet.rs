use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::doc::{DocRow, ProcedureDoc};
use crate::canonical::{self, CanonicalError};
use crate::dsl::{DslDefinition, DualProgram, ParamValue};

/// The fully structured form of one procedure: every step resolved to an
/// operation, a machine, a duration and a configuration.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RouteSheet {
    pub job_id: String,
    pub rows: Vec<RouteRow>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RouteRow {
    pub step: usize,
    pub operation: String,
    /// Machine display name.
    pub machine: String,
    pub duration: u32,
    pub config: BTreeMap<String, ParamValue>,
    /// Consumed flow unit defs, sorted.
    pub inputs: Vec<String>,
    /// Produced flow unit defs, sorted.
    pub outputs: Vec<String>,
}

impl RouteSheet {
    pub fn to_canonical(&self) -> Result<String, CanonicalError> {
        canonical::to_versioned_string(self)
    }

    pub fn from_canonical(text: &str) -> Result<Self, CanonicalError> {
        canonical::from_versioned_str(text)
    }

    /// Re-expresses the sheet as a semi-structured document that the default
    /// extractor reads back into the same steps.
    pub fn to_procedure_doc(&self) -> ProcedureDoc {
        let rows = self
            .rows
            .iter()
            .map(|r| {
                let mut desc = format!("use the {}", r.machine);
                if !r.inputs.is_empty() {
                    desc.push_str(&format!(" on {}", r.inputs.join(" and ")));
                }
                if !r.outputs.is_empty() {
                    desc.push_str(&format!(" to make {}", r.outputs.join(" and ")));
                }
                desc.push_str(&format!(", {} min", r.duration));
                for (name, v) in &r.config {
                    desc.push_str(&format!(", {}: {v}", name.replace('_', " ")));
                }
                DocRow {
                    name: r.operation.clone(),
                    description: desc,
                }
            })
            .collect();
        ProcedureDoc::semi_structured(&self.job_id, rows)
    }
}

/// Steps whose op, interface or context does not resolve are rendered with
/// empty machine and zero duration; validated programs never hit that path.
pub fn program_to_route_sheet(p: &DualProgram, d: &DslDefinition) -> RouteSheet {
    let rows = p
        .steps
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let ctx = d.context(&s.op_id, s.interface_index, s.context_index);
            let machine = ctx
                .and_then(|c| d.machine(&c.machine))
                .map(|m| m.name.clone())
                .unwrap_or_default();
            let mut inputs: Vec<String> = p.consumed_at(i).map(|u| u.flow_def.clone()).collect();
            let mut outputs: Vec<String> = p.produced_at(i).map(|u| u.flow_def.clone()).collect();
            inputs.sort();
            outputs.sort();
            RouteRow {
                step: i,
                operation: s.op_id.clone(),
                machine,
                duration: ctx.map_or(0, |c| c.duration),
                config: s.bound_params.clone(),
                inputs,
                outputs,
            }
        })
        .collect();
    RouteSheet {
        job_id: p.job_id.clone(),
        rows,
    }
}
