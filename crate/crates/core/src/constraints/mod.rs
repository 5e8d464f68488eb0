//! Def/kill verification of dual programs and constraint emission.
//!
//! The verifier walks every step of the corpus in a global execution order
//! while keeping a multiset memory of live flow units. A step kills the
//! units it consumes and defines the units it produces; each kill adds the
//! `(definer, killer)` pairs to the precedence set. Raw materials are
//! defined by an implicit SOURCE before the walk and final products killed
//! by an implicit SINK after it. The corpus is accepted iff memory ends
//! empty.

mod shadow;
mod solver_input;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::dsl::{DslDefinition, DualProgram};
use crate::flow::{FlowNetwork, StepRef};

pub use shadow::{llm_shadow_check, Discrepancy, RouteSheetShadow, ShadowAdapter};
pub use solver_input::{
    to_solver_input, validate_solver_input, ConstraintError, MachineMapEntry, OpEdge, OpRef,
    SolverInput, SolverJob, SolverMapping,
};

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ResourcePair {
    pub step: StepRef,
    pub machine: String,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PrecedencePair {
    pub before: StepRef,
    pub after: StepRef,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstraintSet {
    pub resource: BTreeSet<ResourcePair>,
    pub precedence: BTreeSet<PrecedencePair>,
}

impl ConstraintSet {
    pub fn machine_of(&self, step: &StepRef) -> Option<&str> {
        self.resource
            .iter()
            .find(|r| &r.step == step)
            .map(|r| r.machine.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TracedUnit {
    pub key: String,
    pub flow_def: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceStep {
    pub step: StepRef,
    pub defined: Vec<TracedUnit>,
    pub killed: Vec<TracedUnit>,
    /// Live unit count (with multiplicity) after the step.
    pub memory_size: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifierTrace {
    pub source_defined: Vec<TracedUnit>,
    pub steps: Vec<TraceStep>,
    pub sink_killed: Vec<TracedUnit>,
    /// Units left in memory after SINK, with multiplicity.
    pub final_memory: BTreeMap<String, usize>,
    pub accepting: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum VerifyError {
    #[error("flow break: unit {unit} is not live when step {step} consumes it")]
    FlowBreak { unit: String, step: StepRef },
    #[error("memory not empty at end of walk: {units:?}")]
    NonEmptyMemory { units: Vec<String> },
    #[error("final product {unit} is never defined before SINK")]
    UndefinedAtSink { unit: String },
    #[error("step {step} does not resolve to an exec context")]
    UnresolvedStep { step: StepRef },
}

/// Working state of the walk: live units with multiplicity.
#[derive(Debug, Default)]
struct Memory {
    live: BTreeMap<String, usize>,
}

impl Memory {
    fn define(&mut self, key: &str, copies: usize) {
        *self.live.entry(key.to_string()).or_default() += copies;
    }

    fn kill(&mut self, key: &str) -> bool {
        match self.live.get_mut(key) {
            Some(n) if *n > 0 => {
                *n -= 1;
                if *n == 0 {
                    self.live.remove(key);
                }
                true
            }
            _ => false,
        }
    }

    fn size(&self) -> usize {
        self.live.values().sum()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Verification {
    pub constraints: ConstraintSet,
    pub trace: VerifierTrace,
}

pub fn verify_and_generate(
    programs: &[DualProgram],
    d: &DslDefinition,
) -> Result<Verification, VerifyError> {
    let net = FlowNetwork::build(programs);
    let by_job: BTreeMap<&str, &DualProgram> =
        programs.iter().map(|p| (p.job_id.as_str(), p)).collect();

    let mut kills_at: BTreeMap<&StepRef, Vec<usize>> = BTreeMap::new();
    let mut defs_at: BTreeMap<&StepRef, Vec<usize>> = BTreeMap::new();
    for (i, u) in net.units.iter().enumerate() {
        for c in &u.consumers {
            kills_at.entry(c).or_default().push(i);
        }
        for p in &u.producers {
            defs_at.entry(p).or_default().push(i);
        }
    }
    let traced = |i: usize| TracedUnit {
        key: net.units[i].key.clone(),
        flow_def: net.units[i].flow_def.clone(),
    };

    let mut cs = ConstraintSet::default();
    let mut trace = VerifierTrace::default();
    let mut mem = Memory::default();
    let mut pending: Vec<usize> = net.units.iter().map(|u| u.producers.len()).collect();

    for (i, u) in net.units.iter().enumerate() {
        if u.sourced {
            mem.define(&u.key, u.planned_kills());
            trace.source_defined.push(traced(i));
        }
    }

    for step in net.execution_order() {
        let program = by_job[step.job_id.as_str()];
        let inst = &program.steps[step.step_index];
        let ctx = d
            .context(&inst.op_id, inst.interface_index, inst.context_index)
            .ok_or_else(|| VerifyError::UnresolvedStep { step: step.clone() })?;
        cs.resource.insert(ResourcePair {
            step: step.clone(),
            machine: ctx.machine.clone(),
        });

        let mut killed = Vec::new();
        for &ui in kills_at.get(&step).map(Vec::as_slice).unwrap_or(&[]) {
            let u = &net.units[ui];
            if !mem.kill(&u.key) {
                return Err(VerifyError::FlowBreak {
                    unit: u.key.clone(),
                    step,
                });
            }
            for p in &u.producers {
                cs.precedence.insert(PrecedencePair {
                    before: p.clone(),
                    after: step.clone(),
                });
            }
            killed.push(traced(ui));
        }
        let mut defined = Vec::new();
        for &ui in defs_at.get(&step).map(Vec::as_slice).unwrap_or(&[]) {
            pending[ui] -= 1;
            if pending[ui] == 0 {
                mem.define(&net.units[ui].key, net.units[ui].planned_kills());
            }
            defined.push(traced(ui));
        }
        trace.steps.push(TraceStep {
            step,
            defined,
            killed,
            memory_size: mem.size(),
        });
    }

    for (i, u) in net.units.iter().enumerate() {
        if u.sunk {
            if !mem.kill(&u.key) {
                return Err(VerifyError::UndefinedAtSink {
                    unit: u.key.clone(),
                });
            }
            trace.sink_killed.push(traced(i));
        }
    }
    trace.final_memory = mem.live.clone();
    trace.accepting = mem.live.is_empty();
    if !trace.accepting {
        return Err(VerifyError::NonEmptyMemory {
            units: mem.live.keys().cloned().collect(),
        });
    }
    Ok(Verification {
        constraints: cs,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::*;

    fn dsl() -> DslDefinition {
        let mut d = DslDefinition::default();
        for (i, m) in ["M1", "M2", "M3"].iter().enumerate() {
            d.machine_catalog.push(MachineDef {
                machine_id: m.to_string(),
                name: m.to_string(),
                solver_index: i,
            });
        }
        for (i, m) in ["M1", "M2", "M3"].iter().enumerate() {
            d.operation_defs.insert(
                format!("Op{i}"),
                OperationDef {
                    identifier: format!("Op{i}"),
                    aliases: Default::default(),
                    interfaces: vec![Interface {
                        preconditions: vec![],
                        postconditions: vec![],
                        exec_contexts: vec![ExecContext {
                            machine: m.to_string(),
                            duration: 1,
                            params: Default::default(),
                        }],
                    }],
                },
            );
        }
        d
    }

    fn step(i: usize, op: usize) -> OperationInstance {
        OperationInstance {
            step_index: i,
            op_id: format!("Op{op}"),
            interface_index: 0,
            context_index: 0,
            bound_params: Default::default(),
        }
    }

    fn unit(id: &str, p: &[usize], c: &[usize]) -> FlowUnitInstance {
        FlowUnitInstance {
            unit_id: id.into(),
            flow_def: id.into(),
            producers: p.iter().copied().collect(),
            consumers: c.iter().copied().collect(),
            raw_material: p.is_empty(),
            final_product: c.is_empty(),
            prop_values: Default::default(),
        }
    }

    fn pair(a: usize, b: usize) -> PrecedencePair {
        PrecedencePair {
            before: StepRef::new("J", a),
            after: StepRef::new("J", b),
        }
    }

    #[test]
    fn linear_pair() {
        let p = DualProgram {
            job_id: "J".into(),
            steps: vec![step(0, 0), step(1, 1)],
            flow_units: vec![
                unit("raw", &[], &[0]),
                unit("u1", &[0], &[1]),
                unit("out", &[1], &[]),
            ],
        };
        let v = verify_and_generate(&[p], &dsl()).unwrap();
        assert_eq!(v.constraints.precedence, [pair(0, 1)].into());
        let machines: Vec<_> = v
            .constraints
            .resource
            .iter()
            .map(|r| r.machine.as_str())
            .collect();
        assert_eq!(machines, ["M1", "M2"]);
        assert!(v.trace.accepting);
    }

    #[test]
    fn y_shape() {
        let p = DualProgram {
            job_id: "J".into(),
            steps: vec![step(0, 0), step(1, 1), step(2, 2)],
            flow_units: vec![
                unit("r0", &[], &[0]),
                unit("r1", &[], &[1]),
                unit("u1", &[0], &[2]),
                unit("u2", &[1], &[2]),
                unit("out", &[2], &[]),
            ],
        };
        let v = verify_and_generate(&[p], &dsl()).unwrap();
        assert_eq!(v.constraints.precedence, [pair(0, 2), pair(1, 2)].into());
    }

    #[test]
    fn consuming_later_output_is_flow_break() {
        let p = DualProgram {
            job_id: "J".into(),
            steps: vec![step(0, 0), step(1, 1)],
            flow_units: vec![
                unit("u", &[1], &[0]),
                unit("r", &[], &[1]),
                unit("o", &[0], &[]),
            ],
        };
        match verify_and_generate(&[p], &dsl()) {
            Err(VerifyError::FlowBreak { step, .. }) => assert_eq!(step, StepRef::new("J", 0)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unconsumed_intermediate_is_non_empty_memory() {
        let mut u = unit("u", &[0], &[]);
        u.final_product = false;
        let p = DualProgram {
            job_id: "J".into(),
            steps: vec![step(0, 0)],
            flow_units: vec![unit("r", &[], &[0]), u],
        };
        assert!(matches!(
            verify_and_generate(&[p], &dsl()),
            Err(VerifyError::NonEmptyMemory { .. })
        ));
    }

    #[test]
    fn shared_output_needs_every_kill() {
        // u is a final product that is also consumed: SINK and step 1 kill it
        let mut u = unit("u", &[0], &[1]);
        u.final_product = true;
        let p = DualProgram {
            job_id: "J".into(),
            steps: vec![step(0, 0), step(1, 1)],
            flow_units: vec![unit("r", &[], &[0]), u, unit("o", &[1], &[])],
        };
        let v = verify_and_generate(&[p], &dsl()).unwrap();
        assert!(v.trace.accepting);
        assert_eq!(v.trace.sink_killed.len(), 2);
    }
}
