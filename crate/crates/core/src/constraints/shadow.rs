//! Advisory re-derivation of the def/kill trace from an independent source.
//! Discrepancies are reported only; the symbolic verification result is
//! never altered.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::VerifierTrace;
use crate::abstraction::RouteSheet;
use crate::flow::StepRef;

/// Predicts `(defined, killed)` flow def names for a step.
pub trait ShadowAdapter {
    fn predict(&self, step: &StepRef) -> (Vec<String>, Vec<String>);
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Discrepancy {
    pub step: StepRef,
    pub expected_defined: Vec<String>,
    pub predicted_defined: Vec<String>,
    pub expected_killed: Vec<String>,
    pub predicted_killed: Vec<String>,
}

/// Default adapter: reads the input and output columns of route sheets.
#[derive(Clone, Debug, Default)]
pub struct RouteSheetShadow {
    rows: BTreeMap<StepRef, (Vec<String>, Vec<String>)>,
}

impl RouteSheetShadow {
    pub fn new(sheets: &[RouteSheet]) -> Self {
        let mut rows = BTreeMap::new();
        for sheet in sheets {
            for row in &sheet.rows {
                rows.insert(
                    StepRef::new(&sheet.job_id, row.step),
                    (row.outputs.clone(), row.inputs.clone()),
                );
            }
        }
        RouteSheetShadow { rows }
    }
}

impl ShadowAdapter for RouteSheetShadow {
    fn predict(&self, step: &StepRef) -> (Vec<String>, Vec<String>) {
        self.rows.get(step).cloned().unwrap_or_default()
    }
}

pub fn llm_shadow_check(
    trace: &VerifierTrace,
    adapter: Option<&dyn ShadowAdapter>,
) -> Vec<Discrepancy> {
    let Some(adapter) = adapter else {
        return Vec::new();
    };
    let sorted = |mut v: Vec<String>| {
        v.sort();
        v
    };
    let mut out = Vec::new();
    for ts in &trace.steps {
        let expected_defined = sorted(ts.defined.iter().map(|u| u.flow_def.clone()).collect());
        let expected_killed = sorted(ts.killed.iter().map(|u| u.flow_def.clone()).collect());
        let (pd, pk) = adapter.predict(&ts.step);
        let (predicted_defined, predicted_killed) = (sorted(pd), sorted(pk));
        if predicted_defined != expected_defined || predicted_killed != expected_killed {
            out.push(Discrepancy {
                step: ts.step.clone(),
                expected_defined,
                predicted_defined,
                expected_killed,
                predicted_killed,
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::{TraceStep, TracedUnit};

    struct Blind;
    impl ShadowAdapter for Blind {
        fn predict(&self, _: &StepRef) -> (Vec<String>, Vec<String>) {
            (vec![], vec![])
        }
    }

    fn trace() -> VerifierTrace {
        let t = |k: &str| TracedUnit {
            key: format!("J/{k}"),
            flow_def: k.into(),
        };
        VerifierTrace {
            steps: vec![
                TraceStep {
                    step: StepRef::new("J", 0),
                    defined: vec![t("a")],
                    killed: vec![t("raw")],
                    memory_size: 1,
                },
                TraceStep {
                    step: StepRef::new("J", 1),
                    defined: vec![t("b")],
                    killed: vec![t("a")],
                    memory_size: 1,
                },
            ],
            accepting: true,
            ..Default::default()
        }
    }

    #[test]
    fn blind_adapter_disagrees_everywhere() {
        assert_eq!(llm_shadow_check(&trace(), Some(&Blind)).len(), 2);
    }

    #[test]
    fn skipped_without_adapter() {
        assert!(llm_shadow_check(&trace(), None).is_empty());
    }
}
