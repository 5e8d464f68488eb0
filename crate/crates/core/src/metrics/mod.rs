//! Scores pipeline output against scenario gold: exact match over
//! key-value pairs, BLEU, constraint IoU, error rates and cross-scenario
//! variance-to-mean ratios.

mod bleu;
mod kvp;
mod rates;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::abstraction::RouteSheet;
use crate::canonical;
use crate::constraints::ConstraintSet;
use crate::grounding::ProductionPlan;
use crate::scalar::{self, Scalar};

pub use bleu::{bleu, bleu_tokens, corpus_bleu};
pub use kvp::{emkvp, flatten_kvp, harmonic, KvpSet, Prf};
pub use rates::{constraint_acc, error_rates, vmr, ErrorRates, MetricError, RunRecord};

/// The artifacts of one scenario that are scored; either side may be
/// partial.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ScenarioOutputs {
    pub route_sheets: Vec<RouteSheet>,
    pub constraints: Option<ConstraintSet>,
    pub plan: Option<ProductionPlan>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DocMetrics<T> {
    pub bleu: T,
    pub emkvp_precision: T,
    pub emkvp_recall: T,
    pub emkvp_f1: T,
}

impl<T: Scalar> DocMetrics<T> {
    fn new(bleu: T, p: Prf<T>) -> Self {
        DocMetrics {
            bleu,
            emkvp_precision: p.precision,
            emkvp_recall: p.recall,
            emkvp_f1: p.f1,
        }
    }

    fn mean(xs: &[DocMetrics<T>]) -> Self {
        let m = |f: fn(&DocMetrics<T>) -> T| {
            scalar::mean(&xs.iter().map(f).collect::<Vec<_>>()).unwrap_or(T::zero())
        };
        DocMetrics {
            bleu: m(|d| d.bleu),
            emkvp_precision: m(|d| d.emkvp_precision),
            emkvp_recall: m(|d| d.emkvp_recall),
            emkvp_f1: m(|d| d.emkvp_f1),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioMetrics<T> {
    pub scenario_id: String,
    pub route_sheet: DocMetrics<T>,
    pub plan: DocMetrics<T>,
    pub constraint_acc: T,
    pub compiler_er: T,
    pub runtime_er: T,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateMetrics<T> {
    pub n_scenarios: usize,
    pub route_sheet: DocMetrics<T>,
    pub plan: DocMetrics<T>,
    pub constraint_acc: T,
    /// Pooled over every procedure of every scenario.
    pub compiler_er: T,
    pub runtime_er: T,
    /// `None` when the ratio is undefined (no scenarios or zero mean).
    pub route_sheet_f1_vmr: Option<T>,
    pub plan_f1_vmr: Option<T>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport<T> {
    pub scenarios: Vec<ScenarioMetrics<T>>,
    pub aggregate: AggregateMetrics<T>,
}

fn sheets_value(sheets: &[RouteSheet]) -> Value {
    let v = serde_json::to_value(sheets).expect("route sheets serialize");
    serde_json::json!({ "route_sheets": v })
}

fn text_of<S: Serialize>(x: &S) -> String {
    canonical::to_string(x).expect("artifact serializes")
}

/// Route sheets are paired by job id for BLEU; a missing prediction pairs
/// with the empty text.
fn route_sheet_metrics<T: Scalar>(pred: &[RouteSheet], gold: &[RouteSheet]) -> DocMetrics<T> {
    let texts: Vec<(String, String)> = gold
        .iter()
        .map(|g| {
            let p = pred
                .iter()
                .find(|p| p.job_id == g.job_id)
                .map(text_of)
                .unwrap_or_default();
            (p, text_of(g))
        })
        .collect();
    let pairs: Vec<(&str, &str)> = texts
        .iter()
        .map(|(a, b)| (a.as_str(), b.as_str()))
        .collect();
    let b = if pairs.is_empty() {
        if pred.is_empty() {
            T::one()
        } else {
            T::zero()
        }
    } else {
        corpus_bleu(&pairs)
    };
    DocMetrics::new(
        b,
        emkvp(
            &flatten_kvp(&sheets_value(pred)),
            &flatten_kvp(&sheets_value(gold)),
        ),
    )
}

fn plan_metrics<T: Scalar>(
    pred: Option<&ProductionPlan>,
    gold: Option<&ProductionPlan>,
) -> DocMetrics<T> {
    let kv = |p: Option<&ProductionPlan>| {
        p.map(|p| flatten_kvp(&serde_json::to_value(p).expect("plan serializes")))
            .unwrap_or_default()
    };
    let text = |p: Option<&ProductionPlan>| p.map(text_of).unwrap_or_default();
    DocMetrics::new(bleu(&text(pred), &text(gold)), emkvp(&kv(pred), &kv(gold)))
}

pub fn score_scenario<T: Scalar>(
    scenario_id: &str,
    pred: &ScenarioOutputs,
    gold: &ScenarioOutputs,
    runs: &[RunRecord],
) -> ScenarioMetrics<T> {
    let empty = ConstraintSet::default();
    let rates = error_rates(runs);
    ScenarioMetrics {
        scenario_id: scenario_id.to_string(),
        route_sheet: route_sheet_metrics(&pred.route_sheets, &gold.route_sheets),
        plan: plan_metrics(pred.plan.as_ref(), gold.plan.as_ref()),
        constraint_acc: constraint_acc(
            pred.constraints.as_ref().unwrap_or(&empty),
            gold.constraints.as_ref().unwrap_or(&empty),
        ),
        compiler_er: rates.compiler_er,
        runtime_er: rates.runtime_er,
    }
}

impl<T: Scalar> MetricReport<T> {
    /// `runs` holds every scenario's run records, pooled for the aggregate
    /// error rates.
    pub fn aggregate(scenarios: Vec<ScenarioMetrics<T>>, runs: &[RunRecord]) -> Self {
        let route: Vec<_> = scenarios.iter().map(|s| s.route_sheet).collect();
        let plan: Vec<_> = scenarios.iter().map(|s| s.plan).collect();
        let accs: Vec<T> = scenarios.iter().map(|s| s.constraint_acc).collect();
        let rates = error_rates(runs);
        let f1s = |d: &[DocMetrics<T>]| vmr(&d.iter().map(|x| x.emkvp_f1).collect::<Vec<_>>()).ok();
        let aggregate = AggregateMetrics {
            n_scenarios: scenarios.len(),
            route_sheet: DocMetrics::mean(&route),
            plan: DocMetrics::mean(&plan),
            constraint_acc: scalar::mean(&accs).unwrap_or(T::one()),
            compiler_er: rates.compiler_er,
            runtime_er: rates.runtime_er,
            route_sheet_f1_vmr: f1s(&route),
            plan_f1_vmr: f1s(&plan),
        };
        MetricReport {
            scenarios,
            aggregate,
        }
    }

    pub fn to_canonical(&self) -> Result<String, canonical::CanonicalError> {
        canonical::to_versioned_string(self)
    }

    /// One row per scenario plus an `aggregate` row; six decimals.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "scenario_id,route_bleu,route_precision,route_recall,route_f1,\
             plan_bleu,plan_precision,plan_recall,plan_f1,constraint_acc,compiler_er,runtime_er\n",
        );
        let f = |x: T| format!("{:.6}", x.to_f64_lossy());
        let mut row = |id: &str, r: &DocMetrics<T>, p: &DocMetrics<T>, acc: T, ce: T, re: T| {
            let cells = [
                r.bleu,
                r.emkvp_precision,
                r.emkvp_recall,
                r.emkvp_f1,
                p.bleu,
                p.emkvp_precision,
                p.emkvp_recall,
                p.emkvp_f1,
                acc,
                ce,
                re,
            ];
            let cells: Vec<String> = cells.into_iter().map(f).collect();
            let _ = writeln!(out, "{id},{}", cells.join(","));
        };
        for s in &self.scenarios {
            row(
                &s.scenario_id,
                &s.route_sheet,
                &s.plan,
                s.constraint_acc,
                s.compiler_er,
                s.runtime_er,
            );
        }
        let a = &self.aggregate;
        row(
            "aggregate",
            &a.route_sheet,
            &a.plan,
            a.constraint_acc,
            a.compiler_er,
            a.runtime_er,
        );
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::abstraction::RouteRow;
    use std::collections::BTreeMap;

    fn sheet(job: &str, d: u32) -> RouteSheet {
        RouteSheet {
            job_id: job.into(),
            rows: vec![RouteRow {
                step: 0,
                operation: "Milling".into(),
                machine: "Vertical Mill".into(),
                duration: d,
                config: BTreeMap::new(),
                inputs: vec![],
                outputs: vec![],
            }],
        }
    }

    #[test]
    fn identical_outputs_score_one() {
        let gold = ScenarioOutputs {
            route_sheets: vec![sheet("J01", 3), sheet("J02", 4)],
            constraints: Some(ConstraintSet::default()),
            plan: None,
        };
        let m: ScenarioMetrics<f64> = score_scenario("s", &gold, &gold, &[]);
        assert_eq!(m.route_sheet.emkvp_f1, 1.0);
        assert_eq!(m.route_sheet.bleu, 1.0);
        assert_eq!(m.plan.emkvp_f1, 1.0);
        assert_eq!(m.constraint_acc, 1.0);
    }

    #[test]
    fn sheet_order_does_not_matter() {
        let gold = ScenarioOutputs {
            route_sheets: vec![sheet("J01", 3), sheet("J02", 4)],
            ..Default::default()
        };
        let pred = ScenarioOutputs {
            route_sheets: vec![sheet("J02", 4), sheet("J01", 3)],
            ..Default::default()
        };
        let m: ScenarioMetrics<f64> = score_scenario("s", &pred, &gold, &[]);
        assert_eq!(m.route_sheet.emkvp_f1, 1.0);
    }

    #[test]
    fn aggregate_and_csv() {
        let gold = ScenarioOutputs {
            route_sheets: vec![sheet("J01", 3)],
            ..Default::default()
        };
        let pred = ScenarioOutputs {
            route_sheets: vec![sheet("J01", 5)],
            ..Default::default()
        };
        let a: ScenarioMetrics<f64> = score_scenario("a", &gold, &gold, &[]);
        let b: ScenarioMetrics<f64> = score_scenario("b", &pred, &gold, &[]);
        assert!(b.route_sheet.emkvp_f1 < 1.0);
        let r = MetricReport::aggregate(vec![a, b], &[]);
        assert_eq!(r.aggregate.n_scenarios, 2);
        assert!(r.aggregate.route_sheet_f1_vmr.unwrap() > 0.0);
        let csv = r.to_csv();
        assert_eq!(csv.lines().count(), 4);
        assert!(csv.lines().last().unwrap().starts_with("aggregate,"));
    }
}
