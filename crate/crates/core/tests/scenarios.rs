mod common;

use std::collections::BTreeMap;

use common::oracles::*;
use shopspec::constraints::{to_solver_input, verify_and_generate};
use shopspec::dsl::{validate_dsl, validate_program};
use shopspec::metrics::{constraint_acc, score_scenario, ScenarioOutputs};
use shopspec::pipeline::{run_pipeline, PipelineConfig};
use shopspec::solver::{check_schedule, SolveStatus};
use shopspec::synth::{
    bundled_benchmarks, read_scenario, synthesize_scenario, write_scenario, Scenario,
};
use shopspec::ScenarioMetrics;

fn scenarios() -> Vec<(Scenario, Vec<Vec<(usize, u32)>>)> {
    bundled_benchmarks()
        .into_iter()
        .map(|(b, seed)| (synthesize_scenario(&b, seed), b.matrix))
        .collect()
}

#[test]
fn ten_scenarios_are_bundled() {
    let names: Vec<String> = bundled_benchmarks()
        .into_iter()
        .map(|(b, _)| b.name)
        .collect();
    assert_eq!(names.len(), 10, "{names:?}");
    assert!(names.contains(&"ft06".to_string()));
}

#[test]
fn synthesis_is_deterministic_and_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    for (b, seed) in bundled_benchmarks() {
        let s = synthesize_scenario(&b, seed);
        assert_eq!(s, synthesize_scenario(&b, seed));
        let path = dir.path().join(s.scenario_id());
        write_scenario(&s, &path).unwrap();
        assert_eq!(read_scenario(&path).unwrap(), s);
    }
}

#[test]
fn gold_artifacts_are_self_consistent() {
    for (s, matrix) in scenarios() {
        let id = s.scenario_id().to_string();
        assert!(
            validate_dsl(&s.dsl).is_empty(),
            "{id}: {}",
            validate_dsl(&s.dsl)
        );
        for p in &s.gold.programs {
            let r = validate_program(p, &s.dsl);
            assert!(r.is_empty(), "{id}/{}: {r}", p.job_id);
        }
        let v = verify_and_generate(&s.gold.programs, &s.dsl).unwrap();
        assert_eq!(v.constraints, s.gold.constraints, "{id}");
        assert_eq!(
            constraint_acc::<f64>(&v.constraints, &s.gold.constraints),
            1.0
        );

        let (input, mapping) = to_solver_input(&v.constraints, &s.gold.programs, &s.dsl).unwrap();
        assert_eq!(input, s.gold.solver_input, "{id}");
        assert_eq!(mapping, s.gold.mapping, "{id}");
        // undo the machine mapping and compare with the benchmark matrix
        let bench_index: BTreeMap<usize, usize> = mapping
            .machines
            .iter()
            .map(|m| (m.solver_index, m.machine_id[1..].parse::<usize>().unwrap()))
            .collect();
        let recovered: Vec<Vec<(usize, u32)>> = input
            .jobs
            .iter()
            .map(|j| j.ops.iter().map(|&(m, d)| (bench_index[&m], d)).collect())
            .collect();
        assert_eq!(recovered, matrix, "{id}");

        assert!(check_schedule(&s.gold.schedule, &input).is_empty(), "{id}");
        assert_ne!(s.gold.schedule.status, SolveStatus::Infeasible);
        let bad = plan_violations(&s.gold.plan, &s.gold.programs, &s.dsl);
        assert!(bad.is_empty(), "{id}: {bad:?}");
    }
}

#[test]
fn pipeline_reproduces_every_scenario() {
    let mut f1 = Vec::new();
    for (s, _) in scenarios() {
        let id = s.scenario_id().to_string();
        let run = run_pipeline(&id, &s.corpus, &s.dsl, &PipelineConfig::default());
        assert!(run.failures.is_empty(), "{id}: {:?}", run.failures);
        let plan = run.plan.as_ref().unwrap();
        let bad = plan_violations(plan, &run.programs, &s.dsl);
        assert!(bad.is_empty(), "{id}: {bad:?}");
        let gold = ScenarioOutputs {
            route_sheets: s.gold.route_sheets.clone(),
            constraints: Some(s.gold.constraints.clone()),
            plan: Some(s.gold.plan.clone()),
        };
        let m: ScenarioMetrics = score_scenario(&id, &run.outputs(), &gold, &run.runs);
        assert!(m.route_sheet.emkvp_f1 >= 0.95, "{id}: {m:?}");
        assert!(m.plan.emkvp_f1 >= 0.95, "{id}: {m:?}");
        assert_eq!((m.compiler_er, m.runtime_er), (0.0, 0.0), "{id}");
        f1.push(m.route_sheet.emkvp_f1);
    }
    assert!(shopspec::metrics::vmr(&f1).unwrap() <= 0.05);
}
