//! End-to-end run of one scenario: abstraction, verification, solving
//! and grounding, with every intermediate kept for audit.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::abstraction::{
    program_to_route_sheet, synthesize_program, MatchConfig, ProcedureDoc, RouteSheet,
    RuleExtractor,
};
use crate::canonical::{self, CanonicalError};
use crate::constraints::{
    to_solver_input, validate_solver_input, verify_and_generate, ConstraintSet, SolverInput,
    SolverMapping, VerifierTrace,
};
use crate::dsl::{DslDefinition, DualProgram};
use crate::files;
use crate::grounding::{
    check_plan, check_process_locks, emit_gantt, ground, Gantt, ProductionPlan,
};
use crate::metrics::{RunRecord, ScenarioOutputs};
use crate::solver::{check_schedule, solve, Schedule, SolveStatus, SolverConfig};
use crate::synth::plan_id;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub solver: SolverConfig,
    pub matching: MatchConfig,
}

/// A stage that failed, for the whole scenario or one procedure.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageFailure {
    pub stage: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub procedure: Option<String>,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineRun {
    pub scenario_id: String,
    pub programs: Vec<DualProgram>,
    pub route_sheets: Vec<RouteSheet>,
    pub constraints: Option<ConstraintSet>,
    pub trace: Option<VerifierTrace>,
    pub solver_input: Option<SolverInput>,
    pub mapping: Option<SolverMapping>,
    pub schedule: Option<Schedule>,
    pub plan: Option<ProductionPlan>,
    pub runs: Vec<RunRecord>,
    pub failures: Vec<StageFailure>,
}

impl PipelineRun {
    pub fn outputs(&self) -> ScenarioOutputs {
        ScenarioOutputs {
            route_sheets: self.route_sheets.clone(),
            constraints: self.constraints.clone(),
            plan: self.plan.clone(),
        }
    }

    pub fn gantt_svg(&self, d: &DslDefinition) -> Option<String> {
        self.plan
            .as_ref()
            .map(|p| emit_gantt(&Gantt::from_plan(p, d)))
    }

    /// Writes every available artifact under `dir`: `programs/`,
    /// `route_sheets/`, `constraints.json`, `verifier_trace.json`,
    /// `solver_input.json`, `mapping.json`, `schedule.json`, `plan.json`,
    /// `gantt.svg` and `run_log.json`.
    pub fn write(&self, dir: &Path, d: &DslDefinition) -> Result<(), PipelineWriteError> {
        for p in &self.programs {
            put(&dir.join("programs").join(format!("{}.json", p.job_id)), p)?;
        }
        for r in &self.route_sheets {
            put(
                &dir.join("route_sheets").join(format!("{}.json", r.job_id)),
                r,
            )?;
        }
        if let Some(c) = &self.constraints {
            put(&dir.join("constraints.json"), c)?;
        }
        if let Some(t) = &self.trace {
            put(&dir.join("verifier_trace.json"), t)?;
        }
        if let Some(s) = &self.solver_input {
            put(&dir.join("solver_input.json"), s)?;
        }
        if let Some(m) = &self.mapping {
            put(&dir.join("mapping.json"), m)?;
        }
        if let Some(s) = &self.schedule {
            put(&dir.join("schedule.json"), s)?;
        }
        if let Some(p) = &self.plan {
            put(&dir.join("plan.json"), p)?;
        }
        if let Some(svg) = self.gantt_svg(d) {
            files::write_text(&dir.join("gantt.svg"), &svg)?;
        }
        put(
            &dir.join("run_log.json"),
            &RunLog {
                scenario_id: self.scenario_id.clone(),
                runs: self.runs.clone(),
                failures: self.failures.clone(),
            },
        )?;
        Ok(())
    }
}

/// Per-procedure outcomes of one pipeline run.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunLog {
    pub scenario_id: String,
    pub runs: Vec<RunRecord>,
    pub failures: Vec<StageFailure>,
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineWriteError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Canonical(#[from] CanonicalError),
}

fn put<T: Serialize>(path: &Path, x: &T) -> Result<(), PipelineWriteError> {
    files::write_text(path, &canonical::to_versioned_string(x)?)?;
    Ok(())
}

fn fail(stage: &str, procedure: Option<&str>, message: impl ToString) -> StageFailure {
    StageFailure {
        stage: stage.to_string(),
        procedure: procedure.map(str::to_string),
        message: message.to_string(),
    }
}

/// Runs every stage on `corpus`. A procedure that fails to compile is
/// dropped from the later stages; a scenario-level failure stops the run
/// and marks every procedure.
pub fn run_pipeline(
    scenario_id: &str,
    corpus: &[ProcedureDoc],
    d: &DslDefinition,
    cfg: &PipelineConfig,
) -> PipelineRun {
    let extractor = RuleExtractor::from_dsl(d);
    let mut run = PipelineRun {
        scenario_id: scenario_id.to_string(),
        programs: Vec::new(),
        route_sheets: Vec::new(),
        constraints: None,
        trace: None,
        solver_input: None,
        mapping: None,
        schedule: None,
        plan: None,
        runs: Vec::new(),
        failures: Vec::new(),
    };
    let mut compiled = Vec::new();
    for doc in corpus {
        match synthesize_program(doc, d, &extractor, &cfg.matching) {
            Ok(p) => {
                run.route_sheets.push(program_to_route_sheet(&p, d));
                compiled.push(doc.doc_id.clone());
                run.programs.push(p);
            }
            Err(e) => run.failures.push(fail("abstract", Some(&doc.doc_id), e)),
        }
    }
    let record = |id: &str, input_valid: bool, solve_ok: bool| RunRecord {
        procedure: id.to_string(),
        input_valid,
        solve_ok,
    };
    let invalid_all = |run: &mut PipelineRun| {
        run.runs = corpus
            .iter()
            .map(|doc| record(&doc.doc_id, false, false))
            .collect();
    };

    let verification = match verify_and_generate(&run.programs, d) {
        Ok(v) => v,
        Err(e) => {
            run.failures.push(fail("constraints", None, e));
            invalid_all(&mut run);
            return run;
        }
    };
    run.constraints = Some(verification.constraints.clone());
    run.trace = Some(verification.trace);
    let (input, mapping) = match to_solver_input(&verification.constraints, &run.programs, d) {
        Ok(x) => x,
        Err(e) => {
            run.failures.push(fail("constraints", None, e));
            invalid_all(&mut run);
            return run;
        }
    };
    let report = validate_solver_input(&input);
    run.solver_input = Some(input.clone());
    run.mapping = Some(mapping.clone());
    if !report.is_empty() {
        run.failures.push(fail("constraints", None, report));
        invalid_all(&mut run);
        return run;
    }

    let solved = match solve(&input, &cfg.solver) {
        Ok(s) => s,
        Err(e) => {
            run.failures.push(fail("solve", None, e));
            invalid_all(&mut run);
            return run;
        }
    };
    let mut ok = solved.status != SolveStatus::Infeasible;
    if !ok {
        run.failures
            .push(fail("solve", None, "precedence constraints are circular"));
    }
    let check = check_schedule(&solved, &input);
    if !check.is_empty() {
        run.failures.push(fail("solve", None, check));
        ok = false;
    }
    if ok {
        match ground(
            &solved,
            &run.programs,
            d,
            &mapping,
            &plan_id(scenario_id),
            scenario_id,
        ) {
            Ok(plan) => {
                let mut r = check_plan(&plan, &run.programs, d);
                r.extend(check_process_locks(&plan, &run.programs));
                if r.is_empty() {
                    run.plan = Some(plan);
                } else {
                    run.failures.push(fail("ground", None, r));
                    ok = false;
                }
            }
            Err(e) => {
                run.failures.push(fail("ground", None, e));
                ok = false;
            }
        }
    }
    run.schedule = Some(solved);
    run.runs = corpus
        .iter()
        .map(|doc| {
            let valid = compiled.contains(&doc.doc_id);
            record(&doc.doc_id, valid, valid && ok)
        })
        .collect();
    run
}
