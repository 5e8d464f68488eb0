//! `shopspec`: every toolchain stage as a subcommand, plus the end-to-end
//! pipeline and evaluation.
//!
//! Exit codes: 0 success, 1 validation failure, 2 usage error. Failures
//! also leave `error.json` in the output directory.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use serde::de::DeserializeOwned;
use serde::Serialize;
use shopspec::abstraction::{
    program_to_route_sheet, synthesize_program, MatchConfig, ProcedureDoc, RuleExtractor,
};
use shopspec::adaptation::{adapt, PriorKnowledge};
use shopspec::canonical;
use shopspec::constraints::{
    to_solver_input, validate_solver_input, verify_and_generate, SolverInput, SolverMapping,
};
use shopspec::dsl::{validate_dsl, DslDefinition, DualProgram};
use shopspec::files;
use shopspec::grounding::{emit_gantt, ground, Gantt};
use shopspec::metrics::{score_scenario, RunRecord, ScenarioOutputs};
use shopspec::pipeline::{run_pipeline, PipelineConfig, RunLog};
use shopspec::solver::{solve, Schedule, SolveStatus, SolverConfig};
use shopspec::synth::{
    bundled_benchmarks, load_benchmark, plan_id, read_scenario, synthesize_scenario, write_scenario,
};
use shopspec::{AdaptationConfig, MetricReport, ScenarioMetrics};

#[derive(Parser, Debug)]
#[command(
    name = "shopspec",
    version,
    about = "Procedure documents to job-shop production plans"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Global {
    /// Seed for every randomized stage.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Solver wall-clock limit in seconds.
    #[arg(long, global = true, default_value_t = 60.0)]
    time_limit: f64,
    /// Solver node budget; the deterministic search limit.
    #[arg(long, global = true, default_value_t = 200_000)]
    node_limit: u64,
    /// Output directory.
    #[arg(long, global = true, env = "SHOPSPEC_OUT", default_value = "out")]
    out: PathBuf,
    #[arg(long, global = true, default_value = "warn")]
    log_level: log::LevelFilter,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build scenarios from benchmarks: `.jsp` paths, bundled names or `all`.
    Synth { benchmarks: Vec<String> },
    /// Induce a DSL from a corpus directory (or a scenario directory).
    Adapt {
        corpus: PathBuf,
        /// Prior knowledge JSON; defaults to the bundled shop vocabulary.
        #[arg(long)]
        prior: Option<PathBuf>,
        /// Adaptation configuration JSON; flags below override it.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        max_iters: Option<usize>,
        #[arg(long)]
        burn_in: Option<usize>,
        #[arg(long)]
        em_max_iters: Option<usize>,
        #[arg(long)]
        conv_tol: Option<f64>,
        #[arg(long)]
        tau_alias: Option<f64>,
        #[arg(long)]
        window: Option<usize>,
    },
    /// Compile procedure documents (`.json` or plain `.txt`) into programs.
    Abstract {
        docs: Vec<PathBuf>,
        #[arg(long)]
        dsl: PathBuf,
    },
    /// Verify programs and emit constraints and the solver input.
    Constraints {
        programs: Vec<PathBuf>,
        #[arg(long)]
        dsl: PathBuf,
    },
    /// Solve a solver input.
    Solve { solver_input: PathBuf },
    /// Ground a schedule into a production plan.
    Ground {
        schedule: PathBuf,
        #[arg(long, num_args = 1.., required = true)]
        programs: Vec<PathBuf>,
        #[arg(long)]
        dsl: PathBuf,
        #[arg(long)]
        mapping: PathBuf,
        #[arg(long, default_value = "scenario")]
        scenario_id: String,
        /// Also write `gantt.svg`.
        #[arg(long)]
        gantt: bool,
    },
    /// Run every stage on a scenario directory, or on each scenario below it.
    Pipeline {
        scenario: PathBuf,
        /// Use this DSL instead of the scenario's own.
        #[arg(long)]
        dsl: Option<PathBuf>,
    },
    /// Score pipeline outputs against scenario gold.
    Eval { pred: PathBuf, gold: PathBuf },
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Validation(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Validation(_) => 1,
            Failure::Usage(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Validation(m) => m,
        }
    }
}

type Outcome = Result<(), Failure>;

fn invalid(e: impl std::fmt::Display) -> Failure {
    Failure::Validation(e.to_string())
}

fn need(path: &Path) -> Outcome {
    if path.exists() {
        Ok(())
    } else {
        Err(Failure::Usage(format!(
            "{}: no such file or directory",
            path.display()
        )))
    }
}

fn read<T: DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    need(path)?;
    let text = files::read_text(path).map_err(invalid)?;
    canonical::from_versioned_str(&text)
        .map_err(|e| Failure::Validation(format!("{}: {e}", path.display())))
}

/// Files named directly, plus every `.json` inside named directories.
fn expand(paths: &[PathBuf]) -> Result<Vec<PathBuf>, Failure> {
    let mut out = Vec::new();
    for p in paths {
        need(p)?;
        if p.is_dir() {
            out.extend(files::json_files(p).map_err(invalid)?);
        } else {
            out.push(p.clone());
        }
    }
    if out.is_empty() {
        return Err(Failure::Usage("no input files".into()));
    }
    Ok(out)
}

fn put<T: Serialize>(path: &Path, x: &T) -> Outcome {
    let text = canonical::to_versioned_string(x).map_err(invalid)?;
    files::write_text(path, &text).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
    info!("wrote {}", path.display());
    Ok(())
}

fn put_text(path: &Path, text: &str) -> Outcome {
    files::write_text(path, text).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
    info!("wrote {}", path.display());
    Ok(())
}

fn solver_config(g: &Global) -> SolverConfig {
    SolverConfig {
        time_limit_s: g.time_limit,
        seed: g.seed,
        node_limit: g.node_limit,
        ..SolverConfig::default()
    }
}

fn is_scenario(dir: &Path) -> bool {
    dir.join("scenario.json").is_file()
}

/// `dir` itself when it is a scenario, else its scenario subdirectories.
fn scenario_dirs(dir: &Path) -> Result<Vec<PathBuf>, Failure> {
    need(dir)?;
    if is_scenario(dir) {
        return Ok(vec![dir.to_path_buf()]);
    }
    let mut v: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(invalid)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| is_scenario(p))
        .collect();
    v.sort();
    if v.is_empty() {
        return Err(Failure::Usage(format!(
            "{}: no scenario found",
            dir.display()
        )));
    }
    Ok(v)
}

fn cmd_synth(g: &Global, benchmarks: &[String]) -> Outcome {
    if benchmarks.is_empty() {
        return Err(Failure::Usage("name at least one benchmark".into()));
    }
    let bundled = bundled_benchmarks();
    let mut insts = Vec::new();
    for b in benchmarks {
        if b == "all" {
            insts.extend(bundled.iter().map(|(i, _)| i.clone()));
        } else if let Some((i, _)) = bundled.iter().find(|(i, _)| &i.name == b) {
            insts.push(i.clone());
        } else {
            let p = Path::new(b);
            need(p)?;
            insts.push(load_benchmark(p).map_err(invalid)?);
        }
    }
    for inst in insts {
        let s = synthesize_scenario(&inst, g.seed);
        let dir = g.out.join(s.scenario_id());
        write_scenario(&s, &dir).map_err(invalid)?;
        println!("{}", dir.display());
    }
    Ok(())
}

fn read_corpus(dir: &Path) -> Result<Vec<ProcedureDoc>, Failure> {
    need(dir)?;
    let dir = if dir.join("corpus").is_dir() {
        dir.join("corpus")
    } else {
        dir.to_path_buf()
    };
    let mut docs = Vec::new();
    for p in files::json_files(&dir).map_err(invalid)? {
        docs.push(read(&p)?);
    }
    if docs.is_empty() {
        return Err(Failure::Usage(format!(
            "{}: no procedure documents",
            dir.display()
        )));
    }
    Ok(docs)
}

#[allow(clippy::too_many_arguments)]
fn cmd_adapt(
    g: &Global,
    corpus: &Path,
    prior: Option<&Path>,
    config: Option<&Path>,
    overrides: [Option<f64>; 3],
    counts: [Option<usize>; 4],
) -> Outcome {
    let docs = read_corpus(corpus)?;
    let prior = match prior {
        Some(p) => {
            need(p)?;
            let text = files::read_text(p).map_err(invalid)?;
            serde_json::from_str(&text).map_err(|e| invalid(format!("{}: {e}", p.display())))?
        }
        None => PriorKnowledge::bundled(),
    };
    let mut cfg: AdaptationConfig = match config {
        Some(p) => {
            need(p)?;
            let text = files::read_text(p).map_err(invalid)?;
            serde_json::from_str(&text).map_err(|e| invalid(format!("{}: {e}", p.display())))?
        }
        None => AdaptationConfig::default(),
    };
    cfg.seed = g.seed;
    let [alpha, conv_tol, tau_alias] = overrides;
    let [max_iters, burn_in, em_max_iters, window] = counts;
    cfg.alpha = alpha.unwrap_or(cfg.alpha);
    cfg.conv_tol = conv_tol.unwrap_or(cfg.conv_tol);
    cfg.tau_alias = tau_alias.unwrap_or(cfg.tau_alias);
    cfg.max_iters = max_iters.unwrap_or(cfg.max_iters);
    cfg.burn_in = burn_in.unwrap_or(cfg.burn_in);
    cfg.em_max_iters = em_max_iters.unwrap_or(cfg.em_max_iters);
    cfg.window = window.unwrap_or(cfg.window);
    let a = adapt(&docs, &prior, &cfg).map_err(|e| Failure::Usage(e.to_string()))?;
    put(&g.out.join("scenario.dsl.json"), &a.dsl)?;
    put(
        &g.out.join("adaptation_report.json"),
        &serde_json::json!({ "report": a.report, "em_state": a.em_state, "config": cfg }),
    )?;
    if !a.report.dsl_problems.is_empty() {
        return Err(invalid(a.report.dsl_problems.join("\n")));
    }
    let c = &a.report.coverage;
    if c.matched < c.actions {
        warn!(
            "{} of {} actions unmatched under the adapted dsl",
            c.actions - c.matched,
            c.actions
        );
    }
    Ok(())
}

fn read_dsl(path: &Path) -> Result<DslDefinition, Failure> {
    let d: DslDefinition = read(path)?;
    let r = validate_dsl(&d);
    if !r.is_empty() {
        return Err(invalid(format!("{}:\n{r}", path.display())));
    }
    Ok(d)
}

fn read_doc(path: &Path) -> Result<ProcedureDoc, Failure> {
    if path.extension().is_some_and(|e| e == "json") {
        return read(path);
    }
    need(path)?;
    let text = files::read_text(path).map_err(invalid)?;
    let id = path
        .file_stem()
        .map_or("doc".into(), |s| s.to_string_lossy().into_owned());
    Ok(ProcedureDoc::from_text(id, &text))
}

fn cmd_abstract(g: &Global, docs: &[PathBuf], dsl: &Path) -> Outcome {
    let d = read_dsl(dsl)?;
    let paths = expand(docs)?;
    let extractor = RuleExtractor::from_dsl(&d);
    let mut errors = Vec::new();
    for p in paths {
        let doc = read_doc(&p)?;
        match synthesize_program(&doc, &d, &extractor, &MatchConfig::default()) {
            Ok(prog) => {
                put(
                    &g.out.join("programs").join(format!("{}.json", prog.job_id)),
                    &prog,
                )?;
                let sheet = program_to_route_sheet(&prog, &d);
                put(
                    &g.out
                        .join("route_sheets")
                        .join(format!("{}.json", sheet.job_id)),
                    &sheet,
                )?;
            }
            Err(e) => errors.push(format!("{}: {e}", p.display())),
        }
    }
    if errors.is_empty() {
        Ok(())
    } else {
        Err(invalid(errors.join("\n")))
    }
}

fn read_programs(paths: &[PathBuf]) -> Result<Vec<DualProgram>, Failure> {
    let mut progs: Vec<DualProgram> = expand(paths)?
        .iter()
        .map(|p| read(p))
        .collect::<Result<_, _>>()?;
    progs.sort_by(|a, b| a.job_id.cmp(&b.job_id));
    Ok(progs)
}

fn cmd_constraints(g: &Global, programs: &[PathBuf], dsl: &Path) -> Outcome {
    let d = read_dsl(dsl)?;
    let progs = read_programs(programs)?;
    let v = verify_and_generate(&progs, &d).map_err(invalid)?;
    put(&g.out.join("constraints.json"), &v.constraints)?;
    put(&g.out.join("verifier_trace.json"), &v.trace)?;
    let (input, mapping) = to_solver_input(&v.constraints, &progs, &d).map_err(invalid)?;
    put(&g.out.join("solver_input.json"), &input)?;
    put(&g.out.join("mapping.json"), &mapping)?;
    let r = validate_solver_input(&input);
    if r.is_empty() {
        Ok(())
    } else {
        Err(invalid(r))
    }
}

fn cmd_solve(g: &Global, path: &Path) -> Outcome {
    let input: SolverInput = read(path)?;
    let s = solve(&input, &solver_config(g)).map_err(invalid)?;
    put(&g.out.join("schedule.json"), &s)?;
    println!("{:?} makespan {}", s.status, s.makespan);
    if s.status == SolveStatus::Infeasible {
        return Err(invalid("precedence constraints are circular"));
    }
    Ok(())
}

fn cmd_ground(
    g: &Global,
    schedule: &Path,
    programs: &[PathBuf],
    dsl: &Path,
    mapping: &Path,
    scenario_id: &str,
    gantt: bool,
) -> Outcome {
    let s: Schedule = read(schedule)?;
    let progs = read_programs(programs)?;
    let d = read_dsl(dsl)?;
    let m: SolverMapping = read(mapping)?;
    let plan = ground(&s, &progs, &d, &m, &plan_id(scenario_id), scenario_id).map_err(invalid)?;
    put(&g.out.join("plan.json"), &plan)?;
    if gantt {
        put_text(
            &g.out.join("gantt.svg"),
            &emit_gantt(&Gantt::from_plan(&plan, &d)),
        )?;
    }
    Ok(())
}

fn gold_outputs(dir: &Path) -> Result<Option<ScenarioOutputs>, Failure> {
    if !dir.join("gold").is_dir() {
        return Ok(None);
    }
    let s = read_scenario(dir).map_err(invalid)?;
    Ok(Some(ScenarioOutputs {
        route_sheets: s.gold.route_sheets,
        constraints: Some(s.gold.constraints),
        plan: Some(s.gold.plan),
    }))
}

fn write_metrics(dir: &Path, report: &MetricReport) -> Outcome {
    put_text(
        &dir.join("metrics.json"),
        &report.to_canonical().map_err(invalid)?,
    )?;
    put_text(&dir.join("metrics.csv"), &report.to_csv())
}

fn cmd_pipeline(g: &Global, scenario: &Path, dsl: Option<&Path>) -> Outcome {
    let dirs = scenario_dirs(scenario)?;
    let override_dsl = dsl.map(read_dsl).transpose()?;
    let cfg = PipelineConfig {
        solver: solver_config(g),
        matching: MatchConfig::default(),
    };
    let results: Vec<Result<(Vec<ScenarioMetrics>, Vec<RunRecord>, Vec<String>), Failure>> =
        std::thread::scope(|scope| {
            let handles: Vec<_> = dirs
                .iter()
                .map(|dir| {
                    let (cfg, override_dsl) = (&cfg, &override_dsl);
                    scope.spawn(move || {
                        let s = read_scenario_inputs(dir)?;
                        let d = override_dsl.clone().unwrap_or(s.1);
                        let run = run_pipeline(&s.0, &s.2, &d, cfg);
                        let out = g.out.join(&s.0);
                        run.write(&out, &d).map_err(invalid)?;
                        let failures = run
                            .failures
                            .iter()
                            .map(|f| format!("{}: {}", s.0, f.message))
                            .collect();
                        let mut metrics = Vec::new();
                        if let Some(gold) = gold_outputs(dir)? {
                            let m = score_scenario(&s.0, &run.outputs(), &gold, &run.runs);
                            write_metrics(
                                &out,
                                &MetricReport::aggregate(vec![m.clone()], &run.runs),
                            )?;
                            metrics.push(m);
                        }
                        Ok((metrics, run.runs, failures))
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("pipeline worker panicked"))
                .collect()
        });
    let mut all_metrics = Vec::new();
    let mut all_runs = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        let (m, runs, f) = r?;
        all_metrics.extend(m);
        all_runs.extend(runs);
        failures.extend(f);
    }
    if !all_metrics.is_empty() {
        let report = MetricReport::aggregate(all_metrics, &all_runs);
        write_metrics(&g.out, &report)?;
        let a = &report.aggregate;
        println!(
            "scenarios {} route_f1 {:.4} plan_f1 {:.4} constraint_acc {:.4} compiler_er {:.4} runtime_er {:.4}",
            a.n_scenarios, a.route_sheet.emkvp_f1, a.plan.emkvp_f1, a.constraint_acc, a.compiler_er, a.runtime_er
        );
    }
    if failures.is_empty() {
        Ok(())
    } else {
        Err(invalid(failures.join("\n")))
    }
}

/// `(scenario_id, dsl, corpus)` of a scenario directory.
fn read_scenario_inputs(dir: &Path) -> Result<(String, DslDefinition, Vec<ProcedureDoc>), Failure> {
    let meta: shopspec::synth::ScenarioMeta = read(&dir.join("scenario.json"))?;
    let d = read_dsl(&dir.join("scenario.dsl.json"))?;
    Ok((meta.scenario_id, d, read_corpus(dir)?))
}

fn read_pred(dir: &Path) -> Result<(String, ScenarioOutputs, Vec<RunRecord>), Failure> {
    let log: RunLog = read(&dir.join("run_log.json"))?;
    let sheets_dir = dir.join("route_sheets");
    let route_sheets = if sheets_dir.is_dir() {
        files::json_files(&sheets_dir)
            .map_err(invalid)?
            .iter()
            .map(|p| read(p))
            .collect::<Result<_, _>>()?
    } else {
        Vec::new()
    };
    let opt = |name: &str| dir.join(name).is_file().then(|| dir.join(name));
    Ok((
        log.scenario_id,
        ScenarioOutputs {
            route_sheets,
            constraints: opt("constraints.json").map(|p| read(&p)).transpose()?,
            plan: opt("plan.json").map(|p| read(&p)).transpose()?,
        },
        log.runs,
    ))
}

fn cmd_eval(g: &Global, pred: &Path, gold: &Path) -> Outcome {
    need(pred)?;
    let gold_dirs = scenario_dirs(gold)?;
    let pred_dirs: Vec<PathBuf> = if pred.join("run_log.json").is_file() {
        vec![pred.to_path_buf()]
    } else {
        let mut v: Vec<PathBuf> = std::fs::read_dir(pred)
            .map_err(invalid)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.join("run_log.json").is_file())
            .collect();
        v.sort();
        v
    };
    let mut preds = Vec::new();
    for p in &pred_dirs {
        preds.push(read_pred(p)?);
    }
    let mut scenarios = Vec::new();
    let mut runs = Vec::new();
    let mut missing = Vec::new();
    for dir in &gold_dirs {
        let meta: shopspec::synth::ScenarioMeta = read(&dir.join("scenario.json"))?;
        let gold = gold_outputs(dir)?
            .ok_or_else(|| Failure::Usage(format!("{}: no gold/", dir.display())))?;
        match preds.iter().find(|p| p.0 == meta.scenario_id) {
            Some((id, out, r)) => {
                scenarios.push(score_scenario(id, out, &gold, r));
                runs.extend(r.iter().cloned());
            }
            None => missing.push(meta.scenario_id),
        }
    }
    if scenarios.is_empty() {
        return Err(Failure::Usage(
            "no prediction matches a gold scenario".into(),
        ));
    }
    let report = MetricReport::aggregate(scenarios, &runs);
    write_metrics(&g.out, &report)?;
    print!("{}", report.to_csv());
    if missing.is_empty() {
        Ok(())
    } else {
        Err(invalid(format!(
            "no predictions for {}",
            missing.join(", ")
        )))
    }
}

fn dispatch(cli: &Cli) -> Outcome {
    let g = &cli.global;
    match &cli.command {
        Command::Synth { benchmarks } => cmd_synth(g, benchmarks),
        Command::Adapt {
            corpus,
            prior,
            config,
            alpha,
            max_iters,
            burn_in,
            em_max_iters,
            conv_tol,
            tau_alias,
            window,
        } => cmd_adapt(
            g,
            corpus,
            prior.as_deref(),
            config.as_deref(),
            [*alpha, *conv_tol, *tau_alias],
            [*max_iters, *burn_in, *em_max_iters, *window],
        ),
        Command::Abstract { docs, dsl } => cmd_abstract(g, docs, dsl),
        Command::Constraints { programs, dsl } => cmd_constraints(g, programs, dsl),
        Command::Solve { solver_input } => cmd_solve(g, solver_input),
        Command::Ground {
            schedule,
            programs,
            dsl,
            mapping,
            scenario_id,
            gantt,
        } => cmd_ground(g, schedule, programs, dsl, mapping, scenario_id, *gantt),
        Command::Pipeline { scenario, dsl } => cmd_pipeline(g, scenario, dsl.as_deref()),
        Command::Eval { pred, gold } => cmd_eval(g, pred, gold),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .filter_level(cli.global.log_level)
        .init();
    let error_path = cli.global.out.join("error.json");
    match dispatch(&cli) {
        Ok(()) => {
            if error_path.is_file() {
                let _ = std::fs::remove_file(&error_path);
            }
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("error: {}", f.message());
            let body = serde_json::json!({
                "exit_code": f.code(),
                "kind": if f.code() == 2 { "usage" } else { "validation" },
                "message": f.message(),
            });
            if let Ok(text) = canonical::to_versioned_string(&body) {
                let _ = files::write_text(&error_path, &text);
            }
            ExitCode::from(f.code())
        }
    }
}
