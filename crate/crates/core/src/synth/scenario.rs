use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::benchmark::BenchmarkInstance;
use super::dependency::{build_dependency_superset, job_id, DependencySet, DeviceAssignment};
use super::template::{render_row, render_sentence, StepText};
use super::vocab::Vocab;
use crate::abstraction::{program_to_route_sheet, ProcedureDoc, RouteSheet};
use crate::canonical::{self, CanonicalError};
use crate::constraints::{
    to_solver_input, verify_and_generate, ConstraintSet, SolverInput, SolverMapping,
};
use crate::dsl::{
    DslDefinition, DualProgram, ExecContext, FlowGrammar, FlowRequirement, FlowUnitDef,
    FlowUnitInstance, Interface, MachineDef, OperationDef, OperationInstance, ParamSpec,
    ParamValue,
};
use crate::files;
use crate::grounding::{ground, ProductionPlan};
use crate::solver::{solve, Schedule, SolverConfig};

/// Reference outputs for every pipeline stage.
#[derive(Clone, Debug, PartialEq)]
pub struct GoldArtifacts {
    pub programs: Vec<DualProgram>,
    pub route_sheets: Vec<RouteSheet>,
    pub constraints: ConstraintSet,
    pub solver_input: SolverInput,
    pub mapping: SolverMapping,
    pub dependencies: DependencySet,
    pub devices: Vec<DeviceAssignment>,
    pub schedule: Schedule,
    pub plan: ProductionPlan,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioMeta {
    pub scenario_id: String,
    pub benchmark: String,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub meta: ScenarioMeta,
    pub dsl: DslDefinition,
    /// Even job positions are natural-language docs, odd ones tables.
    pub corpus: Vec<ProcedureDoc>,
    pub gold: GoldArtifacts,
}

impl Scenario {
    pub fn scenario_id(&self) -> &str {
        &self.meta.scenario_id
    }
}

pub fn plan_id(scenario_id: &str) -> String {
    format!("{scenario_id}-plan")
}

pub(crate) fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0100_0000_01b3)
    })
}

struct JobDraft {
    text: Vec<StepText>,
    program: DualProgram,
}

/// Dresses `inst` as a production scenario. Machine `k` becomes device
/// `M{k}` running one operation type; each job gets a product, a raw blank
/// and one intermediate per step; kept extra dependency edges become a
/// second consumer of the earlier step's output.
pub fn synthesize_scenario(inst: &BenchmarkInstance, seed: u64) -> Scenario {
    let vocab = Vocab::bundled();
    let scenario_id = format!("{}-s{seed}", inst.name);
    let base = seed ^ fnv1a(&inst.name);
    let (devices, dependencies) = build_dependency_superset(inst, &vocab.device_names(), base);
    let rng = &mut ChaCha8Rng::seed_from_u64(base.wrapping_add(1));

    assert!(
        inst.n_jobs <= vocab.products.len(),
        "more jobs than bundled products"
    );
    let mut products: Vec<&String> = vocab.products.iter().collect();
    products.shuffle(rng);

    let entry_of = |m: usize| {
        vocab
            .by_device(&devices[m].device)
            .expect("device comes from the bank")
    };
    let mut dsl = DslDefinition {
        machine_catalog: devices
            .iter()
            .map(|d| MachineDef {
                machine_id: d.machine_id.clone(),
                name: d.device.clone(),
                solver_index: d.solver_index,
            })
            .collect(),
        ..DslDefinition::default()
    };
    for m in 0..inst.n_machines {
        let e = entry_of(m);
        dsl.operation_defs.insert(
            e.identifier.clone(),
            OperationDef {
                identifier: e.identifier.clone(),
                aliases: e.aliases.iter().cloned().collect(),
                interfaces: Vec::new(),
            },
        );
    }
    let materials = ParamSpec::discrete(vocab.materials.iter().map(ParamValue::text), "");

    let mut extra_consumers: BTreeMap<(String, usize), BTreeSet<usize>> = BTreeMap::new();
    for e in dependencies.extra() {
        extra_consumers
            .entry((e.before.job_id.clone(), e.before.step_index))
            .or_default()
            .insert(e.after.step_index);
    }

    let mut drafts = Vec::with_capacity(inst.n_jobs);
    for (j, ops) in inst.matrix.iter().enumerate() {
        let jid = job_id(j);
        let product = products[j].as_str();
        let material = vocab.materials[rng.gen_range(0..vocab.materials.len())].clone();
        let blank = format!("{product} blank");
        dsl.flow_unit_defs.insert(
            blank.clone(),
            FlowUnitDef {
                identifier: blank.clone(),
                properties: [("material".to_string(), materials.clone())].into(),
                aliases: BTreeSet::new(),
            },
        );
        let mut outputs: Vec<String> = Vec::with_capacity(ops.len());
        for (k, &(m, _)) in ops.iter().enumerate() {
            let mut name = format!("{} {product}", entry_of(m).participle);
            if outputs.contains(&name) || dsl.flow_unit_defs.contains_key(&name) {
                name = format!("{name} stage {}", k + 1);
            }
            dsl.flow_unit_defs.insert(
                name.clone(),
                FlowUnitDef {
                    identifier: name.clone(),
                    properties: BTreeMap::new(),
                    aliases: BTreeSet::new(),
                },
            );
            outputs.push(name);
        }

        let mut units = vec![FlowUnitInstance {
            unit_id: String::new(),
            flow_def: blank.clone(),
            producers: BTreeSet::new(),
            consumers: [0].into(),
            raw_material: true,
            final_product: false,
            prop_values: [("material".to_string(), ParamValue::text(material.as_str()))].into(),
        }];
        let mut consumed: Vec<Vec<String>> = vec![Vec::new(); ops.len()];
        consumed[0].push(blank.clone());
        for k in 0..ops.len() {
            let mut consumers: BTreeSet<usize> = extra_consumers
                .get(&(jid.clone(), k))
                .cloned()
                .unwrap_or_default();
            if k + 1 < ops.len() {
                consumers.insert(k + 1);
            }
            for &c in &consumers {
                consumed[c].push(outputs[k].clone());
            }
            units.push(FlowUnitInstance {
                unit_id: String::new(),
                flow_def: outputs[k].clone(),
                producers: [k].into(),
                final_product: consumers.is_empty(),
                consumers,
                raw_material: false,
                prop_values: BTreeMap::new(),
            });
        }

        let mut steps = Vec::with_capacity(ops.len());
        let mut text = Vec::with_capacity(ops.len());
        for (k, &(m, dur)) in ops.iter().enumerate() {
            let e = entry_of(m);
            let mut pre = consumed[k].clone();
            pre.sort();
            let params: Vec<(String, ParamValue, String)> = e
                .params
                .iter()
                .map(|p| (p.name().to_string(), p.sample(rng), p.unit().to_string()))
                .collect();
            let op = dsl
                .operation_defs
                .get_mut(&e.identifier)
                .expect("op inserted above");
            op.interfaces.push(Interface {
                preconditions: pre.iter().map(FlowRequirement::single).collect(),
                postconditions: vec![FlowRequirement::single(outputs[k].as_str())],
                exec_contexts: vec![ExecContext {
                    machine: devices[m].machine_id.clone(),
                    duration: dur,
                    params: e
                        .params
                        .iter()
                        .map(|p| (p.name().to_string(), p.spec()))
                        .collect(),
                }],
            });
            steps.push(OperationInstance {
                step_index: k,
                op_id: e.identifier.clone(),
                interface_index: op.interfaces.len() - 1,
                context_index: 0,
                bound_params: params
                    .iter()
                    .map(|(n, v, _)| (n.clone(), v.clone()))
                    .collect(),
            });
            // the chain input first, extra inputs after it
            let chain_in = if k == 0 {
                blank.clone()
            } else {
                outputs[k - 1].clone()
            };
            let mut inputs: Vec<String> = consumed[k]
                .iter()
                .filter(|i| **i != chain_in)
                .cloned()
                .collect();
            inputs.sort();
            inputs.insert(0, chain_in);
            let inputs = inputs
                .into_iter()
                .map(|i| {
                    if i == blank {
                        format!("{i} (material: {material})")
                    } else {
                        i
                    }
                })
                .collect();
            text.push(StepText {
                verb: e.verb.clone(),
                participle: e.participle.clone(),
                gerund: e.identifier.to_lowercase(),
                machine: e.device.clone(),
                duration: dur,
                inputs,
                outputs: vec![outputs[k].clone()],
                params,
            });
        }
        let mut program = DualProgram {
            job_id: jid,
            steps,
            flow_units: units,
        };
        program.canonicalize_units();
        drafts.push(JobDraft { text, program });
    }

    let max_succ = drafts
        .iter()
        .flat_map(|d| d.program.flow_units.iter().map(|u| u.consumers.len()))
        .max()
        .unwrap_or(1)
        .max(1);
    dsl.flow_grammar = FlowGrammar::with_bounds(1, max_succ as u32);

    let mut corpus = Vec::with_capacity(drafts.len());
    for (j, d) in drafts.iter().enumerate() {
        let id = d.program.job_id.clone();
        corpus.push(if j % 2 == 0 {
            let sentences = d
                .text
                .iter()
                .map(|s| {
                    render_sentence(&vocab.templates[rng.gen_range(0..vocab.templates.len())], s)
                })
                .collect();
            ProcedureDoc::natural(id, sentences)
        } else {
            ProcedureDoc::semi_structured(id, d.text.iter().map(render_row).collect())
        });
    }

    let programs: Vec<DualProgram> = drafts.into_iter().map(|d| d.program).collect();
    let gold = gold_artifacts(&scenario_id, &dsl, programs, dependencies, devices);
    for (row, want) in gold.solver_input.jobs.iter().zip(&inst.matrix) {
        assert_eq!(
            &row.ops, want,
            "gold solver input diverges from the benchmark"
        );
    }
    Scenario {
        meta: ScenarioMeta {
            scenario_id,
            benchmark: inst.name.clone(),
            seed,
        },
        dsl,
        corpus,
        gold,
    }
}

fn gold_artifacts(
    scenario_id: &str,
    dsl: &DslDefinition,
    programs: Vec<DualProgram>,
    dependencies: DependencySet,
    devices: Vec<DeviceAssignment>,
) -> GoldArtifacts {
    let report = crate::dsl::validate_dsl(dsl);
    assert!(report.is_empty(), "synthesized dsl is invalid:\n{report}");
    for p in &programs {
        let r = crate::dsl::validate_program(p, dsl);
        assert!(r.is_empty(), "gold program {} is invalid:\n{r}", p.job_id);
    }
    let constraints = verify_and_generate(&programs, dsl)
        .expect("gold programs verify")
        .constraints;
    let (solver_input, mapping) =
        to_solver_input(&constraints, &programs, dsl).expect("gold constraints map");
    let schedule =
        solve(&solver_input, &SolverConfig::default()).expect("gold solver input is valid");
    let plan = ground(
        &schedule,
        &programs,
        dsl,
        &mapping,
        &plan_id(scenario_id),
        scenario_id,
    )
    .expect("gold schedule grounds");
    GoldArtifacts {
        route_sheets: programs
            .iter()
            .map(|p| program_to_route_sheet(p, dsl))
            .collect(),
        programs,
        constraints,
        solver_input,
        mapping,
        dependencies,
        devices,
        schedule,
        plan,
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("{path}: {source}")]
    Canonical {
        path: String,
        #[source]
        source: CanonicalError,
    },
}

#[derive(Serialize, Deserialize)]
struct DeviceTable {
    devices: Vec<DeviceAssignment>,
}

fn put<T: Serialize>(path: &Path, x: &T) -> Result<(), ScenarioError> {
    let text = canonical::to_versioned_string(x).map_err(|source| ScenarioError::Canonical {
        path: path.display().to_string(),
        source,
    })?;
    files::write_text(path, &text)?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, ScenarioError> {
    let text = files::read_text(path)?;
    canonical::from_versioned_str(&text).map_err(|source| ScenarioError::Canonical {
        path: path.display().to_string(),
        source,
    })
}

fn read_dir_json<T: DeserializeOwned>(dir: &Path) -> Result<Vec<T>, ScenarioError> {
    files::json_files(dir)?
        .iter()
        .map(|p| read_json(p))
        .collect()
}

/// Layout: `scenario.json`, `scenario.dsl.json`, `corpus/<job>.json` and
/// `gold/` with per-job `programs/` and `route_sheets/` plus
/// `constraints`, `solver_input`, `mapping`, `dependencies`, `devices`,
/// `schedule` and `plan`.
pub fn write_scenario(s: &Scenario, dir: &Path) -> Result<(), ScenarioError> {
    put(&dir.join("scenario.json"), &s.meta)?;
    put(&dir.join("scenario.dsl.json"), &s.dsl)?;
    for d in &s.corpus {
        put(&dir.join("corpus").join(format!("{}.json", d.doc_id)), d)?;
    }
    let g = dir.join("gold");
    for p in &s.gold.programs {
        put(&g.join("programs").join(format!("{}.json", p.job_id)), p)?;
    }
    for r in &s.gold.route_sheets {
        put(
            &g.join("route_sheets").join(format!("{}.json", r.job_id)),
            r,
        )?;
    }
    put(&g.join("constraints.json"), &s.gold.constraints)?;
    put(&g.join("solver_input.json"), &s.gold.solver_input)?;
    put(&g.join("mapping.json"), &s.gold.mapping)?;
    put(&g.join("dependencies.json"), &s.gold.dependencies)?;
    put(
        &g.join("devices.json"),
        &DeviceTable {
            devices: s.gold.devices.clone(),
        },
    )?;
    put(&g.join("schedule.json"), &s.gold.schedule)?;
    put(&g.join("plan.json"), &s.gold.plan)?;
    Ok(())
}

pub fn read_scenario(dir: &Path) -> Result<Scenario, ScenarioError> {
    let g: PathBuf = dir.join("gold");
    Ok(Scenario {
        meta: read_json(&dir.join("scenario.json"))?,
        dsl: read_json(&dir.join("scenario.dsl.json"))?,
        corpus: read_dir_json(&dir.join("corpus"))?,
        gold: GoldArtifacts {
            programs: read_dir_json(&g.join("programs"))?,
            route_sheets: read_dir_json(&g.join("route_sheets"))?,
            constraints: read_json(&g.join("constraints.json"))?,
            solver_input: read_json(&g.join("solver_input.json"))?,
            mapping: read_json(&g.join("mapping.json"))?,
            dependencies: read_json(&g.join("dependencies.json"))?,
            devices: read_json::<DeviceTable>(&g.join("devices.json"))?.devices,
            schedule: read_json(&g.join("schedule.json"))?,
            plan: read_json(&g.join("plan.json"))?,
        },
    })
}
