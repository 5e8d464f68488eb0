mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use shopspec::canonical::CanonicalError;
use shopspec::dsl::{
    validate_dsl, validate_program, DslDefinition, DualProgram, ExecContext, FlowGrammar,
    FlowRequirement, FlowUnitDef, FlowUnitInstance, Interface, MachineDef, OperationDef,
    OperationInstance, ParamSpec, ParamValue,
};
use shopspec::synth::{load_benchmark, synthesize_scenario};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn read_fixture(name: &str) -> String {
    std::fs::read_to_string(fixture(name)).unwrap()
}

#[test]
fn golden_dsl_parses_to_the_synthesized_value() {
    let text = read_fixture("toy.dsl.json");
    let d = DslDefinition::from_canonical(&text).unwrap();
    let s = synthesize_scenario(&load_benchmark(&fixture("toy.jsp")).unwrap(), 0);
    assert_eq!(d, s.dsl);
    assert!(validate_dsl(&d).is_empty());
    assert_eq!(d.to_canonical().unwrap(), text);
}

#[test]
fn golden_program_parses_and_validates() {
    let text = read_fixture("toy.J01.program.json");
    let p = DualProgram::from_canonical(&text).unwrap();
    let d = DslDefinition::from_canonical(&read_fixture("toy.dsl.json")).unwrap();
    assert_eq!(p.job_id, "J01");
    assert!(validate_program(&p, &d).is_empty());
    assert_eq!(p.to_canonical().unwrap(), text);
}

#[test]
fn truncated_document_reports_the_truncation_point() {
    let text = read_fixture("toy.dsl.json");
    let cut: String = text.lines().take(40).collect::<Vec<_>>().join("\n");
    match DslDefinition::from_canonical(&cut) {
        Err(CanonicalError::Parse { line, .. }) => assert_eq!(line, 40),
        other => panic!("expected a parse error, got {other:?}"),
    }
}

#[test]
fn wrong_schema_version_is_rejected() {
    let text = read_fixture("toy.J01.program.json")
        .replace("\"schema_version\": 1", "\"schema_version\": 9");
    assert!(matches!(
        DualProgram::from_canonical(&text),
        Err(CanonicalError::SchemaVersion { found: 9 })
    ));
}

fn one_step_dsl() -> DslDefinition {
    let mut d = DslDefinition::default();
    d.machine_catalog.push(MachineDef {
        machine_id: "M00".into(),
        name: "Vertical Mill".into(),
        solver_index: 0,
    });
    for n in ["blank", "part"] {
        d.flow_unit_defs.insert(
            n.into(),
            FlowUnitDef {
                identifier: n.into(),
                properties: BTreeMap::new(),
                aliases: BTreeSet::new(),
            },
        );
    }
    d.operation_defs.insert(
        "Milling".into(),
        OperationDef {
            identifier: "Milling".into(),
            aliases: BTreeSet::new(),
            interfaces: vec![Interface {
                preconditions: vec![FlowRequirement::single("blank")],
                postconditions: vec![FlowRequirement::single("part")],
                exec_contexts: vec![ExecContext {
                    machine: "M00".into(),
                    duration: 5,
                    params: [(
                        "speed".to_string(),
                        ParamSpec::continuous(100.0, 200.0, "rpm"),
                    )]
                    .into(),
                }],
            }],
        },
    );
    d
}

fn one_step_program() -> DualProgram {
    let unit = |id: &str, def: &str, p: &[usize], c: &[usize]| FlowUnitInstance {
        unit_id: id.into(),
        flow_def: def.into(),
        producers: p.iter().copied().collect(),
        consumers: c.iter().copied().collect(),
        raw_material: p.is_empty(),
        final_product: c.is_empty(),
        prop_values: BTreeMap::new(),
    };
    DualProgram {
        job_id: "J01".into(),
        steps: vec![OperationInstance {
            step_index: 0,
            op_id: "Milling".into(),
            interface_index: 0,
            context_index: 0,
            bound_params: [("speed".to_string(), ParamValue::Int(150))].into(),
        }],
        flow_units: vec![
            unit("u0", "blank", &[], &[0]),
            unit("u1", "part", &[0], &[]),
        ],
    }
}

#[test]
fn single_step_program_is_valid() {
    assert!(validate_program(&one_step_program(), &one_step_dsl()).is_empty());
}

#[test]
fn dangling_consumer_is_reported() {
    let mut p = one_step_program();
    p.flow_units[0].raw_material = false;
    let r = validate_program(&p, &one_step_dsl());
    assert!(r.to_string().contains("dangling consumer"), "{r}");
}

#[test]
fn out_of_domain_parameter_is_reported() {
    let mut p = one_step_program();
    p.steps[0]
        .bound_params
        .insert("speed".into(), ParamValue::Int(250));
    assert!(!validate_program(&p, &one_step_dsl()).is_empty());
}

/// Structural check written against the definition: acyclic (every flow
/// edge points forward), producer/consumer complete and within the pipe
/// bounds.
fn structurally_valid(p: &DualProgram, g: &FlowGrammar) -> bool {
    let n = p.steps.len();
    let ids: BTreeSet<&str> = p.flow_units.iter().map(|u| u.unit_id.as_str()).collect();
    if ids.len() != p.flow_units.len() {
        return false;
    }
    // reachability over chain edges plus flow edges; a cycle exists iff a
    // step reaches itself
    let mut reach = vec![vec![false; n]; n];
    for i in 1..n {
        reach[i - 1][i] = true;
    }
    for u in &p.flow_units {
        if u.producers.iter().chain(&u.consumers).any(|&s| s >= n) {
            return false;
        }
        for &a in &u.producers {
            for &b in &u.consumers {
                reach[a][b] = true;
            }
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if reach[i][k] && reach[k][j] {
                    reach[i][j] = true;
                }
            }
        }
    }
    if (0..n).any(|i| reach[i][i]) {
        return false;
    }
    p.flow_units.iter().all(|u| {
        let touched = !u.producers.is_empty() || !u.consumers.is_empty();
        let complete = touched
            && (u.producers.is_empty() == u.raw_material)
            && (!u.consumers.is_empty() || u.final_product);
        complete
            && u.producers.len() <= g.max_pred as usize
            && u.consumers.len() <= g.max_succ as usize
    })
}

#[test]
fn validate_program_matches_the_graph_checker() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let (mut good, mut bad) = (0, 0);
    for case in 0..2000 {
        let n = rng.gen_range(1..=8);
        let mut progs = vec![common::random_program(&mut rng, "J", n, 3)];
        for _ in 0..rng.gen_range(0..=2) {
            common::perturb(&mut rng, &mut progs);
        }
        let g = FlowGrammar::with_bounds(rng.gen_range(1..=3), rng.gen_range(1..=3));
        let d = common::dsl_for(&progs, g.clone());
        let p = &progs[0];
        let expected = structurally_valid(p, &g);
        let r = validate_program(p, &d);
        assert_eq!(r.is_empty(), expected, "case {case}: {r}\n{p:#?}");
        if expected {
            good += 1;
        } else {
            bad += 1;
        }
    }
    assert!(good > 200 && bad > 200, "{good} valid, {bad} invalid");
}

fn random_value(rng: &mut ChaCha8Rng) -> ParamValue {
    match rng.gen_range(0..3) {
        0 => ParamValue::number(rng.gen_range(-500..500) as f64),
        1 => ParamValue::number(rng.gen_range(-1e4..1e4)),
        _ => ParamValue::text(
            [
                "4140 steel",
                "6061 aluminum",
                "10x20 mm",
                "\"quoted\"",
                "12",
            ]
            .choose(rng)
            .unwrap()
            .to_string(),
        ),
    }
}

fn random_spec(rng: &mut ChaCha8Rng) -> ParamSpec {
    let lo: f64 = rng.gen_range(-100.0..100.0);
    let hi = lo + rng.gen_range(0.0..50.0);
    let vals: Vec<ParamValue> = (0..rng.gen_range(1..4))
        .map(|_| random_value(rng))
        .collect();
    match rng.gen_range(0..3) {
        0 => ParamSpec::discrete(vals, "mm"),
        1 => ParamSpec::continuous(lo, hi, "rpm"),
        _ => ParamSpec::mixed(vals, lo, hi, ""),
    }
}

fn random_dsl(seed: u64) -> DslDefinition {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut d = DslDefinition {
        flow_grammar: FlowGrammar::with_bounds(rng.gen_range(1..=3), rng.gen_range(1..=3)),
        ..DslDefinition::default()
    };
    let n_machines = rng.gen_range(1..=4);
    for m in 0..n_machines {
        d.machine_catalog.push(MachineDef {
            machine_id: format!("M{m:02}"),
            name: format!("Machine {m}"),
            solver_index: m,
        });
    }
    let defs: Vec<String> = (0..rng.gen_range(1..6))
        .map(|k| format!("unit {k}"))
        .collect();
    for def in &defs {
        let properties = (0..rng.gen_range(0..3))
            .map(|k| (format!("p{k}"), random_spec(&mut rng)))
            .collect();
        let aliases = (0..rng.gen_range(0..2))
            .map(|k| format!("{def} alias {k}"))
            .collect();
        d.flow_unit_defs.insert(
            def.clone(),
            FlowUnitDef {
                identifier: def.clone(),
                properties,
                aliases,
            },
        );
    }
    for o in 0..rng.gen_range(0..4) {
        let slot = |rng: &mut ChaCha8Rng| {
            let k = rng.gen_range(1..=defs.len());
            FlowRequirement {
                accepts: defs.choose_multiple(rng, k).cloned().collect(),
            }
        };
        let interfaces = (0..rng.gen_range(1..3))
            .map(|_| Interface {
                preconditions: (0..rng.gen_range(0..3)).map(|_| slot(&mut rng)).collect(),
                postconditions: (0..rng.gen_range(0..3)).map(|_| slot(&mut rng)).collect(),
                exec_contexts: (0..rng.gen_range(1..3))
                    .map(|_| ExecContext {
                        machine: format!("M{:02}", rng.gen_range(0..n_machines)),
                        duration: rng.gen_range(1..100),
                        params: (0..rng.gen_range(0..3))
                            .map(|k| (format!("x{k}"), random_spec(&mut rng)))
                            .collect(),
                    })
                    .collect(),
            })
            .collect();
        d.operation_defs.insert(
            format!("Op{o}"),
            OperationDef {
                identifier: format!("Op{o}"),
                aliases: [format!("op {o}")].into(),
                interfaces,
            },
        );
    }
    d
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 128, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn dsl_round_trips(seed in any::<u64>()) {
        let d = random_dsl(seed);
        let text = d.to_canonical().unwrap();
        let back = DslDefinition::from_canonical(&text).unwrap();
        prop_assert_eq!(&back, &d);
        prop_assert_eq!(back.to_canonical().unwrap(), text);
    }

    #[test]
    fn program_round_trips(seed in any::<u64>(), n in 1usize..=8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = common::random_program(&mut rng, "J07", n, 2);
        for s in &mut p.steps {
            s.bound_params = (0..rng.gen_range(0..3)).map(|k| (format!("x{k}"), random_value(&mut rng))).collect();
        }
        for u in &mut p.flow_units {
            u.prop_values = (0..rng.gen_range(0..2)).map(|k| (format!("p{k}"), random_value(&mut rng))).collect();
        }
        let text = p.to_canonical().unwrap();
        let back = DualProgram::from_canonical(&text).unwrap();
        prop_assert_eq!(&back, &p);
        prop_assert_eq!(back.to_canonical().unwrap(), text);
    }

    #[test]
    fn generated_programs_validate(seed in any::<u64>(), n in 1usize..=8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let progs = vec![common::random_program(&mut rng, "J", n, 2)];
        let d = common::dsl_for(&progs, FlowGrammar::with_bounds(2, 2));
        prop_assert!(validate_dsl(&d).is_empty(), "{}", validate_dsl(&d));
        prop_assert!(validate_program(&progs[0], &d).is_empty());
    }
}
