mod common;

use std::time::Instant;

use common::oracles::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use shopspec::constraints::{OpEdge, OpRef, SolverInput};
use shopspec::solver::{check_schedule, solve, SolveStatus, SolverConfig};
use shopspec::synth::bundled_benchmarks;

#[test]
fn small_instances_match_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let cfg = SolverConfig::default();
    for case in 0..500 {
        let input = random_jsp(&mut rng, case % 2 == 1);
        let s = solve(&input, &cfg).unwrap();
        match brute_force(&input) {
            Some(opt) => {
                assert_eq!(s.status, SolveStatus::Optimal, "case {case}: {input:?}");
                assert_eq!(s.makespan, opt, "case {case}: {input:?}");
                assert!(check_schedule(&s, &input).is_empty(), "case {case}");
            }
            None => assert_eq!(s.status, SolveStatus::Infeasible, "case {case}: {input:?}"),
        }
    }
}

#[test]
fn ft06_is_solved_to_optimality() {
    let (ft06, _) = bundled_benchmarks()
        .into_iter()
        .find(|(b, _)| b.name == "ft06")
        .unwrap();
    let input = ft06.to_solver_input();
    let t = Instant::now();
    let s = solve(&input, &SolverConfig::default()).unwrap();
    let elapsed = t.elapsed().as_secs_f64();
    assert_eq!((s.status, s.makespan), (SolveStatus::Optimal, 55));
    assert!(elapsed < 60.0, "{elapsed:.1}s");
    assert!(check_schedule(&s, &input).is_empty());
}

#[test]
fn empty_input_is_trivially_optimal() {
    let s = solve(&SolverInput::default(), &SolverConfig::default()).unwrap();
    assert_eq!((s.status, s.makespan), (SolveStatus::Optimal, 0));
    assert!(s.entries.is_empty());
}

#[test]
fn reruns_are_identical() {
    let (la01, _) = bundled_benchmarks()
        .into_iter()
        .find(|(b, _)| b.name == "la01")
        .unwrap();
    let input = la01.to_solver_input();
    let cfg = SolverConfig::default();
    assert_eq!(solve(&input, &cfg).unwrap(), solve(&input, &cfg).unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn solver_output_passes_the_checker(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let input = random_jsp(&mut rng, true);
        let s = solve(&input, &SolverConfig::default()).unwrap();
        if s.status != SolveStatus::Infeasible {
            prop_assert!(check_schedule(&s, &input).is_empty());
            let ends = s.entries.iter().map(|e| e.end).max().unwrap_or(0);
            prop_assert_eq!(s.makespan, ends);
        }
    }

    #[test]
    fn extra_precedence_never_shortens_the_optimum(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let input = random_jsp(&mut rng, false);
        prop_assume!(input.jobs.len() > 1);
        let base = solve(&input, &SolverConfig::default()).unwrap();
        let mut tighter = input.clone();
        let a = rng.gen_range(0..input.jobs.len());
        let b = (a + 1) % input.jobs.len();
        tighter.extra_precedence.push(OpEdge {
            before: OpRef { job: a, op: input.jobs[a].ops.len() - 1 },
            after: OpRef { job: b, op: 0 },
        });
        let t = solve(&tighter, &SolverConfig::default()).unwrap();
        prop_assert_eq!(base.status, SolveStatus::Optimal);
        if t.status == SolveStatus::Optimal {
            prop_assert!(t.makespan >= base.makespan);
        }
    }
}
