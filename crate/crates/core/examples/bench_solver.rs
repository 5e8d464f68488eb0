use std::path::Path;
use std::time::Instant;

use shopspec::solver::{solve, SolverConfig};
use shopspec::synth::load_benchmark;

fn main() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/benchmarks");
    let names: Vec<String> = std::env::args().skip(1).collect();
    for name in [
        "ft06", "la01", "la02", "la03", "la04", "la05", "la06", "la11", "abz5", "orb01",
    ] {
        if !names.is_empty() && !names.iter().any(|n| n == name) {
            continue;
        }
        let inst = load_benchmark(&dir.join(format!("{name}.jsp"))).unwrap();
        let t = Instant::now();
        let s = solve(&inst.to_solver_input(), &SolverConfig::default()).unwrap();
        println!(
            "{name}: makespan {} lb {} {:?} nodes {} in {:.2}s",
            s.makespan,
            s.lower_bound,
            s.status,
            s.nodes,
            t.elapsed().as_secs_f64()
        );
    }
}
