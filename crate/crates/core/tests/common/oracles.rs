//! Independent reference checks shared by the integration and acceptance
//! tests.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use shopspec::adaptation::{ActionObs, CorpusObservations, FlowSemantics, GibbsReport, UnitObs};
use shopspec::constraints::{OpEdge, OpRef, PrecedencePair, SolverInput, VerifierTrace};
use shopspec::dsl::{DslDefinition, DualProgram, ParamValue};
use shopspec::flow::StepRef;
use shopspec::grounding::{PlanEntry, ProductionPlan};

/// Longest path through the disjunctive graph with every machine sequence
/// fixed, or `None` when the orientation is cyclic.
pub fn longest_path(input: &SolverInput, orders: &[Vec<OpRef>]) -> Option<u64> {
    let ops: Vec<OpRef> = input
        .jobs
        .iter()
        .enumerate()
        .flat_map(|(j, job)| (0..job.ops.len()).map(move |k| OpRef { job: j, op: k }))
        .collect();
    let idx = |r: OpRef| ops.iter().position(|&o| o == r).unwrap();
    let mut succ = vec![Vec::new(); ops.len()];
    for (j, job) in input.jobs.iter().enumerate() {
        for k in 1..job.ops.len() {
            succ[idx(OpRef { job: j, op: k - 1 })].push(idx(OpRef { job: j, op: k }));
        }
    }
    for e in &input.extra_precedence {
        succ[idx(e.before)].push(idx(e.after));
    }
    for seq in orders {
        for w in seq.windows(2) {
            succ[idx(w[0])].push(idx(w[1]));
        }
    }
    let mut indeg = vec![0usize; ops.len()];
    for s in &succ {
        for &b in s {
            indeg[b] += 1;
        }
    }
    let mut ready: Vec<usize> = (0..ops.len()).filter(|&i| indeg[i] == 0).collect();
    let mut start = vec![0u64; ops.len()];
    let mut seen = 0;
    let mut cmax = 0;
    while let Some(a) = ready.pop() {
        seen += 1;
        let end = start[a] + u64::from(input.duration(ops[a]));
        cmax = cmax.max(end);
        for &b in &succ[a] {
            start[b] = start[b].max(end);
            indeg[b] -= 1;
            if indeg[b] == 0 {
                ready.push(b);
            }
        }
    }
    (seen == ops.len()).then_some(cmax)
}

pub fn permutations(xs: &[OpRef]) -> Vec<Vec<OpRef>> {
    if xs.len() <= 1 {
        return vec![xs.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..xs.len() {
        let mut rest = xs.to_vec();
        let x = rest.remove(i);
        for mut p in permutations(&rest) {
            p.insert(0, x);
            out.push(p);
        }
    }
    out
}

/// Optimal makespan by enumerating every machine sequence combination.
pub fn brute_force(input: &SolverInput) -> Option<u64> {
    let mut per_machine: Vec<Vec<OpRef>> = vec![Vec::new(); input.n_machines];
    for (j, job) in input.jobs.iter().enumerate() {
        for (k, &(m, _)) in job.ops.iter().enumerate() {
            per_machine[m].push(OpRef { job: j, op: k });
        }
    }
    let choices: Vec<Vec<Vec<OpRef>>> = per_machine.iter().map(|v| permutations(v)).collect();
    let mut best: Option<u64> = None;
    let mut pick = vec![0usize; choices.len()];
    loop {
        let orders: Vec<Vec<OpRef>> = pick
            .iter()
            .zip(&choices)
            .map(|(&i, c)| c[i].clone())
            .collect();
        if let Some(c) = longest_path(input, &orders) {
            best = Some(best.map_or(c, |b| b.min(c)));
        }
        let mut m = 0;
        loop {
            if m == pick.len() {
                return best;
            }
            pick[m] += 1;
            if pick[m] < choices[m].len() {
                break;
            }
            pick[m] = 0;
            m += 1;
        }
    }
}

pub fn random_jsp(rng: &mut ChaCha8Rng, extra: bool) -> SolverInput {
    let n_machines = rng.gen_range(1..=3);
    let n_jobs = rng.gen_range(1..=3);
    let rows: Vec<Vec<(usize, u32)>> = (0..n_jobs)
        .map(|_| {
            let mut ms: Vec<usize> = (0..n_machines).collect();
            ms.shuffle(rng);
            ms.truncate(rng.gen_range(1..=n_machines));
            ms.into_iter().map(|m| (m, rng.gen_range(1..=9))).collect()
        })
        .collect();
    let mut input = SolverInput::from_matrix(n_machines, &rows);
    if extra && n_jobs > 1 {
        for _ in 0..rng.gen_range(0..=2) {
            let a = rng.gen_range(0..n_jobs);
            let b = (a + rng.gen_range(1..n_jobs)) % n_jobs;
            input.extra_precedence.push(OpEdge {
                before: OpRef {
                    job: a,
                    op: rng.gen_range(0..rows[a].len()),
                },
                after: OpRef {
                    job: b,
                    op: rng.gen_range(0..rows[b].len()),
                },
            });
        }
        input.extra_precedence.sort();
        input.extra_precedence.dedup();
    }
    input
}

/// Producer and consumer step sets of each unit after cross-job linking:
/// a raw unit with no producers takes the producers of every other job's
/// unconsumed final product of the same def.
pub fn linked_units(progs: &[DualProgram]) -> Vec<(BTreeSet<StepRef>, BTreeSet<StepRef>)> {
    let refs = |job: &str, s: &BTreeSet<usize>| {
        s.iter()
            .map(|&i| StepRef::new(job, i))
            .collect::<BTreeSet<_>>()
    };
    let mut out = Vec::new();
    for p in progs {
        for u in &p.flow_units {
            let mut producers = refs(&p.job_id, &u.producers);
            if u.raw_material && u.producers.is_empty() && !u.consumers.is_empty() {
                for q in progs.iter().filter(|q| q.job_id != p.job_id) {
                    for e in &q.flow_units {
                        if e.flow_def == u.flow_def
                            && e.final_product
                            && e.consumers.is_empty()
                            && !e.producers.is_empty()
                        {
                            producers.extend(refs(&q.job_id, &e.producers));
                        }
                    }
                }
            }
            out.push((producers, refs(&p.job_id, &u.consumers)));
        }
    }
    out
}

/// Every (definer, killer) pair, enumerated directly.
pub fn brute_force_pairs(progs: &[DualProgram]) -> BTreeSet<PrecedencePair> {
    let mut pairs = BTreeSet::new();
    for (producers, consumers) in linked_units(progs) {
        for a in &producers {
            for b in &consumers {
                pairs.insert(PrecedencePair {
                    before: a.clone(),
                    after: b.clone(),
                });
            }
        }
    }
    pairs
}

/// Whether each unit has a supply (raw or produced) and a demand (final or
/// consumed), and no step must run after itself.
pub fn balanced(progs: &[DualProgram]) -> bool {
    for u in progs.iter().flat_map(|p| &p.flow_units) {
        if !(u.raw_material || !u.producers.is_empty())
            || !(u.final_product || !u.consumers.is_empty())
        {
            return false;
        }
    }
    let steps: Vec<StepRef> = progs
        .iter()
        .flat_map(|p| (0..p.steps.len()).map(|i| StepRef::new(&p.job_id, i)))
        .collect();
    let mut succ: BTreeMap<&StepRef, BTreeSet<&StepRef>> =
        steps.iter().map(|s| (s, BTreeSet::new())).collect();
    for w in steps.windows(2) {
        if w[0].job_id == w[1].job_id {
            succ.get_mut(&w[0]).unwrap().insert(&w[1]);
        }
    }
    let units = linked_units(progs);
    for (producers, consumers) in &units {
        for a in producers {
            for b in consumers {
                succ.get_mut(a)
                    .unwrap()
                    .insert(steps.iter().find(|s| *s == b).unwrap());
            }
        }
    }
    // depth-first search for a back edge
    fn visit<'a>(
        s: &'a StepRef,
        succ: &BTreeMap<&'a StepRef, BTreeSet<&'a StepRef>>,
        state: &mut BTreeMap<&'a StepRef, u8>,
    ) -> bool {
        match state.get(s) {
            Some(1) => return false,
            Some(2) => return true,
            _ => {}
        }
        state.insert(s, 1);
        for &t in &succ[s] {
            if !visit(t, succ, state) {
                return false;
            }
        }
        state.insert(s, 2);
        true
    }
    let mut state = BTreeMap::new();
    steps.iter().all(|s| visit(s, &succ, &mut state))
}

/// Each precedence pair is backed by a unit the trace shows defined at the
/// first step and killed at the second.
pub fn trace_supports(trace: &VerifierTrace, pairs: &BTreeSet<PrecedencePair>) -> bool {
    let defined: BTreeMap<&StepRef, BTreeSet<&str>> = trace
        .steps
        .iter()
        .map(|s| (&s.step, s.defined.iter().map(|u| u.key.as_str()).collect()))
        .collect();
    let killed: BTreeMap<&StepRef, BTreeSet<&str>> = trace
        .steps
        .iter()
        .map(|s| (&s.step, s.killed.iter().map(|u| u.key.as_str()).collect()))
        .collect();
    pairs.iter().all(|p| {
        defined
            .get(&p.before)
            .zip(killed.get(&p.after))
            .is_some_and(|(d, k)| d.intersection(k).next().is_some())
    })
}

/// Plan checks written from the definitions: each entry lasts its
/// context's duration on its context's machine, machines never overlap,
/// and every flow unit's consumers start after all its producers end,
/// across jobs too.
pub fn plan_violations(
    plan: &ProductionPlan,
    programs: &[DualProgram],
    d: &DslDefinition,
) -> Vec<String> {
    let mut out = Vec::new();
    let at: BTreeMap<(&str, usize), &PlanEntry> = plan
        .entries
        .iter()
        .map(|e| ((e.job_id.as_str(), e.step_index), e))
        .collect();
    let n_steps: usize = programs.iter().map(|p| p.steps.len()).sum();
    if at.len() != n_steps || plan.entries.len() != n_steps {
        out.push(format!(
            "{} entries for {n_steps} steps",
            plan.entries.len()
        ));
    }
    for p in programs {
        for s in &p.steps {
            let Some(e) = at.get(&(p.job_id.as_str(), s.step_index)) else {
                continue;
            };
            let ctx = d
                .context(&s.op_id, s.interface_index, s.context_index)
                .unwrap();
            let machine = &d.machine(&ctx.machine).unwrap().name;
            if e.end - e.start != e.duration || e.duration != u64::from(ctx.duration) {
                out.push(format!(
                    "{}#{} lasts {} not {}",
                    p.job_id,
                    s.step_index,
                    e.end - e.start,
                    ctx.duration
                ));
            }
            if &e.machine != machine {
                out.push(format!(
                    "{}#{} on {} not {machine}",
                    p.job_id, s.step_index, e.machine
                ));
            }
        }
        for u in &p.flow_units {
            for &a in &u.producers {
                for &b in &u.consumers {
                    let (ea, eb) = (at[&(p.job_id.as_str(), a)], at[&(p.job_id.as_str(), b)]);
                    if eb.start < ea.end {
                        out.push(format!(
                            "{} consumed at {}#{b} before produced",
                            u.unit_id, p.job_id
                        ));
                    }
                }
            }
        }
    }
    // cross-job flow: an import may start only after every export of its def
    for p in programs {
        for u in p
            .flow_units
            .iter()
            .filter(|u| u.raw_material && u.producers.is_empty())
        {
            for q in programs.iter().filter(|q| q.job_id != p.job_id) {
                for e in q.flow_units.iter().filter(|e| {
                    e.flow_def == u.flow_def
                        && e.final_product
                        && e.consumers.is_empty()
                        && !e.producers.is_empty()
                }) {
                    for &a in &e.producers {
                        for &b in &u.consumers {
                            if at[&(p.job_id.as_str(), b)].start < at[&(q.job_id.as_str(), a)].end {
                                out.push(format!(
                                    "{}#{b} starts before {}#{a} exports {}",
                                    p.job_id, q.job_id, u.flow_def
                                ));
                            }
                        }
                    }
                }
            }
        }
    }
    let mut by_machine: BTreeMap<&str, Vec<(u64, u64)>> = BTreeMap::new();
    for e in &plan.entries {
        by_machine
            .entry(&e.machine)
            .or_default()
            .push((e.start, e.end));
    }
    for (m, mut v) in by_machine {
        v.sort();
        if v.windows(2).any(|w| w[1].0 < w[0].1) {
            out.push(format!("overlap on {m}"));
        }
    }
    out
}

/// Adjusted Rand index from the pair-counting contingency table.
pub fn ari(a: &[usize], b: &[usize]) -> f64 {
    let c2 = |n: usize| (n * n.saturating_sub(1)) as f64 / 2.0;
    let mut table: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut ra: BTreeMap<usize, usize> = BTreeMap::new();
    let mut rb: BTreeMap<usize, usize> = BTreeMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *table.entry((x, y)).or_default() += 1;
        *ra.entry(x).or_default() += 1;
        *rb.entry(y).or_default() += 1;
    }
    let index: f64 = table.values().map(|&n| c2(n)).sum();
    let sa: f64 = ra.values().map(|&n| c2(n)).sum();
    let sb: f64 = rb.values().map(|&n| c2(n)).sum();
    let expected = sa * sb / c2(a.len());
    let max = (sa + sb) / 2.0;
    if max == expected {
        return 1.0;
    }
    (index - expected) / (max - expected)
}

pub fn smoothed(trace: &[f64], w: usize) -> Vec<f64> {
    trace
        .windows(w)
        .map(|x| x.iter().sum::<f64>() / w as f64)
        .collect()
}

pub fn gibbs_trend_rises(r: &GibbsReport<f64>) -> bool {
    let tail = &r.log_likelihood[r.burn_in.min(r.log_likelihood.len())..];
    if tail.len() < 10 {
        return tail
            .windows(2)
            .all(|w| w[1] >= w[0] - 1e-9 * w[0].abs().max(1.0));
    }
    smoothed(tail, 10)
        .windows(2)
        .all(|w| w[1] >= w[0] - 1e-9 * w[0].abs().max(1.0))
}

pub fn action(step: usize, machine: &str, params: Vec<(&str, f64)>, input: usize) -> ActionObs {
    ActionObs {
        doc: 0,
        step,
        op: "milling".into(),
        machine: machine.into(),
        duration: 10,
        params: params
            .into_iter()
            .map(|(n, v)| (n.to_string(), ParamValue::number(v), None))
            .collect(),
        inputs: vec![input],
        outputs: vec![],
    }
}

/// Three interfaces of one operation: distinct machines and parameter
/// schemas, 30 instances each, means at least 3 sd apart.
pub fn planted(seed: u64) -> (CorpusObservations, FlowSemantics, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows: Vec<(usize, &str, Vec<(&str, f64)>)> = Vec::new();
    let n = |m: f64, s: f64| Normal::new(m, s).unwrap();
    for _ in 0..30 {
        let mut r = &mut rng;
        rows.push((0, "M00", vec![("feed_rate", n(100.0, 2.0).sample(&mut r))]));
        rows.push((
            1,
            "M01",
            vec![
                ("feed_rate", n(300.0, 2.0).sample(&mut r)),
                ("depth", n(5.0, 0.1).sample(&mut r)),
            ],
        ));
        rows.push((
            2,
            "M02",
            vec![("spindle_speed", n(1000.0, 10.0).sample(&mut r))],
        ));
    }
    rows.shuffle(&mut rng);
    let mut obs = CorpusObservations {
        doc_ids: vec!["planted".into()],
        ..Default::default()
    };
    let mut labels = Vec::new();
    for (step, (label, m, params)) in rows.into_iter().enumerate() {
        obs.units.push(UnitObs {
            doc: 0,
            name: "plate".into(),
            producers: BTreeSet::new(),
            consumers: [step].into(),
            producer_ops: BTreeSet::new(),
            consumer_ops: ["milling".to_string()].into(),
            properties: BTreeMap::new(),
        });
        obs.actions.push(action(step, m, params, step));
        labels.push(label);
    }
    let flows = FlowSemantics {
        unit_def: vec!["plate".into(); obs.units.len()],
        ..Default::default()
    };
    (obs, flows, labels)
}
