use std::collections::BTreeSet;

use crate::constraints::SolverInput;

/// Flattened instance: operations numbered job-major.
pub(crate) struct Problem {
    pub n: usize,
    pub n_machines: usize,
    pub machine: Vec<usize>,
    pub dur: Vec<i64>,
    pub pos: Vec<(usize, usize)>,
    pub preds: Vec<Vec<usize>>,
    pub succs: Vec<Vec<usize>>,
    /// Longest path from the end of an operation to the sink.
    pub tail: Vec<i64>,
    /// Work remaining in the operation's job from this operation on.
    pub job_rest: Vec<i64>,
    pub on_machine: Vec<Vec<usize>>,
    pub topo: Vec<usize>,
}

impl Problem {
    /// `None` when the precedence graph has a cycle.
    pub fn new(input: &SolverInput) -> Option<Problem> {
        let mut offset = Vec::with_capacity(input.jobs.len());
        let mut n = 0;
        for j in &input.jobs {
            offset.push(n);
            n += j.ops.len();
        }
        let mut machine = Vec::with_capacity(n);
        let mut dur = Vec::with_capacity(n);
        let mut pos = Vec::with_capacity(n);
        let mut job_rest = Vec::with_capacity(n);
        let mut edges: BTreeSet<(usize, usize)> = BTreeSet::new();
        for (j, job) in input.jobs.iter().enumerate() {
            let total: i64 = job.ops.iter().map(|&(_, d)| d as i64).sum();
            let mut done = 0;
            for (k, &(m, d)) in job.ops.iter().enumerate() {
                machine.push(m);
                dur.push(d as i64);
                pos.push((j, k));
                job_rest.push(total - done);
                done += d as i64;
                if k > 0 {
                    edges.insert((offset[j] + k - 1, offset[j] + k));
                }
            }
        }
        for e in &input.extra_precedence {
            let a = offset[e.before.job] + e.before.op;
            let b = offset[e.after.job] + e.after.op;
            if a == b {
                return None;
            }
            edges.insert((a, b));
        }
        let mut preds = vec![Vec::new(); n];
        let mut succs = vec![Vec::new(); n];
        for &(a, b) in &edges {
            succs[a].push(b);
            preds[b].push(a);
        }

        let mut indeg: Vec<usize> = preds.iter().map(Vec::len).collect();
        let mut topo: Vec<usize> = (0..n).filter(|&o| indeg[o] == 0).collect();
        let mut i = 0;
        while i < topo.len() {
            let o = topo[i];
            for &s in &succs[o] {
                indeg[s] -= 1;
                if indeg[s] == 0 {
                    topo.push(s);
                }
            }
            i += 1;
        }
        if topo.len() != n {
            return None;
        }
        let mut tail = vec![0i64; n];
        for &o in topo.iter().rev() {
            tail[o] = succs[o]
                .iter()
                .map(|&s| dur[s] + tail[s])
                .max()
                .unwrap_or(0);
        }
        let mut on_machine = vec![Vec::new(); input.n_machines];
        for o in 0..n {
            on_machine[machine[o]].push(o);
        }
        Some(Problem {
            n,
            n_machines: input.n_machines,
            machine,
            dur,
            pos,
            preds,
            succs,
            tail,
            job_rest,
            on_machine,
            topo,
        })
    }
}
