use std::collections::BinaryHeap;
use std::time::{Duration, Instant};

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::dispatch::{complete, mwkr, noisy, Partial, Undo, UNSET};
use super::problem::Problem;
use super::{SolveStatus, SolverConfig};

pub(crate) struct Outcome {
    pub starts: Vec<i64>,
    pub makespan: i64,
    pub lower_bound: i64,
    pub status: SolveStatus,
    pub nodes: u64,
}

struct Search<'a> {
    p: &'a Problem,
    ub: i64,
    best: Vec<i64>,
    nodes: u64,
    node_limit: u64,
    deadline: Option<Instant>,
    stop: Option<SolveStatus>,
    heads: Vec<i64>,
    jobs: Vec<(i64, i64, i64)>,
}

pub(crate) fn search(p: &Problem, cfg: &SolverConfig) -> Outcome {
    let root = Partial::new(p);
    let mut incumbent = complete(p, root.clone(), mwkr);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for _ in 0..cfg.rollouts {
        let s = complete(p, root.clone(), noisy(&mut rng));
        if s.cmax < incumbent.cmax {
            incumbent = s;
        }
    }

    let deadline = (cfg.time_limit_s.is_finite() && cfg.time_limit_s > 0.0)
        .then(|| Instant::now() + Duration::from_secs_f64(cfg.time_limit_s));
    let mut s = Search {
        p,
        ub: incumbent.cmax,
        best: incumbent.start.clone(),
        nodes: 0,
        node_limit: cfg.node_limit,
        deadline,
        stop: None,
        heads: vec![0; p.n],
        jobs: Vec::with_capacity(p.n),
    };
    let mut state = root;
    let root_lb = s.lower_bound(&state);
    if root_lb < s.ub {
        let mut undo = Vec::new();
        s.dfs(&mut state, &mut undo);
    }
    let status = s.stop.unwrap_or(SolveStatus::Optimal);
    let lower_bound = if status == SolveStatus::Optimal {
        s.ub
    } else {
        root_lb
    };
    Outcome {
        starts: s.best,
        makespan: s.ub,
        lower_bound,
        status,
        nodes: s.nodes,
    }
}

impl Search<'_> {
    fn dfs(&mut self, st: &mut Partial, undo: &mut Vec<Undo>) {
        let p = self.p;
        if st.scheduled == p.n {
            if st.cmax < self.ub {
                self.ub = st.cmax;
                self.best.clone_from(&st.start);
            }
            return;
        }
        if self.stop.is_some() {
            return;
        }
        self.nodes += 1;
        if self.nodes > self.node_limit {
            self.stop = Some(SolveStatus::Feasible);
            return;
        }
        if self.nodes % 256 == 0 {
            if let Some(d) = self.deadline {
                if Instant::now() >= d {
                    self.stop = Some(SolveStatus::Timeout);
                    return;
                }
            }
        }

        let mut conflict = Vec::new();
        st.conflict_set(p, &mut conflict);
        let mut children: Vec<(i64, usize)> = Vec::with_capacity(conflict.len());
        for &o in &conflict {
            let mark = undo.len();
            let old = st.place(p, o, undo);
            let lb = self.lower_bound(st);
            st.unplace(p, o, undo, mark, old);
            if lb < self.ub {
                children.push((lb, o));
            }
        }
        children.sort_unstable();
        for (lb, o) in children {
            if lb >= self.ub || self.stop.is_some() {
                continue;
            }
            let mark = undo.len();
            let old = st.place(p, o, undo);
            self.dfs(st, undo);
            st.unplace(p, o, undo, mark, old);
        }
    }

    /// max(current makespan, longest head+body+tail, Jackson preemptive
    /// bound on each machine).
    fn lower_bound(&mut self, st: &Partial) -> i64 {
        let p = self.p;
        let mut lb = st.cmax;
        for &o in &p.topo {
            if st.start[o] != UNSET {
                continue;
            }
            let mut r = st.ready[o].max(st.machine_free[p.machine[o]]);
            for &q in &p.preds[o] {
                if st.start[q] == UNSET {
                    r = r.max(self.heads[q] + p.dur[q]);
                }
            }
            self.heads[o] = r;
            lb = lb.max(r + p.dur[o] + p.tail[o]);
        }
        for m in 0..p.n_machines {
            self.jobs.clear();
            for &o in &p.on_machine[m] {
                if st.start[o] == UNSET {
                    self.jobs.push((self.heads[o], p.dur[o], p.tail[o]));
                }
            }
            if !self.jobs.is_empty() {
                lb = lb.max(jackson_preemptive(&mut self.jobs));
            }
        }
        lb
    }
}

/// Optimal max(C + q) of the preemptive one-machine problem with release
/// times `r`, processing `p` and tails `q`.
fn jackson_preemptive(jobs: &mut [(i64, i64, i64)]) -> i64 {
    jobs.sort_unstable();
    let mut heap: BinaryHeap<(i64, i64)> = BinaryHeap::new();
    let mut i = 0;
    let mut t = jobs[0].0;
    let mut best = 0;
    while i < jobs.len() || !heap.is_empty() {
        while i < jobs.len() && jobs[i].0 <= t {
            heap.push((jobs[i].2, jobs[i].1));
            i += 1;
        }
        let Some((q, rem)) = heap.pop() else {
            t = jobs[i].0;
            continue;
        };
        let next = if i < jobs.len() { jobs[i].0 } else { i64::MAX };
        if t + rem <= next {
            t += rem;
            best = best.max(t + q);
        } else {
            heap.push((q, rem - (next - t)));
            t = next;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jackson_matches_hand_example() {
        // r, p, q
        let mut jobs = vec![(0, 4, 1), (1, 2, 10), (2, 1, 0)];
        // job 2 preempts job 1 at t=1, finishes t=3 (+10 = 13)
        assert_eq!(jackson_preemptive(&mut jobs), 13);
        let mut jobs = vec![(5, 3, 0)];
        assert_eq!(jackson_preemptive(&mut jobs), 8);
    }
}
