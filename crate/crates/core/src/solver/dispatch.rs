use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::problem::Problem;

/// Partial active schedule shared by dispatch and the tree search.
#[derive(Clone)]
pub(crate) struct Partial {
    pub start: Vec<i64>,
    /// Max end over scheduled predecessors.
    pub ready: Vec<i64>,
    pub waiting: Vec<usize>,
    pub machine_free: Vec<i64>,
    pub scheduled: usize,
    pub cmax: i64,
}

pub(crate) const UNSET: i64 = -1;

#[derive(Clone, Copy)]
pub(crate) enum Undo {
    MachineFree(usize, i64),
    Ready(usize, i64),
}

impl Partial {
    pub fn new(p: &Problem) -> Self {
        Partial {
            start: vec![UNSET; p.n],
            ready: vec![0; p.n],
            waiting: p.preds.iter().map(Vec::len).collect(),
            machine_free: vec![0; p.n_machines],
            scheduled: 0,
            cmax: 0,
        }
    }

    pub fn is_schedulable(&self, o: usize) -> bool {
        self.start[o] == UNSET && self.waiting[o] == 0
    }

    pub fn est(&self, p: &Problem, o: usize) -> i64 {
        self.ready[o].max(self.machine_free[p.machine[o]])
    }

    /// Giffler–Thompson conflict set on the machine of the operation with
    /// minimum earliest completion (ties: lowest operation index).
    pub fn conflict_set(&self, p: &Problem, out: &mut Vec<usize>) {
        out.clear();
        let mut best: Option<(i64, usize)> = None;
        for o in 0..p.n {
            if self.is_schedulable(o) {
                let ect = self.est(p, o) + p.dur[o];
                if best.map_or(true, |(b, _)| ect < b) {
                    best = Some((ect, o));
                }
            }
        }
        let Some((ect, star)) = best else { return };
        let m = p.machine[star];
        for &o in &p.on_machine[m] {
            if self.is_schedulable(o) && self.est(p, o) < ect {
                out.push(o);
            }
        }
    }

    pub fn place(&mut self, p: &Problem, o: usize, undo: &mut Vec<Undo>) -> i64 {
        let s = self.est(p, o);
        let e = s + p.dur[o];
        self.start[o] = s;
        let m = p.machine[o];
        undo.push(Undo::MachineFree(m, self.machine_free[m]));
        self.machine_free[m] = e;
        for &succ in &p.succs[o] {
            self.waiting[succ] -= 1;
            if self.ready[succ] < e {
                undo.push(Undo::Ready(succ, self.ready[succ]));
                self.ready[succ] = e;
            }
        }
        self.scheduled += 1;
        let old = self.cmax;
        self.cmax = self.cmax.max(e);
        old
    }

    pub fn unplace(
        &mut self,
        p: &Problem,
        o: usize,
        undo: &mut Vec<Undo>,
        mark: usize,
        old_cmax: i64,
    ) {
        while undo.len() > mark {
            match undo.pop().unwrap() {
                Undo::MachineFree(m, v) => self.machine_free[m] = v,
                Undo::Ready(o, v) => self.ready[o] = v,
            }
        }
        for &succ in &p.succs[o] {
            self.waiting[succ] += 1;
        }
        self.start[o] = UNSET;
        self.scheduled -= 1;
        self.cmax = old_cmax;
    }
}

/// Completes `state` by repeatedly resolving the conflict set with `pick`.
pub(crate) fn complete(
    p: &Problem,
    mut state: Partial,
    mut pick: impl FnMut(&Problem, &[usize]) -> usize,
) -> Partial {
    let mut conflict = Vec::new();
    let mut undo = Vec::new();
    while state.scheduled < p.n {
        state.conflict_set(p, &mut conflict);
        let o = pick(p, &conflict);
        state.place(p, o, &mut undo);
        undo.clear();
    }
    state
}

/// Most work remaining in the job; ties to lowest operation index.
pub(crate) fn mwkr(p: &Problem, conflict: &[usize]) -> usize {
    let mut best = conflict[0];
    for &o in &conflict[1..] {
        if p.job_rest[o] > p.job_rest[best] {
            best = o;
        }
    }
    best
}

/// MWKR with probability 1/2, otherwise a uniform choice.
pub(crate) fn noisy(rng: &mut ChaCha8Rng) -> impl FnMut(&Problem, &[usize]) -> usize + '_ {
    move |p, c| {
        if rng.gen_bool(0.5) {
            mwkr(p, c)
        } else {
            c[rng.gen_range(0..c.len())]
        }
    }
}
