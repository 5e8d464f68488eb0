//! Pipe-structure grammar induction by EM over windowed flow patterns.
//!
//! Each procedure is summarised by sliding-window counts of unit shapes
//! `(producers in window, consumers in window)`, normalised per window; a
//! raw unit counts its source as one producer and a final product its sink
//! as one consumer. A structure hypothesis `(n, m)` is a categorical
//! filter over shapes with at most `n` producers and `m` consumers. The
//! prior over hypotheses is fixed by the grammar (weight `rho^(n+m-2)`);
//! EM updates the filters.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::observe::FlowGraph;
use crate::dsl::FlowGrammar;
use crate::scalar::{log_sum_exp, Scalar};

pub type Shape = (u32, u32);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntaxConfig<T> {
    /// Window width in steps.
    pub window: usize,
    /// A recursion expansion is admitted when its mean filter response
    /// exceeds this multiple of the linear filter's mean response.
    pub admit_ratio: T,
    pub rho: T,
    pub max_iters: usize,
    pub conv_tol: T,
}

/// EM state: the hypothesis assigned to each procedure, the filters of the
/// assigned hypotheses, the grammar and the log-likelihood per iteration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmState<T> {
    pub z: Vec<Shape>,
    pub theta: BTreeMap<String, BTreeMap<String, T>>,
    pub psi: FlowGrammar,
    pub log_likelihood: Vec<T>,
    pub iterations: usize,
    pub converged: bool,
    /// Expansions admitted while growing the grammar, in order.
    pub admitted: Vec<String>,
}

fn key(s: Shape) -> String {
    format!("{}x{}", s.0, s.1)
}

/// Shapes detected in each window `[t, t + w)`.
fn window_shapes(g: &FlowGraph, w: usize) -> Vec<Vec<Shape>> {
    if g.n_steps == 0 {
        return Vec::new();
    }
    let w = w.max(1).min(g.n_steps);
    (0..=g.n_steps - w)
        .map(|t| {
            let inside = |s: &&usize| (t..t + w).contains(*s);
            g.units
                .iter()
                .filter_map(|(prod, cons)| {
                    let p_in = prod.iter().filter(inside).count() as u32;
                    let c_in = cons.iter().filter(inside).count() as u32;
                    let p = if prod.is_empty() {
                        u32::from(c_in > 0)
                    } else {
                        p_in
                    };
                    let c = if cons.is_empty() {
                        u32::from(p_in > 0)
                    } else {
                        c_in
                    };
                    (p > 0 && c > 0).then_some((p, c))
                })
                .collect()
        })
        .collect()
}

/// Window-normalised shape counts of one procedure.
pub fn window_patterns<T: Scalar>(g: &FlowGraph, w: usize) -> BTreeMap<Shape, T> {
    let mut out: BTreeMap<Shape, T> = BTreeMap::new();
    for found in window_shapes(g, w).into_iter().filter(|f| !f.is_empty()) {
        let share = T::one() / T::from_usize_lossy(found.len());
        for s in found {
            let e = out.entry(s).or_insert_with(T::zero);
            *e = *e + share;
        }
    }
    out
}

/// Share of windows in which a shape satisfying `pred` is detected.
fn response<T: Scalar>(g: &FlowGraph, w: usize, pred: impl Fn(Shape) -> bool) -> T {
    let windows = window_shapes(g, w);
    if windows.is_empty() {
        return T::zero();
    }
    let hits = windows
        .iter()
        .filter(|f| f.iter().any(|&s| pred(s)))
        .count();
    T::from_usize_lossy(hits) / T::from_usize_lossy(windows.len())
}

fn hypotheses(max_pred: u32, max_succ: u32) -> Vec<Shape> {
    (1..=max_pred)
        .flat_map(|n| (1..=max_succ).map(move |m| (n, m)))
        .collect()
}

fn support(h: Shape) -> Vec<Shape> {
    hypotheses(h.0, h.1)
}

/// Grows the grammar from the base by admitting recursion expansions,
/// then fits the filters by EM and keeps the largest fan of any
/// hypothesis that is the posterior mode of some procedure.
pub fn induce_flow_syntax<T: Scalar>(
    graphs: &[FlowGraph],
    cfg: &SyntaxConfig<T>,
) -> (FlowGrammar, EmState<T>) {
    let obs: Vec<BTreeMap<Shape, T>> = graphs
        .iter()
        .map(|g| window_patterns(g, cfg.window))
        .collect();
    let n_docs = T::from_usize_lossy(graphs.len().max(1));
    let lin: T = graphs
        .iter()
        .map(|g| response::<T>(g, cfg.window, |s| s == (1, 1)))
        .sum::<T>()
        / n_docs;

    let (mut np, mut nm) = (1u32, 1u32);
    let mut admitted = Vec::new();
    loop {
        let mut grew = false;
        let rp: T = graphs
            .iter()
            .map(|g| response::<T>(g, cfg.window, |s| s.0 > np))
            .sum::<T>()
            / n_docs;
        if rp > T::zero() && rp > cfg.admit_ratio * lin {
            np += 1;
            admitted.push(format!("pred {np}"));
            grew = true;
        }
        let rs: T = graphs
            .iter()
            .map(|g| response::<T>(g, cfg.window, |s| s.1 > nm))
            .sum::<T>()
            / n_docs;
        if rs > T::zero() && rs > cfg.admit_ratio * lin {
            nm += 1;
            admitted.push(format!("succ {nm}"));
            grew = true;
        }
        if !grew {
            break;
        }
    }
    // shapes beyond the admitted grammar cannot be explained; clamp them
    let obs: Vec<BTreeMap<Shape, T>> = obs
        .into_iter()
        .map(|o| {
            let mut c: BTreeMap<Shape, T> = BTreeMap::new();
            for ((p, q), x) in o {
                let e = c.entry((p.min(np), q.min(nm))).or_insert_with(T::zero);
                *e = *e + x;
            }
            c
        })
        .collect();

    let hyps = hypotheses(np, nm);
    let log_prior: Vec<T> = {
        let raw: Vec<T> = hyps
            .iter()
            .map(|h| cfg.rho.ln() * T::from_u32(h.0 + h.1 - 2).unwrap())
            .collect();
        let z = log_sum_exp(&raw);
        raw.into_iter().map(|x| x - z).collect()
    };
    let mut theta: Vec<BTreeMap<Shape, T>> = hyps
        .iter()
        .map(|&h| {
            let sup = support(h);
            let p = T::one() / T::from_usize_lossy(sup.len());
            sup.into_iter().map(|s| (s, p)).collect()
        })
        .collect();

    let e_step = |theta: &[BTreeMap<Shape, T>]| -> (T, Vec<Vec<T>>) {
        let mut ll = T::zero();
        let mut resp = Vec::with_capacity(obs.len());
        for o in &obs {
            let scores: Vec<T> = (0..hyps.len())
                .map(|h| {
                    let mut s = log_prior[h];
                    for (shape, &x) in o {
                        match theta[h].get(shape) {
                            Some(&p) if p > T::zero() => s = s + x * p.ln(),
                            _ => return T::neg_infinity(),
                        }
                    }
                    s
                })
                .collect();
            let z = log_sum_exp(&scores);
            ll = ll + z;
            resp.push(scores.into_iter().map(|s| (s - z).exp()).collect());
        }
        (ll, resp)
    };

    let mut trace = Vec::new();
    let (mut ll, mut resp) = e_step(&theta);
    trace.push(ll);
    let mut converged = obs.is_empty();
    let mut iterations = 0;
    while !converged && iterations < cfg.max_iters {
        iterations += 1;
        for (h, th) in theta.iter_mut().enumerate() {
            let mut acc: BTreeMap<Shape, T> = th.keys().map(|&s| (s, T::zero())).collect();
            let mut total = T::zero();
            for (o, r) in obs.iter().zip(&resp) {
                if r[h] == T::zero() {
                    continue;
                }
                for (s, &x) in o {
                    if let Some(a) = acc.get_mut(s) {
                        *a = *a + r[h] * x;
                        total = total + r[h] * x;
                    }
                }
            }
            if total > T::zero() {
                for (s, a) in acc {
                    th.insert(s, a / total);
                }
            }
        }
        let (next, r) = e_step(&theta);
        debug_assert!(
            next >= ll - T::lit(1e-9) * T::one().max(ll.abs()),
            "EM decreased: {ll} -> {next}"
        );
        converged = next - ll < cfg.conv_tol;
        ll = next;
        resp = r;
        trace.push(ll);
    }

    // posterior mode per procedure; ties go to the simpler hypothesis
    let z: Vec<Shape> = resp
        .iter()
        .map(|r| {
            let mut best = 0;
            for h in 1..hyps.len() {
                if r[h] > r[best] + T::lit(1e-12) {
                    best = h;
                }
            }
            hyps[best]
        })
        .collect();
    let used: BTreeSet<Shape> = z.iter().copied().collect();
    let max_pred = used.iter().map(|s| s.0).max().unwrap_or(1);
    let max_succ = used.iter().map(|s| s.1).max().unwrap_or(1);
    let psi = FlowGrammar::with_bounds(max_pred, max_succ);
    let theta_used = hyps
        .iter()
        .zip(&theta)
        .filter(|(h, _)| used.contains(h))
        .map(|(&h, th)| (key(h), th.iter().map(|(&s, &p)| (key(s), p)).collect()))
        .collect();
    let state = EmState {
        z,
        theta: theta_used,
        psi: psi.clone(),
        log_likelihood: trace,
        iterations,
        converged,
        admitted,
    };
    (psi, state)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> SyntaxConfig<f64> {
        SyntaxConfig {
            window: 4,
            admit_ratio: 0.0,
            rho: 0.5,
            max_iters: 100,
            conv_tol: 1e-9,
        }
    }

    fn set(xs: &[usize]) -> BTreeSet<usize> {
        xs.iter().copied().collect()
    }

    fn linear(n: usize) -> FlowGraph {
        let mut units = vec![(set(&[]), set(&[0]))];
        for k in 0..n {
            let next = if k + 1 < n { set(&[k + 1]) } else { set(&[]) };
            units.push((set(&[k]), next));
        }
        FlowGraph {
            doc_id: "lin".into(),
            n_steps: n,
            units,
        }
    }

    /// Two producers feed one unit, which one step consumes.
    fn y_shape() -> FlowGraph {
        FlowGraph {
            doc_id: "y".into(),
            n_steps: 3,
            units: vec![
                (set(&[]), set(&[0])),
                (set(&[]), set(&[1])),
                (set(&[0, 1]), set(&[2])),
                (set(&[2]), set(&[])),
            ],
        }
    }

    fn monotone(t: &[f64]) -> bool {
        t.windows(2).all(|w| w[1] >= w[0] - 1e-9)
    }

    #[test]
    fn linear_corpus_keeps_base_grammar() {
        let (g, st) = induce_flow_syntax(&[linear(3), linear(5), linear(6)], &cfg());
        assert_eq!((g.max_pred, g.max_succ), (1, 1));
        assert_eq!(g, FlowGrammar::base());
        assert!(monotone(&st.log_likelihood));
        assert_eq!(st.theta.len(), 1);
    }

    #[test]
    fn y_corpus_admits_two_producers() {
        let (g, st) = induce_flow_syntax(&[linear(4), y_shape(), linear(3)], &cfg());
        assert_eq!((g.max_pred, g.max_succ), (2, 1));
        assert!(monotone(&st.log_likelihood));
        assert!(st.log_likelihood.iter().all(|x| x.is_finite()));
        let distinct: BTreeSet<Shape> = st.z.iter().copied().collect();
        assert_eq!(st.theta.len(), distinct.len());
    }

    #[test]
    fn empty_corpus_is_base() {
        let (g, st) = induce_flow_syntax::<f64>(&[], &cfg());
        assert_eq!(g, FlowGrammar::base());
        assert!(st.z.is_empty());
    }

    #[test]
    fn windows_normalise_counts() {
        let p = window_patterns::<f64>(&linear(2), 4);
        let total: f64 = p.values().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }
}
