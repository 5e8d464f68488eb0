//! Collapsed Gibbs sampling for a Dirichlet process mixture in its
//! Chinese-restaurant representation. Items carry categorical features
//! (symmetric Dirichlet base measure) and real features (normal-inverse-gamma
//! base measure); both are integrated out.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::scalar::{ln_gamma, log_sum_exp, Scalar};

/// One observation. `None` marks an absent feature, which contributes no
/// likelihood.
#[derive(Clone, Debug, PartialEq)]
pub struct Item<T> {
    pub cats: Vec<Option<usize>>,
    pub nums: Vec<Option<T>>,
}

/// Normal-inverse-gamma hyperparameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Nig<T> {
    pub mu0: T,
    pub kappa0: T,
    pub a0: T,
    pub b0: T,
}

impl<T: Scalar> Nig<T> {
    /// Weak prior centred on the data mean with prior variance `scale²`.
    pub fn weak(values: &[T], scale: T) -> Self {
        let mu0 = crate::scalar::mean(values).unwrap_or(T::zero());
        let s = if scale > T::zero() { scale } else { T::one() };
        Nig {
            mu0,
            kappa0: T::lit(0.01),
            a0: T::lit(2.0),
            b0: s * s,
        }
    }

    fn posterior(&self, s: &NumStats<T>) -> (T, T, T, T) {
        let n = T::from_usize_lossy(s.n);
        let kn = self.kappa0 + n;
        let an = self.a0 + n / T::lit(2.0);
        if s.n == 0 {
            return (self.mu0, kn, an, self.b0);
        }
        // values are stored relative to mu0
        let mean = s.sum / n;
        let ss = (s.sumsq - s.sum * mean).max(T::zero());
        let mun = self.mu0 + s.sum / kn;
        let bn = self.b0 + ss / T::lit(2.0) + self.kappa0 * n * mean * mean / (T::lit(2.0) * kn);
        (mun, kn, an, bn)
    }

    /// Log marginal likelihood of the values summarised by `s`.
    fn log_marginal(&self, s: &NumStats<T>) -> T {
        if s.n == 0 {
            return T::zero();
        }
        let (_, kn, an, bn) = self.posterior(s);
        let n = T::from_usize_lossy(s.n);
        ln_gamma(an) - ln_gamma(self.a0) + self.a0 * self.b0.ln() - an * bn.ln()
            + (self.kappa0 / kn).ln() / T::lit(2.0)
            - n / T::lit(2.0) * (T::lit(2.0) * T::PI()).ln()
    }

    /// Student-t posterior predictive log density at `x`.
    fn log_predictive(&self, s: &NumStats<T>, x: T) -> T {
        let (mun, kn, an, bn) = self.posterior(s);
        let two = T::lit(2.0);
        let nu = two * an;
        let scale2 = bn * (kn + T::one()) / (an * kn);
        let d = x - mun;
        ln_gamma((nu + T::one()) / two)
            - ln_gamma(nu / two)
            - (nu * T::PI() * scale2).ln() / two
            - (nu + T::one()) / two * (T::one() + d * d / (nu * scale2)).ln()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixtureSpec<T> {
    /// Vocabulary size of each categorical feature.
    pub cat_sizes: Vec<usize>,
    pub nums: Vec<Nig<T>>,
    /// CRP concentration.
    pub alpha: T,
    /// Symmetric Dirichlet parameter of the categorical base measure.
    pub beta: T,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GibbsSchedule {
    /// Sweeps at unit temperature before switching to mode updates.
    pub burn_in: usize,
    pub max_sweeps: usize,
    /// Trace entries that must be non-decreasing for convergence.
    pub window: usize,
}

#[derive(Clone, Debug, Default)]
struct NumStats<T> {
    n: usize,
    sum: T,
    sumsq: T,
}

#[derive(Clone, Debug)]
struct Cluster<T> {
    size: usize,
    cat_counts: Vec<Vec<usize>>,
    cat_totals: Vec<usize>,
    nums: Vec<NumStats<T>>,
}

impl<T: Scalar> Cluster<T> {
    fn empty(spec: &MixtureSpec<T>) -> Self {
        Cluster {
            size: 0,
            cat_counts: spec.cat_sizes.iter().map(|&v| vec![0; v]).collect(),
            cat_totals: vec![0; spec.cat_sizes.len()],
            nums: spec.nums.iter().map(|_| NumStats::default()).collect(),
        }
    }

    fn add(&mut self, it: &Item<T>, spec: &MixtureSpec<T>, sign: i64) {
        let bump = |x: &mut usize| *x = (*x as i64 + sign) as usize;
        bump(&mut self.size);
        for (f, c) in it.cats.iter().enumerate() {
            if let Some(v) = *c {
                bump(&mut self.cat_counts[f][v]);
                bump(&mut self.cat_totals[f]);
            }
        }
        let s = T::from_i64(sign).expect("sign");
        for (g, x) in it.nums.iter().enumerate() {
            if let Some(x) = *x {
                let y = x - spec.nums[g].mu0;
                let st = &mut self.nums[g];
                bump(&mut st.n);
                st.sum = st.sum + s * y;
                st.sumsq = st.sumsq + s * y * y;
                if st.n == 0 {
                    st.sum = T::zero();
                    st.sumsq = T::zero();
                }
            }
        }
    }

    fn merged(&self, other: &Self) -> Self {
        let mut c = self.clone();
        c.size += other.size;
        for (f, counts) in other.cat_counts.iter().enumerate() {
            for (v, &n) in counts.iter().enumerate() {
                c.cat_counts[f][v] += n;
            }
            c.cat_totals[f] += other.cat_totals[f];
        }
        for (g, st) in other.nums.iter().enumerate() {
            let t = &mut c.nums[g];
            t.n += st.n;
            t.sum = t.sum + st.sum;
            t.sumsq = t.sumsq + st.sumsq;
        }
        c
    }

    /// Cluster terms of the joint: `ln Γ(size)` plus the marginal.
    fn joint_term(&self, spec: &MixtureSpec<T>) -> T {
        ln_gamma(T::from_usize_lossy(self.size)) + self.log_marginal(spec)
    }

    fn log_predictive(&self, it: &Item<T>, spec: &MixtureSpec<T>) -> T {
        let mut lp = T::zero();
        for (f, c) in it.cats.iter().enumerate() {
            if let Some(v) = *c {
                let vsize = T::from_usize_lossy(spec.cat_sizes[f]);
                lp = lp
                    + ((T::from_usize_lossy(self.cat_counts[f][v]) + spec.beta)
                        / (T::from_usize_lossy(self.cat_totals[f]) + spec.beta * vsize))
                        .ln();
            }
        }
        for (g, x) in it.nums.iter().enumerate() {
            if let Some(x) = *x {
                lp = lp + spec.nums[g].log_predictive(&self.nums[g], x);
            }
        }
        lp
    }

    fn log_marginal(&self, spec: &MixtureSpec<T>) -> T {
        let mut lp = T::zero();
        for (f, counts) in self.cat_counts.iter().enumerate() {
            let bv = spec.beta * T::from_usize_lossy(spec.cat_sizes[f]);
            lp = lp + ln_gamma(bv) - ln_gamma(T::from_usize_lossy(self.cat_totals[f]) + bv);
            for &c in counts.iter().filter(|&&c| c > 0) {
                lp = lp + ln_gamma(T::from_usize_lossy(c) + spec.beta) - ln_gamma(spec.beta);
            }
        }
        for (g, st) in self.nums.iter().enumerate() {
            lp = lp + spec.nums[g].log_marginal(st);
        }
        lp
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GibbsOutcome<T> {
    /// Cluster label per item, numbered by first occurrence.
    pub assignments: Vec<usize>,
    pub n_clusters: usize,
    /// Joint log-likelihood after every sweep.
    pub trace: Vec<T>,
    pub converged: bool,
}

struct State<T> {
    z: Vec<usize>,
    clusters: Vec<Cluster<T>>,
}

impl<T: Scalar> State<T> {
    fn joint(&self, spec: &MixtureSpec<T>) -> T {
        let n = T::from_usize_lossy(self.z.len());
        let live: Vec<&Cluster<T>> = self.clusters.iter().filter(|c| c.size > 0).collect();
        let k = T::from_usize_lossy(live.len());
        let mut lp = k * spec.alpha.ln() + ln_gamma(spec.alpha) - ln_gamma(spec.alpha + n);
        for c in live {
            lp = lp + ln_gamma(T::from_usize_lossy(c.size)) + c.log_marginal(spec);
        }
        lp
    }

    /// Applies the best pairwise cluster merge that raises the joint.
    fn merge_step(&mut self, spec: &MixtureSpec<T>) -> bool {
        let live: Vec<usize> = (0..self.clusters.len())
            .filter(|&k| self.clusters[k].size > 0)
            .collect();
        let terms: Vec<T> = live
            .iter()
            .map(|&k| self.clusters[k].joint_term(spec))
            .collect();
        let mut best: Option<(T, usize, usize)> = None;
        for (x, &a) in live.iter().enumerate() {
            for (y, &b) in live.iter().enumerate().skip(x + 1) {
                let m = self.clusters[a].merged(&self.clusters[b]).joint_term(spec);
                let gain = m - terms[x] - terms[y] - spec.alpha.ln();
                let margin = T::lit(1e-12) * T::one().max(m.abs());
                if gain > margin && best.is_none_or(|(g, _, _)| gain > g) {
                    best = Some((gain, a, b));
                }
            }
        }
        let Some((_, a, b)) = best else { return false };
        self.clusters[a] = self.clusters[a].merged(&self.clusters[b]);
        self.clusters[b] = Cluster::empty(spec);
        for z in &mut self.z {
            if *z == b {
                *z = a;
            }
        }
        true
    }

    fn labels(&self) -> (Vec<usize>, usize) {
        let mut map = vec![usize::MAX; self.clusters.len()];
        let mut next = 0;
        let z = self
            .z
            .iter()
            .map(|&k| {
                if map[k] == usize::MAX {
                    map[k] = next;
                    next += 1;
                }
                map[k]
            })
            .collect();
        (z, next)
    }
}

/// Runs the sampler from the all-singletons state. After `burn_in` sweeps
/// each item moves to its conditional mode instead of a draw (ties keep
/// the current table) and then cluster pairs are merged while that raises
/// the joint, so the joint log-likelihood never decreases from then on. Converged once the last `window` trace entries are
/// non-decreasing within `tol` and a mode sweep changed nothing; otherwise
/// the best state seen is returned, flagged.
pub fn collapsed_gibbs<T: Scalar>(
    items: &[Item<T>],
    spec: &MixtureSpec<T>,
    sched: &GibbsSchedule,
    tol: T,
    rng: &mut impl Rng,
) -> GibbsOutcome<T> {
    let n = items.len();
    let mut st = State {
        z: (0..n).collect(),
        clusters: items
            .iter()
            .map(|it| {
                let mut c = Cluster::empty(spec);
                c.add(it, spec, 1);
                c
            })
            .collect(),
    };
    let mut trace = Vec::new();
    let mut best = (st.joint(spec), st.labels());
    if n == 0 {
        return GibbsOutcome {
            assignments: Vec::new(),
            n_clusters: 0,
            trace,
            converged: true,
        };
    }
    let fresh = Cluster::empty(spec);
    let mut scores: Vec<T> = Vec::new();
    let mut converged = false;
    for sweep in 0..sched.max_sweeps {
        let greedy = sweep >= sched.burn_in;
        let mut moved = false;
        for i in 0..n {
            let old = st.z[i];
            st.clusters[old].add(&items[i], spec, -1);
            // candidate tables: every live cluster, then a new one
            let live: Vec<usize> = (0..st.clusters.len())
                .filter(|&k| st.clusters[k].size > 0)
                .collect();
            scores.clear();
            for &k in &live {
                let c = &st.clusters[k];
                scores.push(T::from_usize_lossy(c.size).ln() + c.log_predictive(&items[i], spec));
            }
            scores.push(spec.alpha.ln() + fresh.log_predictive(&items[i], spec));
            let pick = if greedy {
                let stay = live.iter().position(|&k| k == old).unwrap_or(live.len());
                let margin = T::lit(1e-12) * T::one().max(scores[stay].abs());
                let mut pick = stay;
                for (j, &s) in scores.iter().enumerate() {
                    if s > scores[pick] + margin {
                        pick = j;
                    }
                }
                pick
            } else {
                let lse = log_sum_exp(&scores);
                let mut u = T::lit(rng.gen::<f64>());
                let mut pick = scores.len() - 1;
                for (j, &s) in scores.iter().enumerate() {
                    let p = (s - lse).exp();
                    if u < p {
                        pick = j;
                        break;
                    }
                    u = u - p;
                }
                pick
            };
            let target = if pick < live.len() {
                live[pick]
            } else if st.clusters[old].size == 0 {
                old
            } else {
                match st.clusters.iter().position(|c| c.size == 0) {
                    Some(k) => k,
                    None => {
                        st.clusters.push(Cluster::empty(spec));
                        st.clusters.len() - 1
                    }
                }
            };
            moved |= target != old;
            st.z[i] = target;
            st.clusters[target].add(&items[i], spec, 1);
        }
        if greedy {
            while st.merge_step(spec) {
                moved = true;
            }
        }
        let lp = st.joint(spec);
        trace.push(lp);
        if lp > best.0 {
            best = (lp, st.labels());
        }
        if greedy && !moved && trace.len() >= sched.window.max(1) {
            let tail = &trace[trace.len() - sched.window.max(1)..];
            if tail
                .windows(2)
                .all(|w| w[1] >= w[0] - tol * T::one().max(w[0].abs()))
            {
                converged = true;
                break;
            }
        }
    }
    let (assignments, n_clusters) = if converged { st.labels() } else { best.1 };
    GibbsOutcome {
        assignments,
        n_clusters,
        trace,
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sched() -> GibbsSchedule {
        GibbsSchedule {
            burn_in: 10,
            max_sweeps: 200,
            window: 10,
        }
    }

    #[test]
    fn identical_items_form_one_cluster() {
        let items = vec![
            Item {
                cats: vec![Some(0)],
                nums: vec![Some(5.0f64)],
            };
            12
        ];
        let spec = MixtureSpec {
            cat_sizes: vec![2],
            nums: vec![Nig::weak(&[5.0], 1.0)],
            alpha: 1.0,
            beta: 0.05,
        };
        let out = collapsed_gibbs(
            &items,
            &spec,
            &sched(),
            1e-6,
            &mut ChaCha8Rng::seed_from_u64(1),
        );
        assert!(out.converged);
        assert_eq!(out.n_clusters, 1);
    }

    #[test]
    fn separated_groups_split_and_trace_rises_after_burn_in() {
        let mut items = Vec::new();
        for g in 0..3usize {
            for k in 0..20 {
                items.push(Item {
                    cats: vec![Some(g)],
                    nums: vec![Some(100.0 * g as f64 + (k % 5) as f64 * 0.3)],
                });
            }
        }
        let vals: Vec<f64> = items.iter().map(|i| i.nums[0].unwrap()).collect();
        let spec = MixtureSpec {
            cat_sizes: vec![4],
            nums: vec![Nig::weak(&vals, 10.0)],
            alpha: 1.0,
            beta: 0.05,
        };
        let out = collapsed_gibbs(
            &items,
            &spec,
            &sched(),
            1e-6,
            &mut ChaCha8Rng::seed_from_u64(7),
        );
        assert_eq!(out.n_clusters, 3);
        for w in out.trace[10..].windows(2) {
            assert!(w[1] >= w[0] - 1e-9);
        }
    }

    #[test]
    fn empty_input() {
        let spec: MixtureSpec<f64> = MixtureSpec {
            cat_sizes: vec![],
            nums: vec![],
            alpha: 1.0,
            beta: 0.05,
        };
        let out = collapsed_gibbs(
            &[],
            &spec,
            &sched(),
            1e-6,
            &mut ChaCha8Rng::seed_from_u64(0),
        );
        assert_eq!(out.n_clusters, 0);
    }
}
