//! DSL induction from a corpus of procedure documents.
//!
//! Operations and flow units are clustered with collapsed-Gibbs Dirichlet
//! process mixtures, parameter domains are smoothed with a Gaussian
//! process per mixture atom, and the pipe grammar is fitted by EM over
//! windowed flow patterns.

mod assemble;
mod dpmm;
mod flows;
mod gp;
mod observe;
mod operations;
mod prior;
mod syntax;

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use assemble::{assemble_dsl, coverage};
pub use dpmm::{collapsed_gibbs, GibbsOutcome, GibbsSchedule, Item, MixtureSpec, Nig};
pub use flows::{induce_flow_semantics, FlowSemantics};
pub use gp::{atoms, induce_param_spec, Atom, Gp, GpConfig, SpecSettings};
pub use observe::{observe_corpus, ActionObs, CorpusObservations, FlowGraph, Uncovered, UnitObs};
pub use operations::{induce_operation_semantics, unify_interfaces};
pub use prior::{PriorKnowledge, TaxonEntry};
pub use syntax::{induce_flow_syntax, window_patterns, EmState, Shape, SyntaxConfig};

use crate::abstraction::ProcedureDoc;
use crate::dsl::{validate_dsl, DslDefinition};
use crate::scalar::Scalar;
use crate::synth::fnv1a;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaseMeasure<T> {
    /// Symmetric Dirichlet concentration of categorical features.
    pub beta: T,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, bound(deserialize = "T: Scalar"))]
pub struct AdaptationConfig<T> {
    /// Dirichlet process concentration.
    pub alpha: T,
    pub base_measure: BaseMeasure<T>,
    pub gp: GpConfig<T>,
    /// Gibbs sweeps per target.
    pub max_iters: usize,
    pub burn_in: usize,
    pub em_max_iters: usize,
    pub conv_tol: T,
    pub tau_alias: T,
    pub tau_match: T,
    /// Flow-pattern window width in steps.
    pub window: usize,
    pub admit_ratio: T,
    /// Prior weight ratio per extra predecessor or successor.
    pub structure_prior: T,
    pub seed: u64,
}

impl<T: Scalar> Default for AdaptationConfig<T> {
    fn default() -> Self {
        AdaptationConfig {
            alpha: T::one(),
            base_measure: BaseMeasure { beta: T::lit(0.05) },
            gp: GpConfig::default(),
            max_iters: 500,
            burn_in: 20,
            em_max_iters: 100,
            conv_tol: T::lit(1e-6),
            tau_alias: T::lit(0.8),
            tau_match: T::lit(0.6),
            window: 4,
            admit_ratio: T::zero(),
            structure_prior: T::lit(0.5),
            seed: 0,
        }
    }
}

/// Gibbs trace window used for the convergence check.
const TRACE_WINDOW: usize = 10;

impl<T: Scalar> AdaptationConfig<T> {
    pub fn problems(&self) -> Vec<String> {
        let mut p = Vec::new();
        let pos = |x: T| x > T::zero() && x.is_finite();
        let unit = |x: T| x >= T::zero() && x <= T::one();
        if !pos(self.alpha) {
            p.push(format!("alpha must be positive, got {}", self.alpha));
        }
        if !pos(self.base_measure.beta) {
            p.push(format!(
                "base_measure.beta must be positive, got {}",
                self.base_measure.beta
            ));
        }
        if !pos(self.gp.length_scale_frac) {
            p.push(format!(
                "gp.length_scale_frac must be positive, got {}",
                self.gp.length_scale_frac
            ));
        }
        if self.max_iters == 0 || self.burn_in >= self.max_iters {
            p.push(format!(
                "need 0 <= burn_in < max_iters, got {} and {}",
                self.burn_in, self.max_iters
            ));
        }
        if self.em_max_iters == 0 {
            p.push("em_max_iters must be positive".into());
        }
        if !pos(self.conv_tol) {
            p.push(format!("conv_tol must be positive, got {}", self.conv_tol));
        }
        if !unit(self.tau_alias) || !unit(self.tau_match) {
            p.push("tau_alias and tau_match must lie in [0, 1]".into());
        }
        if self.window == 0 {
            p.push("window must be positive".into());
        }
        if !(self.admit_ratio >= T::zero()) {
            p.push(format!(
                "admit_ratio must be non-negative, got {}",
                self.admit_ratio
            ));
        }
        if !(pos(self.structure_prior) && self.structure_prior <= T::one()) {
            p.push(format!(
                "structure_prior must lie in (0, 1], got {}",
                self.structure_prior
            ));
        }
        p
    }

    pub(crate) fn schedule(&self) -> GibbsSchedule {
        GibbsSchedule {
            burn_in: self.burn_in,
            max_sweeps: self.max_iters,
            window: TRACE_WINDOW,
        }
    }

    pub(crate) fn seed_for(&self, label: &str) -> u64 {
        self.seed ^ fnv1a(label)
    }

    pub(crate) fn spec_settings(&self, label: &str) -> SpecSettings<T> {
        SpecSettings {
            alpha: self.alpha,
            gp: self.gp.clone(),
            schedule: self.schedule(),
            conv_tol: self.conv_tol,
            seed: self.seed_for(label),
        }
    }

    pub(crate) fn syntax(&self) -> SyntaxConfig<T> {
        SyntaxConfig {
            window: self.window,
            admit_ratio: self.admit_ratio,
            rho: self.structure_prior,
            max_iters: self.em_max_iters,
            conv_tol: self.conv_tol,
        }
    }
}

/// Outcome of one clustering run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GibbsReport<T> {
    pub target: String,
    pub n_items: usize,
    pub n_clusters: usize,
    pub sweeps: usize,
    pub burn_in: usize,
    pub converged: bool,
    /// Joint log-likelihood after each sweep.
    pub log_likelihood: Vec<T>,
    /// Cluster label per item, in observation order.
    pub assignments: Vec<usize>,
}

/// Column-major features of the items of one clustering target.
#[derive(Clone, Debug, Default)]
pub(crate) struct Features {
    pub n: usize,
    pub cats: Vec<Vec<Option<String>>>,
    pub nums: Vec<Vec<Option<f64>>>,
    /// Prior spread of numeric features as a fraction of their range.
    pub num_scale: f64,
}

/// Clusters `f` under `cfg`; single items skip the sampler.
pub(crate) fn cluster<T: Scalar>(
    label: &str,
    f: &Features,
    cfg: &AdaptationConfig<T>,
) -> (Vec<usize>, Option<GibbsReport<T>>) {
    if f.n <= 1 {
        return (vec![0; f.n], None);
    }
    let mut cat_sizes = Vec::new();
    let mut cat_codes: Vec<Vec<Option<usize>>> = Vec::new();
    for col in &f.cats {
        let mut book: BTreeMap<&str, usize> = BTreeMap::new();
        for v in col.iter().flatten() {
            let k = book.len();
            book.entry(v).or_insert(k);
        }
        cat_sizes.push(book.len().max(1));
        cat_codes.push(col.iter().map(|v| v.as_deref().map(|v| book[v])).collect());
    }
    let mut nigs = Vec::new();
    for col in &f.nums {
        let vals: Vec<T> = col.iter().flatten().map(|&x| T::lit(x)).collect();
        let lo = vals.iter().copied().fold(T::infinity(), T::min);
        let hi = vals.iter().copied().fold(T::neg_infinity(), T::max);
        let scale = if hi > lo {
            (hi - lo) * T::lit(f.num_scale)
        } else {
            T::one()
        };
        nigs.push(Nig::weak(&vals, scale));
    }
    let items: Vec<Item<T>> = (0..f.n)
        .map(|i| Item {
            cats: cat_codes.iter().map(|c| c[i]).collect(),
            nums: f.nums.iter().map(|c| c[i].map(T::lit)).collect(),
        })
        .collect();
    let spec = MixtureSpec {
        cat_sizes,
        nums: nigs,
        alpha: cfg.alpha,
        beta: cfg.base_measure.beta,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed_for(label));
    let out = collapsed_gibbs(&items, &spec, &cfg.schedule(), cfg.conv_tol, &mut rng);
    let report = GibbsReport {
        target: label.to_string(),
        n_items: f.n,
        n_clusters: out.n_clusters,
        sweeps: out.trace.len(),
        burn_in: cfg.burn_in,
        converged: out.converged,
        log_likelihood: out.trace,
        assignments: out.assignments.clone(),
    };
    (out.assignments, Some(report))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterfaceCounts {
    pub induced: usize,
    pub unified: usize,
}

/// Share of extracted actions whose operation the adapted DSL recognises.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Coverage {
    pub actions: usize,
    pub matched: usize,
    pub unmatched_verbs: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdaptationReport<T> {
    pub n_documents: usize,
    pub operations: Vec<GibbsReport<T>>,
    pub flows: Vec<GibbsReport<T>>,
    pub interfaces: InterfaceCounts,
    pub uncovered: Uncovered,
    pub coverage: Coverage,
    /// `validate_dsl` problems of the result; empty on success.
    pub dsl_problems: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Adaptation<T> {
    pub dsl: DslDefinition,
    pub report: AdaptationReport<T>,
    pub em_state: EmState<T>,
}

#[derive(Debug, thiserror::Error)]
pub enum AdaptationError {
    #[error("invalid configuration: {}", .0.join("; "))]
    Config(Vec<String>),
    #[error("invalid prior: {}", .0.join("; "))]
    Prior(Vec<String>),
}

/// Induces a DSL from `corpus` with the vocabulary in `prior`.
pub fn adapt<T: Scalar>(
    corpus: &[ProcedureDoc],
    prior: &PriorKnowledge,
    cfg: &AdaptationConfig<T>,
) -> Result<Adaptation<T>, AdaptationError> {
    let p = cfg.problems();
    if !p.is_empty() {
        return Err(AdaptationError::Config(p));
    }
    let p = prior.problems();
    if !p.is_empty() {
        return Err(AdaptationError::Prior(p));
    }
    let obs = observe_corpus(corpus, prior, cfg.tau_match.to_f64_lossy());
    let (flows, flow_reports) = induce_flow_semantics(&obs, prior, cfg);
    let (ops, op_reports, interfaces) = induce_operation_semantics(&obs, &flows, prior, cfg);
    let (grammar, em_state) = induce_flow_syntax(&obs.flow_graphs(), &cfg.syntax());
    let dsl = assemble_dsl(ops, flows.defs, grammar, obs.machines.clone());
    let dsl_problems = validate_dsl(&dsl)
        .violations
        .iter()
        .map(|v| format!("{}: {}", v.path, v.message))
        .collect();
    let coverage = coverage(&dsl, corpus);
    Ok(Adaptation {
        dsl,
        report: AdaptationReport {
            n_documents: corpus.len(),
            operations: op_reports,
            flows: flow_reports,
            interfaces,
            uncovered: obs.uncovered,
            coverage,
            dsl_problems,
        },
        em_state,
    })
}
