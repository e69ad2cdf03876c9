//! Entropy rates of Network Evolution Chains.
//!
//! Two exact rates are available for an enumerable model:
//!
//! * the decomposition rate ([`formula_entropy_rate`]): scheme entropy plus
//!   the entropy of the chosen pattern or deleted node. It treats every
//!   deleted node as a distinguishable outcome.
//! * the kernel rate ([`kernel_entropy_rate`]): the Markov entropy rate of
//!   the labeled-graph kernel, where deletions that produce the same labeled
//!   graph are merged.
//!
//! Their difference is the deletion-collision gap. Empirical rates come from
//! `-(1/n) log2 p(G_1..G_n)` of a realized chain, with the path probability
//! taken either from the kernel or from the per-step choices (labeled path).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{NecError, Result};
use crate::graph::{LabeledGraph, StateSpace};
use crate::kernel::{
    deletes_to, transition_prob, GraphChain, GraphKernel, NecModel, TransitionScheme,
};
use crate::stationary::StationaryDistribution;

/// `-x log2 x` with `0 log 0 = 0`.
pub fn neg_xlog2x(x: f64) -> f64 {
    if x > 0.0 {
        -x * x.log2()
    } else {
        0.0
    }
}

/// Shannon entropy in bits of a (sub-)probability vector.
pub fn entropy_bits(probs: impl IntoIterator<Item = f64>) -> f64 {
    probs.into_iter().map(neg_xlog2x).sum()
}

fn check_pi(space: &StateSpace, pi: &StationaryDistribution) -> Result<()> {
    if pi.len() != space.len() {
        return Err(NecError::arg(format!(
            "stationary vector has {} entries but the state space has {}",
            pi.len(),
            space.len()
        )));
    }
    Ok(())
}

/// Entropy of the deleted-node choice at `g`.
fn deleted_node_entropy(m: &NecModel, g: &LabeledGraph) -> f64 {
    entropy_bits((1..=g.n()).map(|l| m.node_prob(g, l)))
}

/// Entropy of the labeled graph that results from a deletion at `g`.
fn deletion_outcome_entropy(m: &NecModel, g: &LabeledGraph) -> Result<f64> {
    let mut outcomes: Vec<(LabeledGraph, f64)> = Vec::with_capacity(g.n());
    for label in 1..=g.n() {
        let w = m.node_prob(g, label);
        let h = g.delete_node(label)?;
        match outcomes.iter_mut().find(|(x, _)| *x == h) {
            Some((_, acc)) => *acc += w,
            None => outcomes.push((h, w)),
        }
    }
    Ok(entropy_bits(outcomes.into_iter().map(|(_, w)| w)))
}

/// Decomposition entropy rate in bits per step:
/// `sum_g pi(g) [H(t,r,s) + t H(pattern | g) + r H(deleted node | g)]`.
pub fn formula_entropy_rate(
    m: &NecModel,
    space: &StateSpace,
    pi: &StationaryDistribution,
) -> Result<f64> {
    check_pi(space, pi)?;
    let mut rate = 0.0;
    for (g, &w) in space.iter().zip(&pi.probs) {
        if w == 0.0 {
            continue;
        }
        let p = m.scheme_probs(g);
        let mut h = neg_xlog2x(p.add) + neg_xlog2x(p.delete) + neg_xlog2x(p.same);
        if p.add > 0.0 {
            h += p.add * m.addition().pattern_entropy(g);
        }
        if p.delete > 0.0 {
            h += p.delete * deleted_node_entropy(m, g);
        }
        rate += w * h;
    }
    Ok(rate)
}

/// `-sum_i pi_i sum_j P_ij log2 P_ij` over the graph kernel.
pub fn kernel_entropy_rate_with(kernel: &GraphKernel, pi: &StationaryDistribution) -> Result<f64> {
    check_pi(kernel.space(), pi)?;
    Ok((0..kernel.len())
        .map(|i| pi.probs[i] * entropy_bits(kernel.row(i).map(|(_, v)| v)))
        .sum())
}

/// Exact Markov entropy rate of the labeled-graph kernel of `m`.
pub fn kernel_entropy_rate(m: &NecModel) -> Result<f64> {
    let kernel = GraphKernel::build(m)?;
    let pi = kernel.stationary()?;
    kernel_entropy_rate_with(&kernel, &pi)
}

/// `sum_g pi(g) r(g) [H(deleted node | g) - H(deletion outcome | g)]`, the
/// information carried by node identity that the labeled graph forgets.
pub fn deletion_collision_gap(
    m: &NecModel,
    space: &StateSpace,
    pi: &StationaryDistribution,
) -> Result<f64> {
    check_pi(space, pi)?;
    let mut gap = 0.0;
    for (g, &w) in space.iter().zip(&pi.probs) {
        let r = m.scheme_probs(g).delete;
        if w == 0.0 || r == 0.0 || g.n() < 2 {
            continue;
        }
        gap += w * r * (deleted_node_entropy(m, g) - deletion_outcome_entropy(m, g)?);
    }
    Ok(gap)
}

/// Which probability a realized path is scored with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PathMode {
    /// Aggregated kernel probability `p(G_{i+1} | G_i)`.
    GraphKernel,
    /// Probability of the recorded scheme and node choice, without merging
    /// deletions that collide.
    LabeledPath,
}

impl fmt::Display for PathMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PathMode::GraphKernel => "graph-kernel",
            PathMode::LabeledPath => "labeled-path",
        })
    }
}

impl FromStr for PathMode {
    type Err = NecError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "graph-kernel" => Ok(PathMode::GraphKernel),
            "labeled-path" => Ok(PathMode::LabeledPath),
            other => Err(NecError::arg(format!(
                "unknown mode {other:?}; expected graph-kernel or labeled-path"
            ))),
        }
    }
}

/// `log2 p(G_1, ..., G_n)`. `value` is `-inf` when some transition has zero
/// probability, and `zero_step` then holds the 0-based index `i` of the first
/// impossible move `G_{i+1} -> G_{i+2}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainLogProb {
    pub value: f64,
    pub zero_step: Option<usize>,
}

fn labeled_step_prob(m: &NecModel, chain: &GraphChain, i: usize) -> Result<f64> {
    let g = &chain.states()[i];
    let h = &chain.states()[i + 1];
    let rec = chain.steps()[i];
    let p = m.scheme_probs(g);
    Ok(match rec.scheme {
        TransitionScheme::Same => p.same,
        TransitionScheme::Addition => p.add * m.pattern_prob(g, &h.last_node_pattern()?),
        TransitionScheme::Deletion => {
            let label = rec.deleted_label.ok_or_else(|| {
                NecError::arg(format!(
                    "step {} is a deletion without a recorded label; labeled-path mode needs it",
                    i + 1
                ))
            })?;
            debug_assert!(deletes_to(g, label, h));
            p.delete * m.node_prob(g, label)
        }
    })
}

/// `log2` of each transition probability along the chain.
pub fn transition_log_terms(m: &NecModel, chain: &GraphChain, mode: PathMode) -> Result<Vec<f64>> {
    if mode == PathMode::LabeledPath && !chain.is_annotated() {
        return Err(NecError::arg(
            "labeled-path mode needs a chain annotated with schemes and deletion labels",
        ));
    }
    let states = chain.states();
    let mut terms = Vec::with_capacity(states.len().saturating_sub(1));
    for i in 0..states.len().saturating_sub(1) {
        let p = match mode {
            PathMode::GraphKernel => transition_prob(m, &states[i], &states[i + 1])?,
            PathMode::LabeledPath => labeled_step_prob(m, chain, i)?,
        };
        terms.push(p.log2());
    }
    Ok(terms)
}

fn check_initial(initial_prob: f64) -> Result<()> {
    if !(initial_prob > 0.0 && initial_prob <= 1.0) {
        return Err(NecError::arg(format!(
            "stationary probability of the first state must lie in (0, 1], got {initial_prob}"
        )));
    }
    Ok(())
}

/// `log2 pi(G_1) + sum_i log2 p(G_{i+1} | G_i)`, where `initial_prob` is the
/// stationary probability of the first state.
pub fn chain_log_prob(
    m: &NecModel,
    chain: &GraphChain,
    mode: PathMode,
    initial_prob: f64,
) -> Result<ChainLogProb> {
    check_initial(initial_prob)?;
    let terms = transition_log_terms(m, chain, mode)?;
    let zero_step = terms.iter().position(|t| *t == f64::NEG_INFINITY);
    let value = initial_prob.log2() + terms.iter().sum::<f64>();
    Ok(ChainLogProb { value, zero_step })
}

/// AEP estimate `-(1/n) log2 p(G_1..G_n)` together with its running prefix
/// series: `prefix[k - 1]` is the estimate from the first `k` states.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalRate {
    pub rate: f64,
    pub n: usize,
    pub prefix: Vec<f64>,
    pub zero_step: Option<usize>,
}

impl EmpiricalRate {
    /// Largest distance between the final estimate and the prefix series
    /// over its last `fraction` of entries.
    pub fn tail_spread(&self, fraction: f64) -> f64 {
        let start = ((1.0 - fraction) * self.prefix.len() as f64) as usize;
        self.prefix[start..]
            .iter()
            .map(|x| (x - self.rate).abs())
            .fold(0.0, f64::max)
    }
}

/// Turns per-step `log2` terms into the running `-(1/k) log2 p` series.
pub fn prefix_rates(initial_log2: f64, terms: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(terms.len() + 1);
    let mut acc = initial_log2;
    out.push(-acc);
    for (k, t) in terms.iter().enumerate() {
        acc += t;
        out.push(-acc / (k + 2) as f64);
    }
    out
}

pub fn empirical_entropy_rate(
    m: &NecModel,
    chain: &GraphChain,
    mode: PathMode,
    initial_prob: f64,
) -> Result<EmpiricalRate> {
    if chain.len() < 2 {
        return Err(NecError::arg("empirical entropy rate needs at least two states"));
    }
    check_initial(initial_prob)?;
    let terms = transition_log_terms(m, chain, mode)?;
    let zero_step = terms.iter().position(|t| *t == f64::NEG_INFINITY);
    let prefix = prefix_rates(initial_prob.log2(), &terms);
    Ok(EmpiricalRate {
        rate: *prefix.last().expect("non-empty"),
        n: chain.len(),
        prefix,
        zero_step,
    })
}

/// Typical-set membership of a sequence of length `n`:
/// `H - eps <= -(1/n) log2 p <= H + eps`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TypicalityVerdict {
    pub epsilon: f64,
    pub entropy_rate: f64,
    pub neg_log_prob_per_symbol: f64,
    pub n: usize,
    /// `log2` of the lower bound `2^{-n(H+eps)}`.
    pub log2_lower: f64,
    /// `log2` of the upper bound `2^{-n(H-eps)}`.
    pub log2_upper: f64,
    pub typical: bool,
    /// `eps - |per-symbol - H|`; non-negative exactly when typical.
    pub margin: f64,
}

pub fn typicality_test(
    entropy_rate: f64,
    neg_log_prob_per_symbol: f64,
    n: usize,
    epsilon: f64,
) -> Result<TypicalityVerdict> {
    if !(epsilon > 0.0) {
        return Err(NecError::arg(format!("epsilon must be positive, got {epsilon}")));
    }
    let deviation = (neg_log_prob_per_symbol - entropy_rate).abs();
    let typical = entropy_rate - epsilon <= neg_log_prob_per_symbol
        && neg_log_prob_per_symbol <= entropy_rate + epsilon;
    Ok(TypicalityVerdict {
        epsilon,
        entropy_rate,
        neg_log_prob_per_symbol,
        n,
        log2_lower: -(n as f64) * (entropy_rate + epsilon),
        log2_upper: -(n as f64) * (entropy_rate - epsilon),
        typical,
        margin: epsilon - deviation,
    })
}

/// Summary record written as `entropy.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntropyReport {
    pub formula_rate: f64,
    pub kernel_rate: Option<f64>,
    pub empirical_rate: Option<f64>,
    pub gap: Option<f64>,
    pub n: usize,
    pub mode: PathMode,
}
