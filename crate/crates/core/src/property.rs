//! Network Property Chains: the image `Y_i = f(G_i)` of a graph chain under
//! a discrete property, and the hidden Markov models used to score it.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::entropy::prefix_rates;
use crate::ernec::{make_ernec, node_stationary_analytic, ErnecParams, NodeCountMatrix};
use crate::error::{NecError, Result};
use crate::graph::{triangle_count, EdgePattern, LabeledGraph, StateSpace, ENUMERATION_CAP};
use crate::hmm::{baum_welch, estimate_supervised, jittered_uniform, BaumWelchOptions, Hmm};
use crate::kernel::{simulate, GraphChain, GraphKernel, NecModel};
use crate::rng::{derive_seed, streams};

/// Largest `n_max` for which the dense graph-state HMM is built.
pub const FULL_HMM_CAP: usize = 5;

type EvalFn = dyn Fn(&LabeledGraph) -> usize + Send + Sync;
type AlphabetFn = dyn Fn(usize) -> usize + Send + Sync;

/// A discrete graph property with values in `0..alphabet(n_max)`.
#[derive(Clone)]
pub struct PropertyFn {
    name: String,
    eval: Arc<EvalFn>,
    alphabet: Arc<AlphabetFn>,
}

impl fmt::Debug for PropertyFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PropertyFn").field("name", &self.name).finish()
    }
}

fn choose(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    (0..k).fold(1, |acc, j| acc * (n - j) / (j + 1))
}

impl PropertyFn {
    pub fn new<F, A>(name: impl Into<String>, eval: F, alphabet: A) -> Self
    where
        F: Fn(&LabeledGraph) -> usize + Send + Sync + 'static,
        A: Fn(usize) -> usize + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            eval: Arc::new(eval),
            alphabet: Arc::new(alphabet),
        }
    }

    pub fn node_count() -> Self {
        Self::new("node-count", |g| g.n(), |n_max| n_max + 1)
    }

    pub fn edge_count() -> Self {
        Self::new("edge-count", |g| g.edge_count(), |n_max| choose(n_max, 2) + 1)
    }

    pub fn triangle_count() -> Self {
        Self::new("triangle-count", triangle_count, |n_max| choose(n_max, 3) + 1)
    }

    pub fn constant() -> Self {
        Self::new("constant", |_| 0, |_| 1)
    }

    /// Index of the graph in the enumerated state space; injective on `S`.
    pub fn state_id(n_max: usize) -> Result<Self> {
        let space = Arc::new(StateSpace::enumerate(n_max)?);
        let size = space.len();
        let lookup = Arc::clone(&space);
        Ok(Self::new(
            "state-id",
            move |g| lookup.index_of(g).unwrap_or(size),
            move |_| size,
        ))
    }

    /// Resolves one of the built-in names: `node-count`, `edge-count`,
    /// `triangle-count`, `constant`, `state-id`.
    pub fn by_name(name: &str, n_max: usize) -> Result<Self> {
        match name {
            "node-count" => Ok(Self::node_count()),
            "edge-count" => Ok(Self::edge_count()),
            "triangle-count" => Ok(Self::triangle_count()),
            "constant" => Ok(Self::constant()),
            "state-id" => Self::state_id(n_max),
            other => Err(NecError::arg(format!(
                "unknown property {other:?}; expected node-count, edge-count, triangle-count, constant or state-id"
            ))),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn eval(&self, g: &LabeledGraph) -> usize {
        (self.eval)(g)
    }

    pub fn alphabet(&self, n_max: usize) -> usize {
        (self.alphabet)(n_max)
    }

    fn checked_eval(&self, g: &LabeledGraph, k: usize) -> Result<usize> {
        let y = self.eval(g);
        if y >= k {
            return Err(NecError::arg(format!(
                "property {} maps {g} to {y}, outside its alphabet 0..{k}",
                self.name
            )));
        }
        Ok(y)
    }
}

/// Observed property values of a chain.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PropertyChainData {
    pub property: String,
    pub symbols: Vec<usize>,
    /// Seed of the graph chain the symbols were extracted from, if known.
    pub source_seed: Option<u64>,
}

impl PropertyChainData {
    pub fn new(property: impl Into<String>, symbols: Vec<usize>) -> Result<Self> {
        if symbols.is_empty() {
            return Err(NecError::arg("a property chain needs at least one symbol"));
        }
        Ok(Self {
            property: property.into(),
            symbols,
            source_seed: None,
        })
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }
}

pub fn extract_npc(chain: &GraphChain, f: &PropertyFn) -> PropertyChainData {
    PropertyChainData {
        property: f.name().to_string(),
        symbols: chain.states().iter().map(|g| f.eval(g)).collect(),
        source_seed: Some(chain.seed()),
    }
}

/// HMM whose hidden states are the labeled graphs of `S`, with the exact
/// kernel as transition matrix, deterministic emissions `1{f(g) = y}` and
/// the stationary law as initial distribution.
pub fn build_full_hmm(m: &NecModel, f: &PropertyFn) -> Result<Hmm> {
    if m.n_max() > FULL_HMM_CAP {
        return Err(NecError::Bounds {
            what: "n_max for the graph-state HMM",
            value: m.n_max(),
            cap: FULL_HMM_CAP,
        });
    }
    let kernel = GraphKernel::build(m)?;
    let pi = kernel.stationary()?;
    let size = kernel.len();
    let k = f.alphabet(m.n_max());
    let mut trans = DMatrix::zeros(size, size);
    let mut emit = DMatrix::zeros(size, k);
    for (i, g) in kernel.space().iter().enumerate() {
        for (j, p) in kernel.row(i) {
            trans[(i, j)] = p;
        }
        // Rows are exact up to rounding; fold the residue into the diagonal.
        let drift = 1.0 - trans.row(i).sum();
        trans[(i, i)] += drift;
        emit[(i, f.checked_eval(g, k)?)] = 1.0;
    }
    Hmm::new(pi.probs, trans, emit)
}

/// How a node-count state spreads its emission over the graphs with that
/// many nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmissionWeighting {
    /// Each graph weighted by its Erdős–Rényi probability
    /// `q^E (1-q)^{C(n,2)-E}`.
    #[default]
    QWeighted,
    /// Every graph weighted `2^{-C(n,2)}`, whatever `q` is. Agrees with
    /// [`EmissionWeighting::QWeighted`] only at `q = 1/2`.
    Uniform,
}

impl EmissionWeighting {
    /// True when this weighting departs from the conditional law of the
    /// model (uniform counting with `q != 1/2`).
    pub fn is_inexact_for(self, q: f64) -> bool {
        self == EmissionWeighting::Uniform && q != 0.5
    }
}

/// Exact `p(y | n nodes)` under `weighting`, by enumerating the `n`-node
/// graphs.
pub fn node_count_emissions(
    n: usize,
    q: f64,
    f: &PropertyFn,
    k: usize,
    weighting: EmissionWeighting,
) -> Result<Vec<f64>> {
    if n == 0 || n > ENUMERATION_CAP {
        return Err(NecError::Bounds {
            what: "node count for exact emissions",
            value: n,
            cap: ENUMERATION_CAP,
        });
    }
    let pairs = n * (n - 1) / 2;
    let mut row = vec![0.0; k];
    for pattern in EdgePattern::all(pairs) {
        let g = LabeledGraph::from_word(n, pattern.bits());
        let e = pattern.count() as i32;
        let w = match weighting {
            EmissionWeighting::QWeighted => q.powi(e) * (1.0 - q).powi(pairs as i32 - e),
            EmissionWeighting::Uniform => 0.5f64.powi(pairs as i32),
        };
        row[f.checked_eval(&g, k)?] += w;
    }
    Ok(row)
}

/// HMM over node counts `1..=n_max` with the ERNEC node-count matrix,
/// exact emissions under `weighting` and the analytic node-count law as
/// initial distribution.
pub fn build_reduced_hmm(
    params: &ErnecParams,
    f: &PropertyFn,
    weighting: EmissionWeighting,
) -> Result<Hmm> {
    let trans = NodeCountMatrix::new(params)?;
    let pi = node_stationary_analytic(params)?;
    let k = f.alphabet(params.n_max);
    let mut emit = DMatrix::zeros(params.n_max, k);
    for n in 1..=params.n_max {
        let row = node_count_emissions(n, params.q, f, k, weighting)?;
        for (y, p) in row.into_iter().enumerate() {
            emit[(n - 1, y)] = p;
        }
    }
    Hmm::new(pi.probs, trans.matrix().clone(), emit)
}

/// How the pipeline fits emission probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmissionFit {
    /// Counting with the node-count path observed.
    #[default]
    Supervised,
    /// Baum–Welch on the symbols alone; all parameters are re-estimated.
    BaumWelch,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NpcOptions {
    /// Fraction of the chain discarded before estimation, in `[0, 0.5]`.
    pub burn_in: f64,
    pub fit: EmissionFit,
}

impl Default for NpcOptions {
    fn default() -> Self {
        Self {
            burn_in: 0.1,
            fit: EmissionFit::Supervised,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct NpcEstimate {
    pub property: String,
    /// `-(1/n) log2 p(Y_1..Y_n)` over the kept symbols.
    pub rate: f64,
    pub n: usize,
    pub burn_in_steps: usize,
    /// Rate after each prefix of the kept symbols.
    pub prefix: Vec<f64>,
    #[serde(skip)]
    pub hmm: Hmm,
}

/// Simulates an ERNEC, extracts `f` along the chain, drops the burn-in,
/// fits the reduced HMM (node-count transitions fixed to the exact matrix
/// when supervised) and scores the kept symbols with the forward algorithm.
pub fn npc_entropy_pipeline(
    params: &ErnecParams,
    f: &PropertyFn,
    length: usize,
    seed: u64,
    options: NpcOptions,
) -> Result<NpcEstimate> {
    if !(0.0..=0.5).contains(&options.burn_in) {
        return Err(NecError::arg(format!(
            "burn-in fraction {} must lie in [0, 0.5]",
            options.burn_in
        )));
    }
    let model = make_ernec(params)?;
    let chain = simulate(&model, length, seed)?;
    let npc = extract_npc(&chain, f);
    let skip = (options.burn_in * length as f64).floor() as usize;
    let skip = skip.min(length - 1);
    let symbols = &npc.symbols[skip..];
    let hidden: Vec<usize> = chain.states()[skip..].iter().map(|g| g.n() - 1).collect();
    let m = params.n_max;
    let k = f.alphabet(m);

    let hmm = match options.fit {
        EmissionFit::Supervised => {
            let fitted = estimate_supervised(symbols, &hidden, m, k)?;
            let pi = node_stationary_analytic(params)?;
            let trans = NodeCountMatrix::new(params)?;
            Hmm::new(pi.probs, trans.matrix().clone(), fitted.emit().clone())?
        }
        EmissionFit::BaumWelch => {
            let init = jittered_uniform(m, k, derive_seed(seed, streams::JITTER))?;
            baum_welch(symbols, init, BaumWelchOptions::default())?.hmm
        }
    };
    let series = hmm.forward_log_prob_series(symbols)?;
    let mut terms = Vec::with_capacity(series.len().saturating_sub(1));
    for w in series.windows(2) {
        terms.push(w[1] - w[0]);
    }
    let prefix = prefix_rates(series[0], &terms);
    let rate = *prefix.last().expect("at least one kept symbol");
    Ok(NpcEstimate {
        property: f.name().to_string(),
        rate,
        n: symbols.len(),
        burn_in_steps: skip,
        prefix,
        hmm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entropy::{chain_log_prob, PathMode};
    use crate::ernec::node_count_entropy_rate;
    use crate::kernel::tests::er_model;
    use crate::rng::seeded_rng;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    fn params3(q: f64) -> ErnecParams {
        ErnecParams::new(3, q, vec![0.4, 0.3, 0.0], vec![0.0, 0.3, 0.5], vec![0.6, 0.4, 0.5]).unwrap()
    }

    #[test]
    fn extraction_examples() {
        let k3 = LabeledGraph::complete(3).unwrap();
        let single = LabeledGraph::single();
        let edge = LabeledGraph::complete(2).unwrap();
        assert_eq!(PropertyFn::triangle_count().eval(&k3), 1);
        assert_eq!(PropertyFn::edge_count().eval(&single), 0);
        assert_eq!(PropertyFn::edge_count().eval(&edge), 1);

        let m = make_ernec(&params3(0.5)).unwrap();
        let chain = simulate(&m, 50, 1).unwrap();
        let npc = extract_npc(&chain, &PropertyFn::node_count());
        let sizes: Vec<usize> = chain.states().iter().map(LabeledGraph::n).collect();
        assert_eq!(npc.symbols, sizes);
        assert_eq!(npc.source_seed, Some(1));
    }

    #[test]
    fn alphabets_cover_the_codomain() {
        let space = StateSpace::enumerate(4).unwrap();
        for f in ["node-count", "edge-count", "triangle-count", "constant", "state-id"] {
            let f = PropertyFn::by_name(f, 4).unwrap();
            let k = f.alphabet(4);
            assert!(space.iter().all(|g| f.eval(g) < k), "{}", f.name());
        }
        assert!(PropertyFn::by_name("diameter", 4).is_err());
    }

    #[test]
    fn full_hmm_two_node_worked_example() {
        let params = ErnecParams::new(2, 0.3, vec![0.4, 0.0], vec![0.0, 0.2], vec![0.6, 0.8]).unwrap();
        let m = make_ernec(&params).unwrap();
        let h = build_full_hmm(&m, &PropertyFn::node_count()).unwrap();
        let pi1 = h.initial()[0];
        assert_abs_diff_eq!(
            h.forward_log_prob(&[1, 2]).unwrap(),
            (pi1 * 0.4).log2(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn full_hmm_with_identity_matches_graph_kernel_path() {
        let m = er_model(3, 0.6, &[0.5, 0.3, 0.0], &[0.0, 0.3, 0.4], &[0.5, 0.4, 0.6]);
        let f = PropertyFn::state_id(3).unwrap();
        let h = build_full_hmm(&m, &f).unwrap();
        let chain = simulate(&m, 400, 9).unwrap();
        let symbols: Vec<usize> = chain.states().iter().map(|g| f.eval(g)).collect();
        let pi0 = h.initial()[symbols[0]];
        let expected = chain_log_prob(&m, &chain, PathMode::GraphKernel, pi0).unwrap();
        assert_abs_diff_eq!(h.forward_log_prob(&symbols).unwrap(), expected.value, epsilon = 1e-9);
    }

    #[test]
    fn constant_property_has_probability_one() {
        let m = er_model(3, 0.5, &[0.5, 0.5, 0.0], &[0.0, 0.3, 0.5], &[0.5, 0.2, 0.5]);
        let h = build_full_hmm(&m, &PropertyFn::constant()).unwrap();
        assert_abs_diff_eq!(h.forward_log_prob(&[0; 30]).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn full_hmm_cap() {
        let m = er_model(
            6,
            0.5,
            &[0.5, 0.3, 0.3, 0.3, 0.3, 0.0],
            &[0.0, 0.3, 0.3, 0.3, 0.3, 0.5],
            &[0.5, 0.4, 0.4, 0.4, 0.4, 0.5],
        );
        assert!(matches!(
            build_full_hmm(&m, &PropertyFn::constant()),
            Err(NecError::Bounds { .. })
        ));
    }

    #[test]
    fn reduced_emission_examples() {
        let tri = PropertyFn::triangle_count();
        let uniform = node_count_emissions(3, 0.8, &tri, 2, EmissionWeighting::Uniform).unwrap();
        assert_abs_diff_eq!(uniform[1], 1.0 / 8.0, epsilon = 1e-15);
        let weighted = node_count_emissions(3, 0.8, &tri, 2, EmissionWeighting::QWeighted).unwrap();
        assert_abs_diff_eq!(weighted[1], 0.512, epsilon = 1e-15);
        let edges = node_count_emissions(2, 0.3, &PropertyFn::edge_count(), 2, EmissionWeighting::Uniform).unwrap();
        assert_abs_diff_eq!(edges[1], 0.5, epsilon = 1e-15);

        let h = build_reduced_hmm(&params3(0.7), &PropertyFn::node_count(), EmissionWeighting::QWeighted).unwrap();
        for n in 1..=3 {
            for y in 0..4 {
                assert_eq!(h.emit()[(n - 1, y)], if y == n { 1.0 } else { 0.0 });
            }
        }
        assert!(EmissionWeighting::Uniform.is_inexact_for(0.7));
        assert!(!EmissionWeighting::Uniform.is_inexact_for(0.5));
    }

    #[test]
    fn reduced_equals_full_for_node_count() {
        let params = params3(0.7);
        let m = make_ernec(&params).unwrap();
        let f = PropertyFn::node_count();
        let full = build_full_hmm(&m, &f).unwrap();
        let reduced = build_reduced_hmm(&params, &f, EmissionWeighting::QWeighted).unwrap();
        let mut rng = seeded_rng(11);
        for _ in 0..20 {
            let len = rng.random_range(1..12);
            let chain = simulate(&m, len + 30, rng.random()).unwrap();
            let symbols: Vec<usize> = chain.states()[30..].iter().map(|g| f.eval(g)).collect();
            assert_abs_diff_eq!(
                full.forward_log_prob(&symbols).unwrap(),
                reduced.forward_log_prob(&symbols).unwrap(),
                epsilon = 1e-9
            );
        }
    }

    #[test]
    fn supervised_triangle_emission_approaches_q_cubed() {
        let params = params3(0.8);
        let m = make_ernec(&params).unwrap();
        let chain = simulate(&m, 100_000, 21).unwrap();
        let f = PropertyFn::triangle_count();
        let npc = extract_npc(&chain, &f);
        let hidden: Vec<usize> = chain.states().iter().map(|g| g.n() - 1).collect();
        let h = estimate_supervised(&npc.symbols, &hidden, 3, 2).unwrap();
        assert!((h.emit()[(2, 1)] - 0.512).abs() < 0.02, "{}", h.emit()[(2, 1)]);
        assert_eq!(h.emit()[(0, 1)], 0.0);
    }

    #[test]
    fn pipeline_node_count_matches_markov_rate() {
        let params = params3(0.6);
        let est = npc_entropy_pipeline(&params, &PropertyFn::node_count(), 50_000, 4, NpcOptions::default()).unwrap();
        let exact = node_count_entropy_rate(&params).unwrap();
        assert!((est.rate - exact).abs() < 0.03, "{} vs {exact}", est.rate);
        assert_eq!(est.n, 45_000);
        assert_eq!(est.prefix.len(), est.n);
    }

    #[test]
    fn pipeline_constant_is_zero_bits() {
        let est = npc_entropy_pipeline(&params3(0.6), &PropertyFn::constant(), 5_000, 4, NpcOptions::default()).unwrap();
        assert_abs_diff_eq!(est.rate, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn pipeline_baum_welch_option_runs() {
        let opts = NpcOptions { burn_in: 0.2, fit: EmissionFit::BaumWelch };
        let est = npc_entropy_pipeline(&params3(0.8), &PropertyFn::triangle_count(), 2_000, 4, opts).unwrap();
        assert!(est.rate.is_finite() && est.rate >= 0.0 && est.rate <= 1.0 + 1e-9);
        assert!(npc_entropy_pipeline(&params3(0.8), &PropertyFn::constant(), 10, 1, NpcOptions { burn_in: 0.7, ..Default::default() }).is_err());
    }

    #[test]
    fn property_chain_marginals_are_stationary() {
        // Symbol frequencies over disjoint windows of one long chain stay
        // within a 3-sigma band of the pooled frequency. Consecutive symbols
        // are correlated, so the band uses an effective sample size.
        let params = params3(0.8);
        let m = make_ernec(&params).unwrap();
        let chain = simulate(&m, 400_000, 5).unwrap();
        let npc = extract_npc(&chain, &PropertyFn::edge_count());
        let k = 4;
        let burn = 10_000;
        let windows = 4;
        let size = (npc.len() - burn) / windows;
        let mut pooled = vec![0.0; k];
        let mut per: Vec<Vec<f64>> = Vec::new();
        for w in 0..windows {
            let mut counts = vec![0.0; k];
            for &y in &npc.symbols[burn + w * size..burn + (w + 1) * size] {
                counts[y] += 1.0;
                pooled[y] += 1.0;
            }
            per.push(counts.into_iter().map(|c| c / size as f64).collect());
        }
        let total = (size * windows) as f64;
        pooled.iter_mut().for_each(|c| *c /= total);
        // Integrated autocorrelation of these chains is a few tens of steps.
        let effective = size as f64 / 50.0;
        for counts in &per {
            for y in 0..k {
                let sigma = (pooled[y] * (1.0 - pooled[y]) / effective).sqrt();
                assert!((counts[y] - pooled[y]).abs() <= 3.0 * sigma + 1e-12, "{y}: {} vs {}", counts[y], pooled[y]);
            }
        }
    }
}
