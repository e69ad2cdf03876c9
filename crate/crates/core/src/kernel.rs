//! Network Evolution Chains: model definition, validation, sampling and the
//! exact one-step kernel over labeled graphs.
//!
//! A step first picks a [`TransitionScheme`] with probabilities
//! `(t(g), r(g), s(g))` and then, for an addition, an [`EdgePattern`] from the
//! [`AdditionModel`], or, for a deletion, a node label from the
//! [`DeletionModel`].
//!
//! Random draws per step, in order: one uniform `u` for the scheme
//! (addition if `u < t`, deletion if `u < t + r`, same otherwise), then
//! whatever the addition or deletion model consumes.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{NecError, Result};
use crate::graph::{EdgePattern, LabeledGraph, StateSpace, ENUMERATION_CAP, MAX_NODES};
use crate::rng::seeded_rng;
use crate::stationary::{power_iteration, StationaryDistribution, POWER_MAX_ITERATIONS, POWER_TOLERANCE};

/// Tolerance on `t + r + s = 1`.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TransitionScheme {
    Addition,
    Deletion,
    Same,
}

impl TransitionScheme {
    pub fn code(self) -> char {
        match self {
            TransitionScheme::Addition => 'A',
            TransitionScheme::Deletion => 'D',
            TransitionScheme::Same => 'S',
        }
    }
}

/// Scheme probabilities `(t, r, s)` for one graph.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeProbs {
    pub add: f64,
    pub delete: f64,
    pub same: f64,
}

impl SchemeProbs {
    pub fn new(add: f64, delete: f64, same: f64) -> Self {
        Self { add, delete, same }
    }

    pub fn sum(&self) -> f64 {
        self.add + self.delete + self.same
    }

    pub fn get(&self, scheme: TransitionScheme) -> f64 {
        match scheme {
            TransitionScheme::Addition => self.add,
            TransitionScheme::Deletion => self.delete,
            TransitionScheme::Same => self.same,
        }
    }
}

pub trait TransitionPolicy: Send + Sync {
    fn probs(&self, g: &LabeledGraph) -> SchemeProbs;
}

/// How a new node is wired to the existing ones.
pub trait AdditionModel: Send + Sync {
    fn pattern_prob(&self, g: &LabeledGraph, pattern: &EdgePattern) -> f64;

    fn sample(&self, g: &LabeledGraph, rng: &mut dyn RngCore) -> EdgePattern;

    /// Entropy in bits of the pattern distribution at `g`, by enumeration.
    fn pattern_entropy(&self, g: &LabeledGraph) -> f64 {
        crate::entropy::entropy_bits(
            EdgePattern::all(g.n()).map(|p| self.pattern_prob(g, &p)),
        )
    }
}

/// Which node is removed on a deletion.
pub trait DeletionModel: Send + Sync {
    fn node_prob(&self, g: &LabeledGraph, label: usize) -> f64;

    fn sample(&self, g: &LabeledGraph, rng: &mut dyn RngCore) -> usize;
}

/// `t`, `r`, `s` depending on the node count only; index `i - 1` holds the
/// values for graphs with `i` nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeCountPolicy {
    pub t: Vec<f64>,
    pub r: Vec<f64>,
    pub s: Vec<f64>,
}

impl TransitionPolicy for NodeCountPolicy {
    fn probs(&self, g: &LabeledGraph) -> SchemeProbs {
        let i = g.n() - 1;
        match (self.t.get(i), self.r.get(i), self.s.get(i)) {
            (Some(&t), Some(&r), Some(&s)) => SchemeProbs::new(t, r, s),
            _ => SchemeProbs::new(0.0, 0.0, 0.0),
        }
    }
}

/// Per-graph policy given by a closure.
pub struct FnPolicy<F>(pub F);

impl<F> TransitionPolicy for FnPolicy<F>
where
    F: Fn(&LabeledGraph) -> SchemeProbs + Send + Sync,
{
    fn probs(&self, g: &LabeledGraph) -> SchemeProbs {
        (self.0)(g)
    }
}

/// Erdős–Rényi wiring: each existing node links to the new one with
/// probability `q`, independently. Draws one uniform per existing node in
/// label order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErAddition {
    pub q: f64,
}

impl AdditionModel for ErAddition {
    fn pattern_prob(&self, g: &LabeledGraph, pattern: &EdgePattern) -> f64 {
        if pattern.width() != g.n() {
            return 0.0;
        }
        let k = pattern.count() as i32;
        self.q.powi(k) * (1.0 - self.q).powi(g.n() as i32 - k)
    }

    fn sample(&self, g: &LabeledGraph, rng: &mut dyn RngCore) -> EdgePattern {
        let mut bits = 0u64;
        for k in 0..g.n() {
            if rng.random::<f64>() < self.q {
                bits |= 1 << k;
            }
        }
        EdgePattern::new(g.n(), bits).expect("width checked by caller")
    }
}

/// Every node equally likely; draws one integer in `1..=n`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct UniformDeletion;

impl DeletionModel for UniformDeletion {
    fn node_prob(&self, g: &LabeledGraph, label: usize) -> f64 {
        if label >= 1 && label <= g.n() {
            1.0 / g.n() as f64
        } else {
            0.0
        }
    }

    fn sample(&self, g: &LabeledGraph, rng: &mut dyn RngCore) -> usize {
        rng.random_range(1..=g.n())
    }
}

/// Node `v` chosen with weight `1 / (1 + deg(v))`, so poorly connected nodes
/// leave first. Draws one uniform.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct InverseDegreeDeletion;

impl InverseDegreeDeletion {
    fn weights(g: &LabeledGraph) -> Vec<f64> {
        (1..=g.n()).map(|v| 1.0 / (1 + g.degree(v)) as f64).collect()
    }
}

impl DeletionModel for InverseDegreeDeletion {
    fn node_prob(&self, g: &LabeledGraph, label: usize) -> f64 {
        if label == 0 || label > g.n() {
            return 0.0;
        }
        let w = Self::weights(g);
        w[label - 1] / w.iter().sum::<f64>()
    }

    fn sample(&self, g: &LabeledGraph, rng: &mut dyn RngCore) -> usize {
        let w = Self::weights(g);
        let mut u = rng.random::<f64>() * w.iter().sum::<f64>();
        for (i, wi) in w.iter().enumerate() {
            if u < *wi {
                return i + 1;
            }
            u -= wi;
        }
        g.n()
    }
}

/// A complete chain specification.
#[derive(Clone)]
pub struct NecModel {
    n_max: usize,
    policy: Arc<dyn TransitionPolicy>,
    addition: Arc<dyn AdditionModel>,
    deletion: Arc<dyn DeletionModel>,
}

impl fmt::Debug for NecModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NecModel").field("n_max", &self.n_max).finish_non_exhaustive()
    }
}

impl NecModel {
    /// Builds and validates a model; any violation is returned as an error.
    pub fn new(
        n_max: usize,
        policy: Arc<dyn TransitionPolicy>,
        addition: Arc<dyn AdditionModel>,
        deletion: Arc<dyn DeletionModel>,
    ) -> Result<Self> {
        let model = Self::new_unchecked(n_max, policy, addition, deletion)?;
        let report = validate_model(&model);
        if !report.is_valid() {
            return Err(NecError::Model(report.to_string()));
        }
        Ok(model)
    }

    /// Builds a model without checking the probability constraints.
    pub fn new_unchecked(
        n_max: usize,
        policy: Arc<dyn TransitionPolicy>,
        addition: Arc<dyn AdditionModel>,
        deletion: Arc<dyn DeletionModel>,
    ) -> Result<Self> {
        if n_max == 0 || n_max > MAX_NODES {
            return Err(NecError::Bounds {
                what: "n_max",
                value: n_max,
                cap: MAX_NODES,
            });
        }
        Ok(Self {
            n_max,
            policy,
            addition,
            deletion,
        })
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn scheme_probs(&self, g: &LabeledGraph) -> SchemeProbs {
        self.policy.probs(g)
    }

    pub fn pattern_prob(&self, g: &LabeledGraph, pattern: &EdgePattern) -> f64 {
        self.addition.pattern_prob(g, pattern)
    }

    pub fn node_prob(&self, g: &LabeledGraph, label: usize) -> f64 {
        self.deletion.node_prob(g, label)
    }

    pub fn addition(&self) -> &dyn AdditionModel {
        self.addition.as_ref()
    }

    pub fn deletion(&self) -> &dyn DeletionModel {
        self.deletion.as_ref()
    }

    fn check_graph(&self, g: &LabeledGraph) -> Result<()> {
        if g.n() > self.n_max {
            return Err(NecError::arg(format!(
                "graph {g} has more than n_max = {} nodes",
                self.n_max
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ViolationKind {
    OutOfRange { which: &'static str, value: f64 },
    Normalization { sum: f64 },
    AdditionAtCap { t: f64 },
    MissingAddition,
    DeletionAtSingle { r: f64 },
    MissingDeletion,
    MissingSame,
    PatternMass { sum: f64 },
    NodeMass { sum: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub graph: LabeledGraph,
    pub kind: ViolationKind,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let g = &self.graph;
        match &self.kind {
            ViolationKind::OutOfRange { which, value } => {
                write!(f, "graph {g}: {which}(g) = {value} is not a probability")
            }
            ViolationKind::Normalization { sum } => {
                write!(f, "graph {g}: t(g) + r(g) + s(g) = {sum}, expected 1")
            }
            ViolationKind::AdditionAtCap { t } => {
                write!(f, "graph {g}: t(g) = {t} but the graph already has n_max nodes")
            }
            ViolationKind::MissingAddition => {
                write!(f, "graph {g}: t(g) = 0 below n_max")
            }
            ViolationKind::DeletionAtSingle { r } => {
                write!(f, "graph {g}: r(g) = {r} on a single-node graph")
            }
            ViolationKind::MissingDeletion => {
                write!(f, "graph {g}: r(g) = 0 on a graph with more than one node")
            }
            ViolationKind::MissingSame => write!(f, "graph {g}: s(g) = 0"),
            ViolationKind::PatternMass { sum } => {
                write!(f, "graph {g}: addition pattern probabilities sum to {sum}")
            }
            ViolationKind::NodeMass { sum } => {
                write!(f, "graph {g}: deletion node probabilities sum to {sum}")
            }
        }
    }
}

/// Outcome of [`validate_model`]. `exhaustive` is false when only a sample of
/// graphs could be checked.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    pub exhaustive: bool,
    pub graphs_checked: usize,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "valid ({} graphs checked)", self.graphs_checked);
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                write!(f, "; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Spot-check sample size per node count when `n_max` is too large to
/// enumerate.
const SPOT_CHECKS_PER_SIZE: usize = 32;
/// Largest node count whose addition patterns are enumerated for the mass check.
const PATTERN_CHECK_MAX_NODES: usize = 12;

fn check_graph_constraints(m: &NecModel, g: &LabeledGraph, out: &mut Vec<Violation>) {
    let p = m.scheme_probs(g);
    let mut push = |kind| {
        out.push(Violation {
            graph: g.clone(),
            kind,
        })
    };
    for (which, value) in [("t", p.add), ("r", p.delete), ("s", p.same)] {
        if !(0.0..=1.0).contains(&value) {
            push(ViolationKind::OutOfRange { which, value });
        }
    }
    if (p.sum() - 1.0).abs() > NORMALIZATION_TOLERANCE {
        push(ViolationKind::Normalization { sum: p.sum() });
    }
    if g.n() == m.n_max() {
        if p.add != 0.0 {
            push(ViolationKind::AdditionAtCap { t: p.add });
        }
    } else if p.add <= 0.0 {
        push(ViolationKind::MissingAddition);
    }
    if g.n() == 1 {
        if p.delete != 0.0 {
            push(ViolationKind::DeletionAtSingle { r: p.delete });
        }
    } else if p.delete <= 0.0 {
        push(ViolationKind::MissingDeletion);
    }
    if p.same <= 0.0 {
        push(ViolationKind::MissingSame);
    }
    if g.n() < m.n_max() && g.n() <= PATTERN_CHECK_MAX_NODES {
        let sum: f64 = EdgePattern::all(g.n()).map(|pat| m.pattern_prob(g, &pat)).sum();
        if (sum - 1.0).abs() > 1e-9 {
            push(ViolationKind::PatternMass { sum });
        }
    }
    if g.n() > 1 {
        let sum: f64 = (1..=g.n()).map(|l| m.node_prob(g, l)).sum();
        if (sum - 1.0).abs() > 1e-9 {
            push(ViolationKind::NodeMass { sum });
        }
    }
}

/// Checks every constraint of the chain definition. All graphs are checked
/// when `n_max` is within the enumeration cap; otherwise a seeded sample of
/// Erdős–Rényi(1/2) graphs at every node count is checked.
pub fn validate_model(m: &NecModel) -> ValidationReport {
    let mut violations = Vec::new();
    if let Ok(space) = StateSpace::enumerate(m.n_max()) {
        for g in space.iter() {
            check_graph_constraints(m, g, &mut violations);
        }
        return ValidationReport {
            violations,
            exhaustive: true,
            graphs_checked: space.len(),
        };
    }
    let mut rng = seeded_rng(0);
    let half = ErAddition { q: 0.5 };
    let mut checked = 0;
    for n in 1..=m.n_max() {
        for _ in 0..SPOT_CHECKS_PER_SIZE {
            let mut g = LabeledGraph::single();
            while g.n() < n {
                let pattern = half.sample(&g, &mut rng);
                g = g.add_node(&pattern).expect("pattern width matches");
            }
            check_graph_constraints(m, &g, &mut violations);
            checked += 1;
        }
    }
    ValidationReport {
        violations,
        exhaustive: false,
        graphs_checked: checked,
    }
}

/// One recorded transition. `deleted_label` is the pre-deletion label of the
/// removed node, when known.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepRecord {
    pub scheme: TransitionScheme,
    pub deleted_label: Option<usize>,
}

impl StepRecord {
    pub fn addition() -> Self {
        Self {
            scheme: TransitionScheme::Addition,
            deleted_label: None,
        }
    }

    pub fn deletion(label: usize) -> Self {
        Self {
            scheme: TransitionScheme::Deletion,
            deleted_label: Some(label),
        }
    }

    pub fn same() -> Self {
        Self {
            scheme: TransitionScheme::Same,
            deleted_label: None,
        }
    }
}

/// Whether removing `label` from `g` yields exactly `h`.
pub(crate) fn deletes_to(g: &LabeledGraph, label: usize, h: &LabeledGraph) -> bool {
    matches!(g.delete_node(label), Ok(ref x) if x == h)
}

/// Applies a scheme that has already been chosen.
pub fn apply_scheme(
    m: &NecModel,
    g: &LabeledGraph,
    scheme: TransitionScheme,
    rng: &mut dyn RngCore,
) -> Result<(LabeledGraph, StepRecord)> {
    match scheme {
        TransitionScheme::Same => Ok((g.clone(), StepRecord::same())),
        TransitionScheme::Addition => {
            if g.n() >= m.n_max() {
                return Err(NecError::Model(format!(
                    "addition chosen at graph {g} which already has n_max nodes"
                )));
            }
            let pattern = m.addition.sample(g, rng);
            Ok((g.add_node(&pattern)?, StepRecord::addition()))
        }
        TransitionScheme::Deletion => {
            if g.n() == 1 {
                return Err(NecError::InvalidDeletion);
            }
            let label = m.deletion.sample(g, rng);
            Ok((g.delete_node(label)?, StepRecord::deletion(label)))
        }
    }
}

/// Samples one transition from `g`.
pub fn step(
    m: &NecModel,
    g: &LabeledGraph,
    rng: &mut dyn RngCore,
) -> Result<(LabeledGraph, StepRecord)> {
    m.check_graph(g)?;
    let p = m.scheme_probs(g);
    let u: f64 = rng.random();
    let scheme = if u < p.add {
        TransitionScheme::Addition
    } else if u < p.add + p.delete {
        TransitionScheme::Deletion
    } else {
        TransitionScheme::Same
    };
    apply_scheme(m, g, scheme, rng)
}

/// A realized chain `G_1, ..., G_L`, optionally annotated with the step taken
/// between consecutive states.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphChain {
    n_max: usize,
    seed: u64,
    states: Vec<LabeledGraph>,
    steps: Vec<StepRecord>,
}

impl GraphChain {
    /// Builds a chain after checking that it could have been produced by some
    /// model bounded by `n_max`. `steps` is either empty or has one entry per
    /// transition.
    pub fn new(
        n_max: usize,
        seed: u64,
        states: Vec<LabeledGraph>,
        steps: Vec<StepRecord>,
    ) -> Result<Self> {
        let first = states
            .first()
            .ok_or_else(|| NecError::arg("a chain needs at least one state"))?;
        if first.n() != 1 {
            return Err(NecError::arg(format!(
                "a chain must start at the single-node graph, found {first}"
            )));
        }
        if !steps.is_empty() && steps.len() + 1 != states.len() {
            return Err(NecError::arg(format!(
                "{} step annotations for {} states",
                steps.len(),
                states.len()
            )));
        }
        for (i, pair) in states.windows(2).enumerate() {
            let (g, h) = (&pair[0], &pair[1]);
            if h.n() > n_max {
                return Err(NecError::arg(format!(
                    "state {} ({h}) exceeds n_max = {n_max}",
                    i + 2
                )));
            }
            let scheme = if h.n() == g.n() && h == g {
                TransitionScheme::Same
            } else if h.n() == g.n() + 1 && g.is_extended_by(h) {
                TransitionScheme::Addition
            } else if h.n() + 1 == g.n() && (1..=g.n()).any(|l| deletes_to(g, l, h)) {
                TransitionScheme::Deletion
            } else {
                return Err(NecError::arg(format!(
                    "no single step leads from state {} ({g}) to state {} ({h})",
                    i + 1,
                    i + 2
                )));
            };
            if let Some(rec) = steps.get(i) {
                if rec.scheme != scheme {
                    return Err(NecError::arg(format!(
                        "step {} is annotated {} but the states imply {}",
                        i + 1,
                        rec.scheme.code(),
                        scheme.code()
                    )));
                }
                if let Some(label) = rec.deleted_label {
                    if !deletes_to(g, label, h) {
                        return Err(NecError::arg(format!(
                            "step {}: deleting node {label} from {g} does not give {h}",
                            i + 1
                        )));
                    }
                }
            }
        }
        Ok(Self {
            n_max,
            seed,
            states,
            steps,
        })
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn states(&self) -> &[LabeledGraph] {
        &self.states
    }

    pub fn steps(&self) -> &[StepRecord] {
        &self.steps
    }

    pub fn is_annotated(&self) -> bool {
        self.steps.len() + 1 == self.states.len()
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Drops the first `k` states, keeping the annotations aligned. The
    /// result no longer starts at the single-node graph.
    pub fn tail(&self, k: usize) -> (Vec<LabeledGraph>, Vec<StepRecord>) {
        let k = k.min(self.states.len() - 1);
        let steps = if self.is_annotated() {
            self.steps[k..].to_vec()
        } else {
            Vec::new()
        };
        (self.states[k..].to_vec(), steps)
    }
}

/// Simulates `length` states from the single-node graph with a fresh
/// generator seeded by `seed`.
pub fn simulate(m: &NecModel, length: usize, seed: u64) -> Result<GraphChain> {
    if length == 0 {
        return Err(NecError::arg("chain length must be at least 1"));
    }
    let mut rng = seeded_rng(seed);
    let mut states = Vec::with_capacity(length);
    let mut steps = Vec::with_capacity(length - 1);
    let mut g = LabeledGraph::single();
    states.push(g.clone());
    for _ in 1..length {
        let (next, rec) = step(m, &g, &mut rng)?;
        states.push(next.clone());
        steps.push(rec);
        g = next;
    }
    Ok(GraphChain {
        n_max: m.n_max(),
        seed,
        states,
        steps,
    })
}

/// Exact `p(g2 | g)` over labeled graphs. Deletions of distinct labels that
/// produce the same labeled graph have their probabilities summed.
pub fn transition_prob(m: &NecModel, g: &LabeledGraph, g2: &LabeledGraph) -> Result<f64> {
    m.check_graph(g)?;
    m.check_graph(g2)?;
    let p = m.scheme_probs(g);
    let prob = if g2.n() == g.n() {
        if g2 == g {
            p.same
        } else {
            0.0
        }
    } else if g2.n() == g.n() + 1 {
        if p.add > 0.0 && g.is_extended_by(g2) {
            p.add * m.pattern_prob(g, &g2.last_node_pattern()?)
        } else {
            0.0
        }
    } else if g2.n() + 1 == g.n() && p.delete > 0.0 {
        let mass: f64 = (1..=g.n())
            .filter(|&l| deletes_to(g, l, g2))
            .map(|l| m.node_prob(g, l))
            .sum();
        p.delete * mass
    } else {
        0.0
    };
    Ok(prob)
}

/// The full kernel over an enumerated state space, in compressed sparse rows.
#[derive(Debug, Clone)]
pub struct GraphKernel {
    space: StateSpace,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl GraphKernel {
    pub fn build(m: &NecModel) -> Result<Self> {
        if m.n_max() > ENUMERATION_CAP {
            return Err(NecError::Bounds {
                what: "n_max for the exact graph kernel",
                value: m.n_max(),
                cap: ENUMERATION_CAP,
            });
        }
        let space = StateSpace::enumerate(m.n_max())?;
        let mut row_ptr = Vec::with_capacity(space.len() + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        let mut row: Vec<(usize, f64)> = Vec::new();
        row_ptr.push(0);
        for g in space.iter() {
            row.clear();
            let p = m.scheme_probs(g);
            if p.same > 0.0 {
                row.push((space.index_of(g).expect("g in space"), p.same));
            }
            if p.add > 0.0 && g.n() < m.n_max() {
                for pattern in EdgePattern::all(g.n()) {
                    let w = m.pattern_prob(g, &pattern);
                    if w > 0.0 {
                        let h = g.add_node(&pattern)?;
                        row.push((space.index_of(&h).expect("child in space"), p.add * w));
                    }
                }
            }
            if p.delete > 0.0 && g.n() > 1 {
                for label in 1..=g.n() {
                    let w = m.node_prob(g, label);
                    if w > 0.0 {
                        let h = g.delete_node(label)?;
                        row.push((space.index_of(&h).expect("parent in space"), p.delete * w));
                    }
                }
            }
            row.sort_by_key(|&(j, _)| j);
            let start = cols.len();
            for &(j, v) in row.iter() {
                if cols.len() > start && *cols.last().unwrap() == j {
                    *vals.last_mut().unwrap() += v;
                } else {
                    cols.push(j);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        Ok(Self {
            space,
            row_ptr,
            cols,
            vals,
        })
    }

    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    pub fn len(&self) -> usize {
        self.space.len()
    }

    pub fn is_empty(&self) -> bool {
        self.space.is_empty()
    }

    /// Non-zero entries `(j, P[i][j])` of row `i`, ascending in `j`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[range.clone()].iter().copied().zip(self.vals[range].iter().copied())
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        self.row(i).map(|(_, v)| v).sum()
    }

    /// Writes `pi P` into `out` (which must be zeroed).
    pub fn left_multiply(&self, pi: &[f64], out: &mut [f64]) {
        for (i, &w) in pi.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            for (j, v) in self.row(i) {
                out[j] += w * v;
            }
        }
    }

    pub fn stationary(&self) -> Result<StationaryDistribution> {
        let n = self.len();
        self.stationary_from(&vec![1.0 / n as f64; n])
    }

    pub fn stationary_from(&self, init: &[f64]) -> Result<StationaryDistribution> {
        if init.len() != self.len() {
            return Err(NecError::arg(format!(
                "initial vector has length {}, state space has {}",
                init.len(),
                self.len()
            )));
        }
        power_iteration(
            init,
            |pi, out| self.left_multiply(pi, out),
            POWER_TOLERANCE,
            POWER_MAX_ITERATIONS,
        )
    }
}

/// Stationary distribution over the enumerated graphs of `m`, indexed like
/// `StateSpace::enumerate(m.n_max())`.
pub fn stationary_graph_distribution(m: &NecModel) -> Result<StationaryDistribution> {
    GraphKernel::build(m)?.stationary()
}
