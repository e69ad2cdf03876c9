//! Erdős–Rényi Network Evolution Chains.
//!
//! Scheme probabilities depend only on the node count, a new node links to
//! each existing node independently with probability `q`, and deletions pick
//! a node uniformly. The node count is then a birth–death chain on
//! `1..=n_max` whose stationary law has a product form, and the stationary
//! law of graphs with `N` nodes is `G(N, q)`.

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::Open01;
use serde::{Deserialize, Serialize};

use crate::entropy::neg_xlog2x;
use crate::error::{NecError, Result};
use crate::graph::{LabeledGraph, StateSpace, MAX_NODES};
use crate::kernel::{ErAddition, NecModel, NodeCountPolicy, UniformDeletion, NORMALIZATION_TOLERANCE};
use crate::stationary::{solve_null_vector, Provenance, StationaryDistribution};

/// Stationary law of the node count; entry `i - 1` is `pi_i`.
pub type NodeCountStationary = StationaryDistribution;

/// Vectors are indexed by node count: `t[i - 1]` is `t(i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErnecParams {
    pub n_max: usize,
    pub q: f64,
    pub t: Vec<f64>,
    pub r: Vec<f64>,
    pub s: Vec<f64>,
}

impl ErnecParams {
    pub fn new(n_max: usize, q: f64, t: Vec<f64>, r: Vec<f64>, s: Vec<f64>) -> Result<Self> {
        let p = Self { n_max, q, t, r, s };
        p.validate()?;
        Ok(p)
    }

    /// Checks every constraint of the ERNEC definition, naming the first one
    /// that fails.
    pub fn validate(&self) -> Result<()> {
        let n = self.n_max;
        if n == 0 || n > MAX_NODES {
            return Err(NecError::Bounds {
                what: "n_max",
                value: n,
                cap: MAX_NODES,
            });
        }
        if !(self.q > 0.0 && self.q < 1.0) {
            return Err(NecError::Params(format!(
                "q = {} must lie strictly inside (0, 1)",
                self.q
            )));
        }
        for (name, v) in [("t", &self.t), ("r", &self.r), ("s", &self.s)] {
            if v.len() != n {
                return Err(NecError::Params(format!(
                    "{name} has {} entries, expected n_max = {n}",
                    v.len()
                )));
            }
            if let Some((i, x)) = v.iter().enumerate().find(|(_, x)| !(0.0..=1.0).contains(*x)) {
                return Err(NecError::Params(format!(
                    "{name}({}) = {x} is not a probability",
                    i + 1
                )));
            }
        }
        for i in 1..=n {
            let (t, r, s) = (self.t[i - 1], self.r[i - 1], self.s[i - 1]);
            let sum = t + r + s;
            if (sum - 1.0).abs() > NORMALIZATION_TOLERANCE {
                return Err(NecError::Params(format!(
                    "t({i}) + r({i}) + s({i}) = {sum}, must equal 1"
                )));
            }
            if s <= 0.0 {
                return Err(NecError::Params(format!("s({i}) must be positive")));
            }
            if i == n && t != 0.0 {
                return Err(NecError::Params(format!("t(n_max) = t({i}) must be 0, got {t}")));
            }
            if i < n && t <= 0.0 {
                return Err(NecError::Params(format!("t({i}) must be positive below n_max")));
            }
            if i == 1 && r != 0.0 {
                return Err(NecError::Params(format!("r(1) must be 0, got {r}")));
            }
            if i > 1 && r <= 0.0 {
                return Err(NecError::Params(format!(
                    "r({i}) must be positive for more than one node"
                )));
            }
        }
        Ok(())
    }

    /// Random scheme probabilities: for `1 < i < n_max` two uniform points
    /// cut `[0, 1]` into `(t_i, r_i, s_i)` left to right; `i = 1` uses one
    /// point for `(t_1, s_1)` and `i = n_max` one point for `(r_max, s_max)`.
    /// Points are drawn from the open interval in increasing `i`.
    pub fn random<R: Rng + ?Sized>(n_max: usize, q: f64, rng: &mut R) -> Result<Self> {
        if n_max == 0 || n_max > MAX_NODES {
            return Err(NecError::Bounds {
                what: "n_max",
                value: n_max,
                cap: MAX_NODES,
            });
        }
        let mut t = vec![0.0; n_max];
        let mut r = vec![0.0; n_max];
        let mut s = vec![0.0; n_max];
        for i in 1..=n_max {
            let k = i - 1;
            if n_max == 1 {
                s[k] = 1.0;
            } else if i == 1 {
                let u: f64 = rng.sample(Open01);
                t[k] = u;
                s[k] = 1.0 - u;
            } else if i == n_max {
                let u: f64 = rng.sample(Open01);
                r[k] = u;
                s[k] = 1.0 - u;
            } else {
                let a: f64 = rng.sample(Open01);
                let b: f64 = rng.sample(Open01);
                let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
                t[k] = lo;
                r[k] = hi - lo;
                s[k] = 1.0 - hi;
            }
        }
        Self::new(n_max, q, t, r, s)
    }

    pub fn t_at(&self, i: usize) -> f64 {
        self.t[i - 1]
    }

    pub fn r_at(&self, i: usize) -> f64 {
        self.r[i - 1]
    }

    pub fn s_at(&self, i: usize) -> f64 {
        self.s[i - 1]
    }
}

pub fn make_ernec(params: &ErnecParams) -> Result<NecModel> {
    params.validate()?;
    NecModel::new_unchecked(
        params.n_max,
        Arc::new(NodeCountPolicy {
            t: params.t.clone(),
            r: params.r.clone(),
            s: params.s.clone(),
        }),
        Arc::new(ErAddition { q: params.q }),
        Arc::new(UniformDeletion),
    )
}

/// Tridiagonal transition matrix of the node count, 0-based (`row i - 1` is
/// node count `i`).
#[derive(Debug, Clone, PartialEq)]
pub struct NodeCountMatrix(DMatrix<f64>);

impl NodeCountMatrix {
    pub fn new(params: &ErnecParams) -> Result<Self> {
        params.validate()?;
        let n = params.n_max;
        let mut p = DMatrix::zeros(n, n);
        for i in 0..n {
            p[(i, i)] = params.s[i];
            if i + 1 < n {
                p[(i, i + 1)] = params.t[i];
            }
            if i > 0 {
                p[(i, i - 1)] = params.r[i];
            }
        }
        Ok(Self(p))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn size(&self) -> usize {
        self.0.nrows()
    }

    pub fn get(&self, from: usize, to: usize) -> f64 {
        self.0[(from - 1, to - 1)]
    }
}

/// `pi_i / pi_1 = prod_{j<i} t_j / prod_{2<=j<=i} r_j`, normalized. Products
/// are accumulated in log space so large `n_max` cannot underflow.
pub fn node_stationary_analytic(params: &ErnecParams) -> Result<NodeCountStationary> {
    params.validate()?;
    let n = params.n_max;
    let mut log_ratio = vec![0.0; n];
    for i in 1..n {
        log_ratio[i] = log_ratio[i - 1] + params.t[i - 1].ln() - params.r[i].ln();
    }
    let top = log_ratio.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut pi: Vec<f64> = log_ratio.iter().map(|l| (l - top).exp()).collect();
    let total: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|p| *p /= total);
    Ok(StationaryDistribution::new(pi, Provenance::Analytic))
}

/// Solves `pi = pi P` directly for the null vector of `P - I`.
pub fn node_stationary_numeric(params: &ErnecParams) -> Result<NodeCountStationary> {
    let p = NodeCountMatrix::new(params)?;
    let n = p.size();
    let generator = p.matrix() - DMatrix::identity(n, n);
    let pi = solve_null_vector(&generator)?;
    let residual = pi.residual.unwrap_or(0.0);
    if residual >= 1e-12 {
        return Err(NecError::NoConvergence {
            what: "node-count stationary solve",
            iterations: 1,
            residual,
        });
    }
    Ok(pi)
}

/// `pi_N q^E (1-q)^{C(N,2)-E}` for a graph with `N` nodes and `E` edges.
pub fn graph_stationary_prob_with(pi: &NodeCountStationary, q: f64, g: &LabeledGraph) -> f64 {
    let pairs = g.pair_count() as i32;
    let e = g.edge_count() as i32;
    pi.probs[g.n() - 1] * q.powi(e) * (1.0 - q).powi(pairs - e)
}

pub fn graph_stationary_prob(params: &ErnecParams, g: &LabeledGraph) -> Result<f64> {
    if g.n() > params.n_max {
        return Err(NecError::arg(format!(
            "graph {g} has more than n_max = {} nodes",
            params.n_max
        )));
    }
    let pi = node_stationary_analytic(params)?;
    Ok(graph_stationary_prob_with(&pi, params.q, g))
}

/// Analytic stationary law over every graph of `space`.
pub fn graph_stationary_vector(params: &ErnecParams, space: &StateSpace) -> Result<StationaryDistribution> {
    if space.n_max() != params.n_max {
        return Err(NecError::arg(format!(
            "state space has n_max = {}, parameters have {}",
            space.n_max(),
            params.n_max
        )));
    }
    let pi = node_stationary_analytic(params)?;
    let probs = space.iter().map(|g| graph_stationary_prob_with(&pi, params.q, g)).collect();
    Ok(StationaryDistribution::new(probs, Provenance::Analytic))
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64)
}

/// Entropy in bits of the wiring of a new node joining `i` nodes,
/// `-sum_j C(i,j) q^j (1-q)^{i-j} log2(q^j (1-q)^{i-j})`.
pub fn er_attachment_entropy(i: usize, q: f64) -> f64 {
    (0..=i)
        .map(|j| {
            let p = q.powi(j as i32) * (1.0 - q).powi((i - j) as i32);
            binomial(i, j) * neg_xlog2x(p)
        })
        .sum()
}

/// Closed-form entropy rate in bits per step: scheme entropy, plus the
/// attachment entropy of additions, plus `log2 i` for a uniform deletion
/// from `i` nodes.
pub fn ernec_entropy_rate(params: &ErnecParams) -> Result<f64> {
    let pi = node_stationary_analytic(params)?;
    let n = params.n_max;
    let mut scheme = 0.0;
    let mut addition = 0.0;
    let mut deletion = 0.0;
    for i in 1..=n {
        let (p, t, r, s) = (pi.probs[i - 1], params.t_at(i), params.r_at(i), params.s_at(i));
        scheme += p * (neg_xlog2x(t) + neg_xlog2x(r) + neg_xlog2x(s));
        if i < n {
            addition += p * t * er_attachment_entropy(i, params.q);
        }
        if i > 1 {
            deletion += p * r * (i as f64).log2();
        }
    }
    Ok(scheme + addition + deletion)
}

/// Entropy rate of the node-count Markov chain,
/// `-sum_i pi_i sum_j P_ij log2 P_ij`.
pub fn node_count_entropy_rate(params: &ErnecParams) -> Result<f64> {
    let pi = node_stationary_analytic(params)?;
    Ok((1..=params.n_max)
        .map(|i| {
            pi.probs[i - 1]
                * (neg_xlog2x(params.t_at(i)) + neg_xlog2x(params.r_at(i)) + neg_xlog2x(params.s_at(i)))
        })
        .sum())
}
