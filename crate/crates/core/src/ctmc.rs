//! Continuous-time chains: dwell calibration of the discrete `s` values and
//! the jump-process view with exponential holding times.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Exp};

use crate::ernec::ErnecParams;
use crate::error::{NecError, Result};
use crate::graph::{LabeledGraph, StateSpace};
use crate::kernel::{apply_scheme, GraphChain, GraphKernel, NecModel, TransitionScheme};
use crate::rng::seeded_rng;
use crate::stationary::{solve_null_vector, StationaryDistribution};

/// Largest `n_max` for which a dense graph-level rate matrix is built.
pub const RATE_MATRIX_CAP: usize = 5;

const ROW_TOLERANCE: f64 = 1e-12;

/// Mean time a discrete chain with step length `tau` stays put when each
/// step keeps the state with probability `s`: `tau / (1 - s)`.
pub fn expected_dwell(tau: f64, s: f64) -> f64 {
    tau / (1.0 - s)
}

/// The `s` giving mean dwell `target`: `1 - tau / target`.
pub fn s_for_dwell(tau: f64, target: f64) -> f64 {
    1.0 - tau / target
}

/// Exponential rate with the same mean dwell as a discrete `s`.
pub fn lambda_for_s(tau: f64, s: f64) -> f64 {
    (1.0 - s) / tau
}

/// Replaces each `s_i` by `1 - tau / targets[i - 1]` and rescales `t_i`,
/// `r_i` so that their ratio is kept and the row still sums to one.
pub fn calibrate_s(tau: f64, targets: &[f64], base: &ErnecParams) -> Result<ErnecParams> {
    base.validate()?;
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(NecError::arg(format!("tau = {tau} must be positive")));
    }
    if targets.len() != base.n_max {
        return Err(NecError::arg(format!(
            "{} dwell targets for n_max = {}",
            targets.len(),
            base.n_max
        )));
    }
    let mut out = base.clone();
    for (k, &target) in targets.iter().enumerate() {
        if !(target > tau) {
            return Err(NecError::Calibration {
                node_count: k + 1,
                target,
                tau,
            });
        }
        let s = s_for_dwell(tau, target);
        let moving = base.t[k] + base.r[k];
        if moving <= 0.0 {
            return Err(NecError::Params(format!(
                "node count {} never moves, so its dwell cannot be calibrated",
                k + 1
            )));
        }
        let scale = (1.0 - s) / moving;
        out.t[k] = base.t[k] * scale;
        out.r[k] = base.r[k] * scale;
        out.s[k] = s;
    }
    out.validate()?;
    Ok(out)
}

/// A maximal block of identical consecutive states.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DwellRun {
    pub node_count: usize,
    pub steps: usize,
}

/// Runs of identical states in a chain. The final run is censored by the
/// end of the chain and is left out.
pub fn dwell_runs(chain: &GraphChain) -> Vec<DwellRun> {
    let states = chain.states();
    let mut runs = Vec::new();
    let mut start = 0;
    for i in 1..states.len() {
        if states[i] != states[i - 1] {
            runs.push(DwellRun {
                node_count: states[start].n(),
                steps: i - start,
            });
            start = i;
        }
    }
    runs
}

/// Mean dwell time `steps * tau` over the completed runs, optionally
/// restricted to one node count. `None` when no run qualifies.
pub fn mean_dwell(chain: &GraphChain, tau: f64, node_count: Option<usize>) -> Option<f64> {
    let runs: Vec<usize> = dwell_runs(chain)
        .into_iter()
        .filter(|r| node_count.is_none_or(|n| r.node_count == n))
        .map(|r| r.steps)
        .collect();
    if runs.is_empty() {
        return None;
    }
    Some(tau * runs.iter().sum::<usize>() as f64 / runs.len() as f64)
}

/// Generator `R` with `r_ij = lambda_i p_ij` off the diagonal and
/// `r_ii = -lambda_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct RateMatrix {
    rates: DMatrix<f64>,
}

impl RateMatrix {
    pub fn from_generator(rates: DMatrix<f64>) -> Result<Self> {
        let n = rates.nrows();
        if n == 0 || rates.ncols() != n {
            return Err(NecError::arg("rate matrix must be square and non-empty"));
        }
        for i in 0..n {
            for j in 0..n {
                let x = rates[(i, j)];
                if !x.is_finite() || (i != j && x < 0.0) || (i == j && x > 0.0) {
                    return Err(NecError::arg(format!(
                        "rate matrix entry ({i}, {j}) = {x} has the wrong sign"
                    )));
                }
            }
            let sum: f64 = rates.row(i).sum();
            let scale = rates[(i, i)].abs().max(1.0);
            if sum.abs() > ROW_TOLERANCE * scale {
                return Err(NecError::arg(format!("rate matrix row {i} sums to {sum}")));
            }
        }
        Ok(Self { rates })
    }

    /// Builds `R` from exit rates and an embedded jump matrix with zero
    /// diagonal.
    pub fn from_jumps(lambda: &[f64], jumps: &DMatrix<f64>) -> Result<Self> {
        let n = lambda.len();
        if jumps.nrows() != n || jumps.ncols() != n {
            return Err(NecError::arg("jump matrix does not match the rate vector"));
        }
        if let Some((i, l)) = lambda.iter().enumerate().find(|(_, l)| !(**l > 0.0 && l.is_finite())) {
            return Err(NecError::arg(format!("lambda for state {i} is {l}, must be positive")));
        }
        let mut rates = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    rates[(i, j)] = lambda[i] * jumps[(i, j)];
                }
            }
            // Taking the diagonal from the off-diagonal sum keeps rows at zero.
            let out: f64 = (0..n).filter(|&j| j != i).map(|j| rates[(i, j)]).sum();
            rates[(i, i)] = -out;
        }
        Self::from_generator(rates)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.rates
    }

    pub fn size(&self) -> usize {
        self.rates.nrows()
    }

    /// Exit rates `lambda_i = -r_ii`.
    pub fn lambda(&self) -> Vec<f64> {
        (0..self.size()).map(|i| -self.rates[(i, i)]).collect()
    }
}

/// Graph-level generator over the enumerated state space. Jump
/// probabilities are the kernel with the Same mass removed,
/// `p_ij = P(g_j | g_i) / (1 - s(g_i))`.
pub fn build_rate_matrix(
    m: &NecModel,
    lambda: &dyn Fn(&LabeledGraph) -> f64,
) -> Result<(StateSpace, RateMatrix)> {
    if m.n_max() > RATE_MATRIX_CAP {
        return Err(NecError::Bounds {
            what: "n_max for the graph-level rate matrix",
            value: m.n_max(),
            cap: RATE_MATRIX_CAP,
        });
    }
    let kernel = GraphKernel::build(m)?;
    let size = kernel.len();
    let mut jumps = DMatrix::zeros(size, size);
    let mut rates = Vec::with_capacity(size);
    for (i, g) in kernel.space().iter().enumerate() {
        let leave = 1.0 - m.scheme_probs(g).same;
        if size > 1 && leave <= 0.0 {
            return Err(NecError::Model(format!("graph {g} is absorbing")));
        }
        for (j, p) in kernel.row(i) {
            if j != i {
                jumps[(i, j)] = p / leave;
            }
        }
        rates.push(lambda(g));
    }
    let r = RateMatrix::from_jumps(&rates, &jumps)?;
    Ok((kernel.space().clone(), r))
}

/// Node-count generator of an ERNEC with one rate per node count
/// (`lambda[i - 1]` for `i` nodes).
pub fn node_count_rate_matrix(params: &ErnecParams, lambda: &[f64]) -> Result<RateMatrix> {
    params.validate()?;
    let n = params.n_max;
    if lambda.len() != n {
        return Err(NecError::arg(format!("{} rates for n_max = {n}", lambda.len())));
    }
    let mut jumps = DMatrix::zeros(n, n);
    for k in 0..n {
        let leave = params.t[k] + params.r[k];
        if n > 1 && leave <= 0.0 {
            return Err(NecError::Model(format!("node count {} is absorbing", k + 1)));
        }
        if k + 1 < n {
            jumps[(k, k + 1)] = params.t[k] / leave;
        }
        if k > 0 {
            jumps[(k, k - 1)] = params.r[k] / leave;
        }
    }
    RateMatrix::from_jumps(lambda, &jumps)
}

/// Truncation error allowed in one Poisson-weighted series.
const UNIFORMIZATION_TOLERANCE: f64 = 1e-16;

/// `e^{Rt}` by uniformization: with `L = max lambda_i` and `U = I + R/L`,
/// `e^{Rt} = sum_n e^{-Lt} (Lt)^n / n! U^n`. The time is first halved until
/// `Lt <= 1`, the short-time series is summed, and the result is squared
/// back up.
pub fn transition_matrix_at(r: &RateMatrix, t: f64) -> Result<DMatrix<f64>> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(NecError::arg(format!("time t = {t} must be finite and non-negative")));
    }
    let n = r.size();
    let top = r.lambda().into_iter().fold(0.0, f64::max);
    if t == 0.0 || top == 0.0 {
        return Ok(DMatrix::identity(n, n));
    }
    let u = DMatrix::identity(n, n) + r.matrix() / top;
    let mut squarings = 0;
    let mut h = t;
    while top * h > 1.0 {
        h /= 2.0;
        squarings += 1;
    }
    let rate = top * h;
    let mut weight = (-rate).exp();
    let mut remaining = 1.0 - weight;
    let mut power = DMatrix::identity(n, n);
    let mut p = &power * weight;
    let mut k = 0;
    while remaining > UNIFORMIZATION_TOLERANCE {
        k += 1;
        power = &power * &u;
        weight *= rate / k as f64;
        if weight == 0.0 {
            break;
        }
        p += &power * weight;
        remaining -= weight;
    }
    for _ in 0..squarings {
        p = &p * &p;
    }
    // Clip rounding noise and restore exact row sums.
    for i in 0..n {
        for j in 0..n {
            p[(i, j)] = p[(i, j)].max(0.0);
        }
        let sum: f64 = p.row(i).sum();
        for j in 0..n {
            p[(i, j)] /= sum;
        }
    }
    Ok(p)
}

/// Solves `pi R = 0`, `sum(pi) = 1`.
pub fn ctmc_stationary(r: &RateMatrix) -> Result<StationaryDistribution> {
    if r.size() == 1 {
        return Ok(StationaryDistribution::new(
            vec![1.0],
            crate::stationary::Provenance::Numeric,
        ));
    }
    solve_null_vector(r.matrix())
}

/// Visited states and how long each visit lasted. The last holding time is
/// cut at the horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct CtmcTrajectory {
    pub states: Vec<LabeledGraph>,
    pub holding_times: Vec<f64>,
}

impl CtmcTrajectory {
    pub fn new(states: Vec<LabeledGraph>, holding_times: Vec<f64>) -> Result<Self> {
        if states.is_empty() || states.len() != holding_times.len() {
            return Err(NecError::arg(format!(
                "{} states for {} holding times",
                states.len(),
                holding_times.len()
            )));
        }
        if let Some((i, h)) = holding_times.iter().enumerate().find(|(_, h)| !(**h > 0.0 && h.is_finite())) {
            return Err(NecError::arg(format!("holding time {} is {h}, must be positive", i + 1)));
        }
        if let Some(i) = states.windows(2).position(|w| w[0] == w[1]) {
            return Err(NecError::arg(format!(
                "states {} and {} are equal; a jump must change the state",
                i + 1,
                i + 2
            )));
        }
        Ok(Self {
            states,
            holding_times,
        })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn total_time(&self) -> f64 {
        self.holding_times.iter().sum()
    }

    /// Share of time spent in each state of `space`.
    pub fn occupation_fractions(&self, space: &StateSpace) -> Result<Vec<f64>> {
        let mut out = vec![0.0; space.len()];
        for (g, h) in self.states.iter().zip(&self.holding_times) {
            let i = space
                .index_of(g)
                .ok_or_else(|| NecError::arg(format!("graph {g} is outside the state space")))?;
            out[i] += h;
        }
        let total = self.total_time();
        out.iter_mut().for_each(|x| *x /= total);
        Ok(out)
    }

    /// Share of time spent at each node count `1..=n_max`.
    pub fn node_count_fractions(&self, n_max: usize) -> Vec<f64> {
        let mut out = vec![0.0; n_max];
        for (g, h) in self.states.iter().zip(&self.holding_times) {
            if g.n() <= n_max {
                out[g.n() - 1] += h;
            }
        }
        let total = self.total_time();
        out.iter_mut().for_each(|x| *x /= total);
        out
    }

    /// Mean of the completed holding times in states matching `pred`.
    pub fn mean_holding_time(&self, pred: impl Fn(&LabeledGraph) -> bool) -> Option<f64> {
        let done = self.len().saturating_sub(1);
        let (sum, count) = self.states[..done]
            .iter()
            .zip(&self.holding_times)
            .filter(|(g, _)| pred(g))
            .fold((0.0, 0usize), |(s, c), (_, h)| (s + h, c + 1));
        (count > 0).then(|| sum / count as f64)
    }
}

/// Runs the jump process from the single-node graph until `horizon`. At each
/// state the holding time is drawn first, then the scheme from `t / (t + r)`
/// with one uniform, then the wiring or the deleted node.
pub fn simulate_ctmc(
    m: &NecModel,
    lambda: &dyn Fn(&LabeledGraph) -> f64,
    horizon: f64,
    seed: u64,
) -> Result<CtmcTrajectory> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(NecError::arg(format!("horizon {horizon} must be positive")));
    }
    let mut rng = seeded_rng(seed);
    let mut g = LabeledGraph::single();
    let mut states = Vec::new();
    let mut holding = Vec::new();
    let mut clock = 0.0;
    loop {
        let rate = lambda(&g);
        let exp = Exp::new(rate)
            .ok()
            .filter(|_| rate > 0.0 && rate.is_finite())
            .ok_or_else(|| NecError::arg(format!("lambda({g}) = {rate} must be positive")))?;
        let h: f64 = exp.sample(&mut rng);
        states.push(g.clone());
        if clock + h >= horizon {
            holding.push(horizon - clock);
            break;
        }
        holding.push(h);
        clock += h;

        let p = m.scheme_probs(&g);
        let leave = p.add + p.delete;
        if leave <= 0.0 {
            // Absorbing state: the remaining time is spent here.
            let last = holding.last_mut().expect("pushed above");
            *last += horizon - clock;
            break;
        }
        let u: f64 = rng.random::<f64>() * leave;
        let scheme = if u < p.add {
            TransitionScheme::Addition
        } else {
            TransitionScheme::Deletion
        };
        g = apply_scheme(m, &g, scheme, &mut rng)?.0;
    }
    CtmcTrajectory::new(states, holding)
}
