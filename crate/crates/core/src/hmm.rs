//! Discrete hidden Markov models: scaled forward recursion, supervised
//! maximum-likelihood estimation and Baum–Welch.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{NecError, Result};
use crate::rng::{derive_seed, seeded_rng, streams};

const STOCHASTIC_TOLERANCE: f64 = 1e-12;

/// Hidden chain over `m` states emitting symbols `0..k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Hmm {
    initial: Vec<f64>,
    trans: DMatrix<f64>,
    emit: DMatrix<f64>,
}

/// Plain nested-vector form used for serialization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HmmRecord {
    pub initial: Vec<f64>,
    pub trans: Vec<Vec<f64>>,
    pub emit: Vec<Vec<f64>>,
}

fn check_distribution(what: &str, row: &[f64]) -> Result<()> {
    if row.iter().any(|&x| !(0.0..=1.0 + STOCHASTIC_TOLERANCE).contains(&x)) {
        return Err(NecError::arg(format!("{what} has an entry outside [0, 1]")));
    }
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > STOCHASTIC_TOLERANCE {
        return Err(NecError::arg(format!("{what} sums to {sum}, expected 1")));
    }
    Ok(())
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

impl Hmm {
    pub fn new(initial: Vec<f64>, trans: DMatrix<f64>, emit: DMatrix<f64>) -> Result<Self> {
        let m = initial.len();
        if m == 0 {
            return Err(NecError::arg("an HMM needs at least one hidden state"));
        }
        if trans.nrows() != m || trans.ncols() != m {
            return Err(NecError::arg(format!(
                "transition matrix is {}x{}, expected {m}x{m}",
                trans.nrows(),
                trans.ncols()
            )));
        }
        if emit.nrows() != m || emit.ncols() == 0 {
            return Err(NecError::arg(format!(
                "emission matrix is {}x{}, expected {m} rows and at least one symbol",
                emit.nrows(),
                emit.ncols()
            )));
        }
        check_distribution("initial distribution", &initial)?;
        for i in 0..m {
            let t: Vec<f64> = trans.row(i).iter().copied().collect();
            check_distribution(&format!("transition row {i}"), &t)?;
            let e: Vec<f64> = emit.row(i).iter().copied().collect();
            check_distribution(&format!("emission row {i}"), &e)?;
        }
        Ok(Self {
            initial,
            trans,
            emit,
        })
    }

    pub fn from_record(record: &HmmRecord) -> Result<Self> {
        let m = record.initial.len();
        let k = record.emit.first().map_or(0, Vec::len);
        if record.trans.iter().any(|r| r.len() != m) || record.emit.iter().any(|r| r.len() != k) {
            return Err(NecError::arg("ragged matrix in HMM record"));
        }
        let trans = DMatrix::from_row_iterator(
            record.trans.len(),
            m,
            record.trans.iter().flatten().copied(),
        );
        let emit = DMatrix::from_row_iterator(record.emit.len(), k, record.emit.iter().flatten().copied());
        Self::new(record.initial.clone(), trans, emit)
    }

    pub fn to_record(&self) -> HmmRecord {
        HmmRecord {
            initial: self.initial.clone(),
            trans: rows(&self.trans),
            emit: rows(&self.emit),
        }
    }

    pub fn states(&self) -> usize {
        self.initial.len()
    }

    pub fn symbols(&self) -> usize {
        self.emit.ncols()
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    pub fn trans(&self) -> &DMatrix<f64> {
        &self.trans
    }

    pub fn emit(&self) -> &DMatrix<f64> {
        &self.emit
    }

    fn check_symbols(&self, symbols: &[usize]) -> Result<()> {
        if let Some((i, y)) = symbols.iter().enumerate().find(|(_, &y)| y >= self.symbols()) {
            return Err(NecError::arg(format!(
                "symbol {y} at position {i} is outside the alphabet 0..{}",
                self.symbols()
            )));
        }
        Ok(())
    }

    /// Scaled forward pass. Returns the per-step scale factors `c_t` (so
    /// that `p(y_1..y_T) = prod c_t`) and, if requested, the normalized
    /// forward vectors. Stops early with a zero factor if the sequence is
    /// impossible.
    fn forward_scaled(&self, symbols: &[usize], keep_alpha: bool) -> (Vec<f64>, Vec<Vec<f64>>) {
        let m = self.states();
        let mut scales = Vec::with_capacity(symbols.len());
        let mut alphas = Vec::new();
        let mut alpha: Vec<f64> = (0..m).map(|i| self.initial[i] * self.emit[(i, symbols[0])]).collect();
        let mut next = vec![0.0; m];
        for (t, &y) in symbols.iter().enumerate() {
            if t > 0 {
                next.iter_mut().for_each(|x| *x = 0.0);
                for (i, &a) in alpha.iter().enumerate() {
                    if a == 0.0 {
                        continue;
                    }
                    for (j, nx) in next.iter_mut().enumerate() {
                        *nx += a * self.trans[(i, j)];
                    }
                }
                for (j, nx) in next.iter_mut().enumerate() {
                    *nx *= self.emit[(j, y)];
                }
                std::mem::swap(&mut alpha, &mut next);
            }
            let c: f64 = alpha.iter().sum();
            scales.push(c);
            if c == 0.0 {
                break;
            }
            alpha.iter_mut().for_each(|a| *a /= c);
            if keep_alpha {
                alphas.push(alpha.clone());
            }
        }
        (scales, alphas)
    }

    /// Running `log2 p(y_1..y_k)` for every prefix. Entries are `-inf` from
    /// the first impossible symbol on.
    pub fn forward_log_prob_series(&self, symbols: &[usize]) -> Result<Vec<f64>> {
        if symbols.is_empty() {
            return Ok(Vec::new());
        }
        self.check_symbols(symbols)?;
        let (scales, _) = self.forward_scaled(symbols, false);
        let mut out = Vec::with_capacity(symbols.len());
        let mut acc = 0.0;
        for c in &scales {
            acc += c.log2();
            out.push(acc);
        }
        out.resize(symbols.len(), f64::NEG_INFINITY);
        Ok(out)
    }

    /// `log2 p(y_1..y_T)`; `-inf` for an impossible sequence.
    pub fn forward_log_prob(&self, symbols: &[usize]) -> Result<f64> {
        if symbols.is_empty() {
            return Ok(0.0);
        }
        self.check_symbols(symbols)?;
        let (scales, _) = self.forward_scaled(symbols, false);
        if scales.len() < symbols.len() || scales.last() == Some(&0.0) {
            return Ok(f64::NEG_INFINITY);
        }
        Ok(scales.iter().map(|c| c.log2()).sum())
    }
}

pub fn forward_log_prob(h: &Hmm, symbols: &[usize]) -> Result<f64> {
    h.forward_log_prob(symbols)
}

fn normalize_rows_or_uniform(counts: &mut DMatrix<f64>) {
    let k = counts.ncols();
    for i in 0..counts.nrows() {
        let total: f64 = counts.row(i).sum();
        for j in 0..k {
            counts[(i, j)] = if total > 0.0 {
                counts[(i, j)] / total
            } else {
                1.0 / k as f64
            };
        }
    }
}

fn check_training_input(symbols: &[usize], k: usize) -> Result<()> {
    if symbols.is_empty() {
        return Err(NecError::arg("cannot estimate an HMM from an empty sequence"));
    }
    if k == 0 {
        return Err(NecError::arg("alphabet size k must be positive"));
    }
    if let Some(&y) = symbols.iter().find(|&&y| y >= k) {
        return Err(NecError::arg(format!(
            "observed symbol {y} does not fit an alphabet of k = {k}"
        )));
    }
    Ok(())
}

/// Maximum-likelihood counts when the hidden path is observed. The initial
/// distribution is the empirical occupancy of the hidden states; rows with
/// no observations are left uniform.
pub fn estimate_supervised(symbols: &[usize], hidden: &[usize], m: usize, k: usize) -> Result<Hmm> {
    check_training_input(symbols, k)?;
    if hidden.len() != symbols.len() {
        return Err(NecError::arg(format!(
            "{} hidden states for {} symbols",
            hidden.len(),
            symbols.len()
        )));
    }
    if m == 0 {
        return Err(NecError::arg("hidden state count m must be positive"));
    }
    if let Some(&x) = hidden.iter().find(|&&x| x >= m) {
        return Err(NecError::arg(format!("hidden state {x} outside 0..{m}")));
    }
    let mut occupancy = vec![0.0; m];
    let mut trans = DMatrix::zeros(m, m);
    let mut emit = DMatrix::zeros(m, k);
    for (t, (&x, &y)) in hidden.iter().zip(symbols).enumerate() {
        occupancy[x] += 1.0;
        emit[(x, y)] += 1.0;
        if t + 1 < hidden.len() {
            trans[(x, hidden[t + 1])] += 1.0;
        }
    }
    let n = hidden.len() as f64;
    occupancy.iter_mut().for_each(|c| *c /= n);
    normalize_rows_or_uniform(&mut trans);
    normalize_rows_or_uniform(&mut emit);
    Hmm::new(occupancy, trans, emit)
}

/// Stopping rule for [`baum_welch`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaumWelchOptions {
    pub max_iterations: usize,
    /// Stop once `(ll_new - ll_old) / |ll_old|` falls below this.
    pub relative_tolerance: f64,
}

impl Default for BaumWelchOptions {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            relative_tolerance: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaumWelchFit {
    pub hmm: Hmm,
    /// `log2` likelihood of the data under each successive parameter set,
    /// starting with the initial guess.
    pub log_likelihoods: Vec<f64>,
    pub converged: bool,
}

/// Uniform parameters with every entry perturbed by a factor in
/// `[0.9, 1.1)` and renormalized; the perturbation is drawn from
/// `seeded_rng(seed)` row by row (initial, transitions, emissions).
pub fn jittered_uniform(m: usize, k: usize, seed: u64) -> Result<Hmm> {
    let mut rng = seeded_rng(seed);
    let mut draw = |len: usize| -> Vec<f64> {
        let raw: Vec<f64> = (0..len).map(|_| 1.0 + 0.2 * (rng.random::<f64>() - 0.5)).collect();
        let total: f64 = raw.iter().sum();
        raw.into_iter().map(|x| x / total).collect()
    };
    let initial = draw(m);
    let trans = DMatrix::from_row_iterator(m, m, (0..m).flat_map(|_| draw(m)));
    let emit = DMatrix::from_row_iterator(m, k, (0..m).flat_map(|_| draw(k)));
    Hmm::new(initial, trans, emit)
}

/// One EM update. Returns the re-estimated model and the `log2` likelihood
/// of `symbols` under the model passed in.
fn baum_welch_update(h: &Hmm, symbols: &[usize]) -> Result<(Hmm, f64)> {
    let m = h.states();
    let k = h.symbols();
    let len = symbols.len();
    let (scales, alphas) = h.forward_scaled(symbols, true);
    if scales.len() < len || scales.contains(&0.0) {
        return Err(NecError::Numeric(
            "observed sequence has zero probability under the current HMM".into(),
        ));
    }
    let log_likelihood: f64 = scales.iter().map(|c| c.log2()).sum();

    let mut beta = vec![1.0; m];
    let mut gamma_sum = vec![0.0; m];
    let mut gamma_sum_head = vec![0.0; m];
    let mut xi_sum = DMatrix::<f64>::zeros(m, m);
    let mut emit_acc = DMatrix::<f64>::zeros(m, k);
    let mut initial = vec![0.0; m];
    for t in (0..len).rev() {
        let alpha = &alphas[t];
        for i in 0..m {
            let g = alpha[i] * beta[i];
            gamma_sum[i] += g;
            emit_acc[(i, symbols[t])] += g;
            if t + 1 < len {
                gamma_sum_head[i] += g;
            }
            if t == 0 {
                initial[i] = g;
            }
        }
        if t == 0 {
            break;
        }
        // xi_{t-1}(i, j) and beta_{t-1} from beta_t.
        let prev = &alphas[t - 1];
        let y = symbols[t];
        let weighted: Vec<f64> = (0..m).map(|j| h.emit[(j, y)] * beta[j]).collect();
        let mut prev_beta = vec![0.0; m];
        for i in 0..m {
            let mut acc = 0.0;
            for j in 0..m {
                let w = h.trans[(i, j)] * weighted[j] / scales[t];
                acc += w;
                xi_sum[(i, j)] += prev[i] * w;
            }
            prev_beta[i] = acc;
        }
        beta = prev_beta;
    }

    let total: f64 = initial.iter().sum();
    initial.iter_mut().for_each(|x| *x /= total);
    let mut trans = h.trans.clone();
    let mut emit = h.emit.clone();
    for i in 0..m {
        if gamma_sum_head[i] > 0.0 {
            let row_total: f64 = xi_sum.row(i).sum();
            for j in 0..m {
                trans[(i, j)] = xi_sum[(i, j)] / row_total;
            }
        }
        if gamma_sum[i] > 0.0 {
            for y in 0..k {
                emit[(i, y)] = emit_acc[(i, y)] / gamma_sum[i];
            }
        }
    }
    Ok((Hmm::new(initial, trans, emit)?, log_likelihood))
}

/// Baum–Welch re-estimation of all parameters starting from `init`.
pub fn baum_welch(symbols: &[usize], init: Hmm, options: BaumWelchOptions) -> Result<BaumWelchFit> {
    check_training_input(symbols, init.symbols())?;
    let mut current = init;
    let mut log_likelihoods = Vec::new();
    let mut converged = false;
    for _ in 0..options.max_iterations {
        let (next, ll) = baum_welch_update(&current, symbols)?;
        if let Some(&prev) = log_likelihoods.last() {
            let prev: f64 = prev;
            if (ll - prev) / prev.abs().max(f64::MIN_POSITIVE) < options.relative_tolerance {
                log_likelihoods.push(ll);
                converged = true;
                break;
            }
        }
        log_likelihoods.push(ll);
        current = next;
    }
    Ok(BaumWelchFit {
        hmm: current,
        log_likelihoods,
        converged,
    })
}

/// Fits an HMM with `m` hidden states and `k` symbols. With the hidden path
/// available the fit is supervised counting; otherwise Baum–Welch runs from
/// [`jittered_uniform`] seeded by the jitter stream of seed 0.
pub fn estimate_hmm(symbols: &[usize], hidden: Option<&[usize]>, m: usize, k: usize) -> Result<Hmm> {
    match hidden {
        Some(path) => estimate_supervised(symbols, path, m, k),
        None => {
            check_training_input(symbols, k)?;
            if m == 0 {
                return Err(NecError::arg("hidden state count m must be positive"));
            }
            let init = jittered_uniform(m, k, derive_seed(0, streams::JITTER))?;
            Ok(baum_welch(symbols, init, BaumWelchOptions::default())?.hmm)
        }
    }
}
