//! Experiment dispatch. Every random quantity of a run derives from
//! `config.seed`: parameter draws use the `PARAMS` stream and chain `k` uses
//! `CHAINS + k`.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use necsim_core::ctmc::{
    calibrate_s, ctmc_stationary, expected_dwell, lambda_for_s, mean_dwell, node_count_rate_matrix, simulate_ctmc,
};
use necsim_core::entropy::{
    empirical_entropy_rate, kernel_entropy_rate_with, typicality_test, EmpiricalRate, PathMode,
};
use necsim_core::ernec::{
    ernec_entropy_rate, graph_stationary_vector, make_ernec, node_count_entropy_rate, node_stationary_analytic,
    node_stationary_numeric, ErnecParams,
};
use necsim_core::graph::{LabeledGraph, ENUMERATION_CAP};
use necsim_core::io::{save_chain, save_npc, save_trajectory};
use necsim_core::kernel::{simulate, GraphChain, GraphKernel};
use necsim_core::property::{
    build_reduced_hmm, extract_npc, npc_entropy_pipeline, NpcOptions, PropertyFn,
};
use necsim_core::rng::{derive_seed, seeded_rng, streams};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::error::{CliError, Result};

pub const CHAIN_FILE: &str = "chain.txt";
pub const NPC_FILE: &str = "npc.txt";
pub const TRAJECTORY_FILE: &str = "ctmc.txt";
pub const STATIONARY_FILE: &str = "stationary.csv";
pub const ENTROPY_FILE: &str = "entropy.json";
pub const CONVERGENCE_FILE: &str = "convergence.csv";
pub const REPORT_FILE: &str = "report.json";

/// Rows kept in a convergence series, at most.
const CONVERGENCE_POINTS: usize = 5_000;

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub kind: ExperimentKind,
    pub config: ExperimentConfig,
    pub params: Vec<ErnecParams>,
    pub outputs: Vec<PathBuf>,
    pub summary: Value,
    pub wall_time_secs: f64,
}

impl RunReport {
    /// Numeric entry of the summary by JSON pointer, e.g. `/max_abs_deviation`.
    pub fn number(&self, pointer: &str) -> Option<f64> {
        self.summary.pointer(pointer).and_then(Value::as_f64)
    }
}

pub fn chain_seed(seed: u64, k: usize) -> u64 {
    derive_seed(seed, streams::CHAINS + k as u64)
}

/// The explicit parameters of the config, or `config.draws` random draws.
pub fn resolve_params(config: &ExperimentConfig) -> Result<Vec<ErnecParams>> {
    let m = &config.model;
    if let (Some(t), Some(r), Some(s)) = (&m.t, &m.r, &m.s) {
        return Ok(vec![ErnecParams::new(config.n_max(), config.q(), t.clone(), r.clone(), s.clone())?]);
    }
    let mut rng = seeded_rng(derive_seed(config.seed, streams::PARAMS));
    (0..config.draws)
        .map(|_| Ok(ErnecParams::random(config.n_max(), config.q(), &mut rng)?))
        .collect()
}

struct Outputs<'a> {
    dir: &'a Path,
    written: Vec<PathBuf>,
}

impl<'a> Outputs<'a> {
    fn path(&mut self, name: &str) -> PathBuf {
        let p = self.dir.join(name);
        self.written.push(p.clone());
        p
    }

    fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        let path = self.path(name);
        let file = File::create(&path).map_err(|source| CliError::Output { path: path.clone(), source })?;
        let mut w = csv::Writer::from_writer(BufWriter::new(file));
        w.write_record(header)?;
        for row in rows {
            w.write_record(row)?;
        }
        w.flush().map_err(|source| CliError::Output { path, source })?;
        Ok(())
    }

    fn json(&mut self, name: &str, value: &impl Serialize) -> Result<()> {
        let path = self.path(name);
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        fs::write(&path, text).map_err(|source| CliError::Output { path, source })
    }
}

fn num(x: f64) -> String {
    format!("{x}")
}

fn linf(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn kept_states(chain: &GraphChain, burn_in: f64) -> &[LabeledGraph] {
    let skip = ((burn_in * chain.len() as f64) as usize).min(chain.len() - 1);
    &chain.states()[skip..]
}

fn node_frequencies(states: &[LabeledGraph], n_max: usize) -> Vec<f64> {
    let mut freq = vec![0.0; n_max];
    for g in states {
        freq[g.n() - 1] += 1.0;
    }
    freq.iter_mut().for_each(|f| *f /= states.len() as f64);
    freq
}

/// Indices of a thinned series, always ending at the last entry.
fn thinned(len: usize) -> Vec<usize> {
    let stride = len.div_ceil(CONVERGENCE_POINTS).max(1);
    let mut idx: Vec<usize> = (0..len).step_by(stride).collect();
    if idx.last() != Some(&(len - 1)) {
        idx.push(len - 1);
    }
    idx
}

fn convergence_rows(series: &[Vec<f64>]) -> Vec<Vec<String>> {
    let len = series.iter().map(Vec::len).min().unwrap_or(0);
    if len == 0 {
        return Vec::new();
    }
    thinned(len)
        .into_iter()
        .map(|i| {
            let mut row = vec![(i + 1).to_string()];
            row.extend(series.iter().map(|s| num(s[i])));
            row
        })
        .collect()
}

fn convergence_header(chains: usize) -> Vec<String> {
    let mut h = vec!["samples".to_string()];
    h.extend((1..=chains).map(|k| format!("chain{k}")));
    h
}

fn tail_spread(prefix: &[f64], fraction: f64) -> f64 {
    let last = *prefix.last().expect("non-empty");
    let start = ((1.0 - fraction) * prefix.len() as f64) as usize;
    prefix[start..].iter().map(|x| (x - last).abs()).fold(0.0, f64::max)
}

/// Runs one experiment and writes its outputs into `config.out`.
pub fn run(config: &ExperimentConfig) -> Result<RunReport> {
    config.validate()?;
    let started = Instant::now();
    fs::create_dir_all(&config.out).map_err(|source| CliError::Output {
        path: config.out.clone(),
        source,
    })?;
    let params = resolve_params(config)?;
    let mut out = Outputs {
        dir: &config.out,
        written: Vec::new(),
    };
    let summary = match config.kind {
        ExperimentKind::Simulate => run_simulate(config, &params[0], &mut out)?,
        ExperimentKind::Stationary | ExperimentKind::ReproduceTable1 | ExperimentKind::ReproduceTable2 => {
            run_stationary(config, &params, &mut out)?
        }
        ExperimentKind::ReproduceTable3 => run_conditional(config, &params[0], &mut out)?,
        ExperimentKind::Entropy | ExperimentKind::ReproduceTable4 | ExperimentKind::ReproduceFig2 => {
            run_entropy(config, &params[0], &mut out)?
        }
        ExperimentKind::Npc | ExperimentKind::ReproduceFig3 => run_npc(config, &params[0], &mut out)?,
        ExperimentKind::Ctmc => run_ctmc(config, &params[0], &mut out)?,
    };
    let report_path = out.path(REPORT_FILE);
    let report = RunReport {
        kind: config.kind,
        config: config.clone(),
        params,
        outputs: out.written,
        summary,
        wall_time_secs: started.elapsed().as_secs_f64(),
    };
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    fs::write(&report_path, text).map_err(|source| CliError::Output {
        path: report_path.clone(),
        source,
    })?;
    Ok(report)
}

fn run_simulate(config: &ExperimentConfig, params: &ErnecParams, out: &mut Outputs) -> Result<Value> {
    let m = make_ernec(params)?;
    let seed = chain_seed(config.seed, 0);
    let chain = simulate(&m, config.length, seed)?;
    save_chain(&chain, out.path(CHAIN_FILE))?;
    let f = PropertyFn::by_name(&config.property, params.n_max)?;
    save_npc(&extract_npc(&chain, &f), out.path(NPC_FILE))?;
    let mean_nodes = chain.states().iter().map(|g| g.n() as f64).sum::<f64>() / chain.len() as f64;
    Ok(json!({
        "chain_seed": seed,
        "length": chain.len(),
        "final_state": chain.states().last().expect("non-empty").encode(),
        "mean_node_count": mean_nodes,
    }))
}

/// Node-count stationary law: analytic, numeric and observed, for every
/// parameter draw.
fn run_stationary(config: &ExperimentConfig, params: &[ErnecParams], out: &mut Outputs) -> Result<Value> {
    let mut rows = Vec::new();
    let mut per_draw = Vec::new();
    for (d, p) in params.iter().enumerate() {
        let analytic = node_stationary_analytic(p)?;
        let numeric = node_stationary_numeric(p)?;
        let chain = simulate(&make_ernec(p)?, config.length, chain_seed(config.seed, d))?;
        let observed = node_frequencies(kept_states(&chain, config.burn_in), p.n_max);
        for i in 0..p.n_max {
            rows.push(vec![
                (d + 1).to_string(),
                (i + 1).to_string(),
                num(analytic.probs[i]),
                num(numeric.probs[i]),
                num(observed[i]),
            ]);
        }
        per_draw.push(json!({
            "linf_numeric": linf(&analytic.probs, &numeric.probs),
            "linf_observed": linf(&analytic.probs, &observed),
            "calculated": analytic.probs,
            "observed": observed,
        }));
    }
    out.csv(STATIONARY_FILE, &["draw", "node_count", "calculated", "numeric", "observed"], &rows)?;
    let max_of = |key: &str| per_draw.iter().filter_map(|d| d[key].as_f64()).fold(0.0, f64::max);
    Ok(json!({
        "draws": params.len(),
        "max_linf_numeric": max_of("linf_numeric"),
        "max_linf_observed": max_of("linf_observed"),
        "per_draw": per_draw,
    }))
}

/// Observed law of three 3-node graphs, conditioned on three nodes, next to
/// their Erdős–Rényi probabilities.
fn run_conditional(config: &ExperimentConfig, params: &ErnecParams, out: &mut Outputs) -> Result<Value> {
    if params.n_max < 3 {
        return Err(CliError::Config("reproduce-table3 needs n_max >= 3".into()));
    }
    let graphs = [
        LabeledGraph::from_edges(3, &[(1, 2), (1, 3)])?,
        LabeledGraph::empty(3)?,
        LabeledGraph::complete(3)?,
    ];
    let chain = simulate(&make_ernec(params)?, config.length, chain_seed(config.seed, 0))?;
    let states = kept_states(&chain, config.burn_in);
    let three: Vec<&LabeledGraph> = states.iter().filter(|g| g.n() == 3).collect();
    let q = params.q;
    let mut rows = Vec::new();
    let mut observed = Vec::new();
    let mut expected = Vec::new();
    for g in &graphs {
        let hits = three.iter().filter(|h| **h == g).count();
        let obs = if three.is_empty() { 0.0 } else { hits as f64 / three.len() as f64 };
        let e = g.edge_count() as i32;
        let er = q.powi(e) * (1.0 - q).powi(3 - e);
        rows.push(vec![g.encode(), e.to_string(), num(obs), num(er)]);
        observed.push(obs);
        expected.push(er);
    }
    out.csv(STATIONARY_FILE, &["graph", "edges", "observed", "er_probability"], &rows)?;
    Ok(json!({
        "three_node_samples": three.len(),
        "graphs": graphs.iter().map(LabeledGraph::encode).collect::<Vec<_>>(),
        "observed": observed,
        "expected": expected,
        "max_abs_deviation": linf(&observed, &expected),
    }))
}

fn run_entropy(config: &ExperimentConfig, params: &ErnecParams, out: &mut Outputs) -> Result<Value> {
    let m = make_ernec(params)?;
    let formula = ernec_entropy_rate(params)?;
    let kernel_rate = if params.n_max <= ENUMERATION_CAP {
        let kernel = GraphKernel::build(&m)?;
        let pi = graph_stationary_vector(params, kernel.space())?;
        Some(kernel_entropy_rate_with(&kernel, &pi)?)
    } else {
        None
    };
    let reference = match config.mode {
        PathMode::LabeledPath => Some(formula),
        PathMode::GraphKernel => kernel_rate,
    };
    let initial = node_stationary_analytic(params)?.probs[0];

    let mut chains = Vec::new();
    let mut series = Vec::new();
    for k in 0..config.chains {
        let seed = chain_seed(config.seed, k);
        let chain = simulate(&m, config.length, seed)?;
        let labeled = empirical_entropy_rate(&m, &chain, PathMode::LabeledPath, initial)?;
        let graph = empirical_entropy_rate(&m, &chain, PathMode::GraphKernel, initial)?;
        let chosen: &EmpiricalRate = match config.mode {
            PathMode::LabeledPath => &labeled,
            PathMode::GraphKernel => &graph,
        };
        let verdict = reference
            .map(|h| typicality_test(h, chosen.rate, chosen.n, config.epsilon))
            .transpose()?;
        chains.push(json!({
            "seed": seed,
            "n": chain.len(),
            "labeled_path_rate": labeled.rate,
            "graph_kernel_rate": graph.rate,
            "labeled_path_deviation": (labeled.rate - formula).abs(),
            "graph_kernel_deviation": kernel_rate.map(|h| (graph.rate - h).abs()),
            "typicality": verdict,
        }));
        series.push(chosen.prefix.clone());
    }
    let header = convergence_header(config.chains);
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    out.csv(CONVERGENCE_FILE, &header, &convergence_rows(&series))?;
    let typical = chains.iter().filter(|c| c["typicality"]["typical"] == json!(true)).count();
    let summary = json!({
        "formula_rate": formula,
        "kernel_rate": kernel_rate,
        "gap": kernel_rate.map(|h| formula - h),
        "mode": config.mode,
        "epsilon": config.epsilon,
        "typical_chains": typical,
        "chains": chains,
    });
    out.json(ENTROPY_FILE, &summary)?;
    Ok(summary)
}

fn run_npc(config: &ExperimentConfig, params: &ErnecParams, out: &mut Outputs) -> Result<Value> {
    let f = PropertyFn::by_name(&config.property, params.n_max)?;
    let m = make_ernec(params)?;
    let options = NpcOptions {
        burn_in: config.burn_in,
        fit: config.fit,
    };
    let reduced = if params.n_max <= ENUMERATION_CAP {
        Some(build_reduced_hmm(params, &f, config.weighting)?)
    } else {
        None
    };
    let exact_markov = (f.name() == "node-count")
        .then(|| node_count_entropy_rate(params))
        .transpose()?;

    let mut chains = Vec::new();
    let mut series = Vec::new();
    for k in 0..config.chains {
        let seed = chain_seed(config.seed, k);
        let est = npc_entropy_pipeline(params, &f, config.length, seed, options)?;
        let chain = simulate(&m, config.length, seed)?;
        let npc = extract_npc(&chain, &f);
        if k == 0 {
            save_npc(&npc, out.path(NPC_FILE))?;
        }
        let kept = &npc.symbols[est.burn_in_steps..];
        let reduced_rate = reduced
            .as_ref()
            .map(|h| h.forward_log_prob(kept).map(|lp| -lp / kept.len() as f64))
            .transpose()?;
        chains.push(json!({
            "seed": seed,
            "n": est.n,
            "rate": est.rate,
            "tail_spread": tail_spread(&est.prefix, 0.1),
            "reduced_exact_rate": reduced_rate,
        }));
        series.push(est.prefix);
    }
    let header = convergence_header(config.chains);
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    out.csv(CONVERGENCE_FILE, &header, &convergence_rows(&series))?;
    let summary = json!({
        "property": f.name(),
        "fit": config.fit,
        "emission_weighting": config.weighting,
        "weighting_inexact_for_q": config.weighting.is_inexact_for(params.q),
        "node_count_markov_rate": exact_markov,
        "chains": chains,
    });
    out.json(ENTROPY_FILE, &summary)?;
    Ok(summary)
}

fn run_ctmc(config: &ExperimentConfig, params: &ErnecParams, out: &mut Outputs) -> Result<Value> {
    let tau = config.ctmc.tau.unwrap_or(1.0);
    let params = match &config.ctmc.dwell {
        Some(targets) => calibrate_s(tau, targets, params)?,
        None => params.clone(),
    };
    let n = params.n_max;
    let lambda = match &config.ctmc.lambda {
        Some(l) if l.len() == n => l.clone(),
        Some(l) => {
            return Err(CliError::Config(format!("ctmc.lambda has {} entries, expected n_max = {n}", l.len())))
        }
        None => params.s.iter().map(|&s| lambda_for_s(tau, s)).collect(),
    };
    let r = node_count_rate_matrix(&params, &lambda)?;
    let pi = ctmc_stationary(&r)?;
    let min_rate = lambda.iter().copied().fold(f64::INFINITY, f64::min);
    let horizon = config.ctmc.horizon.unwrap_or(config.length as f64 / min_rate);
    let m = make_ernec(&params)?;
    let rate = |g: &LabeledGraph| lambda[g.n() - 1];
    let traj = simulate_ctmc(&m, &rate, horizon, chain_seed(config.seed, 0))?;
    save_trajectory(&traj, out.path(TRAJECTORY_FILE))?;
    let occupation = traj.node_count_fractions(n);

    let discrete = simulate(&m, config.length, chain_seed(config.seed, 1))?;
    let mut rows = Vec::new();
    let mut dwell_errors = Vec::new();
    for i in 1..=n {
        let expected = expected_dwell(tau, params.s_at(i));
        let observed = mean_dwell(&discrete, tau, Some(i));
        if let Some(o) = observed {
            dwell_errors.push((o / expected - 1.0).abs());
        }
        rows.push(vec![
            i.to_string(),
            num(lambda[i - 1]),
            num(pi.probs[i - 1]),
            num(occupation[i - 1]),
            num(expected),
            observed.map(num).unwrap_or_default(),
        ]);
    }
    out.csv(
        STATIONARY_FILE,
        &["node_count", "lambda", "ctmc_stationary", "occupation", "expected_dwell", "observed_dwell"],
        &rows,
    )?;
    Ok(json!({
        "tau": tau,
        "horizon": horizon,
        "jumps": traj.len(),
        "lambda": lambda,
        "stationary": pi.probs,
        "occupation": occupation,
        "linf_occupation": linf(&pi.probs, &occupation),
        "max_relative_dwell_error": dwell_errors.iter().copied().fold(0.0, f64::max),
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thinning_keeps_the_last_point() {
        assert_eq!(thinned(3), vec![0, 1, 2]);
        let idx = thinned(12_345);
        assert!(idx.len() <= CONVERGENCE_POINTS + 1);
        assert_eq!(*idx.last().unwrap(), 12_344);
    }

    #[test]
    fn chain_seeds_are_distinct() {
        let seeds: std::collections::HashSet<u64> = (0..100).map(|k| chain_seed(7, k)).collect();
        assert_eq!(seeds.len(), 100);
    }
}
