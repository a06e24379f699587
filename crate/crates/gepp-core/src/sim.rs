//! Monte Carlo rollouts with belief tracking under partial observation.
//!
//! Channel evolution is exogenous: the hidden pair follows its Markov law
//! regardless of the action, only the observations differ. Each episode
//! draws exactly two uniforms per slot (one per channel) from its own
//! counter-seeded stream, so a given (seed, episode) pair reproduces the
//! same hidden trajectory under any policy — common random numbers for
//! paired comparisons come for free. Episode returns are reduced by
//! pairwise summation in index order, making parallel and serial runs agree
//! bit for bit.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::model::{Action, Belief, ModelParams};
use crate::solver::BorderValueFunction;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("horizon must be at least 1")]
    ZeroHorizon,

    #[error("episodes must be at least 1")]
    ZeroEpisodes,

    #[error("policy comparison needs at least 2 sources, got {0}")]
    TooFewPolicies(usize),
}

/// How the hidden channel pair is initialized at slot 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialStateSampling {
    /// Sample each channel from the initial belief (the conditional-
    /// expectation semantics of the discounted objective).
    FromBelief,
    /// Force a fixed hidden pair.
    Fixed { ch1_good: bool, ch2_good: bool },
}

/// Rollout configuration.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SimConfig {
    pub horizon: usize,
    pub episodes: usize,
    pub seed: u64,
    pub initial_belief: Belief,
    pub initial_state_sampling: InitialStateSampling,
}

impl SimConfig {
    /// Smallest horizon T with β^T · 2R_l/(1−β) ≤ `trunc_error`.
    pub fn horizon_for(params: &ModelParams, trunc_error: f64) -> usize {
        let beta = params.beta();
        if beta == 0.0 {
            return 1;
        }
        let tail_scale = 2.0 * params.r_low() / (1.0 - beta);
        if tail_scale <= trunc_error {
            return 1;
        }
        let t = ((trunc_error / tail_scale).ln() / beta.ln()).ceil();
        (t as usize).max(1)
    }

    /// Discounted tail bound β^horizon · 2R_l/(1−β) left outside the sum.
    pub fn truncation_bound(&self, params: &ModelParams) -> f64 {
        let beta = params.beta();
        if beta == 0.0 {
            return 0.0;
        }
        beta.powi(self.horizon as i32) * 2.0 * params.r_low() / (1.0 - beta)
    }
}

/// Estimated expected discounted bits with its sampling error.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RolloutResult {
    pub mean_discounted_bits: f64,
    /// Sample standard deviation divided by √episodes.
    pub std_error: f64,
    pub episodes: usize,
    pub horizon: usize,
    pub seed: u64,
    pub truncation_bound: f64,
}

/// A decision rule queried at the current belief.
pub trait PolicyRule: Sync {
    fn action(&self, b: Belief) -> Action;
    fn name(&self) -> &str;
}

/// Greedy one-step lookahead against a solved value function.
pub struct GreedyValuePolicy<'a> {
    pub values: &'a BorderValueFunction,
}

impl PolicyRule for GreedyValuePolicy<'_> {
    fn action(&self, b: Belief) -> Action {
        self.values.backup(b).argmax()
    }

    fn name(&self) -> &str {
        "optimal"
    }
}

/// Always plays one action.
pub struct FixedActionPolicy {
    pub action: Action,
    name: String,
}

impl FixedActionPolicy {
    pub fn new(action: Action) -> Self {
        Self {
            action,
            name: format!("always-{action}"),
        }
    }
}

impl PolicyRule for FixedActionPolicy {
    fn action(&self, _b: Belief) -> Action {
        self.action
    }

    fn name(&self) -> &str {
        &self.name
    }
}

/// Greedy on immediate expected reward only.
pub struct MyopicPolicy {
    pub params: ModelParams,
}

impl PolicyRule for MyopicPolicy {
    fn action(&self, b: Belief) -> Action {
        let g_b = (b.p1 + b.p2) * self.params.r_low();
        let g_1 = b.p1 * self.params.r_high();
        let g_2 = b.p2 * self.params.r_high();
        if g_b >= g_1 && g_b >= g_2 {
            Action::Balanced
        } else if g_1 >= g_2 {
            Action::Bet1
        } else {
            Action::Bet2
        }
    }

    fn name(&self) -> &str {
        "myopic"
    }
}

/// One Markov step of the hidden pair; draws exactly two uniforms.
pub fn step_channels(
    state: (bool, bool),
    params: &ModelParams,
    rng: &mut impl Rng,
) -> (bool, bool) {
    let p1 = if state.0 {
        params.lambda1()
    } else {
        params.lambda0()
    };
    let p2 = if state.1 {
        params.lambda1()
    } else {
        params.lambda0()
    };
    let next1 = rng.gen::<f64>() < p1;
    let next2 = rng.gen::<f64>() < p2;
    (next1, next2)
}

/// One logged slot of a rollout: the belief the action was chosen from, the
/// hidden states, which channels were observed, and the realized bits.
#[derive(Debug, Clone, Serialize)]
pub struct TraceRow {
    pub t: usize,
    pub belief_p1: f64,
    pub belief_p2: f64,
    pub action: Action,
    pub ch1_good: bool,
    pub ch2_good: bool,
    pub observed1: Option<bool>,
    pub observed2: Option<bool>,
    pub bits: f64,
}

/// CSV rendering of a trace: t,p1,p2,action,ch1,ch2,obs1,obs2,bits.
pub fn trace_csv(rows: &[TraceRow]) -> String {
    let fmt_obs = |o: Option<bool>| match o {
        None => "-".to_string(),
        Some(true) => "good".to_string(),
        Some(false) => "bad".to_string(),
    };
    let mut out = String::from("t,p1,p2,action,ch1,ch2,obs1,obs2,bits\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.t,
            r.belief_p1,
            r.belief_p2,
            r.action,
            if r.ch1_good { "good" } else { "bad" },
            if r.ch2_good { "good" } else { "bad" },
            fmt_obs(r.observed1),
            fmt_obs(r.observed2),
            r.bits
        ));
    }
    out
}

fn episode_rng(seed: u64, episode: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(episode);
    rng
}

fn run_episode(
    rule: &dyn PolicyRule,
    cfg: &SimConfig,
    params: &ModelParams,
    episode: u64,
    mut trace: Option<&mut Vec<TraceRow>>,
) -> f64 {
    let mut rng = episode_rng(cfg.seed, episode);
    let mut belief = cfg.initial_belief;
    let mut state = match cfg.initial_state_sampling {
        InitialStateSampling::FromBelief => {
            let s1 = rng.gen::<f64>() < belief.p1;
            let s2 = rng.gen::<f64>() < belief.p2;
            (s1, s2)
        }
        InitialStateSampling::Fixed { ch1_good, ch2_good } => (ch1_good, ch2_good),
    };
    let (l0, l1) = (params.lambda0(), params.lambda1());
    let reveal = |good: bool| if good { l1 } else { l0 };
    let mut total = 0.0f64;
    let mut disc = 1.0f64;
    for t in 0..cfg.horizon {
        let action = rule.action(belief);
        let (bits, observed1, observed2) = match action {
            Action::Balanced => {
                let bits =
                    (state.0 as u8 + state.1 as u8) as f64 * params.r_low();
                (bits, Some(state.0), Some(state.1))
            }
            Action::Bet1 => {
                let bits = if state.0 { params.r_high() } else { 0.0 };
                (bits, Some(state.0), None)
            }
            Action::Bet2 => {
                let bits = if state.1 { params.r_high() } else { 0.0 };
                (bits, None, Some(state.1))
            }
        };
        if let Some(rows) = trace.as_deref_mut() {
            rows.push(TraceRow {
                t,
                belief_p1: belief.p1,
                belief_p2: belief.p2,
                action,
                ch1_good: state.0,
                ch2_good: state.1,
                observed1,
                observed2,
                bits,
            });
        }
        total += disc * bits;
        disc *= params.beta();
        belief = Belief {
            p1: observed1.map_or_else(|| params.tau(belief.p1), reveal),
            p2: observed2.map_or_else(|| params.tau(belief.p2), reveal),
        };
        state = step_channels(state, params, &mut rng);
    }
    total
}

/// Returns per-episode discounted sums, in episode order.
fn episode_returns(
    rule: &dyn PolicyRule,
    cfg: &SimConfig,
    params: &ModelParams,
) -> Vec<f64> {
    (0..cfg.episodes as u64)
        .into_par_iter()
        .map(|e| run_episode(rule, cfg, params, e, None))
        .collect()
}

/// Pairwise (cascade) summation in fixed index order.
fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 32 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

fn summarize(returns: &[f64], cfg: &SimConfig, params: &ModelParams) -> RolloutResult {
    let n = returns.len();
    let mean = pairwise_sum(returns) / n as f64;
    let std_error = if n > 1 {
        let sq: Vec<f64> = returns.iter().map(|x| (x - mean) * (x - mean)).collect();
        let var = pairwise_sum(&sq) / (n - 1) as f64;
        (var / n as f64).sqrt()
    } else {
        0.0
    };
    RolloutResult {
        mean_discounted_bits: mean,
        std_error,
        episodes: n,
        horizon: cfg.horizon,
        seed: cfg.seed,
        truncation_bound: cfg.truncation_bound(params),
    }
}

/// Estimates expected discounted bits for one policy.
pub fn rollout_policy(
    rule: &dyn PolicyRule,
    cfg: &SimConfig,
    params: &ModelParams,
) -> Result<RolloutResult, SimError> {
    validate(cfg)?;
    let returns = episode_returns(rule, cfg, params);
    Ok(summarize(&returns, cfg, params))
}

/// Logs one episode slot by slot (for debugging and filter checks).
pub fn trace_episode(
    rule: &dyn PolicyRule,
    cfg: &SimConfig,
    params: &ModelParams,
    episode: u64,
) -> Vec<TraceRow> {
    let mut rows = Vec::with_capacity(cfg.horizon);
    run_episode(rule, cfg, params, episode, Some(&mut rows));
    rows
}

fn validate(cfg: &SimConfig) -> Result<(), SimError> {
    if cfg.horizon == 0 {
        return Err(SimError::ZeroHorizon);
    }
    if cfg.episodes == 0 {
        return Err(SimError::ZeroEpisodes);
    }
    Ok(())
}

/// One policy's row in a comparison table.
#[derive(Debug, Clone, Serialize)]
pub struct ComparisonRow {
    pub rank: usize,
    pub name: String,
    pub mean_discounted_bits: f64,
    pub std_error: f64,
    /// Mean of per-episode differences against the top-ranked policy.
    pub diff_vs_top: f64,
    /// Standard error of that paired difference.
    pub paired_std_error: f64,
}

/// Ranked common-random-numbers comparison.
#[derive(Debug, Clone, Serialize)]
pub struct PolicyComparison {
    pub rows: Vec<ComparisonRow>,
    pub episodes: usize,
    pub horizon: usize,
    pub seed: u64,
}

impl PolicyComparison {
    /// CSV rendering: rank,name,mean,std_error,diff_vs_top,paired_std_error.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("rank,name,mean_discounted_bits,std_error,diff_vs_top,paired_std_error\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.rank, r.name, r.mean_discounted_bits, r.std_error, r.diff_vs_top, r.paired_std_error
            ));
        }
        out
    }
}

/// Evaluates every policy on the same episode streams and ranks by mean.
/// Paired differences are taken against the top-ranked policy.
pub fn compare_policies(
    rules: &[&dyn PolicyRule],
    cfg: &SimConfig,
    params: &ModelParams,
) -> Result<PolicyComparison, SimError> {
    validate(cfg)?;
    if rules.len() < 2 {
        return Err(SimError::TooFewPolicies(rules.len()));
    }
    let all_returns: Vec<Vec<f64>> = rules
        .iter()
        .map(|r| episode_returns(*r, cfg, params))
        .collect();
    let summaries: Vec<RolloutResult> = all_returns
        .iter()
        .map(|r| summarize(r, cfg, params))
        .collect();
    let mut order: Vec<usize> = (0..rules.len()).collect();
    order.sort_by(|&a, &b| {
        summaries[b]
            .mean_discounted_bits
            .partial_cmp(&summaries[a].mean_discounted_bits)
            .expect("finite means")
    });
    let top = order[0];
    let n = cfg.episodes;
    let rows = order
        .iter()
        .enumerate()
        .map(|(rank, &i)| {
            let diffs: Vec<f64> = all_returns[i]
                .iter()
                .zip(&all_returns[top])
                .map(|(a, b)| a - b)
                .collect();
            let dmean = pairwise_sum(&diffs) / n as f64;
            let dse = if n > 1 {
                let sq: Vec<f64> = diffs.iter().map(|x| (x - dmean) * (x - dmean)).collect();
                (pairwise_sum(&sq) / (n - 1) as f64 / n as f64).sqrt()
            } else {
                0.0
            };
            ComparisonRow {
                rank,
                name: rules[i].name().to_string(),
                mean_discounted_bits: summaries[i].mean_discounted_bits,
                std_error: summaries[i].std_error,
                diff_vs_top: dmean,
                paired_std_error: dse,
            }
        })
        .collect();
    Ok(PolicyComparison {
        rows,
        episodes: cfg.episodes,
        horizon: cfg.horizon,
        seed: cfg.seed,
    })
}
