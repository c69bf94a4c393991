//! Seeded Monte Carlo episodes of the Greedy-Mine chain.
//!
//! Every trial draws from its own ChaCha8 stream: the 256-bit key is expanded
//! from the master seed with `SeedableRng::seed_from_u64` and the 64-bit
//! stream id is the trial index. Trial `i` therefore sees the same random
//! numbers no matter which thread runs it or in what order, and per-thread
//! tallies are integer sums, so the aggregate is independent of the degree
//! of parallelism.

use std::collections::BTreeMap;
use std::ops::Add;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{transition, ChainState, Finder, StrategyParams, TieChoice};

pub const DEFAULT_TRIALS: u64 = 1_000_000;
pub const DEFAULT_GIVEUP_DEPTH: u32 = 64;
/// Hard cap on Key-Blocks per episode.
pub const DEFAULT_MAX_STEPS: u64 = 1 << 20;
pub const MIN_GIVEUP_DEPTH: u32 = 2;
// Trials per rayon work item.
const BATCH: u64 = 4096;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("trials must be at least 1")]
    NoTrials,
    #[error("giveup depth must be at least {MIN_GIVEUP_DEPTH}, got {0}")]
    GiveupTooShallow(u32),
    #[error("max steps must be at least 1")]
    NoSteps,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub params: StrategyParams,
    pub trials: u64,
    pub master_seed: u64,
    /// The greedy pool abandons the episode once any lead index exceeds this.
    pub giveup_depth: u32,
    pub max_steps: u64,
}

impl SimConfig {
    pub fn new(params: StrategyParams, trials: u64, master_seed: u64) -> Self {
        Self {
            params,
            trials,
            master_seed,
            giveup_depth: DEFAULT_GIVEUP_DEPTH,
            max_steps: DEFAULT_MAX_STEPS,
        }
    }

    pub fn with_giveup_depth(mut self, depth: u32) -> Self {
        self.giveup_depth = depth;
        self
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.trials == 0 {
            return Err(SimError::NoTrials);
        }
        if self.giveup_depth < MIN_GIVEUP_DEPTH {
            return Err(SimError::GiveupTooShallow(self.giveup_depth));
        }
        if self.max_steps == 0 {
            return Err(SimError::NoSteps);
        }
        Ok(())
    }

    fn limits(&self) -> TrialLimits {
        TrialLimits {
            giveup_depth: self.giveup_depth,
            max_steps: self.max_steps,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialLimits {
    pub giveup_depth: u32,
    pub max_steps: u64,
}

impl Default for TrialLimits {
    fn default() -> Self {
        Self {
            giveup_depth: DEFAULT_GIVEUP_DEPTH,
            max_steps: DEFAULT_MAX_STEPS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TrialOutcome {
    GreedyWin,
    /// The honest lead passed the giveup depth.
    HonestWin,
    /// The step budget ran out first.
    Truncated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialResult {
    pub outcome: TrialOutcome,
    pub steps: u64,
}

/// Plays one episode from `S`.
pub fn run_trial<R: Rng + ?Sized>(params: &StrategyParams, limits: &TrialLimits, rng: &mut R) -> TrialResult {
    play(params, limits, rng, |_| {})
}

/// Like [`run_trial`], recording every state visited, including the final one.
pub fn run_trial_traced<R: Rng + ?Sized>(
    params: &StrategyParams,
    limits: &TrialLimits,
    rng: &mut R,
    path: &mut Vec<ChainState>,
) -> TrialResult {
    path.clear();
    path.push(ChainState::S);
    play(params, limits, rng, |s| path.push(s))
}

fn play<R: Rng + ?Sized>(
    params: &StrategyParams,
    limits: &TrialLimits,
    rng: &mut R,
    mut visit: impl FnMut(ChainState),
) -> TrialResult {
    let mut state = ChainState::S;
    let mut steps = 0;
    while steps < limits.max_steps {
        let finder = if rng.random_bool(params.alpha()) {
            Finder::Greedy
        } else {
            Finder::Honest
        };
        let tie = (finder == Finder::Honest && state.is_tie_state()).then(|| {
            if rng.random_bool(params.gamma()) {
                TieChoice::ExtendGreedy
            } else {
                TieChoice::ExtendHonest
            }
        });
        state = transition(state, finder, tie).expect("episode never visits a terminal state");
        steps += 1;

        if state == ChainState::H1 {
            visit(state);
            return TrialResult {
                outcome: TrialOutcome::GreedyWin,
                steps,
            };
        }
        if state.index().is_some_and(|k| k > limits.giveup_depth) {
            visit(ChainState::HonestWin);
            return TrialResult {
                outcome: TrialOutcome::HonestWin,
                steps,
            };
        }
        visit(state);
    }
    TrialResult {
        outcome: TrialOutcome::Truncated,
        steps,
    }
}

/// Stream for trial `index` under `master_seed`.
pub fn trial_rng(master_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct Tally {
    greedy_wins: u64,
    honest_wins: u64,
    truncated: u64,
    steps: u64,
}

impl Tally {
    fn record(&mut self, result: TrialResult) {
        match result.outcome {
            TrialOutcome::GreedyWin => self.greedy_wins += 1,
            TrialOutcome::HonestWin => self.honest_wins += 1,
            TrialOutcome::Truncated => self.truncated += 1,
        }
        self.steps += result.steps;
    }
}

impl Add for Tally {
    type Output = Tally;

    fn add(self, other: Tally) -> Tally {
        Tally {
            greedy_wins: self.greedy_wins + other.greedy_wins,
            honest_wins: self.honest_wins + other.honest_wins,
            truncated: self.truncated + other.truncated,
            steps: self.steps + other.steps,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimStats {
    pub trials: u64,
    pub greedy_wins: u64,
    pub honest_wins: u64,
    pub truncated: u64,
    /// Fraction of episodes won by the greedy pool, i.e. its revenue estimate.
    pub p_hat: f64,
    pub ci95_half_width: f64,
    /// Mean Key-Blocks per episode.
    pub mean_steps: f64,
    pub seed_echo: u64,
    pub giveup_depth: u32,
}

impl SimStats {
    fn from_tally(config: &SimConfig, tally: Tally) -> Self {
        let n = config.trials as f64;
        let p_hat = tally.greedy_wins as f64 / n;
        SimStats {
            trials: config.trials,
            greedy_wins: tally.greedy_wins,
            honest_wins: tally.honest_wins,
            truncated: tally.truncated,
            p_hat,
            ci95_half_width: 1.96 * (p_hat * (1.0 - p_hat) / n).sqrt(),
            mean_steps: tally.steps as f64 / n,
            seed_echo: config.master_seed,
            giveup_depth: config.giveup_depth,
        }
    }
}

/// Runs `config.trials` independent episodes on the current rayon pool.
pub fn estimate(config: &SimConfig) -> Result<SimStats, SimError> {
    config.validate()?;
    let limits = config.limits();
    let batches = config.trials.div_ceil(BATCH);
    let tally = (0..batches)
        .into_par_iter()
        .map(|batch| {
            let mut tally = Tally::default();
            let start = batch * BATCH;
            let end = (start + BATCH).min(config.trials);
            for index in start..end {
                let mut rng = trial_rng(config.master_seed, index);
                tally.record(run_trial(&config.params, &limits, &mut rng));
            }
            tally
        })
        .reduce(Tally::default, Tally::add);
    Ok(SimStats::from_tally(config, tally))
}

/// Observed successor counts, keyed by source state then target state.
///
/// Episodes ended by the giveup rule contribute their final edge with target
/// `HonestWin`.
pub type TransitionCounts = BTreeMap<ChainState, BTreeMap<ChainState, u64>>;

/// Replays the trials of `config` with path recording and pools the edges.
pub fn transition_frequencies(config: &SimConfig) -> Result<TransitionCounts, SimError> {
    config.validate()?;
    let limits = config.limits();
    let batches = config.trials.div_ceil(BATCH);
    let counts = (0..batches)
        .into_par_iter()
        .map(|batch| {
            let mut counts = TransitionCounts::new();
            let mut path = Vec::new();
            let start = batch * BATCH;
            let end = (start + BATCH).min(config.trials);
            for index in start..end {
                let mut rng = trial_rng(config.master_seed, index);
                run_trial_traced(&config.params, &limits, &mut rng, &mut path);
                for edge in path.windows(2) {
                    *counts.entry(edge[0]).or_default().entry(edge[1]).or_default() += 1;
                }
            }
            counts
        })
        .reduce(TransitionCounts::new, |mut left, right| {
            for (from, row) in right {
                let target = left.entry(from).or_default();
                for (to, n) in row {
                    *target.entry(to).or_default() += n;
                }
            }
            left
        });
    Ok(counts)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(alpha: f64, gamma: f64) -> StrategyParams {
        StrategyParams::with_default_split(alpha, gamma).unwrap()
    }

    #[test]
    fn powerless_greedy_always_loses() {
        let stats = estimate(&SimConfig::new(params(0.0, 1.0), 2_000, 7)).unwrap();
        assert_eq!(stats.greedy_wins, 0);
        assert_eq!(stats.honest_wins + stats.truncated, 2_000);
        // s -> a0 -> a1 -> a0[0], then 65 honest blocks up to a0[65].
        assert_eq!(stats.mean_steps, 68.0);
    }

    #[test]
    fn full_power_wins_in_two_steps() {
        let stats = estimate(&SimConfig::new(params(1.0, 0.0), 1_000, 3)).unwrap();
        assert_eq!(stats.greedy_wins, 1_000);
        assert_eq!(stats.mean_steps, 2.0);
        assert_eq!(stats.p_hat, 1.0);
        assert_eq!(stats.ci95_half_width, 0.0);
    }

    #[test]
    fn forced_path_is_recorded() {
        let mut path = Vec::new();
        let mut rng = trial_rng(1, 0);
        let result = run_trial_traced(&params(1.0, 0.5), &TrialLimits::default(), &mut rng, &mut path);
        assert_eq!(result.outcome, TrialOutcome::GreedyWin);
        assert_eq!(path, vec![ChainState::S, ChainState::H0, ChainState::H1]);
    }

    #[test]
    fn step_budget_truncates() {
        let limits = TrialLimits {
            giveup_depth: 64,
            max_steps: 5,
        };
        let result = run_trial(&params(0.0, 0.0), &limits, &mut trial_rng(0, 0));
        assert_eq!(result, TrialResult { outcome: TrialOutcome::Truncated, steps: 5 });
    }

    #[test]
    fn stats_are_consistent() {
        let config = SimConfig::new(params(0.3, 0.5), 20_000, 42).with_giveup_depth(16);
        let stats = estimate(&config).unwrap();
        assert_eq!(stats.greedy_wins + stats.honest_wins + stats.truncated, stats.trials);
        assert_eq!(stats.p_hat, stats.greedy_wins as f64 / 20_000.0);
        let expected_ci = 1.96 * (stats.p_hat * (1.0 - stats.p_hat) / 20_000.0).sqrt();
        assert_eq!(stats.ci95_half_width, expected_ci);
        assert_eq!(stats.seed_echo, 42);
        assert_eq!(stats.giveup_depth, 16);
    }

    #[test]
    fn repeat_runs_are_identical() {
        let config = SimConfig::new(params(0.35, 0.25), 10_001, 99);
        assert_eq!(estimate(&config).unwrap(), estimate(&config).unwrap());
        let other = SimConfig { master_seed: 100, ..config };
        assert_ne!(estimate(&config).unwrap(), estimate(&other).unwrap());
    }

    #[test]
    fn streams_differ_by_index() {
        let a: u64 = trial_rng(5, 0).random();
        let b: u64 = trial_rng(5, 1).random();
        let c: u64 = trial_rng(5, 0).random();
        assert_ne!(a, b);
        assert_eq!(a, c);
    }

    #[test]
    fn config_validation() {
        let base = SimConfig::new(params(0.2, 0.2), 10, 1);
        assert_eq!(estimate(&SimConfig { trials: 0, ..base }), Err(SimError::NoTrials));
        assert_eq!(
            estimate(&base.with_giveup_depth(1)),
            Err(SimError::GiveupTooShallow(1))
        );
        assert_eq!(estimate(&SimConfig { max_steps: 0, ..base }), Err(SimError::NoSteps));
    }
}
