//! The Greedy-Mine state machine.
//!
//! One episode follows a single whale transaction from the moment it enters
//! the mempool (`S`) until the greedy pool either captures all of its fees
//! (`H1`) or the episode is abandoned (`HonestWin`). States prefixed `H` are
//! reached after the greedy pool packaged the whale transaction itself;
//! states prefixed `A` are reached after the honest pool packaged it.
//! Indexed states carry the honest branch's lead `k`.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Share of an epoch's fees paid to the current leader in Bitcoin-NG.
pub const DEFAULT_R_LEADER: f64 = 0.40;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("{name} must lie in [0, 1], got {value}")]
    OutOfRange { name: &'static str, value: f64 },
    #[error("state {0} is terminal and has no successors")]
    TerminalState(ChainState),
    #[error("state {0} is not a member of the state space")]
    InvalidState(ChainState),
    #[error("tie choice must be supplied exactly for an honest find at a tie state (state {state}, finder {finder:?})")]
    TieMismatch { state: ChainState, finder: Finder },
}

/// Mining-power share, propagation factor and fee split for one scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrategyParams {
    alpha: f64,
    gamma: f64,
    r_leader: f64,
}

fn check_probability(name: &'static str, value: f64) -> Result<f64, ModelError> {
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(ModelError::OutOfRange { name, value })
    }
}

impl StrategyParams {
    pub fn new(alpha: f64, gamma: f64, r_leader: f64) -> Result<Self, ModelError> {
        Ok(Self {
            alpha: check_probability("alpha", alpha)?,
            gamma: check_probability("gamma", gamma)?,
            r_leader: check_probability("r_leader", r_leader)?,
        })
    }

    /// Parameters with the Bitcoin-NG default fee split.
    pub fn with_default_split(alpha: f64, gamma: f64) -> Result<Self, ModelError> {
        Self::new(alpha, gamma, DEFAULT_R_LEADER)
    }

    /// Greedy pool's share of the total mining power.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Share of honest power that extends the greedy branch during a tie.
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Current leader's share of the epoch's transaction fees.
    pub fn r_leader(&self) -> f64 {
        self.r_leader
    }
}

/// A node of the Greedy-Mine chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ChainState {
    /// Whale transaction not yet packaged.
    S,
    /// Packaged by the greedy pool, nothing on top yet.
    H0,
    /// Greedy pool packaged it and extended it: all fees captured.
    H1,
    /// Honest branch kept the whale fees; only entered by a give-up policy.
    HonestWin,
    /// Greedy-packaged, honest branch `k + 1` blocks on top.
    H0k(u32),
    /// Greedy-packaged, the two branches are tied.
    H10,
    /// Greedy-packaged, honest branch ahead by `k >= 1`.
    H1k(u32),
    /// Packaged by the honest pool, nothing on top yet.
    A0,
    /// Honest-packaged, one honest block on top.
    A1,
    /// Honest-packaged, greedy pool forked in front of it.
    A2,
    /// Honest-packaged, honest branch `k + 2` long, greedy has not forked.
    A0k(u32),
    /// Greedy has forked, honest branch ahead by `k + 1`.
    A1k(u32),
    /// Fork in front of an honest whale block, branches tied.
    A20,
    /// Fork in front of an honest whale block, honest ahead by `k >= 1`.
    A2k(u32),
}

impl ChainState {
    /// H1 and HonestWin are the only absorbing states.
    pub fn is_terminal(&self) -> bool {
        matches!(self, ChainState::H1 | ChainState::HonestWin)
    }

    /// States where an honest finder picks a branch.
    pub fn is_tie_state(&self) -> bool {
        matches!(self, ChainState::H10 | ChainState::A2 | ChainState::A20)
    }

    /// The lead index carried by an indexed state.
    pub fn index(&self) -> Option<u32> {
        match *self {
            ChainState::H0k(k)
            | ChainState::H1k(k)
            | ChainState::A0k(k)
            | ChainState::A1k(k)
            | ChainState::A2k(k) => Some(k),
            _ => None,
        }
    }

    /// `H1k` and `A2k` start at `k = 1`; their `k = 0` slot is `H10`/`A20`.
    pub fn is_valid(&self) -> bool {
        !matches!(self, ChainState::H1k(0) | ChainState::A2k(0))
    }
}

impl fmt::Display for ChainState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChainState::S => f.write_str("s"),
            ChainState::H0 => f.write_str("h0"),
            ChainState::H1 => f.write_str("h1"),
            ChainState::HonestWin => f.write_str("honest-win"),
            ChainState::H0k(k) => write!(f, "h0[{k}]"),
            ChainState::H10 => f.write_str("h10"),
            ChainState::H1k(k) => write!(f, "h1[{k}]"),
            ChainState::A0 => f.write_str("a0"),
            ChainState::A1 => f.write_str("a1"),
            ChainState::A2 => f.write_str("a2"),
            ChainState::A0k(k) => write!(f, "a0[{k}]"),
            ChainState::A1k(k) => write!(f, "a1[{k}]"),
            ChainState::A20 => f.write_str("a20"),
            ChainState::A2k(k) => write!(f, "a2[{k}]"),
        }
    }
}

/// Who found the next Key-Block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Finder {
    Greedy,
    Honest,
}

/// Branch an honest finder extends when the branches are tied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TieChoice {
    ExtendGreedy,
    ExtendHonest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    GreedyWin,
    HonestWin,
}

pub fn is_terminal(state: ChainState) -> Option<Outcome> {
    match state {
        ChainState::H1 => Some(Outcome::GreedyWin),
        ChainState::HonestWin => Some(Outcome::HonestWin),
        _ => None,
    }
}

/// Applies one Key-Block discovery to `state`.
pub fn transition(
    state: ChainState,
    finder: Finder,
    tie: Option<TieChoice>,
) -> Result<ChainState, ModelError> {
    use ChainState::*;
    use Finder::*;

    if state.is_terminal() {
        return Err(ModelError::TerminalState(state));
    }
    if !state.is_valid() {
        return Err(ModelError::InvalidState(state));
    }
    let needs_tie = state.is_tie_state() && finder == Honest;
    if needs_tie != tie.is_some() {
        return Err(ModelError::TieMismatch { state, finder });
    }
    let extend_greedy = tie == Some(TieChoice::ExtendGreedy);

    let next = match (state, finder) {
        (S, Greedy) => H0,
        (S, Honest) => A0,

        (H0, Greedy) => H1,
        (H0, Honest) => H0k(0),

        (H0k(0), Greedy) => H10,
        (H0k(k), Greedy) => H1k(k),
        (H0k(k), Honest) => H0k(k + 1),

        (H10, Greedy) => H1,
        (H10, Honest) if extend_greedy => H1,
        (H10, Honest) => H1k(1),

        (H1k(1), Greedy) => H10,
        (H1k(k), Greedy) => H1k(k - 1),
        (H1k(k), Honest) => H1k(k + 1),

        (A0, Greedy) => H0,
        (A0, Honest) => A1,

        (A1, Greedy) => A2,
        (A1, Honest) => A0k(0),

        (A2, Greedy) => H1,
        (A2, Honest) if extend_greedy => H0k(0),
        (A2, Honest) => A1k(0),

        (A0k(k), Greedy) => A1k(k),
        (A0k(k), Honest) => A0k(k + 1),

        (A1k(0), Greedy) => A20,
        (A1k(k), Greedy) => A2k(k),
        (A1k(k), Honest) => A1k(k + 1),

        (A20, Greedy) => H1,
        (A20, Honest) if extend_greedy => H1,
        (A20, Honest) => A2k(1),

        (A2k(1), Greedy) => A20,
        (A2k(k), Greedy) => A2k(k - 1),
        (A2k(k), Honest) => A2k(k + 1),

        (H1 | HonestWin, _) => unreachable!("terminal states rejected above"),
    };
    Ok(next)
}

/// Successor distribution of `state`, with Finder and TieChoice marginalized.
///
/// Successors are listed greedy find first, then honest-extends-greedy, then
/// honest-extends-honest. Duplicates are merged and zero-probability edges
/// dropped.
pub fn transition_distribution(
    state: ChainState,
    params: &StrategyParams,
) -> Result<Vec<(ChainState, f64)>, ModelError> {
    let alpha = params.alpha();
    let gamma = params.gamma();

    let mut branches: Vec<(ChainState, f64)> = Vec::with_capacity(3);
    branches.push((transition(state, Finder::Greedy, None)?, alpha));
    if state.is_tie_state() {
        branches.push((
            transition(state, Finder::Honest, Some(TieChoice::ExtendGreedy))?,
            gamma * (1.0 - alpha),
        ));
        branches.push((
            transition(state, Finder::Honest, Some(TieChoice::ExtendHonest))?,
            (1.0 - gamma) * (1.0 - alpha),
        ));
    } else {
        branches.push((transition(state, Finder::Honest, None)?, 1.0 - alpha));
    }

    let mut merged: Vec<(ChainState, f64)> = Vec::with_capacity(branches.len());
    for (next, p) in branches {
        if p <= 0.0 {
            continue;
        }
        match merged.iter_mut().find(|(s, _)| *s == next) {
            Some(slot) => slot.1 += p,
            None => merged.push((next, p)),
        }
    }
    Ok(merged)
}
