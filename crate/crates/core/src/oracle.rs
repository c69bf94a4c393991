//! Exact evaluation of the Greedy-Mine chain on a depth-truncated state space.
//!
//! The chain is infinite in the lead index `k`. Every state with `k <= depth`
//! is materialized; a transition to `k = depth + 1` leaves the truncated
//! chain and lands on a single absorbing boundary. The greedy win probability
//! is then bracketed by closing the boundary with two values:
//!
//! * `0`, the pessimistic closure, which gives a lower bound;
//! * `(alpha / (1 - alpha))^(depth + 1)` for `alpha < 1/2` (and `1` otherwise),
//!   which gives an upper bound. From any state with index `depth + 1` the
//!   greedy pool must win back `depth + 1` blocks one at a time against a
//!   walk that steps up with probability `1 - alpha`, and the chance of ever
//!   doing so is exactly that power.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{transition_distribution, ChainState, StrategyParams};

pub const DEFAULT_DEPTH: u32 = 64;
pub const MIN_ABSORPTION_DEPTH: u32 = 2;
pub const MIN_DESCENT_DEPTH: u32 = 8;
// Maximum accepted ||Av - b||_inf relative to the solution scale.
const SOLVE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("truncation depth must be at least {min}, got {depth}")]
    DepthTooSmall { depth: u32, min: u32 },
    #[error("descent probability needs 0 < alpha < 0.5, got {0}")]
    OutOfDomain(f64),
    #[error("truncated chain system is singular")]
    Singular,
    #[error("linear solve residual {residual:e} exceeds tolerance")]
    Inaccurate { residual: f64 },
}

/// Bracketed greedy win probability from the start state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AbsorptionBounds {
    pub lower: f64,
    pub upper: f64,
    pub depth: u32,
    /// `upper - lower`.
    pub residual: f64,
}

/// Value of the tail closure at the truncation boundary.
pub fn tail_bound(alpha: f64, depth: u32) -> f64 {
    if alpha < 0.5 {
        (alpha / (1.0 - alpha)).powi(depth as i32 + 1).min(1.0)
    } else {
        1.0
    }
}

/// All non-terminal states with lead index at most `depth`.
#[derive(Debug, Clone)]
pub struct TruncatedChain {
    depth: u32,
    states: Vec<ChainState>,
    position: HashMap<ChainState, usize>,
}

/// Linear functional solved over a truncated chain.
struct ValueProblem<'a> {
    /// States whose value is fixed rather than solved for.
    fixed: &'a [(ChainState, f64)],
    boundary: f64,
    step_reward: f64,
}

impl TruncatedChain {
    pub fn new(depth: u32) -> Self {
        use ChainState::*;
        let mut states = vec![S, H0, H10, A0, A1, A2, A20];
        states.extend((0..=depth).map(H0k));
        states.extend((1..=depth).map(H1k));
        states.extend((0..=depth).map(A0k));
        states.extend((0..=depth).map(A1k));
        states.extend((1..=depth).map(A2k));
        let position = states.iter().enumerate().map(|(i, s)| (*s, i)).collect();
        Self {
            depth,
            states,
            position,
        }
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn states(&self) -> &[ChainState] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn contains(&self, state: ChainState) -> bool {
        self.position.contains_key(&state)
    }

    /// Assembles `(I - Q) v = b` and solves it for each right-hand side.
    fn solve(
        &self,
        params: &StrategyParams,
        problems: &[ValueProblem<'_>],
    ) -> Result<Vec<DVector<f64>>, OracleError> {
        let n = self.states.len();
        let mut matrix = DMatrix::<f64>::identity(n, n);
        let mut rhs = DMatrix::<f64>::zeros(n, problems.len());

        for (row, &state) in self.states.iter().enumerate() {
            let pinned: Vec<Option<f64>> = problems
                .iter()
                .map(|p| p.fixed.iter().find(|(s, _)| *s == state).map(|(_, v)| *v))
                .collect();
            if pinned.iter().any(Option::is_some) {
                // Pinned states must be pinned in every problem sharing the matrix.
                for (col, value) in pinned.iter().enumerate() {
                    rhs[(row, col)] = value.expect("pinned states are shared across problems");
                }
                continue;
            }

            let successors = transition_distribution(state, params)
                .expect("truncated chain holds only valid non-terminal states");
            for (col, problem) in problems.iter().enumerate() {
                rhs[(row, col)] += problem.step_reward;
            }
            for (next, p) in successors {
                if let Some(&j) = self.position.get(&next) {
                    matrix[(row, j)] -= p;
                    continue;
                }
                for (col, problem) in problems.iter().enumerate() {
                    let value = match problem.fixed.iter().find(|(s, _)| *s == next) {
                        Some((_, v)) => *v,
                        None if next.index().is_some_and(|k| k > self.depth) => problem.boundary,
                        None => 0.0,
                    };
                    rhs[(row, col)] += p * value;
                }
            }
        }

        let lu = matrix.clone().lu();
        let mut solution = lu.solve(&rhs).ok_or(OracleError::Singular)?;
        // One round of iterative refinement.
        let correction = lu.solve(&(&rhs - &matrix * &solution)).ok_or(OracleError::Singular)?;
        solution += correction;

        let residual = (&matrix * &solution - &rhs).amax();
        let scale = solution.amax().max(rhs.amax()).max(1.0);
        if !residual.is_finite() || residual > SOLVE_TOLERANCE * scale {
            return Err(OracleError::Inaccurate { residual });
        }
        Ok(solution.column_iter().map(|c| c.into_owned()).collect())
    }

    fn value_at(&self, values: &DVector<f64>, state: ChainState) -> f64 {
        values[self.position[&state]]
    }
}

fn check_depth(depth: u32, min: u32) -> Result<(), OracleError> {
    if depth < min {
        return Err(OracleError::DepthTooSmall { depth, min });
    }
    Ok(())
}

const GREEDY_WIN: [(ChainState, f64); 1] = [(ChainState::H1, 1.0)];

/// Lower and upper bounds on the probability that an episode ends in `H1`.
pub fn absorption_bounds(params: &StrategyParams, depth: u32) -> Result<AbsorptionBounds, OracleError> {
    check_depth(depth, MIN_ABSORPTION_DEPTH)?;
    let chain = TruncatedChain::new(depth);
    let tail = tail_bound(params.alpha(), depth);
    let solved = chain.solve(
        params,
        &[
            ValueProblem {
                fixed: &GREEDY_WIN,
                boundary: 0.0,
                step_reward: 0.0,
            },
            ValueProblem {
                fixed: &GREEDY_WIN,
                boundary: tail,
                step_reward: 0.0,
            },
        ],
    )?;
    let lower = chain.value_at(&solved[0], ChainState::S).clamp(0.0, 1.0);
    let upper = chain.value_at(&solved[1], ChainState::S).clamp(lower, 1.0);
    Ok(AbsorptionBounds {
        lower,
        upper,
        depth,
        residual: upper - lower,
    })
}

/// Probability that an episode from `S` leaves the truncated chain before
/// reaching `H1`; the complement of the lower absorption bound.
pub fn boundary_probability(params: &StrategyParams, depth: u32) -> Result<f64, OracleError> {
    check_depth(depth, MIN_ABSORPTION_DEPTH)?;
    let chain = TruncatedChain::new(depth);
    let fixed = [(ChainState::H1, 0.0)];
    let solved = chain.solve(
        params,
        &[ValueProblem {
            fixed: &fixed,
            boundary: 1.0,
            step_reward: 0.0,
        }],
    )?;
    Ok(chain.value_at(&solved[0], ChainState::S))
}

/// Expected number of Key-Blocks from `S` until `H1` or the boundary.
pub fn expected_steps(params: &StrategyParams, depth: u32) -> Result<f64, OracleError> {
    check_depth(depth, MIN_ABSORPTION_DEPTH)?;
    let chain = TruncatedChain::new(depth);
    let fixed = [(ChainState::H1, 0.0)];
    let solved = chain.solve(
        params,
        &[ValueProblem {
            fixed: &fixed,
            boundary: 0.0,
            step_reward: 1.0,
        }],
    )?;
    Ok(chain.value_at(&solved[0], ChainState::S))
}

/// Probability of falling from one block behind (`H1k(1)`) back to the tie
/// `H10` before the boundary.
pub fn descent_probability(params: &StrategyParams, depth: u32) -> Result<f64, OracleError> {
    let alpha = params.alpha();
    if !(alpha > 0.0 && alpha < 0.5) {
        return Err(OracleError::OutOfDomain(alpha));
    }
    check_depth(depth, MIN_DESCENT_DEPTH)?;
    let chain = TruncatedChain::new(depth);
    let fixed = [(ChainState::H10, 1.0), (ChainState::H1, 0.0)];
    let solved = chain.solve(
        params,
        &[ValueProblem {
            fixed: &fixed,
            boundary: 0.0,
            step_reward: 0.0,
        }],
    )?;
    Ok(chain.value_at(&solved[0], ChainState::H1k(1)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytics::greedy_revenue;

    fn params(alpha: f64, gamma: f64) -> StrategyParams {
        StrategyParams::with_default_split(alpha, gamma).unwrap()
    }

    /// Gauss-Seidel sweeps straight off the transition table, sharing nothing
    /// with the LU path beyond the rules themselves.
    fn iterate_absorption(params: &StrategyParams, depth: u32, boundary: f64) -> f64 {
        let chain = TruncatedChain::new(depth);
        let mut value: HashMap<ChainState, f64> = chain.states().iter().map(|s| (*s, 0.0)).collect();
        for _ in 0..200_000 {
            let mut delta: f64 = 0.0;
            for &state in chain.states() {
                let mut v = 0.0;
                for (next, p) in transition_distribution(state, params).unwrap() {
                    v += p * match next {
                        ChainState::H1 => 1.0,
                        other => *value.get(&other).unwrap_or(&boundary),
                    };
                }
                delta = delta.max((v - value[&state]).abs());
                value.insert(state, v);
            }
            if delta < 1e-15 {
                break;
            }
        }
        value[&ChainState::S]
    }

    fn gamblers_ruin(alpha: f64, depth: u32) -> f64 {
        // Walk on {0, .., depth + 1} from 1, down with probability alpha,
        // absorbed at 0 (success) or depth + 1 (failure).
        let ratio = alpha / (1.0 - alpha);
        let n = depth as i32 + 1;
        (ratio - ratio.powi(n)) / (1.0 - ratio.powi(n))
    }

    #[test]
    fn chain_size() {
        let chain = TruncatedChain::new(64);
        assert_eq!(chain.len(), 7 + 65 + 64 + 65 + 65 + 64);
        assert!(chain.contains(ChainState::H1k(64)));
        assert!(!chain.contains(ChainState::H1k(65)));
        assert!(!chain.contains(ChainState::H1));
    }

    #[test]
    fn powerless_greedy_never_wins() {
        for gamma in [0.0, 0.5, 1.0] {
            let b = absorption_bounds(&params(0.0, gamma), 16).unwrap();
            assert_eq!(b.lower, 0.0);
            assert_eq!(b.upper, 0.0);
        }
    }

    #[test]
    fn closed_form_is_below_the_exact_chain_at_half_power() {
        let b = absorption_bounds(&params(0.5, 0.0), 64).unwrap();
        assert!(b.lower >= 0.604_166_7, "{b:?}");
        assert!(b.upper <= 1.0);
    }

    #[test]
    fn deeper_truncation_tightens() {
        for alpha in [0.3, 0.45, 0.5] {
            let shallow = absorption_bounds(&params(alpha, 0.5), 16).unwrap();
            let deep = absorption_bounds(&params(alpha, 0.5), 64).unwrap();
            assert!(deep.residual < shallow.residual, "alpha {alpha}");
            assert!(deep.lower >= shallow.lower);
            assert!(deep.upper <= shallow.upper + 1e-15);
        }
    }

    #[test]
    fn agrees_with_value_iteration() {
        for (alpha, gamma) in [(0.1, 0.0), (0.3, 0.5), (0.45, 1.0), (0.6, 0.2)] {
            let p = params(alpha, gamma);
            let b = absorption_bounds(&p, 12).unwrap();
            let lower = iterate_absorption(&p, 12, 0.0);
            let upper = iterate_absorption(&p, 12, tail_bound(alpha, 12));
            assert!((b.lower - lower).abs() < 1e-10, "{alpha} {gamma}: {} vs {lower}", b.lower);
            assert!((b.upper - upper).abs() < 1e-10, "{alpha} {gamma}: {} vs {upper}", b.upper);
        }
    }

    #[test]
    fn probabilities_are_conserved() {
        for (alpha, gamma) in [(0.0, 0.3), (0.2, 1.0), (0.4, 0.0), (0.5, 0.5), (1.0, 0.0)] {
            let p = params(alpha, gamma);
            let lower = absorption_bounds(&p, 32).unwrap().lower;
            let escape = boundary_probability(&p, 32).unwrap();
            assert!((lower + escape - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn descent_matches_gamblers_ruin() {
        for i in 1..10 {
            let alpha = 0.05 * i as f64;
            let oracle = descent_probability(&params(alpha, 0.3), 64).unwrap();
            assert!((oracle - gamblers_ruin(alpha, 64)).abs() < 1e-12);
            assert!((oracle - alpha / (1.0 - alpha)).abs() < 1e-6);
        }
        let oracle = descent_probability(&params(0.2, 0.0), 64).unwrap();
        assert!((oracle - 0.25).abs() < 1e-12);
        assert!(0.2 / (1.0 - 0.2 * 0.8) < oracle);
        assert!(descent_probability(&params(1e-6, 0.0), 64).unwrap() < 1.1e-6);
    }

    #[test]
    fn descent_domain() {
        assert_eq!(
            descent_probability(&params(0.5, 0.0), 64),
            Err(OracleError::OutOfDomain(0.5))
        );
        assert!(descent_probability(&params(0.0, 0.0), 64).is_err());
        assert_eq!(
            descent_probability(&params(0.2, 0.0), 4),
            Err(OracleError::DepthTooSmall { depth: 4, min: 8 })
        );
        assert!(absorption_bounds(&params(0.2, 0.0), 1).is_err());
    }

    #[test]
    fn expected_steps_for_forced_path() {
        assert!((expected_steps(&params(1.0, 0.0), 8).unwrap() - 2.0).abs() < 1e-12);
        // With no greedy power every episode climbs the a0[k] ladder.
        let steps = expected_steps(&params(0.0, 0.0), 10).unwrap();
        assert!((steps - 14.0).abs() < 1e-12, "{steps}");
    }

    #[test]
    fn closed_form_sits_below_the_lower_bound() {
        for alpha in [0.1, 0.2, 0.3, 0.4] {
            for gamma in [0.0, 0.5, 1.0] {
                let p = params(alpha, gamma);
                let b = absorption_bounds(&p, 64).unwrap();
                assert!(greedy_revenue(&p) <= b.lower);
            }
        }
    }
}
