//! Receding-horizon maximum-likelihood IRL.
//!
//! Values follow a finite-horizon soft recursion over applicable actions:
//!
//! ```text
//! Q_d(s, a) = R(s') + V_{d-1}(s')        s' = T(s, a)
//! V_0(s)    = 0,  V_j(terminal) = 0
//! V_j(s)    = Σ_a π_j(a|s) Q_j(s, a),    π_j ∝ exp(β Q_j)
//! ```
//!
//! Demonstrations are scored by `Σ log π_h(a_i | s_i)` and the weights are
//! fitted by projected gradient ascent with backtracking.

mod boltzmann;
mod lookahead;
mod train;

use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

use crate::engine::{ActionInstance, GameState};
use crate::reward::{FeatureMap, RewardError, RewardModel};
use crate::story::WorldSpec;

pub use boltzmann::boltzmann_policy;
pub use train::{grid_cells, run_grid, train, train_with_clock, GridCell, IterationRecord, TrainingRecord};

use lookahead::{Lookahead, NodeId, SoftValues};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RhirlError {
    #[error("state is terminal")]
    TerminalState,
    #[error("no applicable actions")]
    EmptyActionSet,
    #[error("invalid learner configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("demonstration {trace_id:?}: action {index} is not applicable in its state")]
    DemonstrationMismatch { trace_id: String, index: usize },
    #[error("no demonstrations")]
    EmptyDemonstrations,
    #[error(transparent)]
    Reward(#[from] RewardError),
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LearnerConfig {
    pub horizon: usize,
    pub beta: f64,
    pub max_iterations: usize,
    pub step_size: f64,
    pub backtracking: bool,
    /// Carried into run outputs; training itself has no randomness.
    pub seed: u64,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            horizon: 4,
            beta: 0.1,
            max_iterations: 10,
            step_size: 0.1,
            backtracking: true,
            seed: 0,
        }
    }
}

impl LearnerConfig {
    pub fn new(horizon: usize, beta: f64) -> Self {
        Self {
            horizon,
            beta,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), RhirlError> {
        if self.horizon == 0 {
            return Err(RhirlError::InvalidConfig("horizon must be at least 1"));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(RhirlError::InvalidConfig("beta must be finite and non-negative"));
        }
        if self.max_iterations == 0 {
            return Err(RhirlError::InvalidConfig("max_iterations must be at least 1"));
        }
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(RhirlError::InvalidConfig("step_size must be positive"));
        }
        Ok(())
    }
}

/// One demonstrated trajectory as `(state, action)` pairs.
#[derive(Clone, Debug, PartialEq)]
pub struct Demonstration {
    pub source_trace_id: String,
    pub pairs: Vec<(GameState, ActionInstance)>,
}

/// `Q_depth(s, a)` for each applicable action, in engine order.
pub fn soft_q(
    world: &WorldSpec,
    rm: &RewardModel,
    state: &GameState,
    depth: usize,
    beta: f64,
) -> Result<Vec<(ActionInstance, f64)>, RhirlError> {
    if depth == 0 {
        return Err(RhirlError::InvalidConfig("depth must be at least 1"));
    }
    if state.is_terminal(world) {
        return Err(RhirlError::TerminalState);
    }
    rm.feature_map().check_state(state)?;
    let mut la = Lookahead::new(world, rm.feature_map());
    let root = la.intern(state);
    la.explore(root, depth);
    Ok(q_at(&la, rm.weights(), root, depth, beta))
}

fn q_at(la: &Lookahead<'_>, weights: &[f64], root: NodeId, depth: usize, beta: f64) -> Vec<(ActionInstance, f64)> {
    let mut sv = SoftValues::new(la, weights, depth, beta);
    let q = sv.q_values(root, depth);
    la.children(root).iter().map(|(a, _)| *a).zip(q).collect()
}

/// Reusable planner for one reward model: keeps its lookahead graph between
/// calls so successive decisions along a trajectory share work.
pub struct Planner<'w> {
    la: Lookahead<'w>,
    weights: Vec<f64>,
    depth: usize,
    beta: f64,
}

impl<'w> Planner<'w> {
    pub fn new(world: &'w WorldSpec, rm: &'w RewardModel, depth: usize, beta: f64) -> Result<Self, RhirlError> {
        if depth == 0 {
            return Err(RhirlError::InvalidConfig("depth must be at least 1"));
        }
        Ok(Self {
            la: Lookahead::new(world, rm.feature_map()),
            weights: rm.weights().to_vec(),
            depth,
            beta,
        })
    }

    pub fn q_values(&mut self, state: &GameState) -> Result<Vec<(ActionInstance, f64)>, RhirlError> {
        if state.is_terminal(self.la.world()) {
            return Err(RhirlError::TerminalState);
        }
        let root = self.la.intern(state);
        self.la.explore(root, self.depth);
        Ok(q_at(&self.la, &self.weights, root, self.depth, self.beta))
    }
}

/// The demonstration log-likelihood as a function of the weights, with the
/// lookahead graph built once.
pub struct LikelihoodObjective<'w> {
    la: Lookahead<'w>,
    fm: &'w FeatureMap,
    pairs: Vec<(NodeId, usize)>,
    horizon: usize,
    beta: f64,
}

impl<'w> LikelihoodObjective<'w> {
    pub fn new(
        world: &'w WorldSpec,
        fm: &'w FeatureMap,
        demos: &[Demonstration],
        horizon: usize,
        beta: f64,
    ) -> Result<Self, RhirlError> {
        if horizon == 0 {
            return Err(RhirlError::InvalidConfig("horizon must be at least 1"));
        }
        let mut la = Lookahead::new(world, fm);
        let mut pairs = Vec::new();
        for demo in demos {
            for (index, (state, action)) in demo.pairs.iter().enumerate() {
                fm.check_state(state)?;
                let mismatch = || RhirlError::DemonstrationMismatch {
                    trace_id: demo.source_trace_id.clone(),
                    index,
                };
                if state.is_terminal(world) {
                    return Err(mismatch());
                }
                let root = la.intern(state);
                la.explore(root, horizon);
                let chosen = la
                    .children(root)
                    .iter()
                    .position(|(a, _)| a == action)
                    .ok_or_else(mismatch)?;
                pairs.push((root, chosen));
            }
        }
        Ok(Self {
            la,
            fm,
            pairs,
            horizon,
            beta,
        })
    }

    pub fn feature_map(&self) -> &FeatureMap {
        self.fm
    }

    pub fn pair_count(&self) -> usize {
        self.pairs.len()
    }

    /// Distinct states in the lookahead graph.
    pub fn state_count(&self) -> usize {
        self.la.len()
    }

    fn check(&self, weights: &[f64]) -> Result<(), RhirlError> {
        if weights.len() != self.fm.len() {
            return Err(RewardError::DimensionMismatch {
                expected: self.fm.len(),
                got: weights.len(),
            }
            .into());
        }
        Ok(())
    }

    pub fn value(&self, weights: &[f64]) -> Result<f64, RhirlError> {
        self.check(weights)?;
        Ok(SoftValues::new(&self.la, weights, self.horizon, self.beta).log_likelihood(&self.pairs))
    }

    pub fn value_and_gradient(&self, weights: &[f64]) -> Result<(f64, Vec<f64>), RhirlError> {
        self.check(weights)?;
        Ok(SoftValues::new(&self.la, weights, self.horizon, self.beta).likelihood_and_gradient(&self.pairs))
    }
}

/// `Σ_demos Σ_i log π_h(a_i | s_i)`.
pub fn log_likelihood(
    world: &WorldSpec,
    rm: &RewardModel,
    demos: &[Demonstration],
    cfg: &LearnerConfig,
) -> Result<f64, RhirlError> {
    cfg.validate()?;
    LikelihoodObjective::new(world, rm.feature_map(), demos, cfg.horizon, cfg.beta)?.value(rm.weights())
}

/// Exact gradient of [`log_likelihood`] with respect to the weights.
pub fn grad_log_likelihood(
    world: &WorldSpec,
    rm: &RewardModel,
    demos: &[Demonstration],
    cfg: &LearnerConfig,
) -> Result<Vec<f64>, RhirlError> {
    cfg.validate()?;
    LikelihoodObjective::new(world, rm.feature_map(), demos, cfg.horizon, cfg.beta)?
        .value_and_gradient(rm.weights())
        .map(|(_, g)| g)
}

#[cfg(test)]
mod tests;
