//! Executing a reward model as a receding-horizon policy.
//!
//! Each decision replans with the full horizon from the current state.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::engine::{apply_action, initial_state, ActionInstance, GameState};
use crate::ids::PlotIx;
use crate::reward::RewardModel;
use crate::rhirl::{boltzmann_policy, Planner, RhirlError};
use crate::story::WorldSpec;

/// Default action cap for rollouts.
pub const DEFAULT_CAP: usize = 100;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyMode {
    #[default]
    Greedy,
    Sampled,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainedPolicy {
    pub reward_model: RewardModel,
    pub horizon: usize,
    pub beta: f64,
    pub mode: PolicyMode,
    /// Only used in sampled mode.
    pub seed: u64,
}

impl TrainedPolicy {
    pub fn greedy(reward_model: RewardModel, horizon: usize, beta: f64) -> Self {
        Self {
            reward_model,
            horizon,
            beta,
            mode: PolicyMode::Greedy,
            seed: 0,
        }
    }

    pub fn sampled(reward_model: RewardModel, horizon: usize, beta: f64, seed: u64) -> Self {
        Self {
            reward_model,
            horizon,
            beta,
            mode: PolicyMode::Sampled,
            seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GeneratedTrace {
    pub actions: Vec<ActionInstance>,
    /// In discovery order.
    pub plot_points_discovered: Vec<PlotIx>,
    pub end_reached: Option<PlotIx>,
}

/// One decision from `state`. Greedy picks the first maximiser in engine
/// order; sampled draws from a generator seeded by the policy's seed.
pub fn choose_action(policy: &TrainedPolicy, world: &WorldSpec, state: &GameState) -> Result<ActionInstance, RhirlError> {
    let mut planner = Planner::new(world, &policy.reward_model, policy.horizon, policy.beta)?;
    let mut rng = ChaCha8Rng::seed_from_u64(policy.seed);
    decide(policy, world, &mut planner, &mut rng, state, &[])
}

fn decide(
    policy: &TrainedPolicy,
    world: &WorldSpec,
    planner: &mut Planner<'_>,
    rng: &mut ChaCha8Rng,
    state: &GameState,
    recent: &[GameState],
) -> Result<ActionInstance, RhirlError> {
    policy.reward_model.feature_map().check_state(state)?;
    let q = planner.q_values(state)?;
    if q.is_empty() {
        return Err(RhirlError::EmptyActionSet);
    }
    match policy.mode {
        PolicyMode::Greedy => {
            let mut order: Vec<usize> = (0..q.len()).collect();
            order.sort_by(|&i, &j| q[j].1.total_cmp(&q[i].1).then(i.cmp(&j)));
            let revisits = |a: &ActionInstance| {
                let next = apply_action(world, state, a).expect("planned actions are applicable").next_state;
                next == *state || recent.contains(&next)
            };
            let pick = order.iter().copied().find(|&i| !revisits(&q[i].0)).unwrap_or(order[0]);
            Ok(q[pick].0)
        }
        PolicyMode::Sampled => {
            let values: Vec<f64> = q.iter().map(|(_, v)| *v).collect();
            let p = boltzmann_policy(&values, policy.beta)?;
            let u: f64 = rng.gen();
            let mut acc = 0.0;
            for (i, pi) in p.iter().enumerate() {
                acc += pi;
                if u < acc {
                    return Ok(q[i].0);
                }
            }
            Ok(q[q.len() - 1].0)
        }
    }
}

/// Runs the policy from the initial state until an ending or `cap` actions.
///
/// In greedy mode an action whose successor equals the current state or one
/// of the two before it is skipped in favour of the next best one.
pub fn rollout(policy: &TrainedPolicy, world: &WorldSpec, cap: usize) -> Result<GeneratedTrace, RhirlError> {
    let mut planner = Planner::new(world, &policy.reward_model, policy.horizon, policy.beta)?;
    let mut rng = ChaCha8Rng::seed_from_u64(policy.seed);
    let mut state = initial_state(world);
    let mut history: Vec<GameState> = Vec::new();
    let mut actions = Vec::new();
    let mut plot_points_discovered = Vec::new();
    while actions.len() < cap && !state.is_terminal(world) {
        let recent = &history[history.len().saturating_sub(2)..];
        let action = match decide(policy, world, &mut planner, &mut rng, &state, recent) {
            Ok(a) => a,
            Err(RhirlError::EmptyActionSet) => break,
            Err(e) => return Err(e),
        };
        let outcome = apply_action(world, &state, &action).expect("planned actions are applicable");
        plot_points_discovered.extend(outcome.newly_visited_plot_points.iter().copied());
        actions.push(action);
        history.push(core::mem::replace(&mut state, outcome.next_state));
    }
    Ok(GeneratedTrace {
        actions,
        plot_points_discovered,
        end_reached: state.ending(world),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{applicable_actions, replay};
    use crate::reward::FeatureMap;
    use crate::testing::{chain, toy};
    use alloc::vec;

    #[test]
    fn flat_rewards_pick_first_action() {
        let w = toy();
        let p = TrainedPolicy::greedy(RewardModel::zero(FeatureMap::for_world(&w)), 2, 1.0);
        let s = initial_state(&w);
        assert_eq!(choose_action(&p, &w, &s).unwrap(), applicable_actions(&w, &s)[0]);
    }

    #[test]
    fn ending_indicator_picks_triggering_action() {
        let w = chain();
        let fm = FeatureMap::for_world(&w);
        let mut weights = vec![0.0; fm.len()];
        weights[fm.index_of("ending:goal").unwrap()] = 1.0;
        let p = TrainedPolicy::greedy(RewardModel::new(fm, weights).unwrap(), 1, 1.0);
        let s1 = replay(&w, &[ActionInstance::goto(w.location_ix("s1").unwrap())]).unwrap();
        assert_eq!(
            choose_action(&p, &w, s1.final_state()).unwrap(),
            ActionInstance::goto(w.location_ix("s2").unwrap())
        );
    }

    #[test]
    fn sampled_choice_is_reproducible() {
        let w = toy();
        let fm = FeatureMap::for_world(&w);
        let p = TrainedPolicy::sampled(RewardModel::zero(fm), 2, 1.0, 42);
        let s = initial_state(&w);
        let first = choose_action(&p, &w, &s).unwrap();
        for _ in 0..10 {
            assert_eq!(choose_action(&p, &w, &s).unwrap(), first);
        }
    }

    #[test]
    fn terminal_state_is_an_error() {
        let w = chain();
        let p = TrainedPolicy::greedy(RewardModel::zero(FeatureMap::for_world(&w)), 1, 1.0);
        let r = replay(
            &w,
            &[
                ActionInstance::goto(w.location_ix("s1").unwrap()),
                ActionInstance::goto(w.location_ix("s2").unwrap()),
            ],
        )
        .unwrap();
        assert_eq!(choose_action(&p, &w, r.final_state()), Err(RhirlError::TerminalState));
    }

    #[test]
    fn zero_policy_respects_cap_and_replays() {
        let w = toy();
        let p = TrainedPolicy::greedy(RewardModel::zero(FeatureMap::for_world(&w)), 2, 1.0);
        let t = rollout(&p, &w, DEFAULT_CAP).unwrap();
        assert!(t.actions.len() <= DEFAULT_CAP);
        assert_eq!(rollout(&p, &w, DEFAULT_CAP).unwrap(), t);
        let r = replay(&w, &t.actions).unwrap();
        assert_eq!(r.plot_points_discovered(), t.plot_points_discovered);
        assert_eq!(r.end_reached(&w), t.end_reached);
    }

    #[test]
    fn cap_of_one() {
        let w = toy();
        let p = TrainedPolicy::greedy(RewardModel::zero(FeatureMap::for_world(&w)), 1, 1.0);
        assert_eq!(rollout(&p, &w, 1).unwrap().actions.len(), 1);
    }

    #[test]
    fn goal_reward_reaches_ending() {
        let w = toy();
        let fm = FeatureMap::for_world(&w);
        let rm = RewardModel::route_to(&w, fm, w.endings()[0]);
        let t = rollout(&TrainedPolicy::greedy(rm, 3, 5.0), &w, DEFAULT_CAP).unwrap();
        assert_eq!(t.end_reached, Some(w.endings()[0]));
    }
}
