//! Interactive narratives as deterministic MDPs, and receding-horizon
//! maximum-likelihood inverse reinforcement learning over them.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the trace
//! corpus on disk, the CLI and the play service live in `rhirl-workbench`.
//!
//! Module map:
//!
//! - [`story`]: declarative story worlds and their validation.
//! - [`engine`]: game state, the nine parameterised actions, transitions, replay.
//! - [`reachability`]: breadth-first diagnostics over the transition function.
//! - [`reward`]: the feature map and the linear reward `w · φ(s)`.
//! - [`rhirl`]: Boltzmann policies over finite-horizon soft values, the
//!   demonstration likelihood, its gradient and the training loop.
//! - [`policy`]: executing learned reward models as policies.
//! - [`trace`]: recorded traces, player profiles, grouping, synthetic experts.
//! - [`evaluation`]: Jaccard similarity over plot points and group summaries.
#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

mod hashing;
pub mod ids;

pub mod engine;
pub mod evaluation;
pub mod policy;
pub mod reachability;
pub mod reward;
pub mod rhirl;
pub mod story;
pub mod trace;
pub mod worldgen;

#[cfg(test)]
pub(crate) mod testing;

pub use engine::{
    apply_action, applicable_actions, initial_state, replay, ActionInstance, ActionKind, GameState,
    Replay, TransitionOutcome,
};
pub use reward::{project_l1, FeatureMap, RewardModel};
pub use story::{StoryDocument, WorldSpec};
