//! Recorded play traces, player profiles and the two grouping schemes.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{replay, ActionError, ActionInstance, ActionKind, Replay, ReplayError};
use crate::policy::{rollout, TrainedPolicy};
use crate::reward::RewardModel;
use crate::rhirl::{Demonstration, RhirlError};
use crate::story::WorldSpec;

pub const TRACE_SCHEMA_VERSION: &str = "1";

/// Questionnaire scores, each normalised to `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlayerProfile {
    pub familiarity: f64,
    pub gaming_experience: f64,
    pub preference_explore: f64,
    pub persistence: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileFactor {
    Familiarity,
    GamingExperience,
    PreferenceExplore,
    Persistence,
}

impl ProfileFactor {
    pub const ALL: [ProfileFactor; 4] = [
        ProfileFactor::Familiarity,
        ProfileFactor::GamingExperience,
        ProfileFactor::PreferenceExplore,
        ProfileFactor::Persistence,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ProfileFactor::Familiarity => "familiarity",
            ProfileFactor::GamingExperience => "gaming_experience",
            ProfileFactor::PreferenceExplore => "preference_explore",
            ProfileFactor::Persistence => "persistence",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|f| f.as_str() == s)
    }
}

impl PlayerProfile {
    pub fn values(&self) -> [f64; 4] {
        [
            self.familiarity,
            self.gaming_experience,
            self.preference_explore,
            self.persistence,
        ]
    }

    pub fn is_valid(&self) -> bool {
        self.values().iter().all(|v| (0.0..=1.0).contains(v))
    }

    /// Scores of at least 0.5 map to 1.
    pub fn binarize(&self) -> [u8; 4] {
        self.values().map(|v| u8::from(v >= 0.5))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TraceSource {
    #[serde(rename = "human")]
    Human,
    #[serde(rename = "policy")]
    Policy,
    #[serde(rename = "synthetic-expert")]
    SyntheticExpert,
}

impl TraceSource {
    pub const ALL: [TraceSource; 3] = [TraceSource::Human, TraceSource::Policy, TraceSource::SyntheticExpert];

    pub fn as_str(self) -> &'static str {
        match self {
            TraceSource::Human => "human",
            TraceSource::Policy => "policy",
            TraceSource::SyntheticExpert => "synthetic-expert",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionRecord {
    pub kind: ActionKind,
    pub target: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub key: Option<String>,
    /// Milliseconds since the start of the session.
    pub t_ms: u64,
}

impl ActionRecord {
    pub fn new(world: &WorldSpec, action: &ActionInstance, t_ms: u64) -> Self {
        Self {
            kind: action.kind(),
            target: String::from(action.target_id(world)),
            key: action.key_id(world).map(String::from),
            t_ms,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Trace {
    pub schema_version: String,
    pub trace_id: String,
    pub player_id: String,
    pub source: TraceSource,
    pub story_fingerprint: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<PlayerProfile>,
    pub actions: Vec<ActionRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub end_reached: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TraceError {
    #[error("trace {trace_id:?} was recorded against a different story")]
    FingerprintMismatch { trace_id: String },
    #[error("trace {trace_id:?}, action {index}: {source}")]
    Action {
        trace_id: String,
        index: usize,
        source: ActionError,
    },
    #[error("trace {trace_id:?}: {source}")]
    Replay { trace_id: String, source: ReplayError },
    #[error("trace {trace_id:?} records ending {recorded:?} but replay reaches {replayed:?}")]
    EndMismatch {
        trace_id: String,
        recorded: Option<String>,
        replayed: Option<String>,
    },
    #[error("trace {trace_id:?} has a profile value outside [0, 1]")]
    InvalidProfile { trace_id: String },
    #[error("unsupported trace schema version {0:?}")]
    UnsupportedSchema(String),
    #[error("group references unknown trace {0:?}")]
    UnknownMember(String),
}

impl Trace {
    /// A trace whose recorded ending is taken from replaying `actions`.
    pub fn from_actions(
        world: &WorldSpec,
        trace_id: String,
        player_id: String,
        source: TraceSource,
        profile: Option<PlayerProfile>,
        actions: &[(ActionInstance, u64)],
    ) -> Result<Self, TraceError> {
        let plain: Vec<ActionInstance> = actions.iter().map(|(a, _)| *a).collect();
        let end = replay(world, &plain)
            .map_err(|source| TraceError::Replay {
                trace_id: trace_id.clone(),
                source,
            })?
            .end_reached(world)
            .map(|e| world.plot_point(e).id.clone());
        Ok(Self {
            schema_version: String::from(TRACE_SCHEMA_VERSION),
            trace_id,
            player_id,
            source,
            story_fingerprint: String::from(world.fingerprint()),
            profile,
            actions: actions.iter().map(|(a, t)| ActionRecord::new(world, a, *t)).collect(),
            end_reached: end,
        })
    }

    /// Resolves the recorded ids against `world`.
    pub fn resolve(&self, world: &WorldSpec) -> Result<Vec<ActionInstance>, TraceError> {
        if self.schema_version != TRACE_SCHEMA_VERSION {
            return Err(TraceError::UnsupportedSchema(self.schema_version.clone()));
        }
        if self.story_fingerprint != world.fingerprint() {
            return Err(TraceError::FingerprintMismatch {
                trace_id: self.trace_id.clone(),
            });
        }
        if self.profile.is_some_and(|p| !p.is_valid()) {
            return Err(TraceError::InvalidProfile {
                trace_id: self.trace_id.clone(),
            });
        }
        self.actions
            .iter()
            .enumerate()
            .map(|(index, r)| {
                ActionInstance::from_ids(world, r.kind, &r.target, r.key.as_deref()).map_err(|source| {
                    TraceError::Action {
                        trace_id: self.trace_id.clone(),
                        index,
                        source,
                    }
                })
            })
            .collect()
    }

    /// Replays the trace and checks its recorded ending.
    pub fn replay(&self, world: &WorldSpec) -> Result<Replay, TraceError> {
        let actions = self.resolve(world)?;
        let r = replay(world, &actions).map_err(|source| TraceError::Replay {
            trace_id: self.trace_id.clone(),
            source,
        })?;
        let replayed = r.end_reached(world).map(|e| world.plot_point(e).id.clone());
        if replayed != self.end_reached {
            return Err(TraceError::EndMismatch {
                trace_id: self.trace_id.clone(),
                recorded: self.end_reached.clone(),
                replayed,
            });
        }
        Ok(r)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupCriterion {
    ByEnd { ending: String },
    ByProfile { factor: ProfileFactor, level: u8 },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceGroup {
    pub group_id: String,
    pub criterion: GroupCriterion,
    pub members: Vec<String>,
}

impl TraceGroup {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Member traces looked up in `corpus`, in member order.
    pub fn resolve<'t>(&self, corpus: &'t [Trace]) -> Result<Vec<&'t Trace>, TraceError> {
        self.members
            .iter()
            .map(|id| {
                corpus
                    .iter()
                    .find(|t| &t.trace_id == id)
                    .ok_or_else(|| TraceError::UnknownMember(id.clone()))
            })
            .collect()
    }
}

/// One group per ending that occurs, keyed and ordered by ending id; traces
/// without an ending are left out.
pub fn group_by_end(traces: &[Trace]) -> Vec<TraceGroup> {
    let mut by_end: BTreeMap<&str, Vec<String>> = BTreeMap::new();
    for t in traces {
        if let Some(e) = &t.end_reached {
            by_end.entry(e).or_default().push(t.trace_id.clone());
        }
    }
    by_end
        .into_iter()
        .map(|(e, members)| TraceGroup {
            group_id: String::from(e),
            criterion: GroupCriterion::ByEnd { ending: String::from(e) },
            members,
        })
        .collect()
}

/// Splits on `factor` among traces whose other three binarised factors equal
/// the most common combination (smallest combination on ties).
pub fn group_by_profile(traces: &[Trace], factor: ProfileFactor) -> (TraceGroup, TraceGroup) {
    let others = |p: &PlayerProfile| {
        let b = p.binarize();
        let mut key = [0u8; 3];
        let mut n = 0;
        for (i, v) in b.iter().enumerate() {
            if i != factor.index() {
                key[n] = *v;
                n += 1;
            }
        }
        key
    };
    let mut counts: BTreeMap<[u8; 3], usize> = BTreeMap::new();
    for p in traces.iter().filter_map(|t| t.profile.as_ref()) {
        *counts.entry(others(p)).or_default() += 1;
    }
    let mut modal: Option<([u8; 3], usize)> = None;
    for (key, n) in counts {
        if modal.is_none_or(|(_, best)| n > best) {
            modal = Some((key, n));
        }
    }
    let group = |level: u8| {
        let members = traces
            .iter()
            .filter(|t| {
                t.profile.as_ref().is_some_and(|p| {
                    Some(others(p)) == modal.map(|(k, _)| k) && p.binarize()[factor.index()] == level
                })
            })
            .map(|t| t.trace_id.clone())
            .collect();
        TraceGroup {
            group_id: format!("{}={}", factor.as_str(), level),
            criterion: GroupCriterion::ByProfile { factor, level },
            members,
        }
    };
    (group(0), group(1))
}

/// Converts each member trace into `(state, action)` pairs by replay.
pub fn to_demonstrations(world: &WorldSpec, group: &TraceGroup, corpus: &[Trace]) -> Result<Vec<Demonstration>, TraceError> {
    group
        .resolve(corpus)?
        .into_iter()
        .map(|t| {
            let r = t.replay(world)?;
            Ok(Demonstration {
                source_trace_id: t.trace_id.clone(),
                pairs: r.steps.into_iter().map(|s| (s.state, s.action)).collect(),
            })
        })
        .collect()
}

/// Options for [`synthesize_expert_traces`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExpertOptions {
    pub beta: f64,
    pub horizon: usize,
    pub cap: usize,
    pub seed: u64,
}

/// `n` rollouts of a sampled-mode policy under `rm`. Deterministic in the
/// seed; each rollout draws its own seed from a generator seeded by it.
pub fn synthesize_expert_traces(
    world: &WorldSpec,
    rm: &RewardModel,
    n: usize,
    options: ExpertOptions,
) -> Result<Vec<Trace>, RhirlError> {
    let mut seeds = ChaCha8Rng::seed_from_u64(options.seed);
    (0..n)
        .map(|i| {
            let policy = TrainedPolicy::sampled(rm.clone(), options.horizon, options.beta, seeds.next_u64());
            let generated = rollout(&policy, world, options.cap)?;
            Ok(Trace {
                schema_version: String::from(TRACE_SCHEMA_VERSION),
                trace_id: format!("expert-{}-{:03}", options.seed, i),
                player_id: String::from("synthetic"),
                source: TraceSource::SyntheticExpert,
                story_fingerprint: String::from(world.fingerprint()),
                profile: None,
                actions: generated
                    .actions
                    .iter()
                    .enumerate()
                    .map(|(j, a)| ActionRecord::new(world, a, j as u64 * 1000))
                    .collect(),
                end_reached: generated.end_reached.map(|e| world.plot_point(e).id.clone()),
            })
        })
        .collect()
}
