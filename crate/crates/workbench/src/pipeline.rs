//! Experiment steps shared by the CLI and the test suites.

use std::collections::BTreeMap;

use rayon::prelude::*;
use rhirl_core::evaluation::{evaluate_group, GroupReport};
use rhirl_core::policy::{rollout, GeneratedTrace, TrainedPolicy};
use rhirl_core::reachability::{validate_reachability, ReachabilityOptions};
use rhirl_core::rhirl::{grid_cells, train, GridCell, LearnerConfig, RhirlError, TrainingRecord};
use rhirl_core::trace::{synthesize_expert_traces, to_demonstrations, ExpertOptions, Trace, TraceGroup, TraceSource};
use rhirl_core::{FeatureMap, RewardModel, WorldSpec};

use crate::error::{Result, WorkbenchError};

/// Share of the expert reward budget placed on the target ending.
pub const DEFAULT_ENDING_SHARE: f64 = 0.4;
/// Weight magnitude on plot points that hold from the first action onwards.
pub const DEFAULT_LIVING_COST: f64 = 0.3;

/// Expert reward for `ending`: its indicators plus the plot points on the
/// shortest path the reachability search finds to it, with a per-step cost.
pub fn expert_reward(world: &WorldSpec, ending: &str, ending_share: f64, living_cost: f64) -> Result<RewardModel> {
    let ix = world
        .plot_ix(ending)
        .filter(|p| world.endings().contains(p))
        .ok_or_else(|| WorkbenchError::Invalid(format!("{ending:?} is not an ending of this story")))?;
    let report = validate_reachability(world, ReachabilityOptions::default());
    let path = report
        .endings
        .iter()
        .find(|e| e.ending == ix)
        .and_then(|e| e.shortest.clone())
        .ok_or_else(|| WorkbenchError::Runtime(format!("no path to {ending:?} found")))?;
    RewardModel::along_path(world, FeatureMap::for_world(world), &path, ending_share, living_cost)
        .ok_or_else(|| WorkbenchError::Runtime("shortest path does not replay to its ending".to_string()))
}

#[derive(Clone, Debug)]
pub struct Synthesized {
    pub traces: Vec<Trace>,
    pub attempts: usize,
    /// Attempts that reached the requested ending.
    pub successes: usize,
}

/// Draws `attempts` expert rollouts and keeps the first `count`, or with
/// `ending` set, the first `count` that reach it.
pub fn synthesize(
    world: &WorldSpec,
    rm: &RewardModel,
    count: usize,
    attempts: usize,
    ending: Option<&str>,
    options: ExpertOptions,
) -> Result<Synthesized> {
    let attempts = attempts.max(count);
    let all = synthesize_expert_traces(world, rm, attempts, options)?;
    let hits = |t: &Trace| ending.is_none_or(|e| t.end_reached.as_deref() == Some(e));
    let successes = all.iter().filter(|t| hits(t)).count();
    let traces: Vec<Trace> = all.into_iter().filter(|t| hits(t)).take(count).collect();
    Ok(Synthesized {
        traces,
        attempts,
        successes,
    })
}

/// A rollout stored in the trace format, one second apart per action.
pub fn policy_trace(world: &WorldSpec, trace_id: &str, generated: &GeneratedTrace) -> Result<Trace> {
    let timed: Vec<_> = generated
        .actions
        .iter()
        .enumerate()
        .map(|(i, a)| (*a, i as u64 * 1000))
        .collect();
    Ok(Trace::from_actions(
        world,
        trace_id.to_string(),
        "policy".to_string(),
        TraceSource::Policy,
        None,
        &timed,
    )?)
}

/// Recovers plot points and ending of a stored trace by replay.
pub fn generated_from_trace(world: &WorldSpec, trace: &Trace) -> Result<GeneratedTrace> {
    let replay = trace.replay(world)?;
    Ok(GeneratedTrace {
        actions: replay.steps.iter().map(|s| s.action).collect(),
        plot_points_discovered: replay.plot_points_discovered(),
        end_reached: replay.end_reached(world),
    })
}

#[derive(Clone, Debug)]
pub struct CellOutcome {
    pub record: TrainingRecord,
    pub reward_model: RewardModel,
    pub policy_id: String,
    pub generated: GeneratedTrace,
    pub report: GroupReport,
}

pub fn cell_policy_id(cell: &GridCell) -> String {
    format!("policy-{}-h{}-b{}", sanitize(&cell.group), cell.horizon, cell.beta)
}

/// File-name-safe rendering of a group id.
pub fn sanitize(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') { c } else { '_' })
        .collect()
}

/// Train, roll out greedily and evaluate one cell.
pub fn run_cell(
    world: &WorldSpec,
    group: &TraceGroup,
    corpus: &[Trace],
    cell: &GridCell,
    base: &LearnerConfig,
    cap: usize,
) -> Result<CellOutcome> {
    let fm = FeatureMap::for_world(world);
    let demos = to_demonstrations(world, group, corpus)?;
    let cfg = LearnerConfig {
        horizon: cell.horizon,
        beta: cell.beta,
        ..base.clone()
    };
    let (reward_model, record) = train(world, &fm, &demos, &cfg)?;
    let policy = TrainedPolicy::greedy(reward_model.clone(), cell.horizon, cell.beta);
    let generated = rollout(&policy, world, cap)?;
    let policy_id = cell_policy_id(cell);
    let report = evaluate_group(world, &policy_id, &generated, group, corpus, cell.horizon, cell.beta)?;
    Ok(CellOutcome {
        record,
        reward_model,
        policy_id,
        generated,
        report,
    })
}

/// Every `groups × horizons × betas` cell, on up to `jobs` threads. Results
/// do not depend on `jobs`.
pub fn run_grid_cells(
    world: &WorldSpec,
    groups: &[TraceGroup],
    corpus: &[Trace],
    horizons: &[usize],
    betas: &[f64],
    base: &LearnerConfig,
    cap: usize,
    jobs: usize,
) -> Result<BTreeMap<GridCell, Result<CellOutcome>>> {
    if groups.is_empty() {
        return Err(WorkbenchError::Learner(RhirlError::InvalidConfig("no groups")));
    }
    base.validate()?;
    let by_id: BTreeMap<&String, &TraceGroup> = groups.iter().map(|g| (&g.group_id, g)).collect();
    let cells = grid_cells(by_id.keys().copied(), horizons, betas);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| WorkbenchError::Runtime(e.to_string()))?;
    let results: Vec<(GridCell, Result<CellOutcome>)> = pool.install(|| {
        cells
            .into_par_iter()
            .map(|cell| {
                let out = run_cell(world, by_id[&cell.group], corpus, &cell, base, cap);
                (cell, out)
            })
            .collect()
    });
    Ok(results.into_iter().collect())
}
