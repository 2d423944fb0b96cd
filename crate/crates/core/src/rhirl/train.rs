use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::{Demonstration, LearnerConfig, LikelihoodObjective, RhirlError};
use crate::reward::{project_l1, FeatureMap, RewardModel};
use crate::story::WorldSpec;

const MAX_HALVINGS: usize = 20;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// 0 for the initial weights.
    pub iteration: usize,
    pub log_likelihood: f64,
    /// Step actually taken; 0 when no halving improved the objective.
    pub step_size_used: f64,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingRecord {
    pub config: LearnerConfig,
    pub iterations: Vec<IterationRecord>,
    pub weights: Vec<f64>,
}

impl TrainingRecord {
    pub fn log_likelihoods(&self) -> Vec<f64> {
        self.iterations.iter().map(|r| r.log_likelihood).collect()
    }

    pub fn final_log_likelihood(&self) -> f64 {
        self.iterations.last().map_or(0.0, |r| r.log_likelihood)
    }

    pub fn reward_model(&self, fm: FeatureMap) -> Result<RewardModel, RhirlError> {
        Ok(RewardModel::new(fm, self.weights.clone())?)
    }
}

/// Trains from `w = 0`. Timing entries are zero; use
/// [`train_with_clock`] to record wall-clock time.
pub fn train(
    world: &WorldSpec,
    fm: &FeatureMap,
    demos: &[Demonstration],
    cfg: &LearnerConfig,
) -> Result<(RewardModel, TrainingRecord), RhirlError> {
    train_with_clock(world, fm, demos, cfg, &mut || 0.0)
}

/// As [`train`], with `clock` returning monotonic seconds.
pub fn train_with_clock(
    world: &WorldSpec,
    fm: &FeatureMap,
    demos: &[Demonstration],
    cfg: &LearnerConfig,
    clock: &mut dyn FnMut() -> f64,
) -> Result<(RewardModel, TrainingRecord), RhirlError> {
    cfg.validate()?;
    if demos.is_empty() {
        return Err(RhirlError::EmptyDemonstrations);
    }
    let start = clock();
    let objective = LikelihoodObjective::new(world, fm, demos, cfg.horizon, cfg.beta)?;
    let mut w = vec![0.0; fm.len()];
    let (mut ll, mut grad) = objective.value_and_gradient(&w)?;
    let mut iterations = vec![IterationRecord {
        iteration: 0,
        log_likelihood: ll,
        step_size_used: 0.0,
        seconds: clock() - start,
    }];

    for iteration in 1..=cfg.max_iterations {
        let t0 = clock();
        let mut step = cfg.step_size;
        let mut accepted = None;
        let attempts = if cfg.backtracking { MAX_HALVINGS + 1 } else { 1 };
        for _ in 0..attempts {
            let candidate: Vec<f64> = w.iter().zip(&grad).map(|(w, g)| w + step * g).collect();
            let candidate = project_l1(&candidate, 1.0);
            let value = objective.value(&candidate)?;
            if !cfg.backtracking || value >= ll {
                accepted = Some((candidate, value, step));
                break;
            }
            step *= 0.5;
        }
        let step_used = match accepted {
            Some((candidate, _, step)) => {
                w = candidate;
                (ll, grad) = objective.value_and_gradient(&w)?;
                step
            }
            None => 0.0,
        };
        iterations.push(IterationRecord {
            iteration,
            log_likelihood: ll,
            step_size_used: step_used,
            seconds: clock() - t0,
        });
    }
    let record = TrainingRecord {
        config: cfg.clone(),
        iterations,
        weights: w.clone(),
    };
    Ok((RewardModel::new(fm.clone(), w)?, record))
}

/// One `(group, h, β)` cell of an experiment grid. Ordered by group, then
/// horizon, then `β` under IEEE total order.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GridCell {
    pub group: String,
    pub horizon: usize,
    pub beta: f64,
}

impl PartialEq for GridCell {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for GridCell {}

impl PartialOrd for GridCell {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for GridCell {
    fn cmp(&self, other: &Self) -> Ordering {
        self.group
            .cmp(&other.group)
            .then(self.horizon.cmp(&other.horizon))
            .then(self.beta.total_cmp(&other.beta))
    }
}

/// Every cell of `groups × horizons × betas`, in order.
pub fn grid_cells<'a>(groups: impl IntoIterator<Item = &'a String>, horizons: &[usize], betas: &[f64]) -> Vec<GridCell> {
    let mut cells = Vec::new();
    for g in groups {
        for &horizon in horizons {
            for &beta in betas {
                cells.push(GridCell {
                    group: g.clone(),
                    horizon,
                    beta,
                });
            }
        }
    }
    cells.sort();
    cells.dedup();
    cells
}

/// Trains every cell independently; failures are kept per cell.
pub fn run_grid(
    world: &WorldSpec,
    fm: &FeatureMap,
    groups: &BTreeMap<String, Vec<Demonstration>>,
    horizons: &[usize],
    betas: &[f64],
    base: &LearnerConfig,
) -> Result<BTreeMap<GridCell, Result<TrainingRecord, RhirlError>>, RhirlError> {
    if groups.is_empty() {
        return Err(RhirlError::InvalidConfig("no groups"));
    }
    Ok(grid_cells(groups.keys(), horizons, betas)
        .into_iter()
        .map(|cell| {
            let cfg = LearnerConfig {
                horizon: cell.horizon,
                beta: cell.beta,
                ..base.clone()
            };
            let result = train(world, fm, &groups[&cell.group], &cfg).map(|(_, r)| r);
            (cell, result)
        })
        .collect())
}
