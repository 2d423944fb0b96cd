//! Plot-point Jaccard similarity, per-group summaries and convergence tables.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::policy::GeneratedTrace;
use crate::rhirl::{GridCell, TrainingRecord};
use crate::story::WorldSpec;
use crate::trace::{Trace, TraceError, TraceGroup};

/// `|a ∩ b| / |a ∪ b|`, and 1 when both sets are empty.
pub fn jaccard<T: Ord>(a: &BTreeSet<T>, b: &BTreeSet<T>) -> f64 {
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvaluationError {
    #[error("group {0:?} is empty")]
    EmptyGroup(String),
    #[error(transparent)]
    Trace(#[from] TraceError),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub count: usize,
    pub mean: f64,
    /// Population standard deviation.
    pub std_dev: f64,
    pub median: f64,
    pub min: f64,
    pub max: f64,
}

impl SummaryStats {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mid = sorted.len() / 2;
        let median = if sorted.len() % 2 == 1 {
            sorted[mid]
        } else {
            (sorted[mid - 1] + sorted[mid]) / 2.0
        };
        Some(Self {
            count: values.len(),
            mean,
            std_dev: libm::sqrt(var),
            median,
            min: sorted[0],
            max: sorted[sorted.len() - 1],
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimilarityResult {
    pub policy_trace_id: String,
    pub player_trace_id: String,
    pub jaccard: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupReport {
    pub group_id: String,
    pub horizon: usize,
    pub beta: f64,
    pub similarities: Vec<SimilarityResult>,
    pub stats: SummaryStats,
}

/// Plot-point ids a generated trace discovered.
pub fn plot_set(world: &WorldSpec, trace: &GeneratedTrace) -> BTreeSet<String> {
    trace
        .plot_points_discovered
        .iter()
        .map(|p| world.plot_point(*p).id.clone())
        .collect()
}

/// Compares one policy trace with every member of `group`, replaying each
/// member to recover its plot points.
pub fn evaluate_group(
    world: &WorldSpec,
    policy_trace_id: &str,
    policy_trace: &GeneratedTrace,
    group: &TraceGroup,
    corpus: &[Trace],
    horizon: usize,
    beta: f64,
) -> Result<GroupReport, EvaluationError> {
    if group.is_empty() {
        return Err(EvaluationError::EmptyGroup(group.group_id.clone()));
    }
    let ours = plot_set(world, policy_trace);
    let mut similarities = Vec::with_capacity(group.len());
    for member in group.resolve(corpus)? {
        let theirs: BTreeSet<String> = member
            .replay(world)?
            .plot_points_discovered()
            .into_iter()
            .map(|p| world.plot_point(p).id.clone())
            .collect();
        similarities.push(SimilarityResult {
            policy_trace_id: String::from(policy_trace_id),
            player_trace_id: member.trace_id.clone(),
            jaccard: jaccard(&ours, &theirs),
        });
    }
    let values: Vec<f64> = similarities.iter().map(|s| s.jaccard).collect();
    Ok(GroupReport {
        group_id: group.group_id.clone(),
        horizon,
        beta,
        stats: SummaryStats::of(&values).expect("group is non-empty"),
        similarities,
    })
}

/// Log-likelihood by iteration, one column per horizon, for one
/// `(group, β)` pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub group: String,
    pub beta: f64,
    pub horizons: Vec<usize>,
    /// `rows[i][c]` is the value at iteration `i` for `horizons[c]`.
    pub rows: Vec<Vec<Option<f64>>>,
}

impl ConvergenceTable {
    pub fn series(&self, horizon: usize) -> Option<Vec<f64>> {
        let c = self.horizons.iter().position(|h| *h == horizon)?;
        Some(self.rows.iter().map_while(|r| r[c]).collect())
    }
}

/// Groups training records into per-`(group, β)` convergence tables.
pub fn export_convergence(records: &BTreeMap<GridCell, TrainingRecord>) -> Vec<ConvergenceTable> {
    let mut by_series: BTreeMap<(String, u64), BTreeMap<usize, Vec<f64>>> = BTreeMap::new();
    let mut betas: BTreeMap<u64, f64> = BTreeMap::new();
    for (cell, record) in records {
        let key = beta_key(cell.beta);
        betas.insert(key, cell.beta);
        by_series
            .entry((cell.group.clone(), key))
            .or_default()
            .insert(cell.horizon, record.log_likelihoods());
    }
    by_series
        .into_iter()
        .map(|((group, key), series)| {
            let horizons: Vec<usize> = series.keys().copied().collect();
            let len = series.values().map(Vec::len).max().unwrap_or(0);
            let rows = (0..len)
                .map(|i| series.values().map(|s| s.get(i).copied()).collect())
                .collect();
            ConvergenceTable {
                group,
                beta: betas[&key],
                horizons,
                rows,
            }
        })
        .collect()
}

fn beta_key(beta: f64) -> u64 {
    // Order-preserving map of the IEEE total order onto u64.
    let bits = beta.to_bits();
    if bits >> 63 == 1 {
        !bits
    } else {
        bits | (1 << 63)
    }
}

/// First iteration whose value lies within `tolerance` times the total
/// change `|final - initial|` of the final value. A flat series plateaus at 0.
pub fn iterations_to_plateau(series: &[f64], tolerance: f64) -> Option<usize> {
    let first = *series.first()?;
    let last = *series.last()?;
    let band = tolerance * (last - first).abs();
    series.iter().position(|v| (v - last).abs() <= band)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlateauEntry {
    pub horizon: usize,
    pub iterations_to_plateau: usize,
    pub final_log_likelihood: f64,
}

/// Speed of convergence per horizon within one table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlateauReport {
    pub group: String,
    pub beta: f64,
    pub tolerance: f64,
    pub entries: Vec<PlateauEntry>,
    /// Whether iterations-to-plateau never increases with the horizon.
    pub larger_horizon_not_slower: bool,
}

pub fn plateau_report(table: &ConvergenceTable, tolerance: f64) -> PlateauReport {
    let entries: Vec<PlateauEntry> = table
        .horizons
        .iter()
        .filter_map(|&h| {
            let s = table.series(h)?;
            Some(PlateauEntry {
                horizon: h,
                iterations_to_plateau: iterations_to_plateau(&s, tolerance)?,
                final_log_likelihood: *s.last()?,
            })
        })
        .collect();
    let larger_horizon_not_slower = entries
        .windows(2)
        .all(|w| w[1].iterations_to_plateau <= w[0].iterations_to_plateau);
    PlateauReport {
        group: table.group.clone(),
        beta: table.beta,
        tolerance,
        entries,
        larger_horizon_not_slower,
    }
}
