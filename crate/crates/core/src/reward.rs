//! Features of a game state and the linear reward over them.
//!
//! Every feature lies in `[0, 1]`. Reward is `w · φ(s)` with `‖w‖₁ ≤ 1`,
//! evaluated on the state an action arrives in.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::engine::GameState;
use crate::hashing::sha256_hex;
use crate::ids::PlotIx;
use crate::story::WorldSpec;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Feature {
    /// 1 when the plot point has been visited.
    PlotVisited(PlotIx),
    /// 1 when this ending has been reached.
    EndingReached(PlotIx),
    ObjectsSeen,
    TopicsKnown,
    LocationsAvailable,
    /// Inventory size over the number of obtainable objects.
    InventoryShare,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RewardError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("unknown feature {0:?}")]
    UnknownFeature(String),
    #[error("missing weight for feature {0:?}")]
    MissingFeature(String),
    #[error("weight for {0:?} is not finite")]
    NonFinite(String),
}

/// The fixed, ordered feature vector for one world.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMap {
    features: Vec<Feature>,
    names: Vec<String>,
    n_plots: usize,
    n_objects: usize,
    n_topics: usize,
    n_locations: usize,
    n_obtainable: usize,
    fingerprint: String,
}

impl FeatureMap {
    /// Plot-point indicators (document order), ending indicators, then the
    /// four exploration fractions.
    pub fn for_world(world: &WorldSpec) -> Self {
        let mut features = Vec::new();
        let mut names = Vec::new();
        for (i, p) in world.plot_points().iter().enumerate() {
            features.push(Feature::PlotVisited(PlotIx::from_usize(i)));
            names.push(format!("plot:{}", p.id));
        }
        for &e in world.endings() {
            features.push(Feature::EndingReached(e));
            names.push(format!("ending:{}", world.plot_point(e).id));
        }
        for (f, n) in [
            (Feature::ObjectsSeen, "objects_seen"),
            (Feature::TopicsKnown, "topics_known"),
            (Feature::LocationsAvailable, "locations_available"),
            (Feature::InventoryShare, "inventory_share"),
        ] {
            features.push(f);
            names.push(String::from(n));
        }
        let mut material = String::from(world.fingerprint());
        for n in &names {
            material.push('\n');
            material.push_str(n);
        }
        FeatureMap {
            features,
            names,
            n_plots: world.plot_points().len(),
            n_objects: world.objects().len(),
            n_topics: world.topics().len(),
            n_locations: world.locations().len(),
            n_obtainable: world.obtainable_objects().len(),
            fingerprint: sha256_hex(material.as_bytes()),
        }
    }

    /// Number of features `k`.
    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn features(&self) -> &[Feature] {
        &self.features
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Identifies the story and descriptor list, for weight-file checks.
    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    pub(crate) fn check_state(&self, state: &GameState) -> Result<(), RewardError> {
        let dims = [
            (self.n_plots, state.plots_visited.len()),
            (self.n_objects, state.objects.len()),
            (self.n_topics, state.topics.len()),
            (self.n_locations, state.locations_available.len()),
        ];
        for (expected, got) in dims {
            if expected != got {
                return Err(RewardError::DimensionMismatch { expected, got });
            }
        }
        Ok(())
    }

    /// `φ(s)`.
    pub fn phi(&self, state: &GameState) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        self.phi_into(state, &mut out);
        out
    }

    pub fn phi_into(&self, state: &GameState, out: &mut [f64]) {
        let frac = |num: usize, den: usize| {
            if den == 0 {
                0.0
            } else {
                (num as f64 / den as f64).min(1.0)
            }
        };
        for (slot, f) in out.iter_mut().zip(&self.features) {
            *slot = match *f {
                Feature::PlotVisited(p) | Feature::EndingReached(p) => {
                    if state.plot_visited(p) {
                        1.0
                    } else {
                        0.0
                    }
                }
                Feature::ObjectsSeen => frac(state.objects.iter().filter(|o| o.seen).count(), self.n_objects),
                Feature::TopicsKnown => frac(state.topics.iter().filter(|t| t.known).count(), self.n_topics),
                Feature::LocationsAvailable => frac(
                    state.locations_available.iter().filter(|l| **l).count(),
                    self.n_locations,
                ),
                Feature::InventoryShare => frac(state.inventory().count(), self.n_obtainable),
            };
        }
    }
}

/// Linear reward `R(s) = w · φ(s)`.
#[derive(Clone, Debug, PartialEq)]
pub struct RewardModel {
    weights: Vec<f64>,
    feature_map: FeatureMap,
}

impl RewardModel {
    pub fn new(feature_map: FeatureMap, weights: Vec<f64>) -> Result<Self, RewardError> {
        if weights.len() != feature_map.len() {
            return Err(RewardError::DimensionMismatch {
                expected: feature_map.len(),
                got: weights.len(),
            });
        }
        Ok(Self { weights, feature_map })
    }

    pub fn zero(feature_map: FeatureMap) -> Self {
        let weights = vec![0.0; feature_map.len()];
        Self { weights, feature_map }
    }

    /// Uniform weight on an ending's indicator and on every plot point it
    /// transitively depends on: a goal-directed reward for synthetic
    /// experts.
    pub fn route_to(world: &WorldSpec, feature_map: FeatureMap, ending: PlotIx) -> Self {
        let mut on_route = vec![false; world.plot_points().len()];
        let mut stack = vec![ending];
        while let Some(p) = stack.pop() {
            if !on_route[p.index()] {
                on_route[p.index()] = true;
                stack.extend(world.plot_point(p).prerequisites.iter().copied());
            }
        }
        let mut weights: Vec<f64> = feature_map
            .features()
            .iter()
            .map(|f| match *f {
                Feature::PlotVisited(p) if on_route[p.index()] => 1.0,
                Feature::EndingReached(e) if e == ending => 1.0,
                _ => 0.0,
            })
            .collect();
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        Self { weights, feature_map }
    }

    /// Expert reward built from a path that reaches an ending. The ending's
    /// plot and ending indicators share `ending_share` of the unit budget and
    /// every other ending indicator gets the negated weight. Plot points that
    /// hold after any first action split `-living_cost` between them, and the
    /// remaining plot points on the path share what is left.
    ///
    /// Returns `None` when the path does not replay to an ending.
    pub fn along_path(
        world: &WorldSpec,
        feature_map: FeatureMap,
        path: &[crate::engine::ActionInstance],
        ending_share: f64,
        living_cost: f64,
    ) -> Option<Self> {
        let replayed = crate::engine::replay(world, path).ok()?;
        let final_state = replayed.final_state();
        let ending = final_state.ending(world)?;
        let ambient = ambient_plot_points(world);
        let living_cost = if ambient.is_empty() { 0.0 } else { living_cost.clamp(0.0, 1.0) };
        let route: Vec<PlotIx> = final_state
            .visited_plot_points()
            .filter(|p| *p != ending && !ambient.contains(p))
            .collect();
        let ending_terms = 1.0 + world.endings().len() as f64;
        let free = 1.0 - living_cost;
        let end_each = if route.is_empty() {
            free / ending_terms
        } else {
            (ending_share.clamp(0.0, 1.0) / 2.0).min(free / ending_terms)
        };
        let route_each = if route.is_empty() {
            0.0
        } else {
            (free - ending_terms * end_each) / route.len() as f64
        };
        let cost_each = if ambient.is_empty() { 0.0 } else { living_cost / ambient.len() as f64 };
        let weights = feature_map
            .features()
            .iter()
            .map(|f| match *f {
                Feature::PlotVisited(p) if p == ending => end_each,
                Feature::EndingReached(e) if e == ending => end_each,
                Feature::EndingReached(_) => -end_each,
                Feature::PlotVisited(p) if ambient.contains(&p) => -cost_each,
                Feature::PlotVisited(p) if route.contains(&p) => route_each,
                _ => 0.0,
            })
            .collect();
        Some(Self { weights, feature_map })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn feature_map(&self) -> &FeatureMap {
        &self.feature_map
    }

    pub fn l1_norm(&self) -> f64 {
        self.weights.iter().map(|w| w.abs()).sum()
    }

    /// `w · φ(s)`.
    pub fn reward(&self, state: &GameState) -> Result<f64, RewardError> {
        self.feature_map.check_state(state)?;
        Ok(dot(&self.weights, &self.feature_map.phi(state)))
    }

    /// Weights keyed by descriptor name.
    pub fn named_weights(&self) -> BTreeMap<String, f64> {
        self.feature_map
            .names()
            .iter()
            .cloned()
            .zip(self.weights.iter().copied())
            .collect()
    }

    /// Inverse of [`named_weights`](Self::named_weights); every descriptor
    /// must be present exactly once.
    pub fn from_named(feature_map: FeatureMap, named: &BTreeMap<String, f64>) -> Result<Self, RewardError> {
        for name in named.keys() {
            if feature_map.index_of(name).is_none() {
                return Err(RewardError::UnknownFeature(name.clone()));
            }
        }
        let weights = feature_map
            .names()
            .iter()
            .map(|n| match named.get(n) {
                Some(w) if w.is_finite() => Ok(*w),
                Some(_) => Err(RewardError::NonFinite(n.clone())),
                None => Err(RewardError::MissingFeature(n.clone())),
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { weights, feature_map })
    }
}

/// Plot points visited after every applicable first action.
fn ambient_plot_points(world: &WorldSpec) -> Vec<PlotIx> {
    let start = crate::engine::initial_state(world);
    let mut common: Option<Vec<PlotIx>> = None;
    for a in crate::engine::applicable_actions(world, &start) {
        let Ok(outcome) = crate::engine::apply_action(world, &start, &a) else {
            continue;
        };
        let here: Vec<PlotIx> = outcome.next_state.visited_plot_points().collect();
        common = Some(match common {
            None => here,
            Some(prev) => prev.into_iter().filter(|p| here.contains(p)).collect(),
        });
    }
    common.unwrap_or_default()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Euclidean projection of `v` onto the L1 ball of the given radius.
///
/// Sort-based soft thresholding: find `θ` with `Σ max(|vᵢ| − θ, 0) = r`
/// and shrink every coordinate towards zero by `θ`.
pub fn project_l1(v: &[f64], radius: f64) -> Vec<f64> {
    assert!(radius > 0.0, "radius must be positive");
    let norm: f64 = v.iter().map(|x| x.abs()).sum();
    if norm <= radius {
        return v.to_vec();
    }
    let mut mags: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (i, m) in mags.iter().enumerate() {
        cumulative += m;
        let t = (cumulative - radius) / (i + 1) as f64;
        if *m > t {
            theta = t;
        } else {
            break;
        }
    }
    let mut out: Vec<f64> = v
        .iter()
        .map(|x| {
            let shrunk = (x.abs() - theta).max(0.0);
            if *x < 0.0 {
                -shrunk
            } else {
                shrunk
            }
        })
        .collect();
    // Rounding can leave the norm a hair above the radius.
    let l1: f64 = out.iter().map(|x| x.abs()).sum();
    if l1 > radius {
        let scale = radius / l1;
        out.iter_mut().for_each(|x| *x *= scale);
    }
    out
}
