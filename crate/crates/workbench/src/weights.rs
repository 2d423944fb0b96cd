//! Learned reward weights on disk, keyed by feature descriptor.

use std::collections::BTreeMap;

use rhirl_core::{FeatureMap, RewardModel, WorldSpec};
use serde::{Deserialize, Serialize};

use crate::error::{Result, WorkbenchError};

pub const WEIGHTS_SCHEMA_VERSION: &str = "1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsDocument {
    pub schema_version: String,
    pub story_fingerprint: String,
    pub feature_fingerprint: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    pub weights: BTreeMap<String, f64>,
}

impl WeightsDocument {
    pub fn from_model(world: &WorldSpec, rm: &RewardModel, horizon: Option<usize>, beta: Option<f64>) -> Self {
        Self {
            schema_version: WEIGHTS_SCHEMA_VERSION.to_string(),
            story_fingerprint: world.fingerprint().to_string(),
            feature_fingerprint: rm.feature_map().fingerprint().to_string(),
            horizon,
            beta,
            weights: rm.named_weights().into_iter().collect(),
        }
    }

    /// Rebuilds the reward model, refusing documents made for another story
    /// or feature layout.
    pub fn to_model(&self, world: &WorldSpec) -> Result<RewardModel> {
        if self.schema_version != WEIGHTS_SCHEMA_VERSION {
            return Err(WorkbenchError::Invalid(format!(
                "unsupported weights schema version {:?}",
                self.schema_version
            )));
        }
        let fm = FeatureMap::for_world(world);
        if self.story_fingerprint != world.fingerprint() || self.feature_fingerprint != fm.fingerprint() {
            return Err(WorkbenchError::Invalid(
                "weights were learned for a different story".to_string(),
            ));
        }
        let rm = RewardModel::from_named(fm, &self.weights)?;
        if rm.l1_norm() > 1.0 + 1e-9 {
            return Err(WorkbenchError::Invalid(format!(
                "weights have L1 norm {} > 1",
                rm.l1_norm()
            )));
        }
        Ok(rm)
    }
}
