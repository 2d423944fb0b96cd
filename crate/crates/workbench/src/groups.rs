//! Command-line group selectors: `end:<ending id>` or `<factor>=<0|1>`.

use std::fmt;
use std::str::FromStr;

use rhirl_core::trace::{group_by_end, group_by_profile, GroupCriterion, ProfileFactor, Trace, TraceGroup};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GroupSpec {
    End(String),
    Profile { factor: ProfileFactor, level: u8 },
}

impl FromStr for GroupSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Some(ending) = s.strip_prefix("end:") {
            if ending.is_empty() {
                return Err("empty ending id in group spec".to_string());
            }
            return Ok(GroupSpec::End(ending.to_string()));
        }
        if let Some((factor, level)) = s.split_once('=') {
            let factor = ProfileFactor::parse(factor).ok_or_else(|| format!("unknown profile factor {factor:?}"))?;
            let level = match level {
                "0" => 0,
                "1" => 1,
                other => return Err(format!("profile level must be 0 or 1, got {other:?}")),
            };
            return Ok(GroupSpec::Profile { factor, level });
        }
        Err(format!("group spec {s:?} is neither end:<ending> nor <factor>=<0|1>"))
    }
}

impl fmt::Display for GroupSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroupSpec::End(e) => write!(f, "end:{e}"),
            GroupSpec::Profile { factor, level } => write!(f, "{}={level}", factor.as_str()),
        }
    }
}

impl GroupSpec {
    /// The selected group; empty when no trace qualifies.
    pub fn select(&self, traces: &[Trace]) -> TraceGroup {
        match self {
            GroupSpec::End(ending) => group_by_end(traces)
                .into_iter()
                .find(|g| &g.group_id == ending)
                .unwrap_or_else(|| TraceGroup {
                    group_id: ending.clone(),
                    criterion: GroupCriterion::ByEnd { ending: ending.clone() },
                    members: Vec::new(),
                }),
            GroupSpec::Profile { factor, level } => {
                let (low, high) = group_by_profile(traces, *factor);
                if *level == 0 {
                    low
                } else {
                    high
                }
            }
        }
    }
}

/// Every non-empty by-end group, then every non-empty by-profile group.
pub fn default_groups(traces: &[Trace]) -> Vec<TraceGroup> {
    let mut groups = group_by_end(traces);
    if traces.iter().any(|t| t.profile.is_some()) {
        for factor in ProfileFactor::ALL {
            let (low, high) = group_by_profile(traces, factor);
            groups.extend([low, high].into_iter().filter(|g| !g.is_empty()));
        }
    }
    groups
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_display() {
        for s in ["end:End1_FindEvilGod", "persistence=1", "familiarity=0"] {
            assert_eq!(s.parse::<GroupSpec>().unwrap().to_string(), s);
        }
        for s in ["end:", "persistence=2", "mood=1", "End1"] {
            assert!(s.parse::<GroupSpec>().is_err(), "{s}");
        }
    }
}
