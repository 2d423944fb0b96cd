//! Small worlds shared by unit tests.

use crate::story::{StoryDocument, WorldSpec};

pub(crate) const MINIMAL: &str = r#"{
  "schema_version": "1",
  "start_location": "room",
  "locations": [{"id": "room"}],
  "plot_points": [
    {"id": "done", "trigger": {"at": "room"}, "is_ending": true}
  ]
}"#;

/// Four locations in a line, the last behind a door; a locked chest with a
/// gem, a merchant, three topics and one ending.
pub(crate) const TOY: &str = r#"{
  "schema_version": "1",
  "start_location": "a",
  "locations": [
    {"id": "a", "text": "A bare yard.", "adjacent": ["b"]},
    {"id": "b", "text": "A stall.", "adjacent": ["a", "c"]},
    {"id": "c", "text": "A passage.", "adjacent": ["b", "d"], "doors": {"d": "door"}},
    {"id": "d", "text": "A vault.", "adjacent": ["c"], "doors": {"c": "door"}}
  ],
  "objects": [
    {"id": "key", "location": "a", "can_take": true},
    {"id": "chest", "location": "b", "can_open": true, "locked": true, "key": "key"},
    {"id": "gem", "container": "chest", "can_take": true},
    {"id": "door", "location": "c", "can_open": true},
    {"id": "lamp", "held_by": "merchant", "on_use": [{"learn_topic": "secret"}]},
    {"id": "coin", "location": "c", "can_take": true}
  ],
  "characters": [
    {"id": "merchant", "location": "b",
     "topics_responded": [{"topic": "rumor", "reply": "They say the vault is empty."}],
     "sells": ["lamp"],
     "wants": [{"object": "coin", "effects": [{"learn_topic": "gossip"}]}]}
  ],
  "topics": [
    {"id": "rumor", "known": true},
    {"id": "secret"},
    {"id": "gossip", "requires_topics": ["rumor"], "requires_plot_points": ["opened_chest"]}
  ],
  "plot_points": [
    {"id": "opened_chest", "trigger": {"last_action": {"kind": "open", "target": "chest"}}},
    {"id": "found_gem", "trigger": {"has": "gem"}, "prerequisites": ["opened_chest"]},
    {"id": "end", "trigger": {"all": [{"at": "d"}, {"has": "gem"}]},
     "prerequisites": ["found_gem"], "is_ending": true}
  ]
}"#;

/// A three-state corridor: start -> mid -> goal, goal is the ending.
pub(crate) const CHAIN: &str = r#"{
  "schema_version": "1",
  "start_location": "s0",
  "locations": [
    {"id": "s0", "adjacent": ["s1"]},
    {"id": "s1", "adjacent": ["s0", "s2"]},
    {"id": "s2", "adjacent": ["s1"]}
  ],
  "plot_points": [
    {"id": "mid", "trigger": {"at": "s1"}},
    {"id": "goal", "trigger": {"at": "s2"}, "is_ending": true}
  ]
}"#;

pub(crate) fn parse(src: &str) -> StoryDocument {
    serde_json::from_str(src).expect("fixture parses")
}

pub(crate) fn minimal_document() -> StoryDocument {
    parse(MINIMAL)
}

pub(crate) fn toy_document() -> StoryDocument {
    parse(TOY)
}

pub(crate) fn world(src: &str) -> WorldSpec {
    WorldSpec::from_document(parse(src)).expect("fixture validates")
}

pub(crate) fn toy() -> WorldSpec {
    world(TOY)
}

pub(crate) fn chain() -> WorldSpec {
    world(CHAIN)
}
