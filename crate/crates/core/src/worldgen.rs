//! Seeded random story worlds, for property tests and benchmarks.
//!
//! Generated worlds always validate. Their endings are not guaranteed to
//! be reachable.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::engine::{applicable_actions, apply_action, initial_state, ActionInstance, ActionKind};
use crate::story::{
    CharacterDef, Condition, Effect, LocationDef, ObjectDef, PlotPointDef, ResponseDef, StoryDocument, TopicDef,
    WantDef, WorldSpec, SCHEMA_VERSION,
};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WorldGenConfig {
    /// At least 1.
    pub max_locations: usize,
    pub max_objects: usize,
    pub max_characters: usize,
    pub max_topics: usize,
    /// Non-ending plot points.
    pub max_plot_points: usize,
    /// At least 1.
    pub max_endings: usize,
}

impl Default for WorldGenConfig {
    fn default() -> Self {
        Self {
            max_locations: 6,
            max_objects: 5,
            max_characters: 2,
            max_topics: 3,
            max_plot_points: 3,
            max_endings: 2,
        }
    }
}

impl WorldGenConfig {
    /// Upper bound on the feature count of generated worlds.
    pub fn max_features(&self) -> usize {
        self.max_plot_points + 2 * self.max_endings.max(1) + 4
    }
}

fn pick<'a, R: Rng>(rng: &mut R, items: &'a [String]) -> Option<&'a String> {
    items.choose(rng)
}

fn random_trigger<R: Rng>(
    rng: &mut R,
    locations: &[String],
    objects: &[String],
    topics: &[String],
) -> Condition {
    let at = |rng: &mut R| Condition::At(pick(rng, locations).expect("at least one location").clone());
    match rng.gen_range(0..8) {
        0 | 1 | 2 => at(rng),
        3 => pick(rng, objects).map_or_else(|| at(rng), |o| Condition::Has(o.clone())),
        4 => pick(rng, objects).map_or_else(|| at(rng), |o| Condition::Seen(o.clone())),
        5 => pick(rng, topics).map_or_else(|| at(rng), |t| Condition::Mentioned(t.clone())),
        6 => match pick(rng, objects) {
            Some(o) => Condition::LastAction {
                kind: *[ActionKind::Examine, ActionKind::Open, ActionKind::Take, ActionKind::Use]
                    .choose(rng)
                    .expect("non-empty"),
                target: o.clone(),
            },
            None => Condition::LastAction {
                kind: ActionKind::Goto,
                target: pick(rng, locations).expect("at least one location").clone(),
            },
        },
        _ => Condition::All(vec![at(rng), Condition::Not(alloc::boxed::Box::new(at(rng)))]),
    }
}

/// A random valid story document.
pub fn random_document(seed: u64, cfg: &WorldGenConfig) -> StoryDocument {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rng = &mut rng;

    let n = rng.gen_range(1..=cfg.max_locations.max(1));
    let location_ids: Vec<String> = (0..n).map(|i| format!("l{i}")).collect();
    let mut edges: Vec<(usize, usize)> = (1..n).map(|i| (rng.gen_range(0..i), i)).collect();
    for _ in 0..n / 2 {
        let (a, b) = (rng.gen_range(0..n), rng.gen_range(0..n));
        if a != b && !edges.contains(&(a.min(b), a.max(b))) {
            edges.push((a.min(b), a.max(b)));
        }
    }

    let n_chars = rng.gen_range(0..=cfg.max_characters);
    let character_ids: Vec<String> = (0..n_chars).map(|i| format!("c{i}")).collect();
    let n_topics = rng.gen_range(0..=cfg.max_topics);
    let topic_ids: Vec<String> = (0..n_topics).map(|i| format!("t{i}")).collect();

    let m = rng.gen_range(0..=cfg.max_objects);
    let object_ids: Vec<String> = (0..m).map(|i| format!("o{i}")).collect();
    let mut objects: Vec<ObjectDef> = Vec::with_capacity(m);
    for (i, id) in object_ids.iter().enumerate() {
        let mut def = ObjectDef {
            id: id.clone(),
            text: format!("Object {i}."),
            can_take: rng.gen_bool(0.5),
            can_open: rng.gen_bool(0.4),
            ..ObjectDef::default()
        };
        let containers: Vec<String> = objects.iter().filter(|o| o.can_open).map(|o| o.id.clone()).collect();
        match rng.gen_range(0..6) {
            0 if !containers.is_empty() => def.container = pick(rng, &containers).cloned(),
            1 if !character_ids.is_empty() => def.held_by = pick(rng, &character_ids).cloned(),
            _ => def.location = pick(rng, &location_ids).cloned(),
        }
        if def.can_open && m > 1 && rng.gen_bool(0.5) {
            let k = loop {
                let k = rng.gen_range(0..m);
                if k != i {
                    break k;
                }
            };
            def.locked = true;
            def.key = Some(object_ids[k].clone());
        }
        if !topic_ids.is_empty() && rng.gen_bool(0.2) {
            def.on_use = vec![Effect::LearnTopic(pick(rng, &topic_ids).expect("non-empty").clone())];
        }
        objects.push(def);
    }

    let mut doors: BTreeMap<(usize, usize), String> = BTreeMap::new();
    if let Some(&(a, b)) = edges.choose(rng) {
        let candidates: Vec<usize> = objects
            .iter()
            .enumerate()
            .filter(|(_, o)| o.can_open && o.location.is_some())
            .map(|(i, _)| i)
            .collect();
        if let Some(&d) = candidates.choose(rng) {
            if rng.gen_bool(0.5) {
                objects[d].location = Some(location_ids[if rng.gen_bool(0.5) { a } else { b }].clone());
                doors.insert((a, b), objects[d].id.clone());
            }
        }
    }

    let locations = location_ids
        .iter()
        .enumerate()
        .map(|(i, id)| {
            let mut adjacent = Vec::new();
            let mut door_map = BTreeMap::new();
            for &(a, b) in &edges {
                let other = if a == i {
                    b
                } else if b == i {
                    a
                } else {
                    continue;
                };
                adjacent.push(location_ids[other].clone());
                if let Some(d) = doors.get(&(a, b)) {
                    door_map.insert(location_ids[other].clone(), d.clone());
                }
            }
            LocationDef {
                id: id.clone(),
                text: format!("Room {i}."),
                adjacent,
                doors: door_map,
            }
        })
        .collect();

    let characters = character_ids
        .iter()
        .map(|id| {
            let held: Vec<String> = objects
                .iter()
                .filter(|o| o.held_by.as_ref() == Some(id))
                .map(|o| o.id.clone())
                .collect();
            let sells = held.iter().filter(|_| rng.gen_bool(0.5)).cloned().collect();
            let topics_responded = topic_ids
                .iter()
                .filter(|_| rng.gen_bool(0.5))
                .map(|t| ResponseDef {
                    topic: t.clone(),
                    reply: format!("About {t}."),
                })
                .collect();
            let wants = match (pick(rng, &object_ids), rng.gen_bool(0.5)) {
                (Some(o), true) => {
                    let effects = match pick(rng, &held) {
                        Some(h) => vec![Effect::GiveToPlayer(h.clone())],
                        None => pick(rng, &topic_ids).map(|t| Effect::LearnTopic(t.clone())).into_iter().collect(),
                    };
                    vec![WantDef {
                        object: o.clone(),
                        effects,
                    }]
                }
                _ => Vec::new(),
            };
            CharacterDef {
                id: id.clone(),
                text: String::new(),
                location: pick(rng, &location_ids).expect("non-empty").clone(),
                topics_responded,
                sells,
                wants,
            }
        })
        .collect();

    let n_plots = rng.gen_range(0..=cfg.max_plot_points);
    let n_endings = rng.gen_range(1..=cfg.max_endings.max(1));
    let mut plot_points: Vec<PlotPointDef> = Vec::with_capacity(n_plots + n_endings);
    for i in 0..n_plots + n_endings {
        let is_ending = i >= n_plots;
        let earlier: Vec<String> = plot_points.iter().filter(|p| !p.is_ending).map(|p| p.id.clone()).collect();
        let prerequisites = earlier.iter().filter(|_| rng.gen_bool(0.3)).cloned().collect();
        plot_points.push(PlotPointDef {
            id: if is_ending { format!("e{}", i - n_plots) } else { format!("p{i}") },
            text: String::new(),
            trigger: random_trigger(rng, &location_ids, &object_ids, &topic_ids),
            prerequisites,
            is_ending,
        });
    }
    let plot_ids: Vec<String> = plot_points.iter().filter(|p| !p.is_ending).map(|p| p.id.clone()).collect();

    let topics = topic_ids
        .iter()
        .enumerate()
        .map(|(i, id)| {
            let (requires_plot_points, requires_topics) = if i == 0 || rng.gen_bool(0.3) {
                (Vec::new(), Vec::new())
            } else {
                (
                    pick(rng, &plot_ids).cloned().into_iter().collect(),
                    if rng.gen_bool(0.3) { vec![topic_ids[0].clone()] } else { Vec::new() },
                )
            };
            TopicDef {
                id: id.clone(),
                text: String::new(),
                known: i == 0,
                requires_plot_points,
                requires_topics,
            }
        })
        .collect();

    StoryDocument {
        schema_version: String::from(SCHEMA_VERSION),
        title: Some(format!("generated {seed}")),
        start_location: location_ids[0].clone(),
        locations,
        objects,
        characters,
        topics,
        plot_points,
    }
}

/// [`random_document`], validated.
pub fn random_world(seed: u64, cfg: &WorldGenConfig) -> WorldSpec {
    WorldSpec::from_document(random_document(seed, cfg)).expect("generated worlds validate")
}

/// Up to `max_len` uniformly random applicable actions from the initial
/// state, stopping early at a terminal or dead-end state.
pub fn random_walk(world: &WorldSpec, max_len: usize, seed: u64) -> Vec<ActionInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = initial_state(world);
    let mut out = Vec::new();
    while out.len() < max_len {
        let actions = applicable_actions(world, &state);
        let Some(a) = actions.choose(&mut rng).copied() else {
            break;
        };
        state = apply_action(world, &state, &a).expect("applicable").next_state;
        out.push(a);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reward::FeatureMap;

    #[test]
    fn generated_worlds_validate_and_respect_bounds() {
        let cfg = WorldGenConfig::default();
        for seed in 0..500 {
            let doc = random_document(seed, &cfg);
            let w = WorldSpec::from_document(doc.clone()).unwrap_or_else(|e| panic!("seed {seed}: {e}"));
            assert!(w.locations().len() <= cfg.max_locations);
            assert!(FeatureMap::for_world(&w).len() <= cfg.max_features());
            assert_eq!(random_document(seed, &cfg), doc);
        }
    }

    #[test]
    fn walks_replay() {
        let cfg = WorldGenConfig::default();
        for seed in 0..50 {
            let w = random_world(seed, &cfg);
            let walk = random_walk(&w, 12, seed);
            assert!(walk.len() <= 12);
            crate::engine::replay(&w, &walk).unwrap();
        }
    }
}
