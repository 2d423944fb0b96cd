//! Declarative story worlds.
//!
//! A [`StoryDocument`] is the serde image of a story file. Validating it
//! produces a [`WorldSpec`]: the same content with every reference resolved
//! to a dense index, plus the lookup tables the engine needs. A `WorldSpec`
//! is immutable and can be shared freely between sessions and learners.

use alloc::borrow::ToOwned;
use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::ActionKind;
use crate::hashing::sha256_hex;
use crate::ids::{CharacterIx, LocationIx, ObjectIx, PlotIx, TopicIx, MAX_ENTITIES};

/// Value of `schema_version` this crate reads and writes.
pub const SCHEMA_VERSION: &str = "1";

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StoryDocument {
    pub schema_version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
    pub start_location: String,
    pub locations: Vec<LocationDef>,
    #[serde(default)]
    pub objects: Vec<ObjectDef>,
    #[serde(default)]
    pub characters: Vec<CharacterDef>,
    #[serde(default)]
    pub topics: Vec<TopicDef>,
    pub plot_points: Vec<PlotPointDef>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocationDef {
    pub id: String,
    #[serde(default)]
    pub text: String,
    #[serde(default)]
    pub adjacent: Vec<String>,
    /// Neighbour id -> door object. The passage is usable only while the
    /// door is open. Both sides must name the same door.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub doors: BTreeMap<String, String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectDef {
    pub id: String,
    #[serde(default)]
    pub text: String,
    /// Exactly one of `location`, `container` and `held_by` is set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub location: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub container: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub held_by: Option<String>,
    #[serde(default, skip_serializing_if = "is_false")]
    pub can_open: bool,
    #[serde(default, skip_serializing_if = "is_false")]
    pub can_take: bool,
    #[serde(default, skip_serializing_if = "is_false")]
    pub locked: bool,
    #[serde(default, skip_serializing_if = "is_false")]
    pub open: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub key: Option<String>,
    /// Informational only; buying does not consume currency.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub price: Option<u32>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub on_use: Vec<Effect>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CharacterDef {
    pub id: String,
    #[serde(default)]
    pub text: String,
    pub location: String,
    #[serde(default)]
    pub topics_responded: Vec<ResponseDef>,
    #[serde(default)]
    pub sells: Vec<String>,
    #[serde(default)]
    pub wants: Vec<WantDef>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResponseDef {
    pub topic: String,
    #[serde(default)]
    pub reply: String,
}

/// An object a character wants, and what happens when it is handed over.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WantDef {
    pub object: String,
    #[serde(default)]
    pub effects: Vec<Effect>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopicDef {
    pub id: String,
    #[serde(default)]
    pub text: String,
    /// Known from the start.
    #[serde(default, skip_serializing_if = "is_false")]
    pub known: bool,
    /// The topic becomes known once all of these plot points are visited
    /// and all of `requires_topics` have been mentioned.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub requires_plot_points: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub requires_topics: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlotPointDef {
    pub id: String,
    #[serde(default)]
    pub text: String,
    pub trigger: Condition,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub prerequisites: Vec<String>,
    #[serde(default, skip_serializing_if = "is_false")]
    pub is_ending: bool,
}

/// State change attached to `use` or to handing a character something it wants.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Effect {
    /// Move an object into the player's inventory.
    GiveToPlayer(String),
    /// Move an object to a location.
    PlaceAt { object: String, location: String },
    Open(String),
    Unlock(String),
    LearnTopic(String),
}

/// Trigger expression over the state and the action that produced it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Condition {
    Always,
    All(Vec<Condition>),
    Any(Vec<Condition>),
    Not(Box<Condition>),
    Visited(String),
    Seen(String),
    Has(String),
    Mentioned(String),
    At(String),
    LastAction { kind: ActionKind, target: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ValidationError {
    #[error("unsupported schema_version {0:?} (expected \"1\")")]
    UnsupportedSchema(String),
    #[error("empty {0} id")]
    EmptyId(&'static str),
    #[error("duplicate {category} id {id:?}")]
    DuplicateId { category: &'static str, id: String },
    #[error("{owner:?} references unknown {category} {id:?}")]
    UnknownId {
        category: &'static str,
        id: String,
        owner: String,
    },
    #[error("adjacency is not symmetric: {from:?} lists {to:?} but not the reverse")]
    AsymmetricAdjacency { from: String, to: String },
    #[error("door between {from:?} and {to:?} is not declared identically on both sides")]
    DoorMismatch { from: String, to: String },
    #[error("door on {from:?} names {to:?}, which is not adjacent")]
    DoorWithoutPassage { from: String, to: String },
    #[error("plot point prerequisites form a cycle through {0:?}")]
    CyclicPrerequisites(String),
    #[error("object containment forms a cycle through {0:?}")]
    CyclicContainment(String),
    #[error("object {0:?} is locked but has no key")]
    LockedWithoutKey(String),
    #[error("object {0:?} must have exactly one of location, container, held_by")]
    AmbiguousPlacement(String),
    #[error("character {character:?} sells {object:?} but does not hold it")]
    SoldItemNotHeld { character: String, object: String },
    #[error("story has no ending plot point")]
    NoEnding,
    #[error("too many {0} (limit {MAX_ENTITIES})")]
    TooMany(&'static str),
}

/// Where an object is.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Place {
    Location(LocationIx),
    Container(ObjectIx),
    Inventory,
    Character(CharacterIx),
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) enum CompiledEffect {
    GiveToPlayer(ObjectIx),
    PlaceAt(ObjectIx, LocationIx),
    Open(ObjectIx),
    Unlock(ObjectIx),
    LearnTopic(TopicIx),
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) enum Cond {
    Always,
    All(Vec<Cond>),
    Any(Vec<Cond>),
    Not(Box<Cond>),
    Visited(PlotIx),
    Seen(ObjectIx),
    Has(ObjectIx),
    Mentioned(TopicIx),
    At(LocationIx),
    LastAction(ActionKind, u16),
}

#[derive(Clone, Debug)]
pub struct Location {
    pub id: String,
    pub text: String,
    /// Neighbours with the door (if any) gating the passage, in document order.
    pub exits: Vec<(LocationIx, Option<ObjectIx>)>,
}

#[derive(Clone, Debug)]
pub struct Object {
    pub id: String,
    pub text: String,
    pub initial_place: Place,
    pub can_open: bool,
    pub can_take: bool,
    pub locked: bool,
    pub open: bool,
    pub key: Option<ObjectIx>,
    pub(crate) on_use: Vec<CompiledEffect>,
}

#[derive(Clone, Debug)]
pub struct Character {
    pub id: String,
    pub text: String,
    pub location: LocationIx,
    pub responses: Vec<(TopicIx, String)>,
    pub sells: Vec<ObjectIx>,
    pub(crate) wants: Vec<(ObjectIx, Vec<CompiledEffect>)>,
}

#[derive(Clone, Debug)]
pub struct Topic {
    pub id: String,
    pub text: String,
    pub known: bool,
    pub requires_plot_points: Vec<PlotIx>,
    pub requires_topics: Vec<TopicIx>,
}

#[derive(Clone, Debug)]
pub struct PlotPoint {
    pub id: String,
    pub text: String,
    pub(crate) trigger: Cond,
    pub prerequisites: Vec<PlotIx>,
    pub is_ending: bool,
}

/// A validated, immutable story world.
#[derive(Clone, Debug)]
pub struct WorldSpec {
    document: StoryDocument,
    fingerprint: String,
    start: LocationIx,
    locations: Vec<Location>,
    objects: Vec<Object>,
    characters: Vec<Character>,
    topics: Vec<Topic>,
    plot_points: Vec<PlotPoint>,
    endings: Vec<PlotIx>,
    location_ids: BTreeMap<String, LocationIx>,
    object_ids: BTreeMap<String, ObjectIx>,
    character_ids: BTreeMap<String, CharacterIx>,
    topic_ids: BTreeMap<String, TopicIx>,
    plot_ids: BTreeMap<String, PlotIx>,
    // Enumeration orders (lexicographic by id).
    pub(crate) locations_by_id: Vec<LocationIx>,
    pub(crate) objects_by_id: Vec<ObjectIx>,
    pub(crate) topics_by_id: Vec<TopicIx>,
}

impl PartialEq for WorldSpec {
    fn eq(&self, other: &Self) -> bool {
        self.document == other.document
    }
}

fn index_ids<I: Copy>(
    category: &'static str,
    ids: impl Iterator<Item = String>,
    make: impl Fn(usize) -> I,
) -> Result<BTreeMap<String, I>, ValidationError> {
    let mut map = BTreeMap::new();
    for (i, id) in ids.enumerate() {
        if i >= MAX_ENTITIES {
            return Err(ValidationError::TooMany(category));
        }
        if id.is_empty() {
            return Err(ValidationError::EmptyId(category));
        }
        if map.insert(id.clone(), make(i)).is_some() {
            return Err(ValidationError::DuplicateId { category, id });
        }
    }
    Ok(map)
}

struct Resolver<'a> {
    locations: &'a BTreeMap<String, LocationIx>,
    objects: &'a BTreeMap<String, ObjectIx>,
    characters: &'a BTreeMap<String, CharacterIx>,
    topics: &'a BTreeMap<String, TopicIx>,
    plots: &'a BTreeMap<String, PlotIx>,
}

fn lookup<I: Copy>(
    map: &BTreeMap<String, I>,
    category: &'static str,
    id: &str,
    owner: &str,
) -> Result<I, ValidationError> {
    map.get(id).copied().ok_or_else(|| ValidationError::UnknownId {
        category,
        id: id.to_owned(),
        owner: owner.to_owned(),
    })
}

impl Resolver<'_> {
    fn location(&self, id: &str, owner: &str) -> Result<LocationIx, ValidationError> {
        lookup(self.locations, "location", id, owner)
    }
    fn object(&self, id: &str, owner: &str) -> Result<ObjectIx, ValidationError> {
        lookup(self.objects, "object", id, owner)
    }
    fn character(&self, id: &str, owner: &str) -> Result<CharacterIx, ValidationError> {
        lookup(self.characters, "character", id, owner)
    }
    fn topic(&self, id: &str, owner: &str) -> Result<TopicIx, ValidationError> {
        lookup(self.topics, "topic", id, owner)
    }
    fn plot(&self, id: &str, owner: &str) -> Result<PlotIx, ValidationError> {
        lookup(self.plots, "plot point", id, owner)
    }

    fn effect(&self, e: &Effect, owner: &str) -> Result<CompiledEffect, ValidationError> {
        Ok(match e {
            Effect::GiveToPlayer(o) => CompiledEffect::GiveToPlayer(self.object(o, owner)?),
            Effect::PlaceAt { object, location } => {
                CompiledEffect::PlaceAt(self.object(object, owner)?, self.location(location, owner)?)
            }
            Effect::Open(o) => CompiledEffect::Open(self.object(o, owner)?),
            Effect::Unlock(o) => CompiledEffect::Unlock(self.object(o, owner)?),
            Effect::LearnTopic(t) => CompiledEffect::LearnTopic(self.topic(t, owner)?),
        })
    }

    fn condition(&self, c: &Condition, owner: &str) -> Result<Cond, ValidationError> {
        Ok(match c {
            Condition::Always => Cond::Always,
            Condition::All(cs) => Cond::All(
                cs.iter()
                    .map(|c| self.condition(c, owner))
                    .collect::<Result<_, _>>()?,
            ),
            Condition::Any(cs) => Cond::Any(
                cs.iter()
                    .map(|c| self.condition(c, owner))
                    .collect::<Result<_, _>>()?,
            ),
            Condition::Not(c) => Cond::Not(Box::new(self.condition(c, owner)?)),
            Condition::Visited(p) => Cond::Visited(self.plot(p, owner)?),
            Condition::Seen(o) => Cond::Seen(self.object(o, owner)?),
            Condition::Has(o) => Cond::Has(self.object(o, owner)?),
            Condition::Mentioned(t) => Cond::Mentioned(self.topic(t, owner)?),
            Condition::At(l) => Cond::At(self.location(l, owner)?),
            Condition::LastAction { kind, target } => {
                let ix = match kind {
                    ActionKind::Goto => self.location(target, owner)?.0,
                    ActionKind::Say => self.topic(target, owner)?.0,
                    _ => self.object(target, owner)?.0,
                };
                Cond::LastAction(*kind, ix)
            }
        })
    }
}

/// Depth-first cycle search over `edges`; returns a node on a cycle.
fn find_cycle(n: usize, edges: impl Fn(usize) -> Vec<usize>) -> Option<usize> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        New,
        Active,
        Done,
    }
    let mut mark = vec![Mark::New; n];
    for root in 0..n {
        if mark[root] != Mark::New {
            continue;
        }
        let mut stack: Vec<(usize, Vec<usize>, usize)> = vec![(root, edges(root), 0)];
        mark[root] = Mark::Active;
        while let Some((node, succ, pos)) = stack.last_mut() {
            if *pos < succ.len() {
                let next = succ[*pos];
                *pos += 1;
                match mark[next] {
                    Mark::Active => return Some(next),
                    Mark::New => {
                        mark[next] = Mark::Active;
                        let e = edges(next);
                        stack.push((next, e, 0));
                    }
                    Mark::Done => {}
                }
            } else {
                mark[*node] = Mark::Done;
                stack.pop();
            }
        }
    }
    None
}

fn sorted_order<I: Copy>(map: &BTreeMap<String, I>) -> Vec<I> {
    // BTreeMap iterates in lexicographic key order.
    map.values().copied().collect()
}

impl WorldSpec {
    /// Validates `document` and resolves every reference.
    pub fn from_document(document: StoryDocument) -> Result<Self, ValidationError> {
        use ValidationError as E;

        if document.schema_version != SCHEMA_VERSION {
            return Err(E::UnsupportedSchema(document.schema_version.clone()));
        }

        let location_ids = index_ids(
            "location",
            document.locations.iter().map(|l| l.id.clone()),
            LocationIx::from_usize,
        )?;
        let object_ids = index_ids(
            "object",
            document.objects.iter().map(|o| o.id.clone()),
            ObjectIx::from_usize,
        )?;
        let character_ids = index_ids(
            "character",
            document.characters.iter().map(|c| c.id.clone()),
            CharacterIx::from_usize,
        )?;
        let topic_ids = index_ids(
            "topic",
            document.topics.iter().map(|t| t.id.clone()),
            TopicIx::from_usize,
        )?;
        let plot_ids = index_ids(
            "plot point",
            document.plot_points.iter().map(|p| p.id.clone()),
            PlotIx::from_usize,
        )?;
        let r = Resolver {
            locations: &location_ids,
            objects: &object_ids,
            characters: &character_ids,
            topics: &topic_ids,
            plots: &plot_ids,
        };

        let start = r.location(&document.start_location, "start_location")?;

        // Locations, adjacency symmetry and doors.
        let mut locations = Vec::with_capacity(document.locations.len());
        for def in &document.locations {
            let mut exits = Vec::with_capacity(def.adjacent.len());
            for to in &def.adjacent {
                let to_ix = r.location(to, &def.id)?;
                let back = &document.locations[to_ix.index()];
                if !back.adjacent.iter().any(|x| x == &def.id) {
                    return Err(E::AsymmetricAdjacency {
                        from: def.id.clone(),
                        to: to.clone(),
                    });
                }
                if def.doors.get(to) != back.doors.get(&def.id) {
                    return Err(E::DoorMismatch {
                        from: def.id.clone(),
                        to: to.clone(),
                    });
                }
                let door = match def.doors.get(to) {
                    Some(d) => Some(r.object(d, &def.id)?),
                    None => None,
                };
                exits.push((to_ix, door));
            }
            for to in def.doors.keys() {
                if !def.adjacent.contains(to) {
                    return Err(E::DoorWithoutPassage {
                        from: def.id.clone(),
                        to: to.clone(),
                    });
                }
            }
            locations.push(Location {
                id: def.id.clone(),
                text: def.text.clone(),
                exits,
            });
        }

        // Objects.
        let mut objects = Vec::with_capacity(document.objects.len());
        for def in &document.objects {
            let place = match (&def.location, &def.container, &def.held_by) {
                (Some(l), None, None) => Place::Location(r.location(l, &def.id)?),
                (None, Some(c), None) => Place::Container(r.object(c, &def.id)?),
                (None, None, Some(h)) => Place::Character(r.character(h, &def.id)?),
                _ => return Err(E::AmbiguousPlacement(def.id.clone())),
            };
            let key = match &def.key {
                Some(k) => Some(r.object(k, &def.id)?),
                None => None,
            };
            if def.locked && key.is_none() {
                return Err(E::LockedWithoutKey(def.id.clone()));
            }
            let on_use = def
                .on_use
                .iter()
                .map(|e| r.effect(e, &def.id))
                .collect::<Result<_, _>>()?;
            objects.push(Object {
                id: def.id.clone(),
                text: def.text.clone(),
                initial_place: place,
                can_open: def.can_open,
                can_take: def.can_take,
                locked: def.locked,
                open: def.open,
                key,
                on_use,
            });
        }
        if let Some(o) = find_cycle(objects.len(), |i| match objects[i].initial_place {
            Place::Container(c) => vec![c.index()],
            _ => Vec::new(),
        }) {
            return Err(E::CyclicContainment(objects[o].id.clone()));
        }

        // Characters.
        let mut characters = Vec::with_capacity(document.characters.len());
        for (ci, def) in document.characters.iter().enumerate() {
            let location = r.location(&def.location, &def.id)?;
            let responses = def
                .topics_responded
                .iter()
                .map(|resp| Ok((r.topic(&resp.topic, &def.id)?, resp.reply.clone())))
                .collect::<Result<Vec<_>, ValidationError>>()?;
            let mut sells = Vec::with_capacity(def.sells.len());
            for s in &def.sells {
                let o = r.object(s, &def.id)?;
                if objects[o.index()].initial_place != Place::Character(CharacterIx::from_usize(ci)) {
                    return Err(E::SoldItemNotHeld {
                        character: def.id.clone(),
                        object: s.clone(),
                    });
                }
                sells.push(o);
            }
            let wants = def
                .wants
                .iter()
                .map(|w| {
                    Ok((
                        r.object(&w.object, &def.id)?,
                        w.effects
                            .iter()
                            .map(|e| r.effect(e, &def.id))
                            .collect::<Result<Vec<_>, _>>()?,
                    ))
                })
                .collect::<Result<Vec<_>, ValidationError>>()?;
            characters.push(Character {
                id: def.id.clone(),
                text: def.text.clone(),
                location,
                responses,
                sells,
                wants,
            });
        }

        // Topics.
        let mut topics = Vec::with_capacity(document.topics.len());
        for def in &document.topics {
            topics.push(Topic {
                id: def.id.clone(),
                text: def.text.clone(),
                known: def.known,
                requires_plot_points: def
                    .requires_plot_points
                    .iter()
                    .map(|p| r.plot(p, &def.id))
                    .collect::<Result<_, _>>()?,
                requires_topics: def
                    .requires_topics
                    .iter()
                    .map(|t| r.topic(t, &def.id))
                    .collect::<Result<_, _>>()?,
            });
        }

        // Plot points.
        let mut plot_points = Vec::with_capacity(document.plot_points.len());
        for def in &document.plot_points {
            plot_points.push(PlotPoint {
                id: def.id.clone(),
                text: def.text.clone(),
                trigger: r.condition(&def.trigger, &def.id)?,
                prerequisites: def
                    .prerequisites
                    .iter()
                    .map(|p| r.plot(p, &def.id))
                    .collect::<Result<_, _>>()?,
                is_ending: def.is_ending,
            });
        }
        if let Some(p) = find_cycle(plot_points.len(), |i| {
            plot_points[i].prerequisites.iter().map(|p| p.index()).collect()
        }) {
            return Err(E::CyclicPrerequisites(plot_points[p].id.clone()));
        }
        let endings: Vec<PlotIx> = plot_points
            .iter()
            .enumerate()
            .filter(|(_, p)| p.is_ending)
            .map(|(i, _)| PlotIx::from_usize(i))
            .collect();
        if endings.is_empty() {
            return Err(E::NoEnding);
        }

        let bytes = serde_json::to_vec(&document).expect("story document serializes");
        let fingerprint = sha256_hex(&bytes);

        Ok(WorldSpec {
            locations_by_id: sorted_order(&location_ids),
            objects_by_id: sorted_order(&object_ids),
            topics_by_id: sorted_order(&topic_ids),
            document,
            fingerprint,
            start,
            locations,
            objects,
            characters,
            topics,
            plot_points,
            endings,
            location_ids,
            object_ids,
            character_ids,
            topic_ids,
            plot_ids,
        })
    }

    pub fn document(&self) -> &StoryDocument {
        &self.document
    }

    /// SHA-256 of the canonical serialization of the story document.
    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    pub fn start_location(&self) -> LocationIx {
        self.start
    }

    pub fn locations(&self) -> &[Location] {
        &self.locations
    }

    pub fn objects(&self) -> &[Object] {
        &self.objects
    }

    pub fn characters(&self) -> &[Character] {
        &self.characters
    }

    pub fn topics(&self) -> &[Topic] {
        &self.topics
    }

    pub fn plot_points(&self) -> &[PlotPoint] {
        &self.plot_points
    }

    /// Ending plot points in document order.
    pub fn endings(&self) -> &[PlotIx] {
        &self.endings
    }

    pub fn location(&self, ix: LocationIx) -> &Location {
        &self.locations[ix.index()]
    }

    pub fn object(&self, ix: ObjectIx) -> &Object {
        &self.objects[ix.index()]
    }

    pub fn character(&self, ix: CharacterIx) -> &Character {
        &self.characters[ix.index()]
    }

    pub fn topic(&self, ix: TopicIx) -> &Topic {
        &self.topics[ix.index()]
    }

    pub fn plot_point(&self, ix: PlotIx) -> &PlotPoint {
        &self.plot_points[ix.index()]
    }

    pub fn location_ix(&self, id: &str) -> Option<LocationIx> {
        self.location_ids.get(id).copied()
    }

    pub fn object_ix(&self, id: &str) -> Option<ObjectIx> {
        self.object_ids.get(id).copied()
    }

    pub fn character_ix(&self, id: &str) -> Option<CharacterIx> {
        self.character_ids.get(id).copied()
    }

    pub fn topic_ix(&self, id: &str) -> Option<TopicIx> {
        self.topic_ids.get(id).copied()
    }

    pub fn plot_ix(&self, id: &str) -> Option<PlotIx> {
        self.plot_ids.get(id).copied()
    }

    /// Objects that can end up in the inventory: takeable, sold, or handed
    /// over by an effect.
    pub fn obtainable_objects(&self) -> Vec<ObjectIx> {
        let mut flags: Vec<bool> = self.objects.iter().map(|o| o.can_take).collect();
        let mut mark_effects = |effects: &[CompiledEffect]| {
            for e in effects {
                if let CompiledEffect::GiveToPlayer(o) = e {
                    flags[o.index()] = true;
                }
            }
        };
        for o in &self.objects {
            mark_effects(&o.on_use);
        }
        for c in &self.characters {
            for (_, effects) in &c.wants {
                mark_effects(effects);
            }
        }
        for c in &self.characters {
            for o in &c.sells {
                flags[o.index()] = true;
            }
        }
        flags
            .iter()
            .enumerate()
            .filter(|(_, f)| **f)
            .map(|(i, _)| ObjectIx::from_usize(i))
            .collect()
    }

    /// Objects referenced by a `seen` atom in some trigger.
    pub(crate) fn seen_relevant(&self) -> Vec<bool> {
        let mut out = vec![false; self.objects.len()];
        for p in &self.plot_points {
            visit_atoms(&p.trigger, &mut |c| {
                if let Cond::Seen(o) = c {
                    out[o.index()] = true;
                }
            });
        }
        out
    }

    /// Topics whose `mentioned` flag can influence a trigger or another topic.
    pub(crate) fn mention_relevant(&self) -> Vec<bool> {
        let mut out = vec![false; self.topics.len()];
        for p in &self.plot_points {
            visit_atoms(&p.trigger, &mut |c| {
                if let Cond::Mentioned(t) = c {
                    out[t.index()] = true;
                }
            });
        }
        for t in &self.topics {
            for r in &t.requires_topics {
                out[r.index()] = true;
            }
        }
        out
    }
}

fn visit_atoms(c: &Cond, f: &mut impl FnMut(&Cond)) {
    match c {
        Cond::All(cs) | Cond::Any(cs) => cs.iter().for_each(|c| visit_atoms(c, f)),
        Cond::Not(c) => visit_atoms(c, f),
        atom => f(atom),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testing::{minimal_document, toy_document};
    use alloc::string::ToString;

    #[test]
    fn minimal_story_is_valid() {
        let w = WorldSpec::from_document(minimal_document()).unwrap();
        assert_eq!(w.locations().len(), 1);
        assert_eq!(w.endings().len(), 1);
        assert_eq!(w.fingerprint().len(), 64);
    }

    #[test]
    fn cyclic_prerequisites_rejected() {
        let mut doc = minimal_document();
        doc.plot_points = vec![
            PlotPointDef {
                id: "a".into(),
                text: String::new(),
                trigger: Condition::Always,
                prerequisites: vec!["b".into()],
                is_ending: true,
            },
            PlotPointDef {
                id: "b".into(),
                text: String::new(),
                trigger: Condition::Always,
                prerequisites: vec!["a".into()],
                is_ending: false,
            },
        ];
        let err = WorldSpec::from_document(doc).unwrap_err();
        assert!(matches!(err, ValidationError::CyclicPrerequisites(_)), "{err}");
    }

    #[test]
    fn asymmetric_adjacency_rejected() {
        let mut doc = toy_document();
        doc.locations[0].adjacent.push("d".into());
        let err = WorldSpec::from_document(doc).unwrap_err();
        assert_eq!(
            err,
            ValidationError::AsymmetricAdjacency {
                from: "a".into(),
                to: "d".into()
            }
        );
    }

    #[test]
    fn dangling_reference_names_the_id() {
        let mut doc = toy_document();
        doc.objects[0].key = Some("nowhere".into());
        let err = WorldSpec::from_document(doc).unwrap_err();
        assert!(err.to_string().contains("nowhere"));
    }

    #[test]
    fn locked_object_needs_key() {
        let mut doc = toy_document();
        let chest = doc.objects.iter_mut().find(|o| o.id == "chest").unwrap();
        chest.key = None;
        assert_eq!(
            WorldSpec::from_document(doc).unwrap_err(),
            ValidationError::LockedWithoutKey("chest".into())
        );
    }

    #[test]
    fn duplicate_ids_rejected() {
        let mut doc = toy_document();
        let dup = doc.objects[0].clone();
        doc.objects.push(dup);
        assert!(matches!(
            WorldSpec::from_document(doc).unwrap_err(),
            ValidationError::DuplicateId { category: "object", .. }
        ));
    }

    #[test]
    fn containment_cycle_rejected() {
        let mut doc = toy_document();
        doc.objects.push(ObjectDef {
            id: "box1".into(),
            container: Some("box2".into()),
            ..Default::default()
        });
        doc.objects.push(ObjectDef {
            id: "box2".into(),
            container: Some("box1".into()),
            ..Default::default()
        });
        assert!(matches!(
            WorldSpec::from_document(doc).unwrap_err(),
            ValidationError::CyclicContainment(_)
        ));
    }

    #[test]
    fn placement_must_be_unique() {
        let mut doc = toy_document();
        doc.objects[0].container = Some("chest".into());
        assert!(matches!(
            WorldSpec::from_document(doc).unwrap_err(),
            ValidationError::AmbiguousPlacement(_)
        ));
    }

    #[test]
    fn no_ending_rejected() {
        let mut doc = minimal_document();
        doc.plot_points[0].is_ending = false;
        assert_eq!(WorldSpec::from_document(doc).unwrap_err(), ValidationError::NoEnding);
    }

    #[test]
    fn wrong_schema_version_rejected() {
        let mut doc = minimal_document();
        doc.schema_version = "2".into();
        assert!(matches!(
            WorldSpec::from_document(doc).unwrap_err(),
            ValidationError::UnsupportedSchema(_)
        ));
    }

    #[test]
    fn enumeration_orders_are_lexicographic() {
        let w = WorldSpec::from_document(toy_document()).unwrap();
        let ids: Vec<&str> = w.objects_by_id.iter().map(|o| w.object(*o).id.as_str()).collect();
        let mut sorted = ids.clone();
        sorted.sort();
        assert_eq!(ids, sorted);
    }
}
