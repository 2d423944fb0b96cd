//! The narrative MDP: state, the nine parameterised actions, deterministic
//! transitions with plot-point triggering, and trace replay.
//!
//! Applicability follows the minimal per-action conditions, conjoined with
//! the state flags (`can_take`, `can_open`, locks and keys). Visibility is
//! derived: an object is visible when it is carried, lies in the current
//! location, or sits in an open visible container. Opening a container
//! therefore reveals its contents, while examining only marks an object as
//! seen.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::{CharacterIx, LocationIx, ObjectIx, PlotIx, TopicIx};
use crate::story::{CompiledEffect, Cond, Place, WorldSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActionKind {
    Goto,
    Examine,
    Take,
    Use,
    Unlock,
    Open,
    Say,
    Buy,
    Give,
}

impl ActionKind {
    /// Enumeration order used everywhere actions are listed.
    pub const ALL: [ActionKind; 9] = [
        ActionKind::Goto,
        ActionKind::Examine,
        ActionKind::Take,
        ActionKind::Use,
        ActionKind::Unlock,
        ActionKind::Open,
        ActionKind::Say,
        ActionKind::Buy,
        ActionKind::Give,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ActionKind::Goto => "goto",
            ActionKind::Examine => "examine",
            ActionKind::Take => "take",
            ActionKind::Use => "use",
            ActionKind::Unlock => "unlock",
            ActionKind::Open => "open",
            ActionKind::Say => "say",
            ActionKind::Buy => "buy",
            ActionKind::Give => "give",
        }
    }
}

impl fmt::Display for ActionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One concrete action. The target is a location for `goto`, a topic for
/// `say`, and an object otherwise; `key` is set only for `unlock`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ActionInstance {
    kind: ActionKind,
    target: u16,
    key: Option<ObjectIx>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ActionError {
    #[error("unknown {category} {id:?} for action {kind}")]
    UnknownTarget {
        kind: ActionKind,
        category: &'static str,
        id: String,
    },
    #[error("unlock needs both an object and a key")]
    MissingKey,
    #[error("only unlock takes a key")]
    UnexpectedKey,
}

impl ActionInstance {
    pub fn goto(l: LocationIx) -> Self {
        Self { kind: ActionKind::Goto, target: l.0, key: None }
    }
    pub fn examine(o: ObjectIx) -> Self {
        Self::object(ActionKind::Examine, o)
    }
    pub fn take(o: ObjectIx) -> Self {
        Self::object(ActionKind::Take, o)
    }
    pub fn use_object(o: ObjectIx) -> Self {
        Self::object(ActionKind::Use, o)
    }
    pub fn unlock(o: ObjectIx, key: ObjectIx) -> Self {
        Self { kind: ActionKind::Unlock, target: o.0, key: Some(key) }
    }
    pub fn open(o: ObjectIx) -> Self {
        Self::object(ActionKind::Open, o)
    }
    pub fn say(t: TopicIx) -> Self {
        Self { kind: ActionKind::Say, target: t.0, key: None }
    }
    pub fn buy(o: ObjectIx) -> Self {
        Self::object(ActionKind::Buy, o)
    }
    pub fn give(o: ObjectIx) -> Self {
        Self::object(ActionKind::Give, o)
    }

    fn object(kind: ActionKind, o: ObjectIx) -> Self {
        Self { kind, target: o.0, key: None }
    }

    /// Resolves string ids against `world`.
    pub fn from_ids(
        world: &WorldSpec,
        kind: ActionKind,
        target: &str,
        key: Option<&str>,
    ) -> Result<Self, ActionError> {
        let unknown = |category| ActionError::UnknownTarget {
            kind,
            category,
            id: target.to_string(),
        };
        match (kind, key) {
            (ActionKind::Unlock, None) => return Err(ActionError::MissingKey),
            (ActionKind::Unlock, Some(_)) => {}
            (_, Some(_)) => return Err(ActionError::UnexpectedKey),
            _ => {}
        }
        Ok(match kind {
            ActionKind::Goto => Self::goto(world.location_ix(target).ok_or_else(|| unknown("location"))?),
            ActionKind::Say => Self::say(world.topic_ix(target).ok_or_else(|| unknown("topic"))?),
            ActionKind::Unlock => {
                let o = world.object_ix(target).ok_or_else(|| unknown("object"))?;
                let k = key.unwrap_or_default();
                let k = world.object_ix(k).ok_or_else(|| ActionError::UnknownTarget {
                    kind,
                    category: "object",
                    id: k.to_string(),
                })?;
                Self::unlock(o, k)
            }
            _ => Self::object(kind, world.object_ix(target).ok_or_else(|| unknown("object"))?),
        })
    }

    pub fn kind(&self) -> ActionKind {
        self.kind
    }

    pub fn key(&self) -> Option<ObjectIx> {
        self.key
    }

    pub fn target_location(&self) -> Option<LocationIx> {
        (self.kind == ActionKind::Goto).then_some(LocationIx(self.target))
    }

    pub fn target_topic(&self) -> Option<TopicIx> {
        (self.kind == ActionKind::Say).then_some(TopicIx(self.target))
    }

    pub fn target_object(&self) -> Option<ObjectIx> {
        (!matches!(self.kind, ActionKind::Goto | ActionKind::Say)).then_some(ObjectIx(self.target))
    }

    fn target_in_range(&self, world: &WorldSpec) -> bool {
        let t = self.target as usize;
        let in_range = match self.kind {
            ActionKind::Goto => t < world.locations().len(),
            ActionKind::Say => t < world.topics().len(),
            _ => t < world.objects().len(),
        };
        in_range && self.key.is_none_or(|k| k.index() < world.objects().len())
    }

    /// Id of the target in `world`.
    pub fn target_id<'w>(&self, world: &'w WorldSpec) -> &'w str {
        match self.kind {
            ActionKind::Goto => &world.location(LocationIx(self.target)).id,
            ActionKind::Say => &world.topic(TopicIx(self.target)).id,
            _ => &world.object(ObjectIx(self.target)).id,
        }
    }

    pub fn key_id<'w>(&self, world: &'w WorldSpec) -> Option<&'w str> {
        self.key.map(|k| world.object(k).id.as_str())
    }

    /// Short human-readable label such as `unlock desk with brass key`.
    pub fn label(&self, world: &WorldSpec) -> String {
        let name = |s: &str| s.replace('_', " ");
        let target = name(self.target_id(world));
        match (self.kind, self.key_id(world)) {
            (ActionKind::Goto, _) => format!("go to {target}"),
            (ActionKind::Say, _) => format!("ask about {target}"),
            (ActionKind::Unlock, Some(k)) => format!("unlock {target} with {}", name(k)),
            (kind, _) => format!("{kind} {target}"),
        }
    }
}

/// Flags and whereabouts of one object.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ObjectState {
    pub place: Place,
    pub locked: bool,
    pub open: bool,
    pub can_open: bool,
    pub can_take: bool,
    pub visible: bool,
    pub seen: bool,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct TopicState {
    pub known: bool,
    pub mentioned: bool,
}

/// Full interactive-narrative state. Indexed by the owning world; compare
/// and hash only states of the same world.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct GameState {
    pub(crate) location: LocationIx,
    pub(crate) locations_available: Vec<bool>,
    pub(crate) objects: Vec<ObjectState>,
    pub(crate) characters_visible: Vec<bool>,
    pub(crate) plots_visited: Vec<bool>,
    pub(crate) topics: Vec<TopicState>,
}

impl GameState {
    pub fn current_location(&self) -> LocationIx {
        self.location
    }

    pub fn is_location_available(&self, l: LocationIx) -> bool {
        self.locations_available[l.index()]
    }

    pub fn locations_available(&self) -> impl Iterator<Item = LocationIx> + '_ {
        flagged(&self.locations_available).map(LocationIx::from_usize)
    }

    pub fn object(&self, o: ObjectIx) -> &ObjectState {
        &self.objects[o.index()]
    }

    pub fn objects(&self) -> &[ObjectState] {
        &self.objects
    }

    /// Objects directly inside container `c`, in document order.
    pub fn contents(&self, c: ObjectIx) -> impl Iterator<Item = ObjectIx> + '_ {
        self.objects
            .iter()
            .enumerate()
            .filter(move |(_, s)| s.place == Place::Container(c))
            .map(|(i, _)| ObjectIx::from_usize(i))
    }

    pub fn is_empty(&self, c: ObjectIx) -> bool {
        self.contents(c).next().is_none()
    }

    pub fn inventory(&self) -> impl Iterator<Item = ObjectIx> + '_ {
        self.objects
            .iter()
            .enumerate()
            .filter(|(_, s)| s.place == Place::Inventory)
            .map(|(i, _)| ObjectIx::from_usize(i))
    }

    pub fn has(&self, o: ObjectIx) -> bool {
        self.objects[o.index()].place == Place::Inventory
    }

    pub fn character_visible(&self, c: CharacterIx) -> bool {
        self.characters_visible[c.index()]
    }

    pub fn plot_visited(&self, p: PlotIx) -> bool {
        self.plots_visited[p.index()]
    }

    pub fn visited_plot_points(&self) -> impl Iterator<Item = PlotIx> + '_ {
        flagged(&self.plots_visited).map(PlotIx::from_usize)
    }

    pub fn topic(&self, t: TopicIx) -> TopicState {
        self.topics[t.index()]
    }

    /// True once any ending plot point has been visited.
    pub fn is_terminal(&self, world: &WorldSpec) -> bool {
        world.endings().iter().any(|e| self.plots_visited[e.index()])
    }

    /// The ending reached, if any (first in document order).
    pub fn ending(&self, world: &WorldSpec) -> Option<PlotIx> {
        world.endings().iter().copied().find(|e| self.plots_visited[e.index()])
    }

    pub fn any_character_visible(&self) -> bool {
        self.characters_visible.iter().any(|v| *v)
    }

    /// Serializable view keyed by ids.
    pub fn snapshot(&self, world: &WorldSpec) -> StateSnapshot {
        let place = |p: Place| match p {
            Place::Location(l) => format!("location:{}", world.location(l).id),
            Place::Container(c) => format!("container:{}", world.object(c).id),
            Place::Inventory => "inventory".to_string(),
            Place::Character(c) => format!("character:{}", world.character(c).id),
        };
        let mut locations_available: Vec<String> = self
            .locations_available()
            .map(|l| world.location(l).id.clone())
            .collect();
        locations_available.sort();
        let mut inventory: Vec<String> = self.inventory().map(|o| world.object(o).id.clone()).collect();
        inventory.sort();
        StateSnapshot {
            current_location: world.location(self.location).id.clone(),
            locations_available,
            object_states: self
                .objects
                .iter()
                .enumerate()
                .map(|(i, s)| {
                    let ix = ObjectIx::from_usize(i);
                    let mut contents: Vec<String> =
                        self.contents(ix).map(|c| world.object(c).id.clone()).collect();
                    contents.sort();
                    (
                        world.object(ix).id.clone(),
                        ObjectSnapshot {
                            locked: s.locked,
                            open: s.open,
                            empty: contents.is_empty(),
                            contents,
                            can_open: s.can_open,
                            can_take: s.can_take,
                            visible: s.visible,
                            seen: s.seen,
                            location: place(s.place),
                        },
                    )
                })
                .collect(),
            inventory,
            character_states: self
                .characters_visible
                .iter()
                .enumerate()
                .map(|(i, v)| {
                    (
                        world.character(CharacterIx::from_usize(i)).id.clone(),
                        CharacterSnapshot { visible: *v },
                    )
                })
                .collect(),
            plot_states: self
                .plots_visited
                .iter()
                .enumerate()
                .map(|(i, v)| (world.plot_point(PlotIx::from_usize(i)).id.clone(), PlotSnapshot { visited: *v }))
                .collect(),
            topic_states: self
                .topics
                .iter()
                .enumerate()
                .map(|(i, t)| {
                    (
                        world.topic(TopicIx::from_usize(i)).id.clone(),
                        TopicSnapshot {
                            known: t.known,
                            mentioned: t.mentioned,
                        },
                    )
                })
                .collect(),
        }
    }

    /// Canonical JSON: sorted keys, no insignificant whitespace.
    pub fn to_canonical_json(&self, world: &WorldSpec) -> String {
        let value = serde_json::to_value(self.snapshot(world)).expect("snapshot serializes");
        serde_json::to_string(&value).expect("value serializes")
    }
}

fn flagged(flags: &[bool]) -> impl Iterator<Item = usize> + '_ {
    flags.iter().enumerate().filter(|(_, f)| **f).map(|(i, _)| i)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StateSnapshot {
    pub current_location: String,
    pub locations_available: Vec<String>,
    pub object_states: BTreeMap<String, ObjectSnapshot>,
    pub inventory: Vec<String>,
    pub character_states: BTreeMap<String, CharacterSnapshot>,
    pub plot_states: BTreeMap<String, PlotSnapshot>,
    pub topic_states: BTreeMap<String, TopicSnapshot>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ObjectSnapshot {
    pub locked: bool,
    pub open: bool,
    pub empty: bool,
    pub contents: Vec<String>,
    pub can_open: bool,
    pub can_take: bool,
    pub visible: bool,
    pub seen: bool,
    pub location: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CharacterSnapshot {
    pub visible: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PlotSnapshot {
    pub visited: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TopicSnapshot {
    pub known: bool,
    pub mentioned: bool,
}

/// Why an action cannot be applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum NotApplicable {
    #[error("the story has ended")]
    Terminal,
    #[error("malformed action for this world")]
    Malformed,
    #[error("destination is not adjacent")]
    NotAdjacent,
    #[error("the way is shut")]
    DoorClosed,
    #[error("object is not visible")]
    NotVisible,
    #[error("object cannot be taken")]
    NotTakeable,
    #[error("object is already carried")]
    AlreadyCarried,
    #[error("object is not carried")]
    NotCarried,
    #[error("key is not carried")]
    KeyNotCarried,
    #[error("object is not locked")]
    NotLocked,
    #[error("wrong key")]
    WrongKey,
    #[error("object is locked")]
    Locked,
    #[error("object cannot be opened")]
    NotOpenable,
    #[error("object is already open")]
    AlreadyOpen,
    #[error("topic is not known")]
    TopicUnknown,
    #[error("nobody is here")]
    NoCharacter,
    #[error("nobody here sells that")]
    NotForSale,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TransitionOutcome {
    pub next_state: GameState,
    /// Plot points that became visited during this transition, in the order
    /// they fired.
    pub newly_visited_plot_points: Vec<PlotIx>,
    pub is_terminal: bool,
    pub narration: String,
}

/// State at the start of play. No trigger is evaluated here; plot points
/// fire only in response to actions.
pub fn initial_state(world: &WorldSpec) -> GameState {
    let start = world.start_location();
    let mut locations_available = vec![false; world.locations().len()];
    locations_available[start.index()] = true;
    for (l, _) in &world.location(start).exits {
        locations_available[l.index()] = true;
    }
    let mut state = GameState {
        location: start,
        locations_available,
        objects: world
            .objects()
            .iter()
            .map(|o| ObjectState {
                place: o.initial_place,
                locked: o.locked,
                open: o.open,
                can_open: o.can_open,
                can_take: o.can_take,
                visible: false,
                seen: false,
            })
            .collect(),
        characters_visible: vec![false; world.characters().len()],
        plots_visited: vec![false; world.plot_points().len()],
        topics: world
            .topics()
            .iter()
            .map(|t| TopicState {
                known: t.known,
                mentioned: false,
            })
            .collect(),
    };
    refresh_visibility(world, &mut state);
    state
}

fn refresh_visibility(world: &WorldSpec, state: &mut GameState) {
    fn visible(state: &GameState, o: usize, here: LocationIx) -> bool {
        match state.objects[o].place {
            Place::Inventory => true,
            Place::Location(l) => l == here,
            Place::Character(_) => false,
            Place::Container(c) => state.objects[c.index()].open && visible(state, c.index(), here),
        }
    }
    let here = state.location;
    for o in 0..state.objects.len() {
        let v = visible(state, o, here);
        state.objects[o].visible = v;
    }
    for (i, c) in world.characters().iter().enumerate() {
        state.characters_visible[i] = c.location == here;
    }
}

/// Checks `action` against `state` without applying it.
pub fn check_applicable(
    world: &WorldSpec,
    state: &GameState,
    action: &ActionInstance,
) -> Result<(), NotApplicable> {
    use NotApplicable as N;
    if state.is_terminal(world) {
        return Err(N::Terminal);
    }
    if !action.target_in_range(world) {
        return Err(N::Malformed);
    }
    if action.key.is_some() != (action.kind == ActionKind::Unlock) {
        return Err(N::Malformed);
    }
    let object = |o: ObjectIx| &state.objects[o.index()];
    let visible = |o: ObjectIx| {
        if object(o).visible {
            Ok(())
        } else {
            Err(N::NotVisible)
        }
    };
    match action.kind {
        ActionKind::Goto => {
            let to = LocationIx(action.target);
            let (_, door) = world
                .location(state.location)
                .exits
                .iter()
                .find(|(l, _)| *l == to)
                .ok_or(N::NotAdjacent)?;
            match door {
                Some(d) if !object(*d).open => Err(N::DoorClosed),
                _ => Ok(()),
            }
        }
        ActionKind::Examine | ActionKind::Use => visible(ObjectIx(action.target)),
        ActionKind::Take => {
            let o = ObjectIx(action.target);
            visible(o)?;
            if !object(o).can_take {
                Err(N::NotTakeable)
            } else if object(o).place == Place::Inventory {
                Err(N::AlreadyCarried)
            } else {
                Ok(())
            }
        }
        ActionKind::Unlock => {
            let o = ObjectIx(action.target);
            let k = action.key.ok_or(N::Malformed)?;
            visible(o)?;
            if object(k).place != Place::Inventory {
                Err(N::KeyNotCarried)
            } else if !object(o).locked {
                Err(N::NotLocked)
            } else if world.object(o).key != Some(k) {
                Err(N::WrongKey)
            } else {
                Ok(())
            }
        }
        ActionKind::Open => {
            let o = ObjectIx(action.target);
            visible(o)?;
            let s = object(o);
            if s.locked {
                Err(N::Locked)
            } else if !s.can_open {
                Err(N::NotOpenable)
            } else if s.open {
                Err(N::AlreadyOpen)
            } else {
                Ok(())
            }
        }
        ActionKind::Say => {
            if !state.topics[action.target as usize].known {
                Err(N::TopicUnknown)
            } else if !state.any_character_visible() {
                Err(N::NoCharacter)
            } else {
                Ok(())
            }
        }
        ActionKind::Buy => {
            let o = ObjectIx(action.target);
            if !state.any_character_visible() {
                return Err(N::NoCharacter);
            }
            let sold_here = world.characters().iter().enumerate().any(|(i, c)| {
                state.characters_visible[i]
                    && c.sells.contains(&o)
                    && object(o).place == Place::Character(CharacterIx::from_usize(i))
            });
            if sold_here {
                Ok(())
            } else {
                Err(N::NotForSale)
            }
        }
        ActionKind::Give => {
            if object(ObjectIx(action.target)).place != Place::Inventory {
                Err(N::NotCarried)
            } else if !state.any_character_visible() {
                Err(N::NoCharacter)
            } else {
                Ok(())
            }
        }
    }
}

/// Every applicable action, ordered by kind, then target id, then key id.
pub fn applicable_actions(world: &WorldSpec, state: &GameState) -> Vec<ActionInstance> {
    let mut out = Vec::new();
    if state.is_terminal(world) {
        return out;
    }
    let mut push = |a: ActionInstance| {
        if check_applicable(world, state, &a).is_ok() {
            out.push(a);
        }
    };
    for kind in ActionKind::ALL {
        match kind {
            ActionKind::Goto => world.locations_by_id.iter().for_each(|l| push(ActionInstance::goto(*l))),
            ActionKind::Say => world.topics_by_id.iter().for_each(|t| push(ActionInstance::say(*t))),
            ActionKind::Unlock => {
                // Each lock has a single key, so key order is trivially sorted.
                for o in &world.objects_by_id {
                    if let Some(k) = world.object(*o).key {
                        push(ActionInstance::unlock(*o, k));
                    }
                }
            }
            kind => world
                .objects_by_id
                .iter()
                .for_each(|o| push(ActionInstance::object(kind, *o))),
        }
    }
    out
}

fn apply_effects(state: &mut GameState, effects: &[CompiledEffect]) {
    for e in effects {
        match *e {
            CompiledEffect::GiveToPlayer(o) => state.objects[o.index()].place = Place::Inventory,
            CompiledEffect::PlaceAt(o, l) => state.objects[o.index()].place = Place::Location(l),
            CompiledEffect::Open(o) => {
                let s = &mut state.objects[o.index()];
                s.open = true;
                s.locked = false;
            }
            CompiledEffect::Unlock(o) => state.objects[o.index()].locked = false,
            CompiledEffect::LearnTopic(t) => state.topics[t.index()].known = true,
        }
    }
}

fn holds(c: &Cond, state: &GameState, last: Option<&ActionInstance>) -> bool {
    match c {
        Cond::Always => true,
        Cond::All(cs) => cs.iter().all(|c| holds(c, state, last)),
        Cond::Any(cs) => cs.iter().any(|c| holds(c, state, last)),
        Cond::Not(c) => !holds(c, state, last),
        Cond::Visited(p) => state.plots_visited[p.index()],
        Cond::Seen(o) => state.objects[o.index()].seen,
        Cond::Has(o) => state.objects[o.index()].place == Place::Inventory,
        Cond::Mentioned(t) => state.topics[t.index()].mentioned,
        Cond::At(l) => state.location == *l,
        Cond::LastAction(kind, target) => last.is_some_and(|a| a.kind == *kind && a.target == *target),
    }
}

/// Marks known topics and visited plot points until nothing changes.
fn settle(
    world: &WorldSpec,
    state: &mut GameState,
    last: Option<&ActionInstance>,
    fired: &mut Vec<PlotIx>,
) {
    loop {
        let mut changed = false;
        for (i, t) in world.topics().iter().enumerate() {
            if state.topics[i].known
                || (t.requires_plot_points.is_empty() && t.requires_topics.is_empty())
            {
                continue;
            }
            let ready = t.requires_plot_points.iter().all(|p| state.plots_visited[p.index()])
                && t.requires_topics.iter().all(|r| state.topics[r.index()].mentioned);
            if ready {
                state.topics[i].known = true;
                changed = true;
            }
        }
        for (i, p) in world.plot_points().iter().enumerate() {
            if state.plots_visited[i] {
                continue;
            }
            let ready = p.prerequisites.iter().all(|q| state.plots_visited[q.index()])
                && holds(&p.trigger, state, last);
            if ready {
                state.plots_visited[i] = true;
                fired.push(PlotIx::from_usize(i));
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
}

fn describe(text: &str, fallback: &str) -> String {
    if text.is_empty() {
        fallback.to_string()
    } else {
        text.to_string()
    }
}

/// Plot points whose triggers already hold in `state` with no action taken.
pub(crate) fn pending_plot_points(world: &WorldSpec, state: &GameState) -> Vec<PlotIx> {
    let mut scratch = state.clone();
    let mut fired = Vec::new();
    settle(world, &mut scratch, None, &mut fired);
    fired
}

/// Applies `action`, returning the unique successor.
pub fn apply_action(
    world: &WorldSpec,
    state: &GameState,
    action: &ActionInstance,
) -> Result<TransitionOutcome, NotApplicable> {
    check_applicable(world, state, action)?;
    let mut next = state.clone();
    let name = |o: ObjectIx| world.object(o).id.replace('_', " ");
    let mut narration = match action.kind {
        ActionKind::Goto => {
            let to = LocationIx(action.target);
            next.location = to;
            next.locations_available[to.index()] = true;
            for (l, _) in &world.location(to).exits {
                next.locations_available[l.index()] = true;
            }
            let loc = world.location(to);
            describe(&loc.text, &format!("You arrive at the {}.", loc.id.replace('_', " ")))
        }
        ActionKind::Examine => {
            let o = ObjectIx(action.target);
            next.objects[o.index()].seen = true;
            describe(
                &world.object(o).text,
                &format!("You see nothing special about the {}.", name(o)),
            )
        }
        ActionKind::Take => {
            let o = ObjectIx(action.target);
            next.objects[o.index()].place = Place::Inventory;
            format!("You take the {}.", name(o))
        }
        ActionKind::Use => {
            let o = ObjectIx(action.target);
            let effects = &world.object(o).on_use;
            apply_effects(&mut next, effects);
            if effects.is_empty() {
                format!("Nothing happens when you use the {}.", name(o))
            } else {
                format!("You use the {}.", name(o))
            }
        }
        ActionKind::Unlock => {
            let o = ObjectIx(action.target);
            next.objects[o.index()].locked = false;
            format!("You unlock the {}.", name(o))
        }
        ActionKind::Open => {
            let o = ObjectIx(action.target);
            next.objects[o.index()].open = true;
            let inside: Vec<String> = next.contents(o).map(name).collect();
            if inside.is_empty() {
                format!("You open the {}.", name(o))
            } else {
                format!("You open the {}, revealing: {}.", name(o), inside.join(", "))
            }
        }
        ActionKind::Say => {
            let t = TopicIx(action.target);
            next.topics[t.index()].mentioned = true;
            let replies: Vec<String> = world
                .characters()
                .iter()
                .enumerate()
                .filter(|(i, _)| state.characters_visible[*i])
                .filter_map(|(_, c)| {
                    c.responses
                        .iter()
                        .find(|(topic, _)| *topic == t)
                        .map(|(_, reply)| describe(reply, &format!("The {} nods.", c.id.replace('_', " "))))
                })
                .collect();
            if replies.is_empty() {
                format!("Nobody has anything to say about {}.", world.topic(t).id.replace('_', " "))
            } else {
                replies.join(" ")
            }
        }
        ActionKind::Buy => {
            let o = ObjectIx(action.target);
            next.objects[o.index()].place = Place::Inventory;
            format!("You buy the {}.", name(o))
        }
        ActionKind::Give => {
            let o = ObjectIx(action.target);
            let present = || {
                world
                    .characters()
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| state.characters_visible[*i])
            };
            let wanting = present().find_map(|(i, c)| {
                c.wants
                    .iter()
                    .find(|(w, _)| *w == o)
                    .map(|(_, effects)| (i, effects))
            });
            let recipient = match wanting {
                Some((i, effects)) => {
                    next.objects[o.index()].place = Place::Character(CharacterIx::from_usize(i));
                    apply_effects(&mut next, effects);
                    i
                }
                None => {
                    let (i, _) = present().next().expect("checked: a character is visible");
                    next.objects[o.index()].place = Place::Character(CharacterIx::from_usize(i));
                    i
                }
            };
            format!(
                "You give the {} to the {}.",
                name(o),
                world.character(CharacterIx::from_usize(recipient)).id.replace('_', " ")
            )
        }
    };
    refresh_visibility(world, &mut next);
    let mut fired = Vec::new();
    settle(world, &mut next, Some(action), &mut fired);
    for p in &fired {
        let text = &world.plot_point(*p).text;
        if !text.is_empty() {
            narration.push(' ');
            narration.push_str(text);
        }
    }
    let is_terminal = next.is_terminal(world);
    Ok(TransitionOutcome {
        next_state: next,
        newly_visited_plot_points: fired,
        is_terminal,
        narration,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReplayStep {
    /// State the action was taken in.
    pub state: GameState,
    pub action: ActionInstance,
    pub outcome: TransitionOutcome,
}

/// A trace folded through the engine from the initial state.
#[derive(Clone, Debug, PartialEq)]
pub struct Replay {
    pub initial: GameState,
    pub steps: Vec<ReplayStep>,
}

impl Replay {
    pub fn final_state(&self) -> &GameState {
        self.steps
            .last()
            .map(|s| &s.outcome.next_state)
            .unwrap_or(&self.initial)
    }

    /// Plot points in discovery order.
    pub fn plot_points_discovered(&self) -> Vec<PlotIx> {
        self.steps
            .iter()
            .flat_map(|s| s.outcome.newly_visited_plot_points.iter().copied())
            .collect()
    }

    pub fn end_reached(&self, world: &WorldSpec) -> Option<PlotIx> {
        self.final_state().ending(world)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("action {index} cannot be replayed: {reason}")]
pub struct ReplayError {
    pub index: usize,
    pub reason: NotApplicable,
}

/// Replays `actions` from the initial state.
pub fn replay(world: &WorldSpec, actions: &[ActionInstance]) -> Result<Replay, ReplayError> {
    let initial = initial_state(world);
    let mut steps: Vec<ReplayStep> = Vec::with_capacity(actions.len());
    for (index, action) in actions.iter().enumerate() {
        let state = steps
            .last()
            .map(|s| s.outcome.next_state.clone())
            .unwrap_or_else(|| initial.clone());
        let outcome = apply_action(world, &state, action).map_err(|reason| ReplayError { index, reason })?;
        steps.push(ReplayStep {
            state,
            action: *action,
            outcome,
        });
    }
    Ok(Replay { initial, steps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testing::{chain, toy, world, MINIMAL};

    fn obj(w: &WorldSpec, id: &str) -> ObjectIx {
        w.object_ix(id).unwrap()
    }

    fn loc(w: &WorldSpec, id: &str) -> LocationIx {
        w.location_ix(id).unwrap()
    }

    #[test]
    fn initial_state_of_minimal_world() {
        let w = world(MINIMAL);
        let s = initial_state(&w);
        assert_eq!(s.current_location(), w.start_location());
        assert_eq!(s.locations_available().count(), 1);
        assert_eq!(s.visited_plot_points().count(), 0);
        assert_eq!(s.inventory().count(), 0);
    }

    #[test]
    fn goto_moves_and_discovers_neighbours() {
        let w = toy();
        let s = initial_state(&w);
        assert!(!s.is_location_available(loc(&w, "c")));
        let out = apply_action(&w, &s, &ActionInstance::goto(loc(&w, "b"))).unwrap();
        assert_eq!(out.next_state.current_location(), loc(&w, "b"));
        assert!(out.next_state.is_location_available(loc(&w, "c")));
    }

    #[test]
    fn take_moves_object_into_inventory() {
        let w = toy();
        let s = initial_state(&w);
        let key = obj(&w, "key");
        let out = apply_action(&w, &s, &ActionInstance::take(key)).unwrap();
        assert!(out.next_state.has(key));
        assert_eq!(out.next_state.object(key).place, Place::Inventory);
        assert!(check_applicable(&w, &out.next_state, &ActionInstance::take(key)).is_err());
    }

    #[test]
    fn unlock_then_open_reveals_contents_and_fires_plot_point() {
        let w = toy();
        let (key, chest, gem) = (obj(&w, "key"), obj(&w, "chest"), obj(&w, "gem"));
        let acts = [
            ActionInstance::take(key),
            ActionInstance::goto(loc(&w, "b")),
        ];
        let r = replay(&w, &acts).unwrap();
        let s = r.final_state();
        assert!(applicable_actions(&w, s).contains(&ActionInstance::unlock(chest, key)));
        assert!(!s.object(gem).visible);
        let s = apply_action(&w, s, &ActionInstance::unlock(chest, key)).unwrap().next_state;
        let out = apply_action(&w, &s, &ActionInstance::open(chest)).unwrap();
        assert!(out.next_state.object(gem).visible);
        assert_eq!(out.newly_visited_plot_points, vec![w.plot_ix("opened_chest").unwrap()]);
    }

    #[test]
    fn invisible_objects_offer_no_object_actions() {
        let w = toy();
        let s = initial_state(&w);
        let gem = obj(&w, "gem");
        for a in applicable_actions(&w, &s) {
            assert_ne!(a.target_object(), Some(gem));
        }
    }

    #[test]
    fn no_character_no_social_actions() {
        let w = toy();
        let s = initial_state(&w);
        assert!(!s.any_character_visible());
        assert!(applicable_actions(&w, &s)
            .iter()
            .all(|a| !matches!(a.kind(), ActionKind::Say | ActionKind::Buy | ActionKind::Give)));
        let s = apply_action(&w, &s, &ActionInstance::goto(loc(&w, "b"))).unwrap().next_state;
        let acts = applicable_actions(&w, &s);
        assert!(acts.contains(&ActionInstance::say(w.topic_ix("rumor").unwrap())));
        assert!(acts.contains(&ActionInstance::buy(obj(&w, "lamp"))));
    }

    #[test]
    fn ordering_is_kind_then_target_id() {
        let w = toy();
        let s = replay(
            &w,
            &[ActionInstance::take(obj(&w, "key")), ActionInstance::goto(loc(&w, "b"))],
        )
        .unwrap()
        .final_state()
        .clone();
        let acts = applicable_actions(&w, &s);
        let keys: Vec<(ActionKind, String)> = acts
            .iter()
            .map(|a| (a.kind(), String::from(a.target_id(&w))))
            .collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
    }

    #[test]
    fn door_gates_passage() {
        let w = toy();
        let s = replay(&w, &[ActionInstance::goto(loc(&w, "b")), ActionInstance::goto(loc(&w, "c"))])
            .unwrap()
            .final_state()
            .clone();
        let d = ActionInstance::goto(loc(&w, "d"));
        assert_eq!(check_applicable(&w, &s, &d), Err(NotApplicable::DoorClosed));
        let s = apply_action(&w, &s, &ActionInstance::open(obj(&w, "door"))).unwrap().next_state;
        assert!(check_applicable(&w, &s, &d).is_ok());
    }

    #[test]
    fn give_wanted_object_triggers_effects() {
        let w = toy();
        let (coin, b, c) = (obj(&w, "coin"), loc(&w, "b"), loc(&w, "c"));
        let r = replay(
            &w,
            &[
                ActionInstance::goto(b),
                ActionInstance::goto(c),
                ActionInstance::take(coin),
                ActionInstance::goto(b),
                ActionInstance::give(coin),
            ],
        )
        .unwrap();
        let s = r.final_state();
        assert_eq!(s.object(coin).place, Place::Character(w.character_ix("merchant").unwrap()));
        assert!(s.topic(w.topic_ix("gossip").unwrap()).known);
    }

    #[test]
    fn replay_of_empty_list_is_initial_state() {
        let w = toy();
        let r = replay(&w, &[]).unwrap();
        assert!(r.steps.is_empty());
        assert_eq!(r.final_state(), &initial_state(&w));
    }

    #[test]
    fn replay_reports_first_inapplicable_index() {
        let w = toy();
        let gem = obj(&w, "gem");
        let err = replay(
            &w,
            &[
                ActionInstance::goto(loc(&w, "b")),
                ActionInstance::goto(loc(&w, "a")),
                ActionInstance::goto(loc(&w, "b")),
                ActionInstance::take(gem),
            ],
        )
        .unwrap_err();
        assert_eq!(err, ReplayError { index: 3, reason: NotApplicable::NotVisible });
    }

    #[test]
    fn terminal_state_is_absorbing() {
        let w = chain();
        let (s1, s2) = (loc(&w, "s1"), loc(&w, "s2"));
        let r = replay(&w, &[ActionInstance::goto(s1), ActionInstance::goto(s2)]).unwrap();
        let last = &r.steps[1].outcome;
        assert!(last.is_terminal);
        assert!(applicable_actions(&w, &last.next_state).is_empty());
        assert_eq!(
            apply_action(&w, &last.next_state, &ActionInstance::goto(s1)).unwrap_err(),
            NotApplicable::Terminal
        );
    }

    #[test]
    fn canonical_json_has_sorted_keys() {
        let w = toy();
        let json = initial_state(&w).to_canonical_json(&w);
        let ci = json.find("\"character_states\"").unwrap();
        let cl = json.find("\"current_location\"").unwrap();
        let ti = json.find("\"topic_states\"").unwrap();
        assert!(ci < cl && cl < ti);
    }

    #[test]
    fn from_ids_enforces_key_arity() {
        let w = toy();
        assert_eq!(
            ActionInstance::from_ids(&w, ActionKind::Unlock, "chest", None),
            Err(ActionError::MissingKey)
        );
        assert_eq!(
            ActionInstance::from_ids(&w, ActionKind::Take, "key", Some("key")),
            Err(ActionError::UnexpectedKey)
        );
        assert!(ActionInstance::from_ids(&w, ActionKind::Goto, "chest", None).is_err());
        let a = ActionInstance::from_ids(&w, ActionKind::Unlock, "chest", Some("key")).unwrap();
        assert_eq!(a.label(&w), "unlock chest with key");
    }
}
