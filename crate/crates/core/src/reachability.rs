//! Breadth-first reachability over the engine's transition function.
//!
//! Used to catch dead stories: endings that no action sequence reaches,
//! or plot points nobody can discover under the depth cap. States are
//! deduplicated modulo flags that no trigger can observe (`seen` flags of
//! objects never tested by a trigger, `mentioned` flags of irrelevant
//! topics, and the discovered-locations set), which does not change which
//! plot points are reachable or at what depth.

use alloc::vec;
use alloc::vec::Vec;

use hashbrown::HashTable;

use crate::engine::{apply_action, applicable_actions, initial_state, pending_plot_points, ActionInstance, GameState};
use crate::hashing::hash_state;
use crate::ids::PlotIx;
use crate::story::WorldSpec;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ReachabilityOptions {
    /// Maximum action-sequence length searched.
    pub depth_cap: usize,
    /// Maximum number of distinct states kept before giving up.
    pub state_budget: usize,
}

impl Default for ReachabilityOptions {
    fn default() -> Self {
        Self {
            depth_cap: 200,
            state_budget: 2_000_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EndingReach {
    pub ending: PlotIx,
    /// A shortest action sequence reaching the ending, if one was found.
    pub shortest: Option<Vec<ActionInstance>>,
}

impl EndingReach {
    pub fn reachable(&self) -> bool {
        self.shortest.is_some()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReachabilityReport {
    pub options: ReachabilityOptions,
    pub states_explored: usize,
    /// True when the search finished without hitting the depth cap or the
    /// state budget, so `unreachable` is exact.
    pub complete: bool,
    pub endings: Vec<EndingReach>,
    /// Shortest discovery depth per plot point (document order). Depth 0
    /// means the trigger already holds in the initial state.
    pub plot_depths: Vec<Option<usize>>,
    pub unreachable: Vec<PlotIx>,
}

impl ReachabilityReport {
    pub fn all_endings_reachable(&self) -> bool {
        self.endings.iter().all(EndingReach::reachable)
    }
}

struct Node {
    state: GameState,
    parent: Option<(u32, ActionInstance)>,
    depth: usize,
    terminal: bool,
}

fn reduce(state: &mut GameState, seen_mask: &[bool], mention_mask: &[bool]) {
    for (o, keep) in state.objects.iter_mut().zip(seen_mask) {
        if !keep {
            o.seen = false;
        }
    }
    for (t, keep) in state.topics.iter_mut().zip(mention_mask) {
        if !keep {
            t.mentioned = false;
        }
    }
    state.locations_available.iter_mut().for_each(|l| *l = false);
}

/// Searches from the initial state for every plot point, breadth first.
pub fn validate_reachability(world: &WorldSpec, options: ReachabilityOptions) -> ReachabilityReport {
    let seen_mask = world.seen_relevant();
    let mention_mask = world.mention_relevant();
    let n_plots = world.plot_points().len();
    let mut plot_depths: Vec<Option<usize>> = vec![None; n_plots];
    let mut witness: Vec<Option<u32>> = vec![None; n_plots];

    let start = initial_state(world);
    for p in pending_plot_points(world, &start) {
        plot_depths[p.index()] = Some(0);
    }

    let mut nodes: Vec<Node> = Vec::new();
    let mut table: HashTable<u32> = HashTable::new();
    let mut root = start.clone();
    reduce(&mut root, &seen_mask, &mention_mask);
    table.insert_unique(hash_state(&root), 0, |&i| hash_state(&nodes[i as usize].state));
    nodes.push(Node {
        state: root,
        parent: None,
        depth: 0,
        terminal: false,
    });

    let mut found = plot_depths.iter().filter(|d| d.is_some()).count();
    let mut head = 0usize;
    let mut truncated = false;
    'search: while head < nodes.len() {
        if found == n_plots {
            break;
        }
        let current = head;
        head += 1;
        let depth = nodes[current].depth;
        if nodes[current].terminal {
            continue;
        }
        if depth >= options.depth_cap {
            truncated = true;
            continue;
        }
        let state = nodes[current].state.clone();
        for action in applicable_actions(world, &state) {
            let outcome = apply_action(world, &state, &action).expect("enumerated actions apply");
            let mut next = outcome.next_state;
            reduce(&mut next, &seen_mask, &mention_mask);
            let h = hash_state(&next);
            if table.find(h, |&i| nodes[i as usize].state == next).is_some() {
                continue;
            }
            if nodes.len() >= options.state_budget {
                truncated = true;
                break 'search;
            }
            let ix = nodes.len() as u32;
            table.insert_unique(h, ix, |&i| hash_state(&nodes[i as usize].state));
            for p in &outcome.newly_visited_plot_points {
                if plot_depths[p.index()].is_none() {
                    plot_depths[p.index()] = Some(depth + 1);
                    witness[p.index()] = Some(ix);
                    found += 1;
                }
            }
            nodes.push(Node {
                terminal: outcome.is_terminal,
                state: next,
                parent: Some((current as u32, action)),
                depth: depth + 1,
            });
        }
    }

    let path_to = |mut ix: u32| {
        let mut path = Vec::new();
        while let Some((parent, action)) = nodes[ix as usize].parent {
            path.push(action);
            ix = parent;
        }
        path.reverse();
        path
    };
    let endings = world
        .endings()
        .iter()
        .map(|&e| EndingReach {
            ending: e,
            shortest: match (plot_depths[e.index()], witness[e.index()]) {
                (Some(0), _) => Some(Vec::new()),
                (Some(_), Some(ix)) => Some(path_to(ix)),
                _ => None,
            },
        })
        .collect();
    let unreachable = plot_depths
        .iter()
        .enumerate()
        .filter(|(_, d)| d.is_none())
        .map(|(i, _)| PlotIx::from_usize(i))
        .collect();
    ReachabilityReport {
        options,
        states_explored: nodes.len(),
        complete: !truncated,
        endings,
        plot_depths,
        unreachable,
    }
}
