//! AND/OR breadth-first search over epistemic states.
//!
//! Robot turns are OR nodes, human turns are AND nodes. Every child state is
//! situation-assessed before it is stored; states with equal canonical form
//! share one node. The search stops as soon as the root is solved.

mod expand;
mod graph;
mod parallel;
mod policy;
mod simulate;

use std::collections::{HashMap, VecDeque};
use std::time::Instant;

use thiserror::Error;

use crate::dsl::{DomainModel, ProblemInstance};
use crate::kernel::{copresent, situation_assessment, KernelError};
use crate::model::Agent;
use crate::trace::{trace, Topic};

pub use expand::{
    communicate, eval_terminal, expand, initial_state, is_terminal, synthesize_communication, Edge,
};
pub use graph::{propagate_revised_status, AndOrGraph, NodeId, NodeKind, SearchNode, Status};
pub use parallel::{parallelize, ExecutionSchedule, ScheduleStep};
pub use policy::{extract_joint_solution, Policy, PolicyKind, PolicyNode};
pub use simulate::{apply_edge, simulate_exhaustive, SimError, SimStep, SimulationTrace};

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("no joint solution: the search space is exhausted")]
    NoSolution { metrics: Metrics },
    #[error("search limit of {0} states reached")]
    LimitReached(usize),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Metrics {
    /// Distinct states taken off the queue.
    pub states: usize,
    /// Largest number of worlds in any of those states.
    pub max_worlds: usize,
    /// Traces of the extracted policy.
    pub leaves: usize,
    pub time_ms: u128,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchOptions {
    pub max_states: usize,
    /// Stop as soon as the root is solved. Without it the whole reachable
    /// graph is built.
    pub stop_when_solved: bool,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            max_states: 2_000_000,
            stop_when_solved: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub graph: AndOrGraph,
    pub policy: Policy,
    pub metrics: Metrics,
}

/// Runs the search to completion and extracts a policy.
pub fn solve(prob: &ProblemInstance, dom: &DomainModel) -> Result<Solution, SolveError> {
    solve_with(prob, dom, SearchOptions::default())
}

pub fn solve_with(
    prob: &ProblemInstance,
    dom: &DomainModel,
    opts: SearchOptions,
) -> Result<Solution, SolveError> {
    let start = Instant::now();
    let graph = search(prob, dom, opts)?;
    let mut metrics = graph.metrics;
    if graph.nodes[graph.root].status != Status::Done {
        metrics.time_ms = start.elapsed().as_millis();
        return Err(SolveError::NoSolution { metrics });
    }
    let policy = extract_joint_solution(&graph, &prob.name);
    metrics.leaves = policy.leaves();
    metrics.time_ms = start.elapsed().as_millis();
    Ok(Solution {
        graph,
        policy,
        metrics,
    })
}

/// Builds the AND/OR graph breadth-first until the root is solved or the
/// queue runs dry. The returned graph carries the search metrics, except
/// `leaves` and `time_ms`.
pub fn search(
    prob: &ProblemInstance,
    dom: &DomainModel,
    opts: SearchOptions,
) -> Result<AndOrGraph, SolveError> {
    let root_state = situation_assessment(&initial_state(prob), dom);
    let cop = copresent(root_state.designated_world(), &dom.copresence);
    let mut g = AndOrGraph::new(root_state, cop);
    let mut index: HashMap<String, NodeId> = HashMap::new();
    index.insert(g.nodes[0].state.canonical_string(), 0);
    let mut queue = VecDeque::from([0]);
    while let Some(id) = queue.pop_front() {
        if opts.stop_when_solved && g.nodes[g.root].status != Status::Unknown {
            break;
        }
        if opts.stop_when_solved && g.nodes[id].status != Status::Unknown {
            continue;
        }
        g.metrics.states += 1;
        g.metrics.max_worlds = g.metrics.max_worlds.max(g.nodes[id].state.len());
        if g.metrics.states > opts.max_states {
            return Err(SolveError::LimitReached(opts.max_states));
        }
        let children = expand(&g.nodes[id].state, dom, prob.comm_allowed)?;
        g.nodes[id].expanded = true;
        trace!(
            Topic::Expand,
            "expand n{id} {} |W|={} children={}",
            kind_name(g.nodes[id].kind),
            g.nodes[id].state.len(),
            children.len()
        );
        if children.is_empty() {
            let ok = is_terminal(&g.nodes[id].state, dom) && eval_terminal(&g.nodes[id].state, dom);
            g.set_status(id, if ok { Status::Done } else { Status::Dead });
            propagate_revised_status(&mut g, id);
            continue;
        }
        for (edge, state) in children {
            let key = state.canonical_string();
            let child = match index.get(&key) {
                Some(&c) => c,
                None => {
                    let cop = copresent(state.designated_world(), &dom.copresence);
                    let c = g.add_node(state, g.nodes[id].depth + 1, cop);
                    index.insert(key, c);
                    queue.push_back(c);
                    c
                }
            };
            g.link(id, edge, child);
        }
        if g.recompute(id) {
            propagate_revised_status(&mut g, id);
        }
    }
    Ok(g)
}

fn kind_name(k: NodeKind) -> &'static str {
    match k {
        NodeKind::Or => "OR",
        NodeKind::And => "AND",
    }
}

pub(crate) fn kind_of(turn: Agent) -> NodeKind {
    match turn {
        Agent::R => NodeKind::Or,
        Agent::H => NodeKind::And,
    }
}
