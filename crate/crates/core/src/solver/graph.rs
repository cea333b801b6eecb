use super::{kind_of, Edge, Metrics};
use crate::model::EpistemicState;

pub type NodeId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NodeKind {
    /// The robot chooses one child.
    Or,
    /// Every human alternative must be covered.
    And,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Status {
    Unknown,
    Done,
    Dead,
}

#[derive(Debug, Clone)]
pub struct SearchNode {
    pub state: EpistemicState,
    pub kind: NodeKind,
    pub status: Status,
    pub depth: usize,
    /// Co-presence in the designated world.
    pub copresent: bool,
    pub expanded: bool,
    pub children: Vec<(Edge, NodeId)>,
    pub parents: Vec<NodeId>,
}

#[derive(Debug, Clone)]
pub struct AndOrGraph {
    pub nodes: Vec<SearchNode>,
    pub root: NodeId,
    pub metrics: Metrics,
}

impl AndOrGraph {
    pub fn new(root: EpistemicState, copresent: bool) -> Self {
        let mut g = AndOrGraph {
            nodes: Vec::new(),
            root: 0,
            metrics: Metrics::default(),
        };
        g.add_node(root, 0, copresent);
        g
    }

    pub fn add_node(&mut self, state: EpistemicState, depth: usize, copresent: bool) -> NodeId {
        let kind = kind_of(state.actor_turn);
        self.nodes.push(SearchNode {
            state,
            kind,
            status: Status::Unknown,
            depth,
            copresent,
            expanded: false,
            children: Vec::new(),
            parents: Vec::new(),
        });
        self.nodes.len() - 1
    }

    pub fn link(&mut self, parent: NodeId, edge: Edge, child: NodeId) {
        self.nodes[parent].children.push((edge, child));
        if !self.nodes[child].parents.contains(&parent) {
            self.nodes[child].parents.push(parent);
        }
    }

    pub fn set_status(&mut self, id: NodeId, status: Status) {
        self.nodes[id].status = status;
    }

    /// Status implied by the children of an expanded node.
    pub fn derived_status(&self, id: NodeId) -> Status {
        let n = &self.nodes[id];
        if !n.expanded || n.children.is_empty() {
            return n.status;
        }
        let st = |c: &(Edge, NodeId)| self.nodes[c.1].status;
        match n.kind {
            NodeKind::Or => {
                if n.children.iter().any(|c| st(c) == Status::Done) {
                    Status::Done
                } else if n.children.iter().all(|c| st(c) == Status::Dead) {
                    Status::Dead
                } else {
                    Status::Unknown
                }
            }
            NodeKind::And => {
                if n.children.iter().any(|c| st(c) == Status::Dead) {
                    Status::Dead
                } else if n.children.iter().all(|c| st(c) == Status::Done) {
                    Status::Done
                } else {
                    Status::Unknown
                }
            }
        }
    }

    /// Re-derives the status of an unresolved node; true if it changed.
    pub fn recompute(&mut self, id: NodeId) -> bool {
        if self.nodes[id].status != Status::Unknown {
            return false;
        }
        let s = self.derived_status(id);
        if s != Status::Unknown {
            self.nodes[id].status = s;
            true
        } else {
            false
        }
    }

    pub fn is_solved(&self) -> bool {
        self.nodes[self.root].status == Status::Done
    }
}

/// Pushes the resolved status of `id` up through its ancestors until no
/// further node changes.
pub fn propagate_revised_status(g: &mut AndOrGraph, id: NodeId) {
    let mut work = vec![id];
    while let Some(n) = work.pop() {
        let parents = g.nodes[n].parents.clone();
        for p in parents {
            if g.recompute(p) {
                work.push(p);
            }
        }
    }
}
