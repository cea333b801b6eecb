use serde::{Deserialize, Serialize};

use super::{AndOrGraph, Edge, NodeId, NodeKind, Status};
use crate::model::Agent;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PolicyKind {
    #[serde(rename = "OR")]
    Or,
    #[serde(rename = "AND")]
    And,
    #[serde(rename = "LEAF")]
    Leaf,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyNode {
    pub id: usize,
    pub kind: PolicyKind,
    /// Agent whose turn it is at this node.
    pub actor: Agent,
    /// Label of the edge leading here; `None` at the root.
    pub edge: Option<String>,
    pub copresent: bool,
    pub children: Vec<usize>,
}

/// A joint solution unfolded into a tree. Node 0 is the root.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Policy {
    pub instance: String,
    #[serde(default)]
    pub domain_file: Option<String>,
    #[serde(default)]
    pub problem_file: Option<String>,
    pub nodes: Vec<PolicyNode>,
}

impl Policy {
    pub fn leaves(&self) -> usize {
        self.nodes.iter().filter(|n| n.kind == PolicyKind::Leaf).count()
    }

    pub fn root(&self) -> &PolicyNode {
        &self.nodes[0]
    }

    pub fn node(&self, id: usize) -> Option<&PolicyNode> {
        self.nodes.get(id)
    }

    /// Root-to-leaf node id paths, in tree order.
    pub fn traces(&self) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        let mut stack = vec![vec![0usize]];
        while let Some(path) = stack.pop() {
            let last = *path.last().expect("paths are non-empty");
            let n = &self.nodes[last];
            if n.children.is_empty() {
                out.push(path);
                continue;
            }
            for &c in n.children.iter().rev() {
                let mut p = path.clone();
                p.push(c);
                stack.push(p);
            }
        }
        out
    }

    /// Largest number of edges on any trace.
    pub fn worst_case_depth(&self) -> usize {
        self.traces().iter().map(|t| t.len() - 1).max().unwrap_or(0)
    }

    pub fn communication_edges(&self) -> usize {
        self.nodes
            .iter()
            .filter_map(|n| n.edge.as_deref())
            .filter(|e| Edge::parse(e).is_some_and(|e| e.is_communication()))
            .count()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("policies serialize")
    }

    pub fn from_json(text: &str) -> Result<Policy, serde_json::Error> {
        serde_json::from_str(text)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct Cost {
    depth: usize,
    comm: usize,
}

const INF: Cost = Cost {
    depth: usize::MAX,
    comm: usize::MAX,
};

/// Best choice at every solved OR node: least worst-case depth, then fewest
/// communication edges, then the smallest edge label.
fn best_choices(g: &AndOrGraph) -> (Vec<Cost>, Vec<Option<usize>>) {
    let n = g.nodes.len();
    let mut cost = vec![INF; n];
    let mut choice: Vec<Option<usize>> = vec![None; n];
    let done = |id: NodeId| g.nodes[id].status == Status::Done;
    loop {
        let mut changed = false;
        for id in 0..n {
            if !done(id) {
                continue;
            }
            let node = &g.nodes[id];
            let new = if node.children.is_empty() {
                (Cost { depth: 0, comm: 0 }, None)
            } else {
                match node.kind {
                    NodeKind::Or => {
                        let mut best: Option<(Cost, String, usize)> = None;
                        for (i, (e, c)) in node.children.iter().enumerate() {
                            if !done(*c) || cost[*c] == INF {
                                continue;
                            }
                            let cc = Cost {
                                depth: cost[*c].depth + 1,
                                comm: cost[*c].comm + e.is_communication() as usize,
                            };
                            let label = e.to_string();
                            let better = match &best {
                                None => true,
                                Some((bc, bl, _)) => (cc, &label) < (*bc, bl),
                            };
                            if better {
                                best = Some((cc, label, i));
                            }
                        }
                        match best {
                            Some((c, _, i)) => (c, Some(i)),
                            None => continue,
                        }
                    }
                    NodeKind::And => {
                        if node.children.iter().any(|(_, c)| cost[*c] == INF) {
                            continue;
                        }
                        let depth = 1 + node.children.iter().map(|(_, c)| cost[*c].depth).max().unwrap_or(0);
                        let comm = node
                            .children
                            .iter()
                            .map(|(e, c)| cost[*c].comm + e.is_communication() as usize)
                            .sum();
                        (Cost { depth, comm }, None)
                    }
                }
            };
            if new.0 < cost[id] {
                cost[id] = new.0;
                choice[id] = new.1;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    (cost, choice)
}

/// Unfolds the best solution below the (solved) root into a tree.
pub fn extract_joint_solution(g: &AndOrGraph, instance: &str) -> Policy {
    let (_, choice) = best_choices(g);
    let mut nodes: Vec<PolicyNode> = Vec::new();
    // (graph node, edge label, policy parent)
    let mut stack: Vec<(NodeId, Option<String>, Option<usize>)> = vec![(g.root, None, None)];
    while let Some((gid, edge, parent)) = stack.pop() {
        let node = &g.nodes[gid];
        let chosen: Vec<&(Edge, NodeId)> = if node.children.is_empty() {
            Vec::new()
        } else {
            match node.kind {
                NodeKind::Or => choice[gid].map(|i| &node.children[i]).into_iter().collect(),
                NodeKind::And => node.children.iter().collect(),
            }
        };
        let pid = nodes.len();
        nodes.push(PolicyNode {
            id: pid,
            kind: if chosen.is_empty() {
                PolicyKind::Leaf
            } else if node.kind == NodeKind::Or {
                PolicyKind::Or
            } else {
                PolicyKind::And
            },
            actor: node.state.actor_turn,
            edge,
            copresent: node.copresent,
            children: Vec::new(),
        });
        if let Some(p) = parent {
            nodes[p].children.push(pid);
        }
        for (e, c) in chosen.into_iter().rev() {
            stack.push((*c, Some(e.to_string()), Some(pid)));
        }
    }
    Policy {
        instance: instance.to_string(),
        domain_file: None,
        problem_file: None,
        nodes,
    }
}
