use std::collections::BTreeSet;

use thiserror::Error;

use super::{communicate, eval_terminal, expand, initial_state, is_terminal, Edge, Policy, PolicyKind};
use crate::dsl::{DomainModel, ProblemInstance};
use crate::kernel::{
    build_epistemic_action, copresent, human_options, product_update, situation_assessment,
    uncertain_preconditions, EventAction, KernelError,
};
use crate::model::{Agent, EpistemicState};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SimError {
    #[error("node {node}: cannot read edge label `{edge}`")]
    BadEdge { node: usize, edge: String },
    #[error("node {node}: expected {expected} to act")]
    TurnMismatch { node: usize, expected: Agent },
    #[error("node {node}: `{edge}` is not a legal step: {reason}")]
    Illegal { node: usize, edge: String, reason: String },
    #[error("node {node}: human alternative `{edge}` is not covered")]
    Uncovered { node: usize, edge: String },
    #[error("node {node}: human action `{edge}` is not applicable in every world")]
    NotApplicable { node: usize, edge: String },
    #[error("node {node}: more than {k} robot actions while apart")]
    Budget { node: usize, k: u32 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimStep {
    pub actor: Agent,
    pub action: String,
    pub copresent: bool,
    /// Worlds left after situation assessment.
    pub worlds: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimulationTrace {
    pub steps: Vec<SimStep>,
    pub done: bool,
}

/// Applies one edge to a state, checking only what the edge itself
/// requires.
pub fn apply_edge(
    s: &EpistemicState,
    dom: &DomainModel,
    edge: &Edge,
) -> Result<EpistemicState, KernelError> {
    let actor = s.actor_turn;
    match edge {
        Edge::Act(a) => {
            let ea = build_epistemic_action(s, dom, actor, &EventAction::Act(a.clone()))?;
            Ok(situation_assessment(&product_update(s, &ea, dom)?, dom))
        }
        Edge::Noop | Edge::Idle => {
            let ea = build_epistemic_action(s, dom, actor, &EventAction::Noop)?;
            Ok(situation_assessment(&product_update(s, &ea, dom)?, dom))
        }
        Edge::Inform(ls) => {
            let atoms: Vec<_> = ls.iter().map(|l| l.atom.clone()).collect();
            Ok(communicate(s, dom, &atoms))
        }
        Edge::Ask(p) => Ok(communicate(s, dom, std::slice::from_ref(p))),
        Edge::Wait => {
            let (_, blocked) = human_options(s, dom)?;
            let mut w = s.clone();
            w.actor_turn = Agent::R;
            w.last_idle = false;
            w.pending_inform = uncertain_preconditions(s, dom, &blocked)?;
            Ok(w)
        }
    }
}

struct Walker<'a> {
    dom: &'a DomainModel,
    prob: &'a ProblemInstance,
    pol: &'a Policy,
    out: Vec<SimulationTrace>,
}

impl Walker<'_> {
    fn walk(
        &mut self,
        id: usize,
        s: EpistemicState,
        steps: Vec<SimStep>,
        apart_steps: u32,
    ) -> Result<(), SimError> {
        let node = self.pol.node(id).ok_or(SimError::BadEdge {
            node: id,
            edge: "<missing node>".into(),
        })?;
        if node.actor != s.actor_turn {
            return Err(SimError::TurnMismatch {
                node: id,
                expected: s.actor_turn,
            });
        }
        if node.kind == PolicyKind::Leaf || node.children.is_empty() {
            let done = node.kind == PolicyKind::Leaf && is_terminal(&s, self.dom) && eval_terminal(&s, self.dom);
            self.out.push(SimulationTrace { steps, done });
            return Ok(());
        }
        let cop = copresent(s.designated_world(), &self.dom.copresence);
        let mut seen = BTreeSet::new();
        for &c in &node.children {
            let child = self.pol.node(c).ok_or(SimError::BadEdge {
                node: c,
                edge: "<missing node>".into(),
            })?;
            let label = child.edge.clone().unwrap_or_default();
            let edge = Edge::parse(&label).ok_or(SimError::BadEdge {
                node: c,
                edge: label.clone(),
            })?;
            seen.insert(label.clone());
            if let (Agent::H, Edge::Act(a)) = (s.actor_turn, &edge) {
                for w in &s.worlds {
                    let ok = a.applicable(self.dom, &w.bel_h).unwrap_or(false);
                    if !ok {
                        return Err(SimError::NotApplicable {
                            node: c,
                            edge: label,
                        });
                    }
                }
            }
            let next = apply_edge(&s, self.dom, &edge).map_err(|e| SimError::Illegal {
                node: c,
                edge: label.clone(),
                reason: e.to_string(),
            })?;
            let robot_apart = s.actor_turn == Agent::R && !cop && edge.ontic_action().is_some();
            let used = if robot_apart { apart_steps + 1 } else { apart_steps };
            if used > self.prob.k {
                return Err(SimError::Budget {
                    node: c,
                    k: self.prob.k,
                });
            }
            let next_cop = copresent(next.designated_world(), &self.dom.copresence);
            let mut st = steps.clone();
            st.push(SimStep {
                actor: s.actor_turn,
                action: label,
                copresent: next_cop,
                worlds: next.len(),
            });
            self.walk(c, next, st, if next_cop { 0 } else { used })?;
        }
        if s.actor_turn == Agent::H {
            // Every alternative open to the human must be handled.
            let options = expand(&s, self.dom, self.prob.comm_allowed).map_err(|e| SimError::Illegal {
                node: id,
                edge: "<expand>".into(),
                reason: e.to_string(),
            })?;
            for (e, _) in options {
                let l = e.to_string();
                if !seen.contains(&l) {
                    return Err(SimError::Uncovered { node: id, edge: l });
                }
            }
        }
        Ok(())
    }
}

/// Replays `pol` from the initial state of `prob`, following every human
/// alternative. Structural problems are errors; a trace that does not end in
/// a solved state is reported with `done == false`.
pub fn simulate_exhaustive(
    dom: &DomainModel,
    prob: &ProblemInstance,
    pol: &Policy,
) -> Result<Vec<SimulationTrace>, SimError> {
    let s = situation_assessment(&initial_state(prob), dom);
    let mut w = Walker {
        dom,
        prob,
        pol,
        out: Vec::new(),
    };
    w.walk(0, s, Vec::new(), 0)?;
    Ok(w.out)
}
