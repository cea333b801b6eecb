use std::collections::BTreeSet;
use std::fmt;

use crate::dsl::{DomainModel, ProblemInstance};
use crate::htn::{alignment_diff, can_complete, first_primitives, GroundAction, TaskNetwork};
use crate::kernel::{
    build_epistemic_action, copresent, human_options, product_update, situation_assessment,
    uncertain_preconditions, EventAction, KernelError,
};
use crate::model::{Agent, Atom, EpistemicState, Literal, World};

/// Label of an edge of the AND/OR graph.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Edge {
    Act(GroundAction),
    /// The robot does nothing while the agents are apart.
    Noop,
    /// The acting agent lets the other proceed while co-present.
    Idle,
    /// The human asks the robot about one fact.
    Ask(Atom),
    /// The robot tells the human the listed facts.
    Inform(Vec<Literal>),
    /// The human waits to be told something.
    Wait,
}

impl Edge {
    pub fn is_communication(&self) -> bool {
        matches!(self, Edge::Ask(_) | Edge::Inform(_) | Edge::Wait)
    }

    pub fn ontic_action(&self) -> Option<&GroundAction> {
        match self {
            Edge::Act(a) => Some(a),
            _ => None,
        }
    }

    pub fn parse(text: &str) -> Option<Edge> {
        let text = text.trim();
        match text {
            "noop" => return Some(Edge::Noop),
            "idle" => return Some(Edge::Idle),
            "wait" => return Some(Edge::Wait),
            _ => {}
        }
        if let Some(rest) = text.strip_prefix("ask-") {
            return Atom::parse(rest).map(Edge::Ask);
        }
        if let Some(rest) = text.strip_prefix("inform-") {
            let lits: Option<Vec<Literal>> = rest
                .split(" & ")
                .map(|l| match l.strip_prefix("not ") {
                    Some(a) => Atom::parse(a).map(Literal::neg),
                    None => Atom::parse(l).map(Literal::pos),
                })
                .collect();
            return lits.filter(|l| !l.is_empty()).map(Edge::Inform);
        }
        GroundAction::parse(text).map(Edge::Act)
    }
}

impl fmt::Display for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Edge::Act(a) => write!(f, "{a}"),
            Edge::Noop => f.write_str("noop"),
            Edge::Idle => f.write_str("idle"),
            Edge::Wait => f.write_str("wait"),
            Edge::Ask(p) => write!(f, "ask-{p}"),
            Edge::Inform(ls) => {
                f.write_str("inform-")?;
                for (i, l) in ls.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" & ")?;
                    }
                    write!(f, "{l}")?;
                }
                Ok(())
            }
        }
    }
}

/// The initial epistemic state of a problem, before situation assessment.
pub fn initial_state(prob: &ProblemInstance) -> EpistemicState {
    let w = World::initial(
        0,
        prob.ground_truth.clone(),
        prob.initial_bel_h.clone(),
        TaskNetwork::new(prob.root_task_r.clone()),
        TaskNetwork::new(prob.root_task_h.clone()),
    );
    EpistemicState::initial(w, prob.first_actor, prob.k)
}

/// Both designated task networks are finished: nothing is left that needs a
/// primitive action.
pub fn is_terminal(s: &EpistemicState, dom: &DomainModel) -> bool {
    let d = s.designated_world();
    can_complete(dom, &d.tn_r, &d.bel_r) && can_complete(dom, &d.tn_h, &d.bel_h)
}

/// A terminal state is solved only if, in every world H still considers,
/// both agents' tasks are finished.
pub fn eval_terminal(s: &EpistemicState, dom: &DomainModel) -> bool {
    s.worlds
        .iter()
        .all(|w| can_complete(dom, &w.tn_h, &w.bel_h) && can_complete(dom, &w.tn_rh, &w.bel_rh))
}

/// Tells H the designated value of every atom in `facts`: worlds claiming
/// otherwise are dropped, survivors adopt the values, and the other agent
/// moves next.
pub fn communicate(s: &EpistemicState, dom: &DomainModel, facts: &[Atom]) -> EpistemicState {
    let d = s.designated_world().clone();
    let mut next = s.clone();
    next.worlds.retain(|w| {
        w.id == d.id || facts.iter().all(|p| w.bel_rh.contains(p) == d.bel_r.contains(p))
    });
    for w in next.worlds.iter_mut() {
        for p in facts {
            let v = d.bel_r.contains(p);
            w.bel_rh.set(p, v);
            w.bel_h.set(p, v);
        }
    }
    next.actor_turn = s.actor_turn.other();
    next.last_idle = false;
    next.pending_inform.clear();
    next.canonicalize();
    situation_assessment(&next, dom)
}

/// Ask and inform variants of communicating `p`. Returns `None` when the
/// worlds already agree on `p`.
pub fn synthesize_communication(
    s: &EpistemicState,
    dom: &DomainModel,
    p: &Atom,
) -> Option<(EpistemicState, EpistemicState)> {
    let mut values = s.worlds.iter().map(|w| w.bel_h.contains(p) || w.bel_rh.contains(p));
    let first = values.next()?;
    let split = s.worlds.iter().any(|w| w.bel_h.contains(p) != first || w.bel_rh.contains(p) != first);
    if !split {
        return None;
    }
    let mut ask_from = s.clone();
    ask_from.actor_turn = Agent::H;
    let mut inform_from = s.clone();
    inform_from.actor_turn = Agent::R;
    Some((
        communicate(&ask_from, dom, std::slice::from_ref(p)),
        communicate(&inform_from, dom, std::slice::from_ref(p)),
    ))
}

fn step(
    s: &EpistemicState,
    dom: &DomainModel,
    actor: Agent,
    choice: EventAction,
) -> Result<EpistemicState, KernelError> {
    let a = build_epistemic_action(s, dom, actor, &choice)?;
    Ok(situation_assessment(&product_update(s, &a, dom)?, dom))
}

/// Children of a search node, as `(edge, situation-assessed state)` pairs in
/// a fixed order.
pub fn expand(
    s: &EpistemicState,
    dom: &DomainModel,
    comm_allowed: bool,
) -> Result<Vec<(Edge, EpistemicState)>, KernelError> {
    if is_terminal(s, dom) {
        return Ok(Vec::new());
    }
    match s.actor_turn {
        Agent::R => expand_robot(s, dom, comm_allowed),
        Agent::H => expand_human(s, dom, comm_allowed),
    }
}

fn inform_child(s: &EpistemicState, dom: &DomainModel, facts: Vec<Literal>) -> (Edge, EpistemicState) {
    let atoms: Vec<Atom> = facts.iter().map(|l| l.atom.clone()).collect();
    (Edge::Inform(facts), communicate(s, dom, &atoms))
}

fn truth(s: &EpistemicState, p: &Atom) -> Literal {
    if s.designated_world().bel_r.contains(p) {
        Literal::pos(p.clone())
    } else {
        Literal::neg(p.clone())
    }
}

fn expand_robot(
    s: &EpistemicState,
    dom: &DomainModel,
    comm_allowed: bool,
) -> Result<Vec<(Edge, EpistemicState)>, KernelError> {
    let d = s.designated_world();
    let cop = copresent(d, &dom.copresence);
    let mut out = Vec::new();
    if !s.pending_inform.is_empty() {
        for p in &s.pending_inform {
            out.push(inform_child(s, dom, vec![truth(s, p)]));
        }
        return Ok(out);
    }
    if comm_allowed && cop {
        let mut informed: BTreeSet<Vec<Literal>> = BTreeSet::new();
        if let Ok(diff) = alignment_diff(dom, &d.bel_r, &d.tn_r, &d.bel_rh, &d.tn_rh) {
            if !diff.is_empty() {
                informed.insert(diff.into_iter().collect());
            }
        }
        let (_, blocked) = human_options(s, dom)?;
        for p in uncertain_preconditions(s, dom, &blocked)? {
            informed.insert(vec![truth(s, &p)]);
        }
        for facts in informed {
            out.push(inform_child(s, dom, facts));
        }
    }
    let own = first_primitives(dom, &d.tn_r, &d.bel_r, Agent::R)?;
    if cop || (s.robot_action_budget > 0 && !d.halted) {
        for a in &own {
            out.push((Edge::Act(a.clone()), step(s, dom, Agent::R, EventAction::Act(a.clone()))?));
        }
    }
    if !cop {
        out.push((Edge::Noop, step(s, dom, Agent::R, EventAction::Noop)?));
    } else if own.is_empty() && !can_complete(dom, &d.tn_h, &d.bel_h) && !s.last_idle {
        out.push((Edge::Idle, step(s, dom, Agent::R, EventAction::Noop)?));
    }
    Ok(out)
}

fn expand_human(
    s: &EpistemicState,
    dom: &DomainModel,
    comm_allowed: bool,
) -> Result<Vec<(Edge, EpistemicState)>, KernelError> {
    let d = s.designated_world();
    let cop = copresent(d, &dom.copresence);
    let mut out = Vec::new();
    let (common, blocked) = human_options(s, dom)?;
    for a in &common {
        out.push((Edge::Act(a.clone()), step(s, dom, Agent::H, EventAction::Act(a.clone()))?));
    }
    let uncertain = if comm_allowed && cop {
        uncertain_preconditions(s, dom, &blocked)?
    } else {
        BTreeSet::new()
    };
    for p in &uncertain {
        let (ask, _) = synthesize_communication(s, dom, p).expect("atom is uncertain");
        out.push((Edge::Ask(p.clone()), ask));
    }
    // Waiting only makes sense when nothing else can be done.
    if common.is_empty() && !uncertain.is_empty() {
        let mut waiting = s.clone();
        waiting.actor_turn = Agent::R;
        waiting.last_idle = false;
        waiting.pending_inform = uncertain;
        out.push((Edge::Wait, waiting));
    }
    if out.is_empty() && !can_complete(dom, &d.tn_r, &d.bel_r) && !s.last_idle {
        out.push((Edge::Idle, step(s, dom, Agent::H, EventAction::Noop)?));
    }
    Ok(out)
}
