//! Epistemic dynamics: epistemic actions, the product update, co-presence,
//! observability and situation assessment.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::dsl::{DomainModel, KnowledgeRule};
use crate::htn::{advance, feasible_refinements, first_primitives, GroundAction, HtnError};
use crate::model::{
    apply_effects, satisfy, Agent, Atom, BeliefBase, Bindings, EpistemicState, LitTemplate, Literal,
    ModelError, World, WorldId,
};
use crate::trace::{trace, Topic};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum KernelError {
    #[error("it is {0}'s turn")]
    WrongTurn(Agent),
    #[error("no event: {0}")]
    NoEvent(String),
    #[error("designated event {0} is not applicable in the designated world")]
    PreconditionViolation(String),
    #[error("robot action budget exhausted")]
    BudgetExceeded,
    #[error("human action {0} is not applicable in every possible world")]
    NotApplicableEverywhere(String),
    #[error(transparent)]
    Htn(#[from] HtnError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// What an event does: a ground action or nothing.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EventAction {
    Act(GroundAction),
    Noop,
}

impl EventAction {
    pub fn is_noop(&self) -> bool {
        matches!(self, EventAction::Noop)
    }
}

impl fmt::Display for EventAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EventAction::Act(a) => write!(f, "{a}"),
            EventAction::Noop => f.write_str("noop"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Event {
    pub action: EventAction,
    pub source_world: WorldId,
    pub designated: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EpistemicAction {
    pub actor: Agent,
    pub events: Vec<Event>,
    pub copresence_condition: Vec<LitTemplate>,
    /// Value of the co-presence condition in the designated world when the
    /// action is executed.
    pub copresent: bool,
}

impl EpistemicAction {
    pub fn designated_event(&self) -> &Event {
        self.events
            .iter()
            .find(|e| e.designated)
            .expect("an epistemic action has a designated event")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObservationContext {
    pub observer: Agent,
    pub observer_place: String,
    pub co_present: bool,
    pub witnessed_event: Option<GroundAction>,
}

/// Does the co-presence `rule` hold under the places of `w`?
pub fn copresent(w: &World, rule: &[LitTemplate]) -> bool {
    let mut base = w.bel_r.clone();
    for (agent, place) in &w.agent_place {
        base.insert(Atom::new("at", [agent.name(), place.as_str()]));
    }
    !satisfy(rule, &base, &Bindings::new()).is_empty()
}

/// Can `ctx.observer` currently see the value of `lit`'s atom, judging by
/// the facts of `w`?
pub fn observable(
    dom: &DomainModel,
    lit: &Literal,
    ctx: &ObservationContext,
    rules: &[KnowledgeRule],
    w: &World,
) -> bool {
    if dom.is_inferable(&lit.atom.predicate) {
        return ctx.co_present
            && ctx.witnessed_event.as_ref().is_some_and(|a| {
                a.effects(dom)
                    .map(|(adds, dels)| adds.contains(&lit.atom) || dels.contains(&lit.atom))
                    .unwrap_or(false)
            });
    }
    let mut base = w.bel_r.clone();
    base.insert(Atom::new("at", [ctx.observer.name(), ctx.observer_place.as_str()]));
    rules.iter().any(|r| {
        r.target
            .unify(&lit.atom, &Bindings::new())
            .is_some_and(|b| !satisfy(&r.antecedent, &base, &b).is_empty())
    })
}

/// Robot events H anticipates in world `w`.
fn anticipated_robot_events(
    dom: &DomainModel,
    w: &World,
    copresent: bool,
    k: u32,
) -> Result<Vec<EventAction>, KernelError> {
    let mut out: Vec<EventAction> = Vec::new();
    let may_act = copresent || (!w.halted && w.separated_steps < k);
    if may_act {
        for a in first_primitives(dom, &w.tn_rh, &w.bel_rh, Agent::R)? {
            out.push(EventAction::Act(a));
        }
    }
    if !copresent || out.is_empty() {
        out.push(EventAction::Noop);
    }
    Ok(out)
}

/// Builds the epistemic action for `actor` executing `choice` in the
/// designated world.
///
/// For the robot, every world contributes the events H anticipates there;
/// while co-present only the other worlds do, since H sees the real action.
/// For the human, the same action is applied in every world.
pub fn build_epistemic_action(
    s: &EpistemicState,
    dom: &DomainModel,
    actor: Agent,
    choice: &EventAction,
) -> Result<EpistemicAction, KernelError> {
    if actor != s.actor_turn {
        return Err(KernelError::WrongTurn(s.actor_turn));
    }
    let d = s.designated_world();
    let cop = copresent(d, &dom.copresence);
    let mut events = Vec::new();
    match actor {
        Agent::R => {
            let own = first_primitives(dom, &d.tn_r, &d.bel_r, Agent::R)?;
            match choice {
                EventAction::Act(a) => {
                    if !own.contains(a) {
                        return Err(KernelError::NoEvent(format!("{a} is not a robot refinement")));
                    }
                    if !cop && (s.robot_action_budget == 0 || d.halted) {
                        return Err(KernelError::BudgetExceeded);
                    }
                }
                EventAction::Noop => {
                    if cop && !own.is_empty() {
                        return Err(KernelError::NoEvent(
                            "robot may not idle while co-present with work to do".into(),
                        ));
                    }
                }
            }
            events.push(Event {
                action: choice.clone(),
                source_world: d.id,
                designated: true,
            });
            for w in &s.worlds {
                if cop && w.id == d.id {
                    continue;
                }
                for e in anticipated_robot_events(dom, w, cop, s.k)? {
                    if w.id == d.id && &e == choice {
                        continue;
                    }
                    events.push(Event {
                        action: e,
                        source_world: w.id,
                        designated: false,
                    });
                }
            }
        }
        Agent::H => {
            let EventAction::Act(a) = choice else {
                // Human idling: nothing changes in any world.
                for w in &s.worlds {
                    events.push(Event {
                        action: EventAction::Noop,
                        source_world: w.id,
                        designated: w.id == d.id,
                    });
                }
                return Ok(EpistemicAction {
                    actor,
                    events,
                    copresence_condition: dom.copresence.clone(),
                    copresent: cop,
                });
            };
            for w in &s.worlds {
                if !first_primitives(dom, &w.tn_h, &w.bel_h, Agent::H)?.contains(a) {
                    return Err(KernelError::NotApplicableEverywhere(a.to_string()));
                }
                events.push(Event {
                    action: choice.clone(),
                    source_world: w.id,
                    designated: w.id == d.id,
                });
            }
        }
    }
    Ok(EpistemicAction {
        actor,
        events,
        copresence_condition: dom.copresence.clone(),
        copresent: cop,
    })
}

fn apply(dom: &DomainModel, bel: &BeliefBase, a: &GroundAction) -> Result<BeliefBase, KernelError> {
    let (adds, dels) = a.effects(dom)?;
    Ok(apply_effects(bel, &adds, &dels)?)
}

/// `s ⊗ a`: one successor world per (source world, applicable event).
pub fn product_update(
    s: &EpistemicState,
    a: &EpistemicAction,
    dom: &DomainModel,
) -> Result<EpistemicState, KernelError> {
    let cop = a.copresent;
    let designated_action = a.designated_event().action.clone();
    let mut worlds = Vec::new();
    let mut designated = None;
    let mut budget = s.robot_action_budget;
    for (i, e) in a.events.iter().enumerate() {
        let src = s
            .world(e.source_world)
            .ok_or_else(|| KernelError::NoEvent(format!("unknown world {}", e.source_world)))?;
        let mut w = src.clone();
        w.id = i as WorldId;
        w.distinguishable = false;
        match (a.actor, &e.action) {
            (Agent::R, EventAction::Act(act)) if e.designated => {
                if !act.applicable(dom, &src.bel_r)? {
                    return Err(KernelError::PreconditionViolation(act.to_string()));
                }
                w.bel_r = apply(dom, &src.bel_r, act)?;
                w.tn_r = advance(dom, &src.tn_r, &src.bel_r, Agent::R, act)?;
                w.bel_rh = apply(dom, &src.bel_rh, act)?;
                w.bel_h = apply(dom, &src.bel_h, act)?;
                if let Ok(tn) = advance(dom, &src.tn_rh, &src.bel_rh, Agent::R, act) {
                    w.tn_rh = tn;
                }
                if !cop {
                    budget = budget.checked_sub(1).ok_or(KernelError::BudgetExceeded)?;
                    w.separated_steps += 1;
                }
            }
            (Agent::R, EventAction::Act(act)) => {
                if !act.applicable(dom, &src.bel_rh)? {
                    continue;
                }
                w.bel_rh = apply(dom, &src.bel_rh, act)?;
                w.bel_h = apply(dom, &src.bel_h, act)?;
                w.tn_rh = advance(dom, &src.tn_rh, &src.bel_rh, Agent::R, act)?;
                w.bel_r = w.bel_rh.clone();
                w.tn_r = w.tn_rh.clone();
                if !cop {
                    w.separated_steps += 1;
                }
                w.distinguishable = cop && designated_action != e.action;
            }
            (Agent::R, EventAction::Noop) => {
                if !cop {
                    w.halted = true;
                }
                if !e.designated {
                    w.bel_r = w.bel_rh.clone();
                    w.tn_r = w.tn_rh.clone();
                    w.distinguishable = cop && !designated_action.is_noop();
                }
            }
            (Agent::H, EventAction::Act(act)) => {
                w.bel_r = apply(dom, &src.bel_r, act)?;
                w.bel_h = apply(dom, &src.bel_h, act)?;
                w.bel_rh = apply(dom, &src.bel_rh, act)?;
                w.tn_h = advance(dom, &src.tn_h, &src.bel_h, Agent::H, act)?;
            }
            (Agent::H, EventAction::Noop) => {}
        }
        w.sync_places();
        if e.designated {
            designated = Some(w.id);
        }
        worlds.push(w);
    }
    let designated = designated.ok_or_else(|| KernelError::NoEvent("no designated event".into()))?;
    let mut next = EpistemicState {
        worlds,
        designated,
        actor_turn: s.actor_turn.other(),
        robot_action_budget: budget,
        k: s.k,
        last_idle: designated_action.is_noop(),
        pending_inform: BTreeSet::new(),
    };
    next.canonicalize();
    Ok(next)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RemovalReason {
    /// H witnessed a different robot action.
    Witness,
    /// H observes this atom with a different value.
    Observed(Atom),
    /// Identical to another non-designated world.
    Duplicate,
}

impl fmt::Display for RemovalReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RemovalReason::Witness => f.write_str("witness"),
            RemovalReason::Observed(a) => write!(f, "{a}"),
            RemovalReason::Duplicate => f.write_str("duplicate"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Removal {
    pub world: WorldId,
    pub reason: RemovalReason,
}

/// The human's current observation context in `s`.
pub fn human_context(s: &EpistemicState, dom: &DomainModel) -> ObservationContext {
    let d = s.designated_world();
    ObservationContext {
        observer: Agent::H,
        observer_place: d.agent_place.get(&Agent::H).cloned().unwrap_or_default(),
        co_present: copresent(d, &dom.copresence),
        witnessed_event: None,
    }
}

/// Atoms whose value H can currently observe, with their true value.
pub fn observed_atoms(s: &EpistemicState, dom: &DomainModel) -> Vec<(Atom, bool)> {
    let d = s.designated_world();
    let ctx = human_context(s, dom);
    let mut universe: BTreeSet<&Atom> = BTreeSet::new();
    for w in &s.worlds {
        universe.extend(w.bel_r.iter());
        universe.extend(w.bel_rh.iter());
        universe.extend(w.bel_h.iter());
    }
    universe
        .into_iter()
        .filter(|atom| observable(dom, &Literal::pos((*atom).clone()), &ctx, &dom.rules, d))
        .map(|atom| (atom.clone(), d.bel_r.contains(atom)))
        .collect()
}

/// Removes every world H can tell apart from the designated one, lets the
/// survivors absorb what H observes, and merges identical hypotheses. When
/// the agents are co-present the separation counters are reset.
pub fn situation_assessment_logged(
    s: &EpistemicState,
    dom: &DomainModel,
) -> (EpistemicState, Vec<Removal>) {
    let mut removed = Vec::new();
    let observed = observed_atoms(s, dom);
    let mut kept: Vec<World> = Vec::new();
    for w in &s.worlds {
        if w.id == s.designated {
            kept.push(w.clone());
            continue;
        }
        if w.distinguishable {
            removed.push(Removal {
                world: w.id,
                reason: RemovalReason::Witness,
            });
            continue;
        }
        if let Some((atom, _)) = observed.iter().find(|(a, v)| w.bel_rh.contains(a) != *v) {
            removed.push(Removal {
                world: w.id,
                reason: RemovalReason::Observed(atom.clone()),
            });
            continue;
        }
        kept.push(w.clone());
    }
    let cop = copresent(s.designated_world(), &dom.copresence);
    for w in kept.iter_mut() {
        for (atom, value) in &observed {
            w.bel_rh.set(atom, *value);
            w.bel_h.set(atom, *value);
        }
        w.distinguishable = false;
        if cop {
            w.separated_steps = 0;
            w.halted = false;
        }
    }
    let mut seen: BTreeSet<String> = BTreeSet::new();
    let mut unique = Vec::with_capacity(kept.len());
    for w in kept {
        if w.id != s.designated && !seen.insert(w.content_key()) {
            removed.push(Removal {
                world: w.id,
                reason: RemovalReason::Duplicate,
            });
            continue;
        }
        unique.push(w);
    }
    for r in &removed {
        trace!(Topic::Sa, "SA: removed w{} reason={}", r.world, r.reason);
    }
    let mut next = EpistemicState {
        worlds: unique,
        designated: s.designated,
        actor_turn: s.actor_turn,
        robot_action_budget: if cop { s.k } else { s.robot_action_budget },
        k: s.k,
        last_idle: s.last_idle,
        pending_inform: s.pending_inform.clone(),
    };
    next.canonicalize();
    (next, removed)
}

pub fn situation_assessment(s: &EpistemicState, dom: &DomainModel) -> EpistemicState {
    situation_assessment_logged(s, dom).0
}

/// Human actions applicable in every world, and the designated-world human
/// actions that are blocked somewhere.
pub fn human_options(
    s: &EpistemicState,
    dom: &DomainModel,
) -> Result<(Vec<GroundAction>, Vec<GroundAction>), KernelError> {
    let d = s.designated_world();
    let mut common = first_primitives(dom, &d.tn_h, &d.bel_h, Agent::H)?;
    let candidates = common.clone();
    for w in &s.worlds {
        if w.id == d.id {
            continue;
        }
        let mine = first_primitives(dom, &w.tn_h, &w.bel_h, Agent::H)?;
        common.retain(|a| mine.contains(a));
    }
    let blocked = candidates.difference(&common).cloned().collect();
    Ok((common.into_iter().collect(), blocked))
}

/// Atoms H is unsure about (their value differs between worlds' `bel_h`)
/// that appear in the preconditions of `actions`.
pub fn uncertain_preconditions(
    s: &EpistemicState,
    dom: &DomainModel,
    actions: &[GroundAction],
) -> Result<BTreeSet<Atom>, KernelError> {
    let mut out = BTreeSet::new();
    for a in actions {
        for l in a.preconditions(dom)? {
            let mut values = s.worlds.iter().map(|w| w.bel_h.contains(&l.atom));
            let first = values.next().unwrap_or(false);
            if values.any(|v| v != first) {
                out.insert(l.atom);
            }
        }
    }
    Ok(out)
}

/// Convenience for callers that only need refinement counts.
pub fn robot_refinement_count(s: &EpistemicState, dom: &DomainModel) -> Result<usize, KernelError> {
    let d = s.designated_world();
    Ok(feasible_refinements(dom, &d.tn_r, &d.bel_r, Agent::R)?.len())
}
