//! Ground facts, belief bases, possible worlds and epistemic states.
//!
//! Belief bases are closed-world: only positive atoms are stored and an
//! absent atom reads as false. Uncertainty is expressed across worlds, never
//! inside a single base.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::htn::TaskNetwork;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("malformed literal {literal}: predicate `{predicate}` expects {expected} argument(s)")]
    MalformedLiteral {
        literal: String,
        predicate: String,
        expected: usize,
    },
    #[error("unknown predicate `{0}`")]
    UnknownPredicate(String),
    #[error("conflicting effects: {0} is both added and deleted")]
    ConflictingEffects(String),
    #[error("knowledge operators nested {0} deep; at most 2 levels are supported")]
    UnsupportedNesting(usize),
}

/// The two agents of the collaboration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Agent {
    R,
    H,
}

impl Agent {
    pub fn other(self) -> Agent {
        match self {
            Agent::R => Agent::H,
            Agent::H => Agent::R,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Agent::R => "R",
            Agent::H => "H",
        }
    }

    pub fn parse(s: &str) -> Option<Agent> {
        match s {
            "R" => Some(Agent::R),
            "H" => Some(Agent::H),
            _ => None,
        }
    }
}

impl fmt::Display for Agent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A ground atom such as `inside(c_r, box_1)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Atom {
    pub predicate: String,
    pub args: Vec<String>,
}

impl Atom {
    pub fn new<S: Into<String>>(predicate: &str, args: impl IntoIterator<Item = S>) -> Self {
        Atom {
            predicate: predicate.to_string(),
            args: args.into_iter().map(Into::into).collect(),
        }
    }

    /// Parses `pred(a, b)` or `pred`. Used by tests and the policy replayer.
    pub fn parse(text: &str) -> Option<Atom> {
        let text = text.trim();
        match text.find('(') {
            None => {
                if text.is_empty() {
                    None
                } else {
                    Some(Atom::new::<String>(text, vec![]))
                }
            }
            Some(open) => {
                let close = text.rfind(')')?;
                let inner = &text[open + 1..close];
                let args: Vec<String> = inner
                    .split(',')
                    .map(|a| a.trim().to_string())
                    .filter(|a| !a.is_empty())
                    .collect();
                Some(Atom {
                    predicate: text[..open].trim().to_string(),
                    args,
                })
            }
        }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.predicate)?;
        for (i, a) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            f.write_str(a)?;
        }
        f.write_str(")")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Literal {
    pub atom: Atom,
    pub positive: bool,
}

impl Literal {
    pub fn pos(atom: Atom) -> Self {
        Literal {
            atom,
            positive: true,
        }
    }

    pub fn neg(atom: Atom) -> Self {
        Literal {
            atom,
            positive: false,
        }
    }

    pub fn negated(&self) -> Self {
        Literal {
            atom: self.atom.clone(),
            positive: !self.positive,
        }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if !self.positive {
            f.write_str("not ")?;
        }
        write!(f, "{}", self.atom)
    }
}

/// Predicate name to arity, used to reject malformed literals.
pub type Signature = BTreeMap<String, usize>;

fn check_arity(sig: &Signature, lit: &Literal) -> Result<(), ModelError> {
    match sig.get(&lit.atom.predicate) {
        None => Err(ModelError::UnknownPredicate(lit.atom.predicate.clone())),
        Some(&n) if n != lit.atom.args.len() => Err(ModelError::MalformedLiteral {
            literal: lit.to_string(),
            predicate: lit.atom.predicate.clone(),
            expected: n,
        }),
        Some(_) => Ok(()),
    }
}

/// A definite, closed-world set of facts.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BeliefBase {
    atoms: BTreeSet<Atom>,
}

impl BeliefBase {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_atoms(atoms: impl IntoIterator<Item = Atom>) -> Self {
        BeliefBase {
            atoms: atoms.into_iter().collect(),
        }
    }

    pub fn contains(&self, atom: &Atom) -> bool {
        self.atoms.contains(atom)
    }

    pub fn holds(&self, lit: &Literal) -> bool {
        self.contains(&lit.atom) == lit.positive
    }

    /// Closed-world entailment with an arity check against `sig`.
    pub fn entails(&self, sig: &Signature, lit: &Literal) -> Result<bool, ModelError> {
        check_arity(sig, lit)?;
        Ok(self.holds(lit))
    }

    pub fn insert(&mut self, atom: Atom) -> bool {
        self.atoms.insert(atom)
    }

    pub fn remove(&mut self, atom: &Atom) -> bool {
        self.atoms.remove(atom)
    }

    pub fn set(&mut self, atom: &Atom, value: bool) {
        if value {
            self.atoms.insert(atom.clone());
        } else {
            self.atoms.remove(atom);
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &Atom> {
        self.atoms.iter()
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// All atoms with the given predicate, in order.
    pub fn with_predicate<'a>(&'a self, predicate: &'a str) -> impl Iterator<Item = &'a Atom> + 'a {
        let start = Atom {
            predicate: predicate.to_string(),
            args: Vec::new(),
        };
        self.atoms
            .range(start..)
            .take_while(move |a| a.predicate == predicate)
    }

    /// Atoms on which the two bases disagree.
    pub fn symmetric_difference<'a>(&'a self, other: &'a BeliefBase) -> impl Iterator<Item = &'a Atom> + 'a {
        self.atoms.symmetric_difference(&other.atoms)
    }
}

impl FromIterator<Atom> for BeliefBase {
    fn from_iter<T: IntoIterator<Item = Atom>>(iter: T) -> Self {
        BeliefBase::from_atoms(iter)
    }
}

impl fmt::Display for BeliefBase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, a) in self.atoms.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{a}")?;
        }
        f.write_str("}")
    }
}

/// Ontic update: `(bel \ dels) ∪ adds`.
pub fn apply_effects(
    bel: &BeliefBase,
    adds: &BTreeSet<Atom>,
    dels: &BTreeSet<Atom>,
) -> Result<BeliefBase, ModelError> {
    if let Some(a) = adds.intersection(dels).next() {
        return Err(ModelError::ConflictingEffects(a.to_string()));
    }
    let mut out = bel.clone();
    for d in dels {
        out.remove(d);
    }
    for a in adds {
        out.insert(a.clone());
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Templates with variables, shared by the DSL, HTN decomposition, knowledge
// rules and the co-presence formula.

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Var(String),
    Const(String),
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => write!(f, "?{v}"),
            Term::Const(c) => f.write_str(c),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AtomTemplate {
    pub predicate: String,
    pub args: Vec<Term>,
}

impl AtomTemplate {
    pub fn vars(&self) -> impl Iterator<Item = &str> {
        self.args.iter().filter_map(|t| match t {
            Term::Var(v) => Some(v.as_str()),
            Term::Const(_) => None,
        })
    }

    /// Grounds the template; `None` if a variable is unbound.
    pub fn ground(&self, b: &Bindings) -> Option<Atom> {
        let mut args = Vec::with_capacity(self.args.len());
        for t in &self.args {
            match t {
                Term::Const(c) => args.push(c.clone()),
                Term::Var(v) => args.push(b.get(v)?.clone()),
            }
        }
        Some(Atom {
            predicate: self.predicate.clone(),
            args,
        })
    }

    /// Extends `b` so that the template equals `atom`, if possible.
    pub fn unify(&self, atom: &Atom, b: &Bindings) -> Option<Bindings> {
        if self.predicate != atom.predicate || self.args.len() != atom.args.len() {
            return None;
        }
        let mut out = b.clone();
        for (t, a) in self.args.iter().zip(&atom.args) {
            match t {
                Term::Const(c) if c != a => return None,
                Term::Const(_) => {}
                Term::Var(v) => match out.get(v) {
                    Some(bound) if bound != a => return None,
                    Some(_) => {}
                    None => {
                        out.insert(v.clone(), a.clone());
                    }
                },
            }
        }
        Some(out)
    }
}

impl fmt::Display for AtomTemplate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.predicate)?;
        for (i, a) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{a}")?;
        }
        f.write_str(")")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LitTemplate {
    pub atom: AtomTemplate,
    pub positive: bool,
}

impl fmt::Display for LitTemplate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if !self.positive {
            f.write_str("not ")?;
        }
        write!(f, "{}", self.atom)
    }
}

pub type Bindings = BTreeMap<String, String>;

/// Every extension of `init` satisfying the conjunction `lits` in `base`.
///
/// Positive literals are joined left to right. A negative literal with
/// variables still unbound after the join reads as "no matching atom".
pub fn satisfy(lits: &[LitTemplate], base: &BeliefBase, init: &Bindings) -> Vec<Bindings> {
    let mut partial = vec![init.clone()];
    for lit in lits.iter().filter(|l| l.positive) {
        let mut next = Vec::new();
        for b in &partial {
            if let Some(atom) = lit.atom.ground(b) {
                if base.contains(&atom) {
                    next.push(b.clone());
                }
                continue;
            }
            for atom in base.with_predicate(&lit.atom.predicate) {
                if let Some(ext) = lit.atom.unify(atom, b) {
                    next.push(ext);
                }
            }
        }
        partial = next;
        if partial.is_empty() {
            return partial;
        }
    }
    partial.retain(|b| {
        lits.iter().filter(|l| !l.positive).all(|lit| match lit.atom.ground(b) {
            Some(atom) => !base.contains(&atom),
            None => !base
                .with_predicate(&lit.atom.predicate)
                .any(|a| lit.atom.unify(a, b).is_some()),
        })
    });
    partial.sort();
    partial.dedup();
    partial
}

// ---------------------------------------------------------------------------

pub type WorldId = u32;

/// One possible course of the task, seen through three perspectives.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct World {
    pub id: WorldId,
    /// Robot beliefs. Ground truth in the designated world.
    pub bel_r: BeliefBase,
    /// Estimated human beliefs.
    pub bel_h: BeliefBase,
    /// The human's model of the robot's beliefs.
    pub bel_rh: BeliefBase,
    pub tn_r: TaskNetwork,
    pub tn_h: TaskNetwork,
    pub tn_rh: TaskNetwork,
    pub agent_place: BTreeMap<Agent, String>,
    /// Ontic robot actions anticipated in this world since the agents separated.
    pub separated_steps: u32,
    /// The anticipated robot has stopped acting until the agents reunite.
    pub halted: bool,
    /// Set by the product update when a co-present human witnessed a
    /// different event than the one producing this world.
    pub distinguishable: bool,
}

impl World {
    pub fn initial(
        id: WorldId,
        ground_truth: BeliefBase,
        human: BeliefBase,
        tn_r: TaskNetwork,
        tn_h: TaskNetwork,
    ) -> Self {
        let mut w = World {
            id,
            bel_r: ground_truth,
            bel_h: human.clone(),
            bel_rh: human,
            tn_rh: tn_r.clone(),
            tn_r,
            tn_h,
            agent_place: BTreeMap::new(),
            separated_steps: 0,
            halted: false,
            distinguishable: false,
        };
        w.sync_places();
        w
    }

    /// Recomputes `agent_place` from the `at(agent, place)` atoms of `bel_r`.
    pub fn sync_places(&mut self) {
        self.agent_place.clear();
        for a in self.bel_r.with_predicate("at") {
            if a.args.len() == 2 {
                if let Some(agent) = Agent::parse(&a.args[0]) {
                    self.agent_place.insert(agent, a.args[1].clone());
                }
            }
        }
    }

    /// Content key ignoring the id; used for canonical ordering and merging.
    pub fn content_key(&self) -> String {
        let mut s = String::new();
        use fmt::Write;
        let _ = write!(
            s,
            "R{}|H{}|RH{}|tr{}|th{}|trh{}|",
            self.bel_r, self.bel_h, self.bel_rh, self.tn_r, self.tn_h, self.tn_rh
        );
        for (a, p) in &self.agent_place {
            let _ = write!(s, "{a}@{p},");
        }
        let _ = write!(
            s,
            "|s{}|h{}|d{}",
            self.separated_steps, self.halted as u8, self.distinguishable as u8
        );
        s
    }
}

/// A set of worlds, all indistinguishable to H, with one designated world
/// known to R.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EpistemicState {
    pub worlds: Vec<World>,
    pub designated: WorldId,
    pub actor_turn: Agent,
    /// Remaining ontic robot actions while the agents are apart.
    pub robot_action_budget: u32,
    pub k: u32,
    /// The previous edge was a noop or idle step.
    pub last_idle: bool,
    /// Facts the human is waiting to be informed about.
    pub pending_inform: BTreeSet<Atom>,
}

impl EpistemicState {
    pub fn initial(world: World, first: Agent, k: u32) -> Self {
        let id = world.id;
        EpistemicState {
            worlds: vec![world],
            designated: id,
            actor_turn: first,
            robot_action_budget: k,
            k,
            last_idle: false,
            pending_inform: BTreeSet::new(),
        }
    }

    pub fn designated_world(&self) -> &World {
        self.worlds
            .iter()
            .find(|w| w.id == self.designated)
            .expect("designated world is a member of the state")
    }

    pub fn world(&self, id: WorldId) -> Option<&World> {
        self.worlds.iter().find(|w| w.id == id)
    }

    pub fn len(&self) -> usize {
        self.worlds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.worlds.is_empty()
    }

    pub fn has_designated(&self) -> bool {
        self.worlds.iter().any(|w| w.id == self.designated)
    }

    /// Sorts worlds by content and renumbers them `0..n`, so that equal
    /// states compare equal regardless of construction order.
    pub fn canonicalize(&mut self) {
        let mut keyed: Vec<(bool, String, World)> = self
            .worlds
            .drain(..)
            .map(|w| (w.id != self.designated, w.content_key(), w))
            .collect();
        keyed.sort_by(|a, b| (a.0, &a.1).cmp(&(b.0, &b.1)));
        for (i, (is_other, _, mut w)) in keyed.into_iter().enumerate() {
            w.id = i as WorldId;
            if !is_other {
                self.designated = w.id;
            }
            self.worlds.push(w);
        }
    }

    /// Deterministic text form: designated world first (marked `*`), the
    /// rest in content order. Two states are the same search state iff their
    /// canonical strings are equal.
    pub fn canonical_string(&self) -> String {
        let mut c = self.clone();
        c.canonicalize();
        let mut s = format!(
            "turn={} budget={}/{} idle={} pending=[",
            c.actor_turn, c.robot_action_budget, c.k, c.last_idle as u8
        );
        for (i, p) in c.pending_inform.iter().enumerate() {
            if i > 0 {
                s.push_str(", ");
            }
            s.push_str(&p.to_string());
        }
        s.push_str("]\n");
        for w in &c.worlds {
            let mark = if w.id == c.designated { "*" } else { " " };
            s.push_str(&format!("{mark}w{} {}\n", w.id, w.content_key()));
        }
        s
    }
}

// ---------------------------------------------------------------------------

/// Formulas with knowledge operators nested at most two levels deep.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EpistemicFormula {
    Lit(Literal),
    Not(Box<EpistemicFormula>),
    And(Vec<EpistemicFormula>),
    KnowsR(Box<EpistemicFormula>),
    KnowsH(Box<EpistemicFormula>),
}

impl EpistemicFormula {
    pub fn lit(l: Literal) -> Self {
        EpistemicFormula::Lit(l)
    }

    pub fn knows_r(f: EpistemicFormula) -> Self {
        EpistemicFormula::KnowsR(Box::new(f))
    }

    pub fn knows_h(f: EpistemicFormula) -> Self {
        EpistemicFormula::KnowsH(Box::new(f))
    }

    /// Depth of nested knowledge operators.
    pub fn modal_depth(&self) -> usize {
        match self {
            EpistemicFormula::Lit(_) => 0,
            EpistemicFormula::Not(f) => f.modal_depth(),
            EpistemicFormula::And(fs) => fs.iter().map(|f| f.modal_depth()).max().unwrap_or(0),
            EpistemicFormula::KnowsR(f) | EpistemicFormula::KnowsH(f) => 1 + f.modal_depth(),
        }
    }
}

impl std::ops::Not for EpistemicFormula {
    type Output = EpistemicFormula;

    fn not(self) -> EpistemicFormula {
        EpistemicFormula::Not(Box::new(self))
    }
}

#[derive(Clone, Copy)]
enum View {
    /// Evaluated by the planner in a world.
    Truth,
    /// Inside a `K_H`: the human's view of the world.
    Human,
}

fn eval_in(state: &EpistemicState, w: &World, view: View, f: &EpistemicFormula) -> bool {
    match f {
        EpistemicFormula::Lit(l) => match view {
            View::Truth => w.bel_r.holds(l),
            View::Human => w.bel_rh.holds(l),
        },
        EpistemicFormula::Not(g) => !eval_in(state, w, view, g),
        EpistemicFormula::And(gs) => gs.iter().all(|g| eval_in(state, w, view, g)),
        // R distinguishes every world. Under the human's view, what R knows
        // in `w` is the human's model of the robot there.
        EpistemicFormula::KnowsR(g) => eval_in(state, w, view, g),
        EpistemicFormula::KnowsH(g) => state.worlds.iter().all(|v| eval_in(state, v, View::Human, g)),
    }
}

/// Truth of `f` at the designated world of `state`.
pub fn evaluate(state: &EpistemicState, f: &EpistemicFormula) -> Result<bool, ModelError> {
    let depth = f.modal_depth();
    if depth > 2 {
        return Err(ModelError::UnsupportedNesting(depth));
    }
    Ok(eval_in(state, state.designated_world(), View::Truth, f))
}
