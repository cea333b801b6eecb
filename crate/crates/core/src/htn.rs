//! Totally ordered HTN decomposition.
//!
//! A task network is an agenda of ground tasks. Refining it means
//! decomposing the head until a primitive action appears; the action plus the
//! rest of the agenda is a [`Refinement`].

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::dsl::{ActionSchema, DomainModel};
use crate::model::{satisfy, Agent, Atom, BeliefBase, Bindings, Literal, Term};

const MAX_DECOMPOSITION_DEPTH: usize = 64;
/// Largest subset size tried exhaustively when aligning two perspectives.
pub const ALIGNMENT_SEARCH_CAP: usize = 4;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum HtnError {
    #[error("task `{0}` has no method and is not an action")]
    UnresolvableTask(String),
    #[error("decomposition of `{0}` exceeds depth {MAX_DECOMPOSITION_DEPTH}")]
    TooDeep(String),
    #[error("cannot advance {network} past `{action}`: no refinement starts with it")]
    InconsistentAdvance { network: String, action: String },
    #[error("no transfer of facts aligns the two decompositions")]
    AlignmentImpossible,
    #[error("unknown action `{0}`")]
    UnknownAction(String),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Task {
    pub name: String,
    pub args: Vec<String>,
}

impl Task {
    pub fn new<S: Into<String>>(name: &str, args: impl IntoIterator<Item = S>) -> Self {
        Task {
            name: name.to_string(),
            args: args.into_iter().map(Into::into).collect(),
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.name, self.args.join(", "))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TaskNetwork {
    pub agenda: Vec<Task>,
}

impl TaskNetwork {
    pub fn new(agenda: Vec<Task>) -> Self {
        TaskNetwork { agenda }
    }

    pub fn is_fully_decomposed(&self) -> bool {
        self.agenda.is_empty()
    }
}

impl fmt::Display for TaskNetwork {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (i, t) in self.agenda.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{t}")?;
        }
        f.write_str("]")
    }
}

pub fn is_fully_decomposed(tn: &TaskNetwork) -> bool {
    tn.is_fully_decomposed()
}

/// True if the remaining tasks of `tn` can be refined away under `bel`
/// without executing any primitive action.
pub fn can_complete(dom: &DomainModel, tn: &TaskNetwork, bel: &BeliefBase) -> bool {
    completes(dom, &tn.agenda, bel, 0)
}

fn completes(dom: &DomainModel, agenda: &[Task], bel: &BeliefBase, depth: usize) -> bool {
    let Some((head, rest)) = agenda.split_first() else {
        return true;
    };
    if depth > MAX_DECOMPOSITION_DEPTH || dom.action(&head.name).is_some() {
        return false;
    }
    dom.methods_for(&head.name)
        .filter(|m| m.params.len() == head.args.len())
        .any(|m| {
            let init: Bindings = m
                .params
                .iter()
                .zip(&head.args)
                .map(|(p, a)| (p.name.clone(), a.clone()))
                .collect();
            satisfy(&m.pre, bel, &init).into_iter().any(|b| {
                let mut next = Vec::with_capacity(m.subtasks.len() + rest.len());
                for st in &m.subtasks {
                    let args: Option<Vec<String>> = st
                        .args
                        .iter()
                        .map(|t| match t {
                            Term::Const(c) => Some(c.clone()),
                            Term::Var(v) => b.get(v).cloned(),
                        })
                        .collect();
                    match args {
                        Some(args) => next.push(Task {
                            name: st.name.clone(),
                            args,
                        }),
                        None => return false,
                    }
                }
                next.extend_from_slice(rest);
                completes(dom, &next, bel, depth + 1)
            })
        })
}

/// A ground primitive action such as `pick(c_r)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GroundAction {
    pub name: String,
    pub args: Vec<String>,
}

impl GroundAction {
    pub fn new<S: Into<String>>(name: &str, args: impl IntoIterator<Item = S>) -> Self {
        GroundAction {
            name: name.to_string(),
            args: args.into_iter().map(Into::into).collect(),
        }
    }

    /// Parses `name(a, b)`.
    pub fn parse(text: &str) -> Option<Self> {
        let a = Atom::parse(text)?;
        Some(GroundAction {
            name: a.predicate,
            args: a.args,
        })
    }

    pub fn schema<'a>(&self, dom: &'a DomainModel) -> Result<&'a ActionSchema, HtnError> {
        dom.action(&self.name)
            .ok_or_else(|| HtnError::UnknownAction(self.name.clone()))
    }

    fn bindings(&self, schema: &ActionSchema) -> Bindings {
        schema
            .params
            .iter()
            .zip(&self.args)
            .map(|(p, a)| (p.name.clone(), a.clone()))
            .collect()
    }

    /// The ground precondition literals.
    pub fn preconditions(&self, dom: &DomainModel) -> Result<Vec<Literal>, HtnError> {
        let s = self.schema(dom)?;
        let b = self.bindings(s);
        Ok(s.pre
            .iter()
            .filter_map(|l| {
                l.atom.ground(&b).map(|atom| Literal {
                    atom,
                    positive: l.positive,
                })
            })
            .collect())
    }

    /// Negative preconditions over variables that are not parameters read
    /// as "no such atom".
    pub fn applicable(&self, dom: &DomainModel, bel: &BeliefBase) -> Result<bool, HtnError> {
        let s = self.schema(dom)?;
        Ok(!satisfy(&s.pre, bel, &self.bindings(s)).is_empty())
    }

    /// `(adds, dels)`, ground.
    pub fn effects(&self, dom: &DomainModel) -> Result<(BTreeSet<Atom>, BTreeSet<Atom>), HtnError> {
        let s = self.schema(dom)?;
        let b = self.bindings(s);
        let adds = s.adds.iter().filter_map(|t| t.ground(&b)).collect();
        let dels: BTreeSet<Atom> = s.dels.iter().filter_map(|t| t.ground(&b)).collect();
        // An atom both deleted and re-added stays true.
        let dels = dels.difference(&adds).cloned().collect();
        Ok((adds, dels))
    }
}

impl fmt::Display for GroundAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.name, self.args.join(", "))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Refinement {
    pub first_primitive: GroundAction,
    pub remainder: TaskNetwork,
    /// Methods applied, outermost first.
    pub method_trace: Vec<String>,
}

fn refine(
    dom: &DomainModel,
    agenda: &[Task],
    bel: &BeliefBase,
    actor: Agent,
    trace: &mut Vec<String>,
    out: &mut Vec<Refinement>,
) -> Result<(), HtnError> {
    let Some((head, rest)) = agenda.split_first() else {
        return Ok(());
    };
    if trace.len() > MAX_DECOMPOSITION_DEPTH {
        return Err(HtnError::TooDeep(head.name.clone()));
    }
    if let Some(schema) = dom.action(&head.name) {
        if schema.actor != actor {
            return Ok(());
        }
        let act = GroundAction {
            name: head.name.clone(),
            args: head.args.clone(),
        };
        if act.applicable(dom, bel)? {
            out.push(Refinement {
                first_primitive: act,
                remainder: TaskNetwork::new(rest.to_vec()),
                method_trace: trace.clone(),
            });
        }
        return Ok(());
    }
    if !dom.is_task(&head.name) {
        return Err(HtnError::UnresolvableTask(head.name.clone()));
    }
    for m in dom.methods_for(&head.name) {
        if m.params.len() != head.args.len() {
            continue;
        }
        let init: Bindings = m
            .params
            .iter()
            .zip(&head.args)
            .map(|(p, a)| (p.name.clone(), a.clone()))
            .collect();
        for b in satisfy(&m.pre, bel, &init) {
            let mut next = Vec::with_capacity(m.subtasks.len() + rest.len());
            let mut grounded = true;
            for st in &m.subtasks {
                let mut args = Vec::with_capacity(st.args.len());
                for t in &st.args {
                    match t {
                        Term::Const(c) => args.push(c.clone()),
                        Term::Var(v) => match b.get(v) {
                            Some(x) => args.push(x.clone()),
                            None => grounded = false,
                        },
                    }
                }
                next.push(Task {
                    name: st.name.clone(),
                    args,
                });
            }
            if !grounded {
                continue;
            }
            next.extend_from_slice(rest);
            trace.push(m.name.clone());
            let r = refine(dom, &next, bel, actor, trace, out);
            trace.pop();
            r?;
        }
    }
    Ok(())
}

/// All ways to bring a primitive action of `actor` to the head of `tn`
/// under `bel`. Sorted by `(action, remainder)`; refinements that agree on
/// both are reported once.
pub fn feasible_refinements(
    dom: &DomainModel,
    tn: &TaskNetwork,
    bel: &BeliefBase,
    actor: Agent,
) -> Result<Vec<Refinement>, HtnError> {
    let mut out = Vec::new();
    refine(dom, &tn.agenda, bel, actor, &mut Vec::new(), &mut out)?;
    out.sort_by(|a, b| {
        (&a.first_primitive, &a.remainder).cmp(&(&b.first_primitive, &b.remainder))
    });
    out.dedup_by(|a, b| a.first_primitive == b.first_primitive && a.remainder == b.remainder);
    Ok(out)
}

pub fn first_primitives(
    dom: &DomainModel,
    tn: &TaskNetwork,
    bel: &BeliefBase,
    actor: Agent,
) -> Result<BTreeSet<GroundAction>, HtnError> {
    Ok(feasible_refinements(dom, tn, bel, actor)?
        .into_iter()
        .map(|r| r.first_primitive)
        .collect())
}

/// The remainder of the first refinement of `tn` that starts with `act`.
pub fn advance(
    dom: &DomainModel,
    tn: &TaskNetwork,
    bel: &BeliefBase,
    actor: Agent,
    act: &GroundAction,
) -> Result<TaskNetwork, HtnError> {
    feasible_refinements(dom, tn, bel, actor)?
        .into_iter()
        .find(|r| &r.first_primitive == act)
        .map(|r| r.remainder)
        .ok_or_else(|| HtnError::InconsistentAdvance {
            network: tn.to_string(),
            action: act.to_string(),
        })
}

fn transfer(bel_rh: &BeliefBase, facts: &[Literal]) -> BeliefBase {
    let mut b = bel_rh.clone();
    for l in facts {
        b.set(&l.atom, l.positive);
    }
    b
}

fn combinations(n: usize, k: usize, mut f: impl FnMut(&[usize]) -> bool) -> bool {
    // Lexicographic k-subsets of 0..n; stops when `f` returns true.
    if k > n {
        return false;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        if f(&idx) {
            return true;
        }
        let Some(i) = (0..k).rev().find(|&i| idx[i] < i + n - k) else {
            return false;
        };
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Smallest set of robot facts whose transfer into the human's model of the
/// robot makes both perspectives propose the same next robot actions.
///
/// Candidates are the precondition-relevant atoms on which the two bases
/// disagree. Subsets are tried by increasing size up to
/// [`ALIGNMENT_SEARCH_CAP`], lexicographically within a size; past the cap
/// the full candidate set is tried.
pub fn alignment_diff(
    dom: &DomainModel,
    bel_r: &BeliefBase,
    tn_r: &TaskNetwork,
    bel_rh: &BeliefBase,
    tn_rh: &TaskNetwork,
) -> Result<BTreeSet<Literal>, HtnError> {
    let target = first_primitives(dom, tn_r, bel_r, Agent::R)?;
    let aligned = |b: &BeliefBase| -> Result<bool, HtnError> {
        Ok(first_primitives(dom, tn_rh, b, Agent::R)? == target)
    };
    if aligned(bel_rh)? {
        return Ok(BTreeSet::new());
    }
    let relevant = dom.precondition_predicates();
    let candidates: Vec<Literal> = bel_r
        .symmetric_difference(bel_rh)
        .filter(|a| relevant.contains(a.predicate.as_str()))
        .map(|a| Literal {
            atom: a.clone(),
            positive: bel_r.contains(a),
        })
        .collect();
    let mut err = None;
    for size in 1..=candidates.len().min(ALIGNMENT_SEARCH_CAP) {
        let mut found = None;
        combinations(candidates.len(), size, |idx| {
            let facts: Vec<Literal> = idx.iter().map(|&i| candidates[i].clone()).collect();
            match aligned(&transfer(bel_rh, &facts)) {
                Ok(true) => {
                    found = Some(facts);
                    true
                }
                Ok(false) => false,
                Err(e) => {
                    err = Some(e);
                    true
                }
            }
        });
        if let Some(e) = err.take() {
            return Err(e);
        }
        if let Some(f) = found {
            return Ok(f.into_iter().collect());
        }
    }
    if candidates.len() > ALIGNMENT_SEARCH_CAP && aligned(&transfer(bel_rh, &candidates))? {
        return Ok(candidates.into_iter().collect());
    }
    Err(HtnError::AlignmentImpossible)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_domain;

    fn a(p: &str, args: &[&str]) -> Atom {
        Atom::new(p, args.iter().copied())
    }

    const D: &str = r#"
        domain d {
          types cube box
          places mt
          predicate on(cube, place) observable
          predicate holding(agent, cube) observable
          predicate empty(box) observable
          predicate inside(cube, box) observable
          action pick by R (?c: cube) at mt { pre on(?c, mt) add holding(R, ?c) del on(?c, mt) }
          action drop by R (?c: cube, ?b: box) at mt {
            pre holding(R, ?c), empty(?b)
            add inside(?c, ?b) del holding(R, ?c), empty(?b)
          }
          action nod by H () at mt { }
          method move_one for store(?c: cube) { do pick(?c), put(?c) }
          method put_in for put(?c: cube) { pre empty(?b) do drop(?c, ?b) }
          rule r1: on(?c, ?p)
          rule r2: holding(?a, ?c)
          rule r3: empty(?b)
          rule r4: inside(?c, ?b)
        }
    "#;

    fn dom() -> DomainModel {
        parse_domain(D).unwrap()
    }

    #[test]
    fn refinements_of_store() {
        let d = dom();
        let tn = TaskNetwork::new(vec![Task::new("store", ["c"])]);
        let bel = BeliefBase::from_atoms([a("on", &["c", "mt"]), a("empty", &["b1"]), a("empty", &["b2"])]);
        let r = feasible_refinements(&d, &tn, &bel, Agent::R).unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].first_primitive, GroundAction::new("pick", ["c"]));
        assert_eq!(r[0].remainder.agenda, vec![Task::new("put", ["c"])]);
        assert_eq!(r[0].method_trace, vec!["move_one"]);
        assert!(feasible_refinements(&d, &tn, &bel, Agent::H).unwrap().is_empty());
        assert!(feasible_refinements(&d, &TaskNetwork::default(), &bel, Agent::R).unwrap().is_empty());
    }

    #[test]
    fn advance_and_errors() {
        let d = dom();
        let bel = BeliefBase::from_atoms([a("holding", &["R", "c"]), a("empty", &["b1"])]);
        let tn = TaskNetwork::new(vec![Task::new("put", ["c"])]);
        let next = advance(&d, &tn, &bel, Agent::R, &GroundAction::new("drop", ["c", "b1"])).unwrap();
        assert!(next.is_fully_decomposed());
        let err = advance(&d, &tn, &bel, Agent::R, &GroundAction::new("pick", ["c"])).unwrap_err();
        assert!(matches!(err, HtnError::InconsistentAdvance { .. }));
        let bad = TaskNetwork::new(vec![Task::new("fly", Vec::<String>::new())]);
        assert!(matches!(
            feasible_refinements(&d, &bad, &bel, Agent::R),
            Err(HtnError::UnresolvableTask(_))
        ));
    }

    #[test]
    fn alignment_finds_relevant_fact() {
        let d = dom();
        let tn = TaskNetwork::new(vec![Task::new("put", ["c"])]);
        let bel_r = BeliefBase::from_atoms([a("holding", &["R", "c"]), a("empty", &["b2"]), a("on", &["x", "mt"])]);
        let bel_rh = BeliefBase::from_atoms([a("holding", &["R", "c"])]);
        let diff = alignment_diff(&d, &bel_r, &tn, &bel_rh, &tn).unwrap();
        assert_eq!(diff, [Literal::pos(a("empty", &["b2"]))].into_iter().collect());
        assert!(alignment_diff(&d, &bel_r, &tn, &bel_r, &tn).unwrap().is_empty());
        // `on(x, mt)` differs too but never matters for `put(c)`.
        let bel_rh2 = BeliefBase::from_atoms([a("holding", &["R", "c"]), a("empty", &["b2"])]);
        assert!(alignment_diff(&d, &bel_r, &tn, &bel_rh2, &tn).unwrap().is_empty());
    }

    #[test]
    fn combinations_are_lexicographic() {
        let mut seen = Vec::new();
        combinations(4, 2, |idx| {
            seen.push(idx.to_vec());
            false
        });
        assert_eq!(seen, vec![vec![0, 1], vec![0, 2], vec![0, 3], vec![1, 2], vec![1, 3], vec![2, 3]]);
    }
}
