//! The `.ehatp` description language.
//!
//! A domain file declares places, types, predicates (each tagged
//! `observable` or `inferable`), primitive actions, HTN methods, knowledge
//! rules and the co-presence formula. A problem file instantiates a domain
//! with objects, the ground truth, the human's initial beliefs, the two root
//! task networks and the separation budget `K`.
//!
//! ```text
//! domain tiny {
//!   places mt
//!   predicate at(agent, place) observable
//!   action wave by R () at mt { pre at(R, mt) add waved() }
//! }
//! ```
//!
//! Symbols must be declared before they are used. Communication actions are
//! never written here; the solver generates them.

mod lexer;
mod parser;
mod print;
mod validate;

use std::fmt;

use crate::htn::Task;
use crate::model::{Agent, AtomTemplate, BeliefBase, LitTemplate, Literal, Signature, Term};

pub use parser::{parse_domain, parse_problem};
pub use validate::{has_errors, validate};

/// Source position. Positions never take part in equality, so structural
/// comparisons of models ignore where things were written.
#[derive(Debug, Clone, Copy, Default)]
pub struct Span {
    pub line: usize,
    pub col: usize,
}

impl PartialEq for Span {
    fn eq(&self, _: &Span) -> bool {
        true
    }
}

impl Eq for Span {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub severity: Severity,
    pub line: usize,
    pub col: usize,
    pub message: String,
}

impl Diagnostic {
    pub fn error(span: Span, message: impl Into<String>) -> Self {
        Diagnostic {
            severity: Severity::Error,
            line: span.line,
            col: span.col,
            message: message.into(),
        }
    }

    pub fn warning(span: Span, message: impl Into<String>) -> Self {
        Diagnostic {
            severity: Severity::Warning,
            line: span.line,
            col: span.col,
            message: message.into(),
        }
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }

    /// `file:line:col: severity: message`
    pub fn render(&self, file: &str) -> String {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        format!("{file}:{}:{}: {sev}: {}", self.line, self.col, self.message)
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render("<input>"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Observability {
    /// The current value can be seen when a knowledge rule applies.
    ObservableByRule,
    /// Only learned by witnessing the action that changes it.
    InferableOnly,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredicateDecl {
    pub name: String,
    pub arg_types: Vec<String>,
    pub class: Observability,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Param {
    pub name: String,
    pub ty: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PlaceExpr {
    Const(String),
    Param(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionSchema {
    pub name: String,
    pub actor: Agent,
    pub params: Vec<Param>,
    pub place: PlaceExpr,
    pub pre: Vec<LitTemplate>,
    pub adds: Vec<AtomTemplate>,
    pub dels: Vec<AtomTemplate>,
    /// False only for generated communication actions.
    pub ontic: bool,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskTemplate {
    pub name: String,
    pub args: Vec<Term>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MethodSchema {
    pub name: String,
    pub task: String,
    pub params: Vec<Param>,
    /// Recursion through this method must consume an atom of this predicate.
    pub decreasing: Option<String>,
    pub pre: Vec<LitTemplate>,
    pub subtasks: Vec<TaskTemplate>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KnowledgeRule {
    pub name: String,
    pub target: AtomTemplate,
    pub antecedent: Vec<LitTemplate>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DomainModel {
    pub name: String,
    pub types: Vec<String>,
    pub places: Vec<String>,
    /// Domain-level objects as `(name, type)`.
    pub constants: Vec<(String, String)>,
    pub predicates: Vec<PredicateDecl>,
    pub actions: Vec<ActionSchema>,
    pub methods: Vec<MethodSchema>,
    pub rules: Vec<KnowledgeRule>,
    /// Conjunction that holds exactly when the agents share the execution
    /// experience.
    pub copresence: Vec<LitTemplate>,
}

pub const BUILTIN_TYPES: [&str; 2] = ["agent", "place"];

impl DomainModel {
    pub fn predicate(&self, name: &str) -> Option<&PredicateDecl> {
        self.predicates.iter().find(|p| p.name == name)
    }

    pub fn action(&self, name: &str) -> Option<&ActionSchema> {
        self.actions.iter().find(|a| a.name == name)
    }

    pub fn methods_for<'a>(&'a self, task: &'a str) -> impl Iterator<Item = &'a MethodSchema> + 'a {
        self.methods.iter().filter(move |m| m.task == task)
    }

    pub fn is_task(&self, name: &str) -> bool {
        self.methods.iter().any(|m| m.task == name)
    }

    pub fn signature(&self) -> Signature {
        self.predicates
            .iter()
            .map(|p| (p.name.clone(), p.arg_types.len()))
            .collect()
    }

    pub fn is_inferable(&self, predicate: &str) -> bool {
        self.predicate(predicate)
            .is_some_and(|p| p.class == Observability::InferableOnly)
    }

    pub fn has_type(&self, ty: &str) -> bool {
        BUILTIN_TYPES.contains(&ty) || self.types.iter().any(|t| t == ty)
    }

    /// Type of a domain-level object (agents, places, constants).
    pub fn object_type(&self, name: &str) -> Option<&str> {
        if Agent::parse(name).is_some() {
            return Some("agent");
        }
        if self.places.iter().any(|p| p == name) {
            return Some("place");
        }
        self.constants
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, t)| t.as_str())
    }

    /// Predicates appearing in any action or method precondition.
    pub fn precondition_predicates(&self) -> std::collections::BTreeSet<&str> {
        self.actions
            .iter()
            .flat_map(|a| a.pre.iter())
            .chain(self.methods.iter().flat_map(|m| m.pre.iter()))
            .map(|l| l.atom.predicate.as_str())
            .collect()
    }

    /// The default co-presence formula: both agents at the same place.
    pub fn default_copresence() -> Vec<LitTemplate> {
        ["R", "H"]
            .iter()
            .map(|agent| LitTemplate {
                atom: AtomTemplate {
                    predicate: "at".into(),
                    args: vec![Term::Const(agent.to_string()), Term::Var("p".into())],
                },
                positive: true,
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProblemInstance {
    pub name: String,
    pub domain: String,
    /// Problem objects as `(name, type)`.
    pub objects: Vec<(String, String)>,
    /// Initial robot beliefs, taken as ground truth.
    pub ground_truth: BeliefBase,
    /// Initial human beliefs (and the human's model of the robot's beliefs).
    pub initial_bel_h: BeliefBase,
    /// Literals written in the `human_belief` block, in source order.
    pub belief_overrides: Vec<Literal>,
    pub root_task_r: Vec<Task>,
    pub root_task_h: Vec<Task>,
    pub k: u32,
    pub comm_allowed: bool,
    pub first_actor: Agent,
}

impl ProblemInstance {
    /// Atoms on which the human initially holds a false belief.
    pub fn initial_false_beliefs(&self) -> Vec<Literal> {
        self.ground_truth
            .symmetric_difference(&self.initial_bel_h)
            .map(|a| {
                if self.initial_bel_h.contains(a) {
                    Literal::pos(a.clone())
                } else {
                    Literal::neg(a.clone())
                }
            })
            .collect()
    }

    pub fn object_type<'a>(&'a self, dom: &'a DomainModel, name: &str) -> Option<&'a str> {
        dom.object_type(name).or_else(|| {
            self.objects
                .iter()
                .find(|(n, _)| n == name)
                .map(|(_, t)| t.as_str())
        })
    }
}
