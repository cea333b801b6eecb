use std::collections::{BTreeMap, BTreeSet};

use super::parser::template_vars;
use super::{
    Diagnostic, DomainModel, Observability, PlaceExpr, ProblemInstance, Severity, Span,
    BUILTIN_TYPES,
};
use crate::model::{LitTemplate, Term};

/// Semantic checks over a parsed domain and problem. An empty result means
/// the pair can be handed to the solver.
pub fn validate(dom: &DomainModel, prob: &ProblemInstance) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    check_rules(dom, &mut out);
    check_actions(dom, &mut out);
    check_methods(dom, &mut out);
    check_recursion(dom, &mut out);
    check_copresence(dom, &mut out);
    check_problem(dom, prob, &mut out);
    out.sort_by_key(|d| (d.line, d.col, d.severity));
    out
}

/// Errors only; warnings do not block planning.
pub fn has_errors(diags: &[Diagnostic]) -> bool {
    diags.iter().any(|d| d.severity == Severity::Error)
}

fn check_rules(dom: &DomainModel, out: &mut Vec<Diagnostic>) {
    for r in &dom.rules {
        if dom.is_inferable(&r.target.predicate) {
            out.push(Diagnostic::error(
                r.span,
                format!(
                    "rule `{}` targets `{}`, which is declared inferable",
                    r.name, r.target.predicate
                ),
            ));
        }
    }
    for p in &dom.predicates {
        if p.class == Observability::ObservableByRule
            && !dom.rules.iter().any(|r| r.target.predicate == p.name)
        {
            out.push(Diagnostic::warning(
                p.span,
                format!("observable predicate `{}` has no knowledge rule", p.name),
            ));
        }
    }
}

fn unbound<'a>(vars: impl IntoIterator<Item = &'a str>, bound: &BTreeSet<String>) -> Vec<String> {
    let mut v: Vec<String> = vars
        .into_iter()
        .filter(|v| !bound.contains(*v))
        .map(str::to_string)
        .collect();
    v.sort();
    v.dedup();
    v
}

fn check_actions(dom: &DomainModel, out: &mut Vec<Diagnostic>) {
    for a in &dom.actions {
        let bound: BTreeSet<String> = a.params.iter().map(|p| p.name.clone()).collect();
        let vars = a
            .pre
            .iter()
            .filter(|l| l.positive)
            .flat_map(|l| l.atom.vars())
            .chain(a.adds.iter().flat_map(|t| t.vars()))
            .chain(a.dels.iter().flat_map(|t| t.vars()));
        for v in unbound(vars, &bound) {
            out.push(Diagnostic::error(
                a.span,
                format!("action `{}` uses `?{v}`, which is not a parameter", a.name),
            ));
        }
        if let PlaceExpr::Param(p) = &a.place {
            match a.params.iter().find(|q| &q.name == p) {
                Some(q) if q.ty == "place" => {}
                _ => out.push(Diagnostic::error(
                    a.span,
                    format!("action `{}`: place `?{p}` must be a parameter of type `place`", a.name),
                )),
            }
        }
    }
}

fn check_methods(dom: &DomainModel, out: &mut Vec<Diagnostic>) {
    let mut task_arity: BTreeMap<&str, usize> = BTreeMap::new();
    for m in &dom.methods {
        match task_arity.get(m.task.as_str()) {
            Some(&n) if n != m.params.len() => out.push(Diagnostic::error(
                m.span,
                format!("method `{}`: task `{}` takes {n} argument(s)", m.name, m.task),
            )),
            Some(_) => {}
            None => {
                task_arity.insert(&m.task, m.params.len());
            }
        }
        if dom.action(&m.task).is_some() {
            out.push(Diagnostic::error(
                m.span,
                format!("method `{}` refines `{}`, which is a primitive action", m.name, m.task),
            ));
        }
    }
    for m in &dom.methods {
        let mut bound: BTreeSet<String> = m.params.iter().map(|p| p.name.clone()).collect();
        let positive: Vec<LitTemplate> = m.pre.iter().filter(|l| l.positive).cloned().collect();
        bound.extend(template_vars(&positive));
        let vars = m.subtasks.iter().flat_map(|t| {
            t.args.iter().filter_map(|a| match a {
                Term::Var(v) => Some(v.as_str()),
                Term::Const(_) => None,
            })
        });
        for v in unbound(vars, &bound) {
            out.push(Diagnostic::error(
                m.span,
                format!(
                    "method `{}` passes `?{v}` to a subtask but never binds it",
                    m.name
                ),
            ));
        }
        for st in &m.subtasks {
            let arity = if let Some(a) = dom.action(&st.name) {
                Some(a.params.len())
            } else {
                task_arity.get(st.name.as_str()).copied()
            };
            match arity {
                None => out.push(Diagnostic::error(
                    m.span,
                    format!(
                        "method `{}`: subtask `{}` is neither an action nor a task with methods",
                        m.name, st.name
                    ),
                )),
                Some(n) if n != st.args.len() => out.push(Diagnostic::error(
                    m.span,
                    format!(
                        "method `{}`: subtask `{}` takes {n} argument(s), found {}",
                        m.name,
                        st.name,
                        st.args.len()
                    ),
                )),
                Some(_) => {}
            }
        }
    }
}

/// Recursion is allowed only through a method that declares a decreasing
/// predicate, requires an atom of it, and names a predicate that some action
/// of the domain deletes.
fn check_recursion(dom: &DomainModel, out: &mut Vec<Diagnostic>) {
    let mut edges: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for m in &dom.methods {
        for st in &m.subtasks {
            if dom.is_task(&st.name) {
                edges.entry(&m.task).or_default().insert(&st.name);
            }
        }
    }
    let reaches = |from: &str, to: &str| -> bool {
        let mut seen = BTreeSet::new();
        let mut stack = vec![from];
        while let Some(t) = stack.pop() {
            if let Some(next) = edges.get(t) {
                for &n in next {
                    if n == to {
                        return true;
                    }
                    if seen.insert(n) {
                        stack.push(n);
                    }
                }
            }
        }
        false
    };
    for m in &dom.methods {
        let recursive = m
            .subtasks
            .iter()
            .any(|st| dom.is_task(&st.name) && (st.name == m.task || reaches(&st.name, &m.task)));
        if !recursive {
            continue;
        }
        let ok = m.decreasing.as_ref().is_some_and(|pred| {
            let guarded = m.pre.iter().any(|l| l.positive && &l.atom.predicate == pred);
            let consumed = dom
                .actions
                .iter()
                .any(|a| a.dels.iter().any(|d| &d.predicate == pred));
            guarded && consumed
        });
        if !ok {
            out.push(Diagnostic::error(
                m.span,
                format!(
                    "method `{}` recurses into `{}` without a decreasing predicate that it requires and some action consumes",
                    m.name, m.task
                ),
            ));
        }
    }
}

fn check_copresence(dom: &DomainModel, out: &mut Vec<Diagnostic>) {
    for l in &dom.copresence {
        let ok = dom.predicate(&l.atom.predicate).is_some_and(|p| {
            p.arg_types
                .iter()
                .all(|t| BUILTIN_TYPES.contains(&t.as_str()))
        });
        if !ok {
            out.push(Diagnostic::error(
                Span::default(),
                format!(
                    "co-presence formula may only use agent/place predicates, found `{}`",
                    l.atom.predicate
                ),
            ));
        }
    }
}

fn check_problem(dom: &DomainModel, prob: &ProblemInstance, out: &mut Vec<Diagnostic>) {
    let at_count = |agent: &str| {
        prob.ground_truth
            .with_predicate("at")
            .filter(|a| a.args.first().map(String::as_str) == Some(agent))
            .count()
    };
    for agent in ["R", "H"] {
        if at_count(agent) != 1 {
            out.push(Diagnostic::error(
                Span::default(),
                format!("problem `{}`: agent {agent} must be at exactly one place", prob.name),
            ));
        }
    }
    for t in prob.root_task_r.iter().chain(&prob.root_task_h) {
        if !dom.is_task(&t.name) && dom.action(&t.name).is_none() {
            out.push(Diagnostic::error(
                Span::default(),
                format!("root task `{}` is unresolvable", t.name),
            ));
        }
    }
}
