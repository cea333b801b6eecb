//! Pretty-printer. `parse_domain(&model.to_string())` yields `model` again.

use std::fmt::{self, Display, Formatter, Write};

use super::{
    ActionSchema, DomainModel, MethodSchema, Observability, Param, PlaceExpr, ProblemInstance,
    TaskTemplate,
};

fn join<T: Display>(items: &[T], sep: &str) -> String {
    let mut s = String::new();
    for (i, it) in items.iter().enumerate() {
        if i > 0 {
            s.push_str(sep);
        }
        let _ = write!(s, "{it}");
    }
    s
}

fn params(ps: &[Param]) -> String {
    let v: Vec<String> = ps.iter().map(|p| format!("?{}: {}", p.name, p.ty)).collect();
    format!("({})", v.join(", "))
}

impl Display for TaskTemplate {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.name, join(&self.args, ", "))
    }
}

impl Display for ActionSchema {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        let place = match &self.place {
            PlaceExpr::Const(c) => c.clone(),
            PlaceExpr::Param(p) => format!("?{p}"),
        };
        writeln!(
            f,
            "  action {} by {} {} at {} {{",
            self.name,
            self.actor,
            params(&self.params),
            place
        )?;
        if !self.pre.is_empty() {
            writeln!(f, "    pre {}", join(&self.pre, ", "))?;
        }
        if !self.adds.is_empty() {
            writeln!(f, "    add {}", join(&self.adds, ", "))?;
        }
        if !self.dels.is_empty() {
            writeln!(f, "    del {}", join(&self.dels, ", "))?;
        }
        writeln!(f, "  }}")
    }
}

impl Display for MethodSchema {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        write!(f, "  method {} for {}{}", self.name, self.task, params(&self.params))?;
        if let Some(d) = &self.decreasing {
            write!(f, " decreasing {d}")?;
        }
        writeln!(f, " {{")?;
        if !self.pre.is_empty() {
            writeln!(f, "    pre {}", join(&self.pre, ", "))?;
        }
        if self.subtasks.is_empty() {
            writeln!(f, "    do")?;
        } else {
            writeln!(f, "    do {}", join(&self.subtasks, ", "))?;
        }
        writeln!(f, "  }}")
    }
}

impl Display for DomainModel {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        writeln!(f, "domain {} {{", self.name)?;
        if !self.types.is_empty() {
            writeln!(f, "  types {}", self.types.join(" "))?;
        }
        if !self.places.is_empty() {
            writeln!(f, "  places {}", self.places.join(" "))?;
        }
        for (c, t) in &self.constants {
            writeln!(f, "  constant {c}: {t}")?;
        }
        for p in &self.predicates {
            let class = match p.class {
                Observability::ObservableByRule => "observable",
                Observability::InferableOnly => "inferable",
            };
            writeln!(f, "  predicate {}({}) {class}", p.name, p.arg_types.join(", "))?;
        }
        if !self.copresence.is_empty() {
            writeln!(f, "  copresent when {}", join(&self.copresence, " and "))?;
        }
        for a in &self.actions {
            write!(f, "{a}")?;
        }
        for m in &self.methods {
            write!(f, "{m}")?;
        }
        for r in &self.rules {
            write!(f, "  rule {}: {}", r.name, r.target)?;
            if !r.antecedent.is_empty() {
                write!(f, " if {}", join(&r.antecedent, ", "))?;
            }
            writeln!(f)?;
        }
        writeln!(f, "}}")
    }
}

impl Display for ProblemInstance {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        writeln!(f, "problem {} for {} {{", self.name, self.domain)?;
        let mut types: Vec<&str> = Vec::new();
        for (_, t) in &self.objects {
            if !types.contains(&t.as_str()) {
                types.push(t);
            }
        }
        for t in types {
            let names: Vec<&str> = self
                .objects
                .iter()
                .filter(|(_, ty)| ty == t)
                .map(|(n, _)| n.as_str())
                .collect();
            writeln!(f, "  objects {} : {t}", names.join(" "))?;
        }
        writeln!(f, "  budget {}", self.k)?;
        writeln!(f, "  communication {}", if self.comm_allowed { "on" } else { "off" })?;
        writeln!(f, "  start {}", self.first_actor)?;
        writeln!(f, "  init {{")?;
        for a in self.ground_truth.iter() {
            writeln!(f, "    {a}")?;
        }
        writeln!(f, "  }}")?;
        if !self.belief_overrides.is_empty() {
            writeln!(f, "  human_belief {{")?;
            for l in &self.belief_overrides {
                writeln!(f, "    {l}")?;
            }
            writeln!(f, "  }}")?;
        }
        writeln!(f, "  task R {}", join(&self.root_task_r, " "))?;
        writeln!(f, "  task H {}", join(&self.root_task_h, " "))?;
        writeln!(f, "}}")
    }
}
