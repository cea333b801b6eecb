use std::collections::BTreeSet;

use super::lexer::{tokenize, Tok};
use super::{
    ActionSchema, Diagnostic, DomainModel, KnowledgeRule, MethodSchema, Observability, Param,
    PlaceExpr, PredicateDecl, ProblemInstance, Span, TaskTemplate,
};
use crate::htn::Task;
use crate::model::{Agent, Atom, AtomTemplate, BeliefBase, LitTemplate, Literal, Term};

type PResult<T> = Result<T, Diagnostic>;

const DOMAIN_KEYWORDS: [&str; 8] = [
    "types", "places", "constant", "predicate", "copresent", "action", "method", "rule",
];

struct Parser {
    toks: Vec<(Tok, Span)>,
    pos: usize,
}

impl Parser {
    fn new(text: &str) -> PResult<Self> {
        Ok(Parser {
            toks: tokenize(text)?,
            pos: 0,
        })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn peek_at(&self, n: usize) -> &Tok {
        let i = (self.pos + n).min(self.toks.len() - 1);
        &self.toks[i].0
    }

    fn span(&self) -> Span {
        self.toks[self.pos].1
    }

    fn next(&mut self) -> (Tok, Span) {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn unexpected<T>(&self, what: &str) -> PResult<T> {
        Err(Diagnostic::error(
            self.span(),
            format!("expected {what}, found {}", self.peek().describe()),
        ))
    }

    fn expect(&mut self, tok: Tok) -> PResult<Span> {
        if *self.peek() == tok {
            Ok(self.next().1)
        } else {
            self.unexpected(&tok.describe())
        }
    }

    fn is_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn expect_keyword(&mut self, kw: &str) -> PResult<Span> {
        if self.is_keyword(kw) {
            Ok(self.next().1)
        } else {
            self.unexpected(&format!("`{kw}`"))
        }
    }

    fn ident(&mut self, what: &str) -> PResult<(String, Span)> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                let sp = self.next().1;
                Ok((s, sp))
            }
            _ => self.unexpected(what),
        }
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == tok {
            self.next();
            true
        } else {
            false
        }
    }
}

// ---------------------------------------------------------------------------
// Domain

struct DomainCtx {
    model: DomainModel,
}

impl DomainCtx {
    fn check_const(&self, name: &str, span: Span) -> PResult<()> {
        if self.model.object_type(name).is_some() {
            Ok(())
        } else {
            Err(Diagnostic::error(span, format!("undeclared symbol `{name}`")))
        }
    }

    fn check_predicate(&self, name: &str, arity: usize, span: Span) -> PResult<()> {
        match self.model.predicate(name) {
            None => Err(Diagnostic::error(span, format!("undeclared predicate `{name}`"))),
            Some(p) if p.arg_types.len() != arity => Err(Diagnostic::error(
                span,
                format!(
                    "arity mismatch: `{name}` takes {} argument(s), found {arity}",
                    p.arg_types.len()
                ),
            )),
            Some(_) => Ok(()),
        }
    }
}

fn parse_term(p: &mut Parser, ctx: &DomainCtx) -> PResult<Term> {
    match p.peek().clone() {
        Tok::Var(v) => {
            p.next();
            Ok(Term::Var(v))
        }
        Tok::Ident(c) => {
            let sp = p.next().1;
            ctx.check_const(&c, sp)?;
            Ok(Term::Const(c))
        }
        _ => p.unexpected("a constant or `?variable`"),
    }
}

fn parse_atom_template(p: &mut Parser, ctx: &DomainCtx) -> PResult<AtomTemplate> {
    let (name, sp) = p.ident("a predicate name")?;
    p.expect(Tok::LParen)?;
    let mut args = Vec::new();
    if !p.eat(&Tok::RParen) {
        loop {
            args.push(parse_term(p, ctx)?);
            if p.eat(&Tok::RParen) {
                break;
            }
            p.expect(Tok::Comma)?;
        }
    }
    ctx.check_predicate(&name, args.len(), sp)?;
    Ok(AtomTemplate {
        predicate: name,
        args,
    })
}

fn parse_lit_template(p: &mut Parser, ctx: &DomainCtx) -> PResult<LitTemplate> {
    let positive = !(p.is_keyword("not") && matches!(p.peek_at(1), Tok::Ident(_)));
    if !positive {
        p.next();
    }
    Ok(LitTemplate {
        atom: parse_atom_template(p, ctx)?,
        positive,
    })
}

/// Literals separated by `,` or `and`.
fn parse_lit_list(p: &mut Parser, ctx: &DomainCtx) -> PResult<Vec<LitTemplate>> {
    let mut out = vec![parse_lit_template(p, ctx)?];
    loop {
        if p.is_keyword("and") {
            p.next();
        } else if !p.eat(&Tok::Comma) {
            return Ok(out);
        }
        out.push(parse_lit_template(p, ctx)?);
    }
}

fn parse_atom_list(p: &mut Parser, ctx: &DomainCtx) -> PResult<Vec<AtomTemplate>> {
    let mut out = vec![parse_atom_template(p, ctx)?];
    while p.eat(&Tok::Comma) {
        out.push(parse_atom_template(p, ctx)?);
    }
    Ok(out)
}

fn parse_params(p: &mut Parser, ctx: &DomainCtx) -> PResult<Vec<Param>> {
    p.expect(Tok::LParen)?;
    let mut out: Vec<Param> = Vec::new();
    if p.eat(&Tok::RParen) {
        return Ok(out);
    }
    loop {
        let sp = p.span();
        let name = match p.next().0 {
            Tok::Var(v) => v,
            _ => {
                p.pos -= 1;
                return p.unexpected("a `?parameter`");
            }
        };
        p.expect(Tok::Colon)?;
        let (ty, tsp) = p.ident("a type name")?;
        if !ctx.model.has_type(&ty) {
            return Err(Diagnostic::error(tsp, format!("undeclared type `{ty}`")));
        }
        if out.iter().any(|q| q.name == name) {
            return Err(Diagnostic::error(sp, format!("duplicate parameter `?{name}`")));
        }
        out.push(Param { name, ty });
        if p.eat(&Tok::RParen) {
            return Ok(out);
        }
        p.expect(Tok::Comma)?;
    }
}

fn parse_action(p: &mut Parser, ctx: &DomainCtx, span: Span) -> PResult<ActionSchema> {
    let (name, nsp) = p.ident("an action name")?;
    if ctx.model.action(&name).is_some() {
        return Err(Diagnostic::error(nsp, format!("duplicate action `{name}`")));
    }
    p.expect_keyword("by")?;
    let (actor, asp) = p.ident("`R` or `H`")?;
    let actor = Agent::parse(&actor)
        .ok_or_else(|| Diagnostic::error(asp, format!("actor must be `R` or `H`, found `{actor}`")))?;
    let params = parse_params(p, ctx)?;
    p.expect_keyword("at")?;
    let place = match p.next() {
        (Tok::Var(v), _) => PlaceExpr::Param(v),
        (Tok::Ident(c), sp) => {
            if !ctx.model.places.contains(&c) {
                return Err(Diagnostic::error(sp, format!("`{c}` is not a declared place")));
            }
            PlaceExpr::Const(c)
        }
        _ => {
            p.pos -= 1;
            return p.unexpected("a place or `?parameter`");
        }
    };
    p.expect(Tok::LBrace)?;
    let (mut pre, mut adds, mut dels) = (Vec::new(), Vec::new(), Vec::new());
    loop {
        if p.eat(&Tok::RBrace) {
            break;
        }
        if p.is_keyword("pre") {
            p.next();
            pre.extend(parse_lit_list(p, ctx)?);
        } else if p.is_keyword("add") {
            p.next();
            adds.extend(parse_atom_list(p, ctx)?);
        } else if p.is_keyword("del") {
            p.next();
            dels.extend(parse_atom_list(p, ctx)?);
        } else {
            return p.unexpected("`pre`, `add`, `del` or `}`");
        }
    }
    Ok(ActionSchema {
        name,
        actor,
        params,
        place,
        pre,
        adds,
        dels,
        ontic: true,
        span,
    })
}

fn parse_task_template(p: &mut Parser, ctx: &DomainCtx) -> PResult<TaskTemplate> {
    let (name, _) = p.ident("a task name")?;
    p.expect(Tok::LParen)?;
    let mut args = Vec::new();
    if !p.eat(&Tok::RParen) {
        loop {
            args.push(parse_term(p, ctx)?);
            if p.eat(&Tok::RParen) {
                break;
            }
            p.expect(Tok::Comma)?;
        }
    }
    Ok(TaskTemplate { name, args })
}

fn parse_method(p: &mut Parser, ctx: &DomainCtx, span: Span) -> PResult<MethodSchema> {
    let (name, nsp) = p.ident("a method name")?;
    if ctx.model.methods.iter().any(|m| m.name == name) {
        return Err(Diagnostic::error(nsp, format!("duplicate method `{name}`")));
    }
    p.expect_keyword("for")?;
    let (task, _) = p.ident("a task name")?;
    let params = parse_params(p, ctx)?;
    let decreasing = if p.is_keyword("decreasing") {
        p.next();
        let (pred, sp) = p.ident("a predicate name")?;
        if ctx.model.predicate(&pred).is_none() {
            return Err(Diagnostic::error(sp, format!("undeclared predicate `{pred}`")));
        }
        Some(pred)
    } else {
        None
    };
    p.expect(Tok::LBrace)?;
    let (mut pre, mut subtasks) = (Vec::new(), Vec::new());
    loop {
        if p.eat(&Tok::RBrace) {
            break;
        }
        if p.is_keyword("pre") {
            p.next();
            pre.extend(parse_lit_list(p, ctx)?);
        } else if p.is_keyword("do") {
            p.next();
            // `do` may be empty: the method refines the task into nothing.
            if matches!(p.peek(), Tok::Ident(_)) && *p.peek_at(1) == Tok::LParen {
                subtasks.push(parse_task_template(p, ctx)?);
                while p.eat(&Tok::Comma) {
                    subtasks.push(parse_task_template(p, ctx)?);
                }
            }
        } else {
            return p.unexpected("`pre`, `do` or `}`");
        }
    }
    Ok(MethodSchema {
        name,
        task,
        params,
        decreasing,
        pre,
        subtasks,
        span,
    })
}

fn parse_domain_body(p: &mut Parser) -> PResult<DomainModel> {
    p.expect_keyword("domain")?;
    let (name, _) = p.ident("a domain name")?;
    p.expect(Tok::LBrace)?;
    let mut ctx = DomainCtx {
        model: DomainModel {
            name,
            types: Vec::new(),
            places: Vec::new(),
            constants: Vec::new(),
            predicates: Vec::new(),
            actions: Vec::new(),
            methods: Vec::new(),
            rules: Vec::new(),
            copresence: Vec::new(),
        },
    };
    let mut copresence_set = false;
    loop {
        if p.eat(&Tok::RBrace) {
            break;
        }
        let (kw, span) = p.ident("a declaration or `}`")?;
        match kw.as_str() {
            "types" | "places" => {
                while let Tok::Ident(s) = p.peek().clone() {
                    if DOMAIN_KEYWORDS.contains(&s.as_str()) {
                        break;
                    }
                    let sp = p.next().1;
                    let known = ctx.model.object_type(&s).is_some() || ctx.model.has_type(&s);
                    if known {
                        return Err(Diagnostic::error(sp, format!("`{s}` is already declared")));
                    }
                    if kw == "types" {
                        ctx.model.types.push(s);
                    } else {
                        ctx.model.places.push(s);
                    }
                }
            }
            "constant" => {
                let (c, sp) = p.ident("a constant name")?;
                p.expect(Tok::Colon)?;
                let (ty, tsp) = p.ident("a type name")?;
                if ctx.model.object_type(&c).is_some() {
                    return Err(Diagnostic::error(sp, format!("`{c}` is already declared")));
                }
                if !ctx.model.has_type(&ty) {
                    return Err(Diagnostic::error(tsp, format!("undeclared type `{ty}`")));
                }
                ctx.model.constants.push((c, ty));
            }
            "predicate" => {
                let (pname, sp) = p.ident("a predicate name")?;
                if ctx.model.predicate(&pname).is_some() {
                    return Err(Diagnostic::error(sp, format!("duplicate predicate `{pname}`")));
                }
                p.expect(Tok::LParen)?;
                let mut arg_types = Vec::new();
                if !p.eat(&Tok::RParen) {
                    loop {
                        let (ty, tsp) = p.ident("a type name")?;
                        if !ctx.model.has_type(&ty) {
                            return Err(Diagnostic::error(tsp, format!("undeclared type `{ty}`")));
                        }
                        arg_types.push(ty);
                        if p.eat(&Tok::RParen) {
                            break;
                        }
                        p.expect(Tok::Comma)?;
                    }
                }
                let class = match p.ident("`observable` or `inferable`")? {
                    (s, _) if s == "observable" => Observability::ObservableByRule,
                    (s, _) if s == "inferable" => Observability::InferableOnly,
                    (s, csp) => {
                        return Err(Diagnostic::error(
                            csp,
                            format!("expected `observable` or `inferable`, found `{s}`"),
                        ))
                    }
                };
                ctx.model.predicates.push(PredicateDecl {
                    name: pname,
                    arg_types,
                    class,
                    span,
                });
            }
            "copresent" => {
                p.expect_keyword("when")?;
                ctx.model.copresence = parse_lit_list(p, &ctx)?;
                copresence_set = true;
            }
            "action" => {
                let a = parse_action(p, &ctx, span)?;
                ctx.model.actions.push(a);
            }
            "method" => {
                let m = parse_method(p, &ctx, span)?;
                ctx.model.methods.push(m);
            }
            "rule" => {
                let (rname, _) = p.ident("a rule name")?;
                p.expect(Tok::Colon)?;
                let target = parse_atom_template(p, &ctx)?;
                let antecedent = if p.is_keyword("if") {
                    p.next();
                    parse_lit_list(p, &ctx)?
                } else {
                    Vec::new()
                };
                ctx.model.rules.push(KnowledgeRule {
                    name: rname,
                    target,
                    antecedent,
                    span,
                });
            }
            other => {
                return Err(Diagnostic::error(span, format!("unknown declaration `{other}`")));
            }
        }
    }
    if *p.peek() != Tok::Eof {
        return p.unexpected("end of input");
    }
    if !copresence_set {
        ctx.model.copresence = DomainModel::default_copresence();
    }
    Ok(ctx.model)
}

/// Parses a domain description. Deterministic; the first error stops parsing.
pub fn parse_domain(text: &str) -> Result<DomainModel, Vec<Diagnostic>> {
    let mut p = Parser::new(text).map_err(|d| vec![d])?;
    parse_domain_body(&mut p).map_err(|d| vec![d])
}

// ---------------------------------------------------------------------------
// Problem

struct ProblemCtx<'a> {
    dom: &'a DomainModel,
    objects: Vec<(String, String)>,
}

impl ProblemCtx<'_> {
    fn object_type(&self, name: &str) -> Option<&str> {
        self.dom.object_type(name).or_else(|| {
            self.objects
                .iter()
                .find(|(n, _)| n == name)
                .map(|(_, t)| t.as_str())
        })
    }

    fn ground_atom(&self, p: &mut Parser) -> PResult<Atom> {
        let (name, sp) = p.ident("a predicate name")?;
        let decl = self
            .dom
            .predicate(&name)
            .ok_or_else(|| Diagnostic::error(sp, format!("undeclared predicate `{name}`")))?;
        p.expect(Tok::LParen)?;
        let mut args = Vec::new();
        if !p.eat(&Tok::RParen) {
            loop {
                let (arg, asp) = p.ident("an object name")?;
                match self.object_type(&arg) {
                    None => {
                        return Err(Diagnostic::error(asp, format!("unknown object `{arg}`")));
                    }
                    Some(ty) => {
                        if let Some(want) = decl.arg_types.get(args.len()) {
                            if want != ty {
                                return Err(Diagnostic::error(
                                    asp,
                                    format!("`{arg}` has type `{ty}`, `{name}` expects `{want}`"),
                                ));
                            }
                        }
                    }
                }
                args.push(arg);
                if p.eat(&Tok::RParen) {
                    break;
                }
                p.expect(Tok::Comma)?;
            }
        }
        if args.len() != decl.arg_types.len() {
            return Err(Diagnostic::error(
                sp,
                format!(
                    "arity mismatch: `{name}` takes {} argument(s), found {}",
                    decl.arg_types.len(),
                    args.len()
                ),
            ));
        }
        Ok(Atom {
            predicate: name,
            args,
        })
    }

    fn ground_task(&self, p: &mut Parser) -> PResult<Task> {
        let (name, sp) = p.ident("a task name")?;
        if !self.dom.is_task(&name) && self.dom.action(&name).is_none() {
            return Err(Diagnostic::error(sp, format!("root task `{name}` is unresolvable")));
        }
        p.expect(Tok::LParen)?;
        let mut args = Vec::new();
        if !p.eat(&Tok::RParen) {
            loop {
                let (arg, asp) = p.ident("an object name")?;
                if self.object_type(&arg).is_none() {
                    return Err(Diagnostic::error(asp, format!("unknown object `{arg}`")));
                }
                args.push(arg);
                if p.eat(&Tok::RParen) {
                    break;
                }
                p.expect(Tok::Comma)?;
            }
        }
        Ok(Task { name, args })
    }
}

fn parse_problem_body(p: &mut Parser, dom: &DomainModel) -> PResult<ProblemInstance> {
    p.expect_keyword("problem")?;
    let (name, _) = p.ident("a problem name")?;
    p.expect_keyword("for")?;
    let (dname, dsp) = p.ident("a domain name")?;
    if dname != dom.name {
        return Err(Diagnostic::error(
            dsp,
            format!("problem is for domain `{dname}`, but `{}` was loaded", dom.name),
        ));
    }
    p.expect(Tok::LBrace)?;
    let mut ctx = ProblemCtx {
        dom,
        objects: Vec::new(),
    };
    let mut ground_truth = BeliefBase::new();
    let mut overrides: Vec<Literal> = Vec::new();
    let mut root_r = Vec::new();
    let mut root_h = Vec::new();
    let mut k = 0u32;
    let mut comm = false;
    let mut first = Agent::H;
    loop {
        if p.eat(&Tok::RBrace) {
            break;
        }
        let (kw, span) = p.ident("a problem section or `}`")?;
        match kw.as_str() {
            "objects" => {
                let mut names = Vec::new();
                while let Tok::Ident(_) = p.peek() {
                    names.push(p.ident("an object name")?);
                }
                p.expect(Tok::Colon)?;
                let (ty, tsp) = p.ident("a type name")?;
                if !dom.has_type(&ty) {
                    return Err(Diagnostic::error(tsp, format!("undeclared type `{ty}`")));
                }
                for (n, nsp) in names {
                    if ctx.object_type(&n).is_some() {
                        return Err(Diagnostic::error(nsp, format!("`{n}` is already declared")));
                    }
                    ctx.objects.push((n, ty.clone()));
                }
            }
            "budget" => match p.next() {
                (Tok::Int(v), sp) => {
                    if v < 0 {
                        return Err(Diagnostic::error(sp, format!("K must be non-negative, found {v}")));
                    }
                    k = v as u32;
                }
                _ => {
                    p.pos -= 1;
                    return p.unexpected("an integer");
                }
            },
            "communication" => {
                let (v, sp) = p.ident("`on` or `off`")?;
                comm = match v.as_str() {
                    "on" => true,
                    "off" => false,
                    _ => return Err(Diagnostic::error(sp, format!("expected `on` or `off`, found `{v}`"))),
                };
            }
            "start" => {
                let (v, sp) = p.ident("`R` or `H`")?;
                first = Agent::parse(&v)
                    .ok_or_else(|| Diagnostic::error(sp, format!("expected `R` or `H`, found `{v}`")))?;
            }
            "init" | "human_belief" => {
                p.expect(Tok::LBrace)?;
                loop {
                    if p.eat(&Tok::RBrace) {
                        break;
                    }
                    let positive = !(p.is_keyword("not") && matches!(p.peek_at(1), Tok::Ident(_)));
                    if !positive {
                        p.next();
                    }
                    let atom = ctx.ground_atom(p)?;
                    if kw == "init" {
                        if !positive {
                            return Err(Diagnostic::error(span, "`init` lists positive atoms only"));
                        }
                        ground_truth.insert(atom);
                    } else {
                        overrides.push(Literal { atom, positive });
                    }
                    p.eat(&Tok::Comma);
                }
            }
            "task" => {
                let (who, sp) = p.ident("`R` or `H`")?;
                let agent = Agent::parse(&who)
                    .ok_or_else(|| Diagnostic::error(sp, format!("expected `R` or `H`, found `{who}`")))?;
                let mut tasks = Vec::new();
                while matches!(p.peek(), Tok::Ident(_)) && *p.peek_at(1) == Tok::LParen {
                    tasks.push(ctx.ground_task(p)?);
                    p.eat(&Tok::Comma);
                }
                match agent {
                    Agent::R => root_r = tasks,
                    Agent::H => root_h = tasks,
                }
            }
            other => {
                return Err(Diagnostic::error(span, format!("unknown problem section `{other}`")));
            }
        }
    }
    if *p.peek() != Tok::Eof {
        return p.unexpected("end of input");
    }
    let mut bel_h = ground_truth.clone();
    for l in &overrides {
        bel_h.set(&l.atom, l.positive);
    }
    Ok(ProblemInstance {
        name,
        domain: dname,
        objects: ctx.objects,
        ground_truth,
        initial_bel_h: bel_h,
        belief_overrides: overrides,
        root_task_r: root_r,
        root_task_h: root_h,
        k,
        comm_allowed: comm,
        first_actor: first,
    })
}

/// Parses a problem against an already parsed domain.
pub fn parse_problem(text: &str, dom: &DomainModel) -> Result<ProblemInstance, Vec<Diagnostic>> {
    let mut p = Parser::new(text).map_err(|d| vec![d])?;
    parse_problem_body(&mut p, dom).map_err(|d| vec![d])
}

/// Variables of a literal list, used by the validator.
pub(crate) fn template_vars(lits: &[LitTemplate]) -> BTreeSet<String> {
    lits.iter()
        .flat_map(|l| l.atom.vars().map(str::to_string))
        .collect()
}
