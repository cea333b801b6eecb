//! Property suites shared by the `properties` and `acceptance` test targets.
//! Each suite runs [`CASES`] generated cases and reports the first failure.

use std::collections::BTreeSet;
use std::fmt::Write;
use std::sync::OnceLock;

use proptest::prelude::*;
use proptest::test_runner::TestRunner;

use ehatp::dsl::{parse_domain, DomainModel, ProblemInstance};
use ehatp::htn::{alignment_diff, first_primitives, Task, TaskNetwork};
use ehatp::instances::TABLE1;
use ehatp::kernel::{
    build_epistemic_action, copresent, human_options, product_update, situation_assessment,
    EpistemicAction, EventAction,
};
use ehatp::model::{Agent, Atom, BeliefBase, EpistemicState, Literal};
use ehatp::solver::{initial_state, is_terminal, propagate_revised_status, AndOrGraph, Edge, NodeKind, Status};

pub const CASES: u32 = 1000;

fn run<S: Strategy>(strategy: S, test: impl Fn(S::Value) -> Result<(), TestCaseError>) -> Result<(), String> {
    let mut runner = TestRunner::new(ProptestConfig {
        cases: CASES,
        failure_persistence: None,
        ..ProptestConfig::default()
    });
    runner.run(&strategy, test).map_err(|e| e.to_string())
}

fn loaded() -> &'static [(DomainModel, ProblemInstance)] {
    static L: OnceLock<Vec<(DomainModel, ProblemInstance)>> = OnceLock::new();
    L.get_or_init(|| TABLE1.iter().map(|i| i.load().unwrap()).collect())
}

fn options(s: &EpistemicState, dom: &DomainModel) -> Vec<EventAction> {
    let d = s.designated_world();
    let mut out: Vec<EventAction> = match s.actor_turn {
        Agent::R => first_primitives(dom, &d.tn_r, &d.bel_r, Agent::R)
            .unwrap()
            .into_iter()
            .map(EventAction::Act)
            .collect(),
        Agent::H => human_options(s, dom).unwrap().0.into_iter().map(EventAction::Act).collect(),
    };
    out.push(EventAction::Noop);
    out.retain(|c| build_epistemic_action(s, dom, s.actor_turn, c).is_ok());
    out
}

/// One physical step of a random walk: the state before, the epistemic
/// action, the raw product and its assessment.
struct Step {
    before: EpistemicState,
    action: EpistemicAction,
    raw: EpistemicState,
    after: EpistemicState,
}

fn walk(dom: &DomainModel, prob: &ProblemInstance, picks: &[usize]) -> Vec<Step> {
    let mut s = situation_assessment(&initial_state(prob), dom);
    let mut out = Vec::new();
    for &p in picks {
        if is_terminal(&s, dom) {
            break;
        }
        let opts = options(&s, dom);
        if opts.is_empty() {
            break;
        }
        let choice = &opts[p % opts.len()];
        let action = build_epistemic_action(&s, dom, s.actor_turn, choice).unwrap();
        let raw = product_update(&s, &action, dom).unwrap();
        let after = situation_assessment(&raw, dom);
        out.push(Step {
            before: s,
            action,
            raw,
            after: after.clone(),
        });
        s = after;
    }
    out
}

fn hypotheses(s: &EpistemicState) -> BTreeSet<String> {
    s.worlds.iter().map(|w| format!("{}|{}", w.bel_r, w.tn_r)).collect()
}

fn walks() -> impl Strategy<Value = (usize, Vec<usize>)> {
    (0..TABLE1.len(), prop::collection::vec(0usize..8, 1..14))
}


pub fn assessment_keeps_the_designated_world() -> Result<(), String> {
    run(walks(), |(inst, picks)| {
        let (dom, prob) = &loaded()[inst];
        for st in walk(dom, prob, &picks) {
            prop_assert!(st.after.has_designated());
            prop_assert_eq!(&st.after.designated_world().bel_r, &st.raw.designated_world().bel_r);
            prop_assert_eq!(&st.after.designated_world().tn_r, &st.raw.designated_world().tn_r);
        }
        Ok(())
    })
}

pub fn assessment_only_removes_and_is_idempotent() -> Result<(), String> {
    run(walks(), |(inst, picks)| {
        let (dom, prob) = &loaded()[inst];
        for st in walk(dom, prob, &picks) {
            prop_assert!(st.after.len() <= st.raw.len());
            prop_assert!(hypotheses(&st.after).is_subset(&hypotheses(&st.raw)));
            let twice = situation_assessment(&st.after, dom);
            prop_assert_eq!(twice.canonical_string(), st.after.canonical_string());
        }
        Ok(())
    })
}

pub fn product_has_one_world_per_applicable_pair() -> Result<(), String> {
    run(walks(), |(inst, picks)| {
        let (dom, prob) = &loaded()[inst];
        for st in walk(dom, prob, &picks) {
            let pairs = st
                .action
                .events
                .iter()
                .filter(|e| match (&st.action.actor, &e.action, e.designated) {
                    (Agent::R, EventAction::Act(a), false) => {
                        let src = st.before.world(e.source_world).unwrap();
                        a.applicable(dom, &src.bel_rh).unwrap()
                    }
                    _ => true,
                })
                .count();
            prop_assert_eq!(st.raw.len(), pairs);
        }
        Ok(())
    })
}

pub fn worlds_grow_at_most_geometrically_while_apart() -> Result<(), String> {
    run(walks(), |(inst, picks)| {
        let (dom, prob) = &loaded()[inst];
        let k = prob.k;
        let mut sep: Option<(usize, usize)> = None; // (worlds at separation, max branching)
        for st in walk(dom, prob, &picks) {
            let before_cop = copresent(st.before.designated_world(), &dom.copresence);
            if before_cop {
                sep = None;
            } else if sep.is_none() {
                sep = Some((st.before.len(), 0));
            }
            if let Some((w0, m)) = sep.as_mut() {
                if st.action.actor == Agent::R {
                    for w in &st.before.worlds {
                        let n = st
                            .action
                            .events
                            .iter()
                            .filter(|e| e.source_world == w.id && !e.action.is_noop())
                            .count();
                        *m = (*m).max(n);
                    }
                }
                let bound: usize = (0..=k).map(|i| m.pow(i)).sum();
                prop_assert!(st.raw.len() <= *w0 * bound, "{} > {} * {}", st.raw.len(), w0, bound);
            }
        }
        Ok(())
    })
}

// ---------------------------------------------------------------------------
// Status propagation against a brute-force fixpoint.

fn oracle(kinds: &[bool], children: &[Vec<usize>], leaf: &[Option<Status>]) -> Vec<Status> {
    let mut st: Vec<Status> = leaf.iter().map(|l| l.unwrap_or(Status::Unknown)).collect();
    loop {
        let mut changed = false;
        for i in 0..st.len() {
            if children[i].is_empty() || st[i] != Status::Unknown {
                continue;
            }
            let cs: Vec<Status> = children[i].iter().map(|&c| st[c]).collect();
            let or = kinds[i];
            let new = if or {
                if cs.contains(&Status::Done) {
                    Status::Done
                } else if cs.iter().all(|&c| c == Status::Dead) {
                    Status::Dead
                } else {
                    Status::Unknown
                }
            } else if cs.contains(&Status::Dead) {
                Status::Dead
            } else if cs.iter().all(|&c| c == Status::Done) {
                Status::Done
            } else {
                Status::Unknown
            };
            if new != Status::Unknown {
                st[i] = new;
                changed = true;
            }
        }
        if !changed {
            return st;
        }
    }
}

fn graphs() -> impl Strategy<Value = (Vec<bool>, Vec<Vec<usize>>, Vec<bool>, Vec<usize>)> {
    (1usize..=50).prop_flat_map(|n| {
        (
            prop::collection::vec(any::<bool>(), n),
            prop::collection::vec(
                prop::option::weighted(0.6, prop::collection::vec(0..n, 1..4)),
                n,
            )
            .prop_map(|v| v.into_iter().map(Option::unwrap_or_default).collect()),
            prop::collection::vec(any::<bool>(), n),
            Just((0..n).collect::<Vec<_>>()).prop_shuffle(),
        )
    })
}

fn dummy_state() -> EpistemicState {
    let (_, prob) = &loaded()[0];
    initial_state(prob)
}


pub fn propagation_matches_fixpoint() -> Result<(), String> {
    run(graphs(), |(kinds, children, done, order)| {
        let n = kinds.len();
        let s = dummy_state();
        let mut g = AndOrGraph::new(s.clone(), true);
        for _ in 1..n {
            g.add_node(s.clone(), 0, true);
        }
        for i in 0..n {
            g.nodes[i].kind = if kinds[i] { NodeKind::Or } else { NodeKind::And };
            g.nodes[i].expanded = true;
            for &c in &children[i] {
                g.link(i, Edge::Noop, c);
            }
        }
        let leaf: Vec<Option<Status>> = (0..n)
            .map(|i| children[i].is_empty().then_some(if done[i] { Status::Done } else { Status::Dead }))
            .collect();
        for &i in &order {
            if let Some(st) = leaf[i] {
                g.set_status(i, st);
                propagate_revised_status(&mut g, i);
            }
        }
        let want = oracle(&kinds, &children, &leaf);
        let got: Vec<Status> = g.nodes.iter().map(|n| n.status).collect();
        prop_assert_eq!(got, want);
        Ok(())
    })
}

// ---------------------------------------------------------------------------
// alignment_diff minimality.

const ALIGN: &str = r#"
domain align {
  types cube
  places mt
  predicate on(cube, place) observable
  predicate ready(cube) observable
  predicate lit(place) observable
  predicate clean(cube) observable
  predicate holding(agent, cube) observable
  action pick by R (?c: cube) at mt {
    pre on(?c, mt), ready(?c), lit(mt), not holding(R, ?x)
    add holding(R, ?c)
    del on(?c, mt)
  }
  action wipe by R (?c: cube) at mt {
    pre on(?c, mt), not clean(?c)
    add clean(?c)
  }
  action drop by R (?c: cube) at mt {
    pre holding(R, ?c), clean(?c)
    add on(?c, mt)
    del holding(R, ?c)
  }
  method by_pick for work(?c: cube) { do pick(?c) }
  method by_wipe for work(?c: cube) { do wipe(?c) }
  method by_drop for work(?c: cube) { do drop(?c) }
  rule see_on: on(?c, ?p)
  rule see_ready: ready(?c)
  rule see_lit: lit(?p)
  rule see_clean: clean(?c)
  rule see_holding: holding(?a, ?c)
}
"#;

fn align_domain() -> &'static DomainModel {
    static D: OnceLock<DomainModel> = OnceLock::new();
    D.get_or_init(|| parse_domain(ALIGN).unwrap())
}

fn align_universe() -> Vec<Atom> {
    let mut u = vec![Atom::new("lit", ["mt"])];
    for c in ["c1", "c2"] {
        u.push(Atom::new("on", [c, "mt"]));
        u.push(Atom::new("ready", [c]));
        u.push(Atom::new("clean", [c]));
        u.push(Atom::new("holding", ["R", c]));
    }
    u
}

fn transfer(b: &BeliefBase, facts: &[&Literal]) -> BeliefBase {
    let mut out = b.clone();
    for l in facts {
        out.set(&l.atom, l.positive);
    }
    out
}


pub fn alignment_diff_is_minimal() -> Result<(), String> {
    run((
        prop::collection::vec(any::<bool>(), 9),
        prop::collection::vec(any::<bool>(), 9),
        prop::sample::select(vec!["c1", "c2"]),
    ), |(r_bits, rh_bits, task)| {
        let dom = align_domain();
        let u = align_universe();
        let base = |bits: &[bool]| BeliefBase::from_atoms(u.iter().zip(bits).filter(|p| *p.1).map(|p| p.0.clone()));
        let (bel_r, bel_rh) = (base(&r_bits), base(&rh_bits));
        let tn = TaskNetwork::new(vec![Task::new("work", [task])]);
        let target = first_primitives(dom, &tn, &bel_r, Agent::R).unwrap();
        let aligned = |b: &BeliefBase| first_primitives(dom, &tn, b, Agent::R).unwrap() == target;
        let Ok(diff) = alignment_diff(dom, &bel_r, &tn, &bel_rh, &tn) else {
            return Ok(());
        };
        let diff: Vec<&Literal> = diff.iter().collect();
        prop_assert!(aligned(&transfer(&bel_rh, &diff)));
        prop_assert_eq!(diff.is_empty(), aligned(&bel_rh));
        for l in &diff {
            prop_assert_eq!(bel_r.contains(&l.atom), l.positive);
        }
        if diff.len() <= 3 {
            for mask in 0..(1u32 << diff.len()) - 1 {
                let sub: Vec<&Literal> = (0..diff.len()).filter(|i| mask & (1 << i) != 0).map(|i| diff[i]).collect();
                prop_assert!(!aligned(&transfer(&bel_rh, &sub)), "proper subset {:?} aligns", sub);
            }
        }
        Ok(())
    })
}

// ---------------------------------------------------------------------------
// DSL round-trip over generated domains.

#[derive(Debug, Clone)]
struct ActSpec {
    robot: bool,
    place: usize,
    pre: Vec<(usize, bool)>,
    add: Vec<usize>,
    del: Vec<usize>,
}

#[derive(Debug, Clone)]
struct MethSpec {
    action: usize,
    pre: Vec<(usize, bool)>,
    empty: bool,
}

#[derive(Debug, Clone)]
struct DomSpec {
    ntypes: usize,
    nplaces: usize,
    preds: Vec<(Vec<usize>, bool)>,
    actions: Vec<ActSpec>,
    methods: Vec<MethSpec>,
    copresence_line: bool,
    constant: bool,
    rule_if: Vec<bool>,
}

fn dom_specs() -> impl Strategy<Value = DomSpec> {
    (1usize..=3, 1usize..=2, any::<bool>(), any::<bool>()).prop_flat_map(|(nt, np, cop, cst)| {
        let arg = 0..nt + 2;
        let preds = prop::collection::vec((prop::collection::vec(arg, 0..3), any::<bool>()), 1..5);
        preds.prop_flat_map(move |preds| {
            let np_total = preds.len() + 1;
            let lit = (0..np_total, any::<bool>());
            let act = (
                any::<bool>(),
                0..np,
                prop::collection::vec(lit.clone(), 0..3),
                prop::collection::vec(0..np_total, 0..3),
                prop::collection::vec(0..np_total, 0..2),
            )
                .prop_map(|(robot, place, pre, add, del)| ActSpec { robot, place, pre, add, del });
            let acts = prop::collection::vec(act, 1..4);
            let preds = preds.clone();
            acts.prop_flat_map(move |actions| {
                let na = actions.len();
                let meth = (0..na, prop::collection::vec(lit.clone(), 0..3), any::<bool>())
                    .prop_map(|(action, pre, empty)| MethSpec { action, pre, empty });
                (
                    Just(preds.clone()),
                    Just(actions),
                    prop::collection::vec(meth, 0..4),
                    prop::collection::vec(any::<bool>(), np_total),
                )
            })
            .prop_map(move |(preds, actions, methods, rule_if)| DomSpec {
                ntypes: nt,
                nplaces: np,
                preds,
                actions,
                methods,
                copresence_line: cop,
                constant: cst,
                rule_if,
            })
        })
    })
}

fn pred_name(p: usize) -> String {
    if p == 0 {
        "at".into()
    } else {
        format!("q{p}")
    }
}

struct Render<'a> {
    spec: &'a DomSpec,
    serial: usize,
}

impl Render<'_> {
    /// Predicate 0 is always `at(agent, place)`, which co-presence needs.
    fn arg_types(&self, p: usize) -> Vec<usize> {
        if p == 0 {
            vec![self.spec.ntypes, self.spec.ntypes + 1]
        } else {
            self.spec.preds[p - 1].0.clone()
        }
    }

    fn type_name(&self, t: usize) -> String {
        match t.checked_sub(self.spec.ntypes) {
            None => format!("t{t}"),
            Some(0) => "agent".into(),
            Some(_) => "place".into(),
        }
    }

    fn atom(&mut self, p: usize, params: &mut Vec<(String, String)>) -> String {
        let mut args = Vec::new();
        for t in self.arg_types(p) {
            self.serial += 1;
            match t.checked_sub(self.spec.ntypes) {
                None => {
                    let v = format!("v{}", self.serial);
                    params.push((v.clone(), self.type_name(t)));
                    args.push(format!("?{v}"));
                }
                Some(0) => args.push(if self.serial.is_multiple_of(2) { "R" } else { "H" }.to_string()),
                Some(_) => args.push(format!("p{}", self.serial % self.spec.nplaces)),
            }
        }
        format!("{}({})", pred_name(p), args.join(", "))
    }

    fn text(&mut self) -> (String, Vec<Vec<(String, String)>>) {
        let spec = self.spec;
        let mut s = String::from("domain g {\n  types");
        for t in 0..spec.ntypes {
            let _ = write!(s, " t{t}");
        }
        s.push_str("\n  places");
        for p in 0..spec.nplaces {
            let _ = write!(s, " p{p}");
        }
        s.push('\n');
        if spec.constant {
            s.push_str("  constant k0: t0\n");
        }
        s.push_str("  predicate at(agent, place) observable\n");
        for (i, (args, inferable)) in spec.preds.iter().enumerate() {
            let ts: Vec<String> = args.iter().map(|&t| self.type_name(t)).collect();
            let class = if *inferable { "inferable" } else { "observable" };
            let _ = writeln!(s, "  predicate q{}({}) {class}", i + 1, ts.join(", "));
        }
        if spec.copresence_line {
            s.push_str("  copresent when at(R, ?p) and at(H, ?p)\n");
        }
        let mut action_params = Vec::new();
        for (i, a) in spec.actions.iter().enumerate() {
            let mut params = Vec::new();
            let pre: Vec<String> = a
                .pre
                .iter()
                .map(|&(p, pos)| format!("{}{}", if pos { "" } else { "not " }, self.atom(p, &mut params)))
                .collect();
            let add: Vec<String> = a.add.iter().map(|&p| self.atom(p, &mut params)).collect();
            let del: Vec<String> = a.del.iter().map(|&p| self.atom(p, &mut params)).collect();
            let ps: Vec<String> = params.iter().map(|(v, t)| format!("?{v}: {t}")).collect();
            let _ = writeln!(
                s,
                "  action a{i} by {} ({}) at p{} {{",
                if a.robot { "R" } else { "H" },
                ps.join(", "),
                a.place
            );
            for (kw, items) in [("pre", pre), ("add", add), ("del", del)] {
                if !items.is_empty() {
                    let _ = writeln!(s, "    {kw} {}", items.join(", "));
                }
            }
            s.push_str("  }\n");
            action_params.push(params);
        }
        for (j, m) in spec.methods.iter().enumerate() {
            let params = &action_params[m.action];
            let ps: Vec<String> = params.iter().map(|(v, t)| format!("?{v}: {t}")).collect();
            let mut scratch = Vec::new();
            let pre: Vec<String> = m
                .pre
                .iter()
                .map(|&(p, pos)| format!("{}{}", if pos { "" } else { "not " }, self.atom(p, &mut scratch)))
                .collect();
            let _ = writeln!(s, "  method m{j} for job{j}({}) {{", ps.join(", "));
            if !pre.is_empty() {
                let _ = writeln!(s, "    pre {}", pre.join(", "));
            }
            if m.empty {
                s.push_str("    do\n");
            } else {
                let args: Vec<String> = params.iter().map(|(v, _)| format!("?{v}")).collect();
                let _ = writeln!(s, "    do a{}({})", m.action, args.join(", "));
            }
            s.push_str("  }\n");
        }
        for p in 0..=spec.preds.len() {
            if p > 0 && spec.preds[p - 1].1 {
                continue;
            }
            let vars: Vec<String> = (0..self.arg_types(p).len()).map(|i| format!("?r{i}")).collect();
            let cond = if spec.rule_if[p] { " if at(H, p0)" } else { "" };
            let _ = writeln!(s, "  rule see{p}: {}({}){cond}", pred_name(p), vars.join(", "));
        }
        s.push_str("}\n");
        (s, action_params)
    }
}


pub fn printed_domains_parse_back_identically() -> Result<(), String> {
    run(dom_specs(), |spec| {
        let (text, _) = Render { spec: &spec, serial: 0 }.text();
        let first = match parse_domain(&text) {
            Ok(d) => d,
            Err(e) => return Err(TestCaseError::fail(format!("generator produced invalid text:\n{text}\n{e:?}"))),
        };
        let printed = first.to_string();
        let second = parse_domain(&printed).map_err(|e| TestCaseError::fail(format!("{printed}\n{e:?}")))?;
        prop_assert_eq!(&second, &first);
        prop_assert_eq!(second.to_string(), printed);
        Ok(())
    })
}

#[allow(dead_code)]
pub type Suite = (&'static str, fn() -> Result<(), String>);

#[allow(dead_code)]
pub const SUITES: [Suite; 7] = [
    ("SA keeps the designated world", assessment_keeps_the_designated_world),
    ("SA is monotone and idempotent", assessment_only_removes_and_is_idempotent),
    ("product world-count conservation", product_has_one_world_per_applicable_pair),
    ("world growth bound while apart", worlds_grow_at_most_geometrically_while_apart),
    ("status propagation equals fixpoint", propagation_matches_fixpoint),
    ("alignment_diff minimality", alignment_diff_is_minimal),
    ("DSL print/parse round-trip", printed_domains_parse_back_identically),
];
