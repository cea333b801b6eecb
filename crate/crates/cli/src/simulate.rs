use std::collections::BTreeSet;
use std::fs;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};

use rand::rngs::StdRng;
use rand::{RngExt, SeedableRng};

use ehatp::dsl::DomainModel;
use ehatp::kernel::{copresent, situation_assessment};
use ehatp::model::{Atom, EpistemicState};
use ehatp::solver::{
    apply_edge, eval_terminal, initial_state, is_terminal, simulate_exhaustive, Edge, Policy, PolicyKind,
    SimulationTrace,
};

use crate::{load, Outcome};

pub enum Mode {
    Exhaustive,
    Interactive,
    Random(u64),
}

fn resolve(policy_path: &Path, file: &Option<String>, what: &str) -> Option<PathBuf> {
    let Some(f) = file else {
        eprintln!("{}: policy does not name its {what} file", policy_path.display());
        return None;
    };
    let p = PathBuf::from(f);
    if p.is_absolute() {
        return Some(p);
    }
    Some(policy_path.parent().unwrap_or(Path::new(".")).join(p))
}

pub fn cmd_simulate(policy_path: &Path, mode: Mode) -> Outcome {
    let text = match fs::read_to_string(policy_path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("{}: {e}", policy_path.display());
            return Outcome::Diagnostics;
        }
    };
    let pol = match Policy::from_json(&text) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("{}: not a policy: {e}", policy_path.display());
            return Outcome::Diagnostics;
        }
    };
    let (Some(d), Some(p)) = (
        resolve(policy_path, &pol.domain_file, "domain"),
        resolve(policy_path, &pol.problem_file, "problem"),
    ) else {
        return Outcome::Diagnostics;
    };
    let Some((dom, prob)) = load(&d, &p) else {
        return Outcome::Diagnostics;
    };
    match mode {
        Mode::Exhaustive => exhaustive(&dom, &prob, &pol),
        Mode::Interactive => {
            let stdin = io::stdin();
            let mut lines = stdin.lock().lines();
            step_through(&dom, &prob, &pol, |labels| {
                print!("H> ");
                let _ = io::stdout().flush();
                loop {
                    let line = lines.next()?.ok()?;
                    let line = line.trim();
                    if let Ok(n) = line.parse::<usize>() {
                        if (1..=labels.len()).contains(&n) {
                            return Some(n - 1);
                        }
                    }
                    if let Some(i) = labels.iter().position(|l| l == line) {
                        return Some(i);
                    }
                    print!("pick 1..{} or an action label\nH> ", labels.len());
                    let _ = io::stdout().flush();
                }
            })
        }
        Mode::Random(seed) => {
            let mut rng = StdRng::seed_from_u64(seed);
            step_through(&dom, &prob, &pol, |labels| {
                let i = rng.random_range(0..labels.len());
                println!("H> {}", labels[i]);
                Some(i)
            })
        }
    }
}

fn print_trace(i: usize, t: &SimulationTrace) {
    println!("trace {}: {}", i + 1, if t.done { "DONE" } else { "DEAD" });
    for s in &t.steps {
        println!(
            "  {}: {:<28} {} |W|={}",
            s.actor,
            s.action,
            if s.copresent { "together" } else { "apart" },
            s.worlds
        );
    }
}

fn exhaustive(dom: &DomainModel, prob: &ehatp::dsl::ProblemInstance, pol: &Policy) -> Outcome {
    let traces = match simulate_exhaustive(dom, prob, pol) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {e}");
            return Outcome::Failed;
        }
    };
    let failed: Vec<usize> = (0..traces.len()).filter(|&i| !traces[i].done).collect();
    for (i, t) in traces.iter().enumerate() {
        print_trace(i, t);
    }
    println!("{} traces, {} DONE", traces.len(), traces.len() - failed.len());
    if failed.is_empty() {
        Outcome::Ok
    } else {
        for &i in &failed {
            eprintln!("trace {} does not finish the task", i + 1);
        }
        Outcome::Failed
    }
}

/// Atoms whose value H is unsure about, and atoms H believes wrongly in the
/// designated world.
fn divergence(s: &EpistemicState) -> (BTreeSet<Atom>, Vec<String>) {
    let mut unsure = BTreeSet::new();
    let all: BTreeSet<&Atom> = s.worlds.iter().flat_map(|w| w.bel_h.iter()).collect();
    for a in all {
        if s.worlds.iter().any(|w| !w.bel_h.contains(a)) {
            unsure.insert(a.clone());
        }
    }
    let d = s.designated_world();
    let wrong = d
        .bel_r
        .symmetric_difference(&d.bel_h)
        .filter(|a| !unsure.contains(*a))
        .map(|a| if d.bel_h.contains(a) { a.to_string() } else { format!("not {a}") })
        .collect();
    (unsure, wrong)
}

fn step_through(
    dom: &DomainModel,
    prob: &ehatp::dsl::ProblemInstance,
    pol: &Policy,
    mut choose: impl FnMut(&[String]) -> Option<usize>,
) -> Outcome {
    let mut s = situation_assessment(&initial_state(prob), dom);
    let mut id = 0;
    println!(
        "start: {} |W|={}",
        if copresent(s.designated_world(), &dom.copresence) { "together" } else { "apart" },
        s.len()
    );
    loop {
        let Some(node) = pol.node(id) else {
            eprintln!("error: policy has no node {id}");
            return Outcome::Diagnostics;
        };
        if node.children.is_empty() {
            let done = node.kind == PolicyKind::Leaf && is_terminal(&s, dom) && eval_terminal(&s, dom);
            println!("{}", if done { "DONE" } else { "DEAD" });
            return if done { Outcome::Ok } else { Outcome::Failed };
        }
        let labels: Vec<String> = node
            .children
            .iter()
            .map(|&c| pol.nodes[c].edge.clone().unwrap_or_default())
            .collect();
        let pick = if node.kind == PolicyKind::And {
            for (i, l) in labels.iter().enumerate() {
                println!("  [{}] {l}", i + 1);
            }
            match choose(&labels) {
                Some(i) => i,
                None => {
                    println!("stopped");
                    return Outcome::Ok;
                }
            }
        } else {
            0
        };
        let label = &labels[pick];
        let Some(edge) = Edge::parse(label) else {
            eprintln!("error: cannot read edge label `{label}`");
            return Outcome::Diagnostics;
        };
        let before = s.len();
        let actor = s.actor_turn;
        s = match apply_edge(&s, dom, &edge) {
            Ok(n) => n,
            Err(e) => {
                eprintln!("error: `{label}` is not a legal step: {e}");
                return Outcome::Failed;
            }
        };
        id = node.children[pick];
        let cop = copresent(s.designated_world(), &dom.copresence);
        println!(
            "{actor}: {label}  [{}] |W| {before} -> {}",
            if cop { "together" } else { "apart" },
            s.len()
        );
        let (unsure, wrong) = divergence(&s);
        if !unsure.is_empty() {
            let v: Vec<String> = unsure.iter().map(|a| a.to_string()).collect();
            println!("  H unsure about: {}", v.join(", "));
        }
        if !wrong.is_empty() {
            println!("  H believes wrongly: {}", wrong.join(", "));
        }
    }
}
