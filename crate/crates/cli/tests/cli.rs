use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use ehatp::instances;
use ehatp::kernel::{copresent, situation_assessment};
use ehatp::solver::{apply_edge, initial_state, Edge, Policy, PolicyKind, PolicyNode};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ehatp"))
}

fn data(file: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/data").join(file)
}

fn fixture(file: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/data").join(file)
}

fn text(o: &[u8]) -> String {
    String::from_utf8_lossy(o).into_owned()
}

fn plan(dir: &Path, problem: &Path, metrics: bool) -> (Output, PathBuf, PathBuf) {
    let out = dir.join("policy.json");
    let csv = dir.join("metrics.csv");
    let mut cmd = bin();
    cmd.arg("plan")
        .arg("-d")
        .arg(data("cube_org.ehatp"))
        .arg("-p")
        .arg(problem)
        .arg("-o")
        .arg(&out);
    if metrics {
        cmd.arg("--metrics").arg(&csv);
    }
    (cmd.output().unwrap(), out, csv)
}

#[test]
fn plan_writes_policy_and_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let (o, policy, csv) = plan(dir.path(), &data("p1.ehatp"), true);
    assert!(o.status.success(), "{}", text(&o.stderr));
    let rows = std::fs::read_to_string(csv).unwrap();
    let mut lines = rows.lines();
    assert_eq!(lines.next(), Some("instance,K,comm,states,maxW,leaves,time_ms"));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(&row[..3], ["p1", "2", "N"]);
    assert_eq!((row[4], row[5]), ("4", "3"));
    let pol = Policy::from_json(&std::fs::read_to_string(policy).unwrap()).unwrap();
    assert_eq!(pol.leaves(), 3);
    assert!(pol.domain_file.unwrap().ends_with("cube_org.ehatp"));
}

#[test]
fn malformed_problem_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let (o, policy, _) = plan(dir.path(), &fixture("malformed.ehatp"), false);
    assert_eq!(o.status.code(), Some(1));
    assert!(text(&o.stderr).contains("malformed.ehatp:3:10: error"));
    assert!(!policy.exists());
}

#[test]
fn unreachable_goal_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let (o, _, _) = plan(dir.path(), &fixture("unreachable.ehatp"), false);
    assert_eq!(o.status.code(), Some(2));
    assert!(text(&o.stderr).contains("no joint solution"));
}

#[test]
fn missing_file_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let (o, _, _) = plan(dir.path(), &dir.path().join("nope.ehatp"), false);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn plan_is_byte_stable() {
    let dir = tempfile::tempdir().unwrap();
    let (a, pa, ca) = plan(dir.path(), &data("p4.ehatp"), true);
    assert!(a.status.success());
    let (first, first_csv) = (std::fs::read(&pa).unwrap(), std::fs::read_to_string(&ca).unwrap());
    let (b, pb, cb) = plan(dir.path(), &data("p4.ehatp"), true);
    assert!(b.status.success());
    assert_eq!(first, std::fs::read(pb).unwrap());
    let drop_time = |s: &str| -> Vec<String> {
        s.lines().map(|l| l.rsplit_once(',').unwrap().0.to_string()).collect()
    };
    assert_eq!(drop_time(&first_csv), drop_time(&std::fs::read_to_string(cb).unwrap()));
}

fn simulate(policy: &Path, mode: &str) -> Output {
    bin().arg("simulate").arg("-P").arg(policy).arg(mode).output().unwrap()
}

#[test]
fn exhaustive_replay_of_p1() {
    let dir = tempfile::tempdir().unwrap();
    let (_, policy, _) = plan(dir.path(), &data("p1.ehatp"), false);
    let o = simulate(&policy, "--exhaustive");
    assert!(o.status.success(), "{}", text(&o.stderr));
    let out = text(&o.stdout);
    assert!(out.contains("3 traces, 3 DONE"));
    assert_eq!(out.matches(": DONE").count(), 3);
}

#[test]
fn replay_reports_a_removed_branch() {
    let dir = tempfile::tempdir().unwrap();
    let (_, policy, _) = plan(dir.path(), &data("p4.ehatp"), false);
    let mut pol = Policy::from_json(&std::fs::read_to_string(&policy).unwrap()).unwrap();
    let ask = pol
        .nodes
        .iter()
        .position(|n| n.edge.as_deref().is_some_and(|e| e.starts_with("ask-")))
        .unwrap();
    for n in pol.nodes.iter_mut() {
        n.children.retain(|&c| c != ask);
    }
    std::fs::write(&policy, pol.to_json()).unwrap();
    let o = simulate(&policy, "--exhaustive");
    assert_eq!(o.status.code(), Some(2));
    assert!(text(&o.stderr).contains("ask-empty(box_2)"), "{}", text(&o.stderr));
}

#[test]
fn replay_reports_an_unfinished_trace() {
    let dir = tempfile::tempdir().unwrap();
    let (_, policy, _) = plan(dir.path(), &data("p1.ehatp"), false);
    let mut pol = Policy::from_json(&std::fs::read_to_string(&policy).unwrap()).unwrap();
    let leaf = pol.nodes.iter().position(|n| n.kind == PolicyKind::Leaf).unwrap();
    let parent = pol.nodes.iter().position(|n| n.children.contains(&leaf)).unwrap();
    pol.nodes[parent].children.clear();
    pol.nodes[parent].kind = PolicyKind::Leaf;
    std::fs::write(&policy, pol.to_json()).unwrap();
    let o = simulate(&policy, "--exhaustive");
    assert_eq!(o.status.code(), Some(2));
    assert!(text(&o.stdout).contains("DEAD"));
    assert!(text(&o.stderr).contains("does not finish"));
}

/// A single-branch policy for the opaque two-cube problem that reaches the
/// reunion with two worlds and lets the human wait.
fn waiting_policy(dir: &Path) -> PathBuf {
    let inst = instances::find("p2").unwrap();
    let (dom, prob) = inst.load().unwrap();
    let path = [
        "move(mt, ot)",
        "pick(c_r)",
        "take(c_w, ot)",
        "place(c_r, box_1)",
        "move(ot, mt)",
        "idle",
        "wait",
        "inform-empty(box_2)",
        "put(c_w, box_2)",
    ];
    let mut s = situation_assessment(&initial_state(&prob), &dom);
    let mut nodes = Vec::new();
    let mut edge = None;
    for (i, step) in path.iter().chain([&""]).enumerate() {
        let last = step.is_empty();
        nodes.push(PolicyNode {
            id: i,
            kind: if last {
                PolicyKind::Leaf
            } else if s.actor_turn == ehatp::model::Agent::H {
                PolicyKind::And
            } else {
                PolicyKind::Or
            },
            actor: s.actor_turn,
            edge: edge.take(),
            copresent: copresent(s.designated_world(), &dom.copresence),
            children: if last { vec![] } else { vec![i + 1] },
        });
        if !last {
            s = apply_edge(&s, &dom, &Edge::parse(step).unwrap()).unwrap();
            edge = Some(step.to_string());
        }
    }
    let pol = Policy {
        instance: "p2".into(),
        domain_file: Some(data("cube_org.ehatp").display().to_string()),
        problem_file: Some(data("p2.ehatp").display().to_string()),
        nodes,
    };
    let file = dir.join("wait.json");
    std::fs::write(&file, pol.to_json()).unwrap();
    file
}

#[test]
fn interactive_wait_is_answered_by_an_inform() {
    let dir = tempfile::tempdir().unwrap();
    let policy = waiting_policy(dir.path());
    let mut child = bin()
        .arg("simulate")
        .arg("-P")
        .arg(&policy)
        .arg("--interactive")
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child
        .stdin
        .take()
        .unwrap()
        .write_all(b"1\n1\n1\nwait\n1\n")
        .unwrap();
    let o = child.wait_with_output().unwrap();
    let out = text(&o.stdout);
    assert!(o.status.success(), "{out}\n{}", text(&o.stderr));
    assert!(out.contains("H: wait  [together] |W| 2 -> 2"), "{out}");
    assert!(out.contains("R: inform-empty(box_2)  [together] |W| 2 -> 1"), "{out}");
    assert!(out.contains("H unsure about: empty(box_1), empty(box_2)"), "{out}");
    assert!(out.trim_end().ends_with("DONE"));
}

#[test]
fn random_replay_is_reproducible_and_one_of_the_traces() {
    let dir = tempfile::tempdir().unwrap();
    let (_, policy, _) = plan(dir.path(), &data("p3.ehatp"), false);
    let run = || {
        bin()
            .args(["simulate", "--random", "--seed", "7", "-P"])
            .arg(&policy)
            .output()
            .unwrap()
    };
    let (a, b) = (run(), run());
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let ex = text(&simulate(&policy, "--exhaustive").stdout);
    let steps: Vec<String> = text(&a.stdout)
        .lines()
        .filter(|l| l.starts_with("H: ") || l.starts_with("R: "))
        .map(|l| l.split("  [").next().unwrap().to_string())
        .collect();
    let found = ex.split("trace ").skip(1).any(|t| {
        let acts: Vec<String> = t
            .lines()
            .skip(1)
            .filter(|l| l.starts_with("  "))
            .map(|l| {
                let l = l.trim();
                let (actor, rest) = l.split_once(": ").unwrap();
                format!("{actor}: {}", rest.split("  ").next().unwrap().trim())
            })
            .collect();
        acts == steps
    });
    assert!(found, "{steps:?}");
}

#[test]
fn bench_table1_rows_are_sorted_and_stable() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("bench.csv");
    let run = || {
        let o = bin().args(["bench", "--suite", "table1", "-o"]).arg(&csv).output().unwrap();
        assert!(o.status.success(), "{}", text(&o.stderr));
        (text(&o.stdout), std::fs::read_to_string(&csv).unwrap())
    };
    let (report, first) = run();
    let rows: Vec<Vec<String>> = first
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(String::from).collect())
        .collect();
    assert_eq!(rows.len(), 9);
    let labels: Vec<&str> = rows.iter().map(|r| r[0].as_str()).collect();
    let mut sorted = labels.clone();
    sorted.sort();
    assert_eq!(labels, sorted);
    let get = |name: &str| rows.iter().find(|r| r[0] == name).unwrap();
    assert_eq!((get("P3")[4].as_str(), get("P3")[5].as_str()), ("7", "6"));
    assert_eq!((get("P6")[4].as_str(), get("P6")[5].as_str()), ("14", "5"));
    assert_eq!((get("Cooking3")[4].as_str(), get("Cooking3")[5].as_str()), ("5", "5"));
    assert!(report.contains("14/14"));
    assert!(!report.contains("encoding mismatch"));
    let (_, second) = run();
    let strip = |s: &str| -> Vec<String> { s.lines().map(|l| l.rsplit_once(',').unwrap().0.to_string()).collect() };
    assert_eq!(strip(&first), strip(&second));
}

#[test]
fn empty_suite_is_a_usage_error() {
    let o = bin().args(["bench", "--suite", "", "-o", "x.csv"]).output().unwrap();
    assert!(!o.status.success());
    assert_eq!(o.status.code(), Some(2));
    assert!(text(&o.stderr).contains("possible values: table1, all"));
}

#[test]
fn sa_logging_goes_to_stderr() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("p.json");
    let o = bin()
        .env("EHATP_LOG", "sa")
        .arg("plan")
        .arg("-d")
        .arg(data("cube_org.ehatp"))
        .arg("-p")
        .arg(data("p2.ehatp"))
        .arg("-o")
        .arg(&out)
        .output()
        .unwrap();
    assert!(o.status.success());
    let err = text(&o.stderr);
    assert!(err.contains("SA: removed w"), "{err}");
    assert!(!err.contains("expand n"));
    assert!(o.stdout.is_empty());
}
