use std::path::Path;
use std::thread;

use ehatp::dsl::ProblemInstance;
use ehatp::instances::{Instance, TABLE1};
use ehatp::solver::{solve, Metrics};

use crate::{metrics_record, write_csv, Outcome, Suite};

type Run = Result<(Metrics, ProblemInstance), String>;

/// Reference #states may differ by this fraction before a row is flagged.
const STATES_TOLERANCE: f64 = 0.30;

fn run(inst: &Instance) -> Run {
    let (dom, prob) = inst.load().map_err(|d| format!("{}: {}", inst.file, d[0].message))?;
    let sol = solve(&prob, &dom).map_err(|e| format!("{}: {e}", inst.label))?;
    Ok((sol.metrics, prob))
}

pub fn cmd_bench(suite: Suite, out: &Path) -> Outcome {
    let selected: Vec<&Instance> = match suite {
        Suite::Table1 | Suite::All => TABLE1.iter().collect(),
    };
    let results: Vec<(&Instance, Run)> = thread::scope(|sc| {
        let handles: Vec<_> = selected.iter().map(|&i| (i, sc.spawn(move || run(i)))).collect();
        handles
            .into_iter()
            .map(|(i, h)| (i, h.join().unwrap_or_else(|_| Err(format!("{}: solver panicked", i.label)))))
            .collect()
    });
    let mut rows = Vec::new();
    let mut ok = true;
    println!(
        "{:<9} {:>3} {:>4} {:>8} {:>8} {:>9} {:>9} {:>8}  note",
        "instance", "K", "comm", "states", "ref", "maxW", "leaves", "time_ms"
    );
    let mut sorted = results;
    sorted.sort_by(|a, b| a.0.label.cmp(b.0.label));
    for (inst, res) in &sorted {
        let (m, prob) = match res {
            Ok(r) => r,
            Err(e) => {
                eprintln!("error: {e}");
                ok = false;
                continue;
            }
        };
        rows.push(metrics_record(inst.label, prob, m));
        let w_ok = m.max_worlds == inst.expected_max_worlds;
        let l_ok = m.leaves == inst.expected_leaves;
        let ratio = m.states as f64 / inst.reference_states as f64;
        let mut notes = Vec::new();
        if !w_ok || !l_ok {
            notes.push(format!("encoding mismatch ({})", inst.file));
            ok = false;
        }
        if (ratio - 1.0).abs() > STATES_TOLERANCE {
            notes.push(format!("states x{ratio:.2} of reference"));
        }
        println!(
            "{:<9} {:>3} {:>4} {:>8} {:>8} {:>4}/{:<4} {:>4}/{:<4} {:>8}  {}",
            inst.label,
            prob.k,
            if prob.comm_allowed { "Y" } else { "N" },
            m.states,
            inst.reference_states,
            m.max_worlds,
            inst.expected_max_worlds,
            m.leaves,
            inst.expected_leaves,
            m.time_ms,
            notes.join("; ")
        );
    }
    if let Err(e) = write_csv(out, &rows) {
        eprintln!("{}: {e}", out.display());
        return Outcome::Diagnostics;
    }
    if ok {
        Outcome::Ok
    } else {
        Outcome::Failed
    }
}
