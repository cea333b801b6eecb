use std::fmt;

use super::Policy;
use crate::model::Agent;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScheduleStep {
    /// One agent acts while the other watches.
    Turn { actor: Agent, action: String },
    /// Both agents act at the same time while apart.
    Joint { human: String, robot: String },
}

impl fmt::Display for ScheduleStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScheduleStep::Turn { actor, action } => write!(f, "{actor}: {action}"),
            ScheduleStep::Joint { human, robot } => write!(f, "H: {human} || R: {robot}"),
        }
    }
}

/// One schedule per trace of the policy.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExecutionSchedule {
    pub traces: Vec<Vec<ScheduleStep>>,
}

fn flush(h: &mut Vec<String>, r: &mut Vec<String>, out: &mut Vec<ScheduleStep>) {
    let n = h.len().max(r.len());
    for i in 0..n {
        out.push(ScheduleStep::Joint {
            human: h.get(i).cloned().unwrap_or_else(|| "noop".into()),
            robot: r.get(i).cloned().unwrap_or_else(|| "noop".into()),
        });
    }
    h.clear();
    r.clear();
}

/// Turns every trace into a schedule: turn-taking while the agents are
/// together, paired concurrent steps from the edge that separates them up
/// to the edge that reunites them.
pub fn parallelize(pol: &Policy) -> ExecutionSchedule {
    let mut traces = Vec::new();
    for path in pol.traces() {
        let mut out = Vec::new();
        let mut h = Vec::new();
        let mut r = Vec::new();
        let mut apart = false;
        for w in path.windows(2) {
            let (from, to) = (&pol.nodes[w[0]], &pol.nodes[w[1]]);
            let label = to.edge.clone().unwrap_or_default();
            if !apart && from.copresent && !to.copresent {
                apart = true;
            }
            if apart && !from.copresent && to.copresent {
                flush(&mut h, &mut r, &mut out);
                apart = false;
                out.push(ScheduleStep::Turn {
                    actor: from.actor,
                    action: label,
                });
                continue;
            }
            if apart {
                match from.actor {
                    Agent::H => h.push(label),
                    Agent::R => r.push(label),
                }
            } else {
                out.push(ScheduleStep::Turn {
                    actor: from.actor,
                    action: label,
                });
            }
        }
        flush(&mut h, &mut r, &mut out);
        traces.push(out);
    }
    ExecutionSchedule { traces }
}
