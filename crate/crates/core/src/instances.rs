//! The shipped domains and problems.

use crate::dsl::{parse_domain, parse_problem, Diagnostic, DomainModel, ProblemInstance};

pub const CUBE_ORG: &str = include_str!("../data/cube_org.ehatp");
pub const COOKING: &str = include_str!("../data/cooking.ehatp");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Instance {
    /// Row label in the benchmark table.
    pub label: &'static str,
    /// File stem under `data/`.
    pub file: &'static str,
    pub domain: &'static str,
    pub problem: &'static str,
    pub expected_max_worlds: usize,
    pub expected_leaves: usize,
    pub reference_states: usize,
}

macro_rules! inst {
    ($label:expr, $file:expr, $dom:expr, $w:expr, $l:expr, $s:expr) => {
        Instance {
            label: $label,
            file: $file,
            domain: $dom,
            problem: include_str!(concat!("../data/", $file, ".ehatp")),
            expected_max_worlds: $w,
            expected_leaves: $l,
            reference_states: $s,
        }
    };
}

pub const TABLE1: [Instance; 9] = [
    inst!("P1", "p1", CUBE_ORG, 4, 3, 218),
    inst!("P2", "p2", CUBE_ORG, 4, 3, 236),
    inst!("P3", "p3", CUBE_ORG, 7, 6, 1643),
    inst!("P4", "p4", CUBE_ORG, 7, 6, 2003),
    inst!("P5", "p5", CUBE_ORG, 14, 5, 4107),
    inst!("P6", "p6", CUBE_ORG, 14, 5, 5607),
    inst!("Cooking1", "cooking1", COOKING, 3, 5, 603),
    inst!("Cooking2", "cooking2", COOKING, 4, 5, 1054),
    inst!("Cooking3", "cooking3", COOKING, 5, 5, 1800),
];

impl Instance {
    pub fn load(&self) -> Result<(DomainModel, ProblemInstance), Vec<Diagnostic>> {
        let dom = parse_domain(self.domain)?;
        let prob = parse_problem(self.problem, &dom)?;
        Ok((dom, prob))
    }

    pub fn domain_file(&self) -> &'static str {
        if self.domain == CUBE_ORG {
            "cube_org.ehatp"
        } else {
            "cooking.ehatp"
        }
    }
}

/// Looks an instance up by label or file stem, ignoring case.
pub fn find(name: &str) -> Option<&'static Instance> {
    TABLE1
        .iter()
        .find(|i| i.label.eq_ignore_ascii_case(name) || i.file.eq_ignore_ascii_case(name))
}
