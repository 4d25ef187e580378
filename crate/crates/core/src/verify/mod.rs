//! Independent checks: brute-force EFX enumeration, allocation certificates
//! and trace audits. Nothing here calls into the solver or its state module.

mod audit;
mod format;
mod oracle;

pub use audit::{audit_trace, parse_trace, ParsedStage, ParsedTrace};
pub use format::{parse_allocation, serialize_allocation, ALLOCATION_HEADER};
pub use oracle::{assignment_of, brute_force_efx, Assignment, DEFAULT_CAP};

use std::fmt::Write as _;

use crate::instance::{EdgeId, MultigraphInstance, VertexId};
use crate::valuation::ValuationProfile;

/// One verdict of a report.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Verdict {
    pub name: String,
    pub pass: bool,
    pub witness: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Report {
    pub verdicts: Vec<Verdict>,
}

impl Report {
    pub fn push(&mut self, name: impl Into<String>, witness: Option<String>) {
        self.verdicts.push(Verdict {
            name: name.into(),
            pass: witness.is_none(),
            witness,
        });
    }

    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Verdict> {
        self.verdicts.iter().filter(|v| !v.pass)
    }

    /// `check <name> <pass|fail> [witness]` lines and a closing `result` line.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for v in &self.verdicts {
            let verdict = if v.pass { "pass" } else { "fail" };
            match &v.witness {
                Some(w) => writeln!(out, "check {} {verdict} {w}", v.name).unwrap(),
                None => writeln!(out, "check {} {verdict}", v.name).unwrap(),
            }
        }
        writeln!(out, "result {}", if self.passed() { "pass" } else { "fail" }).unwrap();
        out
    }
}

/// First `(i, j, g)` with `v_i(X_i) < v_i(X_j \ {g})`.
pub fn efx_witness(profile: &ValuationProfile, alloc: &[Vec<EdgeId>]) -> Option<(VertexId, VertexId, EdgeId)> {
    for (i, own) in alloc.iter().enumerate() {
        let mine = profile.val(i, own);
        for (j, other) in alloc.iter().enumerate() {
            if i == j {
                continue;
            }
            for (pos, &g) in other.iter().enumerate() {
                let rest: Vec<EdgeId> = other[..pos].iter().chain(&other[pos + 1..]).copied().collect();
                if profile.val(i, &rest) > mine {
                    return Some((i, j, g));
                }
            }
        }
    }
    None
}

/// Every real edge exactly once, no dummies, no unknown ids.
pub fn completeness_witness(inst: &MultigraphInstance, alloc: &[Vec<EdgeId>]) -> Option<String> {
    if alloc.len() != inst.n() {
        return Some(format!("{} vertices in allocation, instance has {}", alloc.len(), inst.n()));
    }
    let mut owner = vec![None; inst.real_edge_count()];
    for (v, edges) in alloc.iter().enumerate() {
        for &e in edges {
            if e >= owner.len() {
                return Some(format!("edge {e} given to {v} is not a real edge"));
            }
            if let Some(u) = owner[e] {
                return Some(format!("edge {e} given to both {u} and {v}"));
            }
            owner[e] = Some(v);
        }
    }
    owner
        .iter()
        .position(Option::is_none)
        .map(|e| format!("edge {e} is unallocated"))
}

/// Checks a complete allocation of real edges.
pub fn verify_allocation(profile: &ValuationProfile, inst: &MultigraphInstance, alloc: &[Vec<EdgeId>]) -> Report {
    let mut report = Report::default();
    report.push("complete", completeness_witness(inst, alloc));
    report.push(
        "efx",
        efx_witness(profile, alloc).map(|(i, j, g)| format!("{i} envies {j} after removing edge {g}")),
    );
    report
}
