//! Stage snapshots and their `efx-trace v1` text form.
//!
//! ```text
//! efx-trace v1
//! regime bipartite
//! n 3
//! prealloc 2 4
//! note <free text>
//! stage step1
//! bundle 0 0 1 oriented2:1:cut1-chosen 0
//! bundle 1 0 1 oriented2:1:cut1-rest 1,2
//! hold 0 0
//! hold 1 -
//! hold 2 -
//! unalloc 1
//! metric envied 0
//! check P1 pass
//! end
//! final
//! alloc 0 0
//! certificate efx
//! end
//! ```
//!
//! Step-3 blocks add `park <bundle> <vertex> <recipe|fallback>` lines.

use std::collections::BTreeSet;
use std::fmt::{self, Write as _};

use crate::cuts::{join_ids, BundleId, BundleTable};
use crate::instance::{EdgeId, Regime, VertexId};
use crate::state::{AllocationState, PropertyCheck};

pub const TRACE_HEADER: &str = "efx-trace v1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Stage {
    Step1,
    Step2,
    Step3,
}

impl Stage {
    pub fn name(&self) -> &'static str {
        match self {
            Stage::Step1 => "step1",
            Stage::Step2 => "step2",
            Stage::Step3 => "step3",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ParkBranch {
    /// The safe-vertex construction for the regime found the vertex.
    Recipe,
    /// Found by scanning all non-envied vertices.
    Fallback,
}

impl ParkBranch {
    pub fn name(&self) -> &'static str {
        match self {
            ParkBranch::Recipe => "recipe",
            ParkBranch::Fallback => "fallback",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Park {
    pub bundle: BundleId,
    pub vertex: VertexId,
    pub branch: ParkBranch,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StageSnapshot {
    pub stage: Stage,
    pub table: BundleTable,
    pub holdings: Vec<BTreeSet<BundleId>>,
    pub unallocated: Vec<BundleId>,
    pub parks: Vec<Park>,
    pub metrics: Vec<(String, u64)>,
    pub checks: Vec<PropertyCheck>,
}

impl StageSnapshot {
    pub fn new(stage: Stage, table: &BundleTable, x: &AllocationState) -> Self {
        StageSnapshot {
            stage,
            table: table.clone(),
            holdings: (0..x.n()).map(|v| x.holdings(v).clone()).collect(),
            unallocated: x.unallocated(),
            parks: Vec::new(),
            metrics: Vec::new(),
            checks: Vec::new(),
        }
    }

    pub fn metric(&self, name: &str) -> Option<u64> {
        self.metrics.iter().find(|(m, _)| m == name).map(|(_, v)| *v)
    }

    pub fn failed_checks(&self) -> impl Iterator<Item = &PropertyCheck> {
        self.checks.iter().filter(|c| !c.pass)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FinalRecord {
    /// Real edges per vertex, preallocation included.
    pub allocation: Vec<Vec<EdgeId>>,
    pub certificate: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PipelineTrace {
    pub regime: Option<Regime>,
    pub n: usize,
    pub prealloc: Vec<(VertexId, EdgeId)>,
    pub notes: Vec<String>,
    pub stages: Vec<StageSnapshot>,
    pub final_record: Option<FinalRecord>,
}

impl PipelineTrace {
    pub fn stage(&self, stage: Stage) -> Option<&StageSnapshot> {
        self.stages.iter().find(|s| s.stage == stage)
    }

    pub fn serialize(&self) -> String {
        let mut out = String::new();
        writeln!(out, "{TRACE_HEADER}").unwrap();
        if let Some(r) = self.regime {
            writeln!(out, "regime {r}").unwrap();
        }
        writeln!(out, "n {}", self.n).unwrap();
        for (v, e) in &self.prealloc {
            writeln!(out, "prealloc {v} {e}").unwrap();
        }
        for note in &self.notes {
            writeln!(out, "note {note}").unwrap();
        }
        for s in &self.stages {
            writeln!(out, "stage {}", s.stage).unwrap();
            out.push_str(&s.table.serialize());
            for (v, held) in s.holdings.iter().enumerate() {
                let ids: Vec<_> = held.iter().copied().collect();
                writeln!(out, "hold {v} {}", join_ids(&ids)).unwrap();
            }
            writeln!(out, "unalloc {}", join_ids(&s.unallocated)).unwrap();
            for p in &s.parks {
                writeln!(out, "park {} {} {}", p.bundle, p.vertex, p.branch.name()).unwrap();
            }
            for (name, value) in &s.metrics {
                writeln!(out, "metric {name} {value}").unwrap();
            }
            for c in &s.checks {
                let verdict = if c.pass { "pass" } else { "fail" };
                match &c.witness {
                    Some(w) => writeln!(out, "check {} {verdict} {w}", c.name).unwrap(),
                    None => writeln!(out, "check {} {verdict}", c.name).unwrap(),
                }
            }
            writeln!(out, "end").unwrap();
        }
        if let Some(f) = &self.final_record {
            writeln!(out, "final").unwrap();
            for (v, edges) in f.allocation.iter().enumerate() {
                writeln!(out, "alloc {v} {}", join_ids(edges)).unwrap();
            }
            writeln!(out, "certificate {}", f.certificate).unwrap();
            writeln!(out, "end").unwrap();
        }
        out
    }
}
