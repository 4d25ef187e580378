//! The three-stage construction: an initial orientation per regime, envy
//! reduction, and parking of the leftover bundles on safe vertices.
//!
//! Every stage is followed by the property checks the construction relies
//! on. A failed check aborts the solve with [`Error::InvariantBreach`]; the
//! partial trace is still available from [`solve_traced`].

mod finalize;
mod girth;
mod matching;
mod reduce;
mod trace;

use std::collections::BTreeSet;

pub use finalize::step3_finalize;
pub use girth::{step1_girth, GirthOutcome};
pub use matching::{build_h, max_weight_a_perfect_matching, ComponentShape, HGraph, Matching};
pub use reduce::{step2_reduce_envy, ReduceStats};
pub use trace::{FinalRecord, Park, ParkBranch, PipelineTrace, Stage, StageSnapshot, TRACE_HEADER};

use crate::cuts::{build_bundle_table_with, BundleTable};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::instance::{detect_regimes, EdgeId, MultigraphInstance, Regime, RegimeReport};
use crate::state::{
    check_property, check_unallocated_bound, check_unallocated_envied, envy_report, is_efx, partition_bound,
    AllocationState, EfxReport, Envier, Property, PropertyCheck,
};
use crate::valuation::ValuationProfile;

/// Side 0 takes its favorite bundle first, then side 1.
pub fn step1_bipartite(
    profile: &ValuationProfile,
    inst: &MultigraphInstance,
    table: &BundleTable,
    coloring: &[u8],
) -> Result<AllocationState> {
    let mut x = AllocationState::new(inst.n(), table.len());
    for side in [0, 1] {
        for v in inst.active_vertices().filter(|&v| coloring[v] == side) {
            if let Some(b) = table.best(profile, v, x.ub(table, v)) {
                x.set_holdings(v, [b])?;
            }
        }
    }
    Ok(x)
}

/// Allocation read off a maximum-weight matching of `H(G)`.
pub fn step1_bounded(
    profile: &ValuationProfile,
    inst: &MultigraphInstance,
    table: &BundleTable,
) -> Result<(AllocationState, Matching)> {
    let h = build_h(profile, inst, table)?;
    let m = max_weight_a_perfect_matching(&h)?;
    let need = m.side_a.div_ceil(2);
    if m.weight < need {
        return Err(Error::breach(format!(
            "matching weight {} is below {need} for {} matched vertices",
            m.weight, m.side_a
        )));
    }
    let mut x = AllocationState::new(inst.n(), table.len());
    for (v, b) in m.assignment.iter().enumerate() {
        if let Some(b) = b {
            x.add(v, *b)?;
        }
    }
    Ok((x, m))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SolveOptions {
    /// Forces a regime instead of the priority order.
    pub regime: Option<Regime>,
    /// Execution mode for building the bundle table.
    pub exec: Execution,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SolveStats {
    pub envied_after_step1: usize,
    pub step2_rounds: usize,
    pub parked: usize,
    pub fallback_parks: usize,
    pub repairs: usize,
    pub matching_weight: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct Solution {
    pub regime: Regime,
    /// Real edges per vertex.
    pub allocation: Vec<Vec<EdgeId>>,
    pub certificate: EfxReport,
    pub stats: SolveStats,
    pub trace: PipelineTrace,
}

/// Picks the forced regime if it applies, else the first applicable one in
/// priority order.
pub fn select_regime(report: &RegimeReport, forced: Option<Regime>) -> Result<Regime> {
    match forced {
        Some(r) if report.applies(r) => Ok(r),
        Some(r) => Err(Error::RegimeNotApplicable {
            regime: r.to_string(),
            reason: report.failure_reason(r),
        }),
        None => report.preferred().ok_or_else(|| Error::NoRegime(report.summary())),
    }
}

pub fn solve(profile: &ValuationProfile, inst: &MultigraphInstance, opts: SolveOptions) -> Result<Solution> {
    solve_traced(profile, inst, opts).0
}

/// As [`solve`], also returning the trace recorded up to the point of failure.
pub fn solve_traced(
    profile: &ValuationProfile,
    inst: &MultigraphInstance,
    opts: SolveOptions,
) -> (Result<Solution>, PipelineTrace) {
    let mut trace = PipelineTrace {
        n: inst.n(),
        prealloc: inst.preallocation().to_vec(),
        ..PipelineTrace::default()
    };
    let result = run(profile, inst, opts, &mut trace);
    match result {
        Ok(mut sol) => {
            sol.trace = trace.clone();
            (Ok(sol), trace)
        }
        Err(e) => (Err(e), trace),
    }
}

fn p3_for(regime: Regime) -> Property {
    match regime {
        Regime::Bipartite => Property::P3_1,
        Regime::BoundedNeighbors => Property::P3_2,
        Regime::Girth6 => Property::P3_3,
    }
}

fn observation_check(profile: &ValuationProfile, table: &BundleTable, x: &AllocationState) -> PropertyCheck {
    let envy = envy_report(profile, table, x);
    let witness = envy.envied_vertices().into_iter().find_map(|i| match envy.p(i) {
        Envier::Unique(p) => x
            .holdings(i)
            .iter()
            .find(|&&b| !table.bundle(b).pair.contains(p))
            .map(|b| format!("envied {i} holds bundle {b} irrelevant to its envier {p}")),
        other => Some(format!("envied {i} has no unique envier ({other:?})")),
    });
    check("ENVIER", witness)
}

fn check(name: &str, witness: Option<String>) -> PropertyCheck {
    PropertyCheck {
        name: name.to_string(),
        pass: witness.is_none(),
        witness,
    }
}

fn orientation_checks(
    profile: &ValuationProfile,
    inst: &MultigraphInstance,
    table: &BundleTable,
    x: &AllocationState,
    regime: Regime,
    with_p4: bool,
) -> Vec<PropertyCheck> {
    let mut props = vec![Property::P1, Property::P2, p3_for(regime)];
    if with_p4 {
        props.push(Property::P4);
    }
    let mut out: Vec<_> = props
        .into_iter()
        .map(|p| check_property(profile, inst, table, x, p, None))
        .collect();
    out.push(observation_check(profile, table, x));
    out
}

/// Records the snapshot and turns its first failed check into an error.
fn commit(trace: &mut PipelineTrace, snap: StageSnapshot) -> Result<()> {
    let failed = snap
        .failed_checks()
        .next()
        .map(|c| format!("{}: {} failed: {}", snap.stage, c.name, c.witness.as_deref().unwrap_or("")));
    trace.stages.push(snap);
    match failed {
        Some(msg) => Err(Error::breach(msg)),
        None => Ok(()),
    }
}

fn run(
    profile: &ValuationProfile,
    inst: &MultigraphInstance,
    opts: SolveOptions,
    trace: &mut PipelineTrace,
) -> Result<Solution> {
    let report = detect_regimes(inst);
    let regime = select_regime(&report, opts.regime)?;
    trace.regime = Some(regime);
    trace.notes.push(match opts.regime {
        Some(_) => format!("regime {regime} forced"),
        None => format!("regime {regime} chosen by priority bipartite > girth6 > bounded"),
    });
    trace
        .notes
        .push("envied rounds offer vertex j the bundles of its own unallocated family".into());

    let table = build_bundle_table_with(profile, inst, regime, &report, opts.exec)?;
    let mut stats = SolveStats::default();
    let mut step1_metrics = Vec::new();
    let mut step1_checks = Vec::new();
    let (table, mut x) = match regime {
        Regime::Bipartite => {
            let coloring = report.coloring.as_deref().expect("bipartite report has a coloring");
            let x = step1_bipartite(profile, inst, &table, coloring)?;
            (table, x)
        }
        Regime::BoundedNeighbors => {
            let (x, m) = step1_bounded(profile, inst, &table)?;
            step1_metrics.push(("matching-weight".to_string(), m.weight as u64));
            step1_metrics.push(("matched".to_string(), m.side_a as u64));
            stats.matching_weight = Some(m.weight);
            (table, x)
        }
        Regime::Girth6 => {
            trace
                .notes
                .push("offer guard tests the pair's candidate availability, which is the same for both endpoints".into());
            let out = step1_girth(profile, inst, &table)?;
            let mut aux_p2 = check_property(profile, inst, &table, &out.aux_state, Property::P2, Some(&out.aux_available));
            aux_p2.name = "P2-AUX".into();
            step1_checks.push(aux_p2);
            step1_metrics.push(("offers".to_string(), out.offers as u64));
            step1_metrics.push(("repairs".to_string(), out.repairs as u64));
            stats.repairs = out.repairs;
            (out.table, out.state)
        }
    };

    // step 1
    let envy1 = envy_report(profile, &table, &x);
    stats.envied_after_step1 = envy1.envied_count();
    let mut snap = StageSnapshot::new(Stage::Step1, &table, &x);
    snap.metrics.push(("envied".into(), envy1.envied_count() as u64));
    snap.metrics.extend(step1_metrics);
    snap.checks = orientation_checks(profile, inst, &table, &x, regime, false);
    snap.checks.extend(step1_checks);
    commit(trace, snap)?;

    // step 2
    let reduce = step2_reduce_envy(profile, inst, &table, &mut x)?;
    stats.step2_rounds = reduce.rounds;
    let envy2 = envy_report(profile, &table, &x);
    let mut snap = StageSnapshot::new(Stage::Step2, &table, &x);
    snap.metrics.push(("envied".into(), envy2.envied_count() as u64));
    snap.metrics.push(("rounds".into(), reduce.rounds as u64));
    snap.metrics.push(("upgrades".into(), reduce.upgrades as u64));
    snap.metrics.push(("offers".into(), reduce.offers as u64));
    snap.checks = orientation_checks(profile, inst, &table, &x, regime, true);
    let mut free_bound = check_unallocated_bound(profile, &table, &x, partition_bound(regime));
    free_bound.name = format!("FREE-BOUND-r{}", partition_bound(regime));
    snap.checks.push(free_bound);
    // with three-part pairs two non-envied endpoints may leave one bundle free
    if partition_bound(regime) == 2 {
        snap.checks.push(check_unallocated_envied(profile, &table, &x));
    }
    let newly_envied = inst
        .active_vertices()
        .find(|&v| !envy1.envied[v] && envy2.envied[v])
        .map(|v| format!("vertex {v} became envied"));
    snap.checks.push(check("NONENVIED-KEPT", newly_envied));
    commit(trace, snap)?;

    // step 3
    let before = x.clone();
    let parks = step3_finalize(profile, inst, &table, &mut x, regime)?;
    stats.parked = parks.len();
    stats.fallback_parks = parks.iter().filter(|p| p.branch == ParkBranch::Fallback).count();
    let mut snap = StageSnapshot::new(Stage::Step3, &table, &x);
    snap.metrics.push(("parked".into(), parks.len() as u64));
    snap.metrics.push(("fallback".into(), stats.fallback_parks as u64));
    snap.checks.push(check(
        "KEPT",
        (0..x.n())
            .find(|&v| !before.holdings(v).is_subset(x.holdings(v)))
            .map(|v| format!("holdings of {v} changed")),
    ));
    snap.checks.push(check(
        "COMPLETE",
        x.unallocated().first().map(|b| format!("bundle {b} unallocated")),
    ));
    snap.checks.push(check(
        "PARK-SAFE",
        parks.iter().find_map(|p| {
            let pair = table.bundle(p.bundle).pair;
            if pair.contains(p.vertex) {
                Some(format!("bundle {} parked on endpoint {}", p.bundle, p.vertex))
            } else if envy2.envied[p.vertex] {
                Some(format!("bundle {} parked on envied {}", p.bundle, p.vertex))
            } else {
                None
            }
        }),
    ));
    snap.checks.push(check("PARK-DISTINCT", distinct_parks(&table, &parks)));
    snap.parks = parks;

    // final allocation
    let mut allocation: Vec<Vec<EdgeId>> = (0..inst.n())
        .map(|v| x.edges(&table, v).into_iter().filter(|&e| !inst.is_dummy(e)).collect())
        .collect();
    for &(v, e) in inst.preallocation() {
        allocation[v].push(e);
    }
    for a in &mut allocation {
        a.sort_unstable();
    }
    let certificate = is_efx(profile, &allocation);
    let mut seen = BTreeSet::new();
    let complete = allocation.iter().flatten().all(|&e| seen.insert(e)) && seen.len() == inst.real_edge_count();
    snap.checks.push(check(
        "REAL-COMPLETE",
        (!complete).then(|| format!("{} of {} real edges allocated once", seen.len(), inst.real_edge_count())),
    ));
    snap.checks.push(check("EFX", certificate.violations.first().map(ToString::to_string)));
    commit(trace, snap)?;
    trace.final_record = Some(FinalRecord {
        allocation: allocation.clone(),
        certificate: "efx".into(),
    });

    Ok(Solution {
        regime,
        allocation,
        certificate,
        stats,
        trace: PipelineTrace::default(),
    })
}

/// Two bundles of one pair never share a parking vertex.
fn distinct_parks(table: &BundleTable, parks: &[Park]) -> Option<String> {
    for (a, p) in parks.iter().enumerate() {
        for q in &parks[a + 1..] {
            if p.vertex == q.vertex && table.bundle(p.bundle).pair == table.bundle(q.bundle).pair {
                return Some(format!("bundles {} and {} both parked on {}", p.bundle, q.bundle, p.vertex));
            }
        }
    }
    None
}
