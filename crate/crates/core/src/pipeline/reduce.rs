//! Envy reduction: moves vertices onto their best non-parallel bundle sets.

use crate::cuts::{BundleId, BundleTable};
use crate::error::{Error, Result};
use crate::instance::{MultigraphInstance, Pair};
use crate::state::{bundles_value, envy_report, unpb, AllocationState};
use crate::valuation::ValuationProfile;

const LOOP_CAP: usize = 1_000_000;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ReduceStats {
    /// Rounds of the envied-vertex loop.
    pub rounds: usize,
    /// Updates by non-envied vertices.
    pub upgrades: usize,
    /// Single-bundle offers inside envied rounds.
    pub offers: usize,
}

fn held(x: &AllocationState, v: usize) -> Vec<BundleId> {
    x.holdings(v).iter().copied().collect()
}

/// Lets the first non-envied vertex that strictly gains, or keeps its value
/// with more bundles, take its selection; repeats until none does.
fn settle_non_envied(
    profile: &ValuationProfile,
    inst: &MultigraphInstance,
    table: &BundleTable,
    x: &mut AllocationState,
    stats: &mut ReduceStats,
) -> Result<()> {
    let mut steps = 0;
    'outer: loop {
        let envy = envy_report(profile, table, x);
        for k in inst.active_vertices().filter(|&k| !envy.envied[k]) {
            let sel = unpb(profile, table, x, &envy, k)?;
            let cur = held(x, k);
            let (vs, vc) = (bundles_value(profile, table, k, &sel), bundles_value(profile, table, k, &cur));
            if vs > vc || (vs == vc && sel.len() > cur.len()) {
                x.set_holdings(k, sel)?;
                stats.upgrades += 1;
                steps += 1;
                if steps > LOOP_CAP {
                    return Err(Error::IterationCap { stage: "reduce envy, non-envied loop" });
                }
                continue 'outer;
            }
        }
        return Ok(());
    }
}

/// Gives the first vertex that prefers some bundle of its own unallocated
/// family that bundle alone; repeats until nobody does.
fn offer_released(
    profile: &ValuationProfile,
    inst: &MultigraphInstance,
    table: &BundleTable,
    x: &mut AllocationState,
    stats: &mut ReduceStats,
) -> Result<()> {
    let mut steps = 0;
    'outer: loop {
        for j in inst.active_vertices() {
            let own = bundles_value(profile, table, j, &held(x, j));
            let better = x.ub(table, j).into_iter().filter(|&b| profile.val(j, table.edges(b)) > own);
            if let Some(s) = table.best(profile, j, better) {
                x.set_holdings(j, [s])?;
                stats.offers += 1;
                steps += 1;
                if steps > LOOP_CAP {
                    return Err(Error::IterationCap { stage: "reduce envy, offer loop" });
                }
                continue 'outer;
            }
        }
        return Ok(());
    }
}

pub fn step2_reduce_envy(
    profile: &ValuationProfile,
    inst: &MultigraphInstance,
    table: &BundleTable,
    x: &mut AllocationState,
) -> Result<ReduceStats> {
    let mut stats = ReduceStats::default();
    settle_non_envied(profile, inst, table, x, &mut stats)?;
    loop {
        let envy = envy_report(profile, table, x);
        let mut pick = None;
        for i in envy.envied_vertices() {
            let sel = unpb(profile, table, x, &envy, i)?;
            if bundles_value(profile, table, i, &sel) > bundles_value(profile, table, i, &held(x, i)) {
                pick = Some((i, sel));
                break;
            }
        }
        let Some((i, sel)) = pick else { return Ok(stats) };
        stats.rounds += 1;
        if stats.rounds > inst.n() {
            return Err(Error::IterationCap { stage: "reduce envy, envied loop" });
        }
        let p = envy
            .unique_envier(i)
            .ok_or_else(|| Error::breach(format!("envied {i} has no unique envier")))?;
        let pair = Pair::new(i, p);
        let t = x.holdings(p).iter().copied().find(|&b| table.bundle(b).pair == pair);
        if t.is_some_and(|t| sel.contains(&t)) {
            x.clear(p);
        }
        x.set_holdings(i, sel)?;
        offer_released(profile, inst, table, x, &mut stats)?;
        settle_non_envied(profile, inst, table, x, &mut stats)?;
    }
}
