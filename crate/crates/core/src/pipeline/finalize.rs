//! Parks every unallocated bundle on a non-envied vertex other than its
//! endpoints without creating envy towards that vertex.

use crate::cuts::{BundleId, BundleTable};
use crate::error::{Error, Result};
use crate::instance::{MultigraphInstance, Regime, VertexId};
use crate::state::{bundles_value, envy_report, AllocationState, EnvyReport};
use crate::valuation::ValuationProfile;

use super::trace::{Park, ParkBranch};

/// Candidates from the safe-vertex construction of the regime, in order.
fn recipe(inst: &MultigraphInstance, regime: Regime, envy: &EnvyReport, i: VertexId, j: VertexId) -> Vec<VertexId> {
    let mut out = Vec::new();
    match regime {
        Regime::Bipartite => {
            for x in [i, j] {
                if envy.envied[x] {
                    out.extend(envy.unique_envier(x));
                }
            }
        }
        Regime::BoundedNeighbors => {
            let (ni, nj) = (inst.neighbors(i), inst.neighbors(j));
            out.extend(
                inst.active_vertices()
                    .filter(|&k| k != i && k != j && !envy.envied[k] && !ni.contains(&k) && !nj.contains(&k)),
            );
        }
        Regime::Girth6 => {
            for (x, y) in [(i, j), (j, i)] {
                if !envy.envied[x] {
                    continue;
                }
                let Some(px) = envy.unique_envier(x) else { continue };
                let anchor = if px == y {
                    match envy.unique_envier(y) {
                        Some(py) => py,
                        None => continue,
                    }
                } else {
                    px
                };
                if envy.envied[anchor] {
                    out.extend(inst.neighbors(anchor).into_iter().filter(|&k| !envy.envied[k]));
                } else {
                    out.push(anchor);
                }
            }
        }
    }
    out
}

fn is_safe(
    profile: &ValuationProfile,
    inst: &MultigraphInstance,
    table: &BundleTable,
    x: &AllocationState,
    envy: &EnvyReport,
    s: BundleId,
    k: VertexId,
) -> bool {
    let pair = table.bundle(s).pair;
    if pair.contains(k) || !inst.is_active(k) || envy.envied[k] {
        return false;
    }
    if x.holdings(k).iter().any(|&b| table.bundle(b).pair == pair) {
        return false;
    }
    let mut grown: Vec<BundleId> = x.holdings(k).iter().copied().collect();
    grown.push(s);
    [pair.lo, pair.hi].into_iter().all(|l| {
        let own: Vec<BundleId> = x.holdings(l).iter().copied().collect();
        bundles_value(profile, table, l, &own) >= bundles_value(profile, table, l, &grown)
    })
}

pub fn step3_finalize(
    profile: &ValuationProfile,
    inst: &MultigraphInstance,
    table: &BundleTable,
    x: &mut AllocationState,
    regime: Regime,
) -> Result<Vec<Park>> {
    let mut parks = Vec::new();
    for s in x.unallocated() {
        let envy = envy_report(profile, table, x);
        let pair = table.bundle(s).pair;
        let safe = |k: &VertexId| is_safe(profile, inst, table, x, &envy, s, *k);
        let found = match recipe(inst, regime, &envy, pair.lo, pair.hi).into_iter().find(safe) {
            Some(k) => Some((k, ParkBranch::Recipe)),
            None => inst.active_vertices().find(safe).map(|k| (k, ParkBranch::Fallback)),
        };
        let (k, branch) = found.ok_or_else(|| {
            let held: Vec<String> = (0..x.n())
                .map(|v| format!("{v}:{:?}", x.holdings(v)))
                .collect();
            Error::breach(format!(
                "no safe vertex for bundle {s} of {pair}; envied {:?}; holdings {}",
                envy.envied_vertices(),
                held.join(" ")
            ))
        })?;
        x.add(k, s)?;
        parks.push(Park { bundle: s, vertex: k, branch });
    }
    Ok(parks)
}
