//! Exhaustive enumeration of complete EFX allocations.

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::instance::{EdgeId, MultigraphInstance, VertexId};
use crate::valuation::ValuationProfile;

use super::efx_witness;

pub const DEFAULT_CAP: u128 = 10_000_000;
/// Parallel tasks to aim for when splitting the enumeration.
const PREFIX_TASKS: usize = 64;

/// Owner of each real edge, indexed by edge id.
pub type Assignment = Vec<VertexId>;

/// The assignment form of an allocation of real edges.
pub fn assignment_of(alloc: &[Vec<EdgeId>], edges: usize) -> Option<Assignment> {
    let mut owner = vec![usize::MAX; edges];
    for (v, es) in alloc.iter().enumerate() {
        for &e in es {
            *owner.get_mut(e)? = v;
        }
    }
    owner.iter().all(|&v| v != usize::MAX).then_some(owner)
}

fn to_alloc(owner: &[VertexId], n: usize) -> Vec<Vec<EdgeId>> {
    let mut alloc = vec![Vec::new(); n];
    for (e, &v) in owner.iter().enumerate() {
        alloc[v].push(e);
    }
    alloc
}

/// Every assignment of the real edges to any vertex that is EFX, in
/// lexicographic order of the owner vector. Refuses when `n^m > cap`.
pub fn brute_force_efx(
    profile: &ValuationProfile,
    inst: &MultigraphInstance,
    cap: u128,
    exec: Execution,
) -> Result<Vec<Assignment>> {
    let (n, m) = (inst.n(), inst.real_edge_count());
    let needed = (n as u128).checked_pow(m as u32).unwrap_or(u128::MAX);
    if needed > cap {
        return Err(Error::CapExceeded { needed, cap });
    }
    if m == 0 {
        return Ok(vec![Vec::new()]);
    }
    // fix the owners of the first few edges per task
    let mut k = 1;
    while k < m && n.pow(k as u32) < PREFIX_TASKS {
        k += 1;
    }
    let prefixes: Vec<usize> = (0..n.pow(k as u32)).collect();
    let chunks = exec.map(prefixes, |prefix| {
        let mut found = Vec::new();
        let mut owner = vec![0; m];
        let mut rest = prefix;
        for t in (0..k).rev() {
            owner[t] = rest % n;
            rest /= n;
        }
        loop {
            if efx_witness(profile, &to_alloc(&owner, n)).is_none() {
                found.push(owner.clone());
            }
            // odometer over edges k..m, last edge fastest
            let mut t = m - 1;
            loop {
                if t < k {
                    return found;
                }
                owner[t] += 1;
                if owner[t] < n {
                    break;
                }
                owner[t] = 0;
                t -= 1;
            }
        }
    });
    Ok(chunks.into_iter().flatten().collect())
}
