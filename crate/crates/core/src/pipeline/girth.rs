//! Initial allocation for the girth regime.
//!
//! Every pair starts with both endpoints' cuts as candidates. Bundles are
//! offered endpoint first, envied chains are repaired by locking a vertex's
//! pairs to its own cuts, and a final pass keeps one cut per pair.

use std::collections::BTreeMap;

use crate::cuts::{BundleId, BundleTable, CutIds, PartitionKind};
use crate::error::{Error, Result};
use crate::instance::{MultigraphInstance, Pair, VertexId};
use crate::state::{bundles_value, envy_report, AllocationState, Envier};
use crate::valuation::{ValuationProfile, Value};

const OFFER_CAP: usize = 1_000_000;

pub struct GirthOutcome {
    pub table: BundleTable,
    pub state: AllocationState,
    pub repairs: usize,
    pub offers: usize,
    /// Per vertex, the bundles the candidate rule left available at the end.
    pub aux_available: Vec<Vec<BundleId>>,
    pub aux_state: AllocationState,
}

struct Aux<'a> {
    profile: &'a ValuationProfile,
    inst: &'a MultigraphInstance,
    table: &'a BundleTable,
    x: AllocationState,
    locks: BTreeMap<Pair, VertexId>,
    offers: usize,
}

impl Aux<'_> {
    fn cuts(&self, pair: Pair) -> Vec<CutIds> {
        let part = self.table.partition(pair).expect("pipeline pair has a partition");
        match self.locks.get(&pair) {
            Some(&c) => part.cut_of(c).into_iter().collect(),
            None => part.cuts.clone(),
        }
    }

    /// `UB^aux` restricted to one pair; identical for both endpoints.
    fn available(&self, pair: Pair) -> Vec<BundleId> {
        let cuts = self.cuts(pair);
        let held: Vec<(CutIds, BundleId)> = cuts
            .iter()
            .flat_map(|c| [(*c, c.chosen), (*c, c.rest)])
            .filter(|(_, b)| self.x.is_allocated(*b))
            .collect();
        match held.as_slice() {
            [] => {
                let mut all: Vec<_> = cuts.iter().flat_map(|c| [c.chosen, c.rest]).collect();
                all.sort_unstable();
                all
            }
            [(c, b)] => vec![if *b == c.chosen { c.rest } else { c.chosen }],
            _ => Vec::new(),
        }
    }

    fn own_value(&self, v: VertexId) -> Value {
        bundles_value(self.profile, self.table, v, &self.x.holdings(v).iter().copied().collect::<Vec<_>>())
    }

    fn bundle_value(&self, v: VertexId, b: BundleId) -> Value {
        self.profile.val(v, self.table.edges(b))
    }

    /// One offer, or `false` when no guard fires.
    fn offer_once(&mut self) -> Result<bool> {
        for i in self.inst.active_vertices() {
            for j in self.inst.neighbors(i) {
                let pair = Pair::new(i, j);
                let Some(cut) = self.cuts(pair).into_iter().find(|c| c.cutter == j) else {
                    continue;
                };
                let avail = self.available(pair);
                let (vi, vj) = (self.own_value(i), self.own_value(j));
                for s in [cut.chosen, cut.rest] {
                    if !avail.contains(&s) {
                        continue;
                    }
                    if self.bundle_value(i, s) > vi || self.bundle_value(j, s) > vj {
                        if avail.contains(&cut.chosen) && self.bundle_value(i, cut.chosen) > vi {
                            self.x.set_holdings(i, [cut.chosen])?;
                        } else {
                            if self.bundle_value(j, s) <= vj {
                                return Err(Error::breach(format!(
                                    "offer of bundle {s} on {pair} improves neither endpoint"
                                )));
                            }
                            self.x.set_holdings(j, [s])?;
                        }
                        self.offers += 1;
                        return Ok(true);
                    }
                }
            }
        }
        Ok(false)
    }

    fn offer_loop(&mut self) -> Result<()> {
        let start = self.offers;
        while self.offer_once()? {
            if self.offers - start > OFFER_CAP {
                return Err(Error::IterationCap { stage: "girth offers" });
            }
        }
        Ok(())
    }

    /// First envied `a` whose envier and all the envier's neighbors are envied.
    fn violator(&self) -> Result<Option<(VertexId, VertexId)>> {
        let envy = envy_report(self.profile, self.table, &self.x);
        for a in envy.envied_vertices() {
            let b = match envy.p(a) {
                Envier::Unique(b) => b,
                other => return Err(Error::breach(format!("envied {a} has no unique envier: {other:?}"))),
            };
            if envy.envied[b] && self.inst.neighbors(b).iter().all(|&c| envy.envied[c]) {
                return Ok(Some((a, b)));
            }
        }
        Ok(None)
    }

    fn lock(&mut self, b: VertexId) -> Result<()> {
        for r in self.inst.neighbors(b) {
            let pair = Pair::new(b, r);
            if let Some(&old) = self.locks.get(&pair) {
                if old != b {
                    return Err(Error::breach(format!("pair {pair} already locked to {old}")));
                }
            }
            self.locks.insert(pair, b);
        }
        Ok(())
    }

    /// Which cut each pair keeps.
    fn cleanup(&self) -> BTreeMap<Pair, VertexId> {
        let mut choice = BTreeMap::new();
        for (pair, _) in self.inst.pipeline_pairs() {
            let held = |c: VertexId| {
                self.table
                    .partition(pair)
                    .and_then(|p| p.cut_of(c))
                    .is_some_and(|cut| self.x.is_allocated(cut.chosen) || self.x.is_allocated(cut.rest))
            };
            let keep = match self.locks.get(&pair) {
                _ if held(pair.lo) => pair.lo,
                _ if held(pair.hi) => pair.hi,
                Some(&c) => c,
                None => pair.lo,
            };
            choice.insert(pair, keep);
        }
        choice
    }
}

/// Runs the girth-regime initial allocation on a table of candidate cuts.
pub fn step1_girth(profile: &ValuationProfile, inst: &MultigraphInstance, aux_table: &BundleTable) -> Result<GirthOutcome> {
    if aux_table.partitions().any(|p| p.kind != PartitionKind::Candidates) {
        return Err(Error::breach("girth allocation needs a candidate table"));
    }
    let mut aux = Aux {
        profile,
        inst,
        table: aux_table,
        x: AllocationState::new(inst.n(), aux_table.len()),
        locks: BTreeMap::new(),
        offers: 0,
    };
    aux.offer_loop()?;

    let mut repairs = 0;
    while let Some((_a, b)) = aux.violator()? {
        repairs += 1;
        if repairs > inst.n() {
            return Err(Error::IterationCap { stage: "girth repair" });
        }
        aux.x.clear(b);
        aux.lock(b)?;
        aux.offer_loop()?;
        if envy_report(profile, aux_table, &aux.x).envied[b] {
            return Err(Error::breach(format!("repaired vertex {b} is envied again")));
        }
    }

    let aux_available = (0..inst.n())
        .map(|v| {
            let mut out: Vec<_> = inst.neighbors(v).into_iter().flat_map(|r| aux.available(Pair::new(v, r))).collect();
            out.sort_unstable();
            out
        })
        .collect();
    let choice = aux.cleanup();
    let (table, remap) = aux_table.finalize(&choice)?;
    let state = aux.x.remap(&remap, table.len())?;
    Ok(GirthOutcome {
        table,
        state,
        repairs,
        offers: aux.offers,
        aux_available,
        aux_state: aux.x,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cuts::build_bundle_table;
    use crate::instance::{build_instance, detect_regimes, Regime};
    use crate::state::{check_property, Property};

    fn cycle6(weights: impl FnMut(VertexId, usize) -> Value) -> (MultigraphInstance, ValuationProfile) {
        let raw: Vec<_> = (0..6).flat_map(|v| [(v, (v + 1) % 6); 3]).collect();
        let inst = build_instance(6, &raw).unwrap();
        let p = ValuationProfile::additive_from_fn(&inst, weights).unwrap();
        (inst, p)
    }

    fn run(inst: &MultigraphInstance, p: &ValuationProfile) -> GirthOutcome {
        let t = build_bundle_table(p, inst, Regime::Girth6, &detect_regimes(inst)).unwrap();
        step1_girth(p, inst, &t).unwrap()
    }

    #[test]
    fn finalized_pairs_keep_one_cut() {
        let (inst, p) = cycle6(|v, e| ((v * 7 + e * 3) % 5 + 1) as Value);
        let out = run(&inst, &p);
        assert_eq!(out.table.len(), 12);
        for part in out.table.partitions() {
            assert!(matches!(part.kind, PartitionKind::Oriented2 { .. }));
            assert_eq!(part.bundles.len(), 2);
        }
        for prop in [Property::P1, Property::P2, Property::P3_3] {
            let c = check_property(&p, &inst, &out.table, &out.state, prop, None);
            assert!(c.pass, "{prop}: {:?}", c.witness);
        }
    }

    #[test]
    fn aux_stage_satisfies_p2_over_candidates() {
        let (inst, p) = cycle6(|v, e| ((v + 2 * e) % 4) as Value);
        let t = build_bundle_table(&p, &inst, Regime::Girth6, &detect_regimes(&inst)).unwrap();
        let out = step1_girth(&p, &inst, &t).unwrap();
        let c = check_property(&p, &inst, &t, &out.aux_state, Property::P2, Some(&out.aux_available));
        assert!(c.pass, "{:?}", c.witness);
    }

    #[test]
    fn no_repair_when_greedy_suffices() {
        // every vertex values only the edges towards its successor
        let (inst, p) = cycle6(|v, e| {
            let a = inst_edge_lo(e);
            if a == v {
                2
            } else {
                0
            }
        });
        let out = run(&inst, &p);
        assert_eq!(out.repairs, 0);
    }

    /// Edge `e` of the test cycle joins `e / 3` and its successor.
    fn inst_edge_lo(e: usize) -> usize {
        e / 3
    }

    #[test]
    fn uniform_cycle_satisfies_p3_3() {
        let (inst, p) = cycle6(|_, _| 1);
        let out = run(&inst, &p);
        let c = check_property(&p, &inst, &out.table, &out.state, Property::P3_3, None);
        assert!(c.pass, "{:?}", c.witness);
    }

    #[test]
    fn envied_chain_triggers_one_repair() {
        // the 6-cycle 0-3-1-2-4-5 with one edge per pair; greedy offers leave
        // an envied vertex whose envier has only envied neighbors
        let raw = [(4, 5), (2, 4), (1, 2), (1, 3), (0, 3), (0, 5)];
        let inst = build_instance(6, &raw).unwrap();
        let w: [[Value; 6]; 6] = [
            [0, 0, 0, 0, 0, 3],
            [0, 0, 3, 2, 0, 0],
            [0, 1, 2, 0, 0, 0],
            [0, 0, 0, 3, 3, 0],
            [2, 3, 0, 0, 0, 0],
            [3, 0, 0, 0, 0, 1],
        ];
        let p = ValuationProfile::additive_from_fn(&inst, |v, e| w[v][e]).unwrap();
        let out = run(&inst, &p);
        assert_eq!(out.repairs, 1);
        for prop in [Property::P1, Property::P2, Property::P3_3] {
            let c = check_property(&p, &inst, &out.table, &out.state, prop, None);
            assert!(c.pass, "{prop}: {:?}", c.witness);
        }
    }
}
