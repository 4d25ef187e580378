//! Allocation state over bundles, envy queries and property checkers.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::cuts::{join_ids, BundleId, BundleTable};
use crate::error::{Error, Result};
use crate::instance::{EdgeId, MultigraphInstance, Pair, VertexId};
use crate::valuation::{ValuationProfile, Value};

/// Which vertex holds which bundles.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AllocationState {
    holdings: Vec<BTreeSet<BundleId>>,
    holder: Vec<Option<VertexId>>,
}

impl AllocationState {
    pub fn new(n: usize, bundle_count: usize) -> Self {
        AllocationState {
            holdings: vec![BTreeSet::new(); n],
            holder: vec![None; bundle_count],
        }
    }

    pub fn n(&self) -> usize {
        self.holdings.len()
    }

    pub fn bundle_count(&self) -> usize {
        self.holder.len()
    }

    pub fn holdings(&self, v: VertexId) -> &BTreeSet<BundleId> {
        &self.holdings[v]
    }

    pub fn holder(&self, b: BundleId) -> Option<VertexId> {
        self.holder[b]
    }

    pub fn is_allocated(&self, b: BundleId) -> bool {
        self.holder[b].is_some()
    }

    /// Replaces `X_v`. Released bundles become unallocated.
    pub fn set_holdings(&mut self, v: VertexId, bundles: impl IntoIterator<Item = BundleId>) -> Result<()> {
        self.clear(v);
        for b in bundles {
            self.add(v, b)?;
        }
        Ok(())
    }

    pub fn clear(&mut self, v: VertexId) {
        for b in std::mem::take(&mut self.holdings[v]) {
            self.holder[b] = None;
        }
    }

    /// Adds one bundle to `X_v`; the bundle must be unallocated.
    pub fn add(&mut self, v: VertexId, b: BundleId) -> Result<()> {
        if let Some(h) = self.holder[b] {
            return Err(Error::breach(format!("bundle {b} given to {v} is already held by {h}")));
        }
        self.holder[b] = Some(v);
        self.holdings[v].insert(b);
        Ok(())
    }

    /// `U(X)`, ascending.
    pub fn unallocated(&self) -> Vec<BundleId> {
        (0..self.holder.len()).filter(|&b| self.holder[b].is_none()).collect()
    }

    /// `UB_v(X)`: unallocated bundles of `B_v`, ascending.
    pub fn ub(&self, table: &BundleTable, v: VertexId) -> Vec<BundleId> {
        table.family(v).iter().copied().filter(|&b| self.holder[b].is_none()).collect()
    }

    /// Edges of `X_v`, ascending.
    pub fn edges(&self, table: &BundleTable, v: VertexId) -> Vec<EdgeId> {
        let mut out: Vec<EdgeId> = self.holdings[v].iter().flat_map(|&b| table.edges(b).iter().copied()).collect();
        out.sort_unstable();
        out
    }

    /// Edge sets of all vertices.
    pub fn edge_allocation(&self, table: &BundleTable) -> Vec<Vec<EdgeId>> {
        (0..self.n()).map(|v| self.edges(table, v)).collect()
    }

    /// Moves holdings to new bundle ids; every held bundle must survive.
    pub fn remap(&self, remap: &[Option<BundleId>], new_len: usize) -> Result<Self> {
        let mut out = AllocationState::new(self.n(), new_len);
        for v in 0..self.n() {
            for &b in &self.holdings[v] {
                let nb = remap[b].ok_or_else(|| Error::breach(format!("held bundle {b} dropped from the table")))?;
                out.add(v, nb)?;
            }
        }
        Ok(out)
    }

    /// `v_i(X_j)` for all `i, j`.
    pub fn value_matrix(&self, profile: &ValuationProfile, table: &BundleTable) -> Vec<Vec<Value>> {
        let edges = self.edge_allocation(table);
        (0..self.n())
            .map(|i| edges.iter().map(|e| profile.val(i, e)).collect())
            .collect()
    }
}

/// Envier of an envied vertex.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Envier {
    None,
    Unique(VertexId),
    NotUnique(Vec<VertexId>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EnvyReport {
    /// `(i, j)` with `v_i(X_i) < v_i(X_j)`.
    pub envies: Vec<(VertexId, VertexId)>,
    pub envied: Vec<bool>,
    enviers: Vec<Vec<VertexId>>,
}

impl EnvyReport {
    /// `p_v(X)`.
    pub fn p(&self, v: VertexId) -> Envier {
        match self.enviers[v].as_slice() {
            [] => Envier::None,
            [u] => Envier::Unique(*u),
            many => Envier::NotUnique(many.to_vec()),
        }
    }

    /// `p_v(X)` when it exists and is unique.
    pub fn unique_envier(&self, v: VertexId) -> Option<VertexId> {
        match self.p(v) {
            Envier::Unique(u) => Some(u),
            _ => None,
        }
    }

    pub fn enviers(&self, v: VertexId) -> &[VertexId] {
        &self.enviers[v]
    }

    pub fn envied_count(&self) -> usize {
        self.envied.iter().filter(|&&e| e).count()
    }

    pub fn envied_vertices(&self) -> Vec<VertexId> {
        (0..self.envied.len()).filter(|&v| self.envied[v]).collect()
    }
}

pub fn envy_report(profile: &ValuationProfile, table: &BundleTable, x: &AllocationState) -> EnvyReport {
    envy_from_matrix(&x.value_matrix(profile, table))
}

pub(crate) fn envy_from_matrix(vals: &[Vec<Value>]) -> EnvyReport {
    let n = vals.len();
    let mut envies = Vec::new();
    let mut enviers = vec![Vec::new(); n];
    for i in 0..n {
        for j in 0..n {
            if i != j && vals[i][i] < vals[i][j] {
                envies.push((i, j));
                enviers[j].push(i);
            }
        }
    }
    let envied = enviers.iter().map(|e| !e.is_empty()).collect();
    EnvyReport { envies, envied, enviers }
}

/// A failure of `v_i(X_i) >= v_i(X_j \ {g})`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EfxViolation {
    pub envier: VertexId,
    pub holder: VertexId,
    pub good: EdgeId,
}

impl fmt::Display for EfxViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} envies {} even without edge {}", self.envier, self.holder, self.good)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EfxReport {
    pub violations: Vec<EfxViolation>,
    /// Ordered vertex pairs examined.
    pub pairs_checked: usize,
}

impl EfxReport {
    pub fn is_efx(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks EFX over explicit edge sets, one per vertex.
pub fn is_efx(profile: &ValuationProfile, alloc: &[Vec<EdgeId>]) -> EfxReport {
    let n = alloc.len();
    let mut violations = Vec::new();
    for i in 0..n {
        let own = profile.val(i, &alloc[i]);
        for j in 0..n {
            if i == j {
                continue;
            }
            let other = profile.mask(i, &alloc[j]);
            if profile.value_mask(i, other) <= own {
                continue;
            }
            for &g in &alloc[j] {
                if profile.value_mask(i, other & !profile.bit(i, g)) > own {
                    violations.push(EfxViolation { envier: i, holder: j, good: g });
                }
            }
        }
    }
    EfxReport {
        violations,
        pairs_checked: n * n.saturating_sub(1),
    }
}

/// Best selection of pairwise non-parallel bundles from `v`'s pool.
///
/// The pool is `UB_v(X)` plus the bundle of pair `(v, p_v)` held by `p_v` when
/// `v` is envied, or plus `X_v` when it is not. Maximizes value, then bundle
/// count, then prefers the lexicographically smaller id list.
pub fn unpb(
    profile: &ValuationProfile,
    table: &BundleTable,
    x: &AllocationState,
    envy: &EnvyReport,
    v: VertexId,
) -> Result<Vec<BundleId>> {
    let mut pool: BTreeSet<BundleId> = x.ub(table, v).into_iter().collect();
    if envy.envied[v] {
        let p = envy
            .unique_envier(v)
            .ok_or_else(|| Error::breach(format!("envied vertex {v} has {} enviers", envy.enviers(v).len())))?;
        let pair = Pair::new(v, p);
        pool.extend(x.holdings(p).iter().copied().filter(|&b| table.bundle(b).pair == pair));
    } else {
        pool.extend(x.holdings(v).iter().copied());
    }
    Ok(best_selection(profile, table, v, &pool))
}

fn best_selection(profile: &ValuationProfile, table: &BundleTable, v: VertexId, pool: &BTreeSet<BundleId>) -> Vec<BundleId> {
    let mut groups: BTreeMap<Pair, Vec<(BundleId, u64)>> = BTreeMap::new();
    for &b in pool {
        groups
            .entry(table.bundle(b).pair)
            .or_default()
            .push((b, profile.mask(v, table.edges(b))));
    }
    let groups: Vec<Vec<(BundleId, u64)>> = groups.into_values().collect();

    struct Search<'a> {
        profile: &'a ValuationProfile,
        v: VertexId,
        groups: &'a [Vec<(BundleId, u64)>],
        chosen: Vec<BundleId>,
        best: Option<(Value, Vec<BundleId>)>,
    }
    impl Search<'_> {
        fn run(&mut self, g: usize, mask: u64) {
            if g == self.groups.len() {
                let value = self.profile.value_mask(self.v, mask);
                let mut sel = self.chosen.clone();
                sel.sort_unstable();
                let better = match &self.best {
                    None => true,
                    Some((bv, bs)) => (value, sel.len()) > (*bv, bs.len()) || ((value, sel.len()) == (*bv, bs.len()) && sel < *bs),
                };
                if better {
                    self.best = Some((value, sel));
                }
                return;
            }
            for &(b, m) in &self.groups[g] {
                self.chosen.push(b);
                self.run(g + 1, mask | m);
                self.chosen.pop();
            }
            self.run(g + 1, mask);
        }
    }
    let mut search = Search {
        profile,
        v,
        groups: &groups,
        chosen: Vec::new(),
        best: None,
    };
    search.run(0, 0);
    search.best.map(|(_, s)| s).unwrap_or_default()
}

/// Value of a bundle set for `v`.
pub fn bundles_value(profile: &ValuationProfile, table: &BundleTable, v: VertexId, bundles: &[BundleId]) -> Value {
    let mask = bundles.iter().fold(0, |m, &b| m | profile.mask(v, table.edges(b)));
    profile.value_mask(v, mask)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Property {
    /// Partial EFX orientation built from `B_i` bundles.
    P1,
    /// No vertex prefers an available bundle of its family.
    P2,
    /// No two envied vertices are adjacent.
    P3_1,
    /// At most `floor(n/2)` envied vertices.
    P3_2,
    /// Every envied `a` has `p_a` or a neighbor of `p_a` non-envied.
    P3_3,
    /// No vertex prefers its UNPB selection.
    P4,
}

impl Property {
    pub fn name(&self) -> &'static str {
        match self {
            Property::P1 => "P1",
            Property::P2 => "P2",
            Property::P3_1 => "P3.1",
            Property::P3_2 => "P3.2",
            Property::P3_3 => "P3.3",
            Property::P4 => "P4",
        }
    }
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PropertyCheck {
    pub name: String,
    pub pass: bool,
    pub witness: Option<String>,
}

impl PropertyCheck {
    fn pass(name: impl Into<String>) -> Self {
        PropertyCheck {
            name: name.into(),
            pass: true,
            witness: None,
        }
    }

    fn fail(name: impl Into<String>, witness: String) -> Self {
        PropertyCheck {
            name: name.into(),
            pass: false,
            witness: Some(witness),
        }
    }

    fn from_witness(name: impl Into<String>, witness: Option<String>) -> Self {
        match witness {
            None => Self::pass(name),
            Some(w) => Self::fail(name, w),
        }
    }
}

/// Per-vertex override of the bundles counted as available for P2.
pub type Universe<'a> = Option<&'a [Vec<BundleId>]>;

pub fn check_property(
    profile: &ValuationProfile,
    inst: &MultigraphInstance,
    table: &BundleTable,
    x: &AllocationState,
    which: Property,
    universe: Universe<'_>,
) -> PropertyCheck {
    let envy = envy_report(profile, table, x);
    let witness = match which {
        Property::P1 => p1_witness(profile, table, x),
        Property::P2 => (0..x.n()).find_map(|v| {
            let own = bundles_value(profile, table, v, &x.holdings(v).iter().copied().collect::<Vec<_>>());
            let avail = match universe {
                Some(u) => u[v].clone(),
                None => x.ub(table, v),
            };
            avail
                .into_iter()
                .find(|&b| profile.val(v, table.edges(b)) > own)
                .map(|b| format!("vertex {v} prefers available bundle {b}"))
        }),
        Property::P3_1 => inst
            .pipeline_pairs()
            .map(|(p, _)| p)
            .find(|p| envy.envied[p.lo] && envy.envied[p.hi])
            .map(|p| format!("adjacent envied vertices {} and {}", p.lo, p.hi)),
        Property::P3_2 => {
            let bound = inst.active_count() / 2;
            let count = envy.envied_count();
            (count > bound).then(|| format!("{count} envied vertices, above {bound}"))
        }
        Property::P3_3 => envy.envied_vertices().into_iter().find_map(|a| match envy.p(a) {
            Envier::Unique(b) => {
                let ok = !envy.envied[b] || inst.neighbors(b).iter().any(|&c| !envy.envied[c]);
                (!ok).then(|| format!("envied {a}: envier {b} and all its neighbors are envied"))
            }
            other => Some(format!("envied {a} has no unique envier ({other:?})")),
        }),
        Property::P4 => (0..x.n()).find_map(|v| match unpb(profile, table, x, &envy, v) {
            Ok(sel) => {
                let own = bundles_value(profile, table, v, &x.holdings(v).iter().copied().collect::<Vec<_>>());
                let best = bundles_value(profile, table, v, &sel);
                (best > own).then(|| format!("vertex {v} values UNPB {} at {best} > {own}", join_ids(&sel)))
            }
            Err(e) => Some(e.to_string()),
        }),
    };
    PropertyCheck::from_witness(which.name(), witness)
}

fn p1_witness(profile: &ValuationProfile, table: &BundleTable, x: &AllocationState) -> Option<String> {
    for v in 0..x.n() {
        let mut pairs = BTreeSet::new();
        for &b in x.holdings(v) {
            let pair = table.bundle(b).pair;
            if !pair.contains(v) {
                return Some(format!("vertex {v} holds bundle {b} of pair {pair}"));
            }
            if !pairs.insert(pair) {
                return Some(format!("vertex {v} holds two bundles of pair {pair}"));
            }
        }
    }
    let report = is_efx(profile, &x.edge_allocation(table));
    report.violations.first().map(ToString::to_string)
}

/// `r` of the unallocated-bundle bound: bundles per partition in the regime.
pub fn partition_bound(regime: crate::instance::Regime) -> usize {
    match regime {
        crate::instance::Regime::BoundedNeighbors => 3,
        _ => 2,
    }
}

/// Per pair, at most `r + q - 2` unallocated bundles where `q` counts envied endpoints.
pub fn check_unallocated_bound(
    profile: &ValuationProfile,
    table: &BundleTable,
    x: &AllocationState,
    r: usize,
) -> PropertyCheck {
    let envy = envy_report(profile, table, x);
    let witness = table.partitions().find_map(|part| {
        let q = envy.envied[part.pair.lo] as usize + envy.envied[part.pair.hi] as usize;
        let free = part.bundles.iter().filter(|&&b| !x.is_allocated(b)).count();
        (free + 2 > r + q).then(|| format!("pair {} has {free} unallocated bundles with q = {q}", part.pair))
    });
    PropertyCheck::from_witness("FREE-BOUND", witness)
}

/// Every unallocated bundle has an envied endpoint.
pub fn check_unallocated_envied(profile: &ValuationProfile, table: &BundleTable, x: &AllocationState) -> PropertyCheck {
    let envy = envy_report(profile, table, x);
    let witness = x.unallocated().into_iter().find_map(|b| {
        let p = table.bundle(b).pair;
        (!envy.envied[p.lo] && !envy.envied[p.hi]).then(|| format!("bundle {b} of {p} has no envied endpoint"))
    });
    PropertyCheck::from_witness("UNALLOC-ENVIED", witness)
}
