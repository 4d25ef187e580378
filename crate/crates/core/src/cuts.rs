//! Cut-and-choose machinery over pair classes and the resulting bundle table.
//!
//! Bipartitions of a class `E` are enumerated in a fixed order: the smallest
//! edge always sits in `P1`, and the remaining edges' membership in `P1`
//! forms a bit string read as a number with the second-smallest edge as the
//! most significant bit. Counting up from zero visits `P1` membership vectors
//! in lexicographic order, so the first hit is the lexicographically smallest.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::instance::{EdgeId, MultigraphInstance, Pair, Regime, RegimeReport, VertexId};
use crate::valuation::{ValuationProfile, Value};

/// Largest pair class searched exhaustively.
pub const CLASS_CAP: usize = 12;

pub type BundleId = usize;
pub type Cut = (Vec<EdgeId>, Vec<EdgeId>);

/// Per-position local bits of a class for one vertex.
struct ClassView<'a> {
    profile: &'a ValuationProfile,
    v: VertexId,
    bits: Vec<u64>,
}

impl<'a> ClassView<'a> {
    fn new(profile: &'a ValuationProfile, v: VertexId, edges: &[EdgeId]) -> Self {
        ClassView {
            profile,
            v,
            bits: edges.iter().map(|&e| profile.bit(v, e)).collect(),
        }
    }

    fn mask(&self, positions: u64) -> u64 {
        let mut m = 0;
        let mut p = positions;
        while p != 0 {
            m |= self.bits[p.trailing_zeros() as usize];
            p &= p - 1;
        }
        m
    }

    fn value(&self, positions: u64) -> Value {
        self.profile.value_mask(self.v, self.mask(positions))
    }

    /// Whether holding `own` leaves no envy towards `other` minus any one good.
    fn efx_against(&self, own: u64, other: u64) -> bool {
        let mine = self.value(own);
        let mut p = other;
        while p != 0 {
            let pos = p.trailing_zeros();
            p &= p - 1;
            if self.value(other & !(1 << pos)) > mine {
                return false;
            }
        }
        true
    }

    fn is_cut(&self, p1: u64, p2: u64) -> bool {
        self.efx_against(p1, p2) && self.efx_against(p2, p1)
    }
}

fn sorted_class(pair: Pair, edges: &[EdgeId]) -> Result<Vec<EdgeId>> {
    if edges.len() > CLASS_CAP {
        return Err(Error::ClassTooLarge {
            pair,
            size: edges.len(),
            cap: CLASS_CAP,
        });
    }
    let mut e = edges.to_vec();
    e.sort_unstable();
    e.dedup();
    Ok(e)
}

/// Candidate `P1` position sets in search order.
fn candidates(k: usize) -> impl Iterator<Item = (u64, u64)> {
    let full = (1u64 << k) - 1;
    let rest = k.saturating_sub(1);
    (0..1u64 << rest).filter_map(move |code| {
        // bit (rest-1-t) of `code` is the membership of position t+1
        let mut p1 = 1u64;
        for t in 0..rest {
            if code >> (rest - 1 - t) & 1 == 1 {
                p1 |= 1 << (t + 1);
            }
        }
        let p2 = full & !p1;
        (p2 != 0 || k == 1).then_some((p1, p2))
    })
}

fn positions_to_edges(edges: &[EdgeId], positions: u64) -> Vec<EdgeId> {
    (0..edges.len())
        .filter(|&t| positions >> t & 1 == 1)
        .map(|t| edges[t])
        .collect()
}

/// Checks the EFX-cut condition for `cutter` on an explicit bipartition.
pub fn is_efx_cut(profile: &ValuationProfile, cutter: VertexId, p1: &[EdgeId], p2: &[EdgeId]) -> bool {
    let edges: Vec<EdgeId> = p1.iter().chain(p2).copied().collect();
    let view = ClassView::new(profile, cutter, &edges);
    let m1 = (1u64 << p1.len()) - 1;
    let m2 = ((1u64 << edges.len()) - 1) & !m1;
    view.is_cut(m1, m2)
}

/// Lexicographically first EFX-cut of `edges` for `cutter`.
pub fn efx_cut(profile: &ValuationProfile, cutter: VertexId, pair: Pair, edges: &[EdgeId]) -> Result<Cut> {
    let e = sorted_class(pair, edges)?;
    let view = ClassView::new(profile, cutter, &e);
    candidates(e.len())
        .find(|&(p1, p2)| view.is_cut(p1, p2))
        .map(|(p1, p2)| (positions_to_edges(&e, p1), positions_to_edges(&e, p2)))
        .ok_or(Error::NoEfxCut { cutter, pair })
}

/// The two parts of one endpoint's cut, labelled by who takes which.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChosenCut {
    pub cutter: VertexId,
    /// The part the other endpoint prefers.
    pub chosen: Vec<EdgeId>,
    /// Its complement, left to the cutter.
    pub rest: Vec<EdgeId>,
    /// Whether `chosen` is the first part of the cut.
    pub chosen_is_first: bool,
}

/// `chooser`'s pick from `cutter`'s cut; ties go to the first part.
pub fn choose_from(
    profile: &ValuationProfile,
    cutter: VertexId,
    chooser: VertexId,
    pair: Pair,
    edges: &[EdgeId],
) -> Result<ChosenCut> {
    let (p1, p2) = efx_cut(profile, cutter, pair, edges)?;
    let first = profile.val(chooser, &p1) >= profile.val(chooser, &p2);
    let (chosen, rest) = if first { (p1, p2) } else { (p2, p1) };
    Ok(ChosenCut {
        cutter,
        chosen,
        rest,
        chosen_is_first: first,
    })
}

/// Both cut-and-choose outcomes for the pair `(i, j)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChosenBundles {
    /// `j` cuts and `i` chooses.
    pub cut_by_j: ChosenCut,
    /// `i` cuts and `j` chooses.
    pub cut_by_i: ChosenCut,
}

pub fn choose_bundles(
    profile: &ValuationProfile,
    i: VertexId,
    j: VertexId,
    edges: &[EdgeId],
) -> Result<ChosenBundles> {
    let pair = Pair::new(i, j);
    Ok(ChosenBundles {
        cut_by_j: choose_from(profile, j, i, pair, edges)?,
        cut_by_i: choose_from(profile, i, j, pair, edges)?,
    })
}

/// First bipartition that is an EFX-cut for both endpoints.
pub fn find_common_cut(profile: &ValuationProfile, i: VertexId, j: VertexId, edges: &[EdgeId]) -> Result<Option<Cut>> {
    let pair = Pair::new(i, j);
    let e = sorted_class(pair, edges)?;
    let vi = ClassView::new(profile, i, &e);
    let vj = ClassView::new(profile, j, &e);
    Ok(candidates(e.len())
        .find(|&(p1, p2)| vi.is_cut(p1, p2) && vj.is_cut(p1, p2))
        .map(|(p1, p2)| (positions_to_edges(&e, p1), positions_to_edges(&e, p2))))
}

/// Splits a class without a common cut into three parts on which `i` and `j`
/// have different favorites.
///
/// Starts from `i`'s cut, oriented so that `j` holding `P1` is not
/// EFX-satisfied against `P2`. Then `P2` is `j`'s strict favorite and the
/// smallest `g` in `P2` with `v_j(P2 - g) > v_j(P1)` also satisfies
/// `v_i(P2 - g) <= v_i(P1)` and `v_i(g) <= v_i(P1)`. The result is
/// `(P1, P2 - g, {g})`; with ties broken towards earlier parts, `i`'s favorite
/// is `P1` and `j`'s is not.
pub fn three_partition(
    profile: &ValuationProfile,
    i: VertexId,
    j: VertexId,
    edges: &[EdgeId],
) -> Result<[Vec<EdgeId>; 3]> {
    let pair = Pair::new(i, j);
    let (a, b) = efx_cut(profile, i, pair, edges)?;
    let j_content = |own: &[EdgeId], other: &[EdgeId]| is_efx_for(profile, j, own, other);
    let (p1, p2) = if !j_content(&a, &b) {
        (a, b)
    } else if !j_content(&b, &a) {
        (b, a)
    } else {
        return Err(Error::NoQualifyingGood { pair });
    };

    let vi1 = profile.val(i, &p1);
    let vj1 = profile.val(j, &p1);
    let g = p2
        .iter()
        .copied()
        .find(|&g| {
            let rest: Vec<EdgeId> = p2.iter().copied().filter(|&e| e != g).collect();
            profile.val(j, &rest) > vj1 && profile.val(i, &rest) <= vi1 && profile.val(i, &[g]) <= vi1
        })
        .ok_or(Error::NoQualifyingGood { pair })?;
    let rest: Vec<EdgeId> = p2.iter().copied().filter(|&e| e != g).collect();
    let parts = [p1, rest, vec![g]];

    let top = |v: VertexId| {
        (0..3)
            .max_by_key(|&t| (profile.val(v, &parts[t]), std::cmp::Reverse(t)))
            .unwrap()
    };
    if top(i) == top(j) {
        return Err(Error::breach(format!("three-way split of {pair} leaves a common favorite")));
    }
    Ok(parts)
}

/// Whether `v` holding `own` is EFX-satisfied against `other`.
fn is_efx_for(profile: &ValuationProfile, v: VertexId, own: &[EdgeId], other: &[EdgeId]) -> bool {
    let mine = profile.val(v, own);
    other.iter().all(|&g| {
        let rest: Vec<EdgeId> = other.iter().copied().filter(|&e| e != g).collect();
        profile.val(v, &rest) <= mine
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PartitionKind {
    /// A bipartition that is an EFX-cut for both endpoints.
    Common2,
    /// Three parts with distinct favorites for the endpoints.
    ThreePart,
    /// One endpoint's cut.
    Oriented2 { cutter: VertexId },
    /// Both endpoints' cuts, to be narrowed down to one (four bundles).
    Candidates,
}

impl PartitionKind {
    pub fn label(&self) -> String {
        match self {
            PartitionKind::Common2 => "common2".into(),
            PartitionKind::ThreePart => "threepart".into(),
            PartitionKind::Oriented2 { cutter } => format!("oriented2:{cutter}"),
            PartitionKind::Candidates => "candidates".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Bundle {
    pub id: BundleId,
    pub pair: Pair,
    /// Sorted, nonempty.
    pub edges: Vec<EdgeId>,
}

/// One endpoint's cut inside a partition, by bundle id.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CutIds {
    pub cutter: VertexId,
    /// Picked by the non-cutter.
    pub chosen: BundleId,
    pub rest: BundleId,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PairPartition {
    pub pair: Pair,
    pub kind: PartitionKind,
    /// Bundle ids in partition order.
    pub bundles: Vec<BundleId>,
    /// Cuts present: one for `Oriented2`, two (low endpoint first) for `Candidates`.
    pub cuts: Vec<CutIds>,
}

impl PairPartition {
    pub fn cut_of(&self, cutter: VertexId) -> Option<CutIds> {
        self.cuts.iter().copied().find(|c| c.cutter == cutter)
    }
}

/// Bundles of every pipeline pair and the per-vertex families `B_i`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BundleTable {
    bundles: Vec<Bundle>,
    partitions: BTreeMap<Pair, PairPartition>,
    families: Vec<Vec<BundleId>>,
}

impl BundleTable {
    fn new(n: usize) -> Self {
        BundleTable {
            bundles: Vec::new(),
            partitions: BTreeMap::new(),
            families: vec![Vec::new(); n],
        }
    }

    fn push_partition(&mut self, pair: Pair, kind: PartitionKind, parts: Vec<Vec<EdgeId>>, cuts: Vec<(VertexId, usize, usize)>) {
        let base = self.bundles.len();
        let mut ids = Vec::with_capacity(parts.len());
        for mut edges in parts {
            edges.sort_unstable();
            let id = self.bundles.len();
            self.bundles.push(Bundle { id, pair, edges });
            self.families[pair.lo].push(id);
            self.families[pair.hi].push(id);
            ids.push(id);
        }
        let cuts = cuts
            .into_iter()
            .map(|(cutter, chosen, rest)| CutIds {
                cutter,
                chosen: base + chosen,
                rest: base + rest,
            })
            .collect();
        self.partitions.insert(
            pair,
            PairPartition {
                pair,
                kind,
                bundles: ids,
                cuts,
            },
        );
    }

    /// Rebuilds a table from explicit partitions, keeping their order.
    pub fn from_partitions(n: usize, partitions: Vec<(Pair, PartitionSpec)>) -> Self {
        let mut t = BundleTable::new(n);
        for (pair, (kind, parts, cuts)) in partitions {
            t.push_partition(pair, kind, parts, cuts);
        }
        t
    }

    pub fn len(&self) -> usize {
        self.bundles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bundles.is_empty()
    }

    pub fn n(&self) -> usize {
        self.families.len()
    }

    pub fn bundle(&self, id: BundleId) -> &Bundle {
        &self.bundles[id]
    }

    pub fn bundles(&self) -> &[Bundle] {
        &self.bundles
    }

    pub fn edges(&self, id: BundleId) -> &[EdgeId] {
        &self.bundles[id].edges
    }

    pub fn partition(&self, pair: Pair) -> Option<&PairPartition> {
        self.partitions.get(&pair)
    }

    pub fn partitions(&self) -> impl Iterator<Item = &PairPartition> {
        self.partitions.values()
    }

    /// `B_v`: ids of all bundles on pairs containing `v`, ascending.
    pub fn family(&self, v: VertexId) -> &[BundleId] {
        &self.families[v]
    }

    /// Largest number of bundles in one partition.
    pub fn max_partition_size(&self) -> usize {
        self.partitions.values().map(|p| p.bundles.len()).max().unwrap_or(0)
    }

    /// `v`'s favorite among `candidates`: highest value, then lowest id.
    pub fn best<I: IntoIterator<Item = BundleId>>(&self, profile: &ValuationProfile, v: VertexId, candidates: I) -> Option<BundleId> {
        candidates
            .into_iter()
            .map(|b| (profile.val(v, self.edges(b)), b))
            .max_by(|x, y| x.0.cmp(&y.0).then(y.1.cmp(&x.1)))
            .map(|(_, b)| b)
    }

    /// `B_v` sorted by `v`'s strict ranking (value descending, id ascending).
    pub fn ranking(&self, profile: &ValuationProfile, v: VertexId) -> Vec<BundleId> {
        let mut fam = self.families[v].clone();
        fam.sort_by(|&a, &b| {
            profile
                .val(v, self.edges(b))
                .cmp(&profile.val(v, self.edges(a)))
                .then(a.cmp(&b))
        });
        fam
    }

    /// Keeps one cut per `Candidates` pair (`choice[pair]` is the cutter) and
    /// renumbers. Returns the new table and the old-to-new id map.
    pub fn finalize(&self, choice: &BTreeMap<Pair, VertexId>) -> Result<(BundleTable, Vec<Option<BundleId>>)> {
        let mut out = BundleTable::new(self.n());
        let mut remap = vec![None; self.len()];
        for part in self.partitions.values() {
            let (kind, old_ids, cuts) = match part.kind {
                PartitionKind::Candidates => {
                    let cutter = *choice
                        .get(&part.pair)
                        .ok_or_else(|| Error::breach(format!("no cut chosen for {}", part.pair)))?;
                    let cut = part
                        .cut_of(cutter)
                        .ok_or_else(|| Error::breach(format!("{cutter} is not an endpoint of {}", part.pair)))?;
                    // keep the cut's own part order
                    let mut ids = vec![cut.chosen, cut.rest];
                    ids.sort_unstable();
                    let chosen_pos = ids.iter().position(|&b| b == cut.chosen).unwrap();
                    (
                        PartitionKind::Oriented2 { cutter },
                        ids,
                        vec![(cutter, chosen_pos, 1 - chosen_pos)],
                    )
                }
                kind => {
                    let cuts = part
                        .cuts
                        .iter()
                        .map(|c| {
                            let pos = |b| part.bundles.iter().position(|&x| x == b).unwrap();
                            (c.cutter, pos(c.chosen), pos(c.rest))
                        })
                        .collect();
                    (kind, part.bundles.clone(), cuts)
                }
            };
            let base = out.len();
            for (t, &old) in old_ids.iter().enumerate() {
                remap[old] = Some(base + t);
            }
            let parts = old_ids.iter().map(|&b| self.edges(b).to_vec()).collect();
            out.push_partition(part.pair, kind, parts, cuts);
        }
        Ok((out, remap))
    }

    /// One line per bundle: `bundle <id> <lo> <hi> <kind> <edges>`.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        for part in self.partitions.values() {
            for &b in &part.bundles {
                let mut role = String::new();
                for c in &part.cuts {
                    if c.chosen == b {
                        write!(role, ":cut{}-chosen", c.cutter).unwrap();
                    } else if c.rest == b {
                        write!(role, ":cut{}-rest", c.cutter).unwrap();
                    }
                }
                writeln!(
                    out,
                    "bundle {b} {} {} {}{role} {}",
                    part.pair.lo,
                    part.pair.hi,
                    part.kind.label(),
                    join_ids(self.edges(b))
                )
                .unwrap();
            }
        }
        out
    }
}

pub(crate) fn join_ids(ids: &[usize]) -> String {
    if ids.is_empty() {
        return "-".into();
    }
    ids.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

/// Kind, parts, and cuts as `(cutter, chosen part, rest part)` indices.
pub type PartitionSpec = (PartitionKind, Vec<Vec<EdgeId>>, Vec<(VertexId, usize, usize)>);

fn oriented(profile: &ValuationProfile, cutter: VertexId, chooser: VertexId, pair: Pair, class: &[EdgeId]) -> Result<PartitionSpec> {
    let c = choose_from(profile, cutter, chooser, pair, class)?;
    let (parts, chosen) = if c.chosen_is_first {
        (vec![c.chosen, c.rest], 0)
    } else {
        (vec![c.rest, c.chosen], 1)
    };
    Ok((PartitionKind::Oriented2 { cutter }, parts, vec![(cutter, chosen, 1 - chosen)]))
}

fn pair_spec(profile: &ValuationProfile, regime: Regime, report: &RegimeReport, pair: Pair, class: &[EdgeId]) -> Result<PartitionSpec> {
    match regime {
        Regime::Bipartite => {
            let color = report.coloring.as_ref().expect("bipartite report has a coloring");
            // side-1 vertices cut
            let (cutter, chooser) = if color[pair.hi] == 1 {
                (pair.hi, pair.lo)
            } else {
                (pair.lo, pair.hi)
            };
            oriented(profile, cutter, chooser, pair, class)
        }
        Regime::BoundedNeighbors => match find_common_cut(profile, pair.lo, pair.hi, class)? {
            Some((p1, p2)) => Ok((PartitionKind::Common2, vec![p1, p2], Vec::new())),
            None => {
                let parts = three_partition(profile, pair.lo, pair.hi, class)?;
                Ok((PartitionKind::ThreePart, parts.to_vec(), Vec::new()))
            }
        },
        Regime::Girth6 => {
            let lo = choose_from(profile, pair.lo, pair.hi, pair, class)?;
            let hi = choose_from(profile, pair.hi, pair.lo, pair, class)?;
            let order = |c: &ChosenCut| if c.chosen_is_first { (0, 1) } else { (1, 0) };
            let (lc, lr) = order(&lo);
            let (hc, hr) = order(&hi);
            let first = |c: ChosenCut| if c.chosen_is_first { [c.chosen, c.rest] } else { [c.rest, c.chosen] };
            let mut parts = first(lo).to_vec();
            parts.extend(first(hi));
            Ok((
                PartitionKind::Candidates,
                parts,
                vec![(pair.lo, lc, lr), (pair.hi, 2 + hc, 2 + hr)],
            ))
        }
    }
}

/// Builds the table for `regime` over the pipeline pairs of `inst`.
pub fn build_bundle_table(profile: &ValuationProfile, inst: &MultigraphInstance, regime: Regime, report: &RegimeReport) -> Result<BundleTable> {
    build_bundle_table_with(profile, inst, regime, report, Execution::Sequential)
}

/// As [`build_bundle_table`], computing the per-pair cuts under `exec`.
pub fn build_bundle_table_with(
    profile: &ValuationProfile,
    inst: &MultigraphInstance,
    regime: Regime,
    report: &RegimeReport,
    exec: Execution,
) -> Result<BundleTable> {
    if !report.applies(regime) {
        return Err(Error::RegimeNotApplicable {
            regime: regime.to_string(),
            reason: report.failure_reason(regime),
        });
    }
    let pairs: Vec<(Pair, Vec<EdgeId>)> = inst.pipeline_pairs().map(|(p, c)| (p, c.to_vec())).collect();
    let specs = exec.map(pairs, |(pair, class)| pair_spec(profile, regime, report, pair, &class).map(|s| (pair, s)));
    let mut table = BundleTable::new(inst.n());
    for spec in specs {
        let (pair, (kind, parts, cuts)) = spec?;
        table.push_partition(pair, kind, parts, cuts);
    }
    Ok(table)
}
