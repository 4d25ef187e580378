//! Monotone set valuations restricted to each vertex's relevant edges.
//!
//! A vertex only ever sees the real edges incident to it. Every edge set is
//! projected onto that local universe before evaluation, so irrelevant and
//! dummy edges carry zero marginal value by construction. Values are exact
//! integers.

mod format;

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::instance::{EdgeId, MultigraphInstance, VertexId};

pub use format::{parse_valuation, serialize_valuation};

pub type Value = u64;

/// Largest relevant-edge count for which a full table is stored.
pub const TABLE_CAP: usize = 16;
/// Default per-vertex cap for the exhaustive monotonicity audit.
pub const AUDIT_CAP: usize = 16;
/// Local masks are `u64`.
const DEGREE_CAP: usize = 64;
/// Masks checked per vertex when its degree exceeds the audit cap.
const AUDIT_SAMPLES: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Representation {
    Additive,
    Table,
    SeededMonotone,
}

/// Input description of one vertex's valuation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum VertexSpec {
    /// Weight per relevant edge; omitted edges weigh 0.
    Additive(BTreeMap<EdgeId, Value>),
    /// Explicit values for some sets of relevant edges. Every other set takes
    /// the maximum over its covers (the sets with one edge removed).
    Table(BTreeMap<Vec<EdgeId>, Value>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Kind {
    Additive(Vec<Value>),
    Table(Vec<Value>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct VertexValuation {
    /// Relevant real edges, ascending; position = local bit.
    edges: Vec<EdgeId>,
    kind: Kind,
    representation: Representation,
}

impl VertexValuation {
    fn value_mask(&self, mask: u64) -> Value {
        match &self.kind {
            Kind::Additive(w) => {
                let mut m = mask;
                let mut total = 0;
                while m != 0 {
                    total += w[m.trailing_zeros() as usize];
                    m &= m - 1;
                }
                total
            }
            Kind::Table(t) => t[mask as usize],
        }
    }
}

/// Per-vertex valuation oracles for one instance.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ValuationProfile {
    vertices: Vec<VertexValuation>,
    /// For each edge id, the local bit at each endpoint (`None` for dummies).
    slots: Vec<Option<[(VertexId, u8); 2]>>,
}

impl ValuationProfile {
    /// Builds a profile from one spec per vertex.
    pub fn from_specs(inst: &MultigraphInstance, specs: Vec<VertexSpec>) -> Result<Self> {
        if specs.len() != inst.n() {
            return Err(Error::UnknownVertex(specs.len().min(inst.n())));
        }
        let mut vertices = Vec::with_capacity(inst.n());
        for (v, spec) in specs.into_iter().enumerate() {
            let edges = inst.relevant_real_edges(v);
            check_degree(v, edges.len(), DEGREE_CAP)?;
            let local = |e: EdgeId| {
                edges
                    .binary_search(&e)
                    .map_err(|_| Error::IrrelevantEdge { vertex: v, edge: e })
            };
            let (kind, representation) = match spec {
                VertexSpec::Additive(weights) => {
                    let mut w = vec![0; edges.len()];
                    for (e, value) in weights {
                        w[local(e)?] = value;
                    }
                    (Kind::Additive(w), Representation::Additive)
                }
                VertexSpec::Table(entries) => {
                    check_degree(v, edges.len(), TABLE_CAP)?;
                    let mut explicit = BTreeMap::new();
                    for (set, value) in entries {
                        let mut mask = 0u64;
                        for e in set {
                            mask |= 1 << local(e)?;
                        }
                        explicit.insert(mask, value);
                    }
                    (Kind::Table(complete_table(edges.len(), &explicit)), Representation::Table)
                }
            };
            vertices.push(VertexValuation {
                edges,
                kind,
                representation,
            });
        }
        Ok(Self::assemble(inst, vertices))
    }

    /// Additive profile with weight `weight(v, e)` for every relevant real edge.
    pub fn additive_from_fn(
        inst: &MultigraphInstance,
        mut weight: impl FnMut(VertexId, EdgeId) -> Value,
    ) -> Result<Self> {
        let specs = (0..inst.n())
            .map(|v| {
                VertexSpec::Additive(
                    inst.relevant_real_edges(v)
                        .into_iter()
                        .map(|e| (e, weight(v, e)))
                        .collect(),
                )
            })
            .collect();
        Self::from_specs(inst, specs)
    }

    fn assemble(inst: &MultigraphInstance, vertices: Vec<VertexValuation>) -> Self {
        let slots = inst
            .edges()
            .iter()
            .map(|e| {
                if e.is_dummy {
                    return None;
                }
                let bit = |v: VertexId| {
                    vertices[v].edges.binary_search(&e.id).expect("relevant edge") as u8
                };
                Some([(e.a, bit(e.a)), (e.b, bit(e.b))])
            })
            .collect();
        ValuationProfile { vertices, slots }
    }

    pub fn n(&self) -> usize {
        self.vertices.len()
    }

    pub fn representation(&self, v: VertexId) -> Representation {
        self.vertices[v].representation
    }

    /// Relevant real edges of `v`, ascending.
    pub fn relevant_edges(&self, v: VertexId) -> &[EdgeId] {
        &self.vertices[v].edges
    }

    /// Local bit of edge `e` for vertex `v`, or 0 when `e` is irrelevant to `v`.
    pub fn bit(&self, v: VertexId, e: EdgeId) -> u64 {
        match self.slots.get(e).copied().flatten() {
            Some([(a, ba), (b, bb)]) => {
                if a == v {
                    1 << ba
                } else if b == v {
                    1 << bb
                } else {
                    0
                }
            }
            None => 0,
        }
    }

    /// Projection of an edge set onto `v`'s local universe.
    pub fn mask<'a>(&self, v: VertexId, edges: impl IntoIterator<Item = &'a EdgeId>) -> u64 {
        edges.into_iter().fold(0, |m, &e| m | self.bit(v, e))
    }

    /// `v`'s value for a local mask.
    pub fn value_mask(&self, v: VertexId, mask: u64) -> Value {
        self.vertices[v].value_mask(mask)
    }

    /// `v`'s value for an edge set; irrelevant and dummy edges are ignored.
    pub fn value(&self, v: VertexId, edges: &[EdgeId]) -> Result<Value> {
        if v >= self.n() {
            return Err(Error::UnknownVertex(v));
        }
        Ok(self.value_mask(v, self.mask(v, edges)))
    }

    /// Value as a `(v, edges)` shorthand for callers that already checked `v`.
    pub fn val(&self, v: VertexId, edges: &[EdgeId]) -> Value {
        self.value_mask(v, self.mask(v, edges))
    }

    /// Table entries that differ from the maximum over their covers, in
    /// (size, lexicographic) order. Returns `None` for additive vertices.
    pub fn table_entries(&self, v: VertexId) -> Option<Vec<(Vec<EdgeId>, Value)>> {
        let vert = &self.vertices[v];
        let Kind::Table(t) = &vert.kind else {
            return None;
        };
        let mut out = Vec::new();
        for mask in masks_by_size(vert.edges.len()) {
            let floor = cover_max(t, mask);
            if t[mask as usize] != floor {
                out.push((local_to_edges(&vert.edges, mask), t[mask as usize]));
            }
        }
        Some(out)
    }

    /// Weights of an additive vertex, in edge order.
    pub fn additive_weights(&self, v: VertexId) -> Option<Vec<(EdgeId, Value)>> {
        let vert = &self.vertices[v];
        match &vert.kind {
            Kind::Additive(w) => Some(vert.edges.iter().copied().zip(w.iter().copied()).collect()),
            Kind::Table(_) => None,
        }
    }
}

fn check_degree(vertex: VertexId, degree: usize, cap: usize) -> Result<()> {
    if degree > cap {
        return Err(Error::DegreeAboveCap { vertex, degree, cap });
    }
    Ok(())
}

/// All masks over `k` bits in (popcount, value) order.
fn masks_by_size(k: usize) -> Vec<u64> {
    let mut masks: Vec<u64> = (0..1u64 << k).collect();
    masks.sort_by_key(|&m| (m.count_ones(), local_order_key(m, k)));
    masks
}

/// Sorting key that orders same-size masks lexicographically by their sorted
/// bit positions.
fn local_order_key(mask: u64, k: usize) -> Vec<usize> {
    (0..k).filter(|b| mask >> b & 1 == 1).collect()
}

fn cover_max(table: &[Value], mask: u64) -> Value {
    let mut best = 0;
    let mut m = mask;
    while m != 0 {
        let low = m & m.wrapping_neg();
        best = best.max(table[(mask ^ low) as usize]);
        m ^= low;
    }
    best
}

fn complete_table(k: usize, explicit: &BTreeMap<u64, Value>) -> Vec<Value> {
    let mut table = vec![0; 1 << k];
    for mask in masks_by_size(k) {
        table[mask as usize] = match explicit.get(&mask) {
            Some(&v) => v,
            None => cover_max(&table, mask),
        };
    }
    table
}

fn local_to_edges(edges: &[EdgeId], mask: u64) -> Vec<EdgeId> {
    (0..edges.len())
        .filter(|b| mask >> b & 1 == 1)
        .map(|b| edges[b])
        .collect()
}

/// Random monotone tables: `v(∅) = 0` and, by increasing size, each set takes
/// the maximum over its covers plus a uniform increment in `0..=scale`.
pub fn make_seeded_monotone(
    inst: &MultigraphInstance,
    seed: u64,
    scale: Value,
) -> Result<ValuationProfile> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut vertices = Vec::with_capacity(inst.n());
    for v in 0..inst.n() {
        let edges = inst.relevant_real_edges(v);
        check_degree(v, edges.len(), TABLE_CAP)?;
        let k = edges.len();
        let mut table = vec![0; 1 << k];
        for mask in masks_by_size(k).into_iter().skip(1) {
            table[mask as usize] = cover_max(&table, mask) + rng.gen_range(0..=scale);
        }
        vertices.push(VertexValuation {
            edges,
            kind: Kind::Table(table),
            representation: Representation::SeededMonotone,
        });
    }
    Ok(ValuationProfile::assemble(inst, vertices))
}

/// Random additive weights in `0..=scale`.
pub fn make_seeded_additive(
    inst: &MultigraphInstance,
    seed: u64,
    scale: Value,
) -> Result<ValuationProfile> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ValuationProfile::additive_from_fn(inst, |_, _| rng.gen_range(0..=scale))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    NotNormalized {
        vertex: VertexId,
        value: Value,
    },
    NotMonotone {
        vertex: VertexId,
        subset: Vec<EdgeId>,
        superset: Vec<EdgeId>,
        subset_value: Value,
        superset_value: Value,
    },
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MonotoneAudit {
    pub violations: Vec<Violation>,
    /// Vertices whose degree exceeded the cap; only a sample of their sets was checked.
    pub sampled: Vec<VertexId>,
}

impl MonotoneAudit {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks normalization and monotonicity of every vertex.
///
/// Monotonicity is checked on covers (`T \ {e}` against `T`), which implies
/// it for all nested pairs. Vertices above `cap` are sampled.
pub fn audit_monotone(profile: &ValuationProfile, cap: usize) -> MonotoneAudit {
    let mut audit = MonotoneAudit::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for (v, vert) in profile.vertices.iter().enumerate() {
        let k = vert.edges.len();
        let empty = vert.value_mask(0);
        if empty != 0 {
            audit.violations.push(Violation::NotNormalized { vertex: v, value: empty });
        }
        let masks: Vec<u64> = if k <= cap {
            (1..1u64 << k).collect()
        } else {
            audit.sampled.push(v);
            let full = if k == 64 { u64::MAX } else { (1 << k) - 1 };
            (0..AUDIT_SAMPLES).map(|_| rng.gen::<u64>() & full).collect()
        };
        for mask in masks {
            let upper = vert.value_mask(mask);
            let mut m = mask;
            while m != 0 {
                let low = m & m.wrapping_neg();
                m ^= low;
                let lower = vert.value_mask(mask ^ low);
                if lower > upper {
                    audit.violations.push(Violation::NotMonotone {
                        vertex: v,
                        subset: local_to_edges(&vert.edges, mask ^ low),
                        superset: local_to_edges(&vert.edges, mask),
                        subset_value: lower,
                        superset_value: upper,
                    });
                }
            }
        }
    }
    audit
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::build_instance;

    fn three_edges() -> MultigraphInstance {
        // e0, e1 between 0 and 1; e2 between 1 and 2 (irrelevant to 0)
        build_instance(3, &[(0, 1), (0, 1), (1, 2), (1, 2)]).unwrap()
    }

    #[test]
    fn additive_ignores_irrelevant_edges() {
        let inst = three_edges();
        let p = ValuationProfile::additive_from_fn(&inst, |_, e| [5, 3, 7, 1][e]).unwrap();
        assert_eq!(p.value(0, &[0, 1, 2]).unwrap(), 8);
        assert_eq!(p.value(0, &[]).unwrap(), 0);
        assert!(matches!(p.value(9, &[]), Err(Error::UnknownVertex(9))));
    }

    #[test]
    fn subadditive_table_lookup() {
        let inst = build_instance(2, &[(0, 1), (0, 1)]).unwrap();
        let table = VertexSpec::Table(BTreeMap::from([
            (vec![0], 2),
            (vec![1], 2),
            (vec![0, 1], 3),
        ]));
        let p = ValuationProfile::from_specs(&inst, vec![table.clone(), table]).unwrap();
        assert_eq!(p.value(0, &[0, 1]).unwrap(), 3);
        assert_eq!(p.value(1, &[1]).unwrap(), 2);
    }

    #[test]
    fn missing_table_sets_take_cover_max() {
        let inst = build_instance(2, &[(0, 1), (0, 1), (0, 1)]).unwrap();
        let table = VertexSpec::Table(BTreeMap::from([(vec![1], 4), (vec![0, 2], 6)]));
        let zero = VertexSpec::Additive(BTreeMap::new());
        let p = ValuationProfile::from_specs(&inst, vec![table, zero]).unwrap();
        assert_eq!(p.value(0, &[0]).unwrap(), 0);
        assert_eq!(p.value(0, &[0, 1]).unwrap(), 4);
        assert_eq!(p.value(0, &[0, 1, 2]).unwrap(), 6);
        assert!(audit_monotone(&p, AUDIT_CAP).is_clean());
    }

    #[test]
    fn dummy_edges_are_worthless() {
        let inst = build_instance(2, &[(0, 1)]).unwrap();
        let p = ValuationProfile::additive_from_fn(&inst, |_, _| 9).unwrap();
        assert_eq!(p.value(0, &[1]).unwrap(), 0);
        assert_eq!(p.value(1, &[0, 1]).unwrap(), 9);
    }

    #[test]
    fn rejects_irrelevant_spec_edges() {
        let inst = three_edges();
        let bad = VertexSpec::Additive(BTreeMap::from([(2, 1)]));
        let zero = || VertexSpec::Additive(BTreeMap::new());
        let err = ValuationProfile::from_specs(&inst, vec![bad, zero(), zero()]).unwrap_err();
        assert!(matches!(err, Error::IrrelevantEdge { vertex: 0, edge: 2 }));
    }

    #[test]
    fn audit_flags_constructed_violation() {
        let inst = build_instance(2, &[(0, 1), (0, 1)]).unwrap();
        let table = VertexSpec::Table(BTreeMap::from([(vec![0], 5), (vec![0, 1], 4)]));
        let zero = VertexSpec::Additive(BTreeMap::new());
        let p = ValuationProfile::from_specs(&inst, vec![table, zero]).unwrap();
        let audit = audit_monotone(&p, AUDIT_CAP);
        assert_eq!(
            audit.violations,
            vec![Violation::NotMonotone {
                vertex: 0,
                subset: vec![0],
                superset: vec![0, 1],
                subset_value: 5,
                superset_value: 4,
            }]
        );
        assert!(audit.sampled.is_empty());
    }

    #[test]
    fn additive_audit_is_clean() {
        let inst = three_edges();
        let p = make_seeded_additive(&inst, 5, 10).unwrap();
        assert!(audit_monotone(&p, AUDIT_CAP).is_clean());
    }

    #[test]
    fn seeded_monotone_is_monotone_and_deterministic() {
        let inst = build_instance(4, &[(0, 1), (0, 1), (1, 2), (1, 2), (1, 2), (2, 3), (3, 0)])
            .unwrap();
        let p = make_seeded_monotone(&inst, 11, 20).unwrap();
        assert!(audit_monotone(&p, AUDIT_CAP).is_clean());
        assert_eq!(p, make_seeded_monotone(&inst, 11, 20).unwrap());
        assert_eq!(p.representation(1), Representation::SeededMonotone);
    }

    #[test]
    fn zero_scale_gives_zero_values() {
        let inst = three_edges();
        let p = make_seeded_monotone(&inst, 3, 0).unwrap();
        for v in 0..3 {
            assert_eq!(p.value(v, &[0, 1, 2, 3]).unwrap(), 0);
        }
    }

    #[test]
    fn table_degree_cap() {
        let raw = vec![(0, 1); TABLE_CAP + 1];
        let inst = build_instance(2, &raw).unwrap();
        let err = make_seeded_monotone(&inst, 0, 1).unwrap_err();
        assert!(matches!(err, Error::DegreeAboveCap { degree: 17, cap: 16, .. }));
    }

    #[test]
    fn large_degree_audit_is_sampled() {
        let raw = vec![(0, 1); 20];
        let inst = build_instance(2, &raw).unwrap();
        let p = make_seeded_additive(&inst, 1, 3).unwrap();
        let audit = audit_monotone(&p, AUDIT_CAP);
        assert!(audit.is_clean());
        assert_eq!(audit.sampled, vec![0, 1]);
    }
}
