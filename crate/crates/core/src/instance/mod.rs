//! Multigraph data model.
//!
//! Agents are vertices and goods are edges. Every edge is relevant to exactly
//! its two endpoints. Edges sharing the same endpoints form a *pair class*.
//!
//! Construction performs the two normalizations the solver relies on:
//!
//! * vertices of degree one are peeled off (repeatedly, in ascending id
//!   order) and handed their single remaining good up front;
//! * every pair class with a single real edge receives a zero-valued dummy
//!   edge, so that each class can be split into two nonempty bundles.

mod format;
mod generate;
mod regime;

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};

pub use format::{parse_instance, serialize_instance};
pub use generate::{generate, Family, GenParams};
pub use regime::{detect_regimes, neighbor_bound, Regime, RegimeReport};

pub type VertexId = usize;
pub type EdgeId = usize;

/// Unordered vertex pair, stored with `lo < hi`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Pair {
    pub lo: VertexId,
    pub hi: VertexId,
}

impl Pair {
    pub fn new(a: VertexId, b: VertexId) -> Self {
        debug_assert_ne!(a, b);
        if a < b {
            Pair { lo: a, hi: b }
        } else {
            Pair { lo: b, hi: a }
        }
    }

    pub fn contains(&self, v: VertexId) -> bool {
        self.lo == v || self.hi == v
    }

    /// The endpoint that is not `v`.
    pub fn other(&self, v: VertexId) -> VertexId {
        if v == self.lo {
            self.hi
        } else {
            debug_assert_eq!(v, self.hi);
            self.lo
        }
    }
}

impl fmt::Display for Pair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.lo, self.hi)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Edge {
    pub id: EdgeId,
    pub a: VertexId,
    pub b: VertexId,
    pub is_dummy: bool,
}

impl Edge {
    pub fn pair(&self) -> Pair {
        Pair::new(self.a, self.b)
    }

    pub fn touches(&self, v: VertexId) -> bool {
        self.a == v || self.b == v
    }
}

/// Immutable multigraph instance.
///
/// Real edges occupy ids `0..real_edge_count()` in input order; dummy edges
/// follow. `pair_classes` covers every edge of the full graph. The
/// *pipeline view* (`pipeline_pairs`, `neighbors`, `is_active`) excludes
/// vertices peeled off by the degree-one reduction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MultigraphInstance {
    n: usize,
    edges: Vec<Edge>,
    real_count: usize,
    pair_classes: BTreeMap<Pair, Vec<EdgeId>>,
    preallocation: Vec<(VertexId, EdgeId)>,
    active: Vec<bool>,
}

/// Builds an instance from raw endpoint pairs.
pub fn build_instance(n: usize, raw_edges: &[(VertexId, VertexId)]) -> Result<MultigraphInstance> {
    let mut edges = Vec::with_capacity(raw_edges.len());
    for (index, &(a, b)) in raw_edges.iter().enumerate() {
        for v in [a, b] {
            if v >= n {
                return Err(Error::EndpointOutOfRange { index, vertex: v, n });
            }
        }
        if a == b {
            return Err(Error::SelfLoop { index });
        }
        edges.push(Edge {
            id: index,
            a,
            b,
            is_dummy: false,
        });
    }
    let real_count = edges.len();

    let mut pair_classes: BTreeMap<Pair, Vec<EdgeId>> = BTreeMap::new();
    for e in &edges {
        pair_classes.entry(e.pair()).or_default().push(e.id);
    }
    for (pair, class) in pair_classes.iter_mut() {
        if class.len() == 1 {
            let id = edges.len();
            edges.push(Edge {
                id,
                a: pair.lo,
                b: pair.hi,
                is_dummy: true,
            });
            class.push(id);
        }
    }

    let (preallocation, active) = peel_degree_one(n, &pair_classes, &edges);

    Ok(MultigraphInstance {
        n,
        edges,
        real_count,
        pair_classes,
        preallocation,
        active,
    })
}

fn peel_degree_one(
    n: usize,
    classes: &BTreeMap<Pair, Vec<EdgeId>>,
    edges: &[Edge],
) -> (Vec<(VertexId, EdgeId)>, Vec<bool>) {
    let mut active = vec![true; n];
    let mut plan = Vec::new();
    loop {
        let mut degree = vec![0usize; n];
        let mut last_edge = vec![None; n];
        for (pair, class) in classes {
            if !(active[pair.lo] && active[pair.hi]) {
                continue;
            }
            for &e in class {
                if edges[e].is_dummy {
                    continue;
                }
                for v in [pair.lo, pair.hi] {
                    degree[v] += 1;
                    last_edge[v] = Some(e);
                }
            }
        }
        let Some(v) = (0..n).find(|&v| active[v] && degree[v] == 1) else {
            break;
        };
        plan.push((v, last_edge[v].expect("degree one implies an edge")));
        active[v] = false;
    }
    (plan, active)
}

impl MultigraphInstance {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, id: EdgeId) -> &Edge {
        &self.edges[id]
    }

    pub fn real_edge_count(&self) -> usize {
        self.real_count
    }

    pub fn is_dummy(&self, id: EdgeId) -> bool {
        self.edges[id].is_dummy
    }

    /// Original endpoint pairs of the real edges, in id order.
    pub fn raw_edges(&self) -> Vec<(VertexId, VertexId)> {
        self.edges[..self.real_count]
            .iter()
            .map(|e| (e.a, e.b))
            .collect()
    }

    pub fn pair_classes(&self) -> &BTreeMap<Pair, Vec<EdgeId>> {
        &self.pair_classes
    }

    pub fn pair_class(&self, pair: Pair) -> Option<&[EdgeId]> {
        self.pair_classes.get(&pair).map(Vec::as_slice)
    }

    /// Degree-one reductions, in the order they were applied.
    pub fn preallocation(&self) -> &[(VertexId, EdgeId)] {
        &self.preallocation
    }

    pub fn is_active(&self, v: VertexId) -> bool {
        self.active[v]
    }

    pub fn active_vertices(&self) -> impl Iterator<Item = VertexId> + '_ {
        (0..self.n).filter(|&v| self.active[v])
    }

    pub fn active_count(&self) -> usize {
        self.active.iter().filter(|&&a| a).count()
    }

    /// Pair classes between two active vertices.
    pub fn pipeline_pairs(&self) -> impl Iterator<Item = (Pair, &[EdgeId])> + '_ {
        self.pair_classes
            .iter()
            .filter(|(p, _)| self.active[p.lo] && self.active[p.hi])
            .map(|(p, c)| (*p, c.as_slice()))
    }

    /// Neighbors of `v` in the pipeline view, ascending.
    pub fn neighbors(&self, v: VertexId) -> Vec<VertexId> {
        if !self.active[v] {
            return Vec::new();
        }
        let mut out: Vec<VertexId> = self
            .pipeline_pairs()
            .filter(|(p, _)| p.contains(v))
            .map(|(p, _)| p.other(v))
            .collect();
        out.sort_unstable();
        out
    }

    pub fn are_adjacent(&self, a: VertexId, b: VertexId) -> bool {
        a != b
            && self.active[a]
            && self.active[b]
            && self.pair_classes.contains_key(&Pair::new(a, b))
    }

    /// Real edges adjacent to `v` in the full graph, ascending.
    pub fn relevant_real_edges(&self, v: VertexId) -> Vec<EdgeId> {
        self.edges[..self.real_count]
            .iter()
            .filter(|e| e.touches(v))
            .map(|e| e.id)
            .collect()
    }

    /// Number of real edges in the largest pipeline pair class.
    pub fn max_real_multiplicity(&self) -> usize {
        self.pipeline_pairs()
            .map(|(_, c)| c.iter().filter(|&&e| !self.is_dummy(e)).count())
            .max()
            .unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_edge_gets_dummy() {
        let inst = build_instance(2, &[(0, 1)]).unwrap();
        let classes = inst.pair_classes();
        assert_eq!(classes.len(), 1);
        let class = &classes[&Pair::new(0, 1)];
        assert_eq!(class, &vec![0, 1]);
        assert!(!inst.is_dummy(0));
        assert!(inst.is_dummy(1));
        // both endpoints have degree one; the lower id is peeled first
        assert_eq!(inst.preallocation(), &[(0, 0)]);
        assert!(inst.is_active(1));
        assert_eq!(inst.pipeline_pairs().count(), 0);
    }

    #[test]
    fn doubled_path_has_no_dummies() {
        let inst = build_instance(3, &[(0, 1), (0, 1), (1, 2), (1, 2)]).unwrap();
        assert_eq!(inst.pair_classes().len(), 2);
        assert!(inst.pair_classes().values().all(|c| c.len() == 2));
        assert_eq!(inst.edges().len(), 4);
        assert!(inst.preallocation().is_empty());
    }

    #[test]
    fn self_loop_is_rejected() {
        let err = build_instance(2, &[(0, 0)]).unwrap_err();
        assert!(matches!(err, Error::SelfLoop { index: 0 }));
    }

    #[test]
    fn out_of_range_is_rejected() {
        let err = build_instance(2, &[(0, 1), (1, 5)]).unwrap_err();
        assert!(matches!(
            err,
            Error::EndpointOutOfRange {
                index: 1,
                vertex: 5,
                n: 2
            }
        ));
    }

    #[test]
    fn peeling_cascades_along_a_path() {
        // 0 - 1 - 2=3 (double edge between 2 and 3)
        let inst = build_instance(4, &[(0, 1), (1, 2), (2, 3), (2, 3)]).unwrap();
        assert_eq!(inst.preallocation(), &[(0, 0), (1, 1)]);
        assert!(!inst.is_active(0));
        assert!(!inst.is_active(1));
        assert_eq!(inst.neighbors(2), vec![3]);
        let pairs: Vec<Pair> = inst.pipeline_pairs().map(|(p, _)| p).collect();
        assert_eq!(pairs, vec![Pair::new(2, 3)]);
    }

    #[test]
    fn pair_classes_partition_edges() {
        let inst = build_instance(4, &[(0, 1), (1, 2), (2, 0), (0, 1), (3, 2)]).unwrap();
        let mut seen: Vec<EdgeId> = inst.pair_classes().values().flatten().copied().collect();
        seen.sort_unstable();
        assert_eq!(seen, (0..inst.edges().len()).collect::<Vec<_>>());
    }
}
