//! The graph `H(G)` linking vertices to their two favorite bundles, and its
//! maximum-weight vertex-perfect matching.
//!
//! Every vertex node has degree 2 and every bundle node degree at most 2, so
//! each component is a path or a cycle and is solved by a linear sweep.

use std::collections::BTreeSet;

use crate::cuts::{BundleId, BundleTable};
use crate::error::{Error, Result};
use crate::instance::{MultigraphInstance, VertexId};
use crate::valuation::ValuationProfile;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HGraph {
    /// Per vertex: favorite bundle (weight 1) and runner-up (weight 0).
    pub choices: Vec<Option<[BundleId; 2]>>,
    /// Per bundle: vertices linking to it, ascending.
    pub links: Vec<Vec<VertexId>>,
}

impl HGraph {
    pub fn weight(&self, v: VertexId, b: BundleId) -> usize {
        match self.choices[v] {
            Some([top, _]) if top == b => 1,
            _ => 0,
        }
    }

    /// Vertices on the matched side.
    pub fn side_a(&self) -> impl Iterator<Item = VertexId> + '_ {
        (0..self.choices.len()).filter(|&v| self.choices[v].is_some())
    }
}

pub fn build_h(profile: &ValuationProfile, inst: &MultigraphInstance, table: &BundleTable) -> Result<HGraph> {
    let mut choices = vec![None; inst.n()];
    let mut links = vec![Vec::new(); table.len()];
    for v in inst.active_vertices() {
        let ranking = table.ranking(profile, v);
        match ranking.as_slice() {
            [] => {}
            [_] => return Err(Error::breach(format!("vertex {v} has a single bundle in its family"))),
            [top, second, ..] => {
                choices[v] = Some([*top, *second]);
                links[*top].push(v);
                links[*second].push(v);
            }
        }
    }
    if let Some(b) = links.iter().position(|l| l.len() > 2) {
        return Err(Error::breach(format!("bundle {b} is linked to {} vertices", links[b].len())));
    }
    Ok(HGraph { choices, links })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ComponentShape {
    Path,
    Cycle,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Matching {
    pub assignment: Vec<Option<BundleId>>,
    pub weight: usize,
    /// Number of vertices on the matched side.
    pub side_a: usize,
    pub components: Vec<ComponentShape>,
}

/// Bundles `b_0..` and vertices `a_1..` of one component in walk order;
/// `a_t` sits between `b_{t-1}` and `b_t` (indices modulo the length on a cycle).
struct Walk {
    bundles: Vec<BundleId>,
    vertices: Vec<VertexId>,
    shape: ComponentShape,
}

fn other_choice(h: &HGraph, v: VertexId, b: BundleId) -> BundleId {
    let [x, y] = h.choices[v].expect("walked vertex is on side A");
    if x == b {
        y
    } else {
        x
    }
}

fn component_bundles(h: &HGraph, start: VertexId, seen: &mut [bool]) -> BTreeSet<BundleId> {
    let mut bundles = BTreeSet::new();
    let mut stack = vec![start];
    seen[start] = true;
    while let Some(v) = stack.pop() {
        for b in h.choices[v].expect("side A") {
            if bundles.insert(b) {
                for &w in &h.links[b] {
                    if !seen[w] {
                        seen[w] = true;
                        stack.push(w);
                    }
                }
            }
        }
    }
    bundles
}

fn walk(h: &HGraph, bundles: &BTreeSet<BundleId>) -> Walk {
    let end = bundles.iter().copied().find(|&b| h.links[b].len() == 1);
    let shape = if end.is_some() {
        ComponentShape::Path
    } else {
        ComponentShape::Cycle
    };
    let start = end.unwrap_or_else(|| *bundles.first().expect("component has bundles"));
    let mut out = Walk {
        bundles: vec![start],
        vertices: Vec::new(),
        shape,
    };
    let (mut cur, mut prev) = (start, None);
    while let Some(&a) = h.links[cur].iter().find(|&&a| Some(a) != prev) {
        out.vertices.push(a);
        let next = other_choice(h, a, cur);
        if shape == ComponentShape::Cycle && next == start {
            break;
        }
        out.bundles.push(next);
        cur = next;
        prev = Some(a);
    }
    out
}

/// Maximum-weight matching covering every side-A vertex. Ties go to the
/// leftmost free bundle on a path and to the backward orientation on a cycle.
pub fn max_weight_a_perfect_matching(h: &HGraph) -> Result<Matching> {
    let n = h.choices.len();
    let mut assignment = vec![None; n];
    let mut seen = vec![false; n];
    let mut components = Vec::new();
    let mut weight = 0;
    for v in h.side_a() {
        if seen[v] {
            continue;
        }
        let bundles = component_bundles(h, v, &mut seen);
        let w = walk(h, &bundles);
        let k = w.vertices.len();
        let left = |t: usize| w.bundles[t];
        let right = |t: usize| w.bundles[(t + 1) % w.bundles.len()];
        // vertex index t (0-based) lies between left(t) and right(t)
        let use_left: Box<dyn Fn(usize) -> bool> = match w.shape {
            ComponentShape::Path => {
                if w.bundles.len() != k + 1 {
                    return Err(Error::breach("path component of H is unbalanced"));
                }
                let score = |s: usize| -> usize {
                    (0..k)
                        .map(|t| if t < s { h.weight(w.vertices[t], left(t)) } else { h.weight(w.vertices[t], right(t)) })
                        .sum()
                };
                let best = (0..=k).max_by(|&a, &b| score(a).cmp(&score(b)).then(b.cmp(&a))).unwrap();
                Box::new(move |t| t < best)
            }
            ComponentShape::Cycle => {
                if w.bundles.len() != k {
                    return Err(Error::breach("cycle component of H is unbalanced"));
                }
                let back: usize = (0..k).map(|t| h.weight(w.vertices[t], left(t))).sum();
                let fwd: usize = (0..k).map(|t| h.weight(w.vertices[t], right(t))).sum();
                Box::new(move |_| back >= fwd)
            }
        };
        for t in 0..k {
            let b = if use_left(t) { left(t) } else { right(t) };
            weight += h.weight(w.vertices[t], b);
            assignment[w.vertices[t]] = Some(b);
        }
        components.push(w.shape);
    }
    let side_a = h.side_a().count();
    let mut used = BTreeSet::new();
    for v in h.side_a() {
        let b = assignment[v].ok_or_else(|| Error::breach(format!("vertex {v} is unmatched in H")))?;
        if !used.insert(b) {
            return Err(Error::breach(format!("bundle {b} matched twice in H")));
        }
    }
    Ok(Matching {
        assignment,
        weight,
        side_a,
        components,
    })
}
