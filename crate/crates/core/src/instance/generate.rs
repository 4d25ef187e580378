//! Seeded instance generators, one per regime family.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{build_instance, detect_regimes, neighbor_bound, MultigraphInstance, Regime, VertexId};
use crate::error::{Error, Result};

const MAX_ATTEMPTS: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Family {
    Bipartite,
    Bounded,
    Girth6,
}

impl Family {
    pub fn regime(&self) -> Regime {
        match self {
            Family::Bipartite => Regime::Bipartite,
            Family::Bounded => Regime::BoundedNeighbors,
            Family::Girth6 => Regime::Girth6,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Family::Bipartite => "bipartite",
            Family::Bounded => "bounded",
            Family::Girth6 => "girth6",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "bipartite" => Ok(Family::Bipartite),
            "bounded" => Ok(Family::Bounded),
            "girth6" => Ok(Family::Girth6),
            other => Err(format!("unknown family `{other}`")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GenParams {
    pub n: usize,
    /// Largest number of parallel edges per pair.
    pub max_mult: usize,
    /// Bounded family only: neighbor cap; defaults to the regime bound.
    pub neighbors: Option<usize>,
    /// Chance, in percent, that an admissible pair receives edges.
    pub edge_percent: u32,
    /// Cap on the number of real edges.
    pub max_edges: Option<usize>,
}

impl GenParams {
    pub fn new(n: usize, max_mult: usize) -> Self {
        GenParams {
            n,
            max_mult,
            neighbors: None,
            edge_percent: 60,
            max_edges: None,
        }
    }

    fn check(&self) -> Result<()> {
        if self.max_mult == 0 {
            return Err(Error::InfeasibleParams("multiplicity must be at least 1".into()));
        }
        if self.edge_percent > 100 {
            return Err(Error::InfeasibleParams("edge percentage above 100".into()));
        }
        Ok(())
    }
}

/// Generates an instance of `family`, deterministic in `seed`.
///
/// The result is checked with [`detect_regimes`]; candidates outside the
/// family are discarded and redrawn from the same random stream.
pub fn generate(family: Family, params: &GenParams, seed: u64) -> Result<MultigraphInstance> {
    params.check()?;
    let degree_cap = match family {
        Family::Bounded => {
            let bound = neighbor_bound(params.n, params.max_mult);
            let wanted = params.neighbors.unwrap_or(bound.max(0) as usize);
            if wanted as i64 > bound {
                let rule = if params.max_mult <= 2 {
                    "floor(n/4)"
                } else {
                    "ceil(n/4)-1"
                };
                return Err(Error::InfeasibleParams(format!(
                    "{wanted} neighbors exceeds the bound {rule} = {bound} for n = {}",
                    params.n
                )));
            }
            Some(wanted)
        }
        _ => None,
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MAX_ATTEMPTS {
        let raw = match family {
            Family::Bipartite => draw_bipartite(params, &mut rng),
            Family::Bounded => draw_bounded(params, degree_cap.unwrap(), &mut rng),
            Family::Girth6 => draw_girth6(params, &mut rng),
        };
        let inst = build_instance(params.n, &raw)?;
        if detect_regimes(&inst).applies(family.regime()) {
            return Ok(inst);
        }
    }
    Err(Error::InfeasibleParams(format!(
        "no {family} instance found after {MAX_ATTEMPTS} draws"
    )))
}

struct EdgeBudget {
    left: usize,
}

impl EdgeBudget {
    fn new(params: &GenParams) -> Self {
        EdgeBudget {
            left: params.max_edges.unwrap_or(usize::MAX),
        }
    }

    fn take(&mut self, want: usize, min: usize) -> Option<usize> {
        if self.left < min {
            return None;
        }
        let got = want.min(self.left);
        self.left -= got;
        Some(got)
    }
}

fn push_pair(raw: &mut Vec<(VertexId, VertexId)>, a: VertexId, b: VertexId, mult: usize) {
    raw.extend(std::iter::repeat_n((a, b), mult));
}

fn all_pairs(n: usize) -> Vec<(VertexId, VertexId)> {
    (0..n)
        .flat_map(|a| (a + 1..n).map(move |b| (a, b)))
        .collect()
}

fn draw_bipartite(params: &GenParams, rng: &mut ChaCha8Rng) -> Vec<(VertexId, VertexId)> {
    let n = params.n;
    let mut side: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.5)).collect();
    if n >= 2 && side.iter().all(|&s| s == side[0]) {
        let flip = rng.gen_range(0..n);
        side[flip] = !side[flip];
    }
    let mut pairs: Vec<_> = all_pairs(n)
        .into_iter()
        .filter(|&(a, b)| side[a] != side[b])
        .collect();
    pairs.shuffle(rng);
    let mut budget = EdgeBudget::new(params);
    let mut raw = Vec::new();
    for (a, b) in pairs {
        if rng.gen_range(0..100) >= params.edge_percent {
            continue;
        }
        let want = rng.gen_range(1..=params.max_mult);
        let Some(mult) = budget.take(want, 1) else { break };
        push_pair(&mut raw, a, b, mult);
    }
    raw
}

fn draw_bounded(params: &GenParams, cap: usize, rng: &mut ChaCha8Rng) -> Vec<(VertexId, VertexId)> {
    let n = params.n;
    let mut pairs = all_pairs(n);
    pairs.shuffle(rng);
    let mut degree = vec![0usize; n];
    let mut budget = EdgeBudget::new(params);
    let min_mult = params.max_mult.min(2);
    let mut raw = Vec::new();
    for (a, b) in pairs {
        if degree[a] >= cap || degree[b] >= cap {
            continue;
        }
        if rng.gen_range(0..100) >= params.edge_percent {
            continue;
        }
        let want = rng.gen_range(min_mult..=params.max_mult);
        let Some(mult) = budget.take(want, min_mult) else { break };
        degree[a] += 1;
        degree[b] += 1;
        push_pair(&mut raw, a, b, mult);
    }
    raw
}

fn draw_girth6(params: &GenParams, rng: &mut ChaCha8Rng) -> Vec<(VertexId, VertexId)> {
    let n = params.n;
    let mut adjacency: Vec<Vec<VertexId>> = vec![Vec::new(); n];
    let mut budget = EdgeBudget::new(params);
    let mut raw = Vec::new();

    let cycle_cap = params.max_edges.unwrap_or(usize::MAX).min(n);
    if cycle_cap >= 6 {
        let len = rng.gen_range(6..=cycle_cap);
        let mut order: Vec<VertexId> = (0..n).collect();
        order.shuffle(rng);
        for k in 0..len {
            let (a, b) = (order[k], order[(k + 1) % len]);
            let reserve = len - k - 1;
            let want = rng.gen_range(1..=params.max_mult);
            let allowed = want.min(budget.left.saturating_sub(reserve)).max(1);
            let mult = budget.take(allowed, 1).expect("cycle fits the edge budget");
            adjacency[a].push(b);
            adjacency[b].push(a);
            push_pair(&mut raw, a.min(b), a.max(b), mult);
        }
    }

    let mut pairs = all_pairs(n);
    pairs.shuffle(rng);
    for (a, b) in pairs {
        if adjacency[a].contains(&b) || rng.gen_range(0..100) >= params.edge_percent {
            continue;
        }
        if distance(&adjacency, a, b).is_some_and(|d| d < 5) {
            continue;
        }
        let want = rng.gen_range(1..=params.max_mult);
        let Some(mult) = budget.take(want, 1) else { break };
        adjacency[a].push(b);
        adjacency[b].push(a);
        push_pair(&mut raw, a, b, mult);
    }
    raw
}

fn distance(adjacency: &[Vec<VertexId>], from: VertexId, to: VertexId) -> Option<usize> {
    let mut dist = vec![usize::MAX; adjacency.len()];
    dist[from] = 0;
    let mut queue = VecDeque::from([from]);
    while let Some(u) = queue.pop_front() {
        if u == to {
            return Some(dist[u]);
        }
        for &w in &adjacency[u] {
            if dist[w] == usize::MAX {
                dist[w] = dist[u] + 1;
                queue.push_back(w);
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bipartite_example() {
        let inst = generate(Family::Bipartite, &GenParams::new(4, 3), 7).unwrap();
        assert!(detect_regimes(&inst).is_bipartite);
    }

    #[test]
    fn girth6_cycle_example() {
        let inst = generate(Family::Girth6, &GenParams::new(6, 2), 1).unwrap();
        assert_eq!(detect_regimes(&inst).simple_girth, Some(6));
    }

    #[test]
    fn bounded_example() {
        let mut params = GenParams::new(8, 3);
        params.neighbors = Some(1);
        let inst = generate(Family::Bounded, &params, 3).unwrap();
        assert!(detect_regimes(&inst).max_neighbors <= 1);
    }

    #[test]
    fn bounded_rejects_excess_neighbors() {
        let mut params = GenParams::new(3, 3);
        params.neighbors = Some(2);
        let err = generate(Family::Bounded, &params, 0).unwrap_err();
        assert!(matches!(err, Error::InfeasibleParams(ref m) if m.contains("= 0")), "{err}");
    }

    #[test]
    fn deterministic_in_seed() {
        let params = GenParams::new(7, 3);
        for family in [Family::Bipartite, Family::Bounded, Family::Girth6] {
            let a = generate(family, &params, 42).unwrap();
            let b = generate(family, &params, 42).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn edge_budget_is_respected() {
        let mut params = GenParams::new(8, 4);
        params.max_edges = Some(14);
        params.edge_percent = 100;
        for seed in 0..50 {
            for family in [Family::Bipartite, Family::Bounded, Family::Girth6] {
                let inst = generate(family, &params, seed).unwrap();
                assert!(inst.real_edge_count() <= 14);
            }
        }
    }
}
