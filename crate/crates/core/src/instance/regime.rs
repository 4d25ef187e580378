use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use super::{MultigraphInstance, VertexId};

/// Structural regime under which a complete EFX allocation is constructed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Regime {
    Bipartite,
    Girth6,
    BoundedNeighbors,
}

impl Regime {
    /// Priority order used when several regimes apply.
    pub const PRIORITY: [Regime; 3] = [Regime::Bipartite, Regime::Girth6, Regime::BoundedNeighbors];

    pub fn name(&self) -> &'static str {
        match self {
            Regime::Bipartite => "bipartite",
            Regime::Girth6 => "girth6",
            Regime::BoundedNeighbors => "bounded",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Regime {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "bipartite" => Ok(Regime::Bipartite),
            "girth6" => Ok(Regime::Girth6),
            "bounded" => Ok(Regime::BoundedNeighbors),
            other => Err(format!("unknown regime `{other}`")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RegimeReport {
    pub is_bipartite: bool,
    /// Side (0 or 1) per vertex when bipartite; inactive vertices get side 0.
    pub coloring: Option<Vec<u8>>,
    pub max_neighbors: usize,
    /// Largest admissible neighbor count; negative when no vertex may have a neighbor.
    pub neighbor_bound: i64,
    pub neighbor_bound_ok: bool,
    /// Shortest cycle of the simple projection; `None` for a forest.
    pub simple_girth: Option<usize>,
    pub girth_ok: bool,
    pub applicable: Vec<Regime>,
}

impl RegimeReport {
    pub fn applies(&self, regime: Regime) -> bool {
        self.applicable.contains(&regime)
    }

    /// Highest-priority applicable regime.
    pub fn preferred(&self) -> Option<Regime> {
        Regime::PRIORITY.into_iter().find(|r| self.applies(*r))
    }

    pub fn failure_reason(&self, regime: Regime) -> String {
        match regime {
            Regime::Bipartite => "the simple projection contains an odd cycle".to_string(),
            Regime::Girth6 => format!(
                "simple girth {} is below 6",
                self.simple_girth.map_or("inf".to_string(), |g| g.to_string())
            ),
            Regime::BoundedNeighbors => format!(
                "a vertex has {} neighbors, above the bound {}",
                self.max_neighbors, self.neighbor_bound
            ),
        }
    }

    pub fn summary(&self) -> String {
        Regime::PRIORITY
            .iter()
            .map(|r| format!("{r}: {}", self.failure_reason(*r)))
            .collect::<Vec<_>>()
            .join("; ")
    }
}

/// Neighbor bound for `n` active vertices: `floor(n/4)` when no pair carries
/// more than two real edges, `ceil(n/4) - 1` otherwise.
pub fn neighbor_bound(n: usize, max_real_multiplicity: usize) -> i64 {
    let n = n as i64;
    if max_real_multiplicity <= 2 {
        n / 4
    } else {
        (n + 3) / 4 - 1
    }
}

pub fn detect_regimes(inst: &MultigraphInstance) -> RegimeReport {
    let n = inst.n();
    let adjacency: Vec<Vec<VertexId>> = (0..n).map(|v| inst.neighbors(v)).collect();

    let coloring = two_color(&adjacency);
    let is_bipartite = coloring.is_some();

    let max_neighbors = adjacency.iter().map(Vec::len).max().unwrap_or(0);
    let bound = neighbor_bound(inst.active_count(), inst.max_real_multiplicity());
    let neighbor_bound_ok = (max_neighbors as i64) <= bound;

    let simple_girth = shortest_cycle(&adjacency);
    let girth_ok = simple_girth.is_none_or(|g| g >= 6);

    let mut applicable = Vec::new();
    if is_bipartite {
        applicable.push(Regime::Bipartite);
    }
    if girth_ok {
        applicable.push(Regime::Girth6);
    }
    if neighbor_bound_ok {
        applicable.push(Regime::BoundedNeighbors);
    }

    RegimeReport {
        is_bipartite,
        coloring,
        max_neighbors,
        neighbor_bound: bound,
        neighbor_bound_ok,
        simple_girth,
        girth_ok,
        applicable,
    }
}

fn two_color(adjacency: &[Vec<VertexId>]) -> Option<Vec<u8>> {
    let n = adjacency.len();
    let mut color: Vec<Option<u8>> = vec![None; n];
    for root in 0..n {
        if color[root].is_some() {
            continue;
        }
        color[root] = Some(0);
        let mut queue = VecDeque::from([root]);
        while let Some(u) = queue.pop_front() {
            let cu = color[u].unwrap();
            for &w in &adjacency[u] {
                match color[w] {
                    None => {
                        color[w] = Some(1 - cu);
                        queue.push_back(w);
                    }
                    Some(cw) if cw == cu => return None,
                    Some(_) => {}
                }
            }
        }
    }
    Some(color.into_iter().map(|c| c.unwrap_or(0)).collect())
}

/// Girth of a simple graph by BFS from every root.
pub(crate) fn shortest_cycle(adjacency: &[Vec<VertexId>]) -> Option<usize> {
    let n = adjacency.len();
    let mut best: Option<usize> = None;
    for root in 0..n {
        let mut dist = vec![usize::MAX; n];
        let mut parent = vec![usize::MAX; n];
        dist[root] = 0;
        let mut queue = VecDeque::from([root]);
        while let Some(u) = queue.pop_front() {
            for &w in &adjacency[u] {
                if dist[w] == usize::MAX {
                    dist[w] = dist[u] + 1;
                    parent[w] = u;
                    queue.push_back(w);
                } else if parent[u] != w {
                    let len = dist[u] + dist[w] + 1;
                    best = Some(best.map_or(len, |b| b.min(len)));
                }
            }
        }
    }
    best
}
