//! Port-labeled graphs: representation, validation, BFS metrics, and the
//! benchmark/adversarial generator families.
//!
//! A port-labeled graph is a simple connected undirected graph whose vertices
//! are labeled 1..n and where the edges incident to a vertex of degree d carry
//! local port numbers 1..d, with no correlation between the two endpoints of
//! an edge. Ports are the only navigation interface available to agents that
//! do not know the topology.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors from graph construction, validation and parsing.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("self-loop at vertex {vertex}")]
    SelfLoop { vertex: usize },
    #[error("duplicate edge between {u} and {v}")]
    DuplicateEdge { u: usize, v: usize },
    #[error("edge {u}->{v} has no reverse entry at {v}")]
    AsymmetricEdge { u: usize, v: usize },
    #[error("ports at vertex {vertex} are not a permutation of 1..=deg")]
    BadPortPermutation { vertex: usize },
    #[error("vertex {vertex} out of range 1..={n}")]
    InvalidVertex { vertex: usize, n: usize },
    #[error("vertex {vertex} not reachable from vertex 1")]
    DisconnectedGraph { vertex: usize },
    #[error("bad family parameters: {0}")]
    BadParameters(String),
    #[error("malformed graph file: {0}")]
    Format(String),
}

/// Simple connected undirected graph with per-vertex port labels.
///
/// Vertices are 1-based; `adj[v][p-1]` is the neighbor reached from `v`
/// through port `p`. Storing neighbors positionally makes "ports are exactly
/// {1..deg(v)}" hold by construction. Index 0 of `adj` is unused padding.
///
/// Immutable after construction; safe to share across concurrent readers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PortLabeledGraph {
    n: usize,
    m: usize,
    adj: Vec<Vec<usize>>,
}

impl PortLabeledGraph {
    /// Builds a graph from an undirected edge list, inferring n as the
    /// largest vertex id. Ports are assigned in ascending neighbor-id order.
    pub fn from_edges(edges: &[(usize, usize)]) -> Result<Self, GraphError> {
        let n = edges
            .iter()
            .map(|&(u, v)| u.max(v))
            .max()
            .ok_or_else(|| GraphError::BadParameters("empty edge list".into()))?;
        Self::from_edges_with_n(n, edges)
    }

    /// Like [`from_edges`](Self::from_edges) with an explicit vertex count,
    /// which also admits the single-vertex graph.
    pub fn from_edges_with_n(n: usize, edges: &[(usize, usize)]) -> Result<Self, GraphError> {
        if n == 0 {
            return Err(GraphError::BadParameters("n must be >= 1".into()));
        }
        let mut lists: Vec<Vec<usize>> = vec![Vec::new(); n + 1];
        let mut seen: BTreeSet<(usize, usize)> = BTreeSet::new();
        for &(u, v) in edges {
            for &w in &[u, v] {
                if w < 1 || w > n {
                    return Err(GraphError::InvalidVertex { vertex: w, n });
                }
            }
            if u == v {
                return Err(GraphError::SelfLoop { vertex: u });
            }
            let key = (u.min(v), u.max(v));
            if !seen.insert(key) {
                return Err(GraphError::DuplicateEdge { u: key.0, v: key.1 });
            }
            lists[u].push(v);
            lists[v].push(u);
        }
        for list in &mut lists {
            list.sort_unstable();
        }
        Self::from_neighbor_lists(n, lists)
    }

    /// Builds a graph from explicit per-vertex `(port, neighbor)` pairs.
    /// Ports at each vertex must be exactly 1..=deg with no repeats.
    pub fn from_adjacency(
        n: usize,
        ports: &BTreeMap<usize, Vec<(usize, usize)>>,
    ) -> Result<Self, GraphError> {
        if n == 0 {
            return Err(GraphError::BadParameters("n must be >= 1".into()));
        }
        for &v in ports.keys() {
            if v < 1 || v > n {
                return Err(GraphError::InvalidVertex { vertex: v, n });
            }
        }
        let mut lists: Vec<Vec<usize>> = vec![Vec::new(); n + 1];
        for (&v, entries) in ports {
            let deg = entries.len();
            let mut by_port = vec![0usize; deg];
            let mut seen_ports = vec![false; deg];
            for &(port, to) in entries {
                if port < 1 || port > deg || seen_ports[port - 1] {
                    return Err(GraphError::BadPortPermutation { vertex: v });
                }
                seen_ports[port - 1] = true;
                if to < 1 || to > n {
                    return Err(GraphError::InvalidVertex { vertex: to, n });
                }
                by_port[port - 1] = to;
            }
            lists[v] = by_port;
        }
        Self::from_neighbor_lists(n, lists)
    }

    /// Shared validation: simplicity, symmetry, connectivity.
    fn from_neighbor_lists(n: usize, lists: Vec<Vec<usize>>) -> Result<Self, GraphError> {
        let mut m = 0usize;
        for v in 1..=n {
            let mut uniq = BTreeSet::new();
            for &w in &lists[v] {
                if w == v {
                    return Err(GraphError::SelfLoop { vertex: v });
                }
                if !uniq.insert(w) {
                    return Err(GraphError::DuplicateEdge {
                        u: v.min(w),
                        v: v.max(w),
                    });
                }
            }
            m += lists[v].len();
        }
        for v in 1..=n {
            for &w in &lists[v] {
                if !lists[w].contains(&v) {
                    return Err(GraphError::AsymmetricEdge { u: v, v: w });
                }
            }
        }
        let g = PortLabeledGraph {
            n,
            m: m / 2,
            adj: lists,
        };
        // Connectivity from vertex 1.
        let dist = g.bfs_distances(1);
        for v in 1..=n {
            if dist[v] == usize::MAX {
                return Err(GraphError::DisconnectedGraph { vertex: v });
            }
        }
        Ok(g)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn contains_vertex(&self, v: usize) -> bool {
        (1..=self.n).contains(&v)
    }

    pub fn vertices(&self) -> impl Iterator<Item = usize> + '_ {
        1..=self.n
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }

    /// Neighbor reached from `v` through port `p` (1-based).
    pub fn neighbor_via_port(&self, v: usize, p: usize) -> usize {
        self.adj[v][p - 1]
    }

    /// Neighbors of `v` in port order.
    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adj[v]
    }

    /// Port at `v` leading to neighbor `w`, if the edge exists.
    pub fn port_to(&self, v: usize, w: usize) -> Option<usize> {
        self.adj[v].iter().position(|&x| x == w).map(|i| i + 1)
    }

    /// Port by which a move from `u` through `p` is seen on arrival.
    pub fn arrival_port(&self, u: usize, p: usize) -> usize {
        let w = self.neighbor_via_port(u, p);
        self.port_to(w, u).expect("symmetric adjacency")
    }

    /// BFS distances from `from`; entry 0 is padding, unreachable is MAX.
    pub fn bfs_distances(&self, from: usize) -> Vec<usize> {
        assert!(self.contains_vertex(from), "invalid vertex {from}");
        let mut dist = vec![usize::MAX; self.n + 1];
        dist[from] = 0;
        let mut queue = VecDeque::from([from]);
        while let Some(v) = queue.pop_front() {
            for &w in &self.adj[v] {
                if dist[w] == usize::MAX {
                    dist[w] = dist[v] + 1;
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    /// Exact shortest-path distance d(u,v).
    pub fn distance(&self, u: usize, v: usize) -> usize {
        assert!(self.contains_vertex(v), "invalid vertex {v}");
        self.bfs_distances(u)[v]
    }

    /// Graph diameter D = max over all pairs of d(u,v).
    pub fn diameter(&self) -> usize {
        self.vertices()
            .map(|u| {
                let d = self.bfs_distances(u);
                (1..=self.n).map(|v| d[v]).max().unwrap_or(0)
            })
            .max()
            .unwrap_or(0)
    }

    /// First pair (u, v), u < v in id order, with d(u,v) equal to the
    /// diameter. For the single-vertex graph returns (1, 1).
    pub fn diameter_pair(&self) -> (usize, usize) {
        let d = self.diameter();
        for u in 1..=self.n {
            let du = self.bfs_distances(u);
            for v in (u + 1)..=self.n {
                if du[v] == d {
                    return (u, v);
                }
            }
        }
        (1, 1)
    }

    /// Open ball {y : d(center, y) < radius}. The inequality is strict, so
    /// radius 0 is empty and radius 1 is just the center.
    pub fn ball(&self, center: usize, radius: usize) -> BTreeSet<usize> {
        let dist = self.bfs_distances(center);
        (1..=self.n).filter(|&v| dist[v] < radius).collect()
    }

    /// Serializes to the JSON interchange format, ports in ascending order.
    pub fn to_json(&self) -> String {
        let adj: BTreeMap<String, Vec<PortEntry>> = (1..=self.n)
            .map(|v| {
                let entries = self.adj[v]
                    .iter()
                    .enumerate()
                    .map(|(i, &to)| PortEntry { port: i + 1, to })
                    .collect();
                (v.to_string(), entries)
            })
            .collect();
        serde_json::to_string_pretty(&GraphJson { n: self.n, adj }).expect("graph serializes")
    }

    /// Parses and fully re-validates a graph from the JSON interchange format.
    pub fn from_json(s: &str) -> Result<Self, GraphError> {
        let raw: GraphJson =
            serde_json::from_str(s).map_err(|e| GraphError::Format(e.to_string()))?;
        let mut ports: BTreeMap<usize, Vec<(usize, usize)>> = BTreeMap::new();
        for (k, entries) in raw.adj {
            let v: usize = k
                .parse()
                .map_err(|_| GraphError::Format(format!("bad vertex key {k:?}")))?;
            ports.insert(v, entries.iter().map(|e| (e.port, e.to)).collect());
        }
        Self::from_adjacency(raw.n, &ports)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphJson {
    n: usize,
    adj: BTreeMap<String, Vec<PortEntry>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PortEntry {
    port: usize,
    to: usize,
}

/// Generator families, including the adversarial constructions: the
/// double star that traps deterministic memoryless agents and the chain of
/// cliques whose middle takes Omega(m) expected steps to reach.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GraphFamilySpec {
    Path { n: usize },
    Cycle { n: usize },
    Clique { n: usize },
    /// Two stars with `d` leaves each; the centers are joined by a bridge
    /// edge carrying port `p` at both endpoints, so each center ends with
    /// degree d+1.
    DoubleStar { d: usize, p: usize },
    /// Chain of `y` cliques of size `x`. Adjacent cliques are joined by
    /// subdividing one clique edge on each side with a fresh bridgehead
    /// vertex and connecting the two bridgeheads by a bridge edge; a clique
    /// edge hosts at most one bridgehead. Bridgehead-carrying edges are
    /// drawn uniformly with the given seed (default 0).
    ChainOfCliques {
        x: usize,
        y: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
    CompleteBipartite { a: usize, b: usize },
}

/// Builds a member of the given family. Pure function of (spec, seed).
pub fn gen_family(spec: &GraphFamilySpec) -> Result<PortLabeledGraph, GraphError> {
    match *spec {
        GraphFamilySpec::Path { n } => {
            if n < 1 {
                return Err(GraphError::BadParameters("path requires n >= 1".into()));
            }
            let edges: Vec<_> = (1..n).map(|i| (i, i + 1)).collect();
            PortLabeledGraph::from_edges_with_n(n, &edges)
        }
        GraphFamilySpec::Cycle { n } => {
            if n < 3 {
                return Err(GraphError::BadParameters("cycle requires n >= 3".into()));
            }
            let mut edges: Vec<_> = (1..n).map(|i| (i, i + 1)).collect();
            edges.push((n, 1));
            PortLabeledGraph::from_edges_with_n(n, &edges)
        }
        GraphFamilySpec::Clique { n } => {
            if n < 1 {
                return Err(GraphError::BadParameters("clique requires n >= 1".into()));
            }
            let edges = clique_edges(1, n);
            PortLabeledGraph::from_edges_with_n(n, &edges)
        }
        GraphFamilySpec::DoubleStar { d, p } => gen_double_star(d, p),
        GraphFamilySpec::ChainOfCliques { x, y, seed } => gen_chain_of_cliques(x, y, seed),
        GraphFamilySpec::CompleteBipartite { a, b } => {
            if a < 1 || b < 1 {
                return Err(GraphError::BadParameters(
                    "complete bipartite requires a, b >= 1".into(),
                ));
            }
            let mut edges = Vec::with_capacity(a * b);
            for u in 1..=a {
                for v in (a + 1)..=(a + b) {
                    edges.push((u, v));
                }
            }
            PortLabeledGraph::from_edges_with_n(a + b, &edges)
        }
    }
}

/// Edges of a clique over the contiguous vertex range [first, first+size).
fn clique_edges(first: usize, size: usize) -> Vec<(usize, usize)> {
    let mut edges = Vec::with_capacity(size * size.saturating_sub(1) / 2);
    for i in 0..size {
        for j in (i + 1)..size {
            edges.push((first + i, first + j));
        }
    }
    edges
}

/// Double star: centers 1 and 2, leaves 3..=d+2 on center 1 and
/// d+3..=2d+2 on center 2. The bridge (1,2) carries port p on both sides;
/// the remaining center ports go to leaves in ascending id order.
fn gen_double_star(d: usize, p: usize) -> Result<PortLabeledGraph, GraphError> {
    if d < 1 {
        return Err(GraphError::BadParameters("double star requires d >= 1".into()));
    }
    if p < 1 || p > d + 1 {
        return Err(GraphError::BadParameters(format!(
            "double star bridge port p={p} out of range 1..={}",
            d + 1
        )));
    }
    let n = 2 * d + 2;
    let mut ports: BTreeMap<usize, Vec<(usize, usize)>> = BTreeMap::new();
    for (center, other, first_leaf) in [(1, 2, 3), (2, 1, d + 3)] {
        let mut entries = Vec::with_capacity(d + 1);
        let mut leaf = first_leaf;
        for port in 1..=(d + 1) {
            if port == p {
                entries.push((port, other));
            } else {
                entries.push((port, leaf));
                ports.insert(leaf, vec![(1, center)]);
                leaf += 1;
            }
        }
        ports.insert(center, entries);
    }
    PortLabeledGraph::from_adjacency(n, &ports)
}

/// Chain of cliques: clique i occupies ids (i-1)x+1..=ix; the bridgeheads of
/// junction j get the fresh ids yx+2(j-1)+1 and yx+2(j-1)+2. Subdivided
/// clique edges are drawn uniformly among the edges of the clique that do
/// not already carry a bridgehead.
fn gen_chain_of_cliques(
    x: usize,
    y: usize,
    seed: Option<u64>,
) -> Result<PortLabeledGraph, GraphError> {
    if x < 3 || y < 1 {
        return Err(GraphError::BadParameters(format!(
            "chain of cliques requires x >= 3 and y >= 1, got x={x}, y={y}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed.unwrap_or(0));
    let n = y * x + 2 * (y - 1);
    // Remaining (not yet subdivided) edges per clique, canonical order.
    let mut free_edges: Vec<Vec<(usize, usize)>> =
        (0..y).map(|i| clique_edges(i * x + 1, x)).collect();
    let mut edges: Vec<(usize, usize)> = Vec::new();
    for j in 0..(y - 1) {
        let w1 = y * x + 2 * j + 1;
        let w2 = y * x + 2 * j + 2;
        for (clique, w) in [(j, w1), (j + 1, w2)] {
            let pick = rng.random_range(0..free_edges[clique].len());
            let (a, b) = free_edges[clique].remove(pick);
            edges.push((a, w));
            edges.push((w, b));
        }
        edges.push((w1, w2));
    }
    for remaining in free_edges {
        edges.extend(remaining);
    }
    PortLabeledGraph::from_edges_with_n(n, &edges)
}

/// The "middle of the chain" for the chain-of-cliques family: the two
/// bridgeheads of the middle bridge when y is even, otherwise the vertices
/// of the middle clique.
pub fn chain_middle_set(x: usize, y: usize) -> BTreeSet<usize> {
    if y % 2 == 0 {
        let j = y / 2; // junction index, 1-based
        let w1 = y * x + 2 * (j - 1) + 1;
        [w1, w1 + 1].into_iter().collect()
    } else {
        let mid = y.div_ceil(2); // clique index, 1-based
        ((mid - 1) * x + 1..=mid * x).collect()
    }
}
