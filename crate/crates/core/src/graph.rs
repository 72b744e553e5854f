//! K-nearest-neighbour graph over subbands and all-pairs geodesic distances.

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeSet, BinaryHeap};

use ndarray::Array2;

use crate::correlation::{DistanceMatrix, ExtDist};
use crate::error::{Error, Result};
use crate::par::{self, Execution};

pub const ORACLE_MAX_VERTICES: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub weight: f64,
}

/// Undirected weighted graph. Edges are stored once with `u < v`, sorted.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborGraph {
    n_vertices: usize,
    edges: Vec<Edge>,
    adjacency: Vec<Vec<(usize, f64)>>,
}

impl NeighborGraph {
    pub fn from_edges(n_vertices: usize, edges: impl IntoIterator<Item = Edge>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        let mut list = Vec::new();
        for e in edges {
            if e.u >= n_vertices || e.v >= n_vertices {
                return Err(Error::param(
                    "edges",
                    format!("edge ({}, {}) refers to a vertex >= {n_vertices}", e.u, e.v),
                ));
            }
            if e.u == e.v {
                return Err(Error::param(
                    "edges",
                    format!("self-loop at vertex {}", e.u),
                ));
            }
            if !(e.weight.is_finite() && e.weight >= 0.0) {
                return Err(Error::param(
                    "edges",
                    format!("edge ({}, {}) has weight {}", e.u, e.v, e.weight),
                ));
            }
            let (u, v) = (e.u.min(e.v), e.u.max(e.v));
            if seen.insert((u, v)) {
                list.push(Edge {
                    u,
                    v,
                    weight: e.weight,
                });
            }
        }
        list.sort_by_key(|e| (e.u, e.v));
        let mut adjacency = vec![Vec::new(); n_vertices];
        for e in &list {
            adjacency[e.u].push((e.v, e.weight));
            adjacency[e.v].push((e.u, e.weight));
        }
        for a in &mut adjacency {
            a.sort_by_key(|&(v, _)| v);
        }
        Ok(NeighborGraph {
            n_vertices,
            edges: list,
            adjacency,
        })
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn neighbors(&self, u: usize) -> &[(usize, f64)] {
        &self.adjacency[u]
    }

    pub fn degree(&self, u: usize) -> usize {
        self.adjacency[u].len()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adjacency[u]
            .binary_search_by_key(&v, |&(w, _)| w)
            .is_ok()
    }
}

/// The `k` vertices closest to `u`, nearest first, ties to the lower index.
fn nearest(d: &DistanceMatrix, u: usize, k: usize) -> Result<Vec<(usize, f64)>> {
    let mut cands: Vec<(usize, f64)> = (0..d.len())
        .filter(|&v| v != u)
        .filter_map(|v| d.get(u, v).finite().map(|w| (v, w)))
        .collect();
    if cands.len() < k {
        return Err(Error::InsufficientNeighbors {
            vertex: u,
            available: cands.len(),
            k,
        });
    }
    cands.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    cands.truncate(k);
    Ok(cands)
}

/// Connects `u` and `v` when either is among the other's `k` nearest.
pub fn knn_graph(d: &DistanceMatrix, k: usize) -> Result<NeighborGraph> {
    let n = d.len();
    if k == 0 || k >= n {
        return Err(Error::param(
            "k",
            format!("need 1 <= k < {n} vertices, got {k}"),
        ));
    }
    let mut edges = Vec::with_capacity(n * k);
    for u in 0..n {
        for (v, weight) in nearest(d, u, k)? {
            edges.push(Edge { u, v, weight });
        }
    }
    NeighborGraph::from_edges(n, edges)
}

/// Connected components, each sorted, ordered by smallest member.
pub fn connected_components(g: &NeighborGraph) -> Vec<Vec<usize>> {
    let n = g.n_vertices();
    let mut label = vec![usize::MAX; n];
    let mut comps = Vec::new();
    for s in 0..n {
        if label[s] != usize::MAX {
            continue;
        }
        let id = comps.len();
        let mut members = vec![s];
        let mut stack = vec![s];
        label[s] = id;
        while let Some(u) = stack.pop() {
            for &(v, _) in g.neighbors(u) {
                if label[v] == usize::MAX {
                    label[v] = id;
                    members.push(v);
                    stack.push(v);
                }
            }
        }
        members.sort_unstable();
        comps.push(members);
    }
    comps
}

/// Symmetric matrix of shortest-path lengths.
#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicMatrix {
    values: Array2<ExtDist>,
}

impl GeodesicMatrix {
    pub fn new(values: Array2<ExtDist>) -> Result<Self> {
        // same structural checks as a distance matrix
        let checked = DistanceMatrix::new(values)?;
        Ok(GeodesicMatrix {
            values: checked.values().clone(),
        })
    }

    pub fn values(&self) -> &Array2<ExtDist> {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, u: usize, v: usize) -> ExtDist {
        self.values[[u, v]]
    }

    pub fn is_connected(&self) -> bool {
        self.values.iter().all(|d| d.is_finite())
    }

    /// Groups of mutually reachable vertices, ordered by smallest member.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.len();
        let mut assigned = vec![false; n];
        let mut comps = Vec::new();
        for s in 0..n {
            if assigned[s] {
                continue;
            }
            let members: Vec<usize> = (s..n).filter(|&v| self.get(s, v).is_finite()).collect();
            for &v in &members {
                assigned[v] = true;
            }
            comps.push(members);
        }
        comps
    }

    /// Finite copy of the matrix, or the component partition if any pair is unreachable.
    pub fn to_finite(&self) -> Result<Array2<f64>> {
        if !self.is_connected() {
            return Err(Error::Disconnected {
                components: self.components(),
            });
        }
        Ok(self.values.mapv(|d| d.finite().unwrap_or(f64::INFINITY)))
    }

    /// Restriction to the given vertices, in the given order.
    pub fn submatrix(&self, vertices: &[usize]) -> GeodesicMatrix {
        let m = vertices.len();
        GeodesicMatrix {
            values: Array2::from_shape_fn((m, m), |(i, j)| self.get(vertices[i], vertices[j])),
        }
    }
}

#[derive(Clone, Copy, PartialEq)]
struct State {
    dist: f64,
    vertex: usize,
}

impl Eq for State {}

impl Ord for State {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist
            .total_cmp(&other.dist)
            .then(self.vertex.cmp(&other.vertex))
    }
}

impl PartialOrd for State {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Single-source shortest paths with a binary heap.
pub fn dijkstra(g: &NeighborGraph, source: usize) -> Vec<ExtDist> {
    let n = g.n_vertices();
    let mut dist = vec![ExtDist::Infinite; n];
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::new();
    dist[source] = ExtDist::ZERO;
    heap.push(Reverse(State {
        dist: 0.0,
        vertex: source,
    }));
    while let Some(Reverse(State { dist: d, vertex: u })) = heap.pop() {
        if done[u] {
            continue;
        }
        done[u] = true;
        for &(v, w) in g.neighbors(u) {
            let cand = d + w;
            if !done[v] && ExtDist::Finite(cand) < dist[v] {
                dist[v] = ExtDist::Finite(cand);
                heap.push(Reverse(State {
                    dist: cand,
                    vertex: v,
                }));
            }
        }
    }
    dist
}

/// All-pairs geodesics by Dijkstra from every vertex.
pub fn geodesics(g: &NeighborGraph, exec: Execution) -> GeodesicMatrix {
    let n = g.n_vertices();
    let rows = par::map_indexed(n, exec, |s| dijkstra(g, s));
    let mut values = Array2::from_elem((n, n), ExtDist::Infinite);
    // path sums can differ in the last bit between directions; keep the upper triangle
    for u in 0..n {
        values[[u, u]] = ExtDist::ZERO;
        for v in u + 1..n {
            values[[u, v]] = rows[u][v];
            values[[v, u]] = rows[u][v];
        }
    }
    let unreachable = values.iter().filter(|d| !d.is_finite()).count();
    if unreachable > 0 {
        log::warn!(
            "graph is disconnected: {} unreachable ordered pairs",
            unreachable
        );
    }
    GeodesicMatrix { values }
}

/// Cubic-time reference for [`geodesics`].
pub fn floyd_warshall_oracle(g: &NeighborGraph) -> Result<GeodesicMatrix> {
    let n = g.n_vertices();
    if n > ORACLE_MAX_VERTICES {
        return Err(Error::OracleSizeGuard {
            n_vertices: n,
            limit: ORACLE_MAX_VERTICES,
        });
    }
    let mut d = Array2::from_elem((n, n), ExtDist::Infinite);
    for u in 0..n {
        d[[u, u]] = ExtDist::ZERO;
    }
    for e in g.edges() {
        d[[e.u, e.v]] = ExtDist::Finite(e.weight);
        d[[e.v, e.u]] = ExtDist::Finite(e.weight);
    }
    for k in 0..n {
        for i in 0..n {
            let Some(dik) = d[[i, k]].finite() else {
                continue;
            };
            for j in 0..n {
                if let Some(dkj) = d[[k, j]].finite() {
                    let cand = ExtDist::Finite(dik + dkj);
                    if cand < d[[i, j]] {
                        d[[i, j]] = cand;
                    }
                }
            }
        }
    }
    Ok(GeodesicMatrix { values: d })
}
