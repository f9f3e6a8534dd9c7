//! Graphs, 3-colorings and the coloring search used by cheating provers.
//!
//! Edges are always stored in canonical order: `(u, v)` with `u < v`, sorted
//! lexicographically. Every other module indexes edges by their position in
//! this order.

use std::collections::BTreeSet;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::GraphError;

/// An undirected edge `(u, v)` with `u < v`.
pub type Edge = (usize, usize);

/// Colors of a well-formed 3-coloring.
pub const COLORS: [u8; 3] = [1, 2, 3];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawGraph", into = "RawGraph")]
pub struct Graph {
    n: usize,
    edges: Vec<Edge>,
}

#[derive(Serialize, Deserialize)]
struct RawGraph {
    n: usize,
    edges: Vec<Edge>,
}

impl TryFrom<RawGraph> for Graph {
    type Error = GraphError;

    fn try_from(raw: RawGraph) -> Result<Self, Self::Error> {
        Graph::new(raw.n, raw.edges)
    }
}

impl From<Graph> for RawGraph {
    fn from(g: Graph) -> Self {
        RawGraph { n: g.n, edges: g.edges }
    }
}

impl Graph {
    /// Builds a graph from 0-indexed edges in any order and orientation.
    pub fn new(n: usize, edges: impl IntoIterator<Item = Edge>) -> Result<Self, GraphError> {
        if n > u32::MAX as usize {
            return Err(GraphError::TooManyVertices(n));
        }
        let mut set = BTreeSet::new();
        for (a, b) in edges {
            if a == b {
                return Err(GraphError::SelfLoop(a));
            }
            let e = (a.min(b), a.max(b));
            if e.1 >= n {
                return Err(GraphError::VertexOutOfRange { vertex: e.1, n });
            }
            if !set.insert(e) {
                return Err(GraphError::DuplicateEdge(e.0, e.1));
            }
        }
        if set.is_empty() {
            return Err(GraphError::NoEdges);
        }
        Ok(Graph {
            n,
            edges: set.into_iter().collect(),
        })
    }

    /// The complete graph on `n` vertices.
    pub fn complete(n: usize) -> Result<Self, GraphError> {
        Graph::new(n, (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))))
    }

    /// Built-in graphs by name: `k3`, `k4`, `petersen`.
    pub fn named(name: &str) -> Option<Self> {
        match name {
            "k3" => Graph::complete(3).ok(),
            "k4" => Graph::complete(4).ok(),
            "petersen" => {
                let outer = (0..5).map(|i| (i, (i + 1) % 5));
                let spokes = (0..5).map(|i| (i, i + 5));
                let inner = (0..5).map(|i| (i + 5, (i + 2) % 5 + 5));
                Graph::new(10, outer.chain(spokes).chain(inner)).ok()
            }
            _ => None,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Position of `e` in canonical order, accepting either orientation.
    pub fn edge_index(&self, e: Edge) -> Option<usize> {
        let key = (e.0.min(e.1), e.0.max(e.1));
        self.edges.binary_search(&key).ok()
    }

    pub fn contains_edge(&self, e: Edge) -> bool {
        self.edge_index(e).is_some()
    }

    /// Adjacency as `(neighbor, edge index)` lists.
    pub fn incidence(&self) -> Vec<Vec<(usize, usize)>> {
        let mut adj = vec![Vec::new(); self.n];
        for (i, &(u, v)) in self.edges.iter().enumerate() {
            adj[u].push((v, i));
            adj[v].push((u, i));
        }
        adj
    }

    pub fn is_connected(&self) -> bool {
        if self.n == 0 {
            return true;
        }
        let adj = self.incidence();
        let mut seen = vec![false; self.n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(u) = stack.pop() {
            for &(w, _) in &adj[u] {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// Parses the DIMACS-like edge list: one `p edge n m` header followed by
    /// `m` lines `e u v` with 1-indexed vertices. Lines starting with `c` and
    /// blank lines are ignored.
    pub fn parse_dimacs(text: &str) -> Result<Self, GraphError> {
        let mut header: Option<(usize, usize)> = None;
        let mut edges = Vec::new();
        let mut seen = BTreeSet::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('c') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            match fields.as_slice() {
                ["p", "edge", n, m] if header.is_none() => {
                    let n = n.parse().map_err(|_| GraphError::Header(line_no))?;
                    let m = m.parse().map_err(|_| GraphError::Header(line_no))?;
                    header = Some((n, m));
                }
                ["p", ..] => return Err(GraphError::Header(line_no)),
                ["e", u, v] => {
                    let (n, _) = header.ok_or(GraphError::Header(line_no))?;
                    let parse = |s: &str| -> Result<usize, GraphError> {
                        s.parse::<usize>().map_err(|_| GraphError::Line(line_no))
                    };
                    let (u, v) = (parse(u)?, parse(v)?);
                    for x in [u, v] {
                        if x == 0 || x > n {
                            return Err(GraphError::VertexOutOfRange { vertex: x, n });
                        }
                    }
                    if u == v {
                        return Err(GraphError::SelfLoop(u - 1));
                    }
                    let e = ((u - 1).min(v - 1), (u - 1).max(v - 1));
                    if !seen.insert(e) {
                        return Err(GraphError::DuplicateEdge(e.0, e.1));
                    }
                    edges.push(e);
                }
                _ => return Err(GraphError::Line(line_no)),
            }
        }
        let (n, m) = header.ok_or(GraphError::Header(0))?;
        if edges.len() != m {
            return Err(GraphError::EdgeCount {
                declared: m,
                found: edges.len(),
            });
        }
        Graph::new(n, edges)
    }

    pub fn to_dimacs(&self) -> String {
        let mut out = format!("p edge {} {}\n", self.n, self.m());
        for &(u, v) in &self.edges {
            out.push_str(&format!("e {} {}\n", u + 1, v + 1));
        }
        out
    }
}

impl fmt::Display for Graph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Graph(n={}, m={})", self.n, self.m())
    }
}

/// A total assignment of colors in `{1,2,3}` to vertices `0..n`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<u8>", into = "Vec<u8>")]
pub struct Coloring(Vec<u8>);

impl TryFrom<Vec<u8>> for Coloring {
    type Error = GraphError;

    fn try_from(colors: Vec<u8>) -> Result<Self, Self::Error> {
        Coloring::new(colors)
    }
}

impl From<Coloring> for Vec<u8> {
    fn from(c: Coloring) -> Self {
        c.0
    }
}

impl Coloring {
    pub fn new(colors: Vec<u8>) -> Result<Self, GraphError> {
        if let Some((vertex, &color)) = colors.iter().enumerate().find(|(_, c)| !COLORS.contains(c)) {
            return Err(GraphError::BadColor { vertex, color });
        }
        Ok(Coloring(colors))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn color(&self, v: usize) -> u8 {
        self.0[v]
    }

    pub fn colors(&self) -> &[u8] {
        &self.0
    }

    fn check_total(&self, g: &Graph) -> Result<(), GraphError> {
        if self.0.len() != g.n() {
            return Err(GraphError::NotTotal {
                expected: g.n(),
                found: self.0.len(),
            });
        }
        Ok(())
    }
}

pub fn is_proper(g: &Graph, c: &Coloring) -> Result<bool, GraphError> {
    c.check_total(g)?;
    Ok(g.edges().iter().all(|&(u, v)| c.color(u) != c.color(v)))
}

/// Edges whose endpoints share a color, in canonical order.
pub fn monochromatic_edges(g: &Graph, c: &Coloring) -> Result<Vec<Edge>, GraphError> {
    c.check_total(g)?;
    Ok(g.edges()
        .iter()
        .copied()
        .filter(|&(u, v)| c.color(u) == c.color(v))
        .collect())
}

/// Total weight of monochromatic edges; `weights` is indexed in canonical order.
pub fn conflict_weight(g: &Graph, c: &Coloring, weights: &[f64]) -> Result<f64, GraphError> {
    c.check_total(g)?;
    check_weights(g, weights)?;
    Ok(g.edges()
        .iter()
        .zip(weights)
        .filter(|(&(u, v), _)| c.color(u) == c.color(v))
        .map(|(_, w)| w)
        .sum())
}

fn check_weights(g: &Graph, weights: &[f64]) -> Result<(), GraphError> {
    if weights.len() != g.m() {
        return Err(GraphError::WeightCount {
            expected: g.m(),
            found: weights.len(),
        });
    }
    if let Some(i) = weights.iter().position(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(GraphError::BadWeight(i));
    }
    Ok(())
}

/// Random graph around a hidden proper coloring.
///
/// Vertex `v` is planted in class `v mod 3` (color `v mod 3 + 1`). Each
/// cross-class pair is an edge with probability `edge_prob`, and the path
/// `0-1-...-(n-1)` is always added so the graph is connected (consecutive
/// vertices never share a class).
pub fn planted_3colorable(n: usize, edge_prob: f64, seed: u64) -> Result<(Graph, Coloring), GraphError> {
    if n < 3 {
        return Err(GraphError::TooFewVertices(n));
    }
    if !(edge_prob > 0.0 && edge_prob <= 1.0) {
        return Err(GraphError::BadProbability(edge_prob));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let class = |v: usize| v % 3;
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if class(u) == class(v) {
                continue;
            }
            let sampled = rng.gen::<f64>() < edge_prob;
            if sampled || v == u + 1 {
                edges.push((u, v));
            }
        }
    }
    let graph = Graph::new(n, edges)?;
    let coloring = Coloring::new((0..n).map(|v| class(v) as u8 + 1).collect())?;
    Ok((graph, coloring))
}

/// Upper bound on local-search moves per restart, as a multiple of `n`.
pub const MOVES_PER_VERTEX: usize = 50;
pub const DEFAULT_RESTARTS: usize = 20;
/// A restart gives up after this many moves per vertex without a new best.
pub const STALL_MOVES_PER_VERTEX: usize = 10;

const IMPROVEMENT_EPS: f64 = 1e-12;

/// Weighted min-conflict local search.
///
/// Each restart starts from a uniformly random assignment and repeatedly
/// applies the best single-vertex recolor (lowest vertex index, then lowest
/// color, on ties). When no recolor strictly improves the weight, a random
/// endpoint of a monochromatic edge is moved to a random other color. A
/// restart ends after `50 * n` moves or when the weight reaches zero. The
/// best assignment seen across all restarts is returned.
pub fn min_conflict_coloring(
    g: &Graph,
    edge_weights: &[f64],
    seed: u64,
    restarts: usize,
) -> Result<Coloring, GraphError> {
    check_weights(g, edge_weights)?;
    let n = g.n();
    let adj = g.incidence();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut best: Option<(f64, Vec<u8>)> = None;

    for _ in 0..restarts.max(1) {
        let mut colors: Vec<u8> = (0..n).map(|_| rng.gen_range(1..=3u8)).collect();
        let mut weight = weight_of(g, &colors, edge_weights);
        let mut best_here = (weight, colors.clone());
        let mut stalled = 0;

        for _ in 0..MOVES_PER_VERTEX * n {
            if weight <= 0.0 || stalled > STALL_MOVES_PER_VERTEX * n {
                break;
            }
            stalled += 1;
            let mut chosen: Option<(f64, usize, u8)> = None;
            for v in 0..n {
                let cur = colors[v];
                for &c in COLORS.iter().filter(|&&c| c != cur) {
                    let delta = recolor_delta(&adj, &colors, edge_weights, v, c);
                    if chosen.is_none_or(|(d, _, _)| delta < d - IMPROVEMENT_EPS) {
                        chosen = Some((delta, v, c));
                    }
                }
            }
            match chosen {
                Some((delta, v, c)) if delta < -IMPROVEMENT_EPS => {
                    colors[v] = c;
                    weight += delta;
                }
                _ => {
                    let mut bad = g.edges().iter().filter(|&&(u, v)| colors[u] == colors[v]);
                    let count = bad.clone().count();
                    let Some(&(a, b)) = bad.nth(if count == 0 { 0 } else { rng.gen_range(0..count) }) else {
                        break;
                    };
                    let v = if rng.gen_bool(0.5) { a } else { b };
                    // one of the two other colors
                    let c = (colors[v] + rng.gen_range(0..2u8)) % 3 + 1;
                    weight += recolor_delta(&adj, &colors, edge_weights, v, c);
                    colors[v] = c;
                }
            }
            if weight < best_here.0 - IMPROVEMENT_EPS {
                // resync to avoid drift from accumulated deltas
                weight = weight_of(g, &colors, edge_weights);
                best_here = (weight, colors.clone());
                stalled = 0;
            }
        }

        if best.as_ref().is_none_or(|(w, _)| best_here.0 < *w - IMPROVEMENT_EPS) {
            best = Some(best_here);
        }
        if best.as_ref().is_some_and(|(w, _)| *w <= 0.0) {
            break;
        }
    }

    let (_, colors) = best.expect("at least one restart");
    Coloring::new(colors)
}

fn weight_of(g: &Graph, colors: &[u8], weights: &[f64]) -> f64 {
    g.edges()
        .iter()
        .zip(weights)
        .filter(|(&(u, v), _)| colors[u] == colors[v])
        .map(|(_, w)| w)
        .sum()
}

fn recolor_delta(adj: &[Vec<(usize, usize)>], colors: &[u8], weights: &[f64], v: usize, to: u8) -> f64 {
    let from = colors[v];
    adj[v].iter().fold(0.0, |acc, &(w, e)| {
        let c = colors[w];
        if c == from {
            acc - weights[e]
        } else if c == to {
            acc + weights[e]
        } else {
            acc
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k3() -> Graph {
        Graph::complete(3).unwrap()
    }

    #[test]
    fn named_graphs() {
        let p = Graph::named("petersen").unwrap();
        assert_eq!((p.n(), p.m()), (10, 15));
        assert!(p.incidence().iter().all(|inc| inc.len() == 3));
        // chromatic number 3: some assignment of 3^10 is proper
        assert!(all_assignments(10).any(|c| is_proper(&p, &c).unwrap()));
        assert_eq!(Graph::named("k4").unwrap().m(), 6);
        assert!(Graph::named("k5").is_none());
    }

    fn all_assignments(n: usize) -> impl Iterator<Item = Coloring> {
        (0..3usize.pow(n as u32)).map(move |mut code| {
            let colors = (0..n)
                .map(|_| {
                    let c = (code % 3) as u8 + 1;
                    code /= 3;
                    c
                })
                .collect();
            Coloring::new(colors).unwrap()
        })
    }

    fn brute_min(g: &Graph, w: &[f64]) -> f64 {
        all_assignments(g.n())
            .map(|c| conflict_weight(g, &c, w).unwrap())
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn parse_triangle() {
        let g = Graph::parse_dimacs("p edge 3 3\ne 1 2\ne 2 3\ne 1 3\n").unwrap();
        assert_eq!(g.n(), 3);
        assert_eq!(g.edges(), &[(0, 1), (0, 2), (1, 2)]);
        assert_eq!(g, k3());
    }

    #[test]
    fn parse_k4() {
        let text = "c complete graph\np edge 4 6\ne 1 2\ne 1 3\ne 1 4\ne 2 3\ne 2 4\ne 3 4\n";
        let g = Graph::parse_dimacs(text).unwrap();
        assert_eq!(g.m(), 6);
        assert_eq!(g, Graph::complete(4).unwrap());
        assert_eq!(Graph::parse_dimacs(&g.to_dimacs()).unwrap(), g);
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(
            Graph::parse_dimacs("p edge 2 1\ne 1 1\n"),
            Err(GraphError::SelfLoop(0))
        ));
        assert!(matches!(
            Graph::parse_dimacs("p edge 3 2\ne 1 2\ne 2 1\n"),
            Err(GraphError::DuplicateEdge(0, 1))
        ));
        assert!(matches!(
            Graph::parse_dimacs("p edge 3 2\ne 1 2\n"),
            Err(GraphError::EdgeCount { declared: 2, found: 1 })
        ));
        assert!(matches!(
            Graph::parse_dimacs("p edge 3 1\ne 1 4\n"),
            Err(GraphError::VertexOutOfRange { vertex: 4, n: 3 })
        ));
        assert!(matches!(Graph::parse_dimacs("p edge x 1\n"), Err(GraphError::Header(1))));
        assert!(matches!(Graph::parse_dimacs("e 1 2\n"), Err(GraphError::Header(1))));
        assert!(matches!(Graph::parse_dimacs(""), Err(GraphError::Header(0))));
        assert!(matches!(Graph::parse_dimacs("p edge 3 1\nq\n"), Err(GraphError::Line(2))));
    }

    #[test]
    fn coloring_rejects_out_of_set() {
        assert!(Coloring::new(vec![1, 2, 4]).is_err());
        assert!(Coloring::new(vec![0]).is_err());
    }

    #[test]
    fn proper_and_monochromatic_on_k3() {
        let g = k3();
        let good = Coloring::new(vec![1, 2, 3]).unwrap();
        let bad = Coloring::new(vec![1, 1, 2]).unwrap();
        assert!(is_proper(&g, &good).unwrap());
        assert!(!is_proper(&g, &bad).unwrap());
        assert!(monochromatic_edges(&g, &good).unwrap().is_empty());
        assert_eq!(monochromatic_edges(&g, &bad).unwrap(), vec![(0, 1)]);
    }

    #[test]
    fn coloring_must_be_total() {
        let short = Coloring::new(vec![1, 2]).unwrap();
        assert!(matches!(is_proper(&k3(), &short), Err(GraphError::NotTotal { .. })));
        assert!(monochromatic_edges(&k3(), &short).is_err());
    }

    #[test]
    fn k4_has_no_proper_3_coloring() {
        let g = Graph::complete(4).unwrap();
        let mut count = 0;
        for c in all_assignments(4) {
            assert!(!is_proper(&g, &c).unwrap());
            count += 1;
        }
        assert_eq!(count, 81);
        let c = Coloring::new(vec![1, 1, 2, 3]).unwrap();
        assert_eq!(monochromatic_edges(&g, &c).unwrap(), vec![(0, 1)]);
    }

    #[test]
    fn planted_small_and_deterministic() {
        let (g, c) = planted_3colorable(3, 1.0, 99).unwrap();
        assert_eq!(g, k3());
        assert_eq!(c.colors(), &[1, 2, 3]);
        let a = planted_3colorable(12, 0.5, 7).unwrap();
        let b = planted_3colorable(12, 0.5, 7).unwrap();
        assert_eq!(a, b);
        assert!(planted_3colorable(2, 0.5, 0).is_err());
        assert!(planted_3colorable(5, 0.0, 0).is_err());
    }

    #[test]
    fn min_conflict_small_cases() {
        let g = k3();
        let c = min_conflict_coloring(&g, &[1.0; 3], 1, DEFAULT_RESTARTS).unwrap();
        assert!(is_proper(&g, &c).unwrap());

        let k4 = Graph::complete(4).unwrap();
        let c = min_conflict_coloring(&k4, &[1.0; 6], 1, DEFAULT_RESTARTS).unwrap();
        assert_eq!(monochromatic_edges(&k4, &c).unwrap().len(), 1);

        // brute force says the weighted optimum is 0.1
        let w = [0.5, 0.1, 0.1, 0.1, 0.1, 0.1];
        assert!((brute_min(&k4, &w) - 0.1).abs() < 1e-12);
        let c = min_conflict_coloring(&k4, &w, 3, DEFAULT_RESTARTS).unwrap();
        let bad = monochromatic_edges(&k4, &c).unwrap();
        assert_eq!(bad.len(), 1);
        assert_ne!(bad[0], (0, 1));
        assert!((conflict_weight(&k4, &c, &w).unwrap() - 0.1).abs() < 1e-12);
    }

    #[test]
    fn min_conflict_missing_weight() {
        assert!(matches!(
            min_conflict_coloring(&k3(), &[1.0, 1.0], 0, 1),
            Err(GraphError::WeightCount { expected: 3, found: 2 })
        ));
    }

    #[test]
    fn min_conflict_matches_brute_force_on_tiny_graphs() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        for trial in 0..300 {
            let n = rng.gen_range(2..=4);
            let pairs: Vec<Edge> = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))).collect();
            let mut edges: Vec<Edge> = pairs.iter().copied().filter(|_| rng.gen_bool(0.7)).collect();
            if edges.is_empty() {
                edges.push(pairs[0]);
            }
            let g = Graph::new(n, edges).unwrap();
            let w: Vec<f64> = (0..g.m()).map(|_| rng.gen_range(0.0..1.0)).collect();
            let c = min_conflict_coloring(&g, &w, trial, DEFAULT_RESTARTS).unwrap();
            let got = conflict_weight(&g, &c, &w).unwrap();
            assert!((got - brute_min(&g, &w)).abs() < 1e-9, "trial {trial}: {got}");
        }
    }

    #[test]
    fn planted_instances_are_solved() {
        for seed in 0..20 {
            let (g, _) = planted_3colorable(20, 0.4, seed).unwrap();
            let c = min_conflict_coloring(&g, &vec![1.0; g.m()], seed, DEFAULT_RESTARTS).unwrap();
            assert!(is_proper(&g, &c).unwrap(), "seed {seed}");
        }
    }
}
