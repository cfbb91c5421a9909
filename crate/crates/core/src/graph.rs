//! Directed communication graphs.
//!
//! Agents are indexed `0..n` internally. The edge-list text format uses
//! 1-based ids: first line `n`, then one `j i` pair per line meaning
//! "agent `j` can transmit to agent `i`".

use std::collections::{BTreeSet, VecDeque};
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};

/// A directed graph on `n` agents. An edge `(j, i)` means `j` can transmit to `i`.
///
/// Self-loops are never stored; every agent implicitly knows its own state.
#[derive(Debug, Clone, PartialEq)]
pub struct Digraph {
    n: usize,
    edges: BTreeSet<(usize, usize)>,
    coords: Option<Vec<[f64; 2]>>,
}

impl Digraph {
    /// Build a digraph from 0-based `(from, to)` pairs. Duplicates are merged.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if n == 0 {
            return Err(invalid("graph must have at least one agent"));
        }
        let mut set = BTreeSet::new();
        for (j, i) in edges {
            if j >= n || i >= n {
                return Err(invalid(format!("edge ({j}, {i}) out of range for n = {n}")));
            }
            if j == i {
                return Err(invalid(format!("self-loop on agent {j}")));
            }
            set.insert((j, i));
        }
        Ok(Self { n, edges: set, coords: None })
    }

    /// Undirected ring as a symmetric digraph: `i <-> i±1 mod n`.
    pub fn ring(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(invalid(format!("ring needs n >= 3, got {n}")));
        }
        let edges = (0..n).flat_map(|i| {
            let next = (i + 1) % n;
            [(i, next), (next, i)]
        });
        Self::new(n, edges)
    }

    /// Complete graph (every ordered pair of distinct agents).
    pub fn complete(n: usize) -> Result<Self> {
        let edges = (0..n).flat_map(|j| (0..n).filter(move |&i| i != j).map(move |i| (j, i)));
        Self::new(n, edges)
    }

    /// Random geometric graph: `n` points uniform in the unit square, symmetric
    /// edges between points at Euclidean distance `<= radius`. A radius of at
    /// least `sqrt 2` yields the complete graph.
    pub fn random_geometric(n: usize, radius: f64, seed: u64) -> Result<Self> {
        if n < 2 {
            return Err(invalid(format!("random geometric graph needs n >= 2, got {n}")));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(invalid(format!("radius must be positive, got {radius}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let coords: Vec<[f64; 2]> = (0..n).map(|_| [rng.random(), rng.random()]).collect();
        let mut edges = Vec::new();
        for a in 0..n {
            for b in (a + 1)..n {
                let dx = coords[a][0] - coords[b][0];
                let dy = coords[a][1] - coords[b][1];
                if dx.hypot(dy) <= radius {
                    edges.push((a, b));
                    edges.push((b, a));
                }
            }
        }
        let mut g = Self::new(n, edges)?;
        g.coords = Some(coords);
        Ok(g)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Edges as 0-based `(from, to)` pairs, sorted.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn has_edge(&self, from: usize, to: usize) -> bool {
        self.edges.contains(&(from, to))
    }

    /// Agents that can transmit to `i`.
    pub fn in_neighbors(&self, i: usize) -> Vec<usize> {
        self.edges.iter().filter(|&&(_, to)| to == i).map(|&(j, _)| j).collect()
    }

    pub fn out_neighbors(&self, j: usize) -> Vec<usize> {
        self.edges.range((j, 0)..(j + 1, 0)).map(|&(_, i)| i).collect()
    }

    pub fn in_degree(&self, i: usize) -> usize {
        self.edges.iter().filter(|&&(_, to)| to == i).count()
    }

    pub fn out_degree(&self, j: usize) -> usize {
        self.edges.range((j, 0)..(j + 1, 0)).count()
    }

    /// Sampled point coordinates, for geometric graphs.
    pub fn coords(&self) -> Option<&[[f64; 2]]> {
        self.coords.as_deref()
    }

    pub fn is_symmetric(&self) -> bool {
        self.edges.iter().all(|&(j, i)| self.edges.contains(&(i, j)))
    }

    /// True iff every agent reaches every other along directed edges.
    pub fn is_strongly_connected(&self) -> bool {
        let mut fwd = vec![Vec::new(); self.n];
        let mut bwd = vec![Vec::new(); self.n];
        for &(j, i) in &self.edges {
            fwd[j].push(i);
            bwd[i].push(j);
        }
        reaches_all(&fwd) && reaches_all(&bwd)
    }

    /// Serialize to the 1-based edge-list text format.
    pub fn to_edge_list(&self) -> String {
        let mut out = format!("{}\n", self.n);
        for &(j, i) in &self.edges {
            let _ = writeln!(out, "{} {}", j + 1, i + 1);
        }
        out
    }

    /// Parse the 1-based edge-list text format. Blank lines and `#` comments are ignored.
    pub fn from_edge_list(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or("").trim())
            .filter(|l| !l.is_empty());
        let header = lines.next().ok_or_else(|| Error::Parse("empty edge list".into()))?;
        let n: usize = header
            .parse()
            .map_err(|_| Error::Parse(format!("bad agent count {header:?}")))?;
        let mut edges = Vec::new();
        for line in lines {
            let mut it = line.split_whitespace();
            let parse_id = |tok: Option<&str>| -> Result<usize> {
                let tok = tok.ok_or_else(|| Error::Parse(format!("bad edge line {line:?}")))?;
                let id: usize = tok
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad agent id {tok:?}")))?;
                if id == 0 {
                    return Err(Error::Parse("agent ids are 1-based".into()));
                }
                Ok(id - 1)
            };
            let j = parse_id(it.next())?;
            let i = parse_id(it.next())?;
            if it.next().is_some() {
                return Err(Error::Parse(format!("trailing tokens in {line:?}")));
            }
            edges.push((j, i));
        }
        Self::new(n, edges)
    }
}

fn reaches_all(adj: &[Vec<usize>]) -> bool {
    let mut seen = vec![false; adj.len()];
    let mut queue = VecDeque::from([0]);
    seen[0] = true;
    let mut count = 1;
    while let Some(v) = queue.pop_front() {
        for &w in &adj[v] {
            if !seen[w] {
                seen[w] = true;
                count += 1;
                queue.push_back(w);
            }
        }
    }
    count == adj.len()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ring3_is_complete() {
        let g = Digraph::ring(3).unwrap();
        assert_eq!(g.edge_count(), 6);
        for j in 0..3 {
            for i in 0..3 {
                assert_eq!(g.has_edge(j, i), i != j);
            }
        }
        assert_eq!(g, Digraph::complete(3).unwrap());
    }

    #[test]
    fn ring20_degrees() {
        let g = Digraph::ring(20).unwrap();
        assert_eq!(g.edge_count(), 40);
        for i in 0..20 {
            assert_eq!(g.in_degree(i), 2);
            assert_eq!(g.out_degree(i), 2);
        }
    }

    #[test]
    fn ring4_neighbors() {
        // agent 1 in 1-based ids is agent 0 here
        let g = Digraph::ring(4).unwrap();
        assert_eq!(g.in_neighbors(0), vec![1, 3]);
    }

    #[test]
    fn ring_too_small() {
        assert!(matches!(Digraph::ring(2), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn rejects_self_loop_and_out_of_range() {
        assert!(Digraph::new(3, [(1, 1)]).is_err());
        assert!(Digraph::new(3, [(0, 3)]).is_err());
        assert!(Digraph::new(0, []).is_err());
    }

    #[test]
    fn duplicate_edges_merge() {
        let g = Digraph::new(2, [(0, 1), (0, 1)]).unwrap();
        assert_eq!(g.edge_count(), 1);
    }

    #[test]
    fn one_way_pair_not_strongly_connected() {
        let g = Digraph::new(2, [(0, 1)]).unwrap();
        assert!(!g.is_strongly_connected());
        assert!(Digraph::ring(5).unwrap().is_strongly_connected());
    }

    #[test]
    fn directed_cycle_is_strongly_connected() {
        let g = Digraph::new(4, [(0, 1), (1, 2), (2, 3), (3, 0)]).unwrap();
        assert!(g.is_strongly_connected());
        assert!(!g.is_symmetric());
    }

    #[test]
    fn geometric_large_radius_connects_pair() {
        for seed in 0..20 {
            let g = Digraph::random_geometric(2, 1.5, seed).unwrap();
            assert_eq!(g.edge_count(), 2);
        }
    }

    #[test]
    fn geometric_is_deterministic_and_symmetric() {
        let a = Digraph::random_geometric(50, 0.5, 7).unwrap();
        let b = Digraph::random_geometric(50, 0.5, 7).unwrap();
        assert_eq!(a, b);
        assert!(a.is_symmetric());
        assert_eq!(a.coords().unwrap().len(), 50);
    }

    #[test]
    fn geometric_bad_args() {
        assert!(Digraph::random_geometric(1, 0.5, 0).is_err());
        assert!(Digraph::random_geometric(5, 0.0, 0).is_err());
        assert!(Digraph::random_geometric(5, f64::NAN, 0).is_err());
        assert_eq!(Digraph::random_geometric(6, 2.0, 0).unwrap().edge_count(), 30);
    }

    #[test]
    fn edge_list_roundtrip() {
        let g = Digraph::random_geometric(12, 0.4, 3).unwrap();
        let text = g.to_edge_list();
        let back = Digraph::from_edge_list(&text).unwrap();
        assert_eq!(back.n(), g.n());
        assert_eq!(back.edges().collect::<Vec<_>>(), g.edges().collect::<Vec<_>>());
        assert!(text.starts_with("12\n"));
    }

    #[test]
    fn edge_list_rejects_zero_ids() {
        assert!(Digraph::from_edge_list("3\n0 1\n").is_err());
        assert!(Digraph::from_edge_list("").is_err());
        let g = Digraph::from_edge_list("# ring\n3\n1 2\n2 1\n").unwrap();
        assert!(g.has_edge(0, 1) && g.has_edge(1, 0));
    }
}
