//! Undirected friendship graphs: edge-list loading, subgraph sampling and a
//! synthetic generator used when no edge list is supplied.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FriendshipGraph {
    adjacency: BTreeMap<u32, BTreeSet<u32>>,
    /// Self-loops skipped while loading.
    pub self_loops_dropped: usize,
}

impl FriendshipGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_node(&mut self, v: u32) {
        self.adjacency.entry(v).or_default();
    }

    /// Adds `{u, v}`; returns false for self-loops and duplicates.
    pub fn add_edge(&mut self, u: u32, v: u32) -> bool {
        if u == v {
            return false;
        }
        let fresh = self.adjacency.entry(u).or_default().insert(v);
        self.adjacency.entry(v).or_default().insert(u);
        fresh
    }

    pub fn remove_edge(&mut self, u: u32, v: u32) {
        if let Some(n) = self.adjacency.get_mut(&u) {
            n.remove(&v);
        }
        if let Some(n) = self.adjacency.get_mut(&v) {
            n.remove(&u);
        }
    }

    pub fn has_edge(&self, u: u32, v: u32) -> bool {
        self.adjacency.get(&u).is_some_and(|n| n.contains(&v))
    }

    pub fn neighbors(&self, v: u32) -> impl Iterator<Item = u32> + '_ {
        self.adjacency.get(&v).into_iter().flatten().copied()
    }

    pub fn degree(&self, v: u32) -> usize {
        self.adjacency.get(&v).map_or(0, BTreeSet::len)
    }

    pub fn nodes(&self) -> impl Iterator<Item = u32> + '_ {
        self.adjacency.keys().copied()
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.values().map(BTreeSet::len).sum::<usize>() / 2
    }

    pub fn edges(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.adjacency
            .iter()
            .flat_map(|(&u, n)| n.iter().filter(move |&&v| u < v).map(move |&v| (u, v)))
    }

    /// Breadth-first sample of `n` nodes starting from a random node,
    /// restarting from another random unvisited node whenever a component is
    /// exhausted. Sampled nodes are relabeled `0..n` in visit order and the
    /// induced edges kept.
    pub fn sample_subgraph<R: Rng + ?Sized>(
        &self,
        n: usize,
        rng: &mut R,
    ) -> Result<FriendshipGraph> {
        if n > self.node_count() {
            return Err(Error::Config(format!(
                "cannot sample {n} nodes from a graph of {}",
                self.node_count()
            )));
        }
        let all: Vec<u32> = self.nodes().collect();
        let mut label: BTreeMap<u32, u32> = BTreeMap::new();
        let mut queue = VecDeque::new();
        while label.len() < n {
            if queue.is_empty() {
                let unvisited: Vec<u32> = all
                    .iter()
                    .copied()
                    .filter(|v| !label.contains_key(v))
                    .collect();
                let start = *unvisited
                    .choose(rng)
                    .expect("fewer nodes sampled than available");
                label.insert(start, label.len() as u32);
                queue.push_back(start);
                continue;
            }
            let v = queue.pop_front().unwrap();
            for w in self.neighbors(v) {
                if label.len() >= n {
                    break;
                }
                if !label.contains_key(&w) {
                    label.insert(w, label.len() as u32);
                    queue.push_back(w);
                }
            }
        }
        let mut sub = FriendshipGraph::new();
        for &l in label.values() {
            sub.add_node(l);
        }
        for (u, v) in self.edges() {
            if let (Some(&a), Some(&b)) = (label.get(&u), label.get(&v)) {
                sub.add_edge(a, b);
            }
        }
        Ok(sub)
    }

    /// Community labels by asynchronous label propagation; labels are then
    /// renumbered densely from 0 in order of their smallest node.
    pub fn label_propagation<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        max_rounds: usize,
    ) -> BTreeMap<u32, usize> {
        let mut label: BTreeMap<u32, u32> = self.nodes().map(|v| (v, v)).collect();
        let mut order: Vec<u32> = self.nodes().collect();
        for _ in 0..max_rounds {
            order.shuffle(rng);
            let mut changed = false;
            for &v in &order {
                let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
                for w in self.neighbors(v) {
                    *counts.entry(label[&w]).or_default() += 1;
                }
                let Some(best) = counts.values().copied().max() else {
                    continue;
                };
                let current = label[&v];
                if counts.get(&current) == Some(&best) {
                    continue;
                }
                // smallest label among the most frequent ones
                let pick = counts
                    .iter()
                    .find(|(_, &c)| c == best)
                    .map(|(&l, _)| l)
                    .unwrap();
                label.insert(v, pick);
                changed = true;
            }
            if !changed {
                break;
            }
        }
        let mut dense: BTreeMap<u32, usize> = BTreeMap::new();
        let mut out = BTreeMap::new();
        for (&v, &l) in &label {
            let next = dense.len();
            let d = *dense.entry(l).or_insert(next);
            out.insert(v, d);
        }
        out
    }
}

/// Relaxed caveman graph: `n` nodes split into consecutive groups of
/// `group_size`, each a clique, after which every edge is rewired to a
/// uniformly random endpoint with probability `rewire`. Returns the graph and
/// each node's group.
pub fn relaxed_caveman<R: Rng + ?Sized>(
    n: usize,
    group_size: usize,
    rewire: f64,
    rng: &mut R,
) -> Result<(FriendshipGraph, Vec<usize>)> {
    if group_size < 2 {
        return Err(Error::Config("group size must be at least 2".into()));
    }
    if !(0.0..=1.0).contains(&rewire) {
        return Err(Error::Config(
            "rewiring probability must lie in [0, 1]".into(),
        ));
    }
    let groups: Vec<usize> = (0..n).map(|v| v / group_size).collect();
    let mut g = FriendshipGraph::new();
    for v in 0..n as u32 {
        g.add_node(v);
    }
    for u in 0..n {
        for v in u + 1..n {
            if groups[u] == groups[v] {
                g.add_edge(u as u32, v as u32);
            }
        }
    }
    if n < 3 {
        return Ok((g, groups));
    }
    let original: Vec<(u32, u32)> = g.edges().collect();
    for (u, v) in original {
        if rng.gen::<f64>() >= rewire {
            continue;
        }
        let w = rng.gen_range(0..n as u32);
        if w == u || g.has_edge(u, w) {
            continue;
        }
        g.remove_edge(u, v);
        g.add_edge(u, w);
    }
    Ok((g, groups))
}

/// Parses a whitespace-separated edge list. `#` starts a comment; blank
/// lines are skipped; duplicate edges collapse and self-loops are dropped
/// (and counted).
pub fn parse_friendship_edges(reader: impl Read, source: &Path) -> Result<FriendshipGraph> {
    let mut g = FriendshipGraph::new();
    for (k, line) in BufReader::new(reader).lines().enumerate() {
        let line = line.map_err(|e| Error::io(source, e))?;
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: source.to_path_buf(),
            line: k + 1,
            message,
        };
        let fields: Vec<&str> = body.split_whitespace().collect();
        if fields.len() != 2 {
            return Err(parse_err(format!(
                "expected two node ids, found {} fields",
                fields.len()
            )));
        }
        let u: u32 = fields[0]
            .parse()
            .map_err(|_| parse_err(format!("invalid node id `{}`", fields[0])))?;
        let v: u32 = fields[1]
            .parse()
            .map_err(|_| parse_err(format!("invalid node id `{}`", fields[1])))?;
        if u == v {
            g.self_loops_dropped += 1;
            g.add_node(u);
            continue;
        }
        g.add_edge(u, v);
    }
    Ok(g)
}

pub fn load_friendship_edges(path: &Path) -> Result<FriendshipGraph> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_friendship_edges(file, path)
}
