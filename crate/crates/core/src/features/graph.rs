use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::path::Path;

use rayon::prelude::*;
use serde::Deserialize;

use crate::error::{Error, Result};

/// Directed road graph; nodes are crossroads and road endpoints.
#[derive(Debug, Clone, Default)]
pub struct RoadGraph {
    ids: Vec<String>,
    index: HashMap<String, usize>,
    lonlat: Vec<[f64; 2]>,
    /// Outgoing adjacency: (target, length).
    out: Vec<Vec<(usize, f64)>>,
    /// Incoming adjacency: (source, length).
    inc: Vec<Vec<(usize, f64)>>,
}

#[derive(Deserialize)]
struct NodeRow {
    id: String,
    lon: f64,
    lat: f64,
}

#[derive(Deserialize)]
struct EdgeRow {
    from_id: String,
    to_id: String,
    length_m: f64,
    #[serde(default)]
    oneway: Option<String>,
}

fn parse_flag(s: &str) -> Option<bool> {
    match s.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "y" | "t" => Some(true),
        "0" | "false" | "no" | "n" | "f" | "" => Some(false),
        _ => None,
    }
}

impl RoadGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_node(&mut self, id: impl Into<String>, lon: f64, lat: f64) -> Result<usize> {
        let id = id.into();
        if self.index.contains_key(&id) {
            return Err(Error::invalid(format!("duplicate node id {id}")));
        }
        let i = self.ids.len();
        self.index.insert(id.clone(), i);
        self.ids.push(id);
        self.lonlat.push([lon, lat]);
        self.out.push(Vec::new());
        self.inc.push(Vec::new());
        Ok(i)
    }

    pub fn add_edge(&mut self, from: &str, to: &str, length: f64) -> Result<()> {
        if !(length > 0.0) || !length.is_finite() {
            return Err(Error::invalid(format!("edge {from}->{to} has non-positive length {length}")));
        }
        let a = self.node_index(from)?;
        let b = self.node_index(to)?;
        self.out[a].push((b, length));
        self.inc[b].push((a, length));
        Ok(())
    }

    /// Reads a node list (id, lon, lat) and an edge list (from_id, to_id,
    /// length_m, optional oneway). Edges without a true oneway flag are
    /// inserted in both directions.
    pub fn from_csv(nodes_csv: &[u8], edges_csv: &[u8]) -> Result<Self> {
        let mut g = RoadGraph::new();
        for row in csv::Reader::from_reader(nodes_csv).deserialize() {
            let row: NodeRow = row?;
            g.add_node(row.id, row.lon, row.lat)?;
        }
        for (line, row) in csv::Reader::from_reader(edges_csv).deserialize().enumerate() {
            let row: EdgeRow = row?;
            let oneway = match &row.oneway {
                None => false,
                Some(s) => parse_flag(s)
                    .ok_or_else(|| Error::invalid(format!("edge line {}: bad oneway flag {s:?}", line + 2)))?,
            };
            g.add_edge(&row.from_id, &row.to_id, row.length_m)?;
            if !oneway {
                g.add_edge(&row.to_id, &row.from_id, row.length_m)?;
            }
        }
        Ok(g)
    }

    pub fn from_csv_files(nodes: &Path, edges: &Path) -> Result<Self> {
        let read = |p: &Path| std::fs::read(p).map_err(|e| Error::File { path: p.to_path_buf(), source: e });
        Self::from_csv(&read(nodes)?, &read(edges)?)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn lonlat(&self) -> &[[f64; 2]] {
        &self.lonlat
    }

    pub fn node_index(&self, id: &str) -> Result<usize> {
        self.index.get(id).copied().ok_or_else(|| Error::UnknownNode(id.to_string()))
    }

    /// Same nodes, every length multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> RoadGraph {
        let mut g = self.clone();
        for adj in g.out.iter_mut().chain(g.inc.iter_mut()) {
            for e in adj.iter_mut() {
                e.1 *= factor;
            }
        }
        g
    }
}

#[derive(Clone, Copy, PartialEq)]
struct State {
    dist: f64,
    node: usize,
}

impl Eq for State {}

impl Ord for State {
    fn cmp(&self, other: &Self) -> Ordering {
        other.dist.total_cmp(&self.dist).then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for State {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn dijkstra(adj: &[Vec<(usize, f64)>], source: usize) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; adj.len()];
    let mut heap = BinaryHeap::new();
    dist[source] = 0.0;
    heap.push(State { dist: 0.0, node: source });
    while let Some(State { dist: d, node }) = heap.pop() {
        if d > dist[node] {
            continue;
        }
        for &(next, w) in &adj[node] {
            let nd = d + w;
            if nd < dist[next] {
                dist[next] = nd;
                heap.push(State { dist: nd, node: next });
            }
        }
    }
    dist
}

/// Shortest directed path length; `None` when `to` is unreachable.
pub fn road_distance(graph: &RoadGraph, from: &str, to: &str) -> Result<Option<f64>> {
    let a = graph.node_index(from)?;
    let b = graph.node_index(to)?;
    let d = dijkstra(&graph.out, a)[b];
    Ok(d.is_finite().then_some(d))
}

/// Harmonic centrality `C(u) = Σ_{v≠u} 1/d(v, u)` for every node, in node
/// order. Distances into `u` come from Dijkstra on the reversed graph;
/// unreachable sources contribute nothing.
pub fn harmonic_centrality(graph: &RoadGraph) -> Vec<f64> {
    let all: Vec<usize> = (0..graph.len()).collect();
    harmonic_centrality_of(graph, &all)
}

/// Harmonic centrality of the listed node indices only.
pub fn harmonic_centrality_of(graph: &RoadGraph, nodes: &[usize]) -> Vec<f64> {
    nodes
        .par_iter()
        .map(|&u| {
            dijkstra(&graph.inc, u)
                .iter()
                .enumerate()
                .filter(|&(v, d)| v != u && d.is_finite())
                .map(|(_, d)| 1.0 / d)
                .sum()
        })
        .collect()
}
