use std::collections::BTreeMap;

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use super::graph::{harmonic_centrality_of, RoadGraph};
use super::projection::project;
use super::rbf::{rbf_eval, rbf_fit, CentralitySurface};
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct SurfaceOptions {
    /// Graphs with more nodes than this are subsampled.
    pub node_budget: usize,
    pub subsample: usize,
}

impl Default for SurfaceOptions {
    fn default() -> Self {
        SurfaceOptions { node_budget: 5000, subsample: 2000 }
    }
}

/// Nodes whose centrality feeds the surface: all of them, or a uniform
/// random subset (sorted) when the graph exceeds the budget.
pub fn surface_nodes(n: usize, opts: &SurfaceOptions, seed: u64) -> Vec<usize> {
    if n <= opts.node_budget || opts.subsample >= n {
        return (0..n).collect();
    }
    let mut idx = sample(&mut rng::rng(seed), n, opts.subsample).into_vec();
    idx.sort_unstable();
    idx
}

/// Centrality surface over the graph's nodes, projected around `origin`.
/// Nodes sharing a location are merged and their centralities averaged.
pub fn centrality_surface(
    graph: &RoadGraph,
    origin: [f64; 2],
    opts: &SurfaceOptions,
    seed: u64,
) -> Result<CentralitySurface> {
    if graph.is_empty() {
        return Err(Error::invalid("road graph has no nodes"));
    }
    let nodes = surface_nodes(graph.len(), opts, seed);
    let centrality = harmonic_centrality_of(graph, &nodes);
    let lonlat: Vec<[f64; 2]> = nodes.iter().map(|&i| graph.lonlat()[i]).collect();
    let xy = project(&lonlat, origin);
    let mut merged: BTreeMap<(u64, u64), (usize, f64, [f64; 2])> = BTreeMap::new();
    for (p, c) in xy.iter().zip(&centrality) {
        let key = (p[0].to_bits(), p[1].to_bits());
        let e = merged.entry(key).or_insert((0, 0.0, *p));
        e.0 += 1;
        e.1 += c;
    }
    let sites: Vec<[f64; 2]> = merged.values().map(|e| e.2).collect();
    let values: Vec<f64> = merged.values().map(|e| e.1 / e.0 as f64).collect();
    rbf_fit(&sites, &values)
}

/// Road-network development at each object: harmonic centrality of the
/// nodes, interpolated by the linear RBF surface.
pub fn development_of_road_network(
    graph: &RoadGraph,
    objects_xy: &[[f64; 2]],
    origin: [f64; 2],
    opts: &SurfaceOptions,
    seed: u64,
) -> Result<Vec<f64>> {
    let surface = centrality_surface(graph, origin, opts, seed)?;
    Ok(rbf_eval(&surface, objects_xy))
}
