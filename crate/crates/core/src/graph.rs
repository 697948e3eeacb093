//! Graphlike decomposition of a detector error model for matching.

use std::collections::HashMap;

use crate::circuit::Basis;
use crate::dem::{xor_probability, DetectorErrorModel};
use crate::error::{Error, Result};

/// Largest hyperedge the partition search will try to split.
const MAX_SEARCH_DETECTORS: usize = 12;

/// One edge of the matching graph. `v == None` is the virtual boundary.
#[derive(Clone, Debug, PartialEq)]
pub struct Edge {
    pub u: u32,
    pub v: Option<u32>,
    pub probability: f64,
    pub weight: f64,
    /// Observables flipped when the edge is in a correction.
    pub observables: u64,
    /// Mechanisms contributing to this edge, ascending.
    pub faults: Vec<u32>,
    /// Most probable mechanism whose detector set is exactly `{u, v}`. Used to
    /// translate a matched edge back into a mechanism-level correction.
    pub representative: u32,
}

/// Matching graph over the detectors plus one boundary node with index
/// `n_detectors`.
#[derive(Clone, Debug)]
pub struct DecodingGraph {
    n_detectors: usize,
    n_observables: usize,
    edges: Vec<Edge>,
    adjacency: Vec<Vec<(u32, u32)>>,
    column_edges: Vec<Vec<u32>>,
}

/// Weight of an edge firing with probability `p`.
pub fn edge_weight(p: f64) -> f64 {
    ((1.0 - p) / p).ln()
}

fn mask_of(observables: &[u32]) -> u64 {
    observables.iter().fold(0, |m, &o| m ^ (1u64 << o))
}

type Key = (u32, Option<u32>);

fn key_of(dets: &[u32]) -> Key {
    match *dets {
        [a] => (a, None),
        [a, b] => (a.min(b), Some(a.max(b))),
        _ => unreachable!("graphlike key of {} detectors", dets.len()),
    }
}

impl DecodingGraph {
    pub fn n_detectors(&self) -> usize {
        self.n_detectors
    }

    pub fn n_observables(&self) -> usize {
        self.n_observables
    }

    /// Number of mechanisms of the model the graph was built from.
    pub fn n_mechanisms(&self) -> usize {
        self.column_edges.len()
    }

    /// Node index of the virtual boundary.
    pub fn boundary(&self) -> u32 {
        self.n_detectors as u32
    }

    pub fn n_nodes(&self) -> usize {
        self.n_detectors + 1
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// `(neighbour, edge id)` pairs of a node; the boundary node has index
    /// `n_detectors`.
    pub fn neighbours(&self, node: u32) -> &[(u32, u32)] {
        &self.adjacency[node as usize]
    }

    /// Edge ids a mechanism was decomposed into.
    pub fn edges_of_column(&self, k: usize) -> &[u32] {
        &self.column_edges[k]
    }

    /// Endpoint of edge `e` opposite `node`, with the boundary as a node index.
    pub fn other_end(&self, e: u32, node: u32) -> u32 {
        let edge = &self.edges[e as usize];
        let v = edge.v.unwrap_or(self.boundary());
        if edge.u == node {
            v
        } else {
            edge.u
        }
    }

    /// Per-edge firing probabilities implied by per-mechanism probabilities,
    /// combining every contributing mechanism as independent flips.
    pub fn edge_probabilities(&self, mechanism_probabilities: &[f64]) -> Vec<f64> {
        self.edges
            .iter()
            .map(|e| {
                e.faults
                    .iter()
                    .fold(0.0, |acc, &k| xor_probability(acc, mechanism_probabilities[k as usize]))
            })
            .collect()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.edges.iter().map(|e| e.weight).collect()
    }
}

struct Builder {
    edges: Vec<Edge>,
    index: HashMap<Key, u32>,
}

impl Builder {
    fn partition_search(
        &self,
        dets: &[u32],
        target_mask: u64,
        priors: &[f64],
    ) -> Option<Vec<u32>> {
        let mut best: Option<(usize, f64, Vec<u32>)> = None;
        let mut chosen = Vec::new();
        self.search(dets, 0, target_mask, priors, &mut chosen, &mut best);
        best.map(|b| b.2)
    }

    fn search(
        &self,
        remaining: &[u32],
        mask: u64,
        target: u64,
        priors: &[f64],
        chosen: &mut Vec<u32>,
        best: &mut Option<(usize, f64, Vec<u32>)>,
    ) {
        let Some((&first, rest)) = remaining.split_first() else {
            if mask == target {
                let score: f64 = chosen
                    .iter()
                    .map(|&e| priors[self.edges[e as usize].representative as usize].ln())
                    .sum();
                let better = match best {
                    None => true,
                    Some((n, s, _)) => chosen.len() < *n || (chosen.len() == *n && score > *s),
                };
                if better {
                    *best = Some((chosen.len(), score, chosen.clone()));
                }
            }
            return;
        };
        if let Some(&e) = self.index.get(&(first, None)) {
            chosen.push(e);
            let m = mask ^ self.edges[e as usize].observables;
            self.search(rest, m, target, priors, chosen, best);
            chosen.pop();
        }
        for (i, &other) in rest.iter().enumerate() {
            if let Some(&e) = self.index.get(&key_of(&[first, other])) {
                let mut left: Vec<u32> = rest.to_vec();
                left.remove(i);
                chosen.push(e);
                let m = mask ^ self.edges[e as usize].observables;
                self.search(&left, m, target, priors, chosen, best);
                chosen.pop();
            }
        }
    }

    fn split_by_basis(
        &self,
        dets: &[u32],
        basis: &[Basis],
        target_mask: u64,
    ) -> Option<Vec<u32>> {
        let mut parts = Vec::new();
        let mut mask = 0;
        for b in [Basis::X, Basis::Z] {
            let part: Vec<u32> = dets
                .iter()
                .copied()
                .filter(|&d| basis[d as usize] == b)
                .collect();
            if part.is_empty() {
                continue;
            }
            if part.len() > 2 {
                return None;
            }
            let &e = self.index.get(&key_of(&part))?;
            mask ^= self.edges[e as usize].observables;
            parts.push(e);
        }
        (mask == target_mask && parts.len() >= 2).then_some(parts)
    }
}

/// Maps every column with one or two detectors to an edge and splits every
/// larger column into existing edges whose detector sets partition it and
/// whose observable masks XOR to the column's mask.
///
/// Columns sharing a detector pair are merged into one edge; the edge keeps
/// the observable mask of its most probable graphlike contributor. When
/// detector metadata is present, hyperedges are first split into their X and
/// Z detector parts; otherwise, or when that split does not match existing
/// edges, the smallest valid partition is searched for.
pub fn decompose_to_graph(dem: &DetectorErrorModel) -> Result<DecodingGraph> {
    let n_det = dem.n_detectors();
    let n_obs = dem.n_observables();
    if n_obs > 64 {
        return Err(Error::Parameter(format!(
            "at most 64 observables supported, got {n_obs}"
        )));
    }
    let priors = dem.priors();
    let mut b = Builder {
        edges: Vec::new(),
        index: HashMap::new(),
    };
    let mut column_edges = vec![Vec::new(); dem.n_mechanisms()];

    for (k, edges_of_k) in column_edges.iter_mut().enumerate() {
        let dets = dem.detectors_of(k);
        match dets.len() {
            0 => {
                return Err(Error::Decomposition {
                    column: k,
                    reason: "flips observables without triggering any detector".into(),
                })
            }
            1 | 2 => {
                let key = key_of(dets);
                let mask = mask_of(dem.observables_of(k));
                let id = *b.index.entry(key).or_insert_with(|| {
                    b.edges.push(Edge {
                        u: key.0,
                        v: key.1,
                        probability: 0.0,
                        weight: 0.0,
                        observables: mask,
                        faults: Vec::new(),
                        representative: k as u32,
                    });
                    (b.edges.len() - 1) as u32
                });
                let edge = &mut b.edges[id as usize];
                if priors[k] > priors[edge.representative as usize] {
                    edge.representative = k as u32;
                    edge.observables = mask;
                }
                edge.faults.push(k as u32);
                edges_of_k.push(id);
            }
            _ => {}
        }
    }

    let basis: Option<Vec<Basis>> = (dem.detector_info().len() == n_det)
        .then(|| dem.detector_info().iter().map(|i| i.basis).collect());
    for (k, edges_of_k) in column_edges.iter_mut().enumerate() {
        let dets = dem.detectors_of(k);
        if dets.len() <= 2 {
            continue;
        }
        let mask = mask_of(dem.observables_of(k));
        let split = basis
            .as_ref()
            .and_then(|basis| b.split_by_basis(dets, basis, mask));
        let parts = match split {
            Some(parts) => parts,
            None if dets.len() <= MAX_SEARCH_DETECTORS => b
                .partition_search(dets, mask, priors)
                .ok_or_else(|| Error::Decomposition {
                    column: k,
                    reason: format!("no partition of {dets:?} into existing edges"),
                })?,
            None => {
                return Err(Error::Decomposition {
                    column: k,
                    reason: format!("{} detectors is too many to search", dets.len()),
                })
            }
        };
        for &e in &parts {
            b.edges[e as usize].faults.push(k as u32);
        }
        *edges_of_k = parts;
    }

    let mut adjacency = vec![Vec::new(); n_det + 1];
    for (id, edge) in b.edges.iter_mut().enumerate() {
        edge.faults.sort_unstable();
        edge.probability = edge
            .faults
            .iter()
            .fold(0.0, |acc, &k| xor_probability(acc, priors[k as usize]));
        edge.weight = edge_weight(edge.probability);
        let v = edge.v.unwrap_or(n_det as u32);
        adjacency[edge.u as usize].push((v, id as u32));
        adjacency[v as usize].push((edge.u, id as u32));
    }
    Ok(DecodingGraph {
        n_detectors: n_det,
        n_observables: n_obs,
        edges: b.edges,
        adjacency,
        column_edges,
    })
}
