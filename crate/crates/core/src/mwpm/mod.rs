//! Minimum-weight perfect matching decoder and the belief-matching variant.
//!
//! Defects are matched on a complete graph whose edge weights are shortest
//! path lengths in the [`DecodingGraph`]. Every defect also gets a private
//! boundary copy: the edge defect–copy carries the distance to the boundary,
//! and copies of two defects are joined at weight zero whenever the defects
//! themselves are joined, so any set of boundary matches can be completed to a
//! perfect matching.

pub mod blossom;

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::Arc;
use std::time::Instant;

use crate::bits::{Bits, Syndrome};
use crate::bp::{BpDecoder, BpState};
use crate::dem::DetectorErrorModel;
use crate::error::{parameter, Error, Result};
use crate::graph::{edge_weight, DecodingGraph};

const NO_EDGE: u32 = u32::MAX;
/// Posteriors are kept this far from 0 and 1 before reweighting.
pub const POSTERIOR_EPSILON: f64 = 1e-14;
/// Fixed-point resolution of distances handed to the integer matcher.
const WEIGHT_SCALE: f64 = (1u64 << 36) as f64;
/// Upper bound on any scaled distance, leaving headroom for dual variables.
const MAX_SCALED: f64 = (1u64 << 52) as f64;

/// Correction produced by a matching stage.
#[derive(Clone, Debug, PartialEq)]
pub struct Correction {
    /// Mechanisms in the correction.
    pub e_c: Bits,
    /// Observables the correction flips.
    pub lambda_c: Bits,
    /// Total weight of the matched paths (after any pre-selection).
    pub weight: f64,
}

impl Correction {
    fn empty(graph: &DecodingGraph) -> Self {
        Correction {
            e_c: Bits::zeros(graph.n_mechanisms()),
            lambda_c: Bits::zeros(graph.n_observables()),
            weight: 0.0,
        }
    }

    fn add_edge(&mut self, graph: &DecodingGraph, e: u32) {
        let edge = &graph.edges()[e as usize];
        self.e_c.toggle(edge.representative as usize);
        let mut mask = edge.observables;
        while mask != 0 {
            let o = mask.trailing_zeros() as usize;
            self.lambda_c.toggle(o);
            mask &= mask - 1;
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct HeapEntry(f64, u32);

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .0
            .total_cmp(&self.0)
            .then_with(|| other.1.cmp(&self.1))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Reusable buffers for shortest-path searches. Entries are valid only when
/// their stamp equals the current generation.
#[derive(Clone, Debug, Default)]
pub struct MatchingScratch {
    dist: Vec<f64>,
    pred: Vec<u32>,
    stamp: Vec<u32>,
    settled: Vec<bool>,
    generation: u32,
    heap: BinaryHeap<HeapEntry>,
    defect_slot: Vec<u32>,
}

impl MatchingScratch {
    fn prepare(&mut self, n: usize) {
        if self.stamp.len() != n {
            self.dist = vec![f64::INFINITY; n];
            self.pred = vec![NO_EDGE; n];
            self.stamp = vec![0; n];
            self.settled = vec![false; n];
            self.defect_slot = vec![u32::MAX; n];
            self.generation = 0;
        }
        self.generation = self.generation.wrapping_add(1);
        if self.generation == 0 {
            self.stamp.iter_mut().for_each(|s| *s = 0);
            self.generation = 1;
        }
        self.heap.clear();
    }

    fn dist(&self, v: u32) -> f64 {
        if self.stamp[v as usize] == self.generation {
            self.dist[v as usize]
        } else {
            f64::INFINITY
        }
    }

    fn relax(&mut self, v: u32, d: f64, via: u32) {
        let i = v as usize;
        if self.stamp[i] != self.generation {
            self.stamp[i] = self.generation;
            self.settled[i] = false;
        } else if d >= self.dist[i] {
            return;
        }
        self.dist[i] = d;
        self.pred[i] = via;
        self.heap.push(HeapEntry(d, v));
    }

    fn pop(&mut self) -> Option<(f64, u32)> {
        while let Some(HeapEntry(d, v)) = self.heap.pop() {
            let i = v as usize;
            if self.settled[i] || d > self.dist[i] {
                continue;
            }
            self.settled[i] = true;
            return Some((d, v));
        }
        None
    }
}

/// Shortest distance and first edge of a shortest path from every node to
/// the boundary.
#[derive(Clone, Debug)]
struct BoundaryTree {
    dist: Vec<f64>,
    pred: Vec<u32>,
}

impl BoundaryTree {
    fn new(graph: &DecodingGraph, weights: &[f64], scratch: &mut MatchingScratch) -> Self {
        let n = graph.n_nodes();
        scratch.prepare(n);
        let b = graph.boundary();
        scratch.relax(b, 0.0, NO_EDGE);
        while let Some((d, v)) = scratch.pop() {
            for &(w, e) in graph.neighbours(v) {
                scratch.relax(w, d + weights[e as usize], e);
            }
        }
        BoundaryTree {
            dist: (0..n as u32).map(|v| scratch.dist(v)).collect(),
            pred: (0..n)
                .map(|v| {
                    if scratch.stamp[v] == scratch.generation {
                        scratch.pred[v]
                    } else {
                        NO_EDGE
                    }
                })
                .collect(),
        }
    }
}

/// A matching problem instance: graph, edge weights and boundary distances.
struct Instance<'a> {
    graph: &'a DecodingGraph,
    weights: &'a [f64],
    boundary: &'a BoundaryTree,
}

impl Instance<'_> {
    /// Dijkstra from `source` that never passes through the boundary node.
    /// Stops once `stop` returns true for a settled node or the frontier
    /// exceeds `cutoff`.
    fn search(
        &self,
        scratch: &mut MatchingScratch,
        source: u32,
        cutoff: f64,
        mut visit: impl FnMut(u32, f64) -> bool,
    ) {
        scratch.prepare(self.graph.n_nodes());
        let b = self.graph.boundary();
        scratch.relax(source, 0.0, NO_EDGE);
        while let Some((d, v)) = scratch.pop() {
            if d > cutoff {
                break;
            }
            if visit(v, d) {
                break;
            }
            for &(w, e) in self.graph.neighbours(v) {
                if w != b {
                    scratch.relax(w, d + self.weights[e as usize], e);
                }
            }
        }
    }

    fn decode(&self, s: &Syndrome, scratch: &mut MatchingScratch) -> Result<Correction> {
        let graph = self.graph;
        if s.len() != graph.n_detectors() {
            return parameter(format!(
                "syndrome has {} bits, graph has {} detectors",
                s.len(),
                graph.n_detectors()
            ));
        }
        let mut correction = Correction::empty(graph);
        let defects: Vec<u32> = s.iter_ones().map(|d| d as u32).collect();
        let k = defects.len();
        if k == 0 {
            return Ok(correction);
        }
        let bd: Vec<f64> = defects
            .iter()
            .map(|&d| self.boundary.dist[d as usize])
            .collect();
        let mut later_max = vec![f64::NEG_INFINITY; k + 1];
        for i in (0..k).rev() {
            later_max[i] = later_max[i + 1].max(bd[i]);
        }

        let mut pairs: Vec<(usize, usize, f64)> = Vec::new();
        let mut slot = std::mem::take(&mut scratch.defect_slot);
        slot.resize(graph.n_nodes(), u32::MAX);
        for (i, &d) in defects.iter().enumerate() {
            slot[d as usize] = i as u32;
        }
        for i in 0..k.saturating_sub(1) {
            let cutoff = bd[i] + later_max[i + 1];
            let mut remaining = k - i - 1;
            self.search(scratch, defects[i], cutoff, |v, d| {
                let j = slot[v as usize];
                if j != u32::MAX && j as usize > i {
                    let j = j as usize;
                    if d < bd[i] + bd[j] {
                        pairs.push((i, j, d));
                    }
                    remaining -= 1;
                }
                remaining == 0
            });
        }
        for &d in &defects {
            slot[d as usize] = u32::MAX;
        }
        scratch.defect_slot = slot;

        let max_w = pairs
            .iter()
            .map(|p| p.2)
            .chain(bd.iter().copied().filter(|d| d.is_finite()))
            .fold(0.0f64, f64::max);
        let scale = if max_w * WEIGHT_SCALE > MAX_SCALED {
            MAX_SCALED / max_w
        } else {
            WEIGHT_SCALE
        };
        let big = (max_w * scale).round() as i64 + 1;
        let to_int = |w: f64| big - (w * scale).round() as i64;
        let mut edges: Vec<(usize, usize, i64)> = Vec::with_capacity(k + 2 * pairs.len());
        for i in 0..k {
            if bd[i].is_finite() {
                edges.push((i, k + i, to_int(bd[i])));
            }
        }
        for &(i, j, d) in &pairs {
            edges.push((i, j, to_int(d)));
            edges.push((k + i, k + j, big));
        }
        let mate = blossom::max_weight_matching(2 * k, &edges, true);

        for i in 0..k {
            match mate[i] {
                Some(j) if j == k + i => {
                    correction.weight += bd[i];
                    let mut v = defects[i];
                    while v != graph.boundary() {
                        let e = self.boundary.pred[v as usize];
                        correction.add_edge(graph, e);
                        v = graph.other_end(e, v);
                    }
                }
                Some(j) if j < k => {
                    if j < i {
                        continue;
                    }
                    let target = defects[j];
                    let mut found = f64::INFINITY;
                    self.search(scratch, defects[i], f64::INFINITY, |v, d| {
                        if v == target {
                            found = d;
                            true
                        } else {
                            false
                        }
                    });
                    correction.weight += found;
                    let mut v = target;
                    while v != defects[i] {
                        let e = scratch.pred[v as usize];
                        correction.add_edge(graph, e);
                        v = graph.other_end(e, v);
                    }
                }
                _ => {
                    return Err(Error::Decode(format!(
                        "detector {} cannot be matched to another defect or the boundary",
                        defects[i]
                    )))
                }
            }
        }
        Ok(correction)
    }
}

/// Matching decoder with fixed edge weights.
#[derive(Clone, Debug)]
pub struct MatchingDecoder {
    graph: Arc<DecodingGraph>,
    weights: Vec<f64>,
    boundary: BoundaryTree,
}

impl MatchingDecoder {
    /// Uses the graph's own weights.
    pub fn new(graph: &DecodingGraph) -> Self {
        Self::with_weights(graph, graph.weights()).expect("graph weights are nonnegative")
    }

    /// Uses custom nonnegative edge weights, one per graph edge.
    pub fn with_weights(graph: &DecodingGraph, weights: Vec<f64>) -> Result<Self> {
        Self::with_shared_weights(Arc::new(graph.clone()), weights)
    }

    pub(crate) fn with_shared_weights(graph: Arc<DecodingGraph>, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != graph.edges().len() {
            return parameter("one weight per edge required");
        }
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return parameter("edge weights must be finite and nonnegative");
        }
        let boundary = BoundaryTree::new(&graph, &weights, &mut MatchingScratch::default());
        Ok(MatchingDecoder {
            graph,
            weights,
            boundary,
        })
    }

    pub fn graph(&self) -> &DecodingGraph {
        &self.graph
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn decode(&self, s: &Syndrome) -> Result<Correction> {
        self.decode_with(s, &mut MatchingScratch::default())
    }

    pub fn decode_with(&self, s: &Syndrome, scratch: &mut MatchingScratch) -> Result<Correction> {
        Instance {
            graph: &self.graph,
            weights: &self.weights,
            boundary: &self.boundary,
        }
        .decode(s, scratch)
    }

    /// Shortest-path distance between two nodes avoiding the boundary, or the
    /// boundary distance when `v` is the boundary node.
    pub fn distance(&self, u: u32, v: u32) -> f64 {
        if v == self.graph.boundary() {
            return self.boundary.dist[u as usize];
        }
        let inst = Instance {
            graph: &self.graph,
            weights: &self.weights,
            boundary: &self.boundary,
        };
        let mut out = f64::INFINITY;
        inst.search(&mut MatchingScratch::default(), u, f64::INFINITY, |w, d| {
            if w == v {
                out = d;
                true
            } else {
                false
            }
        });
        out
    }
}

/// Matching on the static graph.
pub fn mwpm_decode(graph: &DecodingGraph, s: &Syndrome) -> Result<Correction> {
    MatchingDecoder::new(graph).decode(s)
}

/// BP followed by matching on a per-shot graph reweighted with the BP
/// posteriors. A converged BP result is returned directly.
#[derive(Clone, Debug)]
pub struct BeliefMatchingDecoder {
    bp: BpDecoder,
    graph: Arc<DecodingGraph>,
    dem: DetectorErrorModel,
    m_iter: usize,
}

/// Outcome of one belief-matching decode.
#[derive(Clone, Debug)]
pub struct BeliefMatchingResult {
    pub correction: Correction,
    pub bp_converged: bool,
    /// Reweighted matching problem, present when matching ran.
    pub matching: Option<ReweightedShot>,
}

/// The per-shot matching stage of belief-matching, kept so it can be timed
/// separately.
#[derive(Clone, Debug)]
pub struct ReweightedShot {
    pub decoder: MatchingDecoder,
    pub syndrome: Syndrome,
    preselected: Correction,
}

impl ReweightedShot {
    /// Edges put in the correction before matching, with their total
    /// (negative) weight.
    pub fn preselected(&self) -> &Correction {
        &self.preselected
    }

    pub fn decode(&self) -> Result<Correction> {
        self.decode_with(&mut MatchingScratch::default())
    }

    pub fn decode_with(&self, scratch: &mut MatchingScratch) -> Result<Correction> {
        let mut c = self.decoder.decode_with(&self.syndrome, scratch)?;
        c.e_c ^= &self.preselected.e_c;
        c.lambda_c ^= &self.preselected.lambda_c;
        c.weight += self.preselected.weight;
        Ok(c)
    }
}

impl BeliefMatchingDecoder {
    pub fn new(dem: &DetectorErrorModel, graph: &DecodingGraph, m_iter: usize) -> Result<Self> {
        if m_iter == 0 {
            return parameter("m_iter must be at least 1");
        }
        if graph.n_mechanisms() != dem.n_mechanisms() {
            return parameter("graph was not built from this model");
        }
        Ok(BeliefMatchingDecoder {
            bp: BpDecoder::new(dem),
            graph: Arc::new(graph.clone()),
            dem: dem.clone(),
            m_iter,
        })
    }

    pub fn m_iter(&self) -> usize {
        self.m_iter
    }

    pub fn new_state(&self) -> BpState {
        self.bp.new_state()
    }

    /// Builds the matching stage for given per-mechanism probabilities. Edges
    /// more likely than not are put in the correction up front, their
    /// endpoints toggled in the syndrome, and their weights made positive.
    pub fn reweight(&self, s: &Syndrome, mechanism_probabilities: &[f64]) -> Result<ReweightedShot> {
        let clamped: Vec<f64> = mechanism_probabilities
            .iter()
            .map(|p| p.clamp(POSTERIOR_EPSILON, 1.0 - POSTERIOR_EPSILON))
            .collect();
        let probs = self.graph.edge_probabilities(&clamped);
        let mut syndrome = s.clone();
        let mut preselected = Correction::empty(&self.graph);
        let mut weights = Vec::with_capacity(probs.len());
        for (e, &p) in probs.iter().enumerate() {
            let w = edge_weight(p);
            if w < 0.0 {
                let edge = &self.graph.edges()[e];
                preselected.add_edge(&self.graph, e as u32);
                preselected.weight += w;
                syndrome.toggle(edge.u as usize);
                if let Some(v) = edge.v {
                    syndrome.toggle(v as usize);
                }
                weights.push(-w);
            } else {
                weights.push(w);
            }
        }
        Ok(ReweightedShot {
            decoder: MatchingDecoder::with_shared_weights(Arc::clone(&self.graph), weights)?,
            syndrome,
            preselected,
        })
    }

    pub fn decode(&self, s: &Syndrome) -> Result<BeliefMatchingResult> {
        self.decode_with(s, &mut self.new_state())
    }

    pub fn decode_with(&self, s: &Syndrome, state: &mut BpState) -> Result<BeliefMatchingResult> {
        self.bp.run(s, self.m_iter, state)?;
        self.finish(s, state)
    }

    /// Completes a decode from a state holding this decoder's BP run on `s`.
    pub fn finish(&self, s: &Syndrome, state: &BpState) -> Result<BeliefMatchingResult> {
        if state.converged() {
            let e_c = Bits::from_bools(state.hard_decision());
            let lambda_c = self.dem.homology_of(&e_c);
            return Ok(BeliefMatchingResult {
                correction: Correction {
                    e_c,
                    lambda_c,
                    weight: 0.0,
                },
                bp_converged: true,
                matching: None,
            });
        }
        let posteriors: Vec<f64> = state.chi.iter().map(|&c| c / (1.0 + c)).collect();
        let shot = self.reweight(s, &posteriors)?;
        let correction = shot.decode()?;
        Ok(BeliefMatchingResult {
            correction,
            bp_converged: false,
            matching: Some(shot),
        })
    }
}

/// Belief-matching decode of one syndrome.
pub fn belief_matching_decode(
    dem: &DetectorErrorModel,
    graph: &DecodingGraph,
    s: &Syndrome,
    m_iter: usize,
) -> Result<Correction> {
    Ok(BeliefMatchingDecoder::new(dem, graph, m_iter)?
        .decode(s)?
        .correction)
}

/// Decodes a batch on the current thread after one untimed warm-up decode and
/// returns the corrections with the mean wall-clock seconds per syndrome.
pub fn timed_batch_decode(
    decoder: &MatchingDecoder,
    syndromes: &[Syndrome],
) -> Result<(Vec<Correction>, f64)> {
    let Some(first) = syndromes.first() else {
        return parameter("timing batch is empty");
    };
    let mut scratch = MatchingScratch::default();
    decoder.decode_with(first, &mut scratch)?;
    let start = Instant::now();
    let mut out = Vec::with_capacity(syndromes.len());
    for s in syndromes {
        out.push(decoder.decode_with(s, &mut scratch)?);
    }
    let secs = start.elapsed().as_secs_f64() / syndromes.len() as f64;
    Ok((out, secs))
}

/// Timing for per-shot reweighted matching: each shot's matching stage is
/// decoded `copies` times after one warm-up decode, and the mean over all
/// decodes is returned.
pub fn timed_reweighted_decode(shots: &[ReweightedShot], copies: usize) -> Result<f64> {
    if shots.is_empty() || copies == 0 {
        return parameter("timing batch is empty");
    }
    let mut scratch = MatchingScratch::default();
    let mut total = 0.0;
    for shot in shots {
        shot.decode_with(&mut scratch)?;
        let start = Instant::now();
        for _ in 0..copies {
            shot.decode_with(&mut scratch)?;
        }
        total += start.elapsed().as_secs_f64();
    }
    Ok(total / (shots.len() * copies) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::decompose_to_graph;

    fn line() -> (DetectorErrorModel, DecodingGraph) {
        // boundary - D0 - D1 - D2 - boundary, observable on the left edge.
        let dem = DetectorErrorModel::new(
            3,
            1,
            vec![
                (vec![0], vec![0], 0.1),
                (vec![0, 1], vec![], 0.1),
                (vec![1, 2], vec![], 0.1),
                (vec![2], vec![], 0.1),
            ],
        )
        .unwrap();
        let g = decompose_to_graph(&dem).unwrap();
        (dem, g)
    }

    #[test]
    fn zero_syndrome_gives_empty_correction() {
        let (_, g) = line();
        let c = mwpm_decode(&g, &Syndrome::zeros(3)).unwrap();
        assert!(c.e_c.is_zero() && c.lambda_c.is_zero());
    }

    #[test]
    fn adjacent_pair_uses_shared_edge() {
        let (dem, g) = line();
        let s = Syndrome::from_ones(3, [0usize, 1]);
        let c = mwpm_decode(&g, &s).unwrap();
        assert_eq!(c.e_c.iter_ones().collect::<Vec<_>>(), vec![1]);
        assert_eq!(dem.syndrome_of(&c.e_c), s);
        assert!(c.lambda_c.is_zero());
    }

    #[test]
    fn single_defect_goes_to_nearest_boundary() {
        let (_, g) = line();
        let c = mwpm_decode(&g, &Syndrome::from_ones(3, [0usize])).unwrap();
        assert_eq!(c.e_c.iter_ones().collect::<Vec<_>>(), vec![0]);
        assert!(c.lambda_c.get(0));
        let c = mwpm_decode(&g, &Syndrome::from_ones(3, [1usize])).unwrap();
        assert_eq!(c.e_c.weight(), 2);
    }

    #[test]
    fn unmatched_defect_is_a_decode_error() {
        let dem = DetectorErrorModel::new(3, 0, vec![(vec![0, 1], vec![], 0.1), (vec![2], vec![], 0.1)]).unwrap();
        let g = decompose_to_graph(&dem).unwrap();
        let err = mwpm_decode(&g, &Syndrome::from_ones(3, [0usize])).unwrap_err();
        assert!(matches!(err, Error::Decode(_)));
    }

    #[test]
    fn prior_reweighting_is_identity() {
        let (dem, g) = line();
        let bm = BeliefMatchingDecoder::new(&dem, &g, 5).unwrap();
        let plain = MatchingDecoder::new(&g);
        for ones in [vec![0usize], vec![1], vec![0, 2], vec![0, 1, 2]] {
            let s = Syndrome::from_ones(3, ones);
            let shot = bm.reweight(&s, dem.priors()).unwrap();
            assert_eq!(shot.decode().unwrap(), plain.decode(&s).unwrap());
        }
    }

    #[test]
    fn confident_posterior_is_preselected() {
        let (dem, g) = line();
        let bm = BeliefMatchingDecoder::new(&dem, &g, 5).unwrap();
        let s = Syndrome::from_ones(3, [1usize, 2]);
        let shot = bm.reweight(&s, &[0.1, 0.1, 0.9, 0.1]).unwrap();
        assert!(shot.syndrome.is_zero());
        let c = shot.decode().unwrap();
        assert_eq!(c.e_c.iter_ones().collect::<Vec<_>>(), vec![2]);
        assert_eq!(dem.syndrome_of(&c.e_c), s);
    }

    #[test]
    fn converged_bp_skips_matching() {
        let (dem, g) = line();
        let bm = BeliefMatchingDecoder::new(&dem, &g, 30).unwrap();
        let r = bm.decode(&Syndrome::from_ones(3, [0usize, 1])).unwrap();
        assert!(r.bp_converged);
        assert!(r.matching.is_none());
        assert_eq!(r.correction.e_c.iter_ones().collect::<Vec<_>>(), vec![1]);
    }

    #[test]
    fn timing_returns_corrections() {
        let (_, g) = line();
        let m = MatchingDecoder::new(&g);
        let batch = vec![Syndrome::zeros(3); 100];
        let (out, secs) = timed_batch_decode(&m, &batch).unwrap();
        assert_eq!(out.len(), 100);
        assert!(out.iter().all(|c| c.e_c.is_zero()));
        assert!(secs >= 0.0);
        assert!(timed_batch_decode(&m, &[]).is_err());
    }
}
