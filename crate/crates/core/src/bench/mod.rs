//! Monte Carlo experiments and the metrics derived from them.
//!
//! Shots are processed in chunks: each chunk is sampled and decoded in
//! parallel, then folded into the running totals in shot order, so every
//! non-timing output is a function of the configuration alone.

mod report;
mod stats;
mod threshold;

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Serialize, Serializer};

pub use report::{errors_csv, histograms_csv, reports_csv, reports_json, thresholds_csv, CSV_HEADER};
pub use stats::{wilson_interval, Estimate, Fingerprint, Z_95};
pub use threshold::{
    crossings, estimate_threshold, ThresholdFit, ThresholdOptions, ThresholdPoint, ANSATZ,
    DEFAULT_BOOTSTRAP, DEFAULT_WINDOW,
};

use crate::bits::{Bits, Syndrome};
use crate::bp::{BpDecoder, BpState};
use crate::circuit::Circuit;
use crate::dem::{extract_dem, DetectorErrorModel};
use crate::error::{parameter, Error, Result};
use crate::frame::{shots_for, FrameSampler, Shot, MAX_DEFAULT_SHOTS};
use crate::graph::{decompose_to_graph, DecodingGraph};
use crate::mwpm::{
    timed_batch_decode, timed_reweighted_decode, BeliefMatchingDecoder, MatchingDecoder,
    MatchingScratch, ReweightedShot,
};
use crate::partial::{TwoStageDecoder, DEFAULT_M_ITER, DEFAULT_T_BP};
use crate::surface::build_memory_circuit;

/// Shots per parallel chunk.
pub const CHUNK: u64 = 4096;
/// Syndromes per timing batch.
pub const DEFAULT_TIMING_BATCH: usize = 10_000;
/// Distinct reweighted problems used to time belief-matching.
pub const REWEIGHTED_TIMING_SHOTS: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DecoderKind {
    Mwpm,
    BpMwpm,
    BeliefMatching,
}

impl DecoderKind {
    pub const ALL: [DecoderKind; 3] = [
        DecoderKind::Mwpm,
        DecoderKind::BpMwpm,
        DecoderKind::BeliefMatching,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DecoderKind::Mwpm => "mwpm",
            DecoderKind::BpMwpm => "bp+mwpm",
            DecoderKind::BeliefMatching => "belief-matching",
        }
    }

    pub fn uses_bp(self) -> bool {
        self != DecoderKind::Mwpm
    }
}

impl fmt::Display for DecoderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DecoderKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DecoderKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                Error::Parameter(format!(
                    "unknown decoder {s:?}, expected mwpm, bp+mwpm or belief-matching"
                ))
            })
    }
}

impl Serialize for DecoderKind {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub distance: usize,
    pub rounds: usize,
    pub p_phys: f64,
    pub decoder: DecoderKind,
    pub m_iter: usize,
    pub t_bp: f64,
    pub shots: u64,
    pub seed: u64,
    /// Syndromes in the second-stage timing batch; 0 disables timing.
    pub timing_batch: usize,
}

impl ExperimentConfig {
    /// Defaults: `rounds = distance`, `m_iter = 30`, `t_bp = 0.9`, the
    /// `min(10⁶, ⌈1/p²⌉)` shot policy, seed 0 and timing batches of 10⁴.
    pub fn new(distance: usize, p_phys: f64, decoder: DecoderKind) -> Self {
        ExperimentConfig {
            distance,
            rounds: distance,
            p_phys,
            decoder,
            m_iter: DEFAULT_M_ITER,
            t_bp: DEFAULT_T_BP,
            shots: shots_for(p_phys).unwrap_or(MAX_DEFAULT_SHOTS),
            seed: 0,
            timing_batch: DEFAULT_TIMING_BATCH,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.distance < 3 || self.distance.is_multiple_of(2) {
            return parameter(format!("distance must be odd and at least 3, got {}", self.distance));
        }
        if self.rounds == 0 {
            return parameter("rounds must be at least 1");
        }
        if !(0.0..0.5).contains(&self.p_phys) {
            return parameter(format!("p must lie in [0, 0.5), got {}", self.p_phys));
        }
        if self.shots == 0 {
            return parameter("shots must be at least 1");
        }
        if self.decoder.uses_bp() && self.m_iter == 0 {
            return parameter("m_iter must be at least 1");
        }
        if self.decoder == DecoderKind::BpMwpm && !(0.5..=1.0).contains(&self.t_bp) {
            return parameter(format!("t_bp must lie in [0.5, 1], got {}", self.t_bp));
        }
        Ok(())
    }

    fn same_shots(&self, other: &ExperimentConfig) -> bool {
        self.distance == other.distance
            && self.rounds == other.rounds
            && self.p_phys == other.p_phys
            && self.shots == other.shots
            && self.seed == other.seed
    }
}

/// Circuit, model, matching graph and sampler for one `(d, rounds, p)`.
#[derive(Clone, Debug)]
pub struct Pipeline {
    circuit: Circuit,
    dem: DetectorErrorModel,
    graph: DecodingGraph,
    sampler: FrameSampler,
}

impl Pipeline {
    pub fn build(distance: usize, rounds: usize, p_phys: f64) -> Result<Self> {
        let circuit = build_memory_circuit(distance, rounds, p_phys)?;
        let dem = extract_dem(&circuit)?;
        let graph = decompose_to_graph(&dem)?;
        let sampler = FrameSampler::new(&circuit)?;
        Ok(Pipeline {
            circuit,
            dem,
            graph,
            sampler,
        })
    }

    pub fn for_config(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        Self::build(cfg.distance, cfg.rounds, cfg.p_phys)
    }

    pub fn circuit(&self) -> &Circuit {
        &self.circuit
    }

    pub fn dem(&self) -> &DetectorErrorModel {
        &self.dem
    }

    pub fn graph(&self) -> &DecodingGraph {
        &self.graph
    }

    pub fn sampler(&self) -> &FrameSampler {
        &self.sampler
    }
}

/// What one decoder did with one shot.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShotOutcome {
    /// `None` when decoding failed.
    pub homology: Option<Bits>,
    pub logical_error: bool,
    pub original_weight: usize,
    /// Weight of the syndrome handed to matching.
    pub reduced_weight: usize,
    pub bp_converged: Option<bool>,
    pub second_stage_invoked: bool,
}

impl ShotOutcome {
    fn fingerprint(&self, f: &mut Fingerprint) {
        match &self.homology {
            Some(h) => {
                f.write(&[1]);
                f.write(&h.to_bytes_le());
            }
            None => f.write(&[0]),
        }
        f.write(&(self.original_weight as u32).to_le_bytes());
        f.write(&(self.reduced_weight as u32).to_le_bytes());
        f.write(&[self.bp_converged.map_or(2, u8::from), self.second_stage_invoked as u8]);
    }
}

/// Second-stage timing, excluded from the determinism contract.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Timing {
    pub batch: usize,
    pub second_stage_seconds_per_shot: f64,
    /// Mean BP wall time per shot over all shots, when BP ran.
    pub bp_seconds_per_shot: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricsReport {
    pub config: ExperimentConfig,
    pub n_detectors: usize,
    pub shots: u64,
    pub decode_failures: u64,
    pub logical_errors: u64,
    /// Over successfully decoded shots.
    pub logical_error_rate: Estimate,
    pub nonzero_shots: u64,
    /// Fraction of nonzero-syndrome shots where BP converged; `None` when no
    /// shot had a nonzero syndrome or the decoder has no BP stage.
    pub convergence_probability: Option<Estimate>,
    pub second_stage_invocations: u64,
    /// Mean of reduced/original weight over nonzero-syndrome shots.
    pub syndrome_reduction_ratio: Option<f64>,
    pub mean_original_weight: f64,
    pub mean_reduced_weight: f64,
    /// Mean weight reaching matching times the bits of one detector address.
    pub bandwidth_bits: f64,
    pub histogram_before: Vec<u64>,
    pub histogram_after: Vec<u64>,
    pub outcome_digest: String,
    pub timing: Option<Timing>,
}

impl MetricsReport {
    /// The report with timing removed, for determinism comparisons.
    pub fn without_timing(&self) -> MetricsReport {
        MetricsReport {
            timing: None,
            ..self.clone()
        }
    }
}

/// Bits needed to address one of `n` detectors.
pub fn address_bits(n: usize) -> u32 {
    if n <= 1 {
        0
    } else {
        usize::BITS - (n - 1).leading_zeros()
    }
}

enum Engine {
    Mwpm(MatchingDecoder),
    BpMwpm(TwoStageDecoder),
    Belief(BeliefMatchingDecoder),
}

/// Per-thread decoding state.
struct Scratch {
    bp: Vec<BpState>,
    matching: MatchingScratch,
}

/// Outcomes of one shot under every configuration, plus material for the
/// timing batches.
struct Decoded {
    outcomes: Vec<ShotOutcome>,
    bp_seconds: Vec<f64>,
    second_stage: Vec<Option<Syndrome>>,
}

/// Running totals for one configuration.
#[derive(Default)]
struct Totals {
    shots: u64,
    failures: u64,
    errors: u64,
    nonzero: u64,
    converged_nonzero: u64,
    invocations: u64,
    ratio_sum: f64,
    original_sum: u64,
    reduced_sum: u64,
    before: Vec<u64>,
    after: Vec<u64>,
    digest: Fingerprint,
    bp_seconds: f64,
    timing_syndromes: Vec<Syndrome>,
    /// Original syndromes of the timing-batch shots that needed matching.
    timing_unconverged: Vec<Syndrome>,
    timing_seen: usize,
}

fn bump(h: &mut Vec<u64>, w: usize) {
    if h.len() <= w {
        h.resize(w + 1, 0);
    }
    h[w] += 1;
}

/// Several configurations decoded on one shared shot stream.
pub struct Experiment<'a> {
    pipeline: &'a Pipeline,
    configs: Vec<ExperimentConfig>,
    engines: Vec<Engine>,
    bp: BpDecoder,
    /// Distinct BP iteration caps, and the index into them per config.
    bp_caps: Vec<usize>,
    bp_slot: Vec<Option<usize>>,
}

impl<'a> Experiment<'a> {
    /// All configurations must share distance, rounds, p, shots and seed.
    pub fn new(pipeline: &'a Pipeline, configs: &[ExperimentConfig]) -> Result<Self> {
        let Some(first) = configs.first() else {
            return parameter("no configurations");
        };
        let mut engines = Vec::new();
        let mut bp_caps: Vec<usize> = Vec::new();
        let mut bp_slot = Vec::new();
        for cfg in configs {
            cfg.validate()?;
            if !cfg.same_shots(first) {
                return parameter("configurations in one experiment must share the shot stream");
            }
            let (dem, graph) = (&pipeline.dem, &pipeline.graph);
            engines.push(match cfg.decoder {
                DecoderKind::Mwpm => Engine::Mwpm(MatchingDecoder::new(graph)),
                DecoderKind::BpMwpm => {
                    Engine::BpMwpm(TwoStageDecoder::new(dem, graph, cfg.m_iter, cfg.t_bp)?)
                }
                DecoderKind::BeliefMatching => {
                    Engine::Belief(BeliefMatchingDecoder::new(dem, graph, cfg.m_iter)?)
                }
            });
            bp_slot.push(cfg.decoder.uses_bp().then(|| {
                bp_caps.iter().position(|&m| m == cfg.m_iter).unwrap_or_else(|| {
                    bp_caps.push(cfg.m_iter);
                    bp_caps.len() - 1
                })
            }));
        }
        Ok(Experiment {
            pipeline,
            configs: configs.to_vec(),
            engines,
            bp: BpDecoder::new(&pipeline.dem),
            bp_caps,
            bp_slot,
        })
    }

    fn scratch(&self) -> Scratch {
        Scratch {
            bp: self.bp_caps.iter().map(|_| self.bp.new_state()).collect(),
            matching: MatchingScratch::default(),
        }
    }

    fn decode_shot(&self, shot: &Shot, index: u64, ws: &mut Scratch) -> Decoded {
        let s = &shot.syndrome;
        let mut bp_seconds = vec![0.0; self.bp_caps.len()];
        let mut bp_ok = vec![true; self.bp_caps.len()];
        for (slot, &m_iter) in self.bp_caps.iter().enumerate() {
            let start = Instant::now();
            bp_ok[slot] = self.bp.run(s, m_iter, &mut ws.bp[slot]).is_ok();
            bp_seconds[slot] = start.elapsed().as_secs_f64();
        }
        let mut outcomes = Vec::with_capacity(self.engines.len());
        let mut second_stage = Vec::with_capacity(self.engines.len());
        for (i, engine) in self.engines.iter().enumerate() {
            let timed = (index as usize) < self.configs[i].timing_batch;
            let original_weight = s.weight();
            let state = self.bp_slot[i].map(|slot| (&ws.bp[slot], bp_ok[slot]));
            let result: Result<(Bits, usize, Option<bool>, bool, Option<Syndrome>)> = match engine {
                Engine::Mwpm(m) => m.decode_with(s, &mut ws.matching).map(|c| {
                    (c.lambda_c, original_weight, None, original_weight > 0, timed.then(|| s.clone()))
                }),
                Engine::BpMwpm(t) => {
                    let (state, ok) = state.expect("bp decoder has a state");
                    if !ok {
                        Err(Error::Decode("belief propagation failed".into()))
                    } else {
                        t.finish(s, state, &mut ws.matching).map(|r| {
                            let reduced = r.partial.reduced_weight;
                            let syn = timed.then(|| r.partial.s_p.clone());
                            (r.homology, reduced, Some(r.partial.converged), r.second_stage_invoked, syn)
                        })
                    }
                }
                Engine::Belief(b) => {
                    let (state, ok) = state.expect("bp decoder has a state");
                    if !ok {
                        Err(Error::Decode("belief propagation failed".into()))
                    } else {
                        b.finish(s, state).map(|r| {
                            let invoked = !r.bp_converged;
                            let reduced = if invoked { original_weight } else { 0 };
                            let syn = (timed && invoked).then(|| s.clone());
                            (r.correction.lambda_c, reduced, Some(r.bp_converged), invoked, syn)
                        })
                    }
                }
            };
            let outcome = match result {
                Ok((homology, reduced_weight, bp_converged, invoked, syn)) => {
                    second_stage.push(syn);
                    ShotOutcome {
                        logical_error: homology != shot.true_homology,
                        homology: Some(homology),
                        original_weight,
                        reduced_weight,
                        bp_converged,
                        second_stage_invoked: invoked,
                    }
                }
                Err(_) => {
                    second_stage.push(None);
                    ShotOutcome {
                        homology: None,
                        logical_error: false,
                        original_weight,
                        reduced_weight: original_weight,
                        bp_converged: None,
                        second_stage_invoked: false,
                    }
                }
            };
            outcomes.push(outcome);
        }
        Decoded {
            outcomes,
            bp_seconds,
            second_stage,
        }
    }

    /// Decodes `shots`, numbered from `first_index`, in parallel; results
    /// are in shot order.
    pub fn decode_shots(&self, shots: &[Shot], first_index: u64) -> Vec<Vec<ShotOutcome>> {
        self.decode_chunk(shots, first_index)
            .into_iter()
            .map(|d| d.outcomes)
            .collect()
    }

    fn decode_chunk(&self, shots: &[Shot], first_index: u64) -> Vec<Decoded> {
        shots
            .par_iter()
            .enumerate()
            .map_init(
                || self.scratch(),
                |ws, (i, shot)| self.decode_shot(shot, first_index + i as u64, ws),
            )
            .collect()
    }

    /// Samples and decodes the configured number of shots.
    pub fn run(&self) -> Result<Vec<MetricsReport>> {
        self.run_observed(|_, _, _| {})
    }

    /// As [`Experiment::run`], calling `observe(shot index, config index,
    /// outcome)` for every outcome in shot order.
    pub fn run_observed(
        &self,
        mut observe: impl FnMut(u64, usize, &ShotOutcome),
    ) -> Result<Vec<MetricsReport>> {
        let cfg = &self.configs[0];
        let mut totals: Vec<Totals> = self.configs.iter().map(|_| Totals::default()).collect();
        let mut start = 0;
        while start < cfg.shots {
            let count = CHUNK.min(cfg.shots - start);
            let shots = self.pipeline.sampler.sample_range(cfg.seed, start, count);
            self.fold(&shots, start, &mut totals, &mut observe);
            start += count;
        }
        self.finish(totals)
    }

    /// Decodes a pre-sampled shot stream instead of sampling.
    pub fn replay(&self, shots: &[Shot]) -> Result<Vec<MetricsReport>> {
        let dem = &self.pipeline.dem;
        if shots.iter().any(|s| {
            s.syndrome.len() != dem.n_detectors() || s.true_homology.len() != dem.n_observables()
        }) {
            return parameter("replayed shots do not match the model dimensions");
        }
        let mut totals: Vec<Totals> = self.configs.iter().map(|_| Totals::default()).collect();
        for (c, chunk) in shots.chunks(CHUNK as usize).enumerate() {
            self.fold(chunk, c as u64 * CHUNK, &mut totals, &mut |_, _, _| {});
        }
        self.finish(totals)
    }

    fn fold(
        &self,
        shots: &[Shot],
        first_index: u64,
        totals: &mut [Totals],
        observe: &mut impl FnMut(u64, usize, &ShotOutcome),
    ) {
        for (j, decoded) in self.decode_chunk(shots, first_index).into_iter().enumerate() {
            let index = first_index + j as u64;
            for (i, (o, syn)) in decoded.outcomes.iter().zip(decoded.second_stage).enumerate() {
                observe(index, i, o);
                let t = &mut totals[i];
                t.shots += 1;
                o.fingerprint(&mut t.digest);
                if let Some(slot) = self.bp_slot[i] {
                    t.bp_seconds += decoded.bp_seconds[slot];
                }
                if o.homology.is_none() {
                    t.failures += 1;
                    continue;
                }
                t.errors += o.logical_error as u64;
                t.invocations += o.second_stage_invoked as u64;
                t.original_sum += o.original_weight as u64;
                t.reduced_sum += o.reduced_weight as u64;
                bump(&mut t.before, o.original_weight);
                bump(&mut t.after, o.reduced_weight);
                if o.original_weight > 0 {
                    t.nonzero += 1;
                    t.converged_nonzero += (o.bp_converged == Some(true)) as u64;
                    t.ratio_sum += o.reduced_weight as f64 / o.original_weight as f64;
                }
                if (index as usize) < self.configs[i].timing_batch {
                    t.timing_seen += 1;
                    if let Some(syn) = syn {
                        match self.engines[i] {
                            Engine::Belief(_) => t.timing_unconverged.push(syn),
                            _ => t.timing_syndromes.push(syn),
                        }
                    }
                }
            }
        }
    }

    fn finish(&self, totals: Vec<Totals>) -> Result<Vec<MetricsReport>> {
        let n_det = self.pipeline.dem.n_detectors();
        let bits = address_bits(n_det) as f64;
        let mut out = Vec::with_capacity(totals.len());
        for ((cfg, engine), t) in self.configs.iter().zip(&self.engines).zip(totals) {
            let decoded = t.shots - t.failures;
            let mean = |sum: u64| if decoded == 0 { 0.0 } else { sum as f64 / decoded as f64 };
            let timing = if t.timing_seen > 0 {
                Some(self.time_second_stage(engine, &t)?)
            } else {
                None
            };
            out.push(MetricsReport {
                config: ExperimentConfig {
                    shots: t.shots,
                    ..cfg.clone()
                },
                n_detectors: n_det,
                shots: t.shots,
                decode_failures: t.failures,
                logical_errors: t.errors,
                logical_error_rate: Estimate::proportion(t.errors, decoded).unwrap_or(Estimate {
                    value: 0.0,
                    ci_low: 0.0,
                    ci_high: 1.0,
                }),
                nonzero_shots: t.nonzero,
                convergence_probability: if cfg.decoder.uses_bp() {
                    Estimate::proportion(t.converged_nonzero, t.nonzero)
                } else {
                    None
                },
                second_stage_invocations: t.invocations,
                syndrome_reduction_ratio: (cfg.decoder == DecoderKind::BpMwpm && t.nonzero > 0)
                    .then(|| t.ratio_sum / t.nonzero as f64),
                mean_original_weight: mean(t.original_sum),
                mean_reduced_weight: mean(t.reduced_sum),
                bandwidth_bits: mean(t.reduced_sum) * bits,
                histogram_before: t.before,
                histogram_after: t.after,
                outcome_digest: t.digest.hex(),
                timing: timing.map(|mut tm| {
                    if cfg.decoder.uses_bp() && t.shots > 0 {
                        tm.bp_seconds_per_shot = Some(t.bp_seconds / t.shots as f64);
                    }
                    tm
                }),
            });
        }
        Ok(out)
    }

    /// Times the second stage on the batch syndromes collected in `t`, on the
    /// current thread.
    fn time_second_stage(&self, engine: &Engine, t: &Totals) -> Result<Timing> {
        let batch = t.timing_seen;
        let secs = match engine {
            Engine::Mwpm(m) => timed_batch_decode(m, &t.timing_syndromes)?.1,
            Engine::BpMwpm(two) => timed_batch_decode(two.matcher(), &t.timing_syndromes)?.1,
            Engine::Belief(b) => {
                if t.timing_unconverged.is_empty() {
                    0.0
                } else {
                    let mut state = b.new_state();
                    let mut problems: Vec<ReweightedShot> = Vec::new();
                    for s in t.timing_unconverged.iter().take(REWEIGHTED_TIMING_SHOTS) {
                        if let Some(shot) = b.decode_with(s, &mut state)?.matching {
                            problems.push(shot);
                        }
                    }
                    let copies = batch.div_ceil(problems.len()).max(1);
                    let per_match = timed_reweighted_decode(&problems, copies)?;
                    per_match * t.timing_unconverged.len() as f64 / batch as f64
                }
            }
        };
        Ok(Timing {
            batch,
            second_stage_seconds_per_shot: secs,
            bp_seconds_per_shot: None,
        })
    }
}

/// Builds the pipeline for `cfg` and runs it.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<MetricsReport> {
    let pipeline = Pipeline::for_config(cfg)?;
    Ok(Experiment::new(&pipeline, std::slice::from_ref(cfg))?
        .run()?
        .remove(0))
}

/// Runs configurations, sharing pipelines and shot streams where possible.
/// Reports come back in input order.
pub fn run_experiments(configs: &[ExperimentConfig]) -> Result<Vec<MetricsReport>> {
    let mut out: Vec<Option<MetricsReport>> = vec![None; configs.len()];
    let mut done = vec![false; configs.len()];
    for i in 0..configs.len() {
        if done[i] {
            continue;
        }
        let group: Vec<usize> = (i..configs.len())
            .filter(|&j| !done[j] && configs[j].same_shots(&configs[i]))
            .collect();
        let cfgs: Vec<ExperimentConfig> = group.iter().map(|&j| configs[j].clone()).collect();
        let pipeline = Pipeline::for_config(&cfgs[0])?;
        let reports = Experiment::new(&pipeline, &cfgs)?.run()?;
        for (j, r) in group.into_iter().zip(reports) {
            done[j] = true;
            out[j] = Some(r);
        }
    }
    Ok(out.into_iter().map(|r| r.expect("every config is run")).collect())
}

/// BP convergence probability per `(d, p)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergencePoint {
    pub distance: usize,
    pub p_phys: f64,
    pub nonzero_shots: u64,
    /// `None` when no shot had a nonzero syndrome.
    pub probability: Option<Estimate>,
}

pub fn convergence_curve(configs: &[ExperimentConfig]) -> Result<Vec<ConvergencePoint>> {
    let Some(first) = configs.first() else {
        return parameter("no configurations");
    };
    for c in configs {
        if !c.decoder.uses_bp() {
            return parameter("convergence needs a decoder with a BP stage");
        }
        if c.m_iter != first.m_iter || c.decoder != first.decoder || c.t_bp != first.t_bp {
            return parameter("convergence configurations must share decoder parameters");
        }
    }
    Ok(run_experiments(configs)?
        .into_iter()
        .map(|r| ConvergencePoint {
            distance: r.config.distance,
            p_phys: r.config.p_phys,
            nonzero_shots: r.nonzero_shots,
            probability: r.convergence_probability,
        })
        .collect())
}

/// Syndrome weight histograms before and after partial decoding.
pub fn weight_histograms(cfg: &ExperimentConfig) -> Result<(Vec<u64>, Vec<u64>)> {
    if cfg.decoder != DecoderKind::BpMwpm {
        return parameter("weight histograms need the bp+mwpm decoder");
    }
    let r = run_experiment(cfg)?;
    Ok((r.histogram_before, r.histogram_after))
}

/// Points of one decoder's reports, for threshold fitting.
pub fn threshold_points(reports: &[MetricsReport], decoder: DecoderKind) -> Vec<ThresholdPoint> {
    reports
        .iter()
        .filter(|r| r.config.decoder == decoder)
        .map(|r| ThresholdPoint {
            distance: r.config.distance,
            p: r.config.p_phys,
            logical_errors: r.logical_errors,
            shots: r.shots - r.decode_failures,
        })
        .collect()
}

/// Full cross product of distances, error rates and decoders, followed by a
/// threshold fit per decoder. `template` supplies the remaining parameters;
/// shots follow the default policy, capped at `shot_cap` when given.
pub fn sweep(
    distances: &[usize],
    ps: &[f64],
    decoders: &[DecoderKind],
    template: &ExperimentConfig,
    shot_cap: Option<u64>,
    opts: &ThresholdOptions,
) -> Result<(Vec<MetricsReport>, Vec<(DecoderKind, Result<ThresholdFit>)>)> {
    if distances.is_empty() || ps.is_empty() || decoders.is_empty() {
        return parameter("sweep grids must be nonempty");
    }
    let mut configs = Vec::new();
    for &d in distances {
        for &p in ps {
            let shots = shots_for(p)?;
            for &decoder in decoders {
                configs.push(ExperimentConfig {
                    distance: d,
                    rounds: d,
                    p_phys: p,
                    decoder,
                    shots: shot_cap.map_or(shots, |c| shots.min(c)),
                    ..template.clone()
                });
            }
        }
    }
    for c in &configs {
        c.validate()?;
    }
    let reports = run_experiments(&configs)?;
    let fits = decoders
        .iter()
        .map(|&k| (k, estimate_threshold(&threshold_points(&reports, k), opts)))
        .collect();
    Ok((reports, fits))
}
