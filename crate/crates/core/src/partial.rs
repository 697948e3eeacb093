//! BP as a partial decoder ahead of matching.

use crate::bits::{Bits, Syndrome};
use crate::bp::{BpDecoder, BpState};
use crate::dem::DetectorErrorModel;
use crate::error::{parameter, Error, Result};
use crate::graph::DecodingGraph;
use crate::mwpm::{Correction, MatchingDecoder, MatchingScratch};

pub const DEFAULT_M_ITER: usize = 30;
pub const DEFAULT_T_BP: f64 = 0.9;

/// Result of the BP stage.
#[derive(Clone, Debug, PartialEq)]
pub struct PartialOutcome {
    pub e_p: Bits,
    pub s_p: Syndrome,
    pub lambda_p: Bits,
    pub converged: bool,
    pub iterations_used: usize,
    pub original_weight: usize,
    pub reduced_weight: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecodeResult {
    pub homology: Bits,
    pub second_stage_invoked: bool,
    pub partial: PartialOutcome,
    /// Second-stage correction, when it ran.
    pub correction: Option<Correction>,
}

/// Whether posterior odds `chi` clear the threshold `p' >= t`. Evaluated as
/// `chi·(1-t) >= t`, which avoids rounding `chi/(1+chi)` up to 1.
#[inline]
pub fn meets_threshold(chi: f64, t_bp: f64) -> bool {
    chi * (1.0 - t_bp) >= t_bp
}

fn check_params(m_iter: usize, t_bp: f64) -> Result<()> {
    if m_iter == 0 {
        return parameter("m_iter must be at least 1");
    }
    if !(0.5..=1.0).contains(&t_bp) {
        return parameter(format!("t_bp must lie in [0.5, 1], got {t_bp}"));
    }
    Ok(())
}

/// BP followed by posterior thresholding.
#[derive(Clone, Debug)]
pub struct PartialDecoder {
    bp: BpDecoder,
    dem: DetectorErrorModel,
    m_iter: usize,
    t_bp: f64,
}

impl PartialDecoder {
    pub fn new(dem: &DetectorErrorModel, m_iter: usize, t_bp: f64) -> Result<Self> {
        check_params(m_iter, t_bp)?;
        Ok(PartialDecoder {
            bp: BpDecoder::new(dem),
            dem: dem.clone(),
            m_iter,
            t_bp,
        })
    }

    pub fn dem(&self) -> &DetectorErrorModel {
        &self.dem
    }

    pub fn new_state(&self) -> BpState {
        self.bp.new_state()
    }

    /// On convergence the partial correction is BP's hard decision, so the
    /// updated syndrome is empty. Otherwise it is every mechanism whose
    /// posterior reaches `t_bp`.
    pub fn decode_with(&self, s: &Syndrome, state: &mut BpState) -> Result<PartialOutcome> {
        self.bp.run(s, self.m_iter, state)?;
        Ok(self.finish(s, state))
    }

    pub fn m_iter(&self) -> usize {
        self.m_iter
    }

    pub fn t_bp(&self) -> f64 {
        self.t_bp
    }

    /// Thresholding step on a state holding this decoder's BP run on `s`.
    pub fn finish(&self, s: &Syndrome, state: &BpState) -> PartialOutcome {
        let converged = state.converged();
        let n = self.dem.n_mechanisms();
        let mut e_p = Bits::zeros(n);
        if converged {
            for (k, &e) in state.hard_decision().iter().enumerate() {
                if e {
                    e_p.set(k, true);
                }
            }
        } else {
            for (k, &chi) in state.chi.iter().enumerate() {
                if meets_threshold(chi, self.t_bp) {
                    e_p.set(k, true);
                }
            }
        }
        let mut s_p = s.clone();
        let mut lambda_p = Bits::zeros(self.dem.n_observables());
        for k in e_p.iter_ones() {
            for &d in self.dem.detectors_of(k) {
                s_p.toggle(d as usize);
            }
            for &o in self.dem.observables_of(k) {
                lambda_p.toggle(o as usize);
            }
        }
        let reduced_weight = s_p.weight();
        PartialOutcome {
            e_p,
            s_p,
            lambda_p,
            converged,
            iterations_used: state.iteration,
            original_weight: s.weight(),
            reduced_weight,
        }
    }

    pub fn decode(&self, s: &Syndrome) -> Result<PartialOutcome> {
        self.decode_with(s, &mut self.new_state())
    }
}

pub fn partial_decode(
    dem: &DetectorErrorModel,
    s: &Syndrome,
    m_iter: usize,
    t_bp: f64,
) -> Result<PartialOutcome> {
    PartialDecoder::new(dem, m_iter, t_bp)?.decode(s)
}

/// Scratch space for one decoding thread.
#[derive(Clone, Debug)]
pub struct Workspace {
    pub bp: BpState,
    pub matching: MatchingScratch,
}

/// Partial decoder followed by matching on the static graph.
#[derive(Clone, Debug)]
pub struct TwoStageDecoder {
    partial: PartialDecoder,
    matcher: MatchingDecoder,
}

impl TwoStageDecoder {
    pub fn new(dem: &DetectorErrorModel, graph: &DecodingGraph, m_iter: usize, t_bp: f64) -> Result<Self> {
        if graph.n_mechanisms() != dem.n_mechanisms() || graph.n_detectors() != dem.n_detectors() {
            return parameter("graph was not built from this model");
        }
        Ok(TwoStageDecoder {
            partial: PartialDecoder::new(dem, m_iter, t_bp)?,
            matcher: MatchingDecoder::new(graph),
        })
    }

    pub fn partial(&self) -> &PartialDecoder {
        &self.partial
    }

    pub fn matcher(&self) -> &MatchingDecoder {
        &self.matcher
    }

    pub fn workspace(&self) -> Workspace {
        Workspace {
            bp: self.partial.new_state(),
            matching: MatchingScratch::default(),
        }
    }

    /// Runs the partial decoder and, if the updated syndrome is not empty,
    /// matching on it. Checks that the combined correction reproduces `s`.
    pub fn decode_with(&self, s: &Syndrome, ws: &mut Workspace) -> Result<DecodeResult> {
        self.partial.bp.run(s, self.partial.m_iter, &mut ws.bp)?;
        self.finish(s, &ws.bp, &mut ws.matching)
    }

    /// Completes a decode from a state holding this decoder's BP run on `s`.
    pub fn finish(
        &self,
        s: &Syndrome,
        state: &BpState,
        scratch: &mut MatchingScratch,
    ) -> Result<DecodeResult> {
        let partial = self.partial.finish(s, state);
        if partial.s_p.is_zero() {
            return Ok(DecodeResult {
                homology: partial.lambda_p.clone(),
                second_stage_invoked: false,
                partial,
                correction: None,
            });
        }
        let correction = self.matcher.decode_with(&partial.s_p, scratch)?;
        let dem = self.partial.dem();
        let combined = &partial.e_p ^ &correction.e_c;
        if dem.syndrome_of(&combined) != *s {
            return Err(Error::Decode(
                "combined correction does not reproduce the syndrome".into(),
            ));
        }
        Ok(DecodeResult {
            homology: &partial.lambda_p ^ &correction.lambda_c,
            second_stage_invoked: true,
            partial,
            correction: Some(correction),
        })
    }

    pub fn decode(&self, s: &Syndrome) -> Result<DecodeResult> {
        self.decode_with(s, &mut self.workspace())
    }
}

pub fn two_stage_decode(
    dem: &DetectorErrorModel,
    graph: &DecodingGraph,
    s: &Syndrome,
    m_iter: usize,
    t_bp: f64,
) -> Result<DecodeResult> {
    TwoStageDecoder::new(dem, graph, m_iter, t_bp)?.decode(s)
}
