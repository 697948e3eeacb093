//! Parallel product-sum belief propagation in the odds domain.

use crate::bits::{Bits, Syndrome};
use crate::dem::DetectorErrorModel;
use crate::error::{parameter, Error, Result};

pub const ODDS_MIN: f64 = 1e-300;
pub const ODDS_MAX: f64 = 1e300;
/// Distance kept between `(1-Q)/(1+Q)` and ±1.
pub const RATIO_MARGIN: f64 = 1e-15;

#[inline]
fn clamp_odds(x: f64) -> f64 {
    x.clamp(ODDS_MIN, ODDS_MAX)
}

/// Check and error neighbourhoods of a check matrix. Tanner edges are numbered
/// check-major: the edges of check `i` are `check_ptr[i]..check_ptr[i+1]`, in
/// ascending error order.
#[derive(Clone, Debug)]
pub struct TannerGraph {
    n_checks: usize,
    n_errors: usize,
    check_ptr: Vec<usize>,
    edge_error: Vec<u32>,
    edge_check: Vec<u32>,
    error_ptr: Vec<usize>,
    /// Edge ids of each error, in ascending check order.
    error_edges: Vec<u32>,
}

impl TannerGraph {
    pub fn new(dem: &DetectorErrorModel) -> Self {
        let rows = dem.h().rows();
        let n_checks = dem.n_detectors();
        let n_errors = dem.n_mechanisms();
        let mut check_ptr = Vec::with_capacity(n_checks + 1);
        let mut edge_error = Vec::new();
        let mut edge_check = Vec::new();
        check_ptr.push(0);
        for (i, row) in rows.iter().enumerate() {
            edge_error.extend_from_slice(row);
            edge_check.extend(std::iter::repeat_n(i as u32, row.len()));
            check_ptr.push(edge_error.len());
        }
        let mut degree = vec![0usize; n_errors + 1];
        for &k in &edge_error {
            degree[k as usize + 1] += 1;
        }
        let mut error_ptr = degree;
        for k in 0..n_errors {
            error_ptr[k + 1] += error_ptr[k];
        }
        let mut fill = error_ptr.clone();
        let mut error_edges = vec![0u32; edge_error.len()];
        for (e, &k) in edge_error.iter().enumerate() {
            error_edges[fill[k as usize]] = e as u32;
            fill[k as usize] += 1;
        }
        TannerGraph {
            n_checks,
            n_errors,
            check_ptr,
            edge_error,
            edge_check,
            error_ptr,
            error_edges,
        }
    }

    pub fn n_checks(&self) -> usize {
        self.n_checks
    }

    pub fn n_errors(&self) -> usize {
        self.n_errors
    }

    pub fn n_edges(&self) -> usize {
        self.edge_error.len()
    }

    /// Error neighbourhood of check `i`, ascending.
    pub fn check_neighbours(&self, i: usize) -> &[u32] {
        &self.edge_error[self.check_ptr[i]..self.check_ptr[i + 1]]
    }

    /// Check neighbourhood of error `k`, ascending.
    pub fn error_neighbours(&self, k: usize) -> impl Iterator<Item = u32> + '_ {
        self.error_edge_ids(k).iter().map(|&e| self.edge_check[e as usize])
    }

    fn error_edge_ids(&self, k: usize) -> &[u32] {
        &self.error_edges[self.error_ptr[k]..self.error_ptr[k + 1]]
    }
}

/// Builds the Tanner graph of a model, rejecting models without mechanisms.
pub fn bp_init(dem: &DetectorErrorModel) -> Result<TannerGraph> {
    if dem.n_mechanisms() == 0 {
        return Err(Error::Structure("check matrix has no columns".into()));
    }
    Ok(TannerGraph::new(dem))
}

/// Message tables of one decode. `p` holds check-to-error and `q`
/// error-to-check messages, indexed by Tanner edge; `chi` holds posterior odds.
#[derive(Clone, Debug)]
pub struct BpState {
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub chi: Vec<f64>,
    pub iteration: usize,
    decision: Vec<bool>,
    /// `(H·e)_i` for the current hard decision.
    explained: Vec<bool>,
    /// Number of checks where `(H·e)_i != s_i`.
    mismatches: usize,
    scratch: Vec<f64>,
}

impl BpState {
    pub fn new(tanner: &TannerGraph) -> Self {
        BpState {
            p: vec![1.0; tanner.n_edges()],
            q: vec![1.0; tanner.n_edges()],
            chi: vec![0.0; tanner.n_errors],
            iteration: 0,
            decision: vec![false; tanner.n_errors],
            explained: vec![false; tanner.n_checks],
            mismatches: 0,
            scratch: Vec::new(),
        }
    }

    /// Sets every error-to-check message to its prior odds and clears the
    /// hard decision.
    pub fn reset(&mut self, tanner: &TannerGraph, prior_odds: &[f64], s: &Syndrome) {
        for (q, &k) in self.q.iter_mut().zip(&tanner.edge_error) {
            *q = prior_odds[k as usize];
        }
        self.p.iter_mut().for_each(|p| *p = 1.0);
        self.chi.copy_from_slice(prior_odds);
        self.decision.iter_mut().for_each(|d| *d = false);
        self.explained.iter_mut().for_each(|d| *d = false);
        self.mismatches = s.weight();
        self.iteration = 0;
    }

    pub fn hard_decision(&self) -> &[bool] {
        &self.decision
    }

    /// Whether the current hard decision reproduces the syndrome.
    pub fn converged(&self) -> bool {
        self.mismatches == 0
    }
}

/// Odds of each prior probability.
pub fn prior_odds(priors: &[f64]) -> Vec<f64> {
    priors.iter().map(|&p| clamp_odds(p / (1.0 - p))).collect()
}

/// Check-to-error update: every `P` is computed from the current `Q` values
/// only.
pub fn check_to_error_messages(tanner: &TannerGraph, state: &mut BpState, s: &Syndrome) {
    for i in 0..tanner.n_checks {
        let (lo, hi) = (tanner.check_ptr[i], tanner.check_ptr[i + 1]);
        let q = &state.q[lo..hi];
        let p = &mut state.p[lo..hi];
        let mut product = 1.0;
        let mut zeros = 0;
        for (p, &q) in p.iter_mut().zip(q) {
            let t = ((1.0 - q) / (1.0 + q)).clamp(-1.0 + RATIO_MARGIN, 1.0 - RATIO_MARGIN);
            *p = t;
            if t == 0.0 {
                zeros += 1;
            } else {
                product *= t;
            }
        }
        let sign = if s.get(i) { -1.0 } else { 1.0 };
        if p.len() == 1 {
            // Empty product: delta = sign.
            p[0] = clamp_odds((1.0 - sign) / (1.0 + sign));
            continue;
        }
        let signed = sign * product;
        for p in p.iter_mut() {
            let t = *p;
            // (1 - delta) / (1 + delta) with delta = signed / t, scaled by t.
            let odds = match (zeros, t == 0.0) {
                (0, _) => (t - signed) / (t + signed),
                (1, true) => (1.0 - signed) / (1.0 + signed),
                _ => 1.0,
            };
            *p = clamp_odds(odds);
        }
    }
}

/// Shared error-side pass: writes `Q` and/or `chi`, products taken in
/// ascending check order with clamping after every factor.
fn error_pass(
    tanner: &TannerGraph,
    state: &mut BpState,
    prior_odds: &[f64],
    write_q: bool,
    write_chi: bool,
) {
    let mut heap = std::mem::take(&mut state.scratch);
    let mut stack = [1.0f64; 17];
    for k in 0..tanner.n_errors {
        let edges = tanner.error_edge_ids(k);
        let n = edges.len();
        if write_q {
            let suffix: &mut [f64] = if n < stack.len() {
                &mut stack[..n + 1]
            } else {
                heap.clear();
                heap.resize(n + 1, 1.0);
                &mut heap[..]
            };
            suffix[n] = 1.0;
            for j in (0..n).rev() {
                suffix[j] = clamp_odds(suffix[j + 1] * state.p[edges[j] as usize]);
            }
            let mut prefix = prior_odds[k];
            for j in 0..n {
                let e = edges[j] as usize;
                state.q[e] = clamp_odds(prefix * suffix[j + 1]);
                prefix = clamp_odds(prefix * state.p[e]);
            }
            if write_chi {
                state.chi[k] = prefix;
            }
        } else if write_chi {
            let mut acc = prior_odds[k];
            for &e in edges {
                acc = clamp_odds(acc * state.p[e as usize]);
            }
            state.chi[k] = acc;
        }
    }
    state.scratch = heap;
}

/// Error-to-check update from this iteration's `P`.
pub fn error_to_check_messages(tanner: &TannerGraph, state: &mut BpState, prior_odds: &[f64]) {
    error_pass(tanner, state, prior_odds, true, false);
}

/// Posterior odds `chi` and the hard decision `e_k = [chi_k >= 1]`; keeps the
/// convergence bookkeeping in step with the decision.
pub fn posterior_and_decision(
    tanner: &TannerGraph,
    state: &mut BpState,
    prior_odds: &[f64],
    s: &Syndrome,
) {
    error_pass(tanner, state, prior_odds, false, true);
    update_decision(tanner, state, s);
}

fn update_decision(tanner: &TannerGraph, state: &mut BpState, s: &Syndrome) {
    for k in 0..tanner.n_errors {
        let chi = state.chi[k];
        debug_assert!(!chi.is_nan());
        let e = chi >= 1.0;
        if e != state.decision[k] {
            state.decision[k] = e;
            for &edge in tanner.error_edge_ids(k) {
                let i = tanner.edge_check[edge as usize] as usize;
                state.explained[i] ^= true;
                if state.explained[i] == s.get(i) {
                    state.mismatches -= 1;
                } else {
                    state.mismatches += 1;
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BpResult {
    pub posteriors: Vec<f64>,
    /// Posterior odds, kept alongside the probabilities so thresholds can be
    /// compared without rounding.
    pub odds: Vec<f64>,
    pub hard_decision: Bits,
    pub converged: bool,
    pub iterations_used: usize,
}

/// Reusable decoder over one model.
#[derive(Clone, Debug)]
pub struct BpDecoder {
    tanner: TannerGraph,
    prior_odds: Vec<f64>,
}

impl BpDecoder {
    pub fn new(dem: &DetectorErrorModel) -> Self {
        BpDecoder {
            tanner: TannerGraph::new(dem),
            prior_odds: prior_odds(dem.priors()),
        }
    }

    pub fn tanner(&self) -> &TannerGraph {
        &self.tanner
    }

    pub fn new_state(&self) -> BpState {
        BpState::new(&self.tanner)
    }

    /// Runs up to `m_iter` iterations, stopping at the first one whose hard
    /// decision reproduces `s`. Results are left in `state`.
    pub fn run(&self, s: &Syndrome, m_iter: usize, state: &mut BpState) -> Result<()> {
        if s.len() != self.tanner.n_checks {
            return parameter(format!(
                "syndrome has {} bits, model has {} detectors",
                s.len(),
                self.tanner.n_checks
            ));
        }
        if m_iter == 0 {
            return parameter("m_iter must be at least 1");
        }
        state.reset(&self.tanner, &self.prior_odds, s);
        for it in 1..=m_iter {
            state.iteration = it;
            check_to_error_messages(&self.tanner, state, s);
            error_pass(&self.tanner, state, &self.prior_odds, true, true);
            update_decision(&self.tanner, state, s);
            if state.converged() {
                break;
            }
        }
        Ok(())
    }

    pub fn decode(&self, s: &Syndrome, m_iter: usize) -> Result<BpResult> {
        let mut state = self.new_state();
        self.decode_with(s, m_iter, &mut state)
    }

    pub fn decode_with(&self, s: &Syndrome, m_iter: usize, state: &mut BpState) -> Result<BpResult> {
        self.run(s, m_iter, state)?;
        Ok(BpResult {
            posteriors: state.chi.iter().map(|&c| c / (1.0 + c)).collect(),
            odds: state.chi.clone(),
            hard_decision: Bits::from_bools(&state.decision),
            converged: state.converged(),
            iterations_used: state.iteration,
        })
    }
}

/// One-shot convenience wrapper around [`BpDecoder`].
pub fn bp_decode(dem: &DetectorErrorModel, s: &Syndrome, m_iter: usize) -> Result<BpResult> {
    bp_init(dem)?;
    BpDecoder::new(dem).decode(s, m_iter)
}
