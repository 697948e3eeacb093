//! Detector error models: extraction from annotated circuits and the text
//! file format.
//!
//! ```text
//! dem v1 detectors=24 observables=1
//! error(1.0000000000000000e-3) D0 D4
//! error(6.6666666666666670e-4) D3 L0
//! ```

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::bits::Bits;
use crate::circuit::{Circuit, DetectorInfo, Instruction};
use crate::error::{Error, Result};
use crate::pauli::{Pauli, PauliString};
use crate::sparse::SparseBinMatrix;

/// Mechanisms merged below this probability are dropped.
pub const PROBABILITY_FLOOR: f64 = 1e-15;

/// Probability that exactly one of two independent events fires.
pub fn xor_probability(p1: f64, p2: f64) -> f64 {
    p1 * (1.0 - p2) + p2 * (1.0 - p1)
}

/// Check matrix `H`, logical matrix `L` and priors of independent error
/// mechanisms.
#[derive(Clone, Debug, PartialEq)]
pub struct DetectorErrorModel {
    h: SparseBinMatrix,
    l: SparseBinMatrix,
    priors: Vec<f64>,
    detectors: Vec<DetectorInfo>,
}

impl DetectorErrorModel {
    /// Builds a model from per-mechanism (detectors, observables, probability)
    /// triples, enforcing every model invariant.
    pub fn new(
        n_detectors: usize,
        n_observables: usize,
        columns: Vec<(Vec<u32>, Vec<u32>, f64)>,
    ) -> Result<Self> {
        let dem = Self::new_unchecked(n_detectors, n_observables, columns);
        dem.validate()?;
        Ok(dem)
    }

    /// Builds a model without checking priors, emptiness or uniqueness of
    /// columns. Index ranges are still enforced.
    pub fn new_unchecked(
        n_detectors: usize,
        n_observables: usize,
        columns: Vec<(Vec<u32>, Vec<u32>, f64)>,
    ) -> Self {
        let h = SparseBinMatrix::from_columns(n_detectors, columns.iter().map(|c| &c.0));
        let l = SparseBinMatrix::from_columns(n_observables, columns.iter().map(|c| &c.1));
        let priors = columns.iter().map(|c| c.2).collect();
        DetectorErrorModel {
            h,
            l,
            priors,
            detectors: Vec::new(),
        }
    }

    /// Attaches per-detector metadata.
    pub fn with_detector_info(mut self, detectors: Vec<DetectorInfo>) -> Result<Self> {
        if detectors.len() != self.n_detectors() {
            return Err(Error::Structure(format!(
                "{} detector annotations for {} detectors",
                detectors.len(),
                self.n_detectors()
            )));
        }
        self.detectors = detectors;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = HashMap::new();
        for k in 0..self.n_mechanisms() {
            let p = self.priors[k];
            if !(p > 0.0 && p < 0.5) {
                return Err(Error::Structure(format!(
                    "column {k}: probability {p} outside (0, 0.5)"
                )));
            }
            let (dets, obs) = (self.h.column(k), self.l.column(k));
            if dets.is_empty() && obs.is_empty() {
                return Err(Error::Structure(format!("column {k} flips nothing")));
            }
            if let Some(j) = seen.insert((dets, obs), k) {
                return Err(Error::Structure(format!(
                    "columns {j} and {k} have identical signatures"
                )));
            }
        }
        Ok(())
    }

    pub fn n_detectors(&self) -> usize {
        self.h.n_rows()
    }

    pub fn n_observables(&self) -> usize {
        self.l.n_rows()
    }

    pub fn n_mechanisms(&self) -> usize {
        self.priors.len()
    }

    pub fn h(&self) -> &SparseBinMatrix {
        &self.h
    }

    pub fn l(&self) -> &SparseBinMatrix {
        &self.l
    }

    pub fn priors(&self) -> &[f64] {
        &self.priors
    }

    /// Detector metadata; empty for models read from a file.
    pub fn detector_info(&self) -> &[DetectorInfo] {
        &self.detectors
    }

    pub fn detectors_of(&self, k: usize) -> &[u32] {
        self.h.column(k)
    }

    pub fn observables_of(&self, k: usize) -> &[u32] {
        self.l.column(k)
    }

    /// Columns with more than two detectors.
    pub fn hyperedge_count(&self) -> usize {
        self.h.columns().filter(|c| c.len() > 2).count()
    }

    /// `H·e` for an error vector over mechanisms.
    pub fn syndrome_of(&self, e: &Bits) -> Bits {
        self.h.mul_vec(e)
    }

    /// `L·e` for an error vector over mechanisms.
    pub fn homology_of(&self, e: &Bits) -> Bits {
        self.l.mul_vec(e)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "dem v1 detectors={} observables={}\n",
            self.n_detectors(),
            self.n_observables()
        );
        for k in 0..self.n_mechanisms() {
            write!(out, "error({:.16e})", self.priors[k]).unwrap();
            for d in self.h.column(k) {
                write!(out, " D{d}").unwrap();
            }
            for o in self.l.column(k) {
                write!(out, " L{o}").unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let err = |line: usize, message: String| Error::Parse { line, message };
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());
        let (n, header) = lines.next().ok_or_else(|| err(1, "empty file".into()))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        let count = |field: &str, key: &str| -> Result<usize> {
            field
                .strip_prefix(key)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| err(n, format!("expected {key}<count>, found {field:?}")))
        };
        if fields.len() != 4 || fields[0] != "dem" || fields[1] != "v1" {
            return Err(err(n, format!("bad header {header:?}")));
        }
        let n_det = count(fields[2], "detectors=")?;
        let n_obs = count(fields[3], "observables=")?;

        let mut columns = Vec::new();
        for (n, line) in lines {
            let mut parts = line.split_whitespace();
            let head = parts.next().unwrap_or_default();
            let p: f64 = head
                .strip_prefix("error(")
                .and_then(|s| s.strip_suffix(')'))
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| err(n, format!("expected error(<p>), found {head:?}")))?;
            let (mut dets, mut obs) = (Vec::new(), Vec::new());
            for target in parts {
                let (list, bound, rest) = if let Some(rest) = target.strip_prefix('D') {
                    (&mut dets, n_det, rest)
                } else if let Some(rest) = target.strip_prefix('L') {
                    (&mut obs, n_obs, rest)
                } else {
                    return Err(err(n, format!("bad target {target:?}")));
                };
                let index: u32 = rest
                    .parse()
                    .map_err(|_| err(n, format!("bad target {target:?}")))?;
                if index as usize >= bound {
                    return Err(err(n, format!("target {target} out of range")));
                }
                list.push(index);
            }
            columns.push((dets, obs, p));
        }
        DetectorErrorModel::new(n_det, n_obs, columns)
    }
}

/// Backward sensitivity of every qubit: which detectors and observables a
/// Pauli X or Z at the current point of the circuit would flip.
struct Sensitivity {
    x: Vec<Bits>,
    z: Vec<Bits>,
    /// Detectors/observables each measurement record contributes to.
    records: Vec<Bits>,
    next_record: usize,
}

impl Sensitivity {
    fn new(circuit: &Circuit) -> Result<(Self, usize, usize)> {
        let detectors = circuit.detectors();
        if detectors.is_empty() {
            return Err(Error::Structure("circuit has no detector annotations".into()));
        }
        let observables = circuit.observables();
        let (n_det, n_obs) = (detectors.len(), observables.len());
        let width = n_det + n_obs;
        let n_rec = circuit.num_measurements();
        let mut records = vec![Bits::zeros(width); n_rec];
        for (i, (_, recs)) in detectors.iter().enumerate() {
            for &r in recs.iter() {
                records[r as usize].toggle(i);
            }
        }
        for (o, recs) in observables.iter().enumerate() {
            for &r in recs {
                records[r as usize].toggle(n_det + o);
            }
        }
        let n = circuit.num_qubits as usize;
        Ok((
            Sensitivity {
                x: vec![Bits::zeros(width); n],
                z: vec![Bits::zeros(width); n],
                records,
                next_record: n_rec,
            },
            n_det,
            n_obs,
        ))
    }

    fn pauli(&self, q: u32, p: Pauli) -> Bits {
        let q = q as usize;
        match p {
            Pauli::X => self.x[q].clone(),
            Pauli::Z => self.z[q].clone(),
            Pauli::Y => &self.x[q] ^ &self.z[q],
        }
    }

    /// Steps backwards over one non-noise instruction.
    fn step_back(&mut self, ins: &Instruction) {
        match ins {
            Instruction::Reset(t) => {
                for &q in t {
                    self.x[q as usize].clear();
                    self.z[q as usize].clear();
                }
            }
            Instruction::H(t) => {
                for &q in t {
                    std::mem::swap(&mut self.x[q as usize], &mut self.z[q as usize]);
                }
            }
            Instruction::Cz(pairs) => {
                for &(a, b) in pairs {
                    let (a, b) = (a as usize, b as usize);
                    let za = self.z[a].clone();
                    self.x[a] ^= &self.z[b];
                    self.x[b] ^= &za;
                }
            }
            Instruction::Measure { targets, .. } => {
                self.next_record -= targets.len();
                for (i, &q) in targets.iter().enumerate() {
                    let rec = &self.records[self.next_record + i];
                    self.x[q as usize] ^= rec;
                }
            }
            _ => {}
        }
    }
}

fn split_signature(sig: &Bits, n_det: usize) -> (Vec<u32>, Vec<u32>) {
    let mut dets = Vec::new();
    let mut obs = Vec::new();
    for i in sig.iter_ones() {
        if i < n_det {
            dets.push(i as u32);
        } else {
            obs.push((i - n_det) as u32);
        }
    }
    (dets, obs)
}

/// Enumerates every single-Pauli fault of every noise channel, propagates it
/// to the detectors and observables it flips, merges identical signatures and
/// sorts the columns by (detectors, observables).
pub fn extract_dem(circuit: &Circuit) -> Result<DetectorErrorModel> {
    circuit.validate()?;
    let (mut sens, n_det, n_obs) = Sensitivity::new(circuit)?;
    let mut merged: HashMap<Bits, f64> = HashMap::new();
    let mut add = |sig: Bits, p: f64| {
        if sig.is_zero() || p == 0.0 {
            return;
        }
        let entry = merged.entry(sig).or_insert(0.0);
        *entry = xor_probability(*entry, p);
    };

    for ins in circuit.instructions.iter().rev() {
        match ins {
            Instruction::Depolarize1 {
                targets,
                probability,
            } => {
                for &q in targets {
                    for p in Pauli::ALL {
                        add(sens.pauli(q, p), probability / 3.0);
                    }
                }
            }
            Instruction::Depolarize2 { pairs, probability } => {
                for &(a, b) in pairs {
                    for pa in [None, Some(Pauli::X), Some(Pauli::Y), Some(Pauli::Z)] {
                        for pb in [None, Some(Pauli::X), Some(Pauli::Y), Some(Pauli::Z)] {
                            let mut sig = Bits::zeros(n_det + n_obs);
                            match (pa, pb) {
                                (None, None) => continue,
                                _ => {
                                    if let Some(p) = pa {
                                        sig ^= &sens.pauli(a, p);
                                    }
                                    if let Some(p) = pb {
                                        sig ^= &sens.pauli(b, p);
                                    }
                                }
                            }
                            add(sig, probability / 15.0);
                        }
                    }
                }
            }
            Instruction::Measure {
                targets,
                flip_probability,
            } => {
                if *flip_probability > 0.0 {
                    let base = sens.next_record - targets.len();
                    for i in 0..targets.len() {
                        add(sens.records[base + i].clone(), *flip_probability);
                    }
                }
                sens.step_back(ins);
            }
            other => sens.step_back(other),
        }
    }

    let mut columns: Vec<(Vec<u32>, Vec<u32>, f64)> = merged
        .into_iter()
        .filter(|&(_, p)| p >= PROBABILITY_FLOOR)
        .map(|(sig, p)| {
            let (d, o) = split_signature(&sig, n_det);
            (d, o, p)
        })
        .collect();
    columns.sort_by(|a, b| (&a.0, &a.1).cmp(&(&b.0, &b.1)));
    let info = circuit.detectors().into_iter().map(|(i, _)| i).collect();
    DetectorErrorModel::new(n_det, n_obs, columns)?.with_detector_info(info)
}

/// Detectors and observables flipped by `fault` inserted immediately after
/// instruction `after` (before the first instruction when `after` is `None`).
pub fn propagate_fault(
    circuit: &Circuit,
    after: Option<usize>,
    fault: &PauliString,
) -> Result<(Vec<u32>, Vec<u32>)> {
    let (mut sens, n_det, n_obs) = Sensitivity::new(circuit)?;
    let start = after.map_or(0, |i| i + 1);
    for ins in circuit.instructions[start..].iter().rev() {
        sens.step_back(ins);
    }
    let mut sig = Bits::zeros(n_det + n_obs);
    for (q, p) in fault.iter() {
        if q >= circuit.num_qubits {
            return Err(Error::Parameter(format!("fault on qubit {q} out of range")));
        }
        sig ^= &sens.pauli(q, p);
    }
    Ok(split_signature(&sig, n_det))
}
