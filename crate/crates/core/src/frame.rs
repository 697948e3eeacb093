//! Pauli-frame Monte Carlo sampling of annotated circuits.
//!
//! Every shot draws from its own random stream keyed by `(seed, shot index)`,
//! so a shot stream does not depend on how shots are split across threads.
//!
//! Shot dump layout (little endian): the magic bytes `BPPDSHOT`, `u32`
//! detector count, `u32` observable count, `u64` shot count, then one packed
//! bit vector per shot holding the detector bits followed by the observable
//! bits, bit `i` stored in byte `i / 8` at position `i % 8`.

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::bits::{Bits, Syndrome};
use crate::circuit::{Circuit, Instruction};
use crate::dem::DetectorErrorModel;
use crate::error::{parameter, Error, Result};
use crate::pauli::{Pauli, PauliString};

pub const SHOT_MAGIC: &[u8; 8] = b"BPPDSHOT";
/// Upper limit of the default shot count.
pub const MAX_DEFAULT_SHOTS: u64 = 1_000_000;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Shot {
    pub syndrome: Syndrome,
    pub true_homology: Bits,
}

/// Default number of shots at physical error rate `p`: `min(10⁶, ⌈1/p²⌉)`.
pub fn shots_for(p_phys: f64) -> Result<u64> {
    if !(p_phys > 0.0) {
        return parameter(format!("shot policy needs p > 0, got {p_phys}"));
    }
    let x = 1.0 / (p_phys * p_phys);
    let nearest = x.round();
    let n = if (x - nearest).abs() <= 1e-9 * x {
        nearest
    } else {
        x.ceil()
    };
    Ok((n as u64).min(MAX_DEFAULT_SHOTS))
}

/// Random stream of one shot.
pub fn shot_rng(seed: u64, shot: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(shot);
    rng
}

#[derive(Clone, Copy, Debug)]
enum Op {
    Reset(u32),
    H(u32),
    Cz(u32, u32),
    Measure(u32, f64),
    Dep1(u32, f64),
    Dep2(u32, u32, f64),
    /// Detector `index` is the parity of records `start..end` of `targets`.
    Detector(u32, u32),
    Observable(u32, u32, u32),
    /// Marks the end of source instruction `index`, for fault injection.
    End(u32),
}

/// A circuit flattened for fast repeated sampling.
#[derive(Clone, Debug)]
pub struct FrameSampler {
    ops: Vec<Op>,
    targets: Vec<u32>,
    num_qubits: usize,
    num_measurements: usize,
    n_detectors: usize,
    n_observables: usize,
}

/// Per-shot frame state.
#[derive(Clone, Debug)]
struct Frame {
    x: Vec<bool>,
    z: Vec<bool>,
    records: Vec<bool>,
}

impl Frame {
    fn apply(&mut self, q: u32, p: Pauli) {
        let q = q as usize;
        self.x[q] ^= p.has_x();
        self.z[q] ^= p.has_z();
    }
}

const PAULI_OR_I: [Option<Pauli>; 4] = [None, Some(Pauli::X), Some(Pauli::Y), Some(Pauli::Z)];

impl FrameSampler {
    pub fn new(circuit: &Circuit) -> Result<Self> {
        circuit.validate()?;
        let mut ops = Vec::new();
        let mut targets = Vec::new();
        let mut n_det = 0u32;
        let mut n_obs = 0usize;
        for (at, ins) in circuit.instructions.iter().enumerate() {
            match ins {
                Instruction::Reset(t) => ops.extend(t.iter().map(|&q| Op::Reset(q))),
                Instruction::H(t) => ops.extend(t.iter().map(|&q| Op::H(q))),
                Instruction::Cz(pairs) => ops.extend(pairs.iter().map(|&(a, b)| Op::Cz(a, b))),
                Instruction::Measure {
                    targets: t,
                    flip_probability,
                } => ops.extend(t.iter().map(|&q| Op::Measure(q, *flip_probability))),
                Instruction::Depolarize1 {
                    targets: t,
                    probability,
                } => {
                    if *probability > 0.0 {
                        ops.extend(t.iter().map(|&q| Op::Dep1(q, *probability)));
                    }
                }
                Instruction::Depolarize2 { pairs, probability } => {
                    if *probability > 0.0 {
                        ops.extend(pairs.iter().map(|&(a, b)| Op::Dep2(a, b, *probability)));
                    }
                }
                Instruction::Tick => {}
                Instruction::Detector { records, .. } => {
                    let start = targets.len() as u32;
                    targets.extend_from_slice(records);
                    ops.push(Op::Detector(start, targets.len() as u32));
                    n_det += 1;
                }
                Instruction::ObservableInclude { index, records } => {
                    let start = targets.len() as u32;
                    targets.extend_from_slice(records);
                    ops.push(Op::Observable(*index, start, targets.len() as u32));
                    n_obs = n_obs.max(*index as usize + 1);
                }
            }
            ops.push(Op::End(at as u32));
        }
        Ok(FrameSampler {
            ops,
            targets,
            num_qubits: circuit.num_qubits as usize,
            num_measurements: circuit.num_measurements(),
            n_detectors: n_det as usize,
            n_observables: n_obs,
        })
    }

    pub fn n_detectors(&self) -> usize {
        self.n_detectors
    }

    pub fn n_observables(&self) -> usize {
        self.n_observables
    }

    fn frame(&self) -> Frame {
        Frame {
            x: vec![false; self.num_qubits],
            z: vec![false; self.num_qubits],
            records: Vec::with_capacity(self.num_measurements),
        }
    }

    /// Runs one shot. Noise is drawn from `rng` when given; `inject` lists
    /// Paulis applied after the given source instructions.
    fn run(&self, mut rng: Option<&mut ChaCha8Rng>, inject: &[(usize, &PauliString)]) -> Shot {
        let mut f = self.frame();
        let mut syndrome = Bits::zeros(self.n_detectors);
        let mut homology = Bits::zeros(self.n_observables);
        let mut det = 0;
        for op in &self.ops {
            match *op {
                Op::Reset(q) => {
                    f.x[q as usize] = false;
                    f.z[q as usize] = false;
                }
                Op::H(q) => {
                    let q = q as usize;
                    std::mem::swap(&mut f.x[q], &mut f.z[q]);
                }
                Op::Cz(a, b) => {
                    let (a, b) = (a as usize, b as usize);
                    f.z[a] ^= f.x[b];
                    f.z[b] ^= f.x[a];
                }
                Op::Measure(q, p) => {
                    let mut flip = f.x[q as usize];
                    if let Some(rng) = rng.as_deref_mut() {
                        if p > 0.0 && rng.gen::<f64>() < p {
                            flip ^= true;
                        }
                    }
                    f.records.push(flip);
                }
                Op::Dep1(q, p) => {
                    if let Some(rng) = rng.as_deref_mut() {
                        let u: f64 = rng.gen();
                        if u < p {
                            let i = ((u / p * 3.0) as usize).min(2);
                            f.apply(q, Pauli::ALL[i]);
                        }
                    }
                }
                Op::Dep2(a, b, p) => {
                    if let Some(rng) = rng.as_deref_mut() {
                        let u: f64 = rng.gen();
                        if u < p {
                            let i = ((u / p * 15.0) as usize).min(14) + 1;
                            if let Some(pa) = PAULI_OR_I[i / 4] {
                                f.apply(a, pa);
                            }
                            if let Some(pb) = PAULI_OR_I[i % 4] {
                                f.apply(b, pb);
                            }
                        }
                    }
                }
                Op::Detector(start, end) => {
                    let v = self.targets[start as usize..end as usize]
                        .iter()
                        .fold(false, |acc, &r| acc ^ f.records[r as usize]);
                    if v {
                        syndrome.set(det, true);
                    }
                    det += 1;
                }
                Op::Observable(index, start, end) => {
                    let v = self.targets[start as usize..end as usize]
                        .iter()
                        .fold(false, |acc, &r| acc ^ f.records[r as usize]);
                    if v {
                        homology.toggle(index as usize);
                    }
                }
                Op::End(at) => {
                    for (after, pauli) in inject {
                        if *after == at as usize {
                            for (q, p) in pauli.iter() {
                                f.apply(q, p);
                            }
                        }
                    }
                }
            }
        }
        Shot {
            syndrome,
            true_homology: homology,
        }
    }

    /// Shot number `index` of the stream keyed by `seed`.
    pub fn sample_one(&self, seed: u64, index: u64) -> Shot {
        let mut rng = shot_rng(seed, index);
        self.run(Some(&mut rng), &[])
    }

    /// Shots `start..start+count`, sampled in parallel on the current rayon
    /// pool and returned in index order.
    pub fn sample_range(&self, seed: u64, start: u64, count: u64) -> Vec<Shot> {
        (start..start + count)
            .into_par_iter()
            .map(|i| self.sample_one(seed, i))
            .collect()
    }

    /// Noiseless run with the given Paulis applied after source instructions.
    pub fn inject(&self, faults: &[(usize, &PauliString)]) -> Shot {
        self.run(None, faults)
    }
}

pub fn sample_shots(circuit: &Circuit, n_shots: u64, seed: u64) -> Result<Vec<Shot>> {
    Ok(FrameSampler::new(circuit)?.sample_range(seed, 0, n_shots))
}

/// Error vectors `start..start+count` drawn from a model: mechanism `k` fires
/// with probability `p_k`, one draw per mechanism in column order.
pub fn sample_dem_errors(dem: &DetectorErrorModel, seed: u64, start: u64, count: u64) -> Vec<Bits> {
    (start..start + count)
        .into_par_iter()
        .map(|i| {
            let mut rng = shot_rng(seed, i);
            let mut e = Bits::zeros(dem.n_mechanisms());
            for (k, &p) in dem.priors().iter().enumerate() {
                if rng.gen::<f64>() < p {
                    e.set(k, true);
                }
            }
            e
        })
        .collect()
}

/// Samples directly from a model, bypassing the circuit.
pub fn sample_dem_shots(dem: &DetectorErrorModel, n_shots: u64, seed: u64) -> Vec<Shot> {
    sample_dem_errors(dem, seed, 0, n_shots)
        .into_iter()
        .map(|e| Shot {
            syndrome: dem.syndrome_of(&e),
            true_homology: dem.homology_of(&e),
        })
        .collect()
}

pub fn write_shots<W: Write>(
    mut w: W,
    n_detectors: usize,
    n_observables: usize,
    shots: &[Shot],
) -> Result<()> {
    w.write_all(SHOT_MAGIC)?;
    w.write_all(&(n_detectors as u32).to_le_bytes())?;
    w.write_all(&(n_observables as u32).to_le_bytes())?;
    w.write_all(&(shots.len() as u64).to_le_bytes())?;
    let width = n_detectors + n_observables;
    for shot in shots {
        if shot.syndrome.len() != n_detectors || shot.true_homology.len() != n_observables {
            return parameter("shot dimensions do not match the header");
        }
        let mut packed = Bits::zeros(width);
        for i in shot.syndrome.iter_ones() {
            packed.set(i, true);
        }
        for i in shot.true_homology.iter_ones() {
            packed.set(n_detectors + i, true);
        }
        w.write_all(&packed.to_bytes_le())?;
    }
    Ok(())
}

/// Reads a shot dump, returning `(n_detectors, n_observables, shots)`.
pub fn read_shots<R: Read>(mut r: R) -> Result<(usize, usize, Vec<Shot>)> {
    let bad = |m: &str| Error::Structure(format!("shot dump: {m}"));
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != SHOT_MAGIC {
        return Err(bad("bad magic"));
    }
    let mut b4 = [0u8; 4];
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b4)?;
    let n_det = u32::from_le_bytes(b4) as usize;
    r.read_exact(&mut b4)?;
    let n_obs = u32::from_le_bytes(b4) as usize;
    r.read_exact(&mut b8)?;
    let n_shots = u64::from_le_bytes(b8);
    let width = n_det + n_obs;
    let mut buf = vec![0u8; width.div_ceil(8)];
    let mut shots = Vec::new();
    for _ in 0..n_shots {
        r.read_exact(&mut buf).map_err(|_| bad("truncated"))?;
        let packed = Bits::from_bytes_le(width, &buf);
        shots.push(Shot {
            syndrome: Bits::from_ones(n_det, packed.iter_ones().filter(|&i| i < n_det)),
            true_homology: Bits::from_ones(
                n_obs,
                packed.iter_ones().filter(|&i| i >= n_det).map(|i| i - n_det),
            ),
        });
    }
    Ok((n_det, n_obs, shots))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::build_memory_circuit;

    #[test]
    fn shot_policy() {
        assert_eq!(shots_for(0.01).unwrap(), 10_000);
        assert_eq!(shots_for(0.001).unwrap(), 1_000_000);
        assert_eq!(shots_for(0.5).unwrap(), 4);
        assert_eq!(shots_for(0.007).unwrap(), 20_409);
        assert!(shots_for(0.0).is_err());
    }

    #[test]
    fn noiseless_shots_are_trivial() {
        let c = build_memory_circuit(3, 3, 0.0).unwrap();
        for shot in sample_shots(&c, 50, 1).unwrap() {
            assert!(shot.syndrome.is_zero() && shot.true_homology.is_zero());
        }
    }

    #[test]
    fn fixed_seed_is_reproducible() {
        let c = build_memory_circuit(3, 3, 0.02).unwrap();
        let a = sample_shots(&c, 200, 9).unwrap();
        let b = sample_shots(&c, 200, 9).unwrap();
        assert_eq!(a, b);
        let sampler = FrameSampler::new(&c).unwrap();
        assert_eq!(sampler.sample_range(9, 50, 10), a[50..60].to_vec());
        assert_ne!(a, sample_shots(&c, 200, 10).unwrap());
    }

    #[test]
    fn dump_round_trip() {
        let c = build_memory_circuit(3, 3, 0.05).unwrap();
        let shots = sample_shots(&c, 30, 4).unwrap();
        let mut buf = Vec::new();
        write_shots(&mut buf, 24, 1, &shots).unwrap();
        assert_eq!(&buf[..8], SHOT_MAGIC);
        assert_eq!(buf.len(), 24 + 30 * 4);
        let (d, o, back) = read_shots(buf.as_slice()).unwrap();
        assert_eq!((d, o), (24, 1));
        assert_eq!(back, shots);
        assert!(read_shots(&buf[..buf.len() - 1]).is_err());
    }

    #[test]
    fn dem_sampler_extremes() {
        let dem = DetectorErrorModel::new_unchecked(
            3,
            1,
            vec![(vec![0, 2], vec![0], 1.0), (vec![1], vec![], 0.0)],
        );
        for shot in sample_dem_shots(&dem, 20, 3) {
            assert_eq!(shot.syndrome.iter_ones().collect::<Vec<_>>(), vec![0, 2]);
            assert!(shot.true_homology.get(0));
        }
        let zero = DetectorErrorModel::new_unchecked(2, 0, vec![(vec![0], vec![], 0.0)]);
        assert!(sample_dem_shots(&zero, 20, 3).iter().all(|s| s.syndrome.is_zero()));
    }
}
