//! Minimal CHP stabiliser-tableau simulator used as an independent oracle for
//! fault propagation.

use bppd_core::circuit::{Circuit, Instruction};
use bppd_core::pauli::{Pauli, PauliString};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Tableau {
    n: usize,
    x: Vec<Vec<bool>>,
    z: Vec<Vec<bool>>,
    r: Vec<bool>,
}

impl Tableau {
    /// All qubits in |0>.
    pub fn new(n: usize) -> Self {
        let mut x = vec![vec![false; n]; 2 * n + 1];
        let mut z = vec![vec![false; n]; 2 * n + 1];
        for i in 0..n {
            x[i][i] = true;
            z[n + i][i] = true;
        }
        Tableau {
            n,
            x,
            z,
            r: vec![false; 2 * n + 1],
        }
    }

    pub fn h(&mut self, a: usize) {
        for i in 0..2 * self.n {
            self.r[i] ^= self.x[i][a] && self.z[i][a];
            std::mem::swap(&mut self.x[i][a], &mut self.z[i][a]);
        }
    }

    pub fn s(&mut self, a: usize) {
        for i in 0..2 * self.n {
            self.r[i] ^= self.x[i][a] && self.z[i][a];
            self.z[i][a] ^= self.x[i][a];
        }
    }

    pub fn cnot(&mut self, a: usize, b: usize) {
        for i in 0..2 * self.n {
            self.r[i] ^= self.x[i][a] && self.z[i][b] && (self.x[i][b] ^ self.z[i][a] ^ true);
            self.x[i][b] ^= self.x[i][a];
            self.z[i][a] ^= self.z[i][b];
        }
    }

    pub fn cz(&mut self, a: usize, b: usize) {
        self.h(b);
        self.cnot(a, b);
        self.h(b);
    }

    pub fn pauli(&mut self, a: usize, p: Pauli) {
        // X anticommutes with Z-containing rows, Z with X-containing rows.
        for i in 0..2 * self.n {
            let flip = match p {
                Pauli::X => self.z[i][a],
                Pauli::Z => self.x[i][a],
                Pauli::Y => self.x[i][a] ^ self.z[i][a],
            };
            self.r[i] ^= flip;
        }
    }

    fn g(x1: bool, z1: bool, x2: bool, z2: bool) -> i32 {
        match (x1, z1) {
            (false, false) => 0,
            (true, true) => z2 as i32 - x2 as i32,
            (true, false) => (z2 as i32) * (2 * x2 as i32 - 1),
            (false, true) => (x2 as i32) * (1 - 2 * z2 as i32),
        }
    }

    fn rowsum(&mut self, h: usize, i: usize) {
        let mut sum = 2 * self.r[h] as i32 + 2 * self.r[i] as i32;
        for j in 0..self.n {
            sum += Self::g(self.x[i][j], self.z[i][j], self.x[h][j], self.z[h][j]);
        }
        self.r[h] = sum.rem_euclid(4) == 2;
        for j in 0..self.n {
            let (xi, zi) = (self.x[i][j], self.z[i][j]);
            self.x[h][j] ^= xi;
            self.z[h][j] ^= zi;
        }
    }

    pub fn measure(&mut self, a: usize, rng: &mut impl Rng) -> bool {
        let n = self.n;
        if let Some(p) = (n..2 * n).find(|&p| self.x[p][a]) {
            for i in 0..2 * n {
                if i != p && self.x[i][a] {
                    self.rowsum(i, p);
                }
            }
            self.x[p - n] = self.x[p].clone();
            self.z[p - n] = self.z[p].clone();
            self.r[p - n] = self.r[p];
            self.x[p] = vec![false; n];
            self.z[p] = vec![false; n];
            self.z[p][a] = true;
            let outcome = rng.gen::<bool>();
            self.r[p] = outcome;
            outcome
        } else {
            let scratch = 2 * n;
            self.x[scratch] = vec![false; n];
            self.z[scratch] = vec![false; n];
            self.r[scratch] = false;
            for i in 0..n {
                if self.x[i][a] {
                    self.rowsum(scratch, i + n);
                }
            }
            self.r[scratch]
        }
    }

    pub fn reset(&mut self, a: usize, rng: &mut impl Rng) {
        if self.measure(a, rng) {
            self.pauli(a, Pauli::X);
        }
    }
}

/// Where to inject a fault while simulating.
pub enum Fault<'a> {
    None,
    /// Pauli applied right after the given instruction.
    Pauli(usize, &'a PauliString),
    /// Flip of the given measurement record.
    Record(usize),
}

/// Runs the circuit, ignoring its noise channels, and returns the detector and
/// observable values.
pub fn run(circuit: &Circuit, fault: Fault<'_>, seed: u64) -> (Vec<bool>, Vec<bool>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Tableau::new(circuit.num_qubits as usize);
    let mut records: Vec<bool> = Vec::new();
    let mut detectors = Vec::new();
    let mut observables: Vec<bool> = Vec::new();
    for (at, ins) in circuit.instructions.iter().enumerate() {
        match ins {
            Instruction::Reset(q) => q.iter().for_each(|&q| t.reset(q as usize, &mut rng)),
            Instruction::H(q) => q.iter().for_each(|&q| t.h(q as usize)),
            Instruction::Cz(pairs) => pairs
                .iter()
                .for_each(|&(a, b)| t.cz(a as usize, b as usize)),
            Instruction::Measure { targets, .. } => {
                for &q in targets {
                    let mut m = t.measure(q as usize, &mut rng);
                    if matches!(fault, Fault::Record(r) if r == records.len()) {
                        m = !m;
                    }
                    records.push(m);
                }
            }
            Instruction::Detector { records: recs, .. } => {
                detectors.push(recs.iter().fold(false, |a, &r| a ^ records[r as usize]));
            }
            Instruction::ObservableInclude { index, records: recs } => {
                let i = *index as usize;
                if observables.len() <= i {
                    observables.resize(i + 1, false);
                }
                observables[i] ^= recs.iter().fold(false, |a, &r| a ^ records[r as usize]);
            }
            _ => {}
        }
        if let Fault::Pauli(after, pauli) = fault {
            if after == at {
                for (q, p) in pauli.iter() {
                    t.pauli(q as usize, p);
                }
            }
        }
    }
    (detectors, observables)
}

#[test]
fn bell_pair_correlations() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let mut t = Tableau::new(2);
        t.h(0);
        t.cnot(0, 1);
        let a = t.measure(0, &mut rng);
        let b = t.measure(1, &mut rng);
        assert_eq!(a, b);
    }
    let mut t = Tableau::new(1);
    t.h(0);
    t.s(0);
    t.s(0);
    t.h(0);
    assert!(t.measure(0, &mut rng));
}
