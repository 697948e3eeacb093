//! Rotated planar surface code layout and its Z-basis memory circuit.

use crate::circuit::{Basis, Circuit, DetectorInfo, Instruction};
use crate::error::{parameter, Result};
use crate::noise::{apply_noise_model_with, NoiseModel};

/// Data-qubit offsets relative to a stabiliser, in slot order NW, NE, SW, SE.
const SLOT_OFFSETS: [(i32, i32); 4] = [(-1, -1), (1, -1), (-1, 1), (1, 1)];
const NW: usize = 0;
const NE: usize = 1;
const SW: usize = 2;
const SE: usize = 3;
/// Interaction order of X stabilisers (hook errors end up horizontal).
const X_ORDER: [usize; 4] = [NW, NE, SW, SE];
/// Interaction order of Z stabilisers (hook errors end up vertical).
const Z_ORDER: [usize; 4] = [NW, SW, NE, SE];

#[derive(Clone, Debug)]
pub struct Stabiliser {
    pub basis: Basis,
    pub position: (i32, i32),
    /// Data qubit in each of the NW, NE, SW, SE slots.
    pub slots: [Option<u32>; 4],
}

impl Stabiliser {
    pub fn support(&self) -> impl Iterator<Item = u32> + '_ {
        self.slots.iter().flatten().copied()
    }

    fn partner(&self, layer: usize) -> Option<u32> {
        let order = match self.basis {
            Basis::X => X_ORDER,
            Basis::Z => Z_ORDER,
        };
        self.slots[order[layer]]
    }
}

/// Qubit layout of a distance-`d` rotated planar code. Data qubit `(2i+1, 2j+1)`
/// has index `j*d + i`; stabiliser ancillas follow the data qubits.
///
/// X-type boundary stabilisers sit on the top and bottom edges and Z-type on the
/// left and right edges, so the logical Z runs along a row of data qubits.
#[derive(Clone, Debug)]
pub struct RotatedLayout {
    pub distance: usize,
    pub data: Vec<(i32, i32)>,
    pub stabilisers: Vec<Stabiliser>,
}

impl RotatedLayout {
    pub fn new(distance: usize) -> Result<Self> {
        if distance < 3 || distance.is_multiple_of(2) {
            return parameter(format!("distance must be odd and at least 3, got {distance}"));
        }
        let d = distance as i32;
        let data: Vec<(i32, i32)> = (0..d)
            .flat_map(|j| (0..d).map(move |i| (2 * i + 1, 2 * j + 1)))
            .collect();
        let data_index = |x: i32, y: i32| -> Option<u32> {
            if x < 0 || y < 0 || x >= 2 * d || y >= 2 * d || x % 2 == 0 || y % 2 == 0 {
                return None;
            }
            Some(((y / 2) * d + x / 2) as u32)
        };
        let mut stabilisers = Vec::new();
        for j in 0..=d {
            for i in 0..=d {
                let basis = if (i + j) % 2 == 1 { Basis::Z } else { Basis::X };
                let on_side = i == 0 || i == d;
                let on_top_bottom = j == 0 || j == d;
                let keep = match (on_side, on_top_bottom) {
                    (false, false) => true,
                    (true, false) => basis == Basis::Z,
                    (false, true) => basis == Basis::X,
                    (true, true) => false,
                };
                if !keep {
                    continue;
                }
                let (x, y) = (2 * i, 2 * j);
                let mut slots = [None; 4];
                for (slot, (dx, dy)) in SLOT_OFFSETS.iter().enumerate() {
                    slots[slot] = data_index(x + dx, y + dy);
                }
                stabilisers.push(Stabiliser {
                    basis,
                    position: (x, y),
                    slots,
                });
            }
        }
        Ok(RotatedLayout {
            distance,
            data,
            stabilisers,
        })
    }

    pub fn num_data(&self) -> u32 {
        self.data.len() as u32
    }

    pub fn num_qubits(&self) -> u32 {
        (self.data.len() + self.stabilisers.len()) as u32
    }

    pub fn ancilla(&self, stabiliser: usize) -> u32 {
        self.num_data() + stabiliser as u32
    }

    /// Data qubits whose product of Z outcomes is the logical observable.
    pub fn logical_z_support(&self) -> Vec<u32> {
        (0..self.distance as u32).collect()
    }

    fn x_partners(&self, layer: usize) -> Vec<bool> {
        let mut mark = vec![false; self.data.len()];
        for s in self.stabilisers.iter().filter(|s| s.basis == Basis::X) {
            if let Some(q) = s.partner(layer) {
                mark[q as usize] = true;
            }
        }
        mark
    }
}

/// Builds the noiseless Z-basis memory experiment with detector and
/// observable annotations.
pub fn build_noiseless_memory_circuit(distance: usize, rounds: usize) -> Result<Circuit> {
    if rounds < 1 {
        return parameter("rounds must be at least 1");
    }
    let layout = RotatedLayout::new(distance)?;
    let n_anc = layout.stabilisers.len() as u32;
    let ancillas: Vec<u32> = (0..n_anc).map(|s| layout.ancilla(s as usize)).collect();
    let all: Vec<u32> = (0..layout.num_qubits()).collect();

    let mut c = Circuit::new(layout.num_qubits());
    c.qubit_coords = layout
        .data
        .iter()
        .copied()
        .chain(layout.stabilisers.iter().map(|s| s.position))
        .collect();

    let partners: Vec<Vec<bool>> = (0..4).map(|l| layout.x_partners(l)).collect();
    let data_marked = |mark: &[bool]| -> Vec<u32> {
        (0..mark.len() as u32).filter(|&q| mark[q as usize]).collect()
    };

    for round in 1..=rounds {
        c.push(Instruction::Reset(if round == 1 {
            all.clone()
        } else {
            ancillas.clone()
        }));
        c.push(Instruction::Tick);

        let mut h: Vec<u32> = ancillas.clone();
        h.extend(data_marked(&partners[0]));
        h.sort_unstable();
        c.push(Instruction::H(h));
        c.push(Instruction::Tick);

        for layer in 0..4 {
            let pairs: Vec<(u32, u32)> = layout
                .stabilisers
                .iter()
                .enumerate()
                .filter_map(|(s, stab)| stab.partner(layer).map(|q| (layout.ancilla(s), q)))
                .collect();
            c.push(Instruction::Cz(pairs));
            c.push(Instruction::Tick);

            let h: Vec<u32> = if layer < 3 {
                let flip: Vec<bool> = partners[layer]
                    .iter()
                    .zip(&partners[layer + 1])
                    .map(|(a, b)| a ^ b)
                    .collect();
                data_marked(&flip)
            } else {
                let mut h = data_marked(&partners[3]);
                h.extend(ancillas.iter().copied());
                h
            };
            if !h.is_empty() {
                c.push(Instruction::H(h));
                c.push(Instruction::Tick);
            }
        }

        c.push(Instruction::Measure {
            targets: ancillas.clone(),
            flip_probability: 0.0,
        });
        c.push(Instruction::Tick);

        let this_round = (round as u32 - 1) * n_anc;
        for (s, stab) in layout.stabilisers.iter().enumerate() {
            let m = this_round + s as u32;
            let records = match (stab.basis, round) {
                (Basis::Z, 1) => vec![m],
                (_, r) if r > 1 => vec![m - n_anc, m],
                _ => continue,
            };
            c.push(Instruction::Detector {
                info: DetectorInfo {
                    x: stab.position.0,
                    y: stab.position.1,
                    round: round as u32,
                    basis: stab.basis,
                },
                records,
            });
        }
    }

    let data: Vec<u32> = (0..layout.num_data()).collect();
    c.push(Instruction::Measure {
        targets: data,
        flip_probability: 0.0,
    });
    let data_base = rounds as u32 * n_anc;
    let last_round = (rounds as u32 - 1) * n_anc;
    for (s, stab) in layout.stabilisers.iter().enumerate() {
        if stab.basis != Basis::Z {
            continue;
        }
        let mut records = vec![last_round + s as u32];
        records.extend(stab.support().map(|q| data_base + q));
        c.push(Instruction::Detector {
            info: DetectorInfo {
                x: stab.position.0,
                y: stab.position.1,
                round: rounds as u32 + 1,
                basis: Basis::Z,
            },
            records,
        });
    }
    c.push(Instruction::ObservableInclude {
        index: 0,
        records: layout
            .logical_z_support()
            .into_iter()
            .map(|q| data_base + q)
            .collect(),
    });
    c.validate()?;
    Ok(c)
}

/// Noisy rotated-code Z-memory circuit under the circuit-level noise model
/// with physical error rate `p_phys`.
pub fn build_memory_circuit(distance: usize, rounds: usize, p_phys: f64) -> Result<Circuit> {
    let circuit = build_noiseless_memory_circuit(distance, rounds)?;
    apply_noise_model_with(&circuit, &NoiseModel::new(p_phys))
}

/// Number of detectors of a `rounds`-round distance-`d` memory experiment.
pub fn detector_count(distance: usize, rounds: usize) -> usize {
    let per_type = (distance * distance - 1) / 2;
    per_type * (rounds + 1) + per_type * (rounds - 1)
}
