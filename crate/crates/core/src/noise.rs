//! Circuit-level noise insertion.

use crate::circuit::{Circuit, Instruction};
use crate::error::{parameter, Error, Result};

/// Circuit-level noise: depolarising noise of strength `p/10` after single-qubit
/// gates, resets, measurements and on idle qubits, two-qubit depolarising noise
/// of strength `p` after each CZ, and measurement results flipped with
/// probability `p`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseModel {
    pub p: f64,
    /// Whether qubits idling during a reset or measurement tick pick up idle noise.
    pub idle_during_measure_reset: bool,
}

impl NoiseModel {
    pub fn new(p: f64) -> Self {
        NoiseModel {
            p,
            idle_during_measure_reset: true,
        }
    }
}

pub fn apply_noise_model(circuit: &Circuit, p_phys: f64) -> Result<Circuit> {
    apply_noise_model_with(circuit, &NoiseModel::new(p_phys))
}

pub fn apply_noise_model_with(circuit: &Circuit, model: &NoiseModel) -> Result<Circuit> {
    let p = model.p;
    if !(0.0..0.5).contains(&p) {
        return parameter(format!("physical error rate must lie in [0, 0.5), got {p}"));
    }
    if circuit.has_noise() {
        return Err(Error::Structure("noise model applied to a noisy circuit".into()));
    }
    if p == 0.0 {
        return Ok(circuit.clone());
    }
    let p1 = p / 10.0;
    let n = circuit.num_qubits as usize;
    let mut out = Circuit {
        num_qubits: circuit.num_qubits,
        qubit_coords: circuit.qubit_coords.clone(),
        instructions: Vec::with_capacity(circuit.instructions.len() * 2),
    };
    let mut busy = vec![false; n];
    let mut any_op = false;
    let mut measure_or_reset = false;

    let close_tick = |out: &mut Circuit, busy: &mut Vec<bool>, any_op: bool, mr: bool| {
        if any_op && (model.idle_during_measure_reset || !mr) {
            let idle: Vec<u32> = (0..n as u32).filter(|&q| !busy[q as usize]).collect();
            if !idle.is_empty() {
                out.push(Instruction::Depolarize1 {
                    targets: idle,
                    probability: p1,
                });
            }
        }
        busy.iter_mut().for_each(|b| *b = false);
    };

    for ins in &circuit.instructions {
        match ins {
            Instruction::Tick => {
                close_tick(&mut out, &mut busy, any_op, measure_or_reset);
                any_op = false;
                measure_or_reset = false;
                out.push(Instruction::Tick);
            }
            Instruction::H(t) => {
                t.iter().for_each(|&q| busy[q as usize] = true);
                any_op = true;
                out.push(ins.clone());
                out.push(Instruction::Depolarize1 {
                    targets: t.clone(),
                    probability: p1,
                });
            }
            Instruction::Reset(t) => {
                t.iter().for_each(|&q| busy[q as usize] = true);
                any_op = true;
                measure_or_reset = true;
                out.push(ins.clone());
                out.push(Instruction::Depolarize1 {
                    targets: t.clone(),
                    probability: p1,
                });
            }
            Instruction::Measure { targets, .. } => {
                targets.iter().for_each(|&q| busy[q as usize] = true);
                any_op = true;
                measure_or_reset = true;
                out.push(Instruction::Measure {
                    targets: targets.clone(),
                    flip_probability: p,
                });
                out.push(Instruction::Depolarize1 {
                    targets: targets.clone(),
                    probability: p1,
                });
            }
            Instruction::Cz(pairs) => {
                for &(a, b) in pairs {
                    busy[a as usize] = true;
                    busy[b as usize] = true;
                }
                any_op = true;
                out.push(ins.clone());
                out.push(Instruction::Depolarize2 {
                    pairs: pairs.clone(),
                    probability: p,
                });
            }
            Instruction::Detector { .. } | Instruction::ObservableInclude { .. } => {
                out.push(ins.clone())
            }
            Instruction::Depolarize1 { .. } | Instruction::Depolarize2 { .. } => unreachable!(),
        }
    }
    close_tick(&mut out, &mut busy, any_op, measure_or_reset);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lone(ins: Instruction, n: u32) -> Circuit {
        let mut c = Circuit::new(n);
        c.push(ins);
        c
    }

    #[test]
    fn h_gets_tenth_strength_depolarising() {
        let noisy = apply_noise_model(&lone(Instruction::H(vec![0]), 1), 0.01).unwrap();
        assert_eq!(
            noisy.instructions,
            vec![
                Instruction::H(vec![0]),
                Instruction::Depolarize1 {
                    targets: vec![0],
                    probability: 0.01 / 10.0
                }
            ]
        );
    }

    #[test]
    fn cz_gets_full_strength_two_qubit_depolarising() {
        let noisy = apply_noise_model(&lone(Instruction::Cz(vec![(0, 1)]), 2), 0.01).unwrap();
        assert_eq!(
            noisy.instructions[1],
            Instruction::Depolarize2 {
                pairs: vec![(0, 1)],
                probability: 0.01
            }
        );
    }

    #[test]
    fn measurement_flip_and_collapse_noise() {
        let c = lone(
            Instruction::Measure {
                targets: vec![0],
                flip_probability: 0.0,
            },
            1,
        );
        let noisy = apply_noise_model(&c, 0.02).unwrap();
        assert_eq!(
            noisy.instructions[0],
            Instruction::Measure {
                targets: vec![0],
                flip_probability: 0.02
            }
        );
        assert!(matches!(noisy.instructions[1], Instruction::Depolarize1 { .. }));
    }

    #[test]
    fn idle_qubits_get_noise_per_tick() {
        let mut c = Circuit::new(3);
        c.push(Instruction::H(vec![0]));
        c.push(Instruction::Tick);
        let noisy = apply_noise_model(&c, 0.01).unwrap();
        assert_eq!(
            noisy.instructions[2],
            Instruction::Depolarize1 {
                targets: vec![1, 2],
                probability: 0.001
            }
        );
    }

    #[test]
    fn idle_switch_skips_measurement_ticks() {
        let mut c = Circuit::new(2);
        c.push(Instruction::Measure {
            targets: vec![0],
            flip_probability: 0.0,
        });
        c.push(Instruction::Tick);
        let mut model = NoiseModel::new(0.01);
        model.idle_during_measure_reset = false;
        let noisy = apply_noise_model_with(&c, &model).unwrap();
        assert_eq!(noisy.instructions.len(), 3);
        model.idle_during_measure_reset = true;
        let noisy = apply_noise_model_with(&c, &model).unwrap();
        assert_eq!(noisy.instructions.len(), 4);
    }

    #[test]
    fn zero_noise_is_identity() {
        let c = crate::surface::build_noiseless_memory_circuit(3, 2).unwrap();
        assert_eq!(apply_noise_model(&c, 0.0).unwrap(), c);
    }

    #[test]
    fn rejects_out_of_range_rates() {
        let c = Circuit::new(1);
        assert!(apply_noise_model(&c, -0.1).is_err());
        assert!(apply_noise_model(&c, 0.5).is_err());
    }

    #[test]
    fn rejects_already_noisy_circuit() {
        let noisy = apply_noise_model(&lone(Instruction::H(vec![0]), 1), 0.01).unwrap();
        assert!(apply_noise_model(&noisy, 0.01).is_err());
    }
}
