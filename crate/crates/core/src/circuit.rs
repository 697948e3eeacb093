//! Stabiliser circuits with noise channels and detector annotations.
//!
//! The text format is line oriented, one instruction per line:
//!
//! ```text
//! QUBITS 17
//! QUBIT_COORDS(1,1) 0
//! R 0 1 2
//! DEPOLARIZE1(0.001) 0 1 2
//! TICK
//! H 9
//! CZ 0 9 1 10
//! DEPOLARIZE2(0.01) 0 9 1 10
//! M(0.01) 9 10
//! DETECTOR(2,0,1,Z) 0 8
//! OBSERVABLE_INCLUDE(0) 20 21 22
//! ```
//!
//! Detector and observable arguments are absolute measurement-record
//! indices. `M` without a parenthesised argument is a noiseless measurement.
//! Blank lines and text after `#` are ignored.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which stabiliser family a detector compares.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Basis {
    X,
    Z,
}

impl fmt::Display for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Basis::X => "X",
            Basis::Z => "Z",
        })
    }
}

impl FromStr for Basis {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "X" => Ok(Basis::X),
            "Z" => Ok(Basis::Z),
            other => Err(format!("unknown basis {other:?}")),
        }
    }
}

/// Where a detector lives: stabiliser position, round and basis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DetectorInfo {
    pub x: i32,
    pub y: i32,
    pub round: u32,
    pub basis: Basis,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Instruction {
    Reset(Vec<u32>),
    Measure {
        targets: Vec<u32>,
        flip_probability: f64,
    },
    H(Vec<u32>),
    Cz(Vec<(u32, u32)>),
    Depolarize1 {
        targets: Vec<u32>,
        probability: f64,
    },
    Depolarize2 {
        pairs: Vec<(u32, u32)>,
        probability: f64,
    },
    Tick,
    Detector {
        info: DetectorInfo,
        records: Vec<u32>,
    },
    ObservableInclude {
        index: u32,
        records: Vec<u32>,
    },
}

impl Instruction {
    pub fn is_noise(&self) -> bool {
        match self {
            Instruction::Depolarize1 { .. } | Instruction::Depolarize2 { .. } => true,
            Instruction::Measure {
                flip_probability, ..
            } => *flip_probability > 0.0,
            _ => false,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Circuit {
    pub num_qubits: u32,
    pub qubit_coords: Vec<(i32, i32)>,
    pub instructions: Vec<Instruction>,
}

impl Circuit {
    pub fn new(num_qubits: u32) -> Self {
        Circuit {
            num_qubits,
            qubit_coords: Vec::new(),
            instructions: Vec::new(),
        }
    }

    pub fn push(&mut self, instruction: Instruction) {
        self.instructions.push(instruction);
    }

    pub fn num_measurements(&self) -> usize {
        self.instructions
            .iter()
            .map(|ins| match ins {
                Instruction::Measure { targets, .. } => targets.len(),
                _ => 0,
            })
            .sum()
    }

    /// Detectors in program order, as (metadata, measurement records).
    pub fn detectors(&self) -> Vec<(DetectorInfo, &[u32])> {
        self.instructions
            .iter()
            .filter_map(|ins| match ins {
                Instruction::Detector { info, records } => Some((*info, records.as_slice())),
                _ => None,
            })
            .collect()
    }

    /// Measurement records of each logical observable, indexed by observable id.
    pub fn observables(&self) -> Vec<Vec<u32>> {
        let mut out: Vec<Vec<u32>> = Vec::new();
        for ins in &self.instructions {
            if let Instruction::ObservableInclude { index, records } = ins {
                let i = *index as usize;
                if out.len() <= i {
                    out.resize(i + 1, Vec::new());
                }
                out[i].extend_from_slice(records);
            }
        }
        out
    }

    pub fn has_noise(&self) -> bool {
        self.instructions.iter().any(Instruction::is_noise)
    }

    /// Checks qubit ranges, CZ disjointness, probabilities and record indices.
    pub fn validate(&self) -> Result<()> {
        let n = self.num_qubits;
        let check_qubit = |q: u32, at: usize| -> Result<()> {
            if q >= n {
                return Err(Error::Structure(format!(
                    "instruction {at}: qubit {q} out of range (qubit count {n})"
                )));
            }
            Ok(())
        };
        let check_prob = |p: f64, at: usize| -> Result<()> {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Structure(format!(
                    "instruction {at}: probability {p} outside [0, 1]"
                )));
            }
            Ok(())
        };
        let mut measured = 0u32;
        for (at, ins) in self.instructions.iter().enumerate() {
            match ins {
                Instruction::Reset(t) | Instruction::H(t) => {
                    for &q in t {
                        check_qubit(q, at)?;
                    }
                }
                Instruction::Measure {
                    targets,
                    flip_probability,
                } => {
                    check_prob(*flip_probability, at)?;
                    for &q in targets {
                        check_qubit(q, at)?;
                    }
                    measured += targets.len() as u32;
                }
                Instruction::Depolarize1 {
                    targets,
                    probability,
                } => {
                    check_prob(*probability, at)?;
                    for &q in targets {
                        check_qubit(q, at)?;
                    }
                }
                Instruction::Cz(pairs)
                | Instruction::Depolarize2 { pairs, .. } => {
                    if let Instruction::Depolarize2 { probability, .. } = ins {
                        check_prob(*probability, at)?;
                    }
                    let mut seen = vec![false; n as usize];
                    for &(a, b) in pairs {
                        check_qubit(a, at)?;
                        check_qubit(b, at)?;
                        if a == b || seen[a as usize] || seen[b as usize] {
                            return Err(Error::Structure(format!(
                                "instruction {at}: two-qubit targets overlap at ({a}, {b})"
                            )));
                        }
                        seen[a as usize] = true;
                        seen[b as usize] = true;
                    }
                }
                Instruction::Detector { records, .. }
                | Instruction::ObservableInclude { records, .. } => {
                    if let Some(&r) = records.iter().find(|&&r| r >= measured) {
                        return Err(Error::Structure(format!(
                            "instruction {at}: record {r} refers to a future measurement"
                        )));
                    }
                }
                Instruction::Tick => {}
            }
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        self.to_string()
    }

    pub fn parse(text: &str) -> Result<Circuit> {
        let mut circuit = Circuit::default();
        let mut saw_header = false;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| Error::Parse {
                line: lineno + 1,
                message,
            };
            let (head, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
            let (name, arg) = match head.split_once('(') {
                Some((name, tail)) => {
                    let inner = tail
                        .strip_suffix(')')
                        .ok_or_else(|| err(format!("unterminated argument in {head:?}")))?;
                    (name, Some(inner))
                }
                None => (head, None),
            };
            let ints: Vec<u32> = rest
                .split_whitespace()
                .map(|t| t.parse::<u32>().map_err(|e| err(format!("bad target {t:?}: {e}"))))
                .collect::<Result<_>>()?;
            let prob = |arg: Option<&str>| -> Result<f64> {
                let a = arg.ok_or_else(|| err(format!("{name} needs a probability")))?;
                a.parse::<f64>()
                    .map_err(|e| err(format!("bad probability {a:?}: {e}")))
            };
            let pairs = |ints: &[u32]| -> Result<Vec<(u32, u32)>> {
                if !ints.len().is_multiple_of(2) {
                    return Err(err(format!("{name} needs an even number of targets")));
                }
                Ok(ints.chunks(2).map(|c| (c[0], c[1])).collect())
            };
            let ins = match name {
                "QUBITS" => {
                    if ints.len() != 1 {
                        return Err(err("QUBITS takes one count".into()));
                    }
                    circuit.num_qubits = ints[0];
                    saw_header = true;
                    continue;
                }
                "QUBIT_COORDS" => {
                    let a = arg.ok_or_else(|| err("QUBIT_COORDS needs coordinates".into()))?;
                    let c: Vec<i32> = a
                        .split(',')
                        .map(|t| t.trim().parse::<i32>().map_err(|e| err(e.to_string())))
                        .collect::<Result<_>>()?;
                    if c.len() != 2 || ints.len() != 1 {
                        return Err(err("QUBIT_COORDS(x,y) q".into()));
                    }
                    let q = ints[0] as usize;
                    if circuit.qubit_coords.len() <= q {
                        circuit.qubit_coords.resize(q + 1, (0, 0));
                    }
                    circuit.qubit_coords[q] = (c[0], c[1]);
                    continue;
                }
                "R" => Instruction::Reset(ints),
                "H" => Instruction::H(ints),
                "M" => Instruction::Measure {
                    targets: ints,
                    flip_probability: match arg {
                        Some(_) => prob(arg)?,
                        None => 0.0,
                    },
                },
                "CZ" => Instruction::Cz(pairs(&ints)?),
                "DEPOLARIZE1" => Instruction::Depolarize1 {
                    targets: ints,
                    probability: prob(arg)?,
                },
                "DEPOLARIZE2" => Instruction::Depolarize2 {
                    pairs: pairs(&ints)?,
                    probability: prob(arg)?,
                },
                "TICK" => Instruction::Tick,
                "DETECTOR" => {
                    let a = arg.ok_or_else(|| err("DETECTOR needs (x,y,round,basis)".into()))?;
                    let parts: Vec<&str> = a.split(',').map(str::trim).collect();
                    if parts.len() != 4 {
                        return Err(err("DETECTOR needs (x,y,round,basis)".into()));
                    }
                    let parse_i = |s: &str| s.parse::<i32>().map_err(|e| err(e.to_string()));
                    Instruction::Detector {
                        info: DetectorInfo {
                            x: parse_i(parts[0])?,
                            y: parse_i(parts[1])?,
                            round: parts[2].parse::<u32>().map_err(|e| err(e.to_string()))?,
                            basis: parts[3].parse::<Basis>().map_err(err)?,
                        },
                        records: ints,
                    }
                }
                "OBSERVABLE_INCLUDE" => {
                    let a = arg.ok_or_else(|| err("OBSERVABLE_INCLUDE needs an index".into()))?;
                    Instruction::ObservableInclude {
                        index: a.trim().parse::<u32>().map_err(|e| err(e.to_string()))?,
                        records: ints,
                    }
                }
                other => return Err(err(format!("unknown instruction {other:?}"))),
            };
            circuit.instructions.push(ins);
        }
        if !saw_header {
            return Err(Error::Parse {
                line: 0,
                message: "missing QUBITS header".into(),
            });
        }
        circuit.validate()?;
        Ok(circuit)
    }
}

fn join<T: fmt::Display>(items: impl IntoIterator<Item = T>) -> String {
    let mut s = String::new();
    for item in items {
        let _ = write!(s, " {item}");
    }
    s
}

fn join_pairs(pairs: &[(u32, u32)]) -> String {
    join(pairs.iter().flat_map(|&(a, b)| [a, b]))
}

impl fmt::Display for Circuit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "QUBITS {}", self.num_qubits)?;
        for (q, (x, y)) in self.qubit_coords.iter().enumerate() {
            writeln!(f, "QUBIT_COORDS({x},{y}) {q}")?;
        }
        for ins in &self.instructions {
            match ins {
                Instruction::Reset(t) => writeln!(f, "R{}", join(t))?,
                Instruction::H(t) => writeln!(f, "H{}", join(t))?,
                Instruction::Measure {
                    targets,
                    flip_probability,
                } => {
                    if *flip_probability > 0.0 {
                        writeln!(f, "M({flip_probability}){}", join(targets))?
                    } else {
                        writeln!(f, "M{}", join(targets))?
                    }
                }
                Instruction::Cz(p) => writeln!(f, "CZ{}", join_pairs(p))?,
                Instruction::Depolarize1 {
                    targets,
                    probability,
                } => writeln!(f, "DEPOLARIZE1({probability}){}", join(targets))?,
                Instruction::Depolarize2 { pairs, probability } => {
                    writeln!(f, "DEPOLARIZE2({probability}){}", join_pairs(pairs))?
                }
                Instruction::Tick => writeln!(f, "TICK")?,
                Instruction::Detector { info, records } => writeln!(
                    f,
                    "DETECTOR({},{},{},{}){}",
                    info.x,
                    info.y,
                    info.round,
                    info.basis,
                    join(records)
                )?,
                Instruction::ObservableInclude { index, records } => {
                    writeln!(f, "OBSERVABLE_INCLUDE({index}){}", join(records))?
                }
            }
        }
        Ok(())
    }
}
