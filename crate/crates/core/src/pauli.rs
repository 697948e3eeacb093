use std::collections::BTreeMap;
use std::fmt;

/// A non-identity single-qubit Pauli.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pauli {
    X,
    Y,
    Z,
}

impl Pauli {
    pub const ALL: [Pauli; 3] = [Pauli::X, Pauli::Y, Pauli::Z];

    pub fn from_xz(x: bool, z: bool) -> Option<Pauli> {
        match (x, z) {
            (false, false) => None,
            (true, false) => Some(Pauli::X),
            (true, true) => Some(Pauli::Y),
            (false, true) => Some(Pauli::Z),
        }
    }

    pub fn has_x(self) -> bool {
        matches!(self, Pauli::X | Pauli::Y)
    }

    pub fn has_z(self) -> bool {
        matches!(self, Pauli::Z | Pauli::Y)
    }
}

impl fmt::Display for Pauli {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = match self {
            Pauli::X => "X",
            Pauli::Y => "Y",
            Pauli::Z => "Z",
        };
        f.write_str(c)
    }
}

/// Sparse multi-qubit Pauli operator, phases ignored. Identity factors are
/// never stored.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct PauliString {
    factors: BTreeMap<u32, Pauli>,
}

impl PauliString {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn single(qubit: u32, pauli: Pauli) -> Self {
        let mut s = Self::new();
        s.factors.insert(qubit, pauli);
        s
    }

    pub fn get(&self, qubit: u32) -> Option<Pauli> {
        self.factors.get(&qubit).copied()
    }

    /// Multiplies `pauli` onto `qubit`, dropping the entry if it becomes identity.
    pub fn multiply(&mut self, qubit: u32, pauli: Pauli) {
        let (x, z) = match self.factors.get(&qubit) {
            Some(p) => (p.has_x() ^ pauli.has_x(), p.has_z() ^ pauli.has_z()),
            None => (pauli.has_x(), pauli.has_z()),
        };
        match Pauli::from_xz(x, z) {
            Some(p) => {
                self.factors.insert(qubit, p);
            }
            None => {
                self.factors.remove(&qubit);
            }
        }
    }

    pub fn weight(&self) -> usize {
        self.factors.len()
    }

    pub fn is_identity(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, Pauli)> + '_ {
        self.factors.iter().map(|(&q, &p)| (q, p))
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.factors.is_empty() {
            return f.write_str("I");
        }
        let mut first = true;
        for (q, p) in self.iter() {
            if !first {
                f.write_str("*")?;
            }
            write!(f, "{p}{q}")?;
            first = false;
        }
        Ok(())
    }
}
