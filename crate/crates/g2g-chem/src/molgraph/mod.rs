//! Molecular graph data model: atoms, bonds, valence rules, SMILES I/O and
//! Morgan fingerprints.

mod fingerprint;
mod parser;
mod writer;

pub use fingerprint::{
    morgan_fingerprint, similarity, tanimoto, Fingerprint, FingerprintError, DEFAULT_NBITS,
    DEFAULT_RADIUS,
};
pub use parser::{parse_smiles, parse_smiles_with_warnings};
pub use writer::{colored_key, isomorphic, write_smiles};

use std::fmt;
use thiserror::Error;

/// Supported chemical elements (organic subset).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Element {
    C,
    N,
    O,
    S,
    P,
    F,
    Cl,
    Br,
    I,
}

impl Element {
    pub const ALL: [Element; 9] = [
        Element::C,
        Element::N,
        Element::O,
        Element::S,
        Element::P,
        Element::F,
        Element::Cl,
        Element::Br,
        Element::I,
    ];

    pub fn symbol(self) -> &'static str {
        match self {
            Element::C => "C",
            Element::N => "N",
            Element::O => "O",
            Element::S => "S",
            Element::P => "P",
            Element::F => "F",
            Element::Cl => "Cl",
            Element::Br => "Br",
            Element::I => "I",
        }
    }

    pub fn from_symbol(s: &str) -> Option<Element> {
        Element::ALL.iter().copied().find(|e| e.symbol() == s)
    }

    /// Standard valences, ascending. Multi-valent S and P list every state.
    pub fn valences(self) -> &'static [u8] {
        match self {
            Element::C => &[4],
            Element::N => &[3],
            Element::O => &[2],
            Element::S => &[2, 4, 6],
            Element::P => &[3, 5],
            Element::F | Element::Cl | Element::Br | Element::I => &[1],
        }
    }

    /// Largest entry of the valence table.
    pub fn max_valence(self) -> u8 {
        *self.valences().last().unwrap()
    }

    /// True when the element may appear aromatic (lowercase in SMILES).
    pub fn supports_aromatic(self) -> bool {
        matches!(
            self,
            Element::C | Element::N | Element::O | Element::S | Element::P
        )
    }

    /// Average atomic weight.
    pub fn atomic_weight(self) -> f64 {
        match self {
            Element::C => 12.011,
            Element::N => 14.007,
            Element::O => 15.999,
            Element::S => 32.06,
            Element::P => 30.974,
            Element::F => 18.998,
            Element::Cl => 35.45,
            Element::Br => 79.904,
            Element::I => 126.904,
        }
    }

    pub fn is_halogen(self) -> bool {
        matches!(self, Element::F | Element::Cl | Element::Br | Element::I)
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// Bond order between two atoms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BondOrder {
    Single,
    Double,
    Triple,
    Aromatic,
}

impl BondOrder {
    /// Contribution to an atom's valence sum. Aromatic bonds count as 1; the
    /// extra pi electron of an aromatic atom is accounted separately.
    pub fn valence_contribution(self) -> u8 {
        match self {
            BondOrder::Single | BondOrder::Aromatic => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
        }
    }

    pub fn code(self) -> u8 {
        match self {
            BondOrder::Single => 0,
            BondOrder::Double => 1,
            BondOrder::Triple => 2,
            BondOrder::Aromatic => 3,
        }
    }
}

/// A heavy atom with its formal charge, hydrogen count and aromatic flag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Atom {
    pub element: Element,
    pub charge: i8,
    pub hydrogens: u8,
    pub aromatic: bool,
}

impl Atom {
    pub fn new(element: Element) -> Atom {
        Atom {
            element,
            charge: 0,
            hydrogens: 0,
            aromatic: false,
        }
    }

    /// Bonding capacity: max valence shifted by the formal charge.
    pub fn capacity(&self) -> u8 {
        let cap = self.element.max_valence() as i16 + self.charge as i16;
        cap.clamp(0, 12) as u8
    }
}

/// An undirected bond between two atom indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Bond {
    pub a: usize,
    pub b: usize,
    pub order: BondOrder,
}

impl Bond {
    pub fn other(&self, atom: usize) -> usize {
        if atom == self.a {
            self.b
        } else {
            self.a
        }
    }
}

/// Errors for molecule construction and SMILES parsing.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum MolError {
    #[error("syntax error at position {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("unmatched ring closure {0}")]
    UnmatchedRingClosure(String),
    #[error("unsupported feature at position {pos}: {msg}")]
    Unsupported { pos: usize, msg: String },
    #[error("bond endpoints invalid: {0}-{1}")]
    BadBond(usize, usize),
    #[error("duplicate bond between atoms {0} and {1}")]
    DuplicateBond(usize, usize),
    #[error("molecule is not connected (multi-fragment input)")]
    Disconnected,
    #[error("molecule has no atoms")]
    Empty,
    #[error("valence violation at atom {atom}: sum {sum} exceeds capacity {capacity}")]
    Valence {
        atom: usize,
        sum: u8,
        capacity: u8,
    },
}

/// One valence-rule violation, reported as data by [`check_valence`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ValenceViolation {
    pub atom: usize,
    pub sum: u8,
    pub capacity: u8,
}

/// An attributed, connected, undirected molecular graph.
#[derive(Debug, Clone, PartialEq)]
pub struct Molecule {
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
    adjacency: Vec<Vec<(usize, usize)>>,
}

impl Molecule {
    /// Builds a molecule and enforces every invariant, including valence.
    pub fn new(atoms: Vec<Atom>, bonds: Vec<Bond>) -> Result<Molecule, MolError> {
        let m = Molecule::structural(atoms, bonds)?;
        if let Some(v) = check_valence(&m).into_iter().next() {
            return Err(MolError::Valence {
                atom: v.atom,
                sum: v.sum,
                capacity: v.capacity,
            });
        }
        Ok(m)
    }

    /// Builds a molecule checking structural invariants only (indices,
    /// duplicate bonds, connectivity); valence violations are permitted so
    /// that [`check_valence`] can report them as data.
    pub fn structural(atoms: Vec<Atom>, bonds: Vec<Bond>) -> Result<Molecule, MolError> {
        if atoms.is_empty() {
            return Err(MolError::Empty);
        }
        let n = atoms.len();
        let mut adjacency = vec![Vec::new(); n];
        let mut seen = std::collections::BTreeSet::new();
        for (bi, bond) in bonds.iter().enumerate() {
            if bond.a == bond.b || bond.a >= n || bond.b >= n {
                return Err(MolError::BadBond(bond.a, bond.b));
            }
            let key = (bond.a.min(bond.b), bond.a.max(bond.b));
            if !seen.insert(key) {
                return Err(MolError::DuplicateBond(key.0, key.1));
            }
            adjacency[bond.a].push((bond.b, bi));
            adjacency[bond.b].push((bond.a, bi));
        }
        for nbrs in &mut adjacency {
            nbrs.sort_unstable();
        }
        let m = Molecule {
            atoms,
            bonds,
            adjacency,
        };
        if !m.is_connected() {
            return Err(MolError::Disconnected);
        }
        Ok(m)
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    pub fn bond_count(&self) -> usize {
        self.bonds.len()
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    pub fn atom(&self, i: usize) -> &Atom {
        &self.atoms[i]
    }

    pub fn bond(&self, i: usize) -> &Bond {
        &self.bonds[i]
    }

    /// Neighbors of atom `i` as (neighbor index, bond index), sorted.
    pub fn neighbors(&self, i: usize) -> &[(usize, usize)] {
        &self.adjacency[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }

    pub fn bond_between(&self, a: usize, b: usize) -> Option<usize> {
        self.adjacency[a]
            .iter()
            .find(|&&(nb, _)| nb == b)
            .map(|&(_, bi)| bi)
    }

    /// Sum of bond-order contributions at atom `i` (aromatic bonds count 1).
    pub fn bond_order_sum(&self, i: usize) -> u8 {
        self.adjacency[i]
            .iter()
            .map(|&(_, bi)| self.bonds[bi].order.valence_contribution())
            .sum()
    }

    /// Number of independent cycles (|E| - |V| + 1 for a connected graph).
    pub fn ring_count(&self) -> usize {
        self.bonds.len() + 1 - self.atoms.len()
    }

    /// Average molecular weight including implicit/explicit hydrogens.
    pub fn molecular_weight(&self) -> f64 {
        self.atoms
            .iter()
            .map(|a| a.element.atomic_weight() + a.hydrogens as f64 * 1.008)
            .sum()
    }

    /// Relabels atoms so old index `i` becomes `perm[i]`, remapping bonds.
    /// `perm` must be a permutation of `0..atom_count`.
    pub fn permuted(&self, perm: &[usize]) -> Molecule {
        assert_eq!(perm.len(), self.atoms.len());
        let mut atoms = vec![self.atoms[0]; self.atoms.len()];
        for (old, &new) in perm.iter().enumerate() {
            atoms[new] = self.atoms[old];
        }
        let bonds = self
            .bonds
            .iter()
            .map(|b| Bond {
                a: perm[b.a],
                b: perm[b.b],
                order: b.order,
            })
            .collect();
        Molecule::structural(atoms, bonds).expect("permutation preserves structure")
    }

    fn is_connected(&self) -> bool {
        let n = self.atoms.len();
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = stack.pop() {
            for &(v, _) in &self.adjacency[u] {
                if !seen[v] {
                    seen[v] = true;
                    count += 1;
                    stack.push(v);
                }
            }
        }
        count == n
    }
}

/// Hydrogen count an unannotated atom is assumed to carry: the smallest
/// standard valence (shifted by charge) that accommodates the bond sum, minus
/// the bond sum. Aromatic atoms get one extra pi slot, capped at the element
/// maximum.
pub fn implicit_hydrogens(element: Element, charge: i8, bond_sum: u8, aromatic: bool) -> u8 {
    let mut eff = bond_sum as i16;
    if aromatic {
        eff = (eff + 1).min(element.max_valence() as i16 + charge as i16);
    }
    for &v in element.valences() {
        let cap = v as i16 + charge as i16;
        if cap >= eff {
            return (cap - eff) as u8;
        }
    }
    0
}

/// Reports every atom whose bond-order sum plus hydrogens exceeds its
/// capacity. An empty list means the molecule satisfies the valence table.
pub fn check_valence(m: &Molecule) -> Vec<ValenceViolation> {
    let mut out = Vec::new();
    for (i, atom) in m.atoms.iter().enumerate() {
        let sum = m.bond_order_sum(i) + atom.hydrogens;
        let capacity = atom.capacity();
        if sum > capacity {
            out.push(ValenceViolation {
                atom: i,
                sum,
                capacity,
            });
        }
    }
    out
}
