//! SMILES reader for the supported subset: organic-subset atoms, bracket
//! atoms with charge and hydrogen counts, ring closures (digits and `%nn`),
//! branches, bond symbols `- = # :` and aromatic lowercase atoms.
//!
//! Stereo markers (`/ \ @`) are stripped with a warning; isotopes are
//! rejected.

use std::collections::BTreeMap;

use super::{implicit_hydrogens, Atom, Bond, BondOrder, Element, MolError, Molecule};

/// Parses a single-fragment SMILES string.
pub fn parse_smiles(text: &str) -> Result<Molecule, MolError> {
    parse_smiles_with_warnings(text).map(|(m, _)| m)
}

/// Like [`parse_smiles`] but also returns the warnings emitted for stripped
/// stereochemistry markers.
pub fn parse_smiles_with_warnings(text: &str) -> Result<(Molecule, Vec<String>), MolError> {
    let mut p = Parser::new(text.trim());
    p.run()?;
    p.finish()
}

struct PendingAtom {
    atom: Atom,
    explicit_h: bool,
}

struct Parser<'a> {
    bytes: &'a [u8],
    pos: usize,
    atoms: Vec<PendingAtom>,
    bonds: Vec<Bond>,
    branch_stack: Vec<usize>,
    prev: Option<usize>,
    pending_bond: Option<BondOrder>,
    // ring number -> (atom, explicit bond at opening, opening position)
    open_rings: BTreeMap<u32, (usize, Option<BondOrder>, usize)>,
    warnings: Vec<String>,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str) -> Parser<'a> {
        Parser {
            bytes: text.as_bytes(),
            pos: 0,
            atoms: Vec::new(),
            bonds: Vec::new(),
            branch_stack: Vec::new(),
            prev: None,
            pending_bond: None,
            open_rings: BTreeMap::new(),
            warnings: Vec::new(),
        }
    }

    fn syntax(&self, msg: impl Into<String>) -> MolError {
        MolError::Syntax {
            pos: self.pos,
            msg: msg.into(),
        }
    }

    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn bump(&mut self) -> Option<u8> {
        let c = self.peek();
        if c.is_some() {
            self.pos += 1;
        }
        c
    }

    fn run(&mut self) -> Result<(), MolError> {
        while let Some(c) = self.peek() {
            match c {
                b'(' => {
                    self.pos += 1;
                    let prev = self
                        .prev
                        .ok_or_else(|| self.syntax("branch before any atom"))?;
                    self.branch_stack.push(prev);
                }
                b')' => {
                    self.pos += 1;
                    if self.pending_bond.is_some() {
                        return Err(self.syntax("dangling bond before ')'"));
                    }
                    let prev = self
                        .branch_stack
                        .pop()
                        .ok_or_else(|| self.syntax("unmatched ')'"))?;
                    self.prev = Some(prev);
                }
                b'-' => {
                    self.pos += 1;
                    self.set_pending(BondOrder::Single)?;
                }
                b'=' => {
                    self.pos += 1;
                    self.set_pending(BondOrder::Double)?;
                }
                b'#' => {
                    self.pos += 1;
                    self.set_pending(BondOrder::Triple)?;
                }
                b':' => {
                    self.pos += 1;
                    self.set_pending(BondOrder::Aromatic)?;
                }
                b'/' | b'\\' => {
                    self.warnings.push(format!(
                        "stripped stereo bond marker '{}' at position {}",
                        c as char, self.pos
                    ));
                    self.pos += 1;
                    self.set_pending(BondOrder::Single)?;
                }
                b'.' => {
                    return Err(MolError::Disconnected);
                }
                b'%' => {
                    self.pos += 1;
                    let d1 = self.bump();
                    let d2 = self.bump();
                    match (d1, d2) {
                        (Some(a), Some(b)) if a.is_ascii_digit() && b.is_ascii_digit() => {
                            let n = (a - b'0') as u32 * 10 + (b - b'0') as u32;
                            self.ring_closure(n)?;
                        }
                        _ => return Err(self.syntax("'%' must be followed by two digits")),
                    }
                }
                b'0'..=b'9' => {
                    self.pos += 1;
                    self.ring_closure((c - b'0') as u32)?;
                }
                b'[' => {
                    self.bracket_atom()?;
                }
                b'@' => {
                    return Err(self.syntax("chirality marker outside brackets"));
                }
                _ if c.is_ascii_whitespace() => {
                    return Err(self.syntax("whitespace inside SMILES"));
                }
                _ => {
                    self.bare_atom()?;
                }
            }
        }
        Ok(())
    }

    fn set_pending(&mut self, order: BondOrder) -> Result<(), MolError> {
        if self.pending_bond.is_some() {
            return Err(self.syntax("two consecutive bond symbols"));
        }
        if self.prev.is_none() {
            return Err(self.syntax("bond symbol before any atom"));
        }
        self.pending_bond = Some(order);
        Ok(())
    }

    fn bare_atom(&mut self) -> Result<(), MolError> {
        let start = self.pos;
        let c = self.bump().unwrap();
        let (element, aromatic) = match c {
            b'C' => {
                if self.peek() == Some(b'l') {
                    self.pos += 1;
                    (Element::Cl, false)
                } else {
                    (Element::C, false)
                }
            }
            b'B' => {
                if self.peek() == Some(b'r') {
                    self.pos += 1;
                    (Element::Br, false)
                } else {
                    self.pos = start;
                    return Err(self.syntax("unsupported element 'B'"));
                }
            }
            b'N' => (Element::N, false),
            b'O' => (Element::O, false),
            b'S' => (Element::S, false),
            b'P' => (Element::P, false),
            b'F' => (Element::F, false),
            b'I' => (Element::I, false),
            b'c' => (Element::C, true),
            b'n' => (Element::N, true),
            b'o' => (Element::O, true),
            b's' => (Element::S, true),
            b'p' => (Element::P, true),
            _ => {
                self.pos = start;
                return Err(self.syntax(format!("unexpected character '{}'", c as char)));
            }
        };
        let mut atom = Atom::new(element);
        atom.aromatic = aromatic;
        self.push_atom(atom, false)
    }

    fn bracket_atom(&mut self) -> Result<(), MolError> {
        let open_pos = self.pos;
        self.pos += 1; // consume '['
        if matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
            return Err(MolError::Unsupported {
                pos: self.pos,
                msg: "isotope specifications are not supported".into(),
            });
        }
        let (element, aromatic) = self.bracket_symbol()?;
        if aromatic && !element.supports_aromatic() {
            return Err(self.syntax(format!("element {} cannot be aromatic", element)));
        }
        // Chirality markers are stripped.
        while self.peek() == Some(b'@') {
            self.warnings.push(format!(
                "stripped chirality marker at position {}",
                self.pos
            ));
            self.pos += 1;
        }
        // Hydrogen count.
        let mut hydrogens = 0u8;
        if self.peek() == Some(b'H') {
            self.pos += 1;
            hydrogens = 1;
            if let Some(c) = self.peek() {
                if c.is_ascii_digit() {
                    self.pos += 1;
                    hydrogens = c - b'0';
                }
            }
        }
        // Charge.
        let mut charge = 0i8;
        while let Some(c) = self.peek() {
            match c {
                b'+' => {
                    self.pos += 1;
                    charge += 1;
                }
                b'-' => {
                    self.pos += 1;
                    charge -= 1;
                }
                _ => break,
            }
        }
        if charge != 0 {
            if let Some(c) = self.peek() {
                if c.is_ascii_digit() {
                    self.pos += 1;
                    charge = charge.signum() * (c - b'0') as i8;
                }
            }
        }
        if self.bump() != Some(b']') {
            self.pos = open_pos;
            return Err(self.syntax("unterminated bracket atom"));
        }
        let mut atom = Atom::new(element);
        atom.aromatic = aromatic;
        atom.hydrogens = hydrogens;
        atom.charge = charge;
        self.push_atom(atom, true)
    }

    fn bracket_symbol(&mut self) -> Result<(Element, bool), MolError> {
        let c = self
            .bump()
            .ok_or_else(|| self.syntax("unterminated bracket atom"))?;
        match c {
            b'C' => {
                if self.peek() == Some(b'l') {
                    self.pos += 1;
                    Ok((Element::Cl, false))
                } else {
                    Ok((Element::C, false))
                }
            }
            b'B' => {
                if self.peek() == Some(b'r') {
                    self.pos += 1;
                    Ok((Element::Br, false))
                } else {
                    Err(self.syntax("unsupported element 'B'"))
                }
            }
            b'N' => Ok((Element::N, false)),
            b'O' => Ok((Element::O, false)),
            b'S' => Ok((Element::S, false)),
            b'P' => Ok((Element::P, false)),
            b'F' => Ok((Element::F, false)),
            b'I' => Ok((Element::I, false)),
            b'c' => Ok((Element::C, true)),
            b'n' => Ok((Element::N, true)),
            b'o' => Ok((Element::O, true)),
            b's' => Ok((Element::S, true)),
            b'p' => Ok((Element::P, true)),
            b'H' => Err(MolError::Unsupported {
                pos: self.pos,
                msg: "explicit hydrogen atoms are not supported".into(),
            }),
            _ => Err(self.syntax(format!("unknown element starting with '{}'", c as char))),
        }
    }

    fn push_atom(&mut self, atom: Atom, explicit_h: bool) -> Result<(), MolError> {
        let idx = self.atoms.len();
        self.atoms.push(PendingAtom { atom, explicit_h });
        if let Some(prev) = self.prev {
            let order = self.resolve_bond(prev, idx);
            self.bonds.push(Bond {
                a: prev,
                b: idx,
                order,
            });
        } else if self.pending_bond.is_some() {
            return Err(self.syntax("bond symbol before first atom"));
        }
        self.pending_bond = None;
        self.prev = Some(idx);
        Ok(())
    }

    fn resolve_bond(&mut self, a: usize, b: usize) -> BondOrder {
        if let Some(order) = self.pending_bond {
            order
        } else if self.atoms[a].atom.aromatic && self.atoms[b].atom.aromatic {
            BondOrder::Aromatic
        } else {
            BondOrder::Single
        }
    }

    fn ring_closure(&mut self, n: u32) -> Result<(), MolError> {
        let here = self
            .prev
            .ok_or_else(|| self.syntax("ring closure before any atom"))?;
        let pending = self.pending_bond.take();
        if let Some((other, open_bond, _)) = self.open_rings.remove(&n) {
            if other == here {
                return Err(self.syntax(format!("ring bond {} closes on its own atom", n)));
            }
            let order = match (open_bond, pending) {
                (Some(x), Some(y)) if x != y => {
                    return Err(self.syntax(format!("conflicting orders for ring bond {}", n)));
                }
                (Some(x), _) | (_, Some(x)) => x,
                (None, None) => {
                    if self.atoms[other].atom.aromatic && self.atoms[here].atom.aromatic {
                        BondOrder::Aromatic
                    } else {
                        BondOrder::Single
                    }
                }
            };
            self.bonds.push(Bond {
                a: other,
                b: here,
                order,
            });
        } else {
            self.open_rings.insert(n, (here, pending, self.pos));
        }
        Ok(())
    }

    fn finish(self) -> Result<(Molecule, Vec<String>), MolError> {
        if self.atoms.is_empty() {
            return Err(MolError::Empty);
        }
        if let Some((&n, _)) = self.open_rings.iter().next() {
            return Err(MolError::UnmatchedRingClosure(n.to_string()));
        }
        if !self.branch_stack.is_empty() {
            return Err(self.syntax("unclosed '('"));
        }
        if self.pending_bond.is_some() {
            return Err(self.syntax("dangling bond at end of input"));
        }
        // Fill implicit hydrogens for atoms without an explicit count.
        let mut bond_sums = vec![0u8; self.atoms.len()];
        for bond in &self.bonds {
            bond_sums[bond.a] += bond.order.valence_contribution();
            bond_sums[bond.b] += bond.order.valence_contribution();
        }
        let atoms: Vec<Atom> = self
            .atoms
            .iter()
            .enumerate()
            .map(|(i, pa)| {
                let mut atom = pa.atom;
                if !pa.explicit_h {
                    atom.hydrogens = implicit_hydrogens(
                        atom.element,
                        atom.charge,
                        bond_sums[i],
                        atom.aromatic,
                    );
                }
                atom
            })
            .collect();
        let m = Molecule::new(atoms, self.bonds)?;
        Ok((m, self.warnings))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_atom() {
        let m = parse_smiles("C").unwrap();
        assert_eq!(m.atom_count(), 1);
        assert_eq!(m.bond_count(), 0);
        assert_eq!(m.atom(0).hydrogens, 4);
    }

    #[test]
    fn ethanol_hand_enumeration() {
        let m = parse_smiles("CCO").unwrap();
        assert_eq!(m.atom_count(), 3);
        let bonds: Vec<(usize, usize, BondOrder)> =
            m.bonds().iter().map(|b| (b.a, b.b, b.order)).collect();
        assert_eq!(
            bonds,
            vec![(0, 1, BondOrder::Single), (1, 2, BondOrder::Single)]
        );
        assert_eq!(m.atom(0).hydrogens, 3);
        assert_eq!(m.atom(1).hydrogens, 2);
        assert_eq!(m.atom(2).hydrogens, 1);
    }

    #[test]
    fn benzene_hand_enumeration() {
        let m = parse_smiles("c1ccccc1").unwrap();
        assert_eq!(m.atom_count(), 6);
        assert_eq!(m.bond_count(), 6);
        assert!(m.atoms().iter().all(|a| a.aromatic));
        assert!(m
            .bonds()
            .iter()
            .all(|b| b.order == BondOrder::Aromatic));
        assert!(m.atoms().iter().all(|a| a.hydrogens == 1));
        // 6-cycle: every atom has degree 2.
        assert!((0..6).all(|i| m.degree(i) == 2));
    }

    #[test]
    fn branches_and_double_bonds() {
        let m = parse_smiles("CC(=O)O").unwrap();
        assert_eq!(m.atom_count(), 4);
        assert_eq!(m.bond_count(), 3);
        assert_eq!(
            m.bond(m.bond_between(1, 2).unwrap()).order,
            BondOrder::Double
        );
        assert_eq!(
            m.bond(m.bond_between(1, 3).unwrap()).order,
            BondOrder::Single
        );
    }

    #[test]
    fn bracket_charges_and_h() {
        let m = parse_smiles("[NH4+]").unwrap();
        assert_eq!(m.atom(0).charge, 1);
        assert_eq!(m.atom(0).hydrogens, 4);
        let m = parse_smiles("[O-]C").unwrap();
        assert_eq!(m.atom(0).charge, -1);
        assert_eq!(m.atom(0).hydrogens, 0);
    }

    #[test]
    fn pyrrole_keeps_bracket_hydrogen() {
        let m = parse_smiles("c1cc[nH]c1").unwrap();
        let n = m
            .atoms()
            .iter()
            .position(|a| a.element == Element::N)
            .unwrap();
        assert_eq!(m.atom(n).hydrogens, 1);
        assert!(check_valence_ok(&m));
    }

    fn check_valence_ok(m: &Molecule) -> bool {
        super::super::check_valence(m).is_empty()
    }

    #[test]
    fn stereo_stripped_with_warning() {
        let (m, warnings) = parse_smiles_with_warnings("C/C=C/C").unwrap();
        assert_eq!(m.atom_count(), 4);
        assert_eq!(warnings.len(), 2);
        let (_, warnings) = parse_smiles_with_warnings("[C@H](C)(N)O").unwrap();
        assert_eq!(warnings.len(), 1);
    }

    #[test]
    fn isotopes_rejected() {
        assert!(matches!(
            parse_smiles("[13C]"),
            Err(MolError::Unsupported { .. })
        ));
    }

    #[test]
    fn unmatched_ring_closure() {
        assert!(matches!(
            parse_smiles("C1CC"),
            Err(MolError::UnmatchedRingClosure(_))
        ));
    }

    #[test]
    fn syntax_error_reports_position() {
        match parse_smiles("CC!C") {
            Err(MolError::Syntax { pos, .. }) => assert_eq!(pos, 2),
            other => panic!("expected syntax error, got {:?}", other),
        }
    }

    #[test]
    fn multi_fragment_rejected() {
        assert_eq!(parse_smiles("C.C").unwrap_err(), MolError::Disconnected);
    }

    #[test]
    fn valence_violation_rejected() {
        assert!(matches!(
            parse_smiles("C(C)(C)(C)(C)C"),
            Err(MolError::Valence { .. })
        ));
    }

    #[test]
    fn percent_ring_closure() {
        let m = parse_smiles("C%12CCCCC%12").unwrap();
        assert_eq!(m.atom_count(), 6);
        assert_eq!(m.bond_count(), 6);
    }

    #[test]
    fn triple_bond() {
        let m = parse_smiles("C#N").unwrap();
        assert_eq!(
            m.bond(0).order,
            BondOrder::Triple
        );
        assert_eq!(m.atom(0).hydrogens, 1);
        assert_eq!(m.atom(1).hydrogens, 0);
    }
}
