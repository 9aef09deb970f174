//! Cross-check of the parser against hand-enumerated counts on a
//! 50-molecule corpus. Expected values follow mechanically from the SMILES
//! grammar: atoms = atom tokens, bonds = atoms - 1 + ring closures,
//! aromatic atoms = lowercase tokens, rings = closure count.

use g2g_chem::molgraph::{check_valence, parse_smiles};

// (smiles, atoms, bonds, aromatic atoms, rings, total charge)
const CORPUS: &[(&str, usize, usize, usize, usize, i32)] = &[
    ("C", 1, 0, 0, 0, 0),
    ("CC", 2, 1, 0, 0, 0),
    ("CCC", 3, 2, 0, 0, 0),
    ("CCCC", 4, 3, 0, 0, 0),
    ("CCCCC", 5, 4, 0, 0, 0),
    ("CCO", 3, 2, 0, 0, 0),
    ("CCN", 3, 2, 0, 0, 0),
    ("CCCl", 3, 2, 0, 0, 0),
    ("CBr", 2, 1, 0, 0, 0),
    ("CI", 2, 1, 0, 0, 0),
    ("CF", 2, 1, 0, 0, 0),
    ("CCS", 3, 2, 0, 0, 0),
    ("COC", 3, 2, 0, 0, 0),
    ("CNC", 3, 2, 0, 0, 0),
    ("CC=C", 3, 2, 0, 0, 0),
    ("C#C", 2, 1, 0, 0, 0),
    ("C#N", 2, 1, 0, 0, 0),
    ("CC#N", 3, 2, 0, 0, 0),
    ("C=O", 2, 1, 0, 0, 0),
    ("CC=O", 3, 2, 0, 0, 0),
    ("CC(C)C", 4, 3, 0, 0, 0),
    ("CC(C)(C)C", 5, 4, 0, 0, 0),
    ("CC(=O)O", 4, 3, 0, 0, 0),
    ("CC(=O)N", 4, 3, 0, 0, 0),
    ("OCCO", 4, 3, 0, 0, 0),
    ("NCCN", 4, 3, 0, 0, 0),
    ("ClCCCl", 4, 3, 0, 0, 0),
    ("CSC", 3, 2, 0, 0, 0),
    ("CCOC", 4, 3, 0, 0, 0),
    ("CP", 2, 1, 0, 0, 0),
    ("[NH4+]", 1, 0, 0, 0, 1),
    ("[O-]C(=O)C", 4, 3, 0, 0, -1),
    ("C[N+](C)(C)C", 5, 4, 0, 0, 1),
    ("C1CC1", 3, 3, 0, 1, 0),
    ("C1CCC1", 4, 4, 0, 1, 0),
    ("C1CCCC1", 5, 5, 0, 1, 0),
    ("C1CCCCC1", 6, 6, 0, 1, 0),
    ("C1CCOC1", 5, 5, 0, 1, 0),
    ("C1CCNC1", 5, 5, 0, 1, 0),
    ("C1CCOCC1", 6, 6, 0, 1, 0),
    ("c1ccccc1", 6, 6, 6, 1, 0),
    ("c1ccncc1", 6, 6, 6, 1, 0),
    ("c1ccoc1", 5, 5, 5, 1, 0),
    ("c1ccsc1", 5, 5, 5, 1, 0),
    ("c1cc[nH]c1", 5, 5, 5, 1, 0),
    ("Cc1ccccc1", 7, 7, 6, 1, 0),
    ("Oc1ccccc1", 7, 7, 6, 1, 0),
    ("Clc1ccccc1", 7, 7, 6, 1, 0),
    ("c1ccc2ccccc2c1", 10, 11, 10, 2, 0),
    ("CC(=O)Oc1ccccc1C(=O)O", 13, 13, 6, 1, 0),
];

#[test]
fn corpus_has_fifty_molecules() {
    assert_eq!(CORPUS.len(), 50);
}

#[test]
fn parser_matches_hand_enumeration() {
    for &(smiles, atoms, bonds, aromatic, rings, charge) in CORPUS {
        let m = parse_smiles(smiles).unwrap_or_else(|e| panic!("{}: {}", smiles, e));
        assert_eq!(m.atom_count(), atoms, "{} atom count", smiles);
        assert_eq!(m.bond_count(), bonds, "{} bond count", smiles);
        assert_eq!(
            m.atoms().iter().filter(|a| a.aromatic).count(),
            aromatic,
            "{} aromatic atoms",
            smiles
        );
        assert_eq!(m.ring_count(), rings, "{} ring count", smiles);
        assert_eq!(
            m.atoms().iter().map(|a| a.charge as i32).sum::<i32>(),
            charge,
            "{} total charge",
            smiles
        );
        assert!(check_valence(&m).is_empty(), "{} valence", smiles);
    }
}
