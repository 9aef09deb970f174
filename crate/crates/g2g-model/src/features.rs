//! One-hot input features for atoms, bonds and cluster labels.

use g2g_chem::molgraph::{BondOrder, Element, Molecule};

/// Elements (9) + charge in {-1, 0, +1} (3) + degree 0..=5 (6).
pub const ATOM_FEATURES: usize = 18;
/// One-hot bond order.
pub const BOND_FEATURES: usize = 4;

fn element_index(e: Element) -> usize {
    Element::ALL.iter().position(|&x| x == e).unwrap()
}

/// Atom feature vector; charge and degree are clamped into their bins.
pub fn atom_features(m: &Molecule, atom: usize) -> Vec<f64> {
    let a = m.atom(atom);
    let mut f = vec![0.0; ATOM_FEATURES];
    f[element_index(a.element)] = 1.0;
    let charge_bin = (a.charge.clamp(-1, 1) + 1) as usize;
    f[9 + charge_bin] = 1.0;
    let degree = m.degree(atom).min(5);
    f[12 + degree] = 1.0;
    f
}

pub fn bond_features(order: BondOrder) -> Vec<f64> {
    let mut f = vec![0.0; BOND_FEATURES];
    f[order.code() as usize] = 1.0;
    f
}

pub fn label_onehot(label: u32, vocab: usize) -> Vec<f64> {
    let mut f = vec![0.0; vocab];
    f[label as usize] = 1.0;
    f
}
