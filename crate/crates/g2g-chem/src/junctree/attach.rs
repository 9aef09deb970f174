//! Candidate-attachment enumeration and tree reassembly.
//!
//! A candidate at tree node `i` realizes the whole neighborhood of `i`: the
//! cluster itself plus every neighbor cluster fused at shared atoms. During
//! free-running assembly the parent fusion is pinned by the previous step and
//! only the children are enumerated.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use super::{ClusterKind, JunctionTree};
use crate::molgraph::{colored_key, implicit_hydrogens, Atom, Bond, BondOrder, Molecule};

/// Most candidates kept per node, lowest canonical keys first.
pub const CANDIDATE_CAP: usize = 64;

/// One realization of a tree node's neighborhood.
#[derive(Debug, Clone)]
pub struct AttachmentCandidate {
    /// The neighborhood fragment as a standalone molecule.
    pub fragment: Molecule,
    /// Fragment atom -> owning tree node (the node itself wins over neighbors).
    pub alpha: Vec<usize>,
    /// Canonical key of the alpha-colored fragment; sort and dedup basis.
    pub key: String,
    /// Tree node -> fragment atom index per cluster-atom position.
    pub node_atom_map: BTreeMap<usize, Vec<usize>>,
}

/// Parent fusion fixed by the previous assembly step: pairs of
/// (position in node's cluster, position in parent's cluster).
#[derive(Debug, Clone)]
pub struct PinnedParent {
    pub parent: usize,
    pub fusion: Vec<(usize, usize)>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AssemblyError {
    #[error("node {0} has no valid attachment candidates")]
    NoCandidates(usize),
    #[error("node {node}: candidate choice {choice} out of range ({count} candidates)")]
    BadChoice {
        node: usize,
        choice: usize,
        count: usize,
    },
    #[error("ground-truth attachment not found among candidates at node {0}")]
    GroundTruthMissing(usize),
    #[error("assembled molecule failed validation: {0}")]
    Invalid(String),
}

#[derive(Clone)]
struct Partial {
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
    bond_pairs: BTreeSet<(usize, usize)>,
    alpha: Vec<usize>,
    map: BTreeMap<usize, Vec<usize>>,
}

impl Partial {
    fn bond_sum(&self, atom: usize) -> u8 {
        self.bonds
            .iter()
            .filter(|b| b.a == atom || b.b == atom)
            .map(|b| b.order.valence_contribution())
            .sum()
    }

    fn add_bond(&mut self, a: usize, b: usize, order: BondOrder) -> bool {
        let key = (a.min(b), a.max(b));
        if !self.bond_pairs.insert(key) {
            return false;
        }
        self.bonds.push(Bond { a, b, order });
        true
    }

    /// Final hydrogens are the implicit defaults of the merged environment.
    fn to_molecule(&self) -> Molecule {
        let mut bond_sum = vec![0u8; self.atoms.len()];
        for b in &self.bonds {
            bond_sum[b.a] += b.order.valence_contribution();
            bond_sum[b.b] += b.order.valence_contribution();
        }
        let atoms: Vec<Atom> = self
            .atoms
            .iter()
            .enumerate()
            .map(|(i, a)| {
                let mut atom = *a;
                atom.hydrogens =
                    implicit_hydrogens(atom.element, atom.charge, bond_sum[i], atom.aromatic);
                atom
            })
            .collect();
        Molecule::structural(atoms, self.bonds.clone())
            .expect("partial fragments stay connected")
    }

    fn key(&self) -> String {
        let colors: Vec<u64> = self.alpha.iter().map(|&a| a as u64).collect();
        colored_key(&self.to_molecule(), &colors)
    }
}

fn compatible(a: &Atom, b: &Atom) -> bool {
    a.element == b.element && a.charge == b.charge
}

/// Enumerates every valence-valid, pairwise non-isomorphic realization of
/// `node`'s neighborhood. With `pinned`, the parent fusion is fixed and only
/// the remaining neighbors are enumerated.
pub fn enumerate_attachments(
    tree: &JunctionTree,
    node: usize,
    pinned: Option<&PinnedParent>,
) -> Vec<AttachmentCandidate> {
    let cluster = &tree.clusters[node];
    let mut base = Partial {
        atoms: cluster.fragment.atoms().to_vec(),
        bonds: cluster.fragment.bonds().to_vec(),
        bond_pairs: cluster
            .fragment
            .bonds()
            .iter()
            .map(|b| (b.a.min(b.b), b.a.max(b.b)))
            .collect(),
        alpha: vec![node; cluster.fragment.atom_count()],
        map: BTreeMap::from([(node, (0..cluster.fragment.atom_count()).collect())]),
    };

    if let Some(pin) = pinned {
        apply_pinned(tree, node, pin, &mut base);
    }

    let free: Vec<usize> = tree
        .neighbors(node)
        .iter()
        .copied()
        .filter(|&v| pinned.map_or(true, |p| v != p.parent))
        .collect();

    let mut layer = vec![base];
    for &j in &free {
        let mut next: Vec<Partial> = Vec::new();
        let mut seen = BTreeSet::new();
        for p in &layer {
            for cand in attach_neighbor(tree, node, j, p) {
                let key = cand.key();
                if seen.insert(key) {
                    next.push(cand);
                }
            }
        }
        layer = next;
        if layer.is_empty() {
            return Vec::new();
        }
    }

    let mut out: Vec<AttachmentCandidate> = layer
        .into_iter()
        .map(|p| {
            let fragment = p.to_molecule();
            let colors: Vec<u64> = p.alpha.iter().map(|&a| a as u64).collect();
            let key = colored_key(&fragment, &colors);
            AttachmentCandidate {
                fragment,
                alpha: p.alpha,
                key,
                node_atom_map: p.map,
            }
        })
        .collect();
    out.sort_by(|a, b| a.key.cmp(&b.key));
    out.dedup_by(|a, b| a.key == b.key);
    out.truncate(CANDIDATE_CAP);
    out
}

/// Fuses the parent cluster into the base fragment along the pinned pairs.
fn apply_pinned(tree: &JunctionTree, node: usize, pin: &PinnedParent, base: &mut Partial) {
    let parent = &tree.clusters[pin.parent];
    let fused: BTreeMap<usize, usize> = pin.fusion.iter().map(|&(n, p)| (p, n)).collect();
    let mut positions = vec![usize::MAX; parent.fragment.atom_count()];
    for (ppos, slot) in positions.iter_mut().enumerate() {
        if let Some(&npos) = fused.get(&ppos) {
            *slot = base.map[&node][npos];
            // Shared atoms may be aromatic on either side.
            let arom = parent.fragment.atom(ppos).aromatic;
            base.atoms[*slot].aromatic |= arom;
        } else {
            *slot = base.atoms.len();
            base.atoms.push(*parent.fragment.atom(ppos));
            base.alpha.push(pin.parent);
        }
    }
    for b in parent.fragment.bonds() {
        base.add_bond(positions[b.a], positions[b.b], b.order);
    }
    base.map.insert(pin.parent, positions);
}

/// All single-atom and (ring-ring) two-atom fusions of neighbor `j` onto the
/// node's own atoms within partial `p`.
fn attach_neighbor(tree: &JunctionTree, node: usize, j: usize, p: &Partial) -> Vec<Partial> {
    let node_kind = tree.clusters[node].kind;
    let nb = &tree.clusters[j].fragment;
    let nb_kind = tree.clusters[j].kind;
    let sites: Vec<usize> = p.map[&node].clone();
    let site_set: BTreeSet<usize> = sites.iter().copied().collect();
    let mut out = Vec::new();

    // Single shared atom.
    for &site in &sites {
        for apos in 0..nb.atom_count() {
            if !compatible(nb.atom(apos), &p.atoms[site]) {
                continue;
            }
            if let Some(next) = fuse(p, j, nb, &[(apos, site)]) {
                out.push(next);
            }
        }
    }

    // Shared edge: only between two ring clusters.
    if node_kind == ClusterKind::Ring && nb_kind == ClusterKind::Ring {
        let site_bonds: Vec<&Bond> = p
            .bonds
            .iter()
            .filter(|b| site_set.contains(&b.a) && site_set.contains(&b.b))
            .collect();
        for sb in site_bonds {
            for nbond in nb.bonds() {
                if nbond.order != sb.order {
                    continue;
                }
                for (a1, a2) in [(nbond.a, nbond.b), (nbond.b, nbond.a)] {
                    if compatible(nb.atom(a1), &p.atoms[sb.a])
                        && compatible(nb.atom(a2), &p.atoms[sb.b])
                    {
                        if let Some(next) = fuse(p, j, nb, &[(a1, sb.a), (a2, sb.b)]) {
                            out.push(next);
                        }
                    }
                }
            }
        }
    }

    out
}

/// Merges neighbor fragment `nb` into `p`, identifying `pairs` of
/// (neighbor position, partial atom). Returns None when a duplicate bond or
/// a capacity violation arises.
fn fuse(p: &Partial, j: usize, nb: &Molecule, pairs: &[(usize, usize)]) -> Option<Partial> {
    let mut next = p.clone();
    let fused: BTreeMap<usize, usize> = pairs.iter().copied().collect();
    let mut positions = vec![usize::MAX; nb.atom_count()];
    for (apos, slot) in positions.iter_mut().enumerate() {
        if let Some(&site) = fused.get(&apos) {
            *slot = site;
            next.atoms[site].aromatic |= nb.atom(apos).aromatic;
        } else {
            *slot = next.atoms.len();
            next.atoms.push(*nb.atom(apos));
            next.alpha.push(j);
        }
    }
    for b in nb.bonds() {
        let (x, y) = (positions[b.a], positions[b.b]);
        let already = next.bond_pairs.contains(&(x.min(y), x.max(y)));
        if already {
            // Only the pinned shared edge of a two-atom fusion may coincide.
            let both_fused = fused.contains_key(&b.a) && fused.contains_key(&b.b);
            if !both_fused {
                return None;
            }
            continue;
        }
        next.add_bond(x, y, b.order);
    }
    // Capacity check on every atom the fusion touched.
    for &(_, site) in pairs {
        if next.bond_sum(site) > next.atoms[site].capacity() {
            return None;
        }
    }
    next.map.insert(j, positions);
    Some(next)
}

/// The realized neighborhood of `node` in the source molecule, keyed the same
/// way as enumerated candidates.
pub fn ground_truth_candidate(
    tree: &JunctionTree,
    node: usize,
    mol: &Molecule,
) -> AttachmentCandidate {
    let mut involved = vec![node];
    involved.extend(tree.neighbors(node).iter().copied());

    let mut frag_index: BTreeMap<usize, usize> = BTreeMap::new(); // mol atom -> fragment atom
    let mut alpha: Vec<usize> = Vec::new();
    let mut map: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &c in &involved {
        let mut positions = Vec::new();
        for &a in &tree.clusters[c].atoms {
            let idx = *frag_index.entry(a).or_insert_with(|| {
                alpha.push(c);
                alpha.len() - 1
            });
            positions.push(idx);
        }
        map.insert(c, positions);
    }

    let mut bonds: Vec<Bond> = Vec::new();
    let mut bond_pairs: BTreeSet<(usize, usize)> = BTreeSet::new();
    for &c in &involved {
        let cluster = &tree.clusters[c];
        for b in cluster.fragment.bonds() {
            let x = map[&c][b.a];
            let y = map[&c][b.b];
            if bond_pairs.insert((x.min(y), x.max(y))) {
                bonds.push(Bond {
                    a: x,
                    b: y,
                    order: b.order,
                });
            }
        }
    }

    let mut atoms: Vec<Atom> = vec![Atom::new(crate::molgraph::Element::C); alpha.len()];
    for (&mol_atom, &idx) in &frag_index {
        let mut atom = *mol.atom(mol_atom);
        atom.aromatic = false;
        atoms[idx] = atom;
    }
    let mut bond_sum = vec![0u8; atoms.len()];
    for b in &bonds {
        bond_sum[b.a] += b.order.valence_contribution();
        bond_sum[b.b] += b.order.valence_contribution();
        if b.order == BondOrder::Aromatic {
            atoms[b.a].aromatic = true;
            atoms[b.b].aromatic = true;
        }
    }
    for (i, a) in atoms.iter_mut().enumerate() {
        a.hydrogens = implicit_hydrogens(a.element, a.charge, bond_sum[i], a.aromatic);
    }
    let fragment =
        Molecule::structural(atoms, bonds).expect("neighborhood fragments are connected");
    let colors: Vec<u64> = alpha.iter().map(|&a| a as u64).collect();
    let key = colored_key(&fragment, &colors);
    AttachmentCandidate {
        fragment,
        alpha,
        key,
        node_atom_map: map,
    }
}

/// Incremental assembler: realizes a tree node by node in decode order.
pub struct Assembler<'a> {
    tree: &'a JunctionTree,
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
    bond_pairs: BTreeSet<(usize, usize)>,
    realized: BTreeMap<usize, Vec<usize>>,
}

impl<'a> Assembler<'a> {
    pub fn new(tree: &'a JunctionTree) -> Assembler<'a> {
        Assembler {
            tree,
            atoms: Vec::new(),
            bonds: Vec::new(),
            bond_pairs: BTreeSet::new(),
            realized: BTreeMap::new(),
        }
    }

    /// The pinned parent fusion implied by what is already realized.
    pub fn pinned(&self, node: usize, parent: Option<usize>) -> Option<PinnedParent> {
        let parent = parent?;
        let node_atoms = self.realized.get(&node)?;
        let parent_atoms = self.realized.get(&parent)?;
        let mut fusion = Vec::new();
        for (npos, &ga) in node_atoms.iter().enumerate() {
            if let Some(ppos) = parent_atoms.iter().position(|&pa| pa == ga) {
                fusion.push((npos, ppos));
            }
        }
        Some(PinnedParent { parent, fusion })
    }

    pub fn candidates_at(&self, node: usize, parent: Option<usize>) -> Vec<AttachmentCandidate> {
        let pin = self.pinned(node, parent);
        enumerate_attachments(self.tree, node, pin.as_ref())
    }

    /// Merges a chosen candidate into the growing molecule.
    pub fn apply(&mut self, cand: &AttachmentCandidate) {
        let mut frag_to_global: BTreeMap<usize, usize> = BTreeMap::new();
        // Already-realized clusters bind their fragment positions.
        for (&c, positions) in &cand.node_atom_map {
            if let Some(globals) = self.realized.get(&c) {
                for (pos, &f) in positions.iter().enumerate() {
                    frag_to_global.insert(f, globals[pos]);
                }
            }
        }
        // Allocate the rest.
        for (&c, positions) in &cand.node_atom_map {
            if self.realized.contains_key(&c) {
                continue;
            }
            let mut globals = Vec::with_capacity(positions.len());
            for &f in positions {
                let g = *frag_to_global.entry(f).or_insert_with(|| {
                    self.atoms.push(*cand.fragment.atom(f));
                    self.atoms.len() - 1
                });
                // Keep the strongest aromatic claim.
                self.atoms[g].aromatic |= cand.fragment.atom(f).aromatic;
                globals.push(g);
            }
            self.realized.insert(c, globals);
        }
        for b in cand.fragment.bonds() {
            let (x, y) = (frag_to_global[&b.a], frag_to_global[&b.b]);
            let key = (x.min(y), x.max(y));
            if self.bond_pairs.insert(key) {
                self.bonds.push(Bond {
                    a: x,
                    b: y,
                    order: b.order,
                });
            }
        }
    }

    pub fn finish(self) -> Result<Molecule, AssemblyError> {
        let mut bond_sum = vec![0u8; self.atoms.len()];
        for b in &self.bonds {
            bond_sum[b.a] += b.order.valence_contribution();
            bond_sum[b.b] += b.order.valence_contribution();
        }
        let atoms: Vec<Atom> = self
            .atoms
            .iter()
            .enumerate()
            .map(|(i, a)| {
                let mut atom = *a;
                atom.hydrogens =
                    implicit_hydrogens(atom.element, atom.charge, bond_sum[i], atom.aromatic);
                atom
            })
            .collect();
        Molecule::new(atoms, self.bonds).map_err(|e| AssemblyError::Invalid(e.to_string()))
    }
}

/// Assembles a tree given one candidate index per node (indices into the
/// pinned candidate list at that node, in decode order).
pub fn assemble(tree: &JunctionTree, choices: &[usize]) -> Result<Molecule, AssemblyError> {
    let mut asm = Assembler::new(tree);
    for (node, parent) in tree.decode_order() {
        let cands = asm.candidates_at(node, parent);
        if cands.is_empty() {
            return Err(AssemblyError::NoCandidates(node));
        }
        let choice = choices.get(node).copied().unwrap_or(0);
        let cand = cands.get(choice).ok_or(AssemblyError::BadChoice {
            node,
            choice,
            count: cands.len(),
        })?;
        asm.apply(cand);
    }
    asm.finish()
}

/// Recovers, per node in decode order, the candidate index realizing the
/// source molecule. Used for teacher forcing and round-trip checks.
pub fn ground_truth_choices(
    tree: &JunctionTree,
    mol: &Molecule,
) -> Result<Vec<usize>, AssemblyError> {
    let mut asm = Assembler::new(tree);
    let mut choices = vec![0usize; tree.len()];
    for (node, parent) in tree.decode_order() {
        let cands = asm.candidates_at(node, parent);
        if cands.is_empty() {
            return Err(AssemblyError::NoCandidates(node));
        }
        let gt = ground_truth_candidate(tree, node, mol);
        let idx = cands
            .iter()
            .position(|c| c.key == gt.key)
            .ok_or(AssemblyError::GroundTruthMissing(node))?;
        choices[node] = idx;
        asm.apply(&cands[idx]);
    }
    Ok(choices)
}
