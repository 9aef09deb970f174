//! Junction-tree decomposition: ring clusters (merged when bridged), non-ring
//! bond clusters, singleton clusters for high-membership atoms, and a maximum
//! spanning tree over the cluster-intersection graph.

use std::collections::{BTreeMap, BTreeSet};

use super::rings::minimum_cycle_basis;
use super::{kind_of, Cluster, JunctionTree};
use crate::molgraph::{implicit_hydrogens, write_smiles, Atom, Bond, Molecule};

/// Decomposes a molecule into its junction tree. Labels are left unassigned
/// until a vocabulary is available.
pub fn decompose(m: &Molecule) -> JunctionTree {
    // Ring clusters: minimum cycle basis, merging basis rings that share
    // more than two atoms (bridged systems).
    let basis = minimum_cycle_basis(m);
    let ring_atoms: Vec<BTreeSet<usize>> = basis
        .iter()
        .map(|edges| {
            edges
                .iter()
                .flat_map(|&e| [m.bond(e).a, m.bond(e).b])
                .collect()
        })
        .collect();
    let mut merge = UnionFind::new(basis.len());
    for i in 0..basis.len() {
        for j in i + 1..basis.len() {
            if ring_atoms[i].intersection(&ring_atoms[j]).count() > 2 {
                merge.union(i, j);
            }
        }
    }
    let mut ring_groups: BTreeMap<usize, (BTreeSet<usize>, BTreeSet<usize>)> = BTreeMap::new();
    for i in 0..basis.len() {
        let entry = ring_groups.entry(merge.find(i)).or_default();
        entry.0.extend(ring_atoms[i].iter().copied());
        entry.1.extend(basis[i].iter().copied());
    }
    // (atom set, bond set) per cluster, rings first in deterministic order.
    let mut proto: Vec<(Vec<usize>, Vec<usize>)> = ring_groups
        .into_values()
        .map(|(atoms, bonds)| {
            (
                atoms.into_iter().collect::<Vec<_>>(),
                bonds.into_iter().collect::<Vec<_>>(),
            )
        })
        .collect();
    proto.sort();

    // Non-ring bonds become two-atom clusters.
    let ring_bond_set: BTreeSet<usize> = proto.iter().flat_map(|(_, b)| b.iter().copied()).collect();
    let mut bond_clusters: Vec<(Vec<usize>, Vec<usize>)> = (0..m.bond_count())
        .filter(|bi| !ring_bond_set.contains(bi))
        .map(|bi| {
            let b = m.bond(bi);
            (vec![b.a.min(b.b), b.a.max(b.b)], vec![bi])
        })
        .collect();
    bond_clusters.sort();
    proto.extend(bond_clusters);

    // Atoms in three or more clusters (or in none: isolated atoms) become
    // singleton clusters.
    let mut membership = vec![0usize; m.atom_count()];
    for (atoms, _) in &proto {
        for &a in atoms {
            membership[a] += 1;
        }
    }
    for (a, &count) in membership.iter().enumerate() {
        if count >= 3 || count == 0 {
            proto.push((vec![a], vec![]));
        }
    }

    let clusters: Vec<Cluster> = proto
        .iter()
        .map(|(atoms, bonds)| extract_cluster(m, atoms, bonds))
        .collect();

    // Maximum spanning tree of the intersection graph; ties broken by the
    // smaller node-index pair.
    let mut edges: Vec<(usize, usize, usize)> = Vec::new();
    for i in 0..clusters.len() {
        let set: BTreeSet<usize> = clusters[i].atoms.iter().copied().collect();
        for j in i + 1..clusters.len() {
            let shared = clusters[j].atoms.iter().filter(|a| set.contains(a)).count();
            if shared > 0 {
                edges.push((i, j, shared));
            }
        }
    }
    edges.sort_by(|a, b| b.2.cmp(&a.2).then(a.0.cmp(&b.0)).then(a.1.cmp(&b.1)));
    let mut uf = UnionFind::new(clusters.len());
    let mut tree_edges = Vec::new();
    for (i, j, _) in edges {
        if uf.union(i, j) {
            tree_edges.push((i, j));
            if tree_edges.len() == clusters.len() - 1 {
                break;
            }
        }
    }

    // Root: the cluster containing atom 0, lowest index on ties.
    let root = clusters
        .iter()
        .position(|c| c.atoms.contains(&0))
        .expect("atom 0 is always covered");

    JunctionTree::new(clusters, tree_edges, root)
}

/// Extracts a cluster's standalone fragment: aromatic flags survive only
/// where an aromatic bond remains, hydrogens are recomputed as implicit
/// defaults, charges are kept.
fn extract_cluster(m: &Molecule, atoms: &[usize], bonds: &[usize]) -> Cluster {
    let index_of: BTreeMap<usize, usize> =
        atoms.iter().enumerate().map(|(k, &a)| (a, k)).collect();
    let frag_bonds: Vec<Bond> = bonds
        .iter()
        .map(|&bi| {
            let b = m.bond(bi);
            Bond {
                a: index_of[&b.a],
                b: index_of[&b.b],
                order: b.order,
            }
        })
        .collect();
    let mut frag_atoms: Vec<Atom> = atoms
        .iter()
        .map(|&a| {
            let mut atom = *m.atom(a);
            atom.aromatic = false;
            atom
        })
        .collect();
    let mut bond_sum = vec![0u8; atoms.len()];
    for b in &frag_bonds {
        bond_sum[b.a] += b.order.valence_contribution();
        bond_sum[b.b] += b.order.valence_contribution();
        if b.order == crate::molgraph::BondOrder::Aromatic {
            frag_atoms[b.a].aromatic = true;
            frag_atoms[b.b].aromatic = true;
        }
    }
    for (k, atom) in frag_atoms.iter_mut().enumerate() {
        atom.hydrogens =
            implicit_hydrogens(atom.element, atom.charge, bond_sum[k], atom.aromatic);
    }
    let fragment = Molecule::structural(frag_atoms, frag_bonds)
        .expect("cluster fragments are connected by construction");
    let smiles = write_smiles(&fragment);
    Cluster {
        atoms: atoms.to_vec(),
        kind: kind_of(&fragment),
        fragment,
        smiles,
        label: None,
    }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> UnionFind {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, x: usize) -> usize {
        if self.parent[x] != x {
            let root = self.find(self.parent[x]);
            self.parent[x] = root;
        }
        self.parent[x]
    }

    /// Returns true when the two sets were distinct.
    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        // Deterministic: smaller root wins.
        let (lo, hi) = (ra.min(rb), ra.max(rb));
        self.parent[hi] = lo;
        true
    }
}
