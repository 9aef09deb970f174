//! Junction-tree decomposition of molecules, cluster vocabulary, attachment
//! enumeration and reassembly.

mod attach;
mod decompose;
mod rings;

pub use attach::{
    assemble, enumerate_attachments, ground_truth_candidate, ground_truth_choices, AssemblyError,
    Assembler, AttachmentCandidate, PinnedParent, CANDIDATE_CAP,
};
pub use decompose::decompose;

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use thiserror::Error;

use crate::molgraph::Molecule;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TreeError {
    #[error("cluster '{0}' is not in the vocabulary")]
    UnknownCluster(String),
    #[error("node {0} has no vocabulary label assigned")]
    Unlabeled(usize),
    #[error("vocabulary file is malformed: {0}")]
    BadVocabFile(String),
}

/// What a cluster covers: a ring system, a non-ring bond, or one atom.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClusterKind {
    Ring,
    Bond,
    Singleton,
}

/// One junction-tree node: an atom subset of the parent molecule together
/// with its normalized standalone fragment and canonical label.
#[derive(Debug, Clone)]
pub struct Cluster {
    /// Parent-molecule atom indices; position k corresponds to fragment atom k.
    pub atoms: Vec<usize>,
    pub kind: ClusterKind,
    /// Normalized fragment: induced subgraph with hydrogens recomputed and
    /// aromatic flags kept only where aromatic bonds survive.
    pub fragment: Molecule,
    /// Canonical SMILES of `fragment`; the vocabulary key.
    pub smiles: String,
    /// Vocabulary index, once assigned.
    pub label: Option<u32>,
}

/// Junction tree over a molecule's clusters.
#[derive(Debug, Clone)]
pub struct JunctionTree {
    pub clusters: Vec<Cluster>,
    pub edges: Vec<(usize, usize)>,
    pub root: usize,
    adjacency: Vec<Vec<usize>>,
}

impl JunctionTree {
    pub fn new(clusters: Vec<Cluster>, edges: Vec<(usize, usize)>, root: usize) -> JunctionTree {
        let mut adjacency = vec![Vec::new(); clusters.len()];
        for &(a, b) in &edges {
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
        for nbrs in &mut adjacency {
            nbrs.sort_unstable();
        }
        JunctionTree {
            clusters,
            edges,
            root,
            adjacency,
        }
    }

    /// Builds a tree from vocabulary labels alone (decoded trees carry no
    /// atom memberships).
    pub fn from_labels(
        labels: &[u32],
        edges: Vec<(usize, usize)>,
        root: usize,
        vocab: &ClusterVocab,
    ) -> Result<JunctionTree, TreeError> {
        let clusters = labels
            .iter()
            .map(|&l| {
                let smiles = vocab
                    .smiles(l)
                    .ok_or_else(|| TreeError::UnknownCluster(format!("label {}", l)))?;
                let fragment = vocab.fragment(l).clone();
                Ok(Cluster {
                    atoms: (0..fragment.atom_count()).collect(),
                    kind: kind_of(&fragment),
                    fragment,
                    smiles: smiles.to_string(),
                    label: Some(l),
                })
            })
            .collect::<Result<Vec<_>, TreeError>>()?;
        Ok(JunctionTree::new(clusters, edges, root))
    }

    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.adjacency[node]
    }

    /// True when the edge set forms a tree over all clusters.
    pub fn is_tree(&self) -> bool {
        let n = self.clusters.len();
        if n == 0 {
            return false;
        }
        if self.edges.len() != n - 1 {
            return false;
        }
        let mut seen = vec![false; n];
        let mut stack = vec![self.root];
        seen[self.root] = true;
        let mut count = 1;
        while let Some(u) = stack.pop() {
            for &v in &self.adjacency[u] {
                if !seen[v] {
                    seen[v] = true;
                    count += 1;
                    stack.push(v);
                }
            }
        }
        count == n
    }

    /// Looks every cluster up in `vocab` and records its label.
    pub fn assign_labels(&mut self, vocab: &ClusterVocab) -> Result<(), TreeError> {
        for c in &mut self.clusters {
            let l = vocab
                .label(&c.smiles)
                .ok_or_else(|| TreeError::UnknownCluster(c.smiles.clone()))?;
            c.label = Some(l);
        }
        Ok(())
    }

    pub fn label(&self, node: usize) -> Result<u32, TreeError> {
        self.clusters[node].label.ok_or(TreeError::Unlabeled(node))
    }

    /// Children of `node` (neighbors except `parent`), in decode order:
    /// ascending vocabulary label, ties broken by the canonical order of the
    /// cluster atom sets.
    pub fn children_in_order(&self, node: usize, parent: Option<usize>) -> Vec<usize> {
        let mut kids: Vec<usize> = self.adjacency[node]
            .iter()
            .copied()
            .filter(|&v| Some(v) != parent)
            .collect();
        kids.sort_by(|&a, &b| {
            let ka = (self.clusters[a].label, &self.clusters[a].atoms);
            let kb = (self.clusters[b].label, &self.clusters[b].atoms);
            ka.cmp(&kb).then(a.cmp(&b))
        });
        kids
    }

    /// Depth-first node order starting at the root, visiting children in
    /// decode order. Returns (node, parent) pairs.
    pub fn decode_order(&self) -> Vec<(usize, Option<usize>)> {
        let mut out = Vec::with_capacity(self.len());
        let mut stack = vec![(self.root, None::<usize>)];
        while let Some((u, p)) = stack.pop() {
            out.push((u, p));
            let kids = self.children_in_order(u, p);
            for &c in kids.iter().rev() {
                stack.push((c, Some(u)));
            }
        }
        out
    }
}

pub(crate) fn kind_of(fragment: &Molecule) -> ClusterKind {
    if fragment.atom_count() == 1 {
        ClusterKind::Singleton
    } else if fragment.atom_count() == 2 && fragment.bond_count() == 1 {
        ClusterKind::Bond
    } else {
        ClusterKind::Ring
    }
}

/// Bidirectional map between canonical cluster SMILES and integer labels.
#[derive(Debug, Clone)]
pub struct ClusterVocab {
    entries: Vec<String>,
    fragments: Vec<Molecule>,
    index: BTreeMap<String, u32>,
}

impl ClusterVocab {
    /// Builds the vocabulary of every cluster appearing in the corpus,
    /// sorted lexicographically.
    pub fn build(corpus: &[Molecule]) -> ClusterVocab {
        let mut set = std::collections::BTreeSet::new();
        for m in corpus {
            for c in decompose(m).clusters {
                set.insert(c.smiles);
            }
        }
        ClusterVocab::from_entries(set.into_iter().collect())
            .expect("decomposed cluster SMILES always parse")
    }

    pub fn from_entries(entries: Vec<String>) -> Result<ClusterVocab, TreeError> {
        let mut index = BTreeMap::new();
        let mut fragments = Vec::with_capacity(entries.len());
        for (i, s) in entries.iter().enumerate() {
            let m = crate::molgraph::parse_smiles(s)
                .map_err(|e| TreeError::BadVocabFile(format!("line {}: {}", i + 1, e)))?;
            fragments.push(m);
            if index.insert(s.clone(), i as u32).is_some() {
                return Err(TreeError::BadVocabFile(format!("duplicate entry '{}'", s)));
            }
        }
        Ok(ClusterVocab {
            entries,
            fragments,
            index,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn label(&self, smiles: &str) -> Option<u32> {
        self.index.get(smiles).copied()
    }

    pub fn smiles(&self, label: u32) -> Option<&str> {
        self.entries.get(label as usize).map(|s| s.as_str())
    }

    pub fn fragment(&self, label: u32) -> &Molecule {
        &self.fragments[label as usize]
    }

    pub fn entries(&self) -> &[String] {
        &self.entries
    }

    /// One canonical cluster SMILES per line; line number = label.
    pub fn write_to(&self, w: &mut impl Write) -> std::io::Result<()> {
        for e in &self.entries {
            writeln!(w, "{}", e)?;
        }
        Ok(())
    }

    pub fn read_from(r: impl BufRead) -> Result<ClusterVocab, TreeError> {
        let mut entries = Vec::new();
        for line in r.lines() {
            let line = line.map_err(|e| TreeError::BadVocabFile(e.to_string()))?;
            let s = line.trim();
            if !s.is_empty() {
                entries.push(s.to_string());
            }
        }
        ClusterVocab::from_entries(entries)
    }
}
