//! Chemistry layer: molecular graphs with SMILES I/O, Morgan fingerprints,
//! and junction-tree decomposition/assembly.
//!
//! Everything in this crate is a pure function of its inputs and safe to call
//! concurrently.

pub mod junctree;
pub mod molgraph;

pub use junctree::{
    decompose, enumerate_attachments, AttachmentCandidate, Cluster, ClusterKind, ClusterVocab,
    JunctionTree, TreeError,
};
pub use molgraph::{
    check_valence, isomorphic, morgan_fingerprint, parse_smiles, similarity, tanimoto,
    write_smiles, Atom, Bond, BondOrder, Element, Fingerprint, MolError, Molecule,
    ValenceViolation,
};
