//! Training-pair preprocessing: parsing, decomposition, vocabulary labeling
//! and cached attachment candidates with ground-truth indices.

use g2g_chem::junctree::{
    decompose, enumerate_attachments, ground_truth_candidate, AssemblyError, AttachmentCandidate,
    ClusterVocab, JunctionTree, TreeError,
};
use g2g_chem::molgraph::{parse_smiles, MolError, Molecule};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PrepError {
    #[error("parse error in '{smiles}': {source}")]
    Parse {
        smiles: String,
        source: MolError,
    },
    #[error("vocabulary error for '{smiles}': {source}")]
    Vocab {
        smiles: String,
        source: TreeError,
    },
    #[error("assembly preprocessing failed for '{smiles}': {source}")]
    Assembly {
        smiles: String,
        source: AssemblyError,
    },
}

/// A parsed molecule with its labeled junction tree.
pub struct PreparedMol {
    pub smiles: String,
    pub mol: Molecule,
    pub tree: JunctionTree,
}

/// Candidates at one tree node with the ground-truth index. Only nodes with
/// two or more candidates are kept (others contribute no loss).
pub struct NodeCandidates {
    pub node: usize,
    pub cands: Vec<AttachmentCandidate>,
    pub gt: usize,
}

/// A preprocessed (X, Y) translation pair.
pub struct PreparedPair {
    pub x: PreparedMol,
    pub y: PreparedMol,
    pub y_assembly: Vec<NodeCandidates>,
}

pub fn prepare_molecule(smiles: &str, vocab: &ClusterVocab) -> Result<PreparedMol, PrepError> {
    let mol = parse_smiles(smiles).map_err(|source| PrepError::Parse {
        smiles: smiles.to_string(),
        source,
    })?;
    let mut tree = decompose(&mol);
    tree.assign_labels(vocab).map_err(|source| PrepError::Vocab {
        smiles: smiles.to_string(),
        source,
    })?;
    Ok(PreparedMol {
        smiles: smiles.to_string(),
        mol,
        tree,
    })
}

/// Enumerates the teacher-forcing candidates for every node of the target
/// tree, locating the ground truth in each candidate list.
fn assembly_targets(prepared: &PreparedMol) -> Result<Vec<NodeCandidates>, PrepError> {
    let mut out = Vec::new();
    for node in 0..prepared.tree.len() {
        let cands = enumerate_attachments(&prepared.tree, node, None);
        let gt_key = ground_truth_candidate(&prepared.tree, node, &prepared.mol).key;
        let gt = cands.iter().position(|c| c.key == gt_key).ok_or_else(|| {
            PrepError::Assembly {
                smiles: prepared.smiles.clone(),
                source: AssemblyError::GroundTruthMissing(node),
            }
        })?;
        if cands.len() >= 2 {
            out.push(NodeCandidates { node, cands, gt });
        }
    }
    Ok(out)
}

pub fn prepare_pair(
    x_smiles: &str,
    y_smiles: &str,
    vocab: &ClusterVocab,
) -> Result<PreparedPair, PrepError> {
    let x = prepare_molecule(x_smiles, vocab)?;
    let y = prepare_molecule(y_smiles, vocab)?;
    let y_assembly = assembly_targets(&y)?;
    Ok(PreparedPair { x, y, y_assembly })
}

#[cfg(test)]
mod tests {
    use super::*;
    use g2g_chem::molgraph::parse_smiles;

    #[test]
    fn unknown_cluster_is_rejected() {
        let vocab = ClusterVocab::build(&[parse_smiles("CC").unwrap()]);
        assert!(matches!(
            prepare_pair("CC", "CCO", &vocab),
            Err(PrepError::Vocab { .. })
        ));
    }

    #[test]
    fn prepared_pair_has_labels_everywhere() {
        let corpus: Vec<_> = ["CCO", "CCC", "CCN"]
            .iter()
            .map(|s| parse_smiles(s).unwrap())
            .collect();
        let vocab = ClusterVocab::build(&corpus);
        let pair = prepare_pair("CCO", "CCN", &vocab).unwrap();
        for c in pair.x.tree.clusters.iter().chain(&pair.y.tree.clusters) {
            assert!(c.label.is_some());
        }
    }
}
