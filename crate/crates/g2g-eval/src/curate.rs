//! Training-pair curation: ordered pairs satisfying a similarity floor and a
//! property rule, with test molecules excluded.

use std::collections::BTreeSet;
use std::io::{BufRead, Write};

use g2g_chem::molgraph::{
    morgan_fingerprint, tanimoto, Fingerprint, Molecule, DEFAULT_NBITS, DEFAULT_RADIUS,
};

/// Pair admission rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CurationRule {
    /// score(Y) - score(X) >= threshold.
    MinImprovement(f64),
    /// X within the source range and Y within the target range (inclusive).
    Ranges {
        source: (f64, f64),
        target: (f64, f64),
    },
}

impl CurationRule {
    fn admits(&self, x_score: f64, y_score: f64) -> bool {
        match *self {
            CurationRule::MinImprovement(theta) => y_score - x_score >= theta,
            CurationRule::Ranges { source, target } => {
                x_score >= source.0
                    && x_score <= source.1
                    && y_score >= target.0
                    && y_score <= target.1
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CuratedPair {
    pub x: String,
    pub y: String,
    pub similarity: f64,
    pub improvement: f64,
}

/// A scored corpus entry: canonical SMILES, parsed molecule, property value.
pub struct ScoredMolecule {
    pub smiles: String,
    pub molecule: Molecule,
    pub score: f64,
}

/// All ordered pairs (X, Y), X != Y, with Tanimoto similarity >= delta and
/// the rule satisfied. Molecules named in `exclude` never appear.
pub fn curate_pairs(
    corpus: &[ScoredMolecule],
    delta: f64,
    rule: CurationRule,
    exclude: &BTreeSet<String>,
) -> Vec<CuratedPair> {
    let kept: Vec<&ScoredMolecule> = corpus
        .iter()
        .filter(|m| !exclude.contains(&m.smiles))
        .collect();
    let fps: Vec<Fingerprint> = kept
        .iter()
        .map(|m| morgan_fingerprint(&m.molecule, DEFAULT_RADIUS, DEFAULT_NBITS))
        .collect();
    let mut out = Vec::new();
    for i in 0..kept.len() {
        for j in 0..kept.len() {
            if i == j {
                continue;
            }
            if !rule.admits(kept[i].score, kept[j].score) {
                continue;
            }
            let sim = tanimoto(&fps[i], &fps[j]).expect("uniform parameters");
            if sim >= delta {
                out.push(CuratedPair {
                    x: kept[i].smiles.clone(),
                    y: kept[j].smiles.clone(),
                    similarity: sim,
                    improvement: kept[j].score - kept[i].score,
                });
            }
        }
    }
    out
}

/// Pair file: two tab-separated SMILES per line.
pub fn write_pairs(pairs: &[CuratedPair], w: &mut impl Write) -> std::io::Result<()> {
    for p in pairs {
        writeln!(w, "{}\t{}", p.x, p.y)?;
    }
    Ok(())
}

pub fn read_pairs(r: impl BufRead) -> std::io::Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for line in r.lines() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut it = line.splitn(2, '\t');
        match (it.next(), it.next()) {
            (Some(x), Some(y)) => out.push((x.to_string(), y.trim().to_string())),
            _ => {
                return Err(std::io::Error::new(
                    std::io::ErrorKind::InvalidData,
                    format!("pair line without a tab: '{}'", line),
                ))
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use g2g_chem::molgraph::{parse_smiles, write_smiles};

    fn scored(smiles: &str, score: f64) -> ScoredMolecule {
        let molecule = parse_smiles(smiles).unwrap();
        ScoredMolecule {
            smiles: write_smiles(&molecule),
            molecule,
            score,
        }
    }

    #[test]
    fn delta_one_keeps_only_identical_fingerprints() {
        let corpus = vec![scored("CCO", 0.0), scored("OCC", 1.0), scored("CCC", 2.0)];
        let pairs = curate_pairs(
            &corpus,
            1.0,
            CurationRule::MinImprovement(0.5),
            &BTreeSet::new(),
        );
        // CCO and OCC are the same molecule: identical fingerprints.
        assert_eq!(pairs.len(), 1);
        assert_eq!(pairs[0].x, pairs[0].y);
    }

    #[test]
    fn impossible_threshold_gives_empty_set() {
        let corpus = vec![scored("CCO", 0.0), scored("CCC", 1.0)];
        let pairs = curate_pairs(
            &corpus,
            0.0,
            CurationRule::MinImprovement(f64::INFINITY),
            &BTreeSet::new(),
        );
        assert!(pairs.is_empty());
    }

    #[test]
    fn matches_exhaustive_enumeration() {
        // Ten molecules with a ring-count oracle, delta 0.4, theta 1.
        let smiles = [
            "CCCCC",
            "CCCCO",
            "CCCCN",
            "CCCCCC",
            "CCCCCO",
            "C1CCCCC1",
            "CCC1CCCCC1",
            "CCCC1CCCCC1",
            "OCCC1CCCCC1",
            "CCCCC1CCCCC1",
        ];
        let corpus: Vec<ScoredMolecule> = smiles
            .iter()
            .map(|s| {
                let m = parse_smiles(s).unwrap();
                let rings = m.ring_count() as f64;
                ScoredMolecule {
                    smiles: write_smiles(&m),
                    molecule: m,
                    score: rings,
                }
            })
            .collect();
        let got = curate_pairs(
            &corpus,
            0.4,
            CurationRule::MinImprovement(1.0),
            &BTreeSet::new(),
        );
        // Brute-force oracle.
        let fps: Vec<_> = corpus
            .iter()
            .map(|m| morgan_fingerprint(&m.molecule, DEFAULT_RADIUS, DEFAULT_NBITS))
            .collect();
        let mut expected = Vec::new();
        for i in 0..corpus.len() {
            for j in 0..corpus.len() {
                if i == j {
                    continue;
                }
                let sim = tanimoto(&fps[i], &fps[j]).unwrap();
                if corpus[j].score - corpus[i].score >= 1.0 && sim >= 0.4 {
                    expected.push((corpus[i].smiles.clone(), corpus[j].smiles.clone()));
                }
            }
        }
        assert!(!expected.is_empty(), "oracle found no pairs");
        let got_keys: Vec<(String, String)> =
            got.iter().map(|p| (p.x.clone(), p.y.clone())).collect();
        assert_eq!(got_keys, expected);
    }

    #[test]
    fn excluded_molecules_never_appear() {
        let corpus = vec![scored("CCCCC", 0.0), scored("CCC1CCCCC1", 1.0)];
        let mut exclude = BTreeSet::new();
        exclude.insert(corpus[1].smiles.clone());
        let pairs = curate_pairs(
            &corpus,
            0.0,
            CurationRule::MinImprovement(0.5),
            &exclude,
        );
        assert!(pairs.is_empty());
    }

    #[test]
    fn ranges_rule() {
        let corpus = vec![scored("CCCCC", 0.0), scored("CCC1CCCCC1", 1.0)];
        let pairs = curate_pairs(
            &corpus,
            0.0,
            CurationRule::Ranges {
                source: (0.0, 0.5),
                target: (1.0, 2.0),
            },
            &BTreeSet::new(),
        );
        assert_eq!(pairs.len(), 1);
        assert_eq!(pairs[0].improvement, 1.0);
    }

    #[test]
    fn pair_file_round_trip() {
        let pairs = vec![CuratedPair {
            x: "CCO".into(),
            y: "CCC".into(),
            similarity: 0.5,
            improvement: 1.0,
        }];
        let mut buf = Vec::new();
        write_pairs(&pairs, &mut buf).unwrap();
        let back = read_pairs(buf.as_slice()).unwrap();
        assert_eq!(back, vec![("CCO".to_string(), "CCC".to_string())]);
    }
}
