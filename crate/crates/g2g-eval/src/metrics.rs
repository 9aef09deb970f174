//! Evaluation metrics over scored translation reports.

use std::collections::BTreeSet;

use g2g_chem::molgraph::{morgan_fingerprint, parse_smiles, tanimoto, DEFAULT_NBITS, DEFAULT_RADIUS};
use serde::Serialize;
use thiserror::Error;

use crate::report::{Report, ReportCandidate};

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("bad predicate '{0}'")]
    BadPredicate(String),
    #[error("novelty is undefined for an empty training set")]
    EmptyTrainingSet,
}

/// Target-range test applied to a candidate's property score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Predicate {
    /// Always satisfied.
    Any,
    /// score in [lo, hi].
    Range { lo: f64, hi: f64 },
    /// score >= threshold.
    AtLeast(f64),
    /// score - source score >= threshold.
    ImproveBy(f64),
}

impl Predicate {
    /// Grammar: `any`, `range:<lo>:<hi>`, `>=<v>`, `imp>=<v>`.
    pub fn parse(spec: &str) -> Result<Predicate, MetricError> {
        if spec == "any" {
            return Ok(Predicate::Any);
        }
        if let Some(rest) = spec.strip_prefix("range:") {
            let parts: Vec<&str> = rest.split(':').collect();
            if parts.len() == 2 {
                if let (Ok(lo), Ok(hi)) = (parts[0].parse(), parts[1].parse()) {
                    return Ok(Predicate::Range { lo, hi });
                }
            }
        }
        if let Some(rest) = spec.strip_prefix("imp>=") {
            if let Ok(v) = rest.parse() {
                return Ok(Predicate::ImproveBy(v));
            }
        }
        if let Some(rest) = spec.strip_prefix(">=") {
            if let Ok(v) = rest.parse() {
                return Ok(Predicate::AtLeast(v));
            }
        }
        Err(MetricError::BadPredicate(spec.to_string()))
    }

    pub fn eval(&self, score: Option<f64>, source_score: Option<f64>) -> bool {
        match *self {
            Predicate::Any => true,
            Predicate::Range { lo, hi } => score.is_some_and(|s| s >= lo && s <= hi),
            Predicate::AtLeast(v) => score.is_some_and(|s| s >= v),
            Predicate::ImproveBy(v) => match (score, source_score) {
                (Some(s), Some(x)) => s - x >= v,
                _ => false,
            },
        }
    }
}

fn candidate_ok(c: &ReportCandidate, delta: f64, pred: &Predicate, src: Option<f64>) -> bool {
    c.similarity >= delta && pred.eval(c.score, src)
}

/// Fraction of source molecules with at least one candidate meeting the
/// similarity constraint and the target predicate.
pub fn success_rate(report: &Report, delta: f64, pred: &Predicate) -> f64 {
    if report.rows.is_empty() {
        return 0.0;
    }
    let hits = report
        .rows
        .iter()
        .filter(|row| {
            row.valid()
                .any(|c| candidate_ok(c, delta, pred, row.source_score))
        })
        .count();
    hits as f64 / report.rows.len() as f64
}

/// Mean and population standard deviation of the per-molecule best property
/// improvement under the similarity constraint. Sources with no qualifying
/// candidate contribute zero.
pub fn improvement(report: &Report, delta: f64) -> (f64, f64) {
    let per_row: Vec<f64> = report
        .rows
        .iter()
        .map(|row| {
            let src = match row.source_score {
                Some(s) => s,
                None => return 0.0,
            };
            row.valid()
                .filter(|c| c.similarity >= delta)
                .filter_map(|c| c.score.map(|s| s - src))
                .fold(None::<f64>, |best, imp| {
                    Some(best.map_or(imp, |b| b.max(imp)))
                })
                .unwrap_or(0.0)
        })
        .collect();
    if per_row.is_empty() {
        return (0.0, 0.0);
    }
    let mean = per_row.iter().sum::<f64>() / per_row.len() as f64;
    let var = per_row.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / per_row.len() as f64;
    (mean, var.sqrt())
}

/// Average pairwise Tanimoto distance among each source's valid candidates,
/// averaged over sources with at least two valid candidates (others are
/// excluded entirely).
pub fn diversity(report: &Report) -> f64 {
    let mut per_source = Vec::new();
    for row in &report.rows {
        let fps: Vec<_> = row
            .valid()
            .filter_map(|c| parse_smiles(&c.smiles).ok())
            .map(|m| morgan_fingerprint(&m, DEFAULT_RADIUS, DEFAULT_NBITS))
            .collect();
        if fps.len() < 2 {
            continue;
        }
        let mut total = 0.0;
        let mut pairs = 0.0;
        for i in 0..fps.len() {
            for j in i + 1..fps.len() {
                total += 1.0 - tanimoto(&fps[i], &fps[j]).expect("same parameters");
                pairs += 1.0;
            }
        }
        per_source.push(total / pairs);
    }
    if per_source.is_empty() {
        0.0
    } else {
        per_source.iter().sum::<f64>() / per_source.len() as f64
    }
}

/// Novelty of the generated set against the training targets. The primary
/// value follows the reported formula 1 - |M & S| / |S|; the conventional
/// 1 - |M & S| / |M| is returned alongside.
pub fn novelty(
    generated: &BTreeSet<String>,
    training: &BTreeSet<String>,
) -> Result<(f64, f64), MetricError> {
    if training.is_empty() {
        return Err(MetricError::EmptyTrainingSet);
    }
    let inter = generated.intersection(training).count() as f64;
    let paper = 1.0 - inter / training.len() as f64;
    let conventional = if generated.is_empty() {
        1.0
    } else {
        1.0 - inter / generated.len() as f64
    };
    Ok((paper, conventional))
}

/// Full evaluation summary, serializable for the machine-readable output.
#[derive(Debug, Clone, Serialize)]
pub struct EvalSummary {
    pub oracle: String,
    pub delta: f64,
    pub predicate: String,
    pub n_sources: usize,
    pub n_valid_candidates: usize,
    pub success_rate: f64,
    pub improvement_mean: f64,
    pub improvement_std: f64,
    pub diversity: f64,
    /// Primary formula 1 - |M & S| / |S|; None when no training set given.
    pub novelty: Option<f64>,
    pub novelty_conventional: Option<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::report::ReportRow;

    fn cand(smiles: &str, sim: f64, score: f64) -> Option<ReportCandidate> {
        Some(ReportCandidate {
            smiles: smiles.into(),
            similarity: sim,
            score: Some(score),
        })
    }

    fn row(source: &str, src_score: f64, cands: Vec<Option<ReportCandidate>>) -> ReportRow {
        ReportRow {
            source: source.into(),
            source_score: Some(src_score),
            candidates: cands,
        }
    }

    #[test]
    fn all_failures_score_zero() {
        let r = Report {
            k: 2,
            rows: vec![row("CCO", 0.0, vec![None, None])],
        };
        assert_eq!(success_rate(&r, 0.3, &Predicate::Any), 0.0);
        assert_eq!(improvement(&r, 0.3), (0.0, 0.0));
    }

    #[test]
    fn identity_translation_always_succeeds_with_any() {
        let r = Report {
            k: 1,
            rows: vec![row("CCO", 0.0, vec![cand("CCO", 1.0, 0.0)])],
        };
        assert_eq!(success_rate(&r, 1.0, &Predicate::Any), 1.0);
    }

    #[test]
    fn hand_built_three_molecule_report() {
        // Row 1: one candidate passes sim and range. Row 2: candidate fails
        // similarity. Row 3: candidate fails the range.
        let pred = Predicate::Range { lo: 2.0, hi: 3.0 };
        let r = Report {
            k: 1,
            rows: vec![
                row("A", 0.0, vec![cand("CC", 0.8, 2.5)]),
                row("B", 0.0, vec![cand("CC", 0.2, 2.5)]),
                row("C", 0.0, vec![cand("CC", 0.8, 5.0)]),
            ],
        };
        let got = success_rate(&r, 0.4, &pred);
        assert!((got - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn improvement_takes_the_max() {
        let r = Report {
            k: 2,
            rows: vec![row(
                "X",
                1.0,
                vec![cand("CC", 0.9, 2.0), cand("CCC", 0.9, 4.0)],
            )],
        };
        let (mean, std) = improvement(&r, 0.4);
        assert_eq!(mean, 3.0);
        assert_eq!(std, 0.0);
    }

    #[test]
    fn improvement_against_brute_force_oracle() {
        // Random-ish report checked against an exhaustive recomputation.
        let rows = vec![
            row(
                "A",
                2.0,
                vec![cand("C", 0.5, 3.0), cand("CC", 0.2, 9.0), None],
            ),
            row("B", 1.0, vec![None, cand("CCC", 0.9, 0.5), None]),
            row("C", 0.0, vec![None, None, None]),
        ];
        let r = Report { k: 3, rows };
        let delta = 0.4;
        // Brute force: row A best = 1.0 (only the sim-0.5 candidate), row B
        // best = -0.5, row C contributes 0.
        let expected = [1.0, -0.5, 0.0];
        let mean: f64 = expected.iter().sum::<f64>() / 3.0;
        let var: f64 =
            expected.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / 3.0;
        let (m, s) = improvement(&r, delta);
        assert!((m - mean).abs() < 1e-12);
        assert!((s - var.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn diversity_identical_candidates_is_zero() {
        let r = Report {
            k: 2,
            rows: vec![row(
                "X",
                0.0,
                vec![cand("CCO", 0.9, 0.0), cand("CCO", 0.9, 0.0)],
            )],
        };
        assert_eq!(diversity(&r), 0.0);
    }

    #[test]
    fn diversity_excludes_sub_two_candidate_sources() {
        // The second row has a single valid candidate and must not dilute
        // the average.
        let r = Report {
            k: 2,
            rows: vec![
                row(
                    "X",
                    0.0,
                    vec![cand("CCO", 0.9, 0.0), cand("c1ccccc1", 0.9, 0.0)],
                ),
                row("Y", 0.0, vec![cand("CCO", 0.9, 0.0), None]),
            ],
        };
        let with_single = diversity(&r);
        let only_first = diversity(&Report {
            k: 2,
            rows: vec![r.rows[0].clone()],
        });
        assert_eq!(with_single, only_first);
        assert!(with_single > 0.0);
    }

    #[test]
    fn diversity_matches_pairwise_oracle() {
        let smiles = ["CCO", "CCC", "c1ccccc1", "CCN"];
        let r = Report {
            k: 4,
            rows: vec![row(
                "X",
                0.0,
                smiles.iter().map(|s| cand(s, 0.9, 0.0)).collect(),
            )],
        };
        // Brute force over all pairs.
        let fps: Vec<_> = smiles
            .iter()
            .map(|s| {
                morgan_fingerprint(&parse_smiles(s).unwrap(), DEFAULT_RADIUS, DEFAULT_NBITS)
            })
            .collect();
        let mut total = 0.0;
        let mut pairs = 0.0;
        for i in 0..4 {
            for j in i + 1..4 {
                total += 1.0 - tanimoto(&fps[i], &fps[j]).unwrap();
                pairs += 1.0;
            }
        }
        assert!((diversity(&r) - total / pairs).abs() < 1e-12);
    }

    #[test]
    fn novelty_formulas() {
        let set = |items: &[&str]| -> BTreeSet<String> {
            items.iter().map(|s| s.to_string()).collect()
        };
        // Disjoint: both formulas give 1.0.
        let (p, c) = novelty(&set(&["A", "B"]), &set(&["C", "D"])).unwrap();
        assert_eq!((p, c), (1.0, 1.0));
        // M == S: primary formula gives 0.0.
        let (p, _) = novelty(&set(&["A"]), &set(&["A"])).unwrap();
        assert_eq!(p, 0.0);
        // |M & S| = 2, |S| = 8, |M| = 4 -> 0.75 and 0.5.
        let m = set(&["A", "B", "C", "D"]);
        let s = set(&["A", "B", "E", "F", "G", "H", "I", "J"]);
        let (p, c) = novelty(&m, &s).unwrap();
        assert!((p - 0.75).abs() < 1e-12);
        assert!((c - 0.5).abs() < 1e-12);
        // Empty training set errors.
        assert!(novelty(&m, &BTreeSet::new()).is_err());
    }

    #[test]
    fn predicate_grammar() {
        assert_eq!(Predicate::parse("any").unwrap(), Predicate::Any);
        assert_eq!(
            Predicate::parse("range:0.9:1.0").unwrap(),
            Predicate::Range { lo: 0.9, hi: 1.0 }
        );
        assert_eq!(Predicate::parse(">=0.5").unwrap(), Predicate::AtLeast(0.5));
        assert_eq!(
            Predicate::parse("imp>=1").unwrap(),
            Predicate::ImproveBy(1.0)
        );
        assert!(Predicate::parse("wat").is_err());
    }

    #[test]
    fn metrics_are_order_invariant() {
        let rows = vec![
            row("A", 0.0, vec![cand("CC", 0.8, 1.0), None]),
            row("B", 1.0, vec![cand("CCC", 0.6, 3.0), cand("CCO", 0.7, 2.0)]),
            row("C", 2.0, vec![None, None]),
        ];
        let fwd = Report {
            k: 2,
            rows: rows.clone(),
        };
        let rev = Report {
            k: 2,
            rows: rows.into_iter().rev().collect(),
        };
        let pred = Predicate::AtLeast(1.0);
        assert_eq!(
            success_rate(&fwd, 0.5, &pred),
            success_rate(&rev, 0.5, &pred)
        );
        assert_eq!(improvement(&fwd, 0.5), improvement(&rev, 0.5));
        assert_eq!(diversity(&fwd), diversity(&rev));
    }
}
