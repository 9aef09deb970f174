//! Translation report file: a header line, then one tab-separated record per
//! source molecule holding K candidate triples (SMILES or `-`, similarity,
//! score).

use std::io::{BufRead, Write};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed report line {line}: {msg}")]
    Malformed { line: usize, msg: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportCandidate {
    pub smiles: String,
    pub similarity: f64,
    pub score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub source: String,
    pub source_score: Option<f64>,
    pub candidates: Vec<Option<ReportCandidate>>,
}

impl ReportRow {
    /// Candidates that decoded successfully.
    pub fn valid(&self) -> impl Iterator<Item = &ReportCandidate> {
        self.candidates.iter().flatten()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub k: usize,
    pub rows: Vec<ReportRow>,
}

impl Report {
    pub fn write_to(&self, w: &mut impl Write) -> Result<(), ReportError> {
        writeln!(w, "source\tsource_score\tk={}", self.k)?;
        for row in &self.rows {
            write!(w, "{}\t{}", row.source, fmt_opt(row.source_score))?;
            for cand in &row.candidates {
                match cand {
                    Some(c) => write!(
                        w,
                        "\t{}\t{:.6}\t{}",
                        c.smiles,
                        c.similarity,
                        fmt_opt(c.score)
                    )?,
                    None => write!(w, "\t-\t-\t-")?,
                }
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn read_from(r: impl BufRead) -> Result<Report, ReportError> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| ReportError::Malformed {
                line: 1,
                msg: "empty report".into(),
            })?
            .map_err(ReportError::Io)?;
        let k = header
            .rsplit("k=")
            .next()
            .and_then(|s| s.trim().parse::<usize>().ok())
            .ok_or_else(|| ReportError::Malformed {
                line: 1,
                msg: "missing k= in header".into(),
            })?;
        let mut rows = Vec::new();
        for (li, line) in lines.enumerate() {
            let line = line.map_err(ReportError::Io)?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 2 + 3 * k {
                return Err(ReportError::Malformed {
                    line: li + 2,
                    msg: format!("expected {} fields, found {}", 2 + 3 * k, fields.len()),
                });
            }
            let source = fields[0].to_string();
            let source_score = parse_opt(fields[1]).map_err(|msg| ReportError::Malformed {
                line: li + 2,
                msg,
            })?;
            let mut candidates = Vec::with_capacity(k);
            for c in 0..k {
                let smiles = fields[2 + 3 * c];
                if smiles == "-" {
                    candidates.push(None);
                    continue;
                }
                let sim: f64 =
                    fields[3 + 3 * c]
                        .parse()
                        .map_err(|_| ReportError::Malformed {
                            line: li + 2,
                            msg: format!("bad similarity '{}'", fields[3 + 3 * c]),
                        })?;
                let score = parse_opt(fields[4 + 3 * c]).map_err(|msg| ReportError::Malformed {
                    line: li + 2,
                    msg,
                })?;
                candidates.push(Some(ReportCandidate {
                    smiles: smiles.to_string(),
                    similarity: sim,
                    score,
                }));
            }
            rows.push(ReportRow {
                source,
                source_score,
                candidates,
            });
        }
        Ok(Report { k, rows })
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    match x {
        Some(v) => format!("{:.6}", v),
        None => "-".into(),
    }
}

fn parse_opt(s: &str) -> Result<Option<f64>, String> {
    if s == "-" {
        Ok(None)
    } else {
        s.parse::<f64>()
            .map(Some)
            .map_err(|_| format!("bad number '{}'", s))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Report {
        Report {
            k: 2,
            rows: vec![
                ReportRow {
                    source: "CCO".into(),
                    source_score: Some(0.0),
                    candidates: vec![
                        Some(ReportCandidate {
                            smiles: "CCCO".into(),
                            similarity: 0.5,
                            score: Some(1.0),
                        }),
                        None,
                    ],
                },
                ReportRow {
                    source: "CCC".into(),
                    source_score: None,
                    candidates: vec![None, None],
                },
            ],
        }
    }

    #[test]
    fn round_trip() {
        let report = sample();
        let mut buf = Vec::new();
        report.write_to(&mut buf).unwrap();
        let back = Report::read_from(buf.as_slice()).unwrap();
        assert_eq!(report, back);
    }

    #[test]
    fn field_count_is_checked() {
        let text = "source\tsource_score\tk=2\nCCO\t1.0\tC\t0.5\n";
        assert!(matches!(
            Report::read_from(text.as_bytes()),
            Err(ReportError::Malformed { .. })
        ));
    }
}
