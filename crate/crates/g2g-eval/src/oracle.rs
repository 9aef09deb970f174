//! Property oracles: built-in combinatorial scorers and the external
//! child-process protocol (one SMILES per line in, one decimal real per line
//! out, line-aligned).

use std::io::Write;
use std::process::{Command, Stdio};

use g2g_chem::molgraph::{parse_smiles, Molecule};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("unknown oracle '{0}'")]
    Unknown(String),
    #[error("external oracle failed to start: {0}")]
    Spawn(std::io::Error),
    #[error("external oracle i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("external oracle returned {got} lines for {expected} molecules")]
    LineMismatch { got: usize, expected: usize },
    #[error("external oracle exited with status {0}")]
    Status(i32),
}

/// A deterministic molecule-to-real scorer.
#[derive(Debug, Clone, PartialEq)]
pub enum Oracle {
    MolecularWeight,
    RingCount,
    HeavyAtomCount,
    HalogenCount,
    External { command: Vec<String> },
}

impl Oracle {
    /// Parses an oracle spec: a builtin name or `external:<cmd> <args...>`.
    pub fn parse(spec: &str) -> Result<Oracle, OracleError> {
        match spec {
            "molecular_weight" | "mw" => Ok(Oracle::MolecularWeight),
            "ring_count" | "rings" => Ok(Oracle::RingCount),
            "heavy_atom_count" | "heavy_atoms" => Ok(Oracle::HeavyAtomCount),
            "halogen_count" | "halogens" => Ok(Oracle::HalogenCount),
            other => match other.strip_prefix("external:") {
                Some(cmd) if !cmd.trim().is_empty() => Ok(Oracle::External {
                    command: cmd.split_whitespace().map(String::from).collect(),
                }),
                _ => Err(OracleError::Unknown(other.to_string())),
            },
        }
    }

    pub fn name(&self) -> String {
        match self {
            Oracle::MolecularWeight => "molecular_weight".into(),
            Oracle::RingCount => "ring_count".into(),
            Oracle::HeavyAtomCount => "heavy_atom_count".into(),
            Oracle::HalogenCount => "halogen_count".into(),
            Oracle::External { command } => format!("external:{}", command.join(" ")),
        }
    }

    pub fn score_molecule(&self, m: &Molecule) -> Option<f64> {
        match self {
            Oracle::MolecularWeight => Some(m.molecular_weight()),
            Oracle::RingCount => Some(m.ring_count() as f64),
            Oracle::HeavyAtomCount => Some(m.atom_count() as f64),
            Oracle::HalogenCount => Some(
                m.atoms()
                    .iter()
                    .filter(|a| a.element.is_halogen())
                    .count() as f64,
            ),
            Oracle::External { .. } => unreachable!("external oracles score in batches"),
        }
    }

    /// Scores a batch. Per-molecule failures (unparseable SMILES, non-finite
    /// output) come back as None; process-level failures are errors.
    pub fn score_all(&self, smiles: &[String]) -> Result<Vec<Option<f64>>, OracleError> {
        match self {
            Oracle::External { command } => score_external(command, smiles),
            _ => Ok(smiles
                .iter()
                .map(|s| {
                    parse_smiles(s)
                        .ok()
                        .and_then(|m| self.score_molecule(&m))
                        .filter(|v| v.is_finite())
                })
                .collect()),
        }
    }
}

fn score_external(command: &[String], smiles: &[String]) -> Result<Vec<Option<f64>>, OracleError> {
    let mut child = Command::new(&command[0])
        .args(&command[1..])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::inherit())
        .spawn()
        .map_err(OracleError::Spawn)?;
    {
        let stdin = child.stdin.as_mut().expect("piped stdin");
        for s in smiles {
            writeln!(stdin, "{}", s)?;
        }
    }
    let output = child.wait_with_output()?;
    if !output.status.success() {
        return Err(OracleError::Status(output.status.code().unwrap_or(-1)));
    }
    let text = String::from_utf8_lossy(&output.stdout);
    let lines: Vec<&str> = text.lines().collect();
    if lines.len() != smiles.len() {
        return Err(OracleError::LineMismatch {
            got: lines.len(),
            expected: smiles.len(),
        });
    }
    Ok(lines
        .iter()
        .map(|l| l.trim().parse::<f64>().ok().filter(|v| v.is_finite()))
        .collect())
}
