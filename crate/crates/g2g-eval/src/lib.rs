//! Dataset curation, property oracles, translation reports and the
//! evaluation metrics (success rate, improvement, diversity, novelty).

pub mod curate;
pub mod metrics;
pub mod oracle;
pub mod report;
pub mod toygen;

pub use curate::{curate_pairs, CuratedPair, CurationRule};
pub use metrics::{diversity, improvement, novelty, success_rate, EvalSummary, Predicate};
pub use oracle::{Oracle, OracleError};
pub use report::{Report, ReportCandidate, ReportRow};
