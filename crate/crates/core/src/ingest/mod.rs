//! Block-header acquisition: the [`BlockRecord`] schema, gap-free
//! [`BlockSequence`]s, chain validation, flat-file import/export and a
//! JSON-RPC client.

mod files;
mod rpc;

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use files::{export_blocks, import_blocks, FileFormat};
pub use rpc::{fetch_block, fetch_range, parse_quantity, HttpTransport, RetryPolicy, RpcClient, RpcError, Transport};

/// Gas units.
pub type Gas = u64;
/// Fee amounts in wei.
pub type Wei = u64;

/// Column order of the block CSV schema. JSONL objects use the same keys.
pub const BLOCK_COLUMNS: [&str; 5] = ["timestamp", "block_number", "gas_limit", "gas_used", "base_fee"];

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("invalid block {block_number}: {violation}")]
    InvalidRecord {
        block_number: u64,
        violation: RecordViolation,
    },
    #[error("block sequence is not a valid chain: {0}")]
    InvalidChain(ValidationReport),
    #[error("{path}: header does not match schema (expected `{expected}`, found `{found}`)")]
    SchemaMismatch {
        path: PathBuf,
        expected: String,
        found: String,
    },
    #[error("{path}:{line}: {message}")]
    Row {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("source `{0}` cannot be imported from a file; use fetch_range")]
    UnsupportedSource(String),
    #[error("empty source locator")]
    EmptyLocator,
    #[error("invalid block range {start}..={end}")]
    InvalidRange { start: u64, end: u64 },
    #[error("range fetch stopped at block {first_missing}: {source}")]
    PartialRange {
        first_missing: u64,
        #[source]
        source: RpcError,
    },
    #[error(transparent)]
    Rpc(#[from] RpcError),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error on {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

/// A breach of a single-record invariant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RecordViolation {
    ZeroGasLimit,
    ZeroBaseFee,
    GasUsedExceedsLimit { gas_used: Gas, gas_limit: Gas },
}

impl fmt::Display for RecordViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RecordViolation::ZeroGasLimit => f.write_str("gas_limit must be positive"),
            RecordViolation::ZeroBaseFee => f.write_str("base_fee must be positive"),
            RecordViolation::GasUsedExceedsLimit { gas_used, gas_limit } => {
                write!(f, "gas_used {gas_used} exceeds gas_limit {gas_limit}")
            }
        }
    }
}

/// One on-chain block header row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockRecord {
    /// Unix seconds.
    pub timestamp: i64,
    pub block_number: u64,
    pub gas_limit: Gas,
    pub gas_used: Gas,
    pub base_fee: Wei,
}

impl BlockRecord {
    pub fn new(
        timestamp: i64,
        block_number: u64,
        gas_limit: Gas,
        gas_used: Gas,
        base_fee: Wei,
    ) -> Result<Self, IngestError> {
        let record = BlockRecord {
            timestamp,
            block_number,
            gas_limit,
            gas_used,
            base_fee,
        };
        record.check()?;
        Ok(record)
    }

    pub fn violation(&self) -> Option<RecordViolation> {
        if self.gas_limit == 0 {
            Some(RecordViolation::ZeroGasLimit)
        } else if self.base_fee == 0 {
            Some(RecordViolation::ZeroBaseFee)
        } else if self.gas_used > self.gas_limit {
            Some(RecordViolation::GasUsedExceedsLimit {
                gas_used: self.gas_used,
                gas_limit: self.gas_limit,
            })
        } else {
            None
        }
    }

    pub fn check(&self) -> Result<(), IngestError> {
        match self.violation() {
            None => Ok(()),
            Some(violation) => Err(IngestError::InvalidRecord {
                block_number: self.block_number,
                violation,
            }),
        }
    }
}

/// An ordered, gap-free run of block headers.
///
/// The only way to build one is through [`BlockSequence::new`], which runs
/// [`validate_chain`]; a `BlockSequence` in hand always satisfies the
/// sequence invariants.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct BlockSequence {
    records: Vec<BlockRecord>,
}

impl BlockSequence {
    pub fn new(records: Vec<BlockRecord>) -> Result<Self, IngestError> {
        let report = validate_chain(&records);
        if !report.is_empty() {
            return Err(IngestError::InvalidChain(report));
        }
        Ok(BlockSequence { records })
    }

    pub fn empty() -> Self {
        BlockSequence::default()
    }

    pub fn records(&self) -> &[BlockRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn first(&self) -> Option<&BlockRecord> {
        self.records.first()
    }

    pub fn last(&self) -> Option<&BlockRecord> {
        self.records.last()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, BlockRecord> {
        self.records.iter()
    }

    pub fn into_records(self) -> Vec<BlockRecord> {
        self.records
    }
}

impl<'a> IntoIterator for &'a BlockSequence {
    type Item = &'a BlockRecord;
    type IntoIter = std::slice::Iter<'a, BlockRecord>;

    fn into_iter(self) -> Self::IntoIter {
        self.records.iter()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SourceKind {
    RpcEndpoint,
    CsvFile,
    JsonlFile,
}

/// Where block headers come from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IngestSource {
    kind: SourceKind,
    locator: String,
}

impl IngestSource {
    pub fn new(kind: SourceKind, locator: impl Into<String>) -> Result<Self, IngestError> {
        let locator = locator.into();
        if locator.trim().is_empty() {
            return Err(IngestError::EmptyLocator);
        }
        Ok(IngestSource { kind, locator })
    }

    pub fn csv(path: impl AsRef<Path>) -> Result<Self, IngestError> {
        Self::new(SourceKind::CsvFile, path.as_ref().to_string_lossy())
    }

    pub fn jsonl(path: impl AsRef<Path>) -> Result<Self, IngestError> {
        Self::new(SourceKind::JsonlFile, path.as_ref().to_string_lossy())
    }

    /// Guesses the kind from the locator: `http(s)://` is an endpoint,
    /// `.jsonl`/`.ndjson` is JSONL, anything else is CSV.
    pub fn infer(locator: &str) -> Result<Self, IngestError> {
        let lower = locator.to_ascii_lowercase();
        let kind = if lower.starts_with("http://") || lower.starts_with("https://") {
            SourceKind::RpcEndpoint
        } else if lower.ends_with(".jsonl") || lower.ends_with(".ndjson") {
            SourceKind::JsonlFile
        } else {
            SourceKind::CsvFile
        };
        Self::new(kind, locator)
    }

    pub fn kind(&self) -> SourceKind {
        self.kind
    }

    pub fn locator(&self) -> &str {
        &self.locator
    }
}

/// One problem found by [`validate_chain`]. `index` is the position in the
/// checked slice.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Finding {
    Gap {
        index: usize,
        after: u64,
        next: u64,
    },
    NumberOrder {
        index: usize,
        previous: u64,
        found: u64,
    },
    TimestampOrder {
        index: usize,
        previous: i64,
        found: i64,
    },
    Invariant {
        index: usize,
        block_number: u64,
        violation: RecordViolation,
    },
}

impl Finding {
    pub fn index(&self) -> usize {
        match self {
            Finding::Gap { index, .. }
            | Finding::NumberOrder { index, .. }
            | Finding::TimestampOrder { index, .. }
            | Finding::Invariant { index, .. } => *index,
        }
    }
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Finding::Gap { after, next, .. } => write!(f, "gap between block {after} and {next}"),
            Finding::NumberOrder { previous, found, .. } => {
                write!(f, "block number {found} does not follow {previous}")
            }
            Finding::TimestampOrder { previous, found, .. } => {
                write!(f, "timestamp {found} is earlier than previous {previous}")
            }
            Finding::Invariant {
                block_number,
                violation,
                ..
            } => write!(f, "block {block_number}: {violation}"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.findings.is_empty()
    }

    pub fn len(&self) -> usize {
        self.findings.len()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.findings.as_slice() {
            [] => f.write_str("no findings"),
            [first, rest @ ..] => {
                write!(f, "{first}")?;
                if !rest.is_empty() {
                    write!(f, " (and {} more)", rest.len())?;
                }
                Ok(())
            }
        }
    }
}

/// Lists every gap, ordering violation and record-invariant breach.
pub fn validate_chain(records: &[BlockRecord]) -> ValidationReport {
    let mut findings = Vec::new();
    for (index, record) in records.iter().enumerate() {
        if let Some(violation) = record.violation() {
            findings.push(Finding::Invariant {
                index,
                block_number: record.block_number,
                violation,
            });
        }
        let Some(prev) = index.checked_sub(1).map(|i| &records[i]) else {
            continue;
        };
        if record.block_number <= prev.block_number {
            findings.push(Finding::NumberOrder {
                index,
                previous: prev.block_number,
                found: record.block_number,
            });
        } else if record.block_number != prev.block_number + 1 {
            findings.push(Finding::Gap {
                index,
                after: prev.block_number,
                next: record.block_number,
            });
        }
        if record.timestamp < prev.timestamp {
            findings.push(Finding::TimestampOrder {
                index,
                previous: prev.timestamp,
                found: record.timestamp,
            });
        }
    }
    ValidationReport { findings }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn block(n: u64, ts: i64) -> BlockRecord {
        BlockRecord::new(ts, n, 30_000_000, 15_000_000, 1_000_000_000).unwrap()
    }

    #[test]
    fn record_invariants() {
        assert!(BlockRecord::new(0, 1, 30_000_000, 30_000_001, 7).is_err());
        assert!(BlockRecord::new(0, 1, 0, 0, 7).is_err());
        assert!(BlockRecord::new(0, 1, 10, 0, 0).is_err());
        assert!(BlockRecord::new(0, 1, 10, 10, 1).is_ok());
    }

    #[test]
    fn gap_is_one_finding() {
        let report = validate_chain(&[block(10, 0), block(12, 12)]);
        assert_eq!(
            report.findings,
            vec![Finding::Gap {
                index: 1,
                after: 10,
                next: 12
            }]
        );
    }

    #[test]
    fn decreasing_timestamp_is_one_finding() {
        let report = validate_chain(&[block(10, 24), block(11, 12)]);
        assert_eq!(report.len(), 1);
        assert!(matches!(report.findings[0], Finding::TimestampOrder { index: 1, .. }));
    }

    #[test]
    fn valid_sequence_has_empty_report() {
        let records: Vec<_> = (0..5).map(|i| block(100 + i, 12 * i as i64)).collect();
        assert!(validate_chain(&records).is_empty());
        assert_eq!(BlockSequence::new(records).unwrap().len(), 5);
    }

    #[test]
    fn duplicate_number_is_ordering_finding() {
        let report = validate_chain(&[block(5, 0), block(5, 0)]);
        assert!(matches!(report.findings[..], [Finding::NumberOrder { .. }]));
        assert!(BlockSequence::new(vec![block(5, 0), block(5, 0)]).is_err());
    }

    #[test]
    fn source_locator_must_be_non_empty() {
        assert!(IngestSource::new(SourceKind::CsvFile, "  ").is_err());
        assert_eq!(IngestSource::infer("x.jsonl").unwrap().kind(), SourceKind::JsonlFile);
        assert_eq!(
            IngestSource::infer("http://localhost:8545").unwrap().kind(),
            SourceKind::RpcEndpoint
        );
    }
}
