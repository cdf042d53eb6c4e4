use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{validate_chain, BlockRecord, BlockSequence, IngestError, IngestSource, SourceKind, BLOCK_COLUMNS};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FileFormat {
    Csv,
    Jsonl,
}

impl FileFormat {
    pub fn from_path(path: &Path) -> FileFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl") | Some("ndjson") => FileFormat::Jsonl,
            _ => FileFormat::Csv,
        }
    }
}

/// Reads and validates a block file. Every row is checked against the record
/// invariants and the whole file against the sequence invariants; the first
/// problem is reported with its 1-based line number.
pub fn import_blocks(source: &IngestSource) -> Result<BlockSequence, IngestError> {
    let path = Path::new(source.locator());
    let rows = match source.kind() {
        SourceKind::CsvFile => read_csv(path)?,
        SourceKind::JsonlFile => read_jsonl(path)?,
        SourceKind::RpcEndpoint => return Err(IngestError::UnsupportedSource(source.locator().to_owned())),
    };
    let (lines, records): (Vec<usize>, Vec<BlockRecord>) = rows.into_iter().unzip();
    let report = validate_chain(&records);
    if let Some(finding) = report.findings.first() {
        return Err(IngestError::Row {
            path: path.to_owned(),
            line: lines[finding.index()],
            message: finding.to_string(),
        });
    }
    BlockSequence::new(records)
}

pub fn export_blocks(seq: &BlockSequence, path: &Path, format: FileFormat) -> Result<(), IngestError> {
    let io_err = |source| IngestError::Io {
        path: path.to_owned(),
        source,
    };
    match format {
        FileFormat::Csv => {
            let mut writer = csv::Writer::from_path(path).map_err(|source| IngestError::Csv {
                path: path.to_owned(),
                source,
            })?;
            let csv_err = |source| IngestError::Csv {
                path: path.to_owned(),
                source,
            };
            writer.write_record(BLOCK_COLUMNS).map_err(csv_err)?;
            for r in seq {
                writer
                    .write_record([
                        r.timestamp.to_string(),
                        r.block_number.to_string(),
                        r.gas_limit.to_string(),
                        r.gas_used.to_string(),
                        r.base_fee.to_string(),
                    ])
                    .map_err(csv_err)?;
            }
            writer.flush().map_err(io_err)?;
        }
        FileFormat::Jsonl => {
            let file = File::create(path).map_err(io_err)?;
            let mut out = BufWriter::new(file);
            for r in seq {
                let line = serde_json::to_string(r).expect("block records always serialize");
                writeln!(out, "{line}").map_err(io_err)?;
            }
            out.flush().map_err(io_err)?;
        }
    }
    Ok(())
}

fn read_csv(path: &Path) -> Result<Vec<(usize, BlockRecord)>, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|source| IngestError::Csv {
            path: path.to_owned(),
            source,
        })?;
    let headers = reader.headers().map_err(|source| IngestError::Csv {
        path: path.to_owned(),
        source,
    })?;
    if headers.iter().map(str::trim).ne(BLOCK_COLUMNS) {
        return Err(IngestError::SchemaMismatch {
            path: path.to_owned(),
            expected: BLOCK_COLUMNS.join(","),
            found: headers.iter().collect::<Vec<_>>().join(","),
        });
    }

    let mut rows = Vec::new();
    for result in reader.records() {
        let record = result.map_err(|source| IngestError::Csv {
            path: path.to_owned(),
            source,
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let row_err = |message: String| IngestError::Row {
            path: path.to_owned(),
            line,
            message,
        };
        if record.len() != BLOCK_COLUMNS.len() {
            return Err(row_err(format!(
                "expected {} fields, found {}",
                BLOCK_COLUMNS.len(),
                record.len()
            )));
        }
        let field = |i: usize| record[i].trim();
        let int = |i: usize| {
            field(i)
                .parse::<u64>()
                .map_err(|e| row_err(format!("{}: `{}`: {e}", BLOCK_COLUMNS[i], field(i))))
        };
        let timestamp = field(0)
            .parse::<i64>()
            .map_err(|e| row_err(format!("timestamp: `{}`: {e}", field(0))))?;
        let block = BlockRecord {
            timestamp,
            block_number: int(1)?,
            gas_limit: int(2)?,
            gas_used: int(3)?,
            base_fee: int(4)?,
        };
        if let Some(violation) = block.violation() {
            return Err(row_err(violation.to_string()));
        }
        rows.push((line, block));
    }
    Ok(rows)
}

fn read_jsonl(path: &Path) -> Result<Vec<(usize, BlockRecord)>, IngestError> {
    let io_err = |source| IngestError::Io {
        path: path.to_owned(),
        source,
    };
    let reader = BufReader::new(File::open(path).map_err(io_err)?);
    let mut rows = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(io_err)?;
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let block: BlockRecord = serde_json::from_str(&line).map_err(|e| IngestError::Row {
            path: path.to_owned(),
            line: line_no,
            message: e.to_string(),
        })?;
        if let Some(violation) = block.violation() {
            return Err(IngestError::Row {
                path: path.to_owned(),
                line: line_no,
                message: violation.to_string(),
            });
        }
        rows.push((line_no, block));
    }
    Ok(rows)
}
