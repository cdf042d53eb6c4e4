use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::BenchError;
use crate::features::SentimentFlags;

/// Aggregated test error of one matrix cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub period: String,
    pub k: usize,
    /// Rendered `+OC,+DS,-HS` in files.
    #[serde(with = "setting_text")]
    pub setting: SentimentFlags,
    pub model: String,
    pub mse: f64,
    pub variance: f64,
    pub trials: usize,
}

mod setting_text {
    use serde::{Deserialize, Deserializer, Serializer};

    use crate::features::SentimentFlags;

    pub fn serialize<S: Serializer>(flags: &SentimentFlags, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(flags)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<SentimentFlags, D::Error> {
        let text = String::deserialize(d)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
    Markdown,
}

impl ReportFormat {
    /// `.json` and `.md` by extension, CSV otherwise.
    pub fn from_path(path: &Path) -> ReportFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => ReportFormat::Json,
            Some("md" | "markdown") => ReportFormat::Markdown,
            _ => ReportFormat::Csv,
        }
    }
}

impl FromStr for ReportFormat {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            _ => Err(BenchError::Report(format!("unknown report format `{s}`"))),
        }
    }
}

fn check_rows(rows: &[ReportRow]) -> Result<(), BenchError> {
    if rows.is_empty() {
        return Err(BenchError::Report("no rows to report".into()));
    }
    for r in rows {
        if !(r.mse >= 0.0 && r.variance >= 0.0) {
            return Err(BenchError::Report(format!(
                "{} k={} {}: mse {} and variance {} must be non-negative",
                r.period, r.k, r.setting, r.mse, r.variance
            )));
        }
    }
    Ok(())
}

pub fn write_csv<W: Write>(rows: &[ReportRow], out: W) -> Result<(), BenchError> {
    check_rows(rows)?;
    let mut writer = csv::Writer::from_writer(out);
    for r in rows {
        writer.serialize(r)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<ReportRow>, BenchError> {
    let rows = csv::Reader::from_reader(input)
        .deserialize()
        .collect::<Result<Vec<ReportRow>, _>>()?;
    check_rows(&rows)?;
    Ok(rows)
}

/// One section per period (and per model when a period has several), rows
/// k = 3, 2, 1 in the order the rows arrive, one column per sentiment
/// setting. Cells read `mse (var variance)`.
pub fn render_markdown(rows: &[ReportRow]) -> Result<String, BenchError> {
    check_rows(rows)?;
    let mut groups: Vec<(&str, &str)> = Vec::new();
    for r in rows {
        if !groups.contains(&(r.period.as_str(), r.model.as_str())) {
            groups.push((&r.period, &r.model));
        }
    }
    let mut out = String::new();
    for (i, &(period, model)) in groups.iter().enumerate() {
        let several = groups.iter().filter(|g| g.0 == period).count() > 1;
        if i > 0 {
            out.push('\n');
        }
        if several {
            writeln!(out, "## {period} ({model})").unwrap();
        } else {
            writeln!(out, "## {period}").unwrap();
        }
        out.push('\n');
        out.push_str("| k |");
        for flags in SentimentFlags::ALL {
            write!(out, " {flags} |").unwrap();
        }
        out.push_str("\n|---|");
        out.push_str(&"---|".repeat(SentimentFlags::ALL.len()));
        out.push('\n');
        let group: Vec<&ReportRow> = rows.iter().filter(|r| r.period == period && r.model == model).collect();
        let mut ks: Vec<usize> = group.iter().map(|r| r.k).collect();
        ks.sort_unstable_by(|a, b| b.cmp(a));
        ks.dedup();
        for k in ks {
            write!(out, "| {k} |").unwrap();
            for flags in SentimentFlags::ALL {
                match group.iter().find(|r| r.k == k && r.setting == flags) {
                    Some(r) => write!(out, " {:.5} (var {:.2e}) |", r.mse, r.variance).unwrap(),
                    None => out.push_str(" n/a |"),
                }
            }
            out.push('\n');
        }
    }
    Ok(out)
}

pub fn emit_report(rows: &[ReportRow], path: &Path, format: ReportFormat) -> Result<(), BenchError> {
    check_rows(rows)?;
    match format {
        ReportFormat::Csv => write_csv(rows, std::io::BufWriter::new(std::fs::File::create(path)?)),
        ReportFormat::Json => {
            let mut text = serde_json::to_string_pretty(rows)?;
            text.push('\n');
            std::fs::write(path, text)?;
            Ok(())
        }
        ReportFormat::Markdown => {
            std::fs::write(path, render_markdown(rows)?)?;
            Ok(())
        }
    }
}

/// Reads a CSV or JSON report; markdown is output only.
pub fn parse_report(path: &Path, format: ReportFormat) -> Result<Vec<ReportRow>, BenchError> {
    match format {
        ReportFormat::Csv => read_csv(std::fs::File::open(path)?),
        ReportFormat::Json => {
            let rows: Vec<ReportRow> = serde_json::from_str(&std::fs::read_to_string(path)?)?;
            check_rows(&rows)?;
            Ok(rows)
        }
        ReportFormat::Markdown => Err(BenchError::Report("markdown reports cannot be parsed back".into())),
    }
}
