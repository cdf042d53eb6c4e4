//! Off-chain discussion sentiment: chat-export parsing, message scoring and
//! hourly/daily aggregation.
//!
//! A score is a probability triple `(p_pos, p_neg, p_neu)` on the simplex.
//! Heavy external scorers (a FinBERT-class model, say) are expected to run
//! elsewhere and hand their output over as a score CSV; [`LexiconScorer`] is
//! a small deterministic stand-in that keeps the pipeline self-contained.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Allowed deviation of a score's component sum from 1.
pub const SIMPLEX_TOLERANCE: f64 = 1e-6;

#[derive(Debug, thiserror::Error)]
pub enum SentimentError {
    #[error("invalid sentiment score ({p_pos}, {p_neg}, {p_neu}): {reason}")]
    InvalidScore {
        p_pos: f64,
        p_neg: f64,
        p_neu: f64,
        reason: &'static str,
    },
    #[error("message text is empty")]
    EmptyText,
    #[error("scoring message {index} failed: {message}")]
    Scoring { index: usize, message: String },
    #[error("unknown interval `{0}` (expected hour or day)")]
    UnknownInterval(String),
    #[error("{path}:{line}: {message}")]
    Row {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{path}: header does not match `{expected}`")]
    Schema { path: PathBuf, expected: &'static str },
    #[error("malformed chat export: {0}")]
    ChatExport(String),
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

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SentimentScore {
    pub p_pos: f64,
    pub p_neg: f64,
    pub p_neu: f64,
}

impl SentimentScore {
    pub const NEUTRAL: SentimentScore = SentimentScore {
        p_pos: 0.0,
        p_neg: 0.0,
        p_neu: 1.0,
    };

    pub fn new(p_pos: f64, p_neg: f64, p_neu: f64) -> Result<Self, SentimentError> {
        let invalid = |reason| SentimentError::InvalidScore {
            p_pos,
            p_neg,
            p_neu,
            reason,
        };
        let components = [p_pos, p_neg, p_neu];
        if components.iter().any(|p| !p.is_finite()) {
            return Err(invalid("non-finite component"));
        }
        if components.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
            return Err(invalid("component outside [0, 1]"));
        }
        if (p_pos + p_neg + p_neu - 1.0).abs() > SIMPLEX_TOLERANCE {
            return Err(invalid("components do not sum to 1"));
        }
        Ok(SentimentScore { p_pos, p_neg, p_neu })
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.p_pos, self.p_neg, self.p_neu]
    }

    pub fn sum(&self) -> f64 {
        self.p_pos + self.p_neg + self.p_neu
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    /// Unix seconds.
    pub timestamp: i64,
    pub channel: String,
    pub text: String,
}

impl Message {
    pub fn new(timestamp: i64, channel: impl Into<String>, text: impl Into<String>) -> Result<Self, SentimentError> {
        let text = text.into();
        if text.trim().is_empty() {
            return Err(SentimentError::EmptyText);
        }
        Ok(Message {
            timestamp,
            channel: channel.into(),
            text,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interval {
    Hour,
    Day,
}

impl Interval {
    pub fn seconds(self) -> i64 {
        match self {
            Interval::Hour => 3_600,
            Interval::Day => 86_400,
        }
    }

    /// Start of the UTC-aligned chunk containing `timestamp`.
    pub fn chunk_start(self, timestamp: i64) -> i64 {
        timestamp.div_euclid(self.seconds()) * self.seconds()
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Interval::Hour => "hour",
            Interval::Day => "day",
        })
    }
}

impl FromStr for Interval {
    type Err = SentimentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "hour" | "hourly" => Ok(Interval::Hour),
            "day" | "daily" => Ok(Interval::Day),
            _ => Err(SentimentError::UnknownInterval(s.to_owned())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bucket {
    pub chunk_start: i64,
    pub mean: SentimentScore,
    pub count: usize,
}

/// Interval-averaged sentiment; chunks without messages are absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentimentSeries {
    pub interval: Interval,
    buckets: Vec<Bucket>,
}

impl SentimentSeries {
    pub fn new(interval: Interval, buckets: Vec<Bucket>) -> Result<Self, SentimentError> {
        for pair in buckets.windows(2) {
            if pair[1].chunk_start <= pair[0].chunk_start {
                return Err(SentimentError::ChatExport(format!(
                    "series chunks out of order at {}",
                    pair[1].chunk_start
                )));
            }
        }
        if let Some(b) = buckets
            .iter()
            .find(|b| interval.chunk_start(b.chunk_start) != b.chunk_start)
        {
            return Err(SentimentError::ChatExport(format!(
                "chunk start {} is not aligned to the {interval} grid",
                b.chunk_start
            )));
        }
        Ok(SentimentSeries { interval, buckets })
    }

    pub fn buckets(&self) -> &[Bucket] {
        &self.buckets
    }

    pub fn is_empty(&self) -> bool {
        self.buckets.is_empty()
    }

    pub fn len(&self) -> usize {
        self.buckets.len()
    }

    pub fn get(&self, chunk_start: i64) -> Option<&Bucket> {
        self.buckets
            .binary_search_by_key(&chunk_start, |b| b.chunk_start)
            .ok()
            .map(|i| &self.buckets[i])
    }

    /// The last chunk that closed at or before `timestamp`, i.e. the chunk
    /// ending at the start of the chunk containing `timestamp`. `None` when
    /// that chunk had no messages.
    pub fn preceding(&self, timestamp: i64) -> Option<&Bucket> {
        let current = self.interval.chunk_start(timestamp);
        self.get(current - self.interval.seconds())
    }
}

/// Anything that maps a text to a sentiment triple. Must be callable from
/// several threads at once.
pub trait SentimentScorer: Sync {
    fn score(&self, text: &str) -> Result<SentimentScore, String>;
}

/// Keyword scorer: sums fixed word weights into positive and negative
/// evidence and softmax-normalizes `(pos, neg, NEUTRAL_LOGIT)`. Text with no
/// lexicon hit is fully neutral. A negator (`not`, `no`, ...) flips the
/// polarity of the next hit.
#[derive(Debug, Clone)]
pub struct LexiconScorer {
    weights: HashMap<&'static str, f64>,
}

const NEUTRAL_LOGIT: f64 = 1.0;

const POSITIVE: &[(&str, f64)] = &[
    ("bullish", 1.5),
    ("moon", 1.2),
    ("pump", 1.0),
    ("rally", 1.0),
    ("surge", 1.0),
    ("gain", 0.8),
    ("gains", 0.8),
    ("profit", 0.8),
    ("great", 0.8),
    ("good", 0.6),
    ("love", 0.8),
    ("win", 0.6),
    ("strong", 0.6),
    ("cheap", 0.5),
    ("fast", 0.4),
    ("up", 0.3),
    ("green", 0.5),
    ("thanks", 0.4),
    ("nice", 0.5),
    ("excited", 0.8),
    ("airdrop", 0.4),
];

const NEGATIVE: &[(&str, f64)] = &[
    ("bearish", 1.5),
    ("scam", 1.5),
    ("rug", 1.4),
    ("hack", 1.2),
    ("exploit", 1.2),
    ("crash", 1.2),
    ("dump", 1.0),
    ("loss", 0.8),
    ("fail", 0.8),
    ("failed", 0.8),
    ("stuck", 0.8),
    ("bad", 0.6),
    ("fear", 0.8),
    ("expensive", 0.7),
    ("congested", 0.7),
    ("slow", 0.4),
    ("down", 0.3),
    ("red", 0.5),
    ("sell", 0.4),
    ("worst", 1.0),
];

const NEGATORS: &[&str] = &["not", "no", "never", "dont", "don't", "isnt", "isn't"];

impl Default for LexiconScorer {
    fn default() -> Self {
        let weights = POSITIVE
            .iter()
            .map(|&(w, s)| (w, s))
            .chain(NEGATIVE.iter().map(|&(w, s)| (w, -s)))
            .collect();
        LexiconScorer { weights }
    }
}

impl LexiconScorer {
    pub fn new() -> Self {
        Self::default()
    }
}

impl SentimentScorer for LexiconScorer {
    fn score(&self, text: &str) -> Result<SentimentScore, String> {
        let lowered = text.to_lowercase();
        let mut pos = 0.0;
        let mut neg = 0.0;
        let mut hits = 0;
        let mut negate = false;
        for token in lowered.split(|c: char| !(c.is_alphanumeric() || c == '\'')) {
            if token.is_empty() {
                continue;
            }
            if NEGATORS.contains(&token) {
                negate = true;
                continue;
            }
            if let Some(&w) = self.weights.get(token) {
                let w = if negate { -w } else { w };
                negate = false;
                hits += 1;
                if w > 0.0 {
                    pos += w;
                } else {
                    neg -= w;
                }
            }
        }
        if hits == 0 {
            return Ok(SentimentScore::NEUTRAL);
        }
        let top = f64::max(pos, f64::max(neg, NEUTRAL_LOGIT));
        let e = [(pos - top).exp(), (neg - top).exp(), (NEUTRAL_LOGIT - top).exp()];
        let z: f64 = e.iter().sum();
        SentimentScore::new(e[0] / z, e[1] / z, e[2] / z).map_err(|e| e.to_string())
    }
}

pub fn score_message(text: &str, scorer: &dyn SentimentScorer) -> Result<SentimentScore, SentimentError> {
    if text.trim().is_empty() {
        return Err(SentimentError::EmptyText);
    }
    let raw = scorer
        .score(text)
        .map_err(|message| SentimentError::Scoring { index: 0, message })?;
    // External scorers are held to the same contract as the built-in one.
    SentimentScore::new(raw.p_pos, raw.p_neg, raw.p_neu)
}

/// Scores every message (in parallel), keeping input order.
pub fn score_messages(
    messages: &[Message],
    scorer: &dyn SentimentScorer,
) -> Result<Vec<(i64, SentimentScore)>, SentimentError> {
    messages
        .par_iter()
        .enumerate()
        .map(|(index, m)| {
            score_message(&m.text, scorer)
                .map(|s| (m.timestamp, s))
                .map_err(|e| SentimentError::Scoring {
                    index,
                    message: e.to_string(),
                })
        })
        .collect()
}

/// Per-chunk arithmetic mean of each component, messages weighted equally.
pub fn aggregate(scored: &[(i64, SentimentScore)], interval: Interval) -> SentimentSeries {
    let mut chunks: BTreeMap<i64, ([f64; 3], usize)> = BTreeMap::new();
    for (ts, score) in scored {
        let entry = chunks.entry(interval.chunk_start(*ts)).or_default();
        for (acc, p) in entry.0.iter_mut().zip(score.as_array()) {
            *acc += p;
        }
        entry.1 += 1;
    }
    let buckets = chunks
        .into_iter()
        .map(|(chunk_start, (sums, count))| {
            let n = count as f64;
            Bucket {
                chunk_start,
                mean: SentimentScore {
                    p_pos: sums[0] / n,
                    p_neg: sums[1] / n,
                    p_neu: sums[2] / n,
                },
                count,
            }
        })
        .collect();
    SentimentSeries { interval, buckets }
}

const SCORE_HEADER: &str = "timestamp,p_pos,p_neg,p_neu";
const SERIES_HEADER: &str = "chunk_start,interval,p_pos,p_neg,p_neu,count";

fn csv_reader(path: &Path, expected: &'static str) -> Result<csv::Reader<File>, SentimentError> {
    let mut reader = csv::Reader::from_path(path).map_err(|source| SentimentError::Csv {
        path: path.to_owned(),
        source,
    })?;
    let headers = reader.headers().map_err(|source| SentimentError::Csv {
        path: path.to_owned(),
        source,
    })?;
    if headers.iter().map(str::trim).ne(expected.split(',')) {
        return Err(SentimentError::Schema {
            path: path.to_owned(),
            expected,
        });
    }
    Ok(reader)
}

fn parse_field<T: FromStr>(record: &csv::StringRecord, i: usize, path: &Path, line: usize) -> Result<T, SentimentError>
where
    T::Err: fmt::Display,
{
    let raw = record.get(i).unwrap_or("").trim();
    raw.parse().map_err(|e: T::Err| SentimentError::Row {
        path: path.to_owned(),
        line,
        message: format!("field {i} `{raw}`: {e}"),
    })
}

/// Reads `timestamp,p_pos,p_neg,p_neu`, validates every row and sorts by
/// timestamp (stable, so ties keep file order).
pub fn import_scores(path: &Path) -> Result<Vec<(i64, SentimentScore)>, SentimentError> {
    let mut reader = csv_reader(path, SCORE_HEADER)?;
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|source| SentimentError::Csv {
            path: path.to_owned(),
            source,
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let ts: i64 = parse_field(&record, 0, path, line)?;
        let score = SentimentScore::new(
            parse_field(&record, 1, path, line)?,
            parse_field(&record, 2, path, line)?,
            parse_field(&record, 3, path, line)?,
        )
        .map_err(|e| SentimentError::Row {
            path: path.to_owned(),
            line,
            message: e.to_string(),
        })?;
        rows.push((ts, score));
    }
    rows.sort_by_key(|(ts, _)| *ts);
    Ok(rows)
}

pub fn export_scores(scored: &[(i64, SentimentScore)], path: &Path) -> Result<(), SentimentError> {
    write_csv(
        path,
        SCORE_HEADER,
        scored.iter().map(|(ts, s)| {
            vec![
                ts.to_string(),
                s.p_pos.to_string(),
                s.p_neg.to_string(),
                s.p_neu.to_string(),
            ]
        }),
    )
}

pub fn export_series(series: &SentimentSeries, path: &Path) -> Result<(), SentimentError> {
    write_csv(
        path,
        SERIES_HEADER,
        series.buckets.iter().map(|b| {
            vec![
                b.chunk_start.to_string(),
                series.interval.to_string(),
                b.mean.p_pos.to_string(),
                b.mean.p_neg.to_string(),
                b.mean.p_neu.to_string(),
                b.count.to_string(),
            ]
        }),
    )
}

/// Reads a series CSV. All rows must share one interval; an empty file needs
/// `fallback` to know its interval.
pub fn import_series(path: &Path, fallback: Interval) -> Result<SentimentSeries, SentimentError> {
    let mut reader = csv_reader(path, SERIES_HEADER)?;
    let mut interval = None;
    let mut buckets = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|source| SentimentError::Csv {
            path: path.to_owned(),
            source,
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let row_err = |message: String| SentimentError::Row {
            path: path.to_owned(),
            line,
            message,
        };
        let this: Interval = parse_field(&record, 1, path, line)?;
        if *interval.get_or_insert(this) != this {
            return Err(row_err("mixed intervals in one series".into()));
        }
        let mean = SentimentScore::new(
            parse_field(&record, 2, path, line)?,
            parse_field(&record, 3, path, line)?,
            parse_field(&record, 4, path, line)?,
        )
        .map_err(|e| row_err(e.to_string()))?;
        buckets.push(Bucket {
            chunk_start: parse_field(&record, 0, path, line)?,
            mean,
            count: parse_field(&record, 5, path, line)?,
        });
    }
    SentimentSeries::new(interval.unwrap_or(fallback), buckets).map_err(|e| SentimentError::Row {
        path: path.to_owned(),
        line: 0,
        message: e.to_string(),
    })
}

fn write_csv(path: &Path, header: &str, rows: impl Iterator<Item = Vec<String>>) -> Result<(), SentimentError> {
    let io_err = |source| SentimentError::Io {
        path: path.to_owned(),
        source,
    };
    let file = File::create(path).map_err(io_err)?;
    let mut writer = csv::Writer::from_writer(BufWriter::new(file));
    let csv_err = |source| SentimentError::Csv {
        path: path.to_owned(),
        source,
    };
    writer.write_record(header.split(',')).map_err(csv_err)?;
    for row in rows {
        writer.write_record(&row).map_err(csv_err)?;
    }
    writer.flush().map_err(io_err)
}

#[derive(Deserialize)]
struct ChatExport {
    #[serde(default)]
    channel: Option<ChatChannel>,
    messages: Vec<ChatMessage>,
}

#[derive(Deserialize)]
struct ChatChannel {
    #[serde(default)]
    name: Option<String>,
}

#[derive(Deserialize)]
struct ChatMessage {
    timestamp: String,
    #[serde(default)]
    content: Option<String>,
}

/// Parses a DiscordChatExporter JSON document. Entries with no text (image
/// or embed only) are skipped; timestamps are ISO-8601 and floored to whole
/// seconds.
pub fn parse_chat_export_str(json: &str) -> Result<Vec<Message>, SentimentError> {
    let export: ChatExport = serde_json::from_str(json).map_err(|e| SentimentError::ChatExport(e.to_string()))?;
    let channel = export.channel.and_then(|c| c.name).unwrap_or_default();
    let mut messages = Vec::with_capacity(export.messages.len());
    for (i, raw) in export.messages.into_iter().enumerate() {
        let Some(text) = raw.content.filter(|t| !t.trim().is_empty()) else {
            continue;
        };
        let timestamp = chrono::DateTime::parse_from_rfc3339(&raw.timestamp)
            .map_err(|e| SentimentError::ChatExport(format!("message {i}: timestamp `{}`: {e}", raw.timestamp)))?
            .timestamp();
        messages.push(Message {
            timestamp,
            channel: channel.clone(),
            text,
        });
    }
    Ok(messages)
}

pub fn parse_chat_export(path: &Path) -> Result<Vec<Message>, SentimentError> {
    let text = std::fs::read_to_string(path).map_err(|source| SentimentError::Io {
        path: path.to_owned(),
        source,
    })?;
    parse_chat_export_str(&text)
}

/// Writes messages back out in the chat-export shape (`content`,
/// `timestamp`); handy for fixtures.
pub fn write_chat_export(messages: &[Message], channel: &str, out: impl Write) -> Result<(), SentimentError> {
    let items: Vec<_> = messages
        .iter()
        .map(|m| {
            let ts = chrono::DateTime::from_timestamp(m.timestamp, 0)
                .map(|t| t.to_rfc3339())
                .unwrap_or_default();
            serde_json::json!({ "timestamp": ts, "content": m.text, "attachments": [] })
        })
        .collect();
    let doc = serde_json::json!({ "channel": { "name": channel }, "messages": items });
    serde_json::to_writer_pretty(out, &doc).map_err(|e| SentimentError::ChatExport(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Days since 1970-01-01 for a proleptic Gregorian date, by counting
    /// whole years and months.
    fn days_since_epoch(year: i64, month: u32, day: u32) -> i64 {
        let leap = |y: i64| (y % 4 == 0 && y % 100 != 0) || y % 400 == 0;
        let mut days = 0;
        for y in 1970..year {
            days += if leap(y) { 366 } else { 365 };
        }
        let month_len = [
            31,
            if leap(year) { 29 } else { 28 },
            31,
            30,
            31,
            30,
            31,
            31,
            30,
            31,
            30,
            31,
        ];
        days += month_len[..(month - 1) as usize].iter().sum::<i64>();
        days + day as i64 - 1
    }

    #[test]
    fn lexicon_neutral_default_and_determinism() {
        let scorer = LexiconScorer::new();
        assert_eq!(scorer.score("the block was produced").unwrap(), SentimentScore::NEUTRAL);
        let a = scorer.score("ARB airdrop is bullish, gas fees expensive").unwrap();
        let b = scorer.score("ARB airdrop is bullish, gas fees expensive").unwrap();
        assert_eq!(a, b);
        assert!((a.sum() - 1.0).abs() <= SIMPLEX_TOLERANCE);
        assert!(a.p_pos > a.p_neg);
        let negated = scorer.score("not good").unwrap();
        assert!(negated.p_neg > negated.p_pos);
    }

    #[test]
    fn score_message_rejects_empty_text() {
        assert!(matches!(
            score_message("  ", &LexiconScorer::new()),
            Err(SentimentError::EmptyText)
        ));
    }

    struct Broken;
    impl SentimentScorer for Broken {
        fn score(&self, text: &str) -> Result<SentimentScore, String> {
            if text.contains("boom") {
                Err("model crashed".into())
            } else {
                Ok(SentimentScore {
                    p_pos: 0.5,
                    p_neg: 0.5,
                    p_neu: 0.5,
                })
            }
        }
    }

    #[test]
    fn scorer_failure_names_message() {
        let messages = [
            Message::new(0, "c", "fine").unwrap(),
            Message::new(1, "c", "boom").unwrap(),
        ];
        match score_messages(&messages[1..], &Broken) {
            Err(SentimentError::Scoring { index: 0, message }) => assert!(message.contains("crashed")),
            other => panic!("unexpected {other:?}"),
        }
        // An external scorer that leaves the simplex is rejected too.
        assert!(score_messages(&messages[..1], &Broken).is_err());
    }

    #[test]
    fn hourly_mean_of_two_messages() {
        let scored = vec![
            (1_679_400_000, SentimentScore::new(0.6, 0.3, 0.1).unwrap()),
            (1_679_400_100, SentimentScore::new(0.2, 0.5, 0.3).unwrap()),
        ];
        let series = aggregate(&scored, Interval::Hour);
        assert_eq!(series.len(), 1);
        let m = series.buckets()[0].mean;
        assert!((m.p_pos - 0.4).abs() < 1e-12);
        assert!((m.p_neg - 0.4).abs() < 1e-12);
        assert!((m.p_neu - 0.2).abs() < 1e-12);
        assert_eq!(series.buckets()[0].count, 2);
    }

    #[test]
    fn single_message_bucket_is_identity_and_empty_chunks_omitted() {
        let s = SentimentScore::new(0.1, 0.2, 0.7).unwrap();
        let series = aggregate(&[(100, s), (7_300, s)], Interval::Hour);
        assert_eq!(series.len(), 2);
        assert_eq!(series.buckets()[0].mean, s);
        assert_eq!(series.buckets()[1].chunk_start, 7_200);
        assert!(series.get(3_600).is_none());
        assert!(aggregate(&[], Interval::Day).is_empty());
    }

    #[test]
    fn preceding_chunk_is_strict() {
        let s = SentimentScore::NEUTRAL;
        let series = aggregate(&[(9 * 3_600 + 5, s), (10 * 3_600 + 5, s)], Interval::Hour);
        assert_eq!(series.preceding(10 * 3_600 + 1_800).unwrap().chunk_start, 9 * 3_600);
        assert_eq!(series.preceding(10 * 3_600).unwrap().chunk_start, 9 * 3_600);
        assert!(series.preceding(9 * 3_600 + 1).is_none());
    }

    #[test]
    fn score_csv_rules() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        std::fs::write(
            &path,
            "timestamp,p_pos,p_neg,p_neu\n1679400100,0.2,0.5,0.3\n1679400000,0.6,0.3,0.1\n",
        )
        .unwrap();
        let rows = import_scores(&path).unwrap();
        assert_eq!(rows[0].0, 1_679_400_000);
        assert_eq!(rows[0].1, SentimentScore::new(0.6, 0.3, 0.1).unwrap());

        std::fs::write(
            &path,
            "timestamp,p_pos,p_neg,p_neu\n1679400000,0.6,0.3,0.1\n1679400000,0.5,0.3,0.1\n",
        )
        .unwrap();
        match import_scores(&path) {
            Err(SentimentError::Row { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn chat_export_parsing() {
        let doc = r#"{
            "guild": {"name": "Uniswap"},
            "channel": {"name": "general"},
            "messages": [
                {"id": "1", "timestamp": "2023-03-21T00:00:00Z", "content": "gas is expensive", "attachments": []},
                {"id": "2", "timestamp": "2023-03-21T00:00:05.250+00:00", "content": "", "attachments": [{"url": "x.png"}]},
                {"id": "3", "timestamp": "2023-03-21T01:00:00+01:00", "content": "bullish"},
                {"id": "4", "timestamp": "2023-03-21T02:30:00.999+00:00", "content": "ok"}
            ]
        }"#;
        let messages = parse_chat_export_str(doc).unwrap();
        assert_eq!(messages.len(), 3);
        let expected = days_since_epoch(2023, 3, 21) * 86_400;
        assert_eq!(expected, 1_679_356_800);
        assert_eq!(messages[0].timestamp, expected);
        assert_eq!(messages[1].timestamp, expected);
        assert_eq!(messages[2].timestamp, expected + 9_000);
        assert_eq!(messages[0].channel, "general");
    }

    #[test]
    fn chat_export_errors() {
        assert!(
            parse_chat_export_str(r#"{"messages": [{"timestamp": "2023-03-21T00:00:00Z", "content": "hi"}"#).is_err()
        );
        assert!(parse_chat_export_str(r#"{"messages": [{"timestamp": "yesterday", "content": "hi"}]}"#).is_err());
    }

    #[test]
    fn chat_export_writer_round_trips() {
        let messages = vec![Message::new(1_679_356_800, "dev", "gas spikes").unwrap()];
        let mut buf = Vec::new();
        write_chat_export(&messages, "dev", &mut buf).unwrap();
        assert_eq!(
            parse_chat_export_str(std::str::from_utf8(&buf).unwrap()).unwrap(),
            messages
        );
    }

    fn score_strategy() -> impl Strategy<Value = SentimentScore> {
        (0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0).prop_map(|(a, b, c)| {
            let z = a + b + c + 1e-12;
            SentimentScore {
                p_pos: a / z,
                p_neg: b / z,
                p_neu: 1.0 - a / z - b / z,
            }
        })
    }

    proptest! {
        #[test]
        fn aggregation_is_permutation_invariant_and_matches_brute_force(
            scores in proptest::collection::vec(score_strategy(), 1..20),
            offsets in proptest::collection::vec(0i64..3_600, 20),
        ) {
            let scored: Vec<_> = scores.iter().zip(&offsets).map(|(s, o)| (7_200 + o, *s)).collect();
            let series = aggregate(&scored, Interval::Hour);
            prop_assert_eq!(series.len(), 1);
            let mean = series.buckets()[0].mean;
            let n = scored.len() as f64;
            let brute = [
                scored.iter().map(|(_, s)| s.p_pos).sum::<f64>() / n,
                scored.iter().map(|(_, s)| s.p_neg).sum::<f64>() / n,
                scored.iter().map(|(_, s)| s.p_neu).sum::<f64>() / n,
            ];
            for (a, b) in mean.as_array().iter().zip(brute) {
                prop_assert!((a - b).abs() < 1e-12);
            }
            let mut reversed = scored.clone();
            reversed.reverse();
            let again = aggregate(&reversed, Interval::Hour).buckets()[0].mean;
            for (a, b) in again.as_array().iter().zip(mean.as_array()) {
                prop_assert!((a - b).abs() < 1e-12);
            }
            prop_assert!((mean.sum() - 1.0).abs() <= SIMPLEX_TOLERANCE);
        }
    }
}
