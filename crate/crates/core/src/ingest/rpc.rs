//! Minimal JSON-RPC 2.0 client for `eth_getBlockByNumber` (header only).

use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::thread;
use std::time::Duration;

use serde_json::{json, Value};

use super::{BlockRecord, BlockSequence, IngestError};

#[derive(Debug, Clone, thiserror::Error)]
pub enum RpcError {
    /// Network-level failure; retried by [`RpcClient`].
    #[error("transport error: {0}")]
    Transport(String),
    #[error("block {0} not found")]
    NotFound(u64),
    #[error("node error {code}: {message}")]
    Node { code: i64, message: String },
    #[error("block {0} has no baseFeePerGas (pre-London block)")]
    MissingBaseFee(u64),
    #[error("decode error: {0}")]
    Decode(String),
}

impl RpcError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, RpcError::Transport(_))
    }
}

/// Something that can execute a JSON-RPC call and hand back its `result`.
pub trait Transport: Send + Sync {
    fn call(&self, method: &str, params: Value) -> Result<Value, RpcError>;
}

impl<T: Transport + ?Sized> Transport for &T {
    fn call(&self, method: &str, params: Value) -> Result<Value, RpcError> {
        (**self).call(method, params)
    }
}

pub struct HttpTransport {
    url: String,
    agent: ureq::Agent,
    next_id: AtomicU64,
}

impl HttpTransport {
    pub fn new(url: impl Into<String>) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(30)))
            .build()
            .into();
        HttpTransport {
            url: url.into(),
            agent,
            next_id: AtomicU64::new(1),
        }
    }
}

impl Transport for HttpTransport {
    fn call(&self, method: &str, params: Value) -> Result<Value, RpcError> {
        let id = self.next_id.fetch_add(1, Ordering::Relaxed);
        let body = json!({ "jsonrpc": "2.0", "id": id, "method": method, "params": params });
        let mut response = self
            .agent
            .post(&self.url)
            .send_json(&body)
            .map_err(|e| RpcError::Transport(e.to_string()))?;
        let mut envelope: Value = response
            .body_mut()
            .read_json()
            .map_err(|e| RpcError::Decode(format!("response body: {e}")))?;
        if let Some(err) = envelope.get("error").filter(|e| !e.is_null()) {
            return Err(RpcError::Node {
                code: err.get("code").and_then(Value::as_i64).unwrap_or(0),
                message: err
                    .get("message")
                    .and_then(Value::as_str)
                    .unwrap_or_default()
                    .to_owned(),
            });
        }
        match envelope.get_mut("result") {
            Some(result) => Ok(result.take()),
            None => Err(RpcError::Decode("response has neither result nor error".into())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub initial_backoff: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            attempts: 5,
            initial_backoff: Duration::from_millis(500),
        }
    }
}

impl RetryPolicy {
    fn run<T>(&self, mut op: impl FnMut() -> Result<T, RpcError>) -> Result<T, RpcError> {
        let mut backoff = self.initial_backoff;
        let mut attempt = 1;
        loop {
            match op() {
                Err(e) if e.is_retryable() && attempt < self.attempts.max(1) => {
                    log::debug!("attempt {attempt} failed ({e}); retrying in {backoff:?}");
                    thread::sleep(backoff);
                    backoff *= 2;
                    attempt += 1;
                }
                other => return other,
            }
        }
    }
}

pub struct RpcClient<T> {
    transport: T,
    retry: RetryPolicy,
    parallelism: usize,
}

impl RpcClient<HttpTransport> {
    pub fn http(url: &str) -> Self {
        RpcClient::new(HttpTransport::new(url))
    }
}

impl<T: Transport> RpcClient<T> {
    pub fn new(transport: T) -> Self {
        RpcClient {
            transport,
            retry: RetryPolicy::default(),
            parallelism: 4,
        }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    /// Number of concurrent requests issued by [`RpcClient::fetch_range`].
    pub fn with_parallelism(mut self, width: usize) -> Self {
        self.parallelism = width.max(1);
        self
    }

    pub fn fetch_block(&self, number: u64) -> Result<BlockRecord, RpcError> {
        self.retry.run(|| {
            let result = self
                .transport
                .call("eth_getBlockByNumber", json!([format!("{number:#x}"), false]))?;
            if result.is_null() {
                return Err(RpcError::NotFound(number));
            }
            decode_header(&result, number)
        })
    }

    /// Fetches `start..=end`. Requests run on up to `parallelism` threads but
    /// the result is always assembled in block-number order.
    pub fn fetch_range(&self, start: u64, end: u64) -> Result<BlockSequence, IngestError> {
        if start > end {
            return Err(IngestError::InvalidRange { start, end });
        }
        let count = (end - start + 1) as usize;
        let next = AtomicU64::new(0);
        let failed = AtomicBool::new(false);
        let workers = self.parallelism.min(count);

        let mut slots: Vec<Option<Result<BlockRecord, RpcError>>> = vec![None; count];
        let batches: Vec<Vec<(usize, Result<BlockRecord, RpcError>)>> = thread::scope(|s| {
            let handles: Vec<_> = (0..workers)
                .map(|_| {
                    s.spawn(|| {
                        let mut out = Vec::new();
                        while !failed.load(Ordering::Relaxed) {
                            let i = next.fetch_add(1, Ordering::Relaxed) as usize;
                            if i >= count {
                                break;
                            }
                            let result = self.fetch_block(start + i as u64);
                            if result.is_err() {
                                failed.store(true, Ordering::Relaxed);
                            }
                            out.push((i, result));
                        }
                        out
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("fetch worker panicked"))
                .collect()
        });
        for (i, result) in batches.into_iter().flatten() {
            slots[i] = Some(result);
        }

        let mut records = Vec::with_capacity(count);
        for (i, slot) in slots.into_iter().enumerate() {
            match slot {
                Some(Ok(record)) => records.push(record),
                Some(Err(source)) => {
                    return Err(IngestError::PartialRange {
                        first_missing: start + i as u64,
                        source,
                    })
                }
                // Only indices after a failure are ever left unfetched, and the
                // failure itself sorts first.
                None => unreachable!("unfetched block {} precedes every failure", start + i as u64),
            }
        }
        BlockSequence::new(records)
    }
}

pub fn fetch_block(endpoint: &str, number: u64) -> Result<BlockRecord, RpcError> {
    RpcClient::http(endpoint).fetch_block(number)
}

pub fn fetch_range(endpoint: &str, start: u64, end: u64) -> Result<BlockSequence, IngestError> {
    RpcClient::http(endpoint).fetch_range(start, end)
}

/// Decodes a JSON-RPC hex quantity (`0x`-prefixed, no leading zeros beyond
/// `0x0`, at most 64 bits).
pub fn parse_quantity(raw: &str) -> Result<u64, RpcError> {
    let digits = raw
        .strip_prefix("0x")
        .ok_or_else(|| RpcError::Decode(format!("quantity `{raw}` lacks 0x prefix")))?;
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_hexdigit()) {
        return Err(RpcError::Decode(format!("quantity `{raw}` is not hex")));
    }
    if digits.len() > 1 && digits.starts_with('0') {
        return Err(RpcError::Decode(format!("quantity `{raw}` has leading zeros")));
    }
    u64::from_str_radix(digits, 16).map_err(|e| RpcError::Decode(format!("quantity `{raw}`: {e}")))
}

fn decode_header(block: &Value, requested: u64) -> Result<BlockRecord, RpcError> {
    let field = |name: &str| -> Result<Option<u64>, RpcError> {
        match block.get(name) {
            None | Some(Value::Null) => Ok(None),
            Some(Value::String(s)) => parse_quantity(s).map(Some),
            Some(other) => Err(RpcError::Decode(format!("{name}: expected hex string, got {other}"))),
        }
    };
    let required = |name: &str| -> Result<u64, RpcError> {
        field(name)?.ok_or_else(|| RpcError::Decode(format!("missing field {name}")))
    };

    let number = required("number")?;
    if number != requested {
        return Err(RpcError::Decode(format!(
            "asked for block {requested}, node returned {number}"
        )));
    }
    let timestamp =
        i64::try_from(required("timestamp")?).map_err(|_| RpcError::Decode("timestamp out of range".into()))?;
    let record = BlockRecord {
        timestamp,
        block_number: number,
        gas_limit: required("gasLimit")?,
        gas_used: required("gasUsed")?,
        base_fee: field("baseFeePerGas")?.ok_or(RpcError::MissingBaseFee(number))?,
    };
    match record.violation() {
        Some(v) => Err(RpcError::Decode(format!("block {number}: {v}"))),
        None => Ok(record),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Mutex;

    /// Serves synthetic headers for blocks `0..=head`; optionally fails the
    /// first `flaky` calls for each block with a transport error.
    struct FakeNode {
        head: u64,
        flaky: u32,
        failures: Mutex<std::collections::HashMap<u64, u32>>,
        always_fail: Option<u64>,
    }

    impl FakeNode {
        fn new(head: u64) -> Self {
            FakeNode {
                head,
                flaky: 0,
                failures: Mutex::default(),
                always_fail: None,
            }
        }
    }

    impl Transport for FakeNode {
        fn call(&self, method: &str, params: Value) -> Result<Value, RpcError> {
            assert_eq!(method, "eth_getBlockByNumber");
            assert_eq!(params[1], Value::Bool(false));
            let n = parse_quantity(params[0].as_str().unwrap()).unwrap();
            if self.always_fail == Some(n) {
                return Err(RpcError::Transport("connection reset".into()));
            }
            {
                let mut failures = self.failures.lock().unwrap();
                let seen = failures.entry(n).or_default();
                if *seen < self.flaky {
                    *seen += 1;
                    return Err(RpcError::Transport("timeout".into()));
                }
            }
            if n > self.head {
                return Ok(Value::Null);
            }
            Ok(json!({
                "number": format!("{n:#x}"),
                "timestamp": format!("{:#x}", 1_679_356_800 + 12 * n),
                "gasLimit": "0x1c9c380",
                "gasUsed": format!("{:#x}", (n * 7_919) % 30_000_000),
                "baseFeePerGas": "0x3b9aca00",
                "hash": "0xabc",
            }))
        }
    }

    fn fast_retry() -> RetryPolicy {
        RetryPolicy {
            attempts: 5,
            initial_backoff: Duration::from_millis(1),
        }
    }

    #[test]
    fn quantities() {
        assert_eq!(parse_quantity("0x1c9c380").unwrap(), 30_000_000);
        assert_eq!(parse_quantity("0x0").unwrap(), 0);
        for bad in ["1c9c380", "0x", "0xzz", "0x01", "0x1ffffffffffffffff", ""] {
            assert!(parse_quantity(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn decodes_gas_limit() {
        let client = RpcClient::new(FakeNode::new(100));
        let block = client.fetch_block(42).unwrap();
        assert_eq!(block.gas_limit, 30_000_000);
        assert_eq!(block.base_fee, 1_000_000_000);
        assert_eq!(block.block_number, 42);
    }

    #[test]
    fn future_block_not_found() {
        let client = RpcClient::new(FakeNode::new(100));
        assert!(matches!(client.fetch_block(101), Err(RpcError::NotFound(101))));
    }

    #[test]
    fn over_full_block_is_decode_error() {
        let value = json!({
            "number": "0x1", "timestamp": "0x0", "gasLimit": "0x10",
            "gasUsed": "0x11", "baseFeePerGas": "0x7"
        });
        assert!(matches!(decode_header(&value, 1), Err(RpcError::Decode(_))));
    }

    #[test]
    fn pre_london_block_rejected() {
        let value = json!({ "number": "0x1", "timestamp": "0x0", "gasLimit": "0x10", "gasUsed": "0x1" });
        assert!(matches!(decode_header(&value, 1), Err(RpcError::MissingBaseFee(1))));
    }

    #[test]
    fn degenerate_and_short_ranges() {
        let client = RpcClient::new(FakeNode::new(100));
        assert_eq!(client.fetch_range(5, 5).unwrap().len(), 1);
        let seq = client.fetch_range(5, 7).unwrap();
        let numbers: Vec<_> = seq.iter().map(|b| b.block_number).collect();
        assert_eq!(numbers, vec![5, 6, 7]);
        assert!(matches!(
            client.fetch_range(7, 5),
            Err(IngestError::InvalidRange { .. })
        ));
    }

    #[test]
    fn transient_failures_are_retried() {
        let mut node = FakeNode::new(50);
        node.flaky = 2;
        let client = RpcClient::new(node).with_retry(fast_retry()).with_parallelism(3);
        assert_eq!(client.fetch_range(0, 20).unwrap().len(), 21);
    }

    #[test]
    fn persistent_failure_names_first_missing_block() {
        let mut node = FakeNode::new(50);
        node.always_fail = Some(13);
        let client = RpcClient::new(node).with_retry(fast_retry()).with_parallelism(4);
        match client.fetch_range(10, 40) {
            Err(IngestError::PartialRange { first_missing, .. }) => assert_eq!(first_missing, 13),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn range_past_head_fails_at_head_plus_one() {
        let client = RpcClient::new(FakeNode::new(30)).with_parallelism(2);
        match client.fetch_range(25, 40) {
            Err(IngestError::PartialRange { first_missing, .. }) => assert_eq!(first_missing, 31),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn period_one_sized_range() {
        let start = 16_880_000;
        let end = start + 78_290 - 1;
        let client = RpcClient::new(FakeNode::new(u64::MAX / 64)).with_parallelism(8);
        let seq = client.fetch_range(start, end).unwrap();
        assert_eq!(seq.len(), 78_290);
        assert_eq!(seq.first().unwrap().block_number, start);
        assert_eq!(seq.last().unwrap().block_number, end);
    }

    #[test]
    fn parallel_and_serial_agree() {
        let serial = RpcClient::new(FakeNode::new(500)).with_parallelism(1);
        let parallel = RpcClient::new(FakeNode::new(500)).with_parallelism(7);
        assert_eq!(
            serial.fetch_range(100, 400).unwrap(),
            parallel.fetch_range(100, 400).unwrap()
        );
    }
}
