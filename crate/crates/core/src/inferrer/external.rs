//! Adapters for name-to-gender HTTP services.
//!
//! Each service is described by an [`ExternalAdapterConfig`] (a key-value
//! file): a URL template, the environment variable holding the credential,
//! a request rate limit, a retry policy, where the label and confidence sit
//! in the JSON response, and how raw labels map onto [`GenderLabel`].
//! Raw responses are cached on disk under `<cache_dir>/<adapter id>/<name>.json`.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use serde_json::Value;

use super::rate_limit::RateLimiter;
use super::{InferError, Inferrer, InferrerHandle, InferrerKind};
use crate::config::{ConfigError, KeyValues};
use crate::mle::{GenderLabel, Prediction};

/// Scale the service reports confidence on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConfidenceScale {
    /// 0 to 1
    Unit,
    /// 0 to 100
    Percent,
}

impl ConfidenceScale {
    pub fn normalize(&self, raw: f64) -> f64 {
        let v = match self {
            ConfidenceScale::Unit => raw,
            ConfidenceScale::Percent => raw / 100.0,
        };
        v.clamp(0.0, 1.0)
    }
}

/// Raw service labels to [`GenderLabel`], matched case-insensitively.
#[derive(Debug, Clone, Default)]
pub struct LabelMapping {
    aliases: HashMap<String, GenderLabel>,
    default: Option<GenderLabel>,
}

impl LabelMapping {
    pub fn empty() -> Self {
        Self::default()
    }

    /// The six-way label set some services use, collapsed to four:
    /// female and mostly female to Female, male and mostly male to Male,
    /// andy (androgynous) to Ambiguous, unknown to Unknown.
    pub fn standard() -> Self {
        let mut m = Self::empty();
        for raw in ["female", "mostly female", "mostly_female", "f"] {
            m = m.alias(raw, GenderLabel::Female);
        }
        for raw in ["male", "mostly male", "mostly_male", "m"] {
            m = m.alias(raw, GenderLabel::Male);
        }
        m.alias("andy", GenderLabel::Ambiguous).alias("unknown", GenderLabel::Unknown)
    }

    pub fn alias(mut self, raw: &str, label: GenderLabel) -> Self {
        self.aliases.insert(raw.trim().to_lowercase(), label);
        self
    }

    pub fn with_default(mut self, label: GenderLabel) -> Self {
        self.default = Some(label);
        self
    }

    pub fn resolve(&self, raw: &str) -> Option<GenderLabel> {
        self.aliases.get(&raw.trim().to_lowercase()).copied().or(self.default)
    }
}

/// Turns a raw service label and confidence into a [`Prediction`].
///
/// The confidence is taken to refer to the returned label: a Female answer
/// with confidence `c` gives `p_female = c`, a Male answer gives `1 - c`.
/// Without a confidence, definite labels get 1.0 or 0.0. Ambiguous answers
/// always carry 0.5.
pub fn map_external_label(
    raw_label: &str,
    raw_confidence: Option<f64>,
    mapping: &LabelMapping,
    scale: ConfidenceScale,
    source: &str,
) -> Result<Prediction, InferError> {
    let label = mapping.resolve(raw_label).ok_or_else(|| InferError::Mapping(raw_label.to_string()))?;
    let confidence = raw_confidence.filter(|c| c.is_finite()).map(|c| scale.normalize(c));
    let p_female = match label {
        GenderLabel::Female => Some(confidence.unwrap_or(1.0)),
        GenderLabel::Male => Some(1.0 - confidence.unwrap_or(1.0)),
        GenderLabel::Ambiguous => Some(0.5),
        GenderLabel::Unknown => None,
    };
    Ok(Prediction::new(label, p_female, source))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    /// Delay before the first retry; doubles for each further retry.
    pub backoff: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self { max_attempts: 3, backoff: Duration::from_millis(500) }
    }
}

impl RetryPolicy {
    fn delay(&self, retry: u32) -> Duration {
        self.backoff.saturating_mul(1u32 << retry.saturating_sub(1).min(16))
    }
}

#[derive(Debug, Clone)]
pub struct ExternalAdapterConfig {
    pub id: String,
    /// URL with `{name}` and optionally `{credential}` placeholders.
    pub endpoint: String,
    /// Environment variable holding the credential.
    pub credential_env: Option<String>,
    /// Requests per second.
    pub rate_limit: u32,
    pub retry: RetryPolicy,
    /// Dot-separated path to the label in the JSON response.
    pub label_path: String,
    pub confidence_path: Option<String>,
    pub confidence_scale: ConfidenceScale,
    pub labels: LabelMapping,
    pub batch_limit: usize,
    /// Maximum requests in flight.
    pub concurrency: usize,
    pub cache_dir: Option<PathBuf>,
    pub timeout: Duration,
}

impl ExternalAdapterConfig {
    pub fn new(id: &str, endpoint: &str, label_path: &str) -> Self {
        Self {
            id: id.to_string(),
            endpoint: endpoint.to_string(),
            credential_env: None,
            rate_limit: 1,
            retry: RetryPolicy::default(),
            label_path: label_path.to_string(),
            confidence_path: None,
            confidence_scale: ConfidenceScale::Unit,
            labels: LabelMapping::standard(),
            batch_limit: 100,
            concurrency: 1,
            cache_dir: None,
            timeout: Duration::from_secs(30),
        }
    }

    /// Builds a config from key-value entries:
    ///
    /// ```text
    /// id = genderapi
    /// endpoint = https://example.test/get?name={name}&key={credential}
    /// credential_env = GENDER_API_KEY
    /// rate_limit = 5
    /// max_attempts = 3
    /// backoff_ms = 500
    /// label_path = gender
    /// confidence_path = accuracy
    /// confidence_scale = 100
    /// label.mostly female = female
    /// default_label = unknown
    /// batch_limit = 100
    /// concurrency = 4
    /// cache_dir = cache
    /// timeout_ms = 30000
    /// ```
    pub fn from_key_values(kv: &KeyValues) -> Result<Self, ConfigError> {
        let mut cfg = Self::new(kv.require("id")?, kv.require("endpoint")?, kv.require("label_path")?);
        cfg.credential_env = kv.get("credential_env").filter(|s| !s.is_empty()).map(String::from);
        cfg.rate_limit = kv.parse_or("rate_limit", cfg.rate_limit)?;
        cfg.retry.max_attempts = kv.parse_or("max_attempts", cfg.retry.max_attempts)?;
        cfg.retry.backoff = Duration::from_millis(kv.parse_or("backoff_ms", 500u64)?);
        cfg.confidence_path = kv.get("confidence_path").filter(|s| !s.is_empty()).map(String::from);
        cfg.confidence_scale = match kv.get("confidence_scale").unwrap_or("1") {
            "1" | "unit" => ConfidenceScale::Unit,
            "100" | "percent" => ConfidenceScale::Percent,
            other => {
                return Err(ConfigError::Invalid {
                    key: "confidence_scale".into(),
                    message: format!("`{other}` is neither 1 nor 100"),
                })
            }
        };
        for (raw, label) in kv.with_prefix("label.") {
            let label = label
                .parse::<GenderLabel>()
                .map_err(|message| ConfigError::Invalid { key: format!("label.{raw}"), message })?;
            cfg.labels = cfg.labels.alias(raw, label);
        }
        if let Some(default) = kv.get("default_label") {
            let label = default
                .parse::<GenderLabel>()
                .map_err(|message| ConfigError::Invalid { key: "default_label".into(), message })?;
            cfg.labels = cfg.labels.with_default(label);
        }
        cfg.batch_limit = kv.parse_or("batch_limit", cfg.batch_limit)?;
        cfg.concurrency = kv.parse_or("concurrency", cfg.concurrency)?;
        cfg.cache_dir = kv.get("cache_dir").filter(|s| !s.is_empty()).map(PathBuf::from);
        cfg.timeout = Duration::from_millis(kv.parse_or("timeout_ms", 30_000u64)?);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        Self::from_key_values(&KeyValues::load(path)?)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |key: &str, message: &str| ConfigError::Invalid { key: key.into(), message: message.into() };
        if self.id.is_empty() || self.id.contains(['/', '\\']) {
            return Err(invalid("id", "must be non-empty and contain no path separators"));
        }
        if !self.endpoint.contains("{name}") {
            return Err(invalid("endpoint", "template lacks a {name} placeholder"));
        }
        if self.rate_limit == 0 {
            return Err(invalid("rate_limit", "must be positive"));
        }
        if self.retry.max_attempts == 0 {
            return Err(invalid("max_attempts", "must be at least 1"));
        }
        if self.batch_limit == 0 || self.concurrency == 0 {
            return Err(invalid("batch_limit", "batch_limit and concurrency must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TransportError {
    /// Could not reach the host at all.
    Connect(String),
    /// The server answered with a non-success status.
    Status(u16),
    Other(String),
}

impl TransportError {
    fn retryable(&self) -> bool {
        match self {
            TransportError::Status(code) => *code == 429 || *code >= 500,
            _ => true,
        }
    }
}

impl std::fmt::Display for TransportError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TransportError::Connect(m) => write!(f, "connection failed: {m}"),
            TransportError::Status(code) => write!(f, "HTTP status {code}"),
            TransportError::Other(m) => f.write_str(m),
        }
    }
}

/// Fetches a URL and returns the response body.
pub trait Transport: Send + Sync {
    fn get(&self, url: &str) -> Result<String, TransportError>;
}

pub struct UreqTransport {
    agent: ureq::Agent,
}

impl UreqTransport {
    pub fn new(timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder().timeout_global(Some(timeout)).build().into();
        Self { agent }
    }
}

impl Transport for UreqTransport {
    fn get(&self, url: &str) -> Result<String, TransportError> {
        match self.agent.get(url).call() {
            Ok(mut resp) => resp.body_mut().read_to_string().map_err(|e| TransportError::Other(e.to_string())),
            Err(ureq::Error::StatusCode(code)) => Err(TransportError::Status(code)),
            Err(e @ (ureq::Error::ConnectionFailed | ureq::Error::HostNotFound | ureq::Error::Io(_))) => {
                Err(TransportError::Connect(e.to_string()))
            }
            Err(e) => Err(TransportError::Other(e.to_string())),
        }
    }
}

/// A configured HTTP service behind the [`Inferrer`] interface.
pub struct ExternalAdapter {
    config: ExternalAdapterConfig,
    credential: Option<String>,
    transport: Arc<dyn Transport>,
    limiter: RateLimiter,
    probed: AtomicBool,
}

impl ExternalAdapter {
    /// Validates the config and resolves the credential from the
    /// environment, failing before any request is made.
    pub fn new(config: ExternalAdapterConfig, transport: Arc<dyn Transport>) -> Result<Self, InferError> {
        config.validate()?;
        let credential = match &config.credential_env {
            None => None,
            Some(var) => match std::env::var(var) {
                Ok(v) if !v.is_empty() => Some(v),
                _ => {
                    return Err(InferError::Config(format!(
                        "{}: environment variable `{var}` is unset or empty",
                        config.id
                    )))
                }
            },
        };
        if credential.is_none() && config.endpoint.contains("{credential}") {
            return Err(InferError::Config(format!(
                "{}: endpoint uses {{credential}} but no credential_env is set",
                config.id
            )));
        }
        let limiter = RateLimiter::per_second(config.rate_limit);
        Ok(Self { config, credential, transport, limiter, probed: AtomicBool::new(false) })
    }

    pub fn connect(config: ExternalAdapterConfig) -> Result<Self, InferError> {
        let transport = Arc::new(UreqTransport::new(config.timeout));
        Self::new(config, transport)
    }

    pub fn config(&self) -> &ExternalAdapterConfig {
        &self.config
    }

    pub fn into_handle(self) -> InferrerHandle {
        let id = self.config.id.clone();
        let batch = self.config.batch_limit;
        InferrerHandle::new(id, InferrerKind::ExternalHttp, batch, Arc::new(self))
    }

    fn url_for(&self, name: &str) -> String {
        let encode = |s: &str| url::form_urlencoded::byte_serialize(s.as_bytes()).collect::<String>();
        let mut url = self.config.endpoint.replace("{name}", &encode(name));
        if let Some(cred) = &self.credential {
            url = url.replace("{credential}", &encode(cred));
        }
        url
    }

    fn cache_path(&self, name: &str) -> Option<PathBuf> {
        self.config.cache_dir.as_ref().map(|dir| dir.join(&self.config.id).join(format!("{name}.json")))
    }

    fn cached(&self, name: &str) -> Option<String> {
        fs::read_to_string(self.cache_path(name)?).ok()
    }

    fn store(&self, name: &str, body: &str) {
        let Some(path) = self.cache_path(name) else { return };
        let result = path
            .parent()
            .map_or(Ok(()), fs::create_dir_all)
            .and_then(|_| fs::write(&path, body.as_bytes()));
        if let Err(e) = result {
            log::warn!("{}: could not cache response for `{name}`: {e}", self.config.id);
        }
    }

    /// One request with retries, each attempt passing through the limiter.
    fn fetch(&self, name: &str) -> Result<String, TransportError> {
        let url = self.url_for(name);
        let mut attempt = 1;
        loop {
            self.limiter.acquire();
            match self.transport.get(&url) {
                Ok(body) => return Ok(body),
                Err(e) if attempt < self.config.retry.max_attempts && e.retryable() => {
                    log::debug!("{}: attempt {attempt} for `{name}` failed: {e}", self.config.id);
                    thread::sleep(self.config.retry.delay(attempt));
                    attempt += 1;
                }
                Err(e) => return Err(e),
            }
        }
    }

    fn parse_body(&self, id: &str, body: &str) -> Result<Prediction, String> {
        let json: Value = serde_json::from_str(body).map_err(|e| format!("invalid JSON: {e}"))?;
        let label = match lookup(&json, &self.config.label_path) {
            Some(Value::String(s)) => s.clone(),
            Some(Value::Null) | None => "unknown".to_string(),
            Some(other) => other.to_string(),
        };
        let confidence = self.config.confidence_path.as_deref().and_then(|p| match lookup(&json, p) {
            Some(Value::Number(n)) => n.as_f64(),
            Some(Value::String(s)) => s.trim().parse().ok(),
            _ => None,
        });
        map_external_label(&label, confidence, &self.config.labels, self.config.confidence_scale, id)
            .map_err(|e| e.to_string())
    }

    fn resolve(&self, id: &str, name: &str, body: Result<String, TransportError>) -> Prediction {
        let body = match body {
            Ok(b) => b,
            Err(e) => {
                log::warn!("{}: giving up on `{name}`: {e}", self.config.id);
                return Prediction::unknown(id);
            }
        };
        match self.parse_body(id, &body) {
            Ok(pred) => {
                self.store(name, &body);
                pred
            }
            Err(msg) => {
                log::warn!("{}: unusable response for `{name}`: {msg}", self.config.id);
                Prediction::unknown(id)
            }
        }
    }
}

fn lookup<'a>(json: &'a Value, path: &str) -> Option<&'a Value> {
    path.split('.').filter(|s| !s.is_empty()).try_fold(json, |v, key| match v {
        Value::Array(items) => key.parse::<usize>().ok().and_then(|i| items.get(i)),
        _ => v.get(key),
    })
}

impl Inferrer for ExternalAdapter {
    fn infer(&self, id: &str, names: &[String]) -> Result<Vec<Prediction>, InferError> {
        let mut results: Vec<Option<Prediction>> = vec![None; names.len()];
        let mut pending = Vec::new();
        for (i, name) in names.iter().enumerate() {
            match self.cached(name).and_then(|body| self.parse_body(id, &body).ok()) {
                Some(pred) => results[i] = Some(pred),
                None => pending.push(i),
            }
        }

        let mut pending = pending.as_slice();
        if !self.probed.load(Ordering::SeqCst) {
            if let Some((&first, rest)) = pending.split_first() {
                let body = self.fetch(&names[first]);
                if let Err(TransportError::Connect(message)) = &body {
                    return Err(InferError::Unreachable { id: self.config.id.clone(), message: message.clone() });
                }
                self.probed.store(true, Ordering::SeqCst);
                results[first] = Some(self.resolve(id, &names[first], body));
                pending = rest;
            }
        }

        let next = AtomicUsize::new(0);
        let filled = Mutex::new(Vec::with_capacity(pending.len()));
        let workers = self.config.concurrency.min(pending.len());
        thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(|| loop {
                    let k = next.fetch_add(1, Ordering::SeqCst);
                    let Some(&i) = pending.get(k) else { break };
                    let pred = self.resolve(id, &names[i], self.fetch(&names[i]));
                    filled.lock().expect("result lock poisoned").push((i, pred));
                });
            }
        });
        for (i, pred) in filled.into_inner().expect("result lock poisoned") {
            results[i] = Some(pred);
        }
        Ok(results.into_iter().map(|p| p.unwrap_or_else(|| Prediction::unknown(id))).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::time::Instant;

    /// Answers from a fixed body map and records when each request arrived.
    struct FakeEndpoint {
        bodies: HashMap<String, Result<String, TransportError>>,
        hits: Mutex<Vec<(String, Instant)>>,
    }

    impl FakeEndpoint {
        fn new(bodies: &[(&str, Result<&str, TransportError>)]) -> Self {
            Self {
                bodies: bodies.iter().map(|(k, v)| (k.to_string(), v.clone().map(String::from))).collect(),
                hits: Mutex::new(Vec::new()),
            }
        }

        fn hits_for(&self, name: &str) -> usize {
            self.hits.lock().unwrap().iter().filter(|(n, _)| n == name).count()
        }
    }

    impl Transport for FakeEndpoint {
        fn get(&self, url: &str) -> Result<String, TransportError> {
            let name = url.rsplit("name=").next().unwrap().to_string();
            self.hits.lock().unwrap().push((name.clone(), Instant::now()));
            self.bodies.get(&name).cloned().unwrap_or(Err(TransportError::Status(404)))
        }
    }

    fn config() -> ExternalAdapterConfig {
        let mut c = ExternalAdapterConfig::new("svc", "http://fake/?name={name}", "gender");
        c.confidence_path = Some("accuracy".into());
        c.confidence_scale = ConfidenceScale::Percent;
        c.rate_limit = 1000;
        c.retry = RetryPolicy { max_attempts: 3, backoff: Duration::from_millis(1) };
        c
    }

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn maps_six_way_labels() {
        let m = LabelMapping::standard();
        let map = |raw| map_external_label(raw, None, &m, ConfidenceScale::Unit, "s").unwrap().label;
        assert_eq!(map("mostly female"), GenderLabel::Female);
        assert_eq!(map("mostly_male"), GenderLabel::Male);
        assert_eq!(map("andy"), GenderLabel::Ambiguous);
        assert_eq!(map("unknown"), GenderLabel::Unknown);
        assert_eq!(map("Female"), GenderLabel::Female);
        assert!(matches!(
            map_external_label("robot", None, &m, ConfidenceScale::Unit, "s"),
            Err(InferError::Mapping(_))
        ));
        let with_default = LabelMapping::standard().with_default(GenderLabel::Unknown);
        let p = map_external_label("robot", None, &with_default, ConfidenceScale::Unit, "s").unwrap();
        assert_eq!(p.label, GenderLabel::Unknown);
    }

    #[test]
    fn rescales_percent_confidence() {
        let m = LabelMapping::standard();
        let p = map_external_label("female", Some(87.0), &m, ConfidenceScale::Percent, "s").unwrap();
        assert_eq!(p.p_female, Some(0.87));
        let p = map_external_label("male", Some(0.75), &m, ConfidenceScale::Unit, "s").unwrap();
        assert_eq!(p.p_female, Some(0.25));
    }

    #[test]
    fn recorded_response_maps_to_female() {
        let fake = Arc::new(FakeEndpoint::new(&[("anna", Ok(r#"{"name":"anna","gender":"female","accuracy":87}"#))]));
        let adapter = ExternalAdapter::new(config(), fake).unwrap().into_handle();
        let p = adapter.infer_one("anna").unwrap();
        assert_eq!(p.label, GenderLabel::Female);
        assert_eq!(p.p_female, Some(0.87));
        assert_eq!(p.source, "svc");
    }

    #[test]
    fn failures_degrade_to_unknown_after_retries() {
        let fake = Arc::new(FakeEndpoint::new(&[
            ("anna", Ok(r#"{"gender":"female"}"#)),
            ("bob", Err(TransportError::Status(503))),
            ("cleo", Ok("not json")),
        ]));
        let handle = ExternalAdapter::new(config(), fake.clone()).unwrap().into_handle();
        let preds = handle.infer_batch(&names(&["anna", "bob", "cleo", "dave"])).unwrap();
        let labels: Vec<_> = preds.iter().map(|p| p.label).collect();
        assert_eq!(labels, vec![GenderLabel::Female, GenderLabel::Unknown, GenderLabel::Unknown, GenderLabel::Unknown]);
        assert_eq!(fake.hits_for("bob"), 3);
        // 404 is not retried
        assert_eq!(fake.hits_for("dave"), 1);
    }

    #[test]
    fn unreachable_endpoint_fails_fast() {
        let fake = Arc::new(FakeEndpoint::new(&[("anna", Err(TransportError::Connect("refused".into())))]));
        let handle = ExternalAdapter::new(config(), fake).unwrap().into_handle();
        assert!(matches!(handle.infer_batch(&names(&["anna", "bob"])), Err(InferError::Unreachable { .. })));
    }

    #[test]
    fn missing_credential_fails_before_inference() {
        let mut c = config();
        c.credential_env = Some("NAMEGENDER_TEST_UNSET_CREDENTIAL".into());
        let fake = Arc::new(FakeEndpoint::new(&[]));
        assert!(matches!(ExternalAdapter::new(c, fake.clone()), Err(InferError::Config(_))));
        assert!(fake.hits.lock().unwrap().is_empty());

        let mut c = config();
        c.endpoint = "http://fake/?key={credential}&name={name}".into();
        assert!(matches!(ExternalAdapter::new(c, fake), Err(InferError::Config(_))));
    }

    #[test]
    fn responses_are_cached_verbatim() {
        let dir = tempfile::tempdir().unwrap();
        let body = "{\"gender\": \"male\",\n \"accuracy\": 90}";
        let fake = Arc::new(FakeEndpoint::new(&[("bob", Ok(body))]));
        let mut c = config();
        c.cache_dir = Some(dir.path().to_path_buf());
        let handle = ExternalAdapter::new(c.clone(), fake.clone()).unwrap().into_handle();
        handle.infer_one("bob").unwrap();
        let cached = fs::read(dir.path().join("svc").join("bob.json")).unwrap();
        assert_eq!(cached, body.as_bytes());

        let again = ExternalAdapter::new(c, fake.clone()).unwrap().into_handle();
        let p = again.infer_one("bob").unwrap();
        assert_eq!(p.label, GenderLabel::Male);
        assert!((p.p_female.unwrap() - 0.1).abs() < 1e-12);
        assert_eq!(fake.hits_for("bob"), 1);
    }

    #[test]
    fn dispatch_respects_rate_limit() {
        let all: Vec<String> = (0..12).map(|i| format!("n{i}")).collect();
        let bodies: Vec<(&str, Result<&str, TransportError>)> =
            all.iter().map(|n| (n.as_str(), Ok(r#"{"gender":"female"}"#))).collect();
        let fake = Arc::new(FakeEndpoint::new(&bodies));
        let mut c = config();
        c.rate_limit = 5;
        c.concurrency = 4;
        let handle = ExternalAdapter::new(c, fake.clone()).unwrap().into_handle();
        let start = Instant::now();
        let preds = handle.infer_batch(&all).unwrap();
        assert_eq!(preds.len(), 12);
        assert!(preds.iter().all(|p| p.label == GenderLabel::Female));
        // 12 requests at 5/s need at least two full windows
        assert!(start.elapsed() >= Duration::from_secs(2));
        let mut times: Vec<Instant> = fake.hits.lock().unwrap().iter().map(|(_, t)| *t).collect();
        times.sort();
        assert_eq!(times.len(), 12);
        // every window of six consecutive arrivals spans close to a second
        for w in times.windows(6) {
            assert!(w[5].duration_since(w[0]) >= Duration::from_millis(950));
        }
    }

    #[test]
    fn config_from_key_values() {
        let kv = KeyValues::parse(
            "id = gapi\nendpoint = https://x.test/get?name={name}\nlabel_path = result.gender\n\
             confidence_path = result.accuracy\nconfidence_scale = 100\nrate_limit = 3\n\
             label.w = female\ndefault_label = unknown\n",
        )
        .unwrap();
        let c = ExternalAdapterConfig::from_key_values(&kv).unwrap();
        assert_eq!(c.rate_limit, 3);
        assert_eq!(c.confidence_scale, ConfidenceScale::Percent);
        assert_eq!(c.labels.resolve("W"), Some(GenderLabel::Female));
        assert_eq!(c.labels.resolve("zzz"), Some(GenderLabel::Unknown));

        let bad = KeyValues::parse("id = x\nendpoint = http://x/\nlabel_path = g\n").unwrap();
        assert!(ExternalAdapterConfig::from_key_values(&bad).is_err());
        let zero = KeyValues::parse("id = x\nendpoint = http://x/{name}\nlabel_path = g\nrate_limit = 0\n").unwrap();
        assert!(ExternalAdapterConfig::from_key_values(&zero).is_err());
    }

    #[test]
    fn json_paths() {
        let v: Value = serde_json::from_str(r#"{"a":{"b":[{"c":1}]}}"#).unwrap();
        assert_eq!(lookup(&v, "a.b.0.c"), Some(&Value::from(1)));
        assert_eq!(lookup(&v, "a.x"), None);
    }
}
