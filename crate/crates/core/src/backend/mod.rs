//! Pluggable generation, embedding, classification, and likelihood
//! providers.
//!
//! Two families ship: an HTTP JSON client speaking the common
//! chat-completion/embeddings gateway protocol (see `docs/wire-protocol.md`),
//! and deterministic local mocks that make the whole pipeline testable
//! offline. Every mock is a pure function of its spec, its seed, and the
//! request, so runs are byte-reproducible.

mod http;
mod mock;

pub use http::{HttpChatBackend, HttpEmbedBackend};
pub use mock::{MockClassifier, MockEmbedder, MockGenerator, MockLikelihood};

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::scalar;
use crate::Real;

#[derive(Debug, Clone, thiserror::Error)]
pub enum BackendError {
    #[error("request timed out after {attempts} attempts")]
    Timeout { attempts: u32 },
    #[error("http status {status} after {attempts} attempts")]
    HttpStatus { status: u16, attempts: u32 },
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("backend does not support this operation: {0}")]
    UnsupportedByBackend(String),
    #[error("auth token env var {0} is not set")]
    MissingAuthToken(String),
    #[error("unknown label \"{0}\"")]
    UnknownLabel(String),
    #[error("empty text input")]
    EmptyText,
    #[error("empty input list")]
    EmptyInput,
    #[error("invalid backend config: {0}")]
    InvalidConfig(String),
}

/// What a backend instance provides.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    HttpChat,
    HttpEmbed,
    MockGenerator,
    MockEmbedder,
    MockClassifier,
    MockLikelihood,
}

/// Sampling parameters forwarded to generation backends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodingParams {
    pub temperature: Real,
    pub max_tokens: u64,
    pub top_p: Real,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Default for DecodingParams {
    fn default() -> Self {
        Self {
            temperature: 0.8,
            max_tokens: 256,
            top_p: 0.95,
            seed: None,
        }
    }
}

impl DecodingParams {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MockGenMode {
    #[default]
    EchoTransform,
    TemplateTable,
    SeededMarkov,
}

/// Behavior of a mock generator. `table` entries match the request's user
/// text: a pattern ending in `*` is a prefix match, anything else is
/// exact; the first matching entry wins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct MockGeneratorSpec {
    pub mode: MockGenMode,
    #[serde(default)]
    pub table: Vec<(String, String)>,
    #[serde(default)]
    pub prefix: String,
    #[serde(default)]
    pub suffix: String,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockEmbedderSpec {
    pub dim: usize,
    pub ngram: usize,
}

impl Default for MockEmbedderSpec {
    fn default() -> Self {
        Self { dim: 64, ngram: 3 }
    }
}

/// Keyword-logit classifier: the label score is the count of its distinct
/// keywords present in the text, scaled then softmaxed over the label set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockClassifierSpec {
    pub keywords: BTreeMap<String, Vec<String>>,
    pub scale: Real,
}

impl Default for MockClassifierSpec {
    fn default() -> Self {
        Self {
            keywords: BTreeMap::new(),
            scale: 2.0,
        }
    }
}

/// One configured provider. Auth tokens are read from the environment
/// variable named by `auth_token_env`, never from the config file, and
/// are never serialized or logged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendConfig {
    pub backend_id: String,
    pub kind: BackendKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint_url: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub auth_token_env: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_name: Option<String>,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    #[serde(default = "default_max_retries")]
    pub max_retries: u32,
    #[serde(default = "default_backoff_ms")]
    pub retry_backoff_ms: u64,
    #[serde(default = "default_max_concurrency")]
    pub max_concurrency: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator_spec: Option<MockGeneratorSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedder_spec: Option<MockEmbedderSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classifier_spec: Option<MockClassifierSpec>,
}

fn default_timeout_ms() -> u64 {
    30_000
}
fn default_max_retries() -> u32 {
    2
}
fn default_backoff_ms() -> u64 {
    250
}
fn default_max_concurrency() -> usize {
    4
}

impl BackendConfig {
    pub fn mock_generator(id: impl Into<String>, spec: MockGeneratorSpec) -> Self {
        Self {
            backend_id: id.into(),
            kind: BackendKind::MockGenerator,
            endpoint_url: None,
            auth_token_env: None,
            model_name: None,
            timeout_ms: default_timeout_ms(),
            max_retries: default_max_retries(),
            retry_backoff_ms: default_backoff_ms(),
            max_concurrency: default_max_concurrency(),
            generator_spec: Some(spec),
            embedder_spec: None,
            classifier_spec: None,
        }
    }

    pub fn mock_embedder(id: impl Into<String>, spec: MockEmbedderSpec) -> Self {
        Self {
            embedder_spec: Some(spec),
            ..Self::mock_kind(id, BackendKind::MockEmbedder)
        }
    }

    pub fn mock_classifier(id: impl Into<String>, spec: MockClassifierSpec) -> Self {
        Self {
            classifier_spec: Some(spec),
            ..Self::mock_kind(id, BackendKind::MockClassifier)
        }
    }

    pub fn mock_likelihood(id: impl Into<String>) -> Self {
        Self::mock_kind(id, BackendKind::MockLikelihood)
    }

    fn mock_kind(id: impl Into<String>, kind: BackendKind) -> Self {
        Self {
            backend_id: id.into(),
            kind,
            endpoint_url: None,
            auth_token_env: None,
            model_name: None,
            timeout_ms: default_timeout_ms(),
            max_retries: default_max_retries(),
            retry_backoff_ms: default_backoff_ms(),
            max_concurrency: default_max_concurrency(),
            generator_spec: None,
            embedder_spec: None,
            classifier_spec: None,
        }
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        if self.backend_id.is_empty() {
            return Err(BackendError::InvalidConfig("backend_id is empty".into()));
        }
        if self.max_concurrency == 0 {
            return Err(BackendError::InvalidConfig(
                "max_concurrency must be >= 1".into(),
            ));
        }
        match self.kind {
            BackendKind::HttpChat | BackendKind::HttpEmbed => {
                if self.endpoint_url.is_none() {
                    return Err(BackendError::InvalidConfig(format!(
                        "backend \"{}\": http kinds require endpoint_url",
                        self.backend_id
                    )));
                }
            }
            BackendKind::MockGenerator => {
                if self.generator_spec.is_none() {
                    return Err(BackendError::InvalidConfig(format!(
                        "backend \"{}\": mock_generator requires generator_spec",
                        self.backend_id
                    )));
                }
            }
            BackendKind::MockEmbedder | BackendKind::MockClassifier | BackendKind::MockLikelihood => {}
        }
        Ok(())
    }
}

/// A generation request: optional instruction context plus the user text.
/// Maps onto chat messages for HTTP backends.
#[derive(Debug, Clone, PartialEq)]
pub struct GenRequest {
    pub system: Option<String>,
    pub user: String,
}

impl GenRequest {
    pub fn user_only(user: impl Into<String>) -> Self {
        Self {
            system: None,
            user: user.into(),
        }
    }

    pub fn with_system(system: impl Into<String>, user: impl Into<String>) -> Self {
        Self {
            system: Some(system.into()),
            user: user.into(),
        }
    }
}

pub trait TextGenerator: Send + Sync {
    fn generate(&self, request: &GenRequest, decoding: &DecodingParams) -> Result<String, BackendError>;
}

pub trait TextEmbedder: Send + Sync {
    /// One unit-norm vector per input, order preserved.
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<Real>>, BackendError>;
    fn dim(&self) -> usize;
}

pub trait LabelClassifier: Send + Sync {
    fn label_probability(
        &self,
        text: &str,
        label: &str,
        label_set: &[String],
    ) -> Result<Real, BackendError>;
}

pub trait LikelihoodModel: Send + Sync {
    /// Average per-token log-likelihood, always <= 0.
    fn avg_token_loglik(&self, text: &str) -> Result<Real, BackendError>;
}

/// 64-bit FNV-1a. Used wherever a stable, platform-independent hash is
/// needed (feature hashing, derived seeds); std's hasher makes no
/// stability promise across releases.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Derive a 32-byte rng seed from labeled parts.
pub fn derive_seed(parts: &[&str]) -> [u8; 32] {
    let mut out = [0u8; 32];
    for (i, chunk) in out.chunks_mut(8).enumerate() {
        let mut bytes = Vec::new();
        bytes.push(i as u8);
        for part in parts {
            bytes.extend_from_slice(part.as_bytes());
            bytes.push(0x1f);
        }
        chunk.copy_from_slice(&fnv1a64(&bytes).to_le_bytes());
    }
    out
}

/// Deterministic text embedding: character n-gram counts hashed into
/// `dim` buckets with signed hashing, then L2-normalized.
///
/// N-grams wrap around the end of the text, so concatenating a text with
/// itself scales every count uniformly and leaves the direction unchanged.
pub fn hashed_ngram_embed(text: &str, dim: usize, n: usize) -> Result<Vec<Real>, BackendError> {
    if text.is_empty() {
        return Err(BackendError::EmptyText);
    }
    if dim < 8 {
        return Err(BackendError::InvalidConfig("embedding dim must be >= 8".into()));
    }
    if n < 1 {
        return Err(BackendError::InvalidConfig("ngram size must be >= 1".into()));
    }
    let chars: Vec<char> = text.chars().collect();
    let mut counts = vec![0.0; dim];
    let mut gram = String::new();
    for start in 0..chars.len() {
        gram.clear();
        for offset in 0..n {
            gram.push(chars[(start + offset) % chars.len()]);
        }
        let hash = fnv1a64(gram.as_bytes());
        let bucket = (hash % dim as u64) as usize;
        let sign = if (hash >> 63) == 0 { 1.0 } else { -1.0 };
        counts[bucket] += sign;
    }
    if scalar::l2_norm(&counts) == 0.0 {
        // signed buckets canceled exactly; fall back to a deterministic axis
        let bucket = (fnv1a64(text.as_bytes()) % dim as u64) as usize;
        counts[bucket] = 1.0;
    }
    scalar::l2_normalize(&mut counts).expect("nonzero by construction");
    Ok(counts)
}

/// Built capabilities for one backend id.
#[derive(Clone, Default)]
pub struct BackendHandle {
    pub generator: Option<Arc<dyn TextGenerator>>,
    pub embedder: Option<Arc<dyn TextEmbedder>>,
    pub classifier: Option<Arc<dyn LabelClassifier>>,
    pub likelihood: Option<Arc<dyn LikelihoodModel>>,
}

/// All configured backends, indexed by id.
#[derive(Clone, Default)]
pub struct BackendHub {
    handles: BTreeMap<String, BackendHandle>,
}

impl BackendHub {
    pub fn build(configs: &[BackendConfig]) -> Result<Self, BackendError> {
        let mut handles = BTreeMap::new();
        for cfg in configs {
            cfg.validate()?;
            if handles.contains_key(&cfg.backend_id) {
                return Err(BackendError::InvalidConfig(format!(
                    "duplicate backend_id \"{}\"",
                    cfg.backend_id
                )));
            }
            let mut handle = BackendHandle::default();
            match cfg.kind {
                BackendKind::HttpChat => {
                    let client = Arc::new(HttpChatBackend::new(cfg.clone())?);
                    handle.generator = Some(client.clone());
                    handle.likelihood = Some(client);
                }
                BackendKind::HttpEmbed => {
                    handle.embedder = Some(Arc::new(HttpEmbedBackend::new(cfg.clone())?));
                }
                BackendKind::MockGenerator => {
                    let spec = cfg.generator_spec.clone().unwrap_or_default();
                    handle.generator = Some(Arc::new(MockGenerator::new(spec)));
                }
                BackendKind::MockEmbedder => {
                    let spec = cfg.embedder_spec.clone().unwrap_or_default();
                    handle.embedder = Some(Arc::new(MockEmbedder::new(spec)));
                }
                BackendKind::MockClassifier => {
                    let spec = cfg.classifier_spec.clone().unwrap_or_default();
                    handle.classifier = Some(Arc::new(MockClassifier::new(spec)));
                }
                BackendKind::MockLikelihood => {
                    handle.likelihood = Some(Arc::new(MockLikelihood::new()));
                }
            }
            handles.insert(cfg.backend_id.clone(), handle);
        }
        Ok(Self { handles })
    }

    pub fn handle(&self, backend_id: &str) -> Option<&BackendHandle> {
        self.handles.get(backend_id)
    }

    pub fn generator(&self, backend_id: &str) -> Result<Arc<dyn TextGenerator>, BackendError> {
        self.capability(backend_id, |h| h.generator.clone(), "generation")
    }

    pub fn embedder(&self, backend_id: &str) -> Result<Arc<dyn TextEmbedder>, BackendError> {
        self.capability(backend_id, |h| h.embedder.clone(), "embedding")
    }

    pub fn classifier(&self, backend_id: &str) -> Result<Arc<dyn LabelClassifier>, BackendError> {
        self.capability(backend_id, |h| h.classifier.clone(), "classification")
    }

    pub fn likelihood(&self, backend_id: &str) -> Result<Arc<dyn LikelihoodModel>, BackendError> {
        self.capability(backend_id, |h| h.likelihood.clone(), "likelihood scoring")
    }

    fn capability<T>(
        &self,
        backend_id: &str,
        get: impl Fn(&BackendHandle) -> Option<T>,
        what: &str,
    ) -> Result<T, BackendError> {
        let handle = self
            .handles
            .get(backend_id)
            .ok_or_else(|| BackendError::InvalidConfig(format!("unknown backend_id \"{backend_id}\"")))?;
        get(handle).ok_or_else(|| {
            BackendError::UnsupportedByBackend(format!("backend \"{backend_id}\" does not provide {what}"))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hashed_embed_is_pure_and_unit_norm() {
        let a = hashed_ngram_embed("hello world", 64, 3).unwrap();
        let b = hashed_ngram_embed("hello world", 64, 3).unwrap();
        assert_eq!(a, b);
        assert!((scalar::l2_norm(&a) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn concatenation_with_itself_keeps_direction() {
        let a = hashed_ngram_embed("some sample text", 64, 3).unwrap();
        let b = hashed_ngram_embed(
            &("some sample text".to_owned() + "some sample text"),
            64,
            3,
        )
        .unwrap();
        let cos = scalar::cosine_similarity(&a, &b).unwrap();
        assert!((cos - 1.0).abs() < 1e-9);
    }

    #[test]
    fn distinct_texts_map_apart() {
        let a = hashed_ngram_embed("aaaa", 64, 2).unwrap();
        let b = hashed_ngram_embed("zzzz", 64, 2).unwrap();
        assert!(scalar::cosine_similarity(&a, &b).unwrap() < 1.0 - 1e-6);
    }

    #[test]
    fn embed_rejects_bad_inputs() {
        assert!(matches!(
            hashed_ngram_embed("", 64, 2),
            Err(BackendError::EmptyText)
        ));
        assert!(matches!(
            hashed_ngram_embed("x", 4, 2),
            Err(BackendError::InvalidConfig(_))
        ));
    }

    #[test]
    fn http_config_requires_endpoint() {
        let cfg = BackendConfig {
            kind: BackendKind::HttpChat,
            endpoint_url: None,
            ..BackendConfig::mock_likelihood("chat")
        };
        assert!(matches!(cfg.validate(), Err(BackendError::InvalidConfig(_))));
    }

    #[test]
    fn hub_reports_missing_capability() {
        let hub = BackendHub::build(&[BackendConfig::mock_likelihood("lm")]).unwrap();
        assert!(hub.likelihood("lm").is_ok());
        assert!(matches!(
            hub.generator("lm"),
            Err(BackendError::UnsupportedByBackend(_))
        ));
        assert!(matches!(
            hub.generator("nope"),
            Err(BackendError::InvalidConfig(_))
        ));
    }

    #[test]
    fn config_round_trip_never_carries_a_token() {
        let cfg = BackendConfig {
            auth_token_env: Some("GATEWAY_TOKEN".into()),
            endpoint_url: Some("http://example.test/v1/chat".into()),
            ..BackendConfig::mock_likelihood("chat")
        };
        std::env::set_var("GATEWAY_TOKEN", "secret-value-123");
        let json = serde_json::to_string(&cfg).unwrap();
        assert!(!json.contains("secret-value-123"));
        std::env::remove_var("GATEWAY_TOKEN");
    }
}
