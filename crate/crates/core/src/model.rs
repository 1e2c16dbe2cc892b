//! Shared domain types, identifiers, and validation.
//!
//! Every type here is an immutable value after construction and is safe to
//! share across workers. Identifiers are content hashes rather than
//! sequence numbers so that records merged from different checkpoints
//! deduplicate naturally.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::scalar;
use crate::Real;

/// Tolerance used when checking stored reward aggregates against their parts.
pub const REWARD_CONSISTENCY_TOL: Real = 1e-9;

/// Tolerance on the norm of stored embeddings.
pub const EMBEDDING_NORM_TOL: Real = 1e-6;

/// Deterministic, collision-resistant identifier for `text` within a
/// namespace. Stable across runs and platforms; hex-encoded.
///
/// Namespacing keeps ids from different record kinds disjoint even when
/// the hashed text collides (`("abc", "sample")` vs `("abc", "prompt")`).
pub fn content_hash(text: &str, namespace: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(namespace.as_bytes());
    hasher.update([0x1f]);
    hasher.update(text.as_bytes());
    let digest = hasher.finalize();
    // 128 bits is plenty for dedup ids and keeps records readable.
    digest[..16].iter().map(|b| format!("{b:02x}")).collect()
}

/// One synthesis task: label space plus references into the prompt and
/// scoring registries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub task_id: String,
    pub name: String,
    pub label_set: Vec<String>,
    pub prompt_template_ref: String,
    pub format_rules_ref: String,
    pub relevance_config_ref: String,
    #[serde(default)]
    pub description: String,
}

/// An ordered stream of tasks; the order is the training order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskStream {
    pub stream_id: String,
    pub tasks: Vec<TaskSpec>,
    pub seed: u64,
}

impl TaskStream {
    pub fn task_ids(&self) -> Vec<String> {
        self.tasks.iter().map(|t| t.task_id.clone()).collect()
    }

    pub fn task(&self, task_id: &str) -> Option<&TaskSpec> {
        self.tasks.iter().find(|t| t.task_id == task_id)
    }
}

/// How a prompt entered the pool.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Lineage {
    Base,
    DepthEvolved,
    BreadthEvolved,
}

/// Concrete slot-value vector instantiating a base template.
///
/// Entries are kept sorted by slot name so the canonical key and every
/// serialization are deterministic.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SlotAssignment {
    pub entries: BTreeMap<String, String>,
}

impl SlotAssignment {
    pub fn new(entries: BTreeMap<String, String>) -> Self {
        Self { entries }
    }

    pub fn from_pairs<I, K, V>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (K, V)>,
        K: Into<String>,
        V: Into<String>,
    {
        Self {
            entries: pairs
                .into_iter()
                .map(|(k, v)| (k.into(), v.into()))
                .collect(),
        }
    }

    /// Canonical `slot=value;slot=value` form, sorted by slot name. Used
    /// as the policy action key and in hashes.
    pub fn canonical_key(&self) -> String {
        self.entries
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(";")
    }
}

/// One concrete prompt, with provenance back to its template or parent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptInstance {
    pub prompt_id: String,
    pub text: String,
    pub task_id: String,
    pub assignment: SlotAssignment,
    pub lineage: Lineage,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent_id: Option<String>,
}

impl PromptInstance {
    /// The id is a pure function of `(text, task_id)`.
    pub fn compute_id(text: &str, task_id: &str) -> String {
        content_hash(&format!("{text}\u{1f}{task_id}"), "prompt")
    }
}

/// Per-sample reward record.
///
/// `ds` and `r_total` stay unset until set-level scoring has run; sample
/// scoring alone fills the three sub-scores and their weighted sum `rs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub s_struct: Real,
    pub s_fluent: Real,
    pub s_rel: Real,
    pub rs: Real,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ds: Option<Real>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_total: Option<Real>,
}

impl RewardBreakdown {
    /// Recompute `rs` from the parts and compare against the stored value.
    pub fn rs_consistent(&self, gamma: (Real, Real, Real)) -> bool {
        let expected = gamma.0 * self.s_struct + gamma.1 * self.s_fluent + gamma.2 * self.s_rel;
        (expected - self.rs).abs() <= REWARD_CONSISTENCY_TOL
    }

    /// Recompute `r_total` from `rs`/`ds` and compare against the stored
    /// value. Vacuously true while either part is unset.
    pub fn total_consistent(&self, lambda: Real) -> bool {
        match (self.ds, self.r_total) {
            (Some(ds), Some(total)) => {
                (lambda * self.rs + (1.0 - lambda) * ds - total).abs() <= REWARD_CONSISTENCY_TOL
            }
            _ => true,
        }
    }
}

/// One generated sample with prompt provenance and scoring results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSample {
    pub sample_id: String,
    pub task_id: String,
    pub prompt_id: String,
    pub text: String,
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding: Option<Vec<Real>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rewards: Option<RewardBreakdown>,
    #[serde(default)]
    pub step_index: u64,
}

impl SynthSample {
    /// The id is a pure function of `(task_id, text, label)`.
    pub fn compute_id(task_id: &str, text: &str, label: &str) -> String {
        content_hash(&format!("{task_id}\u{1f}{text}\u{1f}{label}"), "sample")
    }

    pub fn new(
        task_id: impl Into<String>,
        prompt_id: impl Into<String>,
        text: impl Into<String>,
        label: impl Into<String>,
        step_index: u64,
    ) -> Self {
        let task_id = task_id.into();
        let text = text.into();
        let label = label.into();
        let sample_id = Self::compute_id(&task_id, &text, &label);
        Self {
            sample_id,
            task_id,
            prompt_id: prompt_id.into(),
            text,
            label,
            embedding: None,
            rewards: None,
            step_index,
        }
    }

    /// Attach a unit-norm embedding, normalizing at ingestion so cosine
    /// reduces to a dot product downstream.
    pub fn with_embedding(mut self, mut embedding: Vec<Real>) -> Result<Self, scalar::NumericError> {
        scalar::l2_normalize(&mut embedding)?;
        self.embedding = Some(embedding);
        Ok(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    ToyDiscrete,
    ExternalEndpoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyStage {
    Raw,
    SftInitialized,
    RlTrained,
}

/// The synthesis policy carried across the stream: a discrete softmax
/// policy over slot-assignment actions, or a handle to an external model
/// endpoint trained elsewhere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyState {
    pub kind: PolicyKind,
    pub stage: PolicyStage,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action_logits: Option<BTreeMap<String, Real>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint_ref: Option<String>,
    #[serde(default)]
    pub trained_through: Vec<String>,
}

impl PolicyState {
    /// Uniform discrete policy over the given action keys.
    pub fn new_toy<I: IntoIterator<Item = String>>(actions: I) -> Self {
        Self {
            kind: PolicyKind::ToyDiscrete,
            stage: PolicyStage::Raw,
            action_logits: Some(actions.into_iter().map(|a| (a, 0.0)).collect()),
            endpoint_ref: None,
            trained_through: Vec::new(),
        }
    }

    pub fn new_external(endpoint_ref: impl Into<String>) -> Self {
        Self {
            kind: PolicyKind::ExternalEndpoint,
            stage: PolicyStage::Raw,
            action_logits: None,
            endpoint_ref: Some(endpoint_ref.into()),
            trained_through: Vec::new(),
        }
    }

    /// Softmax action probabilities in key order. Empty for external policies.
    pub fn action_probabilities(&self) -> Vec<(String, Real)> {
        let Some(logits) = &self.action_logits else {
            return Vec::new();
        };
        if logits.is_empty() {
            return Vec::new();
        }
        let values: Vec<Real> = logits.values().copied().collect();
        let probs = scalar::softmax(&values).expect("non-empty logits");
        logits.keys().cloned().zip(probs).collect()
    }

    /// Exactly one of `action_logits` / `endpoint_ref` must be populated,
    /// matching the kind.
    pub fn shape_valid(&self) -> bool {
        match self.kind {
            PolicyKind::ToyDiscrete => self.action_logits.is_some() && self.endpoint_ref.is_none(),
            PolicyKind::ExternalEndpoint => {
                self.action_logits.is_none() && self.endpoint_ref.is_some()
            }
        }
    }
}

/// Resolvable reference targets known at config-load time.
#[derive(Debug, Clone, Default)]
pub struct RefRegistry {
    pub templates: BTreeSet<String>,
    pub format_rules: BTreeSet<String>,
    pub relevance_configs: BTreeSet<String>,
}

/// One broken invariant, with a path to the offending field.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationIssue {
    pub path: String,
    pub message: String,
}

/// Collected validation failures; empty means the stream is well-formed.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub errors: Vec<ValidationIssue>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.errors.is_empty()
    }

    fn push(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.errors.push(ValidationIssue {
            path: path.into(),
            message: message.into(),
        });
    }
}

/// Check every stream invariant against the registry. Failures are
/// reported, not raised, so a caller sees all of them at once.
pub fn validate_stream(stream: &TaskStream, registry: &RefRegistry) -> ValidationReport {
    let mut report = ValidationReport::default();
    if stream.stream_id.is_empty() {
        report.push("stream_id", "stream_id must be non-empty");
    }
    if stream.tasks.is_empty() {
        report.push("tasks", "tasks non-empty");
        return report;
    }
    let mut seen = BTreeSet::new();
    for (i, task) in stream.tasks.iter().enumerate() {
        let at = |field: &str| format!("tasks[{i}].{field}");
        if task.task_id.is_empty() {
            report.push(at("task_id"), "task_id must be non-empty");
        }
        if !seen.insert(task.task_id.clone()) {
            report.push(
                at("task_id"),
                format!("duplicate task_id \"{}\"", task.task_id),
            );
        }
        if task.label_set.is_empty() {
            report.push(at("label_set"), "label_set must be non-empty");
        }
        if !registry.templates.contains(&task.prompt_template_ref) {
            report.push(
                at("prompt_template_ref"),
                format!("unresolved template \"{}\"", task.prompt_template_ref),
            );
        }
        if !registry.format_rules.contains(&task.format_rules_ref) {
            report.push(
                at("format_rules_ref"),
                format!("unresolved format rules \"{}\"", task.format_rules_ref),
            );
        }
        if !registry.relevance_configs.contains(&task.relevance_config_ref) {
            report.push(
                at("relevance_config_ref"),
                format!(
                    "unresolved relevance config \"{}\"",
                    task.relevance_config_ref
                ),
            );
        }
    }
    report
}

/// Check a stored sample's internal consistency: embedding norm and
/// reward aggregates recomputable from their parts.
pub fn validate_sample(
    sample: &SynthSample,
    expected_dim: Option<usize>,
    gamma: (Real, Real, Real),
    lambda: Real,
) -> ValidationReport {
    let mut report = ValidationReport::default();
    if let Some(embedding) = &sample.embedding {
        if let Some(dim) = expected_dim {
            if embedding.len() != dim {
                report.push(
                    "embedding",
                    format!("expected dimension {dim}, got {}", embedding.len()),
                );
            }
        }
        let norm = scalar::l2_norm(embedding);
        if (norm - 1.0).abs() > EMBEDDING_NORM_TOL {
            report.push("embedding", format!("norm {norm} is not 1 ± 1e-6"));
        }
    }
    if let Some(rewards) = &sample.rewards {
        if !rewards.rs_consistent(gamma) {
            report.push("rewards.rs", "rs does not match its weighted parts");
        }
        if !rewards.total_consistent(lambda) {
            report.push("rewards.r_total", "r_total does not match rs/ds");
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    fn registry() -> RefRegistry {
        RefRegistry {
            templates: ["tmpl"].iter().map(|s| s.to_string()).collect(),
            format_rules: ["fmt"].iter().map(|s| s.to_string()).collect(),
            relevance_configs: ["rel"].iter().map(|s| s.to_string()).collect(),
        }
    }

    fn task(id: &str) -> TaskSpec {
        TaskSpec {
            task_id: id.into(),
            name: id.to_uppercase(),
            label_set: vec!["positive".into(), "negative".into()],
            prompt_template_ref: "tmpl".into(),
            format_rules_ref: "fmt".into(),
            relevance_config_ref: "rel".into(),
            description: String::new(),
        }
    }

    #[test]
    fn content_hash_is_deterministic_and_namespaced() {
        assert_eq!(content_hash("abc", "sample"), content_hash("abc", "sample"));
        assert_ne!(content_hash("abc", "sample"), content_hash("abc", "prompt"));
        assert!(!content_hash("", "sample").is_empty());
        // pinned so any accidental change to the scheme is caught
        assert_eq!(content_hash("abc", "sample"), "aa3b0dd27c363dfcf0a5c0fcde5494da");
    }

    #[test]
    fn duplicate_task_id_is_reported_with_path() {
        let stream = TaskStream {
            stream_id: "s".into(),
            tasks: vec![task("yelp"), task("yelp")],
            seed: 0,
        };
        let report = validate_stream(&stream, &registry());
        assert_eq!(report.errors.len(), 1);
        assert_eq!(report.errors[0].path, "tasks[1].task_id");
    }

    #[test]
    fn four_task_stream_with_valid_refs_passes() {
        let stream = TaskStream {
            stream_id: "default".into(),
            tasks: vec![task("yelp"), task("amazon"), task("yahoo"), task("mnli")],
            seed: 7,
        };
        assert!(validate_stream(&stream, &registry()).is_empty());
    }

    #[test]
    fn empty_task_list_is_reported() {
        let stream = TaskStream {
            stream_id: "s".into(),
            tasks: vec![],
            seed: 0,
        };
        let report = validate_stream(&stream, &registry());
        assert_eq!(report.errors.len(), 1);
        assert_eq!(report.errors[0].path, "tasks");
    }

    #[test]
    fn unresolved_refs_are_reported() {
        let mut bad = task("yelp");
        bad.prompt_template_ref = "missing".into();
        let stream = TaskStream {
            stream_id: "s".into(),
            tasks: vec![bad],
            seed: 0,
        };
        let report = validate_stream(&stream, &registry());
        assert_eq!(report.errors.len(), 1);
        assert!(report.errors[0].message.contains("missing"));
    }

    #[test]
    fn sample_embedding_is_normalized_at_ingestion() {
        let sample = SynthSample::new("t", "p", "text", "positive", 0)
            .with_embedding(vec![3.0, 4.0])
            .unwrap();
        let embedding = sample.embedding.unwrap();
        assert!((scalar::l2_norm(&embedding) - 1.0).abs() < 1e-12);
        assert!((embedding[0] - 0.6).abs() < 1e-12);
    }

    #[test]
    fn reward_consistency_checks() {
        let rewards = RewardBreakdown {
            s_struct: 1.0,
            s_fluent: 0.5,
            s_rel: 0.0,
            rs: 0.65,
            ds: Some(0.4),
            r_total: Some(0.5 * 0.65 + 0.5 * 0.4),
        };
        assert!(rewards.rs_consistent((0.5, 0.3, 0.2)));
        assert!(rewards.total_consistent(0.5));
        assert!(!rewards.rs_consistent((1.0, 0.0, 0.0)));
    }

    #[test]
    fn policy_probabilities_form_a_simplex() {
        let policy = PolicyState::new_toy(["a".to_string(), "b".to_string(), "c".to_string()]);
        assert!(policy.shape_valid());
        let probs = policy.action_probabilities();
        let sum: Real = probs.iter().map(|(_, p)| p).sum();
        assert!((sum - 1.0).abs() < 1e-12);
        assert!(probs.iter().all(|(_, p)| *p > 0.0));
    }

    #[test]
    fn assignment_key_is_sorted_and_stable() {
        let a = SlotAssignment::from_pairs([("b", "2"), ("a", "1")]);
        assert_eq!(a.canonical_key(), "a=1;b=2");
    }

    #[test]
    fn core_types_round_trip_through_json() {
        let sample = SynthSample::new("t", "p", "text", "neg", 3)
            .with_embedding(vec![1.0, 0.0])
            .unwrap();
        let json = serde_json::to_string(&sample).unwrap();
        let back: SynthSample = serde_json::from_str(&json).unwrap();
        assert_eq!(sample, back);

        let policy = PolicyState::new_toy(["a=1".to_string()]);
        let json = serde_json::to_string(&policy).unwrap();
        let back: PolicyState = serde_json::from_str(&json).unwrap();
        assert_eq!(policy, back);
    }
}
